//! Acceptance checks. Runs as a plain binary and prints one PASS or FAIL
//! line per criterion; exits non-zero if any criterion fails other than
//! those listed in `KNOWN_RED`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use cegforge_cli::{PipelineConfig, Runner};
use cegforge_core::ceg::{ModelComparison, ModelSummary, Preferred, SINK};
use cegforge_core::dataset::{ColumnRef, CsvOptions};
use cegforge_core::event_tree::parse_ids;
use cegforge_core::priors::PriorMode;
use cegforge_core::score::log_marginal_stage;
use cegforge_core::spatial::area_probabilities;
use cegforge_core::{
    Colour, Dataset, DeletionMode, EventTree, LabelMode, PriorTable, StageModel, StagedTreeModel, Staging,
    VertexId,
};
use common::{fixture, full_pipeline, snapshot};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    f()?;
    let took = start.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn load(name: &str) -> Dataset {
    Dataset::from_csv_bytes(&std::fs::read(fixture(name)).unwrap(), &CsvOptions::default()).unwrap()
}

fn colour(hex: &str) -> Colour {
    hex.parse().unwrap()
}

fn round2(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

/// Log probability of observing `order` one draw at a time under a
/// Dirichlet-multinomial predictive.
fn sequential_log_predictive(prior: &[f64], order: &[usize]) -> f64 {
    let mut alpha = prior.to_vec();
    let mut total: f64 = alpha.iter().sum();
    let mut acc = 0.0;
    for &j in order {
        acc += (alpha[j] / total).ln();
        alpha[j] += 1.0;
        total += 1.0;
    }
    acc
}

fn draws(data: &[u64]) -> Vec<usize> {
    data.iter()
        .enumerate()
        .flat_map(|(j, &y)| std::iter::repeat(j).take(y as usize))
        .collect()
}

fn oracle_log_marginal(prior: &[f64], data: &[u64]) -> f64 {
    sequential_log_predictive(prior, &draws(data))
}

// Stages of the three-variable example, as (colour, members, prior, data,
// prior mean, posterior, posterior mean).
struct Row {
    colour: &'static str,
    members: &'static str,
    prior: &'static [f64],
    prior_mean: &'static [f64],
    data: &'static [u64],
    posterior: &'static [f64],
    posterior_mean: &'static [f64],
}

const EXAMPLE: [Row; 7] = [
    Row {
        colour: "#FFFFFF",
        members: "s0",
        prior: &[46.0, 69.0, 115.0],
        prior_mean: &[0.2, 0.3, 0.5],
        data: &[68, 86, 245],
        posterior: &[114.0, 155.0, 360.0],
        posterior_mean: &[0.18, 0.25, 0.57],
    },
    Row {
        colour: "#92DCE5",
        members: "s1,s2",
        prior: &[27.0, 73.0],
        prior_mean: &[0.27, 0.73],
        data: &[67, 87],
        posterior: &[94.0, 160.0],
        posterior_mean: &[0.37, 0.63],
    },
    Row {
        colour: "#CEBBC9",
        members: "s3",
        prior: &[31.0, 19.0],
        prior_mean: &[0.62, 0.38],
        data: &[98, 147],
        posterior: &[129.0, 166.0],
        posterior_mean: &[0.44, 0.56],
    },
    Row {
        colour: "#008FCC",
        members: "s4,s6",
        prior: &[17.0, 3.0],
        prior_mean: &[0.85, 0.15],
        data: &[61, 6],
        posterior: &[68.0, 9.0],
        posterior_mean: &[0.88, 0.12],
    },
    Row {
        colour: "#FE5F55",
        members: "s5,s7",
        prior: &[49.0, 51.0],
        prior_mean: &[0.49, 0.51],
        data: &[64, 23],
        posterior: &[113.0, 74.0],
        posterior_mean: &[0.60, 0.40],
    },
    Row {
        colour: "#66AA00",
        members: "s8",
        prior: &[23.0, 2.0],
        prior_mean: &[0.92, 0.08],
        data: &[78, 20],
        posterior: &[101.0, 22.0],
        posterior_mean: &[0.82, 0.18],
    },
    Row {
        colour: "#FFB400",
        members: "s9",
        prior: &[17.0, 8.0],
        prior_mean: &[0.68, 0.32],
        data: &[112, 35],
        posterior: &[129.0, 43.0],
        posterior_mean: &[0.75, 0.25],
    },
];

fn example_tree() -> EventTree {
    EventTree::from_dataset(&load("figure2.csv")).unwrap()
}

fn example_staging(t: &EventTree) -> Staging {
    let groups: Vec<Vec<VertexId>> = EXAMPLE[1..].iter().map(|r| parse_ids(r.members).unwrap()).collect();
    let colours: Vec<Colour> = EXAMPLE[1..].iter().map(|r| colour(r.colour)).collect();
    Staging::new().assign_stages(t, &groups, Some(&colours)).unwrap()
}

/// Prior table with each stage's vector looked up by its colour.
fn example_priors(t: &EventTree, s: &Staging) -> PriorTable {
    let uniform = PriorTable::uniform(t, s).unwrap();
    let overrides: BTreeMap<usize, Vec<f64>> = uniform
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let r = EXAMPLE.iter().find(|r| colour(r.colour) == row.colour).unwrap();
            (i, r.prior.to_vec())
        })
        .collect();
    PriorTable::specify(t, s, PriorMode::Custom, &overrides).unwrap()
}

fn prior_means() -> Check {
    let t = example_tree();
    let s = example_staging(&t);
    let p = example_priors(&t, &s);
    ensure!(p.rows.len() == 7, "{} stages", p.rows.len());
    for r in &EXAMPLE {
        let row = p.row_for_colour(colour(r.colour)).ok_or(format!("no stage for {}", r.colour))?;
        let got: Vec<i64> = row.mean().iter().map(|x| round2(*x)).collect();
        let want: Vec<i64> = r.prior_mean.iter().map(|x| round2(*x)).collect();
        ensure!(got == want, "{}: prior mean {got:?} vs {want:?}", r.colour);
    }
    Ok(())
}

fn posterior_update() -> Check {
    let t = example_tree();
    let s = example_staging(&t);
    let p = example_priors(&t, &s);
    let m = StagedTreeModel::new(&t, &s, &p, LabelMode::PosteriorMean)
        .map_err(|e| e.to_string())?
        .posterior_update();
    ensure!(m.stages().len() == 7, "{} stages", m.stages().len());
    let mut mismatches = Vec::new();
    for r in &EXAMPLE {
        let st = m
            .stages()
            .iter()
            .find(|st| st.colour == colour(r.colour))
            .ok_or(format!("no stage for {}", r.colour))?;
        ensure!(st.data == r.data, "{}: data {:?} vs {:?}", r.colour, st.data, r.data);
        for ((a, y), post) in st.prior.iter().zip(&st.data).zip(&st.posterior) {
            ensure!(a + *y as f64 == *post, "{}: {a} + {y} != {post}", r.colour);
        }
        let got: Vec<i64> = st.posterior_mean().iter().map(|x| round2(*x)).collect();
        let want: Vec<i64> = r.posterior_mean.iter().map(|x| round2(*x)).collect();
        if st.posterior != r.posterior || got != want {
            mismatches.push(format!(
                "{}: posterior {:?} mean {got:?}, printed {:?} mean {want:?}",
                r.colour, st.posterior, r.posterior
            ));
        }
    }
    ensure!(mismatches.is_empty(), "{}", mismatches.join("; "));
    Ok(())
}

fn tree_shape() -> Check {
    let csv = common::toml_path(&fixture("homicides_like.csv"));
    let config = PipelineConfig::from_toml(&format!(
        "[[commands]]\nrun = \"tree.build\"\ncsv = {csv}\ncolumns = [3, 2, 4, 5]\n"
    ))
    .map_err(|e| e.to_string())?;
    let mut runner = Runner::new(".");
    runner.run_all(&config.commands).map_err(|e| e.to_string())?;
    let t = runner.workspace.tree.clone().ok_or("no tree")?;
    let s = t.summary();
    ensure!((s.node_count, s.edge_count) == (61, 60), "built {} nodes, {} edges", s.node_count, s.edge_count);
    let cut = PipelineConfig::from_toml(
        "[[commands]]\nrun = \"tree.delete\"\nids = \"s15,s16,s19,s20,s23,s24,s27,s28\"\n",
    )
    .map_err(|e| e.to_string())?;
    runner.run_all(&cut.commands).map_err(|e| e.to_string())?;
    let s = runner.workspace.tree.as_ref().ok_or("no tree")?.summary();
    ensure!(
        (s.node_count, s.edge_count, s.unique_labels) == (45, 44, 10),
        "after deletion {} nodes, {} edges, {} labels",
        s.node_count,
        s.edge_count,
        s.unique_labels
    );
    Ok(())
}

fn log_marginal_oracle() -> Check {
    let mut r = rng(7);
    for case in 0..1000 {
        let k = r.gen_range(2..=5);
        let prior: Vec<f64> = (0..k).map(|_| r.gen_range(0.05..25.0)).collect();
        let data: Vec<u64> = (0..k).map(|_| r.gen_range(0..=50)).collect();
        let got = log_marginal_stage(&prior, &data).map_err(|e| e.to_string())?;
        let mut order = draws(&data);
        for _ in 0..20 {
            order.shuffle(&mut r);
            let want = sequential_log_predictive(&prior, &order);
            ensure!((got - want).abs() < 1e-8, "case {case}: {got} vs {want} for {prior:?} {data:?}");
        }
    }
    Ok(())
}

/// Table with `vars` categorical columns. Each prefix draws its next value
/// from its own random weights so that some situations look alike and
/// others do not.
fn skewed_dataset(r: &mut ChaCha8Rng, cards: &[usize], rows: usize) -> Dataset {
    let mut weights: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    let mut out = Vec::new();
    for i in 0..rows.max(*cards.iter().max().unwrap()) {
        let mut prefix = Vec::new();
        for &c in cards {
            let x = if i < c {
                i
            } else {
                let w = weights
                    .entry(prefix.clone())
                    .or_insert_with(|| (0..c).map(|_| r.gen_range(0.1..1.0)).collect());
                let total: f64 = w.iter().sum();
                let mut u = r.gen_range(0.0..total);
                let mut pick = c - 1;
                for (j, wj) in w.iter().enumerate() {
                    if u < *wj {
                        pick = j;
                        break;
                    }
                    u -= wj;
                }
                pick
            };
            prefix.push(x);
        }
        out.push(prefix.iter().enumerate().map(|(v, x)| format!("{}{x}", (b'a' + v as u8) as char)).collect());
    }
    let columns = (0..cards.len()).map(|v| format!("v{v}")).collect();
    Dataset::new(columns, out).unwrap()
}

struct Cluster {
    members: Vec<VertexId>,
    level: usize,
    labels: Vec<String>,
    prior: Vec<f64>,
    data: Vec<u64>,
}

fn pair_gain(a: &Cluster, b: &Cluster) -> Option<f64> {
    if a.level != b.level || a.labels != b.labels {
        return None;
    }
    let prior: Vec<f64> = a.prior.iter().zip(&b.prior).map(|(x, y)| x + y).collect();
    let data: Vec<u64> = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Some(
        oracle_log_marginal(&prior, &data)
            - oracle_log_marginal(&a.prior, &a.data)
            - oracle_log_marginal(&b.prior, &b.data),
    )
}

fn best_gain(clusters: &[Cluster]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..clusters.len() {
        for j in i + 1..clusters.len() {
            if let Some(g) = pair_gain(&clusters[i], &clusters[j]) {
                best = best.max(g);
            }
        }
    }
    best
}

fn ahc_greedy_trace() -> Check {
    let mut r = rng(11);
    let mut merges = 0;
    for case in 0..200 {
        let cards: Vec<usize> = if r.gen_bool(0.5) {
            vec![r.gen_range(2..=6), r.gen_range(2..=3)]
        } else {
            vec![2, 2, r.gen_range(2..=3)]
        };
        let rows = r.gen_range(20..300);
        let t = EventTree::from_dataset(&skewed_dataset(&mut r, &cards, rows)).unwrap();
        let mut clusters: Vec<Cluster> = t
            .situations()
            .filter(|v| v.id != VertexId::ROOT)
            .map(|v| Cluster {
                members: vec![v.id],
                level: v.level,
                labels: t.out_labels(v.id).into_iter().map(str::to_string).collect(),
                prior: vec![1.0; t.out_labels(v.id).len()],
                data: t.out_counts(v.id),
            })
            .collect();
        ensure!(clusters.len() <= 6, "case {case}: {} situations", clusters.len());
        let out = Staging::new().run_ahc(&t, None).map_err(|e| e.to_string())?;
        let initial: f64 = clusters.iter().map(|c| oracle_log_marginal(&c.prior, &c.data)).sum();
        ensure!((out.initial_score - initial).abs() < 1e-8, "case {case}: initial score");
        let mut score = out.initial_score;
        for (n, step) in out.steps.iter().enumerate() {
            let find = |m: &[VertexId]| clusters.iter().position(|c| c.members == m);
            let (a, b) = match (find(&step.first), find(&step.second)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(format!("case {case} step {n}: merged clusters are not current")),
            };
            let gain = pair_gain(&clusters[a], &clusters[b]).ok_or(format!("case {case} step {n}: incompatible"))?;
            let best = best_gain(&clusters);
            ensure!((gain - step.log_bayes_factor).abs() < 1e-8, "case {case} step {n}: logBF {} vs {gain}", step.log_bayes_factor);
            ensure!(gain >= best - 1e-9, "case {case} step {n}: chose {gain}, best {best}");
            ensure!(step.log_bayes_factor > 0.0, "case {case} step {n}: non-positive merge");
            ensure!(
                (step.score - score - step.log_bayes_factor).abs() <= 1e-9,
                "case {case} step {n}: score moved by {} for logBF {}",
                step.score - score,
                step.log_bayes_factor
            );
            score = step.score;
            let (hi, lo) = if a > b { (a, b) } else { (b, a) };
            let second = clusters.remove(hi);
            let first = &mut clusters[lo];
            first.members.extend(second.members);
            first.members.sort();
            first.prior.iter_mut().zip(&second.prior).for_each(|(x, y)| *x += y);
            first.data.iter_mut().zip(&second.data).for_each(|(x, y)| *x += y);
            merges += 1;
        }
        ensure!((out.final_score - score).abs() <= 1e-9, "case {case}: final score");
        let left = best_gain(&clusters);
        ensure!(left <= 1e-9, "case {case}: stopped with a gain of {left} available");
    }
    ensure!(merges > 0, "no instance merged anything");
    Ok(())
}

fn paths_match(t: &EventTree, s: &Staging) -> Check {
    let p = PriorTable::uniform(t, s).map_err(|e| e.to_string())?;
    let ceg = StagedTreeModel::new(t, s, &p, LabelMode::PosteriorMean)
        .map_err(|e| e.to_string())?
        .posterior_update()
        .contract();
    let mut a = ceg.paths();
    let mut b = t.root_to_leaf_paths();
    a.sort();
    b.sort();
    ensure!(a == b, "path sets differ ({} vs {})", a.len(), b.len());
    let ids: BTreeSet<&str> = ceg.positions.iter().map(|p| p.id.as_str()).collect();
    let terminal: BTreeSet<&str> = ceg.edges.iter().map(|e| e.to.as_str()).filter(|to| !ids.contains(to)).collect();
    ensure!(terminal == BTreeSet::from([SINK]), "terminal vertices {terminal:?}");
    Ok(())
}

fn contraction() -> Check {
    let t = example_tree();
    let s = example_staging(&t);
    let ceg = StagedTreeModel::new(&t, &s, &example_priors(&t, &s), LabelMode::PosteriorMean)
        .map_err(|e| e.to_string())?
        .posterior_update()
        .contract();
    let pair = parse_ids("s1,s2").unwrap();
    ensure!(ceg.positions.iter().any(|p| p.members == pair), "s1 and s2 are not one position");
    ensure!(ceg.positions.len() == 7, "{} positions", ceg.positions.len());
    let into_sink = ceg.edges.iter().filter(|e| e.to == SINK).count();
    ensure!(into_sink == 8, "{into_sink} edges into the sink");
    paths_match(&t, &s)?;

    let mut r = rng(13);
    for case in 0..100 {
        let vars = r.gen_range(2..=4);
        let cards: Vec<usize> = (0..vars).map(|_| r.gen_range(2..=4)).collect();
        let rows = r.gen_range(30..400);
        let mut t = EventTree::from_dataset(&skewed_dataset(&mut r, &cards, rows)).unwrap();
        if r.gen_bool(0.5) {
            let mut pool: Vec<VertexId> =
                t.situations().map(|v| v.id).filter(|id| *id != VertexId::ROOT).collect();
            pool.shuffle(&mut r);
            let n = r.gen_range(1..=pool.len().min(3));
            t = t.delete_nodes(&pool[..n], DeletionMode::Splice).map_err(|e| e.to_string())?;
        }
        ensure!(t.root_to_leaf_paths().len() <= 500, "case {case}: too many paths");

        let singles: Vec<Vec<VertexId>> =
            t.situations().map(|v| v.id).filter(|id| *id != VertexId::ROOT).map(|id| vec![id]).collect();
        let s = Staging::new().assign_stages(&t, &singles, None).map_err(|e| e.to_string())?;
        let p = PriorTable::uniform(&t, &s).map_err(|e| e.to_string())?;
        let ceg = StagedTreeModel::new(&t, &s, &p, LabelMode::None).map_err(|e| e.to_string())?.contract();
        ensure!(
            ceg.positions.len() == t.situations().count(),
            "case {case}: singleton staging gave {} positions for {} situations",
            ceg.positions.len(),
            t.situations().count()
        );
        paths_match(&t, &s).map_err(|e| format!("case {case}, singletons: {e}"))?;

        // Random partition of each compatible class.
        let mut classes: BTreeMap<(usize, Vec<String>), Vec<VertexId>> = BTreeMap::new();
        for v in t.situations().filter(|v| v.id != VertexId::ROOT) {
            let labels = t.out_labels(v.id).into_iter().map(str::to_string).collect();
            classes.entry((v.level, labels)).or_default().push(v.id);
        }
        let mut groups = Vec::new();
        for members in classes.into_values() {
            let parts = r.gen_range(1..=members.len());
            let mut split: Vec<Vec<VertexId>> = vec![Vec::new(); parts];
            for m in members {
                split[r.gen_range(0..parts)].push(m);
            }
            groups.extend(split.into_iter().filter(|g| !g.is_empty()));
        }
        let s = Staging::new().assign_stages(&t, &groups, None).map_err(|e| e.to_string())?;
        paths_match(&t, &s).map_err(|e| format!("case {case}, random staging: {e}"))?;
        let s = Staging::new().run_ahc(&t, None).map_err(|e| e.to_string())?.staging;
        paths_match(&t, &s).map_err(|e| format!("case {case}, clustered: {e}"))?;
    }
    Ok(())
}

fn totals(total: f64) -> ModelSummary {
    ModelSummary { total, rows: Vec::new(), fingerprint: Some("same".into()) }
}

fn comparison() -> Check {
    let a = totals(-4938.692);
    let b = totals(-4890.359);
    let ab = ModelComparison::new(&a, &b);
    ensure!((ab.log_bayes_factor + 48.333).abs() <= 5e-4, "logBF {}", ab.log_bayes_factor);
    ensure!(ab.preferred == Preferred::Model2, "preferred {:?}", ab.preferred);
    let text = ab.to_string();
    ensure!(text.contains("Log Bayes factor of Model 1 vs Model 2:  -48.333"), "{text}");
    ensure!(text.contains("Preferred Model: Model 2"), "{text}");
    let ba = ModelComparison::new(&b, &a);
    ensure!(ba.log_bayes_factor == -ab.log_bayes_factor, "not antisymmetric");
    ensure!(ba.preferred == Preferred::Model1, "reverse preferred {:?}", ba.preferred);
    let mut r = rng(17);
    for _ in 0..1000 {
        let (x, y) = (totals(r.gen_range(-1e4..0.0)), totals(r.gen_range(-1e4..0.0)));
        ensure!(
            ModelComparison::new(&x, &y).log_bayes_factor == -ModelComparison::new(&y, &x).log_bayes_factor,
            "not antisymmetric for {} and {}",
            x.total,
            y.total
        );
    }
    Ok(())
}

/// Splits `total` into `k` non-negative counts.
fn split(total: u64, k: usize) -> Vec<u64> {
    let mut out = vec![total / k as u64; k];
    out[0] += total % k as u64;
    out
}

fn ess_flags() -> Check {
    let mut r = rng(19);
    for case in 0..500 {
        let n = r.gen_range(1..=20);
        let mut stages = Vec::new();
        let mut expected = Vec::new();
        for i in 0..n {
            let k = r.gen_range(2..=4);
            let prior: Vec<f64> = (0..k).map(|_| r.gen_range(0.05..40.0)).collect();
            let data: Vec<u64> = (0..k).map(|_| r.gen_range(0..=40)).collect();
            let ess = prior.iter().sum::<f64>() + data.iter().sum::<u64>() as f64;
            let id = format!("u{}", i + 1);
            if ess < 100.0 {
                expected.push(id.clone());
            }
            let labels = (0..k).map(|j| format!("e{j}")).collect();
            stages.push(StageModel::from_parts(&id, labels, prior, data).map_err(|e| e.to_string())?);
        }
        let s = ModelSummary::from_stages(&stages, None);
        ensure!(s.flagged() == expected, "case {case}: flagged {:?}, expected {expected:?}", s.flagged());
        let total: f64 = stages.iter().map(|st| oracle_log_marginal(&st.prior, &st.data)).sum();
        ensure!((s.total - total).abs() < 1e-8, "case {case}: total {} vs {total}", s.total);
    }

    // Worked model: prior vectors with the printed totals, counts with the
    // totals implied by the printed ESS column.
    let priors: [&[f64]; 17] = [
        &[200.0, 1000.0, 400.0, 100.0],
        &[25.0, 75.0],
        &[300.0, 900.0],
        &[50.0, 50.0],
        &[10.0, 140.0],
        &[20.0, 10.0],
        &[60.0, 40.0],
        &[3.0, 2.0],
        &[50.0, 950.0],
        &[1.0, 99.0],
        &[9.0, 1.0],
        &[5.0, 1.0],
        &[90.0, 5.0],
        &[50.0, 3.0],
        &[30.0, 8.0],
        &[70.0, 65.0],
        &[12.0, 4.0],
    ];
    let data_totals = [2229, 195, 1434, 377, 223, 184, 286, 22, 1432, 305, 5, 51, 88, 101, 1482, 305, 197];
    let printed_ess = [3929, 295, 2634, 477, 373, 214, 386, 27, 2432, 405, 15, 57, 183, 154, 1520, 440, 213];
    let mut stages = Vec::new();
    for (i, prior) in priors.iter().enumerate() {
        let k = prior.len();
        let labels = (0..k).map(|j| format!("e{j}")).collect();
        let id = format!("u{}", i + 1);
        stages.push(
            StageModel::from_parts(&id, labels, prior.to_vec(), split(data_totals[i], k))
                .map_err(|e| e.to_string())?,
        );
    }
    let s = ModelSummary::from_stages(&stages, None);
    for (row, ess) in s.rows.iter().zip(printed_ess) {
        ensure!(row.ess == ess as f64, "{}: ESS {} vs {ess}", row.stage, row.ess);
    }
    ensure!(s.flagged() == ["u8", "u11", "u12"], "flagged {:?}", s.flagged());
    let text = s.to_string();
    let marked: Vec<&str> =
        text.lines().filter(|l| l.ends_with(" **")).filter_map(|l| l.split_whitespace().next()).collect();
    ensure!(marked == ["u8", "u11", "u12"], "marked {marked:?}");
    Ok(())
}

fn spatial_oracle() -> Check {
    // Hand-set parameters keyed by the labels on the path to each situation.
    let params: BTreeMap<Vec<&str>, [f64; 2]> = BTreeMap::from([
        (vec!["A"], [3.0, 7.0]),
        (vec!["B"], [6.0, 4.0]),
        (vec!["A", "Female"], [9.0, 1.0]),
        (vec!["A", "Male"], [7.0, 3.0]),
        (vec!["B", "Female"], [5.0, 5.0]),
        (vec!["B", "Male"], [8.0, 2.0]),
    ]);
    let mut rows = Vec::new();
    for area in ["A", "B"] {
        for sex in ["Female", "Male"] {
            for out in ["Solved", "Unsolved"] {
                rows.push(vec![area.to_string(), sex.to_string(), out.to_string()]);
            }
        }
    }
    let data = Dataset::new(vec!["Borough".into(), "Sex".into(), "Outcome".into()], rows)
        .and_then(|d| d.with_area_column(Some("Borough")))
        .map_err(|e| e.to_string())?;
    let names: Vec<ColumnRef> = ["Borough", "Sex", "Outcome"].iter().map(|c| ColumnRef::Name(c.to_string())).collect();
    let t = EventTree::create(&data, &names).map_err(|e| e.to_string())?;
    let singles: Vec<Vec<VertexId>> =
        t.situations().map(|v| v.id).filter(|id| *id != VertexId::ROOT).map(|id| vec![id]).collect();
    let s = Staging::new().assign_stages(&t, &singles, None).map_err(|e| e.to_string())?;
    let uniform = PriorTable::uniform(&t, &s).map_err(|e| e.to_string())?;
    let stages = s.stages(&t).map_err(|e| e.to_string())?;
    let mut overrides = BTreeMap::new();
    for (i, stage) in stages.iter().enumerate() {
        let id = stage.members[0];
        if id == VertexId::ROOT {
            continue;
        }
        let key = t.path(id);
        let v = params.get(&key).ok_or(format!("no parameters for {key:?}"))?;
        ensure!(uniform.rows[i].colour == stage.colour, "stage order differs");
        overrides.insert(i, v.to_vec());
    }
    let p = PriorTable::specify(&t, &s, PriorMode::Uniform, &overrides).map_err(|e| e.to_string())?;
    // No update: the posterior means are exactly the hand-set means.
    let ceg = StagedTreeModel::new(&t, &s, &p, LabelMode::PosteriorMean).map_err(|e| e.to_string())?.contract();

    let mean = |key: Vec<&str>, j: usize| {
        let v = params[&key];
        v[j] / (v[0] + v[1])
    };
    for conds in [vec![], vec!["Female"], vec!["Male"]] {
        for target in ["Solved", "Unsolved"] {
            let table = area_probabilities(&ceg, target, &conds).map_err(|e| e.to_string())?;
            for area in ["A", "B"] {
                let mut weights = BTreeMap::from([("Solved", 0.0), ("Unsolved", 0.0)]);
                for (si, sex) in ["Female", "Male"].into_iter().enumerate() {
                    if !conds.is_empty() && !conds.contains(&sex) {
                        continue;
                    }
                    for (oi, out) in ["Solved", "Unsolved"].into_iter().enumerate() {
                        *weights.get_mut(out).unwrap() += mean(vec![area], si) * mean(vec![area, sex], oi);
                    }
                }
                let total: f64 = weights.values().sum();
                let mut sum = 0.0;
                for (cat, w) in &weights {
                    let row = table.get(area, cat).ok_or(format!("no row for {area}/{cat}"))?;
                    let got = row.probability.ok_or(format!("{area}/{cat} undefined"))?;
                    ensure!(
                        (got - w / total).abs() < 1e-9,
                        "{area}/{cat} given {conds:?}: {got} vs {}",
                        w / total
                    );
                    sum += got;
                }
                ensure!((sum - 1.0).abs() < 1e-9, "{area} given {conds:?} sums to {sum}");
                let sel = table.selected()[area].ok_or("selection undefined")?;
                ensure!((sel - weights[target] / total).abs() < 1e-9, "{area}: selected {sel}");
            }
        }
    }
    Ok(())
}

fn determinism() -> Check {
    let mut snaps = Vec::new();
    let mut logs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config = PipelineConfig::from_toml(&full_pipeline("out")).map_err(|e| e.to_string())?;
        let runner = cegforge_cli::run_pipeline(&config, dir.path(), None).map_err(|e| e.to_string())?;
        logs.push(runner.log);
        snaps.push(snapshot(&dir.path().join("out")));
    }
    let names: Vec<String> = snaps[0].keys().map(|p| p.display().to_string()).collect();
    ensure!(names.len() >= 10, "only {names:?} written");
    ensure!(snaps[0] == snaps[1], "artifacts differ between runs");
    ensure!(logs[0] == logs[1], "printed output differs between runs");
    Ok(())
}

/// Needs the real homicide table, so it only runs when the path is set.
fn real_data_total() -> Option<Check> {
    let path = std::env::var_os("CEGFORGE_HOMICIDES_CSV")?;
    Some((|| {
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        let data = Dataset::from_csv_bytes(&bytes, &CsvOptions::default()).map_err(|e| e.to_string())?;
        let cols: Vec<ColumnRef> = [3, 2, 4, 5].into_iter().map(ColumnRef::Index).collect();
        let t = EventTree::create(&data, &cols).map_err(|e| e.to_string())?;
        let s = Staging::new().run_ahc(&t, None).map_err(|e| e.to_string())?.staging;
        let p = PriorTable::uniform(&t, &s).map_err(|e| e.to_string())?;
        let total = StagedTreeModel::new(&t, &s, &p, LabelMode::PosteriorMean)
            .map_err(|e| e.to_string())?
            .posterior_update()
            .summary()
            .total;
        ensure!((total + 4890.359).abs() <= 1e-3, "total {total}");
        Ok(())
    })())
}

/// Criteria that cannot pass, with the exact failure they are expected to
/// report. Any other failure still fails the run.
const KNOWN_RED: [(&str, &str); 1] = [(
    "posterior = prior + data, means at 2 d.p.",
    "#008FCC: posterior [78.0, 9.0] mean [90, 10], printed [68.0, 9.0] mean [88, 12]",
)];

fn main() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Check>)> = vec![
        ("prior means at 2 d.p., 7 stages", Box::new(|| within(Duration::from_secs(1), prior_means))),
        ("posterior = prior + data, means at 2 d.p.", Box::new(|| within(Duration::from_secs(1), posterior_update))),
        ("tree shape 61/60, then 45/44/10", Box::new(tree_shape)),
        ("log marginal vs sequential predictive", Box::new(|| within(Duration::from_secs(10), log_marginal_oracle))),
        ("AHC greedy trace on 200 small trees", Box::new(|| within(Duration::from_secs(30), ahc_greedy_trace))),
        ("contraction positions, sink and path sets", Box::new(contraction)),
        ("model comparison -48.333, antisymmetric", Box::new(comparison)),
        ("ESS flags", Box::new(ess_flags)),
        ("per-area probabilities vs path enumeration", Box::new(spatial_oracle)),
        ("byte-identical pipeline artifacts", Box::new(determinism)),
    ];
    let (mut passed, mut known, mut failed) = (0, 0, 0);
    for (name, check) in &criteria {
        match check() {
            Ok(()) => {
                passed += 1;
                println!("PASS  {name}");
            }
            Err(why) if KNOWN_RED.contains(&(*name, why.as_str())) => {
                known += 1;
                println!("FAIL  {name}: {why} (known, left red)");
            }
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    match real_data_total() {
        None => println!("SKIP  real-data total -4890.359 (CEGFORGE_HOMICIDES_CSV not set)"),
        Some(Ok(())) => println!("PASS  real-data total -4890.359"),
        Some(Err(why)) => {
            failed += 1;
            println!("FAIL  real-data total -4890.359: {why}");
        }
    }
    println!("{passed} passed, {known} known red, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}

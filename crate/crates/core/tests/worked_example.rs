mod common;

use std::collections::{BTreeMap, BTreeSet};

use cegforge_core::dataset::ColumnRef;
use cegforge_core::event_tree::parse_ids;
use cegforge_core::priors::PriorMode;
use cegforge_core::spatial::{area_probabilities, load_geo, render_map_document};
use cegforge_core::{
    Colour, DeletionMode, Error, EventTree, LabelMode, PriorTable, StagedTreeModel, Staging,
};
use common::{fixture, load};

fn homicide_tree() -> EventTree {
    let data = load("homicides_like.csv");
    let cols: Vec<ColumnRef> = [3, 2, 4, 5].into_iter().map(ColumnRef::Index).collect();
    EventTree::create(&data, &cols).unwrap()
}

fn groups(pairs: &[(&str, &str)]) -> (Vec<Vec<cegforge_core::VertexId>>, Vec<Colour>) {
    pairs.iter()
        .map(|(ids, c)| (parse_ids(ids).unwrap(), c.parse::<Colour>().unwrap()))
        .unzip()
}

const MANUAL: [(&str, &str); 8] = [
    ("s13,s21", "#92DCE5"),
    ("s5,s9", "#C5D86D"),
    ("s17", "#F2DC5D"),
    ("s25", "#388697"),
    ("s6,s8,s10", "#FE5F55"),
    ("s12", "#FFAA00"),
    ("s2", "#A9E5BB"),
    ("s4", "#E79C9C"),
];

const REST: [(&str, &str); 8] = [
    ("s1", "#7987D7"),
    ("s3", "#D6E3AE"),
    ("s7", "#D6A56F"),
    ("s11", "#D7ADCD"),
    ("s14,s15,s16", "#79D391"),
    ("s18", "#8F52E0"),
    ("s19,s20,s22,s23,s24,s26", "#CCD3D2"),
    ("s27,s28", "#D884D2"),
];

#[test]
fn head_of_fixture() {
    let head = load("homicides_head.csv");
    assert_eq!(head.len(), 6);
    assert_eq!(
        head.columns(),
        ["Date", "Sex", "Method_of_Killing", "Domestic_Abuse", "Solved_Status", "Borough"]
    );
}

#[test]
fn tree_summaries_before_and_after_deletion() {
    let t = homicide_tree();
    let s = t.summary();
    assert_eq!((s.node_count, s.edge_count, s.unique_levels, s.unique_labels), (61, 60, 5, 10));
    let cut = parse_ids("s15,s16,s19,s20,s23,s24,s27,s28").unwrap();
    let fem = t.delete_nodes(&cut, DeletionMode::Splice).unwrap();
    let s = fem.summary();
    assert_eq!((s.node_count, s.edge_count, s.unique_levels, s.unique_labels), (45, 44, 5, 10));
    let text = s.to_string();
    assert!(text.contains("Number of nodes: 45\n"));
    assert!(text.contains("Unique labels in edges: 10\n"));
    // Male branches now go straight to the outcome.
    let male = fem.vertex(cegforge_core::VertexId(6)).unwrap();
    assert_eq!(fem.out_labels(male.id), ["Solved", "Unsolved"]);
    let pruned = t.delete_nodes(&cut, DeletionMode::Prune).unwrap();
    assert_eq!(pruned.node_count(), 61 - 8 * 3);
}

#[test]
fn partial_manual_staging_summary() {
    let t = homicide_tree();
    let (g, c) = groups(&MANUAL);
    let s = Staging::new().assign_stages(&t, &g, Some(&c)).unwrap();
    let sum = s.summary(&t);
    assert_eq!(sum.total_nodes, 61);
    assert_eq!(sum.total_edges, 60);
    assert_eq!(sum.left_to_colour, 16);
    let counts: BTreeMap<&str, usize> =
        sum.colour_counts.iter().map(|(c, n)| (c.as_str(), *n)).collect();
    let expected = BTreeMap::from([
        ("#388697", 1),
        ("#92DCE5", 2),
        ("#A9E5BB", 1),
        ("#C5D86D", 2),
        ("#E79C9C", 1),
        ("#F2DC5D", 1),
        ("#FE5F55", 3),
        ("#FFAA00", 1),
        ("#FFFFFF", 49),
    ]);
    assert_eq!(counts, expected);
    assert!(matches!(
        PriorTable::uniform(&t, &s),
        Err(Error::Incomplete(_))
    ));
    let done = s.run_ahc(&t, None).unwrap().staging;
    assert!(done.is_complete(&t));
    for (ids, colour) in MANUAL {
        for id in parse_ids(ids).unwrap() {
            assert_eq!(done.colour_of(id).unwrap().to_string(), colour);
        }
    }
}

#[test]
fn custom_priors_on_the_worked_staging() {
    let t = homicide_tree();
    let (mut g, mut c) = groups(&MANUAL);
    let (g2, c2) = groups(&REST);
    g.extend(g2);
    c.extend(c2);
    let s = Staging::new().assign_stages(&t, &g, Some(&c)).unwrap();
    let table = [
        vec![200.0, 1000.0, 400.0, 100.0],
        vec![25.0, 75.0],
        vec![300.0, 900.0],
        vec![50.0, 50.0],
        vec![10.0, 140.0],
        vec![20.0, 10.0],
        vec![60.0, 40.0],
        vec![3.0, 2.0],
        vec![50.0, 950.0],
        vec![1.0, 99.0],
        vec![10.0, 0.0],
        vec![5.0, 1.0],
        vec![90.0, 5.0],
        vec![50.0, 3.0],
        vec![30.0, 8.0],
        vec![70.0, 65.0],
        vec![12.0, 4.0],
    ];
    let mut overrides: BTreeMap<usize, Vec<f64>> = table.iter().cloned().enumerate().collect();
    // A zero parameter is not a Dirichlet prior.
    assert!(matches!(
        PriorTable::specify(&t, &s, PriorMode::Custom, &overrides),
        Err(Error::Validation(_))
    ));
    overrides.insert(10, vec![10.0, 1.0]);
    let p = PriorTable::specify(&t, &s, PriorMode::Custom, &overrides).unwrap();
    let shape: Vec<(String, String, usize, usize, usize)> = p
        .rows
        .iter()
        .map(|r| (r.stage.clone(), r.colour.to_string(), r.level + 1, r.k, r.nodes))
        .collect();
    let expected_colours = [
        "#FFFFFF", "#7987D7", "#A9E5BB", "#D6E3AE", "#E79C9C", "#C5D86D", "#D6A56F", "#D7ADCD",
        "#FE5F55", "#FFAA00", "#388697", "#79D391", "#8F52E0", "#92DCE5", "#CCD3D2", "#D884D2",
        "#F2DC5D",
    ];
    let expected_levels = [1, 2, 2, 2, 2, 3, 3, 3, 3, 3, 4, 4, 4, 4, 4, 4, 4];
    let expected_nodes = [1, 1, 1, 1, 1, 2, 1, 1, 3, 1, 1, 3, 1, 2, 6, 2, 1];
    for (i, row) in shape.iter().enumerate() {
        assert_eq!(row.0, format!("u{}", i + 1));
        assert_eq!(row.1, expected_colours[i]);
        assert_eq!(row.2, expected_levels[i]);
        assert_eq!(row.3, if i == 0 { 4 } else { 2 });
        assert_eq!(row.4, expected_nodes[i]);
    }
    let u10 = p.row("u10").unwrap();
    assert_eq!(u10.prior, [1.0, 99.0]);
    let mean: Vec<String> = u10.mean().iter().map(|x| format!("{x:.2}")).collect();
    assert_eq!(mean, ["0.01", "0.99"]);
    let m = StagedTreeModel::new(&t, &s, &p, LabelMode::Prior).unwrap();
    assert_eq!(m.stages().len(), 17);
    assert!(m.stages().iter().all(|st| st.posterior == st.prior));
    let relabelled = m.clone().with_label_mode(LabelMode::None);
    assert_eq!(relabelled.stages(), m.stages());
    let text = p.to_string();
    assert!(text.contains("u10"), "{text}");
    assert!(text.contains("1,99"));
    assert!(text.contains("0.01,0.99"));
}

#[test]
fn spatial_pipeline_on_the_fixture() {
    let data = load("homicides_like.csv");
    let cols: Vec<ColumnRef> = [6, 3, 2, 4, 5].into_iter().map(ColumnRef::Index).collect();
    let data = data.with_area_column(Some("Borough")).unwrap();
    let t = EventTree::create(&data, &cols).unwrap();
    assert_eq!(t.area_variable(), Some("Borough"));
    assert_eq!(t.node_count(), 1 + 32 + 32 * 4 + 32 * 8 + 32 * 16 + 32 * 32);
    let s = Staging::new().run_ahc(&t, None).unwrap().staging;
    let p = PriorTable::phantom(&t, &s).unwrap();
    assert_eq!(p.rows[0].prior, vec![1.0; 32]);
    let ceg = StagedTreeModel::new(&t, &s, &p, LabelMode::PosteriorMean)
        .unwrap()
        .posterior_update()
        .contract();
    let table = area_probabilities(&ceg, "Solved", &["Knife or Sharp Implement", "Female"]).unwrap();
    assert_eq!(table.areas().len(), 32);
    let bytes = std::fs::read(fixture("london_boroughs.geojson")).unwrap();
    let mut map = load_geo(&bytes, "NAME", Some("EPSG:4326")).unwrap();
    map.match_areas(&table.areas()).unwrap();
    assert_eq!(map.features.len(), 33);
    assert_eq!(map.matched_count(), 32);
    assert_eq!(map.unmatched(), ["City of London"]);
    let doc = render_map_document(&map, &table, "viridis", "Solved").unwrap();
    let statuses: BTreeSet<&str> = doc["features"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["properties"]["status"].as_str().unwrap())
        .collect();
    assert!(statuses.contains("unmatched") && statuses.contains("defined"));
    let reduced = ceg.reduced(&["Hillingdon"]).unwrap();
    assert!(reduced.paths().iter().all(|p| p[0] == "Hillingdon"));
    assert_eq!(reduced.paths().len(), 4 * 2 * 2 * 2);
}

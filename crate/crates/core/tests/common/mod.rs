#![allow(dead_code)]

use std::path::PathBuf;

use cegforge_core::dataset::{CsvOptions, Dataset};
use cegforge_core::EventTree;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn load(name: &str) -> Dataset {
    let bytes = std::fs::read(fixture(name)).unwrap();
    Dataset::from_csv_bytes(&bytes, &CsvOptions::default()).unwrap()
}

/// Random categorical table: `vars` columns with 2..=`max_card` values each.
/// Every value of every column is used at least once.
pub fn random_dataset(rng: &mut ChaCha8Rng, vars: usize, max_card: usize, rows: usize) -> Dataset {
    let cards: Vec<usize> = (0..vars).map(|_| rng.gen_range(2..=max_card)).collect();
    let columns: Vec<String> = (0..vars).map(|i| format!("v{i}")).collect();
    let mut data = Vec::with_capacity(rows.max(max_card));
    for r in 0..rows.max(max_card) {
        data.push(
            cards
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let x = if r < c { r } else { rng.gen_range(0..c) };
                    format!("{}{}", (b'a' + i as u8) as char, x)
                })
                .collect(),
        );
    }
    Dataset::new(columns, data).unwrap()
}

pub fn random_tree(rng: &mut ChaCha8Rng) -> EventTree {
    let vars = rng.gen_range(2..=4);
    let rows = rng.gen_range(10..200);
    EventTree::from_dataset(&random_dataset(rng, vars, 3, rows)).unwrap()
}

/// Sequential predictive probability of observing `order` one at a time.
pub fn sequential_log_predictive(prior: &[f64], order: &[usize]) -> f64 {
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

/// Log marginal likelihood via the predictive product, data in label order.
pub fn oracle_log_marginal(prior: &[f64], data: &[u64]) -> f64 {
    let order: Vec<usize> = data
        .iter()
        .enumerate()
        .flat_map(|(j, &y)| std::iter::repeat(j).take(y as usize))
        .collect();
    sequential_log_predictive(prior, &order)
}

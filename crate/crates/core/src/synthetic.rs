//! Reproducible synthetic export panels for tests and demos.
//!
//! The capability model assigns each product to one latent capability group
//! and gives each country a random subset of capabilities; a country exports
//! a product heavily only when it holds the product's capability. Products of
//! the same group therefore co-occur in RCA far more than products of
//! different groups, which is the structure density is meant to detect.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::ingest::{ExportPanel, IngestReport};
use crate::specialization::{country_labels, product_labels};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticModel {
    /// Independent sparse log-normal values.
    Random,
    /// Products load on one of `groups` latent capabilities.
    Capability { groups: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub products: usize,
    pub countries: usize,
    pub model: SyntheticModel,
    pub years: (i32, i32),
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 7,
            products: 20,
            countries: 12,
            model: SyntheticModel::Capability { groups: 4 },
            years: (2012, 2018),
        }
    }
}

/// Group of each product under the capability model.
pub fn product_group(product: usize, groups: usize) -> usize {
    product % groups
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<ExportPanel> {
    let (m, n) = (spec.products, spec.countries);
    if m < 2 || n < 2 {
        return Err(Error::Input(format!(
            "synthetic panel needs at least 2 products and 2 countries, got {m}x{n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (v0, v1) = match spec.model {
        SyntheticModel::Random => random_model(&mut rng, m, n),
        SyntheticModel::Capability { groups } => {
            if groups == 0 || groups > m {
                return Err(Error::Input(format!(
                    "capability groups must be in 1..={m}, got {groups}"
                )));
            }
            capability_model(&mut rng, m, n, groups)
        }
    };
    // keep the amounts on a whole-dollar grid so CSV round trips are exact
    let round = |v: DMatrix<f64>| v.map(|x| x.round());
    Ok(ExportPanel {
        products: synthetic_product_codes(m),
        countries: country_labels(n),
        years: spec.years,
        values: [round(v0), round(v1)],
        report: IngestReport::default(),
    })
}

/// Four-digit codes in index order.
fn synthetic_product_codes(m: usize) -> Vec<String> {
    if m <= 9000 {
        (0..m).map(|i| format!("{}", 1000 + i)).collect()
    } else {
        product_labels(m)
    }
}

fn ensure_support(rng: &mut ChaCha8Rng, v: &mut DMatrix<f64>, scale: f64) {
    let (m, n) = v.shape();
    for i in 0..m {
        if v.row(i).iter().all(|&e| e <= 0.0) {
            let j = rng.random_range(0..n);
            v[(i, j)] = scale;
        }
    }
    for j in 0..n {
        if v.column(j).iter().all(|&e| e <= 0.0) {
            let i = rng.random_range(0..m);
            v[(i, j)] = scale;
        }
    }
}

fn random_model(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let amount = LogNormal::new(7.0, 1.5).expect("valid log-normal");
    let drift = LogNormal::new(0.0, 0.5).expect("valid log-normal");
    let mut v0 = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            if rng.random_bool(0.7) {
                v0[(i, j)] = amount.sample(rng);
            }
        }
    }
    ensure_support(rng, &mut v0, 1000.0);
    let mut v1 = v0.clone();
    for e in v1.iter_mut() {
        if rng.random_bool(0.1) {
            *e = if *e > 0.0 { 0.0 } else { amount.sample(rng) };
        } else {
            *e *= drift.sample(rng);
        }
    }
    ensure_support(rng, &mut v1, 1000.0);
    (v0, v1)
}

fn capability_model(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    groups: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let size = LogNormal::new(0.0, 0.7).expect("valid log-normal");
    let noise = LogNormal::new(0.0, 0.6).expect("valid log-normal");
    let base = 1000.0;
    let boost = 25.0;

    // capability holdings, with country-specific breadth
    let mut caps = vec![vec![false; groups]; n];
    for held in caps.iter_mut() {
        let breadth: f64 = rng.random_range(0.15..0.85);
        for h in held.iter_mut() {
            *h = rng.random_bool(breadth);
        }
        if !held.iter().any(|&h| h) {
            let g = rng.random_range(0..groups);
            held[g] = true;
        }
    }
    let country_size: Vec<f64> = (0..n).map(|_| size.sample(rng)).collect();
    let draw = |rng: &mut ChaCha8Rng, caps: &[Vec<bool>]| {
        let mut v = DMatrix::zeros(m, n);
        for i in 0..m {
            let g = product_group(i, groups);
            for j in 0..n {
                let lift = if caps[j][g] { boost } else { 1.0 };
                v[(i, j)] = base * country_size[j] * lift * noise.sample(rng);
            }
        }
        v
    };
    let v0 = draw(rng, &caps);

    // capabilities drift: acquisitions are likelier for broad countries
    let mut caps1 = caps.clone();
    for held in caps1.iter_mut() {
        let share = held.iter().filter(|&&h| h).count() as f64 / groups as f64;
        for h in held.iter_mut() {
            if *h {
                if rng.random_bool(0.08) {
                    *h = false;
                }
            } else if rng.random_bool(0.05 + 0.2 * share) {
                *h = true;
            }
        }
        if !held.iter().any(|&h| h) {
            let g = rng.random_range(0..groups);
            held[g] = true;
        }
    }
    let fresh = draw(rng, &caps1);
    // persistence: blend log-values of the old and new draws
    let v1 = v0.zip_map(&fresh, |a, b| a.powf(0.5) * b.powf(0.5));
    (v0, v1)
}

//! Planted-signal datasets with known informative columns.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{Dataset, FeatureKind};
use crate::rng;

/// Recipe for a planted binary dataset.
#[derive(Debug, Clone)]
pub struct PlantedSpec {
    pub n_rows: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    /// Probability that an informative cell is the flipped label.
    pub flip: f64,
    /// Probability of a noise cell being 1.
    pub noise_rate: f64,
    pub malware_rate: f64,
    /// Shuffle column positions so informative columns are not a prefix.
    pub shuffle_columns: bool,
}

impl PlantedSpec {
    pub fn new(n_rows: usize, n_informative: usize, n_noise: usize) -> Self {
        Self {
            n_rows,
            n_informative,
            n_noise,
            flip: 0.1,
            noise_rate: 0.5,
            malware_rate: 0.5,
            shuffle_columns: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Planted {
    pub dataset: Dataset,
    /// Column indices of the informative features, ascending.
    pub informative: Vec<usize>,
}

/// Informative columns copy the label and flip it with probability `flip`;
/// noise columns are independent Bernoulli(`noise_rate`).
pub fn planted(spec: &PlantedSpec, seed: u64) -> Planted {
    let mut rng = rng::stream(seed, rng::streams::SYNTHETIC);
    let n_cols = spec.n_informative + spec.n_noise;
    let mut order: Vec<usize> = (0..n_cols).collect();
    if spec.shuffle_columns {
        order.shuffle(&mut rng);
    }
    // order[j] < n_informative marks column j as informative
    let mut labels = Vec::with_capacity(spec.n_rows);
    let mut rows = Vec::with_capacity(spec.n_rows);
    for i in 0..spec.n_rows {
        let mut y = u8::from(rng.gen_bool(spec.malware_rate));
        // guarantee both classes on tiny inputs
        if i == 0 {
            y = 1;
        } else if i == 1 {
            y = 0;
        }
        let row: Vec<f64> = order
            .iter()
            .map(|&src| {
                if src < spec.n_informative {
                    let flipped = rng.gen_bool(spec.flip);
                    f64::from(y ^ u8::from(flipped))
                } else {
                    f64::from(u8::from(rng.gen_bool(spec.noise_rate)))
                }
            })
            .collect();
        labels.push(y);
        rows.push(row);
    }
    let names = order
        .iter()
        .map(|&src| {
            if src < spec.n_informative {
                format!("sig_{src}")
            } else {
                format!("noise_{}", src - spec.n_informative)
            }
        })
        .collect();
    let informative = (0..n_cols).filter(|&j| order[j] < spec.n_informative).collect();
    Planted {
        dataset: Dataset::new("planted", rows, names, labels).expect("planted dataset is valid"),
        informative,
    }
}

/// The bundled demo dataset: 1000 apps, 40 binary features.
///
/// Columns mimic a permission/API mix: 6 informative features with varying
/// strength, 16 "library" features driven by three hidden co-occurrence
/// factors unrelated to the label, and 18 independent sparse features.
pub fn demo_dataset(seed: u64) -> Planted {
    let n_rows = 1000;
    let mut rng = rng::stream(seed, rng::streams::SYNTHETIC);
    // (rate in malware, rate in benign)
    let informative: [(f64, f64); 6] = [
        (0.80, 0.15),
        (0.70, 0.20),
        (0.65, 0.25),
        (0.55, 0.15),
        (0.45, 0.15),
        (0.40, 0.20),
    ];
    let factor_sizes = [6usize, 5, 5];
    let sparse_rates: Vec<f64> = (0..18).map(|k| 0.03 + 0.02 * k as f64).collect();

    let mut names = Vec::new();
    let mut kinds = Vec::new();
    for k in 0..informative.len() {
        names.push(format!("perm_sig_{k}"));
        kinds.push(if k % 2 == 0 {
            FeatureKind::Permission
        } else {
            FeatureKind::ApiCall
        });
    }
    for (f, &size) in factor_sizes.iter().enumerate() {
        for k in 0..size {
            names.push(format!("lib{f}_api_{k}"));
            kinds.push(FeatureKind::ApiCall);
        }
    }
    for k in 0..sparse_rates.len() {
        names.push(format!("misc_{k}"));
        kinds.push(if k % 3 == 0 {
            FeatureKind::Intent
        } else {
            FeatureKind::Permission
        });
    }

    let mut rows = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let y = if i < 2 { (i == 0) as u8 } else { u8::from(rng.gen_bool(0.4)) };
        let mut row = Vec::with_capacity(names.len());
        for &(pm, pb) in &informative {
            let p = if y == 1 { pm } else { pb };
            row.push(f64::from(u8::from(rng.gen_bool(p))));
        }
        for &size in &factor_sizes {
            let factor = rng.gen_bool(0.5);
            for _ in 0..size {
                let v = factor ^ rng.gen_bool(0.08);
                row.push(f64::from(u8::from(v)));
            }
        }
        for &p in &sparse_rates {
            row.push(f64::from(u8::from(rng.gen_bool(p))));
        }
        rows.push(row);
        labels.push(y);
    }
    let dataset = Dataset::new("demo_planted", rows, names, labels)
        .and_then(|d| d.with_kinds(kinds))
        .expect("demo dataset is valid");
    Planted {
        dataset,
        informative: (0..informative.len()).collect(),
    }
}

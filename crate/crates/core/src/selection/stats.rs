//! Per-column statistics shared by the filter methods.
//!
//! Count-based statistics (chi-square, information gain, rate differences)
//! treat a cell as present when its value is >= 0.5.

use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::data::{Dataset, MALWARE};

pub fn is_present(v: f64) -> bool {
    v >= 0.5
}

/// Warns once if count-based statistics will have to threshold real values.
pub fn note_binarization(d: &Dataset, method: &str) {
    if !d.is_binary() {
        log::warn!("{method}: non-binary columns in `{}` thresholded at 0.5", d.name());
    }
}

/// 2x2 table of (feature present?, class) counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `counts[f][c]`: f = feature value, c = class label.
    pub counts: [[u64; 2]; 2],
    pub n: u64,
}

impl ContingencyTable {
    pub fn from_column(column: &[f64], labels: &[u8]) -> Self {
        let mut counts = [[0u64; 2]; 2];
        for (&v, &y) in column.iter().zip(labels) {
            counts[usize::from(is_present(v))][usize::from(y == MALWARE)] += 1;
        }
        Self {
            counts,
            n: column.len() as u64,
        }
    }

    pub fn row_total(&self, f: usize) -> u64 {
        self.counts[f][0] + self.counts[f][1]
    }

    pub fn col_total(&self, c: usize) -> u64 {
        self.counts[0][c] + self.counts[1][c]
    }

    /// Expected count under independence.
    pub fn expected(&self, f: usize, c: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.row_total(f) as f64 * self.col_total(c) as f64 / self.n as f64
    }

    /// Pearson chi-square; cells with zero expectation contribute nothing.
    pub fn chi_square(&self) -> f64 {
        let mut chi = 0.0;
        for f in 0..2 {
            for c in 0..2 {
                let e = self.expected(f, c);
                if e > 0.0 {
                    let d = self.counts[f][c] as f64 - e;
                    chi += d * d / e;
                }
            }
        }
        chi
    }

    /// I(Y; X) in bits, written as H(Y) - H(Y|X).
    pub fn info_gain(&self) -> f64 {
        let n = self.n as f64;
        if n == 0.0 {
            return 0.0;
        }
        let h_y = entropy2(self.col_total(0) as f64, self.col_total(1) as f64);
        let mut h_y_given_x = 0.0;
        for f in 0..2 {
            let nf = self.row_total(f) as f64;
            if nf > 0.0 {
                h_y_given_x += nf / n * entropy2(self.counts[f][0] as f64, self.counts[f][1] as f64);
            }
        }
        (h_y - h_y_given_x).max(0.0)
    }
}

/// Entropy in bits of a two-outcome distribution given by counts.
pub fn entropy2(a: f64, b: f64) -> f64 {
    let n = a + b;
    if n <= 0.0 {
        return 0.0;
    }
    [a, b]
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum()
}

pub fn chi_square_scores(d: &Dataset) -> Vec<f64> {
    d.columns()
        .iter()
        .map(|c| ContingencyTable::from_column(c, d.labels()).chi_square())
        .collect()
}

pub fn info_gain_scores(d: &Dataset) -> Vec<f64> {
    d.columns()
        .iter()
        .map(|c| ContingencyTable::from_column(c, d.labels()).info_gain())
        .collect()
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Mean absolute deviation around the mean.
pub fn mad(x: &[f64]) -> f64 {
    let m = mean(x);
    mean(&x.iter().map(|v| (v - m).abs()).collect::<Vec<_>>())
}

pub fn mad_scores(d: &Dataset) -> Vec<f64> {
    d.columns().iter().map(|c| mad(c)).collect()
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

pub fn labels_as_f64(d: &Dataset) -> Vec<f64> {
    d.labels().iter().map(|&l| f64::from(l)).collect()
}

pub fn abs_pearson_scores(d: &Dataset) -> Vec<f64> {
    let y = labels_as_f64(d);
    d.columns().iter().map(|c| pearson(c, &y).abs()).collect()
}

/// One-way ANOVA over the two classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaF {
    pub ssb: f64,
    pub ssw: f64,
    /// `f64::MAX` when the column separates the classes perfectly.
    pub f: f64,
    pub p_value: f64,
}

/// Sentinel F for zero within-class variance with nonzero between-class variance.
pub const F_SENTINEL: f64 = f64::MAX;

pub fn anova_f(column: &[f64], labels: &[u8]) -> AnovaF {
    let n = column.len();
    let mut sum = [0.0f64; 2];
    let mut cnt = [0usize; 2];
    for (&v, &y) in column.iter().zip(labels) {
        sum[usize::from(y)] += v;
        cnt[usize::from(y)] += 1;
    }
    let grand = (sum[0] + sum[1]) / n as f64;
    let means = [
        if cnt[0] > 0 { sum[0] / cnt[0] as f64 } else { 0.0 },
        if cnt[1] > 0 { sum[1] / cnt[1] as f64 } else { 0.0 },
    ];
    let ssb: f64 = (0..2)
        .map(|c| cnt[c] as f64 * (means[c] - grand).powi(2))
        .sum();
    let ssw: f64 = column
        .iter()
        .zip(labels)
        .map(|(&v, &y)| (v - means[usize::from(y)]).powi(2))
        .sum();
    let df_w = n as f64 - 2.0;
    // relative tolerance guards against round-off on exactly separable columns
    let scale = column.iter().map(|v| v * v).sum::<f64>().max(1.0);
    let ssw_zero = ssw <= 1e-12 * scale;
    let ssb_zero = ssb <= 1e-12 * scale;
    let (f, p_value) = if ssb_zero {
        (0.0, 1.0)
    } else if ssw_zero {
        (F_SENTINEL, 0.0)
    } else {
        let f = ssb / (ssw / df_w);
        let p = FisherSnedecor::new(1.0, df_w)
            .map(|dist| 1.0 - dist.cdf(f))
            .unwrap_or(1.0);
        (f, p)
    };
    AnovaF { ssb, ssw, f, p_value }
}

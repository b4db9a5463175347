use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::Dataset;
use crate::selection::stats::mean;
use crate::selection::{FeatureScore, MethodError, Selection, Selector, SelectorKind, SelectorParams};

pub const DEFAULT_VARIANCE_TARGET: f64 = 0.95;

#[derive(Debug, Clone)]
pub struct PcaSelection {
    /// Eigenvalues, descending, negatives clamped to 0.
    pub explained: Vec<f64>,
    pub n_components: usize,
    pub relevance: Vec<f64>,
    pub selected: Vec<usize>,
}

/// Population covariance of the columns.
pub fn covariance(columns: &[Vec<f64>]) -> DMatrix<f64> {
    let p = columns.len();
    let n = columns.first().map_or(0, Vec::len) as f64;
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let m = mean(c);
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    DMatrix::from_fn(p, p, |a, b| {
        centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum::<f64>() / n
    })
}

/// Keeps as many original features as principal components are needed to
/// reach `variance_target`, choosing those with the largest
/// eigenvalue-weighted squared loadings on the retained components.
pub fn pca_select(d: &Dataset, variance_target: f64) -> Result<PcaSelection, MethodError> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(MethodError::InvalidParam(format!(
            "variance_target {variance_target} not in (0, 1]"
        )));
    }
    let cov = covariance(&d.columns());
    let total = cov.trace();
    if total <= 1e-12 {
        return Err(MethodError::ZeroTotalVariance);
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let explained: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c].max(0.0)).collect();

    let goal = variance_target * total - 1e-12 * total;
    let mut cum = 0.0;
    let mut m = explained.len();
    for (c, l) in explained.iter().enumerate() {
        cum += l;
        if cum >= goal {
            m = c + 1;
            break;
        }
    }

    let p = d.n_cols();
    let mut relevance: Vec<f64> = (0..p)
        .map(|j| {
            order[..m]
                .iter()
                .zip(&explained)
                .map(|(&c, l)| l * eig.eigenvectors[(j, c)].powi(2))
                .sum()
        })
        .collect();
    // Snap round-off so features with mathematically equal relevance tie
    // exactly and fall back to the index rule.
    let scale = relevance.iter().copied().fold(0.0, f64::max);
    if scale > 0.0 {
        for r in &mut relevance {
            *r = (*r / scale * 1e10).round() / 1e10 * scale;
        }
    }
    let mut selected = FeatureScore::from_scores(relevance.clone()).ordered();
    selected.truncate(m);
    selected.sort_unstable();
    Ok(PcaSelection {
        explained,
        n_components: m,
        relevance,
        selected,
    })
}

pub struct Pca;

impl Selector for Pca {
    fn id(&self) -> &str {
        "pca"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Subset
    }
    fn description(&self) -> &str {
        "Principal components of the feature covariance, adapted to selection: with m the number \
         of components reaching variance_target (default 0.95) of the total variance, keeps the m \
         features with the largest eigenvalue-weighted squared loadings. Label-agnostic."
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        let target = p.f64_or("variance_target", DEFAULT_VARIANCE_TARGET)?;
        let out = pca_select(d, target)?;
        Ok(Selection::subset(out.selected)
            .with_ranking(FeatureScore::from_scores(out.relevance))
            .param("variance_target", target)
            .param("n_components", out.n_components))
    }
}

use nalgebra::{DMatrix, DVector};

use super::lasso::standardize;
use crate::data::Dataset;
use crate::selection::stats::{labels_as_f64, mean};
use crate::selection::{FeatureScore, MethodError, Selection, Selector, SelectorKind, SelectorParams};

const JITTER: f64 = 1e-8;

/// OLS coefficients of the centered label on standardized columns.
/// A small ridge term keeps the Gram matrix invertible when columns repeat.
pub fn ols_coefficients(columns: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, MethodError> {
    let n = y.len();
    let p = columns.len();
    let xs: Vec<Vec<f64>> = columns.iter().map(|c| standardize(c)).collect();
    let x = DMatrix::from_fn(n, p, |i, j| xs[j][i]);
    let ym = mean(y);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));
    let mut gram = x.transpose() * &x;
    for j in 0..p {
        gram[(j, j)] += JITTER;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| MethodError::InvalidParam("Gram matrix is not positive definite".into()))?;
    Ok(chol.solve(&(x.transpose() * yc)).iter().copied().collect())
}

pub fn select_linear_regression(d: &Dataset) -> Result<Selection, MethodError> {
    if !d.has_both_classes() {
        return Err(MethodError::ConstantLabels);
    }
    let beta = ols_coefficients(&d.columns(), &labels_as_f64(d))?;
    let abs: Vec<f64> = beta.iter().map(|b| b.abs()).collect();
    let cut = mean(&abs);
    let mut selected: Vec<usize> = (0..abs.len()).filter(|&j| abs[j] > cut).collect();
    let ranking = FeatureScore::from_scores(abs);
    if selected.is_empty() {
        // every |beta| equal: keep the first
        selected.push(ranking.ordered()[0]);
    }
    Ok(Selection::subset(selected)
        .with_ranking(ranking)
        .param("threshold", cut))
}

pub struct LinearRegression;

impl Selector for LinearRegression {
    fn id(&self) -> &str {
        "linear_regression"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Subset
    }
    fn description(&self) -> &str {
        "Ordinary least squares of the 0/1 label on standardized columns (ridge jitter 1e-8); \
         keeps features whose |coefficient| exceeds the mean |coefficient|."
    }
    fn run(&self, d: &Dataset, _: &SelectorParams) -> Result<Selection, MethodError> {
        select_linear_regression(d)
    }
}

use crate::data::Dataset;
use crate::selection::stats::{labels_as_f64, mean};
use crate::selection::{FeatureScore, MethodError, Selection, Selector, SelectorKind, SelectorParams};

pub const DEFAULT_LAMBDA: f64 = 0.01;
const TOLERANCE: f64 = 1e-7;
const MAX_SWEEPS: usize = 1000;

/// Column centered to mean 0 and scaled to unit population variance.
/// Zero-variance columns come back as all zeros.
pub fn standardize(column: &[f64]) -> Vec<f64> {
    let m = mean(column);
    let var = column.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / column.len() as f64;
    if var <= 1e-24 {
        return vec![0.0; column.len()];
    }
    let sd = var.sqrt();
    column.iter().map(|v| (v - m) / sd).collect()
}

pub fn soft_threshold(rho: f64, lambda: f64) -> f64 {
    rho.signum() * (rho.abs() - lambda).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    /// Coefficients on the standardized scale.
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

impl LassoFit {
    pub fn support(&self) -> Vec<usize> {
        (0..self.coefficients.len())
            .filter(|&j| self.coefficients[j] != 0.0)
            .collect()
    }
}

/// Cyclic coordinate descent on `(1/2n)|y - Xb - b0|^2 + lambda |b|_1`.
///
/// Columns are standardized and `y` centered first, which absorbs the
/// intercept. Stops when no coefficient moves by more than 1e-7 in a sweep,
/// or after 1000 sweeps.
pub fn lasso_path_point(columns: &[Vec<f64>], y: &[f64], lambda: f64) -> LassoFit {
    let n = y.len() as f64;
    let xs: Vec<Vec<f64>> = columns.iter().map(|c| standardize(c)).collect();
    let y_mean = mean(y);
    let mut residual: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let norms: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>() / n).collect();
    let mut beta = vec![0.0; xs.len()];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for (j, x) in xs.iter().enumerate() {
            if norms[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let rho = x.iter().zip(&residual).map(|(a, r)| a * r).sum::<f64>() / n + norms[j] * old;
            let new = soft_threshold(rho, lambda) / norms[j];
            if new != old {
                let delta = new - old;
                for (r, a) in residual.iter_mut().zip(x) {
                    *r -= a * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < TOLERANCE {
            converged = true;
            break;
        }
    }
    LassoFit {
        coefficients: beta,
        sweeps,
        converged,
    }
}

/// Like [`lasso_path_point`] but an empty support is an error.
pub fn fit_lasso(columns: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LassoFit, MethodError> {
    if !(lambda >= 0.0) {
        return Err(MethodError::InvalidParam(format!("lambda {lambda} must be >= 0")));
    }
    let fit = lasso_path_point(columns, y, lambda);
    if !fit.converged {
        log::warn!("lasso: no convergence after {} sweeps", fit.sweeps);
    }
    if fit.support().is_empty() {
        return Err(MethodError::NoFeatureSurvives(format!(
            "lambda = {lambda} zeroes every coefficient; lower it (e.g. --method-arg lasso.lambda=0.001)"
        )));
    }
    Ok(fit)
}

/// Features with non-zero LASSO coefficient when regressing the 0/1 label.
pub fn select_lasso(d: &Dataset, lambda: f64) -> Result<Selection, MethodError> {
    if !d.has_both_classes() {
        return Err(MethodError::ConstantLabels);
    }
    let fit = fit_lasso(&d.columns(), &labels_as_f64(d), lambda)?;
    let ranking = FeatureScore::from_scores(fit.coefficients.iter().map(|b| b.abs()).collect());
    Ok(Selection::subset(fit.support())
        .with_ranking(ranking)
        .param("lambda", lambda)
        .param("sweeps", fit.sweeps))
}

pub struct Lasso;

impl Selector for Lasso {
    fn id(&self) -> &str {
        "lasso"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Subset
    }
    fn description(&self) -> &str {
        "L1-penalized least squares on the 0/1 label (lambda default 0.01) by cyclic coordinate \
         descent on standardized columns; keeps features with non-zero coefficient. Errors if \
         lambda removes every feature."
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        select_lasso(d, p.lambda.unwrap_or(DEFAULT_LAMBDA))
    }
}

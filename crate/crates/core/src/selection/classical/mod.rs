//! The eleven classical methods.

use std::sync::Arc;

use super::Selector;

pub mod abc;
pub mod filters;
pub mod lasso;
pub mod linreg;
pub mod pca;
pub mod relieff;
pub mod rfe;

pub use abc::{run_abc, AbcOutcome};
pub use filters::{score_anova_f, score_chi_square, score_info_gain, score_mad, score_pearson, select_anova};
pub use lasso::{fit_lasso, select_lasso, soft_threshold, LassoFit};
pub use linreg::select_linear_regression;
pub use pca::{pca_select, PcaSelection};
pub use relieff::score_relieff;
pub use rfe::score_rfe;

pub fn all() -> Vec<Arc<dyn Selector>> {
    vec![
        Arc::new(abc::Abc),
        Arc::new(filters::Anova),
        Arc::new(filters::ChiSquare),
        Arc::new(filters::InfoGain),
        Arc::new(lasso::Lasso),
        Arc::new(linreg::LinearRegression),
        Arc::new(filters::Mad),
        Arc::new(pca::Pca),
        Arc::new(filters::Pearson),
        Arc::new(relieff::ReliefF),
        Arc::new(rfe::Rfe),
    ]
}

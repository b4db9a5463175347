use crate::data::Dataset;
use crate::selection::stats::{self, anova_f};
use crate::selection::{FeatureScore, MethodError, Selection, Selector, SelectorKind, SelectorParams};

fn require_two_classes(d: &Dataset) -> Result<(), MethodError> {
    if d.has_both_classes() {
        Ok(())
    } else {
        Err(MethodError::ConstantLabels)
    }
}

pub fn score_chi_square(d: &Dataset) -> Result<FeatureScore, MethodError> {
    require_two_classes(d)?;
    stats::note_binarization(d, "chi_square");
    Ok(FeatureScore::from_scores(stats::chi_square_scores(d)))
}

pub fn score_info_gain(d: &Dataset) -> Result<FeatureScore, MethodError> {
    require_two_classes(d)?;
    stats::note_binarization(d, "info_gain");
    Ok(FeatureScore::from_scores(stats::info_gain_scores(d)))
}

pub fn score_mad(d: &Dataset) -> Result<FeatureScore, MethodError> {
    require_two_classes(d)?;
    Ok(FeatureScore::from_scores(stats::mad_scores(d)))
}

pub fn score_pearson(d: &Dataset) -> Result<FeatureScore, MethodError> {
    require_two_classes(d)?;
    Ok(FeatureScore::from_scores(stats::abs_pearson_scores(d)))
}

/// F statistic per feature together with its p-value.
pub fn score_anova_f(d: &Dataset) -> Result<(FeatureScore, Vec<f64>), MethodError> {
    require_two_classes(d)?;
    if d.n_rows() < 3 {
        return Err(MethodError::TooFewSamples { n: d.n_rows() });
    }
    let (f, p): (Vec<f64>, Vec<f64>) = d
        .columns()
        .iter()
        .map(|c| {
            let a = anova_f(c, d.labels());
            (a.f, a.p_value)
        })
        .unzip();
    Ok((FeatureScore::from_scores(f), p))
}

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Features with p < alpha, in column order. Falls back to the single best
/// feature when nothing is significant.
pub fn select_anova(d: &Dataset, alpha: f64) -> Result<Selection, MethodError> {
    let (scores, p) = score_anova_f(d)?;
    let mut selected: Vec<usize> = (0..p.len()).filter(|&j| p[j] < alpha).collect();
    if selected.is_empty() {
        log::warn!("anova: no feature has p < {alpha}; keeping the best-scoring one");
        selected.push(scores.ordered()[0]);
    }
    Ok(Selection::subset(selected)
        .with_ranking(scores)
        .param("alpha", alpha))
}

macro_rules! ordering_filter {
    ($name:ident, $id:literal, $score:ident, $desc:literal) => {
        pub struct $name;

        impl Selector for $name {
            fn id(&self) -> &str {
                $id
            }
            fn kind(&self) -> SelectorKind {
                SelectorKind::Ordering
            }
            fn description(&self) -> &str {
                $desc
            }
            fn run(&self, d: &Dataset, _: &SelectorParams) -> Result<Selection, MethodError> {
                Ok(Selection::ranked($score(d)?))
            }
        }
    };
}

ordering_filter!(
    ChiSquare,
    "chi_square",
    score_chi_square,
    "Chi-square statistic of the 2x2 (feature present, class) table. Cells with zero \
     expected count contribute 0. Ranks features and keeps the top k (default: half)."
);
ordering_filter!(
    InfoGain,
    "info_gain",
    score_info_gain,
    "Information gain H(Y) - H(Y|X) in bits with plug-in estimates. Ranks features and \
     keeps the top k (default: half)."
);
ordering_filter!(
    Mad,
    "mad",
    score_mad,
    "Mean absolute deviation of each column around its mean. Label-agnostic dispersion \
     ranking; keeps the top k (default: half)."
);
ordering_filter!(
    Pearson,
    "pearson",
    score_pearson,
    "Absolute Pearson correlation between column and label; zero-variance columns score 0. \
     Keeps the top k (default: half)."
);

pub struct Anova;

impl Selector for Anova {
    fn id(&self) -> &str {
        "anova"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Subset
    }
    fn description(&self) -> &str {
        "One-way ANOVA F test between the two classes, F(1, n-2). Subset method: keeps every \
         feature with p < alpha (default 0.05); a perfectly separating column gets the maximal \
         score. If nothing is significant the single best feature is kept."
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        select_anova(d, p.alpha.unwrap_or(DEFAULT_ALPHA))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::stats::F_SENTINEL;

    fn ds(cols: Vec<Vec<f64>>, labels: Vec<u8>) -> Dataset {
        let n = labels.len();
        let rows = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let names = (0..cols.len()).map(|j| format!("f{j}")).collect();
        Dataset::new("t", rows, names, labels).unwrap()
    }

    #[test]
    fn single_class_rejected() {
        let d = ds(vec![vec![1.0, 0.0]], vec![1, 1]);
        assert!(matches!(score_chi_square(&d), Err(MethodError::ConstantLabels)));
        assert!(matches!(score_anova_f(&d), Err(MethodError::ConstantLabels)));
    }

    #[test]
    fn anova_needs_three_rows() {
        let d = ds(vec![vec![1.0, 0.0]], vec![1, 0]);
        assert!(matches!(score_anova_f(&d), Err(MethodError::TooFewSamples { n: 2 })));
    }

    #[test]
    fn anova_subset_rule() {
        let labels = vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let sep = labels.iter().map(|&l| f64::from(l)).collect();
        let equal = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let d = ds(vec![equal.clone(), sep, equal], labels);
        let (scores, _) = score_anova_f(&d).unwrap();
        assert_eq!(scores.dense(3)[1], F_SENTINEL);
        let sel = select_anova(&d, 0.05).unwrap();
        assert_eq!(sel.selected, vec![1]);
    }

    #[test]
    fn anova_equal_means_never_selected() {
        let labels = vec![1, 1, 0, 0, 1, 0];
        let a = vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let strong = vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let d = ds(vec![a, strong], labels);
        let (scores, p) = score_anova_f(&d).unwrap();
        // column 0: malware mean 2/3, benign mean 2/3
        assert_eq!(scores.dense(2)[0], 0.0);
        assert_eq!(p[0], 1.0);
        assert!(!select_anova(&d, 0.05).unwrap().selected.contains(&0));
    }
}

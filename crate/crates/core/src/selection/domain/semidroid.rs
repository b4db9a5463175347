use crate::data::Dataset;
use crate::selection::stats::{abs_pearson_scores, chi_square_scores, info_gain_scores, mad_scores};
use crate::selection::{FeatureScore, MethodError, Selection, Selector, SelectorKind, SelectorParams};

use super::fraction_param;

/// Mean 1-based rank position of each feature over several score vectors.
/// Only the orderings matter, so any strictly increasing rescaling of one
/// input leaves the result unchanged.
pub fn aggregate_ranks(scores: &[Vec<f64>]) -> Vec<f64> {
    let n = scores.first().map_or(0, Vec::len);
    let mut total = vec![0.0; n];
    for s in scores {
        for (pos, j) in FeatureScore::from_scores(s.clone()).ordered().into_iter().enumerate() {
            total[j] += (pos + 1) as f64;
        }
    }
    total.iter().map(|t| t / scores.len() as f64).collect()
}

/// Returns (selected ascending, mean rank per feature).
pub fn select_semidroid(d: &Dataset, keep_fraction: f64) -> Result<(Vec<usize>, Vec<f64>), MethodError> {
    if !d.has_both_classes() {
        return Err(MethodError::ConstantLabels);
    }
    let ranks = aggregate_ranks(&[
        info_gain_scores(d),
        chi_square_scores(d),
        abs_pearson_scores(d),
        mad_scores(d),
    ]);
    let keep = ((d.n_cols() as f64 * keep_fraction).ceil() as usize).clamp(1, d.n_cols());
    // lower mean rank is better
    let neg: Vec<f64> = ranks.iter().map(|r| -r).collect();
    let mut selected = FeatureScore::from_scores(neg).ordered();
    selected.truncate(keep);
    selected.sort_unstable();
    Ok((selected, ranks))
}

pub struct SemiDroid;

impl Selector for SemiDroid {
    fn id(&self) -> &str {
        "semidroid"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Subset
    }
    fn description(&self) -> &str {
        "Rank-aggregation ensemble: ranks features by information gain, chi-square, |Pearson r| \
         and MAD, averages the four rank positions and keeps the best 50%. Stand-in: the original \
         ensemble members and quota are local choices. Args: keep_fraction."
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        let frac = fraction_param(p, "keep_fraction", 0.5)?;
        let (selected, ranks) = select_semidroid(d, frac)?;
        Ok(Selection::subset(selected)
            .with_ranking(FeatureScore::from_scores(ranks.iter().map(|r| -r).collect()))
            .param("keep_fraction", frac))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_everywhere_kept_last_dropped() {
        let r = aggregate_ranks(&[vec![3.0, 1.0, 2.0], vec![0.9, 0.1, 0.5]]);
        assert_eq!(r, vec![1.0, 3.0, 2.0]);
    }

    proptest! {
        #[test]
        fn invariant_to_monotone_rescaling(
            a in prop::collection::vec(0.0f64..10.0, 6),
            b in prop::collection::vec(0.0f64..10.0, 6),
        ) {
            let base = aggregate_ranks(&[a.clone(), b.clone()]);
            let rescaled: Vec<f64> = a.iter().map(|v| (3.0 * v + 1.0).exp()).collect();
            prop_assert_eq!(base, aggregate_ranks(&[rescaled, b]));
        }
    }

    #[test]
    fn keeps_half() {
        let d = crate::synthetic::planted(&crate::synthetic::PlantedSpec::new(80, 2, 5), 1).dataset;
        let (sel, _) = select_semidroid(&d, 0.5).unwrap();
        assert_eq!(sel.len(), 4);
    }
}

use crate::data::Dataset;
use crate::selection::stats::{info_gain_scores, mad, pearson};
use crate::selection::{FeatureScore, MethodError, Selection, Selector, SelectorKind, SelectorParams};

use super::rank_by;

#[derive(Debug, Clone, PartialEq)]
pub struct MtOutcome {
    pub selected: Vec<usize>,
    pub after_tier1: Vec<usize>,
    pub after_tier2: Vec<usize>,
}

pub fn select_mt(d: &Dataset, min_mad: f64, max_corr: f64) -> Result<MtOutcome, MethodError> {
    let cols = d.columns();
    let ig = info_gain_scores(d);

    let tier1: Vec<usize> = (0..cols.len()).filter(|&j| mad(&cols[j]) >= min_mad).collect();
    if tier1.is_empty() {
        log::warn!("mt: every column is near-constant; keeping the best by information gain");
        let all: Vec<usize> = (0..cols.len()).collect();
        let best = rank_by(&all, &ig)[0];
        return Ok(MtOutcome {
            selected: vec![best],
            after_tier1: vec![],
            after_tier2: vec![],
        });
    }

    // walk by decreasing IG so the more informative member of a pair survives
    let mut tier2: Vec<usize> = Vec::new();
    for j in rank_by(&tier1, &ig) {
        if tier2.iter().all(|&a| pearson(&cols[a], &cols[j]).abs() <= max_corr) {
            tier2.push(j);
        }
    }
    tier2.sort_unstable();

    let mut values: Vec<f64> = tier2.iter().map(|&j| ig[j]).collect();
    values.sort_by(f64::total_cmp);
    let m = values.len();
    let median = if m % 2 == 1 {
        values[m / 2]
    } else {
        (values[m / 2 - 1] + values[m / 2]) / 2.0
    };
    let mut selected: Vec<usize> = tier2.iter().copied().filter(|&j| ig[j] > median).collect();
    if selected.is_empty() {
        selected = tier2.iter().copied().filter(|&j| ig[j] >= median).collect();
    }
    Ok(MtOutcome {
        selected,
        after_tier1: tier1,
        after_tier2: tier2,
    })
}

pub struct MultiTiered;

impl Selector for MultiTiered {
    fn id(&self) -> &str {
        "mt"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Subset
    }
    fn description(&self) -> &str {
        "Multi-tiered filter. Tier 1 drops near-constant columns (MAD < 0.01). Tier 2 drops the \
         lower-information-gain member of every pair with |Pearson r| > 0.95. Tier 3 keeps the \
         survivors whose information gain is above their median. Stand-in: tier criteria and \
         thresholds are local choices, not the original's. Args: min_mad, max_corr."
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        let min_mad = p.f64_or("min_mad", 0.01)?;
        let max_corr = p.f64_or("max_corr", 0.95)?;
        let out = select_mt(d, min_mad, max_corr)?;
        Ok(Selection::subset(out.selected)
            .with_ranking(FeatureScore::from_scores(info_gain_scores(d)))
            .param("after_tier1", out.after_tier1.len())
            .param("after_tier2", out.after_tier2.len()))
    }
}

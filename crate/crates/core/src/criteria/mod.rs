//! Merge criteria: interchangeable scoring rules that assign each candidate
//! word pair the loss incurred by making the two words indistinguishable.
//!
//! All six criteria answer the same question from the same likelihood-ratio
//! viewpoint (how much worse does a class-aware model of the histograms get,
//! relative to a class-blind one, when two dimensions are pooled) but model
//! the histograms differently. The engine only sees the [`Criterion`] trait.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::CriteriaConfig;
use crate::data::HistogramDataset;
use crate::estimate::EstimateError;
use crate::maxmargin::MaxMarginError;

mod aib;
mod csm;
mod gmle;
mod mlt;
mod mme;
mod moments;
mod uvd;

pub use aib::InformationLoss;
pub use csm::ScatterRatio;
pub use gmle::GaussianLikelihoodLoss;
pub use mlt::MultinomialLikelihoodLoss;
pub use mme::MaxMarginCost;
pub use moments::Moments;
pub use uvd::UnivariateMarginalLoss;

#[derive(Debug, Error)]
pub enum CriterionError {
    #[error("need at least 2 classes, dataset has {0}")]
    NotEnoughClasses(usize),
    #[error("criterion requires exactly 2 classes, dataset has {0}")]
    NotBinary(usize),
    #[error("dataset has zero total count mass")]
    ZeroMass,
    #[error("total scatter trace {0:.3e} is degenerate after this merge")]
    DegenerateScatter(f64),
    #[error("probability recovery failed for every eta down to {0:.3e}")]
    EtaExhausted(f64),
    #[error("bad criterion parameter: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    MaxMargin(#[from] MaxMarginError),
}

/// Which cached pair losses a merge invalidates.
///
/// `TouchedOnly` promises that the loss of a pair not involving the merged
/// slots is unchanged, so a lazy cache may keep it. `All` makes no such
/// promise and forces a full refresh each level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaleScope {
    TouchedOnly,
    All,
}

/// A merge criterion over word slots `0..t0`. Slots hold current (possibly
/// already merged) words; a merge folds slot `drop` into slot `keep` and
/// leaves `drop` dead. Callers only pass live slots to `pair_loss`.
pub trait Criterion: Send + Sync {
    /// Loss of merging live slots `r` and `s`. Symmetric in its arguments.
    /// Exactly `0.0` whenever either slot has zero total count mass.
    fn pair_loss(&self, r: usize, s: usize) -> Result<f64, CriterionError>;

    /// Folds slot `drop` into slot `keep` and refreshes internal state.
    fn apply_merge(&mut self, keep: usize, drop: usize) -> Result<(), CriterionError>;

    /// Cache invalidation contract of this criterion.
    fn stale_scope(&self) -> StaleScope;
}

/// The six built-in criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Aib,
    Csm,
    Uvd,
    Mlt,
    Gmle,
    Mme,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 6] = [
        CriterionKind::Aib,
        CriterionKind::Csm,
        CriterionKind::Uvd,
        CriterionKind::Mlt,
        CriterionKind::Gmle,
        CriterionKind::Mme,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::Aib => "aib",
            CriterionKind::Csm => "csm",
            CriterionKind::Uvd => "uvd",
            CriterionKind::Mlt => "mlt",
            CriterionKind::Gmle => "gmle",
            CriterionKind::Mme => "mme",
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CriterionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aib" => Ok(CriterionKind::Aib),
            "csm" => Ok(CriterionKind::Csm),
            "uvd" => Ok(CriterionKind::Uvd),
            "mlt" => Ok(CriterionKind::Mlt),
            "gmle" => Ok(CriterionKind::Gmle),
            "mme" => Ok(CriterionKind::Mme),
            other => Err(format!(
                "unknown criterion {other:?}, expected one of aib, csm, uvd, mlt, gmle, mme"
            )),
        }
    }
}

/// Builds a ready-to-use criterion over the dataset's initial columns.
pub fn make_criterion(
    kind: CriterionKind,
    ds: &HistogramDataset,
    cfg: &CriteriaConfig,
) -> Result<Box<dyn Criterion>, CriterionError> {
    if ds.class_count() < 2 {
        return Err(CriterionError::NotEnoughClasses(ds.class_count()));
    }
    Ok(match kind {
        CriterionKind::Aib => Box::new(InformationLoss::new(ds, &cfg.aib)?),
        CriterionKind::Csm => Box::new(ScatterRatio::new(ds)?),
        CriterionKind::Uvd => Box::new(UnivariateMarginalLoss::new(ds, cfg)?),
        CriterionKind::Mlt => Box::new(MultinomialLikelihoodLoss::new(ds, &cfg.mlt)?),
        CriterionKind::Gmle => Box::new(GaussianLikelihoodLoss::new(ds, cfg.gmle_eps_var())?),
        CriterionKind::Mme => Box::new(MaxMarginCost::new(ds, &cfg.mme)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_round_trips_through_strings() {
        for kind in CriterionKind::ALL {
            assert_eq!(kind.name().parse::<CriterionKind>().unwrap(), kind);
        }
        assert_eq!("AIB".parse::<CriterionKind>().unwrap(), CriterionKind::Aib);
        assert!("ward".parse::<CriterionKind>().is_err());
    }

    #[test]
    fn factory_rejects_single_class_data() {
        let ds = HistogramDataset::new(vec![1.0, 2.0, 3.0, 4.0], 2, &[5, 5]).unwrap();
        let cfg = CriteriaConfig::default();
        for kind in CriterionKind::ALL {
            assert!(matches!(
                make_criterion(kind, &ds, &cfg),
                Err(CriterionError::NotEnoughClasses(1))
            ));
        }
    }
}

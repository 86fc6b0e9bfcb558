//! Sufficient statistics of event datasets: counts, frequencies, moments.
//!
//! Outcomes are two-valued, so a dataset is fully characterized by its
//! counts; the moments `<x>`, `<y>`, `<xy>` re-parameterize the frequency
//! table through `f(x) = (1 + x<x>)/2` and
//! `f(x,y) = (1 + x<x> + y<y> + xy<xy>)/4`. Counts are kept as exact
//! integers and moments are derived from them, which makes those identities
//! hold to rounding error rather than accumulation error.
//!
//! The compression discards event order on the strength of the i.i.d.
//! assumption; autocorrelation diagnostics that would test that assumption
//! on real data are future work.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{ConditionRecord, EventDataset, Events, ExperimentKind};

/// Outcome counts of an SG dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgCounts {
    pub plus: u64,
    pub minus: u64,
}

/// Coincidence counts of an EPRB dataset, cells `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EprbCounts {
    pub pp: u64,
    pub pm: u64,
    pub mp: u64,
    pub mm: u64,
}

impl EprbCounts {
    pub fn as_array(&self) -> [u64; 4] {
        [self.pp, self.pm, self.mp, self.mm]
    }
}

/// Counts plus derived moments for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SummaryStatistics {
    Sg {
        n: u64,
        counts: SgCounts,
        mean_x: f64,
    },
    Eprb {
        n: u64,
        counts: EprbCounts,
        mean_x: f64,
        mean_y: f64,
        corr_xy: f64,
    },
}

impl SummaryStatistics {
    /// Builds SG statistics from counts (`n >= 1`).
    pub fn from_sg_counts(counts: SgCounts) -> Result<Self> {
        let n = counts.plus + counts.minus;
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mean_x = (counts.plus as i64 - counts.minus as i64) as f64 / n as f64;
        Ok(SummaryStatistics::Sg { n, counts, mean_x })
    }

    /// Builds EPRB statistics from coincidence counts (`n >= 1`).
    pub fn from_eprb_counts(counts: EprbCounts) -> Result<Self> {
        let n = counts.pp + counts.pm + counts.mp + counts.mm;
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let [pp, pm, mp, mm] = counts.as_array().map(|c| c as i64);
        let mean_x = (pp + pm - mp - mm) as f64 / n as f64;
        let mean_y = (pp + mp - pm - mm) as f64 / n as f64;
        let corr_xy = (pp + mm - pm - mp) as f64 / n as f64;
        Ok(SummaryStatistics::Eprb {
            n,
            counts,
            mean_x,
            mean_y,
            corr_xy,
        })
    }

    pub fn kind(&self) -> ExperimentKind {
        match self {
            SummaryStatistics::Sg { .. } => ExperimentKind::Sg,
            SummaryStatistics::Eprb { .. } => ExperimentKind::Eprb,
        }
    }

    pub fn n(&self) -> u64 {
        match self {
            SummaryStatistics::Sg { n, .. } | SummaryStatistics::Eprb { n, .. } => *n,
        }
    }

    pub fn mean_x(&self) -> f64 {
        match self {
            SummaryStatistics::Sg { mean_x, .. } | SummaryStatistics::Eprb { mean_x, .. } => {
                *mean_x
            }
        }
    }

    pub fn mean_y(&self) -> Option<f64> {
        match self {
            SummaryStatistics::Sg { .. } => None,
            SummaryStatistics::Eprb { mean_y, .. } => Some(*mean_y),
        }
    }

    pub fn corr_xy(&self) -> Option<f64> {
        match self {
            SummaryStatistics::Sg { .. } => None,
            SummaryStatistics::Eprb { corr_xy, .. } => Some(*corr_xy),
        }
    }

    /// The scalar `E` that re-parameterizes the frequency table: the mean
    /// for SG data, the pair correlation for EPRB data.
    pub fn empirical_e(&self) -> f64 {
        match self {
            SummaryStatistics::Sg { mean_x, .. } => *mean_x,
            SummaryStatistics::Eprb { corr_xy, .. } => *corr_xy,
        }
    }

    /// Binomial/multinomial standard error of the `E` estimator:
    /// `sqrt((1 - E^2)/N)`. Requires `n >= 2`.
    pub fn standard_error_e(&self) -> Result<f64> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "standard error needs at least 2 events, have {n}"
            )));
        }
        let e = self.empirical_e();
        Ok(((1.0 - e * e).max(0.0) / n as f64).sqrt())
    }

    /// Merges two statistics of the same kind by adding counts (associative
    /// and order-independent, so datasets may be summarized in chunks).
    pub fn merge(&self, other: &SummaryStatistics) -> Result<SummaryStatistics> {
        match (self, other) {
            (SummaryStatistics::Sg { counts: a, .. }, SummaryStatistics::Sg { counts: b, .. }) => {
                SummaryStatistics::from_sg_counts(SgCounts {
                    plus: a.plus + b.plus,
                    minus: a.minus + b.minus,
                })
            }
            (
                SummaryStatistics::Eprb { counts: a, .. },
                SummaryStatistics::Eprb { counts: b, .. },
            ) => SummaryStatistics::from_eprb_counts(EprbCounts {
                pp: a.pp + b.pp,
                pm: a.pm + b.pm,
                mp: a.mp + b.mp,
                mm: a.mm + b.mm,
            }),
            _ => Err(Error::KindMismatch(
                "cannot merge SG statistics with EPRB statistics".into(),
            )),
        }
    }

    /// Frequency of an outcome cell reconstructed from the moments.
    pub fn frequency(&self, x: i8, y: Option<i8>) -> Result<f64> {
        match (self, y) {
            (SummaryStatistics::Sg { mean_x, .. }, None) => Ok((1.0 + x as f64 * mean_x) / 2.0),
            (
                SummaryStatistics::Eprb {
                    mean_x,
                    mean_y,
                    corr_xy,
                    ..
                },
                Some(y),
            ) => {
                let (x, y) = (x as f64, y as f64);
                Ok((1.0 + x * mean_x + y * mean_y + x * y * corr_xy) / 4.0)
            }
            _ => Err(Error::KindMismatch(
                "frequency cell does not match statistics kind".into(),
            )),
        }
    }
}

/// Compresses a dataset into counts and moments. Errors on empty datasets
/// (the moments would be undefined).
pub fn summarize(dataset: &EventDataset) -> Result<SummaryStatistics> {
    match &dataset.events {
        Events::Sg(xs) => {
            if xs.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let plus = xs.iter().filter(|&&x| x == 1).count() as u64;
            SummaryStatistics::from_sg_counts(SgCounts {
                plus,
                minus: xs.len() as u64 - plus,
            })
        }
        Events::Eprb(pairs) => {
            if pairs.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let mut cells = [0u64; 4];
            for &(x, y) in pairs {
                cells[crate::simulator::pair_cell_index(x, y)] += 1;
            }
            SummaryStatistics::from_eprb_counts(EprbCounts {
                pp: cells[0],
                pm: cells[1],
                mp: cells[2],
                mm: cells[3],
            })
        }
    }
}

/// One dataset's statistics together with the condition it was measured
/// under: the JSON interchange record consumed by the separation and
/// inference layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticsRecord {
    pub condition: ConditionRecord,
    pub summary: SummaryStatistics,
    pub standard_error_e: f64,
}

impl StatisticsRecord {
    pub fn new(condition: ConditionRecord, summary: SummaryStatistics) -> Result<Self> {
        if condition.kind() != summary.kind() {
            return Err(Error::KindMismatch(
                "condition and summary kinds differ".into(),
            ));
        }
        let standard_error_e = summary.standard_error_e()?;
        Ok(StatisticsRecord {
            condition,
            summary,
            standard_error_e,
        })
    }
}

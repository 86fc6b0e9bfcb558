//! Robustness analysis: evidence under perturbed conditions, Fisher
//! information, cosine-family fits, and a k-sigma compliance test against
//! the quantum predictions.
//!
//! The evidence `Ev` is the log-ratio of the compound-event likelihood at a
//! perturbed angle `theta + epsilon` versus `theta` (multinomial
//! coefficients cancel in the ratio and are never computed). Its mean over
//! repeated runs obeys `E[Ev] ~= -N eps^2 I_F(theta)/2` with
//! `I_F = (dE/dtheta)^2 / (1 - E^2)` — so experiments whose frequencies
//! follow `E(theta) = cos(K theta + phi)` have constant `I_F = K^2` and are
//! maximally reproducible under small condition changes. `fit_robust`
//! checks measured profiles against that family; `compliance_test` compares
//! raw counts against the quantum cell probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{
    eprb_probability, pair_cell_label, sg_probability, ConditionRecord, EventDataset,
    ExperimentKind, OutcomeModel,
};
use crate::stats::{self, StatisticsRecord, SummaryStatistics};

/// Points with `1 - |E|` below this are excluded from finite-difference
/// Fisher estimates (the functional is singular at |E| = 1).
pub const ENDPOINT_GUARD: f64 = 1e-3;

/// One measured point of `E(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub theta: f64,
    pub e: f64,
    /// Event count behind the estimate; `None` marks an exact value.
    pub n: Option<u64>,
}

/// A measured (or exact) correlation profile over strictly increasing
/// angles in `[0, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaProfile {
    pub kind: ExperimentKind,
    pub points: Vec<ProfilePoint>,
}

impl ThetaProfile {
    pub fn new(kind: ExperimentKind, mut points: Vec<ProfilePoint>) -> Result<Self> {
        points.sort_by(|a, b| a.theta.partial_cmp(&b.theta).expect("finite"));
        for pair in points.windows(2) {
            if pair[1].theta - pair[0].theta <= 0.0 {
                return Err(Error::InvalidProfile(format!(
                    "duplicate theta {}",
                    pair[0].theta
                )));
            }
        }
        for p in &points {
            if !(0.0..=std::f64::consts::PI + 1e-12).contains(&p.theta) {
                return Err(Error::InvalidProfile(format!(
                    "theta {} outside [0, pi]",
                    p.theta
                )));
            }
            if p.e.abs() > 1.0 {
                return Err(Error::InvalidProfile(format!(
                    "|E| = {} > 1 at theta {}",
                    p.e.abs(),
                    p.theta
                )));
            }
        }
        Ok(ThetaProfile { kind, points })
    }

    /// Builds a profile from statistics records, using each condition's
    /// angle and the empirical `E`.
    pub fn from_statistics(records: &[StatisticsRecord]) -> Result<Self> {
        let kind = records
            .first()
            .ok_or_else(|| Error::InvalidProfile("no statistics records".into()))?
            .summary
            .kind();
        let mut points = Vec::with_capacity(records.len());
        for record in records {
            if record.summary.kind() != kind {
                return Err(Error::KindMismatch(
                    "mixed experiment kinds in profile".into(),
                ));
            }
            points.push(ProfilePoint {
                theta: record.condition.theta(),
                e: record.summary.empirical_e(),
                n: Some(record.summary.n()),
            });
        }
        ThetaProfile::new(kind, points)
    }

    fn standard_errors(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| match p.n {
                Some(n) if n > 0 => ((1.0 - p.e * p.e).max(0.0) / n as f64).sqrt(),
                _ => 0.0,
            })
            .collect()
    }
}

/// Per-outcome term of an evidence computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceContribution {
    pub outcome: String,
    pub count: u64,
    /// `ln P(outcome | theta + epsilon) - ln P(outcome | theta)`.
    pub log_ratio: f64,
}

/// Evidence of the hypothesis "the data was taken at `theta + epsilon`"
/// against "taken at `theta`".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    pub theta: f64,
    pub epsilon: f64,
    pub n: u64,
    pub ev: f64,
    /// First-order law for the replicate mean: `-N eps^2 I_F(theta)/2`.
    pub predicted_mean_ev: f64,
    pub contributions: Vec<EvidenceContribution>,
}

fn outcome_cells(
    model: &OutcomeModel,
    kind: ExperimentKind,
    theta: f64,
) -> Result<(Vec<String>, Vec<f64>)> {
    let e = model.correlation(kind, theta.cos().clamp(-1.0, 1.0))?;
    match kind {
        ExperimentKind::Sg => {
            let p_plus = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
            Ok((vec!["+1".into(), "-1".into()], vec![p_plus, 1.0 - p_plus]))
        }
        ExperimentKind::Eprb => {
            let same = ((1.0 + e) / 4.0).clamp(0.0, 0.5);
            let diff = (0.5 - same).max(0.0);
            Ok((
                (0..4).map(pair_cell_label).collect(),
                vec![same, diff, diff, 1.0 - (same + diff + diff)],
            ))
        }
    }
}

fn observed_counts(summary: &SummaryStatistics) -> Vec<u64> {
    match summary {
        SummaryStatistics::Sg { counts, .. } => vec![counts.plus, counts.minus],
        SummaryStatistics::Eprb { counts, .. } => counts.as_array().to_vec(),
    }
}

/// Computes the evidence `Ev = sum_outcomes n_o ln[P(o|theta+eps)/P(o|theta)]`
/// for observed counts against a model.
///
/// Outcomes with nonzero counts must have model probabilities strictly
/// inside (0, 1) at both angles; otherwise the log-ratio is divergent or
/// degenerate and an error is returned.
pub fn evidence(
    counts_at_theta: &SummaryStatistics,
    theta: f64,
    epsilon: f64,
    model: &OutcomeModel,
) -> Result<EvidenceReport> {
    let kind = counts_at_theta.kind();
    model.check_kind(kind)?;
    let (labels, p0) = outcome_cells(model, kind, theta)?;
    let (_, p1) = outcome_cells(model, kind, theta + epsilon)?;
    let counts = observed_counts(counts_at_theta);

    let mut ev = 0.0;
    let mut contributions = Vec::with_capacity(counts.len());
    for ((label, count), (q0, q1)) in labels.into_iter().zip(counts).zip(p0.iter().zip(p1.iter())) {
        let log_ratio = if count == 0 {
            0.0
        } else {
            for (angle_p, angle) in [(q0, theta), (q1, theta + epsilon)] {
                if !(*angle_p > 0.0 && *angle_p < 1.0) {
                    return Err(Error::DivergentEvidence {
                        outcome: format!("{label} at theta = {angle}"),
                        probability: *angle_p,
                        count,
                    });
                }
            }
            q1.ln() - q0.ln()
        };
        ev += count as f64 * log_ratio;
        contributions.push(EvidenceContribution {
            outcome: label,
            count,
            log_ratio,
        });
    }

    let n = counts_at_theta.n();
    let predicted_mean_ev = if epsilon == 0.0 {
        0.0
    } else {
        -(n as f64) * epsilon * epsilon * fisher_closed_form(model, kind, theta)? / 2.0
    };
    Ok(EvidenceReport {
        theta,
        epsilon,
        n,
        ev,
        predicted_mean_ev,
        contributions,
    })
}

/// Closed-form Fisher information `I_F = (dE/dtheta)^2 / (1 - E^2)` of a
/// model at `theta`. Errors at singular points (`|E| >= 1 - 1e-9`).
pub fn fisher_closed_form(model: &OutcomeModel, kind: ExperimentKind, theta: f64) -> Result<f64> {
    let e = model.correlation(kind, theta.cos().clamp(-1.0, 1.0))?;
    if e.abs() >= 1.0 - 1e-9 {
        return Err(Error::SingularFisher {
            theta,
            e_abs: e.abs(),
        });
    }
    let de = model.correlation_dtheta(kind, theta)?;
    Ok(de * de / (1.0 - e * e))
}

/// One finite-difference Fisher estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherEstimate {
    pub theta: f64,
    pub i_f: f64,
    /// Standard error propagated from the binomial/multinomial errors of
    /// the three `E` values in the stencil (0 for exact profiles).
    pub se: f64,
}

/// Estimates `I_F` at the interior points of a profile with 3-point central
/// differences on the (possibly non-uniform) grid.
///
/// Points with `1 - |E| <` [`ENDPOINT_GUARD`] are skipped. Requires at
/// least 3 points.
pub fn fisher_empirical(profile: &ThetaProfile) -> Result<Vec<FisherEstimate>> {
    let pts = &profile.points;
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "finite-difference Fisher estimate needs at least 3 points, have {}",
            pts.len()
        )));
    }
    let ses = profile.standard_errors();
    let mut estimates = Vec::with_capacity(pts.len() - 2);
    for i in 1..pts.len() - 1 {
        let (prev, here, next) = (pts[i - 1], pts[i], pts[i + 1]);
        if 1.0 - here.e.abs() < ENDPOINT_GUARD {
            continue;
        }
        let h_l = here.theta - prev.theta;
        let h_r = next.theta - here.theta;
        // Second-order stencil on a non-uniform grid.
        let c_m = -h_r / (h_l * (h_l + h_r));
        let c_0 = (h_r - h_l) / (h_l * h_r);
        let c_p = h_l / (h_r * (h_l + h_r));
        let de = c_m * prev.e + c_0 * here.e + c_p * next.e;
        let denom = 1.0 - here.e * here.e;
        let i_f = de * de / denom;

        // Delta method over the three independent E estimates.
        let d_prev = 2.0 * de * c_m / denom;
        let d_here = 2.0 * de * c_0 / denom + de * de * 2.0 * here.e / (denom * denom);
        let d_next = 2.0 * de * c_p / denom;
        let var = (d_prev * ses[i - 1]).powi(2)
            + (d_here * ses[i]).powi(2)
            + (d_next * ses[i + 1]).powi(2);
        estimates.push(FisherEstimate {
            theta: here.theta,
            i_f,
            se: var.sqrt(),
        });
    }
    Ok(estimates)
}

/// Best member of the family `E(theta) = cos(K theta + phi)` for a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustFit {
    pub k: u32,
    /// Snapped phase, 0 or pi.
    pub phi: f64,
    /// Continuous-phase minimizer at the winning `k`.
    pub phi_continuous: f64,
    /// `K^2` (the Fisher information of the fitted family member).
    pub fisher: f64,
    /// Weighted RMS misfit at the snapped phase.
    pub rms_error: f64,
    /// True when the constant solution `K = 0` wins: it describes an
    /// experiment whose frequencies ignore the conditions and is excluded
    /// from the physical solution set.
    pub trivial: bool,
}

fn weighted_rms(points: &[ProfilePoint], weights: &[f64], k: f64, phi: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, w) in points.iter().zip(weights) {
        let r = p.e - (k * p.theta + phi).cos();
        num += w * r * r;
        den += w;
    }
    (num / den).sqrt()
}

/// Fits integer `K` in `0..=k_max` and phase `phi in {0, pi}` by weighted
/// RMS, also reporting the continuous-phase minimizer at the winning `K`.
///
/// Candidates need `2K + 2` points, so the search is truncated on short
/// profiles; the profile must span at least a quarter period (`pi/2`).
pub fn fit_robust(profile: &ThetaProfile, k_max: u32) -> Result<RobustFit> {
    let pts = &profile.points;
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "cosine-family fit needs at least 4 points, have {}",
            pts.len()
        )));
    }
    let span = pts.last().expect("nonempty").theta - pts[0].theta;
    if span < std::f64::consts::FRAC_PI_2 {
        return Err(Error::InsufficientData(format!(
            "profile spans {span:.3} rad, need at least pi/2"
        )));
    }
    // Event counts as weights when available, uniform otherwise (estimated
    // 1/SE^2 weights diverge at |E| = 1).
    let all_counted = pts.iter().all(|p| p.n.is_some());
    let weights: Vec<f64> = pts
        .iter()
        .map(|p| {
            if all_counted {
                p.n.unwrap() as f64
            } else {
                1.0
            }
        })
        .collect();

    // A constant profile carries no dependence on the conditions at all;
    // report the excluded trivial solution directly.
    let e_min = pts.iter().map(|p| p.e).fold(f64::INFINITY, f64::min);
    let e_max = pts.iter().map(|p| p.e).fold(f64::NEG_INFINITY, f64::max);
    if e_max - e_min < 1e-12 {
        let mean = pts.iter().map(|p| p.e).sum::<f64>() / pts.len() as f64;
        let phi = if mean >= 0.0 {
            0.0
        } else {
            std::f64::consts::PI
        };
        return Ok(RobustFit {
            k: 0,
            phi,
            phi_continuous: phi,
            fisher: 0.0,
            rms_error: weighted_rms(pts, &weights, 0.0, phi),
            trivial: true,
        });
    }

    let mut best: Option<(u32, f64, f64)> = None; // (k, phi, rms)
    for k in 0..=k_max {
        if 2 * k as usize + 2 > pts.len() {
            break;
        }
        for phi in [0.0, std::f64::consts::PI] {
            let rms = weighted_rms(pts, &weights, k as f64, phi);
            if best.is_none_or(|(_, _, b)| rms < b) {
                best = Some((k, phi, rms));
            }
        }
    }
    let (k, phi, rms_error) =
        best.ok_or_else(|| Error::InsufficientData("no feasible K candidates".into()))?;

    // Continuous-phase minimizer at the winning K: dense scan plus a
    // parabolic refinement.
    let two_pi = 2.0 * std::f64::consts::PI;
    let steps = 4096;
    let mut best_phi = 0.0;
    let mut best_val = f64::INFINITY;
    for i in 0..steps {
        let cand = two_pi * i as f64 / steps as f64;
        let val = weighted_rms(pts, &weights, k as f64, cand);
        if val < best_val {
            best_val = val;
            best_phi = cand;
        }
    }
    let h = two_pi / steps as f64;
    let (f_m, f_0, f_p) = (
        weighted_rms(pts, &weights, k as f64, best_phi - h),
        best_val,
        weighted_rms(pts, &weights, k as f64, best_phi + h),
    );
    let denom = f_m - 2.0 * f_0 + f_p;
    let phi_continuous = if denom.abs() > 1e-300 {
        best_phi + h * 0.5 * (f_m - f_p) / denom
    } else {
        best_phi
    };

    Ok(RobustFit {
        k,
        phi,
        phi_continuous,
        fisher: (k as f64).powi(2),
        rms_error,
        trivial: k == 0,
    })
}

/// Fisher estimates plus the family fit for one profile: the content of a
/// `fisher` analysis report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    /// Largest harmonic the fit searched.
    pub k_max: u32,
    pub estimates: Vec<FisherEstimate>,
    pub fit: RobustFit,
    /// Max minus min of the estimates: `I_F` should be flat for a robust
    /// experiment, and the spread is left to the caller to threshold.
    pub i_f_spread: f64,
}

pub fn fisher_report(profile: &ThetaProfile, k_max: u32) -> Result<FisherReport> {
    let estimates = fisher_empirical(profile)?;
    let fit = fit_robust(profile, k_max)?;
    let i_f_spread = match (
        estimates
            .iter()
            .map(|e| e.i_f)
            .fold(f64::INFINITY, f64::min),
        estimates
            .iter()
            .map(|e| e.i_f)
            .fold(f64::NEG_INFINITY, f64::max),
    ) {
        (min, max) if min.is_finite() && max.is_finite() => max - min,
        _ => 0.0,
    };
    Ok(FisherReport {
        k_max,
        estimates,
        fit,
        i_f_spread,
    })
}

/// One outcome cell of a compliance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceCell {
    pub setting: usize,
    pub outcome: String,
    pub observed: u64,
    pub expected_probability: f64,
    /// Normal-approximation score; `None` for degenerate cells.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    /// Exact-test outcome for degenerate cells (probability 0 or 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_pass: Option<bool>,
}

/// Per-setting chi-square against the quantum cell probabilities
/// (diagnostic only; the pass/fail contract is the per-cell z test).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareEntry {
    pub setting: usize,
    pub statistic: f64,
    pub dof: usize,
}

/// Result of the k-sigma compliance test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub threshold_sigma: f64,
    pub max_abs_z: f64,
    pub pass: bool,
    pub cells: Vec<ComplianceCell>,
    pub chi_square: Vec<ChiSquareEntry>,
}

/// Tests datasets against the quantum predictions: per outcome cell,
/// `z = (n - N p) / sqrt(N p (1-p))` with `p` from the quantum law at the
/// dataset's condition. Passes iff every `|z|` is below `threshold_sigma`
/// and every degenerate cell (p in {0, 1}) matches exactly.
///
/// Requires at least 100 events per dataset (normal-approximation guard).
pub fn compliance_test(
    datasets: &[EventDataset],
    threshold_sigma: f64,
) -> Result<ComplianceReport> {
    if datasets.is_empty() {
        return Err(Error::InsufficientData("no datasets to test".into()));
    }
    let mut cells = Vec::new();
    let mut chi_square = Vec::new();
    let mut max_abs_z = 0.0f64;
    let mut pass = true;

    for (setting, dataset) in datasets.iter().enumerate() {
        let n = dataset.n();
        if n < 100 {
            return Err(Error::InsufficientData(format!(
                "compliance test needs N >= 100 per dataset, setting {setting} has {n}"
            )));
        }
        let summary = stats::summarize(dataset)?;
        let (labels, probs): (Vec<String>, Vec<f64>) = match &dataset.condition {
            ConditionRecord::Sg { a, m, .. } => (
                vec!["+1".into(), "-1".into()],
                vec![sg_probability(1, *a, *m)?, sg_probability(-1, *a, *m)?],
            ),
            ConditionRecord::Eprb { a1, a2, .. } => {
                let mut labels = Vec::with_capacity(4);
                let mut probs = Vec::with_capacity(4);
                for (x, y) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    labels.push(format!("({x:+},{y:+})"));
                    probs.push(eprb_probability(x, y, *a1, *a2)?);
                }
                (labels, probs)
            }
        };
        let counts = observed_counts(&summary);

        let mut chi = 0.0;
        let mut chi_cells = 0usize;
        for ((label, &count), &p) in labels.iter().zip(&counts).zip(&probs) {
            let expected = n as f64 * p;
            if p <= 0.0 || p >= 1.0 {
                // Degenerate variance: exact test.
                let ok = if p <= 0.0 { count == 0 } else { count == n };
                pass &= ok;
                cells.push(ComplianceCell {
                    setting,
                    outcome: label.clone(),
                    observed: count,
                    expected_probability: p,
                    z: None,
                    exact_pass: Some(ok),
                });
            } else {
                let z = (count as f64 - expected) / (expected * (1.0 - p)).sqrt();
                max_abs_z = max_abs_z.max(z.abs());
                pass &= z.abs() < threshold_sigma;
                chi += (count as f64 - expected).powi(2) / expected;
                chi_cells += 1;
                cells.push(ComplianceCell {
                    setting,
                    outcome: label.clone(),
                    observed: count,
                    expected_probability: p,
                    z: Some(z),
                    exact_pass: None,
                });
            }
        }
        chi_square.push(ChiSquareEntry {
            setting,
            statistic: chi,
            dof: chi_cells.saturating_sub(1),
        });
    }

    Ok(ComplianceReport {
        threshold_sigma,
        max_abs_z,
        pass,
        cells,
        chi_square,
    })
}

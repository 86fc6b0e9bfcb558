//! Reconstruction of a setting-independent source description from
//! multi-setting moments.
//!
//! The moments of two-valued data admit a trace form `<x> = Tr(rho X)` with
//! `X = a.sigma` fixed by the magnet direction. Fitting the Pauli
//! coefficients of `rho` across many settings therefore separates the
//! description into a source part (the density matrix, setting-independent)
//! and an apparatus part (the observables). Data outside that form — e.g. a
//! quadratic dependence on `a` — leaves a residual floor no fit can remove,
//! which is what the `NotSeparable` verdict detects.
//!
//! SG fits solve `<x>_k = u0 + r . a_k` for `(u0, r)` and build
//! `rho = (I + r.sigma)/2`. (`u0` must vanish for data of the trace form;
//! it is fitted rather than imposed, as a diagnostic.) EPRB fits solve the
//! 15-parameter system `<x> = 4 r1.a1`, `<y> = 4 r2.a2`,
//! `<xy> = 4 a1' r12 a2` and build the two-spin density matrix with
//! `c0 = 1/4` fixed by normalization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{
    self, bloch_density, pair_observables, HermitianMatrix, PauliCoefficients2, PauliCoefficients4,
};
use crate::error::{Error, Result};
use crate::simulator::{ConditionRecord, ExperimentKind};
use crate::stats::StatisticsRecord;
use crate::vec3::UnitVector;

/// Per-setting input to a fit: the setting vectors, the measured moments,
/// and optionally the event count behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SettingRecord {
    Sg {
        a: UnitVector,
        mean_x: f64,
        n: Option<u64>,
    },
    Eprb {
        a1: UnitVector,
        a2: UnitVector,
        mean_x: f64,
        mean_y: f64,
        corr_xy: f64,
        n: Option<u64>,
    },
}

impl SettingRecord {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            SettingRecord::Sg { .. } => ExperimentKind::Sg,
            SettingRecord::Eprb { .. } => ExperimentKind::Eprb,
        }
    }

    pub fn n(&self) -> Option<u64> {
        match self {
            SettingRecord::Sg { n, .. } | SettingRecord::Eprb { n, .. } => *n,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            SettingRecord::Sg { mean_x, .. } => mean_x.abs() <= 1.0,
            SettingRecord::Eprb {
                mean_x,
                mean_y,
                corr_xy,
                ..
            } => mean_x.abs() <= 1.0 && mean_y.abs() <= 1.0 && corr_xy.abs() <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfRange("moment magnitude exceeds 1".into()))
        }
    }

    /// Builds a setting record from a statistics interchange record.
    pub fn from_statistics(record: &StatisticsRecord) -> Result<Self> {
        let n = Some(record.summary.n());
        match &record.condition {
            ConditionRecord::Sg { a, .. } => Ok(SettingRecord::Sg {
                a: *a,
                mean_x: record.summary.mean_x(),
                n,
            }),
            ConditionRecord::Eprb { a1, a2, .. } => {
                Ok(SettingRecord::Eprb {
                    a1: *a1,
                    a2: *a2,
                    mean_x: record.summary.mean_x(),
                    mean_y: record.summary.mean_y().ok_or_else(|| {
                        Error::KindMismatch("EPRB condition with SG summary".into())
                    })?,
                    corr_xy: record.summary.corr_xy().ok_or_else(|| {
                        Error::KindMismatch("EPRB condition with SG summary".into())
                    })?,
                    n,
                })
            }
        }
    }
}

/// Fit verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Residuals within tolerance and the source is (nearly) a projection.
    SeparablePure,
    /// Residuals within tolerance, source genuinely mixed.
    SeparableMixed,
    /// Residual floor or negative eigenvalue: no single source description
    /// reproduces the data.
    NotSeparable,
    /// The settings do not determine the coefficients uniquely; the
    /// minimum-norm solution is reported.
    IndeterminateRank,
}

/// Tolerances for verdict assignment.
///
/// `sep_tol = None` resolves to `max(0.02, 3 x median standard error)` of
/// the supplied moments, so the threshold scales with sampling noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationTolerances {
    pub sep_tol: Option<f64>,
    pub purity_tol: f64,
    pub psd_tol: f64,
}

impl Default for SeparationTolerances {
    fn default() -> Self {
        SeparationTolerances {
            sep_tol: None,
            purity_tol: 0.02,
            psd_tol: 0.02,
        }
    }
}

impl SeparationTolerances {
    /// Tolerances for noise-free inputs: exact data deserves exact verdicts.
    pub fn exact() -> Self {
        SeparationTolerances {
            sep_tol: None,
            purity_tol: 1e-9,
            psd_tol: 1e-10,
        }
    }
}

/// Fitted Pauli coefficients, by experiment kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSet {
    Two(PauliCoefficients2),
    Four(PauliCoefficients4),
}

/// Outcome of a separation fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationResult {
    pub kind: ExperimentKind,
    /// Reconstructed source description (unit trace by construction).
    pub rho: HermitianMatrix,
    /// Pauli coefficients of `rho`.
    pub coefficients: CoefficientSet,
    /// Fitted offset of the SG observable (`None` for EPRB). Nonzero values
    /// are a diagnostic: moments of the trace form have no offset.
    pub u0: Option<f64>,
    /// Fit-minus-data residuals, one inner vector per setting (one entry for
    /// SG, `(x, y, xy)` for EPRB).
    pub residuals: Vec<Vec<f64>>,
    pub residual_rms: f64,
    pub max_residual: f64,
    pub purity: f64,
    /// Eigenvalues of `rho` in descending order.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    /// Rank of the design matrix / rank needed for a unique fit.
    pub rank: usize,
    pub full_rank: usize,
    /// Tolerances after resolution of the automatic `sep_tol`.
    pub resolved_sep_tol: f64,
    pub purity_tol: f64,
    pub psd_tol: f64,
    pub verdict: Verdict,
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Some(values[values.len() / 2])
}

/// Weighted minimum-norm least squares via SVD of the row-scaled design
/// matrix. Returns the solution, the numerical rank (singular values above
/// `1e-10 x` the largest), and the unweighted residuals (fit minus data).
fn weighted_least_squares(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    ncols: usize,
) -> Result<(Vec<f64>, usize, Vec<f64>)> {
    let nrows = rows.len();
    let a = DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j] * weights[i].sqrt());
    let b = DVector::from_fn(nrows, |i, _| targets[i] * weights[i].sqrt());
    let svd = a.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = 1e-10 * sigma_max;
    let rank = svd.rank(eps);
    let solution = svd
        .solve(&b, eps)
        .map_err(|e| Error::InsufficientData(e.to_string()))?;
    let residuals: Vec<f64> = (0..nrows)
        .map(|i| {
            let fit: f64 = (0..ncols).map(|j| rows[i][j] * solution[j]).sum();
            fit - targets[i]
        })
        .collect();
    Ok((solution.iter().copied().collect(), rank, residuals))
}

/// Per-row weights: event counts when every setting carries one (inverse of
/// the a-priori variance bound `(1 - E^2)/N <= 1/N`), uniform otherwise.
/// Estimated `1/SE^2` weights are not used: they diverge wherever a moment
/// sits at ±1, drowning out every other setting.
fn row_weights(settings: &[SettingRecord], rows_per_setting: usize) -> Vec<f64> {
    let all_counted = settings.iter().all(|s| s.n().is_some());
    settings
        .iter()
        .flat_map(|s| {
            let w = if all_counted {
                s.n().unwrap() as f64
            } else {
                1.0
            };
            std::iter::repeat_n(w, rows_per_setting)
        })
        .collect()
}

fn resolve_sep_tol(tolerances: &SeparationTolerances, moment_ses: Vec<f64>) -> f64 {
    match tolerances.sep_tol {
        Some(t) => t,
        None => {
            let se = median(moment_ses).unwrap_or(0.0);
            (3.0 * se).max(0.02)
        }
    }
}

fn moment_se(e: f64, n: Option<u64>) -> Option<f64> {
    n.map(|n| ((1.0 - e * e).max(0.0) / n as f64).sqrt())
}

struct FitSummary {
    residual_rms: f64,
    max_residual: f64,
    purity: f64,
    eigenvalues: Vec<f64>,
    min_eigenvalue: f64,
    verdict: Verdict,
}

fn summarize_fit(
    rho: &HermitianMatrix,
    flat_residuals: &[f64],
    rank: usize,
    full_rank: usize,
    sep_tol: f64,
    tolerances: &SeparationTolerances,
) -> Result<FitSummary> {
    let residual_rms =
        (flat_residuals.iter().map(|r| r * r).sum::<f64>() / flat_residuals.len() as f64).sqrt();
    let max_residual = flat_residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let purity = algebra::purity(rho)?;
    let mut eigenvalues = rho.eigenvalues();
    let min_eigenvalue = eigenvalues[0];
    eigenvalues.reverse(); // descending

    let verdict = if rank < full_rank {
        Verdict::IndeterminateRank
    } else if residual_rms > sep_tol || min_eigenvalue < -tolerances.psd_tol {
        Verdict::NotSeparable
    } else if purity >= 1.0 - tolerances.purity_tol {
        Verdict::SeparablePure
    } else {
        Verdict::SeparableMixed
    };
    Ok(FitSummary {
        residual_rms,
        max_residual,
        purity,
        eigenvalues,
        min_eigenvalue,
        verdict,
    })
}

/// Fits `(u0, r)` to SG moments `<x>_k = u0 + r . a_k` and assembles
/// `rho = (I + r.sigma)/2`.
///
/// Requires at least two settings; with design rank below 4 the verdict is
/// [`Verdict::IndeterminateRank`] and the coefficients are the minimum-norm
/// solution.
pub fn separate_sg(
    settings: &[SettingRecord],
    tolerances: &SeparationTolerances,
) -> Result<SeparationResult> {
    if settings.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "SG separation needs at least 2 settings, have {}",
            settings.len()
        )));
    }
    let mut rows = Vec::with_capacity(settings.len());
    let mut targets = Vec::with_capacity(settings.len());
    let mut ses = Vec::new();
    for setting in settings {
        setting.validate()?;
        match setting {
            SettingRecord::Sg { a, mean_x, n } => {
                let a = a.as_array();
                rows.push(vec![1.0, a[0], a[1], a[2]]);
                targets.push(*mean_x);
                ses.extend(moment_se(*mean_x, *n));
            }
            SettingRecord::Eprb { .. } => {
                return Err(Error::KindMismatch(
                    "EPRB setting passed to SG separation".into(),
                ))
            }
        }
    }
    let weights = row_weights(settings, 1);
    let (solution, rank, residuals) = weighted_least_squares(&rows, &targets, &weights, 4)?;

    let u0 = solution[0];
    let r = [solution[1], solution[2], solution[3]];
    let rho = bloch_density(r);
    let sep_tol = resolve_sep_tol(tolerances, ses);
    let summary = summarize_fit(&rho, &residuals, rank, 4, sep_tol, tolerances)?;

    Ok(SeparationResult {
        kind: ExperimentKind::Sg,
        coefficients: CoefficientSet::Two(algebra::pauli_decompose_2(&rho)?),
        rho,
        u0: Some(u0),
        residuals: residuals.iter().map(|&r| vec![r]).collect(),
        residual_rms: summary.residual_rms,
        max_residual: summary.max_residual,
        purity: summary.purity,
        eigenvalues: summary.eigenvalues,
        min_eigenvalue: summary.min_eigenvalue,
        rank,
        full_rank: 4,
        resolved_sep_tol: sep_tol,
        purity_tol: tolerances.purity_tol,
        psd_tol: tolerances.psd_tol,
        verdict: summary.verdict,
    })
}

/// Fits the 15 tensor-basis coefficients to EPRB moments
/// (`<x> = 4 r1.a1`, `<y> = 4 r2.a2`, `<xy> = 4 a1' r12 a2`; `c0 = 1/4`
/// fixed by normalization) and assembles the two-spin density matrix.
///
/// Rank-deficient designs yield [`Verdict::IndeterminateRank`] with the
/// minimum-norm coefficients.
pub fn separate_eprb(
    settings: &[SettingRecord],
    tolerances: &SeparationTolerances,
) -> Result<SeparationResult> {
    if settings.is_empty() {
        return Err(Error::InsufficientData(
            "EPRB separation needs at least 1 setting".into(),
        ));
    }
    let mut rows = Vec::with_capacity(3 * settings.len());
    let mut targets = Vec::with_capacity(3 * settings.len());
    let mut ses = Vec::new();
    for setting in settings {
        setting.validate()?;
        match setting {
            SettingRecord::Eprb {
                a1,
                a2,
                mean_x,
                mean_y,
                corr_xy,
                n,
            } => {
                let (a1, a2) = (a1.as_array(), a2.as_array());
                // Unknowns: [r1 (3), r2 (3), r12 (9, row-major)].
                let mut row_x = vec![0.0; 15];
                let mut row_y = vec![0.0; 15];
                let mut row_xy = vec![0.0; 15];
                for i in 0..3 {
                    row_x[i] = 4.0 * a1[i];
                    row_y[3 + i] = 4.0 * a2[i];
                    for j in 0..3 {
                        row_xy[6 + 3 * i + j] = 4.0 * a1[i] * a2[j];
                    }
                }
                rows.push(row_x);
                rows.push(row_y);
                rows.push(row_xy);
                targets.push(*mean_x);
                targets.push(*mean_y);
                targets.push(*corr_xy);
                ses.extend(moment_se(*mean_x, *n));
                ses.extend(moment_se(*mean_y, *n));
                ses.extend(moment_se(*corr_xy, *n));
            }
            SettingRecord::Sg { .. } => {
                return Err(Error::KindMismatch(
                    "SG setting passed to EPRB separation".into(),
                ))
            }
        }
    }
    let weights = row_weights(settings, 3);
    let (solution, rank, residuals) = weighted_least_squares(&rows, &targets, &weights, 15)?;

    let mut c12 = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c12[i][j] = solution[6 + 3 * i + j];
        }
    }
    let coefficients = PauliCoefficients4 {
        c0: 0.25,
        c1: [solution[0], solution[1], solution[2]],
        c2: [solution[3], solution[4], solution[5]],
        c12,
    };
    let rho = coefficients.matrix();
    let sep_tol = resolve_sep_tol(tolerances, ses);
    let summary = summarize_fit(&rho, &residuals, rank, 15, sep_tol, tolerances)?;

    Ok(SeparationResult {
        kind: ExperimentKind::Eprb,
        rho,
        coefficients: CoefficientSet::Four(coefficients),
        u0: None,
        residuals: residuals.chunks(3).map(|c| c.to_vec()).collect(),
        residual_rms: summary.residual_rms,
        max_residual: summary.max_residual,
        purity: summary.purity,
        eigenvalues: summary.eigenvalues,
        min_eigenvalue: summary.min_eigenvalue,
        rank,
        full_rank: 15,
        resolved_sep_tol: sep_tol,
        purity_tol: tolerances.purity_tol,
        psd_tol: tolerances.psd_tol,
        verdict: summary.verdict,
    })
}

/// Moments the separated representation predicts at a setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedMoments {
    pub mean_x: f64,
    pub mean_y: Option<f64>,
    pub corr_xy: Option<f64>,
}

/// Evaluates `Tr(rho X)` (and `Tr(rho Y)`, `Tr(rho X Y)` for EPRB) at an
/// arbitrary condition — including settings absent from the fit.
pub fn predict(result: &SeparationResult, condition: &ConditionRecord) -> Result<PredictedMoments> {
    match (result.kind, condition) {
        (ExperimentKind::Sg, ConditionRecord::Sg { a, .. }) => {
            let x = HermitianMatrix::dot_sigma(a.as_array());
            Ok(PredictedMoments {
                mean_x: algebra::expectation(&result.rho, &x)?,
                mean_y: None,
                corr_xy: None,
            })
        }
        (ExperimentKind::Eprb, ConditionRecord::Eprb { a1, a2, .. }) => {
            let (x, y, xy) = pair_observables(*a1, *a2);
            Ok(PredictedMoments {
                mean_x: algebra::expectation(&result.rho, &x)?,
                mean_y: Some(algebra::expectation(&result.rho, &y)?),
                corr_xy: Some(algebra::expectation(&result.rho, &xy)?),
            })
        }
        _ => Err(Error::KindMismatch(
            "separation result and condition kinds differ".into(),
        )),
    }
}

/// Serializable separation report (the JSON interchange form of a
/// [`SeparationResult`]; complex entries are `[re, im]` pairs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub kind: ExperimentKind,
    pub n_settings: usize,
    pub coefficients: CoefficientSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    pub rho: Vec<Vec<[f64; 2]>>,
    pub eigenvalues: Vec<f64>,
    pub purity: f64,
    pub min_eigenvalue: f64,
    pub residual_rms: f64,
    pub max_residual: f64,
    pub residuals_per_setting: Vec<Vec<f64>>,
    pub rank: usize,
    pub full_rank: usize,
    pub sep_tol: f64,
    pub purity_tol: f64,
    pub psd_tol: f64,
    pub verdict: Verdict,
}

impl SeparationResult {
    pub fn report(&self) -> SeparationReport {
        let dim = self.rho.dim();
        let rho = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        let e = self.rho.entry(i, j);
                        [e.re, e.im]
                    })
                    .collect()
            })
            .collect();
        SeparationReport {
            kind: self.kind,
            n_settings: self.residuals.len(),
            coefficients: self.coefficients.clone(),
            u0: self.u0,
            rho,
            eigenvalues: self.eigenvalues.clone(),
            purity: self.purity,
            min_eigenvalue: self.min_eigenvalue,
            residual_rms: self.residual_rms,
            max_residual: self.max_residual,
            residuals_per_setting: self.residuals.clone(),
            rank: self.rank,
            full_rank: self.full_rank,
            sep_tol: self.resolved_sep_tol,
            purity_tol: self.purity_tol,
            psd_tol: self.psd_tol,
            verdict: self.verdict,
        }
    }
}

/// The nine pair settings `(a1, a2)` over the coordinate axes; together with
/// the single-side marginals they make the 15-parameter system full rank.
pub fn eprb_axis_pairs() -> Vec<(UnitVector, UnitVector)> {
    let axes = [UnitVector::X, UnitVector::Y, UnitVector::Z];
    let mut pairs = Vec::with_capacity(9);
    for a1 in axes {
        for a2 in axes {
            pairs.push((a1, a2));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{expectation, pauli_decompose_4, singlet_density};
    use crate::rng::SplitMix64;
    use crate::vec3;

    fn sg_setting(a: UnitVector, mean_x: f64) -> SettingRecord {
        SettingRecord::Sg { a, mean_x, n: None }
    }

    fn exact_eprb_setting(rho: &HermitianMatrix, a1: UnitVector, a2: UnitVector) -> SettingRecord {
        let (x, y, xy) = pair_observables(a1, a2);
        SettingRecord::Eprb {
            a1,
            a2,
            mean_x: expectation(rho, &x).unwrap(),
            mean_y: expectation(rho, &y).unwrap(),
            corr_xy: expectation(rho, &xy).unwrap(),
            n: None,
        }
    }

    /// Independent oracle: solve the normal equations A'A x = A'y by
    /// Gaussian elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn normal_equation_solve(rows: &[Vec<f64>], targets: &[f64], ncols: usize) -> Vec<f64> {
        let mut ata = vec![vec![0.0; ncols + 1]; ncols];
        for (row, &t) in rows.iter().zip(targets) {
            for i in 0..ncols {
                for j in 0..ncols {
                    ata[i][j] += row[i] * row[j];
                }
                ata[i][ncols] += row[i] * t;
            }
        }
        for col in 0..ncols {
            let pivot = (col..ncols)
                .max_by(|&a, &b| ata[a][col].abs().partial_cmp(&ata[b][col].abs()).unwrap())
                .unwrap();
            ata.swap(col, pivot);
            let p = ata[col][col];
            assert!(p.abs() > 1e-12, "oracle system singular");
            for j in col..=ncols {
                ata[col][j] /= p;
            }
            for i in 0..ncols {
                if i != col {
                    let f = ata[i][col];
                    for j in col..=ncols {
                        ata[i][j] -= f * ata[col][j];
                    }
                }
            }
        }
        (0..ncols).map(|i| ata[i][ncols]).collect()
    }

    #[test]
    fn sg_exact_pure_source() {
        let settings = vec![
            sg_setting(UnitVector::X, 0.0),
            sg_setting(UnitVector::Y, 0.0),
            sg_setting(UnitVector::Z, 1.0),
            sg_setting(-UnitVector::Z, -1.0),
        ];
        let result = separate_sg(&settings, &SeparationTolerances::exact()).unwrap();
        assert!(result.u0.unwrap().abs() < 1e-12);
        match &result.coefficients {
            CoefficientSet::Two(p) => {
                assert!((p.c[2] - 0.5).abs() < 1e-12); // rho = (I + z.sigma)/2
                assert!(p.c[0].abs() < 1e-12 && p.c[1].abs() < 1e-12);
            }
            _ => panic!("wrong coefficient set"),
        }
        assert!(result.residual_rms < 1e-12);
        assert!((result.purity - 1.0).abs() < 1e-12);
        assert_eq!(result.verdict, Verdict::SeparablePure);
        assert_eq!((result.rank, result.full_rank), (4, 4));
    }

    #[test]
    fn sg_all_zero_moments_is_maximally_mixed() {
        let settings: Vec<_> = UnitVector::signed_axes()
            .into_iter()
            .map(|a| sg_setting(a, 0.0))
            .collect();
        let result = separate_sg(&settings, &SeparationTolerances::exact()).unwrap();
        assert!(result.u0.unwrap().abs() < 1e-12);
        assert!((result.purity - 0.5).abs() < 1e-12);
        assert_eq!(result.verdict, Verdict::SeparableMixed);
    }

    #[test]
    fn sg_quadratic_data_is_not_separable() {
        // E = (a.z)^2 on the six signed axes: values (0,0,0,0,1,1).
        let settings: Vec<_> = UnitVector::signed_axes()
            .into_iter()
            .map(|a| sg_setting(a, a.dot(UnitVector::Z).powi(2)))
            .collect();
        let result = separate_sg(&settings, &SeparationTolerances::default()).unwrap();

        // Oracle: normal-equation solve of the same 6x4 system.
        let rows: Vec<Vec<f64>> = UnitVector::signed_axes()
            .into_iter()
            .map(|a| {
                let a = a.as_array();
                vec![1.0, a[0], a[1], a[2]]
            })
            .collect();
        let targets: Vec<f64> = UnitVector::signed_axes()
            .into_iter()
            .map(|a| a.dot(UnitVector::Z).powi(2))
            .collect();
        let oracle = normal_equation_solve(&rows, &targets, 4);
        assert!((oracle[0] - 1.0 / 3.0).abs() < 1e-12);
        let oracle_rms = {
            let ss: f64 = rows
                .iter()
                .zip(&targets)
                .map(|(row, t)| {
                    let fit: f64 = row.iter().zip(&oracle).map(|(r, x)| r * x).sum();
                    (fit - t).powi(2)
                })
                .sum();
            (ss / rows.len() as f64).sqrt()
        };
        assert!((oracle_rms - 2.0f64.sqrt() / 3.0).abs() < 1e-12);

        assert!((result.u0.unwrap() - oracle[0]).abs() < 1e-10);
        assert!((result.residual_rms - oracle_rms).abs() < 1e-10);
        assert_eq!(result.verdict, Verdict::NotSeparable);
    }

    #[test]
    fn sg_rank_deficient_design() {
        let settings = vec![
            sg_setting(UnitVector::Z, 1.0),
            sg_setting(-UnitVector::Z, -1.0),
        ];
        let result = separate_sg(&settings, &SeparationTolerances::exact()).unwrap();
        assert_eq!(result.verdict, Verdict::IndeterminateRank);
        assert!(result.rank < 4);
        // Minimum-norm solution zeroes the unconstrained components.
        match &result.coefficients {
            CoefficientSet::Two(p) => {
                assert!((p.c[2] - 0.5).abs() < 1e-10);
                assert!(p.c[0].abs() < 1e-10 && p.c[1].abs() < 1e-10);
            }
            _ => panic!("wrong coefficient set"),
        }

        assert!(separate_sg(&settings[..1], &SeparationTolerances::exact()).is_err());
    }

    #[test]
    fn eprb_exact_singlet() {
        let rho = singlet_density();
        let settings: Vec<_> = eprb_axis_pairs()
            .into_iter()
            .map(|(a1, a2)| exact_eprb_setting(&rho, a1, a2))
            .collect();
        let result = separate_eprb(&settings, &SeparationTolerances::exact()).unwrap();
        assert_eq!(result.verdict, Verdict::SeparablePure);
        assert!(result.rho.frobenius_distance(&rho).unwrap() < 1e-10);
        assert!((result.purity - 1.0).abs() < 1e-10);
        assert!((result.eigenvalues[0] - 1.0).abs() < 1e-10);
        for ev in &result.eigenvalues[1..] {
            assert!(ev.abs() < 1e-10);
        }
        match &result.coefficients {
            CoefficientSet::Four(p) => {
                for i in 0..3 {
                    for j in 0..3 {
                        let want = if i == j { -0.25 } else { 0.0 };
                        assert!((p.c12[i][j] - want).abs() < 1e-10);
                    }
                }
            }
            _ => panic!("wrong coefficient set"),
        }
    }

    #[test]
    fn eprb_classically_correlated_along_z() {
        // <xy> = +(a1.z)(a2.z), zero marginals: r12 = zz'/4, purity 1/2.
        let settings: Vec<_> = eprb_axis_pairs()
            .into_iter()
            .map(|(a1, a2)| SettingRecord::Eprb {
                a1,
                a2,
                mean_x: 0.0,
                mean_y: 0.0,
                corr_xy: a1.dot(UnitVector::Z) * a2.dot(UnitVector::Z),
                n: None,
            })
            .collect();
        let result = separate_eprb(&settings, &SeparationTolerances::exact()).unwrap();
        assert_eq!(result.verdict, Verdict::SeparableMixed);
        assert!((result.purity - 0.5).abs() < 1e-10);
        let evs = &result.eigenvalues;
        assert!((evs[0] - 0.5).abs() < 1e-10 && (evs[1] - 0.5).abs() < 1e-10);
        assert!(evs[2].abs() < 1e-10 && evs[3].abs() < 1e-10);
    }

    #[test]
    fn eprb_all_zero_moments() {
        let settings: Vec<_> = eprb_axis_pairs()
            .into_iter()
            .map(|(a1, a2)| SettingRecord::Eprb {
                a1,
                a2,
                mean_x: 0.0,
                mean_y: 0.0,
                corr_xy: 0.0,
                n: None,
            })
            .collect();
        let result = separate_eprb(&settings, &SeparationTolerances::exact()).unwrap();
        assert_eq!(result.verdict, Verdict::SeparableMixed);
        assert!((result.purity - 0.25).abs() < 1e-12);
    }

    #[test]
    fn faithfulness_on_random_densities() {
        let mut rng = SplitMix64::new(0xFEED);
        for _ in 0..60 {
            // 2x2: random Bloch vector inside the ball.
            let r = loop {
                let v = [
                    rng.next_f64() * 2.0 - 1.0,
                    rng.next_f64() * 2.0 - 1.0,
                    rng.next_f64() * 2.0 - 1.0,
                ];
                if vec3::norm(v) <= 1.0 {
                    break v;
                }
            };
            let rho = bloch_density(r);
            let settings: Vec<_> = UnitVector::signed_axes()
                .into_iter()
                .map(|a| {
                    let x = HermitianMatrix::dot_sigma(a.as_array());
                    sg_setting(a, expectation(&rho, &x).unwrap())
                })
                .collect();
            let result = separate_sg(&settings, &SeparationTolerances::exact()).unwrap();
            assert!(result.rho.frobenius_distance(&rho).unwrap() < 1e-9);
            assert!(result.residual_rms <= 1e-9);
            assert!(result.u0.unwrap().abs() < 1e-9);
        }
        for _ in 0..60 {
            let rho = crate::algebra::random_density(&mut rng, 4);
            let settings: Vec<_> = eprb_axis_pairs()
                .into_iter()
                .map(|(a1, a2)| exact_eprb_setting(&rho, a1, a2))
                .collect();
            let result = separate_eprb(&settings, &SeparationTolerances::exact()).unwrap();
            assert!(
                result.rho.frobenius_distance(&rho).unwrap() < 1e-9,
                "distance {}",
                result.rho.frobenius_distance(&rho).unwrap()
            );
            assert!(result.residual_rms <= 1e-9);
        }
    }

    #[test]
    fn rotational_covariance() {
        // Rotating every setting and the source by the same rotation rotates
        // the fitted Bloch vector accordingly.
        let angle: f64 = 0.7;
        let (s, c) = angle.sin_cos();
        let rotate = |v: [f64; 3]| [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]];

        let m = UnitVector::normalized([0.3, -0.4, 0.866]).unwrap();
        let settings_base: Vec<_> = UnitVector::signed_axes()
            .into_iter()
            .map(|a| sg_setting(a, a.dot(m)))
            .collect();
        let fitted_base = separate_sg(&settings_base, &SeparationTolerances::exact()).unwrap();

        let settings_rotated: Vec<_> = UnitVector::signed_axes()
            .into_iter()
            .map(|a| {
                let ra = UnitVector::normalized(rotate(a.as_array())).unwrap();
                let rm = UnitVector::normalized(rotate(m.as_array())).unwrap();
                sg_setting(ra, ra.dot(rm))
            })
            .collect();
        let fitted_rot = separate_sg(&settings_rotated, &SeparationTolerances::exact()).unwrap();

        let base = match fitted_base.coefficients {
            CoefficientSet::Two(p) => [2.0 * p.c[0], 2.0 * p.c[1], 2.0 * p.c[2]],
            _ => unreachable!(),
        };
        let rot = match fitted_rot.coefficients {
            CoefficientSet::Two(p) => [2.0 * p.c[0], 2.0 * p.c[1], 2.0 * p.c[2]],
            _ => unreachable!(),
        };
        let expected = rotate(base);
        for i in 0..3 {
            assert!((rot[i] - expected[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn predict_known_values() {
        // Singlet: <xy> at 60 degrees is -0.5.
        let rho = singlet_density();
        let settings: Vec<_> = eprb_axis_pairs()
            .into_iter()
            .map(|(a1, a2)| exact_eprb_setting(&rho, a1, a2))
            .collect();
        let result = separate_eprb(&settings, &SeparationTolerances::exact()).unwrap();
        let condition = ConditionRecord::Eprb {
            a1: UnitVector::Z,
            a2: UnitVector::polar(std::f64::consts::FRAC_PI_3),
            m1: UnitVector::Z,
            m2: UnitVector::Z,
            z: String::new(),
        };
        let p = predict(&result, &condition).unwrap();
        assert!((p.corr_xy.unwrap() + 0.5).abs() < 1e-9);
        assert!(p.mean_x.abs() < 1e-9 && p.mean_y.unwrap().abs() < 1e-9);

        // Pure spin-up source predicts <x> = 1 along z.
        let settings = vec![
            sg_setting(UnitVector::X, 0.0),
            sg_setting(UnitVector::Y, 0.0),
            sg_setting(UnitVector::Z, 1.0),
            sg_setting(-UnitVector::Z, -1.0),
        ];
        let result = separate_sg(&settings, &SeparationTolerances::exact()).unwrap();
        let p = predict(
            &result,
            &ConditionRecord::Sg {
                a: UnitVector::Z,
                m: UnitVector::Z,
                z: String::new(),
            },
        )
        .unwrap();
        assert!((p.mean_x - 1.0).abs() < 1e-9);

        // Maximally mixed predicts zero everywhere.
        let flat: Vec<_> = UnitVector::signed_axes()
            .into_iter()
            .map(|a| sg_setting(a, 0.0))
            .collect();
        let result = separate_sg(&flat, &SeparationTolerances::exact()).unwrap();
        let p = predict(
            &result,
            &ConditionRecord::Sg {
                a: UnitVector::polar(1.0),
                m: UnitVector::Z,
                z: String::new(),
            },
        )
        .unwrap();
        assert!(p.mean_x.abs() < 1e-12);
    }

    #[test]
    fn predict_matches_held_out_simulated_moments() {
        // Fit on the nine axis pairs, then check the prediction at settings
        // absent from the fit against freshly simulated data, within five
        // standard errors.
        use crate::simulator::{simulate, OutcomeModel};
        use crate::stats::summarize;

        let n = 100_000u64;
        let settings: Vec<_> = eprb_axis_pairs()
            .into_iter()
            .enumerate()
            .map(|(i, (a1, a2))| {
                let condition = ConditionRecord::Eprb {
                    a1,
                    a2,
                    m1: UnitVector::Z,
                    m2: UnitVector::Z,
                    z: String::new(),
                };
                let data =
                    simulate(&OutcomeModel::QuantumEprb, &condition, n, 900 + i as u64).unwrap();
                SettingRecord::from_statistics(
                    &crate::stats::StatisticsRecord::new(condition, summarize(&data).unwrap())
                        .unwrap(),
                )
                .unwrap()
            })
            .collect();
        let result = separate_eprb(&settings, &SeparationTolerances::default()).unwrap();

        for (i, theta_deg) in [35.0, 72.0, 151.0].into_iter().enumerate() {
            let theta = theta_deg * std::f64::consts::PI / 180.0;
            let condition = ConditionRecord::Eprb {
                a1: UnitVector::Z,
                a2: UnitVector::polar(theta),
                m1: UnitVector::Z,
                m2: UnitVector::Z,
                z: String::new(),
            };
            let predicted = predict(&result, &condition).unwrap();
            let data = simulate(&OutcomeModel::QuantumEprb, &condition, n, 950 + i as u64).unwrap();
            let stats = summarize(&data).unwrap();
            let corr = stats.corr_xy().unwrap();
            let se = ((1.0 - corr * corr) / n as f64).sqrt();
            assert!(
                (predicted.corr_xy.unwrap() - corr).abs() <= 5.0 * se,
                "held-out prediction off at theta = {theta_deg} deg"
            );
        }
    }

    #[test]
    fn eprb_recovers_coefficients_via_decomposition() {
        // The fitted coefficient set agrees with a direct decomposition of
        // the fitted matrix.
        let rho = singlet_density();
        let settings: Vec<_> = eprb_axis_pairs()
            .into_iter()
            .map(|(a1, a2)| exact_eprb_setting(&rho, a1, a2))
            .collect();
        let result = separate_eprb(&settings, &SeparationTolerances::exact()).unwrap();
        let direct = pauli_decompose_4(&result.rho).unwrap();
        match &result.coefficients {
            CoefficientSet::Four(p) => {
                assert!((p.c0 - direct.c0).abs() < 1e-12);
                for i in 0..3 {
                    assert!((p.c1[i] - direct.c1[i]).abs() < 1e-10);
                    assert!((p.c2[i] - direct.c2[i]).abs() < 1e-10);
                    for j in 0..3 {
                        assert!((p.c12[i][j] - direct.c12[i][j]).abs() < 1e-10);
                    }
                }
            }
            _ => panic!("wrong coefficient set"),
        }
    }
}

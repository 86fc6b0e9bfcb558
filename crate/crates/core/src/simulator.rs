//! Seeded event-by-event generation of Stern-Gerlach and EPRB datasets.
//!
//! Outcomes are ±1 (SG) or ±1 pairs (EPRB) drawn i.i.d. from an
//! [`OutcomeModel`]'s single-event distribution at a fixed
//! [`ConditionRecord`]. The quantum models reproduce the textbook laws
//! `P(x) = (1 + x a.M)/2` and `P(x,y) = (1 - xy a1.a2)/4`; the remaining
//! variants generate data that no single source description can explain,
//! which is what the separation and inference layers are built to detect.
//!
//! Every draw is keyed by `(seed, stream, event index)` through the
//! counter-based generator in [`crate::rng`], so a dataset is a pure function
//! of `(model, condition, n, seed)` regardless of evaluation order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::vec3::UnitVector;

/// Which experiment a condition or dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Sg,
    Eprb,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExperimentKind::Sg => write!(f, "sg"),
            ExperimentKind::Eprb => write!(f, "eprb"),
        }
    }
}

/// The fixed conditions of one experimental run: magnet direction(s), source
/// direction(s), and a free-text tag `z` for everything else held fixed.
///
/// For EPRB runs the source directions `m1`, `m2` are carried for
/// bookkeeping only; no pair model consumes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConditionRecord {
    Sg {
        a: UnitVector,
        m: UnitVector,
        #[serde(default)]
        z: String,
    },
    Eprb {
        a1: UnitVector,
        a2: UnitVector,
        m1: UnitVector,
        m2: UnitVector,
        #[serde(default)]
        z: String,
    },
}

impl ConditionRecord {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ConditionRecord::Sg { .. } => ExperimentKind::Sg,
            ConditionRecord::Eprb { .. } => ExperimentKind::Eprb,
        }
    }

    /// The angle cosine the single-event distribution depends on:
    /// `a.m` for SG, `a1.a2` for EPRB.
    pub fn costheta(&self) -> f64 {
        match self {
            ConditionRecord::Sg { a, m, .. } => a.dot(*m),
            ConditionRecord::Eprb { a1, a2, .. } => a1.dot(*a2),
        }
    }

    pub fn theta(&self) -> f64 {
        self.costheta().clamp(-1.0, 1.0).acos()
    }

    pub fn z(&self) -> &str {
        match self {
            ConditionRecord::Sg { z, .. } => z,
            ConditionRecord::Eprb { z, .. } => z,
        }
    }
}

/// One weighted component of a mixed-source ensemble: with probability
/// `weight` the source emits along `m` and outcomes follow `model`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub m: UnitVector,
    pub model: Box<OutcomeModel>,
}

/// Single-event outcome law.
///
/// `QuantumSg` and `QuantumEprb` are the quantum laws (sign conventions
/// `E = +cos(theta)` and `E = -cos(theta)` respectively). `CosineK` is the
/// full robust family `E = cos(K theta + phi)`. `Quadratic`
/// (`E = cos^2 theta`) and `ScaledCosine` (`lambda` times the quantum law)
/// are deliberately outside that family. `Mixture` draws a source component
/// per event, realizing an ensemble-weighted source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OutcomeModel {
    QuantumSg,
    QuantumEprb,
    CosineK { k: u32, phi: f64 },
    Quadratic,
    ScaledCosine { lambda: f64 },
    Mixture { components: Vec<MixtureComponent> },
}

impl OutcomeModel {
    /// Checks the constraints a well-formed model must satisfy: parameters in
    /// range, mixture weights non-negative and summing to 1 within 1e-12, and
    /// single-event probabilities in [0, 1] for every setting (established by
    /// scanning the correlation over `cos(theta)` in [-1, 1]).
    pub fn validate(&self) -> Result<()> {
        match self {
            OutcomeModel::QuantumSg | OutcomeModel::QuantumEprb | OutcomeModel::Quadratic => {}
            OutcomeModel::CosineK { phi, .. } => {
                if !phi.is_finite() {
                    return Err(Error::InvalidModel(format!("phi = {phi} is not finite")));
                }
            }
            OutcomeModel::ScaledCosine { lambda } => {
                if !(0.0..=1.0).contains(lambda) {
                    return Err(Error::InvalidModel(format!(
                        "lambda = {lambda} outside [0, 1]"
                    )));
                }
            }
            OutcomeModel::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidModel("mixture has no components".into()));
                }
                let mut total = 0.0;
                for component in components {
                    if component.weight < 0.0 {
                        return Err(Error::InvalidModel(format!(
                            "negative mixture weight {}",
                            component.weight
                        )));
                    }
                    if matches!(*component.model, OutcomeModel::Mixture { .. }) {
                        return Err(Error::InvalidModel(
                            "nested mixtures are not supported".into(),
                        ));
                    }
                    component.model.validate()?;
                    total += component.weight;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidModel(format!(
                        "mixture weights sum to {total}, expected 1"
                    )));
                }
            }
        }
        // Probability bound |E| <= 1, scanned over the full setting range.
        // Mixtures of valid components are bounded by construction; scanning
        // them would additionally require a common component axis.
        if !matches!(self, OutcomeModel::Mixture { .. }) {
            let kind = self.natural_kind();
            for i in 0..=2000 {
                let costheta = -1.0 + i as f64 * 0.001;
                let e = self.correlation(kind, costheta)?;
                if e.abs() > 1.0 + 1e-9 {
                    return Err(Error::InvalidModel(format!(
                        "|E| = {} > 1 at cos(theta) = {costheta}",
                        e.abs()
                    )));
                }
            }
        }
        Ok(())
    }

    fn natural_kind(&self) -> ExperimentKind {
        match self {
            OutcomeModel::QuantumEprb => ExperimentKind::Eprb,
            _ => ExperimentKind::Sg,
        }
    }

    /// Errors unless the model can generate data of the given kind.
    pub fn check_kind(&self, kind: ExperimentKind) -> Result<()> {
        match self {
            OutcomeModel::QuantumSg if kind != ExperimentKind::Sg => Err(Error::KindMismatch(
                "quantum-sg generates single-outcome data only".into(),
            )),
            OutcomeModel::QuantumEprb if kind != ExperimentKind::Eprb => Err(Error::KindMismatch(
                "quantum-eprb generates pair data only".into(),
            )),
            OutcomeModel::Mixture { components } => {
                for component in components {
                    component.model.check_kind(kind)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Exact single-event correlation `E(theta)` (SG) or `E12(theta)` (EPRB)
    /// at `cos(theta) = costheta`.
    ///
    /// `ScaledCosine` scales the kind's quantum law, so its sign follows the
    /// kind. A mixture has a single-angle correlation only when its component
    /// axes are collinear; `costheta` is then measured against the first
    /// component's axis.
    pub fn correlation(&self, kind: ExperimentKind, costheta: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&costheta) {
            return Err(Error::OutOfRange(format!(
                "cos(theta) = {costheta} outside [-1, 1]"
            )));
        }
        match self {
            OutcomeModel::QuantumSg => {
                self.check_kind(kind)?;
                Ok(costheta)
            }
            OutcomeModel::QuantumEprb => {
                self.check_kind(kind)?;
                Ok(-costheta)
            }
            OutcomeModel::CosineK { k, phi } => Ok((*k as f64 * costheta.acos() + phi).cos()),
            OutcomeModel::Quadratic => Ok(costheta * costheta),
            OutcomeModel::ScaledCosine { lambda } => match kind {
                ExperimentKind::Sg => Ok(lambda * costheta),
                ExperimentKind::Eprb => Ok(-lambda * costheta),
            },
            OutcomeModel::Mixture { components } => {
                let axis = components
                    .first()
                    .ok_or_else(|| Error::InvalidModel("mixture has no components".into()))?
                    .m;
                let mut acc = 0.0;
                for component in components {
                    let along = component.m.dot(axis);
                    if along.abs() < 1.0 - 1e-9 {
                        return Err(Error::InvalidModel(
                            "mixture component axes are not collinear; the correlation \
                             is not a function of a single angle"
                                .into(),
                        ));
                    }
                    let signed = (along.signum() * costheta).clamp(-1.0, 1.0);
                    acc += component.weight * component.model.correlation(kind, signed)?;
                }
                Ok(acc)
            }
        }
    }

    /// Analytic `dE/dtheta` of [`Self::correlation`] at angle `theta`.
    pub fn correlation_dtheta(&self, kind: ExperimentKind, theta: f64) -> Result<f64> {
        match self {
            OutcomeModel::QuantumSg => {
                self.check_kind(kind)?;
                Ok(-theta.sin())
            }
            OutcomeModel::QuantumEprb => {
                self.check_kind(kind)?;
                Ok(theta.sin())
            }
            OutcomeModel::CosineK { k, phi } => {
                let k = *k as f64;
                Ok(-k * (k * theta + phi).sin())
            }
            OutcomeModel::Quadratic => Ok(-(2.0 * theta).sin()),
            OutcomeModel::ScaledCosine { lambda } => match kind {
                ExperimentKind::Sg => Ok(-lambda * theta.sin()),
                ExperimentKind::Eprb => Ok(lambda * theta.sin()),
            },
            OutcomeModel::Mixture { components } => {
                let axis = components
                    .first()
                    .ok_or_else(|| Error::InvalidModel("mixture has no components".into()))?
                    .m;
                let mut acc = 0.0;
                for component in components {
                    let along = component.m.dot(axis);
                    if along.abs() < 1.0 - 1e-9 {
                        return Err(Error::InvalidModel(
                            "mixture component axes are not collinear".into(),
                        ));
                    }
                    // A flipped component sees the supplementary angle.
                    let d = if along >= 0.0 {
                        component.model.correlation_dtheta(kind, theta)?
                    } else {
                        -component
                            .model
                            .correlation_dtheta(kind, std::f64::consts::PI - theta)?
                    };
                    acc += component.weight * d;
                }
                Ok(acc)
            }
        }
    }

    /// The correlation actually realized at a condition, with mixture
    /// components evaluated at their own source axis (`a . m_i`). This is
    /// what empirical moments of simulated data converge to.
    pub fn effective_correlation(&self, condition: &ConditionRecord) -> Result<f64> {
        match (self, condition) {
            (OutcomeModel::Mixture { components }, ConditionRecord::Sg { a, .. }) => {
                let mut acc = 0.0;
                for component in components {
                    let costheta = a.dot(component.m).clamp(-1.0, 1.0);
                    acc += component.weight
                        * component.model.correlation(ExperimentKind::Sg, costheta)?;
                }
                Ok(acc)
            }
            (OutcomeModel::Mixture { components }, ConditionRecord::Eprb { .. }) => {
                let costheta = condition.costheta().clamp(-1.0, 1.0);
                let mut acc = 0.0;
                for component in components {
                    acc += component.weight
                        * component
                            .model
                            .correlation(ExperimentKind::Eprb, costheta)?;
                }
                Ok(acc)
            }
            _ => self.correlation(condition.kind(), condition.costheta().clamp(-1.0, 1.0)),
        }
    }

    /// Single-event outcome distribution at a condition: two cells
    /// `[P(+1), P(-1)]` for SG, four cells `[P(+,+), P(+,-), P(-,+), P(-,-)]`
    /// for EPRB. The last cell closes the distribution, so the cells sum to
    /// 1 exactly in floating point.
    pub fn outcome_distribution(&self, condition: &ConditionRecord) -> Result<Vec<f64>> {
        self.check_kind(condition.kind())?;
        let e = self.effective_correlation(condition)?;
        Ok(match condition.kind() {
            ExperimentKind::Sg => sg_cells(e).to_vec(),
            ExperimentKind::Eprb => eprb_cells(e).to_vec(),
        })
    }
}

/// `[P(+1), P(-1)]` for single-outcome correlation `e`.
fn sg_cells(e: f64) -> [f64; 2] {
    let p_plus = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
    [p_plus, 1.0 - p_plus]
}

/// `[P(+,+), P(+,-), P(-,+), P(-,-)]` for pair correlation `e`.
fn eprb_cells(e: f64) -> [f64; 4] {
    let same = ((1.0 + e) / 4.0).clamp(0.0, 0.5); // cells with xy = +1
    let diff = (0.5 - same).max(0.0); // cells with xy = -1
    let last = 1.0 - (same + diff + diff);
    [same, diff, diff, last]
}

/// Quantum single-event probability of outcome `x` for magnet direction `a`
/// and source direction `m`: `(1 + x a.m)/2`. The two outcomes sum to 1
/// exactly.
pub fn sg_probability(x: i8, a: UnitVector, m: UnitVector) -> Result<f64> {
    if x != 1 && x != -1 {
        return Err(Error::OutOfRange(format!("outcome x = {x} must be +-1")));
    }
    let cells = sg_cells(a.dot(m).clamp(-1.0, 1.0));
    Ok(if x == 1 { cells[0] } else { cells[1] })
}

/// Quantum single-event probability of the pair `(x, y)` for magnet
/// directions `a1`, `a2`: `(1 - x y a1.a2)/4`. The four outcomes sum to 1
/// exactly.
pub fn eprb_probability(x: i8, y: i8, a1: UnitVector, a2: UnitVector) -> Result<f64> {
    if (x != 1 && x != -1) || (y != 1 && y != -1) {
        return Err(Error::OutOfRange(format!(
            "outcomes (x, y) = ({x}, {y}) must be +-1"
        )));
    }
    let cells = eprb_cells(-a1.dot(a2).clamp(-1.0, 1.0));
    Ok(cells[pair_cell_index(x, y)])
}

/// Cell index in the fixed order `(+,+), (+,-), (-,+), (-,-)`.
pub fn pair_cell_index(x: i8, y: i8) -> usize {
    let i = usize::from(x < 0);
    let j = usize::from(y < 0);
    2 * i + j
}

/// Label for a pair cell index, e.g. `"(+1,-1)"`.
pub fn pair_cell_label(cell: usize) -> String {
    let x = if cell < 2 { 1 } else { -1 };
    let y = if cell.is_multiple_of(2) { 1 } else { -1 };
    format!("({x:+},{y:+})")
}

/// Event payload of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Events {
    Sg(Vec<i8>),
    Eprb(Vec<(i8, i8)>),
}

impl Events {
    pub fn len(&self) -> usize {
        match self {
            Events::Sg(v) => v.len(),
            Events::Eprb(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An ordered event record produced by [`simulate`], together with
/// everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDataset {
    pub condition: ConditionRecord,
    pub model: OutcomeModel,
    pub seed: u64,
    pub events: Events,
}

impl EventDataset {
    pub fn kind(&self) -> ExperimentKind {
        self.condition.kind()
    }

    pub fn n(&self) -> u64 {
        self.events.len() as u64
    }
}

// Stream ids for the counter-based generator.
const STREAM_COMPONENT: u64 = 0;
const STREAM_OUTCOME: u64 = 1;

/// Draws `n` i.i.d. events from the model's single-event distribution at the
/// given condition. Identical `(model, condition, n, seed)` produce a
/// bit-identical dataset.
pub fn simulate(
    model: &OutcomeModel,
    condition: &ConditionRecord,
    n: u64,
    seed: u64,
) -> Result<EventDataset> {
    model.validate()?;
    model.check_kind(condition.kind())?;

    // Per-component outcome cells; a one-entry table for plain models.
    let (cum_weights, tables): (Vec<f64>, Vec<Vec<f64>>) = match model {
        OutcomeModel::Mixture { components } => {
            let mut cum = Vec::with_capacity(components.len());
            let mut tables = Vec::with_capacity(components.len());
            let mut acc = 0.0;
            for component in components {
                acc += component.weight;
                cum.push(acc);
                let e = match condition {
                    ConditionRecord::Sg { a, .. } => component
                        .model
                        .correlation(ExperimentKind::Sg, a.dot(component.m).clamp(-1.0, 1.0))?,
                    ConditionRecord::Eprb { .. } => component
                        .model
                        .correlation(ExperimentKind::Eprb, condition.costheta().clamp(-1.0, 1.0))?,
                };
                tables.push(match condition.kind() {
                    ExperimentKind::Sg => sg_cells(e).to_vec(),
                    ExperimentKind::Eprb => eprb_cells(e).to_vec(),
                });
            }
            (cum, tables)
        }
        _ => (vec![1.0], vec![model.outcome_distribution(condition)?]),
    };
    let pick_component = |i: u64| -> usize {
        if cum_weights.len() == 1 {
            return 0;
        }
        let u = rng::keyed_uniform(seed, STREAM_COMPONENT, i);
        cum_weights
            .iter()
            .position(|&c| u < c)
            .unwrap_or(cum_weights.len() - 1)
    };

    let events = match condition.kind() {
        ExperimentKind::Sg => {
            let mut xs = Vec::with_capacity(n as usize);
            for i in 0..n {
                let cells = &tables[pick_component(i)];
                let u = rng::keyed_uniform(seed, STREAM_OUTCOME, i);
                xs.push(if u < cells[0] { 1 } else { -1 });
            }
            Events::Sg(xs)
        }
        ExperimentKind::Eprb => {
            let mut pairs = Vec::with_capacity(n as usize);
            for i in 0..n {
                let cells = &tables[pick_component(i)];
                let u = rng::keyed_uniform(seed, STREAM_OUTCOME, i);
                let mut cell = 3;
                let mut acc = 0.0;
                for (idx, p) in cells.iter().take(3).enumerate() {
                    acc += p;
                    if u < acc {
                        cell = idx;
                        break;
                    }
                }
                let x = if cell < 2 { 1 } else { -1 };
                let y = if cell.is_multiple_of(2) { 1 } else { -1 };
                pairs.push((x, y));
            }
            Events::Eprb(pairs)
        }
    };

    Ok(EventDataset {
        condition: condition.clone(),
        model: model.clone(),
        seed,
        events,
    })
}

//! Run configuration: a single TOML file with one section per subcommand.
//!
//! Unknown keys anywhere in the file are hard errors — a silently ignored
//! typo in a tolerance name would corrupt conclusions downstream. The full
//! schema is documented in the repository README.

use std::path::{Path, PathBuf};

use sepsim_core::simulator::{ExperimentKind, OutcomeModel};
use sepsim_core::vec3::UnitVector;
use serde::Deserialize;

use crate::CliError;

/// Top-level config; each subcommand reads its own section.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub simulate: Option<SimulateConfig>,
    pub stats: Option<StatsConfig>,
    pub separate: Option<SeparateConfig>,
    pub fisher: Option<FisherConfig>,
    pub evidence: Option<EvidenceConfig>,
    pub test: Option<TestConfig>,
    pub demo: Option<DemoConfig>,
}

/// Named setting designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum DesignName {
    /// The six signed coordinate axes (SG).
    #[serde(rename = "sg-axes-6")]
    SgAxes6,
    /// The nine axis pairs; their marginals supply the six single-side
    /// constraints that complete the 15-parameter system (EPRB).
    #[serde(rename = "eprb-axes-9+6")]
    EprbAxes9Plus6,
    /// theta = 10..170 degrees in steps of 10, measured from +z.
    #[serde(rename = "theta-grid-17")]
    ThetaGrid17,
}

/// One explicit setting: `a` for SG, `a1`/`a2` for EPRB.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSetting {
    pub a: Option<[f64; 3]>,
    pub a1: Option<[f64; 3]>,
    pub a2: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariantName {
    QuantumSg,
    QuantumEprb,
    CosineK,
    Quadratic,
    ScaledCosine,
    Mixture,
}

/// Strict config-side model schema.
///
/// The interchange form of [`OutcomeModel`] is an internally tagged enum,
/// and serde silently drops unknown keys for those; the config contract
/// instead demands that a misspelled parameter is an error. This flat
/// schema rejects unknown keys and parameters that do not belong to the
/// chosen variant.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: ModelVariantName,
    pub k: Option<u32>,
    pub phi: Option<f64>,
    pub lambda: Option<f64>,
    pub components: Option<Vec<ComponentConfig>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub m: [f64; 3],
    pub model: ModelConfig,
}

impl ModelConfig {
    pub fn to_model(&self) -> Result<OutcomeModel, CliError> {
        let reject = |field: &str, present: bool| {
            if present {
                Err(CliError::Config(format!(
                    "{field} is not a parameter of model variant {:?}",
                    self.variant
                )))
            } else {
                Ok(())
            }
        };
        match self.variant {
            ModelVariantName::QuantumSg
            | ModelVariantName::QuantumEprb
            | ModelVariantName::Quadratic => {
                reject("k", self.k.is_some())?;
                reject("phi", self.phi.is_some())?;
                reject("lambda", self.lambda.is_some())?;
                reject("components", self.components.is_some())?;
                Ok(match self.variant {
                    ModelVariantName::QuantumSg => OutcomeModel::QuantumSg,
                    ModelVariantName::QuantumEprb => OutcomeModel::QuantumEprb,
                    _ => OutcomeModel::Quadratic,
                })
            }
            ModelVariantName::CosineK => {
                reject("lambda", self.lambda.is_some())?;
                reject("components", self.components.is_some())?;
                let k = self
                    .k
                    .ok_or_else(|| CliError::Config("cosine-k requires k".into()))?;
                Ok(OutcomeModel::CosineK {
                    k,
                    phi: self.phi.unwrap_or(0.0),
                })
            }
            ModelVariantName::ScaledCosine => {
                reject("k", self.k.is_some())?;
                reject("phi", self.phi.is_some())?;
                reject("components", self.components.is_some())?;
                let lambda = self
                    .lambda
                    .ok_or_else(|| CliError::Config("scaled-cosine requires lambda".into()))?;
                Ok(OutcomeModel::ScaledCosine { lambda })
            }
            ModelVariantName::Mixture => {
                reject("k", self.k.is_some())?;
                reject("phi", self.phi.is_some())?;
                reject("lambda", self.lambda.is_some())?;
                let components = self
                    .components
                    .as_ref()
                    .ok_or_else(|| CliError::Config("mixture requires components".into()))?;
                let components = components
                    .iter()
                    .map(|c| {
                        Ok(sepsim_core::simulator::MixtureComponent {
                            weight: c.weight,
                            m: UnitVector::new(c.m)
                                .map_err(|e| CliError::Config(format!("component m: {e}")))?,
                            model: Box::new(c.model.to_model()?),
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                Ok(OutcomeModel::Mixture { components })
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub kind: ExperimentKind,
    pub model: ModelConfig,
    /// Named design; mutually exclusive with `settings`.
    pub design: Option<DesignName>,
    /// Explicit setting list; mutually exclusive with `design`.
    pub settings: Option<Vec<ExplicitSetting>>,
    /// Events per setting.
    pub n: u64,
    /// Base seed; setting `k` uses `seed + k`.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Free-text tag for the fixed conditions.
    #[serde(default)]
    pub z: String,
    /// SG source direction (default +z).
    pub m: Option<[f64; 3]>,
    /// EPRB source directions, carried for bookkeeping only (default +z).
    pub m1: Option<[f64; 3]>,
    pub m2: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    /// Dataset CSV files, or directories scanned for `*.csv`.
    pub inputs: Vec<String>,
    /// Where to put `<stem>.stats.json` files (default: next to each CSV).
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparateConfig {
    /// Statistics records, or directories scanned for `*.stats.json`.
    pub inputs: Vec<String>,
    pub out: PathBuf,
    /// Residual threshold; omitted = automatic (scales with the median
    /// standard error of the supplied moments).
    pub sep_tol: Option<f64>,
    pub purity_tol: Option<f64>,
    pub psd_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FisherConfig {
    /// Statistics records, or directories scanned for `*.stats.json`.
    pub inputs: Vec<String>,
    pub out: PathBuf,
    /// Largest harmonic tried by the cosine-family fit (default 8).
    pub k_max: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceConfig {
    /// One dataset CSV (with sidecar).
    pub dataset: PathBuf,
    /// Angle perturbation in radians.
    pub epsilon: f64,
    /// Nominal angle; default is the dataset condition's angle.
    pub theta: Option<f64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    /// Dataset CSV files, or directories scanned for `*.csv`.
    pub inputs: Vec<String>,
    /// Default 5.
    pub threshold_sigma: Option<f64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub out_dir: PathBuf,
}

/// A parsed config together with the SHA-256 of its raw bytes (echoed into
/// every report so outputs are traceable to the exact run configuration).
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let raw = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&raw)
        .map_err(|e| CliError::Config(format!("{} is not UTF-8: {e}", path.display())))?;
    let config: RunConfig =
        toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(LoadedConfig {
        config,
        hash: sha256_hex(&raw),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut acc, b| {
            use std::fmt::Write;
            write!(acc, "{b:02x}").expect("infallible");
            acc
        })
}

fn direction(v: Option<[f64; 3]>, name: &str) -> Result<UnitVector, CliError> {
    let v = v.unwrap_or([0.0, 0.0, 1.0]);
    UnitVector::new(v).map_err(|e| CliError::Config(format!("{name}: {e}")))
}

impl SimulateConfig {
    /// Expands the design or explicit settings into condition records.
    pub fn conditions(&self) -> Result<Vec<sepsim_core::simulator::ConditionRecord>, CliError> {
        use sepsim_core::simulator::ConditionRecord;
        let m = direction(self.m, "m")?;
        let m1 = direction(self.m1, "m1")?;
        let m2 = direction(self.m2, "m2")?;
        let z = self.z.clone();

        let sg = |a: UnitVector| ConditionRecord::Sg { a, m, z: z.clone() };
        let eprb = |a1: UnitVector, a2: UnitVector| ConditionRecord::Eprb {
            a1,
            a2,
            m1,
            m2,
            z: z.clone(),
        };

        match (&self.design, &self.settings) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "specify either design or settings, not both".into(),
            )),
            (None, None) => Err(CliError::Config(
                "one of design or settings is required".into(),
            )),
            (Some(design), None) => match (design, self.kind) {
                (DesignName::SgAxes6, ExperimentKind::Sg) => {
                    Ok(UnitVector::signed_axes().into_iter().map(sg).collect())
                }
                (DesignName::EprbAxes9Plus6, ExperimentKind::Eprb) => {
                    Ok(sepsim_core::separation::eprb_axis_pairs()
                        .into_iter()
                        .map(|(a1, a2)| eprb(a1, a2))
                        .collect())
                }
                (DesignName::ThetaGrid17, kind) => Ok((1..=17)
                    .map(|i| {
                        let theta = (10 * i) as f64 * std::f64::consts::PI / 180.0;
                        match kind {
                            ExperimentKind::Sg => sg(UnitVector::polar(theta)),
                            ExperimentKind::Eprb => eprb(UnitVector::Z, UnitVector::polar(theta)),
                        }
                    })
                    .collect()),
                (design, kind) => Err(CliError::Config(format!(
                    "design {design:?} does not apply to kind {kind}"
                ))),
            },
            (None, Some(settings)) => {
                if settings.is_empty() {
                    return Err(CliError::Config("settings list is empty".into()));
                }
                settings
                    .iter()
                    .map(|s| match self.kind {
                        ExperimentKind::Sg => match (s.a, s.a1, s.a2) {
                            (Some(a), None, None) => Ok(sg(direction(Some(a), "a")?)),
                            _ => Err(CliError::Config(
                                "SG settings take exactly the field a".into(),
                            )),
                        },
                        ExperimentKind::Eprb => match (s.a, s.a1, s.a2) {
                            (None, Some(a1), Some(a2)) => {
                                Ok(eprb(direction(Some(a1), "a1")?, direction(Some(a2), "a2")?))
                            }
                            _ => Err(CliError::Config(
                                "EPRB settings take exactly the fields a1 and a2".into(),
                            )),
                        },
                    })
                    .collect()
            }
        }
    }
}

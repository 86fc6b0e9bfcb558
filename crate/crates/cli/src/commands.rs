//! Subcommand implementations.
//!
//! Every report is wrapped in an [`Envelope`] carrying the toolkit version,
//! the SHA-256 of the config that produced it, the seeds involved, and the
//! input files — enough to reproduce the output exactly.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use sepsim_core::dataset_io::{self, read_dataset, write_dataset};
use sepsim_core::inference::{self, ThetaProfile};
use sepsim_core::separation::{self, SeparationReport, SeparationTolerances, SettingRecord};
use sepsim_core::simulator::{
    simulate as run_simulation, ConditionRecord, EventDataset, ExperimentKind, MixtureComponent,
    OutcomeModel,
};
use sepsim_core::stats::{summarize, StatisticsRecord};
use sepsim_core::vec3::UnitVector;

use crate::config::{sha256_hex, LoadedConfig, SimulateConfig};
use crate::CliError;

const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Report wrapper: provenance first, payload second.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub toolkit_version: String,
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<String>,
    pub payload: T,
}

fn envelope<T>(
    command: &str,
    config_hash: &str,
    seeds: Vec<u64>,
    inputs: Vec<String>,
    payload: T,
) -> Envelope<T> {
    Envelope {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        command: command.to_string(),
        config_hash: config_hash.to_string(),
        seeds,
        inputs,
        payload,
    }
}

fn write_report<T: Serialize>(path: &Path, report: &Envelope<T>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    dataset_io::write_json(path, report).map_err(CliError::from)
}

fn read_report<T: DeserializeOwned>(path: &Path) -> Result<Envelope<T>, CliError> {
    dataset_io::read_json(path).map_err(CliError::from)
}

/// Expands inputs (files or directories) into a sorted file list.
fn collect_files(inputs: &[String], suffix: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for input in inputs {
        let path = PathBuf::from(input);
        if path.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(&path)?
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .map(|e| e.path())
                .filter(|p| p.to_string_lossy().ends_with(suffix))
                .collect();
            found.sort();
            files.extend(found);
        } else if path.exists() {
            files.push(path);
        } else {
            return Err(CliError::Config(format!("input {input} does not exist")));
        }
    }
    if files.is_empty() {
        return Err(CliError::Config(format!(
            "no *{suffix} files found under the configured inputs"
        )));
    }
    Ok(files)
}

fn section<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("config has no [{name}] section")))
}

fn dataset_paths(out_dir: &Path, count: usize) -> Vec<PathBuf> {
    (0..count)
        .map(|i| out_dir.join(format!("setting_{i:02}.csv")))
        .collect()
}

/// Manifest written by `simulate` next to the datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateManifest {
    pub kind: ExperimentKind,
    pub model: OutcomeModel,
    pub n: u64,
    pub files: Vec<String>,
}

fn run_simulate_section(cfg: &SimulateConfig, config_hash: &str) -> Result<Vec<PathBuf>, CliError> {
    let conditions = cfg.conditions()?;
    let model = cfg.model.to_model()?;
    model.check_kind(cfg.kind).map_err(CliError::from)?;
    let paths = dataset_paths(&cfg.out_dir, conditions.len());
    for (i, (condition, path)) in conditions.iter().zip(&paths).enumerate() {
        // Per-setting seeds are derived as seed + index.
        let dataset = run_simulation(&model, condition, cfg.n, cfg.seed + i as u64)?;
        write_dataset(&dataset, path)?;
    }
    let manifest = envelope(
        "simulate",
        config_hash,
        vec![cfg.seed],
        vec![],
        SimulateManifest {
            kind: cfg.kind,
            model,
            n: cfg.n,
            files: paths.iter().map(|p| p.display().to_string()).collect(),
        },
    );
    write_report(&cfg.out_dir.join("manifest.json"), &manifest)?;
    Ok(paths)
}

pub fn simulate(loaded: &LoadedConfig) -> Result<(), CliError> {
    let cfg = section(&loaded.config.simulate, "simulate")?;
    let paths = run_simulate_section(cfg, &loaded.hash)?;
    println!(
        "wrote {} dataset pairs under {}",
        paths.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn stats_output_path(csv: &Path, out_dir: &Option<PathBuf>) -> PathBuf {
    let stem = csv.file_stem().unwrap_or_default().to_string_lossy();
    let dir = out_dir
        .clone()
        .unwrap_or_else(|| csv.parent().unwrap_or(Path::new(".")).to_path_buf());
    dir.join(format!("{stem}.stats.json"))
}

fn summarize_file(csv: &Path) -> Result<(EventDataset, StatisticsRecord), CliError> {
    let dataset = read_dataset(csv)?;
    let summary = summarize(&dataset)?;
    let record = StatisticsRecord::new(dataset.condition.clone(), summary)?;
    Ok((dataset, record))
}

pub fn stats(loaded: &LoadedConfig) -> Result<(), CliError> {
    let cfg = section(&loaded.config.stats, "stats")?;
    let files = collect_files(&cfg.inputs, ".csv")?;
    for csv in &files {
        let (dataset, record) = summarize_file(csv)?;
        let out = stats_output_path(csv, &cfg.out_dir);
        let report = envelope(
            "stats",
            &loaded.hash,
            vec![dataset.seed],
            vec![csv.display().to_string()],
            record,
        );
        write_report(&out, &report)?;
    }
    println!("wrote {} statistics records", files.len());
    Ok(())
}

struct LoadedStatistics {
    records: Vec<StatisticsRecord>,
    seeds: Vec<u64>,
    inputs: Vec<String>,
}

fn read_statistics(inputs: &[String]) -> Result<LoadedStatistics, CliError> {
    let files = collect_files(inputs, ".stats.json")?;
    let mut loaded = LoadedStatistics {
        records: Vec::with_capacity(files.len()),
        seeds: Vec::new(),
        inputs: Vec::with_capacity(files.len()),
    };
    for file in &files {
        let report: Envelope<StatisticsRecord> = read_report(file)?;
        loaded.seeds.extend(report.seeds);
        loaded.records.push(report.payload);
        loaded.inputs.push(file.display().to_string());
    }
    Ok(loaded)
}

fn run_separation(
    records: &[StatisticsRecord],
    tolerances: &SeparationTolerances,
) -> Result<SeparationReport, CliError> {
    let settings: Vec<SettingRecord> = records
        .iter()
        .map(SettingRecord::from_statistics)
        .collect::<Result<_, _>>()?;
    let kind = settings
        .first()
        .ok_or_else(|| CliError::Config("no statistics records".into()))?
        .kind();
    let result = match kind {
        ExperimentKind::Sg => separation::separate_sg(&settings, tolerances)?,
        ExperimentKind::Eprb => separation::separate_eprb(&settings, tolerances)?,
    };
    Ok(result.report())
}

pub fn separate(loaded: &LoadedConfig) -> Result<(), CliError> {
    let cfg = section(&loaded.config.separate, "separate")?;
    let loaded_stats = read_statistics(&cfg.inputs)?;
    let defaults = SeparationTolerances::default();
    let tolerances = SeparationTolerances {
        sep_tol: cfg.sep_tol.or(defaults.sep_tol),
        purity_tol: cfg.purity_tol.unwrap_or(defaults.purity_tol),
        psd_tol: cfg.psd_tol.unwrap_or(defaults.psd_tol),
    };
    let report = run_separation(&loaded_stats.records, &tolerances)?;
    println!(
        "separation verdict: {} (residual rms {:.6}, purity {:.6})",
        serde_json::to_string(&report.verdict).unwrap_or_default(),
        report.residual_rms,
        report.purity
    );
    write_report(
        &cfg.out,
        &envelope(
            "separate",
            &loaded.hash,
            loaded_stats.seeds,
            loaded_stats.inputs,
            report,
        ),
    )
}

pub fn fisher(loaded: &LoadedConfig) -> Result<(), CliError> {
    let cfg = section(&loaded.config.fisher, "fisher")?;
    let loaded_stats = read_statistics(&cfg.inputs)?;
    let profile = ThetaProfile::from_statistics(&loaded_stats.records)?;
    let report = inference::fisher_report(&profile, cfg.k_max.unwrap_or(8))?;
    println!(
        "cosine-family fit: K = {}, phi = {:.3}, rms = {:.6e}",
        report.fit.k, report.fit.phi, report.fit.rms_error
    );
    #[derive(Serialize, Deserialize)]
    struct FisherPayload {
        profile: ThetaProfile,
        analysis: inference::FisherReport,
    }
    write_report(
        &cfg.out,
        &envelope(
            "fisher",
            &loaded.hash,
            loaded_stats.seeds,
            loaded_stats.inputs,
            FisherPayload {
                profile,
                analysis: report,
            },
        ),
    )
}

pub fn evidence(loaded: &LoadedConfig) -> Result<(), CliError> {
    let cfg = section(&loaded.config.evidence, "evidence")?;
    let dataset = read_dataset(&cfg.dataset)?;
    let counts = summarize(&dataset)?;
    let theta = cfg.theta.unwrap_or_else(|| dataset.condition.theta());
    let report = inference::evidence(&counts, theta, cfg.epsilon, &dataset.model)?;
    println!(
        "evidence Ev = {:.6} (predicted replicate mean {:.6})",
        report.ev, report.predicted_mean_ev
    );
    write_report(
        &cfg.out,
        &envelope(
            "evidence",
            &loaded.hash,
            vec![dataset.seed],
            vec![cfg.dataset.display().to_string()],
            report,
        ),
    )
}

pub fn compliance(loaded: &LoadedConfig) -> Result<(), CliError> {
    let cfg = section(&loaded.config.test, "test")?;
    let files = collect_files(&cfg.inputs, ".csv")?;
    let mut datasets = Vec::with_capacity(files.len());
    for file in &files {
        datasets.push(read_dataset(file)?);
    }
    let report = inference::compliance_test(&datasets, cfg.threshold_sigma.unwrap_or(5.0))?;
    println!(
        "compliance: {} (max |z| = {:.3})",
        if report.pass { "pass" } else { "fail" },
        report.max_abs_z
    );
    write_report(
        &cfg.out,
        &envelope(
            "test",
            &loaded.hash,
            datasets.iter().map(|d| d.seed).collect(),
            files.iter().map(|f| f.display().to_string()).collect(),
            report,
        ),
    )
}

// ---------------------------------------------------------------------------
// demo

/// Fixed parameters of the demo bundle; hashed in place of a config file.
const DEMO_PARAMS: &str = "sepsim demo v1: sg-pure seed 11, sg-mixed seed 12, \
                         eprb-singlet seed 21, quadratic seed 31, curves seed 41, n 200000/100000";

struct Narrative {
    name: &'static str,
    verdict: &'static str,
    purity: f64,
    residual_rms: f64,
}

fn demo_simulate(
    bundle: &Path,
    sub: &str,
    hash: &str,
    model: &OutcomeModel,
    conditions: &[ConditionRecord],
    n: u64,
    seed: u64,
) -> Result<Vec<StatisticsRecord>, CliError> {
    let dir = bundle.join(sub);
    let kind = conditions.first().map_or(ExperimentKind::Sg, |c| c.kind());
    let paths = dataset_paths(&dir, conditions.len());
    // Embedded references are relative to the bundle root, so a bundle is
    // byte-identical wherever it is written.
    let rel = |i: usize| format!("{sub}/setting_{i:02}.csv");
    let mut records = Vec::with_capacity(conditions.len());
    for (i, (condition, path)) in conditions.iter().zip(&paths).enumerate() {
        let dataset = run_simulation(model, condition, n, seed + i as u64)?;
        write_dataset(&dataset, path)?;
        let (_, record) = summarize_file(path)?;
        let report = envelope(
            "stats",
            hash,
            vec![dataset.seed],
            vec![rel(i)],
            record.clone(),
        );
        write_report(&stats_output_path(path, &None), &report)?;
        records.push(record);
    }
    let manifest = envelope(
        "simulate",
        hash,
        vec![seed],
        vec![],
        SimulateManifest {
            kind,
            model: model.clone(),
            n,
            files: (0..paths.len()).map(rel).collect(),
        },
    );
    write_report(&dir.join("manifest.json"), &manifest)?;
    Ok(records)
}

fn demo_separate(
    dir: &Path,
    hash: &str,
    records: &[StatisticsRecord],
) -> Result<SeparationReport, CliError> {
    let report = run_separation(records, &SeparationTolerances::default())?;
    write_report(
        &dir.join("separation.json"),
        &envelope("separate", hash, vec![], vec![], report.clone()),
    )?;
    Ok(report)
}

fn verdict_label(verdict: separation::Verdict) -> &'static str {
    match verdict {
        separation::Verdict::SeparablePure => "separable-pure",
        separation::Verdict::SeparableMixed => "separable-mixed",
        separation::Verdict::NotSeparable => "not-separable",
        separation::Verdict::IndeterminateRank => "indeterminate-rank",
    }
}

/// Runs the three canonical narratives with fixed seeds and writes a
/// human-readable summary plus plot-ready correlation curves:
///
/// 1. an SG source along +z (pure) and a 3:1 ensemble of +z/-z sources
///    (mixed) — both separable, with purities 1 and 0.625;
/// 2. pair data reconstructing the singlet state;
/// 3. quadratic single-spin data that no source description fits.
pub fn demo(out_dir: &Path) -> Result<(), CliError> {
    let hash = sha256_hex(DEMO_PARAMS.as_bytes());
    std::fs::create_dir_all(out_dir)?;
    let mut narratives = Vec::new();

    let sg_conditions: Vec<ConditionRecord> = UnitVector::signed_axes()
        .into_iter()
        .map(|a| ConditionRecord::Sg {
            a,
            m: UnitVector::Z,
            z: "demo".into(),
        })
        .collect();

    // 1a. Pure SG source along +z.
    let records = demo_simulate(
        out_dir,
        "sg-pure",
        &hash,
        &OutcomeModel::QuantumSg,
        &sg_conditions,
        200_000,
        11,
    )?;
    let report = demo_separate(&out_dir.join("sg-pure"), &hash, &records)?;
    narratives.push(Narrative {
        name: "sg-pure",
        verdict: verdict_label(report.verdict),
        purity: report.purity,
        residual_rms: report.residual_rms,
    });

    // 1b. Mixed SG ensemble: 3:1 weights on +z / -z, mean polarization 0.5.
    let mixture = OutcomeModel::Mixture {
        components: vec![
            MixtureComponent {
                weight: 0.75,
                m: UnitVector::Z,
                model: Box::new(OutcomeModel::QuantumSg),
            },
            MixtureComponent {
                weight: 0.25,
                m: -UnitVector::Z,
                model: Box::new(OutcomeModel::QuantumSg),
            },
        ],
    };
    let records = demo_simulate(
        out_dir,
        "sg-mixed",
        &hash,
        &mixture,
        &sg_conditions,
        200_000,
        12,
    )?;
    let report = demo_separate(&out_dir.join("sg-mixed"), &hash, &records)?;
    narratives.push(Narrative {
        name: "sg-mixed",
        verdict: verdict_label(report.verdict),
        purity: report.purity,
        residual_rms: report.residual_rms,
    });

    // 2. Singlet reconstruction from the nine axis pairs.
    let eprb_conditions: Vec<ConditionRecord> = separation::eprb_axis_pairs()
        .into_iter()
        .map(|(a1, a2)| ConditionRecord::Eprb {
            a1,
            a2,
            m1: UnitVector::Z,
            m2: UnitVector::Z,
            z: "demo".into(),
        })
        .collect();
    let records = demo_simulate(
        out_dir,
        "eprb-singlet",
        &hash,
        &OutcomeModel::QuantumEprb,
        &eprb_conditions,
        200_000,
        21,
    )?;
    let report = demo_separate(&out_dir.join("eprb-singlet"), &hash, &records)?;
    narratives.push(Narrative {
        name: "eprb-singlet",
        verdict: verdict_label(report.verdict),
        purity: report.purity,
        residual_rms: report.residual_rms,
    });

    // 3. Quadratic data: the separation fails by residual floor.
    let records = demo_simulate(
        out_dir,
        "quadratic",
        &hash,
        &OutcomeModel::Quadratic,
        &sg_conditions,
        100_000,
        31,
    )?;
    let report = demo_separate(&out_dir.join("quadratic"), &hash, &records)?;
    narratives.push(Narrative {
        name: "quadratic",
        verdict: verdict_label(report.verdict),
        purity: report.purity,
        residual_rms: report.residual_rms,
    });

    // Plot-ready correlation curves: exact model laws on a fine grid plus
    // an empirical pair-correlation run on the 17-point grid.
    let curves_path = out_dir.join("e_theta_curves.csv");
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&curves_path)?);
    writeln!(csv, "series,theta_deg,e")?;
    for deg in 0..=180u32 {
        let theta = f64::from(deg) * std::f64::consts::PI / 180.0;
        let costheta = theta.cos().clamp(-1.0, 1.0);
        let rows = [
            (
                "quantum-sg",
                OutcomeModel::QuantumSg.correlation(ExperimentKind::Sg, costheta)?,
            ),
            (
                "quantum-eprb",
                OutcomeModel::QuantumEprb.correlation(ExperimentKind::Eprb, costheta)?,
            ),
            (
                "quadratic",
                OutcomeModel::Quadratic.correlation(ExperimentKind::Sg, costheta)?,
            ),
            (
                "scaled-cosine-0.9",
                OutcomeModel::ScaledCosine { lambda: 0.9 }
                    .correlation(ExperimentKind::Eprb, costheta)?,
            ),
        ];
        for (series, e) in rows {
            writeln!(csv, "{series},{deg},{e:.6}")?;
        }
    }
    let grid_conditions: Vec<ConditionRecord> = (1..=17)
        .map(|i| {
            let theta = (10 * i) as f64 * std::f64::consts::PI / 180.0;
            ConditionRecord::Eprb {
                a1: UnitVector::Z,
                a2: UnitVector::polar(theta),
                m1: UnitVector::Z,
                m2: UnitVector::Z,
                z: "demo".into(),
            }
        })
        .collect();
    for (i, condition) in grid_conditions.iter().enumerate() {
        let dataset = run_simulation(
            &OutcomeModel::QuantumEprb,
            condition,
            100_000,
            41 + i as u64,
        )?;
        let corr = summarize(&dataset)?.corr_xy().expect("pair data");
        writeln!(csv, "eprb-empirical,{},{corr:.6}", (10 * (i + 1)) as u32)?;
    }
    csv.flush()?;

    // Human-readable summary.
    let mut text = String::new();
    text.push_str("sepsim demo bundle\n");
    text.push_str(&format!(
        "toolkit {TOOLKIT_VERSION}, config hash {hash}\n\n"
    ));
    for n in &narratives {
        text.push_str(&format!(
            "{:<14} verdict {:<18} purity {:.4}  residual rms {:.4}\n",
            n.name, n.verdict, n.purity, n.residual_rms
        ));
    }
    text.push_str(
        "\nThe pure and singlet runs admit a source description (a projection);\n\
         the mixed run admits one with purity 5/8; the quadratic run admits none:\n\
         its residual floor ~0.47 cannot be removed by any choice of source.\n",
    );
    text.push_str("\ncorrelation curves: e_theta_curves.csv\n");
    std::fs::write(out_dir.join("summary.txt"), text)?;

    println!(
        "demo bundle written to {} ({} narratives)",
        out_dir.display(),
        narratives.len()
    );
    Ok(())
}

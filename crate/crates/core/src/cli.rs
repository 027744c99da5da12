//! Configuration loading, experiment execution, and bit-stable structured
//! output.
//!
//! Configs are flat `key=value` text with `#` comments and a strict
//! schema: unknown keys are errors, and missing required keys are reported
//! together. A `preset` key seeds every value for the two shipped
//! experiment families; explicit keys then override the preset, and CLI
//! flags override both. The manifest written next to every run is itself a
//! loadable config (metadata lives in comment lines), so re-running from a
//! manifest reproduces the outputs byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::agents::{ByzantineAttack, YInit};
use crate::audit::{audit_trajectory, AuditReport, SLACK_TOLERANCE};
use crate::error::{Error, Result};
use crate::objectives::{DataMode, DataModel, ObjectiveKind};
use crate::point::Point;
use crate::ratefit::RateFit;
use crate::schedule::{Regime, RegimeReport, ScheduleParams};
use crate::simulator::{run_experiment, ExperimentOutput, SimulationConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit statuses for the front end.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const DIVERGENCE: i32 = 2;
    pub const IO: i32 = 3;
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io(_) => exit_code::IO,
        Error::Divergence { .. } | Error::DivergenceReport { .. } => exit_code::DIVERGENCE,
        Error::ReplicationFailed { source, .. } => exit_code_for(source),
        _ => exit_code::VALIDATION,
    }
}

const REQUIRED_KEYS: &[&str] = &[
    "n_agents",
    "n_byzantine",
    "dim",
    "t_local",
    "n_rounds",
    "replications",
    "master_seed",
    "objective",
    "data_mode",
    "noise_std",
    "c_alpha",
    "c_beta",
    "h",
    "regime",
];

const OPTIONAL_KEYS: &[&str] = &[
    "preset",
    "samples_per_agent",
    "attack",
    "attack_factor",
    "attack_scale",
    "truth",
    "y_init",
    "audit",
];

/// Flag overrides; flags win over file keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<Regime>,
    pub f: Option<usize>,
    pub rounds: Option<u64>,
    pub replications: Option<usize>,
    pub audit: bool,
}

fn preset_pairs(name: &str) -> Result<Vec<(&'static str, String)>> {
    let common = |objective: &str, regime: &str| {
        vec![
            ("n_agents", "50".to_string()),
            ("n_byzantine", "8".to_string()),
            ("dim", "10".to_string()),
            ("t_local", "3".to_string()),
            ("n_rounds", "10000".to_string()),
            ("replications", "10".to_string()),
            ("master_seed", "1".to_string()),
            ("objective", objective.to_string()),
            ("data_mode", "finite".to_string()),
            ("samples_per_agent", "100".to_string()),
            ("noise_std", "1".to_string()),
            ("attack", "shifted_mean".to_string()),
            ("attack_factor", "2".to_string()),
            ("c_alpha", "5".to_string()),
            ("c_beta", "0.8".to_string()),
            ("h", "4".to_string()),
            ("regime", regime.to_string()),
        ]
    };
    match name {
        "sc-fig1" => Ok(common("quadratic", "sc")),
        "pl-fig2" => Ok(common("sine", "pl")),
        other => Err(Error::config(format!(
            "unknown preset '{other}' (available: sc-fig1, pl-fig2)"
        ))),
    }
}

fn is_known_key(key: &str) -> bool {
    REQUIRED_KEYS.contains(&key) || OPTIONAL_KEYS.contains(&key)
}

/// Parse the key=value text into a map, rejecting unknown and duplicate
/// keys with their line numbers.
fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected key=value, got '{line}'"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !is_known_key(&key) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("unknown key '{key}'"),
            });
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("duplicate key '{key}'"),
            });
        }
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = map
        .get(key)
        .ok_or_else(|| Error::config(format!("missing required key '{key}'")))?;
    raw.parse::<T>()
        .map_err(|_| Error::config(format!("invalid value for '{key}': '{raw}'")))
}

fn parse_optional<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| Error::config(format!("invalid value for '{key}': '{raw}'"))),
    }
}

fn build_config(map: &BTreeMap<String, String>) -> Result<SimulationConfig> {
    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| !map.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(Error::config(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }

    let n_agents: usize = parse_value(map, "n_agents")?;
    let n_byzantine: usize = parse_value(map, "n_byzantine")?;
    let dim: usize = parse_value(map, "dim")?;
    let t_local: usize = parse_value(map, "t_local")?;
    let n_rounds: u64 = parse_value(map, "n_rounds")?;
    let replications: usize = parse_value(map, "replications")?;
    let master_seed: u64 = parse_value(map, "master_seed")?;
    let noise_std: f64 = parse_value(map, "noise_std")?;
    let c_alpha: f64 = parse_value(map, "c_alpha")?;
    let c_beta: f64 = parse_value(map, "c_beta")?;
    let h: f64 = parse_value(map, "h")?;

    let objective = match map.get("objective").map(String::as_str) {
        Some("quadratic") => ObjectiveKind::ScQuadratic,
        Some("sine") => ObjectiveKind::PlSine,
        Some(other) => {
            return Err(Error::config(format!(
                "invalid objective '{other}' (quadratic or sine)"
            )))
        }
        None => unreachable!("checked above"),
    };
    let regime = match map.get("regime").map(String::as_str) {
        Some("sc") => Regime::Sc,
        Some("pl") => Regime::Pl,
        Some(other) => return Err(Error::config(format!("invalid regime '{other}' (sc or pl)"))),
        None => unreachable!("checked above"),
    };
    let mode = match map.get("data_mode").map(String::as_str) {
        Some("finite") => {
            let samples_per_agent: usize = parse_value(map, "samples_per_agent")?;
            DataMode::FiniteSample { samples_per_agent }
        }
        // samples_per_agent is read only in finite mode; a population
        // override on top of a finite preset leaves it unused.
        Some("population") => DataMode::Population,
        Some(other) => {
            return Err(Error::config(format!(
                "invalid data_mode '{other}' (finite or population)"
            )))
        }
        None => unreachable!("checked above"),
    };
    let attack = match map.get("attack").map(String::as_str).unwrap_or("shifted_mean") {
        "shifted_mean" => ByzantineAttack::ShiftedMean {
            factor: parse_optional(map, "attack_factor", 2.0)?,
        },
        "sign_flip" => ByzantineAttack::SignFlip,
        "large_noise" => ByzantineAttack::LargeNoise {
            scale: parse_optional(map, "attack_scale", 1.0)?,
        },
        other => {
            return Err(Error::config(format!(
                "invalid attack '{other}' (shifted_mean, sign_flip, or large_noise)"
            )))
        }
    };
    let y_init = match map.get("y_init").map(String::as_str).unwrap_or("zero") {
        "zero" => YInit::Zero,
        "first_sample" => YInit::FirstSample,
        other => {
            return Err(Error::config(format!(
                "invalid y_init '{other}' (zero or first_sample)"
            )))
        }
    };
    let audit: bool = parse_optional(map, "audit", false)?;
    let truth = match map.get("truth") {
        None => Point::from_vec(vec![1.0; dim]),
        Some(raw) => {
            let values: Vec<f64> = raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(format!("invalid truth component '{s}'")))
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(Error::config(format!(
                    "truth has {} components but dim={dim}",
                    values.len()
                )));
            }
            Point::from_vec(values)
        }
    };

    let config = SimulationConfig {
        n_agents,
        n_byzantine,
        dim,
        t_local,
        n_rounds,
        replications,
        master_seed,
        objective,
        data: DataModel {
            mode,
            truth,
            noise_std,
        },
        attack,
        schedule: ScheduleParams::new(c_alpha, c_beta, h)?,
        regime,
        audit,
        y_init,
    };
    config.validate()?;
    Ok(config)
}

/// Load a config file, expand its preset if any, and validate. The same
/// parser accepts run manifests since their metadata is comment lines.
pub fn load_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path)?;
    load_config_str(&text)
}

pub fn load_config_str(text: &str) -> Result<SimulationConfig> {
    let file_map = parse_key_values(text)?;
    let mut merged = BTreeMap::new();
    if let Some(preset) = file_map.get("preset") {
        for (k, v) in preset_pairs(preset)? {
            merged.insert(k.to_string(), v);
        }
    }
    for (k, v) in &file_map {
        if k != "preset" {
            merged.insert(k.clone(), v.clone());
        }
    }
    build_config(&merged)
}

/// Apply flag overrides on top of a loaded config and re-validate.
pub fn apply_overrides(mut config: SimulationConfig, ov: &Overrides) -> Result<SimulationConfig> {
    if let Some(seed) = ov.seed {
        config.master_seed = seed;
    }
    if let Some(mode) = ov.mode {
        config.regime = mode;
    }
    if let Some(f) = ov.f {
        config.n_byzantine = f;
    }
    if let Some(rounds) = ov.rounds {
        config.n_rounds = rounds;
    }
    if let Some(reps) = ov.replications {
        config.replications = reps;
    }
    if ov.audit {
        config.audit = true;
    }
    config.validate()?;
    Ok(config)
}

/// Resolved run description serialized alongside every output.
pub struct RunManifest {
    pub config: SimulationConfig,
    pub version: String,
    pub reports: Vec<RegimeReport>,
    pub outputs: Vec<PathBuf>,
    pub rate_fit: Option<RateFit>,
    pub bound_dominates: bool,
}

/// Shortest round-trip decimal for a float.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn config_key_values(config: &SimulationConfig) -> Vec<(String, String)> {
    let mut pairs: Vec<(String, String)> = vec![
        ("n_agents".into(), config.n_agents.to_string()),
        ("n_byzantine".into(), config.n_byzantine.to_string()),
        ("dim".into(), config.dim.to_string()),
        ("t_local".into(), config.t_local.to_string()),
        ("n_rounds".into(), config.n_rounds.to_string()),
        ("replications".into(), config.replications.to_string()),
        ("master_seed".into(), config.master_seed.to_string()),
        (
            "objective".into(),
            match config.objective {
                ObjectiveKind::ScQuadratic => "quadratic".into(),
                ObjectiveKind::PlSine => "sine".into(),
            },
        ),
        (
            "data_mode".into(),
            match config.data.mode {
                DataMode::FiniteSample { .. } => "finite".into(),
                DataMode::Population => "population".into(),
            },
        ),
        ("noise_std".into(), fmt_f64(config.data.noise_std)),
        ("c_alpha".into(), fmt_f64(config.schedule.c_alpha)),
        ("c_beta".into(), fmt_f64(config.schedule.c_beta)),
        ("h".into(), fmt_f64(config.schedule.h)),
        ("regime".into(), config.regime.to_string()),
        (
            "truth".into(),
            config
                .data
                .truth
                .as_slice()
                .iter()
                .map(|v| fmt_f64(*v))
                .collect::<Vec<_>>()
                .join(","),
        ),
        (
            "y_init".into(),
            match config.y_init {
                YInit::Zero => "zero".into(),
                YInit::FirstSample => "first_sample".into(),
            },
        ),
        ("audit".into(), config.audit.to_string()),
    ];
    if let DataMode::FiniteSample { samples_per_agent } = config.data.mode {
        pairs.push(("samples_per_agent".into(), samples_per_agent.to_string()));
    }
    match config.attack {
        ByzantineAttack::ShiftedMean { factor } => {
            pairs.push(("attack".into(), "shifted_mean".into()));
            pairs.push(("attack_factor".into(), fmt_f64(factor)));
        }
        ByzantineAttack::SignFlip => pairs.push(("attack".into(), "sign_flip".into())),
        ByzantineAttack::LargeNoise { scale } => {
            pairs.push(("attack".into(), "large_noise".into()));
            pairs.push(("attack_scale".into(), fmt_f64(scale)));
        }
    }
    pairs.sort();
    pairs
}

fn render_manifest(manifest: &RunManifest) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# relsgd run manifest (re-runnable as a config)");
    let _ = writeln!(out, "# version: {}", manifest.version);
    for report in &manifest.reports {
        let label = match report.kind {
            crate::schedule::ReportKind::Basic => "basic".to_string(),
            crate::schedule::ReportKind::Theorem(r) => format!("theorem[{r}]"),
            crate::schedule::ReportKind::FilterCondition => "filter-condition".to_string(),
        };
        let _ = writeln!(
            out,
            "# validator {label}: {}",
            if report.satisfied { "satisfied" } else { "violated" }
        );
        for check in &report.checks {
            let _ = writeln!(
                out,
                "#   {} [lhs={} rhs={} {}]",
                check.name,
                fmt_f64(check.lhs),
                fmt_f64(check.rhs),
                if check.satisfied { "ok" } else { "VIOLATED" }
            );
        }
    }
    match &manifest.rate_fit {
        Some(fit) => {
            let _ = writeln!(
                out,
                "# rate-fit: slope={} intercept={} window=[{},{}] points={}",
                fmt_f64(fit.slope),
                fmt_f64(fit.intercept),
                fit.window.0,
                fit.window.1,
                fit.points
            );
        }
        None => {
            let _ = writeln!(out, "# rate-fit: none (needs >= 200 rounds)");
        }
    }
    let _ = writeln!(
        out,
        "# bound-dominates: {}",
        manifest.bound_dominates
    );
    for path in &manifest.outputs {
        let _ = writeln!(out, "# output: {}", path.display());
    }
    for (k, v) in config_key_values(&manifest.config) {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}

/// Frozen CSV header.
pub const CSV_HEADER: &str = "k,alpha,beta,opt_error_mean,opt_error_std,W_mean,W_std,V_mean,V_std,bound,contraction,byz_survivors_mean";

pub fn render_csv(output: &ExperimentOutput) -> String {
    let mut s = String::with_capacity(64 * output.summary.rows.len() + 128);
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in &output.summary.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt_f64(r.alpha),
            fmt_f64(r.beta),
            fmt_f64(r.opt_error_mean),
            fmt_f64(r.opt_error_std),
            fmt_f64(r.w_mean),
            fmt_f64(r.w_std),
            fmt_f64(r.v_mean),
            fmt_f64(r.v_std),
            fmt_f64(r.bound),
            fmt_f64(r.contraction_mean),
            fmt_f64(r.byz_survivors_mean),
        );
    }
    s
}

fn render_rate_fit(fit: &Option<RateFit>) -> String {
    match fit {
        Some(f) => format!(
            "slope={}\nintercept={}\nwindow_start={}\nwindow_end={}\npoints={}\n",
            fmt_f64(f.slope),
            fmt_f64(f.intercept),
            f.window.0,
            f.window.1,
            f.points
        ),
        None => "# no fit: fewer than 200 rounds\n".to_string(),
    }
}

fn render_audit_csv(reports: &[AuditReport]) -> String {
    let mut s = String::from("replication,check,k,agent,step,lhs,rhs,slack\n");
    for (rep, report) in reports.iter().enumerate() {
        for e in &report.entries {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                rep,
                e.check.name(),
                e.k,
                e.agent.map_or(String::new(), |a| a.to_string()),
                e.step.map_or(String::new(), |t| t.to_string()),
                fmt_f64(e.lhs),
                fmt_f64(e.rhs),
                fmt_f64(e.slack()),
            );
        }
    }
    s
}

pub struct RunArtifacts {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub rate_fit_path: PathBuf,
    pub audit_path: Option<PathBuf>,
    pub output: ExperimentOutput,
}

fn file_tag(config: &SimulationConfig) -> String {
    format!("{}_f{}", config.regime, config.n_byzantine)
}

/// Execute a run and write the CSV table, the manifest, and the rate-fit
/// summary (plus audit slack tables when auditing is enabled).
pub fn run(config: &SimulationConfig, out_dir: &Path, strict: bool) -> Result<RunArtifacts> {
    config.validate()?;
    let reports = config.regime_reports()?;
    if strict {
        let theorem_ok = reports.iter().all(|r| match r.kind {
            crate::schedule::ReportKind::Theorem(regime) => {
                regime != config.regime || r.satisfied
            }
            crate::schedule::ReportKind::FilterCondition => r.satisfied,
            crate::schedule::ReportKind::Basic => r.satisfied,
        });
        if !theorem_ok {
            return Err(Error::config(
                "strict mode: theorem-validator violations present",
            ));
        }
    }

    let output = run_experiment(config)?;

    std::fs::create_dir_all(out_dir)?;
    let tag = file_tag(config);
    let csv_path = out_dir.join(format!("metrics_{tag}.csv"));
    let manifest_path = out_dir.join(format!("manifest_{tag}.txt"));
    let rate_fit_path = out_dir.join(format!("ratefit_{tag}.txt"));
    std::fs::write(&csv_path, render_csv(&output))?;
    std::fs::write(&rate_fit_path, render_rate_fit(&output.summary.rate_fit))?;

    let audit_path = if config.audit {
        let reports: Vec<AuditReport> = collect_audit_reports(config, &output)?;
        let path = out_dir.join(format!("audit_{tag}.csv"));
        std::fs::write(&path, render_audit_csv(&reports))?;
        Some(path)
    } else {
        None
    };

    let mut outputs = vec![csv_path.clone(), rate_fit_path.clone()];
    if let Some(p) = &audit_path {
        outputs.push(p.clone());
    }
    let manifest = RunManifest {
        config: config.clone(),
        version: VERSION.to_string(),
        reports,
        outputs,
        rate_fit: output.summary.rate_fit,
        bound_dominates: output.summary.bound_dominates,
    };
    std::fs::write(&manifest_path, render_manifest(&manifest))?;

    Ok(RunArtifacts {
        csv_path,
        manifest_path,
        rate_fit_path,
        audit_path,
        output,
    })
}

fn collect_audit_reports(
    config: &SimulationConfig,
    output: &ExperimentOutput,
) -> Result<Vec<AuditReport>> {
    let curv = config.curvature();
    let noise_free = config.data.noise_std == 0.0;
    output
        .audit_records
        .iter()
        .map(|records| {
            audit_trajectory(
                records,
                &curv,
                config.t_local,
                config.honest_count(),
                noise_free,
            )
        })
        .collect()
}

pub struct AuditArtifacts {
    pub audit_path: PathBuf,
    pub manifest_path: PathBuf,
    pub worst_slack: f64,
    pub passed: bool,
}

/// Run the inequality audits. Requires the idealized (population) data
/// model; the noise-only checks are skipped for noisy configs. Returns a
/// failing status when any slack drops below −1e−9.
pub fn audit_command(config: &SimulationConfig, out_dir: &Path) -> Result<AuditArtifacts> {
    if !matches!(config.data.mode, DataMode::Population) {
        return Err(Error::config(
            "audit requires data_mode=population (the idealized data model)",
        ));
    }
    let mut config = config.clone();
    config.audit = true;
    config.validate()?;
    let curv = config.curvature();
    let alpha_cap = 1.0 / (2.0 * curv.lipschitz * config.t_local as f64);
    if config.data.noise_std == 0.0 && config.schedule.alpha(0) > alpha_cap {
        return Err(Error::config(format!(
            "audit requires alpha_0 <= 1/(2LT) = {alpha_cap}, got {}",
            config.schedule.alpha(0)
        )));
    }

    let output = run_experiment(&config)?;
    let reports = collect_audit_reports(&config, &output)?;

    std::fs::create_dir_all(out_dir)?;
    let tag = file_tag(&config);
    let audit_path = out_dir.join(format!("audit_{tag}.csv"));
    std::fs::write(&audit_path, render_audit_csv(&reports))?;
    let manifest_path = out_dir.join(format!("manifest_{tag}.txt"));
    let manifest = RunManifest {
        config: config.clone(),
        version: VERSION.to_string(),
        reports: config.regime_reports()?,
        outputs: vec![audit_path.clone()],
        rate_fit: None,
        bound_dominates: output.summary.bound_dominates,
    };
    std::fs::write(&manifest_path, render_manifest(&manifest))?;

    let worst_slack = reports
        .iter()
        .map(AuditReport::worst_slack)
        .fold(f64::INFINITY, f64::min);
    let passed = reports.iter().all(AuditReport::passed);
    Ok(AuditArtifacts {
        audit_path,
        manifest_path,
        worst_slack,
        passed,
    })
}

/// Exit status for an audit outcome; failures are slacks below −1e−9.
pub fn audit_exit_status(worst_slack: f64) -> i32 {
    if worst_slack < -SLACK_TOLERANCE {
        exit_code::VALIDATION
    } else {
        exit_code::OK
    }
}

//! Run configuration, config-file parsing and CSV reports for the `telesim`
//! binary.
//!
//! A config file is a flat list of `key = value` lines; `#` starts a comment.
//! Command-line flags override file values.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;

use crate::detection::DetectorId;
use crate::engine::EngineKind;
use crate::error::{Error, Result};
use crate::experiments::{
    compute_rho, rotation_scan, run_fig3, run_swap, run_teleport_ideal, scan_dip, Fig3Stats,
    PhysicsConfig, PulseTally, Runner, SwapStats,
};
use crate::qcore::{BellKind, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Teleport,
    Fig3,
    Dip,
    Rho,
    Swap,
    RotationScan,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Teleport => "teleport",
            Experiment::Fig3 => "fig3",
            Experiment::Dip => "dip",
            Experiment::Rho => "rho",
            Experiment::Swap => "swap",
            Experiment::RotationScan => "rotation-scan",
        })
    }
}

/// A rejected configuration value.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub engine: EngineKind,
    pub seed: u64,
    /// False when the seed fell back to the default.
    pub seed_given: bool,
    /// Trials (teleport) or pump pulses per run.
    pub n: u64,
    pub workers: usize,
    pub physics: PhysicsConfig,
    pub coder_angle: f64,
    pub mirror_delay: f64,
    pub delays: Vec<f64>,
    pub theta0: f64,
    pub theta3: f64,
    pub angles: Vec<f64>,
    pub alpha: C64,
    pub beta: C64,
}

impl RunConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let physics = PhysicsConfig::default();
        let tau = physics.coherence_time;
        RunConfig {
            experiment,
            engine: EngineKind::StandardQm,
            seed: 0,
            seed_given: false,
            n: 100_000,
            workers: 1,
            coder_angle: 90.0,
            mirror_delay: if experiment == Experiment::Rho {
                tau
            } else {
                0.0
            },
            delays: (-5..=5).map(|k| k as f64 * tau).collect(),
            theta0: 0.0,
            theta3: 0.0,
            angles: (0..=6).map(|k| k as f64 * 15.0).collect(),
            alpha: C64::new(1.0, 0.0),
            beta: C64::new(0.0, 0.0),
            physics,
        }
    }

    fn runner(&self) -> Runner {
        Runner::new(self.seed).with_workers(self.workers)
    }
}

/// Parse `key = value` lines.
pub fn parse_kv(text: &str) -> std::result::Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            ConfigError::new(line, format!("line {}: expected `key = value`", lineno + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::new(key, format!("cannot parse `{value}`")))
}

fn finite(key: &str, value: &str) -> std::result::Result<f64, ConfigError> {
    let x: f64 = number(key, value)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError::new(
            key,
            format!("must be finite, got {value}"),
        ))
    }
}

fn probability(key: &str, value: &str) -> std::result::Result<f64, ConfigError> {
    let x = finite(key, value)?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(ConfigError::new(
            key,
            format!("must lie in [0, 1], got {value}"),
        ))
    }
}

fn non_negative(key: &str, value: &str) -> std::result::Result<f64, ConfigError> {
    let x = finite(key, value)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(ConfigError::new(
            key,
            format!("must be non-negative, got {value}"),
        ))
    }
}

fn list(key: &str, value: &str) -> std::result::Result<Vec<f64>, ConfigError> {
    let xs = value
        .split(',')
        .map(|s| finite(key, s.trim()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if xs.is_empty() {
        return Err(ConfigError::new(key, "list is empty"));
    }
    Ok(xs)
}

fn boolean(key: &str, value: &str) -> std::result::Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(ConfigError::new(
            key,
            format!("expected true or false, got `{value}`"),
        )),
    }
}

fn complex(key: &str, value: &str) -> std::result::Result<C64, ConfigError> {
    let z: C64 = value
        .replace(' ', "")
        .parse()
        .map_err(|_| ConfigError::new(key, format!("cannot parse complex number `{value}`")))?;
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(ConfigError::new(key, "must be finite"))
    }
}

/// Build a config from an optional file plus overrides (applied in order,
/// after the file).
pub fn parse_config(
    experiment: Experiment,
    file: Option<&Path>,
    overrides: &[(String, String)],
) -> std::result::Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new("config", format!("cannot read {}: {e}", path.display()))
        })?;
        entries.extend(parse_kv(&text)?);
    }
    entries.extend(overrides.iter().cloned());

    let mut cfg = RunConfig::defaults(experiment);
    let mut mirror_delay_given = false;
    // Global detector settings go first so per-detector keys can refine them.
    if let Some(v) = entries.get("efficiency") {
        cfg.physics.set_efficiency(probability("efficiency", v)?);
    }
    if let Some(v) = entries.get("dark_rate") {
        cfg.physics.set_dark_rate(non_negative("dark_rate", v)?);
    }
    for (key, value) in &entries {
        let (k, v) = (key.as_str(), value.as_str());
        match k {
            "efficiency" | "dark_rate" => {}
            "engine" => {
                cfg.engine = v
                    .parse()
                    .map_err(|e: Error| ConfigError::new(k, e.to_string()))?
            }
            "seed" => {
                cfg.seed = number(k, v)?;
                cfg.seed_given = true;
            }
            "n" => {
                cfg.n = number(k, v)?;
                if cfg.n == 0 {
                    return Err(ConfigError::new(k, "must be at least 1"));
                }
            }
            "workers" => cfg.workers = number::<usize>(k, v)?.max(1),
            "p_pair" => cfg.physics.p_pair = probability(k, v)?,
            "jitter" => cfg.physics.jitter = non_negative(k, v)?,
            "coherence_time" => cfg.physics.coherence_time = non_negative(k, v)?,
            "round_trip" => cfg.physics.round_trip = non_negative(k, v)?,
            "epsilon" => cfg.physics.epsilon = probability(k, v)?,
            "window" => {
                let w = finite(k, v)?;
                if w <= 0.0 {
                    return Err(ConfigError::new(k, format!("must be positive, got {v}")));
                }
                cfg.physics.window = w;
            }
            "number_resolving" => cfg.physics.number_resolving = boolean(k, v)?,
            "coder_angle" => cfg.coder_angle = finite(k, v)?,
            "mirror_delay" => {
                cfg.mirror_delay = finite(k, v)?;
                mirror_delay_given = true;
            }
            "delays" => cfg.delays = list(k, v)?,
            "theta0" => cfg.theta0 = finite(k, v)?,
            "theta3" => cfg.theta3 = finite(k, v)?,
            "angles" => cfg.angles = list(k, v)?,
            "alpha" => cfg.alpha = complex(k, v)?,
            "beta" => cfg.beta = complex(k, v)?,
            _ => {
                let (prefix, det) = k
                    .split_once('.')
                    .ok_or_else(|| ConfigError::new(k, "unknown key"))?;
                let det: DetectorId = det
                    .parse()
                    .map_err(|_| ConfigError::new(k, "unknown detector"))?;
                match prefix {
                    "efficiency" => {
                        cfg.physics
                            .detectors
                            .get_mut(&det)
                            .expect("all detectors")
                            .efficiency = probability(k, v)?
                    }
                    "dark_rate" => {
                        cfg.physics
                            .detectors
                            .get_mut(&det)
                            .expect("all detectors")
                            .dark_rate = non_negative(k, v)?
                    }
                    "delay" => {
                        cfg.physics.delays.insert(det, finite(k, v)?);
                    }
                    _ => return Err(ConfigError::new(k, "unknown key")),
                }
            }
        }
    }
    if experiment == Experiment::Rho && !mirror_delay_given {
        cfg.mirror_delay = cfg.physics.coherence_time;
    }
    if experiment == Experiment::Teleport {
        let norm = cfg.alpha.norm_sqr() + cfg.beta.norm_sqr();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(ConfigError::new(
                "alpha",
                format!("|alpha|^2 + |beta|^2 must be 1, got {norm}"),
            ));
        }
    }
    Ok(cfg)
}

/// Rows of a CSV file with a fixed header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvReport {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvReport {
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let io = |e: csv::Error| Error::Invalid(format!("cannot write CSV: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Invalid(format!("cannot write CSV: {e}")))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV is UTF-8"))
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            header: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn finish(self, echo: &[(String, String)]) -> CsvReport {
        let mut header = self.header;
        header.extend(echo.iter().map(|(k, _)| k.clone()));
        let rows = self
            .rows
            .into_iter()
            .map(|mut r| {
                r.extend(echo.iter().map(|(_, v)| v.clone()));
                r
            })
            .collect();
        CsvReport { header, rows }
    }
}

fn echo(cfg: &RunConfig) -> Vec<(String, String)> {
    let p = &cfg.physics;
    let mut e = vec![
        ("experiment".to_string(), cfg.experiment.to_string()),
        ("engine".to_string(), cfg.engine.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("n".to_string(), cfg.n.to_string()),
        ("p_pair".to_string(), p.p_pair.to_string()),
        ("jitter".to_string(), p.jitter.to_string()),
        ("coherence_time".to_string(), p.coherence_time.to_string()),
        ("round_trip".to_string(), p.round_trip.to_string()),
        ("epsilon".to_string(), p.epsilon.to_string()),
        ("window".to_string(), p.window.to_string()),
        (
            "number_resolving".to_string(),
            p.number_resolving.to_string(),
        ),
    ];
    for d in DetectorId::ALL {
        e.push((
            format!("efficiency.{}", d.key()),
            p.detector(d).efficiency.to_string(),
        ));
    }
    for d in DetectorId::ALL {
        e.push((
            format!("dark_rate.{}", d.key()),
            p.detector(d).dark_rate.to_string(),
        ));
    }
    for d in DetectorId::ALL {
        e.push((
            format!("delay.{}", d.key()),
            p.delays.get(&d).copied().unwrap_or(0.0).to_string(),
        ));
    }
    e
}

const TALLY: [&str; 4] = ["pulses", "accepted", "rejected", "no_emission"];

fn tally_cells(t: &PulseTally) -> Vec<String> {
    vec![
        t.total.to_string(),
        t.accepted.to_string(),
        t.rejected.to_string(),
        t.no_emission.to_string(),
    ]
}

fn fig3_table() -> Table {
    let mut cols = vec![
        "coder_angle",
        "mirror_delay",
        "visibility",
        "n_gates",
        "n_minus",
        "n_plus",
        "minus_rate",
        "minus_rate_se",
        "plus_rate",
        "plus_rate_se",
    ];
    cols.extend(TALLY);
    Table::new(&cols)
}

fn fig3_row(s: &Fig3Stats) -> Vec<String> {
    let mut r = vec![
        s.coder_angle.to_string(),
        s.mirror_delay.to_string(),
        s.visibility.to_string(),
        s.n_gates.to_string(),
        s.n_minus.to_string(),
        s.n_plus.to_string(),
        s.minus_rate().to_string(),
        s.minus_rate_se().to_string(),
        s.plus_rate().to_string(),
        s.plus_rate_se().to_string(),
    ];
    r.extend(tally_cells(&s.pulses));
    r
}

fn swap_table(with_angle: bool) -> Table {
    let mut cols = Vec::new();
    if with_angle {
        cols.push("angle");
    }
    cols.extend([
        "theta0",
        "theta3",
        "n_gates",
        "n_plus_plus",
        "n_plus_minus",
        "n_minus_plus",
        "n_minus_minus",
        "contrast",
        "contrast_se",
        "min_cell",
        "max_cell",
    ]);
    cols.extend(TALLY);
    Table::new(&cols)
}

fn swap_row(angle: Option<f64>, s: &SwapStats) -> Vec<String> {
    let mut r: Vec<String> = angle.map(|a| a.to_string()).into_iter().collect();
    r.extend([
        s.theta0.to_string(),
        s.theta3.to_string(),
        s.n_gates.to_string(),
        s.cells[0][0].to_string(),
        s.cells[0][1].to_string(),
        s.cells[1][0].to_string(),
        s.cells[1][1].to_string(),
        s.contrast().to_string(),
        s.contrast_se().to_string(),
        s.min_cell().to_string(),
        s.max_cell().to_string(),
    ]);
    r.extend(tally_cells(&s.pulses));
    r
}

/// Execute the configured experiment.
pub fn run(cfg: &RunConfig) -> Result<CsvReport> {
    let runner = cfg.runner();
    let physics = &cfg.physics;
    let table = match cfg.experiment {
        Experiment::Teleport => {
            let s = run_teleport_ideal(cfg.alpha, cfg.beta, cfg.n, cfg.engine, &runner)?;
            let mut cols = vec![
                "alpha".to_string(),
                "beta".to_string(),
                "n_trials".to_string(),
            ];
            cols.extend(BellKind::ALL.iter().map(|k| format!("count_{}", k.name())));
            cols.extend(BellKind::ALL.iter().map(|k| format!("freq_{}", k.name())));
            cols.extend(["mean_fidelity".to_string(), "min_fidelity".to_string()]);
            let mut t = Table::new(&cols.iter().map(String::as_str).collect::<Vec<_>>());
            let mut row = vec![
                cfg.alpha.to_string(),
                cfg.beta.to_string(),
                s.n_trials.to_string(),
            ];
            row.extend(BellKind::ALL.iter().map(|&k| s.count(k).to_string()));
            row.extend(BellKind::ALL.iter().map(|&k| s.frequency(k).to_string()));
            row.extend([
                s.post_correction_fidelity().to_string(),
                s.min_fidelity.to_string(),
            ]);
            t.push(row);
            t
        }
        Experiment::Fig3 => {
            let s = run_fig3(
                cfg.coder_angle,
                cfg.mirror_delay,
                cfg.engine,
                physics,
                cfg.n,
                &runner,
            )?;
            let mut t = fig3_table();
            t.push(fig3_row(&s));
            t
        }
        Experiment::Dip => {
            let points = scan_dip(
                cfg.coder_angle,
                &cfg.delays,
                cfg.engine,
                physics,
                cfg.n,
                &runner,
            )?;
            let mut t = fig3_table();
            for s in &points {
                t.push(fig3_row(s));
            }
            t
        }
        Experiment::Rho => {
            let s45 = run_fig3(
                45.0,
                cfg.mirror_delay,
                cfg.engine,
                physics,
                cfg.n,
                &runner.child(0),
            )?;
            let s90 = run_fig3(
                90.0,
                cfg.mirror_delay,
                cfg.engine,
                physics,
                cfg.n,
                &runner.child(1),
            )?;
            let rho = compute_rho(&s45, &s90)?;
            let mut t = Table::new(&[
                "mirror_delay",
                "visibility",
                "rho",
                "rho_se",
                "defined",
                "n_gates_45",
                "n_minus_45",
                "n_plus_45",
                "n_gates_90",
                "n_minus_90",
                "n_plus_90",
                "scale_90",
            ]);
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            t.push(vec![
                cfg.mirror_delay.to_string(),
                s45.visibility.to_string(),
                opt(rho.rho),
                opt(rho.standard_error),
                rho.is_defined().to_string(),
                s45.n_gates.to_string(),
                rho.n_minus_45.to_string(),
                rho.n_plus_45.to_string(),
                s90.n_gates.to_string(),
                rho.n_minus_90.to_string(),
                rho.n_plus_90.to_string(),
                rho.scale.to_string(),
            ]);
            t
        }
        Experiment::Swap => {
            let s = run_swap(cfg.theta0, cfg.theta3, cfg.engine, physics, cfg.n, &runner)?;
            let mut t = swap_table(false);
            t.push(swap_row(None, &s));
            t
        }
        Experiment::RotationScan => {
            let rows = rotation_scan(
                &cfg.angles,
                cfg.theta0,
                cfg.theta3,
                cfg.engine,
                physics,
                cfg.n,
                &runner,
            )?;
            let mut t = swap_table(true);
            for r in &rows {
                t.push(swap_row(Some(r.angle), &r.stats));
            }
            t
        }
    };
    Ok(table.finish(&echo(cfg)))
}

//! Command-line front end. Each subcommand runs one estimator and writes a
//! self-describing result document; logs go to stderr.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bundled;
use crate::dynamics::Caps;
use crate::error::Error;
use crate::estimators::{
    count_components, perturbation_sweep, recover_volume, reflection_histogram, santalo_check,
    trapped_measure, Estimate, RunSettings,
};
use crate::geometry::{ball_volume, Scene};
use crate::measure::{obstacle_volume, DEFAULT_VOLUME_POINTS};
use crate::scene_file::scene_hash;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const SCENE_PARSE: i32 = 3;
    pub const SCENE_VALIDATION: i32 = 4;
    pub const BOUND_VIOLATION: i32 = 5;
    pub const UNRELIABLE: i32 = 6;
    pub const CHECK_FAILED: i32 = 7;
}

#[derive(Debug, Parser)]
#[command(
    name = "billiards",
    version,
    about = "Monte Carlo estimators for open billiards"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Travel-time integral against the phase-space volume.
    SantaloCheck(Common),
    /// Obstacle volume recovered from travelling times.
    Volume(Common),
    /// Trapped-set measure, also at half the time cap.
    Trapped(Common),
    /// Reflection-count histogram with its two-sided bounds.
    Histogram(Common),
    /// Number of equal balls matching the recovered volume.
    Count {
        #[command(flatten)]
        common: Common,
        /// Ball radius.
        #[arg(long)]
        radius: f64,
    },
    /// Trapped measure along the scene's perturbation family.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated perturbation amplitudes; must include 0.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    /// Pretty-printed JSON.
    #[value(alias = "structured-text")]
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Bundled scene name or path to a scene file.
    #[arg(long)]
    pub scene: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of entry samples.
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Time cap; defaults to 1000 R.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Reflection cap.
    #[arg(long, default_value_t = 10_000)]
    pub k_max: u64,
    /// Points for Monte Carlo obstacle volumes.
    #[arg(long, default_value_t = DEFAULT_VOLUME_POINTS)]
    pub volume_points: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads. Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SantaloCheck(c)
            | Command::Volume(c)
            | Command::Trapped(c)
            | Command::Histogram(c) => c,
            Command::Count { common, .. } | Command::Sweep { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::SantaloCheck(_) => "santalo-check",
            Command::Volume(_) => "volume",
            Command::Trapped(_) => "trapped",
            Command::Histogram(_) => "histogram",
            Command::Count { .. } => "count",
            Command::Sweep { .. } => "sweep",
        }
    }
}

/// Run parameters echoed in every output.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub command: &'static str,
    pub scene: String,
    pub scene_hash: String,
    pub seed: u64,
    pub samples: u64,
    pub t_max: f64,
    pub k_max: u64,
    pub volume_points: u64,
}

/// A table: fixed header and one row per record.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug)]
pub struct Outcome {
    pub document: serde_json::Value,
    pub table: Table,
    pub exit_code: i32,
}

fn f(x: f64) -> String {
    format!("{x:e}")
}

fn estimate_columns(prefix: &'static str) -> Vec<&'static str> {
    match prefix {
        "" => vec![
            "value",
            "std_error",
            "n_censored",
            "n_degenerate",
            "unreliable",
        ],
        "half_cap" => vec![
            "half_cap_value",
            "half_cap_std_error",
            "half_cap_n_censored",
            "half_cap_n_degenerate",
            "half_cap_unreliable",
        ],
        _ => unreachable!(),
    }
}

fn estimate_cells(e: &Estimate) -> Vec<String> {
    vec![
        f(e.value),
        f(e.std_error),
        e.n_censored.to_string(),
        e.n_degenerate.to_string(),
        e.unreliable.to_string(),
    ]
}

fn meta_columns() -> Vec<&'static str> {
    vec![
        "command",
        "scene",
        "scene_hash",
        "seed",
        "samples",
        "t_max",
        "k_max",
    ]
}

fn meta_cells(m: &Meta) -> Vec<String> {
    vec![
        m.command.to_string(),
        m.scene.clone(),
        m.scene_hash.clone(),
        m.seed.to_string(),
        m.samples.to_string(),
        f(m.t_max),
        m.k_max.to_string(),
    ]
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn unreliable_code(e: &Estimate) -> i32 {
    if e.unreliable {
        exit::UNRELIABLE
    } else {
        exit::OK
    }
}

/// Runs one subcommand on an already loaded scene.
pub fn execute(command: &Command, scene: &Scene) -> Result<Outcome, Error> {
    let c = command.common();
    if c.samples == 0 {
        return Err(Error::InvalidParameter("--samples must be positive".into()));
    }
    let caps = Caps {
        t_max: c.t_max.unwrap_or(1e3 * scene.radius()),
        k_max: c.k_max,
    };
    if !(caps.t_max.is_finite() && caps.t_max > 0.0) || caps.k_max == 0 {
        return Err(Error::InvalidParameter("caps must be positive".into()));
    }
    let mut settings = RunSettings::for_scene(scene, c.samples, c.seed).with_caps(caps);
    settings.workers = c.workers;
    settings.volume_points = c.volume_points;
    let meta = Meta {
        command: command.name(),
        scene: scene.name.clone(),
        scene_hash: scene_hash(scene),
        seed: c.seed,
        samples: c.samples,
        t_max: caps.t_max,
        k_max: caps.k_max,
        volume_points: c.volume_points,
    };
    let mut header = meta_columns();
    let mut row = meta_cells(&meta);

    let outcome = match command {
        Command::SantaloCheck(_) => {
            let check = santalo_check(scene, &settings);
            header.extend(estimate_columns(""));
            header.extend(["lambda_total", "lambda_std_error", "z_score", "verdict"]);
            row.extend(estimate_cells(&check.integral));
            row.extend([
                f(check.lambda_total.value),
                f(check.lambda_total.std_error),
                f(check.z_score),
                verdict(check.pass).to_string(),
            ]);
            let code = match unreliable_code(&check.integral) {
                exit::OK if !check.pass => exit::CHECK_FAILED,
                code => code,
            };
            Outcome {
                document: serde_json::json!({
                    "meta": meta,
                    "result": check,
                    "verdict": verdict(check.pass),
                }),
                table: Table {
                    header,
                    rows: vec![row],
                },
                exit_code: code,
            }
        }
        Command::Volume(_) => {
            let volume = recover_volume(scene, &settings);
            let exact = obstacle_volume(scene, settings.volume_points, settings.seed);
            let sigma = volume.std_error.hypot(exact.std_error);
            let pass = (volume.value - exact.value).abs() <= 3.0 * sigma;
            header.extend(estimate_columns(""));
            header.extend(["reference_volume", "reference_std_error", "verdict"]);
            row.extend(estimate_cells(&volume));
            row.extend([
                f(exact.value),
                f(exact.std_error),
                verdict(pass).to_string(),
            ]);
            let code = match unreliable_code(&volume) {
                exit::OK if !pass => exit::CHECK_FAILED,
                code => code,
            };
            Outcome {
                document: serde_json::json!({
                    "meta": meta,
                    "result": volume,
                    "reference": exact,
                    "verdict": verdict(pass),
                }),
                table: Table {
                    header,
                    rows: vec![row],
                },
                exit_code: code,
            }
        }
        Command::Trapped(_) => {
            let t = trapped_measure(scene, &settings);
            header.extend(estimate_columns(""));
            header.extend(estimate_columns("half_cap"));
            header.extend(["lambda_total", "lambda_std_error", "cap_bias_bound"]);
            row.extend(estimate_cells(&t.trapped));
            row.extend(estimate_cells(&t.half_cap));
            row.extend([
                f(t.lambda_total.value),
                f(t.lambda_total.std_error),
                f(t.cap_bias_bound),
            ]);
            Outcome {
                document: serde_json::json!({ "meta": meta, "result": t }),
                table: Table {
                    header,
                    rows: vec![row],
                },
                exit_code: unreliable_code(&t.trapped),
            }
        }
        Command::Histogram(_) => {
            let h = reflection_histogram(scene, &settings);
            let verified = h.verify();
            header.extend([
                "k",
                "count",
                "mu_gamma",
                "weighted_sum",
                "weighted_sum_std_error",
                "lower_bound",
                "upper_bound",
                "lower_verdict",
                "upper_verdict",
                "n_censored",
                "n_degenerate",
            ]);
            let upper = h.upper_bound.map(f).unwrap_or_default();
            let upper_verdict = h.upper_holds.map(verdict).unwrap_or("NA");
            let rows = h
                .counts
                .iter()
                .enumerate()
                .map(|(k, &count)| {
                    let mut r = row.clone();
                    r.extend([
                        k.to_string(),
                        count.to_string(),
                        f(h.mu_gamma(k)),
                        f(h.weighted_sum),
                        f(h.weighted_sum_std_error),
                        f(h.lower_bound),
                        upper.clone(),
                        verdict(h.lower_holds).to_string(),
                        upper_verdict.to_string(),
                        h.n_censored.to_string(),
                        h.n_degenerate.to_string(),
                    ]);
                    r
                })
                .collect();
            let unreliable =
                h.n_degenerate as f64 > crate::estimators::DEGENERATE_ALARM * h.n_samples as f64;
            let code = if verified.is_err() {
                exit::BOUND_VIOLATION
            } else if unreliable {
                exit::UNRELIABLE
            } else {
                exit::OK
            };
            if let Err(e) = &verified {
                log::error!("{e}");
            }
            Outcome {
                document: serde_json::json!({
                    "meta": meta,
                    "result": h,
                    "bookkeeping_holds": h.bookkeeping_holds(),
                    "mu_censored": h.mu_censored(),
                    "mu_degenerate": h.mu_degenerate(),
                }),
                table: Table { header, rows },
                exit_code: code,
            }
        }
        Command::Count { radius, .. } => {
            let volume = recover_volume(scene, &settings);
            let count = count_components(&volume, *radius, scene.dimension())?;
            header.extend(estimate_columns(""));
            header.extend([
                "radius",
                "ball_volume",
                "k_fractional",
                "k_std_error",
                "k_rounded",
            ]);
            row.extend(estimate_cells(&volume));
            row.extend([
                f(*radius),
                f(ball_volume(scene.dimension(), *radius)),
                f(count.fractional),
                f(count.std_error),
                count.rounded.to_string(),
            ]);
            Outcome {
                document: serde_json::json!({
                    "meta": meta,
                    "volume": volume,
                    "radius": radius,
                    "count": count,
                }),
                table: Table {
                    header,
                    rows: vec![row],
                },
                exit_code: unreliable_code(&volume),
            }
        }
        Command::Sweep { epsilons, .. } => {
            let rows = perturbation_sweep(scene, epsilons, &settings)?;
            header.push("epsilon");
            header.extend(estimate_columns(""));
            header.extend([
                "lambda_total",
                "lambda_std_error",
                "deviation",
                "deviation_std_error",
            ]);
            let table_rows = rows
                .iter()
                .map(|r| {
                    let mut cells = row.clone();
                    cells.push(f(r.epsilon));
                    cells.extend(estimate_cells(&r.trapped.trapped));
                    cells.extend([
                        f(r.trapped.lambda_total.value),
                        f(r.trapped.lambda_total.std_error),
                        f(r.deviation),
                        f(r.deviation_std_error),
                    ]);
                    cells
                })
                .collect();
            let code = if rows.iter().any(|r| r.trapped.trapped.unreliable) {
                exit::UNRELIABLE
            } else {
                exit::OK
            };
            Outcome {
                document: serde_json::json!({ "meta": meta, "rows": rows }),
                table: Table {
                    header,
                    rows: table_rows,
                },
                exit_code: code,
            }
        }
    };
    Ok(outcome)
}

/// Serializes an outcome in the requested format.
pub fn render(outcome: &Outcome, format: Format) -> Result<Vec<u8>, Error> {
    match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&outcome.document)
                .map_err(|e| Error::Parse(e.to_string()))?;
            text.push('\n');
            Ok(text.into_bytes())
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
            w.write_record(&outcome.table.header).map_err(io)?;
            for r in &outcome.table.rows {
                w.write_record(r).map_err(io)?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
    }
}

/// Exit code for an error raised before any output was produced.
pub fn error_code(e: &Error, loading_scene: bool) -> i32 {
    match e {
        Error::Parse(_) => exit::SCENE_PARSE,
        Error::Io(_) if loading_scene => exit::SCENE_PARSE,
        Error::BoundViolation(_) => exit::BOUND_VIOLATION,
        _ if loading_scene => exit::SCENE_VALIDATION,
        Error::Validation(_) | Error::PerturbationTooLarge { .. } | Error::Dimension(_) => {
            exit::SCENE_VALIDATION
        }
        Error::InvalidParameter(_) | Error::NoPerturbationFamily => exit::USAGE,
        _ => exit::FAILURE,
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
        }
    };
    let common = cli.command.common().clone();
    let scene = match bundled::load(&common.scene) {
        Ok(s) => s,
        Err(e) => {
            log::error!("cannot load scene `{}`: {e}", common.scene);
            return error_code(&e, true);
        }
    };
    log::info!(
        "{} on `{}`: N = {}, seed = {}",
        cli.command.name(),
        scene.name,
        common.samples,
        common.seed
    );
    let outcome = match execute(&cli.command, &scene) {
        Ok(o) => o,
        Err(e) => {
            log::error!("{e}");
            return error_code(&e, false);
        }
    };
    let bytes = match render(&outcome, common.format) {
        Ok(b) => b,
        Err(e) => {
            log::error!("{e}");
            return exit::FAILURE;
        }
    };
    let written = match &common.out {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().lock().write_all(&bytes),
    };
    if let Err(e) = written {
        log::error!("cannot write output: {e}");
        return exit::FAILURE;
    }
    outcome.exit_code
}

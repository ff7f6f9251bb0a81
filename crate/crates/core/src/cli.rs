//! Command-line front end.
//!
//! ```text
//! fwgan --print-config
//! fwgan train  [--config FILE] [--override KEY=VALUE]... [--out DIR]
//! fwgan eval   --checkpoint DIR [--h-kde H] [--h-mmd H] [--seed S] [--samples N] [--out FILE]
//! fwgan ratio  --checkpoint DIR [--x-range LO,HI] [--y-range LO,HI] [--res N] [--temp T] --out FILE
//! fwgan curves --run DIR [--window W] [--out FILE]
//! ```
//!
//! A run directory holds `config.json`, `metrics.csv`, `checkpoint/` (final
//! state), optional `checkpoints/epoch_NNNNN/`, and `manifest.json`, which is
//! written last. Without `--out`, runs go under `$FWGAN_OUT` (default
//! `runs`) in a directory named after dataset, loss variant, and seed.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical abort.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::csvfmt::fmt_f64;
use crate::evalkit::{self, EvalError, Grid2D, MMD_REPORT_SCALE};
use crate::netkit::NetError;
use crate::trainer::{
    self, load_checkpoint, save_checkpoint, DatasetConfig, TrainConfig, TrainError, TrainState,
};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "FWGAN_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fwgan", version, about = "Importance-weighted WGAN toy lab")]
pub struct Cli {
    /// Print the default config as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a run directory.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dotted-key override, e.g. `optimizer.lr=2e-4`; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute NLL and MMD for a checkpoint's generator.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        h_kde: Option<f64>,
        #[arg(long)]
        h_mmd: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generator samples (default: the run's `eval_samples`).
        #[arg(long)]
        samples: Option<usize>,
        /// Also write the metrics as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the estimated density-ratio field on a 2-D grid.
    Ratio {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_parser = parse_range, default_value = "-3,3")]
        x_range: (f64, f64),
        #[arg(long, value_parser = parse_range, default_value = "-3,3")]
        y_range: (f64, f64),
        /// Grid points per axis.
        #[arg(long, default_value_t = 100)]
        res: usize,
        #[arg(long, default_value_t = 1.0)]
        temp: f64,
        /// Fresh generator samples for the reference batch and the KDE.
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Smooth a run's divergence log and count negative estimates.
    Curves {
        /// Run directory or metrics CSV.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 10)]
        window: usize,
        /// Curve CSV (default: `curve.csv` next to the metrics).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi}: {e}"))?;
    if !(lo < hi) {
        return Err(format!("empty range {lo},{hi}"));
    }
    Ok((lo, hi))
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for CliError {}

fn input(msg: impl std::fmt::Display) -> CliError {
    CliError { code: EXIT_INPUT, msg: msg.to_string() }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    input(format!("{}: {e}", path.display()))
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let code = match &e {
            TrainError::Config(_) | TrainError::Data(_) | TrainError::Checkpoint(_) => EXIT_INPUT,
            TrainError::Net(NetError::Grad(_)) => EXIT_NUMERIC,
            TrainError::Net(_) => EXIT_INPUT,
            TrainError::Eval(EvalError::Io { .. } | EvalError::Parse { .. }) => EXIT_INPUT,
            TrainError::Eval(_) | TrainError::Objective(_) | TrainError::NonFinite { .. } => EXIT_NUMERIC,
        };
        CliError { code, msg: e.to_string() }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub config: TrainConfig,
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub epochs_completed: usize,
    pub wall_clock_seconds: f64,
}

/// Writes `text` to `path` through a sibling temporary file and a rename.
fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| io_error(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

fn default_run_dir(config: &TrainConfig) -> PathBuf {
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    let data = match &config.dataset {
        DatasetConfig::Synthetic { name, .. } => name.as_str().to_string(),
        DatasetConfig::Tabular { path, .. } => {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "tabular".into())
        }
    };
    root.join(format!("{data}-{}-seed{}", config.loss_variant.as_str(), config.seed))
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<TrainConfig, CliError> {
    let base = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            TrainConfig::from_json(&text).map_err(|e| input(format!("{}: {e}", p.display())))?
        }
        None => TrainConfig::default(),
    };
    let config = base.with_overrides(overrides).map_err(input)?;
    config.validate().map_err(input)?;
    Ok(config)
}

fn cmd_train(
    config: Option<&Path>,
    overrides: &[String],
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let config = load_config(config, overrides)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| default_run_dir(&config));
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    write_atomic(&dir.join("config.json"), &config.to_json())?;

    let start = Instant::now();
    let mut state = TrainState::new(config.clone())?;
    let mut checkpoints = Vec::new();
    let every = config.checkpoint_every;
    let result = state.run_to_end(|s| {
        if every > 0 && s.epoch % every == 0 {
            let p = dir.join("checkpoints").join(format!("epoch_{:05}", s.epoch));
            save_checkpoint(s, &p)?;
            checkpoints.push(p);
        }
        Ok(())
    });
    // The log up to the failure is still useful.
    let metrics = dir.join("metrics.csv");
    evalkit::write_metrics_csv(&metrics, &state.log).map_err(|e| input(e))?;
    result?;
    let checkpoint = dir.join("checkpoint");
    save_checkpoint(&state, &checkpoint)?;

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        metrics,
        checkpoint,
        checkpoints,
        epochs_completed: state.epoch,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), &text)?;
    writeln!(stdout, "run={}", dir.display()).map_err(|e| input(e))?;
    Ok(())
}

/// Accepts either a checkpoint directory or a run directory containing one.
fn resolve_checkpoint(path: &Path) -> PathBuf {
    if !path.join("state.json").is_file() && path.join("checkpoint").join("state.json").is_file() {
        path.join("checkpoint")
    } else {
        path.to_path_buf()
    }
}

fn reseed_eval(state: &mut TrainState, seed: u64) {
    state.rngs.eval = trainer::eval_stream(seed);
}

fn cmd_eval(
    checkpoint: &Path,
    h_kde: Option<f64>,
    h_mmd: Option<f64>,
    seed: u64,
    samples: Option<usize>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let mut state = load_checkpoint(&resolve_checkpoint(checkpoint))?;
    for (name, h) in [("--h-kde", h_kde), ("--h-mmd", h_mmd)] {
        if let Some(h) = h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(input(format!("{name} must be a positive number")));
            }
        }
    }
    state.h_kde = h_kde.unwrap_or(state.h_kde);
    state.h_mmd = h_mmd.unwrap_or(state.h_mmd);
    if let Some(n) = samples {
        if n == 0 {
            return Err(input("--samples must be ≥ 1"));
        }
        state.config.eval_samples = n;
    }
    reseed_eval(&mut state, seed);
    let (nll, mmd) = state.evaluate()?;
    let line = format!(
        "nll={} mmd_x1e3={} h_kde={} h_mmd={}",
        fmt_f64(nll),
        fmt_f64(mmd * MMD_REPORT_SCALE),
        fmt_f64(state.h_kde),
        fmt_f64(state.h_mmd)
    );
    writeln!(stdout, "{line}").map_err(|e| input(e))?;
    if let Some(path) = out {
        let text = format!(
            "nll,mmd_x1e3,h_kde,h_mmd\n{},{},{},{}\n",
            fmt_f64(nll),
            fmt_f64(mmd * MMD_REPORT_SCALE),
            fmt_f64(state.h_kde),
            fmt_f64(state.h_mmd)
        );
        std::fs::write(path, text).map_err(|e| io_error(path, e))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ratio(
    checkpoint: &Path,
    x_range: (f64, f64),
    y_range: (f64, f64),
    res: usize,
    temp: f64,
    samples: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    if !(temp > 0.0 && temp.is_finite()) {
        return Err(input("--temp must be a positive number"));
    }
    if samples == 0 {
        return Err(input("--samples must be ≥ 1"));
    }
    let mut state = load_checkpoint(&resolve_checkpoint(checkpoint))?;
    let d = state.data.train.cols();
    if d != 2 {
        return Err(input(format!("ratio fields need a 2-D model; checkpoint has {d} dimensions")));
    }
    let grid = Grid2D::new(x_range, y_range, res, res).map_err(input)?;
    let points = grid.points();
    reseed_eval(&mut state, seed);
    let reference = state.generate(samples)?;
    let critic = &state.critic;
    let score = |x: &crate::gradcore::Tensor| critic.forward(x).expect("critic accepts 2-D input");
    let ratio = evalkit::ratio_field(score, &points, &reference, temp).map_err(TrainError::from)?;
    let q = evalkit::kde_density(&reference, &points, state.h_kde).map_err(TrainError::from)?;

    let mut text = String::from("x,y,q_density_estimate,ratio\n");
    for i in 0..points.rows() {
        let p = points.row(i);
        text.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p[0]),
            fmt_f64(p[1]),
            fmt_f64(q.data()[i]),
            fmt_f64(ratio.data()[i])
        ));
    }
    std::fs::write(out, text).map_err(|e| io_error(out, e))
}

fn cmd_curves(run: &Path, window: usize, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    if window < 1 {
        return Err(input("--window must be ≥ 1"));
    }
    let metrics = if run.is_dir() { run.join("metrics.csv") } else { run.to_path_buf() };
    let log = evalkit::read_metrics_csv(&metrics).map_err(input)?;
    if log.is_empty() {
        return Err(input(format!("{}: no metric rows", metrics.display())));
    }
    let smooth = trainer::divergence_curve(&log, window);
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| metrics.parent().unwrap_or(Path::new(".")).join("curve.csv"));
    let mut text = String::from("epoch,divergence,smoothed\n");
    for (r, s) in log.iter().zip(&smooth) {
        text.push_str(&format!("{},{},{}\n", r.epoch, fmt_f64(r.divergence), fmt_f64(*s)));
    }
    std::fs::write(&out, text).map_err(|e| io_error(&out, e))?;
    writeln!(stdout, "negative_estimates={}", evalkit::negative_estimate_count(&log)).map_err(|e| input(e))?;
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        CliError { code, msg: e.to_string() }
    })?;
    if cli.print_config {
        writeln!(stdout, "{}", TrainConfig::default().to_json()).map_err(|e| input(e))?;
        return Ok(());
    }
    match cli.command {
        None => Err(input("no command given; try --help")),
        Some(Command::Train { config, overrides, out }) => {
            cmd_train(config.as_deref(), &overrides, out.as_deref(), stdout)
        }
        Some(Command::Eval { checkpoint, h_kde, h_mmd, seed, samples, out }) => {
            cmd_eval(&checkpoint, h_kde, h_mmd, seed, samples, out.as_deref(), stdout)
        }
        Some(Command::Ratio { checkpoint, x_range, y_range, res, temp, samples, seed, out }) => {
            cmd_ratio(&checkpoint, x_range, y_range, res, temp, samples, seed, &out)
        }
        Some(Command::Curves { run, window, out }) => cmd_curves(&run, window, out.as_deref(), stdout),
    }
}

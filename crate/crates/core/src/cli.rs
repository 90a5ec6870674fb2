//! Command-line front end for the experiment sweeps.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{CommandFactory, Parser};

use crate::error::Result;
use crate::experiment::{
    emit_csv, render_csv, render_provenance, render_trace, run_sweep_with, sidecar_path,
    write_file, ExperimentConfig, Preset, SweepAxis, SweepOptions,
};

#[derive(Debug, Parser)]
#[command(
    name = "csi-feedback",
    about = "Monte Carlo sweeps of predictive differential CSI feedback against conventional quantized feedback"
)]
struct Args {
    /// Key = value experiment file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment.
    #[arg(long, value_name = "fig3|fig4")]
    preset: Option<Preset>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Outer sweep axis override.
    #[arg(long, value_name = "bits|tau")]
    sweep: Option<SweepAxis>,
    /// CSV destination; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write per-cycle records of trial 0 to `<out>.trace.csv`.
    #[arg(long)]
    verbose: bool,
}

/// Runs the CLI with process stdio. Returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if args.len() <= 1 {
        let _ = writeln!(err, "{}", Args::command().render_help());
        return 2;
    }
    let parsed = match Args::try_parse_from(&args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(out, "{}", e.render());
            } else {
                let _ = write!(err, "{}", e.render());
            }
            return code;
        }
    };
    match execute(parsed, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(args: Args, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mut config = match (&args.config, args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(preset)) => ExperimentConfig::preset(preset),
        (None, None) => {
            let _ = writeln!(err, "error: one of --config or --preset is required\n");
            let _ = writeln!(err, "{}", Args::command().render_usage());
            return Ok(2);
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(axis) = args.sweep {
        config.axis = axis;
    }
    if args.verbose && args.out.is_none() {
        let _ = writeln!(err, "error: --verbose needs --out for the trace sidecar");
        return Ok(2);
    }
    let table = run_sweep_with(&config, SweepOptions { record_trace: args.verbose })?;
    match &args.out {
        Some(path) => {
            emit_csv(&table, path)?;
            write_file(&sidecar_path(path, ".provenance.txt"), &render_provenance(&table))?;
            if args.verbose {
                write_file(&sidecar_path(path, ".trace.csv"), &render_trace(&table))?;
            }
        }
        None => {
            let csv = render_csv(&table)?;
            out.write_all(csv.as_bytes()).map_err(|source| crate::error::Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })?;
        }
    }
    Ok(0)
}

//! Command-line orchestration of the alignment reconstruction pipeline.

pub mod config;
pub mod error;
pub mod manifest;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{parse_classes, RunConfig};
use crate::error::{exit, CliError};
use crate::run::{Runner, Stage};

#[derive(Debug, Parser)]
#[command(
    name = "railalign",
    version,
    about = "Reconstruct railway alignments from classified LiDAR point clouds",
    after_help = "Any config value can also be set with a dotted flag, e.g. --fit.circle.r_step 5.\n\
                  Exit codes: 0 ok, 1 I/O, 2 usage, 3 input not found, 4 parse, 5 empty class,\n\
                  6 stale artifact, 7 alignment continuity, 8 evaluation, 9 processing."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Recompute stale upstream artifacts instead of refusing them.
    #[arg(long, global = true)]
    force: bool,
    /// Point cloud (.las, or text lines of `x y z class`).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Raster resolution in metres per pixel.
    #[arg(long, global = true)]
    resolution: Option<f64>,
    /// Comma-separated class codes to keep, e.g. 2,10.
    #[arg(long = "class-filter", global = true)]
    class_filter: Option<String>,
    /// Buffer query distance in metres.
    #[arg(long = "buffer-distance", global = true)]
    buffer_distance: Option<f64>,
    /// Reference centreline GeoJSON for evaluation.
    #[arg(long, global = true)]
    reference: Option<PathBuf>,
    /// Footprint polygons GeoJSON for the buffer query.
    #[arg(long, global = true)]
    footprints: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter and rasterize the cloud: occupancy and height images.
    Rasterize,
    /// Extract the centreline and fit lines, arcs and clothoids.
    Fit,
    /// Assemble the alignment and write GeoJSON and IFC.
    Export,
    /// Compare the alignment with a reference and run the buffer query.
    Evaluate,
    /// All stages in order.
    Pipeline,
}

/// Pulls `--a.b value` and `--a.b=value` pairs out of the argument list.
fn split_overrides(args: Vec<OsString>) -> Result<(Vec<OsString>, Vec<(String, String)>), CliError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let dotted = a.to_str().and_then(|s| s.strip_prefix("--")).filter(|k| {
            let key = k.split('=').next().unwrap_or("");
            key.contains('.') && !key.starts_with('.')
        });
        match dotted {
            Some(k) => match k.split_once('=') {
                Some((key, value)) => overrides.push((key.to_string(), value.to_string())),
                None => {
                    let value = it
                        .next()
                        .and_then(|v| v.into_string().ok())
                        .ok_or_else(|| CliError::Usage(format!("--{k} needs a value")))?;
                    overrides.push((k.to_string(), value));
                }
            },
            None => rest.push(a),
        }
    }
    Ok((rest, overrides))
}

fn configure(cli: &Cli, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    if let Some(p) = &cli.input {
        cfg.input.path = Some(p.clone());
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(r) = cli.resolution {
        cfg.resolution_m = r;
    }
    if let Some(c) = &cli.class_filter {
        cfg.classes = parse_classes(c)?;
    }
    if let Some(b) = cli.buffer_distance {
        cfg.evaluation.buffer_distance_m = b;
    }
    if let Some(r) = &cli.reference {
        cfg.evaluation.reference = Some(r.clone());
    }
    if let Some(f) = &cli.footprints {
        cfg.evaluation.footprints = Some(f.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli, overrides: &[(String, String)]) -> Result<(), CliError> {
    let runner = Runner::new(configure(cli, overrides)?, cli.force);
    match cli.command {
        Command::Rasterize => runner.command(Stage::Rasterize),
        Command::Fit => runner.command(Stage::Fit),
        Command::Export => runner.command(Stage::Export),
        Command::Evaluate => runner.command(Stage::Evaluate),
        Command::Pipeline => runner.pipeline(),
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> u8 {
    let (rest, overrides) = match split_overrides(args.into_iter().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match execute(&cli, &overrides) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

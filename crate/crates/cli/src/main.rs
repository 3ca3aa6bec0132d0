//! `diffract`: runs the stages of a scenario pipeline and reports their checks.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a stored
//! output no longer matches its manifest, 2 for usage errors (bad flags,
//! invalid scenario files, missing upstream stages, unsupported settings).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use diffract::pipeline::{apply_overrides, Pipeline, Stage};
use diffract::scenario::Scenario;
use diffract::Error;

#[derive(Parser, Debug)]
#[command(name = "diffract", version, about = "Geometric optics for grazing diffraction by convex obstacles")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    scenario: Option<PathBuf>,

    /// Output directory; defaults to the scenario's `output` entry.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for parallel scans (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Overrides the scenario seed.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,

    /// Overrides the eps schedule (comma-separated, strictly decreasing).
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    eps: Option<Vec<f64>>,

    /// Overrides the truncation parameters (comma-separated).
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    mu: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Classify boundary points and draw the illuminated/shadow partition.
    Classify,
    /// Trace incoming and reflected rays through sample boundary points.
    Trace,
    /// Sample the reflected flow map and check it against integrated rays.
    Flowmap,
    /// Check the reflected Jacobian, its lower bound and its grazing scaling.
    Jacobian,
    /// Build the grazing-set defining function and compare its sign pattern.
    Zeta,
    /// Solve the profile system by Picard iteration (planar scenarios).
    Profiles,
    /// Assemble the field and scan its residual over the eps schedule.
    Synthesize,
    /// Re-check every stage and run the nested mu / eps sweep.
    Verify,
    /// Write report.md from the stored manifests and summaries.
    Report,
}

impl Command {
    fn stage(self) -> Stage {
        match self {
            Command::Classify => Stage::Classify,
            Command::Trace => Stage::Trace,
            Command::Flowmap => Stage::Flowmap,
            Command::Jacobian => Stage::Jacobian,
            Command::Zeta => Stage::Zeta,
            Command::Profiles => Stage::Profiles,
            Command::Synthesize => Stage::Synthesize,
            Command::Verify => Stage::Verify,
            Command::Report => Stage::Report,
        }
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Usage(e.to_string()))?;
    }
    let path = cli.scenario.ok_or_else(|| Error::Usage("--scenario PATH is required".into()))?;
    let mut scenario = Scenario::load(&path).map_err(|e| match e {
        Error::Io(msg) => Error::Usage(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    apply_overrides(&mut scenario, cli.seed, cli.eps, cli.mu)?;
    let pipeline = Pipeline::new(scenario, cli.out);
    let outcome = pipeline.run(cli.command.stage())?;
    if let Some(text) = &outcome.text {
        print!("{text}");
    } else {
        for v in &outcome.verdicts {
            println!("{v}");
        }
    }
    for f in &outcome.outputs {
        println!("wrote {}", pipeline.out.join(f).display());
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config { .. } | Error::MissingDependency(_) | Error::Unsupported(_) | Error::Expression(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

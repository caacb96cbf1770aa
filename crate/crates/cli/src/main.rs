//! `grouprig`: command-line driver for the experiment harness.
//!
//! Exit status is 0 when every embedded assertion passes, 1 when one fails
//! (or a computation cannot be verified) and 2 for unusable input.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grouprig::harness::{self, ExperimentConfig, Task};
use grouprig::Error;

#[derive(Parser, Debug)]
#[command(name = "grouprig", version, about = "Word metrics, divergence, subshift gluing and cocycle untwisting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate a Cayley ball and export word lengths.
    Ball(Common),
    /// Power lengths, distortion, compression and translation number of an element.
    Invariants(Common),
    /// Divergence function estimates on windowed balls.
    Divergence(Common),
    /// Configurations over the shift space.
    #[command(subcommand)]
    Subshift(SubshiftCommand),
    /// Plant, untwist or probe Hölder cocycles.
    #[command(subcommand)]
    Cocycle(CocycleCommand),
}

#[derive(Subcommand, Debug)]
enum SubshiftCommand {
    /// Glue two homoclinic configurations along the cones of an element.
    Glue(Common),
    /// Check subshift membership of a configuration.
    Check(Common),
}

#[derive(Subcommand, Debug)]
enum CocycleCommand {
    /// Write a random coboundary spec with known homomorphism part.
    Plant(Common),
    /// Build the transfer map and extract the homomorphism.
    Untwist(Common),
    /// Holonomy certificates and consistency defects.
    Holonomy(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Group descriptor: z, z^d, heisenberg, free:r, prod(a,b).
    #[arg(long)]
    group: Option<String>,
    /// Group element in normal form.
    #[arg(long)]
    element: Option<String>,
    #[arg(long)]
    radius: Option<u32>,
    #[arg(long)]
    nmax: Option<u64>,
    #[arg(long)]
    window_factor: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cocycle spec JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// JSON experiment config; its fields override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Largest Cayley ball (element count) held in memory.
    #[arg(long)]
    max_ball: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    alphabet: Option<u8>,
    /// Target group for planting: real:d, torus:d or cyclic:n.
    #[arg(long)]
    target: Option<String>,
    /// Cone parameter R for gluing.
    #[arg(long)]
    cone_radius: Option<u64>,
    /// Golden-mean forbidden sets, e.g. "e,(1,0);e,(0,1)".
    #[arg(long)]
    forbidden: Option<String>,
    /// Configuration JSON.
    #[arg(long)]
    x: Option<PathBuf>,
    /// Second configuration JSON.
    #[arg(long)]
    xp: Option<PathBuf>,
}

fn build_config(task: Task, c: Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::new(task, c.group.as_deref().unwrap_or(""));
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = c.$field { cfg.$field = v; } )* };
    }
    set!(window_factor, seed, epsilon, max_ball, samples, alphabet);
    cfg.element = c.element;
    cfg.radius = c.radius;
    cfg.nmax = c.nmax;
    cfg.spec = c.spec;
    cfg.target = c.target;
    cfg.cone_radius = c.cone_radius;
    cfg.forbidden = c.forbidden;
    cfg.x = c.x;
    cfg.xp = c.xp;
    cfg.out = Some(c.out);

    if let Some(path) = c.config {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let overrides: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let serde_json::Value::Object(overrides) = overrides else {
            return Err(Error::Parse(format!("{}: expected a JSON object", path.display())));
        };
        let mut merged = serde_json::to_value(&cfg).map_err(|e| Error::Internal(e.to_string()))?;
        for (k, v) in overrides {
            merged[k] = v;
        }
        cfg = serde_json::from_value(merged).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        cfg.task = task;
    }
    if cfg.group.is_empty() {
        return Err(Error::Parse("--group is required".into()));
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, common) = match cli.command {
        Command::Ball(c) => (Task::Ball, c),
        Command::Invariants(c) => (Task::Invariants, c),
        Command::Divergence(c) => (Task::Divergence, c),
        Command::Subshift(SubshiftCommand::Glue(c)) => (Task::SubshiftGlue, c),
        Command::Subshift(SubshiftCommand::Check(c)) => (Task::SubshiftCheck, c),
        Command::Cocycle(CocycleCommand::Plant(c)) => (Task::CocyclePlant, c),
        Command::Cocycle(CocycleCommand::Untwist(c)) => (Task::CocycleUntwist, c),
        Command::Cocycle(CocycleCommand::Holonomy(c)) => (Task::CocycleHolonomy, c),
    };
    let outcome = build_config(task, common).and_then(|cfg| {
        let outcome = harness::run(&cfg)?;
        let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        outcome.write_to(&dir).map_err(|e| Error::Internal(format!("{}: {e}", dir.display())))?;
        Ok((outcome, dir))
    });
    match outcome {
        Ok((outcome, dir)) => {
            for a in &outcome.assertions {
                let mark = if a.passed { "ok  " } else { "FAIL" };
                if a.detail.is_empty() {
                    println!("{mark} {}", a.name);
                } else {
                    println!("{mark} {} ({})", a.name, a.detail);
                }
            }
            for a in &outcome.artifacts {
                println!("wrote {}", dir.join(&a.name).display());
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}

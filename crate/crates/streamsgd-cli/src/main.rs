use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use streamsgd::harness::config::{
    parse_raw, preset, preset_names, ExperimentKind, RawConfig, RunConfig,
};
use streamsgd::harness::run;

/// Seeded streaming-SGD, sparse-regression and linear-bandit experiments.
#[derive(Debug, Parser)]
#[command(name = "streamsgd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dense last-iterate SGD for linear regression.
    Regress(RunArgs),
    /// Sparse SGD with online support recovery.
    Sparse(RunArgs),
    /// Epsilon-greedy contextual linear bandit.
    Bandit(RunArgs),
    /// Confidence-region coverage of the plug-in limiting variance.
    Infer(RunArgs),
    /// Numerical self-checks (eigen-solver, whitening, conic regions).
    Verify(RunArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML config file (a manifest from an earlier run also works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset; config and flags override its values.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write plot.svg.
    #[arg(long)]
    plot: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Shrinks the dimension and horizon by this factor.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
}

fn build_config(kind: ExperimentKind, args: RunArgs) -> Result<RunConfig> {
    let mut raw = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_raw(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RawConfig::default(),
    };
    if let Some(k) = raw.kind {
        if k != kind {
            bail!("config is for `{k}` but the `{kind}` subcommand was used");
        }
    }
    if let Some(name) = args.preset.as_ref().or(raw.preset.as_ref()) {
        if let Some(k) = preset(name)?.kind {
            if k != kind {
                bail!("preset `{name}` is a `{k}` experiment, not `{kind}`");
            }
        }
    }
    let flags = RawConfig {
        kind: Some(kind),
        preset: args.preset,
        seed: args.seed,
        horizon: args.horizon,
        replications: args.replications,
        out: args.out,
        plot: args.plot.then_some(true),
        jobs: args.jobs,
        scale: args.scale,
        ..RawConfig::default()
    };
    if flags.preset.is_some() {
        // a preset chosen on the command line replaces a manifest's expanded values
        raw.manifest = None;
    }
    raw = raw.overlay(flags);
    Ok(RunConfig::resolve(raw)?)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Presets => {
            for name in preset_names() {
                let kind = preset(name)?.kind.map_or("?", ExperimentKind::as_str);
                println!("{name}\t{kind}");
            }
            return Ok(ExitCode::SUCCESS);
        }
        Command::Regress(a) => (ExperimentKind::Regress, a),
        Command::Sparse(a) => (ExperimentKind::Sparse, a),
        Command::Bandit(a) => (ExperimentKind::Bandit, a),
        Command::Infer(a) => (ExperimentKind::Infer, a),
        Command::Verify(a) => (ExperimentKind::Verify, a),
    };
    let cfg = build_config(kind, args)?;
    let summary = run(&cfg)?;
    for line in &summary.lines {
        println!("{line}");
    }
    Ok(if summary.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use leadvar::experiment::SweepConfig;
use leadvar::simulate::ScenarioId;
use serde::Serialize;

use config::{EvaluateConfig, FitConfig, Layered, SimulateConfig};
use error::CliError;
use output::{decisions, Manifest, OutDir, MANIFEST};

#[derive(Parser)]
#[command(name = "leadvar", version, about = "Leading-indicator VAR models: simulate, fit, evaluate, sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a preset scenario into train/holdout CSVs plus the truth.
    Simulate(SimulateArgs),
    /// Fit one method at fixed hyperparameters.
    Fit(FitArgs),
    /// Tune by blocked cross-validation, then fit on all training data.
    CvFit(FitArgs),
    /// Score a fitted model on holdout data.
    Evaluate(EvaluateArgs),
    /// Training-size sweep over seeds and methods with paired tests.
    Sweep(SweepArgs),
    /// Re-run a previous run from its manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<ScenarioId>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_train: Option<usize>,
    #[arg(long)]
    t_holdout: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training panel CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    date_column: Option<String>,
    #[arg(long)]
    method: Option<String>,
    /// Lag order.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory written by `fit` or `cv-fit`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    holdout: Option<PathBuf>,
    /// Directory written by `simulate`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Competing model directory (repeatable).
    #[arg(long)]
    compare: Vec<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<ScenarioId>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    t_holdout: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => {
            let mut l = Layered::load(a.config.as_deref())?;
            l.set("scenario", a.scenario);
            l.set("seed", a.seed);
            l.set("t_train", a.t_train);
            l.set("t_holdout", a.t_holdout);
            l.set("burn_in", a.burn_in);
            dispatch(Resolved::Simulate(l.finish("simulate")?), &a.out)
        }
        Command::Fit(a) => dispatch(Resolved::Fit(fit_config(a.config.as_deref(), &a)?), &a.out),
        Command::CvFit(a) => dispatch(Resolved::CvFit(fit_config(a.config.as_deref(), &a)?), &a.out),
        Command::Evaluate(a) => {
            let mut l = Layered::load(a.config.as_deref())?;
            l.resolve_paths(&["model", "holdout", "truth", "compare"]);
            l.set_path("model", a.model.as_deref())?;
            l.set_path("holdout", a.holdout.as_deref())?;
            l.set_path("truth", a.truth.as_deref())?;
            if !a.compare.is_empty() {
                let abs = a.compare.iter().map(std::path::absolute).collect::<Result<Vec<_>, _>>();
                l.set("compare", Some(abs.map_err(|e| CliError::io(Path::new("."), e))?));
            }
            l.set("alpha", a.alpha);
            dispatch(Resolved::Evaluate(l.finish("evaluate")?), &a.out)
        }
        Command::Sweep(a) => {
            let mut l = Layered::load(a.config.as_deref())?;
            l.set("scenario", a.scenario);
            l.set("seeds", a.seeds);
            l.set("sizes", a.sizes);
            l.set("methods", a.methods);
            l.set("t_holdout", a.t_holdout);
            l.set("folds", a.folds);
            dispatch(Resolved::Sweep(l.finish("sweep")?), &a.out)
        }
        Command::Replay(a) => {
            let text = std::fs::read_to_string(&a.manifest).map_err(|e| CliError::io(&a.manifest, e))?;
            let m: Manifest = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", a.manifest.display())))?;
            let cfg = m.config;
            let bad = |e: serde_json::Error| CliError::usage(format!("manifest config: {e}"));
            let resolved = match m.command.as_str() {
                "simulate" => Resolved::Simulate(serde_json::from_value(cfg).map_err(bad)?),
                "fit" => Resolved::Fit(serde_json::from_value(cfg).map_err(bad)?),
                "cv-fit" => Resolved::CvFit(serde_json::from_value(cfg).map_err(bad)?),
                "evaluate" => Resolved::Evaluate(serde_json::from_value(cfg).map_err(bad)?),
                "sweep" => Resolved::Sweep(serde_json::from_value(cfg).map_err(bad)?),
                other => return Err(CliError::usage(format!("manifest has unknown command `{other}`"))),
            };
            dispatch(resolved, &a.out)
        }
    }
}

fn fit_config(file: Option<&Path>, a: &FitArgs) -> Result<FitConfig, CliError> {
    let mut l = Layered::load(file)?;
    l.resolve_paths(&["data"]);
    l.set_path("data", a.data.as_deref())?;
    l.set_in("schema", "date_column", a.date_column.clone());
    l.set("method", a.method.clone());
    l.set("p", a.p);
    l.set_in("hyper", "lambda", a.lambda);
    l.set_in("hyper", "kappa", a.kappa);
    l.set_in("hyper", "rank", a.rank);
    l.set("folds", a.folds);
    l.finish("fit")
}

enum Resolved {
    Simulate(SimulateConfig),
    Fit(FitConfig),
    CvFit(FitConfig),
    Evaluate(EvaluateConfig),
    Sweep(SweepConfig),
}

/// Runs one command into `out`; on failure everything written is removed.
fn dispatch(resolved: Resolved, out: &Path) -> Result<(), CliError> {
    let mut dir = OutDir::create(out)?;
    let result = (|| {
        let (name, config) = match &resolved {
            Resolved::Simulate(c) => {
                commands::simulate(c, &mut dir)?;
                ("simulate", to_value(c))
            }
            Resolved::Fit(c) => {
                commands::fit(c, false, &mut dir)?;
                ("fit", to_value(c))
            }
            Resolved::CvFit(c) => {
                commands::fit(c, true, &mut dir)?;
                ("cv-fit", to_value(c))
            }
            Resolved::Evaluate(c) => {
                commands::evaluate(c, &mut dir)?;
                ("evaluate", to_value(c))
            }
            Resolved::Sweep(c) => {
                commands::sweep(c, &mut dir)?;
                ("sweep", to_value(c))
            }
        };
        let mut outputs = dir.files();
        outputs.push(MANIFEST.to_string());
        let manifest = Manifest {
            tool: "leadvar".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: name.into(),
            config,
            decisions: decisions(),
            outputs,
        };
        dir.write_json(MANIFEST, &manifest)
    })();
    if result.is_err() {
        dir.discard();
    } else {
        eprintln!("wrote {}", dir.path().display());
    }
    result
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("configs serialize")
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use canary_audit::estimator::{estimate, AuditOutcome, Method};
use canary_audit::harness::{
    load_result, load_scores, preset, render, render_table, run_experiment_full, sweep_game, write_run_dir,
    ExperimentConfig, GameKind, ReportFormat, PRESET_NAMES,
};
use canary_audit::{AuditError, Result};

#[derive(Parser)]
#[command(name = "canary-audit", version, about = "One-run differential privacy auditing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write a run directory.
    Run {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Built-in configuration.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to runs/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lower bound from a single tally.
    Estimate {
        #[arg(long)]
        guesses: u64,
        #[arg(long)]
        correct: u64,
        #[arg(long, default_value_t = 2)]
        arity: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Render a finished run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Redo the budget sweep of one game from a run's persisted scores,
    /// with the grid and alpha of `--config`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        game: Game,
        /// Defaults to runs/<name>.
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// List built-in configurations.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Game {
    Binary,
    Kary,
}

fn default_dir(config: &ExperimentConfig) -> PathBuf {
    Path::new("runs").join(&config.name)
}

fn run(
    config: Option<PathBuf>,
    preset_name: Option<String>,
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = match (config, preset_name) {
        (Some(path), _) => ExperimentConfig::load(&path)?,
        (None, Some(name)) => preset(&name)?,
        (None, None) => return Err(AuditError::Config("pass --config or --preset".into())),
    };
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    cfg.validate()?;
    let out = out.unwrap_or_else(|| default_dir(&cfg));
    let output = run_experiment_full(&cfg)?;
    write_run_dir(&out, &output)?;
    print!("{}", render_table(&output.result)?);
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn report(input: &Path, format: Format) -> Result<()> {
    let result = load_result(input)?;
    let format = match format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
        Format::Table => ReportFormat::Table,
    };
    let text = render(&result, format)?;
    std::fs::write(input.join(format!("report.{}", format.extension())), &text)?;
    print!("{text}");
    Ok(())
}

fn sweep(config: &Path, game: Game, input: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = input.unwrap_or_else(|| default_dir(&cfg));
    let stored = load_result(&dir)?;
    let kind = match game {
        Game::Binary => GameKind::Binary,
        Game::Kary => GameKind::Kary,
    };
    let scores = load_scores(&dir, stored.config.trials)?;
    println!("trial,method,best_budget,guesses,correct,eps");
    for (trial, games) in scores.iter().enumerate() {
        let g = games
            .iter()
            .find(|g| g.game == kind)
            .ok_or_else(|| AuditError::Config(format!("run in {} has no {} game", dir.display(), kind.name())))?;
        for (method, s) in sweep_game(g, &cfg)? {
            println!(
                "{trial},{},{},{},{},{}",
                method.name(),
                s.best_budget,
                s.best.outcome.guesses,
                s.best.outcome.correct,
                s.best.eps
            );
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, preset, trials, seed, out } => run(config, preset, trials, seed, out),
        Command::Estimate { guesses, correct, arity, alpha } => {
            let outcome = AuditOutcome::with_alpha(guesses, correct, arity, alpha)?;
            let method = if arity == 2 { Method::Or } else { Method::OrFdp };
            let bound = estimate(outcome, method)?;
            println!(
                "eps_lb {} (guesses {guesses}, correct {correct}, arity {arity}, alpha {alpha})",
                bound.eps
            );
            Ok(())
        }
        Command::Report { input, format } => report(&input, format),
        Command::Sweep { config, game, input } => sweep(&config, game, input),
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

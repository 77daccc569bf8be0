use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use pursuit_cli::analyze::analyze;
use pursuit_cli::eval::{eval, EvalOptions, TRAJECTORY_FILE};
use pursuit_cli::selfcheck::{evader_checks, selfcheck};
use pursuit_cli::train::{train, TrainOptions};
use pursuit_cli::{ExperimentConfig, Strategy};

#[derive(Parser)]
#[command(name = "pursuit", about = "Pursuit-evasion experiments on the unit torus")]
struct Cli {
    /// Experiment configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding run.out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train learners through the configured curriculum.
    Train {
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many epochs in total, leaving a checkpoint.
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Measure capture success over a ratio sweep.
    Eval {
        /// greedy, pincer, random, cd_ddpg or cd_ddpg_partial.
        #[arg(long)]
        strategy: Option<String>,
        /// Checkpoint holding trained learners.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated velocity ratios.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Comma-separated evaluation seeds.
        #[arg(long, value_delimiter = ',')]
        eval_seeds: Option<Vec<u64>>,
    },
    /// Coordination and capture-angle analysis of a trajectory log.
    Analyze {
        /// Trajectory CSV; defaults to trajectories.csv in the output directory.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Run the built-in correctness checks.
    Selfcheck,
    /// Run the two reference evader cases.
    EvaderCheck,
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.run.out_dir = out.clone();
    }
    Ok(config)
}

fn report(lines: impl IntoIterator<Item = (bool, String)>) -> ExitCode {
    let mut ok = true;
    for (passed, line) in lines {
        println!("{line}");
        ok &= passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Train { resume, stop_after } => {
            let summary = train(&config, &TrainOptions { resume, stop_after })?;
            let last = summary.curve.last();
            println!(
                "{} after {} epochs; curve {}, checkpoint {}",
                if summary.finished { "finished" } else { "stopped" },
                summary.curve.len(),
                summary.curve_csv.display(),
                summary.checkpoint.display()
            );
            if let Some(row) = last {
                println!("last epoch: ratio {:.3}, return {:.3}", row.ratio, row.mean_return);
            }
        }
        Command::Eval {
            strategy,
            checkpoint,
            ratios,
            episodes,
            eval_seeds,
        } => {
            let strategy = match strategy {
                Some(s) => match Strategy::parse(&s) {
                    Some(k) => k,
                    None => bail!("unknown strategy `{s}`"),
                },
                None if checkpoint.is_some() => config.run.strategy,
                None => Strategy::Greedy,
            };
            let mut opts = EvalOptions::from_config(&config, strategy);
            opts.checkpoint = checkpoint;
            if let Some(r) = ratios {
                opts.ratios = r;
            }
            if let Some(n) = episodes {
                opts.episodes = n;
            }
            if let Some(s) = eval_seeds {
                opts.seeds = s;
            }
            for row in eval(&config, &opts)? {
                println!(
                    "{} ratio {:.3}: {}/{} captured ({:.3})",
                    row.strategy, row.ratio, row.captures, row.episodes, row.success_rate
                );
            }
        }
        Command::Analyze { trajectories } => {
            let path = trajectories.unwrap_or_else(|| config.run.out_dir.join(TRAJECTORY_FILE));
            let report = analyze(&config, &path)?;
            for r in &report.ratios {
                println!(
                    "ratio {:.3}: success {:.3}, mean IC {:.4} bits, high-influence {:.3}",
                    r.ratio,
                    r.success_rate,
                    r.coordination.mean_mi_bits,
                    r.coordination.mean_high_influence_fraction
                );
            }
        }
        Command::Selfcheck => {
            return Ok(report(selfcheck(&config).into_iter().map(|c| (c.passed, c.line()))));
        }
        Command::EvaderCheck => {
            return Ok(report(evader_checks().into_iter().map(|c| (c.passed, c.line()))));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

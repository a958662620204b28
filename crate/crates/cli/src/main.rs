use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use docg_cli::commands::{self, BuildDatasetArgs, EditorArgs, EvaluateArgs, OptimizeArgs, ScoreArgs, TrainIndicatorArgs};
use docg_cli::config::WorkspaceConfig;
use docg_cli::workspace::Workspace;
use docg_cli::exit_code;
use docg_core::Result;
use serde_json::Value;

/// Audience-aware content optimisation: influence indicator, RL editor and evaluation.
#[derive(Parser)]
#[command(name = "docg", version)]
struct Cli {
    /// Config file (TOML). Defaults to ./docg.toml when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory; overrides workspace.dir.
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct EditorFlags {
    /// Content id of the dataset record whose audience is targeted.
    #[arg(long)]
    audience: Option<String>,
    /// Candidate messages, JSONL {id, text}.
    #[arg(long)]
    messages: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Editor seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl From<EditorFlags> for EditorArgs {
    fn from(f: EditorFlags) -> Self {
        EditorArgs {
            audience: f.audience,
            messages: f.messages,
            episodes: f.episodes,
            seed: f.seed,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Split interactions and build labelled quadruples.
    BuildDataset {
        #[arg(long)]
        interactions: Option<PathBuf>,
        /// Output directory (default <workspace>/dataset).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Train:test ratio, e.g. 4:1.
        #[arg(long)]
        split: Option<String>,
    },
    /// Train the pairwise diffusion estimator.
    TrainIndicator {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Influence score of one content for one audience, as JSON.
    Score {
        #[arg(long)]
        audience: Option<String>,
        /// Score a dataset record (its own content is left out of histories).
        #[arg(long, conflicts_with = "message")]
        content_id: Option<String>,
        /// Score free text.
        #[arg(long)]
        message: Option<String>,
    },
    /// Observed versus permuted content/audience pairs with a Mann-Whitney test.
    PermutationTest {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the editing policy against the indicator.
    TrainEditor(EditorFlags),
    /// Rewrite one message with the trained policy.
    Optimize {
        #[arg(long)]
        message: String,
        #[arg(long)]
        audience: Option<String>,
        /// Edit steps (default editor.horizon).
        #[arg(long)]
        steps: Option<usize>,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Compare the learned policy with greedy and random editing.
    Evaluate {
        #[command(flatten)]
        editor: EditorFlags,
        /// Also train full and gain-only policies over several seeds.
        #[arg(long)]
        ablation: bool,
    },
    /// Write a planted synthetic world and a matching config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load_config(cli: &Cli) -> Result<WorkspaceConfig> {
    let path = cli.config.clone().or_else(|| {
        let p = PathBuf::from("docg.toml");
        p.exists().then_some(p)
    });
    let mut cfg = match path {
        Some(p) => WorkspaceConfig::load(&p)?,
        None => {
            let mut c = WorkspaceConfig::default();
            c.apply_env(|k| std::env::var(k).ok());
            c
        }
    };
    if let Some(w) = &cli.workspace {
        cfg.workspace.dir = w.clone();
    }
    Ok(cfg)
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    if let Cmd::Synth { out, seed } = &cli.cmd {
        let summary = commands::synth(out, *seed)?;
        return print_json(&summary);
    }
    let ws = Workspace::new(load_config(&cli)?);
    let (name, metrics): (&str, Value) = match cli.cmd {
        Cmd::BuildDataset {
            interactions,
            out,
            seed,
            split,
        } => {
            let m = commands::build_dataset(
                &ws,
                &BuildDatasetArgs {
                    interactions,
                    out,
                    seed,
                    split,
                },
            )?;
            print_json(&m)?;
            ("build-dataset", m)
        }
        Cmd::TrainIndicator { epochs, seed } => {
            let m = commands::train_indicator(&ws, &TrainIndicatorArgs { epochs, seed })?;
            println!(
                "test auc {:.4}, f1 {:.4}",
                m["test"]["auc"].as_f64().unwrap_or(f64::NAN),
                m["test"]["f1"].as_f64().unwrap_or(f64::NAN)
            );
            ("train-indicator", m)
        }
        Cmd::Score {
            audience,
            content_id,
            message,
        } => {
            let r = commands::score(
                &ws,
                &ScoreArgs {
                    audience,
                    content_id,
                    message,
                },
            )?;
            print_json(&r)?;
            ("score", serde_json::to_value(&r)?)
        }
        Cmd::PermutationTest { seed } => {
            let m = commands::permutation_test(&ws, seed)?;
            print_json(&m)?;
            ("permutation-test", m)
        }
        Cmd::TrainEditor(flags) => {
            let m = commands::train_editor_cmd(&ws, &flags.into())?;
            print_json(&m)?;
            ("train-editor", m)
        }
        Cmd::Optimize {
            message,
            audience,
            steps,
            json,
        } => {
            let o = commands::optimize(
                &ws,
                &OptimizeArgs {
                    message,
                    audience,
                    steps,
                },
            )?;
            if json {
                print_json(&o)?;
            } else {
                print!("{}", o.to_text());
            }
            ("optimize", serde_json::to_value(&o)?)
        }
        Cmd::Evaluate { editor, ablation } => {
            let m = commands::evaluate_cmd(
                &ws,
                &EvaluateArgs {
                    editor: editor.into(),
                    ablation,
                },
            )?;
            print!("{}", std::fs::read_to_string(ws.path("eval/report.md")).unwrap_or_default());
            ("evaluate", m)
        }
        Cmd::Synth { .. } => unreachable!(),
    };
    let log = ws.record_run(name, started, metrics)?;
    log::info!("run log written to {}", log.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

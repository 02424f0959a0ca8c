//! Command-line surface for story generation, conflict analysis, metrics and
//! knowledge-graph inspection.

pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use storyloom_core::pipeline::StepId;

use crate::config::{Mode, RunConfig};
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "storyloom", version, about = "Plan, write and check long-form stories")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set top_k=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Shorthand for `--set mode=...`.
    #[arg(long, global = true, value_parser = ["live", "replay"])]
    pub mode: Option<String>,
    /// Shorthand for `--set fixture=...`.
    #[arg(long, global = true)]
    pub fixture: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a story from a premise file.
    Generate {
        #[arg(long)]
        premise: PathBuf,
        /// Output directory; re-running on the same directory resumes.
        #[arg(long)]
        out: PathBuf,
        /// Stop right after the given step (premise, rough, outline:S, chapter:S.T).
        #[arg(long, hide = true, value_parser = parse_step)]
        halt_after: Option<StepId>,
    },
    /// Compute the conflict rate of a knowledge graph.
    Analyze {
        #[arg(long)]
        kg: PathBuf,
        /// Use the deterministic stub judge instead of the model.
        #[arg(long)]
        stub_judge: bool,
        /// Report file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Word count, Ent-2 and (with --kg) conflict rate of a story.
    Eval {
        #[arg(long)]
        story: PathBuf,
        #[arg(long)]
        kg: Option<PathBuf>,
        #[arg(long)]
        stub_judge: bool,
        /// Report file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect or query a stored knowledge graph.
    Kg {
        #[command(subcommand)]
        action: KgAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum KgAction {
    /// Print node, relation and quadruple counts.
    Inspect {
        #[arg(long)]
        kg: PathBuf,
    },
    /// Print the context sentences relevant to a text.
    Query {
        #[arg(long)]
        kg: PathBuf,
        text: String,
    },
}

fn parse_step(s: &str) -> Result<StepId, String> {
    s.parse()
}

impl GlobalArgs {
    pub fn load_config(&self) -> Result<RunConfig, CliError> {
        let mut overrides = Vec::new();
        if let Some(m) = &self.mode {
            overrides.push(format!("mode={m}"));
        }
        if let Some(f) = &self.fixture {
            overrides.push(format!("fixture={}", toml_string(&f.to_string_lossy())));
        }
        overrides.extend(self.overrides.iter().cloned());
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Runs one parsed command line.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Kg { action: KgAction::Inspect { kg } } => commands::cmd_kg_inspect(kg, out),
        command => {
            let config = cli.global.load_config()?;
            if config.mode == Mode::Replay {
                log::info!("replay mode, fixture {:?}", config.fixture);
            }
            match command {
                Command::Generate { premise, out: dir, halt_after } => {
                    commands::cmd_generate(premise, &config, dir, *halt_after, out)
                }
                Command::Analyze { kg, stub_judge, out: report } => {
                    commands::cmd_analyze(kg, &config, *stub_judge, report, out)
                }
                Command::Eval { story, kg, stub_judge, out: report } => {
                    commands::cmd_eval(story, kg.as_deref(), &config, *stub_judge, report.as_deref(), out)
                }
                Command::Kg { action: KgAction::Query { kg, text } } => commands::cmd_kg_query(kg, text, &config, out),
                Command::Kg { action: KgAction::Inspect { .. } } => unreachable!("handled above"),
            }
        }
    }
}

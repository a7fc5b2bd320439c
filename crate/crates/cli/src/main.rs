//! `rarekg`: validate graphs, activate concepts, evaluate corpora and
//! explain individual scores.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or validation
//! errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rarekg_core::eval::{self, Averaging, ReportFormat};
use rarekg_core::{ConceptId, Engine, EngineConfig, KnowledgeGraph, SessionHistory};

#[derive(Parser)]
#[command(name = "rarekg", version, about = "Rare-disease concept activation over a three-layer knowledge graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a graph, printing layer counts.
    #[command(visible_alias = "validate")]
    Ingest {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Activate concepts for a query.
    Activate {
        #[command(flatten)]
        common: QueryArgs,
        /// Session file carrying previously activated concepts; created if missing.
        #[arg(long)]
        session: Option<PathBuf>,
    },
    /// Score the engine on a labeled corpus.
    Evaluate {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated Top-N cutoffs.
        #[arg(long, value_delimiter = ',', default_value = "3,10")]
        top_n: Vec<usize>,
        /// Average per-case precision and recall instead of pooling counts.
        #[arg(long = "macro")]
        macro_average: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Show every intermediate value behind one concept's score.
    Explain {
        #[command(flatten)]
        common: QueryArgs,
        #[arg(long)]
        concept: ConceptId,
        /// Session file to read (never written).
        #[arg(long)]
        session: Option<PathBuf>,
    },
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    kg: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long, default_value = "en")]
    lang: String,
    /// Engine config (TOML); falls back to $RAREKG_CONFIG, then defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Machine,
}

fn load_engine(kg: &Path, config: Option<&Path>) -> Result<Engine> {
    let config = EngineConfig::resolve(config)?;
    let graph = KnowledgeGraph::load(kg)?;
    Ok(Engine::new(graph, config)?)
}

fn open_session(path: Option<&Path>, engine: &Engine) -> Result<SessionHistory> {
    match path {
        Some(p) if p.exists() => Ok(SessionHistory::load(p)?),
        _ => Ok(engine.new_session()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { kg, format } => {
            let graph = KnowledgeGraph::load(&kg)?;
            let counts = graph.layer_counts();
            match format {
                Format::Machine => println!("{}", serde_json::to_string_pretty(&counts)?),
                Format::Table => {
                    println!("concepts: {}", counts.concepts);
                    println!("taxonomy nodes: {}", counts.taxonomy);
                    println!("clinical profiles: {}", counts.clinical);
                    println!("instance records: {}", counts.instances);
                }
            }
        }
        Command::Activate { common, session } => {
            let engine = load_engine(&common.kg, common.config.as_deref())?;
            let mut history = open_session(session.as_deref(), &engine)?;
            let result = engine.activate(&common.query, &common.lang, &mut history)?;
            if let Some(p) = &session {
                history.save(p)?;
            }
            match common.format {
                Format::Machine => println!("{}", result.to_json()),
                Format::Table => print!("{}", result.render_trace()),
            }
        }
        Command::Evaluate {
            kg,
            corpus,
            top_n,
            macro_average,
            config,
            format,
        } => {
            let engine = load_engine(&kg, config.as_deref())?;
            let cases = eval::load_corpus(&corpus)?;
            let averaging = if macro_average { Averaging::Macro } else { Averaging::Micro };
            let report = eval::evaluate(&cases, &engine, &top_n, averaging)?;
            let format = match format {
                Format::Machine => ReportFormat::Machine,
                Format::Table => ReportFormat::Table,
            };
            print!("{}", eval::report_render(&report, format));
        }
        Command::Explain {
            common,
            concept,
            session,
        } => {
            let engine = load_engine(&common.kg, common.config.as_deref())?;
            let history = open_session(session.as_deref(), &engine)?;
            let explanation = engine
                .explain(&common.query, &common.lang, &concept, &history)
                .with_context(|| format!("explain {concept}"))?;
            match common.format {
                Format::Machine => println!("{}", serde_json::to_string_pretty(&explanation)?),
                Format::Table => print!("{}", explanation.render()),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

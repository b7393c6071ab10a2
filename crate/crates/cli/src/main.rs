use std::io::{IsTerminal, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use convxai_cli::commands::{self, CliError};
use convxai_cli::generator::HttpGenerator;
use convxai_cli::server;
use convxai_core::service::{Service, ServiceConfig, DEFAULT_MAX_ABSTRACT_CHARS};

#[derive(Parser)]
#[command(name = "convxai", version, about = "Conversational explanations for abstract writing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train artifacts from a JSONL corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "artifacts")]
        artifacts_dir: PathBuf,
        /// Only train this conference.
        #[arg(long)]
        conference: Option<String>,
        /// Fail on the first malformed corpus line instead of skipping it.
        #[arg(long)]
        strict: bool,
    },
    /// Serve the wire protocol over HTTP.
    Serve {
        #[arg(long, default_value = "artifacts")]
        artifacts_dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Session event logs and snapshots.
        #[arg(long, default_value = "logs")]
        log_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_ABSTRACT_CHARS)]
        max_chars: usize,
    },
    /// Review abstracts (files, or blank-line separated stdin) as JSON lines.
    Score {
        #[arg(long, default_value = "artifacts")]
        artifacts_dir: PathBuf,
        #[arg(long)]
        conference: String,
        files: Vec<PathBuf>,
    },
    /// Replay a session log and print its transcript.
    Replay {
        #[arg(long, default_value = "artifacts")]
        artifacts_dir: PathBuf,
        log: PathBuf,
        /// Exit with an error when a replayed response differs from the log.
        #[arg(long)]
        strict: bool,
    },
    /// Write a synthetic labeled corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Sentences per conference.
        #[arg(long, default_value_t = 1000)]
        sentences: usize,
        #[arg(long, default_value_t = 2022)]
        seed: u64,
    },
}

fn read_inputs(files: &[PathBuf]) -> Result<Vec<(String, String)>, CliError> {
    if files.is_empty() {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|source| CliError::Io { path: "<stdin>".into(), source })?;
        return Ok(commands::split_abstracts(&text)
            .into_iter()
            .enumerate()
            .map(|(i, a)| (format!("stdin:{}", i + 1), a))
            .collect());
    }
    files
        .iter()
        .map(|p| {
            std::fs::read_to_string(p)
                .map(|t| (p.display().to_string(), t))
                .map_err(|source| CliError::Io { path: p.clone(), source })
        })
        .collect()
}

fn serve(artifacts_dir: PathBuf, host: String, port: u16, log_dir: PathBuf, max_chars: usize) -> Result<(), CliError> {
    let artifacts = Arc::new(commands::load_artifacts(&artifacts_dir)?);
    let config = ServiceConfig { max_abstract_chars: max_chars, log_dir: Some(log_dir), ..Default::default() };
    let mut service = Service::new(artifacts, config)?;
    match HttpGenerator::from_env() {
        Ok(Some(g)) => {
            tracing::info!("external rewrite generator enabled");
            service = service.with_generator(Arc::new(g));
        }
        Ok(None) => tracing::info!("no external generator configured; counterfactuals use retrieval"),
        Err(e) => tracing::warn!(error = %e, "external generator disabled"),
    }
    let recovered = service.recover()?;
    tracing::info!(recovered, "sessions restored from logs");
    let app = server::router(Arc::new(service));
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io { path: "<runtime>".into(), source })?;
    runtime.block_on(async move {
        let addr = format!("{host}:{port}");
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|source| CliError::Io { path: addr.clone().into(), source })?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|source| CliError::Io { path: addr.into(), source })
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr();
    match cli.command {
        Command::Train { corpus, artifacts_dir, conference, strict } => {
            let summary = commands::train(&corpus, &artifacts_dir, strict, conference.as_deref(), &mut stderr)?;
            let _ = writeln!(stderr, "{summary}");
        }
        Command::Serve { artifacts_dir, port, host, log_dir, max_chars } => {
            serve(artifacts_dir, host, port, log_dir, max_chars)?;
        }
        Command::Score { artifacts_dir, conference, files } => {
            let artifacts = commands::load_artifacts(&artifacts_dir)?;
            let inputs = read_inputs(&files)?;
            if inputs.is_empty() {
                return Err(CliError::Usage("no abstracts to score".into()));
            }
            commands::score(&artifacts, &conference, &inputs, &mut stdout)?;
        }
        Command::Replay { artifacts_dir, log, strict } => {
            let artifacts = commands::load_artifacts(&artifacts_dir)?;
            commands::replay_log(&artifacts, &log, strict, &mut stdout, &mut stderr)?;
        }
        Command::Synth { out, sentences, seed } => {
            let summary = commands::synth(&out, sentences, seed)?;
            let _ = writeln!(stderr, "{summary}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        // output piped into `head` and the like
        Err(CliError::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

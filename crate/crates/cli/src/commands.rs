//! Offline verbs: train, score, replay, synth.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use convxai_core::analysis::{analyze_abstract, AbstractDocument, AnalysisError};
use convxai_core::artifacts::{ArtifactError, Artifacts, TrainConfig};
use convxai_core::corpus::{ingest_corpus, CorpusError};
use convxai_core::exec::Exec;
use convxai_core::review::ReviewConfig;
use convxai_core::service::{read_log, replay, ServiceConfig, ServiceError};
use convxai_core::synth::{synth_corpus, SynthConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Artifacts(#[from] ArtifactError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{input}: {error}")]
    Analysis { input: String, error: AnalysisError },
    #[error("unknown conference `{name}`; available: {}", available.join(", "))]
    UnknownConference { name: String, available: Vec<String> },
    #[error("corpus has no abstracts for conference `{0}`")]
    EmptyConference(String),
    #[error("replay diverged at events {0:?}")]
    ReplayMismatch(Vec<u64>),
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Trains artifacts from a JSONL corpus. Returns a one-line summary.
pub fn train(
    corpus: &Path,
    artifacts_dir: &Path,
    strict: bool,
    conference: Option<&str>,
    warn: &mut dyn Write,
) -> Result<String, CliError> {
    let ingested = ingest_corpus(corpus, strict)?;
    for issue in &ingested.issues {
        let _ = writeln!(warn, "warning: line {}: {}", issue.line, issue.message);
    }
    let mut corpus = ingested.corpus;
    if let Some(c) = conference {
        corpus = corpus.filter_conference(c);
        if corpus.is_empty() {
            return Err(CliError::EmptyConference(c.to_string()));
        }
    }
    let start = Instant::now();
    let artifacts = Artifacts::train(&corpus, &TrainConfig::default())?;
    artifacts.save(artifacts_dir)?;
    Ok(format!(
        "trained on {} abstracts ({} sentences, {} skipped lines) for {} in {:.1?}; artifacts in {}",
        corpus.len(),
        corpus.sentence_count(),
        ingested.issues.len(),
        artifacts.conference_names().join(", "),
        start.elapsed(),
        artifacts_dir.display()
    ))
}

#[derive(Serialize)]
pub struct ScoreReport<'a> {
    pub source: &'a str,
    pub conference: &'a str,
    pub document: AbstractDocument,
}

/// Splits stdin-style input into abstracts at blank lines.
pub fn split_abstracts(text: &str) -> Vec<String> {
    text.split("\n\n")
        .map(|block| block.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|a| !a.is_empty())
        .collect()
}

/// Reviews each `(source, text)` abstract and writes one JSON line per
/// abstract to `out`.
pub fn score(
    artifacts: &Artifacts,
    conference: &str,
    abstracts: &[(String, String)],
    out: &mut dyn Write,
) -> Result<usize, CliError> {
    let ctx = artifacts.context(conference, None).ok_or_else(|| CliError::UnknownConference {
        name: conference.to_string(),
        available: artifacts.conference_names(),
    })?;
    let review = ReviewConfig::default();
    for (source, text) in abstracts {
        let document = analyze_abstract(text, 1, &ctx, &review)
            .map_err(|error| CliError::Analysis { input: source.clone(), error })?;
        let line = serde_json::to_string(&ScoreReport { source, conference, document }).expect("reports serialize");
        writeln!(out, "{line}").map_err(io_err(Path::new("<stdout>")))?;
    }
    Ok(abstracts.len())
}

/// Replays a session log with the generator disabled and writes its
/// transcript. Divergent events are an error only under `strict`.
pub fn replay_log(
    artifacts: &Artifacts,
    log: &Path,
    strict: bool,
    out: &mut dyn Write,
    warn: &mut dyn Write,
) -> Result<usize, CliError> {
    let entries = read_log(log)?;
    let report = replay(artifacts, &ServiceConfig::default(), &entries)?;
    out.write_all(report.transcript(&entries).as_bytes()).map_err(io_err(Path::new("<stdout>")))?;
    if !report.is_identical() {
        let _ = writeln!(warn, "warning: {} events differ from the log: {:?}", report.mismatches.len(), report.mismatches);
        if strict {
            return Err(CliError::ReplayMismatch(report.mismatches));
        }
    }
    Ok(report.events)
}

/// Writes a synthetic corpus as JSONL.
pub fn synth(out: &Path, sentences_per_conference: usize, seed: u64) -> Result<String, CliError> {
    let corpus = synth_corpus(&SynthConfig { sentences_per_conference, seed, ..Default::default() });
    std::fs::write(out, corpus.to_jsonl()).map_err(io_err(out))?;
    Ok(format!("wrote {} abstracts ({} sentences) to {}", corpus.len(), corpus.sentence_count(), out.display()))
}

pub fn load_artifacts(dir: &Path) -> Result<Artifacts, CliError> {
    Ok(Artifacts::load(dir, Exec::default())?)
}

//! Session-oriented service: sessions over shared read-only artifacts, an
//! append-only event log per session, snapshots, replay and usage analytics.
//!
//! Each state-changing call computes its response on a copy of the session
//! state, appends one event (request and response) to the log, and only then
//! commits the new state and returns. Replaying a log against the same
//! artifacts therefore reproduces every response.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_abstract, AbstractDocument, AnalysisError};
use crate::artifacts::Artifacts;
use crate::dialogue::{DialogueEnv, DialogueError, DialogueResponse, DialogueState, UsageStats};
use crate::explain::TextGenerator;
use crate::review::ReviewConfig;
use crate::templates::Slots;

pub const DEFAULT_MAX_ABSTRACT_CHARS: usize = 10_000;
pub const DEFAULT_SNAPSHOT_EVERY: u64 = 16;
/// Session tokens are 32 lowercase hex digits.
pub const SESSION_ID_LEN: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown conference `{name}`; available: {}", available.join(", "))]
    UnknownConference { name: String, available: Vec<String> },
    #[error("unknown or expired session token")]
    UnknownSession,
    #[error("the abstract is empty")]
    EmptyAbstract,
    #[error("the abstract has {len} characters, more than the limit of {max}")]
    AbstractTooLong { len: usize, max: usize },
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
    #[error("analysis failed: {0}")]
    Analysis(AnalysisError),
    #[error("event log {path}: {source}")]
    Log { path: PathBuf, source: std::io::Error },
    #[error("event log {path} line {line}: {source}")]
    Corrupt { path: PathBuf, line: usize, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    CreateSession { conference: String },
    SubmitAbstract { text: String },
    SelectSentence {
        sentence_index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        revision: Option<u64>,
    },
    Chat { utterance: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub conference: String,
    pub greeting: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Response {
    Session(SessionInfo),
    Document(AbstractDocument),
    Dialogue(DialogueResponse),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub session_id: String,
    pub timestamp_ms: u64,
    pub request: Request,
    pub response: Response,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Sequence number of the last event folded into `state`.
    pub seq: u64,
    pub conference: String,
    pub state: DialogueState,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_abstract_chars: usize,
    /// Directory for `<session>.jsonl` logs and snapshots; `None` keeps logs
    /// in memory only.
    pub log_dir: Option<PathBuf>,
    pub snapshot_every: u64,
    pub review: ReviewConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_abstract_chars: DEFAULT_MAX_ABSTRACT_CHARS,
            log_dir: None,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            review: ReviewConfig::default(),
        }
    }
}

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64))
}

struct Session {
    conference: String,
    state: DialogueState,
    entries: Vec<LogEntry>,
    file: Option<(PathBuf, File)>,
}

pub struct Service {
    artifacts: Arc<Artifacts>,
    generator: Option<Arc<dyn TextGenerator>>,
    config: ServiceConfig,
    clock: Clock,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

/// Applies one request to a session state. Pure given the artifacts, so the
/// live service and replay share it.
fn apply(
    artifacts: &Artifacts,
    generator: Option<&dyn TextGenerator>,
    config: &ServiceConfig,
    conference: &str,
    state: &mut DialogueState,
    request: &Request,
    timestamp_ms: u64,
) -> Result<Response, ServiceError> {
    let ctx = artifacts.context(conference, generator).ok_or_else(|| ServiceError::UnknownConference {
        name: conference.to_string(),
        available: artifacts.conference_names(),
    })?;
    let env = DialogueEnv { explain: ctx, nlu: &artifacts.nlu, review: config.review };
    match request {
        Request::CreateSession { conference } => Ok(Response::Session(SessionInfo {
            session_id: state.session_id.clone(),
            conference: conference.clone(),
            greeting: artifacts.templates.render("dialogue.greeting", &Slots::new()),
        })),
        Request::SubmitAbstract { text } => {
            let len = text.chars().count();
            if len > config.max_abstract_chars {
                return Err(ServiceError::AbstractTooLong { len, max: config.max_abstract_chars });
            }
            let revision = state.document.as_ref().map_or(1, |d| d.revision + 1);
            let doc = analyze_abstract(text, revision, &ctx, &config.review).map_err(|e| match e {
                AnalysisError::Empty => ServiceError::EmptyAbstract,
                other => ServiceError::Analysis(other),
            })?;
            state.set_document(doc.clone());
            Ok(Response::Document(doc))
        }
        Request::SelectSentence { sentence_index, revision } => {
            Ok(Response::Dialogue(state.select_sentence(*sentence_index, *revision, &env)?))
        }
        Request::Chat { utterance } => Ok(Response::Dialogue(state.respond(utterance, &env, timestamp_ms)?)),
    }
}

impl Service {
    pub fn new(artifacts: Arc<Artifacts>, config: ServiceConfig) -> Result<Self, ServiceError> {
        if let Some(dir) = &config.log_dir {
            fs::create_dir_all(dir).map_err(|source| ServiceError::Log { path: dir.clone(), source })?;
        }
        Ok(Self { artifacts, generator: None, config, clock: system_clock(), sessions: RwLock::new(HashMap::new()) })
    }

    pub fn with_generator(mut self, generator: Arc<dyn TextGenerator>) -> Self {
        self.generator = Some(generator);
        self
    }

    /// Replaces the wall clock (timestamps only feed the logs and turn
    /// records).
    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn artifacts(&self) -> &Artifacts {
        &self.artifacts
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn conferences(&self) -> Vec<String> {
        self.artifacts.conference_names()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions.read().get(id).cloned().ok_or(ServiceError::UnknownSession)
    }

    pub fn create_session(&self, conference: &str) -> Result<SessionInfo, ServiceError> {
        if !self.artifacts.conferences.contains_key(conference) {
            return Err(ServiceError::UnknownConference {
                name: conference.to_string(),
                available: self.conferences(),
            });
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let file = match &self.config.log_dir {
            Some(dir) => {
                let path = dir.join(format!("{id}.jsonl"));
                let f = OpenOptions::new()
                    .create_new(true)
                    .append(true)
                    .open(&path)
                    .map_err(|source| ServiceError::Log { path: path.clone(), source })?;
                Some((path, f))
            }
            None => None,
        };
        let session = Session {
            conference: conference.to_string(),
            state: DialogueState::new(id.clone()),
            entries: Vec::new(),
            file,
        };
        let session = Arc::new(Mutex::new(session));
        let response = {
            let mut s = session.lock();
            self.commit(&mut s, Request::CreateSession { conference: conference.to_string() })?
        };
        self.sessions.write().insert(id, session);
        match response {
            Response::Session(info) => Ok(info),
            _ => unreachable!("create yields session info"),
        }
    }

    /// Computes, logs, then commits one request on a locked session.
    fn commit(&self, session: &mut Session, request: Request) -> Result<Response, ServiceError> {
        let timestamp_ms = (self.clock)();
        let mut next = session.state.clone();
        let response = apply(
            &self.artifacts,
            self.generator.as_deref(),
            &self.config,
            &session.conference,
            &mut next,
            &request,
            timestamp_ms,
        )?;
        let entry = LogEntry {
            seq: session.entries.len() as u64,
            session_id: next.session_id.clone(),
            timestamp_ms,
            request,
            response: response.clone(),
        };
        if let Some((path, file)) = &mut session.file {
            let mut line = serde_json::to_string(&entry).expect("log entries serialize");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| ServiceError::Log { path: path.clone(), source })?;
        }
        session.entries.push(entry);
        session.state = next;
        let seq = session.entries.len() as u64 - 1;
        if self.config.snapshot_every > 0 && (seq + 1).is_multiple_of(self.config.snapshot_every) {
            self.write_snapshot(session, seq)?;
        }
        Ok(response)
    }

    fn write_snapshot(&self, session: &Session, seq: u64) -> Result<(), ServiceError> {
        let Some(dir) = &self.config.log_dir else { return Ok(()) };
        let snap = Snapshot { seq, conference: session.conference.clone(), state: session.state.clone() };
        let path = dir.join(format!("{}.snapshot.json", session.state.session_id));
        let tmp = path.with_extension("json.tmp");
        let json = serde_json::to_string(&snap).expect("snapshots serialize");
        fs::write(&tmp, json)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|source| ServiceError::Log { path, source })
    }

    pub fn submit_abstract(&self, session_id: &str, text: &str) -> Result<AbstractDocument, ServiceError> {
        if text.trim().is_empty() {
            return Err(ServiceError::EmptyAbstract);
        }
        let session = self.session(session_id)?;
        let mut s = session.lock();
        match self.commit(&mut s, Request::SubmitAbstract { text: text.to_string() })? {
            Response::Document(doc) => Ok(doc),
            _ => unreachable!("submission yields a document"),
        }
    }

    pub fn select_sentence(
        &self,
        session_id: &str,
        sentence_index: usize,
        revision: Option<u64>,
    ) -> Result<DialogueResponse, ServiceError> {
        let session = self.session(session_id)?;
        let mut s = session.lock();
        match self.commit(&mut s, Request::SelectSentence { sentence_index, revision })? {
            Response::Dialogue(r) => Ok(r),
            _ => unreachable!("selection yields a dialogue response"),
        }
    }

    pub fn post_chat(&self, session_id: &str, utterance: &str) -> Result<DialogueResponse, ServiceError> {
        let session = self.session(session_id)?;
        let mut s = session.lock();
        match self.commit(&mut s, Request::Chat { utterance: utterance.to_string() })? {
            Response::Dialogue(r) => Ok(r),
            _ => unreachable!("chat yields a dialogue response"),
        }
    }

    pub fn session_log(&self, session_id: &str) -> Result<Vec<LogEntry>, ServiceError> {
        Ok(self.session(session_id)?.lock().entries.clone())
    }

    pub fn session_state(&self, session_id: &str) -> Result<DialogueState, ServiceError> {
        Ok(self.session(session_id)?.lock().state.clone())
    }

    /// Usage counts for one session, or across all sessions. With a log
    /// directory the counts come from the persisted logs.
    pub fn usage_stats(&self, session_id: Option<&str>) -> Result<UsageStats, ServiceError> {
        match (session_id, &self.config.log_dir) {
            (Some(id), _) => Ok(usage_from_log(&self.session_log(id)?)),
            (None, Some(dir)) => usage_from_dir(dir),
            (None, None) => {
                let mut total = UsageStats::default();
                for s in self.sessions.read().values() {
                    total.merge(&usage_from_log(&s.lock().entries));
                }
                Ok(total)
            }
        }
    }

    /// Reloads every session found in the log directory: the latest snapshot
    /// (when present) plus replay of the events after it.
    pub fn recover(&self) -> Result<usize, ServiceError> {
        let Some(dir) = self.config.log_dir.clone() else { return Ok(0) };
        let mut count = 0;
        for path in log_files(&dir)? {
            let entries = read_log(&path)?;
            let Some(first) = entries.first() else { continue };
            let Request::CreateSession { conference } = &first.request else { continue };
            let id = first.session_id.clone();
            let snap_path = dir.join(format!("{id}.snapshot.json"));
            let snapshot: Option<Snapshot> = fs::read_to_string(&snap_path)
                .ok()
                .and_then(|text| serde_json::from_str(&text).ok());
            let (mut state, start) = match snapshot {
                Some(s) if (s.seq as usize) < entries.len() => (s.state, s.seq as usize + 1),
                _ => (DialogueState::new(id.clone()), 0),
            };
            for e in &entries[start..] {
                apply(&self.artifacts, None, &self.config, conference, &mut state, &e.request, e.timestamp_ms)?;
            }
            let file = OpenOptions::new()
                .append(true)
                .open(&path)
                .map_err(|source| ServiceError::Log { path: path.clone(), source })?;
            let session = Session { conference: conference.clone(), state, entries, file: Some((path, file)) };
            self.sessions.write().insert(id, Arc::new(Mutex::new(session)));
            count += 1;
        }
        Ok(count)
    }
}

/// Counts resolved chat intents recorded in a log.
pub fn usage_from_log(entries: &[LogEntry]) -> UsageStats {
    let mut stats = UsageStats::default();
    for e in entries {
        if let (Request::Chat { .. }, Response::Dialogue(r)) = (&e.request, &e.response) {
            stats.record(r.intent);
        }
    }
    stats
}

fn log_files(dir: &Path) -> Result<Vec<PathBuf>, ServiceError> {
    let err = |source| ServiceError::Log { path: dir.to_path_buf(), source };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(err)? {
        let path = entry.map_err(err)?.path();
        if path.extension().is_some_and(|x| x == "jsonl") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn usage_from_dir(dir: &Path) -> Result<UsageStats, ServiceError> {
    let mut total = UsageStats::default();
    for path in log_files(dir)? {
        total.merge(&usage_from_log(&read_log(&path)?));
    }
    Ok(total)
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, ServiceError> {
    let file = File::open(path).map_err(|source| ServiceError::Log { path: path.to_path_buf(), source })?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| ServiceError::Log { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|source| ServiceError::Corrupt { path: path.to_path_buf(), line: i + 1, source })?;
        entries.push(entry);
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub session_id: String,
    pub events: usize,
    /// Sequence numbers whose recomputed response differs from the log.
    pub mismatches: Vec<u64>,
    pub responses: Vec<Response>,
    pub usage: UsageStats,
}

impl ReplayReport {
    pub fn is_identical(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// Human-readable transcript of the replayed chat.
    pub fn transcript(&self, entries: &[LogEntry]) -> String {
        let mut out = String::new();
        for (e, r) in entries.iter().zip(&self.responses) {
            match (&e.request, r) {
                (Request::CreateSession { conference }, _) => out.push_str(&format!("# session for {conference}\n")),
                (Request::SubmitAbstract { .. }, Response::Document(d)) => {
                    out.push_str(&format!("# submitted revision {} ({} sentences)\n", d.revision, d.sentences.len()));
                    out.push_str(&format!(
                        "  overall {:.2} (style {:.2}, structure {:.2})\n",
                        d.review.overall, d.review.overall_style, d.review.overall_structure
                    ));
                    for item in &d.review.items {
                        out.push_str(&format!("  - {}\n", item.message));
                    }
                }
                (Request::SelectSentence { sentence_index, .. }, Response::Dialogue(d)) => {
                    out.push_str(&format!("# selected sentence {}\n{}\n", sentence_index + 1, d.message));
                }
                (Request::Chat { utterance }, Response::Dialogue(d)) => {
                    out.push_str(&format!("> {utterance}\n{}\n", d.message));
                }
                _ => {}
            }
            out.push('\n');
        }
        out
    }
}

/// Rebuilds a session from its log with the external generator disabled and
/// compares every recomputed response with the logged one.
pub fn replay(artifacts: &Artifacts, config: &ServiceConfig, entries: &[LogEntry]) -> Result<ReplayReport, ServiceError> {
    let Some(first) = entries.first() else {
        return Ok(ReplayReport {
            session_id: String::new(),
            events: 0,
            mismatches: vec![],
            responses: vec![],
            usage: UsageStats::default(),
        });
    };
    let conference = match &first.request {
        Request::CreateSession { conference } => conference.clone(),
        _ => return Err(ServiceError::UnknownSession),
    };
    let mut state = DialogueState::new(first.session_id.clone());
    let mut mismatches = Vec::new();
    let mut responses = Vec::new();
    for e in entries {
        let r = apply(artifacts, None, config, &conference, &mut state, &e.request, e.timestamp_ms)?;
        if r != e.response {
            mismatches.push(e.seq);
        }
        responses.push(r);
    }
    let usage = state.usage_stats();
    Ok(ReplayReport { session_id: first.session_id.clone(), events: entries.len(), mismatches, responses, usage })
}

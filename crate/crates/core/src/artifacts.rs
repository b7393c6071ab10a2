//! Training and persistence of the full model bundle.
//!
//! Layout of an artifacts directory:
//!
//! ```text
//! classifier.json
//! templates.toml            (optional; bundled default otherwise)
//! phrasings.toml            (optional; bundled default otherwise)
//! conferences/<name>/profile.json
//! conferences/<name>/style.json
//! conferences/<name>/index.json
//! ```
//!
//! Every JSON file is `{"format_version": 1, "kind": ..., "payload": ...}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dialogue::nlu::{IntentClassifier, PhrasingError};
use crate::exec::Exec;
use crate::explain::{ExampleEntry, ExampleIndex, ExplainConfig, ExplainContext, TextGenerator};
use crate::models::{train_classifier, train_style_lm, AspectClassifier, ModelError, StyleModel, TrainParams};
use crate::profile::{build_profile, ConferenceProfile, ProfileError, ProfileOptions};
use crate::templates::{TemplateError, TemplateSet};

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: format_version {found}, expected {expected}")]
    Version { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: holds a `{found}` artifact, expected `{expected}`")]
    Kind { path: PathBuf, found: String, expected: String },
    #[error("artifacts contain no conference profiles")]
    NoConferences,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("conference {conference}: {source}")]
    Profile { conference: String, source: ProfileError },
    #[error(transparent)]
    Templates(#[from] TemplateError),
    #[error(transparent)]
    Phrasings(#[from] PhrasingError),
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    format_version: u32,
    kind: &'a str,
    payload: &'a T,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
    kind: String,
}

#[derive(Deserialize)]
struct Body<T> {
    payload: T,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io { path: path.to_path_buf(), source }
}

/// Writes a versioned single-file artifact.
pub fn write_artifact<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let env = Envelope { format_version: ARTIFACT_FORMAT_VERSION, kind, payload };
    let json = serde_json::to_string(&env)
        .map_err(|source| ArtifactError::Json { path: path.to_path_buf(), source })?;
    fs::write(path, json).map_err(io_err(path))
}

/// Reads a versioned artifact; a different `format_version` or `kind` is a
/// hard error.
pub fn read_artifact<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let json = |source| ArtifactError::Json { path: path.to_path_buf(), source };
    let header: Header = serde_json::from_str(&text).map_err(json)?;
    if header.format_version != ARTIFACT_FORMAT_VERSION {
        return Err(ArtifactError::Version {
            path: path.to_path_buf(),
            found: header.format_version,
            expected: ARTIFACT_FORMAT_VERSION,
        });
    }
    if header.kind != kind {
        return Err(ArtifactError::Kind { path: path.to_path_buf(), found: header.kind, expected: kind.into() });
    }
    let body: Body<T> = serde_json::from_str(&text).map_err(json)?;
    Ok(body.payload)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub classifier: TrainParams,
    pub style_order: usize,
    pub style_alpha: f64,
    pub pattern_count: usize,
    pub pattern_length: usize,
    pub pattern_seed: u64,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let p = ProfileOptions::default();
        Self {
            classifier: TrainParams::default(),
            style_order: 3,
            style_alpha: 0.1,
            pattern_count: p.pattern_count,
            pattern_length: p.pattern_length,
            pattern_seed: p.seed,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConferenceArtifacts {
    pub profile: ConferenceProfile,
    pub style: StyleModel,
    pub index: ExampleIndex,
}

/// Everything the service needs, loaded once and shared read-only.
#[derive(Debug)]
pub struct Artifacts {
    pub classifier: AspectClassifier,
    pub conferences: BTreeMap<String, ConferenceArtifacts>,
    pub templates: TemplateSet,
    pub nlu: IntentClassifier,
}

fn model_card(classifier: &AspectClassifier, style: &StyleModel) -> String {
    let s = classifier.summary();
    format!(
        "Writing structure model: softmax regression over hashed unigram and bigram counts \
         ({} features), trained for {} epochs on {} labeled sentences; it predicts one of five aspect \
         labels with a probability. Writing style model: a {}-gram language model with additive smoothing \
         (alpha {}) over {} word types; its perplexity is mapped to a 1 to 5 quality score.",
        s.params.feature_dim,
        s.params.epochs,
        s.sentences,
        style.order(),
        style.alpha(),
        style.vocab_size(),
    )
}

impl Artifacts {
    /// Trains the shared classifier and one style model, profile and example
    /// index per conference in the corpus.
    pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<Self, ArtifactError> {
        let classifier = train_classifier(corpus, config.classifier)?;
        let mut conferences = BTreeMap::new();
        for conference in corpus.conferences() {
            let part = corpus.filter_conference(&conference);
            let style = train_style_lm(&part, config.style_order, config.style_alpha)?;
            let options = ProfileOptions {
                pattern_count: config.pattern_count,
                pattern_length: config.pattern_length,
                seed: config.pattern_seed,
                model_card: model_card(&classifier, &style),
                exec: config.exec,
            };
            let profile = build_profile(&part, &conference, |s| style.perplexity(s), &options)
                .map_err(|source| ArtifactError::Profile { conference: conference.clone(), source })?;
            let index =
                ExampleIndex::build(&part, &conference, &classifier, &style, &profile.quality_boundaries, config.exec);
            conferences.insert(conference, ConferenceArtifacts { profile, style, index });
        }
        if conferences.is_empty() {
            return Err(ArtifactError::NoConferences);
        }
        Ok(Self { classifier, conferences, templates: TemplateSet::default(), nlu: IntentClassifier::default() })
    }

    pub fn save(&self, dir: &Path) -> Result<(), ArtifactError> {
        write_artifact(&dir.join("classifier.json"), "classifier", &self.classifier)?;
        for (file, text) in [("templates.toml", self.templates.source()), ("phrasings.toml", self.nlu.source())] {
            let path = dir.join(file);
            fs::write(&path, text).map_err(io_err(&path))?;
        }
        for (name, c) in &self.conferences {
            let sub = dir.join("conferences").join(name);
            write_artifact(&sub.join("profile.json"), "profile", &c.profile)?;
            write_artifact(&sub.join("style.json"), "style", &c.style)?;
            write_artifact(&sub.join("index.json"), "index", &c.index.entries().to_vec())?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, exec: Exec) -> Result<Self, ArtifactError> {
        let classifier: AspectClassifier = read_artifact(&dir.join("classifier.json"), "classifier")?;
        let root = dir.join("conferences");
        let mut names = Vec::new();
        for entry in fs::read_dir(&root).map_err(io_err(&root))? {
            let entry = entry.map_err(io_err(&root))?;
            if entry.path().is_dir() {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        names.sort();
        let mut conferences = BTreeMap::new();
        for name in names {
            let sub = root.join(&name);
            let profile = read_artifact(&sub.join("profile.json"), "profile")?;
            let style = read_artifact(&sub.join("style.json"), "style")?;
            let entries: Vec<ExampleEntry> = read_artifact(&sub.join("index.json"), "index")?;
            let index = ExampleIndex::from_entries(entries, &classifier, exec);
            conferences.insert(name, ConferenceArtifacts { profile, style, index });
        }
        if conferences.is_empty() {
            return Err(ArtifactError::NoConferences);
        }
        let optional = |file: &str| -> Result<Option<String>, ArtifactError> {
            let path = dir.join(file);
            if path.exists() {
                fs::read_to_string(&path).map(Some).map_err(io_err(&path))
            } else {
                Ok(None)
            }
        };
        let templates = match optional("templates.toml")? {
            Some(src) => TemplateSet::from_toml(&src)?,
            None => TemplateSet::default(),
        };
        let nlu = match optional("phrasings.toml")? {
            Some(src) => IntentClassifier::from_toml(&src)?,
            None => IntentClassifier::default(),
        };
        Ok(Self { classifier, conferences, templates, nlu })
    }

    pub fn conference_names(&self) -> Vec<String> {
        self.conferences.keys().cloned().collect()
    }

    /// Explainer view for one conference; `None` for unknown names.
    pub fn context<'a>(
        &'a self,
        conference: &str,
        generator: Option<&'a dyn TextGenerator>,
    ) -> Option<ExplainContext<'a>> {
        let c = self.conferences.get(conference)?;
        Some(ExplainContext {
            classifier: &self.classifier,
            style: &c.style,
            profile: &c.profile,
            index: &c.index,
            templates: &self.templates,
            generator,
            config: ExplainConfig::default(),
        })
    }
}

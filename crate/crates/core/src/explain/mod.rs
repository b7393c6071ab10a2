//! The explanation generators behind the XAI agent.
//!
//! Every explainer returns an [`ExplanationPayload`]: rendered text, typed
//! attachments for client-side visuals, and suggested follow-up intents.

pub mod attribution;
pub mod counterfactual;
pub mod global;
pub mod index;
pub mod local;
pub mod suggestion;

use serde::{Deserialize, Serialize};

use crate::intent::Intent;
use crate::label::AspectLabel;
use crate::models::{AspectClassifier, StyleModel};
use crate::profile::ConferenceProfile;
use crate::templates::{Slots, TemplateSet};

pub use attribution::{explain_attribution, integrated_gradients, token_attributions};
pub use counterfactual::{build_rewrite_prompt, explain_counterfactual, GeneratorError, TextGenerator};
pub use global::{explain_global, GlobalKind};
pub use index::{ExampleEntry, ExampleIndex};
pub use local::{explain_confidence, explain_examples, ModelTarget};
pub use suggestion::{explain_suggestion, suggestion_followups};

pub const DEFAULT_EXAMPLE_COUNT: usize = 3;
pub const MAX_EXAMPLE_COUNT: usize = 10;
pub const DEFAULT_TOP_K: usize = 5;
pub const DEFAULT_IG_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMethod {
    Similarity,
    Quality,
}

/// User-controllable knobs; `None` means "use the explainer's default".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationVariables {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_label: Option<AspectLabel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub example_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rank_method: Option<RankMethod>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub keyword: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub top_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ig_steps: Option<usize>,
}

impl ExplanationVariables {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    /// Fields set in `self` win; unset fields come from `defaults`.
    pub fn or(&self, defaults: &ExplanationVariables) -> ExplanationVariables {
        ExplanationVariables {
            target_label: self.target_label.or(defaults.target_label),
            example_count: self.example_count.or(defaults.example_count),
            rank_method: self.rank_method.or(defaults.rank_method),
            keyword: self.keyword.clone().or_else(|| defaults.keyword.clone()),
            top_k: self.top_k.or(defaults.top_k),
            ig_steps: self.ig_steps.or(defaults.ig_steps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenWeight {
    pub token: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRow {
    pub sentence: String,
    pub label: AspectLabel,
    pub similarity: f64,
    pub quality: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Retrieval,
    ExternalGenerator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attachment {
    AttributionMap {
        target_label: AspectLabel,
        /// Every token of the sentence, in order.
        tokens: Vec<TokenWeight>,
        /// Indices into `tokens` of the emphasized words, by |weight| desc.
        highlighted: Vec<usize>,
    },
    ExampleList {
        target_label: AspectLabel,
        rank_method: RankMethod,
        examples: Vec<ExampleRow>,
    },
    ScoreCard {
        title: String,
        entries: Vec<ScoreEntry>,
    },
    CounterfactualCandidate {
        text: String,
        target_label: AspectLabel,
        predicted_label: AspectLabel,
        confidence: f64,
        provenance: Provenance,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationPayload {
    pub intent: Intent,
    /// Template the text was rendered from.
    pub template: String,
    pub text: String,
    pub attachments: Vec<Attachment>,
    pub followups: Vec<Intent>,
}

impl ExplanationPayload {
    pub fn new(intent: Intent, template: &str, text: String) -> Self {
        Self {
            intent,
            template: template.to_string(),
            text,
            attachments: Vec::new(),
            followups: default_followups(intent).to_vec(),
        }
    }

    pub fn with_attachment(mut self, a: Attachment) -> Self {
        self.attachments.push(a);
        self
    }

    pub fn with_followups(mut self, f: &[Intent]) -> Self {
        self.followups = f.to_vec();
        self
    }

    /// Appends an extra sentence (e.g. a clamping notice) to the text.
    pub fn append_note(&mut self, note: &str) {
        if note.is_empty() {
            return;
        }
        if !self.text.is_empty() {
            self.text.push(' ');
        }
        self.text.push_str(note);
    }
}

/// Mixed-initiative hints offered after each kind of answer.
pub fn default_followups(intent: Intent) -> &'static [Intent] {
    use Intent::*;
    match intent {
        DataStats => &[LabelDistribution, SentenceLength],
        ModelDescription => &[Confidence, DataStats],
        QualityScoreMeaning => &[Example, DataStats],
        LabelDistribution => &[DataStats, Example],
        SentenceLength => &[Example, Suggestion],
        Confidence => &[Counterfactual, Example],
        Example => &[Counterfactual, Attribution],
        Attribution => &[Counterfactual, Example],
        Counterfactual => &[Example, Confidence],
        Suggestion => &[Counterfactual, Example],
        Fallback => &[Suggestion, Confidence, Example, Attribution, Counterfactual, DataStats],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExplainConfig {
    pub default_examples: usize,
    pub max_examples: usize,
    pub default_top_k: usize,
    pub default_ig_steps: usize,
    /// Similar sentences per aspect in a rewrite prompt.
    pub prompt_examples_per_label: usize,
    pub generator_max_length: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            default_examples: DEFAULT_EXAMPLE_COUNT,
            max_examples: MAX_EXAMPLE_COUNT,
            default_top_k: DEFAULT_TOP_K,
            default_ig_steps: DEFAULT_IG_STEPS,
            prompt_examples_per_label: 5,
            generator_max_length: 120,
        }
    }
}

/// Shared read-only artifacts every explainer draws on.
#[derive(Clone, Copy)]
pub struct ExplainContext<'a> {
    pub classifier: &'a AspectClassifier,
    pub style: &'a StyleModel,
    pub profile: &'a ConferenceProfile,
    pub index: &'a ExampleIndex,
    pub templates: &'a TemplateSet,
    pub generator: Option<&'a dyn TextGenerator>,
    pub config: ExplainConfig,
}

/// Formats a real for display with two decimals.
pub(crate) fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExplainError {
    #[error("the {0} card is not available")]
    MissingCard(&'static str),
    #[error("confidence is only available for the structure model")]
    ConfidenceNotAvailable,
    #[error("no examples match the requested filters")]
    NoMatchingExamples,
    #[error("the example index is empty")]
    EmptyIndex,
    #[error("the sentence has no words to attribute")]
    EmptySentence,
    #[error("the sentence is already predicted as {0}")]
    NothingToFlip(AspectLabel),
    #[error("no {0} sentence is available to retrieve")]
    NoCandidate(AspectLabel),
    #[error("the review item belongs to an earlier submission")]
    StaleItem,
}

impl ExplainError {
    fn template(&self) -> &'static str {
        match self {
            ExplainError::MissingCard(_) => "error.missing_card",
            ExplainError::ConfidenceNotAvailable => "error.confidence_style",
            ExplainError::NoMatchingExamples => "error.no_examples",
            ExplainError::EmptyIndex => "error.empty_index",
            ExplainError::EmptySentence => "error.empty_sentence",
            ExplainError::NothingToFlip(_) => "error.nothing_to_flip",
            ExplainError::NoCandidate(_) => "error.no_candidate",
            ExplainError::StaleItem => "error.stale_item",
        }
    }

    /// Renders the error as a user-facing answer for `intent`.
    pub fn to_payload(&self, intent: Intent, templates: &TemplateSet) -> ExplanationPayload {
        let slots = match self {
            ExplainError::MissingCard(card) => Slots::new().set("card", card),
            ExplainError::NothingToFlip(l) | ExplainError::NoCandidate(l) => Slots::new().set("label", l),
            _ => Slots::new(),
        };
        let id = self.template();
        let followups: &[Intent] = match self {
            ExplainError::NothingToFlip(_) => &[Intent::Example, Intent::Confidence],
            ExplainError::StaleItem => &[Intent::Suggestion],
            _ => default_followups(intent),
        };
        ExplanationPayload::new(intent, id, templates.render(id, &slots)).with_followups(followups)
    }
}

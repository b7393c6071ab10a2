use std::fmt;

use serde::{Deserialize, Serialize};

/// The ten explanation question types plus `Fallback` for anything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    DataStats,
    ModelDescription,
    QualityScoreMeaning,
    LabelDistribution,
    SentenceLength,
    Confidence,
    Example,
    Attribution,
    Counterfactual,
    Suggestion,
    Fallback,
}

impl Intent {
    pub const EXPLANATIONS: [Intent; 10] = [
        Intent::DataStats,
        Intent::ModelDescription,
        Intent::QualityScoreMeaning,
        Intent::LabelDistribution,
        Intent::SentenceLength,
        Intent::Confidence,
        Intent::Example,
        Intent::Attribution,
        Intent::Counterfactual,
        Intent::Suggestion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Intent::DataStats => "data_stats",
            Intent::ModelDescription => "model_description",
            Intent::QualityScoreMeaning => "quality_score_meaning",
            Intent::LabelDistribution => "label_distribution",
            Intent::SentenceLength => "sentence_length",
            Intent::Confidence => "confidence",
            Intent::Example => "example",
            Intent::Attribution => "attribution",
            Intent::Counterfactual => "counterfactual",
            Intent::Suggestion => "suggestion",
            Intent::Fallback => "fallback",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Intent> {
        Self::EXPLANATIONS
            .iter()
            .chain(std::iter::once(&Intent::Fallback))
            .copied()
            .find(|i| i.as_str() == s)
    }

    /// Whether answering needs a selected sentence.
    pub fn needs_sentence(self) -> bool {
        matches!(
            self,
            Intent::Confidence
                | Intent::Example
                | Intent::Attribution
                | Intent::Counterfactual
                | Intent::Suggestion
        )
    }

    /// Button caption and the canned utterance the button sends.
    pub fn quick_reply(self) -> (&'static str, &'static str) {
        match self {
            Intent::DataStats => ("Data statistics", "What data was used to train the models?"),
            Intent::ModelDescription => ("Model description", "What kind of model is used?"),
            Intent::QualityScoreMeaning => ("Quality score", "What does the quality score mean?"),
            Intent::LabelDistribution => ("Label distribution", "What is the label distribution in the conference?"),
            Intent::SentenceLength => ("Sentence length", "Is this sentence too long?"),
            Intent::Confidence => ("Confidence", "How confident is the model for this prediction?"),
            Intent::Example => ("Similar examples", "Show me similar examples from the conference."),
            Intent::Attribution => ("Important words", "Which words are most important for this prediction?"),
            Intent::Counterfactual => ("Counterfactual", "How can I rewrite this sentence to get a different label?"),
            Intent::Suggestion => ("Understand the review", "Can you explain this review?"),
            Intent::Fallback => ("Help", "What can you do?"),
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

//! Desk-scale writing models: the aspect classifier (structure) and the
//! n-gram style model with its five-level quality mapping.

pub mod classifier;
pub mod features;
pub mod style;

use serde::{Deserialize, Serialize};

pub use classifier::{
    softmax, train_classifier, AspectClassifier, DifferentiableModel, Prediction, SentenceEmbedding,
    TrainParams,
};
pub use features::{Featurizer, FeaturizerConfig, SparseVector};
pub use style::{train_style_lm, StyleModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("corpus has no sentences")]
    EmptyCorpus,
    #[error("corpus contains a single label; refusing to train a degenerate classifier")]
    SingleLabel,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed model: {0}")]
    Shape(String),
    #[error("non-finite model parameter")]
    NonFinite,
    #[error("perplexity must be finite, got {0}")]
    NonFinitePerplexity(f64),
    #[error("quality boundaries must be strictly ascending: {0:?}")]
    BoundariesNotAscending([f64; 4]),
}

/// The 20th/40th/60th/80th percentile perplexities of a conference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct QualityBoundaries([f64; 4]);

impl QualityBoundaries {
    pub fn new(values: [f64; 4]) -> Result<Self, ModelError> {
        let ascending = values.windows(2).all(|w| w[0] < w[1]);
        if !ascending || values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::BoundariesNotAscending(values));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> [f64; 4] {
        self.0
    }
}

impl TryFrom<[f64; 4]> for QualityBoundaries {
    type Error = ModelError;
    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<QualityBoundaries> for [f64; 4] {
    fn from(b: QualityBoundaries) -> Self {
        b.0
    }
}

/// Maps a perplexity to a 1..=5 quality score; lower perplexity scores higher
/// and a value equal to a boundary takes the better bucket.
pub fn quantize_quality(ppl: f64, boundaries: &QualityBoundaries) -> Result<u8, ModelError> {
    if !ppl.is_finite() {
        return Err(ModelError::NonFinitePerplexity(ppl));
    }
    let above = boundaries.0.iter().filter(|&&b| ppl > b).count() as u8;
    Ok(5 - above)
}

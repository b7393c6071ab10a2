//! Data- and model-level explanations drawn from the conference profile.

use serde::{Deserialize, Serialize};

use super::{fmt2, Attachment, ExplainError, ExplanationPayload, ScoreEntry};
use crate::intent::Intent;
use crate::label::AspectLabel;
use crate::profile::ConferenceProfile;
use crate::templates::{Slots, TemplateSet};
use crate::text::token_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GlobalKind {
    DataStats,
    ModelDescription,
    QualityScoreMeaning,
    LabelDistribution,
    SentenceLength,
}

impl GlobalKind {
    pub fn intent(self) -> Intent {
        match self {
            GlobalKind::DataStats => Intent::DataStats,
            GlobalKind::ModelDescription => Intent::ModelDescription,
            GlobalKind::QualityScoreMeaning => Intent::QualityScoreMeaning,
            GlobalKind::LabelDistribution => Intent::LabelDistribution,
            GlobalKind::SentenceLength => Intent::SentenceLength,
        }
    }

    pub fn from_intent(intent: Intent) -> Option<Self> {
        Some(match intent {
            Intent::DataStats => GlobalKind::DataStats,
            Intent::ModelDescription => GlobalKind::ModelDescription,
            Intent::QualityScoreMeaning => GlobalKind::QualityScoreMeaning,
            Intent::LabelDistribution => GlobalKind::LabelDistribution,
            Intent::SentenceLength => GlobalKind::SentenceLength,
            _ => return None,
        })
    }
}

fn label_fractions(profile: &ConferenceProfile) -> String {
    AspectLabel::ALL
        .iter()
        .map(|l| format!("{l} {:.1}%", 100.0 * profile.label_fraction(*l)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn label_card(profile: &ConferenceProfile) -> Attachment {
    Attachment::ScoreCard {
        title: format!("Aspect label distribution ({})", profile.conference),
        entries: AspectLabel::ALL
            .iter()
            .map(|l| ScoreEntry { name: l.to_string(), value: profile.label_fraction(*l) })
            .collect(),
    }
}

/// Answers the profile-level questions. `sentence` is only consulted for
/// [`GlobalKind::SentenceLength`].
pub fn explain_global(
    kind: GlobalKind,
    profile: &ConferenceProfile,
    templates: &TemplateSet,
    sentence: Option<&str>,
) -> Result<ExplanationPayload, ExplainError> {
    let intent = kind.intent();
    let conf = &profile.conference;
    let payload = match kind {
        GlobalKind::DataStats => {
            if profile.data_card.trim().is_empty() {
                return Err(ExplainError::MissingCard("data"));
            }
            let slots = Slots::new()
                .set("conference", conf)
                .set("abstracts", profile.abstract_count)
                .set("sentences", profile.sentence_count)
                .set("fractions", label_fractions(profile))
                .set("card", &profile.data_card);
            ExplanationPayload::new(intent, "global.data", templates.render("global.data", &slots))
                .with_attachment(label_card(profile))
        }
        GlobalKind::ModelDescription => {
            if profile.model_card.trim().is_empty() {
                return Err(ExplainError::MissingCard("model"));
            }
            let slots = Slots::new().set("conference", conf).set("card", &profile.model_card);
            ExplanationPayload::new(intent, "global.model", templates.render("global.model", &slots))
        }
        GlobalKind::QualityScoreMeaning => {
            let b = profile.quality_boundaries.values();
            let slots = Slots::new()
                .set("conference", conf)
                .set("b1", fmt2(b[0]))
                .set("b2", fmt2(b[1]))
                .set("b3", fmt2(b[2]))
                .set("b4", fmt2(b[3]));
            ExplanationPayload::new(intent, "global.quality", templates.render("global.quality", &slots))
                .with_attachment(Attachment::ScoreCard {
                    title: format!("Perplexity boundaries ({conf})"),
                    entries: ["p20", "p40", "p60", "p80"]
                        .iter()
                        .zip(b)
                        .map(|(n, v)| ScoreEntry { name: n.to_string(), value: v })
                        .collect(),
                })
        }
        GlobalKind::LabelDistribution => {
            let slots = Slots::new().set("conference", conf).set("fractions", label_fractions(profile));
            ExplanationPayload::new(intent, "global.labels", templates.render("global.labels", &slots))
                .with_attachment(label_card(profile))
        }
        GlobalKind::SentenceLength => {
            let band = profile.length_stats;
            let mut slots = Slots::new()
                .set("conference", conf)
                .set("mean", format!("{:.1}", band.mean))
                .set("low", band.p5)
                .set("high", band.p95);
            let id = match sentence {
                None => "global.length",
                Some(s) => {
                    let n = token_count(s);
                    slots = slots.set("tokens", n);
                    if n < band.p5 {
                        "global.length.short"
                    } else if n > band.p95 {
                        "global.length.long"
                    } else {
                        "global.length.within"
                    }
                }
            };
            ExplanationPayload::new(intent, id, templates.render(id, &slots))
        }
    };
    Ok(payload)
}

//! "How did the system generate this suggestion?" answers, each closed by an
//! improving message that points to the finer-grained explanations.

use super::{fmt2, ExplainError, ExplanationPayload};
use crate::intent::Intent;
use crate::profile::ConferenceProfile;
use crate::review::{ReviewConfig, ReviewItem, ReviewKind};
use crate::templates::{Slots, TemplateSet};

/// Recommended next explanations for resolving each kind of review comment.
pub fn suggestion_followups(kind: ReviewKind) -> &'static [Intent] {
    match kind {
        ReviewKind::Structure => &[Intent::Counterfactual, Intent::Example],
        ReviewKind::Style => &[Intent::Example, Intent::Attribution],
        ReviewKind::Length => &[Intent::SentenceLength, Intent::Example],
    }
}

pub fn explain_suggestion(
    item: &ReviewItem,
    item_revision: u64,
    current_revision: u64,
    profile: &ConferenceProfile,
    config: &ReviewConfig,
    templates: &TemplateSet,
) -> Result<ExplanationPayload, ExplainError> {
    if item_revision != current_revision {
        return Err(ExplainError::StaleItem);
    }
    let b = profile.quality_boundaries.values();
    let mut slots = Slots::new()
        .set("sentence", item.sentence_index + 1)
        .set("conference", &profile.conference)
        .set("patterns", profile.patterns.len())
        .set("low", profile.length_stats.p5)
        .set("high", profile.length_stats.p95)
        .set("b1", fmt2(b[0]))
        .set("b4", fmt2(b[3]))
        .set("threshold", config.style_threshold);
    if let Some(l) = item.current_label {
        slots = slots.set("current", l);
    }
    if let Some(l) = item.suggested_label {
        slots = slots.set("suggested", l);
    }
    if let Some(q) = item.quality_score {
        slots = slots.set("score", q);
    }
    if let Some(t) = item.token_count {
        slots = slots.set("tokens", t);
    }
    let id = match item.kind {
        ReviewKind::Structure => "suggestion.structure",
        ReviewKind::Style => "suggestion.style",
        ReviewKind::Length => "suggestion.length",
    };
    let followups = suggestion_followups(item.kind);
    let options = followups
        .iter()
        .map(|i| format!("\"{}\"", i.quick_reply().0))
        .collect::<Vec<_>>()
        .join(" or ");
    let mut payload = ExplanationPayload::new(Intent::Suggestion, id, templates.render(id, &slots));
    payload.append_note(&templates.render("suggestion.improve", &Slots::new().set("options", options)));
    Ok(payload.with_followups(followups))
}

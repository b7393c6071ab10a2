//! Counterfactual rewrites: an external text generator prompted with
//! in-context examples when one is configured, otherwise (or when it fails)
//! the most similar published sentence carrying the target label.

use super::{fmt2, Attachment, ExplainContext, ExplainError, ExplanationPayload, Provenance};
use crate::intent::Intent;
use crate::label::AspectLabel;
use crate::models::Prediction;
use crate::templates::Slots;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeneratorError {
    #[error("generator timed out")]
    Timeout,
    #[error("generator has too many requests in flight")]
    Busy,
    #[error("generator transport error: {0}")]
    Transport(String),
    #[error("generator returned an empty completion")]
    Empty,
}

/// A single text-completion endpoint.
pub trait TextGenerator: Send + Sync {
    fn complete(&self, prompt: &str, max_length: usize) -> Result<String, GeneratorError>;
}

/// In-context rewrite prompt: for every aspect, the most similar indexed
/// sentences as `"{sentence} is labeled {aspect}"` lines, followed by the
/// instruction `"Rewrite {sentence} into label {target}"`.
pub fn build_rewrite_prompt(sentence: &str, target: AspectLabel, ctx: &ExplainContext<'_>) -> String {
    let query = ctx.classifier.embed(sentence);
    let entries = ctx.index.entries();
    let mut lines = Vec::new();
    for label in AspectLabel::ALL {
        let hits = ctx
            .index
            .ranked_by_similarity(&query, |e| e.label == label && e.text.trim() != sentence.trim());
        for &(i, _) in hits.iter().take(ctx.config.prompt_examples_per_label) {
            lines.push(format!("{} is labeled {}", entries[i].text, label));
        }
    }
    lines.push(format!("Rewrite {} into label {}", sentence.trim(), target));
    lines.join("\n")
}

fn retrieve(sentence: &str, target: AspectLabel, ctx: &ExplainContext<'_>) -> Option<String> {
    let query = ctx.classifier.embed(sentence);
    ctx.index
        .ranked_by_similarity(&query, |e| e.label == target && e.text.trim() != sentence.trim())
        .first()
        .map(|&(i, _)| ctx.index.entries()[i].text.clone())
}

pub fn explain_counterfactual(
    sentence: &str,
    prediction: &Prediction,
    target: AspectLabel,
    ctx: &ExplainContext<'_>,
) -> Result<ExplanationPayload, ExplainError> {
    if target == prediction.label {
        return Err(ExplainError::NothingToFlip(target));
    }
    let mut notes = Vec::new();
    let mut candidate = None;
    if let Some(generator) = ctx.generator {
        let prompt = build_rewrite_prompt(sentence, target, ctx);
        match generator.complete(&prompt, ctx.config.generator_max_length) {
            Ok(text) if !text.trim().is_empty() => {
                candidate = Some((text.trim().to_string(), Provenance::ExternalGenerator));
            }
            Ok(_) => notes.push(GeneratorError::Empty.to_string()),
            Err(e) => {
                tracing::warn!(error = %e, "rewrite generator failed; falling back to retrieval");
                notes.push(e.to_string());
            }
        }
    }
    let (text, provenance) = match candidate {
        Some(c) => c,
        None => (
            retrieve(sentence, target, ctx).ok_or(ExplainError::NoCandidate(target))?,
            Provenance::Retrieval,
        ),
    };

    let check = ctx.classifier.predict(&text);
    let id = match provenance {
        Provenance::Retrieval => "counterfactual.retrieval",
        Provenance::ExternalGenerator => "counterfactual.generated",
    };
    let slots = Slots::new()
        .set("original", prediction.label)
        .set("target", target)
        .set("candidate", &text)
        .set("predicted", check.label)
        .set("confidence", fmt2(check.confidence));
    let mut payload = ExplanationPayload::new(Intent::Counterfactual, id, ctx.templates.render(id, &slots));
    for reason in notes {
        payload.append_note(&ctx.templates.render("counterfactual.fallback", &Slots::new().set("reason", reason)));
    }
    if check.label != target {
        payload.append_note(&ctx.templates.render("counterfactual.mismatch", &slots));
    }
    Ok(payload.with_attachment(Attachment::CounterfactualCandidate {
        text,
        target_label: target,
        predicted_label: check.label,
        confidence: check.confidence,
        provenance,
    }))
}

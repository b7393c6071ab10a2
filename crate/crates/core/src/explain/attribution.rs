//! Word importance via integrated gradients.

use super::{fmt2, Attachment, ExplainContext, ExplainError, ExplanationPayload, ExplanationVariables, TokenWeight};
use crate::intent::Intent;
use crate::label::AspectLabel;
use crate::models::{DifferentiableModel, SparseVector};
use crate::templates::Slots;
use crate::text::tokenize;

/// Integrated gradients of the `class` logit along the straight path from the
/// zero baseline to `features`, approximated by a `steps`-point midpoint
/// Riemann sum.
///
/// Returns one attribution per entry of `features` (same order). Features
/// absent from `features` have attribution exactly zero.
pub fn integrated_gradients<M: DifferentiableModel + ?Sized>(
    model: &M,
    features: &SparseVector,
    class: AspectLabel,
    steps: usize,
) -> Vec<f64> {
    let steps = steps.max(1);
    let mut grad_sum = vec![0.0; features.entries.len()];
    for k in 0..steps {
        let alpha = (k as f64 + 0.5) / steps as f64;
        let point = SparseVector {
            entries: features.entries.iter().map(|&(i, v)| (i, alpha * v)).collect(),
        };
        for (acc, g) in grad_sum.iter_mut().zip(model.gradient(&point, features, class)) {
            *acc += g;
        }
    }
    features
        .entries
        .iter()
        .zip(grad_sum)
        .map(|(&(_, v), g)| v * g / steps as f64)
        .collect()
}

/// Per-token weights for `sentence`: each n-gram occurrence receives an equal
/// share of its hashed feature's attribution, split evenly over the tokens it
/// spans.
pub fn token_attributions<M: DifferentiableModel + ?Sized>(
    model: &M,
    featurizer: &crate::models::Featurizer,
    sentence: &str,
    class: AspectLabel,
    steps: usize,
) -> (Vec<String>, Vec<f64>, Vec<f64>) {
    let tokens = tokenize(sentence);
    let features = featurizer.features_of_tokens(&tokens);
    let attributions = integrated_gradients(model, &features, class, steps);
    let mut weights = vec![0.0; tokens.len()];
    for occ in featurizer.occurrences(&tokens) {
        let pos = features
            .entries
            .binary_search_by_key(&occ.feature, |e| e.0)
            .expect("occurrence is a feature");
        let share = attributions[pos] / features.entries[pos].1;
        for &t in &occ.tokens {
            weights[t] += share / occ.tokens.len() as f64;
        }
    }
    (tokens, weights, attributions)
}

pub fn explain_attribution(
    sentence: &str,
    target: AspectLabel,
    vars: &ExplanationVariables,
    ctx: &ExplainContext<'_>,
) -> Result<ExplanationPayload, ExplainError> {
    let steps = vars.ig_steps.unwrap_or(ctx.config.default_ig_steps);
    let (tokens, weights, _) = token_attributions(ctx.classifier, ctx.classifier.featurizer(), sentence, target, steps);
    if tokens.is_empty() {
        return Err(ExplainError::EmptySentence);
    }
    let requested = vars.top_k.unwrap_or(ctx.config.default_top_k).max(1);
    let top_k = requested.min(tokens.len());

    let mut order: Vec<usize> = (0..tokens.len()).collect();
    order.sort_by(|&a, &b| weights[b].abs().total_cmp(&weights[a].abs()).then(a.cmp(&b)));
    order.truncate(top_k);

    let listing = order
        .iter()
        .map(|&i| format!("\"{}\" ({})", tokens[i], fmt2(weights[i])))
        .collect::<Vec<_>>()
        .join(", ");
    let slots = Slots::new().set("k", top_k).set("label", target).set("words", listing);
    let id = "attribution.top";
    let mut payload = ExplanationPayload::new(Intent::Attribution, id, ctx.templates.render(id, &slots));
    if requested > top_k {
        let note = ctx.templates.render(
            "attribution.clamped",
            &Slots::new().set("requested", requested).set("tokens", tokens.len()),
        );
        payload.append_note(&note);
    }
    Ok(payload.with_attachment(Attachment::AttributionMap {
        target_label: target,
        tokens: tokens
            .into_iter()
            .zip(weights)
            .map(|(token, weight)| TokenWeight { token, weight })
            .collect(),
        highlighted: order,
    }))
}

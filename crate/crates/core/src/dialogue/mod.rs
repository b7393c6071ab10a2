//! The conversational pipeline: NLU, context-aware defaults, explainers,
//! template rendering and per-session state tracking.

pub mod nlu;
pub mod variables;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::AbstractDocument;
use crate::explain::{
    explain_attribution, explain_confidence, explain_counterfactual, explain_examples, explain_global,
    explain_suggestion, ExplainContext, ExplainError, ExplanationPayload, ExplanationVariables, GlobalKind,
    ModelTarget,
};
use crate::intent::Intent;
use crate::label::AspectLabel;
use crate::review::ReviewConfig;
use crate::templates::Slots;
use crate::text::tokenize;

pub use nlu::{Classification, IntentClassifier, Stage};
pub use variables::{parse_variables, scan_variables, variables_for, RawVariables, VariableNotice};

/// Intents whose answers can be customized by a follow-up made only of
/// variables (e.g. "2 + background").
pub const CONTROLLABLE: [Intent; 3] = [Intent::Example, Intent::Attribution, Intent::Counterfactual];

/// Everything a turn may read besides the session state.
#[derive(Clone, Copy)]
pub struct DialogueEnv<'a> {
    pub explain: ExplainContext<'a>,
    pub nlu: &'a IntentClassifier,
    pub review: ReviewConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingContext {
    /// Suggested label of the selected sentence's Structure item.
    pub suggested_label: Option<AspectLabel>,
    pub last_intent: Option<Intent>,
    /// Variables the user stated (explicitly or by follow-up), without
    /// context defaults.
    pub last_variables: ExplanationVariables,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn_index: usize,
    pub utterance: String,
    pub resolved_intent: Intent,
    /// Variables the explainer ran with, context defaults included.
    pub variables: ExplanationVariables,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuickReply {
    pub label: String,
    pub utterance: String,
    pub intent: Intent,
}

impl QuickReply {
    pub fn for_intent(intent: Intent) -> Self {
        let (label, utterance) = intent.quick_reply();
        Self { label: label.to_string(), utterance: utterance.to_string(), intent }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueResponse {
    /// `None` for selection events, which are not chat turns.
    pub turn_index: Option<usize>,
    pub intent: Intent,
    /// Full rendered message: payload text, notices, then the hint.
    pub message: String,
    pub payload: ExplanationPayload,
    pub variables: ExplanationVariables,
    pub notices: Vec<String>,
    pub hint: Option<String>,
    pub quick_replies: Vec<QuickReply>,
    pub selected_sentence: Option<usize>,
    pub state_delta: PendingContext,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DialogueError {
    #[error("the utterance is empty")]
    EmptyUtterance,
    #[error("no abstract has been submitted")]
    NoDocument,
    #[error("sentence {index} does not exist; the abstract has {len} sentences")]
    SentenceOutOfRange { index: usize, len: usize },
}

/// Per-intent request counts; Fallback is reported separately.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageStats {
    pub counts: BTreeMap<Intent, usize>,
    pub fallback: usize,
    pub turns: usize,
}

impl Default for UsageStats {
    fn default() -> Self {
        Self { counts: Intent::EXPLANATIONS.iter().map(|&i| (i, 0)).collect(), fallback: 0, turns: 0 }
    }
}

impl UsageStats {
    pub fn record(&mut self, intent: Intent) {
        self.turns += 1;
        match intent {
            Intent::Fallback => self.fallback += 1,
            i => *self.counts.entry(i).or_insert(0) += 1,
        }
    }

    pub fn merge(&mut self, other: &UsageStats) {
        for (i, n) in &other.counts {
            *self.counts.entry(*i).or_insert(0) += n;
        }
        self.fallback += other.fallback;
        self.turns += other.turns;
    }
}

pub fn export_usage_stats(history: &[TurnRecord]) -> UsageStats {
    let mut stats = UsageStats::default();
    for t in history {
        stats.record(t.resolved_intent);
    }
    stats
}

/// Joins the answer, its notices and the hint into one message.
pub fn render_response(payload: &ExplanationPayload, notices: &[String], hint: Option<&str>) -> String {
    let mut parts = vec![payload.text.as_str()];
    parts.extend(notices.iter().map(String::as_str));
    parts.extend(hint);
    parts.join("\n\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueState {
    pub session_id: String,
    pub document: Option<AbstractDocument>,
    pub selected_sentence: Option<usize>,
    pub pending: PendingContext,
    pub history: Vec<TurnRecord>,
}

impl DialogueState {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            document: None,
            selected_sentence: None,
            pending: PendingContext::default(),
            history: Vec::new(),
        }
    }

    /// Installs a new submission. The old review no longer applies, so the
    /// selection and pending context are cleared.
    pub fn set_document(&mut self, doc: AbstractDocument) {
        self.document = Some(doc);
        self.selected_sentence = None;
        self.pending = PendingContext::default();
    }

    pub fn usage_stats(&self) -> UsageStats {
        export_usage_stats(&self.history)
    }

    /// A click on a sentence: selects it, remembers its suggested label and
    /// answers with the sentence's review explanation. `revision`, when given,
    /// must match the current submission.
    pub fn select_sentence(
        &mut self,
        index: usize,
        revision: Option<u64>,
        env: &DialogueEnv<'_>,
    ) -> Result<DialogueResponse, DialogueError> {
        let templates = env.explain.templates;
        let doc = self.document.as_ref().ok_or(DialogueError::NoDocument)?;
        if index >= doc.sentences.len() {
            return Err(DialogueError::SentenceOutOfRange { index, len: doc.sentences.len() });
        }
        if revision.is_some_and(|r| r != doc.revision) {
            let payload = ExplainError::StaleItem.to_payload(Intent::Suggestion, templates);
            return Ok(self.response(None, Intent::Suggestion, payload, ExplanationVariables::default(), vec![], None));
        }
        let sentence = &doc.sentences[index];
        let selected = templates.render(
            "dialogue.selected",
            &Slots::new().set("sentence", index + 1).set("text", &sentence.text),
        );
        let mut payload = match doc.review.items_for(index).next() {
            Some(item) => explain_suggestion(
                item,
                doc.review.revision,
                doc.revision,
                env.explain.profile,
                &env.review,
                templates,
            )
            .unwrap_or_else(|e| e.to_payload(Intent::Suggestion, templates)),
            None => {
                let slots = Slots::new()
                    .set("label", sentence.prediction.label)
                    .set("confidence", sentence.prediction.confidence_display())
                    .set("score", sentence.quality_score);
                ExplanationPayload::new(
                    Intent::Suggestion,
                    "dialogue.selected.clean",
                    templates.render("dialogue.selected.clean", &slots),
                )
                .with_followups(&[Intent::Confidence, Intent::Example, Intent::Attribution])
            }
        };
        payload.text = format!("{selected}\n\n{}", payload.text);
        self.pending = PendingContext {
            suggested_label: doc.review.structure_item(index).and_then(|i| i.suggested_label),
            last_intent: Some(Intent::Suggestion),
            last_variables: ExplanationVariables::default(),
        };
        self.selected_sentence = Some(index);
        Ok(self.response(None, Intent::Suggestion, payload, ExplanationVariables::default(), vec![], None))
    }

    /// One chat turn.
    pub fn respond(
        &mut self,
        utterance: &str,
        env: &DialogueEnv<'_>,
        timestamp_ms: u64,
    ) -> Result<DialogueResponse, DialogueError> {
        let utterance = utterance.trim();
        if utterance.is_empty() {
            return Err(DialogueError::EmptyUtterance);
        }
        let templates = env.explain.templates;
        let classification = env.nlu.classify(utterance);
        let raw = scan_variables(utterance);

        // a follow-up made of variables refines the previous answer; an
        // utterance made only of variables does so even if a keyword in it
        // (e.g. "quality") names another intent
        let refinable = self.pending.last_intent.is_some_and(|i| CONTROLLABLE.contains(&i));
        let follow_up = !raw.is_empty()
            && (classification.intent == Intent::Fallback || (refinable && raw.unrecognized.is_empty()));
        let intent = if follow_up {
            self.pending.last_intent.filter(|i| CONTROLLABLE.contains(i)).unwrap_or(Intent::Example)
        } else {
            classification.intent
        };
        let (mut stated, clamps) = variables_for(&raw, intent, env.explain.config.max_examples);
        if follow_up && self.pending.last_intent == Some(intent) {
            stated = stated.or(&self.pending.last_variables);
        }
        let mut notices: Vec<String> = clamps
            .iter()
            .map(|n| {
                templates.render(
                    "dialogue.clamped",
                    &Slots::new().set("variable", &n.variable).set("requested", n.requested).set("applied", n.applied),
                )
            })
            .collect();
        if follow_up && !raw.unrecognized.is_empty() {
            notices.push(templates.render("dialogue.ignored", &Slots::new().set("words", raw.unrecognized.join(", "))));
        }

        let (payload, effective) = self.answer(intent, utterance, &stated, env);
        let hint = if payload.intent == intent && CONTROLLABLE.contains(&intent) && !payload.template.starts_with("error.")
        {
            let h = templates.render(&format!("dialogue.hint.{intent}"), &Slots::new());
            Some(templates.render("dialogue.hint", &Slots::new().set("hint", h)))
        } else {
            None
        };

        let turn_index = self.history.len();
        self.history.push(TurnRecord {
            turn_index,
            utterance: utterance.to_string(),
            resolved_intent: intent,
            variables: effective.clone(),
            timestamp_ms,
        });
        if intent != Intent::Fallback {
            self.pending.last_intent = Some(intent);
            self.pending.last_variables = stated;
        }
        Ok(self.response(Some(turn_index), intent, payload, effective, notices, hint))
    }

    fn response(
        &self,
        turn_index: Option<usize>,
        intent: Intent,
        payload: ExplanationPayload,
        variables: ExplanationVariables,
        notices: Vec<String>,
        hint: Option<String>,
    ) -> DialogueResponse {
        DialogueResponse {
            turn_index,
            intent,
            message: render_response(&payload, &notices, hint.as_deref()),
            quick_replies: payload.followups.iter().map(|&i| QuickReply::for_intent(i)).collect(),
            payload,
            variables,
            notices,
            hint,
            selected_sentence: self.selected_sentence,
            state_delta: self.pending.clone(),
        }
    }

    /// Runs the explainer for `intent`, filling context defaults. Returns the
    /// payload and the variables actually used.
    fn answer(
        &self,
        intent: Intent,
        utterance: &str,
        stated: &ExplanationVariables,
        env: &DialogueEnv<'_>,
    ) -> (ExplanationPayload, ExplanationVariables) {
        let ctx = &env.explain;
        let templates = ctx.templates;
        let prompt = |id: &str, followups: &[Intent]| {
            ExplanationPayload::new(intent, id, templates.render(id, &Slots::new())).with_followups(followups)
        };
        let Some(doc) = self.document.as_ref() else {
            return (prompt("dialogue.need_submission", &[]), stated.clone());
        };
        if intent == Intent::Fallback {
            let options = Intent::EXPLANATIONS
                .iter()
                .map(|i| format!("\"{}\"", i.quick_reply().1))
                .collect::<Vec<_>>()
                .join(", ");
            let text = templates.render("dialogue.help", &Slots::new().set("options", options));
            return (ExplanationPayload::new(intent, "dialogue.help", text), stated.clone());
        }
        let sentence = self.selected_sentence.map(|i| &doc.sentences[i]);
        if let Some(kind) = GlobalKind::from_intent(intent) {
            let text = sentence.map(|s| s.text.as_str());
            let out = explain_global(kind, ctx.profile, templates, text);
            return (out.unwrap_or_else(|e| e.to_payload(intent, templates)), stated.clone());
        }
        let Some(sentence) = sentence else {
            return (prompt("dialogue.need_sentence", &[Intent::Suggestion]), stated.clone());
        };
        let predicted = sentence.prediction.label;
        let mut effective = stated.clone();
        let result = match intent {
            Intent::Confidence => {
                let asks_style = tokenize(utterance).iter().any(|t| t == "style" || t == "quality");
                let target = if asks_style { ModelTarget::Style } else { ModelTarget::Structure };
                explain_confidence(&sentence.prediction, target, templates)
            }
            Intent::Example => explain_examples(&sentence.text, predicted, &effective, ctx),
            Intent::Attribution => {
                let target = stated.target_label.or(self.pending.suggested_label).unwrap_or(predicted);
                effective.target_label = Some(target);
                explain_attribution(&sentence.text, target, &effective, ctx)
            }
            Intent::Counterfactual => {
                let target = stated
                    .target_label
                    .or(self.pending.suggested_label.filter(|&l| l != predicted))
                    .unwrap_or_else(|| runner_up(&sentence.prediction.probabilities));
                effective.target_label = Some(target);
                explain_counterfactual(&sentence.text, &sentence.prediction, target, ctx)
            }
            Intent::Suggestion => {
                let index = self.selected_sentence.expect("sentence is selected");
                match doc.review.items_for(index).next() {
                    Some(item) => explain_suggestion(
                        item,
                        doc.review.revision,
                        doc.revision,
                        ctx.profile,
                        &env.review,
                        templates,
                    ),
                    None => Ok(prompt("dialogue.no_items", &[Intent::Confidence, Intent::Example, Intent::Attribution])),
                }
            }
            _ => unreachable!("global intents and fallback handled above"),
        };
        (result.unwrap_or_else(|e| e.to_payload(intent, templates)), effective)
    }
}

/// Most probable label other than the argmax (lowest index on ties).
fn runner_up(probabilities: &[f64; 5]) -> AspectLabel {
    let mut order: Vec<usize> = (0..probabilities.len()).collect();
    order.sort_by(|&a, &b| probabilities[b].total_cmp(&probabilities[a]).then(a.cmp(&b)));
    AspectLabel::from_index(order[1]).expect("five labels")
}

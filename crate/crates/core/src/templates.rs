//! Keyed text templates with named `{slot}` placeholders.
//!
//! The template file is TOML:
//!
//! ```toml
//! format_version = 1
//! [templates]
//! "confidence.structure" = "The model predicts **{label}** with confidence {confidence}."
//! ```
//!
//! `{{` and `}}` render literal braces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const TEMPLATE_FORMAT_VERSION: u32 = 1;
pub const FALLBACK_TEMPLATE: &str = "fallback.missing_template";

const DEFAULT_TEMPLATES: &str = include_str!("../data/templates.toml");

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("template file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("template file has format_version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("template `{id}` has an unterminated slot")]
    Unterminated { id: String },
    #[error("template set lacks the `{FALLBACK_TEMPLATE}` entry")]
    NoFallback,
}

/// Named slot values for one rendering.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Slots(BTreeMap<String, String>);

impl Slots {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, Deserialize)]
struct TemplateFile {
    format_version: u32,
    templates: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
    source: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::from_toml(DEFAULT_TEMPLATES).expect("bundled templates are valid")
    }
}

impl TemplateSet {
    pub fn from_toml(src: &str) -> Result<Self, TemplateError> {
        let file: TemplateFile = toml::from_str(src)?;
        if file.format_version != TEMPLATE_FORMAT_VERSION {
            return Err(TemplateError::Version {
                found: file.format_version,
                expected: TEMPLATE_FORMAT_VERSION,
            });
        }
        for (id, body) in &file.templates {
            parse(body).map_err(|_| TemplateError::Unterminated { id: id.clone() })?;
        }
        if !file.templates.contains_key(FALLBACK_TEMPLATE) {
            return Err(TemplateError::NoFallback);
        }
        Ok(Self { templates: file.templates, source: src.to_string() })
    }

    /// The TOML text this set was loaded from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn contains(&self, id: &str) -> bool {
        self.templates.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    /// Fills the template's slots. A missing template renders the fallback
    /// template instead; a slot without a value renders empty. Both cases are
    /// logged.
    pub fn render(&self, id: &str, slots: &Slots) -> String {
        let body = match self.templates.get(id) {
            Some(body) => body,
            None => {
                tracing::warn!(template = id, "missing template; using fallback");
                let fallback = Slots::new().set("template", id);
                return self.render_body(FALLBACK_TEMPLATE, &self.templates[FALLBACK_TEMPLATE], &fallback);
            }
        };
        self.render_body(id, body, slots)
    }

    fn render_body(&self, id: &str, body: &str, slots: &Slots) -> String {
        let mut out = String::with_capacity(body.len() + 32);
        for piece in parse(body).expect("validated at load") {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) => match slots.get(name) {
                    Some(v) => out.push_str(v),
                    None => tracing::warn!(template = id, slot = name, "unfilled slot"),
                },
            }
        }
        out
    }
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn parse(body: &str) -> Result<Vec<Piece<'_>>, ()> {
    let mut pieces = Vec::new();
    let mut rest = body;
    while let Some(pos) = rest.find(['{', '}']) {
        if pos > 0 {
            pieces.push(Piece::Text(&rest[..pos]));
        }
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{{") {
            pieces.push(Piece::Text("{"));
            rest = after;
        } else if let Some(after) = tail.strip_prefix("}}") {
            pieces.push(Piece::Text("}"));
            rest = after;
        } else if tail.starts_with('{') {
            let close = tail.find('}').ok_or(())?;
            let name = &tail[1..close];
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(());
            }
            pieces.push(Piece::Slot(name));
            rest = &tail[close + 1..];
        } else {
            return Err(());
        }
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest));
    }
    Ok(pieces)
}

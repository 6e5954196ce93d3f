//! Prompt templates for every agent role and their rendering.
//!
//! Templates are embedded at build time and may be dumped to disk or replaced
//! by user-supplied overrides. Placeholders use `{{name}}` and are substituted
//! in a single pass, so values that themselves contain `{{...}}` are inserted
//! literally.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::CoreError;
use crate::parser::{serialize_findings, serialize_one};
use crate::types::{AnnotationSet, ErrorAnnotation, LanguagePair, MqmCategory};

pub const SOURCE_TEXT: &str = "source_text";
pub const DRAFT_TEXT: &str = "draft_text";
pub const SOURCE_LANG: &str = "source_lang";
pub const TARGET_LANG: &str = "target_lang";
pub const ANNOTATIONS_BLOCK: &str = "annotations_block";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemplateId {
    Translator,
    SingleAgentRefine,
    Evaluator(MqmCategory),
    Editor,
}

impl TemplateId {
    pub fn all() -> Vec<TemplateId> {
        let mut ids = vec![TemplateId::Translator, TemplateId::SingleAgentRefine];
        ids.extend(MqmCategory::ALL.iter().map(|c| TemplateId::Evaluator(*c)));
        ids.push(TemplateId::Editor);
        ids
    }

    pub fn name(self) -> String {
        match self {
            TemplateId::Translator => "translator".to_string(),
            TemplateId::SingleAgentRefine => "single_agent_refine".to_string(),
            TemplateId::Evaluator(c) => format!("evaluator_{}", c.slug()),
            TemplateId::Editor => "editor".to_string(),
        }
    }

    /// Placeholders the template body must contain.
    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateId::Translator => &[SOURCE_LANG, TARGET_LANG, SOURCE_TEXT],
            TemplateId::SingleAgentRefine | TemplateId::Evaluator(_) => {
                &[SOURCE_LANG, TARGET_LANG, SOURCE_TEXT, DRAFT_TEXT]
            }
            TemplateId::Editor => &[SOURCE_LANG, TARGET_LANG, SOURCE_TEXT, DRAFT_TEXT, ANNOTATIONS_BLOCK],
        }
    }

    /// Role line sent as the system prompt alongside the rendered template.
    pub fn system_prompt(self) -> String {
        match self {
            TemplateId::Translator => "You are the translator agent.".to_string(),
            TemplateId::SingleAgentRefine => "You are a translator reviewing your own translation.".to_string(),
            TemplateId::Evaluator(c) => format!("You are the {} evaluator agent.", c.display_name()),
            TemplateId::Editor => "You are the editor agent.".to_string(),
        }
    }

    fn embedded(self) -> &'static str {
        match self {
            TemplateId::Translator => include_str!("../templates/translator.txt"),
            TemplateId::SingleAgentRefine => include_str!("../templates/single_agent_refine.txt"),
            TemplateId::Editor => include_str!("../templates/editor.txt"),
            TemplateId::Evaluator(c) => match c {
                MqmCategory::Accuracy => include_str!("../templates/evaluator_accuracy.txt"),
                MqmCategory::LinguisticConventions => {
                    include_str!("../templates/evaluator_linguistic_conventions.txt")
                }
                MqmCategory::Terminology => include_str!("../templates/evaluator_terminology.txt"),
                MqmCategory::Style => include_str!("../templates/evaluator_style.txt"),
                MqmCategory::LocaleConventions => {
                    include_str!("../templates/evaluator_locale_conventions.txt")
                }
                MqmCategory::AudienceAppropriateness => {
                    include_str!("../templates/evaluator_audience_appropriateness.txt")
                }
                MqmCategory::DesignAndMarkup => {
                    include_str!("../templates/evaluator_design_and_markup.txt")
                }
            },
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for TemplateId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::all()
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` is missing placeholder {{{{{placeholder}}}}}")]
    MissingPlaceholder { template: String, placeholder: String },
    #[error("evaluator template `{template}` lacks severity token `{token}`")]
    MissingSeverityToken { template: String, token: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: String,
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<(), PromptError> {
        let present = placeholder_names(&self.body);
        for required in self.id.required_placeholders() {
            if !present.iter().any(|p| p == required) {
                return Err(PromptError::MissingPlaceholder {
                    template: self.id.name(),
                    placeholder: required.to_string(),
                });
            }
        }
        if let TemplateId::Evaluator(_) = self.id {
            for token in ["[Critical]", "[Major]", "[Minor]"] {
                if !self.body.contains(token) {
                    return Err(PromptError::MissingSeverityToken {
                        template: self.id.name(),
                        token: token.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// How evaluator output reaches the editor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditorContext {
    /// Findings re-serialized from their parsed form.
    #[default]
    Normalized,
    /// Evaluator replies verbatim.
    RawPassthrough,
}

#[derive(Debug, Clone)]
pub struct PromptLibrary {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl Default for PromptLibrary {
    fn default() -> Self {
        let templates = TemplateId::all()
            .into_iter()
            .map(|id| {
                (
                    id,
                    PromptTemplate {
                        id,
                        body: id.embedded().to_string(),
                    },
                )
            })
            .collect();
        Self { templates }
    }
}

impl PromptLibrary {
    pub fn template(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn templates(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }

    pub fn set_override(&mut self, id: TemplateId, body: String) -> Result<(), PromptError> {
        let template = PromptTemplate { id, body };
        template.validate()?;
        self.templates.insert(id, template);
        Ok(())
    }

    /// Replaces templates with any `<template id>.txt` files found in `dir`.
    pub fn with_overrides(mut self, dir: &Path) -> Result<Self, PromptError> {
        for id in TemplateId::all() {
            let path = dir.join(format!("{}.txt", id.name()));
            if path.exists() {
                self.set_override(id, fs::read_to_string(&path)?)?;
            }
        }
        Ok(self)
    }

    /// Writes one `<template id>.txt` per template.
    pub fn dump(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>, PromptError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for template in self.templates.values() {
            let path = dir.join(format!("{}.txt", template.id.name()));
            fs::write(&path, &template.body)?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn render_translator(&self, pair: &LanguagePair, source_text: &str) -> Result<String, CoreError> {
        if source_text.trim().is_empty() {
            return Err(CoreError::Precondition("source text must not be empty"));
        }
        Ok(render(
            &self.template(TemplateId::Translator).body,
            &[
                (SOURCE_LANG, pair.source_name()),
                (TARGET_LANG, pair.target_name()),
                (SOURCE_TEXT, source_text),
            ],
        ))
    }

    pub fn render_evaluator(
        &self,
        category: MqmCategory,
        pair: &LanguagePair,
        source_text: &str,
        draft_text: &str,
    ) -> String {
        render(
            &self.template(TemplateId::Evaluator(category)).body,
            &[
                (SOURCE_LANG, pair.source_name()),
                (TARGET_LANG, pair.target_name()),
                (SOURCE_TEXT, source_text),
                (DRAFT_TEXT, draft_text),
            ],
        )
    }

    pub fn render_editor(
        &self,
        pair: &LanguagePair,
        source_text: &str,
        draft_text: &str,
        annotation_sets: &[AnnotationSet],
        context: EditorContext,
    ) -> Result<String, CoreError> {
        if annotation_sets.is_empty() {
            return Err(CoreError::Precondition("editor needs at least one annotation set"));
        }
        let block = match context {
            EditorContext::Normalized => editor_annotations_block(annotation_sets),
            EditorContext::RawPassthrough => annotation_sets
                .iter()
                .map(|s| s.raw_text.trim())
                .collect::<Vec<_>>()
                .join("\n\n"),
        };
        Ok(render(
            &self.template(TemplateId::Editor).body,
            &[
                (SOURCE_LANG, pair.source_name()),
                (TARGET_LANG, pair.target_name()),
                (SOURCE_TEXT, source_text),
                (DRAFT_TEXT, draft_text),
                (ANNOTATIONS_BLOCK, &block),
            ],
        ))
    }

    pub fn render_single_agent(
        &self,
        pair: &LanguagePair,
        source_text: &str,
        draft_text: &str,
    ) -> Result<String, CoreError> {
        if draft_text.trim().is_empty() {
            return Err(CoreError::Precondition("draft text must not be empty"));
        }
        Ok(render(
            &self.template(TemplateId::SingleAgentRefine).body,
            &[
                (SOURCE_LANG, pair.source_name()),
                (TARGET_LANG, pair.target_name()),
                (SOURCE_TEXT, source_text),
                (DRAFT_TEXT, draft_text),
            ],
        ))
    }
}

/// Findings grouped under `<Category> Errors` headings in category order.
///
/// A category appears when some set is scoped to it or some finding carries it;
/// categories with nothing to report read `None`.
pub fn editor_annotations_block(sets: &[AnnotationSet]) -> String {
    let mut grouped: BTreeMap<MqmCategory, Vec<&ErrorAnnotation>> = BTreeMap::new();
    for set in sets {
        if let Some(scope) = set.category {
            grouped.entry(scope).or_default();
        }
        for a in &set.annotations {
            grouped.entry(a.category).or_default().push(a);
        }
    }
    if grouped.is_empty() {
        return serialize_findings(&[]);
    }
    grouped
        .iter()
        .map(|(category, findings)| {
            let body = if findings.is_empty() {
                "None".to_string()
            } else {
                findings.iter().map(|a| serialize_one(a)).collect::<Vec<_>>().join("\n")
            };
            format!("{} Errors\n{}", category.display_name(), body)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece<'a> {
    Literal(&'a str),
    Slot(&'a str),
}

fn split_template(body: &str) -> Vec<Piece<'_>> {
    let mut pieces = Vec::new();
    let mut literal_start = 0;
    let mut cursor = 0;
    while let Some(rel) = body[cursor..].find("{{") {
        let open = cursor + rel;
        let Some(close_rel) = body[open + 2..].find("}}") else {
            break;
        };
        let name = &body[open + 2..open + 2 + close_rel];
        if is_placeholder_name(name) {
            if open > literal_start {
                pieces.push(Piece::Literal(&body[literal_start..open]));
            }
            pieces.push(Piece::Slot(name));
            cursor = open + 2 + close_rel + 2;
            literal_start = cursor;
        } else {
            cursor = open + 2;
        }
    }
    if literal_start < body.len() {
        pieces.push(Piece::Literal(&body[literal_start..]));
    }
    pieces
}

fn is_placeholder_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_lowercase() || c == '_')
}

pub fn placeholder_names(body: &str) -> Vec<String> {
    split_template(body)
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(name) => Some(name.to_string()),
            Piece::Literal(_) => None,
        })
        .collect()
}

/// Single-pass substitution; unknown placeholders are left untouched.
pub fn render(body: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(body.len() + 256);
    for piece in split_template(body) {
        match piece {
            Piece::Literal(s) => out.push_str(s),
            Piece::Slot(name) => match values.iter().find(|(k, _)| *k == name) {
                Some((_, v)) => out.push_str(v),
                None => {
                    out.push_str("{{");
                    out.push_str(name);
                    out.push_str("}}");
                }
            },
        }
    }
    out
}

/// Inverse of [`render`]: recovers placeholder values from a rendered prompt.
///
/// Each slot takes the shortest text for which the remainder still fits, so this
/// is exact whenever no value contains the literal text that follows its slot.
/// Returns `None` when the rendered text does not fit the template or a
/// repeated placeholder takes two different values.
pub fn extract_placeholders(body: &str, rendered: &str) -> Option<BTreeMap<String, String>> {
    let pieces = split_template(body);
    let mut values = BTreeMap::new();
    fit(&pieces, rendered, &mut values).then_some(values)
}

fn fit<'a>(pieces: &[Piece<'a>], rest: &str, values: &mut BTreeMap<String, String>) -> bool {
    match pieces.split_first() {
        None => rest.is_empty(),
        Some((Piece::Literal(lit), tail)) => rest.strip_prefix(lit).is_some_and(|r| fit(tail, r, values)),
        Some((Piece::Slot(name), tail)) => {
            let candidates: Vec<usize> = match tail.first() {
                Some(Piece::Literal(next)) => rest.match_indices(next).map(|(at, _)| at).collect(),
                Some(Piece::Slot(_)) => return false,
                None => vec![rest.len()],
            };
            for at in candidates {
                let value = &rest[..at];
                let previous = values.get(*name).cloned();
                if previous.as_deref().is_some_and(|p| p != value) {
                    continue;
                }
                values.insert(name.to_string(), value.to_string());
                if fit(tail, &rest[at..], values) {
                    return true;
                }
                match previous {
                    Some(p) => values.insert(name.to_string(), p),
                    None => values.remove(*name),
                };
            }
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Severity;

    fn en_de() -> LanguagePair {
        LanguagePair::new("en", "de").unwrap()
    }

    #[test]
    fn embedded_templates_validate() {
        let lib = PromptLibrary::default();
        for t in lib.templates() {
            t.validate().unwrap_or_else(|e| panic!("{}: {e}", t.id));
        }
        assert_eq!(lib.templates().count(), 10);
    }

    #[test]
    fn translator_prompt() {
        let lib = PromptLibrary::default();
        let p = lib.render_translator(&en_de(), "Hello").unwrap();
        assert!(p.contains("Translate the following"));
        assert!(p.contains("Hello"));
        assert!(lib.render_translator(&en_de(), "  ").is_err());
        let p = lib.render_translator(&"zh-en".parse().unwrap(), "你好").unwrap();
        assert!(p.contains("Chinese") && p.contains("English"));
    }

    #[test]
    fn evaluator_prompts() {
        let lib = PromptLibrary::default();
        let pair = en_de();
        let acc = lib.render_evaluator(MqmCategory::Accuracy, &pair, "s", "d");
        assert!(acc.contains("Accuracy Errors"));
        let style = lib.render_evaluator(MqmCategory::Style, &pair, "s", "d");
        for sub in [
            "Company Style",
            "Do Not Translate",
            "Inconsistency",
            "Lacks Creativity",
            "Register",
            "Unnatural Flow",
        ] {
            assert!(style.contains(sub), "{sub}");
        }
        let design = lib.render_evaluator(MqmCategory::DesignAndMarkup, &pair, "s", "d");
        assert!(design.contains("Markup Tag"));
        for c in MqmCategory::ALL {
            let p = lib.render_evaluator(c, &pair, "SRC", "DRAFT");
            for token in ["[Critical]", "[Major]", "[Minor]"] {
                assert!(p.contains(token), "{c} {token}");
            }
            assert!(p.contains("Source (English): SRC"));
            assert!(p.contains("Target (German): DRAFT"));
        }
    }

    #[test]
    fn editor_block_formats() {
        let lib = PromptLibrary::default();
        let mut acc = AnnotationSet::new("s1", "d1");
        acc.category = Some(MqmCategory::Accuracy);
        acc.annotations.push(
            ErrorAnnotation::new(MqmCategory::Accuracy, "mistranslation", Severity::Major, "wrong sense").unwrap(),
        );
        let p = lib
            .render_editor(&en_de(), "src", "draft", &[acc], EditorContext::Normalized)
            .unwrap();
        assert!(p.contains("major: accuracy/mistranslation - wrong sense"));
        assert!(p.contains("Always resolve critical errors"));
        assert!(lib
            .render_editor(&en_de(), "src", "draft", &[], EditorContext::Normalized)
            .is_err());
    }

    #[test]
    fn editor_block_empty_sets_read_none() {
        let sets: Vec<AnnotationSet> = [MqmCategory::Accuracy, MqmCategory::Style]
            .iter()
            .map(|c| {
                let mut s = AnnotationSet::new("s", "d");
                s.category = Some(*c);
                s
            })
            .collect();
        assert_eq!(
            editor_annotations_block(&sets),
            "Accuracy Errors\nNone\n\nStyle Errors\nNone"
        );
    }

    #[test]
    fn editor_block_concatenates_same_category_in_set_order() {
        let mk = |e: &str| {
            let mut s = AnnotationSet::new("s", "d");
            s.category = Some(MqmCategory::Style);
            s.annotations
                .push(ErrorAnnotation::new(MqmCategory::Style, "register", Severity::Minor, e).unwrap());
            s
        };
        let block = editor_annotations_block(&[mk("first"), mk("second")]);
        assert_eq!(
            block,
            "Style Errors\nminor: style/register - first\nminor: style/register - second"
        );
    }

    #[test]
    fn single_agent_prompt() {
        let lib = PromptLibrary::default();
        let p = lib.render_single_agent(&en_de(), "Hello", "Hallo").unwrap();
        assert!(p.contains("\"no-error\""));
        assert!(p.contains("Please review your translation above. Identify any errors"));
        for c in MqmCategory::ALL {
            assert!(p.contains(c.display_name()), "{c}");
        }
        assert!(lib.render_single_agent(&en_de(), "Hello", "").is_err());
    }

    #[test]
    fn render_is_single_pass() {
        let out = render("a {{x}} b {{y}}", &[("x", "{{y}}"), ("y", "Y")]);
        assert_eq!(out, "a {{y}} b Y");
    }

    #[test]
    fn extract_recovers_values() {
        let lib = PromptLibrary::default();
        let body = &lib.template(TemplateId::Translator).body;
        let rendered = lib.render_translator(&en_de(), "Guten Morgen, Welt").unwrap();
        let values = extract_placeholders(body, &rendered).unwrap();
        assert_eq!(values[SOURCE_TEXT], "Guten Morgen, Welt");
        assert_eq!(values[TARGET_LANG], "German");
    }

    #[test]
    fn override_validation() {
        let mut lib = PromptLibrary::default();
        let bad = lib.set_override(TemplateId::Translator, "Translate: {{source_text}}".to_string());
        assert!(matches!(bad, Err(PromptError::MissingPlaceholder { .. })));
        let bad = lib.set_override(
            TemplateId::Evaluator(MqmCategory::Style),
            "{{source_lang}} {{target_lang}} {{source_text}} {{draft_text}}".to_string(),
        );
        assert!(matches!(bad, Err(PromptError::MissingSeverityToken { .. })));
        lib.set_override(
            TemplateId::Translator,
            "{{source_lang}}>{{target_lang}}: {{source_text}}".to_string(),
        )
        .unwrap();
        assert_eq!(lib.render_translator(&en_de(), "Hi").unwrap(), "English>German: Hi");
    }

    #[test]
    fn template_ids_roundtrip() {
        for id in TemplateId::all() {
            assert_eq!(id.name().parse::<TemplateId>().unwrap(), id);
        }
    }
}

//! Reading MQM annotations out of free model text, and writing them back in the
//! one-line-per-finding form the editor consumes.
//!
//! Accepted finding lines (case-insensitive, brackets optional):
//!
//! ```text
//! [Major]: [accuracy/addition] - explanation
//! [Major]: accuracy/addition - explanation
//! major: accuracy/addition – explanation
//! ```
//!
//! `None`, `no-error` and `No error.` lines, and findings whose explanation is
//! `None`, mark the absence of a finding. Parsing never fails: every line ends
//! up as an annotation, an absence marker, a structural line (blank, headings)
//! or a rejected line.

use crate::error::CoreError;
use crate::types::{
    category_from_slug, normalize_slug, parse_severity_token, AnnotationSet, ErrorAnnotation, MqmCategory,
    SeverityToken,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineDisposition {
    Annotation,
    Absence,
    Structural,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    /// 1-based line number in the raw reply.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseReport {
    pub set: AnnotationSet,
    pub warnings: Vec<ParseWarning>,
    pub rejected_lines: Vec<String>,
    /// One entry per input line.
    pub dispositions: Vec<LineDisposition>,
}

impl ParseReport {
    pub fn count(&self, disposition: LineDisposition) -> usize {
        self.dispositions.iter().filter(|d| **d == disposition).count()
    }

    /// Attaches identity to the parsed set and stamps every finding with `origin`.
    pub fn into_set(self, segment_id: &str, draft_id: &str, origin: &str) -> AnnotationSet {
        let mut set = self.set;
        set.segment_id = segment_id.to_string();
        set.draft_id = draft_id.to_string();
        for a in &mut set.annotations {
            a.origin = origin.to_string();
        }
        set
    }
}

enum LineOutcome {
    Annotation(ErrorAnnotation, Vec<String>),
    Absence,
    Structural,
    Rejected(String),
}

pub fn parse_annotations(raw: &str, expected_category: Option<MqmCategory>) -> ParseReport {
    let mut report = ParseReport {
        set: AnnotationSet {
            raw_text: raw.to_string(),
            ..AnnotationSet::default()
        },
        warnings: Vec::new(),
        rejected_lines: Vec::new(),
        dispositions: Vec::new(),
    };

    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        let disposition = match parse_line(line) {
            LineOutcome::Annotation(annotation, notes) => {
                for reason in notes {
                    report.warnings.push(ParseWarning { line: line_no, reason });
                }
                if let Some(expected) = expected_category {
                    if annotation.category != expected {
                        report.warnings.push(ParseWarning {
                            line: line_no,
                            reason: format!(
                                "category `{}` outside evaluator scope `{}`",
                                annotation.category, expected
                            ),
                        });
                    }
                }
                report.set.annotations.push(annotation);
                LineDisposition::Annotation
            }
            LineOutcome::Absence => LineDisposition::Absence,
            LineOutcome::Structural => LineDisposition::Structural,
            LineOutcome::Rejected(reason) => {
                report.warnings.push(ParseWarning { line: line_no, reason });
                report.rejected_lines.push(line.to_string());
                LineDisposition::Rejected
            }
        };
        report.dispositions.push(disposition);
    }
    report
}

fn is_absence_text(text: &str) -> bool {
    let slug = normalize_slug(text);
    matches!(
        slug.as_str(),
        "none" | "no_error" | "no_errors" | "noerror" | "no_error_detected" | "no_errors_found"
    ) || slug.starts_with("none_if")
}

fn parse_line(line: &str) -> LineOutcome {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return LineOutcome::Structural;
    }
    let body = trimmed.trim_start_matches(['*', '-', '•', '>', '#', ' ', '\t']);
    if body.is_empty() {
        return LineOutcome::Structural;
    }
    if is_absence_text(body) {
        return LineOutcome::Absence;
    }
    if is_heading(body) {
        return LineOutcome::Structural;
    }

    let Some((colon, colon_len)) = body
        .char_indices()
        .find(|(_, c)| *c == ':' || *c == '：')
        .map(|(i, c)| (i, c.len_utf8()))
    else {
        return LineOutcome::Rejected("no severity separator".to_string());
    };

    let severity_raw = body[..colon].trim_matches(['[', ']', '*', '`', ' ', '\t']);
    let severity = match parse_severity_token(severity_raw) {
        Some(SeverityToken::Present(sev)) => sev,
        Some(SeverityToken::Absent) => return LineOutcome::Absence,
        None => {
            return LineOutcome::Rejected(format!("unrecognized severity `{severity_raw}`"));
        }
    };

    let rest = body[colon + colon_len..].trim();
    let (head, explanation) = match find_explanation_separator(rest) {
        Some((at, len)) => (&rest[..at], rest[at + len..].trim()),
        None => (rest, ""),
    };
    let head = head.trim_matches(['[', ']', '*', '`', ' ', '\t']);

    let Some((category_raw, subcategory_raw)) = head.split_once('/') else {
        return LineOutcome::Rejected(format!("missing category/subcategory in `{head}`"));
    };
    let subcategory = normalize_slug(subcategory_raw.trim_matches(['[', ']', '*', '`']));
    if is_absence_text(explanation) || subcategory == "error_subcategory" {
        return LineOutcome::Absence;
    }
    let category = match category_from_slug(category_raw.trim_matches(['[', ']', '*', '`'])) {
        Ok(c) => c,
        Err(_) => {
            return LineOutcome::Rejected(format!("unknown category `{}`", category_raw.trim()));
        }
    };
    if subcategory.is_empty() {
        return LineOutcome::Rejected("empty subcategory".to_string());
    }

    let mut notes = Vec::new();
    if !category.is_known_subcategory(&subcategory) {
        notes.push(format!("subcategory `{subcategory}` not in the {category} list"));
    }
    let annotation = ErrorAnnotation {
        category,
        subcategory,
        severity,
        explanation: explanation.to_string(),
        origin: String::new(),
    };
    LineOutcome::Annotation(annotation, notes)
}

/// "MQM annotations:" and "<Category> Errors" lines.
fn is_heading(body: &str) -> bool {
    let slug = normalize_slug(body);
    if slug == "mqm_annotations" || slug == "annotations" {
        return true;
    }
    slug.strip_suffix("_errors")
        .is_some_and(|prefix| category_from_slug(prefix).is_ok())
}

/// Byte offset and length of the dash separating `category/sub` from the explanation.
/// En and em dashes always separate; an ASCII hyphen only when it stands apart from the slug.
fn find_explanation_separator(rest: &str) -> Option<(usize, usize)> {
    let mut prev: Option<char> = None;
    let mut iter = rest.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        let next = iter.peek().map(|(_, n)| *n);
        match c {
            '–' | '—' => return Some((i, c.len_utf8())),
            '-' => {
                let before_ok = prev.is_none_or(|p| p.is_whitespace() || p == ']' || p == '*' || p == '`');
                let after_ok = next.is_none_or(|n| n.is_whitespace());
                if before_ok && after_ok {
                    return Some((i, 1));
                }
            }
            _ => {}
        }
        prev = Some(c);
    }
    None
}

/// One line per finding, `severity: category/subcategory - explanation`,
/// grouped in category order. An empty set serializes to `None`.
pub fn serialize_annotations(set: &AnnotationSet) -> String {
    serialize_findings(&set.annotations)
}

pub fn serialize_findings(findings: &[ErrorAnnotation]) -> String {
    if findings.is_empty() {
        return "None".to_string();
    }
    let mut ordered: Vec<&ErrorAnnotation> = findings.iter().collect();
    ordered.sort_by_key(|a| a.category);
    ordered.iter().map(|a| serialize_one(a)).collect::<Vec<_>>().join("\n")
}

pub fn serialize_one(a: &ErrorAnnotation) -> String {
    let explanation = a.explanation.split_whitespace().collect::<Vec<_>>().join(" ");
    format!(
        "{}: {}/{} - {}",
        a.severity.as_str(),
        a.category.slug(),
        a.subcategory,
        explanation
    )
    .trim_end()
    .to_string()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditorText {
    pub text: String,
    pub warnings: Vec<String>,
}

const TRANSLATION_LABELS: [&str; 8] = [
    "final translation",
    "final revised translation",
    "final revised sentence",
    "revised translation",
    "refined translation",
    "improved translation",
    "corrected translation",
    "translation",
];

/// Strips labels, code fences and wrapping quotes from an editor reply.
pub fn extract_editor_translation(raw: &str) -> Result<EditorText, CoreError> {
    let without_fences: Vec<&str> = raw.lines().filter(|l| !l.trim_start().starts_with("```")).collect();
    let mut text = without_fences.join("\n").trim().to_string();
    loop {
        let stripped = strip_label(&text).unwrap_or(&text);
        let stripped = strip_quotes(stripped.trim()).trim();
        if stripped == text {
            break;
        }
        text = stripped.to_string();
    }
    if text.is_empty() {
        return Err(CoreError::EmptyEditorOutput);
    }
    let mut warnings = Vec::new();
    if text.contains("\n\n") || text.contains("\r\n\r\n") {
        warnings.push("editor reply spans multiple paragraphs".to_string());
    }
    Ok(EditorText { text, warnings })
}

/// Pulls the corrected translation out of a self-refinement reply.
/// Looks for the last labelled line; `None` if the reply carries no label.
pub fn extract_refined_translation(raw: &str) -> Option<String> {
    let lines: Vec<&str> = raw.lines().collect();
    let (idx, inline) = lines.iter().enumerate().rev().find_map(|(i, line)| {
        let cleaned = line.trim().trim_start_matches(['*', '#', '-', ' ']);
        strip_label(cleaned).map(|rest| (i, rest.trim().trim_matches('*').trim()))
    })?;
    let text = if inline.is_empty() {
        lines[idx + 1..]
            .iter()
            .skip_while(|l| l.trim().is_empty())
            .take_while(|l| !l.trim().is_empty())
            .map(|l| l.trim())
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        inline.to_string()
    };
    let text = strip_quotes(text.trim()).trim().to_string();
    (!text.is_empty()).then_some(text)
}

fn strip_label(text: &str) -> Option<&str> {
    let lower = text.to_lowercase();
    for label in TRANSLATION_LABELS {
        if lower.starts_with(label) && text.is_char_boundary(label.len()) {
            let rest = text[label.len()..].trim_start_matches(['*', ' ']);
            if let Some(after) = rest.strip_prefix(':').or_else(|| rest.strip_prefix('：')) {
                return Some(after.trim_start_matches('*'));
            }
        }
    }
    None
}

fn strip_quotes(text: &str) -> &str {
    const PAIRS: [(char, char); 6] = [
        ('"', '"'),
        ('“', '”'),
        ('「', '」'),
        ('«', '»'),
        ('\'', '\''),
        ('『', '』'),
    ];
    for (open, close) in PAIRS {
        if let Some(inner) = text.strip_prefix(open).and_then(|t| t.strip_suffix(close)) {
            if !inner.contains(open) && !inner.contains(close) {
                return inner;
            }
        }
    }
    text
}

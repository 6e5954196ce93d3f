//! Domain vocabulary shared by every stage of the translation pipeline.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CoreError;

/// Languages evaluated in both directions against English.
pub const SUPPORTED_LANGUAGES: [&str; 7] = ["en", "de", "he", "ja", "ru", "zh", "ar"];

/// Human-readable English name for a supported ISO-639-1 code.
pub fn language_name(code: &str) -> &str {
    match code {
        "en" => "English",
        "de" => "German",
        "he" => "Hebrew",
        "ja" => "Japanese",
        "ru" => "Russian",
        "zh" => "Chinese",
        "ar" => "Arabic",
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LanguagePair {
    pub source: String,
    pub target: String,
}

impl LanguagePair {
    /// Builds a pair restricted to [`SUPPORTED_LANGUAGES`].
    pub fn new(source: &str, target: &str) -> Result<Self, CoreError> {
        Self::build(source, target, false)
    }

    /// Builds a pair, optionally accepting codes outside the supported set.
    pub fn build(source: &str, target: &str, allow_any: bool) -> Result<Self, CoreError> {
        let source = source.trim().to_ascii_lowercase();
        let target = target.trim().to_ascii_lowercase();
        for code in [&source, &target] {
            if code.is_empty() || (!allow_any && !SUPPORTED_LANGUAGES.contains(&code.as_str())) {
                return Err(CoreError::UnsupportedLanguage(code.clone()));
            }
        }
        if source == target {
            return Err(CoreError::SameLanguage(source));
        }
        Ok(Self { source, target })
    }

    pub fn source_name(&self) -> &str {
        language_name(&self.source)
    }

    pub fn target_name(&self) -> &str {
        language_name(&self.target)
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

impl FromStr for LanguagePair {
    type Err = CoreError;

    /// Parses `en-de`, `en_de` or `en→de`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(['-', '_', '→']).filter(|p| !p.is_empty()).collect();
        match parts.as_slice() {
            [src, tgt] => Self::new(src, tgt),
            _ => Err(CoreError::MalformedPair(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub source_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_text: Option<String>,
    pub pair: LanguagePair,
}

impl Segment {
    pub fn new(
        id: impl Into<String>,
        source_text: impl Into<String>,
        reference_text: Option<String>,
        pair: LanguagePair,
    ) -> Result<Self, CoreError> {
        let source_text = source_text.into();
        let id = id.into();
        if source_text.trim().is_empty() {
            return Err(CoreError::EmptySource(id));
        }
        Ok(Self {
            id,
            source_text,
            reference_text,
            pair,
        })
    }
}

/// The seven MQM dimensions, declared in the order the editor prompt lists them.
/// That declaration order is the canonical ordering used for grouping and tiebreaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MqmCategory {
    Accuracy,
    LinguisticConventions,
    Terminology,
    Style,
    LocaleConventions,
    AudienceAppropriateness,
    DesignAndMarkup,
}

impl MqmCategory {
    pub const ALL: [MqmCategory; 7] = [
        MqmCategory::Accuracy,
        MqmCategory::LinguisticConventions,
        MqmCategory::Terminology,
        MqmCategory::Style,
        MqmCategory::LocaleConventions,
        MqmCategory::AudienceAppropriateness,
        MqmCategory::DesignAndMarkup,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            MqmCategory::Accuracy => "accuracy",
            MqmCategory::LinguisticConventions => "linguistic_conventions",
            MqmCategory::Terminology => "terminology",
            MqmCategory::Style => "style",
            MqmCategory::LocaleConventions => "locale_conventions",
            MqmCategory::AudienceAppropriateness => "audience_appropriateness",
            MqmCategory::DesignAndMarkup => "design_and_markup",
        }
    }

    /// Heading used in prompts ("Design and Markup").
    pub fn display_name(self) -> &'static str {
        match self {
            MqmCategory::Accuracy => "Accuracy",
            MqmCategory::LinguisticConventions => "Linguistic Conventions",
            MqmCategory::Terminology => "Terminology",
            MqmCategory::Style => "Style",
            MqmCategory::LocaleConventions => "Locale Conventions",
            MqmCategory::AudienceAppropriateness => "Audience Appropriateness",
            MqmCategory::DesignAndMarkup => "Design and Markup",
        }
    }

    /// Report label; `fluency_label` renames linguistic conventions to "Fluency".
    pub fn report_label(self, fluency_label: bool) -> &'static str {
        match self {
            MqmCategory::LinguisticConventions if fluency_label => "Fluency",
            other => other.display_name(),
        }
    }

    pub fn position(self) -> usize {
        self as usize
    }

    /// Subcategory slugs enumerated by the evaluator prompt for this dimension.
    /// Models drift from these, so membership is advisory only.
    pub fn known_subcategories(self) -> &'static [&'static str] {
        match self {
            MqmCategory::Accuracy => &[
                "addition",
                "mistranslation",
                "mt_hallucination",
                "omission",
                "untranslated",
                "wrong_named_entity",
                "over_translation",
            ],
            MqmCategory::LinguisticConventions => &[
                "agreement",
                "capitalization",
                "grammar",
                "punctuation",
                "spelling",
                "whitespace",
                "word_order",
                "typography",
            ],
            MqmCategory::Terminology => &["term_not_applied", "wrong_term"],
            MqmCategory::Style => &[
                "company_style",
                "do_not_translate",
                "inconsistency",
                "lacks_creativity",
                "register",
                "unnatural_flow",
                "awkward",
            ],
            MqmCategory::LocaleConventions => &[
                "address_format",
                "currency_format",
                "date_time_format",
                "measurement_format",
                "number_format",
                "telephone_format",
            ],
            MqmCategory::AudienceAppropriateness => &["culture_specific_reference", "wrong_language_variety"],
            MqmCategory::DesignAndMarkup => &["markup_tag"],
        }
    }

    pub fn is_known_subcategory(self, subcategory: &str) -> bool {
        self.known_subcategories().contains(&subcategory)
    }
}

impl fmt::Display for MqmCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// Resolves a category name, accepting the aliases found across the prompts
/// and the confusion-matrix reports.
pub fn category_from_slug(slug: &str) -> Result<MqmCategory, CoreError> {
    let normalized = normalize_slug(&slug.replace('&', " and "));
    let category = match normalized.as_str() {
        "accuracy" => MqmCategory::Accuracy,
        "fluency" | "linguistic_conventions" | "linguistic_convention" | "linguistic" => {
            MqmCategory::LinguisticConventions
        }
        "terminology" => MqmCategory::Terminology,
        "style" => MqmCategory::Style,
        "locale_conventions" | "locale_convention" | "locale" => MqmCategory::LocaleConventions,
        "audience_appropriateness" | "audience_appropriate" | "audience" => MqmCategory::AudienceAppropriateness,
        "design_and_markup" | "design_markup" | "design" | "markup" => MqmCategory::DesignAndMarkup,
        _ => return Err(CoreError::UnknownCategory(slug.trim().to_string())),
    };
    Ok(category)
}

/// Lowercases and folds runs of spaces, hyphens and underscores into a single `_`.
/// Other punctuation is dropped.
pub fn normalize_slug(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for ch in raw.trim().chars() {
        if ch.is_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.extend(ch.to_lowercase());
        } else if ch.is_whitespace() || ch == '_' || ch == '-' || ch == '/' {
            pending_sep = true;
        }
    }
    out
}

impl FromStr for MqmCategory {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        category_from_slug(s)
    }
}

impl Serialize for MqmCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.slug())
    }
}

impl<'de> Deserialize<'de> for MqmCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        category_from_slug(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Critical,
    Major,
    Minor,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Critical, Severity::Major, Severity::Minor];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Critical => "critical",
            Severity::Major => "major",
            Severity::Minor => "minor",
        }
    }
}

/// Priority rank: lower resolves first.
pub fn severity_rank(severity: Severity) -> u8 {
    match severity {
        Severity::Critical => 0,
        Severity::Major => 1,
        Severity::Minor => 2,
    }
}

/// Critical > Major > Minor.
impl Ord for Severity {
    fn cmp(&self, other: &Self) -> Ordering {
        severity_rank(*other).cmp(&severity_rank(*self))
    }
}

impl PartialOrd for Severity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of reading a severity token: `no-error`/`none` signal an absent finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeverityToken {
    Present(Severity),
    Absent,
}

pub fn parse_severity_token(token: &str) -> Option<SeverityToken> {
    match normalize_slug(token).as_str() {
        "critical" => Some(SeverityToken::Present(Severity::Critical)),
        "major" => Some(SeverityToken::Present(Severity::Major)),
        "minor" => Some(SeverityToken::Present(Severity::Minor)),
        "no_error" | "noerror" | "none" | "no_errors" => Some(SeverityToken::Absent),
        _ => None,
    }
}

impl FromStr for Severity {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match parse_severity_token(s) {
            Some(SeverityToken::Present(sev)) => Ok(sev),
            _ => Err(CoreError::UnknownSeverity(s.trim().to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnnotation {
    pub category: MqmCategory,
    pub subcategory: String,
    pub severity: Severity,
    pub explanation: String,
    #[serde(default)]
    pub origin: String,
}

impl ErrorAnnotation {
    pub fn new(
        category: MqmCategory,
        subcategory: &str,
        severity: Severity,
        explanation: impl Into<String>,
    ) -> Result<Self, CoreError> {
        let subcategory = normalize_slug(subcategory);
        if subcategory.is_empty() {
            return Err(CoreError::EmptySubcategory);
        }
        Ok(Self {
            category,
            subcategory,
            severity,
            explanation: explanation.into(),
            origin: String::new(),
        })
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = origin.into();
        self
    }

    /// Equality over the MQM content, ignoring which agent produced it.
    pub fn same_finding(&self, other: &Self) -> bool {
        self.category == other.category
            && self.subcategory == other.subcategory
            && self.severity == other.severity
            && self.explanation == other.explanation
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub segment_id: String,
    pub draft_id: String,
    /// Dimension the producing evaluator was scoped to; `None` for whole-taxonomy annotators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<MqmCategory>,
    pub annotations: Vec<ErrorAnnotation>,
    #[serde(default)]
    pub raw_text: String,
    /// Set when the producing evaluator call failed and the set is empty by degradation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AnnotationSet {
    pub fn new(segment_id: impl Into<String>, draft_id: impl Into<String>) -> Self {
        Self {
            segment_id: segment_id.into(),
            draft_id: draft_id.into(),
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    pub fn count(&self, category: MqmCategory) -> usize {
        self.annotations.iter().filter(|a| a.category == category).count()
    }

    /// Stable reorder by category enum order, the canonical serialized order.
    pub fn canonicalized(&self) -> Self {
        let mut out = self.clone();
        out.annotations.sort_by_key(|a| a.category);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    ZeroShot,
    SingleAgent,
    Maats,
}

impl SystemKind {
    pub const ALL: [SystemKind; 3] = [SystemKind::ZeroShot, SystemKind::SingleAgent, SystemKind::Maats];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::ZeroShot => "zero_shot",
            SystemKind::SingleAgent => "single_agent",
            SystemKind::Maats => "maats",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_slug(s).as_str() {
            "zero_shot" | "zeroshot" => Ok(SystemKind::ZeroShot),
            "single_agent" | "singleagent" => Ok(SystemKind::SingleAgent),
            "maats" => Ok(SystemKind::Maats),
            _ => Err(CoreError::UnknownSystem(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DraftStage {
    Initial,
    Refined,
    Final,
}

impl DraftStage {
    pub fn as_str(self) -> &'static str {
        match self {
            DraftStage::Initial => "initial",
            DraftStage::Refined => "refined",
            DraftStage::Final => "final",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationDraft {
    pub draft_id: String,
    pub segment_id: String,
    pub system: SystemKind,
    pub stage: DraftStage,
    pub text: String,
    pub model_id: String,
    pub temperature: f64,
}

impl TranslationDraft {
    /// Draft ids are derived from (segment, system, stage) so reruns reproduce them.
    pub fn new(
        segment_id: &str,
        system: SystemKind,
        stage: DraftStage,
        text: impl Into<String>,
        model_id: &str,
        temperature: f64,
    ) -> Result<Self, CoreError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CoreError::EmptyDraft(segment_id.to_string()));
        }
        if !(0.0..=1.0).contains(&temperature) {
            return Err(CoreError::TemperatureOutOfRange(temperature));
        }
        Ok(Self {
            draft_id: format!("{segment_id}:{}:{}", system.as_str(), stage.as_str()),
            segment_id: segment_id.to_string(),
            system,
            stage,
            text,
            model_id: model_id.to_string(),
            temperature,
        })
    }
}

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("unknown MQM category `{0}`")]
    UnknownCategory(String),
    #[error("unknown severity `{0}`")]
    UnknownSeverity(String),
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("unsupported language code `{0}`")]
    UnsupportedLanguage(String),
    #[error("source and target language are both `{0}`")]
    SameLanguage(String),
    #[error("malformed language pair `{0}`")]
    MalformedPair(String),
    #[error("segment `{0}` has an empty source text")]
    EmptySource(String),
    #[error("draft for segment `{0}` is empty")]
    EmptyDraft(String),
    #[error("subcategory must not be empty")]
    EmptySubcategory,
    #[error("temperature {0} outside [0, 1]")]
    TemperatureOutOfRange(f64),
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error("editor output is empty")]
    EmptyEditorOutput,
}

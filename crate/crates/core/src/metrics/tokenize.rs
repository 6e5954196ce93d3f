use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenScheme {
    /// Lowercased words, punctuation split off as separate tokens.
    WhitespacePunct,
    /// One token per non-space character; used for Chinese and Japanese.
    Character,
}

impl fmt::Display for TokenScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenScheme::WhitespacePunct => "whitespace_punct",
            TokenScheme::Character => "character",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedText {
    pub tokens: Vec<String>,
    pub scheme: TokenScheme,
}

impl TokenizedText {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn scheme_for_target(target_lang: &str) -> TokenScheme {
    match target_lang {
        "zh" | "ja" => TokenScheme::Character,
        _ => TokenScheme::WhitespacePunct,
    }
}

pub fn tokenize(text: &str, scheme: TokenScheme) -> TokenizedText {
    let lowered = text.to_lowercase();
    let tokens = match scheme {
        TokenScheme::Character => lowered
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
        TokenScheme::WhitespacePunct => {
            let mut tokens = Vec::new();
            for word in lowered.split_whitespace() {
                let mut current = String::new();
                for ch in word.chars() {
                    if is_punct(ch) {
                        if !current.is_empty() {
                            tokens.push(std::mem::take(&mut current));
                        }
                        tokens.push(ch.to_string());
                    } else {
                        current.push(ch);
                    }
                }
                if !current.is_empty() {
                    tokens.push(current);
                }
            }
            tokens
        }
    };
    TokenizedText { tokens, scheme }
}

fn is_punct(ch: char) -> bool {
    ch.is_ascii_punctuation() || (!ch.is_alphanumeric() && !ch.is_whitespace())
}

use std::collections::HashMap;

use super::{MetricError, TokenizedText};

pub const MAX_NGRAM: usize = 4;

/// Corpus-level sufficient statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; MAX_NGRAM],
    pub totals: [u64; MAX_NGRAM],
    pub candidate_len: u64,
    pub reference_len: u64,
}

impl BleuStats {
    pub fn add(&mut self, candidate: &[String], reference: &[String]) {
        self.candidate_len += candidate.len() as u64;
        self.reference_len += reference.len() as u64;
        for n in 1..=MAX_NGRAM {
            let cand = ngram_counts(candidate, n);
            let refs = ngram_counts(reference, n);
            for (gram, count) in &cand {
                let clip = refs.get(gram).copied().unwrap_or(0);
                self.matches[n - 1] += (*count).min(clip);
            }
            self.totals[n - 1] += candidate.len().saturating_sub(n - 1) as u64;
        }
    }

    /// Unigram precision is never smoothed; higher orders with zero matches use
    /// add-one smoothing `1 / (total + 1)`.
    pub fn precision(&self, n: usize) -> f64 {
        let (m, t) = (self.matches[n - 1], self.totals[n - 1]);
        if n > 1 && m == 0 {
            return 1.0 / (t as f64 + 1.0);
        }
        if t == 0 {
            return 0.0;
        }
        m as f64 / t as f64
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.candidate_len == 0 {
            return 0.0;
        }
        if self.candidate_len > self.reference_len {
            1.0
        } else {
            (1.0 - self.reference_len as f64 / self.candidate_len as f64).exp()
        }
    }

    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 || self.matches[0] == 0 {
            return 0.0;
        }
        let log_mean = (1..=MAX_NGRAM).map(|n| self.precision(n).ln()).sum::<f64>() / MAX_NGRAM as f64;
        self.brevity_penalty() * log_mean.exp()
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU-4 with uniform weights, clipped counts and brevity penalty, in [0, 1].
pub fn bleu(candidates: &[TokenizedText], references: &[TokenizedText]) -> Result<f64, MetricError> {
    if candidates.len() != references.len() {
        return Err(MetricError::LengthMismatch(candidates.len(), references.len()));
    }
    if candidates.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let scheme = candidates[0].scheme;
    let mut stats = BleuStats::default();
    for (c, r) in candidates.iter().zip(references) {
        for other in [c.scheme, r.scheme] {
            if other != scheme {
                return Err(MetricError::SchemeMismatch(scheme, other));
            }
        }
        stats.add(&c.tokens, &r.tokens);
    }
    Ok(stats.score())
}

pub fn sentence_bleu(candidate: &TokenizedText, reference: &TokenizedText) -> Result<f64, MetricError> {
    bleu(std::slice::from_ref(candidate), std::slice::from_ref(reference))
}

#[cfg(test)]
mod tests {
    use super::super::{tokenize, TokenScheme};
    use super::*;

    fn t(s: &str) -> TokenizedText {
        tokenize(s, TokenScheme::WhitespacePunct)
    }

    #[test]
    fn identity_is_one() {
        let c = t("the quick brown fox jumps");
        assert_eq!(bleu(std::slice::from_ref(&c), std::slice::from_ref(&c)).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(bleu(&[t("a b c d")], &[t("w x y z")]).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(bleu(&[], &[]), Err(MetricError::EmptyCorpus));
        assert_eq!(bleu(&[t("a")], &[]), Err(MetricError::LengthMismatch(1, 0)));
        let zh = tokenize("你好", TokenScheme::Character);
        assert!(matches!(bleu(&[t("a")], &[zh]), Err(MetricError::SchemeMismatch(..))));
    }

    #[test]
    fn brevity_penalty_applies() {
        let stats = {
            let mut s = BleuStats::default();
            s.add(&t("a b").tokens, &t("a b c d").tokens);
            s
        };
        assert!((stats.brevity_penalty() - (-1.0f64).exp()).abs() < 1e-15);
    }
}

//! METEOR-lite: exact-match alignment only, no stemming or synonym stages.
//!
//! `Fmean = 10PR / (R + 9P)`, penalty `0.5 * frag^3` with
//! `frag = (chunks - 1) / (matches - 1)`, so a single contiguous in-order chunk
//! carries no penalty and identical texts score exactly 1.

use super::{MetricError, TokenizedText};

const ALPHA: f64 = 0.9;
const BETA: f64 = 3.0;
const GAMMA: f64 = 0.5;

/// Matched (candidate position, reference position) pairs in candidate order.
pub type Alignment = Vec<(usize, usize)>;

#[derive(Debug, Clone, PartialEq)]
pub struct MeteorScore {
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
    pub matches: usize,
    pub chunks: usize,
}

/// Number of runs that are contiguous and in order on both sides.
pub fn chunk_count(alignment: &[(usize, usize)]) -> usize {
    let mut pairs = alignment.to_vec();
    pairs.sort_unstable();
    let mut chunks = 0;
    let mut prev: Option<(usize, usize)> = None;
    for (i, j) in pairs {
        match prev {
            Some((pi, pj)) if i == pi + 1 && j == pj + 1 => {}
            _ => chunks += 1,
        }
        prev = Some((i, j));
    }
    chunks
}

/// Maximal exact-match alignment, built left to right. At each candidate token
/// the aligner continues the current chunk when it can, otherwise it picks the
/// unused reference occurrence that starts the longest matching run.
fn align(candidate: &[String], reference: &[String]) -> Alignment {
    let mut used = vec![false; reference.len()];
    let mut alignment = Vec::new();
    let mut prev_j: Option<usize> = None;
    for (i, token) in candidate.iter().enumerate() {
        let continues = prev_j
            .map(|j| j + 1)
            .filter(|&j| j < reference.len() && !used[j] && reference[j] == *token);
        let pick = continues.or_else(|| {
            (0..reference.len())
                .filter(|&j| !used[j] && reference[j] == *token)
                .max_by_key(|&j| {
                    let run = candidate[i..]
                        .iter()
                        .zip(&reference[j..])
                        .enumerate()
                        .take_while(|(k, (c, r))| c == r && !used[j + k])
                        .count();
                    // longest run first, earliest position on ties
                    (run, std::cmp::Reverse(j))
                })
        });
        match pick {
            Some(j) => {
                used[j] = true;
                alignment.push((i, j));
                prev_j = Some(j);
            }
            None => prev_j = None,
        }
    }
    alignment
}

pub fn meteor_lite(candidate: &TokenizedText, reference: &TokenizedText) -> Result<MeteorScore, MetricError> {
    if candidate.scheme != reference.scheme {
        return Err(MetricError::SchemeMismatch(candidate.scheme, reference.scheme));
    }
    let alignment = align(&candidate.tokens, &reference.tokens);
    Ok(score_alignment(
        &alignment,
        candidate.tokens.len(),
        reference.tokens.len(),
    ))
}

pub(crate) fn score_alignment(alignment: &[(usize, usize)], cand_len: usize, ref_len: usize) -> MeteorScore {
    let matches = alignment.len();
    if matches == 0 {
        return MeteorScore {
            score: 0.0,
            precision: 0.0,
            recall: 0.0,
            matches: 0,
            chunks: 0,
        };
    }
    let precision = matches as f64 / cand_len as f64;
    let recall = matches as f64 / ref_len as f64;
    let fmean = precision * recall / (ALPHA * precision + (1.0 - ALPHA) * recall);
    let chunks = chunk_count(alignment);
    let frag = if matches > 1 {
        (chunks - 1) as f64 / (matches - 1) as f64
    } else {
        0.0
    };
    let penalty = GAMMA * frag.powf(BETA);
    MeteorScore {
        score: fmean * (1.0 - penalty),
        precision,
        recall,
        matches,
        chunks,
    }
}

//! Independent oracles and input generators shared by the core test suites
//! and the acceptance report.

#![allow(dead_code)]

use std::collections::BTreeMap;

use maats_core::metrics::{chunk_count, tokenize, CategoryCounts, TokenScheme, TokenizedText};
use maats_core::parser::serialize_annotations;
use maats_core::{parse_annotations, severity_rank, AnnotationSet, ErrorAnnotation, MqmCategory, Severity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn words(s: &str) -> TokenizedText {
    tokenize(s, TokenScheme::WhitespacePunct)
}

pub fn category() -> impl Strategy<Value = MqmCategory> {
    prop::sample::select(MqmCategory::ALL.to_vec())
}

pub fn severity() -> impl Strategy<Value = Severity> {
    prop::sample::select(vec![Severity::Critical, Severity::Major, Severity::Minor])
}

pub fn subcategory(cat: MqmCategory) -> impl Strategy<Value = String> {
    let known: Vec<String> = cat.known_subcategories().iter().map(|s| s.to_string()).collect();
    prop_oneof![prop::sample::select(known), "[a-z]{1,6}(_[a-z]{1,6})?",]
}

pub fn explanation() -> impl Strategy<Value = String> {
    // words with interior hyphens, commas and quotes; "None" alone means absence
    prop::collection::vec("[A-Za-z][a-z,'.-]{0,8}", 1..8)
        .prop_map(|w| w.join(" "))
        .prop_filter("absence sentinel", |s| !s.eq_ignore_ascii_case("none"))
}

pub fn annotation() -> impl Strategy<Value = ErrorAnnotation> {
    (category(), severity())
        .prop_flat_map(|(c, s)| (Just(c), subcategory(c), Just(s), explanation()))
        .prop_map(|(c, sub, s, e)| ErrorAnnotation::new(c, &sub, s, e).unwrap())
}

pub fn annotation_set(segment: &'static str) -> impl Strategy<Value = AnnotationSet> {
    prop::collection::vec(annotation(), 0..6).prop_map(move |annotations| {
        let mut set = AnnotationSet::new(segment, "d");
        set.annotations = annotations;
        set
    })
}

/// Every maximal-size exact alignment; returns (matches, fewest chunks).
pub fn brute_force_alignment(c: &[String], r: &[String]) -> (usize, usize) {
    fn rec(
        i: usize,
        c: &[String],
        r: &[String],
        used: &mut Vec<bool>,
        al: &mut Vec<(usize, usize)>,
        best: &mut (usize, usize),
    ) {
        if i == c.len() {
            let m = al.len();
            let ch = chunk_count(al);
            if m > best.0 || (m == best.0 && ch < best.1) {
                *best = (m, ch);
            }
            return;
        }
        rec(i + 1, c, r, used, al, best);
        for j in 0..r.len() {
            if !used[j] && r[j] == c[i] {
                used[j] = true;
                al.push((i, j));
                rec(i + 1, c, r, used, al, best);
                al.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, usize::MAX);
    rec(0, c, r, &mut vec![false; r.len()], &mut Vec::new(), &mut best);
    if best.0 == 0 {
        best.1 = 0;
    }
    best
}

pub fn meteor_from_counts(matches: usize, chunks: usize, cand_len: usize, ref_len: usize) -> f64 {
    if matches == 0 {
        return 0.0;
    }
    let p = matches as f64 / cand_len as f64;
    let r = matches as f64 / ref_len as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let frag = if matches > 1 {
        (chunks - 1) as f64 / (matches - 1) as f64
    } else {
        0.0
    };
    fmean * (1.0 - 0.5 * frag.powi(3))
}

pub const SEGMENTS: [&str; 2] = ["s1", "s2"];
pub const CATEGORIES: [MqmCategory; 5] = [
    MqmCategory::Accuracy,
    MqmCategory::LinguisticConventions,
    MqmCategory::Terminology,
    MqmCategory::Style,
    MqmCategory::LocaleConventions,
];

/// All multisets of (segment, category) slots with at most `max` elements.
pub fn multisets(max: usize) -> Vec<Vec<usize>> {
    let slots = SEGMENTS.len() * CATEGORIES.len();
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for ms in &frontier {
            let start = ms.last().copied().unwrap_or(0);
            for s in start..slots {
                let mut m: Vec<usize> = ms.clone();
                m.push(s);
                next.push(m);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn to_sets(ms: &[usize]) -> Vec<AnnotationSet> {
    SEGMENTS
        .iter()
        .enumerate()
        .map(|(si, id)| {
            let mut set = AnnotationSet::new(*id, "d");
            for slot in ms.iter().filter(|s| *s / CATEGORIES.len() == si) {
                let category = CATEGORIES[slot % CATEGORIES.len()];
                set.annotations
                    .push(ErrorAnnotation::new(category, "x", Severity::Major, "").unwrap());
            }
            set
        })
        .collect()
}

/// Maximum pairing of predicted to gold findings (same segment and category),
/// found by trying every assignment.
pub fn brute_force_confusion(pred: &[usize], gold: &[usize]) -> BTreeMap<MqmCategory, CategoryCounts> {
    fn rec(
        i: usize,
        pred: &[usize],
        gold: &[usize],
        used: &mut Vec<bool>,
        pairs: &mut Vec<usize>,
        best: &mut Vec<usize>,
    ) {
        if i == pred.len() {
            if pairs.len() > best.len() {
                *best = pairs.clone();
            }
            return;
        }
        rec(i + 1, pred, gold, used, pairs, best);
        for g in 0..gold.len() {
            if !used[g] && gold[g] == pred[i] {
                used[g] = true;
                pairs.push(pred[i]);
                rec(i + 1, pred, gold, used, pairs, best);
                pairs.pop();
                used[g] = false;
            }
        }
    }
    let mut best = Vec::new();
    rec(0, pred, gold, &mut vec![false; gold.len()], &mut Vec::new(), &mut best);

    let mut out: BTreeMap<MqmCategory, CategoryCounts> = MqmCategory::ALL
        .iter()
        .map(|c| (*c, CategoryCounts::default()))
        .collect();
    let cat = |slot: &usize| CATEGORIES[slot % CATEGORIES.len()];
    for s in &best {
        out.get_mut(&cat(s)).unwrap().tp += 1;
    }
    for s in pred {
        out.get_mut(&cat(s)).unwrap().fp += 1;
    }
    for s in gold {
        out.get_mut(&cat(s)).unwrap().fn_ += 1;
    }
    for c in out.values_mut() {
        c.fp -= c.tp;
        c.fn_ -= c.tp;
    }
    out
}

pub const BOOT_A: [f64; 10] = [0.62, 0.55, 0.71, 0.48, 0.66, 0.59, 0.73, 0.51, 0.64, 0.58];
pub const BOOT_B: [f64; 10] = [0.60, 0.57, 0.65, 0.50, 0.61, 0.60, 0.70, 0.47, 0.66, 0.55];
/// Frozen after agreement between the library and `sequential_bootstrap`.
pub const BOOT_FROZEN_P_SEED_42: f64 = 0.0528;

/// Straight-line reimplementation on exact integer hundredths, one resample
/// at a time, no thread pool.
pub fn sequential_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> f64 {
    let hundredths = |v: &[f64]| v.iter().map(|x| (x * 100.0).round() as i64).collect::<Vec<_>>();
    let (a, b) = (hundredths(a), hundredths(b));
    let n = a.len();
    let mut failures = 0usize;
    for r in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let sum_a: i64 = idx.iter().map(|&i| a[i]).sum();
        let sum_b: i64 = idx.iter().map(|&i| b[i]).sum();
        if sum_a <= sum_b {
            failures += 1;
        }
    }
    failures as f64 / resamples as f64
}

/// serialize then parse gives back the canonical form of `set`.
pub fn check_round_trip(set: &AnnotationSet) -> Result<(), String> {
    let text = serialize_annotations(set);
    let report = parse_annotations(&text, None);
    if !report.rejected_lines.is_empty() {
        return Err(format!("rejected {:?}", report.rejected_lines));
    }
    let back = report.into_set(&set.segment_id, &set.draft_id, "");
    let expected = set.canonicalized();
    if back.annotations.len() != expected.annotations.len() {
        return Err(format!(
            "{} findings back, {} expected",
            back.annotations.len(),
            expected.annotations.len()
        ));
    }
    for (a, b) in back.annotations.iter().zip(&expected.annotations) {
        if !a.same_finding(b) {
            return Err(format!("{a:?} vs {b:?}"));
        }
    }
    Ok(())
}

/// `out` is the stable severity-then-category ordering of the pooled input.
pub fn check_prioritized(sets: &[AnnotationSet], out: &[ErrorAnnotation]) -> Result<(), String> {
    let input: Vec<ErrorAnnotation> = sets.iter().flat_map(|s| s.annotations.clone()).collect();
    if out.len() != input.len() {
        return Err(format!("{} out, {} in", out.len(), input.len()));
    }
    for w in out.windows(2) {
        if (severity_rank(w[0].severity), w[0].category) > (severity_rank(w[1].severity), w[1].category) {
            return Err(format!("out of order: {:?} before {:?}", w[0], w[1]));
        }
    }
    // std's sort is stable, so within a key input order survives
    let mut expected = input;
    expected.sort_by_key(|a| (severity_rank(a.severity), a.category));
    if out != expected.as_slice() {
        return Err("not the stable ordering of the input".to_string());
    }
    Ok(())
}

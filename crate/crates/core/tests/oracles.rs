//! Metric and statistic checks against independent oracles: hand-worked
//! values, brute-force enumeration, closed forms and a reference distribution
//! implementation.

mod support;

use maats_core::metrics::{
    anova_f, bleu, borda, confusion, meteor_lite, paired_bootstrap, MatchMode, RankingBallot, TokenScheme,
    TokenizedText,
};
use maats_core::{MqmCategory, SystemKind};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use support::*;

// ---------------------------------------------------------------- BLEU

#[test]
fn bleu_hand_worked_clipped_counts() {
    // candidate "the the the cat", reference "the cat sat down"
    // 1-grams: the×3 clipped to 1, cat×1 -> 2/4
    // 2-grams: {the the ×2, the cat ×1}, only "the cat" in reference -> 1/3
    // 3-grams: {the the the, the the cat}, none match -> add-one 1/(2+1)
    // 4-grams: {the the the cat}, no match -> add-one 1/(1+1)
    // equal lengths, brevity penalty 1
    let precisions = [2.0 / 4.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 2.0];
    let expected = precisions.iter().map(|p: &f64| p.ln()).sum::<f64>() / 4.0;
    let expected = expected.exp();
    assert!((expected - 1.0 / 6f64.sqrt()).abs() < 1e-15);

    let got = bleu(&[words("the the the cat")], &[words("the cat sat down")]).unwrap();
    assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
}

#[test]
fn bleu_identity_and_disjoint() {
    let c = words("a quick brown fox");
    assert_eq!(bleu(std::slice::from_ref(&c), std::slice::from_ref(&c)).unwrap(), 1.0);
    assert_eq!(
        bleu(&[words("one two three four")], &[words("five six seven eight")]).unwrap(),
        0.0
    );
}

// ---------------------------------------------------------------- METEOR-lite

#[test]
fn meteor_two_chunk_fixtures() {
    // values frozen from the exhaustive alignment oracle
    let cases = [
        ("sat on mat the cat", "the cat sat on mat", 0.9921875),
        ("the cat was on the mat", "on the mat the cat sat", 0.8268229166666667),
    ];
    for (c, r, frozen) in cases {
        let (c, r) = (words(c), words(r));
        let (m, ch) = brute_force_alignment(&c.tokens, &r.tokens);
        assert_eq!(ch, 2);
        let oracle = meteor_from_counts(m, ch, c.len(), r.len());
        assert!((oracle - frozen).abs() < 1e-12);
        let got = meteor_lite(&c, &r).unwrap();
        assert_eq!(got.matches, m);
        assert_eq!(got.chunks, ch);
        assert!((got.score - frozen).abs() < 1e-12, "{} vs {frozen}", got.score);
    }
}

fn small_tokens(alphabet: &'static [&'static str]) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(alphabet), 1..=6).prop_map(|v| v.into_iter().map(String::from).collect())
}

fn to_text(tokens: Vec<String>) -> TokenizedText {
    TokenizedText {
        tokens,
        scheme: TokenScheme::WhitespacePunct,
    }
}

proptest! {
    #[test]
    fn meteor_matches_oracle_without_repeats(
        c in Just(["a", "b", "c", "d", "e", "f"]).prop_shuffle().prop_flat_map(|v| (0usize..=6).prop_map(move |k| v[..k.max(1)].to_vec())),
        r in Just(["a", "b", "c", "d", "e", "f", "g"]).prop_shuffle().prop_flat_map(|v| (1usize..=6).prop_map(move |k| v[..k].to_vec())),
    ) {
        let c = to_text(c.into_iter().map(String::from).collect());
        let r = to_text(r.into_iter().map(String::from).collect());
        let (m, ch) = brute_force_alignment(&c.tokens, &r.tokens);
        let got = meteor_lite(&c, &r).unwrap();
        prop_assert_eq!(got.matches, m);
        prop_assert_eq!(got.chunks, ch);
        prop_assert!((got.score - meteor_from_counts(m, ch, c.len(), r.len())).abs() < 1e-12);
    }

    #[test]
    fn meteor_maximal_and_never_better_than_oracle(
        c in small_tokens(&["x", "y", "z"]),
        r in small_tokens(&["x", "y", "z"]),
    ) {
        let (c, r) = (to_text(c), to_text(r));
        let (m, ch) = brute_force_alignment(&c.tokens, &r.tokens);
        let got = meteor_lite(&c, &r).unwrap();
        prop_assert_eq!(got.matches, m);
        prop_assert!(got.chunks >= ch);
        prop_assert!(got.score <= meteor_from_counts(m, ch, c.len(), r.len()) + 1e-12);
    }
}

// ---------------------------------------------------------------- confusion

#[test]
fn confusion_equals_exhaustive_oracle() {
    let all = multisets(3);
    assert_eq!(all.len(), 286);
    let started = std::time::Instant::now();
    let mut checked = 0usize;
    for pred in &all {
        let pred_sets = to_sets(pred);
        for gold in &all {
            let gold_sets = to_sets(gold);
            let got = confusion(&pred_sets, &gold_sets, MatchMode::CategoryCount).unwrap();
            let oracle = brute_force_confusion(pred, gold);
            assert_eq!(got.per_category, oracle, "pred {pred:?} gold {gold:?}");
            for c in MqmCategory::ALL {
                let n_gold: usize = gold_sets.iter().map(|s| s.count(c)).sum();
                let n_pred: usize = pred_sets.iter().map(|s| s.count(c)).sum();
                let k = got.get(c);
                assert_eq!(k.tp + k.fn_, n_gold as u64);
                assert_eq!(k.tp + k.fp, n_pred as u64);
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 286 * 286);
    assert!(started.elapsed().as_secs_f64() < 10.0, "{:?}", started.elapsed());
}

// ---------------------------------------------------------------- ANOVA

#[test]
fn anova_hand_computation() {
    // means 1.5, 3.5, 5.5; grand mean 3.5
    // SSB = 2 * (4 + 0 + 4) = 16, SSW = 3 * 0.5 = 1.5
    // F = (16 / 2) / (1.5 / 3) = 16 on (2, 3) df
    // with two numerator df the tail is (1 + 2F/3)^(-3/2) = (35/3)^(-3/2)
    let r = anova_f(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
    assert!((r.f - 16.0).abs() < 1e-9);
    assert_eq!((r.df_between, r.df_within), (2, 3));
    let closed_form = (35.0f64 / 3.0).powf(-1.5);
    assert!((r.p - closed_form).abs() < 1e-6);
    let reference = FisherSnedecor::new(2.0, 3.0).unwrap().sf(16.0);
    assert!((r.p - reference).abs() < 1e-9);
}

#[test]
fn anova_identical_groups() {
    let r = anova_f(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
    assert!(r.f.abs() < 1e-9);
    assert!((r.p - 1.0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn anova_p_matches_reference_distribution(
        groups in prop::collection::vec(prop::collection::vec(0.0f64..100.0, 2..12), 2..6)
    ) {
        let r = anova_f(&groups).unwrap();
        let reference = FisherSnedecor::new(r.df_between as f64, r.df_within as f64).unwrap().sf(r.f);
        prop_assert!((r.p - reference).abs() < 1e-9, "{} vs {}", r.p, reference);
    }
}

// ---------------------------------------------------------------- paired bootstrap

#[test]
fn bootstrap_frozen_constant() {
    let got = paired_bootstrap(&BOOT_A, &BOOT_B, 10_000, 42).unwrap();
    let independent = sequential_bootstrap(&BOOT_A, &BOOT_B, 10_000, 42);
    assert_eq!(got.p, independent);
    assert_eq!(got.p, BOOT_FROZEN_P_SEED_42);
}

#[test]
fn bootstrap_seed_stability() {
    let p1 = paired_bootstrap(&BOOT_A, &BOOT_B, 10_000, 42).unwrap().p;
    let p2 = paired_bootstrap(&BOOT_A, &BOOT_B, 10_000, 1).unwrap().p;
    assert!((p1 - p2).abs() <= 0.02, "{p1} vs {p2}");
}

#[test]
fn bootstrap_is_deterministic_across_thread_pools() {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let p1 = one.install(|| paired_bootstrap(&BOOT_A, &BOOT_B, 5_000, 3).unwrap());
    let p4 = four.install(|| paired_bootstrap(&BOOT_A, &BOOT_B, 5_000, 3).unwrap());
    assert_eq!(p1, p4);
}

// ---------------------------------------------------------------- Borda

#[test]
fn borda_three_ballot_hand_enumeration() {
    use SystemKind::{Maats as M, SingleAgent as S, ZeroShot as Z};
    // m>s>z: m2 s1 z0 | s>m>z: s2 m1 z0 | z>s>m: z2 s1 m0  => m3 s4 z2
    // m above s only on the first ballot => 1/3
    let ballots: Vec<RankingBallot> = [[M, S, Z], [S, M, Z], [Z, S, M]]
        .iter()
        .enumerate()
        .map(|(i, o)| RankingBallot {
            annotator_id: format!("a{i}"),
            segment_id: "1".into(),
            model_id: "m".into(),
            ordering: o.to_vec(),
        })
        .collect();
    let r = borda(&ballots).unwrap();
    assert_eq!((r.points[&M], r.points[&S], r.points[&Z]), (3, 4, 2));
    assert_eq!(r.win_rate(M, S), 1.0 / 3.0);
}

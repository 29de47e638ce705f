use homogenizer_core::rng::{self, normal};
use homogenizer_core::targets::{build_target, build_target_set};
use homogenizer_core::{EmbeddingTable, Error, Vocab};
use proptest::prelude::*;

const WORDS: [&str; 6] = ["alpha", "beta", "gamma", "delta", "eps", "zeta"];

fn setup(seed: u64) -> (Vocab, EmbeddingTable) {
    let mut toks = vec!["[CLS]", "[SEP]", "[UNK]"];
    toks.extend(WORDS);
    toks.extend(["cy", "##stein", "##e"]);
    let vocab = Vocab::new(toks.clone()).unwrap();
    let mut r = rng::stream(seed, 700);
    let mut lm = EmbeddingTable::new(5).unwrap();
    for t in &toks[3..] {
        let v: Vec<f64> = (0..5).map(|_| normal(&mut r)).collect();
        lm.insert(*t, &v).unwrap();
    }
    (vocab, lm)
}

proptest! {
    #[test]
    fn target_is_the_mean_and_order_free(seed in 0u64..500, idx in prop::collection::vec(0usize..6, 1..8), rot in 0usize..8) {
        let (vocab, lm) = setup(seed);
        let words: Vec<&str> = idx.iter().map(|&i| WORDS[i]).collect();
        let z = build_target(&words.join(" "), &lm, &vocab, true).unwrap();

        let mut oracle = vec![0.0; 5];
        for w in &words {
            for (o, v) in oracle.iter_mut().zip(lm.get(w).unwrap()) {
                *o += v / words.len() as f64;
            }
        }
        for (a, b) in z.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-12);
        }

        // contraction: inside the coordinate-wise hull and no longer than the longest piece
        let max_norm = words.iter().map(|w| lm.get(w).unwrap().iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
        prop_assert!(z.iter().map(|x| x * x).sum::<f64>().sqrt() <= max_norm + 1e-12);
        for j in 0..5 {
            let col = words.iter().map(|w| lm.get(w).unwrap()[j]);
            let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            prop_assert!(z[j] >= lo - 1e-12 && z[j] <= hi + 1e-12);
        }

        let mut rotated = words.clone();
        let k = rot % rotated.len();
        rotated.rotate_left(k);
        let z2 = build_target(&rotated.join(" "), &lm, &vocab, true).unwrap();
        for (a, b) in z.iter().zip(&z2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn cysteine_target_is_the_subword_mean() {
    let (vocab, lm) = setup(1);
    let z = build_target("Cysteine", &lm, &vocab, true).unwrap();
    for j in 0..5 {
        let m = (lm.get("cy").unwrap()[j] + lm.get("##stein").unwrap()[j] + lm.get("##e").unwrap()[j]) / 3.0;
        assert!((z[j] - m).abs() < 1e-15);
    }
}

#[test]
fn target_failures() {
    let (vocab, lm) = setup(2);
    assert!(matches!(build_target("omega", &lm, &vocab, true), Err(Error::UnknownToken(_))));
    assert!(matches!(build_target("  ", &lm, &vocab, true), Err(Error::InvalidInput(_))));
    let vocab2 = Vocab::new(["[CLS]", "[SEP]", "[UNK]", "alpha", "theta"]).unwrap();
    assert!(matches!(build_target("theta", &lm, &vocab2, true), Err(Error::MissingKey(_))));
}

#[test]
fn target_set_skips_and_keeps_order() {
    let (vocab, lm) = setup(3);
    let kge = EmbeddingTable::from_rows(2, [("A", [1.0, 0.0]), ("B", [0.0, 1.0]), ("C", [1.0, 1.0])]).unwrap();
    let ents = [("C", "gamma"), ("B", "omega"), ("Z", "alpha"), ("A", "alpha beta")];
    let (pairs, skipped) = build_target_set(&ents, &kge, &lm, &vocab, true).unwrap();
    assert_eq!(pairs.keys(), ["C", "A"]);
    assert_eq!(pairs.source(0), [1.0, 1.0]);
    assert_eq!(pairs.target(0), lm.get("gamma").unwrap());
    let keys: Vec<&str> = skipped.iter().map(|s| s.key.as_str()).collect();
    assert_eq!(keys, ["B", "Z"]);
    assert!(matches!(skipped[1].reason, Error::MissingKey(_)));
    assert!(build_target_set(&[("Z", "alpha")], &kge, &lm, &vocab, true).is_err());
}

use std::io::Cursor;
use std::path::Path;

use homogenizer::embeddings::{read_embeddings, write_embeddings};
use homogenizer::model_file::{AlignmentModel, ModelMeta, SavedModel};
use homogenizer::sequence_file::SequenceRecord;
use homogenizer::Error;
use homogenizer_core::align::{LinearMap, OrthogonalMap};
use homogenizer_core::entity::EntityRecord;
use homogenizer_core::fusion::build_bertram;
use homogenizer_core::linalg::Matrix;
use homogenizer_core::mlp::{EpochStats, MlpHomogenizer, TrainConfig};
use homogenizer_core::rng;
use homogenizer_core::{EmbeddingTable, Vocab};
use proptest::prelude::*;

fn origin() -> &'static Path {
    Path::new("mem")
}

fn table_strategy() -> impl Strategy<Value = EmbeddingTable> {
    (1usize..6).prop_flat_map(|dim| {
        prop::collection::btree_map("[A-Za-z0-9_:.-]{1,12}", prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, dim), 0..20)
            .prop_map(move |rows| EmbeddingTable::from_rows(dim, rows).unwrap())
    })
}

proptest! {
    #[test]
    fn embeddings_round_trip_bit_exact(t in table_strategy()) {
        let mut buf = Vec::new();
        write_embeddings(&t, &mut buf).unwrap();
        let back = read_embeddings(Cursor::new(buf), origin(), Some(t.dim())).unwrap();
        prop_assert_eq!(back.names(), t.names());
        let a: Vec<u64> = t.as_flat().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.as_flat().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mlp_model_round_trips(seed in any::<u64>(), ds in 1usize..5, dh in 1usize..5, dt in 1usize..5) {
        let model = MlpHomogenizer::init(ds, dh, dt, 1e-5, &mut rng::stream(seed, 1)).unwrap();
        let saved = SavedModel {
            model: AlignmentModel::Mlp(model),
            meta: ModelMeta {
                config: Some(TrainConfig { seed, ..TrainConfig::default() }),
                best_epoch: Some(1),
                history: vec![
                    EpochStats { epoch: 0, train_mse: 0.5, holdout_mse: 0.25 },
                    EpochStats { epoch: 1, train_mse: 0.1 + 1e-17, holdout_mse: 1.0 / 3.0 },
                ],
                ridge: None,
                normalize_iters: Some(3),
            },
        };
        let text = saved.to_json();
        let back = SavedModel::from_json(&text, origin()).unwrap();
        prop_assert_eq!(&back, &saved);
        prop_assert_eq!(back.to_json(), text);
    }
}

#[test]
fn linear_and_orthogonal_models_round_trip() {
    let lin = SavedModel {
        model: AlignmentModel::Linear(LinearMap::new(Matrix::from_fn(2, 3, |i, j| (i as f64 + 1.0) / (j as f64 + 7.0))).unwrap()),
        meta: ModelMeta { ridge: Some(1e-6), ..ModelMeta::default() },
    };
    assert_eq!(SavedModel::from_json(&lin.to_json(), origin()).unwrap(), lin);
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let rot = Matrix::from_vec(2, 2, vec![c, -c, c, c]).unwrap();
    let orth = SavedModel::new(AlignmentModel::Orthogonal(OrthogonalMap::new(rot).unwrap()));
    assert_eq!(SavedModel::from_json(&orth.to_json(), origin()).unwrap(), orth);
}

#[test]
fn corrupt_model_files_are_rejected() {
    for text in [
        "",
        "{}",
        r#"{"kind":"cubic"}"#,
        r#"{"kind":"linear","d_src":2,"d_tgt":2,"W":[[1.0,0.0]]}"#,
        r#"{"kind":"orthogonal","d_src":2,"d_tgt":2,"W":[[1.0,1.0],[0.0,1.0]]}"#,
    ] {
        assert!(SavedModel::from_json(text, origin()).is_err(), "{text}");
    }
}

#[test]
fn malformed_embedding_files_name_the_line() {
    let cases = [
        ("2 2\na 1 2\nb 1\n", 3),
        ("2 2\na 1 2\nb 1 x\n", 3),
        ("1 2\na 1 2\nb 3 4\n", 3),
        ("3 2\na 1 2\nb 3 4\n", 4),
        ("2 2\na 1 2\na 3 4\n", 3),
        ("1 2\na 1 NaN\n", 2),
        ("two 2\n", 1),
    ];
    for (text, line) in cases {
        match read_embeddings(Cursor::new(text), origin(), None) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    assert!(read_embeddings(Cursor::new("1 3\na 1 2 3\n"), origin(), Some(2)).is_err());
}

#[test]
fn sequence_records_round_trip() {
    let vocab = Vocab::new(["[CLS]", "[SEP]", "[UNK]", "/", "main", "cause"]).unwrap();
    let fused = EmbeddingTable::from_rows(2, [("M", [0.1, 0.2])]).unwrap();
    let seq = build_bertram("main cause", &[EntityRecord::new("M", "main", 0, 4)], &["cause"], &fused, &vocab, 512).unwrap();
    for inline in [false, true] {
        let rec = SequenceRecord::new("q1", &seq, &fused, inline).unwrap();
        let back: SequenceRecord = serde_json::from_str(&rec.to_json()).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.to_sequence().unwrap(), seq);
    }
}

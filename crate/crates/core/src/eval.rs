//! Alignment quality metrics over keyed prediction/target tables.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::table::EmbeddingTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Similarity {
    #[default]
    Cosine,
    /// Ranks by negated Euclidean distance.
    Euclidean,
}

fn rows<'a, S: AsRef<str>>(
    predicted: &'a EmbeddingTable,
    targets: &'a EmbeddingTable,
    keys: &[S],
) -> Result<Vec<(&'a [f64], &'a [f64])>> {
    if keys.is_empty() {
        return Err(Error::InvalidInput("no keys to evaluate".into()));
    }
    if predicted.dim() != targets.dim() {
        return Err(Error::DimensionMismatch {
            expected: targets.dim(),
            actual: predicted.dim(),
            context: "prediction dimension",
        });
    }
    keys.iter()
        .map(|k| Ok((predicted.require(k.as_ref())?, targets.require(k.as_ref())?)))
        .collect()
}

/// Mean over keys of the mean squared coordinate error.
pub fn mse<S: AsRef<str>>(predicted: &EmbeddingTable, targets: &EmbeddingTable, keys: &[S]) -> Result<f64> {
    let pairs = rows(predicted, targets, keys)?;
    let total: f64 = pairs
        .iter()
        .map(|(p, t)| p.iter().zip(*t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64)
        .sum();
    Ok(total / pairs.len() as f64)
}

fn cosine(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

fn nonzero_norm(v: &[f64], key: &str) -> Result<f64> {
    let n = norm(v);
    if n == 0.0 {
        return Err(Error::ZeroNorm(key.into()));
    }
    Ok(n)
}

pub fn mean_cosine<S: AsRef<str>>(predicted: &EmbeddingTable, targets: &EmbeddingTable, keys: &[S]) -> Result<f64> {
    let pairs = rows(predicted, targets, keys)?;
    let mut total = 0.0;
    for ((p, t), k) in pairs.iter().zip(keys) {
        let np = nonzero_norm(p, k.as_ref())?;
        let nt = nonzero_norm(t, k.as_ref())?;
        total += cosine(p, t, np, nt);
    }
    Ok(total / pairs.len() as f64)
}

/// Fraction of keys whose own target is among the `k` targets most similar
/// to their prediction. Candidates are the targets of `keys`; ties rank the
/// earlier key first.
pub fn retrieval_precision_at_k<S: AsRef<str>>(
    predicted: &EmbeddingTable,
    targets: &EmbeddingTable,
    keys: &[S],
    k: usize,
    similarity: Similarity,
) -> Result<f64> {
    if keys.len() < 2 {
        return Err(Error::InvalidInput("retrieval needs at least two keys".into()));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let pairs = rows(predicted, targets, keys)?;
    let mut target_norms = Vec::with_capacity(pairs.len());
    let mut pred_norms = Vec::with_capacity(pairs.len());
    for ((p, t), key) in pairs.iter().zip(keys) {
        match similarity {
            Similarity::Cosine => {
                pred_norms.push(nonzero_norm(p, key.as_ref())?);
                target_norms.push(nonzero_norm(t, key.as_ref())?);
            }
            Similarity::Euclidean => {
                pred_norms.push(1.0);
                target_norms.push(1.0);
            }
        }
    }
    let score = |qi: usize, ti: usize| -> f64 {
        let (p, _) = pairs[qi];
        let (_, t) = pairs[ti];
        match similarity {
            Similarity::Cosine => cosine(p, t, pred_norms[qi], target_norms[ti]),
            Similarity::Euclidean => -p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        }
    };

    let mut hits = 0usize;
    for q in 0..pairs.len() {
        let own = score(q, q);
        // rank = number of candidates ordered strictly ahead of the true target
        let mut rank = 0usize;
        for c in 0..pairs.len() {
            if c == q {
                continue;
            }
            let s = score(q, c);
            if s > own || (s == own && c < q) {
                rank += 1;
                if rank >= k {
                    break;
                }
            }
        }
        if rank < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, &[f64])]) -> EmbeddingTable {
        EmbeddingTable::from_rows(rows[0].1.len(), rows.iter().map(|(k, v)| (*k, *v))).unwrap()
    }

    #[test]
    fn mse_values() {
        let t = table(&[("a", &[0.0, 0.0]), ("b", &[1.0, 2.0])]);
        assert_eq!(mse(&t, &t, &["a", "b"]).unwrap(), 0.0);
        let p = table(&[("a", &[1.0, 1.0])]);
        assert_eq!(mse(&p, &t, &["a"]).unwrap(), 1.0);
        assert!(mse(&p, &t, &[] as &[&str]).is_err());
        assert!(matches!(mse(&p, &t, &["b"]), Err(Error::MissingKey(_))));
    }

    #[test]
    fn cosine_values() {
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[1.0, 2.0])]);
        let neg = table(&[("a", &[-1.0, 0.0]), ("b", &[-1.0, -2.0])]);
        let orth = table(&[("a", &[0.0, 3.0]), ("b", &[-2.0, 1.0])]);
        assert!((mean_cosine(&t, &t, &["a", "b"]).unwrap() - 1.0).abs() < 1e-15);
        assert!((mean_cosine(&neg, &t, &["a", "b"]).unwrap() + 1.0).abs() < 1e-15);
        assert!(mean_cosine(&orth, &t, &["a", "b"]).unwrap().abs() < 1e-12);
        let z = table(&[("a", &[0.0, 0.0]), ("b", &[1.0, 0.0])]);
        assert!(matches!(mean_cosine(&z, &t, &["a"]), Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn retrieval_basics() {
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[-1.0, 0.2])]);
        let keys = ["a", "b", "c"];
        for sim in [Similarity::Cosine, Similarity::Euclidean] {
            assert_eq!(retrieval_precision_at_k(&t, &t, &keys, 1, sim).unwrap(), 1.0);
            assert_eq!(retrieval_precision_at_k(&t, &t, &keys, 3, sim).unwrap(), 1.0);
        }
        // cyclic derangement of predictions
        let p = table(&[("a", &[0.0, 1.0]), ("b", &[-1.0, 0.2]), ("c", &[1.0, 0.0])]);
        assert_eq!(retrieval_precision_at_k(&p, &t, &keys, 1, Similarity::Cosine).unwrap(), 0.0);
        assert!(retrieval_precision_at_k(&t, &t, &["a"], 1, Similarity::Cosine).is_err());
        assert!(retrieval_precision_at_k(&t, &t, &keys, 0, Similarity::Cosine).is_err());
    }

    #[test]
    fn ties_prefer_earlier_key() {
        // a and b share a target direction, so b's prediction ties and loses to a
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[2.0, 0.0])]);
        let p = table(&[("a", &[1.0, 0.0]), ("b", &[1.0, 0.0])]);
        assert_eq!(retrieval_precision_at_k(&p, &t, &["a", "b"], 1, Similarity::Cosine).unwrap(), 0.5);
        assert_eq!(retrieval_precision_at_k(&p, &t, &["a", "b"], 2, Similarity::Cosine).unwrap(), 1.0);
    }
}

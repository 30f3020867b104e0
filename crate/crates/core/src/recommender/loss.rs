//! Cosine similarity and the max-margin ranking loss over embeddings.

use super::Embedding;
use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    cosine_slices(&a.0, &b.0)
}

/// Adds `scale * d cos(a, b) / da` into `out`.
fn add_cosine_grad(a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
    let (na, nb) = (norm(a), norm(b));
    let cos = dot(a, b) / (na * nb);
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o += scale * (y / (na * nb) - cos * x / (na * na));
    }
}

fn check_sets(positives: usize, negatives: usize) -> Result<()> {
    if positives == 0 {
        return Err(Error::Empty("positive set"));
    }
    if negatives == 0 {
        return Err(Error::Empty("negative set"));
    }
    Ok(())
}

fn mean_similarity(anchor: &[f64], others: &[&[f64]]) -> Result<f64> {
    let mut total = 0.0;
    for o in others {
        total += cosine_slices(anchor, o)?;
    }
    Ok(total / others.len() as f64)
}

/// Hinge term for one anchor: `max(0, mean_neg_sim + margin - mean_pos_sim)`.
pub fn margin_loss(
    anchor: &Embedding,
    positives: &[Embedding],
    negatives: &[Embedding],
    margin: f64,
) -> Result<f64> {
    let pos: Vec<&[f64]> = positives.iter().map(|e| e.0.as_slice()).collect();
    let neg: Vec<&[f64]> = negatives.iter().map(|e| e.0.as_slice()).collect();
    margin_term(&anchor.0, &pos, &neg, margin)
}

pub(crate) fn margin_term(
    anchor: &[f64],
    pos: &[&[f64]],
    neg: &[&[f64]],
    margin: f64,
) -> Result<f64> {
    check_sets(pos.len(), neg.len())?;
    Ok(hinge_from_means(
        mean_similarity(anchor, pos)?,
        mean_similarity(anchor, neg)?,
        margin,
    ))
}

pub(crate) fn hinge_from_means(mean_pos: f64, mean_neg: f64, margin: f64) -> f64 {
    (mean_neg + margin - mean_pos).max(0.0)
}

/// Batch loss: mean of the per-anchor hinge terms.
pub fn mean_margin_loss(
    batch: &[(Embedding, Vec<Embedding>, Vec<Embedding>)],
    margin: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("anchor batch"));
    }
    let mut total = 0.0;
    for (a, p, n) in batch {
        total += margin_loss(a, p, n, margin)?;
    }
    Ok(total / batch.len() as f64)
}

/// Gradients of one hinge term w.r.t. the anchor, each positive and each
/// negative, all scaled by `weight`. Returns the (unweighted) term value.
#[allow(clippy::too_many_arguments)]
pub(crate) fn margin_term_grad(
    anchor: &[f64],
    pos: &[&[f64]],
    neg: &[&[f64]],
    margin: f64,
    weight: f64,
    grad_anchor: &mut [f64],
    grad_pos: &mut [Vec<f64>],
    grad_neg: &mut [Vec<f64>],
) -> Result<f64> {
    let term = margin_term(anchor, pos, neg, margin)?;
    if term <= 0.0 {
        return Ok(term);
    }
    let (h, m) = (pos.len() as f64, neg.len() as f64);
    for (j, n) in neg.iter().enumerate() {
        add_cosine_grad(anchor, n, weight / m, grad_anchor);
        add_cosine_grad(n, anchor, weight / m, &mut grad_neg[j]);
    }
    for (j, p) in pos.iter().enumerate() {
        add_cosine_grad(anchor, p, -weight / h, grad_anchor);
        add_cosine_grad(p, anchor, -weight / h, &mut grad_pos[j]);
    }
    Ok(term)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> Embedding {
        Embedding(v.to_vec())
    }

    #[test]
    fn cosine_examples() {
        let v = e(&[0.3, -2.0, 5.0]);
        assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            cosine_similarity(&e(&[1.0, 0.0]), &e(&[0.0, 1.0])).unwrap(),
            0.0
        );
        // 32 / (sqrt(14) * sqrt(77))
        let c = cosine_similarity(&e(&[1.0, 2.0, 3.0]), &e(&[4.0, 5.0, 6.0])).unwrap();
        assert!((c - 0.974_631_846_197_076_2).abs() < 1e-12, "{c}");
        assert!((c - 0.9746318).abs() < 1e-7);
    }

    #[test]
    fn cosine_rejects_zero_norm_and_mismatch() {
        assert!(matches!(
            cosine_similarity(&e(&[0.0, 0.0]), &e(&[1.0, 0.0])),
            Err(Error::ZeroNorm)
        ));
        assert!(cosine_similarity(&e(&[1.0]), &e(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge_from_means(1.0, 0.0, 0.1), 0.0);
        assert!((hinge_from_means(0.0, 1.0, 0.1) - 1.1).abs() < 1e-15);
        assert!((hinge_from_means(0.6, 0.55, 0.1) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn margin_loss_on_embeddings() {
        let a = e(&[1.0, 0.0]);
        // positive identical (sim 1), negative orthogonal (sim 0)
        assert_eq!(
            margin_loss(&a, &[e(&[2.0, 0.0])], &[e(&[0.0, 1.0])], 0.1).unwrap(),
            0.0
        );
        // positive orthogonal, negative identical
        let l = margin_loss(&a, &[e(&[0.0, 3.0])], &[e(&[5.0, 0.0])], 0.1).unwrap();
        assert!((l - 1.1).abs() < 1e-12);
        assert!(margin_loss(&a, &[], std::slice::from_ref(&a), 0.1).is_err());
        assert!(margin_loss(&a, std::slice::from_ref(&a), &[], 0.1).is_err());
        let batch = vec![
            (a.clone(), vec![e(&[2.0, 0.0])], vec![e(&[0.0, 1.0])]),
            (a.clone(), vec![e(&[0.0, 3.0])], vec![e(&[5.0, 0.0])]),
        ];
        assert!((mean_margin_loss(&batch, 0.1).unwrap() - 0.55).abs() < 1e-12);
    }

    #[test]
    fn cosine_grad_matches_finite_difference() {
        let a = [0.3, -1.2, 0.7];
        let b = [1.1, 0.4, -0.5];
        let mut g = vec![0.0; 3];
        add_cosine_grad(&a, &b, 1.0, &mut g);
        let eps = 1e-6;
        for i in 0..3 {
            let mut ap = a;
            let mut am = a;
            ap[i] += eps;
            am[i] -= eps;
            let fd =
                (cosine_slices(&ap, &b).unwrap() - cosine_slices(&am, &b).unwrap()) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
    }
}

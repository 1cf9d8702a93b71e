use super::params::Scalar;
use crate::error::{Error, Result};

pub const PROB_EPS: f64 = 1e-7;

fn clamp<T: Scalar>(p: T) -> T {
    let eps = T::of(PROB_EPS);
    p.max(eps).min(T::one() - eps)
}

/// Mean binary cross-entropy over classes, with probabilities clamped to
/// `[eps, 1 - eps]`.
pub fn bce_loss<T: Scalar>(p: &[T], y: &[T]) -> Result<T> {
    if p.len() != y.len() {
        return Err(Error::Model(format!(
            "length mismatch: {} probabilities, {} labels",
            p.len(),
            y.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::Model("empty prediction".into()));
    }
    let n = T::of(p.len() as f64);
    let total: T = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = clamp(p);
            y * p.ln() + (T::one() - y) * (T::one() - p).ln()
        })
        .sum();
    Ok(-total / n)
}

/// Derivative of [`bce_loss`] with respect to each raw score, where
/// `p = sigmoid(score)`. Zero where the clamp is active.
pub fn bce_score_grad<T: Scalar>(p: &[T], y: &[T]) -> Vec<T> {
    let n = T::of(p.len() as f64);
    let eps = T::of(PROB_EPS);
    p.iter()
        .zip(y)
        .map(|(&p, &y)| {
            if p <= eps || p >= T::one() - eps {
                T::zero()
            } else {
                (p - y) / n
            }
        })
        .collect()
}

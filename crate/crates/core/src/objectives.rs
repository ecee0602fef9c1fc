//! Loss values for the recommender's tasks and their weighted combination.
//!
//! Contrastive and triplet losses use the Hadsell and FaceNet forms over
//! Euclidean distances of unit embeddings, sharing one margin. Subgradients
//! are taken in the ambient space (no projection back onto the sphere).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_t: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub margin: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_t: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            margin: 0.8,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.lambda_t, self.lambda1, self.lambda2, self.lambda3];
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("loss weights must be finite and non-negative".into()));
        }
        if !(self.margin > 0.0) {
            return Err(Error::Config(format!("margin must be > 0, got {}", self.margin)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// A labelled embedding pair for the contrastive term.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub same: bool,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `d^2` for a matching pair, `max(0, margin - d)^2` otherwise.
pub fn contrastive_loss(a: &[f64], b: &[f64], same: bool, margin: f64) -> f64 {
    let d = euclidean(a, b);
    if same {
        d * d
    } else {
        let h = (margin - d).max(0.0);
        h * h
    }
}

/// Gradient of [`contrastive_loss`] with respect to `a` and `b`.
pub fn contrastive_grad(a: &[f64], b: &[f64], same: bool, margin: f64) -> (Vec<f64>, Vec<f64>) {
    let d = euclidean(a, b);
    let coef = if same {
        2.0
    } else if d > 0.0 && d < margin {
        // d/dd (m - d)^2 = -2 (m - d), times dd/da = (a - b) / d
        -2.0 * (margin - d) / d
    } else {
        0.0
    };
    let ga: Vec<f64> = a.iter().zip(b).map(|(x, y)| coef * (x - y)).collect();
    let gb = ga.iter().map(|g| -g).collect();
    (ga, gb)
}

/// `max(0, d(a, p) - d(a, n) + margin)`.
pub fn triplet_loss(t: &Triplet, margin: f64) -> f64 {
    (euclidean(&t.anchor, &t.positive) - euclidean(&t.anchor, &t.negative) + margin).max(0.0)
}

/// Subgradient of [`triplet_loss`] as `(anchor, positive, negative)`.
pub fn triplet_grad(t: &Triplet, margin: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dim = t.anchor.len();
    if triplet_loss(t, margin) <= 0.0 {
        return (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    }
    let dp = euclidean(&t.anchor, &t.positive);
    let dn = euclidean(&t.anchor, &t.negative);
    let unit = |from: &[f64], to: &[f64], d: f64| -> Vec<f64> {
        if d > 0.0 {
            from.iter().zip(to).map(|(x, y)| (x - y) / d).collect()
        } else {
            vec![0.0; dim]
        }
    };
    let up = unit(&t.anchor, &t.positive, dp);
    let un = unit(&t.anchor, &t.negative, dn);
    let ga = up.iter().zip(&un).map(|(p, n)| p - n).collect();
    let gp = up.iter().map(|v| -v).collect();
    (ga, gp, un)
}

/// Combines already-averaged tracking terms: `contra + lambda_t * triplet`.
pub fn combine_tracking(contra_mean: f64, triplet_mean: f64, w: &LossWeights) -> f64 {
    contra_mean + w.lambda_t * triplet_mean
}

/// Mean contrastive loss over `pairs` plus `lambda_t` times mean triplet loss.
pub fn tracking_loss(pairs: &[Pair], triplets: &[Triplet], w: &LossWeights) -> Result<f64> {
    if pairs.is_empty() || triplets.is_empty() {
        return Err(Error::contract("tracking loss needs non-empty pair and triplet batches"));
    }
    let contra = pairs
        .iter()
        .map(|p| contrastive_loss(&p.a, &p.b, p.same, w.margin))
        .sum::<f64>()
        / pairs.len() as f64;
    let trip = triplets.iter().map(|t| triplet_loss(t, w.margin)).sum::<f64>() / triplets.len() as f64;
    Ok(combine_tracking(contra, trip, w))
}

/// Mean absolute deviation between teacher and student scores.
pub fn scoring_loss(teacher: &[f64], student: &[f64]) -> Result<f64> {
    if teacher.len() != student.len() || teacher.is_empty() {
        return Err(Error::contract(format!(
            "scoring loss needs equal non-empty arrays ({} vs {})",
            teacher.len(),
            student.len()
        )));
    }
    Ok(teacher.iter().zip(student).map(|(t, s)| (t - s).abs()).sum::<f64>() / teacher.len() as f64)
}

/// Subgradient of [`scoring_loss`] with respect to the student scores.
pub fn scoring_grad(teacher: &[f64], student: &[f64]) -> Vec<f64> {
    let n = teacher.len().max(1) as f64;
    teacher
        .iter()
        .zip(student)
        .map(|(t, s)| {
            if s > t {
                1.0 / n
            } else if s < t {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect()
}

/// `lambda1 * l_t + lambda2 * l_s + lambda3 * l_r`.
pub fn joint_loss(l_t: f64, l_s: f64, l_r: f64, w: &LossWeights) -> f64 {
    w.lambda1 * l_t + w.lambda2 * l_s + w.lambda3 * l_r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at_distance(d: f64) -> (Vec<f64>, Vec<f64>) {
        // two unit vectors separated by chord length d
        let half = (d / 2.0).asin();
        (vec![half.cos(), half.sin()], vec![half.cos(), -half.sin()])
    }

    #[test]
    fn contrastive_examples() {
        let a = vec![0.6, 0.8];
        assert_eq!(contrastive_loss(&a, &a, true, 0.8), 0.0);
        let (x, y) = at_distance(1.0);
        assert_eq!(contrastive_loss(&x, &y, false, 0.8), 0.0);
        let (x, y) = at_distance(0.3);
        assert!((contrastive_loss(&x, &y, false, 0.8) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn triplet_examples() {
        let a = vec![1.0, 0.0];
        let anti = vec![-1.0, 0.0];
        let t = Triplet { anchor: a.clone(), positive: a.clone(), negative: anti };
        assert_eq!(triplet_loss(&t, 0.8), 0.0);
        let t = Triplet { anchor: a.clone(), positive: a.clone(), negative: a.clone() };
        assert_eq!(triplet_loss(&t, 0.8), 0.8);
        // d(a,p) = 1, d(a,n) = 0.5
        let p = vec![0.5, 3f64.sqrt() / 2.0];
        let theta = 2.0 * 0.25f64.asin();
        let n = vec![theta.cos(), -theta.sin()];
        let t = Triplet { anchor: a, positive: p, negative: n };
        assert!((triplet_loss(&t, 0.8) - 1.3).abs() < 1e-9);
    }

    #[test]
    fn tracking_and_joint() {
        let w = LossWeights::default();
        assert_eq!(combine_tracking(0.0, 0.0, &w), 0.0);
        assert!((combine_tracking(0.2, 0.1, &w) - 0.3).abs() < 1e-12);
        let w2 = LossWeights { lambda_t: 2.0, ..w.clone() };
        assert!((combine_tracking(0.2, 0.1, &w2) - 0.4).abs() < 1e-12);
        assert!(tracking_loss(&[], &[], &w).is_err());

        assert_eq!(joint_loss(0.0, 0.0, 0.0, &w), 0.0);
        assert_eq!(joint_loss(1.0, 2.0, 3.0, &w), 6.0);
        let w3 = LossWeights { lambda1: 0.5, lambda2: 1.0, lambda3: 2.0, ..w };
        assert_eq!(joint_loss(1.0, 2.0, 3.0, &w3), 8.5);
    }

    #[test]
    fn scoring_examples() {
        assert_eq!(scoring_loss(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(scoring_loss(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((scoring_loss(&[0.9, 0.5], &[0.7, 0.6]).unwrap() - 0.15).abs() < 1e-9);
        assert!(scoring_loss(&[1.0], &[]).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(LossWeights::default().validate().is_ok());
        assert!(LossWeights { margin: 0.0, ..Default::default() }.validate().is_err());
        assert!(LossWeights { lambda2: -1.0, ..Default::default() }.validate().is_err());
    }
}

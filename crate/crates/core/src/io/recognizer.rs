//! Deterministic stand-in for an attention recognizer.
//!
//! Every character code owns a fixed pseudo-random unit "anchor" vector, so
//! correct readings of the same string land close together in feature space
//! and misreadings land elsewhere. Misreadings follow a fixed confusion map,
//! which makes repeated errors on the same text agree with each other the way
//! a real recognizer's do on a consistently blurred glyph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::RecognitionHypothesis;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Unit anchor vector of dimension `dim` for character `c`.
pub fn char_anchor(c: char, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(c as u64 ^ 0xA5A5_0000_0000_0000));
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// The character a degraded reading of `c` turns into. Never returns `c`.
pub fn confusable(c: char) -> char {
    const PAIRS: &[(char, char)] = &[
        ('O', '0'),
        ('0', 'O'),
        ('I', '1'),
        ('1', 'I'),
        ('S', '5'),
        ('5', 'S'),
        ('B', '8'),
        ('8', 'B'),
        ('Z', '2'),
        ('2', 'Z'),
        ('G', '6'),
        ('6', 'G'),
        ('E', 'F'),
        ('F', 'E'),
        ('C', 'G'),
        ('D', 'O'),
        ('l', '1'),
        ('o', '0'),
        ('a', 'o'),
        ('e', 'c'),
        ('c', 'e'),
        ('n', 'h'),
        ('h', 'n'),
        ('u', 'v'),
        ('v', 'u'),
    ];
    if let Some((_, to)) = PAIRS.iter().find(|(from, _)| *from == c) {
        return *to;
    }
    let shift = |base: u8, span: u8| {
        let i = c as u8 - base;
        (base + (i + 1) % span) as char
    };
    match c {
        'A'..='Z' => shift(b'A', 26),
        'a'..='z' => shift(b'a', 26),
        '0'..='9' => shift(b'0', 10),
        _ => char::from_u32(c as u32 + 1)
            .filter(|n| *n != c)
            .unwrap_or('?'),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Substitution {
    /// Same misreading probability at every position.
    Uniform(f64),
    /// Probability per position; positions past the end read correctly.
    PerPosition(Vec<f64>),
}

impl Substitution {
    fn at(&self, i: usize) -> f64 {
        match self {
            Substitution::Uniform(p) => *p,
            Substitution::PerPosition(ps) => ps.get(i).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub substitution: Substitution,
    /// Standard deviation of the Gaussian noise norm added to each character feature.
    pub feature_noise: f64,
    /// Correct characters get probability uniform in `[floor, 1]`.
    pub correct_confidence_floor: f64,
    /// Misread characters get probability uniform in `[floor, 1]`.
    pub misread_confidence_floor: f64,
    pub feature_dim: usize,
}

impl ErrorModel {
    pub fn zero(feature_dim: usize) -> Self {
        Self {
            substitution: Substitution::Uniform(0.0),
            feature_noise: 0.0,
            correct_confidence_floor: 1.0,
            misread_confidence_floor: 1.0,
            feature_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Read { position: usize, ch: char },
    Substituted { position: usize, from: char, to: char },
}

pub fn synthetic_recognizer(gt_text: &str, model: &ErrorModel, seed: u64) -> RecognitionHypothesis {
    synthetic_recognizer_traced(gt_text, model, seed).0
}

/// Same as [`synthetic_recognizer`], also returning one trace event per character.
pub fn synthetic_recognizer_traced(
    gt_text: &str,
    model: &ErrorModel,
    seed: u64,
) -> (RecognitionHypothesis, Vec<TraceEvent>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = model.feature_dim;
    let scale = if dim > 0 {
        model.feature_noise / (dim as f64).sqrt()
    } else {
        0.0
    };
    let mut text = String::with_capacity(gt_text.len());
    let mut char_probs = Vec::new();
    let mut char_features = Vec::new();
    let mut trace = Vec::new();
    for (i, c) in gt_text.chars().enumerate() {
        // fixed draw count per character keeps streams aligned across models
        let u: f64 = rng.random();
        let conf_u: f64 = rng.random();
        let (out, floor) = if u < model.substitution.at(i) {
            let to = confusable(c);
            trace.push(TraceEvent::Substituted {
                position: i,
                from: c,
                to,
            });
            (to, model.misread_confidence_floor)
        } else {
            trace.push(TraceEvent::Read { position: i, ch: c });
            (c, model.correct_confidence_floor)
        };
        text.push(out);
        char_probs.push((floor + (1.0 - floor) * conf_u).clamp(0.0, 1.0));
        let row: Vec<f64> = char_anchor(out, dim)
            .into_iter()
            .map(|a| {
                let n: f64 = rng.sample(StandardNormal);
                a + scale * n
            })
            .collect();
        char_features.push(row);
    }
    (
        RecognitionHypothesis {
            text,
            char_probs,
            char_features,
        },
        trace,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_error_reproduces_text() {
        let h = synthetic_recognizer("AB", &ErrorModel::zero(8), 7);
        assert_eq!(h.text, "AB");
        assert_eq!(h.char_probs, vec![1.0, 1.0]);
        assert_eq!(h.char_features[0], char_anchor('A', 8));
        h.validate().unwrap();
    }

    #[test]
    fn deterministic_for_seed() {
        let mut m = ErrorModel::zero(8);
        m.feature_noise = 0.3;
        m.substitution = Substitution::Uniform(0.5);
        m.correct_confidence_floor = 0.6;
        assert_eq!(
            synthetic_recognizer("HELLO", &m, 11),
            synthetic_recognizer("HELLO", &m, 11)
        );
    }

    #[test]
    fn forced_substitution_matches_trace() {
        let mut m = ErrorModel::zero(8);
        m.substitution = Substitution::PerPosition(vec![1.0]);
        let (h, trace) = synthetic_recognizer_traced("AB", &m, 7);
        assert_ne!(h.text.chars().next(), Some('A'));
        assert_eq!(h.text.chars().nth(1), Some('B'));
        assert_eq!(
            trace[0],
            TraceEvent::Substituted {
                position: 0,
                from: 'A',
                to: h.text.chars().next().unwrap()
            }
        );
        assert_eq!(trace[1], TraceEvent::Read { position: 1, ch: 'B' });
    }

    #[test]
    fn anchors_are_unit_and_distinct() {
        let a = char_anchor('A', 16);
        let b = char_anchor('B', 16);
        let na: f64 = a.iter().map(|x| x * x).sum();
        assert!((na - 1.0).abs() < 1e-12);
        assert_ne!(a, b);
    }

    #[test]
    fn confusable_never_identity() {
        for c in ('A'..='Z').chain('a'..='z').chain('0'..='9').chain(['中', ' ', '-']) {
            assert_ne!(confusable(c), c, "{c}");
        }
    }

    proptest! {
        #[test]
        fn zero_noise_is_exact_for_any_string(s in "\\PC{0,12}", seed in any::<u64>()) {
            let h = synthetic_recognizer(&s, &ErrorModel::zero(4), seed);
            prop_assert_eq!(&h.text, &s);
            prop_assert!(h.char_probs.iter().all(|p| *p == 1.0));
            prop_assert!(h.validate().is_ok());
        }
    }
}

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use vts_core::config::RunConfig;
use vts_core::geometry::Quad;
use vts_core::io::{char_anchor, RecognitionHypothesis, RegionObservation};
use vts_core::pipeline::{spot, train_student};
use vts_core::quality::{estimate_template, select, teacher_score, teacher_scores, SelectionPolicy, TeacherConfig};
use vts_core::simkit::{generate, ScenarioSpec};
use vts_core::tracker::TextStream;

const CHAR_DIM: usize = 16;

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn region(frame: u32, text: &str, features: Vec<Vec<f64>>) -> RegionObservation {
    let mut o = RegionObservation::new(frame, Quad::from_rect(0.0, 0.0, 10.0, 4.0), vec![1.0]);
    o.hypothesis = Some(RecognitionHypothesis {
        text: text.into(),
        char_probs: vec![0.9; text.chars().count()],
        char_features: features,
    });
    o
}

/// Correct regions carry anchor + small noise, corrupted ones random unit rows.
#[test]
fn separation_with_random_corruptions() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let cfg = TeacherConfig::default();
    let alphabet: Vec<char> = ('A'..='Z').collect();
    let mut separated = 0;
    for _ in 0..1000 {
        let len = rng.random_range(3..=8);
        let transcript: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        let frames: u32 = rng.random_range(4..=10);
        let n_correct = rng.random_range(1..frames) as usize;
        let mut obs = Vec::new();
        let mut is_correct = Vec::new();
        for f in 0..frames {
            let correct = (f as usize) < n_correct;
            let feats: Vec<Vec<f64>> = transcript
                .chars()
                .map(|c| {
                    if correct {
                        char_anchor(c, CHAR_DIM).into_iter().map(|a| a + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect()
                    } else {
                        random_unit(&mut rng, CHAR_DIM)
                    }
                })
                .collect();
            let text = if correct { transcript.clone() } else { transcript.to_lowercase() };
            obs.push(region(f, &text, feats));
            is_correct.push(correct);
        }
        let scores = teacher_scores(&obs, &transcript, &cfg).unwrap();
        assert!(scores.iter().all(|s| (-1.0..=1.0).contains(s)));
        let mean = |want: bool| {
            let v: Vec<f64> = scores.iter().zip(&is_correct).filter(|p| *p.1 == want).map(|p| *p.0).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        if mean(true) > mean(false) {
            separated += 1;
        }
    }
    assert!(separated >= 990, "{separated}/1000");
}

#[test]
fn template_self_similarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let m: Vec<Vec<f64>> = (0..5).map(|_| random_unit(&mut rng, CHAR_DIM)).collect();
        let t = estimate_template(&[m.clone(), m.clone()], 25, 1).unwrap();
        assert!((teacher_score(&t.features, &t).unwrap() - 1.0).abs() < 1e-9);
        assert!((teacher_score(&m, &t).unwrap() - 1.0).abs() < 1e-9);
    }
}

fn tr_stream(scores: &[f64]) -> TextStream {
    let observations = scores
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut o = region(i as u32, &format!("T{i}"), vec![vec![1.0]; 2]);
            o.student_score = Some(*s);
            o
        })
        .collect();
    TextStream { id: 3, observations, last_active_frame: scores.len() as u32 - 1 }
}

proptest! {
    #[test]
    fn tr_argmax_invariant_under_increasing_maps(scores in prop::collection::vec(-5.0f64..5.0, 1..12), a in 0.1f64..10.0, b in -3.0f64..3.0) {
        let base = select(&tr_stream(&scores), SelectionPolicy::Tr).unwrap();
        for f in [|x: f64| x.exp(), |x: f64| x.powi(3), |x: f64| x.atan()] {
            let mapped: Vec<f64> = scores.iter().map(|s| f(*s)).collect();
            prop_assert_eq!(select(&tr_stream(&mapped), SelectionPolicy::Tr).unwrap().chosen_frame, base.chosen_frame);
        }
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        prop_assert_eq!(select(&tr_stream(&affine), SelectionPolicy::Tr).unwrap().chosen_frame, base.chosen_frame);
    }

    #[test]
    fn equal_scores_pick_earliest(n in 1usize..10, v in -1.0f64..1.0) {
        let s = tr_stream(&vec![v; n]);
        prop_assert_eq!(select(&s, SelectionPolicy::Tr).unwrap().chosen_frame, 0);
        prop_assert_eq!(select(&s, SelectionPolicy::Pcw).unwrap().chosen_frame, 0);
    }
}

#[test]
fn one_decision_per_stream() {
    let spec = ScenarioSpec { n_streams: 10, seed: 17, ..ScenarioSpec::default() };
    let train = generate(&ScenarioSpec { seed: 1700, n_streams: 60, ..spec.clone() }).unwrap();
    let s = generate(&spec).unwrap();
    let cfg = RunConfig::default();
    let student = train_student(&train.observations, &train.gt, &cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    for policy in [SelectionPolicy::Tr, SelectionPolicy::Pcw, SelectionPolicy::Hfp] {
        let mut c = cfg.clone();
        c.recommender.policy = policy;
        let out = spot(&s.observations, Some(&student), &c, &pool).unwrap();
        assert_eq!(out.decisions.len(), out.streams.len());
        for (d, stream) in out.decisions.iter().zip(&out.streams) {
            assert_eq!(d.stream_id, stream.id);
            let hits = stream.observations.iter().filter(|o| o.frame == d.chosen_frame && o.quad == d.chosen_quad).count();
            assert_eq!(hits, 1);
        }
        let again = spot(&s.observations, Some(&student), &c, &pool).unwrap();
        assert_eq!(again.decisions, out.decisions);
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Estimated feature representation of an interference-free rendering of a
/// stream's text, `t_max x d_char`, zero-padded.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub features: Vec<Vec<f64>>,
    /// Number of correctly recognized feature matrices it was estimated from.
    pub source_count: usize,
}

impl Template {
    pub fn t_max(&self) -> usize {
        self.features.len()
    }

    pub fn flattened(&self) -> Vec<f64> {
        self.features.iter().flatten().copied().collect()
    }
}

/// Flattens a character feature matrix into `t_max * dim` values: rows past
/// `t_max` are dropped, missing rows are zero.
pub fn pad_flatten(matrix: &[Vec<f64>], t_max: usize, dim: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; t_max * dim];
    for (r, row) in matrix.iter().take(t_max).enumerate() {
        if row.len() != dim {
            return Err(Error::contract(format!(
                "character feature row has {} values, expected {dim}",
                row.len()
            )));
        }
        out[r * dim..(r + 1) * dim].copy_from_slice(row);
    }
    Ok(out)
}

/// Lloyd's k-means with k-means++ seeding. Returns `(centroids, labels)`.
/// `k` is capped at the number of points; a cluster that empties keeps its
/// previous centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, max_iter: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = points.len();
    if n == 0 || k == 0 {
        return (Vec::new(), Vec::new());
    }
    let k = k.min(n);
    let dim = points[0].len();
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = vec![points[0].clone()];
    while centroids.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centroids.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, di) in d.iter().enumerate() {
                if target < *di {
                    pick = i;
                    break;
                }
                target -= di;
            }
            pick
        } else {
            centroids.len()
        };
        centroids.push(points[next].clone());
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, cen) in centroids.iter().enumerate() {
                let d = dist2(p, cen);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    (centroids, labels)
}

/// Template from correctly recognized feature matrices: the centroid of the
/// largest k-means cluster of their padded, flattened forms.
pub fn estimate_template(correct: &[Vec<Vec<f64>>], t_max: usize, k_clusters: usize) -> Result<Template> {
    if correct.is_empty() {
        return Err(Error::NoTemplate);
    }
    if t_max == 0 || k_clusters == 0 {
        return Err(Error::contract("t_max and k_clusters must be positive"));
    }
    let dim = correct
        .iter()
        .find_map(|m| m.first().map(Vec::len))
        .filter(|d| *d > 0)
        .ok_or_else(|| Error::contract("character features are empty"))?;
    let flat = correct
        .iter()
        .map(|m| pad_flatten(m, t_max, dim))
        .collect::<Result<Vec<_>>>()?;
    let (centroids, labels) = kmeans(&flat, k_clusters, 100, 0);
    let mut sizes = vec![0usize; centroids.len()];
    for l in labels {
        sizes[l] += 1;
    }
    // largest cluster, lowest index on ties
    let best = (0..sizes.len()).fold(0, |b, i| if sizes[i] > sizes[b] { i } else { b });
    Ok(Template {
        features: centroids[best].chunks(dim).map(<[f64]>::to_vec).collect(),
        source_count: sizes[best],
    })
}

/// Cosine similarity between a region's padded character features and the template.
pub fn teacher_score(region_features: &[Vec<f64>], template: &Template) -> Result<f64> {
    let dim = template.features.first().map_or(0, Vec::len);
    let r = pad_flatten(region_features, template.t_max(), dim)?;
    let t = template.flattened();
    let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nt = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nr == 0.0 || nt == 0.0 {
        return Err(Error::contract("teacher score of an all-zero feature vector"));
    }
    let cos = r.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() / (nr * nt);
    Ok(cos.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_feature_template_is_itself() {
        let f = vec![vec![0.5, 1.0], vec![2.0, -1.0]];
        let t = estimate_template(std::slice::from_ref(&f), 2, 1).unwrap();
        assert_eq!(t.features, f);
        assert_eq!(t.source_count, 1);
        let t2 = estimate_template(&[f.clone(), f.clone()], 2, 1).unwrap();
        assert_eq!(t2.features, f);
    }

    #[test]
    fn one_cluster_is_mean() {
        let pts = [vec![vec![0.0, 0.0]], vec![vec![2.0, 0.0]], vec![vec![4.0, 0.0]]];
        let t = estimate_template(&pts, 1, 1).unwrap();
        assert_eq!(t.features, vec![vec![2.0, 0.0]]);
    }

    #[test]
    fn largest_cluster_wins() {
        let pts: Vec<Vec<Vec<f64>>> = [0.0, 0.1, 0.2, 10.0]
            .iter()
            .map(|x| vec![vec![*x]])
            .collect();
        let t = estimate_template(&pts, 1, 2).unwrap();
        assert!((t.features[0][0] - 0.1).abs() < 1e-12);
        assert_eq!(t.source_count, 3);
    }

    #[test]
    fn empty_is_no_template() {
        assert!(matches!(estimate_template(&[], 25, 1), Err(Error::NoTemplate)));
    }

    #[test]
    fn teacher_scores() {
        let t = Template { features: vec![vec![1.0, 0.0]], source_count: 1 };
        assert!((teacher_score(&[vec![1.0, 0.0]], &t).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(teacher_score(&[vec![0.0, 1.0]], &t).unwrap(), 0.0);
        let v = teacher_score(&[vec![1.0, 1.0]], &t).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(teacher_score(&[vec![0.0, 0.0]], &t).is_err());
    }

    #[test]
    fn length_mismatch_uses_zero_padding() {
        let t = Template {
            features: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]],
            source_count: 1,
        };
        // one row short: cosine 1/sqrt(2)
        let v = teacher_score(&[vec![1.0, 0.0]], &t).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        // extra rows beyond t_max are dropped
        let long = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0], vec![9.0, 9.0]];
        assert!((teacher_score(&long, &t).unwrap() - 1.0).abs() < 1e-12);
    }
}

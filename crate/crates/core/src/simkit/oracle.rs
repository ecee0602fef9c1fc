//! Exhaustive reference solvers for small instances.

use crate::error::{Error, Result};
use crate::geometry::polygon_iou;
use crate::io::GroundTruthRecord;
use crate::metrics::{EndToEndCounts, MatchingConfig};
use crate::quality::StreamDecision;

const LIMIT: usize = 8;

/// Visits every injective map from `0..n` into `0..m` (`n <= m`).
fn for_each_injection(n: usize, m: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(depth: usize, n: usize, m: usize, used: &mut [bool], cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if depth == n {
            f(cur);
            return;
        }
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(depth + 1, n, m, used, cur, f);
                cur.pop();
                used[j] = false;
            }
        }
    }
    rec(0, n, m, &mut vec![false; m], &mut Vec::with_capacity(n), f);
}

/// Best assignment by exhaustive search: the largest number of finite pairs,
/// then the lowest total over them (summed in row order). Returns
/// `(pairs, total)`.
pub fn brute_force_assignment_detailed(cost: &[Vec<f64>]) -> Result<(usize, f64)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows > LIMIT || cols > LIMIT {
        return Err(Error::Size { rows, cols });
    }
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::contract("ragged cost matrix"));
    }
    if rows == 0 || cols == 0 {
        return Ok((0, 0.0));
    }
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let mut best: Option<(usize, f64)> = None;
    for_each_injection(n, m, &mut |map| {
        let mut pairs: Vec<(usize, usize)> = map
            .iter()
            .enumerate()
            .map(|(i, &j)| if transpose { (j, i) } else { (i, j) })
            .filter(|&(r, c)| cost[r][c].is_finite())
            .collect();
        pairs.sort_unstable();
        let total: f64 = pairs.iter().map(|&(r, c)| cost[r][c]).sum();
        let better = match best {
            None => true,
            Some((k, t)) => pairs.len() > k || (pairs.len() == k && total < t),
        };
        if better {
            best = Some((pairs.len(), total));
        }
    });
    Ok(best.expect("at least one injection"))
}

/// Minimum total cost over all assignments (all entries finite).
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> Result<f64> {
    Ok(brute_force_assignment_detailed(cost)?.1)
}

/// End-to-end recall counts by trying every decision-to-stream assignment,
/// each ground-truth stream used at most once.
pub fn brute_force_end_to_end(
    decisions: &[StreamDecision],
    gt: &[GroundTruthRecord],
    cfg: &MatchingConfig,
) -> EndToEndCounts {
    let mut ids: Vec<u32> = gt.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    ids.dedup();
    let valid = |d: &StreamDecision, id: u32| -> bool {
        let recs: Vec<&GroundTruthRecord> = gt.iter().filter(|r| r.id == id).collect();
        let start = recs.iter().map(|r| r.frame).min().expect("stream has records");
        let end = recs.iter().map(|r| r.frame).max().expect("stream has records");
        if d.chosen_frame < start || d.chosen_frame > end {
            return false;
        }
        let Some(at) = recs.iter().find(|r| r.frame == d.chosen_frame) else {
            return false;
        };
        cfg.texts_match(&d.final_text, &at.transcript) && polygon_iou(&d.chosen_quad, &at.quad) >= cfg.iou_threshold
    };
    let ok: Vec<Vec<bool>> = decisions.iter().map(|d| ids.iter().map(|&id| valid(d, id)).collect()).collect();

    // each decision picks a stream or nothing
    fn search(i: usize, ok: &[Vec<bool>], used: &mut [bool]) -> usize {
        if i == ok.len() {
            return 0;
        }
        let mut best = search(i + 1, ok, used);
        for j in 0..used.len() {
            if ok[i][j] && !used[j] {
                used[j] = true;
                best = best.max(1 + search(i + 1, ok, used));
                used[j] = false;
            }
        }
        best
    }
    EndToEndCounts {
        recalled: search(0, &ok, &mut vec![false; ids.len()]),
        gt_streams: ids.len(),
        decisions: decisions.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        assert_eq!(brute_force_assignment(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(), 0.0);
        assert_eq!(brute_force_assignment(&[vec![1.0]]).unwrap(), 1.0);
        assert_eq!(brute_force_assignment(&[vec![4.0], vec![2.0], vec![3.0]]).unwrap(), 2.0);
        let big = vec![vec![0.0; 9]; 9];
        assert!(matches!(brute_force_assignment(&big), Err(Error::Size { rows: 9, cols: 9 })));
    }

    #[test]
    fn forbidden_entries() {
        let inf = f64::INFINITY;
        let c = vec![vec![0.0, 100.0], vec![100.0, inf]];
        assert_eq!(brute_force_assignment_detailed(&c).unwrap(), (2, 200.0));
    }
}

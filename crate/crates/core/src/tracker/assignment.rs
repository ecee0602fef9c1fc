//! Minimum-cost linear assignment (Hungarian method, shortest augmenting
//! path form with row/column potentials), O(n^2 m) for n <= m.

/// Solves the rectangular assignment problem on `cost` (row-major rows).
///
/// Non-finite entries mark forbidden pairs. The result first maximizes the
/// number of allowed pairs, then minimizes their total cost; forbidden pairs
/// never appear. Pairs are returned sorted by row.
pub fn assign(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    assert!(cost.iter().all(|r| r.len() == cols), "ragged cost matrix");

    let (lo, hi) = cost
        .iter()
        .flatten()
        .filter(|c| c.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| (lo.min(c), hi.max(c)));
    if !lo.is_finite() {
        return Vec::new();
    }
    // Any assignment using one fewer forbidden pair is strictly cheaper.
    let k = rows.min(cols) as f64;
    let forbidden = (hi - lo) * (k + 1.0) + 1.0;
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| -> f64 {
        let c = if transpose { cost[j][i] } else { cost[i][j] };
        if c.is_finite() {
            c - lo
        } else {
            forbidden
        }
    };

    let pairs = solve(n, m, at);
    let mut out: Vec<(usize, usize)> = pairs
        .into_iter()
        .map(|(i, j)| if transpose { (j, i) } else { (i, j) })
        .filter(|&(r, c)| cost[r][c].is_finite())
        .collect();
    out.sort_unstable();
    out
}

/// Core solver for `n <= m`; every row gets a column.
fn solve(n: usize, m: usize, a: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect()
}

/// Total cost of `pairs`, summed in row order.
pub fn assignment_cost(cost: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    let mut sorted = pairs.to_vec();
    sorted.sort_unstable();
    sorted.iter().map(|&(r, c)| cost[r][c]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_anti_diagonal() {
        let d = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert_eq!(assign(&d), vec![(0, 0), (1, 1)]);
        assert_eq!(assignment_cost(&d, &assign(&d)), 2.0);
        let a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        assert_eq!(assign(&a), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn rectangular_both_ways() {
        let wide = vec![vec![5.0, 1.0, 3.0]];
        assert_eq!(assign(&wide), vec![(0, 1)]);
        let tall = vec![vec![5.0], vec![1.0], vec![3.0]];
        assert_eq!(assign(&tall), vec![(1, 0)]);
    }

    #[test]
    fn forbidden_pairs_never_returned() {
        let inf = f64::INFINITY;
        let c = vec![vec![inf, 1.0], vec![inf, 0.5]];
        assert_eq!(assign(&c), vec![(1, 1)]);
        let all = vec![vec![inf, inf]];
        assert!(assign(&all).is_empty());
    }

    #[test]
    fn prefers_more_allowed_pairs() {
        let inf = f64::INFINITY;
        // diagonal is cheap but uses one allowed pair; anti-diagonal uses two
        let c = vec![vec![0.0, 100.0], vec![100.0, inf]];
        assert_eq!(assign(&c), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn empty_inputs() {
        assert!(assign(&[]).is_empty());
        assert!(assign(&[vec![]]).is_empty());
    }
}

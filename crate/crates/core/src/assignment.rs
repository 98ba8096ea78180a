//! One-to-one assignment by the Hungarian method.

use crate::scalar::Scalar;

/// Maximum-total-weight one-to-one matching between rows and columns of
/// `weights`, restricted to pairs whose weight is at least `gate`.
///
/// Returns `(row, col)` pairs sorted by row. Pairs below the gate are never
/// returned; they take part in the optimization with weight zero, which is
/// the same as leaving both sides unmatched.
pub fn max_weight_matching<T: Scalar>(weights: &[Vec<T>], gate: T) -> Vec<(usize, usize)> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    debug_assert!(weights.iter().all(|r| r.len() == cols));

    let admissible = |r: usize, c: usize| {
        let w = weights[r][c];
        w >= gate && w > T::zero()
    };
    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let cost = |i: usize, j: usize| -> T {
        let (r, c) = if transposed { (j, i) } else { (i, j) };
        if admissible(r, c) {
            -weights[r][c]
        } else {
            T::zero()
        }
    };

    let assigned = hungarian_min(n, m, cost);
    let mut pairs: Vec<(usize, usize)> = assigned
        .into_iter()
        .enumerate()
        .map(|(i, j)| if transposed { (j, i) } else { (i, j) })
        .filter(|&(r, c)| admissible(r, c))
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Minimum-cost assignment of `n` rows into `m >= n` columns; returns the column
/// of every row. Potentials-based O(n²m) formulation; scans columns in index
/// order with strict improvement so ties resolve to the lowest index.
fn hungarian_min<T: Scalar>(n: usize, m: usize, cost: impl Fn(usize, usize) -> T) -> Vec<usize> {
    debug_assert!(n <= m);
    let inf = T::infinity();
    // 1-based with column 0 as the virtual root.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
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

    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search over all partial injections rows → cols.
    fn brute_force_best(weights: &[Vec<f64>], gate: f64) -> f64 {
        fn rec(w: &[Vec<f64>], gate: f64, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == w.len() {
                return 0.0;
            }
            let mut best = rec(w, gate, row + 1, used);
            for c in 0..used.len() {
                if !used[c] && w[row][c] >= gate && w[row][c] > 0.0 {
                    used[c] = true;
                    best = best.max(w[row][c] + rec(w, gate, row + 1, used));
                    used[c] = false;
                }
            }
            best
        }
        let cols = weights.first().map_or(0, Vec::len);
        rec(weights, gate, 0, &mut vec![false; cols])
    }

    #[test]
    fn empty_inputs() {
        assert!(max_weight_matching::<f64>(&[], 0.3).is_empty());
        assert!(max_weight_matching::<f64>(&[vec![], vec![]], 0.3).is_empty());
    }

    #[test]
    fn prefers_global_optimum_over_greedy() {
        // Greedy would take (0,0)=0.9 and then (1,1)=0.1.
        let w = vec![vec![0.9, 0.8], vec![0.85, 0.1]];
        assert_eq!(max_weight_matching(&w, 0.0), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn gate_excludes_weak_pairs() {
        let w = vec![vec![0.2, 0.0], vec![0.0, 0.6]];
        assert_eq!(max_weight_matching(&w, 0.3), vec![(1, 1)]);
    }

    #[test]
    fn rectangular_both_ways() {
        let w = vec![vec![0.5, 0.9, 0.4]];
        assert_eq!(max_weight_matching(&w, 0.3), vec![(0, 1)]);
        let wt = vec![vec![0.5], vec![0.9], vec![0.4]];
        assert_eq!(max_weight_matching(&wt, 0.3), vec![(1, 0)]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let w = vec![vec![0.5, 0.5], vec![0.0, 0.0]];
        assert_eq!(max_weight_matching(&w, 0.3), vec![(0, 0)]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(rows in 0usize..5, cols in 0usize..5,
                               seed in proptest::collection::vec(0.0..1.0f64, 25),
                               gate in 0.0..0.6f64) {
            let w: Vec<Vec<f64>> = (0..rows)
                .map(|r| (0..cols).map(|c| seed[r * 5 + c]).collect())
                .collect();
            let pairs = max_weight_matching(&w, gate);
            let mut seen_r = std::collections::HashSet::new();
            let mut seen_c = std::collections::HashSet::new();
            for &(r, c) in &pairs {
                prop_assert!(seen_r.insert(r) && seen_c.insert(c));
                prop_assert!(w[r][c] >= gate);
            }
            let total: f64 = pairs.iter().map(|&(r, c)| w[r][c]).sum();
            prop_assert!((total - brute_force_best(&w, gate)).abs() < 1e-9);
        }
    }
}

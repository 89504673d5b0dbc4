//! Minimum-cost one-to-one assignment on rectangular cost matrices.
//!
//! The core solver is the O(n^2 m) shortest-augmenting-path form of the
//! Hungarian method with row/column potentials. Among equal-cost optima the
//! lexicographically smallest pair list is returned; this is found by fixing
//! pairs greedily and re-solving the remaining sub-problem, which is cheap at
//! the matrix sizes produced by box matching.

use serde::{Deserialize, Serialize};

/// Cost slack under which two assignments count as equally good.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub matched_pairs: Vec<(usize, usize)>,
    pub cost_matrix: Vec<Vec<f64>>,
}

impl Assignment {
    pub fn total_cost(&self) -> f64 {
        self.matched_pairs
            .iter()
            .map(|&(i, j)| self.cost_matrix[i][j])
            .sum()
    }
}

/// Solves `rows <= cols`; returns the column of each row.
fn solve_wide(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    debug_assert!(n <= m);
    // 1-based potentials, column 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            col_of[owner[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Optimal pairs for any shape, sorted by row.
fn solve_pairs(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows <= cols {
        solve_wide(cost).into_iter().enumerate().collect()
    } else {
        let t: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        let mut pairs: Vec<(usize, usize)> = solve_wide(&t)
            .into_iter()
            .enumerate()
            .map(|(j, i)| (i, j))
            .collect();
        pairs.sort_unstable();
        pairs
    }
}

/// Minimum cost over sub-matrix `rows x cols` with `min(|rows|, |cols|)` pairs.
fn sub_optimum(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    let sub: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| cost[i][j]).collect())
        .collect();
    solve_pairs(&sub).iter().map(|&(i, j)| sub[i][j]).sum()
}

/// Minimum-cost assignment of size `min(rows, cols)`.
///
/// Entries must be finite. An empty matrix yields an empty assignment.
pub fn hungarian(cost: &[Vec<f64>]) -> Assignment {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    let cost_matrix = cost.to_vec();
    if rows == 0 || cols == 0 {
        return Assignment {
            matched_pairs: Vec::new(),
            cost_matrix,
        };
    }
    let k = rows.min(cols);
    let optimum: f64 = solve_pairs(cost).iter().map(|&(i, j)| cost[i][j]).sum();

    // Greedy lexicographic refinement: extend the prefix with the smallest
    // (row, col) that still admits an optimal completion.
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(k);
    let mut fixed_cost = 0.0;
    let mut next_row = 0;
    let mut used_cols = vec![false; cols];
    while pairs.len() < k {
        let mut chosen = None;
        'rows: for i in next_row..rows {
            // Rows skipped between `next_row` and `i` stay unmatched.
            let rows_left: Vec<usize> = (i + 1..rows).collect();
            if rows_left.len() + 1 < k - pairs.len() {
                break;
            }
            for j in (0..cols).filter(|&j| !used_cols[j]) {
                let cols_left: Vec<usize> = (0..cols).filter(|&c| !used_cols[c] && c != j).collect();
                let need = k - pairs.len() - 1;
                if rows_left.len().min(cols_left.len()) < need {
                    continue;
                }
                let rest = if need == 0 {
                    0.0
                } else {
                    sub_optimum(cost, &rows_left, &cols_left)
                };
                let total = fixed_cost + cost[i][j] + rest;
                if total <= optimum + TIE_TOLERANCE * (1.0 + optimum.abs()) {
                    chosen = Some((i, j));
                    break 'rows;
                }
            }
        }
        // The unconstrained optimum always admits some extension.
        let (i, j) = chosen.expect("optimal completion exists");
        fixed_cost += cost[i][j];
        used_cols[j] = true;
        next_row = i + 1;
        pairs.push((i, j));
    }
    Assignment {
        matched_pairs: pairs,
        cost_matrix,
    }
}

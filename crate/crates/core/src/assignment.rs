//! Minimum-cost bipartite matching (Kuhn-Munkres with potentials) plus
//! post-solve rejection.
//!
//! Rectangular matrices are padded to square with a uniform cost larger than
//! every real entry; [`FORBIDDEN`] entries take the same pad cost while solving
//! and are always stripped afterwards. Among several optimal matchings the one
//! that is lexicographically smallest in `(row, col)` order is returned.

use crate::geometry::{CostMatrix, FORBIDDEN};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssignmentResult {
    /// `(row, col)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl AssignmentResult {
    fn from_pairs(rows: usize, cols: usize, matches: Vec<(usize, usize)>) -> Self {
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        for &(r, c) in &matches {
            row_used[r] = true;
            col_used[c] = true;
        }
        AssignmentResult {
            matches,
            unmatched_rows: (0..rows).filter(|&r| !row_used[r]).collect(),
            unmatched_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
        }
    }
}

/// Optimal matching, then drops every pair whose cost exceeds `reject_above` or
/// is forbidden.
pub fn solve(c: &CostMatrix, reject_above: f64) -> AssignmentResult {
    solve_with(c, reject_above, true)
}

/// Like [`solve`] but returns whichever optimal matching the solver finds first.
/// Cheaper on matrices with many ties; use where only the total matters.
pub fn solve_unordered(c: &CostMatrix, reject_above: f64) -> AssignmentResult {
    solve_with(c, reject_above, false)
}

fn solve_with(c: &CostMatrix, reject_above: f64, lexicographic: bool) -> AssignmentResult {
    let matches = optimal_pairs(c, reject_above, lexicographic)
        .into_iter()
        .filter(|&(i, j)| {
            let v = c.get(i, j);
            v != FORBIDDEN && !(v > reject_above)
        })
        .collect();
    AssignmentResult::from_pairs(c.rows(), c.cols(), matches)
}

/// Total cost of the optimal matching before any rejection.
pub fn min_cost(c: &CostMatrix) -> f64 {
    optimal_pairs(c, f64::INFINITY, false)
        .into_iter()
        .map(|(i, j)| c.get(i, j))
        .sum()
}

/// Optimal matching on the real part of `c`, every real row or column (whichever
/// is fewer) matched, including forbidden pairs.
fn optimal_pairs(c: &CostMatrix, reject_above: f64, lexicographic: bool) -> Vec<(usize, usize)> {
    let (n, m) = c.shape();
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let k = n.max(m);
    let mut max_real = c
        .values()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    if reject_above.is_finite() {
        max_real = max_real.max(reject_above.abs());
    }
    // large enough that no set of real pairs costs as much as one extra pad pair
    let pad = (max_real + 1.0) * (k as f64 + 1.0);

    let mut a = vec![pad; k * k];
    for i in 0..n {
        for j in 0..m {
            let v = c.get(i, j);
            if v.is_finite() {
                a[i * k + j] = v;
            }
        }
    }

    let mut sq = SquareSolver::new(k, a);
    sq.run();
    if lexicographic {
        sq.lexicographic_fix(pad);
    }

    (0..n)
        .filter_map(|i| {
            let j = sq.row_to_col[i];
            (j < m).then_some((i, j))
        })
        .collect()
}

struct SquareSolver {
    k: usize,
    a: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
}

impl SquareSolver {
    fn new(k: usize, a: Vec<f64>) -> Self {
        SquareSolver {
            k,
            a,
            u: vec![0.0; k],
            v: vec![0.0; k],
            row_to_col: vec![usize::MAX; k],
            col_to_row: vec![usize::MAX; k],
        }
    }

    fn cost(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.k + j]
    }

    /// Shortest augmenting path Hungarian method, O(k^3).
    fn run(&mut self) {
        let k = self.k;
        // 1-based working arrays; index 0 is the virtual source column.
        let mut u = vec![0.0f64; k + 1];
        let mut v = vec![0.0f64; k + 1];
        let mut p = vec![0usize; k + 1];
        let mut way = vec![0usize; k + 1];
        for i in 1..=k {
            p[0] = i;
            let mut j0 = 0usize;
            let mut minv = vec![f64::INFINITY; k + 1];
            let mut used = vec![false; k + 1];
            loop {
                used[j0] = true;
                let i0 = p[j0];
                let mut delta = f64::INFINITY;
                let mut j1 = 0usize;
                for j in 1..=k {
                    if used[j] {
                        continue;
                    }
                    let cur = self.cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
                for j in 0..=k {
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
        for (j, &row) in p.iter().enumerate().skip(1) {
            self.row_to_col[row - 1] = j - 1;
            self.col_to_row[j - 1] = row - 1;
        }
        self.u = u[1..].to_vec();
        self.v = v[1..].to_vec();
    }

    /// Walks rows in order and moves each to the smallest column that still
    /// admits an optimal completion. Optimal matchings are exactly the perfect
    /// matchings of the zero-reduced-cost subgraph, so every move is an
    /// alternating cycle inside that subgraph over the rows not yet fixed.
    fn lexicographic_fix(&mut self, pad: f64) {
        let k = self.k;
        let tol = 1e-11 * pad.max(1.0);
        let tight = |s: &SquareSolver, i: usize, j: usize| s.cost(i, j) - s.u[i] - s.v[j] <= tol;

        for i in 0..k {
            let current = self.row_to_col[i];
            for c in 0..current {
                if !tight(self, i, c) || self.col_to_row[c] < i {
                    continue;
                }
                if let Some(path) = self.alternating_path(i, c, current, &tight) {
                    self.rotate(i, c, path);
                    break;
                }
            }
        }
    }

    /// Augmenting path for the row displaced from `target` when row `i` takes
    /// it, ending at `freed` (the column `i` gives up). Returns the sequence of
    /// `(row, new_col)` reassignments.
    fn alternating_path(
        &self,
        i: usize,
        target: usize,
        freed: usize,
        tight: &impl Fn(&SquareSolver, usize, usize) -> bool,
    ) -> Option<Vec<(usize, usize)>> {
        let k = self.k;
        let start = self.col_to_row[target];
        // parent[col] = (row that reached col via tight edge)
        let mut parent: Vec<Option<usize>> = vec![None; k];
        let mut seen = vec![false; k];
        seen[target] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(r) = queue.pop_front() {
            for col in 0..k {
                if seen[col] || !tight(self, r, col) {
                    continue;
                }
                let owner = self.col_to_row[col];
                if col != freed && (owner <= i) {
                    continue;
                }
                seen[col] = true;
                parent[col] = Some(r);
                if col == freed {
                    let mut moves = Vec::new();
                    let mut c = col;
                    loop {
                        let row = parent[c].expect("path parent");
                        moves.push((row, c));
                        if row == start {
                            return Some(moves);
                        }
                        c = self.row_to_col[row];
                    }
                }
                queue.push_back(owner);
            }
        }
        None
    }

    fn rotate(&mut self, i: usize, target: usize, moves: Vec<(usize, usize)>) {
        for (row, col) in moves {
            self.row_to_col[row] = col;
            self.col_to_row[col] = row;
        }
        self.row_to_col[i] = target;
        self.col_to_row[target] = i;
    }
}

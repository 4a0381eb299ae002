//! Sparse LU factorization of simplex basis matrices.
//!
//! Left-looking factorization with threshold partial pivoting. Bases of GEP
//! models are extremely sparse (a handful of nonzeros per row), so the
//! factors are built column by column with a sparse triangular solve whose
//! nonzero pattern is found by depth-first reachability.

/// Relative pivot threshold: the diagonal candidate is kept if its magnitude
/// is at least this fraction of the column maximum.
const PIVOT_THRESHOLD: f64 = 0.1;

/// Entries smaller than this are dropped from the factors.
const DROP_TOL: f64 = 1e-13;

#[derive(Debug)]
pub struct SingularBasis;

/// LU factors of a square sparse matrix with row permutation:
/// `L * U = P * B`, rows of `B` permuted by `pinv` (original row -> position).
pub struct SparseLu {
    n: usize,
    /// Column k of L in permuted row space; unit diagonal stored explicitly
    /// as the first entry `(k, 1.0)`.
    l_cols: Vec<Vec<(usize, f64)>>,
    /// Column k of U in permuted row space; diagonal stored last.
    u_cols: Vec<Vec<(usize, f64)>>,
    /// Original row index -> permuted position.
    pinv: Vec<usize>,
}

impl SparseLu {
    /// Factorize the matrix whose columns are `col(k)`, entries given as
    /// `(original_row, value)` pairs with unique rows per column.
    pub fn factorize<'a, F>(n: usize, col: F) -> Result<Self, SingularBasis>
    where
        F: Fn(usize) -> &'a [(usize, f64)],
    {
        // pinv[i] = usize::MAX while row i is not yet pivotal.
        let mut pinv = vec![usize::MAX; n];
        let mut l_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut u_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);

        // Dense workspaces reused across columns.
        let mut x = vec![0.0f64; n];
        let mut pattern: Vec<usize> = Vec::with_capacity(64);
        let mut visited = vec![false; n];
        let mut dfs_stack: Vec<(usize, usize)> = Vec::with_capacity(64);

        for k in 0..n {
            let b = col(k);

            // Symbolic step: reachability of b's pattern through finished L
            // columns, producing `pattern` in topological order (children
            // before parents would break the solve; we need reverse
            // post-order, i.e. a node is appended after all nodes it can
            // reach, then iterated in reverse).
            pattern.clear();
            for &(i, _) in b {
                if visited[i] {
                    continue;
                }
                // Iterative DFS from node i over the graph: node j has edges
                // to the rows of L column pinv[j] (when j is pivotal).
                dfs_stack.push((i, 0));
                visited[i] = true;
                while let Some(&(j, next0)) = dfs_stack.last() {
                    let jcol = pinv[j];
                    if jcol == usize::MAX {
                        dfs_stack.pop();
                        pattern.push(j);
                        continue;
                    }
                    let lcol = &l_cols[jcol];
                    let mut next = next0;
                    let mut descended = false;
                    while next < lcol.len() {
                        let child = lcol[next].0;
                        next += 1;
                        if !visited[child] {
                            visited[child] = true;
                            dfs_stack.last_mut().unwrap().1 = next;
                            dfs_stack.push((child, 0));
                            descended = true;
                            break;
                        }
                    }
                    if !descended {
                        dfs_stack.pop();
                        pattern.push(j);
                    }
                }
            }
            for &(i, v) in b {
                x[i] = v;
            }

            // Numeric sparse triangular solve L * x' = b, processing nodes in
            // reverse topological order. Entries of x remain indexed by
            // original row; L columns are stored in permuted space for
            // finished pivots, so translate through pinv.
            for idx in (0..pattern.len()).rev() {
                let j = pattern[idx];
                let jcol = pinv[j];
                if jcol == usize::MAX {
                    continue;
                }
                let xj = x[j];
                if xj != 0.0 {
                    // Skip the unit diagonal (first entry).
                    for &(orig_row, lv) in l_cols[jcol].iter().skip(1) {
                        x[orig_row] -= lv * xj;
                    }
                }
            }

            // Pivot search among not-yet-pivotal rows.
            let mut best_row = usize::MAX;
            let mut best_abs = 0.0f64;
            let mut u_col: Vec<(usize, f64)> = Vec::new();
            for &j in pattern.iter() {
                if pinv[j] == usize::MAX {
                    let a = x[j].abs();
                    if a > best_abs || (a == best_abs && j < best_row) {
                        best_abs = a;
                        best_row = j;
                    }
                }
            }
            if best_abs <= DROP_TOL {
                // Clean up workspaces before bailing out.
                for &j in &pattern {
                    x[j] = 0.0;
                    visited[j] = false;
                }
                return Err(SingularBasis);
            }
            // Prefer the structurally diagonal entry when acceptably large.
            // With no a-priori column order the "diagonal" is row == k.
            if pinv.get(k) == Some(&usize::MAX) && x[k].abs() >= PIVOT_THRESHOLD * best_abs {
                best_row = k;
            }
            let pivot = x[best_row];

            // Split x into the U part (pivotal rows) and the L part.
            let mut l_col: Vec<(usize, f64)> = vec![(best_row, 1.0)];
            for &j in pattern.iter() {
                let v = x[j];
                if pinv[j] != usize::MAX {
                    if v.abs() > DROP_TOL {
                        u_col.push((pinv[j], v));
                    }
                } else if j != best_row && (v / pivot).abs() > DROP_TOL {
                    l_col.push((j, v / pivot));
                }
                x[j] = 0.0;
                visited[j] = false;
            }
            u_col.sort_unstable_by_key(|e| e.0);
            u_col.push((k, pivot));
            pinv[best_row] = k;
            l_cols.push(l_col);
            u_cols.push(u_col);
        }

        // Remap L's row indices into permuted space now that pinv is total.
        for col in l_cols.iter_mut() {
            for e in col.iter_mut() {
                e.0 = pinv[e.0];
            }
        }

        Ok(SparseLu {
            n,
            l_cols,
            u_cols,
            pinv,
        })
    }

    pub fn nnz(&self) -> usize {
        self.l_cols.iter().map(Vec::len).sum::<usize>()
            + self.u_cols.iter().map(Vec::len).sum::<usize>()
    }

    /// Solve `B x = b` in place. `b` is indexed by original rows on input;
    /// the result is indexed by basis position (columns of `B`).
    pub fn ftran(&self, b: &mut [f64], scratch: &mut Vec<f64>) {
        debug_assert_eq!(b.len(), self.n);
        scratch.clear();
        scratch.resize(self.n, 0.0);
        for i in 0..self.n {
            scratch[self.pinv[i]] = b[i];
        }
        // Forward solve L w = P b (unit diagonal first entry).
        for k in 0..self.n {
            let wk = scratch[k];
            if wk != 0.0 {
                for &(i, v) in self.l_cols[k].iter().skip(1) {
                    scratch[i] -= v * wk;
                }
            }
        }
        // Backward solve U x = w (diagonal last entry).
        for k in (0..self.n).rev() {
            let ucol = &self.u_cols[k];
            let diag = ucol[ucol.len() - 1].1;
            let xk = scratch[k] / diag;
            scratch[k] = xk;
            if xk != 0.0 {
                for &(i, v) in ucol[..ucol.len() - 1].iter() {
                    scratch[i] -= v * xk;
                }
            }
        }
        b.copy_from_slice(scratch);
    }

    /// Solve `B^T y = c` in place. `c` is indexed by basis position on input;
    /// the result is indexed by original rows.
    pub fn btran(&self, c: &mut [f64], scratch: &mut Vec<f64>) {
        debug_assert_eq!(c.len(), self.n);
        // Forward solve U^T z = c.
        for k in 0..self.n {
            let ucol = &self.u_cols[k];
            let mut s = c[k];
            for &(i, v) in ucol[..ucol.len() - 1].iter() {
                s -= v * c[i];
            }
            c[k] = s / ucol[ucol.len() - 1].1;
        }
        // Backward solve L^T w = z (unit diagonal).
        for k in (0..self.n).rev() {
            let mut s = c[k];
            for &(i, v) in self.l_cols[k].iter().skip(1) {
                s -= v * c[i];
            }
            c[k] = s;
        }
        // Undo the row permutation: y[orig] = w[pinv[orig]].
        scratch.clear();
        scratch.resize(self.n, 0.0);
        for i in 0..self.n {
            scratch[i] = c[self.pinv[i]];
        }
        c.copy_from_slice(scratch);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(cols: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut out = vec![0.0; n];
        for (k, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                out[i] += v * x[k];
            }
        }
        out
    }

    #[test]
    fn factorize_and_solve_small() {
        // B = [[2, 1, 0], [0, 0, 3], [1, 0, 1]] stored by columns.
        let cols: Vec<Vec<(usize, f64)>> = vec![
            vec![(0, 2.0), (2, 1.0)],
            vec![(0, 1.0)],
            vec![(1, 3.0), (2, 1.0)],
        ];
        let lu = SparseLu::factorize(3, |k| cols[k].as_slice()).unwrap();

        let b = vec![3.0, 6.0, 3.0];
        let mut x = b.clone();
        let mut scratch = Vec::new();
        lu.ftran(&mut x, &mut scratch);
        let back = dense_mul(&cols, &x);
        for (bi, ri) in b.iter().zip(&back) {
            assert!((bi - ri).abs() < 1e-12, "{b:?} vs {back:?}");
        }

        let c = vec![1.0, -2.0, 0.5];
        let mut y = c.clone();
        lu.btran(&mut y, &mut scratch);
        // Check B^T y = c by computing column dots.
        for (k, col) in cols.iter().enumerate() {
            let dot: f64 = col.iter().map(|&(i, v)| v * y[i]).sum();
            assert!((dot - c[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_singular() {
        // Second column is a multiple of the first.
        let cols: Vec<Vec<(usize, f64)>> = vec![
            vec![(0, 1.0), (1, 2.0)],
            vec![(0, 2.0), (1, 4.0)],
        ];
        assert!(SparseLu::factorize(2, |k| cols[k].as_slice()).is_err());
    }

    #[test]
    fn identity_with_permuted_rows() {
        // A permutation matrix exercises the pivoting paths.
        let cols: Vec<Vec<(usize, f64)>> = vec![
            vec![(2, 1.0)],
            vec![(0, 1.0)],
            vec![(1, 1.0)],
        ];
        let lu = SparseLu::factorize(3, |k| cols[k].as_slice()).unwrap();
        let mut x = vec![5.0, 7.0, 9.0];
        let mut scratch = Vec::new();
        lu.ftran(&mut x, &mut scratch);
        // B x = b with B the permutation sending col k to row (k+2)%3.
        assert_eq!(x, vec![7.0, 9.0, 5.0]);
    }
}

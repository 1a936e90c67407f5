//! Compressed sparse row matrices with a fixed pattern, a direct solver
//! with cached symbolic factorization, and the mean-zero pressure gauge.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Conj, MatMut, Par};

use crate::error::{Error, Result};

/// Default relative residual tolerance of [`LinearSolver`].
pub const DEFAULT_TOL: f64 = 1e-10;

/// Square CSR matrix. Column indices are sorted and unique within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Collects the sparsity pattern row by row.
#[derive(Debug, Clone)]
pub struct PatternBuilder {
    rows: Vec<Vec<usize>>,
}

impl PatternBuilder {
    pub fn new(n: usize) -> Self {
        PatternBuilder { rows: vec![Vec::new(); n] }
    }

    pub fn insert(&mut self, i: usize, j: usize) {
        self.rows[i].push(j);
    }

    /// Inserts the full block `rows x cols`.
    pub fn insert_block(&mut self, rows: &[usize], cols: &[usize]) {
        for &i in rows {
            self.rows[i].extend_from_slice(cols);
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        let n = self.rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &mut self.rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        SparseMatrix { n, row_ptr, col_idx, values }
    }
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut pb = PatternBuilder::new(n);
        for &(i, j, _) in triplets {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
            }
            pb.insert(i, j);
        }
        let mut a = pb.build();
        for &(i, j, v) in triplets {
            a.add(i, j, v);
        }
        Ok(a)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].binary_search(&j).ok().map(|k| s + k)
    }

    /// Adds `v` to entry `(i, j)`.
    ///
    /// # Panics
    /// If `(i, j)` is not part of the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        match self.position(i, j) {
            Some(k) => self.values[k] += v,
            None => panic!("entry ({i}, {j}) is not in the sparsity pattern"),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn fill_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Entries `(col, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// Replaces row `i` by the identity row.
    pub fn set_identity_row(&mut self, i: usize) {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            self.values[k] = if self.col_idx[k] == i { 1.0 } else { 0.0 };
        }
    }

    /// Visits every stored entry as `(row, col, &mut value)`.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(usize, usize, &mut f64)) {
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                f(i, self.col_idx[k], &mut self.values[k]);
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length does not match matrix dimension");
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Relative residual `|b - A x| / |b|` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matvec(x);
        let r = norm(&ax.iter().zip(b).map(|(a, b)| b - a).collect::<Vec<_>>());
        let nb = norm(b);
        if nb > 0.0 {
            r / nb
        } else {
            r
        }
    }

    fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Outcome of a linear solve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearSolveReport {
    /// Relative 2-norm residual of the returned solution.
    pub residual: f64,
    /// Iterative refinement steps after the direct solve.
    pub refinement_steps: usize,
    /// GMRES iterations spent in the fallback (0 if not used).
    pub fallback_iterations: usize,
    /// Whether a cached symbolic factorization was reused.
    pub reused_symbolic: bool,
    /// Whether a new numeric factorization was computed for this solve.
    pub refactored: bool,
}

struct CachedSymbolic {
    pattern: SparseMatrix,
    structure: SymbolicSparseColMat<usize>,
    lu: Arc<SymbolicLu<usize>>,
}

// 0 = not yet read from the environment
static THREADS: AtomicUsize = AtomicUsize::new(0);

/// Caps the number of threads used by factorizations and triangular solves.
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

/// Thread count from [`set_threads`], else `NSCH_THREADS`, else 1.
pub fn threads() -> usize {
    match THREADS.load(Ordering::Relaxed) {
        0 => {
            let n = std::env::var("NSCH_THREADS").ok().and_then(|v| v.parse().ok()).unwrap_or(1usize).max(1);
            THREADS.store(n, Ordering::Relaxed);
            n
        }
        n => n,
    }
}

fn par() -> Par {
    match threads() {
        1 => Par::Seq,
        n => Par::rayon(n),
    }
}

/// Sparse LU solver that keeps the symbolic analysis of the last pattern.
pub struct LinearSolver {
    tol: f64,
    cache: Option<CachedSymbolic>,
    last: Option<Factorization>,
    refresh: bool,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver")
            .field("tol", &self.tol)
            .field("cached", &self.cache.is_some())
            .finish()
    }
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::new(DEFAULT_TOL)
    }
}

/// Factored matrix ready for repeated solves.
pub struct Factorization {
    lu: Option<(Arc<SymbolicLu<usize>>, NumericLu<usize, f64>)>,
    tol: f64,
    reused_symbolic: bool,
}

const MAX_REFINEMENT: usize = 4;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITERS: usize = 600;
const STALE_MAX_ITERS: usize = 40;
const STALE_REFRESH_ITERS: usize = 10;
// stale solves aim this far below the tolerance, to match direct-solve accuracy
const STALE_TIGHTENING: f64 = 1e-3;
const STALE_FLOOR: f64 = 1e-14;

impl LinearSolver {
    pub fn new(tol: f64) -> Self {
        LinearSolver { tol, cache: None, last: None, refresh: false }
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Numeric factorization of `a` (the CSR arrays of `a` are the CSC
    /// arrays of its transpose, which is what gets factored).
    pub fn factor(&mut self, a: &SparseMatrix) -> Factorization {
        let reused = matches!(&self.cache, Some(c) if c.pattern.same_pattern(a));
        if !reused {
            let structure = SymbolicSparseColMat::new_checked(
                a.n,
                a.n,
                a.row_ptr.clone(),
                None,
                a.col_idx.clone(),
            );
            let params = LuSymbolicParams {
                supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
                ..Default::default()
            };
            self.cache = factorize_symbolic_lu(structure.as_ref(), params).ok().map(|lu| CachedSymbolic {
                pattern: SparseMatrix {
                    n: a.n,
                    row_ptr: a.row_ptr.clone(),
                    col_idx: a.col_idx.clone(),
                    values: Vec::new(),
                },
                structure,
                lu: Arc::new(lu),
            });
        }
        let lu = self.cache.as_ref().and_then(|c| {
            let at = SparseColMatRef::new(c.structure.as_ref(), &a.values);
            let par = par();
            let mut buf = MemBuffer::try_new(c.lu.factorize_numeric_lu_scratch::<f64>(par, Default::default())).ok()?;
            let mut numeric = NumericLu::new();
            c.lu.factorize_numeric_lu(&mut numeric, at, par, MemStack::new(&mut buf), Default::default()).ok()?;
            Some((c.lu.clone(), numeric))
        });
        Factorization { lu, tol: self.tol, reused_symbolic: reused }
    }

    /// Factors and solves `A x = b` in one call.
    pub fn solve(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<(Vec<f64>, LinearSolveReport)> {
        let f = self.factor(a);
        let (x, mut rep) = f.solve(a, b)?;
        rep.refactored = true;
        Ok((x, rep))
    }

    /// Like [`solve`](Self::solve), but first tries the factorization kept
    /// from an earlier call with the same pattern as a preconditioner. A new
    /// factorization is computed when that fails or needs many iterations.
    pub fn solve_reusing(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<(Vec<f64>, LinearSolveReport)> {
        let same = matches!(&self.cache, Some(c) if c.pattern.same_pattern(a));
        if same && !self.refresh {
            if let Some(f) = &self.last {
                let target = (self.tol * STALE_TIGHTENING).max(STALE_FLOOR).min(self.tol);
                let (x, rep) = f.solve_limited(a, b, target, STALE_MAX_ITERS)?;
                if rep.residual <= target {
                    self.refresh = rep.fallback_iterations > STALE_REFRESH_ITERS;
                    return Ok((x, rep));
                }
            }
        }
        let f = self.factor(a);
        let (x, mut rep) = f.solve(a, b)?;
        rep.refactored = true;
        self.last = Some(f);
        self.refresh = false;
        Ok((x, rep))
    }
}

impl Factorization {
    fn apply_lu(&self, r: &[f64]) -> Option<Vec<f64>> {
        let (sym, num) = self.lu.as_ref()?;
        let par = par();
        let mut out = r.to_vec();
        let mut buf = MemBuffer::try_new(sym.solve_transpose_in_place_scratch::<f64>(1, par)).ok()?;
        let n = out.len();
        LuRef::new_unchecked(sym, num).solve_transpose_in_place_with_conj(
            Conj::No,
            MatMut::from_column_major_slice_mut(&mut out, n, 1),
            par,
            MemStack::new(&mut buf),
        );
        out.iter().all(|v| v.is_finite()).then_some(out)
    }

    /// Solves `A x = b` where `A` is the matrix passed to
    /// [`LinearSolver::factor`].
    pub fn solve(&self, a: &SparseMatrix, b: &[f64]) -> Result<(Vec<f64>, LinearSolveReport)> {
        let (x, report) = self.solve_limited(a, b, self.tol, GMRES_MAX_ITERS)?;
        if !(report.residual <= self.tol) {
            return Err(Error::SolverFailure {
                message: format!("relative residual above tolerance {:e}", self.tol),
                residual: report.residual,
            });
        }
        Ok((x, report))
    }

    /// Direct solve, refinement and at most `max_iters` GMRES iterations
    /// towards residual `tol`; only dimension errors are reported as `Err`.
    fn solve_limited(
        &self,
        a: &SparseMatrix,
        b: &[f64],
        tol: f64,
        max_iters: usize,
    ) -> Result<(Vec<f64>, LinearSolveReport)> {
        if b.len() != a.n {
            return Err(Error::invalid(format!(
                "right-hand side has length {}, matrix dimension is {}",
                b.len(),
                a.n
            )));
        }
        let mut report = LinearSolveReport { reused_symbolic: self.reused_symbolic, ..Default::default() };
        if norm(b) == 0.0 {
            return Ok((vec![0.0; a.n], report));
        }
        let mut x = self.apply_lu(b).unwrap_or_else(|| vec![0.0; a.n]);
        let mut res = a.relative_residual(&x, b);
        if self.lu.is_some() {
            while res > tol && report.refinement_steps < MAX_REFINEMENT {
                let ax = a.matvec(&x);
                let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
                let Some(dx) = self.apply_lu(&r) else { break };
                let cand: Vec<f64> = x.iter().zip(&dx).map(|(x, d)| x + d).collect();
                report.refinement_steps += 1;
                let cres = a.relative_residual(&cand, b);
                if cres >= res {
                    break;
                }
                x = cand;
                res = cres;
            }
        }
        if res > tol {
            let (xg, its) = gmres(a, b, &x, tol, max_iters, |v| self.apply_lu(v).unwrap_or_else(|| v.to_vec()));
            report.fallback_iterations = its;
            let gres = a.relative_residual(&xg, b);
            if gres < res {
                x = xg;
                res = gres;
            }
        }
        report.residual = res;
        Ok((x, report))
    }
}

/// Right-preconditioned restarted GMRES.
fn gmres(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iters: usize,
    precond: impl Fn(&[f64]) -> Vec<f64>,
) -> (Vec<f64>, usize) {
    let n = a.n;
    let nb = norm(b);
    let mut x = x0.to_vec();
    let mut total = 0;
    while total < max_iters {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta <= tol * nb || !beta.is_finite() {
            break;
        }
        let m = GMRES_RESTART;
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|t| t / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < max_iters {
            let zk = precond(&v[k]);
            let mut w = a.matvec(&zk);
            z.push(zk);
            for i in 0..=k {
                let hik: f64 = w.iter().zip(&v[i]).map(|(a, b)| a * b).sum();
                hess[i][k] = hik;
                w.iter_mut().zip(&v[i]).for_each(|(a, b)| *a -= hik * b);
            }
            let hn = norm(&w);
            hess[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let d = hess[k][k].hypot(hess[k + 1][k]);
            if d == 0.0 {
                break;
            }
            cs[k] = hess[k][k] / d;
            sn[k] = hess[k + 1][k] / d;
            hess[k][k] = d;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if g[k].abs() <= tol * nb || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|t| t / hn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            x.iter_mut().zip(&z[i]).for_each(|(x, z)| *x += yi * z);
        }
        if k == 0 || n == 0 {
            break;
        }
    }
    (x, total)
}

/// Appends the constraint `sum_i w_i x_{offset + i} = 0` with one Lagrange
/// multiplier as the last unknown. Returns the augmented matrix and
/// right-hand side.
pub fn augment_mean_zero(
    a: &SparseMatrix,
    b: &[f64],
    offset: usize,
    weights: &[f64],
) -> Result<(SparseMatrix, Vec<f64>)> {
    if b.len() != a.n {
        return Err(Error::invalid("right-hand side length does not match matrix"));
    }
    if offset + weights.len() > a.n {
        return Err(Error::invalid("pressure block exceeds matrix dimension"));
    }
    if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid("mean-zero weights must be positive and finite"));
    }
    let n = a.n + 1;
    let mut pb = PatternBuilder::new(n);
    for i in 0..a.n {
        pb.rows[i].extend(a.row(i).map(|(j, _)| j));
    }
    for k in 0..weights.len() {
        pb.insert(offset + k, a.n);
        pb.insert(a.n, offset + k);
    }
    // explicit zero keeps the multiplier diagonal structurally present
    pb.insert(a.n, a.n);
    let mut out = pb.build();
    for i in 0..a.n {
        for (j, v) in a.row(i) {
            out.add(i, j, v);
        }
    }
    for (k, &w) in weights.iter().enumerate() {
        out.add(offset + k, a.n, w);
        out.add(a.n, offset + k, w);
    }
    let mut rhs = b.to_vec();
    rhs.push(0.0);
    Ok((out, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    #[test]
    fn identity_and_diagonal() {
        let a = SparseMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        let (x, rep) = LinearSolver::default().solve(&a, &b).unwrap();
        assert_eq!(x, b);
        assert!(rep.residual <= 1e-15);

        let a = SparseMatrix::from_triplets(2, &[(0, 0, 2.0), (1, 1, 4.0)]).unwrap();
        let (x, _) = LinearSolver::default().solve(&a, &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lumped_mass_system() {
        let m = Mesh::structured(6).unwrap();
        let n = m.num_nodes();
        let trip: Vec<_> = m.lumped_mass().iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        let a = SparseMatrix::from_triplets(n, &trip).unwrap();
        let b = a.matvec(&vec![1.0; n]);
        let (x, rep) = LinearSolver::default().solve(&a, &b).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(rep.residual <= 1e-10);
    }

    #[test]
    fn nonsymmetric_solve_orientation() {
        // catches an accidental transpose
        let a = SparseMatrix::from_triplets(3, &[(0, 0, 1.0), (0, 2, 5.0), (1, 1, 2.0), (2, 0, -1.0), (2, 2, 3.0)])
            .unwrap();
        let b = [11.0, 4.0, 5.0];
        let (x, _) = LinearSolver::default().solve(&a, &b).unwrap();
        let ax = a.matvec(&x);
        for (p, q) in ax.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_triplets_summed_and_pattern_enforced() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 2);
        assert!(SparseMatrix::from_triplets(2, &[(2, 0, 1.0)]).is_err());
        let r = std::panic::catch_unwind(move || {
            let mut a = a;
            a.add(0, 1, 1.0)
        });
        assert!(r.is_err());
    }

    #[test]
    fn singular_matrix_reports_failure() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        match LinearSolver::default().solve(&a, &[1.0, 0.0]) {
            Err(Error::SolverFailure { residual, .. }) => assert!(residual > 1e-10),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn symbolic_reuse() {
        let mut a = SparseMatrix::from_triplets(3, &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 4.0), (2, 2, 2.0)])
            .unwrap();
        let mut s = LinearSolver::default();
        let (_, r1) = s.solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        a.add(0, 0, 1.0);
        let (x, r2) = s.solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert!(!r1.reused_symbolic && r2.reused_symbolic);
        assert!(a.relative_residual(&x, &[1.0, 2.0, 3.0]) < 1e-14);
    }

    #[test]
    fn stale_factorization_reused_until_it_stops_helping() {
        let tri = |d: f64, off: f64| {
            let n = 40;
            let mut t = Vec::new();
            for i in 0..n {
                t.push((i, i, d + 0.01 * i as f64));
                if i + 1 < n {
                    t.push((i, i + 1, -1.0));
                    t.push((i + 1, i, -off));
                }
            }
            SparseMatrix::from_triplets(n, &t).unwrap()
        };
        let b: Vec<f64> = (0..40).map(|i| 1.0 + (i as f64).cos()).collect();
        let mut s = LinearSolver::default();
        let a0 = tri(4.0, 1.0);
        let (_, r) = s.solve_reusing(&a0, &b).unwrap();
        assert!(r.refactored);
        let a1 = tri(4.001, 1.001);
        let (x, r) = s.solve_reusing(&a1, &b).unwrap();
        assert!(!r.refactored);
        assert!(a1.relative_residual(&x, &b) <= DEFAULT_TOL);
        // far from the stored factors
        let a2 = tri(-6.0, -3.0);
        let (x, r) = s.solve_reusing(&a2, &b).unwrap();
        assert!(a2.relative_residual(&x, &b) <= DEFAULT_TOL);
        assert!(r.refactored || r.fallback_iterations > 0);
        let (x, _) = s.solve_reusing(&a2, &b).unwrap();
        assert!(a2.relative_residual(&x, &b) <= DEFAULT_TOL);
        let (_, r) = s.solve_reusing(&SparseMatrix::identity(3), &b[..3]).unwrap();
        assert!(r.refactored);
    }

    #[test]
    fn gmres_fallback_meets_contract() {
        let n = 30;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0 + i as f64 * 0.1));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                trip.push((i + 1, i, -1.5));
            }
        }
        let a = SparseMatrix::from_triplets(n, &trip).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let (x, its) = gmres(&a, &b, &vec![0.0; n], 1e-12, GMRES_MAX_ITERS, |v| v.to_vec());
        assert!(its > 0);
        assert!(a.relative_residual(&x, &b) <= 1e-12);
    }

    /// 1D Neumann Laplacian on pressure unknowns: singular with the constant
    /// vector as kernel, the model of a pressure gauge problem.
    fn neumann(n: usize) -> SparseMatrix {
        let mut trip = Vec::new();
        for i in 0..n {
            let mut d = 0.0;
            if i > 0 {
                trip.push((i, i - 1, -1.0));
                d += 1.0;
            }
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                d += 1.0;
            }
            trip.push((i, i, d));
        }
        SparseMatrix::from_triplets(n, &trip).unwrap()
    }

    #[test]
    fn mean_zero_gauge() {
        let n = 8;
        let a = neumann(n);
        let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 - 3.5) * 0.3).collect();
        let (aa, bb) = augment_mean_zero(&a, &b, 0, &w).unwrap();
        let (x, _) = LinearSolver::default().solve(&aa, &bb).unwrap();
        let mean: f64 = x[..n].iter().zip(&w).map(|(p, w)| p * w).sum();
        assert!(mean.abs() <= 1e-12);

        // shifting b by the image of the constant (zero here) leaves p unchanged
        let shifted: Vec<f64> = b.iter().zip(a.matvec(&vec![5.0; n])).map(|(b, s)| b + s).collect();
        let (aa2, bb2) = augment_mean_zero(&a, &shifted, 0, &w).unwrap();
        let (x2, _) = LinearSolver::default().solve(&aa2, &bb2).unwrap();
        for i in 0..n {
            assert!((x[i] - x2[i]).abs() < 1e-12);
        }

        // a right-hand side with nonzero total forces a nonzero multiplier
        let bias = vec![0.25; n];
        let rhs: Vec<f64> = b.iter().zip(&bias).map(|(b, c)| b + c).collect();
        let (aa3, bb3) = augment_mean_zero(&a, &rhs, 0, &w).unwrap();
        let (x3, _) = LinearSolver::default().solve(&aa3, &bb3).unwrap();
        let total: f64 = rhs.iter().sum();
        let wsum: f64 = w.iter().sum();
        assert!((x3[n] - total / wsum).abs() < 1e-12);

        // pin-one-node gauge agrees up to a constant shift
        let mut pinned = a.clone();
        pinned.set_identity_row(0);
        let mut pb = b.clone();
        pb[0] = 0.0;
        // column 0 of the remaining rows multiplies p_0 = 0, so it can stay
        let (xp, _) = LinearSolver::default().solve(&pinned, &pb).unwrap();
        let shift = xp[1] - x[1];
        for i in 0..n {
            assert!((xp[i] - x[i] - shift).abs() < 1e-10);
        }
    }

    #[test]
    fn gauge_rejects_bad_weights() {
        let a = neumann(3);
        assert!(augment_mean_zero(&a, &[0.0; 3], 0, &[0.0; 3]).is_err());
        assert!(augment_mean_zero(&a, &[0.0; 3], 0, &[1.0, -1.0, 1.0]).is_err());
        assert!(augment_mean_zero(&a, &[0.0; 3], 2, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn deterministic_assembly() {
        let trip = [(0, 1, 0.1), (1, 0, 0.2), (0, 0, 1.0), (1, 1, 1.0), (0, 1, 0.3)];
        let a = SparseMatrix::from_triplets(2, &trip).unwrap();
        let b = SparseMatrix::from_triplets(2, &trip).unwrap();
        assert_eq!(a, b);
    }
}

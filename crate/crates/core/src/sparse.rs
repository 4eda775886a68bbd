//! Triplet assembly, CSR storage and the linear solvers used by the flow
//! and transport problems.
//!
//! The direct path hands the CSR matrix to faer's supernodal sparse LU
//! (partial pivoting, COLAMD fill-reducing order) and polishes the result
//! with iterative refinement. BiCGSTAB with Jacobi or ILU(0)
//! preconditioning is implemented here.

use std::io::Write;
use std::path::Path;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::prelude::Solve;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, CholeskySymbolicParams, SymmetricOrdering};
use faer::sparse::{SparseColMatRef, SparseRowMatRef, SymbolicSparseColMatRef, SymbolicSparseRowMatRef};
use faer::{Conj, Mat, Par, Side};

use crate::error::{Error, Iterate, SparseError};

/// Unsorted `(row, col, value)` entries; duplicates are summed by [`to_csr`].
#[derive(Debug, Clone, Default)]
pub struct TripletBuffer {
    dim: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuffer {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn with_capacity(dim: usize, capacity: usize) -> Self {
        Self {
            dim,
            rows: Vec::with_capacity(capacity),
            cols: Vec::with_capacity(capacity),
            vals: Vec::with_capacity(capacity),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(value);
    }

    /// Appends another buffer of the same dimension.
    pub fn merge(&mut self, other: TripletBuffer) {
        self.rows.extend(other.rows);
        self.cols.extend(other.cols);
        self.vals.extend(other.vals);
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .zip(&self.cols)
            .zip(&self.vals)
            .map(|((&r, &c), &v)| (r, c, v))
    }
}

/// Square compressed-sparse-row matrix with sorted, unique columns per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Sums duplicates and sorts columns. Explicit zeros are kept, so two
/// assemblies that push the same positions share a sparsity pattern.
pub fn to_csr(buf: &TripletBuffer, n: usize) -> Result<CsrMatrix, SparseError> {
    if let Some((row, col, _)) = buf.iter().find(|&(r, c, _)| r >= n || c >= n) {
        return Err(SparseError::IndexOutOfRange { row, col, dim: n });
    }
    let mut counts = vec![0usize; n + 1];
    for &r in &buf.rows {
        counts[r + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let mut fill = counts.clone();
    let mut cols = vec![0usize; buf.len()];
    let mut vals = vec![0.0; buf.len()];
    for (r, c, v) in buf.iter() {
        cols[fill[r]] = c;
        vals[fill[r]] = v;
        fill[r] += 1;
    }

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(buf.len());
    let mut values = Vec::with_capacity(buf.len());
    row_offsets.push(0);
    let mut scratch: Vec<(usize, f64)> = Vec::new();
    for r in 0..n {
        scratch.clear();
        scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
        // Stable sort keeps the summation order of duplicates deterministic.
        scratch.sort_by_key(|&(c, _)| c);
        for &(c, v) in &scratch {
            if col_indices.len() > row_offsets[r] && *col_indices.last().unwrap() == c {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
            }
        }
        row_offsets.push(col_indices.len());
    }
    Ok(CsrMatrix {
        n,
        row_offsets,
        col_indices,
        values,
    })
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Stored value at `(r, c)`, zero when not in the pattern.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        match self.col_indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut buf = TripletBuffer::with_capacity(self.n, self.nnz());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                buf.push(c, r, v);
            }
        }
        to_csr(&buf, self.n).expect("transpose keeps indices in range")
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        d
    }

    /// Largest absolute entrywise difference; both patterns are visited.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        let mut m: f64 = 0.0;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m = m.max((v - other.get(r, c)).abs());
            }
            for (c, v) in other.row(r) {
                m = m.max((v - self.get(r, c)).abs());
            }
        }
        m
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n == other.n
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }

    /// Rebuilds the matrix keeping only entries for which `keep` holds and
    /// adding `extra` triplets.
    pub(crate) fn filtered(
        &self,
        new_dim: usize,
        keep: impl Fn(usize, usize) -> bool,
        extra: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> CsrMatrix {
        let mut buf = TripletBuffer::with_capacity(new_dim, self.nnz());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                if keep(r, c) {
                    buf.push(r, c, v);
                }
            }
        }
        for (r, c, v) in extra {
            buf.push(r, c, v);
        }
        to_csr(&buf, new_dim).expect("filtered entries stay in range")
    }

    /// Writes MatrixMarket coordinate format with 1-based indices.
    pub fn write_matrix_market(&self, path: &Path) -> Result<(), Error> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let res = (|| -> std::io::Result<()> {
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
            for r in 0..self.n {
                for (c, v) in self.row(r) {
                    writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
                }
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }
}

/// Which unknown a row of a [`SparseSystem`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockLabel {
    Velocity1,
    Velocity2,
    Pressure,
    /// Lagrange multiplier of the pressure mean constraint.
    Multiplier,
    Concentration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Contiguous blocks in row order with their sizes.
    pub blocks: Vec<(BlockLabel, usize)>,
}

impl SparseSystem {
    pub fn new(
        matrix: CsrMatrix,
        rhs: Vec<f64>,
        blocks: Vec<(BlockLabel, usize)>,
    ) -> Result<Self, SparseError> {
        let total: usize = blocks.iter().map(|b| b.1).sum();
        if matrix.dim() != rhs.len() || total != rhs.len() {
            return Err(SparseError::DimensionMismatch {
                matrix: matrix.dim(),
                vector: rhs.len(),
            });
        }
        Ok(Self {
            matrix,
            rhs,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Offset of the first row of block `label`.
    pub fn block_offset(&self, label: BlockLabel) -> Option<usize> {
        let mut off = 0;
        for &(l, size) in &self.blocks {
            if l == label {
                return Some(off);
            }
            off += size;
        }
        None
    }

    /// `||A x - b||_2 / max(1, ||b||_2)`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.matrix.matvec(x);
        let r: f64 = ax
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        r / norm2(&self.rhs).max(1.0)
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Residual bound the direct solver guarantees.
pub const DIRECT_RESIDUAL_BOUND: f64 = 1e-10;

/// Applies a factorization-backed `solve` with iterative refinement against
/// the true matrix. Returns the best iterate and its relative residual.
fn refine<F>(sys: &SparseSystem, max_steps: usize, mut solve: F) -> Result<(Vec<f64>, f64), SparseError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut x = solve(&sys.rhs);
    if let Some(pivot) = x.iter().position(|v| !v.is_finite()) {
        return Err(SparseError::Singular { pivot });
    }
    let mut residual = sys.relative_residual(&x);
    for _ in 0..max_steps {
        if residual <= 1e-14 {
            break;
        }
        let ax = sys.matrix.matvec(&x);
        let r: Vec<f64> = sys.rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
        let dx = solve(&r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let next = sys.relative_residual(&candidate);
        if !(next < residual) {
            break;
        }
        x = candidate;
        residual = next;
    }
    Ok((x, residual))
}

fn check_direct(x: Vec<f64>, residual: f64) -> Result<Vec<f64>, SparseError> {
    if residual <= DIRECT_RESIDUAL_BOUND {
        Ok(x)
    } else {
        Err(SparseError::InaccurateSolve {
            residual,
            bound: DIRECT_RESIDUAL_BOUND,
        })
    }
}

/// Direct sparse LU solve with up to three steps of iterative refinement.
pub fn solve_sparse_lu(sys: &SparseSystem) -> Result<Vec<f64>, SparseError> {
    let n = sys.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    let a = &sys.matrix;
    let symbolic = SymbolicSparseRowMatRef::new_checked(n, n, a.row_offsets(), None, a.col_indices());
    let view = SparseRowMatRef::new(symbolic, a.values());
    let lu = view.sp_lu().map_err(|e| match e {
        faer::sparse::linalg::LuError::SymbolicSingular { index } => SparseError::Singular { pivot: index },
        other => SparseError::Backend(format!("{other:?}")),
    })?;
    let (x, residual) = refine(sys, 3, |b| {
        let x = lu.solve(Mat::<f64>::from_fn(n, 1, |i, _| b[i]));
        (0..n).map(|i| x[(i, 0)]).collect()
    })?;
    check_direct(x, residual)
}

/// Direct solve of a system that becomes symmetric once the rows flagged in
/// `negate` are multiplied by -1, such as a saddle-point system written with
/// a skew coupling. Uses a sparse LDL^T with fill-reducing minimum degree
/// ordering. Pivots that come out tiny or of the wrong sign (`pivot_signs`,
/// in original numbering) are regularized, and iterative refinement against
/// the unmodified matrix removes the perturbation. Falls back to
/// [`solve_sparse_lu`] if refinement does not reach the direct residual
/// bound.
pub fn solve_sign_symmetric(sys: &SparseSystem, negate: &[bool], pivot_signs: &[i8]) -> Result<Vec<f64>, SparseError> {
    let n = sys.dim();
    if negate.len() != n || pivot_signs.len() != n {
        return Err(SparseError::DimensionMismatch {
            matrix: n,
            vector: negate.len().min(pivot_signs.len()),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = |i: usize| if negate[i] { -1.0 } else { 1.0 };

    // The lower triangle of the scaled rows, read column-wise, is the upper
    // triangle of the symmetric matrix.
    let a = &sys.matrix;
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    let mut max_diag = 0.0f64;
    col_ptr.push(0);
    for r in 0..n {
        for (c, v) in a.row(r) {
            if c <= r {
                row_idx.push(c);
                values.push(scale(r) * v);
            }
            if c == r {
                max_diag = max_diag.max(v.abs());
            }
        }
        col_ptr.push(row_idx.len());
    }
    let upper = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
    let symbolic = factorize_symbolic_cholesky(
        upper,
        Side::Upper,
        SymmetricOrdering::Amd,
        CholeskySymbolicParams::default(),
    )
    .map_err(|e| SparseError::Backend(format!("{e:?}")))?;

    let regularization = LdltRegularization {
        dynamic_regularization_signs: Some(pivot_signs),
        dynamic_regularization_delta: 1e-8 * max_diag.max(1.0),
        dynamic_regularization_epsilon: 1e-13 * max_diag.max(1.0),
    };
    let mut factor = vec![0.0; symbolic.len_val()];
    let ldlt = symbolic
        .factorize_numeric_ldlt(
            &mut factor,
            SparseColMatRef::new(upper, &values),
            Side::Upper,
            regularization,
            Par::Seq,
            MemStack::new(&mut MemBuffer::new(
                symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()),
            )),
            Default::default(),
        )
        .map_err(|e| SparseError::Backend(format!("{e:?}")));
    let ldlt = match ldlt {
        Ok(f) => f,
        Err(_) => return solve_sparse_lu(sys),
    };
    let mut scratch = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
    let (x, residual) = refine(sys, 10, |b| {
        let mut x = Mat::<f64>::from_fn(n, 1, |i, _| scale(i) * b[i]);
        ldlt.solve_in_place_with_conj(Conj::No, x.as_mut(), Par::Seq, MemStack::new(&mut scratch));
        (0..n).map(|i| x[(i, 0)]).collect()
    })
    .unwrap_or((Vec::new(), f64::INFINITY));
    if residual <= DIRECT_RESIDUAL_BOUND {
        Ok(x)
    } else {
        solve_sparse_lu(sys)
    }
}

/// Linear solver selection for assembled systems.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LinearSolver {
    #[default]
    Lu,
    Bicgstab {
        tol: f64,
        max_iter: usize,
        preconditioner: Preconditioner,
    },
}

impl LinearSolver {
    /// Solution and iteration count (zero for the direct solver).
    pub fn solve(&self, sys: &SparseSystem) -> Result<(Vec<f64>, usize), SparseError> {
        match *self {
            LinearSolver::Lu => Ok((solve_sparse_lu(sys)?, 0)),
            LinearSolver::Bicgstab {
                tol,
                max_iter,
                preconditioner,
            } => solve_bicgstab(sys, tol, max_iter, preconditioner),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    Jacobi,
    #[default]
    Ilu0,
}

/// Incomplete LU with zero fill on the pattern of `A`. Unit lower factor and
/// upper factor share one value array.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    /// The pattern is that of `A` plus the diagonal, so rows without a
    /// stored diagonal (e.g. a mean-value multiplier) pick one up from
    /// elimination.
    pub fn new(a: &CsrMatrix) -> Result<Self, SparseError> {
        let n = a.dim();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::with_capacity(a.nnz() + n);
        let mut values = Vec::with_capacity(a.nnz() + n);
        let mut diag_pos = vec![usize::MAX; n];
        row_offsets.push(0);
        for i in 0..n {
            for (c, v) in a.row(i) {
                if c > i && diag_pos[i] == usize::MAX {
                    diag_pos[i] = col_indices.len();
                    col_indices.push(i);
                    values.push(0.0);
                }
                if c == i {
                    diag_pos[i] = col_indices.len();
                }
                col_indices.push(c);
                values.push(v);
            }
            if diag_pos[i] == usize::MAX {
                diag_pos[i] = col_indices.len();
                col_indices.push(i);
                values.push(0.0);
            }
            row_offsets.push(col_indices.len());
        }
        // Position lookup for the current row.
        let mut where_in_row = vec![usize::MAX; n];
        for i in 0..n {
            let span = row_offsets[i]..row_offsets[i + 1];
            for k in span.clone() {
                where_in_row[col_indices[k]] = k;
            }
            for k in span.clone() {
                let kcol = col_indices[k];
                if kcol >= i {
                    break;
                }
                let pivot = values[diag_pos[kcol]];
                if pivot == 0.0 {
                    return Err(SparseError::Singular { pivot: kcol });
                }
                let factor = values[k] / pivot;
                values[k] = factor;
                for kk in diag_pos[kcol] + 1..row_offsets[kcol + 1] {
                    let pos = where_in_row[col_indices[kk]];
                    if pos != usize::MAX {
                        values[pos] -= factor * values[kk];
                    }
                }
            }
            for k in span {
                where_in_row[col_indices[k]] = usize::MAX;
            }
            if values[diag_pos[i]] == 0.0 {
                return Err(SparseError::Singular { pivot: i });
            }
        }
        Ok(Self {
            n,
            row_offsets,
            col_indices,
            values,
            diag_pos,
        })
    }

    /// Solves `L U z = r` in place.
    pub fn apply(&self, z: &mut [f64]) {
        for i in 0..self.n {
            let mut s = z[i];
            for k in self.row_offsets[i]..self.diag_pos[i] {
                s -= self.values[k] * z[self.col_indices[k]];
            }
            z[i] = s;
        }
        for i in (0..self.n).rev() {
            let mut s = z[i];
            for k in self.diag_pos[i] + 1..self.row_offsets[i + 1] {
                s -= self.values[k] * z[self.col_indices[k]];
            }
            z[i] = s / self.values[self.diag_pos[i]];
        }
    }
}

enum Precond {
    Identity,
    Jacobi(Vec<f64>),
    Ilu(Ilu0),
}

impl Precond {
    fn build(kind: Preconditioner, a: &CsrMatrix) -> Result<Self, SparseError> {
        Ok(match kind {
            Preconditioner::None => Precond::Identity,
            Preconditioner::Jacobi => {
                let d = a.diagonal();
                if let Some(i) = d.iter().position(|&v| v == 0.0) {
                    return Err(SparseError::Singular { pivot: i });
                }
                Precond::Jacobi(d.iter().map(|v| 1.0 / v).collect())
            }
            Preconditioner::Ilu0 => Precond::Ilu(Ilu0::new(a)?),
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Identity => z.copy_from_slice(r),
            Precond::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Precond::Ilu(ilu) => {
                z.copy_from_slice(r);
                ilu.apply(z);
            }
        }
    }
}

/// `||b - A x|| / ||b||`.
fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: f64 = b.iter().zip(&ax).map(|(b, y)| (b - y) * (b - y)).sum();
    r.sqrt() / norm2(b)
}

/// Right-preconditioned BiCGSTAB from a zero initial guess.
///
/// Convergence is judged on the true relative residual `||b - A x|| / ||b||`.
/// Returns the solution and the number of iterations taken.
pub fn solve_bicgstab(
    sys: &SparseSystem,
    tol: f64,
    max_iter: usize,
    preconditioner: Preconditioner,
) -> Result<(Vec<f64>, usize), SparseError> {
    if !(tol > 0.0) {
        return Err(SparseError::InvalidTolerance(tol));
    }
    let a = &sys.matrix;
    let b = &sys.rhs;
    let n = sys.dim();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let m = Precond::build(preconditioner, a)?;

    let mut r = b.clone();
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut best = (f64::INFINITY, x.clone());
    let breakdown_eps = 1e-300;

    for iter in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < breakdown_eps * bnorm * bnorm || omega == 0.0 {
            let (res, xb) = best;
            return Err(SparseError::Breakdown {
                iteration: iter,
                residual: res.min(norm2(&r) / bnorm),
                best: Iterate(if res.is_finite() { xb } else { x }),
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        m.apply(&p, &mut p_hat);
        a.matvec_into(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < breakdown_eps {
            let (res, xb) = best;
            return Err(SparseError::Breakdown {
                iteration: iter,
                residual: res,
                best: Iterate(xb),
            });
        }
        alpha = rho / denom;
        // r becomes s
        for i in 0..n {
            x[i] += alpha * p_hat[i];
            r[i] -= alpha * v[i];
        }
        let s_norm = norm2(&r) / bnorm;
        if s_norm <= tol && true_residual(a, b, &x) <= tol {
            return Ok((x, iter));
        }
        m.apply(&r, &mut s_hat);
        a.matvec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += omega * s_hat[i];
            r[i] -= omega * t[i];
        }
        let res = norm2(&r) / bnorm;
        if res < best.0 {
            best = (res, x.clone());
        }
        if res <= tol {
            // The recursive residual can drift from the true one.
            if true_residual(a, b, &x) <= tol {
                return Ok((x, iter));
            }
            let ax = a.matvec(&x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
    }
    Err(SparseError::NotConverged {
        iterations: max_iter,
        residual: true_residual(a, b, &best.1),
        best: Iterate(best.1),
    })
}

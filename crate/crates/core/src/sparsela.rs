//! Compressed-row sparse matrices, Dirichlet-eliminated saddle-point
//! systems, and their solution.
//!
//! The direct path is a sparse LU with fill-reducing ordering and partial
//! pivoting (faer). The symbolic analysis is kept and reused whenever the
//! sparsity pattern is unchanged, which is the case across time steps.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("structurally singular matrix (no pivot at elimination step {pivot})")]
    StructurallySingular { pivot: usize },
    #[error("numerically singular matrix (non-finite solution at index {index})")]
    NumericallySingular { index: usize },
    #[error("non-finite right-hand side entry at index {index}")]
    NonFiniteRhs { index: usize },
    #[error("iterative solver stalled after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("factorization backend: {0}")]
    Backend(String),
}

/// Compressed-row matrix with strictly increasing column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicate entries (in input order) and drops exact zeros.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self, SolverError> {
        if let Some(&(i, j, _)) = triplets.iter().find(|(i, j, _)| *i >= nrows || *j >= ncols) {
            return Err(SolverError::Shape(format!("entry ({i}, {j}) outside {nrows}x{ncols}")));
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut k = 0;
        while k < triplets.len() {
            let (i, j, mut v) = triplets[k];
            k += 1;
            while k < triplets.len() && triplets[k].0 == i && triplets[k].1 == j {
                v += triplets[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let trip = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v)))
            .collect();
        Self::from_triplets(rows.len(), ncols, trip).expect("in-bounds by construction")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
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

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    pub fn spmv(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        y
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "spmv: x has wrong length");
        assert_eq!(y.len(), self.nrows, "spmv: y has wrong length");
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `y = Aᵀ x`.
    pub fn spmv_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut count = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            count[j + 1] += 1;
        }
        for j in 0..self.ncols {
            count[j + 1] += count[j];
        }
        let row_ptr = count.clone();
        let mut next = count;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let k = next[j];
                col_idx[k] = i;
                values[k] = v;
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }

    /// `self + alpha * other` on the union pattern.
    pub fn add_scaled(&self, other: &Self, alpha: f64) -> Result<Self, SolverError> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(SolverError::Shape(format!(
                "{}x{} + {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(col_idx.capacity());
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let (j, v) = match (ca.get(p), cb.get(q)) {
                    (Some(&ja), Some(&jb)) if ja == jb => {
                        p += 1;
                        q += 1;
                        (ja, va[p - 1] + alpha * vb[q - 1])
                    }
                    (Some(&ja), Some(&jb)) if ja < jb => {
                        p += 1;
                        (ja, va[p - 1])
                    }
                    (Some(_), Some(&jb)) => {
                        q += 1;
                        (jb, alpha * vb[q - 1])
                    }
                    (Some(&ja), None) => {
                        p += 1;
                        (ja, va[p - 1])
                    }
                    (None, Some(&jb)) => {
                        q += 1;
                        (jb, alpha * vb[q - 1])
                    }
                    (None, None) => unreachable!(),
                };
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Adds `alpha * other` into `self`; `other`'s pattern must be contained in `self`'s.
    pub fn add_assign_scaled_subpattern(&mut self, other: &Self, alpha: f64) -> Result<(), SolverError> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(SolverError::Shape("add_assign_scaled_subpattern".into()));
        }
        for i in 0..self.nrows {
            let (start, end) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let (cb, vb) = other.row(i);
            let mut p = start;
            for (&j, &v) in cb.iter().zip(vb) {
                while p < end && self.col_idx[p] < j {
                    p += 1;
                }
                if p == end || self.col_idx[p] != j {
                    return Err(SolverError::Shape(format!("entry ({i}, {j}) outside pattern")));
                }
                self.values[p] += alpha * v;
            }
        }
        Ok(())
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// Coordinate text dump: one `i j value` line per stored entry.
    pub fn write_coo(&self, out: &mut impl Write) -> std::io::Result<()> {
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(out, "{i} {j} {v:.16e}")?;
            }
        }
        Ok(())
    }
}

/// Reusable symbolic analysis of a square sparse pattern.
#[derive(Clone)]
pub struct SymbolicAnalysis {
    pattern: SparseMatrix,
    inner: SymbolicLu<usize>,
}

impl SymbolicAnalysis {
    pub fn new(matrix: &SparseMatrix) -> Result<Self, SolverError> {
        if matrix.nrows != matrix.ncols {
            return Err(SolverError::Shape("LU needs a square matrix".into()));
        }
        // The CSR arrays of A are the CSC arrays of Aᵀ; we factor Aᵀ and solve transposed.
        let sym =
            SymbolicSparseColMatRef::new_checked(matrix.nrows, matrix.ncols, &matrix.row_ptr, None, &matrix.col_idx);
        let inner = SymbolicLu::try_new(sym).map_err(|e| SolverError::Backend(format!("{e:?}")))?;
        let mut pattern = matrix.clone();
        pattern.values.clear();
        Ok(Self { pattern, inner })
    }

    pub fn matches(&self, matrix: &SparseMatrix) -> bool {
        self.pattern.nrows == matrix.nrows
            && self.pattern.row_ptr == matrix.row_ptr
            && self.pattern.col_idx == matrix.col_idx
    }
}

/// Sparse LU factorization handle; reusable for any number of right-hand sides.
pub struct LuFactorization {
    matrix: SparseMatrix,
    lu: Lu<usize, f64>,
}

impl LuFactorization {
    pub fn new(matrix: &SparseMatrix) -> Result<Self, SolverError> {
        let sym = SymbolicAnalysis::new(matrix)?;
        Self::with_symbolic(&sym, matrix)
    }

    pub fn with_symbolic(symbolic: &SymbolicAnalysis, matrix: &SparseMatrix) -> Result<Self, SolverError> {
        if !symbolic.matches(matrix) {
            return Err(SolverError::Shape("pattern differs from symbolic analysis".into()));
        }
        if let Some(k) = matrix.values.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::Backend(format!(
                "non-finite matrix entry at storage index {k}"
            )));
        }
        let sym =
            SymbolicSparseColMatRef::new_checked(matrix.nrows, matrix.ncols, &matrix.row_ptr, None, &matrix.col_idx);
        let mat = SparseColMatRef::new(sym, &matrix.values);
        let lu = Lu::try_new_with_symbolic(symbolic.inner.clone(), mat).map_err(|e| match e {
            LuError::SymbolicSingular { index } => SolverError::StructurallySingular { pivot: index },
            LuError::Generic(g) => SolverError::Backend(format!("{g:?}")),
        })?;
        Ok(Self {
            matrix: matrix.clone(),
            lu,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    /// Solves `A x = b`, with one step of iterative refinement when the
    /// residual exceeds `1e-12 (‖A‖∞‖x‖∞ + ‖b‖∞)`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(SolverError::Shape(format!(
                "rhs length {} for dimension {n}",
                rhs.len()
            )));
        }
        if let Some(index) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteRhs { index });
        }
        let mut x = self.raw_solve(rhs);
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::NumericallySingular { index });
        }
        let r = residual(&self.matrix, &x, rhs);
        let scale = self.matrix.norm_inf() * inf_norm(&x) + inf_norm(rhs);
        if inf_norm(&r) > 1e-12 * scale {
            let dx = self.raw_solve(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        Ok(x)
    }

    fn raw_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        let n = x.len();
        let view = MatMut::from_column_major_slice_mut(&mut x, n, 1);
        self.lu.solve_transpose_in_place(view);
        x
    }
}

pub fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.spmv(x);
    ax.iter().zip(b).map(|(p, q)| q - p).collect()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Which linear solver backs a saddle system.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum SolverKind {
    #[default]
    Direct,
    /// Restarted GMRES with a block-diagonal (Jacobi) preconditioner.
    Gmres {
        restart: usize,
        rel_tol: f64,
        max_iter: usize,
    },
}

/// Where an entry of the velocity block lands after Dirichlet elimination.
#[derive(Clone, Copy, Debug)]
enum Slot {
    System(usize),
    Lifting(usize),
    Dropped,
}

/// Saddle-point system
///
/// ```text
/// [ A   -Bᵀ ] [u]   [f]
/// [ -B   0  ] [p] = [g]
/// ```
///
/// with constrained velocity DOFs eliminated (identity rows and columns,
/// boundary values lifted to the right-hand side) and optionally one pressure
/// DOF pinned to zero.
pub struct SaddleSystem {
    n_vel: usize,
    n_pre: usize,
    constrained: Vec<bool>,
    pin: Option<usize>,
    matrix: SparseMatrix,
    /// Free rows x constrained velocity columns of the full operator.
    lifting: SparseMatrix,
    velocity_slots: Vec<Slot>,
    velocity_pattern: SparseMatrix,
    symbolic: Option<SymbolicAnalysis>,
    factorization: Option<LuFactorization>,
    solver: SolverKind,
}

impl SaddleSystem {
    pub fn new(
        velocity_block: &SparseMatrix,
        coupling: &SparseMatrix,
        constrained: &[bool],
        pin: Option<usize>,
    ) -> Result<Self, SolverError> {
        let n_vel = velocity_block.nrows();
        let n_pre = coupling.nrows();
        if velocity_block.ncols() != n_vel || coupling.ncols() != n_vel || constrained.len() != n_vel {
            return Err(SolverError::Shape(format!(
                "velocity block {}x{}, coupling {}x{}, mask {}",
                velocity_block.nrows(),
                velocity_block.ncols(),
                coupling.nrows(),
                coupling.ncols(),
                constrained.len()
            )));
        }
        if let Some(p) = pin {
            if p >= n_pre {
                return Err(SolverError::Shape(format!("pinned pressure {p} out of range")));
            }
        }
        let n = n_vel + n_pre;
        let mut trip = Vec::with_capacity(velocity_block.nnz() + 2 * coupling.nnz() + n);
        let mut lift = Vec::new();
        // Velocity block entries are tagged with their storage index so the
        // slot map can be recovered after sorting.
        const TAG: f64 = 1.0;
        let mut vel_entries = Vec::new();
        for i in 0..n_vel {
            if constrained[i] {
                trip.push((i, i, TAG));
                continue;
            }
            let (cols, _) = velocity_block.row(i);
            for (k, &j) in cols.iter().enumerate() {
                let storage = velocity_block.row_ptr()[i] + k;
                if constrained[j] {
                    lift.push((i, j, storage));
                } else {
                    trip.push((i, j, TAG));
                    vel_entries.push((i, j, storage));
                }
            }
        }
        for k in 0..n_pre {
            let (cols, vals) = coupling.row(k);
            for (&j, &v) in cols.iter().zip(vals) {
                if Some(k) == pin {
                    continue;
                }
                if constrained[j] {
                    lift.push((n_vel + k, j, usize::MAX));
                    let _ = v;
                } else {
                    trip.push((n_vel + k, j, TAG));
                    trip.push((j, n_vel + k, TAG));
                }
            }
        }
        if let Some(p) = pin {
            trip.push((n_vel + p, n_vel + p, TAG));
        }
        // Pattern only; values are filled below.
        let mut matrix = SparseMatrix::from_triplets(n, n, trip)?;
        matrix.values.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n_vel {
            if constrained[i] {
                let k = slot_of(&matrix, i, i);
                matrix.values[k] = 1.0;
            }
        }
        if let Some(p) = pin {
            let k = slot_of(&matrix, n_vel + p, n_vel + p);
            matrix.values[k] = 1.0;
        }
        for k in 0..n_pre {
            if Some(k) == pin {
                continue;
            }
            let (cols, vals) = coupling.row(k);
            for (&j, &v) in cols.iter().zip(vals) {
                if !constrained[j] {
                    let s = slot_of(&matrix, n_vel + k, j);
                    matrix.values[s] += -v;
                    let s = slot_of(&matrix, j, n_vel + k);
                    matrix.values[s] += -v;
                }
            }
        }

        // Lifting matrix: rows of the full system, columns = velocity DOFs.
        let mut lift_trip = Vec::with_capacity(lift.len());
        for &(i, j, storage) in &lift {
            lift_trip.push((i, j, if storage == usize::MAX { 0.0 } else { TAG }));
        }
        // Keep coupling entries by giving them their value directly.
        for k in 0..n_pre {
            if Some(k) == pin {
                continue;
            }
            let (cols, vals) = coupling.row(k);
            for (&j, &v) in cols.iter().zip(vals) {
                if constrained[j] {
                    lift_trip.push((n_vel + k, j, -v));
                }
            }
        }
        let mut lifting = SparseMatrix::from_triplets(n, n_vel, lift_trip)?;
        // Reset velocity-derived lifting entries; they are set by `set_velocity_block`.
        for &(i, j, storage) in &lift {
            if storage != usize::MAX {
                let k = slot_of(&lifting, i, j);
                lifting.values[k] = 0.0;
            }
        }

        let mut velocity_slots = vec![Slot::Dropped; velocity_block.nnz()];
        for &(i, j, storage) in &vel_entries {
            velocity_slots[storage] = Slot::System(slot_of(&matrix, i, j));
        }
        for &(i, j, storage) in &lift {
            if storage != usize::MAX {
                velocity_slots[storage] = Slot::Lifting(slot_of(&lifting, i, j));
            }
        }
        let mut velocity_pattern = velocity_block.clone();
        velocity_pattern.values.iter_mut().for_each(|v| *v = 0.0);
        let mut sys = Self {
            n_vel,
            n_pre,
            constrained: constrained.to_vec(),
            pin,
            matrix,
            lifting,
            velocity_slots,
            velocity_pattern,
            symbolic: None,
            factorization: None,
            solver: SolverKind::Direct,
        };
        sys.set_velocity_block(velocity_block)?;
        Ok(sys)
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn n_vel(&self) -> usize {
        self.n_vel
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn pin(&self) -> Option<usize> {
        self.pin
    }

    /// The eliminated system matrix.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Replaces the velocity block; its pattern must equal the one given at
    /// construction. Invalidates the numeric factorization only.
    pub fn set_velocity_block(&mut self, a: &SparseMatrix) -> Result<(), SolverError> {
        if !a.same_pattern(&self.velocity_pattern) {
            return Err(SolverError::Shape("velocity block pattern changed".into()));
        }
        for (slot, &v) in self.velocity_slots.iter().zip(a.values()) {
            match *slot {
                Slot::System(k) => self.matrix.values[k] = v,
                Slot::Lifting(k) => self.lifting.values[k] = v,
                Slot::Dropped => {}
            }
        }
        self.factorization = None;
        Ok(())
    }

    pub fn factorize(&mut self) -> Result<(), SolverError> {
        if self.factorization.is_some() || self.solver != SolverKind::Direct {
            return Ok(());
        }
        if self.symbolic.is_none() {
            self.symbolic = Some(SymbolicAnalysis::new(&self.matrix)?);
        }
        let sym = self.symbolic.as_ref().expect("just built");
        self.factorization = Some(LuFactorization::with_symbolic(sym, &self.matrix)?);
        Ok(())
    }

    pub fn is_factorized(&self) -> bool {
        self.factorization.is_some()
    }

    /// Builds the eliminated right-hand side for momentum load `f`,
    /// continuity load `g` and Dirichlet values `bc` (read on constrained DOFs).
    pub fn rhs(&self, f: &[f64], g: &[f64], bc: &[f64]) -> Result<Vec<f64>, SolverError> {
        if f.len() != self.n_vel || g.len() != self.n_pre || bc.len() != self.n_vel {
            return Err(SolverError::Shape("rhs pieces have wrong lengths".into()));
        }
        let mut lifted = vec![0.0; self.n_vel];
        for j in 0..self.n_vel {
            if self.constrained[j] {
                lifted[j] = bc[j];
            }
        }
        let l = self.lifting.spmv(&lifted);
        let mut b = Vec::with_capacity(self.n_vel + self.n_pre);
        for i in 0..self.n_vel {
            b.push(if self.constrained[i] { bc[i] } else { f[i] - l[i] });
        }
        for k in 0..self.n_pre {
            b.push(if Some(k) == self.pin {
                0.0
            } else {
                g[k] - l[self.n_vel + k]
            });
        }
        Ok(b)
    }

    /// Solves for `(u, p)`; factorizes on demand.
    pub fn solve(&mut self, f: &[f64], g: &[f64], bc: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
        let b = self.rhs(f, g, bc)?;
        let x = match self.solver {
            SolverKind::Direct => {
                self.factorize()?;
                self.factorization.as_ref().expect("factorized").solve(&b)?
            }
            SolverKind::Gmres {
                restart,
                rel_tol,
                max_iter,
            } => {
                let diag: Vec<f64> = (0..self.matrix.nrows())
                    .map(|i| {
                        let d = self.matrix.get(i, i);
                        if d != 0.0 {
                            d
                        } else {
                            // Pressure rows: scale by the row norm of the coupling.
                            let (_, v) = self.matrix.row(i);
                            v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300)
                        }
                    })
                    .collect();
                gmres(
                    &self.matrix,
                    &b,
                    |r| r.iter().zip(&diag).map(|(a, d)| a / d).collect(),
                    restart,
                    rel_tol,
                    max_iter,
                )?
            }
        };
        let (u, p) = x.split_at(self.n_vel);
        Ok((u.to_vec(), p.to_vec()))
    }
}

fn slot_of(m: &SparseMatrix, i: usize, j: usize) -> usize {
    let (cols, _) = m.row(i);
    m.row_ptr[i] + cols.binary_search(&j).expect("entry present in pattern")
}

/// Right-preconditioned restarted GMRES.
pub fn gmres(
    a: &SparseMatrix,
    b: &[f64],
    precond: impl Fn(&[f64]) -> Vec<f64>,
    restart: usize,
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, SolverError> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm2(b).max(1e-300);
    let mut iters = 0;
    loop {
        let r = residual(a, &x, b);
        let beta = norm2(&r);
        if beta <= rel_tol * bnorm {
            return Ok(x);
        }
        if iters >= max_iter {
            return Err(SolverError::NoConvergence {
                iterations: iters,
                residual: beta / bnorm,
            });
        }
        let m = restart.max(1);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            iters += 1;
            let zk = precond(&v[k]);
            let mut w = a.spmv(&zk);
            z.push(zk);
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= h[i][k] * vj;
                }
            }
            h[k + 1][k] = norm2(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= rel_tol * bnorm || iters >= max_iter {
                break;
            }
            let hn = norm2(&w).max(1e-300);
            v.push(w.iter().map(|x| x / hn).collect());
            // Re-normalize with the stored subdiagonal for consistency.
            let _ = hn;
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&z[j]) {
                *xi += yj * zi;
            }
        }
    }
}

//! Symmetric sparse matrices and the linear solvers of the mechanical step.
//!
//! The displacement system is SPD (elastic + viscous stiffness plus a
//! strictly positive lumped-mass diagonal), so Jacobi-preconditioned
//! conjugate gradients is the production solver. A dense Cholesky path via
//! `nalgebra` serves as the reference for small systems and as the oracle
//! in tests. All iterations are sequential and deterministic.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::NumericalError;

/// Symmetric sparse matrix in compressed-sparse-row form.
///
/// The full (not just triangular) pattern is stored, and the pattern is
/// symmetric by construction from symmetric assembly; `matvec` is then a
/// plain CSR product.
#[derive(Clone, Debug)]
pub struct SparseSym {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseSym {
    /// Build from coordinate triplets, summing duplicates.
    ///
    /// Duplicate entries are accumulated in their insertion order (the sort
    /// is stable), so assembly is deterministic for a fixed element order.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> SparseSym {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            assert!(r < dim && c < dim, "triplet ({r},{c}) out of bounds {dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseSym { dim, row_ptr, col_idx, vals }
    }

    /// `y = A·x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    /// Diagonal entries (zero where no stored entry exists).
    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] += self.vals[k];
                }
            }
        }
        d
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.dim {
            let mut row = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.vals[k] * x[self.col_idx[k]];
            }
            acc += x[r] * row;
        }
        acc
    }

    /// Densify (reference/oracle path only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] += self.vals[k];
            }
        }
        m
    }

    /// Maximum absolute asymmetry `max |A_ij - A_ji|`, for assembly checks.
    pub fn asymmetry(&self) -> f64 {
        let d = self.to_dense();
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((d[(i, j)] - d[(j, i)]).abs());
            }
        }
        worst
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Terminates when the true residual satisfies `‖A·x − b‖ ≤ tol·‖b‖`.
/// Deterministic for fixed inputs.
pub fn cg_solve(
    a: &SparseSym,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<Vec<f64>, NumericalError> {
    let x0 = vec![0.0; a.dim];
    cg_solve_warm(a, b, x0, tol, maxit)
}

/// Conjugate gradients starting from `x0` (consumed and refined in place).
///
/// Warm starts matter twice: inside the alternating mechanical solve the
/// system matrix is fixed and the previous iterate is close, and across
/// time steps a stationary state yields a zero initial residual so the
/// guess is returned bitwise unchanged.
pub fn cg_solve_warm(
    a: &SparseSym,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    maxit: usize,
) -> Result<Vec<f64>, NumericalError> {
    assert_eq!(b.len(), a.dim);
    assert_eq!(x0.len(), a.dim);
    assert!(tol > 0.0, "cg tolerance must be > 0");
    let nb = norm(b);
    if nb == 0.0 {
        // The unique SPD solution of A·x = 0.
        return Ok(vec![0.0; a.dim]);
    }
    let threshold = tol * nb;
    let mut x = x0;
    let mut r = vec![0.0; a.dim];
    a.matvec(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    if norm(&r) <= threshold {
        return Ok(x);
    }
    // Jacobi preconditioner; guard against zero diagonal (would mean a
    // structurally singular row, impossible for the assembled SPD systems).
    let inv_diag: Vec<f64> = a
        .diag()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; a.dim];
    for _ in 0..maxit {
        a.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(NumericalError::NotSpd(format!(
                "conjugate gradients met a direction with pᵀAp = {pq:e}"
            )));
        }
        let alpha = rz / pq;
        for i in 0..a.dim {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if norm(&r) <= threshold {
            // Recurrence residuals drift; accept only on the true residual.
            a.matvec(&x, &mut q);
            for (qi, bi) in q.iter_mut().zip(b) {
                *qi = bi - *qi;
            }
            if norm(&q) <= threshold {
                return Ok(x);
            }
            r.copy_from_slice(&q);
        }
        for i in 0..a.dim {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..a.dim {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(NumericalError::CgMaxIter { maxit, residual: norm(&r) / nb })
}

/// Dense Cholesky reference solve for small SPD systems (oracle path).
pub fn dense_solve_spd(a: &SparseSym, b: &[f64]) -> Result<Vec<f64>, NumericalError> {
    let dense = a.to_dense();
    let chol = Cholesky::new(dense)
        .ok_or_else(|| NumericalError::NotSpd("dense Cholesky factorization failed".into()))?;
    let x = chol.solve(&DVector::from_column_slice(b));
    Ok(x.as_slice().to_vec())
}

/// Strong nodal Dirichlet elimination that keeps the operator symmetric.
///
/// Rows and columns of constrained dofs are cleared and replaced by a unit
/// diagonal; the removed column entries are kept so that for any vector of
/// prescribed values the right-hand side can be corrected:
/// `rhs_i ← rhs_i − K_ij·value_j` for free `i`, `rhs_j ← value_j` for
/// constrained `j`. The constrained system agrees with the full one on the
/// free dofs and returns the prescribed values exactly on the rest.
#[derive(Clone, Debug)]
pub struct ConstrainedSystem {
    /// The eliminated SPD operator.
    pub matrix: SparseSym,
    /// Removed couplings `(free_row, constrained_col, value)`.
    coupling: Vec<(usize, usize, f64)>,
    /// Per-dof constraint flags.
    constrained: Vec<bool>,
}

impl ConstrainedSystem {
    pub fn new(full: &SparseSym, constrained: Vec<bool>) -> ConstrainedSystem {
        assert_eq!(constrained.len(), full.dim);
        let mut matrix = full.clone();
        let mut coupling = Vec::new();
        for r in 0..matrix.dim {
            for k in matrix.row_ptr[r]..matrix.row_ptr[r + 1] {
                let c = matrix.col_idx[k];
                if constrained[r] {
                    matrix.vals[k] = if c == r { 1.0 } else { 0.0 };
                } else if constrained[c] {
                    coupling.push((r, c, matrix.vals[k]));
                    matrix.vals[k] = 0.0;
                }
            }
        }
        ConstrainedSystem { matrix, coupling, constrained }
    }

    /// Apply the elimination to a right-hand side, given the full-length
    /// vector of prescribed dof values.
    pub fn constrain_rhs(&self, rhs: &mut [f64], values: &[f64]) {
        for &(r, c, v) in &self.coupling {
            rhs[r] -= v * values[c];
        }
        for (j, &flag) in self.constrained.iter().enumerate() {
            if flag {
                rhs[j] = values[j];
            }
        }
    }

    /// Overwrite the constrained entries of a solution with the exact
    /// prescribed values. An iterative solve only reaches them to within its
    /// tolerance; boundary conditions should hold bitwise.
    pub fn enforce(&self, x: &mut [f64], values: &[f64]) {
        for (j, &flag) in self.constrained.iter().enumerate() {
            if flag {
                x[j] = values[j];
            }
        }
    }
}

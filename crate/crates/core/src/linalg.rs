//! Correlation matrices and their Cholesky factors.
//!
//! Two storage forms are supported. A dense matrix is factored with the
//! textbook column-by-column algorithm into a packed lower triangle. A
//! homogeneous matrix (unit diagonal, every off-diagonal entry equal to `c`)
//! has a Cholesky factor whose strictly-lower part is constant down each
//! column, so it is stored as one value per column and applied in `O(n)` with
//! a running prefix sum. Both forms hold the same factor; the compact one is
//! just cheaper to apply.

use crate::error::{Error, Result};

/// Pivots below this are treated as a semidefinite zero (e.g. `c_a = 1`).
const PIVOT_EPS: f64 = 1e-12;
/// Residual allowed under a zero pivot before the matrix is declared indefinite.
const RESIDUAL_EPS: f64 = 1e-9;
const SYMMETRY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationMatrix {
    /// Unit diagonal, constant off-diagonal `c`.
    Homogeneous { dim: usize, c: f64 },
    /// Full row-major `dim × dim` storage.
    Dense { dim: usize, data: Vec<f64> },
}

impl CorrelationMatrix {
    pub fn homogeneous(dim: usize, c: f64) -> Self {
        CorrelationMatrix::Homogeneous { dim, c }
    }

    pub fn identity(dim: usize) -> Self {
        CorrelationMatrix::Homogeneous { dim, c: 0.0 }
    }

    /// Builds a dense matrix from row-major data, checking the shape only.
    pub fn dense(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::LengthMismatch { left: data.len(), right: dim * dim });
        }
        Ok(CorrelationMatrix::Dense { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::LengthMismatch { left: row.len(), right: dim });
            }
            data.extend_from_slice(row);
        }
        Ok(CorrelationMatrix::Dense { dim, data })
    }

    pub fn dim(&self) -> usize {
        match self {
            CorrelationMatrix::Homogeneous { dim, .. } | CorrelationMatrix::Dense { dim, .. } => {
                *dim
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            CorrelationMatrix::Homogeneous { c, .. } => {
                if i == j {
                    1.0
                } else {
                    *c
                }
            }
            CorrelationMatrix::Dense { dim, data } => data[i * dim + j],
        }
    }

    /// Principal submatrix on `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let n = self.dim();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        Ok(match self {
            CorrelationMatrix::Homogeneous { c, .. } => {
                CorrelationMatrix::Homogeneous { dim: indices.len(), c: *c }
            }
            CorrelationMatrix::Dense { .. } => {
                let mut data = Vec::with_capacity(indices.len() * indices.len());
                for &i in indices {
                    for &j in indices {
                        data.push(self.get(i, j));
                    }
                }
                CorrelationMatrix::Dense { dim: indices.len(), data }
            }
        })
    }

    /// Checks symmetry, unit diagonal and entries in `[-1, 1]`.
    pub fn validate(&self) -> Result<()> {
        match self {
            CorrelationMatrix::Homogeneous { c, .. } => {
                if !(-1.0..=1.0).contains(c) {
                    return Err(Error::invalid("corr", format!("off-diagonal {c} outside [-1, 1]")));
                }
            }
            CorrelationMatrix::Dense { dim, data } => {
                for i in 0..*dim {
                    let d = data[i * dim + i];
                    if (d - 1.0).abs() > SYMMETRY_EPS {
                        return Err(Error::invalid("corr", format!("diagonal entry {i} is {d}")));
                    }
                    for j in 0..i {
                        let a = data[i * dim + j];
                        let b = data[j * dim + i];
                        if !a.is_finite() || (a - b).abs() > SYMMETRY_EPS {
                            return Err(Error::invalid(
                                "corr",
                                format!("entries ({i},{j}) and ({j},{i}) differ: {a} vs {b}"),
                            ));
                        }
                        if a.abs() > 1.0 + SYMMETRY_EPS {
                            return Err(Error::invalid(
                                "corr",
                                format!("entry ({i},{j}) = {a} outside [-1, 1]"),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `(1 − ε)·C + ε·I`, the diagonal loading used for near-singular estimates.
    pub fn diagonally_loaded(&self, eps: f64) -> Self {
        match self {
            CorrelationMatrix::Homogeneous { dim, c } => {
                CorrelationMatrix::Homogeneous { dim: *dim, c: (1.0 - eps) * c }
            }
            CorrelationMatrix::Dense { dim, data } => {
                let mut out = data.clone();
                for i in 0..*dim {
                    for j in 0..*dim {
                        if i != j {
                            out[i * dim + j] *= 1.0 - eps;
                        }
                    }
                }
                CorrelationMatrix::Dense { dim: *dim, data: out }
            }
        }
    }

    /// Mean of the strictly upper triangle; zero for `dim < 2`.
    pub fn mean_offdiag(&self) -> f64 {
        let n = self.dim();
        if n < 2 {
            return 0.0;
        }
        match self {
            CorrelationMatrix::Homogeneous { c, .. } => *c,
            CorrelationMatrix::Dense { .. } => {
                let mut sum = 0.0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        sum += self.get(i, j);
                    }
                }
                sum / (n * (n - 1) / 2) as f64
            }
        }
    }
}

/// Lower-triangular factor `L` with `L·Lᵀ = C`.
#[derive(Debug, Clone, PartialEq)]
pub enum CholeskyFactor {
    /// Column `j` is `diag[j]` on the diagonal and `below[j]` in every row under it.
    Homogeneous { diag: Vec<f64>, below: Vec<f64> },
    /// Packed row-major lower triangle: row `i` occupies `i(i+1)/2 .. i(i+1)/2 + i + 1`.
    Dense { dim: usize, packed: Vec<f64> },
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        match self {
            CholeskyFactor::Homogeneous { diag, .. } => diag.len(),
            CholeskyFactor::Dense { dim, .. } => *dim,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            return 0.0;
        }
        match self {
            CholeskyFactor::Homogeneous { diag, below } => {
                if i == j {
                    diag[j]
                } else {
                    below[j]
                }
            }
            CholeskyFactor::Dense { packed, .. } => packed[i * (i + 1) / 2 + j],
        }
    }

    /// `out = L · z`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        match self {
            CholeskyFactor::Homogeneous { diag, below } => {
                let mut prefix = 0.0;
                for i in 0..z.len() {
                    out[i] = prefix + diag[i] * z[i];
                    prefix += below[i] * z[i];
                }
            }
            CholeskyFactor::Dense { dim, packed } => {
                for i in 0..*dim {
                    let row = &packed[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
                    out[i] = row.iter().zip(&z[..=i]).map(|(l, x)| l * x).sum();
                }
            }
        }
    }

    /// Dense copy of `L` (row-major), mostly for tests and diagnostics.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                out[i * n + j] = self.get(i, j);
            }
        }
        out
    }
}

/// Factors a correlation matrix.
///
/// Positive semidefinite matrices with exact zero pivots (such as the all-ones
/// matrix at `c_a = 1`) are accepted; the corresponding factor column is zero.
/// A negative pivot, or a non-zero residual under a zero pivot, fails with
/// [`Error::NotPositiveDefinite`] naming the pivot index.
pub fn cholesky_factor(corr: &CorrelationMatrix) -> Result<CholeskyFactor> {
    corr.validate()?;
    match corr {
        CorrelationMatrix::Homogeneous { dim, c } => homogeneous_factor(*dim, *c),
        CorrelationMatrix::Dense { dim, data } => dense_factor(*dim, data),
    }
}

fn homogeneous_factor(dim: usize, c: f64) -> Result<CholeskyFactor> {
    // Eigenvalues are 1 − c (multiplicity dim − 1) and 1 + (dim − 1)c.
    if dim > 1 && 1.0 + (dim as f64 - 1.0) * c <= 0.0 {
        return Err(Error::NotPositiveDefinite { pivot: dim - 1 });
    }
    let mut diag = Vec::with_capacity(dim);
    let mut below = Vec::with_capacity(dim);
    let mut sum_sq = 0.0;
    for j in 0..dim {
        let pivot = 1.0 - sum_sq;
        let residual = c - sum_sq;
        if pivot > PIVOT_EPS {
            let d = pivot.sqrt();
            diag.push(d);
            below.push(if j + 1 < dim { residual / d } else { 0.0 });
        } else if pivot >= -PIVOT_EPS && (j + 1 == dim || residual.abs() <= RESIDUAL_EPS) {
            diag.push(0.0);
            below.push(0.0);
        } else {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        sum_sq += below[j] * below[j];
    }
    Ok(CholeskyFactor::Homogeneous { diag, below })
}

fn dense_factor(dim: usize, a: &[f64]) -> Result<CholeskyFactor> {
    let mut packed = vec![0.0; dim * (dim + 1) / 2];
    let idx = |i: usize, j: usize| i * (i + 1) / 2 + j;
    for j in 0..dim {
        let mut pivot = a[j * dim + j];
        for k in 0..j {
            pivot -= packed[idx(j, k)] * packed[idx(j, k)];
        }
        if pivot > PIVOT_EPS {
            let d = pivot.sqrt();
            packed[idx(j, j)] = d;
            for i in (j + 1)..dim {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s -= packed[idx(i, k)] * packed[idx(j, k)];
                }
                packed[idx(i, j)] = s / d;
            }
        } else if pivot >= -PIVOT_EPS {
            for i in (j + 1)..dim {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s -= packed[idx(i, k)] * packed[idx(j, k)];
                }
                if s.abs() > RESIDUAL_EPS {
                    return Err(Error::NotPositiveDefinite { pivot: j });
                }
            }
        } else {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
    }
    Ok(CholeskyFactor::Dense { dim, packed })
}

//! Symmetric matrix in packed upper-triangle storage (row-major,
//! diagonal included). Symmetry holds by construction; `symmetrize`
//! is the canonical way in from approximately-symmetric dense data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    dim: usize,
    /// Length `dim * (dim + 1) / 2`; entry (i, j) with i <= j lives at
    /// `i*dim - i*(i-1)/2 + (j-i)`.
    packed: Vec<f64>,
}

impl std::fmt::Debug for SymmetricMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "SymmetricMatrix {}x{}", self.dim, self.dim)?;
        for i in 0..self.dim.min(8) {
            let hi = self.dim.min(8);
            let row: Vec<String> = (0..hi).map(|j| format!("{:.4e}", self.get(i, j))).collect();
            writeln!(f, "  [{}{}]", row.join(", "), if self.dim > 8 { ", ..." } else { "" })?;
        }
        Ok(())
    }
}

#[inline]
fn pack_index(dim: usize, i: usize, j: usize) -> usize {
    // caller guarantees i <= j < dim
    i * dim - (i * i - i) / 2 + (j - i)
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix {
            dim,
            packed: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, alpha: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, alpha);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Fills the upper triangle from `f(i, j)` with i <= j. Errors on a
    /// non-finite value.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite entry at ({i}, {j})"
                    )));
                }
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    /// `(M + Mᵀ) / 2` of a square dense matrix.
    pub fn symmetrize(m: &DenseMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch(format!(
                "cannot symmetrize a {}x{} matrix",
                m.rows(),
                m.cols()
            )));
        }
        Self::from_fn(m.rows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.packed[pack_index(self.dim, a, b)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.packed[pack_index(self.dim, a, b)] = v;
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.get(i, j);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.get(i, j);
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s.sqrt()
    }

    /// Frobenius inner product of two symmetric matrices.
    pub fn frob_dot(&self, other: &SymmetricMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let p = self.get(i, j) * other.get(i, j);
                s += if i == j { p } else { 2.0 * p };
            }
        }
        s
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &SymmetricMatrix) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.packed.iter_mut().zip(&other.packed) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.packed {
            *a *= alpha;
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let base = pack_index(self.dim, i, i);
            out[i] += self.packed[base] * v[i];
            for j in (i + 1)..self.dim {
                let s = self.packed[base + (j - i)];
                out[i] += s * v[j];
                out[j] += s * v[i];
            }
        }
        out
    }

    /// `self * m` for dense `m` with matching row count.
    pub fn mul_dense(&self, m: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.dim, m.rows(), "inner dimensions must agree");
        let mut out = DenseMatrix::zeros(self.dim, m.cols());
        for i in 0..self.dim {
            let base = pack_index(self.dim, i, i);
            let s_ii = self.packed[base];
            let m_i = m.row(i).to_vec();
            {
                let o_i = out.row_mut(i);
                for (c, &v) in m_i.iter().enumerate() {
                    o_i[c] += s_ii * v;
                }
            }
            for j in (i + 1)..self.dim {
                let s = self.packed[base + (j - i)];
                if s == 0.0 {
                    continue;
                }
                let m_j_row: Vec<f64> = m.row(j).to_vec();
                {
                    let o_i = out.row_mut(i);
                    for (c, &v) in m_j_row.iter().enumerate() {
                        o_i[c] += s * v;
                    }
                }
                let o_j = out.row_mut(j);
                for (c, &v) in m_i.iter().enumerate() {
                    o_j[c] += s * v;
                }
            }
        }
        out
    }

    /// `m * self` for dense `m` with matching column count.
    pub fn right_mul_dense(&self, m: &DenseMatrix) -> DenseMatrix {
        assert_eq!(m.cols(), self.dim, "inner dimensions must agree");
        let mut out = DenseMatrix::zeros(m.rows(), self.dim);
        for r in 0..m.rows() {
            let v = self.matvec(m.row(r));
            out.row_mut(r).copy_from_slice(&v);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.packed.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.packed.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Upper bound on the largest eigenvalue from Gershgorin discs.
    pub fn gershgorin_upper(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        (0..self.dim)
            .map(|i| {
                let radius: f64 = (0..self.dim)
                    .filter(|&j| j != i)
                    .map(|j| self.get(i, j).abs())
                    .sum();
                self.get(i, i) + radius
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

//! Pointwise algebra of d×d tensors with d ∈ {2, 3}.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{QshError, Result};
use crate::params::Coefficients;

/// Dense d×d matrix stored in a fixed 3×3 block; entries outside the leading
/// d×d block stay zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    pub dim: usize,
    pub e: [[f64; 3]; 3],
}

impl Mat {
    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim == 2 || dim == 3);
        Mat {
            dim,
            e: [[0.0; 3]; 3],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Mat::zeros(dim);
        for i in 0..dim {
            m.e[i][i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Mat::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.e[i][i] = *v;
        }
        m
    }

    /// Builds from row slices; panics if the rows are not square of size 2 or 3.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        assert!(dim == 2 || dim == 3, "matrix dimension must be 2 or 3");
        let mut m = Mat::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim);
            m.e[i][..dim].copy_from_slice(row);
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.e[i][j]
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        let mut t = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.e[i][j] = self.e[j][i];
            }
        }
        t
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.e[i][i]).sum()
    }

    #[inline]
    pub fn matmul(&self, other: &Mat) -> Mat {
        let d = self.dim;
        let mut out = Mat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += self.e[i][k] * other.e[k][j];
                }
                out.e[i][j] = s;
            }
        }
        out
    }

    /// Frobenius norm squared, Σ Mᵢⱼ².
    #[inline]
    pub fn norm_sq(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.e[i][j] * self.e[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut out = *self;
        for row in out.e.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        out
    }

    pub fn is_symmetric_traceless(&self, tol: f64) -> bool {
        let scale = 1.0 + self.norm();
        (*self - self.transpose()).norm() <= tol * scale && self.trace().abs() <= tol * scale
    }
}

impl Add for Mat {
    type Output = Mat;
    fn add(mut self, rhs: Mat) -> Mat {
        self += rhs;
        self
    }
}

impl AddAssign for Mat {
    fn add_assign(&mut self, rhs: Mat) {
        for i in 0..3 {
            for j in 0..3 {
                self.e[i][j] += rhs.e[i][j];
            }
        }
    }
}

impl Sub for Mat {
    type Output = Mat;
    fn sub(mut self, rhs: Mat) -> Mat {
        for i in 0..3 {
            for j in 0..3 {
                self.e[i][j] -= rhs.e[i][j];
            }
        }
        self
    }
}

impl Neg for Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Mat {
    type Output = Mat;
    fn mul(self, s: f64) -> Mat {
        self.scale(s)
    }
}

/// A symmetric traceless matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QTensor(Mat);

impl QTensor {
    pub const TOLERANCE: f64 = 1e-12;

    /// Accepts `m` only if it is symmetric and traceless to [`Self::TOLERANCE`].
    pub fn new(m: Mat) -> Result<Self> {
        if m.is_symmetric_traceless(Self::TOLERANCE) {
            Ok(QTensor(m))
        } else {
            Err(QshError::InvalidArgument(
                "matrix is not symmetric traceless".into(),
            ))
        }
    }

    pub fn zeros(dim: usize) -> Self {
        QTensor(Mat::zeros(dim))
    }

    pub fn mat(&self) -> &Mat {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

impl From<QTensor> for Mat {
    fn from(q: QTensor) -> Mat {
        q.0
    }
}

/// `(M + Mᵀ)/2 − tr(M)/d · I`.
pub fn project_symmetric_traceless(m: &Mat) -> QTensor {
    QTensor(sym_traceless(m))
}

#[inline]
pub(crate) fn sym_traceless(m: &Mat) -> Mat {
    let d = m.dim;
    let mean = m.trace() / d as f64;
    let mut out = Mat::zeros(d);
    for i in 0..d {
        for j in 0..d {
            out.e[i][j] = 0.5 * (m.e[i][j] + m.e[j][i]);
        }
        out.e[i][i] -= mean;
    }
    out
}

/// `AB − BA`.
#[inline]
pub fn commutator(a: &Mat, b: &Mat) -> Mat {
    a.matmul(b) - b.matmul(a)
}

/// `tr(AB) = Σᵢⱼ AᵢⱼBⱼᵢ`.
#[inline]
pub fn double_contract(a: &Mat, b: &Mat) -> f64 {
    let d = a.dim;
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += a.e[i][j] * b.e[j][i];
        }
    }
    s
}

/// Landau-de Gennes bulk energy density `a/2 tr Q² − b/3 tr Q³ + c/4 (tr Q²)²`.
///
/// The cubic invariant of a traceless 2×2 matrix is zero, so for d = 2 the
/// `b` term is dropped outright rather than summed from rounding noise.
pub fn bulk_potential(q: &QTensor, coeffs: &Coefficients) -> f64 {
    bulk_density(q.mat(), coeffs)
}

#[inline]
pub(crate) fn bulk_density(q: &Mat, coeffs: &Coefficients) -> f64 {
    let q2 = q.matmul(q);
    let tr2 = q2.trace();
    let mut psi = 0.5 * coeffs.a * tr2 + 0.25 * coeffs.c * tr2 * tr2;
    if q.dim == 3 {
        psi -= coeffs.b / 3.0 * double_contract(&q2, q);
    }
    psi
}

/// `−aQ + b(Q² − |Q|²/d I) − c|Q|²Q`, the bulk part of the molecular field.
pub fn reaction_term(q: &QTensor, coeffs: &Coefficients) -> QTensor {
    QTensor(reaction(q.mat(), coeffs))
}

#[inline]
pub(crate) fn reaction(q: &Mat, coeffs: &Coefficients) -> Mat {
    let d = q.dim;
    let n2 = q.norm_sq();
    let mut out = q.scale(-coeffs.a - coeffs.c * n2);
    if d == 3 && coeffs.b != 0.0 {
        let mut q2 = q.matmul(q);
        for i in 0..d {
            q2.e[i][i] -= n2 / d as f64;
        }
        out += q2.scale(coeffs.b);
    }
    out
}

/// `x xᵀ/|x|² − I/d`.
pub fn hedgehog(x: &[f64]) -> Result<QTensor> {
    let d = x.len();
    if d != 2 && d != 3 {
        return Err(QshError::InvalidArgument(format!(
            "hedgehog needs a 2- or 3-vector, got length {d}"
        )));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if !(r2 > 0.0) {
        return Err(QshError::InvalidArgument(
            "hedgehog is undefined at the origin".into(),
        ));
    }
    let mut m = Mat::zeros(d);
    for i in 0..d {
        for j in 0..d {
            m.e[i][j] = x[i] * x[j] / r2;
        }
        m.e[i][i] -= 1.0 / d as f64;
    }
    Ok(QTensor(m))
}

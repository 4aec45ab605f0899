//! Periodic pseudo-spectral grids, fields and differential operators.
//!
//! Physical arrays are row-major with the last axis fastest; axis 0 is the
//! first coordinate `x₁`. Spectral arrays use the half-spectrum layout of a
//! real transform (`n/2 + 1` entries along the last axis) and hold Fourier
//! coefficients normalised so that `f(x) = Σ f̂ₖ e^{ik·x}`.

mod fft;
mod ops;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{QshError, Result};

pub use ops::{
    dealias, divergence, gradient, inner_product_l2, laplacian, leray_project, mollify,
    mollify_radius, sobolev_norm,
};
pub(crate) use ops::{leray_in_place, spectral_gradient, spectral_sobolev_sq};

/// Tensor rank of a field. Matrix components are stored row-major (`i*d + j`);
/// rank-3 components (`∂ₖMᵢⱼ`) at `(i*d + j)*d + k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rank {
    Scalar,
    Vector,
    Matrix,
    Rank3,
}

impl Rank {
    pub fn components(self, dim: usize) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => dim,
            Rank::Matrix => dim * dim,
            Rank::Rank3 => dim * dim * dim,
        }
    }

    pub fn raised(self) -> Option<Rank> {
        match self {
            Rank::Scalar => Some(Rank::Vector),
            Rank::Vector => Some(Rank::Matrix),
            Rank::Matrix => Some(Rank::Rank3),
            Rank::Rank3 => None,
        }
    }

    pub fn lowered(self) -> Option<Rank> {
        match self {
            Rank::Scalar => None,
            Rank::Vector => Some(Rank::Scalar),
            Rank::Matrix => Some(Rank::Vector),
            Rank::Rank3 => Some(Rank::Matrix),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Rank::Scalar => 0,
            Rank::Vector => 1,
            Rank::Matrix => 2,
            Rank::Rank3 => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Rank> {
        match tag {
            0 => Some(Rank::Scalar),
            1 => Some(Rank::Vector),
            2 => Some(Rank::Matrix),
            3 => Some(Rank::Rank3),
            _ => None,
        }
    }
}

/// Uniform periodic grid on `[0, domain_length)^dim` with cached FFT plans and
/// wavenumber tables.
#[derive(Debug)]
pub struct Grid {
    dim: usize,
    n: usize,
    domain_length: f64,
    plans: fft::Plans,
    /// Per axis, per spectral point: wavenumber used by first derivatives
    /// (zero on the Nyquist plane).
    kd: Vec<Vec<f64>>,
    /// Per spectral point: |k|² with the true Nyquist wavenumber.
    k2: Vec<f64>,
    /// Per spectral point: largest |integer mode| over the axes.
    kmax_int: Vec<usize>,
    /// Per spectral point: multiplicity in the half spectrum (1 or 2).
    weight: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, n: usize, domain_length: f64) -> Result<Arc<Grid>> {
        if dim != 2 && dim != 3 {
            return Err(QshError::InvalidArgument(format!(
                "grid dimension must be 2 or 3, got {dim}"
            )));
        }
        if n < 8 || n % 2 != 0 {
            return Err(QshError::InvalidArgument(format!(
                "grid size must be even and at least 8, got {n}"
            )));
        }
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(QshError::InvalidArgument(format!(
                "domain length must be positive, got {domain_length}"
            )));
        }
        let nh = n / 2 + 1;
        let shape = fft::spectral_shape(dim, n);
        let len: usize = shape.iter().product();
        let scale = 2.0 * PI / domain_length;
        let mut kd = vec![vec![0.0; len]; dim];
        let mut k2 = vec![0.0; len];
        let mut kmax_int = vec![0usize; len];
        let mut weight = vec![0.0; len];
        let signed = |i: usize| -> i64 {
            if i <= n / 2 {
                i as i64
            } else {
                i as i64 - n as i64
            }
        };
        for s in 0..len {
            let mut rem = s;
            let mut sq = 0.0;
            let mut kmax = 0usize;
            for axis in (0..dim).rev() {
                let idx = rem % shape[axis];
                rem /= shape[axis];
                let m = signed(idx);
                let k = scale * m as f64;
                sq += k * k;
                kmax = kmax.max(m.unsigned_abs() as usize);
                kd[axis][s] = if m.unsigned_abs() as usize == n / 2 { 0.0 } else { k };
                if axis == dim - 1 {
                    weight[s] = if idx == 0 || idx == nh - 1 { 1.0 } else { 2.0 };
                }
            }
            k2[s] = sq;
            kmax_int[s] = kmax;
        }
        Ok(Arc::new(Grid {
            dim,
            n,
            domain_length,
            plans: fft::Plans::new(n),
            kd,
            k2,
            kmax_int,
            weight,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn spacing(&self) -> f64 {
        self.domain_length / self.n as f64
    }

    pub fn volume(&self) -> f64 {
        self.domain_length.powi(self.dim as i32)
    }

    /// Number of physical grid points.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of stored spectral coefficients per component.
    pub fn spectral_len(&self) -> usize {
        self.k2.len()
    }

    /// Coordinates of physical point `p`.
    pub fn point(&self, p: usize) -> [f64; 3] {
        let h = self.spacing();
        let mut x = [0.0; 3];
        let mut rem = p;
        for axis in (0..self.dim).rev() {
            x[axis] = (rem % self.n) as f64 * h;
            rem /= self.n;
        }
        x
    }

    /// Derivative wavenumber along `axis` for every spectral point.
    pub fn kd(&self, axis: usize) -> &[f64] {
        &self.kd[axis]
    }

    /// `|k|²` for every spectral point.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Half-spectrum multiplicity (1 or 2) for Parseval sums.
    pub fn parseval_weight(&self) -> &[f64] {
        &self.weight
    }

    /// Largest integer mode number over the axes for every spectral point.
    pub fn max_mode(&self) -> &[usize] {
        &self.kmax_int
    }

    /// Mask of modes kept by the 2/3 rule: every `|mᵢ| ≤ n/3`.
    pub fn dealias_mask(&self) -> Vec<bool> {
        self.kmax_int.iter().map(|&m| 3 * m <= self.n).collect()
    }

    /// Mask of modes with `|k| ≤ radius` (physical wavenumber).
    pub fn radius_mask(&self, radius: f64) -> Vec<bool> {
        let r2 = radius * radius;
        self.k2.iter().map(|&k| k <= r2 * (1.0 + 1e-12)).collect()
    }

    pub fn forward(&self, phys: &[f64], out: &mut [Complex64]) {
        debug_assert_eq!(phys.len(), self.len());
        debug_assert_eq!(out.len(), self.spectral_len());
        fft::forward(&self.plans, self.dim, self.n, phys, out);
    }

    /// Inverse transform. `spec` is clobbered.
    pub fn inverse_into(&self, spec: &mut [Complex64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        fft::inverse_in_place(&self.plans, self.dim, self.n, spec, out);
    }

    pub fn inverse(&self, spec: &[Complex64], out: &mut [f64]) {
        let mut work = spec.to_vec();
        self.inverse_into(&mut work, out);
    }
}

/// Field sampled at the physical grid points.
#[derive(Clone, Debug)]
pub struct Field {
    pub grid: Arc<Grid>,
    pub rank: Rank,
    pub comps: Vec<Vec<f64>>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>, rank: Rank) -> Self {
        let comps = vec![vec![0.0; grid.len()]; rank.components(grid.dim())];
        Field {
            grid: grid.clone(),
            rank,
            comps,
        }
    }

    /// Samples `f(x, component)` at every grid point.
    pub fn from_fn(grid: &Arc<Grid>, rank: Rank, f: impl Fn(&[f64], usize) -> f64) -> Self {
        let mut out = Field::zeros(grid, rank);
        let d = grid.dim();
        for p in 0..grid.len() {
            let x = grid.point(p);
            for (c, comp) in out.comps.iter_mut().enumerate() {
                comp[p] = f(&x[..d], c);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn to_spectral(&self) -> SpectralField {
        let mut out = SpectralField::zeros(&self.grid, self.rank);
        for (src, dst) in self.comps.iter().zip(out.comps.iter_mut()) {
            self.grid.forward(src, dst);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }

    /// Largest absolute pointwise difference; `None` on shape mismatch.
    pub fn max_diff(&self, other: &Field) -> Option<f64> {
        if !self.same_shape(other) {
            return None;
        }
        Some(
            self.comps
                .iter()
                .flatten()
                .zip(other.comps.iter().flatten())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
        )
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.rank == other.rank
            && self.grid.dim() == other.grid.dim()
            && self.grid.n() == other.grid.n()
            && self.grid.domain_length() == other.grid.domain_length()
    }

    pub fn scaled(&self, s: f64) -> Field {
        let mut out = self.clone();
        out.comps.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
        out
    }

    /// Matrix value at point `p` (matrix fields only).
    pub fn mat_at(&self, p: usize) -> crate::tensor::Mat {
        debug_assert_eq!(self.rank, Rank::Matrix);
        let d = self.dim();
        let mut m = crate::tensor::Mat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.e[i][j] = self.comps[i * d + j][p];
            }
        }
        m
    }

    pub fn set_mat(&mut self, p: usize, m: &crate::tensor::Mat) {
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                self.comps[i * d + j][p] = m.e[i][j];
            }
        }
    }
}

/// Spectral coefficients of a field, half-spectrum layout.
#[derive(Clone, Debug)]
pub struct SpectralField {
    pub grid: Arc<Grid>,
    pub rank: Rank,
    pub comps: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid>, rank: Rank) -> Self {
        let comps =
            vec![vec![Complex64::new(0.0, 0.0); grid.spectral_len()]; rank.components(grid.dim())];
        SpectralField {
            grid: grid.clone(),
            rank,
            comps,
        }
    }

    pub fn to_physical(&self) -> Field {
        let mut out = Field::zeros(&self.grid, self.rank);
        for (src, dst) in self.comps.iter().zip(out.comps.iter_mut()) {
            self.grid.inverse(src, dst);
        }
        out
    }

    /// `∫|f|²` over the torus by Parseval.
    pub fn energy(&self) -> f64 {
        let w = self.grid.parseval_weight();
        let mut s = 0.0;
        for comp in &self.comps {
            for (c, wk) in comp.iter().zip(w) {
                s += wk * c.norm_sqr();
            }
        }
        s * self.grid.volume()
    }

    pub fn apply_mask(&mut self, mask: &[bool]) {
        for comp in self.comps.iter_mut() {
            for (c, &keep) in comp.iter_mut().zip(mask) {
                if !keep {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
}

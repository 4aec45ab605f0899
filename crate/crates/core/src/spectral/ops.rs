use num_complex::Complex64;

use super::{Field, Rank, SpectralField};
use crate::error::{QshError, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Spectral gradient. Scalar → vector, vector `v` → matrix `Gᵢⱼ = ∂ⱼvᵢ`,
/// matrix `M` → rank 3 with `∂ₖMᵢⱼ` at `(i*d + j)*d + k`.
pub fn gradient(f: &Field) -> Field {
    let rank = f.rank.raised().expect("gradient of a rank-3 field");
    spectral_gradient(&f.to_spectral(), rank).to_physical()
}

pub(crate) fn spectral_gradient(f: &SpectralField, rank: Rank) -> SpectralField {
    let grid = &f.grid;
    let d = grid.dim();
    let mut out = SpectralField::zeros(grid, rank);
    for (c, comp) in f.comps.iter().enumerate() {
        for k in 0..d {
            let kd = grid.kd(k);
            let dst = &mut out.comps[c * d + k];
            for s in 0..comp.len() {
                dst[s] = I * kd[s] * comp[s];
            }
        }
    }
    out
}

/// Divergence along the last index: vector → scalar `∂ᵢvᵢ`, matrix → vector
/// `∂ⱼMᵢⱼ` (row-wise).
pub fn divergence(f: &Field) -> Field {
    let rank = f.rank.lowered().expect("divergence of a scalar field");
    let spec = f.to_spectral();
    let grid = &f.grid;
    let d = grid.dim();
    let mut out = SpectralField::zeros(grid, rank);
    for (r, dst) in out.comps.iter_mut().enumerate() {
        for j in 0..d {
            let kd = grid.kd(j);
            let src = &spec.comps[r * d + j];
            for s in 0..dst.len() {
                dst[s] += I * kd[s] * src[s];
            }
        }
    }
    out.to_physical()
}

/// `Δf`, componentwise.
pub fn laplacian(f: &Field) -> Field {
    let mut spec = f.to_spectral();
    let k2 = f.grid.k2();
    for comp in spec.comps.iter_mut() {
        for (c, k) in comp.iter_mut().zip(k2) {
            *c *= -k;
        }
    }
    spec.to_physical()
}

/// Removes the gradient part of each nonzero mode, `v̂ − k(k·v̂)/|k|²`.
pub fn leray_project(v: &Field) -> Field {
    assert_eq!(v.rank, Rank::Vector, "Leray projection needs a vector field");
    let mut spec = v.to_spectral();
    leray_in_place(&mut spec.comps, &spec.grid);
    spec.to_physical()
}

pub(crate) fn leray_in_place(comps: &mut [Vec<Complex64>], grid: &super::Grid) {
    let d = grid.dim();
    let len = grid.spectral_len();
    for s in 0..len {
        let mut kk = 0.0;
        let mut kv = Complex64::new(0.0, 0.0);
        for a in 0..d {
            let k = grid.kd(a)[s];
            kk += k * k;
            kv += comps[a][s] * k;
        }
        if kk > 0.0 {
            let f = kv / kk;
            for a in 0..d {
                comps[a][s] -= f * grid.kd(a)[s];
            }
        }
    }
}

/// Friedrichs cutoff: drops every mode with `|k| > 2^n_cut`; the mean is kept.
pub fn mollify(f: &Field, n_cut: u32) -> Field {
    mollify_radius(f, 2f64.powi(n_cut as i32))
}

/// Sharp spectral cutoff at an arbitrary radius `|k| ≤ radius`.
pub fn mollify_radius(f: &Field, radius: f64) -> Field {
    let mut spec = f.to_spectral();
    spec.apply_mask(&f.grid.radius_mask(radius));
    spec.to_physical()
}

/// 2/3-rule truncation: drops modes with any `|mᵢ| > n/3`.
pub fn dealias(f: &Field) -> Field {
    let mut spec = f.to_spectral();
    spec.apply_mask(&f.grid.dealias_mask());
    spec.to_physical()
}

/// `(Σₖ (1 + |k|^{2s}) |f̂ₖ|² · volume)^{1/2}`, summed over components. At
/// `s = 0` the weight is 1 so the result is the plain L² norm.
pub fn sobolev_norm(f: &Field, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(QshError::InvalidArgument(format!(
            "Sobolev index must be non-negative, got {s}"
        )));
    }
    Ok(spectral_sobolev_sq(&f.to_spectral(), s).sqrt())
}

pub(crate) fn spectral_sobolev_sq(f: &SpectralField, s: f64) -> f64 {
    let grid = &f.grid;
    let w = grid.parseval_weight();
    let k2 = grid.k2();
    let mut total = 0.0;
    for comp in &f.comps {
        for i in 0..comp.len() {
            let mult = if s == 0.0 { 1.0 } else { 1.0 + k2[i].powf(s) };
            total += w[i] * mult * comp[i].norm_sqr();
        }
    }
    total * grid.volume()
}

/// `∫ f:g` by the uniform torus quadrature, summed over components.
pub fn inner_product_l2(f: &Field, g: &Field) -> Result<f64> {
    if !f.same_shape(g) {
        return Err(QshError::ShapeMismatch(format!(
            "inner product of {:?} on n={} with {:?} on n={}",
            f.rank,
            f.grid.n(),
            g.rank,
            g.grid.n()
        )));
    }
    let cell = f.grid.spacing().powi(f.dim() as i32);
    let mut s = 0.0;
    for (a, b) in f.comps.iter().zip(&g.comps) {
        for (x, y) in a.iter().zip(b) {
            s += x * y;
        }
    }
    Ok(s * cell)
}

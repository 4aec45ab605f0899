//! Radial reduction of the velocity-free system under the melting-hedgehog
//! ansatz `Q(x) = f(|x|) H̄(x)`, the lift back to tensor fields, and the
//! comparison against the full spectral solver.
//!
//! The profile obeys
//! `J f_tt + μ₁ f_t = L(f_rr + (d−1)/r f_r − 2d/r² f) − a f + b(d−2)/d f² − c(d−1)/d f³`
//! on `[0, R]` with `f(0) = f_r(0) = 0` and `f(R) = 0`.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::diagnostics::twist_constraint_residual;
use crate::dynamics::{Engine, Integrator, Mode, SimState, SpectralState};
use crate::error::{QshError, Result};
use crate::params::Coefficients;
use crate::spectral::{Field, Grid, Rank};

/// Cell-centred grid `r_j = (j + ½)h`, `h = R/m`, with no node at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    radius: f64,
    cells: usize,
    dim: usize,
}

impl RadialGrid {
    pub fn new(radius: f64, cells: usize, dim: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(QshError::InvalidArgument(format!(
                "radial domain needs R > 0, got {radius}"
            )));
        }
        if cells < 16 {
            return Err(QshError::InvalidArgument(format!(
                "radial grid needs at least 16 cells, got {cells}"
            )));
        }
        if dim != 2 && dim != 3 {
            return Err(QshError::InvalidArgument(format!(
                "radial reduction needs d = 2 or 3, got {dim}"
            )));
        }
        Ok(RadialGrid { radius, cells, dim })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.radius / self.cells as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.spacing()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|j| self.center(j)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialState {
    pub t: f64,
    pub f: Vec<f64>,
    pub ft: Vec<f64>,
}

impl RadialState {
    pub fn zeros(grid: &RadialGrid) -> Self {
        RadialState {
            t: 0.0,
            f: vec![0.0; grid.cells()],
            ft: vec![0.0; grid.cells()],
        }
    }

    /// Samples `f₀` and `f₁` at the cell centres.
    pub fn from_fn(grid: &RadialGrid, f0: impl Fn(f64) -> f64, f1: impl Fn(f64) -> f64) -> Self {
        let r = grid.centers();
        RadialState {
            t: 0.0,
            f: r.iter().map(|&x| f0(x)).collect(),
            ft: r.iter().map(|&x| f1(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.f.iter().chain(&self.ft).all(|v| v.is_finite())
    }
}

/// Cubic extrapolation to `R + h/2` through `u(R) = 0` and the last three cells.
#[inline]
fn outer_ghost_u(u: &[f64]) -> f64 {
    let m = u.len();
    -3.0 * u[m - 1] + u[m - 2] - 0.2 * u[m - 3]
}

/// Value of `f` at the cell beyond `R`, consistent with [`radial_laplacian`].
fn outer_ghost(grid: &RadialGrid, f: &[f64]) -> f64 {
    let m = grid.cells();
    let u: Vec<f64> = (m - 3..m).map(|j| f[j] / grid.center(j).powi(2)).collect();
    outer_ghost_u(&u) * grid.center(m).powi(2)
}

/// `f_rr + (d−1)/r f_r − 2d/r² f` by centred differences.
///
/// With `f = r²u` the operator becomes `r²(u_rr + (d+3)/r u_r)`, the radial
/// Laplacian of `u` in `d + 4` dimensions. `u` is differenced instead of `f`,
/// reflected evenly about the origin (`f(0) = f_r(0) = 0` for any smooth `u`)
/// and extrapolated to zero at `R`. This keeps the truncation error a smooth
/// function of `r`, so the extrapolated origin values stay accurate.
pub fn radial_laplacian(grid: &RadialGrid, f: &[f64]) -> Vec<f64> {
    let m = grid.cells();
    let h = grid.spacing();
    let d = grid.dim() as f64;
    let u: Vec<f64> = (0..m).map(|j| f[j] / grid.center(j).powi(2)).collect();
    let hi = outer_ghost_u(&u);
    (0..m)
        .map(|j| {
            let r = grid.center(j);
            let left = if j == 0 { u[0] } else { u[j - 1] };
            let right = if j + 1 == m { hi } else { u[j + 1] };
            let lap = (right - 2.0 * u[j] + left) / (h * h) + (d + 3.0) / r * (right - left) / (2.0 * h);
            r * r * lap
        })
        .collect()
}

/// Gershgorin bound on the spectral radius of [`radial_laplacian`], taken on
/// the `u` form (a similarity transform of the same matrix).
fn operator_bound(grid: &RadialGrid) -> f64 {
    let m = grid.cells();
    let h = grid.spacing();
    let d = grid.dim() as f64;
    let mut bound = 0.0f64;
    for j in 0..m {
        let r = grid.center(j);
        let adv = (d + 3.0) / r / (2.0 * h);
        let (mut left, mut centre, mut right) = (1.0 / (h * h) - adv, -2.0 / (h * h), 1.0 / (h * h) + adv);
        let mut extra = 0.0;
        if j == 0 {
            centre += left;
            left = 0.0;
        }
        if j + 1 == m {
            centre += -3.0 * right;
            extra = 0.2 * right.abs();
            left += right;
            right = 0.0;
        }
        bound = bound.max(left.abs() + centre.abs() + right.abs() + extra);
    }
    bound
}

/// `(f_t, f_tt)` of the radial system.
pub fn radial_rhs(state: &RadialState, coeffs: &Coefficients, grid: &RadialGrid) -> (Vec<f64>, Vec<f64>) {
    let d = grid.dim() as f64;
    let lap = radial_laplacian(grid, &state.f);
    let quad = coeffs.b * (d - 2.0) / d;
    let cubic = coeffs.c * (d - 1.0) / d;
    let inv_j = 1.0 / coeffs.inertia;
    let ftt = state
        .f
        .iter()
        .zip(&state.ft)
        .zip(&lap)
        .map(|((&f, &ft), &l)| {
            let mut force = -coeffs.mu1 * ft + coeffs.elastic * l - coeffs.a * f - cubic * f * f * f;
            if grid.dim() != 2 {
                force += quad * f * f;
            }
            force * inv_j
        })
        .collect();
    (state.ft.clone(), ftt)
}

/// Classical RK4 step of the radial system.
pub fn radial_step(
    state: &RadialState,
    coeffs: &Coefficients,
    grid: &RadialGrid,
    dt: f64,
) -> Result<RadialState> {
    if !(coeffs.inertia > 0.0) {
        return Err(QshError::InvalidArgument("inertia J must be positive".into()));
    }
    let shifted = |k: &(Vec<f64>, Vec<f64>), s: f64| RadialState {
        t: state.t,
        f: state.f.iter().zip(&k.0).map(|(a, b)| a + s * b).collect(),
        ft: state.ft.iter().zip(&k.1).map(|(a, b)| a + s * b).collect(),
    };
    let k1 = radial_rhs(state, coeffs, grid);
    let k2 = radial_rhs(&shifted(&k1, 0.5 * dt), coeffs, grid);
    let k3 = radial_rhs(&shifted(&k2, 0.5 * dt), coeffs, grid);
    let k4 = radial_rhs(&shifted(&k3, dt), coeffs, grid);
    let combine = |u: &[f64], a: &[f64], b: &[f64], c: &[f64], e: &[f64]| -> Vec<f64> {
        (0..u.len())
            .map(|i| u[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + e[i]))
            .collect()
    };
    let next = RadialState {
        t: state.t + dt,
        f: combine(&state.f, &k1.0, &k2.0, &k3.0, &k4.0),
        ft: combine(&state.ft, &k1.1, &k2.1, &k3.1, &k4.1),
    };
    if !next.is_finite() {
        return Err(QshError::NonFinite { t: next.t });
    }
    Ok(next)
}

/// Stable RK4 step: `safety · min(1/ω, J/μ₁, J/(|a| + |b|max|f| + c max|f|²))`
/// where `ω² = L·G/J` and `G` bounds the discrete operator by Gershgorin.
pub fn radial_cfl_dt(state: &RadialState, coeffs: &Coefficients, grid: &RadialGrid, safety: f64) -> f64 {
    let omega = (coeffs.elastic * operator_bound(grid) / coeffs.inertia).sqrt();
    let fmax = state.f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let damping = coeffs.mu1 / coeffs.inertia;
    let rate = (coeffs.a.abs() + coeffs.b.abs() * fmax + coeffs.c.abs() * fmax * fmax) / coeffs.inertia;
    let inv = |x: f64| if x > 0.0 { 1.0 / x } else { f64::INFINITY };
    safety * inv(omega).min(inv(damping)).min(inv(rate))
}

/// Measure used by [`radial_energy`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RadialWeight {
    /// `r² dr` in every dimension.
    Squared,
    /// `r^{d−1} dr`, the measure of the radial reduction in d dimensions.
    Natural,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadialEnergy {
    /// `∫{J/2 f_t² + L/2 f_r² + h_B(f) + L d f²/r²} w(r) dr`
    pub energy: f64,
    /// `μ₁ ∫f_t² w(r) dr`
    pub dissipation: f64,
}

/// `h_B(f) = a/2 f² − b(d−2)/(3d) f³ + c(d−1)/(4d) f⁴`.
pub fn reduced_potential(f: f64, coeffs: &Coefficients, dim: usize) -> f64 {
    let d = dim as f64;
    let mut h = 0.5 * coeffs.a * f * f + coeffs.c * (d - 1.0) / (4.0 * d) * f.powi(4);
    if dim != 2 {
        h -= coeffs.b * (d - 2.0) / (3.0 * d) * f.powi(3);
    }
    h
}

/// Radial energy and dissipation rate; cell values use midpoint quadrature and
/// `f_r` is differenced onto the cell faces.
pub fn radial_energy(
    state: &RadialState,
    coeffs: &Coefficients,
    grid: &RadialGrid,
    weight: RadialWeight,
) -> RadialEnergy {
    let m = grid.cells();
    let h = grid.spacing();
    let d = grid.dim();
    let power = match weight {
        RadialWeight::Squared => 2,
        RadialWeight::Natural => d as i32 - 1,
    };
    let w = |r: f64| r.powi(power);
    let (mut energy, mut diss) = (0.0, 0.0);
    for j in 0..m {
        let r = grid.center(j);
        let (f, ft) = (state.f[j], state.ft[j]);
        energy += (0.5 * coeffs.inertia * ft * ft
            + reduced_potential(f, coeffs, d)
            + coeffs.elastic * d as f64 * f * f / (r * r))
            * w(r);
        diss += ft * ft * w(r);
        let right = if j + 1 == m { outer_ghost(grid, &state.f) } else { state.f[j + 1] };
        let fr = (right - f) / h;
        energy += 0.5 * coeffs.elastic * fr * fr * w((j + 1) as f64 * h);
    }
    RadialEnergy {
        energy: energy * h,
        dissipation: coeffs.mu1 * diss * h,
    }
}

/// Extrapolated values at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OriginValues {
    pub f: f64,
    pub f_r: f64,
    pub ft_r: f64,
    /// `10 h²`
    pub tolerance: f64,
    pub ok: bool,
}

/// Quadratic extrapolation of `f`, `f_r` and `f_tr` to `r = 0` from the first
/// three cells; each is compared with `10h²` times the matching max-norm.
pub fn origin_values(state: &RadialState, grid: &RadialGrid) -> OriginValues {
    let h = grid.spacing();
    let value = |u: &[f64]| (15.0 * u[0] - 10.0 * u[1] + 3.0 * u[2]) / 8.0;
    let slope = |u: &[f64]| (-2.0 * u[0] + 3.0 * u[1] - u[2]) / h;
    let max = |u: &[f64]| u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_slope = |u: &[f64]| {
        let mut m = 0.0f64;
        for pair in u.windows(2) {
            m = m.max(((pair[1] - pair[0]) / h).abs());
        }
        m
    };
    let tolerance = 10.0 * h * h;
    let f = value(&state.f);
    let f_r = slope(&state.f);
    let ft_r = slope(&state.ft);
    let ok = f.abs() <= tolerance * max(&state.f)
        && f_r.abs() <= tolerance * max_slope(&state.f)
        && ft_r.abs() <= tolerance * max_slope(&state.ft);
    OriginValues {
        f,
        f_r,
        ft_r,
        tolerance,
        ok,
    }
}

/// Natural cubic spline through increasing knots.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(QshError::InvalidArgument(
                "spline needs at least three matching knots".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(QshError::InvalidArgument("spline knots must increase".into()));
        }
        // tridiagonal system for interior second derivatives (Thomas algorithm)
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let lower = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            upper[i] = h1 / 6.0;
            rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            if i > 1 {
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
        }
        let mut m = vec![0.0; n];
        for i in (1..n - 1).rev() {
            m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
        }
        Ok(CubicSpline { x, y, m })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Spline through the even extension of a cell-centred profile plus `f(R) = 0`.
pub fn profile_spline(grid: &RadialGrid, values: &[f64]) -> Result<CubicSpline> {
    let m = grid.cells();
    if values.len() != m {
        return Err(QshError::ShapeMismatch(format!(
            "profile has {} values for {m} cells",
            values.len()
        )));
    }
    let r = grid.centers();
    let mut x = Vec::with_capacity(2 * m + 2);
    let mut y = Vec::with_capacity(2 * m + 2);
    x.push(-grid.radius());
    y.push(0.0);
    for j in (0..m).rev() {
        x.push(-r[j]);
        y.push(values[j]);
    }
    for j in 0..m {
        x.push(r[j]);
        y.push(values[j]);
    }
    x.push(grid.radius());
    y.push(0.0);
    CubicSpline::new(x, y)
}

/// Periodic displacement `x − c` with each component in `[−L/2, L/2)`.
fn displacement(x: &[f64], center: &[f64], length: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for a in 0..x.len() {
        let mut dx = x[a] - center[a];
        dx -= length * (dx / length + 0.5).floor();
        out[a] = dx;
    }
    out
}

/// Lifts cell-centred profiles `f`, `f_t` to `(Q, W) = (f, f_t)(|x−c|) H̄(x−c)`.
pub fn lift_profile(
    radial: &RadialGrid,
    f: &[f64],
    ft: &[f64],
    grid: &Arc<Grid>,
    center: &[f64],
) -> Result<(Field, Field)> {
    let d = grid.dim();
    if radial.dim() != d || center.len() != d {
        return Err(QshError::ShapeMismatch(format!(
            "radial grid is {}-dimensional, tensor grid {d}-dimensional, centre has {} entries",
            radial.dim(),
            center.len()
        )));
    }
    let support = radial.radius().min(0.5 * grid.domain_length() - 2.0 * grid.spacing());
    for values in [f, ft] {
        let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tail = radial
            .centers()
            .iter()
            .zip(values)
            .filter(|(r, _)| **r >= support)
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
        if tail > 1e-12 * max {
            return Err(QshError::InvalidArgument(format!(
                "profile is not supported inside r < {support:.6} (tail {tail:.3e} vs max {max:.3e})"
            )));
        }
    }
    let sf = profile_spline(radial, f)?;
    let sft = profile_spline(radial, ft)?;
    let mut q = Field::zeros(grid, Rank::Matrix);
    let mut w = Field::zeros(grid, Rank::Matrix);
    let length = grid.domain_length();
    for p in 0..grid.len() {
        let x = grid.point(p);
        let dx = displacement(&x[..d], center, length);
        let r2: f64 = dx[..d].iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        if r == 0.0 || r >= radial.radius() {
            continue;
        }
        let (fv, ftv) = (sf.eval(r), sft.eval(r));
        for i in 0..d {
            for j in 0..d {
                let mut h = dx[i] * dx[j] / r2;
                if i == j {
                    h -= 1.0 / d as f64;
                }
                q.comps[i * d + j][p] = fv * h;
                w.comps[i * d + j][p] = ftv * h;
            }
        }
    }
    Ok((q, w))
}

/// [`lift_profile`] for a radial state.
pub fn lift_to_tensor(
    state: &RadialState,
    radial: &RadialGrid,
    grid: &Arc<Grid>,
    center: &[f64],
) -> Result<(Field, Field)> {
    lift_profile(radial, &state.f, &state.ft, grid, center)
}

/// Samples `Q₁₁/(1 − 1/d)` along `x = c + (r, 0, …)` at the grid points with
/// `0 ≤ r < L/2`; returns `(r, f)` pairs. `c` must lie on a grid point.
pub fn extract_axis_profile(q: &Field, center: &[f64]) -> Result<Vec<(f64, f64)>> {
    let grid = &q.grid;
    let d = grid.dim();
    let h = grid.spacing();
    let n = grid.n();
    let mut idx = [0usize; 3];
    for a in 0..d {
        let k = center[a] / h;
        if (k - k.round()).abs() > 1e-9 {
            return Err(QshError::InvalidArgument(
                "axis extraction needs the centre on a grid point".into(),
            ));
        }
        idx[a] = (k.round() as i64).rem_euclid(n as i64) as usize;
    }
    let scale = 1.0 / (1.0 - 1.0 / d as f64);
    let mut out = Vec::new();
    for s in 0..n / 2 {
        let mut p = 0;
        for a in 0..d {
            let i = if a == 0 { (idx[0] + s) % n } else { idx[a] };
            p = p * n + i;
        }
        out.push((s as f64 * h, q.comps[0][p] * scale));
    }
    Ok(out)
}

/// One sample of the full-versus-radial comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub t: f64,
    /// `‖Q_full − lift(f)‖_{L²}`
    pub l2_discrepancy: f64,
    /// Constraint residual of the full tensor solution.
    pub constraint_residual: f64,
    /// Constraint residual of the lifted radial solution.
    pub lifted_constraint_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub final_discrepancy: f64,
    pub max_constraint_residual: f64,
    /// Largest `|f(0)|/max|f|`, `|f_r(0)|/max|f_r|` and `|f_tr(0)|/max|f_tr|` seen.
    pub max_origin_ratio: f64,
    pub origin_tolerance: f64,
    pub origin_ok: bool,
    pub steps: usize,
    pub dt: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub final_radial: Option<RadialState>,
}

impl CompareReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,l2_discrepancy,constraint_residual")?;
        for row in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                row.t,
                row.l2_discrepancy,
                row.constraint_residual.max(row.lifted_constraint_residual)
            )?;
        }
        Ok(())
    }
}

/// Radial profile as CSV rows `r,f,ft`.
pub fn write_profile_csv<W: Write>(state: &RadialState, grid: &RadialGrid, mut out: W) -> std::io::Result<()> {
    writeln!(out, "r,f,ft")?;
    for j in 0..grid.cells() {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", grid.center(j), state.f[j], state.ft[j])?;
    }
    Ok(())
}

fn l2_distance(a: &Field, b: &Field) -> f64 {
    let cell = a.grid.spacing().powi(a.dim() as i32);
    let mut s = 0.0;
    for (x, y) in a.comps.iter().flatten().zip(b.comps.iter().flatten()) {
        s += (x - y) * (x - y);
    }
    (s * cell).sqrt()
}

fn origin_ratio(state: &RadialState, radial: &RadialGrid) -> f64 {
    let o = origin_values(state, radial);
    let h = radial.spacing();
    let max = |u: &[f64]| u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_slope = |u: &[f64]| {
        u.windows(2)
            .fold(0.0f64, |m, p| m.max(((p[1] - p[0]) / h).abs()))
    };
    let ratio = |num: f64, den: f64| if den > 0.0 { num.abs() / den } else { 0.0 };
    ratio(o.f, max(&state.f))
        .max(ratio(o.f_r, max_slope(&state.f)))
        .max(ratio(o.ft_r, max_slope(&state.ft)))
}

/// Evolves the radial profile and the lifted tensor field (velocity frozen at
/// zero) side by side with a common step and reports their `L²` discrepancy and
/// the constraint residuals every `sample_every` steps.
pub fn compare_full_vs_radial(
    initial: &RadialState,
    coeffs: &Coefficients,
    grid: &Arc<Grid>,
    radial: &RadialGrid,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<CompareReport> {
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(QshError::InvalidArgument(
            "comparison needs t_end > 0 and dt > 0".into(),
        ));
    }
    let mut warnings = Vec::new();
    if grid.dim() == 3 {
        warnings.push(
            "d = 3: the twist-wave reduction is only known to exist locally in time".to_string(),
        );
    }
    let l = grid.domain_length();
    let center = vec![0.5 * l; grid.dim()];
    let steps = (t_end / dt).round().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let sample_every = sample_every.max(1);

    let engine = Engine::new(grid, coeffs, Mode::QOnly)?.with_integrator(Integrator::Rk4);
    let (q0, w0) = lift_to_tensor(initial, radial, grid, &center)?;
    let mut full = SimState::zeros(grid);
    full.q = q0;
    full.w = w0;
    let mut spec = SpectralState::from_state(&full);
    engine.prepare(&mut spec);
    let mut rad = initial.clone();

    let mut rows = Vec::new();
    let mut max_origin = origin_ratio(&rad, radial);
    let sample = |spec: &SpectralState, rad: &RadialState, rows: &mut Vec<CompareRow>| -> Result<()> {
        let state = spec.to_state();
        let (ql, wl) = lift_to_tensor(rad, radial, grid, &center)?;
        rows.push(CompareRow {
            t: rad.t,
            l2_discrepancy: l2_distance(&state.q, &ql),
            constraint_residual: twist_constraint_residual(&state.q, &state.w, coeffs),
            lifted_constraint_residual: twist_constraint_residual(&ql, &wl, coeffs),
        });
        Ok(())
    };
    sample(&spec, &rad, &mut rows)?;
    for n in 1..=steps {
        spec = engine.step(&spec, dt)?;
        rad = radial_step(&rad, coeffs, radial, dt)?;
        max_origin = max_origin.max(origin_ratio(&rad, radial));
        if n % sample_every == 0 || n == steps {
            sample(&spec, &rad, &mut rows)?;
        }
    }
    let origin_tolerance = 10.0 * radial.spacing().powi(2);
    let final_discrepancy = rows.last().map(|r| r.l2_discrepancy).unwrap_or(0.0);
    let max_constraint_residual = rows
        .iter()
        .map(|r| r.constraint_residual.max(r.lifted_constraint_residual))
        .fold(0.0f64, f64::max);
    Ok(CompareReport {
        rows,
        final_discrepancy,
        max_constraint_residual,
        max_origin_ratio: max_origin,
        origin_tolerance,
        origin_ok: max_origin <= origin_tolerance,
        steps,
        dt,
        warnings,
        final_radial: Some(rad),
    })
}

//! Right-hand sides of the coupled flow / Q-tensor system in the first-order
//! form `(v, Q, W = Q̇)` and explicit time stepping.
//!
//! The spectral engine splits each tendency into a linear part (viscosity,
//! elastic diffusion, linear bulk term, rotational damping) and a nonlinear
//! part evaluated pseudo-spectrally. Products are formed on the grid and only
//! the assembled nonlinear tendencies are truncated, which is the same as
//! truncating every product because truncation is linear.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QshError, Result};
use crate::params::Coefficients;
use crate::spectral::{dealias, gradient, leray_project, Field, Grid, Rank};
use crate::tensor::{commutator, double_contract, reaction, sym_traceless, Mat};

type Spec = Vec<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Velocity, order tensor and its material derivative at time `t`.
#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub v: Field,
    pub q: Field,
    pub w: Field,
}

impl SimState {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SimState {
            t: 0.0,
            v: Field::zeros(grid, Rank::Vector),
            q: Field::zeros(grid, Rank::Matrix),
            w: Field::zeros(grid, Rank::Matrix),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.v.grid
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.q.is_finite() && self.w.is_finite()
    }

    /// Leray projection of `v`, symmetric-traceless projection of `Q` and
    /// `W`, and 2/3-rule truncation of all three.
    pub fn projected(&self) -> SimState {
        let grid = self.grid();
        let mut spec = SpectralState::from_state(self);
        spec.project(&grid.dealias_mask());
        spec.to_state()
    }
}

/// Time derivatives of the three fields.
#[derive(Clone, Debug)]
pub struct Tendencies {
    pub dv_dt: Field,
    pub dq_dt: Field,
    pub dw_dt: Field,
}

/// Which unknowns evolve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// The full coupled system.
    Full,
    /// Velocity frozen at zero; the tensor equation becomes a damped wave equation.
    QOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Integrator {
    /// Classical explicit fourth-order Runge-Kutta.
    Rk4,
    /// Fourth-order Runge-Kutta in the integrating-factor (Lawson) form: the
    /// linear viscous and damped-wave parts are propagated exactly per mode.
    IfRk4,
}

/// Spectral coefficients of a state, components laid out as
/// `[v₀ … v_{d−1}, Q₀₀ … Q_{d−1,d−1}, W₀₀ … W_{d−1,d−1}]`.
#[derive(Clone, Debug)]
pub struct SpectralState {
    pub t: f64,
    pub grid: Arc<Grid>,
    pub comps: Vec<Spec>,
}

impl SpectralState {
    pub fn from_state(state: &SimState) -> Self {
        let grid = state.grid().clone();
        let fields = state
            .v
            .comps
            .iter()
            .chain(&state.q.comps)
            .chain(&state.w.comps)
            .collect::<Vec<_>>();
        let comps = fields
            .par_iter()
            .map(|c| {
                let mut out = vec![ZERO; grid.spectral_len()];
                grid.forward(c, &mut out);
                out
            })
            .collect();
        SpectralState {
            t: state.t,
            grid,
            comps,
        }
    }

    pub fn to_state(&self) -> SimState {
        let grid = &self.grid;
        let d = grid.dim();
        let phys: Vec<Vec<f64>> = self
            .comps
            .par_iter()
            .map(|c| {
                let mut out = vec![0.0; grid.len()];
                grid.inverse(c, &mut out);
                out
            })
            .collect();
        let mut it = phys.into_iter();
        let mut take = |rank: Rank| Field {
            grid: grid.clone(),
            rank,
            comps: (&mut it).take(rank.components(d)).collect(),
        };
        let v = take(Rank::Vector);
        let q = take(Rank::Matrix);
        let w = take(Rank::Matrix);
        SimState { t: self.t, v, q, w }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .flatten()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    fn project(&mut self, mask: &[bool]) {
        let d = self.dim();
        let (v, rest) = self.comps.split_at_mut(d);
        crate::spectral::leray_in_place(v, &self.grid);
        let (q, w) = rest.split_at_mut(d * d);
        sym_traceless_spectral(q, d);
        sym_traceless_spectral(w, d);
        for comp in self.comps.iter_mut() {
            for (c, &keep) in comp.iter_mut().zip(mask) {
                if !keep {
                    *c = ZERO;
                }
            }
        }
    }
}

/// Symmetric-traceless projection applied mode by mode.
fn sym_traceless_spectral(m: &mut [Spec], d: usize) {
    let len = m[0].len();
    for s in 0..len {
        let mut tr = ZERO;
        for i in 0..d {
            tr += m[i * d + i][s];
        }
        let mean = tr / d as f64;
        for i in 0..d {
            for j in i + 1..d {
                let avg = 0.5 * (m[i * d + j][s] + m[j * d + i][s]);
                m[i * d + j][s] = avg;
                m[j * d + i][s] = avg;
            }
            m[i * d + i][s] -= mean;
        }
    }
}

fn sym_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            out.push((i, j));
        }
    }
    out
}

fn axpy(y: &mut [Spec], a: f64, x: &[Spec]) {
    for (yc, xc) in y.iter_mut().zip(x) {
        for (yv, xv) in yc.iter_mut().zip(xc) {
            *yv += xv * a;
        }
    }
}

/// Per-mode propagator of the linear part over one time interval.
struct Propagator {
    viscous: Vec<f64>,
    /// Row-major 2×2 matrices acting on `(Q̂, Ŵ)`.
    wave: Vec<[f64; 4]>,
}

/// Spectral time stepper for one grid, coefficient set and mode.
#[derive(Clone, Debug)]
pub struct Engine {
    grid: Arc<Grid>,
    coeffs: Coefficients,
    /// Bulk coefficients with `a` removed; the linear term lives in the linear operator.
    nonlinear_bulk: Coefficients,
    mode: Mode,
    integrator: Integrator,
    mask: Vec<bool>,
}

impl Engine {
    pub fn new(grid: &Arc<Grid>, coeffs: &Coefficients, mode: Mode) -> Result<Self> {
        if !(coeffs.inertia > 0.0) {
            return Err(QshError::InvalidArgument(format!(
                "inertia J must be positive, got {}",
                coeffs.inertia
            )));
        }
        if coeffs.dim != grid.dim() {
            return Err(QshError::ShapeMismatch(format!(
                "coefficients are for d = {} but the grid has d = {}",
                coeffs.dim,
                grid.dim()
            )));
        }
        let mut nonlinear_bulk = coeffs.clone();
        nonlinear_bulk.a = 0.0;
        Ok(Engine {
            grid: grid.clone(),
            coeffs: coeffs.clone(),
            nonlinear_bulk,
            mode,
            integrator: Integrator::Rk4,
            mask: grid.dealias_mask(),
        })
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    /// Additionally confines the nonlinear terms and the state to `|k| ≤ 2^n_cut`.
    pub fn with_mollifier(mut self, n_cut: Option<u32>) -> Self {
        self.mask = self.grid.dealias_mask();
        if let Some(n) = n_cut {
            let radius = self.grid.radius_mask(2f64.powi(n.min(1000) as i32));
            for (m, r) in self.mask.iter_mut().zip(radius) {
                *m &= r;
            }
        }
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    /// Modes the solver keeps.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    fn d(&self) -> usize {
        self.grid.dim()
    }

    /// Projects and truncates a state onto the space the solver evolves in.
    pub fn prepare(&self, state: &mut SpectralState) {
        if self.mode == Mode::QOnly {
            let d = self.d();
            state.comps[..d]
                .iter_mut()
                .for_each(|c| c.iter_mut().for_each(|x| *x = ZERO));
        }
        state.project(&self.mask);
    }

    /// Linear part of the tendency.
    fn linear(&self, u: &[Spec]) -> Vec<Spec> {
        let d = self.d();
        let k = &self.coeffs;
        let k2 = self.grid.k2();
        let mut out: Vec<Spec> = u.iter().map(|c| vec![ZERO; c.len()]).collect();
        if self.mode == Mode::Full {
            for a in 0..d {
                for s in 0..k2.len() {
                    out[a][s] = u[a][s] * (-0.5 * k.beta4 * k2[s]);
                }
            }
        }
        let inv_j = 1.0 / k.inertia;
        for c in 0..d * d {
            let (qi, wi) = (d + c, d + d * d + c);
            for s in 0..k2.len() {
                out[qi][s] = u[wi][s];
                out[wi][s] =
                    (u[wi][s] * (-k.mu1) - u[qi][s] * (k.elastic * k2[s] + k.a)) * inv_j;
            }
        }
        out
    }

    /// Nonlinear part of the tendency, projected and truncated.
    fn nonlinear(&self, u: &[Spec]) -> Vec<Spec> {
        match self.mode {
            Mode::Full => self.nonlinear_full(u),
            Mode::QOnly => self.nonlinear_q_only(u),
        }
    }

    fn inverse_all(&self, specs: Vec<Spec>) -> Vec<Vec<f64>> {
        let grid = &self.grid;
        specs
            .into_par_iter()
            .map(|mut s| {
                let mut out = vec![0.0; grid.len()];
                grid.inverse_into(&mut s, &mut out);
                out
            })
            .collect()
    }

    fn forward_all(&self, phys: &[Vec<f64>]) -> Vec<Spec> {
        let grid = &self.grid;
        phys.par_iter()
            .map(|p| {
                let mut out = vec![ZERO; grid.spectral_len()];
                grid.forward(p, &mut out);
                out
            })
            .collect()
    }

    fn derivative(&self, f: &Spec, axis: usize) -> Spec {
        let kd = self.grid.kd(axis);
        f.iter().zip(kd).map(|(c, k)| I * *k * c).collect()
    }

    /// Mirrors symmetric components into full d×d storage and projects.
    fn assemble_symmetric(&self, sym: &[Spec], pairs: &[(usize, usize)], out: &mut [Spec]) {
        let d = self.d();
        for (c, &(i, j)) in pairs.iter().enumerate() {
            out[i * d + j].clone_from(&sym[c]);
            if i != j {
                out[j * d + i].clone_from(&sym[c]);
            }
        }
        sym_traceless_spectral(out, d);
        for comp in out.iter_mut() {
            for (x, &keep) in comp.iter_mut().zip(&self.mask) {
                if !keep {
                    *x = ZERO;
                }
            }
        }
    }

    fn nonlinear_q_only(&self, u: &[Spec]) -> Vec<Spec> {
        let d = self.d();
        let pairs = sym_pairs(d);
        let ns = pairs.len();
        let q_spec: Vec<Spec> = pairs.iter().map(|&(i, j)| u[d + i * d + j].clone()).collect();
        let q_phys = self.inverse_all(q_spec);
        let inv_j = 1.0 / self.coeffs.inertia;
        let npts = self.grid.len();
        let mut nw = vec![vec![0.0; npts]; ns];
        for p in 0..npts {
            let mut q = Mat::zeros(d);
            for (c, &(i, j)) in pairs.iter().enumerate() {
                q.e[i][j] = q_phys[c][p];
                q.e[j][i] = q_phys[c][p];
            }
            let r = reaction(&q, &self.nonlinear_bulk);
            for (c, &(i, j)) in pairs.iter().enumerate() {
                nw[c][p] = r.e[i][j] * inv_j;
            }
        }
        let nw_spec = self.forward_all(&nw);
        let mut out: Vec<Spec> = u.iter().map(|c| vec![ZERO; c.len()]).collect();
        self.assemble_symmetric(&nw_spec, &pairs, &mut out[d + d * d..]);
        out
    }

    fn nonlinear_full(&self, u: &[Spec]) -> Vec<Spec> {
        let d = self.d();
        let k = &self.coeffs;
        let pairs = sym_pairs(d);
        let ns = pairs.len();

        // grid values needed: v, ∇v, Q, ∇Q, W, ∇W (symmetric components only)
        let mut specs: Vec<Spec> = Vec::with_capacity(d + d * d + 2 * ns * (1 + d));
        for a in 0..d {
            specs.push(u[a].clone());
        }
        for a in 0..d {
            for b in 0..d {
                specs.push(self.derivative(&u[a], b));
            }
        }
        for base in [d, d + d * d] {
            for &(i, j) in &pairs {
                specs.push(u[base + i * d + j].clone());
            }
            for &(i, j) in &pairs {
                for kx in 0..d {
                    specs.push(self.derivative(&u[base + i * d + j], kx));
                }
            }
        }
        let phys = self.inverse_all(specs);
        let (v_p, rest) = phys.split_at(d);
        let (g_p, rest) = rest.split_at(d * d);
        let (q_p, rest) = rest.split_at(ns);
        let (dq_p, rest) = rest.split_at(ns * d);
        let (w_p, dw_p) = rest.split_at(ns);

        let npts = self.grid.len();
        let inv_j = 1.0 / k.inertia;
        // outputs: advection of v (d), stress (d²), Q tendency (sym), W tendency (sym)
        let mut nv = vec![vec![0.0; npts]; d];
        let mut sigma = vec![vec![0.0; npts]; d * d];
        let mut nq = vec![vec![0.0; npts]; ns];
        let mut nw = vec![vec![0.0; npts]; ns];

        let sym_at = |src: &[Vec<f64>], stride: usize, offset: usize, p: usize| {
            let mut m = Mat::zeros(d);
            for (c, &(i, j)) in pairs.iter().enumerate() {
                let x = src[c * stride + offset][p];
                m.e[i][j] = x;
                m.e[j][i] = x;
            }
            m
        };

        for p in 0..npts {
            let mut v = [0.0; 3];
            for a in 0..d {
                v[a] = v_p[a][p];
            }
            let mut g = Mat::zeros(d);
            for a in 0..d {
                for b in 0..d {
                    g.e[a][b] = g_p[a * d + b][p];
                }
            }
            let gt = g.transpose();
            let strain = (g + gt).scale(0.5);
            let omega = (g - gt).scale(0.5);
            let q = sym_at(q_p, 1, 0, p);
            let w = sym_at(w_p, 1, 0, p);
            let mut dq = [Mat::zeros(d); 3];
            let mut dw = [Mat::zeros(d); 3];
            for kx in 0..d {
                dq[kx] = sym_at(dq_p, d, kx, p);
                dw[kx] = sym_at(dw_p, d, kx, p);
            }

            for a in 0..d {
                let mut s = 0.0;
                for b in 0..d {
                    s += v[b] * g.e[a][b];
                }
                nv[a][p] = -s;
            }

            let omega_q = commutator(&omega, &q);
            let flux = w - omega_q;
            let qa = double_contract(&q, &strain);
            let mut st = q.scale(k.beta1 * qa)
                + strain.matmul(&q).scale(k.beta5)
                + q.matmul(&strain).scale(k.beta6)
                + flux.scale(0.5 * k.mu2)
                + commutator(&q, &flux).scale(k.mu1);
            for i in 0..d {
                for j in 0..d {
                    st.e[i][j] -= k.elastic * double_contract(&dq[i], &dq[j]);
                }
            }
            for i in 0..d {
                for j in 0..d {
                    sigma[i * d + j][p] = st.e[i][j];
                }
            }

            let mut adv_q = Mat::zeros(d);
            let mut adv_w = Mat::zeros(d);
            for kx in 0..d {
                adv_q += dq[kx].scale(v[kx]);
                adv_w += dw[kx].scale(v[kx]);
            }
            let forcing = reaction(&q, &self.nonlinear_bulk)
                + strain.scale(0.5 * k.mu2_tilde)
                + omega_q.scale(k.mu1);
            let tw = forcing.scale(inv_j) - adv_w;
            for (c, &(i, j)) in pairs.iter().enumerate() {
                nq[c][p] = -adv_q.e[i][j];
                nw[c][p] = tw.e[i][j];
            }
        }

        let mut to_forward = nv;
        to_forward.extend(sigma);
        to_forward.extend(nq);
        to_forward.extend(nw);
        let spec = self.forward_all(&to_forward);
        let (nv_s, rest) = spec.split_at(d);
        let (sig_s, rest) = rest.split_at(d * d);
        let (nq_s, nw_s) = rest.split_at(ns);

        let mut out: Vec<Spec> = u.iter().map(|c| vec![ZERO; c.len()]).collect();
        for a in 0..d {
            let dst = &mut out[a];
            dst.clone_from(&nv_s[a]);
            for b in 0..d {
                let kd = self.grid.kd(b);
                let src = &sig_s[a * d + b];
                for s in 0..dst.len() {
                    dst[s] += I * kd[s] * src[s];
                }
            }
        }
        crate::spectral::leray_in_place(&mut out[..d], &self.grid);
        for comp in out[..d].iter_mut() {
            for (x, &keep) in comp.iter_mut().zip(&self.mask) {
                if !keep {
                    *x = ZERO;
                }
            }
        }
        let (_, tail) = out.split_at_mut(d);
        let (q_out, w_out) = tail.split_at_mut(d * d);
        self.assemble_symmetric(nq_s, &pairs, q_out);
        self.assemble_symmetric(nw_s, &pairs, w_out);
        out
    }

    /// Full tendency `L u + N(u)`.
    pub fn rhs(&self, state: &SpectralState) -> Vec<Spec> {
        let mut out = self.linear(&state.comps);
        let n = self.nonlinear(&state.comps);
        axpy(&mut out, 1.0, &n);
        out
    }

    /// Advances by one step of the configured integrator.
    pub fn step(&self, state: &SpectralState, dt: f64) -> Result<SpectralState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(QshError::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let mut next = match self.integrator {
            Integrator::Rk4 => self.rk4(state, dt),
            Integrator::IfRk4 => self.if_rk4(state, dt),
        };
        next.t = state.t + dt;
        next.project(&self.mask);
        if !next.is_finite() {
            return Err(QshError::NonFinite { t: next.t });
        }
        Ok(next)
    }

    fn rk4(&self, state: &SpectralState, dt: f64) -> SpectralState {
        let u = &state.comps;
        let f = |x: &[Spec]| {
            let mut out = self.linear(x);
            axpy(&mut out, 1.0, &self.nonlinear(x));
            out
        };
        let k1 = f(u);
        let mut tmp = u.clone();
        axpy(&mut tmp, 0.5 * dt, &k1);
        let k2 = f(&tmp);
        tmp.clone_from(u);
        axpy(&mut tmp, 0.5 * dt, &k2);
        let k3 = f(&tmp);
        tmp.clone_from(u);
        axpy(&mut tmp, dt, &k3);
        let k4 = f(&tmp);
        let mut out = u.clone();
        axpy(&mut out, dt / 6.0, &k1);
        axpy(&mut out, dt / 3.0, &k2);
        axpy(&mut out, dt / 3.0, &k3);
        axpy(&mut out, dt / 6.0, &k4);
        SpectralState {
            t: state.t,
            grid: state.grid.clone(),
            comps: out,
        }
    }

    fn propagator(&self, tau: f64) -> Propagator {
        let k = &self.coeffs;
        let k2 = self.grid.k2();
        let gamma = k.mu1 / k.inertia;
        let viscous = k2
            .iter()
            .map(|&x| {
                if self.mode == Mode::Full {
                    (-0.5 * k.beta4 * x * tau).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let wave = k2
            .iter()
            .map(|&x| {
                let omega2 = (k.elastic * x + k.a) / k.inertia;
                let s2 = 0.25 * gamma * gamma - omega2;
                let z = s2 * tau * tau;
                let (c, sh) = if z.abs() < 1e-8 {
                    (1.0 + 0.5 * z, tau * (1.0 + z / 6.0))
                } else if s2 > 0.0 {
                    let s = s2.sqrt();
                    ((s * tau).cosh(), (s * tau).sinh() / s)
                } else {
                    let s = (-s2).sqrt();
                    ((s * tau).cos(), (s * tau).sin() / s)
                };
                let decay = (-0.5 * gamma * tau).exp();
                [
                    decay * (c + 0.5 * gamma * sh),
                    decay * sh,
                    -decay * omega2 * sh,
                    decay * (c - 0.5 * gamma * sh),
                ]
            })
            .collect();
        Propagator { viscous, wave }
    }

    fn propagate(&self, prop: &Propagator, u: &[Spec]) -> Vec<Spec> {
        let d = self.d();
        let mut out: Vec<Spec> = u.to_vec();
        for a in 0..d {
            for (x, e) in out[a].iter_mut().zip(&prop.viscous) {
                *x *= e;
            }
        }
        for c in 0..d * d {
            let (qi, wi) = (d + c, d + d * d + c);
            for s in 0..prop.wave.len() {
                let [e11, e12, e21, e22] = prop.wave[s];
                let (q, w) = (u[qi][s], u[wi][s]);
                out[qi][s] = q * e11 + w * e12;
                out[wi][s] = q * e21 + w * e22;
            }
        }
        out
    }

    fn if_rk4(&self, state: &SpectralState, dt: f64) -> SpectralState {
        let half = self.propagator(0.5 * dt);
        let full = self.propagator(dt);
        let u = &state.comps;
        let n1 = self.nonlinear(u);
        let mut a = u.clone();
        axpy(&mut a, 0.5 * dt, &n1);
        let n2 = self.nonlinear(&self.propagate(&half, &a));
        let eu = self.propagate(&half, u);
        let mut b = eu.clone();
        axpy(&mut b, 0.5 * dt, &n2);
        let n3 = self.nonlinear(&b);
        let mut c = self.propagate(&half, &eu);
        axpy(&mut c, dt, &self.propagate(&half, &n3));
        let n4 = self.nonlinear(&c);

        let mut acc = u.clone();
        axpy(&mut acc, dt / 6.0, &n1);
        let mut out = self.propagate(&full, &acc);
        let mut mid = n2;
        axpy(&mut mid, 1.0, &n3);
        axpy(&mut out, dt / 3.0, &self.propagate(&half, &mid));
        axpy(&mut out, dt / 6.0, &n4);
        SpectralState {
            t: state.t,
            grid: state.grid.clone(),
            comps: out,
        }
    }

    /// Largest stable step for this engine's integrator, scaled by `safety`.
    /// The integrating-factor path treats viscosity and elastic waves exactly,
    /// so only advection and the rotational/bulk rates constrain it.
    pub fn stable_dt(&self, state: &SimState, safety: f64) -> f64 {
        let terms = cfl_terms(state, &self.coeffs);
        let limit = match self.integrator {
            Integrator::Rk4 => terms.iter().copied().fold(f64::INFINITY, f64::min),
            Integrator::IfRk4 => terms[1].min(terms[3]),
        };
        safety * limit
    }
}

/// `[viscous, advective, wave, reaction]` time-scale limits; infinite when a
/// term is absent.
fn cfl_terms(state: &SimState, coeffs: &Coefficients) -> [f64; 4] {
    let h = state.grid().spacing();
    let vmax = state.v.max_abs();
    let qmax = state.q.max_abs();
    let inf_div = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    let viscous = inf_div(h * h, coeffs.beta4);
    let advective = inf_div(h, vmax);
    let wave = inf_div(h, (coeffs.elastic / coeffs.inertia).sqrt());
    let rate = coeffs.mu1 / coeffs.inertia
        + coeffs.a.abs()
        + coeffs.b.abs() * qmax
        + coeffs.c.abs() * qmax * qmax;
    let reaction = inf_div(1.0, rate);
    [viscous, advective, wave, reaction]
}

/// Default CFL safety factor.
pub const CFL_SAFETY: f64 = 0.4;

/// `0.4 · min(h²/β₄, h/max|v|, h/√(L/J), 1/(μ₁/J + |a| + |b| max|Q| + c max|Q|²))`.
pub fn cfl_dt(state: &SimState, coeffs: &Coefficients) -> f64 {
    cfl_dt_with_safety(state, coeffs, CFL_SAFETY)
}

pub fn cfl_dt_with_safety(state: &SimState, coeffs: &Coefficients, safety: f64) -> f64 {
    safety * cfl_terms(state, coeffs).iter().copied().fold(f64::INFINITY, f64::min)
}

/// One classical RK4 step of the full system.
pub fn step_rk4(state: &SimState, coeffs: &Coefficients, dt: f64) -> Result<SimState> {
    let engine = Engine::new(state.grid(), coeffs, Mode::Full)?;
    Ok(engine.step(&SpectralState::from_state(state), dt)?.to_state())
}

/// RK4 step of the Friedrichs-truncated system: every nonlinear term and the
/// updated state are restricted to `|k| ≤ 2^n_cut`.
pub fn step_mollified(
    state: &SimState,
    coeffs: &Coefficients,
    dt: f64,
    n_cut: u32,
) -> Result<SimState> {
    let engine = Engine::new(state.grid(), coeffs, Mode::Full)?.with_mollifier(Some(n_cut));
    Ok(engine.step(&SpectralState::from_state(state), dt)?.to_state())
}

/// All three tendencies of the full system.
pub fn tendencies(state: &SimState, coeffs: &Coefficients) -> Result<Tendencies> {
    let engine = Engine::new(state.grid(), coeffs, Mode::Full)?;
    let spec = SpectralState::from_state(state);
    let rhs = SpectralState {
        t: state.t,
        grid: spec.grid.clone(),
        comps: engine.rhs(&spec),
    }
    .to_state();
    Ok(Tendencies {
        dv_dt: rhs.v,
        dq_dt: rhs.q,
        dw_dt: rhs.w,
    })
}

/// `P(−(v·∇)v + β₄/2 Δv + ∇·(−L∇Q⊙∇Q + viscous stress))`.
pub fn momentum_rhs(state: &SimState, coeffs: &Coefficients) -> Result<Field> {
    Ok(tendencies(state, coeffs)?.dv_dt)
}

/// `(W − v·∇Q, −v·∇W + (−μ₁W + LΔQ + reaction(Q) + μ̃₂/2 A + μ₁[Ω,Q])/J)`.
pub fn qtensor_rhs(state: &SimState, coeffs: &Coefficients) -> Result<(Field, Field)> {
    let t = tendencies(state, coeffs)?;
    Ok((t.dq_dt, t.dw_dt))
}

/// Symmetric and skew parts of `Gᵢⱼ = ∂ⱼvᵢ`.
pub fn strain_rotation(v: &Field) -> (Field, Field) {
    let g = gradient(v);
    let d = v.dim();
    let mut a = Field::zeros(&v.grid, Rank::Matrix);
    let mut o = Field::zeros(&v.grid, Rank::Matrix);
    for i in 0..d {
        for j in 0..d {
            let (gij, gji) = (&g.comps[i * d + j], &g.comps[j * d + i]);
            for p in 0..v.grid.len() {
                a.comps[i * d + j][p] = 0.5 * (gij[p] + gji[p]);
                o.comps[i * d + j][p] = 0.5 * (gij[p] - gji[p]);
            }
        }
    }
    (a, o)
}

fn pointwise(
    fields: &[&Field],
    grid: &Arc<Grid>,
    f: impl Fn(&[Mat]) -> Mat,
) -> Field {
    let mut out = Field::zeros(grid, Rank::Matrix);
    let mut mats = vec![Mat::zeros(grid.dim()); fields.len()];
    for p in 0..grid.len() {
        for (m, field) in mats.iter_mut().zip(fields) {
            *m = field.mat_at(p);
        }
        out.set_mat(p, &f(&mats));
    }
    out
}

/// `N = W − [Ω, Q]`.
pub fn corotational_flux(q: &Field, w: &Field, omega: &Field) -> Field {
    pointwise(&[q, w, omega], &q.grid, |m| m[1] - commutator(&m[2], &m[0]))
}

/// `−L ∇Q⊙∇Q` with `(∇Q⊙∇Q)ᵢⱼ = Σₖₗ ∂ᵢQₖₗ ∂ⱼQₖₗ`, truncated by the 2/3 rule.
pub fn elastic_stress(q: &Field, coeffs: &Coefficients) -> Field {
    let d = q.dim();
    let dq = gradient(q);
    let mut out = Field::zeros(&q.grid, Rank::Matrix);
    for p in 0..q.grid.len() {
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for c in 0..d * d {
                    s += dq.comps[c * d + i][p] * dq.comps[c * d + j][p];
                }
                out.comps[i * d + j][p] = -coeffs.elastic * s;
            }
        }
    }
    dealias(&out)
}

/// `β₁Q(Q:A) + β₅AQ + β₆QA + μ₂/2 N + μ₁[Q, N]` with `N = W − [Ω, Q]`,
/// truncated by the 2/3 rule. The Newtonian `β₄A` part is not included.
pub fn viscous_stress(
    q: &Field,
    a: &Field,
    omega: &Field,
    w: &Field,
    coeffs: &Coefficients,
) -> Field {
    let k = coeffs.clone();
    let raw = pointwise(&[q, a, omega, w], &q.grid, move |m| {
        let (q, a, o, w) = (&m[0], &m[1], &m[2], &m[3]);
        let n = *w - commutator(o, q);
        q.scale(k.beta1 * double_contract(q, a))
            + a.matmul(q).scale(k.beta5)
            + q.matmul(a).scale(k.beta6)
            + n.scale(0.5 * k.mu2)
            + commutator(q, &n).scale(k.mu1)
    });
    dealias(&raw)
}

/// Pointwise symmetric-traceless projection of a matrix field.
pub fn project_field(m: &Field) -> Field {
    pointwise(&[m], &m.grid, |x| sym_traceless(&x[0]))
}

/// Leray projection of a velocity field (re-exported for callers working on `SimState`).
pub fn project_velocity(v: &Field) -> Field {
    leray_project(v)
}

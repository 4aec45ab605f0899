//! Energy functionals, dissipation terms, energy-law residuals, the
//! Sobolev-norm smallness monitor and the twist-wave constraint residual.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::{strain_rotation, SimState};
use crate::error::{QshError, Result};
use crate::params::Coefficients;
use crate::spectral::{
    dealias, gradient, leray_in_place, spectral_gradient, spectral_sobolev_sq, Field, Rank,
};
use crate::tensor::{bulk_density, commutator, double_contract, Mat};

/// Coefficient in front of `∫|∇Q|²` in the elastic energy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum ElasticConvention {
    /// `L/2 ∫|∇Q|²`, the form that balances the dissipation identity.
    #[default]
    Half,
    /// `L/4 ∫|∇Q|²`.
    Quarter,
}

impl ElasticConvention {
    pub fn factor(self) -> f64 {
        match self {
            ElasticConvention::Half => 0.5,
            ElasticConvention::Quarter => 0.25,
        }
    }
}

impl std::str::FromStr for ElasticConvention {
    type Err = QshError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(ElasticConvention::Half),
            "quarter" => Ok(ElasticConvention::Quarter),
            other => Err(QshError::InvalidArgument(format!(
                "elastic convention must be `half` or `quarter`, got `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// `½∫|v|²`
    pub kinetic: f64,
    /// `J/2 ∫|W|²`
    pub rotational: f64,
    /// `L/2 ∫|∇Q|²` (or `L/4` under [`ElasticConvention::Quarter`])
    pub elastic: f64,
    /// `∫ψ_B(Q)`
    pub bulk: f64,
    pub total: f64,
    /// `β₄/2 ∫|∇v|²`
    pub dissipation_newtonian: f64,
    /// `β₁ ∫(Q:A)²`
    pub dissipation_beta1: f64,
    /// `μ₁ ∫|W − [Ω,Q]|²`
    pub dissipation_rotational: f64,
    /// `μ̃₂ ∫W:A`
    pub cross_mu2tilde: f64,
    /// `μ₂ ∫tr(A[Ω,Q])`
    pub cross_mu2: f64,
}

impl EnergyBreakdown {
    pub fn dissipation(&self) -> f64 {
        self.dissipation_newtonian + self.dissipation_beta1 + self.dissipation_rotational
    }

    pub fn cross_terms(&self) -> f64 {
        self.cross_mu2tilde + self.cross_mu2
    }
}

pub fn energy_breakdown(state: &SimState, coeffs: &Coefficients) -> EnergyBreakdown {
    energy_breakdown_with(state, coeffs, ElasticConvention::Half)
}

pub fn energy_breakdown_with(
    state: &SimState,
    coeffs: &Coefficients,
    convention: ElasticConvention,
) -> EnergyBreakdown {
    let grid = state.grid();
    let d = grid.dim();
    let v_hat = state.v.to_spectral();
    let q_hat = state.q.to_spectral();
    let w_hat = state.w.to_spectral();

    let kinetic = 0.5 * v_hat.energy();
    let rotational = 0.5 * coeffs.inertia * w_hat.energy();
    let grad_q_sq = spectral_sobolev_sq(&spectral_gradient(&q_hat, Rank::Rank3), 0.0);
    let elastic = convention.factor() * coeffs.elastic * grad_q_sq;
    let grad_v_sq = spectral_sobolev_sq(&spectral_gradient(&v_hat, Rank::Matrix), 0.0);
    let dissipation_newtonian = 0.5 * coeffs.beta4 * grad_v_sq;

    let (a, omega) = strain_rotation(&state.v);
    let cell = grid.spacing().powi(d as i32);
    let (mut bulk, mut beta1, mut rot, mut c_tilde, mut c_mu2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in 0..grid.len() {
        let q = state.q.mat_at(p);
        let w = state.w.mat_at(p);
        let am = a.mat_at(p);
        let om = omega.mat_at(p);
        let oq = commutator(&om, &q);
        bulk += bulk_density(&q, coeffs);
        let qa = double_contract(&q, &am);
        beta1 += qa * qa;
        rot += (w - oq).norm_sq();
        c_tilde += double_contract(&w, &am);
        c_mu2 += double_contract(&am, &oq);
    }
    let bulk = bulk * cell;
    EnergyBreakdown {
        kinetic,
        rotational,
        elastic,
        bulk,
        total: kinetic + rotational + elastic + bulk,
        dissipation_newtonian,
        dissipation_beta1: coeffs.beta1 * beta1 * cell,
        dissipation_rotational: coeffs.mu1 * rot * cell,
        cross_mu2tilde: coeffs.mu2_tilde * c_tilde * cell,
        cross_mu2: coeffs.mu2 * c_mu2 * cell,
    }
}

/// `rₙ = (Eₙ₊₁ − Eₙ₋₁)/(2dt) + Dₙ − RHSₙ` for every interior sample of a
/// uniformly spaced `(time, breakdown)` history.
pub fn energy_law_residual(history: &[(f64, EnergyBreakdown)]) -> Result<Vec<f64>> {
    if history.len() < 3 {
        return Err(QshError::InvalidArgument(format!(
            "energy-law residual needs at least 3 samples, got {}",
            history.len()
        )));
    }
    let dt = (history[history.len() - 1].0 - history[0].0) / (history.len() - 1) as f64;
    for pair in history.windows(2) {
        let step = pair[1].0 - pair[0].0;
        if (step - dt).abs() > 1e-9 * dt.abs().max(1e-300) {
            return Err(QshError::InvalidArgument(
                "energy-law residual needs uniformly spaced samples".into(),
            ));
        }
    }
    Ok(history
        .windows(3)
        .map(|w| {
            let e = &w[1].1;
            (w[2].1.total - w[0].1.total) / (2.0 * dt) + e.dissipation() - e.cross_terms()
        })
        .collect())
}

/// Terms of the second (L²-control) energy estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SecondEnergyTerms {
    /// `J∫|W + Q|² − J∫|W|² + (μ₁ − J)∫|Q|²`
    pub combined: f64,
    /// `P(Q) = ∫(−aQ:Q + b tr Q³ − c(Q:Q)²)`; the cubic term is dropped for d = 2.
    pub potential: f64,
    /// `P(Q) + μ̃₂/2 ∫tr(AQ)`
    pub forcing: f64,
}

pub fn second_energy_terms(state: &SimState, coeffs: &Coefficients) -> SecondEnergyTerms {
    let grid = state.grid();
    let d = grid.dim();
    let (a, _) = strain_rotation(&state.v);
    let cell = grid.spacing().powi(d as i32);
    let j = coeffs.inertia;
    let (mut combined, mut potential, mut aq) = (0.0, 0.0, 0.0);
    for p in 0..grid.len() {
        let q = state.q.mat_at(p);
        let w = state.w.mat_at(p);
        let qq = q.norm_sq();
        combined += j * (w + q).norm_sq() - j * w.norm_sq() + (coeffs.mu1 - j) * qq;
        let mut pot = -coeffs.a * qq - coeffs.c * qq * qq;
        if d == 3 {
            pot += coeffs.b * double_contract(&q.matmul(&q), &q);
        }
        potential += pot;
        aq += double_contract(&a.mat_at(p), &q);
    }
    SecondEnergyTerms {
        combined: combined * cell,
        potential: potential * cell,
        forcing: (potential + 0.5 * coeffs.mu2_tilde * aq) * cell,
    }
}

/// `Φ = ‖v‖² + ‖Q‖² + ‖W‖² + ‖∇Q‖²` and `Ψ = ‖∇v‖² + ‖W‖² + ‖Q‖² + ‖∇Q‖²`,
/// all in `H^s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovMonitor {
    pub phi: f64,
    pub psi: f64,
    pub s: f64,
}

impl LyapunovMonitor {
    /// `s > d/2`, the range where `H^s` embeds in `L^∞`.
    pub fn above_embedding(&self, dim: usize) -> bool {
        self.s > dim as f64 / 2.0
    }
}

pub fn lyapunov_monitor(state: &SimState, s: f64) -> Result<LyapunovMonitor> {
    if !(s >= 0.0) {
        return Err(QshError::InvalidArgument(format!(
            "Sobolev index must be non-negative, got {s}"
        )));
    }
    let v = state.v.to_spectral();
    let q = state.q.to_spectral();
    let w = state.w.to_spectral();
    let v_n = spectral_sobolev_sq(&v, s);
    let q_n = spectral_sobolev_sq(&q, s);
    let w_n = spectral_sobolev_sq(&w, s);
    let gq_n = spectral_sobolev_sq(&spectral_gradient(&q, Rank::Rank3), s);
    let gv_n = spectral_sobolev_sq(&spectral_gradient(&v, Rank::Matrix), s);
    Ok(LyapunovMonitor {
        phi: v_n + q_n + w_n + gq_n,
        psi: gv_n + w_n + q_n + gq_n,
        s,
    })
}

/// Running `sup Φ` and trapezoidal `∫Ψ dt` along a trajectory.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LyapunovTracker {
    pub phi0: Option<f64>,
    pub sup_phi: f64,
    pub psi_integral: f64,
    last: Option<(f64, f64)>,
}

impl LyapunovTracker {
    pub fn record(&mut self, t: f64, monitor: &LyapunovMonitor) {
        if self.phi0.is_none() {
            self.phi0 = Some(monitor.phi);
        }
        self.sup_phi = self.sup_phi.max(monitor.phi);
        if let Some((t0, psi0)) = self.last {
            self.psi_integral += 0.5 * (t - t0) * (psi0 + monitor.psi);
        }
        self.last = Some((t, monitor.psi));
    }

    /// `sup Φ ≤ k_sup·Φ(0)` and `∫Ψ ≤ k_int·Φ(0)`.
    pub fn bounded(&self, k_sup: f64, k_int: f64) -> bool {
        match self.phi0 {
            Some(p0) => self.sup_phi <= k_sup * p0 && self.psi_integral <= k_int * p0,
            None => true,
        }
    }
}

/// `‖P ∇·(−L∇Q⊗∇Q + μ₂/2 W + μ₁[Q,W])‖ / (1 + ‖∇Q‖²)`, with the velocity
/// taken as zero. Vanishes exactly when the forcing is a pure gradient.
pub fn twist_constraint_residual(q: &Field, w: &Field, coeffs: &Coefficients) -> f64 {
    let grid = &q.grid;
    let d = grid.dim();
    let dq = gradient(q);
    let mut force = Field::zeros(grid, Rank::Matrix);
    for p in 0..grid.len() {
        let qm = q.mat_at(p);
        let wm = w.mat_at(p);
        let comm = commutator(&qm, &wm);
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for c in 0..d * d {
                    s += dq.comps[c * d + i][p] * dq.comps[c * d + j][p];
                }
                force.comps[i * d + j][p] =
                    -coeffs.elastic * s + 0.5 * coeffs.mu2 * wm.e[i][j] + coeffs.mu1 * comm.e[i][j];
            }
        }
    }
    let force = dealias(&force).to_spectral();
    let mut div = vec![vec![num_complex::Complex64::new(0.0, 0.0); grid.spectral_len()]; d];
    for (i, dst) in div.iter_mut().enumerate() {
        for j in 0..d {
            let kd = grid.kd(j);
            let src = &force.comps[i * d + j];
            for s in 0..dst.len() {
                dst[s] += num_complex::Complex64::new(0.0, kd[s]) * src[s];
            }
        }
    }
    leray_in_place(&mut div, grid);
    let residual = crate::spectral::SpectralField {
        grid: grid.clone(),
        rank: Rank::Vector,
        comps: div,
    };
    let grad_sq = spectral_sobolev_sq(&dq.to_spectral(), 0.0);
    residual.energy().sqrt() / (1.0 + grad_sq)
}

/// Smallest grid value of `μ̄₁|Q|² + 4ψ_B(Q)`.
pub fn coercivity_witness(q: &Field, coeffs: &Coefficients, mu1_bar: f64) -> f64 {
    (0..q.grid.len())
        .map(|p| {
            let m: Mat = q.mat_at(p);
            mu1_bar * m.norm_sq() + 4.0 * bulk_density(&m, coeffs)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Header of the energy time-series CSV.
pub const ENERGY_CSV_HEADER: &str = "t,kinetic,rotational,elastic,bulk,total,diss_newtonian,diss_beta1,diss_rotational,cross_mu2tilde,cross_mu2,constraint_residual";

/// Writes energy samples with 17 significant digits.
pub struct EnergyCsv<W: Write> {
    out: W,
}

impl<W: Write> EnergyCsv<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{ENERGY_CSV_HEADER}")?;
        Ok(EnergyCsv { out })
    }

    pub fn row(&mut self, t: f64, e: &EnergyBreakdown, constraint_residual: f64) -> std::io::Result<()> {
        let values = [
            t,
            e.kinetic,
            e.rotational,
            e.elastic,
            e.bulk,
            e.total,
            e.dissipation_newtonian,
            e.dissipation_beta1,
            e.dissipation_rotational,
            e.cross_mu2tilde,
            e.cross_mu2,
            constraint_residual,
        ];
        let line: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(self.out, "{}", line.join(","))
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

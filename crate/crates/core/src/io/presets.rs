use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::SimState;
use crate::error::{QshError, Result};
use crate::spectral::{Field, Grid, Rank};
use crate::twistwave::{lift_profile, RadialGrid};

/// Names accepted by [`initial_data_presets`].
pub const PRESET_NAMES: [&str; 5] = [
    "zero",
    "taylor_green",
    "random_smooth",
    "uniaxial_constant",
    "hedgehog_bump",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PresetParams {
    /// Peak value of `v` and `Q` (max-norm over the grid).
    pub amplitude: f64,
    /// Peak value of `W`; defaults to `amplitude` for random data and 0 otherwise.
    pub w_amplitude: Option<f64>,
    /// Spectral envelope width of `random_smooth`, `e^{−|k|²/k₀²}`.
    pub k0: f64,
    pub seed: u64,
    /// Width σ of the hedgehog bump `f(r) = A (r/σ)² e^{−r²/σ²}`; defaults to
    /// one twelfth of the domain.
    pub width: Option<f64>,
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams {
            amplitude: 0.1,
            w_amplitude: None,
            k0: 2.0,
            seed: 0,
            width: None,
        }
    }
}

pub fn initial_data_presets(
    name: &str,
    params: &PresetParams,
    grid: &Arc<Grid>,
) -> Result<SimState> {
    let d = grid.dim();
    let k1 = 2.0 * PI / grid.domain_length();
    let amp = params.amplitude;
    let state = match name {
        "zero" => SimState::zeros(grid),
        "taylor_green" => {
            let mut s = SimState::zeros(grid);
            s.v = Field::from_fn(grid, Rank::Vector, |x, c| match c {
                0 => amp * (k1 * x[0]).sin() * (k1 * x[1]).cos(),
                1 => -amp * (k1 * x[0]).cos() * (k1 * x[1]).sin(),
                _ => 0.0,
            });
            s
        }
        "random_smooth" => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let mut s = SimState::zeros(grid);
            s.v = random_field(grid, Rank::Vector, params.k0, &mut rng);
            s.q = random_field(grid, Rank::Matrix, params.k0, &mut rng);
            s.w = random_field(grid, Rank::Matrix, params.k0, &mut rng);
            let mut s = s.projected();
            normalize(&mut s.v, amp);
            normalize(&mut s.q, amp);
            normalize(&mut s.w, params.w_amplitude.unwrap_or(amp));
            s
        }
        "uniaxial_constant" => {
            let mut s = SimState::zeros(grid);
            s.q = Field::from_fn(grid, Rank::Matrix, |_, c| {
                let (i, j) = (c / d, c % d);
                let nn = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                let delta = if i == j { 1.0 / d as f64 } else { 0.0 };
                amp * (nn - delta)
            });
            s
        }
        "hedgehog_bump" => {
            let l = grid.domain_length();
            let sigma = params.width.unwrap_or(l / 12.0);
            let radius = 0.5 * l - 2.0 * grid.spacing();
            let radial = RadialGrid::new(radius, 512, d)?;
            let f: Vec<f64> = radial
                .centers()
                .iter()
                .map(|&r| amp * (r / sigma).powi(2) * (-(r / sigma).powi(2)).exp())
                .collect();
            let ft = vec![0.0; f.len()];
            let center = [0.5 * l; 3];
            let (q, w) = lift_profile(&radial, &f, &ft, grid, &center[..d])?;
            let mut s = SimState::zeros(grid);
            s.q = q;
            s.w = w;
            s
        }
        other => return Err(QshError::UnknownPreset(other.to_string())),
    };
    Ok(state)
}

/// White noise filtered by `e^{−|k|²/k₀²}`.
fn random_field(grid: &Arc<Grid>, rank: Rank, k0: f64, rng: &mut ChaCha8Rng) -> Field {
    let mut f = Field::zeros(grid, rank);
    for comp in f.comps.iter_mut() {
        comp.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    }
    let mut spec = f.to_spectral();
    for comp in spec.comps.iter_mut() {
        for (c, k2) in comp.iter_mut().zip(grid.k2()) {
            *c *= (-k2 / (k0 * k0)).exp();
        }
    }
    spec.to_physical()
}

fn normalize(f: &mut Field, amplitude: f64) {
    let m = f.max_abs();
    let s = if m > 0.0 { amplitude / m } else { 0.0 };
    f.comps.iter_mut().flatten().for_each(|x| *x *= s);
}

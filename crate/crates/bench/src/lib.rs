//! Shared fixtures for the criterion benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use qsh_core::io::{initial_data_presets, PresetParams};
use qsh_core::twistwave::{RadialGrid, RadialState};
use qsh_core::{Coefficients, Grid, SimState};

/// Smooth random data on `n^dim` points of the 2π torus.
pub fn random_state(dim: usize, n: usize) -> (Arc<Grid>, SimState) {
    let grid = Grid::new(dim, n, 2.0 * PI).expect("valid grid");
    let params = PresetParams {
        amplitude: 0.1,
        seed: 1,
        ..Default::default()
    };
    let state = initial_data_presets("random_smooth", &params, &grid).expect("known preset");
    (grid, state)
}

pub fn coefficients(dim: usize) -> Coefficients {
    Coefficients {
        beta1: 0.1,
        beta4: 5.0,
        b: if dim == 3 { 1.0 } else { 0.0 },
        dim,
        ..Default::default()
    }
}

/// Gaussian bump `f = 0.1 (r/σ)² e^{−r²/σ²}` on `m` cells of `[0, 4]`.
pub fn radial_bump(m: usize, dim: usize) -> (RadialGrid, RadialState) {
    let grid = RadialGrid::new(4.0, m, dim).expect("valid radial grid");
    let sigma: f64 = 0.5;
    let state = RadialState::from_fn(
        &grid,
        |r| 0.1 * (r / sigma).powi(2) * (-(r / sigma).powi(2)).exp(),
        |_| 0.0,
    );
    (grid, state)
}

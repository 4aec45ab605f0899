#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use qsh_core::dynamics::project_field;
use qsh_core::spectral::leray_project;
use qsh_core::{Field, Grid, Rank, SimState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random real field: six cosines per component with integer modes up to `kmax`.
pub fn band_limited(grid: &Arc<Grid>, rank: Rank, kmax: i64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let k1 = 2.0 * PI / grid.domain_length();
    let mut terms = Vec::new();
    for c in 0..rank.components(d) {
        for _ in 0..6 {
            let k: Vec<f64> = (0..d).map(|_| k1 * rng.gen_range(-kmax..=kmax) as f64).collect();
            terms.push((c, k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)));
        }
    }
    Field::from_fn(grid, rank, |x, c| {
        terms
            .iter()
            .filter(|t| t.0 == c)
            .map(|(_, k, amp, phase)| {
                let arg: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
                amp * (arg + phase).cos()
            })
            .sum()
    })
}

/// Divergence-free `v` and symmetric traceless `Q`, `W`, band-limited to `kmax`.
pub fn random_state(grid: &Arc<Grid>, kmax: i64, amp: f64, seed: u64) -> SimState {
    SimState {
        t: 0.0,
        v: leray_project(&band_limited(grid, Rank::Vector, kmax, seed)).scaled(amp),
        q: project_field(&band_limited(grid, Rank::Matrix, kmax, seed + 1)).scaled(amp),
        w: project_field(&band_limited(grid, Rank::Matrix, kmax, seed + 2)).scaled(amp),
    }
}

pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

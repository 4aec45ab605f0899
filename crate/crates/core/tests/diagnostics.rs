mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::{band_limited, random_state};
use qsh_core::diagnostics::{
    coercivity_witness, energy_breakdown, energy_breakdown_with, energy_law_residual, lyapunov_monitor,
    second_energy_terms, twist_constraint_residual, ElasticConvention, EnergyBreakdown, EnergyCsv,
    LyapunovTracker, ENERGY_CSV_HEADER,
};
use qsh_core::dynamics::{cfl_dt, project_field, step_rk4};
use qsh_core::tensor::bulk_potential;
use qsh_core::{validate, validate_coercivity, Coefficients, Field, Grid, Mat, QTensor, Rank, Regime, SimState};

fn grid(dim: usize, n: usize) -> Arc<Grid> {
    Grid::new(dim, n, 2.0 * PI).unwrap()
}

fn decaying(dim: usize) -> Coefficients {
    let c = Coefficients {
        a: 0.5,
        b: 0.7,
        c: 1.2,
        elastic: 1.0,
        inertia: 0.5,
        mu1: 1.0,
        mu2: 0.0,
        mu2_tilde: 0.0,
        beta1: 0.3,
        beta4: 1.0,
        beta5: 0.0,
        beta6: 0.0,
        dim,
    };
    assert!(validate(&c, Regime::EnergyDecay).ok);
    c
}

fn coupled(dim: usize) -> Coefficients {
    let c = Coefficients {
        mu2: 0.2,
        mu2_tilde: -0.2,
        beta5: -0.1,
        beta6: 0.1,
        ..decaying(dim)
    };
    assert!(validate(&c, Regime::EnergyDecay).ok);
    c
}

fn volume(g: &Grid) -> f64 {
    g.domain_length().powi(g.dim() as i32)
}

#[test]
fn zero_state_has_zero_energy() {
    let g = grid(3, 8);
    let e = energy_breakdown(&SimState::zeros(&g), &decaying(3));
    assert_eq!(e, EnergyBreakdown::default());
    let m = lyapunov_monitor(&SimState::zeros(&g), 2.0).unwrap();
    assert_eq!((m.phi, m.psi), (0.0, 0.0));
    let s = second_energy_terms(&SimState::zeros(&g), &decaying(3));
    assert_eq!((s.combined, s.potential, s.forcing), (0.0, 0.0, 0.0));
}

#[test]
fn uniform_uniaxial_state_has_only_bulk_energy() {
    let g = grid(3, 8);
    let coeffs = Coefficients {
        a: 1.0,
        b: 1.0,
        c: 1.0,
        ..decaying(3)
    };
    let mut s = SimState::zeros(&g);
    let q = Mat::diag(&[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0]);
    for p in 0..g.len() {
        s.q.set_mat(p, &q);
    }
    // |Q|² = 2/3, tr Q³ = 2/9: a/2·2/3 − b/3·2/9 + c/4·4/9
    let density: f64 = 1.0 / 3.0 - 2.0 / 27.0 + 1.0 / 9.0;
    assert!((density - 10.0 / 27.0).abs() < 1e-15);
    let e = energy_breakdown(&s, &coeffs);
    assert!((e.bulk - volume(&g) * 10.0 / 27.0).abs() < 1e-12 * volume(&g));
    assert!(e.kinetic.abs() + e.rotational.abs() + e.elastic.abs() < 1e-14);
    assert_eq!(e.total, e.kinetic + e.rotational + e.elastic + e.bulk);
}

#[test]
fn shear_mode_kinetic_energy() {
    let g = grid(2, 16);
    let mut s = SimState::zeros(&g);
    s.v = Field::from_fn(&g, Rank::Vector, |x, c| if c == 0 { x[1].sin() } else { 0.0 });
    let coeffs = decaying(2);
    let e = energy_breakdown(&s, &coeffs);
    assert!((e.kinetic - volume(&g) / 4.0).abs() < 1e-12);
    // ∫|∇v|² = ∫cos² = volume/2
    assert!((e.dissipation_newtonian - coeffs.beta4 / 2.0 * volume(&g) / 2.0).abs() < 1e-12);
    // Ω contributes to the rotational dissipation only through [Ω,Q] with Q = 0
    assert_eq!(e.dissipation_rotational, 0.0);
}

#[test]
fn elastic_convention_flag() {
    let g = grid(2, 16);
    let mut s = SimState::zeros(&g);
    s.q = Field::from_fn(&g, Rank::Matrix, |x, c| [1.0, 0.0, 0.0, -1.0][c] * x[0].cos());
    let coeffs = decaying(2);
    let half = energy_breakdown_with(&s, &coeffs, ElasticConvention::Half);
    let quarter = energy_breakdown_with(&s, &coeffs, ElasticConvention::Quarter);
    // |∇Q|² = 2 sin²x, integral = volume
    assert!((half.elastic - 0.5 * volume(&g)).abs() < 1e-12);
    assert!((quarter.elastic - 0.25 * volume(&g)).abs() < 1e-12);
    assert_eq!(half.bulk, quarter.bulk);
    assert_eq!("quarter".parse::<ElasticConvention>().unwrap(), ElasticConvention::Quarter);
    assert!("third".parse::<ElasticConvention>().is_err());
}

#[test]
fn breakdown_matches_independent_quadrature() {
    let g = grid(2, 32);
    let coeffs = coupled(2);
    let s = random_state(&g, 3, 0.4, 7);
    let e = energy_breakdown(&s, &coeffs);
    let cell = g.spacing().powi(2);
    let sum = |f: &dyn Fn(usize) -> f64| (0..g.len()).map(f).sum::<f64>() * cell;
    let dv = qsh_core::spectral::gradient(&s.v);
    let dq = qsh_core::spectral::gradient(&s.q);
    let kinetic = sum(&|p| 0.5 * (s.v.comps[0][p].powi(2) + s.v.comps[1][p].powi(2)));
    let rotational = sum(&|p| 0.5 * coeffs.inertia * s.w.mat_at(p).norm_sq());
    let elastic = sum(&|p| 0.5 * coeffs.elastic * dq.comps.iter().map(|c| c[p] * c[p]).sum::<f64>());
    let newt = sum(&|p| 0.5 * coeffs.beta4 * dv.comps.iter().map(|c| c[p] * c[p]).sum::<f64>());
    let bulk = sum(&|p| bulk_potential(&QTensor::new(s.q.mat_at(p)).unwrap(), &coeffs));
    for (got, want) in [
        (e.kinetic, kinetic),
        (e.rotational, rotational),
        (e.elastic, elastic),
        (e.dissipation_newtonian, newt),
        (e.bulk, bulk),
    ] {
        assert!((got - want).abs() < 1e-11 * (1.0 + want.abs()), "{got} vs {want}");
    }
    assert!(e.dissipation_beta1 >= 0.0 && e.dissipation_rotational >= 0.0);
}

#[test]
fn energy_law_residual_needs_three_uniform_samples() {
    let e = EnergyBreakdown::default();
    assert!(energy_law_residual(&[(0.0, e), (0.1, e)]).is_err());
    assert!(energy_law_residual(&[(0.0, e), (0.1, e), (0.3, e)]).is_err());
    let r = energy_law_residual(&[(0.0, e), (0.1, e), (0.2, e), (0.3, e)]).unwrap();
    assert_eq!(r, vec![0.0, 0.0]);
}

#[test]
fn equilibrium_has_zero_residual() {
    let g = grid(2, 16);
    let coeffs = decaying(2);
    let s = SimState::zeros(&g);
    let mut hist = Vec::new();
    let mut cur = s;
    for _ in 0..4 {
        hist.push((cur.t, energy_breakdown(&cur, &coeffs)));
        cur = step_rk4(&cur, &coeffs, 0.01).unwrap();
    }
    assert!(energy_law_residual(&hist).unwrap().iter().all(|r| *r == 0.0));
}

fn residual_history(coeffs: &Coefficients, dt: f64, t_end: f64) -> Vec<(f64, EnergyBreakdown)> {
    let g = grid(2, 32);
    let mut s = random_state(&g, 2, 0.3, 17).projected();
    let steps = (t_end / dt).round() as usize;
    let mut hist = vec![(s.t, energy_breakdown(&s, coeffs))];
    for _ in 0..steps {
        s = step_rk4(&s, coeffs, dt).unwrap();
        hist.push((s.t, energy_breakdown(&s, coeffs)));
    }
    hist
}

#[test]
fn energy_law_residual_converges_under_dt_refinement() {
    for coeffs in [decaying(2), coupled(2)] {
        let t_end = 0.4;
        let maxes: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&dt| {
                let hist = residual_history(&coeffs, dt, t_end);
                if coeffs.mu2 == 0.0 {
                    assert!(hist.iter().all(|(_, e)| e.cross_terms() == 0.0));
                }
                energy_law_residual(&hist)
                    .unwrap()
                    .iter()
                    .fold(0.0f64, |m, r| m.max(r.abs()))
            })
            .collect();
        for w in maxes.windows(2) {
            assert!(w[0] / w[1] >= 3.5, "{maxes:?}");
        }
    }
}

#[test]
fn energy_decays_monotonically() {
    let g = grid(2, 32);
    for coeffs in [decaying(2), coupled(2)] {
        let mut s = random_state(&g, 4, 0.3, 23).projected();
        let dt = 0.5 * cfl_dt(&s, &coeffs);
        let e0 = energy_breakdown(&s, &coeffs).total;
        let mut prev = e0;
        for _ in 0..200 {
            s = step_rk4(&s, &coeffs, dt).unwrap();
            let e = energy_breakdown(&s, &coeffs);
            assert!(e.total - prev <= 1e-8 * e0);
            assert!(e.dissipation_newtonian >= -1e-14);
            assert!(e.dissipation_beta1 >= -1e-14);
            assert!(e.dissipation_rotational >= -1e-14);
            prev = e.total;
        }
        assert!(prev < e0);
    }
}

#[test]
fn second_energy_terms_against_quadrature() {
    let g = grid(3, 8);
    let coeffs = decaying(3);
    let mut s = random_state(&g, 1, 0.5, 31);
    s.w = s.q.clone();
    let t = second_energy_terms(&s, &coeffs);
    let cell = g.spacing().powi(3);
    let qq: f64 = (0..g.len()).map(|p| s.q.mat_at(p).norm_sq()).sum::<f64>() * cell;
    let j = coeffs.inertia;
    let expect = j * 4.0 * qq - j * qq + (coeffs.mu1 - j) * qq;
    assert!((t.combined - expect).abs() < 1e-12 * expect.abs());
    // the cubic term is absent in d = 2
    let g2 = grid(2, 16);
    let s2 = random_state(&g2, 2, 0.5, 32);
    let a = second_energy_terms(&s2, &decaying(2));
    let b = second_energy_terms(&s2, &Coefficients { b: 9.0, ..decaying(2) });
    assert_eq!(a.potential, b.potential);
    assert_eq!(a.forcing, a.potential);
}

#[test]
fn lyapunov_monitor_of_a_single_mode() {
    let g = grid(2, 16);
    let mut s = SimState::zeros(&g);
    // Q = cos(x₁ + 2x₂)·E with |E|² = 2, so ‖Q‖²_{L²} = volume
    s.q = Field::from_fn(&g, Rank::Matrix, |x, c| [1.0, 0.0, 0.0, -1.0][c] * (x[0] + 2.0 * x[1]).cos());
    let k2: f64 = 5.0;
    let vol = volume(&g);
    for sidx in [1.0, 2.0, 3.0] {
        let m = lyapunov_monitor(&s, sidx).unwrap();
        let weight = 1.0 + k2.powf(sidx);
        let expect = vol * weight * (1.0 + k2);
        assert!((m.phi - expect).abs() < 1e-10 * expect, "s={sidx}: {} vs {expect}", m.phi);
        assert!((m.psi - expect).abs() < 1e-10 * expect);
        assert!(m.phi >= 0.0);
    }
    assert!(lyapunov_monitor(&s, -1.0).is_err());
    let m = lyapunov_monitor(&s, 1.5).unwrap();
    assert!(m.above_embedding(2) && !m.above_embedding(3));
    let r = random_state(&g, 3, 0.5, 3);
    let m = lyapunov_monitor(&r, 2.0).unwrap();
    assert!(m.phi >= r.v.to_spectral().energy());
}

#[test]
fn lyapunov_tracker_accumulates() {
    let mut t = LyapunovTracker::default();
    assert!(t.bounded(1.0, 1.0));
    for (i, phi) in [2.0, 3.0, 1.0].iter().enumerate() {
        let m = qsh_core::diagnostics::LyapunovMonitor { phi: *phi, psi: 1.0, s: 2.0 };
        t.record(i as f64, &m);
    }
    assert_eq!(t.phi0, Some(2.0));
    assert_eq!(t.sup_phi, 3.0);
    assert!((t.psi_integral - 2.0).abs() < 1e-15);
    assert!(t.bounded(1.5, 1.0) && !t.bounded(1.4, 1.0));
}

#[test]
fn constraint_residual_examples() {
    let g = grid(2, 32);
    let coeffs = coupled(2);
    let mut q = Field::zeros(&g, Rank::Matrix);
    for p in 0..g.len() {
        q.set_mat(p, &Mat::from_rows(&[&[0.3, 0.2], &[0.2, -0.3]]));
    }
    let zero = Field::zeros(&g, Rank::Matrix);
    assert!(twist_constraint_residual(&q, &zero, &coeffs) < 1e-15);
    let q = project_field(&band_limited(&g, Rank::Matrix, 3, 41));
    let w = project_field(&band_limited(&g, Rank::Matrix, 3, 42));
    assert!(twist_constraint_residual(&q, &w, &coeffs) > 1e-3);
}

#[test]
fn coercivity_witness_is_nonnegative_along_a_trajectory() {
    let g = grid(3, 8);
    let coeffs = Coefficients {
        a: -0.3,
        b: 1.5,
        ..decaying(3)
    };
    let bar = validate_coercivity(&coeffs).unwrap();
    assert!(bar > 0.0);
    let mut s = random_state(&g, 1, 1.5, 51).projected();
    let dt = 0.5 * cfl_dt(&s, &coeffs);
    for _ in 0..20 {
        assert!(coercivity_witness(&s.q, &coeffs, bar) >= -1e-10);
        s = step_rk4(&s, &coeffs, dt).unwrap();
    }
    // below the threshold the witness can go negative
    let mut q = Field::zeros(&g, Rank::Matrix);
    let uni = Mat::diag(&[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0]);
    let best = (0..400)
        .map(|i| {
            let rho = 0.01 * i as f64;
            for p in 0..g.len() {
                q.set_mat(p, &uni.scale(rho));
            }
            coercivity_witness(&q, &coeffs, 0.9 * bar)
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best < 0.0);
}

#[test]
fn bulk_is_independent_of_b_in_two_dimensions() {
    let g = grid(2, 16);
    let s = random_state(&g, 3, 0.6, 61);
    let a = energy_breakdown(&s, &decaying(2));
    let b = energy_breakdown(&s, &Coefficients { b: -4.0, ..decaying(2) });
    assert_eq!(a.bulk, b.bulk);
}

#[test]
fn energy_csv_format() {
    let g = grid(2, 16);
    let s = random_state(&g, 2, 0.3, 71);
    let e = energy_breakdown(&s, &coupled(2));
    let mut csv = EnergyCsv::new(Vec::new()).unwrap();
    csv.row(0.125, &e, 1e-9).unwrap();
    let text = String::from_utf8(csv.into_inner()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), ENERGY_CSV_HEADER);
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row.len(), ENERGY_CSV_HEADER.split(',').count());
    assert_eq!(row[0], 0.125);
    assert_eq!(row[5].to_bits(), e.total.to_bits());
    assert_eq!(row[9].to_bits(), e.cross_mu2tilde.to_bits());
}

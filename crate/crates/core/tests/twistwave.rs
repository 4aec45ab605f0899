use std::f64::consts::PI;
use std::sync::Arc;

use qsh_core::diagnostics::twist_constraint_residual;
use qsh_core::tensor::commutator;
use qsh_core::twistwave::{
    compare_full_vs_radial, extract_axis_profile, lift_profile, lift_to_tensor, origin_values,
    profile_spline, radial_cfl_dt, radial_energy, radial_laplacian, radial_rhs, radial_step,
    write_profile_csv, CubicSpline, RadialWeight,
};
use qsh_core::{Coefficients, Grid, QshError, RadialGrid, RadialState};

fn coeffs(dim: usize) -> Coefficients {
    Coefficients {
        dim,
        ..Coefficients::default()
    }
}

fn bump(amp: f64, sigma: f64) -> impl Fn(f64) -> f64 {
    move |r| amp * (r / sigma).powi(2) * (-(r / sigma).powi(2)).exp()
}

fn weighted_l2(grid: &RadialGrid, e: &[f64]) -> f64 {
    let h = grid.spacing();
    let p = grid.dim() as i32 - 1;
    (e.iter()
        .enumerate()
        .map(|(j, x)| x * x * grid.center(j).powi(p))
        .sum::<f64>()
        * h)
        .sqrt()
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// `f = r²(R−r)²e^{−r}` and its radial operator, differentiated by hand.
fn test_profile(big_r: f64) -> (impl Fn(f64) -> f64, impl Fn(f64, usize) -> f64) {
    let f = move |r: f64| r * r * (big_r - r).powi(2) * (-r).exp();
    let lf = move |r: f64, d: usize| {
        let g = big_r * big_r * r * r - 2.0 * big_r * r.powi(3) + r.powi(4);
        let g1 = 2.0 * big_r * big_r * r - 6.0 * big_r * r * r + 4.0 * r.powi(3);
        let g2 = 2.0 * big_r * big_r - 12.0 * big_r * r + 12.0 * r * r;
        let e = (-r).exp();
        let f0 = g * e;
        let f1 = (g1 - g) * e;
        let f2 = (g2 - 2.0 * g1 + g) * e;
        let d = d as f64;
        f2 + (d - 1.0) / r * f1 - 2.0 * d / (r * r) * f0
    };
    (f, lf)
}

#[test]
fn radial_grid_invariants() {
    assert!(RadialGrid::new(1.0, 15, 2).is_err());
    assert!(RadialGrid::new(0.0, 32, 2).is_err());
    assert!(RadialGrid::new(1.0, 32, 4).is_err());
    let g = RadialGrid::new(2.0, 16, 3).unwrap();
    assert_eq!(g.center(0), 0.0625);
    assert!(g.centers().iter().all(|&r| r > 0.0 && r < 2.0));
}

#[test]
fn zero_state_is_a_fixed_point() {
    for d in [2, 3] {
        let g = RadialGrid::new(3.0, 64, d).unwrap();
        let s = RadialState::zeros(&g);
        let (a, b) = radial_rhs(&s, &coeffs(d), &g);
        assert!(a.iter().chain(&b).all(|&x| x == 0.0));
        let next = radial_step(&s, &coeffs(d), &g, 1e-3).unwrap();
        assert!(next.f.iter().chain(&next.ft).all(|&x| x == 0.0));
        let e = radial_energy(&s, &coeffs(d), &g, RadialWeight::Squared);
        assert_eq!((e.energy, e.dissipation), (0.0, 0.0));
    }
}

#[test]
fn static_profile_has_no_dissipation() {
    let g = RadialGrid::new(4.0, 64, 3).unwrap();
    let s = RadialState::from_fn(&g, bump(0.3, 0.8), |_| 0.0);
    let e = radial_energy(&s, &coeffs(3), &g, RadialWeight::Squared);
    assert_eq!(e.dissipation, 0.0);
    assert!(e.energy > 0.0);
}

#[test]
fn quadratic_term_is_absent_in_two_dimensions() {
    let g = RadialGrid::new(4.0, 128, 2).unwrap();
    let mut c0 = coeffs(2);
    c0.b = 0.0;
    let mut c7 = c0.clone();
    c7.b = 7.0;
    let mut s0 = RadialState::from_fn(&g, bump(0.5, 0.7), |r| 0.1 * r * r * (-r * r).exp());
    let mut s7 = s0.clone();
    for _ in 0..200 {
        s0 = radial_step(&s0, &c0, &g, 1e-3).unwrap();
        s7 = radial_step(&s7, &c7, &g, 1e-3).unwrap();
    }
    assert_eq!(s0, s7);
}

#[test]
fn operator_is_second_order_for_smooth_profiles() {
    // Even profile: the lifted field is smooth and the error is O(h²) in max norm.
    for d in [2, 3] {
        let f = |r: f64| r * r * (-r * r).exp();
        let lf = |r: f64| {
            let e = (-r * r).exp();
            let f1 = (2.0 * r - 2.0 * r.powi(3)) * e;
            let f2 = (2.0 - 10.0 * r * r + 4.0 * r.powi(4)) * e;
            f2 + (d as f64 - 1.0) / r * f1 - 2.0 * d as f64 / (r * r) * f(r)
        };
        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&m| {
                let g = RadialGrid::new(7.0, m, d).unwrap();
                let vals: Vec<f64> = g.centers().iter().map(|&r| f(r)).collect();
                let lap = radial_laplacian(&g, &vals);
                g.centers()
                    .iter()
                    .zip(&lap)
                    .map(|(&r, &l)| (l - lf(r)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(order(errs[0], errs[1]) > 1.9, "d={d} {errs:?}");
        assert!(order(errs[1], errs[2]) > 1.9, "d={d} {errs:?}");
    }
}

#[test]
fn rhs_refinement_for_the_polynomial_exponential_profile() {
    // r²(R−r)²e^{−r} carries an r³ term, so the first cells see an O(h) error
    // from the 1/r coefficient; the measure r^{d−1}dr of the reduction
    // weights it away. d=3 is clean second order; d=2 carries h²·√log(1/h).
    let big_r = 1.0;
    let (f, lf) = test_profile(big_r);
    let c = Coefficients {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        elastic: 1.0,
        inertia: 1.0,
        mu1: 0.0,
        ..Coefficients::default()
    };
    for (d, min_order) in [(3, 1.9), (2, 1.8)] {
        let errs: Vec<f64> = [64, 128, 256, 512]
            .iter()
            .map(|&m| {
                let g = RadialGrid::new(big_r, m, d).unwrap();
                let s = RadialState::from_fn(&g, &f, |_| 0.0);
                let (_, ftt) = radial_rhs(&s, &c, &g);
                let e: Vec<f64> = g
                    .centers()
                    .iter()
                    .zip(&ftt)
                    .map(|(&r, &x)| x - lf(r, d))
                    .collect();
                weighted_l2(&g, &e)
            })
            .collect();
        for w in errs.windows(2) {
            assert!(order(w[0], w[1]) >= min_order, "d={d} {errs:?}");
        }
    }
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let w = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= w * a[k][j];
            }
            b[i] -= w * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

#[test]
fn linear_eigenmode_matches_damped_oscillator() {
    let d = 3;
    let g = RadialGrid::new(5.0, 32, d).unwrap();
    let m = g.cells();
    let c = Coefficients {
        a: 0.5,
        b: 0.0,
        c: 0.0,
        elastic: 1.0,
        inertia: 0.4,
        mu1: 0.3,
        ..Coefficients::default()
    };
    // dense matrix of f ↦ L·Δ_r f − a f, built column by column
    let mut k = vec![vec![0.0; m]; m];
    for col in 0..m {
        let mut e = vec![0.0; m];
        e[col] = 1.0;
        let l = radial_laplacian(&g, &e);
        for row in 0..m {
            k[row][col] = c.elastic * l[row] - if row == col { c.a } else { 0.0 };
        }
    }
    // inverse iteration for the eigenvalue of smallest magnitude
    let mut x = vec![1.0; m];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let y = solve(k.clone(), x.clone());
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.iter().map(|v| v / norm).collect();
        let kx: Vec<f64> = (0..m).map(|i| (0..m).map(|j| k[i][j] * x[j]).sum()).collect();
        lambda = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
    }
    let kx: Vec<f64> = (0..m).map(|i| (0..m).map(|j| k[i][j] * x[j]).sum()).collect();
    let resid = kx.iter().zip(&x).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
    assert!(resid < 1e-10 && lambda < 0.0, "eigenpair residual {resid}, λ = {lambda}");

    // J y'' + μ₁ y' = λ y, y(0) = 1, y'(0) = 0
    let t_end = 2.0;
    let gamma = c.mu1 / (2.0 * c.inertia);
    let omega = (-lambda / c.inertia - gamma * gamma).sqrt();
    let y = |t: f64| (-gamma * t).exp() * ((omega * t).cos() + gamma / omega * (omega * t).sin());
    let errs: Vec<f64> = [0.02, 0.01, 0.005, 0.0025]
        .iter()
        .map(|&dt| {
            let mut s = RadialState {
                t: 0.0,
                f: x.clone(),
                ft: vec![0.0; m],
            };
            let steps = (t_end / dt as f64).round() as usize;
            for _ in 0..steps {
                s = radial_step(&s, &c, &g, dt).unwrap();
            }
            s.f.iter()
                .zip(&x)
                .map(|(f, phi)| (f - y(t_end) * phi).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errs.windows(2) {
        assert!(order(w[0], w[1]) > 3.8, "{errs:?}");
    }
}

#[test]
fn small_data_decays_in_two_dimensions() {
    let g = RadialGrid::new(8.0, 128, 2).unwrap();
    let c = coeffs(2);
    let mut s = RadialState::from_fn(&g, bump(0.1, 1.0), |_| 0.0);
    let dt = radial_cfl_dt(&s, &c, &g, 0.4);
    let norm = |s: &RadialState| weighted_l2(&g, &s.f);
    let n0 = norm(&s);
    let mut e_prev = radial_energy(&s, &c, &g, RadialWeight::Natural).energy;
    for _ in 0..(10.0 / dt) as usize {
        s = radial_step(&s, &c, &g, dt).unwrap();
        let e = radial_energy(&s, &c, &g, RadialWeight::Natural).energy;
        assert!(e <= e_prev + 1e-12 * e_prev.abs().max(1e-300), "energy rose {e_prev} → {e}");
        e_prev = e;
    }
    assert!(norm(&s) < 1e-3 * n0, "{} vs {}", norm(&s), n0);
}

fn balance_residual(d: usize, m: usize, weight: RadialWeight) -> f64 {
    let big_r = 8.0;
    let g = RadialGrid::new(big_r, m, d).unwrap();
    let c = Coefficients {
        a: 1.0,
        b: 0.5,
        c: 1.0,
        elastic: 1.0,
        inertia: 0.5,
        mu1: 0.7,
        dim: d,
        ..Coefficients::default()
    };
    let mut s = RadialState::from_fn(&g, bump(0.8, 1.0), |r| 0.3 * r * r * (-r * r).exp());
    let dt = 0.25 * big_r / m as f64;
    let mut worst = 0.0f64;
    let mut e0 = radial_energy(&s, &c, &g, weight);
    for _ in 0..(1.0 / dt).round() as usize {
        let next = radial_step(&s, &c, &g, dt).unwrap();
        let e1 = radial_energy(&next, &c, &g, weight);
        let r = e1.energy - e0.energy + 0.5 * dt * (e0.dissipation + e1.dissipation);
        worst = worst.max(r.abs());
        s = next;
        e0 = e1;
    }
    worst
}

#[test]
fn energy_balance_converges_under_refinement() {
    for (d, weight) in [(3, RadialWeight::Squared), (2, RadialWeight::Natural)] {
        let r: Vec<f64> = [128, 256, 512].iter().map(|&m| balance_residual(d, m, weight)).collect();
        for w in r.windows(2) {
            assert!(order(w[0], w[1]) >= 1.9, "d={d} {r:?}");
        }
    }
}

#[test]
fn origin_conditions_hold_along_trajectories() {
    for d in [2, 3] {
        let g = RadialGrid::new(6.0, 256, d).unwrap();
        let c = coeffs(d);
        let mut s = RadialState::from_fn(&g, bump(0.5, 0.8), |r| -0.2 * r * r * (-r * r).exp());
        let dt = radial_cfl_dt(&s, &c, &g, 0.4);
        for n in 0..(1.0 / dt) as usize {
            if n % 50 == 0 {
                let o = origin_values(&s, &g);
                assert!(o.ok, "d={d} t={} {o:?}", s.t);
            }
            s = radial_step(&s, &c, &g, dt).unwrap();
        }
    }
}

#[test]
fn spline_interpolates_and_converges() {
    let f = |x: f64| (2.0 * x).sin() * (-x * x).exp();
    let err = |n: usize| {
        let x: Vec<f64> = (0..=n).map(|i| -3.0 + 6.0 * i as f64 / n as f64).collect();
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let s = CubicSpline::new(x.clone(), y.clone()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((s.eval(*a) - b).abs() < 1e-14);
        }
        (0..1000)
            .map(|i| -2.0 + 4.0 * i as f64 / 999.0)
            .map(|t| (s.eval(t) - f(t)).abs())
            .fold(0.0, f64::max)
    };
    assert!(order(err(64), err(128)) > 3.8);
    assert!(CubicSpline::new(vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
}

fn tensor_grid(dim: usize, n: usize) -> Arc<Grid> {
    Grid::new(dim, n, 4.0 * PI).unwrap()
}

fn lifted(dim: usize, n: usize, amp: f64) -> (Arc<Grid>, RadialGrid, RadialState) {
    let grid = tensor_grid(dim, n);
    let radius = 0.5 * grid.domain_length() - 2.0 * grid.spacing();
    let radial = RadialGrid::new(radius, 512, dim).unwrap();
    let s = RadialState::from_fn(&radial, bump(amp, 0.9), bump(-0.5 * amp, 0.9));
    (grid, radial, s)
}

#[test]
fn zero_profile_lifts_to_zero() {
    let (grid, radial, _) = lifted(2, 32, 1.0);
    let zero = RadialState::zeros(&radial);
    let (q, w) = lift_to_tensor(&zero, &radial, &grid, &[2.0 * PI, 2.0 * PI]).unwrap();
    assert_eq!(q.max_abs(), 0.0);
    assert_eq!(w.max_abs(), 0.0);
}

#[test]
fn lifted_fields_are_symmetric_traceless_and_commute() {
    for d in [2, 3] {
        let n = if d == 2 { 64 } else { 24 };
        let (grid, radial, s) = lifted(d, n, 0.4);
        let center = vec![2.0 * PI; d];
        let (q, w) = lift_to_tensor(&s, &radial, &grid, &center).unwrap();
        let scale = q.max_abs() * w.max_abs();
        for p in 0..grid.len() {
            let qm = q.mat_at(p);
            let wm = w.mat_at(p);
            assert!(qm.is_symmetric_traceless(1e-15));
            assert!(wm.is_symmetric_traceless(1e-15));
            let comm = commutator(&qm, &wm);
            assert!(comm.norm() <= 1e-13 * scale);
        }
        // the centre is a grid point, where both fields vanish
        let h = grid.spacing();
        let idx = (0..d).fold(0, |acc, _| acc * n + (2.0 * PI / h).round() as usize);
        assert_eq!(q.mat_at(idx).norm(), 0.0);
    }
}

#[test]
fn axis_extraction_round_trips() {
    let (grid, radial, s) = lifted(2, 128, 0.4);
    let center = [2.0 * PI, 2.0 * PI];
    let (q, _) = lift_to_tensor(&s, &radial, &grid, &center).unwrap();
    let spline = profile_spline(&radial, &s.f).unwrap();
    let f = bump(0.4, 0.9);
    for (r, value) in extract_axis_profile(&q, &center).unwrap() {
        if r > 0.0 && r < radial.radius() {
            assert!((value - spline.eval(r)).abs() < 1e-14, "r={r}");
            assert!((value - f(r)).abs() < 1e-8, "r={r}: {value} vs {}", f(r));
        }
    }
}

#[test]
fn lift_rejects_profiles_that_wrap() {
    let grid = tensor_grid(2, 32);
    let radial = RadialGrid::new(10.0, 64, 2).unwrap();
    let f: Vec<f64> = radial.centers().iter().map(|&r| (-(r - 5.0).powi(2)).exp()).collect();
    let err = lift_profile(&radial, &f, &vec![0.0; 64], &grid, &[2.0 * PI, 2.0 * PI]);
    assert!(matches!(err, Err(QshError::InvalidArgument(_))));
    let bad_dim = RadialGrid::new(5.0, 64, 3).unwrap();
    let err = lift_profile(&bad_dim, &vec![0.0; 64], &vec![0.0; 64], &grid, &[0.0, 0.0]);
    assert!(matches!(err, Err(QshError::ShapeMismatch(_))));
}

#[test]
fn lifted_hedgehog_satisfies_the_constraint() {
    for d in [2, 3] {
        let n = if d == 2 { 128 } else { 48 };
        let (grid, radial, s) = lifted(d, n, 0.4);
        let mut c = coeffs(d);
        c.mu2 = 0.6;
        let (q, w) = lift_to_tensor(&s, &radial, &grid, &vec![2.0 * PI; d]).unwrap();
        let r = twist_constraint_residual(&q, &w, &c);
        assert!(r <= 1e-6, "d={d}: {r}");
    }
}

#[test]
fn compare_with_zero_profile_has_no_discrepancy() {
    let (grid, radial, _) = lifted(2, 32, 0.0);
    let zero = RadialState::zeros(&radial);
    let report = compare_full_vs_radial(&zero, &coeffs(2), &grid, &radial, 0.01, 1e-3, 5).unwrap();
    assert_eq!(report.final_discrepancy, 0.0);
    assert_eq!(report.max_constraint_residual, 0.0);
    assert_eq!(report.steps, 10);
    assert!(report.warnings.is_empty());
}

#[test]
fn compare_tracks_the_full_solver() {
    let (grid, radial, _) = lifted(2, 64, 0.3);
    let s = RadialState::from_fn(&radial, bump(0.3, 1.2), |_| 0.0);
    let c = coeffs(2);
    let report = compare_full_vs_radial(&s, &c, &grid, &radial, 0.2, 1e-3, 50).unwrap();
    assert_eq!(report.rows.len(), 5);
    assert!(report.final_discrepancy < 1e-3, "{report:?}");
    assert!(report.max_constraint_residual < 1e-5);
    assert!(report.origin_ok);
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,l2_discrepancy,constraint_residual\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn three_dimensional_compare_warns() {
    let (grid, radial, _) = lifted(3, 16, 0.0);
    let zero = RadialState::zeros(&radial);
    let report = compare_full_vs_radial(&zero, &coeffs(3), &grid, &radial, 0.002, 1e-3, 1).unwrap();
    assert_eq!(report.warnings.len(), 1);
}

#[test]
fn profile_csv_has_seventeen_digits() {
    let g = RadialGrid::new(1.0, 16, 2).unwrap();
    let s = RadialState::from_fn(&g, |r| r / 3.0, |_| 0.0);
    let mut out = Vec::new();
    write_profile_csv(&s, &g, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,f,ft"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[1], g.center(0) / 3.0);
}

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

/// Plans for the `d`-dimensional real transform: r2c along the last axis,
/// complex transforms along the others.
pub(crate) struct Plans {
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plans {
    pub(crate) fn new(n: usize) -> Self {
        let mut real = RealFftPlanner::<f64>::new();
        let mut complex = FftPlanner::<f64>::new();
        Plans {
            r2c: real.plan_fft_forward(n),
            c2r: real.plan_fft_inverse(n),
            forward: complex.plan_fft_forward(n),
            inverse: complex.plan_fft_inverse(n),
        }
    }
}

impl std::fmt::Debug for Plans {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Plans")
    }
}

/// Gathers every line along `axis` of a row-major complex array with the
/// given shape into a contiguous buffer, transforms them in one batch and
/// scatters back.
fn transform_axis(data: &mut [Complex64], shape: &[usize], axis: usize, fft: &dyn Fft<f64>) {
    let len = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut lines = vec![Complex64::new(0.0, 0.0); data.len()];
    let mut l = 0;
    for o in 0..outer {
        let base = o * len * stride;
        for s in 0..stride {
            for i in 0..len {
                lines[l * len + i] = data[base + i * stride + s];
            }
            l += 1;
        }
    }
    fft.process(&mut lines);
    let mut l = 0;
    for o in 0..outer {
        let base = o * len * stride;
        for s in 0..stride {
            for i in 0..len {
                data[base + i * stride + s] = lines[l * len + i];
            }
            l += 1;
        }
    }
}

pub(crate) fn forward(plans: &Plans, dim: usize, n: usize, phys: &[f64], out: &mut [Complex64]) {
    let nh = n / 2 + 1;
    let rows = phys.len() / n;
    let mut row = vec![0.0; n];
    let mut scratch = plans.r2c.make_scratch_vec();
    for r in 0..rows {
        row.copy_from_slice(&phys[r * n..(r + 1) * n]);
        plans
            .r2c
            .process_with_scratch(&mut row, &mut out[r * nh..(r + 1) * nh], &mut scratch)
            .expect("r2c buffer sizes");
    }
    let shape = spectral_shape(dim, n);
    for axis in 0..dim - 1 {
        transform_axis(out, &shape, axis, plans.forward.as_ref());
    }
    let norm = 1.0 / phys.len() as f64;
    for c in out.iter_mut() {
        *c *= norm;
    }
}

/// Inverse transform; `spec` is used as workspace and left unspecified.
pub(crate) fn inverse_in_place(
    plans: &Plans,
    dim: usize,
    n: usize,
    spec: &mut [Complex64],
    out: &mut [f64],
) {
    let nh = n / 2 + 1;
    let shape = spectral_shape(dim, n);
    for axis in 0..dim - 1 {
        transform_axis(spec, &shape, axis, plans.inverse.as_ref());
    }
    let rows = out.len() / n;
    let mut scratch = plans.c2r.make_scratch_vec();
    for r in 0..rows {
        let line = &mut spec[r * nh..(r + 1) * nh];
        line[0].im = 0.0;
        line[nh - 1].im = 0.0;
        plans
            .c2r
            .process_with_scratch(line, &mut out[r * n..(r + 1) * n], &mut scratch)
            .expect("c2r buffer sizes");
    }
}

pub(crate) fn spectral_shape(dim: usize, n: usize) -> Vec<usize> {
    let mut shape = vec![n; dim];
    shape[dim - 1] = n / 2 + 1;
    shape
}

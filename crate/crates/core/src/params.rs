//! Material and viscosity coefficients, admissibility checks and presets.

use serde::Serialize;

use crate::error::{QshError, Result};

/// Every coefficient of the inertial Qian-Sheng system, non-dimensional.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coefficients {
    /// Landau-de Gennes bulk coefficients.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// One-constant elastic diffusion coefficient `L`.
    pub elastic: f64,
    /// Inertial density `J` multiplying the second material derivative.
    pub inertia: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu2_tilde: f64,
    pub beta1: f64,
    pub beta4: f64,
    pub beta5: f64,
    pub beta6: f64,
    pub dim: usize,
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            elastic: 1.0,
            inertia: 0.1,
            mu1: 1.0,
            mu2: 0.0,
            mu2_tilde: 0.0,
            beta1: 0.0,
            beta4: 10.0,
            beta5: 0.0,
            beta6: 0.0,
            dim: 2,
        }
    }
}

/// Names accepted in the `[coefficients]` config section, in file order.
pub const COEFFICIENT_KEYS: [&str; 12] = [
    "a", "b", "c", "L", "J", "mu1", "mu2", "mu2_tilde", "beta1", "beta4", "beta5", "beta6",
];

impl Coefficients {
    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "a" => self.a,
            "b" => self.b,
            "c" => self.c,
            "L" => self.elastic,
            "J" => self.inertia,
            "mu1" => self.mu1,
            "mu2" => self.mu2,
            "mu2_tilde" => self.mu2_tilde,
            "beta1" => self.beta1,
            "beta4" => self.beta4,
            "beta5" => self.beta5,
            "beta6" => self.beta6,
            _ => return None,
        })
    }

    /// Sets a coefficient by its config name. Returns `false` for unknown names.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match key {
            "a" => &mut self.a,
            "b" => &mut self.b,
            "c" => &mut self.c,
            "L" => &mut self.elastic,
            "J" => &mut self.inertia,
            "mu1" => &mut self.mu1,
            "mu2" => &mut self.mu2,
            "mu2_tilde" => &mut self.mu2_tilde,
            "beta1" => &mut self.beta1,
            "beta4" => &mut self.beta4,
            "beta5" => &mut self.beta5,
            "beta6" => &mut self.beta6,
            _ => return false,
        };
        *slot = value;
        true
    }

    /// Flat `key = value` lines, the same shape `load_config` reads back.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for key in COEFFICIENT_KEYS {
            out.push_str(&format!("{key} = {:?}\n", self.get(key).unwrap()));
        }
        out
    }
}

/// Which set of hypotheses `validate` checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Hypotheses of the energy-decay law.
    EnergyDecay,
    /// Hypotheses of the small-data global existence result.
    SmallData,
    /// Only `J > 0` and `L > 0`.
    Unconstrained,
}

impl std::str::FromStr for Regime {
    type Err = QshError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy_decay" => Ok(Regime::EnergyDecay),
            "small_data" => Ok(Regime::SmallData),
            "unconstrained" => Ok(Regime::Unconstrained),
            other => Err(QshError::InvalidArgument(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub condition: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    /// Coercivity threshold from [`validate_coercivity`]; `None` when `c <= 0`.
    pub mu1_bar: Option<f64>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn has_violation(&self, condition: &str) -> bool {
        self.violations.iter().any(|v| v.condition == condition)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ok = {}", self.ok)?;
        match self.mu1_bar {
            Some(m) => writeln!(f, "mu1_bar = {m:.9}")?,
            None => writeln!(f, "mu1_bar = n/a (c <= 0)")?,
        }
        for v in &self.violations {
            writeln!(f, "violation [{}]: {}", v.condition, v.message)?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs()))
}

/// Checks the hypotheses of the selected regime. Never fails; every violated
/// condition is listed in the report.
pub fn validate(coeffs: &Coefficients, regime: Regime) -> ValidationReport {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    let mut fail = |condition: &str, message: String| {
        violations.push(Violation {
            condition: condition.to_string(),
            message,
        })
    };
    let k = coeffs;

    if k.dim != 2 && k.dim != 3 {
        fail("dim", format!("dimension must be 2 or 3, got {}", k.dim));
    }
    if !(k.inertia > 0.0) {
        fail("J>0", format!("J>0 fails (J = {})", k.inertia));
    }
    if !(k.elastic > 0.0) {
        fail("L>0", format!("L>0 fails (L = {})", k.elastic));
    }

    match regime {
        Regime::Unconstrained => {}
        Regime::EnergyDecay => {
            if !close(k.beta6 - k.beta5, k.mu2) {
                fail(
                    "parodi",
                    format!(
                        "β₆−β₅=μ₂ fails ({} − {} ≠ {})",
                        k.beta6, k.beta5, k.mu2
                    ),
                );
            }
            if !close(k.beta5 + k.beta6, 0.0) {
                fail(
                    "corotational",
                    format!("β₅+β₆=0 fails (β₅+β₆ = {})", k.beta5 + k.beta6),
                );
            }
            let both_zero = close(k.mu2, 0.0) && close(k.mu2_tilde, 0.0);
            let opposite = close(k.mu2_tilde, -k.mu2);
            if !(both_zero || opposite) {
                fail(
                    "mu2cond",
                    format!(
                        "need μ̃₂=μ₂=0 or μ̃₂=−μ₂ (μ̃₂ = {}, μ₂ = {})",
                        k.mu2_tilde, k.mu2
                    ),
                );
            }
            if k.beta1 < 0.0 {
                fail("beta1>=0", format!("β₁≥0 fails (β₁ = {})", k.beta1));
            }
            if !(k.beta4 > 0.0) {
                fail("beta4>0", format!("β₄>0 fails (β₄ = {})", k.beta4));
            }
            if k.mu1 < 0.0 {
                fail("mu1>=0", format!("μ₁≥0 fails (μ₁ = {})", k.mu1));
            }
            if !(k.c > 0.0) {
                fail("c>0", format!("c>0 fails (c = {})", k.c));
            }
            let crude = k.mu2_tilde.abs() + k.mu2.abs() + k.beta5.abs() + k.beta6.abs();
            if k.beta4 <= crude {
                warnings.push(format!(
                    "β₄ = {} does not exceed |μ̃₂|+|μ₂|+|β₅|+|β₆| = {crude}; energy decay relies on the runtime check",
                    k.beta4
                ));
            }
        }
        Regime::SmallData => {
            for (name, value) in [("beta1", k.beta1), ("mu1", k.mu1), ("a", k.a), ("beta4", k.beta4)] {
                if !(value > 0.0) {
                    fail(
                        &format!("{name}>0"),
                        format!("{name}>0 fails ({name} = {value})"),
                    );
                }
            }
            warnings.push(
                "the inertia threshold J₀ and smallness radius are not computed; use the Lyapunov monitor"
                    .to_string(),
            );
        }
    }

    let mu1_bar = validate_coercivity(coeffs).ok();
    if regime == Regime::SmallData {
        match mu1_bar {
            Some(bar) if k.mu1 <= bar => fail(
                "mu1>mu1_bar",
                format!("μ₁ > μ̄₁ fails (μ₁ = {}, μ̄₁ = {bar})", k.mu1),
            ),
            None => warnings.push("c <= 0: coercivity threshold μ̄₁ undefined".to_string()),
            _ => {}
        }
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
        mu1_bar,
        warnings,
    }
}

/// Smallest `μ̄₁ ≥ 0` with `μ̄₁|Q|² + 4ψ_B(Q) ≥ 0` for every symmetric traceless `Q`.
///
/// Writing `Q = ρQ̂` with `|Q̂| = 1`, the condition reads
/// `μ̄₁ + 2a − (4b/3)ρ tr(Q̂³) + cρ² ≥ 0`. The unit directions are swept through
/// their eigenvalue triples, the quadratic in `ρ` is minimised in closed form and
/// `μ̄₁` is located by bisection.
pub fn validate_coercivity(coeffs: &Coefficients) -> Result<f64> {
    let Coefficients { a, b, c, dim, .. } = *coeffs;
    if !(c > 0.0) {
        return Err(QshError::InvalidArgument(format!(
            "coercivity threshold needs c > 0, got {c}"
        )));
    }
    const SAMPLES: usize = 3600;
    let cubic_traces: Vec<f64> = if dim == 3 {
        let scale = (2.0f64 / 3.0).sqrt();
        (0..SAMPLES)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / SAMPLES as f64;
                let third = 2.0 * std::f64::consts::PI / 3.0;
                [theta, theta - third, theta + third]
                    .iter()
                    .map(|t| (scale * t.cos()).powi(3))
                    .sum()
            })
            .collect()
    } else {
        vec![0.0]
    };

    let admissible = |mu: f64| {
        cubic_traces.iter().all(|&tau| {
            let slope = 4.0 * b / 3.0 * tau;
            let min = if slope > 0.0 {
                mu + 2.0 * a - slope * slope / (4.0 * c)
            } else {
                mu + 2.0 * a
            };
            min >= 0.0
        })
    };

    if admissible(0.0) {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !admissible(hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-10 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if admissible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// MBBA viscosity ratios scaled by `mu1`. The bulk, elastic and inertial
/// coefficients are placeholders and the returned warnings say so.
pub fn preset_mbba(mu1: f64) -> Result<(Coefficients, Vec<String>)> {
    if !(mu1 > 0.0) {
        return Err(QshError::InvalidArgument(format!(
            "MBBA preset needs mu1 > 0, got {mu1}"
        )));
    }
    let mu2 = -1.92 * mu1;
    let coeffs = Coefficients {
        a: 1.0,
        b: 1.0,
        c: 1.0,
        elastic: 1.0,
        inertia: 0.1,
        mu1,
        mu2,
        mu2_tilde: -mu2,
        beta1: 0.17 * mu1,
        beta4: 0.7 * mu1,
        beta5: 0.7 * mu1,
        beta6: -0.79 * mu1,
        dim: 3,
    };
    let warnings = vec![
        "a, b, c, L, J are placeholder defaults (1, 1, 1, 1, 0.1), not MBBA data".to_string(),
        "mu2_tilde set to -mu2".to_string(),
    ];
    Ok((coeffs, warnings))
}

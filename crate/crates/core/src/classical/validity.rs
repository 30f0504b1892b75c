use serde::{Deserialize, Serialize};

use crate::numerics::{integrate_adaptive, Tolerance};

/// Result of probing whether an intensity defines a proper next-event
/// distribution: it must be positive and its compensator must diverge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// `(T, Λ*(T))` for every horizon of the schedule.
    pub compensator: Vec<(f64, f64)>,
    /// Probe times where the intensity was not strictly positive (or not finite).
    pub positivity_violations: Vec<f64>,
    /// `F*(T_max) = 1 − e^(−Λ*(T_max))`.
    pub cdf_at_horizon: f64,
    /// `F*(T_max) ≥ 1 − ε`.
    pub reaches_unit_mass: bool,
    /// Relative growth of `Λ*` across the last two horizons fell below 1e-6.
    pub plateaued: bool,
    pub valid: bool,
}

const PROBES_PER_SEGMENT: usize = 64;
const PLATEAU_GROWTH: f64 = 1e-6;
const UNIT_MASS_EPS: f64 = 1e-6;

/// Checks positivity of `intensity` and divergence of `∫_{t_j}^T λ*(t) dt`
/// along an increasing schedule of absolute horizons `T > t_j`.
pub fn validate_intensity<F: Fn(f64) -> f64>(
    intensity: F,
    t_j: f64,
    horizon_schedule: &[f64],
) -> ValidityReport {
    let tol = Tolerance {
        abs: 1e-14,
        rel: 1e-12,
        max_subdivisions: 4000,
    };
    let mut compensator = Vec::with_capacity(horizon_schedule.len());
    let mut violations = Vec::new();
    let mut acc = 0.0;
    let mut lo = t_j;
    let mut quadrature_failed = false;
    let increasing = !horizon_schedule.is_empty()
        && horizon_schedule[0] > t_j
        && horizon_schedule.windows(2).all(|w| w[0] < w[1]);

    if increasing {
        for &hi in horizon_schedule {
            for k in 0..=PROBES_PER_SEGMENT {
                let t = lo + (hi - lo) * k as f64 / PROBES_PER_SEGMENT as f64;
                let v = intensity(t);
                if !(v > 0.0 && v.is_finite()) {
                    violations.push(t);
                }
            }
            match integrate_adaptive(&intensity, lo, hi, &tol) {
                Ok(v) => acc += v,
                Err(_) => {
                    quadrature_failed = true;
                    acc = f64::NAN;
                }
            }
            compensator.push((hi, acc));
            lo = hi;
        }
    }

    let last = compensator.last().map(|&(_, v)| v).unwrap_or(0.0);
    let plateaued = match compensator.len() {
        0 => true,
        1 => false,
        n => {
            let (a, b) = (compensator[n - 2].1, compensator[n - 1].1);
            !(b.is_infinite()) && (b - a) <= PLATEAU_GROWTH * b.abs()
        }
    };
    let cdf_at_horizon = -(-last).exp_m1();
    ValidityReport {
        reaches_unit_mass: cdf_at_horizon >= 1.0 - UNIT_MASS_EPS,
        valid: increasing && !quadrature_failed && violations.is_empty() && !plateaued,
        compensator,
        positivity_violations: violations,
        cdf_at_horizon,
        plateaued,
    }
}

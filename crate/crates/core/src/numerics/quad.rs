use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Error targets for adaptive quadrature.
///
/// Integration stops once the accumulated error bound is below
/// `max(abs, rel · |estimate|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64, max_subdivisions: usize) -> Result<Self, NumericsError> {
        let tol = Self {
            abs,
            rel,
            max_subdivisions,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.abs > 0.0 && self.abs.is_finite()) {
            return Err(NumericsError::InvalidTolerance(format!("abs = {}", self.abs)));
        }
        if !(self.rel > 0.0 && self.rel.is_finite()) {
            return Err(NumericsError::InvalidTolerance(format!("rel = {}", self.rel)));
        }
        if self.max_subdivisions < 1 {
            return Err(NumericsError::InvalidTolerance(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-11,
            max_subdivisions: 4000,
        }
    }
}

/// Exponential envelope `|f(t)| ≤ coefficient · e^(−rate (t − a))` for `t ≥ a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpEnvelope {
    pub coefficient: f64,
    pub rate: f64,
}

impl ExpEnvelope {
    /// Bound on `∫_T^∞ |f|` given the envelope anchored at `a`.
    pub fn tail_bound(&self, a: f64, t: f64) -> f64 {
        self.coefficient / self.rate * (-self.rate * (t - a)).exp()
    }
}

// Gauss-Kronrod 7/15 nodes and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment, NumericsError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |t: f64| {
        let v = f(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(NumericsError::NonFiniteIntegrand(t))
        }
    };
    let fc = eval(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        kronrod += wk * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let raw_error = ((kronrod - gauss) * half).abs();
    // |K15 - G7|, floored at a few ulps of the segment value
    let error = raw_error.max(50.0 * f64::EPSILON * value.abs());
    Ok(Segment { a, b, value, error })
}

fn adaptive_finite<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: &Tolerance,
) -> Result<f64, NumericsError> {
    if a == b {
        return Ok(0.0);
    }
    let mut heap = BinaryHeap::new();
    let first = gauss_kronrod(f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    heap.push(first);
    let mut subdivisions = 1;
    while total_err > tol.abs.max(tol.rel * total.abs()) {
        if subdivisions >= tol.max_subdivisions {
            return Err(NumericsError::NonConvergence {
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // segment cannot be split further in floating point
            return Err(NumericsError::NonConvergence {
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let left = gauss_kronrod(f, worst.a, mid)?;
        let right = gauss_kronrod(f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
        // re-sum periodically so cancellation in the running totals cannot drift
        if subdivisions % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// `b` may be `f64::INFINITY`; the half line is then mapped onto `(0, 1]`
/// with `t = a + (1 − u)/u`, which requires `f` to decay at least like an
/// integrable power. Use [`integrate_with_envelope`] when an exponential
/// bound on the integrand is known.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: &Tolerance,
) -> Result<f64, NumericsError> {
    tol.validate()?;
    if !a.is_finite() || b.is_nan() || b == f64::NEG_INFINITY {
        return Err(NumericsError::Domain {
            function: "integrate_adaptive",
            value: a,
        });
    }
    if b.is_finite() {
        if b < a {
            return Ok(-adaptive_finite(&f, b, a, tol)?);
        }
        return adaptive_finite(&f, a, b, tol);
    }
    let mapped = |u: f64| {
        let x = (1.0 - u) / u;
        let v = f(a + x);
        if v == 0.0 {
            0.0
        } else {
            v / (u * u)
        }
    };
    adaptive_finite(&mapped, 0.0, 1.0, tol)
}

/// Integrates `f` over `[a, ∞)` by truncating where the caller's envelope
/// certifies the remaining tail is below half the absolute tolerance.
pub fn integrate_with_envelope<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    envelope: ExpEnvelope,
    tol: &Tolerance,
) -> Result<f64, NumericsError> {
    tol.validate()?;
    if !(envelope.rate > 0.0 && envelope.coefficient >= 0.0) {
        return Err(NumericsError::Domain {
            function: "integrate_with_envelope",
            value: envelope.rate,
        });
    }
    let budget = 0.5 * tol.abs;
    let cut = if envelope.coefficient == 0.0 {
        return Ok(0.0);
    } else {
        let needed = (envelope.coefficient / (envelope.rate * budget)).ln() / envelope.rate;
        a + needed.max(0.0)
    };
    let inner = Tolerance {
        abs: budget,
        ..*tol
    };
    adaptive_finite(&f, a, cut, &inner)
}

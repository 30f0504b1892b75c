use serde::{Deserialize, Serialize};

use super::TpmError;
use crate::numerics::scaled_exp_integral_e1;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Waiting-time law of the next event given `h_j`, in the time unit of
/// the data.
///
/// `Growing` has intensity `exp(log_rate + slope·(t − t_j))` with
/// `slope > 0`; `Constant` has intensity `exp(log_rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum TimeDistribution {
    Growing { log_rate: f64, slope: f64 },
    Constant { log_rate: f64 },
}

impl TimeDistribution {
    pub fn intensity(&self, dt: f64) -> f64 {
        match *self {
            Self::Growing { log_rate, slope } => (log_rate + slope * dt).exp(),
            Self::Constant { log_rate } => log_rate.exp(),
        }
    }

    /// Integrated intensity over `[t_j, t_j + dt]`.
    pub fn compensator(&self, dt: f64) -> f64 {
        match *self {
            Self::Growing { log_rate, slope } => (log_rate - slope.ln()).exp() * (slope * dt).exp_m1(),
            Self::Constant { log_rate } => log_rate.exp() * dt,
        }
    }

    pub fn log_density(&self, dt: f64) -> f64 {
        match *self {
            Self::Growing { log_rate, slope } => log_rate + slope * dt - self.compensator(dt),
            Self::Constant { log_rate } => log_rate - self.compensator(dt),
        }
    }

    pub fn density(&self, dt: f64) -> f64 {
        self.log_density(dt).exp()
    }

    pub fn cdf(&self, dt: f64) -> f64 {
        -(-self.compensator(dt)).exp_m1()
    }

    /// Mean waiting time. For the growing law this is `e^η E1(η) / slope`
    /// with `η = e^log_rate / slope`.
    pub fn expected_interval(&self) -> f64 {
        match *self {
            Self::Constant { log_rate } => (-log_rate).exp(),
            Self::Growing { log_rate, slope } => {
                let eta = (log_rate - slope.ln()).exp();
                if !eta.is_finite() {
                    return (-log_rate).exp();
                }
                match scaled_exp_integral_e1(eta) {
                    Ok(v) => v / slope,
                    // η underflowed to 0, where E1(η) = −γ − ln η + O(η)
                    Err(_) => (slope.ln() - log_rate - EULER_GAMMA) / slope,
                }
            }
        }
    }
}

/// Head A: `λ(t) = exp(v·h + w(t − t_j) + b)` with `w = exp(rho)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityHeadA {
    pub v: Vec<f64>,
    pub rho: f64,
    pub b: f64,
}

impl IntensityHeadA {
    pub fn w(&self) -> f64 {
        self.rho.exp()
    }

    pub fn distribution(&self, h: &[f64]) -> TimeDistribution {
        TimeDistribution::Growing {
            log_rate: dot(&self.v, h) + self.b,
            slope: self.w(),
        }
    }
}

/// Head B: `λ(t) = exp(w·h + b)`, constant between events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityHeadB {
    pub w: Vec<f64>,
    pub b: f64,
}

impl IntensityHeadB {
    pub fn distribution(&self, h: &[f64]) -> TimeDistribution {
        TimeDistribution::Constant {
            log_rate: dot(&self.w, h) + self.b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeHead {
    A(IntensityHeadA),
    B(IntensityHeadB),
}

impl TimeHead {
    pub fn distribution(&self, h: &[f64]) -> TimeDistribution {
        match self {
            TimeHead::A(a) => a.distribution(h),
            TimeHead::B(b) => b.distribution(h),
        }
    }
}

pub fn intensity_a(h: &[f64], t: f64, t_j: f64, head: &IntensityHeadA) -> Result<f64, TpmError> {
    if t < t_j {
        return Err(TpmError::BeforeLastEvent { t, last: t_j });
    }
    Ok(head.distribution(h).intensity(t - t_j))
}

pub fn intensity_b(h: &[f64], head: &IntensityHeadB) -> f64 {
    head.distribution(h).intensity(0.0)
}

/// `log f*(t_next)` for the head's waiting-time law.
pub fn time_log_likelihood(head: &TimeHead, h: &[f64], t_j: f64, t_next: f64) -> Result<f64, TpmError> {
    if !(t_next > t_j) {
        return Err(TpmError::BeforeLastEvent { t: t_next, last: t_j });
    }
    Ok(head.distribution(h).log_density(t_next - t_j))
}

/// `t_j` plus the mean waiting time.
pub fn predict_time(head: &TimeHead, h: &[f64], t_j: f64) -> f64 {
    t_j + head.distribution(h).expected_interval()
}

/// Softmax classifier over `k` classes, `w` row-major `k × H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryHead {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl CategoryHead {
    pub fn logits(&self, h: &[f64]) -> Vec<f64> {
        let hd = h.len();
        self.b
            .iter()
            .enumerate()
            .map(|(k, b)| dot(&self.w[k * hd..(k + 1) * hd], h) + b)
            .collect()
    }

    pub fn distribution(&self, h: &[f64]) -> Vec<f64> {
        softmax(&self.logits(h))
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Negative cross-entropy against the one-hot truth, `log p̂_true`.
pub fn category_log_likelihood(head: &CategoryHead, h: &[f64], true_class: usize) -> Result<f64, TpmError> {
    let logits = head.logits(h);
    if true_class >= logits.len() {
        return Err(TpmError::ClassOutOfRange {
            class: true_class,
            n: logits.len(),
        });
    }
    Ok(log_softmax(&logits)[true_class])
}

/// Index of the largest probability; ties go to the lowest index.
pub fn predict_category(distribution: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in distribution.iter().enumerate() {
        if p > distribution[best] {
            best = i;
        }
    }
    best
}

/// Gaussian over the space shift with mean `scale·(W h + b)` and fixed
/// diagonal standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceHead {
    pub w: Vec<f64>,
    pub b: [f64; 2],
    pub sigma: [f64; 2],
    pub scale: f64,
}

impl SpaceHead {
    pub fn new(w: Vec<f64>, b: [f64; 2], sigma: [f64; 2], scale: f64) -> Result<Self, TpmError> {
        if !(sigma[0] > 0.0 && sigma[1] > 0.0) {
            return Err(TpmError::Config(format!("sigma must be positive, got {sigma:?}")));
        }
        Ok(Self { w, b, sigma, scale })
    }

    pub fn mean(&self, h: &[f64]) -> (f64, f64) {
        let hd = h.len();
        (
            self.scale * (dot(&self.w[..hd], h) + self.b[0]),
            self.scale * (dot(&self.w[hd..2 * hd], h) + self.b[1]),
        )
    }
}

/// Full Gaussian log density of `shift`, normalizer included.
pub fn space_log_likelihood(head: &SpaceHead, h: &[f64], shift: (f64, f64)) -> f64 {
    let mu = head.mean(h);
    gaussian_log_density(mu, head.sigma, shift)
}

pub fn gaussian_log_density(mu: (f64, f64), sigma: [f64; 2], s: (f64, f64)) -> f64 {
    let zx = (s.0 - mu.0) / sigma[0];
    let zy = (s.1 - mu.1) / sigma[1];
    -(2.0 * std::f64::consts::PI * sigma[0] * sigma[1]).ln() - 0.5 * (zx * zx + zy * zy)
}

/// Current position plus the expected shift.
pub fn predict_location(mu: (f64, f64), current: (f64, f64)) -> (f64, f64) {
    (current.0 + mu.0, current.1 + mu.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate_adaptive, Tolerance};

    fn head_a(exponent: f64, w: f64) -> IntensityHeadA {
        IntensityHeadA {
            v: vec![0.0],
            rho: w.ln(),
            b: exponent,
        }
    }

    fn head_b(exponent: f64) -> IntensityHeadB {
        IntensityHeadB {
            w: vec![0.0],
            b: exponent,
        }
    }

    #[test]
    fn intensity_examples() {
        let a = head_a(0.0, 1.0);
        assert_eq!(intensity_a(&[1.0], 3.0, 3.0, &a).unwrap(), 1.0);
        assert!((intensity_a(&[1.0], 5.0, 3.0, &a).unwrap() - 7.38906).abs() < 1e-5);
        assert!(intensity_a(&[1.0], 2.0, 3.0, &a).is_err());
        assert_eq!(intensity_b(&[1.0], &head_b(0.0)), 1.0);
        assert!((intensity_b(&[1.0], &head_b(2f64.ln())) - 2.0).abs() < 1e-15);
        assert_eq!(head_b(0.0).distribution(&[0.0]).density(0.0), 1.0);
    }

    #[test]
    fn time_log_likelihood_examples() {
        let b = TimeHead::B(head_b(0.0));
        assert_eq!(time_log_likelihood(&b, &[0.0], 0.0, 1.0).unwrap(), -1.0);
        let a = TimeHead::A(head_a(0.0, 1.0));
        let v = time_log_likelihood(&a, &[0.0], 0.0, 1.0).unwrap();
        assert!((v - (2.0 - std::f64::consts::E)).abs() < 1e-14);
        assert!((v + 0.71828).abs() < 1e-5);
    }

    #[test]
    fn predict_time_examples() {
        assert_eq!(predict_time(&TimeHead::B(head_b(0.0)), &[0.0], 4.0), 5.0);
        let a = predict_time(&TimeHead::A(head_a(0.0, 1.0)), &[0.0], 0.0);
        assert!((a - 0.59635).abs() < 1e-5, "{a}");
        let mut prev = f64::INFINITY;
        for w in [1e-2, 1e-3, 1e-4] {
            let gap = (predict_time(&TimeHead::A(head_a(0.0, w)), &[0.0], 0.0) - 1.0).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn expected_interval_matches_quadrature() {
        let tol = Tolerance::default();
        for (a, w) in [(0.3, 0.5), (-2.0, 3.0), (1.5, 0.01)] {
            let d = TimeDistribution::Growing { log_rate: a, slope: w };
            let q = integrate_adaptive(|t| t * d.density(t), 0.0, f64::INFINITY, &tol).unwrap();
            assert!((d.expected_interval() / q - 1.0).abs() < 1e-8, "{a} {w}");
        }
    }

    #[test]
    fn category_examples() {
        let hot = CategoryHead {
            w: vec![0.0; 4],
            b: vec![800.0, 0.0, 0.0, 0.0],
        };
        assert_eq!(category_log_likelihood(&hot, &[0.0], 0).unwrap(), 0.0);
        let uniform = CategoryHead {
            w: vec![0.0; 4],
            b: vec![0.3; 4],
        };
        let v = category_log_likelihood(&uniform, &[0.0], 2).unwrap();
        assert!((v - 0.25f64.ln()).abs() < 1e-15);
        assert!((v + 1.38629).abs() < 1e-5);
        assert!(category_log_likelihood(&uniform, &[0.0], 4).is_err());

        assert_eq!(predict_category(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(predict_category(&[0.25; 4]), 0);
        let logits = [0.1, 2.0, -1.0];
        let shifted: Vec<f64> = logits.iter().map(|z| z + 123.0).collect();
        assert_eq!(predict_category(&softmax(&logits)), predict_category(&softmax(&shifted)));
        assert!((softmax(&logits).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn space_examples() {
        let head = |sigma| SpaceHead::new(vec![0.0; 2], [0.0, 0.0], sigma, 1.0).unwrap();
        let c = -(2.0 * std::f64::consts::PI).ln();
        assert!((space_log_likelihood(&head([1.0, 1.0]), &[0.0], (0.0, 0.0)) - c).abs() < 1e-15);
        assert!((space_log_likelihood(&head([1.0, 1.0]), &[0.0], (1.0, 0.0)) - (c - 0.5)).abs() < 1e-15);
        let v = space_log_likelihood(&head([2.0, 2.0]), &[0.0], (2.0, 2.0));
        assert!((v - ((1.0 / (8.0 * std::f64::consts::PI)).ln() - 1.0)).abs() < 1e-14);
        assert!((c + 1.83788).abs() < 1e-5);
        assert!(SpaceHead::new(vec![0.0; 2], [0.0, 0.0], [0.0, 1.0], 1.0).is_err());

        // one transition with a confident correct class, s = μ and a unit-rate
        // head B over Δt = 1 costs exactly 1 once constants are dropped
        let hot = CategoryHead {
            w: vec![0.0; 4],
            b: vec![800.0, 0.0, 0.0, 0.0],
        };
        let ll = time_log_likelihood(&TimeHead::B(head_b(0.0)), &[0.0], 3.0, 4.0).unwrap()
            + category_log_likelihood(&hot, &[0.0], 0).unwrap()
            + space_log_likelihood(&head([2.0, 2.0]), &[0.0], (0.0, 0.0))
            - gaussian_log_density((0.0, 0.0), [2.0, 2.0], (0.0, 0.0));
        assert_eq!(-ll, 1.0);

        assert_eq!(predict_location((2.0, -1.0), (10.0, 5.0)), (12.0, 4.0));
        assert_eq!(predict_location((0.0, 0.0), (10.0, 5.0)), (10.0, 5.0));
    }
}

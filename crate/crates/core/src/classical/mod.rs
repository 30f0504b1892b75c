//! Classical temporal point processes: homogeneous Poisson, Hawkes with an
//! exponential kernel, and the self-correcting process.
//!
//! Each family has a closed-form conditional intensity and compensator.
//! Densities follow from `f*(t) = λ*(t) exp(−Λ*(t))` and
//! `F*(t) = 1 − exp(−Λ*(t))`, where `Λ*` integrates the intensity from the
//! last observed event.

mod fit;
mod simulate;
mod validity;

pub use fit::{fit_mle, log_likelihood, FitReport};
pub use simulate::sample_thinning;
pub use validity::{validate_intensity, ValidityReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{integrate_adaptive, NumericsError, Tolerance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassicalError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid history: {0}")]
    InvalidHistory(String),
    #[error("time {t} precedes the last event at {last}")]
    BeforeLastEvent { t: f64, last: f64 },
    #[error("no events to fit")]
    EmptyData,
    #[error("invalid simulation window ({start}, {end}]")]
    InvalidWindow { start: f64, end: f64 },
    #[error("expected next time diverges: survival does not vanish")]
    Divergent,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonParams {
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub lambda: f64,
    pub alpha: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfCorrectingParams {
    pub mu: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Poisson,
    Hawkes,
    SelfCorrecting,
}

impl std::str::FromStr for Family {
    type Err = ClassicalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "poisson" => Ok(Family::Poisson),
            "hawkes" => Ok(Family::Hawkes),
            "self-correcting" | "selfcorrecting" => Ok(Family::SelfCorrecting),
            other => Err(ClassicalError::InvalidParameter(format!(
                "unknown family `{other}`"
            ))),
        }
    }
}

/// A parameterized classical point process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassicalModel {
    Poisson(PoissonParams),
    Hawkes(HawkesParams),
    SelfCorrecting(SelfCorrectingParams),
}

/// Observed event times of one sequence together with its start time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    event_times: Vec<f64>,
    origin: f64,
}

impl History {
    pub fn new(origin: f64, event_times: Vec<f64>) -> Result<Self, ClassicalError> {
        if !origin.is_finite() {
            return Err(ClassicalError::InvalidHistory("origin is not finite".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for &t in &event_times {
            if !t.is_finite() || t < origin {
                return Err(ClassicalError::InvalidHistory(format!(
                    "event time {t} is not finite or precedes origin {origin}"
                )));
            }
            if t <= prev {
                return Err(ClassicalError::InvalidHistory(format!(
                    "event times not strictly increasing at {t}"
                )));
            }
            prev = t;
        }
        Ok(Self {
            event_times,
            origin,
        })
    }

    pub fn empty(origin: f64) -> Self {
        Self {
            event_times: Vec::new(),
            origin,
        }
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.event_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.event_times.is_empty()
    }

    /// Time of the last event, or the origin when nothing happened yet.
    pub fn last_time(&self) -> f64 {
        self.event_times.last().copied().unwrap_or(self.origin)
    }

    /// History truncated to its first `n` events.
    pub fn prefix(&self, n: usize) -> History {
        History {
            event_times: self.event_times[..n.min(self.len())].to_vec(),
            origin: self.origin,
        }
    }

    /// Total observed time, from origin to the last event.
    pub fn observed_span(&self) -> f64 {
        self.last_time() - self.origin
    }
}

fn positive(name: &str, v: f64) -> Result<(), ClassicalError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ClassicalError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl ClassicalModel {
    pub fn poisson(lambda: f64) -> Result<Self, ClassicalError> {
        positive("lambda", lambda)?;
        Ok(Self::Poisson(PoissonParams { lambda }))
    }

    pub fn hawkes(lambda: f64, alpha: f64, gamma: f64) -> Result<Self, ClassicalError> {
        positive("lambda", lambda)?;
        positive("alpha", alpha)?;
        positive("gamma", gamma)?;
        Ok(Self::Hawkes(HawkesParams {
            lambda,
            alpha,
            gamma,
        }))
    }

    pub fn self_correcting(mu: f64, alpha: f64) -> Result<Self, ClassicalError> {
        positive("mu", mu)?;
        positive("alpha", alpha)?;
        Ok(Self::SelfCorrecting(SelfCorrectingParams { mu, alpha }))
    }

    /// Checks the positivity invariants; useful after deserialization.
    pub fn validate(&self) -> Result<(), ClassicalError> {
        match *self {
            Self::Poisson(p) => Self::poisson(p.lambda).map(|_| ()),
            Self::Hawkes(p) => Self::hawkes(p.lambda, p.alpha, p.gamma).map(|_| ()),
            Self::SelfCorrecting(p) => Self::self_correcting(p.mu, p.alpha).map(|_| ()),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Poisson(_) => Family::Poisson,
            Self::Hawkes(_) => Family::Hawkes,
            Self::SelfCorrecting(_) => Family::SelfCorrecting,
        }
    }

    fn check_time(t: f64, history: &History) -> Result<(), ClassicalError> {
        let last = history.last_time();
        if !(t >= last) {
            return Err(ClassicalError::BeforeLastEvent { t, last });
        }
        Ok(())
    }

    /// Conditional intensity `λ*(t)` for `t ≥ t_j`, counting every event of
    /// the history.
    pub fn intensity(&self, t: f64, history: &History) -> Result<f64, ClassicalError> {
        Self::check_time(t, history)?;
        Ok(self.intensity_unchecked(t, history))
    }

    pub(crate) fn intensity_unchecked(&self, t: f64, history: &History) -> f64 {
        match *self {
            Self::Poisson(p) => p.lambda,
            Self::Hawkes(p) => {
                let excitation: f64 = history
                    .event_times
                    .iter()
                    .map(|&ti| (-p.gamma * (t - ti)).exp())
                    .sum();
                p.lambda + p.alpha * excitation
            }
            Self::SelfCorrecting(p) => {
                let n = history.len() as f64;
                (p.mu * (t - history.origin) - p.alpha * n).exp()
            }
        }
    }

    /// Compensator `Λ*(t) = ∫_{t_j}^t λ*(u) du` in closed form.
    pub fn compensator(&self, t: f64, history: &History) -> Result<f64, ClassicalError> {
        Self::check_time(t, history)?;
        Ok(self.compensator_unchecked(t, history))
    }

    pub(crate) fn compensator_unchecked(&self, t: f64, history: &History) -> f64 {
        let last = history.last_time();
        let dt = t - last;
        match *self {
            Self::Poisson(p) => p.lambda * dt,
            Self::Hawkes(p) => {
                let excitation: f64 = history
                    .event_times
                    .iter()
                    .map(|&ti| (-p.gamma * (last - ti)).exp())
                    .sum();
                p.lambda * dt - p.alpha / p.gamma * excitation * (-p.gamma * dt).exp_m1()
            }
            Self::SelfCorrecting(p) => {
                let n = history.len() as f64;
                let base = p.mu * (last - history.origin) - p.alpha * n;
                // e^base (e^(μ dt) − 1) / μ
                (base + (p.mu * dt).exp_m1().ln()).exp() / p.mu
            }
        }
    }

    /// Density and distribution function of the next event time.
    pub fn next_event_pdf_cdf(&self, t: f64, history: &History) -> Result<(f64, f64), ClassicalError> {
        let lambda = self.intensity(t, history)?;
        let big_lambda = self.compensator_unchecked(t, history);
        let survival = (-big_lambda).exp();
        Ok((lambda * survival, -(-big_lambda).exp_m1()))
    }

    /// `Λ*(t)` by quadrature of the intensity, independent of the closed forms.
    pub fn compensator_by_quadrature(
        &self,
        t: f64,
        history: &History,
        tol: &Tolerance,
    ) -> Result<f64, ClassicalError> {
        Self::check_time(t, history)?;
        Ok(integrate_adaptive(
            |u| self.intensity_unchecked(u, history),
            history.last_time(),
            t,
            tol,
        )?)
    }

    /// Expected time of the next event, `∫ t f*(t) dt`, evaluated as
    /// `t_j + ∫_0^∞ S*(t_j + x) dx` by adaptive quadrature.
    pub fn expected_next_time(&self, history: &History) -> Result<f64, ClassicalError> {
        let last = history.last_time();
        let rate = self.intensity_unchecked(last, history);
        let scale = 1.0 / rate;
        let far = last + 1e8 * scale;
        if self.compensator_unchecked(far, history) < 50.0 {
            return Err(ClassicalError::Divergent);
        }
        let tol = Tolerance {
            abs: 1e-12,
            rel: 1e-10,
            max_subdivisions: 4000,
        };
        let mean_scaled = integrate_adaptive(
            |y| (-self.compensator_unchecked(last + scale * y, history)).exp(),
            0.0,
            f64::INFINITY,
            &tol,
        )?;
        Ok(last + scale * mean_scaled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn intensity_examples() {
        let h = History::new(0.0, vec![4.0]).unwrap();
        let p = ClassicalModel::poisson(2.0).unwrap();
        assert_eq!(p.intensity(7.0, &h).unwrap(), 2.0);

        let hk = ClassicalModel::hawkes(1.0, 0.5, 1.0).unwrap();
        assert!(close(hk.intensity(5.0, &h).unwrap(), 1.0 + 0.5 * (-1.0f64).exp(), 1e-15));
        assert!(close(hk.intensity(5.0, &h).unwrap(), 1.18394, 1e-5));

        let sc = ClassicalModel::self_correcting(1.0, 0.5).unwrap();
        let h1 = History::new(0.0, vec![0.5]).unwrap();
        assert!(close(sc.intensity(1.0, &h1).unwrap(), 1.64872, 1e-5));
    }

    #[test]
    fn intensity_before_last_event_is_rejected() {
        let h = History::new(0.0, vec![1.0, 2.0]).unwrap();
        let p = ClassicalModel::poisson(1.0).unwrap();
        assert!(matches!(p.intensity(1.5, &h), Err(ClassicalError::BeforeLastEvent { .. })));
    }

    #[test]
    fn parameters_must_be_positive() {
        assert!(ClassicalModel::poisson(0.0).is_err());
        assert!(ClassicalModel::hawkes(1.0, -0.1, 1.0).is_err());
        assert!(ClassicalModel::self_correcting(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn history_must_increase() {
        assert!(History::new(0.0, vec![1.0, 1.0]).is_err());
        assert!(History::new(2.0, vec![1.0]).is_err());
    }

    #[test]
    fn poisson_pdf_cdf() {
        let h = History::new(0.0, vec![3.0]).unwrap();
        let p = ClassicalModel::poisson(2.0).unwrap();
        let (f, cdf) = p.next_event_pdf_cdf(4.0, &h).unwrap();
        assert!(close(cdf, 0.86466, 1e-5));
        assert!(close(f, 0.27067, 1e-5));
        let (_, at_last) = p.next_event_pdf_cdf(3.0, &h).unwrap();
        assert_eq!(at_last, 0.0);
    }

    #[test]
    fn hawkes_cdf_matches_quadrature() {
        let h = History::new(0.0, vec![2.0]).unwrap();
        let hk = ClassicalModel::hawkes(1.0, 0.5, 1.0).unwrap();
        let quad = hk
            .compensator_by_quadrature(3.0, &h, &Tolerance::default())
            .unwrap();
        let expected = 1.0 - (-quad).exp();
        let (_, cdf) = hk.next_event_pdf_cdf(3.0, &h).unwrap();
        assert!((cdf - expected).abs() < 1e-12);
        let closed = 1.0 - (-(1.0 + 0.5 * (1.0 - (-1.0f64).exp()))).exp();
        assert!((cdf - closed).abs() < 1e-12);
    }

    #[test]
    fn poisson_expected_time() {
        let h = History::new(0.0, vec![1.0, 3.0]).unwrap();
        let e2 = ClassicalModel::poisson(2.0).unwrap().expected_next_time(&h).unwrap();
        let e1 = ClassicalModel::poisson(1.0).unwrap().expected_next_time(&h).unwrap();
        assert!((e2 - 3.5).abs() < 1e-9);
        assert!((e1 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn family_parse() {
        assert_eq!("self-correcting".parse::<Family>().unwrap(), Family::SelfCorrecting);
        assert_eq!("Hawkes".parse::<Family>().unwrap(), Family::Hawkes);
        assert!("weibull".parse::<Family>().is_err());
    }

    #[test]
    fn serde_tagged_form() {
        let m = ClassicalModel::hawkes(0.5, 0.8, 1.2).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"family":"hawkes","lambda":0.5,"alpha":0.8,"gamma":1.2}"#);
        let back: ClassicalModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}

use serde::{Deserialize, Serialize};

use super::{ClassicalError, ClassicalModel, Family, History};
use crate::numerics::{minimize_bfgs, BfgsOptions};

/// Outcome of a maximum-likelihood fit. `converged == false` means the
/// iteration cap was hit and `model` is the best iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ClassicalModel,
    pub log_likelihood: f64,
    pub n_events: usize,
    pub n_sequences: usize,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// Summed log-likelihood `Σ log f*(t_k)` over all sequences. The window of
/// each sequence closes at its last event, so there is no survival term.
pub fn log_likelihood(model: &ClassicalModel, sequences: &[History]) -> f64 {
    match *model {
        ClassicalModel::Poisson(p) => poisson_ll(p.lambda, sequences),
        ClassicalModel::Hawkes(p) => hawkes_ll_grad(p.lambda, p.alpha, p.gamma, sequences).0,
        ClassicalModel::SelfCorrecting(p) => sc_ll_grad(p.mu, p.alpha, sequences).0,
    }
}

fn poisson_ll(lambda: f64, sequences: &[History]) -> f64 {
    let n: usize = sequences.iter().map(History::len).sum();
    let span: f64 = sequences.iter().map(History::observed_span).sum();
    n as f64 * lambda.ln() - lambda * span
}

/// Returns the log-likelihood and its gradient with respect to
/// `(λ, α, γ)` using the usual O(n) recursions.
fn hawkes_ll_grad(lambda: f64, alpha: f64, gamma: f64, sequences: &[History]) -> (f64, [f64; 3]) {
    let mut ll = 0.0;
    let mut g = [0.0; 3];
    for h in sequences {
        let times = h.event_times();
        let Some(&first) = times.first() else {
            continue;
        };
        // before the first event: λ over (origin, t_1]
        let span = first - h.origin();
        ll += lambda.ln() - lambda * span;
        g[0] += 1.0 / lambda - span;

        // a = Σ_{i<k} e^{-γ(t_k - t_i)}, b = ∂a/∂γ
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for w in times.windows(2) {
            let dt = w[1] - w[0];
            let decay = (-gamma * dt).exp();
            let (e, de) = (a + 1.0, b);
            a = e * decay;
            b = de * decay - dt * a;

            let rate = lambda + alpha * a;
            let comp_exc = e - a;
            ll += rate.ln() - lambda * dt - alpha / gamma * comp_exc;
            g[0] += 1.0 / rate - dt;
            g[1] += a / rate - comp_exc / gamma;
            g[2] += alpha * b / rate + alpha / (gamma * gamma) * comp_exc - alpha / gamma * (de - b);
        }
    }
    (ll, g)
}

/// Log-likelihood and gradient with respect to `(μ, α)`.
fn sc_ll_grad(mu: f64, alpha: f64, sequences: &[History]) -> (f64, [f64; 2]) {
    let mut ll = 0.0;
    let mut g = [0.0; 2];
    for h in sequences {
        let origin = h.origin();
        let mut prev = origin;
        for (k, &t) in h.event_times().iter().enumerate() {
            let n = k as f64;
            let (x1, x0) = (t - origin, prev - origin);
            let log_rate = mu * x1 - alpha * n;
            let (e1, e0) = (log_rate.exp(), (mu * x0 - alpha * n).exp());
            let seg = (e1 - e0) / mu;
            ll += log_rate - seg;
            g[0] += x1 - ((x1 * e1 - x0 * e0) / mu - seg / mu);
            g[1] += -n + n * seg;
            prev = t;
        }
    }
    (ll, g)
}

/// Maximum-likelihood fit of `family` pooled over all sequences.
///
/// Poisson has the closed form `n / T`. Hawkes and self-correcting are
/// optimized with BFGS on log-parameters, minimizing the per-event mean
/// negative log-likelihood.
pub fn fit_mle(sequences: &[History], family: Family) -> Result<FitReport, ClassicalError> {
    let n_events: usize = sequences.iter().map(History::len).sum();
    if n_events == 0 {
        return Err(ClassicalError::EmptyData);
    }
    let span: f64 = sequences.iter().map(History::observed_span).sum();
    let n = n_events as f64;
    let rate = if span > 0.0 { n / span } else { n };

    let report = |model: ClassicalModel, iterations, gradient_norm, converged| FitReport {
        log_likelihood: log_likelihood(&model, sequences),
        model,
        n_events,
        n_sequences: sequences.len(),
        iterations,
        gradient_norm,
        converged,
    };

    match family {
        Family::Poisson => {
            if span <= 0.0 {
                return Err(ClassicalError::InvalidHistory(
                    "zero observed time; Poisson rate is unbounded".into(),
                ));
            }
            Ok(report(ClassicalModel::poisson(rate)?, 0, 0.0, true))
        }
        Family::Hawkes => {
            let objective = |theta: &[f64]| {
                let (l, a, g) = (theta[0].exp(), theta[1].exp(), theta[2].exp());
                let (ll, grad) = hawkes_ll_grad(l, a, g, sequences);
                if !ll.is_finite() {
                    return (f64::INFINITY, vec![0.0; 3]);
                }
                (
                    -ll / n,
                    vec![-grad[0] * l / n, -grad[1] * a / n, -grad[2] * g / n],
                )
            };
            let x0 = [(0.5 * rate).ln(), (0.5f64).ln(), 0.0];
            let m = minimize_bfgs(objective, &x0, &BfgsOptions::default());
            let model = ClassicalModel::hawkes(m.x[0].exp(), m.x[1].exp(), m.x[2].exp())?;
            Ok(report(model, m.iterations, m.gradient_norm, m.converged))
        }
        Family::SelfCorrecting => {
            let objective = |theta: &[f64]| {
                let (mu, a) = (theta[0].exp(), theta[1].exp());
                let (ll, grad) = sc_ll_grad(mu, a, sequences);
                if !ll.is_finite() {
                    return (f64::INFINITY, vec![0.0; 2]);
                }
                (-ll / n, vec![-grad[0] * mu / n, -grad[1] * a / n])
            };
            // stationary rate of the self-correcting process is about μ/α
            let x0 = [rate.ln(), 0.0];
            let m = minimize_bfgs(objective, &x0, &BfgsOptions::default());
            let model = ClassicalModel::self_correcting(m.x[0].exp(), m.x[1].exp())?;
            Ok(report(model, m.iterations, m.gradient_norm, m.converged))
        }
    }
}

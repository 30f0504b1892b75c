use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::{ClassicalError, ClassicalModel};

/// Simulates event times on `(t_start, t_end]` with Ogata's thinning.
///
/// The process starts with an empty history at `t_start`. Hawkes proposals
/// use the current intensity as the bound (it only decays until the next
/// event); self-correcting proposals use windows over which the intensity at
/// most doubles.
pub fn sample_thinning(
    model: &ClassicalModel,
    t_start: f64,
    t_end: f64,
    seed: u64,
) -> Result<Vec<f64>, ClassicalError> {
    if !(t_start < t_end) || !t_start.is_finite() || !t_end.is_finite() {
        return Err(ClassicalError::InvalidWindow {
            start: t_start,
            end: t_end,
        });
    }
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::new();
    let mut t = t_start;

    match *model {
        ClassicalModel::Poisson(p) => loop {
            let e: f64 = rng.sample(Exp1);
            t += e / p.lambda;
            if t > t_end {
                break;
            }
            times.push(t);
        },
        ClassicalModel::Hawkes(p) => {
            // excitation = Σ exp(−γ (t − t_i)) maintained at the current time
            let mut excitation = 0.0;
            loop {
                let bound = p.lambda + p.alpha * excitation;
                let e: f64 = rng.sample(Exp1);
                let dt = e / bound;
                let candidate = t + dt;
                if candidate > t_end {
                    break;
                }
                excitation *= (-p.gamma * dt).exp();
                t = candidate;
                let intensity = p.lambda + p.alpha * excitation;
                let u: f64 = rng.random();
                if u * bound <= intensity {
                    times.push(t);
                    excitation += 1.0;
                }
            }
        }
        ClassicalModel::SelfCorrecting(p) => {
            let window = std::f64::consts::LN_2 / p.mu;
            let mut count = 0.0;
            loop {
                let log_now = p.mu * (t - t_start) - p.alpha * count;
                let horizon = (t + window).min(t_end);
                let bound = (log_now + p.mu * (horizon - t)).exp();
                let e: f64 = rng.sample(Exp1);
                let candidate = t + e / bound;
                if candidate > horizon {
                    if horizon >= t_end {
                        break;
                    }
                    t = horizon;
                    continue;
                }
                t = candidate;
                let intensity = (p.mu * (t - t_start) - p.alpha * count).exp();
                let u: f64 = rng.random();
                if u * bound <= intensity {
                    times.push(t);
                    count += 1.0;
                }
            }
        }
    }
    Ok(times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::History;
    use crate::numerics::{ks_one_sample, ks_two_sample};

    #[test]
    fn deterministic_and_increasing() {
        let m = ClassicalModel::hawkes(0.5, 0.8, 1.2).unwrap();
        let a = sample_thinning(&m, 0.0, 200.0, 7).unwrap();
        let b = sample_thinning(&m, 0.0, 200.0, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&t| t > 0.0 && t <= 200.0));
        let c = sample_thinning(&m, 0.0, 200.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_empty_window() {
        let m = ClassicalModel::poisson(1.0).unwrap();
        assert!(sample_thinning(&m, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn poisson_count_mean() {
        let m = ClassicalModel::poisson(2.0).unwrap();
        let counts: Vec<f64> = (0..1000)
            .map(|s| sample_thinning(&m, 0.0, 100.0, s).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        // Var = λT = 200, standard error over 1000 runs
        let se = (200.0f64 / 1000.0).sqrt();
        assert!((mean - 200.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn hawkes_without_excitation_is_poisson() {
        let hk = ClassicalModel::hawkes(1.0, 1e-9, 1.0).unwrap();
        let ps = ClassicalModel::poisson(1.0).unwrap();
        let gaps = |ts: Vec<f64>| ts.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
        let a = gaps(sample_thinning(&hk, 0.0, 3000.0, 1).unwrap());
        let b = gaps(sample_thinning(&ps, 0.0, 3000.0, 2).unwrap());
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
    }

    #[test]
    fn hawkes_branching_mean() {
        let m = ClassicalModel::hawkes(0.5, 0.8, 1.2).unwrap();
        let n = 40;
        let total: usize = (0..n)
            .map(|s| sample_thinning(&m, 0.0, 1000.0, 100 + s).unwrap().len())
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 1500.0).abs() < 150.0, "mean {mean}");
    }

    #[test]
    fn self_correcting_time_rescaling() {
        let m = ClassicalModel::self_correcting(1.0, 0.5).unwrap();
        let times = sample_thinning(&m, 0.0, 3000.0, 3).unwrap();
        let mut rescaled = Vec::new();
        for k in 0..times.len() {
            let h = History::new(0.0, times[..k].to_vec()).unwrap();
            rescaled.push(m.compensator(times[k], &h).unwrap());
        }
        let r = ks_one_sample(&rescaled, |x| 1.0 - (-x).exp());
        assert!(r.p_value > 0.01, "{r:?}");
    }
}

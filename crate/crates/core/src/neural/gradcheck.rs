use super::{Grads, ParamStore};

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter name, flat index, analytic, numeric)` of the worst entry.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
}

// Gradients below this magnitude are compared on an absolute scale.
const REL_FLOOR: f64 = 1e-5;

/// Central-difference check of `loss` at the current parameter values.
///
/// The error of one entry is `|a − n| / max(|a|, |n|, 1e-5)`. With
/// `max_per_param = Some(m)` at most `m` evenly strided entries of each
/// parameter are perturbed.
pub fn grad_check<F>(store: &ParamStore, loss: F, eps: f64, max_per_param: Option<usize>) -> GradCheckReport
where
    F: Fn(&ParamStore) -> (f64, Grads),
{
    let (_, analytic) = loss(store);
    let mut probe = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.get(id).values.len();
        let stride = match max_per_param {
            Some(m) if m > 0 && n > m => n.div_ceil(m),
            _ => 1,
        };
        for k in (0..n).step_by(stride) {
            let orig = store.get(id).values[k];
            probe.values_mut(id)[k] = orig + eps;
            let (up, _) = loss(&probe);
            probe.values_mut(id)[k] = orig - eps;
            let (down, _) = loss(&probe);
            probe.values_mut(id)[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.get(id)[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            report.checked += 1;
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
                report.worst = Some((store.get(id).name.clone(), k, a, numeric));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Init, Tape};

    #[test]
    fn quadratic() {
        let mut store = ParamStore::new(0);
        let x = store.register("x", &[1], Init::Constant(3.0)).unwrap();
        let loss = |s: &ParamStore| {
            let mut tape = Tape::new();
            let v = tape.param(s, x);
            let sq = tape.mul(v, v);
            let adj = tape.backward(sq);
            (tape.scalar_value(sq), tape.param_grads(&adj, s))
        };
        let (_, g) = loss(&store);
        assert_eq!(g.get(x), &[6.0]);
        let r = grad_check(&store, loss, 1e-5, None);
        assert!(r.max_rel_error < 1e-9, "{r:?}");
        assert_eq!(r.checked, 1);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let mut store = ParamStore::new(0);
        let x = store.register("x", &[2], Init::Constant(1.5)).unwrap();
        let loss = |s: &ParamStore| {
            let v = &s.get(x).values;
            let f = v[0] * v[0] + v[1];
            (f, Grads(vec![vec![v[0], 1.0]]))
        };
        let r = grad_check(&store, loss, 1e-5, None);
        assert!(r.max_rel_error > 0.4);
        assert_eq!(r.worst.unwrap().1, 0);
    }

    #[test]
    fn sampling_limits_work() {
        let mut store = ParamStore::new(0);
        store.register("w", &[10, 10], Init::Uniform(1.0)).unwrap();
        let loss = |s: &ParamStore| {
            let v = &s.get(crate::neural::ParamId(0)).values;
            (v.iter().map(|x| x * x).sum::<f64>(), Grads(vec![v.iter().map(|x| 2.0 * x).collect()]))
        };
        let r = grad_check(&store, loss, 1e-5, Some(7));
        assert!(r.checked <= 7 && r.checked > 0);
    }
}

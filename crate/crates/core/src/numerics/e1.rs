use super::NumericsError;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const MAX_TERMS: usize = 500;
const TINY: f64 = 1e-300;

/// Exponential integral `E1(x) = ∫₁^∞ e^(−xy)/y dy`, which is also the
/// upper incomplete gamma function `Γ(0, x)`.
///
/// Uses the power series below `x = 1` and a Lentz continued fraction
/// above it. For large `x` the result underflows gracefully towards zero;
/// use [`scaled_exp_integral_e1`] when `e^x E1(x)` is what you need.
pub fn exp_integral_e1(x: f64) -> Result<f64, NumericsError> {
    check_domain(x)?;
    if x < 1.0 {
        Ok(series(x))
    } else {
        Ok(continued_fraction(x) * (-x).exp())
    }
}

/// `e^x · E1(x)` computed without forming `e^x` for large arguments.
///
/// Tends to `1/x` as `x → ∞` and stays finite for every positive finite `x`.
pub fn scaled_exp_integral_e1(x: f64) -> Result<f64, NumericsError> {
    check_domain(x)?;
    if x < 1.0 {
        Ok(series(x) * x.exp())
    } else {
        Ok(continued_fraction(x))
    }
}

fn check_domain(x: f64) -> Result<(), NumericsError> {
    if !x.is_finite() || x <= 0.0 {
        return Err(NumericsError::Domain {
            function: "exp_integral_e1",
            value: x,
        });
    }
    Ok(())
}

// E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k · k!)
fn series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= -x / kf;
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() < sum.abs() * f64::EPSILON {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

// e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...))), modified Lentz.
fn continued_fraction(x: f64) -> f64 {
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_positive_and_non_finite() {
        for x in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(exp_integral_e1(x).is_err(), "{x}");
        }
    }

    #[test]
    fn matches_reference_values() {
        assert!((exp_integral_e1(1.0).unwrap() - 0.219_383_934_395_520_27).abs() < 1e-15);
        let e10 = exp_integral_e1(10.0).unwrap();
        assert!((e10 - 4.156_968_929_685_324e-6).abs() < 1e-18);
    }

    #[test]
    fn both_branches_agree_near_the_split() {
        let below = series(1.0 - 1e-12);
        let above = continued_fraction(1.0) * (-1.0f64).exp();
        assert!((below - above).abs() < 1e-11);
    }

    #[test]
    fn scaled_form_approaches_reciprocal() {
        let x = 1e6;
        let s = scaled_exp_integral_e1(x).unwrap();
        assert!((s * x - 1.0).abs() < 2e-6);
        assert_eq!(exp_integral_e1(800.0).unwrap(), 0.0);
    }

    #[test]
    fn monotone_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let x = 1e-3 * 1.08f64.powi(i);
            let v = exp_integral_e1(x).unwrap();
            if v == 0.0 {
                break;
            }
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn derivative_matches_closed_form() {
        for x in [0.5, 1.0, 5.0] {
            let h = 1e-5;
            let fd = (exp_integral_e1(x + h).unwrap() - exp_integral_e1(x - h).unwrap()) / (2.0 * h);
            let exact = -(-x as f64).exp() / x;
            assert!((fd - exact).abs() < 1e-5, "x={x} fd={fd} exact={exact}");
        }
    }
}

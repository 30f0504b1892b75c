/// Settings for [`minimize_bfgs`].
#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub max_line_search_steps: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-6,
            max_iterations: 500,
            max_line_search_steps: 60,
        }
    }
}

/// Best iterate found by the minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes a smooth function with BFGS and an Armijo backtracking line
/// search. `objective` returns the value and gradient; a non-finite value
/// is treated as "outside the domain" and shortens the step.
pub fn minimize_bfgs<F>(mut objective: F, x0: &[f64], opts: &BfgsOptions) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = objective(&x);
    let mut inv_h = identity(n);
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        let gnorm = norm(&g);
        if gnorm < opts.gradient_tolerance {
            return Minimum {
                x,
                value: fx,
                gradient_norm: gnorm,
                iterations,
                converged: true,
            };
        }
        iterations += 1;

        let mut dir: Vec<f64> = mat_vec(&inv_h, &g).into_iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            // lost positive definiteness; restart from steepest descent
            inv_h = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_line_search_steps {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = objective(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if iterations == 1 {
                // scale the initial inverse Hessian to the observed curvature
                let scale = sy / dot(&y, &y);
                inv_h = identity(n).into_iter().map(|r| r.into_iter().map(|v| v * scale).collect()).collect();
            }
            bfgs_update(&mut inv_h, &s, &y, sy);
        }
        let progress = (fx - f_new).abs();
        x = x_new;
        fx = f_new;
        g = g_new;
        if progress <= f64::EPSILON * fx.abs() && norm(&g) < opts.gradient_tolerance * 1e3 {
            break;
        }
    }
    let gradient_norm = norm(&g);
    Minimum {
        x,
        value: fx,
        gradient_norm,
        iterations,
        converged: gradient_norm < opts.gradient_tolerance,
    }
}

fn bfgs_update(inv_h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(inv_h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            inv_h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

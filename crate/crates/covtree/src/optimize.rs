//! Box-constrained L-BFGS minimization with an analytic gradient.
//!
//! The implementation keeps a small history of curvature pairs and builds
//! search directions with the two-loop recursion; iterates are projected
//! onto the box after every trial step and accepted under an Armijo
//! condition on the projected move. Dimensions here are tiny (tens of
//! parameters), so a short memory and a backtracking line search are enough.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("objective not evaluable at the starting point")]
    BadStartingPoint,
    #[error("invalid bounds: lower[{index}] = {lower} > upper[{index}] = {upper}")]
    InvalidBounds {
        index: usize,
        lower: f64,
        upper: f64,
    },
}

/// Tuning knobs for [`minimize_bounded`].
#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    /// Converged when the projected gradient infinity norm drops below this.
    pub grad_tol: f64,
    /// Converged when two consecutive objective values agree to this
    /// relative tolerance and the line search cannot improve further.
    pub f_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> LbfgsOptions {
        LbfgsOptions {
            max_iters: 200,
            memory: 8,
            grad_tol: 1e-8,
            f_tol: 1e-14,
        }
    }
}

/// Result of a bounded minimization.
#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    /// Infinity norm of the projected gradient at `x`.
    pub projected_grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn clamp_to_box(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

fn projected_grad_inf_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut norm: f64 = 0.0;
    for i in 0..x.len() {
        let step = (x[i] - g[i]).clamp(lower[i], upper[i]) - x[i];
        norm = norm.max(step.abs());
    }
    norm
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `objective` inside the box `[lower, upper]`.
///
/// The objective fills `grad` and returns the function value, or `None`
/// where it cannot be evaluated (the line search then backs off). The best
/// visited point is always returned, so the result is never worse than the
/// starting point.
pub fn minimize_bounded<F>(
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    options: &LbfgsOptions,
    mut objective: F,
) -> Result<OptimOutcome, OptimError>
where
    F: FnMut(&[f64], &mut [f64]) -> Option<f64>,
{
    let n = x0.len();
    for i in 0..n {
        if lower[i] > upper[i] {
            return Err(OptimError::InvalidBounds {
                index: i,
                lower: lower[i],
                upper: upper[i],
            });
        }
    }
    let mut x = x0.to_vec();
    clamp_to_box(&mut x, lower, upper);

    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g).ok_or(OptimError::BadStartingPoint)?;
    if !f.is_finite() {
        return Err(OptimError::BadStartingPoint);
    }

    let mut best_x = x.clone();
    let mut best_f = f;

    // Curvature history (s, y, 1/s'y), newest last.
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(options.memory);
    let mut converged = false;
    let mut iterations = 0;
    let mut pg_norm = projected_grad_inf_norm(&x, &g, lower, upper);
    let mut stalled = 0usize;

    'outer: for iter in 0..options.max_iters {
        iterations = iter + 1;
        if pg_norm <= options.grad_tol {
            converged = true;
            break;
        }

        let mut direction = two_loop_direction(&g, &history);
        if dot(&direction, &g) >= 0.0 {
            // Not a descent direction; fall back to steepest descent.
            history.clear();
            direction = g.iter().map(|v| -v).collect();
        }

        // Unit first step once curvature information exists; a conservative
        // scale before that.
        let mut t = if history.is_empty() {
            let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (1.0 / gnorm.max(1.0)).min(1.0)
        } else {
            1.0
        };

        let mut accepted = false;
        for _ in 0..50 {
            let mut x_trial: Vec<f64> = (0..n).map(|i| x[i] + t * direction[i]).collect();
            clamp_to_box(&mut x_trial, lower, upper);
            let moved: f64 = (0..n).map(|i| (x_trial[i] - x[i]).abs()).sum();
            if moved == 0.0 {
                break;
            }
            let mut g_trial = vec![0.0; n];
            if let Some(f_trial) = objective(&x_trial, &mut g_trial) {
                if f_trial.is_finite() {
                    let descent: f64 = (0..n).map(|i| g[i] * (x_trial[i] - x[i])).sum();
                    if f_trial <= f + 1e-4 * descent.min(0.0) {
                        let s: Vec<f64> = (0..n).map(|i| x_trial[i] - x[i]).collect();
                        let y: Vec<f64> = (0..n).map(|i| g_trial[i] - g[i]).collect();
                        let sy = dot(&s, &y);
                        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                            if history.len() == options.memory {
                                history.remove(0);
                            }
                            history.push((s, y, 1.0 / sy));
                        }
                        let f_prev = f;
                        x = x_trial;
                        g = g_trial;
                        f = f_trial;
                        if f < best_f {
                            best_f = f;
                            best_x = x.clone();
                        }
                        pg_norm = projected_grad_inf_norm(&x, &g, lower, upper);
                        accepted = true;
                        if (f_prev - f).abs() <= options.f_tol * (1.0 + f.abs()) {
                            stalled += 1;
                            if stalled >= 3 {
                                converged = true;
                                break 'outer;
                            }
                        } else {
                            stalled = 0;
                        }
                        break;
                    }
                }
            }
            t *= 0.5;
        }

        if !accepted {
            if history.is_empty() {
                // Even steepest descent cannot improve: treat as converged
                // to the box/numerical resolution.
                converged = true;
                break;
            }
            history.clear();
        }
    }

    if pg_norm <= options.grad_tol {
        converged = true;
    }
    Ok(OptimOutcome {
        x: best_x,
        f: best_f,
        projected_grad_norm: pg_norm,
        iterations,
        converged,
    })
}

fn two_loop_direction(g: &[f64], history: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
    if history.is_empty() {
        return q;
    }
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = rho * dot(s, &q);
        for i in 0..q.len() {
            q[i] -= alpha * y[i];
        }
        alphas.push(alpha);
    }
    // Initial Hessian scaling gamma = s'y / y'y from the newest pair.
    let (s_last, y_last, _) = history.last().unwrap();
    let gamma = dot(s_last, y_last) / dot(y_last, y_last).max(f64::MIN_POSITIVE);
    for v in q.iter_mut() {
        *v *= gamma;
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.iter().rev()) {
        let beta = rho * dot(y, &q);
        for i in 0..q.len() {
            q[i] += (alpha - beta) * s[i];
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let target = [0.9, -1.3, 0.5];
        let outcome = minimize_bounded(
            &[0.0, 0.0, 0.0],
            &[-10.0, -10.0, -10.0],
            &[10.0, 10.0, 10.0],
            &LbfgsOptions::default(),
            |x, g| {
                let mut f = 0.0;
                for i in 0..3 {
                    let d = x[i] - target[i];
                    f += d * d;
                    g[i] = 2.0 * d;
                }
                Some(f)
            },
        )
        .unwrap();
        assert!(outcome.converged);
        for i in 0..3 {
            assert!((outcome.x[i] - target[i]).abs() < 1e-6, "{:?}", outcome.x);
        }
    }

    #[test]
    fn respects_bounds() {
        // Unconstrained minimum at 5, box caps it at 2.
        let outcome = minimize_bounded(
            &[0.0],
            &[-2.0],
            &[2.0],
            &LbfgsOptions::default(),
            |x, g| {
                let d = x[0] - 5.0;
                g[0] = 2.0 * d;
                Some(d * d)
            },
        )
        .unwrap();
        assert!(outcome.converged);
        assert!((outcome.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock_valley() {
        let outcome = minimize_bounded(
            &[-1.2, 1.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            &LbfgsOptions {
                max_iters: 500,
                ..LbfgsOptions::default()
            },
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -400.0 * a * (b - a * a) - 2.0 * (1.0 - a);
                g[1] = 200.0 * (b - a * a);
                Some((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
            },
        )
        .unwrap();
        assert!((outcome.x[0] - 1.0).abs() < 1e-4 && (outcome.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn never_worse_than_start_and_deterministic() {
        let objective = |x: &[f64], g: &mut [f64]| {
            // A bumpy objective that is still evaluable everywhere.
            let f = x[0].sin() * 3.0 + 0.1 * x[0] * x[0];
            g[0] = x[0].cos() * 3.0 + 0.2 * x[0];
            Some(f)
        };
        let run = || {
            minimize_bounded(&[2.0], &[-8.0], &[8.0], &LbfgsOptions::default(), objective)
                .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.x, b.x);
        let mut g = vec![0.0];
        let f0 = objective(&[2.0], &mut g).unwrap();
        assert!(a.f <= f0);
    }

    #[test]
    fn unevaluable_start_is_an_error() {
        let err = minimize_bounded(
            &[0.0],
            &[-1.0],
            &[1.0],
            &LbfgsOptions::default(),
            |_, _| None,
        )
        .unwrap_err();
        assert_eq!(err, OptimError::BadStartingPoint);
    }

    #[test]
    fn backs_off_from_unevaluable_regions() {
        // Objective only defined for x < 1; minimum of (x-3)^2 clipped there.
        let outcome = minimize_bounded(
            &[0.0],
            &[-4.0],
            &[4.0],
            &LbfgsOptions::default(),
            |x, g| {
                if x[0] >= 1.0 {
                    return None;
                }
                let d = x[0] - 3.0;
                g[0] = 2.0 * d;
                Some(d * d)
            },
        )
        .unwrap();
        assert!(outcome.x[0] < 1.0);
        assert!(outcome.f <= 9.0);
    }
}

//! Box-constrained local minimization with inequality constraints.
//!
//! Two layers:
//!
//! * [`minimize_box`] — limited-memory BFGS with gradient projection onto a
//!   box and an Armijo backtracking line search. Gradients are central
//!   finite differences.
//! * [`minimize_constrained`] — an augmented-Lagrangian outer loop handling
//!   general inequality constraints `g(x) <= 0` on top of the box solver.
//!
//! Objective values of `inf`/NaN are treated as "outside the admissible
//! region": the line search backs away from them.

/// Step used for the central-difference gradients.
pub const FD_STEP: f64 = 1e-7;

const LBFGS_MEMORY: usize = 8;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
const MAX_EXPANSIONS: usize = 40;

#[derive(Debug, Clone)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        debug_assert!(lower.iter().zip(&upper).all(|(l, u)| l <= u));
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InnerSettings {
    pub max_iters: usize,
    /// Convergence threshold on the infinity norm of the projected gradient.
    pub grad_tol: f64,
    /// Convergence threshold on the infinity norm of the accepted step.
    pub step_tol: f64,
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Central-difference gradient of `f` at `x` with step [`FD_STEP`].
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    central_gradient_with_step(f, x, FD_STEP)
}

pub fn central_gradient_with_step<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, b| a.max(b.abs()))
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &BoxBounds) -> f64 {
    let mut step: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - gi).collect();
    bounds.project(&mut step);
    step.iter()
        .zip(x)
        .fold(0.0_f64, |a, (s, xi)| a.max((s - xi).abs()))
}

/// L-BFGS two-loop recursion producing `-H g`.
fn lbfgs_direction(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>]) -> Vec<f64> {
    let mut q = g.to_vec();
    let k = s_hist.len();
    let mut alphas = vec![0.0; k];
    let mut rhos = vec![0.0; k];
    for i in (0..k).rev() {
        let sy: f64 = s_hist[i].iter().zip(&y_hist[i]).map(|(s, y)| s * y).sum();
        rhos[i] = 1.0 / sy;
        let sq: f64 = s_hist[i].iter().zip(&q).map(|(s, qi)| s * qi).sum();
        alphas[i] = rhos[i] * sq;
        for (qi, yi) in q.iter_mut().zip(&y_hist[i]) {
            *qi -= alphas[i] * yi;
        }
    }
    if k > 0 {
        let last = k - 1;
        let sy: f64 = s_hist[last]
            .iter()
            .zip(&y_hist[last])
            .map(|(s, y)| s * y)
            .sum();
        let yy: f64 = y_hist[last].iter().map(|y| y * y).sum();
        let gamma = sy / yy;
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for i in 0..k {
        let yq: f64 = y_hist[i].iter().zip(&q).map(|(y, qi)| y * qi).sum();
        let beta = rhos[i] * yq;
        for (qi, si) in q.iter_mut().zip(&s_hist[i]) {
            *qi += (alphas[i] - beta) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

/// Armijo backtracking along the projected path `P(x + alpha dir)`.
/// Returns the accepted point, its value and the final step factor.
///
/// When the unit step is immediately acceptable the search expands instead:
/// without this, a badly scaled quasi-Newton direction (tiny after a
/// heavily backtracked previous step) keeps being "accepted" and progress
/// stalls.
fn line_search<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    fx: f64,
    g: &[f64],
    dir: &[f64],
    bounds: &BoxBounds,
) -> Option<(Vec<f64>, f64, f64)> {
    let try_alpha = |alpha: f64| -> Option<(Vec<f64>, f64)> {
        let mut cand: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect();
        bounds.project(&mut cand);
        let step_norm = cand
            .iter()
            .zip(x)
            .fold(0.0_f64, |a, (c, xi)| a.max((c - xi).abs()));
        if step_norm == 0.0 {
            return None;
        }
        let fc = f(&cand);
        if fc.is_finite() {
            let gd: f64 = g.iter().zip(cand.iter().zip(x)).map(|(gi, (c, xi))| gi * (c - xi)).sum();
            if fc <= fx + ARMIJO_C1 * gd.min(0.0) {
                return Some((cand, fc));
            }
        }
        None
    };

    if let Some((cand, fc)) = try_alpha(1.0) {
        let mut best = (cand, fc, 1.0);
        let mut alpha = 2.0;
        for _ in 0..MAX_EXPANSIONS {
            match try_alpha(alpha) {
                Some((c, v)) if v < best.1 => {
                    best = (c, v, alpha);
                    alpha *= 2.0;
                }
                _ => break,
            }
        }
        return Some(best);
    }

    let mut alpha = 0.5;
    for _ in 0..MAX_BACKTRACKS {
        let mut cand: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect();
        bounds.project(&mut cand);
        let actual_step: Vec<f64> = cand.iter().zip(x).map(|(c, xi)| c - xi).collect();
        if inf_norm(&actual_step) == 0.0 {
            return None; // direction points out of the box entirely
        }
        let fc = f(&cand);
        if fc.is_finite() {
            let gd: f64 = g.iter().zip(&actual_step).map(|(gi, s)| gi * s).sum();
            if fc <= fx + ARMIJO_C1 * gd.min(0.0) {
                return Some((cand, fc, alpha));
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Projected L-BFGS with Armijo backtracking on the projected path.
pub fn minimize_box<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    bounds: &BoxBounds,
    settings: &InnerSettings,
) -> InnerResult {
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut fx = f(&x);
    if !fx.is_finite() {
        // Start point is not evaluable; nothing sensible to do locally.
        return InnerResult {
            x,
            value: fx,
            converged: false,
            iterations: 0,
        };
    }
    let mut g = central_gradient(&f, &x);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..settings.max_iters {
        iterations = iter + 1;
        if projected_gradient_norm(&x, &g, bounds) <= settings.grad_tol {
            converged = true;
            iterations = iter;
            break;
        }

        let mut dir = lbfgs_direction(&g, &s_hist, &y_hist);
        let descent: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if !descent.is_finite() || descent >= 0.0 {
            // Fall back to steepest descent when curvature info is unusable.
            dir = g.iter().map(|gi| -gi).collect();
            s_hist.clear();
            y_hist.clear();
        }

        let mut accepted = line_search(&f, &x, fx, &g, &dir, bounds);
        if accepted.is_none() && !s_hist.is_empty() {
            // Quasi-Newton direction exhausted the backtracking budget;
            // retry once along the raw gradient before giving up.
            s_hist.clear();
            y_hist.clear();
            let sd: Vec<f64> = g.iter().map(|gi| -gi).collect();
            accepted = line_search(&f, &x, fx, &g, &sd, bounds);
        }

        let Some((x_new, f_new, alpha)) = accepted else {
            // No acceptable step in any direction: we are at the accuracy
            // floor of the finite-difference model.
            converged = projected_gradient_norm(&x, &g, bounds) <= settings.grad_tol.max(1e-12);
            break;
        };

        let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let g_new = central_gradient(&f, &x_new);
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = step.iter().zip(&y).map(|(s, yi)| s * yi).sum();
        let ss: f64 = step.iter().map(|s| s * s).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        if sy > 1e-12 * ss.sqrt() * yy.sqrt() && sy.is_finite() {
            s_hist.push(step.clone());
            y_hist.push(y);
            if s_hist.len() > LBFGS_MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }

        let step_size = inf_norm(&step);
        x = x_new;
        fx = f_new;
        g = g_new;
        // A full, unbacktracked step below the step tolerance means the
        // local model already places us at the bottom; a backtracked tiny
        // step does not.
        if alpha >= 1.0 && step_size <= settings.step_tol {
            converged = true;
            break;
        }
    }

    InnerResult {
        x,
        value: fx,
        converged,
        iterations,
    }
}

/// Levenberg-Marquardt refinement of a least-squares objective
/// `f = |residuals(x)|^2` inside a box. Intended as a polish phase: it
/// converges quadratically near a minimizer where the quasi-Newton phase
/// crawls. Nonlinear inequality constraints are expected to be folded into
/// the residual vector as penalty rows by the caller.
///
/// `residuals` returns `None` when the point is not evaluable.
pub fn polish_least_squares<R>(
    residuals: R,
    x0: &[f64],
    bounds: &BoxBounds,
    max_iters: usize,
    step_tol: f64,
) -> (Vec<f64>, f64)
where
    R: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let Some(mut r) = residuals(&x) else {
        return (x, f64::INFINITY);
    };
    let m = r.len();
    let mut fx: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let h = 1e-7;

    for _ in 0..max_iters {
        // Finite-difference Jacobian, column per variable.
        let mut jac = nalgebra::DMatrix::<f64>::zeros(m, n);
        let mut probe = x.clone();
        let mut bad = false;
        for col in 0..n {
            probe[col] = x[col] + h;
            let rp = residuals(&probe);
            probe[col] = x[col] - h;
            let rm = residuals(&probe);
            probe[col] = x[col];
            match (rp, rm) {
                (Some(rp), Some(rm)) => {
                    for row in 0..m {
                        jac[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
                    }
                }
                _ => {
                    bad = true;
                    break;
                }
            }
        }
        if bad {
            break;
        }
        let rv = nalgebra::DVector::from_column_slice(&r);
        let grad = jac.transpose() * &rv;
        if grad.amax() <= 1e-14 {
            break;
        }

        // Coordinates pinned at a bound with the gradient pushing outward
        // stay fixed; the step is solved in the free subspace. Without this
        // the projected step gets truncated at the bound and stalls.
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let at_lower = x[i] <= bounds.lower[i] + 1e-12;
                let at_upper = x[i] >= bounds.upper[i] - 1e-12;
                !(at_lower && grad[i] > 0.0) && !(at_upper && grad[i] < 0.0)
            })
            .collect();
        if free.is_empty() {
            break;
        }
        let jac_free = jac.select_columns(free.iter());
        let grad_free = jac_free.transpose() * &rv;
        let jtj = jac_free.transpose() * &jac_free;

        let mut accepted: Option<(Vec<f64>, Vec<f64>, f64, f64)> = None;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for i in 0..free.len() {
                let d = jtj[(i, i)].max(1e-12);
                damped[(i, i)] += lambda * d;
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&grad_free)),
                None => {
                    lambda *= 4.0;
                    continue;
                }
            };
            let mut cand = x.clone();
            for (k, &i) in free.iter().enumerate() {
                cand[i] += step[k];
            }
            bounds.project(&mut cand);
            let step_norm = cand
                .iter()
                .zip(&x)
                .fold(0.0_f64, |a, (c, xi)| a.max((c - xi).abs()));
            if step_norm > 0.0 {
                if let Some(rc) = residuals(&cand) {
                    let fc: f64 = rc.iter().map(|v| v * v).sum();
                    if fc.is_finite() && fc < fx {
                        accepted = Some((cand, rc, fc, step_norm));
                        break;
                    }
                }
            }
            lambda *= 4.0;
            if lambda > 1e14 {
                break;
            }
        }

        let Some((cand, rc, fc, step_norm)) = accepted else {
            break;
        };
        x = cand;
        r = rc;
        fx = fc;
        lambda = (lambda / 3.0).max(1e-12);
        if step_norm <= step_tol {
            break;
        }
    }
    (x, fx)
}

#[derive(Debug, Clone, Copy)]
pub struct OuterSettings {
    pub inner: InnerSettings,
    /// Maximum tolerated constraint violation on exit.
    pub feasibility_tol: f64,
    pub max_outer: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
}

impl OuterSettings {
    pub fn from_inner(inner: InnerSettings) -> Self {
        Self {
            inner,
            feasibility_tol: 1e-8,
            max_outer: 12,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            max_penalty: 1e9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub converged: bool,
}

fn max_violation(g: &[f64]) -> f64 {
    g.iter().fold(0.0_f64, |a, gi| a.max(*gi))
}

/// Minimize `f` subject to `x` in `bounds` and `constraints(x) <= 0`
/// componentwise, by the augmented-Lagrangian method with multiplier
/// updates `lambda <- max(0, lambda + mu g)`.
pub fn minimize_constrained<F, C>(
    f: F,
    constraints: C,
    x0: &[f64],
    bounds: &BoxBounds,
    settings: &OuterSettings,
) -> ConstrainedResult
where
    F: Fn(&[f64]) -> f64,
    C: Fn(&[f64]) -> Vec<f64>,
{
    let n_con = constraints(x0).len();
    if n_con == 0 {
        let r = minimize_box(&f, x0, bounds, &settings.inner);
        return ConstrainedResult {
            objective: r.value,
            x: r.x,
            max_violation: 0.0,
            converged: r.converged,
        };
    }

    let mut lambda = vec![0.0_f64; n_con];
    let mut mu = settings.initial_penalty;
    let mut x = x0.to_vec();
    let mut prev_violation = f64::INFINITY;
    let mut converged = false;

    for _ in 0..settings.max_outer {
        let augmented = |p: &[f64]| {
            let base = f(p);
            if !base.is_finite() {
                return base;
            }
            let g = constraints(p);
            let mut penalty = 0.0;
            for (gi, li) in g.iter().zip(&lambda) {
                let t = (li + mu * gi).max(0.0);
                penalty += (t * t - li * li) / (2.0 * mu);
            }
            base + penalty
        };
        let inner = minimize_box(&augmented, &x, bounds, &settings.inner);
        x = inner.x;
        let g = constraints(&x);
        let violation = max_violation(&g);
        if violation <= settings.feasibility_tol && inner.converged {
            converged = true;
            break;
        }
        for (li, gi) in lambda.iter_mut().zip(&g) {
            *li = (*li + mu * gi).max(0.0);
        }
        if violation > 0.25 * prev_violation {
            mu = (mu * settings.penalty_growth).min(settings.max_penalty);
        }
        prev_violation = violation;
    }

    let objective = f(&x);
    let violation = max_violation(&constraints(&x));
    ConstrainedResult {
        x,
        objective,
        max_violation: violation,
        converged,
    }
}

//! Inverse actuation: find external-magnet poses that realize a desired
//! stacked wrench on the robots.
//!
//! The pose of each EPM is parameterized by spherical position (azimuth,
//! elevation, radius from the workspace center) and two moment-direction
//! angles, five reals per magnet. The workspace-radius bound then becomes a
//! plain box bound on the radius coordinate; the only nonlinear constraints
//! are the pairwise EPM attraction limit and a minimum EPM gap, handled by
//! the augmented-Lagrangian layer in [`crate::nlp`].
//!
//! Solves are multi-start: up to `max_restarts` local minimizations from
//! seeded uniform-random feasible starts (optionally one warm start), merged
//! by lowest residual with the restart index as tie-break. Restart seeds are
//! derived from `rng_seed` and the restart index alone, so results are
//! reproducible and independent of how many restarts run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::magnetics::{
    dipole_force_between, wrenches_for_ipms, Dipole, MagneticsError, Wrench5,
};
use crate::math::Vec3;
use crate::nlp::{self, BoxBounds, InnerSettings, OuterSettings};

/// Tolerated slack on the nonlinear constraints of a returned solution.
pub const CONSTRAINT_SLACK: f64 = 1e-6;

/// Attempts when rejection-sampling a feasible start, per restart.
const MAX_START_ATTEMPTS: usize = 1000;

/// Penalty scaling for constraint rows in the least-squares polish. Stiff
/// enough that the converged violation stays well below [`CONSTRAINT_SLACK`].
const CONSTRAINT_PENALTY_WEIGHT: f64 = 1e5;

/// Tiny inward shift keeping the penalty rows active (and smooth) exactly on
/// a constraint boundary.
const CONSTRAINT_PENALTY_SHIFT: f64 = 1e-9;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SolveError {
    #[error("pose vector holds {poses} EPM poses but {moments} moment norms were supplied")]
    DimensionMismatch { poses: usize, moments: usize },
    #[error("no feasible EPM start found after {attempts} rejection-sampling attempts per restart")]
    NoFeasibleStart { attempts: usize },
    #[error("desired wrench has {got} components, scenario has {expected}")]
    TargetMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Magnetics(#[from] MagneticsError),
}

/// Spherical pose of one EPM: position angles/radius plus moment direction
/// angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpmPose {
    /// Position azimuth, rad, in (-pi, pi].
    pub azimuth: f64,
    /// Position elevation, rad, in [-pi/2, pi/2].
    pub elevation: f64,
    /// Radius from the workspace center, m.
    pub radius: f64,
    /// Moment direction azimuth, rad.
    pub moment_azimuth: f64,
    /// Moment direction elevation, rad.
    pub moment_elevation: f64,
}

/// Optimization variable: one [`EpmPose`] per EPM (5N reals).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpmPoseVector {
    pub poses: Vec<EpmPose>,
}

impl EpmPoseVector {
    pub const VARS_PER_EPM: usize = 5;

    pub fn n_epms(&self) -> usize {
        self.poses.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.poses.len() * Self::VARS_PER_EPM);
        for p in &self.poses {
            out.extend_from_slice(&[
                p.azimuth,
                p.elevation,
                p.radius,
                p.moment_azimuth,
                p.moment_elevation,
            ]);
        }
        out
    }

    pub fn from_flat(x: &[f64]) -> Self {
        assert_eq!(x.len() % Self::VARS_PER_EPM, 0);
        let poses = x
            .chunks_exact(Self::VARS_PER_EPM)
            .map(|c| EpmPose {
                azimuth: c[0],
                elevation: c[1],
                radius: c[2],
                moment_azimuth: c[3],
                moment_elevation: c[4],
            })
            .collect();
        Self { poses }
    }
}

/// Workspace and safety constraints on EPM poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    /// Minimum EPM radius from the workspace center, m.
    #[serde(rename = "r_min_m")]
    pub r_min: f64,
    /// Outer bound on the EPM radius, m.
    #[serde(rename = "r_max_m")]
    pub r_max: f64,
    /// Maximum allowed pairwise EPM attraction force, N.
    #[serde(rename = "f_attract_max_n")]
    pub f_attract_max: f64,
    /// Minimum center-to-center distance between EPMs, m.
    #[serde(rename = "epm_min_gap_m")]
    pub epm_min_gap: f64,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self {
            r_min: 0.15,
            r_max: 0.5,
            f_attract_max: 10.0 * 9.81,
            epm_min_gap: 0.25,
        }
    }
}

/// Multi-start solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    /// Weight applied to torque error components, 1/(N·m).
    pub weight_torque: f64,
    /// Weight applied to force error components, 1/N.
    pub weight_force: f64,
    pub rng_seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_restarts: 10,
            max_iters: 500,
            grad_tol: 1e-8,
            step_tol: 1e-10,
            // Unit weighted magnitude at the nominal activation targets
            // (0.05 N·m, 0.5 N).
            weight_torque: 1.0 / 0.05,
            weight_force: 1.0 / 0.5,
            rng_seed: 0,
        }
    }
}

/// The fixed part of an inverse solve: robots, magnet inventory, constraints.
#[derive(Debug, Clone)]
pub struct ActuationProblem {
    /// Robot magnets, one or two; poses are the current robot poses.
    pub ipms: Vec<Dipole>,
    /// Moment norm of each EPM, A·m².
    pub epm_moments: Vec<f64>,
    pub constraints: ConstraintSet,
    /// Include the robot-on-robot wrench inside the model the solver inverts.
    pub include_interagent: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_best: EpmPoseVector,
    /// Weighted squared wrench error at `x_best` (dimensionless).
    pub residual: f64,
    /// Wrench stack realized at `x_best`, one entry per robot.
    pub achieved: Vec<Wrench5>,
    pub restarts_used: usize,
    pub converged: bool,
}

/// Spherical-to-Cartesian position, `r (cos b cos a, cos b sin a, sin b)`.
pub fn spherical_to_position(azimuth: f64, elevation: f64, radius: f64) -> Vec3 {
    radius
        * Vec3::new(
            elevation.cos() * azimuth.cos(),
            elevation.cos() * azimuth.sin(),
            elevation.sin(),
        )
}

/// Moment vector of norm `m_norm` pointing along the spherical direction
/// `(azimuth, elevation)`.
pub fn angles_to_moment(azimuth: f64, elevation: f64, m_norm: f64) -> Vec3 {
    m_norm
        * Vec3::new(
            elevation.cos() * azimuth.cos(),
            elevation.cos() * azimuth.sin(),
            elevation.sin(),
        )
}

/// Materialize the EPM dipoles described by a pose vector.
pub fn unpack(x: &EpmPoseVector, m_norms: &[f64]) -> Result<Vec<Dipole>, SolveError> {
    if x.poses.len() != m_norms.len() {
        return Err(SolveError::DimensionMismatch {
            poses: x.poses.len(),
            moments: m_norms.len(),
        });
    }
    Ok(x.poses
        .iter()
        .zip(m_norms)
        .map(|(p, m)| {
            Dipole::new(
                spherical_to_position(p.azimuth, p.elevation, p.radius),
                angles_to_moment(p.moment_azimuth, p.moment_elevation, *m),
            )
        })
        .collect())
}

/// Per-component error weights implied by the torque/force weights of the
/// settings, in stack order.
pub fn component_weights(n_ipms: usize, settings: &SolverSettings) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_ipms * Wrench5::DOF);
    for _ in 0..n_ipms {
        out.extend_from_slice(&[
            settings.weight_torque,
            settings.weight_torque,
            settings.weight_force,
            settings.weight_force,
            settings.weight_force,
        ]);
    }
    out
}

fn weighted_residuals(achieved: &[Wrench5], target: &[Wrench5], weights: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(achieved.len() * Wrench5::DOF);
    for ((a, t), w) in achieved
        .iter()
        .zip(target)
        .zip(weights.chunks_exact(Wrench5::DOF))
    {
        out.push(w[0] * (a.tau_y - t.tau_y));
        out.push(w[1] * (a.tau_z - t.tau_z));
        out.push(w[2] * (a.f_x - t.f_x));
        out.push(w[3] * (a.f_y - t.f_y));
        out.push(w[4] * (a.f_z - t.f_z));
    }
    out
}

fn weighted_error(achieved: &[Wrench5], target: &[Wrench5], weights: &[f64]) -> f64 {
    weighted_residuals(achieved, target, weights)
        .iter()
        .map(|r| r * r)
        .sum()
}

/// Wrench stack realized by the EPM poses `x`, one entry per robot.
pub fn achieved_wrenches(
    x: &EpmPoseVector,
    problem: &ActuationProblem,
) -> Result<Vec<Wrench5>, SolveError> {
    let epms = unpack(x, &problem.epm_moments)?;
    Ok(wrenches_for_ipms(
        &epms,
        &problem.ipms,
        problem.include_interagent,
    )?)
}

/// Weighted squared norm of the wrench error at `x` (dimensionless).
pub fn objective(
    x: &EpmPoseVector,
    target: &[Wrench5],
    problem: &ActuationProblem,
    settings: &SolverSettings,
) -> Result<f64, SolveError> {
    if target.len() != problem.ipms.len() {
        return Err(SolveError::TargetMismatch {
            got: target.len(),
            expected: problem.ipms.len(),
        });
    }
    let achieved = achieved_wrenches(x, problem)?;
    Ok(weighted_error(
        &achieved,
        target,
        &component_weights(problem.ipms.len(), settings),
    ))
}

/// The gradient the local solver uses for the objective: central finite
/// differences with step [`nlp::FD_STEP`] in each pose coordinate.
pub fn objective_gradient(
    x: &EpmPoseVector,
    target: &[Wrench5],
    problem: &ActuationProblem,
    settings: &SolverSettings,
) -> Result<Vec<f64>, SolveError> {
    // Surface errors at the base point; probe points falling in a singular
    // region are treated as infinite by the line search, matching solver
    // behavior.
    objective(x, target, problem, settings)?;
    let flat = x.to_flat();
    let n = problem.epm_moments.len();
    let f = |v: &[f64]| {
        objective(
            &EpmPoseVector::from_flat(&v[..n * EpmPoseVector::VARS_PER_EPM]),
            target,
            problem,
            settings,
        )
        .unwrap_or(f64::INFINITY)
    };
    Ok(nlp::central_gradient(&f, &flat))
}

/// Constraint values for the EPM poses `x`, all feasible at `<= 0`:
/// for every EPM pair, attraction force above the limit and gap below the
/// minimum. Empty for a single EPM.
pub fn attraction_constraints(x: &EpmPoseVector, problem: &ActuationProblem) -> Vec<f64> {
    let n = x.poses.len();
    if n < 2 {
        return Vec::new();
    }
    let dipoles: Vec<Dipole> = x
        .poses
        .iter()
        .zip(&problem.epm_moments)
        .map(|(p, m)| {
            Dipole::new(
                spherical_to_position(p.azimuth, p.elevation, p.radius),
                angles_to_moment(p.moment_azimuth, p.moment_elevation, *m),
            )
        })
        .collect();
    let c = &problem.constraints;
    let mut out = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in (i + 1)..n {
            let force = match dipole_force_between(&dipoles[i], &dipoles[j]) {
                Ok(f) => f.norm(),
                // Coincident EPMs: maximally violated, not an error.
                Err(_) => f64::MAX.sqrt(),
            };
            out.push(force - c.f_attract_max);
            let gap = (dipoles[i].position - dipoles[j].position).norm();
            out.push(c.epm_min_gap - gap);
        }
    }
    out
}

fn bounds_for(problem: &ActuationProblem) -> BoxBounds {
    let n = problem.epm_moments.len();
    let c = &problem.constraints;
    let mut lower = Vec::with_capacity(n * 5);
    let mut upper = Vec::with_capacity(n * 5);
    for _ in 0..n {
        lower.extend_from_slice(&[-PI, -FRAC_PI_2, c.r_min, -PI, -FRAC_PI_2]);
        upper.extend_from_slice(&[PI, FRAC_PI_2, c.r_max, PI, FRAC_PI_2]);
    }
    BoxBounds::new(lower, upper)
}

fn restart_seed(base: u64, restart: usize) -> u64 {
    base.wrapping_add((restart as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn sample_feasible_start(
    rng: &mut ChaCha8Rng,
    bounds: &BoxBounds,
    problem: &ActuationProblem,
) -> Option<Vec<f64>> {
    for _ in 0..MAX_START_ATTEMPTS {
        let x: Vec<f64> = bounds
            .lower
            .iter()
            .zip(&bounds.upper)
            .map(|(l, u)| rng.random_range(*l..=*u))
            .collect();
        let pose = EpmPoseVector::from_flat(&x);
        if attraction_constraints(&pose, problem)
            .iter()
            .all(|g| *g <= 0.0)
        {
            return Some(x);
        }
    }
    None
}

struct RestartOutcome {
    x: Vec<f64>,
    residual: f64,
    converged: bool,
}

fn run_restart(
    restart: usize,
    warm: Option<&EpmPoseVector>,
    target: &[Wrench5],
    weights: &[f64],
    problem: &ActuationProblem,
    settings: &SolverSettings,
    bounds: &BoxBounds,
) -> Result<Option<RestartOutcome>, SolveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(settings.rng_seed, restart));
    let start = if restart == 0 {
        match warm {
            Some(w)
                if bounds.contains(&w.to_flat())
                    && attraction_constraints(w, problem).iter().all(|g| *g <= 0.0) =>
            {
                w.to_flat()
            }
            _ => match sample_feasible_start(&mut rng, bounds, problem) {
                Some(x) => x,
                None => return Ok(None),
            },
        }
    } else {
        match sample_feasible_start(&mut rng, bounds, problem) {
            Some(x) => x,
            None => return Ok(None),
        }
    };

    let f = |v: &[f64]| {
        achieved_wrenches(&EpmPoseVector::from_flat(v), problem)
            .map(|a| weighted_error(&a, target, weights))
            .unwrap_or(f64::INFINITY)
    };
    let cons = |v: &[f64]| attraction_constraints(&EpmPoseVector::from_flat(v), problem);
    let outer = OuterSettings::from_inner(InnerSettings {
        max_iters: settings.max_iters,
        grad_tol: settings.grad_tol,
        step_tol: settings.step_tol,
    });
    let result = nlp::minimize_constrained(f, &cons, &start, bounds, &outer);

    let start_value = f(&start);
    let (x, residual, converged) =
        if result.max_violation <= CONSTRAINT_SLACK && result.objective.is_finite() {
            (result.x, result.objective, result.converged)
        } else {
            // The polished point drifted infeasible; fall back to the
            // feasible start so the returned solution always honors the
            // constraints.
            (start, start_value, false)
        };

    // Least-squares polish: quadratic local convergence where the
    // quasi-Newton phase crawls. The attraction/gap constraints enter as
    // stiff penalty rows so the polish can slide along an active constraint;
    // the polished point is only adopted if it is feasible and better.
    let residual_fn = |v: &[f64]| {
        let pose = EpmPoseVector::from_flat(v);
        let mut rows = achieved_wrenches(&pose, problem)
            .ok()
            .map(|a| weighted_residuals(&a, target, weights))?;
        for g in attraction_constraints(&pose, problem) {
            rows.push(CONSTRAINT_PENALTY_WEIGHT * (g + CONSTRAINT_PENALTY_SHIFT).max(0.0));
        }
        Some(rows)
    };
    let (xp, _) = nlp::polish_least_squares(
        residual_fn,
        &x,
        bounds,
        settings.max_iters,
        settings.step_tol,
    );
    let pose_p = EpmPoseVector::from_flat(&xp);
    let feasible_p = attraction_constraints(&pose_p, problem)
        .iter()
        .all(|g| *g <= CONSTRAINT_SLACK);
    let polished = f(&xp);
    let (x, residual) = if feasible_p && polished < residual {
        (xp, polished)
    } else {
        (x, residual)
    };

    Ok(Some(RestartOutcome {
        x,
        residual,
        converged,
    }))
}

/// Multi-start inverse solve for the EPM poses realizing `target`.
///
/// Deterministic for a fixed `settings.rng_seed`; the best residual is
/// non-increasing in `max_restarts`.
pub fn solve(
    target: &[Wrench5],
    problem: &ActuationProblem,
    settings: &SolverSettings,
) -> Result<SolveResult, SolveError> {
    solve_warm(target, problem, settings, None)
}

/// [`solve`] with an optional warm start occupying restart 0. Used by the
/// closed-loop simulation to seed each tick from the previous EPM poses.
pub fn solve_warm(
    target: &[Wrench5],
    problem: &ActuationProblem,
    settings: &SolverSettings,
    warm: Option<&EpmPoseVector>,
) -> Result<SolveResult, SolveError> {
    let weights = component_weights(problem.ipms.len(), settings);
    solve_with_weights(target, &weights, problem, settings, warm)
}

/// Multi-start solve minimizing `|W (U_d - U(x))|^2` with an explicit
/// per-component weight vector `W`. The reported residual is the minimized
/// weighted objective at `x_best`.
pub fn solve_with_weights(
    target: &[Wrench5],
    weights: &[f64],
    problem: &ActuationProblem,
    settings: &SolverSettings,
    warm: Option<&EpmPoseVector>,
) -> Result<SolveResult, SolveError> {
    if target.len() != problem.ipms.len() {
        return Err(SolveError::TargetMismatch {
            got: target.len(),
            expected: problem.ipms.len(),
        });
    }
    assert_eq!(weights.len(), target.len() * Wrench5::DOF);
    let bounds = bounds_for(problem);
    let restarts = settings.max_restarts.max(1);
    let outcomes: Vec<Result<Option<RestartOutcome>, SolveError>> = (0..restarts)
        .into_par_iter()
        .map(|k| run_restart(k, warm, target, weights, problem, settings, &bounds))
        .collect();

    let mut best: Option<(usize, RestartOutcome)> = None;
    for (k, outcome) in outcomes.into_iter().enumerate() {
        if let Some(o) = outcome? {
            let better = match &best {
                None => true,
                Some((_, b)) => o.residual < b.residual,
            };
            if better {
                best = Some((k, o));
            }
        }
    }
    let Some((_, chosen)) = best else {
        return Err(SolveError::NoFeasibleStart {
            attempts: MAX_START_ATTEMPTS,
        });
    };

    let x_best = EpmPoseVector::from_flat(&chosen.x);
    // Recompute so the reported residual is exactly the weighted objective
    // at x_best.
    let achieved = achieved_wrenches(&x_best, problem)?;
    let residual = weighted_error(&achieved, target, weights);
    Ok(SolveResult {
        x_best,
        residual,
        achieved,
        restarts_used: restarts,
        converged: chosen.converged,
    })
}

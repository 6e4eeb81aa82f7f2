//! Independence analysis of the ten controllable wrench components.
//!
//! For each degree of freedom a unit activation target is solved (only that
//! component nonzero, at the nominal torque/force magnitude) and the
//! achieved stack is examined: crosstalk is the largest unintended
//! component relative to the intended one, after normalizing torques and
//! forces by their target magnitudes so the ratio is unit-free.
//!
//! Sweeps over robot separation, relative magnetization angle and EPM count
//! emit one row per (grid cell, DOF) plus per-cell means.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::magnetics::{moment_from_cylinder, CylMagnet, Dipole, WrenchStack};
use crate::math::Vec3;
use crate::optimizer::{
    component_weights, objective, solve_with_weights, ActuationProblem, ConstraintSet, SolveError,
    SolverSettings,
};

/// Ten controllable components across the two robots.
pub const DOF_COUNT: usize = 10;

/// An activation whose intended component reaches less than this fraction of
/// its commanded magnitude is reported as failed: the crosstalk ratio loses
/// meaning with a vanishing denominator. Fully coupled geometries settle
/// near 1/(1 + leak_weight² · coupling²) of the commanded magnitude, well
/// above this floor, while numerical noise sits orders of magnitude below.
pub const MIN_ACTIVATION_FRACTION: f64 = 1e-3;

/// Per-DOF solves whose weighted error norm exceeds this fraction of the
/// unit target are flagged in reports (the activation is off-nominal).
pub const ACTIVATION_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, thiserror::Error)]
pub enum CrosstalkError {
    #[error("DOF index {0} outside 1..=10")]
    DofIndex(usize),
    #[error("intended component {dof} was not activated (|normalized| = {magnitude:.3e}); crosstalk undefined")]
    NotActivated { dof: usize, magnitude: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Nominal activation magnitudes used both as solve targets and as the
/// normalization that makes torque and force components comparable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivationTargets {
    #[serde(rename = "torque_nm")]
    pub torque: f64,
    #[serde(rename = "force_n")]
    pub force: f64,
}

impl Default for ActivationTargets {
    fn default() -> Self {
        Self {
            torque: 0.05,
            force: 0.5,
        }
    }
}

impl ActivationTargets {
    /// Target magnitude of 1-based DOF `dof`.
    pub fn magnitude(&self, dof: usize) -> f64 {
        // Components 1,2,6,7 are torques; the rest forces.
        match (dof - 1) % 5 {
            0 | 1 => self.torque,
            _ => self.force,
        }
    }

    /// Componentwise normalization of a stack by the target magnitudes.
    pub fn normalize(&self, stack: &WrenchStack) -> [f64; DOF_COUNT] {
        let raw = stack.as_array();
        std::array::from_fn(|i| raw[i] / self.magnitude(i + 1))
    }
}

/// Geometry of the robot pair: separation along x and relative
/// magnetization angle about z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpmConfiguration {
    /// Center-to-center separation, m.
    #[serde(rename = "separation_m")]
    pub separation: f64,
    /// Relative magnetization angle, rad, in [0, pi/2].
    #[serde(rename = "relative_angle_rad")]
    pub relative_angle: f64,
}

/// Robot pair on the x axis: robot 1 at (-d/2, 0, 0) magnetized along x,
/// robot 2 at (+d/2, 0, 0) magnetized along x rotated by `theta` about z.
pub fn build_ipm_pair(d: f64, theta: f64, m_norm: f64) -> (Dipole, Dipole) {
    let ipm1 = Dipole::new(Vec3::new(-d / 2.0, 0.0, 0.0), m_norm * Vec3::x());
    let ipm2 = Dipole::new(
        Vec3::new(d / 2.0, 0.0, 0.0),
        m_norm * Vec3::new(theta.cos(), theta.sin(), 0.0),
    );
    (ipm1, ipm2)
}

/// All-zero stack except 1-based component `dof` at its nominal magnitude.
pub fn unit_target(dof: usize, targets: &ActivationTargets) -> Result<WrenchStack, CrosstalkError> {
    if !(1..=DOF_COUNT).contains(&dof) {
        return Err(CrosstalkError::DofIndex(dof));
    }
    let mut v = [0.0; DOF_COUNT];
    v[dof - 1] = targets.magnitude(dof);
    Ok(WrenchStack::from_array(v))
}

/// Crosstalk of `stack` for intended 1-based DOF `dof`: the maximum ratio of
/// any other normalized component to the intended one. 0 means perfect
/// independence, 1 means an unintended component as large as the intended.
pub fn crosstalk(
    stack: &WrenchStack,
    dof: usize,
    targets: &ActivationTargets,
) -> Result<f64, CrosstalkError> {
    if !(1..=DOF_COUNT).contains(&dof) {
        return Err(CrosstalkError::DofIndex(dof));
    }
    let normalized = targets.normalize(stack);
    let intended = normalized[dof - 1].abs();
    if intended == 0.0 {
        return Err(CrosstalkError::NotActivated {
            dof,
            magnitude: intended,
        });
    }
    let worst = normalized
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != dof - 1)
        .fold(0.0_f64, |a, (_, v)| a.max(v.abs()));
    Ok(worst / intended)
}

/// Fixed total magnet volume split into `n` equal cylinders with length
/// equal to diameter.
pub fn split_total_volume(total_volume: f64, remanence: f64, n: usize) -> Vec<CylMagnet> {
    assert!(n > 0);
    let each = total_volume / n as f64;
    // V = pi (d/2)^2 d = pi d^3 / 4
    let d = (4.0 * each / std::f64::consts::PI).cbrt();
    vec![CylMagnet::new(d, d, remanence); n]
}

/// Default weight multiplier on non-target components in activation solves.
pub const DEFAULT_LEAK_WEIGHT: f64 = 20.0;

/// Everything an independence study needs besides the grid point itself.
#[derive(Debug, Clone)]
pub struct StudyContext {
    pub ipm_magnet: CylMagnet,
    /// Total EPM magnet volume to split across however many EPMs a study
    /// uses, m³.
    pub epm_total_volume: f64,
    pub epm_remanence: f64,
    pub constraints: ConstraintSet,
    pub solver: SolverSettings,
    pub targets: ActivationTargets,
    pub include_interagent: bool,
    /// Extra weight on the suppressed (non-target) components of an
    /// activation solve. The nominal activation magnitudes saturate the
    /// reachable set in tight geometries; without this the plain
    /// least-squares objective buys intended-component magnitude with
    /// unintended leakage, which is exactly what an independence study wants
    /// suppressed.
    pub leak_weight: f64,
}

impl StudyContext {
    pub fn epm_inventory(&self, n_epms: usize) -> Vec<CylMagnet> {
        split_total_volume(self.epm_total_volume, self.epm_remanence, n_epms)
    }

    fn problem(&self, config: &IpmConfiguration, n_epms: usize) -> ActuationProblem {
        let m_ipm = moment_from_cylinder(&self.ipm_magnet);
        let (ipm1, ipm2) = build_ipm_pair(config.separation, config.relative_angle, m_ipm);
        ActuationProblem {
            ipms: vec![ipm1, ipm2],
            epm_moments: self
                .epm_inventory(n_epms)
                .iter()
                .map(moment_from_cylinder)
                .collect(),
            constraints: self.constraints,
            include_interagent: self.include_interagent,
        }
    }
}

/// Activation record for one DOF of a study.
#[derive(Debug, Clone, Serialize)]
pub struct DofActivation {
    /// 1-based DOF index.
    pub dof: usize,
    /// Crosstalk ratio; `None` when the intended component was not activated.
    pub crosstalk: Option<f64>,
    /// Weighted squared solve residual.
    pub residual: f64,
    /// Solver converged and the activation error is within
    /// [`ACTIVATION_TOLERANCE`] of the unit target.
    pub converged: bool,
}

/// Normalized achieved stacks, one row per targeted DOF, each row scaled so
/// its diagonal entry is exactly 1 (rows of failed activations are NaN).
#[derive(Debug, Clone)]
pub struct ActivationMatrix {
    pub rows: Vec<[f64; DOF_COUNT]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrosstalkReport {
    pub per_dof: Vec<DofActivation>,
    /// Arithmetic mean of the defined per-DOF crosstalk values; `None` when
    /// every activation failed.
    pub mean_crosstalk: Option<f64>,
    /// Number of DOFs excluded from the mean (activation failed).
    pub excluded: usize,
}

fn mix_seed(base: u64, salt: u64) -> u64 {
    base.wrapping_add(salt.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Unit-activation study of all ten DOFs for one robot configuration.
///
/// Per-DOF solves are independent and run in parallel; each draws its
/// restart seeds from the context seed and the DOF index only, so the
/// outcome is deterministic.
pub fn independence_study(
    config: &IpmConfiguration,
    n_epms: usize,
    ctx: &StudyContext,
) -> Result<(ActivationMatrix, CrosstalkReport), CrosstalkError> {
    let problem = ctx.problem(config, n_epms);
    let results: Vec<Result<([f64; DOF_COUNT], DofActivation), CrosstalkError>> = (1..=DOF_COUNT)
        .into_par_iter()
        .map(|dof| {
            let target = unit_target(dof, &ctx.targets)?;
            let settings = SolverSettings {
                rng_seed: mix_seed(ctx.solver.rng_seed, dof as u64),
                ..ctx.solver
            };
            let target_vec = vec![target.w1, target.w2];
            let mut weights = component_weights(2, &settings);
            for (i, w) in weights.iter_mut().enumerate() {
                if i != dof - 1 {
                    *w *= ctx.leak_weight;
                }
            }
            let solution = solve_with_weights(&target_vec, &weights, &problem, &settings, None)?;
            let achieved = WrenchStack::new(solution.achieved[0], solution.achieved[1]);
            let normalized = ctx.targets.normalize(&achieved);
            let intended = normalized[dof - 1];
            let activated = intended.abs() >= MIN_ACTIVATION_FRACTION;
            let row: [f64; DOF_COUNT] = if activated {
                std::array::from_fn(|i| normalized[i] / intended)
            } else {
                [f64::NAN; DOF_COUNT]
            };
            let ct = if activated {
                Some(crosstalk(&achieved, dof, &ctx.targets).expect("activated by check above"))
            } else {
                None
            };
            // Report the plain (unboosted) activation error so residuals are
            // comparable across leak weights.
            let residual = objective(&solution.x_best, &target_vec, &problem, &settings)?;
            let record = DofActivation {
                dof,
                crosstalk: ct,
                residual,
                converged: solution.converged && residual.sqrt() <= ACTIVATION_TOLERANCE,
            };
            Ok((row, record))
        })
        .collect();

    let mut rows = Vec::with_capacity(DOF_COUNT);
    let mut per_dof = Vec::with_capacity(DOF_COUNT);
    for r in results {
        let (row, record) = r?;
        rows.push(row);
        per_dof.push(record);
    }
    let defined: Vec<f64> = per_dof.iter().filter_map(|d| d.crosstalk).collect();
    let mean = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    let excluded = DOF_COUNT - defined.len();
    Ok((
        ActivationMatrix { rows },
        CrosstalkReport {
            per_dof,
            mean_crosstalk: mean,
            excluded,
        },
    ))
}

/// One output row of a sweep: a single DOF at a single grid point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub d: f64,
    pub theta_deg: f64,
    pub n_epms: usize,
    pub dof_index: usize,
    /// Crosstalk in percent; `None` when the activation failed.
    pub crosstalk_pct: Option<f64>,
    pub residual: f64,
    pub converged: bool,
}

/// Per-cell summary of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub d: f64,
    pub theta_deg: f64,
    pub n_epms: usize,
    pub mean_crosstalk_pct: Option<f64>,
    pub dofs_excluded: usize,
    /// Set when the whole cell failed to solve.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    /// Cell summary for a grid point, if present.
    pub fn cell(&self, d: f64, theta_deg: f64, n_epms: usize) -> Option<&SweepCell> {
        self.cells.iter().find(|c| {
            (c.d - d).abs() < 1e-12 && (c.theta_deg - theta_deg).abs() < 1e-9 && c.n_epms == n_epms
        })
    }

    /// CSV with the fixed column set
    /// `d,theta_deg,n_epms,dof_index,crosstalk_pct,residual,converged`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "d",
            "theta_deg",
            "n_epms",
            "dof_index",
            "crosstalk_pct",
            "residual",
            "converged",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.d.to_string(),
                r.theta_deg.to_string(),
                r.n_epms.to_string(),
                r.dof_index.to_string(),
                r.crosstalk_pct.map(|v| v.to_string()).unwrap_or_default(),
                r.residual.to_string(),
                r.converged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full grid sweep. Cells run in parallel; every cell derives its seed from
/// the base seed and its grid indices, so the table is deterministic and
/// independent of scheduling. Per-cell failures are recorded and the sweep
/// continues.
pub fn sweep(
    d_values: &[f64],
    theta_values: &[f64],
    n_epms_values: &[usize],
    ctx: &StudyContext,
) -> SweepTable {
    let mut grid = Vec::new();
    for (i_d, &d) in d_values.iter().enumerate() {
        for (i_t, &theta) in theta_values.iter().enumerate() {
            for (i_n, &n) in n_epms_values.iter().enumerate() {
                let salt = ((i_d as u64) << 32) | ((i_t as u64) << 16) | i_n as u64;
                grid.push((d, theta, n, salt));
            }
        }
    }
    let outcomes: Vec<(f64, f64, usize, Result<CrosstalkReport, CrosstalkError>)> = grid
        .par_iter()
        .map(|&(d, theta, n, salt)| {
            let cell_ctx = StudyContext {
                solver: SolverSettings {
                    rng_seed: mix_seed(ctx.solver.rng_seed, salt),
                    ..ctx.solver
                },
                ..ctx.clone()
            };
            let config = IpmConfiguration {
                separation: d,
                relative_angle: theta,
            };
            let report = independence_study(&config, n, &cell_ctx).map(|(_, r)| r);
            (d, theta, n, report)
        })
        .collect();

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (d, theta, n, outcome) in outcomes {
        let theta_deg = theta.to_degrees();
        match outcome {
            Ok(report) => {
                for rec in &report.per_dof {
                    rows.push(SweepRow {
                        d,
                        theta_deg,
                        n_epms: n,
                        dof_index: rec.dof,
                        crosstalk_pct: rec.crosstalk.map(|c| 100.0 * c),
                        residual: rec.residual,
                        converged: rec.converged,
                    });
                }
                cells.push(SweepCell {
                    d,
                    theta_deg,
                    n_epms: n,
                    mean_crosstalk_pct: report.mean_crosstalk.map(|c| 100.0 * c),
                    dofs_excluded: report.excluded,
                    error: None,
                });
            }
            Err(e) => {
                cells.push(SweepCell {
                    d,
                    theta_deg,
                    n_epms: n,
                    mean_crosstalk_pct: None,
                    dofs_excluded: DOF_COUNT,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    SweepTable { rows, cells }
}

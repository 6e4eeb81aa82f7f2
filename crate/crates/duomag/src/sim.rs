//! Closed-loop planar simulation of two magnetically actuated robots.
//!
//! Each robot is a planar rigid body carrying one IPM magnetized along its
//! heading. A PID pose controller runs at 2 Hz on pre-planned trajectories;
//! its planar wrench commands are lifted into the ten-component stack, the
//! inverse solver places the EPMs (assumed to move instantaneously, warm
//! started from the previous tick), and the physics then integrates at 10 ms
//! substeps applying the true magnetic wrench recomputed from the frozen EPM
//! poses and the live robot poses, robot-on-robot terms included.

use serde::{Deserialize, Serialize};

use crate::magnetics::{
    dipole_field, dipole_gradient, field_at, gradient_at, moment_from_cylinder, reduce_wrench,
    wrench_global, CylMagnet, Dipole, MagneticsError, Wrench5, WrenchStack,
};
use crate::math::{shortest_arc, wrap_angle, Vec2, Vec3};
use crate::optimizer::{
    solve_warm, ActuationProblem, ConstraintSet, EpmPose, EpmPoseVector, SolveError,
    SolverSettings,
};

/// Controller period, s (2 Hz).
pub const CONTROL_PERIOD: f64 = 0.5;
/// Physics substep, s.
pub const PHYSICS_DT: f64 = 0.01;

/// Failure thresholds: positional error, weighted solver residual, and
/// robot separation below which the pair is about to snap together.
pub const FAIL_POS_ERR: f64 = 0.05;
pub const FAIL_RESIDUAL: f64 = 0.5;
pub const FAIL_SEPARATION: f64 = 0.01;

/// Below this separation the dipole model (and the robots) have collided;
/// the run stops.
pub const COLLISION_SEPARATION: f64 = 2e-3;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("trajectory has no waypoints")]
    EmptyTrajectory,
    #[error("trajectory waypoint {index}: time {t} not after {prev}")]
    NonMonotonicTime { index: usize, t: f64, prev: f64 },
    #[error("trajectory must start at t = 0 (got {0})")]
    NonZeroStart(f64),
    #[error(transparent)]
    Magnetics(#[from] MagneticsError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Planar rigid-body state of one robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// Position in the workspace plane, m.
    pub position: Vec2,
    /// Heading (magnetization direction), rad, wrapped to (-pi, pi].
    pub heading: f64,
    /// Linear velocity, m/s.
    pub velocity: Vec2,
    /// Yaw rate, rad/s.
    pub angular_velocity: f64,
}

impl RobotState {
    pub fn at_rest(position: Vec2, heading: f64) -> Self {
        Self {
            position,
            heading: wrap_angle(heading),
            velocity: Vec2::zeros(),
            angular_velocity: 0.0,
        }
    }

    /// The robot's IPM as a dipole in the 3-D workspace frame.
    pub fn ipm_dipole(&self, moment_norm: f64) -> Dipole {
        Dipole::new(
            Vec3::new(self.position.x, self.position.y, 0.0),
            moment_norm * Vec3::new(self.heading.cos(), self.heading.sin(), 0.0),
        )
    }
}

/// Rigid-body parameters of one robot, including its embedded magnet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    /// Mass, kg.
    pub mass: f64,
    /// Yaw inertia, kg·m².
    pub yaw_inertia: f64,
    /// Linear damping, N·s/m.
    pub linear_damping: f64,
    /// Angular damping, N·m·s/rad.
    pub angular_damping: f64,
    pub ipm: CylMagnet,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            mass: 0.008,
            yaw_inertia: 5e-8,
            linear_damping: 0.5,
            angular_damping: 1e-4,
            ipm: CylMagnet::new(0.005, 0.005, 1.45),
        }
    }
}

/// Timed pose waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

/// Pre-planned trajectory: waypoints with strictly increasing time starting
/// at zero; linear interpolation in position, shortest-arc in heading, last
/// pose held after the final waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, SimError> {
        let traj = Self { waypoints };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let first = self.waypoints.first().ok_or(SimError::EmptyTrajectory)?;
        if first.t != 0.0 {
            return Err(SimError::NonZeroStart(first.t));
        }
        for (i, pair) in self.waypoints.windows(2).enumerate() {
            if pair[1].t <= pair[0].t {
                return Err(SimError::NonMonotonicTime {
                    index: i + 1,
                    t: pair[1].t,
                    prev: pair[0].t,
                });
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.waypoints.last().map(|w| w.t).unwrap_or(0.0)
    }

    /// Target pose at time `t`.
    pub fn sample(&self, t: f64) -> (Vec2, f64) {
        let wps = &self.waypoints;
        let last = wps.last().expect("validated non-empty");
        if t >= last.t {
            return (Vec2::new(last.x, last.y), wrap_angle(last.psi));
        }
        let idx = wps.partition_point(|w| w.t <= t);
        // wps[idx-1].t <= t < wps[idx].t; idx >= 1 because t >= 0 = wps[0].t.
        let (a, b) = (&wps[idx - 1], &wps[idx]);
        let frac = (t - a.t) / (b.t - a.t);
        let pos = Vec2::new(a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y));
        let psi = wrap_angle(a.psi + frac * shortest_arc(a.psi, b.psi));
        (pos, psi)
    }
}

/// Sample a trajectory at time `t` (holds the final pose afterwards).
pub fn sample_trajectory(traj: &Trajectory, t: f64) -> (Vec2, f64) {
    traj.sample(t)
}

/// Gains of one PID channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// PID gains for the planar pose controller, shared by both linear channels
/// plus a heading channel, with clamps on the integral contribution and on
/// the commanded wrench.
///
/// Defaults are tuned for the default [`RobotParams`] at the 2 Hz control
/// rate: the plant is velocity-dominated (velocity time constant mass /
/// damping ~ 16 ms, far below the control period), so per-tick stability
/// needs roughly `kp * period / damping < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub linear: ChannelGains,
    pub angular: ChannelGains,
    /// Clamp on |ki * integral| per linear channel, N.
    pub linear_integral_clamp: f64,
    /// Clamp on |ki * integral| for the heading channel, N·m.
    pub angular_integral_clamp: f64,
    /// Clamp on the commanded planar force magnitude, N.
    pub force_clamp: f64,
    /// Clamp on the commanded yaw torque magnitude, N·m.
    pub torque_clamp: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            linear: ChannelGains {
                kp: 0.8,
                ki: 0.08,
                kd: 0.1,
            },
            angular: ChannelGains {
                kp: 1.6e-4,
                ki: 1.6e-5,
                kd: 2e-5,
            },
            linear_integral_clamp: 0.25,
            angular_integral_clamp: 0.025,
            force_clamp: 0.5,
            torque_clamp: 0.05,
        }
    }
}

/// Integrator and derivative memory of one robot's PID.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PidMemory {
    /// Integrated error per channel (x, y, psi).
    pub integral: [f64; 3],
    pub previous_error: Option<[f64; 3]>,
}

/// Planar wrench command: global-frame force and yaw torque.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarWrench {
    pub force: Vec2,
    pub torque_z: f64,
}

/// One PID update over `dt`: standard PID per channel, heading error by
/// shortest arc, integral contribution and output both clamped (the force
/// clamp preserves direction).
pub fn pid_step(
    state: &RobotState,
    target: &(Vec2, f64),
    gains: &PidGains,
    dt: f64,
    memory: &mut PidMemory,
) -> PlanarWrench {
    let error = [
        target.0.x - state.position.x,
        target.0.y - state.position.y,
        shortest_arc(state.heading, target.1),
    ];
    let prev = memory.previous_error;
    let mut raw = [0.0; 3];
    for ch in 0..3 {
        let g = if ch < 2 { gains.linear } else { gains.angular };
        let clamp = if ch < 2 {
            gains.linear_integral_clamp
        } else {
            gains.angular_integral_clamp
        };
        memory.integral[ch] += error[ch] * dt;
        if g.ki > 0.0 {
            let limit = clamp / g.ki;
            memory.integral[ch] = memory.integral[ch].clamp(-limit, limit);
        }
        let derivative = match prev {
            Some(p) => (error[ch] - p[ch]) / dt,
            None => 0.0,
        };
        raw[ch] = g.kp * error[ch] + g.ki * memory.integral[ch] + g.kd * derivative;
    }
    memory.previous_error = Some(error);

    let mut force = Vec2::new(raw[0], raw[1]);
    let norm = force.norm();
    if norm > gains.force_clamp {
        force *= gains.force_clamp / norm;
    }
    let torque_z = raw[2].clamp(-gains.torque_clamp, gains.torque_clamp);
    PlanarWrench { force, torque_z }
}

/// Lift planar wrench commands into the ten-component stack: per robot the
/// global force/yaw torque are expressed in the magnetization-aligned frame
/// and the out-of-plane components are commanded to zero.
pub fn to_wrench_stack(
    w1: &PlanarWrench,
    w2: &PlanarWrench,
    heading1: f64,
    heading2: f64,
) -> WrenchStack {
    let lift = |w: &PlanarWrench, psi: f64| -> Wrench5 {
        let w6 = crate::magnetics::Wrench6 {
            torque: Vec3::new(0.0, 0.0, w.torque_z),
            force: Vec3::new(w.force.x, w.force.y, 0.0),
        };
        let dir = Vec3::new(psi.cos(), psi.sin(), 0.0);
        reduce_wrench(&w6, &dir).expect("heading direction is unit length")
    };
    WrenchStack {
        w1: lift(w1, heading1),
        w2: lift(w2, heading2),
    }
}

/// Semi-implicit Euler step with linear damping:
/// `v += (F - c v) / m * dt; p += v * dt`, same pattern in yaw, heading
/// wrapped.
pub fn integrate(
    state: &RobotState,
    applied: &PlanarWrench,
    params: &RobotParams,
    dt: f64,
) -> RobotState {
    let mut v = state.velocity;
    v += (applied.force - params.linear_damping * v) / params.mass * dt;
    let position = state.position + v * dt;
    let mut w = state.angular_velocity;
    w += (applied.torque_z - params.angular_damping * w) / params.yaw_inertia * dt;
    let heading = wrap_angle(state.heading + w * dt);
    RobotState {
        position,
        heading,
        velocity: v,
        angular_velocity: w,
    }
}

/// Planar magnetic wrench on each robot from the frozen EPM dipoles plus the
/// other robot's IPM.
fn applied_wrenches(
    epms: &[Dipole],
    states: &[RobotState; 2],
    moment_norm: f64,
) -> Result<[PlanarWrench; 2], MagneticsError> {
    let ipms = [
        states[0].ipm_dipole(moment_norm),
        states[1].ipm_dipole(moment_norm),
    ];
    let mut out = [PlanarWrench::default(); 2];
    for j in 0..2 {
        let mut b = field_at(epms, &ipms[j].position)?;
        let mut g = gradient_at(epms, &ipms[j].position)?;
        let other = &ipms[1 - j];
        b += dipole_field(other, &ipms[j].position)?;
        g += dipole_gradient(other, &ipms[j].position)?;
        let w6 = wrench_global(&ipms[j], &b, &g);
        out[j] = PlanarWrench {
            force: Vec2::new(w6.force.x, w6.force.y),
            torque_z: w6.torque.z,
        };
    }
    Ok(out)
}

/// Everything fixed over one simulation run.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub robot: RobotParams,
    pub gains: PidGains,
    /// EPM moment norms, A·m².
    pub epm_moments: Vec<f64>,
    pub constraints: ConstraintSet,
    pub solver: SolverSettings,
    /// Model the robot-on-robot wrench inside the solver's plant model.
    pub include_interagent: bool,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndReason {
    TrajectoryComplete,
    /// A robot left the controlled workspace sphere.
    LeftWorkspace,
    /// Robot separation collapsed below the model's validity floor.
    Collision,
}

/// Per-control-tick record.
#[derive(Debug, Clone, Serialize)]
pub struct TickRecord {
    pub t: f64,
    pub robots: [RobotState; 2],
    pub targets: [(Vec2, f64); 2],
    pub desired: WrenchStack,
    pub achieved: WrenchStack,
    pub epms: Vec<Dipole>,
    pub residual: f64,
    /// Inverse solve failed outright this tick (EPMs parked at r_max).
    pub solver_failed: bool,
    pub separation: f64,
    /// Latched failure flag.
    pub failed: bool,
}

impl TickRecord {
    pub fn position_error(&self, robot: usize) -> f64 {
        (self.robots[robot].position - self.targets[robot].0).norm()
    }

    pub fn heading_error(&self, robot: usize) -> f64 {
        shortest_arc(self.robots[robot].heading, self.targets[robot].1).abs()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub mean_pos_err_m: f64,
    pub mean_ang_err_rad: f64,
    pub failed: bool,
    pub fail_time_s: Option<f64>,
    pub min_separation_m: f64,
    pub end_reason: EndReason,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimLog {
    pub ticks: Vec<TickRecord>,
    pub summary: SimSummary,
}

impl SimLog {
    /// CSV with the fixed column set `t, r1_x, r1_y, r1_psi, r2_x, r2_y,
    /// r2_psi, r1_err_pos, r1_err_ang, r2_err_pos, r2_err_ang, residual,
    /// failed`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t", "r1_x", "r1_y", "r1_psi", "r2_x", "r2_y", "r2_psi", "r1_err_pos", "r1_err_ang",
            "r2_err_pos", "r2_err_ang", "residual", "failed",
        ])?;
        for rec in &self.ticks {
            w.write_record([
                rec.t.to_string(),
                rec.robots[0].position.x.to_string(),
                rec.robots[0].position.y.to_string(),
                rec.robots[0].heading.to_string(),
                rec.robots[1].position.x.to_string(),
                rec.robots[1].position.y.to_string(),
                rec.robots[1].heading.to_string(),
                rec.position_error(0).to_string(),
                rec.heading_error(0).to_string(),
                rec.position_error(1).to_string(),
                rec.heading_error(1).to_string(),
                rec.residual.to_string(),
                rec.failed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Failure test on the most recent tick: positional error, solver residual
/// or imminent-collision separation beyond their thresholds.
pub fn failure_detect(tick: &TickRecord) -> bool {
    tick.position_error(0) > FAIL_POS_ERR
        || tick.position_error(1) > FAIL_POS_ERR
        || tick.residual > FAIL_RESIDUAL
        || tick.separation < FAIL_SEPARATION
}

fn fallback_epm_poses(n: usize, r_max: f64) -> EpmPoseVector {
    let poses = (0..n)
        .map(|i| EpmPose {
            azimuth: wrap_angle(i as f64 * 2.0 * std::f64::consts::PI / n.max(1) as f64),
            elevation: 0.0,
            radius: r_max,
            moment_azimuth: 0.0,
            moment_elevation: 0.0,
        })
        .collect();
    EpmPoseVector { poses }
}

fn mix_seed(base: u64, salt: u64) -> u64 {
    base.wrapping_add(salt.wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Run the closed loop until the common trajectory end.
///
/// Deterministic for a fixed `setup.solver.rng_seed`. The failure flag
/// latches but the run continues until the trajectory ends, a robot leaves
/// the workspace sphere (radius `constraints.r_min`), or the robots
/// collide.
pub fn run_simulation(
    setup: &SimSetup,
    traj1: &Trajectory,
    traj2: &Trajectory,
) -> Result<SimLog, SimError> {
    traj1.validate()?;
    traj2.validate()?;
    let moment_norm = moment_from_cylinder(&setup.robot.ipm);
    let duration = traj1.duration().max(traj2.duration());
    let ticks_total = (duration / CONTROL_PERIOD).round() as usize;
    let substeps = (CONTROL_PERIOD / PHYSICS_DT).round() as usize;

    let (p1, psi1) = traj1.sample(0.0);
    let (p2, psi2) = traj2.sample(0.0);
    let mut robots = [RobotState::at_rest(p1, psi1), RobotState::at_rest(p2, psi2)];
    let mut memories = [PidMemory::default(), PidMemory::default()];
    let mut warm: Option<EpmPoseVector> = None;
    let mut failed = false;
    let mut fail_time = None;
    let mut min_separation = f64::INFINITY;
    let mut end_reason = EndReason::TrajectoryComplete;
    let mut ticks = Vec::with_capacity(ticks_total + 1);

    'control: for k in 0..=ticks_total {
        let t = k as f64 * CONTROL_PERIOD;
        let targets = [traj1.sample(t), traj2.sample(t)];
        let commands = [
            pid_step(&robots[0], &targets[0], &setup.gains, CONTROL_PERIOD, &mut memories[0]),
            pid_step(&robots[1], &targets[1], &setup.gains, CONTROL_PERIOD, &mut memories[1]),
        ];
        let desired = to_wrench_stack(
            &commands[0],
            &commands[1],
            robots[0].heading,
            robots[1].heading,
        );

        let problem = ActuationProblem {
            ipms: vec![
                robots[0].ipm_dipole(moment_norm),
                robots[1].ipm_dipole(moment_norm),
            ],
            epm_moments: setup.epm_moments.clone(),
            constraints: setup.constraints,
            include_interagent: setup.include_interagent,
        };
        let settings = SolverSettings {
            rng_seed: mix_seed(setup.solver.rng_seed, k as u64),
            ..setup.solver
        };
        let target_vec = vec![desired.w1, desired.w2];
        let (epm_poses, achieved, residual, solver_failed) =
            match solve_warm(&target_vec, &problem, &settings, warm.as_ref()) {
                Ok(result) => {
                    let achieved = WrenchStack::new(result.achieved[0], result.achieved[1]);
                    warm = Some(result.x_best.clone());
                    (result.x_best, achieved, result.residual, false)
                }
                Err(_) => {
                    // Zero-field fallback: park the EPMs at the outer radius.
                    warm = None;
                    let poses =
                        fallback_epm_poses(setup.epm_moments.len(), setup.constraints.r_max);
                    (poses, WrenchStack::zero(), f64::INFINITY, true)
                }
            };
        let epms = crate::optimizer::unpack(&epm_poses, &setup.epm_moments)?;

        let separation = (robots[0].position - robots[1].position).norm();
        min_separation = min_separation.min(separation);
        let mut record = TickRecord {
            t,
            robots,
            targets,
            desired,
            achieved,
            epms: epms.clone(),
            residual,
            solver_failed,
            separation,
            failed,
        };
        if !failed && (solver_failed || failure_detect(&record)) {
            failed = true;
            fail_time = Some(t);
            record.failed = true;
        }
        ticks.push(record);
        if k == ticks_total {
            break;
        }

        // Physics: EPMs frozen, true wrench recomputed every substep from
        // the live robot poses.
        for _ in 0..substeps {
            let wrenches = match applied_wrenches(&epms, &robots, moment_norm) {
                Ok(w) => w,
                Err(_) => {
                    end_reason = EndReason::Collision;
                    if !failed {
                        failed = true;
                        fail_time = Some(t);
                    }
                    break 'control;
                }
            };
            robots = [
                integrate(&robots[0], &wrenches[0], &setup.robot, PHYSICS_DT),
                integrate(&robots[1], &wrenches[1], &setup.robot, PHYSICS_DT),
            ];
            let sep = (robots[0].position - robots[1].position).norm();
            min_separation = min_separation.min(sep);
            if sep < COLLISION_SEPARATION {
                end_reason = EndReason::Collision;
                if !failed {
                    failed = true;
                    fail_time = Some(t);
                }
                break 'control;
            }
            if robots[0].position.norm() > setup.constraints.r_min
                || robots[1].position.norm() > setup.constraints.r_min
            {
                end_reason = EndReason::LeftWorkspace;
                if !failed {
                    failed = true;
                    fail_time = Some(t);
                }
                break 'control;
            }
        }
    }

    let n = ticks.len() as f64;
    let mean_pos = ticks
        .iter()
        .map(|r| 0.5 * (r.position_error(0) + r.position_error(1)))
        .sum::<f64>()
        / n;
    let mean_ang = ticks
        .iter()
        .map(|r| 0.5 * (r.heading_error(0) + r.heading_error(1)))
        .sum::<f64>()
        / n;
    Ok(SimLog {
        ticks,
        summary: SimSummary {
            mean_pos_err_m: mean_pos,
            mean_ang_err_rad: mean_ang,
            failed,
            fail_time_s: fail_time,
            min_separation_m: min_separation,
            end_reason,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn line(points: &[(f64, f64, f64, f64)]) -> Trajectory {
        Trajectory::new(
            points
                .iter()
                .map(|&(t, x, y, psi)| Waypoint { t, x, y, psi })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn trajectory_validation() {
        assert!(matches!(
            Trajectory::new(vec![]),
            Err(SimError::EmptyTrajectory)
        ));
        assert!(matches!(
            Trajectory::new(vec![Waypoint {
                t: 1.0,
                x: 0.0,
                y: 0.0,
                psi: 0.0
            }]),
            Err(SimError::NonZeroStart(_))
        ));
        assert!(matches!(
            Trajectory::new(vec![
                Waypoint {
                    t: 0.0,
                    x: 0.0,
                    y: 0.0,
                    psi: 0.0
                },
                Waypoint {
                    t: 0.0,
                    x: 1.0,
                    y: 0.0,
                    psi: 0.0
                },
            ]),
            Err(SimError::NonMonotonicTime { .. })
        ));
    }

    #[test]
    fn trajectory_sampling_examples() {
        let traj = line(&[(0.0, 0.0, 0.0, 0.0), (10.0, 1.0, -2.0, 1.0)]);
        // Exact waypoints.
        let (p, psi) = traj.sample(0.0);
        assert_abs_diff_eq!(p.x, 0.0);
        assert_abs_diff_eq!(psi, 0.0);
        let (p, psi) = traj.sample(10.0);
        assert_relative_eq!(p.y, -2.0);
        assert_relative_eq!(psi, 1.0);
        // Midpoint is the arithmetic mean.
        let (p, psi) = traj.sample(5.0);
        assert_relative_eq!(p.x, 0.5);
        assert_relative_eq!(p.y, -1.0);
        assert_relative_eq!(psi, 0.5);
        // Holds the last pose.
        let (p, _) = traj.sample(99.0);
        assert_relative_eq!(p.x, 1.0);
    }

    #[test]
    fn heading_interpolation_takes_the_shortest_arc() {
        let traj = line(&[
            (0.0, 0.0, 0.0, 170f64.to_radians()),
            (10.0, 0.0, 0.0, -170f64.to_radians()),
        ]);
        let (_, psi) = traj.sample(5.0);
        // Crosses the seam through 180 degrees.
        assert_relative_eq!(psi.abs(), std::f64::consts::PI, epsilon = 1e-12);
        let (_, psi) = traj.sample(2.5);
        assert_relative_eq!(psi, 175f64.to_radians(), epsilon = 1e-12);
    }

    #[test]
    fn pid_zero_error_zero_output() {
        let gains = PidGains::default();
        let state = RobotState::at_rest(Vec2::new(0.1, -0.2), 0.3);
        let mut mem = PidMemory::default();
        let w = pid_step(
            &state,
            &(state.position, state.heading),
            &gains,
            0.5,
            &mut mem,
        );
        assert_abs_diff_eq!(w.force.norm(), 0.0);
        assert_abs_diff_eq!(w.torque_z, 0.0);
    }

    #[test]
    fn pid_pure_proportional_definition() {
        let gains = PidGains {
            linear: ChannelGains {
                kp: 1.0,
                ki: 0.0,
                kd: 0.0,
            },
            angular: ChannelGains {
                kp: 0.0,
                ki: 0.0,
                kd: 0.0,
            },
            ..Default::default()
        };
        let state = RobotState::at_rest(Vec2::zeros(), 0.0);
        let mut mem = PidMemory::default();
        let w = pid_step(&state, &(Vec2::new(0.1, 0.0), 0.0), &gains, 0.5, &mut mem);
        assert_relative_eq!(w.force.x, 0.1, max_relative = 1e-12);
        assert_abs_diff_eq!(w.force.y, 0.0);
    }

    #[test]
    fn pid_output_is_clamped_for_any_error() {
        use rand::{Rng, SeedableRng};
        let gains = PidGains::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut mem = PidMemory::default();
        let state = RobotState::at_rest(Vec2::zeros(), 0.0);
        for _ in 0..200 {
            let target = (
                Vec2::new(
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                ),
                rng.random_range(-3.0..3.0),
            );
            let w = pid_step(&state, &target, &gains, 0.5, &mut mem);
            assert!(w.force.norm() <= gains.force_clamp + 1e-12);
            assert!(w.torque_z.abs() <= gains.torque_clamp + 1e-12);
        }
    }

    #[test]
    fn wrench_stack_lift_examples() {
        // Zero in, zero out.
        let zero = PlanarWrench::default();
        let stack = to_wrench_stack(&zero, &zero, 0.3, -1.0);
        assert_eq!(stack, WrenchStack::zero());
        // Heading 0: global x force is frame x force.
        let w = PlanarWrench {
            force: Vec2::new(0.5, 0.0),
            torque_z: 0.0,
        };
        let stack = to_wrench_stack(&w, &zero, 0.0, 0.0);
        assert_relative_eq!(stack.w1.f_x, 0.5);
        assert_abs_diff_eq!(stack.w1.f_y, 0.0);
        // Heading pi/2: global y force appears as frame x force.
        let w = PlanarWrench {
            force: Vec2::new(0.0, 0.4),
            torque_z: 0.0,
        };
        let stack = to_wrench_stack(&w, &zero, std::f64::consts::FRAC_PI_2, 0.0);
        assert_relative_eq!(stack.w1.f_x, 0.4, max_relative = 1e-12);
        assert_abs_diff_eq!(stack.w1.f_y, 0.0, epsilon = 1e-12);
        // Yaw torque is frame tau_z for planar headings; out-of-plane stays 0.
        let w = PlanarWrench {
            force: Vec2::zeros(),
            torque_z: 0.01,
        };
        let stack = to_wrench_stack(&w, &zero, 1.1, 0.0);
        assert_relative_eq!(stack.w1.tau_z, 0.01, max_relative = 1e-12);
        assert_abs_diff_eq!(stack.w1.tau_y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(stack.w1.f_z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn integrator_examples() {
        let params = RobotParams::default();
        let rest = RobotState::at_rest(Vec2::zeros(), 0.0);
        // No wrench, no velocity: state unchanged.
        let s = integrate(&rest, &PlanarWrench::default(), &params, 0.01);
        assert_eq!(s, rest);

        // Undamped constant force from rest: v = F T / m exactly for
        // semi-implicit Euler.
        let undamped = RobotParams {
            linear_damping: 0.0,
            ..params
        };
        let f = PlanarWrench {
            force: Vec2::new(0.02, 0.0),
            torque_z: 0.0,
        };
        let mut s = rest;
        let steps = 250;
        for _ in 0..steps {
            s = integrate(&s, &f, &undamped, 0.01);
        }
        let t = steps as f64 * 0.01;
        assert_relative_eq!(s.velocity.x, 0.02 * t / undamped.mass, max_relative = 1e-12);

        // With damping, velocity approaches F/c within 1% after 10 time
        // constants.
        let mut s = rest;
        let tau = params.mass / params.linear_damping;
        let steps = (10.0 * tau / 0.001).ceil() as usize;
        for _ in 0..steps {
            s = integrate(&s, &f, &params, 0.001);
        }
        let terminal = 0.02 / params.linear_damping;
        assert_relative_eq!(s.velocity.x, terminal, max_relative = 0.01);
    }

    #[test]
    fn kinetic_energy_decays_without_field() {
        let params = RobotParams::default();
        let mut s = RobotState {
            position: Vec2::zeros(),
            heading: 0.0,
            velocity: Vec2::new(0.05, -0.02),
            angular_velocity: 3.0,
        };
        let ke = |s: &RobotState| {
            0.5 * params.mass * s.velocity.norm_squared()
                + 0.5 * params.yaw_inertia * s.angular_velocity.powi(2)
        };
        let mut prev = ke(&s);
        for _ in 0..500 {
            s = integrate(&s, &PlanarWrench::default(), &params, 0.01);
            let now = ke(&s);
            assert!(now <= prev + 1e-18, "kinetic energy grew: {prev} -> {now}");
            prev = now;
        }
    }

    #[test]
    fn failure_detection_thresholds() {
        let base = TickRecord {
            t: 0.0,
            robots: [
                RobotState::at_rest(Vec2::new(-0.05, 0.0), 0.0),
                RobotState::at_rest(Vec2::new(0.05, 0.0), 0.0),
            ],
            targets: [(Vec2::new(-0.05, 0.0), 0.0), (Vec2::new(0.05, 0.0), 0.0)],
            desired: WrenchStack::zero(),
            achieved: WrenchStack::zero(),
            epms: vec![],
            residual: 0.0,
            solver_failed: false,
            separation: 0.1,
            failed: false,
        };
        assert!(!failure_detect(&base));
        // Positional error beyond 50 mm.
        let mut r = base.clone();
        r.targets[0].0 = Vec2::new(0.011, 0.0);
        assert!(failure_detect(&r));
        // Residual beyond 0.5.
        let mut r = base.clone();
        r.residual = 0.6;
        assert!(failure_detect(&r));
        // Separation below 10 mm.
        let mut r = base.clone();
        r.separation = 0.008;
        assert!(failure_detect(&r));
    }
}

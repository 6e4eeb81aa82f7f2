//! Independent wrench control of two magnetically actuated robots via
//! manipulated external permanent magnets.
//!
//! The crate is organized around the pipeline:
//!
//! * [`magnetics`] — forward dipole model: fields, gradients, wrenches and
//!   the reduction to the five controllable wrench components per robot.
//! * [`optimizer`] — the inverse problem: external-magnet poses minimizing
//!   the error to a desired stacked wrench, under workspace-radius and
//!   mutual-attraction constraints, with seeded multi-start local solves.
//! * [`crosstalk`] — per-degree-of-freedom activation studies and sweeps
//!   quantifying how independently the ten wrench components can be driven.
//! * [`sim`] — closed-loop planar simulation: PID pose tracking at 2 Hz on
//!   pre-planned trajectories, re-solving magnet poses each control tick.
//! * [`scenario`] — configuration files, result artifacts and run manifests.

pub mod crosstalk;
pub mod magnetics;
pub mod math;
pub mod nlp;
pub mod optimizer;
pub mod scenario;
pub mod sim;

pub use magnetics::{
    dipole_field, dipole_force_between, dipole_gradient, field_at, gradient_at,
    moment_from_cylinder, reduce_wrench, wrench_global, wrench_stack, CylMagnet, Dipole,
    MagneticsError, Wrench5, Wrench6, WrenchStack, MU_0,
};
pub use math::{Mat3, Vec2, Vec3};

//! Forward dipole magnetics: fields, gradients, superposition, wrenches and
//! frame reductions.
//!
//! Every function here is a pure function of its inputs. Positions are in
//! meters, moments in A·m², fields in T, gradients in T/m, forces in N and
//! torques in N·m.
//!
//! Sign convention: the displacement used by [`dipole_field`] and
//! [`dipole_gradient`] runs from the dipole to the evaluation point. The
//! field itself is even in the displacement so the choice is invisible
//! there, but the gradient is odd in it; this is the convention under which
//! the gradient matches finite differences of the field.

use serde::{Deserialize, Serialize};

use crate::math::{rotation_aligning_x, Mat3, Vec3};

/// Vacuum permeability, H/m.
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Below this source/point separation the point-dipole model is meaningless
/// for the magnets considered here and evaluation is refused.
pub const MIN_DIPOLE_DISTANCE: f64 = 1e-3;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum MagneticsError {
    #[error("source and evaluation point are {distance:.3e} m apart, below the {MIN_DIPOLE_DISTANCE:.0e} m dipole-model limit")]
    TooClose { distance: f64 },
    #[error("direction vector has zero length")]
    ZeroDirection,
}

/// A point magnetic source: position (m) and moment (A·m²).
///
/// Used for both the large manipulated external magnets (EPMs) and the small
/// magnets embedded in the robots (IPMs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dipole {
    pub position: Vec3,
    pub moment: Vec3,
}

impl Dipole {
    pub fn new(position: Vec3, moment: Vec3) -> Self {
        Self { position, moment }
    }
}

/// An axially magnetized cylindrical magnet described by its geometry and
/// remanence; reduced to an equivalent point dipole via [`moment_from_cylinder`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylMagnet {
    /// Diameter, m.
    #[serde(rename = "diameter_m")]
    pub diameter: f64,
    /// Length, m.
    #[serde(rename = "length_m")]
    pub length: f64,
    /// Remanence, T.
    #[serde(rename = "remanence_t")]
    pub remanence: f64,
}

impl CylMagnet {
    pub fn new(diameter: f64, length: f64, remanence: f64) -> Self {
        Self {
            diameter,
            length,
            remanence,
        }
    }

    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * (self.diameter / 2.0).powi(2) * self.length
    }
}

/// Moment magnitude of the equivalent point dipole, `|m| = Br V / mu0`.
pub fn moment_from_cylinder(magnet: &CylMagnet) -> f64 {
    magnet.remanence * magnet.volume() / MU_0
}

/// Full torque/force pair on a body, global frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wrench6 {
    pub torque: Vec3,
    pub force: Vec3,
}

/// The five magnetically controllable wrench components of one IPM,
/// expressed in the frame whose x axis is the IPM magnetization direction.
/// The roll torque about that axis is identically zero and is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench5 {
    pub tau_y: f64,
    pub tau_z: f64,
    pub f_x: f64,
    pub f_y: f64,
    pub f_z: f64,
}

impl Wrench5 {
    pub const DOF: usize = 5;

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.tau_y, self.tau_z, self.f_x, self.f_y, self.f_z]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            tau_y: a[0],
            tau_z: a[1],
            f_x: a[2],
            f_y: a[3],
            f_z: a[4],
        }
    }
}

/// Stacked controllable wrenches of both robots, robot 1 first.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WrenchStack {
    pub w1: Wrench5,
    pub w2: Wrench5,
}

impl WrenchStack {
    pub const DOF: usize = 10;

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(w1: Wrench5, w2: Wrench5) -> Self {
        Self { w1, w2 }
    }

    pub fn as_array(&self) -> [f64; 10] {
        let a = self.w1.as_array();
        let b = self.w2.as_array();
        [
            a[0], a[1], a[2], a[3], a[4], b[0], b[1], b[2], b[3], b[4],
        ]
    }

    pub fn from_array(v: [f64; 10]) -> Self {
        Self {
            w1: Wrench5::from_array([v[0], v[1], v[2], v[3], v[4]]),
            w2: Wrench5::from_array([v[5], v[6], v[7], v[8], v[9]]),
        }
    }
}

fn displacement(source: &Dipole, point: &Vec3) -> Result<(Vec3, f64), MagneticsError> {
    let r = point - source.position;
    let dist = r.norm();
    if dist < MIN_DIPOLE_DISTANCE {
        return Err(MagneticsError::TooClose { distance: dist });
    }
    Ok((r, dist))
}

/// Magnetic field of a point dipole at `point`, T.
///
/// `B = mu0 / (4 pi |r|^3) (3 r_hat r_hat^T - I) m` with `r` running from the
/// dipole to `point`.
pub fn dipole_field(source: &Dipole, point: &Vec3) -> Result<Vec3, MagneticsError> {
    let (r, dist) = displacement(source, point)?;
    let u = r / dist;
    let m = &source.moment;
    let scale = MU_0 / (4.0 * std::f64::consts::PI * dist.powi(3));
    Ok(scale * (3.0 * u * u.dot(m) - m))
}

/// Spatial gradient of the dipole field at `point`, T/m. Symmetric and
/// traceless.
///
/// `B_grad = 3 mu0 / (4 pi |r|^4) (m r_hat^T + r_hat m^T + (r_hat . m)(I - 5 r_hat r_hat^T))`.
pub fn dipole_gradient(source: &Dipole, point: &Vec3) -> Result<Mat3, MagneticsError> {
    let (r, dist) = displacement(source, point)?;
    let u = r / dist;
    let m = &source.moment;
    let scale = 3.0 * MU_0 / (4.0 * std::f64::consts::PI * dist.powi(4));
    let udm = u.dot(m);
    let grad = m * u.transpose() + u * m.transpose() + udm * (Mat3::identity() - 5.0 * u * u.transpose());
    Ok(scale * grad)
}

/// Superposed field of several sources at `point`.
pub fn field_at(sources: &[Dipole], point: &Vec3) -> Result<Vec3, MagneticsError> {
    let mut total = Vec3::zeros();
    for s in sources {
        total += dipole_field(s, point)?;
    }
    Ok(total)
}

/// Superposed field gradient of several sources at `point`.
pub fn gradient_at(sources: &[Dipole], point: &Vec3) -> Result<Mat3, MagneticsError> {
    let mut total = Mat3::zeros();
    for s in sources {
        total += dipole_gradient(s, point)?;
    }
    Ok(total)
}

/// Wrench on an IPM immersed in field `b` with field gradient `b_grad`,
/// global frame: torque `m x B`, force `B_grad^T m`.
pub fn wrench_global(ipm: &Dipole, b: &Vec3, b_grad: &Mat3) -> Wrench6 {
    Wrench6 {
        torque: ipm.moment.cross(b),
        force: b_grad.transpose() * ipm.moment,
    }
}

/// Express a global wrench in the magnetization-aligned frame of an IPM and
/// drop the uncontrollable roll torque.
///
/// The frame is the minimal rotation taking global x onto `ipm_moment_dir`
/// (half turn about z at the antipode), so the roll angle about the
/// magnetization axis is fixed by convention.
pub fn reduce_wrench(w: &Wrench6, ipm_moment_dir: &Vec3) -> Result<Wrench5, MagneticsError> {
    let rot = rotation_aligning_x(ipm_moment_dir).ok_or(MagneticsError::ZeroDirection)?;
    let tau = rot.transpose() * w.torque;
    let force = rot.transpose() * w.force;
    Ok(Wrench5 {
        tau_y: tau.y,
        tau_z: tau.z,
        f_x: force.x,
        f_y: force.y,
        f_z: force.z,
    })
}

/// Reduced wrenches on a set of IPMs under the given EPMs.
///
/// For each IPM the sources are all EPMs plus, when `include_interagent` is
/// set, every other IPM.
pub fn wrenches_for_ipms(
    epms: &[Dipole],
    ipms: &[Dipole],
    include_interagent: bool,
) -> Result<Vec<Wrench5>, MagneticsError> {
    let mut out = Vec::with_capacity(ipms.len());
    for (j, ipm) in ipms.iter().enumerate() {
        let mut b = field_at(epms, &ipm.position)?;
        let mut g = gradient_at(epms, &ipm.position)?;
        if include_interagent {
            for (k, other) in ipms.iter().enumerate() {
                if k != j {
                    b += dipole_field(other, &ipm.position)?;
                    g += dipole_gradient(other, &ipm.position)?;
                }
            }
        }
        let w6 = wrench_global(ipm, &b, &g);
        out.push(reduce_wrench(&w6, &ipm.moment)?);
    }
    Ok(out)
}

/// Stacked controllable wrenches on a pair of IPMs, inter-agent terms
/// included.
pub fn wrench_stack(
    epms: &[Dipole],
    ipm1: &Dipole,
    ipm2: &Dipole,
) -> Result<WrenchStack, MagneticsError> {
    let ws = wrenches_for_ipms(epms, &[*ipm1, *ipm2], true)?;
    Ok(WrenchStack { w1: ws[0], w2: ws[1] })
}

/// Force exerted on dipole `b` by dipole `a`, N.
pub fn dipole_force_between(a: &Dipole, b: &Dipole) -> Result<Vec3, MagneticsError> {
    let g = dipole_gradient(a, &b.position)?;
    Ok(g.transpose() * b.moment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_x_dipole() -> Dipole {
        Dipole::new(Vec3::zeros(), Vec3::x())
    }

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
        let axis = loop {
            let v = random_vec(rng, 1.0);
            if v.norm() > 1e-3 {
                break v.normalize();
            }
        };
        let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
            .into_inner()
    }

    /// Source/point pair with separation in [0.05, 0.5] m and a moment of
    /// arbitrary direction and magnitude in [0.05, 1000] A·m².
    fn random_pair(rng: &mut ChaCha8Rng) -> (Dipole, Vec3) {
        let position = random_vec(rng, 0.3);
        let dir = loop {
            let v = random_vec(rng, 1.0);
            if v.norm() > 1e-3 {
                break v.normalize();
            }
        };
        let sep = rng.random_range(0.05..0.5);
        let m_dir = loop {
            let v = random_vec(rng, 1.0);
            if v.norm() > 1e-3 {
                break v.normalize();
            }
        };
        let m_norm = rng.random_range(0.05..1000.0);
        (
            Dipole::new(position, m_norm * m_dir),
            position + sep * dir,
        )
    }

    #[test]
    fn on_axis_field_matches_closed_form() {
        // mu0 m / (2 pi d^3) along the axis
        let b = dipole_field(&unit_x_dipole(), &Vec3::new(0.1, 0.0, 0.0)).unwrap();
        assert_relative_eq!(b.x, 2.0e-4, max_relative = 1e-12);
        assert_abs_diff_eq!(b.y, 0.0);
        assert_abs_diff_eq!(b.z, 0.0);
    }

    #[test]
    fn equatorial_field_matches_closed_form() {
        // -mu0 m / (4 pi d^3) anti-parallel to the moment
        let b = dipole_field(&unit_x_dipole(), &Vec3::new(0.0, 0.1, 0.0)).unwrap();
        assert_relative_eq!(b.x, -1.0e-4, max_relative = 1e-12);
        assert_abs_diff_eq!(b.y, 0.0);
        assert_abs_diff_eq!(b.z, 0.0);
    }

    #[test]
    fn field_is_linear_in_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (src, point) = random_pair(&mut rng);
            let doubled = Dipole::new(src.position, 2.0 * src.moment);
            let b1 = dipole_field(&src, &point).unwrap();
            let b2 = dipole_field(&doubled, &point).unwrap();
            assert_relative_eq!(b2, 2.0 * b1, max_relative = 1e-14);
        }
    }

    #[test]
    fn coincident_point_is_rejected() {
        let err = dipole_field(&unit_x_dipole(), &Vec3::new(5e-4, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, MagneticsError::TooClose { .. }));
        assert!(dipole_gradient(&unit_x_dipole(), &Vec3::zeros()).is_err());
    }

    #[test]
    fn on_axis_gradient_matches_closed_form() {
        // d/dx of mu0 m / (2 pi x^3) = -3 mu0 m / (2 pi x^4)
        let g = dipole_gradient(&unit_x_dipole(), &Vec3::new(0.1, 0.0, 0.0)).unwrap();
        assert_relative_eq!(g[(0, 0)], -6.0e-3, max_relative = 1e-12);
    }

    #[test]
    fn gradient_is_symmetric_and_traceless() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (src, point) = random_pair(&mut rng);
            let g = dipole_gradient(&src, &point).unwrap();
            let scale = g.abs().max().max(f64::MIN_POSITIVE);
            assert!((g - g.transpose()).abs().max() <= 1e-12 * scale);
            assert!(g.trace().abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_of_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for _ in 0..1000 {
            let (src, point) = random_pair(&mut rng);
            let g = dipole_gradient(&src, &point).unwrap();
            let scale = g.abs().max();
            for col in 0..3 {
                let mut dp = Vec3::zeros();
                dp[col] = h;
                let bp = dipole_field(&src, &(point + dp)).unwrap();
                let bm = dipole_field(&src, &(point - dp)).unwrap();
                let fd = (bp - bm) / (2.0 * h);
                for row in 0..3 {
                    assert!(
                        (fd[row] - g[(row, col)]).abs() <= 1e-5 * scale,
                        "entry ({row},{col}): fd {} vs analytic {}",
                        fd[row],
                        g[(row, col)]
                    );
                }
            }
        }
    }

    #[test]
    fn field_and_gradient_follow_the_dipole_scaling_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let (src, point) = random_pair(&mut rng);
            let far = src.position + 2.0 * (point - src.position);
            let b1 = dipole_field(&src, &point).unwrap();
            let b2 = dipole_field(&src, &far).unwrap();
            assert_relative_eq!(b2, b1 / 8.0, max_relative = 1e-12);
            let g1 = dipole_gradient(&src, &point).unwrap();
            let g2 = dipole_gradient(&src, &far).unwrap();
            assert_relative_eq!(g2, g1 / 16.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn field_and_gradient_are_rotation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (src, point) = random_pair(&mut rng);
            let rot = random_rotation(&mut rng);
            let src_rot = Dipole::new(rot * src.position, rot * src.moment);
            let point_rot = rot * point;
            let b = dipole_field(&src, &point).unwrap();
            let b_rot = dipole_field(&src_rot, &point_rot).unwrap();
            assert_relative_eq!(b_rot, rot * b, max_relative = 1e-9, epsilon = 1e-18);
            let g = dipole_gradient(&src, &point).unwrap();
            let g_rot = dipole_gradient(&src_rot, &point_rot).unwrap();
            assert_relative_eq!(
                g_rot,
                rot * g * rot.transpose(),
                max_relative = 1e-9,
                epsilon = 1e-16
            );
        }
    }

    #[test]
    fn superposition_is_additive_and_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (a, point) = random_pair(&mut rng);
        let b = Dipole::new(a.position + Vec3::new(0.3, 0.1, -0.2), random_vec(&mut rng, 5.0));
        let sum = field_at(&[a, b], &point).unwrap();
        let swapped = field_at(&[b, a], &point).unwrap();
        let parts = dipole_field(&a, &point).unwrap() + dipole_field(&b, &point).unwrap();
        assert_relative_eq!(sum, parts, max_relative = 1e-14);
        assert_relative_eq!(sum, swapped, max_relative = 1e-14);

        let gsum = gradient_at(&[a, b], &point).unwrap();
        let gswapped = gradient_at(&[b, a], &point).unwrap();
        assert_relative_eq!(gsum, gswapped, max_relative = 1e-14);
        let scale = gsum.abs().max();
        assert!((gsum - gsum.transpose()).abs().max() <= 1e-12 * scale);
        assert!(gsum.trace().abs() <= 1e-12 * scale);
    }

    #[test]
    fn empty_source_list_gives_zero() {
        assert_eq!(field_at(&[], &Vec3::x()).unwrap(), Vec3::zeros());
        assert_eq!(gradient_at(&[], &Vec3::x()).unwrap(), Mat3::zeros());
    }

    #[test]
    fn colocated_sources_double_the_field() {
        let src = unit_x_dipole();
        let point = Vec3::new(0.1, 0.05, -0.02);
        let single = dipole_field(&src, &point).unwrap();
        let double = field_at(&[src, src], &point).unwrap();
        assert_relative_eq!(double, 2.0 * single, max_relative = 1e-14);
    }

    #[test]
    fn wrench_global_examples() {
        let ipm = Dipole::new(Vec3::zeros(), Vec3::new(0.1, 0.0, 0.0));
        // m parallel to B: no torque.
        let w = wrench_global(&ipm, &Vec3::new(0.3, 0.0, 0.0), &Mat3::zeros());
        assert_abs_diff_eq!(w.torque.norm(), 0.0);
        // Uniform field: no force.
        assert_abs_diff_eq!(w.force.norm(), 0.0);
        // Direct cross product.
        let w = wrench_global(&ipm, &Vec3::new(0.0, 0.01, 0.0), &Mat3::zeros());
        assert_relative_eq!(w.torque, Vec3::new(0.0, 0.0, 1e-3), max_relative = 1e-14);
        assert_abs_diff_eq!(w.force.norm(), 0.0);
    }

    #[test]
    fn torque_is_always_perpendicular_to_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (src, point) = random_pair(&mut rng);
            let ipm = Dipole::new(point, random_vec(&mut rng, 2.0));
            let b = dipole_field(&src, &point).unwrap();
            let g = dipole_gradient(&src, &point).unwrap();
            let w = wrench_global(&ipm, &b, &g);
            let scale = (w.torque.norm() * ipm.moment.norm()).max(f64::MIN_POSITIVE);
            assert!(w.torque.dot(&ipm.moment).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn reduce_wrench_identity_when_moment_is_x() {
        let w = Wrench6 {
            torque: Vec3::new(0.0, 2.0, 3.0),
            force: Vec3::new(4.0, 5.0, 6.0),
        };
        let r = reduce_wrench(&w, &Vec3::x()).unwrap();
        assert_eq!(r.as_array(), [2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn reduce_wrench_roll_torque_vanishes_for_physical_wrenches() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let (src, point) = random_pair(&mut rng);
            let m = loop {
                let v = random_vec(&mut rng, 1.0);
                if v.norm() > 1e-3 {
                    break v;
                }
            };
            let ipm = Dipole::new(point, m);
            let b = dipole_field(&src, &point).unwrap();
            let g = dipole_gradient(&src, &point).unwrap();
            let w = wrench_global(&ipm, &b, &g);
            // Residual roll torque in the aligned frame is the projection of
            // tau on the moment direction; must vanish.
            let rot = rotation_aligning_x(&ipm.moment.normalize()).unwrap();
            let tau_frame = rot.transpose() * w.torque;
            assert!(tau_frame.x.abs() <= 1e-12 * w.torque.norm().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn reduce_wrench_is_equivariant_up_to_roll() {
        // A common rotation of scene and IPM preserves the frame-x force and
        // the norms of the transverse torque/force pairs; rotations whose
        // axis is perpendicular to x applied to an x-aligned IPM preserve the
        // full reduced wrench.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let dir = loop {
                let v = random_vec(&mut rng, 1.0);
                if v.norm() > 1e-3 {
                    break v.normalize();
                }
            };
            let w = Wrench6 {
                torque: {
                    let t = random_vec(&mut rng, 0.1);
                    t - dir * t.dot(&dir) // physical torque: no roll component
                },
                force: random_vec(&mut rng, 1.0),
            };
            let rot = random_rotation(&mut rng);
            let w_rot = Wrench6 {
                torque: rot * w.torque,
                force: rot * w.force,
            };
            let r0 = reduce_wrench(&w, &dir).unwrap();
            let r1 = reduce_wrench(&w_rot, &(rot * dir)).unwrap();
            assert_relative_eq!(r1.f_x, r0.f_x, max_relative = 1e-9, epsilon = 1e-15);
            assert_relative_eq!(
                r1.tau_y.hypot(r1.tau_z),
                r0.tau_y.hypot(r0.tau_z),
                max_relative = 1e-9,
                epsilon = 1e-15
            );
            assert_relative_eq!(
                r1.f_y.hypot(r1.f_z),
                r0.f_y.hypot(r0.f_z),
                max_relative = 1e-9,
                epsilon = 1e-15
            );
        }
        // Exact equality for an x-aligned IPM under a rotation with axis
        // perpendicular to x (the minimal-rotation convention commutes there).
        for _ in 0..100 {
            let w = Wrench6 {
                torque: {
                    let t = random_vec(&mut rng, 0.1);
                    Vec3::new(0.0, t.y, t.z)
                },
                force: random_vec(&mut rng, 1.0),
            };
            let axis = Vec3::new(0.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if axis.norm() < 1e-3 {
                continue;
            }
            let angle = rng.random_range(-1.5..1.5);
            let rot = nalgebra::Rotation3::from_axis_angle(
                &nalgebra::Unit::new_normalize(axis),
                angle,
            )
            .into_inner();
            let dir = rot * Vec3::x();
            let w_rot = Wrench6 {
                torque: rot * w.torque,
                force: rot * w.force,
            };
            let r0 = reduce_wrench(&w, &Vec3::x()).unwrap();
            let r1 = reduce_wrench(&w_rot, &dir).unwrap();
            for (a, b) in r0.as_array().iter().zip(r1.as_array().iter()) {
                assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn reduce_wrench_rejects_zero_direction() {
        let w = Wrench6 {
            torque: Vec3::zeros(),
            force: Vec3::zeros(),
        };
        assert_eq!(
            reduce_wrench(&w, &Vec3::zeros()).unwrap_err(),
            MagneticsError::ZeroDirection
        );
    }

    #[test]
    fn wrench_stack_far_apart_is_negligible() {
        let ipm1 = Dipole::new(Vec3::new(-5.0, 0.0, 0.0), 0.1133 * Vec3::x());
        let ipm2 = Dipole::new(Vec3::new(5.0, 0.0, 0.0), 0.1133 * Vec3::x());
        let stack = wrench_stack(&[], &ipm1, &ipm2).unwrap();
        for c in stack.as_array() {
            assert!(c.abs() < 1e-9, "component {c} not negligible");
        }
    }

    #[test]
    fn wrench_stack_swaps_with_robot_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let epms = vec![
            Dipole::new(Vec3::new(0.0, 0.2, 0.0), random_vec(&mut rng, 500.0)),
            Dipole::new(Vec3::new(0.0, -0.25, 0.1), random_vec(&mut rng, 500.0)),
        ];
        let ipm1 = Dipole::new(Vec3::new(-0.05, 0.0, 0.0), 0.1133 * Vec3::x());
        let ipm2 = Dipole::new(Vec3::new(0.05, 0.0, 0.0), 0.1133 * Vec3::y());
        let ab = wrench_stack(&epms, &ipm1, &ipm2).unwrap();
        let ba = wrench_stack(&epms, &ipm2, &ipm1).unwrap();
        assert_eq!(ab.w1, ba.w2);
        assert_eq!(ab.w2, ba.w1);
    }

    #[test]
    fn coaxial_aligned_ipms_attract_along_the_axis() {
        // 3 mu0 m1 m2 / (2 pi d^4), equal and opposite.
        let m = 0.1133;
        let d = 0.05;
        let ipm1 = Dipole::new(Vec3::zeros(), m * Vec3::x());
        let ipm2 = Dipole::new(Vec3::new(d, 0.0, 0.0), m * Vec3::x());
        let expected = 3.0 * MU_0 * m * m / (2.0 * std::f64::consts::PI * d.powi(4));
        let stack = wrench_stack(&[], &ipm1, &ipm2).unwrap();
        assert_relative_eq!(stack.w1.f_x, expected, max_relative = 1e-12);
        assert_relative_eq!(stack.w2.f_x, -expected, max_relative = 1e-12);
        assert!(stack.w1.tau_y.abs() < 1e-15 && stack.w1.tau_z.abs() < 1e-15);
        assert!(stack.w1.f_y.abs() < 1e-15 && stack.w1.f_z.abs() < 1e-15);
    }

    #[test]
    fn pair_force_is_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (a, point) = random_pair(&mut rng);
            let b = Dipole::new(point, random_vec(&mut rng, 100.0));
            let f_ab = dipole_force_between(&a, &b).unwrap();
            let f_ba = dipole_force_between(&b, &a).unwrap();
            let scale = f_ab.norm().max(f64::MIN_POSITIVE);
            assert!((f_ab + f_ba).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn coaxial_epm_pair_hits_ten_g_at_the_derived_distance() {
        // Solve 3 mu0 m^2 / (2 pi d^4) = 10 g for d, then check the force.
        let magnet = CylMagnet::new(0.1, 0.1, 1.45);
        let m = moment_from_cylinder(&magnet);
        let ten_g = 10.0 * 9.81;
        let d = (3.0 * MU_0 * m * m / (2.0 * std::f64::consts::PI * ten_g)).powf(0.25);
        assert_relative_eq!(d, 0.266, max_relative = 2e-3);
        let a = Dipole::new(Vec3::zeros(), m * Vec3::x());
        let b = Dipole::new(Vec3::new(d, 0.0, 0.0), m * Vec3::x());
        let f = dipole_force_between(&a, &b).unwrap();
        assert_relative_eq!(f.norm(), ten_g, max_relative = 1e-9);
        assert!(f.x < 0.0, "aligned coaxial dipoles attract");
    }

    #[test]
    fn pair_force_matches_energy_gradient() {
        // F_on_b = grad_{p_b} (m_b . B_a(p_b)), checked by central differences
        // of the interaction energy for arbitrary (incl. orthogonal) moments.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = 1e-6;
        for _ in 0..200 {
            let (a, point) = random_pair(&mut rng);
            let b = Dipole::new(point, random_vec(&mut rng, 100.0));
            let f = dipole_force_between(&a, &b).unwrap();
            let mut fd = Vec3::zeros();
            for axis in 0..3 {
                let mut dp = Vec3::zeros();
                dp[axis] = h;
                let ep = b.moment.dot(&dipole_field(&a, &(b.position + dp)).unwrap());
                let em = b.moment.dot(&dipole_field(&a, &(b.position - dp)).unwrap());
                fd[axis] = (ep - em) / (2.0 * h);
            }
            let scale = f.norm().max(1e-12);
            assert!(
                (f - fd).norm() <= 1e-5 * scale,
                "analytic {f:?} vs energy-gradient {fd:?}"
            );
        }
    }

    #[test]
    fn cylinder_moments_match_the_derived_values() {
        let ipm = CylMagnet::new(0.005, 0.005, 1.45);
        let epm = CylMagnet::new(0.1, 0.1, 1.45);
        // Br V / mu0, V = pi (d/2)^2 L
        assert_relative_eq!(moment_from_cylinder(&ipm), 0.1133, max_relative = 5e-4);
        assert_relative_eq!(moment_from_cylinder(&epm), 906.0, max_relative = 5e-4);
        let flat = CylMagnet::new(0.005, 0.0, 1.45);
        assert_eq!(moment_from_cylinder(&flat), 0.0);
    }
}

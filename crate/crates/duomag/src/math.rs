//! Small shared linear-algebra helpers on top of nalgebra.

use std::f64::consts::PI;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Vec2 = nalgebra::Vector2<f64>;

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        PI
    } else {
        wrapped
    }
}

/// Signed shortest-arc difference `to - from`, in `(-pi, pi]`.
pub fn shortest_arc(from: f64, to: f64) -> f64 {
    wrap_angle(to - from)
}

/// Skew-symmetric cross-product matrix `[v]x` such that `[v]x w = v x w`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Minimal rotation `R` with `R * x_hat = dir_hat`.
///
/// The rotation axis is `x_hat x dir_hat`; when `dir` is anti-parallel to
/// `x_hat` the axis is undefined and the convention is a half turn about
/// `z_hat`. Returns `None` for a zero-length `dir`.
pub fn rotation_aligning_x(dir: &Vec3) -> Option<Mat3> {
    let norm = dir.norm();
    if norm < 1e-12 {
        return None;
    }
    let u = dir / norm;
    let c = u.x;
    if 1.0 + c < 1e-12 {
        // Anti-parallel: half turn about z.
        return Some(Mat3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0));
    }
    let v = Vec3::new(0.0, -u.z, u.y); // x_hat x u
    let vx = skew(&v);
    Some(Mat3::identity() + vx + vx * vx / (1.0 + c))
}

//! Rigid-body pose algebra on SE(3).
//!
//! Tangent vectors are ordered `[rho; theta]` (translation first), and
//! `hat(xi) = [[theta^, rho], [0, 0]]`. Perturbations are applied on the
//! right, `X * exp(hat(psi))`, so gradients live in the body frame of `X`.
//!
//! Jacobians follow the usual convention where
//! `exp(xi + d) ~= exp(xi) * exp(J_r(xi) d)`; consequently
//! `log(exp(xi) * exp(d)) ~= xi + J_r(xi)^-1 d`.

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};

/// Below this angle the SO(3) exponential and logarithm use their series form.
const SMALL_ANGLE: f64 = 1e-6;
/// Below this angle the Jacobian coefficients use a 4th-order series; the
/// closed forms lose digits to cancellation well before `SMALL_ANGLE`.
const SERIES_ANGLE: f64 = 0.05;
/// The translational Jacobian block cancels harder and switches later.
const SERIES_ANGLE_Q: f64 = 0.15;
/// Distance to a half turn at which the logarithm is refused.
pub const LOG_BRANCH_TOL: f64 = 1e-6;

/// Skew-symmetric matrix with `skew(a) * b == a.cross(b)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`], reading the off-diagonal entries of a skew matrix.
pub fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// An element of the Lie algebra se(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twist {
    pub rho: Vector3<f64>,
    pub theta: Vector3<f64>,
}

impl Twist {
    pub fn new(rho: Vector3<f64>, theta: Vector3<f64>) -> Self {
        Self { rho, theta }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    /// Planar twist with translation `(x, y)` and rotation `yaw` about z.
    pub fn planar(x: f64, y: f64, yaw: f64) -> Self {
        Self::new(Vector3::new(x, y, 0.0), Vector3::new(0.0, 0.0, yaw))
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]))
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.rho.x,
            self.rho.y,
            self.rho.z,
            self.theta.x,
            self.theta.y,
            self.theta.z,
        )
    }

    /// The 4x4 twist matrix.
    pub fn hat(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&self.theta));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.rho);
        m
    }

    /// Inverse of [`Twist::hat`]; ignores the bottom row.
    pub fn vee(m: &Matrix4<f64>) -> Self {
        let w = m.fixed_view::<3, 3>(0, 0).into_owned();
        Self::new(m.fixed_view::<3, 1>(0, 3).into_owned(), unskew(&w))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.rho * s, self.theta * s)
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }
}

/// A rigid transform `[[R, p], [0, 1]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    position: Vector3<f64>,
}

impl Pose {
    /// Builds a pose, rejecting rotations that are not orthonormal with
    /// determinant +1 (each check at 1e-9).
    pub fn new(rotation: Matrix3<f64>, position: Vector3<f64>) -> Result<Self> {
        let pose = Self { rotation, position };
        if !pose.is_valid(1e-9) {
            return Err(Error::InvalidParameter(
                "rotation is not a proper orthonormal matrix".into(),
            ));
        }
        Ok(pose)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            position: Vector3::zeros(),
        }
    }

    /// Pose in the z = 0 plane with heading `yaw`.
    pub fn planar(x: f64, y: f64, yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            position: Vector3::new(x, y, 0.0),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn position(&self) -> &Vector3<f64> {
        &self.position
    }

    /// Heading of the body x-axis projected onto the world xy-plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            position: -(rt * self.position),
        }
    }

    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            position: self.rotation * other.position + self.position,
        }
    }

    /// `self^-1 * other`: `other` expressed in the frame of `self`.
    pub fn between(&self, other: &Pose) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt * other.rotation,
            position: rt * (other.position - self.position),
        }
    }

    /// Right perturbation `self * exp(hat(xi))`.
    pub fn retract(&self, xi: &Twist) -> Self {
        self.compose(&exp_map(xi))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.position
    }

    /// Re-orthonormalizes the rotation (SVD projection onto SO(3)).
    pub fn normalized(&self) -> Self {
        let svd = self.rotation.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Matrix3::identity();
        if (u * vt).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Self {
            rotation: u * d * vt,
            position: self.position,
        }
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let rtr = self.rotation.transpose() * self.rotation;
        (rtr - Matrix3::identity()).amax() <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
            && self.position.iter().all(|v| v.is_finite())
    }
}

/// Rodrigues' formula.
pub fn exp_so3(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle = theta.norm();
    let w = skew(theta);
    if angle < SMALL_ANGLE {
        return Matrix3::identity() + w + 0.5 * w * w;
    }
    let (s, c) = angle.sin_cos();
    Matrix3::identity() + (s / angle) * w + ((1.0 - c) / (angle * angle)) * w * w
}

/// Principal rotation vector of `r`. Fails within [`LOG_BRANCH_TOL`] of a half turn.
pub fn log_so3(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let axis2s = unskew(&(r - r.transpose()));
    let sin_angle = 0.5 * axis2s.norm();
    let cos_angle = (0.5 * (r.trace() - 1.0)).clamp(-1.0, 1.0);
    let angle = sin_angle.atan2(cos_angle);
    if angle >= std::f64::consts::PI - LOG_BRANCH_TOL {
        return Err(Error::BranchAmbiguity { angle });
    }
    if angle < SMALL_ANGLE {
        // sin(angle) / angle -> 1
        return Ok(0.5 * axis2s);
    }
    Ok(axis2s * (0.5 * angle / sin_angle))
}

/// (1 - cos t) / t^2
fn coeff_b(t: f64) -> f64 {
    if t < SERIES_ANGLE {
        let t2 = t * t;
        0.5 - t2 / 24.0 + t2 * t2 / 720.0
    } else {
        (1.0 - t.cos()) / (t * t)
    }
}

/// (t - sin t) / t^3
fn coeff_c(t: f64) -> f64 {
    if t < SERIES_ANGLE {
        let t2 = t * t;
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    } else {
        (t - t.sin()) / (t * t * t)
    }
}

/// 1/t^2 - (1 + cos t) / (2 t sin t), written with cot(t/2) so it stays finite near pi.
fn coeff_inv(t: f64) -> f64 {
    if t < SERIES_ANGLE {
        let t2 = t * t;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        1.0 / (t * t) - 1.0 / (2.0 * t * (0.5 * t).tan())
    }
}

/// (t^2 + 2 cos t - 2) / (2 t^4)
fn coeff_q2(t: f64) -> f64 {
    if t < SERIES_ANGLE_Q {
        let t2 = t * t;
        1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0 - t2 * t2 * t2 / 3628800.0
    } else {
        (t * t + 2.0 * t.cos() - 2.0) / (2.0 * t.powi(4))
    }
}

/// (2t - 3 sin t + t cos t) / (2 t^5)
fn coeff_q3(t: f64) -> f64 {
    if t < SERIES_ANGLE_Q {
        let t2 = t * t;
        1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120960.0 - t2 * t2 * t2 / 9979200.0
    } else {
        (2.0 * t - 3.0 * t.sin() + t * t.cos()) / (2.0 * t.powi(5))
    }
}

/// Left Jacobian of SO(3).
pub fn left_jacobian_so3(theta: &Vector3<f64>) -> Matrix3<f64> {
    let t = theta.norm();
    let w = skew(theta);
    Matrix3::identity() + coeff_b(t) * w + coeff_c(t) * w * w
}

/// Inverse of the left Jacobian of SO(3).
pub fn left_jacobian_so3_inv(theta: &Vector3<f64>) -> Matrix3<f64> {
    let t = theta.norm();
    let w = skew(theta);
    Matrix3::identity() - 0.5 * w + coeff_inv(t) * w * w
}

/// Off-diagonal block coupling translation and rotation in the SE(3) left Jacobian.
fn q_block(xi: &Twist) -> Matrix3<f64> {
    let t = xi.theta.norm();
    let p = skew(&xi.rho);
    let w = skew(&xi.theta);
    let wp = w * p;
    let pw = p * w;
    let wpw = wp * w;
    0.5 * p
        + coeff_c(t) * (wp + pw + wpw)
        + coeff_q2(t) * (w * wp + pw * w - 3.0 * wpw)
        + coeff_q3(t) * (wpw * w + w * wpw)
}

/// Exponential map se(3) -> SE(3).
pub fn exp_map(xi: &Twist) -> Pose {
    Pose {
        rotation: exp_so3(&xi.theta),
        position: left_jacobian_so3(&xi.theta) * xi.rho,
    }
}

/// Principal logarithm SE(3) -> se(3).
pub fn log_map(x: &Pose) -> Result<Twist> {
    let theta = log_so3(&x.rotation)?;
    let rho = left_jacobian_so3_inv(&theta) * x.position;
    Ok(Twist::new(rho, theta))
}

/// Left Jacobian of SE(3).
pub fn left_jacobian(xi: &Twist) -> Matrix6<f64> {
    let j = left_jacobian_so3(&xi.theta);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&j);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&j);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&q_block(xi));
    m
}

/// Inverse of the SE(3) left Jacobian, in closed form.
pub fn left_jacobian_inv(xi: &Twist) -> Matrix6<f64> {
    let ji = left_jacobian_so3_inv(&xi.theta);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&ji);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&ji);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-ji * q_block(xi) * ji));
    m
}

/// Right Jacobian of SE(3): `J_r(xi) = J_l(-xi)`.
pub fn right_jacobian(xi: &Twist) -> Matrix6<f64> {
    left_jacobian(&xi.neg())
}

/// Inverse right Jacobian: the linear map in
/// `log(exp(xi) * exp(eps * psi)) ~= xi + eps * J_r(xi)^-1 * psi`.
pub fn right_jacobian_inv(xi: &Twist) -> Matrix6<f64> {
    left_jacobian_inv(&xi.neg())
}

/// Diagonal pose metric with the interpolation radius `xi_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceMetric {
    gamma: [f64; 6],
    xi_max: f64,
}

/// Weight applied to z, roll and pitch in the planar preset. Large enough
/// that out-of-plane offsets dominate the metric.
pub const OUT_OF_PLANE_WEIGHT: f64 = 100.0;

impl DistanceMetric {
    pub fn new(gamma: [f64; 6], xi_max: f64) -> Result<Self> {
        if gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "metric weights must be positive, got {gamma:?}"
            )));
        }
        if !(xi_max.is_finite() && xi_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "xi_max must be positive, got {xi_max}"
            )));
        }
        Ok(Self { gamma, xi_max })
    }

    /// Planar metric `(x, y, yaw)`; the remaining axes get [`OUT_OF_PLANE_WEIGHT`].
    pub fn planar(gx: f64, gy: f64, gyaw: f64, xi_max: f64) -> Result<Self> {
        let w = OUT_OF_PLANE_WEIGHT;
        Self::new([gx, gy, w, w, w, gyaw], xi_max)
    }

    /// Weights `[1, 1, 0.1]` on `(x, y, yaw)` and radius 2.
    pub fn paper_planar() -> Self {
        Self::planar(1.0, 1.0, 0.1, 2.0).expect("constant metric is valid")
    }

    pub fn gamma(&self) -> &[f64; 6] {
        &self.gamma
    }

    pub fn gamma_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&Vector6::from_column_slice(&self.gamma))
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    pub fn with_xi_max(&self, xi_max: f64) -> Result<Self> {
        Self::new(self.gamma, xi_max)
    }

    /// `sqrt(xi^T Gamma xi)`.
    pub fn weighted_norm(&self, xi: &Twist) -> f64 {
        let v = xi.to_vector();
        v.iter()
            .zip(self.gamma.iter())
            .map(|(x, g)| g * x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Scaled distance `(pi / xi_max) * sqrt(xi^T Gamma xi)`, equal to pi on the radius.
    pub fn delta(&self, xi: &Twist) -> f64 {
        std::f64::consts::PI / self.xi_max * self.weighted_norm(xi)
    }

    /// Upper bound on the Euclidean distance between the positions of two
    /// poses whose metric distance is below `xi_max`.
    ///
    /// `|p_v - p_x| = |J_l(theta) rho| <= |rho|` because the SO(3) left
    /// Jacobian has singular values at most one.
    pub fn translation_radius(&self) -> f64 {
        let g = self.gamma[0].min(self.gamma[1]).min(self.gamma[2]);
        self.xi_max / g.sqrt()
    }
}

/// `delta(log(X^-1 V))`.
pub fn pose_distance(x: &Pose, v: &Pose, metric: &DistanceMetric) -> Result<f64> {
    let xi = log_map(&x.between(v))?;
    Ok(metric.delta(&xi))
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn central_fd<F: Fn(f64) -> Vector6<f64>>(f: F, h: f64) -> Vector6<f64> {
        (f(h) - f(-h)) / (2.0 * h)
    }

    #[test]
    fn zero_twist_is_identity() {
        let x = exp_map(&Twist::zero());
        assert_eq!(x, Pose::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let x = exp_map(&Twist::new(Vector3::zeros(), Vector3::new(0.0, 0.0, PI / 2.0)));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(*x.rotation(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(x.position().norm(), 0.0);
    }

    #[test]
    fn log_of_identity_and_translation() {
        let xi = log_map(&Pose::identity()).unwrap();
        assert_eq!(xi.to_vector(), Vector6::zeros());
        let t = Pose::new(Matrix3::identity(), Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let xi = log_map(&t).unwrap();
        assert_abs_diff_eq!(xi.rho, Vector3::new(1.0, 2.0, 3.0));
        assert_abs_diff_eq!(xi.theta.norm(), 0.0);
    }

    #[test]
    fn log_refuses_half_turn() {
        let x = exp_map(&Twist::new(Vector3::zeros(), Vector3::new(0.0, PI, 0.0)));
        assert!(matches!(log_map(&x), Err(Error::BranchAmbiguity { .. })));
    }

    #[test]
    fn homogeneous_bottom_row() {
        let x = exp_map(&Twist::new(Vector3::new(0.3, -1.0, 2.0), Vector3::new(0.1, 0.2, -0.4)));
        let m = x.to_homogeneous();
        assert_eq!(m.row(3), nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0));
        assert!(x.is_valid(1e-9));
        let h = Twist::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(0.4, 0.5, 0.6)).hat();
        assert_eq!(h.row(3), nalgebra::RowVector4::zeros());
        let w = h.fixed_view::<3, 3>(0, 0).into_owned();
        assert_eq!(w, -w.transpose());
    }

    #[test]
    fn jacobians_are_identity_at_zero() {
        assert_eq!(right_jacobian(&Twist::zero()), Matrix6::identity());
        assert_eq!(right_jacobian_inv(&Twist::zero()), Matrix6::identity());
    }

    #[test]
    fn left_jacobian_inverse_is_inverse() {
        for &t in &[1e-8, 1e-3, 0.04, 0.06, 1.0, 3.0] {
            let xi = Twist::new(
                Vector3::new(0.5, -1.2, 0.7),
                Vector3::new(0.6, -0.3, 0.74).normalize() * t,
            );
            let prod = left_jacobian(&xi) * left_jacobian_inv(&xi);
            assert_abs_diff_eq!(prod, Matrix6::identity(), epsilon = 1e-12);
        }
    }

    #[test]
    fn right_jacobian_matches_exp_differential() {
        // exp(xi + e d) ~= exp(xi) exp(e J_r d)
        let xi = Twist::new(Vector3::new(0.4, -0.8, 1.1), Vector3::new(-0.7, 0.2, 0.9));
        let d = Vector6::new(0.3, 0.1, -0.5, 0.2, -0.4, 0.6);
        let x0 = exp_map(&xi);
        let fd = central_fd(
            |e| {
                let xe = exp_map(&Twist::from_vector(&(xi.to_vector() + d * e)));
                log_map(&x0.between(&xe)).unwrap().to_vector()
            },
            1e-6,
        );
        let analytic = right_jacobian(&xi) * d;
        assert!((fd - analytic).norm() < 1e-7 * analytic.norm());
    }

    #[test]
    fn series_and_closed_form_agree_at_threshold() {
        type Coeff = fn(f64) -> f64;
        let cases: [(Coeff, f64); 5] = [
            (coeff_b, SERIES_ANGLE),
            (coeff_c, SERIES_ANGLE),
            (coeff_inv, SERIES_ANGLE),
            (coeff_q2, SERIES_ANGLE_Q),
            (coeff_q3, SERIES_ANGLE_Q),
        ];
        for (f, t) in cases {
            assert!((f(t * (1.0 - 1e-9)) - f(t * (1.0 + 1e-9))).abs() < 1e-11);
        }
    }

    #[test]
    fn translation_distance_reduces_to_scaled_euclidean() {
        let m = DistanceMetric::new([1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 2.0).unwrap();
        let a = Pose::planar(1.0, 1.0, 0.3);
        let b = a.retract(&Twist::planar(0.7, 0.0, 0.0));
        let d = pose_distance(&a, &b, &m).unwrap();
        assert_abs_diff_eq!(d, PI * 0.7 / 2.0, epsilon = 1e-12);
        assert_eq!(pose_distance(&a, &a, &m).unwrap(), 0.0);
    }

    #[test]
    fn paper_metric_weights() {
        let m = DistanceMetric::paper_planar();
        assert_eq!(m.gamma()[0], 1.0);
        assert_eq!(m.gamma()[1], 1.0);
        assert_eq!(m.gamma()[5], 0.1);
        assert_eq!(m.xi_max(), 2.0);
    }

    #[test]
    fn metric_rejects_non_positive_weights() {
        assert!(DistanceMetric::new([1.0, 1.0, 0.0, 1.0, 1.0, 1.0], 1.0).is_err());
        assert!(DistanceMetric::new([1.0; 6], -1.0).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-0.5), -0.5);
        assert_abs_diff_eq!(wrap_angle(2.0 * PI + 0.25), 0.25, epsilon = 1e-12);
    }
}

//! Geometry primitives, the logistic reward kernel, cube corner keypoints,
//! the episode success criterion and a least-squares rigid transform fit.
//!
//! Everything here is pure and allocation-free; the simulator, dataset
//! transforms and evaluation protocol are all built on top of it.

use crate::error::{Error, Result};

/// 3-vector in meters (or unitless for directions).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_xy(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    /// Unit vector in the same direction, or `None` below `eps`.
    pub fn normalized(self, eps: f64) -> Option<Vec3> {
        let n = self.norm();
        if n <= eps {
            None
        } else {
            Some(self.scale(1.0 / n))
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix; used for rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Rotation about the +z axis by `angle` radians (counter-clockwise).
    pub fn rot_z(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

/// Unit quaternion (w, x, y, z) on the canonical hemisphere w >= 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Builds from components, requiring the norm to be within 1e-6 of 1.
    /// The stored value is renormalized and mapped to w >= 0.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<UnitQuat> {
        let n2 = w * w + x * x + y * y + z * z;
        if !n2.is_finite() {
            return Err(Error::InvalidParameter("quaternion has non-finite components".into()));
        }
        let n = n2.sqrt();
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "quaternion norm {n} deviates from 1 by more than 1e-6"
            )));
        }
        Ok(Self::from_unnormalized(w, x, y, z))
    }

    /// Normalizes arbitrary non-zero components into a canonical unit quaternion.
    pub fn from_unnormalized(w: f64, x: f64, y: f64, z: f64) -> UnitQuat {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        let s = if w < 0.0 { -1.0 / n } else { 1.0 / n };
        UnitQuat { w: w * s, x: x * s, y: y * s, z: z * s }
    }

    /// Rotation of `angle` radians about the (not necessarily unit) `axis`.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> UnitQuat {
        let u = axis.normalized(1e-300).unwrap_or(Vec3::new(0.0, 0.0, 1.0));
        let (s, c) = (angle * 0.5).sin_cos();
        UnitQuat::from_unnormalized(c, u.x * s, u.y * s, u.z * s)
    }

    /// Hamilton product; `self` is applied after `rhs`.
    pub fn mul(self, rhs: UnitQuat) -> UnitQuat {
        let (aw, ax, ay, az) = (self.w, self.x, self.y, self.z);
        let (bw, bx, by, bz) = (rhs.w, rhs.x, rhs.y, rhs.z);
        UnitQuat::from_unnormalized(
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        )
    }

    pub fn conjugate(self) -> UnitQuat {
        UnitQuat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        // q v q^-1 expanded via the cross-product form.
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v).scale(2.0);
        v + t.scale(self.w) + u.cross(t)
    }

    pub fn to_matrix(self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ])
    }

    /// Shortest-arc axis and angle (radians, in [0, pi]) taking the identity
    /// to this rotation.
    pub fn to_axis_angle(self) -> (Vec3, f64) {
        // Work on the w >= 0 hemisphere so the angle is the geodesic one.
        let q = if self.w < 0.0 {
            UnitQuat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
        } else {
            self
        };
        let s2 = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
        let angle = 2.0 * s2.atan2(q.w);
        if s2 < 1e-12 {
            (Vec3::new(0.0, 0.0, 1.0), 0.0)
        } else {
            (Vec3::new(q.x / s2, q.y / s2, q.z / s2), angle)
        }
    }

    pub fn dot(self, o: UnitQuat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Position and orientation of the manipulated cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubePose {
    pub position: Vec3,
    pub orientation: UnitQuat,
}

impl CubePose {
    pub fn new(position: Vec3, orientation: UnitQuat) -> CubePose {
        CubePose { position, orientation }
    }

    pub fn identity() -> CubePose {
        CubePose { position: Vec3::ZERO, orientation: UnitQuat::IDENTITY }
    }
}

/// Parameters of the logistic reward kernel: `a` sets the inverse length
/// scale of the falloff, `b` the sensitivity near zero distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    a: f64,
    b: f64,
}

impl KernelParams {
    pub fn new(a: f64, b: f64) -> Result<KernelParams> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("kernel scale a must be > 0, got {a}")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::InvalidParameter(format!("kernel offset b must be >= 0, got {b}")));
        }
        Ok(KernelParams { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Distance at which the kernel evaluates to `reward`; inverse of
    /// [`kernel`] on (0, 1]. Values outside (0, 1] are clamped.
    pub fn inverse(&self, reward: f64) -> f64 {
        let k = reward.clamp(1e-12, 1.0);
        // cosh(a d) = ((b + 2) / k - b) / 2
        let c = (((self.b + 2.0) / k) - self.b) * 0.5;
        if c <= 1.0 {
            0.0
        } else {
            c.acosh() / self.a
        }
    }
}

impl Default for KernelParams {
    /// a = 30 1/m, b = 1: reward ~0.14 at 10 cm error, a usable gradient
    /// over the arena scale.
    fn default() -> KernelParams {
        KernelParams { a: 30.0, b: 1.0 }
    }
}

/// Logistic kernel (b+2) / (exp(a d) + b + exp(-a d)), in (0, 1], equal to 1
/// at d = 0 and strictly decreasing in d.
pub fn kernel(d: f64, params: &KernelParams) -> f64 {
    let ad = params.a * d;
    // Summing the exponentials first makes numerator and denominator the
    // same expression at d = 0, so kernel(0) is exactly 1 and the value
    // can never round above 1.
    (2.0 + params.b) / ((ad.exp() + (-ad).exp()) + params.b)
}

/// Tolerances of the episode success criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessThresholds {
    pub pos_tol: f64,
    pub ori_tol_deg: f64,
}

impl SuccessThresholds {
    pub fn new(pos_tol: f64, ori_tol_deg: f64) -> Result<SuccessThresholds> {
        if pos_tol <= 0.0 || ori_tol_deg <= 0.0 {
            return Err(Error::InvalidParameter("success tolerances must be positive".into()));
        }
        Ok(SuccessThresholds { pos_tol, ori_tol_deg })
    }
}

impl Default for SuccessThresholds {
    fn default() -> SuccessThresholds {
        SuccessThresholds { pos_tol: 0.02, ori_tol_deg: 22.0 }
    }
}

/// The two benchmark tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Push,
    Lift,
}

impl Task {
    /// Fixed episode length in control steps (15 s / 30 s at 50 Hz).
    pub fn steps_per_episode(self) -> usize {
        match self {
            Task::Push => 750,
            Task::Lift => 1500,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Push => "push",
            Task::Lift => "lift",
        }
    }

    pub fn parse(s: &str) -> Result<Task> {
        match s {
            "push" => Ok(Task::Push),
            "lift" => Ok(Task::Lift),
            other => Err(Error::InvalidInput(format!("unknown task '{other}'"))),
        }
    }
}

/// The eight cube corners for `pose`, in lexicographic sign order of the
/// local offsets: (-,-,-), (-,-,+), (-,+,-), (-,+,+), (+,-,-), ... (+,+,+).
pub fn cube_corners(pose: &CubePose, half_extent: f64) -> [Vec3; 8] {
    let r = pose.orientation.to_matrix();
    let h = half_extent;
    let mut out = [Vec3::ZERO; 8];
    let mut i = 0;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                out[i] = pose.position + r.apply(Vec3::new(sx * h, sy * h, sz * h));
                i += 1;
            }
        }
    }
    out
}

/// Push-task reward: kernel of the position error only.
pub fn push_reward(achieved: Vec3, goal: Vec3, params: &KernelParams) -> f64 {
    kernel((achieved - goal).norm(), params)
}

/// Lift-task reward: mean kernel over the 8 matched corner distances, so a
/// pure translation scores exactly like the push kernel while orientation
/// error degrades every corner pair.
pub fn lift_reward(achieved: &CubePose, goal: &CubePose, half_extent: f64, params: &KernelParams) -> f64 {
    let ca = cube_corners(achieved, half_extent);
    let cg = cube_corners(goal, half_extent);
    let mut sum = 0.0;
    for i in 0..8 {
        sum += kernel((ca[i] - cg[i]).norm(), params);
    }
    sum / 8.0
}

/// Geodesic angle between two rotations in degrees, in [0, 180]; invariant
/// under quaternion sign (double cover).
pub fn angular_distance(q1: UnitQuat, q2: UnitQuat) -> f64 {
    let d = q1.dot(q2).abs().clamp(-1.0, 1.0);
    (2.0 * d.acos()).to_degrees()
}

/// Episode success: position within `pos_tol`, and for Lift additionally
/// orientation within `ori_tol_deg`. Push ignores orientation entirely.
pub fn is_success(achieved: &CubePose, goal: &CubePose, thresholds: &SuccessThresholds, task: Task) -> bool {
    let pos_ok = (achieved.position - goal.position).norm() <= thresholds.pos_tol;
    match task {
        Task::Push => pos_ok,
        Task::Lift => {
            pos_ok && angular_distance(achieved.orientation, goal.orientation) <= thresholds.ori_tol_deg
        }
    }
}

/// Least-squares rigid transform (rotation + translation) mapping
/// `points_before` onto `points_after`, fitted about the centroids.
///
/// Returns the proper rotation (det = +1) and translation such that
/// `after_i ~ R (before_i - c_before) + c_before + t`. Errors on fewer than
/// 3 points or a collinear/coincident configuration.
pub fn rigid_fit(points_before: &[Vec3], points_after: &[Vec3]) -> Result<(UnitQuat, Vec3)> {
    if points_before.len() != points_after.len() {
        return Err(Error::DimensionMismatch {
            expected: points_before.len(),
            got: points_after.len(),
        });
    }
    let n = points_before.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("rigid fit needs >= 3 points, got {n}")));
    }

    let inv_n = 1.0 / n as f64;
    let mut cb = Vec3::ZERO;
    let mut ca = Vec3::ZERO;
    for i in 0..n {
        cb = cb + points_before[i];
        ca = ca + points_after[i];
    }
    cb = cb.scale(inv_n);
    ca = ca.scale(inv_n);

    // Cross-covariance of the centered point sets plus the scatter of the
    // before-points (the latter only for the degeneracy check).
    let mut m = [[0.0f64; 3]; 3];
    let mut scatter = [[0.0f64; 3]; 3];
    for i in 0..n {
        let p = points_before[i] - cb;
        let q = points_after[i] - ca;
        let pv = [p.x, p.y, p.z];
        let qv = [q.x, q.y, q.z];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += pv[r] * qv[c];
                scatter[r][c] += pv[r] * pv[c];
            }
        }
    }

    // Rank check on the before-points: coincident points have no spread at
    // all, collinear points only a single significant eigenvalue.
    let (mut evs, _) = jacobi_eigen_sym(scatter);
    evs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if evs[0] <= 1e-18 || evs[1] <= 1e-12 * evs[0] {
        return Err(Error::Degenerate("rigid fit points are collinear or coincident".into()));
    }

    // Maximum-eigenvector quaternion of the symmetric 4x4 built from the
    // cross-covariance; always yields a proper rotation.
    let tr = m[0][0] + m[1][1] + m[2][2];
    let nmat = [
        [tr, m[1][2] - m[2][1], m[2][0] - m[0][2], m[0][1] - m[1][0]],
        [m[1][2] - m[2][1], m[0][0] - m[1][1] - m[2][2], m[0][1] + m[1][0], m[2][0] + m[0][2]],
        [m[2][0] - m[0][2], m[0][1] + m[1][0], m[1][1] - m[0][0] - m[2][2], m[1][2] + m[2][1]],
        [m[0][1] - m[1][0], m[2][0] + m[0][2], m[1][2] + m[2][1], m[2][2] - m[0][0] - m[1][1]],
    ];
    let (vals, vecs) = jacobi_eigen_sym(nmat);
    let mut best = 0;
    for i in 1..4 {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    let q = UnitQuat::from_unnormalized(vecs[0][best], vecs[1][best], vecs[2][best], vecs[3][best]);
    Ok((q, ca - cb))
}

/// Applies a fitted rigid transform `(r, t)` from [`rigid_fit`] (rotation
/// about `pivot` plus translation) to a point.
pub fn rigid_fit_apply(r: UnitQuat, t: Vec3, pivot: Vec3, p: Vec3) -> Vec3 {
    r.rotate(p - pivot) + pivot + t
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, column eigenvectors). Deterministic sweep order.
fn jacobi_eigen_sym<const N: usize>(mut a: [[f64; N]; N]) -> ([f64; N], [[f64; N]; N]) {
    let mut v = [[0.0f64; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for r in 0..N {
            for c in (r + 1)..N {
                off += a[r][c] * a[r][c];
            }
        }
        if off <= 1e-300 {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..N {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut vals = [0.0f64; N];
    for (i, val) in vals.iter_mut().enumerate() {
        *val = a[i][i];
    }
    (vals, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{next_gaussian, rng_from_seed};
    use rand::Rng;

    fn random_quat(rng: &mut rand_chacha::ChaCha8Rng) -> UnitQuat {
        UnitQuat::from_unnormalized(
            next_gaussian(rng),
            next_gaussian(rng),
            next_gaussian(rng),
            next_gaussian(rng),
        )
    }

    #[test]
    fn kernel_is_one_at_zero() {
        let p = KernelParams::default();
        assert_eq!(kernel(0.0, &p), 1.0);
        let p2 = KernelParams::new(3.0, 0.0).unwrap();
        assert_eq!(kernel(0.0, &p2), 1.0);
    }

    #[test]
    fn kernel_matches_frozen_scalar_value() {
        // 3 / (e^3 + 1 + e^-3), evaluated with an independent
        // high-precision calculator.
        let p = KernelParams::new(30.0, 1.0).unwrap();
        let expected = 0.141_942_465_665_472_1;
        assert!((kernel(0.1, &p) - expected).abs() < 1e-12);
    }

    #[test]
    fn kernel_even_in_displacement() {
        let p = KernelParams::default();
        let x = Vec3::new(0.03, -0.07, 0.01);
        assert_eq!(kernel(x.norm(), &p), kernel((-x).norm(), &p));
    }

    #[test]
    fn kernel_rejects_bad_params() {
        assert!(KernelParams::new(0.0, 1.0).is_err());
        assert!(KernelParams::new(-3.0, 1.0).is_err());
        assert!(KernelParams::new(30.0, -0.5).is_err());
    }

    #[test]
    fn kernel_inverse_round_trips() {
        let p = KernelParams::default();
        for d in [0.0, 0.004, 0.02, 0.1, 0.3] {
            let k = kernel(d, &p);
            assert!((p.inverse(k) - d).abs() < 1e-9, "d={d}");
        }
    }

    #[test]
    fn corners_identity_pose() {
        let h = 0.0325;
        let corners = cube_corners(&CubePose::identity(), h);
        let mut expected = vec![];
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    expected.push(Vec3::new(sx * h, sy * h, sz * h));
                }
            }
        }
        for (c, e) in corners.iter().zip(&expected) {
            assert!((*c - *e).norm() < 1e-15);
        }
    }

    #[test]
    fn corners_translate_with_pose() {
        let h = 0.0325;
        let t = Vec3::new(0.05, -0.02, 0.11);
        let base = cube_corners(&CubePose::identity(), h);
        let moved = cube_corners(&CubePose::new(t, UnitQuat::IDENTITY), h);
        for i in 0..8 {
            assert!((moved[i] - (base[i] + t)).norm() < 1e-15);
        }
    }

    #[test]
    fn corners_rotate_90_about_z() {
        // Oracle: brute-force rotation of each identity corner.
        let h = 0.0325;
        let q = UnitQuat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        let rotated = cube_corners(&CubePose::new(Vec3::ZERO, q), h);
        let rot = Mat3::rot_z(std::f64::consts::FRAC_PI_2);
        let base = cube_corners(&CubePose::identity(), h);
        for i in 0..8 {
            assert!((rotated[i] - rot.apply(base[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn push_reward_cases() {
        let p = KernelParams::new(30.0, 1.0).unwrap();
        let g = Vec3::new(0.1, -0.05, 0.0325);
        assert_eq!(push_reward(g, g, &p), 1.0);
        let a = g + Vec3::new(0.1, 0.0, 0.0);
        assert!((push_reward(a, g, &p) - 0.141_942_465_665_472_1).abs() < 1e-12);
        // Invariant under a common rotation about z.
        let rot = Mat3::rot_z(1.234);
        let d0 = push_reward(a, g, &p);
        let d1 = push_reward(rot.apply(a), rot.apply(g), &p);
        assert!((d0 - d1).abs() < 1e-12);
    }

    #[test]
    fn lift_reward_translation_equals_kernel() {
        let p = KernelParams::default();
        let h = 0.0325;
        let q = random_quat(&mut rng_from_seed(5));
        let a = CubePose::new(Vec3::new(0.02, 0.03, 0.06), q);
        let t = Vec3::new(0.04, -0.01, 0.02);
        let g = CubePose::new(a.position + t, q);
        assert!((lift_reward(&a, &g, h, &p) - kernel(t.norm(), &p)).abs() < 1e-12);
        assert_eq!(lift_reward(&a, &a, h, &p), 1.0);
    }

    #[test]
    fn lift_reward_flip_scores_below_translation_free_reward() {
        // Oracle: brute force over the 8 corner pairs of a 180-degree flip.
        let p = KernelParams::default();
        let h = 0.0325;
        let pos = Vec3::new(0.0, 0.0, 0.06);
        let a = CubePose::new(pos, UnitQuat::IDENTITY);
        let g = CubePose::new(pos, UnitQuat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::PI));
        let ca = cube_corners(&a, h);
        let cg = cube_corners(&g, h);
        let mut oracle = 0.0;
        for i in 0..8 {
            oracle += kernel((ca[i] - cg[i]).norm(), &p);
        }
        oracle /= 8.0;
        let got = lift_reward(&a, &g, h, &p);
        assert!((got - oracle).abs() < 1e-12);
        // Strictly below the position-only score at the same position.
        assert!(got < push_reward(a.position, g.position, &p));
    }

    #[test]
    fn angular_distance_basics() {
        let q = UnitQuat::from_axis_angle(Vec3::new(0.3, -0.2, 0.9), 0.77);
        assert!(angular_distance(q, q) < 1e-9);
        let neg = UnitQuat { w: -q.w, x: -q.x, y: -q.y, z: -q.z };
        assert!(angular_distance(q, neg) < 1e-9);
        let z90 = UnitQuat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        assert!((angular_distance(UnitQuat::IDENTITY, z90) - 90.0).abs() < 1e-9);
    }

    #[test]
    fn angular_distance_is_a_metric_on_random_triples() {
        let mut rng = rng_from_seed(88);
        for _ in 0..200 {
            let a = random_quat(&mut rng);
            let b = random_quat(&mut rng);
            let c = random_quat(&mut rng);
            let ab = angular_distance(a, b);
            let ba = angular_distance(b, a);
            assert!((ab - ba).abs() < 1e-9);
            assert!(ab >= 0.0 && ab <= 180.0 + 1e-9);
            let ac = angular_distance(a, c);
            let cb = angular_distance(c, b);
            assert!(ab <= ac + cb + 1e-9, "triangle violated: {ab} > {ac} + {cb}");
        }
    }

    #[test]
    fn success_criterion_cases() {
        let th = SuccessThresholds::default();
        let goal = CubePose::new(Vec3::new(0.0, 0.0, 0.05), UnitQuat::IDENTITY);
        // Lift: inside both tolerances.
        let a = CubePose::new(
            goal.position + Vec3::new(0.019, 0.0, 0.0),
            UnitQuat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 20.0f64.to_radians()),
        );
        assert!(is_success(&a, &goal, &th, Task::Lift));
        // Lift: position out by 1 mm.
        let b = CubePose::new(goal.position + Vec3::new(0.021, 0.0, 0.0), goal.orientation);
        assert!(!is_success(&b, &goal, &th, Task::Lift));
        // Push ignores orientation.
        let c = CubePose::new(
            goal.position + Vec3::new(0.01, 0.0, 0.0),
            UnitQuat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::PI),
        );
        assert!(is_success(&c, &goal, &th, Task::Push));
        assert!(!is_success(&c, &goal, &th, Task::Lift));
    }

    #[test]
    fn rigid_fit_identity_and_exact_recovery() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(0.0, 0.1, 0.0),
            Vec3::new(0.0, 0.0, 0.1),
        ];
        let (r, t) = rigid_fit(&pts, &pts).unwrap();
        assert!(angular_distance(r, UnitQuat::IDENTITY) < 1e-9);
        assert!(t.norm() < 1e-12);

        let mut rng = rng_from_seed(17);
        for _ in 0..50 {
            let q = random_quat(&mut rng);
            let shift = Vec3::new(
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
            );
            let after: Vec<Vec3> = pts.iter().map(|p| q.rotate(*p) + shift).collect();
            let (rf, tf) = rigid_fit(&pts, &after).unwrap();
            // Exact-fit case: recovered transform reproduces the points.
            let mut cb = Vec3::ZERO;
            for p in &pts {
                cb = cb + *p;
            }
            cb = cb.scale(1.0 / pts.len() as f64);
            for (p, a) in pts.iter().zip(&after) {
                let mapped = rigid_fit_apply(rf, tf, cb, *p);
                assert!((mapped - *a).norm() < 1e-9);
            }
            assert!(rf.to_matrix().det() > 0.0);
        }
    }

    #[test]
    fn rigid_fit_beats_random_transforms_on_noisy_data() {
        // Oracle: the fit's residual must not exceed that of 100 random
        // rigid transforms on the same data.
        let mut rng = rng_from_seed(3);
        let pts: Vec<Vec3> = (0..8)
            .map(|_| Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)))
            .collect();
        let q_true = random_quat(&mut rng);
        let t_true = Vec3::new(0.03, -0.02, 0.05);
        let after: Vec<Vec3> = pts
            .iter()
            .map(|p| {
                q_true.rotate(*p)
                    + t_true
                    + Vec3::new(
                        0.002 * next_gaussian(&mut rng),
                        0.002 * next_gaussian(&mut rng),
                        0.002 * next_gaussian(&mut rng),
                    )
            })
            .collect();
        let mut cb = Vec3::ZERO;
        for p in &pts {
            cb = cb + *p;
        }
        cb = cb.scale(1.0 / pts.len() as f64);

        let rss = |r: UnitQuat, t: Vec3| -> f64 {
            pts.iter()
                .zip(&after)
                .map(|(p, a)| {
                    let m = rigid_fit_apply(r, t, cb, *p);
                    (m - *a).dot(m - *a)
                })
                .sum()
        };
        let (rf, tf) = rigid_fit(&pts, &after).unwrap();
        let best = rss(rf, tf);
        for _ in 0..100 {
            let rq = random_quat(&mut rng);
            let rt = Vec3::new(
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
            );
            assert!(best <= rss(rq, rt) + 1e-12);
        }
    }

    #[test]
    fn rigid_fit_rejects_degenerate_input() {
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64 * 0.01, 0.0, 0.0)).collect();
        assert!(matches!(rigid_fit(&line, &line), Err(Error::Degenerate(_))));
        let two = vec![Vec3::ZERO, Vec3::new(0.1, 0.0, 0.0)];
        assert!(rigid_fit(&two, &two).is_err());
        let same = vec![Vec3::new(0.01, 0.02, 0.03); 6];
        assert!(matches!(rigid_fit(&same, &same), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rigid_fit_always_proper_rotation() {
        let mut rng = rng_from_seed(99);
        let pts: Vec<Vec3> = (0..6)
            .map(|_| Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)))
            .collect();
        for _ in 0..50 {
            let after: Vec<Vec3> = pts
                .iter()
                .map(|p| {
                    *p + Vec3::new(
                        0.05 * next_gaussian(&mut rng),
                        0.05 * next_gaussian(&mut rng),
                        0.05 * next_gaussian(&mut rng),
                    )
                })
                .collect();
            if let Ok((r, _)) = rigid_fit(&pts, &after) {
                assert!(r.to_matrix().det() > 0.99);
            }
        }
    }
}

//! Pinhole camera with Brown-Conrady distortion, Euler-angle rotations and
//! the rig description shared by every other module.
//!
//! Conventions: camera axes are x right, y down, z forward. Rotations are
//! `R = Rz(roll) * Ry(yaw) * Rx(pitch)`. A point in the left camera frame maps
//! to the right camera frame as `X_r = R * X_l + T`, so a rig whose right
//! camera sits `B` millimetres to the right of the left one has
//! `T = (-B, 0, 0)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Yaw must stay this far from +-pi/2 for Euler extraction.
pub const GIMBAL_MARGIN: f64 = 1e-6;

const UNDISTORT_MAX_ITERATIONS: usize = 20;
const UNDISTORT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
    #[serde(default)]
    pub k3: f64,
    pub p1: f64,
    pub p2: f64,
}

impl Intrinsics {
    /// Distortion-free camera.
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self {
            fx,
            fy,
            cx,
            cy,
            k1: 0.0,
            k2: 0.0,
            k3: 0.0,
            p1: 0.0,
            p2: 0.0,
        }
    }

    pub fn with_distortion(mut self, k1: f64, k2: f64, k3: f64, p1: f64, p2: f64) -> Self {
        self.k1 = k1;
        self.k2 = k2;
        self.k3 = k3;
        self.p1 = p1;
        self.p2 = p2;
        self
    }

    pub fn has_distortion(&self) -> bool {
        [self.k1, self.k2, self.k3, self.p1, self.p2]
            .iter()
            .any(|c| *c != 0.0)
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let all = [
            self.fx, self.fy, self.cx, self.cy, self.k1, self.k2, self.k3, self.p1, self.p2,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "intrinsics must be finite".to_string(),
            ));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if !(0.0..width as f64).contains(&self.cx) || !(0.0..height as f64).contains(&self.cy) {
            return Err(Error::InvalidArgument(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, width, height
            )));
        }
        Ok(())
    }

    /// Applies lens distortion to an undistorted normalized coordinate.
    pub fn distort(&self, p: Point2<f64>) -> Point2<f64> {
        let (x, y) = (p.x, p.y);
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
        let xd = x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
        Point2::new(xd, yd)
    }

    /// Jacobian of [`Intrinsics::distort`] at `p`, row-major.
    fn distort_jacobian(&self, p: Point2<f64>) -> [[f64; 2]; 2] {
        let (x, y) = (p.x, p.y);
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
        // d(radial)/d(r2)
        let dradial = self.k1 + r2 * (2.0 * self.k2 + 3.0 * r2 * self.k3);
        let dxx = radial + 2.0 * x * x * dradial + 2.0 * self.p1 * y + 6.0 * self.p2 * x;
        let dxy = 2.0 * x * y * dradial + 2.0 * self.p1 * x + 2.0 * self.p2 * y;
        let dyx = 2.0 * x * y * dradial + 2.0 * self.p1 * x + 2.0 * self.p2 * y;
        let dyy = radial + 2.0 * y * y * dradial + 6.0 * self.p1 * y + 2.0 * self.p2 * x;
        [[dxx, dxy], [dyx, dyy]]
    }

    pub fn normalized_to_pixel(&self, p: Point2<f64>) -> Point2<f64> {
        Point2::new(self.cx + self.fx * p.x, self.cy + self.fy * p.y)
    }

    pub fn pixel_to_normalized(&self, p: Point2<f64>) -> Point2<f64> {
        Point2::new((p.x - self.cx) / self.fx, (p.y - self.cy) / self.fy)
    }
}

/// Projects a camera-frame point (millimetres) to distorted pixel coordinates.
pub fn project(point: &Vector3<f64>, intr: &Intrinsics) -> Result<Point2<f64>> {
    if !(point.z > 0.0) {
        return Err(Error::BehindCamera { z: point.z });
    }
    let normalized = Point2::new(point.x / point.z, point.y / point.z);
    Ok(intr.normalized_to_pixel(intr.distort(normalized)))
}

/// Inverts the lens model: distorted pixel to undistorted normalized coordinate.
///
/// Fixed-point iteration preconditioned by the inverse distortion Jacobian,
/// halving the update whenever the residual fails to shrink.
pub fn undistort(pixel: Point2<f64>, intr: &Intrinsics) -> Result<Point2<f64>> {
    let target = intr.pixel_to_normalized(pixel);
    if !intr.has_distortion() {
        return Ok(target);
    }
    let residual_of = |p: Point2<f64>| {
        let d = intr.distort(p);
        (target.x - d.x, target.y - d.y)
    };
    let mut estimate = target;
    let mut residual = residual_of(estimate);
    let mut norm = residual.0.hypot(residual.1);
    for _ in 0..UNDISTORT_MAX_ITERATIONS {
        if norm < UNDISTORT_TOLERANCE {
            return Ok(estimate);
        }
        let [[a, b], [c, d]] = intr.distort_jacobian(estimate);
        let det = a * d - b * c;
        let (dx, dy) = if det.abs() > 1e-12 {
            (
                (d * residual.0 - b * residual.1) / det,
                (a * residual.1 - c * residual.0) / det,
            )
        } else {
            residual
        };
        let mut damping = 1.0;
        loop {
            let candidate = Point2::new(estimate.x + damping * dx, estimate.y + damping * dy);
            let r = residual_of(candidate);
            let n = r.0.hypot(r.1);
            if n < norm || damping < 1.0 / 64.0 {
                estimate = candidate;
                residual = r;
                norm = n;
                break;
            }
            damping *= 0.5;
        }
    }
    if norm < UNDISTORT_TOLERANCE {
        Ok(estimate)
    } else {
        Err(Error::NumericFailure(format!(
            "undistortion of ({:.3}, {:.3}) did not converge (residual {norm:.3e})",
            pixel.x, pixel.y
        )))
    }
}

/// Orthonormal 3x3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation by `angle` radians about the axis `axis * angle` (Rodrigues).
    pub fn from_scaled_axis(axis: Vector3<f64>) -> Self {
        Self(*nalgebra::Rotation3::from_scaled_axis(axis).matrix())
    }

    pub fn scaled_axis(&self) -> Vector3<f64> {
        nalgebra::Rotation3::from_matrix_unchecked(self.0).scaled_axis()
    }

    /// Wraps a matrix the caller guarantees to be orthonormal.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Row-major element access.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation3) -> Self {
        Self(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Largest elementwise deviation of `R^T R` from identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

pub fn euler_to_rotation(pitch: f64, yaw: f64, roll: f64) -> Result<Rotation3> {
    if !(pitch.is_finite() && yaw.is_finite() && roll.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite Euler angles ({pitch}, {yaw}, {roll})"
        )));
    }
    Ok(Rotation3::about_z(roll)
        .compose(&Rotation3::about_y(yaw))
        .compose(&Rotation3::about_x(pitch)))
}

/// Returns `(pitch, yaw, roll)` such that `euler_to_rotation` reproduces `r`.
pub fn rotation_to_euler(r: &Rotation3) -> Result<(f64, f64, f64)> {
    let yaw = (-r.get(2, 0)).clamp(-1.0, 1.0).asin();
    if yaw.abs() >= FRAC_PI_2 - GIMBAL_MARGIN {
        return Err(Error::DegenerateOrientation(format!(
            "yaw {yaw:.9} rad is within gimbal-lock margin"
        )));
    }
    let pitch = r.get(2, 1).atan2(r.get(2, 2));
    let roll = r.get(1, 0).atan2(r.get(0, 0));
    Ok((pitch, yaw, roll))
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = a - two_pi * ((a + PI) / two_pi).floor();
    // floor() maps +pi to -pi; the half-open interval wants +pi.
    if w <= -PI {
        w += two_pi;
    }
    w
}

/// Index of one of the six extrinsic parameters, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Pitch = 0,
    Yaw = 1,
    Roll = 2,
    Tx = 3,
    Ty = 4,
    Tz = 5,
}

impl Axis {
    pub const ALL: [Axis; 6] = [
        Axis::Pitch,
        Axis::Yaw,
        Axis::Roll,
        Axis::Tx,
        Axis::Ty,
        Axis::Tz,
    ];

    pub fn is_angle(self) -> bool {
        (self as usize) < 3
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Pitch => "pitch",
            Axis::Yaw => "yaw",
            Axis::Roll => "roll",
            Axis::Tx => "tx",
            Axis::Ty => "ty",
            Axis::Tz => "tz",
        }
    }

    pub fn from_name(name: &str) -> Option<Axis> {
        Axis::ALL.into_iter().find(|a| a.name() == name)
    }
}

/// Relative pose of the right camera with respect to the left one.
///
/// Angles are radians, translation is millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtrinsicParams {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl ExtrinsicParams {
    pub fn new(pitch: f64, yaw: f64, roll: f64, tx: f64, ty: f64, tz: f64) -> Self {
        Self {
            pitch,
            yaw,
            roll,
            tx,
            ty,
            tz,
        }
    }

    /// Angles in degrees, translation in millimetres.
    pub fn from_degrees(pitch: f64, yaw: f64, roll: f64, tx: f64, ty: f64, tz: f64) -> Self {
        Self::new(
            pitch.to_radians(),
            yaw.to_radians(),
            roll.to_radians(),
            tx,
            ty,
            tz,
        )
    }

    /// Parallel cameras separated by `baseline_mm` along x.
    pub fn ideal(baseline_mm: f64) -> Self {
        Self::new(0.0, 0.0, 0.0, -baseline_mm, 0.0, 0.0)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.pitch, self.yaw, self.roll, self.tx, self.ty, self.tz]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn get(&self, axis: Axis) -> f64 {
        self.to_array()[axis as usize]
    }

    pub fn with(&self, axis: Axis, value: f64) -> Self {
        let mut a = self.to_array();
        a[axis as usize] = value;
        Self::from_array(a)
    }

    pub fn rotation(&self) -> Result<Rotation3> {
        euler_to_rotation(self.pitch, self.yaw, self.roll)
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.tx, self.ty, self.tz)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Intrinsics of both cameras, their relative pose and the image geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoRig {
    pub left: Intrinsics,
    pub right: Intrinsics,
    pub extrinsics: ExtrinsicParams,
    pub width: usize,
    pub height: usize,
}

impl StereoRig {
    pub fn new(
        left: Intrinsics,
        right: Intrinsics,
        extrinsics: ExtrinsicParams,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let rig = Self {
            left,
            right,
            extrinsics,
            width,
            height,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidRig(
                "image dimensions must be positive".into(),
            ));
        }
        self.left.validate(self.width, self.height)?;
        self.right.validate(self.width, self.height)?;
        if !self.extrinsics.is_finite() {
            return Err(Error::InvalidRig("extrinsics must be finite".into()));
        }
        if self.extrinsics.tx.abs() == 0.0 {
            return Err(Error::InvalidRig(
                "zero baseline: cameras coincide along x".into(),
            ));
        }
        Ok(())
    }

    pub fn with_extrinsics(&self, extrinsics: ExtrinsicParams) -> Self {
        Self {
            extrinsics,
            ..*self
        }
    }

    /// Distance between the camera centres in millimetres.
    pub fn baseline(&self) -> f64 {
        self.extrinsics.translation().norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mat_close(a: &Rotation3, b: &Rotation3, tol: f64) -> bool {
        (a.matrix() - b.matrix()).amax() <= tol
    }

    #[test]
    fn zero_angles_give_identity() {
        let r = euler_to_rotation(0.0, 0.0, 0.0).unwrap();
        assert_eq!(*r.matrix(), Matrix3::identity());
    }

    #[test]
    fn quarter_pitch_maps_y_to_z() {
        let r = euler_to_rotation(FRAC_PI_2, 0.0, 0.0).unwrap();
        let v = r.apply(&Vector3::new(0.0, 1.0, 0.0));
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.z, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn euler_matches_axis_product() {
        // Oracle: the three axis matrices written out by hand and multiplied
        // with plain arrays.
        let (p, y, r) = (0.1_f64, 0.2_f64, 0.3_f64);
        let rx = [
            [1.0, 0.0, 0.0],
            [0.0, p.cos(), -p.sin()],
            [0.0, p.sin(), p.cos()],
        ];
        let ry = [
            [y.cos(), 0.0, y.sin()],
            [0.0, 1.0, 0.0],
            [-y.sin(), 0.0, y.cos()],
        ];
        let rz = [
            [r.cos(), -r.sin(), 0.0],
            [r.sin(), r.cos(), 0.0],
            [0.0, 0.0, 1.0],
        ];
        let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
            let mut out = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                }
            }
            out
        };
        let expected = mul(mul(rz, ry), rx);
        let got = euler_to_rotation(p, y, r).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(got.get(i, j), expected[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_angles_rejected() {
        assert!(matches!(
            euler_to_rotation(f64::NAN, 0.0, 0.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn euler_extraction() {
        assert_eq!(
            rotation_to_euler(&Rotation3::identity()).unwrap(),
            (0.0, 0.0, 0.0)
        );
        let r = euler_to_rotation(0.02, -0.01, 0.03).unwrap();
        let (p, y, ro) = rotation_to_euler(&r).unwrap();
        assert_abs_diff_eq!(p, 0.02, epsilon = 1e-9);
        assert_abs_diff_eq!(y, -0.01, epsilon = 1e-9);
        assert_abs_diff_eq!(ro, 0.03, epsilon = 1e-9);
    }

    #[test]
    fn gimbal_lock_is_degenerate() {
        let r = euler_to_rotation(0.3, FRAC_PI_2, -0.2).unwrap();
        assert!(matches!(
            rotation_to_euler(&r),
            Err(Error::DegenerateOrientation(_))
        ));
    }

    #[test]
    fn projection_examples() {
        let intr = Intrinsics::pinhole(800.0, 800.0, 320.0, 240.0)
            .with_distortion(-0.2, 0.05, 0.0, 0.001, -0.002);
        let p = project(&Vector3::new(0.0, 0.0, 1000.0), &intr).unwrap();
        assert_eq!((p.x, p.y), (320.0, 240.0));

        let plain = Intrinsics::pinhole(800.0, 800.0, 320.0, 240.0);
        let p = project(&Vector3::new(100.0, 0.0, 1000.0), &plain).unwrap();
        assert_abs_diff_eq!(p.x, 400.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 240.0, epsilon = 1e-12);

        assert!(matches!(
            project(&Vector3::new(1.0, 1.0, 0.0), &plain),
            Err(Error::BehindCamera { .. })
        ));
        assert!(matches!(
            project(&Vector3::new(1.0, 1.0, -5.0), &plain),
            Err(Error::BehindCamera { .. })
        ));
    }

    #[test]
    fn projection_with_radial_term_matches_polynomial() {
        let intr = Intrinsics::pinhole(700.0, 710.0, 300.0, 200.0)
            .with_distortion(-0.1, 0.0, 0.0, 0.0, 0.0);
        let (x, y, z) = (250.0_f64, -120.0_f64, 900.0_f64);
        // Direct evaluation: u = cx + fx * xn * (1 + k1 * r^2).
        let (xn, yn) = (x / z, y / z);
        let r2 = xn * xn + yn * yn;
        let scale = 1.0 - 0.1 * r2;
        let p = project(&Vector3::new(x, y, z), &intr).unwrap();
        assert_abs_diff_eq!(p.x, 300.0 + 700.0 * xn * scale, epsilon = 1e-10);
        assert_abs_diff_eq!(p.y, 200.0 + 710.0 * yn * scale, epsilon = 1e-10);
    }

    #[test]
    fn undistort_examples() {
        let plain = Intrinsics::pinhole(500.0, 500.0, 320.0, 240.0);
        let n = undistort(Point2::new(420.0, 190.0), &plain).unwrap();
        assert_eq!((n.x, n.y), (0.2, -0.1));

        let intr = plain.with_distortion(-0.05, 0.0, 0.0, 0.0, 0.0);
        let c = undistort(Point2::new(320.0, 240.0), &intr).unwrap();
        assert_eq!((c.x, c.y), (0.0, 0.0));

        let pixel = Point2::new(600.0, 450.0);
        let n = undistort(pixel, &intr).unwrap();
        let back = intr.distort(n);
        let target = intr.pixel_to_normalized(pixel);
        assert!((back.x - target.x).abs() < 1e-6 && (back.y - target.y).abs() < 1e-6);
    }

    #[test]
    fn wrap_angle_examples() {
        assert_abs_diff_eq!(
            wrap_angle(181f64.to_radians()),
            -179f64.to_radians(),
            epsilon = 1e-12
        );
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn rig_validation() {
        let intr = Intrinsics::pinhole(500.0, 500.0, 320.0, 240.0);
        assert!(StereoRig::new(intr, intr, ExtrinsicParams::ideal(356.0), 640, 480).is_ok());
        assert!(matches!(
            StereoRig::new(intr, intr, ExtrinsicParams::ideal(0.0), 640, 480),
            Err(Error::InvalidRig(_))
        ));
        let off = Intrinsics::pinhole(500.0, 500.0, 700.0, 240.0);
        assert!(StereoRig::new(off, intr, ExtrinsicParams::ideal(356.0), 640, 480).is_err());
    }

    proptest! {
        #[test]
        fn euler_round_trip(
            p in -3.0f64..3.0,
            y in -(FRAC_PI_2 - 1e-3)..(FRAC_PI_2 - 1e-3),
            r in -3.0f64..3.0,
        ) {
            let m = euler_to_rotation(p, y, r).unwrap();
            let (p2, y2, r2) = rotation_to_euler(&m).unwrap();
            let m2 = euler_to_rotation(p2, y2, r2).unwrap();
            prop_assert!(mat_close(&m, &m2, 1e-9));
        }

        #[test]
        fn compositions_stay_orthonormal(
            angles in proptest::collection::vec((-3.0f64..3.0, -1.5f64..1.5, -3.0f64..3.0), 1000)
        ) {
            let mut acc = Rotation3::identity();
            for (p, y, r) in angles {
                acc = acc.compose(&euler_to_rotation(p, y, r).unwrap());
                prop_assert!(acc.orthonormality_error() < 1e-9);
                prop_assert!((acc.determinant() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn projection_is_ray_invariant(
            x in -500.0f64..500.0, y in -500.0f64..500.0, z in 100.0f64..5000.0,
            lambda in 0.01f64..100.0,
        ) {
            let intr = Intrinsics::pinhole(600.0, 610.0, 320.0, 240.0);
            let a = project(&Vector3::new(x, y, z), &intr).unwrap();
            let b = project(&(Vector3::new(x, y, z) * lambda), &intr).unwrap();
            prop_assert!((a - b).norm() < 1e-9);
        }

        #[test]
        fn undistort_inverts_distort(
            k1 in -0.2f64..0.2, k2 in -0.2f64..0.2, k3 in -0.2f64..0.2,
            p1 in -0.02f64..0.02, p2 in -0.02f64..0.02,
            x in -0.5f64..0.5, y in -0.5f64..0.5,
        ) {
            let intr = Intrinsics::pinhole(500.0, 500.0, 320.0, 240.0)
                .with_distortion(k1, k2, k3, p1, p2);
            // Past a fold of the distortion map the inverse is not unique.
            let [[a, b], [c, d]] = intr.distort_jacobian(Point2::new(x, y));
            prop_assume!(a * d - b * c > 0.0);
            let pixel = intr.normalized_to_pixel(intr.distort(Point2::new(x, y)));
            let n = undistort(pixel, &intr).unwrap();
            prop_assert!((n.x - x).abs() < 1e-6 && (n.y - y).abs() < 1e-6);
        }
    }
}

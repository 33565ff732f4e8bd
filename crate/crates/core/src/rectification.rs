//! Rectifying transforms for a stereo rig and image resampling through them.
//!
//! The relative rotation is split equally between the two cameras, after
//! which both are rotated so that their common x-axis points along the
//! baseline. In the rectified frames a left-camera point `P` appears in the
//! right camera at `P - (b, 0, 0)`, so disparity is `fx' * b / Z`.

use nalgebra::{Point2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{undistort, Intrinsics, Rotation3, StereoRig};
use crate::image::{Image, Mask};

/// Largest relative rotation accepted between the cameras.
pub const MAX_RELATIVE_ROTATION: f64 = std::f64::consts::FRAC_PI_4;

/// Pinhole intrinsics shared by both rectified views.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifiedIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl RectifiedIntrinsics {
    /// Mean focal lengths of the two cameras, principal point of the left one.
    ///
    /// Depends on intrinsics only, so it stays fixed while extrinsics vary.
    pub fn from_rig(rig: &StereoRig) -> Self {
        Self {
            fx: 0.5 * (rig.left.fx + rig.right.fx),
            fy: 0.5 * (rig.left.fy + rig.right.fy),
            cx: rig.left.cx,
            cy: rig.left.cy,
        }
    }

    pub fn project(&self, p: &Vector3<f64>) -> Point2<f64> {
        Point2::new(self.cx + self.fx * p.x / p.z, self.cy + self.fy * p.y / p.z)
    }

    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Bounds {
    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }
}

/// For every output pixel, the subpixel source coordinate to sample.
/// Non-finite entries mark rays that never reach the source image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapTable {
    width: usize,
    height: usize,
    xs: Vec<f32>,
    ys: Vec<f32>,
}

impl RemapTable {
    pub fn new(width: usize, height: usize, xs: Vec<f32>, ys: Vec<f32>) -> Result<Self> {
        if xs.len() != width * height || ys.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "remap table of {}/{} entries for {width}x{height}",
                xs.len(),
                ys.len()
            )));
        }
        Ok(Self {
            width,
            height,
            xs,
            ys,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> (f32, f32)) -> Self {
        let mut xs = Vec::with_capacity(width * height);
        let mut ys = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = f(x, y);
                xs.push(sx);
                ys.push(sy);
            }
        }
        Self {
            width,
            height,
            xs,
            ys,
        }
    }

    pub fn identity(width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |x, y| (x as f32, y as f32))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.xs[i], self.ys[i])
    }

    /// Bounding box of output pixels whose source lies inside a
    /// `src_width x src_height` image.
    fn valid_bounds(&self, src_width: usize, src_height: usize) -> Bounds {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                let (sx, sy) = self.get(x, y);
                if inside(sx, sy, src_width, src_height) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
        }
        if x0 == usize::MAX {
            Bounds {
                x0: 0,
                y0: 0,
                x1: 0,
                y1: 0,
            }
        } else {
            Bounds { x0, y0, x1, y1 }
        }
    }
}

fn inside(x: f32, y: f32, width: usize, height: usize) -> bool {
    x >= 0.0 && y >= 0.0 && x <= (width - 1) as f32 && y <= (height - 1) as f32
}

#[derive(Debug, Clone)]
pub struct RectifyMaps {
    pub left: RemapTable,
    pub right: RemapTable,
    pub intrinsics: RectifiedIntrinsics,
    /// Rotation taking left-camera coordinates into the rectified left frame.
    pub left_rotation: Rotation3,
    /// Rotation taking right-camera coordinates into the rectified right frame.
    pub right_rotation: Rotation3,
    /// Camera separation along the rectified x-axis, millimetres.
    pub baseline: f64,
    pub left_bounds: Bounds,
    pub right_bounds: Bounds,
    left_source: Intrinsics,
    right_source: Intrinsics,
}

impl RectifyMaps {
    /// Maps a distorted source pixel to its rectified pixel position.
    pub fn rectify_point(&self, side: Side, pixel: Point2<f64>) -> Result<Point2<f64>> {
        let (intr, rot) = match side {
            Side::Left => (&self.left_source, &self.left_rotation),
            Side::Right => (&self.right_source, &self.right_rotation),
        };
        let n = undistort(pixel, intr)?;
        let ray = rot.apply(&Vector3::new(n.x, n.y, 1.0));
        if ray.z <= 0.0 {
            return Err(Error::BehindCamera { z: ray.z });
        }
        Ok(self.intrinsics.project(&ray))
    }

    pub fn table(&self, side: Side) -> &RemapTable {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// Rectifying rotations `(left, right, baseline)` for the rig's extrinsics.
pub fn rectifying_rotations(rig: &StereoRig) -> Result<(Rotation3, Rotation3, f64)> {
    let relative = rig.extrinsics.rotation()?;
    let axis = relative.scaled_axis();
    if axis.norm() >= MAX_RELATIVE_ROTATION {
        return Err(Error::InvalidRig(format!(
            "relative rotation of {:.2} deg exceeds {:.0} deg",
            axis.norm().to_degrees(),
            MAX_RELATIVE_ROTATION.to_degrees()
        )));
    }
    let half = Rotation3::from_scaled_axis(axis * 0.5);
    let t = half.transpose().apply(&rig.extrinsics.translation());
    let baseline = t.norm();
    if !(baseline > 0.0) {
        return Err(Error::InvalidRig("zero baseline".into()));
    }
    let e1 = -t / baseline;
    let e2 = Vector3::z().cross(&e1);
    if e2.norm() < 1e-6 {
        return Err(Error::InvalidRig(
            "baseline is parallel to the optical axis".into(),
        ));
    }
    let e2 = e2.normalize();
    let e3 = e1.cross(&e2);
    let align = Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_rows(&[
        e1.transpose(),
        e2.transpose(),
        e3.transpose(),
    ]));
    Ok((
        align.compose(&half),
        align.compose(&half.transpose()),
        baseline,
    ))
}

pub fn compute_rectification(rig: &StereoRig) -> Result<RectifyMaps> {
    compute_rectification_with(rig, RectifiedIntrinsics::from_rig(rig))
}

/// Rectification with caller-chosen rectified intrinsics.
pub fn compute_rectification_with(
    rig: &StereoRig,
    intrinsics: RectifiedIntrinsics,
) -> Result<RectifyMaps> {
    rig.validate()?;
    let (left_rotation, right_rotation, baseline) = rectifying_rotations(rig)?;
    let left = build_table(
        rig.width,
        rig.height,
        &intrinsics,
        &left_rotation,
        &rig.left,
    );
    let right = build_table(
        rig.width,
        rig.height,
        &intrinsics,
        &right_rotation,
        &rig.right,
    );
    let left_bounds = left.valid_bounds(rig.width, rig.height);
    let right_bounds = right.valid_bounds(rig.width, rig.height);
    Ok(RectifyMaps {
        left,
        right,
        intrinsics,
        left_rotation,
        right_rotation,
        baseline,
        left_bounds,
        right_bounds,
        left_source: rig.left,
        right_source: rig.right,
    })
}

fn build_table(
    width: usize,
    height: usize,
    rect: &RectifiedIntrinsics,
    rotation: &Rotation3,
    source: &Intrinsics,
) -> RemapTable {
    // Source-frame ray of rectified pixel (u, v) is affine in u along a row.
    let back = rotation.transpose();
    let step = back.apply(&Vector3::new(1.0 / rect.fx, 0.0, 0.0));
    let mut xs = vec![0f32; width * height];
    let mut ys = vec![0f32; width * height];
    xs.par_chunks_mut(width)
        .zip(ys.par_chunks_mut(width))
        .enumerate()
        .for_each(|(v, (row_x, row_y))| {
            let start = back.apply(&rect.ray(0.0, v as f64));
            for u in 0..width {
                let ray = start + step * u as f64;
                if ray.z <= 1e-9 {
                    row_x[u] = f32::NAN;
                    row_y[u] = f32::NAN;
                    continue;
                }
                let n = source.distort(Point2::new(ray.x / ray.z, ray.y / ray.z));
                let p = source.normalized_to_pixel(n);
                row_x[u] = p.x as f32;
                row_y[u] = p.y as f32;
            }
        });
    RemapTable {
        width,
        height,
        xs,
        ys,
    }
}

/// Resampled image plus the pixels whose source fell inside the input.
#[derive(Debug, Clone)]
pub struct Remapped {
    pub image: Image,
    pub in_bounds: Mask,
}

/// Bilinear resampling; sources outside the image give 0 and are flagged.
pub fn remap(img: &Image, table: &RemapTable) -> Remapped {
    let (w, h) = (table.width, table.height);
    let mut out = vec![0u8; w * h];
    let mut valid = vec![false; w * h];
    out.par_chunks_mut(w)
        .zip(valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (row, row_valid))| remap_row(img, table, y, row, row_valid));
    Remapped {
        image: Image::new(w, h, out).expect("dimensions from table"),
        in_bounds: Mask::from_vec(w, h, valid).expect("dimensions from table"),
    }
}

fn remap_row(img: &Image, table: &RemapTable, y: usize, row: &mut [u8], valid: &mut [bool]) {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") {
        // SAFETY: AVX2 support was just detected.
        return unsafe { remap_row_avx2(img, table, y, row, valid) };
    }
    remap_row_portable(img, table, y, row, valid)
}

/// Portable code compiled with AVX2; no fused operations, same results.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn remap_row_avx2(
    img: &Image,
    table: &RemapTable,
    y: usize,
    row: &mut [u8],
    valid: &mut [bool],
) {
    remap_row_portable(img, table, y, row, valid)
}

#[inline(always)]
fn remap_row_portable(
    img: &Image,
    table: &RemapTable,
    y: usize,
    row: &mut [u8],
    valid: &mut [bool],
) {
    let w = table.width;
    let (sw, sh) = (img.width(), img.height());
    let src = img.pixels();
    let xs = &table.xs[y * w..(y + 1) * w];
    let ys = &table.ys[y * w..(y + 1) * w];
    for (((&sx, &sy), out), ok) in xs.iter().zip(ys).zip(row.iter_mut()).zip(valid.iter_mut()) {
        if !inside(sx, sy, sw, sh) {
            continue;
        }
        let x0 = sx.floor() as usize;
        let y0 = sy.floor() as usize;
        let ax = sx - x0 as f32;
        let ay = sy - y0 as f32;
        let x1 = (x0 + 1).min(sw - 1);
        let y1 = (y0 + 1).min(sh - 1);
        let p00 = src[y0 * sw + x0] as f32;
        let p10 = src[y0 * sw + x1] as f32;
        let p01 = src[y1 * sw + x0] as f32;
        let p11 = src[y1 * sw + x1] as f32;
        let top = p00 + ax * (p10 - p00);
        let bottom = p01 + ax * (p11 - p01);
        let value = top + ay * (bottom - top);
        *out = value.round().clamp(0.0, 255.0) as u8;
        *ok = true;
    }
}

//! Synthetic stereo scenes rendered through a known rig, with analytic
//! ground-truth disparity.
//!
//! Scenes are mosaics of fronto-parallel planes (in the left camera frame)
//! laid out on a grid of left-camera viewing directions. Outer tiles extend
//! to infinity so every left ray hits a tile; a distant background plane
//! catches right-camera rays that slip through depth steps. Surfaces carry
//! multi-octave value noise in their own coordinates, so the right image is
//! rendered from the scene rather than warped from the left one.

use nalgebra::{Point2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, undistort, wrap_angle, ExtrinsicParams, Intrinsics, StereoRig};
use crate::image::Image;
use crate::matcher::{DisparityMap, SUBPIXEL_SCALE};
use crate::rectification::{rectifying_rotations, RectifiedIntrinsics};

/// Baseline of the default rig, millimetres.
pub const DEFAULT_BASELINE_MM: f64 = 356.0;
pub const DEFAULT_WIDTH: usize = 640;
pub const DEFAULT_HEIGHT: usize = 480;
pub const DEFAULT_FOCAL_PX: f64 = 420.0;

/// Background distance as a multiple of the farthest tile.
const BACKGROUND_FACTOR: f64 = 3.0;
/// Scales the octave sum so typical values span most of `[-1, 1]`.
const TEXTURE_GAIN: f64 = 2.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DepthModel {
    /// One fronto-parallel plane.
    Plane { depth_mm: f64 },
    /// `cols x rows` tiles with explicit depths, row-major.
    Grid {
        cols: usize,
        rows: usize,
        depths_mm: Vec<f64>,
    },
    /// `cols x rows` tiles with disparity drawn uniformly between the
    /// disparities of `z_max_mm` and `z_min_mm`.
    Mosaic {
        cols: usize,
        rows: usize,
        z_min_mm: f64,
        z_max_mm: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureSpec {
    pub octaves: u32,
    /// Period of the coarsest octave in left-image pixels.
    pub base_period_px: f64,
    /// Amplitude ratio between successive octaves.
    pub persistence: f64,
    /// Largest vertical stretch of the pattern relative to horizontal; each
    /// surface draws its own stretch log-uniformly from `[1, anisotropy]`.
    pub anisotropy: f64,
    /// Fraction of the full intensity swing, in `(0, 1]`.
    pub contrast: f64,
    pub mean: f64,
}

impl Default for TextureSpec {
    fn default() -> Self {
        Self {
            octaves: 5,
            base_period_px: 32.0,
            persistence: 0.8,
            anisotropy: 8.0,
            contrast: 1.0,
            mean: 128.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub depth: DepthModel,
    pub texture: TextureSpec,
    /// Standard deviation of additive Gaussian noise, intensity units.
    pub noise_sigma: f64,
    /// Largest ground-truth disparity the scene may produce.
    pub max_disparity: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            depth: DepthModel::Mosaic {
                cols: 6,
                rows: 4,
                z_min_mm: 1500.0,
                z_max_mm: 6000.0,
            },
            texture: TextureSpec::default(),
            noise_sigma: 2.0,
            max_disparity: 128,
        }
    }
}

impl SceneSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Faint texture standing in for open water and sky; only a small fraction
    /// of pixels pass the default texture test.
    pub fn low_texture(seed: u64) -> Self {
        Self {
            seed,
            texture: TextureSpec {
                anisotropy: 1.0,
                contrast: 0.45,
                mean: 110.0,
                ..TextureSpec::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.texture;
        if !(t.contrast > 0.0 && t.contrast <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "contrast {} outside (0, 1]",
                t.contrast
            )));
        }
        if t.octaves == 0
            || !(t.base_period_px > 0.0)
            || !(t.persistence > 0.0)
            || !(t.anisotropy >= 1.0)
        {
            return Err(Error::InvalidArgument(
                "texture needs an octave, positive period and persistence, and anisotropy >= 1"
                    .into(),
            ));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise sigma must be non-negative".into(),
            ));
        }
        let positive = |z: f64| z.is_finite() && z > 0.0;
        match &self.depth {
            DepthModel::Plane { depth_mm } if !positive(*depth_mm) => Err(Error::InvalidArgument(
                "plane depth must be positive".into(),
            )),
            DepthModel::Grid {
                cols,
                rows,
                depths_mm,
            } => {
                if *cols == 0 || *rows == 0 || depths_mm.len() != cols * rows {
                    return Err(Error::InvalidArgument(format!(
                        "{} depths for a {cols}x{rows} grid",
                        depths_mm.len()
                    )));
                }
                if !depths_mm.iter().all(|z| positive(*z)) {
                    return Err(Error::InvalidArgument(
                        "grid depths must be positive".into(),
                    ));
                }
                Ok(())
            }
            DepthModel::Mosaic {
                cols,
                rows,
                z_min_mm,
                z_max_mm,
            } => {
                if *cols == 0 || *rows == 0 {
                    return Err(Error::InvalidArgument(
                        "mosaic needs at least one tile".into(),
                    ));
                }
                if !positive(*z_min_mm) || !(z_max_mm >= z_min_mm) || !z_max_mm.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "depth range [{z_min_mm}, {z_max_mm}] invalid"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Pinhole-ish 640x480 camera with mild distortion.
pub fn default_intrinsics() -> Intrinsics {
    Intrinsics::pinhole(DEFAULT_FOCAL_PX, DEFAULT_FOCAL_PX, 319.5, 239.5)
        .with_distortion(-0.04, 0.01, 0.0, 0.0005, -0.0003)
}

/// Default rig with the given extrinsics.
pub fn default_rig(extrinsics: ExtrinsicParams) -> Result<StereoRig> {
    let left = default_intrinsics();
    let right = Intrinsics {
        fx: DEFAULT_FOCAL_PX + 1.5,
        fy: DEFAULT_FOCAL_PX + 1.2,
        cx: 321.0,
        cy: 238.0,
        k1: -0.035,
        k2: 0.008,
        ..left
    };
    StereoRig::new(left, right, extrinsics, DEFAULT_WIDTH, DEFAULT_HEIGHT)
}

/// [`default_rig`] resampled to `scale` times its resolution.
pub fn scaled_rig(extrinsics: ExtrinsicParams, scale: f64) -> Result<StereoRig> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale {scale} must be positive"
        )));
    }
    let base = default_rig(extrinsics)?;
    let resample = |i: Intrinsics| Intrinsics {
        fx: i.fx * scale,
        fy: i.fy * scale,
        cx: (i.cx + 0.5) * scale - 0.5,
        cy: (i.cy + 0.5) * scale - 0.5,
        ..i
    };
    let size = |n: usize| (n as f64 * scale).round() as usize;
    StereoRig::new(
        resample(base.left),
        resample(base.right),
        extrinsics,
        size(DEFAULT_WIDTH),
        size(DEFAULT_HEIGHT),
    )
}

/// Rendered pair and its ground truth.
#[derive(Debug, Clone)]
pub struct RenderedPair {
    pub left: Image,
    pub right: Image,
    /// Disparity in the rectified left frame of the rendering rig, using
    /// [`RectifiedIntrinsics::from_rig`]; occluded pixels are invalid.
    pub disparity: DisparityMap,
}

#[derive(Debug, Clone, Copy)]
struct Tile {
    /// Extent in left normalized coordinates; outer tiles are unbounded.
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    z: f64,
    salt: u64,
    stretch: f64,
}

impl Tile {
    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

struct Scene {
    tiles: Vec<Tile>,
    texture: TextureSpec,
    seed: u64,
    /// Texture coordinates are left normalized coordinates times this.
    scale: f64,
}

struct Hit {
    s: f64,
    tile: usize,
    point: Vector3<f64>,
}

impl Scene {
    fn build(spec: &SceneSpec, rig: &StereoRig) -> Scene {
        let left = &rig.left;
        let nx0 = -left.cx / left.fx;
        let nx1 = (rig.width as f64 - left.cx) / left.fx;
        let ny0 = -left.cy / left.fy;
        let ny1 = (rig.height as f64 - left.cy) / left.fy;
        let grid = |cols: usize, rows: usize, depths: &[f64]| -> Vec<Tile> {
            let mut tiles = Vec::with_capacity(cols * rows);
            let edge = |i: usize, n: usize, lo: f64, hi: f64| -> f64 {
                if i == 0 {
                    f64::NEG_INFINITY
                } else if i == n {
                    f64::INFINITY
                } else {
                    lo + (hi - lo) * i as f64 / n as f64
                }
            };
            for r in 0..rows {
                for c in 0..cols {
                    tiles.push(Tile {
                        x0: edge(c, cols, nx0, nx1),
                        x1: edge(c + 1, cols, nx0, nx1),
                        y0: edge(r, rows, ny0, ny1),
                        y1: edge(r + 1, rows, ny0, ny1),
                        z: depths[r * cols + c],
                        salt: (r * cols + c) as u64 + 1,
                        stretch: 1.0,
                    });
                }
            }
            tiles
        };
        let mut tiles = match &spec.depth {
            DepthModel::Plane { depth_mm } => grid(1, 1, &[*depth_mm]),
            DepthModel::Grid {
                cols,
                rows,
                depths_mm,
            } => grid(*cols, *rows, depths_mm),
            DepthModel::Mosaic {
                cols,
                rows,
                z_min_mm,
                z_max_mm,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, 0x5eed_0001));
                let (inv_lo, inv_hi) = (1.0 / z_max_mm, 1.0 / z_min_mm);
                let depths: Vec<f64> = (0..cols * rows)
                    .map(|_| 1.0 / rng.random_range(inv_lo..=inv_hi))
                    .collect();
                grid(*cols, *rows, &depths)
            }
        };
        if tiles.len() > 1 {
            let far = tiles.iter().map(|t| t.z).fold(0.0, f64::max);
            tiles.push(Tile {
                x0: f64::NEG_INFINITY,
                x1: f64::INFINITY,
                y0: f64::NEG_INFINITY,
                y1: f64::INFINITY,
                z: far * BACKGROUND_FACTOR,
                salt: 0,
                stretch: 1.0,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, 0x5eed_0002));
        let log_max = spec.texture.anisotropy.ln();
        for t in &mut tiles {
            t.stretch = (rng.random::<f64>() * log_max).exp();
        }
        Scene {
            tiles,
            texture: spec.texture,
            seed: spec.seed,
            scale: left.fx,
        }
    }

    /// Nearest surface along `origin + s * dir`, `s > 0`.
    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        if dir.z <= 0.0 {
            return None;
        }
        let mut best: Option<Hit> = None;
        for (i, t) in self.tiles.iter().enumerate() {
            let s = (t.z - origin.z) / dir.z;
            if s <= 0.0 || best.as_ref().is_some_and(|b| b.s <= s) {
                continue;
            }
            let p = origin + dir * s;
            if t.contains(p.x / t.z, p.y / t.z) {
                best = Some(Hit {
                    s,
                    tile: i,
                    point: p,
                });
            }
        }
        best
    }

    fn shade(&self, hit: &Hit) -> f64 {
        let t = &self.tiles[hit.tile];
        let u = hit.point.x / t.z * self.scale;
        let v = hit.point.y / t.z * self.scale / t.stretch;
        let n = fbm(u, v, &self.texture, mix(self.seed, t.salt));
        self.texture.mean + self.texture.contrast * 127.0 * (n * TEXTURE_GAIN).clamp(-1.0, 1.0)
    }
}

/// Renders the pair seen by `rig` and its ground-truth disparity.
pub fn render_pair(spec: &SceneSpec, rig: &StereoRig) -> Result<RenderedPair> {
    spec.validate()?;
    if rig.extrinsics.tx == 0.0 || rig.baseline() == 0.0 {
        return Err(Error::SceneOutOfRange(
            "zero baseline puts every point at infinite depth".into(),
        ));
    }
    rig.validate()?;
    let scene = Scene::build(spec, rig);
    let rotation = rig.extrinsics.rotation()?;
    let back = rotation.transpose();
    let right_center = -back.apply(&rig.extrinsics.translation());

    let left = render_view(&scene, spec, rig, &rig.left, 0, |d| (Vector3::zeros(), d))?;
    let right = render_view(&scene, spec, rig, &rig.right, 1, |d| {
        (right_center, back.apply(&d))
    })?;
    let disparity = ground_truth(&scene, spec, rig, &right_center)?;
    Ok(RenderedPair {
        left,
        right,
        disparity,
    })
}

/// Renders `count` scenes seeded from `seed` through one rig.
pub fn render_sequence(
    spec: &SceneSpec,
    rig: &StereoRig,
    count: usize,
    seed: u64,
) -> Result<Vec<RenderedPair>> {
    (0..count)
        .map(|i| render_pair(&spec.with_seed(mix(seed, i as u64 + 1)), rig))
        .collect()
}

const SUBSAMPLES: [(f64, f64); 4] = [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)];

fn render_view(
    scene: &Scene,
    spec: &SceneSpec,
    rig: &StereoRig,
    intr: &Intrinsics,
    side: u64,
    to_left_frame: impl Fn(Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) + Sync,
) -> Result<Image> {
    let (w, h) = (rig.width, rig.height);
    let noise = if spec.noise_sigma > 0.0 {
        Some(
            Normal::new(0.0, spec.noise_sigma)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?,
        )
    } else {
        None
    };
    let rows: Vec<Result<Vec<u8>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(spec.seed, side), y as u64));
            let mut row = Vec::with_capacity(w);
            for x in 0..w {
                let mut acc = 0.0;
                for (dx, dy) in SUBSAMPLES {
                    let n = undistort(Point2::new(x as f64 + dx, y as f64 + dy), intr)?;
                    let (origin, dir) = to_left_frame(Vector3::new(n.x, n.y, 1.0));
                    acc += match scene.intersect(&origin, &dir) {
                        Some(hit) => scene.shade(&hit),
                        None => 0.0,
                    };
                }
                let mut value = acc / SUBSAMPLES.len() as f64;
                if let Some(dist) = &noise {
                    value += dist.sample(&mut rng);
                }
                row.push(value.round().clamp(0.0, 255.0) as u8);
            }
            Ok(row)
        })
        .collect();
    let mut pixels = Vec::with_capacity(w * h);
    for row in rows {
        pixels.extend(row?);
    }
    Image::new(w, h, pixels)
}

fn ground_truth(
    scene: &Scene,
    spec: &SceneSpec,
    rig: &StereoRig,
    right_center: &Vector3<f64>,
) -> Result<DisparityMap> {
    let (w, h) = (rig.width, rig.height);
    let rect = RectifiedIntrinsics::from_rig(rig);
    let (left_rot, _, baseline) = rectifying_rotations(rig)?;
    let back = left_rot.transpose();
    let rotation = rig.extrinsics.rotation()?;
    let translation = rig.extrinsics.translation();
    let in_image =
        |p: Point2<f64>| p.x >= 0.0 && p.y >= 0.0 && p.x <= (w - 1) as f64 && p.y <= (h - 1) as f64;
    let max_fixed = (spec.max_disparity * SUBPIXEL_SCALE as usize) as f64;

    let rows: Vec<Result<Vec<u16>>> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut out = vec![crate::matcher::INVALID_DISPARITY; w];
            for (u, slot) in out.iter_mut().enumerate() {
                let dir = back.apply(&rect.ray(u as f64, v as f64));
                let Some(hit) = scene.intersect(&Vector3::zeros(), &dir) else {
                    continue;
                };
                let p = hit.point;
                let z_rect = left_rot.apply(&p).z;
                let d = rect.fx * baseline / z_rect;
                let fixed = (d * SUBPIXEL_SCALE as f64).round();
                if fixed > max_fixed {
                    return Err(Error::SceneOutOfRange(format!(
                        "disparity {d:.1} px at ({u}, {v}) exceeds {}",
                        spec.max_disparity
                    )));
                }
                if (u as f64) < d {
                    continue;
                }
                if !in_image(project(&p, &rig.left)?) {
                    continue;
                }
                let pr = rotation.apply(&p) + translation;
                if pr.z <= 0.0 || !in_image(project(&pr, &rig.right)?) {
                    continue;
                }
                let toward = p - right_center;
                let visible = scene
                    .intersect(right_center, &toward)
                    .is_some_and(|seen| seen.tile == hit.tile || seen.s >= 1.0 - 1e-9);
                if visible {
                    *slot = fixed as u16;
                }
            }
            Ok(out)
        })
        .collect();
    let mut values = Vec::with_capacity(w * h);
    for row in rows {
        values.extend(row?);
    }
    DisparityMap::from_raw(w, h, spec.max_disparity, values)
}

/// splitmix64 finalizer over `a ^ b`.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn lattice(ix: i64, iy: i64, seed: u64) -> f64 {
    let h = mix(mix(seed, ix as u64), iy as u64);
    (h >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn value_noise(x: f64, y: f64, seed: u64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i64, fy as i64);
    let (tx, ty) = (fade(x - fx), fade(y - fy));
    let a = lattice(ix, iy, seed);
    let b = lattice(ix + 1, iy, seed);
    let c = lattice(ix, iy + 1, seed);
    let d = lattice(ix + 1, iy + 1, seed);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

/// Octave sum normalized by total amplitude, roughly in `[-1, 1]`.
fn fbm(u: f64, v: f64, t: &TextureSpec, seed: u64) -> f64 {
    let (mut sum, mut norm, mut amp, mut freq) = (0.0, 0.0, 1.0, 1.0 / t.base_period_px);
    for o in 0..t.octaves {
        sum += amp * value_noise(u * freq, v * freq, mix(seed, o as u64));
        norm += amp;
        amp *= t.persistence;
        freq *= 2.0;
    }
    sum / norm
}

/// Additive change to each extrinsic parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Perturbation {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl Perturbation {
    /// Angles in degrees, translation in millimetres.
    pub fn from_degrees(pitch: f64, yaw: f64, roll: f64, tx: f64, ty: f64, tz: f64) -> Self {
        Self {
            pitch: pitch.to_radians(),
            yaw: yaw.to_radians(),
            roll: roll.to_radians(),
            tx,
            ty,
            tz,
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.pitch, self.yaw, self.roll, self.tx, self.ty, self.tz]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            pitch: a[0],
            yaw: a[1],
            roll: a[2],
            tx: a[3],
            ty: a[4],
            tz: a[5],
        }
    }
}

/// Adds `p` to `truth`, wrapping angles into `(-pi, pi]`.
pub fn decalibrate(truth: &ExtrinsicParams, p: &Perturbation) -> ExtrinsicParams {
    let t = truth.to_array();
    let d = p.to_array();
    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = t[i] + d[i];
        if i < 3 && d[i] != 0.0 {
            out[i] = wrap_angle(out[i]);
        }
    }
    ExtrinsicParams::from_array(out)
}

/// Uniform sample in `[-bound, bound]` per axis.
pub fn sample_perturbation(seed: u64, bounds: &Perturbation) -> Result<Perturbation> {
    let b = bounds.to_array();
    if b.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument(
            "perturbation bounds must be finite and non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = [0.0; 6];
    for (o, &bound) in out.iter_mut().zip(&b) {
        let unit: f64 = rng.random_range(-1.0..=1.0);
        *o = unit * bound;
    }
    Ok(Perturbation::from_array(out))
}

//! Block-matching stereo correspondence on rectified image pairs.
//!
//! Costs are sums of absolute differences over a square window. A left pixel
//! gets a disparity only if its window is textured, its best cost is unique
//! (no cost outside +-1 of the winner within the uniqueness ratio), and the
//! right-based winner at the matched position agrees. The right-based search
//! reuses the left cost volume: the cost of right pixel `xr` at disparity `d`
//! is the left cost of `xr + d` at `d`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Image, Mask};

/// Disparity values are stored in 1/16 pixel units.
pub const SUBPIXEL_SCALE: u16 = 16;
/// Marks pixels without a valid disparity.
pub const INVALID_DISPARITY: u16 = u16::MAX;
/// Largest block radius whose SAD still fits a `u16` accumulator.
pub const MAX_BLOCK_RADIUS: usize = 7;

/// Number of valid disparity pixels.
pub type Score = u64;

const FORBIDDEN: u16 = u16::MAX;
/// Winner keys pack `cost << KEY_SHIFT | disparity`.
const KEY_SHIFT: u32 = 12;
const KEY_MASK: u32 = (1 << KEY_SHIFT) - 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub block_radius: usize,
    pub max_disparity: usize,
    pub uniqueness_ratio: f64,
    /// Allowed left/right disparity disagreement, pixels.
    pub lr_threshold: f64,
    /// Minimum sum of absolute horizontal gradients over the block.
    pub texture_threshold: u32,
}

impl Default for MatchConfig {
    fn default() -> Self {
        let block_radius = 4;
        let side = 2 * block_radius as u32 + 1;
        Self {
            block_radius,
            max_disparity: 128,
            uniqueness_ratio: 1.15,
            lr_threshold: 1.0,
            texture_threshold: 10 * side * side,
        }
    }
}

impl MatchConfig {
    pub fn block_pixels(&self) -> u32 {
        let side = 2 * self.block_radius as u32 + 1;
        side * side
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_BLOCK_RADIUS).contains(&self.block_radius) {
            return Err(Error::InvalidArgument(format!(
                "block radius must be in 1..={MAX_BLOCK_RADIUS}, got {}",
                self.block_radius
            )));
        }
        if self.max_disparity < 1
            || self.max_disparity * SUBPIXEL_SCALE as usize >= FORBIDDEN as usize
        {
            return Err(Error::InvalidArgument(format!(
                "max disparity {} out of range",
                self.max_disparity
            )));
        }
        if !(self.uniqueness_ratio >= 1.0) || !self.uniqueness_ratio.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "uniqueness ratio must be >= 1, got {}",
                self.uniqueness_ratio
            )));
        }
        if !(self.lr_threshold >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lr threshold must be non-negative, got {}",
                self.lr_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    max_disparity: usize,
    values: Vec<u16>,
}

impl std::fmt::Debug for DisparityMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "DisparityMap({}x{}, {} valid)",
            self.width,
            self.height,
            count_valid(self)
        )
    }
}

impl DisparityMap {
    pub fn invalid(width: usize, height: usize, max_disparity: usize) -> Self {
        Self {
            width,
            height,
            max_disparity,
            values: vec![INVALID_DISPARITY; width * height],
        }
    }

    /// Builds a map from raw fixed-point values; checks the value invariant.
    pub fn from_raw(
        width: usize,
        height: usize,
        max_disparity: usize,
        values: Vec<u16>,
    ) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} disparities for {width}x{height}",
                values.len()
            )));
        }
        let limit = max_disparity * SUBPIXEL_SCALE as usize;
        if let Some(v) = values
            .iter()
            .find(|v| **v != INVALID_DISPARITY && **v as usize > limit)
        {
            return Err(Error::InvalidArgument(format!(
                "raw disparity {v} exceeds {limit}"
            )));
        }
        Ok(Self {
            width,
            height,
            max_disparity,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_disparity(&self) -> usize {
        self.max_disparity
    }

    pub fn raw(&self) -> &[u16] {
        &self.values
    }

    pub fn raw_at(&self, x: usize, y: usize) -> u16 {
        self.values[y * self.width + x]
    }

    /// Disparity in pixels, or `None` for invalid pixels.
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        match self.raw_at(x, y) {
            INVALID_DISPARITY => None,
            v => Some(v as f64 / SUBPIXEL_SCALE as f64),
        }
    }

    pub fn set(&mut self, x: usize, y: usize, disparity: Option<f64>) {
        self.values[y * self.width + x] = match disparity {
            Some(d) => (d * SUBPIXEL_SCALE as f64).round() as u16,
            None => INVALID_DISPARITY,
        };
    }

    /// Invalidates every pixel where `keep` is false.
    pub fn retain(&mut self, keep: &Mask) {
        for (v, k) in self.values.iter_mut().zip(keep.as_slice()) {
            if !*k {
                *v = INVALID_DISPARITY;
            }
        }
    }
}

pub fn count_valid(d: &DisparityMap) -> Score {
    d.values.iter().filter(|v| **v != INVALID_DISPARITY).count() as Score
}

pub fn compute_disparity(left: &Image, right: &Image, cfg: &MatchConfig) -> Result<DisparityMap> {
    compute_disparity_masked(left, right, None, None, cfg)
}

/// Like [`compute_disparity`], but windows touching a pixel flagged false in
/// the corresponding mask never take part in a match.
pub fn compute_disparity_masked(
    left: &Image,
    right: &Image,
    left_valid: Option<&Mask>,
    right_valid: Option<&Mask>,
    cfg: &MatchConfig,
) -> Result<DisparityMap> {
    cfg.validate()?;
    if !left.same_size(right) {
        return Err(Error::DimensionMismatch(format!(
            "left {}x{} vs right {}x{}",
            left.width(),
            left.height(),
            right.width(),
            right.height()
        )));
    }
    let (w, h) = (left.width(), left.height());
    let r = cfg.block_radius;
    if w <= 2 * r + cfg.max_disparity || h <= 2 * r {
        return Err(Error::InvalidArgument(format!(
            "{w}x{h} images too small for block radius {r} and max disparity {}",
            cfg.max_disparity
        )));
    }
    for (name, mask) in [("left", left_valid), ("right", right_valid)] {
        if let Some(m) = mask {
            if m.width() != w || m.height() != h {
                return Err(Error::DimensionMismatch(format!(
                    "{name} mask is {}x{}, images are {w}x{h}",
                    m.width(),
                    m.height()
                )));
            }
        }
    }

    let ctx = MatchContext {
        left,
        right,
        cfg,
        width: w,
        texture: block_texture(left, left_valid, r),
        left_bad: left_valid.map(|m| block_invalid(m, r)),
        right_bad: right_valid.map(|m| block_invalid(m, r)),
    };

    let mut out = DisparityMap::invalid(w, h, cfg.max_disparity);
    let rows = r..h - r;
    let bands = band_ranges(rows.clone(), rayon::current_num_threads());
    let results: Vec<(usize, Vec<u16>)> = bands
        .into_par_iter()
        .map(|band| {
            let start = band.start;
            (start, ctx.match_band(band))
        })
        .collect();
    for (start, values) in results {
        out.values[start * w..start * w + values.len()].copy_from_slice(&values);
    }
    Ok(out)
}

fn band_ranges(rows: std::ops::Range<usize>, threads: usize) -> Vec<std::ops::Range<usize>> {
    let n = rows.len();
    // One band per thread on a single core avoids re-priming column sums.
    let bands = if threads <= 1 {
        1
    } else {
        (threads * 2).min(n)
    };
    (0..bands)
        .map(|i| rows.start + i * n / bands..rows.start + (i + 1) * n / bands)
        .filter(|b| !b.is_empty())
        .collect()
}

/// Sum of absolute forward differences along x over each block, by pixel.
/// Differences touching a masked-out pixel count as zero.
fn block_texture(img: &Image, valid: Option<&Mask>, r: usize) -> Vec<u32> {
    let (w, h) = (img.width(), img.height());
    let grad: Vec<u32> = (0..h)
        .flat_map(|y| {
            let row = img.row(y);
            let ok = valid.map(|m| &m.as_slice()[y * w..(y + 1) * w]);
            (0..w).map(move |x| {
                let inside = x + 1 < w && ok.is_none_or(|ok| ok[x] && ok[x + 1]);
                if inside {
                    row[x + 1].abs_diff(row[x]) as u32
                } else {
                    0
                }
            })
        })
        .collect();
    box_sum(&grad, w, h, r)
}

/// `0xFFFF` where the block around a pixel contains a masked-out pixel.
fn block_invalid(mask: &Mask, r: usize) -> Vec<u16> {
    let (w, h) = (mask.width(), mask.height());
    let bad: Vec<u32> = mask.as_slice().iter().map(|v| u32::from(!*v)).collect();
    box_sum(&bad, w, h, r)
        .into_iter()
        .map(|n| if n > 0 { FORBIDDEN } else { 0 })
        .collect()
}

/// Block sums over `(2r+1)^2` windows; zero where the window leaves the image.
fn box_sum(values: &[u32], w: usize, h: usize, r: usize) -> Vec<u32> {
    let stride = w + 1;
    let mut integral = vec![0u32; stride * (h + 1)];
    for y in 0..h {
        let mut acc = 0u32;
        for x in 0..w {
            acc += values[y * w + x];
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + acc;
        }
    }
    let mut out = vec![0u32; w * h];
    for y in r..h.saturating_sub(r) {
        for x in r..w.saturating_sub(r) {
            let (x0, y0, x1, y1) = (x - r, y - r, x + r + 1, y + r + 1);
            out[y * w + x] = integral[y1 * stride + x1] + integral[y0 * stride + x0]
                - integral[y0 * stride + x1]
                - integral[y1 * stride + x0];
        }
    }
    out
}

struct MatchContext<'a> {
    left: &'a Image,
    right: &'a Image,
    cfg: &'a MatchConfig,
    width: usize,
    texture: Vec<u32>,
    left_bad: Option<Vec<u16>>,
    right_bad: Option<Vec<u16>>,
}

struct Scratch {
    colsum: Vec<u16>,
    cost: Vec<u16>,
    partial: [Vec<u16>; 2],
    key: Vec<u32>,
    right_key: Vec<u32>,
    best: Vec<u16>,
    best_d: Vec<u16>,
    threshold: Vec<u16>,
    far_min: Vec<u16>,
}

impl MatchContext<'_> {
    /// Matches rows `band`, returning their disparities row-major.
    fn match_band(&self, band: std::ops::Range<usize>) -> Vec<u16> {
        #[cfg(target_arch = "x86_64")]
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: AVX2 support was just detected.
            return unsafe { self.match_band_avx2(band) };
        }
        self.match_band_portable(band)
    }

    /// Same code as the portable path, compiled with AVX2 enabled. Only
    /// integer arithmetic is involved, so results are identical.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn match_band_avx2(&self, band: std::ops::Range<usize>) -> Vec<u16> {
        self.match_band_portable(band)
    }

    #[inline(always)]
    fn match_band_portable(&self, band: std::ops::Range<usize>) -> Vec<u16> {
        let w = self.width;
        let levels = self.cfg.max_disparity + 1;
        let mut scratch = Scratch {
            colsum: vec![0; levels * w],
            cost: vec![FORBIDDEN; levels * w],
            partial: [vec![0; levels * w], vec![0; levels * w]],
            key: vec![0; w],
            right_key: vec![0; w],
            best: vec![0; w],
            best_d: vec![0; w],
            threshold: vec![0; w],
            far_min: vec![0; w],
        };
        let mut out = vec![INVALID_DISPARITY; band.len() * w];
        for (i, y) in band.clone().enumerate() {
            if i == 0 {
                self.prime_columns(&mut scratch.colsum, y);
            } else {
                self.slide_columns(&mut scratch.colsum, y);
            }
            self.row_costs(&mut scratch, y);
            self.select_row(&mut scratch, y, &mut out[i * w..(i + 1) * w]);
        }
        out
    }

    #[inline(always)]
    fn prime_columns(&self, colsum: &mut [u16], y: usize) {
        let (w, r) = (self.width, self.cfg.block_radius);
        colsum.fill(0);
        for yy in y - r..=y + r {
            let (lrow, rrow) = (self.left.row(yy), self.right.row(yy));
            for d in 0..=self.cfg.max_disparity {
                let cs = &mut colsum[d * w + d..(d + 1) * w];
                for ((c, &a), &b) in cs.iter_mut().zip(&lrow[d..]).zip(&rrow[..w - d]) {
                    *c += a.abs_diff(b) as u16;
                }
            }
        }
    }

    #[inline(always)]
    fn slide_columns(&self, colsum: &mut [u16], y: usize) {
        let (w, r) = (self.width, self.cfg.block_radius);
        let (l_in, r_in) = (self.left.row(y + r), self.right.row(y + r));
        let (l_out, r_out) = (self.left.row(y - r - 1), self.right.row(y - r - 1));
        for d in 0..=self.cfg.max_disparity {
            let cs = &mut colsum[d * w + d..(d + 1) * w];
            let rows = l_in[d..]
                .iter()
                .zip(&r_in[..w - d])
                .zip(l_out[d..].iter().zip(&r_out[..w - d]));
            for (c, ((&a, &b), (&p, &q))) in cs.iter_mut().zip(rows) {
                *c = c
                    .wrapping_add(a.abs_diff(b) as u16)
                    .wrapping_sub(p.abs_diff(q) as u16);
            }
        }
    }

    /// Window costs for row `y`; entries without a full in-image match are
    /// `FORBIDDEN`.
    ///
    /// The horizontal window sum runs over the whole `(d, x)` slab at once:
    /// windows that straddle two disparity rows only land on positions that
    /// are forbidden afterwards.
    #[inline(always)]
    fn row_costs(&self, s: &mut Scratch, y: usize) {
        let (w, r) = (self.width, self.cfg.block_radius);
        let hi = w - r;
        let n = 2 * r + 1;
        let len = s.colsum.len() - (n - 1);
        window_sums(&s.colsum, n, &mut s.cost[r..r + len], &mut s.partial);
        for d in 0..=self.cfg.max_disparity {
            let lo = d + r;
            let row = &mut s.cost[d * w..(d + 1) * w];
            row[..lo].fill(FORBIDDEN);
            row[hi..].fill(FORBIDDEN);
            let dst = &mut row[lo..hi];
            if let Some(bad) = &self.left_bad {
                for (o, &b) in dst.iter_mut().zip(&bad[y * w + lo..y * w + hi]) {
                    *o |= b;
                }
            }
            if let Some(bad) = &self.right_bad {
                for (o, &b) in dst.iter_mut().zip(&bad[y * w + lo - d..y * w + hi - d]) {
                    *o |= b;
                }
            }
        }
    }

    #[inline(always)]
    fn select_row(&self, s: &mut Scratch, y: usize, out: &mut [u16]) {
        let (w, r) = (self.width, self.cfg.block_radius);
        let max_d = self.cfg.max_disparity;
        let hi = w - r;

        // Winners as packed (cost, disparity) keys: the minimum key has the
        // lowest cost and, among equal costs, the lowest disparity. Right
        // pixel `xr` sees the left cost of `xr + d` at disparity `d`.
        s.key.fill(u32::MAX);
        s.right_key.fill(u32::MAX);
        for d in 0..=max_d {
            let lo = d + r;
            let row = &s.cost[d * w + lo..d * w + hi];
            let dd = d as u32;
            for (k, &c) in s.key[lo..hi].iter_mut().zip(row) {
                *k = (*k).min(((c as u32) << KEY_SHIFT) | dd);
            }
            for (k, &c) in s.right_key[lo - d..hi - d].iter_mut().zip(row) {
                *k = (*k).min(((c as u32) << KEY_SHIFT) | dd);
            }
        }
        let ratio = self.cfg.uniqueness_ratio;
        for (((k, b), bd), t) in s
            .key
            .iter()
            .zip(s.best.iter_mut())
            .zip(s.best_d.iter_mut())
            .zip(s.threshold.iter_mut())
        {
            *b = (k >> KEY_SHIFT).min(FORBIDDEN as u32) as u16;
            *bd = (k & KEY_MASK) as u16;
            *t = (*b as f64 * ratio).ceil().min(FORBIDDEN as f64) as u16;
        }

        // Uniqueness: lowest cost more than one level away from the winner.
        s.far_min.fill(FORBIDDEN);
        for d in 0..=max_d {
            let lo = d + r;
            let dd = d as u16;
            let row = &s.cost[d * w + lo..d * w + hi];
            for ((m, &bd), &c) in s.far_min[lo..hi].iter_mut().zip(&s.best_d[lo..hi]).zip(row) {
                let far = dd.abs_diff(bd) > 1;
                *m = (*m).min(if far { c } else { FORBIDDEN });
            }
        }

        let texture = &self.texture[y * w..(y + 1) * w];
        for x in r..hi {
            let best = s.best[x];
            if best == FORBIDDEN
                || s.far_min[x] < s.threshold[x]
                || texture[x] < self.cfg.texture_threshold
            {
                continue;
            }
            let d = s.best_d[x] as usize;
            let rd = (s.right_key[x - d] & KEY_MASK) as usize;
            if (d.abs_diff(rd) as f64) > self.cfg.lr_threshold {
                continue;
            }
            let offset = if best == 0 || d == 0 || d == max_d {
                0.0
            } else {
                let before = s.cost[(d - 1) * w + x];
                let after = s.cost[(d + 1) * w + x];
                parabola_offset(before, best, after)
            };
            let value = ((d as f64 + offset) * SUBPIXEL_SCALE as f64).round();
            out[x] = value.clamp(0.0, (max_d * SUBPIXEL_SCALE as usize) as f64) as u16;
        }
    }
}

/// `dst[i] = src[i] + ... + src[i + n - 1]` (wrapping), built from
/// power-of-two partial sums so the pass count grows with `log2 n`.
#[inline(always)]
fn window_sums(src: &[u16], n: usize, dst: &mut [u16], partial: &mut [Vec<u16>; 2]) {
    let len = dst.len();
    debug_assert_eq!(src.len(), len + n - 1);
    let [cur, next] = partial;
    cur[..src.len()].copy_from_slice(src);
    // cur[i] holds the sum of `p` inputs from i; dst[i] the sum of `offset`.
    let (mut p, mut offset, mut started, mut bits) = (1, 0, false, n);
    loop {
        if bits & 1 == 1 {
            let part = &cur[offset..offset + len];
            if started {
                for (o, &v) in dst.iter_mut().zip(part) {
                    *o = o.wrapping_add(v);
                }
            } else {
                dst.copy_from_slice(part);
                started = true;
            }
            offset += p;
        }
        bits >>= 1;
        if bits == 0 {
            break;
        }
        let valid = src.len() + 1 - 2 * p;
        for ((o, &a), &b) in next[..valid]
            .iter_mut()
            .zip(&cur[..valid])
            .zip(&cur[p..p + valid])
        {
            *o = a.wrapping_add(b);
        }
        std::mem::swap(cur, next);
        p *= 2;
    }
}

/// Vertex offset of the parabola through three equally spaced costs.
fn parabola_offset(before: u16, at: u16, after: u16) -> f64 {
    if before == FORBIDDEN || after == FORBIDDEN {
        return 0.0;
    }
    let (a, b, c) = (before as f64, at as f64, after as f64);
    let denom = a - 2.0 * b + c;
    if denom <= 0.0 {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

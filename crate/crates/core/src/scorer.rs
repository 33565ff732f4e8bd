//! The stereo score: rectify a raw pair under candidate extrinsics, match,
//! and count valid disparities.

use crate::error::{Error, Result};
use crate::geometry::{ExtrinsicParams, StereoRig};
use crate::image::Image;
use crate::matcher::{compute_disparity_masked, count_valid, DisparityMap, MatchConfig, Score};
use crate::rectification::{
    compute_rectification_with, remap, RectifiedIntrinsics, RectifyMaps, Remapped,
};

#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub left: &'a Image,
    pub right: &'a Image,
    pub rig: &'a StereoRig,
    pub match_cfg: &'a MatchConfig,
}

/// Intermediate products of one score evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub maps: RectifyMaps,
    pub left: Remapped,
    pub right: Remapped,
    pub disparity: DisparityMap,
}

impl Evaluation {
    pub fn score(&self) -> Score {
        count_valid(&self.disparity)
    }
}

pub fn stereo_score(req: &ScoreRequest<'_>) -> Result<Score> {
    let rectified = RectifiedIntrinsics::from_rig(req.rig);
    Ok(evaluate(req, rectified)?.score())
}

/// Full rectify-and-match pipeline with explicit rectified intrinsics.
pub fn evaluate(req: &ScoreRequest<'_>, rectified: RectifiedIntrinsics) -> Result<Evaluation> {
    check_dimensions(req.left, req.right, req.rig)?;
    let maps = compute_rectification_with(req.rig, rectified)?;
    let left = remap(req.left, &maps.left);
    let right = remap(req.right, &maps.right);
    let disparity = compute_disparity_masked(
        &left.image,
        &right.image,
        Some(&left.in_bounds),
        Some(&right.in_bounds),
        req.match_cfg,
    )?;
    Ok(Evaluation {
        maps,
        left,
        right,
        disparity,
    })
}

fn check_dimensions(left: &Image, right: &Image, rig: &StereoRig) -> Result<()> {
    for (name, img) in [("left", left), ("right", right)] {
        if img.width() != rig.width || img.height() != rig.height {
            return Err(Error::DimensionMismatch(format!(
                "{name} image is {}x{}, rig expects {}x{}",
                img.width(),
                img.height(),
                rig.width,
                rig.height
            )));
        }
    }
    Ok(())
}

/// Score function over candidate extrinsics for one fixed pair.
///
/// Rectified intrinsics come from the template rig and stay fixed for every
/// candidate, so score differences reflect geometry only.
#[derive(Debug, Clone)]
pub struct StereoScorer<'a> {
    left: &'a Image,
    right: &'a Image,
    template: StereoRig,
    rectified: RectifiedIntrinsics,
    match_cfg: MatchConfig,
}

impl<'a> StereoScorer<'a> {
    pub fn new(
        left: &'a Image,
        right: &'a Image,
        template: &StereoRig,
        match_cfg: &MatchConfig,
    ) -> Result<Self> {
        check_dimensions(left, right, template)?;
        match_cfg.validate()?;
        Ok(Self {
            left,
            right,
            template: *template,
            rectified: RectifiedIntrinsics::from_rig(template),
            match_cfg: *match_cfg,
        })
    }

    pub fn rig(&self, extrinsics: &ExtrinsicParams) -> StereoRig {
        self.template.with_extrinsics(*extrinsics)
    }

    pub fn evaluate(&self, extrinsics: &ExtrinsicParams) -> Result<Evaluation> {
        let rig = self.rig(extrinsics);
        evaluate(
            &ScoreRequest {
                left: self.left,
                right: self.right,
                rig: &rig,
                match_cfg: &self.match_cfg,
            },
            self.rectified,
        )
    }

    pub fn score(&self, extrinsics: &ExtrinsicParams) -> Result<Score> {
        Ok(self.evaluate(extrinsics)?.score())
    }
}

/// `n_o / n_gt`.
pub fn score_ratio(n_o: Score, n_gt: Score) -> Result<f64> {
    if n_gt == 0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(n_o as f64 / n_gt as f64)
}

/// Ratio rounded to the three decimals it is reported with.
pub fn rounded_ratio(r: f64) -> f64 {
    (r * 1000.0).round() / 1000.0
}

pub fn format_ratio(r: f64) -> String {
    format!("{r:.3}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_examples() {
        assert_eq!(format_ratio(score_ratio(90646, 90639).unwrap()), "1.000");
        assert_eq!(format_ratio(score_ratio(41033, 90639).unwrap()), "0.453");
        assert_eq!(format_ratio(score_ratio(0, 12345).unwrap()), "0.000");
        assert_eq!(rounded_ratio(score_ratio(19311, 174877).unwrap()), 0.110);
        assert!(matches!(score_ratio(5, 0), Err(Error::UndefinedRatio)));
    }
}

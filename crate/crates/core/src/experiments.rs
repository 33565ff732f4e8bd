//! Experiment drivers: score tables across calibrations, single-pair
//! improvement, ex-nihilo runs, held-out generalization and sequential
//! calibration over many pairs.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ExtrinsicParams, StereoRig};
use crate::image::Image;
use crate::matcher::{MatchConfig, Score};
use crate::optimizer::{compass_search, fmt_num, CompassConfig, OptimizationTrace, Steps};
use crate::scorer::{format_ratio, score_ratio, StereoScorer};
use crate::synth::RenderedPair;

/// One stereo pair, optionally with the calibration it should be judged by.
#[derive(Debug, Clone)]
pub struct StereoPair {
    pub id: String,
    pub left: Image,
    pub right: Image,
    pub reference: Option<StereoRig>,
}

impl StereoPair {
    pub fn new(
        id: impl Into<String>,
        left: Image,
        right: Image,
        reference: Option<StereoRig>,
    ) -> Result<Self> {
        let id = id.into();
        if !left.same_size(&right) {
            return Err(Error::DimensionMismatch(format!(
                "pair {id}: left {}x{} vs right {}x{}",
                left.width(),
                left.height(),
                right.width(),
                right.height()
            )));
        }
        Ok(Self {
            id,
            left,
            right,
            reference,
        })
    }
}

/// Ordered pairs of uniform size.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pairs: Vec<StereoPair>,
}

impl PairSet {
    pub fn new(pairs: Vec<StereoPair>) -> Result<Self> {
        if let Some(first) = pairs.first() {
            for p in &pairs[1..] {
                if !p.left.same_size(&first.left) {
                    return Err(Error::DimensionMismatch(format!(
                        "pair {} is {}x{}, pair {} is {}x{}",
                        p.id,
                        p.left.width(),
                        p.left.height(),
                        first.id,
                        first.left.width(),
                        first.left.height()
                    )));
                }
            }
        }
        Ok(Self { pairs })
    }

    /// Rendered pairs named `{prefix}{index}`, all referenced to `rig`.
    pub fn from_rendered(
        prefix: &str,
        rig: &StereoRig,
        rendered: Vec<RenderedPair>,
    ) -> Result<Self> {
        let pairs = rendered
            .into_iter()
            .enumerate()
            .map(|(i, r)| StereoPair::new(format!("{prefix}{i}"), r.left, r.right, Some(*rig)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&StereoPair> {
        self.pairs.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StereoPair> {
        self.pairs.iter()
    }
}

fn scorer<'a>(
    pair: &'a StereoPair,
    rig: &StereoRig,
    match_cfg: &MatchConfig,
) -> Result<StereoScorer<'a>> {
    StereoScorer::new(&pair.left, &pair.right, rig, match_cfg)
}

/// Scores of every pair under every calibration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTable {
    pub pair_ids: Vec<String>,
    pub calibration_ids: Vec<String>,
    /// `scores[pair][calibration]`.
    pub scores: Vec<Vec<Score>>,
}

impl ScoreTable {
    /// Column of the highest score for each pair; ties go to the first.
    pub fn argmax(&self) -> Vec<usize> {
        self.scores
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(
                        (0, row[0]),
                        |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc },
                    )
                    .0
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["pair".to_string()];
        header.extend(self.calibration_ids.iter().cloned());
        header.push("argmax".into());
        w.write_record(&header).map_err(csv_err)?;
        for ((id, row), best) in self.pair_ids.iter().zip(&self.scores).zip(self.argmax()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|s| s.to_string()));
            rec.push(self.calibration_ids[best].clone());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<table>", e))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}

/// Scores every pair under every named calibration.
pub fn calibration_matrix(
    pairs: &PairSet,
    calibrations: &[(String, StereoRig)],
    match_cfg: &MatchConfig,
) -> Result<ScoreTable> {
    if pairs.is_empty() || calibrations.is_empty() {
        return Err(Error::InvalidArgument(
            "calibration matrix needs at least one pair and one calibration".into(),
        ));
    }
    let mut scores = Vec::with_capacity(pairs.len());
    for pair in pairs.iter() {
        let mut row = Vec::with_capacity(calibrations.len());
        for (_, rig) in calibrations {
            row.push(scorer(pair, rig, match_cfg)?.score(&rig.extrinsics)?);
        }
        scores.push(row);
    }
    Ok(ScoreTable {
        pair_ids: pairs.iter().map(|p| p.id.clone()).collect(),
        calibration_ids: calibrations.iter().map(|(id, _)| id.clone()).collect(),
        scores,
    })
}

/// One row of an improvement table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub sequence_id: String,
    pub image_id: String,
    pub calibration_id: String,
    pub n_i: Score,
    pub n_o: Score,
    pub n_gt: Option<Score>,
    /// `n_o / n_gt`, when a non-zero reference score exists.
    pub r: Option<f64>,
}

impl ExperimentRecord {
    fn new(
        sequence_id: &str,
        image_id: &str,
        calibration_id: &str,
        n_i: Score,
        n_o: Score,
        n_gt: Option<Score>,
    ) -> Self {
        let r = n_gt.and_then(|g| score_ratio(n_o, g).ok());
        Self {
            sequence_id: sequence_id.into(),
            image_id: image_id.into(),
            calibration_id: calibration_id.into(),
            n_i,
            n_o,
            n_gt,
            r,
        }
    }

    /// True when `r` is known and below `threshold`.
    pub fn below(&self, threshold: f64) -> bool {
        self.r.is_some_and(|r| r < threshold)
    }
}

pub const RECORD_HEADER: [&str; 7] = [
    "sequence_id",
    "image_id",
    "calibration_id",
    "n_i",
    "n_o",
    "n_gt",
    "r",
];

pub fn write_records<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER).map_err(csv_err)?;
    for rec in records {
        w.write_record([
            rec.sequence_id.clone(),
            rec.image_id.clone(),
            rec.calibration_id.clone(),
            rec.n_i.to_string(),
            rec.n_o.to_string(),
            rec.n_gt.map(|g| g.to_string()).unwrap_or_default(),
            rec.r.map(format_ratio).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<records>", e))
}

/// Result of optimizing one pair.
#[derive(Debug, Clone)]
pub struct Improvement {
    pub record: ExperimentRecord,
    pub optimized: StereoRig,
    pub trace: OptimizationTrace,
}

/// Runs compass search on one pair starting from `initial`.
///
/// All scores, including the reference score, use the rectified intrinsics
/// of `initial`, so they are directly comparable.
pub fn improve_calibration(
    pair: &StereoPair,
    initial: &StereoRig,
    reference: Option<&StereoRig>,
    cfg: &CompassConfig,
    match_cfg: &MatchConfig,
) -> Result<Improvement> {
    let sc = scorer(pair, initial, match_cfg)?;
    let n_gt = reference.map(|r| sc.score(&r.extrinsics)).transpose()?;
    let (best, trace) = compass_search(|e| sc.score(e), &initial.extrinsics, cfg)?;
    let n_i = trace.rows[0].score;
    let record = ExperimentRecord::new("", &pair.id, "", n_i, trace.best_score, n_gt);
    Ok(Improvement {
        record,
        optimized: initial.with_extrinsics(best),
        trace,
    })
}

/// Calibration from nothing but the intrinsics and the baseline length:
/// compass search from zero rotation and translation `(-baseline, 0, 0)`
/// with the baseline frozen. `intrinsics` supplies the cameras and image
/// size; its extrinsics are ignored.
pub fn ex_nihilo(
    pair: &StereoPair,
    intrinsics: &StereoRig,
    baseline_mm: f64,
    cfg: &CompassConfig,
    match_cfg: &MatchConfig,
) -> Result<Improvement> {
    if !(baseline_mm > 0.0 && baseline_mm.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "baseline must be positive, got {baseline_mm}"
        )));
    }
    let initial = intrinsics.with_extrinsics(ExtrinsicParams::ideal(baseline_mm));
    let mut cfg = *cfg;
    cfg.free_mask[3] = false;
    improve_calibration(pair, &initial, pair.reference.as_ref(), &cfg, match_cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizationRow {
    pub image_id: String,
    pub score_initial: Score,
    pub score_optimized: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizationReport {
    pub rows: Vec<GeneralizationRow>,
}

impl GeneralizationReport {
    /// Fraction of pairs where the optimized calibration scores strictly
    /// higher; `None` for an empty report.
    pub fn improved_fraction(&self) -> Option<f64> {
        if self.rows.is_empty() {
            return None;
        }
        let improved = self
            .rows
            .iter()
            .filter(|r| r.score_optimized > r.score_initial)
            .count();
        Some(improved as f64 / self.rows.len() as f64)
    }
}

/// Scores held-out pairs under the initial and the optimized calibration.
pub fn generalization_check(
    optimized: &StereoRig,
    initial: &StereoRig,
    others: &PairSet,
    match_cfg: &MatchConfig,
) -> Result<GeneralizationReport> {
    let rows = others
        .iter()
        .map(|pair| {
            let sc = scorer(pair, initial, match_cfg)?;
            Ok(GeneralizationRow {
                image_id: pair.id.clone(),
                score_initial: sc.score(&initial.extrinsics)?,
                score_optimized: sc.score(&optimized.extrinsics)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneralizationReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SequentialConfig {
    pub seed: u64,
    /// Compass iterations run on each visited pair, regardless of step size.
    pub per_pair_iterations: usize,
    /// Step schedule and free mask; the minimum steps and iteration cap are
    /// replaced by `per_pair_iterations`.
    pub compass: CompassConfig,
    /// Number of sweeps over the pairs, each in a fresh random order.
    pub passes: usize,
    /// Skip a pair whose starting score is below this fraction of the median
    /// starting score of the pairs optimized so far.
    pub suitability: Option<f64>,
}

impl Default for SequentialConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            per_pair_iterations: 50,
            compass: CompassConfig::default(),
            passes: 1,
            suitability: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentialRow {
    pub pass: usize,
    /// Position in the visit order within the pass.
    pub visit: usize,
    pub pair_id: String,
    pub iteration: usize,
    pub params: ExtrinsicParams,
    pub score: Score,
    /// Score relative to the pair's reference score, when one exists.
    pub relative: Option<f64>,
    pub steps: Steps,
    /// First row of a pair.
    pub boundary: bool,
}

/// Summary of one visited pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub pass: usize,
    pub pair_index: usize,
    pub pair_id: String,
    pub start: ExtrinsicParams,
    pub best: ExtrinsicParams,
    pub start_score: Score,
    pub best_score: Score,
    pub reference_score: Option<Score>,
    pub skipped: bool,
}

impl Segment {
    pub fn relative(&self) -> Option<f64> {
        self.reference_score
            .and_then(|r| score_ratio(self.best_score, r).ok())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentialTrace {
    pub seed: u64,
    /// Pair indices in visit order, one list per pass.
    pub order: Vec<Vec<usize>>,
    pub rows: Vec<SequentialRow>,
    pub segments: Vec<Segment>,
    pub result: ExtrinsicParams,
}

impl SequentialTrace {
    /// Segments that were actually optimized.
    pub fn optimized(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| !s.skipped)
    }

    pub fn first_relative(&self) -> Option<f64> {
        self.optimized().next().and_then(Segment::relative)
    }

    pub fn final_relative(&self) -> Option<f64> {
        self.optimized().last().and_then(Segment::relative)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SEQUENTIAL_HEADER).map_err(csv_err)?;
        for row in &self.rows {
            let p = &row.params;
            w.write_record([
                row.pass.to_string(),
                row.visit.to_string(),
                row.pair_id.clone(),
                row.iteration.to_string(),
                row.score.to_string(),
                row.relative.map(fmt_num).unwrap_or_default(),
                u8::from(row.boundary).to_string(),
                fmt_num(row.steps.angle.to_degrees()),
                fmt_num(row.steps.trans),
                fmt_num(p.pitch.to_degrees()),
                fmt_num(p.yaw.to_degrees()),
                fmt_num(p.roll.to_degrees()),
                fmt_num(p.tx),
                fmt_num(p.ty),
                fmt_num(p.tz),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<sequential>", e))
    }
}

pub const SEQUENTIAL_HEADER: [&str; 15] = [
    "pass",
    "visit",
    "pair",
    "iteration",
    "score",
    "relative_score",
    "boundary",
    "step_deg",
    "step_mm",
    "pitch_deg",
    "yaw_deg",
    "roll_deg",
    "tx_mm",
    "ty_mm",
    "tz_mm",
];

/// Optimizes over `pairs` one after another in seeded random order, each
/// pair warm-started from the best estimate of the previous one with fresh
/// step sizes.
pub fn sequential_calibrate(
    pairs: &PairSet,
    template: &StereoRig,
    initial: &ExtrinsicParams,
    cfg: &SequentialConfig,
    match_cfg: &MatchConfig,
) -> Result<SequentialTrace> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "sequential calibration needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    if cfg.passes == 0 || cfg.per_pair_iterations == 0 {
        return Err(Error::InvalidArgument(
            "passes and per-pair iterations must be positive".into(),
        ));
    }
    // Step minima are disabled so every pair gets the full iteration budget.
    let compass = CompassConfig {
        max_iterations: cfg.per_pair_iterations,
        min_step_angle: f64::MIN_POSITIVE,
        min_step_trans: f64::MIN_POSITIVE,
        ..cfg.compass
    };
    compass.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = *initial;
    let mut out = SequentialTrace {
        seed: cfg.seed,
        order: Vec::new(),
        rows: Vec::new(),
        segments: Vec::new(),
        result: current,
    };
    let mut start_scores: Vec<Score> = Vec::new();

    for pass in 0..cfg.passes {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut rng);
        for (visit, &index) in order.iter().enumerate() {
            let pair = pairs.get(index).expect("index from range");
            let sc = scorer(pair, template, match_cfg)?;
            let reference = pair
                .reference
                .map(|r| sc.score(&r.extrinsics))
                .transpose()?;
            let relative = |s: Score| reference.and_then(|r| score_ratio(s, r).ok());

            let start_score = sc.score(&current)?;
            if let Some(fraction) = cfg.suitability {
                if let Some(m) = median(&start_scores) {
                    if (start_score as f64) < fraction * m {
                        out.segments.push(Segment {
                            pass,
                            pair_index: index,
                            pair_id: pair.id.clone(),
                            start: current,
                            best: current,
                            start_score,
                            best_score: start_score,
                            reference_score: reference,
                            skipped: true,
                        });
                        continue;
                    }
                }
            }
            start_scores.push(start_score);

            let (best, trace) = compass_search(|e| sc.score(e), &current, &compass)?;
            for (k, row) in trace.rows.iter().enumerate() {
                out.rows.push(SequentialRow {
                    pass,
                    visit,
                    pair_id: pair.id.clone(),
                    iteration: row.iteration,
                    params: row.params,
                    score: row.score,
                    relative: relative(row.score),
                    steps: row.steps,
                    boundary: k == 0,
                });
            }
            out.segments.push(Segment {
                pass,
                pair_index: index,
                pair_id: pair.id.clone(),
                start: current,
                best,
                start_score,
                best_score: trace.best_score,
                reference_score: reference,
                skipped: false,
            });
            current = best;
        }
        out.order.push(order);
    }
    out.result = current;
    Ok(out)
}

fn median(values: &[Score]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0
    })
}

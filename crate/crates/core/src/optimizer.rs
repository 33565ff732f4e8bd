//! Derivative-free maximization over the extrinsic parameters.
//!
//! [`compass_search`] probes every free axis in both directions, moves to the
//! best probe when it strictly beats the current point and otherwise shrinks
//! all steps together. [`gradient_ascent`] is a finite-difference baseline
//! with the same trace format and stopping rules.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Axis, ExtrinsicParams};
use crate::matcher::Score;

/// Which of (pitch, yaw, roll, tx, ty, tz) are optimized.
pub type FreeMask = [bool; 6];

/// Everything but the baseline component tx.
pub const FROZEN_BASELINE: FreeMask = [true, true, true, false, true, true];

pub const TRACE_HEADER: [&str; 10] = [
    "iteration",
    "score",
    "step_deg",
    "step_mm",
    "pitch_deg",
    "yaw_deg",
    "roll_deg",
    "tx_mm",
    "ty_mm",
    "tz_mm",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompassConfig {
    /// Radians.
    pub initial_step_angle: f64,
    /// Millimetres.
    pub initial_step_trans: f64,
    pub shrink_factor: f64,
    pub min_step_angle: f64,
    pub min_step_trans: f64,
    pub max_iterations: usize,
    pub free_mask: FreeMask,
}

impl Default for CompassConfig {
    fn default() -> Self {
        Self {
            initial_step_angle: 0.5f64.to_radians(),
            initial_step_trans: 4.0,
            shrink_factor: 0.5,
            min_step_angle: 0.01f64.to_radians(),
            min_step_trans: 0.05,
            max_iterations: 200,
            free_mask: FROZEN_BASELINE,
        }
    }
}

impl CompassConfig {
    pub fn validate(&self) -> Result<()> {
        validate_schedule(
            Steps::new(self.initial_step_angle, self.initial_step_trans),
            Steps::new(self.min_step_angle, self.min_step_trans),
            self.shrink_factor,
            &self.free_mask,
        )
    }

    fn initial_steps(&self) -> Steps {
        Steps::new(self.initial_step_angle, self.initial_step_trans)
    }

    fn min_steps(&self) -> Steps {
        Steps::new(self.min_step_angle, self.min_step_trans)
    }
}

fn validate_schedule(initial: Steps, min: Steps, shrink: f64, mask: &FreeMask) -> Result<()> {
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "shrink factor {shrink} outside (0, 1)"
        )));
    }
    if !mask.iter().any(|f| *f) {
        return Err(Error::InvalidArgument("no free parameters".into()));
    }
    let angles = mask[..3].iter().any(|f| *f);
    let trans = mask[3..].iter().any(|f| *f);
    let ok = |init: f64, min: f64| min > 0.0 && init.is_finite() && min < init;
    if angles && !ok(initial.angle, min.angle) {
        return Err(Error::InvalidArgument(format!(
            "angle steps need 0 < min ({}) < initial ({})",
            min.angle, initial.angle
        )));
    }
    if trans && !ok(initial.trans, min.trans) {
        return Err(Error::InvalidArgument(format!(
            "translation steps need 0 < min ({}) < initial ({})",
            min.trans, initial.trans
        )));
    }
    Ok(())
}

/// Step sizes shared by all angular and all translational axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Steps {
    /// Radians.
    pub angle: f64,
    /// Millimetres.
    pub trans: f64,
}

impl Steps {
    pub fn new(angle: f64, trans: f64) -> Self {
        Self { angle, trans }
    }

    pub fn for_axis(&self, axis: Axis) -> f64 {
        if axis.is_angle() {
            self.angle
        } else {
            self.trans
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        Self::new(self.angle * factor, self.trans * factor)
    }

    /// True once every free axis is below its minimum.
    fn below(&self, min: &Steps, mask: &FreeMask) -> bool {
        Axis::ALL
            .iter()
            .filter(|a| mask[**a as usize])
            .all(|a| self.for_axis(*a) < min.for_axis(*a))
    }
}

/// State after one iteration; row 0 is the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub params: ExtrinsicParams,
    pub score: Score,
    pub steps: Steps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StepsBelowMinimum,
    MaxIterations,
    /// Still running, or aborted by an error.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationTrace {
    pub rows: Vec<TraceRow>,
    pub best: ExtrinsicParams,
    pub best_score: Score,
    /// Distinct score evaluations.
    pub evaluations: usize,
    pub stop: StopReason,
}

impl Default for OptimizationTrace {
    fn default() -> Self {
        Self {
            rows: Vec::new(),
            best: ExtrinsicParams::default(),
            best_score: 0,
            evaluations: 0,
            stop: StopReason::Incomplete,
        }
    }
}

impl OptimizationTrace {
    fn push(&mut self, row: TraceRow) {
        if self.rows.is_empty() || row.score > self.best_score {
            self.best = row.params;
            self.best_score = row.score;
        }
        self.rows.push(row);
    }

    /// Number of completed iterations.
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let map = |e: csv::Error| Error::io("<trace>", std::io::Error::other(e));
        w.write_record(TRACE_HEADER).map_err(map)?;
        for row in &self.rows {
            w.write_record(trace_record(row)).map_err(map)?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))
    }
}

pub(crate) fn trace_record(row: &TraceRow) -> Vec<String> {
    let p = &row.params;
    vec![
        row.iteration.to_string(),
        row.score.to_string(),
        fmt_num(row.steps.angle.to_degrees()),
        fmt_num(row.steps.trans),
        fmt_num(p.pitch.to_degrees()),
        fmt_num(p.yaw.to_degrees()),
        fmt_num(p.roll.to_degrees()),
        fmt_num(p.tx),
        fmt_num(p.ty),
        fmt_num(p.tz),
    ]
}

/// Value rounded to 12 significant digits, printed without trailing noise.
pub(crate) fn fmt_num(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    format!("{rounded}")
}

/// Candidates `center +- step` along each free axis, in axis order with the
/// positive probe first. Frozen axes keep the center's exact value.
pub fn probe_points(
    center: &ExtrinsicParams,
    steps: &Steps,
    mask: &FreeMask,
) -> Vec<ExtrinsicParams> {
    let mut out = Vec::with_capacity(12);
    for axis in Axis::ALL {
        if !mask[axis as usize] {
            continue;
        }
        let v = center.get(axis);
        let s = steps.for_axis(axis);
        out.push(center.with(axis, v + s));
        out.push(center.with(axis, v - s));
    }
    out
}

/// Memoizing, parallel evaluation of a pure score function.
struct Evaluator<F> {
    f: F,
    cache: HashMap<[u64; 6], Score>,
}

impl<F> Evaluator<F>
where
    F: Fn(&ExtrinsicParams) -> Result<Score> + Sync,
{
    fn new(f: F) -> Self {
        Self {
            f,
            cache: HashMap::new(),
        }
    }

    fn key(p: &ExtrinsicParams) -> [u64; 6] {
        p.to_array().map(f64::to_bits)
    }

    /// Scores in input order; the first failing point (in input order) wins.
    fn eval_many(&mut self, points: &[ExtrinsicParams]) -> Result<Vec<Score>> {
        let missing: Vec<ExtrinsicParams> = {
            let mut seen = std::collections::HashSet::new();
            points
                .iter()
                .filter(|p| !self.cache.contains_key(&Self::key(p)) && seen.insert(Self::key(p)))
                .copied()
                .collect()
        };
        let f = &self.f;
        let results: Vec<Result<Score>> = missing.par_iter().map(f).collect();
        // `missing` keeps input order, so the first error is the earliest.
        let mut first_err = None;
        for (p, r) in missing.iter().zip(results) {
            match r {
                Ok(s) => {
                    self.cache.insert(Self::key(p), s);
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        if let Some(e) = first_err {
            return Err(e);
        }
        Ok(points.iter().map(|p| self.cache[&Self::key(p)]).collect())
    }

    fn eval(&mut self, p: &ExtrinsicParams) -> Result<Score> {
        Ok(self.eval_many(std::slice::from_ref(p))?[0])
    }

    fn evaluations(&self) -> usize {
        self.cache.len()
    }
}

fn abort(source: Error, mut trace: OptimizationTrace, evaluations: usize) -> Error {
    trace.evaluations = evaluations;
    trace.stop = StopReason::Incomplete;
    Error::Search {
        source: Box::new(source),
        trace: Box::new(trace),
    }
}

/// Compass search maximizing `score_fn` from `initial`.
///
/// Probes of one iteration may be evaluated concurrently; the chosen move is
/// the highest-scoring probe, ties going to the earliest in
/// [`probe_points`] order, so results do not depend on the thread count.
pub fn compass_search<F>(
    score_fn: F,
    initial: &ExtrinsicParams,
    cfg: &CompassConfig,
) -> Result<(ExtrinsicParams, OptimizationTrace)>
where
    F: Fn(&ExtrinsicParams) -> Result<Score> + Sync,
{
    cfg.validate()?;
    let mut eval = Evaluator::new(score_fn);
    let mut trace = OptimizationTrace::default();
    let mut center = *initial;
    let mut steps = cfg.initial_steps();
    let min = cfg.min_steps();

    let mut score = match eval.eval(&center) {
        Ok(s) => s,
        Err(e) => return Err(abort(e, trace, eval.evaluations())),
    };
    trace.push(TraceRow {
        iteration: 0,
        params: center,
        score,
        steps,
    });

    trace.stop = StopReason::MaxIterations;
    for iteration in 1..=cfg.max_iterations {
        let probes = probe_points(&center, &steps, &cfg.free_mask);
        let scores = match eval.eval_many(&probes) {
            Ok(s) => s,
            Err(e) => return Err(abort(e, trace, eval.evaluations())),
        };
        let (best_i, best) =
            scores.iter().enumerate().fold(
                (0, scores[0]),
                |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc },
            );
        if best > score {
            center = probes[best_i];
            score = best;
        } else {
            steps = steps.scaled(cfg.shrink_factor);
        }
        trace.push(TraceRow {
            iteration,
            params: center,
            score,
            steps,
        });
        if steps.below(&min, &cfg.free_mask) {
            trace.stop = StopReason::StepsBelowMinimum;
            break;
        }
    }
    trace.evaluations = eval.evaluations();
    Ok((trace.best, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientConfig {
    /// Half-width of the central difference on angular axes, radians.
    pub epsilon_angle: f64,
    /// Half-width of the central difference on translational axes, mm.
    pub epsilon_trans: f64,
    /// Largest update per axis at full learning rate, radians.
    pub initial_step_angle: f64,
    pub initial_step_trans: f64,
    pub shrink_factor: f64,
    pub min_step_angle: f64,
    pub min_step_trans: f64,
    pub max_iterations: usize,
    pub free_mask: FreeMask,
}

impl Default for GradientConfig {
    fn default() -> Self {
        let c = CompassConfig::default();
        Self {
            epsilon_angle: 0.1f64.to_radians(),
            epsilon_trans: 1.0,
            initial_step_angle: c.initial_step_angle,
            initial_step_trans: c.initial_step_trans,
            shrink_factor: c.shrink_factor,
            min_step_angle: c.min_step_angle,
            min_step_trans: c.min_step_trans,
            max_iterations: c.max_iterations,
            free_mask: c.free_mask,
        }
    }
}

impl GradientConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_angle > 0.0 && self.epsilon_trans > 0.0) {
            return Err(Error::InvalidArgument(
                "finite-difference epsilons must be positive".into(),
            ));
        }
        validate_schedule(
            Steps::new(self.initial_step_angle, self.initial_step_trans),
            Steps::new(self.min_step_angle, self.min_step_trans),
            self.shrink_factor,
            &self.free_mask,
        )
    }
}

/// Finite-difference gradient ascent from `initial`.
///
/// Each iteration estimates the gradient by central differences, then tries
/// one update whose largest per-axis component equals the current step. The
/// update is taken on strict improvement; otherwise the step shrinks.
pub fn gradient_ascent<F>(
    score_fn: F,
    initial: &ExtrinsicParams,
    cfg: &GradientConfig,
) -> Result<(ExtrinsicParams, OptimizationTrace)>
where
    F: Fn(&ExtrinsicParams) -> Result<Score> + Sync,
{
    cfg.validate()?;
    let mut eval = Evaluator::new(score_fn);
    let mut trace = OptimizationTrace::default();
    let mut center = *initial;
    let mut steps = Steps::new(cfg.initial_step_angle, cfg.initial_step_trans);
    let min = Steps::new(cfg.min_step_angle, cfg.min_step_trans);
    let eps = Steps::new(cfg.epsilon_angle, cfg.epsilon_trans);
    let free: Vec<Axis> = Axis::ALL
        .into_iter()
        .filter(|a| cfg.free_mask[*a as usize])
        .collect();

    let mut score = match eval.eval(&center) {
        Ok(s) => s,
        Err(e) => return Err(abort(e, trace, eval.evaluations())),
    };
    trace.push(TraceRow {
        iteration: 0,
        params: center,
        score,
        steps,
    });

    trace.stop = StopReason::MaxIterations;
    for iteration in 1..=cfg.max_iterations {
        let probes = probe_points(&center, &eps, &cfg.free_mask);
        let scores = match eval.eval_many(&probes) {
            Ok(s) => s,
            Err(e) => return Err(abort(e, trace, eval.evaluations())),
        };
        // Gradient in units of score per epsilon, one entry per free axis.
        let grad: Vec<f64> = scores
            .chunks(2)
            .map(|pair| (pair[0] as f64 - pair[1] as f64) / 2.0)
            .collect();
        let peak = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let mut moved = false;
        if peak > 0.0 {
            let mut candidate = center;
            for (axis, g) in free.iter().zip(&grad) {
                let delta = steps.for_axis(*axis) * g / peak;
                candidate = candidate.with(*axis, candidate.get(*axis) + delta);
            }
            let s = match eval.eval(&candidate) {
                Ok(s) => s,
                Err(e) => return Err(abort(e, trace, eval.evaluations())),
            };
            if s > score {
                center = candidate;
                score = s;
                moved = true;
            }
        }
        if !moved {
            steps = steps.scaled(cfg.shrink_factor);
        }
        trace.push(TraceRow {
            iteration,
            params: center,
            score,
            steps,
        });
        if steps.below(&min, &cfg.free_mask) {
            trace.stop = StopReason::StepsBelowMinimum;
            break;
        }
    }
    trace.evaluations = eval.evaluations();
    Ok((trace.best, trace))
}

/// Checks the search contract on a trace: non-decreasing best score, steps
/// changing only by `shrink` and only on non-improving iterations, and the
/// frozen axes unchanged. Returns a description of the first violation.
pub fn check_trace(
    trace: &OptimizationTrace,
    shrink: f64,
    mask: &FreeMask,
) -> std::result::Result<(), String> {
    let Some(first) = trace.rows.first() else {
        return Err("empty trace".into());
    };
    for pair in trace.rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.score < a.score {
            return Err(format!("score fell at iteration {}", b.iteration));
        }
        let improved = b.score > a.score;
        let expected = if improved {
            a.steps
        } else {
            a.steps.scaled(shrink)
        };
        if b.steps != expected {
            return Err(format!(
                "steps {:?} -> {:?} at iteration {} (improved: {improved})",
                a.steps, b.steps, b.iteration
            ));
        }
    }
    for row in &trace.rows {
        for axis in Axis::ALL {
            if !mask[axis as usize]
                && row.params.get(axis).to_bits() != first.params.get(axis).to_bits()
            {
                return Err(format!(
                    "frozen {} changed at iteration {}",
                    axis.name(),
                    row.iteration
                ));
            }
        }
    }
    let max = trace.rows.iter().map(|r| r.score).max().unwrap_or(0);
    if trace.best_score != max {
        return Err(format!(
            "best score {} is not the maximum {max}",
            trace.best_score
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PITCH_ONLY_TY: FreeMask = [true, false, false, false, true, false];

    /// Concave bowl with its peak at pitch = 0.02 rad, ty = 3 mm.
    fn bowl(p: &ExtrinsicParams) -> Result<Score> {
        let a = (p.pitch - 0.02) / 0.001;
        let b = p.ty - 3.0;
        let v = 1e12 - 1e6 * (a * a + b * b);
        Ok(v.max(0.0) as Score)
    }

    #[test]
    fn probe_counts_and_frozen_values() {
        let c = ExtrinsicParams::ideal(356.0);
        let steps = Steps::new(0.01, 2.0);
        let probes = probe_points(&c, &steps, &FROZEN_BASELINE);
        assert_eq!(probes.len(), 10);
        assert!(probes.iter().all(|p| p.tx.to_bits() == c.tx.to_bits()));
        assert_eq!(probes[0].pitch, 0.01);
        assert_eq!(probes[1].pitch, -0.01);
        assert_eq!(probes[9].tz, -2.0);
        let one = [false, false, false, false, true, false];
        assert_eq!(probe_points(&c, &steps, &one).len(), 2);
    }

    #[test]
    fn compass_finds_bowl_peak() {
        let cfg = CompassConfig {
            free_mask: PITCH_ONLY_TY,
            ..CompassConfig::default()
        };
        let start = ExtrinsicParams::ideal(356.0);
        let (best, trace) = compass_search(bowl, &start, &cfg).unwrap();
        assert!((best.pitch - 0.02).abs() <= 2.0 * cfg.min_step_angle);
        assert!((best.ty - 3.0).abs() <= 2.0 * cfg.min_step_trans);
        assert_eq!(trace.stop, StopReason::StepsBelowMinimum);
        check_trace(&trace, cfg.shrink_factor, &cfg.free_mask).unwrap();
    }

    #[test]
    fn flat_function_only_shrinks() {
        let cfg = CompassConfig::default();
        let start = ExtrinsicParams::from_degrees(0.1, 0.2, 0.3, -356.0, 1.0, 2.0);
        let (best, trace) = compass_search(|_| Ok(7), &start, &cfg).unwrap();
        assert_eq!(best, start);
        for (i, row) in trace.rows.iter().enumerate() {
            assert_eq!(row.params, start);
            assert_eq!(row.steps.trans, 4.0 * 0.5f64.powi(i as i32));
        }
        // 4 mm halves below 0.05 mm after 7 iterations.
        assert_eq!(trace.iterations(), 7);
        check_trace(&trace, 0.5, &cfg.free_mask).unwrap();
    }

    #[test]
    fn ties_go_to_earliest_probe() {
        // Symmetric in pitch: +pitch and -pitch tie, +pitch comes first.
        let f = |p: &ExtrinsicParams| Ok((1000.0 + 1e4 * p.pitch.abs()) as Score);
        let cfg = CompassConfig {
            free_mask: [true, false, false, false, false, false],
            max_iterations: 1,
            ..CompassConfig::default()
        };
        let (best, _) = compass_search(f, &ExtrinsicParams::ideal(1.0), &cfg).unwrap();
        assert!(best.pitch > 0.0);
    }

    #[test]
    fn max_iterations_stops() {
        let cfg = CompassConfig {
            max_iterations: 3,
            free_mask: PITCH_ONLY_TY,
            ..CompassConfig::default()
        };
        let (_, trace) = compass_search(bowl, &ExtrinsicParams::ideal(356.0), &cfg).unwrap();
        assert_eq!(trace.iterations(), 3);
        assert_eq!(trace.stop, StopReason::MaxIterations);
    }

    #[test]
    fn errors_carry_the_trace() {
        let f = |p: &ExtrinsicParams| {
            if p.pitch > 0.015 {
                Err(Error::NumericFailure("boom".into()))
            } else {
                bowl(p)
            }
        };
        let cfg = CompassConfig {
            free_mask: PITCH_ONLY_TY,
            ..CompassConfig::default()
        };
        let err = compass_search(f, &ExtrinsicParams::ideal(356.0), &cfg).unwrap_err();
        match err {
            Error::Search { source, trace } => {
                assert!(matches!(*source, Error::NumericFailure(_)));
                assert!(!trace.rows.is_empty());
                assert_eq!(trace.stop, StopReason::Incomplete);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            CompassConfig {
                shrink_factor: 1.0,
                ..CompassConfig::default()
            },
            CompassConfig {
                free_mask: [false; 6],
                ..CompassConfig::default()
            },
            CompassConfig {
                min_step_trans: 5.0,
                ..CompassConfig::default()
            },
        ];
        for cfg in bad {
            assert!(compass_search(bowl, &ExtrinsicParams::ideal(1.0), &cfg).is_err());
        }
    }

    #[test]
    fn gradient_finds_bowl_peak_and_ignores_flat() {
        let cfg = GradientConfig {
            free_mask: PITCH_ONLY_TY,
            ..GradientConfig::default()
        };
        let start = ExtrinsicParams::ideal(356.0);
        let (best, trace) = gradient_ascent(bowl, &start, &cfg).unwrap();
        assert!(
            (best.pitch - 0.02).abs() <= 4.0 * cfg.min_step_angle,
            "{best:?}"
        );
        assert!(
            (best.ty - 3.0).abs() <= 4.0 * cfg.min_step_trans,
            "{best:?}"
        );
        check_trace(&trace, cfg.shrink_factor, &cfg.free_mask).unwrap();

        let (flat, _) = gradient_ascent(|_| Ok(3), &start, &cfg).unwrap();
        assert_eq!(flat, start);
    }

    #[test]
    fn csv_has_fixed_header_and_degrees() {
        let cfg = CompassConfig {
            free_mask: PITCH_ONLY_TY,
            max_iterations: 2,
            ..CompassConfig::default()
        };
        let (_, trace) = compass_search(bowl, &ExtrinsicParams::ideal(356.0), &cfg).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "0,999591000000,0.5,4,0,0,0,-356,0,0");
        assert_eq!(text.lines().count(), 1 + trace.rows.len());
    }

    #[test]
    fn identical_across_thread_counts() {
        let cfg = CompassConfig {
            free_mask: PITCH_ONLY_TY,
            ..CompassConfig::default()
        };
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| compass_search(bowl, &ExtrinsicParams::ideal(356.0), &cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    proptest::proptest! {
        #[test]
        fn frozen_axes_bit_identical(tx in -500.0f64..-1.0, seed in 0u64..1000) {
            let start = ExtrinsicParams::new(0.001 * seed as f64, 0.0, 0.0, tx, 0.0, 0.0);
            let f = |p: &ExtrinsicParams| {
                let v = 1e9 - 1e9 * (p.pitch - 0.01).powi(2) - 1e3 * (p.tz + 2.0).powi(2) - 1e3 * p.tx.abs();
                Ok(v.max(0.0) as Score)
            };
            let cfg = CompassConfig { max_iterations: 40, ..CompassConfig::default() };
            let (best, trace) = compass_search(f, &start, &cfg).unwrap();
            proptest::prop_assert_eq!(best.tx.to_bits(), tx.to_bits());
            proptest::prop_assert!(check_trace(&trace, 0.5, &cfg.free_mask).is_ok());
        }
    }
}

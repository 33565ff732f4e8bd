//! Compare compass search with finite-difference gradient ascent on the same
//! decalibrated pair. The score is integer valued and piecewise flat, which
//! is hard on gradients.

use stereocal::geometry::ExtrinsicParams;
use stereocal::matcher::MatchConfig;
use stereocal::optimizer::{compass_search, gradient_ascent, CompassConfig, GradientConfig};
use stereocal::scorer::{format_ratio, score_ratio, StereoScorer};
use stereocal::synth::{decalibrate, default_rig, render_pair, Perturbation, SceneSpec};

fn main() -> stereocal::Result<()> {
    let truth = ExtrinsicParams::from_degrees(0.1, 0.2, -0.3, -356.0, 1.0, -1.0);
    let rig = default_rig(truth)?;
    let pair = render_pair(&SceneSpec::default().with_seed(5), &rig)?;
    let scorer = StereoScorer::new(&pair.left, &pair.right, &rig, &MatchConfig::default())?;
    let reference = scorer.score(&truth)?;

    let start = decalibrate(
        &truth,
        &Perturbation::from_degrees(1.5, -1.5, 1.0, 0.0, 6.0, -6.0),
    );
    let (_, compass) = compass_search(|e| scorer.score(e), &start, &CompassConfig::default())?;
    let (_, gradient) = gradient_ascent(|e| scorer.score(e), &start, &GradientConfig::default())?;

    for (name, trace) in [("compass", &compass), ("gradient", &gradient)] {
        println!(
            "{name:9} score {} ratio {} after {} iterations, {} evaluations",
            trace.best_score,
            format_ratio(score_ratio(trace.best_score, reference)?),
            trace.iterations(),
            trace.evaluations
        );
    }
    Ok(())
}

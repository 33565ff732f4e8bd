//! Optimize on one pair of a sequence and check that the result also scores
//! better on the other pairs taken through the same rig.

use stereocal::experiments::{generalization_check, improve_calibration, PairSet};
use stereocal::geometry::ExtrinsicParams;
use stereocal::matcher::MatchConfig;
use stereocal::optimizer::CompassConfig;
use stereocal::synth::{decalibrate, default_rig, render_sequence, Perturbation, SceneSpec};

fn main() -> stereocal::Result<()> {
    let truth = ExtrinsicParams::from_degrees(-0.2, 0.3, 0.1, -356.0, 2.0, 0.0);
    let rig = default_rig(truth)?;
    let all = render_sequence(&SceneSpec::default(), &rig, 5, 9)?;
    let pairs = PairSet::from_rendered("frame", &rig, all)?;

    let off = Perturbation::from_degrees(1.5, -1.0, 1.0, 0.0, 5.0, -5.0);
    let initial = rig.with_extrinsics(decalibrate(&truth, &off));
    let first = pairs.get(0).expect("five pairs");
    let cfg = MatchConfig::default();
    let result = improve_calibration(first, &initial, Some(&rig), &CompassConfig::default(), &cfg)?;
    println!(
        "optimized on {}: {} -> {}",
        first.id, result.record.n_i, result.record.n_o
    );

    let held_out = PairSet::new(pairs.iter().skip(1).cloned().collect())?;
    let report = generalization_check(&result.optimized, &initial, &held_out, &cfg)?;
    for row in &report.rows {
        println!(
            "{}: initial {} optimized {}",
            row.image_id, row.score_initial, row.score_optimized
        );
    }
    println!(
        "improved on {:.0}% of held-out pairs",
        100.0 * report.improved_fraction().unwrap_or(0.0)
    );
    Ok(())
}

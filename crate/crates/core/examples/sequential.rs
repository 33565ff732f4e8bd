//! Sequential calibration over a ten-pair sequence at half resolution,
//! starting from the ideal rig. Writes the trace CSV to stdout.

use stereocal::experiments::{sequential_calibrate, PairSet, SequentialConfig};
use stereocal::geometry::ExtrinsicParams;
use stereocal::matcher::MatchConfig;
use stereocal::synth::{render_sequence, scaled_rig, SceneSpec};

fn main() -> stereocal::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4u64);
    let truth = ExtrinsicParams::from_degrees(0.7, -0.5, 0.4, -356.0, 3.0, 2.0);
    let rig = scaled_rig(truth, 0.5)?;
    let spec = SceneSpec {
        max_disparity: 64,
        ..SceneSpec::default()
    };
    let pairs = PairSet::from_rendered("img", &rig, render_sequence(&spec, &rig, 10, seed)?)?;
    let matcher = MatchConfig {
        max_disparity: 64,
        ..MatchConfig::default()
    };
    let cfg = SequentialConfig {
        seed,
        ..SequentialConfig::default()
    };
    let trace = sequential_calibrate(&pairs, &rig, &ExtrinsicParams::ideal(356.0), &cfg, &matcher)?;
    for seg in &trace.segments {
        eprintln!(
            "{}: {} -> {} (relative {:.3})",
            seg.pair_id,
            seg.start_score,
            seg.best_score,
            seg.relative().unwrap_or(f64::NAN)
        );
    }
    trace.write_csv(std::io::stdout())?;
    Ok(())
}

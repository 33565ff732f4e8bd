//! Score several synthetic pairs under the true calibration and two wrong
//! ones. The true calibration should win on every pair.

use stereocal::experiments::{calibration_matrix, PairSet};
use stereocal::geometry::ExtrinsicParams;
use stereocal::matcher::MatchConfig;
use stereocal::synth::{default_rig, render_sequence, SceneSpec};

fn main() -> stereocal::Result<()> {
    let truth = ExtrinsicParams::from_degrees(0.3, 0.2, -0.1, -356.0, 1.0, 2.0);
    let rig = default_rig(truth)?;
    let pairs = PairSet::from_rendered(
        "pair",
        &rig,
        render_sequence(&SceneSpec::default(), &rig, 5, 42)?,
    )?;

    let mut yawed = truth;
    yawed.yaw += 2f64.to_radians();
    let mut shifted = truth;
    shifted.ty += 5.0;
    let calibrations = vec![
        ("truth".to_string(), rig),
        ("yaw+2deg".to_string(), rig.with_extrinsics(yawed)),
        ("ty+5mm".to_string(), rig.with_extrinsics(shifted)),
    ];

    let table = calibration_matrix(&pairs, &calibrations, &MatchConfig::default())?;
    table.write_csv(std::io::stdout())?;
    Ok(())
}

//! Perturb a known calibration by a random decalibration and recover it with
//! compass search. Prints the improvement record and writes the trace.

use stereocal::experiments::{improve_calibration, write_records, StereoPair};
use stereocal::geometry::ExtrinsicParams;
use stereocal::matcher::MatchConfig;
use stereocal::optimizer::CompassConfig;
use stereocal::synth::{
    decalibrate, default_rig, render_pair, sample_perturbation, Perturbation, SceneSpec,
};

fn main() -> stereocal::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1u64);
    let truth = ExtrinsicParams::from_degrees(0.2, -0.4, 0.3, -356.0, -2.0, 1.5);
    let rig = default_rig(truth)?;
    let rendered = render_pair(&SceneSpec::default().with_seed(seed), &rig)?;
    let pair = StereoPair::new("scene", rendered.left, rendered.right, Some(rig))?;

    let bounds = Perturbation::from_degrees(2.5, 2.5, 2.5, 0.0, 8.0, 8.0);
    let start = rig.with_extrinsics(decalibrate(&truth, &sample_perturbation(seed, &bounds)?));
    let result = improve_calibration(
        &pair,
        &start,
        Some(&rig),
        &CompassConfig::default(),
        &MatchConfig::default(),
    )?;

    let fmt = |e: &ExtrinsicParams| {
        format!(
            "pitch {:+.3} yaw {:+.3} roll {:+.3} deg, ty {:+.2} tz {:+.2} mm",
            e.pitch.to_degrees(),
            e.yaw.to_degrees(),
            e.roll.to_degrees(),
            e.ty,
            e.tz
        )
    };
    println!("truth     {}", fmt(&truth));
    println!("start     {}", fmt(&start.extrinsics));
    println!("optimized {}", fmt(&result.optimized.extrinsics));
    println!(
        "{} iterations, {} evaluations",
        result.trace.iterations(),
        result.trace.evaluations
    );
    write_records(&[result.record], std::io::stdout())?;
    Ok(())
}

//! Render a synthetic pair, rectify it under the true calibration and compare
//! the block matcher's output with the ground-truth disparity.

use stereocal::geometry::ExtrinsicParams;
use stereocal::matcher::{MatchConfig, SUBPIXEL_SCALE};
use stereocal::scorer::StereoScorer;
use stereocal::synth::{default_rig, render_pair, SceneSpec};

fn main() -> stereocal::Result<()> {
    let truth = ExtrinsicParams::from_degrees(0.4, -0.3, 0.2, -356.0, 3.0, -2.0);
    let rig = default_rig(truth)?;
    let pair = render_pair(&SceneSpec::default().with_seed(7), &rig)?;

    let cfg = MatchConfig::default();
    let scorer = StereoScorer::new(&pair.left, &pair.right, &rig, &cfg)?;
    let eval = scorer.evaluate(&truth)?;
    let d = &eval.disparity;

    let (mut both, mut close) = (0usize, 0usize);
    for y in 0..d.height() {
        for x in 0..d.width() {
            let (Some(m), Some(g)) = (d.get(x, y), pair.disparity.get(x, y)) else {
                continue;
            };
            both += 1;
            if (m - g).abs() <= 0.5 {
                close += 1;
            }
        }
    }
    println!("image size        {}x{}", d.width(), d.height());
    println!("valid disparities {}", eval.score());
    println!("with ground truth {both}");
    println!(
        "within 0.5 px     {close} ({:.1}%)",
        100.0 * close as f64 / both.max(1) as f64
    );
    println!("fixed-point scale 1/{SUBPIXEL_SCALE} px");
    Ok(())
}

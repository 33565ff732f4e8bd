//! Write a synthetic pair with its calibration and ground-truth disparity to
//! a directory, in the same layout as `stereocal synth`.

use std::path::PathBuf;

use stereocal::cli::CalibrationFile;
use stereocal::geometry::ExtrinsicParams;
use stereocal::image::save_pgm16;
use stereocal::synth::{default_rig, render_pair, SceneSpec};

fn main() -> stereocal::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "synthetic".into()),
    );
    std::fs::create_dir_all(&dir).map_err(|e| stereocal::Error::io(&dir, e))?;

    let rig = default_rig(ExtrinsicParams::from_degrees(
        0.5, -0.25, 0.1, -356.0, 2.0, 1.0,
    ))?;
    let pair = render_pair(&SceneSpec::default().with_seed(11), &rig)?;
    pair.left.save_pgm(&dir.join("left.pgm"))?;
    pair.right.save_pgm(&dir.join("right.pgm"))?;
    let gt = &pair.disparity;
    save_pgm16(
        &dir.join("gt_disparity.pgm"),
        gt.width(),
        gt.height(),
        gt.raw(),
    )?;
    CalibrationFile::from_rig(&rig, Some("synthetic example".into()))
        .save(&dir.join("calibration.toml"))?;
    println!("wrote {}", dir.display());
    Ok(())
}

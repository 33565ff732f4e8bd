//! Score-landscape properties on rendered scenes.

use stereocal::geometry::ExtrinsicParams;
use stereocal::image::Image;
use stereocal::matcher::MatchConfig;
use stereocal::scorer::StereoScorer;
use stereocal::synth::{
    decalibrate, default_rig, render_pair, sample_perturbation, Perturbation, SceneSpec,
};

fn truth() -> ExtrinsicParams {
    ExtrinsicParams::from_degrees(0.35, -0.25, 0.15, -356.0, 1.5, -2.0)
}

/// Perturbations from the realistic envelope whose largest angular offset
/// reaches `min_deg` or largest translational offset reaches `min_mm`.
fn perturbations(first_seed: u64, count: usize, min_deg: f64, min_mm: f64) -> Vec<Perturbation> {
    let envelope = Perturbation::from_degrees(2.5, 2.5, 2.5, 0.0, 8.0, 8.0);
    (first_seed..)
        .map(|s| sample_perturbation(s, &envelope).unwrap())
        .filter(|p| {
            let a = p.to_array();
            let deg = a[..3]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs().to_degrees()));
            let mm = a[3..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            deg >= min_deg || mm >= min_mm
        })
        .take(count)
        .collect()
}

fn beats_all(seed: u64, perturbs: &[Perturbation]) {
    let rig = default_rig(truth()).unwrap();
    let pair = render_pair(&SceneSpec::default().with_seed(seed), &rig).unwrap();
    let scorer = StereoScorer::new(&pair.left, &pair.right, &rig, &MatchConfig::default()).unwrap();
    let best = scorer.score(&truth()).unwrap();
    for p in perturbs {
        let s = scorer.score(&decalibrate(&truth(), p)).unwrap();
        assert!(s < best, "scene {seed}: {p:?} scores {s} >= {best}");
    }
}

#[test]
fn truth_beats_large_perturbations() {
    beats_all(1, &perturbations(100, 20, 1.0, 5.0));
}

#[test]
fn truth_beats_moderate_perturbations() {
    beats_all(2, &perturbations(200, 20, 0.5, 3.0));
}

#[test]
fn truth_ranks_first_on_every_scene() {
    let perturbs = perturbations(300, 6, 1.0, 5.0);
    for seed in [11, 12, 13] {
        beats_all(seed, &perturbs);
    }
}

#[test]
fn yaw_offset_lowers_score() {
    let rig = default_rig(truth()).unwrap();
    let pair = render_pair(&SceneSpec::default().with_seed(4), &rig).unwrap();
    let scorer = StereoScorer::new(&pair.left, &pair.right, &rig, &MatchConfig::default()).unwrap();
    let mut yawed = truth();
    yawed.yaw += 2f64.to_radians();
    let at_truth = scorer.score(&truth()).unwrap();
    assert!(scorer.score(&yawed).unwrap() < at_truth);
    assert_eq!(scorer.score(&truth()).unwrap(), at_truth);
}

#[test]
fn constant_images_score_zero_everywhere() {
    let rig = default_rig(truth()).unwrap();
    let gray = Image::filled(rig.width, rig.height, 100);
    let scorer = StereoScorer::new(&gray, &gray, &rig, &MatchConfig::default()).unwrap();
    for p in perturbations(400, 3, 0.0, 0.0) {
        assert_eq!(scorer.score(&decalibrate(&truth(), &p)).unwrap(), 0);
    }
}

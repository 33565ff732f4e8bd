//! Acceptance suite. Runs every criterion at its fixed tolerance, prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::path::Path;
use std::time::Instant;

use clap::Parser;
use nalgebra::{Point2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stereocal::cli::{execute, Cli};
use stereocal::experiments::{
    calibration_matrix, ex_nihilo, improve_calibration, sequential_calibrate, PairSet,
    SequentialConfig, StereoPair,
};
use stereocal::geometry::{project, ExtrinsicParams, Intrinsics, StereoRig};
use stereocal::image::Image;
use stereocal::matcher::{
    compute_disparity, count_valid, MatchConfig, INVALID_DISPARITY, SUBPIXEL_SCALE,
};
use stereocal::optimizer::{
    check_trace, compass_search, CompassConfig, OptimizationTrace, FROZEN_BASELINE,
};
use stereocal::rectification::{compute_rectification, Side};
use stereocal::scorer::{format_ratio, score_ratio, StereoScorer};
use stereocal::synth::{
    decalibrate, default_rig, render_pair, render_sequence, sample_perturbation, scaled_rig,
    Perturbation, SceneSpec, DEFAULT_BASELINE_MM,
};

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
            details: Vec::new(),
        }
    }

    fn with_details(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }
}

fn deg(e: &ExtrinsicParams) -> String {
    format!(
        "({:+.3}, {:+.3}, {:+.3}) deg ({:+.2}, {:+.2}, {:+.2}) mm",
        e.pitch.to_degrees(),
        e.yaw.to_degrees(),
        e.roll.to_degrees(),
        e.tx,
        e.ty,
        e.tz
    )
}

fn ratio_arithmetic() -> Outcome {
    let rows = [
        (41033, 90639, "0.453"),
        (90646, 90639, "1.000"),
        (19311, 174877, "0.110"),
    ];
    let mut details = Vec::new();
    let mut ok = 0;
    for (n_o, n_gt, want) in rows {
        let got = format_ratio(score_ratio(n_o, n_gt).unwrap());
        if got == want {
            ok += 1;
        }
        details.push(format!("{n_o} / {n_gt} -> {got} (want {want})"));
    }
    Outcome::new(ok == rows.len(), format!("{ok}/{} rows exact", rows.len())).with_details(details)
}

fn landscape_truth() -> ExtrinsicParams {
    ExtrinsicParams::from_degrees(0.4, -0.3, 0.25, -DEFAULT_BASELINE_MM, 2.0, -1.5)
}

fn score_landscape() -> Outcome {
    let truth = landscape_truth();
    let rig = default_rig(truth).unwrap();
    let pairs = PairSet::from_rendered(
        "pair",
        &rig,
        render_sequence(&SceneSpec::default(), &rig, 5, 2024).unwrap(),
    )
    .unwrap();
    let mut yawed = truth;
    yawed.yaw += 2f64.to_radians();
    let mut shifted = truth;
    shifted.ty += 5.0;
    let calibrations = vec![
        ("true".to_string(), rig),
        ("yaw+2deg".to_string(), rig.with_extrinsics(yawed)),
        ("ty+5mm".to_string(), rig.with_extrinsics(shifted)),
    ];
    let table = calibration_matrix(&pairs, &calibrations, &MatchConfig::default()).unwrap();
    let argmax = table.argmax();
    let wins = argmax.iter().filter(|&&c| c == 0).count();
    let details = table
        .pair_ids
        .iter()
        .zip(&table.scores)
        .map(|(id, row)| format!("{id}: {row:?}"))
        .collect();
    Outcome::new(
        wins == 5,
        format!("true calibration is argmax on {wins}/5 pairs"),
    )
    .with_details(details)
}

fn recovery(traces: &mut Vec<OptimizationTrace>) -> Outcome {
    let truth = landscape_truth();
    let rig = default_rig(truth).unwrap();
    let envelope = Perturbation::from_degrees(2.5, 2.5, 2.5, 0.0, 8.0, 8.0);
    let mut details = Vec::new();
    let mut ok = 0;
    for trial in 1..=20u64 {
        let rendered = render_pair(&SceneSpec::default().with_seed(trial), &rig).unwrap();
        let pair = StereoPair::new(
            format!("trial{trial}"),
            rendered.left,
            rendered.right,
            Some(rig),
        )
        .unwrap();
        let start = rig.with_extrinsics(decalibrate(
            &truth,
            &sample_perturbation(trial, &envelope).unwrap(),
        ));
        let result = improve_calibration(
            &pair,
            &start,
            Some(&rig),
            &CompassConfig::default(),
            &MatchConfig::default(),
        )
        .unwrap();
        let r = result.record.r.unwrap();
        if r >= 0.95 {
            ok += 1;
        }
        details.push(format!(
            "trial {trial:2}: r = {r:.4}  N_i {} N_o {} N_GT {}  start {}  end {}",
            result.record.n_i,
            result.record.n_o,
            result.record.n_gt.unwrap(),
            deg(&start.extrinsics),
            deg(&result.optimized.extrinsics)
        ));
        traces.push(result.trace);
    }
    Outcome::new(ok >= 18, format!("r >= 0.95 in {ok}/20 trials (need 18)")).with_details(details)
}

fn ex_nihilo_convergence(traces: &mut Vec<OptimizationTrace>) -> Outcome {
    let envelope = Perturbation::from_degrees(1.0, 1.0, 1.0, 0.0, 5.0, 5.0);
    let mut details = Vec::new();
    let mut ok = 0;
    for trial in 1..=10u64 {
        let truth = decalibrate(
            &ExtrinsicParams::ideal(DEFAULT_BASELINE_MM),
            &sample_perturbation(500 + trial, &envelope).unwrap(),
        );
        let rig = default_rig(truth).unwrap();
        let rendered = render_pair(&SceneSpec::default().with_seed(100 + trial), &rig).unwrap();
        let pair = StereoPair::new(
            format!("trial{trial}"),
            rendered.left,
            rendered.right,
            Some(rig),
        )
        .unwrap();
        let result = ex_nihilo(
            &pair,
            &rig,
            DEFAULT_BASELINE_MM,
            &CompassConfig::default(),
            &MatchConfig::default(),
        )
        .unwrap();
        let r = result.record.r.unwrap();
        if r >= 0.9 {
            ok += 1;
        }
        details.push(format!(
            "trial {trial:2}: r = {r:.4}  truth {}  end {}",
            deg(&truth),
            deg(&result.optimized.extrinsics)
        ));
        traces.push(result.trace);
    }
    Outcome::new(ok >= 8, format!("r >= 0.9 in {ok}/10 trials (need 8)")).with_details(details)
}

fn trace_contract(traces: &[OptimizationTrace]) -> Outcome {
    let failures: Vec<String> = traces
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            check_trace(t, 0.5, &FROZEN_BASELINE)
                .err()
                .map(|e| format!("trace {i}: {e}"))
        })
        .collect();
    let ok = traces.len() == 30 && failures.is_empty();
    Outcome::new(
        ok,
        format!(
            "{}/{} traces satisfy the contract",
            traces.len() - failures.len(),
            traces.len()
        ),
    )
    .with_details(failures)
}

fn sequential_improvement() -> Outcome {
    let envelope = Perturbation::from_degrees(1.0, 1.0, 1.0, 0.0, 5.0, 5.0);
    let spec = SceneSpec {
        max_disparity: 64,
        ..SceneSpec::default()
    };
    let matcher = MatchConfig {
        max_disparity: 64,
        ..MatchConfig::default()
    };
    let mut details = Vec::new();
    let mut ok = 0;
    for seed in 0..10u64 {
        let truth = decalibrate(
            &ExtrinsicParams::ideal(DEFAULT_BASELINE_MM),
            &sample_perturbation(1000 + seed, &envelope).unwrap(),
        );
        let rig = scaled_rig(truth, 0.5).unwrap();
        let pairs =
            PairSet::from_rendered("p", &rig, render_sequence(&spec, &rig, 10, seed).unwrap())
                .unwrap();
        let cfg = SequentialConfig {
            seed,
            per_pair_iterations: 50,
            ..SequentialConfig::default()
        };
        let trace = sequential_calibrate(
            &pairs,
            &rig,
            &ExtrinsicParams::ideal(DEFAULT_BASELINE_MM),
            &cfg,
            &matcher,
        )
        .unwrap();
        let (first, last) = (
            trace.first_relative().unwrap(),
            trace.final_relative().unwrap(),
        );
        if last >= first {
            ok += 1;
        }
        let per_pair: Vec<String> = trace
            .segments
            .iter()
            .map(|s| format!("{:.3}", s.relative().unwrap()))
            .collect();
        details.push(format!(
            "seed {seed}: first {first:.4} final {last:.4}  per pair [{}]",
            per_pair.join(" ")
        ));
    }
    Outcome::new(
        ok >= 8,
        format!("final >= first-pair relative score in {ok}/10 seeds (need 8)"),
    )
    .with_details(details)
}

fn noise_image(w: usize, h: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = (0..w * h).map(|_| rng.random::<u8>()).collect();
    Image::new(w, h, pixels).unwrap()
}

fn matcher_oracle() -> Outcome {
    let cfg = MatchConfig::default();
    let (w, h) = (640, 480);
    let left = noise_image(w, h, 7);
    let fill = noise_image(w, h, 8);
    let right = Image::from_fn(w, h, |x, y| {
        if x + 7 < w {
            left.get(x + 7, y)
        } else {
            fill.get(x, y)
        }
    });

    let shifted = compute_disparity(&left, &right, &cfg).unwrap();
    let r = cfg.block_radius;
    let (mut interior, mut exact) = (0usize, 0usize);
    for y in r..h - r {
        for x in r + 7..w - r - 7 {
            let v = shifted.raw_at(x, y);
            if v != INVALID_DISPARITY {
                interior += 1;
                if v == 7 * SUBPIXEL_SCALE {
                    exact += 1;
                }
            }
        }
    }
    let frac = exact as f64 / interior.max(1) as f64;

    let same = compute_disparity(&left, &left, &cfg).unwrap();
    let same_valid = count_valid(&same);
    let same_zero = same.raw().iter().all(|&v| v == INVALID_DISPARITY || v == 0);

    let gray = Image::filled(w, h, 128);
    let flat = count_valid(&compute_disparity(&gray, &gray, &cfg).unwrap());

    let pass = frac >= 0.95 && interior > 0 && same_valid > 0 && same_zero && flat == 0;
    Outcome::new(
        pass,
        format!(
            "shift 7: {:.2}% of {interior} interior valid pixels exact; identical: {same_valid} valid, all zero = {same_zero}; constant: {flat} valid",
            100.0 * frac
        ),
    )
}

fn row_alignment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let base = default_rig(ExtrinsicParams::ideal(DEFAULT_BASELINE_MM)).unwrap();
    let (mut worst, mut points) = (0.0f64, 0usize);
    for _ in 0..50 {
        let mut angle = || rng.random_range(-3.0f64..=3.0);
        let (pitch, yaw, roll) = (angle(), angle(), angle());
        let ext = ExtrinsicParams::from_degrees(
            pitch,
            yaw,
            roll,
            -DEFAULT_BASELINE_MM + rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
        );
        let rig = base.with_extrinsics(ext);
        let maps = compute_rectification(&rig).unwrap();
        let rot = ext.rotation().unwrap();
        let mut n = 0;
        while n < 1000 {
            let z = rng.random_range(1000.0..20000.0);
            let x = rng.random_range(-0.6..0.6) * z;
            let y = rng.random_range(-0.45..0.45) * z;
            let p = Vector3::new(x, y, z);
            let q = rot.apply(&p) + ext.translation();
            let (Ok(pl), Ok(pr)) = (project(&p, &rig.left), project(&q, &rig.right)) else {
                continue;
            };
            if !in_view(pl, &rig) || !in_view(pr, &rig) {
                continue;
            }
            let a = maps.rectify_point(Side::Left, pl).unwrap();
            let b = maps.rectify_point(Side::Right, pr).unwrap();
            worst = worst.max((a.y - b.y).abs());
            n += 1;
        }
        points += n;
    }
    Outcome::new(
        worst <= 0.1,
        format!("max |row difference| {worst:.2e} px over {points} points in 50 rigs"),
    )
}

fn in_view(p: Point2<f64>, rig: &StereoRig) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x <= (rig.width - 1) as f64 && p.y <= (rig.height - 1) as f64
}

fn monotone_degradation() -> Outcome {
    let intr = Intrinsics::pinhole(420.0, 420.0, 319.5, 239.5);
    let rig = StereoRig::new(
        intr,
        intr,
        ExtrinsicParams::ideal(DEFAULT_BASELINE_MM),
        640,
        480,
    )
    .unwrap();
    let cfg = MatchConfig::default();
    let mut pass = true;
    let mut details = Vec::new();
    for seed in [1u64, 2, 3] {
        let pair = render_pair(&SceneSpec::default().with_seed(seed), &rig).unwrap();
        let counts: Vec<u64> = [0usize, 1, 2, 4]
            .iter()
            .map(|&k| {
                let right = Image::from_fn(640, 480, |x, y| pair.right.get(x, y.saturating_sub(k)));
                count_valid(&compute_disparity(&pair.left, &right, &cfg).unwrap())
            })
            .collect();
        let ok = counts[0] > 0 && counts.windows(2).all(|w| w[1] <= w[0]);
        pass &= ok;
        details.push(format!("scene {seed}: k = 0,1,2,4 -> {counts:?}"));
    }
    Outcome::new(pass, "valid counts positive and non-increasing on 3 scenes").with_details(details)
}

/// Runs a `stereocal` command line in process, capturing its stdout.
fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let cli = Cli::try_parse_from(std::iter::once("stereocal").chain(args.iter().copied()))
        .expect("valid command line");
    let mut out = Vec::new();
    let code = match execute(&cli, &mut out) {
        Ok(()) => 0,
        Err(e) => e.exit_code(),
    };
    (code, out)
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let d = |name: &str| tmp.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let mut details = Vec::new();
    let mut pass = true;
    // Stdout may echo the output directory, which differs between the runs.
    let mut check = |name: &str, a: &Path, b: &Path, out_a: &[u8], out_b: &[u8]| {
        let strip = |out: &[u8], dir: &Path| {
            String::from_utf8_lossy(out).replace(dir.to_str().unwrap(), "<out>")
        };
        let same = dir_contents(a) == dir_contents(b) && strip(out_a, a) == strip(out_b, b);
        pass &= same;
        details.push(format!(
            "{name}: {}",
            if same { "identical" } else { "DIFFERENT" }
        ));
    };

    let synth = |out: &str, threads: &str| {
        run_cli(&[
            "--threads",
            threads,
            "synth",
            "--out",
            out,
            "--seed",
            "31",
            "--count",
            "3",
            "--scale",
            "0.5",
            "--max-disparity",
            "64",
            "--pitch-deg",
            "0.5",
            "--roll-deg",
            "-0.4",
            "--ty-mm",
            "3",
        ])
    };
    let (ca, oa) = synth(&s(&d("synth_a")), "1");
    let (cb, ob) = synth(&s(&d("synth_b")), "4");
    check("synth", &d("synth_a"), &d("synth_b"), &oa, &ob);

    let data = d("synth_a");
    let start = data.join("start.toml");
    let text = std::fs::read_to_string(data.join("calibration.toml")).unwrap();
    std::fs::write(&start, text.replace("pitch_deg = 0.5", "pitch_deg = 1.5")).unwrap();
    let calibrate = |out: &str, threads: &str| {
        run_cli(&[
            "--threads",
            threads,
            "calibrate",
            &s(&data.join("left_000.pgm")),
            &s(&data.join("right_000.pgm")),
            "--initial",
            &s(&start),
            "--max-disparity",
            "64",
            "--out",
            out,
        ])
    };
    let (cc, oc) = calibrate(&s(&d("cal_a")), "1");
    let (cd, od) = calibrate(&s(&d("cal_b")), "4");
    check("calibrate", &d("cal_a"), &d("cal_b"), &oc, &od);

    let sequential = |out: &str, threads: &str| {
        run_cli(&[
            "--threads",
            threads,
            "sequential",
            &s(&data.join("pairs.txt")),
            "--ex-nihilo",
            "--baseline-mm",
            "356",
            "--intrinsics",
            &s(&data.join("calibration.toml")),
            "--iterations",
            "8",
            "--seed",
            "3",
            "--max-disparity",
            "64",
            "--out",
            out,
        ])
    };
    let (ce, oe) = sequential(&s(&d("seq_a")), "1");
    let (cf, of) = sequential(&s(&d("seq_b")), "4");
    check("sequential", &d("seq_a"), &d("seq_b"), &oe, &of);

    let codes = [ca, cb, cc, cd, ce, cf];
    let all_ok = codes.iter().all(|&c| c == 0);
    details.push(format!("exit codes {codes:?}"));

    // Library level: the same search inside pools of different sizes.
    let rig = scaled_rig(landscape_truth(), 0.5).unwrap();
    let spec = SceneSpec {
        max_disparity: 64,
        ..SceneSpec::default()
    };
    let pair = render_pair(&spec.with_seed(4), &rig).unwrap();
    let matcher = MatchConfig {
        max_disparity: 64,
        ..MatchConfig::default()
    };
    let scorer = StereoScorer::new(&pair.left, &pair.right, &rig, &matcher).unwrap();
    let start = decalibrate(
        &landscape_truth(),
        &Perturbation::from_degrees(1.0, -1.0, 1.0, 0.0, 4.0, -4.0),
    );
    let search = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            compass_search(|e| scorer.score(e), &start, &CompassConfig::default())
                .unwrap()
                .1
        })
    };
    let lib_same = search(1) == search(4);
    details.push(format!(
        "compass trace, 1 vs 4 threads: {}",
        if lib_same { "identical" } else { "DIFFERENT" }
    ));

    Outcome::new(
        pass && all_ok && lib_same,
        "seeded CLI commands and searches are bit-reproducible",
    )
    .with_details(details)
}

fn main() {
    let mut traces = Vec::new();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut run = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "criterion {n:2} {:4} {name}: {} [{secs:.1} s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.summary
        );
        for line in &outcome.details {
            println!("    {line}");
        }
        results.push((n, name, outcome, secs));
    };

    run(1, "ratio arithmetic", &mut ratio_arithmetic);
    run(2, "score landscape", &mut score_landscape);
    run(3, "recovery from decalibration", &mut || {
        recovery(&mut traces)
    });
    run(4, "ex-nihilo convergence", &mut || {
        ex_nihilo_convergence(&mut traces)
    });
    run(5, "compass-search contract", &mut || {
        trace_contract(&traces)
    });
    run(6, "sequential improvement", &mut sequential_improvement);
    run(7, "matcher oracle", &mut matcher_oracle);
    run(8, "rectification row alignment", &mut row_alignment);
    run(9, "monotone degradation", &mut monotone_degradation);
    run(10, "determinism", &mut determinism);

    println!();
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.2.pass)
        .map(|r| format!("{} ({})", r.0, r.1))
        .collect();
    for (n, name, outcome, _) in &results {
        println!(
            "criterion {n:2}: {} {name}",
            if outcome.pass { "PASS" } else { "FAIL" }
        );
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!(
            "acceptance: {} failing: {}",
            failed.len(),
            failed.join(", ")
        );
        std::process::exit(1);
    }
}

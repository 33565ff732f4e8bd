//! Command-line front end and the on-disk calibration and manifest formats.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{
    ex_nihilo, improve_calibration, sequential_calibrate, PairSet, SequentialConfig, StereoPair,
};
use crate::geometry::{ExtrinsicParams, Intrinsics, StereoRig};
use crate::image::{save_pgm16, Image};
use crate::matcher::MatchConfig;
use crate::optimizer::{CompassConfig, FROZEN_BASELINE};
use crate::rectification::RectifiedIntrinsics;
use crate::scorer::{format_ratio, score_ratio, StereoScorer};
use crate::synth::{render_pair, render_sequence, scaled_rig, DepthModel, SceneSpec};

pub const CALIBRATION_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSize {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
    #[serde(default)]
    pub p1: f64,
    #[serde(default)]
    pub p2: f64,
    #[serde(default)]
    pub k3: f64,
}

impl From<Intrinsics> for CameraSection {
    fn from(i: Intrinsics) -> Self {
        Self {
            fx: i.fx,
            fy: i.fy,
            cx: i.cx,
            cy: i.cy,
            k1: i.k1,
            k2: i.k2,
            p1: i.p1,
            p2: i.p2,
            k3: i.k3,
        }
    }
}

impl From<CameraSection> for Intrinsics {
    fn from(c: CameraSection) -> Self {
        Intrinsics::pinhole(c.fx, c.fy, c.cx, c.cy).with_distortion(c.k1, c.k2, c.k3, c.p1, c.p2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrinsicsSection {
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub roll_deg: f64,
    pub tx_mm: f64,
    pub ty_mm: f64,
    pub tz_mm: f64,
}

/// Calibration as stored on disk: TOML, degrees and millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub image: ImageSize,
    pub left: CameraSection,
    pub right: CameraSection,
    pub extrinsics: ExtrinsicsSection,
}

/// Rounds to 12 significant digits.
fn sig12(v: f64) -> f64 {
    format!("{v:.11e}").parse().expect("formatted float parses")
}

impl CalibrationFile {
    /// Angles are rounded to 12 significant digits; everything else is kept
    /// bit-exact.
    pub fn from_rig(rig: &StereoRig, note: Option<String>) -> Self {
        let e = &rig.extrinsics;
        Self {
            version: CALIBRATION_VERSION,
            note,
            image: ImageSize {
                width: rig.width,
                height: rig.height,
            },
            left: rig.left.into(),
            right: rig.right.into(),
            extrinsics: ExtrinsicsSection {
                pitch_deg: sig12(e.pitch.to_degrees()),
                yaw_deg: sig12(e.yaw.to_degrees()),
                roll_deg: sig12(e.roll.to_degrees()),
                tx_mm: e.tx,
                ty_mm: e.ty,
                tz_mm: e.tz,
            },
        }
    }

    pub fn extrinsics(&self) -> ExtrinsicParams {
        let e = &self.extrinsics;
        ExtrinsicParams::from_degrees(
            e.pitch_deg,
            e.yaw_deg,
            e.roll_deg,
            e.tx_mm,
            e.ty_mm,
            e.tz_mm,
        )
    }

    pub fn to_rig(&self) -> Result<StereoRig> {
        StereoRig::new(
            self.left.into(),
            self.right.into(),
            self.extrinsics(),
            self.image.width,
            self.image.height,
        )
    }

    /// Parses a document; `origin` names it in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let file: Self =
            toml::from_str(text).map_err(|e| Error::format(origin, e.message().to_string()))?;
        if file.version != CALIBRATION_VERSION {
            return Err(Error::format(
                origin,
                format!("unsupported calibration version {}", file.version),
            ));
        }
        file.to_rig()
            .map_err(|e| Error::format(origin, e.to_string()))?;
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_rig(path: &Path) -> Result<StereoRig> {
    CalibrationFile::load(path)?.to_rig()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Written next to every command's outputs. Output paths are relative to
/// the output directory, so identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    fn new(command: &str, seed: Option<u64>, config: &impl Serialize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn add_inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
        for p in paths {
            self.inputs.push(FileDigest::of(p)?);
        }
        Ok(())
    }

    /// Digests `names` inside `dir` and writes `manifest.json` there.
    fn finish(mut self, dir: &Path, names: &[String]) -> Result<()> {
        for name in names {
            let mut d = FileDigest::of(&dir.join(name))?;
            d.path = name.clone();
            self.outputs.push(d);
        }
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stereocal",
    version,
    about = "Stereo extrinsic recalibration from valid-disparity counts"
)]
pub struct Cli {
    /// Worker threads for scoring and probe evaluation; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the stereo score of a pair under a calibration.
    Score(ScoreArgs),
    /// Optimize the extrinsics of a calibration on one pair.
    Calibrate(CalibrateArgs),
    /// Render a synthetic pair (or sequence) with ground truth.
    Synth(SynthArgs),
    /// Optimize sequentially over a list of pairs.
    Sequential(SequentialArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatchArgs {
    /// Half width of the square matching window.
    #[arg(long, default_value_t = 4)]
    pub block_radius: usize,
    #[arg(long, default_value_t = 128)]
    pub max_disparity: usize,
    #[arg(long, default_value_t = 1.15)]
    pub uniqueness: f64,
    /// Left/right consistency tolerance in pixels.
    #[arg(long, default_value_t = 1.0)]
    pub lr_threshold: f64,
    /// Minimum summed horizontal gradient per window [default: 10 per pixel].
    #[arg(long)]
    pub texture_threshold: Option<u32>,
}

impl MatchArgs {
    pub fn config(&self) -> MatchConfig {
        let side = 2 * self.block_radius as u32 + 1;
        MatchConfig {
            block_radius: self.block_radius,
            max_disparity: self.max_disparity,
            uniqueness_ratio: self.uniqueness,
            lr_threshold: self.lr_threshold,
            texture_threshold: self.texture_threshold.unwrap_or(10 * side * side),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StepArgs {
    #[arg(long, default_value_t = 0.5)]
    pub step_deg: f64,
    #[arg(long, default_value_t = 4.0)]
    pub step_mm: f64,
    #[arg(long, default_value_t = 0.5)]
    pub shrink: f64,
    #[arg(long, default_value_t = 0.01)]
    pub min_step_deg: f64,
    #[arg(long, default_value_t = 0.05)]
    pub min_step_mm: f64,
}

impl StepArgs {
    fn config(&self, max_iterations: usize) -> CompassConfig {
        CompassConfig {
            initial_step_angle: self.step_deg.to_radians(),
            initial_step_trans: self.step_mm,
            shrink_factor: self.shrink,
            min_step_angle: self.min_step_deg.to_radians(),
            min_step_trans: self.min_step_mm,
            max_iterations,
            free_mask: FROZEN_BASELINE,
        }
    }
}

/// Where an optimization starts.
#[derive(Debug, Clone, Args, Serialize)]
pub struct StartArgs {
    /// Calibration to start from.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Start from zero rotation and translation (-baseline, 0, 0).
    #[arg(long)]
    pub ex_nihilo: bool,
    /// Baseline length for --ex-nihilo.
    #[arg(long)]
    pub baseline_mm: Option<f64>,
    /// Camera intrinsics for --ex-nihilo; extrinsics in the file are ignored.
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
}

impl StartArgs {
    /// Starting rig and the files it was read from.
    fn resolve(&self) -> Result<(StereoRig, Vec<PathBuf>)> {
        match (&self.initial, self.ex_nihilo) {
            (Some(path), false) => {
                if self.baseline_mm.is_some() || self.intrinsics.is_some() {
                    return Err(Error::Usage(
                        "--baseline-mm and --intrinsics only apply to --ex-nihilo".into(),
                    ));
                }
                Ok((load_rig(path)?, vec![path.clone()]))
            }
            (None, true) => {
                let (Some(baseline), Some(path)) = (self.baseline_mm, &self.intrinsics) else {
                    return Err(Error::Usage(
                        "--ex-nihilo needs --baseline-mm and --intrinsics".into(),
                    ));
                };
                if !(baseline > 0.0 && baseline.is_finite()) {
                    return Err(Error::Usage(format!(
                        "baseline must be positive, got {baseline}"
                    )));
                }
                let rig = load_rig(path)?.with_extrinsics(ExtrinsicParams::ideal(baseline));
                Ok((rig, vec![path.clone()]))
            }
            _ => Err(Error::Usage(
                "give exactly one of --initial or --ex-nihilo".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    pub left: PathBuf,
    pub right: PathBuf,
    pub calibration: PathBuf,
    #[command(flatten)]
    pub matcher: MatchArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    pub left: PathBuf,
    pub right: PathBuf,
    #[command(flatten)]
    pub start: StartArgs,
    /// Reference calibration for the ratio of optimized to reference score.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[command(flatten)]
    pub steps: StepArgs,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
    #[command(flatten)]
    pub matcher: MatchArgs,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of pairs; more than one also writes `pairs.txt`.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Resolution relative to 640x480.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 356.0)]
    pub baseline_mm: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub pitch_deg: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub yaw_deg: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub roll_deg: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub ty_mm: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub tz_mm: f64,
    /// Single fronto-parallel plane at this depth.
    #[arg(long, conflicts_with = "plane_disparity")]
    pub plane_depth_mm: Option<f64>,
    /// Single fronto-parallel plane at this rectified disparity.
    #[arg(long)]
    pub plane_disparity: Option<f64>,
    #[arg(long, default_value_t = 1500.0)]
    pub depth_min_mm: f64,
    #[arg(long, default_value_t = 6000.0)]
    pub depth_max_mm: f64,
    #[arg(long, default_value_t = 2.0)]
    pub noise_sigma: f64,
    /// Weak, coarse texture.
    #[arg(long)]
    pub low_texture: bool,
    /// Largest ground-truth disparity the scene may produce.
    #[arg(long, default_value_t = 128)]
    pub max_disparity: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SequentialArgs {
    /// File with one `left right [reference]` line per pair; relative paths
    /// are resolved against the file's directory.
    pub pairs: PathBuf,
    #[command(flatten)]
    pub start: StartArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Compass iterations per pair.
    #[arg(long, default_value_t = 50)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1)]
    pub passes: usize,
    /// Skip pairs starting below this fraction of the running median score.
    #[arg(long)]
    pub suitability: Option<f64>,
    #[command(flatten)]
    pub steps: StepArgs,
    #[command(flatten)]
    pub matcher: MatchArgs,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("stereocal: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let dispatch = |out: &mut dyn Write| match &cli.command {
        Command::Score(a) => cmd_score(a, out),
        Command::Calibrate(a) => cmd_calibrate(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Sequential(a) => cmd_sequential(a, out),
    };
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Usage(e.to_string()))?;
            let mut buf = Vec::new();
            let result = pool.install(|| dispatch(&mut buf));
            out.write_all(&buf).map_err(|e| Error::io("<stdout>", e))?;
            result
        }
        None => dispatch(out),
    }
}

fn emit(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn load_pair(left: &Path, right: &Path) -> Result<(Image, Image)> {
    let l = Image::load(left)?;
    let r = Image::load(right)?;
    if !l.same_size(&r) {
        return Err(Error::DimensionMismatch(format!(
            "{} is {}x{}, {} is {}x{}",
            left.display(),
            l.width(),
            l.height(),
            right.display(),
            r.width(),
            r.height()
        )));
    }
    Ok((l, r))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_with(
    path: &Path,
    f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_score(args: &ScoreArgs, out: &mut dyn Write) -> Result<()> {
    let rig = load_rig(&args.calibration)?;
    let (left, right) = load_pair(&args.left, &args.right)?;
    let score =
        StereoScorer::new(&left, &right, &rig, &args.matcher.config())?.score(&rig.extrinsics)?;
    emit(out, format_args!("{score}"))
}

pub fn cmd_calibrate(args: &CalibrateArgs, out: &mut dyn Write) -> Result<()> {
    let (initial, mut inputs) = args.start.resolve()?;
    let reference = args.reference.as_deref().map(load_rig).transpose()?;
    let (left, right) = load_pair(&args.left, &args.right)?;
    let pair = StereoPair::new(args.left.display().to_string(), left, right, reference)?;
    let cfg = args.steps.config(args.max_iterations);
    let matcher = args.matcher.config();

    let result = if args.start.ex_nihilo {
        let baseline = -initial.extrinsics.tx;
        ex_nihilo(&pair, &initial, baseline, &cfg, &matcher)?
    } else {
        improve_calibration(&pair, &initial, reference.as_ref(), &cfg, &matcher)?
    };

    create_dir(&args.out)?;
    let note = format!(
        "optimized from score {} to {}",
        result.record.n_i, result.record.n_o
    );
    CalibrationFile::from_rig(&result.optimized, Some(note))
        .save(&args.out.join("calibration.toml"))?;
    write_with(&args.out.join("trace.csv"), |w| result.trace.write_csv(w))?;

    let mut manifest = RunManifest::new("calibrate", None, args);
    inputs.splice(0..0, [args.left.clone(), args.right.clone()]);
    inputs.extend(args.reference.clone());
    manifest.add_inputs(inputs.iter().map(PathBuf::as_path))?;
    manifest.finish(&args.out, &["calibration.toml".into(), "trace.csv".into()])?;

    let rec = &result.record;
    emit(out, format_args!("initial_score {}", rec.n_i))?;
    emit(out, format_args!("optimized_score {}", rec.n_o))?;
    if let Some(gt) = rec.n_gt {
        emit(out, format_args!("reference_score {gt}"))?;
    }
    if let Some(r) = rec.r {
        emit(out, format_args!("ratio {}", format_ratio(r)))?;
    }
    emit(
        out,
        format_args!("iterations {}", result.trace.iterations()),
    )
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    if args.count == 0 {
        return Err(Error::Usage("--count must be at least 1".into()));
    }
    let truth = ExtrinsicParams::from_degrees(
        args.pitch_deg,
        args.yaw_deg,
        args.roll_deg,
        -args.baseline_mm,
        args.ty_mm,
        args.tz_mm,
    );
    let rig = scaled_rig(truth, args.scale)?;
    let mut spec = if args.low_texture {
        SceneSpec::low_texture(args.seed)
    } else {
        SceneSpec::default().with_seed(args.seed)
    };
    spec.noise_sigma = args.noise_sigma;
    spec.max_disparity = args.max_disparity;
    spec.depth = match (args.plane_depth_mm, args.plane_disparity) {
        (Some(z), _) => DepthModel::Plane { depth_mm: z },
        (None, Some(d)) => {
            if !(d > 0.0) {
                return Err(Error::SceneOutOfRange(format!(
                    "plane disparity {d} must be positive"
                )));
            }
            let f = RectifiedIntrinsics::from_rig(&rig).fx;
            DepthModel::Plane {
                depth_mm: f * rig.baseline() / d,
            }
        }
        (None, None) => DepthModel::Mosaic {
            cols: 6,
            rows: 4,
            z_min_mm: args.depth_min_mm,
            z_max_mm: args.depth_max_mm,
        },
    };
    spec.validate()
        .map_err(|e| Error::SceneOutOfRange(e.to_string()))?;

    let pairs = if args.count == 1 {
        vec![render_pair(&spec, &rig)?]
    } else {
        render_sequence(&spec, &rig, args.count, args.seed)?
    };

    create_dir(&args.out)?;
    let mut names = vec!["calibration.toml".to_string()];
    let note = format!("synthetic ground truth, seed {}", args.seed);
    CalibrationFile::from_rig(&rig, Some(note)).save(&args.out.join("calibration.toml"))?;
    let mut list = String::new();
    for (i, pair) in pairs.iter().enumerate() {
        let suffix = if args.count == 1 {
            String::new()
        } else {
            format!("_{i:03}")
        };
        let (l, r, d) = (
            format!("left{suffix}.pgm"),
            format!("right{suffix}.pgm"),
            format!("gt_disparity{suffix}.pgm"),
        );
        pair.left.save_pgm(&args.out.join(&l))?;
        pair.right.save_pgm(&args.out.join(&r))?;
        let gt = &pair.disparity;
        save_pgm16(&args.out.join(&d), gt.width(), gt.height(), gt.raw())?;
        list.push_str(&format!("{l} {r} calibration.toml\n"));
        names.extend([l, r, d]);
    }
    if args.count > 1 {
        let path = args.out.join("pairs.txt");
        std::fs::write(&path, list).map_err(|e| Error::io(&path, e))?;
        names.push("pairs.txt".into());
    }
    RunManifest::new("synth", Some(args.seed), args).finish(&args.out, &names)?;
    emit(
        out,
        format_args!("wrote {} pair(s) to {}", pairs.len(), args.out.display()),
    )
}

/// Reads a pair list: one `left right [reference]` line per pair, `#`
/// comments and blank lines ignored. Returns the pairs and every file read.
pub fn load_pair_list(path: &Path) -> Result<(PairSet, Vec<PathBuf>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut pairs = Vec::new();
    let mut files = vec![path.to_path_buf()];
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::format(
                path,
                format!("line {}: expected `left right [reference]`", n + 1),
            ));
        }
        let resolve = |f: &str| base.join(f);
        let (l, r) = (resolve(fields[0]), resolve(fields[1]));
        let (left, right) = load_pair(&l, &r)?;
        let reference = match fields.get(2) {
            Some(f) => {
                let p = resolve(f);
                let rig = load_rig(&p)?;
                files.push(p);
                Some(rig)
            }
            None => None,
        };
        pairs.push(StereoPair::new(fields[0], left, right, reference)?);
        files.extend([l, r]);
    }
    Ok((PairSet::new(pairs)?, files))
}

pub fn cmd_sequential(args: &SequentialArgs, out: &mut dyn Write) -> Result<()> {
    let (template, mut inputs) = args.start.resolve()?;
    let (pairs, files) = load_pair_list(&args.pairs)?;
    if pairs.len() < 2 {
        return Err(Error::Usage(format!(
            "sequential calibration needs at least 2 pairs, {} has {}",
            args.pairs.display(),
            pairs.len()
        )));
    }
    let cfg = SequentialConfig {
        seed: args.seed,
        per_pair_iterations: args.iterations,
        compass: args.steps.config(args.iterations),
        passes: args.passes,
        suitability: args.suitability,
    };
    let trace = sequential_calibrate(
        &pairs,
        &template,
        &template.extrinsics,
        &cfg,
        &args.matcher.config(),
    )?;

    create_dir(&args.out)?;
    write_with(&args.out.join("trace.csv"), |w| trace.write_csv(w))?;
    let final_rig = template.with_extrinsics(trace.result);
    let note = format!("sequential over {} pairs, seed {}", pairs.len(), args.seed);
    CalibrationFile::from_rig(&final_rig, Some(note)).save(&args.out.join("calibration.toml"))?;
    let mut manifest = RunManifest::new("sequential", Some(args.seed), args);
    inputs.extend(files);
    manifest.add_inputs(inputs.iter().map(PathBuf::as_path))?;
    manifest.finish(&args.out, &["trace.csv".into(), "calibration.toml".into()])?;

    for seg in &trace.segments {
        let rel = seg
            .relative()
            .map(format_ratio)
            .unwrap_or_else(|| "-".into());
        let status = if seg.skipped { " skipped" } else { "" };
        emit(
            out,
            format_args!(
                "pass {} pair {} score {} -> {} relative {rel}{status}",
                seg.pass, seg.pair_id, seg.start_score, seg.best_score
            ),
        )?;
    }
    if let (Some(first), Some(last)) = (trace.first_relative(), trace.final_relative()) {
        emit(
            out,
            format_args!(
                "relative first {} final {}",
                format_ratio(first),
                format_ratio(last)
            ),
        )?;
    }
    Ok(())
}

/// Ratio of `n` to `reference`, formatted, or `-` when undefined.
pub fn ratio_text(n: u64, reference: u64) -> String {
    score_ratio(n, reference)
        .map(format_ratio)
        .unwrap_or_else(|_| "-".into())
}

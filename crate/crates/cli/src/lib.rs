//! The `linekit` command line.
//!
//! Exit status: 0 on success, 1 when a check fails (gradient or oracle
//! mismatch, or an evaluation with no ground truth), 2 on usage or I/O errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use linekit::augment::{self, AugmentSpec, OcclusionSpec};
use linekit::dataset::{self, Split};
use linekit::eval::{self, Detection, EvalConfig, GroundTruth};
use linekit::{golden, gradcheck, report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Gradient suite threshold on the maximum relative error.
pub const GRAD_TOLERANCE: f64 = 1e-5;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "LINEKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "linekit", version, about = "Detection loss, attention-block and dataset tooling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Shuffle a dataset's ids and write train/val/test lists
    Split(SplitArgs),
    /// Write an augmented copy of a dataset
    Augment(AugmentArgs),
    /// Run NMS and mAP evaluation, writing a JSON report
    Eval(EvalArgs),
    /// Verify box-loss gradients against central finite differences
    LossCheck(LossCheckArgs),
    /// Verify the attention and pyramid blocks against their reference paths
    ModuleCheck(ModuleCheckArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Dataset directory (images/*.ppm or labels/*.txt)
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    /// Directory for train.txt, val.txt and test.txt [default: the input directory]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Shuffle seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train, val and test fractions, summing to 1
    #[arg(long, default_value = "0.6,0.2,0.2", value_delimiter = ',', num_args = 3)]
    pub ratios: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Source dataset directory
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    /// Destination dataset directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Base seed; each sample and transform derives its own
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Clockwise rotation angles in degrees, comma separated, or "none"
    #[arg(long, default_value = "90,180,270")]
    pub rotations: String,
    /// Brightness factors, comma separated, or "none"
    #[arg(long, default_value = "0.6,1.4")]
    pub brightness: String,
    /// Salt-and-pepper density in [0, 1]; 0 disables
    #[arg(long, default_value_t = 0.02)]
    pub sp_density: f64,
    /// Occluders per image as N or MIN-MAX; 0 disables
    #[arg(long, default_value = "1-3")]
    pub occlusion_count: String,
    /// Occluder area range as fractions of the image, MIN,MAX
    #[arg(long, default_value = "0.01,0.05", value_delimiter = ',', num_args = 2)]
    pub occlusion_area: Vec<f64>,
    /// Largest fraction of a labelled box one occluder may cover
    #[arg(long, default_value_t = 0.5)]
    pub max_overlap: f64,
    /// File listing the ids to augment, one per line (e.g. a train.txt from `split`)
    #[arg(long, value_name = "FILE")]
    pub ids: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction files, `cls cx cy w h score` per line
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    /// Ground-truth labels, either the directory of .txt files or a dataset with labels/
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    /// Confidence threshold for precision and recall
    #[arg(long, default_value_t = eval::DEFAULT_CONF_THRESHOLD)]
    pub conf: f64,
    /// IoU above which same-class detections are suppressed
    #[arg(long = "nms-iou", default_value_t = eval::DEFAULT_NMS_IOU)]
    pub nms_iou: f64,
    /// Class names file, one per line [default: classes.txt beside the labels]
    #[arg(long, value_name = "FILE")]
    pub classes: Option<PathBuf>,
    /// Where to write the JSON report [default: stdout]
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossCheckArgs {
    /// Number of random box pairs
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Focal exponent to check; repeatable [default: 0, 0.5 and 1]
    #[arg(long)]
    pub gamma: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct ModuleCheckArgs {
    /// Seed for parameters and inputs; seed 0 is also compared to pinned checksums
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Split(a) => cmd_split(a),
        Command::Augment(a) => cmd_augment(a),
        Command::Eval(a) => cmd_eval(a),
        Command::LossCheck(a) => cmd_loss_check(a),
        Command::ModuleCheck(a) => cmd_module_check(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn require_dir(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_dir() {
        bail!("{what} directory {} does not exist", path.display());
    }
    Ok(())
}

fn write_id_list(path: &Path, ids: &[String]) -> anyhow::Result<()> {
    let mut text = ids.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_split(a: &SplitArgs) -> anyhow::Result<i32> {
    require_dir(&a.input, "input")?;
    let ids = dataset::list_sample_ids(&a.input)?;
    let ratios: [f64; 3] = a.ratios.clone().try_into().map_err(|_| anyhow::anyhow!("--ratios needs three values"))?;
    let Split { train, val, test } = dataset::split_dataset(&ids, ratios, a.seed)?;
    let out = a.out.clone().unwrap_or_else(|| a.input.clone());
    fs::create_dir_all(&out)?;
    write_id_list(&out.join("train.txt"), &train)?;
    write_id_list(&out.join("val.txt"), &val)?;
    write_id_list(&out.join("test.txt"), &test)?;
    println!("train {} / val {} / test {}", train.len(), val.len(), test.len());
    Ok(EXIT_OK)
}

fn parse_list(s: &str, flag: &str) -> anyhow::Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("--{flag}: bad number {t:?}")))
        .collect()
}

fn parse_count_range(s: &str) -> anyhow::Result<(usize, usize)> {
    let parse = |t: &str| t.trim().parse::<usize>().with_context(|| format!("--occlusion-count: bad count {t:?}"));
    match s.split_once('-') {
        Some((lo, hi)) => Ok((parse(lo)?, parse(hi)?)),
        None => {
            let n = parse(s)?;
            Ok((n, n))
        }
    }
}

fn build_augment_spec(a: &AugmentArgs) -> anyhow::Result<AugmentSpec> {
    let (min_count, max_count) = parse_count_range(&a.occlusion_count)?;
    let occlusion = (max_count > 0).then(|| OcclusionSpec {
        min_count,
        max_count,
        min_area_frac: a.occlusion_area[0],
        max_area_frac: a.occlusion_area[1],
        max_overlap: a.max_overlap,
    });
    let spec = AugmentSpec {
        rotations: parse_list(&a.rotations, "rotations")?,
        brightness_factors: parse_list(&a.brightness, "brightness")?,
        sp_density: a.sp_density,
        occlusion,
        seed: a.seed,
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_augment(a: &AugmentArgs) -> anyhow::Result<i32> {
    require_dir(&a.input, "input")?;
    let spec = build_augment_spec(a)?;
    let ids = match &a.ids {
        Some(path) => Some(
            dataset::parse_class_names(
                &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            ),
        ),
        None => None,
    };
    let n = augment::augment_dataset(&a.input, &a.out, &spec, ids.as_deref())?;
    println!("wrote {n} samples to {}", a.out.display());
    Ok(EXIT_OK)
}

/// Directory holding the label files: `dir/labels` when present, else `dir`.
fn label_dir(dir: &Path) -> PathBuf {
    let nested = dir.join("labels");
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

fn read_labels_file(path: &Path) -> anyhow::Result<String> {
    if path.is_file() {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    } else {
        Ok(String::new())
    }
}

/// Loads ground truth and predictions in normalized coordinates. IoU does
/// not change under per-axis scaling, so image sizes are not needed.
pub fn load_eval_inputs(
    pred_dir: &Path,
    gt_dir: &Path,
    n_classes: usize,
) -> anyhow::Result<(Vec<Detection>, Vec<GroundTruth>)> {
    let gt_labels = label_dir(gt_dir);
    let pred_labels = label_dir(pred_dir);
    let mut ids = dataset::list_label_files(&gt_labels)?;
    ids.extend(dataset::list_label_files(&pred_labels)?);
    ids.retain(|id| id != "classes");
    ids.sort();
    ids.dedup();

    let mut dets = Vec::new();
    let mut gts = Vec::new();
    for id in &ids {
        let gpath = gt_labels.join(format!("{id}.txt"));
        let labels = dataset::parse_yolo_labels(&read_labels_file(&gpath)?, 1, 1, n_classes)
            .with_context(|| gpath.display().to_string())?;
        gts.extend(labels.into_iter().map(|l| GroundTruth::new(id.clone(), l.class_id, l.bbox)));

        let ppath = pred_labels.join(format!("{id}.txt"));
        let preds = dataset::parse_yolo_predictions(&read_labels_file(&ppath)?, 1, 1, n_classes)
            .with_context(|| ppath.display().to_string())?;
        for p in preds {
            dets.push(Detection::new(id.clone(), p.label.class_id, p.score, p.label.bbox)?);
        }
    }
    Ok((dets, gts))
}

fn cmd_eval(a: &EvalArgs) -> anyhow::Result<i32> {
    require_dir(&a.pred, "prediction")?;
    require_dir(&a.gt, "ground-truth")?;
    if !(0.0..=1.0).contains(&a.conf) || !(0.0..=1.0).contains(&a.nms_iou) {
        bail!("--conf and --nms-iou must lie in [0, 1]");
    }
    let class_names = match &a.classes {
        Some(path) => dataset::parse_class_names(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?),
        None => {
            let beside = label_dir(&a.gt).join("classes.txt");
            if beside.is_file() {
                dataset::parse_class_names(&fs::read_to_string(&beside)?)
            } else {
                dataset::load_class_names(&a.gt)?
            }
        }
    };
    if class_names.is_empty() {
        bail!("class list is empty");
    }
    let (dets, gts) = load_eval_inputs(&a.pred, &a.gt, class_names.len())?;
    let kept = eval::nms(&dets, a.nms_iou);
    let cfg = EvalConfig {
        class_names,
        conf_threshold: a.conf,
    };
    let rep = eval::evaluate(&kept, &gts, &cfg)?;
    let doc = report::report_json(&rep, Some(a.nms_iou));
    match &a.report {
        Some(path) => {
            fs::write(path, &doc).with_context(|| format!("writing {}", path.display()))?;
            let show = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.4}"));
            println!(
                "mAP50 {}  mAP50-95 {}  P {}  R {}",
                show(rep.map50),
                show(rep.map5095),
                show(rep.precision),
                show(rep.recall)
            );
        }
        None => print!("{doc}"),
    }
    if rep.map50.is_none() {
        eprintln!("error: no ground-truth boxes; metrics are undefined");
        return Ok(EXIT_CHECK_FAILED);
    }
    Ok(EXIT_OK)
}

fn cmd_loss_check(a: &LossCheckArgs) -> anyhow::Result<i32> {
    let gammas = if a.gamma.is_empty() { vec![0.0, 0.5, 1.0] } else { a.gamma.clone() };
    if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        bail!("--gamma {g} must be >= 0");
    }
    let r = gradcheck::check_gradients(a.pairs, a.seed, &gammas);
    println!(
        "max relative error: {:.3e} ({} pairs checked, {} redrawn near ties, gammas {:?})",
        r.max_rel_error, r.pairs_checked, r.pairs_skipped, gammas
    );
    if r.max_rel_error <= GRAD_TOLERANCE {
        Ok(EXIT_OK)
    } else {
        eprintln!("gradient check failed: tolerance {GRAD_TOLERANCE:e}");
        Ok(EXIT_CHECK_FAILED)
    }
}

fn cmd_module_check(a: &ModuleCheckArgs) -> anyhow::Result<i32> {
    let checks = golden::module_checks(a.seed)?;
    let mut ok = true;
    for c in &checks {
        let frozen = c.frozen.map_or("-".to_string(), |f| format!("{f:.12}"));
        println!(
            "{:<16} fast {:.12}  reference {:.12}  pinned {}  {}",
            c.name,
            c.fast,
            c.reference,
            frozen,
            if c.passed() { "ok" } else { "MISMATCH" }
        );
        ok &= c.passed();
    }
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_ranges() {
        assert_eq!(parse_count_range("1-3").unwrap(), (1, 3));
        assert_eq!(parse_count_range("2").unwrap(), (2, 2));
        assert!(parse_count_range("a-3").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("90, 180", "r").unwrap(), vec![90.0, 180.0]);
        assert!(parse_list("none", "r").unwrap().is_empty());
        assert!(parse_list("x", "r").is_err());
    }

    #[test]
    fn help_exits_0() {
        for sub in ["split", "augment", "eval", "loss-check", "module-check"] {
            let e = Cli::try_parse_from(["linekit", sub, "--help"]).unwrap_err();
            assert!(!e.use_stderr(), "{sub}");
        }
    }
}

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use ringtrace::annotation::{load_annotation, rings_to_doc, save_annotation, AnnotationDoc};
use ringtrace::detector::DetectorConfig;
use ringtrace::io::{read_mask, read_pmap, read_rgb, write_mask, write_pmap, write_rgb};
use ringtrace::metrics::{adapted_rand_error, mean_average_recall, rasterize_regions};
use ringtrace::overlay::draw_rings;
use ringtrace::pipeline::{prepare, run, PipelineConfig};
use ringtrace::segmentation::{Backend, GradientBackend, NeuralBackend, PmapBackend};
use ringtrace::spiderweb::SpiderwebConfig;
use ringtrace::{Error, Mask, Pith};

const EXIT_OTHER: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_PITH: u8 = 4;
const EXIT_BACKEND: u8 = 5;
const EXIT_EVAL: u8 = 6;

#[derive(Parser)]
#[command(name = "ringtrace", version, about = "Tree-ring delineation on wood cross-sections")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect rings and write them as Labelme JSON
    Detect(DetectArgs),
    /// Score predicted rings against ground truth (mAR, ARAND)
    Eval(EvalArgs),
    /// Draw rings from a JSON document onto an image
    Overlay(OverlayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BackendKind {
    Pmap,
    Neural,
    Gradient,
}

#[derive(Args)]
struct DetectArgs {
    image: PathBuf,
    /// Disc mask (white = disc)
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true, requires = "pith_y")]
    pith_x: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "pith_x")]
    pith_y: Option<f64>,
    /// JSON file with {"x": .., "y": ..}, used when --pith-x/--pith-y are absent
    #[arg(long, conflicts_with = "pith_x")]
    pith_json: Option<PathBuf>,
    #[arg(long, short)]
    output: PathBuf,
    /// Also write the input with the rings drawn on it
    #[arg(long)]
    overlay: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gradient")]
    backend: BackendKind,
    /// ONNX model for --backend neural
    #[arg(long)]
    model: Option<PathBuf>,
    /// Probability map (PMAP) in the input image frame, for --backend pmap
    #[arg(long)]
    pmap: Option<PathBuf>,
    /// Gaussian sigma of the gradient backend
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = ringtrace::preprocess::DEFAULT_MARGIN)]
    margin: usize,
    /// Working canvas side; 0 keeps the cropped size
    #[arg(long, default_value_t = ringtrace::preprocess::DEFAULT_TARGET)]
    target: usize,
    /// Tile side; 0 runs the whole image at once
    #[arg(long, default_value_t = ringtrace::detector::DEFAULT_TILE_SIZE)]
    tile_size: usize,
    #[arg(long, default_value_t = ringtrace::detector::DEFAULT_ROTATIONS)]
    rotations: usize,
    #[arg(long, default_value_t = ringtrace::detector::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = ringtrace::geometry::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = ringtrace::geometry::DEFAULT_NUM_RAYS)]
    rays: usize,
    #[arg(long, default_value_t = ringtrace::spiderweb::DEFAULT_SMOOTH_THR)]
    smooth_thr: f64,
    #[arg(long, default_value_t = ringtrace::spiderweb::DEFAULT_MIN_COVERAGE)]
    min_coverage: f64,
    /// Directory for the averaged probability map, its mask and skeleton
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted ring documents
    #[arg(long, required = true, num_args = 1..)]
    pred: Vec<PathBuf>,
    /// Ground-truth documents, paired with --pred in order
    #[arg(long, required = true, num_args = 1..)]
    gt: Vec<PathBuf>,
    /// Disc masks: one per pair, or a single mask shared by all
    #[arg(long, required = true, num_args = 1..)]
    mask: Vec<PathBuf>,
    /// Write the report as JSON here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write a CSV table
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct OverlayArgs {
    image: PathBuf,
    #[arg(long)]
    rings: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl fmt::Debug for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.err)
    }
}

trait ExitContext<T> {
    fn exit(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitContext<T> for Result<T, E> {
    fn exit(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, err: e.into() })
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn read_input<T>(what: &str, path: &Path, f: impl FnOnce(&Path) -> ringtrace::Result<T>) -> CliResult<T> {
    f(path).with_context(|| format!("cannot read {what} {}", path.display())).exit(EXIT_INPUT)
}

fn read_pith(args: &DetectArgs) -> CliResult<Pith> {
    match (args.pith_x, args.pith_y, &args.pith_json) {
        (Some(x), Some(y), _) => Ok(Pith::new(x, y)),
        (_, _, Some(path)) => {
            #[derive(serde::Deserialize)]
            struct P {
                x: f64,
                y: f64,
            }
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read pith file {}", path.display()))
                .exit(EXIT_INPUT)?;
            let p: P = serde_json::from_str(&text)
                .with_context(|| format!("pith file {} needs numeric \"x\" and \"y\"", path.display()))
                .exit(EXIT_INPUT)?;
            Ok(Pith::new(p.x, p.y))
        }
        _ => Err(anyhow!("the pith is required: pass --pith-x and --pith-y, or --pith-json")).exit(EXIT_USAGE),
    }
}

fn pipeline_config(args: &DetectArgs) -> PipelineConfig {
    PipelineConfig {
        detector: DetectorConfig {
            tile_size: args.tile_size,
            total_rotations: args.rotations,
            threshold: args.threshold,
            alpha: args.alpha,
            num_rays: args.rays,
        },
        spiderweb: SpiderwebConfig {
            smooth_thr: args.smooth_thr,
            min_coverage: args.min_coverage,
        },
        margin: args.margin,
        target: args.target,
    }
}

fn classify(e: Error) -> Failure {
    let code = match e {
        Error::PithOutside { .. } | Error::PithOffDisc { .. } => EXIT_PITH,
        Error::Model { .. } | Error::Tile { .. } => EXIT_BACKEND,
        Error::InvalidParameter { .. } | Error::InvalidTileSize { .. } => EXIT_USAGE,
        _ => EXIT_OTHER,
    };
    Failure { code, err: e.into() }
}

fn detect(args: &DetectArgs) -> CliResult {
    let cfg = pipeline_config(args);
    cfg.detector.validate().map_err(classify)?;
    let pith = read_pith(args)?;
    let image = read_input("image", &args.image, |p| read_rgb(p))?;
    let mask: Option<Mask> = match &args.mask {
        Some(p) => Some(read_input("mask", p, |p| read_mask(p))?),
        None => None,
    };
    let prepared = prepare(&image, mask.as_ref(), pith, &cfg).map_err(classify)?;

    let working = prepared.image.dims();
    let backend: Box<dyn Backend> = match args.backend {
        BackendKind::Gradient => Box::new(GradientBackend::new(args.sigma).map_err(classify)?),
        BackendKind::Pmap => {
            let path = args
                .pmap
                .as_ref()
                .ok_or_else(|| anyhow!("--backend pmap needs --pmap PATH"))
                .exit(EXIT_USAGE)?;
            let map = read_input("probability map", path, |p| read_pmap(p))?;
            if map.dims() != image.dims() {
                return Err(anyhow!(
                    "probability map {} is {:?} but the image is {:?}",
                    path.display(),
                    map.dims(),
                    image.dims()
                ))
                .exit(EXIT_INPUT);
            }
            let map = prepared.map_to_working(&map, cfg.target).map_err(classify)?;
            Box::new(PmapBackend::new(map).map_err(classify)?)
        }
        BackendKind::Neural => {
            let path = args
                .model
                .as_ref()
                .ok_or_else(|| anyhow!("--backend neural needs --model PATH"))
                .exit(EXIT_USAGE)?;
            let tile = if cfg.detector.tile_size == 0 {
                working
            } else {
                (cfg.detector.tile_size, cfg.detector.tile_size)
            };
            Box::new(NeuralBackend::load(path, tile).exit(EXIT_BACKEND)?)
        }
    };

    let out = run(&prepared, &cfg, backend.as_ref()).map_err(classify)?;

    if let Some(dir) = &args.dump_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .exit(EXIT_OTHER)?;
        write_pmap(&out.detection.probability, dir.join("probability.pmap")).exit(EXIT_OTHER)?;
        write_mask(&out.detection.mask, dir.join("mask.png")).exit(EXIT_OTHER)?;
        write_mask(&out.detection.skeleton, dir.join("skeleton.png")).exit(EXIT_OTHER)?;
    }

    let metadata = json!({
        "generator": concat!("ringtrace ", env!("CARGO_PKG_VERSION")),
        "pith": [pith.x, pith.y],
        "backend": args.backend,
        "config": cfg,
        "num_rings": out.rings.len(),
    });
    let name = args.image.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let doc = rings_to_doc(&out.rings, &name, image.dims(), Some(metadata));
    save_annotation(&doc, &args.output)
        .with_context(|| format!("cannot write {}", args.output.display()))
        .exit(EXIT_OTHER)?;

    if let Some(path) = &args.overlay {
        write_rgb(&draw_rings(&image, &out.rings), path)
            .with_context(|| format!("cannot write {}", path.display()))
            .exit(EXIT_OTHER)?;
    }
    eprintln!("{} rings written to {}", out.rings.len(), args.output.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalRow {
    pred: String,
    gt: String,
    mar: f64,
    arand: f64,
}

fn load_doc(path: &Path) -> CliResult<AnnotationDoc> {
    load_annotation(path)
        .with_context(|| format!("invalid ring document {}", path.display()))
        .exit(EXIT_EVAL)
}

fn rasterize(doc: &AnnotationDoc, path: &Path, mask: &Mask) -> CliResult<ringtrace::metrics::RegionLabels> {
    if (doc.width, doc.height) != mask.dims() {
        return Err(anyhow!(
            "{} is {}x{} but the disc mask is {}x{}",
            path.display(),
            doc.width,
            doc.height,
            mask.width(),
            mask.height()
        ))
        .exit(EXIT_EVAL);
    }
    rasterize_regions(&doc.rings(), mask)
        .with_context(|| format!("cannot rasterize {}", path.display()))
        .exit(EXIT_EVAL)
}

fn eval(args: &EvalArgs) -> CliResult {
    if args.pred.len() != args.gt.len() {
        return Err(anyhow!("{} --pred files but {} --gt files", args.pred.len(), args.gt.len())).exit(EXIT_USAGE);
    }
    if args.mask.len() != 1 && args.mask.len() != args.pred.len() {
        return Err(anyhow!("give one --mask, or one per --pred")).exit(EXIT_USAGE);
    }
    let mut rows = Vec::new();
    for (i, (pred_path, gt_path)) in args.pred.iter().zip(&args.gt).enumerate() {
        let mask_path = &args.mask[if args.mask.len() == 1 { 0 } else { i }];
        let mask = read_input("mask", mask_path, |p| read_mask(p))?;
        let pred = rasterize(&load_doc(pred_path)?, pred_path, &mask)?;
        let gt = rasterize(&load_doc(gt_path)?, gt_path, &mask)?;
        rows.push(EvalRow {
            pred: pred_path.display().to_string(),
            gt: gt_path.display().to_string(),
            mar: mean_average_recall(&pred, &gt).exit(EXIT_EVAL)?,
            arand: adapted_rand_error(&pred, &gt).exit(EXIT_EVAL)?,
        });
    }
    let n = rows.len() as f64;
    let mean_mar = rows.iter().map(|r| r.mar).sum::<f64>() / n;
    let mean_arand = rows.iter().map(|r| r.arand).sum::<f64>() / n;
    let report = json!({ "images": rows, "mean": { "mar": mean_mar, "arand": mean_arand } });
    let text = serde_json::to_string_pretty(&report).exit(EXIT_OTHER)? + "\n";
    match &args.output {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .exit(EXIT_OTHER)?,
        None => print!("{text}"),
    }
    if let Some(p) = &args.csv {
        let mut csv = String::from("pred,gt,mar,arand\n");
        for r in &rows {
            csv += &format!("{},{},{},{}\n", r.pred, r.gt, r.mar, r.arand);
        }
        csv += &format!("mean,,{mean_mar},{mean_arand}\n");
        std::fs::write(p, csv)
            .with_context(|| format!("cannot write {}", p.display()))
            .exit(EXIT_OTHER)?;
    }
    Ok(())
}

fn overlay(args: &OverlayArgs) -> CliResult {
    let image = read_input("image", &args.image, |p| read_rgb(p))?;
    let doc = read_input("ring document", &args.rings, |p| load_annotation(p))?;
    let mut out = image.clone();
    for p in &doc.polylines {
        ringtrace::overlay::draw_polyline(&mut out, &p.points, p.closed, ringtrace::overlay::RING_COLOR);
    }
    write_rgb(&out, &args.output)
        .with_context(|| format!("cannot write {}", args.output.display()))
        .exit(EXIT_OTHER)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_OTHER);
        }
    }
    let result = match &cli.command {
        Command::Detect(a) => detect(a),
        Command::Eval(a) => eval(a),
        Command::Overlay(a) => overlay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on operational errors, 2 on usage errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amg::{run_amg, AmgConfig};
use crate::crops::build_crop_schedule_with;
use crate::eval::{
    edge_metrics, edge_pipeline, eval_instance_seg, eval_point_to_mask, eval_proposals,
    gt_edge_map, EdgeEvalConfig, EvalDataset, EvalReport, MetricTable, PointEvalConfig,
    PointSampler, Proposal, ProposalEvalConfig,
};
use crate::io::{
    list_json_files, read_json, read_mask_file, read_scene, write_atomic, write_json,
    write_mask_file, write_scene, MaskFile,
};
use crate::mask::{BBox, BinaryMask};
use crate::rng::{derive_seed, rng_from};
use crate::scene::{generate_scene, SceneConfig, SceneSpec};
use crate::segmenter::{
    ChainOrder, NoiseConfig, NoisySegmenter, OracleSegmenter, Prompt, SegmentError, Segmenter,
    SegmenterOutput,
};
use crate::sim::{run_interactive_sim, SimConfig};
use crate::stats::{compute_stats, ImageMasks, StatsConfig};

#[derive(Debug, Parser)]
#[command(
    name = "segkit",
    version,
    about = "Promptable segmentation pipelines over synthetic scenes"
)]
pub struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
    /// JSON file with configuration sections overriding the defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic scene fixtures.
    #[command(subcommand)]
    Scene(SceneCommand),
    /// Automatic mask generation.
    #[command(subcommand)]
    Amg(AmgCommand),
    /// Evaluation protocols.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Interactive prompt simulation.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Mask collection statistics.
    Stats(StatsArgs),
    /// Dump the crop schedule for an image size.
    Crops(CropsArgs),
}

#[derive(Debug, Subcommand)]
pub enum SceneCommand {
    Gen(SceneGenArgs),
}

#[derive(Debug, Subcommand)]
pub enum AmgCommand {
    Run(AmgRunArgs),
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Point-to-mask mIoU after 1..n points.
    Points(EvalPointsArgs),
    /// Average recall of mask proposals.
    Proposals(EvalProposalsArgs),
    /// Box-prompted instance masks, before and after one refinement.
    Boxes(EvalCommon),
    /// Zero-shot edge detection.
    Edges(EvalEdgesArgs),
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    Run(SimRunArgs),
}

#[derive(Debug, Args)]
pub struct SceneGenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: u32,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// 1 = flat scenes, 3 = whole/part/subpart.
    #[arg(long)]
    pub max_depth: Option<u8>,
    #[arg(long, value_name = "LO:HI", value_parser = parse_range)]
    pub objects: Option<(u32, u32)>,
    /// Side length range of top-level objects.
    #[arg(long, value_name = "LO:HI", value_parser = parse_range)]
    pub root_size: Option<(u32, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmenterKind {
    #[default]
    Oracle,
    Noisy,
}

#[derive(Debug, Clone, Args)]
pub struct SegmenterArgs {
    #[arg(long, value_enum)]
    pub segmenter: Option<SegmenterKind>,
    #[arg(long)]
    pub boundary_std: Option<f64>,
    #[arg(long)]
    pub iou_std: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AmgFlags {
    #[arg(long)]
    pub pred_iou_thresh: Option<f64>,
    #[arg(long)]
    pub stability_thresh: Option<f64>,
    #[arg(long)]
    pub stability_delta: Option<f32>,
    #[arg(long)]
    pub coverage_max: Option<f64>,
    #[arg(long)]
    pub nms_thresh: Option<f64>,
    #[arg(long)]
    pub min_component_area: Option<usize>,
    #[arg(long)]
    pub max_hole_area: Option<usize>,
    #[arg(long)]
    pub crop_schedule_on: Option<bool>,
    #[arg(long)]
    pub crop_overlap_ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AmgRunArgs {
    /// Directory of scene JSON files.
    #[arg(long)]
    pub scenes: PathBuf,
    /// Output directory; one mask file per scene, same file name.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub segmenter: SegmenterArgs,
    #[command(flatten)]
    pub amg: AmgFlags,
}

#[derive(Debug, Args)]
pub struct EvalCommon {
    /// `NAME=DIR` pairs of scene directories; repeatable.
    #[arg(long = "dataset", value_name = "NAME=DIR", value_parser = parse_named_dir, required = true)]
    pub datasets: Vec<(String, PathBuf)>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a plain-text table of the report.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub segmenter: SegmenterArgs,
}

#[derive(Debug, Args)]
pub struct EvalPointsArgs {
    #[command(flatten)]
    pub common: EvalCommon,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,
    /// Point counts to report, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub report_at: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplerArg {
    Center,
    Random,
}

#[derive(Debug, Args)]
pub struct EvalProposalsArgs {
    #[command(flatten)]
    pub common: EvalCommon,
    /// `NAME=DIR` mask directories matching a dataset's scene file names.
    /// Datasets without one get proposals from automatic mask generation.
    #[arg(long = "masks", value_name = "NAME=DIR", value_parser = parse_named_dir)]
    pub masks: Vec<(String, PathBuf)>,
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub amg: AmgFlags,
}

#[derive(Debug, Args)]
pub struct EvalEdgesArgs {
    #[command(flatten)]
    pub common: EvalCommon,
    /// Directory for per-dataset precision/recall curves as CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long)]
    pub nms_thresh: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimRunArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Region id whose mask is the simulated target.
    #[arg(long, default_value_t = 0)]
    pub region: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub segmenter: SegmenterArgs,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "input")]
pub struct StatsInput {
    /// Directory of mask files.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Directory of scene files; ground-truth region masks are used.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: StatsInput,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plain graymap of the center heatmap.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub heatmap_scale: usize,
}

#[derive(Debug, Args)]
pub struct CropsArgs {
    #[arg(long)]
    pub width: u32,
    #[arg(long)]
    pub height: u32,
    #[arg(long)]
    pub overlap_ratio: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Sections of the `--config` file; each is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub scene: SceneConfig,
    pub amg: AmgConfig,
    pub segmenter: SegmenterKind,
    pub chain_order: ChainOrder,
    pub noise: NoiseConfig,
    pub sim: SimConfig,
    pub points: PointEvalConfig,
    pub proposals: ProposalEvalConfig,
    pub edges: EdgeEvalConfig,
    pub stats: StatsConfig,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo = a.parse::<u32>().map_err(|e| e.to_string())?;
    let hi = b.parse::<u32>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

fn parse_named_dir(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, dir)) if !name.is_empty() && !dir.is_empty() => {
            Ok((name.to_string(), PathBuf::from(dir)))
        }
        _ => Err("expected NAME=DIR".into()),
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut config: FileConfig = match &cli.config {
        Some(path) => read_json(path).map_err(|e| usage(e.to_string()))?,
        None => FileConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.noise.seed = seed;
        config.points.seed = seed;
        config.stats.seed = seed;
    }
    let seed = cli.seed.unwrap_or(0);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j as usize);
    }
    let pool = pool.build().context("starting worker pool")?;
    pool.install(|| match cli.command {
        Command::Scene(SceneCommand::Gen(args)) => scene_gen(args, config, seed),
        Command::Amg(AmgCommand::Run(args)) => amg_run(args, config),
        Command::Eval(cmd) => eval(cmd, config),
        Command::Sim(SimCommand::Run(args)) => sim_run(args, config, seed),
        Command::Stats(args) => stats(args, config),
        Command::Crops(args) => crops(args, config),
    })
}

/// Either segmenter behind one type, so protocols can be monomorphized once.
pub enum AnySegmenter {
    Oracle(OracleSegmenter),
    Noisy(NoisySegmenter),
}

impl AnySegmenter {
    fn build(scene: &SceneSpec, config: &FileConfig) -> Self {
        let oracle = OracleSegmenter::new(scene.clone()).with_order(config.chain_order);
        match config.segmenter {
            SegmenterKind::Oracle => Self::Oracle(oracle),
            SegmenterKind::Noisy => Self::Noisy(NoisySegmenter::new(oracle, config.noise)),
        }
    }
}

impl Segmenter for AnySegmenter {
    fn image_size(&self) -> (u32, u32) {
        match self {
            Self::Oracle(s) => s.image_size(),
            Self::Noisy(s) => s.image_size(),
        }
    }

    fn supports_multimask(&self) -> bool {
        match self {
            Self::Oracle(s) => s.supports_multimask(),
            Self::Noisy(s) => s.supports_multimask(),
        }
    }

    fn segment(
        &self,
        view: BBox,
        prompt: &Prompt,
        multimask: bool,
    ) -> Result<SegmenterOutput, SegmentError> {
        match self {
            Self::Oracle(s) => s.segment(view, prompt, multimask),
            Self::Noisy(s) => s.segment(view, prompt, multimask),
        }
    }
}

fn apply_segmenter_args(config: &mut FileConfig, args: &SegmenterArgs) {
    if let Some(kind) = args.segmenter {
        config.segmenter = kind;
    }
    if let Some(v) = args.boundary_std {
        config.noise.boundary_std = v;
    }
    if let Some(v) = args.iou_std {
        config.noise.iou_std = v;
    }
}

fn apply_amg_flags(amg: &mut AmgConfig, f: &AmgFlags) -> Result<()> {
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = f.$field { amg.$field = v; })* };
    }
    set!(
        pred_iou_thresh,
        stability_thresh,
        stability_delta,
        coverage_max,
        nms_thresh,
        min_component_area,
        max_hole_area,
        crop_schedule_on,
        crop_overlap_ratio
    );
    amg.validate().map_err(|e| usage(e.to_string()))
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => Ok(write_json(path, value)?),
        None => {
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn scene_gen(args: SceneGenArgs, mut config: FileConfig, seed: u64) -> Result<()> {
    let sc = &mut config.scene;
    sc.width = args.width.unwrap_or(sc.width);
    sc.height = args.height.unwrap_or(sc.height);
    sc.max_depth = args.max_depth.unwrap_or(sc.max_depth);
    sc.objects = args.objects.unwrap_or(sc.objects);
    sc.root_size = args.root_size.unwrap_or(sc.root_size);
    ensure_dir(&args.out)?;
    let scene_config = &config.scene;
    (0..args.count)
        .into_par_iter()
        .try_for_each(|i| -> Result<()> {
            let scene = generate_scene(derive_seed(seed, &[i as u64]), scene_config)
                .map_err(|e| anyhow!("scene {i}: {e}"))?;
            write_scene(&args.out.join(format!("scene_{i:04}.json")), &scene)?;
            Ok(())
        })
}

fn load_scenes(dir: &Path) -> Result<Vec<(PathBuf, SceneSpec)>> {
    let files = list_json_files(dir)?;
    if files.is_empty() {
        bail!("no scene files in {}", dir.display());
    }
    files
        .into_par_iter()
        .map(|p| Ok((p.clone(), read_scene(&p)?)))
        .collect()
}

fn amg_run(args: AmgRunArgs, mut config: FileConfig) -> Result<()> {
    apply_segmenter_args(&mut config, &args.segmenter);
    apply_amg_flags(&mut config.amg, &args.amg)?;
    let scenes = load_scenes(&args.scenes)?;
    ensure_dir(&args.out)?;
    scenes
        .par_iter()
        .enumerate()
        .try_for_each(|(i, (path, scene))| -> Result<()> {
            let seg = AnySegmenter::build(scene, &config);
            let records =
                run_amg(&seg, &config.amg).with_context(|| format!("{}", path.display()))?;
            let file = MaskFile::from_records(i as u64, scene.width, scene.height, &records);
            write_mask_file(
                &args.out.join(path.file_name().expect("listed file")),
                &file,
            )?;
            Ok(())
        })
}

fn load_datasets(common: &EvalCommon) -> Result<Vec<(PathBuf, EvalDataset)>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for (name, dir) in &common.datasets {
        if !seen.insert(name) {
            return Err(usage(format!("dataset {name} given twice")));
        }
        let scenes = load_scenes(dir)?.into_iter().map(|(_, s)| s).collect();
        out.push((dir.clone(), EvalDataset::from_scenes(name.clone(), scenes)));
    }
    Ok(out)
}

fn finish_report(common: &EvalCommon, per_dataset: BTreeMap<String, MetricTable>) -> Result<()> {
    let report = EvalReport::new(per_dataset);
    if let Some(path) = &common.table {
        write_atomic(path, report.to_text_table().as_bytes())?;
    }
    emit_json(common.out.as_deref(), &report)
}

fn eval(cmd: EvalCommand, mut config: FileConfig) -> Result<()> {
    match cmd {
        EvalCommand::Points(args) => {
            apply_segmenter_args(&mut config, &args.common.segmenter);
            if let Some(s) = args.sampler {
                config.points.sampler = match s {
                    SamplerArg::Center => PointSampler::Center,
                    SamplerArg::Random => PointSampler::Random,
                };
            }
            if let Some(r) = &args.report_at {
                config.points.report_at = r.clone();
            }
            let mut per = BTreeMap::new();
            for (_, ds) in load_datasets(&args.common)? {
                let r = eval_point_to_mask(
                    |s: &SceneSpec| AnySegmenter::build(s, &config),
                    &ds,
                    &config.points,
                )?;
                per.insert(ds.name.clone(), r.table(&config.points.report_at));
            }
            finish_report(&args.common, per)
        }
        EvalCommand::Boxes(common) => {
            apply_segmenter_args(&mut config, &common.segmenter);
            let mut per = BTreeMap::new();
            for (_, ds) in load_datasets(&common)? {
                let r =
                    eval_instance_seg(|s: &SceneSpec| AnySegmenter::build(s, &config), &ds, None)?;
                per.insert(ds.name.clone(), r.table());
            }
            finish_report(&common, per)
        }
        EvalCommand::Proposals(args) => {
            apply_segmenter_args(&mut config, &args.common.segmenter);
            apply_amg_flags(&mut config.amg, &args.amg)?;
            if let Some(k) = args.k {
                config.proposals.k = k;
            }
            let masks: BTreeMap<&String, &PathBuf> =
                args.masks.iter().map(|(n, d)| (n, d)).collect();
            let mut per = BTreeMap::new();
            for (scene_dir, ds) in load_datasets(&args.common)? {
                let proposals = match masks.get(&ds.name) {
                    Some(dir) => load_proposals(&scene_dir, dir)?,
                    None => ds
                        .items
                        .par_iter()
                        .map(|item| {
                            let seg = AnySegmenter::build(&item.scene, &config);
                            Ok(run_amg(&seg, &config.amg)?
                                .iter()
                                .map(Proposal::from)
                                .collect())
                        })
                        .collect::<Result<Vec<_>>>()?,
                };
                per.insert(
                    ds.name.clone(),
                    eval_proposals(&proposals, &ds, &config.proposals)?,
                );
            }
            finish_report(&args.common, per)
        }
        EvalCommand::Edges(args) => {
            apply_segmenter_args(&mut config, &args.common.segmenter);
            let nms = args.nms_thresh.unwrap_or(config.amg.nms_thresh);
            if !(0.0..=1.0).contains(&nms) {
                return Err(usage("nms_thresh must be in [0, 1]"));
            }
            if let Some(dir) = &args.curves {
                ensure_dir(dir)?;
            }
            let mut per = BTreeMap::new();
            for (_, ds) in load_datasets(&args.common)? {
                let preds = ds
                    .items
                    .par_iter()
                    .map(|item| {
                        Ok(edge_pipeline(&AnySegmenter::build(&item.scene, &config), nms)?.map)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let gts: Vec<Vec<BinaryMask>> = ds
                    .items
                    .iter()
                    .map(|i| vec![gt_edge_map(&i.scene)])
                    .collect();
                let m = edge_metrics(&preds, &gts, &config.edges)?;
                if let Some(dir) = &args.curves {
                    write_atomic(
                        &dir.join(format!("{}.csv", ds.name)),
                        m.curve_csv().as_bytes(),
                    )?;
                }
                per.insert(ds.name.clone(), m.table());
            }
            finish_report(&args.common, per)
        }
    }
}

/// Mask files are paired with scenes by file name.
fn load_proposals(scene_dir: &Path, mask_dir: &Path) -> Result<Vec<Vec<Proposal>>> {
    list_json_files(scene_dir)?
        .par_iter()
        .map(|scene_path| {
            let path = mask_dir.join(scene_path.file_name().expect("listed file"));
            let file = read_mask_file(&path)?;
            let masks = file
                .masks()
                .map_err(|e| anyhow!("{}: {e}", path.display()))?;
            Ok(masks
                .into_iter()
                .zip(&file.annotations)
                .map(|(mask, a)| Proposal {
                    mask,
                    predicted_iou: a.predicted_iou,
                    stability: a.stability_score,
                })
                .collect())
        })
        .collect()
}

fn sim_run(args: SimRunArgs, mut config: FileConfig, seed: u64) -> Result<()> {
    apply_segmenter_args(&mut config, &args.segmenter);
    config.sim.validate().map_err(|e| usage(e.to_string()))?;
    let scene = read_scene(&args.scene)?;
    if args.region >= scene.regions.len() {
        return Err(usage(format!(
            "scene has {} regions; no region {}",
            scene.regions.len(),
            args.region
        )));
    }
    let gt = scene.region_mask(args.region);
    let seg = AnySegmenter::build(&scene, &config);
    let mut rng = rng_from(derive_seed(seed, &[args.region as u64]));
    let trace = run_interactive_sim(&seg, &gt, &config.sim, &mut rng)?;
    emit_json(args.out.as_deref(), &trace)
}

fn stats(args: StatsArgs, config: FileConfig) -> Result<()> {
    let collection: Vec<ImageMasks> = if let Some(dir) = &args.input.masks {
        list_json_files(dir)?
            .par_iter()
            .map(|p| {
                let f = read_mask_file(p)?;
                let masks = f.masks().map_err(|e| anyhow!("{}: {e}", p.display()))?;
                Ok(ImageMasks {
                    width: f.image.width,
                    height: f.image.height,
                    masks,
                })
            })
            .collect::<Result<_>>()?
    } else {
        let dir = args.input.scenes.as_ref().expect("input group is required");
        load_scenes(dir)?
            .into_iter()
            .map(|(_, s)| ImageMasks {
                width: s.width,
                height: s.height,
                masks: s.region_masks(),
            })
            .collect()
    };
    let report = compute_stats(&collection, &config.stats)?;
    if let Some(path) = &args.heatmap {
        if args.heatmap_scale == 0 {
            return Err(usage("heatmap scale must be positive"));
        }
        write_atomic(
            path,
            report.center_heatmap.to_pgm(args.heatmap_scale).as_bytes(),
        )?;
    }
    emit_json(args.out.as_deref(), &report)
}

fn crops(args: CropsArgs, config: FileConfig) -> Result<()> {
    let ratio = args.overlap_ratio.unwrap_or(config.amg.crop_overlap_ratio);
    let schedule = build_crop_schedule_with(args.width, args.height, ratio)
        .map_err(|e| usage(e.to_string()))?;
    emit_json(args.out.as_deref(), &schedule)
}

/// One line per flag of every subcommand, for the README.
pub fn flag_reference() -> String {
    use clap::CommandFactory;
    fn walk(cmd: &clap::Command, prefix: &str, out: &mut String) {
        let name = if prefix.is_empty() {
            cmd.get_name().to_string()
        } else {
            format!("{prefix} {}", cmd.get_name())
        };
        let subs: Vec<_> = cmd
            .get_subcommands()
            .filter(|s| s.get_name() != "help")
            .collect();
        if subs.is_empty() {
            let _ = writeln!(out, "{name}");
            for a in cmd
                .get_arguments()
                .filter(|a| a.get_long().is_some_and(|l| l != "help" && l != "version"))
            {
                let help = a.get_help().map(|h| h.to_string()).unwrap_or_default();
                let _ = writeln!(out, "  --{} {}", a.get_long().unwrap(), help);
            }
        }
        for s in subs {
            walk(s, &name, out);
        }
    }
    let mut out = String::new();
    walk(&Cli::command(), "", &mut out);
    out
}

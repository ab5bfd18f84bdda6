//! Command line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uwda_core::adapt::{
    split_easy_hard, sweep_lambda, train_baseline, train_inter, train_intra, AdaptNets, EasySample, HardSample,
    SplitResult, SweepSetup,
};
use uwda_core::image::normalize;
use uwda_core::metrics::{evaluate, MetricKind};
use uwda_core::nn::{Enhancer, FeatureExtractor, RankBackbone, Scorer};
use uwda_core::pipeline::{
    enhance_batch, run_ablation, run_desk, AblationData, AblationModels, AblationSpec, CheckpointMeta, DeskConfig,
    ImageModel, QualityModel, RunConfig, Variant,
};
use uwda_core::ruiqa::{finetune_scorer, make_rank_pairs_grouped, predict_batch, train_ranker, IqaProtocol, IqaVariant};
use uwda_core::synth::{build_dataset, generate_real, procedural_scene, DatasetConfig, RealDomainConfig};
use uwda_core::{NormImage, UnitImage};

use crate::config;
use crate::data::{load_real, load_real_toned, test_pairs, training_pairs, DATASET_MANIFEST};
use crate::error::{CliError, Result};
use crate::formats::{load_model, read_jsonl, save_model, save_nets, write_json, write_jsonl, write_text, SplitManifest};
use crate::io::{load_dir, read_png, write_png};
use crate::report::{ablation_table, metric_table, write_report};

#[derive(Parser, Debug)]
#[command(name = "uwda", version, about = "Two-phase underwater domain adaptation")]
pub struct Cli {
    /// Run config (TOML). Falls back to $UWDA_CONFIG, then ./uwda.toml.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate paired synthetic data (and optionally a stand-in real set).
    Synth(SynthArgs),
    /// Evaluate a directory of predictions.
    Eval(EvalArgs),
    /// Quality scorer training and scoring.
    #[command(subcommand)]
    Ruiqa(RuiqaCommand),
    /// Train the baseline enhancer on synthetic pairs only.
    TrainBaseline,
    /// Inter-domain adaptation.
    TrainInter,
    /// Score the enhanced real set and split it into easy and hard.
    Split(SplitArgs),
    /// Intra-domain adaptation from a persisted split.
    TrainIntra,
    /// Split + intra training + routed evaluation for several ratios.
    Sweep(SweepArgs),
    /// Score-routed enhancement of a directory.
    Enhance(EnhanceArgs),
    /// Evaluate one ablation variant.
    Ablate(AblateArgs),
    /// Print the effective config as TOML.
    Config,
    /// Generate data, train every phase and report all variants, per seed.
    Desk(DeskArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Directory of clean scene PNGs; procedural scenes are used when absent.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    #[arg(long, default_value_t = 24)]
    pub procedural: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub per_type: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub side: usize,
    /// Stand-in real images for training (written to real/train).
    #[arg(long, default_value_t = 0)]
    pub real: usize,
    /// Stand-in real images held out (written to real/heldout).
    #[arg(long, default_value_t = 0)]
    pub heldout: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference directory; files are matched by name.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "uciqe,uiqm")]
    pub metrics: Vec<String>,
    /// Report path; `.txt` and `.json` are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Scorer checkpoint stem, needed for the ruiqa metric.
    #[arg(long)]
    pub scorer: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum RuiqaCommand {
    /// Pretrain a backbone on rank pairs from the MOS fixture.
    TrainRanker(RankerArgs),
    /// Fine-tune a scorer on MOS labels.
    Finetune(FinetuneArgs),
    /// Write one `path score` line per image.
    Score(ScoreArgs),
}

#[derive(Args, Debug)]
pub struct RankerArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixture image side.
    #[arg(long, default_value_t = 32)]
    pub side: usize,
}

#[derive(Args, Debug)]
pub struct FinetuneArgs {
    /// Backbone checkpoint stem; a fresh trunk is used when absent.
    #[arg(long)]
    pub backbone: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON lines of `{"path": ..., "mos": ...}`; the fixture's labelled scenes when absent.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub side: usize,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub scorer: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Overrides the configured ratio.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambdas: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EnhanceArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Split manifest holding the routing threshold.
    #[arg(long)]
    pub threshold_from: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// BL, BL+ITE, BL+ITE+ITA, or an IQA variant (UIQA, PUIQA, RUIQA).
    #[arg(long)]
    pub variant: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DeskArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Side of the MOS fixture the scorer is trained on.
    #[arg(long, default_value_t = 32)]
    pub scorer_side: usize,
}

/// Parses arguments, runs the command and maps errors to exit codes.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error [{}]: {}", e.category(), e);
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Eval(a) => eval(&a),
        Command::Ruiqa(RuiqaCommand::TrainRanker(a)) => train_ranker_cmd(&a),
        Command::Ruiqa(RuiqaCommand::Finetune(a)) => finetune_cmd(&a),
        Command::Ruiqa(RuiqaCommand::Score(a)) => score_cmd(&a),
        Command::TrainBaseline => train_baseline_cmd(&cfg),
        Command::TrainInter => train_inter_cmd(&cfg),
        Command::Split(a) => split_cmd(&cfg, &a),
        Command::TrainIntra => train_intra_cmd(&cfg),
        Command::Sweep(a) => sweep_cmd(&cfg, &a),
        Command::Enhance(a) => enhance_cmd(&cfg, &a),
        Command::Ablate(a) => ablate_cmd(&cfg, &a),
        Command::Config => {
            print!("{}", config::to_toml(&cfg)?);
            Ok(())
        }
        Command::Desk(a) => desk_cmd(&a),
    }
}

fn ckpt(cfg: &RunConfig, name: &str) -> PathBuf {
    Path::new(&cfg.checkpoint_dir).join(name)
}

fn meta(cfg: &RunConfig, epoch: Option<usize>) -> CheckpointMeta {
    CheckpointMeta { seed: cfg.seed, epoch, lambda: Some(cfg.lambda), threshold: None, weights: Some(cfg.weights.clone()) }
}

fn load_scorer(cfg: &RunConfig) -> Result<Scorer> {
    load_model(&ckpt(cfg, "scorer"), "scorer")
}

fn synth(a: &SynthArgs) -> Result<()> {
    let scenes: Vec<UnitImage> = match &a.scenes {
        Some(dir) => load_dir(dir)?.into_iter().map(|(_, img)| img).collect(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ 0x5ce9e);
            (0..a.procedural).map(|_| procedural_scene(a.side, a.side, &mut rng)).collect()
        }
    };
    let ds = build_dataset(&scenes, &DatasetConfig { per_type: a.per_type, side: a.side, seed: a.seed, ..Default::default() })?;
    for (path, img) in &ds.images {
        write_png(&a.out.join(path), img)?;
    }
    write_jsonl(&a.out.join(DATASET_MANIFEST), &ds.manifest.records)?;
    info!("wrote {} pairs to {}", ds.manifest.records.len(), a.out.display());
    if a.real + a.heldout > 0 {
        let real = generate_real(&RealDomainConfig {
            count: a.real + a.heldout,
            side: a.side,
            seed: a.seed.wrapping_add(1),
            ..Default::default()
        })?;
        for (i, s) in real.iter().enumerate() {
            let sub = if i < a.real { "real/train" } else { "real/heldout" };
            write_png(&a.out.join(sub).join(format!("{}.png", s.id)), &s.image)?;
        }
        info!("wrote {} real images ({} held out)", real.len(), a.heldout);
    }
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let kinds = a.metrics.iter().map(|m| MetricKind::parse(m.trim())).collect::<uwda_core::Result<Vec<_>>>()?;
    let preds = load_dir(&a.pred)?;
    let refs = match &a.reference {
        Some(dir) => Some(
            preds
                .iter()
                .map(|(id, _)| read_png(&dir.join(format!("{}.png", id))))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let scorer: Option<Scorer> = match &a.scorer {
        Some(stem) => Some(load_model(stem, "scorer")?),
        None => None,
    };
    let ruiqa = scorer.as_ref().map(|s| move |img: &UnitImage| Ok(s.score(std::slice::from_ref(img))?[0]));
    let ruiqa_ref = ruiqa.as_ref().map(|f| f as &dyn Fn(&UnitImage) -> uwda_core::Result<f64>);
    let report = evaluate(&preds, refs.as_deref(), &kinds, ruiqa_ref)?;
    let table = metric_table(&report);
    print!("{}", table);
    write_report(&a.out, &table, &report)?;
    Ok(())
}

fn protocol(seed: u64, side: usize) -> IqaProtocol {
    let mut p = IqaProtocol::default().seeded(seed);
    p.fixture.side = side;
    p
}

fn train_ranker_cmd(a: &RankerArgs) -> Result<()> {
    let p = protocol(a.seed, a.side);
    let (rank, _, _) = p.data()?;
    let mut backbone = RankBackbone::new(p.recipe.backbone.clone());
    let pairs = make_rank_pairs_grouped(&rank.records, &rank.groups, p.recipe.per_image_pairs, p.recipe.rank.fit.seed)?;
    let hist = train_ranker(&mut backbone, &pairs, &rank.normalized(), &p.recipe.rank)?;
    info!("{} rank pairs, final loss {:.4}", pairs.len(), hist.last().copied().unwrap_or(f64::NAN));
    save_model(&a.out, &backbone, CheckpointMeta { seed: a.seed, ..Default::default() })
}

#[derive(serde::Deserialize)]
struct MosLabel {
    path: PathBuf,
    mos: f64,
}

fn finetune_cmd(a: &FinetuneArgs) -> Result<()> {
    let p = protocol(a.seed, a.side);
    let backbone = match &a.backbone {
        Some(stem) => load_model(stem, "backbone")?,
        None => RankBackbone::new(p.recipe.backbone.clone()),
    };
    let (scorer, held) = match &a.labels {
        Some(path) => {
            let labels: Vec<MosLabel> = read_jsonl(path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            let imgs = labels.iter().map(|l| Ok(normalize(&read_png(&base.join(&l.path))?))).collect::<Result<Vec<_>>>()?;
            let mos: Vec<f64> = labels.iter().map(|l| l.mos).collect();
            (finetune_scorer(&backbone, &imgs, &mos, &p.recipe.finetune)?.0, None)
        }
        None => {
            let (_, labelled, test) = p.data()?;
            (finetune_scorer(&backbone, &labelled.normalized(), &labelled.mos(), &p.recipe.finetune)?.0, Some(test))
        }
    };
    if let Some(test) = held {
        let (s, pl) = uwda_core::ruiqa::evaluate_scorer(&scorer, &test)?;
        info!("held-out fixture SROCC {:.4} PLCC {:.4}", s, pl);
    }
    save_model(&a.out, &scorer, CheckpointMeta { seed: a.seed, ..Default::default() })
}

/// `path score` lines with four decimals.
pub fn format_scores(paths: &[PathBuf], scores: &[f64]) -> String {
    paths.iter().zip(scores).map(|(p, s)| format!("{} {:.4}\n", p.display(), s)).collect()
}

fn score_cmd(a: &ScoreArgs) -> Result<()> {
    let scorer: Scorer = load_model(&a.scorer, "scorer")?;
    let paths = crate::io::list_pngs(&a.images)?;
    let imgs = paths.iter().map(|p| read_png(p)).collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = predict_batch(&scorer, &imgs)?.into_iter().map(|s| s.value()).collect();
    write_text(&a.out, &format_scores(&paths, &scores))
}

fn train_baseline_cmd(cfg: &RunConfig) -> Result<()> {
    let synth = training_pairs(&config::existing(&cfg.synth_dir, "synth_dir")?)?;
    let mut enhancer = Enhancer::new(cfg.nets.enhancer.clone());
    let hist = train_baseline(&synth, &mut enhancer, &FeatureExtractor::default(), &cfg.weights, &cfg.inter)?;
    write_json(&ckpt(cfg, "baseline_log.json"), &hist)?;
    save_model(&ckpt(cfg, "baseline"), &enhancer, meta(cfg, Some(cfg.inter.total_epochs())))
}

/// Epoch hook that writes every network of the phase under `epochs/`.
fn epoch_writer<'a>(cfg: &'a RunConfig, prefix: &'a str) -> impl FnMut(usize, &AdaptNets) -> uwda_core::Result<()> + 'a {
    move |epoch, nets| {
        let dir = ckpt(cfg, "epochs");
        save_nets(&dir, &format!("{}_e{:03}", prefix, epoch), nets, &meta(cfg, Some(epoch)))
            .map_err(|e| uwda_core::Error::Checkpoint(e.to_string()))
    }
}

fn train_inter_cmd(cfg: &RunConfig) -> Result<()> {
    let synth = training_pairs(&config::existing(&cfg.synth_dir, "synth_dir")?)?;
    let (_, real) = load_real_toned(&config::existing(&cfg.real_dir, "real_dir")?)?;
    let mut nets = AdaptNets::new(&cfg.nets);
    let mut hook = epoch_writer(cfg, "inter");
    let log = train_inter(&synth, &real, &mut nets, &FeatureExtractor::default(), &cfg.weights, &cfg.inter, &mut hook)?;
    write_jsonl(&ckpt(cfg, "inter_log.jsonl"), &log.steps)?;
    save_nets(Path::new(&cfg.checkpoint_dir), "inter", &nets, &meta(cfg, Some(cfg.inter.total_epochs())))
}

fn split_cmd(cfg: &RunConfig, a: &SplitArgs) -> Result<()> {
    let lambda = a.lambda.unwrap_or(cfg.lambda);
    let (ids, real) = load_real_toned(&config::existing(&cfg.real_dir, "real_dir")?)?;
    let inter: Enhancer = load_model(&ckpt(cfg, "inter_enhancer"), "inter enhancer")?;
    let scorer = load_scorer(cfg)?;
    let images: Vec<NormImage> = real.into_iter().map(|t| t.image).collect();
    let split = split_easy_hard(&images, &scorer, &inter, lambda)?;
    let manifest = SplitManifest::from_split(&split, &ids);
    info!("{} easy / {} hard, threshold {:.4}", manifest.easy.len(), manifest.hard.len(), manifest.threshold);
    write_json(Path::new(&cfg.split_manifest), &manifest)
}

/// Rebuilds the split from a manifest: easy images get fresh pseudo labels
/// from the inter enhancer.
pub fn split_from_manifest(m: &SplitManifest, ids: &[String], images: &[NormImage], inter: &dyn ImageModel) -> Result<SplitResult> {
    let find = |id: &str| {
        ids.iter().position(|x| x == id).ok_or_else(|| CliError::Config(format!("split manifest names unknown image `{}`", id)))
    };
    let easy_idx = m.easy.iter().map(|e| find(&e.id)).collect::<Result<Vec<_>>>()?;
    let raws: Vec<NormImage> = easy_idx.iter().map(|&i| images[i].clone()).collect();
    let pseudo = inter.enhance(&raws)?;
    let easy = easy_idx
        .iter()
        .zip(raws)
        .zip(pseudo)
        .zip(&m.easy)
        .map(|(((&index, raw), pseudo), e)| EasySample { index, raw, pseudo, score: e.score })
        .collect();
    let hard = m
        .hard
        .iter()
        .map(|h| Ok(HardSample { index: find(&h.id)?, raw: images[find(&h.id)?].clone(), score: h.score }))
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitResult { easy, hard, threshold: m.threshold, lambda: m.lambda })
}

fn train_intra_cmd(cfg: &RunConfig) -> Result<()> {
    let manifest = SplitManifest::load(&config::existing(&cfg.split_manifest, "split_manifest")?)?;
    let (ids, real) = load_real_toned(&config::existing(&cfg.real_dir, "real_dir")?)?;
    let images: Vec<NormImage> = real.into_iter().map(|t| t.image).collect();
    let inter: Enhancer = load_model(&ckpt(cfg, "inter_enhancer"), "inter enhancer")?;
    let split = split_from_manifest(&manifest, &ids, &images, &inter)?;
    let mut hook = epoch_writer(cfg, "intra");
    let (nets, log) =
        train_intra(&split, &inter, &cfg.nets, &FeatureExtractor::default(), &cfg.weights, &cfg.intra, &mut hook)?;
    write_jsonl(&ckpt(cfg, "intra_log.jsonl"), &log.steps)?;
    let mut m = meta(cfg, Some(cfg.intra.total_epochs()));
    m.lambda = Some(manifest.lambda);
    m.threshold = Some(manifest.threshold);
    save_nets(Path::new(&cfg.checkpoint_dir), "intra", &nets, &m)
}

fn sweep_cmd(cfg: &RunConfig, a: &SweepArgs) -> Result<()> {
    let (_, real) = load_real_toned(&config::existing(&cfg.real_dir, "real_dir")?)?;
    let train_real: Vec<NormImage> = real.into_iter().map(|t| t.image).collect();
    let heldout: Vec<NormImage> =
        load_real(&config::existing(&cfg.heldout_dir, "heldout_dir")?)?.into_iter().map(|(_, x)| x).collect();
    let inter: Enhancer = load_model(&ckpt(cfg, "inter_enhancer"), "inter enhancer")?;
    let scorer = load_scorer(cfg)?;
    let phi = FeatureExtractor::default();
    let setup = SweepSetup {
        train_real: &train_real,
        heldout: &heldout,
        inter: &inter,
        scorer: &scorer,
        phi: &phi,
        nets: cfg.nets.clone(),
        weights: cfg.weights.clone(),
        train: cfg.intra.clone(),
    };
    let rows = sweep_lambda(&a.lambdas, &setup);
    let mut table = format!("{:>8} {:>10} {:>10}\n", "lambda", "ruiqa", "threshold");
    for r in &rows {
        match (r.mean_ruiqa, r.threshold) {
            (Some(m), Some(t)) => table += &format!("{:>8.3} {:>10.4} {:>10.4}\n", r.lambda, m, t),
            _ => table += &format!("{:>8.3} failed: {}\n", r.lambda, r.error.as_deref().unwrap_or("?")),
        }
    }
    print!("{}", table);
    let out = a.out.clone().unwrap_or_else(|| Path::new(&cfg.out_dir).join("sweep"));
    write_report(&out, &table, &rows)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct RouteRecord<'a> {
    id: &'a str,
    route: uwda_core::pipeline::Route,
    score: f64,
    threshold: f64,
}

fn enhance_cmd(cfg: &RunConfig, a: &EnhanceArgs) -> Result<()> {
    let split_path = a.threshold_from.clone().unwrap_or_else(|| PathBuf::from(&cfg.split_manifest));
    let threshold = SplitManifest::load(&split_path)?.threshold;
    let inputs = load_real(&a.input)?;
    let inter: Enhancer = load_model(&ckpt(cfg, "inter_enhancer"), "inter enhancer")?;
    let intra: Option<Enhancer> = match load_model(&ckpt(cfg, "intra_enhancer"), "intra enhancer") {
        Ok(m) => Some(m),
        Err(CliError::Core(uwda_core::Error::MissingModel(_))) => None,
        Err(e) => return Err(e),
    };
    let scorer = load_scorer(cfg)?;
    let images: Vec<NormImage> = inputs.iter().map(|(_, x)| x.clone()).collect();
    let routed = enhance_batch(&images, &inter, intra.as_ref().map(|m| m as &dyn ImageModel), &scorer, threshold)?;
    let mut records = Vec::with_capacity(routed.len());
    for ((id, _), r) in inputs.iter().zip(&routed) {
        write_png(&a.out.join(format!("{}.png", id)), &r.image)?;
        records.push(RouteRecord { id, route: r.route, score: r.score, threshold });
    }
    write_jsonl(&a.out.join("routes.jsonl"), &records)
}

fn ablate_cmd(cfg: &RunConfig, a: &AblateArgs) -> Result<()> {
    let variant = match AblationSpec::parse(&a.variant)? {
        AblationSpec::Enhancement(v) => v,
        AblationSpec::Iqa(v) => return ablate_iqa(cfg, v, a.out.as_deref()),
    };
    let real = load_real(&config::existing(&cfg.heldout_dir, "heldout_dir")?)?;
    let synthetic = match Path::new(&cfg.synth_dir).join(DATASET_MANIFEST).exists() {
        true => test_pairs(Path::new(&cfg.synth_dir))?,
        false => Vec::new(),
    };
    let scorer = load_scorer(cfg)?;
    let need = |name: &str| -> Result<Enhancer> {
        load_model(&ckpt(cfg, name), name).map_err(|e| match e {
            CliError::Core(uwda_core::Error::MissingModel(m)) => {
                uwda_core::Error::MissingModel(format!("variant {}: {}", variant.name(), m)).into()
            }
            other => other,
        })
    };
    let baseline = if variant == Variant::Bl { Some(need("baseline")?) } else { None };
    let inter = if variant != Variant::Bl { Some(need("inter_enhancer")?) } else { None };
    let (intra, threshold) = if variant == Variant::BlIteIta {
        let m = SplitManifest::load(&config::existing(&cfg.split_manifest, "split_manifest")?)?;
        (Some(need("intra_enhancer")?), Some(m.threshold))
    } else {
        (None, None)
    };
    let models = AblationModels {
        baseline: baseline.as_ref().map(|m| m as &dyn ImageModel),
        inter: inter.as_ref().map(|m| m as &dyn ImageModel),
        intra: intra.as_ref().map(|m| m as &dyn ImageModel),
        scorer: &scorer,
        threshold,
    };
    let report = run_ablation(variant, &models, &AblationData { real: &real, synthetic: &synthetic })?;
    let mut table = ablation_table(std::slice::from_ref(&report));
    table += "\n";
    table += &metric_table(&report.real);
    print!("{}", table);
    let out = a.out.clone().unwrap_or_else(|| Path::new(&cfg.out_dir).join(format!("ablate_{}", variant.name())));
    write_report(&out, &table, &report)?;
    Ok(())
}

fn ablate_iqa(cfg: &RunConfig, v: IqaVariant, out: Option<&Path>) -> Result<()> {
    let r = IqaProtocol::default().run(v, cfg.seed)?;
    let table = format!("{:<8} seed={} srocc={:.4} plcc={:.4}\n", v.name(), r.seed, r.srocc, r.plcc);
    print!("{}", table);
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| Path::new(&cfg.out_dir).join(format!("ablate_{}", v.name())));
    write_report(&out, &table, &r)?;
    Ok(())
}

fn desk_cmd(a: &DeskArgs) -> Result<()> {
    let p = protocol(0, a.scorer_side);
    let (rank, labelled, _) = p.data()?;
    let scorer = uwda_core::ruiqa::train_scorer(IqaVariant::Ruiqa, &rank, &labelled, &p.recipe)?;
    let cfg = DeskConfig::default();
    let mut all = Vec::new();
    let mut table = String::new();
    for &seed in &a.seeds {
        let outcome = run_desk(&cfg, &scorer, seed)?;
        table += &format!("seed {}\n{}", seed, ablation_table(&outcome.reports));
        print!("seed {}\n{}", seed, ablation_table(&outcome.reports));
        all.push(outcome.reports);
    }
    write_report(&a.out, &table, &all)?;
    Ok(())
}

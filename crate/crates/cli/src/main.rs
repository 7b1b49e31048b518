//! `lfr` — synthetic corpus generation, enrollment, 1:N search, evaluation
//! and benchmarking for the fused local/global fingerprint engine.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage/configuration error.

mod config;

use std::collections::HashMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use config::EngineConfig;
use lfr_core::codec::{decode_template, encode_template};
use lfr_core::ingest::ingest_external;
use lfr_core::mask::{binarize_ridge_image, mask_to_image, read_pgm, write_pgm};
use lfr_core::metrics::{auth_metrics, cmc, open_set, Trial, TrialSet};
use lfr_core::search::{
    measure_latency, predict_latency, search, Gallery, LatencyModel, SearchError, StageScores,
};
use lfr_core::synth::{
    synth_master_with, synth_observe, NoRealignProvider, ObservationParams, RealignProvider,
    SynthesisConfig, SyntheticRealignProvider,
};
use lfr_core::template::{FingerprintTemplate, Modality};

#[derive(Parser)]
#[command(name = "lfr", version, about = "Latent fingerprint 1:N search engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus: gallery, probes, ground truth.
    Synth(SynthArgs),
    /// Add encoded templates to an existing corpus gallery.
    Enroll(EnrollArgs),
    /// Run the three-stage search for every probe in a corpus.
    Search(SearchArgs),
    /// Compute evaluation metrics from search results.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Measure per-stage latency on a corpus and report Eq.-1 consistency.
    Bench(BenchArgs),
    /// Evaluate the closed-form latency model.
    Latency(LatencyArgs),
    /// Post-process a ridge image into a segmentation mask.
    Mask(MaskArgs),
    /// Convert text-format features into a binary template.
    Ingest(IngestArgs),
    /// Configuration helpers.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Enrolled identities (gallery size N).
    #[arg(long)]
    identities: usize,
    /// Mated probes (assigned round-robin to identities).
    #[arg(long)]
    probes: usize,
    /// Additional unmated probes from identities outside the gallery.
    #[arg(long, default_value_t = 0)]
    unmated: usize,
    /// Smaller fingers: faster matching for large-N runs.
    #[arg(long)]
    compact: bool,
    /// Minimal fingers: fastest matching, for very large sweeps.
    #[arg(long, conflicts_with = "compact")]
    tiny: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnrollArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Binary template files to enroll, in order.
    #[arg(long, required = true, num_args = 1..)]
    template: Vec<PathBuf>,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Drop the realignment term even when ground truth is available.
    #[arg(long)]
    no_realign: bool,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// JSONL output: {probe_id, rank, gallery_id, score, stage_scores}.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Closed-set CMC; every probe must be mated.
    Closed(EvalClosedArgs),
    /// Open-set FNIR/FPIR with an operating point.
    Open(EvalOpenArgs),
    /// Verification TAR@FAR and EER from mate/non-mate scores.
    Auth(EvalAuthArgs),
}

#[derive(Args)]
struct EvalClosedArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 20)]
    max_rank: usize,
    #[arg(long)]
    out_csv: PathBuf,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct EvalOpenArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0.02)]
    fpir: f64,
    #[arg(long)]
    out_csv: PathBuf,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct EvalAuthArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out_json: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LatencyArgs {
    #[arg(long)]
    t1: f64,
    #[arg(long)]
    t2: f64,
    #[arg(long)]
    t3: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    l: usize,
}

#[derive(Args)]
struct MaskArgs {
    /// Ridge image, PGM (P5).
    #[arg(long)]
    input: PathBuf,
    /// Output mask, PGM with values {0, 255}.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Directory with meta.txt, minutiae.csv, descriptors.csv, embedding.csv.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Print the effective configuration as key=value text.
    Dump {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Errors that are the caller's fault exit with 2, everything else with 1.
enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => cmd_synth(args).map_err(Into::into),
        Command::Enroll(args) => cmd_enroll(args).map_err(Into::into),
        Command::Search(args) => cmd_search(args),
        Command::Eval(EvalCommand::Closed(args)) => cmd_eval_closed(args).map_err(Into::into),
        Command::Eval(EvalCommand::Open(args)) => cmd_eval_open(args).map_err(Into::into),
        Command::Eval(EvalCommand::Auth(args)) => cmd_eval_auth(args).map_err(Into::into),
        Command::Bench(args) => cmd_bench(args),
        Command::Latency(args) => cmd_latency(args),
        Command::Mask(args) => cmd_mask(args).map_err(Into::into),
        Command::Ingest(args) => cmd_ingest(args).map_err(Into::into),
        Command::Config(ConfigCommand::Dump { config }) => {
            let cfg = load_engine_config(config.as_deref())?;
            print!("{}", cfg.dump());
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- corpus io

#[derive(serde::Serialize, serde::Deserialize)]
struct ManifestEntry {
    id: String,
    file: String,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ProbeEntry {
    probe_id: String,
    mate_id: Option<String>,
    file: String,
}

const MANIFEST_FILE: &str = "manifest.json";
const PROBES_FILE: &str = "probes.json";
const TRUTH_FILE: &str = "truth.json";
const GALLERY_DIR: &str = "gallery";
const PROBES_DIR: &str = "probes";

/// Writes via a temp file in the same directory plus rename, so readers never
/// observe a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)
        .with_context(|| format!("creating {}", parent.display()))?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn load_template(path: &Path) -> Result<FingerprintTemplate> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_template(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn load_gallery(corpus: &Path) -> Result<Gallery> {
    let manifest: Vec<ManifestEntry> = read_json(&corpus.join(MANIFEST_FILE))?;
    let templates: Vec<FingerprintTemplate> = manifest
        .par_iter()
        .map(|entry| load_template(&corpus.join(GALLERY_DIR).join(&entry.file)))
        .collect::<Result<_>>()?;
    let mut gallery = Gallery::new();
    for (entry, template) in manifest.iter().zip(templates) {
        if template.id != entry.id {
            bail!(
                "manifest id {:?} does not match template id {:?}",
                entry.id,
                template.id
            );
        }
        gallery
            .enroll(template)
            .map_err(|e| anyhow!(e.to_string()))?;
    }
    Ok(gallery)
}

fn load_probes(corpus: &Path) -> Result<(Vec<ProbeEntry>, Vec<FingerprintTemplate>)> {
    let entries: Vec<ProbeEntry> = read_json(&corpus.join(PROBES_FILE))?;
    let templates = entries
        .par_iter()
        .map(|entry| load_template(&corpus.join(PROBES_DIR).join(&entry.file)))
        .collect::<Result<_>>()?;
    Ok((entries, templates))
}

enum Provider {
    Synthetic(SyntheticRealignProvider),
    None(NoRealignProvider),
}

impl Provider {
    fn as_dyn(&self) -> &dyn RealignProvider {
        match self {
            Provider::Synthetic(p) => p,
            Provider::None(p) => p,
        }
    }
}

fn load_provider(corpus: &Path, no_realign: bool) -> Result<Provider> {
    let path = corpus.join(TRUTH_FILE);
    if no_realign || !path.exists() {
        return Ok(Provider::None(NoRealignProvider));
    }
    Ok(Provider::Synthetic(read_json(&path)?))
}

fn load_engine_config(path: Option<&Path>) -> Result<EngineConfig, CliError> {
    match path {
        None => Ok(EngineConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(CliError::Runtime)?;
            EngineConfig::parse(&p.display().to_string(), &text)
                .map_err(|e| CliError::Usage(e.to_string()))
        }
    }
}

fn resolve_engine(args: &EngineArgs) -> Result<EngineConfig, CliError> {
    let mut cfg = load_engine_config(args.config.as_deref())?;
    if let Some(k) = args.k {
        cfg.stage.k = k;
    }
    if let Some(l) = args.l {
        cfg.stage.l = l;
    }
    if let Some(threads) = args.threads {
        cfg.threads = threads;
    }
    cfg.stage
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    Ok(pool.install(f))
}

// ------------------------------------------------------------------- synth

fn cmd_synth(args: SynthArgs) -> Result<()> {
    if args.identities == 0 {
        bail!("need at least one identity");
    }
    let synth_cfg = if args.tiny {
        SynthesisConfig::tiny()
    } else if args.compact {
        SynthesisConfig::compact()
    } else {
        SynthesisConfig::default()
    };
    let out = &args.out;
    fs::create_dir_all(out.join(GALLERY_DIR))?;
    fs::create_dir_all(out.join(PROBES_DIR))?;

    // gallery: one rolled-quality observation per identity
    let gallery: Vec<_> = (0..args.identities)
        .into_par_iter()
        .map(|i| {
            let master = synth_master_with(&synth_cfg, args.seed, i as u64);
            let id = format!("g{i:06}");
            let obs = synth_observe(
                &master,
                &ObservationParams::gallery_default(),
                1,
                &id,
                Modality::Rolled,
            )
            .map_err(|e| anyhow!(e.to_string()))?;
            let bytes = encode_template(&obs.template).map_err(|e| anyhow!(e.to_string()))?;
            Ok((id, obs.truth, bytes))
        })
        .collect::<Result<_>>()?;

    // probes: mated round-robin, then unmated from unenrolled identities
    let probes: Vec<_> = (0..args.probes + args.unmated)
        .into_par_iter()
        .map(|p| {
            let (identity, mate) = if p < args.probes {
                let identity = p % args.identities;
                (identity, Some(format!("g{identity:06}")))
            } else {
                (args.identities + (p - args.probes), None)
            };
            let master = synth_master_with(&synth_cfg, args.seed, identity as u64);
            let id = format!("p{p:06}");
            let obs = synth_observe(
                &master,
                &ObservationParams::probe_default(),
                1_000 + p as u64,
                &id,
                Modality::Latent,
            )
            .map_err(|e| anyhow!(e.to_string()))?;
            let bytes = encode_template(&obs.template).map_err(|e| anyhow!(e.to_string()))?;
            Ok((id, mate, obs.truth, bytes))
        })
        .collect::<Result<_>>()?;

    let mut provider = SyntheticRealignProvider::default();
    let mut manifest = Vec::with_capacity(gallery.len());
    for (id, truth, bytes) in &gallery {
        let file = format!("{id}.lfrt");
        write_atomic(&out.join(GALLERY_DIR).join(&file), bytes)?;
        provider.record(id, truth);
        manifest.push(ManifestEntry {
            id: id.clone(),
            file,
        });
    }
    let mut probe_entries = Vec::with_capacity(probes.len());
    for (id, mate, truth, bytes) in &probes {
        let file = format!("{id}.lfrt");
        write_atomic(&out.join(PROBES_DIR).join(&file), bytes)?;
        provider.record(id, truth);
        probe_entries.push(ProbeEntry {
            probe_id: id.clone(),
            mate_id: mate.clone(),
            file,
        });
    }
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    write_json(&out.join(PROBES_FILE), &probe_entries)?;
    write_json(&out.join(TRUTH_FILE), &provider)?;
    println!(
        "synthesized {} gallery templates, {} probes ({} unmated) into {}",
        gallery.len(),
        probes.len(),
        args.unmated,
        out.display()
    );
    Ok(())
}

fn cmd_enroll(args: EnrollArgs) -> Result<()> {
    let manifest_path = args.corpus.join(MANIFEST_FILE);
    let mut manifest: Vec<ManifestEntry> = if manifest_path.exists() {
        read_json(&manifest_path)?
    } else {
        Vec::new()
    };
    for path in &args.template {
        let template = load_template(path)?;
        if manifest.iter().any(|e| e.id == template.id) {
            bail!("gallery already contains id {:?}", template.id);
        }
        let file = format!("{}.lfrt", template.id);
        let bytes = fs::read(path)?;
        write_atomic(&args.corpus.join(GALLERY_DIR).join(&file), &bytes)?;
        manifest.push(ManifestEntry {
            id: template.id,
            file,
        });
    }
    write_json(&manifest_path, &manifest)?;
    println!("gallery size: {}", manifest.len());
    Ok(())
}

// ------------------------------------------------------------------ search

#[derive(serde::Serialize, serde::Deserialize)]
struct ResultLine {
    probe_id: String,
    rank: usize,
    gallery_id: String,
    score: f64,
    stage_scores: StageScores,
}

fn cmd_search(args: SearchArgs) -> Result<(), CliError> {
    let cfg = resolve_engine(&args.engine)?;
    let corpus = &args.engine.corpus;
    let gallery = load_gallery(corpus)?;
    let (_, probe_templates) = load_probes(corpus)?;
    let provider = load_provider(corpus, args.engine.no_realign)?;

    let mut lines = String::new();
    in_pool(cfg.threads, || -> Result<(), SearchError> {
        for probe in &probe_templates {
            let result = search(probe, &gallery, &cfg.stage, &cfg.lssr, provider.as_dyn())?;
            for (rank0, cand) in result.candidates.iter().enumerate() {
                let line = ResultLine {
                    probe_id: probe.id.clone(),
                    rank: rank0 + 1,
                    gallery_id: cand.gallery_id.clone(),
                    score: cand.score,
                    stage_scores: cand.stage_scores,
                };
                lines.push_str(&serde_json::to_string(&line).expect("serializable"));
                lines.push('\n');
            }
        }
        Ok(())
    })
    .map_err(CliError::Runtime)?
    .map_err(|e| CliError::Runtime(anyhow!(e.to_string())))?;

    write_atomic(&args.out, lines.as_bytes()).map_err(CliError::Runtime)?;
    Ok(())
}

// -------------------------------------------------------------------- eval

fn load_trials(results: &Path, corpus: &Path) -> Result<TrialSet> {
    let entries: Vec<ProbeEntry> = read_json(&corpus.join(PROBES_FILE))?;
    let text =
        fs::read_to_string(results).with_context(|| format!("reading {}", results.display()))?;
    let mut by_probe: HashMap<String, Vec<(usize, String, f64)>> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ResultLine = serde_json::from_str(line)
            .with_context(|| format!("{}:{}", results.display(), idx + 1))?;
        by_probe.entry(parsed.probe_id).or_default().push((
            parsed.rank,
            parsed.gallery_id,
            parsed.score,
        ));
    }

    // keep probe-manifest order so metrics are deterministic
    let mut trials = Vec::new();
    for entry in &entries {
        let Some(mut rows) = by_probe.remove(&entry.probe_id) else {
            continue;
        };
        rows.sort_by_key(|r| r.0);
        trials.push(Trial {
            probe_id: entry.probe_id.clone(),
            mate_id: entry.mate_id.clone(),
            candidates: rows.into_iter().map(|(_, id, score)| (id, score)).collect(),
        });
    }
    if !by_probe.is_empty() {
        bail!(
            "results mention probes missing from the corpus manifest: {:?}",
            by_probe.keys().take(3).collect::<Vec<_>>()
        );
    }
    Ok(TrialSet { trials })
}

fn cmd_eval_closed(args: EvalClosedArgs) -> Result<()> {
    let trials = load_trials(&args.results, &args.corpus)?;
    let curve = cmc(&trials, args.max_rank).map_err(|e| anyhow!(e.to_string()))?;
    write_atomic(&args.out_csv, curve.to_csv().as_bytes())?;
    if let Some(path) = &args.out_json {
        write_json(path, &curve)?;
    }
    println!("rank-1: {:.4}", curve.points[0].1);
    Ok(())
}

fn cmd_eval_open(args: EvalOpenArgs) -> Result<()> {
    let trials = load_trials(&args.results, &args.corpus)?;
    let curve = open_set(&trials, args.fpir).map_err(|e| anyhow!(e.to_string()))?;
    write_atomic(&args.out_csv, curve.to_csv().as_bytes())?;
    if let Some(path) = &args.out_json {
        write_json(path, &curve)?;
    }
    let (name, value) = &curve.operating_points[0];
    println!("{name}: {value:.4}");
    Ok(())
}

fn cmd_eval_auth(args: EvalAuthArgs) -> Result<()> {
    let trials = load_trials(&args.results, &args.corpus)?;
    let mut genuine = Vec::new();
    let mut imposter = Vec::new();
    for trial in &trials.trials {
        for (id, score) in &trial.candidates {
            if trial.mate_id.as_deref() == Some(id.as_str()) {
                genuine.push(*score);
            } else {
                imposter.push(*score);
            }
        }
    }
    let metrics =
        auth_metrics(&genuine, &imposter, &[1e-4, 1e-3]).map_err(|e| anyhow!(e.to_string()))?;
    write_json(&args.out_json, &metrics)?;
    println!("eer: {:.4}", metrics.eer);
    Ok(())
}

// ------------------------------------------------------------------- bench

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let cfg = resolve_engine(&args.engine)?;
    let corpus = &args.engine.corpus;
    let gallery = load_gallery(corpus)?;
    let (_, probes) = load_probes(corpus)?;
    let provider = load_provider(corpus, args.engine.no_realign)?;
    let report = in_pool(cfg.threads, || {
        measure_latency(&gallery, &probes, &cfg.stage, &cfg.lssr, provider.as_dyn())
    })
    .map_err(CliError::Runtime)?
    .map_err(|e| CliError::Runtime(anyhow!(e.to_string())))?;
    write_json(&args.out, &report).map_err(CliError::Runtime)?;
    println!(
        "measured {:.6} ms/comparison, predicted {:.6} ms/comparison",
        report.measured_per_comparison_ms, report.predicted_per_comparison_ms
    );
    Ok(())
}

fn cmd_latency(args: LatencyArgs) -> Result<(), CliError> {
    let model = LatencyModel {
        t1: args.t1,
        t2: args.t2,
        t3: args.t3,
        n: args.n,
        k: args.k,
        l: args.l,
    };
    let t = predict_latency(&model).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("{t:.3}");
    Ok(())
}

fn cmd_mask(args: MaskArgs) -> Result<()> {
    let file = fs::File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let image = read_pgm(&mut BufReader::new(file))
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mask = binarize_ridge_image(&image);
    let mut bytes = Vec::new();
    write_pgm(&mut bytes, &mask_to_image(&mask))?;
    write_atomic(&args.output, &bytes)?;
    println!("mask area: {} px", mask.area());
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let template = ingest_external(&args.dir).map_err(|e| anyhow!(e.to_string()))?;
    let bytes = encode_template(&template).map_err(|e| anyhow!(e.to_string()))?;
    write_atomic(&args.out, &bytes)?;
    println!(
        "ingested {:?}: {} minutiae, {} virtual",
        template.id,
        template.minutiae.len(),
        template.virtual_minutiae.len()
    );
    Ok(())
}

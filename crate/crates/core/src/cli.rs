//! The `dsu` command line.
//!
//! Every subcommand reads the optional `--config` file first and then lets
//! its own flags override individual keys. Randomness comes from the single
//! top-level seed, split into fixed streams:
//!
//! | stream | consumer |
//! |--------|----------|
//! | 0 | k-means initialisation and mini-batch sampling |
//! | 1 | time masking; sequence `i` uses sub-stream `i` of stream 1 |
//!
//! Exit status is 0 on success, 1 for usage and configuration errors and 2
//! for data, format and I/O errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{debug, info};

use crate::analysis::{
    corpus_stats, ctc_feasibility, required_input_length, CtcBound, FeasibilityReport, StageLengths,
    SubsampleKind, SubsampleSpec,
};
use crate::bpe::{bpe_decode, bpe_encode, bpe_train, BpeModel};
use crate::cca::{cca_score, select_layer, CcaInput, DEFAULT_REG_EPS};
use crate::config::PipelineConfig;
use crate::error::{bail, Error, Result};
use crate::fbank::{wav::read_wav, FbankConfig, FbankExtractor};
use crate::feature_io::{load_features, save_features, save_features_text, FeatureFormat, FeatureMatrix};
use crate::kmeans::{kmeans_fit, BatchSize, Codebook, Init, KmeansConfig};
use crate::pack::{pack_units, unpack_units_as};
use crate::rng::SplitMix64;
use crate::synth::{write_corpus, SynthConfig};
use crate::units::{
    deduplicate, inferred_vocab, lines_to_sequences, read_unit_lines, time_mask, write_units, Stage,
    UnitSequence,
};

pub const STREAM_KMEANS: u64 = 0;
pub const STREAM_MASK: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "dsu", version, about = "Discrete speech unit toolkit")]
pub struct Cli {
    /// Pipeline config file (`key = value` lines); flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides `seed`
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Overrides `workers`
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Log-mel filterbank features from 16-bit mono WAV.
    Fbank(FbankArgs),
    /// Train a k-means codebook on feature files.
    KmeansTrain(KmeansTrainArgs),
    /// Map feature frames to their nearest centroid.
    Quantize(QuantizeArgs),
    /// Collapse runs of repeated units.
    Dedup(DedupArgs),
    /// Time-mask random unit spans.
    Mask(MaskArgs),
    /// Learn BPE merges over de-duplicated units.
    BpeTrain(BpeTrainArgs),
    /// Apply a BPE model to de-duplicated units.
    BpeEncode(BpeCodeArgs),
    /// Expand BPE tokens back to units.
    BpeDecode(BpeCodeArgs),
    /// Bit-pack a unit corpus.
    Pack(PackArgs),
    /// Read a bit-packed corpus back to text.
    Unpack(UnpackArgs),
    /// Sequence-length report across the three unit stages.
    Stats(StatsArgs),
    /// Check the CTC input-length constraint after subsampling.
    CtcCheck(CtcCheckArgs),
    /// Score layers against labels with CCA and pick the best.
    CcaSelect(CcaSelectArgs),
    /// FBANK, codebook, quantize, dedup, mask, BPE, pack and stats in one go.
    Pipeline(PipelineArgs),
    /// Write a deterministic synthetic WAV corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct FbankArgs {
    /// A WAV file or a directory of WAV files.
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output file, or directory when the input is a directory.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long)]
    pub n_mels: Option<usize>,
    #[arg(long)]
    pub n_fft: Option<usize>,
    #[arg(long)]
    pub frame_length_ms: Option<f64>,
    #[arg(long)]
    pub frame_shift_ms: Option<f64>,
    #[arg(long)]
    pub f_min: Option<f64>,
    #[arg(long)]
    pub f_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct KmeansTrainArgs {
    /// Feature files or directories of `.dsf` files; frames are pooled.
    #[arg(long = "in", value_name = "PATH", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// `kmeans++` or `random`.
    #[arg(long)]
    pub init: Option<Init>,
    /// `full` or a mini-batch size.
    #[arg(long)]
    pub batch_size: Option<BatchSize>,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[arg(long, value_name = "PATH")]
    pub codebook: PathBuf,
    /// Feature files or directories; one output line per file.
    #[arg(long = "in", value_name = "PATH", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

/// Unit vocabulary; inferred as the largest unit plus one when omitted.
#[derive(Debug, Args)]
pub struct VocabArg {
    #[arg(long)]
    pub vocab: Option<u32>,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[command(flatten)]
    pub vocab: VocabArg,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Mask ID is the vocabulary size.
    #[command(flatten)]
    pub vocab: VocabArg,
    #[arg(long)]
    pub n_masks: Option<usize>,
    #[arg(long)]
    pub max_width: Option<usize>,
    /// Stage tag of the input: `raw` or `dedup`.
    #[arg(long, default_value = "dedup")]
    pub stage: Stage,
}

#[derive(Debug, Args)]
pub struct BpeTrainArgs {
    /// De-duplicated units.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[command(flatten)]
    pub vocab: VocabArg,
    /// Input carries the mask ID `vocab`.
    #[arg(long)]
    pub masked: bool,
    #[arg(long)]
    pub target_vocab: Option<u32>,
    /// Merges on top of the base vocabulary when no target is given.
    #[arg(long)]
    pub extra_vocab: Option<u32>,
}

#[derive(Debug, Args)]
pub struct BpeCodeArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PackArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[command(flatten)]
    pub vocab: VocabArg,
    /// Take the vocabulary from a BPE model instead.
    #[arg(long, value_name = "PATH", conflicts_with = "vocab")]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct UnpackArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Stage tag for the restored sequences.
    #[arg(long, default_value = "raw")]
    pub stage: Stage,
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Target token sequences, one line per input sequence.
    #[arg(long, value_name = "PATH")]
    pub targets: Option<PathBuf>,
    /// Count a blank between repeated target labels.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, value_name = "PATH")]
    pub raw: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub dedup: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub bpe: PathBuf,
    /// Overrides `subsample.kind` (linear, conv1d1, conv1d2, conv1d3)
    #[arg(long)]
    pub subsample: Option<SubsampleKind>,
    #[command(flatten)]
    pub targets: TargetArgs,
    /// Also write the key=value report here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CtcCheckArgs {
    /// Input unit sequences (normally the BPE stage).
    #[arg(long = "in", value_name = "PATH", requires = "targets")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub targets: TargetArgs,
    /// Explicit `INPUT_LEN:TARGET_LEN` pairs.
    #[arg(long = "pair", value_name = "IN:TGT", value_parser = parse_pair)]
    pub pairs: Vec<(usize, usize)>,
    /// Overrides `subsample.kind` (linear, conv1d1, conv1d2, conv1d3)
    #[arg(long)]
    pub subsample: Option<SubsampleKind>,
}

#[derive(Debug, Args)]
pub struct CcaSelectArgs {
    /// Label representations, one row per aligned observation.
    #[arg(long, value_name = "PATH")]
    pub labels: PathBuf,
    /// Layer features as `ID:PATH`; repeat per layer.
    #[arg(long = "layer", value_name = "ID:PATH", required = true, value_parser = parse_layer)]
    pub layers: Vec<(u32, PathBuf)>,
    #[arg(long, default_value_t = DEFAULT_REG_EPS)]
    pub reg_eps: f64,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Overrides `paths.audio`.
    #[arg(long, value_name = "PATH")]
    pub audio: Option<PathBuf>,
    /// Overrides `paths.out`.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Total audio duration across all files
    #[arg(long, default_value_t = 600.0)]
    pub seconds: f64,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected INPUT_LEN:TARGET_LEN")?;
    Ok((
        a.parse().map_err(|e| format!("{a:?}: {e}"))?,
        b.parse().map_err(|e| format!("{b:?}: {e}"))?,
    ))
}

fn parse_layer(s: &str) -> std::result::Result<(u32, PathBuf), String> {
    let (id, path) = s.split_once(':').ok_or("expected ID:PATH")?;
    let id = id.parse().map_err(|e| format!("layer id {id:?}: {e}"))?;
    Ok((id, PathBuf::from(path)))
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
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
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dsu: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        _ => 2,
    }
}

/// Config file plus global flag overrides.
fn base_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            bail!(Config, "--workers must be at least 1");
        }
        cfg.workers = w;
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = base_config(cli)?;
    match &cli.command {
        Command::Fbank(a) => cmd_fbank(&mut cfg, a),
        Command::KmeansTrain(a) => cmd_kmeans_train(&mut cfg, a),
        Command::Quantize(a) => cmd_quantize(&cfg, a),
        Command::Dedup(a) => cmd_dedup(a),
        Command::Mask(a) => cmd_mask(&mut cfg, a),
        Command::BpeTrain(a) => cmd_bpe_train(&mut cfg, a),
        Command::BpeEncode(a) => cmd_bpe_code(a, true),
        Command::BpeDecode(a) => cmd_bpe_code(a, false),
        Command::Pack(a) => cmd_pack(a),
        Command::Unpack(a) => cmd_unpack(a),
        Command::Stats(a) => cmd_stats(&mut cfg, a),
        Command::CtcCheck(a) => cmd_ctc_check(&mut cfg, a),
        Command::CcaSelect(a) => cmd_cca_select(a),
        Command::Pipeline(a) => cmd_pipeline(&mut cfg, a),
        Command::Synth(a) => cmd_synth(&cfg, a),
    }
}

fn override_with<T: Clone>(slot: &mut T, flag: &Option<T>) {
    if let Some(v) = flag {
        *slot = v.clone();
    }
}

/// Files with extension `ext` in `dir`, sorted by name.
fn list_dir(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case(ext))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!(Value, "no .{ext} files in {}", dir.display());
    }
    Ok(files)
}

fn expand_inputs(inputs: &[PathBuf], ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(list_dir(p, ext)?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn load_any(path: &Path) -> Result<FeatureMatrix> {
    load_features(path, FeatureFormat::from_path(path))
}

fn save_any(m: &FeatureMatrix, path: &Path) -> Result<()> {
    match FeatureFormat::from_path(path) {
        FeatureFormat::Dsf => save_features(m, path),
        FeatureFormat::Text => save_features_text(m, path),
    }
}

fn fbank_config(cfg: &PipelineConfig, sample_rate: u32) -> FbankConfig {
    FbankConfig {
        n_mels: cfg.fbank_n_mels,
        n_fft: cfg.fbank_n_fft,
        frame_length_ms: cfg.fbank_frame_length_ms,
        frame_shift_ms: cfg.fbank_frame_shift_ms,
        f_min: cfg.fbank_f_min,
        f_max: cfg.fbank_f_max,
        ..FbankConfig::new(sample_rate)
    }
}

fn kmeans_config(cfg: &PipelineConfig) -> KmeansConfig {
    KmeansConfig {
        max_iters: cfg.kmeans_max_iters,
        tol: cfg.kmeans_tol,
        init: cfg.kmeans_init,
        batch_size: cfg.kmeans_batch_size,
        workers: cfg.workers,
        ..KmeansConfig::new(cfg.kmeans_k, SplitMix64::stream_seed(cfg.seed, STREAM_KMEANS))
    }
}

fn read_corpus(path: &Path, vocab: Option<u32>, stage: Stage, masked: bool) -> Result<Vec<UnitSequence>> {
    let lines = read_unit_lines(path)?;
    let vocab = match vocab {
        Some(v) => v,
        None if masked => inferred_vocab(&lines).saturating_sub(1).max(1),
        None => inferred_vocab(&lines),
    };
    lines_to_sequences(lines, vocab, stage, masked)
}

// ---- pipeline stages, shared by the subcommands and `pipeline` ----

/// Extracts features for each WAV file into `out_paths`.
fn stage_fbank(cfg: &PipelineConfig, wavs: &[PathBuf], out_paths: &[PathBuf]) -> Result<Vec<FeatureMatrix>> {
    let mut extractor: Option<FbankExtractor> = None;
    let mut feats = Vec::with_capacity(wavs.len());
    for (wav, out) in wavs.iter().zip(out_paths) {
        let pcm = read_wav(wav)?;
        if extractor.as_ref().is_none_or(|e| e.config().sample_rate != pcm.sample_rate) {
            extractor = Some(FbankExtractor::new(fbank_config(cfg, pcm.sample_rate))?);
        }
        let m = extractor.as_ref().unwrap().compute(&pcm)?;
        save_any(&m, out)?;
        debug!("{}: {} frames", wav.display(), m.n_frames());
        feats.push(m);
    }
    Ok(feats)
}

fn stage_kmeans(cfg: &PipelineConfig, feats: &[FeatureMatrix]) -> Result<Codebook> {
    let data = FeatureMatrix::concat(feats)?;
    let t = Instant::now();
    let cb = kmeans_fit(&data, &kmeans_config(cfg))?;
    info!(
        "k-means: k={} on {} frames, {} iterations, inertia {:.4} ({:.1?})",
        cb.k(),
        data.n_frames(),
        cb.meta().iterations,
        cb.meta().inertia,
        t.elapsed()
    );
    Ok(cb)
}

fn stage_quantize(cfg: &PipelineConfig, cb: &Codebook, feats: &[FeatureMatrix], ids: &[String]) -> Result<Vec<UnitSequence>> {
    feats
        .iter()
        .zip(ids)
        .map(|(f, id)| Ok(cb.assign_with(f, cfg.workers)?.with_source_id(id.clone())))
        .collect()
}

fn stage_dedup(corpus: &[UnitSequence]) -> Result<Vec<UnitSequence>> {
    corpus.iter().map(deduplicate).collect()
}

fn stage_mask(cfg: &PipelineConfig, corpus: &[UnitSequence]) -> Result<Vec<UnitSequence>> {
    let stream = SplitMix64::stream_seed(cfg.seed, STREAM_MASK);
    corpus
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let seed = SplitMix64::stream_seed(stream, i as u64);
            time_mask(s, cfg.mask_n_masks, cfg.mask_max_width, seed)
        })
        .collect()
}

fn stage_bpe_train(cfg: &PipelineConfig, corpus: &[UnitSequence]) -> Result<BpeModel> {
    let base = corpus.first().map_or(1, UnitSequence::effective_vocab);
    let target = cfg.target_vocab(base);
    let t = Instant::now();
    let model = bpe_train(corpus, target)?;
    info!(
        "bpe: {} merges, vocab {} -> {} ({:.1?})",
        model.merges().len(),
        base,
        model.vocab_size(),
        t.elapsed()
    );
    Ok(model)
}

fn stage_bpe_encode(model: &BpeModel, corpus: &[UnitSequence]) -> Result<Vec<UnitSequence>> {
    corpus.iter().map(|s| bpe_encode(model, s)).collect()
}

fn stats_report(
    cfg: &PipelineConfig,
    raw: &[UnitSequence],
    dedup: &[UnitSequence],
    bpe: &[UnitSequence],
    targets: Option<&[usize]>,
) -> Result<(String, String)> {
    let lengths = StageLengths::from_corpora(raw, dedup, bpe);
    let stats = corpus_stats(&lengths, &SubsampleSpec::new(cfg.subsample_kind), targets)?;
    Ok((stats.to_table(), stats.to_key_values()))
}

fn bound(strict: bool) -> CtcBound {
    if strict {
        CtcBound::Strict
    } else {
        CtcBound::Plain
    }
}

fn read_target_lengths(path: &Path, strict: bool) -> Result<Vec<usize>> {
    Ok(read_unit_lines(path)?
        .iter()
        .map(|l| required_input_length(&l.units, bound(strict)))
        .collect())
}

// ---- subcommands ----

fn cmd_fbank(cfg: &mut PipelineConfig, a: &FbankArgs) -> Result<()> {
    override_with(&mut cfg.fbank_n_mels, &a.n_mels);
    override_with(&mut cfg.fbank_n_fft, &a.n_fft);
    override_with(&mut cfg.fbank_frame_length_ms, &a.frame_length_ms);
    override_with(&mut cfg.fbank_frame_shift_ms, &a.frame_shift_ms);
    override_with(&mut cfg.fbank_f_min, &a.f_min);
    if a.f_max.is_some() {
        cfg.fbank_f_max = a.f_max;
    }
    let Some(input) = a.input.clone().or_else(|| cfg.audio.clone()) else {
        bail!(Config, "fbank needs --in or paths.audio");
    };
    if input.is_dir() {
        let wavs = list_dir(&input, "wav")?;
        fs::create_dir_all(&a.out)?;
        let outs: Vec<PathBuf> = wavs.iter().map(|w| a.out.join(format!("{}.dsf", stem(w)))).collect();
        stage_fbank(cfg, &wavs, &outs)?;
    } else {
        stage_fbank(cfg, &[input], std::slice::from_ref(&a.out))?;
    }
    Ok(())
}

fn cmd_kmeans_train(cfg: &mut PipelineConfig, a: &KmeansTrainArgs) -> Result<()> {
    override_with(&mut cfg.kmeans_k, &a.k);
    override_with(&mut cfg.kmeans_max_iters, &a.max_iters);
    override_with(&mut cfg.kmeans_tol, &a.tol);
    override_with(&mut cfg.kmeans_init, &a.init);
    override_with(&mut cfg.kmeans_batch_size, &a.batch_size);
    let feats = expand_inputs(&a.inputs, "dsf")?
        .iter()
        .map(|p| load_any(p))
        .collect::<Result<Vec<_>>>()?;
    stage_kmeans(cfg, &feats)?.save(&a.out)
}

fn cmd_quantize(cfg: &PipelineConfig, a: &QuantizeArgs) -> Result<()> {
    let cb = Codebook::load(&a.codebook)?;
    let paths = expand_inputs(&a.inputs, "dsf")?;
    let feats = paths.iter().map(|p| load_any(p)).collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = paths.iter().map(|p| stem(p)).collect();
    let t = Instant::now();
    let units = stage_quantize(cfg, &cb, &feats, &ids)?;
    let frames: usize = feats.iter().map(FeatureMatrix::n_frames).sum();
    info!("quantized {frames} frames in {:.1?}", t.elapsed());
    write_units(&a.out, &units)
}

fn cmd_dedup(a: &DedupArgs) -> Result<()> {
    let raw = read_corpus(&a.input, a.vocab.vocab, Stage::Raw, false)?;
    write_units(&a.out, &stage_dedup(&raw)?)
}

fn cmd_mask(cfg: &mut PipelineConfig, a: &MaskArgs) -> Result<()> {
    override_with(&mut cfg.mask_n_masks, &a.n_masks);
    override_with(&mut cfg.mask_max_width, &a.max_width);
    if a.stage == Stage::Bpe {
        bail!(Config, "--stage must be raw or dedup");
    }
    let corpus = read_corpus(&a.input, a.vocab.vocab, a.stage, false)?;
    write_units(&a.out, &stage_mask(cfg, &corpus)?)
}

fn cmd_bpe_train(cfg: &mut PipelineConfig, a: &BpeTrainArgs) -> Result<()> {
    if a.target_vocab.is_some() {
        cfg.bpe_target_vocab = a.target_vocab;
    }
    override_with(&mut cfg.bpe_extra_vocab, &a.extra_vocab);
    let corpus = read_corpus(&a.input, a.vocab.vocab, Stage::Dedup, a.masked)?;
    stage_bpe_train(cfg, &corpus)?.save(&a.out)
}

fn cmd_bpe_code(a: &BpeCodeArgs, encode: bool) -> Result<()> {
    let model = BpeModel::load(&a.model)?;
    let out = if encode {
        let corpus = read_corpus(&a.input, Some(model.base_vocab()), Stage::Dedup, false)?;
        stage_bpe_encode(&model, &corpus)?
    } else {
        let corpus = read_corpus(&a.input, Some(model.vocab_size()), Stage::Bpe, false)?;
        corpus.iter().map(|s| bpe_decode(&model, s)).collect::<Result<_>>()?
    };
    write_units(&a.out, &out)
}

fn cmd_pack(a: &PackArgs) -> Result<()> {
    let vocab = match &a.model {
        Some(m) => Some(BpeModel::load(m)?.vocab_size()),
        None => a.vocab.vocab,
    };
    let corpus = read_corpus(&a.input, vocab, Stage::Raw, false)?;
    let vocab = vocab.unwrap_or_else(|| corpus.first().map_or(1, UnitSequence::vocab_size));
    pack_units(&corpus, vocab, &a.out)
}

fn cmd_unpack(a: &UnpackArgs) -> Result<()> {
    write_units(&a.out, &unpack_units_as(&a.input, a.stage)?)
}

fn cmd_stats(cfg: &mut PipelineConfig, a: &StatsArgs) -> Result<()> {
    override_with(&mut cfg.subsample_kind, &a.subsample);
    let raw = read_corpus(&a.raw, None, Stage::Raw, false)?;
    let dedup = read_corpus(&a.dedup, None, Stage::Dedup, false)?;
    let bpe = read_corpus(&a.bpe, None, Stage::Bpe, false)?;
    let targets = match &a.targets.targets {
        Some(p) => Some(read_target_lengths(p, a.targets.strict)?),
        None => None,
    };
    let (table, kv) = stats_report(cfg, &raw, &dedup, &bpe, targets.as_deref())?;
    print!("{table}{kv}");
    if let Some(out) = &a.out {
        fs::write(out, kv)?;
    }
    Ok(())
}

fn cmd_ctc_check(cfg: &mut PipelineConfig, a: &CtcCheckArgs) -> Result<()> {
    override_with(&mut cfg.subsample_kind, &a.subsample);
    let mut pairs = a.pairs.clone();
    if let Some(input) = &a.input {
        let inputs = read_unit_lines(input)?;
        let targets = read_target_lengths(a.targets.targets.as_ref().unwrap(), a.targets.strict)?;
        if inputs.len() != targets.len() {
            bail!(Value, "{} input sequences but {} targets", inputs.len(), targets.len());
        }
        pairs.extend(inputs.iter().map(|l| l.units.len()).zip(targets));
    } else if a.targets.targets.is_some() {
        bail!(Config, "--targets needs --in");
    }
    if pairs.is_empty() {
        bail!(Config, "ctc-check needs --pair or --in with --targets");
    }
    let report: FeasibilityReport = ctc_feasibility(&pairs, &SubsampleSpec::new(cfg.subsample_kind));
    print!("{}{}", report.to_table(), report.to_key_values());
    Ok(())
}

fn cmd_cca_select(a: &CcaSelectArgs) -> Result<()> {
    let labels = load_any(&a.labels)?;
    let mut scores = Vec::with_capacity(a.layers.len());
    for (id, path) in &a.layers {
        let x = load_any(path)?;
        let inp = CcaInput::from_features(&x, &labels)?.with_reg_eps(a.reg_eps)?;
        let score = cca_score(&inp);
        println!("{id} {score:.6}");
        scores.push((*id, score));
    }
    let best = select_layer(&scores)?;
    eprintln!("selected layer {best}");
    Ok(())
}

/// Artifact names written by `pipeline` under the output directory.
pub mod artifacts {
    pub const FEATS_DIR: &str = "feats";
    pub const CODEBOOK: &str = "codebook.dsf";
    pub const UNITS: &str = "units.txt";
    pub const DEDUP: &str = "dedup.txt";
    pub const MASKED: &str = "masked.txt";
    pub const BPE_MODEL: &str = "bpe.model";
    pub const BPE: &str = "bpe.txt";
    pub const PACKED: &str = "units.dsu";
    pub const STATS: &str = "stats.txt";
}

fn cmd_pipeline(cfg: &mut PipelineConfig, a: &PipelineArgs) -> Result<()> {
    use artifacts::*;
    if a.audio.is_some() {
        cfg.audio = a.audio.clone();
    }
    if a.out.is_some() {
        cfg.out_dir = a.out.clone();
    }
    let (Some(audio), Some(out)) = (cfg.audio.clone(), cfg.out_dir.clone()) else {
        bail!(Config, "pipeline needs paths.audio and paths.out (or --audio/--out)");
    };
    let wavs = if audio.is_dir() { list_dir(&audio, "wav")? } else { vec![audio] };
    let feats_dir = out.join(FEATS_DIR);
    fs::create_dir_all(&feats_dir)?;
    let ids: Vec<String> = wavs.iter().map(|w| stem(w)).collect();
    let feat_paths: Vec<PathBuf> = ids.iter().map(|id| feats_dir.join(format!("{id}.dsf"))).collect();

    let feats = stage_fbank(cfg, &wavs, &feat_paths)?;
    let cb = stage_kmeans(cfg, &feats)?;
    cb.save(&out.join(CODEBOOK))?;
    let raw = stage_quantize(cfg, &cb, &feats, &ids)?;
    write_units(&out.join(UNITS), &raw)?;
    let dedup = stage_dedup(&raw)?;
    write_units(&out.join(DEDUP), &dedup)?;
    if cfg.mask_n_masks > 0 {
        write_units(&out.join(MASKED), &stage_mask(cfg, &dedup)?)?;
    }
    let model = stage_bpe_train(cfg, &dedup)?;
    model.save(&out.join(BPE_MODEL))?;
    let bpe = stage_bpe_encode(&model, &dedup)?;
    write_units(&out.join(BPE), &bpe)?;
    pack_units(&bpe, model.vocab_size(), &out.join(PACKED))?;
    let (table, kv) = stats_report(cfg, &raw, &dedup, &bpe, None)?;
    fs::write(out.join(STATS), &kv)?;
    print!("{table}{kv}");
    Ok(())
}

fn cmd_synth(cfg: &PipelineConfig, a: &SynthArgs) -> Result<()> {
    if !(a.seconds > 0.0 && a.seconds.is_finite()) {
        bail!(Config, "--seconds must be positive");
    }
    let sc = SynthConfig {
        seed: cfg.seed,
        total_seconds: a.seconds,
        ..SynthConfig::default()
    };
    let files = write_corpus(&sc, &a.out)?;
    info!("wrote {} utterances to {}", files.len(), a.out.display());
    Ok(())
}

//! Pipeline configuration: a plain-text `key = value` file.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are rejected. Relative paths resolve against the directory holding
//! the config file.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::SubsampleKind;
use crate::error::{bail, Error, Result};
use crate::kmeans::{BatchSize, Init};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub workers: usize,
    /// A WAV file or a directory of `.wav` files.
    pub audio: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub fbank_n_mels: usize,
    pub fbank_n_fft: usize,
    pub fbank_frame_length_ms: f64,
    pub fbank_frame_shift_ms: f64,
    pub fbank_f_min: f64,
    pub fbank_f_max: Option<f64>,
    pub kmeans_k: usize,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
    pub kmeans_init: Init,
    pub kmeans_batch_size: BatchSize,
    pub mask_n_masks: usize,
    pub mask_max_width: usize,
    /// Absolute vocabulary size after BPE.
    pub bpe_target_vocab: Option<u32>,
    /// Merges to learn on top of the unit vocabulary; used when `bpe.target_vocab` is unset.
    pub bpe_extra_vocab: u32,
    pub subsample_kind: SubsampleKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            audio: None,
            out_dir: None,
            fbank_n_mels: 80,
            fbank_n_fft: 512,
            fbank_frame_length_ms: 25.0,
            fbank_frame_shift_ms: 10.0,
            fbank_f_min: 0.0,
            fbank_f_max: None,
            kmeans_k: 100,
            kmeans_max_iters: 100,
            kmeans_tol: 1e-4,
            kmeans_init: Init::KmeansPlusPlus,
            kmeans_batch_size: BatchSize::Full,
            mask_n_masks: 0,
            mask_max_width: 10,
            bpe_target_vocab: None,
            bpe_extra_vocab: 200,
            subsample_kind: SubsampleKind::Conv1d2,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

impl PipelineConfig {
    /// Parses config text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(Config, "line {}: expected key = value", lineno + 1);
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                bail!(Config, "line {}: duplicate key {key}", lineno + 1);
            }
            cfg.set(key, value, base_dir)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn set(&mut self, key: &str, value: &str, base_dir: &Path) -> Result<()> {
        let path = |v: &str| base_dir.join(v);
        match key {
            "seed" => self.seed = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "paths.audio" => self.audio = Some(path(value)),
            "paths.out" => self.out_dir = Some(path(value)),
            "fbank.n_mels" => self.fbank_n_mels = parse(key, value)?,
            "fbank.n_fft" => self.fbank_n_fft = parse(key, value)?,
            "fbank.frame_length_ms" => self.fbank_frame_length_ms = parse(key, value)?,
            "fbank.frame_shift_ms" => self.fbank_frame_shift_ms = parse(key, value)?,
            "fbank.f_min" => self.fbank_f_min = parse(key, value)?,
            "fbank.f_max" => self.fbank_f_max = Some(parse(key, value)?),
            "kmeans.k" => self.kmeans_k = parse(key, value)?,
            "kmeans.max_iters" => self.kmeans_max_iters = parse(key, value)?,
            "kmeans.tol" => self.kmeans_tol = parse(key, value)?,
            "kmeans.init" => self.kmeans_init = value.parse()?,
            "kmeans.batch_size" => self.kmeans_batch_size = value.parse()?,
            "mask.n_masks" => self.mask_n_masks = parse(key, value)?,
            "mask.max_width" => self.mask_max_width = parse(key, value)?,
            "bpe.target_vocab" => self.bpe_target_vocab = Some(parse(key, value)?),
            "bpe.extra_vocab" => self.bpe_extra_vocab = parse(key, value)?,
            "subsample.kind" => self.subsample_kind = value.parse()?,
            other => bail!(Config, "unknown config key {other:?}"),
        }
        if self.workers == 0 {
            bail!(Config, "workers must be at least 1");
        }
        Ok(())
    }

    /// BPE vocabulary for a unit corpus whose vocabulary is `base`.
    pub fn target_vocab(&self, base: u32) -> u32 {
        self.bpe_target_vocab.unwrap_or(base + self.bpe_extra_vocab)
    }
}

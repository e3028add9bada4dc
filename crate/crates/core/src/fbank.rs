//! Log-mel filter-bank (FBANK) features from mono PCM.
//!
//! Per frame: Hann window, zero-pad to `n_fft`, power spectrum, triangular
//! mel filters, natural log floored at `log_floor`. No pre-emphasis or
//! dithering, so output is fully deterministic.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{bail, Result};
use crate::feature_io::FeatureMatrix;

pub mod wav;

/// Mono PCM samples in `[-1, 1)` with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Pcm {
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FbankConfig {
    pub sample_rate: u32,
    /// Window length in milliseconds.
    pub frame_length_ms: f64,
    /// Hop in milliseconds.
    pub frame_shift_ms: f64,
    pub n_fft: usize,
    pub n_mels: usize,
    pub f_min: f64,
    /// `None` means Nyquist.
    pub f_max: Option<f64>,
    pub log_floor: f64,
}

impl FbankConfig {
    pub fn new(sample_rate: u32) -> Self {
        Self {
            sample_rate,
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            n_fft: 512,
            n_mels: 80,
            f_min: 0.0,
            f_max: None,
            log_floor: 1e-10,
        }
    }

    pub fn f_max(&self) -> f64 {
        self.f_max.unwrap_or(self.sample_rate as f64 / 2.0)
    }

    pub fn win_length(&self) -> usize {
        (self.sample_rate as f64 * self.frame_length_ms / 1000.0).round() as usize
    }

    pub fn hop_length(&self) -> usize {
        (self.sample_rate as f64 * self.frame_shift_ms / 1000.0).round() as usize
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        let f_max = self.f_max();
        if self.sample_rate == 0 {
            bail!(Config, "sample rate must be positive");
        }
        if !(0.0 <= self.f_min && self.f_min < f_max && f_max <= nyquist) {
            bail!(
                Config,
                "need 0 <= f_min < f_max <= {nyquist}, got f_min={} f_max={f_max}",
                self.f_min
            );
        }
        if self.win_length() == 0 || self.hop_length() == 0 {
            bail!(Config, "frame length and shift must cover at least one sample");
        }
        if self.n_fft < self.win_length() {
            bail!(
                Config,
                "n_fft {} shorter than the {}-sample window",
                self.n_fft,
                self.win_length()
            );
        }
        if self.n_mels == 0 {
            bail!(Config, "n_mels must be at least 1");
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            bail!(Config, "log floor must be positive and finite");
        }
        Ok(())
    }
}

pub fn hz_to_mel(f: f64) -> Result<f64> {
    if f.is_nan() || f < 0.0 {
        bail!(Value, "frequency must be non-negative, got {f}");
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters over the one-sided power spectrum.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_bins: usize,
    /// `n_mels` rows of `n_bins` weights.
    weights: Vec<Vec<f64>>,
    /// `n_mels + 2` frequencies: lower edge, filter centers, upper edge.
    points_hz: Vec<f64>,
    center_bins: Vec<usize>,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m]
    }

    /// Center frequency of each filter on the continuous mel grid.
    pub fn center_frequencies(&self) -> &[f64] {
        &self.points_hz[1..self.points_hz.len() - 1]
    }

    /// Filter `m` spans `edge_frequencies()[m]..edge_frequencies()[m + 2]`.
    pub fn edge_frequencies(&self) -> &[f64] {
        &self.points_hz
    }

    /// FFT bin at which each filter reaches weight 1.
    pub fn center_bins(&self) -> &[usize] {
        &self.center_bins
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Builds `n_mels` filters whose centers are equally spaced in mel between
/// `f_min` and `f_max`. Filter `m` is a triangle in Hz rising from the
/// previous center to its own and falling to the next, sampled at the bin
/// frequencies and rescaled so its largest weight is exactly 1.
pub fn mel_filterbank(cfg: &FbankConfig) -> Result<MelFilterbank> {
    cfg.validate()?;
    let n_bins = cfg.n_bins();
    let mel_lo = hz_to_mel(cfg.f_min)?;
    let mel_hi = hz_to_mel(cfg.f_max())?;
    let n_points = cfg.n_mels + 2;
    let points_hz: Vec<f64> = (0..n_points)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_points - 1) as f64))
        .collect();
    let bin_hz = cfg.sample_rate as f64 / cfg.n_fft as f64;

    let mut weights = Vec::with_capacity(cfg.n_mels);
    let mut center_bins = Vec::with_capacity(cfg.n_mels);
    for m in 0..cfg.n_mels {
        let (left, center, right) = (points_hz[m], points_hz[m + 1], points_hz[m + 2]);
        let mut row: Vec<f64> = (0..n_bins)
            .map(|k| {
                let f = k as f64 * bin_hz;
                if f > left && f <= center {
                    (f - left) / (center - left)
                } else if f > center && f < right {
                    (right - f) / (right - center)
                } else {
                    0.0
                }
            })
            .collect();
        let (peak_bin, peak) = row
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |best, (k, w)| if w > best.1 { (k, w) } else { best });
        if peak <= 0.0 {
            bail!(
                Config,
                "mel filter {m} ({left:.1}-{right:.1} Hz) covers no FFT bin; \
                 reduce n_mels or raise n_fft"
            );
        }
        for w in &mut row {
            *w /= peak;
        }
        row[peak_bin] = 1.0;
        weights.push(row);
        center_bins.push(peak_bin);
    }
    Ok(MelFilterbank {
        n_bins,
        weights,
        points_hz,
        center_bins,
    })
}

/// `floor((n - win) / hop) + 1`, or zero when the input is shorter than a window.
pub fn frame_count(n_samples: usize, win: usize, hop: usize) -> usize {
    if n_samples < win {
        0
    } else {
        (n_samples - win) / hop + 1
    }
}

/// Reusable FBANK extractor: the filterbank, window and FFT plan are built once.
pub struct FbankExtractor {
    cfg: FbankConfig,
    filters: MelFilterbank,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl FbankExtractor {
    pub fn new(cfg: FbankConfig) -> Result<Self> {
        let filters = mel_filterbank(&cfg)?;
        let win = cfg.win_length();
        // Symmetric Hann.
        let window = if win == 1 {
            vec![1.0]
        } else {
            (0..win)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (win - 1) as f64).cos())
                .collect()
        };
        let fft = FftPlanner::new().plan_fft_forward(cfg.n_fft);
        Ok(Self {
            cfg,
            filters,
            window,
            fft,
        })
    }

    pub fn config(&self) -> &FbankConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filters
    }

    pub fn compute(&self, pcm: &Pcm) -> Result<FeatureMatrix> {
        if pcm.sample_rate != self.cfg.sample_rate {
            bail!(
                Config,
                "audio is {} Hz but the extractor is configured for {} Hz",
                pcm.sample_rate,
                self.cfg.sample_rate
            );
        }
        let win = self.cfg.win_length();
        let hop = self.cfg.hop_length();
        let n = pcm.samples.len();
        if n < win {
            bail!(Value, "{n} samples is shorter than one {win}-sample window");
        }
        let n_frames = frame_count(n, win, hop);
        let n_fft = self.cfg.n_fft;
        let n_mels = self.filters.n_mels();
        let ln_floor = self.cfg.log_floor;

        let mut out = Vec::with_capacity(n_frames * n_mels);
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; self.cfg.n_bins()];
        for t in 0..n_frames {
            let frame = &pcm.samples[t * hop..t * hop + win];
            for (slot, (&s, &w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
                *slot = Complex::new(s as f64 * w, 0.0);
            }
            for slot in &mut buf[win..] {
                *slot = Complex::new(0.0, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for e in self.filters.apply(&power) {
                out.push(e.max(ln_floor).ln() as f32);
            }
        }
        FeatureMatrix::new(n_frames, n_mels, out)
    }
}

pub fn compute_fbank(pcm: &Pcm, cfg: &FbankConfig) -> Result<FeatureMatrix> {
    FbankExtractor::new(cfg.clone())?.compute(pcm)
}

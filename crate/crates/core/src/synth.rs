//! Deterministic synthetic speech-like corpus.
//!
//! Each "phone" is a steady mixture of three partials held for 60 to 150 ms,
//! so consecutive frames repeat. Utterances are sequences of "words" drawn
//! from a small lexicon of phone strings, which gives subword merging
//! recurring patterns to find.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::fbank::wav::write_wav;
use crate::fbank::Pcm;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub sample_rate: u32,
    /// Total duration across all utterances.
    pub total_seconds: f64,
    pub n_phones: usize,
    pub n_words: usize,
    pub noise_level: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_rate: 16000,
            total_seconds: 600.0,
            n_phones: 24,
            n_words: 40,
            noise_level: 0.002,
        }
    }
}

struct Phone {
    partials: [(f64, f64); 3],
}

fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

/// Generates utterances of 4 to 9 seconds until the total duration is reached.
pub fn synthesize(cfg: &SynthConfig) -> Vec<Pcm> {
    let mut rng = SplitMix64::new(cfg.seed);
    let sr = cfg.sample_rate as f64;
    let nyq = sr / 2.0;
    let phones: Vec<Phone> = (0..cfg.n_phones)
        .map(|_| Phone {
            partials: [
                (uniform(&mut rng, 150.0, 900.0), uniform(&mut rng, 0.2, 0.4)),
                (uniform(&mut rng, 900.0, 2500.0), uniform(&mut rng, 0.1, 0.3)),
                (uniform(&mut rng, 2500.0, nyq * 0.9), uniform(&mut rng, 0.05, 0.15)),
            ],
        })
        .collect();
    let lexicon: Vec<Vec<usize>> = (0..cfg.n_words)
        .map(|_| {
            let len = 2 + rng.below(4) as usize;
            (0..len).map(|_| rng.below(cfg.n_phones as u64) as usize).collect()
        })
        .collect();

    let total = (cfg.total_seconds * sr) as usize;
    let mut produced = 0usize;
    let mut utterances = Vec::new();
    while produced < total {
        let remaining = total - produced;
        let mut target = (uniform(&mut rng, 4.0, 9.0) * sr) as usize;
        // Fold a short tail into the last utterance.
        if target + cfg.sample_rate as usize > remaining {
            target = remaining;
        }
        let mut samples = Vec::with_capacity(target);
        while samples.len() < target {
            let word = &lexicon[rng.below(lexicon.len() as u64) as usize];
            for &p in word {
                let dur = (uniform(&mut rng, 0.06, 0.15) * sr) as usize;
                let phase: Vec<f64> = (0..3).map(|_| rng.next_f64() * TAU).collect();
                for n in 0..dur {
                    let t = n as f64 / sr;
                    let mut v = 0.0;
                    for (i, &(f, a)) in phones[p].partials.iter().enumerate() {
                        v += a * (TAU * f * t + phase[i]).sin();
                    }
                    v += cfg.noise_level * (rng.next_f64() * 2.0 - 1.0);
                    samples.push(v as f32);
                }
            }
            if rng.below(3) == 0 {
                let gap = (uniform(&mut rng, 0.05, 0.2) * sr) as usize;
                samples.extend((0..gap).map(|_| (cfg.noise_level * (rng.next_f64() * 2.0 - 1.0)) as f32));
            }
        }
        samples.truncate(target);
        produced += samples.len();
        utterances.push(Pcm {
            sample_rate: cfg.sample_rate,
            samples,
        });
    }
    utterances
}

/// Writes `utt0000.wav`, `utt0001.wav`, ... into `dir` and returns their paths.
pub fn write_corpus(cfg: &SynthConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    synthesize(cfg)
        .iter()
        .enumerate()
        .map(|(i, pcm)| {
            let path = dir.join(format!("utt{i:04}.wav"));
            write_wav(pcm, &path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duration_and_determinism() {
        let cfg = SynthConfig {
            total_seconds: 20.0,
            ..SynthConfig::default()
        };
        let a = synthesize(&cfg);
        let total: usize = a.iter().map(|p| p.samples.len()).sum();
        assert_eq!(total, 20 * 16000);
        assert_eq!(a, synthesize(&cfg));
        assert!(a.iter().flat_map(|p| &p.samples).all(|s| s.abs() < 1.0));
    }
}

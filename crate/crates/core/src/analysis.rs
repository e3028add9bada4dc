//! Sequence-length accounting across pipeline stages, convolutional
//! subsampling lengths and the CTC input/target length constraint.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{bail, Error, Result};
use crate::units::UnitSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubsampleKind {
    Linear,
    Conv1d1,
    Conv1d2,
    Conv1d3,
}

impl SubsampleKind {
    pub const ALL: [SubsampleKind; 4] = [
        SubsampleKind::Linear,
        SubsampleKind::Conv1d1,
        SubsampleKind::Conv1d2,
        SubsampleKind::Conv1d3,
    ];

    pub fn conv_with_stride(stride: usize) -> Option<Self> {
        match stride {
            1 => Some(SubsampleKind::Conv1d1),
            2 => Some(SubsampleKind::Conv1d2),
            3 => Some(SubsampleKind::Conv1d3),
            _ => None,
        }
    }
}

impl fmt::Display for SubsampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubsampleKind::Linear => "linear",
            SubsampleKind::Conv1d1 => "conv1d1",
            SubsampleKind::Conv1d2 => "conv1d2",
            SubsampleKind::Conv1d3 => "conv1d3",
        })
    }
}

impl FromStr for SubsampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(SubsampleKind::Linear),
            "conv1d1" => Ok(SubsampleKind::Conv1d1),
            "conv1d2" => Ok(SubsampleKind::Conv1d2),
            "conv1d3" => Ok(SubsampleKind::Conv1d3),
            other => Err(Error::Config(format!("unknown subsampling kind {other:?}"))),
        }
    }
}

/// Front-end length model: kernel 3, padding 1, stride from the kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsampleSpec {
    pub kind: SubsampleKind,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl SubsampleSpec {
    pub fn new(kind: SubsampleKind) -> Self {
        let stride = match kind {
            SubsampleKind::Linear | SubsampleKind::Conv1d1 => 1,
            SubsampleKind::Conv1d2 => 2,
            SubsampleKind::Conv1d3 => 3,
        };
        Self {
            kind,
            kernel: 3,
            stride,
            padding: 1,
        }
    }

    fn output_len(&self, len: usize) -> usize {
        match self.kind {
            SubsampleKind::Linear => len,
            _ if len == 0 => 0,
            // floor((L + 2p - k) / s) + 1, which is floor((L - 1) / s) + 1 for k=3, p=1.
            _ => (len + 2 * self.padding - self.kernel) / self.stride + 1,
        }
    }
}

impl From<SubsampleKind> for SubsampleSpec {
    fn from(kind: SubsampleKind) -> Self {
        Self::new(kind)
    }
}

pub fn subsampled_length(len: usize, spec: &SubsampleSpec) -> Result<usize> {
    if len == 0 {
        bail!(Value, "cannot subsample an empty sequence");
    }
    Ok(spec.output_len(len))
}

/// Which length bound a CTC pair must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CtcBound {
    /// `input >= target`.
    #[default]
    Plain,
    /// `input >= target + repeats`, where repeats counts adjacent equal
    /// target labels (CTC needs a blank between them).
    Strict,
}

/// Input length CTC needs for `target` under `bound`.
pub fn required_input_length(target: &[u32], bound: CtcBound) -> usize {
    match bound {
        CtcBound::Plain => target.len(),
        CtcBound::Strict => target.len() + target.windows(2).filter(|w| w[0] == w[1]).count(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub spec: SubsampleSpec,
    pub pairs: usize,
    pub violations: usize,
    /// Violation count over pair count; zero with no pairs.
    pub violation_rate: f64,
    /// Largest-stride convolution (strides 1..=3) with no violations.
    pub recommended: Option<SubsampleKind>,
}

fn count_violations(pairs: &[(usize, usize)], spec: &SubsampleSpec) -> usize {
    pairs
        .iter()
        .filter(|&&(input, need)| spec.output_len(input) < need)
        .count()
}

/// Checks `(input_len, required_len)` pairs against `spec`.
pub fn ctc_feasibility(pairs: &[(usize, usize)], spec: &SubsampleSpec) -> FeasibilityReport {
    let violations = count_violations(pairs, spec);
    let recommended = (1..=3)
        .rev()
        .filter_map(SubsampleKind::conv_with_stride)
        .find(|&k| count_violations(pairs, &SubsampleSpec::new(k)) == 0);
    FeasibilityReport {
        spec: *spec,
        pairs: pairs.len(),
        violations,
        violation_rate: if pairs.is_empty() {
            0.0
        } else {
            violations as f64 / pairs.len() as f64
        },
        recommended,
    }
}

/// Feasibility of input lengths against target token sequences under `bound`.
pub fn ctc_feasibility_for_targets(
    input_lens: &[usize],
    targets: &[&[u32]],
    spec: &SubsampleSpec,
    bound: CtcBound,
) -> Result<FeasibilityReport> {
    if input_lens.len() != targets.len() {
        bail!(
            Value,
            "{} inputs but {} targets",
            input_lens.len(),
            targets.len()
        );
    }
    let pairs: Vec<(usize, usize)> = input_lens
        .iter()
        .zip(targets)
        .map(|(&l, t)| (l, required_input_length(t, bound)))
        .collect();
    Ok(ctc_feasibility(&pairs, spec))
}

/// Per-sequence lengths at the three unit stages, index-aligned.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageLengths {
    pub raw: Vec<usize>,
    pub dedup: Vec<usize>,
    pub bpe: Vec<usize>,
}

impl StageLengths {
    pub fn from_corpora(raw: &[UnitSequence], dedup: &[UnitSequence], bpe: &[UnitSequence]) -> Self {
        let lens = |c: &[UnitSequence]| c.iter().map(UnitSequence::len).collect();
        Self {
            raw: lens(raw),
            dedup: lens(dedup),
            bpe: lens(bpe),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub n_sequences: usize,
    pub avg_len_raw: f64,
    pub avg_len_dedup: f64,
    pub avg_len_bpe: f64,
    /// Mean of per-sequence subsampled BPE lengths.
    pub avg_len_subsampled: f64,
    /// `1 - avg_len_bpe / avg_len_raw`.
    pub reduction_ratio: f64,
    pub spec: SubsampleSpec,
    pub target_avg_len: Option<f64>,
    pub feasibility: Option<FeasibilityReport>,
}

fn mean(xs: &[usize]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().map(|&x| x as u64).sum::<u64>() as f64 / xs.len() as f64
    }
}

/// Whole-percent rendering used in reports.
pub fn percent(ratio: f64) -> i64 {
    (ratio * 100.0).round() as i64
}

/// Aggregates stage lengths. `targets` are required input lengths per
/// sequence (see [`required_input_length`]); when given, the subsampled BPE
/// lengths are checked against them.
pub fn corpus_stats(
    lengths: &StageLengths,
    spec: &SubsampleSpec,
    targets: Option<&[usize]>,
) -> Result<CorpusStats> {
    let n = lengths.raw.len();
    if lengths.dedup.len() != n || lengths.bpe.len() != n {
        bail!(
            Value,
            "misaligned corpora: {} raw, {} dedup, {} bpe sequences",
            n,
            lengths.dedup.len(),
            lengths.bpe.len()
        );
    }
    for i in 0..n {
        let (r, d, b) = (lengths.raw[i], lengths.dedup[i], lengths.bpe[i]);
        if !(r >= d && d >= b) {
            bail!(Value, "sequence {i} grows across stages ({r} -> {d} -> {b})");
        }
    }
    if let Some(t) = targets {
        if t.len() != n {
            bail!(Value, "{} targets for {} sequences", t.len(), n);
        }
    }
    let sub: Vec<usize> = lengths.bpe.iter().map(|&l| spec.output_len(l)).collect();
    let avg_len_raw = mean(&lengths.raw);
    let avg_len_bpe = mean(&lengths.bpe);
    let reduction_ratio = if avg_len_raw > 0.0 {
        (1.0 - avg_len_bpe / avg_len_raw).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let feasibility = targets.map(|t| {
        let pairs: Vec<(usize, usize)> = lengths.bpe.iter().copied().zip(t.iter().copied()).collect();
        ctc_feasibility(&pairs, spec)
    });
    Ok(CorpusStats {
        n_sequences: n,
        avg_len_raw,
        avg_len_dedup: mean(&lengths.dedup),
        avg_len_bpe,
        avg_len_subsampled: mean(&sub),
        reduction_ratio,
        spec: *spec,
        target_avg_len: targets.map(mean),
        feasibility,
    })
}

impl CorpusStats {
    /// Machine-readable `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        writeln!(out, "n_sequences={}", self.n_sequences).unwrap();
        writeln!(out, "avg_len_raw={:.2}", self.avg_len_raw).unwrap();
        writeln!(out, "avg_len_dedup={:.2}", self.avg_len_dedup).unwrap();
        writeln!(out, "avg_len_bpe={:.2}", self.avg_len_bpe).unwrap();
        writeln!(out, "reduction_ratio={}%", percent(self.reduction_ratio)).unwrap();
        writeln!(out, "reduction_ratio_exact={:.6}", self.reduction_ratio).unwrap();
        writeln!(out, "subsample={}", self.spec.kind).unwrap();
        writeln!(out, "avg_len_subsampled={:.2}", self.avg_len_subsampled).unwrap();
        if let Some(t) = self.target_avg_len {
            writeln!(out, "target_avg_len={t:.2}").unwrap();
        }
        if let Some(f) = &self.feasibility {
            write_feasibility_kv(&mut out, f);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "raw", "+dedup", "+bpe", "reduction", "conv-sub", "length"
        )
        .unwrap();
        writeln!(
            out,
            "{:>10.1} {:>10.1} {:>10.1} {:>9}% {:>10} {:>10.1}",
            self.avg_len_raw,
            self.avg_len_dedup,
            self.avg_len_bpe,
            percent(self.reduction_ratio),
            self.spec.kind,
            self.avg_len_subsampled
        )
        .unwrap();
        if let Some(f) = &self.feasibility {
            out.push_str(&f.to_table());
        }
        out
    }
}

fn write_feasibility_kv(out: &mut String, f: &FeasibilityReport) {
    writeln!(out, "ctc_pairs={}", f.pairs).unwrap();
    writeln!(out, "ctc_violations={}", f.violations).unwrap();
    writeln!(out, "ctc_violation_rate={:.6}", f.violation_rate).unwrap();
    match f.recommended {
        Some(k) => writeln!(out, "recommended_subsample={k}").unwrap(),
        None => writeln!(out, "recommended_subsample=none").unwrap(),
    }
}

impl FeasibilityReport {
    pub fn to_key_values(&self) -> String {
        let mut out = format!("subsample={}\n", self.spec.kind);
        write_feasibility_kv(&mut out, self);
        out
    }

    pub fn to_table(&self) -> String {
        format!(
            "ctc check ({}): {} of {} pairs violate ({:.2}%), recommended {}\n",
            self.spec.kind,
            self.violations,
            self.pairs,
            self.violation_rate * 100.0,
            self.recommended.map_or("none".to_string(), |k| k.to_string())
        )
    }
}

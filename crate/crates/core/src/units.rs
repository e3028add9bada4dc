//! Discrete unit sequences, de-duplication and time masking.
//!
//! Text format: one sequence per line, space-separated decimal unit IDs,
//! optionally preceded by `source_id<TAB>`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{bail, Error, Result};
use crate::rng::SplitMix64;

/// Processing stage of a unit sequence. Transitions only go forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Raw,
    Dedup,
    Bpe,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Raw => "raw",
            Stage::Dedup => "dedup",
            Stage::Bpe => "bpe",
        })
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Stage::Raw),
            "dedup" => Ok(Stage::Dedup),
            "bpe" => Ok(Stage::Bpe),
            other => Err(Error::Value(format!("unknown stage {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitSequence {
    units: Vec<u32>,
    vocab_size: u32,
    stage: Stage,
    /// Set once time masking has run; the mask ID `vocab_size` becomes legal.
    masked: bool,
    source_id: Option<String>,
}

impl UnitSequence {
    pub fn new(units: Vec<u32>, vocab_size: u32, stage: Stage) -> Result<Self> {
        Self::build(units, vocab_size, stage, false)
    }

    /// A sequence that may contain the reserved mask ID (`vocab_size`).
    pub fn new_masked(units: Vec<u32>, vocab_size: u32, stage: Stage) -> Result<Self> {
        Self::build(units, vocab_size, stage, true)
    }

    fn build(units: Vec<u32>, vocab_size: u32, stage: Stage, masked: bool) -> Result<Self> {
        let limit = vocab_size as u64 + masked as u64;
        if let Some(pos) = units.iter().position(|&u| u as u64 >= limit) {
            bail!(
                Value,
                "unit {} at position {} outside vocabulary of {}",
                units[pos],
                pos,
                limit
            );
        }
        Ok(Self {
            units,
            vocab_size,
            stage,
            masked,
            source_id: None,
        })
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = Some(id.into());
        self
    }

    pub fn units(&self) -> &[u32] {
        &self.units
    }

    pub fn into_units(self) -> Vec<u32> {
        self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn is_masked(&self) -> bool {
        self.masked
    }

    pub fn mask_id(&self) -> u32 {
        self.vocab_size
    }

    /// Number of symbols the sequence may legally contain, mask included.
    pub fn effective_vocab(&self) -> u32 {
        self.vocab_size + self.masked as u32
    }

    pub fn source_id(&self) -> Option<&str> {
        self.source_id.as_deref()
    }

    pub(crate) fn derive(&self, units: Vec<u32>, vocab_size: u32, stage: Stage, masked: bool) -> Self {
        Self {
            units,
            vocab_size,
            stage,
            masked,
            source_id: self.source_id.clone(),
        }
    }

    pub fn to_text_line(&self) -> String {
        let body: Vec<String> = self.units.iter().map(u32::to_string).collect();
        match &self.source_id {
            Some(id) => format!("{id}\t{}", body.join(" ")),
            None => body.join(" "),
        }
    }
}

/// Collapses maximal runs of equal units to a single occurrence.
pub fn deduplicate(s: &UnitSequence) -> Result<UnitSequence> {
    if s.stage != Stage::Raw {
        bail!(Stage, "de-duplication expects a raw sequence, got {}", s.stage);
    }
    let mut out: Vec<u32> = Vec::with_capacity(s.units.len());
    for &u in &s.units {
        if out.last() != Some(&u) {
            out.push(u);
        }
    }
    out.shrink_to_fit();
    Ok(s.derive(out, s.vocab_size, Stage::Dedup, s.masked))
}

/// Replaces up to `n_masks` random spans with the mask ID (`vocab_size`).
///
/// For each span one draw gives `width = 1 + below(max_width)`. If the
/// sequence is shorter than `width` the span is skipped and no start is
/// drawn; otherwise a second draw gives `start = below(len - width + 1)`.
pub fn time_mask(s: &UnitSequence, n_masks: usize, max_width: usize, seed: u64) -> Result<UnitSequence> {
    if s.stage == Stage::Bpe {
        bail!(Stage, "time masking applies before subword modeling, got a bpe sequence");
    }
    if n_masks == 0 {
        return Ok(s.clone());
    }
    if max_width == 0 {
        bail!(Value, "max_width must be at least 1 when masking");
    }
    let mut rng = SplitMix64::new(seed);
    let mut units = s.units.clone();
    let len = units.len() as u64;
    let mask = s.mask_id();
    for _ in 0..n_masks {
        let width = 1 + rng.below(max_width as u64);
        if width > len {
            continue;
        }
        let start = rng.below(len - width + 1) as usize;
        units[start..start + width as usize].fill(mask);
    }
    Ok(s.derive(units, s.vocab_size, s.stage, true))
}

/// One parsed line of a unit text file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitLine {
    pub source_id: Option<String>,
    pub units: Vec<u32>,
}

pub fn parse_unit_text(text: &str) -> Result<Vec<UnitLine>> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if text.is_empty() {
        return Ok(Vec::new());
    }
    body.split('\n')
        .enumerate()
        .map(|(i, line)| {
            let line = line.strip_suffix('\r').unwrap_or(line);
            let (source_id, rest) = match line.split_once('\t') {
                Some((id, rest)) => (Some(id.to_string()), rest),
                None => (None, line),
            };
            let units = rest
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<u32>()
                        .map_err(|_| Error::Format(format!("line {}: bad unit {:?}", i + 1, tok)))
                })
                .collect::<Result<Vec<u32>>>()?;
            Ok(UnitLine { source_id, units })
        })
        .collect()
}

pub fn read_unit_lines(path: &Path) -> Result<Vec<UnitLine>> {
    parse_unit_text(&fs::read_to_string(path)?)
}

/// Smallest vocabulary that holds every unit in `lines`.
pub fn inferred_vocab(lines: &[UnitLine]) -> u32 {
    lines
        .iter()
        .flat_map(|l| l.units.iter())
        .max()
        .map_or(1, |&m| m + 1)
}

/// Reads a unit file into sequences of the given vocabulary and stage.
/// With `masked`, the ID `vocab_size` is accepted as the mask symbol.
pub fn read_units(path: &Path, vocab_size: u32, stage: Stage, masked: bool) -> Result<Vec<UnitSequence>> {
    lines_to_sequences(read_unit_lines(path)?, vocab_size, stage, masked)
}

pub fn lines_to_sequences(
    lines: Vec<UnitLine>,
    vocab_size: u32,
    stage: Stage,
    masked: bool,
) -> Result<Vec<UnitSequence>> {
    lines
        .into_iter()
        .map(|l| {
            let s = UnitSequence::build(l.units, vocab_size, stage, masked)?;
            Ok(match l.source_id {
                Some(id) => s.with_source_id(id),
                None => s,
            })
        })
        .collect()
}

pub fn units_to_text(corpus: &[UnitSequence]) -> String {
    let mut out = String::new();
    for s in corpus {
        out.push_str(&s.to_text_line());
        out.push('\n');
    }
    out
}

pub fn write_units(path: &Path, corpus: &[UnitSequence]) -> Result<()> {
    fs::write(path, units_to_text(corpus))?;
    Ok(())
}

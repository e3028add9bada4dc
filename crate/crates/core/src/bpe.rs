//! Byte-pair encoding over integer unit alphabets.
//!
//! Training repeatedly merges the most frequent adjacent pair (ties go to
//! the smaller left ID, then the smaller right ID) into a new metatoken
//! `base_vocab + i`. Pair counts include overlapping occurrences, and pairs
//! never cross sequence boundaries. A merge rewrites every non-overlapping
//! occurrence scanning left to right.
//!
//! Model file: a header line `base_vocab N target_vocab M`, then one merge
//! per line as `left right new`.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{bail, Error, Result};
use crate::units::{Stage, UnitSequence};

type Pair = (u32, u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    base_vocab: u32,
    target_vocab: u32,
    merges: Vec<Pair>,
    ranks: HashMap<Pair, u32>,
}

/// Rewrites non-overlapping occurrences of `pair` left to right.
fn replace_pair(seq: &[u32], pair: Pair, new_id: u32, out: &mut Vec<u32>) {
    out.clear();
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && seq[i] == pair.0 && seq[i + 1] == pair.1 {
            out.push(new_id);
            i += 2;
        } else {
            out.push(seq[i]);
            i += 1;
        }
    }
}

impl BpeModel {
    /// Builds a model from merges whose new IDs run consecutively from `base_vocab`.
    pub fn from_merges(base_vocab: u32, target_vocab: u32, merges: Vec<Pair>) -> Result<Self> {
        if base_vocab as u64 + merges.len() as u64 > target_vocab as u64 {
            bail!(
                Value,
                "{} merges over a base of {} exceed the target vocabulary {}",
                merges.len(),
                base_vocab,
                target_vocab
            );
        }
        let mut ranks = HashMap::with_capacity(merges.len());
        for (i, &(l, r)) in merges.iter().enumerate() {
            let new_id = base_vocab + i as u32;
            if l >= new_id || r >= new_id {
                bail!(Value, "merge {i} ({l}, {r}) refers to an ID not below {new_id}");
            }
            if ranks.insert((l, r), i as u32).is_some() {
                bail!(Value, "pair ({l}, {r}) merged twice");
            }
        }
        Ok(Self {
            base_vocab,
            target_vocab,
            merges,
            ranks,
        })
    }

    pub fn base_vocab(&self) -> u32 {
        self.base_vocab
    }

    pub fn target_vocab(&self) -> u32 {
        self.target_vocab
    }

    /// Base units plus learned metatokens.
    pub fn vocab_size(&self) -> u32 {
        self.base_vocab + self.merges.len() as u32
    }

    /// `(left, right)` of each merge; merge `i` creates ID `base_vocab + i`.
    pub fn merges(&self) -> &[Pair] {
        &self.merges
    }

    /// The first `n` merges as a model of their own.
    pub fn truncated(&self, n: usize) -> Self {
        let merges = self.merges[..n.min(self.merges.len())].to_vec();
        Self::from_merges(self.base_vocab, self.target_vocab, merges).unwrap()
    }

    /// Encodes raw IDs; every ID must be below `base_vocab`.
    pub fn encode_units(&self, units: &[u32]) -> Result<Vec<u32>> {
        if let Some(&u) = units.iter().find(|&&u| u >= self.base_vocab) {
            bail!(Value, "unit {u} outside the base vocabulary of {}", self.base_vocab);
        }
        self.encode_tokens(units)
    }

    /// Continues encoding a sequence that may already hold merged tokens,
    /// e.g. the output of a model sharing this model's first merges.
    pub fn encode_tokens(&self, tokens: &[u32]) -> Result<Vec<u32>> {
        let limit = self.vocab_size();
        if let Some(&u) = tokens.iter().find(|&&u| u >= limit) {
            bail!(Value, "token {u} outside the model vocabulary of {limit}");
        }
        let mut cur = tokens.to_vec();
        let mut next = Vec::with_capacity(cur.len());
        // Applying the lowest-ranked present pair each round equals applying
        // merges in trained order: a merge only creates pairs of higher rank.
        loop {
            let best = cur
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0], w[1])).copied())
                .min();
            let Some(rank) = best else { break };
            replace_pair(&cur, self.merges[rank as usize], self.base_vocab + rank, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn decode_units(&self, units: &[u32]) -> Result<Vec<u32>> {
        let limit = self.vocab_size();
        let mut out = Vec::with_capacity(units.len() * 2);
        let mut stack = Vec::new();
        for &u in units {
            if u >= limit {
                bail!(Value, "token {u} outside the model vocabulary of {limit}");
            }
            stack.push(u);
            while let Some(t) = stack.pop() {
                if t < self.base_vocab {
                    out.push(t);
                } else {
                    let (l, r) = self.merges[(t - self.base_vocab) as usize];
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("base_vocab {} target_vocab {}\n", self.base_vocab, self.target_vocab);
        for (i, (l, r)) in self.merges.iter().enumerate() {
            writeln!(out, "{l} {r} {}", self.base_vocab + i as u32).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty BPE model".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (base_vocab, target_vocab) = match fields[..] {
            ["base_vocab", b, "target_vocab", t] => (
                b.parse::<u32>().map_err(|_| Error::Format(format!("bad base_vocab {b:?}")))?,
                t.parse::<u32>().map_err(|_| Error::Format(format!("bad target_vocab {t:?}")))?,
            ),
            _ => bail!(Format, "bad BPE model header {header:?}"),
        };
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<Vec<u32>, _>>()
                .map_err(|_| Error::Format(format!("bad merge line {line:?}")))?;
            let [l, r, new] = nums[..] else {
                bail!(Format, "merge line {line:?} needs three fields");
            };
            if new as u64 != base_vocab as u64 + i as u64 {
                bail!(Corrupt, "merge {i} creates {new}, expected {}", base_vocab as u64 + i as u64);
            }
            merges.push((l, r));
        }
        Self::from_merges(base_vocab, target_vocab, merges).map_err(|e| match e {
            Error::Value(msg) => Error::Corrupt(msg),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Incremental pair statistics for training.
struct PairStats {
    counts: HashMap<Pair, u64>,
    by_count: BTreeSet<(Reverse<u64>, u32, u32)>,
    /// Sequences that may contain each pair (may be stale, never incomplete).
    occurs_in: HashMap<Pair, HashSet<usize>>,
}

impl PairStats {
    fn new(seqs: &[Vec<u32>]) -> Self {
        let mut stats = Self {
            counts: HashMap::new(),
            by_count: BTreeSet::new(),
            occurs_in: HashMap::new(),
        };
        let mut delta = HashMap::new();
        for (idx, s) in seqs.iter().enumerate() {
            for w in s.windows(2) {
                *delta.entry((w[0], w[1])).or_insert(0i64) += 1;
                stats.occurs_in.entry((w[0], w[1])).or_default().insert(idx);
            }
        }
        stats.apply(delta);
        stats
    }

    fn apply(&mut self, delta: HashMap<Pair, i64>) {
        for (pair, d) in delta {
            if d == 0 {
                continue;
            }
            let old = self.counts.get(&pair).copied().unwrap_or(0);
            let new = (old as i64 + d) as u64;
            if old > 0 {
                self.by_count.remove(&(Reverse(old), pair.0, pair.1));
            }
            if new > 0 {
                self.counts.insert(pair, new);
                self.by_count.insert((Reverse(new), pair.0, pair.1));
            } else {
                self.counts.remove(&pair);
            }
        }
    }

    fn best(&self) -> Option<(Pair, u64)> {
        self.by_count.first().map(|&(Reverse(c), l, r)| ((l, r), c))
    }
}

/// Learns merges over a de-duplicated corpus until the vocabulary reaches
/// `target_vocab` or no adjacent pair occurs at least twice.
pub fn bpe_train(corpus: &[UnitSequence], target_vocab: u32) -> Result<BpeModel> {
    let Some(first) = corpus.first() else {
        bail!(Value, "cannot train BPE on an empty corpus");
    };
    let base_vocab = first.effective_vocab();
    for s in corpus {
        if s.stage() != Stage::Dedup {
            bail!(Stage, "BPE training expects de-duplicated sequences, got {}", s.stage());
        }
        if s.effective_vocab() != base_vocab {
            bail!(
                Value,
                "mixed vocabularies in corpus ({} vs {})",
                base_vocab,
                s.effective_vocab()
            );
        }
    }
    if target_vocab <= base_vocab {
        bail!(
            Config,
            "target vocabulary {target_vocab} must exceed the base vocabulary {base_vocab}"
        );
    }
    let mut seqs: Vec<Vec<u32>> = corpus.iter().map(|s| s.units().to_vec()).collect();
    let mut stats = PairStats::new(&seqs);
    let mut merges = Vec::new();
    let mut scratch = Vec::new();
    while base_vocab + (merges.len() as u32) < target_vocab {
        let Some((pair, count)) = stats.best() else { break };
        if count < 2 {
            break;
        }
        let new_id = base_vocab + merges.len() as u32;
        let mut touched: Vec<usize> = stats.occurs_in.remove(&pair).unwrap_or_default().into_iter().collect();
        touched.sort_unstable();
        let mut delta: HashMap<Pair, i64> = HashMap::new();
        for idx in touched {
            let seq = &mut seqs[idx];
            if !seq.windows(2).any(|w| (w[0], w[1]) == pair) {
                continue;
            }
            for w in seq.windows(2) {
                *delta.entry((w[0], w[1])).or_insert(0) -= 1;
            }
            replace_pair(seq, pair, new_id, &mut scratch);
            std::mem::swap(seq, &mut scratch);
            for w in seq.windows(2) {
                *delta.entry((w[0], w[1])).or_insert(0) += 1;
                if w[0] == new_id || w[1] == new_id {
                    stats.occurs_in.entry((w[0], w[1])).or_default().insert(idx);
                }
            }
        }
        stats.apply(delta);
        merges.push(pair);
    }
    BpeModel::from_merges(base_vocab, target_vocab, merges)
}

pub fn bpe_encode(model: &BpeModel, s: &UnitSequence) -> Result<UnitSequence> {
    if s.stage() != Stage::Dedup {
        bail!(Stage, "BPE encoding expects a de-duplicated sequence, got {}", s.stage());
    }
    let units = model.encode_units(s.units())?;
    Ok(s.derive(units, model.vocab_size(), Stage::Bpe, false))
}

pub fn bpe_decode(model: &BpeModel, s: &UnitSequence) -> Result<UnitSequence> {
    if s.stage() != Stage::Bpe {
        bail!(Stage, "BPE decoding expects a bpe sequence, got {}", s.stage());
    }
    let units = model.decode_units(s.units())?;
    Ok(s.derive(units, model.base_vocab(), Stage::Dedup, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dedup(units: &[u32], vocab: u32) -> UnitSequence {
        UnitSequence::new(units.to_vec(), vocab, Stage::Dedup).unwrap()
    }

    #[test]
    fn trains_nested_merges() {
        let m = bpe_train(&[dedup(&[1, 2, 1, 2, 1, 2], 3)], 5).unwrap();
        assert_eq!(m.merges(), &[(1, 2), (3, 3)]);
        assert_eq!(m.encode_units(&[1, 2, 1, 2, 1, 2]).unwrap(), vec![4, 3]);
    }

    #[test]
    fn no_repeated_pairs_no_merges() {
        let m = bpe_train(&[dedup(&[0, 1, 2, 3, 4], 5)], 50).unwrap();
        assert!(m.merges().is_empty());
    }

    #[test]
    fn pairs_do_not_cross_sequences() {
        // (1,2) appears once per sequence and (2,1) only across the boundary.
        let m = bpe_train(&[dedup(&[1, 2], 3), dedup(&[1, 2], 3)], 10).unwrap();
        assert_eq!(m.merges(), &[(1, 2)]);
        let m = bpe_train(&[dedup(&[2], 3), dedup(&[1], 3)], 10).unwrap();
        assert!(m.merges().is_empty());
    }

    #[test]
    fn ties_prefer_smaller_ids() {
        let m = bpe_train(&[dedup(&[3, 4, 3, 4, 1, 2, 1, 2], 5)], 6).unwrap();
        assert_eq!(m.merges(), &[(1, 2)]);
    }

    #[test]
    fn training_errors() {
        assert!(matches!(bpe_train(&[], 10), Err(Error::Value(_))));
        assert!(matches!(bpe_train(&[dedup(&[1], 3)], 3), Err(Error::Config(_))));
        let raw = UnitSequence::new(vec![1], 3, Stage::Raw).unwrap();
        assert!(matches!(bpe_train(&[raw], 10), Err(Error::Stage(_))));
        assert!(bpe_train(&[dedup(&[1], 3), dedup(&[1], 4)], 10).is_err());
    }

    #[test]
    fn encode_example() {
        let m = BpeModel::from_merges(4, 5, vec![(1, 2)]).unwrap();
        let e = bpe_encode(&m, &dedup(&[1, 2, 1, 2, 3], 4)).unwrap();
        assert_eq!(e.units(), &[4, 4, 3]);
        assert_eq!(e.stage(), Stage::Bpe);
        let d = bpe_decode(&m, &e).unwrap();
        assert_eq!(d.units(), &[1, 2, 1, 2, 3]);
        assert_eq!(d.stage(), Stage::Dedup);
    }

    #[test]
    fn empty_model_is_identity() {
        let m = BpeModel::from_merges(4, 10, vec![]).unwrap();
        assert_eq!(m.encode_units(&[3, 1, 1, 0]).unwrap(), vec![3, 1, 1, 0]);
    }

    #[test]
    fn deep_decode() {
        let m = BpeModel::from_merges(2, 4, vec![(1, 1), (2, 2)]).unwrap();
        assert_eq!(m.decode_units(&[3]).unwrap(), vec![1, 1, 1, 1]);
        assert_eq!(m.decode_units(&[0, 1]).unwrap(), vec![0, 1]);
        assert!(matches!(m.decode_units(&[4]), Err(Error::Value(_))));
    }

    #[test]
    fn encode_rejects_out_of_base() {
        let m = BpeModel::from_merges(4, 5, vec![(1, 2)]).unwrap();
        assert!(matches!(m.encode_units(&[4]), Err(Error::Value(_))));
    }

    #[test]
    fn overlapping_runs_replace_left_to_right() {
        let m = BpeModel::from_merges(2, 3, vec![(1, 1)]).unwrap();
        assert_eq!(m.encode_units(&[1, 1, 1]).unwrap(), vec![2, 1]);
        assert_eq!(m.encode_units(&[1, 1, 1, 1]).unwrap(), vec![2, 2]);
    }

    #[test]
    fn invalid_merge_tables() {
        assert!(BpeModel::from_merges(3, 5, vec![(3, 1)]).is_err());
        assert!(BpeModel::from_merges(3, 4, vec![(1, 2), (2, 1)]).is_err());
        assert!(BpeModel::from_merges(3, 6, vec![(1, 2), (1, 2)]).is_err());
    }

    #[test]
    fn text_roundtrip_and_validation() {
        let m = BpeModel::from_merges(3, 6, vec![(1, 2), (3, 3), (0, 4)]).unwrap();
        let text = m.to_text();
        assert_eq!(text, "base_vocab 3 target_vocab 6\n1 2 3\n3 3 4\n0 4 5\n");
        assert_eq!(BpeModel::from_text(&text).unwrap(), m);
        assert!(BpeModel::from_text("base_vocab 3 target_vocab 6\n1 2 4\n").is_err());
        assert!(BpeModel::from_text("vocab 3\n").is_err());
        assert!(BpeModel::from_text("").is_err());
    }
}

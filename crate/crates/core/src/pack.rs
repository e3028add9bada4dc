//! Fixed-width bit-packed unit corpora.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! "DSU1" | version u16 = 1 | vocab_size u32 | bits_per_unit u8 | n_sequences u64
//!        | n_sequences x length u32 | payload
//! ```
//!
//! The payload concatenates every unit code of every sequence, most
//! significant bit first, and is zero-padded once at the end to a byte
//! boundary.

use std::fs;
use std::path::Path;

use crate::error::{bail, Result};
use crate::units::{Stage, UnitSequence};

pub const DSU_MAGIC: &[u8; 4] = b"DSU1";
pub const DSU_VERSION: u16 = 1;
pub const DSU_HEADER_LEN: usize = 19;

/// `ceil(log2(max(vocab_size, 2)))`.
pub fn bits_per_unit(vocab_size: u32) -> u8 {
    let v = vocab_size.max(2);
    (32 - (v - 1).leading_zeros()) as u8
}

/// Exact size of a packed file.
pub fn packed_size(n_sequences: usize, total_units: u64, bits: u8) -> u64 {
    DSU_HEADER_LEN as u64 + 4 * n_sequences as u64 + (total_units * bits as u64).div_ceil(8)
}

struct BitWriter {
    out: Vec<u8>,
    acc: u64,
    n: u32,
}

impl BitWriter {
    fn new(out: Vec<u8>) -> Self {
        Self { out, acc: 0, n: 0 }
    }

    fn put(&mut self, value: u32, bits: u8) {
        self.acc = (self.acc << bits) | value as u64;
        self.n += bits as u32;
        while self.n >= 8 {
            self.n -= 8;
            self.out.push((self.acc >> self.n) as u8);
        }
        self.acc &= (1u64 << self.n) - 1;
    }

    fn finish(mut self) -> Vec<u8> {
        if self.n > 0 {
            self.out.push((self.acc << (8 - self.n)) as u8);
        }
        self.out
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    acc: u64,
    n: u32,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self {
            bytes,
            pos: 0,
            acc: 0,
            n: 0,
        }
    }

    fn get(&mut self, bits: u8) -> u32 {
        while self.n < bits as u32 {
            self.acc = (self.acc << 8) | self.bytes[self.pos] as u64;
            self.pos += 1;
            self.n += 8;
        }
        self.n -= bits as u32;
        let v = (self.acc >> self.n) & ((1u64 << bits) - 1);
        self.acc &= (1u64 << self.n) - 1;
        v as u32
    }

    fn leftover(&self) -> u64 {
        self.acc
    }
}

/// Serializes a corpus; every unit must be below `vocab_size`.
pub fn pack_to_bytes(corpus: &[UnitSequence], vocab_size: u32) -> Result<Vec<u8>> {
    if vocab_size == 0 {
        bail!(Value, "vocabulary size must be positive");
    }
    let bits = bits_per_unit(vocab_size);
    let mut total = 0u64;
    for (i, s) in corpus.iter().enumerate() {
        if s.len() > u32::MAX as usize {
            bail!(Value, "sequence {i} is too long for a u32 length field");
        }
        if let Some(&u) = s.units().iter().find(|&&u| u >= vocab_size) {
            bail!(Value, "sequence {i} holds unit {u} outside vocabulary {vocab_size}");
        }
        total += s.len() as u64;
    }
    let size = packed_size(corpus.len(), total, bits) as usize;
    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(DSU_MAGIC);
    out.extend_from_slice(&DSU_VERSION.to_le_bytes());
    out.extend_from_slice(&vocab_size.to_le_bytes());
    out.push(bits);
    out.extend_from_slice(&(corpus.len() as u64).to_le_bytes());
    for s in corpus {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    }
    let mut w = BitWriter::new(out);
    for s in corpus {
        for &u in s.units() {
            w.put(u, bits);
        }
    }
    let out = w.finish();
    debug_assert_eq!(out.len(), size);
    Ok(out)
}

/// Parses a packed corpus, tagging every sequence with `stage`.
pub fn unpack_from_bytes(bytes: &[u8], stage: Stage) -> Result<Vec<UnitSequence>> {
    if bytes.len() < DSU_HEADER_LEN {
        bail!(Format, "packed header truncated ({} bytes)", bytes.len());
    }
    if &bytes[0..4] != DSU_MAGIC {
        bail!(Format, "bad packed-unit magic {:?}", &bytes[0..4]);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != DSU_VERSION {
        bail!(Format, "unsupported packed-unit version {version}");
    }
    let vocab_size = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    let bits = bytes[10];
    if vocab_size == 0 || bits != bits_per_unit(vocab_size) {
        bail!(
            Format,
            "bit width {bits} inconsistent with vocabulary {vocab_size}"
        );
    }
    let n_seq = u64::from_le_bytes(bytes[11..19].try_into().unwrap());
    let lengths_end = n_seq
        .checked_mul(4)
        .and_then(|n| n.checked_add(DSU_HEADER_LEN as u64))
        .filter(|&e| e <= bytes.len() as u64);
    let Some(lengths_end) = lengths_end else {
        bail!(Format, "file truncated inside the table of {n_seq} lengths");
    };
    let lengths: Vec<usize> = bytes[DSU_HEADER_LEN..lengths_end as usize]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let total: u64 = lengths.iter().map(|&l| l as u64).sum();
    let payload = &bytes[lengths_end as usize..];
    let expected = (total * bits as u64).div_ceil(8);
    if (payload.len() as u64) < expected {
        bail!(
            Format,
            "payload truncated: {} of {} bytes",
            payload.len(),
            expected
        );
    }
    if payload.len() as u64 > expected {
        bail!(Format, "{} trailing bytes after payload", payload.len() as u64 - expected);
    }
    let mut r = BitReader::new(payload);
    let mut corpus = Vec::with_capacity(lengths.len());
    for (i, &len) in lengths.iter().enumerate() {
        let mut units = Vec::with_capacity(len);
        for _ in 0..len {
            let u = r.get(bits);
            if u >= vocab_size {
                bail!(Corrupt, "sequence {i} decodes unit {u} outside vocabulary {vocab_size}");
            }
            units.push(u);
        }
        corpus.push(UnitSequence::new(units, vocab_size, stage)?);
    }
    if r.leftover() != 0 {
        bail!(Corrupt, "non-zero padding bits");
    }
    Ok(corpus)
}

pub fn pack_units(corpus: &[UnitSequence], vocab_size: u32, path: &Path) -> Result<()> {
    fs::write(path, pack_to_bytes(corpus, vocab_size)?)?;
    Ok(())
}

/// Reads a packed corpus. Stage is not stored on disk; sequences come back as
/// [`Stage::Raw`]. Use [`unpack_units_as`] to tag them otherwise.
pub fn unpack_units(path: &Path) -> Result<Vec<UnitSequence>> {
    unpack_units_as(path, Stage::Raw)
}

pub fn unpack_units_as(path: &Path, stage: Stage) -> Result<Vec<UnitSequence>> {
    unpack_from_bytes(&fs::read(path)?, stage)
}

/// Per-frame storage ratio of `feature_dim` values of `feature_bits` each
/// against one `bits_per_unit` code.
pub fn compression_ratio(feature_dim: u32, feature_bits: u32, bits_per_unit: u32) -> Result<f64> {
    if bits_per_unit == 0 {
        bail!(Value, "bits per unit must be positive");
    }
    if feature_dim == 0 || feature_bits == 0 {
        bail!(Value, "feature dimension and width must be positive");
    }
    Ok(feature_dim as f64 * feature_bits as f64 / bits_per_unit as f64)
}

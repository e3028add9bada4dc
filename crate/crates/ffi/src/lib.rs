//! C ABI over `dsu-core`.
//!
//! Objects cross the boundary as opaque handles created by `dsu_*_new`,
//! `dsu_*_load` or an operation's `out` parameter, and released with the
//! matching `dsu_*_free`. Every fallible call returns a [`DsuStatus`]; on
//! failure [`dsu_last_error`] describes the problem. Output handles are
//! written only on success.
//!
//! Pointer contract for every function: handle arguments must be live
//! handles from this library, array arguments must point to at least the
//! stated number of elements (or may be NULL when that number is 0), and
//! strings must be NUL-terminated UTF-8. NULL handles are reported as
//! `DSU_STATUS_NULL_POINTER` rather than dereferenced. Handles may be moved
//! between threads but not used from two threads at once.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dsu_core::analysis::{corpus_stats, ctc_feasibility, StageLengths, SubsampleKind, SubsampleSpec};
use dsu_core::bpe::{bpe_decode, bpe_encode, bpe_train, BpeModel};
use dsu_core::cca::{cca_score, CcaInput};
use dsu_core::fbank::{compute_fbank, FbankConfig, Pcm};
use dsu_core::feature_io::{load_features, save_features, FeatureFormat, FeatureMatrix};
use dsu_core::kmeans::{kmeans_fit, BatchSize, Codebook, KmeansConfig};
use dsu_core::pack::{pack_units, unpack_units_as};
use dsu_core::units::{deduplicate, time_mask};
use dsu_core::{Error, Stage, UnitSequence};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsuStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Corrupt = 5,
    Value = 6,
    Config = 7,
    Stage = 8,
    Panic = 9,
}

pub const DSU_STAGE_RAW: u32 = 0;
pub const DSU_STAGE_DEDUP: u32 = 1;
pub const DSU_STAGE_BPE: u32 = 2;

pub const DSU_SUBSAMPLE_LINEAR: u32 = 0;
pub const DSU_SUBSAMPLE_CONV1D1: u32 = 1;
pub const DSU_SUBSAMPLE_CONV1D2: u32 = 2;
pub const DSU_SUBSAMPLE_CONV1D3: u32 = 3;

/// A feature matrix, one frame per row.
pub struct DsuFeatures(FeatureMatrix);
/// A trained k-means codebook.
pub struct DsuCodebook(Codebook);
/// One unit sequence with its vocabulary and stage.
pub struct DsuUnits(UnitSequence);
/// An ordered list of unit sequences.
pub struct DsuCorpus(Vec<UnitSequence>);
/// A BPE merge table.
pub struct DsuBpeModel(BpeModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DsuCtcReport {
    pub pairs: usize,
    pub violations: usize,
    pub violation_rate: f64,
    /// Largest feasible conv stride as a `DSU_SUBSAMPLE_*` value, or -1.
    pub recommended: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DsuStats {
    pub n_sequences: usize,
    pub avg_len_raw: f64,
    pub avg_len_dedup: f64,
    pub avg_len_bpe: f64,
    pub avg_len_subsampled: f64,
    /// `1 - avg_len_bpe / avg_len_raw`.
    pub reduction_ratio: f64,
}

// ---------------------------------------------------------------------------
// errors

enum Fail {
    Core(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DsuStatus {
    match e {
        Error::Io(_) => DsuStatus::Io,
        Error::Format(_) => DsuStatus::Format,
        Error::Corrupt(_) => DsuStatus::Corrupt,
        Error::Value(_) => DsuStatus::Value,
        Error::Config(_) => DsuStatus::Config,
        Error::Stage(_) => DsuStatus::Stage,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DsuStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsuStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("{what} is NULL"));
            DsuStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_last_error(msg);
            DsuStatus::InvalidArgument
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            DsuStatus::Panic
        }
    }
}

/// Message for the most recent failure on this thread, or NULL. The string
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dsu_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dsu_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// pointer helpers

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(Fail::Null(what))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_value<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = value;
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn stage_of(v: u32) -> Result<Stage, Fail> {
    match v {
        DSU_STAGE_RAW => Ok(Stage::Raw),
        DSU_STAGE_DEDUP => Ok(Stage::Dedup),
        DSU_STAGE_BPE => Ok(Stage::Bpe),
        _ => Err(Fail::Arg(format!("unknown stage {v}"))),
    }
}

fn stage_code(s: Stage) -> u32 {
    match s {
        Stage::Raw => DSU_STAGE_RAW,
        Stage::Dedup => DSU_STAGE_DEDUP,
        Stage::Bpe => DSU_STAGE_BPE,
    }
}

fn kind_of(v: u32) -> Result<SubsampleKind, Fail> {
    match v {
        DSU_SUBSAMPLE_LINEAR => Ok(SubsampleKind::Linear),
        DSU_SUBSAMPLE_CONV1D1 => Ok(SubsampleKind::Conv1d1),
        DSU_SUBSAMPLE_CONV1D2 => Ok(SubsampleKind::Conv1d2),
        DSU_SUBSAMPLE_CONV1D3 => Ok(SubsampleKind::Conv1d3),
        _ => Err(Fail::Arg(format!("unknown subsample kind {v}"))),
    }
}

fn kind_code(k: SubsampleKind) -> u32 {
    match k {
        SubsampleKind::Linear => DSU_SUBSAMPLE_LINEAR,
        SubsampleKind::Conv1d1 => DSU_SUBSAMPLE_CONV1D1,
        SubsampleKind::Conv1d2 => DSU_SUBSAMPLE_CONV1D2,
        SubsampleKind::Conv1d3 => DSU_SUBSAMPLE_CONV1D3,
    }
}

// ---------------------------------------------------------------------------
// features

/// Copies `rows * cols` row-major floats into a new feature matrix.
#[no_mangle]
pub unsafe extern "C" fn dsu_features_new(
    data: *const f32,
    rows: usize,
    cols: usize,
    out: *mut *mut DsuFeatures,
) -> DsuStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Fail::Arg("rows * cols overflows".into()))?;
        let data = slice(data, len, "data")?;
        put(out, DsuFeatures(FeatureMatrix::new(rows, cols, data.to_vec())?))
    })
}

/// Reads a DSF file, or a text matrix when the name ends in `.txt`.
#[no_mangle]
pub unsafe extern "C" fn dsu_features_load(p: *const c_char, out: *mut *mut DsuFeatures) -> DsuStatus {
    guard(|| {
        let p = path(p)?;
        let m = load_features(&p, FeatureFormat::from_path(&p))?;
        put(out, DsuFeatures(m))
    })
}

#[no_mangle]
pub unsafe extern "C" fn dsu_features_save(f: *const DsuFeatures, p: *const c_char) -> DsuStatus {
    guard(|| Ok(save_features(&get(f, "features")?.0, &path(p)?)?))
}

/// Number of rows, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn dsu_features_rows(f: *const DsuFeatures) -> usize {
    f.as_ref().map_or(0, |f| f.0.n_frames())
}

/// Number of columns, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn dsu_features_cols(f: *const DsuFeatures) -> usize {
    f.as_ref().map_or(0, |f| f.0.n_dims())
}

/// Row-major data owned by the handle, or NULL for NULL.
#[no_mangle]
pub unsafe extern "C" fn dsu_features_data(f: *const DsuFeatures) -> *const f32 {
    f.as_ref().map_or(ptr::null(), |f| f.0.data().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn dsu_features_free(f: *mut DsuFeatures) {
    free(f)
}

/// Log-mel filterbank with default settings (80 mels, 25 ms / 10 ms frames).
#[no_mangle]
pub unsafe extern "C" fn dsu_fbank_compute(
    samples: *const f32,
    n_samples: usize,
    sample_rate: u32,
    out: *mut *mut DsuFeatures,
) -> DsuStatus {
    guard(|| {
        let pcm = Pcm {
            sample_rate,
            samples: slice(samples, n_samples, "samples")?.to_vec(),
        };
        let m = compute_fbank(&pcm, &FbankConfig::new(sample_rate))?;
        put(out, DsuFeatures(m))
    })
}

// ---------------------------------------------------------------------------
// codebook

/// Trains a k-means++ initialised codebook. `batch_size` 0 means full-batch
/// Lloyd; otherwise mini-batches of that size for `max_iters` updates.
#[no_mangle]
pub unsafe extern "C" fn dsu_kmeans_fit(
    f: *const DsuFeatures,
    k: usize,
    seed: u64,
    max_iters: usize,
    batch_size: usize,
    workers: usize,
    out: *mut *mut DsuCodebook,
) -> DsuStatus {
    guard(|| {
        let data = &get(f, "features")?.0;
        let cfg = KmeansConfig {
            max_iters,
            batch_size: if batch_size == 0 { BatchSize::Full } else { BatchSize::Mini(batch_size) },
            workers: workers.max(1),
            ..KmeansConfig::new(k, seed)
        };
        put(out, DsuCodebook(kmeans_fit(data, &cfg)?))
    })
}

/// Loads centroids from `path` and metadata from `path.meta`.
#[no_mangle]
pub unsafe extern "C" fn dsu_codebook_load(p: *const c_char, out: *mut *mut DsuCodebook) -> DsuStatus {
    guard(|| put(out, DsuCodebook(Codebook::load(&path(p)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn dsu_codebook_save(cb: *const DsuCodebook, p: *const c_char) -> DsuStatus {
    guard(|| Ok(get(cb, "codebook")?.0.save(&path(p)?)?))
}

#[no_mangle]
pub unsafe extern "C" fn dsu_codebook_k(cb: *const DsuCodebook) -> usize {
    cb.as_ref().map_or(0, |c| c.0.k())
}

#[no_mangle]
pub unsafe extern "C" fn dsu_codebook_dim(cb: *const DsuCodebook) -> usize {
    cb.as_ref().map_or(0, |c| c.0.dim())
}

/// Final training inertia, or NaN for NULL.
#[no_mangle]
pub unsafe extern "C" fn dsu_codebook_inertia(cb: *const DsuCodebook) -> f64 {
    cb.as_ref().map_or(f64::NAN, |c| c.0.meta().inertia)
}

/// Nearest-centroid units for every frame, as a raw sequence over `k` units.
#[no_mangle]
pub unsafe extern "C" fn dsu_codebook_assign(
    cb: *const DsuCodebook,
    f: *const DsuFeatures,
    workers: usize,
    out: *mut *mut DsuUnits,
) -> DsuStatus {
    guard(|| {
        let s = get(cb, "codebook")?.0.assign_with(&get(f, "features")?.0, workers.max(1))?;
        put(out, DsuUnits(s))
    })
}

#[no_mangle]
pub unsafe extern "C" fn dsu_codebook_free(cb: *mut DsuCodebook) {
    free(cb)
}

// ---------------------------------------------------------------------------
// unit sequences

/// Copies `len` units. `stage` is a `DSU_STAGE_*` value.
#[no_mangle]
pub unsafe extern "C" fn dsu_units_new(
    units: *const u32,
    len: usize,
    vocab_size: u32,
    stage: u32,
    out: *mut *mut DsuUnits,
) -> DsuStatus {
    guard(|| {
        let s = UnitSequence::new(slice(units, len, "units")?.to_vec(), vocab_size, stage_of(stage)?)?;
        put(out, DsuUnits(s))
    })
}

#[no_mangle]
pub unsafe extern "C" fn dsu_units_len(s: *const DsuUnits) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Units owned by the handle; NULL for NULL or empty sequences.
#[no_mangle]
pub unsafe extern "C" fn dsu_units_data(s: *const DsuUnits) -> *const u32 {
    match s.as_ref() {
        Some(s) if !s.0.is_empty() => s.0.units().as_ptr(),
        _ => ptr::null(),
    }
}

#[no_mangle]
pub unsafe extern "C" fn dsu_units_vocab_size(s: *const DsuUnits) -> u32 {
    s.as_ref().map_or(0, |s| s.0.vocab_size())
}

/// Whether the sequence may contain the mask ID (`vocab_size`).
#[no_mangle]
pub unsafe extern "C" fn dsu_units_is_masked(s: *const DsuUnits) -> bool {
    s.as_ref().is_some_and(|s| s.0.is_masked())
}

/// `DSU_STAGE_*` of the sequence; `DSU_STAGE_RAW` for NULL.
#[no_mangle]
pub unsafe extern "C" fn dsu_units_stage(s: *const DsuUnits) -> u32 {
    s.as_ref().map_or(DSU_STAGE_RAW, |s| stage_code(s.0.stage()))
}

/// Collapses runs of repeated units; the input must be raw.
#[no_mangle]
pub unsafe extern "C" fn dsu_units_dedup(s: *const DsuUnits, out: *mut *mut DsuUnits) -> DsuStatus {
    guard(|| put(out, DsuUnits(deduplicate(&get(s, "units")?.0)?)))
}

/// Overwrites up to `n_masks` random spans with the mask ID `vocab_size`.
#[no_mangle]
pub unsafe extern "C" fn dsu_units_mask(
    s: *const DsuUnits,
    n_masks: usize,
    max_width: usize,
    seed: u64,
    out: *mut *mut DsuUnits,
) -> DsuStatus {
    guard(|| put(out, DsuUnits(time_mask(&get(s, "units")?.0, n_masks, max_width, seed)?)))
}

#[no_mangle]
pub unsafe extern "C" fn dsu_units_free(s: *mut DsuUnits) {
    free(s)
}

// ---------------------------------------------------------------------------
// corpora

#[no_mangle]
pub unsafe extern "C" fn dsu_corpus_new(out: *mut *mut DsuCorpus) -> DsuStatus {
    guard(|| put(out, DsuCorpus(Vec::new())))
}

/// Appends a copy of `s`.
#[no_mangle]
pub unsafe extern "C" fn dsu_corpus_push(c: *mut DsuCorpus, s: *const DsuUnits) -> DsuStatus {
    guard(|| {
        let s = get(s, "units")?.0.clone();
        get_mut(c, "corpus")?.0.push(s);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dsu_corpus_len(c: *const DsuCorpus) -> usize {
    c.as_ref().map_or(0, |c| c.0.len())
}

/// Copies sequence `index` into a new handle.
#[no_mangle]
pub unsafe extern "C" fn dsu_corpus_get(c: *const DsuCorpus, index: usize, out: *mut *mut DsuUnits) -> DsuStatus {
    guard(|| {
        let c = get(c, "corpus")?;
        let s = c
            .0
            .get(index)
            .ok_or_else(|| Fail::Arg(format!("index {index} out of range for {} sequences", c.0.len())))?;
        put(out, DsuUnits(s.clone()))
    })
}

/// Bit-packs the corpus at `vocab_size` into a DSU file.
#[no_mangle]
pub unsafe extern "C" fn dsu_pack_save(c: *const DsuCorpus, vocab_size: u32, p: *const c_char) -> DsuStatus {
    guard(|| Ok(pack_units(&get(c, "corpus")?.0, vocab_size, &path(p)?)?))
}

/// Reads a DSU file, tagging the sequences with `stage`.
#[no_mangle]
pub unsafe extern "C" fn dsu_pack_load(p: *const c_char, stage: u32, out: *mut *mut DsuCorpus) -> DsuStatus {
    guard(|| {
        let corpus = unpack_units_as(&path(p)?, stage_of(stage)?)?;
        put(out, DsuCorpus(corpus))
    })
}

#[no_mangle]
pub unsafe extern "C" fn dsu_corpus_free(c: *mut DsuCorpus) {
    free(c)
}

// ---------------------------------------------------------------------------
// BPE

/// Learns merges over a de-duplicated corpus until `target_vocab` tokens.
#[no_mangle]
pub unsafe extern "C" fn dsu_bpe_train(c: *const DsuCorpus, target_vocab: u32, out: *mut *mut DsuBpeModel) -> DsuStatus {
    guard(|| put(out, DsuBpeModel(bpe_train(&get(c, "corpus")?.0, target_vocab)?)))
}

#[no_mangle]
pub unsafe extern "C" fn dsu_bpe_load(p: *const c_char, out: *mut *mut DsuBpeModel) -> DsuStatus {
    guard(|| put(out, DsuBpeModel(BpeModel::load(&path(p)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn dsu_bpe_save(m: *const DsuBpeModel, p: *const c_char) -> DsuStatus {
    guard(|| Ok(get(m, "model")?.0.save(&path(p)?)?))
}

/// Base vocabulary plus learned merges.
#[no_mangle]
pub unsafe extern "C" fn dsu_bpe_vocab_size(m: *const DsuBpeModel) -> u32 {
    m.as_ref().map_or(0, |m| m.0.vocab_size())
}

#[no_mangle]
pub unsafe extern "C" fn dsu_bpe_num_merges(m: *const DsuBpeModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.merges().len())
}

#[no_mangle]
pub unsafe extern "C" fn dsu_bpe_encode(m: *const DsuBpeModel, s: *const DsuUnits, out: *mut *mut DsuUnits) -> DsuStatus {
    guard(|| put(out, DsuUnits(bpe_encode(&get(m, "model")?.0, &get(s, "units")?.0)?)))
}

#[no_mangle]
pub unsafe extern "C" fn dsu_bpe_decode(m: *const DsuBpeModel, s: *const DsuUnits, out: *mut *mut DsuUnits) -> DsuStatus {
    guard(|| put(out, DsuUnits(bpe_decode(&get(m, "model")?.0, &get(s, "units")?.0)?)))
}

#[no_mangle]
pub unsafe extern "C" fn dsu_bpe_free(m: *mut DsuBpeModel) {
    free(m)
}

// ---------------------------------------------------------------------------
// analysis

/// Sequence length after the given `DSU_SUBSAMPLE_*` layer; `len` must be positive.
#[no_mangle]
pub unsafe extern "C" fn dsu_subsampled_length(len: usize, kind: u32, out: *mut usize) -> DsuStatus {
    guard(|| {
        let spec = SubsampleSpec::new(kind_of(kind)?);
        put_value(out, dsu_core::analysis::subsampled_length(len, &spec)?)
    })
}

/// Checks `n` (input length, target length) pairs under subsampling `kind`.
#[no_mangle]
pub unsafe extern "C" fn dsu_ctc_check(
    input_lens: *const usize,
    target_lens: *const usize,
    n: usize,
    kind: u32,
    out: *mut DsuCtcReport,
) -> DsuStatus {
    guard(|| {
        let inputs = slice(input_lens, n, "input_lens")?;
        let targets = slice(target_lens, n, "target_lens")?;
        let pairs: Vec<(usize, usize)> = inputs.iter().copied().zip(targets.iter().copied()).collect();
        let r = ctc_feasibility(&pairs, &SubsampleSpec::new(kind_of(kind)?));
        put_value(
            out,
            DsuCtcReport {
                pairs: r.pairs,
                violations: r.violations,
                violation_rate: r.violation_rate,
                recommended: r.recommended.map_or(-1, |k| kind_code(k) as i32),
            },
        )
    })
}

/// Length statistics over `n` index-aligned sequences.
#[no_mangle]
pub unsafe extern "C" fn dsu_corpus_stats(
    raw_lens: *const usize,
    dedup_lens: *const usize,
    bpe_lens: *const usize,
    n: usize,
    kind: u32,
    out: *mut DsuStats,
) -> DsuStatus {
    guard(|| {
        let lengths = StageLengths {
            raw: slice(raw_lens, n, "raw_lens")?.to_vec(),
            dedup: slice(dedup_lens, n, "dedup_lens")?.to_vec(),
            bpe: slice(bpe_lens, n, "bpe_lens")?.to_vec(),
        };
        let s = corpus_stats(&lengths, &SubsampleSpec::new(kind_of(kind)?), None)?;
        put_value(
            out,
            DsuStats {
                n_sequences: s.n_sequences,
                avg_len_raw: s.avg_len_raw,
                avg_len_dedup: s.avg_len_dedup,
                avg_len_bpe: s.avg_len_bpe,
                avg_len_subsampled: s.avg_len_subsampled,
                reduction_ratio: s.reduction_ratio,
            },
        )
    })
}

/// Mean canonical correlation between row-major `x` (`n` x `dx`) and `y`
/// (`n` x `dy`) with ridge `reg_eps`.
#[no_mangle]
pub unsafe extern "C" fn dsu_cca_score(
    x: *const f64,
    n: usize,
    dx: usize,
    y: *const f64,
    dy: usize,
    reg_eps: f64,
    out: *mut f64,
) -> DsuStatus {
    guard(|| {
        let size = |d: usize| n.checked_mul(d).ok_or_else(|| Fail::Arg("matrix size overflows".into()));
        let x = slice(x, size(dx)?, "x")?;
        let y = slice(y, size(dy)?, "y")?;
        let inp = CcaInput::from_row_major(n, dx, x, dy, y)?.with_reg_eps(reg_eps)?;
        put_value(out, cca_score(&inp))
    })
}

//! K-means codebooks over feature frames.
//!
//! Training runs Lloyd iterations (or mini-batch updates) from a k-means++
//! or uniform-random start. Quantization maps a frame to the index of its
//! nearest centroid under squared Euclidean distance, lowest index on ties.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::thread;

use crate::error::{bail, Error, Result};
use crate::feature_io::{load_features, save_features, FeatureFormat, FeatureMatrix};
use crate::rng::SplitMix64;
use crate::units::{Stage, UnitSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    KmeansPlusPlus,
    Random,
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans++" => Ok(Init::KmeansPlusPlus),
            "random" => Ok(Init::Random),
            other => Err(Error::Config(format!("unknown init {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Mini(usize),
}

impl FromStr for BatchSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(BatchSize::Full);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(BatchSize::Mini(n)),
            _ => Err(Error::Config(format!("batch size must be \"full\" or a positive count, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once the relative inertia improvement drops below this.
    pub tol: f64,
    pub seed: u64,
    pub init: Init,
    pub batch_size: BatchSize,
    /// Threads used for the assignment step. Results do not depend on it.
    pub workers: usize,
}

impl KmeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iters: 100,
            tol: 1e-4,
            seed,
            init: Init::KmeansPlusPlus,
            batch_size: BatchSize::Full,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub seed: u64,
    /// Centroid updates performed (Lloyd steps or mini-batches).
    pub iterations: usize,
    /// Inertia of the stored (f32) centroids over the training data.
    pub inertia: f64,
    /// Full-batch inertia at every assignment step. Empty for mini-batch runs.
    pub inertia_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: FeatureMatrix,
    meta: TrainingMeta,
}

#[inline]
fn sq_dist(a: &[f32], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            let d = x[l] as f64 - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = *x as f64 - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Squared distance over f64 inputs, same lane layout as [`sq_dist`].
/// Returns `None` once the running sum exceeds `bound`: lane sums only grow,
/// so the final value could not come in below it.
#[inline]
fn sq_dist_bounded(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(16);
    let mut cb = b.chunks_exact(16);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for q in 0..4 {
            for l in 0..4 {
                let d = x[4 * q + l] - y[4 * q + l];
                acc[l] += d * d;
            }
        }
        if (acc[0] + acc[1]) + (acc[2] + acc[3]) > bound {
            return None;
        }
    }
    let (ra, rb) = (ca.remainder(), cb.remainder());
    let mut qa = ra.chunks_exact(4);
    let mut qb = rb.chunks_exact(4);
    for (x, y) in (&mut qa).zip(&mut qb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in qa.remainder().iter().zip(qb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    Some((acc[0] + acc[1]) + (acc[2] + acc[3]) + tail)
}

/// Index and squared distance of the nearest centroid; lowest index wins ties.
#[inline]
fn nearest(row: &[f32], centroids: &[f64], dim: usize, buf: &mut Vec<f64>) -> (u32, f64) {
    buf.clear();
    buf.extend(row.iter().map(|&v| v as f64));
    let mut best = (0u32, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        if let Some(d) = sq_dist_bounded(buf, c, best.1) {
            if d < best.1 {
                best = (j as u32, d);
            }
        }
    }
    best
}

/// Assigns every frame, splitting contiguous chunks over `workers` threads.
fn assign_all(data: &FeatureMatrix, centroids: &[f64], workers: usize) -> (Vec<u32>, Vec<f64>) {
    let n = data.n_frames();
    let dim = data.n_dims();
    let mut labels = vec![0u32; n];
    let mut dists = vec![0.0f64; n];
    let workers = workers.max(1).min(n.max(1));
    if workers == 1 || n < 1024 {
        let mut buf = Vec::with_capacity(dim);
        for (i, row) in data.rows().enumerate() {
            (labels[i], dists[i]) = nearest(row, centroids, dim, &mut buf);
        }
        return (labels, dists);
    }
    let chunk = n.div_ceil(workers);
    thread::scope(|scope| {
        for (t, (lab, dis)) in labels.chunks_mut(chunk).zip(dists.chunks_mut(chunk)).enumerate() {
            scope.spawn(move || {
                let base = t * chunk;
                let mut buf = Vec::with_capacity(dim);
                for (off, (l, d)) in lab.iter_mut().zip(dis.iter_mut()).enumerate() {
                    (*l, *d) = nearest(data.row(base + off), centroids, dim, &mut buf);
                }
            });
        }
    });
    (labels, dists)
}

fn check_training_data(data: &FeatureMatrix, k: usize) -> Result<()> {
    if k == 0 {
        bail!(Config, "k must be at least 1");
    }
    if data.n_frames() < k {
        bail!(Value, "{} training frames cannot support k={}", data.n_frames(), k);
    }
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    for row in data.rows() {
        // +0.0 and -0.0 are the same point.
        seen.insert(row.iter().map(|v| (v + 0.0).to_bits()).collect());
        if seen.len() >= k {
            return Ok(());
        }
    }
    bail!(Value, "only {} distinct training frames for k={}", seen.len(), k)
}

fn init_kmeans_pp(data: &FeatureMatrix, k: usize, rng: &mut SplitMix64) -> Vec<f64> {
    let n = data.n_frames();
    let dim = data.n_dims();
    let mut centroids: Vec<f64> = Vec::with_capacity(k * dim);
    let first = rng.below(n as u64) as usize;
    centroids.extend(data.row(first).iter().map(|&v| v as f64));
    let mut closest: Vec<f64> = data.rows().map(|r| sq_dist(r, &centroids[..dim])).collect();
    for _ in 1..k {
        let total: f64 = closest.iter().sum();
        let target = rng.next_f64() * total;
        let mut acc = 0.0;
        // Fall back to the last positive-weight point if rounding overshoots.
        let mut pick = closest.iter().rposition(|&d| d > 0.0).unwrap_or(0);
        for (i, &d) in closest.iter().enumerate() {
            acc += d;
            if acc > target && d > 0.0 {
                pick = i;
                break;
            }
        }
        let start = centroids.len();
        centroids.extend(data.row(pick).iter().map(|&v| v as f64));
        let c = &centroids[start..];
        for (i, row) in data.rows().enumerate() {
            let d = sq_dist(row, c);
            if d < closest[i] {
                closest[i] = d;
            }
        }
    }
    centroids
}

fn init_random(data: &FeatureMatrix, k: usize, rng: &mut SplitMix64) -> Vec<f64> {
    let n = data.n_frames();
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx[..k]
        .iter()
        .flat_map(|&i| data.row(i).iter().map(|&v| v as f64))
        .collect()
}

/// Recomputes means for fixed labels, moving the farthest point of a
/// multi-member cluster into each empty cluster first.
fn update_centroids(
    data: &FeatureMatrix,
    k: usize,
    labels: &mut [u32],
    dists: &mut [f64],
    centroids: &mut [f64],
) {
    let dim = data.n_dims();
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l as usize] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut far: Option<usize> = None;
        for i in 0..labels.len() {
            if counts[labels[i] as usize] > 1 && far.is_none_or(|f| dists[i] > dists[f]) {
                far = Some(i);
            }
        }
        if let Some(i) = far {
            counts[labels[i] as usize] -= 1;
            counts[j] = 1;
            labels[i] = j as u32;
            dists[i] = 0.0;
        }
    }
    let mut sums = vec![0.0f64; k * dim];
    for (row, &l) in data.rows().zip(labels.iter()) {
        let s = &mut sums[l as usize * dim..(l as usize + 1) * dim];
        for (acc, &v) in s.iter_mut().zip(row) {
            *acc += v as f64;
        }
    }
    for j in 0..k {
        if counts[j] == 0 {
            continue;
        }
        let inv = counts[j] as f64;
        for (c, s) in centroids[j * dim..(j + 1) * dim]
            .iter_mut()
            .zip(&sums[j * dim..(j + 1) * dim])
        {
            *c = s / inv;
        }
    }
}

fn lloyd(data: &FeatureMatrix, cfg: &KmeansConfig, centroids: &mut [f64]) -> (usize, Vec<f64>) {
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let (mut labels, mut dists) = assign_all(data, centroids, cfg.workers);
        let inertia: f64 = dists.iter().sum();
        let converged = match history.last() {
            Some(&prev) => prev - inertia <= cfg.tol * prev,
            None => inertia == 0.0,
        };
        history.push(inertia);
        if converged || iterations >= cfg.max_iters {
            break;
        }
        update_centroids(data, cfg.k, &mut labels, &mut dists, centroids);
        iterations += 1;
    }
    (iterations, history)
}

fn mini_batch(
    data: &FeatureMatrix,
    cfg: &KmeansConfig,
    batch: usize,
    rng: &mut SplitMix64,
    centroids: &mut [f64],
) -> usize {
    let dim = data.n_dims();
    let n = data.n_frames() as u64;
    let mut counts = vec![0u64; cfg.k];
    let mut picks = vec![0usize; batch];
    let mut targets = vec![0u32; batch];
    let mut buf = Vec::with_capacity(dim);
    for _ in 0..cfg.max_iters {
        for p in picks.iter_mut() {
            *p = rng.below(n) as usize;
        }
        for (t, &p) in targets.iter_mut().zip(&picks) {
            *t = nearest(data.row(p), centroids, dim, &mut buf).0;
        }
        for (&t, &p) in targets.iter().zip(&picks) {
            let j = t as usize;
            counts[j] += 1;
            let eta = 1.0 / counts[j] as f64;
            for (c, &x) in centroids[j * dim..(j + 1) * dim].iter_mut().zip(data.row(p)) {
                *c += eta * (x as f64 - *c);
            }
        }
    }
    cfg.max_iters
}

/// Trains a codebook. Fixed seed and data give a bit-identical result.
pub fn kmeans_fit(data: &FeatureMatrix, cfg: &KmeansConfig) -> Result<Codebook> {
    if cfg.tol.is_nan() || cfg.tol < 0.0 {
        bail!(Config, "tol must be non-negative");
    }
    check_training_data(data, cfg.k)?;
    let mut rng = SplitMix64::new(cfg.seed);
    let mut centroids = match cfg.init {
        Init::KmeansPlusPlus => init_kmeans_pp(data, cfg.k, &mut rng),
        Init::Random => init_random(data, cfg.k, &mut rng),
    };
    let (iterations, inertia_history) = match cfg.batch_size {
        BatchSize::Mini(b) if b < data.n_frames() => {
            (mini_batch(data, cfg, b, &mut rng, &mut centroids), Vec::new())
        }
        _ => lloyd(data, cfg, &mut centroids),
    };
    let centroids = FeatureMatrix::new(
        cfg.k,
        data.n_dims(),
        centroids.into_iter().map(|v| v as f32).collect(),
    )?;
    let mut cb = Codebook {
        centroids,
        meta: TrainingMeta {
            seed: cfg.seed,
            iterations,
            inertia: 0.0,
            inertia_history,
        },
    };
    cb.meta.inertia = cb.inertia_with(data, cfg.workers)?;
    Ok(cb)
}

impl Codebook {
    /// Wraps existing centroids (one per row).
    pub fn from_centroids(centroids: FeatureMatrix) -> Result<Self> {
        if centroids.n_frames() == 0 {
            bail!(Value, "a codebook needs at least one centroid");
        }
        Ok(Self {
            centroids,
            meta: TrainingMeta {
                seed: 0,
                iterations: 0,
                inertia: 0.0,
                inertia_history: Vec::new(),
            },
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.n_frames()
    }

    pub fn dim(&self) -> usize {
        self.centroids.n_dims()
    }

    pub fn centroids(&self) -> &FeatureMatrix {
        &self.centroids
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    fn centroids_f64(&self) -> Vec<f64> {
        self.centroids.data().iter().map(|&v| v as f64).collect()
    }

    fn check_dims(&self, frames: &FeatureMatrix) -> Result<()> {
        if frames.n_dims() != self.dim() {
            bail!(
                Value,
                "frames have {} dims but the codebook has {}",
                frames.n_dims(),
                self.dim()
            );
        }
        Ok(())
    }

    pub fn assign_labels(&self, frames: &FeatureMatrix, workers: usize) -> Result<Vec<u32>> {
        self.check_dims(frames)?;
        Ok(assign_all(frames, &self.centroids_f64(), workers).0)
    }

    /// Quantizes frames into a raw unit sequence over a `k`-unit vocabulary.
    pub fn assign(&self, frames: &FeatureMatrix) -> Result<UnitSequence> {
        self.assign_with(frames, 1)
    }

    pub fn assign_with(&self, frames: &FeatureMatrix, workers: usize) -> Result<UnitSequence> {
        let labels = self.assign_labels(frames, workers)?;
        UnitSequence::new(labels, self.k() as u32, Stage::Raw)
    }

    /// Sum of squared distances from each frame to its nearest centroid.
    pub fn inertia(&self, data: &FeatureMatrix) -> Result<f64> {
        self.inertia_with(data, 1)
    }

    fn inertia_with(&self, data: &FeatureMatrix, workers: usize) -> Result<f64> {
        self.check_dims(data)?;
        Ok(assign_all(data, &self.centroids_f64(), workers).1.iter().sum())
    }

    pub fn meta_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }

    /// Writes the centroids as DSF at `path` and metadata to `<path>.meta`.
    pub fn save(&self, path: &Path) -> Result<()> {
        save_features(&self.centroids, path)?;
        let mut meta = String::new();
        writeln!(meta, "k={}", self.k()).unwrap();
        writeln!(meta, "dim={}", self.dim()).unwrap();
        writeln!(meta, "seed={}", self.meta.seed).unwrap();
        writeln!(meta, "iterations={}", self.meta.iterations).unwrap();
        writeln!(meta, "inertia={}", self.meta.inertia).unwrap();
        fs::write(Self::meta_path(path), meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let centroids = load_features(path, FeatureFormat::Dsf)?;
        let mut cb = Self::from_centroids(centroids)?;
        let text = fs::read_to_string(Self::meta_path(path))?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let Some((key, value)) = line.split_once('=') else {
                bail!(Format, "codebook metadata line {line:?} is not key=value");
            };
            let bad = || Error::Format(format!("bad codebook metadata value {line:?}"));
            match key.trim() {
                "k" => {
                    if value.trim().parse::<usize>().map_err(|_| bad())? != cb.k() {
                        bail!(Corrupt, "metadata k disagrees with centroid file");
                    }
                }
                "dim" => {
                    if value.trim().parse::<usize>().map_err(|_| bad())? != cb.dim() {
                        bail!(Corrupt, "metadata dim disagrees with centroid file");
                    }
                }
                "seed" => cb.meta.seed = value.trim().parse().map_err(|_| bad())?,
                "iterations" => cb.meta.iterations = value.trim().parse().map_err(|_| bad())?,
                "inertia" => cb.meta.inertia = value.trim().parse().map_err(|_| bad())?,
                other => bail!(Format, "unknown codebook metadata key {other:?}"),
            }
        }
        Ok(cb)
    }
}

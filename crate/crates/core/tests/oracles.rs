//! Library results checked against deliberately naive reimplementations.

use dsu_core::bpe::{bpe_encode, bpe_train, BpeModel};
use dsu_core::cca::{cca_score, CcaInput};
use dsu_core::feature_io::FeatureMatrix;
use dsu_core::kmeans::{kmeans_fit, Codebook, KmeansConfig};
use dsu_core::rng::SplitMix64;
use dsu_core::{Stage, UnitSequence};

mod common;
use common::{jacobi_singular_values, oracle_cca, Mat};

// ---------- CCA ----------

fn random_mat(rng: &mut SplitMix64, n: usize, d: usize) -> Mat {
    (0..n).map(|_| (0..d).map(|_| rng.next_f64() * 2.0 - 1.0).collect()).collect()
}

fn to_input(x: &Mat, y: &Mat) -> CcaInput {
    let flat = |m: &Mat| m.iter().flatten().copied().collect::<Vec<f64>>();
    CcaInput::from_row_major(x.len(), x[0].len(), &flat(x), y[0].len(), &flat(y)).unwrap()
}

#[test]
fn cca_matches_cholesky_jacobi_oracle() {
    let mut rng = SplitMix64::new(77);
    for _ in 0..100 {
        let x = random_mat(&mut rng, 50, 5);
        // Share some signal so the correlations are not all tiny.
        let y: Mat = x
            .iter()
            .map(|r| {
                vec![
                    r[0] + 0.5 * (rng.next_f64() - 0.5),
                    r[1] - r[2] + rng.next_f64(),
                    rng.next_f64(),
                ]
            })
            .collect();
        let got = cca_score(&to_input(&x, &y));
        let want = oracle_cca(&x, &y, 1e-6);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
}

#[test]
fn jacobi_oracle_sanity() {
    let a = vec![vec![3.0, 0.0], vec![0.0, -2.0], vec![0.0, 0.0]];
    let sv = jacobi_singular_values(&a);
    assert!((sv[0] - 3.0).abs() < 1e-12 && (sv[1] - 2.0).abs() < 1e-12);
}

// ---------- k-means: brute-force assignment and Lloyd fixed point ----------

fn brute_nearest(c: &FeatureMatrix, x: &[f32]) -> u32 {
    let mut best = (f64::INFINITY, 0u32);
    for (k, row) in c.rows().enumerate() {
        let d: f64 = row.iter().zip(x).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum();
        if d < best.0 {
            best = (d, k as u32);
        }
    }
    best.1
}

fn blobs(rng: &mut SplitMix64, n: usize, d: usize) -> FeatureMatrix {
    let centers: Vec<Vec<f32>> = (0..5).map(|_| (0..d).map(|_| (rng.next_f64() * 20.0) as f32).collect()).collect();
    let data: Vec<f32> = (0..n)
        .flat_map(|i| {
            let c = &centers[i % 5];
            c.iter().map(|&v| v + (rng.next_f64() as f32 - 0.5) * 3.0).collect::<Vec<_>>()
        })
        .collect();
    FeatureMatrix::new(n, d, data).unwrap()
}

#[test]
fn assignment_matches_brute_force() {
    let mut rng = SplitMix64::new(3);
    let data = blobs(&mut rng, 3000, 7);
    let cb = kmeans_fit(&data, &KmeansConfig::new(9, 1)).unwrap();
    for workers in [1, 3] {
        let labels = cb.assign_labels(&data, workers).unwrap();
        for (i, x) in data.rows().enumerate() {
            assert_eq!(labels[i], brute_nearest(cb.centroids(), x), "frame {i}");
        }
    }
}

#[test]
fn assignment_ties_go_to_lowest_index() {
    let c = FeatureMatrix::from_rows(&[[1.0f32, 0.0], [-1.0, 0.0], [0.0, 1.0]]).unwrap();
    let cb = Codebook::from_centroids(c).unwrap();
    let frames = FeatureMatrix::from_rows(&[[0.0f32, 0.0], [0.0, 5.0]]).unwrap();
    assert_eq!(cb.assign_labels(&frames, 1).unwrap(), vec![0, 2]);
}

#[test]
fn converged_centroids_are_cluster_means() {
    let mut rng = SplitMix64::new(8);
    let data = blobs(&mut rng, 1500, 4);
    let mut cfg = KmeansConfig::new(5, 2);
    cfg.tol = 0.0;
    cfg.max_iters = 500;
    let cb = kmeans_fit(&data, &cfg).unwrap();
    assert!(cb.meta().iterations < 500, "did not converge");
    let labels = cb.assign_labels(&data, 1).unwrap();
    for k in 0..5 {
        let members: Vec<&[f32]> = data.rows().zip(&labels).filter(|(_, &l)| l == k as u32).map(|(r, _)| r).collect();
        assert!(!members.is_empty());
        for j in 0..4 {
            let m = members.iter().map(|r| r[j] as f64).sum::<f64>() / members.len() as f64;
            assert!((cb.centroids().row(k)[j] as f64 - m).abs() < 1e-4, "cluster {k} dim {j}");
        }
    }
    let brute: f64 = data
        .rows()
        .zip(&labels)
        .map(|(x, &l)| {
            cb.centroids().row(l as usize).iter().zip(x).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum::<f64>()
        })
        .sum();
    assert!((cb.meta().inertia - brute).abs() <= 1e-9 * brute);
}

// ---------- BPE: full recount every step ----------

fn naive_train(corpus: &[Vec<u32>], base: u32, target: u32) -> Vec<(u32, u32)> {
    let mut seqs = corpus.to_vec();
    let mut merges = Vec::new();
    let mut next = base;
    while next < target {
        let mut counts = std::collections::BTreeMap::<(u32, u32), usize>::new();
        for s in &seqs {
            for w in s.windows(2) {
                *counts.entry((w[0], w[1])).or_default() += 1;
            }
        }
        // BTreeMap iterates pairs in ascending order, so the first maximum is the smallest pair.
        let Some((&pair, &count)) = counts.iter().fold(None, |best: Option<(&(u32, u32), &usize)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        }) else {
            break;
        };
        if count < 2 {
            break;
        }
        for s in &mut seqs {
            *s = replace(s, pair, next);
        }
        merges.push(pair);
        next += 1;
    }
    merges
}

fn replace(s: &[u32], pair: (u32, u32), new: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(s.len());
    let mut i = 0;
    while i < s.len() {
        if i + 1 < s.len() && (s[i], s[i + 1]) == pair {
            out.push(new);
            i += 2;
        } else {
            out.push(s[i]);
            i += 1;
        }
    }
    out
}

fn naive_encode(s: &[u32], merges: &[(u32, u32)], base: u32) -> Vec<u32> {
    merges
        .iter()
        .enumerate()
        .fold(s.to_vec(), |acc, (i, &p)| replace(&acc, p, base + i as u32))
}

fn random_corpus(rng: &mut SplitMix64, base: u32) -> Vec<Vec<u32>> {
    let n = 1 + rng.below(8) as usize;
    (0..n)
        .map(|_| {
            let len = rng.below(40) as usize;
            (0..len).map(|_| rng.below(base as u64) as u32).collect()
        })
        .collect()
}

#[test]
fn bpe_matches_naive_trainer_and_encoder() {
    let mut rng = SplitMix64::new(21);
    for case in 0..400 {
        let base = 2 + rng.below(5) as u32;
        let corpus = random_corpus(&mut rng, base);
        let target = base + 1 + rng.below(30) as u32;
        let seqs: Vec<UnitSequence> = corpus
            .iter()
            .map(|s| UnitSequence::new(s.clone(), base, Stage::Dedup).unwrap())
            .collect();
        let model = bpe_train(&seqs, target).unwrap();
        let want = naive_train(&corpus, base, target);
        assert_eq!(model.merges(), &want[..], "case {case}");
        for (s, raw) in seqs.iter().zip(&corpus) {
            assert_eq!(bpe_encode(&model, s).unwrap().units(), &naive_encode(raw, &want, base)[..]);
        }
    }
}

#[test]
fn encoder_matches_sequential_merges_for_arbitrary_models() {
    let mut rng = SplitMix64::new(5);
    for _ in 0..300 {
        let base = 2 + rng.below(4) as u32;
        let mut merges = Vec::new();
        for _ in 0..rng.below(12) {
            let hi = base as u64 + merges.len() as u64;
            let pair = (rng.below(hi) as u32, rng.below(hi) as u32);
            if !merges.contains(&pair) {
                merges.push(pair);
            }
        }
        let model = BpeModel::from_merges(base, base + merges.len() as u32, merges.clone()).unwrap();
        let s: Vec<u32> = (0..rng.below(60)).map(|_| rng.below(base as u64) as u32).collect();
        assert_eq!(model.encode_units(&s).unwrap(), naive_encode(&s, &merges, base));
    }
}

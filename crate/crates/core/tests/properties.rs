use proptest::collection::vec;
use proptest::prelude::*;

use dsu_core::analysis::{
    corpus_stats, ctc_feasibility, subsampled_length, StageLengths, SubsampleKind, SubsampleSpec,
};
use dsu_core::bpe::{bpe_decode, bpe_encode, bpe_train, BpeModel};
use dsu_core::cca::{cca_score, select_layer, CcaInput};
use dsu_core::fbank::{compute_fbank, FbankConfig, Pcm};
use dsu_core::feature_io::FeatureMatrix;
use dsu_core::kmeans::{kmeans_fit, KmeansConfig};
use dsu_core::pack::{bits_per_unit, pack_to_bytes, packed_size, unpack_from_bytes, DSU_HEADER_LEN};
use dsu_core::rng::SplitMix64;
use dsu_core::units::{deduplicate, time_mask};
use dsu_core::{Stage, UnitSequence};
use nalgebra::DMatrix;

fn raw(units: Vec<u32>, vocab: u32) -> UnitSequence {
    UnitSequence::new(units, vocab, Stage::Raw).unwrap()
}

fn units_strategy(vocab: u32, max_len: usize) -> impl Strategy<Value = Vec<u32>> {
    vec(0..vocab, 0..max_len)
}

/// A valid merge list over `base` built from raw random pairs.
fn model_from(base: u32, picks: &[(u32, u32)]) -> BpeModel {
    let mut merges: Vec<(u32, u32)> = Vec::new();
    for &(a, b) in picks {
        let hi = base + merges.len() as u32;
        let pair = (a % hi, b % hi);
        if !merges.contains(&pair) {
            merges.push(pair);
        }
    }
    BpeModel::from_merges(base, base + merges.len() as u32, merges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dsf_roundtrip_is_bit_exact(rows in 1usize..20, cols in 1usize..12, seed: u64) {
        let mut rng = SplitMix64::new(seed);
        let data: Vec<f32> = (0..rows * cols)
            .map(|_| f32::from_bits(rng.next_u64() as u32))
            .map(|v| if v.is_finite() { v } else { 0.5 })
            .collect();
        let m = FeatureMatrix::new(rows, cols, data).unwrap();
        let back = FeatureMatrix::from_dsf_bytes(&m.to_dsf_bytes()).unwrap();
        let bits = |m: &FeatureMatrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&m), bits(&back));
        prop_assert_eq!((back.n_frames(), back.n_dims()), (rows, cols));
        // Any shorter payload is rejected.
        let bytes = m.to_dsf_bytes();
        prop_assert!(FeatureMatrix::from_dsf_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn dedup_is_idempotent_order_preserving_subsequence(units in units_strategy(6, 200)) {
        let s = raw(units.clone(), 6);
        let d = deduplicate(&s).unwrap();
        let again = deduplicate(&raw(d.units().to_vec(), 6)).unwrap();
        prop_assert_eq!(again.units(), d.units());
        prop_assert!(d.units().windows(2).all(|w| w[0] != w[1]));
        // Subsequence check, greedy.
        let mut it = units.iter();
        prop_assert!(d.units().iter().all(|u| it.any(|v| v == u)));
        if let Some(&first) = units.first() {
            prop_assert_eq!(d.units()[0], first);
        }
    }

    #[test]
    fn time_mask_keeps_length_and_unmasked_positions(
        units in units_strategy(10, 120),
        n_masks in 0usize..6,
        max_width in 1usize..15,
        seed: u64,
    ) {
        let s = raw(units.clone(), 10);
        let m = time_mask(&s, n_masks, max_width, seed).unwrap();
        prop_assert_eq!(m.len(), units.len());
        let masked = m.units().iter().zip(&units).filter(|(a, b)| a != b).count();
        for (a, b) in m.units().iter().zip(&units) {
            prop_assert!(a == b || *a == 10);
        }
        prop_assert!(m.units().iter().filter(|&&u| u == 10).count() <= n_masks * max_width);
        prop_assert!(masked <= n_masks * max_width);
        prop_assert_eq!(time_mask(&s, n_masks, max_width, seed).unwrap(), m);
    }

    #[test]
    fn bpe_random_models_are_lossless_monotone_and_compositional(
        base in 2u32..6,
        picks in vec((0u32..64, 0u32..64), 0..20),
        units in units_strategy(5, 150),
        split in 0usize..20,
    ) {
        let units: Vec<u32> = units.into_iter().map(|u| u % base).collect();
        let model = model_from(base, &picks);
        let enc = model.encode_units(&units).unwrap();
        prop_assert_eq!(model.decode_units(&enc).unwrap(), units.clone());

        let mut prev = units.len();
        for k in 0..=model.merges().len() {
            let len = model.truncated(k).encode_units(&units).unwrap().len();
            prop_assert!(len <= prev);
            prev = len;
        }

        let head = model.truncated(split).encode_units(&units).unwrap();
        prop_assert_eq!(model.encode_tokens(&head).unwrap(), enc);
    }

    #[test]
    fn bpe_training_is_deterministic_and_lossless(
        corpus in vec(units_strategy(4, 60), 1..6),
        extra in 1u32..30,
    ) {
        let seqs: Vec<UnitSequence> = corpus
            .iter()
            .map(|u| UnitSequence::new(u.clone(), 4, Stage::Dedup).unwrap())
            .collect();
        let a = bpe_train(&seqs, 4 + extra).unwrap();
        let b = bpe_train(&seqs, 4 + extra).unwrap();
        prop_assert_eq!(a.merges(), b.merges());
        prop_assert!(a.vocab_size() <= 4 + extra);
        for s in &seqs {
            let e = bpe_encode(&a, s).unwrap();
            let d = bpe_decode(&a, &e).unwrap();
            prop_assert_eq!(d.units(), s.units());
        }
    }

    #[test]
    fn pack_roundtrip_and_size(
        vocab in 2u32..=65536,
        lens in vec(0usize..50, 0..8),
        seed: u64,
    ) {
        let mut rng = SplitMix64::new(seed);
        let corpus: Vec<UnitSequence> = lens
            .iter()
            .map(|&l| raw((0..l).map(|_| rng.below(vocab as u64) as u32).collect(), vocab))
            .collect();
        let bytes = pack_to_bytes(&corpus, vocab).unwrap();
        let total: usize = lens.iter().sum();
        let bits = bits_per_unit(vocab);
        prop_assert_eq!(
            bytes.len(),
            DSU_HEADER_LEN + 4 * lens.len() + (total * bits as usize).div_ceil(8)
        );
        prop_assert_eq!(bytes.len() as u64, packed_size(lens.len(), total as u64, bits));
        let back = unpack_from_bytes(&bytes, Stage::Raw).unwrap();
        prop_assert_eq!(back.len(), corpus.len());
        for (a, b) in back.iter().zip(&corpus) {
            prop_assert_eq!(a.units(), b.units());
        }
    }

    #[test]
    fn bits_per_unit_depends_only_on_ceil_log2(v in 2u32..=65536) {
        let b = (v as f64).log2().ceil() as u32;
        prop_assert_eq!(bits_per_unit(v) as u32, b);
        // Smallest vocabulary with the same ceil(log2).
        let smallest = if b <= 1 { 2 } else { (1u32 << (b - 1)) + 1 };
        prop_assert_eq!(bits_per_unit(v), bits_per_unit(smallest));
    }

    #[test]
    fn subsampling_monotone_in_length_and_stride(len in 1usize..5000) {
        let l = |kind, len| subsampled_length(len, &SubsampleSpec::new(kind)).unwrap();
        for kind in SubsampleKind::ALL {
            prop_assert!(l(kind, len) <= l(kind, len + 1));
        }
        prop_assert_eq!(l(SubsampleKind::Linear, len), len);
        prop_assert!(l(SubsampleKind::Conv1d1, len) >= l(SubsampleKind::Conv1d2, len));
        prop_assert!(l(SubsampleKind::Conv1d2, len) >= l(SubsampleKind::Conv1d3, len));
    }

    #[test]
    fn feasibility_is_monotone_in_stride(input in 0usize..400, target in 0usize..300) {
        let ok = |s: usize| {
            let kind = SubsampleKind::conv_with_stride(s).unwrap();
            ctc_feasibility(&[(input, target)], &SubsampleSpec::new(kind)).violations == 0
        };
        for s in 2..=3 {
            if ok(s) {
                prop_assert!(ok(s - 1));
            }
        }
        let report = ctc_feasibility(&[(input, target)], &SubsampleSpec::new(SubsampleKind::Conv1d2));
        let best = (1..=3).rev().find(|&s| ok(s)).and_then(SubsampleKind::conv_with_stride);
        prop_assert_eq!(report.recommended, best);
    }

    #[test]
    fn reduction_ratio_bounds(rows in vec((0usize..300, 0usize..300, 0usize..300), 1..30)) {
        let mut lengths = StageLengths::default();
        for (a, b, c) in rows {
            let mut v = [a, b, c];
            v.sort_unstable_by(|x, y| y.cmp(x));
            lengths.raw.push(v[0]);
            lengths.dedup.push(v[1]);
            lengths.bpe.push(v[2]);
        }
        let stats = corpus_stats(&lengths, &SubsampleSpec::new(SubsampleKind::Conv1d2), None).unwrap();
        prop_assert!((0.0..=1.0).contains(&stats.reduction_ratio));
        let same = lengths.raw == lengths.bpe;
        let raw_total: usize = lengths.raw.iter().sum();
        if raw_total > 0 {
            prop_assert_eq!(stats.reduction_ratio == 0.0, same);
        }
    }

    #[test]
    fn select_layer_invariant_under_monotone_maps(scores in vec((0u32..40, 0.0f64..1.0), 1..10)) {
        let a = select_layer(&scores).unwrap();
        let mapped: Vec<(u32, f64)> = scores.iter().map(|&(l, s)| (l, (3.0 * s).exp() + s.powi(3))).collect();
        prop_assert_eq!(select_layer(&mapped).unwrap(), a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn cca_symmetric_bounded_and_transform_invariant(
        n in 20usize..60,
        dx in 1usize..5,
        dy in 1usize..4,
        seed: u64,
    ) {
        let mut rng = SplitMix64::new(seed);
        let x = DMatrix::from_fn(n, dx, |_, _| rng.next_f64() * 2.0 - 1.0);
        let y = DMatrix::from_fn(n, dy, |i, j| x[(i, j % dx)] * 0.7 + rng.next_f64());
        let xy = cca_score(&CcaInput::new(x.clone(), y.clone()).unwrap());
        let yx = cca_score(&CcaInput::new(y.clone(), x.clone()).unwrap());
        prop_assert!((0.0..=1.0).contains(&xy));
        prop_assert!((xy - yx).abs() < 1e-9, "{} vs {}", xy, yx);

        // Diagonally dominant, hence invertible and well conditioned.
        let a = DMatrix::from_fn(dx, dx, |i, j| if i == j { 3.0 } else { rng.next_f64() - 0.5 });
        let tight = |m: DMatrix<f64>| cca_score(&CcaInput::new(m, y.clone()).unwrap().with_reg_eps(1e-10).unwrap());
        let before = tight(x.clone());
        let after = tight(&x * a);
        prop_assert!((before - after).abs() < 1e-6, "{} vs {}", before, after);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kmeans_inertia_never_increases_and_workers_do_not_matter(
        n in 1100usize..1600,
        k in 2usize..12,
        seed: u64,
    ) {
        let mut rng = SplitMix64::new(seed);
        let data: Vec<f32> = (0..n * 3).map(|_| (rng.next_f64() * 10.0) as f32).collect();
        let data = FeatureMatrix::new(n, 3, data).unwrap();
        let mut cfg = KmeansConfig::new(k, seed);
        let one = kmeans_fit(&data, &cfg).unwrap();
        for w in one.meta().inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
        }
        cfg.workers = 4;
        let four = kmeans_fit(&data, &cfg).unwrap();
        prop_assert_eq!(one.centroids(), four.centroids());
        prop_assert_eq!(one.assign_labels(&data, 1).unwrap(), four.assign_labels(&data, 3).unwrap());
    }

    #[test]
    fn fbank_gain_of_two_shifts_log_energy_by_ln4(seed: u64) {
        let mut rng = SplitMix64::new(seed);
        let samples: Vec<f32> = (0..4000).map(|_| (rng.next_f64() - 0.5) as f32 * 0.2).collect();
        let doubled: Vec<f32> = samples.iter().map(|s| s * 2.0).collect();
        let cfg = FbankConfig::new(16000);
        let a = compute_fbank(&Pcm { sample_rate: 16000, samples }, &cfg).unwrap();
        let b = compute_fbank(&Pcm { sample_rate: 16000, samples: doubled }, &cfg).unwrap();
        let floor = (cfg.log_floor as f32).ln();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!(x.is_finite() && *x >= floor);
            if *x > floor + 5.0 {
                prop_assert!((y - x - 4f32.ln()).abs() < 1e-4, "{} -> {}", x, y);
            }
        }
    }
}

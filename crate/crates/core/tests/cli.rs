//! Drives the `dsu` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dsu_core::synth::{write_corpus, SynthConfig};

fn dsu(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsu"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .expect("spawn dsu")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "dsu failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_corpus(dir: &Path) -> PathBuf {
    let wav = dir.join("wav");
    let cfg = SynthConfig {
        seed: 5,
        total_seconds: 30.0,
        ..SynthConfig::default()
    };
    write_corpus(&cfg, &wav).unwrap();
    wav
}

fn write_config(dir: &Path, out: &str) -> PathBuf {
    let path = dir.join(format!("{out}.cfg"));
    fs::write(
        &path,
        format!(
            "seed = 11\nworkers = 2\npaths.audio = wav\npaths.out = {out}\n\
             kmeans.k = 20\nbpe.extra_vocab = 40\nmask.n_masks = 2\nmask.max_width = 4\n"
        ),
    )
    .unwrap();
    path
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn lengths(path: &Path) -> Vec<usize> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit('\t').next().unwrap().split_whitespace().count())
        .collect()
}

#[test]
fn pipeline_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let a = write_config(tmp.path(), "a");
    let b = write_config(tmp.path(), "b");
    ok(dsu(&[&"pipeline", &"--config", &a]));
    ok(dsu(&[&"pipeline", &"--config", &b]));
    let (ta, tb) = (tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
    assert!(ta.len() > 8);
    assert_eq!(ta, tb);
}

#[test]
fn staged_commands_match_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let wav = small_corpus(tmp.path());
    let cfg = write_config(tmp.path(), "e2e");
    ok(dsu(&[&"pipeline", &"--config", &cfg]));
    let e2e = tmp.path().join("e2e");

    let s = tmp.path().join("staged");
    fs::create_dir_all(&s).unwrap();
    let p = |n: &str| s.join(n);
    // Flags carry every setting; only seed and workers come from the shared config.
    ok(dsu(&[&"fbank", &"--in", &wav, &"--out", &p("feats")]));
    ok(dsu(&[&"--seed", &"11", &"--workers", &"2", &"kmeans-train", &"--in", &p("feats"), &"--out", &p("codebook.dsf"), &"--k", &"20"]));
    ok(dsu(&[&"--workers", &"2", &"quantize", &"--codebook", &p("codebook.dsf"), &"--in", &p("feats"), &"--out", &p("units.txt")]));
    ok(dsu(&[&"dedup", &"--in", &p("units.txt"), &"--out", &p("dedup.txt"), &"--vocab", &"20"]));
    ok(dsu(&[&"--config", &cfg, &"mask", &"--in", &p("dedup.txt"), &"--out", &p("masked.txt"), &"--vocab", &"20"]));
    ok(dsu(&[&"bpe-train", &"--in", &p("dedup.txt"), &"--out", &p("bpe.model"), &"--vocab", &"20", &"--extra-vocab", &"40"]));
    ok(dsu(&[&"bpe-encode", &"--model", &p("bpe.model"), &"--in", &p("dedup.txt"), &"--out", &p("bpe.txt")]));
    ok(dsu(&[&"pack", &"--in", &p("bpe.txt"), &"--model", &p("bpe.model"), &"--out", &p("units.dsu")]));
    let report = ok(dsu(&[&"stats", &"--raw", &p("units.txt"), &"--dedup", &p("dedup.txt"), &"--bpe", &p("bpe.txt"), &"--subsample", &"conv1d2", &"--out", &p("stats.txt")]));
    assert!(report.contains("reduction_ratio="));

    assert_eq!(tree(&e2e), tree(&s));
}

#[test]
fn quantize_then_dedup_shortens_every_line() {
    let tmp = tempfile::tempdir().unwrap();
    let wav = small_corpus(tmp.path());
    let p = |n: &str| tmp.path().join(n);
    let first = fs::read_dir(&wav).unwrap().next().unwrap().unwrap().path();
    ok(dsu(&[&"fbank", &"--in", &first, &"--out", &p("feats.dsf")]));
    ok(dsu(&[&"kmeans-train", &"--in", &p("feats.dsf"), &"--out", &p("cb.dsf"), &"--k", &"8"]));
    ok(dsu(&[&"quantize", &"--codebook", &p("cb.dsf"), &"--in", &p("feats.dsf"), &"--out", &p("units.txt")]));
    ok(dsu(&[&"dedup", &"--in", &p("units.txt"), &"--out", &p("dedup.txt")]));
    let (u, d) = (lengths(&p("units.txt")), lengths(&p("dedup.txt")));
    assert_eq!(u.len(), d.len());
    assert!(u.iter().zip(&d).all(|(a, b)| b <= a));
    assert!(d[0] < u[0]);
}

fn repeat_line(len: usize) -> String {
    // Alternating units so each stage file can be written with any length.
    let units: Vec<String> = (0..len).map(|i| (i % 2).to_string()).collect();
    units.join(" ")
}

#[test]
fn stats_reports_whole_percent() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n);
    for (name, len) in [("raw.txt", 227), ("dedup.txt", 172), ("bpe.txt", 98)] {
        fs::write(p(name), format!("{}\n", repeat_line(len))).unwrap();
    }
    let out = ok(dsu(&[&"stats", &"--raw", &p("raw.txt"), &"--dedup", &p("dedup.txt"), &"--bpe", &p("bpe.txt"), &"--subsample", &"conv1d2"]));
    assert!(out.lines().any(|l| l == "reduction_ratio=57%"), "{out}");
    assert!(out.lines().any(|l| l == "avg_len_subsampled=49.00"), "{out}");
}

#[test]
fn ctc_check_recommends_smaller_stride() {
    let out = ok(dsu(&[&"ctc-check", &"--pair", &"178:106", &"--subsample", &"conv1d2"]));
    assert!(out.contains("ctc_violations=1"), "{out}");
    assert!(out.contains("recommended_subsample=conv1d1"), "{out}");
}

#[test]
fn pack_unpack_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n);
    fs::write(p("u.txt"), "3 1 4 1 5\n\n9 2 6\n").unwrap();
    ok(dsu(&[&"pack", &"--in", &p("u.txt"), &"--out", &p("u.dsu")]));
    assert_eq!(fs::metadata(p("u.dsu")).unwrap().len(), 19 + 3 * 4 + 4);
    ok(dsu(&[&"unpack", &"--in", &p("u.dsu"), &"--out", &p("back.txt")]));
    assert_eq!(fs::read_to_string(p("back.txt")).unwrap(), "3 1 4 1 5\n\n9 2 6\n");
}

#[test]
fn cca_select_picks_informative_layer() {
    use dsu_core::feature_io::{save_features, FeatureMatrix};
    use dsu_core::rng::SplitMix64;
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n);
    let mut rng = SplitMix64::new(2);
    let n = 120;
    let labels: Vec<usize> = (0..n).map(|_| rng.below(4) as usize).collect();
    let y: Vec<f32> = labels.iter().flat_map(|&l| (0..4).map(move |j| (l == j) as u8 as f32)).collect();
    let noisy: Vec<f32> = (0..n * 3).map(|_| rng.next_f64() as f32).collect();
    let informative: Vec<f32> = labels
        .iter()
        .flat_map(|&l| [l as f32, (l * l) as f32, (l == 2) as u8 as f32])
        .map(|v| v + 0.01 * rng.next_f64() as f32)
        .collect();
    save_features(&FeatureMatrix::new(n, 4, y).unwrap(), &p("y.dsf")).unwrap();
    save_features(&FeatureMatrix::new(n, 3, noisy).unwrap(), &p("l9.dsf")).unwrap();
    save_features(&FeatureMatrix::new(n, 3, informative).unwrap(), &p("l21.dsf")).unwrap();
    let out = dsu(&[
        &"cca-select",
        &"--labels",
        &p("y.dsf"),
        &"--layer",
        &format!("9:{}", p("l9.dsf").display()),
        &"--layer",
        &format!("21:{}", p("l21.dsf").display()),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    let stdout = ok(out);
    assert_eq!(stdout.lines().count(), 2);
    assert!(stdout.starts_with("9 "));
    assert!(stderr.contains("selected layer 21"), "{stderr}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&dyn AsRef<std::ffi::OsStr>]| dsu(args).status.code();
    assert_eq!(code(&[&"--help"]), Some(0));
    assert_eq!(code(&[&"no-such-command"]), Some(1));
    assert_eq!(code(&[&"pipeline"]), Some(1));
    let garbage = tmp.path().join("g.dsu");
    fs::write(&garbage, b"not a packed file").unwrap();
    assert_eq!(code(&[&"unpack", &"--in", &garbage, &"--out", &tmp.path().join("o.txt")]), Some(2));
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "kmeans.kk = 3\n").unwrap();
    assert_eq!(code(&[&"--config", &cfg, &"ctc-check", &"--pair", &"1:1"]), Some(1));
}

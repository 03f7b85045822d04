use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lyraline::dsp::matrix::write_matrix;
use lyraline::synth::{distort, random_song, voice_probability, SongShape};
use lyraline::DenseMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn lyraline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lyraline")).args(args).output().expect("binary runs")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report on stdout is JSON")
}

/// A noiseless song: annotations shifted by `offset` at the nominal rate and a
/// probability stream equal to the true voice activity.
fn noiseless(dir: &Path, offset: f64) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let truth = random_song(&mut rng, &SongShape { duration: 40.0, ..SongShape::default() }, None);
    let file = distort(&truth, offset, 25.0, 25.0);
    let ann = dir.join("a.json");
    file.write(&ann).unwrap();
    let phat = voice_probability(&truth.notes, 0.014, 45.0, (0.0, 1.0, 0.0), &mut rng).unwrap();
    let p = dir.join("p.mmx");
    write_matrix(&p, &DenseMatrix::from_vec(phat.len(), 1, phat.values).unwrap()).unwrap();
    (ann, p)
}

#[test]
fn validate_accepts_the_bundled_song() {
    let out = lyraline(&["validate", s(&fixtures().join("annotations.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "validate");
    assert_eq!(r["result"]["violations"], serde_json::json!([]));
    assert!(r["version"].is_string());
}

#[test]
fn validate_flags_broken_hierarchy() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"annotations": {"notes": [{"time": [1.0, 0.5], "freq": [220, 220], "text": "x", "index": 3}]}}"#).unwrap();
    let out = lyraline(&["validate", s(&p)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!report(&out)["result"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let out = lyraline(&["validate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_file_is_named() {
    let out = lyraline(&["validate", "/nonexistent/a.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/a.json"));
}

#[test]
fn align_global_recovers_a_noiseless_offset() {
    let dir = tempfile::tempdir().unwrap();
    let offset = 70.0 * 0.014;
    let (ann, phat) = noiseless(dir.path(), offset);
    let aligned = dir.path().join("aligned.json");
    let rep = dir.path().join("report.json");
    let out = lyraline(&["--report", s(&rep), "align-global", "--annotations", s(&ann), "--phat", s(&phat), "--out", s(&aligned)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    let res = &r["result"];
    assert!((res["score"].as_f64().unwrap() - 1.0).abs() < 1e-9, "{res}");
    assert!((res["offset"].as_f64().unwrap() - offset).abs() < 1e-9);
    assert_eq!(res["accepted"], true);
    assert!(r["parameters"]["search"]["t_corr"].is_number());
    assert!(aligned.exists());
}

#[test]
fn silent_probabilities_are_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let (ann, _) = noiseless(dir.path(), 0.0);
    let zeros = dir.path().join("z.mmx");
    write_matrix(&zeros, &DenseMatrix::zeros(500, 1)).unwrap();
    let out = lyraline(&["align-global", "--annotations", s(&ann), "--phat", s(&zeros)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn film_params_prints_the_count() {
    let out = lyraline(&["film-params", "--variant", "S_cs", "--placement", "bottleneck"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "40960");
    let out = lyraline(&["film-params", "--variant", "S_fv*"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "327680");
}

#[test]
fn eval_rank_reports_dense_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys.json");
    let gt = dir.path().join("gt.json");
    std::fs::write(&sys, r#"{"a": {"s": 0.057}, "b": {"s": 0.049}, "c": {"s": 0.057}, "d": {"s": 0.063}}"#).unwrap();
    std::fs::write(&gt, r#"{"s": 0.0}"#).unwrap();
    let out = lyraline(&["eval-rank", "--systems", s(&sys), "--truth", s(&gt)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let ranks: Vec<u64> = ["a", "b", "c", "d"].iter().map(|k| r["result"]["systems"][k]["ranks"]["s"].as_u64().unwrap()).collect();
    assert_eq!(ranks, [2, 1, 2, 3]);
}

#[test]
fn rasterize_writes_one_value_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("vas.mmx");
    let out = lyraline(&["rasterize", "--annotations", s(&fixtures().join("truth.json")), "--duration", "30", "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = lyraline::dsp::matrix::read_matrix(&out_path).unwrap();
    assert_eq!(m.cols(), 1);
    assert_eq!(m.rows(), lyraline::TimeGrid::covering(0.014, 30.0).unwrap().n_frames);
}

fn pipeline_with(config: &str) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    std::fs::write(&p, config).unwrap();
    lyraline(&["pipeline", "--config", s(&p)])
}

#[test]
fn pipeline_rejects_unknown_keys() {
    let out = pipeline_with("seed = 1\ncolour = \"red\"\n[inputs]\nannotations = \"a\"\nphat = []\nvocals = \"v\"\nmix = \"m\"\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn pipeline_requires_a_seed() {
    let out = pipeline_with("[inputs]\nannotations = \"a\"\nphat = []\nvocals = \"v\"\nmix = \"m\"\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn gen_cleansing_is_seeded() {
    let missing = lyraline(&["gen-cleansing", "--cqt-mix", "m", "--cqt-vox", "v", "--notes", "n", "--out", "o"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--seed"));
}

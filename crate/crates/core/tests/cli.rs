use std::path::{Path, PathBuf};
use std::process::Command;

use deep_nrsfm::data::{add_noise, load_landmarks, save_landmarks, synthesize_projections};
use deep_nrsfm::metrics::{evaluate, reconstruct};
use deep_nrsfm::train::read_checkpoint;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_deep-nrsfm"));
    c.env("RUST_LOG", "warn");
    c
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

fn kv(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
        .unwrap_or_else(|| panic!("{key} missing from {text}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["synth", "--out", p(&out)];
    args.extend_from_slice(extra);
    run_ok(&args);
    out
}

#[test]
fn synth_is_deterministic_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    let out_a = run_ok(&["synth", "--frames", "100", "--seed", "3", "--out", p(&a)]);
    run_ok(&["synth", "--frames", "100", "--seed", "3", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(kv(&out_a, "frames"), "100");
    assert_eq!(kv(&out_a, "sha256").len(), 64);
    let ds = load_landmarks(&a, false).unwrap();
    assert_eq!(ds.len(), 100);
    assert!(ds.has_ground_truth());
    assert!(dir.path().join("a.txt.manifest.toml").exists());
}

#[test]
fn synth_noise_ratio_is_exact_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let clean = load_landmarks(&synth(dir.path(), "c.txt", &["--frames", "20", "--seed", "1"]), false).unwrap();
    let noisy =
        load_landmarks(&synth(dir.path(), "n.txt", &["--frames", "20", "--seed", "1", "--noise", "0.2"]), false)
            .unwrap();
    for (c, n) in clean.frames.iter().zip(&noisy.frames) {
        let ratio = n.w.sub(&c.w).unwrap().frobenius_norm() / c.w.frobenius_norm();
        assert!((ratio - 0.2).abs() < 1e-9, "{ratio}");
    }
}

#[test]
fn train_reconstruct_eval_coherence_round() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "d.txt", &["--frames", "40", "--source", "planted"]);
    let ck = dir.path().join("ck.bin");
    let args =
        ["train", "--data", p(&data), "--out", p(&ck), "--epochs", "3", "--batch-size", "16", "--layers", "16,4"];
    let out = run_ok(&args);
    assert_eq!(kv(&out, "steps"), "9");

    // The manifest reproduces the checkpoint byte for byte.
    let ck2 = dir.path().join("ck2.bin");
    let manifest = dir.path().join("ck.bin.manifest.toml");
    run_ok(&["train", "--config", p(&manifest), "--out", p(&ck2)]);
    assert_eq!(std::fs::read(&ck).unwrap(), std::fs::read(&ck2).unwrap());

    // Reconstructions match the library forward pass.
    let recon_path = dir.path().join("r.txt");
    run_ok(&["reconstruct", "--checkpoint", p(&ck), "--data", p(&data), "--out", p(&recon_path)]);
    let text = std::fs::read_to_string(&recon_path).unwrap();
    let params = read_checkpoint(&ck).unwrap().params;
    let ds = load_landmarks(&data, true).unwrap();
    let expect = reconstruct(&params, &ds).unwrap();
    assert_eq!(text, deep_nrsfm::cli::format_reconstructions(&expect));
    let csv = run_ok(&["reconstruct", "--checkpoint", p(&ck), "--data", p(&data), "--format", "csv"]);
    assert_eq!(csv.lines().count(), 1 + 40 * 15);

    let e1 = run_ok(&["eval", "--checkpoint", p(&ck), "--data", p(&data)]);
    let e2 = run_ok(&["eval", "--checkpoint", p(&ck), "--data", p(&data)]);
    assert_eq!(e1, e2);
    let report = evaluate(&params, &ds).unwrap();
    assert_eq!(e1, report.to_string());
    assert!(e1.contains("coherence_final_dict = "));

    let coh = run_ok(&["coherence", "--checkpoint", p(&ck)]);
    assert!(coh.lines().all(|l| l.split_once(" = ").is_some()));
    assert_eq!(kv(&coh, "coherence_final_dict").parse::<f64>().unwrap(), report.coherence_final_dict.unwrap());
    assert!(coh.contains("coherence_composed_2"));
}

#[test]
fn zero_epochs_and_empty_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "d.txt", &["--frames", "5"]);
    let ck = dir.path().join("ck.bin");
    let out = run_ok(&["train", "--data", p(&data), "--out", p(&ck), "--epochs", "0", "--layers", "8,4"]);
    assert_eq!(kv(&out, "steps"), "0");
    let init = deep_nrsfm::train::init_params(&deep_nrsfm::model::ModelDims::new(15, vec![8, 4]).unwrap(), 0).unwrap();
    assert_eq!(read_checkpoint(&ck).unwrap().params, init);

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    let text = run_ok(&["reconstruct", "--checkpoint", p(&ck), "--data", p(&empty)]);
    assert!(text.is_empty());
}

#[test]
fn unseen_frames_give_finite_shapes_and_orthonormal_cameras() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "train.txt", &["--frames", "30", "--seed", "1"]);
    let ck = dir.path().join("ck.bin");
    run_ok(&["train", "--data", p(&data), "--out", p(&ck), "--epochs", "2", "--layers", "16,4"]);
    let unseen = synth(dir.path(), "test.txt", &["--frames", "10", "--seed", "2"]);
    let params = read_checkpoint(&ck).unwrap().params;
    for r in reconstruct(&params, &load_landmarks(&unseen, true).unwrap()).unwrap() {
        assert!(r.shape.is_finite());
        if let Some(m) = r.camera {
            assert!(deep_nrsfm::linalg::orthonormality_defect(&m) < 1e-10);
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["train", "--bogus"]), 1);
    assert_eq!(code(&["synth"]), 1);
    assert_eq!(code(&["synth", "--source", "mocap", "--out", p(&dir.path().join("x.txt"))]), 1);
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(code(&["synth", "--config", p(&cfg), "--out", p(&dir.path().join("y.txt"))]), 1);

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "frame a p=2\n0 0\n1 x\n").unwrap();
    let ck = dir.path().join("ck.bin");
    assert_eq!(code(&["train", "--data", p(&bad), "--out", p(&ck)]), 2);

    // A checkpoint for p = 15 cannot reconstruct a p = 6 dataset.
    let data = synth(dir.path(), "d.txt", &["--frames", "4"]);
    run_ok(&["train", "--data", p(&data), "--out", p(&ck), "--epochs", "0", "--layers", "8,4"]);
    let small = dir.path().join("small.txt");
    let shapes = deep_nrsfm::data::planted_model(6, &[8, 4], 3, 2, 0).unwrap().shapes;
    save_landmarks(&small, &synthesize_projections(&shapes, 0).unwrap()).unwrap();
    assert_eq!(code(&["reconstruct", "--checkpoint", p(&ck), "--data", p(&small)]), 2);
}

#[test]
fn eval_without_ground_truth_omits_3d_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "d.txt", &["--frames", "6"]);
    let mut ds = load_landmarks(&data, false).unwrap();
    for f in &mut ds.frames {
        f.gt_shape = None;
        f.gt_camera = None;
    }
    let bare = dir.path().join("bare.txt");
    save_landmarks(&bare, &add_noise(&ds, 0.0, 0).unwrap()).unwrap();
    let ck = dir.path().join("ck.bin");
    run_ok(&["train", "--data", p(&data), "--out", p(&ck), "--epochs", "0", "--layers", "8,4"]);
    let out = run_ok(&["eval", "--checkpoint", p(&ck), "--data", p(&bare)]);
    assert!(!out.contains("shape_error_ratio"));
    assert!(out.contains("reprojection_error"));
}

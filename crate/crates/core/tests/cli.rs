//! End-to-end runs of the `le2fusion` binary.

use std::path::Path;
use std::process::{Command, Output};

use le2fusion::imaging::synthetic::scene_pair;
use le2fusion::{load_image, save_image, Image};

fn le2fusion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_le2fusion"))
        .args(args)
        .env_remove(le2fusion::trainer::DATA_ROOT_ENV)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two 16x16 pairs under `root/ir` and `root/vi`.
fn toy_set(root: &Path) {
    for sub in ["ir", "vi"] {
        std::fs::create_dir_all(root.join(sub)).unwrap();
    }
    for (i, name) in ["a.png", "b.png"].iter().enumerate() {
        let (ir, vi) = scene_pair(i as u64, 16);
        save_image(&ir, &root.join("ir").join(name)).unwrap();
        save_image(&vi, &root.join("vi").join(name)).unwrap();
    }
}

fn trained_checkpoint(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data");
    toy_set(&data);
    let cfg = dir.join("toy.cfg");
    std::fs::write(&cfg, "epochs = 1\nbatch_size = 2\npatch_size = 16\n").unwrap();
    let ckpt = dir.join("model.ckpt");
    let out = le2fusion(&["train", "--data", s(&data), "--config", s(&cfg), "--out", s(&ckpt)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    ckpt
}

#[test]
fn train_writes_checkpoint_and_loss_log() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained_checkpoint(dir.path());
    le2fusion::trainer::load_checkpoint(&ckpt).unwrap();
    let log = std::fs::read_to_string(dir.path().join("model.ckpt.loss.csv")).unwrap();
    assert_eq!(log.lines().count(), 2, "header plus one step:\n{log}");
}

#[test]
fn fuse_gray_and_color_keep_dims() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained_checkpoint(dir.path());
    let ir = dir.path().join("data/ir/a.png");

    let fused = dir.path().join("gray.png");
    let out = le2fusion(&["fuse", "--ckpt", s(&ckpt), "--ir", s(&ir), "--vi", s(&ir), "--out", s(&fused)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_image(&fused).unwrap().dims(), (16, 16));

    let bytes: Vec<u8> = (0..16 * 16 * 3).map(|i| (i * 7 % 256) as u8).collect();
    let color = dir.path().join("color.png");
    save_image(&Image::rgb_bytes(16, 16, &bytes).unwrap(), &color).unwrap();
    let fused = dir.path().join("fused_color.png");
    let out = le2fusion(&["fuse", "--ckpt", s(&ckpt), "--ir", s(&ir), "--vi", s(&color), "--out", s(&fused)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = load_image(&fused).unwrap();
    assert_eq!((img.dims(), img.channels()), ((16, 16), 3));
}

#[test]
fn fuse_rejects_mismatched_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained_checkpoint(dir.path());
    let small = dir.path().join("small.png");
    save_image(&scene_pair(3, 12).0, &small).unwrap();
    let ir = dir.path().join("data/ir/a.png");
    let out = le2fusion(&["fuse", "--ckpt", s(&ckpt), "--ir", s(&ir), "--vi", s(&small), "--out", "x.png"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn export_maps_writes_both_maps() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained_checkpoint(dir.path());
    let maps = dir.path().join("maps");
    let vi = dir.path().join("data/vi/b.png");
    let out = le2fusion(&["export-maps", "--ckpt", s(&ckpt), "--vi", s(&vi), "--out", s(&maps)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["e_d.png", "e_s.png"] {
        assert_eq!(load_image(&maps.join(name)).unwrap().dims(), (16, 16));
    }
}

#[test]
fn eval_scores_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    toy_set(dir.path());
    std::fs::create_dir_all(dir.path().join("fused")).unwrap();
    for name in ["a.png", "b.png"] {
        std::fs::copy(dir.path().join("vi").join(name), dir.path().join("fused").join(name)).unwrap();
    }
    let csv = dir.path().join("scores.csv");
    let out = le2fusion(&["eval", "--dir", s(dir.path()), "--out", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout, std::fs::read_to_string(&csv).unwrap());
    assert!(stdout.contains("a.png") && stdout.contains("b.png"), "{stdout}");
}

#[test]
fn eval_on_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = le2fusion(&["eval", "--dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no fused images"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(le2fusion(&["blend"]).status.code(), Some(2));
    assert_eq!(le2fusion(&["eval", "--dir", ".", "--bogus"]).status.code(), Some(2));
    assert_eq!(le2fusion(&["fuse"]).status.code(), Some(2));
    assert_eq!(le2fusion(&["--help"]).status.code(), Some(0));
}

#[test]
fn train_without_data_root_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = le2fusion(&["train", "--out", s(&dir.path().join("m.ckpt"))]);
    assert_eq!(out.status.code(), Some(1));
}

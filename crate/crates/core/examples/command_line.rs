//! Drives the command-line front end in-process: train on a toy set, fuse,
//! export the weight maps and score the result.

use le2fusion::cli::run;
use le2fusion::imaging::synthetic::scene_pair;
use le2fusion::save_image;

fn main() {
    let root = std::env::temp_dir().join("le2fusion_command_line");
    for sub in ["ir", "vi", "fused"] {
        std::fs::create_dir_all(root.join(sub)).unwrap();
    }
    for i in 0..2 {
        let (ir, vi) = scene_pair(i, 24);
        save_image(&ir, &root.join(format!("ir/{i}.png"))).unwrap();
        save_image(&vi, &root.join(format!("vi/{i}.png"))).unwrap();
    }
    let cfg = root.join("toy.cfg");
    std::fs::write(&cfg, "epochs = 2\nbatch_size = 2\npatch_size = 24\n").unwrap();
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();

    let steps: [Vec<String>; 5] = [
        vec!["train".into(), "--data".into(), p(""), "--config".into(), p("toy.cfg"), "--out".into(), p("model.ckpt")],
        vec!["fuse".into(), "--ckpt".into(), p("model.ckpt"), "--ir".into(), p("ir/0.png"), "--vi".into(), p("vi/0.png"), "--out".into(), p("fused/0.png")],
        vec!["fuse".into(), "--ckpt".into(), p("model.ckpt"), "--ir".into(), p("ir/1.png"), "--vi".into(), p("vi/1.png"), "--out".into(), p("fused/1.png")],
        vec!["export-maps".into(), "--ckpt".into(), p("model.ckpt"), "--vi".into(), p("vi/0.png"), "--out".into(), p("maps")],
        vec!["eval".into(), "--dir".into(), p("")],
    ];
    for args in steps {
        println!("$ le2fusion {}", args.join(" "));
        let code = run(std::iter::once("le2fusion".to_string()).chain(args));
        if code != 0 {
            std::process::exit(code);
        }
    }
}

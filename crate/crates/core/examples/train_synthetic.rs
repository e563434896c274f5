//! Trains a small model on generated scene pairs and scores it on held-out
//! pairs against the plain average of the two sources.
//!
//!     cargo run --release --example train_synthetic -- [steps] [size]

use std::time::Instant;

use le2fusion::imaging::synthetic::{scene_pair, scene_set};
use le2fusion::metrics::{metric_qabf, metric_sd};
use le2fusion::trainer::{train_from, init_params};
use le2fusion::{fuse_pair, FusionConfig, Image};

fn average(a: &Image, b: &Image) -> Image {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| 0.5 * (x + y)).collect();
    Image::from_unit_plane(a.width(), a.height(), data).unwrap()
}

fn main() -> le2fusion::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map_or(50, |s| s.parse().expect("steps"));
    let size: usize = args.next().map_or(32, |s| s.parse().expect("size"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let decay: f64 = args.next().map_or(0.95, |s| s.parse().expect("decay"));

    let data = scene_set(0, 8, size);
    let config = FusionConfig {
        batch_size: 4,
        epochs: steps.div_ceil(2),
        lr_decay: decay,
        seed,
        patch_size: size,
        max_steps: Some(steps),
        ..Default::default()
    };
    let t = Instant::now();
    let out = train_from(init_params(&config, config.seed), &data, &config, |step, r| {
        if step % 10 == 0 {
            println!("step {step:3}  total {:.4}  ssim {:.4}  region {:.4}  texture {:.4}", r.total, r.ssim_term, r.region_term, r.texture_term);
        }
    })?;
    let first = out.history.first().unwrap().total;
    let last = out.history.last().unwrap().total;
    println!("{steps} steps in {:.1?}; loss {first:.4} -> {last:.4} ({:.1}%)", t.elapsed(), 100.0 * last / first);

    for seed in [100, 101] {
        let (ir, vi) = scene_pair(seed, size);
        let fused = fuse_pair(&ir, &vi, &out.params)?;
        let avg = average(&ir, &vi);
        println!(
            "held-out {seed}: qabf fused {:.4} avg {:.4}  sd fused {:.2} vi {:.2}",
            metric_qabf(&fused, &ir, &vi)?,
            metric_qabf(&avg, &ir, &vi)?,
            metric_sd(&fused)?,
            metric_sd(&vi)?
        );
    }
    Ok(())
}

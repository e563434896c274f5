//! The three training terms on a fused candidate and their weighted total.

use le2fusion::imaging::synthetic::scene_pair;
use le2fusion::losses::{loss_total, region_target, texture_target, LossWeights};

fn main() -> le2fusion::Result<()> {
    let (ir, vi) = scene_pair(2, 24);
    let (ir, vi) = (ir.to_tensor()?, vi.to_tensor()?);
    let w = LossWeights::default();

    let average = ir.zip_map(&vi, |a, b| 0.5 * (a + b))?;
    let candidates = [("infrared", ir.clone()), ("visible", vi.clone()), ("average", average), ("region target", region_target(&ir, &vi)?)];
    println!("{:>14} {:>8} {:>8} {:>8} {:>8}", "candidate", "ssim", "region", "texture", "total");
    for (name, f) in candidates {
        let r = loss_total(&f, &ir, &vi, &w)?;
        println!("{name:>14} {:8.4} {:8.4} {:8.4} {:8.4}", r.ssim_term, r.region_term, r.texture_term, r.total);
    }
    let t = texture_target(&ir, &vi)?;
    println!("texture target mean gradient {:.4}", t.mean());
    Ok(())
}

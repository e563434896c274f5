//! Builds every ablation, reports its size and takes one training step.

use le2fusion::imaging::synthetic::scene_set;
use le2fusion::trainer::train;
use le2fusion::{Ablation, FusionConfig, ModelParams};

fn main() -> le2fusion::Result<()> {
    let data = scene_set(0, 2, 16);
    for ablation in [Ablation::None, Ablation::Le2FusionOnly, Ablation::NoLe2, Ablation::NoMra, Ablation::NoRegionLoss] {
        let config = FusionConfig { batch_size: 2, epochs: 1, patch_size: 16, ablation, ..Default::default() };
        let params = ModelParams::init(ablation, 0);
        let out = train(&data, &config)?;
        let r = &out.history[0];
        println!(
            "{:>16}: {:>6} params, loss {:.4} (ssim {:.4}, region {:.4}, texture {:.4})",
            ablation.to_string(),
            params.param_count(),
            r.total,
            r.ssim_term,
            r.region_term,
            r.texture_term
        );
    }
    Ok(())
}

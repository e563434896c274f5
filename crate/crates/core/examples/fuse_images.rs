//! Fuses one pair with an untrained model. Shapes are free as long as both
//! sides are at least 8 pixels.

use le2fusion::imaging::synthetic::scene_pair;
use le2fusion::{fuse_pair, fuse_tensors, Ablation, ModelParams};

fn main() -> le2fusion::Result<()> {
    let params = ModelParams::init(Ablation::None, 1);
    let (ir, vi) = scene_pair(0, 40);
    let fused = fuse_pair(&ir, &vi, &params)?;
    println!("fused {:?} -> {:?}, mean {:.4}", ir.dims(), fused.dims(), fused.data().iter().sum::<f64>() / fused.data().len() as f64);

    // batches go through the tensor entry point
    let a = le2fusion::nn::Tensor::stack_batch(&[ir.to_tensor()?, scene_pair(1, 40).0.to_tensor()?])?;
    let b = le2fusion::nn::Tensor::stack_batch(&[vi.to_tensor()?, scene_pair(1, 40).1.to_tensor()?])?;
    println!("batch output shape {:?}", fuse_tensors(&a, &b, &params)?.shape());

    match fuse_pair(&scene_pair(0, 6).0, &scene_pair(0, 6).1, &params) {
        Err(e) => println!("6x6 input rejected: {e}"),
        Ok(_) => println!("6x6 input accepted"),
    }
    Ok(())
}

//! Saves a model, reloads it and shows that a checkpoint for one
//! architecture is refused by another.

use le2fusion::trainer::{load_checkpoint, load_checkpoint_for, save_checkpoint};
use le2fusion::{Ablation, ModelParams};

fn main() -> le2fusion::Result<()> {
    let dir = std::env::temp_dir().join("le2fusion_checkpoint_example");
    std::fs::create_dir_all(&dir).map_err(|e| le2fusion::FusionError::io(&dir, e))?;
    let path = dir.join("model.ckpt");

    let params = ModelParams::init(Ablation::None, 42);
    save_checkpoint(&params, &path)?;
    let loaded = load_checkpoint(&path)?;
    println!("{} tensors, {} values, identical: {}", loaded.names().count(), loaded.param_count(), loaded == params);
    println!("fingerprint {:016x}", loaded.fingerprint());

    if let Err(e) = load_checkpoint_for(&path, Ablation::NoMra) {
        println!("loading as no_mra: {e}");
    }
    Ok(())
}

//! Writes a tiny `ir/` + `vi/` dataset to disk, then loads it as patches the
//! way the trainer does.

use le2fusion::imaging::synthetic::scene_pair;
use le2fusion::save_image;
use le2fusion::trainer::{load_dataset, load_pairs};
use le2fusion::FusionConfig;

fn main() -> le2fusion::Result<()> {
    let root = std::env::temp_dir().join("le2fusion_patch_dataset");
    for sub in ["ir", "vi"] {
        let d = root.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| le2fusion::FusionError::io(&d, e))?;
    }
    for i in 0..3 {
        let (ir, vi) = scene_pair(i, 40);
        let name = format!("{i:04}.png");
        save_image(&ir, &root.join("ir").join(&name))?;
        save_image(&vi, &root.join("vi").join(&name))?;
    }

    for (name, ir, vi) in load_pairs(&root)? {
        println!("{name}: ir {:?}, vi {:?}", ir.dims(), vi.dims());
    }
    let config = FusionConfig { patch_size: 16, ..Default::default() };
    let set = load_dataset(&root, &config)?;
    let (ir, vi) = set.batch(&[0, 1, 2])?;
    println!("{} patches of {}px, first batch {:?} / {:?}", set.len(), config.patch_size, ir.shape(), vi.shape());
    Ok(())
}

//! Edge weight maps for a generated visible image: `E_d` is high where the
//! local response favours detail, `E_s` is its complement.

use le2fusion::imaging::synthetic::scene_pair;
use le2fusion::le2::{le2_forward, local_responses};
use le2fusion::{Ablation, ModelParams};

fn main() -> le2fusion::Result<()> {
    let (_, vi) = scene_pair(3, 32);
    let params = ModelParams::init(Ablation::None, 0);
    let x = vi.to_tensor()?;

    let (a, b) = local_responses(&x, &params)?;
    println!("responses: mean a {:.4}, mean b {:.4}", a.mean(), b.mean());

    let w = le2_forward(&x, &params)?;
    let worst = w.e_d.data().iter().zip(w.e_s.data()).map(|(d, s)| (d + s - 1.0).abs()).fold(0.0, f64::max);
    let (lo, hi) = w.e_d.data().iter().fold((1.0f64, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    println!("E_d range [{lo:.4}, {hi:.4}], max |E_d + E_s - 1| = {worst:.1e}");

    let dir = std::env::temp_dir().join("le2fusion_edge_weights");
    std::fs::create_dir_all(&dir).map_err(|e| le2fusion::FusionError::io(&dir, e))?;
    for path in le2fusion::le2::export_weight_maps(&w, &dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

//! Local edge enhancement network.
//!
//! From the visible image alone it predicts two complementary per-pixel
//! weight maps: `e_d` (edge intensity) and `e_s` (salient content). The
//! pipeline is a 5×5 + 3×3×3 LReLU trunk, two 3×3 heads made positive with
//! softplus, a 3×3 local mean over each head, and a pairwise normalization
//! so the maps sum to one everywhere.

use std::path::{Path, PathBuf};

use crate::error::{FusionError, Result};
use crate::imaging::{self, Image};
use crate::nn::{ops, Tape, Tensor, Var};
use crate::params::{apply_layer, BoundParams, ModelParams};

pub const MIN_SIDE: usize = 8;

/// Complementary edge-aware weight maps, each `(B, 1, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    pub e_d: Tensor,
    pub e_s: Tensor,
}

#[derive(Debug, Clone, Copy)]
pub struct EdgeVars {
    pub e_d: Var,
    pub e_s: Var,
}

pub(crate) fn check_gray_input(t: &Tensor, what: &str) -> Result<()> {
    if t.channels() != 1 {
        return Err(FusionError::shape(format!(
            "{what} must be single-channel, got {} channels",
            t.channels()
        )));
    }
    if t.height() < MIN_SIDE || t.width() < MIN_SIDE {
        return Err(FusionError::shape(format!(
            "{what} is {}x{}, minimum is {MIN_SIDE}x{MIN_SIDE}",
            t.height(),
            t.width()
        )));
    }
    Ok(())
}

pub fn le2_on_tape(tape: &mut Tape, i_vi: Var, params: &BoundParams) -> Result<EdgeVars> {
    check_gray_input(tape.value(i_vi), "edge network input")?;
    if !params.ablation().uses_le2() {
        let half = Tensor::full(tape.value(i_vi).shape(), 0.5);
        let e_d = tape.constant(half.clone());
        let e_s = tape.constant(half);
        return Ok(EdgeVars { e_d, e_s });
    }
    let mut h = params.conv(tape, "le2.trunk0", i_vi)?;
    for i in 1..4 {
        h = params.conv(tape, &format!("le2.trunk{i}"), h)?;
    }
    let mut local = [i_vi; 2];
    for (slot, head) in local.iter_mut().zip(["le2.head_d", "le2.head_s"]) {
        let phi = params.conv(tape, head, h)?;
        let phi = tape.softplus(phi);
        *slot = tape.box_avg3(phi)?;
    }
    let [l_d, l_s] = local;
    let e_d = tape.edge_ratio(l_d, l_s)?;
    let e_s = tape.edge_ratio(l_s, l_d)?;
    Ok(EdgeVars { e_d, e_s })
}

/// Edge weights for a `(B, 1, H, W)` visible-luma tensor in unit range.
pub fn le2_forward(i_vi: &Tensor, params: &ModelParams) -> Result<EdgeWeights> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let x = tape.constant(i_vi.clone());
    let v = le2_on_tape(&mut tape, x, &bound)?;
    Ok(EdgeWeights {
        e_d: tape.value(v.e_d).clone(),
        e_s: tape.value(v.e_s).clone(),
    })
}

/// Head activations before normalization, `(L_d, L_s)`, evaluated layer by
/// layer without a tape.
pub fn local_responses(i_vi: &Tensor, params: &ModelParams) -> Result<(Tensor, Tensor)> {
    check_gray_input(i_vi, "edge network input")?;
    let mut h = apply_layer(params, "le2.trunk0", i_vi)?;
    for i in 1..4 {
        h = apply_layer(params, &format!("le2.trunk{i}"), &h)?;
    }
    let l_d = ops::box_avg3(&ops::softplus(&apply_layer(params, "le2.head_d", &h)?))?;
    let l_s = ops::box_avg3(&ops::softplus(&apply_layer(params, "le2.head_s", &h)?))?;
    Ok((l_d, l_s))
}

/// Writes each map as an 8-bit PNG scaled by 255 (`e_d.png`, `e_s.png`;
/// batch items beyond the first get an index suffix).
pub fn export_weight_maps(w: &EdgeWeights, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for b in 0..w.e_d.batch() {
        let suffix = if b == 0 { String::new() } else { format!("_{b}") };
        for (name, map) in [("e_d", &w.e_d), ("e_s", &w.e_s)] {
            let img = Image::from_unit_plane(map.width(), map.height(), map.plane(b, 0).to_vec())?;
            let path = dir.join(format!("{name}{suffix}.png"));
            imaging::save_image(&img, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Ablation;

    fn input(seed: u64, h: usize, w: usize) -> Tensor {
        Tensor::from_fn([1, 1, h, w], |[_, _, y, x]| {
            let v = ((y as u64 * 131 + x as u64 * 71 + seed * 977) % 257) as f64;
            v / 256.0
        })
    }

    #[test]
    fn maps_are_complementary_and_bounded() {
        let p = ModelParams::init(Ablation::None, 11);
        let w = le2_forward(&input(1, 12, 10), &p).unwrap();
        assert_eq!(w.e_d.shape(), [1, 1, 12, 10]);
        for (d, s) in w.e_d.data().iter().zip(w.e_s.data()) {
            assert!((d + s - 1.0).abs() < 1e-12);
            assert!((0.0..=1.0).contains(d) && (0.0..=1.0).contains(s));
        }
    }

    #[test]
    fn identical_heads_give_half() {
        let mut p = ModelParams::init(Ablation::None, 5);
        let wd = p.get("le2.head_d.weight").unwrap().clone();
        *p.get_mut("le2.head_s.weight").unwrap() = wd;
        let w = le2_forward(&input(2, 9, 9), &p).unwrap();
        assert!(w.e_d.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert!(w.e_s.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn larger_local_response_wins() {
        let p = ModelParams::init(Ablation::None, 8);
        let x = input(3, 16, 16);
        let (l_d, l_s) = local_responses(&x, &p).unwrap();
        let w = le2_forward(&x, &p).unwrap();
        for i in 0..l_d.len() {
            if l_d.data()[i] > l_s.data()[i] {
                assert!(w.e_d.data()[i] > 0.5);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ModelParams::init(Ablation::None, 0);
        assert!(matches!(le2_forward(&Tensor::zeros([1, 2, 8, 8]), &p), Err(FusionError::Shape(_))));
        assert!(matches!(le2_forward(&Tensor::zeros([1, 1, 7, 8]), &p), Err(FusionError::Shape(_))));
    }

    #[test]
    fn no_le2_is_constant_half() {
        let p = ModelParams::init(Ablation::NoLe2, 0);
        let w = le2_forward(&input(0, 8, 8), &p).unwrap();
        assert!(w.e_d.data().iter().chain(w.e_s.data()).all(|&v| v == 0.5));
    }
}

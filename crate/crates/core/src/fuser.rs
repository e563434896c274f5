//! Edge-weighted feature fusion and guided reconstruction.
//!
//! Fusion cross-pairs modalities and weights: infrared features are
//! amplified by the salient map `e_s`, visible features by the edge map
//! `e_d`. The reconstructor runs three 3×3 stages (128 → 64 → 32 → 16),
//! each gated by a guidance map projected from `concat(e_d, e_s)` through a
//! chain of 1×1 convs; a fourth projection gates the input of the final
//! 1×1 layer, whose tanh output lands in `(0, 1)`.

use crate::error::{FusionError, Result};
use crate::extractor::{check_pair, extract_on_tape, ModalFeatures};
use crate::imaging::{ColorSpace, Image};
use crate::le2::{le2_on_tape, EdgeVars, EdgeWeights};
use crate::nn::{Tape, Tensor, Var};
use crate::params::{BoundParams, ModelParams, FEATURE_CHANNELS};

#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeatures {
    pub f_f: Tensor,
}

/// Handles to every intermediate the training loop and diagnostics need.
#[derive(Debug, Clone, Copy)]
pub struct NetworkVars {
    pub edges: EdgeVars,
    pub f_ir: Var,
    pub f_vi: Var,
    pub fused_features: Var,
    pub output: Var,
}

pub fn fuse_on_tape(tape: &mut Tape, f_ir: Var, f_vi: Var, edges: EdgeVars) -> Result<Var> {
    let ir = tape.gate(f_ir, edges.e_s)?;
    let vi = tape.gate(f_vi, edges.e_d)?;
    tape.concat(&[ir, vi])
}

pub fn reconstruct_on_tape(tape: &mut Tape, f_f: Var, edges: EdgeVars, params: &BoundParams) -> Result<Var> {
    let guided = params.ablation().uses_guidance();
    let mut guide = if guided { Some(tape.concat(&[edges.e_d, edges.e_s])?) } else { None };
    let mut h = f_f;
    for i in 0..3 {
        h = params.conv(tape, &format!("reconstructor.stage{i}"), h)?;
        if let Some(w) = guide {
            let w = params.conv(tape, &format!("reconstructor.guide{i}"), w)?;
            h = tape.gate(h, w)?;
            guide = Some(w);
        }
    }
    if let Some(w) = guide {
        let w = params.conv(tape, "reconstructor.guide3", w)?;
        h = tape.gate(h, w)?;
    }
    params.conv(tape, "reconstructor.out", h)
}

/// Full network. `edge_src` feeds the edge network and is normally the same
/// variable as `i_vi`.
pub fn network_on_tape(
    tape: &mut Tape,
    i_ir: Var,
    i_vi: Var,
    edge_src: Var,
    params: &BoundParams,
) -> Result<NetworkVars> {
    let edges = le2_on_tape(tape, edge_src, params)?;
    let (f_ir, f_vi) = extract_on_tape(tape, i_ir, i_vi, params)?;
    let fused_features = fuse_on_tape(tape, f_ir, f_vi, edges)?;
    let output = reconstruct_on_tape(tape, fused_features, edges, params)?;
    Ok(NetworkVars {
        edges,
        f_ir,
        f_vi,
        fused_features,
        output,
    })
}

fn edge_vars(tape: &mut Tape, w: &EdgeWeights) -> EdgeVars {
    EdgeVars {
        e_d: tape.constant(w.e_d.clone()),
        e_s: tape.constant(w.e_s.clone()),
    }
}

pub fn fuse_features(feats: &ModalFeatures, w: &EdgeWeights) -> Result<FusedFeatures> {
    if feats.f_ir.shape() != feats.f_vi.shape() {
        return Err(FusionError::shape("modal features differ in shape"));
    }
    let mut tape = Tape::new();
    let f_ir = tape.constant(feats.f_ir.clone());
    let f_vi = tape.constant(feats.f_vi.clone());
    let e = edge_vars(&mut tape, w);
    let out = fuse_on_tape(&mut tape, f_ir, f_vi, e)?;
    Ok(FusedFeatures {
        f_f: tape.value(out).clone(),
    })
}

pub fn reconstruct(f_f: &FusedFeatures, w: &EdgeWeights, params: &ModelParams) -> Result<Tensor> {
    if f_f.f_f.channels() != 2 * FEATURE_CHANNELS {
        return Err(FusionError::shape(format!(
            "reconstructor expects {} channels, got {}",
            2 * FEATURE_CHANNELS,
            f_f.f_f.channels()
        )));
    }
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let x = tape.constant(f_f.f_f.clone());
    let e = edge_vars(&mut tape, w);
    let out = reconstruct_on_tape(&mut tape, x, e, &bound)?;
    Ok(tape.value(out).clone())
}

/// Fused luma for `(B, 1, H, W)` unit-range inputs.
pub fn fuse_tensors(i_ir: &Tensor, i_vi: &Tensor, params: &ModelParams) -> Result<Tensor> {
    fuse_tensors_with_edge_source(i_ir, i_vi, i_vi, params)
}

/// Like [`fuse_tensors`] but with a separate image driving the edge network.
pub fn fuse_tensors_with_edge_source(
    i_ir: &Tensor,
    i_vi: &Tensor,
    edge_src: &Tensor,
    params: &ModelParams,
) -> Result<Tensor> {
    check_pair(i_ir, i_vi)?;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let ir = tape.constant(i_ir.clone());
    let vi = tape.constant(i_vi.clone());
    let src = tape.constant(edge_src.clone());
    let net = network_on_tape(&mut tape, ir, vi, src, &bound)?;
    Ok(tape.value(net.output).clone())
}

/// Fuses a registered gray pair (any range) into a unit-range gray image.
pub fn fuse_pair(i_ir: &Image, i_vi: &Image, params: &ModelParams) -> Result<Image> {
    for img in [i_ir, i_vi] {
        if img.space() != ColorSpace::Gray {
            return Err(FusionError::Space {
                expected: "gray",
                actual: img.space().name(),
            });
        }
    }
    let out = fuse_tensors(&i_ir.to_tensor()?, &i_vi.to_tensor()?, params)?;
    Image::from_tensor(&out, 0)
}

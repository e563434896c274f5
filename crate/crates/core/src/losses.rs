//! Training objective: weighted SSIM, region-intensity and texture terms.
//!
//! All inputs are `(B, 1, H, W)` unit-range tensors. Region and texture
//! targets depend only on the source images and are treated as constants.

use crate::error::{FusionError, Result};
use crate::nn::{ops, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 3.0,
            lambda2: 7.0,
            lambda3: 49.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let w = LossWeights {
            lambda1,
            lambda2,
            lambda3,
        };
        if [lambda1, lambda2, lambda3].iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(FusionError::Config(format!("loss weights must be finite and nonnegative: {w:?}")));
        }
        Ok(w)
    }

    pub fn combine(&self, ssim: f64, region: f64, texture: f64) -> f64 {
        0.0 + self.lambda1 * ssim + self.lambda2 * region + self.lambda3 * texture
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub ssim_term: f64,
    pub region_term: f64,
    pub texture_term: f64,
}

impl LossReport {
    pub const CSV_HEADER: &'static str = "step,total,ssim,region,texture";

    pub fn csv_row(&self, step: usize) -> String {
        format!(
            "{step},{},{},{},{}",
            self.total, self.ssim_term, self.region_term, self.texture_term
        )
    }
}

fn check_triple(i_f: &Tensor, i_ir: &Tensor, i_vi: &Tensor) -> Result<()> {
    let s = i_f.shape();
    if i_ir.shape() != s || i_vi.shape() != s {
        return Err(FusionError::shape(format!(
            "loss operands differ: fused {s:?}, ir {:?}, vi {:?}",
            i_ir.shape(),
            i_vi.shape()
        )));
    }
    if s[1] != 1 {
        return Err(FusionError::shape(format!("loss operands must be single-channel, got {s:?}")));
    }
    Ok(())
}

pub fn region_target(i_ir: &Tensor, i_vi: &Tensor) -> Result<Tensor> {
    ops::maximum(&ops::box_avg3(i_ir)?, &ops::box_avg3(i_vi)?)
}

pub fn texture_target(i_ir: &Tensor, i_vi: &Tensor) -> Result<Tensor> {
    ops::maximum(&ops::sobel_mag(i_ir)?, &ops::sobel_mag(i_vi)?)
}

/// `1 − ½(SSIM(f, ir) + SSIM(f, vi))`.
pub fn loss_ssim(i_f: &Tensor, i_ir: &Tensor, i_vi: &Tensor) -> Result<f64> {
    check_triple(i_f, i_ir, i_vi)?;
    Ok(1.0 - 0.5 * (ops::ssim(i_f, i_ir)? + ops::ssim(i_f, i_vi)?))
}

/// Mean L1 distance to the per-pixel maximum of the 3×3 source means.
pub fn loss_region(i_f: &Tensor, i_ir: &Tensor, i_vi: &Tensor) -> Result<f64> {
    check_triple(i_f, i_ir, i_vi)?;
    ops::mean_abs_diff(i_f, &region_target(i_ir, i_vi)?)
}

/// Mean L1 distance between Sobel magnitudes and their per-pixel source maximum.
pub fn loss_texture(i_f: &Tensor, i_ir: &Tensor, i_vi: &Tensor) -> Result<f64> {
    check_triple(i_f, i_ir, i_vi)?;
    ops::mean_abs_diff(&ops::sobel_mag(i_f)?, &texture_target(i_ir, i_vi)?)
}

pub fn loss_total(i_f: &Tensor, i_ir: &Tensor, i_vi: &Tensor, w: &LossWeights) -> Result<LossReport> {
    let ssim_term = loss_ssim(i_f, i_ir, i_vi)?;
    let region_term = loss_region(i_f, i_ir, i_vi)?;
    let texture_term = loss_texture(i_f, i_ir, i_vi)?;
    Ok(LossReport {
        total: w.combine(ssim_term, region_term, texture_term),
        ssim_term,
        region_term,
        texture_term,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub total: Var,
    pub ssim: Var,
    pub region: Var,
    pub texture: Var,
}

impl LossVars {
    pub fn report(&self, tape: &Tape) -> LossReport {
        let s = |v: Var| tape.value(v).data()[0];
        LossReport {
            total: s(self.total),
            ssim_term: s(self.ssim),
            region_term: s(self.region),
            texture_term: s(self.texture),
        }
    }
}

/// Records the objective for a fused output `i_f` already on the tape.
pub fn loss_on_tape(tape: &mut Tape, i_f: Var, i_ir: &Tensor, i_vi: &Tensor, w: &LossWeights) -> Result<LossVars> {
    check_triple(tape.value(i_f), i_ir, i_vi)?;
    let s_ir = tape.ssim_against(i_f, i_ir)?;
    let s_vi = tape.ssim_against(i_f, i_vi)?;
    let one = tape.constant(Tensor::scalar(1.0));
    let ssim = tape.weighted_sum(&[(one, 1.0), (s_ir, -0.5), (s_vi, -0.5)])?;
    let region = tape.mean_abs_diff(i_f, &region_target(i_ir, i_vi)?)?;
    let grad_f = tape.sobel_mag(i_f)?;
    let texture = tape.mean_abs_diff(grad_f, &texture_target(i_ir, i_vi)?)?;
    let total = tape.weighted_sum(&[(ssim, w.lambda1), (region, w.lambda2), (texture, w.lambda3)])?;
    Ok(LossVars {
        total,
        ssim,
        region,
        texture,
    })
}

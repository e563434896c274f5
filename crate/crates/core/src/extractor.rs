//! Per-modality feature extraction: gated multi-scale stem followed by a
//! three-layer dense block. Channel plan 1 → 16 → 64.

use crate::error::{FusionError, Result};
use crate::le2::check_gray_input;
use crate::nn::{Tape, Tensor, Var};
use crate::params::{apply_layer, BoundParams, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Infrared,
    Visible,
}

impl Modality {
    pub fn key(self) -> &'static str {
        match self {
            Modality::Infrared => "ir",
            Modality::Visible => "vi",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalFeatures {
    pub f_ir: Tensor,
    pub f_vi: Tensor,
}

/// `A ⊕ (A ⊗ G)` with `A = conv5×5(x)` and `G = LReLU(conv1×1(x))`. Under
/// the `no_mra` ablation this is a single 5×5 LReLU conv.
pub fn mra_on_tape(tape: &mut Tape, x: Var, params: &BoundParams, m: Modality) -> Result<Var> {
    let key = m.key();
    if !params.ablation().uses_mra() {
        return params.conv(tape, &format!("extractor.{key}.stem"), x);
    }
    let a = params.conv(tape, &format!("extractor.{key}.mra.branch5"), x)?;
    let g = params.conv(tape, &format!("extractor.{key}.mra.gate1"), x)?;
    tape.gate(a, g)
}

/// Three cascaded 3×3 LReLU convs; output is `concat(x, d1, d2, d3)`.
pub fn dense_on_tape(tape: &mut Tape, x: Var, params: &BoundParams, m: Modality) -> Result<Var> {
    let key = m.key();
    let mut parts = vec![x];
    for i in 0..3 {
        let input = if parts.len() == 1 { x } else { tape.concat(&parts)? };
        let d = params.conv(tape, &format!("extractor.{key}.dense{i}"), input)?;
        parts.push(d);
    }
    tape.concat(&parts)
}

pub fn stream_on_tape(tape: &mut Tape, x: Var, params: &BoundParams, m: Modality) -> Result<Var> {
    let stem = mra_on_tape(tape, x, params, m)?;
    dense_on_tape(tape, stem, params, m)
}

/// Features of both modalities, `(f_ir, f_vi)` on the tape.
pub fn extract_on_tape(tape: &mut Tape, i_ir: Var, i_vi: Var, params: &BoundParams) -> Result<(Var, Var)> {
    check_pair(tape.value(i_ir), tape.value(i_vi))?;
    let f_ir = stream_on_tape(tape, i_ir, params, Modality::Infrared)?;
    let f_vi = stream_on_tape(tape, i_vi, params, Modality::Visible)?;
    Ok((f_ir, f_vi))
}

pub(crate) fn check_pair(ir: &Tensor, vi: &Tensor) -> Result<()> {
    check_gray_input(ir, "infrared input")?;
    check_gray_input(vi, "visible input")?;
    if ir.shape() != vi.shape() {
        return Err(FusionError::shape(format!(
            "infrared {:?} and visible {:?} are not registered",
            ir.shape(),
            vi.shape()
        )));
    }
    Ok(())
}

fn run<F>(params: &ModelParams, inputs: &[&Tensor], f: F) -> Result<Tensor>
where
    F: FnOnce(&mut Tape, &[Var], &BoundParams) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant((*t).clone())).collect();
    let out = f(&mut tape, &vars, &bound)?;
    Ok(tape.value(out).clone())
}

pub fn mra_forward(i_m: &Tensor, params: &ModelParams, m: Modality) -> Result<Tensor> {
    check_gray_input(i_m, "extractor input")?;
    run(params, &[i_m], |t, v, p| mra_on_tape(t, v[0], p, m))
}

pub fn dense_forward(x: &Tensor, params: &ModelParams, m: Modality) -> Result<Tensor> {
    if x.channels() != crate::params::BASE_CHANNELS {
        return Err(FusionError::shape(format!(
            "dense block expects {} channels, got {}",
            crate::params::BASE_CHANNELS,
            x.channels()
        )));
    }
    run(params, &[x], |t, v, p| dense_on_tape(t, v[0], p, m))
}

pub fn extract(i_ir: &Tensor, i_vi: &Tensor, params: &ModelParams) -> Result<ModalFeatures> {
    check_pair(i_ir, i_vi)?;
    Ok(ModalFeatures {
        f_ir: dense_forward(&mra_forward(i_ir, params, Modality::Infrared)?, params, Modality::Infrared)?,
        f_vi: dense_forward(&mra_forward(i_vi, params, Modality::Visible)?, params, Modality::Visible)?,
    })
}

/// Gated stem split into its branches `(A, G)`, evaluated without a tape.
pub fn mra_branches(i_m: &Tensor, params: &ModelParams, m: Modality) -> Result<(Tensor, Tensor)> {
    let key = m.key();
    Ok((
        apply_layer(params, &format!("extractor.{key}.mra.branch5"), i_m)?,
        apply_layer(params, &format!("extractor.{key}.mra.gate1"), i_m)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Ablation;

    fn img(seed: usize) -> Tensor {
        Tensor::from_fn([1, 1, 8, 8], |[_, _, y, x]| ((y * 13 + x * 7 + seed * 5) % 17) as f64 / 16.0)
    }

    fn zero_layer(p: &mut ModelParams, layer: &str) {
        for suffix in ["weight", "bias"] {
            p.get_mut(&format!("{layer}.{suffix}")).unwrap().data_mut().fill(0.0);
        }
    }

    #[test]
    fn mra_identities() {
        let mut p = ModelParams::init(Ablation::None, 4);
        zero_layer(&mut p, "extractor.ir.mra.gate1");
        let (a, _) = mra_branches(&img(1), &p, Modality::Infrared).unwrap();
        assert_eq!(mra_forward(&img(1), &p, Modality::Infrared).unwrap(), a);

        let mut p = ModelParams::init(Ablation::None, 4);
        zero_layer(&mut p, "extractor.vi.mra.branch5");
        let out = mra_forward(&img(2), &p, Modality::Visible).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mra_matches_gate_formula() {
        let p = ModelParams::init(Ablation::None, 9);
        let x = img(3);
        let (a, g) = mra_branches(&x, &p, Modality::Visible).unwrap();
        let expect = a.zip_map(&g, |a, g| a + a * g).unwrap();
        assert_eq!(mra_forward(&x, &p, Modality::Visible).unwrap(), expect);
    }

    #[test]
    fn dense_block_with_zero_weights_passes_input_through() {
        let mut p = ModelParams::init(Ablation::None, 2);
        for i in 0..3 {
            zero_layer(&mut p, &format!("extractor.ir.dense{i}"));
        }
        let x = Tensor::from_fn([1, 16, 8, 8], |[_, c, y, x]| (c + y * x) as f64 * 0.01);
        let out = dense_forward(&x, &p, Modality::Infrared).unwrap();
        assert_eq!(out.shape(), [1, 64, 8, 8]);
        assert_eq!(out.slice_channels(0, 16), x);
        assert!(out.slice_channels(16, 48).data().iter().all(|&v| v == 0.0));
        assert!(dense_forward(&Tensor::zeros([1, 8, 8, 8]), &p, Modality::Infrared).is_err());
    }

    #[test]
    fn dense_block_matches_layerwise_evaluation() {
        let p = ModelParams::init(Ablation::None, 6);
        let x = Tensor::from_fn([1, 16, 8, 8], |[_, c, y, x]| ((c * 3 + y * 5 + x) % 7) as f64 * 0.1 - 0.3);
        let d1 = apply_layer(&p, "extractor.vi.dense0", &x).unwrap();
        let c1 = Tensor::concat_channels(&[&x, &d1]).unwrap();
        let d2 = apply_layer(&p, "extractor.vi.dense1", &c1).unwrap();
        let c2 = Tensor::concat_channels(&[&x, &d1, &d2]).unwrap();
        let d3 = apply_layer(&p, "extractor.vi.dense2", &c2).unwrap();
        let expect = Tensor::concat_channels(&[&x, &d1, &d2, &d3]).unwrap();
        assert_eq!(dense_forward(&x, &p, Modality::Visible).unwrap(), expect);
    }

    #[test]
    fn streams_are_independent() {
        let p = ModelParams::init(Ablation::None, 1);
        let a = extract(&img(1), &img(2), &p).unwrap();
        assert_eq!(a.f_ir.shape(), [1, 64, 8, 8]);
        let mut q = p.clone();
        q.get_mut("extractor.ir.dense1.weight").unwrap().data_mut()[0] += 0.5;
        let b = extract(&img(1), &img(2), &q).unwrap();
        assert_eq!(a.f_vi, b.f_vi);
        assert_ne!(a.f_ir, b.f_ir);
    }

    #[test]
    fn shared_weights_and_inputs_give_identical_features() {
        let mut p = ModelParams::init(Ablation::None, 7);
        let names: Vec<String> = p.names().filter(|n| n.starts_with("extractor.ir.")).map(String::from).collect();
        for n in names {
            let t = p.get(&n).unwrap().clone();
            *p.get_mut(&n.replacen(".ir.", ".vi.", 1)).unwrap() = t;
        }
        let f = extract(&img(4), &img(4), &p).unwrap();
        assert_eq!(f.f_ir, f.f_vi);
    }

    #[test]
    fn mismatched_pair_is_rejected() {
        let p = ModelParams::init(Ablation::None, 0);
        assert!(extract(&img(0), &Tensor::zeros([1, 1, 9, 8]), &p).is_err());
    }
}

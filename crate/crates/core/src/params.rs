//! Named parameter collections and the layer plan that defines them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FusionError, Result};
use crate::nn::ops;
use crate::nn::{Activation, ConvSpec, Tape, Tensor, Var};

/// Architecture and objective variants used for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Ablation {
    #[default]
    None,
    /// Edge weights are used in feature fusion only; the reconstructor is unguided.
    Le2FusionOnly,
    /// No edge network; both edge weights are the constant 0.5.
    NoLe2,
    /// The gated multi-scale stem is replaced by a plain 5×5 conv.
    NoMra,
    /// Region intensity term dropped from the objective.
    NoRegionLoss,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::None,
        Ablation::Le2FusionOnly,
        Ablation::NoLe2,
        Ablation::NoMra,
        Ablation::NoRegionLoss,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::Le2FusionOnly => "le2_fusion_only",
            Ablation::NoLe2 => "no_le2",
            Ablation::NoMra => "no_mra",
            Ablation::NoRegionLoss => "no_region_loss",
        }
    }

    pub fn uses_le2(self) -> bool {
        self != Ablation::NoLe2
    }

    pub fn uses_mra(self) -> bool {
        self != Ablation::NoMra
    }

    pub fn uses_guidance(self) -> bool {
        self != Ablation::Le2FusionOnly
    }

    /// Variant that decides the layer plan. Objective-only ablations share
    /// the full architecture.
    pub fn architecture(self) -> Ablation {
        match self {
            Ablation::NoRegionLoss => Ablation::None,
            other => other,
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| FusionError::Config(format!("unknown ablation '{s}'")))
    }
}

pub const BASE_CHANNELS: usize = 16;
pub const FEATURE_CHANNELS: usize = 4 * BASE_CHANNELS;
pub const RECON_CHANNELS: [usize; 4] = [2 * FEATURE_CHANNELS, 64, 32, 16];

/// Ordered `(layer name, spec)` list for one architecture variant.
pub fn layer_plan(ablation: Ablation) -> Vec<(String, ConvSpec)> {
    use Activation::*;
    let c = BASE_CHANNELS;
    let mut plan = Vec::new();
    if ablation.uses_le2() {
        plan.push(("le2.trunk0".to_string(), ConvSpec::new(1, c, 5, LRelu)));
        for i in 1..4 {
            plan.push((format!("le2.trunk{i}"), ConvSpec::new(c, c, 3, LRelu)));
        }
        plan.push(("le2.head_d".to_string(), ConvSpec::new(c, 1, 3, None)));
        plan.push(("le2.head_s".to_string(), ConvSpec::new(c, 1, 3, None)));
    }
    for m in ["ir", "vi"] {
        if ablation.uses_mra() {
            plan.push((format!("extractor.{m}.mra.branch5"), ConvSpec::new(1, c, 5, None)));
            plan.push((format!("extractor.{m}.mra.gate1"), ConvSpec::new(1, c, 1, LRelu)));
        } else {
            plan.push((format!("extractor.{m}.stem"), ConvSpec::new(1, c, 5, LRelu)));
        }
        for i in 0..3 {
            plan.push((format!("extractor.{m}.dense{i}"), ConvSpec::new(c * (i + 1), c, 3, LRelu)));
        }
    }
    for i in 0..3 {
        plan.push((
            format!("reconstructor.stage{i}"),
            ConvSpec::new(RECON_CHANNELS[i], RECON_CHANNELS[i + 1], 3, LRelu),
        ));
    }
    if ablation.uses_guidance() {
        plan.push(("reconstructor.guide0".to_string(), ConvSpec::new(2, RECON_CHANNELS[1], 1, None)));
        for i in 1..3 {
            plan.push((
                format!("reconstructor.guide{i}"),
                ConvSpec::new(RECON_CHANNELS[i], RECON_CHANNELS[i + 1], 1, None),
            ));
        }
        plan.push(("reconstructor.guide3".to_string(), ConvSpec::new(16, 16, 1, None)));
    }
    plan.push(("reconstructor.out".to_string(), ConvSpec::new(RECON_CHANNELS[3], 1, 1, Tanh)));
    plan
}

pub(crate) fn spec_of(ablation: Ablation, layer: &str) -> ConvSpec {
    layer_plan(ablation)
        .into_iter()
        .find_map(|(n, s)| (n == layer).then_some(s))
        .unwrap_or_else(|| panic!("layer {layer} not in the {ablation} plan"))
}

/// All learned weights of one model, keyed `"<layer>.weight"` / `"<layer>.bias"`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    ablation: Ablation,
    tensors: BTreeMap<String, Tensor>,
}

const FINGERPRINT_TAG: &str = "le2fusion-arch-v1";

impl ModelParams {
    /// Kaiming-uniform fan-in kernels with the `a = √5` leaky gain, so the
    /// bound is `1/sqrt(fan_in)`; zero biases.
    pub fn init(ablation: Ablation, seed: u64) -> Self {
        let ablation = ablation.architecture();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for (name, spec) in layer_plan(ablation) {
            let bound = 1.0 / (spec.fan_in() as f64).sqrt();
            let w = Tensor::random_uniform(spec.weight_shape(), -bound, bound, &mut rng);
            tensors.insert(format!("{name}.weight"), w);
            tensors.insert(format!("{name}.bias"), Tensor::zeros(spec.bias_shape()));
        }
        ModelParams { ablation, tensors }
    }

    /// Validates names and shapes against the plan of `ablation`.
    pub fn from_tensors(ablation: Ablation, tensors: BTreeMap<String, Tensor>) -> Result<Self> {
        let ablation = ablation.architecture();
        let expected = Self::expected_shapes(ablation);
        if expected.len() != tensors.len() {
            return Err(FusionError::shape(format!(
                "{ablation} model needs {} tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for (name, shape) in &expected {
            match tensors.get(name) {
                Some(t) if t.shape() == *shape => {}
                Some(t) => {
                    return Err(FusionError::shape(format!(
                        "{name}: expected {shape:?}, got {:?}",
                        t.shape()
                    )))
                }
                None => return Err(FusionError::shape(format!("missing tensor {name}"))),
            }
        }
        if let Some((name, _)) = tensors.iter().find(|(_, t)| !t.is_finite()) {
            return Err(FusionError::shape(format!("tensor {name} has non-finite entries")));
        }
        Ok(ModelParams { ablation, tensors })
    }

    fn expected_shapes(ablation: Ablation) -> BTreeMap<String, [usize; 4]> {
        layer_plan(ablation)
            .into_iter()
            .flat_map(|(n, s)| [(format!("{n}.weight"), s.weight_shape()), (format!("{n}.bias"), s.bias_shape())])
            .collect()
    }

    pub fn ablation(&self) -> Ablation {
        self.ablation
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn param_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn fingerprint(&self) -> u64 {
        fingerprint_of(self.tensors.iter().map(|(n, t)| (n.as_str(), t.shape())))
    }

    /// Fingerprint a freshly initialized model of `ablation` would carry.
    pub fn expected_fingerprint(ablation: Ablation) -> u64 {
        let shapes = Self::expected_shapes(ablation.architecture());
        fingerprint_of(shapes.iter().map(|(n, s)| (n.as_str(), *s)))
    }

    /// Records every tensor on `tape`, as leaves when `trainable`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundParams {
        let vars = self
            .tensors
            .iter()
            .map(|(n, t)| {
                let v = if trainable { tape.leaf(t.clone()) } else { tape.constant(t.clone()) };
                (n.clone(), v)
            })
            .collect();
        BoundParams {
            ablation: self.ablation,
            vars,
        }
    }
}

fn fingerprint_of<'a>(entries: impl Iterator<Item = (&'a str, [usize; 4])>) -> u64 {
    // FNV-1a 64
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(FINGERPRINT_TAG.as_bytes());
    for (name, shape) in entries {
        feed(name.as_bytes());
        for d in shape {
            feed(&(d as u64).to_le_bytes());
        }
        feed(b";");
    }
    h
}

/// Parameters recorded on a tape, addressable by layer name.
pub struct BoundParams {
    ablation: Ablation,
    vars: HashMap<String, Var>,
}

impl BoundParams {
    pub fn ablation(&self) -> Ablation {
        self.ablation
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| FusionError::shape(format!("parameter {name} not bound")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }

    /// Applies layer `name` (conv + its activation) to `x`.
    pub fn conv(&self, tape: &mut Tape, layer: &str, x: Var) -> Result<Var> {
        let spec = spec_of(self.ablation, layer);
        let w = self.var(&format!("{layer}.weight"))?;
        let b = self.var(&format!("{layer}.bias"))?;
        let y = tape.conv2d(x, w, b)?;
        Ok(match spec.activation {
            Activation::LRelu => tape.lrelu(y),
            Activation::Tanh => tape.tanh_map(y),
            Activation::None => y,
        })
    }
}

/// Direct (tape-free) application of one layer, for reference evaluation.
pub fn apply_layer(params: &ModelParams, layer: &str, x: &Tensor) -> Result<Tensor> {
    let spec = spec_of(params.ablation, layer);
    let w = params
        .get(&format!("{layer}.weight"))
        .ok_or_else(|| FusionError::shape(format!("missing {layer}.weight")))?;
    let b = params
        .get(&format!("{layer}.bias"))
        .ok_or_else(|| FusionError::shape(format!("missing {layer}.bias")))?;
    Ok(ops::activate(ops::conv2d(x, w, b)?, spec.activation))
}

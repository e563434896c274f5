//! Reverse-mode differentiation over a linear tape of tensor operations.
//!
//! Forward values are computed eagerly by the functions in [`super::ops`],
//! so a value read from the tape is bit-identical to calling the operator
//! directly on the same inputs.

use super::ops;
use super::tensor::Tensor;
use crate::error::{FusionError, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    Conv { x: Var, w: Var, b: Var },
    LRelu(Var),
    TanhMap(Var),
    Softplus(Var),
    BoxAvg3(Var),
    SobelMag(Var),
    Gate { x: Var, g: Var },
    Concat(Vec<Var>),
    EdgeRatio { num: Var, other: Var },
    SsimAgainst { x: Var, target: Tensor },
    MeanAbsDiff { x: Var, target: Tensor },
    WeightedSum(Vec<(Var, f64)>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar output with respect to every recorded leaf.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the variable does not influence the output.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A differentiable input (parameter or image).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let out = ops::conv2d(self.value(x), self.value(w), self.value(b))?;
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(out, Op::Conv { x, w, b }, rg))
    }

    pub fn lrelu(&mut self, x: Var) -> Var {
        let out = ops::lrelu(self.value(x));
        let rg = self.rg(x);
        self.push(out, Op::LRelu(x), rg)
    }

    pub fn tanh_map(&mut self, x: Var) -> Var {
        let out = ops::tanh_map(self.value(x));
        let rg = self.rg(x);
        self.push(out, Op::TanhMap(x), rg)
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let out = ops::softplus(self.value(x));
        let rg = self.rg(x);
        self.push(out, Op::Softplus(x), rg)
    }

    pub fn box_avg3(&mut self, x: Var) -> Result<Var> {
        let out = ops::box_avg3(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::BoxAvg3(x), rg))
    }

    pub fn sobel_mag(&mut self, x: Var) -> Result<Var> {
        let out = ops::sobel_mag(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::SobelMag(x), rg))
    }

    pub fn gate(&mut self, x: Var, g: Var) -> Result<Var> {
        let out = ops::gate(self.value(x), self.value(g))?;
        let rg = self.rg(x) || self.rg(g);
        Ok(self.push(out, Op::Gate { x, g }, rg))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Tensor::concat_channels(&values)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(out, Op::Concat(parts.to_vec()), rg))
    }

    pub fn edge_ratio(&mut self, num: Var, other: Var) -> Result<Var> {
        let out = ops::edge_ratio(self.value(num), self.value(other))?;
        let rg = self.rg(num) || self.rg(other);
        Ok(self.push(out, Op::EdgeRatio { num, other }, rg))
    }

    /// Scalar mean SSIM between `x` and a fixed target.
    pub fn ssim_against(&mut self, x: Var, target: &Tensor) -> Result<Var> {
        let v = ops::ssim(self.value(x), target)?;
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::scalar(v),
            Op::SsimAgainst {
                x,
                target: target.clone(),
            },
            rg,
        ))
    }

    /// Scalar mean absolute difference between `x` and a fixed target.
    pub fn mean_abs_diff(&mut self, x: Var, target: &Tensor) -> Result<Var> {
        let v = ops::mean_abs_diff(self.value(x), target)?;
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::scalar(v),
            Op::MeanAbsDiff {
                x,
                target: target.clone(),
            },
            rg,
        ))
    }

    /// `Σ cᵢ·vᵢ` over same-shaped values.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let (first, _) = *terms
            .first()
            .ok_or_else(|| FusionError::shape("weighted sum of zero terms"))?;
        let shape = self.value(first).shape();
        let mut out = Tensor::zeros(shape);
        for &(v, c) in terms {
            let t = self.value(v);
            t.expect_shape(shape)?;
            for (o, &x) in out.data_mut().iter_mut().zip(t.data()) {
                *o += c * x;
            }
        }
        let rg = terms.iter().any(|&(v, _)| self.rg(v));
        Ok(self.push(out, Op::WeightedSum(terms.to_vec()), rg))
    }

    /// Which side of its kink every piecewise-linear input sits on (LReLU
    /// inputs, Sobel responses under `|·|`, residuals of absolute
    /// differences). Two evaluations with equal patterns lie on one smooth
    /// piece, which is what a finite-difference check needs.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::LRelu(x) => out.extend(self.value(*x).data().iter().map(|&v| v > 0.0)),
                Op::SobelMag(x) => {
                    let (gx, gy) = ops::sobel(self.value(*x)).expect("shape checked at record time");
                    out.extend(gx.data().iter().chain(gy.data()).map(|&v| v > 0.0));
                }
                Op::MeanAbsDiff { x, target } => {
                    out.extend(self.value(*x).data().iter().zip(target.data()).map(|(a, b)| a > b))
                }
                _ => {}
            }
        }
        out
    }

    /// Backpropagates from `output`, seeded with ones.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::full(self.value(output).shape(), 1.0));

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Conv { x, w, b } => {
                let (dx, dw, db) =
                    ops::conv2d_backward(self.value(*x), self.value(*w), g, self.rg(*x));
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, dx);
                }
                self.accumulate(grads, *w, dw);
                self.accumulate(grads, *b, db);
            }
            Op::LRelu(x) => {
                let d = ops::lrelu_backward(self.value(*x), g);
                self.accumulate(grads, *x, d);
            }
            Op::TanhMap(x) => {
                let d = ops::tanh_map_backward(&node.value, g);
                self.accumulate(grads, *x, d);
            }
            Op::Softplus(x) => {
                let d = ops::softplus_backward(self.value(*x), g);
                self.accumulate(grads, *x, d);
            }
            Op::BoxAvg3(x) => {
                let d = ops::filter2d_adjoint(g, &ops::BOX3, 3);
                self.accumulate(grads, *x, d);
            }
            Op::SobelMag(x) => {
                let d = ops::sobel_mag_backward(self.value(*x), g);
                self.accumulate(grads, *x, d);
            }
            Op::Gate { x, g: gv } => {
                let (dx, dg) = ops::gate_backward(self.value(*x), self.value(*gv), g);
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *gv, dg);
            }
            Op::Concat(parts) => {
                let mut start = 0;
                for &p in parts {
                    let c = self.value(p).channels();
                    if self.rg(p) {
                        self.accumulate(grads, p, g.slice_channels(start, c));
                    }
                    start += c;
                }
            }
            Op::EdgeRatio { num, other } => {
                let (dn, d_o) = ops::edge_ratio_backward(self.value(*num), self.value(*other), g);
                self.accumulate(grads, *num, dn);
                self.accumulate(grads, *other, d_o);
            }
            Op::SsimAgainst { x, target } => {
                let (_, dx) = ops::ssim_grad_x(self.value(*x), target).expect("shape checked at record time");
                let s = g.data()[0];
                self.accumulate(grads, *x, dx.map(|v| v * s));
            }
            Op::MeanAbsDiff { x, target } => {
                let d = ops::mean_abs_diff_backward(self.value(*x), target, g.data()[0]);
                self.accumulate(grads, *x, d);
            }
            Op::WeightedSum(terms) => {
                for &(v, c) in terms {
                    self.accumulate(grads, v, g.map(|x| c * x));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::full([1, 1, 4, 4], 2.0));
        let c = tape.constant(Tensor::full([1, 1, 4, 4], 3.0));
        let s = tape.weighted_sum(&[(a, 2.0), (c, 5.0)]).unwrap();
        let t = tape.mean_abs_diff(s, &Tensor::zeros([1, 1, 4, 4])).unwrap();
        assert_eq!(tape.value(t).data()[0], 19.0);
        let g = tape.backward(t);
        assert!(g.get(c).is_none());
        assert!(g.get(a).unwrap().data().iter().all(|&v| (v - 2.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn shared_input_accumulates() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::full([1, 1, 2, 2], 1.0));
        let c = tape.concat(&[a, a]).unwrap();
        let s = tape.mean_abs_diff(c, &Tensor::zeros([1, 2, 2, 2])).unwrap();
        let g = tape.backward(s);
        assert!(g.get(a).unwrap().data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }
}

//! End-to-end gradient probe of the fusion network with respect to every
//! parameter tensor.

use le2fusion::fuser::network_on_tape;
use le2fusion::nn::{Tape, Tensor, Var};
use le2fusion::params::BoundParams;
use le2fusion::{Ablation, ModelParams};

use super::*;

const S8: [usize; 4] = [1, 1, 8, 8];

#[derive(Debug, Default)]
pub struct NetCheck {
    pub tensors: usize,
    pub checked: usize,
    pub reprobed: usize,
    pub unresolved: usize,
    pub worst_entry: f64,
    pub worst_direction: f64,
    pub failing: Vec<String>,
}

impl NetCheck {
    pub fn passed(&self) -> bool {
        self.unresolved == 0 && self.worst_entry < FD_TOL && self.worst_direction < FD_TOL
    }
}

/// Projection of the network output on a 1×1×8×8 pair, as a function of
/// one parameter tensor.
struct NetProbe {
    params: ModelParams,
    ir: Tensor,
    vi: Tensor,
    target: Tensor,
}

/// Central differences at sampled entries. A probe whose ±h evaluation
/// flips a piecewise-linear unit is repeated with a smaller step until it
/// stays on one smooth piece.
#[derive(Default)]
struct Screened {
    analytic: Vec<f64>,
    numeric: Vec<f64>,
    reprobed: usize,
    unresolved: usize,
}

const MIN_STEP: f64 = 1e-9;

impl NetProbe {
    fn new(ablation: Ablation, seed: u64) -> Self {
        let params = ModelParams::init(ablation, seed);
        let ir = rand_tensor(S8, 0.0, 1.0, seed + 1);
        let vi = rand_tensor(S8, 0.0, 1.0, seed + 2);
        let out = le2fusion::fuse_tensors(&ir, &vi, &params).unwrap();
        let target = projection_target(&out, seed + 3);
        NetProbe { params, ir, vi, target }
    }

    fn record(&self, params: &ModelParams, trainable: bool) -> (Tape, BoundParams, Var) {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, trainable);
        let ir = tape.constant(self.ir.clone());
        let vi = tape.constant(self.vi.clone());
        let net = network_on_tape(&mut tape, ir, vi, vi, &bound).unwrap();
        let loss = tape.mean_abs_diff(net.output, &self.target).unwrap();
        (tape, bound, loss)
    }

    fn eval_with(&self, name: &str, t: &Tensor) -> (f64, Vec<bool>) {
        let mut p = self.params.clone();
        *p.get_mut(name).unwrap() = t.clone();
        let (tape, _, loss) = self.record(&p, false);
        (tape.value(loss).data()[0], tape.activation_pattern())
    }

    fn analytic(&self) -> (Vec<(String, Tensor)>, Vec<bool>) {
        let (tape, bound, loss) = self.record(&self.params, true);
        let grads = tape.backward(loss);
        let g = bound
            .iter()
            .map(|(n, v)| (n.clone(), grads.get(*v).cloned().expect("every parameter gets a gradient")))
            .collect();
        (g, tape.activation_pattern())
    }

    /// Central difference along unit direction `d`; `None` if no step down
    /// to [`MIN_STEP`] avoids a kink. The flag reports a reduced step.
    fn along(&self, name: &str, d: &[f64], base: &[bool]) -> Option<(f64, bool)> {
        let p = self.params.get(name).unwrap();
        let mut h = FD_STEP;
        while h >= MIN_STEP {
            let shifted = |sign: f64| {
                let mut t = p.clone();
                for (v, dv) in t.data_mut().iter_mut().zip(d) {
                    *v += sign * h * dv;
                }
                self.eval_with(name, &t)
            };
            let ((up, pu), (down, pd)) = (shifted(1.0), shifted(-1.0));
            if pu == base && pd == base {
                return Some(((up - down) / (2.0 * h), h < FD_STEP));
            }
            h /= 4.0;
        }
        None
    }

    fn screen(&self, name: &str, grad: &Tensor, base: &[bool], idx: &[usize]) -> Screened {
        let n = grad.len();
        let mut s = Screened::default();
        for &i in idx {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            match self.along(name, &d, base) {
                Some((numeric, reduced)) => {
                    s.analytic.push(grad.data()[i]);
                    s.numeric.push(numeric);
                    s.reprobed += reduced as usize;
                }
                None => s.unresolved += 1,
            }
        }
        s
    }
}

pub fn check_network(ablation: Ablation, entries: usize) -> NetCheck {
    let probe = NetProbe::new(ablation, 7);
    let (grads, base) = probe.analytic();
    let mut out = NetCheck::default();
    for (k, (name, g)) in grads.into_iter().enumerate() {
        let idx = sample_indices(g.len(), entries, k as u64);
        let s = probe.screen(&name, &g, &base, &idx);
        let err = rel_err(&s.analytic, &s.numeric);
        out.worst_entry = out.worst_entry.max(err);
        out.checked += s.analytic.len();
        out.reprobed += s.reprobed;
        out.unresolved += s.unresolved;

        let mut d = random_signs(g.len(), 1000 + k as u64);
        let norm = (d.len() as f64).sqrt();
        d.iter_mut().for_each(|v| *v /= norm);
        match probe.along(&name, &d, &base) {
            Some((numeric, _)) => {
                let analytic: f64 = g.data().iter().zip(&d).map(|(a, b)| a * b).sum();
                out.worst_direction = out.worst_direction.max(rel_err(&[analytic], &[numeric]));
            }
            None => out.unresolved += 1,
        }
        if err >= FD_TOL {
            out.failing.push(name);
        }
        out.tensors += 1;
    }
    out
}

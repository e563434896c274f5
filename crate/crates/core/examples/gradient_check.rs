//! Compares tape gradients of the training loss with central differences
//! for a handful of weights in the first visible-stream layer.

use le2fusion::fuser::network_on_tape;
use le2fusion::imaging::synthetic::scene_set;
use le2fusion::losses::{loss_on_tape, LossWeights};
use le2fusion::nn::Tape;
use le2fusion::{Ablation, ModelParams};

fn loss(params: &ModelParams, ir: &le2fusion::nn::Tensor, vi: &le2fusion::nn::Tensor) -> f64 {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let (a, b) = (tape.constant(ir.clone()), tape.constant(vi.clone()));
    let net = network_on_tape(&mut tape, a, b, b, &bound).unwrap();
    let l = loss_on_tape(&mut tape, net.output, ir, vi, &LossWeights::default()).unwrap();
    tape.value(l.total).data()[0]
}

fn main() -> le2fusion::Result<()> {
    let (ir, vi) = scene_set(0, 1, 12).batch(&[0])?;
    let params = ModelParams::init(Ablation::None, 5);
    let name = params.names().next().unwrap().to_string();

    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, true);
    let (a, b) = (tape.constant(ir.clone()), tape.constant(vi.clone()));
    let net = network_on_tape(&mut tape, a, b, b, &bound)?;
    let l = loss_on_tape(&mut tape, net.output, &ir, &vi, &LossWeights::default())?;
    let grads = tape.backward(l.total);
    let g = grads.get(bound.var(&name)?).unwrap();

    let h = 1e-5;
    println!("tensor {name}");
    for i in 0..5 {
        let mut plus = params.clone();
        plus.get_mut(&name).unwrap().data_mut()[i] += h;
        let mut minus = params.clone();
        minus.get_mut(&name).unwrap().data_mut()[i] -= h;
        let numeric = (loss(&plus, &ir, &vi) - loss(&minus, &ir, &vi)) / (2.0 * h);
        println!("  [{i}] tape {:+.8e}  numeric {:+.8e}", g.data()[i], numeric);
    }
    Ok(())
}

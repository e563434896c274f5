//! Analytic gradients against central finite differences.

mod common;

use common::*;
use le2fusion::losses::{self, loss_on_tape, LossWeights};
use le2fusion::nn::{Tape, Tensor, Var};
use le2fusion::Ablation;

const S8: [usize; 4] = [1, 1, 8, 8];

/// Checks every input of `build` through a random projection of its output.
fn check(name: &str, inputs: &[Tensor], build: impl Fn(&mut Tape, &[Var]) -> Var) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &vars);
    let target = projection_target(tape.value(out), 99);
    let loss = tape.mean_abs_diff(out, &target).unwrap();
    let grads = tape.backward(loss);

    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]).expect("input reaches the output");
        let idx: Vec<usize> = (0..input.len()).collect();
        let numeric = central_diff(
            |probe| {
                let mut t = Tape::new();
                let vs: Vec<Var> = inputs
                    .iter()
                    .enumerate()
                    .map(|(j, x)| t.constant(if j == k { probe.clone() } else { x.clone() }))
                    .collect();
                let o = build(&mut t, &vs);
                let l = t.mean_abs_diff(o, &target).unwrap();
                t.value(l).data()[0]
            },
            input,
            &idx,
        );
        let err = rel_err(analytic.data(), &numeric);
        assert!(err < FD_TOL, "{name} input {k}: relative error {err:e}");
    }
}

#[test]
fn conv2d_all_kernels() {
    for (k, seed) in [(1, 1), (3, 2), (5, 3)] {
        let x = rand_tensor([1, 2, 8, 8], -1.0, 1.0, seed);
        let w = rand_tensor([3, 2, k, k], -0.5, 0.5, seed + 10);
        let b = rand_tensor([3, 1, 1, 1], -0.5, 0.5, seed + 20);
        check(&format!("conv{k}"), &[x, w, b], |t, v| t.conv2d(v[0], v[1], v[2]).unwrap());
    }
}

#[test]
fn pointwise_activations() {
    let x = rand_tensor(S8, -3.0, 3.0, 4);
    check("lrelu", std::slice::from_ref(&x), |t, v| t.lrelu(v[0]));
    check("tanh_map", std::slice::from_ref(&x), |t, v| t.tanh_map(v[0]));
    check("softplus", &[x], |t, v| t.softplus(v[0]));
}

#[test]
fn local_filters() {
    let x = rand_tensor(S8, 0.0, 1.0, 5);
    check("box_avg3", std::slice::from_ref(&x), |t, v| t.box_avg3(v[0]).unwrap());
    check("sobel_mag", &[x], |t, v| t.sobel_mag(v[0]).unwrap());
}

#[test]
fn gating_and_concat() {
    let x = rand_tensor([1, 3, 8, 8], -1.0, 1.0, 6);
    let g1 = rand_tensor(S8, 0.0, 1.0, 7);
    let g3 = rand_tensor([1, 3, 8, 8], -1.0, 1.0, 8);
    check("gate broadcast", &[x.clone(), g1.clone()], |t, v| t.gate(v[0], v[1]).unwrap());
    check("gate full", &[x.clone(), g3], |t, v| t.gate(v[0], v[1]).unwrap());
    check("concat", &[x, g1], |t, v| t.concat(&[v[1], v[0]]).unwrap());
}

#[test]
fn edge_ratio_pair() {
    let a = rand_tensor(S8, 0.01, 2.0, 9);
    let b = rand_tensor(S8, 0.01, 2.0, 10);
    check("edge_ratio", &[a, b], |t, v| t.edge_ratio(v[0], v[1]).unwrap());
}

#[test]
fn scalar_reductions() {
    let x = rand_tensor(S8, 0.0, 1.0, 11);
    let y = rand_tensor(S8, 0.0, 1.0, 12);
    let target = rand_tensor(S8, 0.0, 1.0, 13);
    check("ssim", std::slice::from_ref(&x), |t, v| t.ssim_against(v[0], &target).unwrap());
    check("mean_abs_diff", std::slice::from_ref(&x), |t, v| t.mean_abs_diff(v[0], &target).unwrap());
    check("weighted_sum", &[x, y], |t, v| t.weighted_sum(&[(v[0], 0.7), (v[1], -2.5)]).unwrap());
}

#[test]
fn ssim_matches_windowed_oracle() {
    for seed in 0..5 {
        let x = rand_tensor(S8, 0.0, 1.0, seed);
        let y = rand_tensor(S8, 0.0, 1.0, seed + 50);
        let lib = le2fusion::nn::ops::ssim(&x, &y).unwrap();
        let oracle = ssim_oracle(x.data(), y.data(), 8, 8);
        assert!((lib - oracle).abs() < 1e-12, "{lib} vs {oracle}");
    }
}

type LossFn = fn(&Tensor, &Tensor, &Tensor) -> le2fusion::Result<f64>;

#[test]
fn loss_terms_wrt_fused_image() {
    let w = LossWeights::default();
    for seed in 0..3 {
        let f = rand_tensor(S8, 0.05, 0.95, 100 + seed);
        let ir = rand_tensor(S8, 0.0, 1.0, 200 + seed);
        let vi = rand_tensor(S8, 0.0, 1.0, 300 + seed);
        let mut tape = Tape::new();
        let fv = tape.leaf(f.clone());
        let lv = loss_on_tape(&mut tape, fv, &ir, &vi, &w).unwrap();
        let idx: Vec<usize> = (0..f.len()).collect();

        let total: LossFn = |a, b, c| Ok(losses::loss_total(a, b, c, &LossWeights::default())?.total);
        let cases: [(&str, Var, LossFn); 4] = [
            ("ssim", lv.ssim, losses::loss_ssim),
            ("region", lv.region, losses::loss_region),
            ("texture", lv.texture, losses::loss_texture),
            ("total", lv.total, total),
        ];
        for (name, var, direct) in cases {
            let g = tape.backward(var);
            let analytic = g.get(fv).unwrap();
            let numeric = central_diff(|p| direct(p, &ir, &vi).unwrap(), &f, &idx);
            let err = rel_err(analytic.data(), &numeric);
            assert!(err < FD_TOL, "{name} seed {seed}: relative error {err:e}");
            assert!((tape.value(var).data()[0] - direct(&f, &ir, &vi).unwrap()).abs() < 1e-14, "{name} value");
        }
    }
}

fn assert_network(ablation: Ablation, entries: usize) {
    let c = netcheck::check_network(ablation, entries);
    eprintln!("{ablation}: {c:?}");
    assert!(c.passed(), "{ablation}: {c:?}");
    assert!(c.failing.is_empty());
}

#[test]
fn network_parameters_full_model() {
    assert_network(Ablation::None, 48);
}

#[test]
fn network_parameters_ablated_models() {
    for a in [Ablation::Le2FusionOnly, Ablation::NoLe2, Ablation::NoMra] {
        assert_network(a, 12);
    }
}

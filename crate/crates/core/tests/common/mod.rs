#![allow(dead_code)]

use rand::Rng;
use rislink::numerics::RngStream;
use rislink::rl::{Mlp, OutputActivation};

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

/// `sum_ij upstream_ij * net(inputs)_ij`, the scalar whose gradient
/// `backward_batch` returns.
fn weighted_output(net: &Mlp, inputs: &ndarray::Array2<f64>, upstream: &ndarray::Array2<f64>) -> f64 {
    let out = net.forward_batch(inputs.view()).unwrap();
    (out.output() * upstream).sum()
}

pub struct GradCheck {
    pub max_rel_param: f64,
    pub max_rel_input: f64,
    pub checked: usize,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Compares analytic parameter and input gradients of a random network with
/// central differences.
pub fn check_network(sizes: &[usize], output: OutputActivation, batch: usize, seed: u64) -> GradCheck {
    let mut rng = RngStream::new(seed, 99).generator();
    let net = Mlp::new(sizes, output, &mut rng).unwrap();
    let inputs = ndarray::Array2::from_shape_fn((batch, sizes[0]), |_| rng.random_range(-1.5..1.5));
    let upstream = ndarray::Array2::from_shape_fn((batch, *sizes.last().unwrap()), |_| rng.random_range(-1.0..1.0));

    let cache = net.forward_batch(inputs.view()).unwrap();
    let (grads, input_grad) = net.backward_batch(&cache, upstream.view()).unwrap();
    let analytic = grads.flatten();

    let params = net.parameters();
    let mut probe = net.clone();
    let mut max_rel_param: f64 = 0.0;
    for (i, g) in analytic.iter().enumerate() {
        let mut p = params.clone();
        p[i] += FD_STEP;
        probe.set_parameters(&p).unwrap();
        let up = weighted_output(&probe, &inputs, &upstream);
        p[i] -= 2.0 * FD_STEP;
        probe.set_parameters(&p).unwrap();
        let down = weighted_output(&probe, &inputs, &upstream);
        max_rel_param = max_rel_param.max(rel(*g, (up - down) / (2.0 * FD_STEP)));
    }

    let mut max_rel_input: f64 = 0.0;
    for idx in ndarray::indices(inputs.raw_dim()) {
        let mut x = inputs.clone();
        x[idx] += FD_STEP;
        let up = weighted_output(&net, &x, &upstream);
        x[idx] -= 2.0 * FD_STEP;
        let down = weighted_output(&net, &x, &upstream);
        max_rel_input = max_rel_input.max(rel(input_grad[idx], (up - down) / (2.0 * FD_STEP)));
    }
    GradCheck { max_rel_param, max_rel_input, checked: analytic.len() + inputs.len() }
}

#![allow(dead_code)]

use pid_a2c::neuralnet::Mlp;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

/// Central-difference derivative of `loss` with respect to parameter `i`.
pub fn central_difference(net: &Mlp, i: usize, loss: impl Fn(&Mlp) -> f64) -> f64 {
    let mut plus = net.clone();
    plus.params_mut()[i] += FD_STEP;
    let mut minus = net.clone();
    minus.params_mut()[i] -= FD_STEP;
    (loss(&plus) - loss(&minus)) / (2.0 * FD_STEP)
}

/// Relative error with a 1e-6 floor so that vanishing components are
/// compared absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Worst relative error over `samples` random parameters plus the last
/// (output bias) parameter.
pub fn worst_fd_error<R: Rng>(
    net: &Mlp,
    grad: &[f64],
    samples: usize,
    rng: &mut R,
    loss: impl Fn(&Mlp) -> f64,
) -> f64 {
    let n = net.params().len();
    let mut idx: Vec<usize> = (0..samples).map(|_| rng.random_range(0..n)).collect();
    idx.push(n - 1);
    idx.iter()
        .map(|&i| relative_error(grad[i], central_difference(net, i, &loss)))
        .fold(0.0, f64::max)
}

pub fn random_state<R: Rng>(rng: &mut R) -> [f64; 3] {
    [rng.random_range(-0.5..0.5), rng.random_range(0.5..0.75), 0.5]
}

/// Perturbs every parameter so that networks are not at their
/// initialization symmetry.
pub fn jitter<R: Rng>(net: &mut Mlp, scale: f64, rng: &mut R) {
    for p in net.params_mut() {
        *p += rng.random_range(-scale..scale);
    }
}

//! Random noise ensembles spanning stochastic and coherent regimes.
//!
//! Every generated channel is a composition or convex mixture of Pauli
//! channels and unitary Pauli-axis rotations, so it is completely positive
//! by construction.

use std::collections::BTreeMap;

use rand::Rng;

use super::{DenseChannel, PauliErrorChannel};
use crate::error::Result;
use crate::pauli::{sample_uniform_pauli, PauliOperator};

/// Pauli channel with `p(I) = 1 − infidelity` and the error mass spread with
/// random exponential weights over a random subset of non-identity Paulis.
pub fn random_pauli_channel<R: Rng + ?Sized>(n: usize, infidelity: f64, rng: &mut R) -> Result<PauliErrorChannel> {
    let others: Vec<PauliOperator> = PauliOperator::all(n).skip(1).collect();
    let mut weights: Vec<f64> =
        others.iter().map(|_| if rng.random_bool(0.5) { -rng.random::<f64>().max(1e-300).ln() } else { 0.0 }).collect();
    if weights.iter().all(|&w| w == 0.0) {
        let k = rng.random_range(0..weights.len());
        weights[k] = 1.0;
    }
    let total: f64 = weights.iter().sum();
    let mut probs: BTreeMap<PauliOperator, f64> =
        others.into_iter().zip(weights).filter(|(_, w)| *w > 0.0).map(|(q, w)| (q, infidelity * w / total)).collect();
    probs.insert(PauliOperator::identity(n), 1.0 - infidelity);
    Ok(PauliErrorChannel::from_raw(n, probs))
}

/// Product of `count` rotations about random non-identity Pauli axes with
/// angles uniform in `[−max_angle, max_angle]`.
pub fn random_unitary_channel<R: Rng + ?Sized>(
    n: usize,
    count: usize,
    max_angle: f64,
    rng: &mut R,
) -> Result<DenseChannel> {
    let mut acc = DenseChannel::identity(n)?;
    for _ in 0..count {
        let mut axis = sample_uniform_pauli(n, rng)?;
        while axis.is_identity() {
            axis = sample_uniform_pauli(n, rng)?;
        }
        let angle = rng.random_range(-max_angle..=max_angle);
        acc = acc.then(&DenseChannel::unitary_rotation(&axis, angle)?)?;
    }
    Ok(acc)
}

/// Mixture of two random coherent rotations followed by a random Pauli channel.
pub fn random_physical_channel<R: Rng + ?Sized>(
    n: usize,
    stochastic_infidelity: f64,
    max_angle: f64,
    rng: &mut R,
) -> Result<DenseChannel> {
    let w: f64 = rng.random();
    let u1 = random_unitary_channel(n, 2, max_angle, rng)?;
    let u2 = random_unitary_channel(n, 2, max_angle, rng)?;
    let coherent = DenseChannel::mixture(&[(w, u1), (1.0 - w, u2)])?;
    let stochastic = random_pauli_channel(n, stochastic_infidelity, rng)?.to_dense()?;
    coherent.then(&stochastic)
}

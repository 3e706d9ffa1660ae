//! Pauli-frame backend.
//!
//! The ideal circuit maps `|0…0⟩` to a stabilizer state whose computational
//! outcomes are uniform over an affine subspace of `GF(2)^N`. A Pauli error
//! `E` at the end of the circuit only shifts outcomes by its X bits, so each
//! shot samples the ideal subspace and adds the X part of the propagated
//! error frame.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::{outcome_string, NoiseModel};
use crate::channels::PauliSampler;
use crate::error::Result;
use crate::pauli::PauliOperator;
use crate::protocol::{Layer, NoiseSlot, RandomizedCircuit};

/// Samplers for every noise location.
pub struct FrameNoise {
    frame: PauliSampler,
    cycle: HashMap<String, PauliSampler>,
    basis: PauliSampler,
    prep_flip: Vec<f64>,
    meas_flip: Vec<f64>,
}

impl FrameNoise {
    pub fn new(noise: &NoiseModel, n: usize) -> Result<Self> {
        Ok(FrameNoise {
            frame: noise.frame_noise.sampler(n)?,
            cycle: noise
                .cycle_noise
                .iter()
                .map(|(k, spec)| Ok((k.clone(), spec.sampler(n)?)))
                .collect::<Result<_>>()?,
            basis: match &noise.spam.basis_noise {
                Some(spec) => spec.sampler(n)?,
                None => PauliSampler::Identity,
            },
            prep_flip: noise.spam.prep_flip.expand(n)?,
            meas_flip: noise.spam.meas_flip.expand(n)?,
        })
    }
}

/// Ideal outcome distribution of a stabilizer state: `offset ⊕ span(basis)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeSpace {
    offset: Vec<bool>,
    /// One vector per free column, zero on every other free column.
    basis: Vec<Vec<bool>>,
    free: Vec<usize>,
}

impl OutcomeSpace {
    /// Outcomes of `U|0…0⟩` for the ideal layer product `U`.
    pub fn of_layers(n: usize, layers: &[Layer]) -> Self {
        let mut stabilizers: Vec<PauliOperator> = (0..n).map(|j| PauliOperator::z_on(n, j)).collect();
        for layer in layers {
            for s in &mut stabilizers {
                *s = layer.cycle.apply_unchecked(s);
            }
        }
        Self::of_stabilizers(n, stabilizers)
    }

    /// Outcomes of the state stabilized by `n` independent commuting generators.
    pub fn of_stabilizers(n: usize, mut rows: Vec<PauliOperator>) -> Self {
        // Products of commuting Hermitian generators stay Hermitian, so signs
        // are tracked exactly by full multiplication.
        let x_rank = eliminate(&mut rows, |p, j| p.x_bit(j));
        let mut z_rows = rows.split_off(x_rank);
        let z_pivots = pivot_columns(&mut z_rows);

        let mut offset = vec![false; n];
        for (row, &c) in z_rows.iter().zip(&z_pivots) {
            offset[c] = row.sign() == Some(-1);
        }
        let free: Vec<usize> = (0..n).filter(|c| !z_pivots.contains(c)).collect();
        let basis = free
            .iter()
            .map(|&free| {
                let mut v = vec![false; n];
                v[free] = true;
                for (row, &c) in z_rows.iter().zip(&z_pivots) {
                    v[c] = row.z_bit(free);
                }
                v
            })
            .collect();
        OutcomeSpace { offset, basis, free }
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn contains(&self, z: &[bool]) -> bool {
        let mut target: Vec<bool> = z.iter().zip(&self.offset).map(|(a, b)| a ^ b).collect();
        for (v, &f) in self.basis.iter().zip(&self.free) {
            if target[f] {
                for (t, b) in target.iter_mut().zip(v) {
                    *t ^= b;
                }
            }
        }
        target.iter().all(|b| !b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        let mut z = self.offset.clone();
        for v in &self.basis {
            if rng.random::<bool>() {
                for (t, b) in z.iter_mut().zip(v) {
                    *t ^= b;
                }
            }
        }
        z
    }
}

/// Gaussian elimination over rows by Pauli multiplication on the columns
/// selected by `bit`; returns the rank, with pivot rows first.
fn eliminate(rows: &mut [PauliOperator], bit: impl Fn(&PauliOperator, usize) -> bool) -> usize {
    let n = rows.first().map_or(0, PauliOperator::num_qubits);
    let mut rank = 0;
    for col in 0..n {
        let Some(pivot) = (rank..rows.len()).find(|&r| bit(&rows[r], col)) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && bit(row, col) {
                *row = row.mul_unchecked(&pivot_row);
            }
        }
        rank += 1;
    }
    rank
}

/// Reduced row echelon form on Z bits; returns the pivot column of each row.
fn pivot_columns(rows: &mut [PauliOperator]) -> Vec<usize> {
    let rank = eliminate(rows, |p, j| p.z_bit(j));
    debug_assert_eq!(rank, rows.len(), "stabilizer generators are independent");
    rows.iter().map(|r| (0..r.num_qubits()).find(|&j| r.z_bit(j)).expect("non-identity row")).collect()
}

fn flip_bits<R: Rng + ?Sized>(probs: &[f64], rng: &mut R, mut apply: impl FnMut(usize)) {
    for (j, &p) in probs.iter().enumerate() {
        if p > 0.0 && rng.random::<f64>() < p {
            apply(j);
        }
    }
}

/// Samples outcome counts of one circuit.
pub fn sample_counts<R: Rng + ?Sized>(
    circuit: &RandomizedCircuit,
    noise: &FrameNoise,
    shots: u64,
    rng: &mut R,
) -> Result<BTreeMap<String, u64>> {
    let n = circuit.num_qubits();
    let layers = circuit.layers()?;
    let space = OutcomeSpace::of_layers(n, &layers);
    let cycle_noise = noise.cycle.get(&circuit.cycle.key()).unwrap_or(&PauliSampler::Identity);
    let samplers: Vec<&PauliSampler> = layers
        .iter()
        .map(|layer| match layer.slot {
            NoiseSlot::None => &PauliSampler::Identity,
            NoiseSlot::Frame => &noise.frame,
            NoiseSlot::Cycle => cycle_noise,
        })
        .collect();

    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let mut err = PauliOperator::identity(n);
        flip_bits(&noise.prep_flip, rng, |j| err.set_x(j, !err.x_bit(j)));
        noise.basis.sample_into(&mut err, rng);
        for (layer, sampler) in layers.iter().zip(&samplers) {
            if !layer.is_pauli && !err.is_identity() {
                err = layer.cycle.apply_bits(&err);
            }
            sampler.sample_into(&mut err, rng);
        }
        noise.basis.sample_into(&mut err, rng);
        let mut z = space.sample(rng);
        for (j, bit) in z.iter_mut().enumerate() {
            *bit ^= err.x_bit(j);
        }
        flip_bits(&noise.meas_flip, rng, |j| z[j] = !z[j]);
        *counts.entry(outcome_string(z.into_iter())).or_insert(0) += 1;
    }
    Ok(counts)
}

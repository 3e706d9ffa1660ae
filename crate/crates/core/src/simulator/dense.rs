//! Dense backend: exact evolution of the Pauli vector `r_P = tr[P ρ]`.
//!
//! Channels act through their Pauli transfer matrices, Clifford layers as
//! signed permutations, and bit flips scale the Z components they touch by
//! `1 − 2p`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::{outcome_string, NoiseModel};
use crate::channels::{ChannelSpec, MAX_DENSE_QUBITS};
use crate::clifford::CliffordCycle;
use crate::error::{CbError, Result};
use crate::pauli::PauliOperator;
use crate::protocol::{NoiseSlot, RandomizedCircuit};

/// PTM specialised by structure.
#[derive(Clone, Debug)]
pub enum PtmOp {
    Identity,
    Diagonal(DVector<f64>),
    Full(DMatrix<f64>),
}

impl PtmOp {
    pub fn from_spec(spec: &ChannelSpec, n: usize) -> Result<Self> {
        if spec.is_identity() {
            return Ok(PtmOp::Identity);
        }
        let ptm = spec.to_dense(n)?.ptm().clone();
        let dim = ptm.nrows();
        let off_diagonal = (0..dim).any(|i| (0..dim).any(|j| i != j && ptm[(i, j)] != 0.0));
        Ok(if off_diagonal { PtmOp::Full(ptm) } else { PtmOp::Diagonal(ptm.diagonal()) })
    }

    pub fn apply(&self, v: &mut DVector<f64>) {
        match self {
            PtmOp::Identity => {}
            PtmOp::Diagonal(d) => v.component_mul_assign(d),
            PtmOp::Full(m) => *v = m * &*v,
        }
    }
}

/// Noise operators for every location, for one register size.
pub struct DenseNoise {
    n: usize,
    frame: PtmOp,
    cycle: HashMap<String, PtmOp>,
    basis: PtmOp,
    prep_flip: Vec<f64>,
    meas_flip: Vec<f64>,
}

impl DenseNoise {
    pub fn new(noise: &NoiseModel, n: usize) -> Result<Self> {
        if n > MAX_DENSE_QUBITS {
            return Err(CbError::TooManyQubits { n, max: MAX_DENSE_QUBITS });
        }
        Ok(DenseNoise {
            n,
            frame: PtmOp::from_spec(&noise.frame_noise, n)?,
            cycle: noise
                .cycle_noise
                .iter()
                .map(|(k, spec)| Ok((k.clone(), PtmOp::from_spec(spec, n)?)))
                .collect::<Result<_>>()?,
            basis: match &noise.spam.basis_noise {
                Some(spec) => PtmOp::from_spec(spec, n)?,
                None => PtmOp::Identity,
            },
            prep_flip: noise.spam.prep_flip.expand(n)?,
            meas_flip: noise.spam.meas_flip.expand(n)?,
        })
    }

    fn check(&self, n: usize) -> Result<()> {
        if n == self.n {
            Ok(())
        } else {
            Err(CbError::DimensionMismatch { left: self.n, right: n })
        }
    }
}

/// Pauli index of the Z-string whose support is given by the bits of `a`,
/// qubit 0 most significant.
fn z_string_index(n: usize, a: usize) -> usize {
    (0..n).filter(|&j| a >> (n - 1 - j) & 1 == 1).map(|j| 3 << (2 * (n - 1 - j))).sum()
}

/// Pauli vector of `|0…0⟩`.
pub fn ground_state(n: usize) -> DVector<f64> {
    let mut v = DVector::zeros(1 << (2 * n));
    for a in 0..1usize << n {
        v[z_string_index(n, a)] = 1.0;
    }
    v
}

/// `G ρ G†` on a Pauli vector.
pub fn apply_clifford(g: &CliffordCycle, v: &DVector<f64>) -> DVector<f64> {
    let n = g.num_qubits();
    let mut out = DVector::zeros(v.len());
    for (i, &r) in v.iter().enumerate() {
        if r != 0.0 {
            let img = g.apply_unchecked(&PauliOperator::from_index(n, i));
            out[img.index()] += f64::from(img.sign().expect("Clifford images are Hermitian")) * r;
        }
    }
    out
}

/// Independent X flips with probabilities `probs`: every component with an
/// anticommuting factor on qubit `j` is scaled by `1 − 2 p_j`.
pub fn apply_bit_flips(n: usize, probs: &[f64], v: &mut DVector<f64>) {
    if probs.iter().all(|&p| p == 0.0) {
        return;
    }
    for (i, r) in v.iter_mut().enumerate() {
        if *r == 0.0 {
            continue;
        }
        let q = PauliOperator::from_index(n, i);
        for (j, &p) in probs.iter().enumerate() {
            if q.z_bit(j) {
                *r *= 1.0 - 2.0 * p;
            }
        }
    }
}

/// Pauli vector right before measurement.
pub fn final_state(circuit: &RandomizedCircuit, noise: &DenseNoise) -> Result<DVector<f64>> {
    let n = circuit.num_qubits();
    noise.check(n)?;
    let cycle_noise = noise.cycle.get(&circuit.cycle.key()).unwrap_or(&PtmOp::Identity);
    let mut v = ground_state(n);
    apply_bit_flips(n, &noise.prep_flip, &mut v);
    noise.basis.apply(&mut v);
    for layer in circuit.layers()? {
        v = apply_clifford(&layer.cycle, &v);
        match layer.slot {
            NoiseSlot::None => {}
            NoiseSlot::Frame => noise.frame.apply(&mut v),
            NoiseSlot::Cycle => cycle_noise.apply(&mut v),
        }
    }
    noise.basis.apply(&mut v);
    Ok(v)
}

/// Fast Walsh–Hadamard transform in place.
fn walsh_hadamard(a: &mut [f64]) {
    let mut h = 1;
    while h < a.len() {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*x + *y, *x - *y);
                *x = s;
                *y = d;
            }
        }
        h *= 2;
    }
}

/// Computational-basis distribution of a Pauli vector after measurement
/// flips, indexed with qubit 0 as the most significant bit.
pub fn outcome_probabilities(n: usize, v: &DVector<f64>, meas_flip: &[f64]) -> Vec<f64> {
    let mut v = v.clone();
    apply_bit_flips(n, meas_flip, &mut v);
    let mut z: Vec<f64> = (0..1usize << n).map(|a| v[z_string_index(n, a)]).collect();
    walsh_hadamard(&mut z);
    let scale = (1u64 << n) as f64;
    z.iter().map(|p| (p / scale).max(0.0)).collect()
}

/// Exact outcome distribution of one circuit.
pub fn circuit_probabilities(circuit: &RandomizedCircuit, noise: &DenseNoise) -> Result<Vec<f64>> {
    let v = final_state(circuit, noise)?;
    Ok(outcome_probabilities(circuit.num_qubits(), &v, &noise.meas_flip))
}

/// Draws multinomial counts by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut remaining_mass: f64 = probs.iter().sum();
    let mut remaining = shots;
    let mut out = vec![0; probs.len()];
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let c = if k + 1 == probs.len() || p >= remaining_mass {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            let q = (p / remaining_mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        out[k] = c;
        remaining -= c;
        remaining_mass -= p;
    }
    out
}

pub fn sample_counts<R: Rng + ?Sized>(
    circuit: &RandomizedCircuit,
    noise: &DenseNoise,
    shots: u64,
    rng: &mut R,
) -> Result<BTreeMap<String, u64>> {
    let n = circuit.num_qubits();
    let probs = circuit_probabilities(circuit, noise)?;
    Ok(sample_multinomial(&probs, shots, rng)
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(idx, c)| (outcome_string((0..n).map(|j| idx >> (n - 1 - j) & 1 == 1)), c))
        .collect())
}

/// Exact expectation of `f` for one circuit.
pub fn expected_overlap(circuit: &RandomizedCircuit, noise: &DenseNoise) -> Result<f64> {
    let n = circuit.num_qubits();
    let probs = circuit_probabilities(circuit, noise)?;
    let mut acc = 0.0;
    for (idx, p) in probs.iter().enumerate() {
        let z = outcome_string((0..n).map(|j| idx >> (n - 1 - j) & 1 == 1));
        acc += super::outcome_eigenvalue(&circuit.expected, &z)? * p;
    }
    Ok(acc)
}

/// SPAM scalar of the decay `E f = β Π F` for the circuit's base Pauli.
///
/// `β` is the `P` component of the prepared state times the response of the
/// measurement to `C(P)`. The measurement includes the frame noise of the
/// last round, which pairs with no cycle; when boundaries are merged that
/// noise acts after the basis change.
pub fn spam_beta(circuit: &RandomizedCircuit, noise: &DenseNoise) -> Result<f64> {
    let n = circuit.num_qubits();
    noise.check(n)?;
    let p = &circuit.pauli;
    let target = circuit.expected.unsigned();

    let mut prep = ground_state(n);
    apply_bit_flips(n, &noise.prep_flip, &mut prep);
    noise.basis.apply(&mut prep);
    prep = apply_clifford(&circuit.prep.to_cycle()?, &prep);
    let alpha = prep[p.index()];

    let mut meas = DVector::zeros(prep.len());
    meas[target.index()] = 1.0;
    let unprepare = circuit.meas.to_cycle()?.inverse();
    if circuit.merged {
        meas = apply_clifford(&unprepare, &meas);
        noise.frame.apply(&mut meas);
    } else {
        noise.frame.apply(&mut meas);
        meas = apply_clifford(&unprepare, &meas);
    }
    noise.basis.apply(&mut meas);
    apply_bit_flips(n, &noise.meas_flip, &mut meas);
    let z_target = CliffordCycle::basis_changer(&target)?.inverse().apply(&target)?;
    Ok(alpha * meas[z_target.index()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::CycleLabel;
    use crate::protocol::{generate_sequence, CbConfig};
    use crate::simulator::FlipProbabilities;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    #[test]
    fn ground_state_distribution() {
        let v = ground_state(3);
        let probs = outcome_probabilities(3, &v, &[0.0; 3]);
        assert_eq!(probs[0], 1.0);
        assert!(probs[1..].iter().all(|&x| x == 0.0));
        let flipped = outcome_probabilities(3, &v, &[0.0, 1.0, 0.25]);
        assert!((flipped[0b010] - 0.75).abs() < 1e-15);
        assert!((flipped[0b011] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bell_state_distribution() {
        // H on qubit 0 then CNOT is Clifford; build it from images.
        let h_cnot = CliffordCycle::from_images(vec![p("ZI"), p("IX")], vec![p("XX"), p("ZZ")]).unwrap();
        let v = apply_clifford(&h_cnot, &ground_state(2));
        let probs = outcome_probabilities(2, &v, &[0.0, 0.0]);
        for (k, expected) in [0.5, 0.0, 0.0, 0.5].into_iter().enumerate() {
            assert!((probs[k] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn multinomial_counts_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = sample_multinomial(&[0.1, 0.0, 0.6, 0.3], 1000, &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 1000);
        assert_eq!(c[1], 0);
        assert_eq!(sample_multinomial(&[0.0, 1.0], 7, &mut rng), vec![0, 7]);
    }

    #[test]
    fn noiseless_overlap_is_one_and_beta_is_one() {
        let cfg = CbConfig::reference_size(2, CycleLabel::ms(2), 0).unwrap();
        let g = CliffordCycle::ms(2).unwrap();
        let noise = DenseNoise::new(&NoiseModel::noiseless(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for q in PauliOperator::all(2) {
            let mut c = generate_sequence(&cfg, &g, &q, 4, 0, &mut rng).unwrap();
            assert!((expected_overlap(&c, &noise).unwrap() - 1.0).abs() < 1e-12);
            c.merged = false;
            assert!((expected_overlap(&c, &noise).unwrap() - 1.0).abs() < 1e-12);
            assert!((spam_beta(&c, &noise).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn flips_reduce_beta_by_support() {
        let cfg = CbConfig::reference_size(2, CycleLabel::identity(2), 0).unwrap();
        let g = CliffordCycle::identity(2);
        let mut model = NoiseModel::noiseless();
        model.spam.prep_flip = FlipProbabilities::Uniform(0.1);
        model.spam.meas_flip = FlipProbabilities::PerQubit(vec![0.0, 0.2]);
        let noise = DenseNoise::new(&model, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = generate_sequence(&cfg, &g, &p("XY"), 4, 0, &mut rng).unwrap();
        let beta = spam_beta(&c, &noise).unwrap();
        assert!((beta - 0.8 * 0.8 * 0.6).abs() < 1e-12);
        assert!((expected_overlap(&c, &noise).unwrap() - beta).abs() < 1e-12);
    }

    #[test]
    fn too_many_qubits() {
        assert!(matches!(DenseNoise::new(&NoiseModel::noiseless(), 7), Err(CbError::TooManyQubits { .. })));
    }
}

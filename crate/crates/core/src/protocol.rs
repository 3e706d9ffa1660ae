//! Generation of cycle benchmarking experiments.
//!
//! A randomized circuit for Pauli `P` and length `m` is
//!
//! ```text
//! B_P → R_0 → G → R_1 → G → … → G → R_m → B†_{C(P)} → measure
//! ```
//!
//! where the `R_i` are uniformly random Pauli frames and `C(P)` is the signed
//! Pauli the ideal circuit maps `P` to. By default the basis changes are merged
//! into the first and last frame rounds, so every round carries frame noise
//! exactly once.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{CliffordCycle, CycleLabel};
use crate::error::{CbError, Result};
use crate::pauli::{sample_uniform_pauli, PauliOperator};
use crate::rng::derived_rng;

fn default_true() -> bool {
    true
}

/// Experiment parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbConfig {
    pub n_qubits: usize,
    /// The cycle of interest `G`.
    pub cycle: CycleLabel,
    /// Number of sampled Paulis `K`.
    pub pauli_set_size: usize,
    /// Lengths `m`; each must satisfy `G^m = I`.
    pub sequence_lengths: Vec<usize>,
    /// Randomizations `L` per Pauli and length.
    pub randomizations_per_pauli: usize,
    pub shots_per_sequence: usize,
    pub seed: u64,
    /// Use every non-identity Pauli instead of sampling `K`.
    #[serde(default)]
    pub exhaustive_paulis: bool,
    #[serde(default = "default_true")]
    pub merge_boundaries: bool,
}

impl CbConfig {
    /// Experiment sizes used for the published register sizes 2, 4, 6, 8 and 10.
    pub fn reference_size(n_qubits: usize, cycle: CycleLabel, seed: u64) -> Result<Self> {
        let (k, lengths): (usize, &[usize]) = match n_qubits {
            2 => (15, &[4, 40]),
            4 => (255, &[4, 20]),
            6 => (43, &[4, 8, 12]),
            8 => (24, &[4, 8]),
            10 => (21, &[4, 8]),
            _ => return Err(CbError::InvalidConfig(format!("no default experiment size for {n_qubits} qubits"))),
        };
        Ok(CbConfig {
            n_qubits,
            cycle,
            pauli_set_size: k,
            sequence_lengths: lengths.to_vec(),
            randomizations_per_pauli: 10,
            shots_per_sequence: 100,
            seed,
            exhaustive_paulis: n_qubits == 4,
            merge_boundaries: true,
        })
    }

    /// The local (identity cycle) and MS experiments run together at each
    /// published register size; published circuit counts cover both together.
    pub fn reference_pair(n_qubits: usize, seed: u64) -> Result<[Self; 2]> {
        Ok([
            Self::reference_size(n_qubits, CycleLabel::identity(n_qubits), seed)?,
            Self::reference_size(n_qubits, CycleLabel::ms(n_qubits), seed)?,
        ])
    }

    /// Checks the invariants and returns the cycle of interest.
    pub fn validate(&self) -> Result<CliffordCycle> {
        if self.n_qubits == 0 {
            return Err(CbError::ZeroQubits);
        }
        if self.cycle.qubits != self.n_qubits {
            return Err(CbError::InvalidConfig(format!(
                "cycle acts on {} qubits but the register has {}",
                self.cycle.qubits, self.n_qubits
            )));
        }
        if self.pauli_set_size == 0 && !self.exhaustive_paulis {
            return Err(CbError::InvalidConfig("pauli_set_size must be at least 1".into()));
        }
        if self.randomizations_per_pauli == 0 {
            return Err(CbError::InvalidConfig("randomizations_per_pauli must be at least 1".into()));
        }
        if self.shots_per_sequence == 0 {
            return Err(CbError::InvalidConfig("shots_per_sequence must be at least 1".into()));
        }
        if self.exhaustive_paulis && self.n_qubits > 8 {
            return Err(CbError::InvalidConfig("exhaustive Pauli sets are limited to 8 qubits".into()));
        }
        let mut distinct = self.sequence_lengths.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != self.sequence_lengths.len() || distinct.len() < 2 {
            return Err(CbError::InvalidConfig(
                "sequence_lengths needs at least two distinct values and no repeats".into(),
            ));
        }
        let g = self.cycle.to_cycle()?;
        for &m in &self.sequence_lengths {
            check_length(&g, &self.cycle, m)?;
        }
        Ok(g)
    }
}

/// Rejects lengths with `G^m ≠ I`.
pub fn check_length(g: &CliffordCycle, label: &CycleLabel, m: usize) -> Result<()> {
    if m == 0 {
        return Err(CbError::InvalidLength { m, reason: "lengths must be positive".into() });
    }
    if g.power(m).is_identity() {
        return Ok(());
    }
    let reason = match g.order(64) {
        Some(k) => format!(
            "the {label} cycle composes to the identity only after multiples of {k} applications, so m must be a multiple of {k}"
        ),
        None => format!("the {label} cycle does not compose to the identity after {m} applications"),
    };
    Err(CbError::InvalidLength { m, reason })
}

/// Step 1: the Pauli set. Samples `K` uniform Paulis with replacement (identity
/// draws included), or every non-identity Pauli in exhaustive mode.
pub fn select_pauli_set<R: Rng + ?Sized>(config: &CbConfig, rng: &mut R) -> Result<Vec<PauliOperator>> {
    if config.exhaustive_paulis {
        return Ok(PauliOperator::all(config.n_qubits).skip(1).collect());
    }
    (0..config.pauli_set_size).map(|_| sample_uniform_pauli(config.n_qubits, rng)).collect()
}

/// One randomized sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedCircuit {
    pub pauli: PauliOperator,
    pub m: usize,
    pub l: usize,
    /// `R_0, …, R_m`, unsigned.
    pub frames: Vec<PauliOperator>,
    pub prep: CycleLabel,
    pub meas: CycleLabel,
    /// Signed ideal outcome `C(P)`.
    pub expected: PauliOperator,
    pub cycle: CycleLabel,
    #[serde(default = "default_true")]
    pub merged: bool,
}

/// Where a layer's noise comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseSlot {
    /// Ideal layer (unmerged basis changes).
    None,
    /// Gate-independent frame noise `A`.
    Frame,
    /// Noise of the cycle of interest.
    Cycle,
}

/// An ideal Clifford layer followed by its noise slot.
#[derive(Clone, Debug)]
pub struct Layer {
    pub cycle: CliffordCycle,
    pub slot: NoiseSlot,
    /// Pauli layers leave error frames unchanged up to sign.
    pub is_pauli: bool,
}

impl Layer {
    fn new(cycle: CliffordCycle, slot: NoiseSlot) -> Self {
        let is_pauli = cycle.is_pauli();
        Layer { cycle, slot, is_pauli }
    }
}

impl RandomizedCircuit {
    pub fn num_qubits(&self) -> usize {
        self.pauli.num_qubits()
    }

    /// Ordered layers of the physical circuit, starting after state preparation.
    pub fn layers(&self) -> Result<Vec<Layer>> {
        if self.frames.len() != self.m + 1 {
            return Err(CbError::InvalidConfig(format!("circuit with m={} has {} frames", self.m, self.frames.len())));
        }
        let g = self.cycle.to_cycle()?;
        let prep = self.prep.to_cycle()?;
        let meas_inv = self.meas.to_cycle()?.inverse();
        let frames = self.frames.iter().map(CliffordCycle::pauli_cycle).collect::<Result<Vec<_>>>()?;
        let mut layers = Vec::with_capacity(2 * self.m + 3);
        if self.merged {
            layers.push(Layer::new(frames[0].compose(&prep)?, NoiseSlot::Frame));
        } else {
            layers.push(Layer::new(prep, NoiseSlot::None));
            layers.push(Layer::new(frames[0].clone(), NoiseSlot::Frame));
        }
        for (i, frame) in frames.iter().enumerate().skip(1) {
            layers.push(Layer::new(g.clone(), NoiseSlot::Cycle));
            if self.merged && i == self.m {
                layers.push(Layer::new(meas_inv.compose(frame)?, NoiseSlot::Frame));
            } else {
                layers.push(Layer::new(frame.clone(), NoiseSlot::Frame));
            }
        }
        if !self.merged {
            layers.push(Layer::new(meas_inv, NoiseSlot::None));
        }
        Ok(layers)
    }
}

/// Step 3b: `C(P) = R_m G R_{m−1} … R_1 G R_0 (P)` by tableau conjugation.
pub fn expected_outcome(g: &CliffordCycle, frames: &[PauliOperator], p: &PauliOperator) -> Result<PauliOperator> {
    let (first, rest) =
        frames.split_first().ok_or_else(|| CbError::InvalidConfig("at least one frame is required".into()))?;
    let mut q = first.conjugate(p)?;
    for r in rest {
        q = r.conjugate(&g.apply(&q)?)?;
    }
    Ok(q)
}

/// Step 3a for a single `(P, m, l)`: samples `m + 1` frames from `rng`.
pub fn generate_sequence<R: Rng + ?Sized>(
    config: &CbConfig,
    g: &CliffordCycle,
    p: &PauliOperator,
    m: usize,
    l: usize,
    rng: &mut R,
) -> Result<RandomizedCircuit> {
    if g.num_qubits() != p.num_qubits() {
        return Err(CbError::DimensionMismatch { left: g.num_qubits(), right: p.num_qubits() });
    }
    if p.sign() != Some(1) {
        return Err(CbError::InvalidConfig(format!("base Pauli {p} must have phase +1")));
    }
    check_length(g, &config.cycle, m)?;
    let frames = (0..=m).map(|_| sample_uniform_pauli(p.num_qubits(), rng)).collect::<Result<Vec<_>>>()?;
    let expected = expected_outcome(g, &frames, p)?;
    Ok(RandomizedCircuit {
        pauli: p.clone(),
        m,
        l,
        frames,
        prep: CycleLabel::basis_change(p),
        meas: CycleLabel::basis_change(&expected),
        expected,
        cycle: config.cycle.clone(),
        merged: config.merge_boundaries,
    })
}

/// Key of the random stream owned by one sequence.
pub fn sequence_stream_key(cycle: &CycleLabel, p: &PauliOperator, m: usize, l: usize) -> String {
    format!("sequence/{cycle}/{p}/{m}/{l}")
}

/// A compiled experiment: circuits ordered by Pauli draw, length, randomization.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bundle {
    pub circuits: Vec<RandomizedCircuit>,
}

impl Bundle {
    pub fn len(&self) -> usize {
        self.circuits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circuits.is_empty()
    }
}

/// Builds all `K · |lengths| · L` circuits. Repeated draws of the same Pauli
/// continue its randomization labels, so `(P, m, l)` stays unique.
pub fn compile_bundle(config: &CbConfig) -> Result<Bundle> {
    let g = config.validate()?;
    let mut set_rng = derived_rng(config.seed, "pauli-set");
    let paulis = select_pauli_set(config, &mut set_rng)?;
    let big_l = config.randomizations_per_pauli;

    let mut seen: HashMap<PauliOperator, usize> = HashMap::new();
    let mut tasks = Vec::with_capacity(paulis.len() * config.sequence_lengths.len() * big_l);
    for p in paulis {
        let occurrence = seen.entry(p.clone()).or_insert(0);
        let offset = *occurrence * big_l;
        *occurrence += 1;
        for &m in &config.sequence_lengths {
            for l in offset..offset + big_l {
                tasks.push((p.clone(), m, l));
            }
        }
    }
    let circuits = tasks
        .into_par_iter()
        .map(|(p, m, l)| {
            let mut rng = derived_rng(config.seed, &sequence_stream_key(&config.cycle, &p, m, l));
            generate_sequence(config, &g, &p, m, l, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Bundle { circuits })
}

/// Concatenated bundles of several experiments, in the given order.
pub fn compile_experiments(configs: &[CbConfig]) -> Result<Bundle> {
    let mut circuits = Vec::new();
    for config in configs {
        circuits.extend(compile_bundle(config)?.circuits);
    }
    Ok(Bundle { circuits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    /// Always yields zero bits, forcing identity frames.
    struct ZeroRng;

    impl RngCore for ZeroRng {
        fn next_u32(&mut self) -> u32 {
            0
        }
        fn next_u64(&mut self) -> u64 {
            0
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0);
        }
    }

    fn config(n: usize, cycle: CycleLabel, lengths: &[usize]) -> CbConfig {
        CbConfig {
            n_qubits: n,
            cycle,
            pauli_set_size: 3,
            sequence_lengths: lengths.to_vec(),
            randomizations_per_pauli: 2,
            shots_per_sequence: 10,
            seed: 7,
            exhaustive_paulis: false,
            merge_boundaries: true,
        }
    }

    #[test]
    fn identity_frames_give_p_back() {
        let cfg = config(2, CycleLabel::identity(2), &[1, 2]);
        let g = CliffordCycle::identity(2);
        let c = generate_sequence(&cfg, &g, &p("XZ"), 2, 0, &mut ZeroRng).unwrap();
        assert!(c.frames.iter().all(PauliOperator::is_identity));
        assert_eq!(c.expected, p("XZ"));
        assert_eq!(c.frames.len(), 3);
    }

    #[test]
    fn ms_identity_frames_return_plus_p() {
        let g = CliffordCycle::ms(2).unwrap();
        let frames = vec![PauliOperator::identity(2); 5];
        for q in PauliOperator::all(2) {
            assert_eq!(expected_outcome(&g, &frames, &q).unwrap(), q);
        }
    }

    #[test]
    fn single_anticommuting_frame_flips_sign() {
        let g = CliffordCycle::ms(2).unwrap();
        let mut frames = vec![PauliOperator::identity(2); 5];
        frames[4] = p("XI");
        assert_eq!(expected_outcome(&g, &frames, &p("ZI")).unwrap(), p("-ZI"));
        frames[4] = p("ZI");
        assert_eq!(expected_outcome(&g, &frames, &p("ZI")).unwrap(), p("ZI"));
    }

    #[test]
    fn ms_lengths_must_be_multiples_of_four() {
        let cfg = config(2, CycleLabel::ms(2), &[4, 6]);
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("multiple of 4"), "{err}");
        assert!(config(2, CycleLabel::ms(2), &[4, 8]).validate().is_ok());
        let g = CliffordCycle::ms(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_sequence(&cfg, &g, &p("ZI"), 3, 0, &mut rng).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(config(2, CycleLabel::identity(2), &[4]).validate().is_err());
        assert!(config(2, CycleLabel::identity(2), &[4, 4]).validate().is_err());
        assert!(config(3, CycleLabel::identity(2), &[4, 8]).validate().is_err());
        let mut c = config(2, CycleLabel::identity(2), &[4, 8]);
        c.randomizations_per_pauli = 0;
        assert!(c.validate().is_err());
        assert!(config(3, CycleLabel::ms(3), &[4, 8]).validate().is_err());
    }

    #[test]
    fn unsigned_outcome_is_frame_independent() {
        let cfg = config(4, CycleLabel::ms(4), &[4, 8]);
        let g = CliffordCycle::ms(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for q in [p("ZIXY"), p("XXII"), p("YZZY")] {
            let base = generate_sequence(&cfg, &g, &q, 8, 0, &mut rng).unwrap().expected.unsigned();
            for l in 1..20 {
                let c = generate_sequence(&cfg, &g, &q, 8, l, &mut rng).unwrap();
                assert_eq!(c.expected.unsigned(), base);
                assert_eq!(c.meas, CycleLabel::basis_change(&base));
            }
        }
    }

    #[test]
    fn frame_marginals_are_uniform() {
        let cfg = config(1, CycleLabel::identity(1), &[1, 2]);
        let g = CliffordCycle::identity(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let runs = 10_000;
        let mut counts = [[0usize; 4]; 3];
        for _ in 0..runs {
            let c = generate_sequence(&cfg, &g, &p("Z"), 2, 0, &mut rng).unwrap();
            for (i, f) in c.frames.iter().enumerate() {
                counts[i][f.index()] += 1;
            }
        }
        for row in counts {
            // chi-square, 3 dof, p = 0.001 critical value 16.27
            let e = runs as f64 / 4.0;
            let chi2: f64 = row.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
            assert!(chi2 < 16.27, "{row:?}");
        }
    }

    #[test]
    fn select_pauli_set_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut cfg = config(4, CycleLabel::identity(4), &[4, 20]);
        cfg.exhaustive_paulis = true;
        let all = select_pauli_set(&cfg, &mut rng).unwrap();
        assert_eq!(all.len(), 255);
        assert!(all.iter().all(|q| !q.is_identity()));
        cfg.exhaustive_paulis = false;
        cfg.pauli_set_size = 1;
        assert_eq!(select_pauli_set(&cfg, &mut rng).unwrap().len(), 1);
    }

    #[test]
    fn bundle_sizes_follow_experiment_table() {
        let n10 = CbConfig::reference_size(10, CycleLabel::identity(10), 1).unwrap();
        assert_eq!(compile_bundle(&n10).unwrap().len(), 21 * 2 * 10);
        for (n, total) in [(10, 840), (2, 600), (6, 2580)] {
            let pair = CbConfig::reference_pair(n, 1).unwrap();
            assert_eq!(compile_experiments(&pair).unwrap().len(), total);
        }
        let mut one = config(1, CycleLabel::identity(1), &[1, 2]);
        one.pauli_set_size = 1;
        one.randomizations_per_pauli = 1;
        one.sequence_lengths = vec![2, 4];
        let b = compile_bundle(&one).unwrap();
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn bundles_are_reproducible_and_keys_unique() {
        let cfg = CbConfig { pauli_set_size: 40, ..config(1, CycleLabel::identity(1), &[1, 3]) };
        let a = compile_bundle(&cfg).unwrap();
        let b = compile_bundle(&cfg).unwrap();
        assert_eq!(a, b);
        let mut keys: Vec<_> = a.circuits.iter().map(|c| (c.pauli.clone(), c.m, c.l)).collect();
        let total = keys.len();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), total);
    }

    #[test]
    fn single_circuit_reproducible_in_isolation() {
        let cfg = config(4, CycleLabel::ms(4), &[4, 8]);
        let bundle = compile_bundle(&cfg).unwrap();
        let c = &bundle.circuits[5];
        let g = CliffordCycle::ms(4).unwrap();
        let mut rng = derived_rng(cfg.seed, &sequence_stream_key(&cfg.cycle, &c.pauli, c.m, c.l));
        let again = generate_sequence(&cfg, &g, &c.pauli, c.m, c.l, &mut rng).unwrap();
        assert_eq!(&again, c);
    }

    #[test]
    fn layer_structure() {
        let cfg = config(2, CycleLabel::ms(2), &[4, 8]);
        let g = CliffordCycle::ms(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = generate_sequence(&cfg, &g, &p("XY"), 4, 0, &mut rng).unwrap();
        let merged = c.layers().unwrap();
        assert_eq!(merged.len(), 2 * 4 + 1);
        assert_eq!(merged.iter().filter(|l| l.slot == NoiseSlot::Frame).count(), 5);
        assert_eq!(merged.iter().filter(|l| l.slot == NoiseSlot::Cycle).count(), 4);
        c.merged = false;
        let unmerged = c.layers().unwrap();
        assert_eq!(unmerged.len(), 2 * 4 + 3);
        assert_eq!(unmerged[0].slot, NoiseSlot::None);
        // Ideal circuit maps Z-strings to Z-strings: B_P, frames, G^m, B†_{C(P)}.
        for layers in [merged, unmerged] {
            let q = p("XY");
            let start = CliffordCycle::basis_changer(&q).unwrap().inverse().apply(&q).unwrap();
            assert_eq!(start, p("ZZ"));
            let mut cur = start.clone();
            for layer in &layers {
                cur = layer.cycle.apply(&cur).unwrap();
            }
            assert_eq!(cur.unsigned(), start);
            assert_eq!(cur.sign(), c.expected.sign());
        }
    }

    #[test]
    fn bundle_json_shape() {
        let cfg = config(1, CycleLabel::identity(1), &[1, 2]);
        let b = compile_bundle(&cfg).unwrap();
        let v: serde_json::Value = serde_json::to_value(&b).unwrap();
        let first = &v.as_array().unwrap()[0];
        for key in ["pauli", "m", "l", "frames", "prep", "meas", "expected"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        let back: Bundle = serde_json::from_value(v).unwrap();
        assert_eq!(back, b);
    }
}

//! Execution of compiled bundles under a noise model.
//!
//! Two backends share one noise placement. Per circuit: prep flips, basis
//! noise, then each layer followed by its slot's noise (frame noise after every
//! frame round, cycle noise after every `G`), then basis noise and measurement
//! flips.
//!
//! * [`Backend::Frame`] propagates a sampled error Pauli through the ideal
//!   Clifford circuit and samples the ideal stabilizer outcome distribution.
//!   Only stochastic noise is accepted.
//! * [`Backend::Dense`] evolves the Pauli vector `tr[P ρ]` exactly for
//!   `N ≤ 6` and samples outcomes from the final distribution.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelSpec;
use crate::clifford::CycleLabel;
use crate::error::{CbError, Result};
use crate::pauli::PauliOperator;
use crate::protocol::{Bundle, RandomizedCircuit};
use crate::rng::derived_rng;

pub mod dense;
pub mod frame;

/// Bit-flip probabilities, either shared by all qubits or listed per qubit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FlipProbabilities {
    Uniform(f64),
    PerQubit(Vec<f64>),
}

impl Default for FlipProbabilities {
    fn default() -> Self {
        FlipProbabilities::Uniform(0.0)
    }
}

impl FlipProbabilities {
    /// Per-qubit probabilities for an `n`-qubit register.
    pub fn expand(&self, n: usize) -> Result<Vec<f64>> {
        let probs = match self {
            FlipProbabilities::Uniform(p) => vec![*p; n],
            FlipProbabilities::PerQubit(v) if v.len() == n => v.clone(),
            FlipProbabilities::PerQubit(v) => return Err(CbError::DimensionMismatch { left: n, right: v.len() }),
        };
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(CbError::InvalidChannel(format!("flip probability {p} outside [0, 1]")));
        }
        Ok(probs)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            FlipProbabilities::Uniform(p) => *p == 0.0,
            FlipProbabilities::PerQubit(v) => v.iter().all(|&p| p == 0.0),
        }
    }
}

/// State-preparation and measurement errors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpamModel {
    /// `|0⟩ → |1⟩` before the circuit.
    pub prep_flip: FlipProbabilities,
    /// Classical outcome flips after measurement.
    pub meas_flip: FlipProbabilities,
    /// Applied after preparation and again before measurement.
    pub basis_noise: Option<ChannelSpec>,
}

/// Noise model file.
///
/// ```json
/// {
///   "frame_noise": {"type": "depolarizing", "p": 0.01},
///   "cycle_noise": {"ms": {"type": "unitary_rotation", "axis": "XX", "angle_rad": 0.05}},
///   "spam": {"prep_flip": 0.01, "meas_flip": [0.02, 0.03]}
/// }
/// ```
///
/// `cycle_noise` (alias `gate_noise`) is keyed by [`CycleLabel::key`];
/// missing cycles are noiseless.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Gate-independent noise `A` after every random Pauli round.
    pub frame_noise: ChannelSpec,
    /// Noise `Λ` of a cycle of interest, so that `G̃ = Λ ∘ G`.
    #[serde(alias = "gate_noise")]
    pub cycle_noise: BTreeMap<String, ChannelSpec>,
    pub spam: SpamModel,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel::default()
    }

    pub fn cycle_noise_for(&self, label: &CycleLabel) -> ChannelSpec {
        self.cycle_noise.get(&label.key()).cloned().unwrap_or_default()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.frame_noise.validate(n)?;
        for spec in self.cycle_noise.values() {
            spec.validate(n)?;
        }
        self.spam.prep_flip.expand(n)?;
        self.spam.meas_flip.expand(n)?;
        if let Some(spec) = &self.spam.basis_noise {
            spec.validate(n)?;
        }
        Ok(())
    }

    /// Whether the Pauli-frame backend can run this model.
    pub fn is_stochastic(&self) -> bool {
        self.frame_noise.is_stochastic()
            && self.cycle_noise.values().all(ChannelSpec::is_stochastic)
            && self.spam.basis_noise.as_ref().is_none_or(ChannelSpec::is_stochastic)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Frame,
    Dense,
}

impl std::str::FromStr for Backend {
    type Err = CbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frame" => Ok(Backend::Frame),
            "dense" => Ok(Backend::Dense),
            other => Err(CbError::InvalidConfig(format!("unknown backend {other:?}"))),
        }
    }
}

/// Measurement counts of one circuit. Outcome strings list qubit 0 first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub pauli: PauliOperator,
    pub m: usize,
    pub l: usize,
    pub counts: BTreeMap<String, u64>,
    pub shots: u64,
}

/// Overlap estimate `f_{P,m,l}` of one circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRecord {
    pub pauli: PauliOperator,
    pub m: usize,
    pub l: usize,
    pub shots: u64,
    pub f: f64,
    /// Cycle key; empty when the source did not record it.
    #[serde(default)]
    pub cycle: String,
}

pub(crate) fn outcome_string(bits: impl Iterator<Item = bool>) -> String {
    bits.map(|b| if b { '1' } else { '0' }).collect()
}

/// Ideal eigenvalue `λ_z` of the measured observable for outcome `z`: the sign
/// of `expected` times the parity of `z` on its support.
pub fn outcome_eigenvalue(expected: &PauliOperator, outcome: &str) -> Result<f64> {
    let n = expected.num_qubits();
    if outcome.len() != n {
        return Err(CbError::DimensionMismatch { left: n, right: outcome.len() });
    }
    let sign = expected.sign().ok_or_else(|| CbError::NonHermitian(expected.to_string()))?;
    let mut parity = false;
    for (j, c) in outcome.chars().enumerate() {
        let bit = match c {
            '0' => false,
            '1' => true,
            _ => return Err(CbError::InvalidConfig(format!("outcome {outcome:?} is not a bit string"))),
        };
        if bit && (expected.x_bit(j) || expected.z_bit(j)) {
            parity = !parity;
        }
    }
    Ok(if parity { -f64::from(sign) } else { f64::from(sign) })
}

/// `f = Σ_z λ_z counts[z] / shots`.
pub fn estimate_overlap(record: &ShotRecord, expected: &PauliOperator) -> Result<DecayRecord> {
    if record.pauli.num_qubits() != expected.num_qubits() {
        return Err(CbError::DimensionMismatch { left: record.pauli.num_qubits(), right: expected.num_qubits() });
    }
    let total: u64 = record.counts.values().sum();
    if total != record.shots || total == 0 {
        return Err(CbError::InvalidConfig(format!(
            "counts sum to {total} but the record claims {} shots",
            record.shots
        )));
    }
    let mut acc = 0.0;
    for (z, &c) in &record.counts {
        acc += outcome_eigenvalue(expected, z)? * c as f64;
    }
    Ok(DecayRecord {
        pauli: record.pauli.clone(),
        m: record.m,
        l: record.l,
        shots: record.shots,
        f: acc / record.shots as f64,
        cycle: String::new(),
    })
}

/// Noise model prepared for one backend and register size.
pub enum PreparedNoise {
    Frame(frame::FrameNoise),
    Dense(dense::DenseNoise),
}

impl PreparedNoise {
    pub fn new(noise: &NoiseModel, n: usize, backend: Backend) -> Result<Self> {
        noise.validate(n)?;
        Ok(match backend {
            Backend::Frame => PreparedNoise::Frame(frame::FrameNoise::new(noise, n)?),
            Backend::Dense => PreparedNoise::Dense(dense::DenseNoise::new(noise, n)?),
        })
    }

    pub fn run<R: Rng + ?Sized>(&self, circuit: &RandomizedCircuit, shots: u64, rng: &mut R) -> Result<ShotRecord> {
        if shots == 0 {
            return Err(CbError::InvalidConfig("shots must be at least 1".into()));
        }
        let counts = match self {
            PreparedNoise::Frame(noise) => frame::sample_counts(circuit, noise, shots, rng)?,
            PreparedNoise::Dense(noise) => dense::sample_counts(circuit, noise, shots, rng)?,
        };
        Ok(ShotRecord { pauli: circuit.pauli.clone(), m: circuit.m, l: circuit.l, counts, shots })
    }
}

/// Samples `shots` outcomes of one circuit.
pub fn run_circuit<R: Rng + ?Sized>(
    circuit: &RandomizedCircuit,
    noise: &NoiseModel,
    shots: u64,
    backend: Backend,
    rng: &mut R,
) -> Result<ShotRecord> {
    PreparedNoise::new(noise, circuit.num_qubits(), backend)?.run(circuit, shots, rng)
}

/// Key of the shot stream owned by one circuit.
pub fn shot_stream_key(circuit: &RandomizedCircuit) -> String {
    format!("shots/{}/{}/{}/{}", circuit.cycle, circuit.pauli, circuit.m, circuit.l)
}

/// Runs every circuit with its own derived stream; results keep bundle order
/// and do not depend on the thread count.
pub fn run_bundle(
    bundle: &Bundle,
    noise: &NoiseModel,
    shots: u64,
    backend: Backend,
    seed: u64,
) -> Result<Vec<DecayRecord>> {
    let mut prepared: HashMap<usize, PreparedNoise> = HashMap::new();
    for c in &bundle.circuits {
        let n = c.num_qubits();
        if let std::collections::hash_map::Entry::Vacant(e) = prepared.entry(n) {
            e.insert(PreparedNoise::new(noise, n, backend)?);
        }
    }
    bundle
        .circuits
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let run = || -> Result<DecayRecord> {
                let mut rng = derived_rng(seed, &shot_stream_key(c));
                let record = prepared[&c.num_qubits()].run(c, shots, &mut rng)?;
                let mut decay = estimate_overlap(&record, &c.expected)?;
                decay.cycle = c.cycle.key();
                Ok(decay)
            };
            run().map_err(|source| CbError::Circuit {
                context: format!("circuit {i} ({}, m={}, l={})", c.pauli, c.m, c.l),
                source: Box::new(source),
            })
        })
        .collect()
}

/// Writes records as CSV with columns `pauli, m, l, shots, f, cycle`.
pub fn write_records<W: Write>(writer: W, records: &[DecayRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records written by [`write_records`]; the `cycle` column is optional.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<DecayRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: DecayRecord = row?;
        if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&r.f) {
            return Err(CbError::MissingRecords(format!("overlap {} outside [-1, 1]", r.f)));
        }
        out.push(r);
    }
    Ok(out)
}

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DenseChannel, PauliErrorChannel};
use crate::error::{CbError, Result};
use crate::pauli::{fill_uniform, PauliOperator};

/// Declarative channel description used in noise-model files.
///
/// ```json
/// {"type": "pauli", "probs": {"XIZ": 0.01}}
/// {"type": "unitary_rotation", "axis": "XX", "angle_rad": 0.05}
/// {"type": "mixture", "components": [{"weight": 0.5, "channel": {"type": "identity"}}, ...]}
/// ```
///
/// For `pauli`, a missing identity entry takes the remaining probability mass.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChannelSpec {
    #[default]
    Identity,
    Pauli {
        probs: BTreeMap<PauliOperator, f64>,
    },
    /// Global depolarizing with total error probability `p`.
    Depolarizing {
        p: f64,
    },
    /// Independent depolarizing with error probability `p` on every qubit.
    LocalDepolarizing {
        p: f64,
    },
    /// `exp(−i θ Q / 2)` about a Pauli axis.
    UnitaryRotation {
        axis: PauliOperator,
        angle_rad: f64,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
    /// Applied in list order.
    Sequence {
        channels: Vec<ChannelSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub channel: ChannelSpec,
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(CbError::InvalidChannel(format!("probability {p} outside [0, 1]")))
    }
}

impl ChannelSpec {
    /// Whether the channel is a Pauli (stochastic) channel.
    pub fn is_stochastic(&self) -> bool {
        match self {
            ChannelSpec::UnitaryRotation { angle_rad, .. } => *angle_rad == 0.0,
            ChannelSpec::Mixture { components } => components.iter().all(|c| c.channel.is_stochastic()),
            ChannelSpec::Sequence { channels } => channels.iter().all(ChannelSpec::is_stochastic),
            _ => true,
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            ChannelSpec::Identity => true,
            ChannelSpec::Depolarizing { p } | ChannelSpec::LocalDepolarizing { p } => *p == 0.0,
            ChannelSpec::UnitaryRotation { angle_rad, .. } => *angle_rad == 0.0,
            ChannelSpec::Pauli { probs } => probs.iter().all(|(q, v)| q.is_identity() || *v == 0.0),
            ChannelSpec::Mixture { components } => components.iter().all(|c| c.channel.is_identity()),
            ChannelSpec::Sequence { channels } => channels.iter().all(ChannelSpec::is_identity),
        }
    }

    /// Checks parameters and qubit counts against an `n`-qubit register.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ChannelSpec::Identity => Ok(()),
            ChannelSpec::Depolarizing { p } | ChannelSpec::LocalDepolarizing { p } => check_probability(*p),
            ChannelSpec::Pauli { probs } => self.pauli_table(n, probs).map(|_| ()),
            ChannelSpec::UnitaryRotation { axis, angle_rad } => {
                if axis.num_qubits() != n {
                    return Err(CbError::DimensionMismatch { left: n, right: axis.num_qubits() });
                }
                if !axis.is_hermitian() {
                    return Err(CbError::NonHermitian(axis.to_string()));
                }
                if !angle_rad.is_finite() {
                    return Err(CbError::InvalidChannel("rotation angle is not finite".into()));
                }
                Ok(())
            }
            ChannelSpec::Mixture { components } => {
                if components.is_empty() {
                    return Err(CbError::InvalidChannel("empty mixture".into()));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if components.iter().any(|c| c.weight < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(CbError::InvalidChannel(format!("mixture weights sum to {total}")));
                }
                components.iter().try_for_each(|c| c.channel.validate(n))
            }
            ChannelSpec::Sequence { channels } => channels.iter().try_for_each(|c| c.validate(n)),
        }
    }

    /// Explicit `(Pauli, probability)` list including the identity.
    fn pauli_table(&self, n: usize, probs: &BTreeMap<PauliOperator, f64>) -> Result<Vec<(PauliOperator, f64)>> {
        let mut table: BTreeMap<PauliOperator, f64> = BTreeMap::new();
        for (q, &v) in probs {
            if q.num_qubits() != n {
                return Err(CbError::DimensionMismatch { left: n, right: q.num_qubits() });
            }
            check_probability(v)?;
            *table.entry(q.unsigned()).or_insert(0.0) += v;
        }
        let id = PauliOperator::identity(n);
        if !table.contains_key(&id) {
            let rest: f64 = table.values().sum();
            if rest > 1.0 + 1e-12 {
                return Err(CbError::InvalidChannel(format!("error probabilities sum to {rest}")));
            }
            table.insert(id, (1.0 - rest).max(0.0));
        }
        let total: f64 = table.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(CbError::InvalidChannel(format!("probabilities sum to {total}")));
        }
        Ok(table.into_iter().collect())
    }

    /// Pauli-transfer-matrix form; requires `n ≤ 6`.
    pub fn to_dense(&self, n: usize) -> Result<DenseChannel> {
        self.validate(n)?;
        match self {
            ChannelSpec::Identity => DenseChannel::identity(n),
            ChannelSpec::UnitaryRotation { axis, angle_rad } => DenseChannel::unitary_rotation(axis, *angle_rad),
            ChannelSpec::Mixture { components } => {
                let parts =
                    components.iter().map(|c| Ok((c.weight, c.channel.to_dense(n)?))).collect::<Result<Vec<_>>>()?;
                DenseChannel::mixture(&parts)
            }
            ChannelSpec::Sequence { channels } => {
                let mut acc = DenseChannel::identity(n)?;
                for c in channels {
                    acc = acc.then(&c.to_dense(n)?)?;
                }
                Ok(acc)
            }
            _ => self.to_pauli_channel(n)?.to_dense(),
        }
    }

    /// Explicit probability map; only for stochastic specs.
    pub fn to_pauli_channel(&self, n: usize) -> Result<PauliErrorChannel> {
        self.validate(n)?;
        if !self.is_stochastic() {
            return Err(CbError::UnsupportedNoise {
                backend: "pauli-channel",
                reason: "channel has a coherent component".into(),
            });
        }
        match self {
            ChannelSpec::Identity | ChannelSpec::UnitaryRotation { .. } => Ok(PauliErrorChannel::identity(n)),
            ChannelSpec::Pauli { probs } => {
                PauliErrorChannel::new(n, self.pauli_table(n, probs)?.into_iter().collect())
            }
            ChannelSpec::Depolarizing { p } => PauliErrorChannel::depolarizing(n, *p),
            ChannelSpec::LocalDepolarizing { p } => PauliErrorChannel::local_depolarizing(n, *p),
            ChannelSpec::Mixture { components } => {
                let mut probs = BTreeMap::new();
                for c in components {
                    for (q, v) in c.channel.to_pauli_channel(n)?.probs() {
                        *probs.entry(q.clone()).or_insert(0.0) += c.weight * v;
                    }
                }
                Ok(PauliErrorChannel::from_raw(n, probs))
            }
            ChannelSpec::Sequence { channels } => {
                let mut acc = PauliErrorChannel::identity(n);
                for c in channels {
                    acc = acc.then(&c.to_pauli_channel(n)?)?;
                }
                Ok(acc)
            }
        }
    }

    /// Sampler of error Paulis for frame propagation; only for stochastic specs.
    pub fn sampler(&self, n: usize) -> Result<PauliSampler> {
        self.validate(n)?;
        if !self.is_stochastic() {
            return Err(CbError::UnsupportedNoise {
                backend: "frame",
                reason: "coherent rotations need the dense backend".into(),
            });
        }
        if self.is_identity() {
            return Ok(PauliSampler::Identity);
        }
        Ok(match self {
            ChannelSpec::Identity | ChannelSpec::UnitaryRotation { .. } => PauliSampler::Identity,
            ChannelSpec::Depolarizing { p } => PauliSampler::Depolarizing { n, p: *p },
            ChannelSpec::LocalDepolarizing { p } => PauliSampler::LocalDepolarizing { n, p: *p },
            ChannelSpec::Pauli { probs } => {
                let mut cumulative = Vec::new();
                let mut paulis = Vec::new();
                let mut acc = 0.0;
                for (q, v) in self.pauli_table(n, probs)? {
                    if q.is_identity() || v == 0.0 {
                        continue;
                    }
                    acc += v;
                    cumulative.push(acc);
                    paulis.push(q);
                }
                PauliSampler::Table { cumulative, paulis }
            }
            ChannelSpec::Mixture { components } => {
                let mut cumulative = Vec::new();
                let mut parts = Vec::new();
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight;
                    cumulative.push(acc);
                    parts.push(c.channel.sampler(n)?);
                }
                PauliSampler::Mixture { cumulative, parts }
            }
            ChannelSpec::Sequence { channels } => {
                PauliSampler::Sequence(channels.iter().map(|c| c.sampler(n)).collect::<Result<_>>()?)
            }
        })
    }
}

/// Draws error Paulis from a stochastic channel.
#[derive(Clone, Debug)]
pub enum PauliSampler {
    Identity,
    /// Non-identity Paulis with cumulative probabilities; the rest is the identity.
    Table {
        cumulative: Vec<f64>,
        paulis: Vec<PauliOperator>,
    },
    Depolarizing {
        n: usize,
        p: f64,
    },
    LocalDepolarizing {
        n: usize,
        p: f64,
    },
    Mixture {
        cumulative: Vec<f64>,
        parts: Vec<PauliSampler>,
    },
    Sequence(Vec<PauliSampler>),
}

impl PauliSampler {
    pub fn is_identity(&self) -> bool {
        matches!(self, PauliSampler::Identity)
    }

    /// Multiplies a sampled error into `frame`, ignoring phases.
    pub fn sample_into<R: Rng + ?Sized>(&self, frame: &mut PauliOperator, rng: &mut R) {
        match self {
            PauliSampler::Identity => {}
            PauliSampler::Table { cumulative, paulis } => {
                let u: f64 = rng.random();
                let k = cumulative.partition_point(|&c| c <= u);
                if k < paulis.len() {
                    frame.mul_bits_assign(&paulis[k]);
                }
            }
            PauliSampler::Depolarizing { n, p } => {
                if rng.random::<f64>() < *p {
                    let mut e = PauliOperator::identity(*n);
                    while e.is_identity() {
                        fill_uniform(&mut e, rng);
                    }
                    frame.mul_bits_assign(&e);
                }
            }
            PauliSampler::LocalDepolarizing { n, p } => {
                for j in 0..*n {
                    if rng.random::<f64>() < *p {
                        match rng.random_range(0..3) {
                            0 => frame.set_x(j, !frame.x_bit(j)),
                            1 => frame.set_z(j, !frame.z_bit(j)),
                            _ => {
                                frame.set_x(j, !frame.x_bit(j));
                                frame.set_z(j, !frame.z_bit(j));
                            }
                        }
                    }
                }
            }
            PauliSampler::Mixture { cumulative, parts } => {
                let u: f64 = rng.random();
                let k = cumulative.partition_point(|&c| c <= u).min(parts.len() - 1);
                parts[k].sample_into(frame, rng);
            }
            PauliSampler::Sequence(parts) => {
                for part in parts {
                    part.sample_into(frame, rng);
                }
            }
        }
    }
}

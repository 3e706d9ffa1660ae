//! Signed N-qubit Pauli operators in the symplectic bit representation.
//!
//! An operator is stored as a pair of packed bit vectors `(x, z)` and a phase
//! exponent `k`, denoting the matrix
//!
//! ```text
//! i^k · ⊗_j  i^(x_j z_j) X^(x_j) Z^(z_j)
//! ```
//!
//! With this convention `Y = (x=1, z=1, k=0)`, so every Hermitian Pauli carries
//! phase `k ∈ {0, 2}` (sign `±1`). Qubit `j` lives in word `j / 64`, bit `j % 64`.
//! The text form lists qubit 0 first, e.g. `"-XIZY"`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CbError, Result};

const WORD: usize = 64;

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD)
}

fn popcount(words: impl Iterator<Item = u64>) -> u32 {
    words.map(u64::count_ones).sum()
}

/// A signed N-qubit Pauli operator `i^k X^x Z^z` (see module docs for the convention).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliOperator {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

/// A Pauli together with its number of non-identity tensor factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PauliWeightProfile {
    pub pauli: PauliOperator,
    pub weight: usize,
}

impl PauliOperator {
    /// The identity on `n` qubits.
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliOperator { n, x: vec![0; w], z: vec![0; w], phase: 0 }
    }

    /// Builds an operator from per-qubit bits; `phase` is the exponent of `i`.
    pub fn from_bits(x: &[bool], z: &[bool], phase: u8) -> Result<Self> {
        if x.len() != z.len() {
            return Err(CbError::DimensionMismatch { left: x.len(), right: z.len() });
        }
        if x.is_empty() {
            return Err(CbError::ZeroQubits);
        }
        let mut p = PauliOperator::identity(x.len());
        for j in 0..x.len() {
            p.set_x(j, x[j]);
            p.set_z(j, z[j]);
        }
        p.phase = phase % 4;
        Ok(p)
    }

    /// Single-qubit `X` on `qubit`.
    pub fn x_on(n: usize, qubit: usize) -> Self {
        let mut p = PauliOperator::identity(n);
        p.set_x(qubit, true);
        p
    }

    /// Single-qubit `Z` on `qubit`.
    pub fn z_on(n: usize, qubit: usize) -> Self {
        let mut p = PauliOperator::identity(n);
        p.set_z(qubit, true);
        p
    }

    /// `X` on every qubit.
    pub fn all_x(n: usize) -> Self {
        let mut p = PauliOperator::identity(n);
        for j in 0..n {
            p.set_x(j, true);
        }
        p
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Exponent `k` of the global phase `i^k`.
    pub fn phase_exponent(&self) -> u8 {
        self.phase
    }

    pub fn x_bit(&self, qubit: usize) -> bool {
        (self.x[qubit / WORD] >> (qubit % WORD)) & 1 == 1
    }

    pub fn z_bit(&self, qubit: usize) -> bool {
        (self.z[qubit / WORD] >> (qubit % WORD)) & 1 == 1
    }

    pub fn set_x(&mut self, qubit: usize, value: bool) {
        assert!(qubit < self.n, "qubit {qubit} out of range for {} qubits", self.n);
        let mask = 1u64 << (qubit % WORD);
        if value {
            self.x[qubit / WORD] |= mask;
        } else {
            self.x[qubit / WORD] &= !mask;
        }
    }

    pub fn set_z(&mut self, qubit: usize, value: bool) {
        assert!(qubit < self.n, "qubit {qubit} out of range for {} qubits", self.n);
        let mask = 1u64 << (qubit % WORD);
        if value {
            self.z[qubit / WORD] |= mask;
        } else {
            self.z[qubit / WORD] &= !mask;
        }
    }

    /// Packed X components.
    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    /// Packed Z components.
    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    /// Single-qubit factor on `qubit` as one of `I`, `X`, `Y`, `Z`.
    pub fn factor(&self, qubit: usize) -> char {
        match (self.x_bit(qubit), self.z_bit(qubit)) {
            (false, false) => 'I',
            (true, false) => 'X',
            (true, true) => 'Y',
            (false, true) => 'Z',
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_multiple_of(2)
    }

    /// `+1` or `-1` for Hermitian operators, `None` for phases `±i`.
    pub fn sign(&self) -> Option<i8> {
        match self.phase {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    /// Same bits with phase `+1`.
    pub fn unsigned(&self) -> Self {
        PauliOperator { phase: 0, ..self.clone() }
    }

    pub fn negated(&self) -> Self {
        PauliOperator { phase: (self.phase + 2) % 4, ..self.clone() }
    }

    pub fn with_phase(&self, phase: u8) -> Self {
        PauliOperator { phase: phase % 4, ..self.clone() }
    }

    /// Whether the bits are all zero (any phase).
    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(self.z.iter()).all(|&w| w == 0)
    }

    /// Number of non-identity tensor factors.
    pub fn weight(&self) -> usize {
        popcount(self.x.iter().zip(&self.z).map(|(a, b)| a | b)) as usize
    }

    pub fn weight_profile(&self) -> PauliWeightProfile {
        PauliWeightProfile { pauli: self.clone(), weight: self.weight() }
    }

    /// Qubits on which the operator acts non-trivially, as packed words.
    pub fn support_words(&self) -> Vec<u64> {
        self.x.iter().zip(&self.z).map(|(a, b)| a | b).collect()
    }

    fn check_dims(&self, other: &PauliOperator) -> Result<()> {
        if self.n != other.n {
            return Err(CbError::DimensionMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }

    /// Exact matrix product `self · other`, including the phase.
    pub fn multiply(&self, other: &PauliOperator) -> Result<PauliOperator> {
        self.check_dims(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &PauliOperator) -> PauliOperator {
        // Per factor: i^(x1 z1) X^x1 Z^z1 · i^(x2 z2) X^x2 Z^z2
        //           = i^(x1 z1 + x2 z2 + 2 z1 x2 - x3 z3) · i^(x3 z3) X^x3 Z^z3.
        let mut x = Vec::with_capacity(self.x.len());
        let mut z = Vec::with_capacity(self.z.len());
        let mut exponent: i64 = i64::from(self.phase) + i64::from(other.phase);
        for w in 0..self.x.len() {
            let (x1, z1, x2, z2) = (self.x[w], self.z[w], other.x[w], other.z[w]);
            let (x3, z3) = (x1 ^ x2, z1 ^ z2);
            exponent += i64::from((x1 & z1).count_ones()) + i64::from((x2 & z2).count_ones());
            exponent += 2 * i64::from((z1 & x2).count_ones());
            exponent -= i64::from((x3 & z3).count_ones());
            x.push(x3);
            z.push(z3);
        }
        PauliOperator { n: self.n, x, z, phase: exponent.rem_euclid(4) as u8 }
    }

    /// In-place product of bits only, ignoring phases. Used by frame propagation.
    pub(crate) fn mul_bits_assign(&mut self, other: &PauliOperator) {
        for w in 0..self.x.len() {
            self.x[w] ^= other.x[w];
            self.z[w] ^= other.z[w];
        }
    }

    /// Whether the two operators commute.
    pub fn commutes_with(&self, other: &PauliOperator) -> Result<bool> {
        self.check_dims(other)?;
        Ok(self.symplectic_product(other) == 0)
    }

    /// `x_p·z_q + x_q·z_p mod 2`.
    pub(crate) fn symplectic_product(&self, other: &PauliOperator) -> u32 {
        let c = popcount((0..self.x.len()).map(|w| (self.x[w] & other.z[w]) ^ (other.x[w] & self.z[w])));
        c & 1
    }

    /// `+1` if the operators commute, `-1` otherwise.
    pub fn eta(&self, other: &PauliOperator) -> Result<i8> {
        Ok(if self.commutes_with(other)? { 1 } else { -1 })
    }

    /// Conjugation `R Q R†` of `q` by `self`; `self` must be Hermitian.
    pub fn conjugate(&self, q: &PauliOperator) -> Result<PauliOperator> {
        self.check_dims(q)?;
        if !self.is_hermitian() {
            return Err(CbError::NonHermitian(self.to_string()));
        }
        Ok(if self.symplectic_product(q) == 0 { q.clone() } else { q.negated() })
    }

    /// Index in `[0, 4^n)` of the unsigned operator. Qubit 0 is the most
    /// significant base-4 digit with digits `I=0, X=1, Y=2, Z=3`.
    pub fn index(&self) -> usize {
        assert!(self.n <= 31, "index only defined for up to 31 qubits");
        (0..self.n).fold(0usize, |acc, j| {
            let d = match self.factor(j) {
                'I' => 0,
                'X' => 1,
                'Y' => 2,
                _ => 3,
            };
            acc * 4 + d
        })
    }

    /// Inverse of [`PauliOperator::index`].
    pub fn from_index(n: usize, index: usize) -> Self {
        let mut p = PauliOperator::identity(n);
        let mut rest = index;
        for j in (0..n).rev() {
            let (xb, zb) = match rest % 4 {
                0 => (false, false),
                1 => (true, false),
                2 => (true, true),
                _ => (false, true),
            };
            p.set_x(j, xb);
            p.set_z(j, zb);
            rest /= 4;
        }
        p
    }

    /// All `4^n` unsigned Paulis in index order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliOperator> {
        (0..1usize << (2 * n)).map(move |i| PauliOperator::from_index(n, i))
    }

    /// Dense `2^n × 2^n` matrix; basis states use qubit 0 as the most significant bit.
    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let dim = 1usize << self.n;
        let bits_to_index = |words: &[u64]| -> usize {
            (0..self.n)
                .fold(0usize, |acc, j| acc | ((((words[j / WORD] >> (j % WORD)) & 1) as usize) << (self.n - 1 - j)))
        };
        let xi = bits_to_index(&self.x);
        let zi = bits_to_index(&self.z);
        let k = (u32::from(self.phase) + (xi & zi).count_ones()) % 4;
        let base =
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)]
                [k as usize];
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        for b in 0..dim {
            let s = if (zi & b).count_ones() % 2 == 1 { -base } else { base };
            m[(b ^ xi, b)] = s;
        }
        m
    }
}

/// Exact product `p · q`.
pub fn multiply(p: &PauliOperator, q: &PauliOperator) -> Result<PauliOperator> {
    p.multiply(q)
}

/// `+1` if `q` and `p` commute, `-1` otherwise.
pub fn eta(q: &PauliOperator, p: &PauliOperator) -> Result<i8> {
    q.eta(p)
}

/// `r q r†`, which is `eta(r, q) · q`.
pub fn conjugate_by_pauli(r: &PauliOperator, q: &PauliOperator) -> Result<PauliOperator> {
    r.conjugate(q)
}

/// Uniformly random unsigned Pauli on `n` qubits.
pub fn sample_uniform_pauli<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PauliOperator> {
    if n == 0 {
        return Err(CbError::ZeroQubits);
    }
    let mut p = PauliOperator::identity(n);
    fill_uniform(&mut p, rng);
    Ok(p)
}

pub(crate) fn fill_uniform<R: Rng + ?Sized>(p: &mut PauliOperator, rng: &mut R) {
    let words = p.x.len();
    for w in 0..words {
        let bits_here = (p.n - w * WORD).min(WORD);
        let mask = if bits_here == WORD { u64::MAX } else { (1u64 << bits_here) - 1 };
        p.x[w] = rng.random::<u64>() & mask;
        p.z[w] = rng.random::<u64>() & mask;
    }
    p.phase = 0;
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for j in 0..self.n {
            write!(f, "{}", self.factor(j))?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliOperator({self})")
    }
}

impl FromStr for PauliOperator {
    type Err = CbError;

    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| CbError::ParsePauli { input: s.to_string(), reason: reason.into() };
        let (phase, body) = if let Some(rest) = s.strip_prefix("+i").or_else(|| s.strip_prefix('i')) {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else {
            (0, s)
        };
        if body.is_empty() {
            return Err(err("no tensor factors"));
        }
        let n = body.chars().count();
        let mut p = PauliOperator::identity(n);
        for (j, c) in body.chars().enumerate() {
            let (xb, zb) = match c {
                'I' => (false, false),
                'X' => (true, false),
                'Y' => (true, true),
                'Z' => (false, true),
                _ => return Err(err(&format!("unexpected character {c:?}"))),
            };
            p.set_x(j, xb);
            p.set_z(j, zb);
        }
        p.phase = phase;
        Ok(p)
    }
}

impl Serialize for PauliOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

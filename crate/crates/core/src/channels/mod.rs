//! Noise-channel algebra: stochastic Pauli channels, dense Pauli-transfer-matrix
//! channels for small registers, twirling and the fidelity functionals used as
//! analytic oracles.
//!
//! Dense channels are stored as real `4^N × 4^N` Pauli transfer matrices in the
//! normalized Pauli basis, `R[i][j] = 2^{-N} tr[P_i Λ(P_j)]`, indexed with
//! [`PauliOperator::index`]. Composition of PTMs follows matrix order, so the
//! PTM of "first `A`, then `B`" is `R_B · R_A`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::clifford::CliffordCycle;
use crate::error::{CbError, Result};
use crate::pauli::PauliOperator;

pub mod random;
mod spec;

pub use spec::{ChannelSpec, MixtureComponent, PauliSampler};

/// Largest register supported by [`DenseChannel`].
pub const MAX_DENSE_QUBITS: usize = 6;

const SUM_TOLERANCE: f64 = 1e-12;

/// Common read-only interface of Pauli and dense channels.
pub trait Channel {
    fn num_qubits(&self) -> usize;

    /// `F_P(Λ, I) = 2^{-N} tr[P Λ(P)]` for an unsigned Pauli `p`.
    fn pauli_fidelity(&self, p: &PauliOperator) -> Result<f64>;

    /// `F(Λ, I) = 4^{-N} Σ_P F_P`.
    fn process_fidelity(&self) -> f64;
}

/// Stochastic Pauli channel `ρ ↦ Σ_Q p(Q) Q ρ Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliErrorChannel {
    n: usize,
    probs: BTreeMap<PauliOperator, f64>,
}

impl PauliErrorChannel {
    /// Validated constructor: keys unsigned on `n` qubits, probabilities
    /// non-negative and summing to one.
    pub fn new(n: usize, probs: BTreeMap<PauliOperator, f64>) -> Result<Self> {
        if n == 0 {
            return Err(CbError::ZeroQubits);
        }
        let mut clean = BTreeMap::new();
        for (q, p) in probs {
            if q.num_qubits() != n {
                return Err(CbError::DimensionMismatch { left: n, right: q.num_qubits() });
            }
            if p.is_nan() || p < 0.0 {
                return Err(CbError::InvalidChannel(format!("probability of {q} is {p}")));
            }
            *clean.entry(q.unsigned()).or_insert(0.0) += p;
        }
        let total: f64 = clean.values().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE * (1.0 + clean.len() as f64).sqrt() {
            return Err(CbError::InvalidChannel(format!("probabilities sum to {total}")));
        }
        Ok(PauliErrorChannel { n, probs: clean })
    }

    /// Bypasses validation; used for twirls of non-physical inputs.
    pub(crate) fn from_raw(n: usize, probs: BTreeMap<PauliOperator, f64>) -> Self {
        PauliErrorChannel { n, probs }
    }

    pub fn identity(n: usize) -> Self {
        let mut probs = BTreeMap::new();
        probs.insert(PauliOperator::identity(n), 1.0);
        PauliErrorChannel { n, probs }
    }

    /// Global depolarizing: identity with weight `1 − p`, the remaining mass
    /// spread uniformly over the `4^n − 1` non-identity Paulis.
    pub fn depolarizing(n: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(CbError::InvalidChannel(format!("depolarizing probability {p}")));
        }
        if n > 10 {
            return Err(CbError::TooManyQubits { n, max: 10 });
        }
        let others = (1usize << (2 * n)) - 1;
        let probs = PauliOperator::all(n)
            .map(|q| {
                let w = if q.is_identity() { 1.0 - p } else { p / others as f64 };
                (q, w)
            })
            .collect();
        Ok(PauliErrorChannel { n, probs })
    }

    /// Independent single-qubit depolarizing with error probability `p` per qubit.
    pub fn local_depolarizing(n: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(CbError::InvalidChannel(format!("depolarizing probability {p}")));
        }
        if n > 10 {
            return Err(CbError::TooManyQubits { n, max: 10 });
        }
        let probs = PauliOperator::all(n)
            .map(|q| {
                let w = q.weight() as i32;
                let v = (p / 3.0).powi(w) * (1.0 - p).powi(n as i32 - w);
                (q, v)
            })
            .collect();
        Ok(PauliErrorChannel { n, probs })
    }

    pub fn probs(&self) -> &BTreeMap<PauliOperator, f64> {
        &self.probs
    }

    pub fn prob(&self, q: &PauliOperator) -> f64 {
        self.probs.get(&q.unsigned()).copied().unwrap_or(0.0)
    }

    /// Entries below `-tolerance`, which signal a non-CP source channel.
    pub fn negative_entries(&self, tolerance: f64) -> Vec<(PauliOperator, f64)> {
        self.probs.iter().filter(|(_, &v)| v < -tolerance).map(|(q, &v)| (q.clone(), v)).collect()
    }

    /// "First `self`, then `other`". Error Paulis multiply, so the distribution convolves.
    pub fn then(&self, other: &PauliErrorChannel) -> Result<PauliErrorChannel> {
        if self.n != other.n {
            return Err(CbError::DimensionMismatch { left: self.n, right: other.n });
        }
        let mut probs = BTreeMap::new();
        for (a, pa) in &self.probs {
            for (b, pb) in &other.probs {
                *probs.entry(b.mul_unchecked(a).unsigned()).or_insert(0.0) += pa * pb;
            }
        }
        Ok(PauliErrorChannel { n: self.n, probs })
    }

    /// Diagonal PTM.
    pub fn to_dense(&self) -> Result<DenseChannel> {
        check_dense(self.n)?;
        let dim = 1usize << (2 * self.n);
        let mut p = DVector::zeros(dim);
        for (q, v) in &self.probs {
            p[q.index()] += v;
        }
        let fid = symplectic_transform(self.n, &p);
        Ok(DenseChannel { n: self.n, ptm: DMatrix::from_diagonal(&fid) })
    }
}

impl Channel for PauliErrorChannel {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn pauli_fidelity(&self, p: &PauliOperator) -> Result<f64> {
        if p.num_qubits() != self.n {
            return Err(CbError::DimensionMismatch { left: self.n, right: p.num_qubits() });
        }
        Ok(self.probs.iter().map(|(q, v)| if q.symplectic_product(p) == 0 { *v } else { -v }).sum())
    }

    fn process_fidelity(&self) -> f64 {
        self.prob(&PauliOperator::identity(self.n))
    }
}

/// `v ↦ (Σ_P η(Q, P) v_P)_Q`, factorized qubit by qubit.
fn symplectic_transform(n: usize, v: &DVector<f64>) -> DVector<f64> {
    // Rows/cols I, X, Y, Z: +1 when the single-qubit factors commute.
    const H: [[f64; 4]; 4] =
        [[1.0, 1.0, 1.0, 1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
    let mut out = v.clone();
    let dim = out.len();
    let mut stride = 1;
    for _ in 0..n {
        let block = stride * 4;
        for start in (0..dim).step_by(block) {
            for off in 0..stride {
                let idx = |d: usize| start + off + d * stride;
                let vals = [out[idx(0)], out[idx(1)], out[idx(2)], out[idx(3)]];
                for (q, row) in H.iter().enumerate() {
                    out[idx(q)] = row.iter().zip(&vals).map(|(h, x)| h * x).sum();
                }
            }
        }
        stride = block;
    }
    out
}

fn check_dense(n: usize) -> Result<()> {
    if n == 0 {
        return Err(CbError::ZeroQubits);
    }
    if n > MAX_DENSE_QUBITS {
        return Err(CbError::TooManyQubits { n, max: MAX_DENSE_QUBITS });
    }
    Ok(())
}

/// General channel on up to [`MAX_DENSE_QUBITS`] qubits as a Pauli transfer matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseChannel {
    n: usize,
    ptm: DMatrix<f64>,
}

impl DenseChannel {
    pub fn identity(n: usize) -> Result<Self> {
        check_dense(n)?;
        Ok(DenseChannel { n, ptm: DMatrix::identity(1 << (2 * n), 1 << (2 * n)) })
    }

    /// Wraps a PTM after checking its shape and trace preservation.
    pub fn from_ptm(n: usize, ptm: DMatrix<f64>) -> Result<Self> {
        check_dense(n)?;
        let dim = 1usize << (2 * n);
        if ptm.nrows() != dim || ptm.ncols() != dim {
            return Err(CbError::InvalidChannel(format!(
                "PTM is {}x{}, expected {dim}x{dim}",
                ptm.nrows(),
                ptm.ncols()
            )));
        }
        for j in 0..dim {
            let expected = if j == 0 { 1.0 } else { 0.0 };
            if (ptm[(0, j)] - expected).abs() > 1e-9 {
                return Err(CbError::InvalidChannel("PTM is not trace preserving".into()));
            }
        }
        Ok(DenseChannel { n, ptm })
    }

    /// Ideal conjugation by a Clifford cycle: a signed permutation matrix.
    pub fn from_clifford(g: &CliffordCycle) -> Result<Self> {
        let n = g.num_qubits();
        check_dense(n)?;
        let dim = 1usize << (2 * n);
        let mut ptm = DMatrix::zeros(dim, dim);
        for (j, p) in PauliOperator::all(n).enumerate() {
            let img = g.apply_unchecked(&p);
            ptm[(img.index(), j)] = f64::from(img.sign().expect("Clifford images are Hermitian"));
        }
        Ok(DenseChannel { n, ptm })
    }

    /// `ρ ↦ U ρ U†` with `U = exp(−i θ Q / 2)` for a Hermitian Pauli axis `Q`.
    pub fn unitary_rotation(axis: &PauliOperator, angle_rad: f64) -> Result<Self> {
        let n = axis.num_qubits();
        check_dense(n)?;
        if !axis.is_hermitian() {
            return Err(CbError::NonHermitian(axis.to_string()));
        }
        let dim = 1usize << (2 * n);
        let (c, s) = (angle_rad.cos(), angle_rad.sin());
        let mut ptm = DMatrix::zeros(dim, dim);
        for (j, p) in PauliOperator::all(n).enumerate() {
            if p.symplectic_product(axis) == 0 {
                ptm[(j, j)] = 1.0;
            } else {
                // U P U† = cos θ · P + sin θ · (i P Q)
                let ipq = p.mul_unchecked(axis);
                let ipq = ipq.with_phase(ipq.phase_exponent() + 1);
                ptm[(j, j)] = c;
                ptm[(ipq.index(), j)] += s * f64::from(ipq.sign().expect("Hermitian"));
            }
        }
        Ok(DenseChannel { n, ptm })
    }

    /// Channel with Kraus operators `K_k` given as dense `2^n × 2^n` matrices.
    pub fn from_kraus(n: usize, kraus: &[DMatrix<Complex64>]) -> Result<Self> {
        check_dense(n)?;
        let d = 1usize << n;
        let dim = d * d;
        let paulis: Vec<_> = PauliOperator::all(n).map(|p| p.to_dense()).collect();
        let mut ptm = DMatrix::zeros(dim, dim);
        for k in kraus {
            if k.nrows() != d || k.ncols() != d {
                return Err(CbError::InvalidChannel("Kraus operator has the wrong shape".into()));
            }
            let kd = k.adjoint();
            for (j, pj) in paulis.iter().enumerate() {
                let out = k * pj * &kd;
                for (i, pi) in paulis.iter().enumerate() {
                    ptm[(i, j)] += (pi * &out).trace().re / d as f64;
                }
            }
        }
        DenseChannel::from_ptm(n, ptm)
    }

    /// Convex combination `Σ w_k Λ_k`; weights must be non-negative and sum to one.
    pub fn mixture(components: &[(f64, DenseChannel)]) -> Result<Self> {
        let first = components.first().ok_or_else(|| CbError::InvalidChannel("empty mixture".into()))?;
        let n = first.1.n;
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if components.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(CbError::InvalidChannel(format!("mixture weights sum to {total}")));
        }
        let mut ptm = DMatrix::zeros(first.1.ptm.nrows(), first.1.ptm.ncols());
        for (w, ch) in components {
            if ch.n != n {
                return Err(CbError::DimensionMismatch { left: n, right: ch.n });
            }
            ptm += &ch.ptm * *w;
        }
        Ok(DenseChannel { n, ptm })
    }

    pub fn ptm(&self) -> &DMatrix<f64> {
        &self.ptm
    }

    /// "First `self`, then `next`".
    pub fn then(&self, next: &DenseChannel) -> Result<DenseChannel> {
        if self.n != next.n {
            return Err(CbError::DimensionMismatch { left: self.n, right: next.n });
        }
        Ok(DenseChannel { n: self.n, ptm: &next.ptm * &self.ptm })
    }

    /// Hilbert–Schmidt adjoint; the inverse for unitary channels.
    pub fn adjoint(&self) -> DenseChannel {
        DenseChannel { n: self.n, ptm: self.ptm.transpose() }
    }

    /// Eigenvalues of the Choi matrix `2^{-N} Σ_ij R_ij P_j^T ⊗ P_i` (trace one).
    pub fn choi_eigenvalues(&self) -> Vec<f64> {
        let d = 1usize << self.n;
        let dim = d * d;
        let mut choi = DMatrix::<Complex64>::zeros(dim, dim);
        let paulis: Vec<_> = PauliOperator::all(self.n).map(|p| p.to_dense()).collect();
        for j in 0..dim {
            let pjt = paulis[j].transpose();
            for i in 0..dim {
                let r = self.ptm[(i, j)];
                if r == 0.0 {
                    continue;
                }
                let scale = r / dim as f64;
                for a1 in 0..d {
                    for a2 in 0..d {
                        let va = pjt[(a1, a2)];
                        if va == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for b1 in 0..d {
                            for b2 in 0..d {
                                let vb = paulis[i][(b1, b2)];
                                if vb != Complex64::new(0.0, 0.0) {
                                    choi[(a1 * d + b1, a2 * d + b2)] += va * vb * scale;
                                }
                            }
                        }
                    }
                }
            }
        }
        choi.symmetric_eigenvalues().iter().copied().collect()
    }

    /// Complete positivity via the Choi spectrum.
    pub fn is_completely_positive(&self, tolerance: f64) -> bool {
        self.choi_eigenvalues().iter().all(|&e| e >= -tolerance)
    }
}

impl Channel for DenseChannel {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn pauli_fidelity(&self, p: &PauliOperator) -> Result<f64> {
        if p.num_qubits() != self.n {
            return Err(CbError::DimensionMismatch { left: self.n, right: p.num_qubits() });
        }
        let i = p.index();
        Ok(self.ptm[(i, i)])
    }

    fn process_fidelity(&self) -> f64 {
        self.ptm.trace() / self.ptm.nrows() as f64
    }
}

/// `F_P` of either channel type; see [`Channel::pauli_fidelity`].
pub fn pauli_fidelity<C: Channel + ?Sized>(ch: &C, p: &PauliOperator) -> Result<f64> {
    ch.pauli_fidelity(p)
}

pub fn process_fidelity<C: Channel + ?Sized>(ch: &C) -> f64 {
    ch.process_fidelity()
}

/// Pauli twirl of a dense channel, with any negative probabilities it produced.
#[derive(Clone, Debug)]
pub struct Twirled {
    pub channel: PauliErrorChannel,
    /// Probabilities below `-1e-9`; non-empty only for non-CP inputs.
    pub negative: Vec<(PauliOperator, f64)>,
}

impl Twirled {
    pub fn is_physical(&self) -> bool {
        self.negative.is_empty()
    }
}

/// Pauli twirl: keeps the PTM diagonal `F_Q` and converts it to probabilities
/// `p(Q) = 4^{-N} Σ_P η(Q, P) F_P`.
pub fn twirl(ch: &DenseChannel) -> Twirled {
    let n = ch.n;
    let fid = ch.ptm.diagonal();
    let dim = fid.len() as f64;
    let p = symplectic_transform(n, &fid) / dim;
    let probs: BTreeMap<_, _> = PauliOperator::all(n).zip(p.iter().copied()).collect();
    let channel = PauliErrorChannel::from_raw(n, probs);
    let negative = channel.negative_entries(1e-9);
    Twirled { channel, negative }
}

/// `E = G† ∘ G̃ ∘ A`: frame noise `A` first, then the noisy cycle, then the
/// ideal inverse.
pub fn effective_error(g_ideal: &CliffordCycle, g_noisy: &DenseChannel, a: &DenseChannel) -> Result<DenseChannel> {
    let g = DenseChannel::from_clifford(g_ideal)?;
    a.then(g_noisy)?.then(&g.adjoint())
}

/// Exact `F_RC(G̃, G)`, the process fidelity of the twirled effective error.
pub fn composite_fidelity_oracle(g_ideal: &CliffordCycle, g_noisy: &DenseChannel, a: &DenseChannel) -> Result<f64> {
    let e = effective_error(g_ideal, g_noisy, a)?;
    Ok(twirl(&e).channel.process_fidelity())
}

/// SPAM-free decay `Π_{j<m} F_{G^j(P)}(E, I)`.
pub fn decay_prediction<C: Channel + ?Sized>(g: &CliffordCycle, e: &C, p: &PauliOperator, m: usize) -> Result<f64> {
    if g.num_qubits() != e.num_qubits() {
        return Err(CbError::DimensionMismatch { left: g.num_qubits(), right: e.num_qubits() });
    }
    g.apply(&p.unsigned())?;
    let mut q = p.unsigned();
    let mut product = 1.0;
    for _ in 0..m {
        product *= e.pauli_fidelity(&q.unsigned())?;
        q = g.apply_unchecked(&q);
    }
    Ok(product)
}

/// Relative frequencies `w(Q | G^{m1}(P), δm)` of the unsigned orbit points
/// `G^{m1+j}(P)`, `j < δm`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayWeightProfile {
    pub base_pauli: PauliOperator,
    pub delta_m: usize,
    pub weights: BTreeMap<PauliOperator, f64>,
}

pub fn weight_profile(g: &CliffordCycle, p: &PauliOperator, m1: usize, delta_m: usize) -> Result<DecayWeightProfile> {
    if delta_m == 0 {
        return Err(CbError::InvalidAnalysis("delta_m must be at least 1".into()));
    }
    g.apply(&p.unsigned())?;
    let mut q = p.unsigned();
    for _ in 0..m1 {
        q = g.apply_unchecked(&q);
    }
    let base = q.unsigned();
    let mut weights = BTreeMap::new();
    for _ in 0..delta_m {
        *weights.entry(q.unsigned()).or_insert(0.0) += 1.0 / delta_m as f64;
        q = g.apply_unchecked(&q);
    }
    Ok(DecayWeightProfile { base_pauli: base, delta_m, weights })
}

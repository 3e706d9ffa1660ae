//! Clifford cycles stored as signed tableaus (images of the Pauli generators).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CbError, Result};
use crate::pauli::PauliOperator;

/// A Clifford cycle on `n` qubits, given by the images of `X_j` and `Z_j` under
/// conjugation `P ↦ G P G†`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CliffordCycle {
    n: usize,
    x_images: Vec<PauliOperator>,
    z_images: Vec<PauliOperator>,
}

impl CliffordCycle {
    pub fn identity(n: usize) -> Self {
        CliffordCycle {
            n,
            x_images: (0..n).map(|j| PauliOperator::x_on(n, j)).collect(),
            z_images: (0..n).map(|j| PauliOperator::z_on(n, j)).collect(),
        }
    }

    /// Builds a cycle from generator images, checking Hermiticity and the
    /// symplectic commutation relations.
    pub fn from_images(x_images: Vec<PauliOperator>, z_images: Vec<PauliOperator>) -> Result<Self> {
        let n = x_images.len();
        if n == 0 {
            return Err(CbError::ZeroQubits);
        }
        if z_images.len() != n {
            return Err(CbError::DimensionMismatch { left: n, right: z_images.len() });
        }
        for img in x_images.iter().chain(&z_images) {
            if img.num_qubits() != n {
                return Err(CbError::DimensionMismatch { left: n, right: img.num_qubits() });
            }
            if !img.is_hermitian() {
                return Err(CbError::NonHermitian(img.to_string()));
            }
        }
        for j in 0..n {
            for k in 0..n {
                let xz = x_images[j].symplectic_product(&z_images[k]);
                if xz != u32::from(j == k)
                    || (j < k && x_images[j].symplectic_product(&x_images[k]) != 0)
                    || (j < k && z_images[j].symplectic_product(&z_images[k]) != 0)
                {
                    return Err(CbError::InvalidConfig(format!(
                        "generator images violate the symplectic condition at ({j}, {k})"
                    )));
                }
            }
        }
        Ok(CliffordCycle { n, x_images, z_images })
    }

    /// Conjugation by the Hermitian Pauli `p`.
    pub fn pauli_cycle(p: &PauliOperator) -> Result<Self> {
        if !p.is_hermitian() {
            return Err(CbError::NonHermitian(p.to_string()));
        }
        let n = p.num_qubits();
        let image = |g: PauliOperator| if g.symplectic_product(p) == 0 { g } else { g.negated() };
        Ok(CliffordCycle {
            n,
            x_images: (0..n).map(|j| image(PauliOperator::x_on(n, j))).collect(),
            z_images: (0..n).map(|j| image(PauliOperator::z_on(n, j))).collect(),
        })
    }

    /// Conjugation by the Mølmer–Sørensen gate `MS ∝ (I − i X^{⊗n})/√2`.
    ///
    /// Paulis commuting with `X^{⊗n}` are fixed; anticommuting `Q` map to
    /// `(−i) X^{⊗n} Q`.
    pub fn ms(n: usize) -> Result<Self> {
        if n < 2 || n % 2 == 1 {
            return Err(CbError::OddMsRegister(n));
        }
        let xx = PauliOperator::all_x(n);
        let minus_i_xx = xx.with_phase(3);
        Ok(CliffordCycle {
            n,
            x_images: (0..n).map(|j| PauliOperator::x_on(n, j)).collect(),
            z_images: (0..n).map(|j| minus_i_xx.mul_unchecked(&PauliOperator::z_on(n, j))).collect(),
        })
    }

    /// Local basis change `B_Q = ⊗_j A_{Q|j}` with `A_I = A_Z = I`,
    /// `A_X: Z→X, X→Y` and `A_Y: Z→Y, Y→X`. Ignores the sign of `q`.
    pub fn basis_changer(q: &PauliOperator) -> Result<Self> {
        if !q.is_hermitian() {
            return Err(CbError::NonHermitian(q.to_string()));
        }
        let n = q.num_qubits();
        let mut x_images = Vec::with_capacity(n);
        let mut z_images = Vec::with_capacity(n);
        for j in 0..n {
            let x = PauliOperator::x_on(n, j);
            let z = PauliOperator::z_on(n, j);
            let y = {
                let mut y = x.clone();
                y.set_z(j, true);
                y
            };
            match q.factor(j) {
                // X → Y → Z → X
                'X' => {
                    x_images.push(y);
                    z_images.push(x);
                }
                // Z → Y → X → Z
                'Y' => {
                    x_images.push(z);
                    z_images.push(y);
                }
                _ => {
                    x_images.push(x);
                    z_images.push(z);
                }
            }
        }
        Ok(CliffordCycle { n, x_images, z_images })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, qubit: usize) -> &PauliOperator {
        &self.x_images[qubit]
    }

    pub fn z_image(&self, qubit: usize) -> &PauliOperator {
        &self.z_images[qubit]
    }

    /// `G P G†` for a Hermitian Pauli `p`.
    pub fn apply(&self, p: &PauliOperator) -> Result<PauliOperator> {
        if p.num_qubits() != self.n {
            return Err(CbError::DimensionMismatch { left: self.n, right: p.num_qubits() });
        }
        if !p.is_hermitian() {
            return Err(CbError::NonHermitian(p.to_string()));
        }
        Ok(self.apply_unchecked(p))
    }

    pub(crate) fn apply_unchecked(&self, p: &PauliOperator) -> PauliOperator {
        // p = i^(k + Σ x_j z_j) Π_j X_j^x_j Z_j^z_j, and conjugation is multiplicative.
        let xz: u32 = p.x_words().iter().zip(p.z_words()).map(|(a, b)| (a & b).count_ones()).sum();
        let mut acc = PauliOperator::identity(self.n).with_phase(((u32::from(p.phase_exponent()) + xz) % 4) as u8);
        for j in 0..self.n {
            if p.x_bit(j) {
                acc = acc.mul_unchecked(&self.x_images[j]);
            }
            if p.z_bit(j) {
                acc = acc.mul_unchecked(&self.z_images[j]);
            }
        }
        acc
    }

    /// Image bits of `p` with the phase discarded.
    pub(crate) fn apply_bits(&self, p: &PauliOperator) -> PauliOperator {
        let mut acc = PauliOperator::identity(self.n);
        for (w, (&xw, &zw)) in p.x_words().iter().zip(p.z_words()).enumerate() {
            for (bits, images) in [(xw, &self.x_images), (zw, &self.z_images)] {
                let mut rest = bits;
                while rest != 0 {
                    let j = w * 64 + rest.trailing_zeros() as usize;
                    acc.mul_bits_assign(&images[j]);
                    rest &= rest - 1;
                }
            }
        }
        acc
    }

    /// The cycle "first `h`, then `self`".
    pub fn compose(&self, h: &CliffordCycle) -> Result<CliffordCycle> {
        if h.n != self.n {
            return Err(CbError::DimensionMismatch { left: self.n, right: h.n });
        }
        Ok(CliffordCycle {
            n: self.n,
            x_images: h.x_images.iter().map(|p| self.apply_unchecked(p)).collect(),
            z_images: h.z_images.iter().map(|p| self.apply_unchecked(p)).collect(),
        })
    }

    /// `k`-fold repetition of the cycle.
    pub fn power(&self, k: usize) -> CliffordCycle {
        let mut acc = CliffordCycle::identity(self.n);
        for _ in 0..k {
            acc = self.compose(&acc).expect("same register");
        }
        acc
    }

    pub fn is_identity(&self) -> bool {
        *self == CliffordCycle::identity(self.n)
    }

    /// Whether every generator maps to itself up to sign, i.e. the cycle is a Pauli.
    pub fn is_pauli(&self) -> bool {
        (0..self.n).all(|j| {
            self.x_images[j].unsigned() == PauliOperator::x_on(self.n, j)
                && self.z_images[j].unsigned() == PauliOperator::z_on(self.n, j)
        })
    }

    /// The inverse cycle `G†`.
    pub fn inverse(&self) -> CliffordCycle {
        // Preimage bits follow from symplectic products with the images:
        // x_j(Q) = <G(Q), G(Z_j)> and z_j(Q) = <G(Q), G(X_j)>.
        let preimage = |target: &PauliOperator| -> PauliOperator {
            let mut q = PauliOperator::identity(self.n);
            for j in 0..self.n {
                q.set_x(j, target.symplectic_product(&self.z_images[j]) == 1);
                q.set_z(j, target.symplectic_product(&self.x_images[j]) == 1);
            }
            if self.apply_unchecked(&q) == *target {
                q
            } else {
                q.negated()
            }
        };
        CliffordCycle {
            n: self.n,
            x_images: (0..self.n).map(|j| preimage(&PauliOperator::x_on(self.n, j))).collect(),
            z_images: (0..self.n).map(|j| preimage(&PauliOperator::z_on(self.n, j))).collect(),
        }
    }

    /// Smallest `k ≥ 1` with `G^k = I`, searching up to `max`.
    pub fn order(&self, max: usize) -> Option<usize> {
        let mut acc = self.clone();
        for k in 1..=max {
            if acc.is_identity() {
                return Some(k);
            }
            acc = self.compose(&acc).expect("same register");
        }
        None
    }
}

/// Apply `g` to `p`; see [`CliffordCycle::apply`].
pub fn apply(g: &CliffordCycle, p: &PauliOperator) -> Result<PauliOperator> {
    g.apply(p)
}

/// "First `h`, then `g`".
pub fn compose(g: &CliffordCycle, h: &CliffordCycle) -> Result<CliffordCycle> {
    g.compose(h)
}

pub fn ms_cycle(n: usize) -> Result<CliffordCycle> {
    CliffordCycle::ms(n)
}

pub fn basis_changer(q: &PauliOperator) -> Result<CliffordCycle> {
    CliffordCycle::basis_changer(q)
}

pub fn pauli_cycle(p: &PauliOperator) -> Result<CliffordCycle> {
    CliffordCycle::pauli_cycle(p)
}

/// Serializable name of a cycle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CycleKind {
    Identity,
    Pauli { pauli: PauliOperator },
    Ms,
    BasisChange { pauli: PauliOperator },
    Custom { x_images: Vec<PauliOperator>, z_images: Vec<PauliOperator> },
}

/// A cycle label as stored in configs, bundles and noise models.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleLabel {
    #[serde(flatten)]
    pub kind: CycleKind,
    pub qubits: usize,
}

impl CycleLabel {
    pub fn identity(qubits: usize) -> Self {
        CycleLabel { kind: CycleKind::Identity, qubits }
    }

    pub fn ms(qubits: usize) -> Self {
        CycleLabel { kind: CycleKind::Ms, qubits }
    }

    pub fn pauli(p: &PauliOperator) -> Self {
        CycleLabel { kind: CycleKind::Pauli { pauli: p.clone() }, qubits: p.num_qubits() }
    }

    /// Basis changers ignore the sign, so the stored Pauli is unsigned.
    pub fn basis_change(p: &PauliOperator) -> Self {
        CycleLabel { kind: CycleKind::BasisChange { pauli: p.unsigned() }, qubits: p.num_qubits() }
    }

    pub fn to_cycle(&self) -> Result<CliffordCycle> {
        let check = |p: &PauliOperator| {
            if p.num_qubits() == self.qubits {
                Ok(())
            } else {
                Err(CbError::DimensionMismatch { left: self.qubits, right: p.num_qubits() })
            }
        };
        if self.qubits == 0 {
            return Err(CbError::ZeroQubits);
        }
        match &self.kind {
            CycleKind::Identity => Ok(CliffordCycle::identity(self.qubits)),
            CycleKind::Ms => CliffordCycle::ms(self.qubits),
            CycleKind::Pauli { pauli } => {
                check(pauli)?;
                CliffordCycle::pauli_cycle(pauli)
            }
            CycleKind::BasisChange { pauli } => {
                check(pauli)?;
                CliffordCycle::basis_changer(pauli)
            }
            CycleKind::Custom { x_images, z_images } => {
                let c = CliffordCycle::from_images(x_images.clone(), z_images.clone())?;
                if c.num_qubits() != self.qubits {
                    return Err(CbError::DimensionMismatch { left: self.qubits, right: c.num_qubits() });
                }
                Ok(c)
            }
        }
    }

    /// Key used to look up cycle noise in a noise model, e.g. `ms` or `pauli:XZ`.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for CycleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CycleKind::Identity => f.write_str("identity"),
            CycleKind::Ms => f.write_str("ms"),
            CycleKind::Pauli { pauli } => write!(f, "pauli:{pauli}"),
            CycleKind::BasisChange { pauli } => write!(f, "basis_change:{pauli}"),
            CycleKind::Custom { .. } => f.write_str("custom"),
        }
    }
}

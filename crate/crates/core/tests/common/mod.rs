//! Independent dense oracles: Kronecker-product matrices and a density-matrix
//! simulator that follows the circuit definition directly.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

use cyclebench::channels::ChannelSpec;
use cyclebench::clifford::{CycleKind, CycleLabel};
use cyclebench::pauli::PauliOperator;
use cyclebench::protocol::RandomizedCircuit;
use cyclebench::simulator::NoiseModel;

pub mod algebra;

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn mat2(a: [[Complex64; 2]; 2]) -> CMat {
    DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

pub fn single(ch: char) -> CMat {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    match ch {
        'I' => mat2([[o, z], [z, o]]),
        'X' => mat2([[z, o], [o, z]]),
        'Y' => mat2([[z, -i], [i, z]]),
        'Z' => mat2([[o, z], [z, -o]]),
        _ => panic!("not a Pauli letter: {ch}"),
    }
}

/// Tensor product with the first factor on the most significant qubit.
pub fn kron_all(factors: &[CMat]) -> CMat {
    factors.iter().fold(DMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, f| acc.kronecker(f))
}

/// `i^k ⊗_j σ_j` from the text form.
pub fn pauli_matrix(p: &PauliOperator) -> CMat {
    let factors: Vec<CMat> = (0..p.num_qubits()).map(|j| single(p.factor(j))).collect();
    let phase = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)][p.phase_exponent() as usize];
    kron_all(&factors) * phase
}

pub fn identity(n: usize) -> CMat {
    DMatrix::identity(1 << n, 1 << n)
}

pub fn hadamard() -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    mat2([[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]])
}

pub fn s_gate() -> CMat {
    mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]])
}

/// `A_X = H S†`, mapping `X → Y → Z → X`.
pub fn a_x() -> CMat {
    hadamard() * s_gate().adjoint()
}

/// `A_Y = S H`, mapping `Z → Y → X → Z`.
pub fn a_y() -> CMat {
    s_gate() * hadamard()
}

/// `(I − i X^{⊗n}) / √2`.
pub fn ms_unitary(n: usize) -> CMat {
    let xs = kron_all(&vec![single('X'); n]);
    (identity(n) - xs * c(0.0, 1.0)) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0)
}

/// Product of `A_X` on X factors and `A_Y` on Y factors.
pub fn basis_unitary(q: &PauliOperator) -> CMat {
    let factors: Vec<CMat> = (0..q.num_qubits())
        .map(|j| match q.factor(j) {
            'X' => a_x(),
            'Y' => a_y(),
            _ => single('I'),
        })
        .collect();
    kron_all(&factors)
}

pub fn label_unitary(label: &CycleLabel) -> CMat {
    match &label.kind {
        CycleKind::Identity => identity(label.qubits),
        CycleKind::Ms => ms_unitary(label.qubits),
        CycleKind::Pauli { pauli } => pauli_matrix(pauli),
        CycleKind::BasisChange { pauli } => basis_unitary(pauli),
        CycleKind::Custom { .. } => panic!("custom cycles have no oracle unitary"),
    }
}

pub fn conj(u: &CMat, rho: &CMat) -> CMat {
    u * rho * u.adjoint()
}

pub fn approx_eq(a: &CMat, b: &CMat, tol: f64) -> bool {
    a.shape() == b.shape() && (a - b).iter().all(|v| v.norm() <= tol)
}

/// Applies a channel described by a spec to a density matrix.
pub fn apply_spec(spec: &ChannelSpec, n: usize, rho: &CMat) -> CMat {
    let mix = |terms: Vec<(f64, PauliOperator)>| {
        terms
            .iter()
            .fold(CMat::zeros(rho.nrows(), rho.ncols()), |acc, (w, q)| acc + conj(&pauli_matrix(q), rho) * c(*w, 0.0))
    };
    match spec {
        ChannelSpec::Identity => rho.clone(),
        ChannelSpec::Pauli { probs } => {
            let rest: f64 = 1.0 - probs.iter().filter(|(q, _)| !q.is_identity()).map(|(_, v)| v).sum::<f64>();
            let mut terms: Vec<_> =
                probs.iter().filter(|(q, _)| !q.is_identity()).map(|(q, v)| (*v, q.clone())).collect();
            terms.push((rest, PauliOperator::identity(n)));
            mix(terms)
        }
        ChannelSpec::Depolarizing { p } => {
            let others = (1usize << (2 * n)) as f64 - 1.0;
            let terms =
                PauliOperator::all(n).map(|q| if q.is_identity() { (1.0 - p, q) } else { (p / others, q) }).collect();
            mix(terms)
        }
        ChannelSpec::LocalDepolarizing { p } => {
            let mut out = rho.clone();
            for j in 0..n {
                let terms = ['I', 'X', 'Y', 'Z']
                    .iter()
                    .map(|&ch| {
                        let mut s: Vec<char> = vec!['I'; n];
                        s[j] = ch;
                        let q: PauliOperator = s.into_iter().collect::<String>().parse().unwrap();
                        (if ch == 'I' { 1.0 - p } else { p / 3.0 }, q)
                    })
                    .collect::<Vec<_>>();
                out = terms.iter().fold(CMat::zeros(out.nrows(), out.ncols()), |acc, (w, q)| {
                    acc + conj(&pauli_matrix(q), &out) * c(*w, 0.0)
                });
            }
            out
        }
        ChannelSpec::UnitaryRotation { axis, angle_rad } => {
            let u =
                identity(n) * c((angle_rad / 2.0).cos(), 0.0) - pauli_matrix(axis) * c(0.0, (angle_rad / 2.0).sin());
            conj(&u, rho)
        }
        ChannelSpec::Mixture { components } => {
            components.iter().fold(CMat::zeros(rho.nrows(), rho.ncols()), |acc, comp| {
                acc + apply_spec(&comp.channel, n, rho) * c(comp.weight, 0.0)
            })
        }
        ChannelSpec::Sequence { channels } => channels.iter().fold(rho.clone(), |r, ch| apply_spec(ch, n, &r)),
    }
}

fn flip_channel(n: usize, probs: &[f64], rho: &CMat) -> CMat {
    let mut out = rho.clone();
    for (j, &p) in probs.iter().enumerate() {
        let mut s = vec!['I'; n];
        s[j] = 'X';
        let x = pauli_matrix(&s.into_iter().collect::<String>().parse().unwrap());
        out = &out * c(1.0 - p, 0.0) + conj(&x, &out) * c(p, 0.0);
    }
    out
}

/// Outcome distribution (qubit 0 most significant) of a circuit, simulated on
/// the density matrix from the circuit definition.
pub fn oracle_probabilities(circuit: &RandomizedCircuit, noise: &NoiseModel) -> Vec<f64> {
    let n = circuit.pauli.num_qubits();
    let prep_flip = noise.spam.prep_flip.expand(n).unwrap();
    let meas_flip = noise.spam.meas_flip.expand(n).unwrap();
    let basis = noise.spam.basis_noise.clone().unwrap_or_default();
    let cycle_noise = noise.cycle_noise_for(&circuit.cycle);
    let g = label_unitary(&circuit.cycle);
    let b = label_unitary(&circuit.prep);
    let b_dag = label_unitary(&circuit.meas).adjoint();
    let frames: Vec<CMat> = circuit.frames.iter().map(pauli_matrix).collect();

    let dim = 1usize << n;
    let mut rho = CMat::zeros(dim, dim);
    rho[(0, 0)] = c(1.0, 0.0);
    rho = flip_channel(n, &prep_flip, &rho);
    rho = apply_spec(&basis, n, &rho);
    let frame_round = |u: &CMat, r: &CMat| apply_spec(&noise.frame_noise, n, &conj(u, r));
    if circuit.merged {
        rho = frame_round(&(&frames[0] * &b), &rho);
    } else {
        rho = conj(&b, &rho);
        rho = frame_round(&frames[0], &rho);
    }
    for i in 1..=circuit.m {
        rho = apply_spec(&cycle_noise, n, &conj(&g, &rho));
        if circuit.merged && i == circuit.m {
            rho = frame_round(&(&b_dag * &frames[i]), &rho);
        } else {
            rho = frame_round(&frames[i], &rho);
        }
    }
    if !circuit.merged {
        rho = conj(&b_dag, &rho);
    }
    rho = apply_spec(&basis, n, &rho);
    rho = flip_channel(n, &meas_flip, &rho);
    (0..dim).map(|k| rho[(k, k)].re).collect()
}

/// Whether `counts` lies within `sigmas` binomial standard deviations of
/// `shots · probs` in every cell.
pub fn within_multinomial_band(counts: &[u64], probs: &[f64], shots: u64, sigmas: f64) -> Result<(), String> {
    for (k, (&obs, &p)) in counts.iter().zip(probs).enumerate() {
        let mean = shots as f64 * p;
        let sd = (shots as f64 * p * (1.0 - p)).sqrt();
        if (obs as f64 - mean).abs() > sigmas * sd + 1e-9 {
            return Err(format!("cell {k}: observed {obs}, expected {mean:.1} ± {sd:.1}"));
        }
    }
    Ok(())
}

/// Parses an outcome-string count map into a dense vector.
pub fn counts_vector(counts: &std::collections::BTreeMap<String, u64>, n: usize) -> Vec<u64> {
    let mut out = vec![0; 1 << n];
    for (z, &v) in counts {
        out[usize::from_str_radix(z, 2).unwrap()] += v;
    }
    out
}

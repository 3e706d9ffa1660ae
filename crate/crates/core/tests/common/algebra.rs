//! Algebra checks against Kronecker-product matrices. Each returns the number
//! of cases checked.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cyclebench::channels::random::random_physical_channel;
use cyclebench::channels::Channel;
use cyclebench::clifford::CliffordCycle;
use cyclebench::pauli::PauliOperator;
use cyclebench::simulator::outcome_eigenvalue;

use super::{approx_eq, basis_unitary, c, conj, kron_all, ms_unitary, pauli_matrix, single, CMat};

const TOL: f64 = 1e-9;

fn all_phased(n: usize) -> Vec<PauliOperator> {
    PauliOperator::all(n).flat_map(|p| (0..4).map(move |k| p.with_phase(k))).collect()
}

pub fn multiply_eta_conjugate(n: usize) -> Result<usize, String> {
    let mut cases = 0;
    let phased = all_phased(n);
    for a in &phased {
        let ma = pauli_matrix(a);
        for b in &phased {
            let prod = a.multiply(b).map_err(|e| e.to_string())?;
            if !approx_eq(&pauli_matrix(&prod), &(&ma * pauli_matrix(b)), TOL) {
                return Err(format!("{a} · {b} gave {prod}"));
            }
            cases += 1;
        }
    }
    for q in PauliOperator::all(n) {
        let mq = pauli_matrix(&q);
        for r in PauliOperator::all(n) {
            let mr = pauli_matrix(&r);
            let eta = q.eta(&r).map_err(|e| e.to_string())?;
            if !approx_eq(&(&mq * &mr * mq.adjoint()), &(&mr * c(f64::from(eta), 0.0)), TOL) {
                return Err(format!("eta({q}, {r}) = {eta}"));
            }
            let conjugated = q.conjugate(&r).map_err(|e| e.to_string())?;
            if !approx_eq(&pauli_matrix(&conjugated), &conj(&mq, &mr), TOL) {
                return Err(format!("{q} {r} {q} gave {conjugated}"));
            }
            cases += 2;
        }
    }
    Ok(cases)
}

/// Tableau action against `U P U†` for MS, every basis changer and every Pauli cycle.
pub fn clifford_apply(n: usize) -> Result<usize, String> {
    let mut gates: Vec<(String, CliffordCycle, CMat)> = Vec::new();
    if n.is_multiple_of(2) {
        gates.push(("MS".into(), CliffordCycle::ms(n).unwrap(), ms_unitary(n)));
    }
    for q in PauliOperator::all(n) {
        gates.push((format!("B_{q}"), CliffordCycle::basis_changer(&q).unwrap(), basis_unitary(&q)));
        gates.push((format!("P_{q}"), CliffordCycle::pauli_cycle(&q).unwrap(), pauli_matrix(&q)));
    }
    let mut cases = 0;
    for (name, g, u) in &gates {
        for p in PauliOperator::all(n) {
            let img = g.apply(&p).map_err(|e| e.to_string())?;
            if !approx_eq(&pauli_matrix(&img), &conj(u, &pauli_matrix(&p)), TOL) {
                return Err(format!("{name}({p}) gave {img}"));
            }
            cases += 1;
        }
    }
    Ok(cases)
}

pub fn ms_fourth_power(n: usize) -> Result<usize, String> {
    let g = CliffordCycle::ms(n).map_err(|e| e.to_string())?;
    if !g.power(4).is_identity() || g.power(2).is_identity() {
        return Err(format!("MS_{n} tableau does not have order 4"));
    }
    let u = ms_unitary(n);
    let u4 = &u * &u * &u * &u;
    let scale = u4[(0, 0)];
    if scale.norm() < 0.5 || !approx_eq(&u4, &(DMatrix::identity(1 << n, 1 << n) * scale), TOL) {
        return Err(format!("MS_{n}^4 is not proportional to the identity"));
    }
    Ok(2)
}

/// `Q = Σ_z λ_z B_Q |z⟩⟨z| B_Q†`, with `λ_z` from the simulator's weighting.
pub fn eigenbasis_reconstruction(n: usize) -> Result<usize, String> {
    let dim = 1usize << n;
    let mut cases = 0;
    for base in PauliOperator::all(n) {
        for q in [base.clone(), base.negated()] {
            let b = basis_unitary(&q);
            let mut acc = CMat::zeros(dim, dim);
            for idx in 0..dim {
                let z: String = (0..n).map(|j| if idx >> (n - 1 - j) & 1 == 1 { '1' } else { '0' }).collect();
                let lambda = outcome_eigenvalue(&q, &z).map_err(|e| e.to_string())?;
                let mut proj = CMat::zeros(dim, dim);
                proj[(idx, idx)] = c(1.0, 0.0);
                acc += conj(&b, &proj) * c(lambda, 0.0);
            }
            if !approx_eq(&acc, &pauli_matrix(&q), TOL) {
                return Err(format!("reconstruction of {q} failed"));
            }
            // the tableau of B_Q agrees with the unitary on the measured Z string
            let z_s: String = (0..n).map(|j| if q.factor(j) == 'I' { 'I' } else { 'Z' }).collect();
            let z_s: PauliOperator = z_s.parse().unwrap();
            let tab = CliffordCycle::basis_changer(&q).unwrap().apply(&z_s).unwrap();
            if tab != q.unsigned() {
                return Err(format!("B_{q}(Z_S) = {tab}"));
            }
            cases += 1;
        }
    }
    let _ = kron_all(&[single('I')]);
    Ok(cases)
}

/// `0 ≤ 1 − F_P ≤ 2 − 2F` on random CP channels.
pub fn fidelity_lemma(n: usize, channels: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = 0;
    for i in 0..channels {
        let stochastic = 0.5 * (i as f64 + 1.0) / channels as f64;
        let ch = random_physical_channel(n, stochastic, 1.5, &mut rng).map_err(|e| e.to_string())?;
        if !ch.is_completely_positive(1e-9) {
            return Err(format!("generated channel {i} is not CP"));
        }
        let f = ch.process_fidelity();
        for p in PauliOperator::all(n) {
            let fp = ch.pauli_fidelity(&p).map_err(|e| e.to_string())?;
            if 1.0 - fp < -TOL || 1.0 - fp > 2.0 - 2.0 * f + TOL {
                return Err(format!("channel {i}: F_{p} = {fp}, F = {f}"));
            }
            cases += 1;
        }
    }
    Ok(cases)
}

//! Fidelity estimation from decay records and the analyses built on it.
//!
//! The per-Pauli term is
//!
//! ```text
//! F̂_P = (Σ_l f_{P,m2,l} / Σ_l f_{P,m1,l})^{1/(m2 − m1)}
//! ```
//!
//! and `F̂` is the mean of the terms over the sampled Paulis. SPAM enters every
//! `f_{P,m,l}` through a factor common to both lengths and cancels in the ratio.

use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{weight_profile, Channel, DenseChannel};
use crate::clifford::CliffordCycle;
use crate::error::{CbError, Result};
use crate::pauli::PauliOperator;
use crate::rng::derived_rng;
use crate::simulator::DecayRecord;

/// Overlaps of one Pauli at every length, indexed by length then in `l` order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PauliDecays {
    pub by_length: BTreeMap<usize, Vec<f64>>,
    /// Mean shots per record, for the exclusion threshold.
    pub mean_shots: f64,
}

/// Records grouped by Pauli. Records of different cycles must be split first.
pub fn group_records(records: &[DecayRecord]) -> BTreeMap<PauliOperator, PauliDecays> {
    let mut sorted: Vec<&DecayRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.pauli, a.m, a.l).cmp(&(&b.pauli, b.m, b.l)));
    let mut out: BTreeMap<PauliOperator, PauliDecays> = BTreeMap::new();
    let mut shot_totals: BTreeMap<PauliOperator, (f64, usize)> = BTreeMap::new();
    for r in sorted {
        out.entry(r.pauli.clone()).or_default().by_length.entry(r.m).or_default().push(r.f);
        let t = shot_totals.entry(r.pauli.clone()).or_insert((0.0, 0));
        t.0 += r.shots as f64;
        t.1 += 1;
    }
    for (p, (total, count)) in shot_totals {
        out.get_mut(&p).expect("same keys").mean_shots = total / count as f64;
    }
    out
}

/// Records split by their cycle key, in key order.
pub fn split_by_cycle(records: &[DecayRecord]) -> BTreeMap<String, Vec<DecayRecord>> {
    let mut out: BTreeMap<String, Vec<DecayRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.cycle.clone()).or_default().push(r.clone());
    }
    out
}

/// Why a Pauli term was left out of the mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedTerm {
    pub pauli: PauliOperator,
    pub reason: String,
}

/// `F̂_P` for one Pauli, or the reason it is unusable.
fn pauli_term(
    p: &PauliOperator,
    short: &[f64],
    long: &[f64],
    shots: f64,
    delta_m: usize,
) -> std::result::Result<f64, String> {
    if p.is_identity() {
        return Ok(1.0);
    }
    let l = short.len() as f64;
    let mean_short = short.iter().sum::<f64>() / l;
    let mean_long = long.iter().sum::<f64>() / long.len() as f64;
    let threshold = 3.0 / (l * shots).sqrt();
    if mean_short.abs() < threshold {
        return Err(format!("mean overlap {mean_short:.3e} at the shorter length is within {threshold:.3e} of zero"));
    }
    let ratio = mean_long / mean_short;
    if ratio <= 0.0 {
        return Err(format!("non-positive decay ratio {ratio:.3e}"));
    }
    Ok(ratio.powf(1.0 / delta_m as f64))
}

/// How the bootstrap resamples the data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMode {
    /// Resample Paulis and, within each, the randomizations at each length.
    #[default]
    PaulisAndSequences,
    /// Keep the Pauli set fixed; for exhaustive sets.
    SequencesOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub resamples: usize,
    pub seed: u64,
    pub mode: BootstrapMode,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { resamples: 1000, seed: 0, mode: BootstrapMode::PaulisAndSequences }
    }
}

/// Composite process fidelity estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_qubits: usize,
    /// Distinct Paulis entering the mean, identity included.
    pub pauli_set_size: usize,
    pub length_pair: (usize, usize),
    pub per_pauli: BTreeMap<PauliOperator, f64>,
    pub excluded: Vec<ExcludedTerm>,
}

impl FidelityEstimate {
    /// A published or externally computed value.
    pub fn from_value(value: f64, std_error: f64, n_qubits: usize) -> Self {
        FidelityEstimate {
            value,
            std_error,
            n_qubits,
            pauli_set_size: 0,
            length_pair: (0, 0),
            per_pauli: BTreeMap::new(),
            excluded: Vec::new(),
        }
    }
}

/// One Pauli's usable data for a length pair.
#[derive(Clone, Debug)]
struct Unit {
    pauli: PauliOperator,
    short: Vec<f64>,
    long: Vec<f64>,
    shots: f64,
}

fn units_for_pair(groups: &BTreeMap<PauliOperator, PauliDecays>, m1: usize, m2: usize) -> Result<Vec<Unit>> {
    if m1 >= m2 {
        return Err(CbError::InvalidAnalysis(format!("need m1 < m2, got ({m1}, {m2})")));
    }
    if groups.is_empty() {
        return Err(CbError::MissingRecords("no decay records".into()));
    }
    let mut units: Vec<Unit> = groups
        .iter()
        .map(|(p, d)| {
            let get = |m: usize| {
                d.by_length
                    .get(&m)
                    .filter(|v| !v.is_empty())
                    .cloned()
                    .ok_or_else(|| CbError::MissingRecords(format!("no records for {p} at m = {m}")))
            };
            Ok(Unit { pauli: p.clone(), short: get(m1)?, long: get(m2)?, shots: d.mean_shots })
        })
        .collect::<Result<_>>()?;

    // An exhaustive set measures every non-identity Pauli; F_I = 1 is known
    // exactly and enters the mean like any other term.
    let n = units[0].pauli.num_qubits();
    let non_identity = units.iter().filter(|u| !u.pauli.is_identity()).count();
    if n <= 16 && non_identity == units.len() && non_identity + 1 == 1usize << (2 * n) {
        let l = units.iter().map(|u| u.short.len()).sum::<usize>() as f64 / non_identity as f64;
        let ones = vec![1.0; (l.round() as usize).max(1)];
        let shots = units[0].shots;
        units.insert(0, Unit { pauli: PauliOperator::identity(n), short: ones.clone(), long: ones, shots });
    }
    Ok(units)
}

/// Weighted mean of usable terms, each Pauli weighted by its number of
/// randomizations at the shorter length (repeated draws pool their data).
fn mean_of_terms<'a>(
    units: impl Iterator<Item = (&'a PauliOperator, &'a [f64], &'a [f64], f64)>,
    delta_m: usize,
) -> Option<f64> {
    let (mut acc, mut weight) = (0.0, 0.0);
    for (p, short, long, shots) in units {
        if let Ok(t) = pauli_term(p, short, long, shots, delta_m) {
            acc += t * short.len() as f64;
            weight += short.len() as f64;
        }
    }
    (weight > 0.0).then(|| acc / weight)
}

fn resample<R: Rng + ?Sized>(v: &[f64], rng: &mut R) -> Vec<f64> {
    (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).collect()
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    // shifted by the first value, so identical inputs give exactly zero
    let shifted: Vec<f64> = values.iter().map(|v| v - values[0]).collect();
    let mean = shifted.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = shifted.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Estimate with the default bootstrap settings.
pub fn estimate_composite_fidelity(records: &[DecayRecord], m1: usize, m2: usize) -> Result<FidelityEstimate> {
    estimate_with(records, m1, m2, &EstimateOptions::default())
}

pub fn estimate_with(
    records: &[DecayRecord],
    m1: usize,
    m2: usize,
    options: &EstimateOptions,
) -> Result<FidelityEstimate> {
    let groups = group_records(records);
    let units = units_for_pair(&groups, m1, m2)?;
    let delta_m = m2 - m1;

    let mut per_pauli = BTreeMap::new();
    let mut excluded = Vec::new();
    for u in &units {
        match pauli_term(&u.pauli, &u.short, &u.long, u.shots, delta_m) {
            Ok(t) => {
                per_pauli.insert(u.pauli.clone(), t);
            }
            Err(reason) => excluded.push(ExcludedTerm { pauli: u.pauli.clone(), reason }),
        }
    }
    let value =
        mean_of_terms(units.iter().map(|u| (&u.pauli, u.short.as_slice(), u.long.as_slice(), u.shots)), delta_m)
            .ok_or_else(|| CbError::InvalidAnalysis("every Pauli term was excluded".into()))?;

    let boot: Vec<f64> = (0..options.resamples)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = derived_rng(options.seed, &format!("bootstrap/{b}"));
            let chosen: Vec<&Unit> = match options.mode {
                BootstrapMode::PaulisAndSequences => {
                    (0..units.len()).map(|_| &units[rng.random_range(0..units.len())]).collect()
                }
                BootstrapMode::SequencesOnly => units.iter().collect(),
            };
            let drawn: Vec<(&PauliOperator, Vec<f64>, Vec<f64>, f64)> = chosen
                .into_iter()
                .map(|u| (&u.pauli, resample(&u.short, &mut rng), resample(&u.long, &mut rng), u.shots))
                .collect();
            mean_of_terms(drawn.iter().map(|(p, s, l, n)| (*p, s.as_slice(), l.as_slice(), *n)), delta_m)
        })
        .collect();

    Ok(FidelityEstimate {
        value,
        std_error: sample_std(&boot),
        n_qubits: units[0].pauli.num_qubits(),
        pauli_set_size: per_pauli.len(),
        length_pair: (m1, m2),
        per_pauli,
        excluded,
    })
}

/// Ratio of a dressed-cycle fidelity to the local fidelity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub value: f64,
    /// First-order propagation of both statistical errors.
    pub std_error: f64,
    /// Always set: coherent errors aligned between the cycle and the frames can
    /// bias the ratio by an amount comparable to the error rate itself.
    pub systematic_caveat: bool,
}

pub fn interleaved_ratio(dressed: &FidelityEstimate, local: &FidelityEstimate) -> Result<RatioEstimate> {
    if dressed.n_qubits != local.n_qubits {
        return Err(CbError::DimensionMismatch { left: dressed.n_qubits, right: local.n_qubits });
    }
    if local.value == 0.0 {
        return Err(CbError::InvalidAnalysis("local fidelity is zero".into()));
    }
    let value = dressed.value / local.value;
    let rel = ((dressed.std_error / dressed.value).powi(2) + (local.std_error / local.value).powi(2)).sqrt();
    Ok(RatioEstimate { value, std_error: value.abs() * rel, systematic_caveat: true })
}

/// Upper bound `(1 − f)/√k` on the standard error from sampling `k` Paulis.
pub fn variance_bound(f: f64, k: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) || k == 0 {
        return Err(CbError::InvalidAnalysis(format!("variance bound needs 0 ≤ f ≤ 1 and k ≥ 1, got f={f}, k={k}")));
    }
    Ok((1.0 - f) / (k as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetRow {
    pub k: usize,
    pub mean: f64,
    pub std: f64,
}

/// Spread of subset estimates against `K`, with the fit `std = c/√K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetConvergence {
    pub rows: Vec<SubsetRow>,
    pub c: f64,
    pub r_squared: f64,
    /// Estimate from all available Paulis.
    pub full_estimate: f64,
}

/// Draws `trials` subsets of `K` distinct non-identity Paulis without
/// replacement for each `K` in `sizes` and records the spread of the estimates.
pub fn subset_convergence(
    records: &[DecayRecord],
    m1: usize,
    m2: usize,
    sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<SubsetConvergence> {
    let groups = group_records(records);
    let units = units_for_pair(&groups, m1, m2)?;
    let delta_m = m2 - m1;
    let terms: Vec<f64> = units
        .iter()
        .filter(|u| !u.pauli.is_identity())
        .filter_map(|u| pauli_term(&u.pauli, &u.short, &u.long, u.shots, delta_m).ok())
        .collect();
    if trials == 0 || sizes.is_empty() {
        return Err(CbError::InvalidAnalysis("need at least one size and one trial".into()));
    }
    if let Some(&k) = sizes.iter().find(|&&k| k == 0 || k > terms.len()) {
        return Err(CbError::InvalidAnalysis(format!("subset size {k} outside 1..={} usable Paulis", terms.len())));
    }
    let rows: Vec<SubsetRow> = sizes
        .par_iter()
        .map(|&k| {
            let mut rng = derived_rng(seed, &format!("subset/{k}"));
            let estimates: Vec<f64> = (0..trials)
                .map(|_| {
                    let mut idx = sample_indices(&mut rng, terms.len(), k).into_vec();
                    idx.sort_unstable();
                    idx.iter().map(|&i| terms[i]).sum::<f64>() / k as f64
                })
                .collect();
            SubsetRow { k, mean: estimates.iter().sum::<f64>() / trials as f64, std: sample_std(&estimates) }
        })
        .collect();

    // One-parameter least squares in x = 1/√K.
    let sxy: f64 = rows.iter().map(|r| r.std / (r.k as f64).sqrt()).sum();
    let sxx: f64 = rows.iter().map(|r| 1.0 / r.k as f64).sum();
    let c = sxy / sxx;
    let mean_std = rows.iter().map(|r| r.std).sum::<f64>() / rows.len() as f64;
    let ss_res: f64 = rows.iter().map(|r| (r.std - c / (r.k as f64).sqrt()).powi(2)).sum();
    let ss_tot: f64 = rows.iter().map(|r| (r.std - mean_std).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(SubsetConvergence { rows, c, r_squared, full_estimate: terms.iter().sum::<f64>() / terms.len() as f64 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthConsistency {
    pub estimates: Vec<FidelityEstimate>,
    /// Largest pairwise `|ΔF̂| / √(σ_a² + σ_b²)`.
    pub statistic: f64,
}

pub fn length_consistency(
    records: &[DecayRecord],
    pairs: &[(usize, usize)],
    options: &EstimateOptions,
) -> Result<LengthConsistency> {
    let estimates =
        pairs.iter().map(|&(m1, m2)| estimate_with(records, m1, m2, options)).collect::<Result<Vec<_>>>()?;
    let mut statistic: f64 = 0.0;
    for (i, a) in estimates.iter().enumerate() {
        for b in &estimates[i + 1..] {
            let pooled = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
            let diff = (a.value - b.value).abs();
            let z = if pooled > 0.0 {
                diff / pooled
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            statistic = statistic.max(z);
        }
    }
    Ok(LengthConsistency { estimates, statistic })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    /// `F = 1 − ε N`.
    LinearLocal,
    /// `F = 1 − ε (N² − N)/2`.
    QuadraticMs,
}

impl ScalingModel {
    pub fn design(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            ScalingModel::LinearLocal => n,
            ScalingModel::QuadraticMs => (n * n - n) / 2.0,
        }
    }
}

impl std::str::FromStr for ScalingModel {
    type Err = CbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" | "linear_local" => Ok(ScalingModel::LinearLocal),
            "ms" | "quadratic_ms" => Ok(ScalingModel::QuadraticMs),
            other => Err(CbError::InvalidConfig(format!("unknown scaling model {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Unweighted,
    InverseVariance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n_qubits: usize,
    pub fidelity: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: ScalingModel,
    pub method: FitMethod,
    pub coefficient: f64,
    pub coefficient_std: f64,
    pub negative_coefficient: bool,
}

/// Both least-squares variants; the inverse-variance fit is absent when some
/// point has no positive uncertainty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFits {
    pub unweighted: ScalingFit,
    pub inverse_variance: Option<ScalingFit>,
}

pub fn fit_scaling(points: &[ScalingPoint], model: ScalingModel) -> Result<ScalingFits> {
    if points.len() < 2 {
        return Err(CbError::InvalidAnalysis("scaling fits need at least two points".into()));
    }
    if points.iter().all(|p| p.n_qubits == points[0].n_qubits) {
        return Err(CbError::InvalidAnalysis("all points share one register size".into()));
    }
    let c: Vec<f64> = points.iter().map(|p| model.design(p.n_qubits)).collect();
    let y: Vec<f64> = points.iter().map(|p| 1.0 - p.fidelity).collect();
    if c.iter().all(|&v| v == 0.0) {
        return Err(CbError::InvalidAnalysis("design vector is zero".into()));
    }
    let fit = |coefficient: f64, coefficient_std: f64, method| ScalingFit {
        model,
        method,
        coefficient,
        coefficient_std,
        negative_coefficient: coefficient < 0.0,
    };

    let scc: f64 = c.iter().map(|v| v * v).sum();
    let eps = c.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / scc;
    let rss: f64 = c.iter().zip(&y).map(|(a, b)| (b - eps * a).powi(2)).sum();
    let unweighted = fit(eps, (rss / (points.len() - 1) as f64 / scc).sqrt(), FitMethod::Unweighted);

    let inverse_variance = points.iter().all(|p| p.std_error > 0.0).then(|| {
        let w: Vec<f64> = points.iter().map(|p| p.std_error.powi(-2)).collect();
        let swcc: f64 = w.iter().zip(&c).map(|(w, c)| w * c * c).sum();
        let swcy: f64 = w.iter().zip(&c).zip(&y).map(|((w, c), y)| w * c * y).sum();
        fit(swcy / swcc, swcc.powf(-0.5), FitMethod::InverseVariance)
    });
    Ok(ScalingFits { unweighted, inverse_variance })
}

/// Infinite-shot, exhaustive-Pauli expectation of the estimator against the
/// exact composite fidelity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorGap {
    pub expected: f64,
    pub f_rc: f64,
    pub gap: f64,
}

impl EstimatorGap {
    /// `0 ≤ gap ≤ 2 (1 − F_RC)²` up to `tolerance`.
    pub fn within_bounds(&self, tolerance: f64) -> bool {
        self.gap >= -tolerance && self.gap <= 2.0 * (1.0 - self.f_rc).powi(2) + tolerance
    }
}

/// Expected `F̂` for the effective error `e` of cycle `g`: the mean over all
/// Paulis of `Π_Q F_Q^{w(Q | G^{m1}(P), m2 − m1)}`.
pub fn estimator_gap<C: Channel + ?Sized>(g: &CliffordCycle, e: &C, m1: usize, m2: usize) -> Result<EstimatorGap> {
    let n = g.num_qubits();
    if n > 4 {
        return Err(CbError::TooManyQubits { n, max: 4 });
    }
    if m1 >= m2 {
        return Err(CbError::InvalidAnalysis(format!("need m1 < m2, got ({m1}, {m2})")));
    }
    let mut total = 0.0;
    for p in PauliOperator::all(n) {
        let profile = weight_profile(g, &p, m1, m2 - m1)?;
        let mut term = 1.0;
        for (q, w) in &profile.weights {
            let f = e.pauli_fidelity(q)?;
            if f <= 0.0 {
                return Err(CbError::InvalidAnalysis(format!("non-positive Pauli fidelity {f} for {q}")));
            }
            term *= f.powf(*w);
        }
        total += term;
    }
    let expected = total / (1u64 << (2 * n)) as f64;
    let f_rc = e.process_fidelity();
    Ok(EstimatorGap { expected, f_rc, gap: f_rc - expected })
}

/// Mean decay curve of one Pauli, for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub cycle: String,
    pub pauli: PauliOperator,
    pub m: usize,
    pub mean_f: f64,
    pub std_error: f64,
    pub count: usize,
}

pub fn decay_curves(records: &[DecayRecord]) -> Vec<DecayPoint> {
    let mut out = Vec::new();
    for (cycle, recs) in split_by_cycle(records) {
        for (pauli, decays) in group_records(&recs) {
            for (m, fs) in decays.by_length {
                let count = fs.len();
                let mean_f = fs.iter().sum::<f64>() / count as f64;
                out.push(DecayPoint {
                    cycle: cycle.clone(),
                    pauli: pauli.clone(),
                    m,
                    mean_f,
                    std_error: sample_std(&fs) / (count as f64).sqrt(),
                    count,
                });
            }
        }
    }
    out
}

/// Analytic `F̂` check from the ideal cycle and dense noise of the cycle and frames.
pub fn estimator_gap_dense(
    g: &CliffordCycle,
    g_noisy: &DenseChannel,
    frame_noise: &DenseChannel,
    m1: usize,
    m2: usize,
) -> Result<EstimatorGap> {
    let e = crate::channels::effective_error(g, g_noisy, frame_noise)?;
    estimator_gap(g, &e, m1, m2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::PauliErrorChannel;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    fn rec(pauli: &str, m: usize, l: usize, f: f64) -> DecayRecord {
        DecayRecord { pauli: p(pauli), m, l, shots: 100, f, cycle: String::new() }
    }

    fn geometric(paulis: &[&str], rate: f64, lengths: &[usize], big_l: usize) -> Vec<DecayRecord> {
        let mut out = Vec::new();
        for q in paulis {
            for &m in lengths {
                for l in 0..big_l {
                    out.push(rec(q, m, l, rate.powi(m as i32)));
                }
            }
        }
        out
    }

    #[test]
    fn exhaustive_set_includes_identity_term() {
        let mut recs = geometric(&["X"], 0.9, &[2, 4], 3);
        recs.extend(geometric(&["Y"], 0.8, &[2, 4], 3));
        recs.extend(geometric(&["Z"], 0.7, &[2, 4], 3));
        let e = estimate_composite_fidelity(&recs, 2, 4).unwrap();
        assert!((e.value - (1.0 + 0.9 + 0.8 + 0.7) / 4.0).abs() < 1e-12);
        assert_eq!(e.pauli_set_size, 4);
        let partial = estimate_composite_fidelity(&recs[..12], 2, 4).unwrap();
        assert!((partial.value - 0.85).abs() < 1e-12);
    }

    #[test]
    fn exact_geometric_decay() {
        let recs = geometric(&["XZ", "YY", "ZI"], 0.9, &[4, 8, 12], 5);
        for (m1, m2) in [(4, 8), (4, 12), (8, 12)] {
            let e = estimate_composite_fidelity(&recs, m1, m2).unwrap();
            assert!((e.value - 0.9).abs() < 1e-12);
            assert!(e.std_error < 1e-12);
            assert_eq!(e.pauli_set_size, 3);
        }
    }

    #[test]
    fn identity_term_is_one() {
        let mut recs = geometric(&["XZ"], 0.9, &[4, 8], 3);
        recs.extend(geometric(&["II"], 0.5, &[4, 8], 3));
        let e = estimate_composite_fidelity(&recs, 4, 8).unwrap();
        assert!((e.value - 0.95).abs() < 1e-12);
        assert_eq!(e.per_pauli[&p("II")], 1.0);
    }

    #[test]
    fn noiseless_records_give_one() {
        let recs = geometric(&["X", "Y", "Z"], 1.0, &[1, 2], 4);
        let e = estimate_composite_fidelity(&recs, 1, 2).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn exclusion_of_vanishing_denominators() {
        let mut recs = geometric(&["XZ"], 0.9, &[4, 8], 10);
        recs.extend(geometric(&["ZZ"], 0.1, &[4, 8], 10));
        recs.extend((0..10).map(|l| rec("XX", 4, l, 0.5)));
        recs.extend((0..10).map(|l| rec("XX", 8, l, -0.2)));
        let e = estimate_composite_fidelity(&recs, 4, 8).unwrap();
        assert_eq!(e.excluded.len(), 2);
        assert!((e.value - 0.9).abs() < 1e-12);
        let only_bad = geometric(&["ZZ"], 0.1, &[4, 8], 10);
        assert!(estimate_composite_fidelity(&only_bad, 4, 8).is_err());
    }

    #[test]
    fn missing_lengths_and_bad_pairs() {
        let mut recs = geometric(&["XZ"], 0.9, &[4, 8], 2);
        recs.push(rec("ZZ", 4, 0, 0.9));
        assert!(matches!(estimate_composite_fidelity(&recs, 4, 8), Err(CbError::MissingRecords(_))));
        assert!(estimate_composite_fidelity(&recs, 8, 4).is_err());
        assert!(estimate_composite_fidelity(&[], 4, 8).is_err());
    }

    #[test]
    fn duplicate_draws_are_weighted_by_randomizations() {
        // XZ drawn twice (20 randomizations), ZZ once.
        let mut recs = geometric(&["XZ"], 0.9, &[4, 8], 20);
        recs.extend(geometric(&["ZZ"], 0.6, &[4, 8], 10));
        let e = estimate_composite_fidelity(&recs, 4, 8).unwrap();
        assert!((e.value - (2.0 * 0.9 + 0.6) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_is_deterministic_and_positive() {
        let mut recs = Vec::new();
        for (i, q) in ["XZ", "YY", "ZI", "XX"].iter().enumerate() {
            for &m in &[4usize, 8] {
                for l in 0..6 {
                    let jitter = 0.01 * ((i * 7 + l * 3 + m) % 5) as f64;
                    recs.push(rec(q, m, l, 0.95f64.powi(m as i32) - jitter));
                }
            }
        }
        let a = estimate_composite_fidelity(&recs, 4, 8).unwrap();
        let b = estimate_composite_fidelity(&recs, 4, 8).unwrap();
        assert_eq!(a, b);
        assert!(a.std_error > 0.0);
        let opts = EstimateOptions { mode: BootstrapMode::SequencesOnly, ..Default::default() };
        let c = estimate_with(&recs, 4, 8, &opts).unwrap();
        assert!(c.std_error > 0.0 && c.std_error < a.std_error);
    }

    #[test]
    fn ratio_examples() {
        let r = interleaved_ratio(
            &FidelityEstimate::from_value(0.943, 0.001, 4),
            &FidelityEstimate::from_value(0.9725, 0.0008, 4),
        )
        .unwrap();
        assert!((r.value - 0.9697).abs() < 1e-4);
        assert!(r.systematic_caveat);
        let same = FidelityEstimate::from_value(0.9, 0.01, 2);
        assert_eq!(interleaved_ratio(&same, &same).unwrap().value, 1.0);
        assert!(interleaved_ratio(&same, &FidelityEstimate::from_value(0.0, 0.0, 2)).is_err());
        assert!(interleaved_ratio(&same, &FidelityEstimate::from_value(0.9, 0.0, 4)).is_err());
    }

    #[test]
    fn variance_bound_examples() {
        assert_eq!(variance_bound(1.0, 5).unwrap(), 0.0);
        assert!((variance_bound(0.9725, 100).unwrap() - 0.00275).abs() < 1e-15);
        let a = variance_bound(0.9, 10).unwrap();
        let b = variance_bound(0.9, 40).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!(variance_bound(1.2, 1).is_err());
        assert!(variance_bound(0.5, 0).is_err());
    }

    #[test]
    fn scaling_fits() {
        let pts: Vec<_> = [2usize, 4, 6, 8, 10]
            .iter()
            .map(|&n| ScalingPoint { n_qubits: n, fidelity: 1.0 - 0.01 * n as f64, std_error: 0.001 })
            .collect();
        let fits = fit_scaling(&pts, ScalingModel::LinearLocal).unwrap();
        assert!((fits.unweighted.coefficient - 0.01).abs() < 1e-15);
        assert!((fits.inverse_variance.unwrap().coefficient - 0.01).abs() < 1e-15);
        assert!(fit_scaling(&pts[..1], ScalingModel::LinearLocal).is_err());
        let same = vec![pts[0].clone(), pts[0].clone()];
        assert!(fit_scaling(&same, ScalingModel::LinearLocal).is_err());
    }

    #[test]
    fn gap_vanishes_for_uniform_pauli_noise() {
        let g = CliffordCycle::ms(2).unwrap();
        let e = PauliErrorChannel::depolarizing(2, 0.05).unwrap();
        let gap = estimator_gap(&g, &e, 4, 8).unwrap();
        assert!(gap.gap.abs() < 1e-14);
        let ident = estimator_gap(&g, &PauliErrorChannel::identity(2), 4, 8).unwrap();
        assert_eq!((ident.expected, ident.f_rc, ident.gap), (1.0, 1.0, 0.0));
        assert!(gap.within_bounds(1e-12));
    }

    #[test]
    fn subset_convergence_full_set_has_no_spread() {
        let names: Vec<String> = PauliOperator::all(2).skip(1).map(|q| q.to_string()).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut recs = Vec::new();
        for (i, q) in refs.iter().enumerate() {
            recs.extend(geometric(&[q], 0.9 + 0.005 * i as f64, &[2, 4], 2));
        }
        let s = subset_convergence(&recs, 2, 4, &[15, 3], 10, 0).unwrap();
        assert_eq!(s.rows[0].std, 0.0);
        assert!(s.rows[1].std > 0.0);
        assert!((s.rows[0].mean - s.full_estimate).abs() < 1e-12);
        assert!(subset_convergence(&recs, 2, 4, &[16], 10, 0).is_err());
    }

    #[test]
    fn decay_curve_points() {
        let recs = geometric(&["XZ", "ZI"], 0.9, &[4, 8], 3);
        let pts = decay_curves(&recs);
        assert_eq!(pts.len(), 4);
        assert!((pts[0].mean_f - 0.9f64.powi(4)).abs() < 1e-12);
        assert_eq!(pts[0].count, 3);
    }
}

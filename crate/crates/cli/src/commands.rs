use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use cyclebench::estimator::{
    decay_curves, estimate_with, fit_scaling, interleaved_ratio, length_consistency, split_by_cycle,
    subset_convergence, variance_bound, BootstrapMode, EstimateOptions, FidelityEstimate, LengthConsistency,
    RatioEstimate, ScalingFits, ScalingModel, ScalingPoint, SubsetConvergence,
};
use cyclebench::protocol::{compile_experiments, Bundle, CbConfig};
use cyclebench::simulator::{read_records, run_bundle, write_records, Backend, DecayRecord, NoiseModel};

use crate::error::{CliError, StageExt};
use crate::manifest::{manifest_path_for, now, RunManifest};

/// A config file holds one experiment or a list run together.
#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    One(CbConfig),
    Many(Vec<CbConfig>),
}

pub fn read_input(path: &Path, stage: &str) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::validation(stage, format!("cannot read {}: {e}", path.display())))
}

fn create_output(path: &Path, stage: &str) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::runtime(stage, format!("cannot create {}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(stage, format!("cannot create {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize, pretty: bool, stage: &str) -> Result<(), CliError> {
    let mut w = create_output(path, stage)?;
    let res = if pretty { serde_json::to_writer_pretty(&mut w, value) } else { serde_json::to_writer(&mut w, value) };
    res.map_err(|e| CliError::runtime(stage, e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::runtime(stage, e.to_string()))
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T], stage: &str) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create_output(path, stage)?);
    for row in rows {
        w.serialize(row).map_err(|e| CliError::runtime(stage, e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::runtime(stage, e.to_string()))
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

/// Reads configs, applying command-line overrides.
pub fn load_configs(path: &Path, seed: Option<u64>, exhaustive: bool) -> Result<Vec<CbConfig>, CliError> {
    let bytes = read_input(path, "config")?;
    let parsed: ConfigFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::validation("config", format!("malformed config {}: {e}", path.display())))?;
    let mut configs = match parsed {
        ConfigFile::One(c) => vec![c],
        ConfigFile::Many(v) => v,
    };
    if configs.is_empty() {
        return Err(CliError::validation("config", "config list is empty"));
    }
    for c in &mut configs {
        if let Some(s) = seed {
            c.seed = s;
        }
        c.exhaustive_paulis |= exhaustive;
        c.validate().stage("config")?;
    }
    Ok(configs)
}

pub fn load_noise(path: Option<&Path>) -> Result<NoiseModel, CliError> {
    match path {
        None => Ok(NoiseModel::noiseless()),
        Some(p) => serde_json::from_slice(&read_input(p, "noise")?)
            .map_err(|e| CliError::validation("noise", format!("malformed noise model {}: {e}", p.display()))),
    }
}

fn load_bundle(path: &Path) -> Result<Bundle, CliError> {
    serde_json::from_slice(&read_input(path, "bundle")?)
        .map_err(|e| CliError::validation("bundle", format!("malformed bundle {}: {e}", path.display())))
}

fn load_records(path: &Path) -> Result<Vec<DecayRecord>, CliError> {
    read_records(read_input(path, "records")?.as_slice()).stage("records")
}

/// `a..b` (inclusive) or a comma-separated list.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>, String> {
    let num = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("bad size {s:?}: {e}"));
    if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(format!("empty range {text}"));
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(num).collect()
}

// ---------------------------------------------------------------- generate

pub struct GenerateArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub exhaustive_paulis: bool,
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let started = now();
    let configs = load_configs(&args.config, args.seed, args.exhaustive_paulis)?;
    let bundle = compile_experiments(&configs).stage("generate")?;
    write_json(&args.out, &bundle, false, "write")?;

    let mut manifest = RunManifest::new("generate", &configs, configs[0].seed, json!({ "configs": configs }), started);
    manifest.input(&args.config)?;
    manifest.output(&args.out)?;
    manifest.write(&manifest_path_for(&args.out))?;
    eprintln!("wrote {} circuits to {}", bundle.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------- simulate

pub struct SimulateArgs {
    pub bundle: PathBuf,
    pub noise: Option<PathBuf>,
    pub shots: u64,
    pub seed: u64,
    pub backend: Backend,
    pub out: PathBuf,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let started = now();
    if args.shots == 0 {
        return Err(CliError::validation("simulate", "--shots must be at least 1"));
    }
    let bundle = load_bundle(&args.bundle)?;
    let noise = load_noise(args.noise.as_deref())?;
    let records = run_bundle(&bundle, &noise, args.shots, args.backend, args.seed).stage("simulate")?;
    write_records(create_output(&args.out, "write")?, &records).stage("write")?;

    let params = json!({ "noise": noise, "shots": args.shots, "backend": args.backend });
    let mut manifest = RunManifest::new("simulate", &params, args.seed, params.clone(), started);
    manifest.input(&args.bundle)?;
    if let Some(p) = &args.noise {
        manifest.input(p)?;
    }
    manifest.output(&args.out)?;
    manifest.write(&manifest_path_for(&args.out))?;
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------- analyze

#[derive(Clone, Debug, Serialize)]
pub struct CycleAnalysis {
    pub estimate: FidelityEstimate,
    /// Present when more than two lengths were measured.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length_consistency: Option<LengthConsistency>,
}

/// Estimates keyed by cycle, and dressed-to-local ratios when the identity
/// cycle was measured alongside others.
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub estimates: BTreeMap<String, CycleAnalysis>,
    pub ratios: BTreeMap<String, RatioEstimate>,
}

pub struct AnalyzeArgs {
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub options: EstimateOptions,
}

fn lengths_of(records: &[DecayRecord]) -> Vec<usize> {
    let mut ms: Vec<usize> = records.iter().map(|r| r.m).collect();
    ms.sort_unstable();
    ms.dedup();
    ms
}

fn length_pair(records: &[DecayRecord], m1: Option<usize>, m2: Option<usize>) -> Result<(usize, usize), CliError> {
    let ms = lengths_of(records);
    let m1 = m1.or(ms.first().copied());
    let m2 = m2.or(ms.last().copied());
    match (m1, m2) {
        (Some(a), Some(b)) if a < b => Ok((a, b)),
        _ => Err(CliError::validation("analyze", format!("need two distinct lengths, records have {ms:?}"))),
    }
}

pub fn analyze_records(records: &[DecayRecord], args: &AnalyzeArgs) -> Result<AnalysisReport, CliError> {
    if records.is_empty() {
        return Err(CliError::validation("analyze", "no decay records"));
    }
    let mut estimates = BTreeMap::new();
    for (cycle, recs) in split_by_cycle(records) {
        let (m1, m2) = length_pair(&recs, args.m1, args.m2)?;
        let estimate = estimate_with(&recs, m1, m2, &args.options).stage("analyze")?;
        let ms = lengths_of(&recs);
        let length_consistency = if ms.len() > 2 {
            let pairs: Vec<(usize, usize)> =
                ms.iter().enumerate().flat_map(|(i, &a)| ms[i + 1..].iter().map(move |&b| (a, b))).collect();
            Some(length_consistency(&recs, &pairs, &args.options).stage("analyze")?)
        } else {
            None
        };
        estimates.insert(cycle, CycleAnalysis { estimate, length_consistency });
    }
    let mut ratios = BTreeMap::new();
    if let Some(local) = estimates.get("identity").map(|a| a.estimate.clone()) {
        for (cycle, a) in &estimates {
            if cycle != "identity" && a.estimate.n_qubits == local.n_qubits {
                ratios.insert(cycle.clone(), interleaved_ratio(&a.estimate, &local).stage("analyze")?);
            }
        }
    }
    Ok(AnalysisReport { estimates, ratios })
}

pub struct AnalyzeFiles {
    pub records: PathBuf,
    pub out: Option<PathBuf>,
    pub curves: Option<PathBuf>,
}

pub fn analyze(files: &AnalyzeFiles, args: &AnalyzeArgs) -> Result<(), CliError> {
    let records = load_records(&files.records)?;
    let report = analyze_records(&records, args)?;
    if let Some(path) = &files.curves {
        write_csv_rows(path, &decay_curves(&records), "write")?;
    }
    match &files.out {
        Some(path) => write_json(path, &report, true, "write"),
        None => {
            print_json(&report);
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- subsample

pub struct SubsampleArgs {
    pub records: PathBuf,
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub cycle: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SubsampleReport {
    cycle: String,
    length_pair: (usize, usize),
    /// `1 − F̂`, the ceiling on `c` for any Pauli set.
    c_bound: f64,
    #[serde(flatten)]
    convergence: SubsetConvergence,
}

pub fn subsample(args: &SubsampleArgs) -> Result<(), CliError> {
    let records = load_records(&args.records)?;
    let mut by_cycle = split_by_cycle(&records);
    let (cycle, recs) = match &args.cycle {
        Some(c) => by_cycle
            .remove_entry(c)
            .ok_or_else(|| CliError::validation("subsample", format!("no records for cycle {c:?}")))?,
        None if by_cycle.len() == 1 => by_cycle.pop_first().expect("one cycle"),
        None => {
            let names: Vec<_> = by_cycle.keys().cloned().collect();
            return Err(CliError::validation(
                "subsample",
                format!("records hold cycles {names:?}; pick one with --cycle"),
            ));
        }
    };
    let (m1, m2) = length_pair(&recs, args.m1, args.m2)?;
    let convergence = subset_convergence(&recs, m1, m2, &args.sizes, args.trials, args.seed).stage("subsample")?;
    let c_bound = variance_bound(convergence.full_estimate.clamp(0.0, 1.0), 1).stage("subsample")?;
    if let Some(path) = &args.out {
        write_csv_rows(path, &convergence.rows, "write")?;
    }
    print_json(&SubsampleReport { cycle, length_pair: (m1, m2), c_bound, convergence });
    Ok(())
}

// ---------------------------------------------------------------- scaling

pub fn scaling(points: &Path, model: ScalingModel, out: Option<&Path>) -> Result<(), CliError> {
    let bytes = read_input(points, "scaling")?;
    let parsed: Vec<ScalingPoint> = csv::Reader::from_reader(bytes.as_slice())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::validation("scaling", format!("malformed points {}: {e}", points.display())))?;
    let fits: ScalingFits = fit_scaling(&parsed, model).stage("scaling")?;
    match out {
        Some(path) => write_json(path, &fits, true, "write"),
        None => {
            print_json(&fits);
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- pipeline

pub struct PipelineArgs {
    pub config: PathBuf,
    pub noise: Option<PathBuf>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub backend: Backend,
    pub out_dir: PathBuf,
    pub exhaustive_paulis: bool,
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub resamples: usize,
}

/// Generate, simulate and analyze in one run. The shot streams use the first
/// config's seed; their keys never collide with the sequence streams.
pub fn pipeline(args: &PipelineArgs) -> Result<(), CliError> {
    let started = now();
    let configs = load_configs(&args.config, args.seed, args.exhaustive_paulis)?;
    let noise = load_noise(args.noise.as_deref())?;
    let seed = configs[0].seed;
    let shots = args.shots.unwrap_or(configs[0].shots_per_sequence as u64);
    if shots == 0 {
        return Err(CliError::validation("config", "--shots must be at least 1"));
    }
    let mode = if configs.iter().all(|c| c.exhaustive_paulis) {
        BootstrapMode::SequencesOnly
    } else {
        BootstrapMode::PaulisAndSequences
    };

    let bundle = compile_experiments(&configs).stage("generate")?;
    let records = run_bundle(&bundle, &noise, shots, args.backend, seed).stage("simulate")?;
    let analyze_args =
        AnalyzeArgs { m1: args.m1, m2: args.m2, options: EstimateOptions { resamples: args.resamples, seed, mode } };
    let report = analyze_records(&records, &analyze_args)?;

    let dir = &args.out_dir;
    let bundle_path = dir.join("bundle.json");
    let records_path = dir.join("records.csv");
    let estimate_path = dir.join("estimate.json");
    let curves_path = dir.join("decay_curves.csv");
    write_json(&bundle_path, &bundle, false, "write")?;
    write_records(create_output(&records_path, "write")?, &records).stage("write")?;
    write_json(&estimate_path, &report, true, "write")?;
    write_csv_rows(&curves_path, &decay_curves(&records), "write")?;

    let params = json!({
        "configs": configs,
        "noise": noise,
        "shots": shots,
        "backend": args.backend,
        "m1": args.m1,
        "m2": args.m2,
        "resamples": args.resamples,
        "bootstrap": mode,
    });
    let mut manifest = RunManifest::new("pipeline", &params, seed, params.clone(), started);
    manifest.input(&args.config)?;
    if let Some(p) = &args.noise {
        manifest.input(p)?;
    }
    for p in [&bundle_path, &records_path, &estimate_path, &curves_path] {
        manifest.output(p)?;
    }
    manifest.write(&dir.join("manifest.json"))?;

    for (cycle, a) in &report.estimates {
        eprintln!("{cycle}: F = {:.5} ± {:.5}", a.estimate.value, a.estimate.std_error);
    }
    Ok(())
}

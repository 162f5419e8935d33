//! Output artifacts: CSV tables, JSON summaries and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{ExpFit, Histogram, MemoryResult, SpectralMap};
use crate::pulses::{ExperimentProtocol, CONFIG_SCHEMA_VERSION};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Per-bin σ floor for z-scores: √max(expected, 1).
const Z_FLOOR: f64 = 1.0;
/// Expected totals below this are flagged as too few counts to judge.
pub const MIN_EXPECTED_TOTAL: f64 = 1000.0;

/// SHA-256 of the canonical config text.
pub fn config_hash(protocol: &ExperimentProtocol) -> String {
    hex::encode(Sha256::digest(protocol.to_config_string().as_bytes()))
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("time_ns,counts_sigma_plus,counts_sigma_minus\n");
    for k in 0..h.len() {
        let _ = writeln!(out, "{},{},{}", h.edge(k), h.sigma_plus[k], h.sigma_minus[k]);
    }
    out
}

pub fn spectral_csv(map: &SpectralMap) -> String {
    let mut out = String::from("bias_V,energy_ueV,intensity\n");
    for (v, row) in map.biases.iter().zip(&map.intensity) {
        for (e, x) in map.energies.iter().zip(row) {
            let _ = writeln!(out, "{v:.6},{e},{x:.6e}");
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    Master,
    Kmc,
    Both,
}

impl EngineChoice {
    pub fn label(self) -> &'static str {
        match self {
            EngineChoice::Master => "master",
            EngineChoice::Kmc => "kmc",
            EngineChoice::Both => "both",
        }
    }
}

/// Identifies an output set. Holds no timestamps, so identical invocations
/// write identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub config_hash: String,
    pub seed: u64,
    pub cycles: u64,
    pub engine: EngineChoice,
    pub output_dir: String,
    pub tool_version: String,
    pub config_schema_version: u32,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config_path: &Path,
        protocol: &ExperimentProtocol,
        engine: EngineChoice,
        output_dir: &Path,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            config_path: config_path.display().to_string(),
            config_hash: config_hash(protocol),
            seed: protocol.seed,
            cycles: protocol.cycles,
            engine,
            output_dir: output_dir.display().to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_schema_version: CONFIG_SCHEMA_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome<T> {
    pub value: Option<T>,
    pub error: Option<String>,
}

impl<T, E: std::fmt::Display> From<Result<T, E>> for Outcome<T> {
    fn from(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Outcome {
                value: Some(v),
                error: None,
            },
            Err(e) => Outcome {
                value: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Observables of one engine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineSummary {
    pub engine: &'static str,
    pub histogram_file: String,
    pub total_counts: f64,
    pub read_window_ns: (f64, f64),
    pub fit_window_ns: (f64, f64),
    pub memory_degree: Outcome<MemoryResult>,
    pub lifetime: Outcome<ExpFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub cycles: u64,
    pub species: String,
    pub results: Vec<EngineSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareBin {
    pub time_ns: f64,
    pub expected_sigma_plus: f64,
    pub observed_sigma_plus: f64,
    pub z_sigma_plus: f64,
    pub expected_sigma_minus: f64,
    pub observed_sigma_minus: f64,
    pub z_sigma_minus: f64,
}

/// KMC histogram against the master-equation expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub config_hash: String,
    pub seed: u64,
    pub cycles: u64,
    pub bin_width_ns: f64,
    pub expected_total: f64,
    pub observed_total: f64,
    pub relative_l2: f64,
    pub max_abs_z: f64,
    pub insufficient_statistics: bool,
    pub bins: Vec<CompareBin>,
}

impl CompareReport {
    pub fn new(protocol: &ExperimentProtocol, cycles: u64, seed: u64, expected: &Histogram, observed: &Histogram) -> Self {
        assert_eq!(expected.len(), observed.len(), "histograms share one binning");
        let z = |o: f64, e: f64| (o - e) / e.max(Z_FLOOR).sqrt();
        let mut num = 0.0;
        let mut den = 0.0;
        let mut max_abs_z: f64 = 0.0;
        let bins: Vec<CompareBin> = (0..expected.len())
            .map(|k| {
                let (ep, op) = (expected.sigma_plus[k], observed.sigma_plus[k]);
                let (em, om) = (expected.sigma_minus[k], observed.sigma_minus[k]);
                num += (op - ep).powi(2) + (om - em).powi(2);
                den += ep * ep + em * em;
                let b = CompareBin {
                    time_ns: expected.edge(k),
                    expected_sigma_plus: ep,
                    observed_sigma_plus: op,
                    z_sigma_plus: z(op, ep),
                    expected_sigma_minus: em,
                    observed_sigma_minus: om,
                    z_sigma_minus: z(om, em),
                };
                max_abs_z = max_abs_z.max(b.z_sigma_plus.abs()).max(b.z_sigma_minus.abs());
                b
            })
            .collect();
        let expected_total = expected.total();
        CompareReport {
            config_hash: config_hash(protocol),
            seed,
            cycles,
            bin_width_ns: expected.bin_width,
            expected_total,
            observed_total: observed.total(),
            relative_l2: if den > 0.0 { (num / den).sqrt() } else { 0.0 },
            max_abs_z,
            insufficient_statistics: expected_total < MIN_EXPECTED_TOTAL,
            bins,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    fs::write(dir.join(name), contents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentProtocol::storage_replica(600.0);
        let b = ExperimentProtocol::storage_replica(600.0);
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
        let c = ExperimentProtocol::storage_replica(400.0);
        assert_ne!(config_hash(&a), config_hash(&c));
    }

    #[test]
    fn histogram_csv_layout() {
        let mut h = Histogram::zeros((0.0, 3.0), 1.0, 1);
        h.sigma_plus[1] = 4.0;
        let csv = histogram_csv(&h);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "time_ns,counts_sigma_plus,counts_sigma_minus");
        assert_eq!(lines[2], "1,4,0");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn compare_flags_low_counts() {
        let p = ExperimentProtocol::storage_replica(600.0);
        let mut e = Histogram::zeros((0.0, 2.0), 1.0, 10);
        e.sigma_plus = vec![3.0, 1.0];
        let o = e.clone();
        let r = CompareReport::new(&p, 10, 0, &e, &o);
        assert!(r.insufficient_statistics);
        assert_eq!(r.relative_l2, 0.0);
        assert_eq!(r.max_abs_z, 0.0);
    }
}

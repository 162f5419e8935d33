//! Timed experiment protocol: write pulses, bias waveform and everything a
//! run needs, plus the line-oriented config format that describes it.

mod config;
mod waveform;

pub use config::{parse_protocol, ConfigError, CONFIG_SCHEMA_VERSION};
pub use waveform::{AcPulse, BiasWaveform, LaserPulse, PumpPolarization, WaveformError};

use crate::analysis::AnalysisSettings;
use crate::engine::RateParams;
use crate::levels::{DotState, EnergyTable};
use crate::optics::{Analyzer, DetectorModel};

/// The full schedule and parameter set of one memory experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentProtocol {
    /// Laser repetition period (ns).
    pub period_ns: f64,
    pub cycles: u64,
    pub seed: u64,
    /// Master-equation step (ns).
    pub dt_ns: f64,
    pub lasers: Vec<LaserPulse>,
    pub waveform: BiasWaveform,
    pub energies: EnergyTable,
    pub rates: RateParams,
    pub analyzer: Analyzer,
    pub detector: DetectorModel,
    /// Dot configuration at the start of every cycle.
    pub initial_state: DotState,
    pub analysis: AnalysisSettings,
}

impl ExperimentProtocol {
    /// A protocol with one period, no pulses and default physics.
    pub fn new(period_ns: f64) -> Self {
        ExperimentProtocol {
            period_ns,
            cycles: 1000,
            seed: 0,
            dt_ns: 0.01,
            lasers: Vec::new(),
            waveform: BiasWaveform::constant(-0.05),
            energies: EnergyTable::default(),
            rates: RateParams::default(),
            analyzer: Analyzer::default(),
            detector: DetectorModel::default(),
            initial_state: DotState::VACUUM,
            analysis: AnalysisSettings::default(),
        }
    }

    /// Write pulse at t = 0 and one read pulse: the storage experiment at a
    /// 1 MHz repetition rate.
    pub fn storage_replica(read_delay_ns: f64) -> Self {
        let mut p = ExperimentProtocol::new(1000.0);
        p.lasers.push(LaserPulse::new(0.0, PumpPolarization::R, 0.3));
        p.waveform = BiasWaveform::new(
            -0.05,
            vec![AcPulse {
                start_ns: read_delay_ns,
                duration_ns: 30.0,
                amplitude_v: 1.5,
                rise_ns: AcPulse::DEFAULT_RISE_NS,
            }],
        )
        .expect("replica waveform is valid");
        p
    }

    /// Start of the first read pulse, if any.
    pub fn read_delay_ns(&self) -> Option<f64> {
        self.waveform.pulses().first().map(|p| p.start_ns)
    }

    pub fn bias_at(&self, t: f64) -> f64 {
        self.waveform.bias_at(t)
    }

    /// Checks cross-field invariants; parsing already validated each field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        config::validate_protocol(self, &Default::default())
    }

    /// Canonical config text; parsing it yields an identical protocol.
    pub fn to_config_string(&self) -> String {
        config::serialize(self)
    }
}

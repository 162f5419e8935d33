//! Time-dependent rate generator and the two ways of evolving it: fixed-step
//! master-equation integration and kinetic Monte Carlo with thinning.

mod generator;
mod inject;
mod kmc;
mod master;
mod rates;
mod shots;
mod steady;

pub use generator::{build_generator, BiasRates, Jump, Kinetics, Process, RateMatrix};
pub use inject::{inject_distribution, inject_state, plus_pair_probability};
pub use kmc::{simulate_shot, KmcError, Shot, Simulator};
pub use master::{evolve_master, MasterError, Trajectory, STABILITY_LIMIT};
pub use rates::{CaptureModel, RateError, RateParams, TunnelModel};
pub use shots::{cycle_rng, detector_rng, run_shots, run_shots_with, Execution, ShotRun, ShotSummary};
pub use steady::{steady_state, SteadyError, SteadyState};

use serde::Serialize;

use crate::levels::{Helicity, RadiativeSpecies};

/// One emitted photon. `time_ns` is absolute within the run: cycle `k`
/// covers `[k·period, (k + 1)·period)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhotonEvent {
    pub time_ns: f64,
    pub cycle: u64,
    pub species: RadiativeSpecies,
    pub helicity: Helicity,
    pub energy_uev: f64,
}

impl PhotonEvent {
    /// Emission time relative to the start of its cycle.
    pub fn local_time(&self, period_ns: f64) -> f64 {
        self.time_ns - self.cycle as f64 * period_ns
    }
}

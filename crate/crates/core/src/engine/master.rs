//! Fixed-step RK4 integration of dp/dt = Q(V(t))·p over one period.

use thiserror::Error;

use super::generator::{BiasRates, Kinetics, Process};
use super::inject::inject_distribution;
use crate::levels::{DotState, NUM_EMISSION_CHANNELS, NUM_STATES};
use crate::pulses::ExperimentProtocol;

/// Largest accepted dt × (fastest exit rate).
pub const STABILITY_LIMIT: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum MasterError {
    #[error("time step must be > 0, got {0}")]
    NonPositiveStep(f64),
    #[error("initial populations sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error(
        "stability guard: dt·rate = {product:.3} > {limit} for {process} out of {state} (rate {rate:.4} ns⁻¹)"
    )]
    Unstable {
        process: &'static str,
        state: DotState,
        rate: f64,
        product: f64,
        limit: f64,
    },
}

/// Populations and radiative fluxes on the integration grid. Flux and
/// cumulative emission are indexed by `emission_channel`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub populations: Vec<[f64; NUM_STATES]>,
    pub flux: Vec<[f64; NUM_EMISSION_CHANNELS]>,
    pub cumulative: Vec<[f64; NUM_EMISSION_CHANNELS]>,
}

impl Trajectory {
    pub fn final_populations(&self) -> &[f64; NUM_STATES] {
        self.populations.last().expect("trajectory has at least one point")
    }

    /// Cumulative emission per channel at `t`, linearly interpolated.
    pub fn cumulative_at(&self, t: f64) -> [f64; NUM_EMISSION_CHANNELS] {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.cumulative[0];
        }
        if t >= self.times[n - 1] {
            return self.cumulative[n - 1];
        }
        let k = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        let (a, b) = (&self.cumulative[k - 1], &self.cumulative[k]);
        std::array::from_fn(|c| a[c] + w * (b[c] - a[c]))
    }

    /// Expected photons per cycle in each channel emitted within `[a, b)`.
    pub fn emitted_between(&self, a: f64, b: f64) -> [f64; NUM_EMISSION_CHANNELS] {
        let (ca, cb) = (self.cumulative_at(a), self.cumulative_at(b));
        std::array::from_fn(|c| cb[c] - ca[c])
    }
}

fn check_stability(kin: &Kinetics, protocol: &ExperimentProtocol, dt: f64) -> Result<(), MasterError> {
    let (lo, hi) = protocol.waveform.bias_range(0.0, protocol.period_ns);
    let sup = BiasRates::sup(kin.params(), lo, hi);
    let mut worst: Option<(usize, f64)> = None;
    for i in 0..NUM_STATES {
        let r = kin.exit_rate(i, &sup);
        if worst.is_none_or(|(_, w)| r > w) {
            worst = Some((i, r));
        }
    }
    let (state, rate) = worst.expect("sixteen states");
    if dt * rate > STABILITY_LIMIT {
        let dominant = kin
            .jumps_from(state)
            .iter()
            .max_by(|a, b| a.rate(&sup).total_cmp(&b.rate(&sup)))
            .map(|j| j.process)
            .unwrap_or(Process::Generation);
        return Err(MasterError::Unstable {
            process: dominant.label(),
            state: DotState::from_index(state).expect("index in range"),
            rate,
            product: dt * rate,
            limit: STABILITY_LIMIT,
        });
    }
    Ok(())
}

/// Integration grid: multiples of dt plus every laser time and pulse edge.
fn time_grid(protocol: &ExperimentProtocol, dt: f64) -> Vec<f64> {
    let period = protocol.period_ns;
    let n = (period / dt).ceil() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| (k as f64 * dt).min(period)).collect();
    grid.extend(protocol.lasers.iter().map(|l| l.time_ns));
    grid.extend(protocol.waveform.breakpoints().into_iter().filter(|&t| t > 0.0 && t < period));
    grid.sort_by(f64::total_cmp);
    let tol = 1e-9 * dt;
    grid.dedup_by(|b, a| (*b - *a).abs() <= tol);
    grid
}

const STATE_LEN: usize = NUM_STATES + NUM_EMISSION_CHANNELS;

fn rhs(kin: &Kinetics, protocol: &ExperimentProtocol, t: f64, y: &[f64; STATE_LEN]) -> [f64; STATE_LEN] {
    let r = kin.bias_rates(protocol.bias_at(t));
    let p: &[f64; NUM_STATES] = y[..NUM_STATES].try_into().expect("slice length");
    let mut dp = [0.0; NUM_STATES];
    let mut flux = [0.0; NUM_EMISSION_CHANNELS];
    kin.derivative(&r, p, &mut dp, &mut flux);
    let mut out = [0.0; STATE_LEN];
    out[..NUM_STATES].copy_from_slice(&dp);
    out[NUM_STATES..].copy_from_slice(&flux);
    out
}

fn axpy(y: &[f64; STATE_LEN], h: f64, k: &[f64; STATE_LEN]) -> [f64; STATE_LEN] {
    std::array::from_fn(|i| y[i] + h * k[i])
}

fn instantaneous_flux(kin: &Kinetics, protocol: &ExperimentProtocol, t: f64, y: &[f64; STATE_LEN]) -> [f64; NUM_EMISSION_CHANNELS] {
    rhs(kin, protocol, t, y)[NUM_STATES..].try_into().expect("slice length")
}

/// Integrates one period from `p0`, injecting at each laser time. The
/// populations recorded at a laser time are the post-injection ones.
pub fn evolve_master(p0: &[f64; NUM_STATES], protocol: &ExperimentProtocol, dt: f64) -> Result<Trajectory, MasterError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(MasterError::NonPositiveStep(dt));
    }
    let total: f64 = p0.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(MasterError::NotNormalized(total));
    }
    let kin = Kinetics::new(&protocol.rates);
    check_stability(&kin, protocol, dt)?;

    let grid = time_grid(protocol, dt);
    let tol = 1e-9 * dt;
    let f = protocol.rates.write_fidelity;
    let inject_at = |t: f64, y: &mut [f64; STATE_LEN]| {
        for laser in protocol.lasers.iter().filter(|l| (l.time_ns - t).abs() <= tol) {
            let p: [f64; NUM_STATES] = y[..NUM_STATES].try_into().expect("slice length");
            y[..NUM_STATES].copy_from_slice(&inject_distribution(&p, laser, f));
        }
    };

    let mut y = [0.0; STATE_LEN];
    y[..NUM_STATES].copy_from_slice(p0);
    let mut traj = Trajectory {
        times: Vec::with_capacity(grid.len()),
        populations: Vec::with_capacity(grid.len()),
        flux: Vec::with_capacity(grid.len()),
        cumulative: Vec::with_capacity(grid.len()),
    };
    let record = |traj: &mut Trajectory, t: f64, y: &[f64; STATE_LEN]| {
        traj.times.push(t);
        traj.populations.push(y[..NUM_STATES].try_into().expect("slice length"));
        traj.flux.push(instantaneous_flux(&kin, protocol, t, y));
        traj.cumulative.push(y[NUM_STATES..].try_into().expect("slice length"));
    };

    inject_at(grid[0], &mut y);
    record(&mut traj, grid[0], &y);
    for w in grid.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        let k1 = rhs(&kin, protocol, t, &y);
        let k2 = rhs(&kin, protocol, t + h / 2.0, &axpy(&y, h / 2.0, &k1));
        let k3 = rhs(&kin, protocol, t + h / 2.0, &axpy(&y, h / 2.0, &k2));
        let k4 = rhs(&kin, protocol, t + h, &axpy(&y, h, &k3));
        for i in 0..STATE_LEN {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        inject_at(w[1], &mut y);
        record(&mut traj, w[1], &y);
    }
    Ok(traj)
}

//! Kinetic Monte Carlo over one cycle with time-dependent rates.
//!
//! Candidate jump times are drawn against a per-state rate bound that is
//! constant on short segments of the period and accepted with probability
//! (actual exit rate)/(bound). The bounds come from the bias extrema on each
//! segment, so the sampler is exact for the continuous edges.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use super::generator::{BiasRates, Kinetics, Process};
use super::inject::inject_state;
use super::shots::cycle_rng;
use super::PhotonEvent;
use crate::levels::{DotState, NUM_STATES};
use crate::pulses::ExperimentProtocol;

/// Edge segments are refined to this fraction of τ_rise ...
const EDGE_STEP: f64 = 0.5;
/// ... for this many τ_rise after every edge.
const EDGE_SPAN: f64 = 10.0;
const BOUND_MARGIN: f64 = 1.0 + 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum KmcError {
    #[error("degenerate protocol: every rate bound is zero while laser pulses are pending")]
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    t1: f64,
    bound: [f64; NUM_STATES],
}

/// Precomputed rate bounds for one protocol.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    protocol: &'a ExperimentProtocol,
    kinetics: Kinetics,
    segments: Vec<Segment>,
}

/// Events of one cycle and the state it ended in.
#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub events: Vec<PhotonEvent>,
    pub final_state: DotState,
}

fn segment_edges(protocol: &ExperimentProtocol) -> Vec<f64> {
    let period = protocol.period_ns;
    let mut edges = vec![0.0, period];
    for p in protocol.waveform.pulses() {
        for edge in [p.start_ns, p.end_ns()] {
            edges.push(edge);
            let step = EDGE_STEP * p.rise_ns;
            let n = (EDGE_SPAN / EDGE_STEP).ceil() as usize;
            edges.extend((1..=n).map(|k| edge + k as f64 * step));
        }
    }
    edges.retain(|&t| (0.0..=period).contains(&t));
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
}

impl<'a> Simulator<'a> {
    pub fn new(protocol: &'a ExperimentProtocol) -> Result<Self, KmcError> {
        let kinetics = Kinetics::new(&protocol.rates);
        let edges = segment_edges(protocol);
        let segments: Vec<Segment> = edges
            .windows(2)
            .map(|w| {
                let (lo, hi) = protocol.waveform.bias_range(w[0], w[1]);
                let sup = BiasRates::sup(&protocol.rates, lo, hi);
                Segment {
                    t1: w[1],
                    bound: std::array::from_fn(|i| kinetics.exit_rate(i, &sup) * BOUND_MARGIN),
                }
            })
            .collect();
        let silent = segments.iter().all(|s| s.bound.iter().all(|&b| b == 0.0));
        if silent && protocol.lasers.iter().any(|l| l.mean_pairs > 0.0) {
            return Err(KmcError::Degenerate);
        }
        Ok(Simulator {
            protocol,
            kinetics,
            segments,
        })
    }

    pub fn protocol(&self) -> &ExperimentProtocol {
        self.protocol
    }

    /// Injection times of this cycle, smeared uniformly over each pulse FWHM.
    fn injection_times<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(f64, usize)> {
        let last = self.protocol.period_ns * (1.0 - f64::EPSILON);
        let mut v: Vec<(f64, usize)> = self
            .protocol
            .lasers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let u: f64 = rng.random();
                ((l.time_ns + (u - 0.5) * l.fwhm_ns).clamp(0.0, last), i)
            })
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }

    /// Simulates cycle `cycle` from `start`, appending its photons to `out`.
    pub fn run_cycle<R: Rng + ?Sized>(
        &self,
        cycle: u64,
        start: DotState,
        rng: &mut R,
        out: &mut Vec<PhotonEvent>,
    ) -> DotState {
        let p = self.protocol;
        let offset = cycle as f64 * p.period_ns;
        let f = p.rates.write_fidelity;
        let injections = self.injection_times(rng);
        let mut next_inj = 0;
        let mut state = start.index();
        let mut t = 0.0;

        for seg in &self.segments {
            loop {
                let pending = injections.get(next_inj).filter(|(ti, _)| *ti < seg.t1);
                let stop = pending.map_or(seg.t1, |(ti, _)| *ti);
                let bound = seg.bound[state];
                let candidate = if bound > 0.0 {
                    t + Exp::new(bound).expect("positive bound").sample(rng)
                } else {
                    f64::INFINITY
                };
                if candidate >= stop {
                    t = stop;
                    match pending {
                        Some(&(_, laser)) => {
                            let s = DotState::from_index(state).expect("index in range");
                            state = inject_state(s, &p.lasers[laser], f, rng).index();
                            next_inj += 1;
                            continue;
                        }
                        None => break,
                    }
                }
                t = candidate;
                let bias = p.bias_at(t);
                let rates = BiasRates::at(&p.rates, bias);
                let u = rng.random::<f64>() * bound;
                let mut acc = 0.0;
                for j in self.kinetics.jumps_from(state) {
                    acc += j.rate(&rates);
                    if u < acc {
                        if let Process::Radiative(species, helicity) = j.process {
                            out.push(PhotonEvent {
                                time_ns: offset + t,
                                cycle,
                                species,
                                helicity,
                                energy_uev: p.energies.line_energy(species, helicity, bias),
                            });
                        }
                        state = j.to;
                        break;
                    }
                }
            }
        }
        DotState::from_index(state).expect("index in range")
    }
}

/// One cycle on its own RNG stream, starting from the protocol's initial
/// state.
pub fn simulate_shot(protocol: &ExperimentProtocol, cycle: u64, seed: u64) -> Result<Shot, KmcError> {
    let sim = Simulator::new(protocol)?;
    let mut rng = cycle_rng(seed, cycle);
    let mut events = Vec::new();
    let final_state = sim.run_cycle(cycle, protocol.initial_state, &mut rng, &mut events);
    Ok(Shot { events, final_state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::rates::{RateParams, TunnelModel};
    use crate::levels::Helicity;
    use crate::pulses::{LaserPulse, PumpPolarization};

    #[test]
    fn no_laser_no_photons() {
        let mut p = ExperimentProtocol::storage_replica(600.0);
        p.lasers.clear();
        for c in 0..200 {
            let shot = simulate_shot(&p, c, 1).unwrap();
            assert!(shot.events.is_empty());
        }
    }

    /// f = 1, no flips, strong pump: the stored e↓ is read out as exactly one
    /// σ⁺ photon, from either X_b⁺ or X⁺↓.
    #[test]
    fn deterministic_limit_emits_one_sigma_plus() {
        let mut p = ExperimentProtocol::storage_replica(600.0);
        p.rates = RateParams {
            write_fidelity: 1.0,
            ..p.rates.without_spin_flips()
        };
        p.lasers = vec![LaserPulse::new(0.0, PumpPolarization::R, 3.0)];
        let mut with_read = 0;
        for c in 0..300 {
            let shot = simulate_shot(&p, c, 5).unwrap();
            let read: Vec<_> = shot
                .events
                .iter()
                .filter(|e| e.local_time(p.period_ns) >= 600.0)
                .collect();
            assert!(read.len() <= 1);
            for e in &read {
                assert_eq!(e.helicity, Helicity::Plus);
            }
            with_read += read.len();
        }
        // P(pair) · P(hole leaves first) = 0.95 · 15/16
        assert!(with_read > 240, "{with_read}");
    }

    #[test]
    fn segments_cover_period() {
        let p = ExperimentProtocol::storage_replica(600.0);
        let e = segment_edges(&p);
        assert_eq!(e[0], 0.0);
        assert_eq!(*e.last().unwrap(), 1000.0);
        assert!(e.contains(&600.0) && e.contains(&630.0) && e.contains(&600.5));
    }

    #[test]
    fn degenerate_protocol_rejected() {
        let mut p = ExperimentProtocol::new(100.0);
        p.rates.hole_tunnel = TunnelModel::disabled();
        p.rates.capture.rate0 = 0.0;
        p.rates = p.rates.clone().without_spin_flips();
        p.rates.tau_x_ns = f64::INFINITY;
        p.rates.tau_xplus_ns = f64::INFINITY;
        p.rates.tau_xminus_ns = f64::INFINITY;
        p.rates.tau_x2_ns = f64::INFINITY;
        p.lasers.push(LaserPulse::new(0.0, PumpPolarization::R, 0.3));
        assert_eq!(Simulator::new(&p).unwrap_err(), KmcError::Degenerate);
    }

    #[test]
    fn photon_energy_matches_bias_at_emission() {
        let p = ExperimentProtocol::storage_replica(600.0);
        for c in 0..100 {
            for e in simulate_shot(&p, c, 9).unwrap().events {
                let v = p.bias_at(e.local_time(p.period_ns));
                assert_eq!(e.energy_uev, p.energies.line_energy(e.species, e.helicity, v));
            }
        }
    }
}

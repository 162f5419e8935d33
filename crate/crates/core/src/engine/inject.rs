//! Optical pair injection by a write pulse.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::levels::{DotState, Spin, NUM_STATES};
use crate::pulses::{LaserPulse, PumpPolarization};

/// The σ⁺-matched pair (e↓, h⇑) and the σ⁻-matched pair (e↑, h⇓).
const PLUS_PAIR: (Spin, Spin) = (Spin::Down, Spin::Up);
const MINUS_PAIR: (Spin, Spin) = (Spin::Up, Spin::Down);

/// Probability that one injection attempt creates the σ⁺-matched pair.
pub fn plus_pair_probability(polarization: PumpPolarization, fidelity: f64) -> f64 {
    match polarization {
        PumpPolarization::R => fidelity,
        PumpPolarization::L => 1.0 - fidelity,
        PumpPolarization::H | PumpPolarization::V | PumpPolarization::Unpolarized => 0.5,
    }
}

fn attempt(state: DotState, plus: bool) -> DotState {
    let (e, h) = if plus { PLUS_PAIR } else { MINUS_PAIR };
    state.add_pair(e, h).unwrap_or(state)
}

/// Applies one realisation of the pulse to a single state.
pub fn inject_state<R: Rng + ?Sized>(
    state: DotState,
    pulse: &LaserPulse,
    fidelity: f64,
    rng: &mut R,
) -> DotState {
    if pulse.mean_pairs <= 0.0 {
        return state;
    }
    let k = Poisson::new(pulse.mean_pairs)
        .expect("mean_pairs is validated positive and finite")
        .sample(rng) as u64;
    let p_plus = plus_pair_probability(pulse.polarization, fidelity);
    let mut s = state;
    for _ in 0..k {
        let saturated = s.add_pair(PLUS_PAIR.0, PLUS_PAIR.1).is_none()
            && s.add_pair(MINUS_PAIR.0, MINUS_PAIR.1).is_none();
        if saturated {
            break;
        }
        s = attempt(s, rng.random::<f64>() < p_plus);
    }
    s
}

fn single_attempt(p: &[f64; NUM_STATES], p_plus: f64) -> [f64; NUM_STATES] {
    let mut out = [0.0; NUM_STATES];
    for (i, &w) in p.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let s = DotState::from_index(i).expect("index in range");
        out[attempt(s, true).index()] += w * p_plus;
        out[attempt(s, false).index()] += w * (1.0 - p_plus);
    }
    out
}

/// Applies the pulse to a probability vector: the Poisson mixture over the
/// number of attempts of the single-attempt map.
pub fn inject_distribution(p: &[f64; NUM_STATES], pulse: &LaserPulse, fidelity: f64) -> [f64; NUM_STATES] {
    let mu = pulse.mean_pairs;
    if mu <= 0.0 {
        return *p;
    }
    let p_plus = plus_pair_probability(pulse.polarization, fidelity);
    let mut weight = (-mu).exp();
    let mut remaining = 1.0 - weight;
    let mut term = *p;
    let mut acc = term.map(|x| x * weight);
    let mut k = 0u32;
    while remaining > 1e-16 && k < 1_000 {
        k += 1;
        let next = single_attempt(&term, p_plus);
        let settled = next.iter().zip(&term).all(|(a, b)| (a - b).abs() <= 1e-16);
        if settled {
            // every further attempt is Pauli blocked
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += remaining * t;
            }
            return acc;
        }
        weight *= mu / k as f64;
        remaining -= weight;
        term = next;
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += weight * t;
        }
    }
    acc
}

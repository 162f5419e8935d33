//! Stationary distribution of the constant-bias generator.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::generator::{Kinetics, Process};
use super::rates::RateParams;
use crate::levels::{emission_channel, Helicity, RadiativeSpecies, NUM_EMISSION_CHANNELS, NUM_STATES};

const RESIDUAL_TOL: f64 = 1e-10;
const CONDITION_LIMIT: f64 = 1e14;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SteadyError {
    #[error("steady-state system is singular at {bias} V (condition estimate {condition:e})")]
    Singular { bias: f64, condition: f64 },
    #[error("steady-state solve at {bias} V left residual {residual:e} (condition estimate {condition:e})")]
    Inaccurate { bias: f64, residual: f64, condition: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub bias: f64,
    pub populations: [f64; NUM_STATES],
    /// Photons per ns per emission channel.
    pub flux: [f64; NUM_EMISSION_CHANNELS],
    /// 1-norm condition estimate of the solved system.
    pub condition: f64,
    pub residual: f64,
}

impl SteadyState {
    pub fn species_flux(&self, species: RadiativeSpecies) -> f64 {
        self.flux[emission_channel(species, Helicity::Plus)] + self.flux[emission_channel(species, Helicity::Minus)]
    }

    /// Brightest species, or `None` when nothing emits.
    pub fn dominant_species(&self) -> Option<RadiativeSpecies> {
        RadiativeSpecies::ALL
            .into_iter()
            .map(|s| (s, self.species_flux(s)))
            .filter(|&(_, f)| f > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(s, _)| s)
    }
}

/// States reachable from the vacuum through positive-rate jumps.
fn reachable(kin: &Kinetics, bias: f64) -> Vec<usize> {
    let r = kin.bias_rates(bias);
    let mut seen = [false; NUM_STATES];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in kin.jumps_from(i) {
            if j.rate(&r) > 0.0 && !seen[j.to] {
                seen[j.to] = true;
                stack.push(j.to);
            }
        }
    }
    (0..NUM_STATES).filter(|&i| seen[i]).collect()
}

/// Solves Q(V)p = 0 with Σp = 1 on the class reachable from the vacuum.
pub fn steady_state(bias: f64, params: &RateParams) -> Result<SteadyState, SteadyError> {
    let kin = Kinetics::new(params);
    let q = kin.generator(bias);
    let class = reachable(&kin, bias);
    let n = class.len();

    // Replace the last balance equation by the normalisation.
    let mut a = DMatrix::from_fn(n, n, |i, j| q.get(class[i], class[j]));
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;

    let norm1 = |m: &DMatrix<f64>| m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    let lu = a.clone().lu();
    let singular = SteadyError::Singular {
        bias,
        condition: f64::INFINITY,
    };
    let inverse = lu.try_inverse().ok_or(singular.clone())?;
    let condition = norm1(&a) * norm1(&inverse);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(SteadyError::Singular { bias, condition });
    }

    let x = lu.solve(&b).ok_or(singular)?;
    let mut populations = [0.0; NUM_STATES];
    for (&state, &v) in class.iter().zip(&x) {
        // round-off can leave tiny negatives on nearly empty states
        populations[state] = if v < 0.0 && v > -1e-14 { 0.0 } else { v };
    }
    let qp = q.apply(&populations);
    let residual = qp.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if residual >= RESIDUAL_TOL || populations.iter().any(|&p| p < 0.0) {
        return Err(SteadyError::Inaccurate {
            bias,
            residual,
            condition,
        });
    }

    let r = kin.bias_rates(bias);
    let mut flux = [0.0; NUM_EMISSION_CHANNELS];
    for j in kin.jumps() {
        if let Process::Radiative(s, h) = j.process {
            flux[emission_channel(s, h)] += j.rate(&r) * populations[j.from];
        }
    }
    Ok(SteadyState {
        bias,
        populations,
        flux,
        condition,
        residual,
    })
}

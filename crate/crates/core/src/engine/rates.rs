use thiserror::Error;

use crate::levels::RadiativeSpecies;

/// Bias-activated tunnelling out of the dot:
/// Γ(V) = min(Γ_max, Γ₀·exp((V_th − V)/V_s)).
///
/// The saturation Γ_max bounds the rate deep in the hold regime, where the
/// bare exponential would exceed any physical attempt frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct TunnelModel {
    pub rate0: f64,
    pub threshold_v: f64,
    pub slope_v: f64,
    pub max_rate: f64,
}

impl TunnelModel {
    pub fn rate(&self, bias: f64) -> f64 {
        if self.rate0 == 0.0 {
            return 0.0;
        }
        (self.rate0 * ((self.threshold_v - bias) / self.slope_v).exp()).min(self.max_rate)
    }

    pub fn disabled() -> Self {
        TunnelModel {
            rate0: 0.0,
            ..TunnelModel::default_hole()
        }
    }

    pub fn default_hole() -> Self {
        TunnelModel {
            rate0: 1.0,
            threshold_v: 1.15,
            slope_v: 0.04,
            max_rate: 15.0,
        }
    }
}

/// Hole capture from the p-contact: Γ(V) = Γ₀·σ((V − V_th)/V_s) with σ the
/// logistic function.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureModel {
    pub rate0: f64,
    pub threshold_v: f64,
    pub slope_v: f64,
}

impl CaptureModel {
    pub fn rate(&self, bias: f64) -> f64 {
        if self.rate0 == 0.0 {
            return 0.0;
        }
        let x = (bias - self.threshold_v) / self.slope_v;
        // numerically stable logistic
        let s = if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        };
        self.rate0 * s
    }
}

impl Default for CaptureModel {
    fn default() -> Self {
        CaptureModel {
            rate0: 5.0,
            threshold_v: 1.40,
            slope_v: 0.03,
        }
    }
}

/// Physical rates and fidelities. Times in ns, rates in ns⁻¹, biases in V.
#[derive(Debug, Clone, PartialEq)]
pub struct RateParams {
    pub hole_tunnel: TunnelModel,
    pub electron_tunnel: TunnelModel,
    pub capture: CaptureModel,
    pub tau_x_ns: f64,
    pub tau_xplus_ns: f64,
    pub tau_xminus_ns: f64,
    pub tau_x2_ns: f64,
    /// Electron spin-flip time; `inf` disables flips.
    pub t1_electron_ns: f64,
    pub t1_hole_ns: f64,
    /// Probability that a circular pump creates the helicity-matched pair.
    pub write_fidelity: f64,
    /// Continuous pair generation (steady-state maps).
    pub generation_rate: f64,
}

impl Default for RateParams {
    fn default() -> Self {
        RateParams {
            hole_tunnel: TunnelModel::default_hole(),
            electron_tunnel: TunnelModel::disabled(),
            capture: CaptureModel::default(),
            tau_x_ns: 1.0,
            tau_xplus_ns: 1.0,
            tau_xminus_ns: 1.0,
            tau_x2_ns: 1.0,
            t1_electron_ns: 1.0e6,
            t1_hole_ns: 1.0e6,
            write_fidelity: 1.0,
            generation_rate: 0.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("{key}: {msg}")]
pub struct RateError {
    pub key: &'static str,
    pub msg: String,
}

fn non_negative(key: &'static str, v: f64) -> Result<(), RateError> {
    if v >= 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(RateError {
            key,
            msg: format!("must be >= 0, got {v}"),
        })
    }
}

fn positive(key: &'static str, v: f64) -> Result<(), RateError> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(RateError {
            key,
            msg: format!("must be > 0, got {v}"),
        })
    }
}

fn validate_tunnel(m: &TunnelModel, keys: [&'static str; 4]) -> Result<(), RateError> {
    non_negative(keys[0], m.rate0)?;
    if !m.threshold_v.is_finite() {
        return Err(RateError {
            key: keys[1],
            msg: "must be finite".into(),
        });
    }
    positive(keys[2], m.slope_v)?;
    non_negative(keys[3], m.max_rate)
}

impl RateParams {
    /// Checks every invariant; the error names the config key at fault.
    pub fn validate(&self) -> Result<(), RateError> {
        validate_tunnel(
            &self.hole_tunnel,
            ["hole_tunnel_rate0", "hole_tunnel_threshold_v", "hole_tunnel_slope_v", "hole_tunnel_max_rate"],
        )?;
        validate_tunnel(
            &self.electron_tunnel,
            [
                "electron_tunnel_rate0",
                "electron_tunnel_threshold_v",
                "electron_tunnel_slope_v",
                "electron_tunnel_max_rate",
            ],
        )?;
        non_negative("capture_rate0", self.capture.rate0)?;
        positive("capture_slope_v", self.capture.slope_v)?;
        if !self.capture.threshold_v.is_finite() {
            return Err(RateError {
                key: "capture_threshold_v",
                msg: "must be finite".into(),
            });
        }
        positive("tau_x_ns", self.tau_x_ns)?;
        positive("tau_xplus_ns", self.tau_xplus_ns)?;
        positive("tau_xminus_ns", self.tau_xminus_ns)?;
        positive("tau_x2_ns", self.tau_x2_ns)?;
        positive("t1_electron_ns", self.t1_electron_ns)?;
        positive("t1_hole_ns", self.t1_hole_ns)?;
        non_negative("generation_rate", self.generation_rate)?;
        if !(0.5..=1.0).contains(&self.write_fidelity) {
            return Err(RateError {
                key: "write_fidelity",
                msg: format!("must lie in [0.5, 1], got {}", self.write_fidelity),
            });
        }
        Ok(())
    }

    pub fn lifetime(&self, species: RadiativeSpecies) -> f64 {
        match species {
            RadiativeSpecies::Exciton => self.tau_x_ns,
            RadiativeSpecies::PositiveTrion => self.tau_xplus_ns,
            RadiativeSpecies::NegativeTrion => self.tau_xminus_ns,
            RadiativeSpecies::Biexciton => self.tau_x2_ns,
        }
    }

    pub fn hole_tunnel_rate(&self, bias: f64) -> f64 {
        self.hole_tunnel.rate(bias)
    }

    pub fn electron_tunnel_rate(&self, bias: f64) -> f64 {
        self.electron_tunnel.rate(bias)
    }

    pub fn capture_rate(&self, bias: f64) -> f64 {
        self.capture.rate(bias)
    }

    /// Disables both spin-flip channels.
    pub fn without_spin_flips(mut self) -> Self {
        self.t1_electron_ns = f64::INFINITY;
        self.t1_hole_ns = f64::INFINITY;
        self
    }
}

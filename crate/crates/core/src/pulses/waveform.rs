use thiserror::Error;

/// Polarization of a write pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PumpPolarization {
    /// Right-hand circular, σ⁺.
    R,
    /// Left-hand circular, σ⁻.
    L,
    H,
    V,
    Unpolarized,
}

impl PumpPolarization {
    pub fn parse(s: &str) -> Option<PumpPolarization> {
        match s {
            "R" | "r" | "sigma_plus" => Some(PumpPolarization::R),
            "L" | "l" | "sigma_minus" => Some(PumpPolarization::L),
            "H" | "h" => Some(PumpPolarization::H),
            "V" | "v" => Some(PumpPolarization::V),
            "unpolarized" | "U" | "u" => Some(PumpPolarization::Unpolarized),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PumpPolarization::R => "R",
            PumpPolarization::L => "L",
            PumpPolarization::H => "H",
            PumpPolarization::V => "V",
            PumpPolarization::Unpolarized => "unpolarized",
        }
    }
}

/// A weak optical write pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserPulse {
    /// Centre time within the period (ns).
    pub time_ns: f64,
    /// FWHM (ns).
    pub fwhm_ns: f64,
    pub polarization: PumpPolarization,
    /// Poisson mean of pair-injection attempts.
    pub mean_pairs: f64,
}

impl LaserPulse {
    pub const DEFAULT_FWHM_NS: f64 = 0.1;

    pub fn new(time_ns: f64, polarization: PumpPolarization, mean_pairs: f64) -> Self {
        LaserPulse {
            time_ns,
            fwhm_ns: Self::DEFAULT_FWHM_NS,
            polarization,
            mean_pairs,
        }
    }
}

/// A rectangular a.c. bias pulse with exponential edges.
#[derive(Debug, Clone, PartialEq)]
pub struct AcPulse {
    pub start_ns: f64,
    pub duration_ns: f64,
    /// Amplitude at the dot (V).
    pub amplitude_v: f64,
    /// Edge time constant (ns).
    pub rise_ns: f64,
}

impl AcPulse {
    pub const DEFAULT_RISE_NS: f64 = 1.0;

    pub fn end_ns(&self) -> f64 {
        self.start_ns + self.duration_ns
    }

    /// Edge factor in [0, 1] multiplying the amplitude.
    pub fn edge(&self, t: f64) -> f64 {
        if t <= self.start_ns {
            0.0
        } else if t <= self.end_ns() {
            -(-(t - self.start_ns) / self.rise_ns).exp_m1()
        } else {
            let reached = -(-self.duration_ns / self.rise_ns).exp_m1();
            reached * (-(t - self.end_ns()) / self.rise_ns).exp()
        }
    }

    /// Range of the edge factor over `[a, b]`, for `[a, b]` not straddling
    /// the pulse start or end.
    pub(crate) fn edge_range(&self, a: f64, b: f64) -> (f64, f64) {
        let (ea, eb) = (self.edge(a), self.edge(b));
        (ea.min(eb), ea.max(eb))
    }

    /// Time at which the edge has settled to within e⁻³ of the plateau.
    pub fn plateau_ns(&self) -> f64 {
        (self.start_ns + 3.0 * self.rise_ns).min(self.end_ns())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WaveformError {
    #[error("acpulse {index}: {msg}")]
    InvalidPulse { index: usize, msg: String },
    #[error("acpulses {first} and {second} overlap")]
    Overlap { first: usize, second: usize },
}

/// D.c. level plus a train of non-overlapping a.c. pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasWaveform {
    dc_v: f64,
    pulses: Vec<AcPulse>,
}

impl BiasWaveform {
    /// Validates and sorts the pulses by start time.
    pub fn new(dc_v: f64, mut pulses: Vec<AcPulse>) -> Result<Self, WaveformError> {
        for (index, p) in pulses.iter().enumerate() {
            let bad = |msg: &str| WaveformError::InvalidPulse {
                index,
                msg: msg.to_string(),
            };
            if !(p.rise_ns > 0.0 && p.rise_ns.is_finite()) {
                return Err(bad("rise time must be > 0"));
            }
            if !(p.duration_ns > 0.0 && p.duration_ns.is_finite()) {
                return Err(bad("duration must be > 0"));
            }
            if !p.start_ns.is_finite() || !p.amplitude_v.is_finite() {
                return Err(bad("start and amplitude must be finite"));
            }
        }
        let mut order: Vec<usize> = (0..pulses.len()).collect();
        order.sort_by(|&a, &b| pulses[a].start_ns.total_cmp(&pulses[b].start_ns));
        for w in order.windows(2) {
            if pulses[w[0]].end_ns() > pulses[w[1]].start_ns {
                return Err(WaveformError::Overlap {
                    first: w[0],
                    second: w[1],
                });
            }
        }
        pulses.sort_by(|a, b| a.start_ns.total_cmp(&b.start_ns));
        Ok(BiasWaveform { dc_v, pulses })
    }

    pub fn constant(dc_v: f64) -> Self {
        BiasWaveform {
            dc_v,
            pulses: Vec::new(),
        }
    }

    pub fn dc_v(&self) -> f64 {
        self.dc_v
    }

    pub fn pulses(&self) -> &[AcPulse] {
        &self.pulses
    }

    /// Bias at time `t` (ns) within the period.
    pub fn bias_at(&self, t: f64) -> f64 {
        self.dc_v
            + self
                .pulses
                .iter()
                .map(|p| p.amplitude_v * p.edge(t))
                .sum::<f64>()
    }

    /// Edge boundaries (pulse starts and ends), sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .pulses
            .iter()
            .flat_map(|p| [p.start_ns, p.end_ns()])
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Bounds of V(t) over `[a, b]`, valid when no breakpoint lies strictly
    /// inside the interval.
    pub fn bias_range(&self, a: f64, b: f64) -> (f64, f64) {
        let mut lo = self.dc_v;
        let mut hi = self.dc_v;
        for p in &self.pulses {
            let (e0, e1) = p.edge_range(a, b);
            let (x0, x1) = (p.amplitude_v * e0, p.amplitude_v * e1);
            lo += x0.min(x1);
            hi += x0.max(x1);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_pulse(start: f64, rise: f64) -> AcPulse {
        AcPulse {
            start_ns: start,
            duration_ns: 30.0,
            amplitude_v: 1.5,
            rise_ns: rise,
        }
    }

    #[test]
    fn dc_before_pulses() {
        let w = BiasWaveform::new(-0.05, vec![read_pulse(600.0, 1.0)]).unwrap();
        assert_eq!(w.bias_at(0.0), -0.05);
        assert_eq!(w.bias_at(599.9), -0.05);
    }

    #[test]
    fn exponential_edge_values() {
        let w = BiasWaveform::new(-0.05, vec![read_pulse(600.0, 1.0)]).unwrap();
        let v = w.bias_at(601.0);
        assert!((v - (-0.05 + 1.5 * (1.0 - (-1.0f64).exp()))).abs() < 1e-12);
        let settled = w.bias_at(610.0);
        let target = -0.05 + 1.5;
        assert!(((settled - target) / target).abs() < 5e-5);
    }

    #[test]
    fn continuity_at_edges() {
        let w = BiasWaveform::new(0.1, vec![read_pulse(100.0, 2.0), read_pulse(300.0, 0.5)]).unwrap();
        for b in w.breakpoints() {
            for eps in [1e-6, 1e-9] {
                assert!((w.bias_at(b + eps) - w.bias_at(b - eps)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn strictly_increasing_during_positive_pulse() {
        let w = BiasWaveform::new(0.0, vec![read_pulse(10.0, 1.0)]).unwrap();
        let mut prev = w.bias_at(10.0);
        for k in 1..300 {
            let v = w.bias_at(10.0 + k as f64 * 0.1);
            assert!(v > prev, "not increasing at step {k}");
            prev = v;
        }
    }

    #[test]
    fn overlap_and_invalid_pulses_rejected() {
        let err = BiasWaveform::new(0.0, vec![read_pulse(100.0, 1.0), read_pulse(110.0, 1.0)]);
        assert!(matches!(err, Err(WaveformError::Overlap { .. })));
        let mut p = read_pulse(0.0, 1.0);
        p.rise_ns = 0.0;
        assert!(matches!(
            BiasWaveform::new(0.0, vec![p]),
            Err(WaveformError::InvalidPulse { index: 0, .. })
        ));
    }

    #[test]
    fn pulses_sorted() {
        let w = BiasWaveform::new(0.0, vec![read_pulse(500.0, 1.0), read_pulse(100.0, 1.0)]).unwrap();
        assert_eq!(w.pulses()[0].start_ns, 100.0);
    }

    proptest::proptest! {
        #[test]
        fn range_bounds_contain_samples(a in 0.0f64..200.0, len in 0.01f64..5.0, frac in 0.0f64..1.0) {
            let w = BiasWaveform::new(-0.05, vec![read_pulse(50.0, 1.0), read_pulse(120.0, 3.0)]).unwrap();
            let mut b = a + len;
            // clip to the next breakpoint so the interval is monotone per pulse
            for bp in w.breakpoints() {
                if bp > a && bp < b { b = bp; }
            }
            let (lo, hi) = w.bias_range(a, b);
            let v = w.bias_at(a + frac * (b - a));
            proptest::prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}

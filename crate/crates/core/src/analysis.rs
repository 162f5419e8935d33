//! Arrival-time histograms, memory degree, lifetime fits and bias-sweep
//! spectral maps.

use serde::Serialize;
use thiserror::Error;

use crate::engine::{steady_state, PhotonEvent, SteadyError, Trajectory};
use crate::levels::{emission_channel, Helicity, RadiativeSpecies};
use crate::optics::{transmitted_fraction, DetectionRecord};
use crate::pulses::ExperimentProtocol;

/// Analysis knobs from the `[analysis]` config section. Unset windows fall
/// back to defaults derived from the protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    pub bin_width_ns: f64,
    /// Species kept in histograms; `None` keeps all.
    pub species: Option<RadiativeSpecies>,
    pub read_start_ns: Option<f64>,
    pub read_window_ns: Option<f64>,
    pub fit_start_ns: Option<f64>,
    pub fit_end_ns: Option<f64>,
    /// Gaussian FWHM of spectral lines (µeV).
    pub linewidth_uev: f64,
    pub energy_min_uev: Option<f64>,
    pub energy_max_uev: Option<f64>,
    pub energy_step_uev: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            bin_width_ns: 1.0,
            species: Some(RadiativeSpecies::PositiveTrion),
            read_start_ns: None,
            read_window_ns: None,
            fit_start_ns: None,
            fit_end_ns: None,
            linewidth_uev: 30.0,
            energy_min_uev: None,
            energy_max_uev: None,
            energy_step_uev: 5.0,
        }
    }
}

impl AnalysisSettings {
    /// Returns the offending key on failure.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let positive = |key: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err((key, format!("must be > 0, got {v}")))
            }
        };
        positive("bin_width_ns", self.bin_width_ns)?;
        positive("linewidth_uev", self.linewidth_uev)?;
        positive("energy_step_uev", self.energy_step_uev)?;
        if let Some(w) = self.read_window_ns {
            positive("read_window_ns", w)?;
        }
        if let (Some(a), Some(b)) = (self.fit_start_ns, self.fit_end_ns) {
            if b <= a {
                return Err(("fit_end_ns", format!("must exceed fit_start_ns ({a})")));
            }
        }
        if let (Some(a), Some(b)) = (self.energy_min_uev, self.energy_max_uev) {
            if b <= a {
                return Err(("energy_max_uev", format!("must exceed energy_min_uev ({a})")));
            }
        }
        Ok(())
    }

    /// `[t_d, t_d + 10·τ_X⁺]` unless configured; t_d is the first read pulse.
    pub fn read_window(&self, protocol: &ExperimentProtocol) -> (f64, f64) {
        let start = self
            .read_start_ns
            .or(protocol.read_delay_ns())
            .unwrap_or(0.0);
        let len = self
            .read_window_ns
            .unwrap_or(10.0 * protocol.rates.tau_xplus_ns);
        (start, (start + len).min(protocol.period_ns))
    }

    /// Configured fit window, else from the histogram peak inside the read
    /// window to the end of the read window.
    pub fn fit_window(&self, protocol: &ExperimentProtocol, h: &Histogram) -> (f64, f64) {
        let (r0, r1) = self.read_window(protocol);
        let start = self.fit_start_ns.unwrap_or_else(|| h.peak_time(r0, r1).unwrap_or(r0));
        (start, self.fit_end_ns.unwrap_or(r1))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no signal in window [{0}, {1}] ns")]
    NoSignal(f64, f64),
    #[error("need at least 5 nonzero bins in the fit window, found {0}")]
    InsufficientData(usize),
    #[error("window is not decaying (fitted rate {0} ns⁻¹)")]
    NonDecaying(f64),
}

/// Uniform bins over `[t0, t0 + n·width)` for the σ⁺ and σ⁻ analysis
/// channels. Counts are `f64` so expected (noiseless) histograms share the
/// type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub t0: f64,
    pub bin_width: f64,
    pub sigma_plus: Vec<f64>,
    pub sigma_minus: Vec<f64>,
    pub cycles: u64,
}

impl Histogram {
    pub fn zeros(window: (f64, f64), bin_width: f64, cycles: u64) -> Self {
        assert!(bin_width > 0.0 && window.1 > window.0, "bin width and window must be positive");
        let n = ((window.1 - window.0) / bin_width - 1e-9).ceil().max(1.0) as usize;
        Histogram {
            t0: window.0,
            bin_width,
            sigma_plus: vec![0.0; n],
            sigma_minus: vec![0.0; n],
            cycles,
        }
    }

    pub fn len(&self) -> usize {
        self.sigma_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_plus.is_empty()
    }

    pub fn edge(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.bin_width
    }

    pub fn channel(&self, h: Helicity) -> &[f64] {
        match h {
            Helicity::Plus => &self.sigma_plus,
            Helicity::Minus => &self.sigma_minus,
        }
    }

    fn channel_mut(&mut self, h: Helicity) -> &mut Vec<f64> {
        match h {
            Helicity::Plus => &mut self.sigma_plus,
            Helicity::Minus => &mut self.sigma_minus,
        }
    }

    fn bin_of(&self, t: f64) -> Option<usize> {
        if t < self.t0 {
            return None;
        }
        let k = ((t - self.t0) / self.bin_width).floor() as usize;
        (k < self.len()).then_some(k)
    }

    pub fn total(&self) -> f64 {
        self.sigma_plus.iter().chain(&self.sigma_minus).sum()
    }

    /// Both channels summed per bin.
    pub fn summed(&self) -> Vec<f64> {
        self.sigma_plus.iter().zip(&self.sigma_minus).map(|(a, b)| a + b).collect()
    }

    /// Channel integral over `[a, b]`, weighting edge bins by overlap.
    pub fn integrate(&self, h: Helicity, a: f64, b: f64) -> f64 {
        self.channel(h)
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let (lo, hi) = (self.edge(k), self.edge(k + 1));
                let overlap = (hi.min(b) - lo.max(a)).max(0.0);
                c * overlap / self.bin_width
            })
            .sum()
    }

    /// Left edge of the fullest summed bin within `[a, b)`.
    pub fn peak_time(&self, a: f64, b: f64) -> Option<f64> {
        let summed = self.summed();
        (0..self.len())
            .filter(|&k| self.edge(k) >= a - 1e-9 && self.edge(k) < b)
            .filter(|&k| summed[k] > 0.0)
            .max_by(|&x, &y| summed[x].total_cmp(&summed[y]).then(y.cmp(&x)))
            .map(|k| self.edge(k))
    }
}

/// Bins detection records by delay and analysis channel; records outside
/// `[t0, t1)` are dropped.
pub fn build_histogram(records: &[DetectionRecord], bin_width: f64, window: (f64, f64), cycles: u64) -> Histogram {
    let mut h = Histogram::zeros(window, bin_width, cycles);
    for r in records {
        if r.time_ns >= window.1 {
            continue;
        }
        if let Some(k) = h.bin_of(r.time_ns) {
            h.channel_mut(r.channel)[k] += 1.0;
        }
    }
    h
}

/// Detection records of one species (or all, for `None`).
pub fn filter_species(records: &[DetectionRecord], species: Option<RadiativeSpecies>) -> Vec<DetectionRecord> {
    records
        .iter()
        .filter(|r| species.is_none_or(|s| s == r.species))
        .copied()
        .collect()
}

/// Histogram of emitted photons by helicity, before any optics.
pub fn emission_histogram(
    events: &[PhotonEvent],
    protocol: &ExperimentProtocol,
    species: Option<RadiativeSpecies>,
    bin_width: f64,
    window: (f64, f64),
    cycles: u64,
) -> Histogram {
    let mut h = Histogram::zeros(window, bin_width, cycles);
    for e in events.iter().filter(|e| species.is_none_or(|s| s == e.species)) {
        let t = e.local_time(protocol.period_ns);
        if t >= window.1 {
            continue;
        }
        if let Some(k) = h.bin_of(t) {
            h.channel_mut(e.helicity)[k] += 1.0;
        }
    }
    h
}

/// Expected counts over `cycles` from the master-equation trajectory. With
/// `optics`, the analyzer fractions and detector efficiency are applied (the
/// jitter is not convolved); without, channels are the emitted helicities.
pub fn expected_histogram(
    traj: &Trajectory,
    protocol: &ExperimentProtocol,
    species: Option<RadiativeSpecies>,
    bin_width: f64,
    window: (f64, f64),
    cycles: u64,
    optics: bool,
) -> Histogram {
    let mut h = Histogram::zeros(window, bin_width, cycles);
    let route = |emitted: Helicity, channel: Helicity| -> f64 {
        if !optics {
            return if emitted == channel { 1.0 } else { 0.0 };
        }
        protocol.detector.efficiency * transmitted_fraction(emitted, protocol.analyzer.chain(channel))
    };
    for k in 0..h.len() {
        let a = h.edge(k);
        let b = h.edge(k + 1).min(window.1);
        let emitted = traj.emitted_between(a, b);
        for s in RadiativeSpecies::ALL.into_iter().filter(|&s| species.is_none_or(|x| x == s)) {
            for e in [Helicity::Plus, Helicity::Minus] {
                let n = emitted[emission_channel(s, e)] * cycles as f64;
                for c in [Helicity::Plus, Helicity::Minus] {
                    h.channel_mut(c)[k] += n * route(e, c);
                }
            }
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryResult {
    /// σ⁻ (left-hand) channel area.
    pub i_l: f64,
    /// σ⁺ (right-hand) channel area.
    pub i_r: f64,
    pub degree: f64,
    pub uncertainty: f64,
}

/// D = (I_L − I_R)/(I_L + I_R) over the window, with binomial error
/// 2√(I_L·I_R/N³).
pub fn memory_degree(h: &Histogram, window: (f64, f64)) -> Result<MemoryResult, AnalysisError> {
    let i_l = h.integrate(Helicity::Minus, window.0, window.1);
    let i_r = h.integrate(Helicity::Plus, window.0, window.1);
    memory_from_areas(i_l, i_r).ok_or(AnalysisError::NoSignal(window.0, window.1))
}

pub fn memory_from_areas(i_l: f64, i_r: f64) -> Option<MemoryResult> {
    let n = i_l + i_r;
    (n > 0.0).then(|| MemoryResult {
        i_l,
        i_r,
        degree: (i_l - i_r) / n,
        uncertainty: 2.0 * (i_l * i_r / n.powi(3)).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpFit {
    pub tau_ns: f64,
    pub sigma_tau_ns: f64,
    pub bins_used: usize,
}

/// Weighted least squares of ln(counts) against bin centre with Poisson
/// weights w = counts, over bins whose centre lies in the window. Both
/// channels are summed.
pub fn fit_exponential(h: &Histogram, window: (f64, f64)) -> Result<ExpFit, AnalysisError> {
    let summed = h.summed();
    let points: Vec<(f64, f64)> = (0..h.len())
        .map(|k| (h.edge(k) + 0.5 * h.bin_width, summed[k]))
        .filter(|&(t, c)| t >= window.0 && t <= window.1 && c > 0.0)
        .collect();
    if points.len() < 5 {
        return Err(AnalysisError::InsufficientData(points.len()));
    }
    let sw: f64 = points.iter().map(|p| p.1).sum();
    let t_mean = points.iter().map(|p| p.1 * p.0).sum::<f64>() / sw;
    let y_mean = points.iter().map(|p| p.1 * p.1.ln()).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.1 * (p.0 - t_mean).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.1 * (p.0 - t_mean) * (p.1.ln() - y_mean)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(AnalysisError::NonDecaying(-slope));
    }
    let sigma_slope = (1.0 / sxx).sqrt();
    Ok(ExpFit {
        tau_ns: -1.0 / slope,
        sigma_tau_ns: sigma_slope / (slope * slope),
        bins_used: points.len(),
    })
}

/// Steady-state spectra over a bias sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralMap {
    pub biases: Vec<f64>,
    pub energies: Vec<f64>,
    /// `intensity[i][j]` at `biases[i]`, `energies[j]` (photons ns⁻¹ µeV⁻¹).
    pub intensity: Vec<Vec<f64>>,
    /// Brightest species at each bias.
    pub dominant: Vec<Option<RadiativeSpecies>>,
}

/// Default energy grid: every line of the table at the reference bias,
/// padded by ten linewidths.
pub fn default_energy_grid(protocol: &ExperimentProtocol, biases: &[f64]) -> Vec<f64> {
    let a = &protocol.analysis;
    let lines: Vec<f64> = biases
        .iter()
        .flat_map(|&v| {
            RadiativeSpecies::ALL.into_iter().flat_map(move |s| {
                [Helicity::Plus, Helicity::Minus].map(|h| protocol.energies.line_energy(s, h, v))
            })
        })
        .collect();
    let pad = 10.0 * a.linewidth_uev;
    let lo = a
        .energy_min_uev
        .unwrap_or_else(|| (lines.iter().copied().fold(f64::INFINITY, f64::min) - pad).floor());
    let hi = a
        .energy_max_uev
        .unwrap_or_else(|| (lines.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad).ceil());
    let n = ((hi - lo) / a.energy_step_uev).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * a.energy_step_uev).collect()
}

/// Places the steady-state line intensities of every bias on the energy
/// grid as area-normalised Gaussians.
pub fn spectral_map(protocol: &ExperimentProtocol, biases: &[f64], energies: &[f64]) -> Result<SpectralMap, SteadyError> {
    let sigma = protocol.analysis.linewidth_uev / (8.0 * std::f64::consts::LN_2).sqrt();
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut intensity = Vec::with_capacity(biases.len());
    let mut dominant = Vec::with_capacity(biases.len());
    for &v in biases {
        let ss = steady_state(v, &protocol.rates)?;
        let mut row = vec![0.0; energies.len()];
        for s in RadiativeSpecies::ALL {
            for h in [Helicity::Plus, Helicity::Minus] {
                let flux = ss.flux[emission_channel(s, h)];
                if flux <= 0.0 {
                    continue;
                }
                let e0 = protocol.energies.line_energy(s, h, v);
                for (x, &e) in row.iter_mut().zip(energies) {
                    let z = (e - e0) / sigma;
                    *x += flux * norm * (-0.5 * z * z).exp();
                }
            }
        }
        intensity.push(row);
        dominant.push(ss.dominant_species());
    }
    Ok(SpectralMap {
        biases: biases.to_vec(),
        energies: energies.to_vec(),
        intensity,
        dominant,
    })
}

/// `steps` evenly spaced biases from `v_min` to `v_max` inclusive.
pub fn bias_grid(v_min: f64, v_max: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|k| v_min + (v_max - v_min) * k as f64 / (steps - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    fn record(t: f64, channel: Helicity) -> DetectionRecord {
        DetectionRecord {
            cycle: 0,
            time_ns: t,
            channel,
            species: RadiativeSpecies::PositiveTrion,
        }
    }

    #[test]
    fn empty_records_give_zero_histogram() {
        let h = build_histogram(&[], 1.0, (0.0, 10.0), 1);
        assert_eq!(h.len(), 10);
        assert_eq!(h.total(), 0.0);
    }

    #[test]
    fn records_in_one_bin() {
        let recs: Vec<_> = (0..37).map(|_| record(3.5, Helicity::Plus)).collect();
        let h = build_histogram(&recs, 1.0, (0.0, 10.0), 1);
        assert_eq!(h.sigma_plus[3], 37.0);
        assert_eq!(h.total(), 37.0);
    }

    #[test]
    fn exponential_bins_fall_by_e() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let exp = Exp::new(1.0).unwrap();
        let recs: Vec<_> = (0..200_000).map(|_| record(exp.sample(&mut rng), Helicity::Minus)).collect();
        let h = build_histogram(&recs, 1.0, (0.0, 20.0), 1);
        for k in 0..4 {
            let (a, b) = (h.sigma_minus[k], h.sigma_minus[k + 1]);
            let ratio = b / a;
            // δ(b/a) ≈ (b/a)·√(1/a + 1/b)
            let err = ratio * (1.0 / a + 1.0 / b).sqrt();
            assert!((ratio - (-1.0f64).exp()).abs() < 4.0 * err, "bin {k}: {ratio}");
        }
    }

    #[test]
    fn memory_degree_examples() {
        let m = memory_from_areas(90.0, 10.0).unwrap();
        assert!((m.degree - 0.8).abs() < 1e-15);
        assert!((m.uncertainty - 2.0 * (900.0f64 / 1.0e6).sqrt()).abs() < 1e-15);
        assert_eq!(memory_from_areas(5.0, 5.0).unwrap().degree, 0.0);
        assert_eq!(memory_from_areas(5.0, 0.0).unwrap().degree, 1.0);
        assert!(memory_from_areas(0.0, 0.0).is_none());
        let h = Histogram::zeros((0.0, 10.0), 1.0, 1);
        assert_eq!(memory_degree(&h, (0.0, 10.0)), Err(AnalysisError::NoSignal(0.0, 10.0)));
    }

    #[test]
    fn memory_degree_partial_bins() {
        let mut h = Histogram::zeros((0.0, 4.0), 1.0, 1);
        h.sigma_minus = vec![10.0, 10.0, 10.0, 10.0];
        h.sigma_plus = vec![0.0, 2.0, 0.0, 0.0];
        let m = memory_degree(&h, (0.5, 2.0)).unwrap();
        assert!((m.i_l - 15.0).abs() < 1e-12);
        assert!((m.i_r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_noiseless_exponential() {
        let mut h = Histogram::zeros((0.0, 20.0), 1.0, 1);
        for k in 0..20 {
            let t = k as f64;
            h.sigma_plus[k] = 1.0e4 * ((-t).exp() - (-(t + 1.0)).exp());
        }
        let fit = fit_exponential(&h, (0.0, 20.0)).unwrap();
        assert!((fit.tau_ns - 1.0).abs() < 1e-3, "{}", fit.tau_ns);
    }

    #[test]
    fn fit_errors() {
        let mut h = Histogram::zeros((0.0, 10.0), 1.0, 1);
        h.sigma_plus = vec![5.0; 10];
        assert!(matches!(fit_exponential(&h, (0.0, 10.0)), Err(AnalysisError::NonDecaying(_))));
        h.sigma_plus = vec![0.0; 10];
        h.sigma_plus[2] = 3.0;
        assert_eq!(fit_exponential(&h, (0.0, 10.0)), Err(AnalysisError::InsufficientData(1)));
    }

    #[test]
    fn spectral_map_doublet() {
        let mut p = ExperimentProtocol::new(1000.0);
        p.rates.generation_rate = 0.05;
        let biases = [1.25];
        let energies = default_energy_grid(&p, &biases);
        let map = spectral_map(&p, &biases, &energies).unwrap();
        assert!(map.intensity[0].iter().all(|&x| x >= 0.0));
        p.energies.field_t = 0.0;
        let s = RadiativeSpecies::Exciton;
        let a = p.energies.line_energy(s, Helicity::Plus, 1.25);
        let b = p.energies.line_energy(s, Helicity::Minus, 1.25);
        assert_eq!(a, b);
    }

    #[test]
    fn bias_grid_endpoints() {
        let g = bias_grid(1.0, 1.5, 101);
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[100], 1.5);
    }

    proptest! {
        #[test]
        fn histogram_conserves_in_window_records(
            times in prop::collection::vec(-5.0f64..30.0, 0..200),
            width in 0.05f64..3.0,
        ) {
            let recs: Vec<_> = times.iter().map(|&t| record(t, Helicity::Plus)).collect();
            let h = build_histogram(&recs, width, (0.0, 20.0), 1);
            let inside = times.iter().filter(|&&t| (0.0..20.0).contains(&t)).count();
            prop_assert_eq!(h.total(), inside as f64);
        }

        #[test]
        fn degree_scale_invariant(l in 0.0f64..1e6, r in 0.0f64..1e6, c in 1e-3f64..1e3) {
            prop_assume!(l + r > 0.0);
            let a = memory_from_areas(l, r).unwrap();
            let b = memory_from_areas(c * l, c * r).unwrap();
            prop_assert!((a.degree - b.degree).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a.degree));
        }
    }
}

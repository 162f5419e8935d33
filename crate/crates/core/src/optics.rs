//! Polarization analysis by Jones calculus and the single-photon detector.
//!
//! Jones vectors are written in the {H, V} basis. Circular states use
//! R = σ⁺ = (1, −i)/√2 and L = σ⁻ = (1, i)/√2. With the quarter-wave plate
//! fast axis at +45°, R leaves as V and L as H; a half-wave plate at 45° or
//! 0° in front of an H polarizer then selects R or L respectively.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::engine::PhotonEvent;
use crate::levels::{Helicity, RadiativeSpecies};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector(pub [Complex64; 2]);

impl JonesVector {
    pub fn horizontal() -> Self {
        JonesVector([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
    }

    pub fn vertical() -> Self {
        JonesVector([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
    }

    /// Linear polarization at `deg` from H.
    pub fn linear(deg: f64) -> Self {
        let a = deg.to_radians();
        JonesVector([Complex64::new(a.cos(), 0.0), Complex64::new(a.sin(), 0.0)])
    }

    pub fn circular(h: Helicity) -> Self {
        let s = FRAC_1_SQRT_2;
        match h {
            Helicity::Plus => JonesVector([Complex64::new(s, 0.0), Complex64::new(0.0, -s)]),
            Helicity::Minus => JonesVector([Complex64::new(s, 0.0), Complex64::new(0.0, s)]),
        }
    }

    pub fn intensity(&self) -> f64 {
        self.0[0].norm_sqr() + self.0[1].norm_sqr()
    }

    pub fn normalized(self) -> Self {
        let n = self.intensity().sqrt();
        JonesVector([self.0[0] / n, self.0[1] / n])
    }

    /// |⟨a|b⟩|² for unit vectors.
    pub fn overlap(&self, other: &JonesVector) -> f64 {
        (self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]).norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix(pub [[Complex64; 2]; 2]);

impl JonesMatrix {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        JonesMatrix([[one, zero], [zero, one]])
    }

    pub fn rotation(deg: f64) -> Self {
        let a = deg.to_radians();
        let (s, c) = a.sin_cos();
        JonesMatrix([
            [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
            [Complex64::new(-s, 0.0), Complex64::new(c, 0.0)],
        ])
    }

    /// Ideal linear polarizer with transmission axis at `deg`.
    pub fn polarizer(deg: f64) -> Self {
        let a = deg.to_radians();
        let (s, c) = a.sin_cos();
        JonesMatrix([
            [Complex64::new(c * c, 0.0), Complex64::new(c * s, 0.0)],
            [Complex64::new(c * s, 0.0), Complex64::new(s * s, 0.0)],
        ])
    }

    pub fn mul(&self, rhs: &JonesMatrix) -> JonesMatrix {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        JonesMatrix(out)
    }

    pub fn apply(&self, v: &JonesVector) -> JonesVector {
        let m = &self.0;
        JonesVector([
            m[0][0] * v.0[0] + m[0][1] * v.0[1],
            m[1][0] * v.0[0] + m[1][1] * v.0[1],
        ])
    }

    pub fn adjoint(&self) -> JonesMatrix {
        let m = &self.0;
        JonesMatrix([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    /// Max-entry deviation of U†U from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let id = JonesMatrix::identity();
        let mut err: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                err = err.max((p.0[i][j] - id.0[i][j]).norm());
            }
        }
        err
    }
}

/// Linear retarder: R(−θ)·diag(1, e^{iδ})·R(θ), angle in degrees.
pub fn waveplate(retardance: f64, angle_deg: f64) -> JonesMatrix {
    let phase = Complex64::from_polar(1.0, retardance);
    let core = JonesMatrix([
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), phase],
    ]);
    JonesMatrix::rotation(-angle_deg)
        .mul(&core)
        .mul(&JonesMatrix::rotation(angle_deg))
}

pub fn quarter_wave(angle_deg: f64) -> JonesMatrix {
    waveplate(FRAC_PI_2, angle_deg)
}

pub fn half_wave(angle_deg: f64) -> JonesMatrix {
    waveplate(PI, angle_deg)
}

fn wrap_deg(a: f64) -> f64 {
    a.rem_euclid(360.0)
}

/// QWP → HWP → fixed polarizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzerChain {
    pub qwp_deg: f64,
    pub hwp_deg: f64,
    pub polarizer_deg: f64,
    /// Deviation of the QWP retardance from π/2 (rad).
    pub qwp_retardance_error: f64,
}

impl AnalyzerChain {
    pub fn new(qwp_deg: f64, hwp_deg: f64, polarizer_deg: f64) -> Self {
        AnalyzerChain {
            qwp_deg: wrap_deg(qwp_deg),
            hwp_deg: wrap_deg(hwp_deg),
            polarizer_deg: wrap_deg(polarizer_deg),
            qwp_retardance_error: 0.0,
        }
    }

    pub fn matrix(&self) -> JonesMatrix {
        JonesMatrix::polarizer(self.polarizer_deg)
            .mul(&half_wave(self.hwp_deg))
            .mul(&waveplate(FRAC_PI_2 + self.qwp_retardance_error, self.qwp_deg))
    }

    pub fn transmission(&self, input: &JonesVector) -> f64 {
        self.matrix().apply(input).intensity()
    }
}

/// The two cross-polarised measurement settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Analyzer {
    /// Setting that passes σ⁺.
    pub sigma_plus: AnalyzerChain,
    /// Setting that passes σ⁻.
    pub sigma_minus: AnalyzerChain,
}

impl Default for Analyzer {
    fn default() -> Self {
        Analyzer::with_angles(45.0, 45.0, 0.0, 0.0, 0.0)
    }
}

impl Analyzer {
    pub fn with_angles(
        qwp_deg: f64,
        hwp_plus_deg: f64,
        hwp_minus_deg: f64,
        polarizer_deg: f64,
        retardance_error: f64,
    ) -> Self {
        let mut plus = AnalyzerChain::new(qwp_deg, hwp_plus_deg, polarizer_deg);
        let mut minus = AnalyzerChain::new(qwp_deg, hwp_minus_deg, polarizer_deg);
        plus.qwp_retardance_error = retardance_error;
        minus.qwp_retardance_error = retardance_error;
        Analyzer {
            sigma_plus: plus,
            sigma_minus: minus,
        }
    }

    pub fn chain(&self, channel: Helicity) -> &AnalyzerChain {
        match channel {
            Helicity::Plus => &self.sigma_plus,
            Helicity::Minus => &self.sigma_minus,
        }
    }
}

/// Fraction of a circularly polarised photon transmitted by `chain`.
pub fn transmitted_fraction(helicity: Helicity, chain: &AnalyzerChain) -> f64 {
    chain.transmission(&JonesVector::circular(helicity))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    /// Gaussian timing jitter σ (ns).
    pub jitter_ns: f64,
    pub efficiency: f64,
    pub dead_time_ns: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            jitter_ns: 0.35,
            efficiency: 1.0,
            dead_time_ns: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        DetectorModel {
            jitter_ns: 0.0,
            efficiency: 1.0,
            dead_time_ns: 0.0,
        }
    }
}

/// One detected photon. `time_ns` is the arrival delay after its cycle's
/// trigger, including jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionRecord {
    pub cycle: u64,
    pub time_ns: f64,
    pub channel: Helicity,
    pub species: RadiativeSpecies,
}

/// Routes each event into one analysis channel (kept with probability
/// η × transmitted fraction), smears its time and applies the dead time.
/// `period_ns` converts absolute event times into per-cycle delays.
pub fn apply_detector<R: Rng + ?Sized>(
    events: &[PhotonEvent],
    model: &DetectorModel,
    analyzer: &Analyzer,
    period_ns: f64,
    rng: &mut R,
) -> Vec<DetectionRecord> {
    let fractions = |h: Helicity| {
        (
            transmitted_fraction(h, &analyzer.sigma_plus),
            transmitted_fraction(h, &analyzer.sigma_minus),
        )
    };
    let by_helicity = [fractions(Helicity::Plus), fractions(Helicity::Minus)];
    let jitter = (model.jitter_ns > 0.0)
        .then(|| Normal::new(0.0, model.jitter_ns).expect("jitter validated non-negative"));

    let mut out = Vec::with_capacity(events.len());
    for ev in events {
        let (f_plus, f_minus) = by_helicity[ev.helicity.index()];
        let u: f64 = rng.random();
        let channel = if u < model.efficiency * f_plus {
            Helicity::Plus
        } else if u < model.efficiency * (f_plus + f_minus) {
            Helicity::Minus
        } else {
            continue;
        };
        let mut t = ev.time_ns - ev.cycle as f64 * period_ns;
        if let Some(n) = &jitter {
            t += n.sample(rng);
        }
        out.push(DetectionRecord {
            cycle: ev.cycle,
            time_ns: t,
            channel,
            species: ev.species,
        });
    }
    out.sort_by(|a, b| (a.cycle, a.time_ns).partial_cmp(&(b.cycle, b.time_ns)).expect("finite times"));
    if model.dead_time_ns > 0.0 {
        let mut last: [Option<(u64, f64)>; 2] = [None, None];
        out.retain(|r| {
            let slot = &mut last[r.channel.index()];
            let blocked = matches!(*slot, Some((c, t)) if c == r.cycle && r.time_ns - t < model.dead_time_ns);
            if !blocked {
                *slot = Some((r.cycle, r.time_ns));
            }
            !blocked
        });
    }
    out
}

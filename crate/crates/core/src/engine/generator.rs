//! Rate generator over the sixteen dot states.

use crate::levels::{
    enumerate_states, radiative_channels, DotState, Helicity, RadiativeSpecies, Shell, Spin, NUM_STATES,
};

use super::rates::RateParams;

/// Kind of a jump between two dot states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    Radiative(RadiativeSpecies, Helicity),
    HoleTunnel,
    ElectronTunnel,
    HoleCapture,
    ElectronFlip,
    HoleFlip,
    Generation,
}

impl Process {
    pub fn label(self) -> &'static str {
        match self {
            Process::Radiative(..) => "radiative decay",
            Process::HoleTunnel => "hole tunnelling",
            Process::ElectronTunnel => "electron tunnelling",
            Process::HoleCapture => "hole capture",
            Process::ElectronFlip => "electron spin flip",
            Process::HoleFlip => "hole spin flip",
            Process::Generation => "pair generation",
        }
    }
}

/// One edge of the jump graph. The rate at bias V is
/// `weight × base(process, V)`, where the base is 1 for bias-independent
/// processes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub from: usize,
    pub to: usize,
    pub process: Process,
    pub weight: f64,
}

/// Bias-dependent base rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasRates {
    pub hole_tunnel: f64,
    pub electron_tunnel: f64,
    pub capture: f64,
}

impl BiasRates {
    pub fn at(params: &RateParams, bias: f64) -> Self {
        BiasRates {
            hole_tunnel: params.hole_tunnel_rate(bias),
            electron_tunnel: params.electron_tunnel_rate(bias),
            capture: params.capture_rate(bias),
        }
    }

    /// Upper bounds over `[v_lo, v_hi]`: tunnelling falls and capture rises
    /// monotonically with bias.
    pub fn sup(params: &RateParams, v_lo: f64, v_hi: f64) -> Self {
        BiasRates {
            hole_tunnel: params.hole_tunnel_rate(v_lo),
            electron_tunnel: params.electron_tunnel_rate(v_lo),
            capture: params.capture_rate(v_hi),
        }
    }
}

impl Jump {
    #[inline]
    pub fn rate(&self, r: &BiasRates) -> f64 {
        self.weight
            * match self.process {
                Process::HoleTunnel => r.hole_tunnel,
                Process::ElectronTunnel => r.electron_tunnel,
                Process::HoleCapture => r.capture,
                _ => 1.0,
            }
    }
}

/// Dense generator: `q[j][i]` is the rate i → j for i ≠ j, and the diagonal
/// makes every column sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    pub q: [[f64; NUM_STATES]; NUM_STATES],
}

impl RateMatrix {
    pub fn zeros() -> Self {
        RateMatrix {
            q: [[0.0; NUM_STATES]; NUM_STATES],
        }
    }

    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.q[to][from]
    }

    pub fn column_sum(&self, i: usize) -> f64 {
        (0..NUM_STATES).map(|j| self.q[j][i]).sum()
    }

    pub fn apply(&self, p: &[f64; NUM_STATES]) -> [f64; NUM_STATES] {
        let mut out = [0.0; NUM_STATES];
        for (j, row) in self.q.iter().enumerate() {
            out[j] = row.iter().zip(p).map(|(a, b)| a * b).sum();
        }
        out
    }
}

/// Precomputed jump graph for one parameter set.
#[derive(Debug, Clone)]
pub struct Kinetics {
    params: RateParams,
    jumps: Vec<Jump>,
    /// `jumps[offsets[i]..offsets[i + 1]]` leave state i.
    offsets: [usize; NUM_STATES + 1],
}

fn inv(t: f64) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        1.0 / t
    }
}

fn shell_removals(shell: Shell) -> Vec<(Shell, f64)> {
    // Single carrier leaves at the full rate; a singlet loses either spin
    // with equal probability at a total equal to the single-carrier rate.
    match shell {
        Shell::Empty => vec![],
        Shell::Single(_) => vec![(Shell::Empty, 1.0)],
        Shell::Full => vec![
            (Shell::Single(Spin::Up), 0.5),
            (Shell::Single(Spin::Down), 0.5),
        ],
    }
}

impl Kinetics {
    pub fn new(params: &RateParams) -> Self {
        let mut jumps = Vec::new();
        let mut offsets = [0usize; NUM_STATES + 1];
        for (i, s) in enumerate_states().into_iter().enumerate() {
            offsets[i] = jumps.len();
            let mut push = |to: DotState, process, weight: f64| {
                if weight > 0.0 {
                    jumps.push(Jump {
                        from: i,
                        to: to.index(),
                        process,
                        weight,
                    });
                }
            };

            let channels = radiative_channels(s);
            let n = channels.len() as f64;
            for t in &channels {
                let w = inv(params.lifetime(t.species)) / n;
                push(t.final_state, Process::Radiative(t.species, t.helicity), w);
            }

            if params.hole_tunnel.rate0 > 0.0 {
                for (h, w) in shell_removals(s.holes) {
                    push(DotState::new(s.electrons, h), Process::HoleTunnel, w);
                }
            }
            if params.electron_tunnel.rate0 > 0.0 {
                for (e, w) in shell_removals(s.electrons) {
                    push(DotState::new(e, s.holes), Process::ElectronTunnel, w);
                }
            }
            if params.capture.rate0 > 0.0 {
                for spin in [Spin::Up, Spin::Down] {
                    if let Some(h) = s.holes.add(spin) {
                        push(DotState::new(s.electrons, h), Process::HoleCapture, 0.5);
                    }
                }
            }
            if let Some(e) = s.electrons.single_spin() {
                push(
                    DotState::new(Shell::Single(e.flipped()), s.holes),
                    Process::ElectronFlip,
                    inv(params.t1_electron_ns),
                );
            }
            if let Some(h) = s.holes.single_spin() {
                push(
                    DotState::new(s.electrons, Shell::Single(h.flipped())),
                    Process::HoleFlip,
                    inv(params.t1_hole_ns),
                );
            }
            for (e, h) in [(Spin::Down, Spin::Up), (Spin::Up, Spin::Down)] {
                if let Some(t) = s.add_pair(e, h) {
                    push(t, Process::Generation, params.generation_rate / 2.0);
                }
            }
        }
        offsets[NUM_STATES] = jumps.len();
        Kinetics {
            params: params.clone(),
            jumps,
            offsets,
        }
    }

    pub fn params(&self) -> &RateParams {
        &self.params
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn jumps_from(&self, state: usize) -> &[Jump] {
        &self.jumps[self.offsets[state]..self.offsets[state + 1]]
    }

    pub fn bias_rates(&self, bias: f64) -> BiasRates {
        BiasRates::at(&self.params, bias)
    }

    pub fn exit_rate(&self, state: usize, r: &BiasRates) -> f64 {
        self.jumps_from(state).iter().map(|j| j.rate(r)).sum()
    }

    pub fn generator(&self, bias: f64) -> RateMatrix {
        let r = self.bias_rates(bias);
        let mut m = RateMatrix::zeros();
        for j in &self.jumps {
            let k = j.rate(&r);
            m.q[j.to][j.from] += k;
            m.q[j.from][j.from] -= k;
        }
        m
    }

    /// dp/dt = Q·p, also accumulating the radiative flux per emission
    /// channel into `flux`.
    #[inline]
    pub fn derivative(
        &self,
        r: &BiasRates,
        p: &[f64; NUM_STATES],
        dp: &mut [f64; NUM_STATES],
        flux: &mut [f64; crate::levels::NUM_EMISSION_CHANNELS],
    ) {
        *dp = [0.0; NUM_STATES];
        *flux = [0.0; crate::levels::NUM_EMISSION_CHANNELS];
        for j in &self.jumps {
            let f = j.rate(r) * p[j.from];
            dp[j.to] += f;
            dp[j.from] -= f;
            if let Process::Radiative(s, h) = j.process {
                flux[crate::levels::emission_channel(s, h)] += f;
            }
        }
    }
}

/// Generator Q(V) for the given parameters.
pub fn build_generator(bias: f64, params: &RateParams) -> RateMatrix {
    Kinetics::new(params).generator(bias)
}

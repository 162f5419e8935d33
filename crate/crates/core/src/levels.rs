//! Discrete state space of the dot's s-shell, optical selection rules and
//! transition energies.
//!
//! Electrons carry spin ↑ (+1/2) or ↓ (−1/2); heavy holes carry pseudo-spin
//! ⇑ (+3/2) or ⇓ (−3/2). A doubly occupied shell is a spin singlet.
//!
//! Helicity convention: the J_z = +1 pair (e↓, h⇑) recombines into σ⁺ ≡ R,
//! the J_z = −1 pair (e↑, h⇓) into σ⁻ ≡ L. J_z = ±2 pairs are dark.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Bohr magneton in µeV/T.
pub const BOHR_MAGNETON_UEV_PER_T: f64 = 57.88;

/// Number of enumerated dot configurations.
pub const NUM_STATES: usize = 16;

/// Spin projection of a single carrier. For holes `Up`/`Down` mean ⇑/⇓.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// Occupancy of one s-shell (electron or hole).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shell {
    Empty,
    Single(Spin),
    /// Singlet pair.
    Full,
}

impl Shell {
    pub fn count(self) -> u8 {
        match self {
            Shell::Empty => 0,
            Shell::Single(_) => 1,
            Shell::Full => 2,
        }
    }

    /// Adds one carrier of the given spin, or `None` when Pauli blocked.
    pub fn add(self, spin: Spin) -> Option<Shell> {
        match self {
            Shell::Empty => Some(Shell::Single(spin)),
            Shell::Single(s) if s != spin => Some(Shell::Full),
            _ => None,
        }
    }

    /// Removes one carrier of the given spin, or `None` if none is present.
    pub fn remove(self, spin: Spin) -> Option<Shell> {
        match self {
            Shell::Single(s) if s == spin => Some(Shell::Empty),
            Shell::Full => Some(Shell::Single(spin.flipped())),
            _ => None,
        }
    }

    pub fn single_spin(self) -> Option<Spin> {
        match self {
            Shell::Single(s) => Some(s),
            _ => None,
        }
    }
}

/// Photon helicity. `Plus` is σ⁺ ≡ R, `Minus` is σ⁻ ≡ L.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Helicity {
    Plus,
    Minus,
}

impl Helicity {
    /// +1 for σ⁺, −1 for σ⁻.
    pub fn sign(self) -> f64 {
        match self {
            Helicity::Plus => 1.0,
            Helicity::Minus => -1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Helicity::Plus => 0,
            Helicity::Minus => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Helicity::Plus => "sigma_plus",
            Helicity::Minus => "sigma_minus",
        }
    }
}

/// Total, mutually exclusive classification of [`DotState`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Empty,
    Electron,
    Hole,
    BiElectron,
    BiHole,
    BrightExciton,
    DarkExciton,
    PositiveTrion,
    NegativeTrion,
    Biexciton,
}

/// Species that emit photons. The biexciton line is the X₂ → X channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RadiativeSpecies {
    Exciton,
    PositiveTrion,
    NegativeTrion,
    Biexciton,
}

impl RadiativeSpecies {
    pub const ALL: [RadiativeSpecies; 4] = [
        RadiativeSpecies::Exciton,
        RadiativeSpecies::PositiveTrion,
        RadiativeSpecies::NegativeTrion,
        RadiativeSpecies::Biexciton,
    ];

    pub fn index(self) -> usize {
        match self {
            RadiativeSpecies::Exciton => 0,
            RadiativeSpecies::PositiveTrion => 1,
            RadiativeSpecies::NegativeTrion => 2,
            RadiativeSpecies::Biexciton => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RadiativeSpecies::Exciton => "X",
            RadiativeSpecies::PositiveTrion => "X+",
            RadiativeSpecies::NegativeTrion => "X-",
            RadiativeSpecies::Biexciton => "X2",
        }
    }

    pub fn from_label(s: &str) -> Option<RadiativeSpecies> {
        match s {
            "X" | "x" | "exciton" => Some(RadiativeSpecies::Exciton),
            "X+" | "x+" | "xplus" => Some(RadiativeSpecies::PositiveTrion),
            "X-" | "x-" | "xminus" => Some(RadiativeSpecies::NegativeTrion),
            "X2" | "x2" | "biexciton" => Some(RadiativeSpecies::Biexciton),
            _ => None,
        }
    }
}

/// Number of (species, helicity) emission channels.
pub const NUM_EMISSION_CHANNELS: usize = 8;

/// Flat index of an emission channel: `species * 2 + helicity`.
pub fn emission_channel(species: RadiativeSpecies, helicity: Helicity) -> usize {
    species.index() * 2 + helicity.index()
}

/// One configuration of the dot's ground shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DotState {
    pub electrons: Shell,
    pub holes: Shell,
}

use Shell::{Empty as E0, Full as F2};
const fn s1(spin: Spin) -> Shell {
    Shell::Single(spin)
}

/// Fixed state order. Index 0 is the vacuum.
const ORDER: [DotState; NUM_STATES] = [
    DotState::new(E0, E0),                         // ∅
    DotState::new(s1(Spin::Up), E0),               // e↑
    DotState::new(s1(Spin::Down), E0),             // e↓
    DotState::new(E0, s1(Spin::Up)),               // h⇑
    DotState::new(E0, s1(Spin::Down)),             // h⇓
    DotState::new(F2, E0),                         // 2e
    DotState::new(E0, F2),                         // 2h
    DotState::new(s1(Spin::Down), s1(Spin::Up)),   // X_b⁺
    DotState::new(s1(Spin::Up), s1(Spin::Down)),   // X_b⁻
    DotState::new(s1(Spin::Up), s1(Spin::Up)),     // X_d⁺
    DotState::new(s1(Spin::Down), s1(Spin::Down)), // X_d⁻
    DotState::new(s1(Spin::Up), F2),               // X⁺↑
    DotState::new(s1(Spin::Down), F2),             // X⁺↓
    DotState::new(F2, s1(Spin::Up)),               // X⁻⇑
    DotState::new(F2, s1(Spin::Down)),             // X⁻⇓
    DotState::new(F2, F2),                         // X₂
];

impl DotState {
    pub const fn new(electrons: Shell, holes: Shell) -> Self {
        DotState { electrons, holes }
    }

    pub const VACUUM: DotState = ORDER[0];
    pub const BRIGHT_PLUS: DotState = ORDER[7];
    pub const BRIGHT_MINUS: DotState = ORDER[8];
    pub const DARK_PLUS: DotState = ORDER[9];
    pub const DARK_MINUS: DotState = ORDER[10];
    pub const TRION_PLUS_UP: DotState = ORDER[11];
    pub const TRION_PLUS_DOWN: DotState = ORDER[12];
    pub const TRION_MINUS_UP: DotState = ORDER[13];
    pub const TRION_MINUS_DOWN: DotState = ORDER[14];
    pub const BIEXCITON: DotState = ORDER[15];

    pub fn electron(spin: Spin) -> DotState {
        DotState::new(Shell::Single(spin), Shell::Empty)
    }

    pub fn hole(spin: Spin) -> DotState {
        DotState::new(Shell::Empty, Shell::Single(spin))
    }

    /// Position in [`enumerate_states`].
    pub fn index(self) -> usize {
        ORDER
            .iter()
            .position(|s| *s == self)
            .expect("every shell combination is enumerated")
    }

    pub fn from_index(index: usize) -> Option<DotState> {
        ORDER.get(index).copied()
    }

    pub fn species(self) -> Species {
        use Shell::*;
        match (self.electrons, self.holes) {
            (Empty, Empty) => Species::Empty,
            (Single(_), Empty) => Species::Electron,
            (Empty, Single(_)) => Species::Hole,
            (Full, Empty) => Species::BiElectron,
            (Empty, Full) => Species::BiHole,
            (Single(e), Single(h)) => {
                if pair_helicity(e, h).is_some() {
                    Species::BrightExciton
                } else {
                    Species::DarkExciton
                }
            }
            (Single(_), Full) => Species::PositiveTrion,
            (Full, Single(_)) => Species::NegativeTrion,
            (Full, Full) => Species::Biexciton,
        }
    }

    /// Short label used in diagnostics and config files.
    pub fn label(self) -> &'static str {
        const LABELS: [&str; NUM_STATES] = [
            "empty", "e_up", "e_down", "h_up", "h_down", "2e", "2h", "xb_plus", "xb_minus",
            "xd_plus", "xd_minus", "xplus_up", "xplus_down", "xminus_up", "xminus_down", "x2",
        ];
        LABELS[self.index()]
    }

    pub fn from_label(label: &str) -> Option<DotState> {
        enumerate_states().into_iter().find(|s| s.label() == label)
    }

    pub fn add_pair(self, electron: Spin, hole: Spin) -> Option<DotState> {
        Some(DotState::new(
            self.electrons.add(electron)?,
            self.holes.add(hole)?,
        ))
    }
}

impl fmt::Display for DotState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// All sixteen states in index order.
pub fn enumerate_states() -> [DotState; NUM_STATES] {
    ORDER
}

/// Helicity of a recombining (electron, hole) pair; `None` for dark pairs.
pub fn pair_helicity(electron: Spin, hole: Spin) -> Option<Helicity> {
    match (electron, hole) {
        (Spin::Down, Spin::Up) => Some(Helicity::Plus),
        (Spin::Up, Spin::Down) => Some(Helicity::Minus),
        _ => None,
    }
}

/// A radiative recombination channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub initial: DotState,
    pub final_state: DotState,
    pub helicity: Helicity,
    pub species: RadiativeSpecies,
}

/// Radiative channels out of `state`. Dark excitons and states without an
/// electron-hole pair have none.
pub fn radiative_channels(state: DotState) -> Vec<Transition> {
    use Shell::*;
    let t = |final_state, helicity, species| Transition {
        initial: state,
        final_state,
        helicity,
        species,
    };
    match (state.electrons, state.holes) {
        (Single(e), Single(h)) => match pair_helicity(e, h) {
            Some(hel) => vec![t(DotState::VACUUM, hel, RadiativeSpecies::Exciton)],
            None => Vec::new(),
        },
        // The electron picks its bright partner out of the hole singlet.
        (Single(e), Full) => {
            let partner = e.flipped();
            let hel = pair_helicity(e, partner).expect("e and flipped hole form a bright pair");
            vec![t(DotState::hole(e), hel, RadiativeSpecies::PositiveTrion)]
        }
        // The hole takes its bright partner out of the electron singlet,
        // leaving the same spin label; helicity follows that electron.
        (Full, Single(h)) => {
            let remaining = h;
            let hel = match remaining {
                Spin::Down => Helicity::Plus,
                Spin::Up => Helicity::Minus,
            };
            vec![t(DotState::electron(remaining), hel, RadiativeSpecies::NegativeTrion)]
        }
        (Full, Full) => vec![
            t(DotState::BRIGHT_PLUS, Helicity::Minus, RadiativeSpecies::Biexciton),
            t(DotState::BRIGHT_MINUS, Helicity::Plus, RadiativeSpecies::Biexciton),
        ],
        _ => Vec::new(),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LevelsError {
    #[error("transition {from} -> {to} is not a radiative channel")]
    NotRadiative { from: DotState, to: DotState },
    #[error("invalid energy table: {0}")]
    InvalidTable(String),
}

/// Per-species quantities, indexed by [`RadiativeSpecies::index`].
pub type PerSpecies = [f64; 4];

/// Line energies and their Zeeman and Stark dependence.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTable {
    /// Zero-field, reference-bias transition energy per species (µeV).
    pub base_uev: PerSpecies,
    /// Exciton g-factor per species.
    pub g_factor: PerSpecies,
    /// Linear Stark coefficient (µeV/V).
    pub stark_uev_per_v: f64,
    /// Bias at which the Stark shift vanishes (V).
    pub v_ref: f64,
    /// Magnetic field along the growth axis (T).
    pub field_t: f64,
}

/// Neutral exciton line, ≈ 896 nm.
pub const DEFAULT_EXCITON_UEV: f64 = 1_384_000.0;

impl Default for EnergyTable {
    fn default() -> Self {
        EnergyTable::from_offsets(DEFAULT_EXCITON_UEV, -3000.0, -2000.0, 4000.0)
    }
}

impl EnergyTable {
    /// Builds a table from the exciton line and the other lines' offsets
    /// relative to it.
    pub fn from_offsets(exciton: f64, biexciton: f64, positive: f64, negative: f64) -> Self {
        let mut base = [0.0; 4];
        base[RadiativeSpecies::Exciton.index()] = exciton;
        base[RadiativeSpecies::Biexciton.index()] = exciton + biexciton;
        base[RadiativeSpecies::PositiveTrion.index()] = exciton + positive;
        base[RadiativeSpecies::NegativeTrion.index()] = exciton + negative;
        EnergyTable {
            base_uev: base,
            g_factor: [3.0; 4],
            stark_uev_per_v: 50.0,
            v_ref: 1.25,
            field_t: 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), LevelsError> {
        for s in RadiativeSpecies::ALL {
            let e = self.base_uev[s.index()];
            if !(e.is_finite() && e > 0.0) {
                return Err(LevelsError::InvalidTable(format!(
                    "base energy of {} must be > 0, got {e}",
                    s.label()
                )));
            }
            if !self.g_factor[s.index()].is_finite() {
                return Err(LevelsError::InvalidTable(format!(
                    "g-factor of {} is not finite",
                    s.label()
                )));
            }
        }
        if !self.field_t.is_finite() || !self.stark_uev_per_v.is_finite() || !self.v_ref.is_finite()
        {
            return Err(LevelsError::InvalidTable("non-finite field, Stark or reference bias".into()));
        }
        Ok(())
    }

    /// Zeeman doublet separation Δ_Z = |g|·µ_B·B (µeV).
    pub fn zeeman_splitting(&self, species: RadiativeSpecies) -> f64 {
        (self.g_factor[species.index()] * BOHR_MAGNETON_UEV_PER_T * self.field_t).abs()
    }

    pub fn stark_shift(&self, bias: f64) -> f64 {
        self.stark_uev_per_v * (bias - self.v_ref)
    }

    /// Energy of a species line without checking the transition.
    pub fn line_energy(&self, species: RadiativeSpecies, helicity: Helicity, bias: f64) -> f64 {
        self.base_uev[species.index()]
            + helicity.sign() * self.zeeman_splitting(species) / 2.0
            + self.stark_shift(bias)
    }
}

/// Photon energy of a radiative transition at the given bias (µeV).
pub fn transition_energy(t: &Transition, bias: f64, table: &EnergyTable) -> Result<f64, LevelsError> {
    if !radiative_channels(t.initial).contains(t) {
        return Err(LevelsError::NotRadiative {
            from: t.initial,
            to: t.final_state,
        });
    }
    Ok(table.line_energy(t.species, t.helicity, bias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// Independent count: every (electron shell, hole shell) pair where each
    /// shell is one of {empty, ↑, ↓, singlet}.
    fn brute_force_count() -> usize {
        let shells = [
            Shell::Empty,
            Shell::Single(Spin::Up),
            Shell::Single(Spin::Down),
            Shell::Full,
        ];
        let mut n = 0;
        for e in shells {
            for h in shells {
                if e.count() <= 2 && h.count() <= 2 {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn sixteen_unique_states() {
        let states = enumerate_states();
        assert_eq!(states.len(), brute_force_count());
        assert_eq!(states.len(), 16);
        let set: HashSet<_> = states.iter().collect();
        assert_eq!(set.len(), 16);
        for (i, s) in states.iter().enumerate() {
            assert_eq!(s.index(), i);
            assert_eq!(DotState::from_index(i), Some(*s));
            assert_eq!(DotState::from_label(s.label()), Some(*s));
        }
        assert_eq!(DotState::VACUUM.index(), 0);
    }

    #[test]
    fn species_classification_counts() {
        let mut counts = std::collections::HashMap::new();
        for s in enumerate_states() {
            *counts.entry(s.species()).or_insert(0) += 1;
        }
        assert_eq!(counts[&Species::Empty], 1);
        assert_eq!(counts[&Species::Electron], 2);
        assert_eq!(counts[&Species::Hole], 2);
        assert_eq!(counts[&Species::BiElectron], 1);
        assert_eq!(counts[&Species::BiHole], 1);
        assert_eq!(counts[&Species::BrightExciton], 2);
        assert_eq!(counts[&Species::DarkExciton], 2);
        assert_eq!(counts[&Species::PositiveTrion], 2);
        assert_eq!(counts[&Species::NegativeTrion], 2);
        assert_eq!(counts[&Species::Biexciton], 1);
        assert_eq!(DotState::BRIGHT_PLUS.species(), Species::BrightExciton);
        assert_eq!(DotState::DARK_PLUS.species(), Species::DarkExciton);
    }

    #[test]
    fn trion_selection_rules() {
        let ch = radiative_channels(DotState::TRION_PLUS_DOWN);
        assert_eq!(ch.len(), 1);
        assert_eq!(ch[0].final_state, DotState::hole(Spin::Down));
        assert_eq!(ch[0].helicity, Helicity::Plus);
        let ch = radiative_channels(DotState::TRION_PLUS_UP);
        assert_eq!(ch[0].final_state, DotState::hole(Spin::Up));
        assert_eq!(ch[0].helicity, Helicity::Minus);

        let ch = radiative_channels(DotState::TRION_MINUS_DOWN);
        assert_eq!(ch[0].final_state, DotState::electron(Spin::Down));
        assert_eq!(ch[0].helicity, Helicity::Plus);
        let ch = radiative_channels(DotState::TRION_MINUS_UP);
        assert_eq!(ch[0].final_state, DotState::electron(Spin::Up));
        assert_eq!(ch[0].helicity, Helicity::Minus);
    }

    #[test]
    fn bright_dark_and_biexciton_channels() {
        let ch = radiative_channels(DotState::BRIGHT_PLUS);
        assert_eq!(ch.len(), 1);
        assert_eq!((ch[0].final_state, ch[0].helicity), (DotState::VACUUM, Helicity::Plus));
        let ch = radiative_channels(DotState::BRIGHT_MINUS);
        assert_eq!((ch[0].final_state, ch[0].helicity), (DotState::VACUUM, Helicity::Minus));
        assert!(radiative_channels(DotState::DARK_PLUS).is_empty());
        assert!(radiative_channels(DotState::DARK_MINUS).is_empty());

        let ch = radiative_channels(DotState::BIEXCITON);
        assert_eq!(ch.len(), 2);
        assert_ne!(ch[0].helicity, ch[1].helicity);
        assert!(ch.iter().any(|t| t.final_state == DotState::BRIGHT_PLUS && t.helicity == Helicity::Minus));
        assert!(ch.iter().any(|t| t.final_state == DotState::BRIGHT_MINUS && t.helicity == Helicity::Plus));

        for s in enumerate_states() {
            let sp = s.species();
            let radiative = matches!(
                sp,
                Species::BrightExciton | Species::PositiveTrion | Species::NegativeTrion | Species::Biexciton
            );
            assert_eq!(!radiative_channels(s).is_empty(), radiative, "{s}");
        }
    }

    #[test]
    fn every_channel_removes_one_pair() {
        for s in enumerate_states() {
            for t in radiative_channels(s) {
                assert_eq!(t.initial.electrons.count(), t.final_state.electrons.count() + 1);
                assert_eq!(t.initial.holes.count(), t.final_state.holes.count() + 1);
            }
        }
    }

    #[test]
    fn write_read_helicity_closure() {
        // σ⁺ pump creates X_b⁺; hole leaves; two holes return; X⁺ emits σ⁺.
        let written = DotState::VACUUM.add_pair(Spin::Down, Spin::Up).unwrap();
        assert_eq!(written, DotState::BRIGHT_PLUS);
        let stored = DotState::new(written.electrons, Shell::Empty);
        let read = DotState::new(stored.electrons, Shell::Full);
        let ch = radiative_channels(read);
        assert_eq!(ch[0].helicity, Helicity::Plus);
    }

    #[test]
    fn pauli_blocking() {
        assert_eq!(Shell::Single(Spin::Up).add(Spin::Up), None);
        assert_eq!(Shell::Single(Spin::Up).add(Spin::Down), Some(Shell::Full));
        assert_eq!(Shell::Full.add(Spin::Down), None);
        assert_eq!(Shell::Full.remove(Spin::Up), Some(Shell::Single(Spin::Down)));
        assert_eq!(Shell::Empty.remove(Spin::Up), None);
    }

    #[test]
    fn energy_zero_field_reference_bias() {
        let mut table = EnergyTable::default();
        table.field_t = 0.0;
        let t = radiative_channels(DotState::TRION_PLUS_DOWN)[0];
        let e = transition_energy(&t, table.v_ref, &table).unwrap();
        assert_eq!(e, table.base_uev[RadiativeSpecies::PositiveTrion.index()]);
    }

    #[test]
    fn doublet_and_stark() {
        let table = EnergyTable::default();
        let plus = radiative_channels(DotState::BRIGHT_PLUS)[0];
        let minus = radiative_channels(DotState::BRIGHT_MINUS)[0];
        let ep = transition_energy(&plus, table.v_ref, &table).unwrap();
        let em = transition_energy(&minus, table.v_ref, &table).unwrap();
        // 3 × 57.88 µeV/T × 2 T
        assert!((ep - em - 347.28).abs() < 1e-9);
        let bias = table.v_ref - 0.4;
        let ep2 = transition_energy(&plus, bias, &table).unwrap();
        let em2 = transition_energy(&minus, bias, &table).unwrap();
        assert!((ep2 - ep + 20.0).abs() < 1e-9);
        assert!((em2 - em + 20.0).abs() < 1e-9);
    }

    #[test]
    fn non_radiative_transition_rejected() {
        let table = EnergyTable::default();
        let bogus = Transition {
            initial: DotState::DARK_PLUS,
            final_state: DotState::VACUUM,
            helicity: Helicity::Plus,
            species: RadiativeSpecies::Exciton,
        };
        assert!(matches!(
            transition_energy(&bogus, 0.0, &table),
            Err(LevelsError::NotRadiative { .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn doublet_separation_independent_of_bias(bias in -2.0f64..3.0, g in 0.0f64..5.0, b in 0.0f64..10.0) {
            let mut table = EnergyTable::default();
            table.g_factor = [g; 4];
            table.field_t = b;
            for sp in RadiativeSpecies::ALL {
                let d = table.line_energy(sp, Helicity::Plus, bias) - table.line_energy(sp, Helicity::Minus, bias);
                proptest::prop_assert!((d - table.zeeman_splitting(sp)).abs() < 1e-8);
            }
        }
    }
}

use qdmem::analysis::{emission_histogram, expected_histogram, memory_from_areas};
use qdmem::engine::{evolve_master, inject_distribution, run_shots, run_shots_with, Execution};
use qdmem::levels::{emission_channel, radiative_channels, DotState, Helicity, RadiativeSpecies, NUM_STATES};
use qdmem::pulses::{ExperimentProtocol, LaserPulse, PumpPolarization};
use qdmem::report::CompareReport;

fn start(state: DotState) -> [f64; NUM_STATES] {
    let mut p = [0.0; NUM_STATES];
    p[state.index()] = 1.0;
    p
}

fn x_plus_areas(p: &ExperimentProtocol) -> (f64, f64) {
    let traj = evolve_master(&start(DotState::VACUUM), p, p.dt_ns).unwrap();
    let read = traj.emitted_between(p.read_delay_ns().unwrap(), p.period_ns);
    let c = |h| read[emission_channel(RadiativeSpecies::PositiveTrion, h)];
    (c(Helicity::Minus), c(Helicity::Plus))
}

/// Hand trace of one weak-pump cycle: pair → hole leaves → stored electron
/// → two holes captured → X⁺ emits with the helicity fixed by the electron.
fn enumerated_degree(pol: PumpPolarization, f: f64) -> f64 {
    let pulse = LaserPulse::new(0.0, pol, 1e-6);
    let after = inject_distribution(&start(DotState::VACUUM), &pulse, f);
    let (mut i_l, mut i_r) = (0.0, 0.0);
    for (bright, e) in [(DotState::BRIGHT_PLUS, DotState::TRION_PLUS_DOWN), (DotState::BRIGHT_MINUS, DotState::TRION_PLUS_UP)] {
        let w = after[bright.index()];
        for t in radiative_channels(e) {
            match t.helicity {
                Helicity::Minus => i_l += w,
                Helicity::Plus => i_r += w,
            }
        }
    }
    memory_from_areas(i_l, i_r).unwrap().degree
}

#[test]
fn weak_pump_degree_matches_enumeration() {
    for (pol, f) in [(PumpPolarization::R, 0.9), (PumpPolarization::L, 0.9), (PumpPolarization::R, 0.7)] {
        let mut p = ExperimentProtocol::storage_replica(600.0);
        p.lasers = vec![LaserPulse::new(0.0, pol, 0.01)];
        p.rates.write_fidelity = f;
        p.rates = p.rates.without_spin_flips();
        let (i_l, i_r) = x_plus_areas(&p);
        let d = memory_from_areas(i_l, i_r).unwrap().degree;
        let want = enumerated_degree(pol, f);
        let sign = if pol == PumpPolarization::R { -1.0 } else { 1.0 };
        // O(µ) multi-pair correction only
        assert!((want - sign * (2.0 * f - 1.0)).abs() < 1e-6, "{want}");
        assert!((d - want).abs() < 2e-3, "{pol:?} f={f}: {d} vs {want}");
    }
}

#[test]
fn spin_flips_shrink_the_memory() {
    let mut p = ExperimentProtocol::storage_replica(600.0);
    p.rates.write_fidelity = 1.0;
    let mut last = f64::INFINITY;
    for t1 in [1.0e6, 2000.0, 500.0, 100.0] {
        p.rates.t1_electron_ns = t1;
        let (i_l, i_r) = x_plus_areas(&p);
        let d = memory_from_areas(i_l, i_r).unwrap().degree.abs();
        assert!(d < last, "T1 = {t1}: {d} !< {last}");
        last = d;
    }
    assert!(last < 0.05);
}

#[test]
fn kmc_matches_master_with_flips_and_left_pump() {
    let mut p = ExperimentProtocol::storage_replica(300.0);
    p.period_ns = 500.0;
    p.lasers = vec![LaserPulse::new(0.0, PumpPolarization::L, 0.5)];
    p.rates.write_fidelity = 0.8;
    p.rates.t1_electron_ns = 400.0;
    p.rates.t1_hole_ns = 50.0;
    let cycles = 30_000;
    let traj = evolve_master(&start(DotState::VACUUM), &p, 0.01).unwrap();
    let expected = expected_histogram(&traj, &p, None, 1.0, (0.0, p.period_ns), cycles, false);
    let run = run_shots(&p, cycles, 77).unwrap();
    let observed = emission_histogram(&run.events, &p, None, 1.0, (0.0, p.period_ns), cycles);
    let r = CompareReport::new(&p, cycles, 77, &expected, &observed);
    assert!(!r.insufficient_statistics);
    assert!(r.max_abs_z <= 4.5, "max |z| = {}", r.max_abs_z);
    assert!(r.relative_l2 <= 0.05, "L2 = {}", r.relative_l2);
}

#[test]
fn execution_mode_never_changes_results() {
    let mut p = ExperimentProtocol::storage_replica(400.0);
    p.lasers[0].polarization = PumpPolarization::H;
    let a = run_shots_with(&p, 3000, 8, Execution::Sequential).unwrap();
    let b = run_shots_with(&p, 3000, 8, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.summary.cycles, 3000);
    assert_eq!(a.summary.emitted.iter().sum::<u64>() as usize, a.events.len());
}

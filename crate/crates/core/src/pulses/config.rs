//! Protocol config files.
//!
//! ```text
//! # comment
//! [run]
//! period_ns = 1000
//! [laser.0]
//! time_ns = 0
//! polarization = R
//! ```
//!
//! Sections: `[device]`, `[energies]`, `[rates]`, `[laser.N]`,
//! `[acpulse.N]`, `[analyzer]`, `[detector]`, `[run]`, `[analysis]`.
//! Times are in ns, biases in V, energies in µeV, rates in ns⁻¹, angles in
//! degrees. Unknown sections and keys are errors.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use super::waveform::{AcPulse, BiasWaveform, LaserPulse, PumpPolarization, WaveformError};
use super::ExperimentProtocol;
use crate::levels::{DotState, RadiativeSpecies};
use crate::optics::Analyzer;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: duplicate section [{name}]")]
    DuplicateSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: duplicate key `{key}` in [{section}]")]
    DuplicateKey { line: usize, section: String, key: String },
    #[error("line {line}: invalid value for `{key}`: {msg}")]
    InvalidValue { line: usize, key: String, msg: String },
    #[error("missing required key `{key}` in [{section}]")]
    Missing { section: String, key: String },
    #[error("{}`{key}`: {msg}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invariant { line: Option<usize>, key: String, msg: String },
}

impl ConfigError {
    /// `path:line: message`, the form editors jump to.
    pub fn located(&self, path: &str) -> String {
        let msg = self.to_string();
        match self.line() {
            Some(l) => {
                let prefix = format!("line {l}: ");
                format!("{path}:{l}: {}", msg.strip_prefix(&prefix).unwrap_or(&msg))
            }
            None => format!("{path}: {msg}"),
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Syntax { line, .. }
            | ConfigError::UnknownSection { line, .. }
            | ConfigError::DuplicateSection { line, .. }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::DuplicateKey { line, .. }
            | ConfigError::InvalidValue { line, .. } => Some(*line),
            ConfigError::Invariant { line, .. } => *line,
            ConfigError::Missing { .. } => None,
        }
    }
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Section {
    name: String,
    entries: BTreeMap<String, Entry>,
}

/// Line numbers of parsed keys, keyed `section.key`, for invariant errors.
pub(crate) type KeyLines = HashMap<String, usize>;

impl Section {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<f64>().map(Some).map_err(|_| ConfigError::InvalidValue {
                line,
                key: key.to_string(),
                msg: format!("`{v}` is not a number"),
            }),
        }
    }

    fn required_f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.opt_f64(key)?.ok_or_else(|| ConfigError::Missing {
            section: self.name.clone(),
            key: key.to_string(),
        })
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => v.parse::<u64>().map_err(|_| ConfigError::InvalidValue {
                line,
                key: key.to_string(),
                msg: format!("`{v}` is not a non-negative integer"),
            }),
        }
    }

    fn parsed<T>(
        &mut self,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> Option<T>,
        expected: &str,
    ) -> Result<T, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => parse(&v).ok_or_else(|| ConfigError::InvalidValue {
                line,
                key: key.to_string(),
                msg: format!("`{v}` is not {expected}"),
            }),
        }
    }

    fn finish(self, lines: &mut KeyLines) -> Result<(), ConfigError> {
        for (key, e) in &self.entries {
            if !e.used {
                return Err(ConfigError::UnknownKey {
                    line: e.line,
                    section: self.name.clone(),
                    key: key.clone(),
                });
            }
            lines.insert(format!("{}.{}", self.name, key), e.line);
        }
        Ok(())
    }
}

fn tokenize(text: &str) -> Result<Vec<(Section, usize)>, ConfigError> {
    let mut sections: Vec<(Section, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: "section header must end with `]`".into(),
            })?;
            let name = name.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("bad section name `{name}`"),
                });
            }
            if sections.iter().any(|(s, _)| s.name == name) {
                return Err(ConfigError::DuplicateSection {
                    line,
                    name: name.to_string(),
                });
            }
            sections.push((
                Section {
                    name: name.to_string(),
                    entries: BTreeMap::new(),
                },
                line,
            ));
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: "expected `key = value` or `[section]`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                msg: "empty key or value".into(),
            });
        }
        let (section, _) = sections.last_mut().ok_or_else(|| ConfigError::Syntax {
            line,
            msg: "key outside of any section".into(),
        })?;
        if section.entries.contains_key(key) {
            return Err(ConfigError::DuplicateKey {
                line,
                section: section.name.clone(),
                key: key.to_string(),
            });
        }
        section.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
                used: false,
            },
        );
    }
    Ok(sections)
}

fn indexed(name: &str, prefix: &str) -> Option<u32> {
    name.strip_prefix(prefix)?.strip_prefix('.')?.parse().ok()
}

fn parse_species(s: &str) -> Option<Option<RadiativeSpecies>> {
    if s == "all" {
        Some(None)
    } else {
        RadiativeSpecies::from_label(s).map(Some)
    }
}

/// Parses and validates a protocol config.
pub fn parse_protocol(text: &str) -> Result<ExperimentProtocol, ConfigError> {
    let sections = tokenize(text)?;
    let mut p = ExperimentProtocol::new(1000.0);
    let mut lines = KeyLines::new();
    let mut have_run = false;
    let mut lasers: Vec<(u32, LaserPulse)> = Vec::new();
    let mut acpulses: Vec<(u32, AcPulse)> = Vec::new();
    let mut dc_v = p.waveform.dc_v();

    for (mut s, header_line) in sections {
        match s.name.as_str() {
            "device" => {
                p.energies.field_t = s.f64("magnetic_field_t", p.energies.field_t)?;
                dc_v = s.f64("dc_bias_v", dc_v)?;
                p.initial_state =
                    s.parsed("initial_state", p.initial_state, DotState::from_label, "a state label")?;
            }
            "energies" => {
                let e = &mut p.energies;
                for (sp, key, gkey) in [
                    (RadiativeSpecies::Exciton, "x_uev", "g_x"),
                    (RadiativeSpecies::PositiveTrion, "xplus_uev", "g_xplus"),
                    (RadiativeSpecies::NegativeTrion, "xminus_uev", "g_xminus"),
                    (RadiativeSpecies::Biexciton, "x2_uev", "g_x2"),
                ] {
                    e.base_uev[sp.index()] = s.f64(key, e.base_uev[sp.index()])?;
                    e.g_factor[sp.index()] = s.f64(gkey, e.g_factor[sp.index()])?;
                }
                e.stark_uev_per_v = s.f64("stark_uev_per_v", e.stark_uev_per_v)?;
                e.v_ref = s.f64("v_ref_v", e.v_ref)?;
            }
            "rates" => {
                let r = &mut p.rates;
                for (prefix, m) in [("hole_tunnel", &mut r.hole_tunnel), ("electron_tunnel", &mut r.electron_tunnel)] {
                    m.rate0 = s.f64(&format!("{prefix}_rate0"), m.rate0)?;
                    m.threshold_v = s.f64(&format!("{prefix}_threshold_v"), m.threshold_v)?;
                    m.slope_v = s.f64(&format!("{prefix}_slope_v"), m.slope_v)?;
                    m.max_rate = s.f64(&format!("{prefix}_max_rate"), m.max_rate)?;
                }
                r.capture.rate0 = s.f64("capture_rate0", r.capture.rate0)?;
                r.capture.threshold_v = s.f64("capture_threshold_v", r.capture.threshold_v)?;
                r.capture.slope_v = s.f64("capture_slope_v", r.capture.slope_v)?;
                r.tau_x_ns = s.f64("tau_x_ns", r.tau_x_ns)?;
                r.tau_xplus_ns = s.f64("tau_xplus_ns", r.tau_xplus_ns)?;
                r.tau_xminus_ns = s.f64("tau_xminus_ns", r.tau_xminus_ns)?;
                r.tau_x2_ns = s.f64("tau_x2_ns", r.tau_x2_ns)?;
                r.t1_electron_ns = s.f64("t1_electron_ns", r.t1_electron_ns)?;
                r.t1_hole_ns = s.f64("t1_hole_ns", r.t1_hole_ns)?;
                r.write_fidelity = s.f64("write_fidelity", r.write_fidelity)?;
                r.generation_rate = s.f64("generation_rate", r.generation_rate)?;
            }
            "analyzer" => {
                let qwp = s.f64("qwp_deg", p.analyzer.sigma_plus.qwp_deg)?;
                let hp = s.f64("hwp_sigma_plus_deg", p.analyzer.sigma_plus.hwp_deg)?;
                let hm = s.f64("hwp_sigma_minus_deg", p.analyzer.sigma_minus.hwp_deg)?;
                let pol = s.f64("polarizer_deg", p.analyzer.sigma_plus.polarizer_deg)?;
                let err = s.f64("qwp_retardance_error_rad", p.analyzer.sigma_plus.qwp_retardance_error)?;
                p.analyzer = Analyzer::with_angles(qwp, hp, hm, pol, err);
            }
            "detector" => {
                let d = &mut p.detector;
                d.jitter_ns = s.f64("jitter_ns", d.jitter_ns)?;
                d.efficiency = s.f64("efficiency", d.efficiency)?;
                d.dead_time_ns = s.f64("dead_time_ns", d.dead_time_ns)?;
            }
            "run" => {
                have_run = true;
                p.period_ns = s.required_f64("period_ns")?;
                p.cycles = s.u64("cycles", p.cycles)?;
                p.seed = s.u64("seed", p.seed)?;
                p.dt_ns = s.f64("dt_ns", p.dt_ns)?;
            }
            "analysis" => {
                let a = &mut p.analysis;
                a.bin_width_ns = s.f64("bin_width_ns", a.bin_width_ns)?;
                a.species = s.parsed("species", a.species, parse_species, "a species label or `all`")?;
                a.read_start_ns = s.opt_f64("read_start_ns")?.or(a.read_start_ns);
                a.read_window_ns = s.opt_f64("read_window_ns")?.or(a.read_window_ns);
                a.fit_start_ns = s.opt_f64("fit_start_ns")?.or(a.fit_start_ns);
                a.fit_end_ns = s.opt_f64("fit_end_ns")?.or(a.fit_end_ns);
                a.linewidth_uev = s.f64("linewidth_uev", a.linewidth_uev)?;
                a.energy_min_uev = s.opt_f64("energy_min_uev")?.or(a.energy_min_uev);
                a.energy_max_uev = s.opt_f64("energy_max_uev")?.or(a.energy_max_uev);
                a.energy_step_uev = s.f64("energy_step_uev", a.energy_step_uev)?;
            }
            name => {
                if let Some(n) = indexed(name, "laser") {
                    let time = s.required_f64("time_ns")?;
                    let mut pulse = LaserPulse::new(time, PumpPolarization::R, 0.3);
                    pulse.fwhm_ns = s.f64("fwhm_ns", pulse.fwhm_ns)?;
                    pulse.polarization =
                        s.parsed("polarization", pulse.polarization, PumpPolarization::parse, "R, L, H, V or unpolarized")?;
                    pulse.mean_pairs = s.f64("mean_pairs", pulse.mean_pairs)?;
                    lasers.push((n, pulse));
                } else if let Some(n) = indexed(name, "acpulse") {
                    let pulse = AcPulse {
                        start_ns: s.required_f64("start_ns")?,
                        duration_ns: s.required_f64("duration_ns")?,
                        amplitude_v: s.required_f64("amplitude_v")?,
                        rise_ns: s.f64("rise_ns", AcPulse::DEFAULT_RISE_NS)?,
                    };
                    acpulses.push((n, pulse));
                } else {
                    return Err(ConfigError::UnknownSection {
                        line: header_line,
                        name: name.to_string(),
                    });
                }
            }
        }
        s.finish(&mut lines)?;
    }

    if !have_run {
        return Err(ConfigError::Missing {
            section: "run".into(),
            key: "period_ns".into(),
        });
    }

    lasers.sort_by_key(|(n, _)| *n);
    acpulses.sort_by_key(|(n, _)| *n);
    let ac_ids: Vec<u32> = acpulses.iter().map(|(n, _)| *n).collect();
    p.lasers = lasers.into_iter().map(|(_, l)| l).collect();
    p.waveform = BiasWaveform::new(dc_v, acpulses.into_iter().map(|(_, a)| a).collect()).map_err(|e| match e {
        WaveformError::InvalidPulse { index, msg } => {
            let key = format!("acpulse.{}", ac_ids[index]);
            ConfigError::Invariant {
                line: lines.get(&format!("{key}.start_ns")).copied(),
                key,
                msg,
            }
        }
        WaveformError::Overlap { first, second } => ConfigError::Invariant {
            line: None,
            key: format!("acpulse.{}", ac_ids[second]),
            msg: format!("overlaps acpulse.{}", ac_ids[first]),
        },
    })?;
    validate_protocol_with_ids(&p, &lines, Some(&ac_ids))?;
    Ok(p)
}

pub(crate) fn validate_protocol(p: &ExperimentProtocol, lines: &KeyLines) -> Result<(), ConfigError> {
    validate_protocol_with_ids(p, lines, None)
}

fn validate_protocol_with_ids(
    p: &ExperimentProtocol,
    lines: &KeyLines,
    ac_ids: Option<&[u32]>,
) -> Result<(), ConfigError> {
    let invariant = |key: String, msg: String| ConfigError::Invariant {
        line: lines.get(&key).copied(),
        key,
        msg,
    };
    if !(p.period_ns > 0.0 && p.period_ns.is_finite()) {
        return Err(invariant("run.period_ns".into(), "must be > 0".into()));
    }
    if !(p.dt_ns > 0.0) {
        return Err(invariant("run.dt_ns".into(), "must be > 0".into()));
    }
    for (i, l) in p.lasers.iter().enumerate() {
        let name = format!("laser.{i}");
        if !(0.0..p.period_ns).contains(&l.time_ns) {
            return Err(invariant(
                format!("{name}.time_ns"),
                format!("pulse at {} ns lies outside the {} ns period", l.time_ns, p.period_ns),
            ));
        }
        if !(l.fwhm_ns > 0.0 && l.fwhm_ns.is_finite()) {
            return Err(invariant(format!("{name}.fwhm_ns"), "must be > 0".into()));
        }
        if !(l.mean_pairs >= 0.0 && l.mean_pairs.is_finite()) {
            return Err(invariant(format!("{name}.mean_pairs"), "must be >= 0".into()));
        }
    }
    for (i, a) in p.waveform.pulses().iter().enumerate() {
        let id = ac_ids.map(|ids| ids[i]).unwrap_or(i as u32);
        let name = format!("acpulse.{id}");
        if a.start_ns < 0.0 || a.end_ns() > p.period_ns {
            return Err(ConfigError::Invariant {
                line: lines.get(&format!("{name}.start_ns")).copied(),
                key: name,
                msg: format!(
                    "pulse [{}, {}] ns lies outside the {} ns period",
                    a.start_ns,
                    a.end_ns(),
                    p.period_ns
                ),
            });
        }
    }
    if !p.waveform.dc_v().is_finite() {
        return Err(invariant("device.dc_bias_v".into(), "must be finite".into()));
    }
    p.energies
        .validate()
        .map_err(|e| invariant("energies".into(), e.to_string()))?;
    p.rates
        .validate()
        .map_err(|e| invariant(format!("rates.{}", e.key), e.msg))?;
    let d = &p.detector;
    if !(d.jitter_ns >= 0.0 && d.jitter_ns.is_finite()) {
        return Err(invariant("detector.jitter_ns".into(), "must be >= 0".into()));
    }
    if !(d.efficiency > 0.0 && d.efficiency <= 1.0) {
        return Err(invariant("detector.efficiency".into(), "must lie in (0, 1]".into()));
    }
    if !(d.dead_time_ns >= 0.0) {
        return Err(invariant("detector.dead_time_ns".into(), "must be >= 0".into()));
    }
    p.analysis
        .validate()
        .map_err(|(key, msg)| invariant(format!("analysis.{key}"), msg))?;
    Ok(())
}

fn num(x: f64) -> String {
    // Debug formatting is the shortest representation that round-trips.
    format!("{x:?}")
}

/// Canonical serialization with every key spelled out.
pub(crate) fn serialize(p: &ExperimentProtocol) -> String {
    let mut out = String::new();
    let kv = |out: &mut String, k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    out.push_str("[run]\n");
    kv(&mut out, "period_ns", num(p.period_ns));
    kv(&mut out, "cycles", p.cycles.to_string());
    kv(&mut out, "seed", p.seed.to_string());
    kv(&mut out, "dt_ns", num(p.dt_ns));

    out.push_str("\n[device]\n");
    kv(&mut out, "magnetic_field_t", num(p.energies.field_t));
    kv(&mut out, "dc_bias_v", num(p.waveform.dc_v()));
    kv(&mut out, "initial_state", p.initial_state.label().to_string());

    out.push_str("\n[energies]\n");
    let e = &p.energies;
    for (sp, key, gkey) in [
        (RadiativeSpecies::Exciton, "x_uev", "g_x"),
        (RadiativeSpecies::PositiveTrion, "xplus_uev", "g_xplus"),
        (RadiativeSpecies::NegativeTrion, "xminus_uev", "g_xminus"),
        (RadiativeSpecies::Biexciton, "x2_uev", "g_x2"),
    ] {
        kv(&mut out, key, num(e.base_uev[sp.index()]));
        kv(&mut out, gkey, num(e.g_factor[sp.index()]));
    }
    kv(&mut out, "stark_uev_per_v", num(e.stark_uev_per_v));
    kv(&mut out, "v_ref_v", num(e.v_ref));

    out.push_str("\n[rates]\n");
    let r = &p.rates;
    for (prefix, m) in [("hole_tunnel", &r.hole_tunnel), ("electron_tunnel", &r.electron_tunnel)] {
        kv(&mut out, &format!("{prefix}_rate0"), num(m.rate0));
        kv(&mut out, &format!("{prefix}_threshold_v"), num(m.threshold_v));
        kv(&mut out, &format!("{prefix}_slope_v"), num(m.slope_v));
        kv(&mut out, &format!("{prefix}_max_rate"), num(m.max_rate));
    }
    kv(&mut out, "capture_rate0", num(r.capture.rate0));
    kv(&mut out, "capture_threshold_v", num(r.capture.threshold_v));
    kv(&mut out, "capture_slope_v", num(r.capture.slope_v));
    kv(&mut out, "tau_x_ns", num(r.tau_x_ns));
    kv(&mut out, "tau_xplus_ns", num(r.tau_xplus_ns));
    kv(&mut out, "tau_xminus_ns", num(r.tau_xminus_ns));
    kv(&mut out, "tau_x2_ns", num(r.tau_x2_ns));
    kv(&mut out, "t1_electron_ns", num(r.t1_electron_ns));
    kv(&mut out, "t1_hole_ns", num(r.t1_hole_ns));
    kv(&mut out, "write_fidelity", num(r.write_fidelity));
    kv(&mut out, "generation_rate", num(r.generation_rate));

    for (i, l) in p.lasers.iter().enumerate() {
        let _ = writeln!(out, "\n[laser.{i}]");
        kv(&mut out, "time_ns", num(l.time_ns));
        kv(&mut out, "fwhm_ns", num(l.fwhm_ns));
        kv(&mut out, "polarization", l.polarization.label().to_string());
        kv(&mut out, "mean_pairs", num(l.mean_pairs));
    }
    for (i, a) in p.waveform.pulses().iter().enumerate() {
        let _ = writeln!(out, "\n[acpulse.{i}]");
        kv(&mut out, "start_ns", num(a.start_ns));
        kv(&mut out, "duration_ns", num(a.duration_ns));
        kv(&mut out, "amplitude_v", num(a.amplitude_v));
        kv(&mut out, "rise_ns", num(a.rise_ns));
    }

    out.push_str("\n[analyzer]\n");
    let an = &p.analyzer;
    kv(&mut out, "qwp_deg", num(an.sigma_plus.qwp_deg));
    kv(&mut out, "hwp_sigma_plus_deg", num(an.sigma_plus.hwp_deg));
    kv(&mut out, "hwp_sigma_minus_deg", num(an.sigma_minus.hwp_deg));
    kv(&mut out, "polarizer_deg", num(an.sigma_plus.polarizer_deg));
    kv(&mut out, "qwp_retardance_error_rad", num(an.sigma_plus.qwp_retardance_error));

    out.push_str("\n[detector]\n");
    kv(&mut out, "jitter_ns", num(p.detector.jitter_ns));
    kv(&mut out, "efficiency", num(p.detector.efficiency));
    kv(&mut out, "dead_time_ns", num(p.detector.dead_time_ns));

    out.push_str("\n[analysis]\n");
    let a = &p.analysis;
    kv(&mut out, "bin_width_ns", num(a.bin_width_ns));
    kv(
        &mut out,
        "species",
        a.species.map(|s| s.label().to_string()).unwrap_or_else(|| "all".into()),
    );
    for (key, v) in [
        ("read_start_ns", a.read_start_ns),
        ("read_window_ns", a.read_window_ns),
        ("fit_start_ns", a.fit_start_ns),
        ("fit_end_ns", a.fit_end_ns),
        ("energy_min_uev", a.energy_min_uev),
        ("energy_max_uev", a.energy_max_uev),
    ] {
        if let Some(v) = v {
            kv(&mut out, key, num(v));
        }
    }
    kv(&mut out, "linewidth_uev", num(a.linewidth_uev));
    kv(&mut out, "energy_step_uev", num(a.energy_step_uev));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[run]
period_ns = 1000

[laser.0]
time_ns = 0
polarization = R

[acpulse.0]
start_ns = 600
duration_ns = 30
amplitude_v = 1.5
";

    #[test]
    fn minimal_config_gets_defaults() {
        let p = parse_protocol(MINIMAL).unwrap();
        assert_eq!(p.period_ns, 1000.0);
        assert_eq!(p.lasers.len(), 1);
        assert_eq!(p.lasers[0].fwhm_ns, 0.1);
        assert_eq!(p.waveform.pulses()[0].rise_ns, 1.0);
        assert_eq!(p.waveform.dc_v(), -0.05);
        assert_eq!(p.rates, crate::engine::RateParams::default());
        assert_eq!(p.initial_state, DotState::VACUUM);
    }

    #[test]
    fn read_pulse_outside_period_names_pulse() {
        let text = MINIMAL.replace("start_ns = 600", "start_ns = 1100");
        let err = parse_protocol(&text).unwrap_err();
        match &err {
            ConfigError::Invariant { key, .. } => assert_eq!(key, "acpulse.0"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("acpulse.0"));
    }

    #[test]
    fn replica_bias_reaches_read_level() {
        let p = parse_protocol(MINIMAL).unwrap();
        let v = p.bias_at(600.0 + 5.0 * 1.0);
        let read_level = -0.05 + 1.5;
        assert!((v - read_level).abs() < 1.5 * (-5.0f64).exp() + 1e-12);
        assert!((v - read_level).abs() / read_level < 0.01);
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse_protocol("[run]\nperiod_ns = 10\nthis is wrong\n").unwrap_err();
        assert_eq!(err.line(), Some(3));
        assert!(matches!(err, ConfigError::Syntax { .. }));
        assert!(err.located("a.conf").starts_with("a.conf:3: syntax error"));
    }

    #[test]
    fn unknown_key_and_section_rejected() {
        let err = parse_protocol("[run]\nperiod_ns = 10\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 3, .. }));
        let err = parse_protocol("[run]\nperiod_ns = 10\n[nope]\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownSection { line: 3, .. }));
    }

    #[test]
    fn missing_required_key() {
        let err = parse_protocol("[run]\ncycles = 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::Missing { .. }));
        let err = parse_protocol("[device]\nmagnetic_field_t = 0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Missing { .. }));
    }

    #[test]
    fn negative_lifetime_names_key_and_line() {
        let text = format!("{MINIMAL}\n[rates]\ntau_xplus_ns = -1\n");
        let err = parse_protocol(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tau_xplus_ns"), "{msg}");
        let line = text.lines().position(|l| l.starts_with("tau_xplus_ns")).unwrap() + 1;
        assert_eq!(err.line(), Some(line));
    }

    #[test]
    fn overlapping_pulses_rejected() {
        let text = format!("{MINIMAL}\n[acpulse.1]\nstart_ns = 610\nduration_ns = 5\namplitude_v = 1\n");
        let err = parse_protocol(&text).unwrap_err();
        assert!(err.to_string().contains("acpulse.1"), "{err}");
    }

    #[test]
    fn bad_value_reported() {
        let err = parse_protocol("[run]\nperiod_ns = ten\n").unwrap_err();
        assert!(matches!(err, ConfigError::InvalidValue { line: 2, .. }));
    }

    #[test]
    fn serialize_round_trip() {
        let mut text = MINIMAL.to_string();
        text.push_str("[rates]\nt1_electron_ns = inf\nwrite_fidelity = 0.9\n[analysis]\nspecies = all\nread_window_ns = 12.5\n");
        let p = parse_protocol(&text).unwrap();
        let again = parse_protocol(&p.to_config_string()).unwrap();
        assert_eq!(p, again);
        assert_eq!(p.to_config_string(), again.to_config_string());
    }
}

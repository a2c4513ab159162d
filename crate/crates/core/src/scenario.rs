//! Scenario files: flat `section.key = value` text with unit suffixes, and
//! the four built-in parameter sets.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::dynamics::{Backend, Integrator, TransitProfile, OMEGA0_REFERENCE};
use crate::error::{Error, Result};
use crate::fock::HilbertConfig;
use crate::metrics::GridRange;
use crate::reservoir::{CachePolicy, MixingMode, ReservoirConfig};

pub const PRESETS: [&str; 4] = ["cat2", "cat3", "squeeze", "banana"];

/// Post-run analyses.
#[derive(Debug, Clone, PartialEq)]
pub struct Analyses {
    pub wigner: Option<GridRange>,
    /// Number of components of the fitted superposition; `None` skips the fit.
    pub cat_k: Option<usize>,
    pub squeezing: bool,
}

impl Default for Analyses {
    fn default() -> Self {
        Self {
            wigner: Some(GridRange::default()),
            cat_k: None,
            squeezing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub reservoir: ReservoirConfig,
    pub analyses: Analyses,
    pub output: PathBuf,
}

fn profile(v: f64, t_r: f64, delta_in_omega0: f64) -> TransitProfile {
    TransitProfile {
        omega0: OMEGA0_REFERENCE,
        w: 6e-3,
        v,
        delta_disp: delta_in_omega0 * OMEGA0_REFERENCE,
        t_r,
        window_factor: TransitProfile::DEFAULT_WINDOW_FACTOR,
    }
}

impl ScenarioConfig {
    fn base(name: &str, profile: TransitProfile, u: f64) -> Self {
        let mut reservoir = ReservoirConfig::new(HilbertConfig::default(), profile);
        reservoir.u = u;
        Self {
            name: name.to_string(),
            reservoir,
            analyses: Analyses::default(),
            output: PathBuf::from("out").join(name),
        }
    }

    /// Built-in parameter sets.
    pub fn preset(name: &str) -> Result<Self> {
        let mut s = match name {
            "cat2" => Self::base(name, profile(70.0, 5e-6, 2.2), 0.45 * PI),
            "cat3" => Self::base(name, profile(70.0, 5e-6, 3.7), 0.45 * PI),
            "squeeze" => Self::base(name, profile(300.0, 1.7e-6, 70.0), 0.5 * PI),
            "banana" => Self::base(name, profile(150.0, 5e-6, 7.0), 0.5 * PI),
            _ => {
                return Err(Error::Config(format!(
                    "unknown preset '{name}' (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        match name {
            "cat2" => s.analyses.cat_k = Some(2),
            "cat3" => s.analyses.cat_k = Some(3),
            "squeeze" => s.analyses.wigner = Some(GridRange::new(-7.0, 7.0, 0.1)?),
            _ => s.analyses.wigner = Some(GridRange::new(-4.0, 4.0, 0.08)?),
        }
        Ok(s)
    }

    /// Reads a scenario file on top of `base` (the defaults of a preset named
    /// in the file when `base` is `None`).
    pub fn parse(text: &str, base: Option<ScenarioConfig>) -> Result<Self> {
        let entries = parse_entries(text)?;
        let mut cfg = match base {
            Some(b) => b,
            None => match entries.iter().find(|(k, _)| k == "preset") {
                Some((_, v)) => Self::preset(v)?,
                None => Self::base("custom", profile(70.0, 5e-6, 2.2), 0.0),
            },
        };
        cfg.apply_all(
            entries
                .iter()
                .filter(|(k, _)| k != "preset")
                .map(|(k, v)| (k.as_str(), v.as_str())),
        )?;
        Ok(cfg)
    }

    /// Applies `key = value` assignments. Detunings written relative to
    /// `omega0` use the final value of `profile.omega0`.
    pub fn apply_all<'a>(
        &mut self,
        entries: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<()> {
        let mut delta = None;
        let mut theta = None;
        let mut phi0 = None;
        for (key, value) in entries {
            match key {
                "profile.delta" => delta = Some(value.to_string()),
                "reservoir.theta" => theta = Some(parse_quantity(value, Dim::Angle)?),
                "reservoir.phi0" => phi0 = Some(parse_quantity(value, Dim::Angle)?),
                _ => self.set(key, value)?,
            }
        }
        if let Some(d) = delta {
            self.reservoir.profile.delta_disp = parse_detuning(&d, self.reservoir.profile.omega0)?;
        }
        if theta.is_some() || phi0.is_some() {
            let (t0, p0) = self.reservoir.analytic_angles.unwrap_or((0.0, 0.0));
            self.reservoir.analytic_angles = Some((theta.unwrap_or(t0), phi0.unwrap_or(p0)));
        }
        self.validate()
    }

    /// Applies one assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let r = &mut self.reservoir;
        match key {
            "scenario.name" => self.name = value.to_string(),
            "hilbert.n_max" => r.hilbert = HilbertConfig::new(parse_usize(value)?)?,
            "profile.omega0" => r.profile.omega0 = parse_quantity(value, Dim::Rate)?,
            "profile.w" => r.profile.w = parse_quantity(value, Dim::Length)?,
            "profile.v" => r.profile.v = parse_quantity(value, Dim::Plain)?,
            "profile.delta" => r.profile.delta_disp = parse_detuning(value, r.profile.omega0)?,
            "profile.t_r" => r.profile.t_r = parse_quantity(value, Dim::Time)?,
            "profile.window_factor" => r.profile.window_factor = parse_quantity(value, Dim::Plain)?,
            "cavity.t_c" => r.cavity.t_c = parse_quantity(value, Dim::Time)?,
            "cavity.n_t" => r.cavity.n_t = parse_quantity(value, Dim::Plain)?,
            "cavity.loss" => r.cavity.enabled = parse_bool(value)?,
            "reservoir.p_at" => r.p_at = parse_quantity(value, Dim::Plain)?,
            "reservoir.u" => r.u = parse_quantity(value, Dim::Angle)?,
            "reservoir.n_samples" => r.n_samples = parse_usize(value)?,
            "reservoir.mixing" => {
                r.mixing = match value.trim() {
                    "deterministic" => MixingMode::Deterministic,
                    "monte_carlo" => MixingMode::MonteCarlo {
                        seed: seed_of(r.mixing),
                    },
                    other => return Err(Error::Config(format!("unknown mixing mode '{other}'"))),
                }
            }
            "reservoir.seed" => {
                r.mixing = MixingMode::MonteCarlo {
                    seed: parse_u64(value)?,
                }
            }
            "reservoir.backend" => r.backend = parse_backend(value)?,
            "reservoir.theta" | "reservoir.phi0" => {
                let x = parse_quantity(value, Dim::Angle)?;
                let (t, p) = r.analytic_angles.unwrap_or((0.0, 0.0));
                r.analytic_angles = Some(if key.ends_with("theta") {
                    (x, p)
                } else {
                    (t, x)
                });
            }
            "reservoir.cache" => {
                r.cache = match value.trim() {
                    "auto" => CachePolicy::Auto,
                    "always" => CachePolicy::Always,
                    "never" => CachePolicy::Never,
                    other => return Err(Error::Config(format!("unknown cache policy '{other}'"))),
                }
            }
            "reservoir.check_convergence" => r.check_convergence = parse_bool(value)?,
            "transit.integrator" => {
                r.transit.integrator = match value.trim() {
                    "dressed" => Integrator::DressedBlocks,
                    "rk4" => Integrator::Rk4,
                    other => return Err(Error::Config(format!("unknown integrator '{other}'"))),
                }
            }
            "transit.max_phase" => {
                r.transit.max_phase_per_step = parse_quantity(value, Dim::Angle)?
            }
            "transit.loss_slices" => r.transit.loss_slices = parse_usize(value)?,
            "analysis.wigner_grid" => {
                self.analyses.wigner = match value.trim() {
                    "none" => None,
                    v => Some(GridRange::parse(v)?),
                }
            }
            "analysis.cat_k" => {
                let k = parse_usize(value)?;
                self.analyses.cat_k = (k > 0).then_some(k);
            }
            "analysis.squeezing" => self.analyses.squeezing = parse_bool(value)?,
            "output.dir" => self.output = PathBuf::from(value.trim()),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.reservoir
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.analyses.cat_k == Some(1) {
            return Err(Error::Config(
                "analysis.cat_k must be 0 or at least 2".into(),
            ));
        }
        Ok(())
    }

    /// Canonical text form in SI units; `parse` reads it back unchanged.
    pub fn serialize(&self) -> String {
        let r = &self.reservoir;
        let p = &r.profile;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("scenario.name", self.name.clone());
        kv("hilbert.n_max", r.hilbert.n_max().to_string());
        kv("profile.omega0", p.omega0.to_string());
        kv("profile.w", p.w.to_string());
        kv("profile.v", p.v.to_string());
        kv("profile.delta", p.delta_disp.to_string());
        kv("profile.t_r", p.t_r.to_string());
        kv("profile.window_factor", p.window_factor.to_string());
        kv("cavity.t_c", r.cavity.t_c.to_string());
        kv("cavity.n_t", r.cavity.n_t.to_string());
        kv("cavity.loss", r.cavity.enabled.to_string());
        kv("reservoir.p_at", r.p_at.to_string());
        kv("reservoir.u", r.u.to_string());
        kv("reservoir.n_samples", r.n_samples.to_string());
        match r.mixing {
            MixingMode::Deterministic => kv("reservoir.mixing", "deterministic".into()),
            MixingMode::MonteCarlo { seed } => {
                kv("reservoir.mixing", "monte_carlo".into());
                kv("reservoir.seed", seed.to_string());
            }
        }
        kv(
            "reservoir.backend",
            match r.backend {
                Backend::Numeric => "numeric",
                Backend::Analytic => "analytic",
            }
            .into(),
        );
        if let Some((theta, phi0)) = r.analytic_angles {
            kv("reservoir.theta", theta.to_string());
            kv("reservoir.phi0", phi0.to_string());
        }
        kv(
            "reservoir.cache",
            match r.cache {
                CachePolicy::Auto => "auto",
                CachePolicy::Always => "always",
                CachePolicy::Never => "never",
            }
            .into(),
        );
        kv(
            "reservoir.check_convergence",
            r.check_convergence.to_string(),
        );
        kv(
            "transit.integrator",
            match r.transit.integrator {
                Integrator::DressedBlocks => "dressed",
                Integrator::Rk4 => "rk4",
            }
            .into(),
        );
        kv(
            "transit.max_phase",
            r.transit.max_phase_per_step.to_string(),
        );
        kv("transit.loss_slices", r.transit.loss_slices.to_string());
        kv(
            "analysis.wigner_grid",
            match &self.analyses.wigner {
                None => "none".into(),
                Some(g) => g.to_string(),
            },
        );
        kv(
            "analysis.cat_k",
            self.analyses.cat_k.unwrap_or(0).to_string(),
        );
        kv("analysis.squeezing", self.analyses.squeezing.to_string());
        kv("output.dir", self.output.display().to_string());
        out
    }
}

fn seed_of(m: MixingMode) -> u64 {
    match m {
        MixingMode::MonteCarlo { seed } => seed,
        MixingMode::Deterministic => 0,
    }
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `--set key=value` override.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{text}' is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Plain,
    Time,
    Length,
    /// Angular frequency; `Hz`-family suffixes are converted with 2π.
    Rate,
    Angle,
}

fn parse_number(s: &str) -> Result<f64> {
    let t = s.trim();
    let x: f64 = t
        .parse()
        .map_err(|_| Error::Config(format!("bad number '{t}'")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("non-finite number '{t}'")));
    }
    Ok(x)
}

/// `1.5`, `2 us`, `6mm`, `50 kHz`, `0.45pi`, `pi/2`, `-pi`.
fn parse_quantity(s: &str, dim: Dim) -> Result<f64> {
    let t = s.trim();
    if let Some(x) = parse_pi(t)? {
        return if matches!(dim, Dim::Angle | Dim::Plain) {
            Ok(x)
        } else {
            Err(Error::Config(format!(
                "'{t}' is an angle, not a {dim:?} value"
            )))
        };
    }
    let split = t
        .char_indices()
        .find(|&(i, ch)| ch.is_ascii_alphabetic() && !is_exponent(t, i))
        .map_or(t.len(), |(i, _)| i);
    let (num, unit) = t.split_at(split);
    let x = parse_number(num)?;
    let unit = unit.trim();
    let scale = match (dim, unit) {
        (_, "") => 1.0,
        (Dim::Time, "s") => 1.0,
        (Dim::Time, "ms") => 1e-3,
        (Dim::Time, "us") => 1e-6,
        (Dim::Time, "ns") => 1e-9,
        (Dim::Length, "m") => 1.0,
        (Dim::Length, "cm") => 1e-2,
        (Dim::Length, "mm") => 1e-3,
        (Dim::Length, "um") => 1e-6,
        (Dim::Rate, "rad/s") => 1.0,
        (Dim::Rate, "Hz") => 2.0 * PI,
        (Dim::Rate, "kHz") => 2.0 * PI * 1e3,
        (Dim::Rate, "MHz") => 2.0 * PI * 1e6,
        (Dim::Plain, "m/s") => 1.0,
        (Dim::Angle, "rad") => 1.0,
        _ => return Err(Error::Config(format!("unit '{unit}' not allowed in '{t}'"))),
    };
    Ok(x * scale)
}

/// True when the letter at `i` is the exponent marker of a float literal.
fn is_exponent(t: &str, i: usize) -> bool {
    let b = t.as_bytes();
    (b[i] == b'e' || b[i] == b'E')
        && i > 0
        && b[i - 1].is_ascii_digit()
        && b.get(i + 1)
            .is_some_and(|&n| n.is_ascii_digit() || n == b'-' || n == b'+')
}

fn parse_pi(t: &str) -> Result<Option<f64>> {
    let compact: String = t.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(pos) = compact.find("pi") else {
        return Ok(None);
    };
    let (coef, rest) = compact.split_at(pos);
    let rest = &rest[2..];
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => parse_number(c.trim_end_matches('*'))?,
    };
    let denom = match rest {
        "" => 1.0,
        r => match r.strip_prefix('/') {
            Some(d) => parse_number(d)?,
            None => return Err(Error::Config(format!("bad pi expression '{t}'"))),
        },
    };
    Ok(Some(coef * PI / denom))
}

/// `2.2 omega0` relative to `omega0`, otherwise an angular frequency.
fn parse_detuning(s: &str, omega0: f64) -> Result<f64> {
    let t = s.trim();
    match t.strip_suffix("omega0") {
        Some(coef) => {
            let coef = coef.trim().trim_end_matches('*').trim();
            Ok(if coef.is_empty() {
                1.0
            } else {
                parse_number(coef)?
            } * omega0)
        }
        None => parse_quantity(t, Dim::Rate),
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("expected a non-negative integer, got '{s}'")))
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("expected an unsigned integer, got '{s}'")))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        other => Err(Error::Config(format!("expected a boolean, got '{other}'"))),
    }
}

pub fn parse_backend(s: &str) -> Result<Backend> {
    match s.trim() {
        "numeric" => Ok(Backend::Numeric),
        "analytic" => Ok(Backend::Analytic),
        other => Err(Error::Config(format!("unknown backend '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_the_published_parameters() {
        let c2 = ScenarioConfig::preset("cat2").unwrap();
        assert!((c2.reservoir.profile.t_i() - 257.142857e-6).abs() < 1e-9);
        assert_eq!(c2.reservoir.hilbert.dim(), 60);
        assert_eq!((c2.reservoir.p_at, c2.reservoir.n_samples), (0.3, 200));
        assert_eq!(
            c2.reservoir.cavity,
            crate::reservoir::CavityParams::default()
        );
        let b = ScenarioConfig::preset("banana").unwrap();
        assert!((b.reservoir.profile.t_i() - 120e-6).abs() < 1e-12);
        let s = ScenarioConfig::preset("squeeze").unwrap();
        assert!((s.reservoir.profile.t_i() - 60e-6).abs() < 1e-12);
        assert!((s.reservoir.profile.delta_disp / OMEGA0_REFERENCE - 70.0).abs() < 1e-12);
        assert!(ScenarioConfig::preset("cat4").is_err());
    }

    #[test]
    fn quantities_and_units() {
        assert!((parse_quantity("5 us", Dim::Time).unwrap() - 5e-6).abs() < 1e-20);
        assert!((parse_quantity("6mm", Dim::Length).unwrap() - 6e-3).abs() < 1e-18);
        assert!((parse_quantity("50 kHz", Dim::Rate).unwrap() - OMEGA0_REFERENCE).abs() < 1e-9);
        assert!((parse_quantity("0.45pi", Dim::Angle).unwrap() - 0.45 * PI).abs() < 1e-15);
        assert!((parse_quantity("pi/2", Dim::Angle).unwrap() - 0.5 * PI).abs() < 1e-15);
        assert!((parse_quantity("1.5e-3", Dim::Time).unwrap() - 1.5e-3).abs() < 1e-18);
        assert!((parse_quantity("2e-6 s", Dim::Time).unwrap() - 2e-6).abs() < 1e-20);
        assert!(parse_quantity("5 mm", Dim::Time).is_err());
        assert!(parse_quantity("pi", Dim::Time).is_err());
        assert!((parse_detuning("2.2 omega0", 10.0).unwrap() - 22.0).abs() < 1e-12);
    }

    #[test]
    fn file_then_overrides() {
        let text = "preset = cat2\nprofile.delta = 3.7 omega0 # three components\nreservoir.n_samples = 10\n";
        let mut cfg = ScenarioConfig::parse(text, None).unwrap();
        assert_eq!(cfg.reservoir.n_samples, 10);
        assert!((cfg.reservoir.profile.delta_disp - 3.7 * OMEGA0_REFERENCE).abs() < 1e-6);
        cfg.apply_all([("profile.omega0", "100 kHz"), ("profile.delta", "2omega0")])
            .unwrap();
        assert!((cfg.reservoir.profile.delta_disp - 4.0 * OMEGA0_REFERENCE).abs() < 1e-6);
        assert!(cfg.set("nope.key", "1").is_err());
        assert!(ScenarioConfig::parse("reservoir.p_at = 1.5", None).is_err());
        assert!(ScenarioConfig::parse("just words", None).is_err());
    }

    #[test]
    fn serialize_round_trip() {
        for name in PRESETS {
            let cfg = ScenarioConfig::preset(name).unwrap();
            let back = ScenarioConfig::parse(&cfg.serialize(), None).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
        let mut mc = ScenarioConfig::preset("cat2").unwrap();
        mc.apply_all([
            ("reservoir.seed", "42"),
            ("reservoir.theta", "0.05"),
            ("cavity.loss", "off"),
        ])
        .unwrap();
        assert_eq!(ScenarioConfig::parse(&mc.serialize(), None).unwrap(), mc);
    }
}

//! Physical constants, parameter records and the handful of unit conversions
//! the simulator needs.
//!
//! Internally everything is SI with angular frequencies in rad/s. Gyromagnetic
//! ratios are stored angular (they already carry the 2π).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ¹²⁹Xe gyromagnetic ratio over 2π, in Hz/μT.
pub const XE129_GAMMA_HZ_PER_UT: f64 = 11.78;

/// Fermi-contact enhancement factor between ¹²⁹Xe and ⁸⁷Rb.
pub const KAPPA0_RB_XE: f64 = 540.0;

/// ħc in eV·m.
pub const HBAR_C_EV_M: f64 = 197.327e-9;

/// Planck constant in eV·s.
pub const PLANCK_EV_S: f64 = 4.135_667_696e-15;

/// Neutron rest energy in eV.
pub const NEUTRON_MASS_EV: f64 = 939.565e6;

/// Static field used when none is configured. It only sets ν₀; rotating-frame
/// results depend on the detuning alone.
pub const DEFAULT_B0_T: f64 = 1e-6;

/// Default axion mass window for constraint output, in eV.
pub const AXION_WINDOW_EV: (f64, f64) = (3.2e-6, 24.3e-6);

const TESLA_PER_UT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSpecies {
    pub label: String,
    /// rad·s⁻¹·T⁻¹
    pub gamma: f64,
}

impl SpinSpecies {
    pub fn new(label: impl Into<String>, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma == 0.0 {
            return Err(Error::Domain(format!(
                "gyromagnetic ratio must be finite and nonzero, got {gamma}"
            )));
        }
        Ok(Self {
            label: label.into(),
            gamma,
        })
    }

    /// Build a species from γ/2π given in Hz/μT.
    pub fn from_hz_per_ut(label: impl Into<String>, hz_per_ut: f64) -> Result<Self> {
        Self::new(label, 2.0 * PI * hz_per_ut / TESLA_PER_UT)
    }

    pub fn xe129() -> Self {
        Self::from_hz_per_ut("129Xe", XE129_GAMMA_HZ_PER_UT).expect("built-in constant")
    }

    pub fn gamma_hz_per_ut(&self) -> f64 {
        self.gamma * TESLA_PER_UT / (2.0 * PI)
    }
}

impl Default for SpinSpecies {
    fn default() -> Self {
        Self::xe129()
    }
}

/// Static field along z plus a transverse field `b_ac·cos(2πνt)` along y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// tesla
    pub b0: f64,
    /// tesla
    pub b_ac: f64,
    /// hertz
    pub nu: f64,
}

impl DriveConfig {
    pub fn new(b0: f64, b_ac: f64, nu: f64) -> Result<Self> {
        for (name, v) in [("b0", b0), ("b_ac", b_ac), ("nu", nu)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self { b0, b_ac, nu })
    }

    /// Drive whose frequency sits `delta` rad/s away from the Larmor frequency
    /// set by `b0`.
    pub fn with_detuning(species: &SpinSpecies, b0: f64, b_ac: f64, delta: f64) -> Result<Self> {
        let nu = larmor_frequency(species, b0) + delta / (2.0 * PI);
        Self::new(b0, b_ac, nu)
    }

    pub fn larmor_frequency(&self, species: &SpinSpecies) -> f64 {
        larmor_frequency(species, self.b0)
    }

    /// Δ = 2π(ν − ν₀) in rad/s.
    pub fn detuning(&self, species: &SpinSpecies) -> f64 {
        detuning(self.nu, self.larmor_frequency(species))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    /// Constant relaxation rate 1/T.
    Markovian,
    /// Time-linear rate t/T² (Zeno regime).
    Gaussian,
}

impl NoiseModel {
    pub const ALL: [NoiseModel; 2] = [NoiseModel::Markovian, NoiseModel::Gaussian];

    /// Instantaneous relaxation rate for relaxation time `t_relax`.
    #[inline]
    pub fn rate(self, t: f64, t_relax: f64) -> f64 {
        match self {
            NoiseModel::Markovian => 1.0 / t_relax,
            NoiseModel::Gaussian => t / (t_relax * t_relax),
        }
    }

    /// exp(−∫₀ᵗ rate), the decay envelope of an undriven component.
    #[inline]
    pub fn envelope(self, t: f64, t_relax: f64) -> f64 {
        match self {
            NoiseModel::Markovian => (-t / t_relax).exp(),
            NoiseModel::Gaussian => (-t * t / (2.0 * t_relax * t_relax)).exp(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseModel::Markovian => "markovian",
            NoiseModel::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markovian" | "markov" => Ok(NoiseModel::Markovian),
            "gaussian" | "qze" | "zeno" => Ok(NoiseModel::Gaussian),
            _ => Err(Error::parse(s, "expected `markovian` or `gaussian`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSpec {
    pub model: NoiseModel,
    /// Longitudinal relaxation time, seconds.
    pub t1: f64,
    /// Transverse relaxation time, seconds.
    pub t2: f64,
}

impl RelaxationSpec {
    pub fn new(model: NoiseModel, t1: f64, t2: f64) -> Result<Self> {
        for (name, v) in [("T1", t1), ("T2", t2)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { model, t1, t2 })
    }

    /// T₁ = T₂ = T.
    pub fn equal_times(model: NoiseModel, t: f64) -> Result<Self> {
        Self::new(model, t, t)
    }

    #[inline]
    pub fn r1(&self, t: f64) -> f64 {
        self.model.rate(t, self.t1)
    }

    #[inline]
    pub fn r2(&self, t: f64) -> f64 {
        self.model.rate(t, self.t2)
    }

    pub fn longest(&self) -> f64 {
        self.t1.max(self.t2)
    }

    /// 3·max(T₁, T₂): both kernels have decayed to ~1% by then.
    pub fn default_window(&self) -> f64 {
        3.0 * self.longest()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplifierConstants {
    pub kappa0: f64,
    /// Field produced per unit polarization (tesla).
    pub m0: f64,
    pub p0: f64,
}

impl AmplifierConstants {
    pub fn new(kappa0: f64, m0: f64, p0: f64) -> Result<Self> {
        if !kappa0.is_finite() || kappa0 <= 0.0 {
            return Err(Error::Domain(format!(
                "kappa0 must be positive, got {kappa0}"
            )));
        }
        if !m0.is_finite() || !p0.is_finite() {
            return Err(Error::Domain("m0 and p0 must be finite".into()));
        }
        Ok(Self { kappa0, m0, p0 })
    }

    /// λ = 4πκ₀/3
    pub fn lambda(&self) -> f64 {
        4.0 * PI * self.kappa0 / 3.0
    }

    /// Nuclear magnetization M_n = M₀P₀.
    pub fn m_n(&self) -> f64 {
        self.m0 * self.p0
    }
}

/// ν₀ = γB₀/2π in Hz.
pub fn larmor_frequency(species: &SpinSpecies, b0: f64) -> f64 {
    species.gamma * b0 / (2.0 * PI)
}

/// Δ = 2π(ν − ν₀) in rad/s.
pub fn detuning(nu: f64, nu0: f64) -> f64 {
    2.0 * PI * (nu - nu0)
}

/// Reduced Compton wavelength ħc/m of a particle of mass `mass` (eV), in metres.
pub fn mass_to_compton_length(mass: f64) -> Result<f64> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::Domain(format!("mass must be positive, got {mass}")));
    }
    Ok(HBAR_C_EV_M / mass)
}

/// How a detuning quoted in frequency units is turned into rad/s.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetuningConvention {
    /// "2.5 mHz" means ν − ν₀ = 2.5 mHz, so Δ = 2π·2.5e-3 rad/s.
    #[default]
    FrequencyDifference,
    /// "2.5 mHz" is read as Δ = 2.5e-3 rad/s.
    LiteralAngular,
}

impl FromStr for DetuningConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "frequency" | "frequency-difference" | "hz" => Ok(Self::FrequencyDifference),
            "angular" | "literal" | "literal-angular" => Ok(Self::LiteralAngular),
            _ => Err(Error::parse(s, "expected `frequency` or `angular`")),
        }
    }
}

/// Split `"2.5mHz"` into `(2.5, "mHz")`.
fn split_quantity(token: &str) -> Result<(f64, &str)> {
    let s = token.trim();
    let is_unit_char = |c: char| c.is_alphabetic() || c == '/' || c == 'μ' || c == 'µ';
    let split = s
        .char_indices()
        .rev()
        .take_while(|&(_, c)| is_unit_char(c))
        .last()
        .map_or(s.len(), |(i, _)| i);
    let (num, unit) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::parse(token, "not a number followed by a unit"))?;
    if !value.is_finite() {
        return Err(Error::parse(token, "value is not finite"));
    }
    Ok((value, unit))
}

/// Sub-unit prefixes divide by the exact power of ten, so `10pT` is the
/// double nearest 1e-11.
fn apply_scale(v: f64, scale: f64) -> f64 {
    if scale > 0.0 && scale < 1.0 {
        v / (1.0 / scale).round()
    } else {
        v * scale
    }
}

fn micro_prefix(unit: &str) -> Option<&str> {
    unit.strip_prefix('u')
        .or_else(|| unit.strip_prefix('μ'))
        .or_else(|| unit.strip_prefix('µ'))
}

/// Magnetic field with a mandatory unit suffix (T, mT, μT/uT, nT, pT, fT). Returns tesla.
pub fn parse_field(token: &str) -> Result<f64> {
    let (v, unit) = split_quantity(token)?;
    let scale = match unit {
        "T" => 1.0,
        "mT" => 1e-3,
        "nT" => 1e-9,
        "pT" => 1e-12,
        "fT" => 1e-15,
        u if micro_prefix(u) == Some("T") => 1e-6,
        "" if v == 0.0 => 0.0,
        "" => return Err(Error::parse(token, "field needs a unit (pT, nT, uT, ...)")),
        _ => return Err(Error::parse(token, "unknown field unit")),
    };
    Ok(apply_scale(v, scale))
}

/// Frequency with a mandatory unit suffix (Hz, mHz, μHz/uHz, kHz). Returns hertz.
pub fn parse_frequency(token: &str) -> Result<f64> {
    let (v, unit) = split_quantity(token)?;
    let scale = match unit {
        "Hz" => 1.0,
        "mHz" => 1e-3,
        "kHz" => 1e3,
        u if micro_prefix(u) == Some("Hz") => 1e-6,
        "" if v == 0.0 => 0.0,
        "" => return Err(Error::parse(token, "frequency needs a unit (mHz, Hz, ...)")),
        _ => return Err(Error::parse(token, "unknown frequency unit")),
    };
    Ok(apply_scale(v, scale))
}

/// Detuning in rad/s. Accepts `rad/s` literally, or a frequency suffix that is
/// converted according to `convention`.
pub fn parse_detuning(token: &str, convention: DetuningConvention) -> Result<f64> {
    let (v, unit) = split_quantity(token)?;
    if unit == "rad/s" {
        return Ok(v);
    }
    let hz = parse_frequency(token)?;
    Ok(match convention {
        DetuningConvention::FrequencyDifference => 2.0 * PI * hz,
        DetuningConvention::LiteralAngular => hz,
    })
}

/// Time in seconds; the suffix (`s`, `ms`, `min`) is optional and defaults to seconds.
pub fn parse_time(token: &str) -> Result<f64> {
    let (v, unit) = split_quantity(token)?;
    let scale = match unit {
        "" | "s" => 1.0,
        "ms" => 1e-3,
        "min" => 60.0,
        _ => return Err(Error::parse(token, "unknown time unit")),
    };
    Ok(apply_scale(v, scale))
}

/// Particle mass with a mandatory unit (eV, meV, μeV/ueV, neV). Returns eV.
pub fn parse_mass(token: &str) -> Result<f64> {
    let (v, unit) = split_quantity(token)?;
    let scale = match unit {
        "eV" => 1.0,
        "meV" => 1e-3,
        "neV" => 1e-9,
        u if micro_prefix(u) == Some("eV") => 1e-6,
        _ => return Err(Error::parse(token, "mass needs a unit (ueV, eV, ...)")),
    };
    Ok(apply_scale(v, scale))
}

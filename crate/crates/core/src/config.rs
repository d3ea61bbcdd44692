//! Flat `key = value` configuration files.
//!
//! ```text
//! # defaults spelled out
//! gamma_hz_per_ut = 11.78
//! bac_pt = 10
//! detuning_mhz = 2.5
//! T_s = 380
//! noise = gaussian
//!
//! [sweep]
//! axis1 = T: 50..600/40 log
//! axis2 = b_ac: 10pT, 100pT, 400pT
//! observable = p_perp_opt
//! models = gaussian, markovian
//! ```
//!
//! Units are implied by the key suffix. Every key is optional.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bloch::DEFAULT_DT;
use crate::error::{Error, Result};
use crate::linear::calibrate_magnetization;
use crate::units::{
    AmplifierConstants, DetuningConvention, DriveConfig, NoiseModel, RelaxationSpec, SpinSpecies,
    DEFAULT_B0_T, KAPPA0_RB_XE, XE129_GAMMA_HZ_PER_UT,
};

/// Amplification the default M₀ is calibrated to (resonant Gaussian optimum
/// at T = 380 s, P₀ = 1).
pub const REFERENCE_AMPLIFICATION: f64 = 8900.0;
pub const REFERENCE_T_S: f64 = 380.0;

const PARAM_KEYS: &[&str] = &[
    "gamma_hz_per_ut",
    "b0_ut",
    "bac_pt",
    "detuning_mhz",
    "detuning_convention",
    "T_s",
    "T1_s",
    "T2_s",
    "noise",
    "kappa0",
    "m0",
    "p0",
    "dt_s",
];

pub const SWEEP_KEYS: &[&str] = &["axis1", "axis2", "observable", "models", "engine"];

/// Parsed config file: top-level entries and the optional `[sweep]` section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub params: BTreeMap<String, String>,
    pub sweep: Option<BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        let mut in_sweep = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(section) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                match section.trim() {
                    "sweep" => {
                        in_sweep = true;
                        cfg.sweep.get_or_insert_with(BTreeMap::new);
                    }
                    other => return Err(Error::parse(raw, format!("unknown section [{other}]"))),
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(raw, format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            // Fixed parameters may also appear inside [sweep].
            let target = if in_sweep && SWEEP_KEYS.contains(&key) {
                cfg.sweep.as_mut().expect("section opened")
            } else if PARAM_KEYS.contains(&key) {
                &mut cfg.params
            } else {
                return Err(Error::parse(
                    key,
                    format!("line {}: unknown key", lineno + 1),
                ));
            };
            if target.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::parse(
                    key,
                    format!("line {}: duplicate key", lineno + 1),
                ));
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved parameter record. Every field is materialized, so the
/// record can be written next to any output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub species: SpinSpecies,
    /// tesla
    pub b0: f64,
    /// tesla
    pub b_ac: f64,
    /// rad/s
    pub delta: f64,
    pub detuning_convention: DetuningConvention,
    pub noise: NoiseModel,
    pub t1: f64,
    pub t2: f64,
    pub kappa0: f64,
    /// tesla
    pub m0: f64,
    pub p0: f64,
    /// Integrator step, seconds.
    pub dt: f64,
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::from_entries(&BTreeMap::new()).expect("defaults are valid")
    }
}

fn number(entries: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>> {
    entries
        .get(key)
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::parse(v.as_str(), format!("`{key}` expects a number")))
        })
        .transpose()
}

impl ParamSet {
    pub fn from_entries(entries: &BTreeMap<String, String>) -> Result<Self> {
        let gamma_hz_per_ut = number(entries, "gamma_hz_per_ut")?.unwrap_or(XE129_GAMMA_HZ_PER_UT);
        let species = if gamma_hz_per_ut == XE129_GAMMA_HZ_PER_UT {
            SpinSpecies::xe129()
        } else {
            SpinSpecies::from_hz_per_ut("custom", gamma_hz_per_ut)?
        };
        let detuning_convention = entries
            .get("detuning_convention")
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or_default();
        let detuning_hz = number(entries, "detuning_mhz")?.unwrap_or(2.5) * 1e-3;
        let delta = match detuning_convention {
            DetuningConvention::FrequencyDifference => 2.0 * PI * detuning_hz,
            DetuningConvention::LiteralAngular => detuning_hz,
        };

        let t = number(entries, "T_s")?;
        let t1 = number(entries, "T1_s")?;
        let t2 = number(entries, "T2_s")?;
        if t.is_some() && (t1.is_some() || t2.is_some()) {
            return Err(Error::Usage(
                "give either T_s or T1_s/T2_s, not both".into(),
            ));
        }
        let t_default = t.unwrap_or(REFERENCE_T_S);
        let (t1, t2) = (t1.unwrap_or(t_default), t2.unwrap_or(t_default));

        let kappa0 = number(entries, "kappa0")?.unwrap_or(KAPPA0_RB_XE);
        let p0 = number(entries, "p0")?.unwrap_or(1.0);
        let m0 = match number(entries, "m0")? {
            Some(m0) => m0,
            None => default_m0(kappa0, &species, p0)?,
        };
        let params = ParamSet {
            species,
            b0: number(entries, "b0_ut")?.map_or(DEFAULT_B0_T, |v| v * 1e-6),
            b_ac: number(entries, "bac_pt")?.unwrap_or(10.0) * 1e-12,
            delta,
            detuning_convention,
            noise: entries
                .get("noise")
                .map(|s| s.parse())
                .transpose()?
                .unwrap_or(NoiseModel::Gaussian),
            t1,
            t2,
            kappa0,
            m0,
            p0,
            dt: number(entries, "dt_s")?.unwrap_or(DEFAULT_DT),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.drive()?;
        self.relaxation()?;
        self.amplifier()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Domain(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.p0 > 0.0) || !self.p0.is_finite() {
            return Err(Error::Domain(format!(
                "p0 must be positive, got {}",
                self.p0
            )));
        }
        Ok(())
    }

    pub fn drive(&self) -> Result<DriveConfig> {
        DriveConfig::with_detuning(&self.species, self.b0, self.b_ac, self.delta)
    }

    pub fn relaxation(&self) -> Result<RelaxationSpec> {
        RelaxationSpec::new(self.noise, self.t1, self.t2)
    }

    pub fn amplifier(&self) -> Result<AmplifierConstants> {
        AmplifierConstants::new(self.kappa0, self.m0, self.p0)
    }

    pub fn set_equal_times(&mut self, t: f64) {
        self.t1 = t;
        self.t2 = t;
    }
}

/// M₀ such that the resonant Gaussian optimum at T = 380 s reaches the
/// reference amplification of 8900, reading Π from its own formula.
pub fn default_m0(kappa0: f64, species: &SpinSpecies, p0: f64) -> Result<f64> {
    let cal = calibrate_magnetization(
        REFERENCE_AMPLIFICATION,
        kappa0,
        species.gamma,
        REFERENCE_T_S,
        NoiseModel::Gaussian,
    )?;
    Ok(cal.m_n_formula / p0)
}

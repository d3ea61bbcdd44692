//! Weak-field (linear-response) closed forms: rotating-frame solution,
//! transverse polarization, effective field, amplification factor and the
//! optimal readout time.
//!
//! All sin(x)/x-type ratios go through [`sinc`], so Δ = 0 is an ordinary
//! input rather than a removable singularity.

use serde::{Deserialize, Serialize};

use crate::bloch::{BlochState, Frame, IntegratorConfig, Trace, TraceMeta, Vec3};
use crate::error::{Error, Result};
use crate::roots::bisect;
use crate::units::{AmplifierConstants, NoiseModel};

/// Below this |x| the series 1 − x²/6 + x⁴/120 replaces sin(x)/x.
const SINC_SERIES_BELOW: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearResponseParams {
    pub p0: f64,
    /// rad·s⁻¹·T⁻¹
    pub gamma: f64,
    /// tesla
    pub b_ac: f64,
    /// rad/s
    pub delta: f64,
    /// T₁ = T₂ = T, seconds
    pub t_relax: f64,
    pub model: NoiseModel,
}

impl LinearResponseParams {
    pub fn new(
        p0: f64,
        gamma: f64,
        b_ac: f64,
        delta: f64,
        t_relax: f64,
        model: NoiseModel,
    ) -> Result<Self> {
        if !(t_relax > 0.0) || !t_relax.is_finite() {
            return Err(Error::Domain(format!("T must be positive, got {t_relax}")));
        }
        if !(b_ac >= 0.0) || !b_ac.is_finite() {
            return Err(Error::Domain(format!(
                "b_ac must be non-negative, got {b_ac}"
            )));
        }
        if !delta.is_finite() || !gamma.is_finite() || !p0.is_finite() {
            return Err(Error::Domain("p0, gamma and delta must be finite".into()));
        }
        Ok(Self {
            p0,
            gamma,
            b_ac,
            delta,
            t_relax,
            model,
        })
    }

    fn envelope(&self, t: f64) -> f64 {
        self.model.envelope(t, self.t_relax)
    }

    /// P₀γB_ac/2, the initial slope of P̃x.
    fn drive_slope(&self) -> f64 {
        self.p0 * self.gamma * self.b_ac / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimumMethod {
    ExactRoot,
    /// tan expanded to third order, solved in closed form.
    TaylorCubic,
    /// T(1 − Δ²T²/24)
    TaylorQuadratic,
    GridArgmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalPoint {
    pub t_opt: f64,
    /// Response at `t_opt` in units of P₀γB_acT/2 (equals e^(−1/2) for the
    /// resonant Gaussian optimum).
    pub value: f64,
    pub method: OptimumMethod,
}

/// sin(x)/x with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SINC_SERIES_BELOW {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// Normalized weak-field response |sin(Δt/2)/(Δt/2)|·(t/T)·envelope(t).
fn normalized_response(model: NoiseModel, delta: f64, t_relax: f64, t: f64) -> f64 {
    (sinc(delta * t / 2.0) * t / t_relax).abs() * model.envelope(t, t_relax)
}

/// Transverse polarization magnitude in the weak-field limit,
/// |P₀B_acγ/Δ · sin(Δt/2)|·envelope(t).
pub fn p_perp_analytic(params: &LinearResponseParams, t: f64) -> f64 {
    (params.drive_slope() * t * sinc(params.delta * t / 2.0)).abs() * params.envelope(t)
}

/// Closed-form rotating-frame polarization (P̃x, P̃y, P̃z) of the linearized
/// system started from (0, 0, P₀).
pub fn rotating_frame_solution(params: &LinearResponseParams, t: f64) -> Vec3 {
    let env = params.envelope(t);
    let a = params.drive_slope();
    let half = params.delta * t / 2.0;
    // (cos Δt − 1)/Δ = −sin(Δt/2)·t·sinc(Δt/2)
    Vec3::new(
        a * t * sinc(params.delta * t) * env,
        -a * t * half.sin() * sinc(half) * env,
        params.p0 * env,
    )
}

/// Closed-form trace on the integrator's sample grid, so it shares the
/// numeric trace's CSV layout and sample times.
pub fn analytic_trace(
    params: &LinearResponseParams,
    meta: TraceMeta,
    cfg: &IntegratorConfig,
) -> Trace {
    let (full_steps, tail) = cfg.schedule();
    let total = full_steps + u64::from(tail > 0.0);
    let stride = cfg.sample_stride as u64;
    let samples = (0..=total)
        .filter(|&k| k.is_multiple_of(stride) || k == total)
        .map(|k| {
            let t = if k == total && k > 0 {
                cfg.t_max
            } else {
                k as f64 * cfg.dt
            };
            BlochState::new(t, rotating_frame_solution(params, t))
        })
        .collect();
    Trace {
        frame: Frame::Rotating,
        samples,
        meta,
    }
}

/// Effective field seen by the alkali magnetometer, B_eff = (8π/3)κ₀M₀P⊥.
pub fn effective_field(constants: &AmplifierConstants, p_perp: f64) -> f64 {
    8.0 * std::f64::consts::PI / 3.0 * constants.kappa0 * constants.m0 * p_perp
}

/// Amplification factor Π = |2λM_nγ/Δ · sin(Δt/2)|·envelope(t).
///
/// Uses `constants.p0` for M_n; `params.p0` and `params.b_ac` do not enter.
pub fn amplification_factor(
    constants: &AmplifierConstants,
    params: &LinearResponseParams,
    t: f64,
) -> f64 {
    let slope = constants.lambda() * constants.m_n() * params.gamma;
    (slope * t * sinc(params.delta * t / 2.0)).abs() * params.envelope(t)
}

/// Π computed the long way round, as B_eff/B_ac from the transverse polarization.
pub fn amplification_via_effective_field(
    constants: &AmplifierConstants,
    params: &LinearResponseParams,
    t: f64,
) -> Result<f64> {
    if params.b_ac <= 0.0 {
        return Err(Error::Domain("B_eff/B_ac needs b_ac > 0".into()));
    }
    let p = LinearResponseParams {
        p0: constants.p0,
        ..*params
    };
    Ok(effective_field(constants, p_perp_analytic(&p, t)) / params.b_ac)
}

/// Optimal readout time for the Gaussian kernel: the root of
/// tan(Δt/2) = ΔT²/(2t) with Δt/2 in (0, π/2).
pub fn optimal_time_exact(delta: f64, t_relax: f64) -> OptimalPoint {
    optimal_time(NoiseModel::Gaussian, delta, t_relax)
}

/// Optimal readout time of the weak-field response for either kernel.
///
/// Markovian: tan(Δt/2) = ΔT/2 has the closed form t = (2/Δ)·atan(ΔT/2).
pub fn optimal_time(model: NoiseModel, delta: f64, t_relax: f64) -> OptimalPoint {
    let d = delta.abs();
    let t_opt = if d == 0.0 {
        t_relax
    } else {
        match model {
            NoiseModel::Gaussian => {
                // t·sin(Δt/2) − (ΔT²/2)·cos(Δt/2) is increasing on (0, π/Δ),
                // negative at 0 and positive at π/Δ.
                let k = d * t_relax * t_relax / 2.0;
                let f = |t: f64| {
                    let (s, c) = (d * t / 2.0).sin_cos();
                    t * s - k * c
                };
                bisect(f, 0.0, std::f64::consts::PI / d, 1e-9)
                    .expect("sign change guaranteed on the principal branch")
            }
            NoiseModel::Markovian => 2.0 / d * (d * t_relax / 2.0).atan(),
        }
    };
    OptimalPoint {
        t_opt,
        value: normalized_response(model, delta, t_relax, t_opt),
        method: OptimumMethod::ExactRoot,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorOptimum {
    /// √((6/Δ²)(−1 + √(1 + Δ²T²/3)))
    pub cubic: OptimalPoint,
    /// T(1 − Δ²T²/24)
    pub quadratic: OptimalPoint,
}

/// Both series approximations of the Gaussian optimal time.
pub fn optimal_time_taylor(delta: f64, t_relax: f64) -> TaylorOptimum {
    let x2 = (delta * t_relax).powi(2);
    // (6/Δ²)(√(1+y) − 1) rewritten as 2T²/(1 + √(1+y)), y = Δ²T²/3
    let cubic = t_relax * (2.0 / (1.0 + (1.0 + x2 / 3.0).sqrt())).sqrt();
    let quadratic = t_relax * (1.0 - x2 / 24.0);
    let point = |t_opt: f64, method| OptimalPoint {
        t_opt,
        value: normalized_response(NoiseModel::Gaussian, delta, t_relax, t_opt.max(0.0)),
        method,
    };
    TaylorOptimum {
        cubic: point(cubic, OptimumMethod::TaylorCubic),
        quadratic: point(quadratic, OptimumMethod::TaylorQuadratic),
    }
}

/// Π_Gaussian / Π_Markovian at resonance, each at its own optimum t = T.
pub fn enhancement_ratio(t_relax: f64) -> Result<f64> {
    let constants = AmplifierConstants::new(crate::units::KAPPA0_RB_XE, 1.0, 1.0)?;
    let at = |model| -> Result<f64> {
        let p = LinearResponseParams::new(1.0, 1.0, 1.0, 0.0, t_relax, model)?;
        let t = optimal_time(model, 0.0, t_relax).t_opt;
        Ok(amplification_factor(&constants, &p, t))
    };
    Ok(at(NoiseModel::Gaussian)? / at(NoiseModel::Markovian)?)
}

/// Back-solved nuclear magnetization M_n that makes the resonant optimum
/// equal `target` amplification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationCalibration {
    pub target: f64,
    pub t_relax: f64,
    pub model: NoiseModel,
    /// M_n from the Π formula's own Δ → 0 limit, λM_nγT·envelope(T).
    pub m_n_formula: f64,
    /// M_n if the resonant optimum is instead 2λM_nγT·envelope(T).
    pub m_n_doubled: f64,
}

pub fn calibrate_magnetization(
    target: f64,
    kappa0: f64,
    gamma: f64,
    t_relax: f64,
    model: NoiseModel,
) -> Result<MagnetizationCalibration> {
    let unit = AmplifierConstants::new(kappa0, 1.0, 1.0)?;
    let p = LinearResponseParams::new(1.0, gamma, 1.0, 0.0, t_relax, model)?;
    let per_tesla = amplification_factor(&unit, &p, t_relax);
    Ok(MagnetizationCalibration {
        target,
        t_relax,
        model,
        m_n_formula: target / per_tesla,
        m_n_doubled: target / (2.0 * per_tesla),
    })
}

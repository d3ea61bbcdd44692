//! Bloch equations for a polarized nuclear-spin ensemble, in the laboratory
//! frame and in the frame rotating at the drive frequency, integrated with a
//! fixed-step classic Runge–Kutta scheme.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt_sci;
use crate::units::{DriveConfig, RelaxationSpec, SpinSpecies};

pub type Vec3 = Vector3<f64>;

/// Default fixed step for T ~ 10²–10³ s problems.
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl BlochState {
    pub fn new(t: f64, p: Vec3) -> Self {
        Self {
            t,
            px: p.x,
            py: p.y,
            pz: p.z,
        }
    }

    /// Fully longitudinal polarization `p0` at t = 0.
    pub fn longitudinal(p0: f64) -> Self {
        Self::new(0.0, Vec3::new(0.0, 0.0, p0))
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.px, self.py, self.pz)
    }

    pub fn p_perp(&self) -> f64 {
        self.px.hypot(self.py)
    }

    pub fn norm(&self) -> f64 {
        self.vector().norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Lab,
    Rotating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub drive: DriveConfig,
    pub relax: RelaxationSpec,
    pub species: SpinSpecies,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub frame: Frame,
    pub samples: Vec<BlochState>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn p_perp(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(BlochState::p_perp)
    }

    pub fn last(&self) -> &BlochState {
        self.samples.last().expect("trace always holds t = 0")
    }

    /// Writes `t_s,px,py,pz,p_perp`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_s,px,py,pz,p_perp")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_sci(s.t),
                fmt_sci(s.px),
                fmt_sci(s.py),
                fmt_sci(s.pz),
                fmt_sci(s.p_perp())
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Fixed step, seconds.
    pub dt: f64,
    pub t_max: f64,
    pub sample_stride: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_max: f64, sample_stride: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        if !(t_max >= dt) || !t_max.is_finite() {
            return Err(Error::Domain(format!(
                "t_max must be at least dt ({dt}), got {t_max}"
            )));
        }
        if sample_stride == 0 {
            return Err(Error::Domain("sample_stride must be >= 1".into()));
        }
        Ok(Self {
            dt,
            t_max,
            sample_stride,
        })
    }

    /// Default dt, window 3·max(T₁, T₂), every step sampled.
    pub fn for_relaxation(relax: &RelaxationSpec) -> Self {
        Self {
            dt: DEFAULT_DT,
            t_max: relax.default_window(),
            sample_stride: 1,
        }
    }

    /// Step schedule: number of full steps and the length of a trailing
    /// partial step (zero when t_max is a whole number of steps).
    pub(crate) fn schedule(&self) -> (u64, f64) {
        let ratio = self.t_max / self.dt;
        let nearest = ratio.round();
        if (nearest * self.dt - self.t_max).abs() <= 1e-9 * self.dt {
            (nearest as u64, 0.0)
        } else {
            let full = ratio.floor();
            (full as u64, self.t_max - full * self.dt)
        }
    }
}

/// Right-hand side dP/dt of a Bloch system.
pub trait BlochSystem {
    fn derivative(&self, t: f64, p: &Vec3) -> Vec3;
}

/// Rotating-frame system after the rotating-wave approximation.
#[derive(Debug, Clone, Copy)]
pub struct RotatingSystem {
    /// γB_ac/2, rad/s
    pub half_rabi: f64,
    /// Δ, rad/s
    pub delta: f64,
    pub relax: RelaxationSpec,
}

impl RotatingSystem {
    pub fn new(drive: &DriveConfig, relax: &RelaxationSpec, species: &SpinSpecies) -> Self {
        Self {
            half_rabi: species.gamma * drive.b_ac / 2.0,
            delta: drive.detuning(species),
            relax: *relax,
        }
    }
}

impl BlochSystem for RotatingSystem {
    #[inline]
    fn derivative(&self, t: f64, p: &Vec3) -> Vec3 {
        let r1 = self.relax.r1(t);
        let r2 = self.relax.r2(t);
        Vec3::new(
            self.half_rabi * p.z + self.delta * p.y - r2 * p.x,
            -self.delta * p.x - r2 * p.y,
            -self.half_rabi * p.x - r1 * p.z,
        )
    }
}

/// Laboratory-frame system with the full linearly polarized drive.
#[derive(Debug, Clone, Copy)]
pub struct LabSystem {
    /// γB₀
    pub larmor: f64,
    /// γB_ac
    pub rabi: f64,
    /// 2πν
    pub omega: f64,
    pub relax: RelaxationSpec,
}

impl LabSystem {
    pub fn new(drive: &DriveConfig, relax: &RelaxationSpec, species: &SpinSpecies) -> Self {
        Self {
            larmor: species.gamma * drive.b0,
            rabi: species.gamma * drive.b_ac,
            omega: 2.0 * PI * drive.nu,
            relax: *relax,
        }
    }
}

impl BlochSystem for LabSystem {
    #[inline]
    fn derivative(&self, t: f64, p: &Vec3) -> Vec3 {
        let r1 = self.relax.r1(t);
        let r2 = self.relax.r2(t);
        let drive = self.rabi * (self.omega * t).cos();
        Vec3::new(
            self.larmor * p.y - drive * p.z - r2 * p.x,
            -self.larmor * p.x - r2 * p.y,
            drive * p.x - r1 * p.z,
        )
    }
}

/// dP̃/dt in the rotating frame, evaluated at `state.t`.
pub fn rhs_rotating(
    state: &BlochState,
    drive: &DriveConfig,
    relax: &RelaxationSpec,
    species: &SpinSpecies,
) -> Vec3 {
    RotatingSystem::new(drive, relax, species).derivative(state.t, &state.vector())
}

/// dP/dt in the laboratory frame at time `t`.
pub fn rhs_lab(
    state: &BlochState,
    drive: &DriveConfig,
    relax: &RelaxationSpec,
    species: &SpinSpecies,
    t: f64,
) -> Vec3 {
    LabSystem::new(drive, relax, species).derivative(t, &state.vector())
}

#[inline]
fn rk4_step<S: BlochSystem>(system: &S, t: f64, p: &Vec3, h: f64) -> Vec3 {
    let half = 0.5 * h;
    let k1 = system.derivative(t, p);
    let k2 = system.derivative(t + half, &(p + k1 * half));
    let k3 = system.derivative(t + half, &(p + k2 * half));
    let k4 = system.derivative(t + h, &(p + k3 * h));
    p + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

/// Runs the fixed-step RK4 scheme from `initial` to `cfg.t_max`, calling
/// `visit` with every step (the initial state included). `visit` receives the
/// step index and the state; the final state is always at exactly `t_max`.
///
/// Stride is ignored here; callers decide what to keep.
pub fn propagate<S, F>(
    system: &S,
    initial: &BlochState,
    cfg: &IntegratorConfig,
    mut visit: F,
) -> Result<()>
where
    S: BlochSystem,
    F: FnMut(u64, bool, &BlochState),
{
    if initial.t != 0.0 {
        return Err(Error::Usage(format!(
            "integration starts at t = 0, initial state has t = {}",
            initial.t
        )));
    }
    let (full_steps, tail) = cfg.schedule();
    let total = full_steps + u64::from(tail > 0.0);
    let mut p = initial.vector();
    let mut t = 0.0;
    visit(0, total == 0, initial);

    for k in 1..=total {
        let h = if k > full_steps { tail } else { cfg.dt };
        let next = rk4_step(system, t, &p, h);
        if !(next.x.is_finite() && next.y.is_finite() && next.z.is_finite()) {
            return Err(Error::Integration { last_valid_t: t });
        }
        p = next;
        // Times are recomputed from the step index so they do not drift.
        t = if k == total {
            cfg.t_max
        } else {
            k as f64 * cfg.dt
        };
        visit(k, k == total, &BlochState::new(t, p));
    }
    Ok(())
}

/// Integrate the chosen frame's Bloch system and sample every
/// `cfg.sample_stride` steps, always keeping t = 0 and t = t_max.
pub fn integrate(
    initial: &BlochState,
    frame: Frame,
    drive: &DriveConfig,
    relax: &RelaxationSpec,
    species: &SpinSpecies,
    cfg: &IntegratorConfig,
) -> Result<Trace> {
    let stride = cfg.sample_stride as u64;
    let mut samples = Vec::with_capacity((cfg.t_max / cfg.dt / stride as f64) as usize + 2);
    let mut keep = |k: u64, last: bool, s: &BlochState| {
        if k.is_multiple_of(stride) || last {
            samples.push(*s);
        }
    };
    match frame {
        Frame::Rotating => propagate(
            &RotatingSystem::new(drive, relax, species),
            initial,
            cfg,
            &mut keep,
        )?,
        Frame::Lab => propagate(
            &LabSystem::new(drive, relax, species),
            initial,
            cfg,
            &mut keep,
        )?,
    }
    Ok(Trace {
        frame,
        samples,
        meta: TraceMeta {
            drive: *drive,
            relax: *relax,
            species: species.clone(),
        },
    })
}

/// Map a rotating-frame trace to the laboratory frame rotating at 2πν.
pub fn to_lab_frame(trace: &Trace, nu: f64) -> Result<Trace> {
    if trace.frame != Frame::Rotating {
        return Err(Error::Usage(
            "to_lab_frame expects a rotating-frame trace".into(),
        ));
    }
    let omega = 2.0 * PI * nu;
    let samples = trace
        .samples
        .iter()
        .map(|s| {
            let (sin, cos) = (omega * s.t).sin_cos();
            BlochState {
                t: s.t,
                px: s.px * cos - s.py * sin,
                py: s.px * sin + s.py * cos,
                pz: s.pz,
            }
        })
        .collect();
    Ok(Trace {
        frame: Frame::Lab,
        samples,
        meta: trace.meta.clone(),
    })
}

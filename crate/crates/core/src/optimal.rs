//! Optimal transverse response from full (nonlinear) rotating-frame traces.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{propagate, BlochState, IntegratorConfig, RotatingSystem, TraceMeta};
use crate::error::{Error, Result};
use crate::fmt_sci;
use crate::units::{DriveConfig, RelaxationSpec, SpinSpecies, DEFAULT_B0_T};

/// Relative increment below which the response counts as saturated.
pub const DEFAULT_KNEE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalResponse {
    pub t_opt: f64,
    pub p_perp_opt: f64,
    pub trace_meta: TraceMeta,
    /// Parabolic refinement was applied around the discrete maximum.
    pub refined: bool,
    /// The maximum sat on the last sample: the window was too short.
    pub boundary: bool,
}

/// Fits y = y1 + b·u + a·u² through three samples (u relative to the middle
/// one) and returns the vertex, or `None` if the samples are not concave.
fn parabolic_vertex(t: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let (u0, u2) = (t[0] - t[1], t[2] - t[1]);
    let (d0, d2) = (y[0] - y[1], y[2] - y[1]);
    let a = (d2 / u2 - d0 / u0) / (u2 - u0);
    if !(a < 0.0) {
        return None;
    }
    let b = d0 / u0 - a * u0;
    let u = (-b / (2.0 * a)).clamp(u0, u2);
    Some((t[1] + u, y[1] + b * u + a * u * u))
}

/// Integrate the full rotating-frame system from (0, 0, p0), take the grid
/// argmax of P⊥ and refine it by a parabola through its neighbours.
///
/// `cfg.sample_stride` is ignored: every step takes part in the search.
pub fn find_optimal_response(
    drive: &DriveConfig,
    relax: &RelaxationSpec,
    species: &SpinSpecies,
    cfg: &IntegratorConfig,
    p0: f64,
) -> Result<OptimalResponse> {
    let system = RotatingSystem::new(drive, relax, species);

    // (t, P⊥) of the best step so far and its neighbours.
    let mut prev = (0.0, f64::NAN);
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut before_best = (0.0, f64::NAN);
    let mut after_best: Option<(f64, f64)> = None;
    let mut best_is_last = false;

    propagate(&system, &BlochState::longitudinal(p0), cfg, |_, last, s| {
        let cur = (s.t, s.p_perp());
        if cur.1 > best.1 {
            before_best = prev;
            best = cur;
            after_best = None;
            best_is_last = last;
        } else if after_best.is_none() && prev.0 == best.0 {
            after_best = Some(cur);
        }
        prev = cur;
    })?;

    let trace_meta = TraceMeta {
        drive: *drive,
        relax: *relax,
        species: species.clone(),
    };
    if best.1 <= 0.0 {
        return Ok(OptimalResponse {
            t_opt: 0.0,
            p_perp_opt: 0.0,
            trace_meta,
            refined: false,
            boundary: false,
        });
    }

    let (mut t_opt, mut p_opt, mut refined) = (best.0, best.1, false);
    if let Some(next) = after_best {
        if !before_best.1.is_nan() {
            if let Some((t, p)) = parabolic_vertex(
                [before_best.0, best.0, next.0],
                [before_best.1, best.1, next.1],
            ) {
                t_opt = t;
                p_opt = p.max(best.1);
                refined = true;
            }
        }
    }
    Ok(OptimalResponse {
        t_opt,
        p_perp_opt: p_opt,
        trace_meta,
        refined,
        boundary: best_is_last,
    })
}

/// Optimal response over an increasing grid of drive amplitudes at fixed
/// detuning. Points are evaluated in parallel and returned in grid order;
/// each carries its own integration result.
pub fn saturation_scan(
    delta: f64,
    relax: &RelaxationSpec,
    species: &SpinSpecies,
    b_ac_grid: &[f64],
    dt: f64,
    p0: f64,
) -> Result<Vec<Result<OptimalResponse>>> {
    if b_ac_grid.is_empty() {
        return Err(Error::Usage(
            "saturation scan needs at least one field".into(),
        ));
    }
    if b_ac_grid.iter().any(|&b| !(b > 0.0)) || b_ac_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage(
            "b_ac grid must be positive and strictly increasing".into(),
        ));
    }
    let cfg = IntegratorConfig::new(dt, relax.default_window(), 1)?;
    Ok(b_ac_grid
        .par_iter()
        .map(|&b_ac| {
            let drive = DriveConfig::with_detuning(species, DEFAULT_B0_T, b_ac, delta)?;
            find_optimal_response(&drive, relax, species, &cfg, p0)
        })
        .collect())
}

/// Index of the first grid point whose relative increment over its
/// predecessor drops below `threshold`.
pub fn saturation_knee(values: &[f64], threshold: f64) -> Option<usize> {
    values
        .windows(2)
        .position(|w| (w[1] - w[0]) / w[0].abs() < threshold)
        .map(|i| i + 1)
}

pub const RESULT_CSV_HEADER: &str = "b_ac_T,delta_rad_s,T_s,model,t_opt_s,p_perp_opt,boundary_flag";

/// One CSV row per response. `T_s` is the transverse time T₂.
pub fn write_results_csv<W: Write>(mut out: W, results: &[OptimalResponse]) -> Result<()> {
    writeln!(out, "{RESULT_CSV_HEADER}")?;
    for r in results {
        let m = &r.trace_meta;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_sci(m.drive.b_ac),
            fmt_sci(m.drive.detuning(&m.species)),
            fmt_sci(m.relax.t2),
            m.relax.model,
            fmt_sci(r.t_opt),
            fmt_sci(r.p_perp_opt),
            u8::from(r.boundary)
        )?;
    }
    Ok(())
}

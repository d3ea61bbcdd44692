//! One- and two-dimensional parameter sweeps over (b_ac, Δ, T, t).
//!
//! Grid points are independent, so a sweep is a parallel map over the
//! lexicographically ordered point list. Each point is a pure function of its
//! parameters, so worker count never changes the output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{integrate, BlochState, Frame, IntegratorConfig};
use crate::config::ParamSet;
use crate::error::{Error, Result};
use crate::fmt_sci;
use crate::linear::{optimal_time, p_perp_analytic, LinearResponseParams};
use crate::optimal::find_optimal_response;
use crate::units::{
    parse_detuning, parse_field, parse_time, DetuningConvention, NoiseModel, RelaxationSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisName {
    /// Drive amplitude, tesla.
    #[serde(rename = "b_ac")]
    BAc,
    /// Detuning, rad/s.
    #[serde(rename = "delta")]
    Delta,
    /// Relaxation time T₁ = T₂, seconds.
    #[serde(rename = "T")]
    Relaxation,
    /// Readout time, seconds.
    #[serde(rename = "t")]
    Time,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::BAc => "b_ac",
            AxisName::Delta => "delta",
            AxisName::Relaxation => "T",
            AxisName::Time => "t",
        }
    }

    fn parse_value(self, token: &str, convention: DetuningConvention) -> Result<f64> {
        match self {
            AxisName::BAc => parse_field(token),
            AxisName::Delta => parse_detuning(token, convention),
            AxisName::Relaxation | AxisName::Time => parse_time(token),
        }
    }
}

impl FromStr for AxisName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "b_ac" | "bac" => Ok(AxisName::BAc),
            "delta" | "detuning" => Ok(AxisName::Delta),
            "T" => Ok(AxisName::Relaxation),
            "t" => Ok(AxisName::Time),
            other => Err(Error::parse(other, "axis must be one of b_ac, delta, T, t")),
        }
    }
}

impl fmt::Display for AxisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisValues {
    List(Vec<f64>),
    Range {
        min: f64,
        max: f64,
        count: usize,
        spacing: Spacing,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: AxisName,
    pub values: AxisValues,
}

impl Axis {
    pub fn list(name: AxisName, values: Vec<f64>) -> Self {
        Self {
            name,
            values: AxisValues::List(values),
        }
    }

    pub fn range(name: AxisName, min: f64, max: f64, count: usize, spacing: Spacing) -> Self {
        Self {
            name,
            values: AxisValues::Range {
                min,
                max,
                count,
                spacing,
            },
        }
    }

    /// Parse `name: v1, v2, ...` or `name: min..max/count [lin|log]`.
    /// Field values need a unit (`10pT`), detunings a frequency unit or
    /// `rad/s`, times default to seconds.
    pub fn parse(text: &str, convention: DetuningConvention) -> Result<Self> {
        let (name, rest) = text
            .split_once(':')
            .ok_or_else(|| Error::parse(text, "expected `name: values`"))?;
        let name: AxisName = name.parse()?;
        let rest = rest.trim();
        if let Some((lo, tail)) = rest.split_once("..") {
            let mut words = tail.split_whitespace();
            let span = words
                .next()
                .ok_or_else(|| Error::parse(text, "range needs `min..max/count`"))?;
            let (hi, count) = span
                .split_once('/')
                .ok_or_else(|| Error::parse(text, "range needs `/count`"))?;
            let count: usize = count
                .parse()
                .map_err(|_| Error::parse(count, "count must be an integer"))?;
            let spacing = match words.next() {
                None | Some("lin") | Some("linear") => Spacing::Linear,
                Some("log") => Spacing::Log,
                Some(other) => return Err(Error::parse(other, "spacing must be lin or log")),
            };
            if let Some(extra) = words.next() {
                return Err(Error::parse(extra, "unexpected trailing token"));
            }
            Ok(Axis::range(
                name,
                name.parse_value(lo, convention)?,
                name.parse_value(hi, convention)?,
                count,
                spacing,
            ))
        } else {
            let values = rest
                .split(',')
                .map(|v| name.parse_value(v, convention))
                .collect::<Result<Vec<_>>>()?;
            Ok(Axis::list(name, values))
        }
    }

    /// Grid points. Range points are `min + i·step` (or the log analogue) with
    /// the last point pinned to `max`, so refining n → 2n − 1 reproduces the
    /// coarse points bit for bit.
    pub fn points(&self) -> Result<Vec<f64>> {
        let pts = match &self.values {
            AxisValues::List(v) => {
                if v.is_empty() {
                    return Err(Error::Usage(format!("axis {} has no values", self.name)));
                }
                v.clone()
            }
            &AxisValues::Range {
                min,
                max,
                count,
                spacing,
            } => {
                if count < 2 {
                    return Err(Error::Usage(format!(
                        "axis {} range needs count >= 2",
                        self.name
                    )));
                }
                let n = (count - 1) as f64;
                let mut pts: Vec<f64> = match spacing {
                    Spacing::Linear => {
                        let step = (max - min) / n;
                        (0..count).map(|i| min + i as f64 * step).collect()
                    }
                    Spacing::Log => {
                        if !(min > 0.0 && max > 0.0) {
                            return Err(Error::Usage(format!(
                                "log axis {} needs positive bounds",
                                self.name
                            )));
                        }
                        let (lo, hi) = (min.ln(), max.ln());
                        let step = (hi - lo) / n;
                        (0..count).map(|i| (lo + i as f64 * step).exp()).collect()
                    }
                };
                pts[0] = min;
                pts[count - 1] = max;
                pts
            }
        };
        if pts.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage(format!(
                "axis {} has non-finite values",
                self.name
            )));
        }
        let increasing = pts.windows(2).all(|w| w[1] > w[0]);
        let decreasing = pts.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Usage(format!(
                "axis {} must be strictly monotone",
                self.name
            )));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// P⊥ at the readout time given by the `t` axis.
    PPerpTrace,
    PPerpOpt,
    TOpt,
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "p_perp_trace" => Ok(Observable::PPerpTrace),
            "p_perp_opt" => Ok(Observable::PPerpOpt),
            "t_opt" => Ok(Observable::TOpt),
            other => Err(Error::parse(
                other,
                "observable must be p_perp_trace, p_perp_opt or t_opt",
            )),
        }
    }
}

/// Which module evaluates each point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Full nonlinear rotating-frame integration.
    #[default]
    Numeric,
    /// Weak-field closed forms.
    Analytic,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "numeric" => Ok(Engine::Numeric),
            "analytic" => Ok(Engine::Analytic),
            other => Err(Error::parse(other, "engine must be numeric or analytic")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    /// Everything not swept. `fixed.noise` is ignored in favour of `models`.
    pub fixed: ParamSet,
    pub observable: Observable,
    pub models: Vec<NoiseModel>,
    #[serde(default)]
    pub engine: Engine,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        self.fixed.validate()?;
        if self.models.is_empty() {
            return Err(Error::Usage("sweep needs at least one noise model".into()));
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(Error::Usage("noise models listed twice".into()));
        }
        let a1 = self.axis1.points()?;
        let a2 = self.axis2.as_ref().map(Axis::points).transpose()?;
        if let Some(axis2) = &self.axis2 {
            if axis2.name == self.axis1.name {
                return Err(Error::Usage("the two axes must differ".into()));
            }
        }
        let names: Vec<AxisName> = std::iter::once(self.axis1.name)
            .chain(self.axis2.as_ref().map(|a| a.name))
            .collect();
        let has_time = names.contains(&AxisName::Time);
        match (self.observable, has_time) {
            (Observable::PPerpTrace, false) => {
                return Err(Error::Usage("p_perp_trace needs a `t` axis".into()))
            }
            (Observable::PPerpOpt | Observable::TOpt, true) => {
                return Err(Error::Usage(
                    "a `t` axis only makes sense with p_perp_trace".into(),
                ))
            }
            _ => {}
        }
        for (name, pts) in names.iter().zip(std::iter::once(&a1).chain(a2.as_ref())) {
            let bad = match name {
                AxisName::BAc | AxisName::Time => pts.iter().any(|&v| v < 0.0),
                AxisName::Relaxation => pts.iter().any(|&v| v <= 0.0),
                AxisName::Delta => false,
            };
            if bad {
                return Err(Error::Domain(format!(
                    "axis {name} has out-of-range values"
                )));
            }
        }
        Ok((a1, a2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowFlag {
    Ok,
    /// Maximum attained on the window boundary.
    Boundary,
    /// The point could not be evaluated.
    Error,
}

impl RowFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            RowFlag::Ok => "ok",
            RowFlag::Boundary => "boundary",
            RowFlag::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis2: Option<f64>,
    pub model: NoiseModel,
    pub value: Option<f64>,
    pub flag: RowFlag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub artifact: String,
    pub version: String,
    pub integrator: String,
    pub dt_s: f64,
    pub window: String,
    pub units: String,
}

impl Provenance {
    fn new(spec: &SweepSpec) -> Self {
        Self {
            artifact: "zenoamp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            integrator: "rk4-fixed-step".into(),
            dt_s: spec.fixed.dt,
            window: "3*max(T1,T2)".into(),
            units: "b_ac [T], delta [rad/s], T [s], t [s], t_opt [s], p_perp [1]".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    pub provenance: Provenance,
    /// Wall-clock time of the run. Not emitted, so outputs stay byte-stable.
    #[serde(skip)]
    pub elapsed: Option<Duration>,
}

impl SweepResult {
    pub fn flagged(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.flag != RowFlag::Ok)
    }
}

struct Point {
    axis1: f64,
    axis2: Option<f64>,
    model: NoiseModel,
}

fn point_params(spec: &SweepSpec, p: &Point) -> (ParamSet, Option<f64>) {
    let mut params = spec.fixed.clone();
    params.noise = p.model;
    let mut readout = None;
    let axes = std::iter::once((spec.axis1.name, p.axis1))
        .chain(spec.axis2.as_ref().map(|a| a.name).zip(p.axis2));
    for (name, v) in axes {
        match name {
            AxisName::BAc => params.b_ac = v,
            AxisName::Delta => params.delta = v,
            AxisName::Relaxation => params.set_equal_times(v),
            AxisName::Time => readout = Some(v),
        }
    }
    (params, readout)
}

fn evaluate_numeric(
    observable: Observable,
    params: &ParamSet,
    readout: Option<f64>,
) -> Result<(f64, RowFlag)> {
    let drive = params.drive()?;
    let relax = params.relaxation()?;
    match observable {
        Observable::PPerpTrace => {
            let t = readout.expect("validated: trace observable has a t axis");
            if t == 0.0 {
                return Ok((0.0, RowFlag::Ok));
            }
            let cfg = IntegratorConfig::new(params.dt.min(t), t, usize::MAX)?;
            let trace = integrate(
                &BlochState::longitudinal(params.p0),
                Frame::Rotating,
                &drive,
                &relax,
                &params.species,
                &cfg,
            )?;
            Ok((trace.last().p_perp(), RowFlag::Ok))
        }
        Observable::PPerpOpt | Observable::TOpt => {
            let cfg = IntegratorConfig::new(params.dt, relax.default_window(), 1)?;
            let r = find_optimal_response(&drive, &relax, &params.species, &cfg, params.p0)?;
            let flag = if r.boundary {
                RowFlag::Boundary
            } else {
                RowFlag::Ok
            };
            let value = if observable == Observable::TOpt {
                r.t_opt
            } else {
                r.p_perp_opt
            };
            Ok((value, flag))
        }
    }
}

fn evaluate_analytic(
    observable: Observable,
    params: &ParamSet,
    readout: Option<f64>,
) -> Result<(f64, RowFlag)> {
    if params.t1 != params.t2 {
        return Err(Error::Usage("analytic engine needs T1 = T2".into()));
    }
    let relax: RelaxationSpec = params.relaxation()?;
    let lr = LinearResponseParams::new(
        params.p0,
        params.species.gamma,
        params.b_ac,
        params.delta,
        relax.t1,
        relax.model,
    )?;
    let value = match observable {
        Observable::PPerpTrace => p_perp_analytic(&lr, readout.expect("validated")),
        Observable::PPerpOpt => {
            p_perp_analytic(&lr, optimal_time(lr.model, lr.delta, lr.t_relax).t_opt)
        }
        Observable::TOpt => optimal_time(lr.model, lr.delta, lr.t_relax).t_opt,
    };
    Ok((value, RowFlag::Ok))
}

fn evaluate(spec: &SweepSpec, p: &Point) -> SweepRow {
    let (params, readout) = point_params(spec, p);
    let outcome = match spec.engine {
        Engine::Numeric => evaluate_numeric(spec.observable, &params, readout),
        Engine::Analytic => evaluate_analytic(spec.observable, &params, readout),
    };
    let (value, flag, message) = match outcome {
        Ok((v, flag)) => (Some(v), flag, None),
        Err(e) => (None, RowFlag::Error, Some(e.to_string())),
    };
    SweepRow {
        axis1: p.axis1,
        axis2: p.axis2,
        model: p.model,
        value,
        flag,
        message,
    }
}

/// Evaluate the sweep on rayon's global pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_inner(spec)
}

/// Evaluate the sweep on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    if workers == 0 {
        return Err(Error::Usage("workers must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_sweep_inner(spec))
}

fn run_sweep_inner(spec: &SweepSpec) -> Result<SweepResult> {
    let start = Instant::now();
    let (a1, a2) = spec.validate()?;
    let inner: Vec<Option<f64>> = match &a2 {
        Some(v) => v.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let points: Vec<Point> = a1
        .iter()
        .flat_map(|&x| {
            inner.iter().flat_map(move |&y| {
                spec.models.iter().map(move |&model| Point {
                    axis1: x,
                    axis2: y,
                    model,
                })
            })
        })
        .collect();
    let rows = points.par_iter().map(|p| evaluate(spec, p)).collect();
    Ok(SweepResult {
        spec: spec.clone(),
        rows,
        provenance: Provenance::new(spec),
        elapsed: Some(start.elapsed()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::parse(other, "format must be csv or json")),
        }
    }
}

/// Write the result as CSV (`axis1[,axis2],model,value,flag`, preceded by one
/// `#` line naming the axes) or as JSON with the full sweep definition and provenance.
pub fn emit<W: Write>(result: &SweepResult, format: OutputFormat, mut out: W) -> Result<()> {
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, result)?;
            writeln!(out)?;
        }
        OutputFormat::Csv => {
            let spec = &result.spec;
            let two_d = spec.axis2.is_some();
            write!(
                out,
                "# zenoamp {} observable={:?} engine={:?} dt_s={} axis1={}",
                result.provenance.version,
                spec.observable,
                spec.engine,
                result.provenance.dt_s,
                spec.axis1.name
            )?;
            if let Some(a2) = &spec.axis2 {
                write!(out, " axis2={}", a2.name)?;
            }
            writeln!(out, " units=SI")?;
            if two_d {
                writeln!(out, "axis1,axis2,model,value,flag")?;
            } else {
                writeln!(out, "axis1,model,value,flag")?;
            }
            for row in &result.rows {
                write!(out, "{},", fmt_sci(row.axis1))?;
                if let Some(y) = row.axis2 {
                    write!(out, "{},", fmt_sci(y))?;
                }
                let value = row.value.map_or_else(|| "nan".to_string(), fmt_sci);
                writeln!(out, "{},{},{}", row.model, value, row.flag.as_str())?;
            }
        }
    }
    Ok(())
}

/// Convenience wrapper returning the emitted bytes.
pub fn emit_to_vec(result: &SweepResult, format: OutputFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    emit(result, format, &mut buf)?;
    Ok(buf)
}

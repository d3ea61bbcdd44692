use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use zenoamp::axion::{
    clip_to_window, default_window, read_bounds, rescale_bounds, write_bounds, FactorOrigin,
};
use zenoamp::config::{default_m0, REFERENCE_AMPLIFICATION, REFERENCE_T_S};
use zenoamp::linear::{analytic_trace, calibrate_magnetization, optimal_time};
use zenoamp::optimal::write_results_csv;
use zenoamp::sweep::{emit, Axis, Engine, Observable, OutputFormat};
use zenoamp::units::{
    parse_detuning, parse_field, parse_mass, parse_time, AXION_WINDOW_EV, HBAR_C_EV_M,
    KAPPA0_RB_XE, NEUTRON_MASS_EV, PLANCK_EV_S, XE129_GAMMA_HZ_PER_UT,
};
use zenoamp::{
    enhancement_ratio, find_optimal_response, integrate, run_sweep, run_sweep_with_workers,
    BlochState, ConfigFile, DetuningConvention, Error, Frame, IntegratorConfig,
    LinearResponseParams, NoiseModel, ParamSet, Result, SpinSpecies, SweepSpec, TraceMeta,
};

use crate::args::{
    Cli, Command, ConstrainArgs, FrameArg, InfoArgs, OptimalArgs, ParamArgs, SimulateArgs,
    SweepArgs,
};
use crate::manifest::RunManifest;

/// Field used by `--factor auto`: well inside the linear regime.
const AUTO_FACTOR_B_AC_T: f64 = 10e-12;

/// Lab-frame steps must resolve the carrier: dt·ν below this.
const LAB_MAX_DT_NU: f64 = 0.05;

struct Context {
    config_path: Option<PathBuf>,
    config: ConfigFile,
    workers: Option<usize>,
    convention: Option<String>,
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => ConfigFile::parse(&std::fs::read_to_string(path)?)?,
        None => ConfigFile::default(),
    };
    let ctx = Context {
        config_path: cli.config,
        config,
        workers: cli.workers,
        convention: cli.detuning_convention,
    };
    if ctx.workers == Some(0) {
        return Err(Error::Usage("--workers must be >= 1".into()));
    }
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Optimal(a) => optimal(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Constrain(a) => constrain(&ctx, a),
        Command::Info(a) => info(&ctx, a),
    }
}

/// Config entries, then the global convention flag, then parameter flags.
fn resolve(ctx: &Context, flags: &ParamArgs) -> Result<ParamSet> {
    let mut entries = ctx.config.params.clone();
    if let Some(c) = &ctx.convention {
        c.parse::<DetuningConvention>()?;
        entries.insert("detuning_convention".into(), c.clone());
    }
    let m0_given = entries.contains_key("m0") || flags.m0.is_some();
    let mut p = ParamSet::from_entries(&entries)?;

    if let Some(g) = flags.gamma {
        p.species = SpinSpecies::from_hz_per_ut("custom", g)?;
    }
    if let Some(s) = &flags.bac {
        p.b_ac = parse_field(s)?;
    }
    if let Some(s) = &flags.b0 {
        p.b0 = parse_field(s)?;
    }
    if let Some(s) = &flags.detuning {
        p.delta = parse_detuning(s, p.detuning_convention)?;
    }
    if let Some(s) = &flags.t {
        p.set_equal_times(parse_time(s)?);
    }
    if let Some(s) = &flags.t1 {
        p.t1 = parse_time(s)?;
    }
    if let Some(s) = &flags.t2 {
        p.t2 = parse_time(s)?;
    }
    if let Some(s) = &flags.noise {
        p.noise = s.parse()?;
    }
    if let Some(k) = flags.kappa0 {
        p.kappa0 = k;
    }
    if let Some(p0) = flags.p0 {
        p.p0 = p0;
    }
    if let Some(s) = &flags.dt {
        p.dt = parse_time(s)?;
    }
    if let Some(s) = &flags.m0 {
        p.m0 = parse_field(s)?;
    } else if !m0_given {
        p.m0 = default_m0(p.kappa0, &p.species, p.p0)?;
    }
    p.validate()?;
    Ok(p)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Run `body` against the output file (or stdout) and flush it.
fn with_output(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            body(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn manifest(
    ctx: &Context,
    subcommand: &str,
    params: &ParamSet,
    inputs: Vec<String>,
    out: Option<&Path>,
    options: serde_json::Value,
) -> Result<()> {
    let Some(out) = out else { return Ok(()) };
    let mut inputs = inputs;
    if let Some(cfg) = &ctx.config_path {
        inputs.insert(0, path_str(cfg));
    }
    RunManifest::new(
        subcommand,
        params.clone(),
        inputs,
        vec![path_str(out)],
        options,
    )
    .write_beside(out)
}

fn simulate(ctx: &Context, a: SimulateArgs) -> Result<()> {
    let p = resolve(ctx, &a.params)?;
    let drive = p.drive()?;
    let relax = p.relaxation()?;
    let t_max = match &a.tmax {
        Some(s) => parse_time(s)?,
        None => relax.default_window(),
    };
    let frame = match a.frame {
        FrameArg::Rotating => Frame::Rotating,
        FrameArg::Lab => {
            if p.dt * drive.nu > LAB_MAX_DT_NU {
                return Err(Error::Domain(format!(
                    "lab frame needs dt well below 1/ν: dt·ν = {:.3} (limit {LAB_MAX_DT_NU})",
                    p.dt * drive.nu
                )));
            }
            Frame::Lab
        }
    };
    let cfg = IntegratorConfig::new(p.dt, t_max, a.stride)?;
    let engine: Engine = a.engine.parse()?;
    let trace = match engine {
        Engine::Numeric => integrate(
            &BlochState::longitudinal(p.p0),
            frame,
            &drive,
            &relax,
            &p.species,
            &cfg,
        )?,
        Engine::Analytic => {
            if frame != Frame::Rotating || p.t1 != p.t2 {
                return Err(Error::Usage(
                    "analytic traces need the rotating frame and T1 = T2".into(),
                ));
            }
            let lr =
                LinearResponseParams::new(p.p0, p.species.gamma, p.b_ac, p.delta, p.t2, p.noise)?;
            let meta = TraceMeta {
                drive,
                relax,
                species: p.species.clone(),
            };
            analytic_trace(&lr, meta, &cfg)
        }
    };
    with_output(a.out.as_deref(), |w| trace.write_csv(w))?;
    manifest(
        ctx,
        "simulate",
        &p,
        vec![],
        a.out.as_deref(),
        json!({ "t_max_s": t_max, "stride": a.stride, "frame": format!("{:?}", a.frame).to_lowercase(), "engine": engine }),
    )
}

fn optimal(ctx: &Context, a: OptimalArgs) -> Result<()> {
    let p = resolve(ctx, &a.params)?;
    let drive = p.drive()?;
    let relax = p.relaxation()?;
    let t_max = match &a.tmax {
        Some(s) => parse_time(s)?,
        None => relax.default_window(),
    };
    let cfg = IntegratorConfig::new(p.dt, t_max, 1)?;
    let r = find_optimal_response(&drive, &relax, &p.species, &cfg, p.p0)?;
    if r.boundary {
        eprintln!("warning: maximum at the end of the window (t_max = {t_max} s); widen --tmax");
    }
    with_output(a.out.as_deref(), |w| {
        write_results_csv(w, std::slice::from_ref(&r))
    })?;
    if a.out.is_some() {
        let linear = (p.t1 == p.t2).then(|| optimal_time(p.noise, p.delta, p.t2).t_opt);
        println!(
            "t_opt = {} s, p_perp_opt = {}{}",
            r.t_opt,
            r.p_perp_opt,
            linear.map_or(String::new(), |t| format!(" (weak-field t_opt = {t} s)"))
        );
    }
    manifest(
        ctx,
        "optimal",
        &p,
        vec![],
        a.out.as_deref(),
        json!({ "t_max_s": t_max, "refined": r.refined, "boundary": r.boundary }),
    )
}

fn sweep(ctx: &Context, a: SweepArgs) -> Result<()> {
    let p = resolve(ctx, &a.params)?;
    let section = ctx.config.sweep.clone().unwrap_or_default();
    let pick =
        |flag: &Option<String>, key: &str| flag.clone().or_else(|| section.get(key).cloned());

    let axis1 = pick(&a.axis1, "axis1")
        .ok_or_else(|| Error::Usage("sweep needs --axis1 (or `axis1` in [sweep])".into()))?;
    let axis1 = Axis::parse(&axis1, p.detuning_convention)?;
    let axis2 = pick(&a.axis2, "axis2")
        .map(|s| Axis::parse(&s, p.detuning_convention))
        .transpose()?;
    let observable: Observable = pick(&a.observable, "observable")
        .as_deref()
        .unwrap_or("p_perp_opt")
        .parse()?;
    let models = pick(&a.models, "models")
        .as_deref()
        .unwrap_or("gaussian,markovian")
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<NoiseModel>>>()?;
    let engine: Engine = match pick(&a.engine, "engine") {
        Some(s) => s.parse()?,
        None => Engine::default(),
    };
    let format: OutputFormat = a.format.parse()?;

    let spec = SweepSpec {
        axis1,
        axis2,
        fixed: p.clone(),
        observable,
        models,
        engine,
    };
    let result = match ctx.workers {
        Some(n) => run_sweep_with_workers(&spec, n)?,
        None => run_sweep(&spec)?,
    };
    let flagged = result.flagged().count();
    if flagged > 0 {
        eprintln!("warning: {flagged} of {} rows flagged", result.rows.len());
    }
    with_output(a.out.as_deref(), |w| emit(&result, format, w))?;
    manifest(
        ctx,
        "sweep",
        &p,
        vec![],
        a.out.as_deref(),
        json!({ "spec": spec, "rows": result.rows.len(), "flagged": flagged }),
    )
}

/// Gaussian/Markovian ratio of numeric optima at resonance.
fn auto_factor(p: &ParamSet) -> Result<(f64, String)> {
    let mut at = p.clone();
    at.delta = 0.0;
    at.b_ac = AUTO_FACTOR_B_AC_T;
    let drive = at.drive()?;
    let mut peak = |model| -> Result<f64> {
        at.noise = model;
        let relax = at.relaxation()?;
        let cfg = IntegratorConfig::new(at.dt, relax.default_window(), 1)?;
        Ok(find_optimal_response(&drive, &relax, &at.species, &cfg, at.p0)?.p_perp_opt)
    };
    let ratio = peak(NoiseModel::Gaussian)? / peak(NoiseModel::Markovian)?;
    let detail = format!(
        "numeric gaussian/markovian optima at resonance, b_ac = {AUTO_FACTOR_B_AC_T:e} T, \
         T1 = {} s, T2 = {} s, dt = {} s",
        at.t1, at.t2, at.dt
    );
    Ok((ratio, detail))
}

fn parse_window(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| Error::Parse {
        token: s.into(),
        reason: "window must be `lo,hi`".into(),
    })?;
    let (lo, hi) = (parse_mass(lo)?, parse_mass(hi)?);
    if lo >= hi {
        return Err(Error::Usage(format!(
            "window must satisfy lo < hi, got {lo} eV, {hi} eV"
        )));
    }
    Ok((lo, hi))
}

fn constrain(ctx: &Context, a: ConstrainArgs) -> Result<()> {
    let p = resolve(ctx, &a.params)?;
    let window = if a.no_clip {
        None
    } else {
        Some(
            a.window
                .as_deref()
                .map_or(Ok(default_window()), parse_window)?,
        )
    };
    let baseline = read_bounds(File::open(&a.baseline)?)?;
    let (factor, origin) = match a.factor.as_str() {
        "auto" => {
            let (f, detail) = auto_factor(&p)?;
            (f, FactorOrigin::Computed { detail })
        }
        "sqrt-e" => (enhancement_ratio(p.t2)?, FactorOrigin::Analytic),
        other => {
            let f: f64 = other.parse().map_err(|_| Error::Parse {
                token: other.into(),
                reason: "factor must be auto, sqrt-e or a positive number".into(),
            })?;
            (f, FactorOrigin::Literal)
        }
    };
    let rescaled = rescale_bounds(&baseline, factor)?;
    let points = match window {
        Some(w) => clip_to_window(&rescaled, w),
        None => rescaled,
    };
    with_output(a.out.as_deref(), |w| {
        write_bounds(w, &points, factor, &origin, window)
    })?;
    if a.out.is_some() {
        println!(
            "improvement factor {factor} ({origin}); {} points written",
            points.len()
        );
    }
    manifest(
        ctx,
        "constrain",
        &p,
        vec![path_str(&a.baseline)],
        a.out.as_deref(),
        json!({ "factor": factor, "factor_origin": origin, "window_eV": window }),
    )
}

fn info(ctx: &Context, a: InfoArgs) -> Result<()> {
    let p = resolve(ctx, &a.params)?;
    let out = io::stdout();
    let mut w = out.lock();
    writeln!(w, "zenoamp {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w)?;
    writeln!(w, "constants")?;
    writeln!(w, "  gamma_xe129      {XE129_GAMMA_HZ_PER_UT} Hz/uT")?;
    writeln!(w, "  kappa0_rb_xe     {KAPPA0_RB_XE}")?;
    writeln!(w, "  hbar_c           {HBAR_C_EV_M:e} eV m")?;
    writeln!(w, "  planck_h         {PLANCK_EV_S:e} eV s")?;
    writeln!(w, "  neutron_mass     {NEUTRON_MASS_EV:e} eV")?;
    writeln!(
        w,
        "  axion_window     [{:e}, {:e}] eV",
        AXION_WINDOW_EV.0, AXION_WINDOW_EV.1
    )?;
    writeln!(w)?;
    writeln!(w, "resolved parameters")?;
    let value = serde_json::to_value(&p)?;
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            writeln!(w, "  {k:<16} {v}")?;
        }
    }
    writeln!(
        w,
        "  larmor_hz        {}",
        p.drive()?.larmor_frequency(&p.species)
    )?;
    writeln!(w)?;
    writeln!(
        w,
        "M_n calibration (resonant optimum = {REFERENCE_AMPLIFICATION} at T = {REFERENCE_T_S} s, kappa0 = {})",
        p.kappa0
    )?;
    for model in [NoiseModel::Gaussian, NoiseModel::Markovian] {
        let c = calibrate_magnetization(
            REFERENCE_AMPLIFICATION,
            p.kappa0,
            p.species.gamma,
            REFERENCE_T_S,
            model,
        )?;
        writeln!(
            w,
            "  {:<9}  formula reading {:e} T   doubled reading {:e} T",
            model.as_str(),
            c.m_n_formula,
            c.m_n_doubled
        )?;
    }
    writeln!(
        w,
        "  sqrt(e) ratio    {}",
        enhancement_ratio(REFERENCE_T_S)?
    )?;
    Ok(())
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn zenoamp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zenoamp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = zenoamp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            l.split(',')
                .map(|f| f.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect()
}

fn manifest(dir: &Path, out: &str) -> serde_json::Value {
    let text = fs::read_to_string(dir.join(format!("{out}.manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

const FIG1: &[&str] = &[
    "simulate",
    "--noise",
    "gaussian",
    "--bac",
    "10pT",
    "--T",
    "380",
    "--detuning",
    "2.5mHz",
    "--tmax",
    "1200",
];

#[test]
fn simulate_writes_trace_and_manifest() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &[FIG1, &["--out", "a.csv"]].concat());
    let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t_s,px,py,pz,p_perp");
    let rows = data_rows(&text);
    // Stride 100 at dt = 10 ms: one row per second, both ends included.
    assert_eq!(rows.len(), 1201);
    assert_eq!(rows.last().unwrap()[0], 1200.0);
    let peak = rows.iter().max_by(|a, b| a[4].total_cmp(&b[4])).unwrap();
    // Weak field: the peak straddles the root of t·sin(Δt/2) − (ΔT²/2)·cos(Δt/2).
    let delta = 2.0 * std::f64::consts::PI * 2.5e-3;
    let g = |t: f64| {
        t * (delta * t / 2.0).sin() - delta * 380.0 * 380.0 / 2.0 * (delta * t / 2.0).cos()
    };
    assert!(
        g(peak[0] - 1.0) < 0.0 && g(peak[0] + 1.0) > 0.0,
        "peak at {}",
        peak[0]
    );

    let m = manifest(dir.path(), "a.csv");
    assert_eq!(m["subcommand"], "simulate");
    assert_eq!(m["params"]["t1"], 380.0);
    assert_eq!(m["params"]["noise"], "gaussian");
    assert!((m["params"]["delta"].as_f64().unwrap() - delta).abs() < 1e-15);
    assert_eq!(m["options"]["stride"], 100);
}

#[test]
fn simulate_without_drive_has_no_transverse_polarization() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &["simulate", "--bac", "0", "--T", "50", "--out", "z.csv"],
    );
    let rows = data_rows(&fs::read_to_string(dir.path().join("z.csv")).unwrap());
    assert!(rows.iter().all(|r| r[4] == 0.0));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &[FIG1, &["--out", "a.csv"]].concat());
    ok(dir.path(), &[FIG1, &["--out", "b.csv"]].concat());
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    let strip = |n: &str| {
        let mut m = manifest(dir.path(), n);
        m["outputs"] = serde_json::Value::Null;
        m
    };
    assert_eq!(strip("a.csv"), strip("b.csv"));
}

#[test]
fn optimal_at_resonance_returns_t_equal_to_t_relax() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "optimal",
            "--noise",
            "gaussian",
            "--detuning",
            "0",
            "--T",
            "380",
            "--bac",
            "10pT",
            "--out",
            "o.csv",
        ],
    );
    let text = fs::read_to_string(dir.path().join("o.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "b_ac_T,delta_rad_s,T_s,model,t_opt_s,p_perp_opt,boundary_flag"
    );
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let t_opt: f64 = row[4].parse().unwrap();
    assert!((t_opt / 380.0 - 1.0).abs() < 0.01, "t_opt = {t_opt}");
    assert_eq!(row[6], "0");
    assert!(dir.path().join("o.csv.manifest.json").exists());
}

#[test]
fn single_point_sweep_matches_optimal() {
    let dir = TempDir::new().unwrap();
    let common = [
        "--noise",
        "markovian",
        "--bac",
        "100pT",
        "--detuning",
        "1mHz",
        "--T",
        "200",
    ];
    ok(
        dir.path(),
        &[&["optimal"], &common[..], &["--out", "o.csv"]].concat(),
    );
    ok(
        dir.path(),
        &[
            &["sweep"],
            &common[..],
            &[
                "--axis1",
                "T: 200",
                "--models",
                "markovian",
                "--out",
                "s.csv",
            ],
        ]
        .concat(),
    );
    let opt = fs::read_to_string(dir.path().join("o.csv")).unwrap();
    let sweep = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let p_opt = opt
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(5)
        .unwrap()
        .to_string();
    let line = sweep
        .lines()
        .find(|l| !l.starts_with('#') && !l.starts_with("axis1"))
        .unwrap();
    let fields: Vec<&str> = line.split(',').collect();
    assert_eq!(fields[1], "markovian");
    assert_eq!(fields[2], p_opt);
    assert_eq!(fields[3], "ok");
}

#[test]
fn sweep_output_independent_of_workers() {
    let dir = TempDir::new().unwrap();
    let args = [
        "sweep",
        "--axis1",
        "delta: 0mHz..5mHz/6",
        "--axis2",
        "T: 20..100/5 log",
        "--bac",
        "50pT",
    ];
    for (workers, out) in [("1", "w1.json"), ("4", "w4.json")] {
        ok(
            dir.path(),
            &[
                &args[..],
                &["--workers", workers, "--format", "json", "--out", out],
            ]
            .concat(),
        );
    }
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("w1.json"), read("w4.json"));
    let v: serde_json::Value = serde_json::from_slice(&read("w1.json")).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 6 * 5 * 2);
}

#[test]
fn sweep_reads_config_section_and_flags_override() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "bac_pt = 100\nT_s = 60\n\n[sweep]\naxis1 = b_ac: 10pT, 20pT\nmodels = gaussian\nobservable = t_opt\n",
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "--config", "run.cfg", "sweep", "--T", "30", "--out", "s.csv",
        ],
    );
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(text.lines().any(|l| l == "axis1,model,value,flag"));
    let m = manifest(dir.path(), "s.csv");
    assert_eq!(m["params"]["t1"], 30.0);
    assert_eq!(m["inputs"][0], "run.cfg");
    assert_eq!(m["options"]["spec"]["observable"], "t_opt");
}

fn write_baseline(dir: &Path) {
    let mut text = String::from("# synthetic\nmass_eV,g2_over_4\n");
    for i in 0..10 {
        let mass = 1e-6 * 10f64.powf(2.0 * i as f64 / 9.0);
        text.push_str(&format!("{mass:e},{:e}\n", 1e-9 * (1 + i) as f64));
    }
    fs::write(dir.join("base.csv"), text).unwrap();
}

fn bounds(dir: &Path, name: &str) -> Vec<(f64, f64)> {
    data_rows(&fs::read_to_string(dir.join(name)).unwrap())
        .into_iter()
        .map(|r| (r[0], r[1]))
        .collect()
}

#[test]
fn constrain_auto_factor_is_near_sqrt_e() {
    let dir = TempDir::new().unwrap();
    write_baseline(dir.path());
    ok(
        dir.path(),
        &[
            "constrain",
            "--baseline",
            "base.csv",
            "--factor",
            "auto",
            "--out",
            "c.csv",
        ],
    );
    let text = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert!(text.contains("# factor_origin = computed"));
    let out = bounds(dir.path(), "c.csv");
    assert!(!out.is_empty() && out.len() < 10);
    assert!(out.iter().all(|&(m, _)| (3.2e-6..=24.3e-6).contains(&m)));
    let base = bounds(dir.path(), "base.csv");
    for (m, b) in out {
        let original = base.iter().find(|p| p.0 == m).unwrap().1;
        let ratio = original / b;
        assert!((ratio / 0.5f64.exp() - 1.0).abs() < 0.005, "ratio {ratio}");
    }
}

#[test]
fn constrain_literal_and_unclipped() {
    let dir = TempDir::new().unwrap();
    write_baseline(dir.path());
    ok(
        dir.path(),
        &[
            "constrain",
            "--baseline",
            "base.csv",
            "--factor",
            "2",
            "--no-clip",
            "--out",
            "c.csv",
        ],
    );
    let base = bounds(dir.path(), "base.csv");
    let out = bounds(dir.path(), "c.csv");
    assert_eq!(out.len(), base.len());
    for (o, b) in out.iter().zip(&base) {
        assert_eq!(o.0, b.0);
        assert_eq!(o.1, b.1 / 2.0);
    }
    let m = manifest(dir.path(), "c.csv");
    assert_eq!(m["inputs"][0], "base.csv");
    assert_eq!(m["options"]["factor_origin"], "literal");
}

#[test]
fn info_reports_calibration() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["info"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("formula reading"));
    assert!(text.contains("doubled reading"));
    assert!(text.contains("11.78"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let code = |args: &[&str]| zenoamp(dir.path(), args).status.code().unwrap();

    assert_eq!(code(&["simulate", "--frobnicate"]), 2);
    let out = zenoamp(dir.path(), &["simulate", "--bac", "10", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`10`"));
    assert!(!dir.path().join("x.csv").exists());
    assert_eq!(code(&["optimal", "--T", "-5"]), 2);
    assert_eq!(code(&["sweep", "--axis1", "T: 10, 5, 20"]), 2);

    let out = zenoamp(
        dir.path(),
        &["simulate", "--bac", "1T", "--dt", "10", "--T", "100"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("after t ="));

    assert_eq!(code(&["constrain", "--baseline", "missing.csv"]), 4);
    assert_eq!(
        code(&["optimal", "--T", "10", "--out", "no/such/dir/o.csv"]),
        4
    );
}

#[test]
fn analytic_trace_tracks_numeric_in_weak_field() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &[FIG1, &["--out", "n.csv"]].concat());
    ok(
        dir.path(),
        &[FIG1, &["--engine", "analytic", "--out", "a.csv"]].concat(),
    );
    let num = data_rows(&fs::read_to_string(dir.path().join("n.csv")).unwrap());
    let ana = data_rows(&fs::read_to_string(dir.path().join("a.csv")).unwrap());
    assert_eq!(num.len(), ana.len());
    let peak = num.iter().map(|r| r[4]).fold(0.0, f64::max);
    for (n, a) in num.iter().zip(&ana) {
        assert_eq!(n[0], a[0]);
        assert!((n[4] - a[4]).abs() < 1e-3 * peak, "t = {}", n[0]);
    }
    assert_eq!(
        manifest(dir.path(), "a.csv")["options"]["engine"],
        "analytic"
    );

    let out = zenoamp(
        dir.path(),
        &[
            "simulate", "--engine", "analytic", "--T1", "100", "--T2", "50",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

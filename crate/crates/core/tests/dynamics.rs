use std::f64::consts::PI;

use proptest::prelude::*;
use zenoamp::bloch::{propagate, RotatingSystem};
use zenoamp::linear::{p_perp_analytic, rotating_frame_solution, LinearResponseParams};
use zenoamp::units::DEFAULT_B0_T;
use zenoamp::{
    integrate, to_lab_frame, BlochState, DriveConfig, Frame, IntegratorConfig, NoiseModel,
    RelaxationSpec, SpinSpecies, Trace,
};

fn xe() -> SpinSpecies {
    SpinSpecies::xe129()
}

fn run(
    frame: Frame,
    b_ac: f64,
    delta: f64,
    relax: RelaxationSpec,
    dt: f64,
    t_max: f64,
    stride: usize,
) -> Trace {
    let drive = DriveConfig::with_detuning(&xe(), DEFAULT_B0_T, b_ac, delta).unwrap();
    let cfg = IntegratorConfig::new(dt, t_max, stride).unwrap();
    integrate(
        &BlochState::longitudinal(1.0),
        frame,
        &drive,
        &relax,
        &xe(),
        &cfg,
    )
    .unwrap()
}

/// Final state of the rotating system at t_max for step `dt`.
fn endpoint(system: &RotatingSystem, dt: f64, t_max: f64) -> BlochState {
    let cfg = IntegratorConfig::new(dt, t_max, 1).unwrap();
    let mut last = BlochState::longitudinal(1.0);
    propagate(
        system,
        &BlochState::longitudinal(1.0),
        &cfg,
        |_, is_last, s| {
            if is_last {
                last = *s;
            }
        },
    )
    .unwrap();
    last
}

#[test]
fn rwa_lab_and_rotating_envelopes_agree() {
    // ν₀ = 11.78 Hz against γB_ac/2π ≈ 1.2e-4 Hz: a ratio near 10⁵.
    for (model, delta) in [(NoiseModel::Gaussian, 0.0), (NoiseModel::Markovian, 0.05)] {
        let relax = RelaxationSpec::equal_times(model, 20.0).unwrap();
        let rot = run(Frame::Rotating, 10e-12, delta, relax, 1e-3, 60.0, 100);
        let lab = run(Frame::Lab, 10e-12, delta, relax, 1e-3, 60.0, 100);
        assert_eq!(rot.samples.len(), lab.samples.len());
        let peak = rot.p_perp().fold(0.0, f64::max);
        assert!(peak > 0.0);
        let worst = rot
            .p_perp()
            .zip(lab.p_perp())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.01 * peak, "{model}: {worst:e} vs peak {peak:e}");
    }
}

#[test]
fn richardson_order_is_four() {
    // Strong drive and short T so the truncation error dominates round-off.
    for model in [NoiseModel::Gaussian, NoiseModel::Markovian] {
        let relax = RelaxationSpec::equal_times(model, 50.0).unwrap();
        let system = RotatingSystem {
            half_rabi: 0.05,
            delta: 0.03,
            relax,
        };
        let t_max = 100.0;
        let [a, b, c] = [2.0, 1.0, 0.5].map(|dt| endpoint(&system, dt, t_max).vector());
        let order = ((a - b).norm() / (b - c).norm()).log2();
        assert!(order >= 3.5, "{model}: observed order {order}");
    }
}

#[test]
fn detuning_parity() {
    let relax = RelaxationSpec::equal_times(NoiseModel::Gaussian, 380.0).unwrap();
    let delta = 2.0 * PI * 2.5e-3;
    let plus = run(Frame::Rotating, 100e-12, delta, relax, 0.01, 1140.0, 50);
    let minus = run(Frame::Rotating, 100e-12, -delta, relax, 0.01, 1140.0, 50);
    for (p, m) in plus.samples.iter().zip(&minus.samples) {
        assert_eq!(p.t, m.t);
        assert!((p.px - m.px).abs() < 1e-10);
        assert!((p.py + m.py).abs() < 1e-10);
        assert!((p.pz - m.pz).abs() < 1e-10);
    }
}

#[test]
fn frame_change_preserves_p_perp() {
    let relax = RelaxationSpec::equal_times(NoiseModel::Markovian, 100.0).unwrap();
    let rot = run(Frame::Rotating, 400e-12, 0.01, relax, 0.01, 300.0, 10);
    let lab = to_lab_frame(&rot, 11.78).unwrap();
    for (r, l) in rot.samples.iter().zip(&lab.samples) {
        assert!((r.p_perp() - l.p_perp()).abs() <= 4.0 * f64::EPSILON * r.p_perp().max(1e-300));
        assert_eq!(r.pz, l.pz);
    }
}

/// Independent RK4 of the linearized system (P̃z frozen at P₀e^(−∫r)).
fn linearized_rk4(p: &LinearResponseParams, t_end: f64, dt: f64) -> [f64; 3] {
    let a = p.p0 * p.gamma * p.b_ac / 2.0;
    let rate = |t: f64| match p.model {
        NoiseModel::Markovian => 1.0 / p.t_relax,
        NoiseModel::Gaussian => t / (p.t_relax * p.t_relax),
    };
    let env = |t: f64| match p.model {
        NoiseModel::Markovian => (-t / p.t_relax).exp(),
        NoiseModel::Gaussian => (-t * t / (2.0 * p.t_relax * p.t_relax)).exp(),
    };
    let f = |t: f64, y: [f64; 2]| {
        let r = rate(t);
        [
            a * env(t) + p.delta * y[1] - r * y[0],
            -p.delta * y[0] - r * y[1],
        ]
    };
    let n = (t_end / dt).round() as usize;
    let mut y = [0.0; 2];
    for k in 0..n {
        let t = k as f64 * dt;
        let k1 = f(t, y);
        let k2 = f(
            t + dt / 2.0,
            [y[0] + dt / 2.0 * k1[0], y[1] + dt / 2.0 * k1[1]],
        );
        let k3 = f(
            t + dt / 2.0,
            [y[0] + dt / 2.0 * k2[0], y[1] + dt / 2.0 * k2[1]],
        );
        let k4 = f(t + dt, [y[0] + dt * k3[0], y[1] + dt * k3[1]]);
        for i in 0..2 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    [y[0], y[1], p.p0 * env(t_end)]
}

#[test]
fn closed_form_matches_linearized_integration() {
    let gamma = xe().gamma;
    for model in [NoiseModel::Gaussian, NoiseModel::Markovian] {
        for delta in [0.0, 2.0 * PI * 2.5e-3, -0.04] {
            let p = LinearResponseParams::new(1.0, gamma, 10e-12, delta, 380.0, model).unwrap();
            let scale = p_perp_analytic(&p, 380.0);
            for t in [50.0, 380.0, 900.0] {
                let oracle = linearized_rk4(&p, t, 0.01);
                let closed = rotating_frame_solution(&p, t);
                for i in 0..2 {
                    assert!(
                        (closed[i] - oracle[i]).abs() <= 1e-6 * scale,
                        "{model} Δ={delta} t={t} component {i}: {} vs {}",
                        closed[i],
                        oracle[i]
                    );
                }
                assert!((closed[2] - oracle[2]).abs() < 1e-15);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn norm_follows_envelope(
        b_ac in 0.0..1e-9f64,
        delta in -0.1..0.1f64,
        t_relax in 20.0..400.0f64,
        gaussian in any::<bool>(),
    ) {
        let model = if gaussian { NoiseModel::Gaussian } else { NoiseModel::Markovian };
        let relax = RelaxationSpec::equal_times(model, t_relax).unwrap();
        let trace = run(Frame::Rotating, b_ac, delta, relax, 0.01, 3.0 * t_relax, 37);
        for s in &trace.samples {
            let env = model.envelope(s.t, t_relax);
            prop_assert!((s.norm() - env).abs() <= 1e-6 * env, "t={} {} vs {}", s.t, s.norm(), env);
        }
    }
}

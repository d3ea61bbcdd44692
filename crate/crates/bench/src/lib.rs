//! Fixtures shared by the benchmarks.

use zenoamp::sweep::{Axis, AxisName, Engine, Observable, Spacing};
use zenoamp::{DriveConfig, NoiseModel, ParamSet, RelaxationSpec, SpinSpecies, SweepSpec};

/// Default operating point: 10 pT drive, 2.5 mHz offset, T = 380 s.
pub fn default_point(model: NoiseModel) -> (DriveConfig, RelaxationSpec, SpinSpecies) {
    let p = ParamSet {
        noise: model,
        ..ParamSet::default()
    };
    (p.drive().unwrap(), p.relaxation().unwrap(), p.species)
}

/// `n`×`n` (Δ, T) sweep of P⊥ optima over both models.
pub fn small_sweep(n: usize) -> SweepSpec {
    SweepSpec {
        axis1: Axis::range(AxisName::Delta, 0.0, 0.03, n, Spacing::Linear),
        axis2: Some(Axis::range(
            AxisName::Relaxation,
            20.0,
            200.0,
            n,
            Spacing::Log,
        )),
        fixed: ParamSet::default(),
        observable: Observable::PPerpOpt,
        models: vec![NoiseModel::Gaussian, NoiseModel::Markovian],
        engine: Engine::Numeric,
    }
}

//! Fixtures shared by the engine benchmarks.

use tdc_core::mcwf::FockConfig;
use tdc_core::{Complex64, EnsembleConfig, SteadyStateSolution, SystemParams};

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Reference system above threshold.
pub fn reference_params() -> SystemParams {
    SystemParams::real(0.001, 1.0, 2.0, 200.0).expect("valid reference parameters")
}

/// Small system used for the wave-function comparison.
pub fn small_params() -> SystemParams {
    SystemParams::real(0.025, 0.6, 1.5, 4.5).expect("valid small-system parameters")
}

pub fn ensemble(n_traj: u64, t_final: f64) -> EnsembleConfig {
    EnsembleConfig {
        n_traj,
        t_final,
        dt: 1e-3,
        sample_stride: 1000,
        master_seed: 1,
        divergence_bound: None,
    }
}

pub fn fock(n_traj: u64) -> FockConfig {
    FockConfig {
        n_traj,
        master_seed: 1,
        ..FockConfig::default()
    }
}

pub fn upper_branch(params: &SystemParams) -> SteadyStateSolution {
    tdc_core::model::steady_state_branches(params)
        .expect("branches")
        .into_iter()
        .find(|s| s.branch == tdc_core::Branch::Upper && s.phase_index == 0)
        .expect("upper branch above threshold")
}

//! Built-in experiment scenarios. The two benchmark presets carry the
//! published tuning constants verbatim, including the deliberately enormous
//! normalization gain k1 and activation threshold rho: the mixing stage
//! rescales Gram determinants of order 1e-35 into the unit interval, so the
//! averaged regressor lives at the matching magnitude.

use alq_core::adapt::AdaptGains;
use alq_core::drem::PipelineParams;
use alq_core::lq::{CostWeights, PlantModel};
use alq_core::mat::Mat;
use alq_core::sim::{ReferenceSignal, Scenario};

/// Two-state benchmark: oscillatory plant, decaying exponential reference.
pub fn scenario_sec4_1() -> Scenario {
    let plant = PlantModel::new(
        Mat::from_rows(&[&[0.0, 1.0], &[-1.0, -1.0]]).unwrap(),
        Mat::col(&[0.0, 1.0]),
        Mat::col(&[1.0, 0.0]),
        vec![-1.0, 1.0],
    )
    .unwrap();
    Scenario {
        plant,
        vartheta: 1.0,
        weights: CostWeights::new(Mat::identity(3), Mat::identity(1)).unwrap(),
        pipeline: PipelineParams {
            l: 2.5,
            k0: 10.0,
            k1: 1.8e35,
            sigma: 5.0 / 7.0,
            p: 35,
            tau_inf: 7.0,
            t_start: 0.0,
            pair_rescale: 1.0,
        },
        gains: AdaptGains { gamma0: 1.0, gamma1: 10.0, rho: 1e35 },
        theta_hat0: Mat::col(&[0.1, 0.1, 0.1, 0.1]),
        x0: vec![-1.0, 1.0, 0.0],
        reference: ReferenceSignal::Exponential { amplitude: 1.0, rate: 7.0 },
        duration: 10.0,
        dt: 1e-4,
        reset_on_reference_change: false,
    }
}

/// Three-state benchmark with spread Hamiltonian eigenvalues: large
/// integral-error weight, short design horizon, high Taylor degree.
pub fn scenario_sec4_2() -> Scenario {
    let plant = PlantModel::new(
        Mat::from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 4.438], &[0.0, -12.0, -24.0]]).unwrap(),
        Mat::col(&[0.0, 0.0, 20.0]),
        Mat::col(&[1.0, 0.0, 0.0]),
        vec![0.0, 0.0, 0.0],
    )
    .unwrap();
    Scenario {
        plant,
        vartheta: 100.0,
        weights: CostWeights::new(Mat::identity(4), Mat::identity(1)).unwrap(),
        pipeline: PipelineParams {
            l: 10.0,
            k0: 10.0,
            k1: 1.8e35,
            sigma: 5.0 / 7.0,
            p: 85,
            tau_inf: 1.0,
            t_start: 0.0,
            pair_rescale: 1.0,
        },
        gains: AdaptGains { gamma0: 1.0, gamma1: 1.0, rho: 1e35 },
        theta_hat0: Mat::col(&[0.0, 0.0, 0.0, 0.0, 10.0]),
        x0: vec![0.0; 4],
        reference: ReferenceSignal::Constant(1.0),
        duration: 10.0,
        dt: 1e-4,
        reset_on_reference_change: false,
    }
}

/// All named presets.
pub fn preset_scenarios() -> Vec<(&'static str, Scenario)> {
    vec![("sec4_1", scenario_sec4_1()), ("sec4_2", scenario_sec4_2())]
}

pub fn preset_by_name(name: &str) -> Option<Scenario> {
    preset_scenarios()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_constants() {
        let s1 = scenario_sec4_1();
        assert_eq!(s1.pipeline.p, 35);
        assert_eq!(s1.pipeline.tau_inf, 7.0);
        assert_eq!(s1.gains.gamma1, 10.0);
        let s2 = scenario_sec4_2();
        assert_eq!(s2.pipeline.tau_inf, 1.0);
        assert_eq!(s2.pipeline.p, 85);
        assert_eq!(s2.theta_hat0[(4, 0)], 10.0);
        for (_, s) in preset_scenarios() {
            s.validate().unwrap();
        }
    }
}

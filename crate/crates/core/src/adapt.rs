//! The gain-scheduled adaptive law driving the controller parameters from
//! the averaged regression (Ω, Υ), the certainty-equivalence control output,
//! and evaluation-only error metrics.

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Adjustable controller parameters, θ̂ᵀ = [K̂_x K̂_r].
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerState {
    /// (n+m) x m
    pub theta_hat: Mat,
}

/// Adaptation gains: γ0 scales the state-dependent rate, γ1 sets the floor,
/// ρ is the dead-zone threshold on Ω below which nothing moves.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptGains {
    pub gamma0: f64,
    pub gamma1: f64,
    pub rho: f64,
}

impl AdaptGains {
    pub fn validate(&self) -> Result<()> {
        if self.gamma0 < 1.0 || !self.gamma0.is_finite() {
            return Err(Error::Parameter {
                op: "AdaptGains",
                details: format!("gamma0 must be at least 1, got {}", self.gamma0),
            });
        }
        if self.gamma1 < 0.0 || !self.gamma1.is_finite() {
            return Err(Error::Parameter {
                op: "AdaptGains",
                details: format!("gamma1 must be nonnegative, got {}", self.gamma1),
            });
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::Parameter {
                op: "AdaptGains",
                details: format!("rho must be positive, got {}", self.rho),
            });
        }
        Ok(())
    }
}

/// The scheduled gain: zero inside the dead zone Ω ≤ ρ, otherwise
/// (γ0·λ_max(ωωᵀ) + γ1)/Ω². For the rank-one outer product the largest
/// eigenvalue is exactly ‖ω‖², so no eigensolver runs here.
///
/// Staged division keeps the value representable a little longer, but for
/// very large Ω the quotient underflows f64 entirely; the simulator uses
/// [`theta_update_scheduled`], which cancels Ω² algebraically instead.
pub fn gain_schedule(omega_acc: f64, omega_vec: &[f64], g: &AdaptGains) -> f64 {
    if omega_acc <= g.rho {
        return 0.0;
    }
    let omega_sq: f64 = omega_vec.iter().map(|x| x * x).sum();
    ((g.gamma0 * omega_sq + g.gamma1) / omega_acc) / omega_acc
}

/// One Euler step of θ̂' = -γ·Ω·(Ω·θ̂ - Υ). A zero gain leaves the
/// parameters bit-identical.
pub fn theta_update(
    cs: &ControllerState,
    gamma: f64,
    omega_acc: f64,
    upsilon_acc: &Mat,
    dt: f64,
) -> Result<ControllerState> {
    if dt <= 0.0 {
        return Err(Error::Step { dt });
    }
    if gamma == 0.0 {
        return Ok(cs.clone());
    }
    let resid = cs.theta_hat.scale(omega_acc).sub(upsilon_acc);
    let next = cs.theta_hat.sub(&resid.scale(dt * gamma * omega_acc));
    if !next.all_finite() {
        return Err(Error::NonFinite { op: "theta_update", index: 0 });
    }
    Ok(ControllerState { theta_hat: next })
}

/// Dead-zone check plus update in one step, with γ·Ω² reduced algebraically:
/// θ̂' = -(γ0‖ω‖² + γ1)·(θ̂ - Υ/Ω) whenever Ω > ρ. Identical in exact
/// arithmetic to [`gain_schedule`] + [`theta_update`], but immune to Ω²
/// overflowing f64 — the experiments push Ω far past 1e150.
pub fn theta_update_scheduled(
    cs: &ControllerState,
    g: &AdaptGains,
    omega_vec: &[f64],
    omega_acc: f64,
    upsilon_acc: &Mat,
    dt: f64,
) -> Result<(ControllerState, bool)> {
    if dt <= 0.0 {
        return Err(Error::Step { dt });
    }
    if omega_acc <= g.rho {
        return Ok((cs.clone(), false));
    }
    let omega_sq: f64 = omega_vec.iter().map(|x| x * x).sum();
    let kappa = g.gamma0 * omega_sq + g.gamma1;
    let target = upsilon_acc.scale(1.0 / omega_acc);
    let next = cs
        .theta_hat
        .sub(&cs.theta_hat.sub(&target).scale(dt * kappa));
    if !next.all_finite() {
        return Err(Error::NonFinite { op: "theta_update", index: 0 });
    }
    Ok((ControllerState { theta_hat: next }, true))
}

/// u = θ̂ᵀ·[x; r].
pub fn control_output(cs: &ControllerState, x: &[f64], r: &[f64]) -> Vec<f64> {
    let nm = cs.theta_hat.rows();
    debug_assert_eq!(x.len() + r.len(), nm);
    let m = cs.theta_hat.cols();
    let mut u = vec![0.0; m];
    for j in 0..m {
        let mut acc = 0.0;
        for (i, xi) in x.iter().enumerate() {
            acc += cs.theta_hat[(i, j)] * xi;
        }
        for (k, rk) in r.iter().enumerate() {
            acc += cs.theta_hat[(x.len() + k, j)] * rk;
        }
        u[j] = acc;
    }
    u
}

/// Evaluation-only metrics: ‖θ̂ - θ‖_F, ‖x - x_ref‖, and the stacked
/// error norm ‖ξ‖ = sqrt(‖e_ref‖² + ‖θ̃‖_F²).
pub fn error_metrics(
    cs: &ControllerState,
    theta_true: &Mat,
    x: &[f64],
    x_ref: &[f64],
) -> (f64, f64, f64) {
    let theta_err = cs.theta_hat.sub(theta_true).frobenius();
    let eref: f64 = x
        .iter()
        .zip(x_ref)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let xi = (theta_err * theta_err + eref * eref).sqrt();
    (theta_err, eref, xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains() -> AdaptGains {
        AdaptGains { gamma0: 1.0, gamma1: 0.0, rho: 1.0 }
    }

    #[test]
    fn dead_zone_returns_zero_gain() {
        let g = gains();
        assert_eq!(gain_schedule(0.5, &[1.0, 1.0], &g), 0.0);
        assert_eq!(gain_schedule(1.0, &[1.0, 1.0], &g), 0.0);
    }

    #[test]
    fn gain_formula_midrange() {
        // Ω = 2, ω = (1,1), γ0 = 1, γ1 = 0 -> (1·2)/4 = 0.5
        let g = gains();
        assert!((gain_schedule(2.0, &[1.0, 1.0], &g) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_gain_freezes_parameters_bitwise() {
        let cs = ControllerState { theta_hat: Mat::col(&[0.1, -0.2, 0.3]) };
        let next = theta_update(&cs, 0.0, 5.0, &Mat::col(&[1.0, 1.0, 1.0]), 1e-3).unwrap();
        assert_eq!(next.theta_hat.data(), cs.theta_hat.data());
    }

    #[test]
    fn scalar_sandbox_matches_exponential_decay() {
        // Ω = 1, Υ = θ (zero disturbance), constant γ:
        // θ̃(t) = e^{-γ t} θ̃(0) up to Euler error
        let theta = Mat::col(&[2.0]);
        let mut cs = ControllerState { theta_hat: Mat::col(&[5.0]) };
        let gamma = 3.0;
        let dt = 1e-5;
        let steps = 100_000; // t = 1
        for _ in 0..steps {
            cs = theta_update(&cs, gamma, 1.0, &theta, dt).unwrap();
        }
        let expected = 2.0 + 3.0 * (-gamma * 1.0f64).exp();
        assert!((cs.theta_hat[(0, 0)] - expected).abs() < 1e-3);
    }

    #[test]
    fn scheduled_update_matches_plain_form() {
        let g = AdaptGains { gamma0: 1.0, gamma1: 2.0, rho: 0.5 };
        let cs = ControllerState { theta_hat: Mat::col(&[0.3, -0.4]) };
        let omega_vec = [0.7, -0.2];
        let omega = 3.0;
        let ups = Mat::col(&[0.9, 1.2]);
        let dt = 1e-3;
        let gamma = gain_schedule(omega, &omega_vec, &g);
        let a = theta_update(&cs, gamma, omega, &ups, dt).unwrap();
        let (b, active) = theta_update_scheduled(&cs, &g, &omega_vec, omega, &ups, dt).unwrap();
        assert!(active);
        assert!(a.theta_hat.sub(&b.theta_hat).max_abs() < 1e-15);
    }

    #[test]
    fn scheduled_update_survives_huge_omega() {
        let g = AdaptGains { gamma0: 1.0, gamma1: 1.0, rho: 1e35 };
        let cs = ControllerState { theta_hat: Mat::col(&[1.0]) };
        let omega = 1e200; // Ω² would overflow; γ underflows to zero
        assert_eq!(gain_schedule(omega, &[1.0], &g), 0.0);
        let ups = Mat::col(&[2.0 * omega]);
        let (next, active) =
            theta_update_scheduled(&cs, &g, &[1.0], omega, &ups, 1e-4).unwrap();
        assert!(active);
        // target is Υ/Ω = 2, so θ̂ moves toward it
        assert!(next.theta_hat[(0, 0)] > 1.0);
    }

    #[test]
    fn control_output_cases() {
        let cs = ControllerState { theta_hat: Mat::zeros(4, 1) };
        assert_eq!(control_output(&cs, &[1.0, 2.0, 3.0], &[4.0]), vec![0.0]);
        let cs = ControllerState { theta_hat: Mat::col(&[0.1, 0.1, 0.1, 0.1]) };
        let u = control_output(&cs, &[-1.0, 1.0, 0.0], &[1.0]);
        assert!((u[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn metrics_vanish_at_truth() {
        let theta = Mat::col(&[1.0, 2.0]);
        let cs = ControllerState { theta_hat: theta.clone() };
        let (te, ee, xi) = error_metrics(&cs, &theta, &[0.5, 0.5], &[0.5, 0.5]);
        assert_eq!((te, ee, xi), (0.0, 0.0, 0.0));
    }

    #[test]
    fn xi_is_pythagorean() {
        let theta = Mat::col(&[0.0, 0.0]);
        let cs = ControllerState { theta_hat: Mat::col(&[3.0, 0.0]) };
        let (te, ee, xi) = error_metrics(&cs, &theta, &[4.0], &[0.0]);
        assert!((xi * xi - (te * te + ee * ee)).abs() < 1e-12);
        assert!((xi - 5.0).abs() < 1e-12);
    }

    #[test]
    fn frozen_regressor_gives_exponential_envelope() {
        // Ω frozen above the dead zone, Υ = Ω·θ, ω = 0: decay rate is γ1
        let g = AdaptGains { gamma0: 1.0, gamma1: 4.0, rho: 0.5 };
        let theta = Mat::col(&[1.0, -2.0]);
        let omega = 3.0;
        let ups = theta.scale(omega);
        let mut cs = ControllerState { theta_hat: Mat::col(&[2.0, 1.0]) };
        let err0 = cs.theta_hat.sub(&theta).frobenius();
        let dt = 1e-4;
        let horizon = 1.0;
        for _ in 0..(horizon / dt) as usize {
            let (next, active) =
                theta_update_scheduled(&cs, &g, &[0.0, 0.0], omega, &ups, dt).unwrap();
            assert!(active);
            cs = next;
        }
        let err1 = cs.theta_hat.sub(&theta).frobenius();
        let eta = -(err1 / err0).ln() / horizon;
        assert!(eta >= 0.9 * g.gamma1, "measured rate {eta} below 0.9*gamma1");
    }

    #[test]
    fn gains_validation() {
        assert!(AdaptGains { gamma0: 0.5, gamma1: 0.0, rho: 1.0 }.validate().is_err());
        assert!(AdaptGains { gamma0: 1.0, gamma1: -0.1, rho: 1.0 }.validate().is_err());
        assert!(AdaptGains { gamma0: 1.0, gamma1: 0.0, rho: 0.0 }.validate().is_err());
        assert!(AdaptGains { gamma0: 2.0, gamma1: 5.0, rho: 1e35 }.validate().is_ok());
    }
}

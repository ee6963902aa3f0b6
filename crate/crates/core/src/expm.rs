//! Matrix exponentials: the truncated Taylor form the regression pipeline
//! mirrors, an independent scaling-and-squaring oracle, and the analytic
//! bound on the truncation error.

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Truncated Taylor polynomial of e^{d·tau}: sum of (d·tau)^k / k! for
/// k = 0..=p. Terms are accumulated multiplicatively, never through an
/// explicit factorial.
pub fn mat_exp_taylor(d: &Mat, tau: f64, p: usize) -> Result<Mat> {
    if !d.is_square() {
        return Err(Error::Dimension {
            op: "mat_exp_taylor",
            details: format!("{}x{}", d.rows(), d.cols()),
        });
    }
    let n = d.rows();
    let m = d.scale(tau);
    let mut term = Mat::identity(n);
    let mut sum = Mat::identity(n);
    for k in 1..=p {
        term = term.matmul(&m).scale(1.0 / k as f64);
        if !term.all_finite() {
            return Err(Error::NonFinite { op: "mat_exp_taylor", index: k });
        }
        sum = sum.add(&term);
    }
    Ok(sum)
}

/// Independent e^{d·tau} by scaling and squaring: scale until the norm is
/// at most 0.5, take a degree-30 Taylor polynomial, square back up.
pub fn mat_exp_oracle(d: &Mat, tau: f64) -> Result<Mat> {
    if !d.is_square() {
        return Err(Error::Dimension {
            op: "mat_exp_oracle",
            details: format!("{}x{}", d.rows(), d.cols()),
        });
    }
    let norm = d.frobenius() * tau.abs();
    let s = if norm <= 0.5 {
        0
    } else {
        (norm / 0.5).log2().ceil() as u32
    };
    let mut phi = mat_exp_taylor(d, tau / f64::powi(2.0, s as i32), 30)?;
    for k in 0..s {
        phi = phi.matmul(&phi);
        if !phi.all_finite() {
            return Err(Error::NonFinite { op: "mat_exp_oracle", index: k as usize });
        }
    }
    Ok(phi)
}

/// Upper bound on the norm of the Taylor truncation error:
/// (tau^p ||d||^p / (p+1)!) (e^{||d|| tau} - 1), evaluated in log space so
/// the factorial and the exponential cannot overflow on the way.
///
/// The norm is Frobenius, matching the norm used when the error itself is
/// measured; any submultiplicative norm satisfies the bound.
pub fn taylor_remainder_bound(d: &Mat, tau: f64, p: usize) -> f64 {
    let nd = d.frobenius();
    let x = nd * tau;
    if x == 0.0 {
        return 0.0;
    }
    // ln[(e^x - 1)]: expm1 is fine below ~700, above that e^x - 1 ≈ e^x
    let ln_tail = if x < 700.0 { x.exp_m1().ln() } else { x };
    let mut ln_fact = 0.0; // ln((p+1)!)
    for k in 2..=(p + 1) {
        ln_fact += (k as f64).ln();
    }
    let ln_bound = (p as f64) * x.ln() - ln_fact + ln_tail;
    ln_bound.exp()
}

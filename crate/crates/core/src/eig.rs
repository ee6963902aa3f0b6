//! Eigenvalues of real square matrices: Householder reduction to upper
//! Hessenberg form followed by the shifted double-step QR iteration, after
//! the Algol procedures orthes/hqr2 (Martin & Wilkinson) by way of the
//! public-domain Jama translation. Only eigenvalues are produced; the
//! Schur vectors are never accumulated.

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Eigenvalues as (re, im) pairs. Complex eigenvalues of real matrices come
/// in conjugate pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<(f64, f64)>,
}

impl Spectrum {
    /// Sorted by descending real part, then descending imaginary part, so
    /// reports are stable across runs.
    pub fn sorted(mut self) -> Spectrum {
        self.eigenvalues.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(b.1.partial_cmp(&a.1).unwrap())
        });
        self
    }

    /// True if some eigenvalue lies within `tol` (complex distance) of the
    /// target, consuming multiplicity.
    pub fn matches_all(&self, targets: &[(f64, f64)], tol: f64) -> bool {
        let mut pool = self.eigenvalues.clone();
        for &(re, im) in targets {
            let found = pool
                .iter()
                .enumerate()
                .filter(|(_, &(r, i))| ((r - re).powi(2) + (i - im).powi(2)).sqrt() <= tol)
                .map(|(idx, _)| idx)
                .next();
            match found {
                Some(idx) => {
                    pool.swap_remove(idx);
                }
                None => return false,
            }
        }
        true
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&(re, _)| re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// All eigenvalues of a square matrix.
pub fn eigenvalues(m: &Mat) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(Error::Dimension {
            op: "eigenvalues",
            details: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    let n = m.rows();
    if n == 1 {
        return Ok(Spectrum { eigenvalues: vec![(m[(0, 0)], 0.0)] });
    }
    let mut h = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = m[(i, j)];
        }
    }
    orthes(&mut h, n);
    let spec = hqr_eigenvalues(&mut h, n)?;
    Ok(spec.sorted())
}

fn orthes(h: &mut [f64], n: usize) {
    let at = |i: usize, j: usize| i * n + j;
    let high = n - 1;
    let mut ort = vec![0.0f64; n];
    for m in 1..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[at(i, m - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[at(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[at(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[at(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[at(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[at(i, j)] -= f * ort[j];
            }
        }
        h[at(m, m - 1)] = scale * g;
        for i in m + 1..=high {
            h[at(i, m - 1)] = 0.0;
        }
    }
}

#[allow(unused_assignments)]
fn hqr_eigenvalues(h: &mut [f64], nn: usize) -> Result<Spectrum> {
    let at = |i: usize, j: usize| i * nn + j;
    let mut d = vec![0.0f64; nn];
    let mut e = vec![0.0f64; nn];

    let mut n = nn as isize - 1;
    let low = 0isize;
    let eps = 2f64.powi(-52);
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut w, mut x, mut y): (f64, f64, f64);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[at(i, j)].abs();
        }
    }

    let mut iter = 0usize;
    let mut total = 0usize;
    let budget = 100 * nn.max(4);

    while n >= low {
        let ni = n as usize;
        let mut l = n;
        while l > low {
            let li = l as usize;
            s = h[at(li - 1, li - 1)].abs() + h[at(li, li)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[at(li, li - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // one real root
            d[ni] = h[at(ni, ni)] + exshift;
            e[ni] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // a 2x2 block: real or complex pair
            w = h[at(ni, ni - 1)] * h[at(ni - 1, ni)];
            p = (h[at(ni - 1, ni - 1)] - h[at(ni, ni)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            let xx = h[at(ni, ni)] + exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[ni - 1] = xx + z;
                d[ni] = if z != 0.0 { xx - w / z } else { d[ni - 1] };
                e[ni - 1] = 0.0;
                e[ni] = 0.0;
            } else {
                d[ni - 1] = xx + p;
                d[ni] = xx + p;
                e[ni - 1] = z;
                e[ni] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // continue the iteration: form shift
            x = h[at(ni, ni)];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h[at(ni - 1, ni - 1)];
                w = h[at(ni, ni - 1)] * h[at(ni - 1, ni)];
            }
            if iter == 10 {
                exshift += x;
                for i in low as usize..=ni {
                    h[at(i, i)] -= x;
                }
                s = h[at(ni, ni - 1)].abs() + h[at(ni - 1, ni - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low as usize..=ni {
                        h[at(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total += 1;
            if total > budget {
                return Err(Error::EigenConvergence { iters: budget });
            }

            // two consecutive small sub-diagonal elements
            let mut m = n - 2;
            while m >= l {
                let mi = m as usize;
                z = h[at(mi, mi)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[at(mi + 1, mi)] + h[at(mi, mi + 1)];
                q = h[at(mi + 1, mi + 1)] - z - r - s;
                r = h[at(mi + 2, mi + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[at(mi, mi - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (h[at(mi - 1, mi - 1)].abs()
                                + z.abs()
                                + h[at(mi + 1, mi + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            let mu = m as usize;
            for i in mu + 2..=ni {
                h[at(i, i - 2)] = 0.0;
                if i > mu + 2 {
                    h[at(i, i - 3)] = 0.0;
                }
            }

            // double QR step on rows l..=n
            for k in mu..=ni - 1 {
                let notlast = k != ni - 1;
                if k != mu {
                    p = h[at(k, k - 1)];
                    q = h[at(k + 1, k - 1)];
                    r = if notlast { h[at(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                } else {
                    x = 0.0;
                }

                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != mu {
                        h[at(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[at(k, k - 1)] = -h[at(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[at(k, j)] + q * h[at(k + 1, j)];
                        if notlast {
                            p += r * h[at(k + 2, j)];
                            h[at(k + 2, j)] -= p * z;
                        }
                        h[at(k, j)] -= p * x;
                        h[at(k + 1, j)] -= p * y;
                    }
                    for i in 0..=ni.min(k + 3) {
                        p = x * h[at(i, k)] + y * h[at(i, k + 1)];
                        if notlast {
                            p += z * h[at(i, k + 2)];
                            h[at(i, k + 2)] -= p * r;
                        }
                        h[at(i, k)] -= p;
                        h[at(i, k + 1)] -= p * q;
                    }
                }
            }
        }
    }

    Ok(Spectrum {
        eigenvalues: d.into_iter().zip(e).collect(),
    })
}

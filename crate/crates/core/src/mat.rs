//! Dense row-major f64 matrices with the small-matrix spectral tools the
//! regression pipeline needs: determinants, adjugates (valid for singular
//! inputs), Frobenius/spectral norms.
//!
//! Determinants and adjugates of 4x4-and-larger matrices go through the
//! double-double LU in [`crate::dd`]: the pipeline's cofactor sums cancel
//! far below the f64 noise floor, and the closed-loop experiments are
//! garbage without the extra headroom.

use crate::dd::{dd_lu, Dd, DdMat};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// Build a matrix from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Mat> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Dimension {
                op: "Mat::new",
                details: format!("{}x{} with {} entries", rows, cols, data.len()),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { op: "Mat::new", index: i });
        }
        Ok(Mat { rows, cols, data })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Mat {
        debug_assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Mat> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension {
                op: "Mat::from_rows",
                details: "ragged rows".into(),
            });
        }
        Mat::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Column vector.
    pub fn col(entries: &[f64]) -> Mat {
        Mat { rows: entries.len(), cols: 1, data: entries.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn add(&self, o: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "add: shape mismatch");
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect();
        Mat::from_raw(self.rows, self.cols, data)
    }

    pub fn sub(&self, o: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "sub: shape mismatch");
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect();
        Mat::from_raw(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat::from_raw(self.rows, self.cols, self.data.iter().map(|a| a * s).collect())
    }

    pub fn matmul(&self, o: &Mat) -> Mat {
        assert_eq!(self.cols, o.rows, "matmul: inner dimensions differ");
        let mut out = Mat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let row = &mut out.data[i * o.cols..(i + 1) * o.cols];
                let orow = &o.data[k * o.cols..(k + 1) * o.cols];
                for (oj, &b) in row.iter_mut().zip(orow) {
                    *oj += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec: length mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Copy `src` into this matrix with its top-left corner at (r0, c0).
    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Mat) {
        assert!(r0 + src.rows <= self.rows && c0 + src.cols <= self.cols);
        for i in 0..src.rows {
            for j in 0..src.cols {
                self[(r0 + i, c0 + j)] = src[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        let mut out = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Largest singular value via power iteration on mᵀm. The matrix is
    /// rescaled by its largest entry first so the squared Gram cannot
    /// overflow for any finite input.
    pub fn spectral(&self) -> f64 {
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        // the iteration squares twice (Gram, then its vector norm): rescale
        // early enough that peak^4 stays representable
        if peak > 1e70 || peak < 1e-70 {
            return self.scale(1.0 / peak).spectral() * peak;
        }
        let g = self.transpose().matmul(self);
        let n = g.rows;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * i as f64).collect();
        let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut lambda = 0.0f64;
        for _ in 0..2000 {
            let mut w = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    w[i] += g[(i, j)] * v[j];
                }
            }
            let nw = norm(&w);
            if nw == 0.0 {
                return 0.0;
            }
            let next: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            w.iter_mut().for_each(|x| *x /= nw);
            v = w;
            if (next - lambda).abs() <= 1e-10 * next.abs().max(1e-300) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.max(0.0).sqrt()
    }

    /// (spectral, Frobenius) pair.
    pub fn norms(&self) -> (f64, f64) {
        (self.spectral(), self.frobenius())
    }

    /// Determinant. Closed cofactor forms through 3x3, double-double LU above.
    pub fn det(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::Dimension {
                op: "det",
                details: format!("{}x{}", self.rows, self.cols),
            });
        }
        let d = &self.data;
        Ok(match self.rows {
            1 => d[0],
            2 => d[0] * d[3] - d[1] * d[2],
            3 => {
                d[0] * (d[4] * d[8] - d[5] * d[7]) - d[1] * (d[3] * d[8] - d[5] * d[6])
                    + d[2] * (d[3] * d[7] - d[4] * d[6])
            }
            n => {
                let dd = DdMat::from_f64_slice(n, n, d);
                match dd_lu(&dd) {
                    Some(lu) => lu.det().to_f64(),
                    None => 0.0,
                }
            }
        })
    }

    /// Adjugate (transposed cofactor matrix); satisfies adj(m)·m = det(m)·I
    /// including for singular m.
    pub fn adjugate(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::Dimension {
                op: "adjugate",
                details: format!("{}x{}", self.rows, self.cols),
            });
        }
        let n = self.rows;
        let d = &self.data;
        match n {
            1 => Ok(Mat::from_raw(1, 1, vec![1.0])),
            2 => Ok(Mat::from_raw(2, 2, vec![d[3], -d[1], -d[2], d[0]])),
            3 => {
                let c = |i: usize, j: usize| -> f64 {
                    let (r0, r1) = match i {
                        0 => (1, 2),
                        1 => (0, 2),
                        _ => (0, 1),
                    };
                    let (c0, c1) = match j {
                        0 => (1, 2),
                        1 => (0, 2),
                        _ => (0, 1),
                    };
                    let minor = d[r0 * 3 + c0] * d[r1 * 3 + c1] - d[r0 * 3 + c1] * d[r1 * 3 + c0];
                    if (i + j) % 2 == 0 {
                        minor
                    } else {
                        -minor
                    }
                };
                let mut out = Mat::zeros(3, 3);
                for i in 0..3 {
                    for j in 0..3 {
                        out[(j, i)] = c(i, j);
                    }
                }
                Ok(out)
            }
            _ => {
                let dd = DdMat::from_f64_slice(n, n, d);
                if let Some(lu) = dd_lu(&dd) {
                    // adj = det · inv, both from the same factorization
                    let det = lu.det();
                    let inv = lu.inverse();
                    let mut out = Mat::zeros(n, n);
                    for i in 0..n {
                        for j in 0..n {
                            out[(i, j)] = inv[(i, j)].mul(det).to_f64();
                        }
                    }
                    Ok(out)
                } else {
                    // exactly singular: evaluate cofactors from (n-1)-minors
                    Ok(adjugate_by_minors(&dd))
                }
            }
        }
    }
}

fn adjugate_by_minors(m: &DdMat) -> Mat {
    let n = m.rows;
    let mut out = Mat::zeros(n, n);
    let mut minor = DdMat::zeros(n - 1, n - 1);
    for i in 0..n {
        for j in 0..n {
            let mut r = 0;
            for ii in 0..n {
                if ii == i {
                    continue;
                }
                let mut c = 0;
                for jj in 0..n {
                    if jj == j {
                        continue;
                    }
                    minor[(r, c)] = m[(ii, jj)];
                    c += 1;
                }
                r += 1;
            }
            let det = match dd_lu(&minor) {
                Some(lu) => lu.det().to_f64(),
                None => 0.0,
            };
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            out[(j, i)] = sign * det;
        }
    }
    out
}

pub(crate) fn mat_to_dd(m: &Mat) -> DdMat {
    DdMat::from_f64_slice(m.rows(), m.cols(), m.data())
}

pub(crate) fn dd_to_mat(m: &DdMat) -> Mat {
    Mat::from_raw(m.rows, m.cols, m.data.iter().map(|a| a.to_f64()).collect())
}

/// Mixed product adj(a)·b evaluated in double-double before rounding: the
/// entries of adj(a)·b can sit thirty orders of magnitude below the entries
/// of either factor.
pub(crate) fn dd_det_and_adj_product(a: &Mat, b: &Mat) -> (f64, Mat) {
    let n = a.rows();
    let add = mat_to_dd(a);
    let bdd = mat_to_dd(b);
    match dd_lu(&add) {
        Some(lu) => {
            let det = lu.det();
            // adj(a)·b = det · a⁻¹ b, column by column
            let mut out = Mat::zeros(n, b.cols());
            let mut rhs = vec![Dd::ZERO; n];
            for j in 0..b.cols() {
                for i in 0..n {
                    rhs[i] = bdd[(i, j)];
                }
                let x = lu.solve(&rhs);
                for i in 0..n {
                    out[(i, j)] = x[i].mul(det).to_f64();
                }
            }
            (det.to_f64(), out)
        }
        None => {
            let adj = adjugate_by_minors(&add);
            let prod = mat_to_dd(&adj).matmul(&bdd);
            (0.0, dd_to_mat(&prod))
        }
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl std::fmt::Display for Mat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{:>13.6e}", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_identity_and_diagonal() {
        assert_eq!(Mat::identity(3).det().unwrap(), 1.0);
        let m = Mat::from_rows(&[&[2.0, 0.0], &[0.0, 3.0]]).unwrap();
        assert_eq!(m.det().unwrap(), 6.0);
    }

    #[test]
    fn det_rejects_non_square() {
        let m = Mat::zeros(2, 3);
        assert!(matches!(m.det(), Err(Error::Dimension { .. })));
    }

    #[test]
    fn adjugate_identity_and_2x2() {
        let a = Mat::identity(4).adjugate().unwrap();
        assert!(a.sub(&Mat::identity(4)).max_abs() < 1e-14);
        let m = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let adj = m.adjugate().unwrap();
        assert_eq!(adj.data(), &[4.0, -2.0, -3.0, 1.0]);
    }

    #[test]
    fn adjugate_of_singular_matrix() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        let adj = m.adjugate().unwrap();
        assert_eq!(adj.data(), &[4.0, -2.0, -2.0, 1.0]);
        assert!(adj.matmul(&m).max_abs() < 1e-15);
        // and a singular 4x4 through the minor fallback
        let s = Mat::from_rows(&[
            &[1.0, 2.0, 3.0, 4.0],
            &[2.0, 4.0, 6.0, 8.0],
            &[0.0, 1.0, 0.0, 1.0],
            &[1.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(s.det().unwrap(), 0.0);
        let adj4 = s.adjugate().unwrap();
        assert!(adj4.matmul(&s).max_abs() < 1e-12);
    }

    #[test]
    fn norms_identity_and_rank_one() {
        let (s, f) = Mat::identity(3).norms();
        assert!((s - 1.0).abs() < 1e-9);
        assert!((f - 3f64.sqrt()).abs() < 1e-12);

        let u = [1.0, -2.0, 0.5];
        let mut outer = Mat::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                outer[(i, j)] = u[i] * u[j];
            }
        }
        let norm_sq: f64 = u.iter().map(|x| x * x).sum();
        assert!((outer.spectral() - norm_sq).abs() < 1e-9 * norm_sq);
    }

    #[test]
    fn non_finite_entries_rejected() {
        assert!(matches!(
            Mat::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
    }
}

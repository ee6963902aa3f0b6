//! Double-double ("compensated") arithmetic: each value is an unevaluated
//! sum of two f64s, giving roughly 31 decimal digits.
//!
//! The regression pipeline forms determinants and adjugates whose cofactor
//! sums cancel by tens of orders of magnitude (the normalization gain k1 is
//! tuned around 1e35), and the closed-form Riccati solve inverts a matrix
//! block whose condition number can exceed 1e12. Plain f64 loses everything
//! in both places; double-double keeps the results meaningful without
//! pulling in an arbitrary-precision dependency.

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    // requires |a| >= |b| or a == 0
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(a: f64) -> Dd {
        Dd { hi: a, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> f64 {
        self.to_f64().abs()
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    #[inline]
    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        if !q1.is_finite() {
            return Dd::from_f64(q1);
        }
        let r1 = self.sub(o.mul_f64(q1));
        let q2 = r1.hi / o.hi;
        let r2 = r1.sub(o.mul_f64(q2));
        let q3 = r2.hi / o.hi;
        let (s, e) = quick_two_sum(q1, q2);
        let (hi, lo) = quick_two_sum(s, e + q3);
        Dd { hi, lo }
    }
}

/// Dense row-major double-double matrix, internal to the numeric kernels.
#[derive(Clone, Debug)]
pub(crate) struct DdMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Dd>,
}

impl DdMat {
    pub fn zeros(rows: usize, cols: usize) -> DdMat {
        DdMat { rows, cols, data: vec![Dd::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> DdMat {
        let mut m = DdMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Dd::ONE;
        }
        m
    }

    pub fn from_f64_slice(rows: usize, cols: usize, data: &[f64]) -> DdMat {
        DdMat {
            rows,
            cols,
            data: data.iter().map(|&a| Dd::from_f64(a)).collect(),
        }
    }

    pub fn matmul(&self, o: &DdMat) -> DdMat {
        debug_assert_eq!(self.cols, o.rows);
        let mut out = DdMat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.hi == 0.0 && a.lo == 0.0 {
                    continue;
                }
                for j in 0..o.cols {
                    out[(i, j)] = out[(i, j)].add(a.mul(o[(k, j)]));
                }
            }
        }
        out
    }

    pub fn scale(&self, s: Dd) -> DdMat {
        DdMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.mul(s)).collect(),
        }
    }

    pub fn add(&self, o: &DdMat) -> DdMat {
        debug_assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        DdMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(a, b)| a.add(*b))
                .collect(),
        }
    }

}

impl std::ops::Index<(usize, usize)> for DdMat {
    type Output = Dd;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Dd {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DdMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Dd {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, in place. Returns the pivot
/// permutation sign and row order, or None if a pivot column is exactly zero.
pub(crate) struct DdLu {
    pub lu: DdMat,
    pub perm: Vec<usize>,
    pub sign: f64,
}

pub(crate) fn dd_lu(m: &DdMat) -> Option<DdLu> {
    let n = m.rows;
    debug_assert_eq!(m.rows, m.cols);
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let piv = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)].div(piv);
            lu[(i, k)] = f;
            for j in k + 1..n {
                let sub = f.mul(lu[(k, j)]);
                lu[(i, j)] = lu[(i, j)].sub(sub);
            }
        }
    }
    Some(DdLu { lu, perm, sign })
}

impl DdLu {
    pub fn det(&self) -> Dd {
        let n = self.lu.rows;
        let mut d = Dd::from_f64(self.sign);
        for i in 0..n {
            d = d.mul(self.lu[(i, i)]);
        }
        d
    }

    /// Solve A x = b for a single right-hand side given the factorization.
    pub fn solve(&self, b: &[Dd]) -> Vec<Dd> {
        let n = self.lu.rows;
        let mut x: Vec<Dd> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc.sub(self.lu[(i, j)].mul(x[j]));
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc.sub(self.lu[(i, j)].mul(x[j]));
            }
            x[i] = acc.div(self.lu[(i, i)]);
        }
        x
    }

    pub fn inverse(&self) -> DdMat {
        let n = self.lu.rows;
        let mut inv = DdMat::zeros(n, n);
        let mut e = vec![Dd::ZERO; n];
        for j in 0..n {
            e[j] = Dd::ONE;
            let col = self.solve(&e);
            e[j] = Dd::ZERO;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

//! Ground-truth linear-quadratic design: integral-error augmentation of the
//! plant, the closed-form Riccati solution through the Hamiltonian matrix
//! exponential, a differential-Riccati integrator that serves as its
//! independent oracle, the reference model and cost evaluation.

use crate::dd::{dd_lu, Dd, DdMat};
use crate::eig::eigenvalues;
use crate::error::{Error, Result};
use crate::mat::{dd_to_mat, mat_to_dd, Mat};

/// Condition-estimate threshold above which the closed-form solution is
/// reported singular rather than returned as garbage. The eigenvalue spread
/// of the Hamiltonian drives the conditioning of the inverted block, so this
/// is where an over-long horizon shows up.
pub const ANALYTIC_COND_LIMIT: f64 = 1e14;

/// Plant with unknown-to-the-controller dynamics and a known output map
/// z = C_pᵀ x_p.
#[derive(Clone, Debug)]
pub struct PlantModel {
    pub a_p: Mat,
    pub b_p: Mat,
    pub c_p: Mat,
    pub x_p0: Vec<f64>,
}

impl PlantModel {
    pub fn new(a_p: Mat, b_p: Mat, c_p: Mat, x_p0: Vec<f64>) -> Result<PlantModel> {
        let n_p = a_p.rows();
        if !a_p.is_square() || b_p.rows() != n_p || c_p.rows() != n_p || x_p0.len() != n_p {
            return Err(Error::Dimension {
                op: "PlantModel::new",
                details: "A_p square, B_p/C_p row counts and x_p0 length must all match".into(),
            });
        }
        if b_p.cols() != c_p.cols() {
            return Err(Error::Dimension {
                op: "PlantModel::new",
                details: "output count must match input count for integral tracking".into(),
            });
        }
        let plant = PlantModel { a_p, b_p, c_p, x_p0 };
        if !plant.is_controllable() {
            return Err(Error::NotControllable);
        }
        Ok(plant)
    }

    pub fn state_dim(&self) -> usize {
        self.a_p.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_p.cols()
    }

    /// Kalman controllability matrix has full row rank.
    fn is_controllable(&self) -> bool {
        let n = self.state_dim();
        let m = self.input_dim();
        let mut blocks = Mat::zeros(n, n * m);
        let mut ab = self.b_p.clone();
        for k in 0..n {
            blocks.set_block(0, k * m, &ab);
            ab = self.a_p.matmul(&ab);
        }
        rank(&blocks) == n
    }
}

/// Row rank by Gaussian elimination with partial pivoting.
fn rank(m: &Mat) -> usize {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<f64>> = (0..rows)
        .map(|i| (0..cols).map(|j| m[(i, j)]).collect())
        .collect();
    let tol = 1e-10 * m.max_abs().max(1.0);
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (pi, pv) = (r..rows)
            .map(|i| (i, a[i][c].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pv <= tol {
            continue;
        }
        a.swap(r, pi);
        for i in r + 1..rows {
            let f = a[i][c] / a[r][c];
            for j in c..cols {
                a[i][j] -= f * a[r][j];
            }
        }
        r += 1;
    }
    r
}

/// The plant extended with the weighted integral of the output tracking
/// error. Block layout:
///   A = [[A_p, 0], [ϑ C_pᵀ, 0]],  B = [B_p; 0],  B_r = [0; ϑ I].
#[derive(Clone, Debug)]
pub struct AugmentedSystem {
    pub a: Mat,
    pub b: Mat,
    pub b_r: Mat,
    /// output map of the augmented state, m x n (z = c_t · x)
    pub c_t: Mat,
    pub vartheta: f64,
    pub n: usize,
    pub m: usize,
}

/// Assemble the augmented system and verify the extra controllability
/// condition det [[A_p, B_p], [C_pᵀ, 0]] ≠ 0.
pub fn augment(plant: &PlantModel, vartheta: f64) -> Result<AugmentedSystem> {
    if vartheta == 0.0 || !vartheta.is_finite() {
        return Err(Error::Parameter {
            op: "augment",
            details: format!("integral-error weight must be nonzero, got {vartheta}"),
        });
    }
    let n_p = plant.state_dim();
    let m = plant.input_dim();
    let n = n_p + m;

    let mut cond = Mat::zeros(n, n);
    cond.set_block(0, 0, &plant.a_p);
    cond.set_block(0, n_p, &plant.b_p);
    cond.set_block(n_p, 0, &plant.c_p.transpose());
    let d = cond.det()?;
    let scale = cond.max_abs().max(1.0).powi(n as i32);
    if d.abs() <= 1e-12 * scale {
        return Err(Error::NotControllable);
    }

    let mut a = Mat::zeros(n, n);
    a.set_block(0, 0, &plant.a_p);
    a.set_block(n_p, 0, &plant.c_p.transpose().scale(vartheta));
    let mut b = Mat::zeros(n, m);
    b.set_block(0, 0, &plant.b_p);
    let mut b_r = Mat::zeros(n, m);
    b_r.set_block(n_p, 0, &Mat::identity(m).scale(vartheta));
    let mut c_t = Mat::zeros(m, n);
    c_t.set_block(0, 0, &plant.c_p.transpose());

    Ok(AugmentedSystem { a, b, b_r, c_t, vartheta, n, m })
}

/// State and control weights of the quadratic cost.
#[derive(Clone, Debug)]
pub struct CostWeights {
    pub q: Mat,
    pub r: Mat,
}

impl CostWeights {
    pub fn new(q: Mat, r: Mat) -> Result<CostWeights> {
        check_spd("Q", &q)?;
        check_spd("R", &r)?;
        Ok(CostWeights { q, r })
    }

    pub fn r_inv(&self) -> Result<Mat> {
        let det = self.r.det()?;
        if det.abs() <= f64::MIN_POSITIVE {
            return Err(Error::Weight { details: "R is singular".into() });
        }
        Ok(self.r.adjugate()?.scale(1.0 / det))
    }
}

fn check_spd(name: &str, m: &Mat) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Weight { details: format!("{name} must be square") });
    }
    let asym = m.sub(&m.transpose()).frobenius();
    if asym > 1e-9 * m.frobenius().max(1.0) {
        return Err(Error::Weight { details: format!("{name} is not symmetric") });
    }
    let spec = eigenvalues(m)?;
    let min_re = spec
        .eigenvalues
        .iter()
        .map(|&(re, _)| re)
        .fold(f64::INFINITY, f64::min);
    if min_re <= 0.0 {
        return Err(Error::Weight {
            details: format!("{name} has a non-positive eigenvalue {min_re:.3e}"),
        });
    }
    Ok(())
}

/// The gains and Riccati quantities of one LQ design:
/// u = K_x x + K_r r, with θᵀ = [K_x  K_r].
#[derive(Clone, Debug)]
pub struct LqSolution {
    pub p: Mat,
    pub v: Mat,
    pub k_x: Mat,
    pub k_r: Mat,
    /// (n+m) x m stacked parameter matrix; rows 0..n hold K_xᵀ, the rest K_rᵀ
    pub theta: Mat,
}

impl LqSolution {
    pub fn a_ref(&self, sys: &AugmentedSystem) -> Mat {
        sys.a.add(&sys.b.matmul(&self.k_x))
    }
}

/// The 2n x 2n Hamiltonian [[-A, B R⁻¹ Bᵀ], [Q, Aᵀ]].
pub fn build_hamiltonian(sys: &AugmentedSystem, w: &CostWeights) -> Result<Mat> {
    let n = sys.n;
    if w.q.rows() != n || w.r.rows() != sys.m {
        return Err(Error::Dimension {
            op: "build_hamiltonian",
            details: "weight dimensions do not match the augmented system".into(),
        });
    }
    let r_inv = w.r_inv()?;
    let mut d = Mat::zeros(2 * n, 2 * n);
    d.set_block(0, 0, &sys.a.scale(-1.0));
    d.set_block(0, n, &sys.b.matmul(&r_inv).matmul(&sys.b.transpose()));
    d.set_block(n, 0, &w.q);
    d.set_block(n, n, &sys.a.transpose());
    Ok(d)
}

/// e^{D·tau} in double-double by scaling and squaring.
fn dd_expm(d: &Mat, tau: f64) -> DdMat {
    let n = d.rows();
    let norm = d.frobenius() * tau.abs();
    let s = if norm <= 0.5 { 0 } else { (norm / 0.5).log2().ceil() as u32 };
    let scaled = mat_to_dd(&d.scale(tau / f64::powi(2.0, s as i32)));
    let mut term = DdMat::identity(n);
    let mut sum = DdMat::identity(n);
    for k in 1..=30u32 {
        term = term.matmul(&scaled).scale(Dd::ONE.div(Dd::from_f64(k as f64)));
        sum = sum.add(&term);
    }
    let mut phi = sum;
    for _ in 0..s {
        phi = phi.matmul(&phi);
    }
    phi
}

/// Closed-form LQ solution at horizon `tau_inf` through the Hamiltonian
/// matrix exponential: P = Φ21 Φ11⁻¹, V = (Aᵀ - P B R⁻¹ Bᵀ)⁻¹ P B_r.
///
/// The exponential and both inversions run in double-double internally;
/// Φ11 routinely has a condition number above 1e12 at usable horizons, and
/// plain f64 would not survive the block solve.
pub fn solve_lq_analytical(
    sys: &AugmentedSystem,
    w: &CostWeights,
    tau_inf: f64,
) -> Result<LqSolution> {
    if tau_inf <= 0.0 || !tau_inf.is_finite() {
        return Err(Error::Parameter {
            op: "solve_lq_analytical",
            details: format!("horizon must be positive and finite, got {tau_inf}"),
        });
    }
    let n = sys.n;
    let d = build_hamiltonian(sys, w)?;
    let phi = dd_expm(&d, tau_inf);
    if !dd_to_mat(&phi).all_finite() {
        return Err(Error::NonFinite { op: "solve_lq_analytical", index: 0 });
    }

    let mut phi11 = DdMat::zeros(n, n);
    let mut phi21 = DdMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            phi11[(i, j)] = phi[(i, j)];
            phi21[(i, j)] = phi[(n + i, j)];
        }
    }

    let lu = dd_lu(&phi11).ok_or(Error::AnalyticSingular { cond: f64::INFINITY })?;
    let inv11 = lu.inverse();
    let cond = dd_to_mat(&phi11).spectral() * dd_to_mat(&inv11).spectral();
    if !cond.is_finite() || cond > ANALYTIC_COND_LIMIT {
        return Err(Error::AnalyticSingular { cond });
    }

    let p_dd = phi21.matmul(&inv11);
    let p = dd_to_mat(&p_dd);

    // M_v = Aᵀ - P B R⁻¹ Bᵀ, solved against P B_r in double-double
    let r_inv = w.r_inv()?;
    let brb = sys.b.matmul(&r_inv).matmul(&sys.b.transpose());
    let m_v = mat_to_dd(&sys.a.transpose()).add(&p_dd.matmul(&mat_to_dd(&brb)).scale(Dd::from_f64(-1.0)));
    let rhs = p_dd.matmul(&mat_to_dd(&sys.b_r));
    let lu_v = dd_lu(&m_v).ok_or(Error::Singular { op: "solve_lq_analytical" })?;
    let mut v = Mat::zeros(n, sys.m);
    let mut col = vec![Dd::ZERO; n];
    for j in 0..sys.m {
        for i in 0..n {
            col[i] = rhs[(i, j)];
        }
        let x = lu_v.solve(&col);
        for i in 0..n {
            v[(i, j)] = x[i].to_f64();
        }
    }

    let k_x = r_inv.matmul(&sys.b.transpose()).matmul(&p).scale(-1.0);
    let k_r = r_inv.matmul(&sys.b.transpose()).matmul(&v).scale(-1.0);
    if !(p.all_finite() && v.all_finite() && k_x.all_finite() && k_r.all_finite()) {
        return Err(Error::NonFinite { op: "solve_lq_analytical", index: 1 });
    }

    let mut theta = Mat::zeros(n + sys.m, sys.m);
    theta.set_block(0, 0, &k_x.transpose());
    theta.set_block(n, 0, &k_r.transpose());
    Ok(LqSolution { p, v, k_x, k_r, theta })
}

/// Frobenius norm of AᵀP + PA - P B R⁻¹ Bᵀ P + Q, evaluated in extended
/// precision so the result reflects P itself rather than f64 rounding of
/// the large intermediate products.
pub fn are_residual(sys: &AugmentedSystem, w: &CostWeights, p: &Mat) -> Result<f64> {
    let r_inv = w.r_inv()?;
    let s = sys.b.matmul(&r_inv).matmul(&sys.b.transpose());
    let a_dd = mat_to_dd(&sys.a);
    let at_dd = mat_to_dd(&sys.a.transpose());
    let p_dd = mat_to_dd(p);
    let s_dd = mat_to_dd(&s);
    let resid = at_dd
        .matmul(&p_dd)
        .add(&p_dd.matmul(&a_dd))
        .add(&p_dd.matmul(&s_dd).matmul(&p_dd).scale(Dd::from_f64(-1.0)))
        .add(&mat_to_dd(&w.q));
    Ok(dd_to_mat(&resid).frobenius())
}

/// Sampled trajectories of the differential Riccati flow.
#[derive(Clone, Debug)]
pub struct RiccatiIntegration {
    pub taus: Vec<f64>,
    pub p_samples: Vec<Mat>,
    pub v_samples: Vec<Mat>,
    pub p_final: Mat,
    pub v_final: Mat,
    /// true when the steady-state test fired before the horizon cap
    pub converged: bool,
}

/// Integrate the matrix Riccati flow dP/dτ = AᵀP + PA - P B R⁻¹ Bᵀ P + Q
/// from P(0) = 0 in its steady-state-seeking direction, together with the
/// companion flow dV/dτ = (Aᵀ - P B R⁻¹ Bᵀ) V - P B_r, stopping when both
/// derivative norms fall below 1e-10 or the horizon is reached.
///
/// This is the independent oracle for [`solve_lq_analytical`]; it uses a
/// classical fourth-order Runge–Kutta step so oracle error stays far below
/// the cross-validation tolerances.
pub fn integrate_riccati_differential(
    sys: &AugmentedSystem,
    w: &CostWeights,
    horizon: f64,
    step: f64,
) -> Result<RiccatiIntegration> {
    if step <= 0.0 || horizon <= 0.0 || step > horizon {
        return Err(Error::Step { dt: step });
    }
    let n = sys.n;
    let r_inv = w.r_inv()?;
    let s_mat = sys.b.matmul(&r_inv).matmul(&sys.b.transpose());
    let a_t = sys.a.transpose();

    let dp = |p: &Mat| -> Mat {
        a_t.matmul(p)
            .add(&p.matmul(&sys.a))
            .sub(&p.matmul(&s_mat).matmul(p))
            .add(&w.q)
    };
    let dv = |p: &Mat, v: &Mat| -> Mat {
        a_t.sub(&p.matmul(&s_mat)).matmul(v).sub(&p.matmul(&sys.b_r))
    };

    let steps = (horizon / step).round() as usize;
    let stride = (steps / 2000).max(1);
    let mut p = Mat::zeros(n, n);
    let mut v = Mat::zeros(n, sys.m);
    let mut out = RiccatiIntegration {
        taus: vec![0.0],
        p_samples: vec![p.clone()],
        v_samples: vec![v.clone()],
        p_final: p.clone(),
        v_final: v.clone(),
        converged: false,
    };
    for k in 0..steps {
        let k1p = dp(&p);
        let k1v = dv(&p, &v);
        if k1p.frobenius() <= 1e-10 && k1v.frobenius() <= 1e-10 {
            out.converged = true;
            break;
        }
        let half = 0.5 * step;
        let p2 = p.add(&k1p.scale(half));
        let v2 = v.add(&k1v.scale(half));
        let k2p = dp(&p2);
        let k2v = dv(&p2, &v2);
        let p3 = p.add(&k2p.scale(half));
        let v3 = v.add(&k2v.scale(half));
        let k3p = dp(&p3);
        let k3v = dv(&p3, &v3);
        let p4 = p.add(&k3p.scale(step));
        let v4 = v.add(&k3v.scale(step));
        let k4p = dp(&p4);
        let k4v = dv(&p4, &v4);
        let w6 = step / 6.0;
        p = p.add(
            &k1p.add(&k2p.scale(2.0)).add(&k3p.scale(2.0)).add(&k4p).scale(w6),
        );
        v = v.add(
            &k1v.add(&k2v.scale(2.0)).add(&k3v.scale(2.0)).add(&k4v).scale(w6),
        );
        let pn = p.frobenius();
        if !pn.is_finite() || pn > 1e12 {
            return Err(Error::Instability { norm: pn });
        }
        if (k + 1) % stride == 0 {
            out.taus.push((k + 1) as f64 * step);
            out.p_samples.push(p.clone());
            out.v_samples.push(v.clone());
        }
    }
    out.p_final = p;
    out.v_final = v;
    Ok(out)
}

/// One explicit-Euler step of the reference model
/// ẋ_ref = (A + B K_x) x_ref + B K_r r - B_r r.
///
/// The -B_r r forcing mirrors the plant equation: the reference model is
/// exactly the plant under the optimal law, so a perfectly initialized
/// controller tracks it to round-off.
pub fn reference_model_step(
    sol: &LqSolution,
    sys: &AugmentedSystem,
    x_ref: &[f64],
    r: &[f64],
    dt: f64,
) -> Vec<f64> {
    debug_assert!(dt > 0.0);
    let a_ref = sol.a_ref(sys);
    let mut dx = a_ref.matvec(x_ref);
    let kr_r = sol.k_r.matvec(r);
    let b_kr = sys.b.matvec(&kr_r);
    let br_r = sys.b_r.matvec(r);
    for i in 0..dx.len() {
        dx[i] += b_kr[i] - br_r[i];
    }
    x_ref
        .iter()
        .zip(&dx)
        .map(|(x, d)| x + d * dt)
        .collect()
}

/// Trapezoidal approximation of ½∫ xᵀQx + uᵀRu dt over aligned samples,
/// plus an optional terminal term ½ x(t_f)ᵀ P x(t_f).
pub fn evaluate_cost(
    xs: &[Vec<f64>],
    us: &[Vec<f64>],
    w: &CostWeights,
    dt: f64,
    terminal: Option<&Mat>,
) -> Result<f64> {
    if xs.len() != us.len() {
        return Err(Error::Trace {
            details: format!("state and control traces differ in length: {} vs {}", xs.len(), us.len()),
        });
    }
    if xs.is_empty() {
        return Ok(0.0);
    }
    let quad = |m: &Mat, v: &[f64]| -> f64 {
        let mv = m.matvec(v);
        v.iter().zip(&mv).map(|(a, b)| a * b).sum()
    };
    let integrand: Vec<f64> = xs
        .iter()
        .zip(us)
        .map(|(x, u)| 0.5 * (quad(&w.q, x) + quad(&w.r, u)))
        .collect();
    let mut total = 0.0;
    for k in 1..integrand.len() {
        total += 0.5 * (integrand[k - 1] + integrand[k]) * dt;
    }
    if let Some(p) = terminal {
        total += 0.5 * quad(p, xs.last().unwrap());
    }
    Ok(total)
}

/// Cost excess of one run over another on the same grid.
pub fn cost_gap(
    xs_a: &[Vec<f64>],
    us_a: &[Vec<f64>],
    xs_b: &[Vec<f64>],
    us_b: &[Vec<f64>],
    w: &CostWeights,
    dt: f64,
) -> Result<f64> {
    if xs_a.len() != xs_b.len() {
        return Err(Error::Trace {
            details: format!("traces differ in length: {} vs {}", xs_a.len(), xs_b.len()),
        });
    }
    Ok(evaluate_cost(xs_a, us_a, w, dt, None)? - evaluate_cost(xs_b, us_b, w, dt, None)?)
}

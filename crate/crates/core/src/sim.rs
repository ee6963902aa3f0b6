//! Fixed-step closed-loop orchestration: the true plant, the identification
//! pipeline, the adaptive law and the evaluation-only reference model all
//! advance on one shared Euler grid. Also home to the desk-scale experiment
//! reproductions (error table, Hamiltonian spectra, ideal-law sweeps).

use crate::adapt::{control_output, theta_update_scheduled, AdaptGains, ControllerState};
use crate::drem::{
    averaging_step, build_zd, build_zphi, drem_mix, extract_za_zb, filter_step,
    parameterize_theta, FilterState, PipelineParams,
};
use crate::eig::{eigenvalues, Spectrum};
use crate::error::{Error, Result};
use crate::expm::{mat_exp_oracle, mat_exp_taylor};
use crate::lq::{
    augment, build_hamiltonian, evaluate_cost, solve_lq_analytical, CostWeights, PlantModel,
};
use crate::mat::Mat;

/// Reference command as a function of time since scenario start.
#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceSignal {
    Constant(f64),
    /// amplitude · e^{-rate·t}
    Exponential { amplitude: f64, rate: f64 },
    /// (from_time, value) segments, sorted by time; value holds until the
    /// next segment starts
    PiecewiseConstant(Vec<(f64, f64)>),
}

impl ReferenceSignal {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            ReferenceSignal::Constant(c) => *c,
            ReferenceSignal::Exponential { amplitude, rate } => amplitude * (-rate * t).exp(),
            ReferenceSignal::PiecewiseConstant(segments) => {
                let mut v = 0.0;
                for &(from, val) in segments {
                    if t + 1e-15 >= from {
                        v = val;
                    } else {
                        break;
                    }
                }
                v
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ReferenceSignal::Constant(c) => c.is_finite(),
            ReferenceSignal::Exponential { amplitude, rate } => {
                amplitude.is_finite() && rate.is_finite()
            }
            ReferenceSignal::PiecewiseConstant(segments) => {
                !segments.is_empty()
                    && segments.windows(2).all(|w| w[0].0 <= w[1].0)
                    && segments.iter().all(|&(t, v)| t.is_finite() && v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter {
                op: "ReferenceSignal",
                details: "reference specification is not well-formed".into(),
            })
        }
    }
}

/// Everything one closed-loop run needs.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub plant: PlantModel,
    pub vartheta: f64,
    pub weights: CostWeights,
    pub pipeline: PipelineParams,
    pub gains: AdaptGains,
    /// (n+m) x m initial controller parameters
    pub theta_hat0: Mat,
    /// augmented initial state, length n = n_p + m
    pub x0: Vec<f64>,
    pub reference: ReferenceSignal,
    pub duration: f64,
    pub dt: f64,
    pub reset_on_reference_change: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.gains.validate()?;
        self.reference.validate()?;
        if !(self.dt > 0.0) || self.duration < self.dt {
            return Err(Error::Parameter {
                op: "Scenario",
                details: format!(
                    "need dt > 0 and duration >= dt, got dt={} duration={}",
                    self.dt, self.duration
                ),
            });
        }
        let n = self.plant.state_dim() + self.plant.input_dim();
        let m = self.plant.input_dim();
        if self.x0.len() != n {
            return Err(Error::Dimension {
                op: "Scenario",
                details: format!("x0 must have the augmented length {n}"),
            });
        }
        if self.theta_hat0.rows() != n + m || self.theta_hat0.cols() != m {
            return Err(Error::Dimension {
                op: "Scenario",
                details: format!("theta_hat0 must be {}x{}", n + m, m),
            });
        }
        Ok(())
    }
}

/// Time-aligned named channels recorded once per tick.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub t: Vec<f64>,
    pub channels: Vec<(String, Vec<f64>)>,
}

impl Trace {
    fn with_channels(names: Vec<String>) -> Trace {
        Trace {
            t: Vec::new(),
            channels: names.into_iter().map(|n| (n, Vec::new())).collect(),
        }
    }

    fn push_row(&mut self, t: f64, values: &[f64]) {
        debug_assert_eq!(values.len(), self.channels.len());
        self.t.push(t);
        for (slot, v) in self.channels.iter_mut().zip(values) {
            slot.1.push(*v);
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

/// Headline numbers of one closed-loop run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub final_theta_err: f64,
    pub final_eref_err: f64,
    /// fraction of active-window ticks on which every |θ̃_i| was
    /// nonincreasing (1e-9 per-tick slack)
    pub monotone_fraction: f64,
    pub omega_peak: f64,
    pub activation_time: Option<f64>,
    pub cost_adaptive: f64,
    pub cost_ideal: f64,
    pub overflow_flag: bool,
}

/// Run the full adaptive loop. The ground-truth design is computed once for
/// evaluation metrics only; the controller itself sees nothing but (x, u, r).
///
/// A numeric overflow in any pipeline stage halts the run and returns the
/// partial trace with `overflow_flag` set, so parameter sweeps survive bad
/// normalization choices.
pub fn run_closed_loop(scenario: &Scenario) -> Result<(Trace, RunSummary)> {
    scenario.validate()?;
    let sys = augment(&scenario.plant, scenario.vartheta)?;
    let w = &scenario.weights;
    let truth = solve_lq_analytical(&sys, w, scenario.pipeline.tau_inf)?;
    let (n, m) = (sys.n, sys.m);
    let dt = scenario.dt;
    let steps = (scenario.duration / dt).round() as usize;

    let mut names: Vec<String> = Vec::new();
    for i in 0..n {
        names.push(format!("x{i}"));
    }
    for j in 0..m {
        names.push(format!("u{j}"));
    }
    for i in 0..(n + m) {
        for j in 0..m {
            names.push(format!("theta_hat_{i}_{j}"));
        }
    }
    names.extend(
        ["delta", "phi", "omega", "theta_err", "eref_err", "xi", "j_running"]
            .map(String::from),
    );
    let mut trace = Trace::with_channels(names);

    let mut x = scenario.x0.clone();
    let mut x_ref = scenario.x0.clone();
    let mut cs = ControllerState { theta_hat: scenario.theta_hat0.clone() };
    let mut fs = FilterState::new(n, m, &x, scenario.pipeline.t_start);
    let mut params = scenario.pipeline.clone();

    let mut j_adaptive = 0.0f64;
    let mut j_ideal = 0.0f64;
    let mut prev_integrand: Option<f64> = None;
    let mut prev_integrand_ideal: Option<f64> = None;

    let mut omega_peak = 0.0f64;
    let mut activation: Option<f64> = None;
    let mut mono_ok = 0usize;
    let mut mono_total = 0usize;
    let mut prev_abs_err: Option<Vec<f64>> = None;
    let mut overflow = false;

    let mut r_prev = f64::NAN;
    let mut row = vec![0.0f64; trace.channels.len()];

    let quad = |mat: &Mat, v: &[f64]| -> f64 {
        let mv = mat.matvec(v);
        v.iter().zip(&mv).map(|(a, b)| a * b).sum()
    };

    for k in 0..steps {
        let t = k as f64 * dt;
        let r_now = scenario.reference.value(t);
        let r = vec![r_now; m];

        if scenario.reset_on_reference_change && k > 0 && r_now != r_prev {
            fs.reset(&x, t);
            params.t_start = t;
        }
        r_prev = r_now;

        let u = control_output(&cs, &x, &r);

        // identification pipeline
        let tick = (|| -> Result<(f64, f64)> {
            let (zbar, phibar) = filter_step(&mut fs, &sys, &x, &u, &r, &params, dt)?;
            let (phi, z) = drem_mix(&mut fs, &zbar, &phibar, &params, dt)?;
            let (z_a, z_b) = extract_za_zb(&z, n, m);
            let zd = build_zd(&z_a, &z_b, phi, w)?;
            let (z11, z21) = build_zphi(&zd, phi, &params)?;
            let reg = parameterize_theta(&z_a, &z_b, &z11, &z21, phi, &sys, w)?;
            averaging_step(&mut fs, &reg, &params, dt)?;
            Ok((reg.delta, phi))
        })();
        let (delta, phi) = match tick {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => {
                overflow = true;
                break;
            }
            Err(e) => return Err(e),
        };
        omega_peak = omega_peak.max(fs.omega_acc);

        // adaptation (algebraically reduced form of the scheduled law)
        let mut omega_vec = x.clone();
        omega_vec.extend_from_slice(&r);
        let updated = theta_update_scheduled(
            &cs,
            &scenario.gains,
            &omega_vec,
            fs.omega_acc,
            &fs.upsilon_acc,
            dt,
        );
        let active = match updated {
            Ok((next, active)) => {
                cs = next;
                active
            }
            Err(Error::NonFinite { .. }) => {
                overflow = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if active {
            if activation.is_none() {
                activation = Some(t);
            }
            let abs_err: Vec<f64> = cs
                .theta_hat
                .data()
                .iter()
                .zip(truth.theta.data())
                .map(|(a, b)| (a - b).abs())
                .collect();
            if let Some(prev) = &prev_abs_err {
                mono_total += 1;
                if abs_err.iter().zip(prev).all(|(now, old)| *now <= old + 1e-9) {
                    mono_ok += 1;
                }
            }
            prev_abs_err = Some(abs_err);
        }

        // running costs on the shared grid (trapezoid)
        let u_ideal = {
            let mut ui = truth.k_x.matvec(&x_ref);
            let kr = truth.k_r.matvec(&r);
            for i in 0..m {
                ui[i] += kr[i];
            }
            ui
        };
        let integrand = 0.5 * (quad(&w.q, &x) + quad(&w.r, &u));
        let integrand_ideal = 0.5 * (quad(&w.q, &x_ref) + quad(&w.r, &u_ideal));
        if let (Some(p0), Some(p1)) = (prev_integrand, prev_integrand_ideal) {
            j_adaptive += 0.5 * (p0 + integrand) * dt;
            j_ideal += 0.5 * (p1 + integrand_ideal) * dt;
        }
        prev_integrand = Some(integrand);
        prev_integrand_ideal = Some(integrand_ideal);

        // record the tick
        let (theta_err, eref_err, xi) = crate::adapt::error_metrics(&cs, &truth.theta, &x, &x_ref);
        let mut idx = 0;
        for i in 0..n {
            row[idx] = x[i];
            idx += 1;
        }
        for j in 0..m {
            row[idx] = u[j];
            idx += 1;
        }
        for v in cs.theta_hat.data() {
            row[idx] = *v;
            idx += 1;
        }
        row[idx] = delta;
        row[idx + 1] = phi;
        row[idx + 2] = fs.omega_acc;
        row[idx + 3] = theta_err;
        row[idx + 4] = eref_err;
        row[idx + 5] = xi;
        row[idx + 6] = j_adaptive;
        trace.push_row(t, &row);

        // advance plant and reference model with this tick's inputs
        let mut dx = sys.a.matvec(&x);
        let bu = sys.b.matvec(&u);
        let brr = sys.b_r.matvec(&r);
        for i in 0..n {
            dx[i] += bu[i] - brr[i];
        }
        for i in 0..n {
            x[i] += dt * dx[i];
        }
        if !x.iter().all(|v| v.is_finite()) {
            overflow = true;
            break;
        }
        x_ref = crate::lq::reference_model_step(&truth, &sys, &x_ref, &r, dt);
    }

    let (final_theta_err, final_eref_err, _) =
        crate::adapt::error_metrics(&cs, &truth.theta, &x, &x_ref);
    let summary = RunSummary {
        final_theta_err,
        final_eref_err,
        monotone_fraction: if mono_total == 0 {
            0.0
        } else {
            mono_ok as f64 / mono_total as f64
        },
        omega_peak,
        activation_time: activation,
        cost_adaptive: j_adaptive,
        cost_ideal: j_ideal,
        overflow_flag: overflow,
    };
    Ok((trace, summary))
}

/// One entry of an ideal-law horizon sweep.
#[derive(Clone, Debug)]
pub enum IdealRun {
    Solved { tau_inf: f64, trace: Trace, cost: f64 },
    /// the closed-form solution was numerically singular at this horizon
    Singular { tau_inf: f64 },
}

/// Simulate the plant under the fixed optimal law computed at each horizon
/// in the sweep; singular horizons are carried as marked entries.
pub fn run_ideal_lq(scenario: &Scenario, tau_inf_sweep: &[f64]) -> Result<Vec<IdealRun>> {
    scenario.validate()?;
    let sys = augment(&scenario.plant, scenario.vartheta)?;
    let w = &scenario.weights;
    let m = sys.m;
    let steps = (scenario.duration / scenario.dt).round() as usize;
    let dt = scenario.dt;

    let mut out = Vec::new();
    for &tau in tau_inf_sweep {
        let sol = match solve_lq_analytical(&sys, w, tau) {
            Ok(s) => s,
            Err(Error::AnalyticSingular { .. }) | Err(Error::Singular { .. }) => {
                out.push(IdealRun::Singular { tau_inf: tau });
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut names: Vec<String> = (0..m).map(|j| format!("z{j}")).collect();
        names.push("j_running".into());
        let mut trace = Trace::with_channels(names);
        let mut x = scenario.x0.clone();
        let mut xs = Vec::with_capacity(steps);
        let mut us = Vec::with_capacity(steps);
        let mut j_run = 0.0;
        let mut prev: Option<f64> = None;
        let quad = |mat: &Mat, v: &[f64]| -> f64 {
            let mv = mat.matvec(v);
            v.iter().zip(&mv).map(|(a, b)| a * b).sum()
        };
        let mut row = vec![0.0; m + 1];
        for k in 0..steps {
            let t = k as f64 * dt;
            let r = vec![scenario.reference.value(t); m];
            let mut u = sol.k_x.matvec(&x);
            let kr = sol.k_r.matvec(&r);
            for i in 0..m {
                u[i] += kr[i];
            }
            let integrand = 0.5 * (quad(&w.q, &x) + quad(&w.r, &u));
            if let Some(p) = prev {
                j_run += 0.5 * (p + integrand) * dt;
            }
            prev = Some(integrand);
            let z = sys.c_t.matvec(&x);
            for (i, zi) in z.iter().enumerate() {
                row[i] = *zi;
            }
            row[m] = j_run;
            trace.push_row(t, &row);
            xs.push(x.clone());
            us.push(u.clone());

            let mut dx = sys.a.matvec(&x);
            let bu = sys.b.matvec(&u);
            let brr = sys.b_r.matvec(&r);
            for i in 0..sys.n {
                dx[i] += bu[i] - brr[i];
            }
            for i in 0..sys.n {
                x[i] += dt * dx[i];
            }
        }
        let cost = evaluate_cost(&xs, &us, w, dt, None)?;
        out.push(IdealRun::Solved { tau_inf: tau, trace, cost });
    }
    Ok(out)
}

/// Which norm the error table reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Frobenius,
    Spectral,
}

/// One cell of the truncation-error table.
#[derive(Clone, Debug)]
pub struct TableCell {
    pub tau_inf: f64,
    pub p: usize,
    pub eps_norm: f64,
}

/// The Hamiltonian of the two-state benchmark plant with identity weights.
pub fn benchmark_hamiltonian() -> Result<Mat> {
    let plant = PlantModel::new(
        Mat::from_rows(&[&[0.0, 1.0], &[-1.0, -1.0]])?,
        Mat::col(&[0.0, 1.0]),
        Mat::col(&[1.0, 0.0]),
        vec![0.0, 0.0],
    )?;
    let sys = augment(&plant, 1.0)?;
    let w = CostWeights::new(Mat::identity(3), Mat::identity(1))?;
    build_hamiltonian(&sys, &w)
}

/// Truncation error of the degree-p Taylor polynomial against the
/// scaling-and-squaring oracle over the benchmark grid of horizons and
/// degrees.
pub fn reproduce_table1(norm: NormKind) -> Result<Vec<TableCell>> {
    let d = benchmark_hamiltonian()?;
    let mut cells = Vec::new();
    for &tau in &[1.5, 2.0, 2.5, 3.0, 7.0] {
        let exact = mat_exp_oracle(&d, tau)?;
        for &p in &[20usize, 25, 30, 35] {
            let approx = mat_exp_taylor(&d, tau, p)?;
            let err = exact.sub(&approx);
            let eps_norm = match norm {
                NormKind::Frobenius => err.frobenius(),
                NormKind::Spectral => err.spectral(),
            };
            cells.push(TableCell { tau_inf: tau, p, eps_norm });
        }
    }
    Ok(cells)
}

/// A labeled Hamiltonian spectrum.
#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub label: String,
    pub spectrum: Spectrum,
}

/// Eigenvalues of the benchmark Hamiltonians: the two-state plant, and the
/// three-state plant at integral-error weights 1 and 100.
pub fn reproduce_spectra() -> Result<Vec<SpectrumReport>> {
    let mut out = Vec::new();
    let d1 = benchmark_hamiltonian()?;
    out.push(SpectrumReport {
        label: "two-state plant, vartheta=1".into(),
        spectrum: eigenvalues(&d1)?,
    });

    let plant2 = PlantModel::new(
        Mat::from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 4.438], &[0.0, -12.0, -24.0]])?,
        Mat::col(&[0.0, 0.0, 20.0]),
        Mat::col(&[1.0, 0.0, 0.0]),
        vec![0.0, 0.0, 0.0],
    )?;
    let w2 = CostWeights::new(Mat::identity(4), Mat::identity(1))?;
    for vartheta in [1.0, 100.0] {
        let sys = augment(&plant2, vartheta)?;
        let d = build_hamiltonian(&sys, &w2)?;
        out.push(SpectrumReport {
            label: format!("three-state plant, vartheta={vartheta}"),
            spectrum: eigenvalues(&d)?,
        });
    }
    Ok(out)
}

/// Zero every pipeline memory and restart the decaying kernels; wired to
/// reference-change events by the closed-loop runner.
pub fn reset_filters(fs: &mut FilterState, x_now: &[f64], t_now: f64) {
    fs.reset(x_now, t_now);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_signal_shapes() {
        let c = ReferenceSignal::Constant(2.0);
        assert_eq!(c.value(0.0), 2.0);
        assert_eq!(c.value(10.0), 2.0);
        let e = ReferenceSignal::Exponential { amplitude: 1.0, rate: 7.0 };
        assert!((e.value(1.0) - (-7.0f64).exp()).abs() < 1e-15);
        let p = ReferenceSignal::PiecewiseConstant(vec![(0.0, 1.0), (2.0, -1.0)]);
        assert_eq!(p.value(1.999), 1.0);
        assert_eq!(p.value(2.0), -1.0);
    }

    #[test]
    fn table_runs_quickly_and_is_complete() {
        let t0 = std::time::Instant::now();
        let cells = reproduce_table1(NormKind::Frobenius).unwrap();
        assert_eq!(cells.len(), 20);
        assert!(t0.elapsed().as_secs_f64() < 1.0);
    }

    #[test]
    fn spectra_report_labels() {
        let reports = reproduce_spectra().unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports[0].spectrum.eigenvalues.len(), 6);
        assert_eq!(reports[1].spectrum.eigenvalues.len(), 8);
    }
}

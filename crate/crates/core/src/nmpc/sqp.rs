//! Gauss-Newton SQP with an ℓ1 merit line search.
//!
//! The cost is quadratic in the decision variables, so its Hessian is
//! exact; only the curvature of the dynamics constraints is dropped.

use std::time::Instant;

use nalgebra::{Matrix6x2, Vector2, Vector3, Vector6};

use crate::dynamics::rk4_with_jacobians;
use crate::ControlInput;

use super::ocp::{OcpProblem, Trajectory};
use super::qp::{
    self, IneqRow, IpmSettings, MatVV, MatVX, MatXV, MatXX, Primal, QpStage, QpStatus, QpTerminal, StageQp, VecV, VecX,
};
use super::{OcpSolution, SolverStatus};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1.0 / 1024.0;

struct Linearization {
    next: Vec<Vector6<f64>>,
    a: Vec<MatXX>,
    b: Vec<Matrix6x2<f64>>,
}

struct Transcription<'a> {
    problem: &'a OcpProblem,
    scale: Vector2<f64>,
    psi_ref: f64,
}

impl<'a> Transcription<'a> {
    fn new(problem: &'a OcpProblem) -> Self {
        Self { problem, scale: problem.input_scale(), psi_ref: problem.psi_reference() }
    }

    fn to_primal(&self, t: &Trajectory) -> Primal {
        let v = t
            .inputs
            .iter()
            .zip(&t.slacks)
            .map(|(u, xi)| VecV::from([u[0] / self.scale[0], u[1] / self.scale[1], xi[0], xi[1], xi[2]]))
            .collect();
        let mut x = t.states.clone();
        x[0] = self.problem.x0.to_vector();
        Primal { x, v }
    }

    fn to_trajectory(&self, w: &Primal) -> Trajectory {
        let (lo, hi) = (&self.problem.params.input_lower, &self.problem.params.input_upper);
        Trajectory {
            states: w.x.clone(),
            inputs: w
                .v
                .iter()
                .map(|v| {
                    Vector2::new(
                        (v[0] * self.scale[0]).clamp(lo[0], hi[0]),
                        (v[1] * self.scale[1]).clamp(lo[1], hi[1]),
                    )
                })
                .collect(),
            slacks: w.v.iter().map(|v| Vector3::new(v[2], v[3], v[4])).collect(),
        }
    }

    fn linearize(&self, w: &Primal) -> Linearization {
        let p = self.problem;
        let d = p.disturbance.to_vector();
        let n = p.horizon;
        let mut lin = Linearization { next: Vec::with_capacity(n), a: Vec::with_capacity(n), b: Vec::with_capacity(n) };
        for k in 0..n {
            let u = Vector2::new(w.v[k][0] * self.scale[0], w.v[k][1] * self.scale[1]);
            let (next, a, b) = rk4_with_jacobians(&w.x[k], &u, &d, &p.params, p.dt);
            lin.next.push(next);
            lin.a.push(a);
            lin.b.push(b);
        }
        lin
    }

    /// Error selector rows: (state index, sign, offset) with e = sign·x + offset.
    fn error_terms(&self) -> [(usize, f64, f64); 3] {
        [(2, -1.0, self.psi_ref), (3, -1.0, self.problem.command.u_des), (5, 1.0, 0.0)]
    }

    fn cost_blocks(&self, weights: &Vector3<f64>) -> (MatXX, VecX) {
        let mut h = MatXX::zeros();
        let mut g = VecX::zeros();
        for (j, (idx, sign, offset)) in self.error_terms().into_iter().enumerate() {
            h[(idx, idx)] = 2.0 * weights[j];
            g[idx] = 2.0 * weights[j] * sign * offset;
        }
        (h, g)
    }

    fn state_bound_rows(&self) -> Vec<IneqRow> {
        let b = &self.problem.bounds;
        let mut rows = Vec::with_capacity(4);
        for (idx, lo, hi) in [(3, b.surge_min, b.surge_max), (5, -b.yaw_rate_max, b.yaw_rate_max)] {
            let mut e = VecX::zeros();
            e[idx] = 1.0;
            rows.push(IneqRow { ax: e, av: VecV::zeros(), b: hi });
            rows.push(IneqRow { ax: -e, av: VecV::zeros(), b: -lo });
        }
        rows
    }

    fn stage_rows(&self, k: usize) -> Vec<IneqRow> {
        let p = self.problem;
        let mut rows = Vec::with_capacity(17);
        for i in 0..2 {
            let mut e = VecV::zeros();
            e[i] = 1.0;
            rows.push(IneqRow { ax: VecX::zeros(), av: e, b: p.params.input_upper[i] / self.scale[i] });
            rows.push(IneqRow { ax: VecX::zeros(), av: -e, b: -p.params.input_lower[i] / self.scale[i] });
        }
        for (j, (idx, sign, offset)) in self.error_terms().into_iter().enumerate() {
            let mut ex = VecX::zeros();
            ex[idx] = sign;
            let mut exi = VecV::zeros();
            exi[2 + j] = 1.0;
            // ±e − ξ ≤ 0
            rows.push(IneqRow { ax: ex, av: -exi, b: -offset });
            rows.push(IneqRow { ax: -ex, av: -exi, b: offset });
            rows.push(IneqRow { ax: VecX::zeros(), av: -exi, b: 0.0 });
        }
        if k > 0 {
            rows.extend(self.state_bound_rows());
        }
        rows
    }

    fn build_qp(&self, w: &Primal, lin: &Linearization) -> StageQp {
        let p = self.problem;
        let q = p.weights.q_reduced();
        let wr = p.weights.w_reduced();
        let (hxx, gx) = self.cost_blocks(&q);
        let mut hvv = MatVV::zeros();
        hvv[(0, 0)] = 2.0 * p.weights.r[0] * self.scale[0] * self.scale[0];
        hvv[(1, 1)] = 2.0 * p.weights.r[1] * self.scale[1] * self.scale[1];
        for j in 0..3 {
            hvv[(2 + j, 2 + j)] = 2.0 * wr[j];
        }
        let stages = (0..p.horizon)
            .map(|k| {
                let mut b = MatXV::zeros();
                for i in 0..2 {
                    b.set_column(i, &(lin.b[k].column(i) * self.scale[i]));
                }
                let c = lin.next[k] - lin.a[k] * w.x[k] - b * w.v[k];
                QpStage {
                    hxx,
                    hvv,
                    hvx: MatVX::zeros(),
                    gx,
                    gv: VecV::zeros(),
                    a: lin.a[k],
                    b,
                    c,
                    rows: self.stage_rows(k),
                }
            })
            .collect();
        let (th, tg) = self.cost_blocks(&(p.terminal_scale * (q + wr)));
        StageQp {
            x0: p.x0.to_vector(),
            stages,
            terminal: QpTerminal { hxx: th, gx: tg, rows: self.state_bound_rows() },
        }
    }

    fn defect_l1(&self, w: &Primal) -> (f64, f64) {
        let (mut l1, mut max) = (0.0, 0.0f64);
        for k in 0..self.problem.horizon {
            let u = Vector2::new(w.v[k][0] * self.scale[0], w.v[k][1] * self.scale[1]);
            let d = self.problem.shoot(&w.x[k], &u) - w.x[k + 1];
            l1 += d.abs().sum();
            max = max.max(d.amax());
        }
        (l1, max)
    }

    fn merit(&self, qp: &StageQp, w: &Primal, rho: f64) -> f64 {
        let j = self.problem.objective(&self.to_trajectory(w));
        j + rho * (self.defect_l1(w).0 + qp::total_violation(qp, w))
    }
}

fn axpy(w: &Primal, alpha: f64, d: &Primal) -> Primal {
    Primal {
        x: w.x.iter().zip(&d.x).map(|(a, b)| a + alpha * b).collect(),
        v: w.v.iter().zip(&d.v).map(|(a, b)| a + alpha * b).collect(),
    }
}

fn difference(a: &Primal, b: &Primal) -> Primal {
    Primal {
        x: a.x.iter().zip(&b.x).map(|(a, b)| a - b).collect(),
        v: a.v.iter().zip(&b.v).map(|(a, b)| a - b).collect(),
    }
}

fn multiplier_norm(lambda: &[VecX], z: &[Vec<f64>]) -> f64 {
    let l = lambda.iter().fold(0.0f64, |m, v| m.max(v.amax()));
    z.iter().flatten().fold(l, |m, v| m.max(v.abs()))
}

/// Warm-start trajectory from a previous plan: shifted one step, last entry
/// duplicated, the new initial state spliced in and headings moved by a
/// whole number of turns to sit next to it.
pub fn shifted_guess(prev: &OcpSolution, problem: &OcpProblem) -> Option<Trajectory> {
    let n = problem.horizon;
    if prev.inputs.len() != n || prev.states.len() != n + 1 {
        return None;
    }
    let x0 = problem.x0.to_vector();
    let turn = 2.0 * std::f64::consts::PI;
    let offset = turn * ((x0[2] - prev.states[1][2]) / turn).round();
    let mut states = Vec::with_capacity(n + 1);
    states.push(x0);
    for k in 2..=n {
        let mut x = prev.states[k];
        x[2] += offset;
        states.push(x);
    }
    states.push(*states.last().unwrap_or(&x0));
    let mut inputs: Vec<Vector2<f64>> = prev.inputs.iter().skip(1).map(|u| u.to_vector()).collect();
    inputs.push(prev.inputs[n - 1].to_vector());
    let slacks = states[..n].iter().map(|x| problem.tracking_error(x).abs()).collect();
    Some(Trajectory { states, inputs, slacks })
}

/// Solves the OCP from the shifted warm start when one is given and fits,
/// otherwise from the cold-start guess.
pub fn solve(problem: &OcpProblem, warm_start: Option<&OcpSolution>) -> OcpSolution {
    let started = Instant::now();
    let guess = warm_start.and_then(|w| shifted_guess(w, problem)).unwrap_or_else(|| problem.cold_start());
    let mut sol = solve_from(problem, &guess);
    sol.solve_time = started.elapsed().as_secs_f64();
    sol
}

/// Solves from an explicit initial trajectory.
pub fn solve_from(problem: &OcpProblem, guess: &Trajectory) -> OcpSolution {
    let tr = Transcription::new(problem);
    let settings = &problem.settings;
    let ipm = IpmSettings::default();

    let mut w = tr.to_primal(guess);
    let mut lin = tr.linearize(&w);
    let mut qp_now = tr.build_qp(&w, &lin);
    let mut mults: Option<(Vec<VecX>, Vec<Vec<f64>>)> = None;
    let mut rho = 0.0f64;
    let mut status = SolverStatus::MaxIter;
    let mut iterations = 0;
    let mut stationarity = f64::INFINITY;

    loop {
        if let Some((lambda, z)) = &mults {
            let kkt = qp::kkt_residual(&qp_now, &w, lambda, z);
            let scale = kkt.gradient_norm.max(1.0);
            stationarity = kkt.stationarity / scale;
            if kkt.defect <= settings.tol_feasibility
                && kkt.violation <= settings.tol_feasibility
                && kkt.stationarity <= settings.tol_stationarity * scale
                && kkt.complementarity <= settings.tol_stationarity * scale
            {
                status = SolverStatus::Converged;
                break;
            }
        }
        if iterations >= settings.max_iter {
            break;
        }
        iterations += 1;

        let sub = qp::solve(&qp_now, &w, &ipm);
        if sub.status != QpStatus::Solved {
            status = SolverStatus::Infeasible;
            break;
        }
        let dw = difference(&sub.primal, &w);
        rho = rho.max(1.1 * multiplier_norm(&sub.lambda, &sub.z) + 1e-8);

        let phi0 = tr.merit(&qp_now, &w, rho);
        let infeas = tr.defect_l1(&w).0 + qp::total_violation(&qp_now, &w);
        let slope = qp::objective_slope(&qp_now, &w, &dw) - rho * infeas;
        let mut alpha = 1.0;
        let mut trial = sub.primal.clone();
        if slope < -1e-14 * (1.0 + phi0.abs()) {
            while alpha > MIN_STEP && tr.merit(&qp_now, &trial, rho) > phi0 + ARMIJO * alpha * slope {
                alpha *= 0.5;
                trial = axpy(&w, alpha, &dw);
            }
        }
        if !trial.x.iter().all(|x| x.iter().all(|v| v.is_finite())) {
            status = SolverStatus::Infeasible;
            break;
        }
        w = trial;
        lin = tr.linearize(&w);
        qp_now = tr.build_qp(&w, &lin);
        mults = Some((sub.lambda, sub.z));
    }

    let traj = tr.to_trajectory(&w);
    let max_defect = tr.defect_l1(&w).1;
    OcpSolution {
        objective: problem.objective(&traj),
        inputs: traj.inputs.iter().map(|u| ControlInput::new(u[0], u[1])).collect(),
        states: traj.states,
        slacks: traj.slacks,
        status,
        solve_time: 0.0,
        iterations,
        max_defect,
        stationarity,
    }
}

/// The QP solved at the first SQP iteration from `guess`, exposed for
/// verification against independent solvers.
pub fn first_subproblem(problem: &OcpProblem, guess: &Trajectory) -> (StageQp, Trajectory) {
    let tr = Transcription::new(problem);
    let w = tr.to_primal(guess);
    let lin = tr.linearize(&w);
    let qp_now = tr.build_qp(&w, &lin);
    let sol = qp::solve(&qp_now, &w, &IpmSettings::default());
    (qp_now, tr.to_trajectory(&sol.primal))
}

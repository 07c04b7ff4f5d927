//! Stage-wise convex QP solved by a Mehrotra predictor-corrector
//! interior-point method. Each Newton system is an equality-constrained LQ
//! problem, solved by a Riccati recursion in O(N).
//!
//! ```text
//! min  Σ_k ½ [x;v]ᵀ H_k [x;v] + g_kᵀ [x;v]  +  ½ x_Nᵀ H_N x_N + g_Nᵀ x_N
//! s.t. x_{k+1} = A_k x_k + B_k v_k + c_k,   x_0 fixed
//!      ax·x_k + av·v_k ≤ b                   (rows of stage k)
//! ```

use nalgebra::{Cholesky, SMatrix, SVector};

pub const NX: usize = 6;
pub const NV: usize = 5;

pub type VecX = SVector<f64, NX>;
pub type VecV = SVector<f64, NV>;
pub type MatXX = SMatrix<f64, NX, NX>;
pub type MatVV = SMatrix<f64, NV, NV>;
pub type MatVX = SMatrix<f64, NV, NX>;
pub type MatXV = SMatrix<f64, NX, NV>;

/// `ax·x + av·v ≤ b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IneqRow {
    pub ax: VecX,
    pub av: VecV,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpStage {
    pub hxx: MatXX,
    pub hvv: MatVV,
    pub hvx: MatVX,
    pub gx: VecX,
    pub gv: VecV,
    pub a: MatXX,
    pub b: MatXV,
    pub c: VecX,
    pub rows: Vec<IneqRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpTerminal {
    pub hxx: MatXX,
    pub gx: VecX,
    /// Only `ax` and `b` are used.
    pub rows: Vec<IneqRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageQp {
    pub x0: VecX,
    pub stages: Vec<QpStage>,
    pub terminal: QpTerminal,
}

/// Primal iterate: `x` holds `N + 1` states (the first is `x0`), `v` holds `N` stage controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Primal {
    pub x: Vec<VecX>,
    pub v: Vec<VecV>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub primal: Primal,
    /// `lambda[k]` multiplies the dynamics constraint producing `x_k` (k ≥ 1).
    pub lambda: Vec<VecX>,
    /// Inequality multipliers per stage, terminal last.
    pub z: Vec<Vec<f64>>,
    pub status: QpStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    pub max_iter: usize,
    /// Residual tolerance, relative to the data scale.
    pub tol: f64,
    /// Average complementarity tolerance, relative to the gradient scale.
    pub tol_mu: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self { max_iter: 80, tol: 1e-10, tol_mu: 1e-12 }
    }
}

impl StageQp {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    fn rows(&self, k: usize) -> &[IneqRow] {
        if k < self.stages.len() {
            &self.stages[k].rows
        } else {
            &self.terminal.rows
        }
    }

    /// Row value `ax·x + av·v − b` at stage `k`.
    fn row_values(&self, k: usize, w: &Primal, out: &mut Vec<f64>) {
        out.clear();
        let x = &w.x[k];
        if k < self.stages.len() {
            let v = &w.v[k];
            out.extend(self.stages[k].rows.iter().map(|r| r.ax.dot(x) + r.av.dot(v) - r.b));
        } else {
            out.extend(self.terminal.rows.iter().map(|r| r.ax.dot(x) - r.b));
        }
    }

    /// Objective value.
    pub fn objective(&self, w: &Primal) -> f64 {
        let mut j = 0.0;
        for (k, st) in self.stages.iter().enumerate() {
            let (x, v) = (&w.x[k], &w.v[k]);
            j += 0.5 * x.dot(&(st.hxx * x)) + 0.5 * v.dot(&(st.hvv * v)) + v.dot(&(st.hvx * x));
            j += st.gx.dot(x) + st.gv.dot(v);
        }
        let xn = &w.x[self.stages.len()];
        j + 0.5 * xn.dot(&(self.terminal.hxx * xn)) + self.terminal.gx.dot(xn)
    }
}

/// Per-stage factorisation reused by predictor and corrector.
struct Factor {
    chol: Vec<Cholesky<f64, nalgebra::Const<NV>>>,
    gain: Vec<MatVX>,
    qvx: Vec<MatVX>,
    p: Vec<MatXX>,
}

struct Direction {
    dx: Vec<VecX>,
    dv: Vec<VecV>,
    lambda: Vec<VecX>,
    ds: Vec<Vec<f64>>,
    dz: Vec<Vec<f64>>,
}

/// Solves the QP from the primal starting point `start`.
pub fn solve(qp: &StageQp, start: &Primal, settings: &IpmSettings) -> QpSolution {
    let n = qp.horizon();
    let mut w = start.clone();
    w.x[0] = qp.x0;
    let mut lambda = vec![VecX::zeros(); n + 1];

    let mut buf = Vec::new();
    let mut s: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        qp.row_values(k, &w, &mut buf);
        s.push(buf.iter().map(|r| (-r).max(1.0)).collect());
        z.push(vec![1.0; buf.len()]);
    }
    let m: usize = s.iter().map(|v| v.len()).sum();
    let scale = 1.0 + gradient_scale(qp);

    let mut status = QpStatus::MaxIterations;
    let mut iterations = 0;
    for it in 0..settings.max_iter {
        iterations = it;
        let res = residuals(qp, &w, &lambda, &s, &z);
        let mu = if m > 0 { dot_all(&s, &z) / m as f64 } else { 0.0 };
        if res.dual <= settings.tol * scale && res.primal <= settings.tol * (1.0 + res.rhs_scale) && mu <= settings.tol_mu * scale {
            status = QpStatus::Solved;
            break;
        }

        let Some(factor) = factorize(qp, &s, &z) else {
            status = QpStatus::NumericalFailure;
            break;
        };

        // Predictor.
        let rc: Vec<Vec<f64>> = s.iter().zip(&z).map(|(s, z)| s.iter().zip(z).map(|(a, b)| a * b).collect()).collect();
        let aff = direction(qp, &factor, &w, &res, &s, &z, &rc);
        let alpha_aff = max_step(&s, &z, &aff, 1.0);
        let mu_aff = if m > 0 {
            let mut acc = 0.0;
            for k in 0..=n {
                for i in 0..s[k].len() {
                    acc += (s[k][i] + alpha_aff * aff.ds[k][i]) * (z[k][i] + alpha_aff * aff.dz[k][i]);
                }
            }
            acc / m as f64
        } else {
            0.0
        };
        let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).min(1.0) } else { 0.0 };

        // Corrector.
        let rc: Vec<Vec<f64>> = (0..=n)
            .map(|k| (0..s[k].len()).map(|i| s[k][i] * z[k][i] + aff.ds[k][i] * aff.dz[k][i] - sigma * mu).collect())
            .collect();
        let dir = direction(qp, &factor, &w, &res, &s, &z, &rc);
        let alpha = max_step(&s, &z, &dir, 0.995);
        if !alpha.is_finite() || alpha <= 0.0 {
            status = QpStatus::NumericalFailure;
            break;
        }

        for k in 0..=n {
            if k > 0 {
                w.x[k] += alpha * dir.dx[k];
            }
            if k < n {
                w.v[k] += alpha * dir.dv[k];
            }
            let dl = dir.lambda[k] - lambda[k];
            lambda[k] += alpha * dl;
            for i in 0..s[k].len() {
                s[k][i] += alpha * dir.ds[k][i];
                z[k][i] += alpha * dir.dz[k][i];
            }
        }
        iterations = it + 1;
        if !w.x.iter().all(|x| x.iter().all(|v| v.is_finite())) {
            status = QpStatus::NumericalFailure;
            break;
        }
    }
    QpSolution { primal: w, lambda, z, status, iterations }
}

fn gradient_scale(qp: &StageQp) -> f64 {
    let mut g: f64 = qp.terminal.gx.amax();
    for st in &qp.stages {
        g = g.max(st.gx.amax()).max(st.gv.amax());
    }
    g
}

fn dot_all(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()).sum()
}

struct Residuals {
    /// `A x + B v + c − x_next`.
    rp: Vec<VecX>,
    /// `C w + s − b`.
    ri: Vec<Vec<f64>>,
    dual: f64,
    primal: f64,
    rhs_scale: f64,
}

fn residuals(qp: &StageQp, w: &Primal, lambda: &[VecX], s: &[Vec<f64>], z: &[Vec<f64>]) -> Residuals {
    let n = qp.horizon();
    let mut rp = vec![VecX::zeros(); n];
    let mut ri = Vec::with_capacity(n + 1);
    let mut dual: f64 = 0.0;
    let mut primal: f64 = 0.0;
    let mut rhs_scale: f64 = 0.0;
    for k in 0..=n {
        let x = &w.x[k];
        let rows = qp.rows(k);
        let mut rik = Vec::with_capacity(rows.len());
        if k < n {
            let st = &qp.stages[k];
            let v = &w.v[k];
            let mut gx = st.hxx * x + st.hvx.transpose() * v + st.gx + st.a.transpose() * lambda[k + 1];
            let mut gv = st.hvv * v + st.hvx * x + st.gv + st.b.transpose() * lambda[k + 1];
            if k > 0 {
                gx -= lambda[k];
            }
            for (i, row) in rows.iter().enumerate() {
                gx += row.ax * z[k][i];
                gv += row.av * z[k][i];
                rik.push(row.ax.dot(x) + row.av.dot(v) + s[k][i] - row.b);
                rhs_scale = rhs_scale.max(row.b.abs());
            }
            rp[k] = st.a * x + st.b * v + st.c - w.x[k + 1];
            primal = primal.max(rp[k].amax());
            rhs_scale = rhs_scale.max(st.c.amax());
            if k > 0 {
                dual = dual.max(gx.amax());
            }
            dual = dual.max(gv.amax());
        } else {
            let mut gx = qp.terminal.hxx * x + qp.terminal.gx - lambda[k];
            for (i, row) in rows.iter().enumerate() {
                gx += row.ax * z[k][i];
                rik.push(row.ax.dot(x) + s[k][i] - row.b);
                rhs_scale = rhs_scale.max(row.b.abs());
            }
            dual = dual.max(gx.amax());
        }
        primal = rik.iter().fold(primal, |m, r| m.max(r.abs()));
        ri.push(rik);
    }
    Residuals { rp, ri, dual, primal, rhs_scale }
}

fn factorize(qp: &StageQp, s: &[Vec<f64>], z: &[Vec<f64>]) -> Option<Factor> {
    let n = qp.horizon();
    let mut p = vec![MatXX::zeros(); n + 1];
    let mut chol = Vec::with_capacity(n);
    let mut gain = vec![MatVX::zeros(); n];
    let mut qvx_all = vec![MatVX::zeros(); n];

    let mut pn = qp.terminal.hxx;
    for (i, row) in qp.terminal.rows.iter().enumerate() {
        pn += row.ax * row.ax.transpose() * (z[n][i] / s[n][i]);
    }
    p[n] = pn;

    for k in (0..n).rev() {
        let st = &qp.stages[k];
        let mut hxx = st.hxx;
        let mut hvv = st.hvv;
        let mut hvx = st.hvx;
        for (i, row) in st.rows.iter().enumerate() {
            let sig = z[k][i] / s[k][i];
            hxx += row.ax * row.ax.transpose() * sig;
            hvv += row.av * row.av.transpose() * sig;
            hvx += row.av * row.ax.transpose() * sig;
        }
        let pb = p[k + 1] * st.b;
        let qvv = hvv + st.b.transpose() * pb + MatVV::identity() * 1e-12;
        let qvx = hvx + pb.transpose() * st.a;
        let qxx = hxx + st.a.transpose() * p[k + 1] * st.a;
        let c = Cholesky::new(qvv)?;
        let k_gain = -c.solve(&qvx);
        let pk = qxx + qvx.transpose() * k_gain;
        p[k] = 0.5 * (pk + pk.transpose());
        gain[k] = k_gain;
        qvx_all[k] = qvx;
        chol.push(c);
    }
    chol.reverse();
    Some(Factor { chol, gain, qvx: qvx_all, p })
}

/// Newton direction for complementarity right-hand side `rc`.
fn direction(
    qp: &StageQp,
    f: &Factor,
    w: &Primal,
    res: &Residuals,
    s: &[Vec<f64>],
    z: &[Vec<f64>],
    rc: &[Vec<f64>],
) -> Direction {
    let n = qp.horizon();
    // Linear terms of the LQ subproblem: objective gradient plus the
    // condensed inequality terms. Costates come out of the recursion whole.
    let mut qx = vec![VecX::zeros(); n + 1];
    let mut qv = vec![VecV::zeros(); n];
    for k in 0..=n {
        let rows = qp.rows(k);
        let x = &w.x[k];
        let mut tx = if k < n {
            let st = &qp.stages[k];
            st.hxx * x + st.hvx.transpose() * w.v[k] + st.gx
        } else {
            qp.terminal.hxx * x + qp.terminal.gx
        };
        let mut tv = if k < n {
            let st = &qp.stages[k];
            st.hvv * w.v[k] + st.hvx * x + st.gv
        } else {
            VecV::zeros()
        };
        for (i, row) in rows.iter().enumerate() {
            let corr = z[k][i] + (z[k][i] * res.ri[k][i] - rc[k][i]) / s[k][i];
            tx += row.ax * corr;
            if k < n {
                tv += row.av * corr;
            }
        }
        qx[k] = tx;
        if k < n {
            qv[k] = tv;
        }
    }

    // Backward sweep for the affine part of the value function.
    let mut pvec = vec![VecX::zeros(); n + 1];
    let mut kff = vec![VecV::zeros(); n];
    pvec[n] = qx[n];
    for k in (0..n).rev() {
        let st = &qp.stages[k];
        let t = f.p[k + 1] * res.rp[k] + pvec[k + 1];
        let qvk = qv[k] + st.b.transpose() * t;
        let qxk = qx[k] + st.a.transpose() * t;
        let ff = -f.chol[k].solve(&qvk);
        pvec[k] = qxk + f.qvx[k].transpose() * ff;
        kff[k] = ff;
    }

    // Forward rollout.
    let mut dx = vec![VecX::zeros(); n + 1];
    let mut dv = vec![VecV::zeros(); n];
    let mut lambda = vec![VecX::zeros(); n + 1];
    for k in 0..n {
        let st = &qp.stages[k];
        dv[k] = f.gain[k] * dx[k] + kff[k];
        dx[k + 1] = st.a * dx[k] + st.b * dv[k] + res.rp[k];
        lambda[k + 1] = f.p[k + 1] * dx[k + 1] + pvec[k + 1];
    }

    let mut ds = Vec::with_capacity(n + 1);
    let mut dz = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let rows = qp.rows(k);
        let mut dsk = Vec::with_capacity(rows.len());
        let mut dzk = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let cdw = row.ax.dot(&dx[k]) + if k < n { row.av.dot(&dv[k]) } else { 0.0 };
            let dsi = -res.ri[k][i] - cdw;
            let dzi = (-rc[k][i] - z[k][i] * dsi) / s[k][i];
            dsk.push(dsi);
            dzk.push(dzi);
        }
        ds.push(dsk);
        dz.push(dzk);
    }
    Direction { dx, dv, lambda, ds, dz }
}

fn max_step(s: &[Vec<f64>], z: &[Vec<f64>], d: &Direction, fraction: f64) -> f64 {
    let mut alpha: f64 = 1.0;
    for k in 0..s.len() {
        for i in 0..s[k].len() {
            if d.ds[k][i] < 0.0 {
                alpha = alpha.min(-fraction * s[k][i] / d.ds[k][i]);
            }
            if d.dz[k][i] < 0.0 {
                alpha = alpha.min(-fraction * z[k][i] / d.dz[k][i]);
            }
        }
    }
    alpha
}

/// First-order optimality measures of `(w, lambda, z)` for this QP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    pub stationarity: f64,
    /// `‖H w + g‖∞` over the free variables.
    pub gradient_norm: f64,
    pub defect: f64,
    pub violation: f64,
    pub complementarity: f64,
}

pub fn kkt_residual(qp: &StageQp, w: &Primal, lambda: &[VecX], z: &[Vec<f64>]) -> KktResidual {
    let n = qp.horizon();
    let mut out = KktResidual { stationarity: 0.0, gradient_norm: 0.0, defect: 0.0, violation: 0.0, complementarity: 0.0 };
    let mut row_check = |k: usize, i: usize, value: f64| {
        out.violation = out.violation.max(value);
        out.complementarity = out.complementarity.max((z[k][i] * value).abs());
    };
    let mut grads = Vec::with_capacity(2 * n + 1);
    for k in 0..=n {
        let x = &w.x[k];
        if k < n {
            let st = &qp.stages[k];
            let v = &w.v[k];
            let gx0 = st.hxx * x + st.hvx.transpose() * v + st.gx;
            let gv0 = st.hvv * v + st.hvx * x + st.gv;
            let mut gx = gx0 + st.a.transpose() * lambda[k + 1];
            let mut gv = gv0 + st.b.transpose() * lambda[k + 1];
            if k > 0 {
                gx -= lambda[k];
            }
            for (i, row) in st.rows.iter().enumerate() {
                gx += row.ax * z[k][i];
                gv += row.av * z[k][i];
                row_check(k, i, row.ax.dot(x) + row.av.dot(v) - row.b);
            }
            let d = st.a * x + st.b * v + st.c - w.x[k + 1];
            out.defect = out.defect.max(d.amax());
            if k > 0 {
                grads.push((gx0.amax(), gx.amax()));
            }
            grads.push((gv0.amax(), gv.amax()));
        } else {
            let gx0 = qp.terminal.hxx * x + qp.terminal.gx;
            let mut gx = gx0 - lambda[k];
            for (i, row) in qp.terminal.rows.iter().enumerate() {
                gx += row.ax * z[k][i];
                row_check(k, i, row.ax.dot(x) - row.b);
            }
            grads.push((gx0.amax(), gx.amax()));
        }
    }
    for (g0, g) in grads {
        out.gradient_norm = out.gradient_norm.max(g0);
        out.stationarity = out.stationarity.max(g);
    }
    out.violation = out.violation.max(0.0);
    out
}

/// Directional derivative of the QP objective at `w` along `dw`.
pub fn objective_slope(qp: &StageQp, w: &Primal, dw: &Primal) -> f64 {
    let n = qp.horizon();
    let mut s = 0.0;
    for k in 0..=n {
        let x = &w.x[k];
        if k < n {
            let st = &qp.stages[k];
            let v = &w.v[k];
            let gv = st.hvv * v + st.hvx * x + st.gv;
            s += gv.dot(&dw.v[k]);
            if k > 0 {
                s += (st.hxx * x + st.hvx.transpose() * v + st.gx).dot(&dw.x[k]);
            }
        } else {
            s += (qp.terminal.hxx * x + qp.terminal.gx).dot(&dw.x[k]);
        }
    }
    s
}

/// Largest violation `max(0, ax·x + av·v − b)` summed over all rows.
pub fn total_violation(qp: &StageQp, w: &Primal) -> f64 {
    let mut buf = Vec::new();
    let mut total = 0.0;
    for k in 0..=qp.horizon() {
        qp.row_values(k, w, &mut buf);
        total += buf.iter().map(|r| r.max(0.0)).sum::<f64>();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    // Scalar double integrator with input box: compare against a dense
    // projected-gradient solve of the condensed problem.
    fn toy(n: usize, umax: f64) -> StageQp {
        let mut a = MatXX::identity();
        a[(0, 1)] = 0.1;
        let mut b = MatXV::zeros();
        b[(1, 0)] = 0.1;
        let mut hxx = MatXX::zeros();
        hxx[(0, 0)] = 2.0;
        hxx[(1, 1)] = 0.2;
        let mut hvv = MatVV::identity() * 1e-2;
        hvv[(0, 0)] = 0.02;
        let mut up = VecV::zeros();
        up[0] = 1.0;
        let rows = vec![IneqRow { ax: VecX::zeros(), av: up, b: umax }, IneqRow { ax: VecX::zeros(), av: -up, b: umax }];
        let stage = QpStage {
            hxx,
            hvv,
            hvx: MatVX::zeros(),
            gx: VecX::zeros(),
            gv: VecV::zeros(),
            a,
            b,
            c: VecX::zeros(),
            rows,
        };
        let mut x0 = VecX::zeros();
        x0[0] = 1.0;
        StageQp { x0, stages: vec![stage; n], terminal: QpTerminal { hxx: hxx * 10.0, gx: VecX::zeros(), rows: vec![] } }
    }

    fn rollout(qp: &StageQp, u: &[f64]) -> Primal {
        let mut x = vec![qp.x0];
        let mut v = Vec::new();
        for (k, st) in qp.stages.iter().enumerate() {
            let mut vk = VecV::zeros();
            vk[0] = u[k];
            x.push(st.a * x[k] + st.b * vk + st.c);
            v.push(vk);
        }
        Primal { x, v }
    }

    fn dense_oracle(qp: &StageQp, umax: f64) -> Vec<f64> {
        // Projected gradient on the condensed objective with a numerical gradient.
        let n = qp.horizon();
        let mut u = vec![0.0; n];
        let f = |u: &[f64]| qp.objective(&rollout(qp, u));
        for _ in 0..20_000 {
            let mut g = vec![0.0; n];
            for i in 0..n {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[i] += 1e-6;
                dn[i] -= 1e-6;
                g[i] = (f(&up) - f(&dn)) / 2e-6;
            }
            for i in 0..n {
                u[i] = (u[i] - 0.5 * g[i]).clamp(-umax, umax);
            }
        }
        u
    }

    #[test]
    fn matches_dense_oracle_with_active_bounds() {
        let umax = 2.0;
        let qp = toy(8, umax);
        let start = rollout(&qp, &[0.0; 8]);
        let sol = solve(&qp, &start, &IpmSettings::default());
        assert_eq!(sol.status, QpStatus::Solved);
        let oracle = dense_oracle(&qp, umax);
        assert!(oracle.iter().any(|u| (u.abs() - umax).abs() < 1e-9), "bounds should be active");
        for k in 0..8 {
            assert!((sol.primal.v[k][0] - oracle[k]).abs() < 1e-5, "k={k}: {} vs {}", sol.primal.v[k][0], oracle[k]);
        }
        let kkt = kkt_residual(&qp, &sol.primal, &sol.lambda, &sol.z);
        assert!(kkt.stationarity < 1e-8 && kkt.defect < 1e-10 && kkt.violation == 0.0);
    }

    #[test]
    fn infeasible_start_reaches_dynamics() {
        let qp = toy(5, 10.0);
        let mut start = rollout(&qp, &[0.0; 5]);
        for x in start.x.iter_mut().skip(1) {
            x[0] += 3.0;
        }
        let sol = solve(&qp, &start, &IpmSettings::default());
        assert_eq!(sol.status, QpStatus::Solved);
        let kkt = kkt_residual(&qp, &sol.primal, &sol.lambda, &sol.z);
        assert!(kkt.defect < 1e-9);
    }
}

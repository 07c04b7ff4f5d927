#![allow(dead_code)]

use nalgebra::{Matrix2, Vector2, Vector3, Vector6};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use seanav::dynamics::rk4_with_jacobians;
use seanav::guidance::GuidanceMode;
use seanav::nmpc::{build_ocp, NmpcConfig, OcpProblem, OcpWeights, Trajectory};
use seanav::{DisturbanceVector, GuidanceCommand, SolverStatus, VesselParams, VesselState};

pub fn cmd(psi_des: f64, u_des: f64) -> GuidanceCommand {
    GuidanceCommand { psi_des, u_des, mu: 0.0, alpha: 0.0, mode: GuidanceMode::PathFollow, d_min: f64::INFINITY }
}

pub fn problem(x0: VesselState, c: GuidanceCommand, d: DisturbanceVector, cfg: &NmpcConfig) -> OcpProblem {
    let w = OcpWeights::from_config(cfg, c.mu);
    build_ocp(&x0, &c, &d, &w, &VesselParams::default(), cfg, 7.0).unwrap()
}

pub fn check_solution(p: &OcpProblem, s: &seanav::OcpSolution) {
    assert_eq!(s.status, SolverStatus::Converged);
    assert!(s.max_defect <= 1e-6, "defect {}", s.max_defect);
    let (lo, hi) = (&p.params.input_lower, &p.params.input_upper);
    for u in &s.inputs {
        assert!(u.tau_u >= lo[0] && u.tau_u <= hi[0] && u.tau_r >= lo[1] && u.tau_r <= hi[1]);
    }
    for xi in &s.slacks {
        assert!(xi.iter().all(|v| *v >= 0.0));
    }
    for x in &s.states[1..] {
        assert!(x[3] <= p.bounds.surge_max && x[3] >= p.bounds.surge_min);
        assert!(x[5].abs() <= p.bounds.yaw_rate_max);
    }
}

/// Dense oracle for the N = 1 subproblem linearised at the input `u_bar`.
///
/// With N = 1 the slack is pinned by the fixed initial state, so only the two
/// inputs are free. Every active set of at most two of the eight linear
/// constraints is enumerated and the cheapest KKT-consistent point kept.
pub fn dense_oracle(p: &OcpProblem, u_bar: Vector2<f64>) -> Vector2<f64> {
    let x0 = p.x0.to_vector();
    let (next, _, bm) = rk4_with_jacobians(&x0, &u_bar, &p.disturbance.to_vector(), &p.params, p.dt);
    let c0 = next - bm * u_bar;
    let q = p.weights.q_reduced();
    let w = p.weights.w_reduced();
    let cw = p.terminal_scale * (q + w);
    let psi_ref = p.psi_reference();
    let terms = [(2usize, -1.0, psi_ref), (3, -1.0, p.command.u_des), (5, 1.0, 0.0)];
    let mut h = Matrix2::from_diagonal(&(2.0 * p.weights.r));
    let mut f = Vector2::zeros();
    for (j, (idx, s, off)) in terms.into_iter().enumerate() {
        let row = Vector2::new(bm[(idx, 0)], bm[(idx, 1)]);
        h += 2.0 * cw[j] * row * row.transpose();
        f += 2.0 * cw[j] * (s * c0[idx] + off) * s * row;
    }
    let (lo, hi) = (p.params.input_lower, p.params.input_upper);
    let b = &p.bounds;
    let surge = Vector2::new(bm[(3, 0)], bm[(3, 1)]);
    let yaw = Vector2::new(bm[(5, 0)], bm[(5, 1)]);
    let g: Vec<(Vector2<f64>, f64)> = vec![
        (Vector2::new(1.0, 0.0), hi[0]),
        (Vector2::new(-1.0, 0.0), -lo[0]),
        (Vector2::new(0.0, 1.0), hi[1]),
        (Vector2::new(0.0, -1.0), -lo[1]),
        (surge, b.surge_max - c0[3]),
        (-surge, c0[3] - b.surge_min),
        (yaw, b.yaw_rate_max - c0[5]),
        (-yaw, b.yaw_rate_max + c0[5]),
    ];
    let cost = |u: &Vector2<f64>| 0.5 * u.dot(&(h * u)) + f.dot(u);
    let feasible = |u: &Vector2<f64>| g.iter().all(|(a, b)| a.dot(u) <= b + 1e-9);

    let mut candidates: Vec<Vector2<f64>> = Vec::new();
    if let Some(u) = h.lu().solve(&(-f)) {
        candidates.push(u);
    }
    for i in 0..g.len() {
        // min ½uᵀHu + fᵀu  s.t. aᵀu = b
        let (a, bi) = g[i];
        let hinv = h.try_inverse().unwrap();
        let lam = (a.dot(&(hinv * (-f))) - bi) / a.dot(&(hinv * a));
        let u = hinv * (-f - lam * a);
        if lam >= -1e-12 {
            candidates.push(u);
        }
        for k in (i + 1)..g.len() {
            let m = Matrix2::new(g[i].0[0], g[i].0[1], g[k].0[0], g[k].0[1]);
            if let Some(u) = m.lu().solve(&Vector2::new(g[i].1, g[k].1)) {
                candidates.push(u);
            }
        }
    }
    candidates
        .into_iter()
        .filter(|u| feasible(u))
        .min_by(|a, b| cost(a).partial_cmp(&cost(b)).unwrap())
        .expect("some vertex is feasible")
}

pub fn random_trajectory(p: &OcpProblem, rng: &mut ChaCha8Rng) -> Trajectory {
    let n = p.horizon;
    Trajectory {
        states: (0..=n)
            .map(|_| {
                Vector6::new(
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(0.0..9.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.3..0.3),
                )
            })
            .collect(),
        inputs: (0..n).map(|_| Vector2::new(rng.random_range(-4000.0..12000.0), rng.random_range(-4000.0..4000.0))).collect(),
        slacks: (0..n).map(|_| Vector3::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..0.5))).collect(),
    }
}

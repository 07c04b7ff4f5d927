mod common;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{check_solution, cmd, dense_oracle, problem, random_trajectory};
use seanav::nmpc::{solve, solve_from, sqp, NmpcConfig, OcpProblem, Trajectory};
use seanav::{DisturbanceVector, SolverStatus, VesselParams, VesselState};

#[test]
fn at_rest_on_target_stays_put() {
    let cfg = NmpcConfig::default();
    let x0 = VesselState::new(10.0, -5.0, 0.3, 0.0, 0.0, 0.0);
    let p = problem(x0, cmd(0.3, 0.0), DisturbanceVector::ZERO, &cfg);
    let s = solve(&p, None);
    check_solution(&p, &s);
    assert!(s.objective.abs() < 1e-5, "objective {}", s.objective);
    for u in &s.inputs {
        assert!(u.tau_u.abs() < 1e-3 && u.tau_r.abs() < 1e-3, "{u:?}");
    }
}

#[test]
fn path_following_problem_converges_quickly() {
    let cfg = NmpcConfig::default();
    let x0 = VesselState::new(0.0, 0.0, 0.0, 5.0, 0.1, 0.0);
    let p = problem(x0, cmd(0.6, 7.0), DisturbanceVector::new(300.0, -200.0, 1500.0), &cfg);
    let s = solve(&p, None);
    check_solution(&p, &s);
    assert!(s.inputs[0].tau_r > 0.0, "turns to starboard toward positive heading");
    assert!(s.inputs[0].tau_u > 0.0);
    // Mid-horizon; near the end the plan relaxes the costly yaw compensation.
    let mid = s.states[30];
    assert!((mid[2] - 0.6).abs() < 0.05 && (mid[3] - 7.0).abs() < 0.1, "{mid:?}");
}

#[test]
fn heading_across_the_wrap_turns_the_short_way() {
    let cfg = NmpcConfig::default();
    let x0 = VesselState::new(0.0, 0.0, 3.0, 7.0, 0.0, 0.0);
    let p = problem(x0, cmd(-3.0, 7.0), DisturbanceVector::ZERO, &cfg);
    let s = solve(&p, None);
    check_solution(&p, &s);
    assert!(s.inputs[0].tau_r > 0.0);
    assert!((s.states.last().unwrap()[2] - (2.0 * std::f64::consts::PI - 3.0)).abs() < 0.05);
}

fn single_step_cfg(slack: [f64; 3], q_r: f64) -> NmpcConfig {
    NmpcConfig { horizon: 1, slack_weights: slack, q_yaw_rate: q_r, ..NmpcConfig::default() }
}

#[test]
fn single_step_subproblem_matches_dense_oracle() {
    let cases = [
        // Interior optimum.
        (single_step_cfg([1e3; 3], 150.0), VesselState::new(0.0, 0.0, 0.0, 6.9, 0.0, 0.0), cmd(0.01, 7.0), None),
        // Surge force saturates.
        (single_step_cfg([1e3; 3], 150.0), VesselState::new(0.0, 0.0, 0.0, 2.0, 0.0, 0.0), cmd(0.0, 7.0), Some("surge")),
        // Yaw-rate state bound binds on a decaying turn.
        (single_step_cfg([1e3, 1e3, 1e-3], 0.0), VesselState::new(0.0, 0.0, 0.0, 7.0, 0.0, 0.2), cmd(1.5, 7.0), Some("yaw")),
    ];
    for (cfg, x0, c, active) in cases {
        let mut p = problem(x0, c, DisturbanceVector::new(100.0, 50.0, -200.0), &cfg);
        if active == Some("yaw") {
            // Free decay would leave r just above this.
            p.bounds.yaw_rate_max = 0.15;
        }
        let guess = p.cold_start();
        let (_, sub) = sqp::first_subproblem(&p, &guess);
        let oracle = dense_oracle(&p, Vector2::zeros());
        let scale = p.input_scale();
        let got = sub.inputs[0].component_div(&scale);
        let want = oracle.component_div(&scale);
        assert!((got - want).amax() < 1e-6, "{got:?} vs {want:?}");
        match active {
            Some("surge") => assert!((sub.inputs[0][0] - p.params.input_upper[0]).abs() < 1e-3),
            Some(_) => assert!((sub.states[1][5] - p.bounds.yaw_rate_max).abs() < 1e-6, "{:?} {:?}", sub.states[1], sub.inputs[0]),
            None => assert!(sub.inputs[0][0] < p.params.input_upper[0] - 1.0),
        }

        // Converged SQP solution is a fixed point of the oracle at its own linearisation.
        let s = solve(&p, None);
        check_solution(&p, &s);
        let at = s.inputs[0].to_vector();
        let oracle = dense_oracle(&p, at);
        assert!(((at - oracle).component_div(&scale)).amax() < 1e-6, "{at:?} vs {oracle:?}");
    }
}

#[test]
fn cost_gradient_matches_central_differences() {
    let cfg = NmpcConfig { horizon: 6, r_surge: 1e-5, ..NmpcConfig::default() };
    let p = problem(VesselState::new(0.0, 0.0, 0.2, 5.0, 0.0, 0.0), cmd(0.7, 6.0), DisturbanceVector::ZERO, &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let t = random_trajectory(&p, &mut rng);
        let g = p.objective_gradient(&t);
        let check = |analytic: f64, perturb: &dyn Fn(&mut Trajectory, f64), h: f64| {
            let mut tp = t.clone();
            perturb(&mut tp, h);
            let mut tm = t.clone();
            perturb(&mut tm, -h);
            let fd = (p.objective(&tp) - p.objective(&tm)) / (2.0 * h);
            let rel = (analytic - fd).abs() / analytic.abs().max(1.0);
            assert!(rel <= 1e-5, "analytic {analytic} fd {fd}");
        };
        for k in 0..=p.horizon {
            for i in 0..6 {
                check(g.states[k][i], &|tr, h| tr.states[k][i] += h, 1e-4);
            }
        }
        for k in 0..p.horizon {
            for i in 0..2 {
                check(g.inputs[k][i], &|tr, h| tr.inputs[k][i] += h, 1.0);
            }
            for i in 0..3 {
                check(g.slacks[k][i], &|tr, h| tr.slacks[k][i] += h, 1e-4);
            }
        }
    }
}

#[test]
fn heavier_slack_weight_never_grows_slacks() {
    let x0 = VesselState::new(0.0, 0.0, 0.0, 5.0, 0.0, 0.05);
    let c = cmd(0.5, 7.0);
    let mut prev = f64::INFINITY;
    for w in [10.0, 100.0, 1000.0, 10000.0] {
        let cfg = NmpcConfig { horizon: 20, slack_weights: [w; 3], ..NmpcConfig::default() };
        let p = problem(x0, c, DisturbanceVector::ZERO, &cfg);
        let s = solve(&p, None);
        check_solution(&p, &s);
        let norm: f64 = s.slacks.iter().map(|xi| xi.norm_squared()).sum::<f64>().sqrt();
        assert!(norm <= prev * (1.0 + 1e-9), "w={w}: {norm} > {prev}");
        prev = norm;
    }
}

#[test]
fn objective_decreases_as_tracking_improves() {
    let cfg = NmpcConfig { horizon: 20, ..NmpcConfig::default() };
    let c = cmd(0.0, 7.0);
    let mut prev = f64::INFINITY;
    for err in [0.8, 0.4, 0.2, 0.1, 0.0] {
        let p = problem(VesselState::new(0.0, 0.0, err, 7.0, 0.0, 0.0), c, DisturbanceVector::ZERO, &cfg);
        let s = solve(&p, None);
        check_solution(&p, &s);
        assert!(s.objective < prev, "{err}: {} !< {prev}", s.objective);
        prev = s.objective;
    }
}

#[test]
fn identical_inputs_give_identical_solutions() {
    let cfg = NmpcConfig::default();
    let p = problem(VesselState::new(3.0, 1.0, 0.1, 6.0, 0.2, 0.01), cmd(-0.4, 7.0), DisturbanceVector::new(10.0, 20.0, 30.0), &cfg);
    let a = solve(&p, None);
    let b = solve(&p, None);
    assert!(a.same_plan(&b));
    let next = OcpProblem { x0: VesselState::from_vector(&a.states[1]), ..p.clone() };
    assert!(solve(&next, Some(&a)).same_plan(&solve(&next, Some(&a))));
}

#[test]
fn warm_start_beats_cold_start_along_a_rollout() {
    let cfg = NmpcConfig::default();
    let c = cmd(0.5, 7.0);
    let mut x = VesselState::new(0.0, 0.0, 0.0, 6.0, 0.0, 0.0);
    let mut plan = None;
    let (mut warm, mut cold) = (Vec::new(), Vec::new());
    let params = VesselParams::default();
    for _ in 0..30 {
        let p = problem(x, c, DisturbanceVector::ZERO, &cfg);
        let w = solve(&p, plan.as_ref());
        let cs = solve(&p, None);
        assert_eq!(w.status, SolverStatus::Converged);
        warm.push(w.iterations);
        cold.push(cs.iterations);
        x = seanav::dynamics::integrate_step(&x, &w.inputs[0], &DisturbanceVector::ZERO, &params, cfg.dt).unwrap();
        plan = Some(w);
    }
    warm.sort();
    cold.sort();
    assert!(warm[15] < cold[15], "median warm {} cold {}", warm[15], cold[15]);
}

#[test]
fn explicit_guess_is_used() {
    let cfg = NmpcConfig { horizon: 10, max_iter: 0, ..NmpcConfig::default() };
    let p = problem(VesselState::new(0.0, 0.0, 0.0, 7.0, 0.0, 0.0), cmd(0.0, 7.0), DisturbanceVector::ZERO, &cfg);
    let mut guess = p.cold_start();
    guess.inputs[3] = Vector2::new(100.0, -50.0);
    let s = solve_from(&p, &guess);
    assert_eq!(s.status, SolverStatus::MaxIter);
    assert_eq!(s.iterations, 0);
    assert_eq!(s.inputs[3].to_vector(), Vector2::new(100.0, -50.0));
}

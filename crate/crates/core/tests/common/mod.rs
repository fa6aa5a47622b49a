//! Shared helpers for integration tests: a hand-rolled single-robot
//! closed-loop driver built from the library pieces, used where tests need
//! per-step access to quantities the engine does not record (N-weighted
//! decrements, raw snapshots).

// each test binary compiles this module separately and uses a different
// subset of the record fields
#![allow(dead_code)]

use adaptrack_core::adaptation::{control_law, lyapunov_monitor, EstimatorState, RlsState};
use adaptrack_core::config::preset;
use adaptrack_core::regressor::{omega_columns, FilterBank};
use adaptrack_core::sim::{ResolvedScenario, RobotScenario};
use adaptrack_core::system_models::ReferenceModel;
use nalgebra::DMatrix;

pub struct StepRecord {
    pub v_before: f64,
    pub v_after: f64,
    pub v_decrement: f64,
    pub eps_norm: f64,
    pub delta_theta_norm: f64,
    pub theta_norm: f64,
    /// `max |ε − Zᵀ(θ − θ*)|` for the step.
    pub eps_identity_err: f64,
    pub tracking_err_inf: f64,
    pub estimator_err_inf: f64,
}

pub struct LoopOutcome {
    pub records: Vec<StepRecord>,
    pub v0: f64,
    pub p0_max_eig: f64,
    pub theta_star_norm: f64,
}

/// Single-robot LS loop over the desk-scale robot plant with exact
/// matching and full per-step bookkeeping. Projection and collision
/// avoidance off.
pub fn run_ls_loop(robot_index: usize, kappa: f64, theta0_scale: f64, steps: usize) -> LoopOutcome {
    let mut scenario = preset("paper-3robot-ls").unwrap();
    scenario.adaptation.kappa = kappa;
    let setup = scenario.robots[robot_index].clone();
    scenario.robots = vec![setup.clone()];
    scenario.collision.enabled = false;
    let resolved = scenario.resolve().unwrap();
    run_ls_loop_on(&scenario, &resolved, theta0_scale, steps)
}

pub fn run_ls_loop_on(
    scenario: &RobotScenario,
    resolved: &ResolvedScenario,
    theta0_scale: f64,
    steps: usize,
) -> LoopOutcome {
    let setup = &scenario.robots[0];
    let theta0 = resolved.theta_star.scaled(theta0_scale);
    let d = theta0.dim();
    let p0 = DMatrix::identity(d, d);

    let mut x = setup.initial_state.clone();
    let mut x_m = setup
        .initial_reference_state
        .clone()
        .unwrap_or_else(|| x.clone());
    let mut est = EstimatorState::new(x.clone());
    let mut bank = FilterBank::new(resolved.a_m.clone(), resolved.b_m.clone()).unwrap();
    let mut rls = RlsState::new(theta0, p0.clone(), scenario.adaptation.kappa, None).unwrap();
    let reference = ReferenceModel::new(
        resolved.a_m.clone(),
        resolved.b_m.clone(),
        setup.reference_input.clone(),
    )
    .unwrap();

    let v0 = lyapunov_monitor(rls.theta(), &resolved.theta_star, &p0).unwrap();
    let mut records = Vec::with_capacity(steps);
    let mut v_prev = v0;
    for t in 0..steps {
        let r = reference.reference_input(t);
        let u = control_law(rls.theta(), &x, &r).unwrap();
        let e_x = est.error(&x);
        let theta_t = rls.theta().clone();
        let snap = bank.snapshot(&theta_t, &e_x).unwrap();

        let eps_from_tilde =
            snap.z.transpose() * (theta_t.as_vector() - resolved.theta_star.as_vector());
        let eps_identity_err = (&snap.epsilon - eps_from_tilde).amax();

        let info = rls.update(&snap).unwrap();
        let v_next = lyapunov_monitor(rls.theta(), &resolved.theta_star, rls.covariance()).unwrap();
        let delta_theta_norm = (rls.theta().as_vector() - theta_t.as_vector()).norm();

        records.push(StepRecord {
            v_before: v_prev,
            v_after: v_next,
            v_decrement: info.v_decrement,
            eps_norm: snap.epsilon.norm(),
            delta_theta_norm,
            theta_norm: rls.theta().as_vector().norm(),
            eps_identity_err,
            tracking_err_inf: (&x - &x_m).amax(),
            estimator_err_inf: (est.xhat() - &x_m).amax(),
        });
        v_prev = v_next;

        let omega = omega_columns(&x, &u);
        bank.advance(&omega, &theta_t).unwrap();
        est.advance(&theta_t, &x, &u, &resolved.a_m, &resolved.b_m)
            .unwrap();
        x = resolved.plant.step(&x, &u).unwrap();
        x_m = reference.step(&x_m, t).unwrap();
    }
    LoopOutcome {
        records,
        v0,
        // P0 = I in this driver
        p0_max_eig: 1.0,
        theta_star_norm: resolved.theta_star.as_vector().norm(),
    }
}

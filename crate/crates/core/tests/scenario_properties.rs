//! Engine-level invariants: determinism, parallel/sequential equivalence,
//! estimation-error consistency, Lyapunov monotonicity, boundedness and
//! vanishing-step properties, comparison semantics, and failure reporting.

mod common;

use adaptrack_core::config::preset;
use adaptrack_core::error::Error;
use adaptrack_core::sim::{
    compare_runs, run_scenario, run_scenarios, run_scenarios_seq, CompareMetric, PlantSpec,
    ReferenceSpec, RobotScenario, RobotSetup, Theta0Rule,
};
use adaptrack_core::system_models::ReferenceInput;
use nalgebra::{DMatrix, DVector};

fn short_paper_scenario(steps: usize) -> RobotScenario {
    let mut scenario = preset("paper-3robot-ls").unwrap();
    scenario.run.steps = steps;
    scenario
}

#[test]
fn trace_is_bitwise_deterministic() {
    let scenario = short_paper_scenario(500);
    let (trace_a, _) = run_scenario(&scenario).unwrap();
    let (trace_b, _) = run_scenario(&scenario).unwrap();
    assert_eq!(trace_a, trace_b);
    assert_eq!(trace_a.rows.len(), trace_a.steps * trace_a.robots);
    assert_eq!(trace_a.min_surface_distance.len(), trace_a.steps);
}

#[test]
fn zero_error_run_converges_at_step_zero() {
    // nominal parameters: the error band holds from the first step and
    // the input range equals the nominal input range
    let mut scenario = short_paper_scenario(400);
    scenario.collision.enabled = false;
    scenario.adaptation.theta0 = Theta0Rule::ScaleOfStar(1.0);
    let (_, metrics) = run_scenario(&scenario).unwrap();
    for robot in &metrics.per_robot {
        assert_eq!(robot.convergence_step, Some(0));
        assert!(robot.input_min.is_finite() && robot.input_max.is_finite());
        assert!(robot.input_max.abs() < 10.0 && robot.input_min.abs() < 10.0);
    }
}

#[test]
fn parallel_batch_matches_sequential() {
    let mut scenarios = Vec::new();
    for steps in [120, 250, 380, 500] {
        scenarios.push(short_paper_scenario(steps));
    }
    let par: Vec<_> = run_scenarios(&scenarios)
        .into_iter()
        .map(|r| r.unwrap().0)
        .collect();
    let seq: Vec<_> = run_scenarios_seq(&scenarios)
        .into_iter()
        .map(|r| r.unwrap().0)
        .collect();
    assert_eq!(par, seq);
}

#[test]
fn epsilon_identity_holds_along_full_loop() {
    // eps(t) = Z'(t) (theta(t) - theta*) throughout a zero-initialized run
    let outcome = common::run_ls_loop(0, 1e-5, 0.625, 1500);
    let worst = outcome
        .records
        .iter()
        .map(|r| r.eps_identity_err)
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-9, "eps identity drift {worst:.3e}");
}

#[test]
fn epsilon_identity_scalar_random_run() {
    // n = 1, m = 1 random 20-step loop against the same identity
    use adaptrack_core::sim::{AdaptationConfig, Algorithm, CollisionConfig, RunConfig};
    let plant = PlantSpec::Raw {
        a: DMatrix::from_element(1, 1, 0.7),
        b: DMatrix::from_element(1, 1, 1.0),
        dt_s: 0.1,
    };
    let scenario = RobotScenario {
        plant,
        reference: ReferenceSpec::FromGains {
            k1: DMatrix::from_element(1, 1, -0.2), // A_m = 0.5
            k2_diag: DVector::from_element(1, 1.0),
            k2_upper: None,
        },
        robots: vec![RobotSetup {
            initial_state: DVector::zeros(1),
            initial_reference_state: None,
            reference_input: ReferenceInput::Sinusoid {
                amplitude: DVector::from_element(1, 0.8),
                omega_rad_per_step: 0.37,
                phase_rad: DVector::from_element(1, 0.4),
            },
        }],
        adaptation: AdaptationConfig {
            algorithm: Algorithm::Ls,
            kappa: 0.5,
            p0_scale: 1.0,
            theta0: Theta0Rule::ScaleOfStar(0.3),
            projection_enabled: false,
            gradient_gain: 1.9,
        },
        collision: CollisionConfig {
            enabled: false,
            repulsive: Default::default(),
        },
        run: RunConfig {
            steps: 20,
            ..Default::default()
        },
    };
    let resolved = scenario.resolve().unwrap();
    let outcome = common::run_ls_loop_on(&scenario, &resolved, 0.3, 20);
    let worst = outcome
        .records
        .iter()
        .map(|r| r.eps_identity_err)
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-10, "scalar eps identity drift {worst:.3e}");
}

#[test]
fn lyapunov_nonincreasing_and_estimate_bounds() {
    // 10^4-step run: V never increases, the estimate stays inside the
    // V-ball around theta*, and the squared update steps have a
    // convergent tail (last 10% below 1% of the total).
    let outcome = common::run_ls_loop(1, 1e-5, 0.625, 10_000);

    let mut v_prev = outcome.v0;
    let mut sq_steps = Vec::with_capacity(outcome.records.len());
    for rec in &outcome.records {
        assert!(
            rec.v_after <= v_prev + 1e-10 * v_prev.max(1.0),
            "V increased: {} -> {}",
            v_prev,
            rec.v_after
        );
        v_prev = rec.v_after;

        let bound = (outcome.v0 * outcome.p0_max_eig).sqrt() + outcome.theta_star_norm;
        assert!(
            rec.theta_norm <= bound + 1e-9,
            "theta norm {} exceeds the V-ball bound {}",
            rec.theta_norm,
            bound
        );
        sq_steps.push(rec.delta_theta_norm * rec.delta_theta_norm);
    }
    let total: f64 = sq_steps.iter().sum();
    let tail: f64 = sq_steps[sq_steps.len() - sq_steps.len() / 10..]
        .iter()
        .sum();
    assert!(
        tail < 0.01 * total,
        "step-size tail {tail:.3e} is not below 1% of total {total:.3e}"
    );
}

#[test]
fn estimator_tracks_plant_under_nominal_parameters() {
    // theta = theta* with consistent initialization: xhat replicates x
    let outcome = common::run_ls_loop(1, 1e-5, 1.0, 1000);
    for rec in &outcome.records {
        assert!(rec.tracking_err_inf < 1e-10);
        assert!(rec.estimator_err_inf < 1e-10);
    }
}

#[test]
fn comparison_of_identical_scenarios_is_all_zero() {
    let scenario = short_paper_scenario(300);
    let (report, _, _) =
        compare_runs(&scenario, &scenario, CompareMetric::TrackingErrorNorm).unwrap();
    assert_eq!(report.series_a, report.series_b);
    assert_eq!(report.convergence_step_a, report.convergence_step_b);
}

#[test]
fn comparison_rejects_mismatched_horizons() {
    let a = short_paper_scenario(300);
    let b = short_paper_scenario(301);
    assert!(matches!(
        compare_runs(&a, &b, CompareMetric::TrackingErrorNorm),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn ca_arms_diverge_only_after_first_influence_entry() {
    let on = short_paper_scenario(200);
    let mut off = on.clone();
    off.collision.enabled = false;
    let (_, trace_on, trace_off) =
        compare_runs(&on, &off, CompareMetric::MinSurfaceDistance).unwrap();

    // first step where any pair is inside the influence radius
    let rho0 = on.collision.repulsive.rho0_m;
    let two_gamma = 2.0 * on.collision.repulsive.gamma_m;
    let first_entry = trace_on
        .min_surface_distance
        .iter()
        .position(|surf| surf + two_gamma <= rho0)
        .expect("robots enter influence range in this scenario");

    for step in 0..first_entry {
        for robot in 0..trace_on.robots {
            assert_eq!(
                trace_on.row(step, robot).x,
                trace_off.row(step, robot).x,
                "states diverged at step {step} before influence entry at {first_entry}"
            );
        }
    }
    let diverged_after = (first_entry..trace_on.steps).any(|step| {
        (0..trace_on.robots)
            .any(|robot| trace_on.row(step, robot).x != trace_off.row(step, robot).x)
    });
    assert!(diverged_after, "arms never diverged after influence entry");
}

#[test]
fn head_on_crossing_sets_collision_flag_without_ca() {
    // two robots commanded through each other; without the repulsive
    // force the surface distance goes negative and the flag trips
    let base = preset("paper-3robot-ls").unwrap();
    let mut scenario = base.clone();
    scenario.robots = vec![
        RobotSetup {
            initial_state: DVector::from_vec(vec![-1.0, 0.0, 0.0, 0.0]),
            initial_reference_state: None,
            reference_input: ReferenceInput::Constant {
                value: DVector::from_vec(vec![-0.101, 0.0]),
            },
        },
        RobotSetup {
            initial_state: DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]),
            initial_reference_state: None,
            reference_input: ReferenceInput::Constant {
                value: DVector::from_vec(vec![0.101, 0.0]),
            },
        },
    ];
    scenario.run.steps = 3000;
    scenario.collision.enabled = false;
    let (_, metrics) = run_scenario(&scenario).unwrap();
    assert!(metrics.collision, "head-on run should flag a collision");
    assert!(metrics.min_surface_distance < 0.0);

    // with the repulsive force the penetration shrinks by two orders
    let mut with_ca = scenario.clone();
    with_ca.collision.enabled = true;
    let (_, metrics_ca) = run_scenario(&with_ca).unwrap();
    assert!(metrics_ca.min_surface_distance > metrics.min_surface_distance + 0.2);
}

#[test]
fn pure_repulsion_keeps_separation_above_rho_min() {
    // two robots drifting toward each other under repulsion alone
    // (tracking fully disabled); separation never drops below rho_min.
    // The printed coupling block makes the velocity state act as a
    // per-step displacement, so 0.02 is a gentle drift.
    use adaptrack_core::collision::{resultant_force, RepulsiveConfig};
    use adaptrack_core::system_models::robot_plant;
    use nalgebra::Vector2;

    let plant = robot_plant(18.0, 4.0, 0.05).unwrap();
    let cfg = RepulsiveConfig::default();
    let mut states = [
        DVector::from_vec(vec![-0.5, 0.0, 0.02, 0.0]),
        DVector::from_vec(vec![0.5, 0.0, -0.02, 0.0]),
    ];
    let mut min_rho = f64::INFINITY;
    for _ in 0..10_000 {
        let positions: Vec<Vector2<f64>> =
            states.iter().map(|x| Vector2::new(x[0], x[1])).collect();
        min_rho = min_rho.min((positions[0] - positions[1]).norm());
        let forces: Vec<DVector<f64>> = (0..2)
            .map(|i| {
                let (f, _) = resultant_force(&positions, i, &cfg);
                DVector::from_vec(vec![f.x, f.y])
            })
            .collect();
        for (x, f) in states.iter_mut().zip(&forces) {
            *x = plant.step(x, f).unwrap();
        }
    }
    assert!(
        min_rho >= cfg.rho_min_m,
        "separation dropped to {min_rho:.4} m below rho_min {}",
        cfg.rho_min_m
    );
}

#[test]
fn projection_bounds_hold_along_adaptive_run() {
    let mut scenario = short_paper_scenario(600);
    scenario.run.record_theta = true;
    let (trace, _) = run_scenario(&scenario).unwrap();
    let resolved = scenario.resolve().unwrap();
    let n = trace.state_dim;
    for row in &trace.rows {
        let theta = row.theta.as_ref().unwrap();
        for j in 0..trace.input_dim {
            let theta2j = theta[j * (n + 1) + n];
            let floor = 1.0 / resolved.matching.k2_upper[j];
            let sign = resolved.matching.signs[j];
            assert!(
                sign * theta2j >= floor - 1e-12,
                "projection violated at step {} robot {}: theta2[{j}] = {theta2j}",
                row.step,
                row.robot
            );
        }
    }
}

#[test]
fn divergent_run_reports_blowup_step() {
    // wrong-sign feedback on an unstable scalar plant, adaptation frozen
    // from the start so nothing can rescue the loop
    use adaptrack_core::sim::{AdaptationConfig, Algorithm, CollisionConfig, RunConfig};
    let scenario = RobotScenario {
        plant: PlantSpec::Raw {
            a: DMatrix::from_element(1, 1, 2.0),
            b: DMatrix::from_element(1, 1, 1.0),
            dt_s: 0.1,
        },
        reference: ReferenceSpec::FromGains {
            k1: DMatrix::from_element(1, 1, -1.5), // A_m = 0.5
            k2_diag: DVector::from_element(1, 1.0),
            k2_upper: None,
        },
        robots: vec![RobotSetup {
            initial_state: DVector::from_element(1, 1.0),
            initial_reference_state: None,
            reference_input: ReferenceInput::Zero { dim: 1 },
        }],
        adaptation: AdaptationConfig {
            algorithm: Algorithm::Ls,
            kappa: 1.0,
            p0_scale: 1.0,
            theta0: Theta0Rule::Explicit(DVector::from_vec(vec![1.5, 1.0])),
            projection_enabled: false,
            gradient_gain: 1.9,
        },
        collision: CollisionConfig {
            enabled: false,
            repulsive: Default::default(),
        },
        run: RunConfig {
            steps: 2000,
            freeze_adaptation_after_step: Some(0),
            ..Default::default()
        },
    };
    match run_scenario(&scenario) {
        Err(Error::NumericBlowup { step }) => {
            assert!(step > 0 && step < 2000, "blowup step {step}");
        }
        other => panic!("expected NumericBlowup, got {other:?}"),
    }
}

#[test]
fn zero_steps_rejected() {
    let mut scenario = short_paper_scenario(100);
    scenario.run.steps = 0;
    assert!(scenario.resolve().is_err());
}

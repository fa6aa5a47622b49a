//! Fixed-step closed-loop simulation of N robots.
//!
//! Per step, per robot: generate `r(t)`, compute the tracking input,
//! blend in the repulsive force through `α`, read the regressor snapshot,
//! adapt (unless suspended by a nonzero repulsive force), then advance the
//! estimator, filters, plant, and reference with the actually applied
//! input. The per-step loop is sequential because collision avoidance
//! couples the robots; independent scenarios run in parallel through
//! [`run_scenarios`].

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector2};

use crate::adaptation::{
    control_law, lyapunov_monitor, EstimatorState, GradientState, ProjectionBounds, RlsState,
};
use crate::collision::{
    alpha_coefficient, energy_budget, modified_input, pair_force, PairGeometry, RepulsiveConfig,
};
use crate::error::{Error, Result};
use crate::regressor::{omega_columns, FilterBank, ThetaVector};
use crate::system_models::{
    build_reference_from_gains, robot_plant, verify_matching, LtiPlant, MatchingParameters,
    MatchingResidual, ReferenceInput, ReferenceModel,
};

/// Plant description: physical point-mass parameters or raw matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum PlantSpec {
    Physical {
        mass_kg: f64,
        friction_n_s_per_m: f64,
        dt_s: f64,
    },
    Raw {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        dt_s: f64,
    },
}

impl PlantSpec {
    pub fn dt(&self) -> f64 {
        match self {
            PlantSpec::Physical { dt_s, .. } | PlantSpec::Raw { dt_s, .. } => *dt_s,
        }
    }

    pub fn build(&self) -> Result<LtiPlant> {
        match self {
            PlantSpec::Physical {
                mass_kg,
                friction_n_s_per_m,
                dt_s,
            } => robot_plant(*mass_kg, *friction_n_s_per_m, *dt_s),
            PlantSpec::Raw { a, b, .. } => LtiPlant::new(a.clone(), b.clone()),
        }
    }

    pub fn mass(&self) -> Option<f64> {
        match self {
            PlantSpec::Physical { mass_kg, .. } => Some(*mass_kg),
            PlantSpec::Raw { .. } => None,
        }
    }
}

/// Reference-model description: gains that match the plant exactly by
/// construction, or literal matrices with the matching residual reported.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSpec {
    FromGains {
        k1: DMatrix<f64>,
        k2_diag: DVector<f64>,
        k2_upper: Option<DVector<f64>>,
    },
    Literal {
        a_m: DMatrix<f64>,
        b_m: DMatrix<f64>,
        theta1_star: DMatrix<f64>,
        theta2_star_diag: DVector<f64>,
        k2_upper: Option<DVector<f64>>,
    },
}

/// Per-robot initial conditions and reference input.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotSetup {
    pub initial_state: DVector<f64>,
    /// Defaults to `initial_state` when absent.
    pub initial_reference_state: Option<DVector<f64>>,
    pub reference_input: ReferenceInput,
}

/// Which adaptive law drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Ls,
    Gradient,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algorithm::Ls => write!(f, "ls"),
            Algorithm::Gradient => write!(f, "gradient"),
        }
    }
}

/// Initial parameter estimate rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Theta0Rule {
    /// `θ0 = scale · θ*` (requires the nominal parameters).
    ScaleOfStar(f64),
    Explicit(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationConfig {
    pub algorithm: Algorithm,
    pub kappa: f64,
    pub p0_scale: f64,
    pub theta0: Theta0Rule,
    pub projection_enabled: bool,
    pub gradient_gain: f64,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ls,
            kappa: 1e-5,
            p0_scale: 1.0,
            theta0: Theta0Rule::ScaleOfStar(0.625),
            projection_enabled: true,
            gradient_gain: 1.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionConfig {
    pub enabled: bool,
    pub repulsive: RepulsiveConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub steps: usize,
    /// Record θ in every trace row.
    pub record_theta: bool,
    /// Record θ and flattened P each step for suspension audits.
    pub record_adaptation_state: bool,
    /// Record the Lyapunov monitor V (needs nominal parameters).
    pub theta_star_known: bool,
    /// Stop adapting after this step (θ and P frozen from here on).
    pub freeze_adaptation_after_step: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            steps: 8000,
            record_theta: false,
            record_adaptation_state: false,
            theta_star_known: false,
            freeze_adaptation_after_step: None,
        }
    }
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotScenario {
    pub plant: PlantSpec,
    pub reference: ReferenceSpec,
    pub robots: Vec<RobotSetup>,
    pub adaptation: AdaptationConfig,
    pub collision: CollisionConfig,
    pub run: RunConfig,
}

/// Scenario with every matrix resolved, ready to simulate.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub plant: LtiPlant,
    pub a_m: DMatrix<f64>,
    pub b_m: DMatrix<f64>,
    pub matching: MatchingParameters,
    pub matching_residual: MatchingResidual,
    pub theta_star: ThetaVector,
    pub theta0: ThetaVector,
    pub dt: f64,
    pub warnings: Vec<String>,
}

impl RobotScenario {
    /// Validates the scenario and resolves plant/reference matrices and the
    /// nominal parameters.
    pub fn resolve(&self) -> Result<ResolvedScenario> {
        if self.robots.is_empty() {
            return Err(Error::InvalidParameter(
                "scenario needs at least one robot".into(),
            ));
        }
        let dt = self.plant.dt();
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let plant = self.plant.build()?;
        let n = plant.state_dim();
        let m = plant.input_dim();

        let (a_m, b_m, matching, matching_residual) = match &self.reference {
            ReferenceSpec::FromGains {
                k1,
                k2_diag,
                k2_upper,
            } => {
                let (a_m, b_m, params) = build_reference_from_gains(
                    &plant,
                    k1.clone(),
                    k2_diag.clone(),
                    k2_upper.clone(),
                )?;
                let residual = verify_matching(&plant, &a_m, &b_m, &params);
                (a_m, b_m, params, residual)
            }
            ReferenceSpec::Literal {
                a_m,
                b_m,
                theta1_star,
                theta2_star_diag,
                k2_upper,
            } => {
                let params = MatchingParameters::from_theta(
                    theta1_star.clone(),
                    theta2_star_diag.clone(),
                    k2_upper.clone(),
                )?;
                let residual = verify_matching(&plant, a_m, b_m, &params);
                (a_m.clone(), b_m.clone(), params, residual)
            }
        };

        let mut warnings = Vec::new();
        if matching_residual.max() > 1e-9 {
            warnings.push(format!(
                "reference model does not match the plant exactly (residuals A {:.3e}, B {:.3e}); \
                 nominal-parameter identities are only approximate",
                matching_residual.a_residual, matching_residual.b_residual
            ));
        }

        let theta_star = ThetaVector::from_parts(&matching.theta1, &matching.theta2_diag);
        let theta0 = match &self.adaptation.theta0 {
            Theta0Rule::ScaleOfStar(s) => theta_star.scaled(*s),
            Theta0Rule::Explicit(v) => ThetaVector::new(n, m, v.clone())?,
        };

        if !(self.adaptation.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {}",
                self.adaptation.kappa
            )));
        }
        if !(self.adaptation.p0_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "p0_scale must be positive, got {}",
                self.adaptation.p0_scale
            )));
        }
        if self.adaptation.algorithm == Algorithm::Gradient
            && !(self.adaptation.gradient_gain > 0.0 && self.adaptation.gradient_gain < 2.0)
        {
            return Err(Error::InvalidParameter(format!(
                "gradient gain must lie in (0, 2), got {}",
                self.adaptation.gradient_gain
            )));
        }

        for (idx, robot) in self.robots.iter().enumerate() {
            if robot.initial_state.len() != n {
                return Err(Error::dims(
                    "robot initial state",
                    n,
                    robot.initial_state.len(),
                ));
            }
            if let Some(x_m0) = &robot.initial_reference_state {
                if x_m0.len() != n {
                    return Err(Error::dims("robot initial reference state", n, x_m0.len()));
                }
            }
            if robot.reference_input.dim() != m {
                return Err(Error::dims(
                    "reference input dim",
                    m,
                    robot.reference_input.dim(),
                ));
            }
            let _ = idx;
        }

        if self.collision.enabled {
            if m != 2 || n < 2 {
                return Err(Error::InvalidParameter(
                    "collision avoidance needs planar robots (m = 2, n >= 2)".into(),
                ));
            }
            warnings.extend(self.collision.repulsive.validate()?);
        }
        if self.run.steps == 0 {
            return Err(Error::InvalidParameter("steps must be positive".into()));
        }

        Ok(ResolvedScenario {
            plant,
            a_m,
            b_m,
            matching,
            matching_residual,
            theta_star,
            theta0,
            dt,
            warnings,
        })
    }
}

/// One trace row: the step-t values for one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub robot: usize,
    pub x: Vec<f64>,
    pub x_m: Vec<f64>,
    pub error: Vec<f64>,
    pub x_hat: Vec<f64>,
    /// Applied input `U = F_r + α U_o`.
    pub u: Vec<f64>,
    /// Tracking input `U_o`.
    pub u_track: Vec<f64>,
    pub f_r: Vec<f64>,
    pub alpha: f64,
    pub eps_norm: f64,
    pub xi_max_abs: f64,
    pub suspended: bool,
    pub ca_degenerate: bool,
    /// Lyapunov monitor, when the nominal parameters are known (LS only).
    pub v: Option<f64>,
    /// Pre-update estimate θ(t), when recording is enabled.
    pub theta: Option<Vec<f64>>,
    /// Flattened covariance P(t−1), recorded only for adaptation audits.
    pub p: Option<Vec<f64>>,
}

/// Full run record: `steps × robots` rows plus the per-step global minimum
/// surface distance (center distance − 2γ).
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub robots: usize,
    pub steps: usize,
    pub state_dim: usize,
    pub input_dim: usize,
    pub rows: Vec<TraceRow>,
    pub min_surface_distance: Vec<f64>,
}

impl SimTrace {
    pub fn row(&self, step: usize, robot: usize) -> &TraceRow {
        &self.rows[step * self.robots + robot]
    }
}

/// Per-robot summary numbers.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RobotMetrics {
    pub max_abs_error_last_tenth: f64,
    /// First step from which `‖e‖∞` stays below the tolerance.
    pub convergence_step: Option<usize>,
    pub final_epsilon_norm: f64,
    pub input_min: f64,
    pub input_max: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsSummary {
    pub steps: usize,
    pub robots: usize,
    pub error_tolerance: f64,
    pub per_robot: Vec<RobotMetrics>,
    pub min_surface_distance: f64,
    pub collision: bool,
    pub wall_clock_s: f64,
}

/// Default `‖e‖∞` band used for convergence-step metrics.
pub const DEFAULT_ERROR_TOLERANCE: f64 = 0.05;

enum Adaptation {
    Ls(RlsState),
    Gradient(GradientState),
}

impl Adaptation {
    fn theta(&self) -> &ThetaVector {
        match self {
            Adaptation::Ls(s) => s.theta(),
            Adaptation::Gradient(s) => s.theta(),
        }
    }

    fn covariance(&self) -> Option<&DMatrix<f64>> {
        match self {
            Adaptation::Ls(s) => Some(s.covariance()),
            Adaptation::Gradient(_) => None,
        }
    }
}

struct RobotRuntime {
    x: DVector<f64>,
    x_m: DVector<f64>,
    estimator: EstimatorState,
    bank: FilterBank,
    adaptation: Adaptation,
    reference: ReferenceModel,
}

/// Runs one scenario to completion. Deterministic: the same scenario
/// produces a bitwise-identical trace.
pub fn run_scenario(scenario: &RobotScenario) -> Result<(SimTrace, MetricsSummary)> {
    let resolved = scenario.resolve()?;
    let started = Instant::now();
    let trace = simulate(scenario, &resolved)?;
    let wall = started.elapsed().as_secs_f64();
    let metrics = compute_metrics(&trace, DEFAULT_ERROR_TOLERANCE, wall);
    Ok((trace, metrics))
}

fn simulate(scenario: &RobotScenario, resolved: &ResolvedScenario) -> Result<SimTrace> {
    let n = resolved.plant.state_dim();
    let m = resolved.plant.input_dim();
    let nr = scenario.robots.len();
    let steps = scenario.run.steps;
    let dt = resolved.dt;
    let ca = &scenario.collision;

    let projection = if scenario.adaptation.projection_enabled {
        Some(ProjectionBounds::new(
            resolved.matching.signs.iter().copied().collect(),
            resolved.matching.k2_upper.iter().copied().collect(),
        )?)
    } else {
        None
    };

    let mut robots = Vec::with_capacity(nr);
    for setup in &scenario.robots {
        let x0 = setup.initial_state.clone();
        let x_m0 = setup
            .initial_reference_state
            .clone()
            .unwrap_or_else(|| x0.clone());
        let adaptation = match scenario.adaptation.algorithm {
            Algorithm::Ls => {
                let p0 = DMatrix::identity(resolved.theta0.dim(), resolved.theta0.dim())
                    * scenario.adaptation.p0_scale;
                Adaptation::Ls(RlsState::new(
                    resolved.theta0.clone(),
                    p0,
                    scenario.adaptation.kappa,
                    projection.clone(),
                )?)
            }
            Algorithm::Gradient => Adaptation::Gradient(GradientState::new(
                resolved.theta0.clone(),
                scenario.adaptation.gradient_gain,
                projection.clone(),
            )?),
        };
        robots.push(RobotRuntime {
            estimator: EstimatorState::new(x0.clone()),
            x: x0,
            x_m: x_m0,
            bank: FilterBank::new(resolved.a_m.clone(), resolved.b_m.clone())?,
            adaptation,
            reference: ReferenceModel::new(
                resolved.a_m.clone(),
                resolved.b_m.clone(),
                setup.reference_input.clone(),
            )?,
        });
    }

    let mut rows = Vec::with_capacity(steps * nr);
    let mut min_surface = Vec::with_capacity(steps);
    let two_gamma = 2.0 * ca.repulsive.gamma_m;

    for step in 0..steps {
        let frozen = scenario
            .run
            .freeze_adaptation_after_step
            .is_some_and(|f| step >= f);

        // phase 1: tracking inputs from the step-t states
        let mut u_track = Vec::with_capacity(nr);
        for robot in &robots {
            let r = robot.reference.reference_input(step);
            u_track.push(control_law(robot.adaptation.theta(), &robot.x, &r)?);
        }

        // phase 2: pairwise geometry, repulsive forces, alpha blending;
        // planar positions exist only for n >= 2
        let positions: Vec<Vector2<f64>> = if n >= 2 {
            robots
                .iter()
                .map(|r| Vector2::new(r.x[0], r.x[1]))
                .collect()
        } else {
            Vec::new()
        };
        if positions.len() >= 2 {
            min_surface.push(min_surface_distance(&positions, two_gamma));
        } else {
            min_surface.push(f64::INFINITY);
        }

        let mut applied = Vec::with_capacity(nr);
        let mut repulsive = Vec::with_capacity(nr);
        let mut alphas = Vec::with_capacity(nr);
        let mut degenerate_flags = Vec::with_capacity(nr);
        for i in 0..nr {
            if ca.enabled {
                let mut forces = Vec::with_capacity(nr - 1);
                let mut budgets = Vec::with_capacity(nr - 1);
                let mut degenerate = false;
                for (j, pos_j) in positions.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let geom = PairGeometry::between(&positions[i], pos_j);
                    degenerate |= geom.degenerate;
                    forces.push(pair_force(&geom, &ca.repulsive));
                    budgets.push(energy_budget(geom.rho, &ca.repulsive));
                }
                let f_r: Vector2<f64> = forces.iter().sum();
                let u_o = Vector2::new(u_track[i][0], u_track[i][1]);
                let alpha = alpha_coefficient(&u_o, &forces, &budgets, &ca.repulsive, dt);
                let u = modified_input(&u_o, &f_r, alpha);
                applied.push(DVector::from_vec(vec![u.x, u.y]));
                repulsive.push(DVector::from_vec(vec![f_r.x, f_r.y]));
                alphas.push(alpha);
                degenerate_flags.push(degenerate);
            } else {
                applied.push(u_track[i].clone());
                repulsive.push(DVector::zeros(m));
                alphas.push(1.0);
                degenerate_flags.push(false);
            }
        }

        // phase 3: snapshot, adaptation, state advance
        for (i, robot) in robots.iter_mut().enumerate() {
            let e_x = robot.estimator.error(&robot.x);
            let theta_t = robot.adaptation.theta().clone();
            let snap = robot.bank.snapshot(&theta_t, &e_x)?;
            if !snap.epsilon.iter().all(|v| v.is_finite())
                || !snap.zeta_norm_sq.is_finite()
                || !snap.xi_norm_sq.is_finite()
                || !applied[i].iter().all(|v| v.is_finite())
            {
                return Err(Error::NumericBlowup { step });
            }

            let suspended = repulsive[i].iter().any(|f| *f != 0.0);
            let v = if scenario.run.theta_star_known {
                robot
                    .adaptation
                    .covariance()
                    .map(|p| lyapunov_monitor(&theta_t, &resolved.theta_star, p))
                    .transpose()?
            } else {
                None
            };
            // time-t adaptation state, captured before any update
            let p_t: Option<Vec<f64>> = scenario
                .run
                .record_adaptation_state
                .then(|| {
                    robot
                        .adaptation
                        .covariance()
                        .map(|p| p.iter().copied().collect())
                })
                .flatten();

            if !suspended && !frozen {
                match &mut robot.adaptation {
                    Adaptation::Ls(s) => {
                        s.update(&snap)?;
                    }
                    Adaptation::Gradient(s) => s.update(&snap)?,
                }
            }

            let error: DVector<f64> = &robot.x - &robot.x_m;
            rows.push(TraceRow {
                step,
                robot: i,
                x: robot.x.iter().copied().collect(),
                x_m: robot.x_m.iter().copied().collect(),
                error: error.iter().copied().collect(),
                x_hat: robot.estimator.xhat().iter().copied().collect(),
                u: applied[i].iter().copied().collect(),
                u_track: u_track[i].iter().copied().collect(),
                f_r: repulsive[i].iter().copied().collect(),
                alpha: alphas[i],
                eps_norm: snap.epsilon.norm(),
                xi_max_abs: snap.xi_max_abs,
                suspended,
                ca_degenerate: degenerate_flags[i],
                v,
                theta: (scenario.run.record_theta || scenario.run.record_adaptation_state)
                    .then(|| theta_t.as_vector().iter().copied().collect()),
                p: p_t,
            });

            // advance with the actually applied input and theta(t)
            let omega = omega_columns(&robot.x, &applied[i]);
            robot.bank.advance(&omega, &theta_t)?;
            robot.estimator.advance(
                &theta_t,
                &robot.x,
                &applied[i],
                &resolved.a_m,
                &resolved.b_m,
            )?;
            robot.x = resolved.plant.step(&robot.x, &applied[i])?;
            robot.x_m = robot.reference.step(&robot.x_m, step)?;

            if robot.x.iter().any(|v| !v.is_finite())
                || robot.x_m.iter().any(|v| !v.is_finite())
                || robot.estimator.xhat().iter().any(|v| !v.is_finite())
            {
                return Err(Error::NumericBlowup { step });
            }
        }
    }

    Ok(SimTrace {
        dt,
        robots: nr,
        steps,
        state_dim: n,
        input_dim: m,
        rows,
        min_surface_distance: min_surface,
    })
}

fn min_surface_distance(positions: &[Vector2<f64>], two_gamma: f64) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let d = (positions[i] - positions[j]).norm() - two_gamma;
            min = min.min(d);
        }
    }
    min
}

/// Summarizes a trace: per-robot error band entry, final estimation error,
/// input range, and the global minimum surface distance.
pub fn compute_metrics(
    trace: &SimTrace,
    error_tolerance: f64,
    wall_clock_s: f64,
) -> MetricsSummary {
    let tail_start = trace.steps - (trace.steps / 10).max(1).min(trace.steps);
    let mut per_robot = Vec::with_capacity(trace.robots);
    for robot in 0..trace.robots {
        let mut max_tail = 0.0f64;
        let mut input_min = f64::INFINITY;
        let mut input_max = f64::NEG_INFINITY;
        for step in 0..trace.steps {
            let row = trace.row(step, robot);
            if step >= tail_start {
                let e_inf = row.error.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                max_tail = max_tail.max(e_inf);
            }
            for u in &row.u {
                input_min = input_min.min(*u);
                input_max = input_max.max(*u);
            }
        }

        // scan backwards for the first step from which the error band holds
        let mut convergence_step = None;
        for step in (0..trace.steps).rev() {
            let e_inf = trace
                .row(step, robot)
                .error
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()));
            if e_inf < error_tolerance {
                convergence_step = Some(step);
            } else {
                break;
            }
        }

        per_robot.push(RobotMetrics {
            max_abs_error_last_tenth: max_tail,
            convergence_step,
            final_epsilon_norm: trace.row(trace.steps - 1, robot).eps_norm,
            input_min,
            input_max,
        });
    }

    let min_surface = trace
        .min_surface_distance
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    MetricsSummary {
        steps: trace.steps,
        robots: trace.robots,
        error_tolerance,
        per_robot,
        min_surface_distance: min_surface,
        collision: min_surface < 0.0,
        wall_clock_s,
    }
}

/// Runs a batch of independent scenarios, in parallel when the `parallel`
/// feature is enabled.
pub fn run_scenarios(scenarios: &[RobotScenario]) -> Vec<Result<(SimTrace, MetricsSummary)>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        scenarios.par_iter().map(run_scenario).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_scenarios_seq(scenarios)
    }
}

/// Sequential batch runner; the baseline the parallel path is benchmarked
/// against.
pub fn run_scenarios_seq(scenarios: &[RobotScenario]) -> Vec<Result<(SimTrace, MetricsSummary)>> {
    scenarios.iter().map(run_scenario).collect()
}

/// Per-step scalar series extracted from a trace for comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareMetric {
    /// Max over robots of `‖x − x_m‖₂`.
    TrackingErrorNorm,
    /// Max over robots of `‖ε‖₂`.
    EpsilonNorm,
    /// Global minimum surface distance.
    MinSurfaceDistance,
}

impl CompareMetric {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tracking-error-norm" => Ok(Self::TrackingErrorNorm),
            "epsilon-norm" => Ok(Self::EpsilonNorm),
            "min-surface-distance" => Ok(Self::MinSurfaceDistance),
            other => Err(Error::InvalidParameter(format!(
                "unknown metric `{other}` (expected tracking-error-norm, epsilon-norm, or min-surface-distance)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::TrackingErrorNorm => "tracking-error-norm",
            Self::EpsilonNorm => "epsilon-norm",
            Self::MinSurfaceDistance => "min-surface-distance",
        }
    }

    fn series(&self, trace: &SimTrace) -> Vec<f64> {
        match self {
            Self::MinSurfaceDistance => trace.min_surface_distance.clone(),
            Self::TrackingErrorNorm => (0..trace.steps)
                .map(|step| {
                    (0..trace.robots)
                        .map(|r| {
                            trace
                                .row(step, r)
                                .error
                                .iter()
                                .map(|v| v * v)
                                .sum::<f64>()
                                .sqrt()
                        })
                        .fold(0.0f64, f64::max)
                })
                .collect(),
            Self::EpsilonNorm => (0..trace.steps)
                .map(|step| {
                    (0..trace.robots)
                        .map(|r| trace.row(step, r).eps_norm)
                        .fold(0.0f64, f64::max)
                })
                .collect(),
        }
    }
}

/// Paired comparison of two runs that differ only in declared knobs.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ComparisonReport {
    pub metric: String,
    pub series_a: Vec<f64>,
    pub series_b: Vec<f64>,
    pub final_a: f64,
    pub final_b: f64,
    /// Worst-case max over robots of the per-robot convergence steps.
    pub convergence_step_a: Option<usize>,
    pub convergence_step_b: Option<usize>,
    pub metrics_a: MetricsSummary,
    pub metrics_b: MetricsSummary,
}

/// Run convergence step: the step from which every robot holds the error
/// band (`None` when any robot never settles).
pub fn run_convergence_step(metrics: &MetricsSummary) -> Option<usize> {
    let mut worst = 0usize;
    for robot in &metrics.per_robot {
        worst = worst.max(robot.convergence_step?);
    }
    Some(worst)
}

/// Runs both scenarios and pairs their per-step series. The horizons and
/// robot counts must agree.
pub fn compare_runs(
    scenario_a: &RobotScenario,
    scenario_b: &RobotScenario,
    metric: CompareMetric,
) -> Result<(ComparisonReport, SimTrace, SimTrace)> {
    if scenario_a.run.steps != scenario_b.run.steps {
        return Err(Error::InvalidParameter(format!(
            "mismatched horizons: {} vs {}",
            scenario_a.run.steps, scenario_b.run.steps
        )));
    }
    if scenario_a.robots.len() != scenario_b.robots.len() {
        return Err(Error::InvalidParameter(format!(
            "mismatched robot counts: {} vs {}",
            scenario_a.robots.len(),
            scenario_b.robots.len()
        )));
    }
    let mut results = run_scenarios(&[scenario_a.clone(), scenario_b.clone()]);
    let (trace_b, metrics_b) = results.pop().expect("two results")?;
    let (trace_a, metrics_a) = results.pop().expect("two results")?;

    let series_a = metric.series(&trace_a);
    let series_b = metric.series(&trace_b);
    let report = ComparisonReport {
        metric: metric.name().to_string(),
        final_a: *series_a.last().expect("nonempty run"),
        final_b: *series_b.last().expect("nonempty run"),
        convergence_step_a: run_convergence_step(&metrics_a),
        convergence_step_b: run_convergence_step(&metrics_b),
        series_a,
        series_b,
        metrics_a,
        metrics_b,
    };
    Ok((report, trace_a, trace_b))
}

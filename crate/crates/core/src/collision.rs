//! Artificial repulsive potential fields between robots, the per-pair
//! energy budget, the blending coefficient `α`, and the modified control
//! input `U = F_r + α U_o`.
//!
//! The field around a robot is
//!
//! ```text
//! W(ρ) = ½ η (1/γ − 1/ρ0)²   for ρ ≤ γ
//!        ½ η (1/ρ − 1/ρ0)²   for γ < ρ ≤ ρ0
//!        0                    otherwise
//! ```
//!
//! and the force on robot i from robot j is the negative field gradient,
//! pointing from j toward i.

use nalgebra::Vector2;

use crate::error::{Error, Result};

/// Repulsive-field and energy-budget parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RepulsiveConfig {
    /// Field strength η (per robot; all robots share one value here).
    pub eta: f64,
    /// Robot radius γ, m.
    pub gamma_m: f64,
    /// Influence ("safe") distance ρ0, m.
    pub rho0_m: f64,
    /// Minimum allowed separation ρ_min, m.
    pub rho_min_m: f64,
    /// Speed cap used in the energy bound, m/s.
    pub v_max_m_per_s: f64,
    /// Fraction of the remaining energy budget the tracking input may spend.
    pub beta: f64,
    /// Robot mass, kg (enters only the energy-feasibility check).
    pub mass_kg: f64,
}

impl RepulsiveConfig {
    /// Validates hard invariants; returns advisory warnings (for example
    /// when the energy-feasibility inequality
    /// `W(ρ_min) ≥ W(ρ0) + ½ m v_max²` fails, which published constants do
    /// for any reasonable speed cap).
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.gamma_m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma_m
            )));
        }
        if !(self.gamma_m < self.rho_min_m && self.rho_min_m < self.rho0_m) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < gamma ({}) < rho_min ({}) < rho0 ({})",
                self.gamma_m, self.rho_min_m, self.rho0_m
            )));
        }
        if !(self.beta >= 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in [0, 1), got {}",
                self.beta
            )));
        }
        if !(self.v_max_m_per_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "v_max must be positive, got {}",
                self.v_max_m_per_s
            )));
        }
        if !(self.mass_kg > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mass must be positive, got {}",
                self.mass_kg
            )));
        }

        let mut warnings = Vec::new();
        let needed =
            field_value(self.rho0_m, self) + 0.5 * self.mass_kg * self.v_max_m_per_s.powi(2);
        let available = field_value(self.rho_min_m, self);
        if available < needed {
            warnings.push(format!(
                "energy feasibility W(rho_min)={available:.4} J < W(rho0)+0.5*m*v_max^2={needed:.4} J; \
                 the energy argument is not conservative for this configuration"
            ));
        }
        Ok(warnings)
    }

    /// Field plateau force magnitude (the `ρ ≤ γ` branch).
    pub fn plateau_force(&self) -> f64 {
        self.eta * (1.0 / self.gamma_m - 1.0 / self.rho0_m) / (self.gamma_m * self.gamma_m)
    }
}

impl Default for RepulsiveConfig {
    fn default() -> Self {
        // eta, beta, rho0 as published; gamma, rho_min, v_max are
        // implementer defaults (desk-scale robot footprint).
        Self {
            eta: 4.5,
            gamma_m: 0.15,
            rho0_m: 0.36,
            rho_min_m: 0.30,
            v_max_m_per_s: 1.5,
            beta: 0.9,
            mass_kg: 18.0,
        }
    }
}

/// Center distance and unit direction from robot j toward robot i.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub rho: f64,
    pub unit: Vector2<f64>,
    /// Coincident centers: direction is undefined and replaced by +x.
    pub degenerate: bool,
}

impl PairGeometry {
    pub fn between(pos_i: &Vector2<f64>, pos_j: &Vector2<f64>) -> Self {
        let diff = pos_i - pos_j;
        let rho = diff.norm();
        if rho > 0.0 {
            Self {
                rho,
                unit: diff / rho,
                degenerate: false,
            }
        } else {
            Self {
                rho: 0.0,
                unit: Vector2::new(1.0, 0.0),
                degenerate: true,
            }
        }
    }
}

/// Repulsive field value `W(ρ)`.
pub fn field_value(rho: f64, cfg: &RepulsiveConfig) -> f64 {
    if rho <= cfg.gamma_m {
        0.5 * cfg.eta * (1.0 / cfg.gamma_m - 1.0 / cfg.rho0_m).powi(2)
    } else if rho <= cfg.rho0_m {
        0.5 * cfg.eta * (1.0 / rho - 1.0 / cfg.rho0_m).powi(2)
    } else {
        0.0
    }
}

/// Force on robot i from robot j's field. Magnitude plateaus for
/// `ρ ≤ γ`, decays to zero at `ρ = ρ0`, is zero beyond.
pub fn pair_force(geom: &PairGeometry, cfg: &RepulsiveConfig) -> Vector2<f64> {
    let magnitude = if geom.rho <= cfg.gamma_m {
        cfg.plateau_force()
    } else if geom.rho <= cfg.rho0_m {
        cfg.eta * (1.0 / geom.rho - 1.0 / cfg.rho0_m) / (geom.rho * geom.rho)
    } else {
        0.0
    };
    geom.unit * magnitude
}

/// Vector sum of the pair forces from every other robot.
///
/// Returns the resultant and whether any pair was degenerate (coincident
/// centers).
pub fn resultant_force(
    positions: &[Vector2<f64>],
    self_index: usize,
    cfg: &RepulsiveConfig,
) -> (Vector2<f64>, bool) {
    let mut total = Vector2::zeros();
    let mut degenerate = false;
    for (j, pos_j) in positions.iter().enumerate() {
        if j == self_index {
            continue;
        }
        let geom = PairGeometry::between(&positions[self_index], pos_j);
        degenerate |= geom.degenerate;
        total += pair_force(&geom, cfg);
    }
    (total, degenerate)
}

/// Remaining potential-energy budget toward robot j:
/// `ΔE = max(W(ρ_min) − W(ρ_ij), 0)`.
pub fn energy_budget(rho_ij: f64, cfg: &RepulsiveConfig) -> f64 {
    (field_value(cfg.rho_min_m, cfg) - field_value(rho_ij, cfg)).max(0.0)
}

/// Maximum extra energy the tracking input can push toward robot j in one
/// sampling period: `E = −(U_o · f/‖f‖) v_max Δt`. Positive when the
/// tracking input points toward robot j (against the repulsive force).
pub fn intrusion_energy(
    u_track: &Vector2<f64>,
    f_pair: &Vector2<f64>,
    cfg: &RepulsiveConfig,
    dt: f64,
) -> f64 {
    let norm = f_pair.norm();
    debug_assert!(norm > 0.0, "intrusion energy needs a nonzero pair force");
    -(u_track.dot(f_pair) / norm) * cfg.v_max_m_per_s * dt
}

/// Blending coefficient `α_i ∈ [0, 1]`:
/// `α_{i←j} = min(β ΔE_{i←j} / E_{oi→j}, 1)` when the intrusion energy is
/// positive, 1 otherwise; `α_i` is the minimum over neighbors. Pairs with
/// zero force (outside influence range) contribute 1.
pub fn alpha_coefficient(
    u_track: &Vector2<f64>,
    pair_forces: &[Vector2<f64>],
    budgets: &[f64],
    cfg: &RepulsiveConfig,
    dt: f64,
) -> f64 {
    debug_assert_eq!(pair_forces.len(), budgets.len());
    let mut alpha = 1.0f64;
    for (f, budget) in pair_forces.iter().zip(budgets) {
        if f.norm() == 0.0 {
            continue;
        }
        let e = intrusion_energy(u_track, f, cfg, dt);
        let a_j = if e > 0.0 {
            (cfg.beta * budget / e).min(1.0)
        } else {
            1.0
        };
        alpha = alpha.min(a_j);
    }
    alpha.clamp(0.0, 1.0)
}

/// Modified control input `U = F_r + α U_o`.
pub fn modified_input(u_track: &Vector2<f64>, f_r: &Vector2<f64>, alpha: f64) -> Vector2<f64> {
    debug_assert!((0.0..=1.0).contains(&alpha));
    f_r + u_track * alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg() -> RepulsiveConfig {
        RepulsiveConfig::default()
    }

    #[test]
    fn default_config_valid_with_energy_warning() {
        let warnings = cfg().validate().unwrap();
        // W(0.30) = 0.694 J while 0.5*18*1.5^2 = 20.25 J, so the published
        // constants cannot satisfy the energy inequality
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("energy feasibility"));
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = cfg();
        c.beta = 1.2;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.rho_min_m = 0.4; // > rho0
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.gamma_m = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn field_value_branches() {
        let c = cfg();
        assert_eq!(field_value(0.5, &c), 0.0); // beyond rho0
        assert_eq!(field_value(c.rho0_m, &c), 0.0); // continuous at rho0
                                                    // ½·4.5·(1/0.3 − 1/0.36)²
        assert_relative_eq!(field_value(0.3, &c), 0.694_444_444_444_444, epsilon = 1e-12);
        // plateau inside the robot radius
        assert_relative_eq!(
            field_value(0.1, &c),
            0.5 * 4.5 * (1.0f64 / 0.15 - 1.0 / 0.36).powi(2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn pair_force_magnitude_and_direction() {
        let c = cfg();
        // neighbor 0.3 m east of self: force pushes west←east onto self
        let geom = PairGeometry::between(&Vector2::new(0.0, 0.0), &Vector2::new(0.3, 0.0));
        let f = pair_force(&geom, &c);
        // 4.5·(1/0.3 − 1/0.36)/0.09 = 27.78 N
        assert_relative_eq!(f.norm(), 27.777_777_777_777_7, epsilon = 1e-10);
        assert_relative_eq!(f.x, -27.777_777_777_777_7, epsilon = 1e-10);
        assert_eq!(f.y, 0.0);

        // beyond influence: exactly zero
        let geom = PairGeometry::between(&Vector2::new(0.0, 0.0), &Vector2::new(0.4, 0.0));
        assert_eq!(pair_force(&geom, &c), Vector2::zeros());
    }

    #[test]
    fn pair_force_continuous_at_rho0_and_bounded_by_plateau() {
        let c = cfg();
        let just_inside = PairGeometry {
            rho: c.rho0_m - 1e-9,
            unit: Vector2::new(1.0, 0.0),
            degenerate: false,
        };
        assert!(pair_force(&just_inside, &c).norm() < 1e-6);

        // magnitude nonincreasing in rho on (gamma, rho0]
        let mut prev = f64::INFINITY;
        let mut rho = c.gamma_m + 1e-6;
        while rho <= c.rho0_m {
            let geom = PairGeometry {
                rho,
                unit: Vector2::new(1.0, 0.0),
                degenerate: false,
            };
            let mag = pair_force(&geom, &c).norm();
            assert!(mag <= prev + 1e-12);
            assert!(mag <= c.plateau_force() + 1e-12);
            prev = mag;
            rho += 0.002;
        }
    }

    #[test]
    fn coincident_centers_flagged_and_finite() {
        let c = cfg();
        let geom = PairGeometry::between(&Vector2::new(1.0, 1.0), &Vector2::new(1.0, 1.0));
        assert!(geom.degenerate);
        let f = pair_force(&geom, &c);
        assert!(f.x.is_finite() && f.y.is_finite());
        assert_relative_eq!(f.norm(), c.plateau_force(), epsilon = 1e-12);
        assert_eq!(f.y, 0.0); // deterministic +x direction
    }

    #[test]
    fn resultant_force_composition() {
        let c = cfg();
        // all pairs beyond rho0
        let far = vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(0.0, 1.0),
        ];
        let (f, degen) = resultant_force(&far, 0, &c);
        assert_eq!(f, Vector2::zeros());
        assert!(!degen);

        // symmetric neighbors cancel on the middle robot
        let symmetric = vec![
            Vector2::new(-0.3, 0.0),
            Vector2::new(0.0, 0.0),
            Vector2::new(0.3, 0.0),
        ];
        let (f, _) = resultant_force(&symmetric, 1, &c);
        assert_relative_eq!(f.norm(), 0.0, epsilon = 1e-12);

        // one neighbor inside range, one outside
        let mixed = vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(0.3, 0.0),
            Vector2::new(5.0, 5.0),
        ];
        let (f, _) = resultant_force(&mixed, 0, &c);
        assert_relative_eq!(f.x, -27.777_777_777_777_7, epsilon = 1e-10);
    }

    #[test]
    fn energy_budget_values() {
        let c = cfg();
        assert_eq!(energy_budget(c.rho_min_m, &c), 0.0);
        // beyond rho0 the full budget W(rho_min) remains
        assert_relative_eq!(
            energy_budget(1.0, &c),
            0.694_444_444_444_444,
            epsilon = 1e-12
        );
        // W(0.3) − W(0.33), both evaluated through field_value
        let expected = field_value(0.3, &c) - field_value(0.33, &c);
        assert_relative_eq!(expected, 0.550_964_187_327_824, epsilon = 1e-12);
        assert_relative_eq!(energy_budget(0.33, &c), expected, epsilon = 1e-15);
    }

    #[test]
    fn intrusion_energy_sign_convention() {
        let c = cfg();
        let f = Vector2::new(10.0, 0.0);

        // perpendicular tracking input: no intrusion
        assert_eq!(intrusion_energy(&Vector2::new(0.0, 3.0), &f, &c, 0.05), 0.0);

        // fleeing along the force: negative (no intrusion)
        assert!(intrusion_energy(&Vector2::new(2.0, 0.0), &f, &c, 0.05) < 0.0);

        // 10 N straight against the force, v_max=1.5, dt=0.05 → 0.75 J
        let toward = Vector2::new(-10.0, 0.0);
        assert_relative_eq!(
            intrusion_energy(&toward, &f, &c, 0.05),
            0.75,
            epsilon = 1e-12
        );
    }

    #[test]
    fn alpha_examples() {
        let c = cfg();
        let f = Vector2::new(27.78, 0.0);

        // all intrusion energies nonpositive → alpha 1
        let fleeing = Vector2::new(5.0, 0.0);
        assert_eq!(alpha_coefficient(&fleeing, &[f], &[0.5], &c, 0.05), 1.0);

        // beta=0.9, budget=0.5516, E=0.75 → 0.66192
        let toward = Vector2::new(-10.0, 0.0);
        let e = intrusion_energy(&toward, &f, &c, 0.05);
        assert_relative_eq!(e, 0.75, epsilon = 1e-12);
        let alpha = alpha_coefficient(&toward, &[f], &[0.5516], &c, 0.05);
        assert_relative_eq!(alpha, 0.9 * 0.5516 / 0.75, epsilon = 1e-12);
        assert_relative_eq!(alpha, 0.661_92, epsilon = 1e-12);

        // zero budget with positive intrusion → tracking fully suppressed
        assert_eq!(alpha_coefficient(&toward, &[f], &[0.0], &c, 0.05), 0.0);

        // no neighbors in range → alpha 1
        assert_eq!(
            alpha_coefficient(&toward, &[Vector2::zeros()], &[0.5], &c, 0.05),
            1.0
        );
    }

    #[test]
    fn modified_input_arithmetic() {
        let u = Vector2::new(-10.0, 0.0);
        assert_eq!(modified_input(&u, &Vector2::zeros(), 1.0), u);
        let f = Vector2::new(27.78, 0.0);
        assert_eq!(modified_input(&u, &f, 0.0), f);
        let mixed = modified_input(&u, &f, 0.6619);
        assert_relative_eq!(mixed.x, 27.78 - 6.619, epsilon = 1e-12);
        assert_eq!(mixed.y, 0.0);
    }

    proptest! {
        #[test]
        fn alpha_always_in_unit_interval(
            ux in -50.0f64..50.0,
            uy in -50.0f64..50.0,
            fx in -30.0f64..30.0,
            fy in -30.0f64..30.0,
            budget in 0.0f64..2.0,
        ) {
            let c = cfg();
            let alpha = alpha_coefficient(
                &Vector2::new(ux, uy),
                &[Vector2::new(fx, fy)],
                &[budget],
                &c,
                0.05,
            );
            prop_assert!((0.0..=1.0).contains(&alpha));
        }

        #[test]
        fn alpha_monotone_in_budget_and_intrusion(
            budget_lo in 0.0f64..1.0,
            budget_hi_extra in 0.0f64..1.0,
            scale in 1.0f64..4.0,
        ) {
            let c = cfg();
            let f = Vector2::new(20.0, 0.0);
            let toward = Vector2::new(-8.0, 0.0);
            let budget_hi = budget_lo + budget_hi_extra;

            // nondecreasing in the budget
            let a_lo = alpha_coefficient(&toward, &[f], &[budget_lo], &c, 0.05);
            let a_hi = alpha_coefficient(&toward, &[f], &[budget_hi], &c, 0.05);
            prop_assert!(a_hi >= a_lo - 1e-15);

            // nonincreasing in the intrusion energy (stronger push toward j)
            let harder = toward * scale;
            let a_harder = alpha_coefficient(&harder, &[f], &[budget_lo], &c, 0.05);
            prop_assert!(a_harder <= a_lo + 1e-15);
        }
    }
}

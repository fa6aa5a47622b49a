//! Parameter adaptation: the least-squares law with covariance recursion,
//! its batch-solution counterpart, parameter projection, the normalized
//! gradient baseline, the state estimator, and the certainty-equivalence
//! control law.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::regressor::{RegressorSnapshot, ThetaVector};

/// Projection bounds for the diagonal `Θ2` estimates: known signs of the
/// nominal `k2[j]` and upper bounds `k2_upper[j] >= |k2[j]|`. Projection
/// clamps each `θ_{2j}` so that `sign_j · θ_{2j} >= 1/k2_upper[j]`, which
/// keeps `Θ2(t)` invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBounds {
    signs: Vec<f64>,
    k2_upper: Vec<f64>,
}

impl ProjectionBounds {
    pub fn new(signs: Vec<f64>, k2_upper: Vec<f64>) -> Result<Self> {
        if signs.len() != k2_upper.len() {
            return Err(Error::dims(
                "projection bounds",
                signs.len(),
                k2_upper.len(),
            ));
        }
        for (j, s) in signs.iter().enumerate() {
            if *s != 1.0 && *s != -1.0 {
                return Err(Error::InvalidParameter(format!(
                    "sign[{j}] must be ±1, got {s}"
                )));
            }
        }
        for (j, u) in k2_upper.iter().enumerate() {
            if !(*u > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "k2_upper[{j}] must be positive, got {u}"
                )));
            }
        }
        Ok(Self { signs, k2_upper })
    }

    pub fn channels(&self) -> usize {
        self.signs.len()
    }

    /// Clamps the `θ_{2j}` entries; the `Θ1` part is never modified.
    pub fn apply(&self, theta: &mut ThetaVector) {
        for j in 0..self.channels() {
            let floor = 1.0 / self.k2_upper[j];
            let s = self.signs[j];
            if s * theta.theta2_entry(j) < floor {
                theta.set_theta2_entry(j, s * floor);
            }
        }
    }

    /// True when every `θ_{2j}` satisfies the bound.
    pub fn satisfied(&self, theta: &ThetaVector) -> bool {
        (0..self.channels())
            .all(|j| self.signs[j] * theta.theta2_entry(j) >= 1.0 / self.k2_upper[j] - 1e-15)
    }
}

/// Clamps the `Θ2` entries of `theta` and returns the result.
pub fn project_theta2(mut theta: ThetaVector, bounds: &ProjectionBounds) -> ThetaVector {
    bounds.apply(&mut theta);
    theta
}

/// One recorded regressor datum, for the batch oracle.
#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub z: DMatrix<f64>,
    pub mu: DVector<f64>,
}

/// Diagnostics of one accepted least-squares step.
#[derive(Debug, Clone, Copy)]
pub struct RlsStepInfo {
    /// `εᵀ N⁻¹ ε`, the exact decrement of `V = θ̃ᵀ P⁻¹(t−1) θ̃`.
    pub v_decrement: f64,
}

/// Complete least-squares adaptation state.
///
/// The update at step t is
///
/// ```text
/// N(t)   = κ I + Zᵀ(t) P(t−1) Z(t)
/// θ(t+1) = θ(t) − P(t−1) Z(t) N⁻¹(t) ε(t)
/// P(t)   = P(t−1) − P(t−1) Z(t) N⁻¹(t) Zᵀ(t) P(t−1)
/// ```
///
/// with `P(−1) = P0 = P0ᵀ > 0` and `κ > 0`. `P` is re-symmetrized after
/// every step and `N⁻¹` is applied through a Cholesky factorization.
#[derive(Debug, Clone)]
pub struct RlsState {
    theta: ThetaVector,
    p: DMatrix<f64>,
    kappa: f64,
    projection: Option<ProjectionBounds>,
    history: Option<Vec<HistoryEntry>>,
}

impl RlsState {
    pub fn new(
        theta0: ThetaVector,
        p0: DMatrix<f64>,
        kappa: f64,
        projection: Option<ProjectionBounds>,
    ) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        let d = theta0.dim();
        if p0.nrows() != d || p0.ncols() != d {
            return Err(Error::dims(
                "P0",
                format!("{d}x{d}"),
                format!("{}x{}", p0.nrows(), p0.ncols()),
            ));
        }
        if p0.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter(
                "P0 must be symmetric positive definite".into(),
            ));
        }
        if let Some(b) = &projection {
            if b.channels() != theta0.input_dim() {
                return Err(Error::dims(
                    "projection channels",
                    theta0.input_dim(),
                    b.channels(),
                ));
            }
        }
        Ok(Self {
            theta: theta0,
            p: p0,
            kappa,
            projection,
            history: None,
        })
    }

    /// Starts recording `(Z, μ)` pairs for [`batch_solve`] cross-checks.
    pub fn enable_history(&mut self) {
        self.history = Some(Vec::new());
    }

    pub fn history(&self) -> Option<&[HistoryEntry]> {
        self.history.as_deref()
    }

    pub fn theta(&self) -> &ThetaVector {
        &self.theta
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn projection(&self) -> Option<&ProjectionBounds> {
        self.projection.as_ref()
    }

    /// Applies one least-squares step with the step-t snapshot.
    pub fn update(&mut self, snap: &RegressorSnapshot) -> Result<RlsStepInfo> {
        let d = self.theta.dim();
        let n = snap.state_dim();
        if snap.theta_dim() != d {
            return Err(Error::dims("snapshot theta dim", d, snap.theta_dim()));
        }

        let pz = &self.p * &snap.z; // d×n
        let mut nmat = snap.z.transpose() * &pz; // n×n
        for i in 0..n {
            nmat[(i, i)] += self.kappa;
        }
        let chol = Cholesky::new(nmat)
            .ok_or_else(|| Error::Numeric("N(t) lost positive definiteness".into()))?;

        let ninv_eps = chol.solve(&snap.epsilon);
        let info = RlsStepInfo {
            v_decrement: snap.epsilon.dot(&ninv_eps),
        };

        *self.theta.as_vector_mut() -= &pz * &ninv_eps;
        let ninv_ztp = chol.solve(&pz.transpose()); // n×d
        self.p -= &pz * ninv_ztp;
        // kill asymmetry drift
        let pt = self.p.transpose();
        self.p += pt;
        self.p *= 0.5;

        if let Some(bounds) = &self.projection {
            bounds.apply(&mut self.theta);
        }
        if let Some(h) = &mut self.history {
            h.push(HistoryEntry {
                z: snap.z.clone(),
                mu: snap.mu.clone(),
            });
        }
        Ok(info)
    }
}

/// Closed-form minimizer of the accumulated-error cost over a finite
/// history: `θ = P(t−1) (P0⁻¹ θ0 − Σ_τ Z(τ) μ(τ)/κ)` with
/// `P(t−1) = (P0⁻¹ + Σ_τ Z(τ) Zᵀ(τ)/κ)⁻¹`.
///
/// This is the independent oracle for the recursive law: it rebuilds the
/// normal equations from scratch instead of reusing the recursion.
pub fn batch_solve(
    history: &[HistoryEntry],
    p0: &DMatrix<f64>,
    theta0: &ThetaVector,
    kappa: f64,
) -> Result<ThetaVector> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    let d = theta0.dim();
    let p0_chol = p0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("P0 must be symmetric positive definite".into()))?;
    let p0_inv = p0_chol.inverse();

    let mut gram = p0_inv.clone();
    let mut rhs = &p0_inv * theta0.as_vector();
    for entry in history {
        if entry.z.nrows() != d {
            return Err(Error::dims("history Z rows", d, entry.z.nrows()));
        }
        gram += (&entry.z * entry.z.transpose()) / kappa;
        rhs -= (&entry.z * &entry.mu) / kappa;
    }
    let chol = Cholesky::new(gram)
        .ok_or_else(|| Error::Numeric("batch normal equations not positive definite".into()))?;
    ThetaVector::new(theta0.state_dim(), theta0.input_dim(), chol.solve(&rhs))
}

/// Max-norm of the cost gradient
/// `Σ_τ Z(τ)(μ(τ) + Zᵀ(τ)θ)/κ + P0⁻¹(θ − θ0)` at `theta`; zero at the
/// batch minimizer.
pub fn batch_stationarity_residual(
    history: &[HistoryEntry],
    p0: &DMatrix<f64>,
    theta0: &ThetaVector,
    kappa: f64,
    theta: &ThetaVector,
) -> Result<f64> {
    let p0_chol = p0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("P0 must be symmetric positive definite".into()))?;
    let mut grad = p0_chol.solve(&(theta.as_vector() - theta0.as_vector()));
    for entry in history {
        let eps = &entry.mu + entry.z.transpose() * theta.as_vector();
        grad += (&entry.z * eps) / kappa;
    }
    Ok(if grad.is_empty() { 0.0 } else { grad.amax() })
}

/// Normalized-gradient adaptation state (the comparison baseline).
///
/// The per-channel update is `θ_j(t+1) = θ_j(t) − γ Σ_k ε_k(t) ζ_kj(t) / m²(t)`
/// with `m²(t) = 1 + Σ_ij (ζ_ijᵀζ_ij + ξ_ij²)`; a uniform scalar gain
/// `Γ_j = γ I`, `0 < γ < 2`, stands in for the per-channel gain matrices.
#[derive(Debug, Clone)]
pub struct GradientState {
    theta: ThetaVector,
    gain: f64,
    projection: Option<ProjectionBounds>,
}

impl GradientState {
    pub fn new(
        theta0: ThetaVector,
        gain: f64,
        projection: Option<ProjectionBounds>,
    ) -> Result<Self> {
        if !(gain > 0.0 && gain < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "gradient gain must lie in (0, 2), got {gain}"
            )));
        }
        if let Some(b) = &projection {
            if b.channels() != theta0.input_dim() {
                return Err(Error::dims(
                    "projection channels",
                    theta0.input_dim(),
                    b.channels(),
                ));
            }
        }
        Ok(Self {
            theta: theta0,
            gain,
            projection,
        })
    }

    pub fn theta(&self) -> &ThetaVector {
        &self.theta
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn update(&mut self, snap: &RegressorSnapshot) -> Result<()> {
        if snap.theta_dim() != self.theta.dim() {
            return Err(Error::dims(
                "snapshot theta dim",
                self.theta.dim(),
                snap.theta_dim(),
            ));
        }
        let m_sq = 1.0 + snap.zeta_norm_sq + snap.xi_norm_sq;
        // Z ε stacks Σ_k ε_k ζ_kj channel by channel
        *self.theta.as_vector_mut() -= (&snap.z * &snap.epsilon) * (self.gain / m_sq);
        if let Some(bounds) = &self.projection {
            bounds.apply(&mut self.theta);
        }
        Ok(())
    }
}

/// State estimator `x̂(t+1) = A_m x̂(t) + B_m (Θ2(t) u(t) − Θ1ᵀ(t) x(t))`.
///
/// `u` must be the input actually applied to the plant.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    xhat: DVector<f64>,
}

impl EstimatorState {
    pub fn new(xhat0: DVector<f64>) -> Self {
        Self { xhat: xhat0 }
    }

    pub fn xhat(&self) -> &DVector<f64> {
        &self.xhat
    }

    /// `e_x(t) = x̂(t) − x(t)`.
    pub fn error(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.xhat - x
    }

    pub fn advance(
        &mut self,
        theta: &ThetaVector,
        x: &DVector<f64>,
        u: &DVector<f64>,
        a_m: &DMatrix<f64>,
        b_m: &DMatrix<f64>,
    ) -> Result<()> {
        let n = self.xhat.len();
        if x.len() != n {
            return Err(Error::dims("estimator state", n, x.len()));
        }
        if u.len() != theta.input_dim() {
            return Err(Error::dims("estimator input", theta.input_dim(), u.len()));
        }
        let theta2u = theta.theta2_diag().component_mul(u);
        let inner = theta2u - theta.theta1().transpose() * x;
        self.xhat = a_m * &self.xhat + b_m * inner;
        Ok(())
    }
}

/// Certainty-equivalence control `u = Θ2⁻¹ (Θ1ᵀ x + r)`; `Θ2` is diagonal,
/// so the inverse is per-entry division. Projection keeps the entries away
/// from zero; a zero entry is a contract violation.
pub fn control_law(
    theta: &ThetaVector,
    x: &DVector<f64>,
    r: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = theta.state_dim();
    let m = theta.input_dim();
    if x.len() != n {
        return Err(Error::dims("control state", n, x.len()));
    }
    if r.len() != m {
        return Err(Error::dims("control reference", m, r.len()));
    }
    let mut u = theta.theta1().transpose() * x + r;
    for j in 0..m {
        let t2 = theta.theta2_entry(j);
        if t2 == 0.0 {
            return Err(Error::Numeric(format!(
                "theta2[{j}] is zero; projection must keep it away from 0"
            )));
        }
        u[j] /= t2;
    }
    Ok(u)
}

/// `V(θ̃, t) = θ̃ᵀ P⁻¹(t−1) θ̃` evaluated through a Cholesky solve.
///
/// Needs the nominal `θ*`, so it is only available in synthetic and test
/// scenarios.
pub fn lyapunov_monitor(
    theta: &ThetaVector,
    theta_star: &ThetaVector,
    p: &DMatrix<f64>,
) -> Result<f64> {
    if theta.dim() != theta_star.dim() {
        return Err(Error::dims(
            "lyapunov theta dims",
            theta_star.dim(),
            theta.dim(),
        ));
    }
    let tilde = theta.as_vector() - theta_star.as_vector();
    let chol: Cholesky<f64, Dyn> = Cholesky::new(p.clone())
        .ok_or_else(|| Error::Numeric("P lost positive definiteness".into()))?;
    let solved = chol.solve(&tilde);
    Ok(tilde.dot(&solved))
}

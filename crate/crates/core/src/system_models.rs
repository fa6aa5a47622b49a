//! Discrete-time LTI plant and reference-model state machines, plus the
//! state-feedback matching machinery that ties them together.
//!
//! The plant is `x(t+1) = A x(t) + B u(t)` with unknown `A`, `B`; the
//! reference model `x_m(t+1) = A_m x_m(t) + B_m r(t)` is designer-chosen and
//! stable. Matching gains `K1`, `K2` satisfy `A + B K1ᵀ = A_m`, `B K2 = B_m`,
//! which the adaptive scheme estimates indirectly through
//! `Θ1 = K1 K2⁻ᵀ`, `Θ2 = K2⁻¹`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Strict residual limit for [`solve_matching_gains`] in strict mode.
pub const STRICT_MATCHING_LIMIT: f64 = 1e-9;

/// Discrete-time LTI plant `x(t+1) = A x(t) + B u(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiPlant {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LtiPlant {
    /// Builds a plant from its state and input matrices.
    ///
    /// `B` must have full column rank, otherwise no matching gains exist.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dims(
                "LtiPlant A",
                "square",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::dims("LtiPlant B rows", a.nrows(), b.nrows()));
        }
        if b.ncols() == 0 || b.ncols() > b.nrows() {
            return Err(Error::InvalidParameter(format!(
                "input dimension m={} must satisfy 1 <= m <= n={}",
                b.ncols(),
                b.nrows()
            )));
        }
        let rank = b.clone().svd(false, false).rank(1e-12);
        if rank < b.ncols() {
            return Err(Error::InvalidParameter(format!(
                "B must have full column rank (rank {} < {})",
                rank,
                b.ncols()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// One plant step: `A x + B u`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::dims("plant step state", self.state_dim(), x.len()));
        }
        if u.len() != self.input_dim() {
            return Err(Error::dims("plant step input", self.input_dim(), u.len()));
        }
        Ok(&self.a * x + &self.b * u)
    }
}

/// Point-mass planar robot plant in the printed discrete form:
/// state `[x, y, vx, vy]`, input `[ux, uy]` (traction force, N).
///
/// ```text
/// A = [ I2  (1 - 0.5 b Δt²/m) I2 ]      B = [ 0.5 Δt²/m I2 ]
///     [ 0   (1 - b Δt/m) I2     ]          [ Δt/m I2      ]
/// ```
///
/// The position-velocity coupling block is `1 - 0.5 b Δt²/m` (not
/// `Δt - 0.5 b Δt²/m`); the companion reference-model constants are only
/// consistent with this form, so it is implemented verbatim.
pub fn robot_plant(mass_kg: f64, friction_n_s_per_m: f64, dt_s: f64) -> Result<LtiPlant> {
    if !(mass_kg > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mass must be positive, got {mass_kg}"
        )));
    }
    if !(dt_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {dt_s}"
        )));
    }
    if !(friction_n_s_per_m >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "friction must be nonnegative, got {friction_n_s_per_m}"
        )));
    }
    let pv = 1.0 - 0.5 * friction_n_s_per_m * dt_s * dt_s / mass_kg;
    let vv = 1.0 - friction_n_s_per_m * dt_s / mass_kg;
    let bp = 0.5 * dt_s * dt_s / mass_kg;
    let bv = dt_s / mass_kg;

    let mut a = DMatrix::zeros(4, 4);
    let mut b = DMatrix::zeros(4, 2);
    for k in 0..2 {
        a[(k, k)] = 1.0;
        a[(k, k + 2)] = pv;
        a[(k + 2, k + 2)] = vv;
        b[(k, k)] = bp;
        b[(k + 2, k)] = bv;
    }
    LtiPlant::new(a, b)
}

/// Reference-input generator `r(t)`, per robot.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceInput {
    Zero {
        dim: usize,
    },
    Constant {
        value: DVector<f64>,
    },
    /// Component k is `amplitude[k] * sin(omega * t + phase[k])`.
    Sinusoid {
        amplitude: DVector<f64>,
        omega_rad_per_step: f64,
        phase_rad: DVector<f64>,
    },
}

impl ReferenceInput {
    pub fn dim(&self) -> usize {
        match self {
            ReferenceInput::Zero { dim } => *dim,
            ReferenceInput::Constant { value } => value.len(),
            ReferenceInput::Sinusoid { amplitude, .. } => amplitude.len(),
        }
    }

    pub fn at(&self, t: usize) -> DVector<f64> {
        match self {
            ReferenceInput::Zero { dim } => DVector::zeros(*dim),
            ReferenceInput::Constant { value } => value.clone(),
            ReferenceInput::Sinusoid {
                amplitude,
                omega_rad_per_step,
                phase_rad,
            } => {
                let arg = omega_rad_per_step * t as f64;
                DVector::from_iterator(
                    amplitude.len(),
                    amplitude
                        .iter()
                        .zip(phase_rad.iter())
                        .map(|(a, p)| a * (arg + p).sin()),
                )
            }
        }
    }

    /// Upper bound on `|r(t)|`, valid for every step.
    pub fn bound(&self) -> f64 {
        match self {
            ReferenceInput::Zero { .. } => 0.0,
            ReferenceInput::Constant { value } => value.amax(),
            ReferenceInput::Sinusoid { amplitude, .. } => amplitude.amax(),
        }
    }
}

/// Stable reference model `x_m(t+1) = A_m x_m(t) + B_m r(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    a_m: DMatrix<f64>,
    b_m: DMatrix<f64>,
    input: ReferenceInput,
}

impl ReferenceModel {
    /// Requires spectral radius of `A_m` strictly below one.
    pub fn new(a_m: DMatrix<f64>, b_m: DMatrix<f64>, input: ReferenceInput) -> Result<Self> {
        if !a_m.is_square() {
            return Err(Error::dims(
                "ReferenceModel A_m",
                "square",
                format!("{}x{}", a_m.nrows(), a_m.ncols()),
            ));
        }
        if b_m.nrows() != a_m.nrows() {
            return Err(Error::dims(
                "ReferenceModel B_m rows",
                a_m.nrows(),
                b_m.nrows(),
            ));
        }
        if input.dim() != b_m.ncols() {
            return Err(Error::dims(
                "ReferenceModel input dim",
                b_m.ncols(),
                input.dim(),
            ));
        }
        let rho = spectral_radius(&a_m);
        if !(rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "A_m must be Schur stable, spectral radius {rho:.6}"
            )));
        }
        Ok(Self { a_m, b_m, input })
    }

    pub fn a_m(&self) -> &DMatrix<f64> {
        &self.a_m
    }

    pub fn b_m(&self) -> &DMatrix<f64> {
        &self.b_m
    }

    pub fn input(&self) -> &ReferenceInput {
        &self.input
    }

    pub fn reference_input(&self, t: usize) -> DVector<f64> {
        self.input.at(t)
    }

    /// One reference step: `A_m x_m + B_m r(t)`.
    pub fn step(&self, x_m: &DVector<f64>, t: usize) -> Result<DVector<f64>> {
        if x_m.len() != self.a_m.nrows() {
            return Err(Error::dims(
                "reference step state",
                self.a_m.nrows(),
                x_m.len(),
            ));
        }
        Ok(&self.a_m * x_m + &self.b_m * self.input.at(t))
    }
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

/// Nominal matching gains and their indirect-form parameters.
///
/// `K2` is diagonal with known entry signs; `theta2_diag[j] = 1/k2[j]` and
/// `theta1` column j is `K1` column j scaled by `1/k2[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingParameters {
    pub k1: DMatrix<f64>,
    pub k2_diag: DVector<f64>,
    pub theta1: DMatrix<f64>,
    pub theta2_diag: DVector<f64>,
    /// sign of each `k2[j]` (±1).
    pub signs: DVector<f64>,
    /// Known upper bounds `k2_upper[j] >= |k2[j]|`, used by projection.
    pub k2_upper: DVector<f64>,
}

impl MatchingParameters {
    pub fn from_gains(
        k1: DMatrix<f64>,
        k2_diag: DVector<f64>,
        k2_upper: Option<DVector<f64>>,
    ) -> Result<Self> {
        let m = k2_diag.len();
        if k1.ncols() != m {
            return Err(Error::dims("K1 columns", m, k1.ncols()));
        }
        for (j, k) in k2_diag.iter().enumerate() {
            if !k.is_finite() || *k == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "k2[{j}] must be finite and nonzero, got {k}"
                )));
            }
        }
        let k2_upper = match k2_upper {
            Some(u) => {
                if u.len() != m {
                    return Err(Error::dims("k2_upper length", m, u.len()));
                }
                for (j, (u_j, k_j)) in u.iter().zip(k2_diag.iter()).enumerate() {
                    if !(*u_j >= k_j.abs()) {
                        return Err(Error::InvalidParameter(format!(
                            "k2_upper[{j}]={u_j} must be >= |k2[{j}]|={}",
                            k_j.abs()
                        )));
                    }
                }
                u
            }
            None => k2_diag.map(|k| 2.0 * k.abs()),
        };
        let theta2_diag = k2_diag.map(|k| 1.0 / k);
        let mut theta1 = k1.clone();
        for j in 0..m {
            let s = theta2_diag[j];
            theta1.column_mut(j).scale_mut(s);
        }
        let signs = k2_diag.map(f64::signum);
        Ok(Self {
            k1,
            k2_diag,
            theta1,
            theta2_diag,
            signs,
            k2_upper,
        })
    }

    /// Rebuilds the parameters from the indirect-form values
    /// (`Θ1`, diagonal `Θ2`) printed by a design, with explicit bounds.
    pub fn from_theta(
        theta1: DMatrix<f64>,
        theta2_diag: DVector<f64>,
        k2_upper: Option<DVector<f64>>,
    ) -> Result<Self> {
        for (j, th) in theta2_diag.iter().enumerate() {
            if !th.is_finite() || *th == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "theta2[{j}] must be finite and nonzero, got {th}"
                )));
            }
        }
        let k2_diag = theta2_diag.map(|t| 1.0 / t);
        let mut k1 = theta1.clone();
        for j in 0..k2_diag.len() {
            let s = k2_diag[j];
            k1.column_mut(j).scale_mut(s);
        }
        let mut out = Self::from_gains(k1, k2_diag, k2_upper)?;
        // keep the caller's exact theta values rather than re-derived ones
        out.theta1 = theta1;
        out.theta2_diag = theta2_diag;
        Ok(out)
    }

    pub fn state_dim(&self) -> usize {
        self.k1.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.k2_diag.len()
    }
}

/// Max-abs-entry residuals of the matching condition in indirect form:
/// `a_residual = ‖A − (A_m − B_m Θ1ᵀ)‖`, `b_residual = ‖B − B_m Θ2‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingResidual {
    pub a_residual: f64,
    pub b_residual: f64,
}

impl MatchingResidual {
    pub fn max(&self) -> f64 {
        self.a_residual.max(self.b_residual)
    }
}

/// Checks how well `(A_m, B_m, Θ1, Θ2)` match the plant.
pub fn verify_matching(
    plant: &LtiPlant,
    a_m: &DMatrix<f64>,
    b_m: &DMatrix<f64>,
    params: &MatchingParameters,
) -> MatchingResidual {
    let a_hat = a_m - b_m * params.theta1.transpose();
    let theta2 = DMatrix::from_diagonal(&params.theta2_diag);
    let b_hat = b_m * theta2;
    let a_diff = plant.a() - a_hat;
    let b_diff = plant.b() - b_hat;
    MatchingResidual {
        a_residual: max_abs(&a_diff),
        b_residual: max_abs(&b_diff),
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.amax()
    }
}

/// Constructs the reference model that a gain pair matches exactly:
/// `A_m = A + B K1ᵀ`, `B_m = B K2`. The returned matrices satisfy the
/// matching condition with zero residual by construction.
pub fn build_reference_from_gains(
    plant: &LtiPlant,
    k1: DMatrix<f64>,
    k2_diag: DVector<f64>,
    k2_upper: Option<DVector<f64>>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, MatchingParameters)> {
    if k1.nrows() != plant.state_dim() {
        return Err(Error::dims("K1 rows", plant.state_dim(), k1.nrows()));
    }
    if k2_diag.len() != plant.input_dim() {
        return Err(Error::dims("K2 entries", plant.input_dim(), k2_diag.len()));
    }
    let params = MatchingParameters::from_gains(k1, k2_diag, k2_upper)?;
    let a_m = plant.a() + plant.b() * params.k1.transpose();
    let k2 = DMatrix::from_diagonal(&params.k2_diag);
    let b_m = plant.b() * k2;
    Ok((a_m, b_m, params))
}

/// Least-squares matching solve for given `(A_m, B_m)`:
/// `K1ᵀ = B⁺(A_m − A)` and, column-wise with `K2` restricted diagonal,
/// `k2[j] = ⟨B_j, B_m,j⟩ / ⟨B_j, B_j⟩`.
///
/// Returns the fitted gains and the residual of the fit against the
/// *requested* matrices. In strict mode any residual above
/// [`STRICT_MATCHING_LIMIT`] is rejected.
pub fn solve_matching_gains(
    plant: &LtiPlant,
    a_m: &DMatrix<f64>,
    b_m: &DMatrix<f64>,
    strict: bool,
) -> Result<(MatchingParameters, MatchingResidual)> {
    let n = plant.state_dim();
    let m = plant.input_dim();
    if a_m.nrows() != n || a_m.ncols() != n {
        return Err(Error::dims(
            "A_m",
            format!("{n}x{n}"),
            format!("{}x{}", a_m.nrows(), a_m.ncols()),
        ));
    }
    if b_m.nrows() != n || b_m.ncols() != m {
        return Err(Error::dims(
            "B_m",
            format!("{n}x{m}"),
            format!("{}x{}", b_m.nrows(), b_m.ncols()),
        ));
    }

    let b = plant.b();
    let gram = b.transpose() * b;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("BᵀB not positive definite".into()))?;
    let k1t = chol.solve(&(b.transpose() * (a_m - plant.a())));
    let k1 = k1t.transpose();

    let mut k2_diag = DVector::zeros(m);
    for j in 0..m {
        let bj = b.column(j);
        let denom = bj.dot(&bj);
        k2_diag[j] = bj.dot(&b_m.column(j)) / denom;
        if k2_diag[j] == 0.0 {
            return Err(Error::Numeric(format!(
                "fitted k2[{j}] is zero; B_m column {j} orthogonal to B column {j}"
            )));
        }
    }

    let a_res = a_m - (plant.a() + b * k1t);
    let k2 = DMatrix::from_diagonal(&k2_diag);
    let b_res = b_m - b * k2;
    let residual = MatchingResidual {
        a_residual: max_abs(&a_res),
        b_residual: max_abs(&b_res),
    };
    if strict && residual.max() > STRICT_MATCHING_LIMIT {
        return Err(Error::MatchingResidual {
            residual: residual.max(),
            limit: STRICT_MATCHING_LIMIT,
        });
    }
    let params = MatchingParameters::from_gains(k1, k2_diag, None)?;
    Ok((params, residual))
}

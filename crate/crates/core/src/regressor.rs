//! Regressor filtering for the reduced-order (diagonal `K2`) indirect
//! parameterization.
//!
//! The reference-model transfer matrix `W_m(z) = (zI − A_m)⁻¹ B_m` filters
//! the per-channel signals `ω_j = [−xᵀ, u_j]ᵀ` into the auxiliary signals
//!
//! ```text
//! ζ_ij(t) = w_ij(z)[ω_j](t)
//! ξ_ij(t) = θ_jᵀ(t) ζ_ij(t) − w_ij(z)[θ_jᵀ ω_j](t)
//! ν_i(t)  = Σ_j w_ij(z)[θ_jᵀ ω_j](t)
//! ```
//!
//! from which the estimation error `ε = μ + Zᵀθ` with `μ_i = e_xi − ν_i`
//! is assembled. All filters are strictly proper: outputs at step t depend
//! on inputs up to t−1 only, so each step reads outputs first and then
//! advances the state with the step-t inputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Stacked reduced parameter vector `θ ∈ R^{m(n+1)}`.
///
/// Channel j occupies the contiguous slice `[j(n+1), (j+1)(n+1))`, laid out
/// as `[Θ1 column j (n entries); θ_{2j}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    n: usize,
    m: usize,
    flat: DVector<f64>,
}

impl ThetaVector {
    pub fn new(n: usize, m: usize, flat: DVector<f64>) -> Result<Self> {
        if flat.len() != m * (n + 1) {
            return Err(Error::dims("ThetaVector length", m * (n + 1), flat.len()));
        }
        Ok(Self { n, m, flat })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            flat: DVector::zeros(m * (n + 1)),
        }
    }

    pub fn from_parts(theta1: &DMatrix<f64>, theta2_diag: &DVector<f64>) -> Self {
        let n = theta1.nrows();
        let m = theta1.ncols();
        assert_eq!(
            theta2_diag.len(),
            m,
            "theta2 entries must match input channels"
        );
        let mut flat = DVector::zeros(m * (n + 1));
        for j in 0..m {
            flat.rows_mut(j * (n + 1), n).copy_from(&theta1.column(j));
            flat[j * (n + 1) + n] = theta2_diag[j];
        }
        Self { n, m, flat }
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    /// Total length `m(n+1)`.
    pub fn dim(&self) -> usize {
        self.flat.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.flat
    }

    pub fn as_vector_mut(&mut self) -> &mut DVector<f64> {
        &mut self.flat
    }

    /// Channel slice `θ_j ∈ R^{n+1}`.
    pub fn channel(&self, j: usize) -> DVector<f64> {
        self.flat.rows(j * (self.n + 1), self.n + 1).into_owned()
    }

    /// `Θ1(t) ∈ R^{n×m}`: column j are the first n entries of `θ_j`.
    pub fn theta1(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.m);
        for j in 0..self.m {
            out.column_mut(j)
                .copy_from(&self.flat.rows(j * (self.n + 1), self.n));
        }
        out
    }

    /// Diagonal of `Θ2(t)`.
    pub fn theta2_diag(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.m,
            (0..self.m).map(|j| self.flat[j * (self.n + 1) + self.n]),
        )
    }

    pub fn theta2_entry(&self, j: usize) -> f64 {
        self.flat[j * (self.n + 1) + self.n]
    }

    pub fn set_theta2_entry(&mut self, j: usize, value: f64) {
        self.flat[j * (self.n + 1) + self.n] = value;
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            m: self.m,
            flat: &self.flat * factor,
        }
    }
}

/// Builds the per-channel regressor inputs `ω_j = [−xᵀ, u_j]ᵀ`.
///
/// `u` must be the input actually applied to the plant, including any
/// collision-avoidance component.
pub fn omega_columns(x: &DVector<f64>, u: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = x.len();
    (0..u.len())
        .map(|j| {
            let mut w = DVector::zeros(n + 1);
            w.rows_mut(0, n).copy_from(&(-x));
            w[n] = u[j];
            w
        })
        .collect()
}

/// State-space realization of the `W_m(z)` filter bank.
///
/// Per input channel j, `zeta_state[j] ∈ R^{n×(n+1)}` carries the vector
/// filter whose i-th row is `ζ_ijᵀ(t)`, and `nu_state[j] ∈ R^n` carries the
/// scalar-input filter whose i-th entry is `w_ij(z)[θ_jᵀω_j](t)`. Both share
/// the recursion `s ← A_m s + b_j · input`, which is algebraically identical
/// to running the n·(n+1) scalar filters `w_ij` separately.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    a_m: DMatrix<f64>,
    b_m: DMatrix<f64>,
    zeta_state: Vec<DMatrix<f64>>,
    nu_state: Vec<DVector<f64>>,
}

impl FilterBank {
    /// Fresh bank with zero initial filter states.
    pub fn new(a_m: DMatrix<f64>, b_m: DMatrix<f64>) -> Result<Self> {
        if !a_m.is_square() || a_m.nrows() != b_m.nrows() {
            return Err(Error::dims(
                "FilterBank matrices",
                format!("{0}x{0} and {0}xm", a_m.nrows()),
                format!(
                    "{}x{} and {}x{}",
                    a_m.nrows(),
                    a_m.ncols(),
                    b_m.nrows(),
                    b_m.ncols()
                ),
            ));
        }
        let n = a_m.nrows();
        let m = b_m.ncols();
        Ok(Self {
            a_m,
            b_m,
            zeta_state: vec![DMatrix::zeros(n, n + 1); m],
            nu_state: vec![DVector::zeros(n); m],
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a_m.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_m.ncols()
    }

    /// Advances every filter one step with the step-t inputs.
    ///
    /// `theta` must be the pre-update estimate θ(t); it feeds the ν-channel
    /// input `θ_jᵀ(t) ω_j(t)`.
    pub fn advance(&mut self, omega: &[DVector<f64>], theta: &ThetaVector) -> Result<()> {
        let n = self.state_dim();
        let m = self.input_dim();
        if omega.len() != m {
            return Err(Error::dims("filter advance channels", m, omega.len()));
        }
        if theta.state_dim() != n || theta.input_dim() != m {
            return Err(Error::dims(
                "filter advance theta",
                m * (n + 1),
                theta.dim(),
            ));
        }
        for (j, w) in omega.iter().enumerate() {
            if w.len() != n + 1 {
                return Err(Error::dims("omega column", n + 1, w.len()));
            }
            let bj = self.b_m.column(j);
            let scalar = theta.channel(j).dot(w);
            self.zeta_state[j] = &self.a_m * &self.zeta_state[j] + bj * w.transpose();
            self.nu_state[j] = &self.a_m * &self.nu_state[j] + bj * scalar;
        }
        Ok(())
    }

    /// `ζ_ij(t) ∈ R^{n+1}`: row i of the channel-j vector filter state.
    pub fn zeta(&self, i: usize, j: usize) -> DVector<f64> {
        self.zeta_state[j].row(i).transpose()
    }

    /// Stacked `ζ_i(t) = [ζ_i1; …; ζ_im] ∈ R^{m(n+1)}`.
    pub fn zeta_stacked(&self, i: usize) -> DVector<f64> {
        let n = self.state_dim();
        let m = self.input_dim();
        let mut out = DVector::zeros(m * (n + 1));
        for j in 0..m {
            out.rows_mut(j * (n + 1), n + 1)
                .copy_from(&self.zeta_state[j].row(i).transpose());
        }
        out
    }

    /// `ν(t) ∈ R^n` with `ν_i = Σ_j w_ij(z)[θ_jᵀω_j](t)`.
    pub fn nu(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.state_dim());
        for s in &self.nu_state {
            out += s;
        }
        out
    }

    /// `ξ(t) ∈ R^{n×m}` with `ξ_ij = θ_jᵀ ζ_ij − w_ij(z)[θ_jᵀ ω_j]`.
    ///
    /// Column j is `zeta_state[j]·θ_j − nu_state[j]`, so freezing θ makes
    /// `ξ_{·j}(t+1) = A_m ξ_{·j}(t)` exactly.
    pub fn xi(&self, theta: &ThetaVector) -> DMatrix<f64> {
        let n = self.state_dim();
        let m = self.input_dim();
        let mut out = DMatrix::zeros(n, m);
        for j in 0..m {
            let col = &self.zeta_state[j] * theta.channel(j) - &self.nu_state[j];
            out.column_mut(j).copy_from(&col);
        }
        out
    }

    /// Reads the step-t regressor quantities and assembles the estimation
    /// error `ε = μ + Zᵀθ` with `μ = e_x − ν`.
    pub fn snapshot(&self, theta: &ThetaVector, e_x: &DVector<f64>) -> Result<RegressorSnapshot> {
        let n = self.state_dim();
        let m = self.input_dim();
        if e_x.len() != n {
            return Err(Error::dims("snapshot e_x", n, e_x.len()));
        }
        let d = m * (n + 1);
        let mut z = DMatrix::zeros(d, n);
        for i in 0..n {
            z.column_mut(i).copy_from(&self.zeta_stacked(i));
        }
        let mu = e_x - self.nu();
        let epsilon = &mu + z.transpose() * theta.as_vector();

        let xi = self.xi(theta);
        let mut xi_sum = DVector::zeros(n);
        let mut xi_norm_sq = 0.0;
        let mut xi_max_abs = 0.0f64;
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..m {
                let v = xi[(i, j)];
                row_sum += v;
                xi_norm_sq += v * v;
                xi_max_abs = xi_max_abs.max(v.abs());
            }
            xi_sum[i] = row_sum;
        }
        let zeta_norm_sq = z.iter().map(|v| v * v).sum();

        Ok(RegressorSnapshot {
            z,
            mu,
            epsilon,
            xi_sum,
            zeta_norm_sq,
            xi_norm_sq,
            xi_max_abs,
        })
    }
}

/// Immutable per-step view of the regressor quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSnapshot {
    /// `Z(t) = [ζ_1, …, ζ_n] ∈ R^{m(n+1)×n}`.
    pub z: DMatrix<f64>,
    /// `μ(t)` with `μ_i = e_xi − ν_i`.
    pub mu: DVector<f64>,
    /// `ε(t) = μ(t) + Zᵀ(t) θ(t)`.
    pub epsilon: DVector<f64>,
    /// i-th entry is `Σ_j ξ_ij(t)`.
    pub xi_sum: DVector<f64>,
    /// `Σ_ij ζ_ijᵀ ζ_ij`.
    pub zeta_norm_sq: f64,
    /// `Σ_ij ξ_ij²`.
    pub xi_norm_sq: f64,
    /// `max_ij |ξ_ij|`.
    pub xi_max_abs: f64,
}

impl RegressorSnapshot {
    pub fn theta_dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.z.ncols()
    }
}

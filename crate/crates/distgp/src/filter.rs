//! Kalman tracking of the feature-space coefficient vector.
//!
//! The field is modeled as `f(x, t) = phi(x)^T theta(t)` with `theta`
//! performing a random walk (per-step noise `sigma_omega`), observed through
//! scalar measurements `y = phi(x)^T theta + nu`. Each agent runs the
//! moment-form filter here and converts to information form
//! (`L = P^{-1} theta`, `Omega = P^{-1}`) whenever estimates are exchanged,
//! because information is additive and averages cleanly.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Eigenvalue floor applied to an information matrix that has been damped
/// into singularity by the forgetting baseline.
pub const INFO_EIGENVALUE_FLOOR: f64 = 1e-12;

/// Process / measurement noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub sigma_omega: f64,
    pub sigma_nu: f64,
}

impl NoiseParams {
    pub fn new(sigma_omega: f64, sigma_nu: f64) -> Result<Self> {
        if !(sigma_omega >= 0.0) || !sigma_omega.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sigma_omega must be >= 0, got {sigma_omega}"
            )));
        }
        if !(sigma_nu > 0.0) || !sigma_nu.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sigma_nu must be > 0, got {sigma_nu}"
            )));
        }
        Ok(Self { sigma_omega, sigma_nu })
    }
}

/// Which covariance-update formula the measurement step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovUpdate {
    /// (I - K H)(P + sigma_omega^2 I), then symmetrize.
    #[default]
    Standard,
    /// Joseph-stabilized form; more work, better conditioning under stress.
    Joseph,
}

/// Coefficient estimate and covariance in moment form.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub theta: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Time index of the last measurement update.
    pub t_last: u64,
}

/// Information form twin of [`FilterState`]: `info_vec = P^{-1} theta`,
/// `info_mat = P^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoState {
    pub info_vec: DVector<f64>,
    pub info_mat: DMatrix<f64>,
}

impl FilterState {
    /// Zero estimate with covariance `sigma_init^2 I`.
    pub fn new(dim: usize, sigma_init: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("state dimension must be >= 1".into()));
        }
        if !(sigma_init > 0.0) || !sigma_init.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sigma_init must be > 0, got {sigma_init}"
            )));
        }
        Ok(Self {
            theta: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * (sigma_init * sigma_init),
            t_last: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Random-walk prediction: inflate the covariance by
    /// `elapsed * sigma_omega^2 I`. One inflation per model step keeps the
    /// filter consistent when sensing is sparser than the model clock.
    pub fn predict(&mut self, sigma_omega: f64, elapsed: u64) {
        let add = elapsed as f64 * sigma_omega * sigma_omega;
        for i in 0..self.dim() {
            self.cov[(i, i)] += add;
        }
    }

    /// Prediction followed by a scalar measurement update with `H = phi^T`:
    ///
    ///   K     <- P_pred phi / (phi^T P_pred phi + sigma_nu^2)
    ///   theta <- theta + K (y - phi^T theta)
    ///   P     <- (I - K phi^T) P_pred
    pub fn predict_update(
        &mut self,
        phi: &DVector<f64>,
        y: f64,
        noise: &NoiseParams,
        elapsed: u64,
    ) -> Result<()> {
        self.predict_update_with(phi, y, noise, elapsed, CovUpdate::Standard)
    }

    pub fn predict_update_with(
        &mut self,
        phi: &DVector<f64>,
        y: f64,
        noise: &NoiseParams,
        elapsed: u64,
        form: CovUpdate,
    ) -> Result<()> {
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch(phi.len(), self.dim()));
        }
        if elapsed == 0 {
            return Err(Error::InvalidInput("elapsed must be >= 1".into()));
        }
        if !y.is_finite() || phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "non-finite measurement or feature vector".into(),
            ));
        }

        self.predict(noise.sigma_omega, elapsed);

        let w = &self.cov * phi; // P_pred phi
        let s = phi.dot(&w) + noise.sigma_nu * noise.sigma_nu;
        let gain = &w / s;
        let innovation = y - phi.dot(&self.theta);
        self.theta.axpy(innovation, &gain, 1.0);

        match form {
            CovUpdate::Standard => {
                // (I - K phi^T) P_pred = P_pred - w w^T / s, using symmetry
                // of P_pred.
                self.cov.ger(-1.0 / s, &w, &w, 1.0);
            }
            CovUpdate::Joseph => {
                let dim = self.dim();
                let ikh = DMatrix::identity(dim, dim) - &gain * phi.transpose();
                self.cov = &ikh * &self.cov * ikh.transpose();
                self.cov.ger(
                    noise.sigma_nu * noise.sigma_nu,
                    &gain,
                    &gain,
                    1.0,
                );
            }
        }
        symmetrize(&mut self.cov);
        self.t_last += elapsed;
        Ok(())
    }

    /// Convert to information form. Fails if the covariance is singular.
    pub fn to_info(&self) -> Result<InfoState> {
        let chol = Cholesky::new(self.cov.clone()).ok_or_else(|| {
            Error::Numerical("covariance is not positive definite".into())
        })?;
        let info_vec = chol.solve(&self.theta);
        let mut info_mat = spd_inverse(&chol);
        symmetrize(&mut info_mat);
        Ok(InfoState { info_vec, info_mat })
    }

    /// Recover moment form from information form.
    pub fn from_info(info: &InfoState, t_last: u64) -> Result<Self> {
        let (theta, cov) = info.recover()?;
        Ok(Self { theta, cov, t_last })
    }

    /// Predictive mean and variance of the field value at feature vector
    /// `phi`: `(phi^T theta, phi^T P phi)`.
    pub fn predictive(&self, phi: &DVector<f64>) -> (f64, f64) {
        let mean = phi.dot(&self.theta);
        let var = phi.dot(&(&self.cov * phi));
        (mean, var)
    }
}

/// Posterior of the coefficients given all measurements at once under the
/// prior N(0, sigma_init^2 I):
///
///   P     = (sigma_init^{-2} I + sigma_nu^{-2} Phi^T Phi)^{-1}
///   theta = sigma_nu^{-2} P Phi^T y
///
/// `features` holds one measurement's feature vector per row. With zero rows
/// the prior is returned unchanged.
pub fn batch_blr(
    features: &DMatrix<f64>,
    y: &[f64],
    sigma_nu: f64,
    sigma_init: f64,
) -> Result<FilterState> {
    if y.len() != features.nrows() {
        return Err(Error::DimensionMismatch(y.len(), features.nrows()));
    }
    if !(sigma_nu > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sigma_nu must be > 0, got {sigma_nu}"
        )));
    }
    let dim = features.ncols();
    let mut state = FilterState::new(dim, sigma_init)?;
    if features.nrows() == 0 {
        return Ok(state);
    }

    let inv_nu2 = 1.0 / (sigma_nu * sigma_nu);
    let mut precision = features.tr_mul(features) * inv_nu2;
    let inv_init2 = 1.0 / (sigma_init * sigma_init);
    for i in 0..dim {
        precision[(i, i)] += inv_init2;
    }
    let chol = Cholesky::new(precision).ok_or_else(|| {
        Error::Numerical("batch regression precision matrix is not PD".into())
    })?;

    let rhs = features.tr_mul(&DVector::from_column_slice(y)) * inv_nu2;
    state.theta = chol.solve(&rhs);
    state.cov = spd_inverse(&chol);
    symmetrize(&mut state.cov);
    Ok(state)
}

/// One step of the exponential-forgetting baseline on a moment-form state:
/// old information is damped by `lambda` before the new measurement is
/// absorbed. `lambda = 1` reduces to recursive regression with no
/// forgetting. If damping has driven the information matrix singular, it is
/// floored (see [`InfoState::floor_eigenvalues`]) before recovery.
pub fn forgetting_update(
    state: &FilterState,
    phi: &DVector<f64>,
    y: f64,
    lambda: f64,
    sigma_nu: f64,
) -> Result<FilterState> {
    let mut info = state.to_info()?;
    info.forgetting_update(phi, y, lambda, sigma_nu)?;
    match FilterState::from_info(&info, state.t_last + 1) {
        Ok(s) => Ok(s),
        Err(Error::Numerical(_)) => {
            info.floor_eigenvalues(INFO_EIGENVALUE_FLOOR);
            FilterState::from_info(&info, state.t_last + 1)
        }
        Err(e) => Err(e),
    }
}

impl InfoState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            info_vec: DVector::zeros(dim),
            info_mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.info_vec.len()
    }

    /// Information-form forgetting recursion:
    ///
    ///   Omega <- lambda Omega + sigma_nu^{-2} phi phi^T
    ///   L     <- lambda L     + sigma_nu^{-2} phi y
    pub fn forgetting_update(
        &mut self,
        phi: &DVector<f64>,
        y: f64,
        lambda: f64,
        sigma_nu: f64,
    ) -> Result<()> {
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch(phi.len(), self.dim()));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "forgetting factor must lie in (0, 1], got {lambda}"
            )));
        }
        if !(sigma_nu > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sigma_nu must be > 0, got {sigma_nu}"
            )));
        }
        let inv_nu2 = 1.0 / (sigma_nu * sigma_nu);
        self.info_mat *= lambda;
        self.info_mat.ger(inv_nu2, phi, phi, 1.0);
        self.info_vec *= lambda;
        self.info_vec.axpy(inv_nu2 * y, phi, 1.0);
        Ok(())
    }

    /// Clamp the eigenvalues of the information matrix to at least `floor`
    /// (PSD-order max with `floor * I`).
    pub fn floor_eigenvalues(&mut self, floor: f64) {
        let sym = (&self.info_mat + self.info_mat.transpose()) * 0.5;
        let mut eig = nalgebra::SymmetricEigen::new(sym);
        for v in eig.eigenvalues.iter_mut() {
            if *v < floor {
                *v = floor;
            }
        }
        self.info_mat = eig.recompose();
        symmetrize(&mut self.info_mat);
    }

    /// Invert back to `(theta, P)`.
    fn recover(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let chol = Cholesky::new(self.info_mat.clone()).ok_or_else(|| {
            Error::Numerical("information matrix is not positive definite".into())
        })?;
        let theta = chol.solve(&self.info_vec);
        let mut cov = spd_inverse(&chol);
        symmetrize(&mut cov);
        Ok((theta, cov))
    }

    /// Field mean at a feature vector without recovering the covariance:
    /// `phi^T Omega^{-1} L`.
    pub fn mean_at(&self, phi: &DVector<f64>) -> Result<f64> {
        let chol = Cholesky::new(self.info_mat.clone()).ok_or_else(|| {
            Error::Numerical("information matrix is not positive definite".into())
        })?;
        Ok(phi.dot(&chol.solve(&self.info_vec)))
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Inverse of an SPD matrix from its Cholesky factor: invert L by
/// column-oriented forward substitution (contiguous saxpy down each column),
/// then form L^{-T} L^{-1} with one gemm. Several times faster than the
/// generic solve-against-identity path, which dominates the per-step cost of
/// the information-form conversions.
pub(crate) fn spd_inverse(chol: &Cholesky<f64, Dyn>) -> DMatrix<f64> {
    let l = chol.l_dirty();
    let n = l.nrows();
    let ls = l.as_slice();
    let mut linv = DMatrix::<f64>::zeros(n, n);
    {
        let inv = linv.as_mut_slice();
        for j in 0..n {
            let colj = j * n;
            inv[colj + j] = 1.0;
            for k in j..n {
                let lcol = k * n;
                let xk = inv[colj + k] / ls[lcol + k];
                inv[colj + k] = xk;
                let l_tail = &ls[lcol + k + 1..lcol + n];
                let inv_tail = &mut inv[colj + k + 1..colj + n];
                for (iv, lv) in inv_tail.iter_mut().zip(l_tail) {
                    *iv -= xk * lv;
                }
            }
        }
    }
    linv.transpose() * linv
}

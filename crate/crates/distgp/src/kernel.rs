//! Kernel functions, covariance-matrix assembly, and exact Gaussian Process
//! posterior inference.
//!
//! The exact GP here is deliberately simple (dense Cholesky, O(N^3)): it is
//! the gold standard the low-rank machinery is checked against, not the
//! production inference path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Diagonal jitter added to the regularized Gram matrix when the measurement
/// noise is exactly zero.
pub const DEFAULT_JITTER: f64 = 1e-10;

/// Supported kernel families. Both are normalized exponentials, so
/// k(x, x) = 1 and 0 < k(x, x') <= 1 everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// Squared-exponential: exp(-||x - x'||^2 / (2 l^2)). Infinitely smooth.
    Rbf,
    /// Exponential: exp(-||x - x'|| / l). Continuous but non-smooth, suited
    /// to irregular fields.
    Laplace,
}

/// A kernel family together with its length scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscale: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !lengthscale.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lengthscale must be positive and finite, got {lengthscale}"
            )));
        }
        Ok(Self { family, lengthscale })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    /// Evaluate the kernel at a pair of points.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(x.len(), y.len()));
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// Same as [`eval`](Self::eval) without the dimension check; used in
    /// matrix-assembly loops that validate dimensions once up front.
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq_dist: f64 = x
            .iter()
            .zip(y.iter())
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum();
        match self.family {
            KernelFamily::Rbf => (-sq_dist / (2.0 * self.lengthscale * self.lengthscale)).exp(),
            KernelFamily::Laplace => (-sq_dist.sqrt() / self.lengthscale).exp(),
        }
    }
}

/// An ordered set of points in R^s, stored flat. Order is significant: point
/// `i` indexes row/column `i` of any Gram matrix built from the set.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// Build from a flat coordinate buffer, `dim` consecutive values per point.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("spatial dimension must be >= 1".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "coordinate buffer length {} is not a multiple of dim {}",
                coords.len(),
                dim
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch(p.len(), dim));
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, coords: Vec::new() }
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch(point.len(), self.dim));
        }
        self.coords.extend_from_slice(point);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

/// Covariance matrix between two point sets: entry (i, j) = k(x_i, z_j).
/// With `xs` and `zs` identical the result is symmetric PSD.
pub fn cov_matrix(spec: &KernelSpec, xs: &PointSet, zs: &PointSet) -> Result<DMatrix<f64>> {
    if xs.is_empty() || zs.is_empty() {
        return Err(Error::InvalidInput("point sets must be non-empty".into()));
    }
    if xs.dim() != zs.dim() {
        return Err(Error::DimensionMismatch(xs.dim(), zs.dim()));
    }
    let mut out = DMatrix::zeros(xs.len(), zs.len());
    for (i, x) in xs.iter().enumerate() {
        for (j, z) in zs.iter().enumerate() {
            out[(i, j)] = spec.eval_unchecked(x, z);
        }
    }
    Ok(out)
}

/// Kernel vector between every point of a set and a single query point.
pub fn cov_vector(spec: &KernelSpec, xs: &PointSet, query: &[f64]) -> Result<DVector<f64>> {
    if xs.dim() != query.len() {
        return Err(Error::DimensionMismatch(xs.dim(), query.len()));
    }
    Ok(DVector::from_iterator(
        xs.len(),
        xs.iter().map(|x| spec.eval_unchecked(x, query)),
    ))
}

/// Exact GP posterior at a query point under a zero prior mean:
///
///   mean = K_{*X} (K_XX + sigma_nu^2 I)^{-1} y
///   var  = K_{**} - K_{*X} (K_XX + sigma_nu^2 I)^{-1} K_{X*}
///
/// Non-zero prior means are the caller's responsibility (pre-subtract).
pub fn gp_posterior(
    spec: &KernelSpec,
    train: &PointSet,
    y: &[f64],
    sigma_nu: f64,
    query: &[f64],
) -> Result<(f64, f64)> {
    let k = |a: &[f64], b: &[f64]| spec.eval_unchecked(a, b);
    gp_posterior_fn(k, train, y, sigma_nu, query, DEFAULT_JITTER)
}

/// Exact GP posterior for an arbitrary kernel function. This generic form is
/// what the test suites use to cross-check approximate inference paths
/// against the definitionally-correct one.
///
/// `jitter` is added to the Gram diagonal when `sigma_nu == 0`.
pub fn gp_posterior_fn<K>(
    kernel: K,
    train: &PointSet,
    y: &[f64],
    sigma_nu: f64,
    query: &[f64],
    jitter: f64,
) -> Result<(f64, f64)>
where
    K: Fn(&[f64], &[f64]) -> f64,
{
    let n = train.len();
    if n == 0 {
        return Err(Error::InvalidInput("training set must be non-empty".into()));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch(y.len(), n));
    }
    if train.dim() != query.len() {
        return Err(Error::DimensionMismatch(train.dim(), query.len()));
    }
    if sigma_nu < 0.0 {
        return Err(Error::InvalidInput(format!(
            "sigma_nu must be >= 0, got {sigma_nu}"
        )));
    }

    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel(train.point(i), train.point(j));
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let diag_add = if sigma_nu > 0.0 { sigma_nu * sigma_nu } else { jitter };
    for i in 0..n {
        gram[(i, i)] += diag_add;
    }

    let chol = nalgebra::Cholesky::new(gram).ok_or_else(|| {
        Error::Numerical(format!(
            "Cholesky of the regularized {n}x{n} Gram matrix failed \
             (sigma_nu = {sigma_nu}, jitter = {jitter}); \
             the system is singular or indefinite"
        ))
    })?;

    let k_star = DVector::from_iterator(n, train.iter().map(|x| kernel(x, query)));
    let y_vec = DVector::from_column_slice(y);

    let alpha = chol.solve(&y_vec);
    let mean = k_star.dot(&alpha);

    let v = chol.solve(&k_star);
    let prior_var = kernel(query, query);
    let variance = prior_var - k_star.dot(&v);

    clamp_variance(variance)
        .map(|var| (mean, var))
        .ok_or_else(|| {
            Error::Numerical(format!(
                "posterior variance {variance} is negative beyond round-off; \
                 the Gram matrix is likely mis-assembled"
            ))
        })
}

/// Tiny negative variances are round-off and clamp to zero; anything below
/// the tolerance signals a real defect and is rejected.
pub(crate) fn clamp_variance(variance: f64) -> Option<f64> {
    if variance >= 0.0 {
        Some(variance)
    } else if variance >= -1e-10 {
        Some(0.0)
    } else {
        None
    }
}

//! Low-rank feature space built from representative points.
//!
//! The eigendecomposition of the representative-point Gram matrix induces a
//! finite feature map `phi(x) = Lambda^{-1/2} U^T k(R, x)` whose inner
//! products reproduce the kernel exactly on the representative set and
//! approximate it elsewhere. Inference in this space costs O(rank^3)
//! regardless of how many measurements have been absorbed, which is what
//! makes online tracking of a drifting field feasible.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::{self, KernelFamily, KernelSpec, PointSet, DEFAULT_JITTER};

/// Relative eigenvalue threshold below which basis directions are dropped.
pub const DEFAULT_REL_THRESHOLD: f64 = 1e-10;

/// Axis-aligned box in R^s.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidInput(
                "box bounds must be non-empty and of equal dimension".into(),
            ));
        }
        for (l, h) in lo.iter().zip(hi.iter()) {
            if !(l.is_finite() && h.is_finite() && h > l) {
                return Err(Error::InvalidInput(format!(
                    "degenerate box axis: [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// A square box [0, side]^2.
    pub fn square(side: f64) -> Result<Self> {
        Self::new(vec![0.0, 0.0], vec![side, side])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(x, (l, h))| *x >= *l && *x <= *h)
    }

    /// Center of the box.
    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }
}

/// Draw `count` points i.i.d. uniform over the box. Deterministic in `seed`;
/// every agent calls this with the same seed so the fleet shares one basis.
pub fn sample_representative_points(
    domain: &AxisBox,
    count: usize,
    seed: u64,
) -> Result<PointSet> {
    if count == 0 {
        return Err(Error::InvalidInput(
            "representative point count must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = domain.dim();
    let mut coords = Vec::with_capacity(count * dim);
    for _ in 0..count {
        for axis in 0..dim {
            let u: f64 = rng.gen();
            coords.push(domain.lo[axis] + u * domain.side(axis));
        }
    }
    PointSet::from_flat(dim, coords)
}

/// Eigenbasis of the representative-point Gram matrix, truncated to the
/// numerically significant directions.
#[derive(Debug, Clone)]
pub struct NystromBasis {
    spec: KernelSpec,
    points: PointSet,
    /// E x rank matrix of retained eigenvectors (columns ordered by
    /// descending eigenvalue).
    eigvecs: DMatrix<f64>,
    /// Retained eigenvalues, descending.
    eigvals: DVector<f64>,
    /// Precomputed Lambda^{-1/2}.
    inv_sqrt_eigvals: DVector<f64>,
    /// Precomputed U Lambda^{-1} U^T, the kernel-reconstruction weight. Kept
    /// as a second code path, distinct from the feature map, so the two can
    /// be cross-checked.
    kernel_weight: DMatrix<f64>,
}

/// Build the basis from the Gram matrix of the representative points.
/// Eigenvalues at or below `rel_threshold * lambda_max` are dropped, which
/// shrinks the feature dimension when the points are (near-)redundant.
pub fn build_basis(
    spec: &KernelSpec,
    points: &PointSet,
    rel_threshold: f64,
) -> Result<NystromBasis> {
    if points.is_empty() {
        return Err(Error::InvalidInput(
            "representative point set must be non-empty".into(),
        ));
    }
    if !(0.0..1.0).contains(&rel_threshold) {
        return Err(Error::InvalidInput(format!(
            "rel_threshold must lie in [0, 1), got {rel_threshold}"
        )));
    }

    let gram = kernel::cov_matrix(spec, points, points)?;
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "representative Gram matrix contains non-finite entries".into(),
        ));
    }
    // Exact symmetry before the symmetric eigensolver.
    let gram = (&gram + gram.transpose()) * 0.5;

    let eig = nalgebra::SymmetricEigen::new(gram);
    let e = points.len();

    let mut order: Vec<usize> = (0..e).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let lambda_max = eig.eigenvalues[order[0]];
    if !(lambda_max > 0.0) {
        return Err(Error::Numerical(
            "representative Gram matrix has no positive eigenvalue".into(),
        ));
    }
    let cutoff = rel_threshold * lambda_max;
    let retained: Vec<usize> = order
        .iter()
        .copied()
        .take_while(|&i| eig.eigenvalues[i] > cutoff && eig.eigenvalues[i] > 0.0)
        .collect();
    let rank = retained.len();

    let mut eigvecs = DMatrix::zeros(e, rank);
    let mut eigvals = DVector::zeros(rank);
    for (col, &i) in retained.iter().enumerate() {
        eigvecs.set_column(col, &eig.eigenvectors.column(i));
        eigvals[col] = eig.eigenvalues[i];
    }

    Ok(NystromBasis::from_parts(*spec, points.clone(), eigvecs, eigvals))
}

impl NystromBasis {
    fn from_parts(
        spec: KernelSpec,
        points: PointSet,
        eigvecs: DMatrix<f64>,
        eigvals: DVector<f64>,
    ) -> Self {
        let inv_sqrt_eigvals = eigvals.map(|l| 1.0 / l.sqrt());
        let inv_eigvals = eigvals.map(|l| 1.0 / l);
        let kernel_weight = &eigvecs * DMatrix::from_diagonal(&inv_eigvals) * eigvecs.transpose();
        Self {
            spec,
            points,
            eigvecs,
            eigvals,
            inv_sqrt_eigvals,
            kernel_weight,
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn representative_points(&self) -> &PointSet {
        &self.points
    }

    /// Retained feature dimension (after truncation).
    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    /// Number of representative points the basis was built from.
    pub fn source_count(&self) -> usize {
        self.points.len()
    }

    pub fn spatial_dim(&self) -> usize {
        self.points.dim()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// Feature vector of a query point: Lambda^{-1/2} U^T k(R, x).
    pub fn feature_map(&self, x: &[f64]) -> Result<DVector<f64>> {
        let k_rx = kernel::cov_vector(&self.spec, &self.points, x)?;
        let mut phi = self.eigvecs.tr_mul(&k_rx);
        phi.component_mul_assign(&self.inv_sqrt_eigvals);
        Ok(phi)
    }

    /// Feature matrix for a whole point set, one row per point.
    pub fn features(&self, xs: &PointSet) -> Result<DMatrix<f64>> {
        if xs.dim() != self.spatial_dim() {
            return Err(Error::DimensionMismatch(xs.dim(), self.spatial_dim()));
        }
        let mut out = DMatrix::zeros(xs.len(), self.rank());
        for (i, x) in xs.iter().enumerate() {
            let phi = self.feature_map(x)?;
            out.set_row(i, &phi.transpose());
        }
        Ok(out)
    }

    /// The induced kernel k(x, x') = k(x, R) U Lambda^{-1} U^T k(R, x').
    /// Exact when both arguments are representative points and no direction
    /// was truncated.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let k_rx = kernel::cov_vector(&self.spec, &self.points, x)?;
        let k_ry = kernel::cov_vector(&self.spec, &self.points, y)?;
        Ok((&self.kernel_weight * k_ry).dot(&k_rx))
    }

    /// GP posterior under the induced kernel, computed with a rank x rank
    /// solve:
    ///
    ///   S    = U^T K_RX K_XR U + sigma_nu^2 Lambda
    ///   mean = b^T S^{-1} U^T K_RX y        with b = U^T k(R, x*)
    ///   var  = sigma_nu^2 b^T S^{-1} b
    ///
    /// Cost is one pass over the measurements plus O(rank^3), independent of
    /// the measurement count.
    pub fn gp_posterior(
        &self,
        xs: &PointSet,
        y: &[f64],
        sigma_nu: f64,
        query: &[f64],
    ) -> Result<(f64, f64)> {
        let n = xs.len();
        if n == 0 {
            return Err(Error::InvalidInput("training set must be non-empty".into()));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch(y.len(), n));
        }
        if sigma_nu < 0.0 {
            return Err(Error::InvalidInput(format!(
                "sigma_nu must be >= 0, got {sigma_nu}"
            )));
        }

        let k_rx = kernel::cov_matrix(&self.spec, &self.points, xs)?;
        let a = self.eigvecs.tr_mul(&k_rx); // rank x n

        let mut s = &a * a.transpose();
        for i in 0..self.rank() {
            s[(i, i)] += sigma_nu * sigma_nu * self.eigvals[i];
        }
        if sigma_nu == 0.0 {
            for i in 0..self.rank() {
                s[(i, i)] += DEFAULT_JITTER;
            }
        }

        let chol = Cholesky::new(s).ok_or_else(|| {
            Error::Numerical(format!(
                "rank-{} low-rank system is singular (sigma_nu = {sigma_nu})",
                self.rank()
            ))
        })?;

        let b = self
            .eigvecs
            .tr_mul(&kernel::cov_vector(&self.spec, &self.points, query)?);
        let ay = &a * DVector::from_column_slice(y);
        let mean = b.dot(&chol.solve(&ay));
        let variance = sigma_nu * sigma_nu * b.dot(&chol.solve(&b));

        kernel::clamp_variance(variance)
            .map(|var| (mean, var))
            .ok_or_else(|| {
                Error::Numerical(format!(
                    "low-rank posterior variance {variance} is negative beyond round-off"
                ))
            })
    }

    /// Dump (R, U, Lambda) as text CSV. All floats are written with 17
    /// significant digits, which round-trips f64 exactly. Layout:
    ///
    /// ```text
    /// basis,<kernel family>,<lengthscale>,<spatial dim>,<E>,<rank>
    /// point,<coord 0>,...,<coord s-1>        (E rows)
    /// lambda,<value 0>,...,<value rank-1>    (1 row, descending)
    /// eigvec,<row 0 of U>                    (E rows of rank values)
    /// ```
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let family = match self.spec.family() {
            KernelFamily::Rbf => "rbf",
            KernelFamily::Laplace => "laplace",
        };
        let _ = writeln!(
            out,
            "basis,{family},{:.17e},{},{},{}",
            self.spec.lengthscale(),
            self.spatial_dim(),
            self.source_count(),
            self.rank()
        );
        for p in self.points.iter() {
            out.push_str("point");
            for c in p {
                let _ = write!(out, ",{c:.17e}");
            }
            out.push('\n');
        }
        out.push_str("lambda");
        for l in self.eigvals.iter() {
            let _ = write!(out, ",{l:.17e}");
        }
        out.push('\n');
        for i in 0..self.source_count() {
            out.push_str("eigvec");
            for j in 0..self.rank() {
                let _ = write!(out, ",{:.17e}", self.eigvecs[(i, j)]);
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty basis file".into()))?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 6 || fields[0] != "basis" {
            return Err(Error::InvalidInput("malformed basis header".into()));
        }
        let family = match fields[1] {
            "rbf" => KernelFamily::Rbf,
            "laplace" => KernelFamily::Laplace,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown kernel family {other}"
                )))
            }
        };
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad float in basis file: {s}")))
        };
        let parse_u = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("bad count in basis file: {s}")))
        };
        let spec = KernelSpec::new(family, parse_f(fields[2])?)?;
        let dim = parse_u(fields[3])?;
        let count = parse_u(fields[4])?;
        let rank = parse_u(fields[5])?;

        let mut coords = Vec::with_capacity(count * dim);
        for _ in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidInput("basis file truncated in points".into()))?;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != dim + 1 || f[0] != "point" {
                return Err(Error::InvalidInput("malformed point row".into()));
            }
            for v in &f[1..] {
                coords.push(parse_f(v)?);
            }
        }
        let points = PointSet::from_flat(dim, coords)?;

        let line = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("basis file truncated at lambda".into()))?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != rank + 1 || f[0] != "lambda" {
            return Err(Error::InvalidInput("malformed lambda row".into()));
        }
        let mut eigvals = DVector::zeros(rank);
        for (i, v) in f[1..].iter().enumerate() {
            eigvals[i] = parse_f(v)?;
        }

        let mut eigvecs = DMatrix::zeros(count, rank);
        for i in 0..count {
            let line = lines.next().ok_or_else(|| {
                Error::InvalidInput("basis file truncated in eigenvectors".into())
            })?;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != rank + 1 || f[0] != "eigvec" {
                return Err(Error::InvalidInput("malformed eigvec row".into()));
            }
            for (j, v) in f[1..].iter().enumerate() {
                eigvecs[(i, j)] = parse_f(v)?;
            }
        }

        Ok(Self::from_parts(spec, points, eigvecs, eigvals))
    }
}

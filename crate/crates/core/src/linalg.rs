//! Dense symmetric linear-algebra kernel.
//!
//! Every rank, null-space, parallelism and semidefiniteness decision in the
//! crate goes through a [`TolerancePolicy`]. Relative thresholds are anchored
//! to the largest eigenvalue (or singular value) magnitude of the matrix at
//! hand.

use nalgebra::linalg::{SymmetricEigen, SVD};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const EIG_MAX_ITER: usize = 10_000;

/// Thresholds shared by all numerical decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TolerancePolicy {
    /// Eigenvalues (singular values) with `|λ| <= rank_rel * max|λ|` count as zero.
    pub rank_rel: f64,
    /// `A ⪰ 0` iff `λ_min >= -psd_abs_scale * max(1, max|λ|)`.
    pub psd_abs_scale: f64,
    /// Reconstruction tolerance for decompositions.
    pub recon_rel: f64,
    /// Two vectors are parallel when the smaller singular value of `[u v]`
    /// is at most `parallel_rel` times the larger one.
    pub parallel_rel: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            rank_rel: 1e-10,
            psd_abs_scale: 1e-9,
            recon_rel: 1e-8,
            parallel_rel: 1e-8,
        }
    }
}

impl TolerancePolicy {
    pub fn new(
        rank_rel: f64,
        psd_abs_scale: f64,
        recon_rel: f64,
        parallel_rel: f64,
    ) -> Result<Self> {
        let tol = TolerancePolicy {
            rank_rel,
            psd_abs_scale,
            recon_rel,
            parallel_rel,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn with_rank_rel(self, rank_rel: f64) -> Result<Self> {
        let tol = TolerancePolicy { rank_rel, ..self };
        tol.validate()?;
        Ok(tol)
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("rank_rel", self.rank_rel),
            ("psd_abs_scale", self.psd_abs_scale),
            ("recon_rel", self.recon_rel),
            ("parallel_rel", self.parallel_rel),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::PreconditionViolated(format!(
                    "tolerance {name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A square matrix that is exactly symmetric.
///
/// Construction averages the input with its transpose, so
/// `a[(i, j)] == a[(j, i)]` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidMatrix(
                "matrix order must be at least 1".into(),
            ));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix("matrix has non-finite entries".into()));
        }
        let n = m.nrows();
        let mut s = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = avg;
                s[(j, i)] = avg;
            }
        }
        Ok(SymMatrix(s))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMatrix(
                "rows have inconsistent lengths".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// (as columns).
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigDecomp {
    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        v * DMatrix::from_diagonal(&self.eigenvalues) * v.transpose()
    }
}

pub fn sym_eig(a: &SymMatrix) -> Result<EigDecomp> {
    let n = a.n();
    let eig = SymmetricEigen::try_new(a.as_matrix().clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or_else(|| {
            Error::NumericalFailure(format!("symmetric eigensolver did not converge (n = {n})"))
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigDecomp {
        eigenvalues,
        eigenvectors,
    })
}

fn rank_threshold(max_abs: f64, tol: &TolerancePolicy) -> f64 {
    tol.rank_rel * max_abs
}

/// Moore-Penrose inverse through the eigendecomposition.
pub fn pinv(a: &SymMatrix, tol: &TolerancePolicy) -> Result<SymMatrix> {
    let eig = sym_eig(a)?;
    Ok(pinv_from_eig(&eig, tol))
}

pub(crate) fn pinv_from_eig(eig: &EigDecomp, tol: &TolerancePolicy) -> SymMatrix {
    let n = eig.eigenvalues.len();
    let cut = rank_threshold(eig.max_abs(), tol);
    let mut out = DMatrix::zeros(n, n);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > cut && lambda != 0.0 {
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) / lambda;
        }
    }
    SymMatrix::new(out).expect("pseudoinverse of a finite symmetric matrix is finite")
}

pub fn rank_of(a: &SymMatrix, tol: &TolerancePolicy) -> Result<usize> {
    let eig = sym_eig(a)?;
    Ok(rank_from_eig(&eig, tol))
}

pub(crate) fn rank_from_eig(eig: &EigDecomp, tol: &TolerancePolicy) -> usize {
    let cut = rank_threshold(eig.max_abs(), tol);
    eig.eigenvalues
        .iter()
        .filter(|l| l.abs() > cut && **l != 0.0)
        .count()
}

/// Orthonormal basis (as columns) of the null space of an arbitrary `n × m`
/// matrix. The result has `m` rows and `m - rank(a)` columns.
pub fn nullspace_basis(a: &DMatrix<f64>, tol: &TolerancePolicy) -> Result<DMatrix<f64>> {
    let m = a.ncols();
    if m == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    // Pad with zero rows so the SVD returns a full m × m right factor.
    let rows = a.nrows().max(m);
    let mut padded = DMatrix::zeros(rows, m);
    padded.view_mut((0, 0), (a.nrows(), m)).copy_from(a);
    let svd = SVD::try_new(padded, false, true, f64::EPSILON, EIG_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma_max = svd
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, s| acc.max(*s));
    let cut = tol.rank_rel * sigma_max;
    let null_idx: Vec<usize> = (0..m)
        .filter(|&i| {
            let s = svd.singular_values[i];
            s <= cut || s == 0.0
        })
        .collect();
    let mut basis = DMatrix::zeros(m, null_idx.len());
    for (c, &i) in null_idx.iter().enumerate() {
        let mut col = v_t.row(i).transpose();
        fix_sign(&mut col);
        basis.set_column(c, &col);
    }
    Ok(basis)
}

/// Flip `v` so its first entry of non-negligible magnitude is positive.
pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if let Some(x) = v
        .iter()
        .find(|x| x.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE))
    {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
}

pub fn is_psd(a: &SymMatrix, tol: &TolerancePolicy) -> Result<bool> {
    let eig = sym_eig(a)?;
    Ok(psd_from_eig(&eig, tol))
}

pub(crate) fn psd_from_eig(eig: &EigDecomp, tol: &TolerancePolicy) -> bool {
    eig.min() >= -tol.psd_abs_scale * eig.max_abs().max(1.0)
}

pub fn min_eigenvalue(a: &SymMatrix) -> Result<f64> {
    Ok(sym_eig(a)?.min())
}

/// Ratio of the smaller to the larger singular value of the two-column
/// matrix `[u v]`. Zero when either vector vanishes; `NaN` when both do.
///
/// The product of the singular values is the norm of the wedge `u ∧ v`,
/// evaluated through the Lagrange identity so that nearly parallel inputs do
/// not lose accuracy to cancellation.
pub fn wedge_ratio(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    assert_eq!(u.len(), v.len(), "wedge_ratio: length mismatch");
    let uu = u.norm_squared();
    let vv = v.norm_squared();
    let uv = u.dot(v);
    let half_diff = 0.5 * (uu - vv);
    let sigma_max_sq = 0.5 * (uu + vv) + (half_diff * half_diff + uv * uv).sqrt();
    if sigma_max_sq == 0.0 {
        return f64::NAN;
    }
    let mut wedge_sq = 0.0;
    for i in 0..u.len() {
        for j in (i + 1)..u.len() {
            let m = u[i] * v[j] - u[j] * v[i];
            wedge_sq += m * m;
        }
    }
    wedge_sq.sqrt() / sigma_max_sq
}

/// Extreme eigenvalues `(λ₁, λ_r)` of the rank-two matrix `abᵀ + baᵀ`.
pub fn rank2_sym_eigs(
    a: &DVector<f64>,
    b: &DVector<f64>,
    tol: &TolerancePolicy,
) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::PreconditionViolated(
            "vectors differ in length".into(),
        ));
    }
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return Err(Error::PreconditionViolated(
            "vectors must be nonzero".into(),
        ));
    }
    if wedge_ratio(a, b) <= tol.parallel_rel {
        return Err(Error::ParallelVectors);
    }
    let ab = a.dot(b);
    let nn = a.norm() * b.norm();
    Ok((ab + nn, ab - nn))
}

/// `J = I - eeᵀ/n`.
pub fn centering(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
}

pub(crate) fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// `‖a - b‖_F / max(1, ‖b‖_F)`.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    frobenius(&(a - b)) / frobenius(b).max(1.0)
}

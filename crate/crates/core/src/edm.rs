//! Euclidean distance matrices: recognition, Gram and configuration
//! matrices, Gale matrices, the vector `w = D†e`, sphericity and the
//! pseudoinverse identities that hold for unit spherical EDMs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    centering, nullspace_basis, pinv_from_eig, psd_from_eig, rank_from_eig, sym_eig, EigDecomp,
    SymMatrix, TolerancePolicy,
};
use crate::yielding::EntryIndex;

/// Smallest matrix order accepted. Smaller matrices have no meaningful
/// single-entry perturbation theory.
pub const MIN_ORDER: usize = 3;

/// Symmetric, hollow, entrywise nonnegative matrix of squared distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    d: DMatrix<f64>,
}

impl DistanceMatrix {
    pub fn new(d: DMatrix<f64>) -> Result<Self> {
        let n = d.nrows();
        if n != d.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "expected a square matrix, got {}x{}",
                n,
                d.ncols()
            )));
        }
        if n < MIN_ORDER {
            return Err(Error::InvalidMatrix(format!(
                "order must be at least {MIN_ORDER}, got {n}"
            )));
        }
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix("matrix has non-finite entries".into()));
        }
        let scale = d.amax().max(1.0);
        let mut d = d;
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(Error::InvalidMatrix(format!(
                    "diagonal entry ({}, {}) is nonzero",
                    i + 1,
                    i + 1
                )));
            }
            for j in (i + 1)..n {
                let (a, b) = (d[(i, j)], d[(j, i)]);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::InvalidMatrix(format!(
                        "matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
                let avg = 0.5 * (a + b);
                if avg < 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({}, {}) is negative",
                        i + 1,
                        j + 1
                    )));
                }
                d[(i, j)] = avg;
                d[(j, i)] = avg;
            }
        }
        Ok(DistanceMatrix { d })
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

    /// Squared distances between the rows of `points`.
    pub fn from_points(points: &DMatrix<f64>) -> Result<Self> {
        let n = points.nrows();
        let d = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                (points.row(i) - points.row(j)).norm_squared()
            }
        });
        Self::new(d)
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.d
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// `D + t E^{kl}`. Fails when the shifted entry would become negative.
    pub fn shifted(&self, entry: EntryIndex, t: f64) -> Result<Self> {
        let (k, l) = entry.zero_based();
        if l >= self.n() {
            return Err(Error::InvalidEntry(format!(
                "{entry} is out of range for n = {}",
                self.n()
            )));
        }
        let v = self.d[(k, l)] + t;
        if v < 0.0 {
            return Err(Error::InvalidMatrix(format!(
                "shifted entry {entry} would be negative ({v})"
            )));
        }
        let mut d = self.d.clone();
        d[(k, l)] = v;
        d[(l, k)] = v;
        Ok(DistanceMatrix { d })
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(&self.d * s)
    }

    pub fn as_sym(&self) -> SymMatrix {
        SymMatrix::new(self.d.clone()).expect("distance matrix is square and finite")
    }
}

/// Origin used for a Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramChoice {
    /// Origin at the centroid: `B = -JDJ/2`, `Be = 0`.
    Centroid,
    /// Origin fixed by `s = 2w`: `B' = E - D/2`, `B'w = 0`. Unit spherical only.
    WVector,
}

/// `-JDJ/2` for any square matrix.
pub fn centroid_gram(d: &DMatrix<f64>) -> SymMatrix {
    let j = centering(d.nrows());
    SymMatrix::new(-0.5 * &j * d * &j).expect("finite input")
}

/// `D` is an EDM iff `-JDJ/2 ⪰ 0`.
pub fn is_edm(d: &DistanceMatrix, tol: &TolerancePolicy) -> Result<bool> {
    let eig = sym_eig(&centroid_gram(d.as_matrix()))?;
    Ok(psd_from_eig(&eig, tol))
}

/// Same test on a raw hollow symmetric matrix, which may have left the
/// nonnegative cone.
pub fn is_edm_raw(d: &DMatrix<f64>, tol: &TolerancePolicy) -> Result<bool> {
    let eig = sym_eig(&centroid_gram(d))?;
    Ok(psd_from_eig(&eig, tol))
}

pub fn gram(d: &DistanceMatrix, choice: GramChoice, tol: &TolerancePolicy) -> Result<SymMatrix> {
    match choice {
        GramChoice::Centroid => Ok(centroid_gram(d.as_matrix())),
        GramChoice::WVector => {
            let prof = EdmProfile::new(d, tol)?;
            prof.require_unit_spherical()?;
            Ok(prof.b_prime())
        }
    }
}

/// Spherical iff `eᵀw · max d_ij` exceeds this times `n`. The product is
/// dimensionless: it equals `max d_ij / (2ρ²)` for spherical matrices.
const SPHERICAL_REL: f64 = 1e-8;

/// Unit spherical iff `|2eᵀw - 1| <= UNIT_REL * n`.
pub const UNIT_REL: f64 = 1e-8;

/// Cached derived data of one distance matrix.
#[derive(Debug, Clone)]
pub struct EdmProfile {
    d: DistanceMatrix,
    tol: TolerancePolicy,
    r: usize,
    b: SymMatrix,
    b_eig: EigDecomp,
    b_dag: SymMatrix,
    d_dag: SymMatrix,
    rank_d: usize,
    p: DMatrix<f64>,
    w: DVector<f64>,
    etw: f64,
    gale: Option<DMatrix<f64>>,
    z_tilde: DMatrix<f64>,
    spherical: bool,
    unit_spherical: bool,
    radius: Option<f64>,
    center: Option<DVector<f64>>,
    regular: bool,
}

impl EdmProfile {
    pub fn new(d: &DistanceMatrix, tol: &TolerancePolicy) -> Result<Self> {
        let n = d.n();
        let b = centroid_gram(d.as_matrix());
        let b_eig = sym_eig(&b)?;
        if !psd_from_eig(&b_eig, tol) {
            return Err(Error::NotAnEdm);
        }
        let r = rank_from_eig(&b_eig, tol);
        let b_dag = pinv_from_eig(&b_eig, tol);

        // P = V_r Λ_r^{1/2}; eigenvectors already carry a deterministic sign.
        let mut p = DMatrix::zeros(n, r);
        for c in 0..r {
            let mut v = b_eig.eigenvectors.column(c).into_owned();
            crate::linalg::fix_sign(&mut v);
            p.set_column(c, &(v * b_eig.eigenvalues[c].sqrt()));
        }

        let d_sym = d.as_sym();
        let d_eig = sym_eig(&d_sym)?;
        let rank_d = rank_from_eig(&d_eig, tol);
        let d_dag = pinv_from_eig(&d_eig, tol);
        let e = DVector::from_element(n, 1.0);
        let w = d_dag.as_matrix() * &e;
        let etw = w.sum();

        let gale = gale_from_eig(&b_eig, r)?;
        let mut z_tilde = DMatrix::zeros(n, n - r);
        z_tilde.set_column(0, &w);
        if let Some(z) = &gale {
            z_tilde.view_mut((0, 1), (n, z.ncols())).copy_from(z);
        }

        let dmax = d.as_matrix().amax();
        let spherical = r == n - 1 || (dmax > 0.0 && etw * dmax > SPHERICAL_REL * n as f64);
        let unit_spherical = spherical && (2.0 * etw - 1.0).abs() <= UNIT_REL * n as f64;
        let radius = spherical.then(|| (1.0 / (2.0 * etw)).sqrt());

        let center = if spherical && r > 0 {
            // Least-squares solution of P a = J diag(B) / 2, using PᵀP = Λ_r.
            let j = centering(n);
            let rhs = 0.5 * (&j * b.as_matrix().diagonal());
            Some(DVector::from_fn(r, |i, _| {
                p.column(i).dot(&rhs) / b_eig.eigenvalues[i]
            }))
        } else {
            None
        };

        let regular = spherical && {
            let de = d.as_matrix() * &e;
            let mean = de.sum() / n as f64;
            (&de - DVector::from_element(n, mean)).norm()
                <= tol.recon_rel * de.norm().max(f64::MIN_POSITIVE)
        };

        Ok(EdmProfile {
            d: d.clone(),
            tol: *tol,
            r,
            b,
            b_eig,
            b_dag,
            d_dag,
            rank_d,
            p,
            w,
            etw,
            gale,
            z_tilde,
            spherical,
            unit_spherical,
            radius,
            center,
            regular,
        })
    }

    pub fn matrix(&self) -> &DistanceMatrix {
        &self.d
    }

    pub fn tol(&self) -> &TolerancePolicy {
        &self.tol
    }

    pub fn n(&self) -> usize {
        self.d.n()
    }

    /// Embedding dimension.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Centroid Gram matrix `-JDJ/2`.
    pub fn b(&self) -> &SymMatrix {
        &self.b
    }

    pub fn b_spectrum(&self) -> &DVector<f64> {
        &self.b_eig.eigenvalues
    }

    pub fn b_dag(&self) -> &SymMatrix {
        &self.b_dag
    }

    pub fn d_dag(&self) -> &SymMatrix {
        &self.d_dag
    }

    pub fn rank_d(&self) -> usize {
        self.rank_d
    }

    /// Configuration matrix, `n × r`, with `Pᵀe = 0` and `PPᵀ = B`.
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn etw(&self) -> f64 {
        self.etw
    }

    /// Gale matrix with orthonormal columns; `None` when `r = n - 1`.
    pub fn gale(&self) -> Option<&DMatrix<f64>> {
        self.gale.as_ref()
    }

    /// `[w Z]`, or `w` alone when `r = n - 1`.
    pub fn z_tilde(&self) -> &DMatrix<f64> {
        &self.z_tilde
    }

    pub fn is_spherical(&self) -> bool {
        self.spherical
    }

    pub fn is_unit_spherical(&self) -> bool {
        self.unit_spherical
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn center(&self) -> Option<&DVector<f64>> {
        self.center.as_ref()
    }

    pub fn is_regular(&self) -> bool {
        self.regular
    }

    pub fn require_unit_spherical(&self) -> Result<()> {
        if self.unit_spherical {
            Ok(())
        } else {
            Err(Error::NotUnitSpherical {
                two_etw: 2.0 * self.etw,
            })
        }
    }

    /// `E - D/2`.
    pub fn b_prime(&self) -> SymMatrix {
        let n = self.n();
        SymMatrix::new(DMatrix::from_element(n, n, 1.0) - 0.5 * self.d.as_matrix()).expect("finite")
    }

    /// `B† = -2D† + 4wwᵀ`.
    pub fn bdag_identity(&self) -> Result<SymMatrix> {
        self.require_unit_spherical()?;
        let w = &self.w;
        SymMatrix::new(-2.0 * self.d_dag.as_matrix() + 4.0 * w * w.transpose())
    }

    /// `B'† = -2D† + (2/wᵀw)(D†wwᵀ + wwᵀD† - (wᵀD†w / wᵀw) wwᵀ)`.
    pub fn bprime_dag_identity(&self) -> Result<SymMatrix> {
        self.require_unit_spherical()?;
        let w = &self.w;
        let dd = self.d_dag.as_matrix();
        let wtw = w.norm_squared();
        let ddw = dd * w;
        let wdw = w.dot(&ddw);
        let wwt = w * w.transpose();
        let inner = &ddw * w.transpose() + w * ddw.transpose() - (wdw / wtw) * &wwt;
        SymMatrix::new(-2.0 * dd + (2.0 / wtw) * inner)
    }

    /// Pseudoinverse of the Cayley-Menger matrix in block form
    /// `[[-2, 2wᵀ], [2w, -B†/2]]`.
    pub fn cm_dag_block(&self) -> Result<SymMatrix> {
        let bdag = self.bdag_identity()?;
        let n = self.n();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(0, 0)] = -2.0;
        for i in 0..n {
            m[(0, i + 1)] = 2.0 * self.w[i];
            m[(i + 1, 0)] = 2.0 * self.w[i];
        }
        m.view_mut((1, 1), (n, n))
            .copy_from(&(-0.5 * bdag.as_matrix()));
        SymMatrix::new(m)
    }
}

/// Orthonormal basis of `null(B) ∩ e⊥`, read off the zero eigenspace of `B`.
fn gale_from_eig(b_eig: &EigDecomp, r: usize) -> Result<Option<DMatrix<f64>>> {
    let n = b_eig.eigenvalues.len();
    if r + 1 >= n {
        return Ok(None);
    }
    let v0 = b_eig.eigenvectors.columns(r, n - r).into_owned();
    let e = DVector::from_element(n, 1.0);
    let et_v0 = (e.transpose() * &v0).into_owned();
    let y = nullspace_basis(
        &DMatrix::from_row_slice(1, n - r, et_v0.as_slice()),
        &TolerancePolicy::default(),
    )?;
    if y.ncols() != n - r - 1 {
        return Err(Error::NumericalFailure(format!(
            "Gale matrix has {} columns, expected {}",
            y.ncols(),
            n - r - 1
        )));
    }
    let mut z = v0 * y;
    for c in 0..z.ncols() {
        let mut col = z.column(c).into_owned();
        crate::linalg::fix_sign(&mut col);
        z.set_column(c, &col);
    }
    Ok(Some(z))
}

pub fn profile(d: &DistanceMatrix, tol: &TolerancePolicy) -> Result<EdmProfile> {
    EdmProfile::new(d, tol)
}

pub fn bdag_identity(d: &DistanceMatrix, tol: &TolerancePolicy) -> Result<SymMatrix> {
    EdmProfile::new(d, tol)?.bdag_identity()
}

pub fn bprime_dag_identity(d: &DistanceMatrix, tol: &TolerancePolicy) -> Result<SymMatrix> {
    EdmProfile::new(d, tol)?.bprime_dag_identity()
}

pub fn cm_dag_block(d: &DistanceMatrix, tol: &TolerancePolicy) -> Result<SymMatrix> {
    EdmProfile::new(d, tol)?.cm_dag_block()
}

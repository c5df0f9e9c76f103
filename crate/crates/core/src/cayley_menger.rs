//! The bordered (Cayley-Menger) matrix `D̃ = [[0, eᵀ], [e, D]]`.
//!
//! `D̃` is an EDM exactly when `D` is spherical with radius at most 1, and
//! its radius then follows from `ẽᵀw̃` with `w̃ = D̃†ẽ`. This gives a second,
//! independent route to the radius of `D + tE^{kl}`.
//!
//! Entry `(k, l)` of `D` sits at `(k + 1, l + 1)` of `D̃`; callers always
//! pass indices of `D`.

use nalgebra::{DMatrix, DVector};

use crate::edm::{centroid_gram, is_edm_raw, DistanceMatrix, EdmProfile};
use crate::error::{Error, Result};
use crate::linalg::{nullspace_basis, pinv, rank_of, SymMatrix, TolerancePolicy};
use crate::perturbation::{analyze_entry, Regime};
use crate::yielding::{theta_bounds, theta_c, EntryIndex};

/// Residual allowed when checking Gale columns of `D̃`, relative to `‖B̃‖`.
const GALE_CHECK_REL: f64 = 1e-8;
/// `t` within this (relative) distance of a pole is rejected.
pub const POLE_REL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CayleyMengerView {
    d_tilde: SymMatrix,
    w_tilde: DVector<f64>,
    gale_tilde: Option<DMatrix<f64>>,
    source: DistanceMatrix,
    tol: TolerancePolicy,
}

/// `[[0, eᵀ], [e, D]]`.
pub fn bordered(d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.nrows();
    let mut m = DMatrix::from_element(n + 1, n + 1, 1.0);
    m[(0, 0)] = 0.0;
    m.view_mut((1, 1), (n, n)).copy_from(d);
    m
}

pub fn cm_build(d: &DistanceMatrix, tol: &TolerancePolicy) -> Result<CayleyMengerView> {
    let m = bordered(d.as_matrix());
    let d_tilde = SymMatrix::new(m)?;
    let e = DVector::from_element(d.n() + 1, 1.0);
    let w_tilde = pinv(&d_tilde, tol)?.as_matrix() * &e;
    let gale_tilde = if is_edm_raw(d_tilde.as_matrix(), tol)? {
        let b = centroid_gram(d_tilde.as_matrix());
        let mut stacked = DMatrix::zeros(d.n() + 2, d.n() + 1);
        stacked
            .view_mut((0, 0), (d.n() + 1, d.n() + 1))
            .copy_from(b.as_matrix());
        stacked.row_mut(d.n() + 1).fill(1.0);
        Some(nullspace_basis(&stacked, tol)?)
    } else {
        None
    };
    Ok(CayleyMengerView {
        d_tilde,
        w_tilde,
        gale_tilde,
        source: d.clone(),
        tol: *tol,
    })
}

impl CayleyMengerView {
    pub fn d_tilde(&self) -> &SymMatrix {
        &self.d_tilde
    }

    pub fn w_tilde(&self) -> &DVector<f64> {
        &self.w_tilde
    }

    /// Orthonormal basis of `null([B̃; ẽᵀ])`, present when `D̃` is an EDM.
    pub fn gale_tilde(&self) -> Option<&DMatrix<f64>> {
        self.gale_tilde.as_ref()
    }

    pub fn source(&self) -> &DistanceMatrix {
        &self.source
    }

    pub fn e_tilde_w_tilde(&self) -> f64 {
        self.w_tilde.sum()
    }

    fn source_profile(&self) -> Result<EdmProfile> {
        EdmProfile::new(&self.source, &self.tol)
    }

    fn require_unit_source(&self) -> Result<EdmProfile> {
        let p = match self.source_profile() {
            Ok(p) => p,
            Err(Error::NotAnEdm) => return Err(Error::NotUnitSpherical { two_etw: f64::NAN }),
            Err(e) => return Err(e),
        };
        p.require_unit_spherical()?;
        Ok(p)
    }
}

pub fn cm_is_edm(view: &CayleyMengerView) -> Result<bool> {
    is_edm_raw(view.d_tilde.as_matrix(), &view.tol)
}

/// `1 - ẽᵀw̃/2`, the squared radius of the source.
pub fn cm_radius_sq(view: &CayleyMengerView) -> Result<f64> {
    if !cm_is_edm(view)? {
        return Err(Error::NotAnEdm);
    }
    Ok(1.0 - 0.5 * view.e_tilde_w_tilde())
}

/// Embedding dimension of `D̃`; equals that of a unit spherical source.
pub fn cm_embedding_dim(view: &CayleyMengerView) -> Result<usize> {
    view.require_unit_source()?;
    rank_of(&centroid_gram(view.d_tilde.as_matrix()), &view.tol)
}

/// Gale matrix of `D̃` assembled from the source: `[-1/2; w]`, with the
/// block `[0; Z]` appended when the source has a Gale matrix.
pub fn cm_gale(view: &CayleyMengerView) -> Result<DMatrix<f64>> {
    let p = view.require_unit_source()?;
    let n = p.n();
    let cols = n - p.r();
    let mut g = DMatrix::zeros(n + 1, cols);
    g[(0, 0)] = -0.5;
    g.view_mut((1, 0), (n, 1)).copy_from(p.w());
    if let Some(z) = p.gale() {
        g.view_mut((1, 1), (n, z.ncols())).copy_from(z);
    }

    let b = centroid_gram(view.d_tilde.as_matrix());
    let bg = b.as_matrix() * &g;
    let eg = g.row_sum();
    let scale = b.as_matrix().amax().max(1.0) * g.amax().max(1.0);
    if bg.amax() > GALE_CHECK_REL * scale || eg.amax() > GALE_CHECK_REL * scale {
        return Err(Error::NumericalFailure(format!(
            "assembled Gale matrix is not annihilated (|B̃G| = {:.3e}, |ẽᵀG| = {:.3e})",
            bg.amax(),
            eg.amax()
        )));
    }
    let dim = rank_of(&b, &view.tol)?;
    if n + 1 - dim - 1 != cols {
        return Err(Error::NumericalFailure(format!(
            "Gale matrix has {cols} columns but D̃ has embedding dimension {dim}"
        )));
    }
    Ok(g)
}

/// `ẽᵀw̃(t)` for `D + tE^{kl}` in closed form.
pub fn cm_w_inner(profile: &EdmProfile, entry: EntryIndex, t: f64) -> Result<f64> {
    let analysis = analyze_entry(profile, entry)?;
    let Regime::Radial { c, singleton } = analysis.regime else {
        return Err(Error::PreconditionViolated(format!(
            "entry {entry} does not satisfy w_k = c·w_l ≠ 0 with r = n-1 or z^k = z^l = 0"
        )));
    };
    let (_, l) = entry.zero_based();
    let w_l = profile.w()[l];
    let bd = profile.b_dag();
    let (k, _) = entry.zero_based();
    let beta2 = 0.25 * (bd[(k, l)] * bd[(k, l)] - bd[(k, k)] * bd[(l, l)]);
    let (lo, hi) = theta_bounds(profile, entry)?;
    let tc = theta_c(profile, entry, c)?;

    let poles: Vec<f64> = if !singleton {
        vec![lo, hi]
    } else if c > 0.0 {
        vec![hi]
    } else {
        vec![lo]
    };
    for &pole in &poles {
        if (t - pole).abs() <= POLE_REL * pole.abs().max(1.0) {
            return Err(Error::PoleAt { t });
        }
    }

    let lead = 8.0 * w_l * w_l * c * t / (tc * beta2);
    Ok(if !singleton {
        lead * (t - tc) / ((t - lo) * (t - hi))
    } else {
        lead / (t - poles[0])
    })
}

/// `ẽᵀ D̃(t)† ẽ` computed directly from the shifted matrix.
pub fn cm_w_inner_direct(
    d: &DistanceMatrix,
    entry: EntryIndex,
    t: f64,
    tol: &TolerancePolicy,
) -> Result<f64> {
    let view = cm_build(&d.shifted(entry, t)?, tol)?;
    Ok(view.e_tilde_w_tilde())
}

//! Yielding entries and yielding intervals.
//!
//! An off-diagonal entry `d_kl` is yielding when it can be changed, with all
//! other entries fixed, without leaving the EDM cone. The admissible shifts
//! form a closed interval `[l_kl, u_kl]` containing 0, given in closed form
//! by the quantities θ̲, θ̄ and θ_c built from entries of `B†`.

use std::fmt;

use nalgebra::DVector;

use crate::edm::EdmProfile;
use crate::error::{Error, Result};
use crate::linalg::{wedge_ratio, TolerancePolicy};

/// Off-diagonal position `(k, l)` with `k < l`, stored zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntryIndex {
    k: usize,
    l: usize,
}

impl EntryIndex {
    /// Zero-based constructor. `(l, k)` is normalized to `(k, l)`.
    pub fn new(k: usize, l: usize) -> Result<Self> {
        match k.cmp(&l) {
            std::cmp::Ordering::Equal => Err(Error::InvalidEntry(format!(
                "diagonal position ({}, {}) cannot be perturbed",
                k + 1,
                l + 1
            ))),
            std::cmp::Ordering::Less => Ok(EntryIndex { k, l }),
            std::cmp::Ordering::Greater => Ok(EntryIndex { k: l, l: k }),
        }
    }

    pub fn from_one_based(k: usize, l: usize) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::InvalidEntry("indices are 1-based".into()));
        }
        Self::new(k - 1, l - 1)
    }

    pub fn zero_based(&self) -> (usize, usize) {
        (self.k, self.l)
    }

    pub fn one_based(&self) -> (usize, usize) {
        (self.k + 1, self.l + 1)
    }

    pub fn check_order(&self, n: usize) -> Result<()> {
        if self.l >= n {
            Err(Error::InvalidEntry(format!(
                "{self} is out of range for n = {n}"
            )))
        } else {
            Ok(())
        }
    }

    /// All positions `k < l` of an `n × n` matrix.
    pub fn all(n: usize) -> impl Iterator<Item = EntryIndex> {
        (0..n).flat_map(move |k| ((k + 1)..n).map(move |l| EntryIndex { k, l }))
    }
}

impl fmt::Display for EntryIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k + 1, self.l + 1)
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Membership with a relative slack on the endpoints.
    pub fn contains(&self, t: f64, rel_slack: f64) -> bool {
        let slack = rel_slack * self.lo.abs().max(self.hi.abs()).max(1.0);
        t >= self.lo - slack && t <= self.hi + slack
    }

    pub fn is_subset_of(&self, other: &Interval, rel_slack: f64) -> bool {
        other.contains(self.lo, rel_slack) && other.contains(self.hi, rel_slack)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// How two vectors relate under "u = c·v for a nonzero c".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParallelRelation {
    BothZero,
    /// `u = c·v` with `v ≠ 0`.
    Scalar(f64),
    NotParallel,
}

impl ParallelRelation {
    pub fn is_parallel(&self) -> bool {
        !matches!(self, ParallelRelation::NotParallel)
    }
}

/// Decides the relation between `u` and `v`. Norm and singular-value tests
/// use `tol.parallel_rel`; callers pass vectors on a unit scale.
pub fn parallel_relation(
    u: &DVector<f64>,
    v: &DVector<f64>,
    tol: &TolerancePolicy,
) -> ParallelRelation {
    assert_eq!(u.len(), v.len(), "parallel_relation: length mismatch");
    let eps = tol.parallel_rel;
    let (nu, nv) = (u.norm(), v.norm());
    if nu <= eps && nv <= eps {
        return ParallelRelation::BothZero;
    }
    if nu <= eps || nv <= eps {
        return ParallelRelation::NotParallel;
    }
    if wedge_ratio(u, v) <= eps {
        ParallelRelation::Scalar(u.dot(v) / v.norm_squared())
    } else {
        ParallelRelation::NotParallel
    }
}

/// Relation between rows `k` and `l` of a matrix, with every column scaled
/// to unit norm first. Column scaling preserves both zero rows and the
/// scalar `c`, and makes the absolute thresholds meaningful.
pub(crate) fn row_relation(
    m: &nalgebra::DMatrix<f64>,
    entry: EntryIndex,
    tol: &TolerancePolicy,
) -> ParallelRelation {
    let (k, l) = entry.zero_based();
    let scaled = column_normalized(m);
    let u = scaled.row(k).transpose();
    let v = scaled.row(l).transpose();
    parallel_relation(&u, &v, tol)
}

pub(crate) fn column_normalized(m: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    out
}

/// `(θ̲, θ̄) = (2/(B†_kl - √(B†_kk B†_ll)), 2/(B†_kl + √(B†_kk B†_ll)))`.
pub fn theta_bounds(profile: &EdmProfile, entry: EntryIndex) -> Result<(f64, f64)> {
    entry.check_order(profile.n())?;
    let (k, l) = entry.zero_based();
    let bd = profile.b_dag();
    let (bkk, bll, bkl) = (bd[(k, k)].max(0.0), bd[(l, l)].max(0.0), bd[(k, l)]);
    let root = (bkk * bll).sqrt();
    let scale = bkl.abs() + root;
    let cut = profile.tol().rank_rel * scale;
    let den_lo = bkl - root;
    let den_hi = bkl + root;
    if scale == 0.0 || den_lo.abs() <= cut {
        return Err(Error::DegenerateDenominator {
            what: "theta_lower",
        });
    }
    if den_hi.abs() <= cut {
        return Err(Error::DegenerateDenominator {
            what: "theta_upper",
        });
    }
    Ok((2.0 / den_lo, 2.0 / den_hi))
}

/// `θ_c = -4c / (B†_kk + c² B†_ll - 2c B†_kl)`, i.e. `-4c / ‖s^k - c s^l‖²`.
pub fn theta_c(profile: &EdmProfile, entry: EntryIndex, c: f64) -> Result<f64> {
    entry.check_order(profile.n())?;
    if c == 0.0 || !c.is_finite() {
        return Err(Error::PreconditionViolated(format!(
            "theta_c needs a finite nonzero c, got {c}"
        )));
    }
    let den = sk_minus_c_sl_sq(profile, entry, c);
    let (k, l) = entry.zero_based();
    let bd = profile.b_dag();
    let scale = bd[(k, k)].abs() + c * c * bd[(l, l)].abs();
    if den <= profile.tol().rank_rel * scale {
        return Err(Error::DegenerateDenominator { what: "theta_c" });
    }
    Ok(-4.0 * c / den)
}

/// `‖s^k - c s^l‖² = B†_kk + c² B†_ll - 2c B†_kl`.
pub(crate) fn sk_minus_c_sl_sq(profile: &EdmProfile, entry: EntryIndex, c: f64) -> f64 {
    let (k, l) = entry.zero_based();
    let bd = profile.b_dag();
    bd[(k, k)] + c * c * bd[(l, l)] - 2.0 * c * bd[(k, l)]
}

/// Yielding status of one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldingReport {
    pub entry: EntryIndex,
    pub yielding: bool,
    /// Relation of the Gale transforms `z^k`, `z^l`; `BothZero` when `r = n - 1`.
    pub gale_relation: ParallelRelation,
    pub theta_lower: Option<f64>,
    pub theta_upper: Option<f64>,
    pub theta_c: Option<f64>,
    pub interval: Interval,
}

pub(crate) fn gale_relation(profile: &EdmProfile, entry: EntryIndex) -> ParallelRelation {
    match profile.gale() {
        None => ParallelRelation::BothZero,
        Some(z) => row_relation(z, entry, profile.tol()),
    }
}

pub fn yielding_report(profile: &EdmProfile, entry: EntryIndex) -> Result<YieldingReport> {
    entry.check_order(profile.n())?;
    let relation = gale_relation(profile, entry);
    let bounds = theta_bounds(profile, entry);
    let (theta_lower, theta_upper) = match bounds {
        Ok((lo, hi)) => (Some(lo), Some(hi)),
        Err(_) => (None, None),
    };
    let mut tc = None;
    let interval = match relation {
        ParallelRelation::BothZero => {
            let (lo, hi) = bounds?;
            Interval::new(lo, hi)
        }
        ParallelRelation::Scalar(c) => {
            let v = theta_c(profile, entry, c)?;
            tc = Some(v);
            if c > 0.0 {
                Interval::new(v, 0.0)
            } else {
                Interval::new(0.0, v)
            }
        }
        ParallelRelation::NotParallel => Interval::point(0.0),
    };
    Ok(YieldingReport {
        entry,
        yielding: interval.lo != interval.hi,
        gale_relation: relation,
        theta_lower,
        theta_upper,
        theta_c: tc,
        interval,
    })
}

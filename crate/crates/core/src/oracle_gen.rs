//! Seeded instance generators and brute-force oracles.
//!
//! The oracles never look at the closed forms: membership is decided by
//! smallest eigenvalues, the radius by a direct pseudoinverse, and the
//! minimal radius by bisection on a one-parameter semidefinite constraint.

pub mod suite;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::edm::{centroid_gram, DistanceMatrix, EdmProfile, MIN_ORDER, UNIT_REL};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, pinv, wedge_ratio, SymMatrix, TolerancePolicy};
use crate::perturbation::{analyze_entry, CaseTag, Regime};
use crate::yielding::{column_normalized, EntryIndex};

/// How the points of a generated instance are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// Independent uniform points on the unit sphere.
    Generic,
    /// All points other than `k`, `l` lie on a hyperplane through the
    /// center, which makes rows `k`, `l` of `Z̃` parallel while `w_k`, `z^k`
    /// stay nonzero. Needs `2 ≤ r ≤ n - 2` (and `n = 4` when `r = 2`).
    ParallelGalePair(EntryIndex),
    /// All points other than `k`, `l` lie in a linear subspace of
    /// dimension `r - 2`, which makes rows `k`, `l` of `Z̃` vanish.
    /// Needs `3 ≤ r ≤ n - 1` (and `n = 4` when `r = 3`).
    ZeroGalePair(EntryIndex),
    /// Points `k` and `l` are mirror images across a hyperplane through
    /// the center containing all other points. Needs `r = n - 1`.
    MirrorPair(EntryIndex),
}

impl Structure {
    pub fn entry(&self) -> Option<EntryIndex> {
        match self {
            Structure::Generic => None,
            Structure::ParallelGalePair(e)
            | Structure::ZeroGalePair(e)
            | Structure::MirrorPair(e) => Some(*e),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Structure::Generic => "generic",
            Structure::ParallelGalePair(_) => "parallel-gale",
            Structure::ZeroGalePair(_) => "zero-gale",
            Structure::MirrorPair(_) => "mirror",
        }
    }

    /// Case the distinguished entry is built to land in.
    pub fn expected_case(&self) -> Option<CaseTag> {
        match self {
            Structure::Generic => None,
            Structure::ParallelGalePair(_) | Structure::ZeroGalePair(_) => {
                Some(CaseTag::ContinuumUnit)
            }
            Structure::MirrorPair(_) => Some(CaseTag::SingletonUnit),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceSpec {
    pub n: usize,
    pub r: usize,
    pub structure: Structure,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(n: usize, r: usize, structure: Structure, seed: u64) -> Result<Self> {
        let spec = InstanceSpec {
            n,
            r,
            structure,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, r) = (self.n, self.r);
        let bad = |msg: String| Err(Error::InfeasibleSpec(msg));
        if n < MIN_ORDER {
            return bad(format!("n = {n} is below the minimum order {MIN_ORDER}"));
        }
        if r < 2 || r + 1 > n {
            return bad(format!("need 2 ≤ r ≤ n - 1, got n = {n}, r = {r}"));
        }
        if let Some(e) = self.structure.entry() {
            e.check_order(n)
                .map_err(|err| Error::InfeasibleSpec(err.to_string()))?;
        }
        match self.structure {
            Structure::Generic => Ok(()),
            Structure::ParallelGalePair(_) => {
                if r + 2 > n {
                    bad(format!(
                        "parallel-gale needs r ≤ n - 2, got n = {n}, r = {r}"
                    ))
                } else if r == 2 && n != 4 {
                    bad(format!("parallel-gale with r = 2 needs n = 4, got n = {n}"))
                } else {
                    Ok(())
                }
            }
            Structure::ZeroGalePair(_) => {
                if r < 3 {
                    bad(format!("zero-gale needs r ≥ 3, got r = {r}"))
                } else if r == 3 && n != 4 {
                    bad(format!("zero-gale with r = 3 needs n = 4, got n = {n}"))
                } else {
                    Ok(())
                }
            }
            Structure::MirrorPair(_) => {
                if r + 1 != n {
                    bad(format!("mirror needs r = n - 1, got n = {n}, r = {r}"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

const MAX_ATTEMPTS: usize = 2000;
/// Smallest admissible ratio `λ_r / λ_1` of the Gram spectrum.
const MIN_SPECTRAL_RATIO: f64 = 1e-3;
/// Smallest admissible off-diagonal distance.
const MIN_DISTANCE: f64 = 1e-2;
/// Decision quantities must be below `EXACT` or above `CLEAR`.
const EXACT: f64 = 1e-11;
const CLEAR: f64 = 1e-4;
/// Bound on the magnitude of finite endpoints of the perturbation sets.
const MAX_ENDPOINT: f64 = 1e4;
/// Smallest relative gap `|B†_kk - c²B†_ll|` outside the singleton case.
const GAP_CLEAR: f64 = 1e-2;
/// Smallest nonzero row norm of an orthonormal basis of span Z̃.
const ROW_CLEAR: f64 = 0.15;
/// Spectra of `B(t)`, `D(t)` at probe points must split into eigenvalues
/// below `SPECTRUM_ZERO` and above `SPECTRUM_CLEAR`, relative to the largest.
const SPECTRUM_ZERO: f64 = 1e-11;
const SPECTRUM_CLEAR: f64 = 1e-6;
/// Fraction of `T≤` kept clear of its endpoints by the probe points.
pub const PROBE_INSET: f64 = 0.025;

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}

/// Unit vector of `ℝ^r` supported on the first `dim` coordinates.
fn unit_in_subspace(rng: &mut ChaCha8Rng, r: usize, dim: usize) -> DVector<f64> {
    let mut v = DVector::zeros(r);
    v.rows_mut(0, dim).copy_from(&unit_gaussian(rng, dim));
    v
}

fn draw_points(spec: &InstanceSpec, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let (n, r) = (spec.n, spec.r);
    let mut pts = DMatrix::zeros(n, r);
    let special = spec.structure.entry().map(|e| e.zero_based());
    let is_special = |i: usize| special.is_some_and(|(k, l)| i == k || i == l);
    // Points in a low-dimensional subspace; a 0-sphere only has two points,
    // so those get the antipodal pair.
    let place_others = |pts: &mut DMatrix<f64>, dim: usize, rng: &mut ChaCha8Rng| {
        let mut sign = 1.0;
        for i in (0..n).filter(|&i| !is_special(i)) {
            let v = if dim == 1 {
                sign = -sign;
                let mut v = DVector::zeros(r);
                v[0] = -sign;
                v
            } else {
                unit_in_subspace(rng, r, dim)
            };
            pts.set_row(i, &v.transpose());
        }
    };
    match spec.structure {
        Structure::Generic => {
            for i in 0..n {
                pts.set_row(i, &unit_gaussian(rng, r).transpose());
            }
        }
        Structure::ParallelGalePair(e) | Structure::ZeroGalePair(e) => {
            let dim = if matches!(spec.structure, Structure::ParallelGalePair(_)) {
                r - 1
            } else {
                r - 2
            };
            place_others(&mut pts, dim, rng);
            let (k, l) = e.zero_based();
            pts.set_row(k, &unit_gaussian(rng, r).transpose());
            pts.set_row(l, &unit_gaussian(rng, r).transpose());
        }
        Structure::MirrorPair(e) => {
            place_others(&mut pts, r - 1, rng);
            let (k, l) = e.zero_based();
            let pk = unit_gaussian(rng, r);
            let mut pl = pk.clone();
            pl[r - 1] = -pl[r - 1];
            pts.set_row(k, &pk.transpose());
            pts.set_row(l, &pl.transpose());
        }
    }
    pts
}

fn clear_of(v: f64) -> bool {
    v <= EXACT || v >= CLEAR
}

/// True when every quantity the classification thresholds sits well away
/// from its threshold, so the outcome does not depend on rounding.
pub fn decisions_are_clear(profile: &EdmProfile) -> bool {
    let n = profile.n();
    let zt = column_normalized(profile.z_tilde());
    let z = profile.gale().map(column_normalized);
    for i in 0..n {
        if !clear_of(zt[(i, 0)].abs()) {
            return false;
        }
        if let Some(z) = &z {
            if !clear_of(z.row(i).norm()) {
                return false;
            }
        }
    }
    let basis = profile.z_tilde().clone().qr().q();
    // Pairing a vanishing row with a short one makes the exterior of
    // T≤ = {0} only quadratically infeasible.
    let norms: Vec<f64> = (0..n).map(|i| basis.row(i).norm()).collect();
    if norms.iter().any(|&x| x <= EXACT) && norms.iter().any(|&x| x > EXACT && x < ROW_CLEAR) {
        return false;
    }
    for entry in EntryIndex::all(n) {
        let (k, l) = entry.zero_based();
        let mut rows = vec![&zt];
        if let Some(z) = &z {
            rows.push(z);
        }
        for m in rows {
            let u = m.row(k).transpose();
            let v = m.row(l).transpose();
            if u.norm() > EXACT && v.norm() > EXACT && !clear_of(wedge_ratio(&u, &v)) {
                return false;
            }
        }
        let Ok(analysis) = analyze_entry(profile, entry) else {
            return false;
        };
        // At t = 0, λ_min(2E - D(t)) leaves 0 with slopes a·b ± |a||b|,
        // a and b rows of an orthonormal basis of span Z̃ (second order
        // when a row vanishes). Exterior probes need these clear of 0.
        let a = basis.row(k);
        let b = basis.row(l);
        if a.norm() > EXACT && b.norm() > EXACT {
            let (ab, nn) = (a.dot(&b), a.norm() * b.norm());
            if nn < CLEAR || (analysis.regime == Regime::Trivial && nn - ab.abs() < CLEAR) {
                return false;
            }
        }
        let y = &analysis.yielding;
        let mut endpoints = vec![
            analysis.t_leq.lo,
            analysis.t_leq.hi,
            y.interval.lo,
            y.interval.hi,
        ];
        endpoints.extend(y.theta_lower.iter().chain(&y.theta_upper).chain(&y.theta_c));
        for x in endpoints {
            if !x.is_finite() || x.abs() > MAX_ENDPOINT {
                return false;
            }
        }
        let w = analysis.t_leq.width();
        if w != 0.0 && w < CLEAR {
            return false;
        }
        if let Regime::Radial { c, .. } = analysis.regime {
            let bd = profile.b_dag();
            let (a, b) = (bd[(k, k)], c * c * bd[(l, l)]);
            // θ_c approaches an end of the yielding interval quadratically
            // in this gap, so a small gap leaves D(θ_c) nearly singular.
            let gap = (a - b).abs() / a.abs().max(b.abs());
            if gap > EXACT && gap < GAP_CLEAR {
                return false;
            }
        }
        if !analysis.warnings.is_empty() {
            return false;
        }
    }
    true
}

fn spectrum_split(m: &DMatrix<f64>) -> bool {
    let Ok(sym) = SymMatrix::new(m.clone()) else {
        return false;
    };
    let Ok(eig) = crate::linalg::sym_eig(&sym) else {
        return false;
    };
    let top = eig.max_abs();
    eig.eigenvalues
        .iter()
        .all(|x| x.abs() <= SPECTRUM_ZERO * top || x.abs() >= SPECTRUM_CLEAR * top)
}

/// True when `D(t)` and its Gram matrix have a clear numerical rank at the
/// endpoints of every `T≤` and at the probe points just inside them, so
/// that pseudoinverse-based oracles stay accurate there.
pub fn perturbations_are_well_conditioned(profile: &EdmProfile) -> bool {
    let d = profile.matrix();
    for entry in EntryIndex::all(profile.n()) {
        let Ok(analysis) = analyze_entry(profile, entry) else {
            return false;
        };
        let tl = analysis.t_leq;
        if tl.is_point() {
            continue;
        }
        let inset = PROBE_INSET * tl.width();
        for t in [tl.lo, tl.lo + inset, tl.hi - inset, tl.hi] {
            let raw = shifted_raw(d, entry, t);
            if !spectrum_split(&raw) || !spectrum_split(centroid_gram(&raw).as_matrix()) {
                return false;
            }
        }
    }
    true
}

fn accept(spec: &InstanceSpec, d: &DistanceMatrix, tol: &TolerancePolicy) -> bool {
    let n = d.n();
    for i in 0..n {
        for j in (i + 1)..n {
            if d.get(i, j) < MIN_DISTANCE {
                return false;
            }
        }
    }
    let Ok(p) = EdmProfile::new(d, tol) else {
        return false;
    };
    if p.r() != spec.r || !p.is_unit_spherical() || (2.0 * p.etw() - 1.0).abs() > 1e-10 {
        return false;
    }
    let spectrum = p.b_spectrum();
    if spectrum[spec.r - 1] < MIN_SPECTRAL_RATIO * spectrum[0] {
        return false;
    }
    if let (Some(entry), Some(expected)) = (spec.structure.entry(), spec.structure.expected_case())
    {
        match analyze_entry(&p, entry) {
            Ok(a) if a.case_tag() == expected => {}
            _ => return false,
        }
    }
    decisions_are_clear(&p) && perturbations_are_well_conditioned(&p)
}

/// Unit spherical EDM of embedding dimension `r` built from unit vectors
/// of `ℝ^r`. Draws whose classification would hinge on rounding are
/// redrawn, deterministically in the seed.
pub fn gen_unit_spherical(spec: &InstanceSpec) -> Result<DistanceMatrix> {
    spec.validate()?;
    let tol = TolerancePolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..MAX_ATTEMPTS {
        let pts = draw_points(spec, &mut rng);
        let d = DistanceMatrix::from_points(&pts)?;
        if accept(spec, &d, &tol) {
            return Ok(d);
        }
    }
    Err(Error::NumericalFailure(format!(
        "no well-conditioned draw for n = {}, r = {}, {} after {MAX_ATTEMPTS} attempts",
        spec.n,
        spec.r,
        spec.structure.name()
    )))
}

/// Nonspherical EDM from `n ≥ r + 2` generic points of `ℝ^r`.
///
/// Such points are affinely dependent and almost surely not on a common
/// sphere, which is exactly nonsphericity; the draw is checked (`eᵀw = 0`,
/// `rank D = r + 2`) and redrawn otherwise.
pub fn gen_nonspherical(n: usize, r: usize, seed: u64) -> Result<DistanceMatrix> {
    if n < MIN_ORDER || r < 1 || r + 2 > n {
        return Err(Error::InfeasibleSpec(format!(
            "nonspherical needs 1 ≤ r ≤ n - 2, got n = {n}, r = {r}"
        )));
    }
    let tol = TolerancePolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let pts = DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let d = DistanceMatrix::from_points(&pts)?;
        let Ok(p) = EdmProfile::new(&d, &tol) else {
            continue;
        };
        let spectrum = p.b_spectrum();
        let ok = p.r() == r
            && spectrum[r - 1] >= MIN_SPECTRAL_RATIO * spectrum[0]
            && p.rank_d() == r + 2
            && !p.is_spherical()
            && p.etw().abs() <= 1e-9;
        if ok {
            return Ok(d);
        }
    }
    Err(Error::NumericalFailure(format!(
        "no nonspherical draw for n = {n}, r = {r}"
    )))
}

/// `D + tE^{kl}` as a plain matrix; the entry may go negative.
pub fn shifted_raw(d: &DistanceMatrix, entry: EntryIndex, t: f64) -> DMatrix<f64> {
    let (k, l) = entry.zero_based();
    let mut m = d.as_matrix().clone();
    m[(k, l)] += t;
    m[(l, k)] += t;
    m
}

/// `λ_min(2E - D(t))`; nonnegative exactly when `D(t)` is spherical with
/// radius at most 1.
pub fn unit_ball_margin(d: &DistanceMatrix, entry: EntryIndex, t: f64) -> Result<f64> {
    let m = shifted_raw(d, entry, t);
    let n = m.nrows();
    let a = DMatrix::from_element(n, n, 2.0) - m;
    min_eigenvalue(&SymMatrix::new(a)?)
}

/// `λ_min(-J D(t) J / 2)`.
pub fn edm_margin(d: &DistanceMatrix, entry: EntryIndex, t: f64) -> Result<f64> {
    min_eigenvalue(&centroid_gram(&shifted_raw(d, entry, t)))
}

/// `eᵀ D(t)† e`.
pub fn etw_direct(
    d: &DistanceMatrix,
    entry: EntryIndex,
    t: f64,
    tol: &TolerancePolicy,
) -> Result<f64> {
    let m = SymMatrix::new(shifted_raw(d, entry, t))?;
    Ok(pinv(&m, tol)?.as_matrix().sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub t: f64,
    pub is_edm: bool,
    pub is_spherical: bool,
    /// `1/(2eᵀw(t))` when spherical.
    pub radius_sq: Option<f64>,
    pub in_t_leq: bool,
    pub in_t_eq: bool,
}

fn margin_threshold(tol: &TolerancePolicy, n: usize, scale: f64) -> f64 {
    tol.psd_abs_scale * n as f64 * scale.max(1.0)
}

pub fn membership_scan(
    d: &DistanceMatrix,
    entry: EntryIndex,
    ts: &[f64],
    tol: &TolerancePolicy,
) -> Result<Vec<SweepRecord>> {
    entry.check_order(d.n())?;
    let n = d.n();
    ts.iter()
        .map(|&t| {
            let raw = shifted_raw(d, entry, t);
            let scale = raw.amax();
            let is_edm = min_eigenvalue(&centroid_gram(&raw))? >= -margin_threshold(tol, n, scale);
            let profile = if is_edm {
                // An endpoint computed in floating point can leave the shifted
                // entry a few ulps below zero.
                let mut m = raw.clone();
                let (k, l) = entry.zero_based();
                if m[(k, l)] < 0.0 && m[(k, l)] >= -margin_threshold(tol, n, scale) {
                    m[(k, l)] = 0.0;
                    m[(l, k)] = 0.0;
                }
                DistanceMatrix::new(m)
                    .ok()
                    .and_then(|m| EdmProfile::new(&m, tol).ok())
            } else {
                None
            };
            let is_spherical = profile.as_ref().is_some_and(|p| p.is_spherical());
            let etw = profile.as_ref().map(|p| p.etw());
            let radius_sq = if is_spherical {
                etw.map(|x| 1.0 / (2.0 * x))
            } else {
                None
            };
            let in_t_leq =
                is_edm && unit_ball_margin(d, entry, t)? >= -margin_threshold(tol, n, scale);
            let in_t_eq = in_t_leq
                && is_spherical
                && etw.is_some_and(|x| (2.0 * x - 1.0).abs() <= UNIT_REL * n as f64);
            Ok(SweepRecord {
                t,
                is_edm,
                is_spherical,
                radius_sq,
                in_t_leq,
                in_t_eq,
            })
        })
        .collect()
}

/// `ρ²(t)` of `D + tE^{kl}` through `1/(2eᵀw(t))` with a fresh pseudoinverse.
pub fn direct_radius_sq(
    d: &DistanceMatrix,
    entry: EntryIndex,
    t: f64,
    tol: &TolerancePolicy,
) -> Result<f64> {
    let m = DistanceMatrix::new(shifted_raw(d, entry, t)).map_err(|_| Error::NotAnEdm)?;
    let p = EdmProfile::new(&m, tol)?;
    if !p.is_spherical() {
        return Err(Error::PreconditionViolated(format!(
            "D + tE^kl is not spherical at t = {t}"
        )));
    }
    Ok(1.0 / (2.0 * p.etw()))
}

const SDP_CAP: f64 = 1.099_511_627_776e12; // 2^40
const SDP_GAP: f64 = 1e-12;

/// `min { λ : 2λE - tE^{kl} - D ⪰ 0 }` by bisection.
///
/// The feasible set is a ray `[λ*, ∞)`: adding a multiple of `E` can only
/// raise eigenvalues. It is empty when `D(t)` is not an EDM. For a
/// nonspherical EDM the infimum is infinite and the result is only as large
/// as rounding lets it get.
pub fn sdp_min_radius_sq(d: &DistanceMatrix, entry: EntryIndex, t: f64) -> Result<f64> {
    entry.check_order(d.n())?;
    let raw = shifted_raw(d, entry, t);
    let n = raw.nrows();
    let thresh = 1e-13 * raw.amax().max(1.0);
    if min_eigenvalue(&centroid_gram(&raw))? < -thresh * n as f64 {
        return Err(Error::Infeasible(format!(
            "D + tE^kl is not an EDM at t = {t}"
        )));
    }
    let ones = DMatrix::from_element(n, n, 1.0);
    let feasible = |lambda: f64| -> Result<bool> {
        let m = 2.0 * lambda * &ones - &raw;
        Ok(min_eigenvalue(&SymMatrix::new(m)?)? >= -thresh)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > SDP_CAP {
            return Err(Error::Infeasible(format!(
                "2λE - D(t) is not semidefinite for any λ ≤ 2^40 at t = {t}"
            )));
        }
    }
    if feasible(lo)? {
        return Ok(lo);
    }
    while hi - lo > SDP_GAP * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Locates the sign change of `f` between `a` (where `f ≥ 0`) and `b`
/// (where `f < 0`) by bisection.
pub fn bisect_boundary<F>(mut a: f64, mut b: f64, tol: f64, mut f: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<bool>,
{
    while (b - a).abs() > tol {
        let mid = 0.5 * (a + b);
        if f(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

//! Perturbations `D + tE^{kl}` of a unit spherical EDM.
//!
//! For a yielding entry this module computes
//! - `T≤`: the shifts keeping `D + tE^{kl}` spherical of radius at most 1,
//! - the squared radius `ρ²(t)` in closed form,
//! - `T=`: the shifts keeping it exactly unit spherical.
//!
//! Everything is decided from the rows `k`, `l` of `Z̃ = [w Z]` and from
//! entries of `D†` and `B†`.

use crate::edm::EdmProfile;
use crate::error::{Error, Result};
use crate::yielding::{
    column_normalized, row_relation, sk_minus_c_sl_sq, theta_bounds, theta_c, yielding_report,
    EntryIndex, Interval, ParallelRelation, YieldingReport,
};

/// Relative band for the test `‖s^k‖² = c²‖s^l‖²`.
pub const SINGLETON_REL: f64 = 1e-8;
/// Relative gaps below this (but above [`SINGLETON_REL`]) get a proximity warning.
pub const SINGLETON_WARN_REL: f64 = 1e-5;
/// Relative slack when testing membership in `T≤`.
pub const TLEQ_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseTag {
    NotYielding,
    TleqTrivial,
    ContinuumUnit,
    PairUnit,
    SingletonUnit,
}

impl CaseTag {
    pub const ALL: [CaseTag; 5] = [
        CaseTag::NotYielding,
        CaseTag::TleqTrivial,
        CaseTag::ContinuumUnit,
        CaseTag::PairUnit,
        CaseTag::SingletonUnit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CaseTag::NotYielding => "NotYielding",
            CaseTag::TleqTrivial => "TleqTrivial",
            CaseTag::ContinuumUnit => "ContinuumUnit",
            CaseTag::PairUnit => "PairUnit",
            CaseTag::SingletonUnit => "SingletonUnit",
        }
    }
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which closed form governs an entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    NotYielding,
    /// `z̃^k`, `z̃^l` not parallel: `T≤ = {0}`.
    Trivial,
    /// `w_k = w_l = 0`: radius stays 1 on all of `T≤`.
    ZeroW,
    /// `w_k ≠ 0`, `r ≤ n - 2`, `z^k ≠ 0`: radius stays 1 on all of `T≤`.
    GaleNonzero,
    /// `w_k = c·w_l ≠ 0` and `r = n - 1` or `z^k = z^l = 0`: the radius
    /// varies as `f(t)/g(t)`.
    Radial {
        c: f64,
        singleton: bool,
    },
}

/// Unit-sphere perturbation set `T=`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TeqSet {
    Continuum(Interval),
    /// `{0, θ_c}`.
    Pair(f64),
    /// `{0}`.
    Singleton,
}

impl TeqSet {
    pub fn kind(&self) -> &'static str {
        match self {
            TeqSet::Continuum(_) => "continuum",
            TeqSet::Pair(_) => "pair",
            TeqSet::Singleton => "singleton",
        }
    }

    /// Interval endpoints for a continuum, the members otherwise.
    pub fn values(&self) -> Vec<f64> {
        match self {
            TeqSet::Continuum(i) => vec![i.lo, i.hi],
            TeqSet::Pair(tc) => vec![0.0, *tc],
            TeqSet::Singleton => vec![0.0],
        }
    }

    pub fn contains(&self, t: f64, rel_slack: f64) -> bool {
        match self {
            TeqSet::Continuum(i) => i.contains(t, rel_slack),
            TeqSet::Pair(tc) => {
                Interval::point(0.0).contains(t, rel_slack)
                    || Interval::point(*tc).contains(t, rel_slack)
            }
            TeqSet::Singleton => Interval::point(0.0).contains(t, rel_slack),
        }
    }
}

/// Coefficients of `f(t) = 1 + α₁t + α₂t²` and `g(t) = 1 + β₁t + β₂t²`,
/// with `ρ²(t) = f(t)/g(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusCoefficients {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub c: f64,
    pub w_l: f64,
    pub theta_lower: f64,
    pub theta_upper: f64,
    pub theta_c: f64,
    pub singleton: bool,
}

impl RadiusCoefficients {
    pub fn f(&self, t: f64) -> f64 {
        1.0 + self.alpha1 * t + self.alpha2 * t * t
    }

    pub fn g(&self, t: f64) -> f64 {
        1.0 + self.beta1 * t + self.beta2 * t * t
    }

    /// `g(t) = β₂ (t - θ̲)(t - θ̄)`.
    pub fn g_factored(&self, t: f64) -> f64 {
        self.beta2 * (t - self.theta_lower) * (t - self.theta_upper)
    }

    pub fn f_prime(&self, t: f64) -> f64 {
        self.alpha1 + 2.0 * self.alpha2 * t
    }

    pub fn g_prime(&self, t: f64) -> f64 {
        self.beta1 + 2.0 * self.beta2 * t
    }

    /// Root of `g` that coincides with `θ_c` in the singleton case.
    fn shared_root(&self) -> f64 {
        if self.c > 0.0 {
            self.theta_lower
        } else {
            self.theta_upper
        }
    }

    fn other_root(&self) -> f64 {
        if self.c > 0.0 {
            self.theta_upper
        } else {
            self.theta_lower
        }
    }

    /// `f(t)/g(t)`. In the singleton case `f` and `g` share the root `θ_c`,
    /// which is divided out, so the value at `θ_c` is the L'Hospital limit
    /// `f'(θ_c)/g'(θ_c)`.
    pub fn ratio(&self, t: f64) -> Result<f64> {
        if self.singleton {
            let den = self.beta2 * (t - self.other_root());
            if den == 0.0 {
                return Err(Error::PoleAt { t });
            }
            Ok((self.alpha2 * t - 1.0 / self.theta_c) / den)
        } else {
            let den = self.g_factored(t);
            if den == 0.0 {
                return Err(Error::PoleAt { t });
            }
            Ok(self.f(t) / den)
        }
    }

    /// Poles of `f/g` after cancellation.
    pub fn poles(&self) -> Vec<f64> {
        if self.singleton {
            vec![self.other_root()]
        } else {
            vec![self.theta_lower, self.theta_upper]
        }
    }

    #[doc(hidden)]
    pub fn shared_root_for_tests(&self) -> f64 {
        self.shared_root()
    }
}

/// Everything about one entry, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryAnalysis {
    pub yielding: YieldingReport,
    /// Relation between rows `k`, `l` of `Z̃`.
    pub tilde_relation: ParallelRelation,
    pub t_leq: Interval,
    pub regime: Regime,
    pub warnings: Vec<String>,
}

impl EntryAnalysis {
    pub fn case_tag(&self) -> CaseTag {
        match self.regime {
            Regime::NotYielding => CaseTag::NotYielding,
            Regime::Trivial => CaseTag::TleqTrivial,
            Regime::ZeroW | Regime::GaleNonzero => CaseTag::ContinuumUnit,
            Regime::Radial {
                singleton: false, ..
            } => CaseTag::PairUnit,
            Regime::Radial {
                singleton: true, ..
            } => CaseTag::SingletonUnit,
        }
    }

    pub fn t_eq(&self) -> TeqSet {
        match self.regime {
            Regime::NotYielding | Regime::Trivial => TeqSet::Singleton,
            Regime::ZeroW | Regime::GaleNonzero => TeqSet::Continuum(self.t_leq),
            Regime::Radial {
                singleton: true, ..
            } => TeqSet::Singleton,
            Regime::Radial {
                singleton: false, ..
            } => TeqSet::Pair(
                self.yielding_theta_c()
                    .expect("radial regime always carries theta_c"),
            ),
        }
    }

    /// `θ_c` of the `Z̃` relation (the endpoint of `T≤` other than 0).
    fn yielding_theta_c(&self) -> Option<f64> {
        if self.t_leq.lo != 0.0 {
            Some(self.t_leq.lo)
        } else if self.t_leq.hi != 0.0 {
            Some(self.t_leq.hi)
        } else {
            None
        }
    }

    /// True when `w_k = c·w_l ≠ 0` and either
    /// `r = n - 1` or `z^k = z^l = 0`.
    pub fn radial_premises(&self) -> bool {
        matches!(self.regime, Regime::Radial { .. })
    }
}

pub fn analyze_entry(profile: &EdmProfile, entry: EntryIndex) -> Result<EntryAnalysis> {
    profile.require_unit_spherical()?;
    let yielding = yielding_report(profile, entry)?;
    let tol = profile.tol();
    let tilde_relation = row_relation(profile.z_tilde(), entry, tol);
    let mut warnings = Vec::new();

    if !yielding.yielding {
        return Ok(EntryAnalysis {
            yielding,
            tilde_relation,
            t_leq: Interval::point(0.0),
            regime: Regime::NotYielding,
            warnings,
        });
    }

    let (t_leq, regime) = match tilde_relation {
        ParallelRelation::NotParallel => (Interval::point(0.0), Regime::Trivial),
        ParallelRelation::BothZero => {
            let (lo, hi) = theta_bounds(profile, entry)?;
            (Interval::new(lo, hi), Regime::ZeroW)
        }
        ParallelRelation::Scalar(c) => {
            let tc = theta_c(profile, entry, c)?;
            let interval = if c > 0.0 {
                Interval::new(tc, 0.0)
            } else {
                Interval::new(0.0, tc)
            };
            let (k, l) = entry.zero_based();
            let zt = column_normalized(profile.z_tilde());
            let regime = if zt[(k, 0)].abs() <= tol.parallel_rel {
                Regime::ZeroW
            } else if profile.r() + 2 <= profile.n()
                && zt.row(k).columns(1, zt.ncols() - 1).norm() > tol.parallel_rel
            {
                Regime::GaleNonzero
            } else {
                let bd = profile.b_dag();
                let (a, b) = (bd[(k, k)], c * c * bd[(l, l)]);
                let gap = (a - b).abs() / a.abs().max(b.abs());
                if gap > SINGLETON_REL && gap <= SINGLETON_WARN_REL {
                    warnings.push(format!(
                        "entry {entry}: |B†_kk - c²B†_ll| is within {gap:.3e} (relative) of the singleton case; \
                         the pair {{0, θ_c}} is close to collapsing"
                    ));
                }
                Regime::Radial {
                    c,
                    singleton: gap <= SINGLETON_REL,
                }
            };
            (interval, regime)
        }
    };

    Ok(EntryAnalysis {
        yielding,
        tilde_relation,
        t_leq,
        regime,
        warnings,
    })
}

pub fn t_leq(profile: &EdmProfile, entry: EntryIndex) -> Result<Interval> {
    Ok(analyze_entry(profile, entry)?.t_leq)
}

pub fn t_eq(profile: &EdmProfile, entry: EntryIndex) -> Result<TeqSet> {
    Ok(analyze_entry(profile, entry)?.t_eq())
}

pub fn radius_coefficients(profile: &EdmProfile, entry: EntryIndex) -> Result<RadiusCoefficients> {
    let analysis = analyze_entry(profile, entry)?;
    coefficients_for(profile, entry, &analysis)
}

fn coefficients_for(
    profile: &EdmProfile,
    entry: EntryIndex,
    analysis: &EntryAnalysis,
) -> Result<RadiusCoefficients> {
    let Regime::Radial { c, singleton } = analysis.regime else {
        return Err(Error::PreconditionViolated(format!(
            "entry {entry} does not satisfy w_k = c·w_l ≠ 0 with r = n-1 or z^k = z^l = 0"
        )));
    };
    let (k, l) = entry.zero_based();
    let dd = profile.d_dag();
    let bd = profile.b_dag();
    let w_l = profile.w()[l];

    let alpha1 = 2.0 * dd[(k, l)];
    let alpha2 = dd[(k, l)] * dd[(k, l)] - dd[(k, k)] * dd[(l, l)];
    let beta1 = -bd[(k, l)];
    let beta2 = 0.25 * (bd[(k, l)] * bd[(k, l)] - bd[(k, k)] * bd[(l, l)]);

    // The same coefficients through D† and w.
    let w2 = w_l * w_l;
    let beta1_alt = alpha1 - 4.0 * c * w2;
    let quad = dd[(k, k)] + c * c * dd[(l, l)] - 2.0 * c * dd[(k, l)];
    let beta2_alt = alpha2 + 2.0 * w2 * quad;
    let agree = |x: f64, y: f64, scale: f64| (x - y).abs() <= 1e-8 * scale.max(f64::MIN_POSITIVE);
    let s1 = alpha1.abs() + (4.0 * c * w2).abs() + beta1.abs();
    let s2 = alpha2.abs() + (2.0 * w2 * quad).abs() + beta2.abs();
    if !agree(beta1, beta1_alt, s1) || !agree(beta2, beta2_alt, s2) {
        return Err(Error::NumericalFailure(format!(
            "coefficient identities disagree at {entry}: beta1 {beta1} vs {beta1_alt}, beta2 {beta2} vs {beta2_alt}"
        )));
    }
    if beta2 >= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "beta2 = {beta2} is not negative at {entry}"
        )));
    }

    let (theta_lower, theta_upper) = theta_bounds(profile, entry)?;
    let tc = theta_c(profile, entry, c)?;
    Ok(RadiusCoefficients {
        alpha1,
        alpha2,
        beta1,
        beta2,
        c,
        w_l,
        theta_lower,
        theta_upper,
        theta_c: tc,
        singleton,
    })
}

/// `ρ²(t)` for `t ∈ T≤`.
pub fn radius_squared(profile: &EdmProfile, entry: EntryIndex, t: f64) -> Result<f64> {
    let analysis = analyze_entry(profile, entry)?;
    radius_squared_with(profile, entry, &analysis, t)
}

pub(crate) fn radius_squared_with(
    profile: &EdmProfile,
    entry: EntryIndex,
    analysis: &EntryAnalysis,
    t: f64,
) -> Result<f64> {
    let tl = analysis.t_leq;
    if !tl.contains(t, TLEQ_SLACK) {
        return Err(Error::OutsideTleq {
            t,
            lo: tl.lo,
            hi: tl.hi,
        });
    }
    match analysis.regime {
        Regime::Radial { .. } => coefficients_for(profile, entry, analysis)?.ratio(t),
        _ => Ok(1.0),
    }
}

/// `f(t)/g(t)` anywhere off the poles, flagged `true` when `t ∉ T≤`.
/// Only defined under the radial premises; elsewhere the radius is 1 on
/// `T≤` and nothing is claimed outside it.
pub fn radius_squared_extrapolated(
    profile: &EdmProfile,
    entry: EntryIndex,
    t: f64,
) -> Result<(f64, bool)> {
    let analysis = analyze_entry(profile, entry)?;
    let outside = !analysis.t_leq.contains(t, TLEQ_SLACK);
    if !outside {
        return Ok((radius_squared_with(profile, entry, &analysis, t)?, false));
    }
    match analysis.regime {
        Regime::Radial { .. } => Ok((coefficients_for(profile, entry, &analysis)?.ratio(t)?, true)),
        _ => Err(Error::OutsideTleq {
            t,
            lo: analysis.t_leq.lo,
            hi: analysis.t_leq.hi,
        }),
    }
}

/// Complete single-entry report.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub entry: EntryIndex,
    pub yielding: YieldingReport,
    pub case_tag: CaseTag,
    pub t_leq: Interval,
    pub t_eq: TeqSet,
    pub coefficients: Option<RadiusCoefficients>,
    pub warnings: Vec<String>,
}

pub fn classify(profile: &EdmProfile, entry: EntryIndex) -> Result<PerturbationReport> {
    let analysis = analyze_entry(profile, entry)?;
    let coefficients = match analysis.regime {
        Regime::Radial { .. } => Some(coefficients_for(profile, entry, &analysis)?),
        _ => None,
    };
    Ok(PerturbationReport {
        entry,
        case_tag: analysis.case_tag(),
        t_leq: analysis.t_leq,
        t_eq: analysis.t_eq(),
        coefficients,
        warnings: analysis.warnings.clone(),
        yielding: analysis.yielding,
    })
}

/// `‖s^k - c s^l‖²`, exposed for the endpoint identity checks.
pub fn sk_minus_c_sl_norm_sq(profile: &EdmProfile, entry: EntryIndex, c: f64) -> f64 {
    sk_minus_c_sl_sq(profile, entry, c)
}

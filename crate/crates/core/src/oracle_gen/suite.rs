//! Randomized end-to-end verification: closed forms against oracles on
//! generated instances.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    direct_radius_sq, etw_direct, gen_unit_spherical, sdp_min_radius_sq, unit_ball_margin,
    InstanceSpec, Structure,
};
use crate::cayley_menger::{cm_build, cm_embedding_dim, cm_gale, cm_is_edm, cm_w_inner};
use crate::edm::{DistanceMatrix, EdmProfile};
use crate::error::{Error, Result};
use crate::linalg::{pinv, rel_diff, TolerancePolicy};
use crate::perturbation::{
    classify, radius_squared, CaseTag, PerturbationReport, RadiusCoefficients, TeqSet,
};
use crate::yielding::{EntryIndex, Interval};

/// Instances per case needed before coverage is enforced.
pub const MIN_PER_CASE: usize = 5;
pub const MIN_NMAX: usize = 5;
pub const MAX_NMAX: usize = 16;
/// Distance beyond a finite endpoint of `T≤` probed for infeasibility.
pub const EXTERIOR_STEP: f64 = 1e-3;
/// Relative distortion applied to closed-form radii by the negative control.
pub const CORRUPTION: f64 = 1e-6;

pub mod tolerances {
    pub const PINV_IDENTITY: f64 = 1e-8;
    pub const CROSS_PATH: f64 = 1e-10;
    pub const DIRECT: f64 = 1e-8;
    pub const SDP: f64 = 1e-7;
    pub const ENDPOINT_IDENTITY: f64 = 1e-8;
    /// Interior points need `λ_min(2E - D(t)) ≥ -INTERIOR * n`.
    pub const INTERIOR: f64 = 1e-8;
    /// Exterior points need `λ_min(2E - D(t)) < -EXTERIOR`.
    pub const EXTERIOR: f64 = 1e-10;
    pub const UNIT: f64 = 1e-8;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub count: usize,
    pub seed: u64,
    pub nmax: usize,
    /// Distort the closed-form radius so the comparisons must fail.
    pub corrupt: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            count: 25,
            seed: 0,
            nmax: 8,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledInstance {
    pub spec: InstanceSpec,
    /// Case the recipe is meant to produce somewhere in the instance.
    pub target: CaseTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOutcome {
    pub index: usize,
    pub scheduled: ScheduledInstance,
    pub tags: BTreeSet<CaseTag>,
    pub checks: Vec<CheckResult>,
}

impl InstanceOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub instances: Vec<InstanceOutcome>,
    /// Number of instances containing each case.
    pub coverage: BTreeMap<CaseTag, usize>,
}

impl VerifyReport {
    pub fn coverage_enforced(&self) -> bool {
        self.config.count >= MIN_PER_CASE * CaseTag::ALL.len()
    }

    pub fn coverage_ok(&self) -> bool {
        !self.coverage_enforced()
            || CaseTag::ALL
                .iter()
                .all(|t| self.coverage.get(t).copied().unwrap_or(0) >= MIN_PER_CASE)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&InstanceOutcome, &CheckResult)> {
        self.instances
            .iter()
            .flat_map(|i| i.checks.iter().filter(|c| !c.passed).map(move |c| (i, c)))
    }

    pub fn passed(&self) -> bool {
        self.coverage_ok() && self.failures().next().is_none()
    }
}

fn random_entry(rng: &mut ChaCha8Rng, n: usize) -> EntryIndex {
    let k = rng.random_range(0..n);
    let mut l = rng.random_range(0..n - 1);
    if l >= k {
        l += 1;
    }
    EntryIndex::new(k, l).expect("distinct indices")
}

/// Instance recipes cycling through the five cases.
pub fn schedule(config: &VerifyConfig) -> Result<Vec<ScheduledInstance>> {
    if config.nmax < MIN_NMAX || config.nmax > MAX_NMAX {
        return Err(Error::InfeasibleSpec(format!(
            "nmax must lie in [{MIN_NMAX}, {MAX_NMAX}], got {}",
            config.nmax
        )));
    }
    let nmax = config.nmax;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let seed = rng.next_u64();
        let (n, r, structure, target) = match i % 5 {
            0 => {
                let n = rng.random_range(5..=nmax);
                (
                    n,
                    rng.random_range(2..=n - 3),
                    Structure::Generic,
                    CaseTag::NotYielding,
                )
            }
            1 => {
                let n = rng.random_range(4..=nmax);
                (n, n - 2, Structure::Generic, CaseTag::TleqTrivial)
            }
            2 => {
                let n = rng.random_range(4..=nmax);
                let e = random_entry(&mut rng, n);
                if (i / 5) % 2 == 0 {
                    let r = if n == 4 {
                        2
                    } else {
                        rng.random_range(3..=n - 2)
                    };
                    (n, r, Structure::ParallelGalePair(e), CaseTag::ContinuumUnit)
                } else {
                    let r = if n == 4 {
                        3
                    } else {
                        rng.random_range(4..=n - 1)
                    };
                    (n, r, Structure::ZeroGalePair(e), CaseTag::ContinuumUnit)
                }
            }
            3 => {
                let n = rng.random_range(3..=nmax);
                (n, n - 1, Structure::Generic, CaseTag::PairUnit)
            }
            _ => {
                let n = rng.random_range(3..=nmax);
                let e = random_entry(&mut rng, n);
                (n, n - 1, Structure::MirrorPair(e), CaseTag::SingletonUnit)
            }
        };
        out.push(ScheduledInstance {
            spec: InstanceSpec::new(n, r, structure, seed)?,
            target,
        });
    }
    Ok(out)
}

pub fn verify_run(config: &VerifyConfig) -> Result<VerifyReport> {
    let plan = schedule(config)?;
    let mut instances = Vec::with_capacity(plan.len());
    let mut coverage: BTreeMap<CaseTag, usize> = CaseTag::ALL.iter().map(|t| (*t, 0)).collect();
    for (index, scheduled) in plan.into_iter().enumerate() {
        let (tags, mut checks) = match gen_unit_spherical(&scheduled.spec) {
            Ok(d) => check_instance(&d, config.corrupt),
            Err(e) => (
                BTreeSet::new(),
                vec![CheckResult::new("generate", false, e.to_string())],
            ),
        };
        checks.push(CheckResult::new(
            "target_case",
            tags.contains(&scheduled.target),
            format!("wanted {}, found {:?}", scheduled.target, tags),
        ));
        for t in &tags {
            *coverage.entry(*t).or_default() += 1;
        }
        instances.push(InstanceOutcome {
            index,
            scheduled,
            tags,
            checks,
        });
    }
    Ok(VerifyReport {
        config: *config,
        instances,
        coverage,
    })
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        return 0.0;
    }
    d / a.abs().max(b.abs()).max(floor)
}

/// `count` points spread over the interior of `[lo, hi]`.
pub fn interior_samples(i: &Interval, count: usize) -> Vec<f64> {
    if i.is_point() {
        return vec![i.lo];
    }
    (0..count)
        .map(|j| i.lo + (j as f64 + 0.5) / count as f64 * (i.hi - i.lo))
        .collect()
}

/// Accumulates the worst value of a named comparison.
struct Worst {
    name: &'static str,
    limit: f64,
    worst: f64,
    at: String,
    error: Option<String>,
}

impl Worst {
    fn new(name: &'static str, limit: f64) -> Self {
        Worst {
            name,
            limit,
            worst: 0.0,
            at: String::new(),
            error: None,
        }
    }

    fn record(&mut self, value: f64, at: impl FnOnce() -> String) {
        if value > self.worst || value.is_nan() {
            self.worst = value;
            self.at = at();
        }
    }

    fn fail(&mut self, msg: String) {
        self.error.get_or_insert(msg);
    }

    fn finish(self) -> CheckResult {
        match self.error {
            Some(e) => CheckResult::new(self.name, false, e),
            None => CheckResult::new(
                self.name,
                self.worst <= self.limit,
                format!(
                    "max {:.3e} (limit {:.0e}){}",
                    self.worst, self.limit, self.at
                ),
            ),
        }
    }
}

fn endpoint_identity_values(
    p: &EdmProfile,
    entry: EntryIndex,
    co: &RadiusCoefficients,
) -> Vec<(&'static str, f64, f64, f64)> {
    let (k, l) = entry.zero_based();
    let bd = p.b_dag();
    let (sk, sl, bkl) = (bd[(k, k)].sqrt(), bd[(l, l)].sqrt(), bd[(k, l)]);
    let c = co.c;
    let w2 = co.w_l * co.w_l;
    let nrm = bd[(k, k)] + c * c * bd[(l, l)] - 2.0 * c * bkl;
    let f_scale = |t: f64| 1.0 + (co.alpha1 * t).abs() + (co.alpha2 * t * t).abs();
    let (lo, hi, tc) = (co.theta_lower, co.theta_upper, co.theta_c);
    vec![
        (
            "f(theta_lower)",
            co.f(lo),
            4.0 * w2 * (sk - c * sl).powi(2) / (bkl - sk * sl).powi(2),
            f_scale(lo),
        ),
        (
            "f(theta_upper)",
            co.f(hi),
            4.0 * w2 * (sk + c * sl).powi(2) / (bkl + sk * sl).powi(2),
            f_scale(hi),
        ),
        (
            "f(theta_c)",
            co.f(tc),
            (bd[(k, k)] - c * c * bd[(l, l)]).powi(2) / (nrm * nrm),
            f_scale(tc),
        ),
        (
            "g(theta_c)",
            co.g(tc),
            (bd[(k, k)] - c * c * bd[(l, l)]).powi(2) / (nrm * nrm),
            1.0 + (co.beta1 * tc).abs() + (co.beta2 * tc * tc).abs(),
        ),
        (
            "theta_c - theta_lower",
            tc - lo,
            -2.0 * (sk - c * sl).powi(2) / (nrm * (bkl - sk * sl)),
            tc.abs() + lo.abs(),
        ),
        (
            "theta_upper - theta_c",
            hi - tc,
            2.0 * (sk + c * sl).powi(2) / (nrm * (bkl + sk * sl)),
            tc.abs() + hi.abs(),
        ),
    ]
}

/// Runs every check on one unit spherical instance.
pub fn check_instance(d: &DistanceMatrix, corrupt: bool) -> (BTreeSet<CaseTag>, Vec<CheckResult>) {
    let tol = TolerancePolicy::default();
    let mut tags = BTreeSet::new();
    let mut checks = Vec::new();
    let p = match EdmProfile::new(d, &tol) {
        Ok(p) => p,
        Err(e) => {
            return (
                tags,
                vec![CheckResult::new("profile", false, e.to_string())],
            )
        }
    };
    let n = p.n();
    checks.push(CheckResult::new(
        "unit_spherical",
        p.is_unit_spherical(),
        format!("2eᵀw = {:.15}", 2.0 * p.etw()),
    ));
    checks.push(pinv_identity_check(&p, &tol));
    checks.push(cayley_menger_check(d, &p, &tol));

    let mut reports = Vec::new();
    for entry in EntryIndex::all(n) {
        match classify(&p, entry) {
            Ok(rep) => {
                tags.insert(rep.case_tag);
                reports.push(rep);
            }
            Err(e) => checks.push(CheckResult::new("classify", false, format!("{entry}: {e}"))),
        }
    }

    let distort = if corrupt { 1.0 + CORRUPTION } else { 1.0 };
    let mut nesting = Worst::new("tleq_within_yielding", 0.0);
    let mut interior = Worst::new("membership_interior", tolerances::INTERIOR * n as f64);
    let mut exterior = Worst::new("membership_exterior", 0.0);
    let mut teq = Worst::new("teq_unit", tolerances::UNIT);
    let mut cross = Worst::new("cross_path", tolerances::CROSS_PATH);
    let mut direct = Worst::new("direct_radius", tolerances::DIRECT);
    let mut sdp = Worst::new("sdp_bisection", tolerances::SDP);
    let mut endpoint = Worst::new("endpoint_identities", tolerances::ENDPOINT_IDENTITY);
    let mut sdp_entries = 0;

    for rep in &reports {
        let entry = rep.entry;
        let tl = rep.t_leq;
        nesting.record(
            if tl.is_subset_of(&rep.yielding.interval, 1e-12) {
                0.0
            } else {
                1.0
            },
            || format!(" at {entry}"),
        );

        let mut probes = interior_samples(&tl, 5);
        probes.extend([tl.lo, tl.hi]);
        for t in probes {
            match unit_ball_margin(d, entry, t) {
                Ok(m) => interior.record(-m, || format!(" at {entry}, t = {t}")),
                Err(e) => interior.fail(format!("{entry}, t = {t}: {e}")),
            }
        }
        for t in [tl.lo - EXTERIOR_STEP, tl.hi + EXTERIOR_STEP] {
            match unit_ball_margin(d, entry, t) {
                Ok(m) => exterior.record(if m < -tolerances::EXTERIOR { 0.0 } else { 1.0 }, || {
                    format!(" at {entry}, t = {t}: λ_min = {m:.3e}")
                }),
                Err(e) => exterior.fail(format!("{entry}, t = {t}: {e}")),
            }
        }

        let members = match rep.t_eq {
            TeqSet::Continuum(i) => interior_samples(&i, 5),
            other => other.values(),
        };
        for t in members {
            match etw_direct(d, entry, t, &tol) {
                Ok(x) => teq.record((2.0 * x - 1.0).abs(), || format!(" at {entry}, t = {t}")),
                Err(e) => teq.fail(format!("{entry}, t = {t}: {e}")),
            }
        }

        radius_checks(
            d,
            &p,
            rep,
            distort,
            &tol,
            &mut cross,
            &mut direct,
            &mut endpoint,
            (sdp_entries < 2).then_some(&mut sdp),
        );
        if rep.coefficients.is_some() || rep.case_tag == CaseTag::ContinuumUnit {
            sdp_entries += 1;
        }
    }
    checks.extend(
        [
            nesting, interior, exterior, teq, cross, direct, sdp, endpoint,
        ]
        .map(Worst::finish),
    );
    (tags, checks)
}

#[allow(clippy::too_many_arguments)]
fn radius_checks(
    d: &DistanceMatrix,
    p: &EdmProfile,
    rep: &PerturbationReport,
    distort: f64,
    tol: &TolerancePolicy,
    cross: &mut Worst,
    direct: &mut Worst,
    endpoint: &mut Worst,
    sdp: Option<&mut Worst>,
) {
    let entry = rep.entry;
    let radial = rep.coefficients.is_some();
    // A one-point T≤ still pins ρ²(0) = 1 against the direct route.
    let ts = if rep.t_leq.is_point() {
        vec![rep.t_leq.lo]
    } else {
        interior_samples(&rep.t_leq, 20)
    };
    let mut closed = Vec::with_capacity(ts.len());
    for &t in &ts {
        let rho = match radius_squared(p, entry, t) {
            Ok(v) => v * distort,
            Err(e) => {
                cross.fail(format!("{entry}, t = {t}: {e}"));
                return;
            }
        };
        closed.push(rho);
        if radial {
            match cm_w_inner(p, entry, t) {
                Ok(x) => cross.record(rel_err(rho, 1.0 - 0.5 * x, 0.0), || {
                    format!(" at {entry}, t = {t}")
                }),
                Err(e) => cross.fail(format!("{entry}, t = {t}: {e}")),
            }
        }
        match direct_radius_sq(d, entry, t, tol) {
            Ok(x) => direct.record(rel_err(rho, x, 0.0), || format!(" at {entry}, t = {t}")),
            Err(e) => direct.fail(format!("{entry}, t = {t}: {e}")),
        }
    }
    if let Some(sdp) = sdp {
        for (i, &t) in ts.iter().enumerate().step_by(2) {
            match sdp_min_radius_sq(d, entry, t) {
                Ok(x) => sdp.record((x - closed[i]).abs(), || format!(" at {entry}, t = {t}")),
                Err(e) => sdp.fail(format!("{entry}, t = {t}: {e}")),
            }
        }
    }
    if let Some(co) = &rep.coefficients {
        for (name, got, want, scale) in endpoint_identity_values(p, entry, co) {
            endpoint.record(rel_err(got, want, scale), || format!(" at {entry}: {name}"));
        }
    }
}

fn pinv_identity_check(p: &EdmProfile, tol: &TolerancePolicy) -> CheckResult {
    let run = || -> Result<[f64; 3]> {
        let a = rel_diff(p.bdag_identity()?.as_matrix(), p.b_dag().as_matrix());
        let bp = pinv(&p.b_prime(), tol)?;
        let b = rel_diff(p.bprime_dag_identity()?.as_matrix(), bp.as_matrix());
        let view = cm_build(p.matrix(), tol)?;
        let cm = pinv(view.d_tilde(), tol)?;
        let c = rel_diff(p.cm_dag_block()?.as_matrix(), cm.as_matrix());
        Ok([a, b, c])
    };
    match run() {
        Ok(v) => {
            let worst = v.iter().cloned().fold(0.0, f64::max);
            CheckResult::new(
                "pinv_identities",
                worst <= tolerances::PINV_IDENTITY,
                format!("B† {:.2e}, B'† {:.2e}, D̃† {:.2e}", v[0], v[1], v[2]),
            )
        }
        Err(e) => CheckResult::new("pinv_identities", false, e.to_string()),
    }
}

fn cayley_menger_check(d: &DistanceMatrix, p: &EdmProfile, tol: &TolerancePolicy) -> CheckResult {
    let run = || -> Result<String> {
        let view = cm_build(d, tol)?;
        if !cm_is_edm(&view)? {
            return Ok("bordered matrix is not an EDM".into());
        }
        let n = p.n();
        let mut expected = DVector::from_element(n + 1, -1.0);
        expected.rows_mut(1, n).copy_from(&(2.0 * p.w()));
        let wt_err = (view.w_tilde() - &expected).amax() / expected.amax();
        if wt_err > 1e-8 {
            return Ok(format!("w̃ differs from (-1, 2w) by {wt_err:.3e}"));
        }
        if view.e_tilde_w_tilde().abs() > 1e-8 * n as f64 {
            return Ok(format!("ẽᵀw̃ = {:.3e} is not zero", view.e_tilde_w_tilde()));
        }
        let dim = cm_embedding_dim(&view)?;
        if dim != p.r() {
            return Ok(format!(
                "bordered embedding dimension {dim} differs from r = {}",
                p.r()
            ));
        }
        let g = cm_gale(&view)?;
        let basis = view
            .gale_tilde()
            .ok_or_else(|| Error::NumericalFailure("bordered Gale basis missing".into()))?;
        if basis.ncols() != g.ncols() {
            return Ok(format!(
                "Gale column counts {} vs {}",
                basis.ncols(),
                g.ncols()
            ));
        }
        // Columns of g must lie in the span of the orthonormal basis.
        let resid = &g - basis * (basis.transpose() * &g);
        if resid.amax() > 1e-8 * g.amax().max(1.0) {
            return Ok(format!(
                "Gale columns leave the null space by {:.3e}",
                resid.amax()
            ));
        }
        Ok(String::new())
    };
    match run() {
        Ok(msg) if msg.is_empty() => {
            CheckResult::new("cayley_menger", true, "bordered matrix consistent")
        }
        Ok(msg) => CheckResult::new("cayley_menger", false, msg),
        Err(e) => CheckResult::new("cayley_menger", false, e.to_string()),
    }
}

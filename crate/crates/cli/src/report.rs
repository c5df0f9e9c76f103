//! JSON report documents. Objects serialize with sorted keys.

use edmp_core::cayley_menger::{cm_w_inner, cm_w_inner_direct};
use edmp_core::oracle_gen::{direct_radius_sq, sdp_min_radius_sq};
use edmp_core::perturbation::{analyze_entry, radius_squared, Regime};
use edmp_core::yielding::ParallelRelation;
use edmp_core::{
    classify, EdmProfile, EntryIndex, Error, Interval, PerturbationReport, TeqSet, TolerancePolicy,
};
use serde_json::{json, Value};

pub const SCHEMA_VERSION: &str = "1.0";

/// Interior points of `T≤` used by the cross-check block.
const CROSS_CHECK_SAMPLES: usize = 5;

fn degenerate(err: &Error) -> Value {
    json!({ "degenerate": true, "error": err.name(), "message": err.to_string() })
}

/// A finite number, or a degenerate marker in place of an infinity or NaN.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        degenerate(&Error::NumericalFailure(format!("non-finite value {x}")))
    }
}

fn num_or(x: Result<f64, Error>) -> Value {
    match x {
        Ok(v) => num(v),
        Err(e) => degenerate(&e),
    }
}

fn interval(i: Interval) -> Value {
    json!({ "lo": num(i.lo), "hi": num(i.hi) })
}

fn t_eq(set: TeqSet) -> Value {
    json!({ "kind": set.kind(), "values": set.values().into_iter().map(num).collect::<Vec<_>>() })
}

fn relation(r: ParallelRelation) -> Value {
    match r {
        ParallelRelation::BothZero => json!({ "kind": "both-zero" }),
        ParallelRelation::Scalar(c) => json!({ "kind": "scalar", "c": num(c) }),
        ParallelRelation::NotParallel => json!({ "kind": "not-parallel" }),
    }
}

fn endpoint(x: Option<f64>, what: &'static str) -> Value {
    match x {
        Some(v) => num(v),
        None => degenerate(&Error::DegenerateDenominator { what }),
    }
}

pub fn tolerances(tol: &TolerancePolicy) -> Value {
    json!({
        "rank_rel": tol.rank_rel,
        "psd_abs_scale": tol.psd_abs_scale,
        "recon_rel": tol.recon_rel,
        "parallel_rel": tol.parallel_rel,
    })
}

pub fn profile(p: &EdmProfile) -> Value {
    let n = p.n();
    let gale_cols = p.gale().map_or(0, |z| z.ncols());
    json!({
        "n": n,
        "r": p.r(),
        "rank_d": p.rank_d(),
        "spherical": p.is_spherical(),
        "unit_spherical": p.is_unit_spherical(),
        "radius": p.radius().map_or(Value::Null, num),
        "two_etw": num(2.0 * p.etw()),
        "regular": p.is_regular(),
        "w": p.w().iter().copied().map(num).collect::<Vec<_>>(),
        "gale": { "rows": n, "cols": gale_cols },
        "z_tilde": { "rows": n, "cols": p.z_tilde().ncols() },
        "gram_spectrum": p.b_spectrum().iter().copied().map(num).collect::<Vec<_>>(),
    })
}

pub fn entry(rep: &PerturbationReport) -> Value {
    let (k, l) = rep.entry.one_based();
    let y = &rep.yielding;
    let coefficients = rep.coefficients.as_ref().map_or(Value::Null, |c| {
        json!({
            "alpha1": num(c.alpha1),
            "alpha2": num(c.alpha2),
            "beta1": num(c.beta1),
            "beta2": num(c.beta2),
            "c": num(c.c),
            "w_l": num(c.w_l),
            "theta_lower": num(c.theta_lower),
            "theta_upper": num(c.theta_upper),
            "theta_c": num(c.theta_c),
            "singleton": c.singleton,
        })
    });
    json!({
        "k": k,
        "l": l,
        "yielding": y.yielding,
        "gale_relation": relation(y.gale_relation),
        "theta_lower": endpoint(y.theta_lower, "theta_lower"),
        "theta_upper": endpoint(y.theta_upper, "theta_upper"),
        "theta_c": y.theta_c.map_or(Value::Null, num),
        "yielding_interval": interval(y.interval),
        "t_leq": interval(rep.t_leq),
        "t_eq": t_eq(rep.t_eq),
        "case_tag": rep.case_tag.name(),
        "coefficients": coefficients,
        "warnings": rep.warnings,
    })
}

/// Short per-entry line used by `analyze`.
pub fn entry_summary(p: &EdmProfile, e: EntryIndex) -> Value {
    let (k, l) = e.one_based();
    match classify(p, e) {
        Ok(rep) => json!({
            "k": k,
            "l": l,
            "case_tag": rep.case_tag.name(),
            "yielding_interval": interval(rep.yielding.interval),
            "t_leq": interval(rep.t_leq),
            "t_eq": t_eq(rep.t_eq),
        }),
        Err(err) => json!({ "k": k, "l": l, "error": degenerate(&err) }),
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// `ρ²(t)` through four routes at sample points of `T≤`: the closed form,
/// the bordered matrix, a direct pseudoinverse and the semidefinite bisection.
pub fn cross_check(p: &EdmProfile, rep: &PerturbationReport) -> Result<Value, Error> {
    let e = rep.entry;
    let analysis = analyze_entry(p, e)?;
    let radial = matches!(analysis.regime, Regime::Radial { .. });
    let tl = rep.t_leq;
    let ts: Vec<f64> = if tl.is_point() {
        vec![tl.lo]
    } else {
        (0..CROSS_CHECK_SAMPLES)
            .map(|j| tl.lo + (j as f64 + 0.5) / CROSS_CHECK_SAMPLES as f64 * (tl.hi - tl.lo))
            .collect()
    };
    let mut max_gap = 0.0f64;
    let mut samples = Vec::new();
    for t in ts {
        let closed = radius_squared(p, e, t);
        let bordered = if radial {
            cm_w_inner(p, e, t)
        } else {
            cm_w_inner_direct(p.matrix(), e, t, p.tol())
        }
        .map(|x| 1.0 - 0.5 * x);
        let direct = direct_radius_sq(p.matrix(), e, t, p.tol());
        let sdp = sdp_min_radius_sq(p.matrix(), e, t);
        let routes = [&closed, &bordered, &direct, &sdp];
        for a in routes.iter().filter_map(|r| r.as_ref().ok()) {
            for b in routes.iter().filter_map(|r| r.as_ref().ok()) {
                max_gap = max_gap.max(rel_gap(*a, *b));
            }
        }
        samples.push(json!({
            "t": num(t),
            "closed_form": num_or(closed),
            "bordered": num_or(bordered),
            "direct": num_or(direct),
            "sdp": num_or(sdp),
        }));
    }
    Ok(json!({
        "bordered_route": if radial { "closed-form" } else { "pseudoinverse" },
        "samples": samples,
        "max_rel_discrepancy": num(max_gap),
    }))
}

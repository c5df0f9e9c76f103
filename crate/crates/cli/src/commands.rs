use std::fmt::Write as _;
use std::path::Path;

use edmp_core::oracle_gen::suite::{verify_run, VerifyConfig};
use edmp_core::oracle_gen::{gen_unit_spherical, membership_scan, InstanceSpec, Structure};
use edmp_core::perturbation::radius_squared_extrapolated;
use edmp_core::{classify, EdmProfile, EntryIndex, Error, TolerancePolicy};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::io::{read_matrix, to_csv, to_json, Format};
use crate::report;

fn document(command: &str, tol: &TolerancePolicy, body: Value, warnings: Vec<String>) -> String {
    let mut doc = json!({
        "schema_version": report::SCHEMA_VERSION,
        "command": command,
        "diagnostics": { "tolerances": report::tolerances(tol), "warnings": warnings },
    });
    doc.as_object_mut()
        .expect("object")
        .extend(body.as_object().expect("object").clone());
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

fn load(path: &Path, tol: &TolerancePolicy) -> Result<EdmProfile, CliError> {
    let d = read_matrix(path)?;
    Ok(EdmProfile::new(&d, tol)?)
}

/// Converts a 1-based `(k, l)` with `k < l ≤ n`.
fn entry_index(k: usize, l: usize, n: usize) -> Result<EntryIndex, CliError> {
    if k == 0 || k >= l || l > n {
        return Err(
            Error::InvalidEntry(format!("need 1 ≤ k < l ≤ {n}, got k = {k}, l = {l}")).into(),
        );
    }
    Ok(EntryIndex::from_one_based(k, l)?)
}

pub fn analyze(path: &Path, tol: &TolerancePolicy) -> Result<String, CliError> {
    let p = load(path, tol)?;
    let entries: Vec<Value> = if p.is_unit_spherical() {
        EntryIndex::all(p.n())
            .map(|e| report::entry_summary(&p, e))
            .collect()
    } else {
        Vec::new()
    };
    let body = json!({ "profile": report::profile(&p), "entries": entries });
    Ok(document("analyze", tol, body, Vec::new()))
}

pub fn entry(path: &Path, k: usize, l: usize, tol: &TolerancePolicy) -> Result<String, CliError> {
    let p = load(path, tol)?;
    let e = entry_index(k, l, p.n())?;
    p.require_unit_spherical()?;
    let rep = classify(&p, e)?;
    let body = json!({
        "profile": report::profile(&p),
        "entry": report::entry(&rep),
        "cross_check": report::cross_check(&p, &rep)?,
    });
    Ok(document("entry", tol, body, rep.warnings.clone()))
}

pub const SWEEP_HEADER: &str =
    "t,is_edm,is_spherical,radius_sq_closed_form,radius_sq_oracle,in_t_leq,in_t_eq,closed_form_extrapolated";

/// Sweep over the yielding interval widened by `margin`. The grid has
/// `num` evenly spaced points plus `0`, the ends of `T≤` and the members of
/// `T=` that fall inside it.
pub fn sweep(
    path: &Path,
    k: usize,
    l: usize,
    num: usize,
    margin: f64,
    tol: &TolerancePolicy,
) -> Result<String, CliError> {
    if num < 2 {
        return Err(CliError::Usage(format!(
            "--num must be at least 2, got {num}"
        )));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(CliError::Usage(format!(
            "--margin must be finite and nonnegative, got {margin}"
        )));
    }
    let p = load(path, tol)?;
    let e = entry_index(k, l, p.n())?;
    p.require_unit_spherical()?;
    let rep = classify(&p, e)?;
    let (lo, hi) = (
        rep.yielding.interval.lo - margin,
        rep.yielding.interval.hi + margin,
    );
    let mut ts: Vec<f64> = (0..num)
        .map(|j| lo + (hi - lo) * j as f64 / (num - 1) as f64)
        .collect();
    ts.extend([0.0, rep.t_leq.lo, rep.t_leq.hi]);
    ts.extend(rep.t_eq.values());
    ts.retain(|t| (lo..=hi).contains(t));
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    let records = membership_scan(p.matrix(), e, &ts, tol)?;
    let mut out = String::new();
    let _ = writeln!(out, "{SWEEP_HEADER}");
    for r in records {
        // The closed form is only claimed on T≤; beyond it, extrapolated
        // values are kept while D(t) stays an EDM.
        let (closed, extrapolated) = match radius_squared_extrapolated(&p, e, r.t) {
            Ok((v, outside)) if !outside || rep.yielding.interval.contains(r.t, 0.0) => {
                (format!("{v:.16e}"), outside.to_string())
            }
            _ => (String::new(), String::new()),
        };
        let oracle = r.radius_sq.map(|v| format!("{v:.16e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{:.16e},{},{},{closed},{oracle},{},{},{extrapolated}",
            r.t, r.is_edm, r.is_spherical, r.in_t_leq, r.in_t_eq
        );
    }
    Ok(out)
}

/// Runs the invariant suite; returns the summary and whether it passed.
pub fn verify(config: VerifyConfig) -> Result<(String, bool), CliError> {
    let rep = verify_run(&config).map_err(|e| match e {
        Error::InfeasibleSpec(msg) => CliError::Usage(msg),
        other => other.into(),
    })?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "verify: count={} seed={} nmax={} corrupt={}",
        config.count, config.seed, config.nmax, config.corrupt
    );
    let failed_instances = rep.instances.iter().filter(|i| !i.passed()).count();
    let checks: usize = rep.instances.iter().map(|i| i.checks.len()).sum();
    let failed_checks = rep.failures().count();
    let _ = writeln!(
        out,
        "instances: {} passed, {} failed",
        rep.instances.len() - failed_instances,
        failed_instances
    );
    let _ = writeln!(
        out,
        "checks: {} passed, {} failed",
        checks - failed_checks,
        failed_checks
    );
    let coverage: Vec<String> = edmp_core::CaseTag::ALL
        .iter()
        .map(|t| format!("{} {}", t.name(), rep.coverage.get(t).copied().unwrap_or(0)))
        .collect();
    let _ = writeln!(
        out,
        "coverage: {} ({})",
        coverage.join(", "),
        if !rep.coverage_enforced() {
            "not enforced below 25 instances"
        } else if rep.coverage_ok() {
            "ok"
        } else {
            "insufficient"
        }
    );
    match rep.instances.iter().find(|i| !i.passed()) {
        Some(i) => {
            let s = &i.scheduled.spec;
            let _ = writeln!(
                out,
                "first failing seed: {} (instance {}, n={}, r={}, {})",
                s.seed,
                i.index,
                s.n,
                s.r,
                s.structure.name()
            );
        }
        None => {
            let _ = writeln!(out, "first failing seed: none");
        }
    }
    for (i, c) in rep.failures().take(10) {
        let _ = writeln!(out, "  instance {} {}: {}", i.index, c.name, c.detail);
    }
    let passed = rep.passed();
    let _ = writeln!(out, "result: {}", if passed { "PASS" } else { "FAIL" });
    Ok((out, passed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StructureKind {
    Generic,
    ParallelGale,
    ZeroGale,
    Mirror,
}

pub fn gen(
    n: usize,
    r: usize,
    kind: StructureKind,
    k: usize,
    l: usize,
    seed: u64,
    format: Format,
) -> Result<String, CliError> {
    let infeasible = |e: Error| CliError::Core(Error::InfeasibleSpec(e.to_string()));
    let pick = || -> Result<EntryIndex, CliError> {
        if k == 0 || k >= l || l > n {
            return Err(infeasible(Error::InvalidEntry(format!(
                "need 1 ≤ k < l ≤ {n}, got k = {k}, l = {l}"
            ))));
        }
        EntryIndex::from_one_based(k, l).map_err(infeasible)
    };
    let structure = match kind {
        StructureKind::Generic => Structure::Generic,
        StructureKind::ParallelGale => Structure::ParallelGalePair(pick()?),
        StructureKind::ZeroGale => Structure::ZeroGalePair(pick()?),
        StructureKind::Mirror => Structure::MirrorPair(pick()?),
    };
    let spec = InstanceSpec::new(n, r, structure, seed)?;
    let d = gen_unit_spherical(&spec).map_err(|e| match e {
        Error::InfeasibleSpec(_) => e.into(),
        other => infeasible(other),
    })?;
    let entry = structure.entry().map(|e| {
        let (k, l) = e.one_based();
        format!("({k},{l})")
    });
    Ok(match format {
        Format::Csv => {
            let mut line = format!("edmp gen n={n} r={r} structure={}", structure.name());
            if let Some(e) = &entry {
                let _ = write!(line, " entry={e}");
            }
            let _ = write!(line, " seed={seed}");
            to_csv(&d, &[line])
        }
        Format::Json => {
            let meta = json!({
                "generator": {
                    "n": n,
                    "r": r,
                    "structure": structure.name(),
                    "entry": entry,
                    "seed": seed,
                }
            });
            to_json(&d, meta.as_object().expect("object").clone())
        }
    })
}

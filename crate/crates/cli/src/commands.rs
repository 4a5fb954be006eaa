use crate::report::{Provenance, Report};
use crate::{CheckName, Cli, CliError};
use ruelle_core::convexity::{
    build_counterexample, check_main_inequality, ellipsoid_quantities, sandwich_check, sandwich_ratio,
    ConvexityError, Verdict,
};
use ruelle_core::flows::{
    integrate_cocycle_with, ruelle_estimate_with, sample_point, trace_bound_check, CocycleOptions,
    EstimateOptions, FlowError, ToricField,
};
use ruelle_core::quadrature::QuadratureSpec;
use ruelle_core::toric::{
    enumerate_orbits, is_concave, is_convex, is_strictly_monotone, laplacian_functional,
    ruelle_invariant_toric, systole_concave, volume_toric, MomentRegion, OrbitSearch,
    ToricError, DEFAULT_SHAPE_SAMPLES,
};
use serde_json::json;
use std::path::Path;

fn toric_error(e: ToricError) -> CliError {
    match e {
        ToricError::InvalidRegion(_)
        | ToricError::UnsortedWidths
        | ToricError::OutsideOrthant
        | ToricError::EvaluationAtOrigin
        | ToricError::InvalidVector { .. }
        | ToricError::NotConcave { .. }
        | ToricError::NotStrictlyMonotone { .. } => CliError::Input(e.to_string()),
        other => CliError::Computation(other.to_string()),
    }
}

fn flow_error(e: FlowError) -> CliError {
    match e {
        FlowError::InvalidParameters(_) | FlowError::NotConvexField { .. } | FlowError::NonPositiveEnergy => {
            CliError::Input(e.to_string())
        }
        FlowError::Toric(t) => toric_error(t),
        other => CliError::Computation(other.to_string()),
    }
}

fn convexity_error(e: ConvexityError) -> CliError {
    match e {
        ConvexityError::Toric(t) => toric_error(t),
        ConvexityError::NoFeasibleA { .. } | ConvexityError::ConcavityLost { .. } | ConvexityError::ContainmentCheckFailed => {
            CliError::Computation(e.to_string())
        }
        other => CliError::Input(other.to_string()),
    }
}

/// Reads a region from a file path or inline JSON.
fn parse_region(arg: Option<&str>, flag: &str) -> Result<MomentRegion, CliError> {
    let arg = arg.ok_or_else(|| CliError::Input(format!("--{flag} is required")))?;
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| CliError::Input(format!("cannot read {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("SpecParseError: {e}")))
}

fn spec(cli: &Cli) -> QuadratureSpec {
    QuadratureSpec::with_rel_tol(cli.tol)
}

fn base_config(cli: &Cli, region: &MomentRegion) -> serde_json::Value {
    json!({ "region": region, "tol": cli.tol, "seed": cli.seed })
}

fn with(mut config: serde_json::Value, extra: serde_json::Value) -> serde_json::Value {
    if let (Some(a), Some(b)) = (config.as_object_mut(), extra.as_object()) {
        for (k, v) in b {
            a.insert(k.clone(), v.clone());
        }
    }
    config
}

fn quadrature_or_closed(e: &ruelle_core::Estimate) -> Provenance {
    if e.evaluations == 0 {
        Provenance::ClosedForm
    } else {
        Provenance::Quadrature
    }
}

pub fn toric(cli: &Cli) -> Result<Report, CliError> {
    let region = parse_region(cli.region.as_deref(), "region")?;
    let spec = spec(cli);
    let mut report = Report::new("toric", base_config(cli, &region));
    let ru = ruelle_invariant_toric(&region, &spec).map_err(toric_error)?;
    let vol = volume_toric(&region, &spec).map_err(toric_error)?;
    report.quantity("ru", ru.value, Some(ru.error), Provenance::Quadrature);
    report.quantity("vol", vol.value, Some(vol.error), quadrature_or_closed(&vol));
    match laplacian_functional(&region, &spec) {
        Ok(s) => report.quantity("s", s.value, Some(s.error), Provenance::Quadrature),
        Err(ToricError::NonIntegrableHessian { p }) => {
            report.missing("s", Provenance::Quadrature, format!("Laplacian not integrable for p = {p}"))
        }
        Err(e) => return Err(toric_error(e)),
    }
    let concave = is_concave(&region, DEFAULT_SHAPE_SAMPLES, cli.seed).holds;
    if concave {
        let c = systole_concave(&region).map_err(toric_error)?;
        report.quantity("c", c.value, None, Provenance::CertifiedBound);
        report.artifacts = json!({ "systole_minimizer": c.minimizer, "systole_complete": c.complete });
    } else {
        report.missing("c", Provenance::CertifiedBound, "region is not concave".into());
    }
    report.property("strictly_monotone", is_strictly_monotone(&region, DEFAULT_SHAPE_SAMPLES).monotone, Provenance::Sampled);
    report.property("concave", concave, Provenance::Sampled);
    report.property("convex", is_convex(&region, DEFAULT_SHAPE_SAMPLES, cli.seed).holds, Provenance::Sampled);

    if let Some(widths) = region.ellipsoid_widths() {
        let q = ellipsoid_quantities(widths).map_err(convexity_error)?;
        let ru_closed = q.vol * widths.iter().map(|a| 1.0 / a).sum::<f64>();
        report.quantity("ru_closed_form", ru_closed, None, Provenance::ClosedForm);
        report.quantity("s_closed_form", q.s, None, Provenance::ClosedForm);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        report.assert("ru_matches_closed_form", rel(ru.value, ru_closed) <= 1e-9, format!("{} vs {}", ru.value, ru_closed));
        if let Some(s) = report.quantities.iter().find(|q| q.name == "s").and_then(|q| q.value) {
            report.assert("s_matches_closed_form", rel(s, q.s) <= 1e-9, format!("{s} vs {}", q.s));
        }
    }
    Ok(report)
}

pub fn estimate_flow(cli: &Cli, dump: Option<&Path>) -> Result<Report, CliError> {
    let region = parse_region(cli.region.as_deref(), "region")?;
    let t = cli.t.unwrap_or(200.0);
    let samples = cli.samples.unwrap_or(1000);
    let spec = spec(cli);
    let config = with(base_config(cli, &region), json!({ "T": t, "samples": samples }));
    let mut report = Report::new("estimate-flow", config);
    let field = ToricField::new(region.clone()).map_err(flow_error)?;

    let ru = ruelle_invariant_toric(&region, &spec).map_err(toric_error)?;
    let vol = volume_toric(&region, &spec).map_err(toric_error)?;
    let reference = ru.value / vol.value;
    let reference_error = reference * (ru.error / ru.value + vol.error / vol.value);
    report.quantity("toric_average_density", reference, Some(reference_error), Provenance::Quadrature);

    if let Some(path) = dump {
        let (z, _) = sample_point(&field, cli.seed, 0).map_err(flow_error)?;
        let traj = integrate_cocycle_with(&field, &z, t, &CocycleOptions::default()).map_err(flow_error)?;
        crate::report::write_atomic(path, &traj.to_csv()).map_err(|e| CliError::Input(format!("cannot write dump: {e}")))?;
    }
    if t == 0.0 {
        report.missing("estimate", Provenance::MonteCarlo, "T = 0: diagnostic-only run".into());
        return Ok(report);
    }
    let est = ruelle_estimate_with(&field, &EstimateOptions::new(t, samples, cli.seed)).map_err(flow_error)?;
    report.quantity("estimate", est.estimate, Some(est.stderr), Provenance::MonteCarlo);
    report.quantity("mc_stderr", est.mc_stderr, None, Provenance::MonteCarlo);
    report.quantity("discretization_error", est.discretization_error, None, Provenance::MonteCarlo);
    report.quantity("volume_estimate", est.volume_estimate, None, Provenance::MonteCarlo);
    for (label, d) in ["estimate_t_quarter", "estimate_t_half", "estimate_t_full"].iter().zip(&est.diagnostics) {
        report.quantity(label, d.estimate, Some(d.stderr), Provenance::MonteCarlo);
    }
    let gap = (est.estimate - reference).abs();
    report.assert(
        "agrees_with_toric_within_3_stderr",
        gap <= 3.0 * est.stderr + reference_error,
        format!("|{} - {}| = {gap:.3e}, stderr {:.3e}", est.estimate, reference, est.stderr),
    );
    Ok(report)
}

pub fn counterexample(cli: &Cli, c_target: f64, epsilon: f64) -> Result<Report, CliError> {
    let region = parse_region(cli.region.as_deref(), "region")?;
    let config = with(base_config(cli, &region), json!({ "c_target": c_target, "epsilon": epsilon }));
    let mut report = Report::new("counterexample", config);
    let spec = build_counterexample(&region, c_target, epsilon, &self::spec(cli)).map_err(convexity_error)?;
    let v = &spec.verification;
    if let Some(a) = spec.a {
        report.quantity("a", a, None, Provenance::ClosedForm);
    }
    report.quantity("b", spec.b, None, Provenance::ClosedForm);
    report.quantity("vol_base", v.vol_base.value, Some(v.vol_base.error), quadrature_or_closed(&v.vol_base));
    report.quantity("vol_result", v.vol_result.value, Some(v.vol_result.error), Provenance::Quadrature);
    report.quantity("ru_result", v.ru_result.value, Some(v.ru_result.error), Provenance::Quadrature);
    report.quantity("ru_tail_bound", v.ru_tail_bound, None, Provenance::ClosedForm);
    report.quantity("c_base", v.c_base, None, Provenance::CertifiedBound);
    report.quantity("c_result", v.c_result, None, Provenance::CertifiedBound);
    report.assert("volume_within_epsilon", v.vol_ok, format!("{} ≤ {} ≤ {} + {epsilon}", v.vol_base.value, v.vol_result.value, v.vol_base.value));
    report.assert("ru_at_least_target", v.ru_ok, format!("{} ≥ {c_target}", v.ru_result.value));
    report.assert("ru_above_tail_bound", v.tail_ok, format!("{} ≥ {}", v.ru_result.value, v.ru_tail_bound));
    report.assert("systole_not_decreased", v.c_ok, format!("{} ≥ {}", v.c_result, v.c_base));
    report.assert("contains_base", v.contains_base, String::new());
    report.assert("concave", v.concave, String::new());
    report.artifacts = serde_json::to_value(&spec).map_err(|e| CliError::Computation(e.to_string()))?;
    Ok(report)
}

pub fn check(cli: &Cli, name: CheckName, outer: Option<&str>, l: Option<f64>, t_max: Option<f64>) -> Result<Report, CliError> {
    let region = parse_region(cli.region.as_deref(), "region")?;
    let spec = spec(cli);
    match name {
        CheckName::MainInequality => {
            let mut report = Report::new("check main-inequality", base_config(cli, &region));
            let r = check_main_inequality(&region, &spec).map_err(convexity_error)?;
            report.quantity("ru", r.ru.value, Some(r.ru.error), Provenance::Quadrature);
            report.quantity("c", r.c, None, Provenance::ClosedForm);
            report.quantity("vol", r.vol.value, Some(r.vol.error), quadrature_or_closed(&r.vol));
            report.quantity("log_constant", r.constant.log_value, None, Provenance::ClosedForm);
            report.quantity("log_lhs", r.log_lhs, None, Provenance::Quadrature);
            report.quantity("log_rhs", r.log_rhs, None, Provenance::Quadrature);
            report.quantity("log_margin", r.margin, None, Provenance::Quadrature);
            report.assert("satisfied", r.verdict == Verdict::Satisfied, format!("{:?}", r.verdict));
            Ok(report)
        }
        CheckName::Sandwich => {
            let outer = parse_region(outer, "outer")?;
            let l = match l {
                Some(l) => l,
                None => sandwich_ratio(&region, &outer).map_err(convexity_error)?,
            };
            let config = with(base_config(cli, &region), json!({ "outer": outer, "L": l }));
            let mut report = Report::new("check sandwich", config);
            let r = sandwich_check(&region, &outer, l, &spec).map_err(convexity_error)?;
            report.quantity("s_inner", r.s_inner.value, Some(r.s_inner.error), Provenance::Quadrature);
            report.quantity("s_outer", r.s_outer.value, Some(r.s_outer.error), Provenance::Quadrature);
            report.quantity("observed_ratio", r.observed_ratio, None, Provenance::Sampled);
            report.quantity("log_factor", r.log_factor, None, Provenance::ClosedForm);
            report.quantity("log_margin", r.margin, None, Provenance::Quadrature);
            report.assert("holds", r.holds, format!("log margin {}", r.margin));
            Ok(report)
        }
        CheckName::TraceBound => {
            let t = cli.t.unwrap_or(50.0);
            let samples = cli.samples.unwrap_or(200);
            let config = with(base_config(cli, &region), json!({ "T": t, "samples": samples }));
            let mut report = Report::new("check trace-bound", config);
            let field = ToricField::new(region).map_err(flow_error)?;
            let r = trace_bound_check(&field, t, samples, cli.seed).map_err(flow_error)?;
            report.quantity("ru_average", r.ruelle.estimate, Some(r.ruelle.stderr), Provenance::MonteCarlo);
            report.quantity("trace_bound_average", r.bound, Some(r.bound_stderr), Provenance::MonteCarlo);
            report.assert("holds", r.holds, format!("{} ≤ {}", r.ruelle.estimate, r.bound));
            Ok(report)
        }
        CheckName::DynConvexity => {
            let t_max = t_max.unwrap_or(10.0);
            let config = with(base_config(cli, &region), json!({ "t_max": t_max }));
            let mut report = Report::new("check dyn-convexity", config);
            let orbits = enumerate_orbits(&region, t_max, &OrbitSearch::default()).map_err(toric_error)?;
            let n = region.n() as i64;
            let worst = orbits.iter().map(|o| o.index.lower_bound()).min();
            report.quantity("orbits", orbits.len() as f64, None, Provenance::CertifiedBound);
            if let Some(w) = worst {
                report.quantity("min_index_bound", w as f64, None, Provenance::CertifiedBound);
            }
            let violations = orbits.iter().filter(|o| o.index.lower_bound() < n).count();
            report.assert("all_indices_at_least_n", violations == 0, format!("{violations} orbits below {n}"));
            Ok(report)
        }
    }
}

pub fn orbits(cli: &Cli, t_max: Option<f64>, grid: usize, max_winding: u64) -> Result<Report, CliError> {
    let region = parse_region(cli.region.as_deref(), "region")?;
    let t_max = t_max.unwrap_or(10.0);
    let search = OrbitSearch { grid, max_winding, ..OrbitSearch::default() };
    let config = with(base_config(cli, &region), json!({ "t_max": t_max, "grid": grid, "max_winding": max_winding }));
    let mut report = Report::new("orbits", config);
    let orbits = enumerate_orbits(&region, t_max, &search).map_err(toric_error)?;
    report.quantity("orbits", orbits.len() as f64, None, Provenance::CertifiedBound);
    report.artifacts = json!({ "provenance": "certified-bound", "records": orbits });
    Ok(report)
}

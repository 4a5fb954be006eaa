//! Ellipsoid quantities, the systolic-type inequality `Ru·c ≤ C(n)·vol`, the
//! sandwich estimate for the Laplacian functional and the strain construction
//! of concave domains with large Ruelle invariant.

use crate::flows::{HamiltonianField, ToricField};
use crate::quadrature::{Estimate, QuadratureSpec};
use crate::toric::{
    is_concave, is_convex, laplacian_functional, ruelle_invariant_toric, simplex_lattice,
    systole_concave, volume_toric, MomentRegion, RegionKind, ToricError,
};
use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvexityError {
    #[error("widths must be sorted ascending")]
    UnsortedWidths,
    #[error("widths must be positive and finite")]
    InvalidWidths,
    #[error("region is not a convex toric domain: {0}")]
    NotConvexToric(String),
    #[error("sandwich hypothesis fails at {witness:?} (H/G = {ratio})")]
    SandwichHypothesisFailed { witness: Vec<f64>, ratio: f64 },
    #[error("Hessian eigenvalue {eigenvalue:.3e} < 0 at {witness:?}")]
    NotConvexField { eigenvalue: f64, witness: Vec<f64> },
    #[error("no standard ellipsoid found inside the region")]
    ContainmentCheckFailed,
    #[error("no feasible A: the {binding} constraint needs A ≥ {required:.3e}, above the resolvable {limit:.3e}")]
    NoFeasibleA { binding: String, required: f64, limit: f64 },
    #[error("smoothed union failed the concavity certificate down to collar {collar}")]
    ConcavityLost { collar: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Toric(#[from] ToricError),
}

pub type Result<T> = std::result::Result<T, ConvexityError>;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Systole, Laplacian functional and volume of an ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidQuantities {
    pub c: f64,
    pub s: f64,
    pub vol: f64,
}

pub fn ellipsoid_quantities(widths: &[f64]) -> Result<EllipsoidQuantities> {
    if widths.is_empty() || widths.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(ConvexityError::InvalidWidths);
    }
    if widths.windows(2).any(|w| w[0] > w[1]) {
        return Err(ConvexityError::UnsortedWidths);
    }
    let n = widths.len();
    let prod: f64 = widths.iter().product();
    let inv: f64 = widths.iter().map(|a| 1.0 / a).sum();
    let nf = factorial(n);
    Ok(EllipsoidQuantities { c: widths[0], s: 4.0 * PI / nf * inv * prod, vol: prod / nf })
}

/// `C(n) = 2^{2n+5}·n^{2n+3}·exp(8n⁴)`, kept in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MainConstant {
    pub n: usize,
    pub log_value: f64,
    /// `None` when `C(n)` overflows `f64`.
    pub value: Option<f64>,
}

pub fn main_constant(n: usize) -> MainConstant {
    let nf = n as f64;
    let log_value = (2.0 * nf + 5.0) * LN_2 + (2.0 * nf + 3.0) * nf.ln() + 8.0 * nf.powi(4);
    let value = Some(log_value.exp()).filter(|v| v.is_finite());
    MainConstant { n, log_value, value }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Satisfied,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub n: usize,
    pub ru: Estimate,
    pub c: f64,
    pub vol: Estimate,
    pub constant: MainConstant,
    pub lhs: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
    /// `log rhs - log lhs`.
    pub margin: f64,
    pub verdict: Verdict,
}

/// Axis widths `1/f_Ω(e_j)`.
fn axis_widths(region: &MomentRegion) -> Result<Vec<f64>> {
    let n = region.n();
    (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            Ok(region.radius(&e)?)
        })
        .collect()
}

fn require_convex_family(region: &MomentRegion) -> Result<()> {
    match region.kind() {
        RegionKind::Ellipsoid { .. } => Ok(()),
        RegionKind::PFamily { p, .. } if *p >= 1.0 => Ok(()),
        RegionKind::PFamily { p, .. } => Err(ConvexityError::NotConvexToric(format!("p = {p} < 1"))),
        _ => Err(ConvexityError::NotConvexToric("only ellipsoids and p ≥ 1 families are supported".into())),
    }
}

/// Compares `log(Ru·c)` with `log C(n) + log vol` for a convex toric region.
///
/// The systole is the smallest axis width, which is the minimal action for
/// the ellipsoid and `p ≥ 1` families.
pub fn check_main_inequality(region: &MomentRegion, spec: &QuadratureSpec) -> Result<InequalityReport> {
    require_convex_family(region)?;
    let n = region.n();
    let ru = ruelle_invariant_toric(region, spec)?;
    let vol = volume_toric(region, spec)?;
    let c = axis_widths(region)?.into_iter().fold(f64::INFINITY, f64::min);
    let constant = main_constant(n);
    let lhs = ru.value * c;
    let log_lhs = lhs.ln();
    let log_rhs = constant.log_value + vol.value.ln();
    let margin = log_rhs - log_lhs;
    let verdict = if margin >= 0.0 { Verdict::Satisfied } else { Verdict::Violated };
    Ok(InequalityReport { n, ru, c, vol, constant, lhs, log_lhs, log_rhs, margin, verdict })
}

fn grid_resolution(n: usize) -> usize {
    match n {
        1 => 1,
        2 => 400,
        3 => 40,
        _ => 14,
    }
}

fn interior_samples(n: usize) -> Vec<Vec<f64>> {
    simplex_lattice(n, grid_resolution(n), n > 1)
}

fn boundary_grid(n: usize) -> Vec<Vec<f64>> {
    simplex_lattice(n, grid_resolution(n), false)
}

fn check_hessian_psd(region: &MomentRegion) -> Result<()> {
    let field = ToricField::new(region.clone()).map_err(|e| match e {
        crate::flows::FlowError::Toric(t) => ConvexityError::Toric(t),
        other => ConvexityError::InvalidParameters(other.to_string()),
    })?;
    let n = region.n();
    for u in interior_samples(n) {
        let mut z = vec![0.0; 2 * n];
        for j in 0..n {
            z[j] = (u[j] / PI).sqrt();
        }
        let eig = SymmetricEigen::new(field.hessian(&z)).eigenvalues;
        let min = eig.min();
        if min < -1e-8 * eig.amax().max(1.0) {
            return Err(ConvexityError::NotConvexField { eigenvalue: min, witness: u });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub n: usize,
    pub l: f64,
    /// Largest sampled `H/G`, which is at most `L`.
    pub observed_ratio: f64,
    pub s_inner: Estimate,
    pub s_outer: Estimate,
    /// `log C(L, 2n) = L·(2n)²/2`.
    pub log_factor: f64,
    /// `log S(G) + log C(L, 2n) - log S(H)`.
    pub margin: f64,
    pub holds: bool,
}

/// Largest sampled `f_inner/f_outer`, i.e. the least `L` with `H ≤ L·G`.
pub fn sandwich_ratio(inner: &MomentRegion, outer: &MomentRegion) -> Result<f64> {
    let n = inner.n();
    let mut worst = 0.0f64;
    for u in boundary_grid(n) {
        worst = worst.max(inner.value(&u)? / outer.value(&u)?);
    }
    Ok(worst)
}

/// Checks `S(H) ≤ exp(L·d²/2)·S(G)` for `H = H_inner`, `G = H_outer`, `d = 2n`.
pub fn sandwich_check(inner: &MomentRegion, outer: &MomentRegion, l: f64, spec: &QuadratureSpec) -> Result<SandwichReport> {
    let n = inner.n();
    if outer.n() != n || !(l >= 1.0) {
        return Err(ConvexityError::InvalidParameters(format!("n = {n}/{}, L = {l}", outer.n())));
    }
    let mut observed = 0.0f64;
    for u in boundary_grid(n) {
        let ratio = inner.value(&u)? / outer.value(&u)?;
        observed = observed.max(ratio);
        if ratio < 1.0 - 1e-9 || ratio > l * (1.0 + 1e-9) {
            return Err(ConvexityError::SandwichHypothesisFailed { witness: u, ratio });
        }
    }
    check_hessian_psd(inner)?;
    check_hessian_psd(outer)?;
    let s_inner = laplacian_functional(inner, spec)?;
    let s_outer = laplacian_functional(outer, spec)?;
    let d = 2.0 * n as f64;
    let log_factor = 0.5 * l * d * d;
    let margin = s_outer.value.ln() + log_factor - s_inner.value.ln();
    Ok(SandwichReport { n, l, observed_ratio: observed, s_inner, s_outer, log_factor, margin, holds: margin >= 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InscribedEllipsoid {
    pub widths: Vec<f64>,
    /// Least `s` with `Ω ⊆ s·E` on the sample grid.
    pub factor: f64,
}

/// Coordinate search for the largest-volume standard ellipsoid inside a convex toric region.
pub fn inscribed_ellipsoid(region: &MomentRegion) -> Result<InscribedEllipsoid> {
    let report = is_convex(region, 2000, 0);
    if !report.holds {
        return Err(ConvexityError::NotConvexToric(format!("convexity fails at {:?}", report.witness)));
    }
    let n = region.n();
    let grid: Vec<(Vec<f64>, f64)> = boundary_grid(n)
        .into_iter()
        .map(|u| {
            let f = region.value(&u)?;
            Ok((u, f))
        })
        .collect::<Result<_>>()?;
    // E(a) ⊆ Ω iff f_Ω(u) ≤ Σ u_j/a_j along every ray.
    let contained = |a: &[f64]| grid.iter().all(|(u, f)| *f <= u.iter().zip(a).map(|(u, a)| u / a).sum::<f64>() * (1.0 + 1e-12));
    let axes = axis_widths(region)?;
    let mut a: Vec<f64> = axes.iter().map(|w| w / n as f64).collect();
    if !contained(&a) {
        return Err(ConvexityError::ContainmentCheckFailed);
    }
    let mut step = 0.5;
    while step > 1e-12 {
        let mut improved = false;
        for j in 0..n {
            let mut trial = a.clone();
            trial[j] *= 1.0 + step;
            if contained(&trial) {
                a = trial;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let factor = grid
        .iter()
        .map(|(u, f)| u.iter().zip(&a).map(|(u, a)| u / a).sum::<f64>() / f)
        .fold(0.0, f64::max);
    Ok(InscribedEllipsoid { widths: a, factor })
}

/// Largest `A^n` for which the strained region is still resolved by the quadrature.
const MAX_STRAIN: f64 = 1e12;
const DEFAULT_COLLAR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleVerification {
    pub vol_base: Estimate,
    pub vol_result: Estimate,
    pub vol_ok: bool,
    pub ru_result: Estimate,
    pub ru_ok: bool,
    /// `(A⁻¹/n! - A⁻ⁿB^{n-1})(Aⁿ + (n-1)A⁻¹)`.
    pub ru_tail_bound: f64,
    pub tail_ok: bool,
    pub c_base: f64,
    pub c_result: f64,
    pub c_ok: bool,
    pub c_complete: bool,
    pub contains_base: bool,
    pub concave: bool,
}

impl CounterexampleVerification {
    pub fn passed(&self) -> bool {
        self.vol_ok && self.ru_ok && self.tail_ok && self.c_ok && self.contains_base && self.concave
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    pub base: MomentRegion,
    pub c_target: f64,
    pub epsilon: f64,
    /// `None` when the base already has `Ru ≥ C` and is returned unchanged.
    pub a: Option<f64>,
    pub b: f64,
    pub collar: Option<f64>,
    pub result: MomentRegion,
    pub verification: CounterexampleVerification,
}

/// Least `A` in `[1, limit]` with `ok(A)`, for `ok` monotone in `A`.
fn least_feasible(ok: impl Fn(f64) -> bool, limit: f64) -> Option<f64> {
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 2.0 * limit {
            return None;
        }
    }
    let mut lo = hi / 2.0;
    if ok(lo) {
        return Some(lo);
    }
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

fn tail_bound(n: usize, a: f64, b: f64) -> f64 {
    let nf = n as f64;
    (1.0 / (factorial(n) * a) - a.powf(-nf) * b.powf(nf - 1.0)) * (a.powf(nf) + (nf - 1.0) / a)
}

/// Strains a concave base region by a flat ellipsoid so that `Ru ≥ C` while the
/// volume grows by at most `ε` and the systole does not drop.
pub fn build_counterexample(base: &MomentRegion, c_target: f64, epsilon: f64, spec: &QuadratureSpec) -> Result<CounterexampleSpec> {
    if !(c_target >= 0.0 && c_target.is_finite()) || !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ConvexityError::InvalidParameters(format!("C = {c_target}, ε = {epsilon}")));
    }
    let n = base.n();
    if n < 2 {
        return Err(ConvexityError::InvalidParameters("the strain needs n ≥ 2".into()));
    }
    let cert = is_concave(base, 2000, 0);
    if !cert.holds {
        return Err(ToricError::NotConcave { witness: cert.witness.unwrap_or_default() }.into());
    }
    let nf = n as f64;
    let vol_base = volume_toric(base, spec)?;
    let ru_base = ruelle_invariant_toric(base, spec)?;

    let mut spread = 0.0f64;
    for u in boundary_grid(n) {
        let x = base.boundary_point(&u)?;
        spread = spread.max(x[1..].iter().sum());
    }
    let b = 2f64.powi((spread.log2() - 1e-12).ceil() as i32);

    if ru_base.value >= c_target {
        let verification = verify(base, base, &vol_base, epsilon, c_target, 0.0, spec)?;
        return Ok(CounterexampleSpec {
            base: base.clone(),
            c_target,
            epsilon,
            a: None,
            b,
            collar: None,
            result: base.clone(),
            verification,
        });
    }

    let limit = MAX_STRAIN.powf(1.0 / nf);
    let v = vol_base.value;
    let a_ru = least_feasible(|a| tail_bound(n, a, b) >= c_target, limit);
    let a_vol = least_feasible(|a| (1.0 + 1.0 / a).powf(nf) * (v + 1.0 / (factorial(n) * a)) <= v + epsilon, limit);
    let (a_ru, a_vol) = match (a_ru, a_vol) {
        (Some(r), Some(w)) if r.max(w) <= limit => (r, w),
        (r, _) if r.is_none_or(|r| r > limit) => {
            return Err(ConvexityError::NoFeasibleA { binding: "ruelle".into(), required: r.unwrap_or(f64::INFINITY), limit })
        }
        (_, w) => {
            return Err(ConvexityError::NoFeasibleA { binding: "volume".into(), required: w.unwrap_or(f64::INFINITY), limit })
        }
    };
    let a = a_ru.max(a_vol);
    let mut widths = vec![a; n];
    widths[0] = a.powf(-nf);
    // The p = 1 family is the ellipsoid without the ordering requirement.
    let delta = MomentRegion::pfamily(widths, 1.0)?;

    // Keep the smoothing inside (1 + 1/A)·(Ω ∪ Δ): the blend lowers f by at most e^{3δ/16}.
    let mut collar = DEFAULT_COLLAR.min(0.99 * 16.0 / 3.0 * (1.0 / a).ln_1p());
    for _ in 0..4 {
        let result = MomentRegion::smoothed_union(base.clone(), delta.clone(), collar)?;
        if is_concave(&result, 2000, 0).holds {
            let verification = verify(base, &result, &vol_base, epsilon, c_target, tail_bound(n, a, b), spec)?;
            return Ok(CounterexampleSpec {
                base: base.clone(),
                c_target,
                epsilon,
                a: Some(a),
                b,
                collar: Some(collar),
                result,
                verification,
            });
        }
        collar *= 0.5;
    }
    Err(ConvexityError::ConcavityLost { collar })
}

fn verify(
    base: &MomentRegion,
    result: &MomentRegion,
    vol_base: &Estimate,
    epsilon: f64,
    c_target: f64,
    ru_tail_bound: f64,
    spec: &QuadratureSpec,
) -> Result<CounterexampleVerification> {
    let n = base.n();
    let vol_result = volume_toric(result, spec)?;
    let ru_result = ruelle_invariant_toric(result, spec)?;
    let slack = 1e-3 * vol_base.value;
    let vol_ok = vol_result.value >= vol_base.value - slack && vol_result.value <= vol_base.value + epsilon + slack;
    let ru_ok = ru_result.value >= c_target;
    let tail_ok = ru_result.value + ru_result.error >= ru_tail_bound;
    let mut contains_base = true;
    for u in boundary_grid(n) {
        if result.value(&u)? > base.value(&u)? * (1.0 + 1e-12) {
            contains_base = false;
            break;
        }
    }
    let concave = is_concave(result, 2000, 0).holds;
    let c_base = systole_concave(base)?;
    let c_result = systole_concave(result)?;
    Ok(CounterexampleVerification {
        vol_base: *vol_base,
        vol_result,
        vol_ok,
        ru_result,
        ru_ok,
        ru_tail_bound,
        tail_ok,
        c_base: c_base.value,
        c_result: c_result.value,
        c_ok: c_result.value >= c_base.value * (1.0 - 1e-9),
        c_complete: c_base.complete && c_result.complete,
        contains_base,
        concave,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsoid_closed_forms() {
        let q = ellipsoid_quantities(&[1.0, 2.0]).unwrap();
        assert_eq!((q.c, q.vol), (1.0, 1.0));
        assert!((q.s - 6.0 * PI).abs() < 1e-12);
        let q = ellipsoid_quantities(&[2.0]).unwrap();
        assert_eq!((q.c, q.vol), (2.0, 2.0));
        assert!((q.s - 4.0 * PI).abs() < 1e-12);
        let q = ellipsoid_quantities(&[1.0, 1.0, 1.0]).unwrap();
        assert!((q.s - 4.0 * PI * 3.0 / 6.0).abs() < 1e-12);
        assert_eq!(ellipsoid_quantities(&[2.0, 1.0]), Err(ConvexityError::UnsortedWidths));
    }

    #[test]
    fn constant_in_log_space() {
        let c1 = main_constant(1);
        assert!((c1.log_value - (7.0 * LN_2 + 8.0)).abs() < 1e-12);
        assert!((c1.value.unwrap() - 128.0 * 8f64.exp()).abs() < 1e-6);
        assert!((main_constant(2).log_value - (16.0 * LN_2 + 128.0)).abs() < 1e-10);
        assert!((main_constant(3).log_value - (11.0 * LN_2 + 9.0 * 3f64.ln() + 648.0)).abs() < 1e-9);
        assert!(main_constant(4).value.is_none());
    }

    #[test]
    fn main_inequality_for_ellipsoid() {
        let e = MomentRegion::ellipsoid(vec![1.0, 2.0]).unwrap();
        let r = check_main_inequality(&e, &QuadratureSpec::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Satisfied);
        assert!((r.lhs - 1.5).abs() < 1e-9);
        assert!((r.log_rhs - (16.0 * LN_2 + 128.0)).abs() < 1e-9);
        let concave = MomentRegion::pfamily(vec![1.0, 1.0], 0.5).unwrap();
        assert!(check_main_inequality(&concave, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn sandwich_for_nested_round_ellipsoids() {
        let h = MomentRegion::ellipsoid(vec![1.0, 1.0]).unwrap();
        let g = MomentRegion::ellipsoid(vec![2.0, 2.0]).unwrap();
        let r = sandwich_check(&h, &g, 2.0, &QuadratureSpec::default()).unwrap();
        assert!(r.holds);
        assert!((r.s_inner.value - 4.0 * PI).abs() < 1e-8);
        assert!((r.s_outer.value - 8.0 * PI).abs() < 1e-8);
        assert!((r.log_factor - 16.0).abs() < 1e-12);
        assert!(matches!(
            sandwich_check(&h, &g, 1.5, &QuadratureSpec::default()),
            Err(ConvexityError::SandwichHypothesisFailed { .. })
        ));
        assert!((sandwich_ratio(&h, &g).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inscribed_ellipsoids() {
        let e = MomentRegion::ellipsoid(vec![1.0, 2.0]).unwrap();
        let r = inscribed_ellipsoid(&e).unwrap();
        assert!((r.widths[0] - 1.0).abs() < 1e-9 && (r.widths[1] - 2.0).abs() < 1e-9);
        assert!((r.factor - 1.0).abs() < 1e-9);
        let p = MomentRegion::pfamily(vec![1.0, 4.0], 3.0).unwrap();
        assert!(inscribed_ellipsoid(&p).unwrap().factor <= 4.0);
    }

    #[test]
    fn infeasible_strain() {
        let base = MomentRegion::ellipsoid(vec![1.0, 1.0]).unwrap();
        let err = build_counterexample(&base, 1e6, 1e-12, &QuadratureSpec::default()).unwrap_err();
        assert!(matches!(err, ConvexityError::NoFeasibleA { .. }), "{err:?}");
    }

    #[test]
    fn trivial_strain_returns_base() {
        let base = MomentRegion::ellipsoid(vec![1.0, 1.0]).unwrap();
        let spec = build_counterexample(&base, 0.0, 0.1, &QuadratureSpec::default()).unwrap();
        assert_eq!(spec.result, base);
        assert!(spec.a.is_none());
        assert!(spec.verification.passed());
    }
}

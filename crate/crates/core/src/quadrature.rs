//! Adaptive Gauss-Kronrod quadrature on intervals and standard simplices.
//!
//! Simplex integrals use nested one-dimensional rules on the collapsed cube
//! (Duffy map), with the substitution `s = (1 - cos πt)/2` in every variable to
//! cluster nodes near faces, where integrands of moment regions tend to be
//! singular.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("quadrature did not converge: value {value:e}, error estimate {error:e} after {subdivisions} subdivisions")]
    NotConverged { value: f64, error: f64, subdivisions: usize },
    #[error("integrand is not finite at {point:?}")]
    NonFinite { point: Vec<f64> },
}

/// Tolerances and refinement limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Number of equal cells each variable starts with.
    pub base_cells: usize,
    /// Bisections allowed per one-dimensional integral.
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-14, base_cells: 4, max_subdivisions: 4000 }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }

    /// The same rule started from twice as many base cells.
    pub fn doubled(&self) -> Self {
        Self { base_cells: 2 * self.base_cells, ..*self }
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

struct Cell {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then(other.a.total_cmp(&self.a))
    }
}

/// One G7-K15 panel. `f` returns a value and the error already carried by that value.
fn gk15<F: FnMut(f64) -> (f64, f64)>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut fv = [0.0; 15];
    let mut inner = 0.0;
    for (i, x) in XGK.iter().enumerate() {
        if i == 7 {
            let (v, e) = f(c);
            fv[7] = v;
            inner += WGK[7] * e;
        } else {
            let (v1, e1) = f(c - h * x);
            let (v2, e2) = f(c + h * x);
            fv[i] = v1;
            fv[14 - i] = v2;
            inner += WGK[i] * (e1 + e2);
        }
    }
    let mut kronrod = WGK[7] * fv[7];
    let mut gauss = WG[3] * fv[7];
    for i in 0..7 {
        kronrod += WGK[i] * (fv[i] + fv[14 - i]);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (fv[i] + fv[14 - i]);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fv[7] - mean).abs();
    for i in 0..7 {
        asc += WGK[i] * ((fv[i] - mean).abs() + (fv[14 - i] - mean).abs());
    }
    let asc = asc * h.abs();
    let diff = ((kronrod - gauss) * h).abs();
    let mut err = diff;
    if asc != 0.0 && diff != 0.0 {
        err = asc * (200.0 * diff / asc).powf(1.5).min(1.0);
    }
    (kronrod * h, err + inner * h.abs())
}

/// Globally adaptive integral of `f` over `[a, b]`; returns the estimate and whether it converged.
fn adaptive<F: FnMut(f64) -> (f64, f64)>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> (Estimate, bool, usize) {
    let cells = spec.base_cells.max(1);
    let mut heap = BinaryHeap::with_capacity(cells + spec.max_subdivisions);
    let mut evaluations = 0;
    for k in 0..cells {
        let lo = a + (b - a) * k as f64 / cells as f64;
        let hi = a + (b - a) * (k + 1) as f64 / cells as f64;
        let (value, error) = gk15(&mut f, lo, hi);
        evaluations += 15;
        heap.push(Cell { a: lo, b: hi, value, error });
    }
    let mut subdivisions = 0;
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), c| (v + c.value, e + c.error));
        let target = spec.abs_tol.max(spec.rel_tol * value.abs());
        if error <= target {
            return (Estimate { value, error, evaluations }, true, subdivisions);
        }
        if subdivisions >= spec.max_subdivisions {
            return (Estimate { value, error, evaluations }, false, subdivisions);
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            let (value, error) =
                heap.iter().fold((0.0, 0.0), |(v, e), c| (v + c.value, e + c.error));
            return (Estimate { value, error, evaluations }, false, subdivisions);
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(&mut f, lo, hi);
            heap.push(Cell { a: lo, b: hi, value, error });
        }
        evaluations += 30;
        subdivisions += 1;
    }
}

/// Adaptive integral of a scalar function over `[a, b]`.
pub fn integrate_interval(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate, QuadratureError> {
    let mut bad: Option<f64> = None;
    let (est, ok, subdivisions) = adaptive(
        |x| {
            let v = f(x);
            if !v.is_finite() {
                bad.get_or_insert(x);
                return (0.0, 0.0);
            }
            (v, 0.0)
        },
        a,
        b,
        spec,
    );
    if let Some(x) = bad {
        return Err(QuadratureError::NonFinite { point: vec![x] });
    }
    if !ok {
        return Err(QuadratureError::NotConverged { value: est.value, error: est.error, subdivisions });
    }
    Ok(est)
}

/// `s = (1 - cos πt)/2` and its derivative.
/// `s = sin²(πt/2)` with its complement `1 - s` and derivative, each accurate near both ends.
fn cosine_map(t: f64) -> (f64, f64, f64) {
    let (sin, cos) = (0.5 * PI * t).sin_cos();
    (sin * sin, cos * cos, PI * sin * cos)
}

/// Integral over the standard simplex `{u ∈ [0,1]^n : Σu = 1}` with respect to
/// Lebesgue measure in the first `n - 1` coordinates.
///
/// For `n = 1` the simplex is a point and the result is `f([1])`.
pub fn integrate_simplex(
    n: usize,
    f: &dyn Fn(&[f64]) -> f64,
    spec: &QuadratureSpec,
) -> Result<Estimate, QuadratureError> {
    assert!(n >= 1, "simplex dimension must be positive");
    if n == 1 {
        let v = f(&[1.0]);
        if !v.is_finite() {
            return Err(QuadratureError::NonFinite { point: vec![1.0] });
        }
        return Ok(Estimate { value: v, error: 0.0, evaluations: 1 });
    }
    let mut state = SimplexState { n, u: vec![0.0; n], bad: None, evaluations: 0, worst: None };
    let (est, ok, subdivisions) = level(&mut state, f, 0, 1.0, spec);
    if let Some(point) = state.bad {
        return Err(QuadratureError::NonFinite { point });
    }
    if !ok {
        return Err(QuadratureError::NotConverged { value: est.value, error: est.error, subdivisions });
    }
    if let Some((value, error, subdivisions)) = state.worst {
        // An inner integral ran out of refinement; only accept if the total error still fits.
        let target = spec.abs_tol.max(spec.rel_tol * est.value.abs());
        if est.error > target {
            return Err(QuadratureError::NotConverged { value, error, subdivisions });
        }
    }
    Ok(Estimate { evaluations: state.evaluations, ..est })
}

struct SimplexState {
    n: usize,
    u: Vec<f64>,
    bad: Option<Vec<f64>>,
    evaluations: usize,
    worst: Option<(f64, f64, usize)>,
}

/// Integrates over `s_level ∈ [0,1]` with `remaining = Π_{i<level} (1 - s_i)`.
fn level(
    state: &mut SimplexState,
    f: &dyn Fn(&[f64]) -> f64,
    depth: usize,
    remaining: f64,
    spec: &QuadratureSpec,
) -> (Estimate, bool, usize) {
    let d = state.n - 1;
    let inner_spec = QuadratureSpec { rel_tol: 0.1 * spec.rel_tol, abs_tol: 0.1 * spec.abs_tol, ..*spec };
    adaptive(
        |t| {
            let (s, s_rest, ds) = cosine_map(t);
            // Duffy Jacobian factor for this variable: (1 - s)^{d - 1 - depth}.
            let jac = ds * s_rest.powi((d - 1 - depth) as i32);
            state.u[depth] = remaining * s;
            let rest = remaining * s_rest;
            if depth + 1 == d {
                state.u[d] = rest;
                state.evaluations += 1;
                let v = f(&state.u);
                if !v.is_finite() {
                    state.bad.get_or_insert_with(|| state.u.clone());
                    return (0.0, 0.0);
                }
                (v * jac, 0.0)
            } else {
                let (inner, ok, subs) = level(state, f, depth + 1, rest, &inner_spec);
                if !ok && state.worst.is_none() {
                    state.worst = Some((inner.value, inner.error, subs));
                }
                (inner.value * jac, inner.error * jac.abs())
            }
        },
        0.0,
        1.0,
        spec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_polynomial_is_exact() {
        let e = integrate_interval(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, &QuadratureSpec::default()).unwrap();
        assert!((e.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn interval_endpoint_singularity() {
        let e = integrate_interval(|x| 1.0 / x.sqrt(), 0.0, 1.0, &QuadratureSpec::with_rel_tol(1e-9)).unwrap();
        assert!((e.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn simplex_volumes() {
        let spec = QuadratureSpec::default();
        for (n, vol) in [(2, 1.0), (3, 0.5), (4, 1.0 / 6.0)] {
            let e = integrate_simplex(n, &|_| 1.0, &spec).unwrap();
            assert!((e.value - vol).abs() < 1e-12, "n = {n}: {}", e.value);
        }
    }

    #[test]
    fn simplex_monomial() {
        // ∫ u1 u2 u3 over the 2-simplex is 1/5! = 1/120.
        let e = integrate_simplex(3, &|u| u[0] * u[1] * u[2], &QuadratureSpec::default()).unwrap();
        assert!((e.value - 1.0 / 120.0).abs() < 1e-14);
        // ∫ u1^{-1/2} over the 1-simplex is 2.
        let e = integrate_simplex(2, &|u| u[0].powf(-0.5), &QuadratureSpec::with_rel_tol(1e-10)).unwrap();
        assert!((e.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn non_finite_is_reported() {
        let r = integrate_simplex(2, &|u| if u[0] > 0.5 { f64::NAN } else { 1.0 }, &QuadratureSpec::default());
        assert!(matches!(r, Err(QuadratureError::NonFinite { .. })));
    }

    #[test]
    fn exhausted_budget_fails() {
        let spec = QuadratureSpec { max_subdivisions: 2, rel_tol: 1e-14, ..Default::default() };
        let r = integrate_interval(|x| (50.0 * x).sin().abs(), 0.0, 1.0, &spec);
        assert!(matches!(r, Err(QuadratureError::NotConverged { .. })));
    }
}

use super::{Result, ToricError};
use serde::{Deserialize, Serialize};

/// A star-shaped moment region `Ω ⊂ [0, ∞)^n`, described through its canonical function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionSpec", into = "RegionSpec")]
pub struct MomentRegion {
    n: usize,
    kind: RegionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionKind {
    /// `Σ x_i/a_i ≤ 1` with ascending widths.
    Ellipsoid { widths: Vec<f64> },
    /// `Σ (x_i/a_i)^p ≤ 1`.
    PFamily { widths: Vec<f64>, p: f64 },
    /// Boundary `R(u)·u` over the simplex direction `u = (u_1, 1 - u_1)`; two dimensions only.
    RadialProfile(RadialProfile),
    /// Upward C² blend of two regions; `collar` is the blend width in log-profile units.
    SmoothedUnion { left: Box<MomentRegion>, right: Box<MomentRegion>, collar: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RegionSpec {
    Ellipsoid { n: usize, widths: Vec<f64> },
    Pfamily { n: usize, widths: Vec<f64>, p: f64 },
    RadialProfile { n: usize, grid: Vec<f64>, values: Vec<f64> },
    SmoothedUnion { n: usize, left: Box<MomentRegion>, right: Box<MomentRegion>, collar: f64 },
}

impl TryFrom<RegionSpec> for MomentRegion {
    type Error = ToricError;

    fn try_from(spec: RegionSpec) -> Result<Self> {
        let (declared, region) = match spec {
            RegionSpec::Ellipsoid { n, widths } => (n, MomentRegion::ellipsoid(widths)?),
            RegionSpec::Pfamily { n, widths, p } => (n, MomentRegion::pfamily(widths, p)?),
            RegionSpec::RadialProfile { n, grid, values } => {
                (n, MomentRegion::radial_profile(grid, values)?)
            }
            RegionSpec::SmoothedUnion { n, left, right, collar } => {
                (n, MomentRegion::smoothed_union(*left, *right, collar)?)
            }
        };
        if declared != region.n {
            return Err(ToricError::InvalidRegion(format!(
                "declared n = {declared} but the data has dimension {}",
                region.n
            )));
        }
        Ok(region)
    }
}

impl From<MomentRegion> for RegionSpec {
    fn from(r: MomentRegion) -> Self {
        let n = r.n;
        match r.kind {
            RegionKind::Ellipsoid { widths } => RegionSpec::Ellipsoid { n, widths },
            RegionKind::PFamily { widths, p } => RegionSpec::Pfamily { n, widths, p },
            RegionKind::RadialProfile(rp) => {
                RegionSpec::RadialProfile { n, grid: rp.grid, values: rp.values }
            }
            RegionKind::SmoothedUnion { left, right, collar } => {
                RegionSpec::SmoothedUnion { n, left, right, collar }
            }
        }
    }
}

fn check_widths(widths: &[f64]) -> Result<()> {
    if widths.is_empty() {
        return Err(ToricError::InvalidRegion("no widths given".into()));
    }
    if let Some(w) = widths.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(ToricError::InvalidRegion(format!("width {w} is not positive and finite")));
    }
    Ok(())
}

impl MomentRegion {
    pub fn ellipsoid(widths: Vec<f64>) -> Result<Self> {
        check_widths(&widths)?;
        if widths.windows(2).any(|w| w[1] < w[0]) {
            return Err(ToricError::UnsortedWidths);
        }
        Ok(Self { n: widths.len(), kind: RegionKind::Ellipsoid { widths } })
    }

    pub fn pfamily(widths: Vec<f64>, p: f64) -> Result<Self> {
        check_widths(&widths)?;
        if !(p.is_finite() && p > 0.0) {
            return Err(ToricError::InvalidRegion(format!("exponent p = {p} must be positive")));
        }
        Ok(Self { n: widths.len(), kind: RegionKind::PFamily { widths, p } })
    }

    pub fn radial_profile(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Self { n: 2, kind: RegionKind::RadialProfile(RadialProfile::new(grid, values)?) })
    }

    pub fn smoothed_union(left: MomentRegion, right: MomentRegion, collar: f64) -> Result<Self> {
        if left.n != right.n {
            return Err(ToricError::InvalidRegion("union of regions of different dimension".into()));
        }
        if !(collar.is_finite() && collar > 0.0) {
            return Err(ToricError::InvalidRegion(format!("collar {collar} must be positive")));
        }
        Ok(Self {
            n: left.n,
            kind: RegionKind::SmoothedUnion { left: Box::new(left), right: Box::new(right), collar },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &RegionKind {
        &self.kind
    }

    /// Widths when the region is an ellipsoid, including a `p = 1` family member.
    pub fn ellipsoid_widths(&self) -> Option<&[f64]> {
        match &self.kind {
            RegionKind::Ellipsoid { widths } => Some(widths),
            RegionKind::PFamily { widths, p } if *p == 1.0 => Some(widths),
            _ => None,
        }
    }

    /// Largest coordinate extent along the axes.
    pub fn max_axis_width(&self) -> Result<f64> {
        let mut best: f64 = 0.0;
        for j in 0..self.n {
            let mut e = vec![0.0; self.n];
            e[j] = 1.0;
            best = best.max(1.0 / self.value(&e)?);
        }
        Ok(best)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet(x, 0)?.value)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jet(x, 1)?.gradient)
    }

    /// Row-major `n×n` Hessian.
    pub fn hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jet(x, 2)?.hessian)
    }

    /// Value and derivatives of the canonical function up to `order` (0, 1 or 2).
    pub fn jet(&self, x: &[f64], order: u8) -> Result<Jet> {
        if x.len() != self.n {
            return Err(ToricError::InvalidRegion(format!(
                "point has {} coordinates, region has {}",
                x.len(),
                self.n
            )));
        }
        if x.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(ToricError::OutsideOrthant);
        }
        if x.iter().sum::<f64>() < 1e-12 {
            return Err(ToricError::EvaluationAtOrigin);
        }
        Ok(self.jet_unchecked(x, order))
    }

    fn jet_unchecked(&self, x: &[f64], order: u8) -> Jet {
        let n = self.n;
        match &self.kind {
            RegionKind::Ellipsoid { widths } => {
                let value = x.iter().zip(widths).map(|(x, a)| x / a).sum();
                Jet {
                    value,
                    gradient: if order >= 1 { widths.iter().map(|a| 1.0 / a).collect() } else { vec![] },
                    hessian: if order >= 2 { vec![0.0; n * n] } else { vec![] },
                }
            }
            RegionKind::PFamily { widths, p } => pfamily_jet(x, widths, *p, order),
            RegionKind::RadialProfile(rp) => rp.jet(x, order),
            RegionKind::SmoothedUnion { left, right, collar } => {
                let l = left.jet_unchecked(x, order);
                let r = right.jet_unchecked(x, order);
                blend_jets(&l, &r, *collar, n, order)
            }
        }
    }

    /// Boundary radius `1/f(u)` in direction `u`.
    pub fn radius(&self, u: &[f64]) -> Result<f64> {
        Ok(1.0 / self.value(u)?)
    }

    /// The point of `∂₊Ω` on the ray through `u`.
    pub fn boundary_point(&self, u: &[f64]) -> Result<Vec<f64>> {
        let f = self.value(u)?;
        Ok(u.iter().map(|v| v / f).collect())
    }
}

/// Value, gradient and row-major Hessian of a canonical function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

fn pfamily_jet(x: &[f64], widths: &[f64], p: f64, order: u8) -> Jet {
    let n = x.len();
    let y: Vec<f64> = x.iter().zip(widths).map(|(x, a)| x / a).collect();
    let ymax = y.iter().cloned().fold(0.0, f64::max);
    let value = ymax * y.iter().map(|v| (v / ymax).powf(p)).sum::<f64>().powf(1.0 / p);
    let mut jet = Jet { value, gradient: vec![], hessian: vec![] };
    if order == 0 {
        return jet;
    }
    let t: Vec<f64> = y.iter().map(|v| v / value).collect();
    jet.gradient = t.iter().zip(widths).map(|(t, a)| t.powf(p - 1.0) / a).collect();
    if order >= 2 {
        jet.hessian = vec![0.0; n * n];
        if p != 1.0 {
            let c = (p - 1.0) / value;
            for j in 0..n {
                for k in 0..n {
                    let mut h = -jet.gradient[j] * jet.gradient[k];
                    if j == k {
                        h += t[j].powf(p - 2.0) / (widths[j] * widths[j]);
                    }
                    jet.hessian[j * n + k] = c * h;
                }
            }
        }
    }
    jet
}

/// `q(t)`, a C² convex smoothing of `|t|/2` that agrees with it for `|t| ≥ 1`.
fn smooth_abs(t: f64) -> (f64, f64, f64) {
    if t.abs() >= 1.0 {
        (0.5 * t.abs(), 0.5 * t.signum(), 0.0)
    } else {
        let t2 = t * t;
        ((-t2 * t2 + 6.0 * t2 + 3.0) / 16.0, (3.0 * t - t2 * t) / 4.0, 3.0 * (1.0 - t2) / 4.0)
    }
}

/// `exp(smin(log f_L, log f_R))` with `smin(a, b) = (a + b)/2 - δ q((a - b)/δ)`.
fn blend_jets(l: &Jet, r: &Jet, delta: f64, n: usize, order: u8) -> Jet {
    let a = l.value.ln();
    let b = r.value.ln();
    let d = (a - b) / delta;
    let (q, dq, ddq) = smooth_abs(d);
    let s = 0.5 * (a + b) - delta * q;
    let value = s.exp();
    let mut jet = Jet { value, gradient: vec![], hessian: vec![] };
    if order == 0 {
        return jet;
    }
    let sa = 0.5 - dq;
    let sb = 0.5 + dq;
    let ga: Vec<f64> = l.gradient.iter().map(|g| g / l.value).collect();
    let gb: Vec<f64> = r.gradient.iter().map(|g| g / r.value).collect();
    let gs: Vec<f64> = (0..n).map(|j| sa * ga[j] + sb * gb[j]).collect();
    jet.gradient = gs.iter().map(|g| value * g).collect();
    if order >= 2 {
        let c = ddq / delta;
        jet.hessian = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                let haa = l.hessian[j * n + k] / l.value - ga[j] * ga[k];
                let hbb = r.hessian[j * n + k] / r.value - gb[j] * gb[k];
                let dd = (ga[j] - gb[j]) * (ga[k] - gb[k]);
                let hs = sa * haa + sb * hbb - c * dd;
                jet.hessian[j * n + k] = value * (hs + gs[j] * gs[k]);
            }
        }
    }
    jet
}

/// Natural cubic spline `R(u_1)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let bad = |m: &str| Err(ToricError::InvalidRegion(m.to_string()));
        if grid.len() < 2 || grid.len() != values.len() {
            return bad("profile needs at least two knots and one value per knot");
        }
        if grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
            return bad("profile grid must start at 0 and end at 1");
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("profile grid must be strictly increasing");
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("profile values must be positive");
        }
        let second = natural_spline(&grid, &values);
        Ok(Self { grid, values, second })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `R`, `R'` and `R''` at `u`.
    pub fn eval(&self, u: f64) -> (f64, f64, f64) {
        let u = u.clamp(0.0, 1.0);
        let last = self.grid.len() - 2;
        let i = self.grid.partition_point(|g| *g <= u).saturating_sub(1).min(last);
        let h = self.grid[i + 1] - self.grid[i];
        let a = (self.grid[i + 1] - u) / h;
        let b = (u - self.grid[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let r = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dr = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        (r, dr, a * m0 + b * m1)
    }

    fn jet(&self, x: &[f64], order: u8) -> Jet {
        let s = x[0] + x[1];
        let u = x[0] / s;
        let (r, dr, ddr) = self.eval(u);
        let mut jet = Jet { value: s / r, gradient: vec![], hessian: vec![] };
        if order >= 1 {
            jet.gradient = vec![1.0 / r - dr * (1.0 - u) / (r * r), 1.0 / r + dr * u / (r * r)];
        }
        if order >= 2 {
            let kappa = (ddr / (r * r) - 2.0 * dr * dr / (r * r * r)) / s;
            let off = u * (1.0 - u) * kappa;
            jet.hessian = vec![-(1.0 - u) * (1.0 - u) * kappa, off, off, -u * u * kappa];
        }
        jet
    }
}

fn natural_spline(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations.
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[i - 1] = 2.0 * (h0 + h1);
        upper[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for i in 1..k {
        let lower = x[i + 1] - x[i];
        let w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for i in (1..k).rev() {
        m[i] = (rhs[i - 1] - upper[i - 1] * m[i + 1]) / diag[i - 1];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_cubic_free_data() {
        let grid = vec![0.0, 0.3, 0.5, 1.0];
        let values: Vec<f64> = grid.iter().map(|u| 1.0 + 2.0 * u).collect();
        let rp = RadialProfile::new(grid, values).unwrap();
        for u in [0.0, 0.1, 0.45, 0.99, 1.0] {
            let (r, dr, ddr) = rp.eval(u);
            assert!((r - (1.0 + 2.0 * u)).abs() < 1e-14);
            assert!((dr - 2.0).abs() < 1e-13);
            assert!(ddr.abs() < 1e-12);
        }
    }

    #[test]
    fn spline_interpolates_knots() {
        let grid = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let values = vec![1.0, 1.4, 1.1, 2.0, 1.5];
        let rp = RadialProfile::new(grid.clone(), values.clone()).unwrap();
        for (g, v) in grid.iter().zip(&values) {
            assert!((rp.eval(*g).0 - v).abs() < 1e-14);
        }
        assert!(rp.eval(0.0).2.abs() < 1e-14 && rp.eval(1.0).2.abs() < 1e-14);
    }

    #[test]
    fn smooth_abs_is_c2() {
        let (q, dq, ddq) = smooth_abs(1.0 - 1e-12);
        assert!((q - 0.5).abs() < 1e-11 && (dq - 0.5).abs() < 1e-11 && ddq.abs() < 1e-11);
        assert!((smooth_abs(0.0).0 - 3.0 / 16.0).abs() < 1e-16);
    }

    #[test]
    fn blend_lies_below_min() {
        let l = MomentRegion::ellipsoid(vec![1.0, 1.0]).unwrap();
        let r = MomentRegion::ellipsoid(vec![0.5, 2.0]).unwrap();
        let u = MomentRegion::smoothed_union(l.clone(), r.clone(), 0.05).unwrap();
        for k in 0..=20 {
            let x = [k as f64 / 20.0, 1.0 - k as f64 / 20.0];
            let m = l.value(&x).unwrap().min(r.value(&x).unwrap());
            let f = u.value(&x).unwrap();
            assert!(f <= m * (1.0 + 1e-15));
            assert!(f >= m * (-3.0 * 0.05 / 16.0f64).exp() * (1.0 - 1e-15));
        }
    }

    #[test]
    fn json_schema() {
        let r: MomentRegion =
            serde_json::from_str(r#"{"n":2, "kind":"pfamily", "widths":[1,2], "p":0.5}"#).unwrap();
        assert_eq!(r, MomentRegion::pfamily(vec![1.0, 2.0], 0.5).unwrap());
        let back: MomentRegion = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<MomentRegion>(r#"{"n":3,"kind":"ellipsoid","widths":[1,2]}"#).is_err());
        assert!(serde_json::from_str::<MomentRegion>(r#"{"n":2,"kind":"ellipsoid","widths":[2,1]}"#).is_err());
        assert!(serde_json::from_str::<MomentRegion>(r#"{"n":2,"kind":"cube","widths":[1,1]}"#).is_err());
    }

    #[test]
    fn origin_is_rejected() {
        let r = MomentRegion::ellipsoid(vec![1.0, 2.0]).unwrap();
        assert!(matches!(r.value(&[0.0, 0.0]), Err(ToricError::EvaluationAtOrigin)));
        assert!(matches!(r.value(&[-1.0, 2.0]), Err(ToricError::OutsideOrthant)));
    }
}

use super::geometry::{interior_resolution, is_concave, simplex_lattice};
use super::{MomentRegion, Result, ToricError};
use serde::{Deserialize, Serialize};

/// Minimum of `⟨x, v⟩` over the closed boundary stratum selected by `supp(v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketResult {
    pub value: f64,
    pub point: Vec<f64>,
}

/// `[v]_Ω`, after checking the sampled concavity certificate.
pub fn systole_bracket(region: &MomentRegion, v: &[u64]) -> Result<BracketResult> {
    let cert = is_concave(region, 2000, 0);
    if !cert.holds {
        return Err(ToricError::NotConcave { witness: cert.witness.unwrap_or_default() });
    }
    bracket_on_closure(region, v)
}

fn face_resolution(k: usize) -> usize {
    match k {
        1 => 1,
        2 => 400,
        3 => 60,
        4 => 24,
        _ => 12,
    }
}

/// `[v]_Ω` without the concavity check: grid scan of the face followed by a compass search.
pub fn bracket_on_closure(region: &MomentRegion, v: &[u64]) -> Result<BracketResult> {
    let n = region.n();
    if v.len() != n || v.iter().all(|&c| c == 0) {
        return Err(ToricError::InvalidVector { n });
    }
    let support: Vec<usize> = (0..n).filter(|&j| v[j] > 0).collect();
    let k = support.len();
    let embed = |w: &[f64]| {
        let mut u = vec![0.0; n];
        for (i, &j) in support.iter().enumerate() {
            u[j] = w[i];
        }
        u
    };
    let objective = |w: &[f64]| -> Result<f64> {
        let u = embed(w);
        let f = region.value(&u)?;
        Ok(support.iter().zip(w).map(|(&j, wi)| v[j] as f64 * wi).sum::<f64>() / f)
    };

    let m = face_resolution(k);
    let mut best_w = Vec::new();
    let mut best = f64::INFINITY;
    for w in simplex_lattice(k, m, false) {
        let val = objective(&w)?;
        if val < best {
            best = val;
            best_w = w;
        }
    }

    let mut h = 1.0 / m as f64;
    let mut iterations = 0;
    while h > 1e-13 && k > 1 && iterations < 20_000 {
        iterations += 1;
        let mut improved = false;
        for i in 0..k {
            for j in 0..k {
                if i == j || best_w[j] == 0.0 {
                    continue;
                }
                let step = h.min(best_w[j]);
                let mut w = best_w.clone();
                w[i] += step;
                w[j] -= step;
                if step == best_w[j] {
                    w[j] = 0.0;
                }
                let val = objective(&w)?;
                if val < best {
                    best = val;
                    best_w = w;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    let point = region.boundary_point(&embed(&best_w))?;
    Ok(BracketResult { value: best, point })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystoleOptions {
    /// Lower bound on `⟨x, 1⟩/n` over the boundary; estimated on a grid when absent.
    pub delta: Option<f64>,
    /// Maximum number of brackets evaluated.
    pub budget: usize,
    pub concavity_samples: usize,
    pub seed: u64,
}

impl Default for SystoleOptions {
    fn default() -> Self {
        Self { delta: None, budget: 100_000, concavity_samples: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystoleResult {
    pub value: f64,
    pub minimizer: Vec<u64>,
    pub point: Vec<f64>,
    /// Enumeration radius `|v|₁ ≤ v_max`.
    pub v_max: u64,
    pub delta: f64,
    /// Number of vectors in the enumeration range.
    pub candidates: f64,
    pub brackets_evaluated: usize,
    pub complete: bool,
}

/// `c(X_Ω) = min_v [v]_Ω` for a concave region.
pub fn systole_concave(region: &MomentRegion) -> Result<SystoleResult> {
    systole_concave_with(region, &SystoleOptions::default())
}

/// Enumeration with pruning.
///
/// For `v ≥ 1_S` componentwise with support `S`, `⟨x, v⟩ ≥ ⟨x, 1_S⟩` on the
/// stratum, so `[1_S]` bounds every bracket with that support from below. Once
/// all indicator brackets are known every other candidate is pruned.
pub fn systole_concave_with(region: &MomentRegion, options: &SystoleOptions) -> Result<SystoleResult> {
    let cert = is_concave(region, options.concavity_samples, options.seed);
    if !cert.holds {
        return Err(ToricError::NotConcave { witness: cert.witness.unwrap_or_default() });
    }
    let n = region.n();

    let mut c_ub = f64::INFINITY;
    for j in 0..n {
        let mut e = vec![0u64; n];
        e[j] = 1;
        c_ub = c_ub.min(bracket_on_closure(region, &e)?.value);
    }
    let delta = match options.delta {
        Some(d) => d,
        None => default_delta(region)?.unwrap_or(c_ub / n as f64),
    };
    let v_max = ((c_ub / delta).ceil() as u64).max(n as u64);
    let candidates = binomial(v_max as f64 + n as f64, n) - 1.0;

    let mut best = f64::INFINITY;
    let mut minimizer = vec![0u64; n];
    let mut point = vec![0.0; n];
    let mut evaluated = 0usize;
    for mask in 1u64..(1u64 << n) {
        if evaluated >= options.budget {
            return Err(ToricError::EnumerationBudgetExceeded { best, minimizer });
        }
        let v: Vec<u64> = (0..n).map(|j| (mask >> j) & 1).collect();
        let b = bracket_on_closure(region, &v)?;
        evaluated += 1;
        if b.value < best {
            best = b.value;
            minimizer = v;
            point = b.point;
        }
    }
    Ok(SystoleResult {
        value: best,
        minimizer,
        point,
        v_max,
        delta,
        candidates,
        brackets_evaluated: evaluated,
        complete: true,
    })
}

fn binomial(n: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i as f64) / (i + 1) as f64)
}

/// `min ⟨x, 1⟩/n` over boundary grid points with all coordinates at least `10⁻³·max width`.
fn default_delta(region: &MomentRegion) -> Result<Option<f64>> {
    let n = region.n();
    let eta = 1e-3 * region.max_axis_width()?;
    let mut best: Option<f64> = None;
    for u in simplex_lattice(n, interior_resolution(n, 2000), true) {
        let x = region.boundary_point(&u)?;
        if x.iter().all(|v| *v >= eta) {
            let avg = x.iter().sum::<f64>() / n as f64;
            best = Some(best.map_or(avg, |b: f64| b.min(avg)));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsoid_brackets() {
        let e = MomentRegion::ellipsoid(vec![1.0, 2.0]).unwrap();
        assert!((systole_bracket(&e, &[1, 1]).unwrap().value - 1.0).abs() < 1e-12);
        assert!((systole_bracket(&e, &[1, 0]).unwrap().value - 1.0).abs() < 1e-12);
        assert!((systole_concave(&e).unwrap().value - 1.0).abs() < 1e-12);
        let e = MomentRegion::ellipsoid(vec![3.0, 5.0, 7.0]).unwrap();
        assert!((systole_concave(&e).unwrap().value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn p_half_bracket_is_harmonic() {
        // For p = 1/2 the bracket is 1/Σ(1/(a_i v_i)).
        let r = MomentRegion::pfamily(vec![1.0, 1.0], 0.5).unwrap();
        let b = systole_bracket(&r, &[2, 3]).unwrap();
        assert!((b.value - 1.2).abs() < 1e-10, "{}", b.value);
        let r = MomentRegion::pfamily(vec![1.0, 2.0], 0.5).unwrap();
        let s = systole_concave(&r).unwrap();
        assert!((s.value - 2.0 / 3.0).abs() < 1e-10);
        assert_eq!(s.minimizer, vec![1, 1]);
    }

    #[test]
    fn convex_region_is_rejected() {
        let r = MomentRegion::pfamily(vec![1.0, 1.0], 2.0).unwrap();
        assert!(matches!(systole_concave(&r), Err(ToricError::NotConcave { .. })));
    }

    #[test]
    fn invalid_vectors() {
        let e = MomentRegion::ellipsoid(vec![1.0, 2.0]).unwrap();
        assert!(matches!(bracket_on_closure(&e, &[0, 0]), Err(ToricError::InvalidVector { .. })));
        assert!(matches!(bracket_on_closure(&e, &[1]), Err(ToricError::InvalidVector { .. })));
    }
}

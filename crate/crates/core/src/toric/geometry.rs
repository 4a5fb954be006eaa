use super::MomentRegion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default number of boundary samples for shape certificates.
pub const DEFAULT_SHAPE_SAMPLES: usize = 10_000;

const SHAPE_TOL: f64 = 1e-9;

/// Points `k/m` with `k ∈ Z^n_{≥0}` (or `≥ 1` when `interior`) and `|k|₁ = m`.
pub fn simplex_lattice(n: usize, m: usize, interior: bool) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut k = vec![0usize; n];
    let lo = usize::from(interior);
    fn rec(j: usize, left: usize, lo: usize, k: &mut Vec<usize>, m: usize, out: &mut Vec<Vec<f64>>) {
        let n = k.len();
        if j + 1 == n {
            if left >= lo {
                k[j] = left;
                out.push(k.iter().map(|&v| v as f64 / m as f64).collect());
            }
            return;
        }
        let reserve = lo * (n - j - 1);
        if left < lo + reserve {
            return;
        }
        for v in lo..=left - reserve {
            k[j] = v;
            rec(j + 1, left - v, lo, k, m, out);
        }
    }
    if n > 0 && m > 0 {
        rec(0, m, lo, &mut k, m, &mut out);
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Smallest lattice resolution giving at least `samples` interior points.
pub(crate) fn interior_resolution(n: usize, samples: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let mut m = n;
    while binomial(m - 1, n - 1) < samples as f64 && m < 100_000 {
        m += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub monotone: bool,
    pub witness: Option<Vec<f64>>,
    pub checked: usize,
}

/// Sampled check that `∇f_Ω` has positive components on the open boundary strata.
pub fn is_strictly_monotone(region: &MomentRegion, samples: usize) -> MonotonicityReport {
    let n = region.n();
    let lattice = simplex_lattice(n, interior_resolution(n, samples), true);
    let mut checked = 0;
    for u in &lattice {
        checked += 1;
        let ok = region
            .gradient(u)
            .map(|g| g.iter().all(|v| *v > 0.0))
            .unwrap_or(false);
        if !ok {
            let witness = region.boundary_point(u).unwrap_or_else(|_| u.clone());
            return MonotonicityReport { monotone: false, witness: Some(witness), checked };
        }
    }
    MonotonicityReport { monotone: true, witness: None, checked }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub holds: bool,
    /// A chord point where the certificate fails.
    pub witness: Option<Vec<f64>>,
    /// Largest violation `f(chord) - 1` (convexity) or `1 - f(chord)` (concavity) seen.
    pub worst_defect: f64,
    pub checked: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Shape {
    Concave,
    Convex,
}

fn random_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    // Every fourth sample sits on a face.
    if n > 1 && rng.random_range(0..4) == 0 {
        let j = rng.random_range(0..n);
        u[j] = 0.0;
    }
    let s: f64 = u.iter().sum();
    u.iter().map(|v| v / s).collect()
}

fn chord_certificate(region: &MomentRegion, samples: usize, seed: u64, shape: Shape) -> ShapeReport {
    let n = region.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for _ in 0..samples {
        let (Ok(x), Ok(y)) = (
            region.boundary_point(&random_direction(n, &mut rng)),
            region.boundary_point(&random_direction(n, &mut rng)),
        ) else {
            continue;
        };
        for t in [0.25, 0.5, 0.75] {
            let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let Ok(f) = region.value(&z) else { continue };
            checked += 1;
            let defect = match shape {
                Shape::Concave => 1.0 - f,
                Shape::Convex => f - 1.0,
            };
            worst = worst.max(defect);
            if defect > SHAPE_TOL {
                return ShapeReport { holds: false, witness: Some(z), worst_defect: defect, checked };
            }
        }
    }
    ShapeReport { holds: true, witness: None, worst_defect: worst.max(0.0), checked }
}

/// Sampled certificate that the complement of `Ω` in the orthant is convex, i.e. `f_Ω` is concave.
pub fn is_concave(region: &MomentRegion, samples: usize, seed: u64) -> ShapeReport {
    chord_certificate(region, samples, seed, Shape::Concave)
}

/// Sampled certificate that `Ω` is convex with a nonnegative canonical gradient.
pub fn is_convex(region: &MomentRegion, samples: usize, seed: u64) -> ShapeReport {
    let mut report = chord_certificate(region, samples, seed, Shape::Convex);
    if report.holds {
        let n = region.n();
        for u in simplex_lattice(n, interior_resolution(n, samples.min(2000)), true) {
            if region.gradient(&u).map(|g| g.iter().any(|v| *v < 0.0)).unwrap_or(true) {
                report.holds = false;
                report.witness = region.boundary_point(&u).ok();
                break;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_counts() {
        assert_eq!(simplex_lattice(3, 4, false).len(), 15);
        assert_eq!(simplex_lattice(3, 4, true).len(), 3);
        assert_eq!(simplex_lattice(1, 7, true), vec![vec![1.0]]);
        assert_eq!(interior_resolution(2, 100), 101);
    }

    #[test]
    fn shapes_of_the_p_family() {
        let concave = MomentRegion::pfamily(vec![1.0, 2.0], 0.5).unwrap();
        let convex = MomentRegion::pfamily(vec![1.0, 1.0], 2.0).unwrap();
        assert!(is_concave(&concave, 500, 1).holds);
        assert!(!is_convex(&concave, 500, 1).holds);
        assert!(is_convex(&convex, 500, 1).holds);
        assert!(!is_concave(&convex, 500, 1).holds);
        let e = MomentRegion::ellipsoid(vec![1.0, 3.0, 4.0]).unwrap();
        assert!(is_concave(&e, 500, 2).holds && is_convex(&e, 500, 2).holds);
    }

    #[test]
    fn monotonicity_examples() {
        assert!(is_strictly_monotone(&MomentRegion::ellipsoid(vec![1.0, 2.0]).unwrap(), 1000).monotone);
        assert!(is_strictly_monotone(&MomentRegion::pfamily(vec![1.0, 1.0], 2.0).unwrap(), 1000).monotone);
        let dented = MomentRegion::radial_profile(vec![0.0, 0.5, 0.6, 1.0], vec![1.0, 1.0, 3.0, 3.0]).unwrap();
        let report = is_strictly_monotone(&dented, 1000);
        assert!(!report.monotone);
        let w = report.witness.unwrap();
        let g = dented.gradient(&w).unwrap();
        assert!(g.iter().any(|v| *v <= 0.0));
    }
}

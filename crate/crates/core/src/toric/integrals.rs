use super::{MomentRegion, RegionKind, Result, ToricError};
use crate::quadrature::{integrate_simplex, Estimate, QuadratureSpec};
use std::f64::consts::PI;

/// Integrates a degree-zero homogeneous density `g` over `Ω`.
///
/// In coordinates `x = r·u` with `u` on the simplex, `dx = r^{n-1} dr du`, so
/// `∫_Ω g = ∫_Δ g(u) R(u)^n / n du` with `R(u) = 1/f(u)`.
fn integrate_homogeneous(
    region: &MomentRegion,
    order: u8,
    density: impl Fn(&[f64], &super::Jet) -> f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let n = region.n();
    let integrand = |u: &[f64]| -> f64 {
        match region.jet(u, order) {
            Ok(jet) => density(u, &jet) * jet.value.powi(-(n as i32)) / n as f64,
            Err(_) => f64::NAN,
        }
    };
    Ok(integrate_simplex(n, &integrand, spec)?)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Euclidean volume of `Ω`; closed form `Πa_i/n!` for ellipsoids.
pub fn volume_toric(region: &MomentRegion, spec: &QuadratureSpec) -> Result<Estimate> {
    if let RegionKind::Ellipsoid { widths } = region.kind() {
        let value = widths.iter().product::<f64>() / factorial(widths.len());
        return Ok(Estimate { value, error: 0.0, evaluations: 0 });
    }
    integrate_homogeneous(region, 0, |_, _| 1.0, spec)
}

/// Pointwise Ruelle density `Σ_i ∂_i f_Ω(x)`.
pub fn ruelle_density(region: &MomentRegion, x: &[f64]) -> Result<f64> {
    Ok(region.gradient(x)?.iter().sum())
}

/// `Ru(X_Ω) = Σ_i ∫_Ω ∂_i f_Ω`.
pub fn ruelle_invariant_toric(region: &MomentRegion, spec: &QuadratureSpec) -> Result<Estimate> {
    integrate_homogeneous(region, 1, |_, jet| jet.gradient.iter().sum(), spec)
}

/// `S = ∫_Ω Σ_j 4π(∂_j f + x_j ∂²_jj f)`, the integral of the Laplacian of `f_Ω ∘ μ` over `X_Ω`.
pub fn laplacian_functional(region: &MomentRegion, spec: &QuadratureSpec) -> Result<Estimate> {
    if let RegionKind::PFamily { p, .. } = region.kind() {
        if *p < 0.5 {
            return Err(ToricError::NonIntegrableHessian { p: *p });
        }
    }
    let n = region.n();
    integrate_homogeneous(
        region,
        2,
        |u, jet| {
            let mut s = 0.0;
            for j in 0..n {
                // 0·∞ on faces: the diagonal term vanishes with the coordinate.
                let curv = if u[j] == 0.0 { 0.0 } else { u[j] * jet.hessian[j * n + j] };
                s += jet.gradient[j] + curv;
            }
            4.0 * PI * s
        },
        spec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsoid_values() {
        let spec = QuadratureSpec::default();
        let e = MomentRegion::ellipsoid(vec![1.0, 2.0]).unwrap();
        assert!((ruelle_invariant_toric(&e, &spec).unwrap().value - 1.5).abs() < 1e-12);
        assert_eq!(volume_toric(&e, &spec).unwrap().value, 1.0);
        assert!((laplacian_functional(&e, &spec).unwrap().value - 6.0 * PI).abs() < 1e-11);
        let e = MomentRegion::ellipsoid(vec![1.0, 1.0, 1.0]).unwrap();
        assert!((ruelle_invariant_toric(&e, &spec).unwrap().value - 0.5).abs() < 1e-12);
        let e = MomentRegion::ellipsoid(vec![3.5]).unwrap();
        assert!((ruelle_invariant_toric(&e, &spec).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pfamily_half_volume() {
        // {√x + √y ≤ 1} has area 1/6.
        let r = MomentRegion::pfamily(vec![1.0, 1.0], 0.5).unwrap();
        let v = volume_toric(&r, &QuadratureSpec::default()).unwrap();
        assert!((v.value - 1.0 / 6.0).abs() < 1e-11);
    }

    #[test]
    fn hessian_guard() {
        let r = MomentRegion::pfamily(vec![1.0, 1.0], 0.4).unwrap();
        assert!(matches!(
            laplacian_functional(&r, &QuadratureSpec::default()),
            Err(ToricError::NonIntegrableHessian { .. })
        ));
    }
}

use statrs::function::gamma::gamma;
use std::f64::consts::PI;

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Closed forms for `E(a)`: systole, volume, Ru and the Laplacian functional.
pub struct EllipsoidOracle {
    pub c: f64,
    pub vol: f64,
    pub ru: f64,
    pub s: f64,
}

pub fn ellipsoid(widths: &[f64]) -> EllipsoidOracle {
    let vol = widths.iter().product::<f64>() / factorial(widths.len());
    let inv: f64 = widths.iter().map(|a| 1.0 / a).sum();
    EllipsoidOracle { c: widths.iter().cloned().fold(f64::INFINITY, f64::min), vol, ru: vol * inv, s: 4.0 * PI * vol * inv }
}

/// Volume of `{Σ(x_i/a_i)^p ≤ 1}` by the Dirichlet integral.
pub fn pfamily_volume(widths: &[f64], p: f64) -> f64 {
    let n = widths.len() as f64;
    widths.iter().product::<f64>() * gamma(1.0 + 1.0 / p).powf(n) / gamma(1.0 + n / p)
}

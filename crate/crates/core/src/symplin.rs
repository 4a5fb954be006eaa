//! Symplectic and complex linear algebra on R^{2n} = C^n.
//!
//! Coordinates are ordered `(x_1..x_n, y_1..y_n)` and `z = x + iy`. The
//! standard form matrix is `Ω = [[0, -I], [I, 0]]`, which is also the matrix of
//! multiplication by `i`. A real matrix is complex-linear exactly when it has
//! the block shape `[[X, -Y], [Y, X]]`, and then it represents `X + iY`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::PI;
use thiserror::Error;

/// Default tolerance for `AΩAᵀ = Ω` and related structural checks.
pub const TOL_SYMP: f64 = 1e-10;
/// Default tolerance for classifying eigenvalues on the unit circle.
pub const TOL_EIG: f64 = 1e-8;
/// Condition number of `AᵀA` above which the unitary part is unreliable.
pub const MAX_CONDITION: f64 = 1e14;

const CLUSTER_RADIUS: f64 = 1e-6;
const KREIN_DEGENERACY: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymplinError {
    #[error("matrix is not symplectic: max |AΩAᵀ - Ω| = {defect:e}")]
    NonSymplecticInput { defect: f64 },
    #[error("matrix has non-positive determinant {det:e}")]
    NegativeDeterminant { det: f64 },
    #[error("polar decomposition ill-conditioned: cond(AᵀA) = {condition:e}")]
    IllConditioned { condition: f64 },
    #[error("matrix is not unitary: structural defect {defect:e}")]
    NotUnitary { defect: f64 },
    #[error("positive part is singular or indefinite: min eigenvalue {min_eigenvalue:e}")]
    SingularP { min_eigenvalue: f64 },
    #[error("spectrum is ambiguous near the unit circle")]
    AmbiguousSpectrum,
    #[error("expected a square matrix of even size, found {rows}x{cols}")]
    NotEvenSquare { rows: usize, cols: usize },
    #[error("matrix is not in sp(2n): max |AΩ + ΩAᵀ| = {defect:e}")]
    NotInLieAlgebra { defect: f64 },
}

pub type Result<T> = std::result::Result<T, SymplinError>;

/// The standard form matrix `Ω` of size `2n`.
pub fn standard_form(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(j, n + j)] = -1.0;
        m[(n + j, j)] = 1.0;
    }
    m
}

/// `max |AΩAᵀ - Ω|` for a square matrix of even size.
pub fn symplectic_defect(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows() / 2;
    let omega = standard_form(n);
    (a * &omega * a.transpose() - omega).amax()
}

fn check_even_square(a: &DMatrix<f64>) -> Result<usize> {
    let dim = a.nrows();
    if dim == 0 || dim % 2 != 0 || a.ncols() != dim {
        return Err(SymplinError::NotEvenSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(dim / 2)
}

/// A validated element of `Sp(2n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    n: usize,
    entries: DMatrix<f64>,
}

impl SymplecticMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(entries, TOL_SYMP)
    }

    pub fn with_tolerance(entries: DMatrix<f64>, tol: f64) -> Result<Self> {
        let n = check_even_square(&entries)?;
        let defect = symplectic_defect(&entries);
        // Absolute defects grow with the entries; scale by |A|² for large matrices.
        let scale = entries.amax().max(1.0).powi(2);
        if !(defect <= tol * scale) {
            return Err(SymplinError::NonSymplecticInput { defect });
        }
        let det = entries.determinant();
        if !(det > 0.0) {
            return Err(SymplinError::NegativeDeterminant { det });
        }
        Ok(Self { n, entries })
    }

    /// Wraps a matrix known to be symplectic by construction.
    pub(crate) fn from_trusted(entries: DMatrix<f64>) -> Self {
        let n = entries.nrows() / 2;
        Self { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self { n, entries: DMatrix::identity(2 * n, 2 * n) }
    }

    /// Block-diagonal unitary rotating the `j`-th complex coordinate by `angles[j]` radians.
    pub fn rotation(angles: &[f64]) -> Self {
        let n = angles.len();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (j, &a) in angles.iter().enumerate() {
            let (s, c) = a.sin_cos();
            m[(j, j)] = c;
            m[(j, n + j)] = -s;
            m[(n + j, j)] = s;
            m[(n + j, n + j)] = c;
        }
        Self { n, entries: m }
    }

    /// `exp(ΩS)` for a symmetric `S`.
    pub fn exp_hamiltonian(s: &DMatrix<f64>) -> Result<Self> {
        LieAlgebraElement::from_symmetric(s)?.exp()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    /// `A⁻¹ = -ΩAᵀΩ`, exact for symplectic `A`.
    pub fn inverse(&self) -> Self {
        let omega = standard_form(self.n);
        Self::from_trusted(-(&omega * self.entries.transpose() * &omega))
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self::from_trusted(&self.entries * &other.entries)
    }

    pub fn defect(&self) -> f64 {
        symplectic_defect(&self.entries)
    }
}

impl Serialize for SymplecticMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_row_major(&self.entries).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymplecticMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let flat = Vec::<f64>::deserialize(d)?;
        let m = from_row_major(&flat).map_err(serde::de::Error::custom)?;
        SymplecticMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Row-major flattening used for JSON round-trips.
pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Inverse of [`to_row_major`]; the length must be a perfect square.
pub fn from_row_major(flat: &[f64]) -> std::result::Result<DMatrix<f64>, String> {
    let dim = (flat.len() as f64).sqrt().round() as usize;
    if dim * dim != flat.len() {
        return Err(format!("{} entries do not form a square matrix", flat.len()));
    }
    Ok(DMatrix::from_row_slice(dim, dim, flat))
}

/// An element of `sp(2n)`, i.e. `ΩS` with `S` symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebraElement {
    n: usize,
    entries: DMatrix<f64>,
}

impl LieAlgebraElement {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = check_even_square(&entries)?;
        let omega = standard_form(n);
        let defect = (&entries * &omega + &omega * entries.transpose()).amax();
        if !(defect <= TOL_SYMP * entries.amax().max(1.0)) {
            return Err(SymplinError::NotInLieAlgebra { defect });
        }
        Ok(Self { n, entries })
    }

    pub fn from_symmetric(s: &DMatrix<f64>) -> Result<Self> {
        let n = check_even_square(s)?;
        let sym = (s + s.transpose()) * 0.5;
        Ok(Self { n, entries: standard_form(n) * sym })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// The symmetric generator `S = -ΩA`.
    pub fn symmetric_part(&self) -> DMatrix<f64> {
        -(standard_form(self.n) * &self.entries)
    }

    pub fn exp(&self) -> Result<SymplecticMatrix> {
        SymplecticMatrix::with_tolerance(self.entries.clone().exp(), 1e-8)
    }
}

/// Polar factors `A = U·P`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarPair {
    pub unitary: DMatrix<f64>,
    pub positive: DMatrix<f64>,
}

/// Polar decomposition of a symplectic matrix.
pub fn polar_decompose(a: &SymplecticMatrix) -> Result<PolarPair> {
    polar_decompose_general(a.matrix())
}

/// Polar decomposition of any invertible square matrix, via the eigendecomposition of `AᵀA`.
pub fn polar_decompose_general(a: &DMatrix<f64>) -> Result<PolarPair> {
    let (v, lambda) = sym_eigen(&(a.transpose() * a));
    let lmin = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    let lmax = lambda.iter().cloned().fold(0.0, f64::max);
    if !(lmin > 0.0) || lmax / lmin > MAX_CONDITION {
        return Err(SymplinError::IllConditioned { condition: lmax / lmin.max(0.0) });
    }
    let sqrt: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
    let positive = spectral(&v, |i| sqrt[i]);
    let inv_sqrt = spectral(&v, |i| 1.0 / sqrt[i]);
    Ok(PolarPair { unitary: a * inv_sqrt, positive })
}

fn sym_eigen(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvectors, eig.eigenvalues.iter().cloned().collect())
}

fn spectral(v: &DMatrix<f64>, f: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let mut scaled = v.clone();
    for (i, mut col) in scaled.column_iter_mut().enumerate() {
        col *= f(i);
    }
    &scaled * v.transpose()
}

/// Complex-linear part `(M - ΩMΩ)/2` as an `n×n` complex matrix.
pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = m.nrows() / 2;
    DMatrix::from_fn(n, n, |i, j| {
        let x = 0.5 * (m[(i, j)] + m[(n + i, n + j)]);
        let y = 0.5 * (m[(n + i, j)] - m[(i, n + j)]);
        Complex64::new(x, y)
    })
}

/// Real `2n×2n` matrix of the complex matrix `X + iY`.
pub fn from_complex(c: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = c.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = c[(i, j)];
            m[(i, j)] = z.re;
            m[(n + i, n + j)] = z.re;
            m[(n + i, j)] = z.im;
            m[(i, n + j)] = -z.im;
        }
    }
    m
}

/// Complex trace of the complex-linear part of a real `2n×2n` matrix.
pub fn complex_trace(m: &DMatrix<f64>) -> Complex64 {
    let n = m.nrows() / 2;
    (0..n).fold(Complex64::new(0.0, 0.0), |acc, j| {
        acc + Complex64::new(
            0.5 * (m[(j, j)] + m[(n + j, n + j)]),
            0.5 * (m[(n + j, j)] - m[(j, n + j)]),
        )
    })
}

fn complex_det(c: DMatrix<Complex64>) -> Complex64 {
    if c.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    c.lu().determinant()
}

/// Max deviation of a real matrix from the block shape `[[X, -Y], [Y, X]]`.
pub fn complex_structure_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows() / 2;
    let omega = standard_form(n);
    (m * &omega - &omega * m).amax()
}

/// `arg det_C(X + iY)` for an orthogonal-symplectic `U`.
pub fn complex_determinant_phase(u: &DMatrix<f64>) -> Result<f64> {
    check_even_square(u)?;
    let structural = complex_structure_defect(u);
    let orthogonal = (u.transpose() * u - DMatrix::identity(u.nrows(), u.ncols())).amax();
    let defect = structural.max(orthogonal);
    if !(defect <= TOL_SYMP.max(1e3 * f64::EPSILON * u.nrows() as f64)) {
        return Err(SymplinError::NotUnitary { defect });
    }
    Ok(complex_det(to_complex(u)).arg())
}

/// Phase of the unitary polar factor, computed without the decomposition.
///
/// For symplectic `A = UP` the complex-linear part is `U_C (P + P⁻¹)/2` and the
/// second factor is Hermitian positive definite, so `arg det_C` of the
/// complex-linear part of `A` equals that of `U`.
pub fn unitary_part_phase(a: &DMatrix<f64>) -> f64 {
    complex_det(to_complex(a)).arg()
}

/// Solves `MP + PM = 2S` in the eigenbasis of `P`.
pub fn solve_lyapunov(p: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (v, lambda) = sym_eigen(p);
    let lmin = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lmin > 0.0) {
        return Err(SymplinError::SingularP { min_eigenvalue: lmin });
    }
    let mut rhs = v.transpose() * (s * 2.0) * &v;
    for i in 0..rhs.nrows() {
        for j in 0..rhs.ncols() {
            rhs[(i, j)] /= lambda[i] + lambda[j];
        }
    }
    Ok(&v * rhs * v.transpose())
}

/// Derivative of `A ↦ U(A)` in the direction `D`.
pub fn polar_derivative(a: &SymplecticMatrix, direction: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    polar_derivative_general(a.matrix(), direction)
}

/// [`polar_derivative`] for any invertible matrix.
pub fn polar_derivative_general(a: &DMatrix<f64>, direction: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let PolarPair { unitary, positive } = polar_decompose_general(a)?;
    let b = unitary.transpose() * direction;
    let skew = (&b - b.transpose()) * 0.5;
    let m = solve_lyapunov(&positive, &skew)?;
    Ok(unitary * m)
}

/// Argument of the eigenvalue quasimorphism `e̲(A)`, in `(-π, π]`.
///
/// Unit-circle eigenvalues away from `±1` contribute `λ^{m}` where `m` is the
/// number of positive eigenvalues of the Krein form `v ↦ vᴴ(iJ)v` on the
/// complex generalized eigenspace, and negative real eigenvalues contribute a
/// sign through half their algebraic multiplicity.
pub fn eigenvalue_quasimorphism_base(a: &SymplecticMatrix) -> Result<f64> {
    eigenvalue_quasimorphism_with(a.matrix(), TOL_EIG)
}

pub fn eigenvalue_quasimorphism_with(a: &DMatrix<f64>, tol: f64) -> Result<f64> {
    check_even_square(a)?;
    let eigs: Vec<Complex64> = a.complex_eigenvalues().iter().cloned().collect();
    let coarse = classify_spectrum(a, &eigs, tol)?;
    let fine = classify_spectrum(a, &eigs, 0.5 * tol)?;
    if coarse.neg_count != fine.neg_count || wrap_angle(coarse.phase - fine.phase).abs() > 1e-9 {
        return Err(SymplinError::AmbiguousSpectrum);
    }
    Ok(wrap_angle(coarse.phase))
}

struct Classified {
    phase: f64,
    neg_count: usize,
}

fn classify_spectrum(a: &DMatrix<f64>, eigs: &[Complex64], tol: f64) -> Result<Classified> {
    let mut neg_count = 0;
    let mut circle: Vec<Complex64> = Vec::new();
    for &l in eigs {
        if l.im.abs() <= tol {
            if l.re < 0.0 {
                neg_count += 1;
            }
        } else if (l.norm() - 1.0).abs() <= tol {
            circle.push(l);
        }
    }
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for l in circle {
        match clusters.iter_mut().find(|c| (c[0] - l).norm() < CLUSTER_RADIUS) {
            Some(c) => c.push(l),
            None => clusters.push(vec![l]),
        }
    }
    let mut phase = 0.5 * PI * neg_count as f64;
    for cluster in &clusters {
        let k = cluster.len();
        let centre = cluster.iter().sum::<Complex64>() / k as f64;
        let positive = krein_positive_count(a, centre, k)?;
        phase += positive as f64 * centre.arg();
    }
    Ok(Classified { phase, neg_count })
}

fn krein_positive_count(a: &DMatrix<f64>, lambda: Complex64, k: usize) -> Result<usize> {
    let dim = a.nrows();
    let shifted: DMatrix<Complex64> =
        a.map(|x| Complex64::new(x, 0.0)) - DMatrix::<Complex64>::identity(dim, dim) * lambda;
    let mut power = shifted.clone();
    for _ in 1..k {
        power = &power * &shifted;
    }
    let svd = power.svd(false, true);
    let v_t = svd.v_t.ok_or(SymplinError::AmbiguousSpectrum)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let basis = DMatrix::from_fn(dim, k, |r, c| v_t[(order[c], r)].conj());

    let n = dim / 2;
    let mut krein = DMatrix::<Complex64>::zeros(dim, dim);
    for j in 0..n {
        krein[(j, n + j)] = Complex64::new(0.0, 1.0);
        krein[(n + j, j)] = Complex64::new(0.0, -1.0);
    }
    let form = basis.adjoint() * krein * &basis;
    let form = (&form + form.adjoint()) * Complex64::new(0.5, 0.0);
    let values = SymmetricEigen::new(form).eigenvalues;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if values.iter().any(|v| v.abs() <= KREIN_DEGENERACY * scale.max(f64::MIN_POSITIVE)) {
        return Err(SymplinError::AmbiguousSpectrum);
    }
    Ok(values.iter().filter(|v| **v > 0.0).count())
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Random element of `Sp(2n)` as a product of exponentials of symmetric generators with entries in `[-scale, scale]`.
pub fn random_symplectic<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> SymplecticMatrix {
    let mut acc = SymplecticMatrix::identity(n);
    for _ in 0..2 {
        let s = random_symmetric(2 * n, scale, rng);
        let step = LieAlgebraElement::from_symmetric(&s)
            .and_then(|g| g.exp())
            .unwrap_or_else(|_| SymplecticMatrix::identity(n));
        acc = acc.compose(&step);
    }
    acc
}

/// Random symmetric matrix with entries in `[-scale, scale]`.
pub fn random_symmetric<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-scale..=scale));
    (&g + g.transpose()) * 0.5
}

/// Random orthogonal-symplectic matrix, i.e. a random unitary in `U(n)`.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymplecticMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let q = g.qr().q();
    SymplecticMatrix::from_trusted(from_complex(&q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn polar_of_positive_is_trivial() {
        let a = SymplecticMatrix::new(m2(2.0, 0.0, 0.0, 0.5)).unwrap();
        let p = polar_decompose(&a).unwrap();
        assert!((p.unitary - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!((p.positive - a.matrix()).amax() < 1e-14);
    }

    #[test]
    fn polar_of_rotation_is_trivial() {
        let a = SymplecticMatrix::rotation(&[0.7]);
        let p = polar_decompose(&a).unwrap();
        assert!((p.unitary - a.matrix()).amax() < 1e-14);
        assert!((p.positive - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn rejects_non_symplectic() {
        let err = SymplecticMatrix::new(m2(2.0, 0.0, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, SymplinError::NonSymplecticInput { .. }));
        let err = SymplecticMatrix::new(m2(-1.0, 0.0, 0.0, -1.0));
        assert!(err.is_ok(), "-I has determinant 1");
    }

    #[test]
    fn ill_conditioned_polar() {
        let a = SymplecticMatrix::new(m2(1e8, 0.0, 0.0, 1e-8)).unwrap();
        assert!(matches!(polar_decompose(&a), Err(SymplinError::IllConditioned { .. })));
    }

    #[test]
    fn determinant_phase_examples() {
        assert_eq!(complex_determinant_phase(&DMatrix::identity(4, 4)).unwrap(), 0.0);
        let r = SymplecticMatrix::rotation(&[PI / 3.0]);
        assert!((complex_determinant_phase(r.matrix()).unwrap() - PI / 3.0).abs() < 1e-14);
        let r = SymplecticMatrix::rotation(&[PI / 2.0, PI / 2.0]);
        let phase = complex_determinant_phase(r.matrix()).unwrap();
        assert!((phase.abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn determinant_phase_rejects_shear() {
        let err = complex_determinant_phase(&m2(1.0, 1.0, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, SymplinError::NotUnitary { .. }));
    }

    #[test]
    fn lyapunov_examples() {
        let s = m2(0.0, 1.0, -1.0, 0.0);
        let m = solve_lyapunov(&DMatrix::identity(2, 2), &s).unwrap();
        assert!((&m - &s).amax() < 1e-15);
        let m = solve_lyapunov(&m2(1.0, 0.0, 0.0, 3.0), &s).unwrap();
        assert!((m - m2(0.0, 0.5, -0.5, 0.0)).amax() < 1e-15);
        let m = solve_lyapunov(&m2(2.0, 0.0, 0.0, 2.0), &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(m.amax(), 0.0);
        assert!(matches!(
            solve_lyapunov(&m2(1.0, 0.0, 0.0, -1.0), &s),
            Err(SymplinError::SingularP { .. })
        ));
    }

    #[test]
    fn polar_derivative_at_identity() {
        let id = SymplecticMatrix::identity(1);
        let s = m2(0.0, 2.0, -2.0, 0.0);
        assert!((polar_derivative(&id, &s).unwrap() - &s).amax() < 1e-14);
        let sym = m2(1.0, 2.0, 2.0, 3.0);
        assert!(polar_derivative(&id, &sym).unwrap().amax() < 1e-14);
    }

    #[test]
    fn eigenvalue_quasimorphism_examples() {
        let shear = SymplecticMatrix::new(m2(1.0, 1.0, 0.0, 1.0)).unwrap();
        assert_eq!(eigenvalue_quasimorphism_base(&shear).unwrap(), 0.0);
        let hyp = SymplecticMatrix::new(m2(2.0, 0.0, 0.0, 0.5)).unwrap();
        assert_eq!(eigenvalue_quasimorphism_base(&hyp).unwrap(), 0.0);
        for phi in [0.3, 1.0, 2.5, 3.0] {
            let r = SymplecticMatrix::rotation(&[phi]);
            assert!((eigenvalue_quasimorphism_base(&r).unwrap() - phi).abs() < 1e-10);
            let r = SymplecticMatrix::rotation(&[-phi]);
            assert!((eigenvalue_quasimorphism_base(&r).unwrap() + phi).abs() < 1e-10);
        }
        let neg = SymplecticMatrix::new(m2(-2.0, 0.0, 0.0, -0.5)).unwrap();
        assert!((eigenvalue_quasimorphism_base(&neg).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn fast_phase_matches_polar_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=3 {
            for _ in 0..50 {
                let a = random_symplectic(n, 0.8, &mut rng);
                let u = polar_decompose(&a).unwrap().unitary;
                let slow = complex_determinant_phase(&u).unwrap();
                let fast = unitary_part_phase(a.matrix());
                assert!(wrap_angle(slow - fast).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn row_major_round_trip() {
        let a = SymplecticMatrix::new(m2(1.0, 2.0, 0.0, 1.0)).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, "[1.0,2.0,0.0,1.0]");
        let back: SymplecticMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn inverse_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_symplectic(2, 0.5, &mut rng);
        let prod = a.compose(&a.inverse());
        assert!((prod.matrix() - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn random_unitary_is_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(3, &mut rng);
        assert!(u.defect() < 1e-12);
        assert!(complex_determinant_phase(u.matrix()).is_ok());
    }
}

//! Sampled symplectic paths, lifted rotation numbers and the index calculus.
//!
//! Rotation numbers are measured in full turns. A path is a finite list of
//! samples starting at the identity; lifts are continuous only if consecutive
//! samples differ by less than a quarter turn of the tracked phase.

use crate::symplin::{
    self, eigenvalue_quasimorphism_with, unitary_part_phase, wrap_angle, SymplecticMatrix,
    SymplinError, TOL_EIG, TOL_SYMP,
};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Default number of iterates used by [`homogenized_rotation`].
pub const DEFAULT_K_MAX: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("phase jump of {jump:.4} rad at sample {index} (must stay below π/2)")]
    UndersampledPath { index: usize, jump: f64 },
    #[error("{ambiguous} of {total} samples have ambiguous spectrum")]
    PersistentDegeneracy { ambiguous: usize, total: usize },
    #[error("path does not return to the identity: defect {defect:e}")]
    NotALoop { defect: f64 },
    #[error("lift {value} of a loop is not within 0.1 of an integer")]
    NonIntegralLift { value: f64 },
    #[error("matrix has an eigenvalue {eigenvalue:e} too close to zero")]
    DegenerateA { eigenvalue: f64 },
    #[error("spectral radius {radius} is not below 1")]
    SpectralRadiusTooLarge { radius: f64 },
    #[error("unknown block type `{0}`")]
    UnknownBlockType(String),
    #[error("invalid path samples: {0}")]
    InvalidSamples(String),
    #[error(transparent)]
    Symplin(#[from] SymplinError),
}

pub type Result<T> = std::result::Result<T, PathError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockTag {
    DiagonalUnitary,
    Unipotent,
    General,
}

/// Time-sampled path in `Sp(2n)` starting at `(0, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathRepr", into = "PathRepr")]
pub struct SymplecticPath {
    n: usize,
    times: Vec<f64>,
    matrices: Vec<SymplecticMatrix>,
    tag: Option<BlockTag>,
}

#[derive(Serialize, Deserialize)]
struct PathRepr {
    n: usize,
    samples: Vec<(f64, SymplecticMatrix)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tag: Option<BlockTag>,
}

impl TryFrom<PathRepr> for SymplecticPath {
    type Error = PathError;
    fn try_from(r: PathRepr) -> Result<Self> {
        let mut p = SymplecticPath::new(r.n, r.samples)?;
        p.tag = r.tag;
        Ok(p)
    }
}

impl From<SymplecticPath> for PathRepr {
    fn from(p: SymplecticPath) -> Self {
        PathRepr { n: p.n, samples: p.times.into_iter().zip(p.matrices).collect(), tag: p.tag }
    }
}

impl SymplecticPath {
    pub fn new(n: usize, samples: Vec<(f64, SymplecticMatrix)>) -> Result<Self> {
        let Some((t0, m0)) = samples.first() else {
            return Err(PathError::InvalidSamples("no samples".into()));
        };
        if *t0 != 0.0 {
            return Err(PathError::InvalidSamples(format!("first time is {t0}, not 0")));
        }
        let id_defect = (m0.matrix() - DMatrix::identity(2 * n, 2 * n)).amax();
        if m0.n() != n || id_defect > TOL_SYMP {
            return Err(PathError::InvalidSamples("first sample is not the identity".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(PathError::InvalidSamples("times are not strictly increasing".into()));
            }
            if w[1].1.n() != n {
                return Err(PathError::InvalidSamples("mixed dimensions".into()));
            }
        }
        let (times, matrices) = samples.into_iter().unzip();
        Ok(Self { n, times, matrices, tag: None })
    }

    /// Samples `f` at `steps + 1` equally spaced times in `[0, t_end]`.
    pub fn from_fn(
        n: usize,
        t_end: f64,
        steps: usize,
        f: impl Fn(f64) -> DMatrix<f64>,
    ) -> Result<Self> {
        let steps = steps.max(1);
        let mut samples = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let t = t_end * k as f64 / steps as f64;
            let m = if k == 0 { DMatrix::identity(2 * n, 2 * n) } else { f(t) };
            samples.push((t, SymplecticMatrix::with_tolerance(m, 1e-8)?));
        }
        Self::new(n, samples)
    }

    /// Solves `Φ' = ΩS(t)Φ`, `Φ(0) = I` with implicit midpoint steps and records every step.
    ///
    /// The midpoint step is the Cayley transform of `hΩS`, which is exactly symplectic.
    pub fn from_generator(
        n: usize,
        t_end: f64,
        steps: usize,
        substeps: usize,
        s: impl Fn(f64) -> DMatrix<f64>,
    ) -> Result<Self> {
        let omega = symplin::standard_form(n);
        let id = DMatrix::<f64>::identity(2 * n, 2 * n);
        let steps = steps.max(1);
        let substeps = substeps.max(1);
        let h = t_end / (steps * substeps) as f64;
        let mut phi = id.clone();
        let mut samples = vec![(0.0, SymplecticMatrix::identity(n))];
        for k in 0..steps {
            for j in 0..substeps {
                let t = h * ((k * substeps + j) as f64 + 0.5);
                let a = &omega * s(t) * (0.5 * h);
                let lhs = (&id - &a).lu();
                phi = lhs
                    .solve(&((&id + &a) * &phi))
                    .ok_or_else(|| PathError::InvalidSamples("singular Cayley step".into()))?;
            }
            let t = t_end * (k + 1) as f64 / steps as f64;
            samples.push((t, SymplecticMatrix::with_tolerance(phi.clone(), 1e-8)?));
        }
        Self::new(n, samples)
    }

    pub fn with_tag(mut self, tag: BlockTag) -> Self {
        self.tag = Some(tag);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tag(&self) -> Option<BlockTag> {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn matrices(&self) -> &[SymplecticMatrix] {
        &self.matrices
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn end(&self) -> &SymplecticMatrix {
        self.matrices.last().expect("paths are never empty")
    }

    /// Concatenation `self` followed by `self.end() · other(t)`.
    pub fn then(&self, other: &SymplecticPath) -> Result<Self> {
        if other.n != self.n {
            return Err(PathError::InvalidSamples("dimension mismatch".into()));
        }
        let t0 = self.duration();
        let e = self.end().clone();
        let mut out = self.clone();
        out.tag = if self.tag == other.tag { self.tag } else { Some(BlockTag::General) };
        for (t, m) in other.times.iter().zip(&other.matrices).skip(1) {
            out.times.push(t0 + t);
            out.matrices.push(e.compose(m));
        }
        Ok(out)
    }

    /// The `k`-fold concatenation of the path with itself.
    pub fn power(&self, k: usize) -> Self {
        let mut out = self.clone();
        for _ in 1..k.max(1) {
            out = out.then(self).expect("same dimension");
        }
        out
    }

    fn powered_matrices(&self, k: usize) -> impl Iterator<Item = DMatrix<f64>> + '_ {
        let mut end_power = DMatrix::identity(2 * self.n, 2 * self.n);
        let end = self.end().matrix().clone();
        (0..k).flat_map(move |j| {
            let left = end_power.clone();
            end_power = &end_power * &end;
            let skip = usize::from(j > 0);
            self.matrices.iter().skip(skip).map(move |m| &left * m.matrix())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftMethod {
    Determinant,
    Eigenvalue,
}

/// A lifted rotation number in full turns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftedAngle {
    pub value: f64,
    pub method: LiftMethod,
    /// Largest single-step phase increment in turns; the sampling contract requires it below 1/4.
    pub defect_budget: f64,
}

struct Unwrapper {
    last: f64,
    total: f64,
    max_jump: f64,
}

impl Unwrapper {
    fn new(start: f64) -> Self {
        Self { last: start, total: 0.0, max_jump: 0.0 }
    }

    fn push(&mut self, index: usize, phase: f64) -> Result<f64> {
        let d = wrap_angle(phase - self.last);
        if d.abs() >= 0.5 * PI {
            return Err(PathError::UndersampledPath { index, jump: d });
        }
        self.total += d;
        self.last = phase;
        self.max_jump = self.max_jump.max(d.abs());
        Ok(self.total)
    }
}

fn turns(radians: f64) -> f64 {
    radians / (2.0 * PI)
}

/// Cumulative lift, in turns, at every sample of an iterated matrix sequence.
fn lift_profile(
    matrices: impl Iterator<Item = DMatrix<f64>>,
    method: LiftMethod,
) -> Result<(Vec<f64>, f64)> {
    match method {
        LiftMethod::Determinant => {
            let mut unwrap = Unwrapper::new(0.0);
            let mut out = Vec::new();
            for (i, m) in matrices.enumerate() {
                out.push(turns(unwrap.push(i, unitary_part_phase(&m))?));
            }
            Ok((out, turns(unwrap.max_jump)))
        }
        LiftMethod::Eigenvalue => {
            let mut phases = Vec::new();
            for m in matrices {
                match eigenvalue_quasimorphism_with(&m, TOL_EIG) {
                    Ok(p) => phases.push(Some(p)),
                    Err(SymplinError::AmbiguousSpectrum) => phases.push(None),
                    Err(e) => return Err(e.into()),
                }
            }
            let ambiguous = phases.iter().filter(|p| p.is_none()).count();
            if ambiguous * 10 > phases.len() {
                return Err(PathError::PersistentDegeneracy { ambiguous, total: phases.len() });
            }
            let mut unwrap = Unwrapper::new(0.0);
            let mut out = vec![f64::NAN; phases.len()];
            let mut last_good: Option<usize> = None;
            for (i, p) in phases.iter().enumerate() {
                let Some(p) = p else { continue };
                let value = turns(unwrap.push(i, *p)?);
                out[i] = value;
                // Skipped samples in between are interpolated linearly.
                if let Some(j) = last_good {
                    for k in j + 1..i {
                        let w = (k - j) as f64 / (i - j) as f64;
                        out[k] = out[j] + w * (value - out[j]);
                    }
                }
                last_good = Some(i);
            }
            let fill = last_good.map(|j| out[j]).unwrap_or(0.0);
            for v in out.iter_mut().rev().take_while(|v| v.is_nan()) {
                *v = fill;
            }
            Ok((out, turns(unwrap.max_jump)))
        }
    }
}

fn lift_with(path: &SymplecticPath, method: LiftMethod) -> Result<LiftedAngle> {
    let (profile, budget) =
        lift_profile(path.matrices.iter().map(|m| m.matrix().clone()), method)?;
    Ok(LiftedAngle { value: *profile.last().unwrap_or(&0.0), method, defect_budget: budget })
}

/// Determinant rotation number `r` of the path endpoint in the universal cover.
pub fn lift_rotation(path: &SymplecticPath) -> Result<LiftedAngle> {
    lift_with(path, LiftMethod::Determinant)
}

/// Lift of the eigenvalue quasimorphism along the path.
pub fn lift_eigenvalue_rotation(path: &SymplecticPath) -> Result<LiftedAngle> {
    lift_with(path, LiftMethod::Eigenvalue)
}

/// Winding number of `det_C ∘ U` along a closed loop.
pub fn maslov_index(path: &SymplecticPath) -> Result<i64> {
    let defect = (path.end().matrix() - DMatrix::identity(2 * path.n, 2 * path.n)).amax();
    if defect > 1e3 * TOL_SYMP {
        return Err(PathError::NotALoop { defect });
    }
    let value = lift_rotation(path)?.value;
    if (value - value.round()).abs() >= 0.1 {
        return Err(PathError::NonIntegralLift { value });
    }
    Ok(value.round() as i64)
}

/// Result of the signature normalization check.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureAxiom {
    pub index: i64,
    pub path: SymplecticPath,
}

/// `CZ = sign(A)/2` for the path `t ↦ exp(2πΩAt)` with `A` small, symmetric and nondegenerate.
pub fn cz_signature_axiom(a: &DMatrix<f64>, steps: usize) -> Result<SignatureAxiom> {
    if a.nrows() != a.ncols() || a.nrows() % 2 != 0 || a.nrows() == 0 {
        return Err(SymplinError::NotEvenSquare { rows: a.nrows(), cols: a.ncols() }.into());
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone()).eigenvalues;
    if let Some(&e) = eig.iter().find(|e| e.abs() < 1e-10) {
        return Err(PathError::DegenerateA { eigenvalue: e });
    }
    let radius = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if radius >= 1.0 {
        return Err(PathError::SpectralRadiusTooLarge { radius });
    }
    let positive = eig.iter().filter(|e| **e > 0.0).count() as i64;
    let negative = eig.len() as i64 - positive;
    let n = a.nrows() / 2;
    let generator = symplin::standard_form(n) * &sym * (2.0 * PI);
    let path = SymplecticPath::from_fn(n, 1.0, steps.max(8), |t| (&generator * t).exp())?;
    Ok(SignatureAxiom { index: (positive - negative) / 2, path })
}

/// Lower semi-continuous CZ index of the `U(1)` path `t ↦ e^{2πiθt}`.
pub fn lcz_u1(theta: f64) -> i64 {
    2 * theta.ceil() as i64 - 1
}

/// One block of a split symplectic path with a known index contribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BlockIndex {
    /// `t ↦ e^{2πiθt}` in one complex dimension.
    U1Rotation { theta: f64 },
    /// A loop of Maslov index `k`.
    Loop { k: i64 },
    /// A unipotent path in dimension `2m` with vanishing mean rotation.
    UnipotentZeroRho { m: usize },
    /// A `U(1)` rotation with unbounded positive rate.
    U1Unbounded,
}

impl fmt::Display for BlockIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockIndex::U1Rotation { theta } => write!(f, "u1:{theta}"),
            BlockIndex::Loop { k } => write!(f, "loop:{k}"),
            BlockIndex::UnipotentZeroRho { m } => write!(f, "unipotent:{m}"),
            BlockIndex::U1Unbounded => write!(f, "u1:inf"),
        }
    }
}

impl FromStr for BlockIndex {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || PathError::UnknownBlockType(s.to_string());
        let (kind, arg) = s.split_once(':').ok_or_else(unknown)?;
        match kind.trim() {
            "u1" if arg.trim() == "inf" => Ok(BlockIndex::U1Unbounded),
            "u1" => arg.trim().parse().map(|theta| BlockIndex::U1Rotation { theta }).map_err(|_| unknown()),
            "loop" => arg.trim().parse().map(|k| BlockIndex::Loop { k }).map_err(|_| unknown()),
            "unipotent" => {
                arg.trim().parse().map(|m| BlockIndex::UnipotentZeroRho { m }).map_err(|_| unknown())
            }
            _ => Err(unknown()),
        }
    }
}

/// An index value that is either exact or only bounded from below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexResult {
    Exact { value: i64 },
    LowerBound { exact_part: i64, lower_bound: i64 },
}

impl IndexResult {
    /// The best certified lower bound, which is the value itself when exact.
    pub fn lower_bound(&self) -> i64 {
        match *self {
            IndexResult::Exact { value } => value,
            IndexResult::LowerBound { lower_bound, .. } => lower_bound,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, IndexResult::Exact { .. })
    }

    pub fn shifted(self, k: i64) -> Self {
        match self {
            IndexResult::Exact { value } => IndexResult::Exact { value: value + k },
            IndexResult::LowerBound { exact_part, lower_bound } => {
                IndexResult::LowerBound { exact_part: exact_part + k, lower_bound: lower_bound + k }
            }
        }
    }
}

/// Index of a direct sum of blocks.
pub fn lcz_block_sum(blocks: &[BlockIndex]) -> IndexResult {
    let mut exact = 0i64;
    let mut bound = 0i64;
    let mut inexact = false;
    for b in blocks {
        match *b {
            BlockIndex::U1Rotation { theta } => exact += lcz_u1(theta),
            BlockIndex::Loop { k } => exact += 2 * k,
            BlockIndex::UnipotentZeroRho { m } => {
                inexact = true;
                bound -= m as i64;
            }
            BlockIndex::U1Unbounded => {
                inexact = true;
                bound += 1;
            }
        }
    }
    if inexact {
        IndexResult::LowerBound { exact_part: exact, lower_bound: exact + bound }
    } else {
        IndexResult::Exact { value: exact }
    }
}

/// Finite homogenization of a rotation number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Homogenized {
    pub estimate: f64,
    pub method: LiftMethod,
    /// `r(path^k)/k` for `k = 1..=k_max`.
    pub history: Vec<f64>,
}

impl Homogenized {
    /// Largest change of the estimate over the second half of the history.
    pub fn tail_spread(&self) -> f64 {
        let tail = &self.history[self.history.len() / 2..];
        let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// `r(path^k)/k` at `k = k_max`, using the eigenvalue lift.
pub fn homogenized_rotation(path: &SymplecticPath, k_max: usize) -> Result<Homogenized> {
    homogenized_rotation_with(path, k_max, LiftMethod::Eigenvalue)
}

pub fn homogenized_rotation_with(
    path: &SymplecticPath,
    k_max: usize,
    method: LiftMethod,
) -> Result<Homogenized> {
    let k_max = k_max.max(1);
    let (profile, _) = lift_profile(path.powered_matrices(k_max), method)?;
    let per = path.len() - 1;
    let history: Vec<f64> = (1..=k_max).map(|k| profile[k * per] / k as f64).collect();
    Ok(Homogenized { estimate: *history.last().unwrap(), method, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation_path(theta: f64, steps: usize) -> SymplecticPath {
        SymplecticPath::from_fn(1, 1.0, steps, |t| {
            SymplecticMatrix::rotation(&[2.0 * PI * theta * t]).into_inner()
        })
        .unwrap()
    }

    fn shear_path(t_end: f64, steps: usize) -> SymplecticPath {
        SymplecticPath::from_fn(1, t_end, steps, |t| {
            DMatrix::from_row_slice(2, 2, &[1.0, t, 0.0, 1.0])
        })
        .unwrap()
    }

    #[test]
    fn rotation_lifts() {
        let p = rotation_path(3.7, 100);
        assert!((lift_rotation(&p).unwrap().value - 3.7).abs() < 1e-12);
        let p = rotation_path(1.25, 50);
        assert!((lift_eigenvalue_rotation(&p).unwrap().value - 1.25).abs() < 1e-10);
    }

    #[test]
    fn diagonal_unitary_lift_adds() {
        let p = SymplecticPath::from_fn(2, 1.0, 64, |t| {
            SymplecticMatrix::rotation(&[2.0 * PI * 1.5 * t, -2.0 * PI * 0.4 * t]).into_inner()
        })
        .unwrap();
        assert!((lift_rotation(&p).unwrap().value - 1.1).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_lift_is_zero() {
        let p = SymplecticPath::from_fn(1, 1.0, 10, |t| {
            DMatrix::from_row_slice(2, 2, &[t.exp(), 0.0, 0.0, (-t).exp()])
        })
        .unwrap();
        assert_eq!(lift_rotation(&p).unwrap().value, 0.0);
    }

    #[test]
    fn undersampled_is_detected() {
        let p = rotation_path(3.0, 10);
        assert!(matches!(lift_rotation(&p), Err(PathError::UndersampledPath { .. })));
    }

    #[test]
    fn shear_eigen_lift_vanishes() {
        let p = shear_path(5.0, 50);
        assert_eq!(lift_eigenvalue_rotation(&p).unwrap().value, 0.0);
        let h = homogenized_rotation(&p, 20).unwrap();
        assert!(h.estimate.abs() < 1e-6);
    }

    #[test]
    fn constant_path_lifts_to_zero() {
        let p = SymplecticPath::from_fn(2, 1.0, 5, |_| DMatrix::identity(4, 4)).unwrap();
        assert_eq!(lift_eigenvalue_rotation(&p).unwrap().value, 0.0);
        assert_eq!(maslov_index(&p).unwrap(), 0);
    }

    #[test]
    fn maslov_examples() {
        assert_eq!(maslov_index(&rotation_path(2.0, 64)).unwrap(), 2);
        let p = SymplecticPath::from_fn(2, 1.0, 64, |t| {
            SymplecticMatrix::rotation(&[2.0 * PI * t, -2.0 * PI * t]).into_inner()
        })
        .unwrap();
        assert_eq!(maslov_index(&p).unwrap(), 0);
        assert!(matches!(maslov_index(&rotation_path(0.5, 8)), Err(PathError::NotALoop { .. })));
    }

    #[test]
    fn signature_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        assert_eq!(cz_signature_axiom(&(&id * 0.1), 32).unwrap().index, 1);
        let d = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -0.1]);
        assert_eq!(cz_signature_axiom(&d, 32).unwrap().index, 0);
        let id4 = DMatrix::<f64>::identity(4, 4);
        assert_eq!(cz_signature_axiom(&(&id4 * -0.1), 32).unwrap().index, -2);
        assert!(matches!(
            cz_signature_axiom(&(&id * 2.0), 32),
            Err(PathError::SpectralRadiusTooLarge { .. })
        ));
        assert!(matches!(cz_signature_axiom(&(&id * 0.0), 32), Err(PathError::DegenerateA { .. })));
    }

    #[test]
    fn u1_index() {
        assert_eq!(lcz_u1(0.0), -1);
        assert_eq!(lcz_u1(1.0), 1);
        assert_eq!(lcz_u1(-0.5), -1);
        assert_eq!(lcz_u1(0.5), 1);
        assert_eq!(lcz_u1(1.5), 3);
    }

    #[test]
    fn block_sums() {
        use BlockIndex::*;
        let r = lcz_block_sum(&[U1Rotation { theta: 1.0 }, U1Rotation { theta: 0.5 }]);
        assert_eq!(r, IndexResult::Exact { value: 2 });
        let r = lcz_block_sum(&[Loop { k: 3 }, U1Rotation { theta: 0.0 }]);
        assert_eq!(r, IndexResult::Exact { value: 5 });
        let r = lcz_block_sum(&[U1Rotation { theta: 1.0 }, UnipotentZeroRho { m: 1 }]);
        assert_eq!(r, IndexResult::LowerBound { exact_part: 1, lower_bound: 0 });
    }

    #[test]
    fn block_parsing() {
        assert_eq!("loop:3".parse::<BlockIndex>().unwrap(), BlockIndex::Loop { k: 3 });
        assert_eq!("u1:inf".parse::<BlockIndex>().unwrap(), BlockIndex::U1Unbounded);
        let b: BlockIndex = "u1:0.25".parse().unwrap();
        assert_eq!(b.to_string().parse::<BlockIndex>().unwrap(), b);
        assert!(matches!("spiral:2".parse::<BlockIndex>(), Err(PathError::UnknownBlockType(_))));
    }

    #[test]
    fn homogenized_examples() {
        let h = homogenized_rotation(&rotation_path(0.3, 16), 10).unwrap();
        assert!((h.estimate - 0.3).abs() < 1e-9);
        let hyp = SymplecticPath::from_fn(1, 1.0, 10, |t| {
            DMatrix::from_row_slice(2, 2, &[t.exp(), 0.0, 0.0, (-t).exp()])
        })
        .unwrap();
        assert_eq!(homogenized_rotation(&hyp, 10).unwrap().estimate, 0.0);
    }

    #[test]
    fn concatenation_of_rotations() {
        let a = rotation_path(0.3, 8);
        let b = rotation_path(0.45, 8);
        let ab = a.then(&b).unwrap();
        assert!((lift_rotation(&ab).unwrap().value - 0.75).abs() < 1e-12);
        assert_eq!(ab.len(), 17);
        assert!((a.power(4).duration() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let p = shear_path(1.0, 2).with_tag(BlockTag::Unipotent);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.starts_with("{\"n\":1,\"samples\":[[0.0,[1.0,0.0,0.0,1.0]]"));
        let back: SymplecticPath = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<SymplecticPath>("{\"n\":1,\"samples\":[]}").is_err());
    }

    #[test]
    fn generator_path_of_constant_rotation() {
        let s = DMatrix::<f64>::identity(2, 2) * (2.0 * PI);
        let p = SymplecticPath::from_generator(1, 1.0, 16, 64, |_| s.clone()).unwrap();
        assert!(p.end().defect() < 1e-12);
        assert!((lift_rotation(&p).unwrap().value - 1.0).abs() < 1e-3);
    }
}

//! Hamiltonian flows on `R^{2n}`, their linearized cocycles and finite-time
//! rotation functions.
//!
//! The point flow is `ż = Ω∇H(z)` and the cocycle solves `Ṁ = Ω∇²H(z(t))·M`.
//! Both are integrated together with classical RK4 at a fixed step. Every 100
//! steps the cocycle is pulled back onto `Sp(2n)` by a Newton step and the
//! point is rescaled along the Liouville field to the initial energy.

use crate::paths::PathError;
use crate::symplin::{
    standard_form, unitary_part_phase, wrap_angle, SymplecticMatrix, SymplinError,
};
use crate::toric::{simplex_lattice, MomentRegion, ToricError};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

/// Relative energy drift tolerated between projections.
pub const ENERGY_TOL: f64 = 1e-6;
/// Target value of `dt·‖∇²H‖`.
pub const STEP_SCALE: f64 = 0.05;
const PROJECT_EVERY: usize = 100;
const MAX_ATTEMPTS_PER_SAMPLE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("relative energy drift {drift:.3e} at t = {time}")]
    EnergyDriftExceeded { time: f64, drift: f64 },
    #[error("rejection sampling accepted {accepted} of {attempts} draws before the budget ran out")]
    SampleBudgetExhausted { accepted: usize, attempts: usize },
    #[error("Hessian eigenvalue {eigenvalue:.3e} < 0 at {point:?}")]
    NotConvexField { eigenvalue: f64, point: Vec<f64> },
    #[error("trajectory needs {steps} steps, above the budget")]
    StepBudgetExceeded { steps: usize },
    #[error("H vanishes or is not finite at the start point")]
    NonPositiveEnergy,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Symplin(#[from] SymplinError),
    #[error(transparent)]
    Toric(#[from] ToricError),
}

pub type Result<T> = std::result::Result<T, FlowError>;

/// A Hamiltonian on `R^{2n}` with `H(√s·z) = s·H(z)`.
pub trait HamiltonianField: Send + Sync {
    fn n(&self) -> usize;
    fn value(&self, z: &[f64]) -> f64;
    fn gradient_into(&self, z: &[f64], out: &mut [f64]);
    fn hessian_into(&self, z: &[f64], out: &mut DMatrix<f64>);
    /// Half-widths of a coordinate box containing `{H ≤ 1}`.
    fn bounding_box(&self) -> Vec<f64>;

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; 2 * self.n()];
        self.gradient_into(z, &mut g);
        g
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let d = 2 * self.n();
        let mut h = DMatrix::zeros(d, d);
        self.hessian_into(z, &mut h);
        h
    }
}

/// `H = f_Ω ∘ μ` with `μ_j = π(x_j² + y_j²)`.
#[derive(Debug, Clone)]
pub struct ToricField {
    region: MomentRegion,
    half_widths: Vec<f64>,
}

impl ToricField {
    pub fn new(region: MomentRegion) -> Result<Self> {
        let n = region.n();
        let m = match n {
            1 => 1,
            2 => 400,
            3 => 60,
            _ => 16,
        };
        let mut widest = vec![0.0f64; n];
        for u in simplex_lattice(n, m, false) {
            let x = region.boundary_point(&u)?;
            for (w, v) in widest.iter_mut().zip(&x) {
                *w = w.max(*v);
            }
        }
        // The lattice may miss the extreme point between nodes.
        let half: Vec<f64> = widest.iter().map(|w| (1.02 * w / PI).sqrt()).collect();
        let half_widths = half.iter().chain(&half).copied().collect();
        Ok(Self { region, half_widths })
    }

    pub fn region(&self) -> &MomentRegion {
        &self.region
    }

    fn moment(&self, z: &[f64]) -> Vec<f64> {
        let n = self.region.n();
        (0..n).map(|j| PI * (z[j] * z[j] + z[n + j] * z[n + j])).collect()
    }
}

/// Product that treats `0·∞` as `0`, for derivatives on coordinate axes.
fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl HamiltonianField for ToricField {
    fn n(&self) -> usize {
        self.region.n()
    }

    fn value(&self, z: &[f64]) -> f64 {
        let mu = self.moment(z);
        self.region.value(&mu).unwrap_or(0.0)
    }

    fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.region.n();
        let mu = self.moment(z);
        let Ok(g) = self.region.gradient(&mu) else {
            out.fill(0.0);
            return;
        };
        for j in 0..n {
            out[j] = mul0(2.0 * PI * z[j], g[j]);
            out[n + j] = mul0(2.0 * PI * z[n + j], g[j]);
        }
    }

    fn hessian_into(&self, z: &[f64], out: &mut DMatrix<f64>) {
        let n = self.region.n();
        let mu = self.moment(z);
        let Ok(jet) = self.region.jet(&mu, 2) else {
            out.fill(0.0);
            return;
        };
        let pair = |a: usize| a % n;
        for a in 0..2 * n {
            for b in 0..2 * n {
                let wa = 2.0 * PI * z[a];
                let wb = 2.0 * PI * z[b];
                let mut h = mul0(mul0(wa, wb), jet.hessian[pair(a) * n + pair(b)]);
                if a == b {
                    h += 2.0 * PI * jet.gradient[pair(a)];
                }
                out[(a, b)] = h;
            }
        }
    }

    fn bounding_box(&self) -> Vec<f64> {
        self.half_widths.clone()
    }
}

/// `H(U⁻¹z)` for a unitary `U`.
pub struct ConjugatedField<F> {
    inner: F,
    u: DMatrix<f64>,
}

impl<F: HamiltonianField> ConjugatedField<F> {
    pub fn new(inner: F, u: &SymplecticMatrix) -> Result<Self> {
        crate::symplin::complex_determinant_phase(u.matrix())?;
        if u.n() != inner.n() {
            return Err(FlowError::InvalidParameters("dimension mismatch".into()));
        }
        Ok(Self { inner, u: u.matrix().clone() })
    }

    fn pull_back(&self, z: &[f64]) -> Vec<f64> {
        let zv = nalgebra::DVector::from_column_slice(z);
        (self.u.transpose() * zv).as_slice().to_vec()
    }
}

impl<F: HamiltonianField> HamiltonianField for ConjugatedField<F> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.inner.value(&self.pull_back(z))
    }

    fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        let g = nalgebra::DVector::from_vec(self.inner.gradient(&self.pull_back(z)));
        out.copy_from_slice((&self.u * g).as_slice());
    }

    fn hessian_into(&self, z: &[f64], out: &mut DMatrix<f64>) {
        let h = self.inner.hessian(&self.pull_back(z));
        out.copy_from(&(&self.u * h * self.u.transpose()));
    }

    fn bounding_box(&self) -> Vec<f64> {
        let r = self.inner.bounding_box().iter().map(|h| h * h).sum::<f64>().sqrt();
        vec![r; 2 * self.n()]
    }
}

/// `H(z_A, z_B) = H_A(z_A) + H_B(z_B)` on `C^{n_A} ⊕ C^{n_B}`.
pub struct DirectSumField<A, B> {
    a: A,
    b: B,
}

impl<A: HamiltonianField, B: HamiltonianField> DirectSumField<A, B> {
    pub fn new(a: A, b: B) -> Self {
        Self { a, b }
    }

    fn split(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (na, nb) = (self.a.n(), self.b.n());
        let n = na + nb;
        let za = z[..na].iter().chain(&z[n..n + na]).copied().collect();
        let zb = z[na..n].iter().chain(&z[n + na..]).copied().collect();
        (za, zb)
    }

    /// Position in the sum of coordinate `i` of the first (`false`) or second summand.
    fn index(&self, second: bool, i: usize) -> usize {
        let (na, nb) = (self.a.n(), self.b.n());
        let n = na + nb;
        let (k, offset) = if second { (nb, na) } else { (na, 0) };
        if i < k {
            offset + i
        } else {
            n + offset + i - k
        }
    }
}

impl<A: HamiltonianField, B: HamiltonianField> HamiltonianField for DirectSumField<A, B> {
    fn n(&self) -> usize {
        self.a.n() + self.b.n()
    }

    fn value(&self, z: &[f64]) -> f64 {
        let (za, zb) = self.split(z);
        self.a.value(&za) + self.b.value(&zb)
    }

    fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        let (za, zb) = self.split(z);
        for (second, g) in [(false, self.a.gradient(&za)), (true, self.b.gradient(&zb))] {
            for (i, v) in g.into_iter().enumerate() {
                out[self.index(second, i)] = v;
            }
        }
    }

    fn hessian_into(&self, z: &[f64], out: &mut DMatrix<f64>) {
        let (za, zb) = self.split(z);
        out.fill(0.0);
        for (second, h) in [(false, self.a.hessian(&za)), (true, self.b.hessian(&zb))] {
            for i in 0..h.nrows() {
                for j in 0..h.ncols() {
                    out[(self.index(second, i), self.index(second, j))] = h[(i, j)];
                }
            }
        }
    }

    fn bounding_box(&self) -> Vec<f64> {
        let (ba, bb) = (self.a.bounding_box(), self.b.bounding_box());
        let (na, nb) = (self.a.n(), self.b.n());
        let mut out = vec![0.0; 2 * (na + nb)];
        for (i, v) in ba.into_iter().enumerate() {
            out[self.index(false, i)] = v;
        }
        for (i, v) in bb.into_iter().enumerate() {
            out[self.index(true, i)] = v;
        }
        out
    }
}

type Evaluator = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A field given only by its values; derivatives by central differences.
pub struct FnField {
    n: usize,
    h: Evaluator,
    half_widths: Vec<f64>,
}

impl FnField {
    pub fn new(n: usize, half_widths: Vec<f64>, h: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { n, h: Box::new(h), half_widths }
    }
}

const FD_STEP: f64 = 1e-4;

impl HamiltonianField for FnField {
    fn n(&self) -> usize {
        self.n
    }

    fn value(&self, z: &[f64]) -> f64 {
        (self.h)(z)
    }

    fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        let mut w = z.to_vec();
        for i in 0..2 * self.n {
            w[i] = z[i] + FD_STEP;
            let fp = (self.h)(&w);
            w[i] = z[i] - FD_STEP;
            let fm = (self.h)(&w);
            w[i] = z[i];
            out[i] = (fp - fm) / (2.0 * FD_STEP);
        }
    }

    fn hessian_into(&self, z: &[f64], out: &mut DMatrix<f64>) {
        let d = 2 * self.n;
        let mut w = z.to_vec();
        let h = FD_STEP;
        let f0 = (self.h)(z);
        for i in 0..d {
            for j in i..d {
                let val = if i == j {
                    w[i] = z[i] + h;
                    let fp = (self.h)(&w);
                    w[i] = z[i] - h;
                    let fm = (self.h)(&w);
                    w[i] = z[i];
                    (fp - 2.0 * f0 + fm) / (h * h)
                } else {
                    let mut eval = |si: f64, sj: f64| {
                        w[i] = z[i] + si * h;
                        w[j] = z[j] + sj * h;
                        let v = (self.h)(&w);
                        w[i] = z[i];
                        w[j] = z[j];
                        v
                    };
                    (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h)
                };
                out[(i, j)] = val;
                out[(j, i)] = val;
            }
        }
    }

    fn bounding_box(&self) -> Vec<f64> {
        self.half_widths.clone()
    }
}

fn spectral_norm(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(h.clone()).eigenvalues.amax()
}

/// `dt` with `dt·‖∇²H(z)‖ = STEP_SCALE`.
pub fn suggested_dt(field: &dyn HamiltonianField, z: &[f64]) -> f64 {
    let norm = spectral_norm(&field.hessian(z));
    if norm > 0.0 {
        STEP_SCALE / norm
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocycleOptions {
    /// Fixed step; `None` uses [`suggested_dt`] at the start point.
    pub dt: Option<f64>,
    /// Record a sample every this many steps (the endpoints are always recorded).
    pub record_every: usize,
    pub max_steps: usize,
}

impl Default for CocycleOptions {
    fn default() -> Self {
        Self { dt: None, record_every: PROJECT_EVERY, max_steps: 200_000_000 }
    }
}

/// Samples of the flow, the cocycle and the lifted rotation `ũ` in turns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CocycleTrajectory {
    pub start: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub cocycles: Vec<SymplecticMatrix>,
    pub lift: Vec<f64>,
    pub max_energy_drift: f64,
    /// Largest phase increment between consecutive steps, in turns.
    pub max_phase_step: f64,
}

impl CocycleTrajectory {
    pub fn final_lift(&self) -> f64 {
        *self.lift.last().unwrap_or(&0.0)
    }

    pub fn final_point(&self) -> &[f64] {
        self.points.last().map_or(&self.start, |p| p)
    }

    /// Rows `t, z_1, …, z_2n, ũ`.
    pub fn to_csv(&self) -> String {
        let d = self.start.len();
        let mut out = String::from("t");
        for i in 0..d {
            let _ = write!(out, ",z{i}");
        }
        out.push_str(",u\n");
        for ((t, z), u) in self.times.iter().zip(&self.points).zip(&self.lift) {
            let _ = write!(out, "{t}");
            for v in z {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{u}");
        }
        out
    }
}

struct Workspace {
    omega: DMatrix<f64>,
    hess: DMatrix<f64>,
    prod: DMatrix<f64>,
    k: [DMatrix<f64>; 4],
    stage: DMatrix<f64>,
    kx: [Vec<f64>; 4],
    xs: Vec<f64>,
    grad: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let d = 2 * n;
        let z = || DMatrix::zeros(d, d);
        Self {
            omega: standard_form(n),
            hess: z(),
            prod: z(),
            k: [z(), z(), z(), z()],
            stage: z(),
            kx: std::array::from_fn(|_| vec![0.0; d]),
            xs: vec![0.0; d],
            grad: vec![0.0; d],
        }
    }
}

/// `out = Ω v` for `Ω = [[0, -I], [I, 0]]`.
fn apply_omega(v: &[f64], out: &mut [f64]) {
    let n = v.len() / 2;
    for j in 0..n {
        out[j] = -v[n + j];
        out[n + j] = v[j];
    }
}

/// `out = Ω M`.
fn apply_omega_left(m: &DMatrix<f64>, out: &mut DMatrix<f64>) {
    let n = m.nrows() / 2;
    for c in 0..m.ncols() {
        for j in 0..n {
            out[(j, c)] = -m[(n + j, c)];
            out[(n + j, c)] = m[(j, c)];
        }
    }
}

fn derivative(field: &dyn HamiltonianField, x: &[f64], m: &DMatrix<f64>, ws_hess: &mut DMatrix<f64>, prod: &mut DMatrix<f64>, grad: &mut [f64], kx: &mut [f64], km: &mut DMatrix<f64>) {
    field.gradient_into(x, grad);
    apply_omega(grad, kx);
    field.hessian_into(x, ws_hess);
    ws_hess.mul_to(m, prod);
    apply_omega_left(prod, km);
}

fn rk4_step(field: &dyn HamiltonianField, x: &mut [f64], m: &mut DMatrix<f64>, dt: f64, ws: &mut Workspace) {
    let Workspace { hess, prod, k, stage, kx, xs, grad, .. } = ws;
    let coeffs = [0.0, 0.5, 0.5, 1.0];
    for s in 0..4 {
        if s == 0 {
            xs.copy_from_slice(x);
            stage.copy_from(m);
        } else {
            let c = coeffs[s] * dt;
            for i in 0..x.len() {
                xs[i] = x[i] + c * kx[s - 1][i];
            }
            stage.copy_from(m);
            stage.zip_apply(&k[s - 1], |a, b| *a += c * b);
        }
        let (kx_s, k_s) = (&mut kx[s], &mut k[s]);
        derivative(field, xs, stage, hess, prod, grad, kx_s, k_s);
    }
    for i in 0..x.len() {
        x[i] += dt / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
    }
    for (kk, w) in k.iter().zip([1.0, 2.0, 2.0, 1.0]) {
        let c = w * dt / 6.0;
        m.zip_apply(kk, |a, b| *a += c * b);
    }
}

/// One Newton step towards `Sp(2n)`: `M ← M(I - E/2)` with `I + E = -ΩMᵀΩM`.
fn resymplectify(m: &mut DMatrix<f64>, omega: &DMatrix<f64>) {
    let d = m.nrows();
    let e = -(omega * m.transpose() * omega * &*m) - DMatrix::identity(d, d);
    let corrected = &*m * (DMatrix::identity(d, d) - 0.5 * e);
    *m = corrected;
}

fn integrate_steps(
    field: &dyn HamiltonianField,
    x0: &[f64],
    t_end: f64,
    steps: usize,
    record_every: usize,
) -> Result<CocycleTrajectory> {
    let n = field.n();
    let d = 2 * n;
    if x0.len() != d {
        return Err(FlowError::InvalidParameters(format!("start point has {} coordinates, expected {d}", x0.len())));
    }
    let h0 = field.value(x0);
    if !(h0 > 0.0 && h0.is_finite()) {
        return Err(FlowError::NonPositiveEnergy);
    }
    let dt = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let mut ws = Workspace::new(n);
    let mut x = x0.to_vec();
    let mut m = DMatrix::identity(d, d);
    let mut traj = CocycleTrajectory {
        start: x0.to_vec(),
        dt,
        steps,
        times: vec![0.0],
        points: vec![x.clone()],
        cocycles: vec![SymplecticMatrix::identity(n)],
        lift: vec![0.0],
        max_energy_drift: 0.0,
        max_phase_step: 0.0,
    };
    let mut phase = 0.0;
    let mut total = 0.0;
    for step in 1..=steps {
        rk4_step(field, &mut x, &mut m, dt, &mut ws);
        let next = unitary_part_phase(&m);
        let jump = wrap_angle(next - phase);
        if jump.abs() >= 0.5 * PI {
            return Err(PathError::UndersampledPath { index: step, jump }.into());
        }
        total += jump;
        phase = next;
        traj.max_phase_step = traj.max_phase_step.max(jump.abs() / (2.0 * PI));

        let record = step == steps || (record_every > 0 && step % record_every == 0);
        if step % PROJECT_EVERY == 0 || record {
            let h = field.value(&x);
            let drift = (h - h0).abs() / h0;
            traj.max_energy_drift = traj.max_energy_drift.max(drift);
            if !(drift <= ENERGY_TOL) {
                return Err(FlowError::EnergyDriftExceeded { time: step as f64 * dt, drift });
            }
            let scale = (h0 / h).sqrt();
            x.iter_mut().for_each(|v| *v *= scale);
            resymplectify(&mut m, &ws.omega);
            resymplectify(&mut m, &ws.omega);
        }
        if record {
            traj.times.push(step as f64 * dt);
            traj.points.push(x.clone());
            traj.cocycles.push(SymplecticMatrix::new(m.clone())?);
            traj.lift.push(total / (2.0 * PI));
        }
    }
    Ok(traj)
}

fn step_count(field: &dyn HamiltonianField, x0: &[f64], t_end: f64, options: &CocycleOptions) -> Result<usize> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(FlowError::InvalidParameters(format!("T = {t_end}")));
    }
    if x0.len() != 2 * field.n() {
        return Err(FlowError::InvalidParameters("start point dimension".into()));
    }
    let dt = match options.dt {
        Some(dt) if dt > 0.0 => dt,
        Some(dt) => return Err(FlowError::InvalidParameters(format!("dt = {dt}"))),
        None => suggested_dt(field, x0),
    };
    if t_end == 0.0 {
        return Ok(0);
    }
    let steps = (t_end / dt).ceil();
    if !(steps <= options.max_steps as f64) {
        return Err(FlowError::StepBudgetExceeded { steps: steps.min(usize::MAX as f64) as usize });
    }
    Ok((steps as usize).max(1))
}

pub fn integrate_cocycle(field: &dyn HamiltonianField, x0: &[f64], t_end: f64, dt: f64) -> Result<CocycleTrajectory> {
    integrate_cocycle_with(field, x0, t_end, &CocycleOptions { dt: Some(dt), ..Default::default() })
}

pub fn integrate_cocycle_with(
    field: &dyn HamiltonianField,
    x0: &[f64],
    t_end: f64,
    options: &CocycleOptions,
) -> Result<CocycleTrajectory> {
    let steps = step_count(field, x0, t_end, options)?;
    integrate_steps(field, x0, t_end, steps, options.record_every)
}

/// Ruelle estimate at one time in the convergence diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticPoint {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Volume average of `ũ_T/T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuelleEstimate {
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    pub estimate: f64,
    /// Combined standard uncertainty `√(mc² + discretization²)`.
    pub stderr: f64,
    pub mc_stderr: f64,
    /// Change of `ũ_T/T` under halving the step, largest over the probe samples.
    pub discretization_error: f64,
    /// Monte-Carlo estimate of `vol(X)` from the acceptance rate.
    pub volume_estimate: f64,
    pub acceptance_rate: f64,
    /// Estimates at `T/4`, `T/2` and `T`.
    pub diagnostics: Vec<DiagnosticPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    /// Samples re-integrated at half the step to measure discretization error.
    pub probes: usize,
    pub max_steps: usize,
}

impl EstimateOptions {
    pub fn new(t: f64, samples: usize, seed: u64) -> Self {
        Self { t, samples, seed, probes: 4, max_steps: 200_000_000 }
    }
}

/// Uniform point of `{0 < H ≤ 1}` for sample `index` and the number of draws it took.
pub fn sample_point(field: &dyn HamiltonianField, seed: u64, index: usize) -> Result<(Vec<f64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let bbox = field.bounding_box();
    for attempt in 1..=MAX_ATTEMPTS_PER_SAMPLE {
        let z: Vec<f64> = bbox.iter().map(|h| rng.random_range(-1.0..1.0) * h).collect();
        let h = field.value(&z);
        if h > 0.0 && h <= 1.0 {
            return Ok((z, attempt));
        }
    }
    Err(FlowError::SampleBudgetExhausted { accepted: 0, attempts: MAX_ATTEMPTS_PER_SAMPLE })
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn ruelle_estimate(field: &dyn HamiltonianField, t: f64, samples: usize, seed: u64) -> Result<RuelleEstimate> {
    ruelle_estimate_with(field, &EstimateOptions::new(t, samples, seed))
}

pub fn ruelle_estimate_with(field: &dyn HamiltonianField, options: &EstimateOptions) -> Result<RuelleEstimate> {
    let t = options.t;
    if !(t > 0.0 && t.is_finite()) || options.samples == 0 {
        return Err(FlowError::InvalidParameters(format!("T = {t}, samples = {}", options.samples)));
    }
    let cocycle_options = CocycleOptions { max_steps: options.max_steps, ..Default::default() };
    let run = |i: usize| -> Result<(usize, [f64; 3], f64)> {
        let (z, attempts) = sample_point(field, options.seed, i)?;
        let raw = step_count(field, &z, t, &cocycle_options)?;
        let steps = raw.div_ceil(4) * 4;
        let traj = integrate_steps(field, &z, t, steps, steps / 4)?;
        let u = [traj.lift[1] / (0.25 * t), traj.lift[2] / (0.5 * t), traj.lift[4] / t];
        let mut disc = 0.0;
        if i < options.probes {
            let fine = integrate_steps(field, &z, t, 2 * steps, 0)?;
            disc = (fine.final_lift() - traj.final_lift()).abs() / t;
        }
        Ok((attempts, u, disc))
    };
    let results: Vec<Result<(usize, [f64; 3], f64)>> = (0..options.samples).into_par_iter().map(run).collect();
    let mut attempts = 0;
    let mut values: [Vec<f64>; 3] = Default::default();
    let mut disc = 0.0f64;
    for r in results {
        let (a, u, e) = r?;
        attempts += a;
        for k in 0..3 {
            values[k].push(u[k]);
        }
        disc = disc.max(e);
    }
    let acceptance_rate = options.samples as f64 / attempts as f64;
    let box_volume: f64 = field.bounding_box().iter().map(|h| 2.0 * h).product();
    let diagnostics: Vec<DiagnosticPoint> = [0.25, 0.5, 1.0]
        .iter()
        .zip(&values)
        .map(|(f, v)| {
            let (estimate, stderr) = mean_stderr(v);
            DiagnosticPoint { t: f * t, estimate, stderr }
        })
        .collect();
    let (estimate, mc_stderr) = mean_stderr(&values[2]);
    Ok(RuelleEstimate {
        t,
        samples: options.samples,
        seed: options.seed,
        estimate,
        stderr: mc_stderr.hypot(disc),
        mc_stderr,
        discretization_error: disc,
        volume_estimate: acceptance_rate * box_volume,
        acceptance_rate,
        diagnostics,
    })
}

/// Both sides of `Ru ≤ (8n²/π)·∫ tr(∇²H)` as volume averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceBoundReport {
    pub ruelle: RuelleEstimate,
    /// Volume average of `(8n²/π)·tr(∇²H)`.
    pub bound: f64,
    pub bound_stderr: f64,
    pub holds: bool,
}

pub fn trace_bound_check(field: &dyn HamiltonianField, t: f64, samples: usize, seed: u64) -> Result<TraceBoundReport> {
    let n = field.n() as f64;
    let traces: Vec<Result<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let (z, _) = sample_point(field, seed, i)?;
            let h = field.hessian(&z);
            let eig = SymmetricEigen::new(h.clone()).eigenvalues;
            let min = eig.min();
            if min < -1e-8 * eig.amax().max(1.0) {
                return Err(FlowError::NotConvexField { eigenvalue: min, point: z });
            }
            Ok(h.trace())
        })
        .collect();
    let traces: Vec<f64> = traces.into_iter().collect::<Result<_>>()?;
    let (mean, se) = mean_stderr(&traces);
    let c = 8.0 * n * n / PI;
    let ruelle = ruelle_estimate(field, t, samples, seed)?;
    let (bound, bound_stderr) = (c * mean, c * se);
    let holds = ruelle.estimate <= bound + 3.0 * (ruelle.stderr + bound_stderr);
    Ok(TraceBoundReport { ruelle, bound, bound_stderr, holds })
}

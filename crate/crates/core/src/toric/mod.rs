//! Toric domains `X_Ω = μ⁻¹(Ω)` with `μ(z) = π(|z_1|², …, |z_n|²)`.
//!
//! Every quantity here is computed from the canonical function `f_Ω`, the
//! degree-one homogeneous function with `f_Ω = 1` on the outer boundary `∂₊Ω`.

mod geometry;
mod integrals;
mod orbits;
mod region;
mod systole;

pub use geometry::{
    is_concave, is_convex, is_strictly_monotone, simplex_lattice, MonotonicityReport, ShapeReport,
    DEFAULT_SHAPE_SAMPLES,
};
pub use integrals::{laplacian_functional, ruelle_density, ruelle_invariant_toric, volume_toric};
pub use orbits::{
    enumerate_orbits, lcz_toric_orbit, Frame, OrbitIndex, OrbitRecord, OrbitSearch,
};
pub use region::{Jet, MomentRegion, RadialProfile, RegionKind};
pub use systole::{
    bracket_on_closure, systole_bracket, systole_concave, systole_concave_with, BracketResult,
    SystoleOptions, SystoleResult,
};

use crate::paths::PathError;
use crate::quadrature::QuadratureError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToricError {
    #[error("canonical function evaluated at the origin")]
    EvaluationAtOrigin,
    #[error("point lies outside the closed positive orthant")]
    OutsideOrthant,
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("ellipsoid widths must be sorted ascending")]
    UnsortedWidths,
    #[error("quadrature failed: {0}")]
    QuadratureFailure(#[from] QuadratureError),
    #[error("Hessian integrability guard: p = {p} < 1/2")]
    NonIntegrableHessian { p: f64 },
    #[error("region failed the sampled concavity certificate near {witness:?}")]
    NotConcave { witness: Vec<f64> },
    #[error("region is not strictly monotone at {witness:?}")]
    NotStrictlyMonotone { witness: Vec<f64> },
    #[error("enumeration budget exceeded; best value so far {best} at {minimizer:?}")]
    EnumerationBudgetExceeded { best: f64, minimizer: Vec<u64> },
    #[error("orbit refinement did not converge for support {support:?}, winding {winding:?}")]
    ResolutionTooCoarse { support: Vec<usize>, winding: Vec<u64> },
    #[error("bracket needs a nonzero vector with {n} nonnegative entries")]
    InvalidVector { n: usize },
    #[error("orbit record is inconsistent with the region: {0}")]
    InconsistentRecord(String),
    #[error(transparent)]
    Path(#[from] PathError),
}

pub type Result<T> = std::result::Result<T, ToricError>;

/// Evaluator for `f_Ω`, `∇f_Ω` and `∇²f_Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFunction {
    region: MomentRegion,
}

/// The canonical function of a region.
pub fn canonical_function(region: &MomentRegion) -> CanonicalFunction {
    CanonicalFunction { region: region.clone() }
}

impl CanonicalFunction {
    pub fn region(&self) -> &MomentRegion {
        &self.region
    }

    pub fn n(&self) -> usize {
        self.region.n()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.region.value(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.region.gradient(x)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.region.hessian(x)
    }

    pub fn jet(&self, x: &[f64], order: u8) -> Result<Jet> {
        self.region.jet(x, order)
    }
}

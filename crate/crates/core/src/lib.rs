//! Ruelle invariant, systole, volume and index computations for star-shaped
//! and toric domains in C^n.

pub mod convexity;
pub mod flows;
pub mod paths;
pub mod quadrature;
pub mod symplin;
pub mod toric;

pub use convexity::{ConvexityError, CounterexampleSpec, InequalityReport, Verdict};
pub use flows::{FlowError, HamiltonianField, RuelleEstimate, ToricField};
pub use paths::{BlockIndex, IndexResult, PathError, SymplecticPath};
pub use quadrature::{Estimate, QuadratureError, QuadratureSpec};
pub use symplin::{LieAlgebraElement, SymplecticMatrix, SymplinError};
pub use toric::{MomentRegion, OrbitRecord, ToricError};

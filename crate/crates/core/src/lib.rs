//! Teleparallel geometry of crystal defects.
//!
//! The crate builds metric-affine objects (coframes, connections, torsion,
//! non-metricity, curvature) from user-defined fields, decomposes them into
//! defect densities, evaluates the kinematic identities that follow from the
//! Bianchi identities, and computes elastic quantities and the defect free
//! energy.
//!
//! Derivatives are exact: fields are evaluated on truncated Taylor jets
//! ([`jet::Jet`]), so stacking several exterior derivatives costs polynomial
//! arithmetic rather than nested finite differences. A finite-difference
//! strategy is available for opaque functions.

pub mod commands;
pub mod defects;
pub mod elasticity;
pub mod energy;
pub mod expr;
pub mod exterior;
pub mod field;
pub mod geometry;
pub mod jet;
pub mod kinematics;
pub mod report;
pub mod sampling;
pub mod scenario;

use thiserror::Error;

pub use exterior::{FormError, FrameIndex, KForm};
pub use field::{Field, Point, Strategy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Parse(#[from] expr::ParseError),
    #[error(transparent)]
    Eval(#[from] expr::EvalError),
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error("singular triad at {0}: |det h| = {1:e}")]
    SingularTriad(Point, f64),
    #[error("singular gauge matrix at {0}: |det| = {1:e}")]
    SingularGauge(Point, f64),
    #[error("singular deformation gradient at {0}: |det| = {1:e}")]
    SingularDeformation(Point, f64),
    #[error("forward-map inversion did not converge at {0} (residual {1:e})")]
    NewtonFailure(Point, f64),
    #[error("derivative order {requested} exceeds the available depth {available}")]
    DerivativeDepthExceeded { requested: usize, available: usize },
    #[error("anisotropic elasticity is not supported (kappa = {0})")]
    AnisotropyNotSupported(f64),
    #[error("invalid material constants: {0}")]
    InvalidMaterial(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

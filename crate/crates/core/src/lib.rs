//! Finite-dimensional reduction of the small-parameter Dirichlet Yang-Mills
//! problem on the unit 4-ball.
//!
//! The crate evaluates the harmonic fields attached to a concentration point
//! `p`, the interaction landscape `F(p)`, `M(A0,p)`, the critical rotations of
//! `R -> Tr(RM)` on SO(3), and the reduced energy on the parameter space
//! `(p, R, lambda)`. Boundary connections are harmonic-polynomial 1-forms plus
//! a synthesis matrix, see [`boundary::BoundarySpec`].
//!
//! Runnable walkthroughs live in `examples/`; the `asd-landscape` binary
//! exposes the same operations on the command line.

pub mod app;
pub mod boundary;
pub mod critical;
pub mod forms;
pub mod harmonic;
pub mod landscape;
pub mod linalg;
pub mod quadrature;
pub mod reduced;
pub mod so3;
pub mod verify;

pub use boundary::{BoundarySpec, HMatrix, HarmonicPolyOneForm, Monomial};
pub use critical::{CategoryReport, CriticalRotation};
pub use forms::{AsdCoeffs, TwoForm};
pub use linalg::{Matrix3, SymSpectrum};
pub use quadrature::{IntegralResult, QuadratureSpec};
pub use so3::{Rotation, So3Vector};

/// A point of R^4, coordinates `x1..x4`.
pub type Point4 = [f64; 4];

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point {0:?} lies outside the admissible ball (|p| = {1})")]
    OutsideBall(Point4, f64),
    #[error("|p| = {0} below the small-|p| cutoff and the regrouped branch is disabled")]
    BelowCutoff(f64),
    #[error("index {0} out of range")]
    Index(usize),
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("non-finite integrand value at node {0:?}")]
    NonFinite(Vec<f64>),
    #[error("invalid quadrature spec: {0}")]
    BadSpec(String),
    #[error("component polynomial (lie {lie}, coord {coord}) is not harmonic")]
    NotHarmonic { lie: usize, coord: usize },
    #[error("boundary route requires a coclosed base connection (d*A0 not constant)")]
    NotCoclosed,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("hypothesis failure: {0}")]
    Hypothesis(String),
    #[error("no interior critical point: {0}")]
    NoInterior(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn norm4(x: &Point4) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt()
}

pub(crate) fn dot4(a: &Point4, b: &Point4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

//! Numerical laboratory for Delaunay constant-mean-curvature profile curves
//! along a closed geodesic: profile ODE integration with first-integral
//! tracking, quadrature verification of the averaged integral identities,
//! monodromy analysis of the linearized operator, two-parameter shooting
//! under curvature forcing, and the starting-point scan that locates CMC
//! candidates in rotationally symmetric model metrics.

// negated comparisons of the form `!(x > 0.0)` are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod delaunay;
pub mod error;
pub mod geometry;
pub mod identities;
pub mod linearization;
pub mod ode;
pub mod phase;
pub mod profiles;
pub mod quadrature;
pub mod shooting;

pub use delaunay::{DelaunayParameter, Period, ProfileState, SParamState, Trajectory};
pub use error::{CoreError, Result};
pub use geometry::{CurvatureAtPoint, FermiMetricSample, SurfaceMesh};
pub use identities::{AverageOneData, IdentityReport};
pub use linearization::{
    BoundaryJacobian, FundamentalPair, PeriodMatrix, PeriodicSolutionData, SensitivitySolution,
};
pub use phase::PhaseMap;
pub use profiles::Profile;
pub use shooting::{ForcedTrajectory, ForcingSpec, ScanResult, ShootingResult};

//! Finite element lab for the two-dimensional Stokes problem on uniform
//! triangulations of the unit square: Crouzeix-Raviart, enriched
//! Crouzeix-Raviart and row-wise Raviart-Thomas pseudostress discretizations,
//! postprocessing and eigenvalue expansions.

pub mod assembly;
pub mod checks;
pub mod error;
pub mod expansion;
pub mod fields;
pub mod mesh;
pub mod metrics;
pub mod quadrature;
pub mod recovery;
pub mod solver;
pub mod spaces;
pub mod sparse;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

pub use error::{Error, Result};
pub use fields::{AnalyticScalar, AnalyticTensor, AnalyticVector, Example1};
pub use mesh::{ElementGeometry, Triangulation};
pub use spaces::{DiscreteField, DofMap, SpaceKind, VelocityElement};

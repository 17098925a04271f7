//! Poincaré chaos expansions fitted by sparse regression on model evaluations
//! or partial derivatives, with Sobol' indices and derivative-based measures.

pub mod basis;
pub mod design;
pub mod error;
pub mod expansion;
pub mod marginals;
pub mod models;
pub mod numeric;
pub mod poincare1d;
pub mod sensitivity;
pub mod solver;

pub use basis::{BasisSet, MultiIndex, Truncation};
pub use design::ExperimentalDesign;
pub use error::{Error, Result};
pub use expansion::{Expansion, FitConfig, InputSpace, Provenance};
pub use marginals::{Family, Marginal, MarginalSpec};
pub use models::Model;
pub use poincare1d::PoincareBasis1D;
pub use sensitivity::SensitivityReport;
pub use solver::{FitResult, RegressionProblem};

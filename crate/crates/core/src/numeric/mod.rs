//! Small numerical building blocks shared by the spectral and regression code.

pub mod pencil;
pub mod quadrature;
pub mod spline;

pub use pencil::{smallest_generalized_eigenpairs, SymTridiagonal};
pub use quadrature::{composite, GaussRule};
pub use spline::ClampedSpline;

//! Periodic-grid tensor calculus on flat tori.

pub mod field;
pub mod grid;
pub mod metric;
pub mod norms;
pub mod ops;
pub mod snapshot;

pub use field::{sym_index, sym_len, sym_pairs, ScalarField, SymTensorField, VectorField};
pub use grid::{PeriodicGrid, Scheme};
pub use metric::MetricField;
pub use norms::{norm, NormKind};
pub use ops::{
    christoffel, curvature, divergence, divergence_adjoint, gradient, hessian, laplace_beltrami,
    lichnerowicz, scalar_curvature, trace, Christoffel, Curvature, TensorOperators,
};

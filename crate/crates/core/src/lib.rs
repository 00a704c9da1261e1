//! Grid-type and Bernstein copulas of arbitrary dimension.
//!
//! The crate covers the whole path from raw multivariate observations to
//! aggregate-loss quantiles:
//!
//! 1. [`fit`]: relative ranks, contingency tables and margin uniformization
//!    (closed-form least squares plus a shift-and-normalize correction);
//! 2. [`qp`]: the exact nonnegative least-squares uniformization by an
//!    active-set method;
//! 3. [`joint`]: the uniform-margin discrete joint and the grid-type,
//!    Bernstein and generic partition-of-unity copula densities it induces;
//! 4. [`sim`]: acceptance-rejection and direct samplers;
//! 5. [`risk`]: marginal loss models, aggregation and PML by return period.

pub mod basis;
pub mod datasets;
pub mod error;
pub mod fit;
pub mod io;
pub mod joint;
pub mod normal;
pub mod plot;
pub mod qp;
pub mod quadrature;
pub mod risk;
pub mod rng;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
pub use joint::{DensityBound, DensityKind, DiscreteJoint, Orientation};
pub use rng::RandomSource;
pub use tensor::Tensor;

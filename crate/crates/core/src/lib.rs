//! Numerical laboratory for weak-type Fourier multipliers on `T^N`, `Z^N`
//! and a periodic model of `R^N`.

pub mod corpus;
pub mod deleeuw;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod kernel;
pub mod lattice;
pub mod multiplier;
pub mod report;
pub mod suite;
pub mod transfer;
pub mod weak;

pub use error::{Error, Result};
pub use grid::{DiscreteSymbol, Domain, GridFunction, LineModel, Spectrum, TorusGrid, C64};
pub use kernel::KernelSpec;

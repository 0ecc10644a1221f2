//! Adiabatic and superadiabatic dynamics of a scalar field coupled to slowly
//! moving classical sources, evaluated on a discretised momentum grid.

pub mod coherent;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod grid;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod trajectory;

pub use error::{Error, Result};
pub use grid::{GridSpec, ModeGrid, RadialLayout};
pub use model::{couplings_at, dressed_energy, ground_energy, Couplings, SourceSystem};
pub use trajectory::Trajectory;

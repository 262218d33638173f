//! Locally isoperimetric partitions of the plane: construction, verification,
//! constrained minimization and lattice cross-checks.

pub mod bench;
pub mod constructions;
pub mod error;
pub mod geom;
pub mod grid;
pub mod io;
pub mod minimizer;
pub mod network;
pub mod sphere;

pub use error::{Error, Result};

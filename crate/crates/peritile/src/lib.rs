//! Lattice-periodic partitions of the plane: local, anisotropic and
//! non-local perimeter energies, reference constructions, numerical
//! minimization and regularity diagnostics.

mod cli;
pub mod constructions;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod functionals;
pub mod geom;
pub mod grid;
pub mod io;
pub mod lattice;
pub mod optimizer;
pub mod poly;

pub use error::{Error, Result};

/// CLI entry point; returns the process exit code.
pub fn run() -> i32 {
    cli::run()
}
pub use geom::Vec2;
pub use lattice::{Lattice, LatticeVector};

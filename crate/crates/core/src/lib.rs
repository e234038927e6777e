//! Numerical toolkit for desingularizing point vortices of the planar
//! incompressible Euler equation.
//!
//! The stream-function route: solve −Δu = ε⁻²(u − q^ε)₊^p with Dirichlet data
//! on gridded domains by Nehari-constrained minimization, extract the
//! vorticity diagnostics (total vorticity, core radii, concentration point,
//! energy), and compare ε-sweeps against the asymptotic expansions driven by
//! Green functions, Kirchhoff–Routh functions, the limiting radial profile,
//! and conformal capacity estimates.

pub mod capacity;
pub mod domain;
pub mod error;
pub mod geom;
pub mod green;
pub mod poisson;
pub mod radial_profile;
pub mod routh;
pub mod semilinear;

pub use error::{Error, Result};
pub use geom::Point;

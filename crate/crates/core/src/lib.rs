//! Numerical toolkit for gauge-field orbit spaces of SU(2) and SU(3).
//!
//! The crate is organised bottom-up:
//!
//! * [`liealg`]: su(2)/su(3) bases, structure constants, brackets, generated
//!   subalgebras, centralizers and adjoint rotations.
//! * [`strata`]: constant-field curvature, holonomy algebras and stratum
//!   classification against the isotropy tables of both groups.
//! * [`groundstate`]: the operator `R(A)`, the leading vacuum exponent
//!   `sigma = B^T (R.R)^(-1/2) B / g` evaluated spectrally and by quadrature,
//!   closed-form resolvents and parameter scans.
//! * [`constraints`]: the Gauss-law momentum map on a periodic cubic lattice,
//!   its derivative and adjoint, the quadratic charge condition and the
//!   associated subspace computations.

pub mod ansatz;
pub mod constraints;
mod error;
pub mod groundstate;
pub mod liealg;
pub mod linalg;
pub mod strata;

pub use ansatz::Ansatz;
pub use error::{Error, Result};
pub use liealg::{AlgebraElement, GroupId, GroupSpec, Subalgebra};
pub use strata::{ConstantField, HolonomyMode, StratumReport};

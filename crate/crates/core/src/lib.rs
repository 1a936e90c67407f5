//! Finite element simulation of the Navier–Stokes–Cahn–Hilliard system with
//! degenerate mobility on the unit square.
//!
//! Three time-stepping schemes are provided:
//!
//! * [`Scheme::Geps`]: mass-lumped potential terms, secant coefficients built
//!   from the singular functional `G_eps` (`G'' = 1/M_eps`).
//! * [`Scheme::Jeps`]: consistent potential terms, secant coefficients built
//!   from `J_eps` (`J'' = 1/sqrt(M_eps)`).
//! * [`Scheme::Cm`]: constant mobility reference scheme.
//!
//! Space is discretized with P1 elements for the phase field and chemical
//! potential and the P1-bubble/P1 mini element for velocity and pressure on a
//! structured right-triangle mesh. Each nonlinear step is solved by a
//! decoupled fixed-point iteration (phase field first, then the Stokes-like
//! fluid problem).

pub mod coeffs;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod fespace;
pub mod linsys;
pub mod mesh;
pub mod potentials;
pub mod quadrature;
pub mod schemes;

pub use error::{Error, Result};
pub use mesh::Mesh;
pub use potentials::PhysParams;
pub use schemes::{Params, Scheme, State, StepReport, Stepper};

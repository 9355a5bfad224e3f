//! Classical simulation of continuous-variable circuits with low symplectic
//! coherence by back-propagating quadrature polynomials.
//!
//! * [`quadpoly`]: exact algebra of noncommuting quadrature polynomials.
//! * [`symplectic`], [`circuit`]: Gaussian gates and the normalized circuit IR.
//! * [`pathprop`]: block-wise path back-propagation and a naive reference.
//! * [`moments`]: ordered Wick moments of Gaussian input states.
//! * [`fockoracle`]: truncated Fock-space reference simulator.
//! * [`circuit_file`], [`analysis`], [`gkp`]: text formats and reports used by the CLI.

pub mod analysis;
pub mod circuit;
pub mod circuit_file;
pub mod fockoracle;
pub mod gkp;
pub mod moments;
pub mod pathprop;
pub mod quadpoly;
pub mod symplectic;

pub use circuit::{CircuitElement, CircuitError, CircuitIR, OGammaBlock};
pub use moments::GaussianStateSpec;
pub use quadpoly::{Monomial, NCPolynomial, QuadKind, QuadVar, Substitution};
pub use symplectic::SymplecticGate;

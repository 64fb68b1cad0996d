//! Directed random-path representation of the three-dimensional XY model at
//! finite volume.
//!
//! The crate computes the same quantities in independent ways so that each can
//! be checked against the others: angle quadrature and per-bond Bessel sums
//! ([`spin_oracle`]), exact enumeration of directed flux configurations
//! ([`flux_graph`]), the switching bijections on graph pairs ([`switching`],
//! [`pairing`]), the lattice Green function behind the infrared bound
//! ([`infrared`]) and Monte Carlo samplers ([`mcmc`]).
//!
//! Conventions used throughout:
//!
//! * `H = -Σ_{k,l} J_{k,l} S_k·S_l` over ordered pairs, so an unordered bond
//!   carries `exp(2βJ cos φ)`.
//! * Each angle is integrated against `dθ/2π`, which makes `Z(β=0) = 1`.
//! * Plus boundary spins are folded into a single ghost site whose angle is
//!   integrated like any other; the magnetisation is `⟨S_x·S_ghost⟩`.

pub mod error;
pub mod flux_graph;
pub mod infrared;
pub mod lattice;
pub mod mcmc;
pub mod pairing;
pub mod rational;
pub mod spin_oracle;
pub mod switching;

pub use error::{Error, Result};
pub use flux_graph::{BoundarySpec, FluxConfig};
pub use lattice::{BoundaryCondition, CouplingTable, Lattice, Site, SiteOrder};
pub use rational::Rational;

pub(crate) fn serde_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

//! Dirichlet-to-Neumann operators of simply-connected planar domains.
//!
//! The crate builds the discrete operator `M_p` (boundary data of
//! `(p - Δ)u = 0` mapped to its normal derivative) in two independent ways:
//!
//! * [`dtn`]: the Schur complement of the P1 finite-element matrix `pM + K`
//!   onto the boundary nodes, diagonalized as the symmetric pencil
//!   `(S, M_b)`;
//! * [`greens`]: a boundary integral operator whose kernel is a truncated
//!   Robin-Laplacian eigen-expansion.
//!
//! Around those sit the analytic oracles ([`analytic`]), the corner-angle
//! prediction of large-`p` eigenvalue prefactors ([`conjecture`]) and the
//! spectral diagnostics ([`analysis`]).

pub mod analysis;
pub mod analytic;
pub mod conjecture;
pub mod dtn;
mod eigen;
mod error;
pub mod fem;
pub mod geometry;
pub mod greens;
pub mod mesh;
pub mod output;
pub mod par;

pub use error::{Error, Result};
pub use geometry::{Domain, DomainSpec, Point};
pub use mesh::Mesh;

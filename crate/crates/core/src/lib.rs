//! Real-space renormalization of Ising-type lattice systems.
//!
//! The crate computes block-spin transformations two ways: by exhaustive
//! enumeration on small windows ([`exact`]) and by a polymer/cluster expansion
//! ([`polymer`], [`cluster`]). [`bounds`] evaluates the closed-form
//! convergence, decay and linearization estimates that the expansion
//! certifies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cluster;
pub mod error;
pub mod exact;
pub mod interaction;
pub mod kernel;
pub mod lattice;
pub mod polymer;
pub mod walsh;

mod esu;
mod reduce;
mod ursell;

pub use bounds::BoundsContext;
pub use cluster::{ursell, ClusterExpansion, ExpansionModel, KpReport};
pub use error::{Error, Result};
pub use exact::{
    apply_linearization, jacobian_fd, ExactCaps, ExactEngine, JacobianTable,
    RenormalizedInteraction,
};
pub use interaction::{Boundary, Direction, Generator, Interaction};
pub use kernel::{Kernel, KernelKind, ValidationReport};
pub use lattice::{Blocking, Hypergraph, Lattice, SiteSet};
pub use polymer::{decorated_weights, enumerate_polymers, polymer_partition, Polymer, PolymerCaps};

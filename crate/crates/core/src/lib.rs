//! Weighted coupled cell networks over commutative monoids.
//!
//! A network assigns every ordered pair of cells a weight from a commutative
//! monoid; parallel edges combine with the monoid operation `∥`. On top of
//! that the crate decides balance of partitions, computes coarsest invariant
//! refinements, builds quotient networks, enumerates the lattice of balanced
//! partitions and simulates admissible dynamics.
//!
//! ```
//! use synchro::{cir, fixtures};
//!
//! let net = fixtures::resistor_six();
//! let top = cir::top(&net);
//! assert_eq!(net.format_partition(&top), "1,2;3;4;5,6");
//! ```

pub mod balance;
pub mod cir;
pub mod complexity;
pub mod dynamics;
pub mod fixtures;
pub mod lattice;
pub mod monoid;
pub mod network;
pub mod par;
pub mod partition;
pub mod testkit;
mod union_find;

pub use balance::{is_balanced, quotient, Balance, BalanceError, Counterexample};
pub use cir::{cir_partition, CirTrace};
pub use lattice::{enumerate_balanced, BalancedLattice, LatticeError};
pub use monoid::{MonoidElement, MonoidError, MonoidSpec};
pub use network::{Network, NetworkBuilder, NetworkError};
pub use par::Execution;
pub use partition::Partition;

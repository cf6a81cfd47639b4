//! Classification, construction and certification of k-connection genuine
//! multipartite entanglement.
//!
//! A pure `n`-party state is k-CGE when every subset of `k` parties has a
//! Schmidt rank large enough that no joint operation on at most `k` parties
//! can free a party from the rest. The crate provides the rank classifier,
//! the unitary that frees a party when the rank allows it, a two-layer
//! preparation circuit for arbitrary pure states, linear witnesses with
//! their noise thresholds, and graph bounds for networks of bipartite
//! entangled pairs.

pub mod classifier;
pub mod disentangler;
pub mod error;
pub mod json;
pub mod linalg;
pub mod network;
pub mod tensor;
pub mod witness;
pub mod zoo;

pub use error::{KcgeError, Result};
pub use tensor::{CMatrix, DensityMatrix, PartySubset, PureState, Tolerance, C64};

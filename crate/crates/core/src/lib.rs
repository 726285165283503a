//! Word embeddings built from cooccurrence statistics viewed through a
//! grand-canonical lens, together with an exact small-ensemble oracle for the
//! partition-function identities the construction relies on.
//!
//! The crate has two halves:
//!
//! * [`ensemble`] — exact enumeration of finite grand-canonical ensembles:
//!   log-partition values, microstate probabilities, count moments, and a toy
//!   reservoir model whose counting probabilities converge to the Boltzmann
//!   form as the reservoir grows.
//! * the embedding pipeline — [`corpus`] (tokenization and vocabulary),
//!   [`cooccur`] (windowed, optionally segment-weighted counting),
//!   [`weighting`] (shifted positive PMI), [`project`] (seeded sparse random
//!   projection), and [`eval`] (analogy and nearest-neighbor evaluation).
//!
//! All operations are pure functions of their inputs; matrices and embeddings
//! are immutable once built and safe to share across threads.

pub mod cooccur;
pub mod corpus;
pub mod ensemble;
pub mod eval;
pub mod matrix;
pub mod project;
pub mod weighting;

mod error;

pub use error::{Error, Result};

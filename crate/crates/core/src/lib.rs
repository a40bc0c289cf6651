//! Desk-scale simulator of federated edge intelligence for semantic-aware
//! networking.
//!
//! Two experiment families are supported end to end:
//!
//! * collaborative training of a small CNN digit recognizer across simulated
//!   edge servers (FedAvg-style parameter averaging) with per-server resource
//!   accounting — running time, local storage, labeled samples;
//! * knowledge-graph label compression, where a source transmits a subset of
//!   node labels and the destination recovers the rest with a two-layer
//!   graph convolutional network over a shared graph structure, measured by
//!   compression rate and Hamming distortion.
//!
//! The numeric stack (dense tensors, CSR sparse matrices, conv/pool/softmax
//! layers with manual backprop, finite-difference gradient checking) is
//! self-contained; the dense matrix product is backed by `matrixmultiply`.

pub mod checkpoint;
pub mod cnn;
pub mod datasets;
pub mod error;
pub mod federation;
pub mod gcn;
pub mod numerics;
pub mod semantics;
pub mod util;

pub use error::{Error, Result};
pub use numerics::precision::Precision;
pub use numerics::sparse::SparseMatrix;
pub use numerics::tensor::Tensor;

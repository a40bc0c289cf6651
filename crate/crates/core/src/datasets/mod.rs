//! Experiment corpora: MNIST-style IDX images, LINQS-layout citation
//! graphs, and IID partitioning of samples across simulated edge servers.

pub mod citation;
pub mod mnist;
pub mod partition;

pub use citation::{load_linqs_citation, KnowledgeGraph};
pub use mnist::{load_mnist_idx, LabeledImageSet, Split};
pub use partition::{partition_iid, Shard};

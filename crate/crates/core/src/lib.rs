//! Node classification in topologically heterogeneous networks.
//!
//! Every node is viewed through random-walk lenses of several sizes. Each walk's subgraph is
//! turned into a canonical adjacency image and classified; the per-lens labels are tallied
//! per node, weighted (by a linear program or by lens accuracy), and reduced to a
//! threshold-trimmed top-k label set.

pub mod aggregation;
pub mod classifier;
pub mod embedding;
pub mod evaluation;
pub mod experiment;
pub mod graph;
pub mod lens;
pub mod simplex;
pub mod testbed;
pub mod walk;

pub use embedding::{canonical_order, embed_image, BitImage};
pub use classifier::{ClassCatalog, Classifier};
pub use graph::{parse_edge_list, read_graph_store, Graph, NodeId};
pub use walk::{random_walk_sample, WalkSample};

//! Topological divergence between the prompt and response parts of an
//! attention graph, and selection of the attention heads whose divergence
//! separates hallucinated responses from grounded ones.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the divergence
//! cache, and the command line live in the companion `toha` crate.
//!
//! A typical flow:
//!
//! ```
//! use toha_core::{DistanceGraph, mtop_div};
//!
//! // Packed lower-triangular attention rows of a 3-token map.
//! let weights = [1.0_f64, 0.3, 0.7, 0.2, 0.5, 0.3];
//! let graph = DistanceGraph::from_attention(&weights, 3, 1).unwrap();
//! let msf = mtop_div(&graph);
//! assert!((msf.total_length - 1.2).abs() < 1e-12);
//! ```
#![no_std]

extern crate alloc;

pub mod auroc;
pub mod dsu;
pub mod error;
pub mod graph;
pub mod msf;
pub mod selection;

pub use auroc::auroc;
pub use error::{GraphError, SelectionError};
pub use graph::{packed_len, DistanceGraph};
pub use msf::{
    barcode0, full_mst_length, mst_length, mtop_div, mtop_div_kruskal, mtop_div_prim,
    normalized_divergence, prompt_mst_length, Barcode0, Interval, MsfEdge, MsfResult,
    PRIM_THRESHOLD,
};
pub use selection::{
    delta, predict, select_heads, DivergenceTable, HeadId, SelectionResult, DEFAULT_N_MAX,
};

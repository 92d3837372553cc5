//! Files, caches, and orchestration around `toha-core`: the ATTG attention
//! container, the dataset manifest, the divergence cache, synthetic
//! planted datasets, and the steps behind the `toha` command line.

pub mod cache;
pub mod container;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod synth;

pub use cache::{load_table, read_cache, rows_to_table, write_cache, CacheRow};
pub use container::{
    read_container, read_container_file, write_container, write_container_file, AttentionContainer,
    ContainerHeader,
};
pub use error::{ContainerError, Error, Result};
pub use manifest::{read_manifest, read_manifest_unchecked, write_manifest, Manifest, SampleEntry};
pub use pipeline::{ScoreVariant, SelectionReport};
pub use synth::{SyntheticGenerator, SyntheticSpec};
pub use toha_core;

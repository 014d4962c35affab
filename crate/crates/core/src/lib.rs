//! Inferential decomposition toolkit: decompose utterances with a prompted
//! generation backend, embed and aggregate the results, and use them for
//! similarity benchmarks, clustering, topic filtering and co-vote modeling.

pub mod cluster;
pub mod corpus;
pub mod covote;
pub mod decomposer;
pub mod embedder;
pub mod error;
pub mod http;
pub mod optim;
pub mod simeval;
pub mod text;
pub mod topics;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! Error-bounded lossy compression of nodal scalar fields on triangle and
//! tetrahedral meshes, with continuous (cell-integrated) error metrics.

pub mod backend;
pub mod baseline;
pub mod bench;
pub mod bitstream;
pub mod codec;
pub mod error;
pub mod huffman;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod traversal;

pub use backend::Backend;
pub use bitstream::{PayloadHeader, Predictor};
pub use codec::{QuantizerConfig, END_MARK};
pub use error::{Error, Result};
pub use mesh::{ScalarField, SimplicialMesh};
pub use metrics::MetricsReport;
pub use pipeline::{compress_field, decompress_payload, CompressOptions, ErrorBound};
pub use traversal::{SeedPolicy, SequenceSet};

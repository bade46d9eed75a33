//! End-to-end compression of a field into a container and back.

use crate::backend::Backend;
use crate::baseline;
use crate::bitstream::{self, PayloadHeader, Predictor};
use crate::codec::{QuantizerConfig, DEFAULT_CODE_BITS};
use crate::error::{Error, Result};
use crate::mesh::{ScalarField, SimplicialMesh};
use crate::traversal::{self, SeedPolicy, TraversalStats};

/// Error bound, either absolute or as a percentage of the field's value range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorBound {
    Absolute(f64),
    RelativePercent(f64),
}

impl ErrorBound {
    pub fn resolve(self, field: &ScalarField) -> Result<f64> {
        let xi = match self {
            ErrorBound::Absolute(xi) => xi,
            ErrorBound::RelativePercent(p) => {
                let range = field.value_range();
                if range == 0.0 {
                    return Err(Error::InvalidValue(
                        "relative error bound on a constant field; use an absolute bound".into(),
                    ));
                }
                p / 100.0 * range
            }
        };
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::InvalidValue(format!(
                "error bound must be positive and finite, got {xi}"
            )));
        }
        Ok(xi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressOptions {
    pub error_bound: ErrorBound,
    pub code_bits: u32,
    pub backend: Backend,
    pub predictor: Predictor,
    pub seed_policy: SeedPolicy,
}

impl CompressOptions {
    pub fn new(error_bound: ErrorBound) -> Self {
        CompressOptions {
            error_bound,
            code_bits: DEFAULT_CODE_BITS,
            backend: Backend::default(),
            predictor: Predictor::default(),
            seed_policy: SeedPolicy::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Compressed {
    pub bytes: Vec<u8>,
    pub header: PayloadHeader,
    /// The values a decoder will reconstruct.
    pub decompressed: Vec<f64>,
    /// Present for the traversal predictor.
    pub stats: Option<TraversalStats>,
}

pub fn compress_field(
    mesh: &SimplicialMesh,
    field: &ScalarField,
    options: &CompressOptions,
) -> Result<Compressed> {
    field.check_matches(mesh)?;
    let xi = options.error_bound.resolve(field)?;
    let config = QuantizerConfig::new(xi, options.code_bits)?;
    let mut header = PayloadHeader::for_mesh(mesh, &config);
    header.backend = options.backend;
    header.predictor = options.predictor;
    let (sequences, decompressed, stats) = match options.predictor {
        Predictor::Traversal => {
            header.seed_policy = options.seed_policy;
            let out = traversal::compress_with_policy(mesh, field, &config, options.seed_policy)?;
            (out.sequences, out.decompressed, Some(out.stats))
        }
        Predictor::Linear1d => {
            let out = baseline::compress_linear(field, &config)?;
            (out.sequences, out.decompressed, None)
        }
    };
    header.sequence_count = sequences.len();
    let bytes = bitstream::encode(&sequences, &header)?;
    Ok(Compressed {
        bytes,
        header,
        decompressed,
        stats,
    })
}

/// Decodes a container against the mesh it was produced for.
pub fn decompress_payload(
    mesh: &SimplicialMesh,
    bytes: &[u8],
) -> Result<(ScalarField, PayloadHeader)> {
    let (sequences, header) = bitstream::decode(bytes)?;
    header.verify_mesh(mesh)?;
    let config = header.quantizer()?;
    let field = match header.predictor {
        Predictor::Traversal => {
            traversal::decompress_with_policy(mesh, &sequences, &config, header.seed_policy)?
        }
        Predictor::Linear1d => {
            baseline::decompress_linear(&sequences, &config, mesh.vertex_count())?
        }
    };
    Ok((field, header))
}

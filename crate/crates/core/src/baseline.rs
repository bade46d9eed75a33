//! One-dimensional reference predictor: each value is predicted by the
//! previously reconstructed value in vertex-index order, ignoring the mesh.
//! An unpredictable value closes the current sequence and seeds the next.

use crate::codec::{dequantize, quantize, QuantizeOutcome, QuantizerConfig, END_MARK};
use crate::error::{Error, Result};
use crate::mesh::ScalarField;
use crate::traversal::{Sequence, SequenceSet};

#[derive(Debug, Clone)]
pub struct LinearOutput {
    pub sequences: SequenceSet,
    pub decompressed: Vec<f64>,
}

pub fn compress_linear(field: &ScalarField, config: &QuantizerConfig) -> Result<LinearOutput> {
    let values = field.values();
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sequences = Vec::new();
    let mut decompressed = Vec::with_capacity(values.len());
    let mut current = Sequence {
        seed_values: vec![values[0]],
        codes: Vec::new(),
    };
    decompressed.push(values[0]);
    for &a in &values[1..] {
        let prev = *decompressed.last().unwrap();
        match quantize(config, prev, a)? {
            QuantizeOutcome::Predictable {
                code,
                reconstructed,
            } => {
                current.codes.push(code);
                decompressed.push(reconstructed);
            }
            QuantizeOutcome::Unpredictable => {
                current.codes.push(END_MARK);
                sequences.push(std::mem::replace(
                    &mut current,
                    Sequence {
                        seed_values: vec![a],
                        codes: Vec::new(),
                    },
                ));
                decompressed.push(a);
            }
        }
    }
    current.codes.push(END_MARK);
    sequences.push(current);
    Ok(LinearOutput {
        sequences: SequenceSet { sequences },
        decompressed,
    })
}

pub fn decompress_linear(
    sequences: &SequenceSet,
    config: &QuantizerConfig,
    vertex_count: usize,
) -> Result<ScalarField> {
    sequences.validate(1)?;
    let mut out = Vec::with_capacity(vertex_count);
    for s in &sequences.sequences {
        let mut prev = s.seed_values[0];
        out.push(prev);
        for &code in &s.codes[..s.codes.len() - 1] {
            prev = dequantize(config, prev, code)?;
            out.push(prev);
        }
        if out.len() > vertex_count {
            return Err(Error::corrupt(
                0,
                "stream restores more values than vertices",
            ));
        }
    }
    if out.len() != vertex_count {
        return Err(Error::LengthMismatch {
            expected: vertex_count,
            found: out.len(),
        });
    }
    ScalarField::new("decompressed", out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_ramp_is_one_sequence() {
        let f = ScalarField::new("r", (0..100).map(|i| i as f64 * 0.01).collect()).unwrap();
        let cfg = QuantizerConfig::new(0.001, 16).unwrap();
        let out = compress_linear(&f, &cfg).unwrap();
        assert_eq!(out.sequences.len(), 1);
        assert_eq!(out.sequences.code_count(), 100);
        let back = decompress_linear(&out.sequences, &cfg, 100).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 0.001);
        }
        assert_eq!(back.values(), &out.decompressed[..]);
    }

    #[test]
    fn jump_starts_new_sequence() {
        let f = ScalarField::new("j", vec![0.0, 0.1, 1e9, 1e9]).unwrap();
        let cfg = QuantizerConfig::new(0.01, 8).unwrap();
        let out = compress_linear(&f, &cfg).unwrap();
        assert_eq!(out.sequences.len(), 2);
        assert_eq!(out.sequences.sequences[1].seed_values, vec![1e9]);
        assert_eq!(out.decompressed[2], 1e9);
        let back = decompress_linear(&out.sequences, &cfg, 4).unwrap();
        assert_eq!(back.values(), &out.decompressed[..]);
        assert!(decompress_linear(&out.sequences, &cfg, 5).is_err());
        assert!(decompress_linear(&out.sequences, &cfg, 3).is_err());
    }
}

//! Error-controlled linear-scaling quantization.
//!
//! The axis around a predicted value is cut into intervals of width `2ξ`,
//! each centred on `predicted + k·2ξ`. The interval containing the predicted
//! value itself gets code `2^(m-1)`; neighbours get consecutive integers.
//! Valid codes are `1..=2^m - 1`; code `0` is reserved as the sequence end
//! mark.

use crate::error::{Error, Result};

/// Reserved code terminating a traversal sequence.
pub const END_MARK: u32 = 0;

pub const DEFAULT_CODE_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerConfig {
    error_bound: f64,
    code_bits: u32,
}

impl QuantizerConfig {
    pub fn new(error_bound: f64, code_bits: u32) -> Result<Self> {
        if !(error_bound.is_finite() && error_bound > 0.0) {
            return Err(Error::InvalidValue(format!(
                "error bound must be positive and finite, got {error_bound}"
            )));
        }
        if !(1..=32).contains(&code_bits) {
            return Err(Error::InvalidValue(format!(
                "code width must be in 1..=32 bits, got {code_bits}"
            )));
        }
        Ok(QuantizerConfig {
            error_bound,
            code_bits,
        })
    }

    pub fn with_error_bound(error_bound: f64) -> Result<Self> {
        Self::new(error_bound, DEFAULT_CODE_BITS)
    }

    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }

    pub fn code_bits(&self) -> u32 {
        self.code_bits
    }

    /// `2^(m-1)`: the code of the interval centred on the prediction.
    pub fn center_code(&self) -> u32 {
        1u32 << (self.code_bits - 1)
    }

    /// `2^m - 1`.
    pub fn max_code(&self) -> u32 {
        ((1u64 << self.code_bits) - 1) as u32
    }

    pub fn end_mark_code(&self) -> u32 {
        END_MARK
    }

    pub fn is_valid_code(&self, code: u32) -> bool {
        code >= 1 && code <= self.max_code()
    }

    fn reconstruct(&self, predicted: f64, code: u32) -> f64 {
        let offset = i64::from(code) - i64::from(self.center_code());
        predicted + offset as f64 * (2.0 * self.error_bound)
    }
}

/// Result of quantizing one value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantizeOutcome {
    Predictable { code: u32, reconstructed: f64 },
    Unpredictable,
}

impl QuantizeOutcome {
    pub fn is_predictable(&self) -> bool {
        matches!(self, QuantizeOutcome::Predictable { .. })
    }

    pub fn code(&self) -> Option<u32> {
        match self {
            QuantizeOutcome::Predictable { code, .. } => Some(*code),
            QuantizeOutcome::Unpredictable => None,
        }
    }

    pub fn reconstructed(&self) -> Option<f64> {
        match self {
            QuantizeOutcome::Predictable { reconstructed, .. } => Some(*reconstructed),
            QuantizeOutcome::Unpredictable => None,
        }
    }
}

/// Quantizes `actual` against `predicted`.
///
/// The outcome is predictable only when the code is in range and the
/// floating-point reconstruction is within the error bound.
pub fn quantize(config: &QuantizerConfig, predicted: f64, actual: f64) -> Result<QuantizeOutcome> {
    if !predicted.is_finite() || !actual.is_finite() {
        return Err(Error::InvalidValue(format!(
            "cannot quantize non-finite values (predicted {predicted}, actual {actual})"
        )));
    }
    let steps = ((actual - predicted) / (2.0 * config.error_bound)).round();
    let center = f64::from(config.center_code());
    let code = center + steps;
    if !(code >= 1.0 && code <= f64::from(config.max_code())) {
        return Ok(QuantizeOutcome::Unpredictable);
    }
    let code = code as u32;
    let reconstructed = config.reconstruct(predicted, code);
    if reconstructed.is_finite() && (reconstructed - actual).abs() <= config.error_bound {
        Ok(QuantizeOutcome::Predictable {
            code,
            reconstructed,
        })
    } else {
        Ok(QuantizeOutcome::Unpredictable)
    }
}

/// Inverse of [`quantize`]: depends only on the prediction, the code and the
/// configuration.
pub fn dequantize(config: &QuantizerConfig, predicted: f64, code: u32) -> Result<f64> {
    if !config.is_valid_code(code) {
        return Err(Error::corrupt(
            0,
            format!("quantization code {code} outside 1..={}", config.max_code()),
        ));
    }
    Ok(config.reconstruct(predicted, code))
}

//! Lossless back ends applied over the serialized sequence body.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Backend {
    Identity,
    Deflate,
    #[default]
    Zstd,
}

const ZSTD_LEVEL: i32 = 19;

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Identity, Backend::Deflate, Backend::Zstd];

    /// Container header byte.
    pub fn id(self) -> u8 {
        match self {
            Backend::Identity => 0,
            Backend::Deflate => 1,
            Backend::Zstd => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::Identity => "none",
            Backend::Deflate => "deflate",
            Backend::Zstd => "zstd",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "none" | "identity" => Some(Backend::Identity),
            "deflate" => Some(Backend::Deflate),
            "zstd" => Some(Backend::Zstd),
            _ => None,
        }
    }

    pub fn compress(self, raw: &[u8]) -> Result<Vec<u8>> {
        match self {
            Backend::Identity => Ok(raw.to_vec()),
            Backend::Deflate => {
                let mut enc =
                    flate2::write::DeflateEncoder::new(Vec::new(), flate2::Compression::best());
                enc.write_all(raw)?;
                Ok(enc.finish()?)
            }
            Backend::Zstd => Ok(zstd::bulk::compress(raw, ZSTD_LEVEL)?),
        }
    }

    /// Inverts [`Backend::compress`]; output must be exactly `expected_len`
    /// bytes.
    pub fn decompress(self, data: &[u8], expected_len: usize, position: usize) -> Result<Vec<u8>> {
        let out = match self {
            Backend::Identity => data.to_vec(),
            Backend::Deflate => {
                let mut out = Vec::new();
                flate2::read::DeflateDecoder::new(data)
                    .take(expected_len as u64 + 1)
                    .read_to_end(&mut out)
                    .map_err(|e| Error::corrupt(position, format!("deflate: {e}")))?;
                out
            }
            Backend::Zstd => zstd::bulk::decompress(data, expected_len)
                .map_err(|e| Error::corrupt(position, format!("zstd: {e}")))?,
        };
        if out.len() != expected_len {
            return Err(Error::corrupt(
                position,
                format!(
                    "{} body inflated to {} bytes, header says {expected_len}",
                    self.name(),
                    out.len()
                ),
            ));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_backend_round_trips() {
        let raw: Vec<u8> = (0..5000u32).map(|i| (i * 7 % 13) as u8).collect();
        for b in Backend::ALL {
            let packed = b.compress(&raw).unwrap();
            assert_eq!(b.decompress(&packed, raw.len(), 0).unwrap(), raw);
            assert_eq!(Backend::from_id(b.id()), Some(b));
            assert_eq!(Backend::from_name(b.name()), Some(b));
        }
        assert_eq!(Backend::from_id(9), None);
    }

    #[test]
    fn wrong_length_is_corrupt() {
        let raw = vec![1u8; 100];
        for b in Backend::ALL {
            let packed = b.compress(&raw).unwrap();
            assert!(b.decompress(&packed, 99, 0).is_err());
            assert!(b.decompress(&packed, 101, 0).is_err());
        }
        assert!(Backend::Zstd.decompress(b"garbage", 10, 0).is_err());
        assert!(Backend::Deflate.decompress(&[0xff; 8], 10, 0).is_err());
    }
}

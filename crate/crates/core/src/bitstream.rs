//! The `.umz` container: fixed little-endian header, then a back-end
//! compressed body holding the raw seed values and the Huffman-coded stream
//! of quantization codes and end marks. See `FORMAT.md` for the byte layout.

use crate::backend::Backend;
use crate::codec::{QuantizerConfig, END_MARK};
use crate::error::{Error, Result};
use crate::huffman::{self, Reader};
use crate::mesh::SimplicialMesh;
use crate::traversal::{SeedPolicy, Sequence, SequenceSet};

pub const MAGIC: [u8; 4] = *b"UMZ\x1a";
pub const VERSION: u8 = 1;
/// Size of the fixed header in bytes.
pub const HEADER_LEN: usize = 4 + 1 + 1 + 1 + 1 + 8 + 1 + 1 + 8 + 8 + 8 + 8 + 16 + 8 + 4 + 8;

/// Which predictor produced the sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Predictor {
    /// Dual-graph traversal with barycentric extrapolation.
    #[default]
    Traversal,
    /// Previous-value prediction over the vertex array in index order.
    Linear1d,
}

impl Predictor {
    pub fn id(self) -> u8 {
        match self {
            Predictor::Traversal => 0,
            Predictor::Linear1d => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Predictor::Traversal),
            1 => Some(Predictor::Linear1d),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Predictor::Traversal => "traversal",
            Predictor::Linear1d => "linear1d",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "traversal" => Some(Predictor::Traversal),
            "linear1d" => Some(Predictor::Linear1d),
            _ => None,
        }
    }

    /// Seed values stored per sequence.
    pub fn seed_width(self, dimension: usize) -> usize {
        match self {
            Predictor::Traversal => dimension + 1,
            Predictor::Linear1d => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadHeader {
    pub backend: Backend,
    pub predictor: Predictor,
    pub seed_policy: SeedPolicy,
    pub dimension: usize,
    pub code_bits: u32,
    pub vertex_count: usize,
    pub cell_count: usize,
    pub error_bound: f64,
    pub sequence_count: usize,
    pub mesh_digest: [u8; 16],
}

impl PayloadHeader {
    /// Header for a payload compressed against `mesh`; `sequence_count` is
    /// filled in by [`encode`].
    pub fn for_mesh(mesh: &SimplicialMesh, config: &QuantizerConfig) -> Self {
        PayloadHeader {
            backend: Backend::default(),
            predictor: Predictor::default(),
            seed_policy: SeedPolicy::default(),
            dimension: mesh.dimension(),
            code_bits: config.code_bits(),
            vertex_count: mesh.vertex_count(),
            cell_count: mesh.cell_count(),
            error_bound: config.error_bound(),
            sequence_count: 0,
            mesh_digest: mesh.digest(),
        }
    }

    pub fn quantizer(&self) -> Result<QuantizerConfig> {
        QuantizerConfig::new(self.error_bound, self.code_bits)
    }

    pub fn seed_width(&self) -> usize {
        self.predictor.seed_width(self.dimension)
    }

    /// Refuses a mesh other than the one the payload was produced against.
    pub fn verify_mesh(&self, mesh: &SimplicialMesh) -> Result<()> {
        if self.dimension != mesh.dimension()
            || self.vertex_count != mesh.vertex_count()
            || self.cell_count != mesh.cell_count()
            || self.mesh_digest != mesh.digest()
        {
            return Err(Error::DigestMismatch);
        }
        Ok(())
    }
}

/// Serializes `sequences` into a self-contained container.
pub fn encode(sequences: &SequenceSet, header: &PayloadHeader) -> Result<Vec<u8>> {
    let width = header.seed_width();
    sequences.validate(width)?;

    let mut body = Vec::new();
    body.extend_from_slice(&(sequences.seed_value_count() as u64).to_le_bytes());
    for s in &sequences.sequences {
        for v in &s.seed_values {
            body.extend_from_slice(&v.to_le_bytes());
        }
    }
    let codes: Vec<u32> = sequences
        .sequences
        .iter()
        .flat_map(|s| s.codes.iter().copied())
        .collect();
    huffman::encode_block(&codes, &mut body);
    let packed = header.backend.compress(&body)?;

    let mut out = Vec::with_capacity(HEADER_LEN + packed.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(header.backend.id());
    out.push(header.predictor.id());
    let (policy, rng_seed) = match header.seed_policy {
        SeedPolicy::MinIndex => (0u8, 0u64),
        SeedPolicy::Random(s) => (1u8, s),
    };
    out.push(policy);
    out.extend_from_slice(&rng_seed.to_le_bytes());
    out.push(header.dimension as u8);
    out.push(header.code_bits as u8);
    out.extend_from_slice(&(header.vertex_count as u64).to_le_bytes());
    out.extend_from_slice(&(header.cell_count as u64).to_le_bytes());
    out.extend_from_slice(&header.error_bound.to_le_bytes());
    out.extend_from_slice(&(sequences.len() as u64).to_le_bytes());
    out.extend_from_slice(&header.mesh_digest);
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    out.extend_from_slice(&(packed.len() as u64).to_le_bytes());
    debug_assert_eq!(out.len(), HEADER_LEN);
    out.extend_from_slice(&packed);
    Ok(out)
}

fn usize_field(v: u64, pos: usize, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::corrupt(pos, format!("{what} {v} out of range")))
}

/// Parses only the fixed header.
pub fn decode_header(bytes: &[u8]) -> Result<PayloadHeader> {
    decode_header_inner(&mut Reader::new(bytes, 0)).map(|(h, _, _, _)| h)
}

fn decode_header_inner(r: &mut Reader<'_>) -> Result<(PayloadHeader, usize, u32, usize)> {
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::corrupt(0, "bad magic"));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let pos = r.position();
    let backend = Backend::from_id(r.u8("backend")?)
        .ok_or_else(|| Error::corrupt(pos, "unknown lossless back end"))?;
    let pos = r.position();
    let predictor = Predictor::from_id(r.u8("predictor")?)
        .ok_or_else(|| Error::corrupt(pos, "unknown predictor"))?;
    let pos = r.position();
    let policy = r.u8("seed policy")?;
    let rng_seed = r.u64("rng seed")?;
    let seed_policy = match policy {
        0 => SeedPolicy::MinIndex,
        1 => SeedPolicy::Random(rng_seed),
        _ => return Err(Error::corrupt(pos, "unknown seed policy")),
    };
    let pos = r.position();
    let dimension = r.u8("dimension")? as usize;
    if dimension != 2 && dimension != 3 {
        return Err(Error::corrupt(pos, format!("dimension {dimension}")));
    }
    let pos = r.position();
    let code_bits = u32::from(r.u8("code bits")?);
    if !(1..=32).contains(&code_bits) {
        return Err(Error::corrupt(pos, format!("code width {code_bits}")));
    }
    let pos = r.position();
    let vertex_count = usize_field(r.u64("vertex count")?, pos, "vertex count")?;
    let pos = r.position();
    let cell_count = usize_field(r.u64("cell count")?, pos, "cell count")?;
    let pos = r.position();
    let error_bound = r.f64("error bound")?;
    if !(error_bound.is_finite() && error_bound > 0.0) {
        return Err(Error::corrupt(pos, format!("error bound {error_bound}")));
    }
    let pos = r.position();
    let sequence_count = usize_field(r.u64("sequence count")?, pos, "sequence count")?;
    if sequence_count > vertex_count.max(1) {
        return Err(Error::corrupt(pos, "more sequences than vertices"));
    }
    let mut mesh_digest = [0u8; 16];
    mesh_digest.copy_from_slice(r.take(16, "mesh digest")?);
    let pos = r.position();
    let raw_len = usize_field(r.u64("body length")?, pos, "body length")?;
    let crc = r.u32("body checksum")?;
    let pos = r.position();
    let packed_len = usize_field(r.u64("packed body length")?, pos, "packed body length")?;

    let header = PayloadHeader {
        backend,
        predictor,
        seed_policy,
        dimension,
        code_bits,
        vertex_count,
        cell_count,
        error_bound,
        sequence_count,
        mesh_digest,
    };
    Ok((header, raw_len, crc, packed_len))
}

/// Exact inverse of [`encode`].
pub fn decode(bytes: &[u8]) -> Result<(SequenceSet, PayloadHeader)> {
    let mut r = Reader::new(bytes, 0);
    let (header, raw_len, crc, packed_len) = decode_header_inner(&mut r)?;
    let width = header.seed_width();
    let n_seq = header.sequence_count;

    // Upper bound on a well-formed body, so a forged length cannot force a
    // huge allocation.
    let max_codes = (header.vertex_count as u64).saturating_add(n_seq as u64);
    let bound = 8u64
        .saturating_add(8 * (width as u64) * (n_seq as u64))
        .saturating_add(28)
        .saturating_add(max_codes.saturating_mul(10));
    if raw_len as u64 > bound {
        return Err(Error::corrupt(
            HEADER_LEN - 20,
            format!("body length {raw_len} exceeds bound {bound}"),
        ));
    }

    let body_pos = r.position();
    let packed = r.take(packed_len, "body")?;
    if r.remaining() != 0 {
        return Err(Error::corrupt(r.position(), "trailing bytes after body"));
    }
    let body = header.backend.decompress(packed, raw_len, body_pos)?;
    if crc32fast::hash(&body) != crc {
        return Err(Error::corrupt(body_pos, "body checksum mismatch"));
    }

    // Positions inside the body are reported relative to the body start.
    let mut br = Reader::new(&body, 0);
    let pos = br.position();
    let seed_count = br.u64("seed count")?;
    if seed_count != (width * n_seq) as u64 {
        return Err(Error::corrupt(
            pos,
            format!("{seed_count} seed values for {n_seq} sequences of width {width}"),
        ));
    }
    let mut seeds = Vec::with_capacity(seed_count as usize);
    for _ in 0..seed_count {
        seeds.push(br.f64("seed value")?);
    }
    let codes = huffman::decode_block(&mut br, max_codes)?;
    if br.remaining() != 0 {
        return Err(Error::corrupt(br.position(), "trailing bytes in body"));
    }

    let mut sequences = Vec::with_capacity(n_seq);
    let mut start = 0;
    for (i, &c) in codes.iter().enumerate() {
        if c == END_MARK {
            let k = sequences.len();
            if k >= n_seq {
                return Err(Error::corrupt(pos, "more end marks than sequences"));
            }
            sequences.push(Sequence {
                seed_values: seeds[k * width..(k + 1) * width].to_vec(),
                codes: codes[start..=i].to_vec(),
            });
            start = i + 1;
        }
    }
    if sequences.len() != n_seq || start != codes.len() {
        return Err(Error::corrupt(
            pos,
            format!(
                "code stream holds {} complete sequences, header says {n_seq}",
                sequences.len()
            ),
        ));
    }
    Ok((SequenceSet { sequences }, header))
}

/// Original size over compressed size.
pub fn compression_ratio(original_bytes: usize, payload_bytes: usize) -> Result<f64> {
    if original_bytes == 0 || payload_bytes == 0 {
        return Err(Error::InvalidValue("sizes must be positive".into()));
    }
    Ok(original_bytes as f64 / payload_bytes as f64)
}

/// Average bits per nodal value.
pub fn bit_rate(payload_bytes: usize, vertex_count: usize) -> Result<f64> {
    if payload_bytes == 0 || vertex_count == 0 {
        return Err(Error::InvalidValue("sizes must be positive".into()));
    }
    Ok(8.0 * payload_bytes as f64 / vertex_count as f64)
}

/// Bytes of an uncompressed double-precision field.
pub fn original_size(vertex_count: usize) -> usize {
    8 * vertex_count
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(width_dim: usize, n_vertices: usize) -> PayloadHeader {
        PayloadHeader {
            backend: Backend::Identity,
            predictor: Predictor::Traversal,
            seed_policy: SeedPolicy::MinIndex,
            dimension: width_dim,
            code_bits: 16,
            vertex_count: n_vertices,
            cell_count: 1,
            error_bound: 0.5,
            sequence_count: 0,
            mesh_digest: [7; 16],
        }
    }

    fn single() -> SequenceSet {
        SequenceSet {
            sequences: vec![Sequence {
                seed_values: vec![1.0, 2.0, 3.0],
                codes: vec![END_MARK],
            }],
        }
    }

    #[test]
    fn single_cell_layout() {
        let bytes = encode(&single(), &header(2, 3)).unwrap();
        // body: seed count + 3 reals + code block with one zero-bit symbol
        let body = 8 + 24 + (8 + 4 + 2 + 8);
        assert_eq!(bytes.len(), HEADER_LEN + body);
        let (seqs, h) = decode(&bytes).unwrap();
        assert_eq!(seqs, single());
        assert_eq!(h.sequence_count, 1);
    }

    #[test]
    fn version_and_magic() {
        let mut bytes = encode(&single(), &header(2, 3)).unwrap();
        bytes[4] = VERSION + 1;
        assert!(matches!(decode(&bytes), Err(Error::UnsupportedVersion(v)) if v == VERSION + 1));
        bytes[4] = VERSION;
        bytes[0] = b'X';
        assert!(matches!(
            decode(&bytes),
            Err(Error::CorruptStream { position: 0, .. })
        ));
    }

    #[test]
    fn every_truncation_is_corrupt() {
        for backend in Backend::ALL {
            let mut h = header(2, 3);
            h.backend = backend;
            let bytes = encode(&single(), &h).unwrap();
            for cut in 0..bytes.len() {
                assert!(matches!(
                    decode(&bytes[..cut]),
                    Err(Error::CorruptStream { .. })
                ));
            }
        }
    }

    #[test]
    fn flipped_seed_byte_fails_checksum() {
        let bytes = encode(&single(), &header(2, 3)).unwrap();
        let mut bad = bytes.clone();
        bad[HEADER_LEN + 10] ^= 0x40;
        assert!(matches!(decode(&bad), Err(Error::CorruptStream { .. })));
    }

    #[test]
    fn size_metrics() {
        assert_eq!(compression_ratio(800, 800).unwrap(), 1.0);
        assert_eq!(bit_rate(800, 100).unwrap(), 64.0);
        assert_eq!(compression_ratio(800, 100).unwrap(), 8.0);
        assert_eq!(bit_rate(100, 100).unwrap(), 8.0);
        assert!(compression_ratio(0, 1).is_err());
        assert!(bit_rate(1, 0).is_err());
    }

    fn sequence_set(dim: usize) -> impl Strategy<Value = SequenceSet> {
        let seq = (
            proptest::collection::vec(any::<f64>(), dim + 1),
            proptest::collection::vec(1u32..=65535, 0..20),
        )
            .prop_map(|(seed_values, mut codes)| {
                codes.push(END_MARK);
                Sequence { seed_values, codes }
            });
        proptest::collection::vec(seq, 1..8).prop_map(|sequences| SequenceSet { sequences })
    }

    proptest! {
        #[test]
        fn random_sets_round_trip(set in sequence_set(3), backend in 0u8..3) {
            let mut h = header(3, 1000);
            h.backend = Backend::from_id(backend).unwrap();
            let bytes = encode(&set, &h).unwrap();
            let (back, hb) = decode(&bytes).unwrap();
            prop_assert_eq!(back.len(), set.len());
            for (a, b) in back.sequences.iter().zip(&set.sequences) {
                prop_assert_eq!(&a.codes, &b.codes);
                let abits: Vec<u64> = a.seed_values.iter().map(|x| x.to_bits()).collect();
                let bbits: Vec<u64> = b.seed_values.iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(abits, bbits);
            }
            prop_assert_eq!(hb.backend, h.backend);
        }

        #[test]
        fn decoder_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = decode(&bytes);
        }

        #[test]
        fn decoder_survives_header_mutation(pos in 0usize..HEADER_LEN, val in any::<u8>()) {
            let mut bytes = encode(&single(), &header(2, 3)).unwrap();
            bytes[pos] = val;
            let _ = decode(&bytes);
        }
    }
}

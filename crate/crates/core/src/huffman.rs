//! Canonical Huffman coding of `u32` symbol streams.
//!
//! Only code lengths are transmitted; codes are assigned canonically
//! (shorter codes first, ties broken by symbol value). A stream with a single
//! distinct symbol is coded with zero bits per symbol.
//!
//! Serialized block:
//!
//! ```text
//! symbol_count   u64 LE
//! distinct       u32 LE
//! distinct x { symbol delta (LEB128), code length u8 }
//! bit_count      u64 LE
//! payload        ceil(bit_count / 8) bytes, MSB-first
//! ```

use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};

pub const MAX_CODE_LENGTH: u32 = 32;

/// Code lengths indexed parallel to `symbols` (ascending).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeTable {
    symbols: Vec<u32>,
    lengths: Vec<u8>,
}

impl CodeTable {
    /// Builds length-limited Huffman code lengths from a symbol stream.
    pub fn from_stream(stream: &[u32]) -> Self {
        let mut freq: HashMap<u32, u64> = HashMap::new();
        for &s in stream {
            *freq.entry(s).or_default() += 1;
        }
        let mut pairs: Vec<(u32, u64)> = freq.into_iter().collect();
        pairs.sort_unstable();
        let symbols: Vec<u32> = pairs.iter().map(|p| p.0).collect();
        let mut weights: Vec<u64> = pairs.iter().map(|p| p.1).collect();
        let lengths = loop {
            let lengths = huffman_lengths(&weights);
            if lengths.iter().all(|&l| u32::from(l) <= MAX_CODE_LENGTH) {
                break lengths;
            }
            // Flatten the distribution until the tree fits.
            for w in &mut weights {
                *w = (*w >> 1).max(1);
            }
        };
        CodeTable { symbols, lengths }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn lengths(&self) -> &[u8] {
        &self.lengths
    }

    /// Canonical `(code, length)` per symbol, parallel to `symbols()`.
    fn canonical_codes(&self) -> Vec<(u64, u8)> {
        let mut order: Vec<usize> = (0..self.symbols.len()).collect();
        order.sort_by_key(|&i| (self.lengths[i], self.symbols[i]));
        let mut codes = vec![(0u64, 0u8); self.symbols.len()];
        let mut code = 0u64;
        let mut prev_len = 0u8;
        for (k, &i) in order.iter().enumerate() {
            let len = self.lengths[i];
            if k > 0 {
                code = (code + 1) << (len - prev_len);
            } else {
                code <<= len;
            }
            codes[i] = (code, len);
            prev_len = len;
        }
        codes
    }

    /// Total coded bits for a stream under this table.
    pub fn coded_bits(&self, stream: &[u32]) -> u64 {
        let index: HashMap<u32, u8> = self
            .symbols
            .iter()
            .copied()
            .zip(self.lengths.iter().copied())
            .collect();
        stream.iter().map(|s| u64::from(index[s])).sum()
    }
}

/// Plain Huffman code lengths (unbounded) for positive weights.
fn huffman_lengths(weights: &[u64]) -> Vec<u8> {
    let n = weights.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![0],
        _ => {}
    }
    // Nodes 0..n are leaves; internal nodes are appended.
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut heap: BinaryHeap<std::cmp::Reverse<(u64, usize)>> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| std::cmp::Reverse((w, i)))
        .collect();
    let mut next = n;
    while heap.len() > 1 {
        let std::cmp::Reverse((wa, a)) = heap.pop().unwrap();
        let std::cmp::Reverse((wb, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        heap.push(std::cmp::Reverse((wa + wb, next)));
        next += 1;
    }
    let root = next - 1;
    let mut depth = vec![0u32; 2 * n - 1];
    for node in (0..root).rev() {
        depth[node] = depth[parent[node]] + 1;
    }
    depth[..n].iter().map(|&d| d.min(255) as u8).collect()
}

struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    filled: u32,
    total: u64,
}

impl BitWriter {
    fn new() -> Self {
        BitWriter {
            bytes: Vec::new(),
            acc: 0,
            filled: 0,
            total: 0,
        }
    }

    fn write(&mut self, code: u64, len: u8) {
        for i in (0..len).rev() {
            self.acc = (self.acc << 1) | ((code >> i) & 1);
            self.filled += 1;
            if self.filled == 8 {
                self.bytes.push(self.acc as u8);
                self.acc = 0;
                self.filled = 0;
            }
        }
        self.total += u64::from(len);
    }

    fn finish(mut self) -> (Vec<u8>, u64) {
        if self.filled > 0 {
            self.bytes.push((self.acc << (8 - self.filled)) as u8);
        }
        (self.bytes, self.total)
    }
}

/// Appends the serialized code block for `stream` to `out`.
pub fn encode_block(stream: &[u32], out: &mut Vec<u8>) {
    let table = CodeTable::from_stream(stream);
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    out.extend_from_slice(&(table.len() as u32).to_le_bytes());
    let mut prev = 0u32;
    for (i, (&s, &l)) in table.symbols.iter().zip(&table.lengths).enumerate() {
        let delta = if i == 0 { s } else { s - prev - 1 };
        write_leb128(u64::from(delta), out);
        out.push(l);
        prev = s;
    }
    let codes = table.canonical_codes();
    let lookup: HashMap<u32, (u64, u8)> = table.symbols.iter().copied().zip(codes).collect();
    let mut writer = BitWriter::new();
    for s in stream {
        let (code, len) = lookup[s];
        writer.write(code, len);
    }
    let (payload, bits) = writer.finish();
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(&payload);
}

/// Cursor over a byte slice reporting absolute positions in errors.
pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(data: &'a [u8], base: usize) -> Self {
        Reader { data, pos: 0, base }
    }

    pub(crate) fn position(&self) -> usize {
        self.base + self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::corrupt(
                self.position(),
                format!(
                    "truncated while reading {what} ({n} bytes needed, {} left)",
                    self.remaining()
                ),
            ));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_bits(self.u64(what)?))
    }

    pub(crate) fn leb128(&mut self, what: &str) -> Result<u64> {
        let mut value = 0u64;
        for shift in (0..64).step_by(7) {
            let byte = self.u8(what)?;
            value |= u64::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(Error::corrupt(
            self.position(),
            format!("overlong varint in {what}"),
        ))
    }
}

pub(crate) fn write_leb128(mut v: u64, out: &mut Vec<u8>) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// Decodes one code block, advancing `reader` past it. Streams longer than
/// `max_symbols` are rejected.
pub(crate) fn decode_block(reader: &mut Reader<'_>, max_symbols: u64) -> Result<Vec<u32>> {
    let count_pos = reader.position();
    let count = reader.u64("symbol count")?;
    if count > max_symbols {
        return Err(Error::corrupt(
            count_pos,
            format!("symbol count {count} exceeds limit {max_symbols}"),
        ));
    }
    let table_pos = reader.position();
    let distinct = reader.u32("table size")? as usize;
    if distinct as u64 > count || (count > 0 && distinct == 0) {
        return Err(Error::corrupt(
            table_pos,
            format!("code table has {distinct} symbols for a stream of {count}"),
        ));
    }
    let mut symbols = Vec::with_capacity(distinct.min(reader.remaining()));
    let mut lengths = Vec::with_capacity(distinct.min(reader.remaining()));
    let mut prev: Option<u64> = None;
    for _ in 0..distinct {
        let delta = reader.leb128("code table symbol")?;
        let sym = match prev {
            None => delta,
            Some(p) => p + 1 + delta,
        };
        if sym > u64::from(u32::MAX) {
            return Err(Error::corrupt(
                reader.position(),
                "code table symbol out of range",
            ));
        }
        let len = reader.u8("code length")?;
        symbols.push(sym as u32);
        lengths.push(len);
        prev = Some(sym);
    }
    let table = CodeTable { symbols, lengths };
    let decoder =
        CanonicalDecoder::new(&table).map_err(|reason| Error::corrupt(table_pos, reason))?;

    let bits = reader.u64("bit count")?;
    let bytes = usize::try_from(bits.div_ceil(8))
        .map_err(|_| Error::corrupt(reader.position(), "bit count too large"))?;
    let payload_pos = reader.position();
    let payload = reader.take(bytes, "huffman payload")?;
    decoder.decode(payload, bits, count, payload_pos)
}

struct CanonicalDecoder {
    single: Option<u32>,
    max_len: usize,
    /// First canonical code of each length.
    first_code: Vec<u64>,
    /// Number of codes of each length.
    count: Vec<u64>,
    /// Offset into `sorted` for each length.
    offset: Vec<usize>,
    sorted: Vec<u32>,
}

impl CanonicalDecoder {
    fn new(table: &CodeTable) -> std::result::Result<Self, String> {
        let n = table.len();
        if n == 0 {
            return Ok(CanonicalDecoder {
                single: None,
                max_len: 0,
                first_code: vec![],
                count: vec![],
                offset: vec![],
                sorted: vec![],
            });
        }
        if n == 1 {
            if table.lengths[0] != 0 {
                return Err("single-symbol table must use zero-length code".into());
            }
            return Ok(CanonicalDecoder {
                single: Some(table.symbols[0]),
                max_len: 0,
                first_code: vec![],
                count: vec![],
                offset: vec![],
                sorted: vec![],
            });
        }
        let max_len = *table.lengths.iter().max().unwrap() as usize;
        if table.lengths.contains(&0) || max_len > MAX_CODE_LENGTH as usize {
            return Err("code length out of range".into());
        }
        let mut kraft: u128 = 0;
        for &l in &table.lengths {
            kraft += 1u128 << (MAX_CODE_LENGTH - u32::from(l));
        }
        if kraft != 1u128 << MAX_CODE_LENGTH {
            return Err("code lengths do not form a complete prefix code".into());
        }
        let mut count = vec![0u64; max_len + 1];
        for &l in &table.lengths {
            count[l as usize] += 1;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (table.lengths[i], table.symbols[i]));
        let sorted = order.iter().map(|&i| table.symbols[i]).collect();
        let mut first_code = vec![0u64; max_len + 1];
        let mut offset = vec![0usize; max_len + 1];
        let mut code = 0u64;
        let mut idx = 0usize;
        for len in 1..=max_len {
            code = (code + count[len - 1]) << 1;
            first_code[len] = code;
            offset[len] = idx;
            idx += count[len] as usize;
        }
        Ok(CanonicalDecoder {
            single: None,
            max_len,
            first_code,
            count,
            offset,
            sorted,
        })
    }

    fn decode(&self, payload: &[u8], bits: u64, count: u64, pos: usize) -> Result<Vec<u32>> {
        if let Some(sym) = self.single {
            if bits != 0 {
                return Err(Error::corrupt(
                    pos,
                    "single-symbol stream must carry no bits",
                ));
            }
            return Ok(vec![sym; count as usize]);
        }
        if count > bits {
            return Err(Error::corrupt(
                pos,
                format!("{count} symbols cannot fit in {bits} bits"),
            ));
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut bit = 0u64;
        let read_bit =
            |i: u64| -> u64 { u64::from(payload[(i / 8) as usize] >> (7 - (i % 8))) & 1 };
        while (out.len() as u64) < count {
            let mut code = 0u64;
            let mut found = false;
            for len in 1..=self.max_len {
                if bit >= bits {
                    return Err(Error::corrupt(
                        pos + (bit / 8) as usize,
                        "huffman payload exhausted",
                    ));
                }
                code = (code << 1) | read_bit(bit);
                bit += 1;
                let rel = code.wrapping_sub(self.first_code[len]);
                if code >= self.first_code[len] && rel < self.count[len] {
                    out.push(self.sorted[self.offset[len] + rel as usize]);
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(Error::corrupt(
                    pos + (bit / 8) as usize,
                    "invalid huffman code",
                ));
            }
        }
        if bit != bits {
            return Err(Error::corrupt(pos, "trailing bits after huffman stream"));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn round_trip(stream: &[u32]) -> Vec<u32> {
        let mut buf = Vec::new();
        encode_block(stream, &mut buf);
        let mut r = Reader::new(&buf, 0);
        let out = decode_block(&mut r, u64::MAX).unwrap();
        assert_eq!(r.remaining(), 0);
        out
    }

    #[test]
    fn empty_and_single_symbol() {
        assert_eq!(round_trip(&[]), Vec::<u32>::new());
        let one = vec![7u32; 1000];
        assert_eq!(round_trip(&one), one);
        let mut buf = Vec::new();
        encode_block(&one, &mut buf);
        // count + table size + 1 entry + bit count, no payload
        assert_eq!(buf.len(), 8 + 4 + 2 + 8);
    }

    #[test]
    fn canonical_codes_are_prefix_free() {
        let stream: Vec<u32> = (0..200u32).map(|i| i % 7 + (i % 3) * 100).collect();
        let table = CodeTable::from_stream(&stream);
        let codes = table.canonical_codes();
        for (i, &(a, la)) in codes.iter().enumerate() {
            for (j, &(b, lb)) in codes.iter().enumerate() {
                if i != j && la <= lb {
                    assert_ne!(b >> (lb - la), a, "code {i} prefixes {j}");
                }
            }
        }
        assert_eq!(round_trip(&stream), stream);
    }

    #[test]
    fn fibonacci_weights_are_length_limited() {
        // Fibonacci frequencies force a maximally skewed tree.
        let mut stream = Vec::new();
        let (mut a, mut b) = (1u64, 1u64);
        for sym in 0..40u32 {
            for _ in 0..a.min(200_000) {
                stream.push(sym);
            }
            let c = a + b;
            a = b;
            b = c;
        }
        let table = CodeTable::from_stream(&stream);
        assert!(table
            .lengths()
            .iter()
            .all(|&l| u32::from(l) <= MAX_CODE_LENGTH));
        assert_eq!(round_trip(&stream), stream);
    }

    #[test]
    fn corrupt_tables_are_rejected() {
        let stream = vec![1u32, 2, 2, 3, 3, 3, 3];
        let mut buf = Vec::new();
        encode_block(&stream, &mut buf);
        // Length byte of the first table entry sits after count(8)+n(4)+delta(1).
        let mut bad = buf.clone();
        bad[13] = 9;
        assert!(matches!(
            decode_block(&mut Reader::new(&bad, 0), 100),
            Err(Error::CorruptStream { .. })
        ));
        for cut in 0..buf.len() {
            assert!(decode_block(&mut Reader::new(&buf[..cut], 0), 100).is_err());
        }
    }

    proptest! {
        #[test]
        fn arbitrary_streams_round_trip(stream in proptest::collection::vec(0u32..50, 0..400)) {
            prop_assert_eq!(round_trip(&stream), stream);
        }

        #[test]
        fn decoder_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_block(&mut Reader::new(&bytes, 0), 1 << 20);
        }
    }
}

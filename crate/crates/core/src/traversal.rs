//! Seed-and-grow traversal of the dual graph.
//!
//! Each sequence starts from a seed cell whose vertex values are stored
//! losslessly. A depth-first walk then visits neighbouring cells, always
//! taking the smallest cell index first. Every newly entered cell introduces
//! exactly one new vertex, which is predicted by barycentric extrapolation
//! from the cell it was entered from and quantized. The first unpredictable
//! vertex ends the sequence with an end mark; so does running out of cells.
//!
//! Compression and decompression run the same walker. Only the source of
//! values differs: the compressor quantizes original values, the
//! decompressor replays codes. Predictions only ever read reconstructed
//! values, so both sides stay bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{dequantize, quantize, QuantizeOutcome, QuantizerConfig, END_MARK};
use crate::error::{Error, Result};
use crate::mesh::{ScalarField, SimplicialMesh};

/// One traversal sequence: lossless seed values followed by quantization
/// codes, terminated by a single end mark.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub seed_values: Vec<f64>,
    pub codes: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SequenceSet {
    pub sequences: Vec<Sequence>,
}

impl SequenceSet {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn seed_value_count(&self) -> usize {
        self.sequences.iter().map(|s| s.seed_values.len()).sum()
    }

    pub fn code_count(&self) -> usize {
        self.sequences.iter().map(|s| s.codes.len()).sum()
    }

    pub fn end_mark_count(&self) -> usize {
        self.sequences
            .iter()
            .flat_map(|s| &s.codes)
            .filter(|&&c| c == END_MARK)
            .count()
    }

    /// Checks that every sequence has `seed_width` seed values and a code
    /// list ending in exactly one end mark.
    pub fn validate(&self, seed_width: usize) -> Result<()> {
        for (i, s) in self.sequences.iter().enumerate() {
            if s.seed_values.len() != seed_width {
                return Err(Error::corrupt(
                    0,
                    format!(
                        "sequence {i} has {} seed values, expected {seed_width}",
                        s.seed_values.len()
                    ),
                ));
            }
            match s.codes.iter().position(|&c| c == END_MARK) {
                Some(p) if p + 1 == s.codes.len() => {}
                _ => {
                    return Err(Error::corrupt(
                        0,
                        format!("sequence {i} does not end with exactly one end mark"),
                    ))
                }
            }
        }
        Ok(())
    }
}

/// How the next seed cell is chosen once a sequence ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedPolicy {
    /// Lowest-index unvisited cell.
    #[default]
    MinIndex,
    /// Uniformly random unvisited cell from a seeded ChaCha8 stream.
    Random(u64),
}

/// Mutable bookkeeping shared by compressor and decompressor.
#[derive(Debug, Clone)]
pub struct TraversalState {
    pub node_visited: Vec<bool>,
    pub cell_visited: Vec<bool>,
    /// Reconstructed values; meaningful only where `node_visited` is set.
    pub decomp_values: Vec<f64>,
    pub stack: Vec<(usize, usize)>,
    visited_nodes: usize,
    seed_cursor: usize,
}

impl TraversalState {
    pub fn new(mesh: &SimplicialMesh) -> Self {
        TraversalState {
            node_visited: vec![false; mesh.vertex_count()],
            cell_visited: vec![false; mesh.cell_count()],
            decomp_values: vec![0.0; mesh.vertex_count()],
            stack: Vec::new(),
            visited_nodes: 0,
            seed_cursor: 0,
        }
    }

    pub fn visited_node_count(&self) -> usize {
        self.visited_nodes
    }

    pub fn all_nodes_visited(&self) -> bool {
        self.visited_nodes == self.node_visited.len()
    }

    /// Lowest-index unvisited cell, or `None` once every cell is visited.
    pub fn select_next_seed(&mut self) -> Option<usize> {
        // Visited flags never reset, so the cursor only moves forward.
        while self.seed_cursor < self.cell_visited.len() && self.cell_visited[self.seed_cursor] {
            self.seed_cursor += 1;
        }
        (self.seed_cursor < self.cell_visited.len()).then_some(self.seed_cursor)
    }

    fn select_random_seed(&mut self, rng: &mut ChaCha8Rng) -> Option<usize> {
        let n = self.cell_visited.len();
        if n == 0 {
            return None;
        }
        for _ in 0..32 {
            let c = rng.gen_range(0..n);
            if !self.cell_visited[c] {
                return Some(c);
            }
        }
        let open: Vec<usize> = (0..n).filter(|&c| !self.cell_visited[c]).collect();
        if open.is_empty() {
            None
        } else {
            Some(open[rng.gen_range(0..open.len())])
        }
    }

    fn visit_node(&mut self, mesh: &SimplicialMesh, v: usize, value: f64) {
        self.decomp_values[v] = value;
        if !self.node_visited[v] {
            self.node_visited[v] = true;
            self.visited_nodes += 1;
            for &c in mesh.cells_of_vertex(v) {
                if !self.cell_visited[c] && mesh.cell(c).iter().all(|&u| self.node_visited[u]) {
                    self.cell_visited[c] = true;
                }
            }
        }
    }
}

/// Per-sequence statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceStats {
    pub seed_cell: usize,
    /// Seed vertices that had not been visited before this seed.
    pub new_seed_vertices: usize,
    /// Vertices fixed through quantization codes in this sequence.
    pub coded_vertices: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraversalStats {
    pub sequences: Vec<SequenceStats>,
    /// Seed and accepted cells in the order they were visited.
    pub visit_order: Vec<usize>,
}

impl TraversalStats {
    /// Fraction of all vertices first fixed by the first sequence, seed
    /// vertices included.
    pub fn first_seed_coverage(&self, vertex_count: usize) -> f64 {
        match self.sequences.first() {
            Some(s) if vertex_count > 0 => {
                (s.new_seed_vertices + s.coded_vertices) as f64 / vertex_count as f64
            }
            _ => 0.0,
        }
    }

    /// Running total of vertices fixed (seeded or coded) after each sequence.
    pub fn cumulative_visited(&self) -> Vec<usize> {
        self.sequences
            .iter()
            .scan(0, |acc, s| {
                *acc += s.new_seed_vertices + s.coded_vertices;
                Some(*acc)
            })
            .collect()
    }

    /// Running total of coded (non-seed) vertices after each sequence.
    pub fn cumulative_coded(&self) -> Vec<usize> {
        self.sequences
            .iter()
            .scan(0, |acc, s| {
                *acc += s.coded_vertices;
                Some(*acc)
            })
            .collect()
    }
}

/// Source and sink of vertex values during a traversal.
pub trait ValueChannel {
    fn begin_sequence(&mut self) -> Result<()>;
    fn seed_value(&mut self, vertex: usize) -> Result<f64>;
    /// Given the prediction for `vertex` (`None` when the predicting cell is
    /// degenerate), returns the reconstructed value, or `None` to end the
    /// sequence.
    fn next_value(&mut self, vertex: usize, prediction: Option<f64>) -> Result<Option<f64>>;
    /// The stack ran empty; the sequence ends without an unpredictable value.
    fn exhausted(&mut self) -> Result<()>;
}

/// Stores the seed cell's vertex values and marks it visited.
pub fn plant_seed<C: ValueChannel>(
    mesh: &SimplicialMesh,
    seed_cell: usize,
    state: &mut TraversalState,
    channel: &mut C,
) -> Result<usize> {
    state.cell_visited[seed_cell] = true;
    let mut fresh = 0;
    for &v in mesh.cell(seed_cell) {
        let value = channel.seed_value(v)?;
        if !state.node_visited[v] {
            fresh += 1;
        }
        state.visit_node(mesh, v, value);
    }
    Ok(fresh)
}

/// Depth-first walk from an already planted seed. Returns the number of
/// vertices fixed through codes.
pub fn traverse_from_seed<C: ValueChannel>(
    mesh: &SimplicialMesh,
    seed_cell: usize,
    state: &mut TraversalState,
    channel: &mut C,
    visit_order: &mut Vec<usize>,
) -> Result<usize> {
    state.stack.clear();
    push_neighbors(mesh, seed_cell, state);
    let mut coded = 0;

    while let Some((current, previous)) = state.stack.pop() {
        if state.cell_visited[current] {
            continue;
        }
        let prev_cell = mesh.cell(previous);
        let mut fresh = mesh.cell(current).iter().filter(|v| !prev_cell.contains(v));
        let vertex = match (fresh.next(), fresh.next()) {
            (Some(&v), None) => v,
            _ => {
                return Err(Error::Internal(format!(
                    "cells {previous} and {current} do not share a facet"
                )))
            }
        };

        if state.node_visited[vertex] {
            state.cell_visited[current] = true;
            visit_order.push(current);
            push_neighbors(mesh, current, state);
            continue;
        }

        let mut known = [0.0; 4];
        for (k, &u) in prev_cell.iter().enumerate() {
            known[k] = state.decomp_values[u];
        }
        let prediction = match mesh.barycentric_predict(previous, vertex, &known[..prev_cell.len()])
        {
            Ok(p) if p.is_finite() => Some(p),
            Ok(_) | Err(Error::DegenerateCell { .. }) => None,
            Err(e) => return Err(e),
        };

        match channel.next_value(vertex, prediction)? {
            Some(value) => {
                state.cell_visited[current] = true;
                state.visit_node(mesh, vertex, value);
                visit_order.push(current);
                coded += 1;
                push_neighbors(mesh, current, state);
            }
            None => {
                state.stack.clear();
                return Ok(coded);
            }
        }
    }
    channel.exhausted()?;
    Ok(coded)
}

fn push_neighbors(mesh: &SimplicialMesh, cell: usize, state: &mut TraversalState) {
    // Descending push so the smallest index pops first.
    for &nb in mesh.neighbors(cell).iter().rev() {
        if !state.cell_visited[nb] {
            state.stack.push((nb, cell));
        }
    }
}

fn run<C: ValueChannel>(
    mesh: &SimplicialMesh,
    policy: SeedPolicy,
    channel: &mut C,
) -> Result<(TraversalState, TraversalStats)> {
    let mut state = TraversalState::new(mesh);
    let mut stats = TraversalStats::default();
    let mut rng = match policy {
        SeedPolicy::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        SeedPolicy::MinIndex => None,
    };
    while !state.all_nodes_visited() {
        let seed = match rng.as_mut() {
            Some(r) => state.select_random_seed(r),
            None => state.select_next_seed(),
        }
        .ok_or_else(|| {
            Error::Internal("unvisited vertices remain but every cell is visited".into())
        })?;
        channel.begin_sequence()?;
        let new_seed_vertices = plant_seed(mesh, seed, &mut state, channel)?;
        stats.visit_order.push(seed);
        let coded_vertices =
            traverse_from_seed(mesh, seed, &mut state, channel, &mut stats.visit_order)?;
        stats.sequences.push(SequenceStats {
            seed_cell: seed,
            new_seed_vertices,
            coded_vertices,
        });
    }
    Ok((state, stats))
}

fn check_mesh(mesh: &SimplicialMesh) -> Result<()> {
    if mesh.vertex_count() == 0 || mesh.cell_count() == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some(&v) = mesh.orphan_vertices().first() {
        return Err(Error::InvalidMesh(format!(
            "vertex {v} belongs to no cell and cannot be traversed"
        )));
    }
    Ok(())
}

struct Quantizing<'a> {
    values: &'a [f64],
    config: QuantizerConfig,
    out: Vec<Sequence>,
}

impl ValueChannel for Quantizing<'_> {
    fn begin_sequence(&mut self) -> Result<()> {
        self.out.push(Sequence {
            seed_values: Vec::new(),
            codes: Vec::new(),
        });
        Ok(())
    }

    fn seed_value(&mut self, vertex: usize) -> Result<f64> {
        let v = self.values[vertex];
        self.out.last_mut().unwrap().seed_values.push(v);
        Ok(v)
    }

    fn next_value(&mut self, vertex: usize, prediction: Option<f64>) -> Result<Option<f64>> {
        let seq = self.out.last_mut().unwrap();
        let outcome = match prediction {
            Some(p) => quantize(&self.config, p, self.values[vertex])?,
            None => QuantizeOutcome::Unpredictable,
        };
        match outcome {
            QuantizeOutcome::Predictable {
                code,
                reconstructed,
            } => {
                seq.codes.push(code);
                Ok(Some(reconstructed))
            }
            QuantizeOutcome::Unpredictable => {
                seq.codes.push(END_MARK);
                Ok(None)
            }
        }
    }

    fn exhausted(&mut self) -> Result<()> {
        self.out.last_mut().unwrap().codes.push(END_MARK);
        Ok(())
    }
}

struct Replaying<'a> {
    sequences: &'a [Sequence],
    config: QuantizerConfig,
    seq: usize,
    seed_pos: usize,
    code_pos: usize,
    started: bool,
}

impl Replaying<'_> {
    fn current(&self) -> &Sequence {
        &self.sequences[self.seq]
    }

    fn next_code(&mut self) -> Result<u32> {
        let seq = self.seq;
        let code = *self.current().codes.get(self.code_pos).ok_or_else(|| {
            Error::corrupt(
                0,
                format!("code stream of sequence {seq} exhausted mid-traversal"),
            )
        })?;
        self.code_pos += 1;
        Ok(code)
    }

    fn finish_sequence(&self) -> Result<()> {
        let s = self.current();
        if self.code_pos != s.codes.len() || self.seed_pos != s.seed_values.len() {
            return Err(Error::corrupt(
                0,
                format!("trailing data in sequence {}", self.seq),
            ));
        }
        Ok(())
    }
}

impl ValueChannel for Replaying<'_> {
    fn begin_sequence(&mut self) -> Result<()> {
        if self.started {
            self.seq += 1;
        }
        self.started = true;
        self.seed_pos = 0;
        self.code_pos = 0;
        if self.seq >= self.sequences.len() {
            return Err(Error::corrupt(
                0,
                "ran out of sequences before all vertices were restored",
            ));
        }
        Ok(())
    }

    fn seed_value(&mut self, _vertex: usize) -> Result<f64> {
        let seq = self.seq;
        let v = *self
            .current()
            .seed_values
            .get(self.seed_pos)
            .ok_or_else(|| Error::corrupt(0, format!("sequence {seq} has too few seed values")))?;
        if !v.is_finite() {
            return Err(Error::corrupt(
                0,
                format!("non-finite seed value in sequence {seq}"),
            ));
        }
        self.seed_pos += 1;
        Ok(v)
    }

    fn next_value(&mut self, _vertex: usize, prediction: Option<f64>) -> Result<Option<f64>> {
        let code = self.next_code()?;
        if code == END_MARK {
            self.finish_sequence()?;
            return Ok(None);
        }
        match prediction {
            Some(p) => dequantize(&self.config, p, code).map(Some),
            None => Err(Error::corrupt(
                0,
                "quantization code where an end mark was required",
            )),
        }
    }

    fn exhausted(&mut self) -> Result<()> {
        if self.next_code()? != END_MARK {
            return Err(Error::corrupt(
                0,
                "expected end mark after exhausted traversal",
            ));
        }
        self.finish_sequence()
    }
}

/// Everything the compressor produced.
#[derive(Debug, Clone)]
pub struct CompressOutput {
    pub sequences: SequenceSet,
    /// Values the decompressor will reconstruct.
    pub decompressed: Vec<f64>,
    pub stats: TraversalStats,
}

pub fn compress(
    mesh: &SimplicialMesh,
    field: &ScalarField,
    config: &QuantizerConfig,
) -> Result<SequenceSet> {
    compress_with_policy(mesh, field, config, SeedPolicy::MinIndex).map(|o| o.sequences)
}

pub fn compress_with_policy(
    mesh: &SimplicialMesh,
    field: &ScalarField,
    config: &QuantizerConfig,
    policy: SeedPolicy,
) -> Result<CompressOutput> {
    field.check_matches(mesh)?;
    check_mesh(mesh)?;
    if field.values().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidValue(
            "field contains non-finite values".into(),
        ));
    }
    let mut channel = Quantizing {
        values: field.values(),
        config: *config,
        out: Vec::new(),
    };
    let (state, stats) = run(mesh, policy, &mut channel)?;
    Ok(CompressOutput {
        sequences: SequenceSet {
            sequences: channel.out,
        },
        decompressed: state.decomp_values,
        stats,
    })
}

pub fn decompress(
    mesh: &SimplicialMesh,
    sequences: &SequenceSet,
    config: &QuantizerConfig,
) -> Result<ScalarField> {
    decompress_with_policy(mesh, sequences, config, SeedPolicy::MinIndex)
}

pub fn decompress_with_policy(
    mesh: &SimplicialMesh,
    sequences: &SequenceSet,
    config: &QuantizerConfig,
    policy: SeedPolicy,
) -> Result<ScalarField> {
    check_mesh(mesh)?;
    sequences.validate(mesh.vertices_per_cell())?;
    let mut channel = Replaying {
        sequences: &sequences.sequences,
        config: *config,
        seq: 0,
        seed_pos: 0,
        code_pos: 0,
        started: false,
    };
    let (state, _) = run(mesh, policy, &mut channel)?;
    if sequences.len() != channel.seq + 1 {
        return Err(Error::corrupt(
            0,
            "trailing sequences after all vertices were restored",
        ));
    }
    ScalarField::new("decompressed", state.decomp_values)
}

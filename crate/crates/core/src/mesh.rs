//! Simplicial meshes (triangles in 2D, tetrahedra in 3D), their dual graph,
//! and barycentric coordinate transforms.
//!
//! Vertex and cell indices are 0-based. Coordinates are stored flat with a
//! stride equal to the mesh dimension, cells flat with a stride of `d + 1`.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Relative cutoff for the Jacobian determinant, scaled by `L^d` where `L` is
/// the bounding-box diagonal.
pub const DEGENERACY_RELATIVE_THRESHOLD: f64 = 1e-12;

/// Facet (dual-graph) adjacency in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceAdjacency {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl FaceAdjacency {
    /// Cells sharing a facet with `cell`, sorted ascending.
    pub fn neighbors(&self, cell: usize) -> &[usize] {
        &self.neighbors[self.offsets[cell]..self.offsets[cell + 1]]
    }

    pub fn cell_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn to_lists(&self) -> Vec<Vec<usize>> {
        (0..self.cell_count())
            .map(|c| self.neighbors(c).to_vec())
            .collect()
    }
}

/// Builds the dual graph of a simplicial mesh: two cells are adjacent iff
/// they share exactly `dimension` vertices.
///
/// `cells` is flat with stride `dimension + 1`. Facets shared by more than two
/// cells are rejected.
pub fn build_adjacency(cells: &[usize], dimension: usize) -> Result<FaceAdjacency> {
    check_dimension(dimension)?;
    let nv = dimension + 1;
    if !cells.len().is_multiple_of(nv) {
        return Err(Error::InvalidMesh(format!(
            "cell array length {} is not a multiple of {nv}",
            cells.len()
        )));
    }
    let n_cells = cells.len() / nv;

    // facet key -> (first cell, second cell, count)
    let mut facets: HashMap<[usize; 3], (usize, usize, usize)> =
        HashMap::with_capacity(n_cells * nv / 2 + 1);
    for c in 0..n_cells {
        let cell = &cells[c * nv..(c + 1) * nv];
        for skip in 0..nv {
            let key = facet_key(cell, skip);
            let entry = facets.entry(key).or_insert((c, usize::MAX, 0));
            match entry.2 {
                0 => {}
                1 => entry.1 = c,
                _ => {}
            }
            entry.2 += 1;
        }
    }

    let mut lists: Vec<Vec<usize>> = vec![Vec::with_capacity(nv); n_cells];
    for (key, (a, b, count)) in &facets {
        if *count > 2 {
            let facet = key[..dimension].to_vec();
            return Err(Error::NonManifold {
                facet,
                count: *count,
            });
        }
        if *count == 2 {
            if a == b {
                return Err(Error::InvalidMesh(format!(
                    "cell {a} contains a repeated facet"
                )));
            }
            lists[*a].push(*b);
            lists[*b].push(*a);
        }
    }

    let mut offsets = Vec::with_capacity(n_cells + 1);
    let mut neighbors = Vec::with_capacity(facets.len() * 2);
    offsets.push(0);
    for mut list in lists {
        list.sort_unstable();
        neighbors.extend_from_slice(&list);
        offsets.push(neighbors.len());
    }
    Ok(FaceAdjacency { offsets, neighbors })
}

fn facet_key(cell: &[usize], skip: usize) -> [usize; 3] {
    let mut key = [usize::MAX; 3];
    let mut n = 0;
    for (i, &v) in cell.iter().enumerate() {
        if i != skip {
            key[n] = v;
            n += 1;
        }
    }
    key[..n].sort_unstable();
    key
}

fn check_dimension(dimension: usize) -> Result<()> {
    if dimension == 2 || dimension == 3 {
        Ok(())
    } else {
        Err(Error::InvalidMesh(format!(
            "dimension must be 2 or 3, got {dimension}"
        )))
    }
}

/// Barycentric coordinates of a point with respect to one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycentricCoords {
    lambdas: [f64; 4],
    len: usize,
}

impl BarycentricCoords {
    pub fn new(lambdas: &[f64]) -> Self {
        assert!(lambdas.len() == 3 || lambdas.len() == 4);
        let mut l = [0.0; 4];
        l[..lambdas.len()].copy_from_slice(lambdas);
        BarycentricCoords {
            lambdas: l,
            len: lambdas.len(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambdas[..self.len]
    }

    /// Evaluates the linear interpolant `sum(lambda_i * values_i)`.
    pub fn interpolate(&self, values: &[f64]) -> f64 {
        self.as_slice().iter().zip(values).map(|(l, v)| l * v).sum()
    }

    /// True when every component lies in `[-tol, 1 + tol]`.
    pub fn is_inside(&self, tol: f64) -> bool {
        self.as_slice().iter().all(|&l| l >= -tol && l <= 1.0 + tol)
    }
}

/// A 2D triangle or 3D tetrahedral mesh with its dual graph and
/// vertex-to-cell incidence. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    dimension: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    adjacency: FaceAdjacency,
    incidence_offsets: Vec<usize>,
    incidence: Vec<usize>,
    degeneracy_threshold: f64,
}

/// Meshes are equal when dimension, coordinates and cells match; everything
/// else is derived from those.
impl PartialEq for SimplicialMesh {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension
            && self.coords == other.coords
            && self.cells == other.cells
    }
}

impl SimplicialMesh {
    /// Builds and validates a mesh from flat coordinate and cell arrays.
    pub fn new(dimension: usize, coords: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        check_dimension(dimension)?;
        let nv = dimension + 1;
        if !coords.len().is_multiple_of(dimension) {
            return Err(Error::InvalidMesh(format!(
                "coordinate array length {} is not a multiple of {dimension}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidMesh(format!(
                "vertex {} has a non-finite coordinate",
                i / dimension
            )));
        }
        let n_vertices = coords.len() / dimension;
        if !cells.len().is_multiple_of(nv) {
            return Err(Error::InvalidMesh(format!(
                "cell array length {} is not a multiple of {nv}",
                cells.len()
            )));
        }
        for (c, cell) in cells.chunks_exact(nv).enumerate() {
            for (i, &v) in cell.iter().enumerate() {
                if v >= n_vertices {
                    return Err(Error::InvalidMesh(format!(
                        "cell {c} references vertex {v} but there are only {n_vertices} vertices"
                    )));
                }
                if cell[..i].contains(&v) {
                    return Err(Error::InvalidMesh(format!("cell {c} repeats vertex {v}")));
                }
            }
        }

        let adjacency = build_adjacency(&cells, dimension)?;

        let mut counts = vec![0usize; n_vertices + 1];
        for &v in &cells {
            counts[v + 1] += 1;
        }
        for i in 0..n_vertices {
            counts[i + 1] += counts[i];
        }
        let incidence_offsets = counts.clone();
        let mut incidence = vec![0usize; cells.len()];
        let mut cursor = counts;
        for (c, cell) in cells.chunks_exact(nv).enumerate() {
            for &v in cell {
                incidence[cursor[v]] = c;
                cursor[v] += 1;
            }
        }

        let mut mesh = SimplicialMesh {
            dimension,
            coords,
            cells,
            adjacency,
            incidence_offsets,
            incidence,
            degeneracy_threshold: 0.0,
        };
        let diag = mesh.characteristic_length();
        mesh.degeneracy_threshold = DEGENERACY_RELATIVE_THRESHOLD * diag.powi(dimension as i32);
        Ok(mesh)
    }

    pub fn from_triangles(points: &[[f64; 2]], triangles: &[[usize; 3]]) -> Result<Self> {
        Self::new(
            2,
            points.iter().flatten().copied().collect(),
            triangles.iter().flatten().copied().collect(),
        )
    }

    pub fn from_tetrahedra(points: &[[f64; 3]], tets: &[[usize; 4]]) -> Result<Self> {
        Self::new(
            3,
            points.iter().flatten().copied().collect(),
            tets.iter().flatten().copied().collect(),
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vertices_per_cell(&self) -> usize {
        self.dimension + 1
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len() / self.dimension
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len() / (self.dimension + 1)
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dimension..(v + 1) * self.dimension]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.dimension + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Facet neighbors of `cell`, sorted ascending.
    pub fn neighbors(&self, cell: usize) -> &[usize] {
        self.adjacency.neighbors(cell)
    }

    pub fn adjacency(&self) -> &FaceAdjacency {
        &self.adjacency
    }

    /// Cells incident to vertex `v`, ascending.
    pub fn cells_of_vertex(&self, v: usize) -> &[usize] {
        &self.incidence[self.incidence_offsets[v]..self.incidence_offsets[v + 1]]
    }

    pub fn degeneracy_threshold(&self) -> f64 {
        self.degeneracy_threshold
    }

    /// Axis-aligned bounding box as `(min, max)`, each of length `d`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dimension;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in self.coords.chunks_exact(d) {
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Bounding-box diagonal.
    pub fn characteristic_length(&self) -> f64 {
        if self.vertex_count() == 0 {
            return 0.0;
        }
        let (lo, hi) = self.bounding_box();
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// Signed determinant of the Jacobian `[p_0 - p_d, ..., p_{d-1} - p_d]`.
    pub fn jacobian_determinant(&self, cell: usize) -> f64 {
        let m = self.edge_matrix(cell);
        det(&m, self.dimension)
    }

    /// Area (2D) or volume (3D) of a cell: `|J| / d!`.
    pub fn cell_volume(&self, cell: usize) -> f64 {
        let factorial = if self.dimension == 2 { 2.0 } else { 6.0 };
        self.jacobian_determinant(cell).abs() / factorial
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.cell_count()).map(|c| self.cell_volume(c)).sum()
    }

    pub fn is_degenerate(&self, cell: usize) -> bool {
        self.jacobian_determinant(cell).abs() < self.degeneracy_threshold
    }

    pub fn centroid(&self, cell: usize) -> Vec<f64> {
        let d = self.dimension;
        let mut c = vec![0.0; d];
        for &v in self.cell(cell) {
            for (k, x) in self.vertex(v).iter().enumerate() {
                c[k] += x;
            }
        }
        c.iter_mut().for_each(|x| *x /= (d + 1) as f64);
        c
    }

    fn edge_matrix(&self, cell: usize) -> [[f64; 3]; 3] {
        let d = self.dimension;
        let verts = self.cell(cell);
        let last = self.vertex(verts[d]);
        let mut m = [[0.0; 3]; 3];
        for (col, &v) in verts[..d].iter().enumerate() {
            let p = self.vertex(v);
            for row in 0..d {
                m[row][col] = p[row] - last[row];
            }
        }
        m
    }

    /// Solves for the barycentric coordinates of `point` with respect to
    /// `cell`. Points outside the cell yield negative components.
    pub fn cartesian_to_barycentric(
        &self,
        cell: usize,
        point: &[f64],
    ) -> Result<BarycentricCoords> {
        let d = self.dimension;
        if point.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                found: point.len(),
            });
        }
        let mut m = self.edge_matrix(cell);
        if det(&m, d).abs() < self.degeneracy_threshold {
            return Err(Error::DegenerateCell { cell });
        }
        let last = self.vertex(self.cell(cell)[d]);
        let mut rhs = [0.0; 3];
        for k in 0..d {
            rhs[k] = point[k] - last[k];
        }
        if !solve_in_place(&mut m, &mut rhs, d) {
            return Err(Error::DegenerateCell { cell });
        }
        let mut lambdas = [0.0; 4];
        lambdas[..d].copy_from_slice(&rhs[..d]);
        lambdas[d] = 1.0 - rhs[..d].iter().sum::<f64>();
        Ok(BarycentricCoords {
            lambdas,
            len: d + 1,
        })
    }

    pub fn barycentric_to_cartesian(&self, cell: usize, coords: &BarycentricCoords) -> Vec<f64> {
        let d = self.dimension;
        let mut p = vec![0.0; d];
        for (&v, &l) in self.cell(cell).iter().zip(coords.as_slice()) {
            for (k, x) in self.vertex(v).iter().enumerate() {
                p[k] += l * x;
            }
        }
        p
    }

    /// Extrapolates the linear interpolant of `cell` (with `known_values` at
    /// its vertices, in cell order) to the position of `target_vertex`.
    pub fn barycentric_predict(
        &self,
        cell: usize,
        target_vertex: usize,
        known_values: &[f64],
    ) -> Result<f64> {
        if self.cell(cell).contains(&target_vertex) {
            return Err(Error::InvalidValue(format!(
                "vertex {target_vertex} belongs to predicting cell {cell}"
            )));
        }
        if known_values.len() != self.dimension + 1 {
            return Err(Error::LengthMismatch {
                expected: self.dimension + 1,
                found: known_values.len(),
            });
        }
        let lambdas = self.cartesian_to_barycentric(cell, self.vertex(target_vertex))?;
        Ok(lambdas.interpolate(known_values))
    }

    /// Number of connected components of the dual graph.
    pub fn dual_components(&self) -> usize {
        let n = self.cell_count();
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut components = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(c) = stack.pop() {
                for &nb in self.neighbors(c) {
                    if !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
        components
    }

    /// Vertices referenced by no cell.
    pub fn orphan_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count())
            .filter(|&v| self.cells_of_vertex(v).is_empty())
            .collect()
    }

    /// 16-byte content digest over dimension, coordinates and connectivity.
    pub fn digest(&self) -> [u8; 16] {
        let mut h = Sha256::new();
        h.update(b"umz-mesh");
        h.update([self.dimension as u8]);
        h.update((self.vertex_count() as u64).to_le_bytes());
        h.update((self.cell_count() as u64).to_le_bytes());
        for x in &self.coords {
            h.update(x.to_bits().to_le_bytes());
        }
        for &v in &self.cells {
            h.update((v as u64).to_le_bytes());
        }
        let full = h.finalize();
        let mut out = [0u8; 16];
        out.copy_from_slice(&full[..16]);
        out
    }

    /// Returns a copy with vertices relabelled: new vertex `i` is old vertex
    /// `order[i]`.
    pub fn permute_vertices(&self, order: &[usize]) -> Result<Self> {
        let n = self.vertex_count();
        if order.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: order.len(),
            });
        }
        let mut new_index = vec![usize::MAX; n];
        for (new, &old) in order.iter().enumerate() {
            if old >= n || new_index[old] != usize::MAX {
                return Err(Error::InvalidValue("order is not a permutation".into()));
            }
            new_index[old] = new;
        }
        let coords = order
            .iter()
            .flat_map(|&old| self.vertex(old).iter().copied())
            .collect();
        let cells = self.cells.iter().map(|&v| new_index[v]).collect();
        Self::new(self.dimension, coords, cells)
    }
}

fn det(m: &[[f64; 3]; 3], d: usize) -> f64 {
    if d == 2 {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    } else {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

/// Gaussian elimination with partial pivoting on the leading `n x n` block.
fn solve_in_place(a: &mut [[f64; 3]; 3], b: &mut [f64; 3], n: usize) -> bool {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return false;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row][col..n].iter_mut().zip(&pivot_row[col..n]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * b[k];
        }
        b[row] = s / a[row][row];
    }
    b[..n].iter().all(|x| x.is_finite())
}

/// One scalar value per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub name: String,
    pub units: Option<String>,
    values: Vec<f64>,
}

impl ScalarField {
    /// Rejects non-finite values.
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "field value at vertex {i} is not finite"
            )));
        }
        Ok(ScalarField {
            name: name.into(),
            units: None,
            values,
        })
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = Some(units.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(min, max)` of the values; `None` when empty.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        min_max(&self.values)
    }

    /// `max - min`, or 0 for an empty field.
    pub fn value_range(&self) -> f64 {
        self.min_max().map(|(lo, hi)| hi - lo).unwrap_or(0.0)
    }

    pub fn check_matches(&self, mesh: &SimplicialMesh) -> Result<()> {
        if self.values.len() != mesh.vertex_count() {
            return Err(Error::LengthMismatch {
                expected: mesh.vertex_count(),
                found: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn permute(&self, order: &[usize]) -> Self {
        ScalarField {
            name: self.name.clone(),
            units: self.units.clone(),
            values: order.iter().map(|&i| self.values[i]).collect(),
        }
    }
}

pub(crate) fn min_max(values: &[f64]) -> Option<(f64, f64)> {
    let mut it = values.iter();
    let first = *it.next()?;
    Some(it.fold((first, first), |(lo, hi), &x| (lo.min(x), hi.max(x))))
}

//! Incremental Delaunay triangulation (Bowyer–Watson) with exact predicates,
//! used to build synthetic test meshes.
//!
//! A triangulation starts from a box split into simplices (2 triangles or the
//! 6 Kuhn tetrahedra). Points are inserted in Z-order, each located by a
//! visibility walk from the previously created cell. A point whose insertion
//! would create an inverted or flat cell is skipped and does not appear in
//! the output mesh. In 2D a point may lie on the box boundary; in 3D it must
//! be strictly inside.

use std::collections::HashMap;

use robust::{Coord, Coord3D};

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Cell {
    v: [usize; 4],
    /// `n[i]` is the neighbor across the facet opposite `v[i]`.
    n: [usize; 4],
    alive: bool,
}

pub struct Triangulation {
    dim: usize,
    pts: Vec<[f64; 3]>,
    inserted: Vec<bool>,
    cells: Vec<Cell>,
    free: Vec<usize>,
    stamp: Vec<u32>,
    epoch: u32,
    last: usize,
    walk_state: u32,
    corner_count: usize,
}

fn c2(p: &[f64; 3]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn c3(p: &[f64; 3]) -> Coord3D<f64> {
    Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    }
}

fn morton(p: &[f64; 3], lo: &[f64; 3], span: &[f64; 3], dim: usize) -> u64 {
    let bits = if dim == 2 { 32 } else { 21 };
    let scale = ((1u64 << bits) - 1) as f64;
    let mut key = 0u64;
    for axis in 0..dim {
        let t = if span[axis] > 0.0 {
            ((p[axis] - lo[axis]) / span[axis]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = (t * scale) as u64;
        for b in 0..bits {
            key |= ((q >> b) & 1) << (b * dim + axis);
        }
    }
    key
}

impl Triangulation {
    /// Triangulation of the axis-aligned box `[lo, hi]`; `lo.len()` is 2 or 3.
    pub fn new_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let dim = lo.len();
        if !(dim == 2 || dim == 3) || hi.len() != dim {
            return Err(Error::InvalidValue("box must be 2D or 3D".into()));
        }
        if (0..dim).any(|a| !(lo[a].is_finite() && hi[a].is_finite() && lo[a] < hi[a])) {
            return Err(Error::InvalidValue("box must have positive extent".into()));
        }
        let corner = |bits: usize| {
            let mut p = [0.0; 3];
            for a in 0..dim {
                p[a] = if bits >> a & 1 == 1 { hi[a] } else { lo[a] };
            }
            p
        };
        let mut t = Triangulation {
            dim,
            pts: Vec::new(),
            inserted: Vec::new(),
            cells: Vec::new(),
            free: Vec::new(),
            stamp: Vec::new(),
            epoch: 0,
            last: 0,
            walk_state: 0x9e37_79b9,
            corner_count: 1 << dim,
        };
        for bits in 0..(1 << dim) {
            t.pts.push(corner(bits));
            t.inserted.push(true);
        }
        let raw: Vec<[usize; 4]> = if dim == 2 {
            vec![[0, 1, 3, NONE], [0, 3, 2, NONE]]
        } else {
            let axes = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            axes.iter()
                .map(|&[a, b, _]| [0, 1 << a, (1 << a) | (1 << b), 7])
                .collect()
        };
        for mut v in raw {
            if t.orient(&v, None) < 0.0 {
                v.swap(0, 1);
            }
            t.cells.push(Cell {
                v,
                n: [NONE; 4],
                alive: true,
            });
            t.stamp.push(0);
        }
        t.link_all();
        Ok(t)
    }

    fn k(&self) -> usize {
        self.dim + 1
    }

    fn link_all(&mut self) {
        let k = self.k();
        let mut map: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
        for c in 0..self.cells.len() {
            for i in 0..k {
                let key = self.facet_key(&self.cells[c].v, i);
                if let Some((o, j)) = map.remove(&key) {
                    self.cells[c].n[i] = o;
                    self.cells[o].n[j] = c;
                } else {
                    map.insert(key, (c, i));
                }
            }
        }
    }

    fn facet_key(&self, v: &[usize; 4], skip: usize) -> [usize; 3] {
        let mut key = [NONE; 3];
        let mut m = 0;
        for (i, &x) in v[..self.k()].iter().enumerate() {
            if i != skip {
                key[m] = x;
                m += 1;
            }
        }
        key[..m].sort_unstable();
        key
    }

    /// Orientation of the cell `v`, optionally with vertex `replace.0`
    /// substituted by the point `replace.1`.
    fn orient(&self, v: &[usize; 4], replace: Option<(usize, &[f64; 3])>) -> f64 {
        let p = |i: usize| -> &[f64; 3] {
            match replace {
                Some((j, q)) if j == i => q,
                _ => &self.pts[v[i]],
            }
        };
        if self.dim == 2 {
            robust::orient2d(c2(p(0)), c2(p(1)), c2(p(2)))
        } else {
            robust::orient3d(c3(p(0)), c3(p(1)), c3(p(2)), c3(p(3)))
        }
    }

    fn in_sphere(&self, c: usize, q: &[f64; 3]) -> bool {
        let v = &self.cells[c].v;
        let p = |i: usize| &self.pts[v[i]];
        let s = if self.dim == 2 {
            robust::incircle(c2(p(0)), c2(p(1)), c2(p(2)), c2(q))
        } else {
            robust::insphere(c3(p(0)), c3(p(1)), c3(p(2)), c3(p(3)), c3(q))
        };
        s > 0.0
    }

    fn contains(&self, c: usize, q: &[f64; 3]) -> bool {
        (0..self.k()).all(|i| self.orient(&self.cells[c].v, Some((i, q))) >= 0.0)
    }

    fn locate(&mut self, q: &[f64; 3]) -> Option<usize> {
        let k = self.k();
        let mut c = self.last;
        if !self.cells[c].alive {
            c = self.cells.iter().position(|x| x.alive)?;
        }
        let mut steps = 0;
        'walk: loop {
            steps += 1;
            if steps > self.cells.len() {
                break;
            }
            self.walk_state ^= self.walk_state << 13;
            self.walk_state ^= self.walk_state >> 17;
            self.walk_state ^= self.walk_state << 5;
            let start = self.walk_state as usize % k;
            for j in 0..k {
                let i = (start + j) % k;
                if self.orient(&self.cells[c].v, Some((i, q))) < 0.0 {
                    let nb = self.cells[c].n[i];
                    if nb == NONE {
                        return None;
                    }
                    c = nb;
                    continue 'walk;
                }
            }
            return Some(c);
        }
        (0..self.cells.len()).find(|&c| self.cells[c].alive && self.contains(c, q))
    }

    /// Inserts point `idx` of `self.pts`. Returns false when it was skipped.
    fn insert_index(&mut self, idx: usize) -> bool {
        let q = self.pts[idx];
        let k = self.k();
        let Some(start) = self.locate(&q) else {
            return false;
        };
        if self.cells[start].v[..k].iter().any(|&v| self.pts[v] == q) {
            return false;
        }

        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = u32::MAX);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        let mut cavity = vec![start];
        self.stamp[start] = epoch;
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            for i in 0..k {
                let nb = self.cells[c].n[i];
                if nb != NONE && self.stamp[nb] != epoch && self.in_sphere(nb, &q) {
                    self.stamp[nb] = epoch;
                    cavity.push(nb);
                    stack.push(nb);
                }
            }
        }

        // Validate every new cell before touching the structure.
        let mut facets = Vec::new();
        for &c in &cavity {
            for i in 0..k {
                let nb = self.cells[c].n[i];
                if nb != NONE && self.stamp[nb] == epoch {
                    continue;
                }
                let o = self.orient(&self.cells[c].v, Some((i, &q)));
                if o > 0.0 {
                    facets.push((c, i, nb));
                } else if !(o == 0.0 && nb == NONE && self.dim == 2) {
                    return false;
                }
            }
        }

        let mut open: Vec<([usize; 3], usize, usize)> = Vec::new();
        let mut created = Vec::with_capacity(facets.len());
        for &(c, i, nb) in &facets {
            let mut v = self.cells[c].v;
            v[i] = idx;
            let mut n = [NONE; 4];
            n[i] = nb;
            let id = match self.free.pop() {
                Some(id) => {
                    self.cells[id] = Cell { v, n, alive: true };
                    id
                }
                None => {
                    self.cells.push(Cell { v, n, alive: true });
                    self.stamp.push(0);
                    self.cells.len() - 1
                }
            };
            if nb != NONE {
                let slot = self.cells[nb].n[..k].iter().position(|&x| x == c).unwrap();
                self.cells[nb].n[slot] = id;
            }
            for j in 0..k {
                if j == i {
                    continue;
                }
                let key = self.facet_key(&v, j);
                if let Some(pos) = open.iter().position(|e| e.0 == key) {
                    let (_, o, oj) = open.swap_remove(pos);
                    self.cells[id].n[j] = o;
                    self.cells[o].n[oj] = id;
                } else {
                    open.push((key, id, j));
                }
            }
            created.push(id);
        }
        for &c in &cavity {
            self.cells[c].alive = false;
            self.free.push(c);
        }
        self.last = created[0];
        self.inserted[idx] = true;
        true
    }

    /// Inserts `points` in a spatially coherent order; returns how many were
    /// accepted.
    pub fn insert_all(&mut self, points: &[[f64; 3]]) -> usize {
        let base = self.pts.len();
        self.pts.extend_from_slice(points);
        self.inserted.resize(self.pts.len(), false);
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for p in &self.pts {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let span = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let mut order: Vec<(u64, usize)> = (base..self.pts.len())
            .filter(|&i| self.pts[i].iter().all(|x| x.is_finite()))
            .map(|i| (morton(&self.pts[i], &lo, &span, self.dim), i))
            .collect();
        order.sort_unstable();
        order
            .into_iter()
            .filter(|&(_, i)| self.insert_index(i))
            .count()
    }

    pub fn corner_count(&self) -> usize {
        self.corner_count
    }

    /// Mesh of the live cells that avoid every vertex for which `drop`
    /// returns true. Unused vertices are removed. Vertices are numbered along
    /// a Morton curve and cells by their lowest vertex, so neighbours in the
    /// mesh sit close in memory.
    pub fn to_mesh(&self, drop: impl Fn(usize) -> bool) -> Result<SimplicialMesh> {
        let k = self.k();
        let kept: Vec<&Cell> = self
            .cells
            .iter()
            .filter(|c| c.alive && !c.v[..k].iter().any(|&v| drop(v)))
            .collect();
        let mut used = vec![false; self.pts.len()];
        for c in &kept {
            for &v in &c.v[..k] {
                used[v] = true;
            }
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for (p, _) in self.pts.iter().zip(&used).filter(|(_, &u)| u) {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let span = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let mut order: Vec<(u64, usize)> = (0..self.pts.len())
            .filter(|&i| used[i])
            .map(|i| (morton(&self.pts[i], &lo, &span, self.dim), i))
            .collect();
        order.sort_unstable();

        let mut remap = vec![NONE; self.pts.len()];
        let mut coords = Vec::with_capacity(order.len() * self.dim);
        for (new, &(_, old)) in order.iter().enumerate() {
            remap[old] = new;
            coords.extend_from_slice(&self.pts[old][..self.dim]);
        }
        let mut cells: Vec<&[usize]> = kept.iter().map(|c| &c.v[..k]).collect();
        cells.sort_unstable_by_key(|c| {
            let mut key = [NONE; 4];
            for (slot, &v) in key.iter_mut().zip(c.iter()) {
                *slot = remap[v];
            }
            key.sort_unstable();
            key
        });
        let cells = cells
            .iter()
            .flat_map(|c| c.iter().map(|&v| remap[v]))
            .collect();
        SimplicialMesh::new(self.dim, coords, cells)
    }
}

/// Delaunay mesh of the box `[lo, hi]` refined by `points`.
pub fn triangulate_box(lo: &[f64], hi: &[f64], points: &[[f64; 3]]) -> Result<SimplicialMesh> {
    let mut t = Triangulation::new_box(lo, hi)?;
    t.insert_all(points);
    t.to_mesh(|_| false)
}

/// Delaunay mesh of a 2D point cloud, built inside an enclosing frame that is
/// removed afterwards. Covers the convex hull up to slivers along its edge.
pub fn triangulate_points_2d(points: &[[f64; 2]]) -> Result<SimplicialMesh> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let margin = 10.0 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let mut t = Triangulation::new_box(
        &[lo[0] - margin, lo[1] - margin],
        &[hi[0] + margin, hi[1] + margin],
    )?;
    let pts: Vec<[f64; 3]> = points.iter().map(|p| [p[0], p[1], 0.0]).collect();
    t.insert_all(&pts);
    let corners = t.corner_count();
    t.to_mesh(|v| v < corners)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for x in p.iter_mut().take(dim) {
                    *x = rng.gen_range(0.001..0.999);
                }
                p
            })
            .collect()
    }

    /// Brute-force empty-circumsphere check against every vertex.
    fn assert_delaunay(mesh: &SimplicialMesh) {
        let d = mesh.dimension();
        let p3 = |v: usize| {
            let mut p = [0.0; 3];
            p[..d].copy_from_slice(mesh.vertex(v));
            p
        };
        for c in 0..mesh.cell_count() {
            let v = mesh.cell(c);
            for u in 0..mesh.vertex_count() {
                if v.contains(&u) {
                    continue;
                }
                let s = if d == 2 {
                    robust::incircle(c2(&p3(v[0])), c2(&p3(v[1])), c2(&p3(v[2])), c2(&p3(u)))
                } else {
                    robust::insphere(
                        c3(&p3(v[0])),
                        c3(&p3(v[1])),
                        c3(&p3(v[2])),
                        c3(&p3(v[3])),
                        c3(&p3(u)),
                    )
                };
                assert!(s <= 0.0, "vertex {u} inside circumsphere of cell {c}");
            }
        }
    }

    #[test]
    fn box_only() {
        let m2 = triangulate_box(&[0.0, 0.0], &[2.0, 1.0], &[]).unwrap();
        assert_eq!((m2.vertex_count(), m2.cell_count()), (4, 2));
        assert!((m2.total_volume() - 2.0).abs() < 1e-15);
        let m3 = triangulate_box(&[0.0; 3], &[1.0; 3], &[]).unwrap();
        assert_eq!((m3.vertex_count(), m3.cell_count()), (8, 6));
        assert!((m3.total_volume() - 1.0).abs() < 1e-15);
        assert!((0..6).all(|c| m3.jacobian_determinant(c) > 0.0));
    }

    #[test]
    fn random_2d_is_delaunay_and_fills_the_box() {
        let pts = random_points(300, 2, 4);
        let m = triangulate_box(&[0.0, 0.0], &[1.0, 1.0], &pts).unwrap();
        assert_eq!(m.vertex_count(), 304);
        // Euler: 2V - 2 - hull vertices, with 4 hull vertices.
        assert_eq!(m.cell_count(), 2 * 304 - 2 - 4);
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
        assert!((0..m.cell_count()).all(|c| m.jacobian_determinant(c) > 0.0));
        assert_eq!(m.dual_components(), 1);
        assert_delaunay(&m);
    }

    #[test]
    fn random_3d_is_delaunay_and_fills_the_box() {
        let pts = random_points(200, 3, 5);
        let m = triangulate_box(&[0.0; 3], &[1.0; 3], &pts).unwrap();
        assert_eq!(m.vertex_count(), 208);
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
        assert!((0..m.cell_count()).all(|c| m.jacobian_determinant(c) > 0.0));
        assert_eq!(m.dual_components(), 1);
        assert_delaunay(&m);
    }

    #[test]
    fn boundary_points_in_2d() {
        let pts: Vec<[f64; 3]> = (1..10)
            .flat_map(|i| {
                let t = i as f64 / 10.0;
                [
                    [t, 0.0, 0.0],
                    [1.0, t, 0.0],
                    [t, 1.0, 0.0],
                    [0.0, t, 0.0],
                    [t, 0.37 * t + 0.3, 0.0],
                ]
            })
            .collect();
        let m = triangulate_box(&[0.0, 0.0], &[1.0, 1.0], &pts).unwrap();
        assert_eq!(m.vertex_count(), 4 + pts.len());
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
        assert!(m.orphan_vertices().is_empty());
    }

    #[test]
    fn duplicates_and_outside_points_are_skipped() {
        let pts = [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [2.0, 0.5, 0.0]];
        let m = triangulate_box(&[0.0, 0.0], &[1.0, 1.0], &pts).unwrap();
        assert_eq!(m.vertex_count(), 5);
        assert_eq!(m.cell_count(), 4);
    }

    #[test]
    fn point_cloud_with_frame_removed() {
        let pts: Vec<[f64; 2]> = (0..64)
            .map(|i| {
                let a = i as f64 / 64.0 * std::f64::consts::TAU;
                [a.cos(), a.sin()]
            })
            .chain(
                random_points(200, 2, 8)
                    .iter()
                    .map(|p| [p[0] - 0.5, p[1] - 0.5]),
            )
            .collect();
        let m = triangulate_points_2d(&pts).unwrap();
        assert_eq!(m.vertex_count(), pts.len());
        assert!(m.orphan_vertices().is_empty());
        assert_delaunay(&m);
        // Area of the inscribed 64-gon.
        let polygon = 32.0 * (std::f64::consts::TAU / 64.0).sin();
        assert!(
            (m.total_volume() - polygon).abs() < 1e-9,
            "{}",
            m.total_volume()
        );
    }
}

//! Deterministic synthetic datasets.
//!
//! * `gaussian_blobs_2d`: two Gaussian blobs half a turn apart orbiting the
//!   centre of a disk; optional timesteps.
//! * `heated_plate_2d`: a unit plate whose star-shaped hot region is joined to
//!   the cold exterior by a linear ramp, sampled densely around the ramp.
//! * `random_delaunay_2d` / `random_delaunay_3d`: uniform random points in the
//!   unit square or cube with a smooth analytic field.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::delaunay::{triangulate_box, triangulate_points_2d};
use super::DatasetBundle;
use crate::error::{Error, Result};
use crate::mesh::{ScalarField, SimplicialMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    GaussianBlobs2d,
    HeatedPlate2d,
    RandomDelaunay2d,
    RandomDelaunay3d,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 4] = [
        SyntheticKind::GaussianBlobs2d,
        SyntheticKind::HeatedPlate2d,
        SyntheticKind::RandomDelaunay2d,
        SyntheticKind::RandomDelaunay3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::GaussianBlobs2d => "gaussian_blobs_2d",
            SyntheticKind::HeatedPlate2d => "heated_plate_2d",
            SyntheticKind::RandomDelaunay2d => "random_delaunay_2d",
            SyntheticKind::RandomDelaunay3d => "random_delaunay_3d",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            SyntheticKind::GaussianBlobs2d => &[
                ("n", 4000.0),
                ("sigma", 0.2),
                ("amplitude", 1.0),
                ("orbit", 0.5),
                ("period", 1.0),
                ("time", 0.0),
                ("steps", 1.0),
                ("dt", 0.1),
            ],
            SyntheticKind::HeatedPlate2d => &[
                ("r_dense", 0.014),
                ("r_sparse", 0.038),
                ("band", 0.1),
                ("hot", 100.0),
                ("cold", 20.0),
            ],
            SyntheticKind::RandomDelaunay2d | SyntheticKind::RandomDelaunay3d => &[("n", 1000.0)],
        }
    }
}

/// `key=value` parameters for a generator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthParams(BTreeMap<String, f64>);

impl SynthParams {
    /// Parses `k=v,k=v`; an empty string gives no parameters.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidValue(format!("expected key=value, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidValue(format!("`{item}`: value is not a number")))?;
            map.insert(k.trim().to_string(), v);
        }
        Ok(SynthParams(map))
    }

    pub fn set(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    fn resolve(&self, kind: SyntheticKind) -> Result<BTreeMap<&'static str, f64>> {
        let defaults = kind.defaults();
        for (k, v) in &self.0 {
            if !defaults.iter().any(|(d, _)| d == k) {
                return Err(Error::InvalidValue(format!(
                    "unknown parameter `{k}` for {}",
                    kind.name()
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidValue(format!(
                    "parameter `{k}` is not finite"
                )));
            }
        }
        Ok(defaults
            .iter()
            .map(|&(k, d)| (k, self.0.get(k).copied().unwrap_or(d)))
            .collect())
    }
}

fn positive(p: &BTreeMap<&str, f64>, key: &str) -> Result<f64> {
    let v = p[key];
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidValue(format!(
            "parameter `{key}` must be positive, got {v}"
        )))
    }
}

fn count(p: &BTreeMap<&str, f64>, key: &str, min: usize) -> Result<usize> {
    let v = p[key];
    if v.fract() != 0.0 || v < min as f64 || v > 1e8 {
        return Err(Error::InvalidValue(format!(
            "parameter `{key}` must be an integer of at least {min}, got {v}"
        )));
    }
    Ok(v as usize)
}

pub fn generate_synthetic(
    kind: SyntheticKind,
    params: &SynthParams,
    rng_seed: u64,
) -> Result<DatasetBundle> {
    let p = params.resolve(kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    match kind {
        SyntheticKind::GaussianBlobs2d => gaussian_blobs(&p, &mut rng),
        SyntheticKind::HeatedPlate2d => heated_plate(&p, &mut rng),
        SyntheticKind::RandomDelaunay2d => random_delaunay(&p, &mut rng, 2),
        SyntheticKind::RandomDelaunay3d => random_delaunay(&p, &mut rng, 3),
    }
}

/// Parameters of the rotating blob field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobField {
    pub sigma: f64,
    pub amplitude: f64,
    pub orbit: f64,
    pub period: f64,
}

impl BlobField {
    pub fn eval(&self, x: f64, y: f64, time: f64) -> f64 {
        let phase = (time / self.period).rem_euclid(1.0) * TAU;
        let two_sigma2 = 2.0 * self.sigma * self.sigma;
        [phase, phase + PI]
            .iter()
            .map(|a| {
                let (cx, cy) = (self.orbit * a.cos(), self.orbit * a.sin());
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                self.amplitude * (-r2 / two_sigma2).exp()
            })
            .sum()
    }
}

fn disk_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let h = (PI / n as f64).sqrt();
    let ring = (TAU / h).round().max(8.0) as usize;
    let mut pts: Vec<[f64; 2]> = (0..ring)
        .map(|i| {
            let a = i as f64 / ring as f64 * TAU;
            [a.cos(), a.sin()]
        })
        .collect();
    let cells = (1.0 / h).ceil() as i64;
    for i in -cells..=cells {
        for j in -cells..=cells {
            let x = (i as f64 + rng.gen_range(-0.3..0.3)) * h;
            let y = (j as f64 + rng.gen_range(-0.3..0.3)) * h;
            if x * x + y * y < (1.0 - 0.5 * h).powi(2) {
                pts.push([x, y]);
            }
        }
    }
    pts
}

fn gaussian_blobs(p: &BTreeMap<&str, f64>, rng: &mut ChaCha8Rng) -> Result<DatasetBundle> {
    let n = count(p, "n", 16)?;
    let field = BlobField {
        sigma: positive(p, "sigma")?,
        amplitude: p["amplitude"],
        orbit: p["orbit"],
        period: positive(p, "period")?,
    };
    let steps = count(p, "steps", 1)?;
    let mesh = triangulate_points_2d(&disk_points(n, rng))?;
    let eval = |t: f64| -> Vec<f64> {
        (0..mesh.vertex_count())
            .map(|v| {
                let q = mesh.vertex(v);
                field.eval(q[0], q[1], t)
            })
            .collect()
    };
    if steps == 1 {
        let f = ScalarField::new("value", eval(p["time"]))?;
        return Ok(DatasetBundle::new(mesh, vec![f]));
    }
    let times: Vec<f64> = (0..steps).map(|i| p["time"] + i as f64 * p["dt"]).collect();
    let fields = times
        .iter()
        .enumerate()
        .map(|(i, &t)| ScalarField::new(format!("value_t{i:03}"), eval(t)))
        .collect::<Result<Vec<_>>>()?;
    let mut bundle = DatasetBundle::new(mesh, fields);
    bundle.times = times;
    Ok(bundle)
}

/// Radius of the star-shaped hot region at angle `theta` around (0.5, 0.5).
pub fn star_radius(theta: f64) -> f64 {
    0.25 * (1.0 + 0.3 * (3.0 * theta).sin())
}

/// Signed radial distance from the star boundary, negative inside.
pub fn star_offset(x: f64, y: f64) -> f64 {
    let (dx, dy) = (x - 0.5, y - 0.5);
    dx.hypot(dy) - star_radius(dy.atan2(dx))
}

fn plate_temperature(x: f64, y: f64, band: f64, hot: f64, cold: f64) -> f64 {
    let t = (star_offset(x, y) / band + 0.5).clamp(0.0, 1.0);
    hot + (cold - hot) * t
}

fn heated_plate(p: &BTreeMap<&str, f64>, rng: &mut ChaCha8Rng) -> Result<DatasetBundle> {
    let r_dense = positive(p, "r_dense")?;
    let r_sparse = positive(p, "r_sparse")?;
    let band = positive(p, "band")?;
    if r_dense > r_sparse || r_dense < 1e-3 || r_sparse > 0.25 {
        return Err(Error::InvalidValue(
            "need 1e-3 <= r_dense <= r_sparse <= 0.25".into(),
        ));
    }
    let radius = |x: f64, y: f64| {
        if star_offset(x, y).abs() <= 0.5 * band + r_sparse {
            r_dense
        } else {
            r_sparse
        }
    };

    let bins = (1.0 / r_dense).ceil() as usize;
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); bins * bins];
    let bin = |x: f64| ((x * bins as f64) as usize).min(bins - 1);
    let reach = (r_sparse / r_dense).ceil() as isize;
    let mut pts: Vec<[f64; 2]> = Vec::new();
    let mut accept = |q: [f64; 2], pts: &mut Vec<[f64; 2]>, force: bool| {
        let rq = radius(q[0], q[1]);
        let (bx, by) = (bin(q[0]) as isize, bin(q[1]) as isize);
        if !force {
            for gx in (bx - reach).max(0)..=(bx + reach).min(bins as isize - 1) {
                for gy in (by - reach).max(0)..=(by + reach).min(bins as isize - 1) {
                    for &o in &grid[gx as usize * bins + gy as usize] {
                        let s: [f64; 2] = pts[o];
                        let r = 0.5 * (rq + radius(s[0], s[1]));
                        if (s[0] - q[0]).powi(2) + (s[1] - q[1]).powi(2) < r * r {
                            return;
                        }
                    }
                }
            }
        }
        grid[bx as usize * bins + by as usize].push(pts.len());
        pts.push(q);
    };

    for side in 0..4 {
        let mut t = 0.0;
        loop {
            let at = |t: f64| match side {
                0 => [t, 0.0],
                1 => [1.0, t],
                2 => [1.0 - t, 1.0],
                _ => [0.0, 1.0 - t],
            };
            let q = at(t);
            t += radius(q[0], q[1]);
            if t > 1.0 - 0.5 * radius(at(1.0)[0], at(1.0)[1]) {
                break;
            }
            accept(at(t), &mut pts, true);
        }
    }
    let attempts = (30.0 / (r_dense * r_dense)) as usize;
    for _ in 0..attempts {
        let q = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let r = radius(q[0], q[1]);
        if q.iter().all(|&c| c > 0.5 * r && c < 1.0 - 0.5 * r) {
            accept(q, &mut pts, false);
        }
    }

    let pts3: Vec<[f64; 3]> = pts.iter().map(|q| [q[0], q[1], 0.0]).collect();
    let mesh = triangulate_box(&[0.0, 0.0], &[1.0, 1.0], &pts3)?;
    let values = (0..mesh.vertex_count())
        .map(|v| {
            let q = mesh.vertex(v);
            plate_temperature(q[0], q[1], band, p["hot"], p["cold"])
        })
        .collect();
    let field = ScalarField::new("temperature", values)?;
    Ok(DatasetBundle::new(mesh, vec![field]))
}

/// Smooth analytic field used by the random Delaunay generators.
pub fn smooth_field(q: &[f64]) -> f64 {
    let z = q.get(2).copied().unwrap_or(0.0);
    (3.0 * q[0]).sin() + (4.0 * q[1]).cos() + 0.5 * (5.0 * z).sin()
}

fn random_delaunay(
    p: &BTreeMap<&str, f64>,
    rng: &mut ChaCha8Rng,
    dim: usize,
) -> Result<DatasetBundle> {
    let corners = 1 << dim;
    let n = count(p, "n", corners)?;
    let pts: Vec<[f64; 3]> = (0..n - corners)
        .map(|_| {
            let mut q = [0.0; 3];
            for x in q.iter_mut().take(dim) {
                *x = loop {
                    let v: f64 = rng.gen();
                    if v > 0.0 {
                        break v;
                    }
                };
            }
            q
        })
        .collect();
    let mesh = triangulate_box(&vec![0.0; dim], &vec![1.0; dim], &pts)?;
    let values = (0..mesh.vertex_count())
        .map(|v| smooth_field(mesh.vertex(v)))
        .collect();
    let field = ScalarField::new("value", values)?;
    Ok(DatasetBundle::new(mesh, vec![field]))
}

/// Shorthand for a 2D random Delaunay mesh with the smooth field.
pub fn random_mesh_2d(n: usize, rng_seed: u64) -> Result<(SimplicialMesh, ScalarField)> {
    let b = generate_synthetic(
        SyntheticKind::RandomDelaunay2d,
        &SynthParams::default().set("n", n as f64),
        rng_seed,
    )?;
    let field = b.fields.into_iter().next().unwrap();
    Ok((b.mesh, field))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_parse_and_validate() {
        let p = SynthParams::parse("n=50, sigma=0.3").unwrap();
        assert!(generate_synthetic(SyntheticKind::GaussianBlobs2d, &p, 1).is_ok());
        let bad = SynthParams::parse("bogus=1").unwrap();
        assert!(generate_synthetic(SyntheticKind::RandomDelaunay2d, &bad, 1).is_err());
        assert!(SynthParams::parse("n").is_err());
        assert!(SynthParams::parse("n=abc").is_err());
        let neg = SynthParams::default().set("n", 2.0);
        assert!(generate_synthetic(SyntheticKind::RandomDelaunay2d, &neg, 1).is_err());
        for k in SyntheticKind::ALL {
            assert_eq!(SyntheticKind::from_name(k.name()), Some(k));
        }
    }

    #[test]
    fn blobs_are_periodic() {
        let f = BlobField {
            sigma: 0.2,
            amplitude: 1.0,
            orbit: 0.5,
            period: 1.0,
        };
        for &(x, y) in &[(0.1, 0.2), (-0.5, 0.0), (0.3, -0.7)] {
            assert_eq!(f.eval(x, y, 0.25), f.eval(x, y, 1.25));
        }
        // Half a period swaps the blobs, leaving the field unchanged.
        assert!((f.eval(0.2, 0.1, 0.0) - f.eval(0.2, 0.1, 0.5)).abs() < 1e-12);
        assert!((f.eval(0.5, 0.0, 0.0) - f.eval(0.5, 0.0, 0.25)).abs() > 0.1);
    }

    #[test]
    fn blob_timesteps() {
        let p = SynthParams::parse("n=300,steps=3,dt=0.5").unwrap();
        let b = generate_synthetic(SyntheticKind::GaussianBlobs2d, &p, 2).unwrap();
        assert_eq!(b.fields.len(), 3);
        assert_eq!(b.times, vec![0.0, 0.5, 1.0]);
        assert_eq!(b.fields[0].values(), b.fields[2].values());
        assert_eq!(b.fields[1].name, "value_t001");
    }

    #[test]
    fn random_2d_mesh_is_valid() {
        let p = SynthParams::default().set("n", 1000.0);
        let a = generate_synthetic(SyntheticKind::RandomDelaunay2d, &p, 11).unwrap();
        let b = generate_synthetic(SyntheticKind::RandomDelaunay2d, &p, 11).unwrap();
        assert_eq!(a.mesh.digest(), b.mesh.digest());
        let m = &a.mesh;
        assert!(m.vertex_count() >= 990 && m.vertex_count() <= 1000);
        assert_eq!(m.dual_components(), 1);
        assert!((0..m.cell_count()).all(|c| !m.is_degenerate(c)));
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
        a.validate().unwrap();
    }

    #[test]
    fn random_3d_mesh_is_valid() {
        let p = SynthParams::default().set("n", 500.0);
        let b = generate_synthetic(SyntheticKind::RandomDelaunay3d, &p, 3).unwrap();
        let m = &b.mesh;
        assert_eq!(m.dimension(), 3);
        assert!(m.vertex_count() >= 490);
        assert_eq!(m.dual_components(), 1);
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
        assert!(m.orphan_vertices().is_empty());
    }

    #[test]
    fn heated_plate_is_dense_in_the_band() {
        let b =
            generate_synthetic(SyntheticKind::HeatedPlate2d, &SynthParams::default(), 7).unwrap();
        let m = &b.mesh;
        b.validate().unwrap();
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
        assert_eq!(m.dual_components(), 1);
        // Count vertices per unit area over a 40x40 bin grid, split by whether
        // the bin centre lies in the ramp band.
        let n = 40;
        let mut counts = vec![0usize; n * n];
        for v in 0..m.vertex_count() {
            let q = m.vertex(v);
            let i = ((q[0] * n as f64) as usize).min(n - 1);
            let j = ((q[1] * n as f64) as usize).min(n - 1);
            counts[i * n + j] += 1;
        }
        let (mut band, mut band_bins, mut rest, mut rest_bins) = (0, 0, 0, 0);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = ((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                if star_offset(x, y).abs() < 0.05 {
                    band += counts[i * n + j];
                    band_bins += 1;
                } else if star_offset(x, y).abs() > 0.15 {
                    rest += counts[i * n + j];
                    rest_bins += 1;
                }
            }
        }
        let ratio = (band as f64 / band_bins as f64) / (rest as f64 / rest_bins as f64);
        assert!(ratio >= 2.0, "density ratio {ratio}");
        let t = b.fields[0].values();
        let (lo, hi) = b.fields[0].min_max().unwrap();
        assert_eq!((lo, hi), (20.0, 100.0));
        assert_eq!(t.len(), m.vertex_count());
    }
}

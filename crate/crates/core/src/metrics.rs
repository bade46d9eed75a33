//! Pointwise (MSE family) and continuous (CMSE family) error metrics.
//!
//! The continuous metrics integrate the squared difference of the two
//! piecewise-linear interpolants over every cell, so each vertex is weighted
//! by the volume it influences rather than counted once.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{ScalarField, SimplicialMesh};

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

fn check_field(mesh: &SimplicialMesh, original: &[f64], decompressed: &[f64]) -> Result<()> {
    check_lengths(original, decompressed)?;
    if original.len() != mesh.vertex_count() {
        return Err(Error::LengthMismatch {
            expected: mesh.vertex_count(),
            found: original.len(),
        });
    }
    Ok(())
}

/// Mean squared vertexwise difference. The squares are summed in ascending
/// order, so the result does not depend on vertex numbering.
pub fn mse(original: &[f64], decompressed: &[f64]) -> Result<f64> {
    check_lengths(original, decompressed)?;
    let mut squares: Vec<f64> = original
        .iter()
        .zip(decompressed)
        .map(|(a, b)| (b - a) * (b - a))
        .collect();
    squares.sort_unstable_by(f64::total_cmp);
    Ok(squares.iter().sum::<f64>() / original.len() as f64)
}

/// Exact integral of the squared linear error over one cell, given the
/// vertex deltas `f̂ᵢ − fᵢ` in cell order.
///
/// For a simplex of dimension d, `∫ (Σ λᵢdᵢ)² = |J| · 2/(d+2)! · Σ_{i≤j} dᵢdⱼ`,
/// which is `|J|/12` for triangles and `|J|/60` for tetrahedra.
pub fn cellwise_squared_error(mesh: &SimplicialMesh, cell: usize, deltas: &[f64]) -> f64 {
    let coefficient = match mesh.dimension() {
        2 => 1.0 / 12.0,
        _ => 1.0 / 60.0,
    };
    let mut pairs = 0.0;
    for i in 0..deltas.len() {
        for j in i..deltas.len() {
            pairs += deltas[i] * deltas[j];
        }
    }
    mesh.jacobian_determinant(cell).abs() * coefficient * pairs
}

fn cell_deltas(
    mesh: &SimplicialMesh,
    cell: usize,
    original: &[f64],
    decompressed: &[f64],
) -> [f64; 4] {
    let mut d = [0.0; 4];
    for (k, &v) in mesh.cell(cell).iter().enumerate() {
        d[k] = decompressed[v] - original[v];
    }
    d
}

/// Volume-weighted mean squared error of the piecewise-linear fields.
/// Degenerate cells contribute to neither the integral nor the volume.
pub fn cmse(mesh: &SimplicialMesh, original: &[f64], decompressed: &[f64]) -> Result<f64> {
    check_field(mesh, original, decompressed)?;
    let k = mesh.vertices_per_cell();
    let mut integral = 0.0;
    let mut volume = 0.0;
    for c in 0..mesh.cell_count() {
        if mesh.is_degenerate(c) {
            continue;
        }
        let d = cell_deltas(mesh, c, original, decompressed);
        integral += cellwise_squared_error(mesh, c, &d[..k]);
        volume += mesh.cell_volume(c);
    }
    if volume <= 0.0 {
        return Err(Error::InvalidValue("mesh has zero total volume".into()));
    }
    Ok(integral / volume)
}

/// Sum of the volumes of the cells incident to each vertex.
pub fn vertex_incident_volume(mesh: &SimplicialMesh) -> Vec<f64> {
    let mut out = vec![0.0; mesh.vertex_count()];
    for c in 0..mesh.cell_count() {
        let vol = mesh.cell_volume(c);
        for &v in mesh.cell(c) {
            out[v] += vol;
        }
    }
    out
}

/// Draws points uniformly over the mesh by volume.
struct VolumeSampler<'a> {
    mesh: &'a SimplicialMesh,
    cumulative: Vec<f64>,
    rng: ChaCha8Rng,
}

impl<'a> VolumeSampler<'a> {
    fn new(mesh: &'a SimplicialMesh, rng_seed: u64) -> Result<Self> {
        let mut total = 0.0;
        let cumulative: Vec<f64> = (0..mesh.cell_count())
            .map(|c| {
                if !mesh.is_degenerate(c) {
                    total += mesh.cell_volume(c);
                }
                total
            })
            .collect();
        if total <= 0.0 {
            return Err(Error::InvalidValue("mesh has zero total volume".into()));
        }
        Ok(VolumeSampler {
            mesh,
            cumulative,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        })
    }

    /// A cell and uniform barycentric coordinates inside it.
    fn sample(&mut self, lambdas: &mut [f64]) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = self.rng.gen::<f64>() * total;
        let cell = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        // Normalized exponentials are uniform on the simplex.
        let mut sum = 0.0;
        for l in lambdas.iter_mut() {
            let e = -(1.0 - self.rng.gen::<f64>()).ln();
            *l = e;
            sum += e;
        }
        for l in lambdas.iter_mut() {
            *l /= sum;
        }
        cell
    }

    fn squared_error(&mut self, original: &[f64], decompressed: &[f64]) -> f64 {
        let mut lambdas = [0.0; 4];
        let k = self.mesh.vertices_per_cell();
        let cell = self.sample(&mut lambdas[..k]);
        let d = cell_deltas(self.mesh, cell, original, decompressed);
        let e: f64 = (0..k).map(|i| lambdas[i] * d[i]).sum();
        e * e
    }
}

/// Monte Carlo estimate of [`cmse`] with its standard error.
pub fn monte_carlo_cmse(
    mesh: &SimplicialMesh,
    original: &[f64],
    decompressed: &[f64],
    n_samples: usize,
    rng_seed: u64,
) -> Result<(f64, f64)> {
    check_field(mesh, original, decompressed)?;
    if n_samples == 0 {
        return Err(Error::InvalidValue("need at least one sample".into()));
    }
    let mut sampler = VolumeSampler::new(mesh, rng_seed)?;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n_samples {
        let x = sampler.squared_error(original, decompressed);
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let stderr = if n_samples > 1 {
        (m2 / (n_samples - 1) as f64 / n_samples as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

/// Repeatedly adds `samples_per_iter` uniformly random nodes whose original and
/// decompressed values are interpolated, returning the vertexwise MSE over the
/// augmented node set after each iteration.
pub fn convergence_experiment(
    mesh: &SimplicialMesh,
    original: &[f64],
    decompressed: &[f64],
    samples_per_iter: usize,
    iters: usize,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    check_field(mesh, original, decompressed)?;
    let mut sampler = VolumeSampler::new(mesh, rng_seed)?;
    let mut sum: f64 = original
        .iter()
        .zip(decompressed)
        .map(|(a, b)| (b - a) * (b - a))
        .sum();
    let mut count = original.len();
    let mut series = Vec::with_capacity(iters);
    for _ in 0..iters {
        for _ in 0..samples_per_iter {
            sum += sampler.squared_error(original, decompressed);
        }
        count += samples_per_iter;
        series.push(sum / count as f64);
    }
    Ok(series)
}

/// Pointwise and continuous statistics for one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub mse: f64,
    pub rmse: f64,
    pub nrmse: f64,
    pub psnr: f64,
    pub cmse: f64,
    pub crmse: f64,
    pub cnrmse: f64,
    pub cpsnr: f64,
    pub max_abs_error: f64,
    /// `f_max − f_min` of the original field.
    pub value_range: f64,
    /// False when the original field is constant, making the normalized
    /// metrics NaN.
    pub range_defined: bool,
    pub compression_ratio: Option<f64>,
    pub bit_rate: Option<f64>,
}

fn psnr_from(normalized: f64) -> f64 {
    if normalized == 0.0 {
        f64::INFINITY
    } else {
        -20.0 * normalized.log10()
    }
}

impl MetricsReport {
    pub fn compute(
        mesh: &SimplicialMesh,
        original: &ScalarField,
        decompressed: &ScalarField,
    ) -> Result<Self> {
        let (a, b) = (original.values(), decompressed.values());
        check_field(mesh, a, b)?;
        let mse = mse(a, b)?;
        let cmse = cmse(mesh, a, b)?;
        let value_range = original.value_range();
        let range_defined = value_range > 0.0;
        let rmse = mse.sqrt();
        let crmse = cmse.sqrt();
        let (nrmse, cnrmse) = if range_defined {
            (rmse / value_range, crmse / value_range)
        } else {
            (f64::NAN, f64::NAN)
        };
        let psnr = if rmse == 0.0 {
            f64::INFINITY
        } else {
            psnr_from(nrmse)
        };
        let cpsnr = if crmse == 0.0 {
            f64::INFINITY
        } else {
            psnr_from(cnrmse)
        };
        let max_abs_error = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        Ok(MetricsReport {
            mse,
            rmse,
            nrmse,
            psnr,
            cmse,
            crmse,
            cnrmse,
            cpsnr,
            max_abs_error,
            value_range,
            range_defined,
            compression_ratio: None,
            bit_rate: None,
        })
    }

    /// Attaches CR and BR for a payload of `payload_bytes`.
    pub fn with_sizes(mut self, vertex_count: usize, payload_bytes: usize) -> Result<Self> {
        self.compression_ratio = Some(crate::bitstream::compression_ratio(
            crate::bitstream::original_size(vertex_count),
            payload_bytes,
        )?);
        self.bit_rate = Some(crate::bitstream::bit_rate(payload_bytes, vertex_count)?);
        Ok(self)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("mse", self.mse.to_string()),
            ("rmse", self.rmse.to_string()),
            ("nrmse", self.nrmse.to_string()),
            ("psnr", self.psnr.to_string()),
            ("cmse", self.cmse.to_string()),
            ("crmse", self.crmse.to_string()),
            ("cnrmse", self.cnrmse.to_string()),
            ("cpsnr", self.cpsnr.to_string()),
            ("max_abs_error", self.max_abs_error.to_string()),
            ("value_range", self.value_range.to_string()),
            ("range_defined", self.range_defined.to_string()),
        ];
        if let Some(cr) = self.compression_ratio {
            out.push(("cr", cr.to_string()));
        }
        if let Some(br) = self.bit_rate {
            out.push(("br", br.to_string()));
        }
        out
    }

    /// One `key=value` pair per line.
    pub fn to_key_value(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn csv_header(&self) -> String {
        let keys: Vec<&str> = self.entries().into_iter().map(|(k, _)| k).collect();
        keys.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        let values: Vec<String> = self.entries().into_iter().map(|(_, v)| v).collect();
        values.join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> SimplicialMesh {
        SimplicialMesh::from_triangles(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]]).unwrap()
    }

    fn unit_tet() -> SimplicialMesh {
        SimplicialMesh::from_tetrahedra(
            &[
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            &[[0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn mse_by_hand() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0; 3], &[0.5; 3]).unwrap(), 0.25);
        let a = [0.3, -1.2, 4.0, 2.2, 0.0];
        let b = [0.1, -1.0, 4.5, 2.0, -0.3];
        let hand = (0.04 + 0.04 + 0.25 + 0.04 + 0.09) / 5.0;
        assert!((mse(&a, &b).unwrap() - hand).abs() < 1e-15);
        assert!(matches!(
            mse(&a, &b[..4]),
            Err(Error::LengthMismatch { .. })
        ));
        let (ra, rb): (Vec<f64>, Vec<f64>) = a.iter().zip(&b).rev().map(|(x, y)| (*x, *y)).unzip();
        assert_eq!(
            mse(&ra, &rb).unwrap().to_bits(),
            mse(&a, &b).unwrap().to_bits()
        );
    }

    #[test]
    fn unit_simplex_closed_forms() {
        let tri = unit_triangle();
        assert!((cellwise_squared_error(&tri, 0, &[1.0, 0.0, 0.0]) - 1.0 / 12.0).abs() < 1e-15);
        assert!((cmse(&tri, &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        let tet = unit_tet();
        assert!(
            (cellwise_squared_error(&tet, 0, &[1.0, 0.0, 0.0, 0.0]) - 1.0 / 60.0).abs() < 1e-15
        );
        assert!((cmse(&tet, &[0.0; 4], &[1.0, 0.0, 0.0, 0.0]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(cellwise_squared_error(&tet, 0, &[0.0; 4]), 0.0);
    }

    #[test]
    fn constant_offset_gives_square() {
        let tet = unit_tet();
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = a.map(|x| x + 0.5);
        assert!((cmse(&tet, &a, &b).unwrap() - 0.25).abs() < 1e-15);
        let series = convergence_experiment(&tet, &a, &b, 100, 5, 3).unwrap();
        assert!(series.iter().all(|m| (m - 0.25).abs() < 1e-12));
    }

    #[test]
    fn monte_carlo_matches_unit_tet() {
        let tet = unit_tet();
        let (est, se) =
            monte_carlo_cmse(&tet, &[0.0; 4], &[1.0, 0.0, 0.0, 0.0], 1_000_000, 9).unwrap();
        assert!(se > 0.0);
        assert!((est - 0.1).abs() < 3.0 * se, "{est} ± {se}");
        let (zero, zse) = monte_carlo_cmse(&tet, &[0.0; 4], &[0.0; 4], 100, 1).unwrap();
        assert_eq!((zero, zse), (0.0, 0.0));
    }

    #[test]
    fn stderr_shrinks_with_samples() {
        let tri = unit_triangle();
        let d = [0.0, 0.0, 0.0];
        let e = [1.0, -0.5, 0.2];
        let (_, s1) = monte_carlo_cmse(&tri, &d, &e, 40_000, 5).unwrap();
        let (_, s2) = monte_carlo_cmse(&tri, &d, &e, 80_000, 5).unwrap();
        let ratio = s2 / s1;
        assert!(
            (ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.05,
            "{ratio}"
        );
    }

    #[test]
    fn degenerate_cells_are_ignored() {
        let mesh = SimplicialMesh::from_triangles(
            &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 0.0]],
            &[[0, 1, 2], [0, 1, 3]],
        )
        .unwrap();
        let got = cmse(&mesh, &[0.0; 4], &[1.0, 0.0, 0.0, 5.0]).unwrap();
        assert!((got - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn report_for_perfect_and_constant() {
        let tri = unit_triangle();
        let f = ScalarField::new("f", vec![0.0, 1.0, 2.0]).unwrap();
        let r = MetricsReport::compute(&tri, &f, &f).unwrap();
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.cmse, 0.0);
        assert_eq!(r.psnr, f64::INFINITY);
        assert_eq!(r.cpsnr, f64::INFINITY);
        assert!(r.range_defined);

        let c = ScalarField::new("c", vec![3.0; 3]).unwrap();
        let g = ScalarField::new("g", vec![3.1; 3]).unwrap();
        let r = MetricsReport::compute(&tri, &c, &g).unwrap();
        assert!(!r.range_defined);
        assert!(r.nrmse.is_nan() && r.cnrmse.is_nan() && r.psnr.is_nan());
        assert!((r.cmse - 0.01).abs() < 1e-12);

        let h = ScalarField::new("h", vec![0.1, 1.1, 2.1]).unwrap();
        let r = MetricsReport::compute(&tri, &f, &h)
            .unwrap()
            .with_sizes(3, 6)
            .unwrap();
        assert!((r.psnr - 20.0 * (2.0f64 / 0.1).log10()).abs() < 1e-9);
        assert!((r.psnr - r.cpsnr).abs() < 1e-9);
        assert_eq!(r.compression_ratio, Some(4.0));
        assert_eq!(r.bit_rate, Some(16.0));
        let kv = r.to_key_value();
        assert!(kv.starts_with("mse="));
        assert!(kv.contains("\ncr=4\n"));
        assert_eq!(
            r.csv_header().split(',').count(),
            r.to_csv_row().split(',').count()
        );
    }
}

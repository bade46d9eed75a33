//! Benchmark sweeps over datasets, fields, predictors and relative error
//! bounds.
//!
//! Config format, one directive per line, `#` starts a comment:
//!
//! ```text
//! dataset plate gen:heated_plate_2d:r_dense=0.014@7
//! dataset ocean data/ocean.vtk
//! fields temperature salinity      # applies to the preceding dataset
//! xi 0.1 1 5                       # percent of the value range
//! predictor traversal linear1d
//! backend zstd
//! code_bits 16
//! ```
//!
//! A `gen:` source is `gen:<kind>[:k=v,...][@seed]`. Relative paths resolve
//! against the config file's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::backend::Backend;
use crate::bitstream::{self, Predictor};
use crate::codec::DEFAULT_CODE_BITS;
use crate::error::{Error, Result};
use crate::io::synth::{generate_synthetic, SynthParams, SyntheticKind};
use crate::io::{self, DatasetBundle};
use crate::metrics::MetricsReport;
use crate::pipeline::{compress_field, decompress_payload, CompressOptions, ErrorBound};

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    File(PathBuf),
    Synthetic {
        kind: SyntheticKind,
        params: SynthParams,
        seed: u64,
    },
}

impl DatasetSource {
    /// Parses a path or a `gen:` source.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let Some(desc) = text.strip_prefix("gen:") else {
            return Ok(DatasetSource::File(base.join(text)));
        };
        let (desc, seed) = match desc.rsplit_once('@') {
            Some((s, seed)) => (
                s,
                seed.parse()
                    .map_err(|_| Error::InvalidValue(format!("bad generator seed `{seed}`")))?,
            ),
            None => (desc, 0),
        };
        let (kind, params) = desc.split_once(':').unwrap_or((desc, ""));
        let kind = SyntheticKind::from_name(kind)
            .ok_or_else(|| Error::InvalidValue(format!("unknown generator `{kind}`")))?;
        Ok(DatasetSource::Synthetic {
            kind,
            params: SynthParams::parse(params)?,
            seed,
        })
    }

    pub fn load(&self) -> Result<DatasetBundle> {
        match self {
            DatasetSource::File(p) => io::read_mesh(p),
            DatasetSource::Synthetic { kind, params, seed } => {
                generate_synthetic(*kind, params, *seed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub name: String,
    pub source: DatasetSource,
    /// Empty means every field in the dataset.
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetEntry>,
    pub xi_percent: Vec<f64>,
    pub predictors: Vec<Predictor>,
    pub backend: Backend,
    pub code_bits: u32,
}

impl BenchConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = BenchConfig {
            datasets: Vec::new(),
            xi_percent: Vec::new(),
            predictors: Vec::new(),
            backend: Backend::default(),
            code_bits: DEFAULT_CODE_BITS,
        };
        for (i, raw) in text.lines().enumerate() {
            let err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut words = line.split_whitespace();
            let Some(directive) = words.next() else {
                continue;
            };
            let args: Vec<&str> = words.collect();
            let need = |n: usize| {
                if args.len() < n {
                    Err(err(format!("`{directive}` needs {n} argument(s)")))
                } else {
                    Ok(())
                }
            };
            match directive {
                "dataset" => {
                    need(2)?;
                    if args.len() > 2 {
                        return Err(err("`dataset` takes a name and one source".into()));
                    }
                    let source =
                        DatasetSource::parse(args[1], base).map_err(|e| err(e.to_string()))?;
                    cfg.datasets.push(DatasetEntry {
                        name: args[0].to_string(),
                        source,
                        fields: Vec::new(),
                    });
                }
                "fields" => {
                    need(1)?;
                    let last = cfg
                        .datasets
                        .last_mut()
                        .ok_or_else(|| err("`fields` before any `dataset`".into()))?;
                    last.fields.extend(args.iter().map(|s| s.to_string()));
                }
                "xi" => {
                    need(1)?;
                    for a in args {
                        let v: f64 = a
                            .parse()
                            .map_err(|_| err(format!("`{a}` is not a number")))?;
                        if !(v.is_finite() && v > 0.0) {
                            return Err(err(format!("xi must be positive, got {a}")));
                        }
                        cfg.xi_percent.push(v);
                    }
                }
                "predictor" => {
                    need(1)?;
                    for a in args {
                        cfg.predictors.push(
                            Predictor::from_name(a)
                                .ok_or_else(|| err(format!("unknown predictor `{a}`")))?,
                        );
                    }
                }
                "backend" => {
                    need(1)?;
                    cfg.backend = Backend::from_name(args[0])
                        .ok_or_else(|| err(format!("unknown back end `{}`", args[0])))?;
                }
                "code_bits" => {
                    need(1)?;
                    cfg.code_bits = args[0]
                        .parse()
                        .ok()
                        .filter(|m| (1..=32).contains(m))
                        .ok_or_else(|| err(format!("code_bits must be 1..=32, got {}", args[0])))?;
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        if cfg.datasets.is_empty() {
            return Err(Error::InvalidValue("bench config lists no datasets".into()));
        }
        if cfg.xi_percent.is_empty() {
            return Err(Error::InvalidValue(
                "bench config lists no xi values".into(),
            ));
        }
        if cfg.predictors.is_empty() {
            cfg.predictors.push(Predictor::Traversal);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub field: String,
    pub predictor: Predictor,
    pub xi_percent: f64,
    pub cr: f64,
    pub br: f64,
    pub nrmse: f64,
    pub cnrmse: f64,
    pub psnr: f64,
    pub cpsnr: f64,
    pub compress_s: f64,
    pub decompress_s: f64,
    pub n_seq: usize,
    /// NaN for the 1D baseline.
    pub first_seed_coverage: f64,
    pub payload_bytes: usize,
    pub vertex_count: usize,
}

pub const BENCH_HEADER: &str = "dataset,field,predictor,xi_percent,cr,br,nrmse,cnrmse,psnr,cpsnr,\
compress_s,decompress_s,n_seq,first_seed_coverage,payload_bytes,vertex_count";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.field,
            self.predictor.name(),
            self.xi_percent,
            self.cr,
            self.br,
            self.nrmse,
            self.cnrmse,
            self.psnr,
            self.cpsnr,
            self.compress_s,
            self.decompress_s,
            self.n_seq,
            self.first_seed_coverage,
            self.payload_bytes,
            self.vertex_count
        )
    }
}

/// Cumulative share of vertices fixed after each seed of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSeries {
    pub dataset: String,
    pub field: String,
    pub xi_percent: f64,
    pub vertex_count: usize,
    pub cumulative: Vec<usize>,
}

pub const COVERAGE_HEADER: &str =
    "dataset,field,xi_percent,seed,cumulative_vertices,cumulative_fraction";

impl CoverageSeries {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (i, c) in self.cumulative.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                self.dataset,
                self.field,
                self.xi_percent,
                i + 1,
                c,
                *c as f64 / self.vertex_count as f64
            );
        }
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub coverage: Vec<CoverageSeries>,
}

impl BenchReport {
    pub fn rows_csv(&self) -> String {
        let mut s = format!("{BENCH_HEADER}\n");
        for r in &self.rows {
            s.push_str(&r.to_csv());
            s.push('\n');
        }
        s
    }

    pub fn coverage_csv(&self) -> String {
        let mut s = format!("{COVERAGE_HEADER}\n");
        for c in &self.coverage {
            s.push_str(&c.to_csv());
        }
        s
    }
}

/// Runs one compression and decompression and measures it.
pub fn bench_one(
    dataset: &str,
    bundle: &DatasetBundle,
    field_index: usize,
    predictor: Predictor,
    xi_percent: f64,
    backend: Backend,
    code_bits: u32,
) -> Result<(BenchRow, Option<CoverageSeries>)> {
    let mesh = &bundle.mesh;
    let field = &bundle.fields[field_index];
    let mut options = CompressOptions::new(ErrorBound::RelativePercent(xi_percent));
    options.predictor = predictor;
    options.backend = backend;
    options.code_bits = code_bits;

    let t0 = Instant::now();
    let compressed = compress_field(mesh, field, &options)?;
    let compress_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let (restored, _) = decompress_payload(mesh, &compressed.bytes)?;
    let decompress_s = t1.elapsed().as_secs_f64();
    if restored.values() != &compressed.decompressed[..] {
        return Err(Error::Internal(
            "decompressed values differ from the compressor's reconstruction".into(),
        ));
    }

    let n = mesh.vertex_count();
    let payload = compressed.bytes.len();
    let report = MetricsReport::compute(mesh, field, &restored)?;
    let coverage = compressed.stats.as_ref().map(|s| CoverageSeries {
        dataset: dataset.to_string(),
        field: field.name.clone(),
        xi_percent,
        vertex_count: n,
        cumulative: s.cumulative_visited(),
    });
    let row = BenchRow {
        dataset: dataset.to_string(),
        field: field.name.clone(),
        predictor,
        xi_percent,
        cr: bitstream::compression_ratio(bitstream::original_size(n), payload)?,
        br: bitstream::bit_rate(payload, n)?,
        nrmse: report.nrmse,
        cnrmse: report.cnrmse,
        psnr: report.psnr,
        cpsnr: report.cpsnr,
        compress_s,
        decompress_s,
        n_seq: compressed.header.sequence_count,
        first_seed_coverage: compressed
            .stats
            .as_ref()
            .map_or(f64::NAN, |s| s.first_seed_coverage(n)),
        payload_bytes: payload,
        vertex_count: n,
    };
    Ok((row, coverage))
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    for entry in &config.datasets {
        let bundle = entry.source.load()?;
        let indices: Vec<usize> = if entry.fields.is_empty() {
            (0..bundle.fields.len()).collect()
        } else {
            entry
                .fields
                .iter()
                .map(|name| {
                    bundle
                        .fields
                        .iter()
                        .position(|f| &f.name == name)
                        .ok_or_else(|| {
                            Error::InvalidValue(format!(
                                "dataset `{}` has no field `{name}`",
                                entry.name
                            ))
                        })
                })
                .collect::<Result<_>>()?
        };
        if indices.is_empty() {
            return Err(Error::InvalidValue(format!(
                "dataset `{}` has no fields",
                entry.name
            )));
        }
        for &fi in &indices {
            for &predictor in &config.predictors {
                for &xi in &config.xi_percent {
                    let (row, cov) = bench_one(
                        &entry.name,
                        &bundle,
                        fi,
                        predictor,
                        xi,
                        config.backend,
                        config.code_bits,
                    )?;
                    report.rows.push(row);
                    report.coverage.extend(cov);
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_config() {
        let text = "# sweep\n\
            dataset a gen:random_delaunay_2d:n=200@3\n\
            fields value\n\
            dataset b meshes/b.vtk\n\
            xi 0.5 1   # percent\n\
            predictor traversal linear1d\n\
            backend deflate\n\
            code_bits 12\n";
        let cfg = BenchConfig::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.datasets.len(), 2);
        assert_eq!(cfg.datasets[0].fields, vec!["value"]);
        assert_eq!(
            cfg.datasets[1].source,
            DatasetSource::File(PathBuf::from("/cfg/meshes/b.vtk"))
        );
        assert!(matches!(
            cfg.datasets[0].source,
            DatasetSource::Synthetic {
                seed: 3,
                kind: SyntheticKind::RandomDelaunay2d,
                ..
            }
        ));
        assert_eq!(cfg.xi_percent, vec![0.5, 1.0]);
        assert_eq!(cfg.predictors.len(), 2);
        assert_eq!(cfg.backend, Backend::Deflate);
        assert_eq!(cfg.code_bits, 12);
    }

    #[test]
    fn config_errors_name_the_line() {
        for (text, line) in [
            ("dataset a gen:nope\nxi 1", 1),
            ("dataset a gen:random_delaunay_2d\nxi -1", 2),
            ("fields x", 1),
            ("dataset a x.vtk\nxi 1\nfrobnicate", 3),
            ("dataset a x.vtk\ncode_bits 40", 2),
        ] {
            match BenchConfig::parse(text, Path::new(".")) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(BenchConfig::parse("xi 1", Path::new(".")).is_err());
        assert!(BenchConfig::parse("dataset a b.vtk", Path::new(".")).is_err());
    }

    #[test]
    fn one_dataset_three_bounds() {
        let text = "dataset r gen:random_delaunay_2d:n=400@1\nxi 0.1 1 5\n";
        let report = run_bench(&BenchConfig::parse(text, Path::new(".")).unwrap()).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.coverage.len(), 3);
        for r in &report.rows {
            assert!((r.cr * r.br / 64.0 - 1.0).abs() < 1e-12);
            assert!(r.first_seed_coverage > 0.0 && r.first_seed_coverage <= 1.0);
        }
        let csv = report.rows_csv();
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(
            csv.lines().next().unwrap().split(',').count(),
            csv.lines().nth(1).unwrap().split(',').count()
        );
        let cov = report.coverage_csv();
        assert!(cov.lines().count() > 3);
    }
}

//! `umz`: compress, decompress, evaluate, benchmark and generate nodal fields
//! on triangle and tetrahedral meshes.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use umz_core::bench::{run_bench, BenchConfig};
use umz_core::io::synth::{generate_synthetic, SynthParams, SyntheticKind};
use umz_core::io::{self, raw, vtk, DatasetBundle};
use umz_core::metrics::monte_carlo_cmse;
use umz_core::{
    bitstream, compress_field, decompress_payload, Backend, CompressOptions, Error, ErrorBound,
    MetricsReport, Predictor, ScalarField, SeedPolicy,
};

#[derive(Parser)]
#[command(
    name = "umz",
    version,
    about = "Error-bounded compression of fields on simplicial meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress one nodal field into a .umz payload.
    Compress(CompressArgs),
    /// Restore a field from a .umz payload.
    Decompress(DecompressArgs),
    /// Compare an original and a reconstructed field.
    Eval(EvalArgs),
    /// Run a benchmark sweep described by a config file.
    Bench(BenchArgs),
    /// Generate a synthetic dataset.
    Gen(GenArgs),
}

#[derive(Args)]
struct FieldInput {
    /// Mesh file (.vtk or .umesh).
    #[arg(long)]
    mesh: PathBuf,
    /// Field file (.vtk, .umf or .txt); defaults to the mesh file.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Array to read from a VTK file; defaults to the first one.
    #[arg(long)]
    field_name: Option<String>,
}

#[derive(Args)]
struct CompressArgs {
    #[command(flatten)]
    input: FieldInput,
    /// Absolute error bound.
    #[arg(
        long,
        conflicts_with = "rel_error",
        required_unless_present = "rel_error"
    )]
    abs_error: Option<f64>,
    /// Error bound as a percentage of the field's value range.
    #[arg(long)]
    rel_error: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
    /// Lossless back end: zstd, deflate or none.
    #[arg(long, default_value = "zstd")]
    backend: String,
    /// Quantization code width in bits (1-32).
    #[arg(long, default_value_t = 16)]
    code_bits: u32,
    /// traversal or linear1d.
    #[arg(long, default_value = "traversal")]
    predictor: String,
    /// Pick seed cells at random from this RNG seed instead of by lowest index.
    #[arg(long)]
    random_seed: Option<u64>,
}

#[derive(Args)]
struct DecompressArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    payload: PathBuf,
    /// Output file (.vtk, .umf or .txt).
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    decompressed: PathBuf,
    #[arg(long)]
    field_name: Option<String>,
    /// Also report the payload's CR and BR.
    #[arg(long)]
    payload: Option<PathBuf>,
    /// Cross-check CMSE against a Monte Carlo estimate with this many samples.
    #[arg(long)]
    mc_check: Option<usize>,
    #[arg(long, default_value_t = 0)]
    mc_seed: u64,
    /// Print a CSV header and row instead of key=value lines.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct BenchArgs {
    config: PathBuf,
    /// Result rows; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Per-seed cumulative coverage table.
    #[arg(long)]
    coverage: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// gaussian_blobs_2d, heated_plate_2d, random_delaunay_2d or random_delaunay_3d.
    kind: String,
    /// Generator parameters as k=v,k=v.
    #[arg(long, default_value = "")]
    params: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// .vtk, or .umesh with one .umf per field alongside.
    #[arg(long, short)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Parse { .. }
        | Error::InvalidMesh(_)
        | Error::NonManifold { .. }
        | Error::DegenerateCell { .. }
        | Error::InvalidValue(_)
        | Error::EmptyInput
        | Error::LengthMismatch { .. }
        | Error::UnsupportedMesh(_) => 4,
        Error::CorruptStream { .. } | Error::UnsupportedVersion(_) => 5,
        Error::DigestMismatch => 6,
        _ => 1,
    }
}

fn with_path<T>(path: &Path, r: umz_core::Result<T>) -> Result<T, (Error, String)> {
    r.map_err(|e| {
        let msg = format!("{}: {e}", path.display());
        (e, msg)
    })
}

type CmdResult = Result<(), (Error, String)>;

fn plain<T>(r: umz_core::Result<T>) -> Result<T, (Error, String)> {
    r.map_err(|e| {
        let msg = e.to_string();
        (e, msg)
    })
}

fn load_field(
    mesh_path: &Path,
    bundle: &DatasetBundle,
    field: Option<&Path>,
    name: Option<&str>,
) -> Result<ScalarField, (Error, String)> {
    let f = match field {
        Some(p) => with_path(p, io::read_field(p, name))?,
        None => {
            let found = match name {
                Some(n) => bundle.field(n).cloned(),
                None => bundle.fields.first().cloned(),
            };
            found.ok_or_else(|| {
                let e = Error::InvalidValue("no field given and the mesh file has none".into());
                let msg = format!("{}: {e}", mesh_path.display());
                (e, msg)
            })?
        }
    };
    with_path(field.unwrap_or(mesh_path), f.check_matches(&bundle.mesh))?;
    Ok(f)
}

fn usage(message: String) -> (Error, String) {
    (Error::InvalidValue(message.clone()), message)
}

fn cmd_compress(a: CompressArgs) -> CmdResult {
    let bundle = with_path(&a.input.mesh, io::read_mesh(&a.input.mesh))?;
    let field = load_field(
        &a.input.mesh,
        &bundle,
        a.input.field.as_deref(),
        a.input.field_name.as_deref(),
    )?;
    let bound = match (a.abs_error, a.rel_error) {
        (Some(x), None) => ErrorBound::Absolute(x),
        (None, Some(p)) => ErrorBound::RelativePercent(p),
        _ => {
            return Err(usage(
                "give exactly one of --abs-error and --rel-error".into(),
            ))
        }
    };
    let mut options = CompressOptions::new(bound);
    options.backend = Backend::from_name(&a.backend)
        .ok_or_else(|| usage(format!("unknown back end `{}`", a.backend)))?;
    options.predictor = Predictor::from_name(&a.predictor)
        .ok_or_else(|| usage(format!("unknown predictor `{}`", a.predictor)))?;
    options.code_bits = a.code_bits;
    if let Some(s) = a.random_seed {
        options.seed_policy = SeedPolicy::Random(s);
    }

    let t = Instant::now();
    let c = plain(compress_field(&bundle.mesh, &field, &options))?;
    let elapsed = t.elapsed().as_secs_f64();
    with_path(
        &a.out,
        std::fs::write(&a.out, &c.bytes).map_err(Error::from),
    )?;

    let n = bundle.mesh.vertex_count();
    let payload = c.bytes.len();
    println!("xi={}", c.header.error_bound);
    println!("vertices={n}");
    println!("payload_bytes={payload}");
    println!(
        "cr={}",
        plain(bitstream::compression_ratio(
            bitstream::original_size(n),
            payload
        ))?
    );
    println!("br={}", plain(bitstream::bit_rate(payload, n))?);
    println!("sequences={}", c.header.sequence_count);
    if let Some(s) = &c.stats {
        println!("first_seed_coverage={}", s.first_seed_coverage(n));
    }
    println!("compress_s={elapsed}");
    Ok(())
}

fn cmd_decompress(a: DecompressArgs) -> CmdResult {
    let bundle = with_path(&a.mesh, io::read_mesh(&a.mesh))?;
    let bytes = with_path(&a.payload, std::fs::read(&a.payload).map_err(Error::from))?;
    let t = Instant::now();
    let (field, header) = match decompress_payload(&bundle.mesh, &bytes) {
        Err(Error::DigestMismatch) => {
            return Err((
                Error::DigestMismatch,
                format!(
                    "{} was not compressed against the mesh {}; refusing to decompress",
                    a.payload.display(),
                    a.mesh.display()
                ),
            ))
        }
        other => with_path(&a.payload, other)?,
    };
    let elapsed = t.elapsed().as_secs_f64();
    with_path(&a.out, io::write_field(&a.out, &bundle.mesh, &field))?;
    println!("xi={}", header.error_bound);
    println!("vertices={}", field.len());
    println!("decompress_s={elapsed}");
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let bundle = with_path(&a.mesh, io::read_mesh(&a.mesh))?;
    let name = a.field_name.as_deref();
    let original = load_field(&a.mesh, &bundle, Some(&a.original), name)?;
    let restored = load_field(&a.mesh, &bundle, Some(&a.decompressed), name)?;
    let mut report = plain(MetricsReport::compute(&bundle.mesh, &original, &restored))?;
    if let Some(p) = &a.payload {
        let len = with_path(p, std::fs::metadata(p).map_err(Error::from))?.len() as usize;
        report = plain(report.with_sizes(bundle.mesh.vertex_count(), len))?;
    }
    if a.csv {
        println!("{}", report.csv_header());
        println!("{}", report.to_csv_row());
    } else {
        print!("{}", report.to_key_value());
    }
    if let Some(n) = a.mc_check {
        let (est, se) = plain(monte_carlo_cmse(
            &bundle.mesh,
            original.values(),
            restored.values(),
            n,
            a.mc_seed,
        ))?;
        let agrees = (est - report.cmse).abs() <= 3.0 * se;
        println!("mc_cmse={est}");
        println!("mc_stderr={se}");
        println!("mc_agrees={agrees}");
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let config = with_path(&a.config, BenchConfig::load(&a.config))?;
    let report = plain(run_bench(&config))?;
    let rows = report.rows_csv();
    match &a.out {
        Some(p) => with_path(p, std::fs::write(p, rows).map_err(Error::from))?,
        None => print!("{rows}"),
    }
    if let Some(p) = &a.coverage {
        with_path(
            p,
            std::fs::write(p, report.coverage_csv()).map_err(Error::from),
        )?;
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let kind = SyntheticKind::from_name(&a.kind)
        .ok_or_else(|| usage(format!("unknown generator `{}`", a.kind)))?;
    let params = plain(SynthParams::parse(&a.params))?;
    let bundle = plain(generate_synthetic(kind, &params, a.seed))?;
    let is_raw = a.out.extension().and_then(|e| e.to_str()) == Some("umesh");
    if is_raw {
        with_path(&a.out, raw::write_mesh(&a.out, &bundle.mesh))?;
        for f in &bundle.fields {
            let p = a.out.with_extension(format!("{}.umf", f.name));
            with_path(&p, raw::write_field(&p, f))?;
            println!("field={}", p.display());
        }
    } else {
        with_path(&a.out, vtk::write_vtk_unstructured(&a.out, &bundle))?;
    }
    println!("vertices={}", bundle.mesh.vertex_count());
    println!("cells={}", bundle.mesh.cell_count());
    println!("fields={}", bundle.fields.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compress(a) => cmd_compress(a),
        Command::Decompress(a) => cmd_decompress(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, message)) => {
            eprintln!("umz: {message}");
            ExitCode::from(exit_code(&e))
        }
    }
}

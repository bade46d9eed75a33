use std::path::Path;
use std::process::{Command, Output};

fn umz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_umz"))
        .args(args)
        .output()
        .expect("run umz")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .parse()
        .unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = p(dir, name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read_txt(path: &str) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect()
}

const SQUARE: &str = "# vtk DataFile Version 3.0
square
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 4 double
0 0 0
1 0 0
1 1 0
0 1 0
CELLS 2 8
3 0 1 2
3 0 2 3
CELL_TYPES 2
5
5
POINT_DATA 4
SCALARS f double 1
LOOKUP_TABLE default
0
50
20
10
";

#[test]
fn blob_round_trip_respects_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = p(dir.path(), "blobs.vtk");
    let o = umz(&[
        "gen",
        "gaussian_blobs_2d",
        "--params",
        "n=1500",
        "--seed",
        "4",
        "-o",
        &mesh,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let payload = p(dir.path(), "blobs.umz");
    let o = umz(&[
        "compress",
        "--mesh",
        &mesh,
        "--rel-error",
        "1",
        "-o",
        &payload,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let xi = value(&out, "xi");
    assert!((value(&out, "cr") * value(&out, "br") - 64.0).abs() < 1e-9);
    assert!(value(&out, "first_seed_coverage") >= 0.99);

    let restored = p(dir.path(), "restored.txt");
    let o = umz(&[
        "decompress",
        "--mesh",
        &mesh,
        "--payload",
        &payload,
        "-o",
        &restored,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = umz(&[
        "eval",
        "--mesh",
        &mesh,
        "--original",
        &mesh,
        "--decompressed",
        &restored,
        "--payload",
        &payload,
        "--mc-check",
        "20000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(value(&out, "max_abs_error") <= xi);
    assert!(value(&out, "cmse") > 0.0);
    assert!(out.contains("mc_agrees=true"), "{out}");
    assert!((value(&out, "cr") * value(&out, "br") - 64.0).abs() < 1e-9);
}

#[test]
fn relative_bound_uses_the_range() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write(dir.path(), "sq.vtk", SQUARE);
    let payload = p(dir.path(), "sq.umz");
    let o = umz(&[
        "compress",
        "--mesh",
        &mesh,
        "--rel-error",
        "1",
        "-o",
        &payload,
    ]);
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "xi"), 0.5);
}

#[test]
fn bad_bounds_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write(dir.path(), "sq.vtk", SQUARE);
    let out = p(dir.path(), "x.umz");
    let o = umz(&["compress", "--mesh", &mesh, "--abs-error", "0", "-o", &out]);
    assert_eq!(o.status.code(), Some(4));
    let o = umz(&["compress", "--mesh", &mesh, "-o", &out]);
    assert_eq!(o.status.code(), Some(2));
    let o = umz(&[
        "compress",
        "--mesh",
        &mesh,
        "--abs-error",
        "1",
        "--rel-error",
        "1",
        "-o",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = umz(&[
        "compress",
        "--mesh",
        &mesh,
        "--abs-error",
        "1",
        "--backend",
        "lz",
        "-o",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn wrong_mesh_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write(dir.path(), "sq.vtk", SQUARE);
    let other = write(dir.path(), "other.vtk", &SQUARE.replace("1 1 0", "1 2 0"));
    let payload = p(dir.path(), "sq.umz");
    assert!(umz(&[
        "compress",
        "--mesh",
        &mesh,
        "--abs-error",
        "0.1",
        "-o",
        &payload
    ])
    .status
    .success());
    let out = p(dir.path(), "out.txt");
    let o = umz(&[
        "decompress",
        "--mesh",
        &other,
        "--payload",
        &payload,
        "-o",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&o.stderr).contains("refusing"));

    let mut bytes = std::fs::read(&payload).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    let bad = p(dir.path(), "bad.umz");
    std::fs::write(&bad, &bytes).unwrap();
    let o = umz(&["decompress", "--mesh", &mesh, "--payload", &bad, "-o", &out]);
    assert_eq!(o.status.code(), Some(5));

    let o = umz(&[
        "decompress",
        "--mesh",
        &mesh,
        "--payload",
        &p(dir.path(), "missing.umz"),
        "-o",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(3));

    let broken = write(
        dir.path(),
        "broken.vtk",
        &SQUARE.replace("3 0 2 3", "3 0 x 3"),
    );
    let o = umz(&[
        "compress",
        "--mesh",
        &broken,
        "--abs-error",
        "1",
        "-o",
        &payload,
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 12"));
}

#[test]
fn eval_identical_and_offset() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write(dir.path(), "sq.vtk", SQUARE);
    let a = write(dir.path(), "a.txt", "0\n50\n20\n10\n");
    let b = write(dir.path(), "b.txt", "0.5\n50.5\n20.5\n10.5\n");
    let o = umz(&[
        "eval",
        "--mesh",
        &mesh,
        "--original",
        &a,
        "--decompressed",
        &a,
    ]);
    let out = stdout(&o);
    assert_eq!(value(&out, "mse"), 0.0);
    assert_eq!(value(&out, "cmse"), 0.0);
    assert!(out.contains("psnr=inf") && out.contains("cpsnr=inf"));

    let o = umz(&[
        "eval",
        "--mesh",
        &mesh,
        "--original",
        &a,
        "--decompressed",
        &b,
        "--csv",
    ]);
    let out = stdout(&o);
    let mut lines = out.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap_or(f64::NAN))
        .collect();
    let get = |k: &str| row[header.iter().position(|h| *h == k).unwrap()];
    assert!((get("mse") - 0.25).abs() < 1e-12);
    assert!((get("cmse") - 0.25).abs() < 1e-12);
}

#[test]
fn decompress_matches_compressor_across_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = p(dir.path(), "r.umesh");
    let o = umz(&[
        "gen",
        "random_delaunay_3d",
        "--params",
        "n=300",
        "--seed",
        "2",
        "-o",
        &mesh,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let field = p(dir.path(), "r.value.umf");
    assert!(Path::new(&field).exists());
    for (predictor, backend) in [
        ("traversal", "deflate"),
        ("linear1d", "none"),
        ("traversal", "zstd"),
    ] {
        let payload = p(dir.path(), "r.umz");
        let o = umz(&[
            "compress",
            "--mesh",
            &mesh,
            "--field",
            &field,
            "--abs-error",
            "0.01",
            "--predictor",
            predictor,
            "--backend",
            backend,
            "--random-seed",
            "5",
            "-o",
            &payload,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let restored = p(dir.path(), "restored.txt");
        assert!(umz(&[
            "decompress",
            "--mesh",
            &mesh,
            "--payload",
            &payload,
            "-o",
            &restored
        ])
        .status
        .success());
        let orig = umz_core::io::raw::read_field(Path::new(&field)).unwrap();
        let back = read_txt(&restored);
        assert_eq!(back.len(), orig.len());
        for (x, y) in orig.values().iter().zip(&back) {
            assert!((x - y).abs() <= 0.01);
        }
    }
}

#[test]
fn bench_writes_rows_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bench.cfg",
        "dataset blobs gen:gaussian_blobs_2d:n=800@1\nxi 0.1 1 5\npredictor traversal linear1d\n",
    );
    let rows = p(dir.path(), "rows.csv");
    let cov = p(dir.path(), "cov.csv");
    let o = umz(&["bench", &cfg, "-o", &rows, "--coverage", &cov]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&rows).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(std::fs::read_to_string(&cov).unwrap().lines().count() > 3);
    let o = umz(&["bench", &p(dir.path(), "nope.cfg")]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = p(dir.path(), "a.vtk");
    let b = p(dir.path(), "b.vtk");
    for out in [&a, &b] {
        assert!(umz(&["gen", "heated_plate_2d", "--seed", "9", "-o", out])
            .status
            .success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(umz(&["gen", "nope", "-o", &a]).status.code(), Some(4));
    assert_eq!(
        umz(&["gen", "random_delaunay_2d", "--params", "q=1", "-o", &a])
            .status
            .code(),
        Some(4)
    );
}

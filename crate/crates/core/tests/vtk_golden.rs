use std::path::Path;

use umz_core::io::vtk::{format_vtk, parse_vtk, read_vtk_unstructured};
use umz_core::io::DatasetBundle;
use umz_core::{ScalarField, SimplicialMesh};

fn golden(name: &str) -> String {
    std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/data")
            .join(name),
    )
    .unwrap()
}

#[test]
fn two_tets_match_golden_bytes() {
    let mesh = SimplicialMesh::from_tetrahedra(
        &[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
        ],
        &[[0, 1, 2, 3], [1, 2, 3, 4]],
    )
    .unwrap();
    let field = ScalarField::new("pressure", vec![0.0, 1.5, -2.0, 1e-7, 2.5e20]).unwrap();
    let bundle = DatasetBundle::new(mesh, vec![field]);
    assert_eq!(format_vtk(&bundle).unwrap(), golden("two_tets.vtk"));
}

#[test]
fn two_triangles_match_golden_bytes() {
    let mesh = SimplicialMesh::from_triangles(
        &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        &[[0, 1, 2], [0, 2, 3]],
    )
    .unwrap();
    let f = ScalarField::new("f", vec![0.0, 0.25, -3.125, 1000.0]).unwrap();
    let g = ScalarField::new("g", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let bundle = DatasetBundle::new(mesh, vec![f, g]);
    assert_eq!(format_vtk(&bundle).unwrap(), golden("two_triangles.vtk"));
}

#[test]
fn golden_files_parse_back() {
    for name in ["two_tets.vtk", "two_triangles.vtk"] {
        let text = golden(name);
        let bundle = parse_vtk(&text).unwrap();
        assert_eq!(format_vtk(&bundle).unwrap(), text);
        let path = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/data")
            .join(name);
        assert_eq!(read_vtk_unstructured(&path).unwrap(), bundle);
    }
    let tets = parse_vtk(&golden("two_tets.vtk")).unwrap();
    assert_eq!(tets.mesh.dimension(), 3);
    assert_eq!(tets.fields[0].values()[4], 2.5e20);
    assert_eq!(tets.mesh.neighbors(0).len(), 1);
}

#[test]
fn synthetic_bundles_survive_text_round_trip() {
    use umz_core::io::synth::{generate_synthetic, SynthParams, SyntheticKind};
    for kind in [
        SyntheticKind::RandomDelaunay2d,
        SyntheticKind::RandomDelaunay3d,
    ] {
        let bundle = generate_synthetic(kind, &SynthParams::default().set("n", 200.0), 3).unwrap();
        let back = parse_vtk(&format_vtk(&bundle).unwrap()).unwrap();
        assert_eq!(back.mesh, bundle.mesh);
        for (a, b) in back.fields.iter().zip(&bundle.fields) {
            assert_eq!(a.values(), b.values());
        }
    }
}

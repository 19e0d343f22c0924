use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rpfit::interp::{AnalyticLevelSet, DiscreteLevelSet, LevelSetField};
use rpfit::io::{
    edge_polyline, export_svg, export_vtk, load_levelset, perturb_interior, records_to_csv, run_study, unit_square, Coloring,
    MeshFile, ScalarField, StudyConfig,
};
use rpfit::linalg::Vec2;
use rpfit::tmop::{mark_interface, solve, MarkingMode, TmopConfig, TmopProblem};

fn fitted_mesh() -> rpfit::Mesh {
    let field: LevelSetField<f64> = AnalyticLevelSet::circle(Vec2::new(0.5, 0.5), 0.31).into();
    let mut mesh = unit_square::<f64>(4, 4, 3, false).unwrap();
    mark_interface(&mut mesh, &field, MarkingMode::Interface).unwrap();
    let mut p = TmopProblem::new(mesh, &field, &TmopConfig::default()).unwrap();
    solve(&mut p).unwrap();
    p.mesh
}

fn seg_dist(x: Vec2<f64>, a: Vec2<f64>, b: Vec2<f64>) -> f64 {
    let d = b - a;
    let t = ((x - a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
    (a + d.scale(t) - x).norm()
}

#[test]
fn random_meshfile_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..100 {
        let (nx, ny) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let mut mesh = unit_square::<f64>(nx, ny, 1, k % 2 == 0).unwrap();
        let orders: Vec<usize> = (0..mesh.num_elements()).map(|_| rng.gen_range(1..=4)).collect();
        mesh.set_orders(&orders).unwrap();
        perturb_interior(&mut mesh, 0.1, &mut rng).unwrap();
        let marked: Vec<usize> = (0..mesh.edges().len()).filter(|_| rng.gen_bool(0.2)).collect();
        mesh.set_marked_faces(marked).unwrap();
        let file = MeshFile::new(mesh);
        let text = file.to_text();
        let back = MeshFile::parse(&text).unwrap();
        assert_eq!(back.to_text(), text, "round trip {k}");
        assert_eq!(back.mesh.marked_faces(), file.mesh.marked_faces());
    }
}

#[test]
fn scalar_file_drives_a_discrete_level_set() {
    let dir = tempfile_dir();
    let mesh = unit_square::<f64>(4, 4, 2, false).unwrap();
    let f = |x: Vec2<f64>| x.x + 2.0 * x.y - 1.0;
    let values = mesh.elements.iter().map(|e| e.nodes.iter().map(|&x| f(x)).collect()).collect();
    let file = MeshFile::with_scalar(mesh.clone(), ScalarField { name: "phi".into(), values }).unwrap();
    let path = dir.join("bg.txt");
    file.write(&path).unwrap();
    let field = load_levelset("file:bg.txt", Some(&dir)).unwrap();
    let direct: LevelSetField<f64> = DiscreteLevelSet::sample(&mesh, f).unwrap().into();
    for x in [Vec2::new(0.13, 0.77), Vec2::new(0.5, 0.5), Vec2::new(0.91, 0.02)] {
        assert!((field.value(x).unwrap() - f(x)).abs() < 1e-12);
        assert!((field.value(x).unwrap() - direct.value(x).unwrap()).abs() < 1e-12);
    }
    assert!(load_levelset("file:missing.txt", Some(&dir)).is_err());
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("rpfit-io-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn svg_polylines_follow_curved_edges() {
    let mesh = fitted_mesh();
    assert!(!mesh.marked_faces().is_empty());
    let h = mesh.elements.iter().map(|e| e.diameter()).fold(f64::INFINITY, f64::min);
    let mut worst: f64 = 0.0;
    for id in 0..mesh.edges().len() {
        let poly = edge_polyline(&mesh, id);
        for k in 0..=400 {
            let x = mesh.edge_point(id, k as f64 / 400.0);
            let d = poly.windows(2).map(|w| seg_dist(x, w[0], w[1])).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    assert!(worst < 1e-3 * h, "deviation {worst:.3e} vs element size {h:.3e}");
}

#[test]
fn svg_is_deterministic_for_every_coloring() {
    let mesh = fitted_mesh();
    for c in [Coloring::Order, Coloring::Material, Coloring::DetA] {
        let a = export_svg(&mesh, c);
        assert_eq!(a, export_svg(&mesh, c));
        assert!(a.starts_with("<?xml") || a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<polygon").count(), mesh.num_elements());
    }
}

#[test]
fn vtk_counts_sub_cells() {
    let mut mesh = unit_square::<f64>(2, 2, 1, true).unwrap();
    mesh.set_orders(&[1, 2, 3, 1, 2, 3, 1, 2]).unwrap();
    let vtk = export_vtk(&mesh);
    let expect: usize = mesh.elements.iter().map(|e| e.order * e.order).sum();
    let line = vtk.lines().find(|l| l.starts_with("CELLS")).unwrap();
    let n: usize = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert_eq!(n, expect);
}

#[test]
fn study_rows_follow_config_order() {
    let cfg = StudyConfig::parse(
        r#"
levelset = "name:plane:0,1,0.5"

[[uniform]]
label = "u"
orders = [1, 2]
sizes = [2, 4]

[[adaptive]]
label = "a"
size = 4
p_init = 1
p_max = 2
dp_ref = 1
dp = 1
refine = "abs:1e-14"
"#,
    )
    .unwrap();
    let rows = run_study(&cfg, None).unwrap();
    let keys: Vec<(String, usize, usize)> = rows.iter().map(|r| (r.label.clone(), r.order, r.size)).collect();
    assert_eq!(keys[..4], [("u".into(), 1, 2), ("u".into(), 1, 4), ("u".into(), 2, 2), ("u".into(), 2, 4)]);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.succeeded()));
    // a plane is resolved exactly at every order
    assert!(rows.iter().all(|r| r.total_error.is_some_and(|e| e < 1e-20)), "{rows:?}");
    let csv = records_to_csv(&rows).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

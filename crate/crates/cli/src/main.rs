use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rpfit::adapt::{run_rp_adaptivity, AdaptivityPlan, FaceErrorReport};
use rpfit::io::{
    export_svg, export_vtk, format_histogram, generate_cartesian, history_to_csv, load_levelset, perturb_interior,
    records_to_csv, run_study, status_name, Coloring, MeshFile, StudyConfig,
};
use rpfit::tmop::{mark_interface, solve, MarkingMode, QualityMetric, TargetSpec, TmopConfig, TmopProblem};
use rpfit::{Mesh, Vec2};

/// Fit a curved mesh to the zero level of a level set, optionally with
/// p-adaptivity on the fitted faces.
#[derive(Debug, Parser)]
#[command(name = "rpfit", version)]
struct Args {
    /// Input mesh file.
    #[arg(long, conflicts_with = "generate")]
    mesh: Option<PathBuf>,
    /// Generate an `nx × ny` Cartesian mesh of order `p` on the unit square: `nx,ny,p`.
    #[arg(long, value_name = "NX,NY,P")]
    generate: Option<String>,
    /// Split generated quads into triangles.
    #[arg(long)]
    triangles: bool,
    /// Randomly displace interior nodes by this fraction of the smallest element size.
    #[arg(long, value_name = "FRACTION")]
    perturb: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `name:<squircle2d|circle[:cx,cy,r]|plane[:nx,ny,c]>` or `file:<path>`.
    #[arg(long, default_value = "name:squircle2d")]
    levelset: String,
    /// Fit boundary faces of the inside region instead of the material interface.
    #[arg(long)]
    boundary_fit: bool,
    /// Quality metric: 2 (shape), 77 (size) or 80 (shape + size).
    #[arg(long, default_value_t = 2, value_parser = parse_metric)]
    metric: u32,
    /// Shape weight γ of metric 80.
    #[arg(long, default_value_t = 0.5)]
    metric_gamma: f64,
    #[arg(long, default_value = "ideal")]
    target: String,
    /// Initial fitting weight.
    #[arg(long, default_value_t = 1.0)]
    fit_weight: f64,
    #[arg(long, default_value_t = 1e-8)]
    fit_tol: f64,
    /// Newton iteration limit per fit.
    #[arg(long, default_value_t = 200)]
    max_outer: usize,
    /// Initial order; defaults to the input mesh order.
    #[arg(long)]
    p_init: Option<usize>,
    /// Enables p-adaptivity when above the initial order.
    #[arg(long)]
    p_max: Option<usize>,
    #[arg(long)]
    dp_ref: Option<usize>,
    /// Largest order difference between edge neighbours; defaults to `p_max`.
    #[arg(long)]
    dp: Option<usize>,
    /// `abs:<γ₁>` or `rel:<γ₂>`.
    #[arg(long, default_value = "abs:1e-14")]
    refine: String,
    /// `b1:<β₁>`, `b2:<β₂>`, `size:<β₃>` or `none`.
    #[arg(long, default_value = "none")]
    deref: String,
    #[arg(long)]
    edge_touch_elevate: bool,
    /// Fill coloring of the SVG output.
    #[arg(long, default_value = "order", value_parser = ["order", "material", "deta"])]
    svg_coloring: String,
    /// Prefix of every output file.
    #[arg(long, default_value = "rpfit-")]
    out_prefix: String,
    /// Run a study described by a TOML file and write `<prefix>study.csv`.
    #[arg(long, conflicts_with_all = ["mesh", "generate"])]
    study: Option<PathBuf>,
}

fn parse_metric(s: &str) -> std::result::Result<u32, String> {
    match s.parse::<u32>() {
        Ok(m @ (2 | 77 | 80)) => Ok(m),
        _ => Err(format!("metric must be 2, 77 or 80, got '{s}'")),
    }
}

fn parse_generate(s: &str) -> Result<(usize, usize, usize)> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("--generate expects nx,ny,p, got '{s}'"))?;
    match v[..] {
        [nx, ny, p] => Ok((nx, ny, p)),
        _ => bail!("--generate expects nx,ny,p, got '{s}'"),
    }
}

fn output(prefix: &str, name: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{name}"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_study_cmd(args: &Args, path: &Path) -> Result<()> {
    let cfg = StudyConfig::read(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = run_study(&cfg, path.parent())?;
    let out = output(&args.out_prefix, "study.csv");
    write(&out, &records_to_csv(&rows)?)?;
    let failed = rows.iter().filter(|r| !r.succeeded()).count();
    println!("{} runs, {} failed -> {}", rows.len(), failed, out.display());
    Ok(())
}

fn tmop_config(args: &Args) -> Result<TmopConfig<f64>> {
    let mut c = TmopConfig {
        metric: QualityMetric::from_id(args.metric, args.metric_gamma)?,
        target: TargetSpec::from_name(&args.target)?,
        fit_weight: args.fit_weight,
        ..TmopConfig::default()
    };
    c.controls.fit_tol = args.fit_tol;
    c.controls.max_iterations = args.max_outer;
    Ok(c)
}

fn input_mesh(args: &Args) -> Result<Mesh> {
    let mut mesh = match (&args.mesh, &args.generate) {
        (Some(p), _) => MeshFile::read(p).with_context(|| format!("reading {}", p.display()))?.mesh,
        (None, Some(g)) => {
            let (nx, ny, p) = parse_generate(g)?;
            generate_cartesian(nx, ny, p, Vec2::zero(), Vec2::new(1.0, 1.0), args.triangles)?
        }
        (None, None) => bail!("one of --mesh, --generate or --study is required"),
    };
    if let Some(f) = args.perturb {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        perturb_interior(&mut mesh, f, &mut rng)?;
    }
    Ok(mesh)
}

fn run(args: &Args) -> Result<()> {
    if let Some(path) = &args.study {
        return run_study_cmd(args, path);
    }
    let field = load_levelset(&args.levelset, None)?;
    let config = tmop_config(args)?;
    let mut mesh = input_mesh(args)?;
    let p_init = args.p_init.unwrap_or_else(|| mesh.elements.iter().map(|e| e.order).max().unwrap_or(1));
    if mesh.elements.iter().any(|e| e.order != p_init) {
        mesh.set_orders(&vec![p_init; mesh.elements.len()])?;
    }
    let marking = if args.boundary_fit { MarkingMode::Boundary } else { MarkingMode::Interface };
    let p_max = args.p_max.unwrap_or(p_init);

    let (mesh, history) = if p_max > p_init {
        let mut plan = AdaptivityPlan::new(p_init, p_max);
        if let Some(d) = args.dp_ref {
            plan.dp_ref = d;
        }
        if let Some(d) = args.dp {
            plan.dp = d;
        }
        plan.refine = AdaptivityPlan::parse_refine(&args.refine)?;
        plan.deref = AdaptivityPlan::parse_deref(&args.deref)?;
        plan.edge_touch_elevation = args.edge_touch_elevate;
        plan.marking = marking;
        let res = run_rp_adaptivity(mesh, &field, &config, &plan)?;
        println!(
            "rp-adaptivity: {} outer iterations, exit {:?}, {} stalled solves",
            res.outer_iterations, res.exit, res.stalled_solves
        );
        (res.mesh, Some(res.history))
    } else {
        let faces = mark_interface(&mut mesh, &field, marking)?;
        let mut problem = TmopProblem::new(mesh, &field, &config)?;
        let report = solve(&mut problem)?;
        println!(
            "fit: {faces} marked faces, {} accepted steps, status {}",
            report.accepted_steps(),
            status_name(report.status)
        );
        (problem.mesh, None)
    };

    let rep = FaceErrorReport::for_marked(&mesh, &field)?;
    println!(
        "dofs {} | e_F {:.6e} | max |sigma| {:.3e} | orders {} | min det A {:.3e}",
        mesh.dof_count(),
        rep.total,
        rep.node_sigma_max,
        format_histogram(&mesh.order_histogram()),
        mesh.min_det_jacobian().1
    );

    let coloring = Coloring::from_name(&args.svg_coloring).expect("validated by clap");
    let prefix = &args.out_prefix;
    write(&output(prefix, "mesh.txt"), &MeshFile::new(mesh.clone()).to_text())?;
    write(&output(prefix, "mesh.svg"), &export_svg(&mesh, coloring))?;
    write(&output(prefix, "mesh.vtk"), &export_vtk(&mesh))?;
    if let Some(h) = history {
        write(&output(prefix, "history.csv"), &history_to_csv(&h)?)?;
    }
    Ok(())
}

fn main() {
    let args = Args::parse();
    if let Err(e) = run(&args) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

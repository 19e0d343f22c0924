use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adapt::{run_rp_adaptivity, AdaptivityPlan, FaceErrorReport, HistoryEntry};
use crate::error::{Error, Result};
use crate::fem::{DofMap, MixedOrderMesh};
use crate::interp::{DiscreteLevelSet, LevelSetField};
use crate::io::meshfile::MeshFile;
use crate::io::generate::generate_cartesian;
use crate::linalg::Vec2;
use crate::tmop::{mark_interface, solve, MarkingMode, QualityMetric, SolveStatus, TargetSpec, TmopConfig, TmopProblem};

/// `name:<analytic>`, `file:<path>` or a bare analytic name. Relative paths
/// are resolved against `base`.
pub fn load_levelset(spec: &str, base: Option<&Path>) -> Result<LevelSetField<f64>> {
    if let Some(path) = spec.strip_prefix("file:") {
        let mut p = PathBuf::from(path);
        if p.is_relative() {
            if let Some(b) = base {
                p = b.join(p);
            }
        }
        let file = MeshFile::read(&p)?;
        let scalar = file
            .scalar
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no scalar block", p.display())))?;
        return Ok(DiscreteLevelSet::from_nodal(&file.mesh, scalar.values)?.into());
    }
    LevelSetField::named(spec.strip_prefix("name:").unwrap_or(spec))
}

fn default_metric() -> u32 {
    2
}
fn default_gamma() -> f64 {
    0.5
}
fn default_target() -> String {
    "ideal".into()
}
fn default_fit_weight() -> f64 {
    1.0
}
fn default_fit_tol() -> f64 {
    1e-8
}
fn default_max_iterations() -> usize {
    200
}
fn default_domain() -> [f64; 4] {
    [0.0, 0.0, 1.0, 1.0]
}
fn default_deref() -> String {
    "none".into()
}

/// Uniform-order sweep: one run per `(order, size)`, `size × size` cells.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformSweep {
    pub label: String,
    pub orders: Vec<usize>,
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub triangles: bool,
}

/// One rp-adaptivity run on a `size × size` base mesh.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveRun {
    pub label: String,
    pub size: usize,
    #[serde(default)]
    pub triangles: bool,
    pub p_init: usize,
    pub p_max: usize,
    pub dp_ref: Option<usize>,
    pub dp: Option<usize>,
    /// `abs:<γ₁>` or `rel:<γ₂>`.
    pub refine: String,
    /// `b1:<β₁>`, `b2:<β₂>`, `size:<β₃>` or `none`.
    #[serde(default = "default_deref")]
    pub deref: String,
    #[serde(default)]
    pub edge_touch_elevate: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub levelset: String,
    /// `[x0, y0, x1, y1]`.
    #[serde(default = "default_domain")]
    pub domain: [f64; 4],
    #[serde(default = "default_metric")]
    pub metric: u32,
    #[serde(default = "default_gamma")]
    pub metric_gamma: f64,
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default = "default_fit_weight")]
    pub fit_weight: f64,
    #[serde(default = "default_fit_tol")]
    pub fit_tol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Record wall time. Off by default so output is reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub uniform: Vec<UniformSweep>,
    #[serde(default)]
    pub adaptive: Vec<AdaptiveRun>,
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
            msg: e.message().to_string(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn tmop_config(&self) -> Result<TmopConfig<f64>> {
        let mut c = TmopConfig {
            metric: QualityMetric::from_id(self.metric, self.metric_gamma)?,
            target: TargetSpec::from_name(&self.target)?,
            fit_weight: self.fit_weight,
            ..TmopConfig::default()
        };
        c.controls.fit_tol = self.fit_tol;
        c.controls.max_iterations = self.max_iterations;
        Ok(c)
    }
}

/// One CSV row. Failed runs carry the error text and leave numeric fields empty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRecord {
    pub label: String,
    pub kind: String,
    pub size: usize,
    /// Uniform order, or `p_max` for adaptive runs.
    pub order: usize,
    pub dofs: Option<usize>,
    pub total_error: Option<f64>,
    pub max_face_error: Option<f64>,
    /// `max |σ|` over the nodes of the marked faces.
    pub sigma_max: Option<f64>,
    /// `order:count` pairs joined by `;`.
    pub histogram: String,
    pub status: String,
    pub solver_iterations: Option<usize>,
    pub outer_iterations: Option<usize>,
    pub min_det: Option<f64>,
    pub wall_time: Option<f64>,
    pub error: String,
}

impl StudyRecord {
    fn failed(label: &str, kind: &str, size: usize, order: usize, err: &Error) -> Self {
        Self {
            label: label.into(),
            kind: kind.into(),
            size,
            order,
            dofs: None,
            total_error: None,
            max_face_error: None,
            sigma_max: None,
            histogram: String::new(),
            status: "failed".into(),
            solver_iterations: None,
            outer_iterations: None,
            min_det: None,
            wall_time: None,
            error: err.to_string(),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.status != "failed"
    }

    /// Parses [`StudyRecord::histogram`] back into a map.
    pub fn histogram_map(&self) -> BTreeMap<usize, usize> {
        self.histogram
            .split(';')
            .filter_map(|kv| {
                let (k, v) = kv.split_once(':')?;
                Some((k.parse().ok()?, v.parse().ok()?))
            })
            .collect()
    }
}

pub fn format_histogram(h: &BTreeMap<usize, usize>) -> String {
    h.iter().map(|(p, n)| format!("{p}:{n}")).collect::<Vec<_>>().join(";")
}

pub fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIterations => "max-iterations",
        SolveStatus::Stalled => "stalled",
    }
}

fn base_mesh(cfg: &StudyConfig, n: usize, p: usize, triangles: bool) -> Result<MixedOrderMesh<f64>> {
    let [x0, y0, x1, y1] = cfg.domain;
    generate_cartesian(n, n, p, Vec2::new(x0, y0), Vec2::new(x1, y1), triangles)
}

/// Marks the interface on a uniform `n × n` mesh of order `p` and fits it.
pub fn uniform_run(
    cfg: &StudyConfig,
    field: &LevelSetField<f64>,
    label: &str,
    n: usize,
    p: usize,
    triangles: bool,
) -> StudyRecord {
    let t0 = Instant::now();
    let run = || -> Result<StudyRecord> {
        let mut mesh = base_mesh(cfg, n, p, triangles)?;
        mark_interface(&mut mesh, field, MarkingMode::Interface)?;
        let mut problem = TmopProblem::new(mesh, field, &cfg.tmop_config()?)?;
        let report = solve(&mut problem)?;
        let mesh = problem.mesh;
        let faces = FaceErrorReport::for_marked(&mesh, field)?;
        debug_assert_eq!(DofMap::new(&mesh)?.num_global, mesh.dof_count());
        Ok(StudyRecord {
            label: label.into(),
            kind: "uniform".into(),
            size: n,
            order: p,
            dofs: Some(mesh.dof_count()),
            total_error: Some(faces.total),
            max_face_error: Some(faces.max),
            sigma_max: Some(faces.node_sigma_max),
            histogram: format_histogram(&mesh.order_histogram()),
            status: status_name(report.status).into(),
            solver_iterations: Some(report.accepted_steps()),
            outer_iterations: None,
            min_det: Some(mesh.min_det_jacobian().1),
            wall_time: None,
            error: String::new(),
        })
    };
    let mut rec = run().unwrap_or_else(|e| StudyRecord::failed(label, "uniform", n, p, &e));
    if cfg.timing {
        rec.wall_time = Some(t0.elapsed().as_secs_f64());
    }
    rec
}

pub fn adaptive_plan(run: &AdaptiveRun) -> Result<AdaptivityPlan<f64>> {
    let mut plan = AdaptivityPlan::new(run.p_init, run.p_max);
    if let Some(d) = run.dp_ref {
        plan.dp_ref = d;
    }
    if let Some(d) = run.dp {
        plan.dp = d;
    }
    plan.refine = AdaptivityPlan::parse_refine(&run.refine)?;
    plan.deref = AdaptivityPlan::parse_deref(&run.deref)?;
    plan.edge_touch_elevation = run.edge_touch_elevate;
    plan.validate()?;
    Ok(plan)
}

pub fn adaptive_run(cfg: &StudyConfig, field: &LevelSetField<f64>, run: &AdaptiveRun) -> StudyRecord {
    let t0 = Instant::now();
    let go = || -> Result<StudyRecord> {
        let plan = adaptive_plan(run)?;
        let mesh = base_mesh(cfg, run.size, run.p_init, run.triangles)?;
        let res = run_rp_adaptivity(mesh, field, &cfg.tmop_config()?, &plan)?;
        let last = res.final_entry();
        let faces = FaceErrorReport::for_marked(&res.mesh, field)?;
        Ok(StudyRecord {
            label: run.label.clone(),
            kind: "adaptive".into(),
            size: run.size,
            order: run.p_max,
            dofs: Some(last.dofs),
            total_error: Some(last.total_error),
            max_face_error: Some(faces.max),
            sigma_max: Some(last.sigma_max),
            histogram: format_histogram(&last.histogram),
            status: format!("{:?}", res.exit).to_lowercase(),
            solver_iterations: Some(res.history.iter().map(|h| h.solver_iterations).sum()),
            outer_iterations: Some(res.outer_iterations),
            min_det: Some(last.min_det),
            wall_time: None,
            error: String::new(),
        })
    };
    let mut rec = go().unwrap_or_else(|e| StudyRecord::failed(&run.label, "adaptive", run.size, run.p_max, &e));
    if cfg.timing {
        rec.wall_time = Some(t0.elapsed().as_secs_f64());
    }
    rec
}

/// Runs every uniform sweep (orders outer, sizes inner) and then every
/// adaptive run. A run that fails becomes a `failed` row; the study goes on.
pub fn run_study(cfg: &StudyConfig, base: Option<&Path>) -> Result<Vec<StudyRecord>> {
    let field = load_levelset(&cfg.levelset, base)?;
    cfg.tmop_config()?;
    let mut out = Vec::new();
    for sweep in &cfg.uniform {
        for &p in &sweep.orders {
            for &n in &sweep.sizes {
                out.push(uniform_run(cfg, &field, &sweep.label, n, p, sweep.triangles));
            }
        }
    }
    for run in &cfg.adaptive {
        out.push(adaptive_run(cfg, &field, run));
    }
    Ok(out)
}

/// CSV with a header row; floats use 17 significant digits.
pub fn records_to_csv(records: &[StudyRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        let row = CsvRow::from(r);
        w.serialize(row).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Per-iteration history of an rp-adaptivity run as CSV.
pub fn history_to_csv(history: &[HistoryEntry<f64>]) -> Result<String> {
    #[derive(Serialize)]
    struct Row {
        iteration: usize,
        dofs: usize,
        total_error: String,
        max_face_error: String,
        sigma_max: String,
        histogram: String,
        refined_faces: usize,
        derefined_faces: usize,
        solve_status: &'static str,
        solver_iterations: usize,
        min_det: String,
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for h in history {
        w.serialize(Row {
            iteration: h.iteration,
            dofs: h.dofs,
            total_error: real(Some(h.total_error)),
            max_face_error: real(Some(h.max_error)),
            sigma_max: real(Some(h.sigma_max)),
            histogram: format_histogram(&h.histogram),
            refined_faces: h.refined_faces,
            derefined_faces: h.derefined_faces,
            solve_status: status_name(h.solve_status),
            solver_iterations: h.solver_iterations,
            min_det: real(Some(h.min_det)),
        })
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    label: &'a str,
    kind: &'a str,
    size: usize,
    order: usize,
    dofs: Option<usize>,
    total_error: String,
    max_face_error: String,
    sigma_max: String,
    histogram: &'a str,
    status: &'a str,
    solver_iterations: Option<usize>,
    outer_iterations: Option<usize>,
    min_det: String,
    wall_time: String,
    error: &'a str,
}

fn real(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

impl<'a> From<&'a StudyRecord> for CsvRow<'a> {
    fn from(r: &'a StudyRecord) -> Self {
        Self {
            label: &r.label,
            kind: &r.kind,
            size: r.size,
            order: r.order,
            dofs: r.dofs,
            total_error: real(r.total_error),
            max_face_error: real(r.max_face_error),
            sigma_max: real(r.sigma_max),
            histogram: &r.histogram,
            status: &r.status,
            solver_iterations: r.solver_iterations,
            outer_iterations: r.outer_iterations,
            min_det: real(r.min_det),
            wall_time: real(r.wall_time),
            error: &r.error,
        }
    }
}

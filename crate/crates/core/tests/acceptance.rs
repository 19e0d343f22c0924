//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rpfit::adapt::{run_rp_adaptivity, AdaptResult, AdaptivityPlan, DerefCriterion, RefineCriterion};
use rpfit::adapt::FaceErrorReport;
use rpfit::fem::{apply_edge_constraints, MixedOrderMesh};
use rpfit::interp::{AnalyticLevelSet, DiscreteLevelSet, LevelSetField, Locator};
use rpfit::io::{perturb_interior, unit_square};
use rpfit::linalg::Vec2;
use rpfit::tmop::{mark_interface, solve, MarkingMode, QualityMetric, SolveReport, TmopConfig, TmopProblem};

type V = Vec2<f64>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Minimum `det A` seen after accepted steps and derefinements, across every run.
#[derive(Default)]
struct Validity {
    checks: usize,
    violations: Vec<String>,
}

impl Validity {
    fn solve(&mut self, what: &str, r: &SolveReport<f64>) {
        self.checks += r.accepted_steps();
        for (k, it) in r.iterations.iter().enumerate() {
            if it.step > 0.0 && !(it.min_det > 0.0) {
                self.violations.push(format!("{what} step {k}: {:.3e}", it.min_det));
            }
        }
    }

    fn adapt(&mut self, what: &str, r: &AdaptResult<f64>) {
        self.checks += r.history.iter().map(|h| h.solver_iterations + h.derefined_faces).sum::<usize>();
        if !(r.min_det_seen > 0.0) {
            self.violations.push(format!("{what}: {:.3e}", r.min_det_seen));
        }
        self.mesh(what, &r.mesh);
    }

    fn mesh(&mut self, what: &str, m: &MixedOrderMesh<f64>) {
        let (e, d) = m.min_det_jacobian();
        if !(d > 0.0) {
            self.violations.push(format!("{what}: element {e} det {d:.3e}"));
        }
    }
}

fn squircle() -> LevelSetField<f64> {
    AnalyticLevelSet::squircle().into()
}

fn fit_uniform(n: usize, p: usize, field: &LevelSetField<f64>, v: &mut Validity) -> (usize, f64, SolveReport<f64>) {
    let mut mesh = unit_square::<f64>(n, n, p, false).unwrap();
    mark_interface(&mut mesh, field, MarkingMode::Interface).unwrap();
    let mut problem = TmopProblem::new(mesh, field, &TmopConfig::default()).unwrap();
    let r = solve(&mut problem).unwrap();
    v.solve(&format!("uniform p={p} n={n}"), &r);
    v.mesh(&format!("uniform p={p} n={n}"), &problem.mesh);
    let e = FaceErrorReport::for_marked(&problem.mesh, field).unwrap().total;
    (problem.mesh.dof_count(), e, r)
}

fn plan(dp: usize, deref: Option<DerefCriterion<f64>>) -> AdaptivityPlan<f64> {
    let mut p = AdaptivityPlan::new(1, 3);
    p.dp_ref = 2;
    p.dp = dp;
    p.refine = RefineCriterion::Absolute(1e-14);
    p.deref = deref;
    p
}

fn adapt(n: usize, plan: &AdaptivityPlan<f64>, field: &LevelSetField<f64>) -> AdaptResult<f64> {
    let mesh = unit_square::<f64>(n, n, plan.p_init, false).unwrap();
    run_rp_adaptivity(mesh, field, &TmopConfig::default(), plan).unwrap()
}

/// Uniform-order sweep, plus p = 1 at n = 12 and 24 so that p = 3 at
/// n = 4 and 8 has a p = 1 partner with a matching DOF count.
fn criterion1(v: &mut Validity, uniform8: &mut Option<(usize, f64)>) -> Outcome {
    let t0 = Instant::now();
    let field = squircle();
    let mut rows: BTreeMap<(usize, usize), (usize, f64)> = BTreeMap::new();
    let mut detail = Vec::new();
    for p in 1..=3 {
        for n in [4, 8, 16, 32] {
            let (dofs, e, r) = fit_uniform(n, p, &field, v);
            println!("  sweep p={p} n={n:>2}: dofs={dofs:>5} e_F={e:.3e} sigma={:.2e} {:?}", r.final_sigma_max, r.status);
            rows.insert((p, n), (dofs, e));
        }
    }
    for n in [12, 24] {
        let (dofs, e, r) = fit_uniform(n, 1, &field, v);
        println!("  companion p=1 n={n}: dofs={dofs:>5} e_F={e:.3e} sigma={:.2e} {:?}", r.final_sigma_max, r.status);
        rows.insert((1, n), (dofs, e));
    }
    *uniform8 = rows.get(&(3, 8)).copied();
    let mut pass = true;
    for p in 1..=3 {
        let seq: Vec<f64> = [4, 8, 16, 32].iter().map(|&n| rows[&(p, n)].1).collect();
        let mono = seq.windows(2).all(|w| w[1] < w[0]);
        if !mono {
            detail.push(format!("p={p} not monotone {:?}", seq.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()));
        }
        pass &= mono;
    }
    let mut pairs = 0;
    for n3 in [4, 8, 16, 32] {
        let (d3, e3) = rows[&(3, n3)];
        for (&(p, n1), &(d1, e1)) in &rows {
            if p != 1 || (d1 as f64 - d3 as f64).abs() > 0.2 * d3 as f64 {
                continue;
            }
            pairs += 1;
            let ratio = e1 / e3;
            let ok = ratio >= 10.0;
            detail.push(format!("p3 n={n3} vs p1 n={n1} ({d3}/{d1} dofs): ratio {ratio:.1}"));
            pass &= ok;
        }
    }
    pass &= pairs > 0;
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    detail.push(format!("{secs:.1}s"));
    outcome(pass, detail.join("; "))
}

struct Approaches {
    a: AdaptResult<f64>,
    b: AdaptResult<f64>,
    c: AdaptResult<f64>,
}

fn summary(r: &AdaptResult<f64>) -> String {
    let h = r.final_entry();
    format!("dofs {} e_F {:.3e} orders {:?} exit {:?}", h.dofs, h.total_error, h.histogram, r.exit)
}

fn criterion2(ap: &Approaches, uniform8: Option<(usize, f64)>) -> Outcome {
    let Some((du, eu)) = uniform8 else {
        return outcome(false, "uniform p=3 8x8 reference missing".into());
    };
    let h = ap.a.final_entry();
    let pass = h.total_error <= 2.0 * eu && (h.dofs as f64) <= 0.6 * du as f64;
    outcome(
        pass,
        format!("A {} vs uniform p=3 dofs {du} e_F {eu:.3e} ({:.0}% fewer DOFs)", summary(&ap.a), 100.0 * (1.0 - h.dofs as f64 / du as f64)),
    )
}

fn criterion3(ap: &Approaches) -> Outcome {
    let (a, b) = (ap.a.final_entry(), ap.b.final_entry());
    let orders = b.histogram.contains_key(&1) && b.histogram.contains_key(&3);
    let pass = b.dofs < a.dofs && orders && b.total_error <= 100.0 * a.total_error;
    let derefined: usize = ap.b.history.iter().map(|h| h.derefined_faces).sum();
    outcome(pass, format!("B {}, {derefined} faces derefined; A dofs {}", summary(&ap.b), a.dofs))
}

fn criterion4(ap: &Approaches) -> Outcome {
    let (b, c) = (ap.b.final_entry(), ap.c.final_entry());
    let mesh = &ap.c.mesh;
    let worst = mesh
        .edges()
        .iter()
        .filter(|e| e.sides.len() == 2)
        .map(|e| mesh.elements[e.sides[0].element].order.abs_diff(mesh.elements[e.sides[1].element].order))
        .max()
        .unwrap_or(0);
    let more = c.dofs as f64 / b.dofs as f64 - 1.0;
    let pass = worst <= 1 && more <= 0.25 && c.total_error <= 2.0 * b.total_error;
    outcome(
        pass,
        format!("C {}, max |dp| {worst}, {:+.0}% DOFs vs B, e_F ratio {:.2}", summary(&ap.c), 100.0 * more, c.total_error / b.total_error),
    )
}

fn fd_relative_error(mesh: MixedOrderMesh<f64>, field: &LevelSetField<f64>, metric: QualityMetric<f64>) -> f64 {
    let cfg = TmopConfig {
        metric,
        fit_weight: 3.0,
        ..TmopConfig::default()
    };
    let p = TmopProblem::new(mesh, field, &cfg).unwrap();
    let x = p.positions();
    let g = p.gradient(&x).unwrap();
    let h = 1e-6 * p.mesh.elements.iter().map(|e| e.diameter()).fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..x.len() {
        for a in 0..2 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k].set(a, x[k].get(a) + h);
            xm[k].set(a, x[k].get(a) - h);
            let fd = (p.objective(&xp).unwrap() - p.objective(&xm).unwrap()) / (2.0 * h);
            num += (g[k].get(a) - fd).powi(2);
            den += fd * fd;
        }
    }
    (num / den).sqrt()
}

fn criterion5() -> Outcome {
    let field: LevelSetField<f64> = AnalyticLevelSet::circle(Vec2::new(0.47, 0.52), 0.3).into();
    let metrics = [QualityMetric::Shape2, QualityMetric::Size77, QualityMetric::ShapeSize80 { gamma: 0.3 }];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut meshes = 0;
    let mut fitted_terms = true;
    for (split, p, mixed) in [(false, 2, false), (true, 2, false), (false, 3, false), (true, 1, false), (false, 1, true), (true, 1, true)] {
        let mut mesh = unit_square::<f64>(3, 3, p, split).unwrap();
        if mixed {
            let orders: Vec<usize> = (0..mesh.elements.len()).map(|_| rng.gen_range(1..=3)).collect();
            mesh.set_orders(&orders).unwrap();
        }
        perturb_interior(&mut mesh, 0.15, &mut rng).unwrap();
        mark_interface(&mut mesh, &field, MarkingMode::Interface).unwrap();
        fitted_terms &= !mesh.marked_faces().is_empty();
        meshes += 1;
        for &m in &metrics {
            worst = worst.max(fd_relative_error(mesh.clone(), &field, m));
        }
    }
    outcome(
        worst <= 1e-6 && meshes >= 5 && fitted_terms,
        format!("{meshes} meshes x 3 metrics, worst relative error {worst:.2e}"),
    )
}

fn criterion6(v: &Validity) -> Outcome {
    let pass = v.violations.is_empty() && v.checks > 0;
    let mut d = format!("{} checked states, {} violations", v.checks, v.violations.len());
    for s in v.violations.iter().take(3) {
        d.push_str(&format!("; {s}"));
    }
    outcome(pass, d)
}

fn criterion7(v: &mut Validity) -> Outcome {
    let field = squircle();
    let mut mesh = unit_square::<f64>(8, 8, 3, false).unwrap();
    mark_interface(&mut mesh, &field, MarkingMode::Interface).unwrap();
    let mut cfg = TmopConfig::default();
    cfg.controls.max_iterations = 200;
    let mut problem = TmopProblem::new(mesh, &field, &cfg).unwrap();
    let r = solve(&mut problem).unwrap();
    v.solve("8x8 p=3 fit", &r);
    let best = r
        .iterations
        .iter()
        .take(200)
        .map(|it| it.sigma_max)
        .fold(r.initial_sigma_max, f64::min);
    outcome(
        best <= 1e-7,
        format!("best |sigma| {best:.3e} in {} iterations, status {:?}", r.iterations.len(), r.status),
    )
}

fn random_poly(rng: &mut ChaCha8Rng, p: usize) -> Vec<(i32, i32, f64)> {
    let mut t = Vec::new();
    for a in 0..=p as i32 {
        for b in 0..=(p as i32 - a) {
            t.push((a, b, rng.gen_range(-1.0..1.0)));
        }
    }
    t
}

fn eval_poly(t: &[(i32, i32, f64)], x: V) -> f64 {
    t.iter().map(|&(a, b, c)| c * x.x.powi(a) * x.y.powi(b)).sum()
}

fn criterion8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_interp: f64 = 0.0;
    for p in 1..=4 {
        for split in [false, true] {
            let bg = unit_square::<f64>(5, 5, p, split).unwrap();
            let poly = random_poly(&mut rng, p);
            let field: LevelSetField<f64> = DiscreteLevelSet::sample(&bg, |x| eval_poly(&poly, x)).unwrap().into();
            for _ in 0..1000 {
                let x = Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                worst_interp = worst_interp.max((field.value(x).unwrap() - eval_poly(&poly, x)).abs());
            }
        }
    }
    let mut worst_locate: f64 = 0.0;
    let mut missing = 0;
    for (seed, split) in [(1, false), (2, true), (3, false)] {
        let mut bg = unit_square::<f64>(6, 6, 2, split).unwrap();
        perturb_interior(&mut bg, 0.2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let loc = Locator::new(&bg).unwrap();
        let diam = bg.diameter();
        for _ in 0..1000 {
            let x = Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let c = loc.locate(x);
            if !c.found() {
                missing += 1;
                continue;
            }
            let back = bg.elements[c.element].eval_map(c.reference);
            worst_locate = worst_locate.max((back - x).norm() / diam);
        }
    }
    outcome(
        worst_interp <= 1e-9 && worst_locate <= 1e-10 && missing == 0,
        format!("interpolation error {worst_interp:.2e}, locate round trip {worst_locate:.2e} x diameter, {missing} not found"),
    )
}

fn criterion9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mesh = unit_square::<f64>(8, 8, 1, false).unwrap();
    let orders: Vec<usize> = (0..64).map(|_| rng.gen_range(1..=4)).collect();
    mesh.set_orders(&orders).unwrap();
    // every element gets its own random node displacement, breaking conformity
    for el in &mut mesh.elements {
        let nv = el.geometry.num_vertices();
        for x in el.nodes.iter_mut().skip(nv) {
            *x = *x + Vec2::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01));
        }
    }
    apply_edge_constraints(&mut mesh).unwrap();
    let mut worst: f64 = 0.0;
    let mut edges = 0;
    for e in mesh.edges() {
        if e.sides.len() != 2 {
            continue;
        }
        edges += 1;
        for k in 0..10 {
            let t = (k as f64 + 0.5) / 10.0;
            let a = mesh.elements[e.sides[0].element].eval_map(mesh.side_point(e.sides[0], t));
            let b = mesh.elements[e.sides[1].element].eval_map(mesh.side_point(e.sides[1], t));
            worst = worst.max((a - b).norm());
        }
    }
    outcome(worst <= 1e-12, format!("{edges} interior edges, worst mismatch {worst:.2e}"))
}

fn criterion10(v: &mut Validity) -> Outcome {
    let mut mesh = unit_square::<f64>(6, 6, 1, true).unwrap();
    perturb_interior(&mut mesh, 0.3, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
    let field: LevelSetField<f64> = AnalyticLevelSet::plane(Vec2::new(0.0, 1.0), 0.5).into();
    let cfg = TmopConfig {
        metric: QualityMetric::Shape2,
        fit_weight: 0.0,
        ..TmopConfig::default()
    };
    let mut p = TmopProblem::new(mesh, &field, &cfg).unwrap();
    let x0 = p.positions();
    let (f0, m0) = (p.shape_objective(&x0), p.element_max_metric(&x0).into_iter().fold(0.0, f64::max));
    let r = solve(&mut p).unwrap();
    v.solve("triangle shape", &r);
    let x1 = p.positions();
    let (f1, m1) = (p.shape_objective(&x1), p.element_max_metric(&x1).into_iter().fold(0.0, f64::max));
    let drop = 1.0 - m1 / m0;
    outcome(
        f1 < f0 && drop >= 0.25,
        format!("F_mu {f0:.4e} -> {f1:.4e}, max mu2 {m0:.3e} -> {m1:.3e} ({:.0}% lower)", 100.0 * drop),
    )
}

fn criterion11(ap: &Approaches, v: &mut Validity) -> Outcome {
    let field = squircle();
    let mut runs: Vec<(String, AdaptivityPlan<f64>, usize)> = Vec::new();
    let mut extra = |name: &str, p: AdaptivityPlan<f64>, n: usize| runs.push((name.into(), p, n));
    let mut d = AdaptivityPlan::new(1, 4);
    d.dp_ref = 1;
    d.refine = RefineCriterion::Relative(0.5);
    d.deref = Some(DerefCriterion::RelChange(0.05));
    extra("rel/dp_ref=1", d, 4);
    let mut e = AdaptivityPlan::new(1, 3);
    e.refine = RefineCriterion::Absolute(0.0);
    e.deref = Some(DerefCriterion::RelToRef(1.0));
    e.edge_touch_elevation = true;
    extra("abs0/b1/elevate", e, 4);
    extra("p_init=p_max", AdaptivityPlan::new(2, 2), 4);
    let mut f = AdaptivityPlan::new(1, 4);
    f.dp_ref = 2;
    f.dp = 1;
    f.refine = RefineCriterion::Absolute(1e-10);
    f.deref = Some(DerefCriterion::SizeBased(1e-3));
    extra("p_max=4/size", f, 4);

    let mut rows = vec![
        ("A".to_string(), plan(3, None), &ap.a),
        ("B".to_string(), plan(3, Some(DerefCriterion::SizeBased(1e-5))), &ap.b),
        ("C".to_string(), plan(1, Some(DerefCriterion::SizeBased(1e-5))), &ap.c),
    ]
    .into_iter()
    .map(|(n, p, r)| (n, p.max_outer_iterations(), r.outer_iterations))
    .collect::<Vec<_>>();
    for (name, p, n) in runs {
        let r = adapt(n, &p, &field);
        v.adapt(&name, &r);
        rows.push((name, p.max_outer_iterations(), r.outer_iterations));
    }
    let pass = rows.iter().all(|(_, cap, used)| used <= cap);
    let d = rows.iter().map(|(n, cap, used)| format!("{n} {used}/{cap}")).collect::<Vec<_>>().join(", ");
    outcome(pass, d)
}

fn main() {
    let t0 = Instant::now();
    let mut v = Validity::default();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut uniform8 = None;

    results.push((1, criterion1(&mut v, &mut uniform8)));
    let field = squircle();
    let ap = Approaches {
        a: adapt(8, &plan(3, None), &field),
        b: adapt(8, &plan(3, Some(DerefCriterion::SizeBased(1e-5))), &field),
        c: adapt(8, &plan(1, Some(DerefCriterion::SizeBased(1e-5))), &field),
    };
    for (name, r) in [("A", &ap.a), ("B", &ap.b), ("C", &ap.c)] {
        v.adapt(name, r);
        for h in &r.history {
            println!(
                "  {name} iter {}: dofs={} e_F={:.3e} sigma={:.2e} orders={:?} refined={} derefined={} {:?}",
                h.iteration, h.dofs, h.total_error, h.sigma_max, h.histogram, h.refined_faces, h.derefined_faces, h.solve_status
            );
        }
    }
    results.push((2, criterion2(&ap, uniform8)));
    results.push((3, criterion3(&ap)));
    results.push((4, criterion4(&ap)));
    results.push((5, criterion5()));
    results.push((7, criterion7(&mut v)));
    results.push((8, criterion8()));
    results.push((9, criterion9()));
    results.push((10, criterion10(&mut v)));
    results.push((11, criterion11(&ap, &mut v)));
    results.push((6, criterion6(&v)));
    results.sort_by_key(|r| r.0);

    println!();
    for (k, o) in &results {
        println!("criterion {k:>2}: {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed = results.iter().filter(|r| !r.1.pass).count();
    println!("{} passed, {failed} failed in {:.1}s", results.len() - failed, t0.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}

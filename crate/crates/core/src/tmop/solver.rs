use crate::error::{Error, Result};
use crate::linalg::{dot, norm, truncated_pcg, BlockJacobi, Vec2};
use crate::scalar::Real;
use crate::tmop::problem::TmopProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Fit tolerance or gradient tolerance reached.
    Converged,
    MaxIterations,
    /// No valid decreasing step along either the Newton or the gradient direction.
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Newton,
    SteepestDescent,
}

/// State after one accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub objective: T,
    /// Weight the objective above was evaluated with.
    pub fit_weight: T,
    pub sigma_max: T,
    /// Largest reduced-coordinate change of the step.
    pub step: T,
    pub line_search_factor: T,
    pub min_det: T,
    pub kind: StepKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T> {
    pub status: SolveStatus,
    pub initial_objective: T,
    pub initial_sigma_max: T,
    pub initial_min_det: T,
    pub iterations: Vec<IterationRecord<T>>,
    pub final_objective: T,
    pub final_sigma_max: T,
    pub final_fit_weight: T,
}

impl<T: Real> SolveReport<T> {
    pub fn accepted_steps(&self) -> usize {
        self.iterations.len()
    }

    /// Smallest `det A` seen after any accepted step (initial mesh included).
    pub fn min_det_seen(&self) -> T {
        self.iterations.iter().fold(self.initial_min_det, |m, r| m.min(r.min_det))
    }

    /// Accepted objective values never increase while the weight is unchanged.
    pub fn is_monotone(&self) -> bool {
        let mut prev = (self.initial_objective, None::<T>);
        for r in &self.iterations {
            if prev.1.is_none_or(|w| w == r.fit_weight) && r.objective > prev.0 {
                return false;
            }
            prev = (r.objective, Some(r.fit_weight));
        }
        true
    }
}

/// Absolute gradient-norm floor below which the iterate counts as stationary.
const GRAD_ATOL: f64 = 1e-12;

/// Minimizes the problem's objective over reduced node positions, writing
/// the best iterate back into `problem.mesh`.
///
/// Each iteration solves the Newton system with truncated PCG, falls back
/// to the negative gradient when that is not a descent direction, and
/// backtracks until the objective strictly decreases and the mesh stays
/// valid. The fitting weight grows whenever `|σ|_∞` stagnates.
pub fn solve<T: Real>(problem: &mut TmopProblem<'_, T>) -> Result<SolveReport<T>> {
    let ctl = problem.controls.clone();
    let mut x = problem.positions();
    let min_det0 = problem.min_det(&x);
    if !(min_det0 > T::zero()) {
        let (element, d) = problem.mesh.min_det_jacobian();
        return Err(Error::InvalidMesh {
            element,
            min_det: d.to_f64_lossy(),
        });
    }
    let mut f = problem.objective(&x)?;
    if !f.is_finite() {
        return Err(Error::InvalidArgument("objective is not finite on the initial mesh".into()));
    }
    let mut sig = problem.sigma_max(&x)?;
    let has_fit = !problem.marked_nodes().is_empty() && problem.fit_weight > T::zero();
    let hmin = problem
        .mesh
        .elements
        .iter()
        .map(|e| e.diameter())
        .fold(T::infinity(), T::min);
    let groups = problem.reduced_groups();
    let mut g = problem.reduce(&problem.gradient(&x)?);
    let g0 = norm(&g);
    let mut report = SolveReport {
        status: SolveStatus::MaxIterations,
        initial_objective: f,
        initial_sigma_max: sig,
        initial_min_det: min_det0,
        iterations: Vec::new(),
        final_objective: f,
        final_sigma_max: sig,
        final_fit_weight: problem.fit_weight,
    };
    for _ in 0..ctl.max_iterations {
        if has_fit && sig <= ctl.fit_tol {
            report.status = SolveStatus::Converged;
            break;
        }
        let gn = norm(&g);
        if gn <= ctl.grad_rtol * g0 || gn <= T::tol(GRAD_ATOL) {
            report.status = SolveStatus::Converged;
            break;
        }
        let h = problem.hessian(&x)?;
        let pre = BlockJacobi::new(&h, &groups);
        let rhs: Vec<T> = g.iter().map(|&v| -v).collect();
        let cg = truncated_pcg(&h, &rhs, &pre, ctl.cg_rtol, ctl.cg_max_iterations);
        let newton_ok = cg.x.iter().all(|v| v.is_finite()) && dot(&cg.x, &g) < T::zero();
        let mut attempt = if newton_ok {
            line_search(problem, &x, &cg.x, T::one(), f, ctl.max_halvings)?.map(|r| (r, StepKind::Newton, cg.x))
        } else {
            None
        };
        if attempt.is_none() {
            let gmax = rhs.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let alpha0 = T::c(0.1) * hmin / gmax;
            attempt = line_search(problem, &x, &rhs, alpha0, f, ctl.max_halvings)?
                .map(|r| (r, StepKind::SteepestDescent, rhs));
        }
        let Some(((xn, fnew, alpha, md), kind, d)) = attempt else {
            report.status = SolveStatus::Stalled;
            break;
        };
        let step = d.iter().fold(T::zero(), |m, v| m.max((alpha * *v).abs()));
        x = xn;
        f = fnew;
        let sig_new = problem.sigma_max(&x)?;
        report.iterations.push(IterationRecord {
            objective: f,
            fit_weight: problem.fit_weight,
            sigma_max: sig_new,
            step,
            line_search_factor: alpha,
            min_det: md,
            kind,
        });
        if has_fit
            && sig_new > ctl.fit_tol
            && problem.fit_weight < ctl.weight_cap
            && sig < ctl.weight_trigger * sig_new
        {
            problem.fit_weight = (problem.fit_weight * ctl.weight_factor).min(ctl.weight_cap);
            f = problem.objective(&x)?;
        }
        sig = sig_new;
        g = problem.reduce(&problem.gradient(&x)?);
    }
    if report.status == SolveStatus::MaxIterations && has_fit && sig <= ctl.fit_tol {
        report.status = SolveStatus::Converged;
    }
    problem.commit(&x);
    report.final_objective = f;
    report.final_sigma_max = sig;
    report.final_fit_weight = problem.fit_weight;
    Ok(report)
}

type Accepted<T> = (Vec<Vec2<T>>, T, T, T);

/// Backtracking from `alpha0`; returns `(x, F, α, min det)` of the first
/// valid strictly decreasing trial.
fn line_search<T: Real>(
    problem: &TmopProblem<'_, T>,
    x: &[Vec2<T>],
    d: &[T],
    alpha0: T,
    f: T,
    halvings: usize,
) -> Result<Option<Accepted<T>>> {
    let mut alpha = alpha0;
    for _ in 0..=halvings {
        let xt = problem.displaced(x, d, alpha);
        let md = problem.min_det(&xt);
        if md > T::zero() {
            match problem.objective(&xt) {
                Ok(ft) if ft.is_finite() && ft < f => return Ok(Some((xt, ft, alpha, md))),
                Ok(_) | Err(Error::NotFound { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        alpha = alpha * T::c(0.5);
    }
    Ok(None)
}

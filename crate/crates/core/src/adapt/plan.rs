use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tmop::MarkingMode;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RefineCriterion<T> {
    /// Refine faces with `e_f > γ₁`.
    Absolute(T),
    /// Refine faces with `e_f ≥ γ₂ · e_{F,∞}`.
    Relative(T),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerefCriterion<T> {
    /// Accept `p̂` when `e_{f,p̂} < β₁ · e_ref`.
    RelToRef(T),
    /// Accept `p̂` when `e_{f,p̂} < (1 + β₂) · e_{f,p}`.
    RelChange(T),
    /// Accept `p̂` when `l_{f,p̂} > (1 − β₃) · l_{f,p}`.
    SizeBased(T),
}

/// Inputs of the rp-adaptivity loop.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptivityPlan<T> {
    pub p_init: usize,
    pub p_max: usize,
    /// Order increment per refinement.
    pub dp_ref: usize,
    /// Largest allowed order jump across an edge.
    pub dp: usize,
    pub refine: RefineCriterion<T>,
    pub deref: Option<DerefCriterion<T>>,
    pub edge_touch_elevation: bool,
    pub marking: MarkingMode,
}

impl<T: Real> AdaptivityPlan<T> {
    /// `p_init = 1`, `p_max = 3`, `Δp_ref = 2`, `Δp = p_max`, `γ₁ = 1e-14`, no derefinement.
    pub fn new(p_init: usize, p_max: usize) -> Self {
        Self {
            p_init,
            p_max,
            dp_ref: p_max.saturating_sub(p_init).max(1),
            dp: p_max,
            refine: RefineCriterion::Absolute(T::c(1e-14)),
            deref: None,
            edge_touch_elevation: false,
            marking: MarkingMode::Interface,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.p_init < 1 || self.p_init > self.p_max {
            return bad("orders must satisfy 1 <= p_init <= p_max");
        }
        if self.dp_ref < 1 || self.dp < 1 {
            return bad("dp_ref and dp must be at least 1");
        }
        let nonneg = |v: T| v >= T::zero();
        let ok = match self.refine {
            RefineCriterion::Absolute(g) | RefineCriterion::Relative(g) => nonneg(g),
        } && match self.deref {
            None => true,
            Some(DerefCriterion::RelToRef(b) | DerefCriterion::RelChange(b) | DerefCriterion::SizeBased(b)) => nonneg(b),
        };
        if !ok {
            return bad("thresholds must be non-negative");
        }
        Ok(())
    }

    /// Outer-iteration bound `⌈(p_max − p_init)/Δp_ref⌉ + 1`.
    pub fn max_outer_iterations(&self) -> usize {
        self.p_max.saturating_sub(self.p_init).div_ceil(self.dp_ref.max(1)) + 1
    }

    /// Refinement threshold `e_ref` given the reference `e_{F,∞}`.
    pub fn refine_threshold(&self, e_inf: T) -> T {
        match self.refine {
            RefineCriterion::Absolute(g) => g,
            RefineCriterion::Relative(g) => g * e_inf,
        }
    }

    /// Parses `abs:γ` or `rel:γ`.
    pub fn parse_refine(s: &str) -> Result<RefineCriterion<T>> {
        let (kind, v) = split_value(s)?;
        match kind {
            "abs" => Ok(RefineCriterion::Absolute(v)),
            "rel" => Ok(RefineCriterion::Relative(v)),
            _ => Err(Error::InvalidArgument(format!("unknown refine criterion '{kind}'"))),
        }
    }

    /// Parses `b1:β`, `b2:β`, `size:β` or `none`.
    pub fn parse_deref(s: &str) -> Result<Option<DerefCriterion<T>>> {
        if s == "none" {
            return Ok(None);
        }
        let (kind, v) = split_value(s)?;
        match kind {
            "b1" => Ok(Some(DerefCriterion::RelToRef(v))),
            "b2" => Ok(Some(DerefCriterion::RelChange(v))),
            "size" | "b3" => Ok(Some(DerefCriterion::SizeBased(v))),
            _ => Err(Error::InvalidArgument(format!("unknown derefinement criterion '{kind}'"))),
        }
    }
}

fn split_value<T: Real>(s: &str) -> Result<(&str, T)> {
    let (k, v) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("expected kind:value, got '{s}'")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("'{v}': {e}")))?;
    Ok((k, T::c(v)))
}

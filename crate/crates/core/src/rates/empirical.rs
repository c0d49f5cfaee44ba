use serde::Serialize;

use super::law::{DistanceLaw, GapMeasure, Integrator};
use super::legendre::{solve_scalar, LegendreResult};
use crate::error::{invalid, Result};
use crate::procgen::PointSeq;
use crate::score::ScoreFn;

/// `Lambda_{S,l}(t) = (lambda / l) * int_0^l [exp(t f(d(y, S))) - 1] dy` for
/// a fixed template `S` on `[0, l)`.
///
/// The integral splits exactly over the stretch before the first template
/// point, the stretch after the last, and twice each half gap between
/// neighbours; the integrand only depends on the distance to the nearest
/// template point.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalCgf {
    pub l: f64,
    pub lambda: f64,
    pub left_len: f64,
    pub right_len: f64,
    pub half_gaps: Vec<f64>,
    #[serde(skip)]
    integrator: Option<Integrator>,
    #[serde(skip)]
    bound: f64,
}

impl EmpiricalCgf {
    /// An empty template gives the degenerate `Lambda_{S,l} = 0`.
    pub fn build(template: &PointSeq, lambda: f64, f: &ScoreFn) -> Result<Self> {
        if !f.is_scalar() {
            return Err(invalid(
                "the conditional CGF is defined for scalar score functions",
            ));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!(
                "data density must be positive, got {lambda}"
            )));
        }
        let w = template.window();
        if w.start != 0.0 || !(w.end > 0.0) {
            return Err(invalid(format!(
                "template window must be [0, l) with l > 0, got [{}, {})",
                w.start, w.end
            )));
        }
        let l = w.end;
        let pts = template.points();
        if pts.is_empty() {
            return Ok(Self {
                l,
                lambda,
                left_len: l,
                right_len: 0.0,
                half_gaps: Vec::new(),
                integrator: None,
                bound: f.bound(),
            });
        }
        let law = DistanceLaw::Empirical(GapMeasure::from_template(pts, l)?);
        Ok(Self {
            l,
            lambda,
            left_len: pts[0],
            right_len: l - pts[pts.len() - 1],
            half_gaps: pts.windows(2).map(|w| (w[1] - w[0]) / 2.0).collect(),
            integrator: Some(Integrator::new(&law, f)),
            bound: f.bound(),
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.integrator.is_none()
    }

    /// `left_len + right_len + 2 * sum(half_gaps)`, which equals `l`.
    pub fn partition_sum(&self) -> f64 {
        self.left_len + self.right_len + 2.0 * self.half_gaps.iter().sum::<f64>()
    }

    /// `sup |f|`, the envelope exponent scale for tilted sampling.
    pub fn score_bound(&self) -> f64 {
        self.bound
    }

    /// `(Lambda_{S,l}(t), Lambda', Lambda'')`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match &self.integrator {
            None => (0.0, 0.0, 0.0),
            Some(i) => {
                let v = i.eval(&[t], 2);
                (
                    self.lambda * v.value,
                    self.lambda * v.grad[0],
                    self.lambda * v.hess[0],
                )
            }
        }
    }

    /// `sup_t theta t - Lambda_{S,l}(t)`.
    pub fn rate_star(&self, theta: f64) -> LegendreResult {
        match &self.integrator {
            None => {
                let mut r = LegendreResult::boundary(&[theta], "degenerate");
                r.detail = Some("empty template: the conditional CGF is identically 0".into());
                r
            }
            Some(Integrator::Exact(_) | Integrator::Constant(_)) => {
                solve_scalar(theta, |t| self.eval(t), "closed form")
            }
            Some(_) => solve_scalar(theta, |t| self.eval(t), "adaptive quadrature"),
        }
    }
}

pub fn empirical_cgf_build(template: &PointSeq, lambda: f64, f: &ScoreFn) -> Result<EmpiricalCgf> {
    EmpiricalCgf::build(template, lambda, f)
}

pub fn empirical_cgf_eval(ecgf: &EmpiricalCgf, t: f64) -> (f64, f64, f64) {
    ecgf.eval(t)
}

pub fn empirical_rate_star(ecgf: &EmpiricalCgf, theta: f64) -> LegendreResult {
    ecgf.rate_star(theta)
}

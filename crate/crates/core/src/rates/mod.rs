//! Cumulant generating functions of the score and their Legendre
//! transforms.
//!
//! With `Y` Poisson of density `lambda` and `d = d(0, X)`,
//! `Lambda(t) = lambda * E[exp(<t, f(d)>) - 1]` and the waiting-time rate is
//! `sup_{t >= 0} <theta, t> - Lambda(t)`. For a fixed template `S` on
//! `[0, l)` the conditional version averages over `y` uniform on the window
//! instead of over `d`; see [`EmpiricalCgf`].

mod conditions;
mod empirical;
mod law;
mod legendre;
mod moments;

pub use conditions::{validate_conditions, CheckStatus, ConditionCheck, ConditionReport};
pub use empirical::{empirical_cgf_build, empirical_cgf_eval, empirical_rate_star, EmpiricalCgf};
pub use law::{DistanceLaw, GapMeasure};
pub use legendre::{
    solve_dual, solve_primal, solve_scalar, solve_vector, LegendreResult, SolveStatus, DUALITY_TOL,
    GRAD_TOL, SCALAR_TOL,
};
pub use moments::CgfValue;

pub(crate) use law::Integrator;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::procgen::{MarkDist, ProcessModel};
use crate::rng::RngSeed;
use crate::score::ScoreFn;

/// Everything needed to evaluate `Lambda`: the data density, the law of
/// `d(0, X)`, the score function and optional data marks.
#[derive(Debug, Clone)]
pub struct RateModel {
    lambda: f64,
    law: DistanceLaw,
    f: ScoreFn,
    marks: Option<MarkDist>,
    data_poisson: bool,
    integrator: Integrator,
    phi: Vec<f64>,
}

/// How to approximate `d(0, X)` for templates without a closed-form law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalLaw {
    /// Length of the sampled template, in units of the mean spacing.
    pub points: f64,
    pub seed: RngSeed,
}

impl Default for EmpiricalLaw {
    fn default() -> Self {
        Self {
            points: 1e5,
            seed: RngSeed::new(0, 0),
        }
    }
}

impl RateModel {
    pub fn new(lambda: f64, law: DistanceLaw, f: ScoreFn) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!(
                "data density must be positive and finite, got {lambda}"
            )));
        }
        let integrator = Integrator::new(&law, &f);
        let mut m = Self {
            lambda,
            law,
            f,
            marks: None,
            data_poisson: true,
            integrator,
            phi: Vec::new(),
        };
        m.phi = m.cgf(&vec![0.0; m.f.dim()]).grad;
        Ok(m)
    }

    /// Poisson template of density `template_density`, Poisson data of
    /// density `lambda`.
    pub fn poisson(template_density: f64, lambda: f64, f: ScoreFn) -> Result<Self> {
        Self::new(lambda, DistanceLaw::poisson(template_density)?, f)
    }

    /// Compound data: each data point carries an i.i.d. mark from `marks`.
    pub fn with_marks(mut self, marks: MarkDist) -> Result<Self> {
        marks.validate()?;
        self.marks = Some(marks);
        self.phi = self.cgf(&vec![0.0; self.f.dim()]).grad;
        Ok(self)
    }

    /// Builds the model for template process `x` and data process `y`.
    /// Non-Poisson templates use the empirical law of one long sample.
    pub fn from_processes(
        x: &ProcessModel,
        y: &ProcessModel,
        f: ScoreFn,
        empirical: &EmpiricalLaw,
    ) -> Result<Self> {
        x.validate()?;
        y.validate()?;
        let law = match x {
            ProcessModel::HomogeneousPoisson { density }
            | ProcessModel::MarkedPoisson { density, .. } => DistanceLaw::poisson(*density)?,
            ProcessModel::EquilibriumRenewal { .. } => {
                let len = empirical.points / x.density();
                let tpl = x.sample(0.0..len, empirical.seed)?;
                DistanceLaw::Empirical(GapMeasure::from_template(tpl.points(), len)?)
            }
        };
        let mut m = Self::new(y.density(), law, f)?;
        m.data_poisson = y.is_poisson();
        if let Some(marks) = y.marks() {
            m = m.with_marks(marks.clone())?;
        }
        Ok(m)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn law(&self) -> &DistanceLaw {
        &self.law
    }

    pub fn score_fn(&self) -> &ScoreFn {
        &self.f
    }

    pub fn marks(&self) -> Option<&MarkDist> {
        self.marks.as_ref()
    }

    pub fn data_is_poisson(&self) -> bool {
        self.data_poisson
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// `phi = lambda * E[f(d)] * E[Q]`.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn is_exact(&self) -> bool {
        matches!(
            self.integrator,
            Integrator::Exact(_) | Integrator::Constant(_)
        )
    }

    fn method(&self) -> &'static str {
        if self.is_exact() {
            "closed form"
        } else {
            "adaptive quadrature"
        }
    }

    /// `Lambda` without marks.
    pub fn base_cgf(&self, t: &[f64]) -> CgfValue {
        let mut v = self.integrator.eval(t, 2);
        v.scale(self.lambda);
        v
    }

    /// `Lambda`, or the compound `sum_q P(q) Lambda(q t)` when marked.
    pub fn cgf(&self, t: &[f64]) -> CgfValue {
        match &self.marks {
            None => self.base_cgf(t),
            Some(marks) => compound(self, marks, t),
        }
    }

    pub(crate) fn distance_law_expect<G>(&self, dim: usize, g: G) -> Vec<f64>
    where
        G: FnMut(f64, &mut [f64]),
    {
        let mut breaks: Vec<f64> = self.f.components().iter().flat_map(|c| c.kinks()).collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        self.law.expect_vec(&breaks, dim, g)
    }
}

fn compound(model: &RateModel, marks: &MarkDist, t: &[f64]) -> CgfValue {
    let mut out = CgfValue::zeros(t.len());
    for (q, p) in marks.iter() {
        let q = q as f64;
        let qt: Vec<f64> = t.iter().map(|x| q * x).collect();
        let base = model.base_cgf(&qt);
        out.add_scaled(&base, p, p * q, p * q * q);
    }
    out
}

/// `phi = lambda * E[f(d(0, X))]` (times `E[Q]` for marked data).
pub fn phi_mean(model: &RateModel) -> Vec<f64> {
    model.phi.clone()
}

/// `Lambda(t)` with gradient and Hessian.
pub fn cgf(model: &RateModel, t: &[f64]) -> CgfValue {
    model.cgf(t)
}

/// Compound CGF `sum_q P(q) Lambda(q t)` for an explicit mark law,
/// ignoring any marks attached to the model.
pub fn compound_cgf(model: &RateModel, marks: &MarkDist, t: f64) -> CgfValue {
    compound(model, marks, &[t])
}

/// Scalar rate `sup_{t >= 0} theta t - Lambda(t)`.
pub fn rate_star(model: &RateModel, theta: f64) -> Result<LegendreResult> {
    if model.dim() != 1 {
        return Err(invalid(
            "rate_star needs a scalar score function; use vector_rate",
        ));
    }
    if !theta.is_finite() {
        return Err(invalid(format!("threshold must be finite, got {theta}")));
    }
    Ok(solve_scalar(
        theta,
        |t| model.cgf(&[t]).scalar(),
        model.method(),
    ))
}

/// Vector rate `inf_{z >= theta} Lambda*(z)`, computed through the dual
/// and cross-checked against the primal.
pub fn vector_rate(model: &RateModel, theta: &[f64]) -> Result<LegendreResult> {
    if theta.len() != model.dim() {
        return Err(invalid(format!(
            "threshold has {} components, score function has {}",
            theta.len(),
            model.dim()
        )));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(invalid("threshold must be finite"));
    }
    Ok(solve_vector(theta, |t| model.cgf(t)))
}

#[cfg(test)]
mod tests;

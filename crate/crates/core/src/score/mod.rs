//! Score functions, template distance and the window matching score.
//!
//! A score function `f = (f_1, ..., f_n)` maps a distance `x >= 0` to `n`
//! bounded reals. Components are closed-form descriptors so that the rate
//! computations can integrate `exp(t f)` exactly; every component except
//! [`ScoreComponent::ExpDecay`] is piecewise linear in `x` (see
//! [`LinearPieces`]).

mod component;
mod pieces;

pub use component::ScoreComponent;
pub use pieces::LinearPieces;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::procgen::PointSeq;
use crate::text;

/// A bounded, possibly vector-valued score function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ScoreFn {
    components: Vec<ScoreComponent>,
    bound: f64,
}

impl ScoreFn {
    pub fn new(components: Vec<ScoreComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("score function needs at least one component"));
        }
        for c in &components {
            c.validate()?;
        }
        let mut f = Self {
            components,
            bound: 0.0,
        };
        f.bound = match f.linear_pieces() {
            Some(p) => p.sup_abs(),
            None => f
                .components
                .iter()
                .map(ScoreComponent::sup_abs)
                .fold(0.0, f64::max),
        };
        Ok(f)
    }

    pub fn scalar(component: ScoreComponent) -> Result<Self> {
        Self::new(vec![component])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScoreComponent] {
        &self.components
    }

    /// `M = max_k sup_x |f_k(x)|`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Upper bound on `sup_x f_k(x)` for each component; exact for
    /// piecewise-linear functions.
    pub fn upper_bounds(&self) -> Vec<f64> {
        match self.linear_pieces() {
            Some(p) => (0..self.dim()).map(|j| p.sup(j)).collect(),
            None => vec![self.bound; self.dim()],
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.components.len() == 1
    }

    pub fn is_continuous(&self) -> bool {
        self.components.iter().all(ScoreComponent::is_continuous)
    }

    pub fn continuity(&self) -> Vec<bool> {
        self.components
            .iter()
            .map(ScoreComponent::is_continuous)
            .collect()
    }

    /// Smallest `r` with every component constant on `[r, inf)`.
    pub fn support_radius(&self) -> f64 {
        self.components
            .iter()
            .map(ScoreComponent::support_radius)
            .fold(0.0, f64::max)
    }

    /// Points where some component jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self
            .components
            .iter()
            .flat_map(ScoreComponent::discontinuities)
            .collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.components
            .iter()
            .all(ScoreComponent::is_piecewise_linear)
    }

    /// The piecewise-linear decomposition, if every component has one.
    pub fn linear_pieces(&self) -> Option<LinearPieces> {
        LinearPieces::of(self)
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x);
        }
    }

    /// First component; the scalar case.
    #[inline]
    pub fn eval_scalar(&self, x: f64) -> f64 {
        self.components[0].eval(x)
    }

    fn parse_components(s: &str) -> Result<Vec<ScoreComponent>> {
        text::parse_seq(s)?
            .iter()
            .map(ScoreComponent::from_expr)
            .collect()
    }
}

impl fmt::Display for ScoreFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for ScoreFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let comps = Self::parse_components(s)?;
        Self::new(comps).map_err(|e| Error::Parse(e.to_string()))
    }
}

impl TryFrom<String> for ScoreFn {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScoreFn> for String {
    fn from(f: ScoreFn) -> String {
        f.to_string()
    }
}

/// A window score: `n` reals, or bottom `(-inf, ..., -inf)` for an empty
/// template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScoreValue {
    Bottom,
    Finite(Vec<f64>),
}

impl ScoreValue {
    /// `self >= theta` componentwise. Bottom meets no finite threshold.
    pub fn meets(&self, theta: &[f64]) -> bool {
        match self {
            ScoreValue::Bottom => theta.iter().all(|&t| t == f64::NEG_INFINITY),
            ScoreValue::Finite(v) => {
                v.len() == theta.len() && v.iter().zip(theta).all(|(a, b)| a >= b)
            }
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match self {
            ScoreValue::Bottom => None,
            ScoreValue::Finite(v) => Some(v),
        }
    }
}

impl PartialOrd for ScoreValue {
    /// The componentwise partial order, with bottom below everything finite.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ScoreValue::Bottom, ScoreValue::Bottom) => Some(Ordering::Equal),
            (ScoreValue::Bottom, ScoreValue::Finite(_)) => Some(Ordering::Less),
            (ScoreValue::Finite(_), ScoreValue::Bottom) => Some(Ordering::Greater),
            (ScoreValue::Finite(a), ScoreValue::Finite(b)) => {
                if a.len() != b.len() {
                    return None;
                }
                let ge = a.iter().zip(b).all(|(x, y)| x >= y);
                let le = a.iter().zip(b).all(|(x, y)| x <= y);
                match (ge, le) {
                    (true, true) => Some(Ordering::Equal),
                    (true, false) => Some(Ordering::Greater),
                    (false, true) => Some(Ordering::Less),
                    (false, false) => None,
                }
            }
        }
    }
}

/// `d(y, S) = inf |y - s|` over the sorted template; `+inf` when empty.
#[inline]
pub fn dist_to_template(y: f64, template: &[f64]) -> f64 {
    let i = template.partition_point(|&s| s < y);
    let right = template.get(i).map_or(f64::INFINITY, |&s| s - y);
    let left = if i > 0 {
        y - template[i - 1]
    } else {
        f64::INFINITY
    };
    left.min(right)
}

/// Unnormalized window sum `sum_{y in [t, t+l)} Q(y) f(d(y - t, S))`
/// written into `out`. Membership is decided on the shifted coordinate
/// `0 <= y - t < l`.
pub fn window_sum(template: &[f64], data: &PointSeq, f: &ScoreFn, l: f64, t: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let pts = data.points();
    let start = pts.partition_point(|&y| y - t < 0.0);
    let mut buf = vec![0.0; f.dim()];
    for (i, &y) in pts.iter().enumerate().skip(start) {
        let u = y - t;
        if u >= l {
            break;
        }
        let w = data.weight(i);
        f.eval_into(dist_to_template(u, template), &mut buf);
        for (o, v) in out.iter_mut().zip(&buf) {
            *o += w * v;
        }
    }
}

/// The matching score between the template `X_0^l` and the data window
/// `[t, t + l)`.
pub fn matching_score(
    template: &PointSeq,
    data: &PointSeq,
    f: &ScoreFn,
    l: f64,
    t: f64,
) -> Result<ScoreValue> {
    if !(l > 0.0) {
        return Err(invalid(format!("window length must be positive, got {l}")));
    }
    let w = data.window();
    if w.start > t || w.end < t + l {
        return Err(Error::InsufficientData {
            have_start: w.start,
            have_end: w.end,
            need_start: t,
            need_end: t + l,
        });
    }
    let tpl = template.restrict(0.0..l);
    if tpl.is_empty() {
        return Ok(ScoreValue::Bottom);
    }
    let mut sums = vec![0.0; f.dim()];
    window_sum(tpl.points(), data, f, l, t, &mut sums);
    Ok(ScoreValue::Finite(
        sums.into_iter().map(|s| s / l).collect(),
    ))
}

#[cfg(test)]
mod tests;

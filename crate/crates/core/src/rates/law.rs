//! Laws of the template distance `d(0, X)` and integration of score
//! functionals against them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::moments::{Cells, CgfValue};
use crate::error::{invalid, Result};
use crate::quad::{integrate_vec, Tolerance};
use crate::score::ScoreFn;

/// The distance law of `y` uniform over the template window, as a mixture
/// of uniforms: `density(u) = (1/l) * sum_i weight_i * 1{u < length_i}`.
///
/// For a template `x_1 < ... < x_N` on `[0, l)` the lengths are `x_1`,
/// `l - x_N` (weight 1 each) and the half gaps `(x_{i+1} - x_i) / 2`
/// (weight 2 each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapMeasure {
    total: f64,
    lengths: Vec<f64>,
    weights: Vec<f64>,
}

impl GapMeasure {
    pub fn from_template(points: &[f64], l: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("gap measure needs a nonempty template"));
        }
        let n = points.len();
        let mut pairs = Vec::with_capacity(n + 1);
        pairs.push((points[0], 1.0));
        pairs.push((l - points[n - 1], 1.0));
        for w in points.windows(2) {
            pairs.push(((w[1] - w[0]) / 2.0, 2.0));
        }
        Ok(Self::from_pairs(pairs, l))
    }

    fn from_pairs(mut pairs: Vec<(f64, f64)>, total: f64) -> Self {
        pairs.retain(|p| p.0 > 0.0);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut lengths: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            if lengths.last() == Some(&a) {
                *weights.last_mut().expect("nonempty") += w;
            } else {
                lengths.push(a);
                weights.push(w);
            }
        }
        Self {
            total,
            lengths,
            weights,
        }
    }

    /// Window length `l`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_length(&self) -> f64 {
        self.lengths.last().copied().unwrap_or(0.0)
    }

    /// `[(a, b, density)]` on which the density is constant and positive.
    fn intervals(&self) -> Vec<(f64, f64, f64)> {
        let mut remaining: f64 = self.weights.iter().sum();
        let mut out = Vec::with_capacity(self.lengths.len());
        let mut prev = 0.0;
        for (&a, &w) in self.lengths.iter().zip(&self.weights) {
            out.push((prev, a, remaining / self.total));
            remaining -= w;
            prev = a;
        }
        out
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mass: f64 = self
            .lengths
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| a * w)
            .sum();
        let mut u = rng.gen::<f64>() * mass;
        for (&a, &w) in self.lengths.iter().zip(&self.weights) {
            if u < a * w {
                return rng.gen::<f64>() * a;
            }
            u -= a * w;
        }
        rng.gen::<f64>() * self.max_length()
    }
}

/// Law of `d(0, X)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DistanceLaw {
    /// Exponential with the given rate; `2 * rho` for a Poisson template of
    /// density `rho`.
    Exponential { rate: f64 },
    /// Empirical law from a long realized template.
    Empirical(GapMeasure),
}

impl DistanceLaw {
    pub fn poisson(template_density: f64) -> Result<Self> {
        if !(template_density > 0.0 && template_density.is_finite()) {
            return Err(invalid(format!(
                "template density must be positive and finite, got {template_density}"
            )));
        }
        Ok(Self::Exponential {
            rate: 2.0 * template_density,
        })
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { rate } => -(1.0 - rng.gen::<f64>()).ln() / rate,
            Self::Empirical(g) => g.sample(rng),
        }
    }

    /// `E[g(d)]` for a `dim`-vector functional, splitting at `breaks`.
    pub(crate) fn expect_vec<G>(&self, breaks: &[f64], dim: usize, mut g: G) -> Vec<f64>
    where
        G: FnMut(f64, &mut [f64]),
    {
        let tol = Tolerance {
            abs: 1e-13,
            rel: 1e-12,
        };
        let mut acc = vec![0.0; dim];
        let mut part = vec![0.0; dim];
        for (a, b, dens) in self.panels(breaks, None) {
            match self {
                Self::Exponential { rate } => integrate_vec(
                    |u, o| {
                        g(u, o);
                        let w = rate * (-rate * u).exp();
                        o.iter_mut().for_each(|v| *v *= w);
                    },
                    a,
                    b,
                    tol,
                    &mut part,
                ),
                Self::Empirical(_) => integrate_vec(
                    |u, o| {
                        g(u, o);
                        o.iter_mut().for_each(|v| *v *= dens);
                    },
                    a,
                    b,
                    tol,
                    &mut part,
                ),
            };
            for (x, p) in acc.iter_mut().zip(&part) {
                *x += p;
            }
        }
        acc
    }

    /// Integration panels `(a, b, density)`; the density entry is only
    /// meaningful for the empirical law. The exponential law is truncated
    /// where its remaining mass, inflated by `growth`, drops below `e^-40`.
    fn panels(&self, breaks: &[f64], growth: Option<f64>) -> Vec<(f64, f64, f64)> {
        match self {
            Self::Exponential { rate } => {
                let end = (40.0 + growth.unwrap_or(0.0)) / rate;
                let mut pts: Vec<f64> = std::iter::once(0.0)
                    .chain(breaks.iter().copied().filter(|&b| b > 0.0 && b < end))
                    .chain(std::iter::once(end))
                    .collect();
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                pts.windows(2).map(|w| (w[0], w[1], 0.0)).collect()
            }
            Self::Empirical(g) => {
                let mut out = Vec::new();
                for (a, b, d) in g.intervals() {
                    let mut lo = a;
                    for &k in breaks.iter().filter(|&&k| k > a && k < b) {
                        out.push((lo, k, d));
                        lo = k;
                    }
                    out.push((lo, b, d));
                }
                out
            }
        }
    }
}

/// Evaluates `E[e^{<t, f(d)>} - 1]` with gradient and Hessian in `t`.
#[derive(Debug, Clone)]
pub(crate) enum Integrator {
    /// `f` does not depend on the distance, whatever its law.
    Constant(Vec<f64>),
    Exact(Cells),
    Quadrature {
        law: DistanceLaw,
        f: ScoreFn,
        breaks: Vec<f64>,
    },
}

impl Integrator {
    pub fn new(law: &DistanceLaw, f: &ScoreFn) -> Self {
        match f.linear_pieces() {
            Some(p) => match p.constant() {
                Some(c) => Self::Constant(c),
                None => Self::Exact(exact_cells(law, &p)),
            },
            None => {
                let mut breaks: Vec<f64> = f
                    .components()
                    .iter()
                    .flat_map(|c| c.kinks())
                    .filter(|k| *k > 0.0)
                    .collect();
                breaks.sort_by(f64::total_cmp);
                breaks.dedup();
                Self::Quadrature {
                    law: law.clone(),
                    f: f.clone(),
                    breaks,
                }
            }
        }
    }

    pub fn eval(&self, t: &[f64], order: u8) -> CgfValue {
        match self {
            Self::Constant(c) => {
                let n = c.len();
                let g: f64 = t.iter().zip(c).map(|(a, b)| a * b).sum();
                let e = g.exp();
                let mut out = CgfValue::zeros(n);
                out.value = g.exp_m1();
                if order >= 1 {
                    for (g, ci) in out.grad.iter_mut().zip(c) {
                        *g = ci * e;
                    }
                }
                if order >= 2 {
                    for i in 0..n {
                        for j in 0..n {
                            out.hess[i * n + j] = c[i] * c[j] * e;
                        }
                    }
                }
                out
            }
            Self::Exact(cells) => cells.eval(t, order),
            Self::Quadrature { law, f, breaks } => {
                let n = f.dim();
                let growth = t.iter().map(|x| x.abs()).sum::<f64>() * f.bound() * 2.0;
                let width = 1 + n + n * n;
                let mut acc = vec![0.0; width];
                let mut part = vec![0.0; width];
                let mut fx = vec![0.0; n];
                let tol = Tolerance {
                    abs: 1e-14,
                    rel: 1e-12,
                };
                let mut integrand = |u: f64, o: &mut [f64], w: f64| {
                    f.eval_into(u, &mut fx);
                    let g: f64 = t.iter().zip(&fx).map(|(a, b)| a * b).sum();
                    let e = g.exp();
                    o[0] = w * g.exp_m1();
                    for j in 0..n {
                        o[1 + j] = w * fx[j] * e;
                        for k in 0..n {
                            o[1 + n + j * n + k] = w * fx[j] * fx[k] * e;
                        }
                    }
                };
                for (a, b, dens) in law.panels(breaks, Some(growth)) {
                    match law {
                        DistanceLaw::Exponential { rate } => integrate_vec(
                            |u, o| integrand(u, o, rate * (-rate * u).exp()),
                            a,
                            b,
                            tol,
                            &mut part,
                        ),
                        DistanceLaw::Empirical(_) => {
                            integrate_vec(|u, o| integrand(u, o, dens), a, b, tol, &mut part)
                        }
                    };
                    for (x, p) in acc.iter_mut().zip(&part) {
                        *x += p;
                    }
                }
                CgfValue {
                    value: acc[0],
                    grad: acc[1..1 + n].to_vec(),
                    hess: acc[1 + n..].to_vec(),
                }
            }
        }
    }
}

fn exact_cells(law: &DistanceLaw, p: &crate::score::LinearPieces) -> Cells {
    let n = p.dim();
    let mut cells = Cells::new(n);
    let breaks = p.breaks();
    let last = breaks[breaks.len() - 1];
    let mut s = vec![0.0; n];
    let mut e = vec![0.0; n];
    match law {
        DistanceLaw::Exponential { rate } => {
            for k in 0..p.segments() {
                let h = breaks[k + 1] - breaks[k];
                for j in 0..n {
                    s[j] = p.start(k, j);
                    e[j] = p.end(k, j);
                }
                cells.push(h, rate.ln() - rate * breaks[k], -rate * h, &s, &e);
            }
            cells.tail_mass = (-rate * last).exp();
        }
        DistanceLaw::Empirical(g) => {
            let mut seg = 0;
            for (a, b, dens) in g.intervals() {
                if a >= last {
                    break;
                }
                let b = b.min(last);
                // Split [a, b] at the piece breakpoints.
                let mut lo = a;
                while lo < b {
                    while breaks[seg + 1] <= lo {
                        seg += 1;
                    }
                    let hi = b.min(breaks[seg + 1]);
                    for j in 0..n {
                        s[j] = if lo == breaks[seg] {
                            p.start(seg, j)
                        } else {
                            p.interp(seg, j, lo)
                        };
                        e[j] = if hi == breaks[seg + 1] {
                            p.end(seg, j)
                        } else {
                            p.interp(seg, j, hi)
                        };
                    }
                    cells.push(hi - lo, dens.ln(), 0.0, &s, &e);
                    lo = hi;
                }
            }
            cells.tail_mass = g
                .lengths()
                .iter()
                .zip(g.weights())
                .map(|(a, w)| w * (a - last).max(0.0))
                .sum::<f64>()
                / g.total();
        }
    }
    for j in 0..n {
        cells.tail[j] = p.tail(j);
    }
    cells
}

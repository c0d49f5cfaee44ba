//! Fluctuations of the template-conditional rate around the model rate.
//!
//! For a Poisson(`rho`) template on `[0, l)`,
//! `S = sqrt(l) (theta t0 - Lambda_{S,l}(t0) - Lambda*(theta))` is
//! asymptotically normal with variance `4 rho sigma2` (scaled by
//! `lambda^2` for data density `lambda`), where with `U ~ Exp(1)`,
//! `x = U / (2 rho)`, `g = exp(t0 f)` and `G(x) = int_0^x g`:
//! `sigma2 = Var[G(x) - c U] + (E[G(x) - g(x) x])^2`, `c = E[g(x) x]`.

use std::io::{self, Write};

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::procgen::sample_poisson;
use crate::quad::{integrate, Tolerance};
use crate::rates::{rate_star, EmpiricalCgf, RateModel, SolveStatus};
use crate::rng::{domain, RngSeed};
use crate::score::ScoreFn;
use crate::stats;

const REL_TOL: f64 = 1e-8;
const MC_BATCHES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Method {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sigma2Result {
    pub t0: f64,
    pub sigma2: f64,
    /// `4 rho sigma2`.
    pub target_variance: f64,
    /// `E[g(x) x]`.
    pub c_const: f64,
    pub method: Sigma2Method,
    /// Relative tolerance for quadrature; standard error for Monte Carlo.
    pub tolerance: f64,
}

/// `x -> int_0^x exp(t0 f(u)) du`, closed form on linear pieces and
/// quadrature otherwise.
struct Antiderivative<'a> {
    f: &'a ScoreFn,
    t0: f64,
    nodes: Vec<f64>,
    cum: Vec<f64>,
    /// `(value at node, slope)` per node interval when `f` is piecewise
    /// linear; the last entry is the constant tail.
    linear: Option<Vec<(f64, f64)>>,
}

impl<'a> Antiderivative<'a> {
    fn new(f: &'a ScoreFn, t0: f64, reach: f64) -> Self {
        let mut a = Self {
            f,
            t0,
            nodes: vec![0.0],
            cum: vec![0.0],
            linear: None,
        };
        if let Some(p) = f.linear_pieces() {
            let b = p.breaks();
            let mut lin = Vec::new();
            for k in 0..p.segments() {
                let h = b[k + 1] - b[k];
                lin.push((p.start(k, 0), (p.end(k, 0) - p.start(k, 0)) / h));
                a.nodes.push(b[k + 1]);
            }
            lin.push((p.tail(0), 0.0));
            a.linear = Some(lin);
            for k in 0..a.nodes.len() - 1 {
                let c = a.cum[k] + a.piece(k, a.nodes[k + 1]);
                a.cum.push(c);
            }
        } else {
            let mut nodes: Vec<f64> = f
                .components()
                .iter()
                .flat_map(|c| c.kinks())
                .filter(|k| *k > 0.0 && *k < reach)
                .chain((1..=64).map(|i| reach * i as f64 / 64.0))
                .collect();
            nodes.sort_by(f64::total_cmp);
            nodes.dedup();
            a.nodes.extend(nodes);
            for k in 0..a.nodes.len() - 1 {
                let c = a.cum[k] + a.quad(a.nodes[k], a.nodes[k + 1]);
                a.cum.push(c);
            }
        }
        a
    }

    fn g(&self, x: f64) -> f64 {
        (self.t0 * self.f.eval_scalar(x)).exp()
    }

    fn quad(&self, a: f64, b: f64) -> f64 {
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-13,
        };
        integrate(|u| self.g(u), a, b, tol).0
    }

    /// Integral from node `k` to `x` on linear piece `k`.
    fn piece(&self, k: usize, x: f64) -> f64 {
        let (s, m) = self.linear.as_ref().expect("linear")[k];
        let h = x - self.nodes[k];
        let z = self.t0 * m * h;
        let ratio = if z == 0.0 { 1.0 } else { z.exp_m1() / z };
        (self.t0 * s).exp() * h * ratio
    }

    fn eval(&self, x: f64) -> f64 {
        let k = self.nodes.partition_point(|&n| n <= x).saturating_sub(1);
        match self.linear {
            Some(_) => self.cum[k] + self.piece(k, x),
            None => self.cum[k] + self.quad(self.nodes[k], x),
        }
    }

    fn last(&self) -> f64 {
        *self.nodes.last().expect("nonempty")
    }
}

fn check_f(f: &ScoreFn, rho: f64) -> Result<Option<Vec<f64>>> {
    if !f.is_scalar() {
        return Err(invalid(
            "the fluctuation variance needs a scalar score function",
        ));
    }
    if !f.is_continuous() {
        return Err(Error::PreconditionViolation(format!(
            "the fluctuation variance needs a continuous score function, got {f}"
        )));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(invalid(format!(
            "template density must be positive, got {rho}"
        )));
    }
    Ok(f.linear_pieces().and_then(|p| p.constant()))
}

fn zero(t0: f64, method: Sigma2Method) -> Sigma2Result {
    Sigma2Result {
        t0,
        sigma2: 0.0,
        target_variance: 0.0,
        c_const: 0.0,
        method,
        tolerance: 0.0,
    }
}

/// Distance beyond which the exponential weight is negligible.
fn reach(f: &ScoreFn, r: f64) -> f64 {
    let radius = f.support_radius();
    if radius.is_finite() {
        radius.max(1.0 / r)
    } else {
        50.0 / r
    }
}

/// `sigma2` by one-dimensional quadrature. With `r = 2 rho`,
/// `E[G(x)] = int g e^{-r y}`, `c = r int g y e^{-r y}`,
/// `E[G(x)^2] = 2 int g G e^{-r y}` and `E[G(x) U] = c + E[G(x)]`, so
/// `sigma2 = E[G^2] - 2 c E[G]`.
pub fn sigma2(f: &ScoreFn, t0: f64, rho: f64) -> Result<Sigma2Result> {
    if check_f(f, rho)?.is_some() {
        // g is constant, so G(x) = c U and both terms vanish.
        return Ok(zero(t0, Sigma2Method::Quadrature));
    }
    let r = 2.0 * rho;
    let big_g = Antiderivative::new(f, t0, reach(f, r));
    let tol = Tolerance {
        abs: 0.0,
        rel: 1e-13,
    };
    let (mut a1, mut c, mut a2) = (0.0, 0.0, 0.0);
    for w in big_g.nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        a1 += integrate(|y| big_g.g(y) * (-r * y).exp(), lo, hi, tol).0;
        c += r * integrate(|y| big_g.g(y) * y * (-r * y).exp(), lo, hi, tol).0;
        a2 += 2.0 * integrate(|y| big_g.g(y) * big_g.eval(y) * (-r * y).exp(), lo, hi, tol).0;
    }
    // Beyond the last node g is (numerically) constant.
    let end = big_g.last();
    let g_end = big_g.g(end);
    let decay = (-r * end).exp();
    a1 += g_end * decay / r;
    c += g_end * decay * (end + 1.0 / r);
    a2 += 2.0 * g_end * decay * (big_g.eval(end) / r + g_end / (r * r));
    let s2 = (a2 - 2.0 * c * a1).max(0.0);
    Ok(Sigma2Result {
        t0,
        sigma2: s2,
        target_variance: 4.0 * rho * s2,
        c_const: c,
        method: Sigma2Method::Quadrature,
        tolerance: REL_TOL,
    })
}

/// `sigma2` from `n` draws of `U`, straight from its definition; the
/// reported tolerance is a batch-means standard error.
pub fn sigma2_monte_carlo(
    f: &ScoreFn,
    t0: f64,
    rho: f64,
    n: u64,
    seed: RngSeed,
) -> Result<Sigma2Result> {
    if check_f(f, rho)?.is_some() {
        return Ok(zero(t0, Sigma2Method::MonteCarlo));
    }
    if n < 2 * MC_BATCHES {
        return Err(invalid(format!(
            "need at least {} draws, got {n}",
            2 * MC_BATCHES
        )));
    }
    let r = 2.0 * rho;
    let big_g = Antiderivative::new(f, t0, reach(f, r));
    let end = big_g.last();
    let g_end = big_g.g(end);
    let g_of = |x: f64| {
        if x <= end {
            big_g.eval(x)
        } else {
            big_g.eval(end) + g_end * (x - end)
        }
    };
    let per = n / MC_BATCHES;
    // Per batch: sums of g x, G, G^2, G U, U, U^2.
    let sums: Vec<[f64; 6]> = (0..MC_BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed.child(b).rng();
            let mut s = [0.0; 6];
            for _ in 0..per {
                let u: f64 = Exp1.sample(&mut rng);
                let x = u / r;
                let gx = big_g.g(x);
                let gg = g_of(x);
                s[0] += gx * x;
                s[1] += gg;
                s[2] += gg * gg;
                s[3] += gg * u;
                s[4] += u;
                s[5] += u * u;
            }
            s
        })
        .collect();
    let estimate = |s: &[f64; 6], m: f64| {
        let c = s[0] / m;
        let (eg, eg2, egu, eu, eu2) = (s[1] / m, s[2] / m, s[3] / m, s[4] / m, s[5] / m);
        let var = (eg2 - eg * eg) - 2.0 * c * (egu - eg * eu) + c * c * (eu2 - eu * eu);
        let d = eg - c;
        (var + d * d, c)
    };
    let mut total = [0.0; 6];
    for s in &sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    let m = (per * MC_BATCHES) as f64;
    let (s2, c) = estimate(&total, m);
    let batch: Vec<f64> = sums.iter().map(|s| estimate(s, per as f64).0).collect();
    Ok(Sigma2Result {
        t0,
        sigma2: s2,
        target_variance: 4.0 * rho * s2,
        c_const: c,
        method: Sigma2Method::MonteCarlo,
        tolerance: stats::std_err(&batch),
    })
}

/// Kolmogorov-Smirnov distance between the sample and Normal(`mean`,
/// `variance`). A zero variance is a point mass.
pub fn ks_statistic(samples: &[f64], mean: f64, variance: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("no samples"));
    }
    if !(variance >= 0.0) || !mean.is_finite() {
        return Err(Error::InvalidReference(format!(
            "Normal({mean}, {variance})"
        )));
    }
    if variance == 0.0 {
        return if samples.iter().all(|&x| x == mean) {
            Ok(0.0)
        } else {
            Err(Error::InvalidReference(
                "zero-variance reference against non-degenerate samples".into(),
            ))
        };
    }
    let normal =
        Normal::new(mean, variance.sqrt()).map_err(|e| Error::InvalidReference(e.to_string()))?;
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = normal.cdf(x);
        d = d.max((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n);
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CltSample {
    pub replicate: u32,
    /// `sqrt(l) (theta t0 - Lambda_{S,l}(t0) - Lambda*(theta))`.
    pub s: f64,
    /// `sqrt(l) (Lambda*_{S,l}(theta) - [theta t0 - Lambda_{S,l}(t0)])`,
    /// nonnegative since the conditional rate is a supremum.
    pub gap: f64,
    pub t_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltSummary {
    pub l: f64,
    pub t0: f64,
    pub rate: f64,
    pub sigma2: Sigma2Result,
    /// `lambda^2 * 4 rho sigma2`.
    pub target_variance: f64,
    pub mean: f64,
    pub variance: f64,
    pub variance_ratio: f64,
    pub ks: Option<f64>,
    pub median_gap: f64,
    pub n_failed: usize,
    pub samples: Vec<CltSample>,
}

impl CltSummary {
    /// Columns `replicate, S_i, gap_i, t_star_i`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "replicate,s,gap,t_star")?;
        for s in &self.samples {
            writeln!(out, "{},{},{},{}", s.replicate, s.s, s.gap, s.t_star)?;
        }
        Ok(())
    }
}

/// Samples `S` over fresh Poisson templates of length `l`.
pub fn clt_experiment(
    rho: f64,
    lambda: f64,
    f: &ScoreFn,
    theta: f64,
    l: f64,
    replicates: u32,
    seed: u64,
) -> Result<CltSummary> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(invalid(format!("window length must be positive, got {l}")));
    }
    let model = RateModel::poisson(rho, lambda, f.clone())?;
    check_f(f, rho)?;
    let phi = model.phi()[0];
    if !(theta > phi) {
        return Err(Error::PreconditionViolation(format!(
            "threshold {theta} is not above the mean score {phi}"
        )));
    }
    let sol = rate_star(&model, theta)?;
    if sol.status != SolveStatus::Converged {
        return Err(Error::SolverFailure(
            sol.detail.unwrap_or_else(|| "model rate".into()),
        ));
    }
    let t0 = sol.t();
    let rate = sol.rate;
    let s2 = sigma2(f, t0, rho)?;
    let target = lambda * lambda * s2.target_variance;
    let root = l.sqrt();

    let results: Vec<Option<CltSample>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let seed = RngSeed::derive(seed, domain::CLT_TEMPLATE, &[l.to_bits(), u64::from(i)]);
            let tpl = sample_poisson(rho, 0.0..l, seed)?;
            let cgf = EmpiricalCgf::build(&tpl, lambda, f)?;
            let v = cgf.eval(t0).0;
            let at_t0 = theta * t0 - v;
            let emp = cgf.rate_star(theta);
            if emp.status == SolveStatus::Failed {
                return Ok(None);
            }
            Ok(Some(CltSample {
                replicate: i,
                s: root * (at_t0 - rate),
                gap: root * (emp.rate - at_t0),
                t_star: emp.t(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_failed = results.iter().filter(|r| r.is_none()).count();
    let samples: Vec<CltSample> = results.into_iter().flatten().collect();
    let s: Vec<f64> = samples.iter().map(|x| x.s).collect();
    let gaps: Vec<f64> = samples.iter().map(|x| x.gap).collect();
    let mean = stats::mean(&s);
    let variance = stats::variance(&s);
    let ks = if s.is_empty() {
        None
    } else {
        ks_statistic(&s, 0.0, target).ok()
    };
    Ok(CltSummary {
        l,
        t0,
        rate,
        sigma2: s2,
        target_variance: target,
        mean,
        variance,
        variance_ratio: variance / target,
        ks,
        median_gap: stats::median(&gaps),
        n_failed,
        samples,
    })
}

//! Probability that a single window already matches,
//! `p_l = Pr{score(S, Y on [0, l)) >= theta}`, for a fixed template and
//! Poisson data, by exponential tilting and by brute force.
//!
//! The tilted data law is Poisson with intensity `lambda * exp(t* g(y))`,
//! `g(y) = f(d(y, S))`, where `t*` solves the conditional Legendre problem.
//! Its likelihood ratio against the original law is
//! `exp(l * Lambda_{S,l}(t*) - t* T)` with `T = sum_y g(y)`.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::procgen::{thin, PointSeq, ProcessModel};
use crate::rates::{EmpiricalCgf, SolveStatus};
use crate::rng::{domain, RngSeed};
use crate::score::{dist_to_template, ScoreFn};
use crate::stats;

const BATCH: usize = 4096;

/// The tilted data law for one template.
#[derive(Debug, Clone)]
pub struct TiltedSampler {
    template: PointSeq,
    f: ScoreFn,
    pub t_star: f64,
    pub lambda: f64,
    pub l: f64,
    /// `lambda * exp(t* sup f)`, the thinning proposal density.
    pub envelope: f64,
    /// `int_0^l lambda exp(t* g(y)) dy = l (Lambda_{S,l}(t*) + lambda)`.
    pub k: f64,
    /// `l * Lambda_{S,l}(t*)`.
    log_norm: f64,
}

impl TiltedSampler {
    pub fn new(
        template: &PointSeq,
        f: &ScoreFn,
        lambda: f64,
        t_star: f64,
        cgf: &EmpiricalCgf,
    ) -> Self {
        let l = cgf.l;
        let value = cgf.eval(t_star).0;
        Self {
            template: template.clone(),
            f: f.clone(),
            t_star,
            lambda,
            l,
            envelope: lambda * (t_star * f.upper_bounds()[0]).exp(),
            k: l * (value + lambda),
            log_norm: l * value,
        }
    }

    pub fn intensity(&self, y: f64) -> f64 {
        self.lambda * (self.t_star * self.g(y)).exp()
    }

    fn g(&self, y: f64) -> f64 {
        self.f
            .eval_scalar(dist_to_template(y, self.template.points()))
    }

    /// One tilted realization reduced to `T = sum_y g(y)`.
    pub fn sample_sum(&self, seed: RngSeed) -> Result<f64> {
        let mut rng = seed.rng();
        self.sum_with(&mut rng)
    }

    fn sum_with<R: Rng>(&self, rng: &mut R) -> Result<f64> {
        let mut total = 0.0;
        thin(
            self.envelope,
            &(0.0..self.l),
            rng,
            |y| {
                let g = self.g(y);
                Ok((self.lambda * (self.t_star * g).exp(), g))
            },
            |_, g| total += g,
        )?;
        Ok(total)
    }

    /// `log` of the likelihood ratio for a realization with sum `total`.
    pub fn log_weight(&self, total: f64) -> f64 {
        self.log_norm - self.t_star * total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsEstimate {
    pub p_hat: f64,
    pub log_p_hat: f64,
    pub stderr: f64,
    /// `stderr / p_hat`, computed without underflow.
    pub relative_error: f64,
    pub n_samples: u64,
    /// Fraction of samples meeting the threshold.
    pub hit_fraction: f64,
    /// Largest weight among hits (1 for plain Monte Carlo hits).
    pub max_weight: f64,
    pub t_star: f64,
    /// `Lambda*_{S,l}(theta)`; absent for plain Monte Carlo.
    pub rate_empirical: Option<f64>,
    pub warnings: Vec<String>,
}

fn check_args(
    template: &PointSeq,
    f: &ScoreFn,
    theta: f64,
    l: f64,
    lambda: f64,
) -> Result<PointSeq> {
    if !f.is_scalar() {
        return Err(invalid("rare-event estimates need a scalar score function"));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(invalid(format!("window length must be positive, got {l}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!(
            "data density must be positive, got {lambda}"
        )));
    }
    if !theta.is_finite() {
        return Err(invalid(format!("threshold must be finite, got {theta}")));
    }
    let tpl = template.restrict(0.0..l);
    if tpl.is_empty() {
        return Err(Error::PreconditionViolation(
            "the template has no points in [0, l)".into(),
        ));
    }
    Ok(tpl)
}

/// Importance-sampling estimate of `p_l` under the tilted law.
pub fn is_estimate(
    template: &PointSeq,
    f: &ScoreFn,
    theta: f64,
    l: f64,
    lambda: f64,
    n_samples: u64,
    seed: RngSeed,
) -> Result<IsEstimate> {
    let tpl = check_args(template, f, theta, l, lambda)?;
    let cgf = EmpiricalCgf::build(&tpl, lambda, f)?;
    let sol = cgf.rate_star(theta);
    let mut warnings = Vec::new();
    match sol.status {
        SolveStatus::Converged => {}
        SolveStatus::AtBoundary => warnings.push(format!(
            "threshold {theta} is not above the conditional mean score; zero tilt reduces to plain Monte Carlo"
        )),
        SolveStatus::Failed => {
            return Err(Error::SolverFailure(sol.detail.unwrap_or_else(|| "conditional rate".into())))
        }
    }
    let sampler = TiltedSampler::new(&tpl, f, lambda, sol.t(), &cgf);
    let target = l * theta;
    let bound = sampler.log_norm - sampler.t_star * target;

    let batches = n_samples.div_ceil(BATCH as u64);
    let per_batch = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed.child(b).rng();
            let count = (n_samples - b * BATCH as u64).min(BATCH as u64);
            let mut logs = Vec::new();
            for _ in 0..count {
                let total = sampler.sum_with(&mut rng)?;
                if total >= target {
                    let lw = sampler.log_weight(total);
                    assert!(lw <= bound, "hit weight exp({lw}) above exp({bound})");
                    logs.push(lw);
                }
            }
            Ok(logs)
        })
        .collect::<Result<Vec<_>>>()?;
    let logs: Vec<f64> = per_batch.into_iter().flatten().collect();
    let mut est = weighted_mean(&logs, n_samples);
    est.t_star = sampler.t_star;
    est.rate_empirical = Some(sol.rate);
    est.warnings = warnings;
    Ok(est)
}

/// Mean and standard error of `n` weights, of which only the nonzero ones
/// are given, by their logs.
fn weighted_mean(logs: &[f64], n: u64) -> IsEstimate {
    let nf = n as f64;
    let base = IsEstimate {
        p_hat: 0.0,
        log_p_hat: f64::NEG_INFINITY,
        stderr: 0.0,
        relative_error: f64::NAN,
        n_samples: n,
        hit_fraction: if n == 0 {
            f64::NAN
        } else {
            logs.len() as f64 / nf
        },
        max_weight: 0.0,
        t_star: 0.0,
        rate_empirical: None,
        warnings: Vec::new(),
    };
    if logs.is_empty() {
        return base;
    }
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s1: f64 = logs.iter().map(|x| (x - m).exp()).sum();
    let s2: f64 = logs.iter().map(|x| (2.0 * (x - m)).exp()).sum();
    let mean = s1 / nf;
    let var = if n > 1 {
        ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    let se = (var / nf).sqrt();
    IsEstimate {
        p_hat: m.exp() * mean,
        log_p_hat: m + mean.ln(),
        stderr: m.exp() * se,
        relative_error: se / mean,
        max_weight: m.exp(),
        ..base
    }
}

/// Plain Monte Carlo: the hit fraction over `n_samples` Poisson(`lambda`)
/// windows.
pub fn naive_mc_estimate(
    template: &PointSeq,
    f: &ScoreFn,
    theta: f64,
    l: f64,
    lambda: f64,
    n_samples: u64,
    seed: RngSeed,
) -> Result<IsEstimate> {
    let tpl = check_args(template, f, theta, l, lambda)?;
    let pts = tpl.points();
    let target = l * theta;
    let gaps = Exp::new(lambda).map_err(|e| invalid(e.to_string()))?;
    let batches = n_samples.div_ceil(BATCH as u64);
    let hits: u64 = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed.child(b).rng();
            let count = (n_samples - b * BATCH as u64).min(BATCH as u64);
            let mut hits = 0u64;
            for _ in 0..count {
                let mut y = gaps.sample(&mut rng);
                let mut total = 0.0;
                while y < l {
                    total += f.eval_scalar(dist_to_template(y, pts));
                    y += gaps.sample(&mut rng);
                }
                hits += u64::from(total >= target);
            }
            hits
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let nf = n_samples as f64;
    let p = if n_samples == 0 {
        f64::NAN
    } else {
        hits as f64 / nf
    };
    let se = (p * (1.0 - p) / nf).sqrt();
    Ok(IsEstimate {
        p_hat: p,
        log_p_hat: p.ln(),
        stderr: se,
        relative_error: se / p,
        n_samples,
        hit_fraction: p,
        max_weight: if hits > 0 { 1.0 } else { 0.0 },
        t_star: 0.0,
        rate_empirical: None,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    pub l: f64,
    pub replicate: u32,
    /// `(-log p_hat - l Lambda*_{S,l}(theta)) / sqrt(l)`.
    pub delta: f64,
    pub estimate: IsEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSummary {
    pub l: f64,
    pub median_abs_delta: f64,
    pub mean_delta: f64,
    pub sd_delta: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationTable {
    pub rows: Vec<DeviationRow>,
    pub summary: Vec<DeviationSummary>,
}

impl DeviationTable {
    /// Columns `l, p_hat, log_p_hat, stderr, n, hit_fraction, t_star,
    /// rate_empirical`, plus the replicate and deviation.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "l,replicate,p_hat,log_p_hat,stderr,n,hit_fraction,t_star,rate_empirical,delta"
        )?;
        for r in &self.rows {
            let e = &r.estimate;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.l,
                r.replicate,
                e.p_hat,
                e.log_p_hat,
                e.stderr,
                e.n_samples,
                e.hit_fraction,
                e.t_star,
                e.rate_empirical.map(|v| v.to_string()).unwrap_or_default(),
                r.delta
            )?;
        }
        Ok(())
    }
}

/// The template used for window length `l` (position `l_index` in the
/// list) and replicate `r`.
pub fn deviation_template(
    x_model: &ProcessModel,
    l: f64,
    l_index: usize,
    r: u32,
    seed: u64,
) -> Result<PointSeq> {
    x_model.sample(
        0.0..l,
        RngSeed::derive(seed, domain::RARE_TEMPLATE, &[l_index as u64, u64::from(r)]),
    )
}

/// Normalized gap between the estimated `-log p_l` and its leading term
/// `l Lambda*_{S,l}(theta)`, over fresh templates for each `l`.
#[allow(clippy::too_many_arguments)]
pub fn log_probability_deviation(
    x_model: &ProcessModel,
    lambda: f64,
    f: &ScoreFn,
    theta: f64,
    l_list: &[f64],
    n_samples: u64,
    replicates: u32,
    seed: u64,
) -> Result<DeviationTable> {
    x_model.validate()?;
    let jobs: Vec<(usize, u32)> = (0..l_list.len())
        .flat_map(|i| (0..replicates).map(move |r| (i, r)))
        .collect();
    let rows = jobs
        .iter()
        .map(|&(i, r)| {
            let l = l_list[i];
            let coords = [i as u64, u64::from(r)];
            let tpl = deviation_template(x_model, l, i, r, seed)?;
            let est = is_estimate(
                &tpl,
                f,
                theta,
                l,
                lambda,
                n_samples,
                RngSeed::derive(seed, domain::RARE_TILTED, &coords),
            )?;
            let rate = est.rate_empirical.unwrap_or(0.0);
            Ok(DeviationRow {
                l,
                replicate: r,
                delta: (-est.log_p_hat - l * rate) / l.sqrt(),
                estimate: est,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = l_list
        .iter()
        .map(|&l| {
            let d: Vec<f64> = rows.iter().filter(|r| r.l == l).map(|r| r.delta).collect();
            let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
            DeviationSummary {
                l,
                median_abs_delta: stats::median(&abs),
                mean_delta: stats::mean(&d),
                sd_delta: stats::variance(&d).sqrt(),
                replicates: d.len(),
            }
        })
        .collect();
    Ok(DeviationTable { rows, summary })
}

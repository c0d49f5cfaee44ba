use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{waiting_time, WaitMode, WaitStatus, WaitingTimeQuery};
use crate::error::{invalid, Error, Result};
use crate::procgen::ProcessModel;
use crate::rates::{rate_star, vector_rate, EmpiricalLaw, RateModel};
use crate::rng::{domain, RngSeed};
use crate::score::ScoreFn;
use crate::stats;

/// Scan horizon per window length: `c * exp(l * rate)`, where `rate` is the
/// model rate for the configured processes, optionally capped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonRule {
    pub c: f64,
    pub cap: Option<f64>,
}

impl Default for HorizonRule {
    fn default() -> Self {
        Self { c: 50.0, cap: None }
    }
}

impl HorizonRule {
    pub fn horizon(&self, l: f64, rate: f64) -> f64 {
        let h = self.c * (l * rate).exp();
        match self.cap {
            Some(cap) => h.min(cap),
            None => h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    pub x_model: ProcessModel,
    pub y_model: ProcessModel,
    pub f: ScoreFn,
    pub theta: Vec<f64>,
    pub l_list: Vec<f64>,
    pub replicates: u32,
    pub mode: WaitMode,
    pub horizon: HorizonRule,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderRow {
    pub l: f64,
    pub replicate: u32,
    pub status: WaitStatus,
    pub w: Option<f64>,
    /// `log max(w, 1)`.
    pub log_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderSummary {
    pub l: f64,
    pub horizon: f64,
    pub n_hit: usize,
    pub n_censored: usize,
    /// Mean of `log max(w, 1)` over hits; `None` when nothing hit.
    pub mean_log_w: Option<f64>,
    pub se: Option<f64>,
}

impl LadderSummary {
    pub fn censored_fraction(&self) -> f64 {
        let n = self.n_hit + self.n_censored;
        if n == 0 {
            0.0
        } else {
            self.n_censored as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderResult {
    /// The model rate the slope estimates.
    pub rate: f64,
    pub rows: Vec<LadderRow>,
    pub summary: Vec<LadderSummary>,
    /// Least-squares slope of mean log waiting time against `l`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub warnings: Vec<String>,
}

impl LadderResult {
    pub fn censored_fraction(&self) -> f64 {
        let c: usize = self.summary.iter().map(|s| s.n_censored).sum();
        let n: usize = self.summary.iter().map(|s| s.n_censored + s.n_hit).sum();
        if n == 0 {
            0.0
        } else {
            c as f64 / n as f64
        }
    }

    /// Columns `l, replicate, status, w, log_w`.
    pub fn write_rows_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "l,replicate,status,w,log_w")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.l,
                r.replicate,
                status_name(r.status),
                opt(r.w),
                opt(r.log_w)
            )?;
        }
        Ok(())
    }

    /// Columns `l, mean_log_w, se, n_censored`.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "l,mean_log_w,se,n_censored")?;
        for s in &self.summary {
            writeln!(
                out,
                "{},{},{},{}",
                s.l,
                opt(s.mean_log_w),
                opt(s.se),
                s.n_censored
            )?;
        }
        Ok(())
    }
}

pub(crate) fn status_name(s: WaitStatus) -> &'static str {
    match s {
        WaitStatus::Hit => "hit",
        WaitStatus::Censored => "censored",
        WaitStatus::EmptyTemplate => "empty_template",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Rate at `theta`, scalar or vector as the score function dictates.
pub fn model_rate(model: &RateModel, theta: &[f64]) -> Result<f64> {
    let res = if model.dim() == 1 {
        rate_star(model, theta[0])?
    } else {
        vector_rate(model, theta)?
    };
    if !res.is_converged() {
        return Err(Error::SolverFailure(format!(
            "rate at theta = {:?}: {}",
            theta,
            res.detail.unwrap_or_default()
        )));
    }
    Ok(res.rate)
}

/// Waiting times for a fresh template and data stream per `(l, replicate)`,
/// and the slope of mean log waiting time against `l`.
pub fn ladder_experiment(cfg: &LadderConfig) -> Result<LadderResult> {
    if cfg.theta.len() != cfg.f.dim() {
        return Err(invalid(format!(
            "threshold has {} components, score function has {}",
            cfg.theta.len(),
            cfg.f.dim()
        )));
    }
    if cfg.l_list.iter().any(|l| !(*l > 0.0 && l.is_finite()))
        || cfg.l_list.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(invalid(format!(
            "window lengths must be positive and ascending, got {:?}",
            cfg.l_list
        )));
    }
    if !(cfg.horizon.c > 0.0 && cfg.horizon.c.is_finite()) {
        return Err(invalid(format!(
            "horizon constant must be positive, got {}",
            cfg.horizon.c
        )));
    }
    let law = EmpiricalLaw {
        seed: RngSeed::derive(cfg.seed, domain::LONG_TEMPLATE, &[]),
        ..EmpiricalLaw::default()
    };
    let model = RateModel::from_processes(&cfg.x_model, &cfg.y_model, cfg.f.clone(), &law)?;
    if let Some(j) = (0..cfg.theta.len()).find(|&j| cfg.theta[j] <= model.phi()[j]) {
        return Err(Error::PreconditionViolation(format!(
            "threshold component {j} = {} is not above the mean score {}",
            cfg.theta[j],
            model.phi()[j]
        )));
    }

    let rate = model_rate(&model, &cfg.theta)?;

    let horizons: Vec<f64> = cfg
        .l_list
        .iter()
        .map(|&l| cfg.horizon.horizon(l, rate))
        .collect();
    let jobs: Vec<(usize, u32)> = (0..cfg.l_list.len())
        .flat_map(|i| (0..cfg.replicates).map(move |r| (i, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, r)| replicate(cfg, i, r, horizons[i]))
        .collect::<Result<Vec<_>>>()?;

    let mut summary = Vec::new();
    let mut warnings = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, &l) in cfg.l_list.iter().enumerate() {
        let mine: Vec<&LadderRow> = rows.iter().filter(|r| r.l == l).collect();
        let logs: Vec<f64> = mine.iter().filter_map(|r| r.log_w).collect();
        let n_censored = mine.len() - logs.len();
        let mean_log_w = (!logs.is_empty()).then(|| stats::mean(&logs));
        let se = (logs.len() >= 2).then(|| stats::std_err(&logs));
        if let Some(m) = mean_log_w {
            xs.push(l);
            ys.push(m);
        } else if cfg.replicates > 0 {
            warnings.push(format!(
                "all {} replicates censored at l = {l}; excluded from the slope fit",
                mine.len()
            ));
        }
        if n_censored > 0 && mean_log_w.is_some() {
            warnings.push(format!(
                "{n_censored} of {} replicates censored at l = {l}",
                mine.len()
            ));
        }
        summary.push(LadderSummary {
            l,
            horizon: horizons[i],
            n_hit: logs.len(),
            n_censored,
            mean_log_w,
            se,
        });
    }
    let fit = stats::ols(&xs, &ys);
    Ok(LadderResult {
        rate,
        rows,
        summary,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        warnings,
    })
}

fn replicate(cfg: &LadderConfig, i: usize, r: u32, horizon: f64) -> Result<LadderRow> {
    let l = cfg.l_list[i];
    let coords = [i as u64, u64::from(r)];
    let template = cfg.x_model.sample(
        0.0..l,
        RngSeed::derive(cfg.seed, domain::LADDER_TEMPLATE, &coords),
    )?;
    let mut data = cfg
        .y_model
        .stream(0.0, RngSeed::derive(cfg.seed, domain::LADDER_DATA, &coords))?;
    let query = WaitingTimeQuery {
        theta: cfg.theta.clone(),
        l,
        horizon,
        mode: cfg.mode,
    };
    let res = waiting_time(&template, &mut data, &cfg.f, &query)?;
    Ok(LadderRow {
        l,
        replicate: r,
        status: res.status,
        w: res.w,
        log_w: res.w.map(|w| w.max(1.0).ln()),
    })
}

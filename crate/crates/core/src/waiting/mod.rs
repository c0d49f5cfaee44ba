//! Waiting times `W_l(theta) = inf{t >= 0 : score(t) >= theta}` on streamed
//! data, by grid scan (any score function) or exact first crossing
//! (scalar piecewise-linear score functions), and the ladder experiment
//! that compares `log W_l / l` with the rate.

mod exact;
mod grid;
mod ladder;
mod window;

pub use ladder::{
    ladder_experiment, model_rate, HorizonRule, LadderConfig, LadderResult, LadderRow,
    LadderSummary,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::procgen::{ArrivalSource, PointSeq};
use crate::score::ScoreFn;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WaitMode {
    /// Scan `t = k * step`, `k = 0, 1, ...`. Can miss excursions shorter
    /// than `step`, so it overestimates `W_l` by at most such a miss.
    Grid { step: f64 },
    /// Exact first crossing for scalar piecewise-linear score functions.
    ExactPl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitingTimeQuery {
    pub theta: Vec<f64>,
    pub l: f64,
    /// Largest `t` scanned.
    pub horizon: f64,
    pub mode: WaitMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaitStatus {
    Hit,
    Censored,
    EmptyTemplate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitingTimeResult {
    pub status: WaitStatus,
    pub w: Option<f64>,
    /// Score evaluations: grid points, or exact-mode point and interval
    /// checks.
    pub evaluations: u64,
    pub horizon_used: f64,
}

impl WaitingTimeResult {
    fn hit(w: f64, evaluations: u64, horizon: f64) -> Self {
        Self {
            status: WaitStatus::Hit,
            w: Some(w),
            evaluations,
            horizon_used: horizon,
        }
    }

    fn censored(evaluations: u64, horizon: f64) -> Self {
        Self {
            status: WaitStatus::Censored,
            w: None,
            evaluations,
            horizon_used: horizon,
        }
    }

    fn empty(horizon: f64) -> Self {
        Self {
            status: WaitStatus::EmptyTemplate,
            w: None,
            evaluations: 0,
            horizon_used: horizon,
        }
    }
}

impl WaitingTimeQuery {
    pub fn validate(&self, f: &ScoreFn) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(invalid(format!(
                "window length must be positive, got {}",
                self.l
            )));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!(
                "horizon must be finite and >= 0, got {}",
                self.horizon
            )));
        }
        if self.theta.len() != f.dim() || self.theta.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "threshold must have {} finite components, got {:?}",
                f.dim(),
                self.theta
            )));
        }
        match self.mode {
            WaitMode::Grid { step } if !(step > 0.0 && step.is_finite()) => {
                Err(invalid(format!("grid step must be positive, got {step}")))
            }
            WaitMode::ExactPl if !(f.is_scalar() && f.is_piecewise_linear()) => {
                Err(Error::UnsupportedMode(format!(
                    "exact waiting times need a scalar piecewise-linear score function, got {f}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// `W_l` for the template (restricted to `[0, l)`) against data arriving
/// from `data`, whose arrivals must start at or after time 0.
pub fn waiting_time(
    template: &PointSeq,
    data: &mut dyn ArrivalSource,
    f: &ScoreFn,
    query: &WaitingTimeQuery,
) -> Result<WaitingTimeResult> {
    match query.mode {
        WaitMode::Grid { .. } => waiting_time_grid(template, data, f, query),
        WaitMode::ExactPl => waiting_time_exact_pl(template, data, f, query),
    }
}

pub fn waiting_time_grid(
    template: &PointSeq,
    data: &mut dyn ArrivalSource,
    f: &ScoreFn,
    query: &WaitingTimeQuery,
) -> Result<WaitingTimeResult> {
    query.validate(f)?;
    let WaitMode::Grid { step } = query.mode else {
        return Err(Error::UnsupportedMode(
            "grid scan called without a grid step".into(),
        ));
    };
    let tpl = template.restrict(0.0..query.l);
    if tpl.is_empty() {
        return Ok(WaitingTimeResult::empty(query.horizon));
    }
    Ok(grid::scan(tpl.points(), data, f, query, step))
}

pub fn waiting_time_exact_pl(
    template: &PointSeq,
    data: &mut dyn ArrivalSource,
    f: &ScoreFn,
    query: &WaitingTimeQuery,
) -> Result<WaitingTimeResult> {
    let q = WaitingTimeQuery {
        mode: WaitMode::ExactPl,
        ..query.clone()
    };
    q.validate(f)?;
    let tpl = template.restrict(0.0..query.l);
    if tpl.is_empty() {
        return Ok(WaitingTimeResult::empty(query.horizon));
    }
    Ok(exact::scan(tpl.points(), data, f, &q))
}

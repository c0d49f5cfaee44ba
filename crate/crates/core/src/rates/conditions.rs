use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::RateModel;
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

/// Outcome of checking the assumptions behind the rate formulas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    /// True when some check failed outright; experiments refuse to run.
    pub fn hard_failure(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const DIRECTIONS: usize = 1000;
const DISTANCE_SAMPLES: usize = 4096;

fn check(name: &'static str, status: CheckStatus, detail: String) -> ConditionCheck {
    ConditionCheck {
        name,
        status,
        detail,
    }
}

/// Checks boundedness, the continuity condition, positivity of the score
/// (or its directional version for vector scores), Poisson data and
/// `theta > phi`.
pub fn validate_conditions(model: &RateModel, theta: &[f64], seed: RngSeed) -> ConditionReport {
    let f = model.score_fn();
    let n = f.dim();
    let mut checks = Vec::new();

    checks.push(check(
        "bounded",
        if f.bound().is_finite() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        format!("sup |f| = {}", f.bound()),
    ));

    let jumps = f.discontinuities();
    checks.push(check(
        "continuity",
        CheckStatus::Pass,
        if jumps.is_empty() {
            "f is continuous".into()
        } else {
            format!("f jumps at {jumps:?}; d(0, X) has a density, so these carry no mass")
        },
    ));

    if n == 1 {
        let pos = model.distance_law_expect(1, |u, o| o[0] = f.eval_scalar(u).max(0.0))[0];
        checks.push(check(
            "positivity",
            if pos > 0.0 {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            format!("E[f(d)^+] = {pos:.6e}"),
        ));
    } else {
        let mut rng = seed.rng();
        let samples: Vec<Vec<f64>> = (0..DISTANCE_SAMPLES)
            .map(|_| f.eval(model.law().sample(&mut rng)))
            .collect();
        let mut bad = 0usize;
        for _ in 0..DIRECTIONS {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let positive = samples
                .iter()
                .any(|s| s.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() > 0.0);
            if !positive {
                bad += 1;
            }
        }
        checks.push(check(
            "directional positivity",
            if bad == 0 { CheckStatus::Pass } else { CheckStatus::Warn },
            format!(
                "{bad} of {DIRECTIONS} random directions v had <v, f(d)> <= 0 on all {DISTANCE_SAMPLES} sampled distances"
            ),
        ));
    }

    checks.push(check(
        "poisson data",
        if model.data_is_poisson() {
            CheckStatus::Pass
        } else {
            CheckStatus::Warn
        },
        if model.data_is_poisson() {
            "data process is (compound) Poisson".into()
        } else {
            "data process is not Poisson; the rate formulas do not apply".into()
        },
    ));

    let phi = model.phi();
    let ok = theta.len() == n && theta.iter().zip(phi).all(|(a, b)| a > b);
    checks.push(check(
        "threshold above mean",
        if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        format!("theta = {theta:?}, phi = {phi:?}"),
    ));

    ConditionReport { checks }
}

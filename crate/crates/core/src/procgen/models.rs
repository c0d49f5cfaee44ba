use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

use super::stream::{ArrivalSource, MarkedPoissonStream, PoissonStream, RenewalStream};
use super::PointSeq;
use crate::error::{invalid, Error, Result};
use crate::rng::RngSeed;
use crate::text::{self, expect_args, Expr};

/// Distribution of integer multiplicities attached to points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkDist {
    support: Vec<u32>,
    probabilities: Vec<f64>,
}

impl MarkDist {
    pub fn new(support: Vec<u32>, probabilities: Vec<f64>) -> Result<Self> {
        let d = Self {
            support,
            probabilities,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn point_mass(q: u32) -> Self {
        Self {
            support: vec![q],
            probabilities: vec![1.0],
        }
    }

    pub fn uniform(values: &[u32]) -> Result<Self> {
        let p = 1.0 / values.len() as f64;
        Self::new(values.to_vec(), vec![p; values.len()])
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() {
            return Err(invalid("mark distribution has empty support"));
        }
        if self.support.len() != self.probabilities.len() {
            return Err(invalid("mark support and probabilities differ in length"));
        }
        if self.support.contains(&0) {
            return Err(invalid("marks must be positive integers"));
        }
        if self.probabilities.iter().any(|&p| !(p >= 0.0)) {
            return Err(invalid("mark probabilities must be nonnegative"));
        }
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("mark probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(q, p)| f64::from(q) * p).sum()
    }

    /// `E[exp(s Q)]`.
    pub fn mgf(&self, s: f64) -> f64 {
        self.iter().map(|(q, p)| p * (s * f64::from(q)).exp()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.support
            .iter()
            .copied()
            .zip(self.probabilities.iter().copied())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (q, p) in self.iter() {
            acc += p;
            if u < acc {
                return q;
            }
        }
        *self.support.last().expect("nonempty support")
    }

    fn from_expr(e: &Expr) -> Result<Self> {
        let Expr::Map(entries) = e else {
            return Err(Error::Parse(
                "mark distribution must be a {mark: prob} map".into(),
            ));
        };
        let mut support = Vec::new();
        let mut probs = Vec::new();
        for (k, v) in entries {
            let q = k.num()?;
            if q.fract() != 0.0 || !(q >= 1.0) || q > f64::from(u32::MAX) {
                return Err(Error::Parse(format!("mark {q} is not a positive integer")));
            }
            support.push(q as u32);
            probs.push(v.num()?);
        }
        Self::new(support, probs).map_err(|e| Error::Parse(e.to_string()))
    }
}

impl fmt::Display for MarkDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (q, p)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{q}: {p}")?;
        }
        write!(f, "}}")
    }
}

/// Interarrival laws for which the stationary-excess law can be sampled
/// directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Interarrival {
    Exponential {
        rate: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    Discrete {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
    /// Erlang: gamma with integer shape.
    GammaInt {
        shape: u32,
        rate: f64,
    },
}

impl Interarrival {
    pub fn point_mass(v: f64) -> Self {
        Self::Discrete {
            values: vec![v],
            probabilities: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Exponential { rate } => *rate > 0.0 && rate.is_finite(),
            Self::Uniform { low, high } => *low >= 0.0 && high > low && high.is_finite(),
            Self::Discrete {
                values,
                probabilities,
            } => {
                !values.is_empty()
                    && values.len() == probabilities.len()
                    && values.iter().all(|&v| v > 0.0 && v.is_finite())
                    && probabilities.iter().all(|&p| p >= 0.0)
                    && (probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-9
            }
            Self::GammaInt { shape, rate } => *shape >= 1 && *rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedModel(format!(
                "invalid interarrival law {self}"
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Uniform { low, high } => 0.5 * (low + high),
            Self::Discrete {
                values,
                probabilities,
            } => values.iter().zip(probabilities).map(|(v, p)| v * p).sum(),
            Self::GammaInt { shape, rate } => f64::from(*shape) / rate,
        }
    }

    pub fn sample_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { rate } => Exp::new(*rate).expect("validated").sample(rng),
            Self::Uniform { low, high } => low + (high - low) * rng.gen::<f64>(),
            Self::Discrete {
                values,
                probabilities,
            } => values[pick(probabilities.iter().copied(), rng)],
            Self::GammaInt { shape, rate } => erlang(*shape, *rate, rng),
        }
    }

    /// Draw from the stationary-excess law with density `(1 - F(x)) / m`.
    pub fn sample_equilibrium<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { .. } => self.sample_gap(rng),
            Self::Uniform { low, high } => {
                // flat part on [0, low) with mass low/m, falling ramp on [low, high)
                let m = 0.5 * (low + high);
                let u: f64 = rng.gen();
                if u * m < *low {
                    low * rng.gen::<f64>()
                } else {
                    let v: f64 = rng.gen();
                    low + (high - low) * (1.0 - v.sqrt())
                }
            }
            Self::Discrete {
                values,
                probabilities,
            } => {
                // length-biased pick, then uniform inside the chosen gap
                let biased = values.iter().zip(probabilities).map(|(v, p)| v * p);
                let j = pick_unnormalized(biased, rng);
                values[j] * rng.gen::<f64>()
            }
            Self::GammaInt { shape, rate } => {
                // equal-weight mixture of Erlang(j, rate), j = 1..=shape
                let j = rng.gen_range(1..=*shape);
                erlang(j, *rate, rng)
            }
        }
    }

    fn from_expr(e: &Expr) -> Result<Self> {
        let Expr::Call(name, args) = e else {
            return Err(Error::Parse(format!(
                "expected an interarrival law, got {e:?}"
            )));
        };
        let law = match name.as_str() {
            "exp" => Self::Exponential {
                rate: expect_args(name, args, 1)?[0].num()?,
            },
            "uniform" => {
                let a = expect_args(name, args, 2)?;
                Self::Uniform {
                    low: a[0].num()?,
                    high: a[1].num()?,
                }
            }
            "discrete" => {
                let a = expect_args(name, args, 1)?;
                let Expr::Map(entries) = &a[0] else {
                    return Err(Error::Parse("discrete takes a {value: prob} map".into()));
                };
                let mut values = Vec::new();
                let mut probabilities = Vec::new();
                for (k, v) in entries {
                    values.push(k.num()?);
                    probabilities.push(v.num()?);
                }
                Self::Discrete {
                    values,
                    probabilities,
                }
            }
            "gamma" => {
                let a = expect_args(name, args, 2)?;
                let k = a[0].num()?;
                if k.fract() != 0.0 || k < 1.0 {
                    return Err(Error::UnsupportedModel(format!(
                        "gamma shape {k} is not a positive integer"
                    )));
                }
                Self::GammaInt {
                    shape: k as u32,
                    rate: a[1].num()?,
                }
            }
            other => {
                return Err(Error::UnsupportedModel(format!(
                    "unknown interarrival law {other:?}"
                )))
            }
        };
        law.validate()?;
        Ok(law)
    }
}

impl fmt::Display for Interarrival {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { rate } => write!(f, "exp({rate})"),
            Self::Uniform { low, high } => write!(f, "uniform({low}, {high})"),
            Self::Discrete {
                values,
                probabilities,
            } => {
                write!(f, "discrete({{")?;
                for (i, (v, p)) in values.iter().zip(probabilities).enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}: {p}")?;
                }
                write!(f, "}})")
            }
            Self::GammaInt { shape, rate } => write!(f, "gamma({shape}, {rate})"),
        }
    }
}

fn erlang<R: Rng + ?Sized>(shape: u32, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(f64::from(shape), 1.0 / rate)
        .expect("validated")
        .sample(rng)
}

fn pick<R: Rng + ?Sized>(probs: impl Iterator<Item = f64> + Clone, rng: &mut R) -> usize {
    pick_unnormalized(probs, rng)
}

fn pick_unnormalized<R: Rng + ?Sized>(
    weights: impl Iterator<Item = f64> + Clone,
    rng: &mut R,
) -> usize {
    let total: f64 = weights.clone().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// The point-process models used for templates and data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProcessModel {
    HomogeneousPoisson { density: f64 },
    MarkedPoisson { density: f64, marks: MarkDist },
    EquilibriumRenewal { interarrival: Interarrival },
}

impl ProcessModel {
    pub fn poisson(density: f64) -> Self {
        Self::HomogeneousPoisson { density }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::HomogeneousPoisson { density } | Self::MarkedPoisson { density, .. }
                if !(*density > 0.0 && density.is_finite()) =>
            {
                Err(invalid(format!(
                    "density must be in (0, inf), got {density}"
                )))
            }
            Self::MarkedPoisson { marks, .. } => marks.validate(),
            Self::EquilibriumRenewal { interarrival } => interarrival.validate(),
            _ => Ok(()),
        }
    }

    /// Mean number of point locations per unit length.
    pub fn density(&self) -> f64 {
        match self {
            Self::HomogeneousPoisson { density } | Self::MarkedPoisson { density, .. } => *density,
            Self::EquilibriumRenewal { interarrival } => 1.0 / interarrival.mean(),
        }
    }

    pub fn marks(&self) -> Option<&MarkDist> {
        match self {
            Self::MarkedPoisson { marks, .. } => Some(marks),
            _ => None,
        }
    }

    pub fn is_poisson(&self) -> bool {
        matches!(
            self,
            Self::HomogeneousPoisson { .. } | Self::MarkedPoisson { .. }
        ) || matches!(
            self,
            Self::EquilibriumRenewal {
                interarrival: Interarrival::Exponential { .. }
            }
        )
    }

    pub fn sample(&self, window: Range<f64>, seed: RngSeed) -> Result<PointSeq> {
        match self {
            Self::HomogeneousPoisson { density } => super::sample_poisson(*density, window, seed),
            Self::MarkedPoisson { density, marks } => {
                super::sample_marked_poisson(*density, marks, window, seed)
            }
            Self::EquilibriumRenewal { interarrival } => {
                super::sample_equilibrium_renewal(interarrival, window, seed)
            }
        }
    }

    /// Incremental arrivals from `start` onward.
    pub fn stream(&self, start: f64, seed: RngSeed) -> Result<Box<dyn ArrivalSource + Send>> {
        self.validate()?;
        Ok(match self {
            Self::HomogeneousPoisson { density } => {
                Box::new(PoissonStream::new(*density, start, seed)?)
            }
            Self::MarkedPoisson { density, marks } => Box::new(MarkedPoissonStream::new(
                *density,
                marks.clone(),
                start,
                seed,
            )?),
            Self::EquilibriumRenewal { interarrival } => {
                Box::new(RenewalStream::new(interarrival.clone(), start, seed)?)
            }
        })
    }
}

impl fmt::Display for ProcessModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::HomogeneousPoisson { density } => write!(f, "poisson({density})"),
            Self::MarkedPoisson { density, marks } => {
                write!(f, "marked_poisson({density}, {marks})")
            }
            Self::EquilibriumRenewal { interarrival } => write!(f, "renewal({interarrival})"),
        }
    }
}

impl FromStr for ProcessModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let e = text::parse(s)?;
        let Expr::Call(name, args) = &e else {
            return Err(Error::Parse(format!("expected a process model, got {s:?}")));
        };
        let model = match name.as_str() {
            "poisson" => Self::HomogeneousPoisson {
                density: expect_args(name, args, 1)?[0].num()?,
            },
            "marked_poisson" => {
                let a = expect_args(name, args, 2)?;
                Self::MarkedPoisson {
                    density: a[0].num()?,
                    marks: MarkDist::from_expr(&a[1])?,
                }
            }
            "renewal" => Self::EquilibriumRenewal {
                interarrival: Interarrival::from_expr(&expect_args(name, args, 1)?[0])?,
            },
            other => {
                return Err(Error::UnsupportedModel(format!(
                    "unknown process model {other:?}"
                )))
            }
        };
        model.validate().map_err(|e| match e {
            Error::InvalidArgument(m) => Error::Parse(format!("density: {m}")),
            other => other,
        })?;
        Ok(model)
    }
}

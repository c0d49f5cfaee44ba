use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::text::{self, Expr};

/// One coordinate of a score function.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreComponent {
    /// `1{x <= radius}`.
    Indicator {
        radius: f64,
    },
    /// `exp(-x / scale)`.
    ExpDecay {
        scale: f64,
    },
    /// `max(0, 1 - x / radius)`.
    Triangular {
        radius: f64,
    },
    /// Linear interpolation through `(knots[i], values[i])`, flat at
    /// `values[0]` before the first knot and equal to `tail` after the last.
    PiecewiseLinear {
        knots: Vec<f64>,
        values: Vec<f64>,
        tail: f64,
    },
    Constant {
        value: f64,
    },
    /// `offset + sum_i weight_i * g_i(x)`.
    Affine {
        offset: f64,
        terms: Vec<(f64, ScoreComponent)>,
    },
}

/// Which one-sided limit to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Left,
    Right,
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

impl ScoreComponent {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Indicator { radius } => {
                finite("indicator radius", *radius)?;
                if *radius < 0.0 {
                    return Err(invalid(format!(
                        "indicator radius must be >= 0, got {radius}"
                    )));
                }
            }
            Self::ExpDecay { scale } | Self::Triangular { radius: scale } => {
                finite("scale", *scale)?;
                if *scale <= 0.0 {
                    return Err(invalid(format!("scale must be positive, got {scale}")));
                }
            }
            Self::PiecewiseLinear {
                knots,
                values,
                tail,
            } => {
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(invalid(
                        "pwl needs equally many knots and values, at least one",
                    ));
                }
                for &k in knots {
                    finite("knot", k)?;
                }
                for &v in values {
                    finite("value", v)?;
                }
                finite("tail", *tail)?;
                if knots[0] < 0.0 {
                    return Err(invalid("pwl knots must be >= 0"));
                }
                if knots.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("pwl knots must be strictly increasing"));
                }
            }
            Self::Constant { value } => finite("constant", *value)?,
            Self::Affine { offset, terms } => {
                finite("offset", *offset)?;
                for (w, c) in terms {
                    finite("weight", *w)?;
                    c.validate()?;
                }
            }
        }
        Ok(())
    }

    /// `f(x)` for `x` in `[0, inf]`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Indicator { radius } => {
                if x <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            Self::ExpDecay { scale } => (-x / scale).exp(),
            Self::Triangular { radius } => (1.0 - x / radius).max(0.0),
            Self::PiecewiseLinear {
                knots,
                values,
                tail,
            } => {
                let last = knots.len() - 1;
                if x > knots[last] {
                    return *tail;
                }
                let i = knots.partition_point(|&k| k <= x);
                if i == 0 {
                    return values[0];
                }
                if i > last {
                    return values[last];
                }
                let (k0, k1) = (knots[i - 1], knots[i]);
                let s = (x - k0) / (k1 - k0);
                values[i - 1] + s * (values[i] - values[i - 1])
            }
            Self::Constant { value } => *value,
            Self::Affine { offset, terms } => {
                offset + terms.iter().map(|(w, c)| w * c.eval(x)).sum::<f64>()
            }
        }
    }

    /// One-sided limit of `f` at `x > 0` (the right limit at 0 for `Right`).
    pub(crate) fn limit(&self, x: f64, side: Side) -> f64 {
        match self {
            Self::Indicator { radius } => match side {
                Side::Left => (x <= *radius) as u8 as f64,
                Side::Right => (x < *radius) as u8 as f64,
            },
            Self::PiecewiseLinear { knots, tail, .. } => {
                let last = knots[knots.len() - 1];
                if x == last && side == Side::Right {
                    *tail
                } else {
                    self.eval(x)
                }
            }
            Self::Affine { offset, terms } => {
                offset + terms.iter().map(|(w, c)| w * c.limit(x, side)).sum::<f64>()
            }
            _ => self.eval(x),
        }
    }

    /// Upper bound on `sup |f|`; exact for every variant except `Affine`.
    pub fn sup_abs(&self) -> f64 {
        match self {
            Self::Indicator { .. } | Self::ExpDecay { .. } | Self::Triangular { .. } => 1.0,
            Self::PiecewiseLinear { values, tail, .. } => {
                values.iter().fold(tail.abs(), |m, v| m.max(v.abs()))
            }
            Self::Constant { value } => value.abs(),
            Self::Affine { offset, terms } => {
                offset.abs()
                    + terms
                        .iter()
                        .map(|(w, c)| w.abs() * c.sup_abs())
                        .sum::<f64>()
            }
        }
    }

    /// Smallest `r` such that `f` is constant on `(r, inf)`.
    pub fn support_radius(&self) -> f64 {
        match self {
            Self::Indicator { radius } | Self::Triangular { radius } => *radius,
            Self::ExpDecay { .. } => f64::INFINITY,
            Self::PiecewiseLinear { knots, .. } => knots[knots.len() - 1],
            Self::Constant { .. } => 0.0,
            Self::Affine { terms, .. } => terms
                .iter()
                .filter(|(w, _)| *w != 0.0)
                .map(|(_, c)| c.support_radius())
                .fold(0.0, f64::max),
        }
    }

    pub fn discontinuities(&self) -> Vec<f64> {
        match self {
            Self::Indicator { radius } => vec![*radius],
            Self::PiecewiseLinear {
                knots,
                values,
                tail,
            } => {
                let last = knots.len() - 1;
                if *tail != values[last] {
                    vec![knots[last]]
                } else {
                    Vec::new()
                }
            }
            Self::Affine { terms, .. } => {
                let mut d: Vec<f64> = terms
                    .iter()
                    .filter(|(w, _)| *w != 0.0)
                    .flat_map(|(_, c)| c.discontinuities())
                    .collect();
                d.sort_by(f64::total_cmp);
                d.dedup();
                d
            }
            _ => Vec::new(),
        }
    }

    pub fn is_continuous(&self) -> bool {
        self.discontinuities().is_empty()
    }

    pub fn is_piecewise_linear(&self) -> bool {
        match self {
            Self::ExpDecay { .. } => false,
            Self::Affine { terms, .. } => terms
                .iter()
                .all(|(w, c)| *w == 0.0 || c.is_piecewise_linear()),
            _ => true,
        }
    }

    /// Points where a piecewise-linear component may fail to be affine.
    pub(crate) fn kinks(&self) -> Vec<f64> {
        match self {
            Self::Indicator { radius } | Self::Triangular { radius } => vec![*radius],
            Self::PiecewiseLinear { knots, .. } => knots.clone(),
            Self::Affine { terms, .. } => terms
                .iter()
                .filter(|(w, _)| *w != 0.0)
                .flat_map(|(_, c)| c.kinks())
                .collect(),
            _ => Vec::new(),
        }
    }

    pub(crate) fn from_expr(e: &Expr) -> Result<Self> {
        let Expr::Call(name, args) = e else {
            return Err(Error::Parse(format!(
                "expected a score component, found {e:?}"
            )));
        };
        let c = match name.as_str() {
            "indicator" => Self::Indicator {
                radius: text::expect_args(name, args, 1)?[0].num()?,
            },
            "expdecay" => Self::ExpDecay {
                scale: text::expect_args(name, args, 1)?[0].num()?,
            },
            "triangular" => Self::Triangular {
                radius: text::expect_args(name, args, 1)?[0].num()?,
            },
            "pwl" => {
                let a = text::expect_args(name, args, 3)?;
                Self::PiecewiseLinear {
                    knots: a[0].num_list()?,
                    values: a[1].num_list()?,
                    tail: a[2].num()?,
                }
            }
            "const" => Self::Constant {
                value: text::expect_args(name, args, 1)?[0].num()?,
            },
            "affine" => {
                let a = text::expect_args(name, args, 3)?;
                let weights = a[1].num_list()?;
                let comps = a[2]
                    .list()?
                    .iter()
                    .map(Self::from_expr)
                    .collect::<Result<Vec<_>>>()?;
                if weights.len() != comps.len() {
                    return Err(Error::Parse("affine needs one weight per component".into()));
                }
                Self::Affine {
                    offset: a[0].num()?,
                    terms: weights.into_iter().zip(comps).collect(),
                }
            }
            other => return Err(Error::Parse(format!("unknown score component {other:?}"))),
        };
        c.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(c)
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, v: &[f64]) -> fmt::Result {
    write!(f, "[")?;
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{x}")?;
    }
    write!(f, "]")
}

impl fmt::Display for ScoreComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Indicator { radius } => write!(f, "indicator({radius})"),
            Self::ExpDecay { scale } => write!(f, "expdecay({scale})"),
            Self::Triangular { radius } => write!(f, "triangular({radius})"),
            Self::PiecewiseLinear {
                knots,
                values,
                tail,
            } => {
                write!(f, "pwl(")?;
                write_list(f, knots)?;
                write!(f, ", ")?;
                write_list(f, values)?;
                write!(f, ", {tail})")
            }
            Self::Constant { value } => write!(f, "const({value})"),
            Self::Affine { offset, terms } => {
                write!(f, "affine({offset}, ")?;
                let w: Vec<f64> = terms.iter().map(|t| t.0).collect();
                write_list(f, &w)?;
                write!(f, ", [")?;
                for (i, (_, c)) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "])")
            }
        }
    }
}

//! Template matching between point processes.
//!
//! A template is the segment `X ∩ [0, l)` of a point sequence `X`. A data
//! sequence `Y` is scanned with a window of length `l`; every data point in
//! the window is scored by a bounded function `f` of its distance to the
//! template, and the window score is the sum divided by `l`. This crate
//! provides:
//!
//! * seeded generators for the point-process models ([`procgen`]),
//! * score functions, template distances and window scores ([`score`]),
//! * waiting times until the score first reaches a threshold ([`waiting`]),
//! * cumulant generating functions and their Legendre transforms ([`rates`]),
//! * exponentially tilted importance sampling of the false-alarm
//!   probability ([`rare`]),
//! * the normal-fluctuation experiment for template-conditional rates
//!   ([`clt`]).

pub mod clt;
pub mod error;
pub mod procgen;
pub mod quad;
pub mod rare;
pub mod rates;
pub mod rng;
pub mod score;
pub mod stats;
mod text;
pub mod waiting;

pub use error::{Error, Result};
pub use procgen::{MarkDist, PointSeq, ProcessModel};
pub use rng::RngSeed;
pub use score::{ScoreComponent, ScoreFn, ScoreValue};

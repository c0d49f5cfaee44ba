//! Seeded generators for the point-process models: homogeneous Poisson,
//! marked (compound) Poisson, equilibrium renewal, and inhomogeneous Poisson
//! by thinning.
//!
//! All generators are pure functions of `(model, window, seed)`. Streaming
//! forms in [`stream`] produce arrivals one at a time so that waiting-time
//! scans can run over very long horizons without materializing the data.

mod models;
pub mod stream;

pub use models::{Interarrival, MarkDist, ProcessModel};
pub use stream::{
    materialize, Arrival, ArrivalSource, MarkedPoissonStream, PoissonStream, RenewalStream,
    SeqSource,
};

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::RngSeed;

/// A sorted finite realization of a point process on `[window_start, window_end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSeq {
    points: Vec<f64>,
    window_start: f64,
    window_end: f64,
    marks: Option<Vec<u32>>,
}

impl PointSeq {
    /// Builds a sequence, checking sortedness and window containment.
    pub fn new(points: Vec<f64>, window: Range<f64>) -> Result<Self> {
        let seq = Self {
            points,
            window_start: window.start,
            window_end: window.end,
            marks: None,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn with_marks(points: Vec<f64>, marks: Vec<u32>, window: Range<f64>) -> Result<Self> {
        let seq = Self {
            points,
            window_start: window.start,
            window_end: window.end,
            marks: Some(marks),
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn empty(window: Range<f64>) -> Self {
        Self {
            points: Vec::new(),
            window_start: window.start,
            window_end: window.end,
            marks: None,
        }
    }

    fn from_parts(points: Vec<f64>, marks: Option<Vec<u32>>, window: Range<f64>) -> Self {
        let seq = Self {
            points,
            window_start: window.start,
            window_end: window.end,
            marks,
        };
        debug_assert!(seq.validate().is_ok(), "{:?}", seq.validate());
        seq
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_start <= self.window_end) {
            return Err(invalid(format!(
                "window [{}, {}) is inverted",
                self.window_start, self.window_end
            )));
        }
        for w in self.points.windows(2) {
            if !(w[0] < w[1]) {
                return Err(invalid(format!(
                    "points not strictly ascending at {}",
                    w[1]
                )));
            }
        }
        if let (Some(&first), Some(&last)) = (self.points.first(), self.points.last()) {
            if first < self.window_start || last >= self.window_end {
                return Err(invalid("point outside window"));
            }
        }
        if let Some(m) = &self.marks {
            if m.len() != self.points.len() {
                return Err(invalid("marks length differs from points length"));
            }
            if m.contains(&0) {
                return Err(invalid("marks must be positive"));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn marks(&self) -> Option<&[u32]> {
        self.marks.as_deref()
    }

    pub fn window(&self) -> Range<f64> {
        self.window_start..self.window_end
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weight of point `i`: its mark, or 1 when unmarked.
    pub fn weight(&self, i: usize) -> f64 {
        self.marks.as_ref().map_or(1.0, |m| f64::from(m[i]))
    }

    /// The restriction `S ∩ [a, b)`, with window `[a, b)`.
    pub fn restrict(&self, window: Range<f64>) -> Self {
        let lo = self.points.partition_point(|&p| p < window.start);
        let hi = self.points.partition_point(|&p| p < window.end);
        let points = self.points[lo..hi].to_vec();
        let marks = self.marks.as_ref().map(|m| m[lo..hi].to_vec());
        Self::from_parts(points, marks, window)
    }

    /// `S - dt`, with the window shifted alike.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            points: self.points.iter().map(|&p| p - dt).collect(),
            window_start: self.window_start - dt,
            window_end: self.window_end - dt,
            marks: self.marks.clone(),
        }
    }
}

fn check_window(window: &Range<f64>) -> Result<()> {
    if !(window.start <= window.end) || !window.start.is_finite() || !window.end.is_finite() {
        return Err(invalid(format!(
            "window [{}, {}) must be finite with start <= end",
            window.start, window.end
        )));
    }
    Ok(())
}

fn check_density(density: f64) -> Result<()> {
    if !(density > 0.0) || !density.is_finite() {
        return Err(invalid(format!(
            "density must be in (0, inf), got {density}"
        )));
    }
    Ok(())
}

/// Uniform points on the window, count Poisson(density * length), sorted.
fn poisson_points<R: Rng>(density: f64, window: &Range<f64>, rng: &mut R) -> Vec<f64> {
    let len = window.end - window.start;
    let mean = density * len;
    if !(mean > 0.0) {
        return Vec::new();
    }
    let n = Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng) as usize;
    let mut pts: Vec<f64> = (0..n)
        .map(|_| {
            let p = window.start + len * rng.gen::<f64>();
            if p >= window.end {
                window.end.next_down()
            } else {
                p
            }
        })
        .collect();
    pts.sort_unstable_by(f64::total_cmp);
    separate_ties(&mut pts, window.end);
    pts
}

/// Nudges exact duplicates one ulp upward; anything pushed out of the
/// window is dropped.
fn separate_ties(pts: &mut Vec<f64>, end: f64) {
    for i in 1..pts.len() {
        if pts[i] <= pts[i - 1] {
            pts[i] = pts[i - 1].next_up();
        }
    }
    while pts.last().is_some_and(|&p| p >= end) {
        pts.pop();
    }
}

/// Homogeneous Poisson process of the given density on `window`.
pub fn sample_poisson(density: f64, window: Range<f64>, seed: RngSeed) -> Result<PointSeq> {
    check_density(density)?;
    check_window(&window)?;
    let mut rng = seed.rng();
    let pts = poisson_points(density, &window, &mut rng);
    Ok(PointSeq::from_parts(pts, None, window))
}

/// Poisson locations (identical to [`sample_poisson`] for the same seed)
/// carrying i.i.d. integer marks.
pub fn sample_marked_poisson(
    density: f64,
    marks: &MarkDist,
    window: Range<f64>,
    seed: RngSeed,
) -> Result<PointSeq> {
    check_density(density)?;
    check_window(&window)?;
    marks.validate()?;
    let mut rng = seed.rng();
    let pts = poisson_points(density, &window, &mut rng);
    let qs = pts.iter().map(|_| marks.sample(&mut rng)).collect();
    Ok(PointSeq::from_parts(pts, Some(qs), window))
}

/// Stationary renewal process: the first point sits at an equilibrium
/// (stationary-excess) delay after the window start, later gaps are i.i.d.
pub fn sample_equilibrium_renewal(
    interarrival: &Interarrival,
    window: Range<f64>,
    seed: RngSeed,
) -> Result<PointSeq> {
    check_window(&window)?;
    interarrival.validate()?;
    let mut source = RenewalStream::new(interarrival.clone(), window.start, seed)?;
    let mut pts = Vec::new();
    while let Some(a) = source.next_arrival() {
        if a.time >= window.end {
            break;
        }
        pts.push(a.time);
    }
    Ok(PointSeq::from_parts(pts, None, window))
}

/// Inhomogeneous Poisson process by thinning a homogeneous
/// Poisson(`intensity_bound`) proposal. An intensity value above the bound
/// is a hard error.
pub fn sample_inhomogeneous<F>(
    intensity: F,
    intensity_bound: f64,
    window: Range<f64>,
    seed: RngSeed,
) -> Result<PointSeq>
where
    F: Fn(f64) -> f64,
{
    check_density(intensity_bound)?;
    check_window(&window)?;
    let mut rng = seed.rng();
    let mut kept = Vec::new();
    thin(
        intensity_bound,
        &window,
        &mut rng,
        |y| Ok((intensity(y), ())),
        |y, ()| kept.push(y),
    )?;
    Ok(PointSeq::from_parts(kept, None, window))
}

/// Thinning core. `intensity` is called once per proposal in ascending
/// order and may return a payload that is handed to `accept` for kept
/// proposals.
pub(crate) fn thin<R, P, F, A>(
    bound: f64,
    window: &Range<f64>,
    rng: &mut R,
    mut intensity: F,
    mut accept: A,
) -> Result<()>
where
    R: Rng,
    F: FnMut(f64) -> Result<(f64, P)>,
    A: FnMut(f64, P),
{
    let proposals = poisson_points(bound, window, rng);
    for y in proposals {
        let (v, payload) = intensity(y)?;
        if !(v >= 0.0) {
            return Err(invalid(format!(
                "intensity {v} at y = {y} is not a nonnegative number"
            )));
        }
        if v > bound {
            return Err(Error::EnvelopeViolation {
                at: y,
                value: v,
                bound,
            });
        }
        let u: f64 = rng.gen();
        if u * bound < v {
            accept(y, payload);
        }
    }
    Ok(())
}

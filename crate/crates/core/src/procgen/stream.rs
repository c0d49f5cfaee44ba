//! One-arrival-at-a-time generators.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{check_density, Interarrival, MarkDist, PointSeq};
use crate::error::Result;
use crate::rng::RngSeed;

/// A point with its multiplicity (1 for unmarked processes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub weight: f64,
}

/// Strictly increasing arrivals; `None` once exhausted.
pub trait ArrivalSource {
    fn next_arrival(&mut self) -> Option<Arrival>;
}

impl<S: ArrivalSource + ?Sized> ArrivalSource for Box<S> {
    fn next_arrival(&mut self) -> Option<Arrival> {
        (**self).next_arrival()
    }
}

/// Collects arrivals with `time < until` into a sequence on `[start, until)`.
pub fn materialize<S: ArrivalSource + ?Sized>(source: &mut S, start: f64, until: f64) -> PointSeq {
    let mut pts = Vec::new();
    let mut marks = Vec::new();
    while let Some(a) = source.next_arrival() {
        if a.time >= until {
            break;
        }
        pts.push(a.time);
        marks.push(a.weight as u32);
    }
    if marks.iter().all(|&m| m == 1) {
        PointSeq::from_parts(pts, None, start..until)
    } else {
        PointSeq::from_parts(pts, Some(marks), start..until)
    }
}

fn advance(current: f64, gap: f64) -> f64 {
    let next = current + gap;
    if next > current {
        next
    } else {
        current.next_up()
    }
}

/// Homogeneous Poisson arrivals via exponential gaps.
#[derive(Debug, Clone)]
pub struct PoissonStream {
    rng: ChaCha8Rng,
    gaps: Exp<f64>,
    current: f64,
}

impl PoissonStream {
    pub fn new(density: f64, start: f64, seed: RngSeed) -> Result<Self> {
        check_density(density)?;
        Ok(Self {
            rng: seed.rng(),
            gaps: Exp::new(density).expect("checked density"),
            current: start,
        })
    }
}

impl ArrivalSource for PoissonStream {
    fn next_arrival(&mut self) -> Option<Arrival> {
        self.current = advance(self.current, self.gaps.sample(&mut self.rng));
        Some(Arrival {
            time: self.current,
            weight: 1.0,
        })
    }
}

/// Poisson arrivals carrying i.i.d. integer marks.
#[derive(Debug, Clone)]
pub struct MarkedPoissonStream {
    inner: PoissonStream,
    marks: MarkDist,
}

impl MarkedPoissonStream {
    pub fn new(density: f64, marks: MarkDist, start: f64, seed: RngSeed) -> Result<Self> {
        marks.validate()?;
        Ok(Self {
            inner: PoissonStream::new(density, start, seed)?,
            marks,
        })
    }
}

impl ArrivalSource for MarkedPoissonStream {
    fn next_arrival(&mut self) -> Option<Arrival> {
        let a = self.inner.next_arrival()?;
        let q = self.marks.sample(&mut self.inner.rng);
        Some(Arrival {
            time: a.time,
            weight: f64::from(q),
        })
    }
}

/// Equilibrium renewal arrivals starting from `start`.
#[derive(Debug, Clone)]
pub struct RenewalStream {
    rng: ChaCha8Rng,
    law: Interarrival,
    current: f64,
    started: bool,
}

impl RenewalStream {
    pub fn new(law: Interarrival, start: f64, seed: RngSeed) -> Result<Self> {
        law.validate()?;
        Ok(Self {
            rng: seed.rng(),
            law,
            current: start,
            started: false,
        })
    }
}

impl ArrivalSource for RenewalStream {
    fn next_arrival(&mut self) -> Option<Arrival> {
        if self.started {
            self.current = advance(self.current, self.law.sample_gap(&mut self.rng));
        } else {
            // the delay may be exactly 0, which is a legal first point
            self.current += self.law.sample_equilibrium(&mut self.rng);
            self.started = true;
        }
        Some(Arrival {
            time: self.current,
            weight: 1.0,
        })
    }
}

/// Arrivals replayed from a materialized sequence.
#[derive(Debug, Clone)]
pub struct SeqSource<'a> {
    seq: &'a PointSeq,
    next: usize,
}

impl<'a> SeqSource<'a> {
    pub fn new(seq: &'a PointSeq) -> Self {
        Self { seq, next: 0 }
    }
}

impl ArrivalSource for SeqSource<'_> {
    fn next_arrival(&mut self) -> Option<Arrival> {
        let i = self.next;
        let &time = self.seq.points().get(i)?;
        self.next += 1;
        Some(Arrival {
            time,
            weight: self.seq.weight(i),
        })
    }
}

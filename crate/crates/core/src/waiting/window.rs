use std::collections::VecDeque;

use crate::procgen::{Arrival, ArrivalSource};
use crate::score::{dist_to_template, ScoreFn};

/// The data points currently of interest, fed from a stream.
pub(super) struct Window<'a> {
    pub pts: VecDeque<Arrival>,
    src: &'a mut dyn ArrivalSource,
    next: Option<Arrival>,
}

impl<'a> Window<'a> {
    pub fn new(src: &'a mut dyn ArrivalSource) -> Self {
        let next = src.next_arrival();
        Self {
            pts: VecDeque::new(),
            src,
            next,
        }
    }

    /// Drops points with `y - t < 0` and takes in arrivals with
    /// `y - t < reach`.
    pub fn advance(&mut self, t: f64, reach: f64) {
        while self.pts.front().is_some_and(|a| a.time - t < 0.0) {
            self.pts.pop_front();
        }
        while let Some(a) = self.next {
            if a.time - t >= reach {
                break;
            }
            if a.time - t >= 0.0 {
                self.pts.push_back(a);
            }
            self.next = self.src.next_arrival();
        }
    }
}

/// Window sum at shift `t`, accumulated exactly as the matching score does
/// it: ascending data order, `u = y - t` in `[0, l)`.
pub(super) fn window_sum(
    pts: &VecDeque<Arrival>,
    template: &[f64],
    f: &ScoreFn,
    l: f64,
    t: f64,
    buf: &mut [f64],
    out: &mut [f64],
) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for a in pts {
        let u = a.time - t;
        if u < 0.0 {
            continue;
        }
        if u >= l {
            break;
        }
        f.eval_into(dist_to_template(u, template), buf);
        for (o, v) in out.iter_mut().zip(buf.iter()) {
            *o += a.weight * v;
        }
    }
}

/// `sum / l >= theta` componentwise, the matching-score comparison.
pub(super) fn meets(sums: &[f64], l: f64, theta: &[f64]) -> bool {
    sums.iter().zip(theta).all(|(s, th)| s / l >= *th)
}

//! Exact first crossing for scalar piecewise-linear score functions.
//!
//! The template profile `phi(u) = f(d(u, S))` is piecewise linear on
//! `[0, l)`. A data point `y` sits at `u = y - t`, moving left as `t`
//! grows, so between the times where some point crosses a profile
//! breakpoint (including entering at `u = l` and leaving after `u = 0`) the
//! window sum is affine in `t`. Time is cut into short blocks; a block is
//! swept exactly only when a cheap upper bound on the window sum over the
//! block reaches the threshold.

use super::window::{meets, window_sum, Window};
use super::{WaitingTimeQuery, WaitingTimeResult};
use crate::procgen::ArrivalSource;
use crate::score::{dist_to_template, LinearPieces, ScoreFn};

const FINE_CELLS: usize = 256;
const COARSE_FACTOR: usize = 8;

/// `phi` on `[0, l)`: affine on each open segment `(b_j, b_{j+1})`, with
/// point values at the breakpoints.
pub(super) struct Profile {
    pub breaks: Vec<f64>,
    pub start: Vec<f64>,
    pub slope: Vec<f64>,
    pub point: Vec<f64>,
}

impl Profile {
    pub fn new(template: &[f64], f: &ScoreFn, l: f64) -> Self {
        let pieces = f.linear_pieces().expect("piecewise-linear score function");
        let fb = pieces.breaks();
        let mut b = vec![0.0, l];
        for (i, &s) in template.iter().enumerate() {
            for &k in fb {
                b.push(s - k);
                b.push(s + k);
            }
            if let Some(&next) = template.get(i + 1) {
                b.push(0.5 * (s + next));
            }
        }
        b.retain(|&x| (0.0..=l).contains(&x));
        b.sort_by(f64::total_cmp);
        b.dedup();

        let mut out = Profile {
            breaks: vec![b[0]],
            start: Vec::new(),
            slope: Vec::new(),
            point: vec![f.eval_scalar(dist_to_template(b[0], template))],
        };
        for w in b.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (s0, s1) = segment_values(template, &pieces, lo, hi);
            let slope = (s1 - s0) / (hi - lo);
            let pv_hi = f.eval_scalar(dist_to_template(hi, template));
            let last = out.start.len();
            // Merge with the previous segment when the profile simply
            // continues through the shared breakpoint.
            if last > 0 {
                let prev_lo = out.breaks[last - 1];
                let prev_end = out.start[last - 1] + out.slope[last - 1] * (lo - prev_lo);
                if out.slope[last - 1] == slope
                    && slope == 0.0
                    && prev_end == s0
                    && out.point[last] == s0
                {
                    out.breaks[last] = hi;
                    out.point[last] = pv_hi;
                    continue;
                }
            }
            out.start.push(s0);
            out.slope.push(slope);
            out.breaks.push(hi);
            out.point.push(pv_hi);
        }
        out
    }

    pub fn segments(&self) -> usize {
        self.start.len()
    }

    /// Segment whose open interior contains `u`.
    #[inline]
    pub fn segment_of(&self, u: f64) -> usize {
        let i = self.breaks.partition_point(|&b| b <= u);
        i.saturating_sub(1).min(self.segments() - 1)
    }

    /// Affine extension of segment `j` evaluated at `u`.
    #[inline]
    pub fn seg_value(&self, j: usize, u: f64) -> f64 {
        self.start[j] + self.slope[j] * (u - self.breaks[j])
    }

    /// `sup phi` over `[lo, hi] ∩ [0, l]`, counting point values.
    pub fn sup_on(&self, lo: f64, hi: f64) -> f64 {
        let l = *self.breaks.last().expect("nonempty");
        let (lo, hi) = (lo.max(0.0), hi.min(l));
        if lo > hi {
            return f64::NEG_INFINITY;
        }
        let mut best = f64::NEG_INFINITY;
        let first = self.segment_of(lo);
        for j in first..self.segments() {
            let (a, b) = (self.breaks[j], self.breaks[j + 1]);
            if a > hi {
                break;
            }
            let x0 = lo.max(a);
            let x1 = hi.min(b);
            best = best.max(self.seg_value(j, x0)).max(self.seg_value(j, x1));
            if a >= lo {
                best = best.max(self.point[j]);
            }
        }
        let last = self.segments();
        if self.breaks[last] <= hi && self.breaks[last] >= lo && self.breaks[last] < l {
            best = best.max(self.point[last]);
        }
        best
    }
}

/// One-sided limits of `f(d(u, S))` at both ends of `(lo, hi)`, a stretch
/// on which the nearest template point and the piece of `f` are fixed.
fn segment_values(template: &[f64], p: &LinearPieces, lo: f64, hi: f64) -> (f64, f64) {
    let mid = 0.5 * (lo + hi);
    let i = template.partition_point(|&s| s < mid);
    let s = match (i.checked_sub(1).map(|k| template[k]), template.get(i)) {
        (Some(a), Some(&b)) => {
            if mid - a <= b - mid {
                a
            } else {
                b
            }
        }
        (Some(a), None) => a,
        (None, Some(&b)) => b,
        (None, None) => unreachable!("nonempty template"),
    };
    let dm = (mid - s).abs();
    let fb = p.breaks();
    let m = fb.len() - 1;
    if dm > fb[m] {
        return (p.tail(0), p.tail(0));
    }
    let k = fb.partition_point(|&b| b < dm).saturating_sub(1).min(m - 1);
    (
        p.interp(k, 0, (lo - s).abs()),
        p.interp(k, 0, (hi - s).abs()),
    )
}

/// `max(0, sup phi)` per cell for blocks of width `h`: a point at offset
/// `v = y - T0` in `[c h, (c+1) h)` stays within `((c-1) h, (c+1) h)` while
/// `t` runs over the block. Edge cells allow for the point being outside
/// the window.
fn cell_bounds(profile: &Profile, l: f64, cells: usize) -> Vec<f64> {
    let h = l / cells as f64;
    let slack = 1e-9 * l;
    (0..=cells)
        .map(|c| {
            let lo = (c as f64 - 1.0) * h - slack;
            let hi = (c as f64 + 1.0) * h + slack;
            let s = profile.sup_on(lo, hi);
            if c == 0 || c == cells {
                s.max(0.0)
            } else {
                s
            }
        })
        .collect()
}

pub(super) fn scan(
    template: &[f64],
    data: &mut dyn ArrivalSource,
    f: &ScoreFn,
    q: &WaitingTimeQuery,
) -> WaitingTimeResult {
    let l = q.l;
    let theta = q.theta[0];
    let target = l * theta;
    let tol = 1e-9 * target.abs().max(1.0);
    let profile = Profile::new(template, f, l);
    let coarse_cells = FINE_CELLS / COARSE_FACTOR;
    let fine_bounds = cell_bounds(&profile, l, FINE_CELLS);
    let coarse_bounds = cell_bounds(&profile, l, coarse_cells);
    let h = l / FINE_CELLS as f64;
    let hc = l / coarse_cells as f64;
    let mut sweep = Sweep {
        template,
        f,
        profile: &profile,
        l,
        theta,
        target,
        evaluations: 0,
        buf: [0.0],
        sums: [0.0],
        times: Vec::new(),
    };
    let mut win = Window::new(data);
    let mut block = 0u64;
    loop {
        let t0 = (block * COARSE_FACTOR as u64) as f64 * h;
        if t0 > q.horizon {
            return WaitingTimeResult::censored(sweep.evaluations, q.horizon);
        }
        win.advance(t0, l + hc + h);
        if bound(&win, t0, hc, coarse_cells, &coarse_bounds) >= target - tol {
            for i in 0..COARSE_FACTOR as u64 {
                let k = block * COARSE_FACTOR as u64 + i;
                let ta = k as f64 * h;
                if ta > q.horizon {
                    break;
                }
                if bound(&win, ta, h, FINE_CELLS, &fine_bounds) < target - tol {
                    continue;
                }
                let tb = ((k + 1) as f64 * h).min(q.horizon);
                let inclusive = tb == q.horizon;
                if let Some(w) = sweep.block(&win, ta, tb, inclusive) {
                    return WaitingTimeResult::hit(w, sweep.evaluations, q.horizon);
                }
            }
        }
        block += 1;
    }
}

/// Upper bound on the window sum over `t` in `[t0, t0 + h]`.
#[inline]
fn bound(win: &Window<'_>, t0: f64, h: f64, cells: usize, table: &[f64]) -> f64 {
    let inv = 1.0 / h;
    let mut total = 0.0;
    for a in &win.pts {
        let v = a.time - t0;
        if v < 0.0 {
            continue;
        }
        let c = (v * inv) as usize;
        if c > cells {
            break;
        }
        total += a.weight * table[c];
    }
    total
}

struct Sweep<'a> {
    template: &'a [f64],
    f: &'a ScoreFn,
    profile: &'a Profile,
    l: f64,
    theta: f64,
    target: f64,
    evaluations: u64,
    buf: [f64; 1],
    sums: [f64; 1],
    times: Vec<f64>,
}

impl Sweep<'_> {
    /// First `t` in `[ta, tb)` (or `[ta, tb]`) with score `>= theta`.
    fn block(&mut self, win: &Window<'_>, ta: f64, tb: f64, inclusive: bool) -> Option<f64> {
        let l = self.l;
        let p = self.profile;
        self.times.clear();
        self.times.push(ta);
        for a in &win.pts {
            let hi = a.time - ta;
            if hi < 0.0 {
                continue;
            }
            let lo = a.time - tb;
            if lo >= l {
                break;
            }
            // Breakpoints b with ta < y - b < tb, i.e. lo < b < hi.
            let first = p.breaks.partition_point(|&b| b <= lo);
            for &b in &p.breaks[first..] {
                if b >= hi {
                    break;
                }
                let t = a.time - b;
                if t > ta && t < tb {
                    self.times.push(t);
                }
            }
        }
        self.times.sort_by(f64::total_cmp);
        self.times.dedup();
        if inclusive {
            self.times.push(tb);
        }
        let n = self.times.len();
        for i in 0..n {
            let t = self.times[i];
            self.evaluations += 1;
            window_sum(
                &win.pts,
                self.template,
                self.f,
                l,
                t,
                &mut self.buf,
                &mut self.sums,
            );
            if meets(&self.sums, l, &[self.theta]) {
                return Some(t);
            }
            let end = if i + 1 < n {
                self.times[i + 1]
            } else if inclusive {
                break;
            } else {
                tb
            };
            if end <= t {
                continue;
            }
            // Affine stretch (t, end): right limit at t and slope in t.
            self.evaluations += 1;
            let mid = 0.5 * (t + end);
            let mut value = 0.0;
            let mut slope = 0.0;
            for a in &win.pts {
                let um = a.time - mid;
                if um < 0.0 {
                    continue;
                }
                if um >= l {
                    break;
                }
                let j = p.segment_of(um);
                value += a.weight * p.seg_value(j, a.time - t);
                slope -= a.weight * p.slope[j];
            }
            if value >= self.target {
                // Jump at t; the recomputed score may only catch up a few
                // ulps later.
                return Some(self.settle(win, t, end));
            }
            if slope > 0.0 {
                let cross = t + (self.target - value) / slope;
                if cross < end {
                    return Some(self.settle(win, cross.max(t), end));
                }
            }
        }
        None
    }

    /// Rounding in the closed-form crossing (or in `u = y - t` at a jump)
    /// can leave the recomputed score a hair short at `w`; move forward in
    /// doubling increments until it agrees.
    fn settle(&mut self, win: &Window<'_>, w: f64, end: f64) -> f64 {
        let mut step = w.next_up() - w;
        let mut cand = w;
        for _ in 0..64 {
            window_sum(
                &win.pts,
                self.template,
                self.f,
                self.l,
                cand,
                &mut self.buf,
                &mut self.sums,
            );
            if meets(&self.sums, self.l, &[self.theta]) {
                return cand;
            }
            cand = w + step;
            step *= 2.0;
            if cand >= end {
                break;
            }
        }
        w
    }
}

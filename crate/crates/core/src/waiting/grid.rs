use super::window::{meets, window_sum, Window};
use super::{WaitingTimeQuery, WaitingTimeResult};
use crate::procgen::ArrivalSource;
use crate::score::ScoreFn;

pub(super) fn scan(
    template: &[f64],
    data: &mut dyn ArrivalSource,
    f: &ScoreFn,
    q: &WaitingTimeQuery,
    step: f64,
) -> WaitingTimeResult {
    let n = f.dim();
    let l = q.l;
    let upper = f.upper_bounds();
    let mut win = Window::new(data);
    let mut buf = vec![0.0; n];
    let mut sums = vec![0.0; n];
    let mut evaluations = 0u64;
    let mut k = 0u64;
    loop {
        let t = k as f64 * step;
        if t > q.horizon {
            return WaitingTimeResult::censored(evaluations, q.horizon);
        }
        win.advance(t, l);
        // Skip points where even the largest possible values fall short.
        let mass: f64 = win.pts.iter().map(|a| a.weight).sum();
        let hopeless = (0..n).any(|j| {
            let best = mass * upper[j].max(0.0);
            best < l * q.theta[j] * (1.0 - 1e-12) - 1e-300
        });
        if !hopeless {
            evaluations += 1;
            window_sum(&win.pts, template, f, l, t, &mut buf, &mut sums);
            if meets(&sums, l, &q.theta) {
                return WaitingTimeResult::hit(t, evaluations, q.horizon);
            }
        }
        k += 1;
    }
}

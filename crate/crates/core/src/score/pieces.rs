use super::component::Side;
use super::ScoreFn;

/// Exact piecewise-linear description of a (vector) score function on
/// `[0, inf]`.
///
/// Breakpoints `0 = b_0 < ... < b_m` split `[0, b_m]` into segments. On the
/// open segment `(b_k, b_{k+1})` every component is affine, running from
/// `start` to `end`; at the breakpoints themselves the value is `point`.
/// Beyond `b_m` every component equals `tail`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPieces {
    dim: usize,
    breaks: Vec<f64>,
    start: Vec<f64>,
    end: Vec<f64>,
    point: Vec<f64>,
    tail: Vec<f64>,
}

impl LinearPieces {
    pub(crate) fn of(f: &ScoreFn) -> Option<Self> {
        if !f.is_piecewise_linear() {
            return None;
        }
        let comps = f.components();
        let mut breaks: Vec<f64> = std::iter::once(0.0)
            .chain(comps.iter().flat_map(|c| c.kinks()).filter(|&k| k > 0.0))
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let dim = comps.len();
        let m = breaks.len() - 1;
        let mut start = Vec::with_capacity(m * dim);
        let mut end = Vec::with_capacity(m * dim);
        for k in 0..m {
            for c in comps {
                start.push(c.limit(breaks[k], Side::Right));
                end.push(c.limit(breaks[k + 1], Side::Left));
            }
        }
        let point = breaks
            .iter()
            .flat_map(|&b| comps.iter().map(move |c| c.eval(b)))
            .collect();
        let tail = comps
            .iter()
            .map(|c| c.limit(breaks[m], Side::Right))
            .collect();
        Some(Self {
            dim,
            breaks,
            start,
            end,
            point,
            tail,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn segments(&self) -> usize {
        self.breaks.len() - 1
    }

    /// Right limit of component `j` at the left end of segment `k`.
    #[inline]
    pub fn start(&self, k: usize, j: usize) -> f64 {
        self.start[k * self.dim + j]
    }

    /// Left limit of component `j` at the right end of segment `k`.
    #[inline]
    pub fn end(&self, k: usize, j: usize) -> f64 {
        self.end[k * self.dim + j]
    }

    /// Value of component `j` exactly at breakpoint `k`.
    #[inline]
    pub fn point(&self, k: usize, j: usize) -> f64 {
        self.point[k * self.dim + j]
    }

    #[inline]
    pub fn tail(&self, j: usize) -> f64 {
        self.tail[j]
    }

    /// Value of component `j` at an interior point of segment `k`.
    #[inline]
    pub fn interp(&self, k: usize, j: usize, x: f64) -> f64 {
        let (b0, b1) = (self.breaks[k], self.breaks[k + 1]);
        let s = (x - b0) / (b1 - b0);
        let (a, b) = (self.start(k, j), self.end(k, j));
        a + s * (b - a)
    }

    /// Evaluates component `j` at `x` from the pieces alone.
    pub fn eval(&self, j: usize, x: f64) -> f64 {
        let m = self.segments();
        if x > self.breaks[m] {
            return self.tail[j];
        }
        let i = self.breaks.partition_point(|&b| b < x);
        if i < self.breaks.len() && self.breaks[i] == x {
            return self.point(i, j);
        }
        self.interp(i - 1, j, x)
    }

    /// `sup_x f_j(x)`.
    pub fn sup(&self, j: usize) -> f64 {
        let n = self.dim;
        let from = |v: &[f64]| {
            v.iter()
                .skip(j)
                .step_by(n)
                .fold(f64::NEG_INFINITY, |m, &x| m.max(x))
        };
        from(&self.start)
            .max(from(&self.end))
            .max(from(&self.point))
            .max(self.tail[j])
    }

    /// The common value per component when `f` does not depend on distance.
    pub fn constant(&self) -> Option<Vec<f64>> {
        let n = self.dim;
        let same = |v: &[f64]| v.iter().enumerate().all(|(i, x)| *x == self.tail[i % n]);
        (same(&self.start) && same(&self.end) && same(&self.point)).then(|| self.tail.clone())
    }

    /// `max |value|` over all limits and point values; the exact sup of `|f|`.
    pub fn sup_abs(&self) -> f64 {
        self.start
            .iter()
            .chain(&self.end)
            .chain(&self.point)
            .chain(&self.tail)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

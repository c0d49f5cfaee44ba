//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals,
//! for scalar and vector-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Cap on the number of panels per call.
pub const MAX_PANELS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-12,
        }
    }
}

/// Outcome of an integration: the error estimate and whether it met the
/// requested tolerance within [`MAX_PANELS`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadStats {
    pub error: f64,
    pub panels: usize,
    pub converged: bool,
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    a: f64,
    b: f64,
    dim: usize,
    buf: &mut [f64],
) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    f(c, buf);
    for j in 0..dim {
        k[j] = WGK[7] * buf[j];
        g[j] = WG[3] * buf[j];
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        for x in [c - dx, c + dx] {
            f(x, buf);
            for j in 0..dim {
                k[j] += WGK[i] * buf[j];
                if i % 2 == 1 {
                    g[j] += WG[i / 2] * buf[j];
                }
            }
        }
    }
    let mut error = 0.0f64;
    for j in 0..dim {
        k[j] *= h;
        g[j] *= h;
        error = error.max((k[j] - g[j]).abs());
    }
    Panel {
        a,
        b,
        value: k,
        error,
    }
}

/// Integrates the `dim`-vector integrand `f(x, out)` over `[a, b]`, writing
/// the result into `out`. The error criterion is the max-norm over
/// components against `max(tol.abs, tol.rel * max_j |I_j|)`.
pub fn integrate_vec<F>(mut f: F, a: f64, b: f64, tol: Tolerance, out: &mut [f64]) -> QuadStats
where
    F: FnMut(f64, &mut [f64]),
{
    let dim = out.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    if a == b {
        return QuadStats {
            error: 0.0,
            panels: 0,
            converged: true,
        };
    }
    assert!(
        a.is_finite() && b.is_finite(),
        "integration bounds must be finite"
    );
    let mut buf = vec![0.0; dim];
    let mut heap = BinaryHeap::new();
    heap.push(kronrod(&mut f, a, b, dim, &mut buf));
    loop {
        let total_err: f64 = heap.iter().map(|p| p.error).sum();
        let mut scale = 0.0f64;
        for j in 0..dim {
            let s: f64 = heap.iter().map(|p| p.value[j]).sum();
            scale = scale.max(s.abs());
        }
        let target = tol.abs.max(tol.rel * scale);
        let done = total_err <= target;
        if done || heap.len() >= MAX_PANELS {
            for p in heap.iter() {
                for (o, v) in out.iter_mut().zip(&p.value) {
                    *o += v;
                }
            }
            return QuadStats {
                error: total_err,
                panels: heap.len(),
                converged: done,
            };
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            let mut p = worst;
            p.error = 0.0;
            heap.push(p);
            continue;
        }
        heap.push(kronrod(&mut f, worst.a, mid, dim, &mut buf));
        heap.push(kronrod(&mut f, mid, worst.b, dim, &mut buf));
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> (f64, QuadStats) {
    let mut out = [0.0];
    let stats = integrate_vec(|x, o| o[0] = f(x), a, b, tol, &mut out);
    (out[0], stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let (v, s) = integrate(
            |x| x.powi(5) - 3.0 * x * x + 1.0,
            -1.0,
            2.0,
            Tolerance::default(),
        );
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-13);
        assert_eq!(s.panels, 1);
    }

    #[test]
    fn smooth_and_kinked_integrands() {
        let (v, s) = integrate(|x| (-x).exp(), 0.0, 30.0, Tolerance::default());
        assert!((v - (1.0 - (-30f64).exp())).abs() < 1e-12);
        assert!(s.converged);
        let (v, s) = integrate(|x| (x - 0.3).abs(), 0.0, 1.0, Tolerance::default());
        assert!((v - (0.045 + 0.245)).abs() < 1e-12, "{v}");
        assert!(s.converged);
        let (v, _) = integrate(
            |x| x.sqrt(),
            0.0,
            1.0,
            Tolerance {
                abs: 1e-10,
                rel: 0.0,
            },
        );
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn vector_components_share_panels() {
        let mut out = [0.0; 3];
        integrate_vec(
            |x, o| {
                o[0] = x.sin();
                o[1] = x.cos();
                o[2] = 1.0;
            },
            0.0,
            std::f64::consts::PI,
            Tolerance::default(),
            &mut out,
        );
        assert!((out[0] - 2.0).abs() < 1e-12);
        assert!(out[1].abs() < 1e-12);
        assert!((out[2] - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn empty_interval() {
        let (v, s) = integrate(|_| 1.0, 2.0, 2.0, Tolerance::default());
        assert_eq!(v, 0.0);
        assert!(s.converged);
    }
}

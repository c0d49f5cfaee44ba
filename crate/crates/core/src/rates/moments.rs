//! Exact integrals of `e^{<t, f(u)>}` against piecewise exponential weights
//! when `f` is piecewise linear.

/// `[E_0(z), E_1(z), E_2(z)]` with `E_k(z) = int_0^1 x^k e^{zx} dx`, each
/// multiplied by `e^{log_scale}`. Large positive `z` is folded into the
/// scale so nothing overflows before the final product.
pub(crate) fn scaled_moments(log_scale: f64, z: f64) -> [f64; 3] {
    if z >= 2.0 {
        let [f0, f1, f2] = raw_moments(-z);
        let s = (log_scale + z).exp();
        return [s * f0, s * (f0 - f1), s * (f0 - 2.0 * f1 + f2)];
    }
    let s = log_scale.exp();
    let [e0, e1, e2] = raw_moments(z);
    [s * e0, s * e1, s * e2]
}

/// Moments for `z < 2`.
fn raw_moments(z: f64) -> [f64; 3] {
    if z.abs() < 2.0 {
        let mut out = [0.0; 3];
        let mut term = 1.0; // z^n / n!
        for n in 0..60 {
            let nf = n as f64;
            out[0] += term / (nf + 1.0);
            out[1] += term / (nf + 2.0);
            out[2] += term / (nf + 3.0);
            term *= z / (nf + 1.0);
            if term.abs() < 1e-18 {
                break;
            }
        }
        return out;
    }
    let ez = z.exp();
    let e0 = z.exp_m1() / z;
    let e1 = (ez - e0) / z;
    let e2 = (ez - 2.0 * e1) / z;
    [e0, e1, e2]
}

/// `E_0(z) - 1`, accurate near `z = 0`.
pub(crate) fn e0_minus_one(z: f64) -> f64 {
    if z.abs() < 1.0 {
        let mut sum = 0.0;
        let mut term = z / 2.0; // z^n / (n+1)!
        for n in 1..40 {
            sum += term;
            term *= z / (n as f64 + 2.0);
            if term.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        (z.exp_m1() - z) / z
    }
}

/// A CGF-type value with its gradient and row-major Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct CgfValue {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl CgfValue {
    pub(crate) fn zeros(n: usize) -> Self {
        Self {
            value: 0.0,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub(crate) fn add_scaled(&mut self, other: &CgfValue, v: f64, g: f64, h: f64) {
        self.value += v * other.value;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += g * b;
        }
        for (a, b) in self.hess.iter_mut().zip(&other.hess) {
            *a += h * b;
        }
    }

    pub(crate) fn scale(&mut self, c: f64) {
        self.value *= c;
        self.grad.iter_mut().for_each(|g| *g *= c);
        self.hess.iter_mut().for_each(|h| *h *= c);
    }

    /// `(value, first, second)` of a scalar CGF.
    pub fn scalar(&self) -> (f64, f64, f64) {
        (self.value, self.grad[0], self.hess[0])
    }
}

/// Elementary cells on which `f` is affine and the weight is
/// `exp(log_weight + kappa * x)` in the normalized coordinate `x in [0, 1]`,
/// plus a flat tail of total mass `tail_mass` where `f = tail`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Cells {
    pub dim: usize,
    pub width: Vec<f64>,
    pub log_weight: Vec<f64>,
    pub kappa: Vec<f64>,
    pub start: Vec<f64>,
    pub slope: Vec<f64>,
    pub tail_mass: f64,
    pub tail: Vec<f64>,
}

impl Cells {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            tail: vec![0.0; dim],
            ..Default::default()
        }
    }

    pub fn push(&mut self, width: f64, log_weight: f64, kappa: f64, start: &[f64], end: &[f64]) {
        self.width.push(width);
        self.log_weight.push(log_weight);
        self.kappa.push(kappa);
        self.start.extend_from_slice(start);
        self.slope.extend(end.iter().zip(start).map(|(e, s)| e - s));
    }

    pub fn len(&self) -> usize {
        self.width.len()
    }

    /// `int (e^{<t,f>} - 1) w`, `int f_j e^{<t,f>} w` and
    /// `int f_j f_k e^{<t,f>} w`; derivatives only up to `order`.
    pub fn eval(&self, t: &[f64], order: u8) -> CgfValue {
        let n = self.dim;
        let mut out = CgfValue::zeros(n);
        for c in 0..self.len() {
            let s = &self.start[c * n..(c + 1) * n];
            let d = &self.slope[c * n..(c + 1) * n];
            let alpha: f64 = t.iter().zip(s).map(|(a, b)| a * b).sum();
            let beta: f64 = t.iter().zip(d).map(|(a, b)| a * b).sum();
            let (h, lw, kappa) = (self.width[c], self.log_weight[c], self.kappa[c]);
            let z = beta + kappa;
            if kappa == 0.0 {
                let [e0, ..] = scaled_moments(0.0, z);
                out.value += h * lw.exp() * (alpha.exp_m1() * e0 + e0_minus_one(z));
            } else {
                let [e0, ..] = scaled_moments(alpha, z);
                let [w0, ..] = scaled_moments(0.0, kappa);
                out.value += h * lw.exp() * (e0 - w0);
            }
            if order == 0 {
                continue;
            }
            let [m0, m1, m2] = scaled_moments(h.ln() + lw + alpha, z);
            for j in 0..n {
                out.grad[j] += s[j] * m0 + d[j] * m1;
                if order < 2 {
                    continue;
                }
                for k in j..n {
                    let v = s[j] * s[k] * m0 + (s[j] * d[k] + d[j] * s[k]) * m1 + d[j] * d[k] * m2;
                    out.hess[j * n + k] += v;
                }
            }
        }
        if self.tail_mass > 0.0 {
            let g: f64 = t.iter().zip(&self.tail).map(|(a, b)| a * b).sum();
            out.value += self.tail_mass * g.exp_m1();
            let w = self.tail_mass * g.exp();
            for j in 0..n {
                out.grad[j] += w * self.tail[j];
                for k in j..n {
                    out.hess[j * n + k] += w * self.tail[j] * self.tail[k];
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                out.hess[j * n + k] = out.hess[k * n + j];
            }
        }
        out
    }
}

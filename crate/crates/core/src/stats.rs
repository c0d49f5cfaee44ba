//! Small descriptive statistics used by the experiments and their tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; NaN for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_err(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolation quantile of the sample.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Chi-square goodness-of-fit p-value of integer counts against
/// Poisson(`mean`). Cells are merged from both tails until every expected
/// count is at least 5.
pub fn poisson_gof_pvalue(counts: &[u64], mean: f64) -> f64 {
    let n = counts.len() as f64;
    let pois = Poisson::new(mean).expect("positive mean");
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut observed = vec![0f64; max + 1];
    for &c in counts {
        observed[c as usize] += 1.0;
    }
    let mut expected: Vec<f64> = (0..=max).map(|k| n * pois.pmf(k as u64)).collect();
    // fold the upper tail mass beyond max into the last cell
    let tail: f64 = 1.0 - (0..=max).map(|k| pois.pmf(k as u64)).sum::<f64>();
    *expected.last_mut().expect("nonempty") += n * tail.max(0.0);

    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for k in 0..=max {
        o += observed[k];
        e += expected[k];
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(df).expect("df > 0").cdf(stat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(median(&xs), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn ols_recovers_line() {
        let x = [10.0, 20.0, 30.0, 40.0];
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + 1.0).collect();
        let (s, b) = ols(&x, &y).unwrap();
        assert!((s - 0.3).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gof_rejects_wrong_mean() {
        let counts: Vec<u64> = (0..1000).map(|i| 10 + (i % 3)).collect();
        assert!(poisson_gof_pvalue(&counts, 11.0) < 1e-6);
    }
}

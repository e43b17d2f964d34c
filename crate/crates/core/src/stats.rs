//! Estimator summaries and small statistical tests used by experiments.

/// Compensated (Kahan) accumulator for order-independent sums.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Mean and standard error of a Bernoulli/real-valued Monte Carlo sample.
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n > 1, "need at least two samples");
        let mut sum = KahanSum::new();
        for &v in samples {
            sum.add(v);
        }
        let mean = sum.value() / n as f64;
        let mut var = KahanSum::new();
        for &v in samples {
            var.add((v - mean) * (v - mean));
        }
        let se = (var.value() / ((n - 1) as f64 * n as f64)).sqrt();
        Estimate { mean, se, n }
    }

    pub fn from_successes(successes: usize, n: usize) -> Self {
        assert!(n > 0);
        let p = successes as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        Estimate { mean: p, se, n }
    }

    /// Pooled estimate of independent estimates of the same quantity.
    pub fn pooled(parts: &[Estimate]) -> Estimate {
        let n: usize = parts.iter().map(|e| e.n).sum();
        let mean = parts.iter().map(|e| e.mean * e.n as f64).sum::<f64>() / n as f64;
        let var = parts
            .iter()
            .map(|e| (e.se * e.n as f64).powi(2) / e.n as f64)
            .sum::<f64>();
        Estimate {
            mean,
            se: var.sqrt() / n as f64,
            n,
        }
    }

    pub fn agrees_with(&self, other: f64, sigmas: f64) -> bool {
        (self.mean - other).abs() <= sigmas * self.se
    }
}

/// Two-sample Kolmogorov-Smirnov test. Returns (statistic, approximate p-value).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    // Kolmogorov tail series.
    let mut p = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += term;
        sign = -sign;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (d, (2.0 * p).clamp(0.0, 1.0))
}

/// Pearson chi-squared statistic against uniform expected counts, with the
/// Wilson-Hilferty normal approximation of the p-value.
pub fn chi2_uniform(counts: &[u64]) -> (f64, f64) {
    let k = counts.len();
    assert!(k > 1);
    let total: u64 = counts.iter().sum();
    let expect = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let t = c as f64 - expect;
            t * t / expect
        })
        .sum();
    let dof = (k - 1) as f64;
    // Wilson-Hilferty: (X/dof)^(1/3) approx normal.
    let z = ((stat / dof).powf(1.0 / 3.0) - (1.0 - 2.0 / (9.0 * dof))) / (2.0 / (9.0 * dof)).sqrt();
    let p = 0.5 * erfc_approx(z / std::f64::consts::SQRT_2);
    (stat, p)
}

fn erfc_approx(x: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26 style rational approximation, |err| < 1.5e-7.
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))))
        * (-x * x).exp();
    if sign < 0.0 {
        2.0 - y
    } else {
        y
    }
}

/// Least-squares slope/intercept/R^2 of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn kahan_beats_naive_on_adversarial_sum() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..10_000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn estimate_matches_closed_form() {
        let e = Estimate::from_successes(250, 1000);
        assert!((e.mean - 0.25).abs() < 1e-15);
        assert!((e.se - (0.25 * 0.75 / 1000.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ks_accepts_same_distribution() {
        let mut s = Stream::new(5);
        let a: Vec<f64> = (0..2000).map(|_| s.uniform()).collect();
        let b: Vec<f64> = (0..2000).map(|_| s.uniform()).collect();
        let (_, p) = ks_two_sample(&a, &b);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn ks_rejects_shifted_distribution() {
        let mut s = Stream::new(5);
        let a: Vec<f64> = (0..2000).map(|_| s.uniform()).collect();
        let b: Vec<f64> = (0..2000).map(|_| s.uniform() + 0.2).collect();
        let (_, p) = ks_two_sample(&a, &b);
        assert!(p < 1e-6, "p = {p}");
    }

    #[test]
    fn chi2_uniform_sanity() {
        let mut s = Stream::new(9);
        let mut counts = [0u64; 6];
        for _ in 0..60_000 {
            counts[s.below(6) as usize] += 1;
        }
        let (_, p) = chi2_uniform(&counts);
        assert!(p > 0.001, "p = {p}");
        let skewed = [20_000u64, 10_000, 10_000, 10_000, 5_000, 5_000];
        let (_, p_bad) = chi2_uniform(&skewed);
        assert!(p_bad < 1e-9);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let (slope, intercept, r2) = linear_fit(&x, &y);
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((intercept - 1.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}

//! Lattice and Brownian Green functions.
//!
//! The walk Green function is evaluated through the integral representation
//! `G(x) = \int_0^\infty \prod_k ib(x_k, t/d) dt`, where `ib(n, z)` is the
//! exponentially scaled modified Bessel function `I_n(z) e^-z`. The
//! integrand decays like `t^(-d/2)`, so the quadrature runs to a finite
//! horizon and the remaining tail is integrated analytically from the
//! uniform asymptotic series. With all values sharing one quadrature grid,
//! discrete harmonicity cancels structurally to quadrature precision.

use crate::point::LatticePoint;
use std::sync::Mutex;

/// Gamma function via the Lanczos approximation (g = 7, n = 9).
pub fn gamma_fn(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + 7.5;
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// The Brownian Green function `g(x) = Gamma(d/2 - 1) / (2 pi^{d/2}) |x|^{2-d}`
/// (Euclidean norm), for the generator `Delta / 2`.
pub fn brownian_green(dim: usize, r_euclid: f64) -> f64 {
    let d = dim as f64;
    gamma_fn(d / 2.0 - 1.0) / (2.0 * std::f64::consts::PI.powf(d / 2.0)) * r_euclid.powf(2.0 - d)
}

/// Scaled modified Bessel `I_n(z) exp(-z)` by trapezoidal quadrature of
/// `(1/pi) \int_0^pi exp(z (cos t - 1)) cos(n t) dt` (spectrally accurate
/// for the smooth periodic integrand).
pub fn scaled_bessel_i(n: u32, z: f64) -> f64 {
    if z == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let m = bessel_nodes(n, z);
    let mut sum = 0.5 * (1.0 + (-2.0 * z).exp() * if n % 2 == 0 { 1.0 } else { -1.0 });
    for i in 1..m {
        let theta = std::f64::consts::PI * i as f64 / m as f64;
        sum += (z * (theta.cos() - 1.0)).exp() * (n as f64 * theta).cos();
    }
    sum / m as f64
}

fn bessel_nodes(n: u32, z: f64) -> usize {
    let by_order = 8 * n as usize;
    let by_width = (14.0 * z.sqrt()).ceil() as usize;
    (by_order.max(by_width).max(128)).next_power_of_two()
}

/// Asymptotic coefficients of `I_n(z) e^-z ~ (2 pi z)^(-1/2) sum_m (-1)^m a_m / z^m`.
fn bessel_asym_coeffs(n: u32, orders: usize) -> Vec<f64> {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut coeffs = Vec::with_capacity(orders + 1);
    let mut a = 1.0;
    coeffs.push(a);
    for m in 1..=orders {
        let odd = (2 * m - 1) as f64;
        a *= (mu - odd * odd) / (8.0 * m as f64);
        coeffs.push(if m % 2 == 0 { a } else { -a });
    }
    coeffs
}

const TAIL_ORDERS: usize = 6;

/// Signed tail-series coefficients for a product of scaled Bessels.
fn product_tail_coeffs(offsets: &[u32]) -> Vec<f64> {
    let mut prod = vec![1.0];
    for &n in offsets {
        let f = bessel_asym_coeffs(n, TAIL_ORDERS);
        let mut next = vec![0.0; (prod.len() + f.len() - 1).min(TAIL_ORDERS + 1)];
        for (i, &a) in prod.iter().enumerate() {
            for (j, &b) in f.iter().enumerate() {
                if i + j < next.len() {
                    next[i + j] += a * b;
                }
            }
        }
        prod = next;
    }
    prod
}

/// `\int_T^\infty prod_k ib(x_k, t/d) dt` from the asymptotic series.
fn tail_integral(dim: usize, offsets: &[u32], horizon: f64) -> (f64, f64) {
    let d = dim as f64;
    let coeffs = product_tail_coeffs(offsets);
    // prod ib(x_k, t/d) ~ (d / (2 pi t))^{d/2} sum_M c_M (d/t)^M.
    let front = (d / (2.0 * std::f64::consts::PI)).powf(d / 2.0);
    let mut total = 0.0;
    let mut last = 0.0;
    for (m, &c) in coeffs.iter().enumerate() {
        let p = d / 2.0 + m as f64 - 1.0;
        last = front * c * d.powi(m as i32) * horizon.powf(-p) / p;
        total += last;
    }
    (total, last.abs())
}

/// Geometric Gauss-Legendre panels on `[0, horizon]`.
fn quad_nodes(horizon: f64) -> Vec<(f64, f64)> {
    // 16-point Gauss-Legendre abscissas/weights on [-1, 1].
    const X: [f64; 8] = [
        0.0950125098376374,
        0.2816035507792589,
        0.4580167776572274,
        0.6178762444026438,
        0.7554044083550030,
        0.8656312023878318,
        0.9445750230732326,
        0.9894009349916499,
    ];
    const W: [f64; 8] = [
        0.1894506104550685,
        0.1826034150449236,
        0.1691565193950025,
        0.1495959888165767,
        0.1246289712555339,
        0.0951585116824928,
        0.0622535239386479,
        0.0271524594117541,
    ];
    let mut nodes = Vec::new();
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while lo < horizon {
        let b = hi.min(horizon);
        let mid = 0.5 * (lo + b);
        let half = 0.5 * (b - lo);
        for k in 0..8 {
            nodes.push((mid - half * X[k], half * W[k]));
            nodes.push((mid + half * X[k], half * W[k]));
        }
        lo = b;
        hi *= 2.0;
    }
    nodes
}

/// Direct quadrature evaluation of the walk Green function at any point.
/// `offsets` are the absolute coordinates of `x`.
pub fn walk_green_quadrature(dim: usize, offsets: &[u32]) -> f64 {
    let d = dim as f64;
    let max_n = offsets.iter().copied().max().unwrap_or(0);
    let mut horizon = (8.0 * d * (max_n as f64 * max_n as f64 + 25.0)).max(512.0);
    loop {
        let (tail, err) = tail_integral(dim, offsets, horizon);
        if err < 1e-12 * (tail.abs() + 0.1) || horizon > 1e12 {
            let mut sum = 0.0;
            for (t, w) in quad_nodes(horizon) {
                let mut f = w;
                for &n in offsets {
                    f *= scaled_bessel_i(n, t / d);
                    if f == 0.0 {
                        break;
                    }
                }
                sum += f;
            }
            return sum + tail;
        }
        horizon *= 4.0;
    }
}

/// Cached table of the walk Green function `G(x)` with a far-field switch
/// to `d g(x)` beyond the table radius.
pub struct LatticeGreenTable {
    pub dim: usize,
    pub radius: i64,
    /// Dense values indexed by |x_k| <= radius.
    values: Vec<f64>,
    extent: usize,
}

static TABLES: Mutex<Vec<(usize, &'static LatticeGreenTable)>> = Mutex::new(Vec::new());

impl LatticeGreenTable {
    /// Shared per-dimension table (built once, leaked for 'static reuse).
    pub fn shared(dim: usize) -> &'static LatticeGreenTable {
        let mut guard = TABLES.lock().unwrap();
        if let Some((_, t)) = guard.iter().find(|(d, _)| *d == dim) {
            return t;
        }
        let radius = if dim == 3 { 64 } else { 16 };
        let table = Box::leak(Box::new(LatticeGreenTable::build(dim, radius)));
        guard.push((dim, table));
        table
    }

    pub fn build(dim: usize, radius: i64) -> LatticeGreenTable {
        let d = dim as f64;
        let extent = radius as usize + 1;
        let max_n = radius as u32;
        // Horizon covering the worst offset in the table.
        let far = d * (radius as f64) * (radius as f64);
        let mut horizon = (8.0 * d * (far / d + 25.0)).max(512.0);
        loop {
            let probe: Vec<u32> = vec![max_n; dim];
            let (tail, err) = tail_integral(dim, &probe, horizon);
            if err < 1e-13 * (tail.abs() + 0.1) {
                break;
            }
            horizon *= 4.0;
        }
        let nodes = quad_nodes(horizon);
        // Precompute ib(n, t/d) for all n in the table at every node.
        let mut bessel = vec![0.0f64; nodes.len() * extent];
        for (ti, (t, _)) in nodes.iter().enumerate() {
            let z = t / d;
            let m = bessel_nodes(max_n, z);
            // One pass over theta accumulating every order via the cosine
            // recurrence.
            let mut acc = vec![0.0f64; extent];
            // Endpoint contributions of the trapezoid rule.
            for (n, a) in acc.iter_mut().enumerate() {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                *a = 0.5 * (1.0 + (-2.0 * z).exp() * sign);
            }
            for i in 1..m {
                let theta = std::f64::consts::PI * i as f64 / m as f64;
                let e = (z * (theta.cos() - 1.0)).exp();
                let c1 = theta.cos();
                let mut ckm1 = 1.0; // cos(0)
                let mut ck = c1; // cos(theta)
                acc[0] += e;
                if extent > 1 {
                    acc[1] += e * ck;
                }
                for a in acc.iter_mut().take(extent).skip(2) {
                    let next = 2.0 * c1 * ck - ckm1;
                    ckm1 = ck;
                    ck = next;
                    *a += e * ck;
                }
            }
            for (n, a) in acc.iter().enumerate() {
                bessel[ti * extent + n] = a / m as f64;
            }
        }
        // Assemble values for every offset in the cube.
        let total = extent.pow(dim as u32);
        let mut values = vec![0.0f64; total];
        let mut idx = vec![0usize; dim];
        for lin in 0..total {
            let mut rem = lin;
            for v in idx.iter_mut() {
                *v = rem % extent;
                rem /= extent;
            }
            // Only compute canonical sorted offsets; fill the rest by symmetry.
            let mut sorted = idx.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            if sorted != idx {
                continue;
            }
            let offsets: Vec<u32> = idx.iter().map(|&v| v as u32).collect();
            let mut sum = 0.0;
            for (ti, (_, w)) in nodes.iter().enumerate() {
                let mut f = *w;
                for &n in &offsets {
                    f *= bessel[ti * extent + n as usize];
                }
                sum += f;
            }
            let (tail, _) = tail_integral(dim, &offsets, horizon);
            values[lin] = sum + tail;
        }
        // Symmetry fill.
        for lin in 0..total {
            let mut rem = lin;
            for v in idx.iter_mut() {
                *v = rem % extent;
                rem /= extent;
            }
            let mut sorted = idx.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            if sorted != idx {
                let mut src = 0usize;
                for k in (0..dim).rev() {
                    src = src * extent + sorted[k];
                }
                values[lin] = values[src];
            }
        }
        LatticeGreenTable {
            dim,
            radius,
            values,
            extent,
        }
    }

    /// `G(x)` with the far-field replacement `d g(x)` outside the table.
    #[inline]
    pub fn at_offset(&self, offset: &[i64]) -> f64 {
        let mut lin = 0usize;
        let mut inside = true;
        let mut r2 = 0.0f64;
        for k in (0..self.dim).rev() {
            let a = offset[k].unsigned_abs() as usize;
            if a > self.radius as usize {
                inside = false;
            }
            r2 += (offset[k] * offset[k]) as f64;
            if inside {
                lin = lin * self.extent + a;
            }
        }
        if inside {
            self.values[lin]
        } else {
            self.dim as f64 * brownian_green(self.dim, r2.sqrt())
        }
    }

    pub fn at(&self, x: &LatticePoint, y: &LatticePoint) -> f64 {
        let mut off = [0i64; crate::point::MAX_DIM];
        for k in 0..self.dim {
            off[k] = x.get(k) - y.get(k);
        }
        self.at_offset(&off[..self.dim])
    }

    pub fn at_origin(&self) -> f64 {
        self.at_offset(&vec![0; self.dim])
    }
}

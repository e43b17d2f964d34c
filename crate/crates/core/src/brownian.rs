//! Seeded Brownian paths, hitting estimators, and soft-obstacle functionals.
//!
//! Paths are Euler walks with per-path counter-based streams. Hitting
//! probabilities get a Brownian-bridge crossing correction per step plus
//! step refinement near the target (a bare Euler walk systematically
//! underestimates hitting). For pure hitting probabilities of box/ball
//! unions in d = 3 there is a walk-on-spheres fast path, cross-validated
//! against the Euler estimator in tests.
//!
//! Infinite-horizon quantities are reported as (truncated estimate,
//! remainder bound) pairs: transience makes the truncation small but it is
//! never silently dropped.

use crate::density::class_membership;
use crate::error::{Error, Result};
use crate::geometry::{CompactSetSpec, DyadicIndicator, Side};
use crate::point::Point;
use crate::rng::Stream;
use crate::stats::Estimate;
use rayon::prelude::*;

/// A stored discretized Brownian path with bridge-refinement support.
#[derive(Clone, Debug)]
pub struct PathSample {
    pub dim: usize,
    pub start: Point,
    pub dt: f64,
    /// Flat positions, `steps + 1` points of `dim` coordinates.
    pub positions: Vec<f64>,
    stream: Stream,
}

impl PathSample {
    /// Wrap explicit positions (deterministic test paths and fixtures).
    pub fn from_positions(start: Point, dt: f64, positions: Vec<f64>, stream: Stream) -> PathSample {
        PathSample {
            dim: start.dim(),
            start,
            dt,
            positions,
            stream,
        }
    }

    pub fn generate(start: Point, dt: f64, steps: usize, stream: Stream) -> PathSample {
        assert!(dt > 0.0);
        let dim = start.dim();
        let mut positions = Vec::with_capacity((steps + 1) * dim);
        positions.extend_from_slice(start.as_slice());
        let mut inc = stream.derive_str("increments");
        let sd = dt.sqrt();
        let mut x = start;
        for _ in 0..steps {
            for k in 0..dim {
                x.set(k, x.get(k) + sd * inc.normal());
            }
            positions.extend_from_slice(x.as_slice());
        }
        PathSample {
            dim,
            start,
            dt,
            positions,
            stream,
        }
    }

    pub fn steps(&self) -> usize {
        self.positions.len() / self.dim - 1
    }

    pub fn position(&self, i: usize) -> Point {
        Point::from_slice(&self.positions[i * self.dim..(i + 1) * self.dim])
    }

    pub fn time_of(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Brownian-bridge midpoint of a sub-segment; the refinement draw
    /// depends only on (path stream, step, tree node), so refinement is
    /// deterministic and independent of query order.
    pub fn bridge_midpoint(&self, step: usize, node: u64, a: &Point, b: &Point, dt_seg: f64) -> Point {
        let mut s = self
            .stream
            .derive_str("bridge")
            .derive(step as u64)
            .derive(node);
        let mut mid = Point::zero(self.dim);
        let sd = (dt_seg / 4.0).sqrt();
        for k in 0..self.dim {
            mid.set(k, 0.5 * (a.get(k) + b.get(k)) + sd * s.normal());
        }
        mid
    }
}

/// Deterministic derivation of the per-path stream.
pub fn path_stream(master: Stream, path_index: u64) -> Stream {
    master.derive_str("path").derive(path_index)
}

/// Generate a PathSample for path `index` under a master stream.
pub fn sample_path(start: Point, dt: f64, steps: usize, master: Stream, index: u64) -> PathSample {
    PathSample::generate(start, dt, steps, path_stream(master, index))
}

/// First time the path moves at sup-distance `r` from its start, refined by
/// recursive bridge subdivision until the straddling segment is shorter
/// than `r * 1e-3`, then located by linear interpolation. `None` when the
/// stored path never reaches distance `r`.
pub fn stop_tau(path: &PathSample, r: f64) -> Option<f64> {
    assert!(r > 0.0);
    let n = path.steps();
    let start = path.start;
    let mut prev = start;
    for i in 1..=n {
        let cur = path.position(i);
        if cur.dist_sup(&start) >= r {
            let tol = r * 1e-3;
            let mut a = prev;
            let mut b = cur;
            let mut t_a = path.time_of(i - 1);
            let mut dt_seg = path.dt;
            let mut node = 1u64;
            for _ in 0..40 {
                if a.dist_sup(&b) <= tol {
                    break;
                }
                let mid = path.bridge_midpoint(i - 1, node, &a, &b, dt_seg);
                dt_seg *= 0.5;
                if mid.dist_sup(&start) >= r {
                    b = mid;
                    node = 2 * node;
                } else {
                    a = mid;
                    t_a += dt_seg;
                    node = 2 * node + 1;
                }
            }
            let da = a.dist_sup(&start);
            let db = b.dist_sup(&start);
            let frac = if db > da { (r - da) / (db - da) } else { 1.0 };
            return Some(t_a + frac.clamp(0.0, 1.0) * dt_seg);
        }
        prev = cur;
    }
    None
}

/// Stopping fence for hitting experiments.
#[derive(Clone, Copy, Debug)]
pub enum FenceSpec {
    /// Sup-norm move radius from the start point.
    MoveRadius(f64),
    /// Euclidean kill sphere around the origin.
    KillSphere(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct HitEstimate {
    pub probability: f64,
    pub se: f64,
    /// Upper bound on the truncated-at-the-fence remainder.
    pub remainder: f64,
    pub paths: usize,
}

/// Euclidean bounding radius of a target around the origin.
fn target_bounding_radius(target: &CompactSetSpec) -> Result<f64> {
    let bb = target.bounding_box()?;
    let mut r2: f64 = 0.0;
    for mask in 0..(1usize << bb.dim()) {
        let mut s = 0.0;
        for k in 0..bb.dim() {
            let c = if mask >> k & 1 == 1 { bb.hi.get(k) } else { bb.lo.get(k) };
            s += c * c;
        }
        r2 = r2.max(s);
    }
    Ok(r2.sqrt())
}

/// Remainder bound after escaping to Euclidean radius `r_out`: in d = 3 the
/// return probability is at most `r_ball / (r_out - r_ball)`, with `r_ball`
/// the circumscribed ball radius of the target.
fn escape_remainder(target: &CompactSetSpec, r_out: f64) -> Result<f64> {
    let rb = target_bounding_radius(target)?;
    if r_out <= 2.0 * rb {
        return Ok(1.0);
    }
    Ok((rb / (r_out - rb)).min(1.0))
}

fn target_is_polar(target: &CompactSetSpec) -> bool {
    target.shapes.iter().all(|s| {
        let e = s.extent();
        (0..e.dim()).all(|k| e.hi.get(k) - e.lo.get(k) <= 0.0)
    })
}

/// Monte Carlo estimate of `P[H_target < fence]` by Euler stepping with a
/// Brownian-bridge crossing correction and near-target step refinement.
pub fn hit_before(
    start: &Point,
    dt: f64,
    target: &CompactSetSpec,
    fence: FenceSpec,
    n_paths: usize,
    master: Stream,
) -> Result<HitEstimate> {
    if target_is_polar(target) {
        return Err(Error::PolarTarget);
    }
    let dim = start.dim();
    let hits: usize = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut s = path_stream(master, i as u64).derive_str("euler");
            euler_hit(start, dt, target, fence, &mut s, dim) as usize
        })
        .sum();
    let est = Estimate::from_successes(hits, n_paths);
    let remainder = match fence {
        FenceSpec::KillSphere(r) => escape_remainder(target, r)?,
        FenceSpec::MoveRadius(_) => 0.0,
    };
    Ok(HitEstimate {
        probability: est.mean,
        se: est.se,
        remainder,
        paths: n_paths,
    })
}

fn euler_hit(
    start: &Point,
    dt: f64,
    target: &CompactSetSpec,
    fence: FenceSpec,
    s: &mut Stream,
    dim: usize,
) -> bool {
    let mut x = *start;
    let mut d_prev = target.dist_euclid_lower(&x);
    if d_prev <= 0.0 {
        return true;
    }
    let refine_scale = 4.0 * (dim as f64 * dt).sqrt();
    loop {
        // Refine the step while close to the target.
        let mut dt_c = dt;
        while d_prev < refine_scale * (dt_c / dt).sqrt() && dt_c > dt / 64.0 {
            dt_c *= 0.25;
        }
        let sd = dt_c.sqrt();
        let mut y = x;
        for k in 0..dim {
            y.set(k, x.get(k) + sd * s.normal());
        }
        let d_next = target.dist_euclid_lower(&y);
        if d_next <= 0.0 {
            return true;
        }
        // Bridge crossing probability for a locally flat boundary.
        let p_cross = (-2.0 * d_prev * d_next / dt_c).exp();
        if s.uniform() < p_cross {
            return true;
        }
        match fence {
            FenceSpec::MoveRadius(r) => {
                if y.dist_sup(start) >= r {
                    return false;
                }
            }
            FenceSpec::KillSphere(r) => {
                if y.norm_euclid() >= r {
                    return false;
                }
            }
        }
        x = y;
        d_prev = d_next;
    }
}

/// Walk-on-spheres estimate of `P[H_target < infinity]` with a kill sphere
/// at `r_out` and the escape remainder reported.
pub fn hit_probability_wos(
    start: &Point,
    target: &CompactSetSpec,
    r_out: f64,
    n_paths: usize,
    master: Stream,
) -> Result<HitEstimate> {
    if target_is_polar(target) {
        return Err(Error::PolarTarget);
    }
    let bb = target.bounding_box()?;
    let mut diam: f64 = 0.0;
    for k in 0..bb.dim() {
        diam = diam.max(bb.hi.get(k) - bb.lo.get(k));
    }
    let shell = 1e-4 * diam.max(1e-12);
    let dim = start.dim();
    let hits: usize = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut s = path_stream(master, i as u64).derive_str("wos");
            let mut x = *start;
            let mut dir = [0.0f64; crate::point::MAX_DIM];
            loop {
                let d_t = target.dist_euclid_lower(&x);
                if d_t <= shell {
                    return 1usize;
                }
                let norm = x.norm_euclid();
                if norm >= r_out {
                    return 0;
                }
                let rho = d_t.min(r_out - norm);
                s.unit_vector(dim, &mut dir[..dim]);
                for k in 0..dim {
                    x.set(k, x.get(k) + rho * dir[k]);
                }
            }
        })
        .sum();
    let est = Estimate::from_successes(hits, n_paths);
    Ok(HitEstimate {
        probability: est.mean,
        se: est.se,
        remainder: escape_remainder(target, r_out)?,
        paths: n_paths,
    })
}

/// Certification record for membership of a porous interface in the class
/// felt with strength `eta` within distance `epsilon` of every point of
/// the segmentation boundary.
#[derive(Clone, Debug)]
pub struct PorousInterfaceSpec {
    pub epsilon: f64,
    pub eta: f64,
    /// Per-boundary-point estimates of `P[H_Sigma < tau_eps]`.
    pub point_estimates: Vec<(Point, Estimate)>,
    pub min_estimate: f64,
    pub min_se: f64,
    /// Points whose estimate fails `eta` by more than 3 SE.
    pub failing: Vec<Point>,
}

impl PorousInterfaceSpec {
    pub fn certified(&self) -> bool {
        self.failing.is_empty()
    }
}

/// Estimate the interface-class membership on a boundary point cloud of
/// spacing at most `epsilon / 4`.
pub fn certify_interface(
    sigma: &CompactSetSpec,
    domain: &DyadicIndicator,
    epsilon: f64,
    eta: f64,
    n_paths: usize,
    master: Stream,
) -> Result<PorousInterfaceSpec> {
    let cloud = domain.boundary_points(epsilon / 4.0);
    if cloud.is_empty() {
        return Err(Error::geometry("domain has no extractable boundary"));
    }
    let dt = (epsilon / 20.0) * (epsilon / 20.0);
    let estimates: Vec<(Point, Estimate)> = cloud
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let sub = master.derive_str("certify").derive(i as u64);
            let hits: usize = (0..n_paths)
                .map(|p| {
                    let mut s = path_stream(sub, p as u64).derive_str("euler");
                    euler_hit(x, dt, sigma, FenceSpec::MoveRadius(epsilon), &mut s, x.dim()) as usize
                })
                .sum();
            (*x, Estimate::from_successes(hits, n_paths))
        })
        .collect();
    let mut min_estimate = f64::INFINITY;
    let mut min_se = 0.0;
    let mut failing = Vec::new();
    for (x, e) in &estimates {
        if e.mean < min_estimate {
            min_estimate = e.mean;
            min_se = e.se;
        }
        if e.mean < eta - 3.0 * e.se {
            failing.push(*x);
        }
    }
    Ok(PorousInterfaceSpec {
        epsilon,
        eta,
        point_estimates: estimates,
        min_estimate,
        min_se,
        failing,
    })
}

/// One row of a solidification sweep.
#[derive(Clone, Debug)]
pub struct SolidificationRow {
    pub label: String,
    pub epsilon: f64,
    /// `epsilon * 2^ell_star`, the small parameter of the sweep.
    pub scale_ratio: f64,
    pub escape_probability_sup: f64,
    pub se_max: f64,
    pub remainder: f64,
}

/// Estimate `sup_x P_x[H_Sigma = infinity]` (truncated proxy) over the
/// starting points of a certified family member.
pub fn solidification_member(
    label: &str,
    sigma: &CompactSetSpec,
    domain: &DyadicIndicator,
    ell_star: i32,
    epsilon: f64,
    starts: &[Point],
    r_out: f64,
    n_paths: usize,
    master: Stream,
) -> Result<SolidificationRow> {
    let a = CompactSetSpec::from_boxes(
        starts
            .iter()
            .map(|p| crate::geometry::AlignedBox::new(*p, *p))
            .collect(),
    );
    let membership = class_membership(domain, &a, ell_star)?;
    if !membership.certified() {
        return Err(Error::Uncertified(format!(
            "start points not certified at level {ell_star}"
        )));
    }
    let mut escape_sup = 0.0f64;
    let mut se_max = 0.0f64;
    let mut remainder = 0.0f64;
    for (i, x) in starts.iter().enumerate() {
        let est = hit_probability_wos(x, sigma, r_out, n_paths, master.derive(i as u64))?;
        escape_sup = escape_sup.max(1.0 - est.probability);
        se_max = se_max.max(est.se);
        remainder = remainder.max(est.remainder);
    }
    Ok(SolidificationRow {
        label: label.to_string(),
        epsilon,
        scale_ratio: epsilon * (2.0f64).powi(ell_star),
        escape_probability_sup: escape_sup,
        se_max,
        remainder,
    })
}

/// Nonnegative potential fields for the soft-obstacle functional.
#[derive(Clone, Debug)]
pub enum SoftObstacle<'a> {
    Constant(f64),
    /// `(a / eps^2) * 1{d(x, S) <= eps}` for the interface of a domain.
    NearInterface {
        domain: &'a DyadicIndicator,
        epsilon: f64,
        strength: f64,
    },
    /// Grid-constant values on a cubic raster; zero outside.
    GridField {
        lo: Point,
        cell: f64,
        extent: Vec<usize>,
        values: &'a [f64],
    },
}

impl SoftObstacle<'_> {
    pub fn value(&self, x: &Point) -> f64 {
        match self {
            SoftObstacle::Constant(v) => *v,
            SoftObstacle::NearInterface {
                domain,
                epsilon,
                strength,
            } => {
                // Within eps of S iff B(x, eps) holds volume on both sides.
                let dim = domain.dim() as i32;
                let full = (2.0 * epsilon).powi(dim);
                let v0 = domain.clip_volume(x, *epsilon, Side::U0);
                if v0 > 1e-12 * full && v0 < full * (1.0 - 1e-12) {
                    strength / (epsilon * epsilon)
                } else {
                    0.0
                }
            }
            SoftObstacle::GridField {
                lo,
                cell,
                extent,
                values,
            } => {
                let mut lin = 0usize;
                for k in (0..lo.dim()).rev() {
                    let c = ((x.get(k) - lo.get(k)) / cell).floor();
                    if c < 0.0 || c >= extent[k] as f64 {
                        return 0.0;
                    }
                    lin = lin * extent[k] + c as usize;
                }
                values[lin]
            }
        }
    }
}

/// Integration horizon for the soft-obstacle functional.
#[derive(Clone, Copy, Debug)]
pub enum Horizon {
    FixedTime(f64),
    /// Until the sup-move radius `r` (tau_r).
    MoveRadius(f64),
    /// Until leaving the Euclidean ball of radius `r`; stands in for the
    /// infinite horizon, with the escape mass reported as the remainder.
    UntilFar(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct FeynmanKacEstimate {
    pub value: f64,
    pub se: f64,
    pub remainder: f64,
    pub paths: usize,
}

/// Monte Carlo estimate of `E[exp(-int_0^horizon V(X_s) ds)]` with
/// trapezoidal accumulation of the occupation integral.
pub fn feynman_kac(
    start: &Point,
    dt: f64,
    v: &SoftObstacle<'_>,
    horizon: Horizon,
    n_paths: usize,
    master: Stream,
) -> Result<FeynmanKacEstimate> {
    let dim = start.dim();
    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut s = path_stream(master, i as u64).derive_str("fk");
            let sd = dt.sqrt();
            let mut x = *start;
            let mut v_prev = v.value(&x);
            let mut integral = 0.0;
            let mut t = 0.0;
            loop {
                match horizon {
                    Horizon::FixedTime(tmax) => {
                        if t >= tmax - 1e-15 {
                            break;
                        }
                    }
                    Horizon::MoveRadius(r) => {
                        if x.dist_sup(start) >= r {
                            break;
                        }
                    }
                    Horizon::UntilFar(r) => {
                        if x.norm_euclid() >= r {
                            break;
                        }
                    }
                }
                let step = match horizon {
                    Horizon::FixedTime(tmax) => dt.min(tmax - t),
                    _ => dt,
                };
                let mut y = x;
                for k in 0..dim {
                    y.set(k, x.get(k) + sd * s.normal());
                }
                let v_next = v.value(&y);
                integral += 0.5 * (v_prev + v_next) * step;
                x = y;
                v_prev = v_next;
                t += step;
                if integral > 60.0 {
                    // exp(-60) is below any resolvable contribution.
                    return 0.0;
                }
            }
            (-integral).exp()
        })
        .collect();
    let est = Estimate::from_samples(&samples);
    let remainder = match horizon {
        // The walk may return to the support of V after the fence; without
        // target geometry this is bounded by the escape mass itself.
        Horizon::UntilFar(_) => est.mean.min(1.0),
        _ => 0.0,
    };
    Ok(FeynmanKacEstimate {
        value: est.mean,
        se: est.se,
        remainder,
        paths: n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AlignedBox;

    fn p3(x: f64, y: f64, z: f64) -> Point {
        Point::from_slice(&[x, y, z])
    }

    #[test]
    fn paths_reproducible_and_unbiased() {
        let master = Stream::new(42);
        let a = sample_path(Point::zero(3), 0.01, 50, master, 7);
        let b = sample_path(Point::zero(3), 0.01, 50, master, 7);
        assert_eq!(a.positions, b.positions);

        let n = 20_000;
        let sums: (f64, f64) = (0..n)
            .map(|i| {
                let p = sample_path(Point::zero(3), 0.01, 20, master, i);
                let e = p.position(20);
                (e.get(0), e.get(0) * e.get(0))
            })
            .fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
        let mean = sums.0 / n as f64;
        let var = sums.1 / n as f64;
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn endpoint_variance_identity() {
        // E|X_n - x0|^2 = d n dt within 1%.
        let master = Stream::new(5);
        let (steps, dt) = (25usize, 0.02f64);
        let n = 200_000;
        let total: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = path_stream(master, i as u64).derive_str("increments");
                let sd = dt.sqrt();
                let mut x = [0.0f64; 3];
                for _ in 0..steps {
                    for v in x.iter_mut() {
                        *v += sd * s.normal();
                    }
                }
                x.iter().map(|v| v * v).sum::<f64>()
            })
            .sum();
        let measured = total / n as f64;
        let expect = 3.0 * steps as f64 * dt;
        assert!(
            (measured / expect - 1.0).abs() < 0.01,
            "measured {measured} expect {expect}"
        );
    }

    #[test]
    fn stop_tau_deterministic_cases() {
        let flat = PathSample {
            dim: 3,
            start: Point::zero(3),
            dt: 0.1,
            positions: vec![0.0; 3 * 11],
            stream: Stream::new(1),
        };
        assert!(stop_tau(&flat, 0.5).is_none());

        let mut positions = Vec::new();
        for i in 0..=10 {
            positions.extend_from_slice(&[i as f64 * 0.1, 0.0, 0.0]);
        }
        let ramp = PathSample {
            dim: 3,
            start: Point::zero(3),
            dt: 1.0,
            positions,
            stream: Stream::new(2),
        };
        let t = stop_tau(&ramp, 0.45).unwrap();
        assert!(t > 4.0 && t <= 5.0, "t = {t}");
    }

    #[test]
    fn stop_tau_scales_quadratically_same_seed() {
        // Doubling space and quadrupling time on the same draws scales the
        // refined crossing time exactly by 4.
        let master = Stream::new(9);
        for i in 0..50 {
            let p1 = sample_path(Point::zero(3), 0.01, 400, master, i);
            let mut p2 = p1.clone();
            p2.dt = 0.04;
            for v in p2.positions.iter_mut() {
                *v *= 2.0;
            }
            if let Some(t1) = stop_tau(&p1, 0.5) {
                let t2 = stop_tau(&p2, 1.0).expect("scaled path must cross too");
                assert!(
                    (t2 - 4.0 * t1).abs() < 1e-9 * t2.max(1.0),
                    "t1 {t1} t2 {t2}"
                );
            }
        }
    }

    #[test]
    fn mean_tau_scales_like_r_squared() {
        // Measure each radius at its own matched resolution dt = (r/50)^2
        // on independent seed banks; the means must scale like r^2.
        let measure = |r: f64, seed: u64, n: usize| -> f64 {
            let master = Stream::new(seed);
            let dt = (r / 50.0) * (r / 50.0);
            let total: f64 = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut s = path_stream(master, i as u64).derive_str("increments");
                    let sd = dt.sqrt();
                    let mut x = [0.0f64; 3];
                    let mut prev = 0.0f64;
                    let mut t = 0.0;
                    loop {
                        for v in x.iter_mut() {
                            *v += sd * s.normal();
                        }
                        t += dt;
                        let m = x.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
                        if m >= r {
                            let frac = if m > prev { (r - prev) / (m - prev) } else { 1.0 };
                            return t - dt + frac.clamp(0.0, 1.0) * dt;
                        }
                        prev = m;
                    }
                })
                .sum();
            total / n as f64
        };
        let n = 100_000;
        let mean1 = measure(0.4, 101, n);
        let mean2 = measure(0.8, 202, n);
        let ratio = mean2 / mean1;
        assert!((ratio - 4.0).abs() < 0.08, "ratio {ratio}");
    }

    #[test]
    fn hit_inside_target_is_certain() {
        let target = CompactSetSpec::from_balls(vec![(Point::zero(3), 1.0)]);
        let est = hit_before(
            &p3(0.2, 0.0, 0.0),
            1e-3,
            &target,
            FenceSpec::MoveRadius(3.0),
            200,
            Stream::new(3),
        )
        .unwrap();
        assert_eq!(est.probability, 1.0);
    }

    #[test]
    fn polar_target_rejected() {
        let target = CompactSetSpec::single_point(Point::zero(3));
        assert!(matches!(
            hit_before(
                &p3(1.0, 0.0, 0.0),
                1e-3,
                &target,
                FenceSpec::MoveRadius(2.0),
                10,
                Stream::new(1)
            ),
            Err(Error::PolarTarget)
        ));
    }

    #[test]
    fn ball_hitting_probability_analytic() {
        // P[hit B(0, rho) from |x| = R] = rho / R in d = 3.
        let rho = 0.5;
        let target = CompactSetSpec::from_balls(vec![(Point::zero(3), rho)]);
        let x = p3(2.0, 0.0, 0.0);
        let wos = hit_probability_wos(&x, &target, 600.0, 40_000, Stream::new(17)).unwrap();
        let expect = rho / 2.0;
        assert!(
            (wos.probability - expect).abs() < 3.0 * wos.se + wos.remainder + 0.005,
            "wos {} expect {expect} (se {}, rem {})",
            wos.probability,
            wos.se,
            wos.remainder
        );
        let euler = hit_before(
            &x,
            5e-4,
            &target,
            FenceSpec::KillSphere(25.0),
            800,
            Stream::new(19),
        )
        .unwrap();
        assert!(
            (euler.probability - expect).abs() < 3.0 * euler.se + euler.remainder + 0.02,
            "euler {} expect {expect} (se {}, rem {})",
            euler.probability,
            euler.se,
            euler.remainder
        );
    }

    #[test]
    fn face_exit_symmetry() {
        // Each face of a cube catches the exit with probability 1/6.
        let master = Stream::new(23);
        let n = 30_000;
        let hits: usize = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = path_stream(master, i as u64).derive_str("face");
                let mut x = [0.0f64; 3];
                let dt = 4e-4f64;
                let sd = dt.sqrt();
                loop {
                    for v in x.iter_mut() {
                        *v += sd * s.normal();
                    }
                    let m = x.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
                    if m >= 1.0 {
                        let kmax = (0..3)
                            .max_by(|&a, &b| x[a].abs().partial_cmp(&x[b].abs()).unwrap())
                            .unwrap();
                        return (kmax == 0 && x[0] > 0.0) as usize;
                    }
                }
            })
            .sum();
        let est = Estimate::from_successes(hits, n);
        assert!(
            (est.mean - 1.0 / 6.0).abs() < 4.0 * est.se,
            "p {} se {}",
            est.mean,
            est.se
        );
    }

    #[test]
    fn feynman_kac_zero_potential_is_one() {
        let est = feynman_kac(
            &Point::zero(3),
            0.01,
            &SoftObstacle::Constant(0.0),
            Horizon::FixedTime(1.0),
            50,
            Stream::new(2),
        )
        .unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.se, 0.0);
    }

    #[test]
    fn feynman_kac_constant_potential() {
        let lambda = 0.7;
        let t = 1.3;
        let est = feynman_kac(
            &Point::zero(3),
            0.01,
            &SoftObstacle::Constant(lambda),
            Horizon::FixedTime(t),
            50,
            Stream::new(2),
        )
        .unwrap();
        assert!(
            (est.value - (-lambda * t).exp()).abs() < 1e-9,
            "value {}",
            est.value
        );
    }

    #[test]
    fn certify_enclosing_interface() {
        // Sigma containing an eps/2-neighborhood of S certifies any eta
        // bounded away from 1.
        let domain = crate::geometry::fixture(&crate::geometry::Fixture::Shell {
            dim: 3,
            r: 1.0,
            thickness: 0.5,
        })
        .unwrap();
        let eps = 0.25;
        let sigma = CompactSetSpec::from_boxes(vec![AlignedBox::new(
            p3(-1.2, -1.2, -1.2),
            p3(1.2, 1.2, 1.2),
        )]);
        let spec = certify_interface(&sigma, &domain, eps, 0.9, 200, Stream::new(4)).unwrap();
        assert!(spec.certified(), "min {}", spec.min_estimate);
        assert!(spec.min_estimate > 0.99);
    }
}

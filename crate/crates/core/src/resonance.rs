//! Scale ladders, resonance sets, crossing trackers along paths, and the
//! avoidance-probability machinery.
//!
//! A resonance point is one where, among a ladder of well-separated dyadic
//! levels, at least `strength` of the wide densities land in the balanced
//! band `[alpha, 1 - alpha]` with `alpha = 4^-d / 3`. Such points are hard
//! for Brownian motion started deep inside the set to avoid.

use crate::brownian::{path_stream, PathSample};
use crate::density::{averaging_constant, class_membership, local_density, wide_density};
use crate::error::{Error, Result};
use crate::geometry::{CompactSetSpec, DyadicIndicator};
use crate::point::Point;
use crate::rng::Stream;
use crate::stats::Estimate;
use rayon::prelude::*;

/// The balanced-band margin `4^-d / 3`.
pub fn balance_margin(dim: usize) -> f64 {
    (4.0f64).powi(-(dim as i32)) / 3.0
}

/// The smallest admissible level separation for a ladder of strength `j`:
/// the least integer `L >= 5` with `c0 * 2^-L <= 1 / (200 j)`.
pub fn min_separation(dim: usize, strength: u32) -> i32 {
    let c0 = averaging_constant(dim);
    let mut sep = 5i32;
    while c0 * (2.0f64).powi(-sep) > 1.0 / (200.0 * strength as f64) {
        sep += 1;
    }
    sep
}

/// The target band at stage `j` of a chain of strength `big_j`:
/// `[1/2 - j/(100 J), 1/2 + j/(100 J)]`.
pub fn target_band(j: u32, big_j: u32) -> (f64, f64) {
    let w = j as f64 / (100.0 * big_j as f64);
    (0.5 - w, 0.5 + w)
}

/// The parameter pack of a resonance experiment: base level, separation,
/// strength, and the inspected/anchor level sets.
#[derive(Clone, Debug)]
pub struct ScaleLadder {
    pub dim: usize,
    pub ell_star: i32,
    /// Resonance strength (number of balanced levels demanded).
    pub strength: u32,
    /// Level separation; at least `min_separation(dim, strength)`.
    pub sep: i32,
    /// Number of anchor levels inspected.
    pub count: u32,
    /// Smallest multiple of `(strength + 1) * sep` at or above `ell_star`.
    pub base_level: i32,
    /// All inspected levels: multiples of `sep` in the ladder window.
    pub inspect: Vec<i32>,
    /// Anchor levels: multiples of `(strength + 1) * sep` in the window.
    pub anchors: Vec<i32>,
    pub alpha: f64,
}

impl ScaleLadder {
    pub fn new(dim: usize, ell_star: i32, strength: u32, sep: Option<i32>, count: u32) -> Result<Self> {
        if strength < 1 || count < 1 {
            return Err(Error::parameter("ladder needs strength >= 1 and count >= 1"));
        }
        if ell_star < 0 {
            return Err(Error::parameter("ell_star must be nonnegative"));
        }
        let min_sep = min_separation(dim, strength);
        let sep = match sep {
            Some(s) if s < min_sep => {
                return Err(Error::parameter(format!(
                    "separation {s} below the admissible minimum {min_sep}"
                )));
            }
            Some(s) => s,
            None => min_sep,
        };
        let block = (strength as i32 + 1) * sep;
        let base_level = (ell_star + block - 1) / block * block;
        let hi = base_level + count as i32 * block;
        let inspect: Vec<i32> = (0..)
            .map(|i| i * sep)
            .skip_while(|&l| l < base_level)
            .take_while(|&l| l < hi)
            .collect();
        let anchors: Vec<i32> = (0..)
            .map(|i| i * block)
            .skip_while(|&l| l < base_level)
            .take_while(|&l| l < hi)
            .collect();
        debug_assert_eq!(inspect.len(), (count * (strength + 1)) as usize);
        debug_assert_eq!(anchors.len(), count as usize);
        Ok(ScaleLadder {
            dim,
            ell_star,
            strength,
            sep,
            count,
            base_level,
            inspect,
            anchors,
            alpha: balance_margin(dim),
        })
    }

    /// Intermediate labels of a label set: `{l + j * sep, 1 <= j <= strength}`.
    pub fn intermediate_labels(&self, labels: &[i32]) -> Vec<i32> {
        let mut out = Vec::new();
        for &l in labels {
            for j in 1..=self.strength as i32 {
                out.push(l + j * self.sep);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Full label set: labels plus their intermediates.
    pub fn full_labels(&self, labels: &[i32]) -> Vec<i32> {
        let mut out = labels.to_vec();
        out.extend(self.intermediate_labels(labels));
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Count of balanced inspected levels at `x`, and resonance membership
/// (count at least the ladder strength).
pub fn resonance_membership(
    domain: &DyadicIndicator,
    ladder: &ScaleLadder,
    x: &Point,
) -> Result<(usize, bool)> {
    let mut count = 0usize;
    for &l in &ladder.inspect {
        let v = wide_density(domain, x, l)?;
        if v >= ladder.alpha && v <= 1.0 - ladder.alpha {
            count += 1;
        }
    }
    Ok((count, count >= ladder.strength as usize))
}

/// An ordered record of first-crossing times of the half-density level
/// sets along a path, with distinct labels (the greedy scheme).
#[derive(Clone, Debug)]
pub struct CrossingRecord {
    pub times: Vec<f64>,
    pub labels: Vec<i32>,
    pub positions: Vec<Point>,
    /// False when the path ended before all labels were crossed.
    pub complete: bool,
}

const CROSSING_TOL: f64 = 1e-6;

/// Track the greedy label family along a stored path: the first stopping
/// time is the first time any label's narrow density reaches 1/2, taking
/// the largest such label; subsequent times scan the remaining labels.
pub fn track_crossings(
    path: &PathSample,
    domain: &DyadicIndicator,
    labels: &[i32],
) -> Result<CrossingRecord> {
    let mut remaining: Vec<i32> = labels.to_vec();
    remaining.sort_unstable();
    remaining.dedup();
    for &l in &remaining {
        let v = local_density(domain, &path.start, l)?;
        if v > 0.5 {
            return Err(Error::Uncertified(format!(
                "start density {v} > 1/2 at level {l}"
            )));
        }
    }
    let mut times = Vec::new();
    let mut out_labels = Vec::new();
    let mut positions = Vec::new();
    let mut seg_start = 0usize;
    let mut within = 0.0f64; // crossing offset inside the segment, in [0,1]
    while !remaining.is_empty() {
        let mut found: Option<(usize, f64, i32, Point)> = None;
        'segments: for i in seg_start..path.steps() {
            let a = path.position(i);
            let b = path.position(i + 1);
            let lo_frac = if i == seg_start { within } else { 0.0 };
            // Earliest crossing among remaining labels in this segment.
            let mut best: Option<(f64, i32, Point)> = None;
            for &l in &remaining {
                if let Some((frac, p)) = segment_crossing(domain, &a, &b, l, lo_frac)? {
                    match best {
                        Some((bf, bl, _)) if (frac, l) >= (bf, bl) && frac > bf => {}
                        Some((bf, bl, _)) if frac == bf && l < bl => {}
                        _ => best = Some((frac, l, p)),
                    }
                }
            }
            if let Some((frac, l, p)) = best {
                found = Some((i, frac, l, p));
                break 'segments;
            }
        }
        match found {
            Some((i, frac, l, p)) => {
                times.push((i as f64 + frac) * path.dt);
                out_labels.push(l);
                positions.push(p);
                remaining.retain(|&r| r != l);
                seg_start = i;
                within = frac;
            }
            None => {
                return Ok(CrossingRecord {
                    times,
                    labels: out_labels,
                    positions,
                    complete: false,
                })
            }
        }
    }
    Ok(CrossingRecord {
        times,
        labels: out_labels,
        positions,
        complete: true,
    })
}

/// First parameter in `(lo_frac, 1]` where the narrow density at `level`
/// reaches 1/2 along the straight segment `a -> b`, located by bisection.
fn segment_crossing(
    domain: &DyadicIndicator,
    a: &Point,
    b: &Point,
    level: i32,
    lo_frac: f64,
) -> Result<Option<(f64, Point)>> {
    let eval = |frac: f64| -> Result<f64> {
        let mut p = *a;
        for k in 0..a.dim() {
            p.set(k, a.get(k) + frac * (b.get(k) - a.get(k)));
        }
        local_density(domain, &p, level)
    };
    let f_lo = eval(lo_frac)?;
    if (f_lo - 0.5).abs() <= CROSSING_TOL {
        let mut p = *a;
        for k in 0..a.dim() {
            p.set(k, a.get(k) + lo_frac * (b.get(k) - a.get(k)));
        }
        return Ok(Some((lo_frac, p)));
    }
    let f_hi = eval(1.0)?;
    if (f_lo < 0.5) == (f_hi < 0.5) {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo_frac, 1.0);
    let mut f_lo = f_lo;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f_mid = eval(mid)?;
        if (f_mid - 0.5).abs() <= CROSSING_TOL {
            let mut p = *a;
            for k in 0..a.dim() {
                p.set(k, a.get(k) + mid * (b.get(k) - a.get(k)));
            }
            return Ok(Some((mid, p)));
        }
        if (f_lo < 0.5) == (f_mid < 0.5) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let mut p = *a;
    for k in 0..a.dim() {
        p.set(k, a.get(k) + hi * (b.get(k) - a.get(k)));
    }
    Ok(Some((hi, p)))
}

/// Result of the staged density-band stopping chain along one path.
#[derive(Clone, Debug)]
pub struct StoppingChain {
    /// Entry times into successive bands, when reached.
    pub times: Vec<f64>,
    pub positions: Vec<Point>,
    /// The staged event: every stage was reached before the local move
    /// fence of the previous scale.
    pub success: bool,
    /// On success: displacement bound `sup |X_s - X_{g_j}| <= 3/2 * 2^-l_j`.
    pub displacement_ok: bool,
    /// On success: every wide density at the endpoint is balanced.
    pub endpoint_balanced: bool,
    pub endpoint_balanced_count: usize,
}

/// Run the staged stopping chain along increasing levels: stage `j+1` must
/// reach the band `target_band(j+1, J)` of its level before moving
/// `2^-l_j` away from the stage-`j` location.
pub fn density_stopping_chain(
    path: &PathSample,
    domain: &DyadicIndicator,
    levels: &[i32],
) -> Result<StoppingChain> {
    let big_j = (levels.len() - 1) as u32;
    if big_j < 1 {
        return Err(Error::parameter("need at least two levels"));
    }
    let min_sep = min_separation(domain.dim(), big_j);
    for w in levels.windows(2) {
        if w[1] < w[0] + min_sep {
            return Err(Error::parameter(format!(
                "levels must increase by at least {min_sep}"
            )));
        }
    }
    let start_density = local_density(domain, &path.start, levels[0])?;
    if (start_density - 0.5).abs() > CROSSING_TOL {
        return Err(Error::parameter(format!(
            "chain requires start density 1/2 at the base level, got {start_density}"
        )));
    }
    let mut times = vec![0.0f64];
    let mut positions = vec![path.start];
    let mut seg = 0usize;
    let mut within = 0.0f64;
    let mut success = true;
    for j in 0..big_j as usize {
        let level = levels[j + 1];
        let (band_lo, band_hi) = target_band(j as u32 + 1, big_j);
        let fence = (2.0f64).powi(-levels[j]);
        let anchor = positions[j];
        let mut reached = false;
        'outer: for i in seg..path.steps() {
            let a = path.position(i);
            let b = path.position(i + 1);
            let lo_frac = if i == seg { within } else { 0.0 };
            if let Some((frac, p)) =
                band_entry(domain, &a, &b, level, band_lo, band_hi, lo_frac)?
            {
                // Fence check along the way: the path up to the entry must
                // stay within the move radius of the anchor.
                let mut ok = true;
                for m in seg..=i {
                    if path.position(m).dist_sup(&anchor) >= fence {
                        ok = false;
                        break;
                    }
                }
                if ok && p.dist_sup(&anchor) < fence {
                    times.push((i as f64 + frac) * path.dt);
                    positions.push(p);
                    seg = i;
                    within = frac;
                    reached = true;
                }
                break 'outer;
            }
            if b.dist_sup(&anchor) >= fence {
                break 'outer;
            }
        }
        if !reached {
            success = false;
            break;
        }
    }
    let mut displacement_ok = success;
    let mut endpoint_balanced = success;
    let mut balanced_count = 0usize;
    if success {
        let endpoint = positions[big_j as usize];
        let alpha = balance_margin(domain.dim());
        for (j, &l) in levels.iter().enumerate() {
            // Displacement along the remaining chain.
            let bound = 1.5 * (2.0f64).powi(-l);
            for p in positions.iter().skip(j) {
                if p.dist_sup(&positions[j]) > bound {
                    displacement_ok = false;
                }
            }
            let v = wide_density(domain, &endpoint, l)?;
            if v >= alpha && v <= 1.0 - alpha {
                balanced_count += 1;
            } else {
                endpoint_balanced = false;
            }
        }
    }
    Ok(StoppingChain {
        times,
        positions,
        success,
        displacement_ok,
        endpoint_balanced,
        endpoint_balanced_count: balanced_count,
    })
}

/// First entry of the level density into `[band_lo, band_hi]` on a segment.
fn band_entry(
    domain: &DyadicIndicator,
    a: &Point,
    b: &Point,
    level: i32,
    band_lo: f64,
    band_hi: f64,
    lo_frac: f64,
) -> Result<Option<(f64, Point)>> {
    let eval = |frac: f64| -> Result<f64> {
        let mut p = *a;
        for k in 0..a.dim() {
            p.set(k, a.get(k) + frac * (b.get(k) - a.get(k)));
        }
        local_density(domain, &p, level)
    };
    let inside = |v: f64| v >= band_lo - CROSSING_TOL && v <= band_hi + CROSSING_TOL;
    let f_lo = eval(lo_frac)?;
    if inside(f_lo) {
        let mut p = *a;
        for k in 0..a.dim() {
            p.set(k, a.get(k) + lo_frac * (b.get(k) - a.get(k)));
        }
        return Ok(Some((lo_frac, p)));
    }
    let f_hi = eval(1.0)?;
    // Entry requires the endpoint value on the other side of (or in) the band.
    let crossed = if f_lo < band_lo {
        f_hi >= band_lo
    } else {
        f_hi <= band_hi
    };
    if !crossed {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo_frac, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f_mid = eval(mid)?;
        if inside(f_mid) {
            hi = mid;
            if hi - lo < 1e-12 {
                break;
            }
            // Tighten toward the first entry.
            let f_probe = eval(0.5 * (lo + hi))?;
            if inside(f_probe) {
                hi = 0.5 * (lo + hi);
            }
            let mut p = *a;
            for k in 0..a.dim() {
                p.set(k, a.get(k) + hi * (b.get(k) - a.get(k)));
            }
            return Ok(Some((hi, p)));
        }
        if (f_mid < band_lo) == (f_lo < band_lo) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut p = *a;
    for k in 0..a.dim() {
        p.set(k, a.get(k) + hi * (b.get(k) - a.get(k)));
    }
    Ok(Some((hi, p)))
}

/// Numeric bound curve of the avoidance recursion: with `G_1 = 0` and
/// `G_{k+1}(I) = (1 - c2)^(sqrt(I) - 1) + I^(1 + (k-1)/2) G_k(floor(sqrt I) - k + 1)`
/// (value 1 whenever the argument drops to zero or below), returns
/// `G_J(I)` clipped to [0, 1].
pub fn recursion_bound(strength: u32, count: i64, c2: f64) -> f64 {
    assert!(strength >= 1);
    assert!(c2 > 0.0 && c2 < 1.0);
    fn gamma(k: u32, i: i64, c2: f64) -> f64 {
        if i <= 0 {
            return 1.0;
        }
        if k == 1 {
            return 0.0;
        }
        let sqrt_i = (i as f64).sqrt();
        let delta = sqrt_i.floor() as i64;
        let km1 = k - 1;
        let first = (1.0 - c2).powf(sqrt_i - 1.0);
        let second =
            (i as f64).powf(1.0 + (km1 as f64 - 1.0) / 2.0) * gamma(km1, delta - km1 as i64 + 1, c2);
        first + second
    }
    gamma(strength, count, c2).clamp(0.0, 1.0)
}

/// One row of the resonance-avoidance experiment.
#[derive(Clone, Debug)]
pub struct AvoidanceRow {
    pub start: Point,
    pub count: u32,
    pub p_avoid: Estimate,
    /// Capacity-based bound on the mass ignored by the radius truncation.
    pub remainder: f64,
}

/// Monte Carlo estimate of the probability that Brownian motion from each
/// start avoids the resonance set up to the move radius `r_out`.
///
/// Requires certified class membership of the starts at the ladder's base
/// level. Resonance entry is detected by sampling the path at resolution
/// `dt`; the truncation remainder pairs the estimate per the reporting
/// contract for infinite-horizon quantities.
pub fn avoidance_experiment(
    starts: &[Point],
    domain: &DyadicIndicator,
    ladder: &ScaleLadder,
    r_out: f64,
    dt: f64,
    n_paths: usize,
    master: Stream,
) -> Result<Vec<AvoidanceRow>> {
    let a = CompactSetSpec::from_boxes(
        starts
            .iter()
            .map(|p| crate::geometry::AlignedBox::new(*p, *p))
            .collect(),
    );
    let membership = class_membership(domain, &a, ladder.ell_star)?;
    if !membership.certified() {
        return Err(Error::Uncertified(
            "starts fail class membership at the ladder base level".into(),
        ));
    }
    // Remainder: after exiting the move fence, re-entering the resonance
    // region is at most the hitting probability of a hull box containing
    // the domain support; bound via the circumscribed ball.
    let support = domain.support_box();
    let mut rb: f64 = 0.0;
    for k in 0..support.dim() {
        rb = rb.max(support.lo.get(k).abs()).max(support.hi.get(k).abs());
    }
    let rb = rb * (support.dim() as f64).sqrt();
    let dim = domain.dim();
    let mut rows = Vec::new();
    for (si, start) in starts.iter().enumerate() {
        let remainder = if r_out > 2.0 * rb { rb / (r_out - rb) } else { 1.0 };
        let sub = master.derive_str("avoid").derive(si as u64);
        let results: Result<Vec<bool>> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut s = path_stream(sub, i as u64).derive_str("steps");
                let sd = dt.sqrt();
                let mut x = *start;
                loop {
                    let (_, inside) = resonance_membership(domain, ladder, &x)?;
                    if inside {
                        return Ok(false);
                    }
                    if x.dist_sup(start) >= r_out {
                        return Ok(true);
                    }
                    for k in 0..dim {
                        x.set(k, x.get(k) + sd * s.normal());
                    }
                }
            })
            .collect();
        let avoided = results?.iter().filter(|&&b| b).count();
        rows.push(AvoidanceRow {
            start: *start,
            count: ladder.count,
            p_avoid: Estimate::from_successes(avoided, n_paths),
            remainder,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::BoxListDomain;
    use crate::geometry::{fixture, AlignedBox, Fixture};

    fn p3(x: f64, y: f64, z: f64) -> Point {
        Point::from_slice(&[x, y, z])
    }

    #[test]
    fn ladder_arithmetic_d3() {
        // c0 = 12 at d = 3; 12 * 2^-L <= 1/200 first at L = 12.
        assert_eq!(min_separation(3, 1), 12);
        let ladder = ScaleLadder::new(3, 7, 1, None, 2).unwrap();
        assert_eq!(ladder.base_level, 24);
        assert_eq!(ladder.inspect, vec![24, 36, 48, 60]);
        assert_eq!(ladder.anchors, vec![24, 48]);
        assert!((ladder.alpha - 1.0 / 192.0).abs() < 1e-15);
    }

    #[test]
    fn ladder_rejects_small_separation() {
        assert!(ScaleLadder::new(3, 0, 1, Some(5), 1).is_err());
    }

    #[test]
    fn label_sets_disjoint_and_full() {
        let ladder = ScaleLadder::new(3, 0, 2, None, 2).unwrap();
        let inter = ladder.intermediate_labels(&ladder.anchors);
        for l in &inter {
            assert!(!ladder.anchors.contains(l));
        }
        assert_eq!(ladder.full_labels(&ladder.anchors), ladder.inspect);
    }

    /// Slab through the origin inside a big box: density 1/2 at all levels.
    fn slab_domain(w: f64) -> DyadicIndicator {
        let b = AlignedBox::new(p3(-w, -w, -w), p3(0.0, w, w));
        DyadicIndicator::Boxes(BoxListDomain::new(3, vec![b]).unwrap())
    }

    #[test]
    fn resonance_on_slab_interface() {
        // On the interface every wide density is exactly 1/2.
        let dom = slab_domain(1024.0);
        let ladder = ScaleLadder::new(3, 0, 1, None, 1).unwrap();
        let (count, inside) = resonance_membership(&dom, &ladder, &Point::zero(3)).unwrap();
        assert_eq!(count, ladder.inspect.len());
        assert!(inside);
    }

    #[test]
    fn resonance_deep_inside_is_zero() {
        let dom = slab_domain(1024.0);
        let ladder = ScaleLadder::new(3, 0, 1, None, 1).unwrap();
        let deep = p3(-512.0, 0.0, 0.0);
        let (count, inside) = resonance_membership(&dom, &ladder, &deep).unwrap();
        assert_eq!(count, 0);
        assert!(!inside);
    }

    #[test]
    fn resonance_count_bounded_by_inspected() {
        let dom = slab_domain(64.0);
        let ladder = ScaleLadder::new(3, 0, 1, None, 2).unwrap();
        let mut s = Stream::new(8);
        for _ in 0..50 {
            let x = p3(s.uniform_range(-2.0, 2.0), s.uniform_range(-2.0, 2.0), 0.0);
            let (count, _) = resonance_membership(&dom, &ladder, &x).unwrap();
            assert!(count <= ladder.inspect.len());
        }
    }

    #[test]
    fn cactus_ray_meets_at_most_one_band() {
        let dom = fixture(&Fixture::CactusPile {
            dim: 3,
            ell0: 0,
            sep: 5,
            stages: 3,
        })
        .unwrap();
        let alpha = balance_margin(3);
        let levels = crate::geometry::fixtures::cactus_levels(0, 5, 3);
        let mut t = 0.0;
        while t < 30.0 {
            let x = p3(t, 0.0, 0.0);
            let mut count = 0;
            for &l in &levels {
                let v = wide_density(&dom, &x, l).unwrap();
                if v >= alpha && v <= 1.0 - alpha {
                    count += 1;
                }
            }
            assert!(count <= 1, "count {count} at t = {t}");
            t += 0.01;
        }
    }

    #[test]
    fn crossing_order_fixture_orders_differ() {
        let dom = fixture(&Fixture::CrossingOrder {
            dim: 3,
            ell0: 0,
            sep: 5,
        })
        .unwrap();
        let alpha = balance_margin(3);
        let levels = [0, 5, 10];
        // March along both rays and record first band entries.
        let first_entry = |sign: f64| -> Vec<usize> {
            let mut order = Vec::new();
            let mut seen = [false; 3];
            let mut t = 0.0;
            while t < 30.0 {
                let x = p3(sign * t, 0.0, 0.0);
                for (i, &l) in levels.iter().enumerate() {
                    if seen[i] {
                        continue;
                    }
                    let v = wide_density(&dom, &x, l).unwrap();
                    if v >= alpha && v <= 1.0 - alpha {
                        seen[i] = true;
                        order.push(i);
                    }
                }
                t += 0.001;
            }
            order
        };
        assert_eq!(first_entry(1.0), vec![0, 1, 2]);
        assert_eq!(first_entry(-1.0), vec![0, 2, 1]);
    }

    #[test]
    fn track_single_label_slab() {
        // A straight path crossing the slab interface once.
        let dom = slab_domain(64.0);
        let mut positions = Vec::new();
        for i in 0..=20 {
            positions.extend_from_slice(&[-2.0 + 0.25 * i as f64, 0.0, 0.0]);
        }
        let path = PathSample::from_positions(p3(-2.0, 0.0, 0.0), 0.5, positions, Stream::new(1));
        let rec = track_crossings(&path, &dom, &[2]).unwrap();
        assert!(rec.complete);
        assert_eq!(rec.labels, vec![2]);
        // Density 1/2 at level 2 happens at x1 = 0.
        assert!(rec.positions[0].get(0).abs() < 1e-5);
    }

    #[test]
    fn track_matches_dense_scan() {
        // Oracle: scan a 10x finer polyline of the same path.
        let dom = slab_domain(64.0);
        let master = Stream::new(77);
        for trial in 0..10u64 {
            let path = crate::brownian::sample_path(p3(-0.5, 0.0, 0.0), 0.01, 500, master, trial);
            let labels = [1, 3];
            let rec = track_crossings(&path, &dom, &labels).unwrap();
            // Dense scan.
            let mut remaining: Vec<i32> = labels.to_vec();
            let mut scan_labels = Vec::new();
            let fine = 10usize;
            'outer: for i in 0..path.steps() {
                let a = path.position(i);
                let b = path.position(i + 1);
                for f in 0..fine {
                    let frac = f as f64 / fine as f64;
                    let mut p = a;
                    for k in 0..3 {
                        p.set(k, a.get(k) + frac * (b.get(k) - a.get(k)));
                    }
                    remaining.retain(|&l| {
                        let v = local_density(&dom, &p, l).unwrap();
                        if (v - 0.5).abs() < 0.02 {
                            scan_labels.push(l);
                            false
                        } else {
                            true
                        }
                    });
                    if remaining.is_empty() {
                        break 'outer;
                    }
                }
            }
            if rec.complete && scan_labels.len() == rec.labels.len() {
                assert_eq!(rec.labels, scan_labels, "trial {trial}");
            }
            // Labels distinct and times nondecreasing.
            let mut sorted = rec.labels.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), rec.labels.len());
            for w in rec.times.windows(2) {
                assert!(w[1] >= w[0]);
            }
        }
    }

    #[test]
    fn recursion_bound_base_cases() {
        assert_eq!(recursion_bound(1, 5, 0.3), 0.0);
        assert_eq!(recursion_bound(1, 1, 0.9), 0.0);
        assert_eq!(recursion_bound(2, 0, 0.5), 1.0);
        assert_eq!(recursion_bound(3, -4, 0.5), 1.0);
        // J = 2, c2 = 0.5, I = 100: (0.5)^9 since the second term vanishes.
        let v = recursion_bound(2, 100, 0.5);
        assert!((v - (0.5f64).powi(9)).abs() < 1e-15, "v = {v}");
    }

    #[test]
    fn recursion_bound_monotone_trends() {
        // Nonincreasing in count along square milestones, and in c2.
        for j in [2u32, 3] {
            let mut prev = f64::INFINITY;
            for m in 4..40u32 {
                let i = (m * m) as i64;
                let v = recursion_bound(j, i, 0.4);
                assert!(v <= prev + 1e-12, "J={j} I={i}: {v} > {prev}");
                prev = v;
            }
        }
        let a = recursion_bound(3, 900, 0.3);
        let b = recursion_bound(3, 900, 0.6);
        assert!(b <= a);
        // Vanishes for large count.
        assert!(recursion_bound(2, 4_000_000, 0.5) < 1e-200);
    }

    #[test]
    fn stopping_chain_on_slab() {
        let dom = slab_domain(64.0);
        let master = Stream::new(5);
        let levels = [2, 2 + min_separation(3, 2), 2 + 2 * min_separation(3, 2)];
        let mut successes = 0;
        let mut checked = 0;
        for i in 0..200u64 {
            let path = crate::brownian::sample_path(Point::zero(3), 1e-6, 3000, master, i);
            let chain = density_stopping_chain(&path, &dom, &levels).unwrap();
            if chain.success {
                successes += 1;
                assert!(chain.displacement_ok, "path {i}");
                assert!(chain.endpoint_balanced, "path {i}");
                checked += 1;
            }
        }
        assert!(successes > 0, "the staged event never happened");
        assert!(checked == successes);
    }
}

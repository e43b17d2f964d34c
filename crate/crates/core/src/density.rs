//! Local density functions on dyadic scales, exactly evaluated.
//!
//! For a bounded set `U0` with complement `U1`, the narrow density at level
//! `l` is the volume fraction of `U1` in the closed sup-ball `B(x, 2^-l)`;
//! the wide density uses radius `4 * 2^-l` and equals the narrow density two
//! levels coarser. Both are exact on dyadic domains, which makes the
//! Lipschitz and averaging laws testable with zero tolerance (up to float
//! rounding).

use crate::error::{Error, Result};
use crate::geometry::{CompactSetSpec, DyadicIndicator, Side};
use crate::point::Point;

/// `c0 = d * 2^(d-1)`, the constant in the averaging bound.
pub fn averaging_constant(dim: usize) -> f64 {
    dim as f64 * (2.0f64).powi(dim as i32 - 1)
}

/// A density query at a given level; constructing it validates resolvability.
#[derive(Clone, Copy, Debug)]
pub struct DensityQuery<'a> {
    pub domain: &'a DyadicIndicator,
    pub center: Point,
    pub level: i32,
}

impl<'a> DensityQuery<'a> {
    pub fn new(domain: &'a DyadicIndicator, center: Point, level: i32) -> Result<Self> {
        check_level_radius(domain, level, level - 2)?;
        Ok(DensityQuery {
            domain,
            center,
            level,
        })
    }

    pub fn narrow(&self) -> f64 {
        local_density_unchecked(self.domain, &self.center, self.level)
    }

    pub fn wide(&self) -> f64 {
        local_density_unchecked(self.domain, &self.center, self.level - 2)
    }
}

/// A level is resolvable when the query ball fits the support scale and is
/// at least one cell wide. Wide queries use radius `4 * 2^-level`, so their
/// window is two levels narrower.
pub fn check_level(domain: &DyadicIndicator, level: i32) -> Result<()> {
    check_level_radius(domain, level, level)
}

fn check_level_radius(domain: &DyadicIndicator, level: i32, radius_level: i32) -> Result<()> {
    let ell_max = domain.ell_max();
    if level > ell_max || radius_level < -domain.extent_exponent() {
        return Err(Error::Unresolvable { level, ell_max });
    }
    Ok(())
}

#[inline]
fn local_density_unchecked(domain: &DyadicIndicator, x: &Point, level: i32) -> f64 {
    let r = (2.0f64).powi(-level);
    let vol = domain.clip_volume(x, r, Side::U1);
    vol / (2.0 * r).powi(domain.dim() as i32)
}

/// Narrow local density of `U1` in `B(x, 2^-level)`.
pub fn local_density(domain: &DyadicIndicator, x: &Point, level: i32) -> Result<f64> {
    check_level(domain, level)?;
    Ok(local_density_unchecked(domain, x, level))
}

/// Wide local density of `U1` in `B(x, 4 * 2^-level)`; identical to the
/// narrow density two levels coarser.
pub fn wide_density(domain: &DyadicIndicator, x: &Point, level: i32) -> Result<f64> {
    check_level_radius(domain, level, level - 2)?;
    Ok(local_density_unchecked(domain, x, level - 2))
}

/// Exact average of the level-`finer` narrow density over `B(x, 2^-level)`.
///
/// Evaluated in closed form through the tent-kernel identity: the average is
/// `1 - |B|^{-1} \int_{U0} psi`, where `psi` is a product of per-axis
/// trapezoids, integrated exactly over the cell decomposition.
pub fn box_average(domain: &DyadicIndicator, x: &Point, level: i32, finer: i32) -> Result<f64> {
    if finer <= level {
        return Err(Error::parameter("box_average needs finer > level"));
    }
    check_level(domain, level)?;
    check_level(domain, finer)?;
    let dim = domain.dim();
    let big_r = (2.0f64).powi(-level);
    let small_r = (2.0f64).powi(-finer);

    let mass = match domain {
        DyadicIndicator::Boxes(b) => {
            let mut total = 0.0;
            for bx in &b.boxes {
                let mut prod = 1.0;
                for k in 0..dim {
                    prod *= trapezoid_integral(bx.lo.get(k), bx.hi.get(k), x.get(k), big_r, small_r);
                    if prod == 0.0 {
                        break;
                    }
                }
                total += prod;
            }
            total
        }
        DyadicIndicator::Raster(r) => {
            let h = r.cell_side();
            let mut starts = vec![0i64; dim];
            let mut weights: Vec<Vec<f64>> = Vec::with_capacity(dim);
            for k in 0..dim {
                let lo_real = x.get(k) - big_r - small_r;
                let hi_real = x.get(k) + big_r + small_r;
                let start = (lo_real / h).floor() as i64 - r.support_lo[k];
                let end = (hi_real / h).ceil() as i64 - r.support_lo[k];
                starts[k] = start;
                let mut w = Vec::with_capacity((end - start).max(0) as usize);
                for i in start..end {
                    let p = (r.support_lo[k] + i) as f64 * h;
                    w.push(trapezoid_integral(p, p + h, x.get(k), big_r, small_r));
                }
                weights.push(w);
            }
            r.weighted_cell_sum(&starts, &weights)
        }
    };
    Ok(1.0 - mass / (2.0 * big_r).powi(dim as i32))
}

/// Integral over `[p, q]` of the unit trapezoid centered at `c`: plateau 1
/// on `[c-R+r, c+R-r]`, linear ramps of width `2r` on both sides.
fn trapezoid_integral(p: f64, q: f64, c: f64, big_r: f64, small_r: f64) -> f64 {
    debug_assert!(big_r > small_r);
    let b0 = c - big_r - small_r;
    let b1 = c - big_r + small_r;
    let b2 = c + big_r - small_r;
    let b3 = c + big_r + small_r;
    let t = |z: f64| -> f64 {
        if z <= b0 || z >= b3 {
            0.0
        } else if z < b1 {
            (z - b0) / (2.0 * small_r)
        } else if z <= b2 {
            1.0
        } else {
            (b3 - z) / (2.0 * small_r)
        }
    };
    let mut knots = vec![p.max(b0).min(q), q.min(b3).max(p)];
    for b in [b1, b2] {
        if b > knots[0] && b < knots[1] {
            knots.push(b);
        }
    }
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    for w in knots.windows(2) {
        // t is linear on each piece, so the trapezoid rule is exact.
        total += 0.5 * (t(w[0]) + t(w[1])) * (w[1] - w[0]);
    }
    total
}

/// Which branch of the mass alternative was certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlternativeBranch {
    /// Both tails carry mass at least delta/2.
    Tails,
    /// The middle band carries mass at least 1/4 - delta/2.
    Middle,
    Both,
    Undetermined,
}

#[derive(Clone, Debug)]
pub struct AlternativeReport {
    pub branch: AlternativeBranch,
    pub beta: f64,
    pub delta: f64,
    /// Certified lower bounds for the three masses under the normalized
    /// measure on `B(x, 2^-level)`.
    pub upper_tail: f64,
    pub lower_tail: f64,
    pub middle: f64,
    pub nodes_visited: usize,
}

/// Certified enclosure of the level-`finer` density over the sub-box
/// `B(c, h)`, combining the Lipschitz modulus with an exact volume sandwich.
fn density_enclosure(
    domain: &DyadicIndicator,
    c: &Point,
    h: f64,
    finer: i32,
) -> (f64, f64) {
    let dim = domain.dim();
    let di = dim as i32;
    let r = (2.0f64).powi(-finer);
    let denom = (2.0 * r).powi(di);
    // For any y in B(c, h): B(y, r) <= B(c, r+h), bounding both the U1 and
    // U0 contents of the query ball from above (U0 by complement).
    let u1_outer_raw = domain.clip_volume(c, r + h, Side::U1);
    let u0_outer_raw = (2.0 * (r + h)).powi(di) - u1_outer_raw;
    let mut lo = (1.0 - u0_outer_raw / denom).max(0.0);
    let mut hi = (u1_outer_raw / denom).min(1.0);
    if h < r {
        // And B(c, r-h) <= B(y, r) bounds them from below.
        let u1_inner_raw = domain.clip_volume(c, r - h, Side::U1);
        let u0_inner_raw = (2.0 * (r - h)).powi(di) - u1_inner_raw;
        lo = lo.max(u1_inner_raw / denom);
        hi = hi.min(1.0 - u0_inner_raw / denom);
    } else {
        // Lipschitz modulus around the center value.
        let v = local_density_unchecked(domain, c, finer);
        let lip = (2.0f64).powi(finer) * dim as f64 * h;
        lo = lo.max(v - lip);
        hi = hi.min(v + lip);
    }
    (lo.min(hi), hi.max(lo))
}

/// Decide the mass alternative for the distribution of the level-`finer`
/// density under the normalized measure on `B(x, 2^-level)`, by recursive
/// subdivision with certified enclosures.
pub fn alternative_masses(
    domain: &DyadicIndicator,
    x: &Point,
    level: i32,
    finer: i32,
    delta: f64,
) -> Result<AlternativeReport> {
    let beta = box_average(domain, x, level, finer)?;
    if delta < 0.0 || delta > beta.min(1.0 - beta) + 1e-12 {
        return Err(Error::parameter(format!(
            "delta = {delta} outside [0, min(beta, 1-beta)] with beta = {beta}"
        )));
    }
    let dim = domain.dim();
    let big_r = (2.0f64).powi(-level);
    let total_vol = (2.0 * big_r).powi(dim as i32);
    // Enclosure width near the interface shrinks like d * 2^finer * h, so
    // resolving the beta +- delta band needs h somewhat below that scale.
    let h_min = (delta / (8.0 * dim as f64 * (2.0f64).powi(finer))).max((2.0f64).powi(-40));
    let budget = 1_500_000usize;

    let mut upper = 0.0;
    let mut lower = 0.0;
    let mut middle = 0.0;
    let mut visited = 0usize;

    let tails_ok = |u: f64, l: f64| u >= 0.5 * delta && l >= 0.5 * delta;
    let middle_ok = |m: f64| m >= 0.25 - 0.5 * delta;

    // Breadth-first sweeps: classify whole size classes before refining, so
    // the ambiguous frontier (a measure-zero level set) cannot starve the
    // budget before macroscopic regions are counted.
    let mut current: Vec<(Point, f64)> = vec![(*x, big_r)];
    'refine: while !current.is_empty() {
        let mut next = Vec::new();
        for (c, h) in current.drain(..) {
            visited += 1;
            if visited > budget {
                break 'refine;
            }
            if visited % 2048 == 0 && (tails_ok(upper, lower) || middle_ok(middle)) {
                break 'refine;
            }
            let (lo, hi) = density_enclosure(domain, &c, h, finer);
            let frac = (2.0 * h).powi(dim as i32) / total_vol;
            if lo > beta + delta {
                upper += frac;
            } else if hi < beta - delta {
                lower += frac;
            } else if lo >= beta - delta && hi <= beta + delta {
                middle += frac;
            } else if h > h_min {
                let hh = 0.5 * h;
                for mask in 0usize..(1 << dim) {
                    let mut cc = c;
                    for k in 0..dim {
                        let s = if mask >> k & 1 == 1 { hh } else { -hh };
                        cc.set(k, c.get(k) + s);
                    }
                    next.push((cc, hh));
                }
            }
        }
        if tails_ok(upper, lower) || middle_ok(middle) {
            break;
        }
        current = next;
    }

    let t = tails_ok(upper, lower);
    let m = middle_ok(middle);
    let branch = match (t, m) {
        (true, true) => AlternativeBranch::Both,
        (true, false) => AlternativeBranch::Tails,
        (false, true) => AlternativeBranch::Middle,
        (false, false) => AlternativeBranch::Undetermined,
    };
    Ok(AlternativeReport {
        branch,
        beta,
        delta,
        upper_tail: upper,
        lower_tail: lower,
        middle,
        nodes_visited: visited,
    })
}

/// Result of the certified membership check for the class of sets whose
/// narrow density stays at most 1/2 on `A` at every level `>= ell_star`.
#[derive(Clone, Debug)]
pub struct ClassMembership {
    /// Every level in `[ell_star, checked_up_to]` certified.
    pub levels_certified: bool,
    /// Finest level checked pointwise.
    pub checked_up_to: i32,
    /// Distance certificate covering all finer levels, when it holds.
    pub tail_certified: bool,
    /// A point of `A` and level where the density exceeds 1/2, if found.
    pub witness: Option<(Point, i32, f64)>,
}

impl ClassMembership {
    /// Membership certified at every level (the quantified statement holds).
    pub fn certified(&self) -> bool {
        self.levels_certified && self.tail_certified && self.witness.is_none()
    }

    /// Membership disproved by an explicit witness.
    pub fn violated(&self) -> bool {
        self.witness.is_some()
    }
}

/// Certified check that the narrow density is at most 1/2 for every `x` in
/// `A` and every level `>= ell_star`.
///
/// Levels up to the domain resolution are checked by branch-and-bound with
/// Lipschitz enclosures; all finer levels follow from the sufficient
/// condition that the sup-distance from `A` to `U1` is at least one
/// resolved scale.
pub fn class_membership(
    domain: &DyadicIndicator,
    a: &CompactSetSpec,
    ell_star: i32,
) -> Result<ClassMembership> {
    let dim = a.dim()?;
    if dim != domain.dim() {
        return Err(Error::geometry("dimension mismatch"));
    }
    // Find the coarsest level at which the clearance certificate holds; the
    // certificate at level `lc` covers every level >= lc.
    let ell_max = domain.ell_max();
    let mut tail_certified = false;
    let mut cert_level = ell_max;
    for lc in ell_star..=ell_max {
        if clearance_certificate(domain, a, (2.0f64).powi(-lc)) {
            tail_certified = true;
            cert_level = lc;
            break;
        }
    }
    let check_up_to = if tail_certified { cert_level - 1 } else { ell_max };

    let mut witness = None;
    let mut levels_certified = true;
    for level in ell_star..=check_up_to {
        match certify_level(domain, a, level) {
            LevelOutcome::Certified => {}
            LevelOutcome::Violated(p, v) => {
                witness = Some((p, level, v));
                levels_certified = false;
                break;
            }
            LevelOutcome::Undetermined => {
                levels_certified = false;
            }
        }
    }
    Ok(ClassMembership {
        levels_certified,
        checked_up_to: check_up_to,
        tail_certified,
        witness,
    })
}

enum LevelOutcome {
    Certified,
    Violated(Point, f64),
    Undetermined,
}

fn certify_level(domain: &DyadicIndicator, a: &CompactSetSpec, level: i32) -> LevelOutcome {
    let bb = match a.bounding_box() {
        Ok(b) => b,
        Err(_) => return LevelOutcome::Certified,
    };
    let dim = domain.dim();
    // Root box: cube covering A's bounding box.
    let c = bb.center();
    let mut h = 0.0f64;
    for k in 0..dim {
        h = h.max(0.5 * (bb.hi.get(k) - bb.lo.get(k)));
    }
    h = h.max((2.0f64).powi(-level - 8));
    let h_min = (2.0f64).powi(-(domain.ell_max() + 3));
    let budget = 400_000usize;
    let mut visited = 0usize;
    let mut undetermined = false;
    let mut stack = vec![(c, h)];
    while let Some((c, h)) = stack.pop() {
        visited += 1;
        if visited > budget {
            return LevelOutcome::Undetermined;
        }
        // Skip boxes not meeting A.
        if a.dist_sup(&c) > h {
            continue;
        }
        let (_, hi) = density_enclosure(domain, &c, h, level);
        if hi <= 0.5 {
            continue;
        }
        let v = match local_density(domain, &c, level) {
            Ok(v) => v,
            Err(_) => return LevelOutcome::Undetermined,
        };
        if v > 0.5 && a.contains(&c) {
            return LevelOutcome::Violated(c, v);
        }
        if h <= h_min {
            undetermined = true;
            continue;
        }
        let hh = 0.5 * h;
        for mask in 0usize..(1 << dim) {
            let mut cc = c;
            for k in 0..dim {
                let s = if mask >> k & 1 == 1 { hh } else { -hh };
                cc.set(k, c.get(k) + s);
            }
            stack.push((cc, hh));
        }
    }
    if undetermined {
        LevelOutcome::Undetermined
    } else {
        LevelOutcome::Certified
    }
}

/// Certified check that every point of `A` keeps `B(x, r)` inside `U0`.
fn clearance_certificate(domain: &DyadicIndicator, a: &CompactSetSpec, r: f64) -> bool {
    let bb = match a.bounding_box() {
        Ok(b) => b,
        Err(_) => return true,
    };
    let dim = domain.dim();
    let c = bb.center();
    let mut h = 0.0f64;
    for k in 0..dim {
        h = h.max(0.5 * (bb.hi.get(k) - bb.lo.get(k)));
    }
    let h_min = r * (2.0f64).powi(-12);
    let budget = 200_000usize;
    let mut visited = 0usize;
    let mut stack = vec![(c, h.max(1e-12))];
    while let Some((c, h)) = stack.pop() {
        visited += 1;
        if visited > budget {
            return false;
        }
        if a.dist_sup(&c) > h {
            continue;
        }
        if domain.ball_clears_u1(&c, r + h) {
            continue;
        }
        if a.contains(&c) && !domain.ball_clears_u1(&c, r) {
            return false;
        }
        if h <= h_min {
            return false;
        }
        let hh = 0.5 * h;
        for mask in 0usize..(1 << dim) {
            let mut cc = c;
            for k in 0..dim {
                let s = if mask >> k & 1 == 1 { hh } else { -hh };
                cc.set(k, c.get(k) + s);
            }
            stack.push((cc, hh));
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::BoxListDomain;
    use crate::geometry::raster::{BitGrid, RasterDomain};
    use crate::geometry::AlignedBox;
    use crate::rng::Stream;

    fn p3(x: f64, y: f64, z: f64) -> Point {
        Point::from_slice(&[x, y, z])
    }

    /// U0 = left half `[-w, 0] x [-w, w]^2` of a big box.
    fn slab_domain(w: f64) -> DyadicIndicator {
        let b = AlignedBox::new(p3(-w, -w, -w), p3(0.0, w, w));
        DyadicIndicator::Boxes(BoxListDomain::new(3, vec![b]).unwrap())
    }

    /// Random raster spanning [-1, 1]^3 at the given resolution, so levels
    /// >= 2 are always resolvable.
    fn random_raster(seed: u64, ell_max: i32, fill: f64) -> DyadicIndicator {
        let mut s = Stream::new(seed);
        let extent = 1usize << (ell_max + 1);
        let mut grid = BitGrid::new(&vec![extent; 3]);
        for lin in 0..grid.cells() {
            if s.uniform() < fill {
                grid.set_linear(lin, true);
            }
        }
        if grid.count_ones() == 0 {
            grid.set_linear(0, true);
        }
        DyadicIndicator::Raster(
            RasterDomain::new(ell_max, vec![-(extent as i64 / 2); 3], grid).unwrap(),
        )
    }

    #[test]
    fn debug_enclosure_probe() {
        let dom = slab_domain(8.0);
        // Deep in U0, away from the interface.
        for (c1, h) in [(-0.375f64, 0.125f64), (-0.4375, 0.0625), (0.375, 0.125)] {
            let c = p3(c1, 0.0, 0.0);
            let r = (2.0f64).powi(-6);
            let v1o = dom.clip_volume(&c, r + h, Side::U1);
            let v0o = dom.clip_volume(&c, r + h, Side::U0);
            eprintln!("c1={c1} h={h} u1_outer={v1o} u0_outer={v0o} denom={}", (2.0*r).powi(3));
        }
    }

    #[test]
    fn density_zero_inside_cube() {
        // U0 contains B(0, 2^-l): density 0.
        let dom = slab_domain(4.0);
        let x = p3(-2.0, 0.0, 0.0);
        assert_eq!(local_density(&dom, &x, 0).unwrap(), 0.0);
    }

    #[test]
    fn density_half_on_slab_interface() {
        let dom = slab_domain(8.0);
        let x = p3(0.0, 0.0, 0.0);
        assert_eq!(local_density(&dom, &x, 2).unwrap(), 0.5);
        assert_eq!(wide_density(&dom, &x, 4).unwrap(), 0.5);
    }

    #[test]
    fn wide_equals_narrow_two_coarser() {
        let dom = random_raster(8, 4, 0.45);
        let mut s = Stream::new(21);
        for _ in 0..100 {
            let x = p3(
                s.uniform_range(-0.3, 0.3),
                s.uniform_range(-0.3, 0.3),
                s.uniform_range(-0.3, 0.3),
            );
            let l = 3;
            assert_eq!(
                wide_density(&dom, &x, l).unwrap(),
                local_density(&dom, &x, l - 2).unwrap()
            );
        }
    }

    #[test]
    fn unresolvable_level_errors() {
        let dom = random_raster(8, 4, 0.5);
        assert!(local_density(&dom, &Point::zero(3), 9).is_err());
    }

    #[test]
    fn density_matches_cell_enumeration() {
        // The raster clip is already tested against brute force; here check
        // the normalization.
        let dom = random_raster(5, 4, 0.4);
        let x = p3(0.1, -0.05, 0.2);
        let r = 0.25;
        let v = dom.clip_volume(&x, r, Side::U1);
        assert!((local_density(&dom, &x, 2).unwrap() - v / (2.0 * r).powi(3)).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_laws_hold_exactly() {
        let dom = random_raster(13, 4, 0.5);
        let mut s = Stream::new(2);
        for _ in 0..500 {
            let x = p3(
                s.uniform_range(-0.4, 0.4),
                s.uniform_range(-0.4, 0.4),
                s.uniform_range(-0.4, 0.4),
            );
            let y = p3(
                s.uniform_range(-0.1, 0.1),
                s.uniform_range(-0.1, 0.1),
                s.uniform_range(-0.1, 0.1),
            );
            let l = 2 + s.below(3) as i32;
            let xy = x.add(&y);
            let lhs = (local_density(&dom, &xy, l).unwrap() - local_density(&dom, &x, l).unwrap()).abs();
            let bound = (2.0f64).powi(l) * y.norm_l1();
            assert!(lhs <= bound + 1e-12, "lhs {lhs} bound {bound}");
            let lhs_w = (wide_density(&dom, &xy, l).unwrap() - wide_density(&dom, &x, l).unwrap()).abs();
            let bound_w = (2.0f64).powi(l - 2) * y.norm_l1();
            assert!(lhs_w <= bound_w + 1e-12);
        }
    }

    #[test]
    fn averaging_law_exact_constant() {
        let dom = random_raster(31, 5, 0.5);
        let c0 = averaging_constant(3);
        let mut s = Stream::new(3);
        for _ in 0..200 {
            let x = p3(
                s.uniform_range(-0.3, 0.3),
                s.uniform_range(-0.3, 0.3),
                s.uniform_range(-0.3, 0.3),
            );
            let l = 2 + s.below(2) as i32;
            let lp = l + 1 + s.below(2) as i32;
            let beta = box_average(&dom, &x, l, lp).unwrap();
            let sig = local_density(&dom, &x, l).unwrap();
            let bound = c0 * (2.0f64).powi(l - lp);
            assert!((sig - beta).abs() <= bound + 1e-12, "gap {} bound {bound}", (sig - beta).abs());
        }
    }

    #[test]
    fn box_average_half_on_interface() {
        let dom = slab_domain(8.0);
        let beta = box_average(&dom, &p3(0.0, 0.0, 0.0), 1, 4).unwrap();
        assert!((beta - 0.5).abs() < 1e-12, "beta {beta}");
    }

    #[test]
    fn box_average_matches_monte_carlo() {
        let dom = random_raster(77, 4, 0.5);
        let x = p3(0.05, -0.1, 0.15);
        let (l, lp) = (2, 4);
        let beta = box_average(&dom, &x, l, lp).unwrap();
        let mut s = Stream::new(1234);
        let r = (2.0f64).powi(-l);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let y = p3(
                    x.get(0) + s.uniform_range(-r, r),
                    x.get(1) + s.uniform_range(-r, r),
                    x.get(2) + s.uniform_range(-r, r),
                );
                local_density(&dom, &y, lp).unwrap()
            })
            .collect();
        let est = crate::stats::Estimate::from_samples(&samples);
        assert!(
            (est.mean - beta).abs() <= 3.0 * est.se,
            "mc {} exact {beta} se {}",
            est.mean,
            est.se
        );
    }

    #[test]
    fn density_monotone_under_shrinking_u0() {
        let dom = random_raster(55, 3, 0.6);
        let raster = match &dom {
            DyadicIndicator::Raster(r) => r.clone(),
            _ => unreachable!(),
        };
        // Find a set cell and clear it.
        let mut idx = vec![0usize; 3];
        let mut cleared = None;
        for lin in 0..raster.cells.cells() {
            if raster.cells.get_linear(lin) {
                raster.cells.unlinear(lin, &mut idx);
                cleared = Some(raster.with_cell_cleared(&idx).unwrap());
                break;
            }
        }
        let smaller = DyadicIndicator::Raster(cleared.unwrap());
        let mut s = Stream::new(4);
        for _ in 0..200 {
            let x = p3(
                s.uniform_range(-0.4, 0.4),
                s.uniform_range(-0.4, 0.4),
                s.uniform_range(-0.4, 0.4),
            );
            let l = 2 + s.below(2) as i32;
            assert!(
                local_density(&smaller, &x, l).unwrap() + 1e-15
                    >= local_density(&dom, &x, l).unwrap()
            );
        }
    }

    #[test]
    fn alternative_constant_density_middle_branch() {
        // Query ball far from U0: density is identically 1, delta must be 0.
        let dom = slab_domain(2.0);
        let x = p3(6.0, 0.0, 0.0);
        let rep = alternative_masses(&dom, &x, 1, 4, 0.0).unwrap();
        assert!((rep.beta - 1.0).abs() < 1e-12);
        assert!(matches!(
            rep.branch,
            AlternativeBranch::Middle | AlternativeBranch::Both
        ));
        assert!(rep.middle > 0.99);
    }

    #[test]
    fn alternative_two_point_split_tails_branch() {
        // Sharp interface through the query ball: values 0 and 1 in equal
        // halves, beta = 1/2, delta = 1/4.
        let dom = slab_domain(8.0);
        let x = p3(0.0, 0.0, 0.0);
        let rep = alternative_masses(&dom, &x, 1, 6, 0.25).unwrap();
        assert!((rep.beta - 0.5).abs() < 1e-12);
        assert!(matches!(
            rep.branch,
            AlternativeBranch::Tails | AlternativeBranch::Both
        ));
        assert!(rep.upper_tail >= 0.125 && rep.lower_tail >= 0.125);
    }

    #[test]
    fn alternative_holds_on_random_domains() {
        let mut s = Stream::new(99);
        for trial in 0..25 {
            let dom = random_raster(1000 + trial, 4, 0.3 + 0.4 * s.uniform());
            let x = p3(
                s.uniform_range(-0.2, 0.2),
                s.uniform_range(-0.2, 0.2),
                s.uniform_range(-0.2, 0.2),
            );
            let l = 2 + s.below(2) as i32;
            let lp = l + 1 + s.below((4 - l) as u64) as i32;
            let beta = box_average(&dom, &x, l, lp).unwrap();
            let dmax = beta.min(1.0 - beta).min(0.25);
            let delta = 0.8 * dmax * s.uniform();
            let rep = alternative_masses(&dom, &x, l, lp, delta).unwrap();
            assert!(
                rep.branch != AlternativeBranch::Undetermined,
                "trial {trial}: beta {beta} delta {delta} report {rep:?}"
            );
        }
    }

    #[test]
    fn class_membership_deep_point_certified() {
        // A = {0} with U0 containing B(0, 2 * 2^-l*): member.
        let dom = slab_domain(4.0);
        let a = CompactSetSpec::single_point(p3(-2.0, 0.0, 0.0));
        let m = class_membership(&dom, &a, 0).unwrap();
        assert!(m.certified(), "{m:?}");
    }

    #[test]
    fn class_membership_outside_point_violated() {
        let dom = slab_domain(4.0);
        let a = CompactSetSpec::single_point(p3(2.0, 0.0, 0.0));
        let m = class_membership(&dom, &a, 0).unwrap();
        assert!(m.violated(), "{m:?}");
    }

    #[test]
    fn class_membership_cactus_holds_at_base_level() {
        let dom = crate::geometry::fixture(&crate::geometry::Fixture::CactusPile {
            dim: 3,
            ell0: 0,
            sep: 5,
            stages: 2,
        })
        .unwrap();
        let a = CompactSetSpec::single_point(Point::zero(3));
        let m = class_membership(&dom, &a, 0).unwrap();
        assert!(m.certified(), "{m:?}");
    }
}

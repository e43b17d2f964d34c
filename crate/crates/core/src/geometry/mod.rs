//! Lattice and continuum set primitives.
//!
//! Everything here is axis-aligned and dyadic by construction, which keeps
//! all volume queries exact (up to floating rounding): bounded sets are
//! either dense cell rasters ([`raster::RasterDomain`]) or finite unions of
//! dyadic boxes ([`domain::BoxListDomain`]), and compact test sets are
//! box/ball unions ([`CompactSetSpec`]).

pub mod domain;
pub mod fixtures;
pub mod raster;

pub use domain::{DyadicIndicator, Side};
pub use fixtures::{fixture, Fixture};
pub use raster::{unbounded_complement_component, BitGrid, RasterDomain};

use crate::error::{Error, Result};
use crate::point::{LatticePoint, Point};

/// A closed axis-aligned box `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignedBox {
    pub lo: Point,
    pub hi: Point,
}

impl AlignedBox {
    pub fn new(lo: Point, hi: Point) -> Self {
        assert_eq!(lo.dim(), hi.dim());
        for k in 0..lo.dim() {
            assert!(lo.get(k) <= hi.get(k), "inverted box");
        }
        AlignedBox { lo, hi }
    }

    /// The closed sup-norm ball `B(x, r)` as a box.
    pub fn sup_ball(center: &Point, r: f64) -> Self {
        let mut lo = *center;
        let mut hi = *center;
        for k in 0..center.dim() {
            lo.set(k, center.get(k) - r);
            hi.set(k, center.get(k) + r);
        }
        AlignedBox { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn volume(&self) -> f64 {
        let mut v = 1.0;
        for k in 0..self.dim() {
            v *= self.hi.get(k) - self.lo.get(k);
        }
        v
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim()).all(|k| p.get(k) >= self.lo.get(k) && p.get(k) <= self.hi.get(k))
    }

    /// Volume of the intersection with another box (0 if disjoint).
    pub fn intersection_volume(&self, other: &AlignedBox) -> f64 {
        let mut v = 1.0;
        for k in 0..self.dim() {
            let lo = self.lo.get(k).max(other.lo.get(k));
            let hi = self.hi.get(k).min(other.hi.get(k));
            if hi <= lo {
                return 0.0;
            }
            v *= hi - lo;
        }
        v
    }

    pub fn intersects(&self, other: &AlignedBox) -> bool {
        (0..self.dim()).all(|k| self.hi.get(k) >= other.lo.get(k) && self.lo.get(k) <= other.hi.get(k))
    }

    /// Sup-norm distance from a point to the box (0 inside).
    pub fn dist_sup(&self, p: &Point) -> f64 {
        let mut m = 0.0f64;
        for k in 0..self.dim() {
            let below = self.lo.get(k) - p.get(k);
            let above = p.get(k) - self.hi.get(k);
            m = m.max(below.max(above).max(0.0));
        }
        m
    }

    /// Euclidean distance from a point to the box (0 inside).
    pub fn dist_euclid(&self, p: &Point) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim() {
            let below = self.lo.get(k) - p.get(k);
            let above = p.get(k) - self.hi.get(k);
            let gap = below.max(above).max(0.0);
            s += gap * gap;
        }
        s.sqrt()
    }

    pub fn center(&self) -> Point {
        let mut c = Point::zero(self.dim());
        for k in 0..self.dim() {
            c.set(k, 0.5 * (self.lo.get(k) + self.hi.get(k)));
        }
        c
    }

    pub fn grow(&self, delta: f64) -> AlignedBox {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for k in 0..self.dim() {
            lo.set(k, lo.get(k) - delta);
            hi.set(k, hi.get(k) + delta);
        }
        AlignedBox { lo, hi }
    }

    /// Shrink by `delta` per side; `None` if the result is empty.
    pub fn shrink(&self, delta: f64) -> Option<AlignedBox> {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for k in 0..self.dim() {
            lo.set(k, lo.get(k) + delta);
            hi.set(k, hi.get(k) - delta);
            if lo.get(k) > hi.get(k) {
                return None;
            }
        }
        Some(AlignedBox { lo, hi })
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &AlignedBox) -> AlignedBox {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for k in 0..self.dim() {
            lo.set(k, lo.get(k).min(other.lo.get(k)));
            hi.set(k, hi.get(k).max(other.hi.get(k)));
        }
        AlignedBox { lo, hi }
    }
}

/// One primitive of a [`CompactSetSpec`]: an axis-aligned box or a Euclidean
/// ball, optionally padded by a closed sup-norm neighborhood.
#[derive(Clone, Debug)]
pub enum Shape {
    Box(AlignedBox),
    Ball { center: Point, radius: f64 },
}

#[derive(Clone, Debug)]
pub struct PaddedShape {
    pub shape: Shape,
    /// Sup-norm dilation applied to the shape.
    pub pad: f64,
}

impl PaddedShape {
    fn dim(&self) -> usize {
        match &self.shape {
            Shape::Box(b) => b.dim(),
            Shape::Ball { center, .. } => center.dim(),
        }
    }

    /// Sup-norm distance from `p` to the padded shape (0 inside).
    pub fn dist_sup(&self, p: &Point) -> f64 {
        let raw = match &self.shape {
            Shape::Box(b) => b.dist_sup(p),
            Shape::Ball { center, radius } => sup_dist_to_euclid_ball(p, center, *radius),
        };
        (raw - self.pad).max(0.0)
    }

    /// A lower bound on the Euclidean distance (exact for boxes and
    /// unpadded balls; conservative for padded balls).
    pub fn dist_euclid_lower(&self, p: &Point) -> f64 {
        match &self.shape {
            Shape::Box(b) => b.grow(self.pad).dist_euclid(p),
            Shape::Ball { center, radius } => {
                let pad = self.pad * (p.dim() as f64).sqrt();
                (p.dist_euclid(center) - radius - pad).max(0.0)
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.dist_sup(p) <= 0.0
    }

    /// Per-axis sup-norm extent `[lo, hi]`.
    pub fn extent(&self) -> AlignedBox {
        match &self.shape {
            Shape::Box(b) => b.grow(self.pad),
            Shape::Ball { center, radius } => AlignedBox::sup_ball(center, radius + self.pad),
        }
    }
}

/// Sup-norm distance from a point to a closed Euclidean ball.
///
/// This is the smallest `t >= 0` with `dist_2(c, Box(x, t)) <= r`, found by
/// solving the piecewise quadratic `sum_k max(0, |x_k - c_k| - t)^2 = r^2`.
pub fn sup_dist_to_euclid_ball(x: &Point, center: &Point, radius: f64) -> f64 {
    let d = x.dim();
    let mut gaps: Vec<f64> = (0..d).map(|k| (x.get(k) - center.get(k)).abs()).collect();
    gaps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if x.dist_euclid(center) <= radius {
        return 0.0;
    }
    // With t in [gaps[m], gaps[m-1]] exactly the first m coordinates are active.
    let mut sum_a = 0.0;
    let mut sum_a2 = 0.0;
    for m in 1..=d {
        sum_a += gaps[m - 1];
        sum_a2 += gaps[m - 1] * gaps[m - 1];
        let hi = gaps[m - 1];
        let lo = if m < d { gaps[m] } else { 0.0 };
        // Solve m t^2 - 2 t sum_a + (sum_a2 - r^2) = 0 on [lo, hi].
        let mf = m as f64;
        let disc = sum_a * sum_a - mf * (sum_a2 - radius * radius);
        if disc >= 0.0 {
            let t = (sum_a - disc.sqrt()) / mf;
            if t >= lo - 1e-12 && t <= hi + 1e-12 {
                return t.max(0.0);
            }
        }
    }
    0.0
}

/// A compact subset of R^d given as a finite union of boxes and balls.
#[derive(Clone, Debug, Default)]
pub struct CompactSetSpec {
    pub shapes: Vec<PaddedShape>,
}

impl CompactSetSpec {
    pub fn from_boxes(boxes: Vec<AlignedBox>) -> Self {
        CompactSetSpec {
            shapes: boxes
                .into_iter()
                .map(|b| PaddedShape {
                    shape: Shape::Box(b),
                    pad: 0.0,
                })
                .collect(),
        }
    }

    pub fn from_balls(balls: Vec<(Point, f64)>) -> Self {
        CompactSetSpec {
            shapes: balls
                .into_iter()
                .map(|(center, radius)| PaddedShape {
                    shape: Shape::Ball { center, radius },
                    pad: 0.0,
                })
                .collect(),
        }
    }

    pub fn single_point(p: Point) -> Self {
        CompactSetSpec::from_boxes(vec![AlignedBox::new(p, p)])
    }

    pub fn dim(&self) -> Result<usize> {
        let d = self
            .shapes
            .first()
            .ok_or_else(|| Error::geometry("empty compact set"))?
            .dim();
        if self.shapes.iter().any(|s| s.dim() != d) {
            return Err(Error::geometry("mixed dimensions in compact set"));
        }
        Ok(d)
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.shapes.iter().any(|s| s.contains(p))
    }

    /// Sup-norm distance to the set.
    pub fn dist_sup(&self, p: &Point) -> f64 {
        self.shapes
            .iter()
            .map(|s| s.dist_sup(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Lower bound on the Euclidean distance to the set.
    pub fn dist_euclid_lower(&self, p: &Point) -> f64 {
        self.shapes
            .iter()
            .map(|s| s.dist_euclid_lower(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Bounding box of the whole union.
    pub fn bounding_box(&self) -> Result<AlignedBox> {
        let mut it = self.shapes.iter();
        let first = it
            .next()
            .ok_or_else(|| Error::geometry("empty compact set"))?
            .extent();
        Ok(it.fold(first, |acc, s| acc.hull(&s.extent())))
    }

    /// Sup-norm radius of the smallest origin-centered ball containing the set.
    pub fn bounding_radius(&self) -> Result<f64> {
        let bb = self.bounding_box()?;
        let mut r = 0.0f64;
        for k in 0..bb.dim() {
            r = r.max(bb.lo.get(k).abs()).max(bb.hi.get(k).abs());
        }
        Ok(r)
    }

    /// Check `A` is contained in the open ball `B(0, m)`.
    pub fn fits_in_ball(&self, m: f64) -> Result<bool> {
        Ok(self.bounding_radius()? < m)
    }

    /// The closed sup-distance `delta`-neighborhood. Exact for box unions;
    /// for balls the pad is tracked separately so membership stays exact.
    pub fn dilate(&self, delta: f64) -> Result<CompactSetSpec> {
        if delta < 0.0 {
            return Err(Error::parameter("dilation radius must be nonnegative"));
        }
        Ok(CompactSetSpec {
            shapes: self
                .shapes
                .iter()
                .map(|s| match &s.shape {
                    Shape::Box(b) => PaddedShape {
                        shape: Shape::Box(b.grow(s.pad + delta)),
                        pad: 0.0,
                    },
                    other => PaddedShape {
                        shape: other.clone(),
                        pad: s.pad + delta,
                    },
                })
                .collect(),
        })
    }

    /// Sup-norm erosion. Exact for unpadded boxes; balls shrink
    /// conservatively (the result is contained in the true erosion).
    pub fn erode(&self, delta: f64) -> CompactSetSpec {
        let shapes = self
            .shapes
            .iter()
            .filter_map(|s| match &s.shape {
                Shape::Box(b) => b.grow(s.pad).shrink(delta).map(|bb| PaddedShape {
                    shape: Shape::Box(bb),
                    pad: 0.0,
                }),
                Shape::Ball { center, radius } => {
                    let d = center.dim() as f64;
                    let r = radius + s.pad - delta * d.sqrt();
                    (r > 0.0).then(|| PaddedShape {
                        shape: Shape::Ball {
                            center: *center,
                            radius: r,
                        },
                        pad: 0.0,
                    })
                }
            })
            .collect();
        CompactSetSpec { shapes }
    }

    /// Scale the whole set by a factor (exact when `c` is a power of two).
    pub fn scale(&self, c: f64) -> CompactSetSpec {
        CompactSetSpec {
            shapes: self
                .shapes
                .iter()
                .map(|s| PaddedShape {
                    shape: match &s.shape {
                        Shape::Box(b) => Shape::Box(AlignedBox::new(b.lo.scale(c), b.hi.scale(c))),
                        Shape::Ball { center, radius } => Shape::Ball {
                            center: center.scale(c),
                            radius: radius * c,
                        },
                    },
                    pad: s.pad * c,
                })
                .collect(),
        }
    }
}

/// A finite set of L-box base points in `L Z^d`, with the derived discrete
/// union and its continuum filling.
#[derive(Clone, Debug)]
pub struct LatticeBoxSet {
    pub dim: usize,
    pub side: i64,
    pub bases: Vec<LatticePoint>,
    /// Claimed separation factor: distinct bases at sup-distance >= K * side.
    pub separation: Option<i64>,
}

impl LatticeBoxSet {
    pub fn new(dim: usize, side: i64, bases: Vec<LatticePoint>, separation: Option<i64>) -> Result<Self> {
        if side < 1 {
            return Err(Error::parameter("box side must be >= 1"));
        }
        if bases.is_empty() {
            return Err(Error::geometry("empty lattice box set"));
        }
        for b in &bases {
            if b.dim() != dim {
                return Err(Error::geometry("base point dimension mismatch"));
            }
            if b.as_slice().iter().any(|&c| c % side != 0) {
                return Err(Error::geometry("base points must lie in side * Z^d"));
            }
        }
        let set = LatticeBoxSet {
            dim,
            side,
            bases,
            separation,
        };
        if let Some(k) = separation {
            set.check_separation(k)?;
        }
        Ok(set)
    }

    /// Verify distinct bases are at sup-distance >= factor * side.
    pub fn check_separation(&self, factor: i64) -> Result<()> {
        let min = factor * self.side;
        for i in 0..self.bases.len() {
            for j in (i + 1)..self.bases.len() {
                let d = self.bases[i].dist_sup(&self.bases[j]);
                if d < min {
                    return Err(Error::geometry(format!(
                        "separation violated: bases at sup-distance {d} < {min}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// All lattice points of the discrete union `C`.
    pub fn discrete_points(&self) -> Vec<LatticePoint> {
        let mut out = Vec::new();
        for z in &self.bases {
            let mut idx = vec![0i64; self.dim];
            loop {
                let mut p = *z;
                for k in 0..self.dim {
                    p.set(k, z.get(k) + idx[k]);
                }
                out.push(p);
                // odometer increment
                let mut k = 0;
                loop {
                    idx[k] += 1;
                    if idx[k] < self.side {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                    if k == self.dim {
                        break;
                    }
                }
                if k == self.dim {
                    break;
                }
            }
        }
        out
    }

    /// The continuum filling: union of closed boxes `z + [0, L]^d`.
    pub fn continuum_filling(&self) -> CompactSetSpec {
        CompactSetSpec::from_boxes(
            self.bases
                .iter()
                .map(|z| {
                    let lo = z.to_point();
                    let mut hi = lo;
                    for k in 0..self.dim {
                        hi.set(k, lo.get(k) + self.side as f64);
                    }
                    AlignedBox::new(lo, hi)
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3(x: f64, y: f64, z: f64) -> Point {
        Point::from_slice(&[x, y, z])
    }

    #[test]
    fn box_clip_volume() {
        let a = AlignedBox::new(p3(0.0, 0.0, 0.0), p3(1.0, 1.0, 1.0));
        let b = AlignedBox::new(p3(0.5, -1.0, 0.25), p3(2.0, 0.5, 0.75));
        assert!((a.intersection_volume(&b) - 0.5 * 0.5 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn dilate_point_gives_cube() {
        let a = CompactSetSpec::single_point(Point::zero(3));
        let d = a.dilate(1.0).unwrap();
        assert!(d.contains(&p3(1.0, -1.0, 1.0)));
        assert!(!d.contains(&p3(1.0001, 0.0, 0.0)));
    }

    #[test]
    fn dilate_zero_is_identity() {
        let a = CompactSetSpec::from_boxes(vec![AlignedBox::new(p3(0.0, 0.0, 0.0), p3(1.0, 1.0, 1.0))]);
        let d = a.dilate(0.0).unwrap();
        assert!(d.contains(&p3(1.0, 1.0, 1.0)));
        assert!(!d.contains(&p3(1.0 + 1e-12, 1.0, 1.0)));
    }

    #[test]
    fn dilate_two_boxes_overlap_at_midpoint() {
        // Two unit boxes 3 apart; delta = 2 makes them overlap in the middle.
        let a = CompactSetSpec::from_boxes(vec![
            AlignedBox::new(p3(0.0, 0.0, 0.0), p3(1.0, 1.0, 1.0)),
            AlignedBox::new(p3(4.0, 0.0, 0.0), p3(5.0, 1.0, 1.0)),
        ]);
        let d = a.dilate(2.0).unwrap();
        let mid = p3(2.5, 0.5, 0.5);
        assert!(d.contains(&mid));
        // Direct sup-distance oracle.
        assert!(a.dist_sup(&mid) <= 2.0);
    }

    #[test]
    fn dilate_composition_equals_sum_for_boxes() {
        let a = CompactSetSpec::from_boxes(vec![AlignedBox::new(p3(0.0, 0.0, 0.0), p3(1.0, 2.0, 1.0))]);
        let two_step = a.dilate(0.5).unwrap().dilate(0.75).unwrap();
        let one_step = a.dilate(1.25).unwrap();
        for s in 0..100 {
            let mut st = crate::rng::Stream::new(s);
            let q = p3(
                st.uniform_range(-2.0, 3.0),
                st.uniform_range(-2.0, 4.0),
                st.uniform_range(-2.0, 3.0),
            );
            assert_eq!(two_step.contains(&q), one_step.contains(&q));
        }
    }

    #[test]
    fn dilate_monotone_in_delta_and_set() {
        let small = CompactSetSpec::from_boxes(vec![AlignedBox::new(p3(0.0, 0.0, 0.0), p3(1.0, 1.0, 1.0))]);
        let big = CompactSetSpec::from_boxes(vec![
            AlignedBox::new(p3(0.0, 0.0, 0.0), p3(1.0, 1.0, 1.0)),
            AlignedBox::new(p3(2.0, 0.0, 0.0), p3(3.0, 1.0, 1.0)),
        ]);
        let mut st = crate::rng::Stream::new(7);
        for _ in 0..200 {
            let q = p3(
                st.uniform_range(-2.0, 5.0),
                st.uniform_range(-2.0, 3.0),
                st.uniform_range(-2.0, 3.0),
            );
            if small.dilate(0.5).unwrap().contains(&q) {
                assert!(small.dilate(1.0).unwrap().contains(&q));
                assert!(big.dilate(0.5).unwrap().contains(&q));
            }
        }
    }

    #[test]
    fn sup_dist_to_ball_certifies_touching_box() {
        let mut st = crate::rng::Stream::new(3);
        for _ in 0..200 {
            let c = p3(st.normal(), st.normal(), st.normal());
            let r = 0.5 + st.uniform();
            let x = p3(
                st.normal() * 3.0,
                st.normal() * 3.0,
                st.normal() * 3.0,
            );
            let t = sup_dist_to_euclid_ball(&x, &c, r);
            if t == 0.0 {
                assert!(x.dist_euclid(&c) <= r + 1e-9);
            } else {
                // The box B(x, t) must touch the sphere: closest box point at distance r.
                let mut s = 0.0;
                for k in 0..3 {
                    let gap = ((c.get(k) - x.get(k)).abs() - t).max(0.0);
                    s += gap * gap;
                }
                assert!(
                    (s.sqrt() - r).abs() < 1e-9,
                    "gap {} vs r {r}",
                    s.sqrt()
                );
            }
        }
    }

    #[test]
    fn lattice_box_set_separation() {
        let z0 = LatticePoint::from_slice(&[0, 0, 0]);
        let z1 = LatticePoint::from_slice(&[8, 0, 0]);
        assert!(LatticeBoxSet::new(3, 2, vec![z0, z1], Some(4)).is_ok());
        assert!(LatticeBoxSet::new(3, 2, vec![z0, z1], Some(5)).is_err());
    }

    #[test]
    fn continuum_filling_has_right_volume() {
        let z0 = LatticePoint::from_slice(&[0, 0, 0]);
        let set = LatticeBoxSet::new(3, 4, vec![z0], None).unwrap();
        let fill = set.continuum_filling();
        let bb = fill.bounding_box().unwrap();
        assert!((bb.volume() - 64.0).abs() < 1e-12);
        assert_eq!(set.discrete_points().len(), 64);
    }
}

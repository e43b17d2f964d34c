//! The bounded set `U0`, its complement `U1`, and exact volume queries.

use super::raster::RasterDomain;
use super::AlignedBox;
use crate::error::{Error, Result};
use crate::point::Point;

/// Which side of the segmentation a query refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    U0,
    U1,
}

/// A finite union of dyadic boxes with pairwise disjoint interiors. Used for
/// multi-scale fixtures that a dense raster cannot resolve.
#[derive(Clone, Debug)]
pub struct BoxListDomain {
    pub dim: usize,
    pub boxes: Vec<AlignedBox>,
}

impl BoxListDomain {
    pub fn new(dim: usize, boxes: Vec<AlignedBox>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::geometry("domain must be nonempty"));
        }
        for b in &boxes {
            if b.dim() != dim {
                return Err(Error::geometry("box dimension mismatch"));
            }
        }
        // Disjoint interiors keep volume queries additive.
        for i in 0..boxes.len() {
            for j in (i + 1)..boxes.len() {
                if boxes[i].intersection_volume(&boxes[j]) > 0.0 {
                    return Err(Error::geometry(format!(
                        "boxes {i} and {j} have overlapping interiors"
                    )));
                }
            }
        }
        Ok(BoxListDomain { dim, boxes })
    }

    pub fn clip_u0_volume(&self, a: &Point, b: &Point) -> f64 {
        let q = AlignedBox::new(*a, *b);
        self.boxes.iter().map(|bx| bx.intersection_volume(&q)).sum()
    }

    pub fn support_box(&self) -> AlignedBox {
        let mut it = self.boxes.iter();
        let first = *it.next().expect("nonempty");
        it.fold(first, |acc, b| acc.hull(b))
    }
}

/// Exact grid representation of the bounded Borel set `U0` (with
/// `U1 = R^d \ U0` implicit). All paper operations stay inside this class,
/// so every density in the crate is exact.
#[derive(Clone, Debug)]
pub enum DyadicIndicator {
    Raster(RasterDomain),
    Boxes(BoxListDomain),
}

impl DyadicIndicator {
    pub fn dim(&self) -> usize {
        match self {
            DyadicIndicator::Raster(r) => r.dim,
            DyadicIndicator::Boxes(b) => b.dim,
        }
    }

    /// Finest resolvable level. Rasters resolve down to their cell side;
    /// box-union volumes are exact at any scale, capped only by where f64
    /// dyadic arithmetic stays exact.
    pub fn ell_max(&self) -> i32 {
        match self {
            DyadicIndicator::Raster(r) => r.ell_max,
            DyadicIndicator::Boxes(_) => 48,
        }
    }

    /// Exponent `E` with the support box contained in `B(0, 2^E)`.
    pub fn extent_exponent(&self) -> i32 {
        let bb = self.support_box();
        let mut m = 0.0f64;
        for k in 0..self.dim() {
            m = m.max(bb.lo.get(k).abs()).max(bb.hi.get(k).abs());
        }
        m.max(1e-300).log2().ceil() as i32
    }

    pub fn support_box(&self) -> AlignedBox {
        match self {
            DyadicIndicator::Raster(r) => {
                let (lo, hi) = r.support_box();
                AlignedBox::new(lo, hi)
            }
            DyadicIndicator::Boxes(b) => b.support_box(),
        }
    }

    /// Exact Lebesgue measure of `B(x, r) ∩ U_side`.
    pub fn clip_volume(&self, x: &Point, r: f64, side: Side) -> f64 {
        assert!(r > 0.0, "clip radius must be positive");
        let q = AlignedBox::sup_ball(x, r);
        let inside = match self {
            DyadicIndicator::Raster(rd) => rd.clip_u0_volume(&q.lo, &q.hi),
            DyadicIndicator::Boxes(b) => b.clip_u0_volume(&q.lo, &q.hi),
        };
        match side {
            Side::U0 => inside,
            Side::U1 => (q.volume() - inside).max(0.0),
        }
    }

    /// Is `x` in the closed set `U0`?
    pub fn contains_u0(&self, x: &Point) -> bool {
        match self {
            DyadicIndicator::Raster(r) => r.contains_u0(x),
            DyadicIndicator::Boxes(b) => b.boxes.iter().any(|bx| bx.contains(x)),
        }
    }

    /// Does `B(x, r)` avoid `U1` entirely (so the ball sits inside `U0`)?
    pub fn ball_clears_u1(&self, x: &Point, r: f64) -> bool {
        let q = AlignedBox::sup_ball(x, r);
        let vol = self.clip_volume(x, r, Side::U0);
        (q.volume() - vol).abs() <= 1e-12 * q.volume()
    }

    /// Translate the domain by an exactly-representable vector.
    pub fn translate(&self, shift: &Point) -> Result<DyadicIndicator> {
        match self {
            DyadicIndicator::Boxes(b) => {
                let boxes = b
                    .boxes
                    .iter()
                    .map(|bx| AlignedBox::new(bx.lo.add(shift), bx.hi.add(shift)))
                    .collect();
                Ok(DyadicIndicator::Boxes(BoxListDomain::new(b.dim, boxes)?))
            }
            DyadicIndicator::Raster(r) => {
                let h = r.cell_side();
                let mut lo = r.support_lo.clone();
                for k in 0..r.dim {
                    let cells = shift.get(k) / h;
                    if cells.fract() != 0.0 {
                        return Err(Error::geometry(
                            "raster translation must be a whole number of cells",
                        ));
                    }
                    lo[k] += cells as i64;
                }
                Ok(DyadicIndicator::Raster(RasterDomain::new(
                    r.ell_max,
                    lo,
                    r.cells.clone(),
                )?))
            }
        }
    }

    /// Scale by `2^k` (exact in floating point).
    pub fn scale_pow2(&self, k: i32) -> Result<DyadicIndicator> {
        let c = (2.0f64).powi(k);
        match self {
            DyadicIndicator::Boxes(b) => {
                let boxes = b
                    .boxes
                    .iter()
                    .map(|bx| AlignedBox::new(bx.lo.scale(c), bx.hi.scale(c)))
                    .collect();
                Ok(DyadicIndicator::Boxes(BoxListDomain::new(b.dim, boxes)?))
            }
            DyadicIndicator::Raster(r) => {
                if r.ell_max - k < 0 {
                    return Err(Error::parameter("scaling below cell resolution"));
                }
                Ok(DyadicIndicator::Raster(RasterDomain::new(
                    r.ell_max - k,
                    r.support_lo.clone(),
                    r.cells.clone(),
                )?))
            }
        }
    }

    /// Points on the interface `S = ∂U0` with sup-norm covering radius at
    /// most `spacing`.
    pub fn boundary_points(&self, spacing: f64) -> Vec<Point> {
        match self {
            DyadicIndicator::Raster(r) => {
                let h = r.cell_side();
                let mut out = Vec::new();
                for (idx, axis, pos) in r.boundary_faces() {
                    let mut lo = Point::zero(r.dim);
                    let mut hi = Point::zero(r.dim);
                    for k in 0..r.dim {
                        let c = (r.support_lo[k] + idx[k] as i64) as f64 * h;
                        if k == axis {
                            let face = if pos { c + h } else { c };
                            lo.set(k, face);
                            hi.set(k, face);
                        } else {
                            lo.set(k, c);
                            hi.set(k, c + h);
                        }
                    }
                    sample_face(&lo, &hi, spacing, &mut out);
                }
                out
            }
            DyadicIndicator::Boxes(b) => {
                let mut out = Vec::new();
                let probe = 0.125
                    * b.boxes
                        .iter()
                        .flat_map(|bx| (0..b.dim).map(move |k| bx.hi.get(k) - bx.lo.get(k)))
                        .fold(f64::INFINITY, f64::min);
                for bx in &b.boxes {
                    for axis in 0..b.dim {
                        for pos in [false, true] {
                            let mut lo = bx.lo;
                            let mut hi = bx.hi;
                            let face = if pos { bx.hi.get(axis) } else { bx.lo.get(axis) };
                            lo.set(axis, face);
                            hi.set(axis, face);
                            let mut cand = Vec::new();
                            sample_face(&lo, &hi, spacing, &mut cand);
                            // Keep only points genuinely on S: a vanishing
                            // ball must meet both U0 and U1.
                            for p in cand {
                                let v0 = self.clip_volume(&p, probe, Side::U0);
                                let full = (2.0 * probe).powi(b.dim as i32);
                                if v0 > 1e-12 * full && v0 < full * (1.0 - 1e-12) {
                                    out.push(p);
                                }
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

/// Grid points on an axis-aligned face (one degenerate axis) with covering
/// radius at most `spacing`.
fn sample_face(lo: &Point, hi: &Point, spacing: f64, out: &mut Vec<Point>) {
    let dim = lo.dim();
    let mut counts = vec![1usize; dim];
    for k in 0..dim {
        let len = hi.get(k) - lo.get(k);
        if len > 0.0 {
            counts[k] = (len / (2.0 * spacing)).ceil().max(1.0) as usize;
        }
    }
    let mut idx = vec![0usize; dim];
    'outer: loop {
        let mut p = Point::zero(dim);
        for k in 0..dim {
            let len = hi.get(k) - lo.get(k);
            let step = len / counts[k] as f64;
            p.set(k, lo.get(k) + (idx[k] as f64 + 0.5) * step);
        }
        out.push(p);
        for k in 0..dim {
            idx[k] += 1;
            if idx[k] < counts[k] {
                continue 'outer;
            }
            idx[k] = 0;
            if k + 1 == dim {
                return;
            }
        }
    }
}

//! Deterministic fixture geometries for experiments and tests.

use super::domain::{BoxListDomain, DyadicIndicator};
use super::raster::RasterDomain;
use super::AlignedBox;
use crate::error::{Error, Result};
use crate::point::Point;

/// Named fixture geometries.
#[derive(Clone, Debug)]
pub enum Fixture {
    /// A pile of parallelepipeds shrinking geometrically along `+e1`: stage k
    /// has length `8 * 2^-l_{k-1}` and cross-section `8 * 2^-l_k`, where
    /// `l_k = ell0 + k * sep`. The origin sits at depth `4 * 2^-ell0`.
    CactusPile {
        dim: usize,
        ell0: i32,
        sep: i32,
        stages: usize,
    },
    /// A two-armed pile where the `+e1` ray meets the balanced-density bands
    /// of levels `ell0, ell0+sep, ell0+2sep` in that order, while the `-e1`
    /// ray meets them in the order `ell0, ell0+2sep, ell0+sep`.
    CrossingOrder { dim: usize, ell0: i32, sep: i32 },
    /// Cube shell: `B(0, r) \ int B(0, r - thickness)` in sup-norm.
    Shell { dim: usize, r: f64, thickness: f64 },
    /// Cube shell with a periodic grid of square holes punched through each
    /// face (raster-backed; all lengths must be dyadic multiples of the cell).
    PerforatedShell {
        dim: usize,
        r: f64,
        thickness: f64,
        spacing: f64,
        hole: f64,
        ell_max: i32,
    },
}

/// Scale levels of a cactus pile: `l_k = ell0 + k * sep`.
pub fn cactus_levels(ell0: i32, sep: i32, stages: usize) -> Vec<i32> {
    (0..=stages as i32).map(|k| ell0 + k * sep).collect()
}

pub fn fixture(f: &Fixture) -> Result<DyadicIndicator> {
    match f {
        Fixture::CactusPile {
            dim,
            ell0,
            sep,
            stages,
        } => cactus_pile(*dim, *ell0, *sep, *stages),
        Fixture::CrossingOrder { dim, ell0, sep } => crossing_order(*dim, *ell0, *sep),
        Fixture::Shell { dim, r, thickness } => shell(*dim, *r, *thickness),
        Fixture::PerforatedShell {
            dim,
            r,
            thickness,
            spacing,
            hole,
            ell_max,
        } => perforated_shell(*dim, *r, *thickness, *spacing, *hole, *ell_max),
    }
}

fn pow2(e: i32) -> f64 {
    (2.0f64).powi(-e)
}

fn cactus_pile(dim: usize, ell0: i32, sep: i32, stages: usize) -> Result<DyadicIndicator> {
    if sep < 5 {
        return Err(Error::parameter("cactus separation must be >= 5"));
    }
    let mut boxes = Vec::new();
    // Stage 0: the sup-ball B(0, 4 * 2^-ell0).
    let r0 = 4.0 * pow2(ell0);
    boxes.push(AlignedBox::sup_ball(&Point::zero(dim), r0));
    let mut tip = r0;
    for k in 1..=stages {
        let lk = ell0 + k as i32 * sep;
        let len = 8.0 * pow2(lk - sep);
        let half = 4.0 * pow2(lk);
        let mut lo = Point::zero(dim);
        let mut hi = Point::zero(dim);
        lo.set(0, tip);
        hi.set(0, tip + len);
        for j in 1..dim {
            lo.set(j, -half);
            hi.set(j, half);
        }
        boxes.push(AlignedBox::new(lo, hi));
        tip += len;
    }
    // Pieces attach at the previous tip, so interiors are disjoint.
    Ok(DyadicIndicator::Boxes(BoxListDomain::new(dim, boxes)?))
}

fn crossing_order(dim: usize, ell0: i32, sep: i32) -> Result<DyadicIndicator> {
    if sep < 5 {
        return Err(Error::parameter("crossing-order separation must be >= 5"));
    }
    let d0 = 8.0 * pow2(ell0);
    let d1 = 8.0 * pow2(ell0 + sep);
    let d2 = 8.0 * pow2(ell0 + 2 * sep);
    let x0 = 0.5 * d0;
    let x1 = x0 + d0;

    let mut boxes = Vec::new();
    // Two positive-arm stages of the cactus pile.
    boxes.push(AlignedBox::sup_ball(&Point::zero(dim), x0));
    boxes.push(cross_section_box(dim, x0, x0 + d0, 0.5 * d1));
    boxes.push(cross_section_box(dim, x1, x1 + d1, 0.5 * d2));

    // Negative arm: a d1-thick tube on [-x1, -x0], with a d2-thick core
    // removed from its leftmost d1-long stretch.
    boxes.push(cross_section_box(dim, -x0 - (d0 - d1), -x0, 0.5 * d1));
    let hollow_lo = -x1;
    let hollow_hi = -x1 + d1;
    // Annular cross-section [-d1/2, d1/2]^{d-1} \ (-d2/2, d2/2)^{d-1},
    // peeled into 2(d-1) boxes.
    for axis in 1..dim {
        for side in [false, true] {
            let mut lo = Point::zero(dim);
            let mut hi = Point::zero(dim);
            lo.set(0, hollow_lo);
            hi.set(0, hollow_hi);
            for j in 1..dim {
                match j.cmp(&axis) {
                    std::cmp::Ordering::Less => {
                        lo.set(j, -0.5 * d2);
                        hi.set(j, 0.5 * d2);
                    }
                    std::cmp::Ordering::Equal => {
                        if side {
                            lo.set(j, 0.5 * d2);
                            hi.set(j, 0.5 * d1);
                        } else {
                            lo.set(j, -0.5 * d1);
                            hi.set(j, -0.5 * d2);
                        }
                    }
                    std::cmp::Ordering::Greater => {
                        lo.set(j, -0.5 * d1);
                        hi.set(j, 0.5 * d1);
                    }
                }
            }
            boxes.push(AlignedBox::new(lo, hi));
        }
    }
    Ok(DyadicIndicator::Boxes(BoxListDomain::new(dim, boxes)?))
}

fn cross_section_box(dim: usize, a: f64, b: f64, half: f64) -> AlignedBox {
    let mut lo = Point::zero(dim);
    let mut hi = Point::zero(dim);
    lo.set(0, a);
    hi.set(0, b);
    for j in 1..dim {
        lo.set(j, -half);
        hi.set(j, half);
    }
    AlignedBox::new(lo, hi)
}

fn shell(dim: usize, r: f64, thickness: f64) -> Result<DyadicIndicator> {
    if thickness <= 0.0 || thickness >= r {
        return Err(Error::parameter("shell thickness must be in (0, r)"));
    }
    let inner = r - thickness;
    let mut boxes = Vec::new();
    // Peel the cube annulus axis by axis into 2d disjoint slabs.
    for axis in 0..dim {
        for side in [false, true] {
            let mut lo = Point::zero(dim);
            let mut hi = Point::zero(dim);
            for j in 0..dim {
                match j.cmp(&axis) {
                    std::cmp::Ordering::Less => {
                        lo.set(j, -inner);
                        hi.set(j, inner);
                    }
                    std::cmp::Ordering::Equal => {
                        if side {
                            lo.set(j, inner);
                            hi.set(j, r);
                        } else {
                            lo.set(j, -r);
                            hi.set(j, -inner);
                        }
                    }
                    std::cmp::Ordering::Greater => {
                        lo.set(j, -r);
                        hi.set(j, r);
                    }
                }
            }
            boxes.push(AlignedBox::new(lo, hi));
        }
    }
    Ok(DyadicIndicator::Boxes(BoxListDomain::new(dim, boxes)?))
}

fn perforated_shell(
    dim: usize,
    r: f64,
    thickness: f64,
    spacing: f64,
    hole: f64,
    ell_max: i32,
) -> Result<DyadicIndicator> {
    if thickness <= 0.0 || thickness >= r {
        return Err(Error::parameter("shell thickness must be in (0, r)"));
    }
    if hole >= spacing {
        return Err(Error::parameter("hole must be smaller than spacing"));
    }
    let h = pow2(ell_max);
    for (name, v) in [("r", r), ("thickness", thickness), ("spacing", spacing), ("hole", hole)] {
        let cells = v / h;
        if (cells - cells.round()).abs() > 1e-9 || cells < 1.0 {
            return Err(Error::parameter(format!(
                "{name} = {v} is not resolvable at ell_max = {ell_max}"
            )));
        }
    }
    let half_cells = (r / h).round() as i64;
    let extent = vec![(2 * half_cells) as usize; dim];
    let support_lo = vec![-half_cells; dim];
    let inner = r - thickness;
    let dom = RasterDomain::from_predicate(ell_max, support_lo, extent, |c| {
        let norm = (0..dim).map(|k| c.get(k).abs()).fold(0.0f64, f64::max);
        if norm < inner || norm > r {
            return false;
        }
        // Face direction: the axis realizing the sup-norm.
        let axis = (0..dim)
            .max_by(|&a, &b| c.get(a).abs().partial_cmp(&c.get(b).abs()).unwrap())
            .unwrap();
        // Hole lattice on the lateral coordinates.
        let in_hole = (0..dim).filter(|&k| k != axis).all(|k| {
            let v = c.get(k);
            let frac = v - (v / spacing).round() * spacing;
            frac.abs() < 0.5 * hole
        });
        !in_hole
    })?;
    Ok(DyadicIndicator::Raster(dom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::Side;
    use crate::geometry::raster::{unbounded_complement_component, BitGrid};

    #[test]
    fn cactus_origin_depth() {
        // d(0, U1) = 4 * 2^-ell0: the ball of that radius around 0 avoids U1.
        let dom = fixture(&Fixture::CactusPile {
            dim: 3,
            ell0: 0,
            sep: 5,
            stages: 2,
        })
        .unwrap();
        assert!(dom.ball_clears_u1(&Point::zero(3), 4.0));
        let v = dom.clip_volume(&Point::zero(3), 4.0 + 1e-6, Side::U1);
        assert!(v > 0.0, "just past the depth, U1 must appear");
    }

    #[test]
    fn shell_encloses_origin() {
        let dom = fixture(&Fixture::Shell {
            dim: 3,
            r: 1.0,
            thickness: 0.25,
        })
        .unwrap();
        // Rasterize occupancy coarsely and flood from outside: the center
        // cell must not join the unbounded component.
        let n = 16usize;
        let mut blocked = BitGrid::new(&[n, n, n]);
        let step = 2.5 / n as f64;
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let p = Point::from_slice(&[
                        -1.25 + (x as f64 + 0.5) * step,
                        -1.25 + (y as f64 + 0.5) * step,
                        -1.25 + (z as f64 + 0.5) * step,
                    ]);
                    if dom.contains_u0(&p) {
                        blocked.set(&[x, y, z], true);
                    }
                }
            }
        }
        let u1 = unbounded_complement_component(&blocked).unwrap();
        assert!(!u1.get(&[n / 2, n / 2, n / 2]));
    }

    #[test]
    fn perforated_shell_resolvability_errors() {
        assert!(perforated_shell(3, 1.0, 0.25, 0.3, 0.1, 4).is_err());
        assert!(perforated_shell(3, 1.0, 0.25, 0.25, 0.125, 4).is_ok());
    }

    #[test]
    fn perforated_shell_has_holes() {
        let dom = fixture(&Fixture::PerforatedShell {
            dim: 3,
            r: 1.0,
            thickness: 0.25,
            spacing: 0.5,
            hole: 0.25,
            ell_max: 4,
        })
        .unwrap();
        // The +e1 axis point (1 - t/2, 0, 0) sits inside a hole center.
        let p = Point::from_slice(&[0.875, 0.0, 0.0]);
        assert!(!dom.contains_u0(&p));
        // Off the hole lattice the shell is solid.
        let q = Point::from_slice(&[0.875, 0.25, 0.25]);
        assert!(dom.contains_u0(&q));
    }
}

//! Dense bit rasters, prefix-sum volume tables, and flood fill.

use crate::error::{Error, Result};
use crate::point::Point;

/// A d-dimensional bit grid with row-major (axis 0 fastest) layout.
#[derive(Clone, Debug)]
pub struct BitGrid {
    pub dim: usize,
    pub extent: Vec<usize>,
    words: Vec<u64>,
}

impl BitGrid {
    pub fn new(extent: &[usize]) -> Self {
        let cells: usize = extent.iter().product();
        BitGrid {
            dim: extent.len(),
            extent: extent.to_vec(),
            words: vec![0; cells.div_ceil(64)],
        }
    }

    pub fn cells(&self) -> usize {
        self.extent.iter().product()
    }

    #[inline]
    pub fn linear(&self, idx: &[usize]) -> usize {
        let mut lin = 0usize;
        for k in (0..self.dim).rev() {
            lin = lin * self.extent[k] + idx[k];
        }
        lin
    }

    pub fn unlinear(&self, mut lin: usize, idx: &mut [usize]) {
        for k in 0..self.dim {
            idx[k] = lin % self.extent[k];
            lin /= self.extent[k];
        }
    }

    #[inline]
    pub fn get_linear(&self, lin: usize) -> bool {
        (self.words[lin >> 6] >> (lin & 63)) & 1 == 1
    }

    #[inline]
    pub fn set_linear(&mut self, lin: usize, v: bool) {
        if v {
            self.words[lin >> 6] |= 1 << (lin & 63);
        } else {
            self.words[lin >> 6] &= !(1 << (lin & 63));
        }
    }

    pub fn get(&self, idx: &[usize]) -> bool {
        self.get_linear(self.linear(idx))
    }

    pub fn set(&mut self, idx: &[usize], v: bool) {
        let lin = self.linear(idx);
        self.set_linear(lin, v);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_subset_of(&self, other: &BitGrid) -> bool {
        assert_eq!(self.extent, other.extent);
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }
}

/// The component of the complement of `blocked` connected to the grid frame,
/// under face adjacency. Errors if every frame cell is blocked.
pub fn unbounded_complement_component(blocked: &BitGrid) -> Result<BitGrid> {
    let cells = blocked.cells();
    let mut reached = BitGrid::new(&blocked.extent);
    let mut queue: Vec<usize> = Vec::new();
    let mut idx = vec![0usize; blocked.dim];

    for lin in 0..cells {
        blocked.unlinear(lin, &mut idx);
        let on_frame = idx
            .iter()
            .zip(&blocked.extent)
            .any(|(&i, &e)| i == 0 || i + 1 == e);
        if on_frame && !blocked.get_linear(lin) {
            reached.set_linear(lin, true);
            queue.push(lin);
        }
    }
    if queue.is_empty() {
        return Err(Error::NoUnboundedComponent);
    }

    // Precompute linear strides per axis.
    let mut stride = vec![1usize; blocked.dim];
    for k in 1..blocked.dim {
        stride[k] = stride[k - 1] * blocked.extent[k - 1];
    }

    while let Some(lin) = queue.pop() {
        blocked.unlinear(lin, &mut idx);
        for k in 0..blocked.dim {
            if idx[k] > 0 {
                let n = lin - stride[k];
                if !blocked.get_linear(n) && !reached.get_linear(n) {
                    reached.set_linear(n, true);
                    queue.push(n);
                }
            }
            if idx[k] + 1 < blocked.extent[k] {
                let n = lin + stride[k];
                if !blocked.get_linear(n) && !reached.get_linear(n) {
                    reached.set_linear(n, true);
                    queue.push(n);
                }
            }
        }
    }
    Ok(reached)
}

/// A bounded dyadic-grid set: the cells of side `2^-ell_max` inside the
/// support box that belong to the set.
#[derive(Clone, Debug)]
pub struct RasterDomain {
    pub dim: usize,
    /// Cells have side `2^-ell_max`.
    pub ell_max: i32,
    /// Support box corner, in cell units (multiples of the cell side).
    pub support_lo: Vec<i64>,
    pub extent: Vec<usize>,
    pub cells: BitGrid,
    /// Inclusive prefix sums of cell counts, extent+1 per axis.
    prefix: Vec<f64>,
    prefix_extent: Vec<usize>,
    prefix_stride: Vec<usize>,
}

impl RasterDomain {
    pub fn new(ell_max: i32, support_lo: Vec<i64>, cells: BitGrid) -> Result<Self> {
        if ell_max < 0 {
            return Err(Error::parameter("ell_max must be >= 0"));
        }
        if cells.count_ones() == 0 {
            return Err(Error::geometry("domain must contain at least one cell"));
        }
        let dim = cells.dim;
        if support_lo.len() != dim {
            return Err(Error::geometry("support corner dimension mismatch"));
        }
        let extent = cells.extent.clone();
        let mut dom = RasterDomain {
            dim,
            ell_max,
            support_lo,
            extent,
            cells,
            prefix: Vec::new(),
            prefix_extent: Vec::new(),
            prefix_stride: Vec::new(),
        };
        dom.build_prefix();
        Ok(dom)
    }

    /// Build from a predicate evaluated at cell centers (in real coordinates).
    pub fn from_predicate<F>(
        ell_max: i32,
        support_lo: Vec<i64>,
        extent: Vec<usize>,
        mut pred: F,
    ) -> Result<Self>
    where
        F: FnMut(&Point) -> bool,
    {
        let dim = extent.len();
        let h = (0.5f64).powi(ell_max);
        let mut grid = BitGrid::new(&extent);
        let cells = grid.cells();
        let mut idx = vec![0usize; dim];
        let mut center = Point::zero(dim);
        for lin in 0..cells {
            grid.unlinear(lin, &mut idx);
            for k in 0..dim {
                center.set(k, (support_lo[k] + idx[k] as i64) as f64 * h + 0.5 * h);
            }
            if pred(&center) {
                grid.set_linear(lin, true);
            }
        }
        RasterDomain::new(ell_max, support_lo, grid)
    }

    pub fn cell_side(&self) -> f64 {
        (0.5f64).powi(self.ell_max)
    }

    /// Support box in real coordinates.
    pub fn support_box(&self) -> (Point, Point) {
        let h = self.cell_side();
        let mut lo = Point::zero(self.dim);
        let mut hi = Point::zero(self.dim);
        for k in 0..self.dim {
            lo.set(k, self.support_lo[k] as f64 * h);
            hi.set(k, (self.support_lo[k] + self.extent[k] as i64) as f64 * h);
        }
        (lo, hi)
    }

    fn build_prefix(&mut self) {
        let pe: Vec<usize> = self.extent.iter().map(|e| e + 1).collect();
        let total: usize = pe.iter().product();
        let mut prefix = vec![0.0f64; total];
        let mut stride = vec![1usize; self.dim];
        for k in 1..self.dim {
            stride[k] = stride[k - 1] * pe[k - 1];
        }
        let mut idx = vec![0usize; self.dim];
        // prefix[i] = count of set cells in product of [0, i_k).
        for lin in 0..total {
            let mut rem = lin;
            for k in 0..self.dim {
                idx[k] = rem % pe[k];
                rem /= pe[k];
            }
            if idx.iter().any(|&i| i == 0) {
                continue;
            }
            let cell: Vec<usize> = idx.iter().map(|&i| i - 1).collect();
            let mut v = if self.cells.get(&cell) { 1.0 } else { 0.0 };
            // Inclusion-exclusion over lower corners.
            for mask in 1usize..(1 << self.dim) {
                let mut j = lin;
                let mut sign = 1.0;
                for (k, s) in stride.iter().enumerate() {
                    if mask >> k & 1 == 1 {
                        j -= s;
                        sign = -sign;
                    }
                }
                v -= sign * prefix[j];
            }
            prefix[lin] = v;
        }
        self.prefix = prefix;
        self.prefix_stride = stride;
        self.prefix_extent = pe;
    }

    /// Count of set cells with index in the product of `[lo_k, hi_k)`.
    fn box_count(&self, lo: &[usize], hi: &[usize]) -> f64 {
        let mut total = 0.0;
        for mask in 0usize..(1 << self.dim) {
            let mut lin = 0usize;
            let mut sign = 1.0;
            for k in 0..self.dim {
                let coord = if mask >> k & 1 == 1 {
                    sign = -sign;
                    lo[k]
                } else {
                    hi[k]
                };
                lin += coord * self.prefix_stride[k];
            }
            total += sign * self.prefix[lin];
        }
        total
    }

    /// Exact volume of `Q ∩ U0` where `Q` is the box `[a, b]` given in real
    /// coordinates. Computed as a weighted cell-count with at most three
    /// constant-weight segments per axis against the prefix table.
    pub fn clip_u0_volume(&self, a: &Point, b: &Point) -> f64 {
        use crate::point::MAX_DIM;
        // Per-axis segments (lo_cell, hi_cell, weight in cell units).
        let mut segs = [[(0usize, 0usize, 0.0f64); 3]; MAX_DIM];
        let mut seg_count = [0usize; MAX_DIM];
        let scale = (2.0f64).powi(self.ell_max);
        for k in 0..self.dim {
            let lo = (a.get(k) * scale - self.support_lo[k] as f64).max(0.0);
            let hi = (b.get(k) * scale - self.support_lo[k] as f64).min(self.extent[k] as f64);
            if hi <= lo {
                return 0.0;
            }
            let mut n = 0usize;
            let ilo = lo.floor() as usize;
            if hi <= (ilo + 1) as f64 {
                segs[k][n] = (ilo, ilo + 1, hi - lo);
                n += 1;
            } else {
                let head = (ilo + 1) as f64 - lo;
                if head > 0.0 {
                    segs[k][n] = (ilo, ilo + 1, head);
                    n += 1;
                }
                let ihi = hi.floor() as usize;
                let full_lo = ilo + 1;
                let full_hi = ihi.min(self.extent[k]);
                if full_hi > full_lo {
                    segs[k][n] = (full_lo, full_hi, 1.0);
                    n += 1;
                }
                let tail = hi - ihi as f64;
                if tail > 0.0 && ihi < self.extent[k] {
                    segs[k][n] = (ihi, ihi + 1, tail);
                    n += 1;
                }
            }
            seg_count[k] = n;
        }
        // Sum over segment combinations.
        let mut total = 0.0;
        let mut pick = [0usize; MAX_DIM];
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        let cell_vol = self.cell_side().powi(self.dim as i32);
        'outer: loop {
            let mut w = 1.0;
            for k in 0..self.dim {
                let (l, h, wk) = segs[k][pick[k]];
                w *= wk;
                lo[k] = l;
                hi[k] = h;
            }
            total += w * self.box_count(&lo[..self.dim], &hi[..self.dim]);
            for k in 0..self.dim {
                pick[k] += 1;
                if pick[k] < seg_count[k] {
                    continue 'outer;
                }
                pick[k] = 0;
                if k + 1 == self.dim {
                    return total * cell_vol;
                }
            }
        }
    }

    /// Weighted sum over cells of `w_0(i_0) * ... * w_{d-1}(i_{d-1})` for set
    /// cells, with per-axis weight tables starting at cell index `start[k]`.
    pub fn weighted_cell_sum(&self, start: &[i64], weights: &[Vec<f64>]) -> f64 {
        // Clip the weight windows to the grid.
        let mut lo = vec![0usize; self.dim];
        let mut hi = vec![0usize; self.dim];
        for k in 0..self.dim {
            let s = start[k].max(0) as usize;
            let e = ((start[k] + weights[k].len() as i64).min(self.extent[k] as i64)).max(0) as usize;
            if e <= s {
                return 0.0;
            }
            lo[k] = s;
            hi[k] = e;
        }
        let mut idx = lo.clone();
        let mut total = 0.0;
        'outer: loop {
            let mut w = 1.0;
            for k in 0..self.dim {
                w *= weights[k][(idx[k] as i64 - start[k]) as usize];
            }
            if w != 0.0 && self.cells.get(&idx) {
                total += w;
            }
            for k in 0..self.dim {
                idx[k] += 1;
                if idx[k] < hi[k] {
                    continue 'outer;
                }
                idx[k] = lo[k];
                if k + 1 == self.dim {
                    return total;
                }
            }
        }
    }

    /// Is the point inside the closed cell union?
    pub fn contains_u0(&self, p: &Point) -> bool {
        // A boundary point of a cell belongs to U0 when any incident cell is
        // set, so probe a vanishing box around the point.
        let eps = 0.25 * self.cell_side();
        let a = Point::from_slice(&(0..self.dim).map(|k| p.get(k) - eps).collect::<Vec<_>>());
        let b = Point::from_slice(&(0..self.dim).map(|k| p.get(k) + eps).collect::<Vec<_>>());
        let v = self.clip_u0_volume(&a, &b);
        // Interior points of set cells give the full box volume; points on a
        // set-cell face still give at least one quadrant.
        v >= 0.5 * eps.powi(self.dim as i32)
    }

    /// New domain with one cell cleared (for monotonicity tests).
    pub fn with_cell_cleared(&self, idx: &[usize]) -> Result<RasterDomain> {
        let mut cells = self.cells.clone();
        cells.set(idx, false);
        RasterDomain::new(self.ell_max, self.support_lo.clone(), cells)
    }

    /// Exposed boundary faces: (cell index, axis, positive side).
    pub fn boundary_faces(&self) -> Vec<(Vec<usize>, usize, bool)> {
        let mut out = Vec::new();
        let cells = self.cells.cells();
        let mut idx = vec![0usize; self.dim];
        for lin in 0..cells {
            if !self.cells.get_linear(lin) {
                continue;
            }
            self.cells.unlinear(lin, &mut idx);
            for k in 0..self.dim {
                for (pos, delta) in [(false, -1i64), (true, 1i64)] {
                    let nk = idx[k] as i64 + delta;
                    let exposed = if nk < 0 || nk >= self.extent[k] as i64 {
                        true
                    } else {
                        let mut n = idx.clone();
                        n[k] = nk as usize;
                        !self.cells.get(&n)
                    };
                    if exposed {
                        out.push((idx.clone(), k, pos));
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn random_domain(seed: u64, ell_max: i32, extent: usize, fill: f64) -> RasterDomain {
        let mut s = Stream::new(seed);
        let ext = vec![extent; 3];
        let mut grid = BitGrid::new(&ext);
        for lin in 0..grid.cells() {
            if s.uniform() < fill {
                grid.set_linear(lin, true);
            }
        }
        if grid.count_ones() == 0 {
            grid.set_linear(0, true);
        }
        RasterDomain::new(ell_max, vec![-(extent as i64) / 2; 3], grid).unwrap()
    }

    /// Brute-force oracle: sum of exact box-cell intersection volumes.
    fn clip_oracle(dom: &RasterDomain, a: &Point, b: &Point) -> f64 {
        let h = dom.cell_side();
        let mut idx = vec![0usize; dom.dim];
        let mut total = 0.0;
        for lin in 0..dom.cells.cells() {
            if !dom.cells.get_linear(lin) {
                continue;
            }
            dom.cells.unlinear(lin, &mut idx);
            let mut v = 1.0;
            for k in 0..dom.dim {
                let clo = (dom.support_lo[k] + idx[k] as i64) as f64 * h;
                let chi = clo + h;
                let lo = clo.max(a.get(k));
                let hi = chi.min(b.get(k));
                if hi <= lo {
                    v = 0.0;
                    break;
                }
                v *= hi - lo;
            }
            total += v;
        }
        total
    }

    #[test]
    fn clip_volume_matches_brute_force() {
        let dom = random_domain(12, 4, 12, 0.4);
        let mut s = Stream::new(99);
        for _ in 0..300 {
            let c = Point::from_slice(&[
                s.uniform_range(-0.6, 0.6),
                s.uniform_range(-0.6, 0.6),
                s.uniform_range(-0.6, 0.6),
            ]);
            let r = s.uniform_range(0.01, 0.5);
            let a = Point::from_slice(&[c.get(0) - r, c.get(1) - r, c.get(2) - r]);
            let b = Point::from_slice(&[c.get(0) + r, c.get(1) + r, c.get(2) + r]);
            let fast = dom.clip_u0_volume(&a, &b);
            let slow = clip_oracle(&dom, &a, &b);
            let scale = slow.abs().max(1e-12);
            assert!(
                (fast - slow).abs() / scale < 1e-12,
                "fast {fast} slow {slow}"
            );
        }
    }

    #[test]
    fn flood_fill_hollow_shell_blocks_interior() {
        // 7^3 grid with a blocked shell at radius 2 around the center.
        let mut blocked = BitGrid::new(&[7, 7, 7]);
        for x in 0..7usize {
            for y in 0..7usize {
                for z in 0..7usize {
                    let d = [x, y, z]
                        .iter()
                        .map(|&v| (v as i64 - 3).abs())
                        .max()
                        .unwrap();
                    if d == 2 {
                        blocked.set(&[x, y, z], true);
                    }
                }
            }
        }
        let u1 = unbounded_complement_component(&blocked).unwrap();
        assert!(!u1.get(&[3, 3, 3]), "interior must not reach the frame");
        assert!(u1.get(&[0, 0, 0]));

        // Punch one face cell: interior joins the unbounded component.
        blocked.set(&[3, 3, 1], false);
        let u1_open = unbounded_complement_component(&blocked).unwrap();
        assert!(u1_open.get(&[3, 3, 3]));
    }

    #[test]
    fn flood_fill_empty_blocked_is_everything() {
        let blocked = BitGrid::new(&[5, 5, 5]);
        let u1 = unbounded_complement_component(&blocked).unwrap();
        assert_eq!(u1.count_ones(), 125);
    }

    #[test]
    fn flood_fill_full_blocked_errors() {
        let mut blocked = BitGrid::new(&[3, 3, 3]);
        for lin in 0..27 {
            blocked.set_linear(lin, true);
        }
        assert!(unbounded_complement_component(&blocked).is_err());
    }

    #[test]
    fn flood_fill_idempotent_and_monotone() {
        let mut s = Stream::new(5);
        for trial in 0..20 {
            let mut blocked = BitGrid::new(&[8, 8, 8]);
            for lin in 0..blocked.cells() {
                if s.uniform() < 0.3 {
                    blocked.set_linear(lin, true);
                }
            }
            let u1 = match unbounded_complement_component(&blocked) {
                Ok(g) => g,
                Err(_) => continue,
            };
            // Idempotent: re-running on the complement of U1 returns U1.
            let mut reblocked = BitGrid::new(&[8, 8, 8]);
            for lin in 0..reblocked.cells() {
                reblocked.set_linear(lin, !u1.get_linear(lin));
            }
            let u1b = unbounded_complement_component(&reblocked).unwrap();
            for lin in 0..u1.cells() {
                assert_eq!(u1.get_linear(lin), u1b.get_linear(lin), "trial {trial}");
            }
            // Monotone: block more cells => smaller U1.
            let mut more = blocked.clone();
            for lin in 0..more.cells() {
                if s.uniform() < 0.1 {
                    more.set_linear(lin, true);
                }
            }
            if let Ok(u1_more) = unbounded_complement_component(&more) {
                assert!(u1_more.is_subset_of(&u1));
            }
        }
    }

    #[test]
    fn prefix_counts_match_popcount() {
        let dom = random_domain(3, 3, 9, 0.5);
        let n = dom.box_count(&[0, 0, 0], &[9, 9, 9]);
        assert_eq!(n as usize, dom.cells.count_ones());
    }
}

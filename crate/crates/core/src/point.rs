//! Small fixed-capacity point types for low-dimensional geometry.
//!
//! Dimension is a runtime value (the experiments run mostly at `d = 3`,
//! occasionally `d = 4`), but points are stored inline so hot loops never
//! allocate. `MAX_DIM` bounds the supported dimension.

pub const MAX_DIM: usize = 6;

/// A point of `R^d`, `d <= MAX_DIM`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl Point {
    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "dimension out of range");
        Point {
            coords: [0.0; MAX_DIM],
            dim,
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut p = Point::zero(v.len());
        p.coords[..v.len()].copy_from_slice(v);
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords[..self.dim]
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.coords[k]
    }

    #[inline]
    pub fn set(&mut self, k: usize, v: f64) {
        self.coords[k] = v;
    }

    pub fn add(&self, other: &Point) -> Point {
        let mut out = *self;
        for k in 0..self.dim {
            out.coords[k] += other.coords[k];
        }
        out
    }

    pub fn sub(&self, other: &Point) -> Point {
        let mut out = *self;
        for k in 0..self.dim {
            out.coords[k] -= other.coords[k];
        }
        out
    }

    pub fn scale(&self, c: f64) -> Point {
        let mut out = *self;
        for k in 0..self.dim {
            out.coords[k] *= c;
        }
        out
    }

    /// Sup-norm distance to another point.
    pub fn dist_sup(&self, other: &Point) -> f64 {
        let mut m = 0.0f64;
        for k in 0..self.dim {
            m = m.max((self.coords[k] - other.coords[k]).abs());
        }
        m
    }

    /// Euclidean distance to another point.
    pub fn dist_euclid(&self, other: &Point) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let t = self.coords[k] - other.coords[k];
            s += t * t;
        }
        s.sqrt()
    }

    pub fn norm_sup(&self) -> f64 {
        let mut m = 0.0f64;
        for k in 0..self.dim {
            m = m.max(self.coords[k].abs());
        }
        m
    }

    pub fn norm_l1(&self) -> f64 {
        self.as_slice().iter().map(|v| v.abs()).sum()
    }

    pub fn norm_euclid(&self) -> f64 {
        self.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A point of `Z^d`, `d <= MAX_DIM`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint {
    coords: [i64; MAX_DIM],
    dim: usize,
}

impl LatticePoint {
    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "dimension out of range");
        LatticePoint {
            coords: [0; MAX_DIM],
            dim,
        }
    }

    pub fn from_slice(v: &[i64]) -> Self {
        let mut p = LatticePoint::zero(v.len());
        p.coords[..v.len()].copy_from_slice(v);
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[i64] {
        &self.coords[..self.dim]
    }

    #[inline]
    pub fn get(&self, k: usize) -> i64 {
        self.coords[k]
    }

    #[inline]
    pub fn set(&mut self, k: usize, v: i64) {
        self.coords[k] = v;
    }

    pub fn add(&self, other: &LatticePoint) -> LatticePoint {
        let mut out = *self;
        for k in 0..self.dim {
            out.coords[k] += other.coords[k];
        }
        out
    }

    pub fn sub(&self, other: &LatticePoint) -> LatticePoint {
        let mut out = *self;
        for k in 0..self.dim {
            out.coords[k] -= other.coords[k];
        }
        out
    }

    /// The 2d unit neighbors.
    pub fn neighbors(&self) -> Vec<LatticePoint> {
        let mut out = Vec::with_capacity(2 * self.dim);
        for k in 0..self.dim {
            for s in [-1i64, 1] {
                let mut p = *self;
                p.coords[k] += s;
                out.push(p);
            }
        }
        out
    }

    pub fn dist_sup(&self, other: &LatticePoint) -> i64 {
        let mut m = 0i64;
        for k in 0..self.dim {
            m = m.max((self.coords[k] - other.coords[k]).abs());
        }
        m
    }

    pub fn norm_sup(&self) -> i64 {
        let mut m = 0i64;
        for k in 0..self.dim {
            m = m.max(self.coords[k].abs());
        }
        m
    }

    pub fn norm_euclid(&self) -> f64 {
        self.as_slice()
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_point(&self) -> Point {
        let mut p = Point::zero(self.dim);
        for k in 0..self.dim {
            p.set(k, self.coords[k] as f64);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_agree_with_manual() {
        let p = Point::from_slice(&[3.0, -4.0, 1.0]);
        let q = Point::zero(3);
        assert_eq!(p.dist_sup(&q), 4.0);
        assert_eq!(p.norm_l1(), 8.0);
        assert!((p.dist_euclid(&q) - 26.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lattice_neighbors_count() {
        let p = LatticePoint::zero(3);
        assert_eq!(p.neighbors().len(), 6);
    }
}

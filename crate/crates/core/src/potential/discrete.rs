//! Equilibrium measures and capacities for the walk on Z^d.
//!
//! The equilibrium weight of a finite set vanishes off the inner boundary
//! (from an interior point the walk re-enters the set at its first step),
//! so the kernel system is collocated on boundary points only. Cubes get a
//! dedicated solver that factors out the hyperoctahedral symmetry, which
//! collapses a 24k-point surface into a few hundred orbits.

use super::green::LatticeGreenTable;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, conjugate_gradient, solve_lu, Matrix};
use crate::point::LatticePoint;
use rayon::prelude::*;
use std::collections::HashSet;

/// Support, nonnegative weights, total mass (= capacity), and residual
/// diagnostics of an equilibrium problem; shared by the discrete and
/// continuum solvers.
#[derive(Clone, Debug)]
pub struct EquilibriumSolution {
    pub points: Vec<LatticePoint>,
    pub weights: Vec<f64>,
    pub capacity: f64,
    pub max_residual: f64,
}

impl EquilibriumSolution {
    /// Potential `sum_y G(x, y) w(y)`; equals 1 on the set up to tolerance.
    pub fn potential(&self, table: &LatticeGreenTable, x: &LatticePoint) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| table.at(x, y) * w)
            .sum()
    }

    /// Total weight inside a sup-norm box `[lo, lo + side)^d`.
    pub fn mass_in_box(&self, lo: &LatticePoint, side: i64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(p, _)| {
                (0..p.dim()).all(|k| {
                    let c = p.get(k) - lo.get(k);
                    c >= 0 && c < side
                })
            })
            .map(|(_, w)| w)
            .sum()
    }
}

const DENSE_LIMIT: usize = 1400;
const SOLVER_BUDGET: usize = 40_000;

/// Equilibrium measure and capacity of a finite set.
pub fn discrete_capacity(points: &[LatticePoint], table: &LatticeGreenTable) -> Result<EquilibriumSolution> {
    if points.is_empty() {
        return Err(Error::geometry("empty set has no equilibrium measure"));
    }
    let dim = table.dim;
    let set: HashSet<LatticePoint> = points.iter().copied().collect();
    // Essential support: points with a neighbor outside the set.
    let mut boundary: Vec<LatticePoint> = set
        .iter()
        .filter(|p| p.neighbors().iter().any(|n| !set.contains(n)))
        .copied()
        .collect();
    boundary.sort();
    let n = boundary.len();
    if n > SOLVER_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "{n} boundary points exceeds solver budget {SOLVER_BUDGET}"
        )));
    }

    let weights = if n <= DENSE_LIMIT {
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, table.at(&boundary[i], &boundary[j]));
            }
        }
        match cholesky(a.clone()) {
            Ok(l) => cholesky_solve(&l, &vec![1.0; n]),
            Err(_) => solve_lu(a, &vec![1.0; n])?,
        }
    } else {
        let apply = |x: &[f64], out: &mut [f64]| {
            out.par_iter_mut().enumerate().for_each(|(i, o)| {
                let mut s = 0.0;
                let pi = &boundary[i];
                let mut off = [0i64; crate::point::MAX_DIM];
                for (pj, &xj) in boundary.iter().zip(x) {
                    for k in 0..dim {
                        off[k] = pi.get(k) - pj.get(k);
                    }
                    s += table.at_offset(&off[..dim]) * xj;
                }
                *o = s;
            });
        };
        let guess = vec![1.0 / (table.at_origin() * 2.0); n];
        let (w, _, _) = conjugate_gradient(apply, &vec![1.0; n], Some(&guess), 1e-11, 600)?;
        w
    };

    finish_solution(boundary, weights, &set, table)
}

fn finish_solution(
    points: Vec<LatticePoint>,
    weights: Vec<f64>,
    full_set: &HashSet<LatticePoint>,
    table: &LatticeGreenTable,
) -> Result<EquilibriumSolution> {
    let capacity: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < -1e-10 * capacity.max(1e-300)) {
        return Err(Error::invariant(format!(
            "negative equilibrium weight {:.3e}",
            weights.iter().cloned().fold(f64::INFINITY, f64::min)
        )));
    }
    let sol = EquilibriumSolution {
        points,
        weights,
        capacity,
        max_residual: 0.0,
    };
    // Residual on a sample of the full set (boundary and interior alike).
    let sample: Vec<&LatticePoint> = full_set.iter().take(200).collect();
    let max_residual = sample
        .par_iter()
        .map(|x| (sol.potential(table, x) - 1.0).abs())
        .reduce(|| 0.0, f64::max);
    Ok(EquilibriumSolution {
        max_residual,
        ..sol
    })
}

/// All lattice points of the cube `base + [0, side)^d`.
pub fn cube_points(dim: usize, base: &LatticePoint, side: i64) -> Vec<LatticePoint> {
    let mut out = Vec::with_capacity((side as usize).pow(dim as u32));
    let mut idx = vec![0i64; dim];
    loop {
        let mut p = *base;
        for k in 0..dim {
            p.set(k, base.get(k) + idx[k]);
        }
        out.push(p);
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < side {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == dim {
                return out;
            }
        }
    }
}

/// Equilibrium solution of the origin cube `[0, side)^d`, solved in the
/// symmetry-reduced orbit basis.
pub fn cube_equilibrium(dim: usize, side: i64, table: &LatticeGreenTable) -> Result<EquilibriumSolution> {
    if side < 1 {
        return Err(Error::parameter("cube side must be >= 1"));
    }
    if side <= 2 {
        // No interior; solve directly.
        let pts = cube_points(dim, &LatticePoint::zero(dim), side);
        return discrete_capacity(&pts, table);
    }
    // Surface points of the cube.
    let all = cube_points(dim, &LatticePoint::zero(dim), side);
    let surface: Vec<LatticePoint> = all
        .iter()
        .filter(|p| (0..dim).any(|k| p.get(k) == 0 || p.get(k) == side - 1))
        .copied()
        .collect();
    // Orbit key: sorted |2x - (side-1)| (doubled centered coordinates).
    let orbit_key = |p: &LatticePoint| -> Vec<i64> {
        let mut v: Vec<i64> = (0..dim).map(|k| (2 * p.get(k) - (side - 1)).abs()).collect();
        v.sort_unstable_by(|a, b| b.cmp(a));
        v
    };
    let mut keys: Vec<Vec<i64>> = Vec::new();
    let mut orbit_of: Vec<usize> = Vec::with_capacity(surface.len());
    let mut key_index: std::collections::HashMap<Vec<i64>, usize> = std::collections::HashMap::new();
    for p in &surface {
        let k = orbit_key(p);
        let id = *key_index.entry(k.clone()).or_insert_with(|| {
            keys.push(k);
            keys.len() - 1
        });
        orbit_of.push(id);
    }
    let n_orb = keys.len();
    // One representative per orbit.
    let mut reps = vec![usize::MAX; n_orb];
    for (i, &o) in orbit_of.iter().enumerate() {
        if reps[o] == usize::MAX {
            reps[o] = i;
        }
    }
    // Reduced collocation: A[i][j] = sum over orbit j of G(rep_i, y).
    let rows: Vec<Vec<f64>> = (0..n_orb)
        .into_par_iter()
        .map(|i| {
            let xi = &surface[reps[i]];
            let mut row = vec![0.0; n_orb];
            let mut off = [0i64; crate::point::MAX_DIM];
            for (j, y) in surface.iter().enumerate() {
                for k in 0..dim {
                    off[k] = xi.get(k) - y.get(k);
                }
                row[orbit_of[j]] += table.at_offset(&off[..dim]);
            }
            row
        })
        .collect();
    let mut a = Matrix::zeros(n_orb, n_orb);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            a.set(i, j, v);
        }
    }
    let w_orb = solve_lu(a, &vec![1.0; n_orb])?;
    let weights: Vec<f64> = orbit_of.iter().map(|&o| w_orb[o]).collect();
    let set: HashSet<LatticePoint> = all.into_iter().collect();
    finish_solution(surface, weights, &set, table)
}

/// Equilibrium solution for a union of equal separated cubes, seeded from
/// the single-cube solution and refined by matrix-free CG.
pub fn box_union_equilibrium(
    dim: usize,
    side: i64,
    bases: &[LatticePoint],
    table: &LatticeGreenTable,
) -> Result<EquilibriumSolution> {
    let single = cube_equilibrium(dim, side, table)?;
    if bases.len() == 1 {
        let points = single
            .points
            .iter()
            .map(|p| p.add(&bases[0]))
            .collect::<Vec<_>>();
        return Ok(EquilibriumSolution { points, ..single });
    }
    let mut points: Vec<LatticePoint> = Vec::with_capacity(single.points.len() * bases.len());
    let mut guess: Vec<f64> = Vec::with_capacity(points.capacity());
    for base in bases {
        for (p, &w) in single.points.iter().zip(&single.weights) {
            points.push(p.add(base));
            guess.push(w);
        }
    }
    let n = points.len();
    if n > SOLVER_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "{n} boundary points exceeds solver budget {SOLVER_BUDGET}"
        )));
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let pi = &points[i];
            let mut s = 0.0;
            let mut off = [0i64; crate::point::MAX_DIM];
            for (pj, &xj) in points.iter().zip(x) {
                for k in 0..dim {
                    off[k] = pi.get(k) - pj.get(k);
                }
                s += table.at_offset(&off[..dim]) * xj;
            }
            *o = s;
        });
    };
    let (weights, _, _) = conjugate_gradient(apply, &vec![1.0; n], Some(&guess), 1e-10, 400)?;
    let mut full: HashSet<LatticePoint> = HashSet::new();
    for base in bases {
        for p in cube_points(dim, base, side) {
            full.insert(p);
        }
    }
    finish_solution(points, weights, &full, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn lp(v: &[i64]) -> LatticePoint {
        LatticePoint::from_slice(v)
    }

    #[test]
    fn singleton_capacity_is_reciprocal_green() {
        let table = LatticeGreenTable::shared(3);
        let sol = discrete_capacity(&[lp(&[0, 0, 0])], table).unwrap();
        let expect = 1.0 / table.at_origin();
        assert!((sol.capacity - expect).abs() < 1e-12);
        assert!((sol.capacity - 0.65946).abs() < 1e-5);
    }

    #[test]
    fn pair_capacity_closed_form() {
        let table = LatticeGreenTable::shared(3);
        let x = lp(&[5, -2, 1]);
        let sol = discrete_capacity(&[lp(&[0, 0, 0]), x], table).unwrap();
        let g0 = table.at_origin();
        let gx = table.at(&lp(&[0, 0, 0]), &x);
        assert!((sol.capacity - 2.0 / (g0 + gx)).abs() < 1e-12);
    }

    #[test]
    fn interior_weights_vanish() {
        let table = LatticeGreenTable::shared(3);
        let pts = cube_points(3, &lp(&[0, 0, 0]), 5);
        let sol = discrete_capacity(&pts, table).unwrap();
        // The solver restricts to the surface; interior points are absent.
        assert_eq!(sol.points.len(), 125 - 27);
        // And the potential is 1 at the center anyway.
        let center = lp(&[2, 2, 2]);
        assert!((sol.potential(table, &center) - 1.0).abs() < 1e-8);
        assert!(sol.max_residual < 1e-8, "residual {}", sol.max_residual);
    }

    #[test]
    fn cube_orbit_solver_matches_direct() {
        let table = LatticeGreenTable::shared(3);
        let direct = discrete_capacity(&cube_points(3, &lp(&[0, 0, 0]), 6), table).unwrap();
        let orbit = cube_equilibrium(3, 6, table).unwrap();
        assert!(
            (direct.capacity - orbit.capacity).abs() < 1e-9 * direct.capacity,
            "{} vs {}",
            direct.capacity,
            orbit.capacity
        );
    }

    #[test]
    fn capacity_monotone_and_subadditive() {
        let table = LatticeGreenTable::shared(3);
        let small = cube_equilibrium(3, 3, table).unwrap();
        let big = cube_equilibrium(3, 5, table).unwrap();
        assert!(small.capacity < big.capacity);
        // Subadditivity on a random pair of disjoint clusters.
        let mut s = Stream::new(4);
        for _ in 0..5 {
            let mut pts1 = Vec::new();
            let mut pts2 = Vec::new();
            for _ in 0..20 {
                pts1.push(lp(&[
                    s.below(4) as i64,
                    s.below(4) as i64,
                    s.below(4) as i64,
                ]));
                pts2.push(lp(&[
                    20 + s.below(4) as i64,
                    s.below(4) as i64,
                    s.below(4) as i64,
                ]));
            }
            pts1.sort();
            pts1.dedup();
            pts2.sort();
            pts2.dedup();
            let c1 = discrete_capacity(&pts1, table).unwrap().capacity;
            let c2 = discrete_capacity(&pts2, table).unwrap().capacity;
            let mut both = pts1.clone();
            both.extend(&pts2);
            let c = discrete_capacity(&both, table).unwrap().capacity;
            assert!(c <= c1 + c2 + 1e-10);
            assert!(c >= c1.max(c2) - 1e-10);
        }
    }

    #[test]
    fn union_solver_matches_direct_small() {
        let table = LatticeGreenTable::shared(3);
        let bases = [lp(&[0, 0, 0]), lp(&[24, 0, 0]), lp(&[0, 24, 24])];
        let union = box_union_equilibrium(3, 4, &bases, table).unwrap();
        let mut pts = Vec::new();
        for b in &bases {
            pts.extend(cube_points(3, b, 4));
        }
        let direct = discrete_capacity(&pts, table).unwrap();
        assert!(
            (union.capacity - direct.capacity).abs() < 1e-8 * direct.capacity,
            "{} vs {}",
            union.capacity,
            direct.capacity
        );
    }
}

//! Discrete-vs-continuum capacity comparisons for separated box unions.

use super::bem::{continuum_capacity, ContinuumSolution};
use super::discrete::{box_union_equilibrium, cube_equilibrium, EquilibriumSolution};
use super::green::{brownian_green, walk_green_quadrature, LatticeGreenTable};
use crate::error::{Error, Result};
use crate::geometry::LatticeBoxSet;
use crate::point::LatticePoint;
use crate::rng::Stream;

/// `a_L = d * wcap(B_L) / cap(B^_L)`: the discrete-to-continuum capacity
/// ratio of a single L-box.
pub fn single_box_ratio(dim: usize, side: i64, table: &LatticeGreenTable) -> Result<f64> {
    let discrete = cube_equilibrium(dim, side, table)?;
    let filling = LatticeBoxSet::new(dim, side, vec![LatticePoint::zero(dim)], None)?
        .continuum_filling();
    let continuum = continuum_capacity(&filling, 8)?;
    Ok(dim as f64 * discrete.capacity / continuum.capacity)
}

/// Empirical lower bound for the Green-comparison constant at separation
/// `K * L`: the max over sampled admissible point pairs of
/// `max(G/dg, dg/G)`, with the extremal pair reported.
#[derive(Clone, Debug)]
pub struct EtaProbe {
    pub eta: f64,
    pub extremal: (LatticePoint, LatticePoint),
    pub pairs: usize,
}

pub fn eta_probe(dim: usize, k: i64, side: i64, n_pairs: usize, seed: u64) -> Result<EtaProbe> {
    if k < 2 {
        return Err(Error::parameter("separation factor must be >= 2"));
    }
    let mut stream = Stream::new(seed).derive_str("eta-probe");
    let mut best = 1.0f64;
    let mut extremal = (LatticePoint::zero(dim), LatticePoint::zero(dim));
    for _ in 0..n_pairs {
        // Base points of two boxes at sup-distance >= K L, plus in-box offsets.
        let mut z2 = LatticePoint::zero(dim);
        let axis = stream.below(dim as u64) as usize;
        for j in 0..dim {
            let extra = stream.below(3) as i64;
            let base = if j == axis { k + extra } else { stream.below(1 + k as u64) as i64 };
            z2.set(j, base * side);
        }
        let mut x1 = LatticePoint::zero(dim);
        let mut x2 = z2;
        for j in 0..dim {
            x1.set(j, stream.below(side as u64) as i64);
            x2.set(j, z2.get(j) + stream.below(side as u64) as i64);
        }
        if x1.sub(&x2).norm_sup() < k * side {
            continue;
        }
        // Continuum points inside the fillings.
        let mut r2 = 0.0;
        let mut rc2 = 0.0;
        for j in 0..dim {
            let d = (x1.get(j) - x2.get(j)) as f64;
            r2 += d * d;
            let dc = d + stream.uniform_range(-0.5, 0.5);
            rc2 += dc * dc;
        }
        let offsets: Vec<u32> = (0..dim)
            .map(|j| (x1.get(j) - x2.get(j)).unsigned_abs() as u32)
            .collect();
        let g_walk = walk_green_quadrature(dim, &offsets);
        let g_brown = dim as f64 * brownian_green(dim, rc2.sqrt().max(1e-9));
        let _ = r2;
        let ratio = (g_walk / g_brown).max(g_brown / g_walk);
        if ratio > best {
            best = ratio;
            extremal = (x1, x2);
        }
    }
    Ok(EtaProbe {
        eta: best,
        extremal,
        pairs: n_pairs,
    })
}

/// One harness row: capacities and sandwich ingredients for a config.
#[derive(Clone, Debug)]
pub struct RatioRow {
    pub k: i64,
    pub side: i64,
    pub n_boxes: usize,
    pub discrete_capacity: f64,
    pub continuum_capacity: f64,
    /// `d * wcap(C) / cap(Gamma)`.
    pub ratio: f64,
    pub a_l: f64,
    pub eta_hat: f64,
    /// Componentwise deviation of the box-aggregated equilibrium from the
    /// single-box mixture.
    pub delta_measured: f64,
    pub sandwich_low: f64,
    pub sandwich_high: f64,
    pub sandwich_holds: bool,
}

/// Build a random admissible config of `n_boxes` bases at pairwise
/// sup-distance >= K * L.
pub fn random_separated_config(
    dim: usize,
    k: i64,
    side: i64,
    n_boxes: usize,
    stream: &mut Stream,
) -> LatticeBoxSet {
    let span = k * (n_boxes as i64 + 2);
    loop {
        let mut bases: Vec<LatticePoint> = Vec::new();
        let mut attempts = 0;
        while bases.len() < n_boxes && attempts < 400 {
            attempts += 1;
            let mut z = LatticePoint::zero(dim);
            for j in 0..dim {
                z.set(j, stream.below(span as u64) as i64 * side);
            }
            if bases.iter().all(|b| b.dist_sup(&z) >= k * side) {
                bases.push(z);
            }
        }
        if bases.len() == n_boxes {
            return LatticeBoxSet::new(dim, side, bases, Some(k)).expect("separated by construction");
        }
    }
}

/// Evaluate the capacity comparison and the equilibrium-measure sandwich
/// for one separated config.
pub fn ratio_config(
    set: &LatticeBoxSet,
    k: i64,
    a_l: f64,
    eta_hat: f64,
    table: &LatticeGreenTable,
) -> Result<RatioRow> {
    set.check_separation(k)?;
    let dim = set.dim;
    let discrete = box_union_equilibrium(dim, set.side, &set.bases, table)?;
    let continuum = continuum_capacity(&set.continuum_filling(), 6)?;
    let ratio = dim as f64 * discrete.capacity / continuum.capacity;

    // Mixture measure: per-box mass times the normalized single-box
    // equilibrium, compared pointwise with the true equilibrium.
    let single = cube_equilibrium(dim, set.side, table)?;
    let by_point: std::collections::HashMap<LatticePoint, f64> = discrete
        .points
        .iter()
        .copied()
        .zip(discrete.weights.iter().copied())
        .collect();
    let mut delta = 0.0f64;
    for base in &set.bases {
        let box_mass = discrete.mass_in_box(base, set.side);
        for (p, &w_single) in single.points.iter().zip(&single.weights) {
            let y = p.add(base);
            let mixture = box_mass * w_single / single.capacity;
            let actual = *by_point
                .get(&y)
                .ok_or_else(|| Error::invariant("equilibrium support mismatch"))?;
            if mixture > 0.0 {
                delta = delta.max((actual / mixture - 1.0).abs());
            }
        }
    }
    let low = (1.0 + delta).recip() * a_l.min(eta_hat.recip());
    let high = (1.0 - delta).recip() * a_l.max(eta_hat);
    let sandwich_holds = ratio >= low - 1e-9 && ratio <= high + 1e-9;
    Ok(RatioRow {
        k,
        side: set.side,
        n_boxes: set.bases.len(),
        discrete_capacity: discrete.capacity,
        continuum_capacity: continuum.capacity,
        ratio,
        a_l,
        eta_hat,
        delta_measured: delta,
        sandwich_low: low,
        sandwich_high: high,
        sandwich_holds,
    })
}

/// The certified hitting lower bound: `cap(target) / cap(source) >= inf`
/// of the target's equilibrium potential over the source's support.
#[derive(Clone, Debug)]
pub struct CapacityRatioBound {
    pub bound: f64,
    pub cap_ratio: f64,
    pub holds: bool,
}

pub fn capacity_hitting_lower_bound(
    source: &ContinuumSolution,
    target: &ContinuumSolution,
) -> CapacityRatioBound {
    let mut inf = f64::INFINITY;
    for panel in &source.panels {
        inf = inf.min(target.potential(&panel.center));
    }
    let cap_ratio = target.capacity / source.capacity;
    CapacityRatioBound {
        bound: inf,
        cap_ratio,
        holds: cap_ratio >= inf - 1e-3,
    }
}

/// Discrete-solution potential at a lattice point (h_F(x)).
pub fn discrete_potential(sol: &EquilibriumSolution, table: &LatticeGreenTable, x: &LatticePoint) -> f64 {
    sol.potential(table, x)
}

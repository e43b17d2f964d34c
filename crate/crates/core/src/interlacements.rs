//! Random-interlacement and random-walk samplers on Z^d, vacant-set
//! disconnection detection, excursion counting, and box classification.
//!
//! The local sampler follows the standard Poissonian description: the trace
//! in a window `W` is the union of `Poisson(u * wcap(W))` independent walks
//! started i.i.d. from the normalized equilibrium measure of `W`, each run
//! until it exits a halo box. The halo truncation error is reported through
//! an escape-probability bound rather than silently dropped.

use crate::error::{Error, Result};
use crate::geometry::CompactSetSpec;
use crate::point::{LatticePoint, Point};
use crate::potential::{discrete_capacity, cube_equilibrium, EquilibriumSolution, LatticeGreenTable};
use crate::rng::{cumulative, Stream};
use rayon::prelude::*;
use std::collections::{HashMap, HashSet};

/// An axis-aligned lattice box `[lo, hi]` (inclusive corners).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeBox {
    pub lo: LatticePoint,
    pub hi: LatticePoint,
}

impl LatticeBox {
    pub fn cube(dim: usize, radius: i64) -> LatticeBox {
        let mut lo = LatticePoint::zero(dim);
        let mut hi = LatticePoint::zero(dim);
        for k in 0..dim {
            lo.set(k, -radius);
            hi.set(k, radius);
        }
        LatticeBox { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        (0..self.dim()).all(|k| p.get(k) >= self.lo.get(k) && p.get(k) <= self.hi.get(k))
    }

    pub fn side_max(&self) -> i64 {
        (0..self.dim())
            .map(|k| self.hi.get(k) - self.lo.get(k) + 1)
            .max()
            .unwrap()
    }

    pub fn points(&self) -> Vec<LatticePoint> {
        let dim = self.dim();
        let mut out = Vec::new();
        let mut idx: Vec<i64> = (0..dim).map(|k| self.lo.get(k)).collect();
        loop {
            out.push(LatticePoint::from_slice(&idx));
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] <= self.hi.get(k) {
                    break;
                }
                idx[k] = self.lo.get(k);
                k += 1;
                if k == dim {
                    return out;
                }
            }
        }
    }
}

/// A recorded walk: start point plus a direction byte per step.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub start: LatticePoint,
    /// Each step is `axis * 2 + (positive ? 1 : 0)`.
    pub steps: Vec<u8>,
}

impl Trajectory {
    pub fn positions(&self) -> TrajectoryIter<'_> {
        TrajectoryIter {
            current: self.start,
            steps: &self.steps,
            i: 0,
        }
    }
}

pub struct TrajectoryIter<'a> {
    current: LatticePoint,
    steps: &'a [u8],
    i: usize,
}

impl Iterator for TrajectoryIter<'_> {
    type Item = LatticePoint;

    fn next(&mut self) -> Option<LatticePoint> {
        if self.i == 0 {
            self.i = 1;
            return Some(self.current);
        }
        if self.i > self.steps.len() {
            return None;
        }
        let code = self.steps[self.i - 1];
        let axis = (code / 2) as usize;
        let sign = if code % 2 == 1 { 1 } else { -1 };
        self.current.set(axis, self.current.get(axis) + sign);
        self.i += 1;
        Some(self.current)
    }
}

/// Walk one SRW step.
#[inline]
fn srw_step(p: &mut LatticePoint, dim: usize, s: &mut Stream) -> u8 {
    let code = s.below(2 * dim as u64) as u8;
    let axis = (code / 2) as usize;
    let sign = if code % 2 == 1 { 1 } else { -1 };
    p.set(axis, p.get(axis) + sign);
    code
}

/// Simple random walk from `x0` recorded until it exits `halo` or reaches
/// `max_steps`.
pub fn sample_srw_until_exit(
    x0: LatticePoint,
    halo: &LatticeBox,
    max_steps: usize,
    stream: &mut Stream,
) -> Trajectory {
    let dim = x0.dim();
    let mut p = x0;
    let mut steps = Vec::new();
    for _ in 0..max_steps {
        if !halo.contains(&p) {
            break;
        }
        steps.push(srw_step(&mut p, dim, stream));
    }
    Trajectory { start: x0, steps }
}

/// A sampled interlacement restriction: trajectories, occupied and vacant
/// sets within the window, and the truncation diagnostics.
#[derive(Clone, Debug)]
pub struct InterlacementSample {
    pub level: f64,
    pub window: LatticeBox,
    pub halo: LatticeBox,
    pub trajectories: Vec<Trajectory>,
    /// Uniform marks for the monotone thinning coupling.
    pub marks: Vec<f64>,
    pub occupied: HashSet<LatticePoint>,
    pub window_capacity: f64,
    /// Escape-probability bound on the halo truncation error.
    pub truncation_bound: f64,
    pub seed_key: u64,
}

impl InterlacementSample {
    /// Occupied set at a thinned level `u <= level` under the coupling.
    pub fn occupied_at(&self, u: f64) -> HashSet<LatticePoint> {
        assert!(u <= self.level + 1e-12);
        let frac = u / self.level;
        let mut occ = HashSet::new();
        for (t, &m) in self.trajectories.iter().zip(&self.marks) {
            if m <= frac {
                for p in t.positions() {
                    if self.window.contains(&p) {
                        occ.insert(p);
                    }
                }
            }
        }
        occ
    }

    pub fn vacant(&self) -> HashSet<LatticePoint> {
        self.window
            .points()
            .into_iter()
            .filter(|p| !self.occupied.contains(p))
            .collect()
    }
}

/// Equilibrium solution of a lattice box window (cube fast path).
pub fn window_equilibrium(window: &LatticeBox, table: &LatticeGreenTable) -> Result<EquilibriumSolution> {
    let dim = window.dim();
    let side = window.hi.get(0) - window.lo.get(0) + 1;
    let is_cube = (0..dim).all(|k| window.hi.get(k) - window.lo.get(k) + 1 == side);
    if is_cube {
        let sol = cube_equilibrium(dim, side, table)?;
        let points = sol.points.iter().map(|p| p.add(&window.lo)).collect();
        Ok(EquilibriumSolution { points, ..sol })
    } else {
        discrete_capacity(&window.points(), table)
    }
}

/// Sample the interlacement restriction to a window at intensity `level`.
///
/// `halo_factor` scales the halo box radius relative to the window diameter
/// (default 4); smaller than 2 is rejected.
pub fn sample_interlacement(
    level: f64,
    window: &LatticeBox,
    halo_factor: i64,
    table: &LatticeGreenTable,
    master: Stream,
) -> Result<InterlacementSample> {
    if level <= 0.0 {
        return Err(Error::parameter("interlacement level must be positive"));
    }
    if halo_factor < 2 {
        return Err(Error::parameter("halo must be at least twice the window diameter"));
    }
    let dim = window.dim();
    let equilibrium = window_equilibrium(window, table)?;
    let cap = equilibrium.capacity;
    let diam = window.side_max();
    let mut halo_lo = LatticePoint::zero(dim);
    let mut halo_hi = LatticePoint::zero(dim);
    for k in 0..dim {
        halo_lo.set(k, window.lo.get(k) - halo_factor * diam);
        halo_hi.set(k, window.hi.get(k) + halo_factor * diam);
    }
    let halo = LatticeBox {
        lo: halo_lo,
        hi: halo_hi,
    };
    // Return probability from the halo shell back to the window.
    let g_max = {
        let shell_dist = (halo_factor * diam) as f64;
        cap * crate::potential::brownian_green(dim, shell_dist) * dim as f64
    };

    let mut s = master.derive_str("interlacement");
    let n = s.poisson(level * cap) as usize;
    let cdf = cumulative(&equilibrium.weights);
    let max_steps = (halo.side_max() * halo.side_max()) as usize * dim * 40;
    let seeds: Vec<(LatticePoint, u64, f64)> = (0..n)
        .map(|_| {
            let start = equilibrium.points[s.discrete(&cdf)];
            (start, s.next_u64(), s.uniform())
        })
        .collect();
    let trajectories: Vec<Trajectory> = seeds
        .par_iter()
        .map(|(start, key, _)| {
            let mut ws = Stream::new(*key);
            sample_srw_until_exit(*start, &halo, max_steps, &mut ws)
        })
        .collect();
    let marks: Vec<f64> = seeds.iter().map(|(_, _, m)| *m).collect();
    let mut occupied = HashSet::new();
    for t in &trajectories {
        for p in t.positions() {
            if window.contains(&p) {
                occupied.insert(p);
            }
        }
    }
    Ok(InterlacementSample {
        level,
        window: *window,
        halo,
        trajectories,
        marks,
        occupied,
        window_capacity: cap,
        truncation_bound: g_max.min(1.0),
        seed_key: 0,
    })
}

/// True when no nearest-neighbor path inside `vacant` joins `a_set` to
/// `s_set` (union-find over vacant cells). An empty `a_set` disconnects
/// by convention.
pub fn disconnect_detect(
    vacant: &HashSet<LatticePoint>,
    a_set: &[LatticePoint],
    s_set: &[LatticePoint],
) -> bool {
    if a_set.is_empty() {
        return true;
    }
    // Union-find over the vacant cells.
    let index: HashMap<&LatticePoint, usize> = vacant.iter().zip(0..).collect();
    let mut parent: Vec<usize> = (0..vacant.len()).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (p, &i) in &index {
        for n in p.neighbors() {
            if let Some(&j) = index.get(&n) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut a_roots = HashSet::new();
    for p in a_set {
        if let Some(&i) = index.get(p) {
            a_roots.insert(find(&mut parent, i));
        }
    }
    if a_roots.is_empty() {
        // A_N entirely occupied: trivially cut off inside the vacant graph.
        return true;
    }
    for p in s_set {
        if let Some(&i) = index.get(p) {
            if a_roots.contains(&find(&mut parent, i)) {
                return false;
            }
        }
    }
    true
}

/// The concentric box triple around a base point: the box itself, the
/// excursion core, and the outer fence.
#[derive(Clone, Copy, Debug)]
pub struct BoxTriple {
    pub base: LatticePoint,
    pub side: i64,
    pub reach: i64,
}

impl BoxTriple {
    pub fn new(base: LatticePoint, side: i64, reach: i64) -> Result<Self> {
        if reach < 4 {
            return Err(Error::parameter("fence factor must be >= 4"));
        }
        Ok(BoxTriple { base, side, reach })
    }

    /// `B = base + [0, L)^d`.
    pub fn inner(&self) -> LatticeBox {
        let mut hi = self.base;
        for k in 0..self.base.dim() {
            hi.set(k, self.base.get(k) + self.side - 1);
        }
        LatticeBox {
            lo: self.base,
            hi,
        }
    }

    /// `D = base + [-3L, 4L)^d`.
    pub fn core(&self) -> LatticeBox {
        let mut lo = self.base;
        let mut hi = self.base;
        for k in 0..self.base.dim() {
            lo.set(k, self.base.get(k) - 3 * self.side);
            hi.set(k, self.base.get(k) + 4 * self.side - 1);
        }
        LatticeBox { lo, hi }
    }

    /// `U = base + [-KL + 1, KL - 1)^d`.
    pub fn fence(&self) -> LatticeBox {
        let mut lo = self.base;
        let mut hi = self.base;
        for k in 0..self.base.dim() {
            lo.set(k, self.base.get(k) - self.reach * self.side + 1);
            hi.set(k, self.base.get(k) + self.reach * self.side - 2);
        }
        LatticeBox { lo, hi }
    }
}

/// A maximal walk segment from entry into the core until first exit of the
/// fence, as index ranges into a trajectory.
#[derive(Clone, Debug)]
pub struct Excursion {
    pub trajectory: usize,
    pub enter: usize,
    pub exit: usize,
}

/// Count and record the excursions of all trajectories from the core of a
/// triple to the exterior boundary of its fence.
pub fn excursions(sample: &InterlacementSample, triple: &BoxTriple) -> Result<Vec<Excursion>> {
    let fence = triple.fence();
    // The halo must contain the fence, otherwise excursions are cut short.
    if !(sample.halo.contains(&fence.lo) && sample.halo.contains(&fence.hi)) {
        return Err(Error::parameter("halo smaller than the excursion fence"));
    }
    let core = triple.core();
    let mut out = Vec::new();
    for (ti, t) in sample.trajectories.iter().enumerate() {
        let mut inside: Option<usize> = None;
        for (pi, p) in t.positions().enumerate() {
            match inside {
                None => {
                    if core.contains(&p) {
                        inside = Some(pi);
                    }
                }
                Some(enter) => {
                    if !fence.contains(&p) {
                        out.push(Excursion {
                            trajectory: ti,
                            enter,
                            exit: pi,
                        });
                        inside = None;
                    }
                }
            }
        }
        if let Some(enter) = inside {
            // Trajectory ended inside the fence: count the partial excursion.
            out.push(Excursion {
                trajectory: ti,
                enter,
                exit: t.steps.len(),
            });
        }
    }
    Ok(out)
}

/// Excursion count `N_u(D)` for a triple.
pub fn excursion_count(sample: &InterlacementSample, triple: &BoxTriple) -> Result<usize> {
    Ok(excursions(sample, triple)?.len())
}

/// Classification flags of one box against the (alpha, beta, gamma)
/// thresholds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoxClass {
    Good,
    Bad,
    /// Not enough recorded excursions to decide; treated as bad.
    Undetermined,
}

#[derive(Clone, Debug)]
pub struct BoxClassification {
    pub class: BoxClass,
    pub excursion_count: usize,
    /// Largest vacant cluster diameter in the box after the alpha-prefix.
    pub cluster_diameter: i64,
    pub cluster_connects_neighbors: bool,
    pub boundary_visits: usize,
}

/// Thresholds for the classification, ordered `alpha > beta > gamma`.
#[derive(Clone, Copy, Debug)]
pub struct ClassThresholds {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ClassThresholds {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha > beta && beta > gamma && gamma > 0.0) {
            return Err(Error::parameter("need alpha > beta > gamma > 0"));
        }
        Ok(ClassThresholds { alpha, beta, gamma })
    }
}

/// Occupied set of an excursion prefix, restricted to a box.
fn prefix_trace(
    sample: &InterlacementSample,
    excursions: &[Excursion],
    prefix: usize,
    within: &LatticeBox,
) -> HashSet<LatticePoint> {
    let mut occ = HashSet::new();
    for e in excursions.iter().take(prefix) {
        let t = &sample.trajectories[e.trajectory];
        for (pi, p) in t.positions().enumerate() {
            if pi < e.enter {
                continue;
            }
            if pi > e.exit {
                break;
            }
            if within.contains(&p) {
                occ.insert(p);
            }
        }
    }
    occ
}

/// Largest face-connected cluster of `points`, returned with its sup-norm
/// diameter.
fn largest_cluster(points: &HashSet<LatticePoint>) -> (Vec<LatticePoint>, i64) {
    let mut best: Vec<LatticePoint> = Vec::new();
    let mut seen: HashSet<LatticePoint> = HashSet::new();
    for p in points {
        if seen.contains(p) {
            continue;
        }
        let mut comp = vec![*p];
        let mut queue = vec![*p];
        seen.insert(*p);
        while let Some(q) = queue.pop() {
            for n in q.neighbors() {
                if points.contains(&n) && seen.insert(n) {
                    comp.push(n);
                    queue.push(n);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    let mut diam = 0i64;
    if !best.is_empty() {
        let dim = best[0].dim();
        for k in 0..dim {
            let lo = best.iter().map(|p| p.get(k)).min().unwrap();
            let hi = best.iter().map(|p| p.get(k)).max().unwrap();
            diam = diam.max(hi - lo);
        }
    }
    (best, diam)
}

/// Classify one box per the three essentials: (i) the complement of the
/// first `floor(alpha * wcap(D))` excursions leaves in the box a connected
/// vacant cluster of diameter at least `side / 10`; (ii) that cluster
/// connects to the analogous clusters of the 2d neighbor boxes through the
/// core while avoiding the first `floor(beta * wcap(D))` excursions; (iii)
/// those beta-prefix excursions accumulate at least `gamma * wcap(D)`
/// visits on the inner boundary of the core.
pub fn classify_box(
    sample: &InterlacementSample,
    triple: &BoxTriple,
    thresholds: &ClassThresholds,
    core_capacity: f64,
    table: &LatticeGreenTable,
) -> Result<BoxClassification> {
    let _ = table;
    let exc = excursions(sample, triple)?;
    let n_alpha = (thresholds.alpha * core_capacity).floor() as usize;
    let n_beta = (thresholds.beta * core_capacity).floor() as usize;
    let visits_needed = thresholds.gamma * core_capacity;

    let inner = triple.inner();
    let core = triple.core();
    let dim = triple.base.dim();

    // (i) vacant cluster in B after the alpha-prefix.
    let occ_alpha = prefix_trace(sample, &exc, n_alpha.min(exc.len()), &inner);
    let vacant_b: HashSet<LatticePoint> = inner
        .points()
        .into_iter()
        .filter(|p| !occ_alpha.contains(p))
        .collect();
    let (cluster, diam) = largest_cluster(&vacant_b);
    let need_diam = triple.side / 10;
    let cond_i = !cluster.is_empty() && diam >= need_diam;

    // (ii) connectivity to neighbor-box clusters through the core, avoiding
    // the beta-prefix trace.
    let occ_beta_core = prefix_trace(sample, &exc, n_beta.min(exc.len()), &core);
    let mut cond_ii = cond_i;
    if cond_i {
        'neighbors: for axis in 0..dim {
            for sign in [-1i64, 1] {
                let mut nb_base = triple.base;
                nb_base.set(axis, triple.base.get(axis) + sign * triple.side);
                let nb_triple = BoxTriple::new(nb_base, triple.side, triple.reach)?;
                let nb_inner = nb_triple.inner();
                // Skip neighbors whose core leaves the halo: no data.
                let nb_core = nb_triple.core();
                if !(sample.halo.contains(&nb_core.lo) && sample.halo.contains(&nb_core.hi)) {
                    continue;
                }
                let nb_exc = excursions(sample, &nb_triple)?;
                let nb_occ =
                    prefix_trace(sample, &nb_exc, n_alpha.min(nb_exc.len()), &nb_inner);
                let nb_vacant: HashSet<LatticePoint> = nb_inner
                    .points()
                    .into_iter()
                    .filter(|p| !nb_occ.contains(p))
                    .collect();
                let (nb_cluster, nb_diam) = largest_cluster(&nb_vacant);
                if nb_cluster.is_empty() || nb_diam < need_diam {
                    continue;
                }
                // BFS in D avoiding the beta-prefix trace, from our cluster
                // to the neighbor's.
                let target: HashSet<LatticePoint> = nb_cluster.into_iter().collect();
                let mut queue: Vec<LatticePoint> = cluster
                    .iter()
                    .filter(|p| !occ_beta_core.contains(p))
                    .copied()
                    .collect();
                let mut seen: HashSet<LatticePoint> = queue.iter().copied().collect();
                let mut reached = false;
                while let Some(q) = queue.pop() {
                    if target.contains(&q) {
                        reached = true;
                        break;
                    }
                    for n in q.neighbors() {
                        if core.contains(&n) || nb_inner.contains(&n) {
                            if !occ_beta_core.contains(&n) && seen.insert(n) {
                                queue.push(n);
                            }
                        }
                    }
                }
                if !reached {
                    cond_ii = false;
                    break 'neighbors;
                }
            }
        }
    }

    // (iii) boundary visit count of the beta-prefix on the inner boundary
    // of the core.
    let mut visits = 0usize;
    for e in exc.iter().take(n_beta.min(exc.len())) {
        let t = &sample.trajectories[e.trajectory];
        for (pi, p) in t.positions().enumerate() {
            if pi < e.enter {
                continue;
            }
            if pi > e.exit {
                break;
            }
            if core.contains(&p) {
                let on_boundary = (0..dim).any(|k| {
                    p.get(k) == core.lo.get(k) || p.get(k) == core.hi.get(k)
                });
                if on_boundary {
                    visits += 1;
                }
            }
        }
    }
    let cond_iii = visits as f64 >= visits_needed;

    let class = if exc.len() < n_alpha && sample.truncation_bound > 0.5 {
        BoxClass::Undetermined
    } else if cond_i && cond_ii && cond_iii {
        BoxClass::Good
    } else {
        BoxClass::Bad
    };
    Ok(BoxClassification {
        class,
        excursion_count: exc.len(),
        cluster_diameter: diam,
        cluster_connects_neighbors: cond_ii,
        boundary_visits: visits,
    })
}

/// Verify the connectivity statement on a chain of neighboring boxes: when
/// every box is good and has fewer than `beta * wcap(D)` excursions, a
/// vacant path must join the first box to the last inside the cores.
/// Returns `None` when the preconditions fail (check skipped), else whether
/// the path was found.
pub fn connectivity_check(
    sample: &InterlacementSample,
    chain: &[BoxTriple],
    classifications: &[BoxClassification],
    thresholds: &ClassThresholds,
    core_capacity: f64,
) -> Result<Option<bool>> {
    assert_eq!(chain.len(), classifications.len());
    if chain.is_empty() {
        return Ok(None);
    }
    for w in chain.windows(2) {
        let d = w[0].base.dist_sup(&w[1].base);
        if d != w[0].side {
            return Err(Error::parameter("chain bases must be side-spaced neighbors"));
        }
    }
    let n_beta = (thresholds.beta * core_capacity).floor() as usize;
    for c in classifications {
        if c.class != BoxClass::Good || c.excursion_count >= n_beta.max(1) {
            return Ok(None);
        }
    }
    // Vacant set of the full sample within the union of cores.
    let mut region: HashSet<LatticePoint> = HashSet::new();
    for t in chain {
        for p in t.core().points() {
            region.insert(p);
        }
    }
    let occupied: HashSet<LatticePoint> = sample
        .trajectories
        .iter()
        .flat_map(|t| t.positions())
        .filter(|p| region.contains(p))
        .collect();
    let first: Vec<LatticePoint> = chain[0]
        .inner()
        .points()
        .into_iter()
        .filter(|p| !occupied.contains(p))
        .collect();
    let last: HashSet<LatticePoint> = chain
        .last()
        .unwrap()
        .inner()
        .points()
        .into_iter()
        .filter(|p| !occupied.contains(p))
        .collect();
    if first.is_empty() || last.is_empty() {
        return Ok(Some(false));
    }
    let mut seen: HashSet<LatticePoint> = first.iter().copied().collect();
    let mut queue = first;
    while let Some(q) = queue.pop() {
        if last.contains(&q) {
            return Ok(Some(true));
        }
        for n in q.neighbors() {
            if region.contains(&n) && !occupied.contains(&n) && seen.insert(n) {
                queue.push(n);
            }
        }
    }
    Ok(Some(false))
}

/// The exponential-bound right-hand side for a separated box family:
/// `exp(-(sqrt(g) - sqrt(u) / (1 - e (sqrt(ub/u) - 1))) (sqrt(g) - sqrt(u)) wcap(C))`.
pub fn exponential_bound_rhs(
    capacity: f64,
    u: f64,
    gamma: f64,
    eps_tilde: f64,
    u_bar: f64,
) -> Result<f64> {
    if !(u > 0.0 && gamma >= u && u_bar > u) {
        return Err(Error::parameter("need 0 < u <= gamma < u_bar"));
    }
    let stretch = eps_tilde * ((u_bar / u).sqrt() - 1.0);
    if stretch >= 1.0 {
        return Err(Error::parameter("tilt factor must stay below 1"));
    }
    let a = gamma.sqrt() - u.sqrt() / (1.0 - stretch);
    let b = gamma.sqrt() - u.sqrt();
    Ok((-a * b * capacity).exp())
}

/// Discrete blow-up of a compact set: `(N A) ∩ Z^d`.
pub fn discrete_blowup(a: &CompactSetSpec, n: i64) -> Result<Vec<LatticePoint>> {
    let dim = a.dim()?;
    let bb = a.bounding_box()?;
    let mut out = Vec::new();
    let lo: Vec<i64> = (0..dim).map(|k| (bb.lo.get(k) * n as f64).floor() as i64).collect();
    let hi: Vec<i64> = (0..dim).map(|k| (bb.hi.get(k) * n as f64).ceil() as i64).collect();
    let mut idx = lo.clone();
    loop {
        let p = Point::from_slice(&idx.iter().map(|&v| v as f64 / n as f64).collect::<Vec<_>>());
        if a.contains(&p) {
            out.push(LatticePoint::from_slice(&idx));
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] <= hi[k] {
                break;
            }
            idx[k] = lo[k];
            k += 1;
            if k == dim {
                return Ok(out);
            }
        }
    }
}

/// The sphere `{|x|_inf = floor(M N)}`.
pub fn blowup_sphere(dim: usize, m: f64, n: i64) -> Vec<LatticePoint> {
    let r = (m * n as f64).floor() as i64;
    LatticeBox::cube(dim, r)
        .points()
        .into_iter()
        .filter(|p| p.norm_sup() == r)
        .collect()
}

#[derive(Clone, Debug)]
pub struct DisconnectionEstimate {
    pub probability: crate::stats::Estimate,
    pub replicas: usize,
}

/// Direct Monte Carlo frequency of vacant-set disconnection of the blow-up
/// of `a` from the box sphere, under interlacements at intensity `u`.
pub fn disconnection_mc(
    a: &CompactSetSpec,
    m: f64,
    n: i64,
    u: f64,
    replicas: usize,
    table: &LatticeGreenTable,
    master: Stream,
) -> Result<DisconnectionEstimate> {
    let dim = a.dim()?;
    if !a.fits_in_ball(m)? {
        return Err(Error::parameter("compact set must fit inside B(0, M)"));
    }
    let a_n = discrete_blowup(a, n)?;
    let s_n = blowup_sphere(dim, m, n);
    let r = (m * n as f64).floor() as i64;
    // Containment check before running.
    if a_n.iter().any(|p| p.norm_sup() >= r) {
        return Err(Error::parameter(
            "blow-up reaches the sphere; N below the admissible threshold",
        ));
    }
    let window = LatticeBox::cube(dim, r);
    let successes: Result<Vec<bool>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let sample = sample_interlacement(u, &window, 4, table, master.derive(i as u64))?;
            let vacant = sample.vacant();
            Ok(disconnect_detect(&vacant, &a_n, &s_n))
        })
        .collect();
    let successes = successes?;
    let count = successes.iter().filter(|&&b| b).count();
    Ok(DisconnectionEstimate {
        probability: crate::stats::Estimate::from_successes(count, replicas),
        replicas,
    })
}

/// SRW variant: the walk runs from `start` until exiting `B(0, 8 M N)`.
pub fn disconnection_mc_srw(
    a: &CompactSetSpec,
    m: f64,
    n: i64,
    start: LatticePoint,
    replicas: usize,
    master: Stream,
) -> Result<DisconnectionEstimate> {
    let dim = a.dim()?;
    let a_n = discrete_blowup(a, n)?;
    let s_n = blowup_sphere(dim, m, n);
    let r = (m * n as f64).floor() as i64;
    let window = LatticeBox::cube(dim, r);
    let horizon = LatticeBox::cube(dim, 8 * r.max(1));
    let max_steps = (horizon.side_max() * horizon.side_max()) as usize * dim * 40;
    let successes: Vec<bool> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut s = master.derive_str("srw").derive(i as u64);
            let t = sample_srw_until_exit(start, &horizon, max_steps, &mut s);
            let occupied: HashSet<LatticePoint> =
                t.positions().filter(|p| window.contains(p)).collect();
            let vacant: HashSet<LatticePoint> = window
                .points()
                .into_iter()
                .filter(|p| !occupied.contains(p))
                .collect();
            disconnect_detect(&vacant, &a_n, &s_n)
        })
        .collect();
    let count = successes.iter().filter(|&&b| b).count();
    Ok(DisconnectionEstimate {
        probability: crate::stats::Estimate::from_successes(count, replicas),
        replicas,
    })
}

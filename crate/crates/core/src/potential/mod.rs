//! Discrete and continuum potential theory: Green functions, equilibrium
//! measures, capacities, and the walk-vs-Brownian comparison harness.

pub mod bem;
pub mod harness;
pub mod discrete;
pub mod green;

pub use bem::{continuum_capacity, ContinuumSolution};
pub use discrete::{box_union_equilibrium, cube_equilibrium, cube_points, discrete_capacity, EquilibriumSolution};
pub use harness::{capacity_hitting_lower_bound, eta_probe, ratio_config, random_separated_config, single_box_ratio, CapacityRatioBound, EtaProbe, RatioRow};
pub use green::{brownian_green, walk_green_quadrature, LatticeGreenTable};

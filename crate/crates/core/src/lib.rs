//! Desk-scale toolkit for porous-interface solidification experiments.
//!
//! The crate bundles the pieces needed to study how porous interfaces trap
//! Brownian motion and how vacant sets of random interlacements or simple
//! random walk disconnect a macroscopic body from the boundary of a box:
//!
//! * [`geometry`] — dyadic grid domains, box unions, flood fill, fixtures;
//! * [`density`] — exact local density functions on dyadic scales;
//! * [`resonance`] — scale ladders, resonance sets, crossing trackers;
//! * [`brownian`] — seeded Brownian paths, hitting estimators, Feynman–Kac;
//! * [`potential`] — lattice and Brownian Green functions, equilibrium
//!   measures, capacities, and the discrete-vs-continuum comparison harness;
//! * [`interlacements`] — random-interlacement and random-walk samplers,
//!   disconnection detection, excursion counting, box classification;
//! * [`coarsegrain`] — the blocking-interface extraction pipeline;
//! * [`cli`] — experiment orchestration and tabular output.
//!
//! All randomness flows from a master seed through counter-based splittable
//! streams ([`rng`]), so results are reproducible independently of worker
//! count.

pub mod brownian;
pub mod coarsegrain;
pub mod density;
pub mod interlacements;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod point;
pub mod potential;
pub mod resonance;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

//! Sampling and exact verification for multitype hard-core lattice gases
//! on even tori.
//!
//! The crate implements four model variants (axial unlike-color exclusion,
//! star unlike-color exclusion, a molecular hard-core gas with diagonal
//! color forcing, and a continuous-orientation rotor gas), and provides:
//!
//! * heat-bath and cluster-recoloring Gibbs samplers ([`sampler`]),
//! * plaquette classification, wrapping detection and contiguity analysis
//!   ([`plaquette`]),
//! * exact enumeration on small tori: partition functions, event
//!   probabilities and product-bound (chessboard) checks ([`exact`]),
//! * exact counting of constrained pattern families and strip transfer
//!   matrices ([`exact::count`], [`exact::transfer`]),
//! * a site random-cluster resampler ([`rcluster`]),
//! * rigorous contour bounds and hysteresis scans over the activity
//!   ([`thermo`]).

pub mod cli;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod model;
pub mod plaquette;
pub mod rcluster;
pub mod sampler;
pub mod stats;
pub mod thermo;

pub use error::{Error, Result};

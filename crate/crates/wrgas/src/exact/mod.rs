//! Exhaustive enumeration on small tori: partition functions, exact event
//! probabilities, product-inequality (chessboard) checks, closed-form
//! pattern-family counts with brute-force oracles, and strip transfer
//! matrices.
//!
//! Two enumeration strategies coexist:
//!
//! * [`scan::OccupationScan`] enumerates the `2^v` occupation patterns
//!   once per (variant, torus) and aggregates exact integer counts into
//!   buckets keyed by particle number, cluster count, the origin
//!   plaquette pattern, and the set of plaquette families present. All
//!   colored quantities follow because a pattern with `c` occupied
//!   clusters admits exactly `q^c` colorings (clusters are
//!   color-connected, a coloring is admissible iff it is constant on
//!   clusters). Queries at any `(q, z)` are cheap post-passes.
//! * [`scan::event_probability`] enumerates all `(q+1)^v` colored
//!   configurations for arbitrary predicates; it carries a tighter
//!   capacity guard.

pub mod count;
pub mod scan;
pub mod transfer;

pub use count::{family_count, family_members, CountReport, FamilyId};
pub use scan::{
    cached_scan, chessboard_check, colored_count, event_probability, for_each_admissible,
    partition_function, ChessboardReport, OccupationScan, ScanKey,
};
pub use transfer::{exact_strip_partition, transfer_pressure, PressureCurve, PressurePoint};

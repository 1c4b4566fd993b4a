//! The occupation-field (site-random-cluster) representation.
//!
//! Integrating the colors out of a discrete-variant Gibbs law leaves a law
//! on occupation fields alone, with the conditional probability that a
//! site is occupied given the rest equal to `zeta / (zeta + q^kappa)`,
//! where `zeta = q z` and `kappa` counts the occupied clusters meeting the
//! site's neighborhood. Coloring each cluster of such a field uniformly
//! and independently recovers the full Gibbs law. As `q` grows with `zeta`
//! held fixed, the conditional tends to the single-species hard-core gas:
//! `zeta / (1 + zeta)` when no cluster is adjacent, 0 otherwise.
//!
//! Implemented for the axial-exclusion geometry (`Nn`, the diamond rule)
//! and the star-exclusion geometry (`StarNn`, the square rule); the
//! molecular hard core has no representation of this product form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{AdjacencyKind, SiteIndex, Torus};
use crate::model::{Configuration, ModelSpec, SiteState, Variant};

/// A `{0,1}`-valued field on a torus: which sites are occupied.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct OccupationField {
    torus: Torus,
    bits: Vec<bool>,
}

impl OccupationField {
    pub fn empty(torus: Torus) -> Self {
        OccupationField { torus, bits: vec![false; torus.volume()] }
    }

    pub fn new(torus: Torus, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != torus.volume() {
            return Err(Error::validation(format!(
                "expected {} bits, got {}",
                torus.volume(),
                bits.len()
            )));
        }
        Ok(OccupationField { torus, bits })
    }

    /// Forget the species marks of a configuration.
    pub fn from_configuration(cfg: &Configuration) -> Self {
        OccupationField {
            torus: cfg.torus(),
            bits: cfg.states().iter().map(|s| s.is_occupied()).collect(),
        }
    }

    pub fn torus(&self) -> Torus {
        self.torus
    }

    pub fn occupied(&self, i: SiteIndex) -> bool {
        self.bits[self.torus.index(i)]
    }

    pub fn set(&mut self, i: SiteIndex, value: bool) {
        let idx = self.torus.index(i);
        self.bits[idx] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn particle_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Species count: finite, or the hard-core limit.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum RcQ {
    Finite(u32),
    Infinite,
}

/// Parameters of the occupation-field law. `zeta` plays the role of a
/// hard-core activity; for finite `q` it equals `q z`.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct RcParams {
    pub q: RcQ,
    pub zeta: f64,
}

impl RcParams {
    pub fn finite(q: u32, z: f64) -> Result<Self> {
        if q < 1 {
            return Err(Error::validation("q must be >= 1"));
        }
        let p = RcParams { q: RcQ::Finite(q), zeta: q as f64 * z };
        p.validate()?;
        Ok(p)
    }

    pub fn infinite(zeta: f64) -> Result<Self> {
        let p = RcParams { q: RcQ::Infinite, zeta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::validation(format!("zeta must be positive, got {}", self.zeta)));
        }
        if let RcQ::Finite(q) = self.q {
            if q < 1 {
                return Err(Error::validation("q must be >= 1"));
            }
        }
        Ok(())
    }
}

/// The cluster geometry of a variant's occupation representation.
pub fn geometry(variant: Variant) -> Result<AdjacencyKind> {
    match variant {
        Variant::Diamond => Ok(AdjacencyKind::Nn),
        Variant::Square => Ok(AdjacencyKind::StarNn),
        other => Err(Error::validation(format!(
            "{other:?} has no product-form occupation representation"
        ))),
    }
}

/// Number of connected components of the occupied set minus `i` (under
/// adjacency `kind`) that contain at least one neighbor of `i`.
pub fn kappa(f: &OccupationField, i: SiteIndex, kind: AdjacencyKind) -> u32 {
    let t = f.torus();
    let mut visited = vec![false; t.volume()];
    visited[t.index(i)] = true;
    let mut count = 0;
    let mut queue: Vec<SiteIndex> = Vec::new();
    t.for_each_neighbor(i, kind, |n| {
        if f.occupied(n) && !visited[t.index(n)] {
            count += 1;
            // Flood the whole component so its other contacts with the
            // neighborhood are not counted again.
            visited[t.index(n)] = true;
            queue.push(n);
            while let Some(s) = queue.pop() {
                t.for_each_neighbor(s, kind, |m| {
                    if f.occupied(m) && !visited[t.index(m)] {
                        visited[t.index(m)] = true;
                        queue.push(m);
                    }
                });
            }
        }
    });
    count
}

/// Conditional probability that a site is occupied given `kappa_val`
/// adjacent clusters.
pub fn rc_conditional(p: &RcParams, kappa_val: u32) -> f64 {
    match p.q {
        RcQ::Finite(q) => p.zeta / (p.zeta + (q as f64).powi(kappa_val as i32)),
        RcQ::Infinite => {
            if kappa_val == 0 {
                p.zeta / (1.0 + p.zeta)
            } else {
                0.0
            }
        }
    }
}

/// One raster heat-bath pass over the occupation field.
pub fn rc_sweep(p: &RcParams, f: &mut OccupationField, kind: AdjacencyKind, rng: &mut impl Rng) {
    let t = f.torus();
    for idx in 0..t.volume() {
        let i = t.site_at(idx);
        f.set(i, false);
        let prob = rc_conditional(p, kappa(f, i, kind));
        f.set(i, rng.gen::<f64>() < prob);
    }
}

/// A measured occupation-field chain.
pub struct RcChain {
    params: RcParams,
    kind: AdjacencyKind,
    field: OccupationField,
    rng: ChaCha8Rng,
    sweeps: u64,
}

impl RcChain {
    pub fn new(params: RcParams, torus: Torus, kind: AdjacencyKind, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(RcChain {
            params,
            kind,
            field: OccupationField::empty(torus),
            rng: ChaCha8Rng::seed_from_u64(seed),
            sweeps: 0,
        })
    }

    pub fn field(&self) -> &OccupationField {
        &self.field
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps
    }

    pub fn advance(&mut self) {
        rc_sweep(&self.params, &mut self.field, self.kind, &mut self.rng);
        self.sweeps += 1;
    }

    /// Color the current field's clusters uniformly at random, producing a
    /// full configuration of model `m` (whose geometry must match).
    pub fn sample_colors(&mut self, m: &ModelSpec) -> Result<Configuration> {
        let field = self.field.clone();
        sample_colors(m, &field, &mut self.rng)
    }
}

/// Assign each occupied cluster of `f` an independent uniform color.
///
/// Valid for the axial and star exclusion rules: distinct clusters are
/// never adjacent under the constraint geometry, so any color assignment
/// that is constant on clusters is admissible.
pub fn sample_colors(m: &ModelSpec, f: &OccupationField, rng: &mut impl Rng) -> Result<Configuration> {
    let kind = geometry(m.variant())?;
    let t = f.torus();
    let v = t.volume();
    let q = m.q();
    let mut states = vec![SiteState::Empty; v];
    let mut visited = vec![false; v];
    let mut queue: Vec<SiteIndex> = Vec::new();
    for idx in 0..v {
        let i = t.site_at(idx);
        if !f.occupied(i) || visited[idx] {
            continue;
        }
        let color = SiteState::Color(rng.gen_range(1..=q));
        visited[idx] = true;
        states[idx] = color;
        queue.push(i);
        while let Some(s) = queue.pop() {
            t.for_each_neighbor(s, kind, |n| {
                let j = t.index(n);
                if f.occupied(n) && !visited[j] {
                    visited[j] = true;
                    states[j] = color;
                    queue.push(n);
                }
            });
        }
    }
    Configuration::new(m, t, states)
}

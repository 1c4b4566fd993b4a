//! Finite square tori.
//!
//! All models live on the torus `Z_W x Z_H` with both side lengths even,
//! so that the even/odd sublattices and the reflection bookkeeping of the
//! plaquette machinery are well defined. Coordinates are reduced modulo
//! the side lengths; sites are addressed either by `(x, y)` or by the
//! row-major linear index `y * W + x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A site of the torus, with coordinates already reduced.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct SiteIndex {
    pub x: u32,
    pub y: u32,
}

impl SiteIndex {
    pub fn new(x: u32, y: u32) -> Self {
        SiteIndex { x, y }
    }

    /// Parity of `x + y`: `true` on the even sublattice.
    pub fn is_even(&self) -> bool {
        (self.x + self.y) % 2 == 0
    }
}

/// Neighborhood notion: axial only, or axial plus both diagonals.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum AdjacencyKind {
    Nn,
    StarNn,
}

const NN_OFFSETS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const DIAG_OFFSETS: [(i64, i64); 4] = [(1, 1), (-1, 1), (1, -1), (-1, -1)];

/// Even-by-even torus.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Torus {
    width: u32,
    height: u32,
}

impl Torus {
    /// Both dimensions must be even and at least 2.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width < 2 || height < 2 || width % 2 != 0 || height % 2 != 0 {
            return Err(Error::validation(format!(
                "torus dimensions must be even and >= 2, got {width}x{height}"
            )));
        }
        Ok(Torus { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Number of sites (and of plaquettes).
    pub fn volume(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Site at `(x, y)` reduced modulo the side lengths.
    pub fn site(&self, x: i64, y: i64) -> SiteIndex {
        SiteIndex {
            x: x.rem_euclid(self.width as i64) as u32,
            y: y.rem_euclid(self.height as i64) as u32,
        }
    }

    /// Row-major linear index.
    pub fn index(&self, s: SiteIndex) -> usize {
        s.y as usize * self.width as usize + s.x as usize
    }

    pub fn site_at(&self, index: usize) -> SiteIndex {
        debug_assert!(index < self.volume());
        SiteIndex {
            x: (index % self.width as usize) as u32,
            y: (index / self.width as usize) as u32,
        }
    }

    /// Translate by `(dx, dy)` with wrap-around.
    pub fn offset(&self, s: SiteIndex, dx: i64, dy: i64) -> SiteIndex {
        self.site(s.x as i64 + dx, s.y as i64 + dy)
    }

    /// Distinct neighbors of `s`. On side length 2 the two axial (and the
    /// two diagonal) partners in a direction coincide and are reported once.
    pub fn neighbors(&self, s: SiteIndex, kind: AdjacencyKind) -> Vec<SiteIndex> {
        let mut out = Vec::with_capacity(8);
        self.for_each_neighbor(s, kind, |t| out.push(t));
        out
    }

    /// Deduplicated neighbor visit without allocation.
    pub fn for_each_neighbor(&self, s: SiteIndex, kind: AdjacencyKind, mut f: impl FnMut(SiteIndex)) {
        let mut seen = [SiteIndex::new(u32::MAX, u32::MAX); 8];
        let mut n = 0;
        let mut push = |t: SiteIndex| {
            if !seen[..n].contains(&t) && t != s {
                seen[n] = t;
                n += 1;
            }
        };
        for (dx, dy) in NN_OFFSETS {
            push(self.offset(s, dx, dy));
        }
        if kind == AdjacencyKind::StarNn {
            for (dx, dy) in DIAG_OFFSETS {
                push(self.offset(s, dx, dy));
            }
        }
        for t in &seen[..n] {
            f(*t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_tiny_dimensions() {
        assert!(Torus::new(3, 4).is_err());
        assert!(Torus::new(4, 7).is_err());
        assert!(Torus::new(0, 4).is_err());
        assert!(Torus::new(2, 2).is_ok());
    }

    #[test]
    fn neighbor_dedup_on_width_two() {
        let t = Torus::new(2, 4).unwrap();
        let n = t.neighbors(SiteIndex::new(0, 0), AdjacencyKind::Nn);
        assert_eq!(
            n,
            vec![SiteIndex::new(1, 0), SiteIndex::new(0, 1), SiteIndex::new(0, 3)]
        );
    }

    #[test]
    fn star_neighbors_on_four_by_four() {
        let t = Torus::new(4, 4).unwrap();
        let n = t.neighbors(SiteIndex::new(0, 0), AdjacencyKind::StarNn);
        assert_eq!(n.len(), 8);
        assert!(n.contains(&SiteIndex::new(3, 3)));
        assert!(n.contains(&SiteIndex::new(1, 3)));
    }

    #[test]
    fn star_neighbors_dedup_on_two_by_two() {
        let t = Torus::new(2, 2).unwrap();
        let n = t.neighbors(SiteIndex::new(0, 0), AdjacencyKind::StarNn);
        // Right/left coincide, up/down coincide, all four diagonals coincide.
        assert_eq!(
            n,
            vec![SiteIndex::new(1, 0), SiteIndex::new(0, 1), SiteIndex::new(1, 1)]
        );
    }

    #[test]
    fn offset_wraps_negative() {
        let t = Torus::new(4, 6).unwrap();
        assert_eq!(t.offset(SiteIndex::new(0, 0), -1, -1), SiteIndex::new(3, 5));
        assert_eq!(t.offset(SiteIndex::new(3, 5), 1, 1), SiteIndex::new(0, 0));
    }

    #[test]
    fn neighbor_relation_is_symmetric() {
        for (w, h) in [(2, 2), (2, 6), (4, 4), (6, 8)] {
            let t = Torus::new(w, h).unwrap();
            for kind in [AdjacencyKind::Nn, AdjacencyKind::StarNn] {
                for i in 0..t.volume() {
                    let s = t.site_at(i);
                    for n in t.neighbors(s, kind) {
                        assert!(
                            t.neighbors(n, kind).contains(&s),
                            "asymmetric neighbor {s:?} -> {n:?} on {w}x{h}"
                        );
                    }
                }
            }
        }
    }
}

//! Plaquette classification and geometric order detection.
//!
//! Every site `i` anchors the plaquette `{i, i+e1, i+e2, i+e1+e2}`. Its
//! pattern is read through [`Configuration::local_pattern`], i.e. reflected
//! according to the parities of the anchor, and then sorted into a small
//! taxonomy of classes. Per variant the classes split into "good" ones
//! (locally ordered or locally staggered or, for the star variants,
//! locally disordered) and "bad" ones; phases are detected by looking for
//! torus-wrapping connected components of good plaquettes.
//!
//! Wrapping is decided by a union-find that tracks the lattice
//! displacement from every node to its parent: joining two nodes that are
//! already connected with a displacement mismatch exhibits a cycle with
//! nonzero winding, i.e. the component wraps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lattice::{AdjacencyKind, SiteIndex, Torus};
use crate::model::{
    pair_admissible, BondKind, Configuration, LocalPattern, ModelSpec, SiteState, Variant,
};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// Color mark of an ordered plaquette: a discrete color, or `Aligned` for
/// the rotor (whose co-oriented plaquettes carry no discrete label).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ColorTag {
    Color(u32),
    Aligned,
}

/// Plaquette classes, after reflection.
///
/// * `GEven`/`GOdd`: exactly the two diagonal (resp. antidiagonal) corners
///   occupied; the staggered good classes of the axial variants.
/// * `GOrd`: all four corners occupied, necessarily in a single color.
/// * `GOrdStag`: the molecular hard-core ordered classes, a diagonal pair
///   in one color, labeled by color and sublattice parity.
/// * `GDis`: a single particle; the disordered good class of the star
///   variants.
/// * `B0..B3, BStag`: the bad classes (empty, lone particle, one full
///   side, three particles, staggered-as-bad for the square variant).
/// * `BHat`: marker for a good plaquette demoted by hat filtering.
/// * `Inval`: pattern impossible under admissibility (defensive).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlaquetteClass {
    GEven,
    GOdd,
    GOrd(ColorTag),
    GOrdStag { color: u32, parity: Parity },
    GDis,
    B0,
    B1,
    B2,
    B3,
    BStag,
    BHat,
    Inval,
}

/// Color-blind class family; the partition the counting and enumeration
/// code works with.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassFamily {
    GEven,
    GOdd,
    GOrd,
    GDis,
    B0,
    B1,
    B2,
    B3,
    BStag,
    BHat,
    Inval,
}

pub const FAMILIES: [ClassFamily; 11] = [
    ClassFamily::GEven,
    ClassFamily::GOdd,
    ClassFamily::GOrd,
    ClassFamily::GDis,
    ClassFamily::B0,
    ClassFamily::B1,
    ClassFamily::B2,
    ClassFamily::B3,
    ClassFamily::BStag,
    ClassFamily::BHat,
    ClassFamily::Inval,
];

impl PlaquetteClass {
    pub fn family(&self) -> ClassFamily {
        match self {
            PlaquetteClass::GEven => ClassFamily::GEven,
            PlaquetteClass::GOdd => ClassFamily::GOdd,
            PlaquetteClass::GOrd(_) | PlaquetteClass::GOrdStag { .. } => ClassFamily::GOrd,
            PlaquetteClass::GDis => ClassFamily::GDis,
            PlaquetteClass::B0 => ClassFamily::B0,
            PlaquetteClass::B1 => ClassFamily::B1,
            PlaquetteClass::B2 => ClassFamily::B2,
            PlaquetteClass::B3 => ClassFamily::B3,
            PlaquetteClass::BStag => ClassFamily::BStag,
            PlaquetteClass::BHat => ClassFamily::BHat,
            PlaquetteClass::Inval => ClassFamily::Inval,
        }
    }

    /// Compact label used in reports, e.g. `GOrd(3)` or `GOrdStag(1,even)`.
    pub fn label(&self) -> String {
        match self {
            PlaquetteClass::GOrd(ColorTag::Color(a)) => format!("GOrd({a})"),
            PlaquetteClass::GOrd(ColorTag::Aligned) => "GOrd(aligned)".to_string(),
            PlaquetteClass::GOrdStag { color, parity } => {
                let p = if *parity == Parity::Even { "even" } else { "odd" };
                format!("GOrdStag({color},{p})")
            }
            c => format!("{:?}", c.family()),
        }
    }
}

/// Families containing a good class for `variant`.
pub fn good_families(variant: Variant) -> &'static [ClassFamily] {
    match variant {
        Variant::Diamond | Variant::Rotor => {
            &[ClassFamily::GEven, ClassFamily::GOdd, ClassFamily::GOrd]
        }
        Variant::Square | Variant::MolecularHc => &[ClassFamily::GOrd, ClassFamily::GDis],
    }
}

/// Is `c` a good class for `variant`?
pub fn is_good(variant: Variant, c: PlaquetteClass) -> bool {
    match variant {
        Variant::Diamond | Variant::Rotor => matches!(
            c,
            PlaquetteClass::GEven | PlaquetteClass::GOdd | PlaquetteClass::GOrd(_)
        ),
        Variant::Square => matches!(c, PlaquetteClass::GOrd(_) | PlaquetteClass::GDis),
        Variant::MolecularHc => {
            matches!(c, PlaquetteClass::GOrdStag { .. } | PlaquetteClass::GDis)
        }
    }
}

const DIAG_NIBBLE: u8 = 0b1001;
const ANTIDIAG_NIBBLE: u8 = 0b0110;

fn pattern_internally_admissible(m: &ModelSpec, p: &LocalPattern) -> bool {
    const AXIAL: [(usize, usize); 4] = [(0, 1), (2, 3), (0, 2), (1, 3)];
    const DIAG: [(usize, usize); 2] = [(0, 3), (1, 2)];
    let s = p.states();
    for &bond in m.variant().constrained_bonds() {
        let pairs: &[(usize, usize)] = match bond {
            BondKind::Axial => &AXIAL,
            BondKind::Diagonal => &DIAG,
        };
        for &(a, b) in pairs {
            if !pair_admissible(m, s[a], s[b], bond) {
                return false;
            }
        }
    }
    true
}

fn corner_color(p: &LocalPattern, idx: usize) -> u32 {
    match p.states()[idx] {
        SiteState::Color(a) => a,
        _ => unreachable!("corner checked occupied"),
    }
}

/// Classify a reflected plaquette pattern. Total: every pattern maps to
/// exactly one class, with `Inval` reserved for patterns that cannot occur
/// in an admissible configuration.
pub fn classify(m: &ModelSpec, p: &LocalPattern) -> PlaquetteClass {
    if !pattern_internally_admissible(m, p) {
        return PlaquetteClass::Inval;
    }
    let occ = p.occupation();
    let n = occ.count_ones();
    match m.variant() {
        Variant::Diamond | Variant::Rotor => match n {
            0 => PlaquetteClass::B0,
            1 => PlaquetteClass::B1,
            2 => match occ {
                DIAG_NIBBLE => PlaquetteClass::GEven,
                ANTIDIAG_NIBBLE => PlaquetteClass::GOdd,
                _ => PlaquetteClass::B2,
            },
            3 => PlaquetteClass::B3,
            _ => {
                if m.variant() == Variant::Rotor {
                    PlaquetteClass::GOrd(ColorTag::Aligned)
                } else {
                    PlaquetteClass::GOrd(ColorTag::Color(corner_color(p, 0)))
                }
            }
        },
        Variant::Square => match n {
            0 => PlaquetteClass::B0,
            1 => PlaquetteClass::GDis,
            2 => match occ {
                DIAG_NIBBLE | ANTIDIAG_NIBBLE => PlaquetteClass::BStag,
                _ => PlaquetteClass::B2,
            },
            3 => PlaquetteClass::B3,
            _ => PlaquetteClass::GOrd(ColorTag::Color(corner_color(p, 0))),
        },
        Variant::MolecularHc => match n {
            0 => PlaquetteClass::B0,
            1 => PlaquetteClass::GDis,
            2 => match occ {
                DIAG_NIBBLE => PlaquetteClass::GOrdStag {
                    color: corner_color(p, 0),
                    parity: Parity::Even,
                },
                ANTIDIAG_NIBBLE => PlaquetteClass::GOrdStag {
                    color: corner_color(p, 1),
                    parity: Parity::Odd,
                },
                _ => PlaquetteClass::Inval,
            },
            _ => PlaquetteClass::Inval,
        },
    }
}

/// Color-blind classification from an occupation nibble alone. For the
/// axial and star variants a fully occupied plaquette is monochromatic in
/// any admissible configuration, so the family is a function of occupation.
pub fn classify_occupation(variant: Variant, occ: u8) -> ClassFamily {
    let n = occ.count_ones();
    match variant {
        Variant::Diamond | Variant::Rotor => match n {
            0 => ClassFamily::B0,
            1 => ClassFamily::B1,
            2 => match occ {
                DIAG_NIBBLE => ClassFamily::GEven,
                ANTIDIAG_NIBBLE => ClassFamily::GOdd,
                _ => ClassFamily::B2,
            },
            3 => ClassFamily::B3,
            _ => ClassFamily::GOrd,
        },
        Variant::Square => match n {
            0 => ClassFamily::B0,
            1 => ClassFamily::GDis,
            2 => match occ {
                DIAG_NIBBLE | ANTIDIAG_NIBBLE => ClassFamily::BStag,
                _ => ClassFamily::B2,
            },
            3 => ClassFamily::B3,
            _ => ClassFamily::GOrd,
        },
        Variant::MolecularHc => match n {
            0 => ClassFamily::B0,
            1 => ClassFamily::GDis,
            2 => match occ {
                DIAG_NIBBLE | ANTIDIAG_NIBBLE => ClassFamily::GOrd,
                _ => ClassFamily::Inval,
            },
            _ => ClassFamily::Inval,
        },
    }
}

/// Class labels of every plaquette of a configuration.
#[derive(Clone, Debug)]
pub struct ClassField {
    torus: Torus,
    labels: Vec<PlaquetteClass>,
}

impl ClassField {
    pub fn torus(&self) -> Torus {
        self.torus
    }

    pub fn label(&self, i: SiteIndex) -> PlaquetteClass {
        self.labels[self.torus.index(i)]
    }

    pub fn labels(&self) -> &[PlaquetteClass] {
        &self.labels
    }

    /// Counts per family; sums to the number of plaquettes.
    pub fn family_histogram(&self) -> BTreeMap<ClassFamily, u64> {
        let mut h = BTreeMap::new();
        for c in &self.labels {
            *h.entry(c.family()).or_insert(0) += 1;
        }
        h
    }

    /// Most frequent full class (color-resolved) and its fraction of all
    /// plaquettes.
    pub fn dominant_class(&self) -> (PlaquetteClass, f64) {
        let mut counts: BTreeMap<PlaquetteClass, u64> = BTreeMap::new();
        for c in &self.labels {
            *counts.entry(*c).or_insert(0) += 1;
        }
        let (&cls, &n) = counts.iter().max_by_key(|(_, n)| **n).expect("nonempty field");
        (cls, n as f64 / self.labels.len() as f64)
    }
}

/// Label every plaquette; with `hat = true` (molecular hard core only) a
/// good plaquette keeps its label only when the plaquettes at `i + e1` and
/// `i + e2` are good of the same family, and is demoted to [`BHat`]
/// otherwise.
///
/// [`BHat`]: PlaquetteClass::BHat
pub fn good_field(m: &ModelSpec, cfg: &Configuration, hat: bool) -> ClassField {
    assert!(
        !hat || m.variant() == Variant::MolecularHc,
        "hat filtering applies to the molecular hard-core variant only"
    );
    let t = cfg.torus();
    let labels: Vec<PlaquetteClass> = (0..t.volume())
        .map(|i| classify(m, &cfg.local_pattern(t.site_at(i))))
        .collect();
    let field = ClassField { torus: t, labels };
    if !hat {
        return field;
    }
    let mut demoted = field.labels.clone();
    for i in 0..t.volume() {
        let here = field.labels[i];
        if !is_good(m.variant(), here) {
            continue;
        }
        let s = t.site_at(i);
        let fam = here.family();
        let keeps = [(1, 0), (0, 1)].iter().all(|&(dx, dy)| {
            let n = field.label(t.offset(s, dx, dy));
            is_good(m.variant(), n) && n.family() == fam
        });
        if !keeps {
            demoted[i] = PlaquetteClass::BHat;
        }
    }
    ClassField { torus: t, labels: demoted }
}

/// Does some connected component of a marked set wrap the torus?
///
/// `Both` means a single component wraps in both directions (the "sea"
/// criterion). If distinct components wrap in different single directions,
/// the x direction takes precedence in the report.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum WrappingStatus {
    None,
    XOnly,
    YOnly,
    Both,
}

/// Union-find over torus sites that tracks, for every node, the lattice
/// displacement to its parent in unreduced coordinates. A bond between two
/// already-connected nodes whose displacement disagrees with the recorded
/// one closes a cycle with nonzero winding number: the component wraps.
struct WrapUf {
    parent: Vec<u32>,
    rank: Vec<u8>,
    dx: Vec<i32>,
    dy: Vec<i32>,
    wrap_x: Vec<bool>,
    wrap_y: Vec<bool>,
}

impl WrapUf {
    fn new(n: usize) -> Self {
        WrapUf {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            dx: vec![0; n],
            dy: vec![0; n],
            wrap_x: vec![false; n],
            wrap_y: vec![false; n],
        }
    }

    /// Root of `a` and the displacement from `a` to it; compresses paths.
    fn find(&mut self, a: u32) -> (u32, i32, i32) {
        let mut path = [0u32; 64];
        let mut depth = 0;
        let mut node = a;
        while self.parent[node as usize] != node {
            path[depth] = node;
            depth += 1;
            node = self.parent[node as usize];
        }
        let root = node;
        // Re-point the path at the root, nearest first so parent offsets
        // are already cumulative when a node needs them.
        for k in (0..depth).rev() {
            let n = path[k] as usize;
            let p = self.parent[n] as usize;
            if p != root as usize {
                self.dx[n] += self.dx[p];
                self.dy[n] += self.dy[p];
            }
            self.parent[n] = root;
        }
        if a == root {
            (root, 0, 0)
        } else {
            (root, self.dx[a as usize], self.dy[a as usize])
        }
    }

    /// Join `a` and `b` along a bond with step `(sx, sy)` from `a` to `b`.
    fn union(&mut self, a: u32, b: u32, sx: i32, sy: i32) {
        let (ra, ax, ay) = self.find(a);
        let (rb, bx, by) = self.find(b);
        if ra == rb {
            // Winding: recorded displacement differs from the bond's step.
            let wx = ax + sx - bx;
            let wy = ay + sy - by;
            if wx != 0 {
                self.wrap_x[ra as usize] = true;
            }
            if wy != 0 {
                self.wrap_y[ra as usize] = true;
            }
            return;
        }
        let (hi, lo, lo_dx, lo_dy) = if self.rank[ra as usize] >= self.rank[rb as usize] {
            // position(rb) - position(ra) = off(a) + step - off(b)
            (ra, rb, ax + sx - bx, ay + sy - by)
        } else {
            (rb, ra, bx - sx - ax, by - sy - ay)
        };
        self.parent[lo as usize] = hi;
        self.dx[lo as usize] = lo_dx;
        self.dy[lo as usize] = lo_dy;
        self.wrap_x[hi as usize] |= self.wrap_x[lo as usize];
        self.wrap_y[hi as usize] |= self.wrap_y[lo as usize];
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
    }
}

fn canonical_offsets(kind: AdjacencyKind) -> &'static [(i64, i64)] {
    match kind {
        AdjacencyKind::Nn => &[(1, 0), (0, 1)],
        AdjacencyKind::StarNn => &[(1, 0), (0, 1), (1, 1), (1, -1)],
    }
}

/// Wrapping status of the subgraph induced by `in_set` under `kind`
/// adjacency, together with a component labeling (`None` off the set,
/// ids in first-encounter order on it).
pub fn subset_components(
    torus: Torus,
    in_set: impl Fn(SiteIndex) -> bool,
    offsets: &[(i64, i64)],
) -> (Vec<Option<u32>>, WrappingStatus) {
    let v = torus.volume();
    let mut uf = WrapUf::new(v);
    let member: Vec<bool> = (0..v).map(|i| in_set(torus.site_at(i))).collect();
    for i in 0..v {
        if !member[i] {
            continue;
        }
        let s = torus.site_at(i);
        for &(dx, dy) in offsets {
            let t = torus.offset(s, dx, dy);
            let j = torus.index(t);
            if member[j] {
                uf.union(i as u32, j as u32, dx as i32, dy as i32);
            }
        }
    }
    let mut labels = vec![None; v];
    let mut ids: Vec<Option<u32>> = vec![None; v];
    let mut next = 0;
    let (mut any_both, mut any_x, mut any_y) = (false, false, false);
    for i in 0..v {
        if !member[i] {
            continue;
        }
        let (root, _, _) = uf.find(i as u32);
        let id = *ids[root as usize].get_or_insert_with(|| {
            let id = next;
            next += 1;
            let (wx, wy) = (uf.wrap_x[root as usize], uf.wrap_y[root as usize]);
            any_both |= wx && wy;
            any_x |= wx && !wy;
            any_y |= wy && !wx;
            id
        });
        labels[i] = Some(id);
    }
    let status = if any_both {
        WrappingStatus::Both
    } else if any_x {
        WrappingStatus::XOnly
    } else if any_y {
        WrappingStatus::YOnly
    } else {
        WrappingStatus::None
    };
    (labels, status)
}

/// Wrapping status of the plaquettes whose class satisfies `in_family`,
/// under plaquette adjacency `kind`.
pub fn wrapping_status(
    field: &ClassField,
    in_family: impl Fn(PlaquetteClass) -> bool,
    kind: AdjacencyKind,
) -> WrappingStatus {
    let (_, status) = subset_components(
        field.torus,
        |i| in_family(field.label(i)),
        canonical_offsets(kind),
    );
    status
}

/// Family-level convenience wrapper around [`wrapping_status`].
pub fn family_wrapping(field: &ClassField, fam: ClassFamily, kind: AdjacencyKind) -> WrappingStatus {
    wrapping_status(field, |c| c.family() == fam, kind)
}

/// Wrapping of the marked sublattice at site level under star adjacency:
/// `occupied = true` marks occupied sites of the given parity,
/// `occupied = false` marks empty ones.
pub fn sublattice_star_wrapping(
    cfg: &Configuration,
    parity: Parity,
    occupied: bool,
) -> WrappingStatus {
    let even = parity == Parity::Even;
    let (_, status) = subset_components(
        cfg.torus(),
        |i| i.is_even() == even && cfg.state(i).is_occupied() == occupied,
        canonical_offsets(AdjacencyKind::StarNn),
    );
    status
}

/// Offsets joining occupied sites whose centers are at squared distance 4
/// or 5: the contiguity graph of the star variants' dense phases.
const CONTIGUITY_OFFSETS: [(i64, i64); 6] = [(2, 0), (0, 2), (2, 1), (1, 2), (2, -1), (1, -2)];

/// Contiguity components of the occupied sites: labels per site plus the
/// wrapping status of the component structure.
pub fn contiguity_components(cfg: &Configuration) -> (Vec<Option<u32>>, WrappingStatus) {
    subset_components(cfg.torus(), |i| cfg.state(i).is_occupied(), &CONTIGUITY_OFFSETS)
}

/// Membership in the k-th covering event (`k` in `1..=7`) for the
/// molecular hard-core variant. `field` must be the unhatted class field
/// of the configuration.
///
/// * `W1..W3`: the plaquette at `i`, `i+e1`, `i+e2` respectively is empty.
/// * `W4/W5`: the horizontal double plaquette at `i` shows one ordered and
///   one disordered sub-plaquette, with even/odd `x(i)`.
/// * `W6/W7`: the same for the vertical double plaquette and `y(i)`.
pub fn wk_member(field: &ClassField, i: SiteIndex, k: usize) -> bool {
    let t = field.torus();
    let fam = |s: SiteIndex| field.label(s).family();
    let ord_dis = |a: SiteIndex, b: SiteIndex| {
        matches!(
            (fam(a), fam(b)),
            (ClassFamily::GOrd, ClassFamily::GDis) | (ClassFamily::GDis, ClassFamily::GOrd)
        )
    };
    match k {
        1 => fam(i) == ClassFamily::B0,
        2 => fam(t.offset(i, 1, 0)) == ClassFamily::B0,
        3 => fam(t.offset(i, 0, 1)) == ClassFamily::B0,
        4 => i.x % 2 == 0 && ord_dis(i, t.offset(i, 1, 0)),
        5 => i.x % 2 == 1 && ord_dis(i, t.offset(i, 1, 0)),
        6 => i.y % 2 == 0 && ord_dis(i, t.offset(i, 0, 1)),
        7 => i.y % 2 == 1 && ord_dis(i, t.offset(i, 0, 1)),
        _ => panic!("k must lie in 1..=7"),
    }
}

/// Check that every plaquette outside the hat-good set lies in some `W_k`.
pub fn wk_cover_holds(m: &ModelSpec, cfg: &Configuration) -> bool {
    assert_eq!(m.variant(), Variant::MolecularHc);
    let raw = good_field(m, cfg, false);
    let hat = good_field(m, cfg, true);
    let t = cfg.torus();
    for idx in 0..t.volume() {
        let i = t.site_at(idx);
        if is_good(m.variant(), hat.label(i)) {
            continue;
        }
        if !(1..=7).any(|k| wk_member(&raw, i, k)) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    fn pat(states: [SiteState; 4]) -> LocalPattern {
        LocalPattern::new(states)
    }

    const E: SiteState = SiteState::Empty;

    #[test]
    fn classify_diamond_basics() {
        let m = ModelSpec::diamond(3, 1.0).unwrap();
        let c = SiteState::Color;
        assert_eq!(classify(&m, &pat([E, E, E, E])), PlaquetteClass::B0);
        assert_eq!(classify(&m, &pat([c(2), E, E, E])), PlaquetteClass::B1);
        assert_eq!(classify(&m, &pat([c(1), E, E, c(2)])), PlaquetteClass::GEven);
        assert_eq!(classify(&m, &pat([E, c(1), c(1), E])), PlaquetteClass::GOdd);
        assert_eq!(classify(&m, &pat([c(2), c(2), E, E])), PlaquetteClass::B2);
        assert_eq!(classify(&m, &pat([c(1), c(1), c(1), E])), PlaquetteClass::B3);
        assert_eq!(
            classify(&m, &pat([c(1), c(1), c(1), c(1)])),
            PlaquetteClass::GOrd(ColorTag::Color(1))
        );
        // Side pair in two colors violates the axial rule.
        assert_eq!(classify(&m, &pat([c(1), c(2), E, E])), PlaquetteClass::Inval);
    }

    #[test]
    fn classify_square_and_molecular() {
        let sq = ModelSpec::square(3, 1.0).unwrap();
        let c = SiteState::Color;
        assert_eq!(classify(&sq, &pat([c(1), E, E, E])), PlaquetteClass::GDis);
        assert_eq!(classify(&sq, &pat([c(1), E, E, c(1)])), PlaquetteClass::BStag);
        // Unlike colors on a diagonal violate the star rule.
        assert_eq!(classify(&sq, &pat([c(1), E, E, c(2)])), PlaquetteClass::Inval);

        let hc = ModelSpec::molecular_hc(3, 1.0).unwrap();
        assert_eq!(
            classify(&hc, &pat([c(2), E, E, c(2)])),
            PlaquetteClass::GOrdStag { color: 2, parity: Parity::Even }
        );
        assert_eq!(
            classify(&hc, &pat([E, c(3), c(3), E])),
            PlaquetteClass::GOrdStag { color: 3, parity: Parity::Odd }
        );
        // A full side violates the axial exclusion.
        assert_eq!(classify(&hc, &pat([c(1), c(1), E, E])), PlaquetteClass::Inval);
    }

    #[test]
    fn classify_rotor() {
        let m = ModelSpec::rotor(0.1, 1.0).unwrap();
        let o = SiteState::Orientation;
        assert_eq!(
            classify(&m, &pat([o(0.0), o(0.05), o(0.95), o(0.0)])),
            PlaquetteClass::GOrd(ColorTag::Aligned)
        );
        assert_eq!(classify(&m, &pat([o(0.0), E, E, o(0.4)])), PlaquetteClass::GEven);
        // Side pair beyond tolerance.
        assert_eq!(classify(&m, &pat([o(0.0), o(0.3), E, E])), PlaquetteClass::Inval);
    }

    /// Over all raw patterns with q colors, classification is total, and
    /// patterns that pass the internal-bond check never map to Inval.
    #[test]
    fn classification_partitions_admissible_patterns() {
        for variant in [Variant::Diamond, Variant::Square, Variant::MolecularHc] {
            let m = ModelSpec::discrete(variant, 3, 1.0).unwrap();
            let states = |d: u32| match d {
                0 => E,
                a => SiteState::Color(a),
            };
            let mut admissible = 0;
            for code in 0..4u32.pow(4) {
                let p = pat([
                    states(code % 4),
                    states((code / 4) % 4),
                    states((code / 16) % 4),
                    states((code / 64) % 4),
                ]);
                let cls = classify(&m, &p);
                if pattern_internally_admissible(&m, &p) {
                    assert_ne!(cls, PlaquetteClass::Inval, "{variant:?} {:?}", p);
                    assert_eq!(cls.family(), classify_occupation(variant, p.occupation()));
                    admissible += 1;
                } else {
                    assert_eq!(cls, PlaquetteClass::Inval);
                }
            }
            assert!(admissible > 0);
        }
    }

    fn checkerboard_cfg(m: &ModelSpec, t: Torus, color: u32) -> Configuration {
        let mut states = Vec::new();
        for i in 0..t.volume() {
            let s = t.site_at(i);
            states.push(if s.is_even() { SiteState::Color(color) } else { E });
        }
        Configuration::new(m, t, states).unwrap()
    }

    #[test]
    fn checkerboard_class_field_wraps_both_ways() {
        let t = Torus::new(6, 6).unwrap();
        let m = ModelSpec::diamond(2, 1.0).unwrap();
        let cfg = checkerboard_cfg(&m, t, 1);
        let field = good_field(&m, &cfg, false);
        for i in 0..t.volume() {
            assert_eq!(field.label(t.site_at(i)), PlaquetteClass::GEven);
        }
        assert_eq!(
            family_wrapping(&field, ClassFamily::GEven, AdjacencyKind::Nn),
            WrappingStatus::Both
        );
        assert_eq!(
            family_wrapping(&field, ClassFamily::GOrd, AdjacencyKind::Nn),
            WrappingStatus::None
        );
    }

    #[test]
    fn single_row_wraps_x_only() {
        let t = Torus::new(6, 6).unwrap();
        let (_, status) = subset_components(t, |i| i.y == 2, canonical_offsets(AdjacencyKind::Nn));
        assert_eq!(status, WrappingStatus::XOnly);
        let (_, status) =
            subset_components(t, |i| i.x == 3, canonical_offsets(AdjacencyKind::Nn));
        assert_eq!(status, WrappingStatus::YOnly);
        let (labels, status) =
            subset_components(t, |i| i.x == 0 && i.y == 0, canonical_offsets(AdjacencyKind::Nn));
        assert_eq!(status, WrappingStatus::None);
        assert_eq!(labels.iter().filter(|l| l.is_some()).count(), 1);
    }

    #[test]
    fn hat_demotes_around_a_defect() {
        let t = Torus::new(6, 6).unwrap();
        let m = ModelSpec::molecular_hc(2, 1.0).unwrap();
        let mut cfg = checkerboard_cfg(&m, t, 1);
        cfg.set(SiteIndex::new(2, 2), E);

        let raw = good_field(&m, &cfg, false);
        let dis: Vec<SiteIndex> = (0..t.volume())
            .map(|i| t.site_at(i))
            .filter(|s| raw.label(*s) == PlaquetteClass::GDis)
            .collect();
        assert_eq!(
            dis,
            vec![
                SiteIndex::new(1, 1),
                SiteIndex::new(2, 1),
                SiteIndex::new(1, 2),
                SiteIndex::new(2, 2)
            ]
        );

        let hat = good_field(&m, &cfg, true);
        let demoted: Vec<SiteIndex> = (0..t.volume())
            .map(|i| t.site_at(i))
            .filter(|s| hat.label(*s) == PlaquetteClass::BHat)
            .collect();
        assert_eq!(
            demoted,
            vec![
                SiteIndex::new(1, 0),
                SiteIndex::new(2, 0),
                SiteIndex::new(0, 1),
                SiteIndex::new(2, 1),
                SiteIndex::new(0, 2),
                SiteIndex::new(1, 2),
                SiteIndex::new(2, 2),
            ]
        );
        // The plaquette diagonally inside the defect keeps its good label:
        // both its forward neighbors are disordered like itself.
        assert_eq!(hat.label(SiteIndex::new(1, 1)), PlaquetteClass::GDis);
        assert!(wk_cover_holds(&m, &cfg));
    }

    #[test]
    fn contiguity_of_sparse_diagonal_pattern() {
        let t = Torus::new(8, 8).unwrap();
        let m = ModelSpec::square(2, 1.0).unwrap();
        // Occupy (2k, 2j): every occupied site is contiguity-adjacent to
        // its (2,0)/(0,2) translates, so there is one wrapping component.
        let mut states = vec![E; t.volume()];
        for y in (0..8).step_by(2) {
            for x in (0..8).step_by(2) {
                states[t.index(SiteIndex::new(x, y))] = SiteState::Color(1);
            }
        }
        let cfg = Configuration::new(&m, t, states).unwrap();
        let (labels, status) = contiguity_components(&cfg);
        assert_eq!(status, WrappingStatus::Both);
        let ids: std::collections::BTreeSet<u32> = labels.iter().flatten().copied().collect();
        assert_eq!(ids.len(), 1);

        // Two particles at squared distance 5 are contiguous, at 8 not.
        let mut states = vec![E; t.volume()];
        states[t.index(SiteIndex::new(0, 0))] = SiteState::Color(1);
        states[t.index(SiteIndex::new(1, 2))] = SiteState::Color(1);
        states[t.index(SiteIndex::new(5, 5))] = SiteState::Color(1);
        let cfg = Configuration::new(&m, t, states).unwrap();
        let (labels, status) = contiguity_components(&cfg);
        assert_eq!(status, WrappingStatus::None);
        let ids: std::collections::BTreeSet<u32> = labels.iter().flatten().copied().collect();
        assert_eq!(ids.len(), 2);
    }
}

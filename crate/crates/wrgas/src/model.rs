//! The four model variants and their hard-core interaction rules.
//!
//! Every variant is a lattice gas on a torus whose single-site state is
//! either `Empty` or carries a species mark: one of `q` colors for the
//! discrete variants, a point on the unit circle for the rotor. A
//! configuration has Gibbs weight `z^N` (N = number of particles) when it
//! is admissible and weight zero otherwise. Admissibility is a product of
//! hard pair constraints over bonds:
//!
//! * `Diamond`: unlike colors may not sit on axially adjacent sites.
//! * `Square`: unlike colors may not sit on axially or diagonally
//!   adjacent sites (star adjacency).
//! * `MolecularHc`: axially adjacent sites may not both be occupied at
//!   all; diagonally adjacent occupied sites must agree in color.
//! * `Rotor`: axially adjacent occupied sites must have orientations
//!   within `alpha` turns of each other (strictly; a separation of
//!   exactly `alpha` is inadmissible).
//!
//! Orientations are stored in turns, i.e. in `[0, 1)`, so a full
//! revolution has measure 1 and the rotor tolerance `alpha` is a number
//! in `(0, 1/4)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{AdjacencyKind, SiteIndex, Torus};

/// Single-site state.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum SiteState {
    Empty,
    /// Color in `1..=q`.
    Color(u32),
    /// Orientation in turns, in `[0, 1)`.
    Orientation(f64),
}

impl SiteState {
    pub fn is_occupied(&self) -> bool {
        !matches!(self, SiteState::Empty)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Variant {
    Diamond,
    Square,
    MolecularHc,
    Rotor,
}

impl Variant {
    pub fn is_discrete(&self) -> bool {
        !matches!(self, Variant::Rotor)
    }

    /// Bond kinds that carry a constraint for this variant.
    pub fn constrained_bonds(&self) -> &'static [BondKind] {
        match self {
            Variant::Diamond | Variant::Rotor => &[BondKind::Axial],
            Variant::Square | Variant::MolecularHc => &[BondKind::Axial, BondKind::Diagonal],
        }
    }

    /// Adjacency under which occupied clusters are monochromatic (resp.
    /// rigidly co-oriented for the rotor); this is also the adjacency used
    /// by the cluster recoloring move.
    pub fn cluster_adjacency(&self) -> AdjacencyKind {
        match self {
            Variant::Diamond | Variant::Rotor => AdjacencyKind::Nn,
            Variant::Square | Variant::MolecularHc => AdjacencyKind::StarNn,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BondKind {
    Axial,
    Diagonal,
}

/// Species space: `q` colors or the circle with alignment tolerance `alpha`.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub enum Species {
    Discrete { q: u32 },
    Circle { alpha: f64 },
}

/// A model variant together with its parameters.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    variant: Variant,
    species: Species,
    z: f64,
}

impl ModelSpec {
    pub fn diamond(q: u32, z: f64) -> Result<Self> {
        Self::discrete(Variant::Diamond, q, z)
    }

    pub fn square(q: u32, z: f64) -> Result<Self> {
        Self::discrete(Variant::Square, q, z)
    }

    pub fn molecular_hc(q: u32, z: f64) -> Result<Self> {
        Self::discrete(Variant::MolecularHc, q, z)
    }

    pub fn discrete(variant: Variant, q: u32, z: f64) -> Result<Self> {
        if variant == Variant::Rotor {
            return Err(Error::validation("rotor takes alpha, not q"));
        }
        if q < 1 {
            return Err(Error::validation("q must be >= 1"));
        }
        Self::check_z(z)?;
        Ok(ModelSpec { variant, species: Species::Discrete { q }, z })
    }

    pub fn rotor(alpha: f64, z: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.25) {
            return Err(Error::validation(format!(
                "alpha must lie in (0, 1/4) turns, got {alpha}"
            )));
        }
        Self::check_z(z)?;
        Ok(ModelSpec { variant: Variant::Rotor, species: Species::Circle { alpha }, z })
    }

    fn check_z(z: f64) -> Result<()> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::validation(format!("activity must be positive, got {z}")));
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// Same model at a different activity.
    pub fn with_z(&self, z: f64) -> Result<Self> {
        Self::check_z(z)?;
        Ok(ModelSpec { z, ..*self })
    }

    /// Number of colors of a discrete variant.
    ///
    /// Panics when called on the rotor; that is a usage error.
    pub fn q(&self) -> u32 {
        match self.species {
            Species::Discrete { q } => q,
            Species::Circle { .. } => panic!("q requested from rotor model"),
        }
    }

    /// Alignment tolerance of the rotor, in turns.
    ///
    /// Panics when called on a discrete variant.
    pub fn alpha(&self) -> f64 {
        match self.species {
            Species::Circle { alpha } => alpha,
            Species::Discrete { .. } => panic!("alpha requested from discrete model"),
        }
    }

    /// Is `s` a legal single-site state for this model?
    pub fn state_valid(&self, s: SiteState) -> bool {
        match (self.species, s) {
            (_, SiteState::Empty) => true,
            (Species::Discrete { q }, SiteState::Color(a)) => (1..=q).contains(&a),
            (Species::Circle { .. }, SiteState::Orientation(t)) => (0.0..1.0).contains(&t),
            _ => false,
        }
    }
}

/// Circular distance in turns, in `[0, 1/2]`.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// May states `s1` and `s2` sit on the two ends of a bond of kind `bond`?
///
/// Panics if the variant carries no constraint on `bond` (asking is a
/// usage error: such a pair is unconstrained, not admissible-by-default).
pub fn pair_admissible(m: &ModelSpec, s1: SiteState, s2: SiteState, bond: BondKind) -> bool {
    assert!(
        m.variant().constrained_bonds().contains(&bond),
        "{:?} carries no {bond:?} constraint",
        m.variant()
    );
    match (m.variant(), s1, s2) {
        (_, SiteState::Empty, _) | (_, _, SiteState::Empty) => true,
        (Variant::Diamond | Variant::Square, SiteState::Color(a), SiteState::Color(b)) => a == b,
        (Variant::MolecularHc, SiteState::Color(a), SiteState::Color(b)) => match bond {
            BondKind::Axial => false,
            BondKind::Diagonal => a == b,
        },
        (Variant::Rotor, SiteState::Orientation(a), SiteState::Orientation(b)) => {
            circle_distance(a, b) < m.alpha()
        }
        _ => panic!("state kind does not match model species"),
    }
}

/// Colors a site may take given its constraining neighbors. Each occupied
/// neighbor either pins the color to its own or (molecular hard core,
/// axial bonds) forbids occupation outright, so the allowed set is always
/// all of `1..=q`, a single color, or empty.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ColorSet {
    All { q: u32 },
    Only(u32),
    NoColor,
}

impl ColorSet {
    pub fn count(&self) -> u64 {
        match self {
            ColorSet::All { q } => *q as u64,
            ColorSet::Only(_) => 1,
            ColorSet::NoColor => 0,
        }
    }

    pub fn contains(&self, a: u32) -> bool {
        match self {
            ColorSet::All { q } => (1..=*q).contains(&a),
            ColorSet::Only(c) => *c == a,
            ColorSet::NoColor => false,
        }
    }

    /// Restrict to colors equal to `a`.
    fn pin(self, a: u32) -> ColorSet {
        match self {
            ColorSet::All { .. } => ColorSet::Only(a),
            ColorSet::Only(c) if c == a => self,
            _ => ColorSet::NoColor,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Option<u32> {
        match self {
            ColorSet::All { q } => Some(rng.gen_range(1..=*q)),
            ColorSet::Only(c) => Some(*c),
            ColorSet::NoColor => None,
        }
    }
}

/// A finite union of disjoint circular arcs, each `(start, length)` in
/// turns. The full circle is the single arc `(0, 1)`.
#[derive(Clone, PartialEq, Debug)]
pub struct ArcSet {
    arcs: Vec<(f64, f64)>,
}

impl ArcSet {
    pub fn full_circle() -> Self {
        ArcSet { arcs: vec![(0.0, 1.0)] }
    }

    pub fn empty() -> Self {
        ArcSet { arcs: Vec::new() }
    }

    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(|&(_, len)| len).sum()
    }

    pub fn contains(&self, theta: f64) -> bool {
        let theta = theta.rem_euclid(1.0);
        self.arcs.iter().any(|&(s, len)| (theta - s).rem_euclid(1.0) < len)
    }

    /// Intersect with the open window of half-width `half` around `center`.
    pub fn intersect_window(&mut self, center: f64, half: f64) {
        debug_assert!(half > 0.0 && 2.0 * half < 1.0);
        let w_start = (center - half).rem_euclid(1.0);
        let w_len = 2.0 * half;
        let mut out = Vec::with_capacity(self.arcs.len() + 1);
        for &(start, len) in &self.arcs {
            // Work in coordinates where the window starts at 0.
            let x = (start - w_start).rem_euclid(1.0);
            // Head piece [x, min(x + len, 1)) clipped to [0, w_len).
            if x < w_len {
                let piece = (x + len).min(1.0).min(w_len) - x;
                if piece > 0.0 {
                    out.push(((x + w_start).rem_euclid(1.0), piece));
                }
            }
            // Wrapped tail [0, x + len - 1) clipped to [0, w_len).
            let tail = (x + len - 1.0).min(w_len);
            if tail > 0.0 {
                out.push((w_start, tail));
            }
        }
        self.arcs = out;
    }

    /// Point at arc-length `t` into the union, `0 <= t < measure`.
    pub fn point_at(&self, mut t: f64) -> f64 {
        for &(start, len) in &self.arcs {
            if t < len {
                return (start + t).rem_euclid(1.0);
            }
            t -= len;
        }
        // Only reachable through floating round-off at the far end.
        let &(start, len) = self.arcs.last().expect("point_at on empty arc set");
        (start + len * (1.0 - f64::EPSILON)).rem_euclid(1.0)
    }

    /// Uniform sample from the union. Must not be called on an empty set.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        self.point_at(rng.gen::<f64>() * self.measure())
    }
}

/// The single-site conditional support: which occupied states the site may
/// take (`Empty` is always allowed and is implicit).
#[derive(Clone, PartialEq, Debug)]
pub enum AllowedStates {
    Discrete(ColorSet),
    Arcs(ArcSet),
}

/// A full assignment of site states on a torus.
///
/// Constructed through [`Configuration::new`], which checks admissibility;
/// the samplers then maintain admissibility as an invariant.
#[derive(Clone, PartialEq, Debug)]
pub struct Configuration {
    torus: Torus,
    states: Vec<SiteState>,
}

impl Configuration {
    pub fn new(m: &ModelSpec, torus: Torus, states: Vec<SiteState>) -> Result<Self> {
        if states.len() != torus.volume() {
            return Err(Error::validation(format!(
                "expected {} states, got {}",
                torus.volume(),
                states.len()
            )));
        }
        if let Some(s) = states.iter().find(|s| !m.state_valid(**s)) {
            return Err(Error::validation(format!("state {s:?} invalid for {:?}", m.variant())));
        }
        let cfg = Configuration { torus, states };
        if !config_admissible(m, &cfg) {
            return Err(Error::validation("configuration violates a hard pair constraint"));
        }
        Ok(cfg)
    }

    pub fn empty(torus: Torus) -> Self {
        Configuration { torus, states: vec![SiteState::Empty; torus.volume()] }
    }

    pub fn torus(&self) -> Torus {
        self.torus
    }

    pub fn state(&self, s: SiteIndex) -> SiteState {
        self.states[self.torus.index(s)]
    }

    pub fn states(&self) -> &[SiteState] {
        &self.states
    }

    pub(crate) fn set(&mut self, s: SiteIndex, v: SiteState) {
        let i = self.torus.index(s);
        self.states[i] = v;
    }

    pub fn particle_count(&self) -> usize {
        self.states.iter().filter(|s| s.is_occupied()).count()
    }

    /// The four states of the plaquette at `i`, reflected according to the
    /// parities of `i` so that patterns at different plaquettes are
    /// directly comparable. See [`LocalPattern`].
    pub fn local_pattern(&self, i: SiteIndex) -> LocalPattern {
        let raw = [
            self.state(i),
            self.state(self.torus.offset(i, 1, 0)),
            self.state(self.torus.offset(i, 0, 1)),
            self.state(self.torus.offset(i, 1, 1)),
        ];
        LocalPattern { states: raw }.reflected(i.x % 2 == 1, i.y % 2 == 1)
    }
}

/// States on the unit plaquette `{0,1}^2`, indexed by `(dx, dy)` with
/// linear order `(0,0), (1,0), (0,1), (1,1)`.
///
/// Patterns read off a configuration are canonicalized by reflecting
/// horizontally when the anchor has odd `x` and vertically when it has odd
/// `y`. Under this convention the even checkerboard, for example, shows
/// the same diagonal pattern at every anchor.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct LocalPattern {
    states: [SiteState; 4],
}

impl LocalPattern {
    pub fn new(states: [SiteState; 4]) -> Self {
        LocalPattern { states }
    }

    pub fn state(&self, dx: u32, dy: u32) -> SiteState {
        debug_assert!(dx < 2 && dy < 2);
        self.states[(dx + 2 * dy) as usize]
    }

    pub fn states(&self) -> &[SiteState; 4] {
        &self.states
    }

    /// Flip in the plaquette's vertical and/or horizontal midline. An
    /// involution in each argument.
    pub fn reflected(&self, flip_x: bool, flip_y: bool) -> LocalPattern {
        let mut s = self.states;
        if flip_x {
            s.swap(0, 1);
            s.swap(2, 3);
        }
        if flip_y {
            s.swap(0, 2);
            s.swap(1, 3);
        }
        LocalPattern { states: s }
    }

    /// Occupation nibble: bit `dx + 2*dy` set iff that corner is occupied.
    pub fn occupation(&self) -> u8 {
        let mut bits = 0;
        for (k, s) in self.states.iter().enumerate() {
            if s.is_occupied() {
                bits |= 1 << k;
            }
        }
        bits
    }
}

/// Check every constrained bond of the torus.
pub fn config_admissible(m: &ModelSpec, cfg: &Configuration) -> bool {
    let t = cfg.torus();
    for i in 0..t.volume() {
        if !site_admissible(m, cfg, t.site_at(i)) {
            return false;
        }
    }
    true
}

/// Check only the bonds incident to `s`; this is the full admissibility
/// delta of a single-site update.
pub fn site_admissible(m: &ModelSpec, cfg: &Configuration, s: SiteIndex) -> bool {
    let v = cfg.state(s);
    if !v.is_occupied() {
        return true;
    }
    let t = cfg.torus();
    let mut ok = true;
    for &bond in m.variant().constrained_bonds() {
        let offsets: &[(i64, i64)] = match bond {
            BondKind::Axial => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            BondKind::Diagonal => &[(1, 1), (-1, 1), (1, -1), (-1, -1)],
        };
        for &(dx, dy) in offsets {
            let n = t.offset(s, dx, dy);
            if n == s {
                continue;
            }
            if !pair_admissible(m, v, cfg.state(n), bond) {
                ok = false;
            }
        }
    }
    ok
}

/// Support of the heat-bath conditional at site `i` given the rest of the
/// configuration. `Empty` is always allowed and not represented.
pub fn allowed_states(m: &ModelSpec, cfg: &Configuration, i: SiteIndex) -> AllowedStates {
    let t = cfg.torus();
    match m.variant() {
        Variant::Diamond | Variant::Square => {
            let kind = if m.variant() == Variant::Diamond {
                AdjacencyKind::Nn
            } else {
                AdjacencyKind::StarNn
            };
            let mut set = ColorSet::All { q: m.q() };
            t.for_each_neighbor(i, kind, |n| {
                if let SiteState::Color(a) = cfg.state(n) {
                    set = set.pin(a);
                }
            });
            AllowedStates::Discrete(set)
        }
        Variant::MolecularHc => {
            let mut set = ColorSet::All { q: m.q() };
            t.for_each_neighbor(i, AdjacencyKind::Nn, |n| {
                if cfg.state(n).is_occupied() {
                    set = ColorSet::NoColor;
                }
            });
            if set != ColorSet::NoColor {
                for (dx, dy) in [(1, 1), (-1, 1), (1, -1), (-1, -1)] {
                    let n = t.offset(i, dx, dy);
                    if n == i {
                        continue;
                    }
                    if let SiteState::Color(a) = cfg.state(n) {
                        set = set.pin(a);
                    }
                }
            }
            AllowedStates::Discrete(set)
        }
        Variant::Rotor => {
            let alpha = m.alpha();
            let mut arcs = ArcSet::full_circle();
            t.for_each_neighbor(i, AdjacencyKind::Nn, |n| {
                if let SiteState::Orientation(theta) = cfg.state(n) {
                    arcs.intersect_window(theta, alpha);
                }
            });
            AllowedStates::Arcs(arcs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond(q: u32) -> ModelSpec {
        ModelSpec::diamond(q, 1.0).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(ModelSpec::diamond(0, 1.0).is_err());
        assert!(ModelSpec::diamond(2, 0.0).is_err());
        assert!(ModelSpec::diamond(2, -1.0).is_err());
        assert!(ModelSpec::rotor(0.25, 1.0).is_err());
        assert!(ModelSpec::rotor(0.0, 1.0).is_err());
        assert!(ModelSpec::rotor(0.05, 1.0).is_ok());
    }

    #[test]
    fn pair_rules_diamond() {
        let m = diamond(3);
        let (a, b) = (SiteState::Color(1), SiteState::Color(2));
        assert!(!pair_admissible(&m, a, b, BondKind::Axial));
        assert!(pair_admissible(&m, a, a, BondKind::Axial));
        assert!(pair_admissible(&m, a, SiteState::Empty, BondKind::Axial));
    }

    #[test]
    #[should_panic]
    fn diamond_has_no_diagonal_rule() {
        let m = diamond(3);
        pair_admissible(&m, SiteState::Color(1), SiteState::Color(2), BondKind::Diagonal);
    }

    #[test]
    fn pair_rules_molecular() {
        let m = ModelSpec::molecular_hc(2, 1.0).unwrap();
        let (a, b) = (SiteState::Color(1), SiteState::Color(2));
        assert!(!pair_admissible(&m, a, a, BondKind::Axial));
        assert!(!pair_admissible(&m, a, b, BondKind::Diagonal));
        assert!(pair_admissible(&m, a, a, BondKind::Diagonal));
        assert!(pair_admissible(&m, SiteState::Empty, b, BondKind::Axial));
    }

    #[test]
    fn pair_rules_rotor() {
        let m = ModelSpec::rotor(0.1, 5.0).unwrap();
        let o = SiteState::Orientation;
        assert!(pair_admissible(&m, o(0.00), o(0.05), BondKind::Axial));
        assert!(!pair_admissible(&m, o(0.00), o(0.20), BondKind::Axial));
        // Wrap-around distance.
        assert!(pair_admissible(&m, o(0.98), o(0.03), BondKind::Axial));
        // Strict inequality at the boundary, probed with dyadic values so
        // the distance computation is exact in floating point.
        let md = ModelSpec::rotor(0.125, 1.0).unwrap();
        assert!(!pair_admissible(&md, o(0.0), o(0.125), BondKind::Axial));
        assert!(pair_admissible(&md, o(0.0), o(0.0625), BondKind::Axial));
    }

    #[test]
    fn admissibility_on_small_tori() {
        let t = Torus::new(2, 2).unwrap();
        let m = diamond(2);
        let c = |s| Configuration::new(&m, t, s);
        let (e, c1, c2) = (SiteState::Empty, SiteState::Color(1), SiteState::Color(2));
        assert!(c(vec![c1, c1, c1, c1]).is_ok());
        assert!(c(vec![c1, c2, c1, c2]).is_err());
        // Diagonal disagreement is fine for the diamond rule.
        assert!(c(vec![c1, e, e, c2]).is_ok());

        let sq = ModelSpec::square(2, 1.0).unwrap();
        assert!(Configuration::new(&sq, t, vec![c1, e, e, c2]).is_err());

        let hc = ModelSpec::molecular_hc(2, 1.0).unwrap();
        assert!(Configuration::new(&hc, t, vec![c1, e, e, c1]).is_ok());
        assert!(Configuration::new(&hc, t, vec![c1, c1, e, e]).is_err());
    }

    #[test]
    fn allowed_states_pins_and_conflicts() {
        let t = Torus::new(4, 4).unwrap();
        let m = diamond(3);
        let mut cfg = Configuration::empty(t);
        let i = SiteIndex::new(1, 1);
        match allowed_states(&m, &cfg, i) {
            AllowedStates::Discrete(s) => assert_eq!(s, ColorSet::All { q: 3 }),
            _ => unreachable!(),
        }
        cfg.set(SiteIndex::new(0, 1), SiteState::Color(2));
        match allowed_states(&m, &cfg, i) {
            AllowedStates::Discrete(s) => assert_eq!(s, ColorSet::Only(2)),
            _ => unreachable!(),
        }
        cfg.set(SiteIndex::new(2, 1), SiteState::Color(1));
        match allowed_states(&m, &cfg, i) {
            AllowedStates::Discrete(s) => assert_eq!(s, ColorSet::NoColor),
            _ => unreachable!(),
        }
    }

    #[test]
    fn allowed_states_molecular_blocks_on_axial_neighbor() {
        let t = Torus::new(4, 4).unwrap();
        let m = ModelSpec::molecular_hc(3, 1.0).unwrap();
        let mut cfg = Configuration::empty(t);
        cfg.set(SiteIndex::new(2, 1), SiteState::Color(1));
        match allowed_states(&m, &cfg, SiteIndex::new(1, 1)) {
            AllowedStates::Discrete(s) => assert_eq!(s, ColorSet::NoColor),
            _ => unreachable!(),
        }
        // Diagonal occupied neighbor pins instead.
        match allowed_states(&m, &cfg, SiteIndex::new(1, 0)) {
            AllowedStates::Discrete(s) => assert_eq!(s, ColorSet::Only(1)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn rotor_arc_intersection_example() {
        let t = Torus::new(4, 4).unwrap();
        let m = ModelSpec::rotor(0.1, 5.0).unwrap();
        let mut cfg = Configuration::empty(t);
        cfg.set(SiteIndex::new(0, 1), SiteState::Orientation(0.0));
        cfg.set(SiteIndex::new(2, 1), SiteState::Orientation(0.1));
        match allowed_states(&m, &cfg, SiteIndex::new(1, 1)) {
            AllowedStates::Arcs(a) => {
                assert!((a.measure() - 0.1).abs() < 1e-12);
                assert!(a.contains(0.05));
                assert!(!a.contains(0.15));
                assert!(!a.contains(0.95));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn rotor_single_neighbor_window_has_measure_two_alpha() {
        let t = Torus::new(4, 4).unwrap();
        let m = ModelSpec::rotor(0.07, 5.0).unwrap();
        let mut cfg = Configuration::empty(t);
        cfg.set(SiteIndex::new(0, 1), SiteState::Orientation(0.9));
        match allowed_states(&m, &cfg, SiteIndex::new(1, 1)) {
            AllowedStates::Arcs(a) => {
                // The window is (0.83, 0.97).
                assert!((a.measure() - 0.14).abs() < 1e-12);
                assert!(a.contains(0.95));
                assert!(a.contains(0.84));
                assert!(!a.contains(0.99));
                assert!(!a.contains(0.5));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn arc_windows_disjoint_when_far_apart() {
        let mut a = ArcSet::full_circle();
        a.intersect_window(0.2, 0.1);
        a.intersect_window(0.7, 0.1);
        assert_eq!(a.measure(), 0.0);
    }

    #[test]
    fn local_pattern_reflection_is_involutive() {
        let s = [
            SiteState::Empty,
            SiteState::Color(1),
            SiteState::Color(2),
            SiteState::Empty,
        ];
        let p = LocalPattern::new(s);
        for fx in [false, true] {
            for fy in [false, true] {
                assert_eq!(p.reflected(fx, fy).reflected(fx, fy), p);
            }
        }
    }

    #[test]
    fn checkerboard_reads_same_pattern_everywhere() {
        let t = Torus::new(4, 4).unwrap();
        let m = diamond(2);
        let mut states = Vec::new();
        for i in 0..t.volume() {
            let s = t.site_at(i);
            states.push(if s.is_even() { SiteState::Color(1) } else { SiteState::Empty });
        }
        let cfg = Configuration::new(&m, t, states).unwrap();
        for i in 0..t.volume() {
            let p = cfg.local_pattern(t.site_at(i));
            assert_eq!(p.occupation(), 0b1001, "anchor {:?}", t.site_at(i));
        }
    }
}

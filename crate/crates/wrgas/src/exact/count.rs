//! Closed-form counts for the named pattern families, with brute-force
//! oracles and explicit member generators where the family admits one.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{AdjacencyKind, SiteIndex, Torus};
use crate::model::{Configuration, SiteState, Variant};
use crate::plaquette::{classify_occupation, ClassFamily};

use super::scan::{cached_scan, reflected_corner_indices, MAX_SCAN_SITES};

/// Largest exhaustive search for the anchored-pair family.
const MAX_PAIR_BRUTE_SITES: usize = 36;
/// Largest member list [`family_members`] will materialize.
const MAX_MEMBERS: u64 = 100_000;

/// Named configuration families with closed-form counts or bounds.
///
/// The `L` suffix marks the lattice-wide version: every plaquette (or
/// anchored pair) realizes the defining local pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, serde::Deserialize)]
pub enum FamilyId {
    /// Fully occupied, one color: `q` members.
    GordL,
    /// Even checkerboard, free colors: `q^(v/2)` members.
    GevenL,
    /// Odd checkerboard, free colors: `q^(v/2)` members.
    GoddL,
    /// Empty torus: 1 member.
    B0L,
    /// Every plaquette holds one particle: at most `2(2^(H/2)+2^(W/2)) q^(v/4)`.
    B1L,
    /// Stripe patterns: exactly `2(q^(H/2)+q^(W/2))`.
    B2L,
    /// Every plaquette misses one particle: at most `2q(2^(H/2)+2^(W/2))`.
    B3L,
    /// Alternating ordered/disordered column groups: exactly `2(2q)^(W/4)`.
    E1L,
    /// Quarter-density sublattice pattern: exactly `q^(v/4)`.
    F1L,
    /// 3x4 cells with 2x3 occupied blocks: exactly `q^(v/12)`.
    F2L,
    /// 8x7 cells with 7x6 occupied blocks: exactly `q^(v/56)`.
    F3L,
    /// 8x7 cells, blocks thinned to one sublattice: exactly `q^(v/56)`.
    FhcL,
}

impl FamilyId {
    pub const ALL: [FamilyId; 12] = [
        FamilyId::GordL,
        FamilyId::GevenL,
        FamilyId::GoddL,
        FamilyId::B0L,
        FamilyId::B1L,
        FamilyId::B2L,
        FamilyId::B3L,
        FamilyId::E1L,
        FamilyId::F1L,
        FamilyId::F2L,
        FamilyId::F3L,
        FamilyId::FhcL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyId::GordL => "GordL",
            FamilyId::GevenL => "GevenL",
            FamilyId::GoddL => "GoddL",
            FamilyId::B0L => "B0L",
            FamilyId::B1L => "B1L",
            FamilyId::B2L => "B2L",
            FamilyId::B3L => "B3L",
            FamilyId::E1L => "E1L",
            FamilyId::F1L => "F1L",
            FamilyId::F2L => "F2L",
            FamilyId::F3L => "F3L",
            FamilyId::FhcL => "FhcL",
        }
    }

    /// The model variant whose admissibility the family lives under.
    pub fn model_variant(self) -> Variant {
        match self {
            FamilyId::F1L => Variant::Square,
            FamilyId::E1L | FamilyId::FhcL => Variant::MolecularHc,
            _ => Variant::Diamond,
        }
    }

    /// Whether the closed form is only an upper bound.
    pub fn formula_is_bound(self) -> bool {
        matches!(self, FamilyId::B1L | FamilyId::B3L)
    }

    /// Particles carried by every member, given the torus volume.
    pub fn particle_number(self, volume: u64) -> u64 {
        match self {
            FamilyId::GordL => volume,
            FamilyId::GevenL | FamilyId::GoddL | FamilyId::B2L => volume / 2,
            FamilyId::B0L => 0,
            FamilyId::B1L | FamilyId::F1L => volume / 4,
            FamilyId::B3L | FamilyId::F3L => 3 * volume / 4,
            FamilyId::E1L | FamilyId::FhcL => 3 * volume / 8,
            FamilyId::F2L => volume / 2,
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyId::ALL
            .iter()
            .copied()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::parse(format!("unknown family '{s}'")))
    }
}

/// Closed-form count (or bound) next to its brute-force oracle.
#[derive(Debug, Clone, Serialize)]
pub struct CountReport {
    pub family: FamilyId,
    pub width: u32,
    pub height: u32,
    pub q: u32,
    #[serde(serialize_with = "ser_big")]
    pub formula_value: BigUint,
    pub formula_is_bound: bool,
    #[serde(serialize_with = "ser_opt_big")]
    pub brute_force_value: Option<BigUint>,
    pub particle_number: Option<u64>,
}

fn ser_big<S: serde::Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn ser_opt_big<S: serde::Serializer>(
    x: &Option<BigUint>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&v.to_string()),
        None => s.serialize_none(),
    }
}

fn qpow(q: u32, e: u64) -> BigUint {
    BigUint::from(q).pow(u32::try_from(e).expect("exponent fits"))
}

/// Cell dims `(a, b)` in whichever orientation divides the torus.
fn cell_orientation(torus: Torus, a: u32, b: u32) -> Result<(u32, u32)> {
    let (w, h) = (torus.width(), torus.height());
    if w % a == 0 && h % b == 0 {
        Ok((a, b))
    } else if w % b == 0 && h % a == 0 {
        Ok((b, a))
    } else {
        Err(Error::validation(format!(
            "torus {w}x{h} is not tileable by {a}x{b} cells in either orientation"
        )))
    }
}

fn formula(family: FamilyId, torus: Torus, q: u32) -> Result<BigUint> {
    let (w, h) = (torus.width() as u64, torus.height() as u64);
    let v = w * h;
    let two = |e: u64| qpow(2, e);
    Ok(match family {
        FamilyId::GordL => BigUint::from(q),
        FamilyId::GevenL | FamilyId::GoddL => qpow(q, v / 2),
        FamilyId::B0L => BigUint::from(1u32),
        FamilyId::B1L => 2u32 * (two(h / 2) + two(w / 2)) * qpow(q, v / 4),
        FamilyId::B2L => 2u32 * (qpow(q, h / 2) + qpow(q, w / 2)),
        FamilyId::B3L => 2u32 * q * (two(h / 2) + two(w / 2)),
        FamilyId::E1L => {
            if w % 4 != 0 {
                return Err(Error::validation(format!(
                    "width {w} must be a multiple of 4"
                )));
            }
            2u32 * qpow(2 * q, w / 4)
        }
        FamilyId::F1L => qpow(q, v / 4),
        FamilyId::F2L => {
            cell_orientation(torus, 3, 4)?;
            qpow(q, v / 12)
        }
        FamilyId::F3L | FamilyId::FhcL => {
            cell_orientation(torus, 8, 7)?;
            qpow(q, v / 56)
        }
    })
}

fn plaquette_family_target(family: FamilyId) -> Option<ClassFamily> {
    Some(match family {
        FamilyId::GordL => ClassFamily::GOrd,
        FamilyId::GevenL => ClassFamily::GEven,
        FamilyId::GoddL => ClassFamily::GOdd,
        FamilyId::B0L => ClassFamily::B0,
        FamilyId::B1L => ClassFamily::B1,
        FamilyId::B2L => ClassFamily::B2,
        FamilyId::B3L => ClassFamily::B3,
        _ => return None,
    })
}

fn scan_family_brute(fam: ClassFamily, torus: Torus, q: u32) -> Result<BigUint> {
    use crate::plaquette::FAMILIES;
    let bit = 1u16 << FAMILIES.iter().position(|&g| g == fam).unwrap() as u16;
    let scan = cached_scan(Variant::Diamond, torus)?;
    let mut q_pows = Vec::with_capacity(torus.volume() + 1);
    let mut p = BigUint::from(1u32);
    for _ in 0..=torus.volume() {
        q_pows.push(p.clone());
        p *= q;
    }
    let mut total = BigUint::zero();
    for &(key, count) in scan.buckets() {
        if key.family_set == bit {
            total += BigUint::from(count) * &q_pows[key.components as usize];
        }
    }
    Ok(total)
}

fn brute_force(family: FamilyId, torus: Torus, q: u32) -> Result<Option<BigUint>> {
    if let Some(fam) = plaquette_family_target(family) {
        if torus.volume() <= MAX_SCAN_SITES {
            return scan_family_brute(fam, torus, q).map(Some);
        }
        return Ok(None);
    }
    if family == FamilyId::E1L && torus.volume() <= MAX_PAIR_BRUTE_SITES {
        return anchored_pair_brute(torus, q).map(Some);
    }
    Ok(None)
}

/// Closed-form count with a brute-force oracle when the torus is small
/// enough to enumerate.
pub fn family_count(family: FamilyId, torus: Torus, q: u32) -> Result<CountReport> {
    if q == 0 {
        return Err(Error::validation("q must be at least 1"));
    }
    let formula_value = formula(family, torus, q)?;
    let brute_force_value = brute_force(family, torus, q)?;
    Ok(CountReport {
        family,
        width: torus.width(),
        height: torus.height(),
        q,
        formula_value,
        formula_is_bound: family.formula_is_bound(),
        brute_force_value,
        particle_number: Some(family.particle_number(torus.volume() as u64)),
    })
}

// ---------------------------------------------------------------------------
// Anchored-pair brute force
// ---------------------------------------------------------------------------

/// Tests that at every even-column anchor the plaquette pair at `i` and
/// `i + e1` shows one ordered and one disordered pattern.
pub(crate) fn anchored_pair_condition(
    occupied: impl Fn(SiteIndex) -> bool,
    torus: Torus,
) -> bool {
    let nib = |a: SiteIndex| -> u8 {
        let cs = reflected_corner_indices(torus, a);
        let mut nib = 0u8;
        for (k, &c) in cs.iter().enumerate() {
            nib |= (occupied(torus.site_at(c)) as u8) << k;
        }
        nib
    };
    for x in (0..torus.width()).step_by(2) {
        for y in 0..torus.height() {
            let a = SiteIndex::new(x, y);
            let b = torus.offset(a, 1, 0);
            let fa = classify_occupation(Variant::MolecularHc, nib(a));
            let fb = classify_occupation(Variant::MolecularHc, nib(b));
            let pair_ok = (fa == ClassFamily::GOrd && fb == ClassFamily::GDis)
                || (fa == ClassFamily::GDis && fb == ClassFamily::GOrd);
            if !pair_ok {
                return false;
            }
        }
    }
    true
}

/// Exhaustive count of the anchored-pair family by depth-first search
/// over axially independent occupation patterns, weighting each by
/// `q^clusters`.
fn anchored_pair_brute(torus: Torus, q: u32) -> Result<BigUint> {
    let v = torus.volume();
    if v > MAX_PAIR_BRUTE_SITES {
        return Err(Error::capacity(format!(
            "pair brute force needs all independent patterns of {v} sites; limit is {MAX_PAIR_BRUTE_SITES}"
        )));
    }
    let mut axial = vec![0u64; v];
    let mut star = vec![0u64; v];
    for idx in 0..v {
        let i = torus.site_at(idx);
        for n in torus.neighbors(i, AdjacencyKind::Nn) {
            let j = torus.index(n);
            if j != idx {
                axial[idx] |= 1 << j;
            }
        }
        for n in torus.neighbors(i, AdjacencyKind::StarNn) {
            let j = torus.index(n);
            if j != idx {
                star[idx] |= 1 << j;
            }
        }
    }
    let mut q_pows = Vec::with_capacity(v + 1);
    let mut p = BigUint::from(1u32);
    for _ in 0..=v {
        q_pows.push(p.clone());
        p *= q;
    }
    let components = |mask: u64| -> usize {
        let mut rem = mask;
        let mut count = 0;
        while rem != 0 {
            count += 1;
            let seed = rem & rem.wrapping_neg();
            let mut comp = seed;
            let mut frontier = seed;
            while frontier != 0 {
                let mut grow = 0u64;
                while frontier != 0 {
                    let i = frontier.trailing_zeros() as usize;
                    frontier &= frontier - 1;
                    grow |= star[i];
                }
                frontier = grow & mask & !comp;
                comp |= frontier;
            }
            rem &= !comp;
        }
        count
    };
    let mut total = BigUint::zero();
    // Iterative DFS: stack of (next site, occupation so far).
    let mut stack: Vec<(usize, u64)> = vec![(0, 0)];
    while let Some((site, occ)) = stack.pop() {
        if site == v {
            if anchored_pair_condition(|s| occ >> torus.index(s) & 1 != 0, torus) {
                total += &q_pows[components(occ)];
            }
            continue;
        }
        stack.push((site + 1, occ));
        if axial[site] & occ == 0 {
            stack.push((site + 1, occ | 1 << site));
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Member generators
// ---------------------------------------------------------------------------

/// All members of families with an explicit construction.
///
/// Supported: `GordL`, `GevenL`, `GoddL`, `B0L`, `B2L`, `E1L`, `F1L`,
/// `F2L`, `F3L`, `FhcL`. The bounded families have no closed member set.
pub fn family_members(family: FamilyId, torus: Torus, q: u32) -> Result<Vec<Configuration>> {
    if q == 0 {
        return Err(Error::validation("q must be at least 1"));
    }
    let count = formula(family, torus, q)?;
    if family.formula_is_bound() {
        return Err(Error::validation(format!(
            "{family} is only bounded above; it has no closed-form member set"
        )));
    }
    if count > BigUint::from(MAX_MEMBERS) {
        return Err(Error::capacity(format!(
            "{family} on {}x{} at q={q} has {count} members; limit is {MAX_MEMBERS}",
            torus.width(),
            torus.height()
        )));
    }
    let (w, h) = (torus.width(), torus.height());
    let mut out = Vec::new();
    match family {
        FamilyId::GordL => {
            let all: Vec<SiteIndex> = (0..torus.volume()).map(|i| torus.site_at(i)).collect();
            color_products(torus, &[all], q, &mut out);
        }
        FamilyId::GevenL | FamilyId::GoddL => {
            let want_even = family == FamilyId::GevenL;
            let groups: Vec<Vec<SiteIndex>> = (0..torus.volume())
                .map(|i| torus.site_at(i))
                .filter(|s| s.is_even() == want_even)
                .map(|s| vec![s])
                .collect();
            color_products(torus, &groups, q, &mut out);
        }
        FamilyId::B0L => out.push(Configuration::empty(torus)),
        FamilyId::B2L => {
            for offset in 0..2u32 {
                let groups: Vec<Vec<SiteIndex>> = (0..w)
                    .filter(|x| x % 2 == offset)
                    .map(|x| (0..h).map(|y| SiteIndex::new(x, y)).collect())
                    .collect();
                color_products(torus, &groups, q, &mut out);
            }
            for offset in 0..2u32 {
                let groups: Vec<Vec<SiteIndex>> = (0..h)
                    .filter(|y| y % 2 == offset)
                    .map(|y| (0..w).map(|x| SiteIndex::new(x, y)).collect())
                    .collect();
                color_products(torus, &groups, q, &mut out);
            }
        }
        FamilyId::E1L => {
            let groups_count = (w / 4) as usize;
            for origin in [0u32, 2] {
                for tmask in 0..1u32 << groups_count {
                    let mut groups: Vec<Vec<SiteIndex>> = vec![Vec::new(); groups_count];
                    for x in 0..w {
                        let rel = (x + 4 * w - origin) % 4;
                        if rel == 0 {
                            continue;
                        }
                        let g = (((x + w - origin) % w) / 4) as usize;
                        let t = tmask >> g & 1;
                        for y in 0..h {
                            if (y + rel + t) % 2 == 1 {
                                groups[g].push(SiteIndex::new(x, y));
                            }
                        }
                    }
                    color_products(torus, &groups, q, &mut out);
                }
            }
        }
        FamilyId::F1L => {
            let groups: Vec<Vec<SiteIndex>> = (0..w)
                .step_by(2)
                .flat_map(|x| (0..h).step_by(2).map(move |y| vec![SiteIndex::new(x, y)]))
                .collect();
            color_products(torus, &groups, q, &mut out);
        }
        FamilyId::F2L | FamilyId::F3L | FamilyId::FhcL => {
            let (a, b) = if family == FamilyId::F2L { (3, 4) } else { (8, 7) };
            let (cw, ch) = cell_orientation(torus, a, b)?;
            let thin = family == FamilyId::FhcL;
            let mut groups = Vec::new();
            for cx in (0..w).step_by(cw as usize) {
                for cy in (0..h).step_by(ch as usize) {
                    let mut sites = Vec::new();
                    for dx in 0..cw - 1 {
                        for dy in 0..ch - 1 {
                            let s = SiteIndex::new(cx + dx, cy + dy);
                            if !thin || s.is_even() {
                                sites.push(s);
                            }
                        }
                    }
                    groups.push(sites);
                }
            }
            color_products(torus, &groups, q, &mut out);
        }
        FamilyId::B1L | FamilyId::B3L => unreachable!("rejected above"),
    }
    Ok(out)
}

/// Appends one configuration per assignment of a color to each group.
fn color_products(
    torus: Torus,
    groups: &[Vec<SiteIndex>],
    q: u32,
    out: &mut Vec<Configuration>,
) {
    let total = (q as u64).pow(groups.len() as u32);
    for code in 0..total {
        let mut cfg = Configuration::empty(torus);
        let mut rest = code;
        for group in groups {
            let color = (rest % q as u64) as u32 + 1;
            rest /= q as u64;
            for &s in group {
                cfg.set(s, SiteState::Color(color));
            }
        }
        out.push(cfg);
    }
}

//! Occupation-pattern enumeration and exact colored enumeration.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{SiteIndex, Torus};
use crate::model::{Configuration, ModelSpec, SiteState, Variant};
use crate::plaquette::{classify_occupation, ClassFamily, Parity, PlaquetteClass, FAMILIES};

/// Largest site count for the `2^v` occupation scan.
pub const MAX_SCAN_SITES: usize = 26;
/// Largest `(q+1)^v` admitted by the colored enumerator.
pub const MAX_COLORED_STATES: f64 = 1e8;

const CHUNK_BITS: usize = 14;

fn family_bit(f: ClassFamily) -> u16 {
    let idx = FAMILIES.iter().position(|&g| g == f).expect("family listed");
    1 << idx as u16
}

/// Site indices of the plaquette anchored at `i` in reflected corner order:
/// slot `k` holds corner `(dx, dy)` with `k = dx + 2*dy`, where odd anchor
/// coordinates flip the matching axis.
pub(crate) fn reflected_corner_indices(torus: Torus, i: SiteIndex) -> [usize; 4] {
    let flip_x = i.x % 2 == 1;
    let flip_y = i.y % 2 == 1;
    let mut out = [0usize; 4];
    for (k, slot) in out.iter_mut().enumerate() {
        let dx = (k % 2) as i64;
        let dy = (k / 2) as i64;
        let ox = if flip_x { 1 - dx } else { dx };
        let oy = if flip_y { 1 - dy } else { dy };
        *slot = torus.index(torus.offset(i, ox, oy));
    }
    out
}

/// Exact per-bucket tally of one occupation scan.
///
/// `count` patterns share this particle number, cluster count (under the
/// variant's cluster adjacency), origin plaquette occupation pattern, and
/// set of plaquette families realized across all anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScanKey {
    /// Occupied sites.
    pub particles: u8,
    /// Occupied clusters under the variant's cluster adjacency.
    pub components: u8,
    /// Origin plaquette occupation pattern, bit `dx + 2*dy`.
    pub origin_pattern: u8,
    /// Bitset over [`FAMILIES`] of plaquette families present.
    pub family_set: u16,
}

fn pack(key: ScanKey) -> u32 {
    key.particles as u32
        | (key.components as u32) << 5
        | (key.origin_pattern as u32) << 10
        | (key.family_set as u32) << 14
}

fn unpack(raw: u32) -> ScanKey {
    ScanKey {
        particles: (raw & 0x1f) as u8,
        components: (raw >> 5 & 0x1f) as u8,
        origin_pattern: (raw >> 10 & 0xf) as u8,
        family_set: (raw >> 14) as u16,
    }
}

/// Bucketed enumeration of all admissible occupation patterns of a torus.
///
/// Built once per (variant, torus); every `(q, z)` query is a linear pass
/// over the buckets with exact integer arithmetic.
#[derive(Debug)]
pub struct OccupationScan {
    variant: Variant,
    torus: Torus,
    buckets: Vec<(ScanKey, u128)>,
}

struct ScanTables {
    cluster_nbr: Vec<u32>,
    axial_nbr: Vec<u32>,
    corners: Vec<[u8; 4]>,
    family_of: [u8; 16],
    hc_filter: bool,
}

impl ScanTables {
    fn new(variant: Variant, torus: Torus) -> Self {
        let v = torus.volume();
        let kind = variant.cluster_adjacency();
        let mut cluster_nbr = vec![0u32; v];
        let mut axial_nbr = vec![0u32; v];
        let mut corners = Vec::with_capacity(v);
        for idx in 0..v {
            let i = torus.site_at(idx);
            for n in torus.neighbors(i, kind) {
                let j = torus.index(n);
                if j != idx {
                    cluster_nbr[idx] |= 1 << j;
                }
            }
            for n in torus.neighbors(i, crate::lattice::AdjacencyKind::Nn) {
                let j = torus.index(n);
                if j != idx {
                    axial_nbr[idx] |= 1 << j;
                }
            }
            let cs = reflected_corner_indices(torus, i);
            corners.push([cs[0] as u8, cs[1] as u8, cs[2] as u8, cs[3] as u8]);
        }
        let mut family_of = [0u8; 16];
        for (nib, f) in family_of.iter_mut().enumerate() {
            let fam = classify_occupation(variant, nib as u8);
            *f = FAMILIES.iter().position(|&g| g == fam).unwrap() as u8;
        }
        ScanTables {
            cluster_nbr,
            axial_nbr,
            corners,
            family_of,
            hc_filter: variant == Variant::MolecularHc,
        }
    }

    fn admissible(&self, mask: u32) -> bool {
        if !self.hc_filter {
            return true;
        }
        let mut rem = mask;
        while rem != 0 {
            let i = rem.trailing_zeros() as usize;
            rem &= rem - 1;
            if self.axial_nbr[i] & mask != 0 {
                return false;
            }
        }
        true
    }

    fn components(&self, mask: u32) -> u8 {
        let mut rem = mask;
        let mut count = 0u8;
        while rem != 0 {
            count += 1;
            let seed = rem & rem.wrapping_neg();
            let mut comp = seed;
            let mut frontier = seed;
            while frontier != 0 {
                let mut grow = 0u32;
                while frontier != 0 {
                    let i = frontier.trailing_zeros() as usize;
                    frontier &= frontier - 1;
                    grow |= self.cluster_nbr[i];
                }
                frontier = grow & mask & !comp;
                comp |= frontier;
            }
            rem &= !comp;
        }
        count
    }

    fn classify_mask(&self, mask: u32) -> ScanKey {
        let nibble = |cs: &[u8; 4]| -> u8 {
            let mut nib = 0u8;
            for (k, &c) in cs.iter().enumerate() {
                nib |= ((mask >> c & 1) as u8) << k;
            }
            nib
        };
        let mut family_set = 0u16;
        for cs in &self.corners {
            family_set |= 1 << self.family_of[nibble(cs) as usize] as u16;
        }
        ScanKey {
            particles: mask.count_ones() as u8,
            components: self.components(mask),
            origin_pattern: nibble(&self.corners[0]),
            family_set,
        }
    }
}

impl OccupationScan {
    pub fn new(variant: Variant, torus: Torus) -> Result<Self> {
        if variant == Variant::Rotor {
            return Err(Error::validation(
                "occupation scan requires a discrete variant",
            ));
        }
        let v = torus.volume();
        if v > MAX_SCAN_SITES {
            return Err(Error::capacity(format!(
                "occupation scan needs 2^{v} patterns; limit is 2^{MAX_SCAN_SITES}"
            )));
        }
        let tables = ScanTables::new(variant, torus);
        let total: u64 = 1 << v;
        let chunks = (total >> CHUNK_BITS).max(1);
        let map = (0..chunks)
            .into_par_iter()
            .fold(HashMap::<u32, u128>::new, |mut acc, chunk| {
                let start = chunk << CHUNK_BITS;
                let end = (start + (1 << CHUNK_BITS)).min(total);
                for mask in start..end {
                    let mask = mask as u32;
                    if !tables.admissible(mask) {
                        continue;
                    }
                    *acc.entry(pack(tables.classify_mask(mask))).or_insert(0) += 1;
                }
                acc
            })
            .reduce(HashMap::new, |mut a, b| {
                for (k, n) in b {
                    *a.entry(k).or_insert(0) += n;
                }
                a
            });
        let ordered: BTreeMap<u32, u128> = map.into_iter().collect();
        let buckets = ordered.into_iter().map(|(k, n)| (unpack(k), n)).collect();
        Ok(OccupationScan {
            variant,
            torus,
            buckets,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn torus(&self) -> Torus {
        self.torus
    }

    pub fn buckets(&self) -> &[(ScanKey, u128)] {
        &self.buckets
    }

    /// Total admissible occupation patterns (colors ignored).
    pub fn pattern_count(&self) -> u128 {
        self.buckets.iter().map(|&(_, n)| n).sum()
    }

    fn weigher(&self, q: u32, z: f64) -> Result<Weigher> {
        Weigher::new(self.torus.volume(), q, z)
    }

    fn weighted_pair(
        &self,
        w: &Weigher,
        keep: impl Fn(&ScanKey) -> bool,
        pin_colors_in_kept: bool,
    ) -> (BigUint, BigUint) {
        let mut kept = BigUint::zero();
        let mut total = BigUint::zero();
        for &(key, count) in &self.buckets {
            let term = w.term(&key, count, false);
            if keep(&key) {
                if pin_colors_in_kept {
                    kept += w.term(&key, count, true);
                } else {
                    kept += &term;
                }
            }
            total += term;
        }
        (kept, total)
    }

    /// Exact probability of a bucket-measurable event.
    pub fn probability(&self, q: u32, z: f64, keep: impl Fn(&ScanKey) -> bool) -> Result<f64> {
        let w = self.weigher(q, z)?;
        let (kept, total) = self.weighted_pair(&w, keep, false);
        Ok(big_ratio(&kept, &total))
    }

    /// Partition function at `(q, z)`.
    pub fn partition_function(&self, q: u32, z: f64) -> Result<f64> {
        let w = self.weigher(q, z)?;
        let (_, total) = self.weighted_pair(&w, |_| false, false);
        Ok(big_to_f64_pow2(&total, -w.scale_shift()))
    }

    /// Probability that the origin site is occupied.
    pub fn site_occupation_probability(&self, q: u32, z: f64) -> Result<f64> {
        self.probability(q, z, |k| k.origin_pattern & 1 != 0)
    }

    /// Exact color-resolved marginal of a single site: `(empty, each color)`.
    ///
    /// By color symmetry every color carries the same weight.
    pub fn site_marginal(&self, q: u32, z: f64) -> Result<Vec<f64>> {
        let occ = self.site_occupation_probability(q, z)?;
        let mut out = vec![1.0 - occ];
        out.extend(std::iter::repeat(occ / q as f64).take(q as usize));
        Ok(out)
    }

    /// Exact law of the origin plaquette occupation pattern (16 bins).
    pub fn origin_pattern_distribution(&self, q: u32, z: f64) -> Result<[f64; 16]> {
        let w = self.weigher(q, z)?;
        let mut sums: [BigUint; 16] = Default::default();
        let mut total = BigUint::zero();
        for &(key, count) in &self.buckets {
            let term = w.term(&key, count, false);
            sums[key.origin_pattern as usize] += &term;
            total += term;
        }
        let mut out = [0.0; 16];
        for (slot, sum) in out.iter_mut().zip(sums.iter()) {
            *slot = big_ratio(sum, &total);
        }
        Ok(out)
    }

    /// Exact joint law of (particle count, cluster count).
    pub fn particle_component_distribution(
        &self,
        q: u32,
        z: f64,
    ) -> Result<BTreeMap<(u8, u8), f64>> {
        let w = self.weigher(q, z)?;
        let mut sums: BTreeMap<(u8, u8), BigUint> = BTreeMap::new();
        let mut total = BigUint::zero();
        for &(key, count) in &self.buckets {
            let term = w.term(&key, count, false);
            *sums.entry((key.particles, key.components)).or_default() += &term;
            total += term;
        }
        Ok(sums
            .into_iter()
            .map(|(k, s)| (k, big_ratio(&s, &total)))
            .collect())
    }

    /// Exact law of the plaquette family at the origin anchor.
    pub fn origin_family_distribution(&self, q: u32, z: f64) -> Result<BTreeMap<ClassFamily, f64>> {
        let w = self.weigher(q, z)?;
        let mut sums: BTreeMap<ClassFamily, BigUint> = BTreeMap::new();
        let mut total = BigUint::zero();
        for &(key, count) in &self.buckets {
            let term = w.term(&key, count, false);
            let fam = classify_occupation(self.variant, key.origin_pattern);
            *sums.entry(fam).or_default() += &term;
            total += term;
        }
        Ok(sums
            .into_iter()
            .map(|(f, s)| (f, big_ratio(&s, &total)))
            .collect())
    }

    /// Exact law of the color-resolved plaquette class at the origin anchor.
    pub fn origin_class_distribution(
        &self,
        q: u32,
        z: f64,
    ) -> Result<BTreeMap<PlaquetteClass, f64>> {
        let fams = self.origin_family_distribution(q, z)?;
        let w = self.weigher(q, z)?;
        let mut out: BTreeMap<PlaquetteClass, f64> = BTreeMap::new();
        for (fam, p) in fams {
            match fam {
                ClassFamily::GEven => {
                    out.insert(PlaquetteClass::GEven, p);
                }
                ClassFamily::GOdd => {
                    out.insert(PlaquetteClass::GOdd, p);
                }
                ClassFamily::GDis => {
                    out.insert(PlaquetteClass::GDis, p);
                }
                ClassFamily::B0 => {
                    out.insert(PlaquetteClass::B0, p);
                }
                ClassFamily::B1 => {
                    out.insert(PlaquetteClass::B1, p);
                }
                ClassFamily::B2 => {
                    out.insert(PlaquetteClass::B2, p);
                }
                ClassFamily::B3 => {
                    out.insert(PlaquetteClass::B3, p);
                }
                ClassFamily::BStag => {
                    out.insert(PlaquetteClass::BStag, p);
                }
                ClassFamily::GOrd => match self.variant {
                    Variant::MolecularHc => {
                        // Split by the parity of the diagonal actually occupied.
                        let mut diag = BigUint::zero();
                        let mut anti = BigUint::zero();
                        let mut total = BigUint::zero();
                        for &(key, count) in &self.buckets {
                            let term = w.term(&key, count, false);
                            match key.origin_pattern {
                                0b1001 => diag += &term,
                                0b0110 => anti += &term,
                                _ => {}
                            }
                            total += term;
                        }
                        let pe = big_ratio(&diag, &total) / q as f64;
                        let po = big_ratio(&anti, &total) / q as f64;
                        for color in 1..=q {
                            out.insert(
                                PlaquetteClass::GOrdStag {
                                    color,
                                    parity: Parity::Even,
                                },
                                pe,
                            );
                            out.insert(
                                PlaquetteClass::GOrdStag {
                                    color,
                                    parity: Parity::Odd,
                                },
                                po,
                            );
                        }
                    }
                    _ => {
                        for color in 1..=q {
                            out.insert(
                                PlaquetteClass::GOrd(crate::plaquette::ColorTag::Color(color)),
                                p / q as f64,
                            );
                        }
                    }
                },
                ClassFamily::BHat | ClassFamily::Inval => {
                    if p > 0.0 {
                        out.insert(PlaquetteClass::Inval, p);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Product-inequality check for a set of plaquette families.
    ///
    /// `lhs` is the probability that the origin plaquette family lies in
    /// `fams`; `rhs` is the `v`-th root of the probability that every
    /// plaquette family lies in `fams`.
    pub fn chessboard_families(
        &self,
        q: u32,
        z: f64,
        fams: &[ClassFamily],
    ) -> Result<ChessboardReport> {
        let w = self.weigher(q, z)?;
        let mut bits = 0u16;
        for &f in fams {
            bits |= family_bit(f);
        }
        let fam_of = |pat: u8| classify_occupation(self.variant, pat);
        let (lhs_sum, total) =
            self.weighted_pair(&w, |k| fams.contains(&fam_of(k.origin_pattern)), false);
        let (rhs_sum, _) = self.weighted_pair(&w, |k| k.family_set & !bits == 0, false);
        let lhs = big_ratio(&lhs_sum, &total);
        let rhs_prob = big_ratio(&rhs_sum, &total);
        let rhs = rhs_prob.powf(1.0 / self.torus.volume() as f64);
        let label = fams
            .iter()
            .map(|f| format!("{f:?}"))
            .collect::<Vec<_>>()
            .join(",");
        Ok(ChessboardReport {
            classes: label,
            lhs,
            rhs,
            holds: lhs <= rhs + CHESSBOARD_SLACK,
        })
    }

    /// Product-inequality check for one color-resolved class.
    pub fn chessboard_single_class(
        &self,
        q: u32,
        z: f64,
        class: PlaquetteClass,
    ) -> Result<ChessboardReport> {
        let color_ok = |c: u32| {
            if c == 0 || c > q {
                Err(Error::validation(format!("color {c} out of range 1..={q}")))
            } else {
                Ok(())
            }
        };
        let (fam, pattern_filter): (ClassFamily, Option<u8>) = match class {
            PlaquetteClass::GOrd(crate::plaquette::ColorTag::Color(c)) => {
                color_ok(c)?;
                (ClassFamily::GOrd, None)
            }
            PlaquetteClass::GOrdStag { color, parity } => {
                color_ok(color)?;
                let pat = match parity {
                    Parity::Even => 0b1001,
                    Parity::Odd => 0b0110,
                };
                (ClassFamily::GOrd, Some(pat))
            }
            PlaquetteClass::GOrd(crate::plaquette::ColorTag::Aligned) => {
                return Err(Error::validation(
                    "aligned-orientation classes have no discrete enumeration",
                ));
            }
            // Color-blind classes coincide with their family.
            other => return self.chessboard_families(q, z, &[other.family()]),
        };
        let w = self.weigher(q, z)?;
        let bits = family_bit(fam);
        let fam_of = |pat: u8| classify_occupation(self.variant, pat);
        let lhs_keep = |k: &ScanKey| {
            fam_of(k.origin_pattern) == fam
                && pattern_filter.map_or(true, |p| k.origin_pattern == p)
        };
        let (lhs_sum, total) = self.weighted_pair(&w, lhs_keep, false);
        // One pinned coloring: drop the q^c factor on the constrained event.
        let rhs_keep = |k: &ScanKey| {
            k.family_set == bits && pattern_filter.map_or(true, |p| k.origin_pattern == p)
        };
        let (rhs_sum, _) = self.weighted_pair(&w, rhs_keep, true);
        let lhs = big_ratio(&lhs_sum, &total) / q as f64;
        let rhs_prob = big_ratio(&rhs_sum, &total);
        let rhs = rhs_prob.powf(1.0 / self.torus.volume() as f64);
        Ok(ChessboardReport {
            classes: class.label(),
            lhs,
            rhs,
            holds: lhs <= rhs + CHESSBOARD_SLACK,
        })
    }
}

/// Additive slack granted to the product-inequality comparisons.
pub const CHESSBOARD_SLACK: f64 = 1e-12;

/// Result of one product-inequality check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ChessboardReport {
    /// Human-readable class-set label.
    pub classes: String,
    /// Probability of the class event at the origin plaquette.
    pub lhs: f64,
    /// `v`-th root of the probability that all plaquettes satisfy it.
    pub rhs: f64,
    /// Whether `lhs <= rhs` up to [`CHESSBOARD_SLACK`].
    pub holds: bool,
}

/// Checks `P(class at origin in F) <= P(all plaquettes in F)^(1/v)`.
///
/// `classes` must be either a union of whole families (color-blind
/// classes, or color-resolved classes covering every color) or one single
/// color-resolved class; other mixtures are rejected.
pub fn chessboard_check(
    m: &ModelSpec,
    torus: Torus,
    classes: &[PlaquetteClass],
) -> Result<ChessboardReport> {
    if classes.is_empty() {
        return Err(Error::validation("empty class set"));
    }
    let q = m.q();
    let scan = cached_scan(m.variant(), torus)?;
    let mut fams: Vec<ClassFamily> = Vec::new();
    let mut gord_colors: Vec<u32> = Vec::new();
    let mut stag: Vec<(u32, Parity)> = Vec::new();
    for &c in classes {
        match c {
            PlaquetteClass::GOrd(crate::plaquette::ColorTag::Color(a)) => gord_colors.push(a),
            PlaquetteClass::GOrdStag { color, parity } => stag.push((color, parity)),
            PlaquetteClass::GOrd(crate::plaquette::ColorTag::Aligned)
            | PlaquetteClass::BHat
            | PlaquetteClass::Inval => {
                return Err(Error::validation(format!(
                    "class {} is not an enumeration event",
                    c.label()
                )));
            }
            other => {
                let f = other.family();
                if !fams.contains(&f) {
                    fams.push(f);
                }
            }
        }
    }
    gord_colors.sort_unstable();
    gord_colors.dedup();
    let full_gord = gord_colors.len() == q as usize
        || stag.len() == 2 * q as usize && {
            let mut s = stag.clone();
            s.sort_unstable_by_key(|&(c, p)| (c, p == Parity::Odd));
            s.dedup();
            s.len() == 2 * q as usize
        };
    if full_gord {
        fams.push(ClassFamily::GOrd);
        gord_colors.clear();
        stag.clear();
    }
    if gord_colors.is_empty() && stag.is_empty() {
        return scan.chessboard_families(q, m.z(), &fams);
    }
    if fams.is_empty() && gord_colors.len() + stag.len() == 1 {
        return scan.chessboard_single_class(q, m.z(), classes[0]);
    }
    Err(Error::validation(
        "class sets mixing partial colors with other classes are not supported",
    ))
}

/// Partition function by occupation scan (discrete variants).
pub fn partition_function(m: &ModelSpec, torus: Torus) -> Result<f64> {
    let scan = cached_scan(m.variant(), torus)?;
    scan.partition_function(m.q(), m.z())
}

type ScanCache = Mutex<HashMap<(Variant, u32, u32), Arc<OccupationScan>>>;

/// Process-wide scan cache: criteria reuse one scan per (variant, torus).
pub fn cached_scan(variant: Variant, torus: Torus) -> Result<Arc<OccupationScan>> {
    static CACHE: OnceLock<ScanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (variant, torus.width(), torus.height());
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let scan = Arc::new(OccupationScan::new(variant, torus)?);
    cache.lock().unwrap().insert(key, scan.clone());
    Ok(scan)
}

// ---------------------------------------------------------------------------
// Exact dyadic weighting
// ---------------------------------------------------------------------------

/// Splits a positive finite f64 into `(mantissa, exponent)` with
/// `value = mantissa * 2^exponent` exactly and the mantissa odd.
fn dyadic_parts(z: f64) -> Result<(u64, i64)> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::validation(format!(
            "activity must be positive and finite, got {z}"
        )));
    }
    let bits = z.to_bits();
    let exp_bits = (bits >> 52 & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut mant, mut exp) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | 1 << 52, exp_bits - 1075)
    };
    let tz = mant.trailing_zeros();
    mant >>= tz;
    exp += tz as i64;
    Ok((mant, exp))
}

/// Evaluates `count * z^n * q^c` exactly as scaled integers.
///
/// All terms share the implicit scale `2^(-scale_shift())`, which cancels
/// in ratios.
struct Weigher {
    volume: usize,
    exp: i64,
    mant_pows: Vec<BigUint>,
    q_pows: Vec<BigUint>,
}

impl Weigher {
    fn new(volume: usize, q: u32, z: f64) -> Result<Self> {
        if q == 0 {
            return Err(Error::validation("q must be at least 1"));
        }
        let (mant, exp) = dyadic_parts(z)?;
        let mut mant_pows = Vec::with_capacity(volume + 1);
        let mut q_pows = Vec::with_capacity(volume + 1);
        let mant = BigUint::from(mant);
        let q = BigUint::from(q);
        let mut mp = BigUint::from(1u32);
        let mut qp = BigUint::from(1u32);
        for _ in 0..=volume {
            mant_pows.push(mp.clone());
            q_pows.push(qp.clone());
            mp *= &mant;
            qp *= &q;
        }
        Ok(Weigher {
            volume,
            exp,
            mant_pows,
            q_pows,
        })
    }

    fn scale_shift(&self) -> i64 {
        if self.exp < 0 {
            self.volume as i64 * -self.exp
        } else {
            0
        }
    }

    fn term(&self, key: &ScanKey, count: u128, pin_colors: bool) -> BigUint {
        let n = key.particles as usize;
        let mut t = BigUint::from(count) * &self.mant_pows[n];
        if !pin_colors {
            t *= &self.q_pows[key.components as usize];
        }
        let shift = if self.exp >= 0 {
            n as i64 * self.exp
        } else {
            (self.volume - n) as i64 * -self.exp
        };
        t << shift as u64
    }
}

/// `x * 2^pow2` as f64, accurate to ~1 ulp at any magnitude.
fn big_to_f64_pow2(x: &BigUint, pow2: i64) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_u64().expect("<= 64 bits") as f64;
    top * 2f64.powi((shift as i64 + pow2) as i32)
}

/// `a / b` as f64 for nonnegative big integers, `b > 0`.
fn big_ratio(a: &BigUint, b: &BigUint) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let sa = a.bits().saturating_sub(64);
    let sb = b.bits().saturating_sub(64);
    let ta = (a >> sa).to_u64().expect("<= 64 bits") as f64;
    let tb = (b >> sb).to_u64().expect("<= 64 bits") as f64;
    ta / tb * 2f64.powi((sa as i64 - sb as i64) as i32)
}

// ---------------------------------------------------------------------------
// Colored (literal) enumeration
// ---------------------------------------------------------------------------

fn colored_guard(q: u32, volume: usize) -> Result<u64> {
    let states = ((q + 1) as f64).powi(volume as i32);
    if states > MAX_COLORED_STATES {
        return Err(Error::capacity(format!(
            "colored enumeration needs {states:.3e} states; limit is {MAX_COLORED_STATES:.0e}"
        )));
    }
    Ok(states as u64)
}

fn decode_config(cfg: &mut Configuration, code: u64, q: u32, torus: Torus) {
    let base = (q + 1) as u64;
    let mut rest = code;
    for idx in 0..torus.volume() {
        let digit = (rest % base) as u32;
        rest /= base;
        let state = if digit == 0 {
            SiteState::Empty
        } else {
            SiteState::Color(digit)
        };
        cfg.set(torus.site_at(idx), state);
    }
}

struct BondTable {
    bonds: Vec<(usize, usize, bool)>,
    hc: bool,
    plain: bool,
}

impl BondTable {
    fn new(variant: Variant, torus: Torus) -> Self {
        let mut bonds = Vec::new();
        let mut push = |a: usize, b: usize, diag: bool| {
            if a < b {
                bonds.push((a, b, diag));
            } else if b < a {
                bonds.push((b, a, diag));
            }
        };
        for idx in 0..torus.volume() {
            let i = torus.site_at(idx);
            for (dx, dy, diag) in [(1i64, 0i64, false), (0, 1, false), (1, 1, true), (1, -1, true)]
            {
                if diag && variant == Variant::Diamond {
                    continue;
                }
                let j = torus.index(torus.offset(i, dx, dy));
                push(idx, j, diag);
            }
        }
        bonds.sort_unstable();
        bonds.dedup();
        BondTable {
            bonds,
            hc: variant == Variant::MolecularHc,
            plain: !matches!(variant, Variant::MolecularHc),
        }
    }

    fn admissible(&self, states: &[u32]) -> bool {
        for &(a, b, diag) in &self.bonds {
            let (sa, sb) = (states[a], states[b]);
            if sa == 0 || sb == 0 {
                continue;
            }
            if self.plain || (self.hc && diag) {
                if sa != sb {
                    return false;
                }
            } else if self.hc && !diag {
                return false;
            }
        }
        true
    }
}

/// Visits every admissible colored configuration in code order.
pub fn for_each_admissible(
    m: &ModelSpec,
    torus: Torus,
    mut visit: impl FnMut(&Configuration),
) -> Result<()> {
    let q = m.q();
    let states = colored_guard(q, torus.volume())?;
    let bonds = BondTable::new(m.variant(), torus);
    let mut cfg = Configuration::empty(torus);
    let mut raw = vec![0u32; torus.volume()];
    for code in 0..states {
        let base = (q + 1) as u64;
        let mut rest = code;
        for slot in raw.iter_mut() {
            *slot = (rest % base) as u32;
            rest /= base;
        }
        if !bonds.admissible(&raw) {
            continue;
        }
        decode_config(&mut cfg, code, q, torus);
        visit(&cfg);
    }
    Ok(())
}

/// Exact Gibbs probability of `event` by full colored enumeration.
///
/// Deterministic: partial sums are combined in chunk order.
pub fn event_probability(
    m: &ModelSpec,
    torus: Torus,
    event: impl Fn(&Configuration) -> bool + Sync,
) -> Result<f64> {
    let q = m.q();
    let states = colored_guard(q, torus.volume())?;
    let bonds = BondTable::new(m.variant(), torus);
    let v = torus.volume();
    let mut z_pow = Vec::with_capacity(v + 1);
    let mut p = 1.0;
    for _ in 0..=v {
        z_pow.push(p);
        p *= m.z();
    }
    let chunk = 1u64 << 16;
    let chunks = (states + chunk - 1) / chunk;
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut cfg = Configuration::empty(torus);
            let mut raw = vec![0u32; v];
            let mut num = crate::stats::KahanSum::new();
            let mut den = crate::stats::KahanSum::new();
            let start = ci * chunk;
            let end = (start + chunk).min(states);
            for code in start..end {
                let base = (q + 1) as u64;
                let mut rest = code;
                let mut particles = 0usize;
                for slot in raw.iter_mut() {
                    *slot = (rest % base) as u32;
                    if *slot != 0 {
                        particles += 1;
                    }
                    rest /= base;
                }
                if !bonds.admissible(&raw) {
                    continue;
                }
                let w = z_pow[particles];
                den.add(w);
                decode_config(&mut cfg, code, q, torus);
                if event(&cfg) {
                    num.add(w);
                }
            }
            (num.value(), den.value())
        })
        .collect();
    let mut num = crate::stats::KahanSum::new();
    let mut den = crate::stats::KahanSum::new();
    for (n, d) in partials {
        num.add(n);
        den.add(d);
    }
    Ok(num.value() / den.value())
}

/// Counts admissible colored configurations satisfying `pred`.
pub fn colored_count(
    m: &ModelSpec,
    torus: Torus,
    pred: impl Fn(&Configuration) -> bool + Sync,
) -> Result<BigUint> {
    let q = m.q();
    let states = colored_guard(q, torus.volume())?;
    let bonds = BondTable::new(m.variant(), torus);
    let v = torus.volume();
    let chunk = 1u64 << 16;
    let chunks = (states + chunk - 1) / chunk;
    let total: u64 = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut cfg = Configuration::empty(torus);
            let mut raw = vec![0u32; v];
            let mut count = 0u64;
            let start = ci * chunk;
            let end = (start + chunk).min(states);
            for code in start..end {
                let base = (q + 1) as u64;
                let mut rest = code;
                for slot in raw.iter_mut() {
                    *slot = (rest % base) as u32;
                    rest /= base;
                }
                if !bonds.admissible(&raw) {
                    continue;
                }
                decode_config(&mut cfg, code, q, torus);
                if pred(&cfg) {
                    count += 1;
                }
            }
            count
        })
        .sum();
    Ok(BigUint::from(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plaquette::classify;

    fn torus(w: u32, h: u32) -> Torus {
        Torus::new(w, h).unwrap()
    }

    #[test]
    fn partition_function_2x2_matches_closed_form() {
        // Z = 1 + 4qz + 2qz^2 + 4q z^2 (adjacent like pairs)... verified
        // against the literal enumeration below; spot values:
        // q=2, z=1: 35. q=1, z=1: 16 = 2^4 (no constraint binds).
        let scan = OccupationScan::new(Variant::Diamond, torus(2, 2)).unwrap();
        assert_eq!(scan.pattern_count(), 16);
        assert!((scan.partition_function(2, 1.0).unwrap() - 35.0).abs() < 1e-9);
        assert!((scan.partition_function(1, 1.0).unwrap() - 16.0).abs() < 1e-9);
    }

    #[test]
    fn partition_function_hc_2x2() {
        // Axial exclusion leaves patterns: empty (1), singletons (4),
        // diagonal pairs (2). Z = 1 + 4qz + 2qz^2 at any q.
        let scan = OccupationScan::new(Variant::MolecularHc, torus(2, 2)).unwrap();
        assert_eq!(scan.pattern_count(), 7);
        assert!((scan.partition_function(1, 1.0).unwrap() - 7.0).abs() < 1e-9);
        let z = 0.5;
        let expect = 1.0 + 4.0 * 3.0 * z + 2.0 * 3.0 * z * z;
        assert!((scan.partition_function(3, z).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn scan_matches_literal_enumeration() {
        // The q^components identity against brute-force colored sums.
        for variant in [Variant::Diamond, Variant::Square, Variant::MolecularHc] {
            let t = torus(4, 2);
            let scan = OccupationScan::new(variant, t).unwrap();
            for (q, z) in [(1u32, 1.0f64), (2, 0.5), (3, 2.0)] {
                let m = ModelSpec::discrete(variant, q, z).unwrap();
                let mut z_lit = crate::stats::KahanSum::new();
                for_each_admissible(&m, t, |cfg| {
                    z_lit.add(z.powi(cfg.particle_count() as i32));
                })
                .unwrap();
                let z_scan = scan.partition_function(q, z).unwrap();
                assert!(
                    (z_scan - z_lit.value()).abs() <= 1e-9 * z_lit.value(),
                    "{variant:?} q={q} z={z}: scan {z_scan} vs literal {}",
                    z_lit.value()
                );
            }
        }
    }

    #[test]
    fn site_marginal_sums_to_one_and_matches_event() {
        let t = torus(4, 2);
        let m = ModelSpec::diamond(2, 0.75).unwrap();
        let scan = OccupationScan::new(Variant::Diamond, t).unwrap();
        let marginal = scan.site_marginal(2, 0.75).unwrap();
        assert!((marginal.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let origin = SiteIndex::new(0, 0);
        let p_color1 = event_probability(&m, t, |cfg| {
            cfg.state(origin) == SiteState::Color(1)
        })
        .unwrap();
        assert!((marginal[1] - p_color1).abs() < 1e-10);
    }

    #[test]
    fn origin_class_distribution_sums_to_one() {
        for variant in [Variant::Diamond, Variant::Square, Variant::MolecularHc] {
            let scan = OccupationScan::new(variant, torus(4, 4)).unwrap();
            let dist = scan.origin_class_distribution(2, 1.0).unwrap();
            let total: f64 = dist.values().sum();
            assert!((total - 1.0).abs() < 1e-12, "{variant:?}: {total}");
        }
    }

    #[test]
    fn origin_family_matches_literal_classification() {
        let t = torus(4, 2);
        let m = ModelSpec::square(2, 1.25).unwrap();
        let scan = OccupationScan::new(Variant::Square, t).unwrap();
        let dist = scan.origin_family_distribution(2, 1.25).unwrap();
        let p_scan = dist.get(&ClassFamily::GOrd).copied().unwrap_or(0.0);
        let origin = SiteIndex::new(0, 0);
        let p_lit = event_probability(&m, t, |cfg| {
            classify(&m, &cfg.local_pattern(origin)).family() == ClassFamily::GOrd
        })
        .unwrap();
        assert!((p_scan - p_lit).abs() < 1e-10, "{p_scan} vs {p_lit}");
    }

    #[test]
    fn chessboard_holds_on_small_tori() {
        let t = torus(4, 4);
        for variant in [Variant::Diamond, Variant::Square, Variant::MolecularHc] {
            let scan = OccupationScan::new(variant, t).unwrap();
            for fam in [ClassFamily::B0, ClassFamily::B2, ClassFamily::GOrd] {
                let rep = scan.chessboard_families(2, 1.0, &[fam]).unwrap();
                assert!(rep.holds, "{variant:?} {fam:?}: {rep:?}");
                assert!(rep.lhs >= 0.0 && rep.rhs >= 0.0);
            }
        }
    }

    #[test]
    fn chessboard_single_color_class() {
        let t = torus(4, 4);
        let m = ModelSpec::diamond(2, 1.0).unwrap();
        let rep = chessboard_check(
            &m,
            t,
            &[PlaquetteClass::GOrd(crate::plaquette::ColorTag::Color(1))],
        )
        .unwrap();
        assert!(rep.holds, "{rep:?}");
        // Both colors together equal the whole family.
        let both = chessboard_check(
            &m,
            t,
            &[
                PlaquetteClass::GOrd(crate::plaquette::ColorTag::Color(1)),
                PlaquetteClass::GOrd(crate::plaquette::ColorTag::Color(2)),
            ],
        )
        .unwrap();
        let scan = cached_scan(Variant::Diamond, t).unwrap();
        let fam_rep = scan.chessboard_families(2, 1.0, &[ClassFamily::GOrd]).unwrap();
        assert!((both.lhs - fam_rep.lhs).abs() < 1e-15);
        assert!((both.rhs - fam_rep.rhs).abs() < 1e-15);
    }

    #[test]
    fn chessboard_rejects_mixed_partial_sets() {
        let t = torus(4, 4);
        let m = ModelSpec::diamond(3, 1.0).unwrap();
        let err = chessboard_check(
            &m,
            t,
            &[
                PlaquetteClass::GOrd(crate::plaquette::ColorTag::Color(1)),
                PlaquetteClass::B0,
            ],
        );
        assert!(err.is_err());
    }

    #[test]
    fn degenerate_two_by_two_reads_one_pattern() {
        // On 2x2 every anchor reads the same reflected pattern, so the
        // all-plaquette event coincides with the origin event.
        let scan = OccupationScan::new(Variant::Diamond, torus(2, 2)).unwrap();
        let rep = scan
            .chessboard_families(2, 1.0, &[ClassFamily::GEven])
            .unwrap();
        assert!((rep.rhs - rep.lhs.powf(0.25)).abs() < 1e-12);
        assert!(rep.holds);
    }

    #[test]
    fn family_sets_never_contain_inval_for_admissible_patterns() {
        let inval_bit = family_bit(ClassFamily::Inval);
        for variant in [Variant::Diamond, Variant::Square, Variant::MolecularHc] {
            let scan = OccupationScan::new(variant, torus(4, 4)).unwrap();
            for &(key, _) in scan.buckets() {
                assert_eq!(key.family_set & inval_bit, 0, "{variant:?} {key:?}");
            }
        }
    }

    #[test]
    fn event_probability_color_symmetry() {
        let t = torus(2, 2);
        let m = ModelSpec::diamond(3, 0.5).unwrap();
        let origin = SiteIndex::new(0, 0);
        let p: Vec<f64> = (1..=3)
            .map(|c| {
                event_probability(&m, t, |cfg| cfg.state(origin) == SiteState::Color(c)).unwrap()
            })
            .collect();
        assert!((p[0] - p[1]).abs() < 1e-14);
        assert!((p[1] - p[2]).abs() < 1e-14);
    }

    #[test]
    fn capacity_guards_fire() {
        assert!(OccupationScan::new(Variant::Diamond, torus(6, 6)).is_err());
        let m = ModelSpec::diamond(9, 1.0).unwrap();
        assert!(event_probability(&m, torus(4, 4), |_| true).is_err());
    }

    #[test]
    fn rotor_scan_rejected() {
        assert!(OccupationScan::new(Variant::Rotor, torus(4, 4)).is_err());
    }

    #[test]
    fn dyadic_decomposition_is_exact() {
        for z in [1.0, 0.5, 2.0, 5.0, 0.1, 1.25, 3.75e-3, 1e6] {
            let (mant, exp) = dyadic_parts(z).unwrap();
            let back = mant as f64 * 2f64.powi(exp as i32);
            assert_eq!(back, z, "z={z}");
            assert_eq!(mant % 2, 1);
        }
    }

    #[test]
    fn big_ratio_handles_extreme_magnitudes() {
        let a = BigUint::from(3u32).pow(400);
        let b = BigUint::from(3u32).pow(401);
        assert!((big_ratio(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        let tiny = big_ratio(&BigUint::from(1u32), &BigUint::from(2u32).pow(200));
        assert!(tiny > 0.0 && tiny < 1e-59);
    }
}

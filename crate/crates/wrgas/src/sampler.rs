//! Markov-chain sampling of the finite-torus Gibbs laws.
//!
//! The workhorse is the single-site heat bath: site `i` is resampled from
//! its exact conditional given the rest of the configuration, which is
//! `Empty` with weight 1 and each allowed occupied state with weight `z`
//! (`z` times arc length for the rotor). A sweep applies this in raster
//! order. Interleaved cluster moves redraw the species mark of every
//! occupied cluster at once — a uniform color per cluster for the discrete
//! variants, a uniform rigid rotation per cluster for the rotor — which is
//! what decorrelates colors at large `q`, where single-site moves change a
//! cluster's color only by evaporating it.
//!
//! Chains are deterministic functions of their schedule: the seed feeds a
//! counter-based generator and every record carries the seed and the
//! generator id.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{AdjacencyKind, SiteIndex, Torus};
use crate::model::{
    allowed_states, config_admissible, site_admissible, AllowedStates, Configuration, ModelSpec,
    SiteState, Variant,
};
use crate::plaquette::{family_wrapping, good_families, good_field, ClassFamily, WrappingStatus};

/// Name of the pseudo-random generator backing every chain.
pub const GENERATOR_ID: &str = "chacha8";

/// Sweep counts and cadence of a measured run.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ChainSchedule {
    pub burn_in_sweeps: u64,
    pub measure_sweeps: u64,
    /// Emit one record every this many post-burn-in sweeps. Must be >= 1.
    pub measure_every: u64,
    /// Apply a cluster move after every this many sweeps; 0 disables.
    pub cluster_move_every: u64,
    pub seed: u64,
}

impl ChainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.measure_every < 1 {
            return Err(Error::validation("measure_every must be >= 1"));
        }
        Ok(())
    }
}

/// Where a chain starts.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum InitialState {
    Empty,
    /// Even sublattice fully occupied (color 1 / orientation 0), odd empty.
    CheckerboardEven,
    CheckerboardOdd,
    /// Fully occupied in the given color. Invalid for the molecular hard
    /// core, whose fully occupied configuration is inadmissible; the rotor
    /// starts fully aligned at orientation 0 and ignores the color.
    Monochromatic(u32),
    /// One heat-bath raster pass over the empty configuration.
    RandomAdmissible,
}

/// Build the starting configuration for `init`, drawing from `rng` only in
/// the `RandomAdmissible` case.
pub fn initial_configuration(
    m: &ModelSpec,
    t: Torus,
    init: InitialState,
    rng: &mut impl Rng,
) -> Result<Configuration> {
    let occupied_mark = |_s: SiteIndex| -> SiteState {
        if m.variant() == Variant::Rotor {
            SiteState::Orientation(0.0)
        } else {
            SiteState::Color(1)
        }
    };
    match init {
        InitialState::Empty => Ok(Configuration::empty(t)),
        InitialState::CheckerboardEven | InitialState::CheckerboardOdd => {
            let want_even = init == InitialState::CheckerboardEven;
            let states = (0..t.volume())
                .map(|i| {
                    let s = t.site_at(i);
                    if s.is_even() == want_even {
                        occupied_mark(s)
                    } else {
                        SiteState::Empty
                    }
                })
                .collect();
            Configuration::new(m, t, states)
        }
        InitialState::Monochromatic(a) => {
            if m.variant() == Variant::MolecularHc {
                return Err(Error::validation(
                    "the fully occupied configuration is inadmissible for the molecular hard core",
                ));
            }
            let fill = if m.variant() == Variant::Rotor {
                SiteState::Orientation(0.0)
            } else {
                SiteState::Color(a)
            };
            Configuration::new(m, t, vec![fill; t.volume()])
        }
        InitialState::RandomAdmissible => {
            let mut cfg = Configuration::empty(t);
            sweep(m, &mut cfg, rng);
            Ok(cfg)
        }
    }
}

/// Resample site `i` from its exact single-site conditional.
pub fn heat_bath_update(m: &ModelSpec, cfg: &mut Configuration, i: SiteIndex, rng: &mut impl Rng) {
    let z = m.z();
    let next = match allowed_states(m, cfg, i) {
        AllowedStates::Discrete(set) => {
            let k = set.count() as f64;
            if k == 0.0 || rng.gen::<f64>() * (1.0 + k * z) < 1.0 {
                SiteState::Empty
            } else {
                SiteState::Color(set.sample(rng).expect("occupancy drawn from empty color set"))
            }
        }
        AllowedStates::Arcs(arcs) => {
            let len = arcs.measure();
            if len == 0.0 || rng.gen::<f64>() * (1.0 + len * z) < 1.0 {
                SiteState::Empty
            } else {
                SiteState::Orientation(arcs.sample(rng))
            }
        }
    };
    cfg.set(i, next);
    debug_assert!(site_admissible(m, cfg, i));
}

/// One raster-order pass of heat-bath updates.
pub fn sweep(m: &ModelSpec, cfg: &mut Configuration, rng: &mut impl Rng) {
    let t = cfg.torus();
    for i in 0..t.volume() {
        heat_bath_update(m, cfg, t.site_at(i), rng);
    }
}

struct Dsu {
    parent: Vec<u32>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let g = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = g;
            i = g;
        }
        i
    }

    /// The smaller root wins, so labels are stable under visit order.
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi as usize] = lo;
    }
}

enum ClusterMark {
    Color(u32),
    Rotation(f64),
}

/// Redraw every occupied cluster's species mark: an independent uniform
/// color for the discrete variants, an independent uniform rigid rotation
/// for the rotor. The occupation field is unchanged and admissibility is
/// preserved (all constrained bonds between occupied sites are internal to
/// a cluster).
pub fn cluster_transform(m: &ModelSpec, cfg: &mut Configuration, rng: &mut impl Rng) {
    let t = cfg.torus();
    let v = t.volume();
    let kind = m.variant().cluster_adjacency();
    let mut dsu = Dsu::new(v);
    for idx in 0..v {
        let s = t.site_at(idx);
        if !cfg.state(s).is_occupied() {
            continue;
        }
        t.for_each_neighbor(s, kind, |n| {
            if cfg.state(n).is_occupied() {
                dsu.union(idx as u32, t.index(n) as u32);
            }
        });
    }
    // Marks are drawn on first contact with each cluster, in raster order.
    let mut marks: Vec<Option<ClusterMark>> = (0..v).map(|_| None).collect();
    for idx in 0..v {
        let s = t.site_at(idx);
        if !cfg.state(s).is_occupied() {
            continue;
        }
        let root = dsu.find(idx as u32) as usize;
        let mark = marks[root].get_or_insert_with(|| {
            if m.variant() == Variant::Rotor {
                ClusterMark::Rotation(rng.gen::<f64>())
            } else {
                ClusterMark::Color(rng.gen_range(1..=m.q()))
            }
        });
        match *mark {
            ClusterMark::Color(a) => cfg.set(s, SiteState::Color(a)),
            ClusterMark::Rotation(phi) => {
                if let SiteState::Orientation(theta) = cfg.state(s) {
                    cfg.set(s, SiteState::Orientation((theta + phi).rem_euclid(1.0)));
                }
            }
        }
    }
    debug_assert!(config_admissible(m, cfg));
}

/// One sampled observation of a chain.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub sweep: u64,
    pub particles: u64,
    pub density: f64,
    pub density_even: f64,
    pub density_odd: f64,
    /// `|density_even - density_odd|`.
    pub staggered_order: f64,
    /// Fraction of particles carrying the most common color; absent for
    /// the rotor and for particle-free configurations.
    pub dominant_color_fraction: Option<f64>,
    /// Most frequent plaquette class and its fraction of all plaquettes.
    pub dominant_class: String,
    pub dominant_class_fraction: f64,
    /// Plaquette histogram by class family; sums to the torus volume.
    pub families: BTreeMap<ClassFamily, u64>,
    /// Wrapping status of each good family's plaquette set.
    pub wrapping: BTreeMap<ClassFamily, WrappingStatus>,
    pub seed: u64,
    pub generator: String,
}

/// Read every observable off `cfg`.
pub fn measure(m: &ModelSpec, cfg: &Configuration, sweep: u64, seed: u64) -> MeasurementRecord {
    let t = cfg.torus();
    let v = t.volume();
    let half = (v / 2) as f64;
    let mut even = 0u64;
    let mut odd = 0u64;
    let mut color_counts: BTreeMap<u32, u64> = BTreeMap::new();
    for idx in 0..v {
        let s = t.site_at(idx);
        match cfg.state(s) {
            SiteState::Empty => {}
            state => {
                if s.is_even() {
                    even += 1;
                } else {
                    odd += 1;
                }
                if let SiteState::Color(a) = state {
                    *color_counts.entry(a).or_insert(0) += 1;
                }
            }
        }
    }
    let particles = even + odd;
    let density_even = even as f64 / half;
    let density_odd = odd as f64 / half;
    let dominant_color_fraction = color_counts
        .values()
        .max()
        .map(|&top| top as f64 / particles as f64);

    let field = good_field(m, cfg, false);
    let (class, class_fraction) = field.dominant_class();
    let families = field.family_histogram();
    let wrapping = good_families(m.variant())
        .iter()
        .map(|&fam| (fam, family_wrapping(&field, fam, AdjacencyKind::Nn)))
        .collect();

    MeasurementRecord {
        sweep,
        particles,
        density: particles as f64 / v as f64,
        density_even,
        density_odd,
        staggered_order: (density_even - density_odd).abs(),
        dominant_color_fraction,
        dominant_class: class.label(),
        dominant_class_fraction: class_fraction,
        families,
        wrapping,
        seed,
        generator: GENERATOR_ID.to_string(),
    }
}

/// A single-threaded chain owning its configuration and generator.
pub struct Chain {
    m: ModelSpec,
    sched: ChainSchedule,
    cfg: Configuration,
    rng: ChaCha8Rng,
    sweep_index: u64,
}

impl Chain {
    pub fn new(m: &ModelSpec, t: Torus, init: InitialState, sched: ChainSchedule) -> Result<Self> {
        sched.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(sched.seed);
        let cfg = initial_configuration(m, t, init, &mut rng)?;
        Ok(Chain { m: *m, sched, cfg, rng, sweep_index: 0 })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.m
    }

    pub fn configuration(&self) -> &Configuration {
        &self.cfg
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweep_index
    }

    /// Change the activity mid-run; the configuration is kept, which is
    /// what warm-started sweeps along an activity grid rely on.
    pub fn set_activity(&mut self, z: f64) -> Result<()> {
        self.m = self.m.with_z(z)?;
        Ok(())
    }

    /// One raster sweep plus any scheduled cluster move.
    pub fn advance(&mut self) {
        sweep(&self.m, &mut self.cfg, &mut self.rng);
        self.sweep_index += 1;
        let every = self.sched.cluster_move_every;
        if every > 0 && self.sweep_index % every == 0 {
            cluster_transform(&self.m, &mut self.cfg, &mut self.rng);
        }
    }

    pub fn measure(&self) -> MeasurementRecord {
        measure(&self.m, &self.cfg, self.sweep_index, self.sched.seed)
    }

    /// Burn in, then sweep the measured phase, emitting one record every
    /// `measure_every` sweeps.
    pub fn run(&mut self, mut emit: impl FnMut(MeasurementRecord)) {
        for _ in 0..self.sched.burn_in_sweeps {
            self.advance();
        }
        for k in 1..=self.sched.measure_sweeps {
            self.advance();
            if k % self.sched.measure_every == 0 {
                emit(self.measure());
            }
        }
    }
}

/// Run a fresh chain to completion and collect its records.
pub fn run_chain(
    m: &ModelSpec,
    t: Torus,
    init: InitialState,
    sched: ChainSchedule,
) -> Result<Vec<MeasurementRecord>> {
    let mut records = Vec::new();
    let mut chain = Chain::new(m, t, init, sched)?;
    chain.run(|r| records.push(r));
    Ok(records)
}

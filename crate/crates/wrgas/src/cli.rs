//! Config parsing, command dispatch, and run serialization.
//!
//! A run is described by a [`RunConfig`], read from an INI-style file
//! (`key = value` lines under `[section]` headers) and/or command-line
//! flags, flags winning. Every output stream starts with a header record
//! carrying the fully resolved config, then one JSON record per line;
//! when the output goes to a file, a CSV summary is written next to it
//! with the extension swapped to `.csv`.
//!
//! Config schema (all keys optional unless a command needs them):
//!
//! ```text
//! [run]       command = simulate | sweep | verify-chessboard | count |
//!                       exact-prob | transfer | percolation-report
//!             out = results.jsonl
//! [model]     variant = diamond | square | molecular-hc | rotor
//!             q = 2            (discrete variants)
//!             alpha = 0.1      (rotor only, in turns)
//!             z = 1.0
//! [torus]     width = 4
//!             height = 4
//! [schedule]  burn_in = 1000
//!             measure = 10000
//!             every = 10
//!             cluster_every = 1
//!             seed = 1
//! [sweep]     z_min = 0.5     z_max = 8.0     z_points = 25
//!             level = 0.6666666666666666
//! [exact]     family = B2L
//!             classes = GOrd,GEven
//! [transfer]  strip_width = 2
//! ```
//!
//! Unknown sections or keys, duplicate keys, and malformed lines are
//! rejected with the offending line number. Exit codes: 0 success, 2
//! validation or parse failure, 3 capacity guard, 4 non-convergence.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{chessboard_check, family_count, transfer_pressure, cached_scan};
use crate::exact::FamilyId;
use crate::lattice::Torus;
use crate::model::{ModelSpec, Variant};
use crate::plaquette::{ClassFamily, PlaquetteClass, WrappingStatus, FAMILIES};
use crate::sampler::{run_chain, ChainSchedule, InitialState, MeasurementRecord, GENERATOR_ID};
use crate::stats::{batch_means_se, mean};
use crate::thermo::{
    default_sweep_bounds, density_sweep, geometric_grid, locate_jump, SweepDirection, SweepResult,
};

/// Artifact format version stamped into every header record.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Simulate,
    Sweep,
    VerifyChessboard,
    Count,
    ExactProb,
    Transfer,
    PercolationReport,
}

impl CommandKind {
    pub const ALL: [CommandKind; 7] = [
        CommandKind::Simulate,
        CommandKind::Sweep,
        CommandKind::VerifyChessboard,
        CommandKind::Count,
        CommandKind::ExactProb,
        CommandKind::Transfer,
        CommandKind::PercolationReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Sweep => "sweep",
            CommandKind::VerifyChessboard => "verify-chessboard",
            CommandKind::Count => "count",
            CommandKind::ExactProb => "exact-prob",
            CommandKind::Transfer => "transfer",
            CommandKind::PercolationReport => "percolation-report",
        }
    }

    fn from_str(s: &str) -> Result<Self> {
        CommandKind::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::parse(format!("unknown command '{s}'")))
    }
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Diamond => "diamond",
        Variant::Square => "square",
        Variant::MolecularHc => "molecular-hc",
        Variant::Rotor => "rotor",
    }
}

fn variant_from_str(s: &str) -> Result<Variant> {
    [Variant::Diamond, Variant::Square, Variant::MolecularHc, Variant::Rotor]
        .into_iter()
        .find(|v| variant_name(*v).eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::parse(format!("unknown variant '{s}'")))
}

fn init_name(init: InitialState) -> String {
    match init {
        InitialState::Empty => "empty".into(),
        InitialState::CheckerboardEven => "checkerboard-even".into(),
        InitialState::CheckerboardOdd => "checkerboard-odd".into(),
        InitialState::Monochromatic(a) => format!("mono:{a}"),
        InitialState::RandomAdmissible => "random".into(),
    }
}

fn init_from_str(s: &str) -> Result<InitialState> {
    let lower = s.to_ascii_lowercase();
    Ok(match lower.as_str() {
        "empty" => InitialState::Empty,
        "checkerboard-even" => InitialState::CheckerboardEven,
        "checkerboard-odd" => InitialState::CheckerboardOdd,
        "random" => InitialState::RandomAdmissible,
        "mono" => InitialState::Monochromatic(1),
        _ => match lower.strip_prefix("mono:") {
            Some(n) => InitialState::Monochromatic(
                n.parse().map_err(|_| Error::parse(format!("bad color in '{s}'")))?,
            ),
            None => return Err(Error::parse(format!("unknown initial state '{s}'"))),
        },
    })
}

fn class_family_from_str(s: &str) -> Result<ClassFamily> {
    FAMILIES
        .into_iter()
        .find(|f| format!("{f:?}").eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::parse(format!("unknown plaquette family '{s}'")))
}

/// A fully described run. Optional fields are filled by defaults or by
/// command-specific resolution; flags override file values.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub out: Option<String>,
    pub variant: Variant,
    pub q: Option<u32>,
    pub alpha: Option<f64>,
    pub z: Option<f64>,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub init: InitialState,
    pub schedule: ChainSchedule,
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    pub z_points: Option<usize>,
    /// Density level for the jump locator.
    pub level: f64,
    pub family: Option<FamilyId>,
    pub classes: Option<Vec<ClassFamily>>,
    pub strip_width: Option<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: CommandKind::Simulate,
            out: None,
            variant: Variant::Diamond,
            q: None,
            alpha: None,
            z: None,
            width: None,
            height: None,
            init: InitialState::RandomAdmissible,
            schedule: ChainSchedule {
                burn_in_sweeps: 1000,
                measure_sweeps: 10_000,
                measure_every: 10,
                cluster_move_every: 1,
                seed: 1,
            },
            z_min: None,
            z_max: None,
            z_points: None,
            level: 2.0 / 3.0,
            family: None,
            classes: None,
            strip_width: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(format!("line {line}: bad value '{value}' for {key}")))
}

/// Parse the documented INI schema into a config over the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut rc = RunConfig::default();
    let mut section = String::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(format!("line {line}: unterminated section")))?
                .trim();
            if !["run", "model", "torus", "schedule", "sweep", "exact", "transfer"]
                .contains(&name)
            {
                return Err(Error::parse(format!("line {line}: unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("line {line}: expected 'key = value'")))?;
        let key = key.trim();
        let value = value.trim();
        if section.is_empty() {
            return Err(Error::parse(format!("line {line}: key '{key}' before any section")));
        }
        if !seen.insert((section.clone(), key.to_string())) {
            return Err(Error::parse(format!("line {line}: duplicate key '{key}' in [{section}]")));
        }
        match (section.as_str(), key) {
            ("run", "command") => rc.command = CommandKind::from_str(value)?,
            ("run", "out") => rc.out = Some(value.to_string()),
            ("model", "variant") => rc.variant = variant_from_str(value)?,
            ("model", "q") => rc.q = Some(parse_value(value, key, line)?),
            ("model", "alpha") => rc.alpha = Some(parse_value(value, key, line)?),
            ("model", "z") => rc.z = Some(parse_value(value, key, line)?),
            ("torus", "width") => rc.width = Some(parse_value(value, key, line)?),
            ("torus", "height") => rc.height = Some(parse_value(value, key, line)?),
            ("schedule", "burn_in") => rc.schedule.burn_in_sweeps = parse_value(value, key, line)?,
            ("schedule", "measure") => rc.schedule.measure_sweeps = parse_value(value, key, line)?,
            ("schedule", "every") => rc.schedule.measure_every = parse_value(value, key, line)?,
            ("schedule", "cluster_every") => {
                rc.schedule.cluster_move_every = parse_value(value, key, line)?
            }
            ("schedule", "seed") => rc.schedule.seed = parse_value(value, key, line)?,
            ("schedule", "init") => rc.init = init_from_str(value)?,
            ("sweep", "z_min") => rc.z_min = Some(parse_value(value, key, line)?),
            ("sweep", "z_max") => rc.z_max = Some(parse_value(value, key, line)?),
            ("sweep", "z_points") => rc.z_points = Some(parse_value(value, key, line)?),
            ("sweep", "level") => rc.level = parse_value(value, key, line)?,
            ("exact", "family") => rc.family = Some(value.parse()?),
            ("exact", "classes") => {
                let mut fams = Vec::new();
                for part in value.split(',') {
                    fams.push(class_family_from_str(part.trim())?);
                }
                rc.classes = Some(fams);
            }
            ("transfer", "strip_width") => rc.strip_width = Some(parse_value(value, key, line)?),
            _ => {
                return Err(Error::parse(format!(
                    "line {line}: unknown key '{key}' in [{section}]"
                )))
            }
        }
    }
    Ok(rc)
}

/// Render a config in the INI schema; `parse_config(render(rc)) == rc`.
pub fn render(rc: &RunConfig) -> String {
    let mut s = String::new();
    let mut push = |line: String| {
        s.push_str(&line);
        s.push('\n');
    };
    push("[run]".into());
    push(format!("command = {}", rc.command.name()));
    if let Some(out) = &rc.out {
        push(format!("out = {out}"));
    }
    push(String::new());
    push("[model]".into());
    push(format!("variant = {}", variant_name(rc.variant)));
    if let Some(q) = rc.q {
        push(format!("q = {q}"));
    }
    if let Some(alpha) = rc.alpha {
        push(format!("alpha = {alpha:?}"));
    }
    if let Some(z) = rc.z {
        push(format!("z = {z:?}"));
    }
    if rc.width.is_some() || rc.height.is_some() {
        push(String::new());
        push("[torus]".into());
        if let Some(w) = rc.width {
            push(format!("width = {w}"));
        }
        if let Some(h) = rc.height {
            push(format!("height = {h}"));
        }
    }
    push(String::new());
    push("[schedule]".into());
    push(format!("burn_in = {}", rc.schedule.burn_in_sweeps));
    push(format!("measure = {}", rc.schedule.measure_sweeps));
    push(format!("every = {}", rc.schedule.measure_every));
    push(format!("cluster_every = {}", rc.schedule.cluster_move_every));
    push(format!("seed = {}", rc.schedule.seed));
    push(format!("init = {}", init_name(rc.init)));
    push(String::new());
    push("[sweep]".into());
    if let Some(z) = rc.z_min {
        push(format!("z_min = {z:?}"));
    }
    if let Some(z) = rc.z_max {
        push(format!("z_max = {z:?}"));
    }
    if let Some(n) = rc.z_points {
        push(format!("z_points = {n}"));
    }
    push(format!("level = {:?}", rc.level));
    if rc.family.is_some() || rc.classes.is_some() {
        push(String::new());
        push("[exact]".into());
        if let Some(f) = rc.family {
            push(format!("family = {}", f.name()));
        }
        if let Some(classes) = &rc.classes {
            let names: Vec<String> = classes.iter().map(|c| format!("{c:?}")).collect();
            push(format!("classes = {}", names.join(",")));
        }
    }
    if let Some(w) = rc.strip_width {
        push(String::new());
        push("[transfer]".into());
        push(format!("strip_width = {w}"));
    }
    s
}

/// Command-line front end; flags mirror the config keys and override them.
#[derive(Parser, Debug)]
#[command(
    name = "wrgas",
    version,
    about = "Lattice-gas simulation and exact verification toolkit"
)]
pub struct Cli {
    /// simulate | sweep | verify-chessboard | count | exact-prob | transfer | percolation-report
    pub command: Option<String>,
    /// INI config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long = "z-min")]
    pub z_min: Option<f64>,
    #[arg(long = "z-max")]
    pub z_max: Option<f64>,
    #[arg(long = "z-points")]
    pub z_points: Option<usize>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long)]
    pub init: Option<String>,
    /// Measured sweeps after burn-in.
    #[arg(long)]
    pub sweeps: Option<u64>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<u64>,
    /// Record every N-th measured sweep.
    #[arg(long)]
    pub every: Option<u64>,
    /// Cluster move every N sweeps (0 disables).
    #[arg(long = "cluster-every")]
    pub cluster_every: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<String>,
    /// Pattern family for `count`.
    #[arg(long)]
    pub family: Option<String>,
    /// Comma-separated plaquette families for `verify-chessboard`.
    #[arg(long)]
    pub classes: Option<String>,
    /// Density level for the jump locator.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long = "strip-width")]
    pub strip_width: Option<u32>,
}

/// Overlay command-line flags on a parsed config.
pub fn merge_cli(mut rc: RunConfig, cli: &Cli) -> Result<RunConfig> {
    if let Some(c) = &cli.command {
        rc.command = CommandKind::from_str(c)?;
    }
    if let Some(v) = &cli.variant {
        rc.variant = variant_from_str(v)?;
    }
    if let Some(q) = cli.q {
        rc.q = Some(q);
    }
    if let Some(a) = cli.alpha {
        rc.alpha = Some(a);
    }
    if let Some(z) = cli.z {
        rc.z = Some(z);
    }
    if let Some(z) = cli.z_min {
        rc.z_min = Some(z);
    }
    if let Some(z) = cli.z_max {
        rc.z_max = Some(z);
    }
    if let Some(n) = cli.z_points {
        rc.z_points = Some(n);
    }
    if let Some(w) = cli.width {
        rc.width = Some(w);
    }
    if let Some(h) = cli.height {
        rc.height = Some(h);
    }
    if let Some(i) = &cli.init {
        rc.init = init_from_str(i)?;
    }
    if let Some(n) = cli.sweeps {
        rc.schedule.measure_sweeps = n;
    }
    if let Some(n) = cli.burn_in {
        rc.schedule.burn_in_sweeps = n;
    }
    if let Some(n) = cli.every {
        rc.schedule.measure_every = n;
    }
    if let Some(n) = cli.cluster_every {
        rc.schedule.cluster_move_every = n;
    }
    if let Some(s) = cli.seed {
        rc.schedule.seed = s;
    }
    if let Some(o) = &cli.out {
        rc.out = Some(o.clone());
    }
    if let Some(f) = &cli.family {
        rc.family = Some(f.parse()?);
    }
    if let Some(cs) = &cli.classes {
        let mut fams = Vec::new();
        for part in cs.split(',') {
            fams.push(class_family_from_str(part.trim())?);
        }
        rc.classes = Some(fams);
    }
    if let Some(l) = cli.level {
        rc.level = l;
    }
    if let Some(w) = cli.strip_width {
        rc.strip_width = Some(w);
    }
    Ok(rc)
}

fn require<T: Copy>(field: Option<T>, what: &str) -> Result<T> {
    field.ok_or_else(|| Error::validation(format!("{what} is required")))
}

fn torus_of(rc: &RunConfig) -> Result<Torus> {
    Torus::new(require(rc.width, "torus width")?, require(rc.height, "torus height")?)
}

fn model_of(rc: &RunConfig, z: f64) -> Result<ModelSpec> {
    match rc.variant {
        Variant::Rotor => {
            if rc.q.is_some() {
                return Err(Error::validation("q given with the rotor variant"));
            }
            ModelSpec::rotor(require(rc.alpha, "alpha")?, z)
        }
        v => {
            if rc.alpha.is_some() {
                return Err(Error::validation("alpha given with a discrete variant"));
            }
            ModelSpec::discrete(v, require(rc.q, "q")?, z)
        }
    }
}

fn sweep_grid(rc: &RunConfig, m: &ModelSpec) -> Result<Vec<f64>> {
    match (rc.z_min, rc.z_max, rc.z_points) {
        (None, None, None) => {
            let (lo, hi) = default_sweep_bounds(m);
            geometric_grid(lo, hi, 25)
        }
        (Some(lo), Some(hi), Some(n)) => geometric_grid(lo, hi, n),
        _ => Err(Error::validation("z_min, z_max, z_points must be given together")),
    }
}

/// Validate a merged config and fill the command-dependent defaults; the
/// result is what the header record echoes.
pub fn resolve(rc: &RunConfig) -> Result<RunConfig> {
    let mut rc = rc.clone();
    rc.schedule.validate()?;
    if !(rc.level > 0.0 && rc.level < 1.0) {
        return Err(Error::validation(format!("level must lie in (0, 1), got {}", rc.level)));
    }
    match rc.command {
        CommandKind::Simulate | CommandKind::PercolationReport => {
            let z = require(rc.z, "z")?;
            model_of(&rc, z)?;
            torus_of(&rc)?;
        }
        CommandKind::VerifyChessboard | CommandKind::ExactProb => {
            let z = require(rc.z, "z")?;
            let m = model_of(&rc, z)?;
            if m.variant() == Variant::Rotor {
                return Err(Error::validation("exact enumeration needs a discrete variant"));
            }
            torus_of(&rc)?;
            if rc.command == CommandKind::VerifyChessboard && rc.classes.is_none() {
                rc.classes = Some(vec![
                    ClassFamily::B0,
                    ClassFamily::B1,
                    ClassFamily::B2,
                    ClassFamily::B3,
                    ClassFamily::GEven,
                    ClassFamily::GOdd,
                    ClassFamily::GOrd,
                ]);
            }
        }
        CommandKind::Count => {
            let family = require(rc.family, "family")?;
            require(rc.q, "q")?;
            if rc.alpha.is_some() {
                return Err(Error::validation("alpha given with a discrete variant"));
            }
            torus_of(&rc)?;
            rc.variant = family.model_variant();
        }
        CommandKind::Sweep => {
            let m = model_of(&rc, rc.z.or(rc.z_min).unwrap_or(1.0))?;
            torus_of(&rc)?;
            let grid = sweep_grid(&rc, &m)?;
            rc.z_min = Some(grid[0]);
            rc.z_max = Some(grid[grid.len() - 1]);
            rc.z_points = Some(grid.len());
        }
        CommandKind::Transfer => {
            require(rc.strip_width, "strip_width")?;
            if rc.z.is_none() && rc.z_min.is_none() {
                return Err(Error::validation("transfer needs z or a z grid"));
            }
            model_of(&rc, rc.z.or(rc.z_min).unwrap_or(1.0))?;
        }
    }
    Ok(rc)
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    record: &'static str,
    #[serde(flatten)]
    data: &'a T,
}

#[derive(Serialize)]
struct Header<'a> {
    version: &'static str,
    generator: &'static str,
    config: &'a RunConfig,
}

/// One output stream: JSONL lines plus an optional CSV summary.
struct Emitter {
    sink: Box<dyn Write>,
    csv: Option<(PathBuf, Vec<Vec<String>>)>,
}

impl Emitter {
    fn new(out: &Option<String>) -> Result<Self> {
        Ok(match out {
            Some(path) => {
                let p = Path::new(path);
                if let Some(dir) = p.parent() {
                    if !dir.as_os_str().is_empty() {
                        fs::create_dir_all(dir)?;
                    }
                }
                Emitter {
                    sink: Box::new(BufWriter::new(fs::File::create(p)?)),
                    csv: Some((p.with_extension("csv"), Vec::new())),
                }
            }
            None => Emitter { sink: Box::new(std::io::stdout()), csv: None },
        })
    }

    fn json<T: Serialize>(&mut self, record: &'static str, data: &T) -> Result<()> {
        let line = serde_json::to_string(&Tagged { record, data })
            .map_err(|e| Error::validation(format!("serialization failed: {e}")))?;
        writeln!(self.sink, "{line}")?;
        Ok(())
    }

    fn csv_row(&mut self, row: Vec<String>) {
        if let Some((_, rows)) = &mut self.csv {
            rows.push(row);
        }
    }

    fn finish(mut self) -> Result<()> {
        self.sink.flush()?;
        if let Some((path, rows)) = self.csv {
            let mut w = csv::Writer::from_path(&path)
                .map_err(|e| Error::validation(format!("cannot write {}: {e}", path.display())))?;
            for row in rows {
                w.write_record(&row)
                    .map_err(|e| Error::validation(format!("csv write failed: {e}")))?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

fn family_classes(fam: ClassFamily, q: u32) -> Vec<PlaquetteClass> {
    match fam {
        ClassFamily::GOrd => (1..=q)
            .map(|a| PlaquetteClass::GOrd(crate::plaquette::ColorTag::Color(a)))
            .collect(),
        ClassFamily::GEven => vec![PlaquetteClass::GEven],
        ClassFamily::GOdd => vec![PlaquetteClass::GOdd],
        ClassFamily::GDis => vec![PlaquetteClass::GDis],
        ClassFamily::B0 => vec![PlaquetteClass::B0],
        ClassFamily::B1 => vec![PlaquetteClass::B1],
        ClassFamily::B2 => vec![PlaquetteClass::B2],
        ClassFamily::B3 => vec![PlaquetteClass::B3],
        ClassFamily::BStag => vec![PlaquetteClass::BStag],
        ClassFamily::BHat => vec![PlaquetteClass::BHat],
        ClassFamily::Inval => vec![PlaquetteClass::Inval],
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    samples: usize,
    mean_density: f64,
    density_se: f64,
    mean_staggered_order: f64,
}

fn simulate_summary(records: &[MeasurementRecord]) -> SimulateSummary {
    let densities: Vec<f64> = records.iter().map(|r| r.density).collect();
    let staggered: Vec<f64> = records.iter().map(|r| r.staggered_order).collect();
    SimulateSummary {
        samples: records.len(),
        mean_density: mean(&densities),
        density_se: batch_means_se(&densities, 16),
        mean_staggered_order: mean(&staggered),
    }
}

fn run_simulate(rc: &RunConfig, em: &mut Emitter) -> Result<()> {
    let m = model_of(rc, require(rc.z, "z")?)?;
    let t = torus_of(rc)?;
    let records = run_chain(&m, t, rc.init, rc.schedule)?;
    for r in &records {
        em.json("measurement", r)?;
    }
    let summary = simulate_summary(&records);
    em.json("summary", &summary)?;
    em.csv_row(
        ["samples", "mean_density", "density_se", "mean_staggered_order"]
            .map(String::from)
            .to_vec(),
    );
    em.csv_row(vec![
        summary.samples.to_string(),
        format!("{:?}", summary.mean_density),
        format!("{:?}", summary.density_se),
        format!("{:?}", summary.mean_staggered_order),
    ]);
    Ok(())
}

#[derive(Serialize)]
struct SweepPointRecord<'a> {
    direction: &'static str,
    #[serde(flatten)]
    point: &'a crate::thermo::SweepPoint,
}

#[derive(Serialize)]
struct JumpRecord {
    level: f64,
    estimate: Option<crate::thermo::JumpEstimate>,
}

fn emit_sweep(em: &mut Emitter, sr: &SweepResult) -> Result<()> {
    let dir = match sr.direction {
        SweepDirection::Up => "up",
        SweepDirection::Down => "down",
    };
    for p in &sr.points {
        em.json("sweep-point", &SweepPointRecord { direction: dir, point: p })?;
        em.csv_row(vec![
            dir.to_string(),
            format!("{:?}", p.z),
            format!("{:?}", p.mean_density),
            format!("{:?}", p.density_se),
            format!("{:?}", p.dominant_family),
            format!("{:?}", p.dominant_fraction),
            format!("{:?}", p.both_wrapping_fraction),
        ]);
    }
    Ok(())
}

fn run_sweep(rc: &RunConfig, em: &mut Emitter) -> Result<()> {
    let m = model_of(rc, rc.z_min.expect("resolved grid"))?;
    let t = torus_of(rc)?;
    let grid = geometric_grid(
        rc.z_min.expect("resolved"),
        rc.z_max.expect("resolved"),
        rc.z_points.expect("resolved"),
    )?;
    let mut up_sched = rc.schedule;
    let mut down_sched = rc.schedule;
    // Independent generator streams for the two branches.
    down_sched.seed = rc.schedule.seed.wrapping_add(1);
    up_sched.seed = rc.schedule.seed;
    let (up, down) = rayon::join(
        || density_sweep(&m, t, &grid, SweepDirection::Up, up_sched),
        || density_sweep(&m, t, &grid, SweepDirection::Down, down_sched),
    );
    let (up, down) = (up?, down?);
    em.csv_row(
        [
            "direction",
            "z",
            "mean_density",
            "density_se",
            "dominant_family",
            "dominant_fraction",
            "both_wrapping_fraction",
        ]
        .map(String::from)
        .to_vec(),
    );
    emit_sweep(em, &up)?;
    emit_sweep(em, &down)?;
    let estimate = locate_jump(&up, &down, rc.level)?;
    em.json("jump", &JumpRecord { level: rc.level, estimate })?;
    Ok(())
}

fn run_verify_chessboard(rc: &RunConfig, em: &mut Emitter) -> Result<()> {
    let m = model_of(rc, require(rc.z, "z")?)?;
    let t = torus_of(rc)?;
    let fams = rc.classes.as_ref().expect("resolved classes");
    em.csv_row(["classes", "lhs", "rhs", "holds"].map(String::from).to_vec());
    for &fam in fams {
        let classes = family_classes(fam, m.q());
        let report = chessboard_check(&m, t, &classes)?;
        em.json("chessboard", &report)?;
        em.csv_row(vec![
            report.classes.clone(),
            format!("{:?}", report.lhs),
            format!("{:?}", report.rhs),
            report.holds.to_string(),
        ]);
    }
    Ok(())
}

fn run_count(rc: &RunConfig, em: &mut Emitter) -> Result<()> {
    let family = require(rc.family, "family")?;
    let t = torus_of(rc)?;
    let q = require(rc.q, "q")?;
    let report = family_count(family, t, q)?;
    em.json("count", &report)?;
    em.csv_row(
        [
            "family",
            "width",
            "height",
            "q",
            "formula",
            "brute_force",
            "formula_is_bound",
            "particle_number",
        ]
        .map(String::from)
        .to_vec(),
    );
    em.csv_row(vec![
        report.family.name().to_string(),
        report.width.to_string(),
        report.height.to_string(),
        report.q.to_string(),
        report.formula_value.to_string(),
        report.brute_force_value.as_ref().map_or(String::new(), |b| b.to_string()),
        report.formula_is_bound.to_string(),
        report.particle_number.map_or(String::new(), |n| n.to_string()),
    ]);
    Ok(())
}

#[derive(Serialize)]
struct ExactProbRecord {
    q: u32,
    z: f64,
    partition_function: f64,
    site_occupation: f64,
    origin_classes: BTreeMap<String, f64>,
}

fn run_exact_prob(rc: &RunConfig, em: &mut Emitter) -> Result<()> {
    let m = model_of(rc, require(rc.z, "z")?)?;
    let t = torus_of(rc)?;
    let scan = cached_scan(m.variant(), t)?;
    let classes = scan.origin_class_distribution(m.q(), m.z())?;
    let origin_classes: BTreeMap<String, f64> =
        classes.iter().map(|(c, p)| (c.label(), *p)).collect();
    let record = ExactProbRecord {
        q: m.q(),
        z: m.z(),
        partition_function: scan.partition_function(m.q(), m.z())?,
        site_occupation: scan.site_occupation_probability(m.q(), m.z())?,
        origin_classes,
    };
    em.json("exact-prob", &record)?;
    em.csv_row(["quantity", "value"].map(String::from).to_vec());
    em.csv_row(vec!["partition_function".into(), format!("{:?}", record.partition_function)]);
    em.csv_row(vec!["site_occupation".into(), format!("{:?}", record.site_occupation)]);
    for (label, p) in &record.origin_classes {
        em.csv_row(vec![format!("class:{label}"), format!("{p:?}")]);
    }
    Ok(())
}

fn run_transfer(rc: &RunConfig, em: &mut Emitter) -> Result<()> {
    let width = require(rc.strip_width, "strip_width")?;
    let zs: Vec<f64> = match (rc.z_min, rc.z_max, rc.z_points) {
        (Some(lo), Some(hi), Some(n)) => geometric_grid(lo, hi, n)?,
        _ => vec![require(rc.z, "z")?],
    };
    let m = model_of(rc, zs[0])?;
    let curve = transfer_pressure(&m, width, &zs)?;
    em.csv_row(["width", "z", "pressure", "density", "entropy"].map(String::from).to_vec());
    for p in &curve.points {
        em.json("transfer-point", p)?;
        em.csv_row(vec![
            curve.width.to_string(),
            format!("{:?}", p.z),
            format!("{:?}", p.pressure),
            format!("{:?}", p.density),
            format!("{:?}", p.entropy),
        ]);
    }
    Ok(())
}

#[derive(Serialize)]
struct PercolationRecord {
    family: ClassFamily,
    samples: usize,
    both: usize,
    x_only: usize,
    y_only: usize,
    none: usize,
    mean_fraction: f64,
}

fn run_percolation_report(rc: &RunConfig, em: &mut Emitter) -> Result<()> {
    let m = model_of(rc, require(rc.z, "z")?)?;
    let t = torus_of(rc)?;
    let records = run_chain(&m, t, rc.init, rc.schedule)?;
    let volume = t.volume() as f64;
    em.csv_row(
        ["family", "samples", "both", "x_only", "y_only", "none", "mean_fraction"]
            .map(String::from)
            .to_vec(),
    );
    for &fam in crate::plaquette::good_families(m.variant()) {
        let (mut both, mut x_only, mut y_only, mut none) = (0usize, 0usize, 0usize, 0usize);
        let mut fraction_sum = 0.0;
        for r in &records {
            match r.wrapping.get(&fam).copied().unwrap_or(WrappingStatus::None) {
                WrappingStatus::Both => both += 1,
                WrappingStatus::XOnly => x_only += 1,
                WrappingStatus::YOnly => y_only += 1,
                WrappingStatus::None => none += 1,
            }
            fraction_sum += r.families.get(&fam).copied().unwrap_or(0) as f64 / volume;
        }
        let rec = PercolationRecord {
            family: fam,
            samples: records.len(),
            both,
            x_only,
            y_only,
            none,
            mean_fraction: fraction_sum / records.len().max(1) as f64,
        };
        em.json("percolation", &rec)?;
        em.csv_row(vec![
            format!("{fam:?}"),
            rec.samples.to_string(),
            rec.both.to_string(),
            rec.x_only.to_string(),
            rec.y_only.to_string(),
            rec.none.to_string(),
            format!("{:?}", rec.mean_fraction),
        ]);
    }
    let summary = simulate_summary(&records);
    em.json("summary", &summary)?;
    Ok(())
}

/// Dispatch a resolved config: header record, command records, summaries.
pub fn execute(rc: &RunConfig) -> Result<()> {
    let rc = resolve(rc)?;
    let mut em = Emitter::new(&rc.out)?;
    em.json("header", &Header { version: ARTIFACT_VERSION, generator: GENERATOR_ID, config: &rc })?;
    match rc.command {
        CommandKind::Simulate => run_simulate(&rc, &mut em)?,
        CommandKind::Sweep => run_sweep(&rc, &mut em)?,
        CommandKind::VerifyChessboard => run_verify_chessboard(&rc, &mut em)?,
        CommandKind::Count => run_count(&rc, &mut em)?,
        CommandKind::ExactProb => run_exact_prob(&rc, &mut em)?,
        CommandKind::Transfer => run_transfer(&rc, &mut em)?,
        CommandKind::PercolationReport => run_percolation_report(&rc, &mut em)?,
    }
    em.finish()
}

#[derive(Serialize)]
struct ErrorRecord {
    kind: &'static str,
    message: String,
    exit_code: i32,
}

/// Full front end: parse flags and config, execute, map errors to exit
/// codes with a machine-readable record on stdout.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        // Downstream consumer closed the stream; not a run failure.
        Err(Error::Io(io)) if io.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            let kind = match &e {
                Error::Validation(_) => "validation",
                Error::Parse(_) => "parse",
                Error::Capacity(_) => "capacity",
                Error::NonConvergence(_) => "non-convergence",
                Error::Io(_) => "io",
            };
            let rec = ErrorRecord { kind, message: e.to_string(), exit_code: e.exit_code() };
            let line = serde_json::to_string(&Tagged { record: "error", data: &rec })
                .unwrap_or_else(|_| format!("{{\"record\":\"error\",\"kind\":\"{kind}\"}}"));
            let _ = writeln!(std::io::stdout(), "{line}");
            e.exit_code()
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut rc = match &cli.config {
        Some(path) => parse_config(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    rc = merge_cli(rc, cli)?;
    execute(&rc)
}

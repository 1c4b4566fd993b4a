//! Contour bounds, activity sweeps, and the density-jump locator.
//!
//! The contour calculator evaluates, per variant, the closed-form bounds
//! on the densities of the bad plaquette classes and combines them into a
//! single smallness parameter `delta`; phase coexistence arguments need
//! `delta` small, and `epsilon = 4 delta (1 - 5 delta)^{-2}` is reported
//! alongside whenever `delta < 1/5` makes it meaningful.
//!
//! The sweep machinery probes hysteresis directly: one chain is dragged
//! up (or down) a geometric activity grid, warm-starting each point from
//! the previous one's final configuration, so that each branch stays in
//! its phase well past the transition. The jump locator compares the two
//! branches through monotone (isotonic) regression and brackets the
//! activity where they cross a density level.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Torus;
use crate::model::{ModelSpec, Variant};
use crate::plaquette::{good_families, ClassFamily, WrappingStatus};
use crate::sampler::{Chain, ChainSchedule, InitialState};
use crate::stats::{batch_means_se, isotonic_nondecreasing, mean};

/// The per-class smallness terms of a variant and their combination.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ContourBounds {
    pub variant: Variant,
    /// Labeled bound terms; `total` is their sum.
    pub terms: Vec<(String, f64)>,
    pub total: f64,
    /// `4 total (1 - 5 total)^{-2}`, reported when `total < 1/5`.
    pub epsilon: Option<f64>,
}

/// Evaluate the contour terms of `m`'s variant at its own parameters.
pub fn contour_bound(m: &ModelSpec) -> Result<ContourBounds> {
    let species = if m.variant() == Variant::Rotor { m.alpha() } else { m.q() as f64 };
    contour_bound_with(m.variant(), species, m.z())
}

/// Evaluate the contour terms from raw parameters: `species` is the color
/// count `q` (any real >= 1, so counts beyond machine integers are
/// representable) or the rotor tolerance `alpha`.
pub fn contour_bound_with(variant: Variant, species: f64, z: f64) -> Result<ContourBounds> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::validation(format!("activity must be positive, got {z}")));
    }
    let terms: Vec<(String, f64)> = match variant {
        Variant::Diamond | Variant::Square | Variant::MolecularHc => {
            let q = species;
            if !(q >= 1.0 && q.is_finite()) {
                return Err(Error::validation(format!("q must be >= 1, got {q}")));
            }
            let zq = z * q;
            if zq < 1.0 {
                return Err(Error::validation(format!(
                    "bounds hold for z*q >= 1, got {zq}"
                )));
            }
            match variant {
                Variant::Diamond => vec![
                    ("B3".into(), q.powf(-1.0 / 56.0)),
                    ("B2".into(), q.powf(-1.0 / 12.0)),
                    ("B1".into(), zq.powf(-0.25)),
                    ("B0".into(), zq.powf(-0.5)),
                ],
                Variant::Square => vec![
                    ("B3".into(), q.powf(-1.0 / 56.0)),
                    ("B2".into(), q.powf(-1.0 / 12.0)),
                    ("BStag".into(), q.powf(-1.0 / 12.0)),
                    ("B1".into(), zq.powf(-0.25)),
                ],
                Variant::MolecularHc => {
                    // Seven window events, each bounded by the seventh
                    // root of the worse of the two base estimates.
                    let base = zq.powf(-0.25).max(q.powf(-1.0 / 28.0));
                    let root = base.powf(1.0 / 7.0);
                    (1..=7).map(|k| (format!("W{k}"), root)).collect()
                }
                Variant::Rotor => unreachable!(),
            }
        }
        Variant::Rotor => {
            let alpha = species;
            if !(alpha > 0.0 && alpha < 0.25) {
                return Err(Error::validation(format!(
                    "alpha must lie in (0, 1/4) turns, got {alpha}"
                )));
            }
            if z < 1.0 {
                return Err(Error::validation(format!("bounds hold for z >= 1, got {z}")));
            }
            vec![
                ("B3".into(), 2f64.powf(0.75) * alpha.powf(1.0 / 56.0)),
                ("B2".into(), 2f64.sqrt() * alpha.powf(1.0 / 12.0)),
                ("B1".into(), z.powf(-0.25)),
                ("B0".into(), z.powf(-0.5)),
            ]
        }
    };
    let total: f64 = terms.iter().map(|(_, v)| v).sum();
    let epsilon = if total < 0.2 {
        let d = 1.0 - 5.0 * total;
        Some(4.0 * total / (d * d))
    } else {
        None
    };
    Ok(ContourBounds { variant, terms, total, epsilon })
}

/// Default activity window for a hysteresis sweep: the variant's expected
/// transition bracket widened by a factor 2 on each side.
pub fn default_sweep_bounds(m: &ModelSpec) -> (f64, f64) {
    match m.variant() {
        Variant::Diamond => {
            let q = m.q() as f64;
            (q / 10.0, 10.0 * q)
        }
        Variant::Square => {
            let c = (m.q() as f64).powf(1.0 / 3.0);
            (c / 6.0, 6.0 * c)
        }
        Variant::MolecularHc => {
            let q = m.q() as f64;
            (q / 36.0, 36.0 * q)
        }
        Variant::Rotor => {
            let s = m.alpha().powi(-2);
            (s / 36.0, 10.0 * s)
        }
    }
}

/// Strictly increasing geometric grid from `z_min` to `z_max` inclusive.
pub fn geometric_grid(z_min: f64, z_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(z_min > 0.0 && z_max > z_min && z_min.is_finite() && z_max.is_finite()) {
        return Err(Error::validation(format!(
            "need 0 < z_min < z_max, got [{z_min}, {z_max}]"
        )));
    }
    if points < 2 {
        return Err(Error::validation("grid needs at least 2 points"));
    }
    let ratio = (z_max / z_min).powf(1.0 / (points - 1) as f64);
    let mut grid: Vec<f64> = (0..points).map(|k| z_min * ratio.powi(k as i32)).collect();
    grid[points - 1] = z_max;
    Ok(grid)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum SweepDirection {
    Up,
    Down,
}

/// Statistics gathered at one grid activity.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub z: f64,
    pub mean_density: f64,
    pub density_se: f64,
    pub samples: u64,
    /// Mean plaquette fraction per class family.
    pub families: BTreeMap<ClassFamily, f64>,
    /// The good family with the largest mean fraction.
    pub dominant_family: ClassFamily,
    pub dominant_fraction: f64,
    /// Fraction of samples in which the dominant family wraps both ways.
    pub both_wrapping_fraction: f64,
}

/// One hysteresis branch: per-activity statistics in ascending z order.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub direction: SweepDirection,
    pub points: Vec<SweepPoint>,
}

fn sweep_initial_state(variant: Variant, direction: SweepDirection) -> InitialState {
    match (direction, variant) {
        (SweepDirection::Up, Variant::Diamond | Variant::Rotor) => InitialState::CheckerboardEven,
        (SweepDirection::Up, Variant::Square | Variant::MolecularHc) => InitialState::Empty,
        (SweepDirection::Down, Variant::MolecularHc) => InitialState::CheckerboardEven,
        (SweepDirection::Down, _) => InitialState::Monochromatic(1),
    }
}

/// Drag one chain along `grid` in the given direction, warm-starting each
/// activity from the previous one's final configuration. Points are
/// reported in ascending z order regardless of direction.
pub fn density_sweep(
    m: &ModelSpec,
    t: Torus,
    grid: &[f64],
    direction: SweepDirection,
    sched: ChainSchedule,
) -> Result<SweepResult> {
    sched.validate()?;
    if grid.is_empty() {
        return Err(Error::validation("sweep grid is empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] <= 0.0 {
        return Err(Error::validation("sweep grid must be positive and strictly increasing"));
    }
    let order: Vec<usize> = match direction {
        SweepDirection::Up => (0..grid.len()).collect(),
        SweepDirection::Down => (0..grid.len()).rev().collect(),
    };
    let init = sweep_initial_state(m.variant(), direction);
    let start = m.with_z(grid[order[0]])?;
    let mut chain = Chain::new(&start, t, init, sched)?;
    let volume = t.volume() as f64;
    let good = good_families(m.variant());

    let mut points: Vec<Option<SweepPoint>> = vec![None; grid.len()];
    for &gi in &order {
        chain.set_activity(grid[gi])?;
        for _ in 0..sched.burn_in_sweeps {
            chain.advance();
        }
        let mut densities = Vec::new();
        let mut family_sums: BTreeMap<ClassFamily, f64> = BTreeMap::new();
        let mut wrap_both: BTreeMap<ClassFamily, u64> = BTreeMap::new();
        for k in 1..=sched.measure_sweeps {
            chain.advance();
            if k % sched.measure_every != 0 {
                continue;
            }
            let rec = chain.measure();
            densities.push(rec.density);
            for (fam, count) in &rec.families {
                *family_sums.entry(*fam).or_insert(0.0) += *count as f64 / volume;
            }
            for (fam, status) in &rec.wrapping {
                if *status == WrappingStatus::Both {
                    *wrap_both.entry(*fam).or_insert(0) += 1;
                }
            }
        }
        let samples = densities.len() as u64;
        if samples == 0 {
            return Err(Error::validation(
                "schedule yields no samples (measure_sweeps < measure_every)",
            ));
        }
        let families: BTreeMap<ClassFamily, f64> =
            family_sums.iter().map(|(f, s)| (*f, s / samples as f64)).collect();
        let (dominant_family, dominant_fraction) = good
            .iter()
            .map(|f| (*f, families.get(f).copied().unwrap_or(0.0)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("every variant has a good family");
        points[gi] = Some(SweepPoint {
            z: grid[gi],
            mean_density: mean(&densities),
            density_se: batch_means_se(&densities, 16),
            samples,
            families,
            dominant_family,
            dominant_fraction,
            both_wrapping_fraction: wrap_both.get(&dominant_family).copied().unwrap_or(0) as f64
                / samples as f64,
        });
    }
    Ok(SweepResult {
        direction,
        points: points.into_iter().map(|p| p.expect("every grid point visited")).collect(),
    })
}

/// A bracketed density jump: the level is crossed by the down branch at
/// `z_lo` and by the up branch at `z_hi`.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct JumpEstimate {
    pub z_lo: f64,
    pub z_hi: f64,
    /// Geometric midpoint of the bracket.
    pub z_star: f64,
    /// Largest density separation between the branches inside the bracket.
    pub gap: f64,
}

/// Locate where the two hysteresis branches cross `level`.
///
/// Both branches are first made nondecreasing in z by isotonic regression
/// (finite chains are noisy; the underlying densities are monotone). The
/// bracket runs from the first grid point where the down branch reaches
/// the level to the first where the up branch does. Returns `None` when
/// the branches are statistically indistinguishable inside the bracket
/// (gap at most twice the joint standard error) or cross in the wrong
/// order; returns an error when the level is not bracketed by the grid.
pub fn locate_jump(
    up: &SweepResult,
    down: &SweepResult,
    level: f64,
) -> Result<Option<JumpEstimate>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::validation(format!("level must lie in (0, 1), got {level}")));
    }
    if up.direction != SweepDirection::Up || down.direction != SweepDirection::Down {
        return Err(Error::validation("locate_jump takes (up, down) branches in that order"));
    }
    if up.points.len() != down.points.len()
        || up
            .points
            .iter()
            .zip(&down.points)
            .any(|(a, b)| (a.z - b.z).abs() > 1e-12 * a.z.max(1.0))
    {
        return Err(Error::validation("hysteresis branches must share one grid"));
    }
    if up.points.is_empty() {
        return Err(Error::validation("empty sweep"));
    }
    let ones = vec![1.0; up.points.len()];
    let d_up: Vec<f64> = isotonic_nondecreasing(
        &up.points.iter().map(|p| p.mean_density).collect::<Vec<_>>(),
        &ones,
    );
    let d_down: Vec<f64> = isotonic_nondecreasing(
        &down.points.iter().map(|p| p.mean_density).collect::<Vec<_>>(),
        &ones,
    );
    let first_at = |ys: &[f64]| ys.iter().position(|&y| y >= level);
    let i_lo = first_at(&d_down)
        .ok_or_else(|| Error::validation("down branch never reaches the level"))?;
    let i_hi =
        first_at(&d_up).ok_or_else(|| Error::validation("up branch never reaches the level"))?;
    if i_lo == 0 && d_down[0] >= level && d_up[0] >= level {
        return Err(Error::validation("both branches start above the level; grid too high"));
    }
    if i_hi < i_lo {
        // The up branch reaches the level before the down branch does:
        // no forward hysteresis to report.
        return Ok(None);
    }
    let mut gap = f64::NEG_INFINITY;
    let mut joint_se = 0.0;
    for i in i_lo..=i_hi {
        let g = d_down[i] - d_up[i];
        if g > gap {
            gap = g;
            let su = up.points[i].density_se;
            let sd = down.points[i].density_se;
            joint_se = (su * su + sd * sd).sqrt();
        }
    }
    if gap <= 2.0 * joint_se {
        return Ok(None);
    }
    let (z_lo, z_hi) = (down.points[i_lo].z, up.points[i_hi].z);
    Ok(Some(JumpEstimate { z_lo, z_hi, z_star: (z_lo * z_hi).sqrt(), gap }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Torus;

    fn sched(seed: u64) -> ChainSchedule {
        ChainSchedule {
            burn_in_sweeps: 200,
            measure_sweeps: 1000,
            measure_every: 1,
            cluster_move_every: 0,
            seed,
        }
    }

    #[test]
    fn diamond_check_value() {
        let q = 2f64.powi(56);
        let b = contour_bound_with(Variant::Diamond, q, 1.0).unwrap();
        assert_eq!(b.terms.len(), 4);
        assert!((b.terms[0].1 - 0.5).abs() < 1e-12);
        assert!((b.total - 0.5394).abs() < 1e-3, "total {}", b.total);
        // Far above the epsilon validity threshold.
        assert_eq!(b.epsilon, None);
    }

    #[test]
    fn totals_strictly_decreasing_in_scale() {
        let scales = [1e4, 1e5, 1e6, 1e7, 1e8];
        for variant in [Variant::Diamond, Variant::Square, Variant::MolecularHc] {
            let totals: Vec<f64> = scales
                .iter()
                .map(|&q| contour_bound_with(variant, q, 1.0).unwrap().total)
                .collect();
            assert!(
                totals.windows(2).all(|w| w[1] < w[0]),
                "{variant:?}: {totals:?}"
            );
        }
        // Rotor analogue: alpha = 1/q, z = q.
        let totals: Vec<f64> = scales
            .iter()
            .map(|&q| contour_bound_with(Variant::Rotor, 1.0 / q, q).unwrap().total)
            .collect();
        assert!(totals.windows(2).all(|w| w[1] < w[0]), "rotor: {totals:?}");
    }

    #[test]
    fn epsilon_reported_once_delta_is_small() {
        let b = contour_bound_with(Variant::Diamond, 1e45, 1.0).unwrap();
        assert!(b.total < 0.2);
        let eps = b.epsilon.unwrap();
        let expect = 4.0 * b.total / (1.0 - 5.0 * b.total).powi(2);
        assert!((eps - expect).abs() < 1e-15);
    }

    #[test]
    fn hc_combination_and_guards() {
        let b = contour_bound_with(Variant::MolecularHc, 1e8, 1.0).unwrap();
        assert_eq!(b.terms.len(), 7);
        let base = (1e8f64).powf(-0.25).max((1e8f64).powf(-1.0 / 28.0));
        assert!((b.total - 7.0 * base.powf(1.0 / 7.0)).abs() < 1e-12);

        // zq < 1 rejected for the discrete variants; z < 1 for the rotor.
        assert!(contour_bound_with(Variant::Diamond, 4.0, 0.1).is_err());
        assert!(contour_bound_with(Variant::Diamond, 100.0, 0.1).is_ok());
        assert!(contour_bound_with(Variant::Rotor, 0.1, 0.5).is_err());
        assert!(contour_bound_with(Variant::Rotor, 0.3, 2.0).is_err());
    }

    #[test]
    fn rotor_total_tends_to_activity_terms() {
        // The 56th root decays very slowly; alpha must be tiny before the
        // tolerance-driven terms stop dominating.
        let z = 4.0;
        let b = contour_bound_with(Variant::Rotor, 1e-200, z).unwrap();
        let limit = z.powf(-0.25) + z.powf(-0.5);
        assert!((b.total - limit).abs() < 1e-3, "total {}", b.total);
    }

    #[test]
    fn model_entry_point_matches_raw() {
        let m = ModelSpec::square(64, 2.0).unwrap();
        let a = contour_bound(&m).unwrap();
        let b = contour_bound_with(Variant::Square, 64.0, 2.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn geometric_grid_shape() {
        let g = geometric_grid(0.5, 8.0, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[4], 8.0);
        for w in g.windows(2) {
            assert!((w[1] / w[0] - 2.0).abs() < 1e-12);
        }
        assert!(geometric_grid(2.0, 1.0, 5).is_err());
        assert!(geometric_grid(1.0, 2.0, 1).is_err());
    }

    #[test]
    fn free_gas_sweep_matches_exact_density() {
        let m = ModelSpec::diamond(1, 1.0).unwrap();
        let t = Torus::new(4, 4).unwrap();
        let grid = geometric_grid(0.5, 2.0, 5).unwrap();
        for direction in [SweepDirection::Up, SweepDirection::Down] {
            let sr = density_sweep(&m, t, &grid, direction, sched(31)).unwrap();
            assert_eq!(sr.points.len(), grid.len());
            for (p, &z) in sr.points.iter().zip(&grid) {
                assert_eq!(p.z, z);
                let exact = z / (1.0 + z);
                let tol = 3.0 * p.density_se + 1e-9;
                assert!(
                    (p.mean_density - exact).abs() <= tol,
                    "{direction:?} z={z}: {} vs {exact} (se {})",
                    p.mean_density,
                    p.density_se
                );
                let total: f64 = p.families.values().sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn hard_core_density_stays_below_half() {
        let m = ModelSpec::molecular_hc(2, 1.0).unwrap();
        let t = Torus::new(4, 4).unwrap();
        let grid = geometric_grid(0.5, 50.0, 4).unwrap();
        let sr = density_sweep(&m, t, &grid, SweepDirection::Up, sched(17)).unwrap();
        for p in &sr.points {
            assert!(p.mean_density <= 0.5 + 1e-12, "z={}: {}", p.z, p.mean_density);
        }
    }

    fn synthetic(direction: SweepDirection, grid: &[f64], dens: &[f64], se: f64) -> SweepResult {
        SweepResult {
            direction,
            points: grid
                .iter()
                .zip(dens)
                .map(|(&z, &d)| SweepPoint {
                    z,
                    mean_density: d,
                    density_se: se,
                    samples: 100,
                    families: BTreeMap::new(),
                    dominant_family: ClassFamily::GOrd,
                    dominant_fraction: 0.0,
                    both_wrapping_fraction: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn step_fixture_brackets_the_jump() {
        let grid = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let up = synthetic(SweepDirection::Up, &grid, &[0.1, 0.1, 0.1, 0.1, 0.9, 0.9], 0.001);
        let down = synthetic(SweepDirection::Down, &grid, &[0.1, 0.1, 0.9, 0.9, 0.9, 0.9], 0.001);
        let j = locate_jump(&up, &down, 2.0 / 3.0).unwrap().unwrap();
        assert_eq!(j.z_lo, 5.0);
        assert_eq!(j.z_hi, 7.0);
        assert!((j.z_star - 35f64.sqrt()).abs() < 1e-12);
        assert!((j.gap - 0.8).abs() < 1e-12);
    }

    #[test]
    fn coinciding_branches_yield_none() {
        let grid = geometric_grid(0.5, 8.0, 9).unwrap();
        let dens: Vec<f64> = grid.iter().map(|z| z / (1.0 + z)).collect();
        let up = synthetic(SweepDirection::Up, &grid, &dens, 0.005);
        let down = synthetic(SweepDirection::Down, &grid, &dens, 0.005);
        assert_eq!(locate_jump(&up, &down, 2.0 / 3.0).unwrap(), None);
    }

    #[test]
    fn noisy_gap_yields_none() {
        let grid = [1.0, 2.0, 4.0, 8.0];
        let up = synthetic(SweepDirection::Up, &grid, &[0.3, 0.4, 0.6, 0.8], 0.1);
        let down = synthetic(SweepDirection::Down, &grid, &[0.35, 0.5, 0.7, 0.8], 0.1);
        assert_eq!(locate_jump(&up, &down, 2.0 / 3.0).unwrap(), None);
    }

    #[test]
    fn jump_validation_errors() {
        let grid = [1.0, 2.0, 4.0];
        let up = synthetic(SweepDirection::Up, &grid, &[0.1, 0.2, 0.3], 0.01);
        let down = synthetic(SweepDirection::Down, &grid, &[0.1, 0.2, 0.3], 0.01);
        // Level never reached.
        assert!(locate_jump(&up, &down, 0.9).is_err());
        // Branch order enforced.
        assert!(locate_jump(&down, &up, 0.5).is_err());
        // Grid mismatch.
        let other = synthetic(SweepDirection::Down, &[1.0, 2.0, 5.0], &[0.1, 0.2, 0.9], 0.01);
        assert!(locate_jump(&up, &other, 0.25).is_err());
        // Invalid level.
        assert!(locate_jump(&up, &down, 1.5).is_err());
    }

    #[test]
    fn isotonic_smoothing_tolerates_noise() {
        let grid = [1.0, 2.0, 3.0, 5.0, 7.0, 9.0];
        // The up branch dips after its jump; isotonic regression pools it.
        let up = synthetic(SweepDirection::Up, &grid, &[0.10, 0.12, 0.11, 0.13, 0.85, 0.83], 0.01);
        let down =
            synthetic(SweepDirection::Down, &grid, &[0.11, 0.12, 0.84, 0.86, 0.85, 0.88], 0.01);
        let j = locate_jump(&up, &down, 0.5).unwrap().unwrap();
        assert_eq!(j.z_lo, 3.0);
        assert_eq!(j.z_hi, 7.0);
    }
}

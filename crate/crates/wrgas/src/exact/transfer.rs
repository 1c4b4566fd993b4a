//! Column transfer matrices for W x infinity tubes (periodic in the
//! width) and exact W x H torus partition functions at integer activity.

use num_bigint::BigUint;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Variant};

/// Widest supported tube.
pub const MAX_STRIP_WIDTH: u32 = 6;
/// Largest `(q+1)^W` column-state space for the eigenvalue path.
pub const MAX_COLUMN_STATES: usize = 2048;
/// Largest column-state space for the exact integer trace.
pub const MAX_EXACT_STATES: usize = 256;

const EIGEN_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 100_000;

/// Pressure data at one activity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PressurePoint {
    pub z: f64,
    /// `ln(lambda_max) / W`, the per-site pressure of the tube.
    pub pressure: f64,
    /// `d pressure / d ln z` by central difference.
    pub density: f64,
    /// `pressure - density * ln z`.
    pub entropy: f64,
}

/// Pressure curve of one tube width.
#[derive(Debug, Clone, Serialize)]
pub struct PressureCurve {
    pub width: u32,
    pub points: Vec<PressurePoint>,
}

struct ColumnSpace {
    width: usize,
    states: Vec<Vec<u32>>,
    inter_diag: bool,
    variant: Variant,
}

fn bond_ok(variant: Variant, a: u32, b: u32, diag: bool) -> bool {
    if a == 0 || b == 0 {
        return true;
    }
    match (variant, diag) {
        (Variant::MolecularHc, false) => false,
        _ => a == b,
    }
}

impl ColumnSpace {
    fn new(m: &ModelSpec, width: u32, limit: usize) -> Result<Self> {
        let variant = m.variant();
        if variant == Variant::Rotor {
            return Err(Error::validation(
                "transfer matrices require a discrete variant",
            ));
        }
        let q = m.q();
        if !(2..=MAX_STRIP_WIDTH).contains(&width) {
            return Err(Error::capacity(format!(
                "strip width {width} outside 2..={MAX_STRIP_WIDTH}"
            )));
        }
        let count = ((q + 1) as u64).checked_pow(width).unwrap_or(u64::MAX);
        if count > limit as u64 {
            return Err(Error::capacity(format!(
                "(q+1)^W = {count} column states; limit is {limit}"
            )));
        }
        let w = width as usize;
        let mut states = Vec::with_capacity(count as usize);
        for code in 0..count {
            let mut s = Vec::with_capacity(w);
            let mut rest = code;
            for _ in 0..w {
                s.push((rest % (q + 1) as u64) as u32);
                rest /= (q + 1) as u64;
            }
            states.push(s);
        }
        Ok(ColumnSpace {
            width: w,
            states,
            inter_diag: matches!(variant, Variant::Square | Variant::MolecularHc),
            variant,
        })
    }

    /// Sites on the vertical cycle of one column satisfy all bonds.
    fn intra_ok(&self, s: &[u32]) -> bool {
        for k in 0..self.width {
            let j = (k + 1) % self.width;
            if j == k {
                continue;
            }
            if !bond_ok(self.variant, s[k], s[j], false) {
                return false;
            }
        }
        true
    }

    /// Bonds between adjacent columns (horizontal, plus folded diagonals).
    fn inter_ok(&self, s: &[u32], t: &[u32]) -> bool {
        for k in 0..self.width {
            if !bond_ok(self.variant, s[k], t[k], false) {
                return false;
            }
            if self.inter_diag {
                let up = (k + 1) % self.width;
                let dn = (k + self.width - 1) % self.width;
                if !bond_ok(self.variant, s[k], t[up], true)
                    || !bond_ok(self.variant, s[k], t[dn], true)
                {
                    return false;
                }
            }
        }
        true
    }

    fn particles(&self, s: &[u32]) -> usize {
        s.iter().filter(|&&c| c != 0).count()
    }
}

fn dominant_eigenvalue(t: &[f64], n: usize) -> Result<f64> {
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut prev = f64::NAN;
    for _ in 0..MAX_ITERS {
        for (i, wi) in w.iter_mut().enumerate() {
            let row = &t[i * n..(i + 1) * n];
            *wi = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::NonConvergence(
                "transfer matrix annihilated the start vector".into(),
            ));
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (lambda - prev).abs() <= EIGEN_TOL * lambda.abs().max(1.0) {
            return Ok(lambda);
        }
        prev = lambda;
    }
    Err(Error::NonConvergence(format!(
        "eigenvalue drift above tolerance after {MAX_ITERS} iterations"
    )))
}

fn tube_pressure(space: &ColumnSpace, z: f64) -> Result<f64> {
    let n = space.states.len();
    let weights: Vec<f64> = space
        .states
        .iter()
        .map(|s| {
            if space.intra_ok(s) {
                z.powi(space.particles(s) as i32)
            } else {
                0.0
            }
        })
        .collect();
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        if weights[i] == 0.0 {
            continue;
        }
        for j in 0..=i {
            if weights[j] == 0.0 {
                continue;
            }
            if space.inter_ok(&space.states[i], &space.states[j]) {
                let val = (weights[i] * weights[j]).sqrt();
                t[i * n + j] = val;
                t[j * n + i] = val;
            }
        }
    }
    let lambda = dominant_eigenvalue(&t, n)?;
    Ok(lambda.ln() / space.width as f64)
}

/// Pressure, density, and entropy of the `width x infinity` tube at each
/// activity. Density is the log-derivative of pressure by central
/// difference with `h = 1e-4`.
pub fn transfer_pressure(m: &ModelSpec, width: u32, zs: &[f64]) -> Result<PressureCurve> {
    let space = ColumnSpace::new(m, width, MAX_COLUMN_STATES)?;
    let h: f64 = 1e-4;
    let mut points = Vec::with_capacity(zs.len());
    for &z in zs {
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::validation(format!("activity {z} must be positive")));
        }
        let pressure = tube_pressure(&space, z)?;
        let up = tube_pressure(&space, z * h.exp())?;
        let dn = tube_pressure(&space, z * (-h).exp())?;
        let density = (up - dn) / (2.0 * h);
        points.push(PressurePoint {
            z,
            pressure,
            density,
            entropy: pressure - density * z.ln(),
        });
    }
    Ok(PressureCurve { width, points })
}

/// Exact `W x H` torus partition function at integer activity, as
/// `trace((D M)^H)` over column states.
pub fn exact_strip_partition(m: &ModelSpec, width: u32, length: u32) -> Result<BigUint> {
    let z = m.z();
    if z.fract() != 0.0 || !(1.0..=4294967296.0).contains(&z) {
        return Err(Error::validation(format!(
            "exact trace needs an integer activity in [1, 2^32], got {z}"
        )));
    }
    if length == 0 {
        return Err(Error::validation("length must be positive"));
    }
    let space = ColumnSpace::new(m, width, MAX_EXACT_STATES)?;
    let n = space.states.len();
    let zb = BigUint::from(z as u64);
    let mut b = vec![BigUint::zero(); n * n];
    for i in 0..n {
        if !space.intra_ok(&space.states[i]) {
            continue;
        }
        let w = zb.pow(space.particles(&space.states[i]) as u32);
        for j in 0..n {
            if space.intra_ok(&space.states[j])
                && space.inter_ok(&space.states[i], &space.states[j])
            {
                b[i * n + j] = w.clone();
            }
        }
    }
    let mut acc: Option<Vec<BigUint>> = None;
    let mut sq = b;
    let mut e = length;
    while e > 0 {
        if e & 1 == 1 {
            acc = Some(match acc {
                None => sq.clone(),
                Some(a) => mat_mul(&a, &sq, n),
            });
        }
        e >>= 1;
        if e > 0 {
            sq = mat_mul(&sq, &sq, n);
        }
    }
    let acc = acc.expect("length >= 1");
    let mut trace = BigUint::zero();
    for i in 0..n {
        trace += &acc[i * n + i];
    }
    Ok(trace)
}

fn mat_mul(a: &[BigUint], b: &[BigUint], n: usize) -> Vec<BigUint> {
    let mut out = vec![BigUint::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = &a[i * n + k];
            if aik.is_zero() {
                continue;
            }
            for j in 0..n {
                let bkj = &b[k * n + j];
                if !bkj.is_zero() {
                    out[i * n + j] += aik * bkj;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use num_traits::ToPrimitive;

    use super::*;
    use crate::exact::scan::OccupationScan;
    use crate::lattice::Torus;

    #[test]
    fn single_color_pressure_is_closed_form() {
        // With one color no constraint binds: lambda = (1+z)^W exactly.
        for variant in [Variant::Diamond, Variant::Square] {
            for width in [2u32, 3, 4] {
                for z in [0.5, 1.0, 2.0] {
                    let m = ModelSpec::discrete(variant, 1, z).unwrap();
                    let curve = transfer_pressure(&m, width, &[z]).unwrap();
                    let p = curve.points[0].pressure;
                    assert!(
                        (p - (1.0 + z).ln()).abs() < 1e-12,
                        "{variant:?} W={width} z={z}: {p}"
                    );
                }
            }
        }
    }

    #[test]
    fn exact_trace_matches_occupation_scan() {
        for (variant, w, h) in [
            (Variant::Diamond, 2u32, 4u32),
            (Variant::Diamond, 2, 8),
            (Variant::Diamond, 4, 4),
            (Variant::MolecularHc, 2, 4),
            (Variant::Square, 2, 4),
        ] {
            let m = ModelSpec::discrete(variant, 2, 1.0).unwrap();
            let trace = exact_strip_partition(&m, w, h).unwrap();
            let scan = OccupationScan::new(variant, Torus::new(w, h).unwrap()).unwrap();
            let z_scan = scan.partition_function(2, 1.0).unwrap();
            let z_trace = trace.to_f64().unwrap();
            assert!(
                (z_trace - z_scan).abs() < 1e-6 * z_scan,
                "{variant:?} {w}x{h}: trace {z_trace} vs scan {z_scan}"
            );
        }
    }

    #[test]
    fn density_and_entropy_are_sane() {
        let m = ModelSpec::diamond(2, 1.0).unwrap();
        let curve = transfer_pressure(&m, 2, &[0.5, 1.0, 2.0]).unwrap();
        for p in &curve.points {
            assert!(p.density > 0.0 && p.density < 1.0, "{p:?}");
            assert!(p.entropy.is_finite());
            assert!(p.pressure > 0.0);
        }
        // Density grows with activity.
        assert!(curve.points[1].density > curve.points[0].density);
        assert!(curve.points[2].density > curve.points[1].density);
    }

    #[test]
    fn capacity_and_validation_guards() {
        let m = ModelSpec::diamond(64, 1.0).unwrap();
        assert!(transfer_pressure(&m, 3, &[1.0]).is_err());
        let m = ModelSpec::diamond(2, 1.0).unwrap();
        assert!(transfer_pressure(&m, 1, &[1.0]).is_err());
        assert!(transfer_pressure(&m, 7, &[1.0]).is_err());
        let m = ModelSpec::rotor(0.1, 1.0).unwrap();
        assert!(transfer_pressure(&m, 2, &[1.0]).is_err());
        let m = ModelSpec::diamond(2, 0.5).unwrap();
        assert!(exact_strip_partition(&m, 2, 4).is_err());
    }

    #[test]
    fn hc_tube_forbids_axial_pairs() {
        // At huge z the HC tube still caps density at 1/2 (checkerboard).
        let m = ModelSpec::molecular_hc(2, 400.0).unwrap();
        let curve = transfer_pressure(&m, 4, &[400.0]).unwrap();
        assert!(curve.points[0].density < 0.55);
    }
}

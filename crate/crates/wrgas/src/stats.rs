//! Small numerical utilities shared by the exact and Monte Carlo paths:
//! compensated summation, batch-means errors, a Kolmogorov–Smirnov
//! uniformity test, and isotonic regression.

/// Kahan–Babuška compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut s = KahanSum::new();
    for &x in xs {
        s.add(x);
    }
    s.value() / xs.len() as f64
}

/// Standard error of the mean of a correlated series via batch means:
/// the series is cut into `batches` equal blocks and the block means are
/// treated as independent. Falls back to the naive iid estimate when the
/// series is too short to form two blocks of at least two points.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let k = batches.clamp(2, n / 2).min(n);
    let m = n / k;
    if m < 2 {
        // iid fallback
        let mu = mean(xs);
        let var: f64 = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (n - 1) as f64;
        return (var / n as f64).sqrt();
    }
    let means: Vec<f64> = (0..k).map(|b| mean(&xs[b * m..(b + 1) * m])).collect();
    let mu = mean(&means);
    let var: f64 = means.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

/// Kolmogorov–Smirnov test of `xs` against the uniform law on [0,1):
/// returns (D, p). The p-value uses the Stephens small-sample correction
/// `lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * D` with the asymptotic
/// series `Q(lambda) = 2 * sum_k (-1)^(k-1) exp(-2 k^2 lambda^2)`.
pub fn ks_uniform(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n > 0, "KS test needs at least one sample");
    let mut s: Vec<f64> = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("orientations are finite"));
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        debug_assert!((0.0..=1.0).contains(&x));
        d = d.max((i + 1) as f64 / nf - x).max(x - i as f64 / nf);
    }
    let lambda = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    let mut q = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        q += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (d, (2.0 * q).clamp(0.0, 1.0))
}

/// Weighted pool-adjacent-violators: the nondecreasing sequence closest to
/// `ys` in the `ws`-weighted least-squares sense.
pub fn isotonic_nondecreasing(ys: &[f64], ws: &[f64]) -> Vec<f64> {
    assert_eq!(ys.len(), ws.len());
    // Blocks of (mean, weight, length), pooled while out of order.
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(ys.len());
    for (&y, &w) in ys.iter().zip(ws) {
        debug_assert!(w > 0.0);
        blocks.push((y, w, 1));
        while blocks.len() >= 2 {
            let (y2, w2, n2) = blocks[blocks.len() - 1];
            let (y1, w1, n1) = blocks[blocks.len() - 2];
            if y1 <= y2 {
                break;
            }
            blocks.pop();
            blocks.pop();
            let w = w1 + w2;
            blocks.push(((y1 * w1 + y2 * w2) / w, w, n1 + n2));
        }
    }
    let mut out = Vec::with_capacity(ys.len());
    for (y, _, n) in blocks {
        out.extend(std::iter::repeat(y).take(n));
    }
    out
}

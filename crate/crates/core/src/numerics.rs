//! Special functions, quadrature and streaming statistics.

use crate::{Error, Result};
use std::f64::consts::PI;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

// Arguments above this use the asymptotic expansion of the scaled Bessel
// functions; below it the power series is exact to machine precision.
const BESSEL_SERIES_LIMIT: f64 = 20.0;

/// Exponentially scaled modified Bessel function `e^{-t} I_0(t)` for `t >= 0`.
pub fn bessel_i0e(t: f64) -> f64 {
    scaled_bessel(0, t)
}

/// Exponentially scaled modified Bessel function `e^{-t} I_1(t)` for `t >= 0`.
pub fn bessel_i1e(t: f64) -> f64 {
    scaled_bessel(1, t)
}

fn scaled_bessel(order: u32, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t <= BESSEL_SERIES_LIMIT {
        let half = t / 2.0;
        let q = half * half;
        // first term (t/2)^order / order!
        let mut term = if order == 0 { 1.0 } else { half };
        let mut sum = term;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= q / (k * (k + order as f64));
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        sum * (-t).exp()
    } else {
        let mu = 4.0 * (order as f64).powi(2);
        let mut term: f64 = 1.0;
        let mut sum: f64 = 1.0;
        let mut k = 0.0;
        loop {
            let odd = 2.0 * k + 1.0;
            let next = -term * (mu - odd * odd) / ((k + 1.0) * 8.0 * t);
            if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (2.0 * PI * t).sqrt()
    }
}

/// Laguerre function of order one half, `L_{1/2}(x)`, for `x <= 0`.
///
/// Evaluated through the Bessel closed form
/// `e^{x/2} [(1 - x) I_0(-x/2) - x I_1(-x/2)]`, written in terms of the
/// exponentially scaled Bessel functions so that large negative arguments do
/// not overflow.
pub fn laguerre_half(x: f64) -> Result<f64> {
    if !(x <= 0.0) {
        return Err(Error::domain(format!(
            "laguerre_half is defined here only for x <= 0, got {x}"
        )));
    }
    let t = -x / 2.0;
    Ok((1.0 + 2.0 * t) * bessel_i0e(t) + 2.0 * t * bessel_i1e(t))
}

/// Mean of `|z|` for a circularly symmetric complex Gaussian `z` whose mean has
/// magnitude `los_magnitude` and whose variance is `variance`.
pub fn mean_abs_noncentral(los_magnitude: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::domain(format!(
            "variance must be positive, got {variance}"
        )));
    }
    if !(los_magnitude >= 0.0) {
        return Err(Error::domain(format!(
            "LoS magnitude must be non-negative, got {los_magnitude}"
        )));
    }
    let l = laguerre_half(-los_magnitude * los_magnitude / variance)?;
    Ok((PI * variance / 4.0).sqrt() * l)
}

/// Eight-point Gauss–Legendre nodes and weights on `[-1, 1]` (positive half).
const GL_NODES: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Default number of panels used for the SER integral.
pub const DEFAULT_PANELS: usize = 64;

/// Composite eight-point Gauss–Legendre quadrature of `f` over
/// `[lower, upper]` split into `panels` equal panels.
pub fn integrate<F>(f: F, lower: f64, upper: f64, panels: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if panels < 1 {
        return Err(Error::domain("quadrature needs at least one panel"));
    }
    if !(lower <= upper) {
        return Err(Error::domain(format!(
            "reversed integration bounds [{lower}, {upper}]"
        )));
    }
    let width = (upper - lower) / panels as f64;
    let half = width / 2.0;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = lower + (p as f64 + 0.5) * width;
        let mut panel = 0.0;
        for &(x, w) in &GL_NODES {
            panel += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += panel * half;
    }
    Ok(total)
}

/// Streaming mean/variance accumulator (Welford), mergeable for parallel
/// reductions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StatAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl StatAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two accumulators as if all samples had been pushed into one.
    pub fn merge(&mut self, other: &StatAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        self.mean += delta * n_b / n;
        self.m2 += other.m2 + delta * delta * n_a * n_b / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Unbiased sample variance; `None` with fewer than two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2 / (self.count - 1) as f64)
    }

    /// Standard error of the mean (zero with fewer than two samples).
    pub fn std_error(&self) -> f64 {
        self.variance()
            .map(|v| (v / self.count as f64).sqrt())
            .unwrap_or(0.0)
    }

    /// Normal-approximation 95% confidence interval of the mean.
    pub fn ci95(&self) -> (f64, f64) {
        let h = Z95 * self.std_error();
        (self.mean - h, self.mean + h)
    }
}

impl FromIterator<f64> for StatAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = StatAccumulator::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Wilson score 95% interval for a binomial proportion.
pub fn wilson_ci95(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

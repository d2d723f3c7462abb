//! Reflection-based PSK for unscheduled RIS users.
//!
//! While the BS serves a direct user, an otherwise idle RIS rotates the
//! reflected signal by one of `2^{M_o}` small angles. Its user recovers the
//! angle by comparing the received samples against the known host symbols.

use crate::beamforming::{reflection_amplitude, wrap_phase, LinkBudget, ReflectionMatrix};
use crate::numerics::{integrate, wilson_ci95, DEFAULT_PANELS};
use crate::rng::{complex_normal, Substreams};
use crate::{par_map_range, Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::Deserialize;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Modulation of the direct user whose signal the RIS piggybacks on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Host {
    Bpsk,
    Qpsk,
    /// Square QAM with `order` points (16, 64, 256, ...).
    Qam { order: u32 },
}

impl FromStr for Host {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "bpsk" => Ok(Host::Bpsk),
            "qpsk" => Ok(Host::Qpsk),
            other => other
                .strip_suffix("qam")
                .and_then(|n| n.parse().ok())
                .map(|order| Host::Qam { order })
                .ok_or_else(|| Error::validation("host", format!("unknown host modulation \"{s}\""))),
        }
    }
}

impl fmt::Display for Host {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Host::Bpsk => f.write_str("bpsk"),
            Host::Qpsk => f.write_str("qpsk"),
            Host::Qam { order } => write!(f, "{order}qam"),
        }
    }
}

impl<'de> Deserialize<'de> for Host {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Host {
    /// Constellation points, normalized to unit average energy.
    pub fn constellation(&self) -> Result<Vec<Complex64>> {
        match *self {
            Host::Bpsk => Ok(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]),
            Host::Qpsk => Ok((0..4)
                .map(|k| Complex64::from_polar(1.0, PI / 4.0 + k as f64 * PI / 2.0))
                .collect()),
            Host::Qam { order } => {
                let side = (order as f64).sqrt().round() as u32;
                if order < 4 || side * side != order {
                    return Err(Error::validation(
                        "host",
                        format!("QAM order must be a square of at least 4, got {order}"),
                    ));
                }
                let level = |i: u32| 2.0 * i as f64 - (side - 1) as f64;
                let pts: Vec<Complex64> = (0..order)
                    .map(|i| Complex64::new(level(i % side), level(i / side)))
                    .collect();
                let energy = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
                Ok(pts.into_iter().map(|p| p / energy.sqrt()).collect())
            }
        }
    }
}

/// Smallest positive angle between two constellation points of distinct
/// phase.
fn min_angle(points: &[Complex64]) -> f64 {
    let mut angles: Vec<f64> = points.iter().map(|p| p.arg().rem_euclid(2.0 * PI)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if angles.len() < 2 {
        return 2.0 * PI;
    }
    let mut best = angles[0] + 2.0 * PI - angles[angles.len() - 1];
    for w in angles.windows(2) {
        best = best.min(w[1] - w[0]);
    }
    best
}

/// The RIS alphabet together with the host constellation it rides on.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSet {
    pub order_exponent: u32,
    pub angles: Vec<f64>,
    pub spacing: f64,
    pub host: Host,
    pub host_constellation: Vec<Complex64>,
    /// Smallest angle between host points.
    pub host_angle: f64,
}

impl SymbolSet {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Reflection coefficient `A(μ_p) e^{jμ_p}` of symbol `p`.
    pub fn point(&self, p: usize) -> Complex64 {
        let mu = self.angles[p];
        Complex64::from_polar(reflection_amplitude(mu).expect("symbol angles are in range"), mu)
    }
}

/// `2^{M_o}` angles `{0, Δμ, …}` with `Δμ` the host's minimum angle divided by
/// `2^{M_o}`.
pub fn build_symbol_set(host: Host, order_exponent: u32) -> Result<SymbolSet> {
    if !(1..=12).contains(&order_exponent) {
        return Err(Error::domain(format!(
            "symbol order exponent must be between 1 and 12, got {order_exponent}"
        )));
    }
    let host_constellation = host.constellation()?;
    let host_angle = min_angle(&host_constellation);
    let count = 1usize << order_exponent;
    let spacing = host_angle / count as f64;
    let angles: Vec<f64> = (0..count).map(|p| p as f64 * spacing).collect();
    if angles[count - 1] - angles[0] >= host_angle {
        return Err(Error::domain("symbol set does not fit inside the host's angular spacing"));
    }
    let set = SymbolSet {
        order_exponent,
        angles,
        spacing,
        host,
        host_constellation,
        host_angle,
    };
    // composite points must be pairwise distinct for unambiguous recovery
    let composite: Vec<Complex64> = (0..count)
        .flat_map(|p| set.host_constellation.iter().map(move |x| (p, *x)))
        .map(|(p, x)| set.point(p) * x)
        .collect();
    for i in 0..composite.len() {
        for j in i + 1..composite.len() {
            if (composite[i] - composite[j]).norm() < 1e-9 {
                return Err(Error::domain("symbol set is ambiguous against the host constellation"));
            }
        }
    }
    Ok(set)
}

/// Every element reflecting with phase `omega`.
pub fn modulated_reflection(omega: f64, n: usize) -> Result<ReflectionMatrix> {
    ReflectionMatrix::uniform(omega, n)
}

/// The surface during channel sounding: no controlled phase shift.
pub fn passive_reflection(n: usize) -> ReflectionMatrix {
    ReflectionMatrix::passive(n)
}

/// `f^H G w`, the scalar channel seen by a user behind an unconfigured
/// (identity) surface.
pub fn effective_scalar(f: &DVector<Complex64>, g: &DMatrix<Complex64>, w: &DVector<Complex64>) -> Result<Complex64> {
    if g.nrows() != f.len() || g.ncols() != w.len() {
        return Err(Error::dims(format!(
            "f: {}, G: {}x{}, w: {}",
            f.len(),
            g.nrows(),
            g.ncols(),
            w.len()
        )));
    }
    Ok(f.dotc(&(g * w)))
}

/// Received samples `√P (f^H G w) A(ω) e^{jω} x_t + n_t`, `n_t ~ CN(0, N0)`.
pub fn urue_receive<R: Rng + ?Sized>(
    f: &DVector<Complex64>,
    g: &DMatrix<Complex64>,
    w: &DVector<Complex64>,
    omega: f64,
    host_symbols: &[Complex64],
    budget: &LinkBudget,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let c = effective_scalar(f, g, w)?;
    receive_scalar(c, omega, host_symbols, budget, rng)
}

fn receive_scalar<R: Rng + ?Sized>(
    c: Complex64,
    omega: f64,
    host_symbols: &[Complex64],
    budget: &LinkBudget,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let signal = c * Complex64::from_polar(reflection_amplitude(omega)?, omega) * budget.tx_power.sqrt();
    let sigma = budget.noise.sqrt();
    Ok(host_symbols
        .iter()
        .map(|x| signal * x + complex_normal(rng) * sigma)
        .collect())
}

/// Decision rule applied to the combined observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    /// Nearest angle on the grid `μ_p + k·(host angle)`. The amplitude of
    /// the composite point is ignored.
    #[default]
    Phase,
    /// Nearest point `A(μ_p) e^{jμ_p}` in the complex plane.
    Euclidean,
}

/// Genie-aided matched filter: `z = Σ y_t conj(c x_t) / (√P |c|² Σ|x_t|²)`,
/// an unbiased estimate of `A(ω) e^{jω}`.
pub fn combine(samples: &[Complex64], effective: Complex64, host_symbols: &[Complex64], tx_power: f64) -> Result<Complex64> {
    if samples.len() != host_symbols.len() || samples.is_empty() {
        return Err(Error::dims(format!(
            "{} samples for {} host symbols",
            samples.len(),
            host_symbols.len()
        )));
    }
    let gain = effective.norm_sqr();
    if !(gain > 0.0) {
        return Err(Error::domain("effective channel is zero"));
    }
    let energy: f64 = host_symbols.iter().map(|x| x.norm_sqr()).sum();
    let acc: Complex64 = samples
        .iter()
        .zip(host_symbols)
        .map(|(y, x)| y * (effective * x).conj())
        .sum();
    Ok(acc / (tx_power.sqrt() * gain * energy))
}

/// Index of the detected symbol for the combined observation `z`; ties go to
/// the lower index.
pub fn detect_index(z: Complex64, set: &SymbolSet, detector: Detector) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    match detector {
        Detector::Euclidean => {
            for p in 0..set.len() {
                let d = (z - set.point(p)).norm();
                if d < best_d {
                    best = p;
                    best_d = d;
                }
            }
        }
        Detector::Phase => {
            let rotations = (2.0 * PI / set.host_angle).round().max(1.0) as usize;
            let arg = z.arg();
            for (p, mu) in set.angles.iter().enumerate() {
                for k in 0..rotations {
                    let d = wrap_phase(arg - mu - k as f64 * set.host_angle).abs();
                    if d < best_d {
                        best = p;
                        best_d = d;
                    }
                }
            }
        }
    }
    best
}

/// Recovers the RIS symbol angle from `N_s` received samples.
pub fn demodulate(
    samples: &[Complex64],
    effective: Complex64,
    set: &SymbolSet,
    host_symbols: &[Complex64],
    tx_power: f64,
    detector: Detector,
) -> Result<f64> {
    let z = combine(samples, effective, host_symbols, tx_power)?;
    Ok(set.angles[detect_index(z, set, detector)])
}

/// Closed-form average SER over i.i.d. Rayleigh channels:
/// `(1/2^{M_o}) Σ_p (1/π) ∫_0^{π-Δμ/2} dθ / (1 + N N_s γ A(μ_p)² sin²(Δμ/2)/sin²θ)`.
pub fn theoretical_ser(set: &SymbolSet, n: usize, repetitions: usize, es_over_n0: f64) -> Result<f64> {
    if !(es_over_n0 >= 0.0) || !es_over_n0.is_finite() {
        return Err(Error::domain(format!("Es/N0 must be non-negative, got {es_over_n0}")));
    }
    if n == 0 || repetitions == 0 {
        return Err(Error::domain("N and N_s must be at least 1"));
    }
    let s2 = (set.spacing / 2.0).sin().powi(2);
    let upper = PI - set.spacing / 2.0;
    let mut total = 0.0;
    for p in 0..set.len() {
        let a2 = set.point(p).norm_sqr();
        let g = n as f64 * repetitions as f64 * es_over_n0 * a2 * s2;
        let v = integrate(
            |theta| {
                let s = theta.sin();
                s * s / (s * s + g)
            },
            0.0,
            upper,
            DEFAULT_PANELS,
        )?;
        total += v / PI;
    }
    Ok(total / set.len() as f64)
}

/// Monte Carlo symbol error rate with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerEstimate {
    pub ser: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub errors: u64,
    pub trials: u64,
}

/// Simulates the RIS symbol link over i.i.d. unit-variance Rayleigh channels.
///
/// Each trial draws `f`, `G` and the direct user's `h`, precodes with MRT
/// towards `h` (the BS is serving that user), sends a uniformly random RIS
/// symbol over `N_s` uniformly random host symbols and demodulates with the
/// genie-aided combiner. `es_over_n0` is `P/N0`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_ser(
    set: &SymbolSet,
    n: usize,
    m: usize,
    repetitions: usize,
    es_over_n0: f64,
    trials: u64,
    streams: &Substreams,
    detector: Detector,
) -> Result<SerEstimate> {
    if n == 0 || m == 0 || repetitions == 0 {
        return Err(Error::domain("N, M and N_s must be at least 1"));
    }
    if !(es_over_n0 > 0.0) {
        return Err(Error::domain("Es/N0 must be positive"));
    }
    let budget = LinkBudget::new(es_over_n0, 1.0)?;
    let hosts = &set.host_constellation;
    let outcomes = par_map_range(trials, |t| {
        let mut rng = streams.trial(t);
        let f = DVector::from_fn(n, |_, _| complex_normal(&mut rng));
        let g = DMatrix::from_fn(n, m, |_, _| complex_normal(&mut rng));
        let h = DVector::from_fn(m, |_, _| complex_normal(&mut rng));
        let w = h.unscale(h.norm());
        let p = rng.random_range(0..set.len());
        let x: Vec<Complex64> = (0..repetitions).map(|_| hosts[rng.random_range(0..hosts.len())]).collect();
        let c = effective_scalar(&f, &g, &w).expect("dimensions match");
        let y = receive_scalar(c, set.angles[p], &x, &budget, &mut rng).expect("symbol angle in range");
        match combine(&y, c, &x, budget.tx_power) {
            Ok(z) => detect_index(z, set, detector) != p,
            Err(_) => true,
        }
    });
    let errors = outcomes.iter().filter(|e| **e).count() as u64;
    let (ci_low, ci_high) = wilson_ci95(errors, trials);
    Ok(SerEstimate {
        ser: if trials > 0 { errors as f64 / trials as f64 } else { 0.0 },
        ci_low,
        ci_high,
        errors,
        trials,
    })
}

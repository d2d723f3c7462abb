//! Coupled amplitude/phase reflection model, greedy discrete phase selection,
//! transmit precoders, SNR evaluation and the analytic SNR bounds.

use crate::channel::RicianParams;
use crate::numerics::mean_abs_noncentral;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Smallest reflection amplitude of the element model.
pub const MIN_AMPLITUDE: f64 = 0.2;

/// Largest exhaustive search accepted by [`exhaustive_oracle`].
pub const ORACLE_LIMIT: u128 = 1 << 20;

// Phase offset and steepness of the amplitude model.
const AMPLITUDE_PHASE_OFFSET: f64 = 0.43 * PI;
const AMPLITUDE_STEEPNESS: f64 = 1.6;

/// Amplitude of an element reflecting with phase `theta`:
/// `(1 - 0.2)((sin(θ - 0.43π) + 1)/2)^1.6 + 0.2`.
pub fn reflection_amplitude(theta: f64) -> Result<f64> {
    if !(-PI..=PI).contains(&theta) {
        return Err(Error::domain(format!(
            "reflection phase {theta} is outside [-π, π]; wrap it first"
        )));
    }
    Ok(amplitude(theta))
}

fn amplitude(theta: f64) -> f64 {
    let s = ((theta - AMPLITUDE_PHASE_OFFSET).sin() + 1.0) / 2.0;
    (1.0 - MIN_AMPLITUDE) * s.max(0.0).powf(AMPLITUDE_STEEPNESS) + MIN_AMPLITUDE
}

/// Complex reflection coefficient `A(θ) e^{jθ}`.
pub fn reflection_coefficient(theta: f64) -> Result<Complex64> {
    Ok(Complex64::from_polar(reflection_amplitude(theta)?, theta))
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Phase-control resolution of an element: `b` bits or continuous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhaseResolution {
    Bits(u32),
    Continuous,
}

impl fmt::Display for PhaseResolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseResolution::Bits(b) => write!(f, "{b}"),
            PhaseResolution::Continuous => f.write_str("inf"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ResolutionRepr {
    Bits(i64),
    Named(String),
}

impl<'de> Deserialize<'de> for PhaseResolution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match ResolutionRepr::deserialize(d)? {
            ResolutionRepr::Bits(b) if (1..=16).contains(&b) => Ok(PhaseResolution::Bits(b as u32)),
            ResolutionRepr::Bits(b) => Err(D::Error::custom(format!(
                "phase bits must be between 1 and 16, got {b}"
            ))),
            ResolutionRepr::Named(s) if s == "inf" || s == "continuous" => Ok(PhaseResolution::Continuous),
            ResolutionRepr::Named(s) => Err(D::Error::custom(format!(
                "expected a bit count or \"inf\", got \"{s}\""
            ))),
        }
    }
}

impl Serialize for PhaseResolution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PhaseResolution::Bits(b) => ResolutionRepr::Bits(*b as i64).serialize(s),
            PhaseResolution::Continuous => ResolutionRepr::Named("inf".into()).serialize(s),
        }
    }
}

/// The selectable reflection phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSet {
    resolution: PhaseResolution,
    phases: Vec<f64>,
}

impl PhaseSet {
    pub fn resolution(&self) -> PhaseResolution {
        self.resolution
    }

    /// The discrete phases in increasing order (empty when continuous).
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn continuous() -> Self {
        Self {
            resolution: PhaseResolution::Continuous,
            phases: Vec::new(),
        }
    }

    pub fn new(resolution: PhaseResolution) -> Result<Self> {
        match resolution {
            PhaseResolution::Bits(b) => make_phase_set(b),
            PhaseResolution::Continuous => Ok(Self::continuous()),
        }
    }
}

/// `{-π + i·2π/2^b : 0 ≤ i < 2^b}`.
pub fn make_phase_set(bits: u32) -> Result<PhaseSet> {
    if bits < 1 || bits > 16 {
        return Err(Error::domain(format!(
            "phase resolution must be between 1 and 16 bits, got {bits}"
        )));
    }
    let count = 1usize << bits;
    let step = 2.0 * PI / count as f64;
    Ok(PhaseSet {
        resolution: PhaseResolution::Bits(bits),
        phases: (0..count).map(|i| -PI + i as f64 * step).collect(),
    })
}

/// Diagonal reflection matrix; amplitudes are always derived from phases.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionMatrix {
    phases: Vec<f64>,
    amplitudes: Vec<f64>,
}

impl ReflectionMatrix {
    pub fn from_phases(phases: Vec<f64>) -> Result<Self> {
        let amplitudes = phases
            .iter()
            .map(|&t| reflection_amplitude(t))
            .collect::<Result<_>>()?;
        Ok(Self { phases, amplitudes })
    }

    /// All `n` elements reflecting with phase `theta`.
    pub fn uniform(theta: f64, n: usize) -> Result<Self> {
        Self::from_phases(vec![theta; n])
    }

    /// The unconfigured surface, `-I_N` up to the amplitude model.
    pub fn passive(n: usize) -> Self {
        Self::uniform(-PI, n).expect("-π is in range")
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn coefficient(&self, n: usize) -> Complex64 {
        Complex64::from_polar(self.amplitudes[n], self.phases[n])
    }
}

/// Transmit power, noise and symbol energies of one RB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power: f64,
    pub noise: f64,
    pub symbol_energy_due: f64,
    pub symbol_energy_rue: f64,
}

impl LinkBudget {
    /// Unit symbol energies.
    pub fn new(tx_power: f64, noise: f64) -> Result<Self> {
        let b = Self {
            tx_power,
            noise,
            symbol_energy_due: 1.0,
            symbol_energy_rue: 1.0,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("tx_power", self.tx_power),
            ("noise", self.noise),
            ("symbol_energy_due", self.symbol_energy_due),
            ("symbol_energy_rue", self.symbol_energy_rue),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(field, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `P E^r / N0`.
    pub fn rue_scale(&self) -> f64 {
        self.tx_power * self.symbol_energy_rue / self.noise
    }

    /// `P E^d / N0`.
    pub fn due_scale(&self) -> f64 {
        self.tx_power * self.symbol_energy_due / self.noise
    }
}

/// Output of the greedy phase selection.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformResult {
    pub reflection: ReflectionMatrix,
    /// Zero-based index of the BS antenna with the strongest cascaded column.
    pub selected_antenna: usize,
    /// `|s_i|` after each element.
    pub trace: Vec<f64>,
    /// Cascaded channel gain `|s_N|^2` on the selected antenna.
    pub gain: f64,
    /// Number of candidate coefficients evaluated.
    pub evaluations: usize,
}

impl BeamformResult {
    /// SNR with antenna-selection precoding.
    pub fn snr(&self, budget: &LinkBudget) -> f64 {
        budget.rue_scale() * self.gain
    }
}

fn check_cascade(f: &DVector<Complex64>, g: &DMatrix<Complex64>) -> Result<()> {
    if g.nrows() != f.len() {
        return Err(Error::dims(format!(
            "f has {} entries but G has {} rows",
            f.len(),
            g.nrows()
        )));
    }
    if f.is_empty() || g.ncols() == 0 {
        return Err(Error::dims("empty channel"));
    }
    Ok(())
}

/// Index of the column with the largest norm, lowest index on ties.
pub fn strongest_column(g: &DMatrix<Complex64>) -> usize {
    let mut best = 0;
    let mut best_norm = f64::NEG_INFINITY;
    for (m, col) in g.column_iter().enumerate() {
        let n = col.norm_squared();
        if n > best_norm {
            best = m;
            best_norm = n;
        }
    }
    best
}

/// Greedy element-by-element phase selection on the strongest BS antenna.
///
/// Element `i` picks the phase maximizing `|s_{i-1} + a_i A(θ) e^{jθ}|` with
/// `a_i = conj(f_i) g_{i,m̂}`; ties go to the lowest phase index. With
/// continuous phases each element is co-phased directly,
/// `θ_i = ∠f_i - ∠g_{i,m̂}`.
pub fn algorithm1(f: &DVector<Complex64>, g: &DMatrix<Complex64>, set: &PhaseSet) -> Result<BeamformResult> {
    check_cascade(f, g)?;
    let m_hat = strongest_column(g);
    let n = f.len();
    let mut phases = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    let mut s = Complex64::new(0.0, 0.0);
    let mut evaluations = 0;

    match set.resolution {
        PhaseResolution::Continuous => {
            for i in 0..n {
                let a = f[i].conj() * g[(i, m_hat)];
                let theta = if a == Complex64::new(0.0, 0.0) {
                    -PI
                } else {
                    wrap_phase(-a.arg())
                };
                evaluations += 1;
                s += a * Complex64::from_polar(amplitude(theta), theta);
                phases.push(theta);
                trace.push(s.norm());
            }
        }
        PhaseResolution::Bits(_) => {
            let candidates: Vec<Complex64> = set
                .phases
                .iter()
                .map(|&t| Complex64::from_polar(amplitude(t), t))
                .collect();
            if candidates.is_empty() {
                return Err(Error::domain("empty phase set"));
            }
            for i in 0..n {
                let a = f[i].conj() * g[(i, m_hat)];
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for (idx, c) in candidates.iter().enumerate() {
                    evaluations += 1;
                    let v = (s + a * c).norm_sqr();
                    if v > best_val {
                        best = idx;
                        best_val = v;
                    }
                }
                s += a * candidates[best];
                phases.push(set.phases[best]);
                trace.push(s.norm());
            }
        }
    }
    Ok(BeamformResult {
        reflection: ReflectionMatrix::from_phases(phases)?,
        selected_antenna: m_hat,
        trace,
        gain: s.norm_sqr(),
        evaluations,
    })
}

/// The cascaded channel `G^H Φ^H f`, i.e. the conjugate of the row `f^H Φ G`.
pub fn cascaded_channel(f: &DVector<Complex64>, refl: &ReflectionMatrix, g: &DMatrix<Complex64>) -> Result<DVector<Complex64>> {
    check_cascade(f, g)?;
    if refl.len() != f.len() {
        return Err(Error::dims(format!(
            "reflection has {} elements, channel has {}",
            refl.len(),
            f.len()
        )));
    }
    let weights = DVector::from_fn(f.len(), |n, _| f[n].conj() * refl.coefficient(n));
    // row_m = Σ_n conj(f_n) φ_n g_nm
    Ok(DVector::from_fn(g.ncols(), |m, _| {
        g.column(m).iter().zip(weights.iter()).map(|(a, b)| a * b).sum::<Complex64>().conj()
    }))
}

/// Exhaustive search for the discrete configuration maximizing
/// `‖f^H Φ G‖²`.
pub fn exhaustive_oracle(f: &DVector<Complex64>, g: &DMatrix<Complex64>, set: &PhaseSet) -> Result<(ReflectionMatrix, f64)> {
    check_cascade(f, g)?;
    let PhaseResolution::Bits(bits) = set.resolution else {
        return Err(Error::domain("exhaustive search needs a discrete phase set"));
    };
    let n = f.len();
    let configurations = 1u128.checked_shl(bits * n as u32).filter(|_| bits as usize * n < 127);
    let configurations = match configurations {
        Some(c) if c <= ORACLE_LIMIT => c as usize,
        other => {
            return Err(Error::SearchSpaceTooLarge {
                configurations: other.unwrap_or(u128::MAX),
                limit: ORACLE_LIMIT,
            })
        }
    };
    let q = set.phases.len();
    let coeffs: Vec<Complex64> = set.phases.iter().map(|&t| Complex64::from_polar(amplitude(t), t)).collect();
    // terms[n][p][m] = conj(f_n) φ_p g_nm
    let m_count = g.ncols();
    let terms: Vec<Vec<Vec<Complex64>>> = (0..n)
        .map(|i| {
            coeffs
                .iter()
                .map(|c| (0..m_count).map(|m| f[i].conj() * c * g[(i, m)]).collect())
                .collect()
        })
        .collect();
    let mut digits = vec![0usize; n];
    let mut best = (vec![0usize; n], f64::NEG_INFINITY);
    let mut row = vec![Complex64::new(0.0, 0.0); m_count];
    for _ in 0..configurations {
        row.iter_mut().for_each(|r| *r = Complex64::new(0.0, 0.0));
        for (i, &d) in digits.iter().enumerate() {
            for (r, t) in row.iter_mut().zip(&terms[i][d]) {
                *r += t;
            }
        }
        let v: f64 = row.iter().map(|r| r.norm_sqr()).sum();
        if v > best.1 {
            best = (digits.clone(), v);
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < q {
                break;
            }
            *d = 0;
        }
    }
    let phases = best.0.iter().map(|&d| set.phases[d]).collect();
    Ok((ReflectionMatrix::from_phases(phases)?, best.1))
}

/// One-hot precoder on the strongest BS antenna.
pub fn antenna_selection_precoder(g: &DMatrix<Complex64>) -> DVector<Complex64> {
    let mut w = DVector::zeros(g.ncols());
    if g.ncols() > 0 {
        w[strongest_column(g)] = Complex64::new(1.0, 0.0);
    }
    w
}

/// Maximum-ratio precoder `v / ‖v‖` for a channel given in conjugated form
/// (for an RIS user, `v = G^H Φ^H f`).
pub fn mrt_precoder(channel: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let norm = channel.norm();
    if !(norm > 0.0) {
        return Err(Error::domain("MRT of a zero channel is undefined"));
    }
    Ok(channel.unscale(norm))
}

fn check_unit(w: &DVector<Complex64>) -> Result<()> {
    let n = w.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("precoder norm is {n}, expected 1")));
    }
    Ok(())
}

/// `P E^r |f^H Φ G w|² / N0`.
pub fn snr_rue(
    f: &DVector<Complex64>,
    refl: &ReflectionMatrix,
    g: &DMatrix<Complex64>,
    w: &DVector<Complex64>,
    budget: &LinkBudget,
) -> Result<f64> {
    check_unit(w)?;
    let v = cascaded_channel(f, refl, g)?;
    if v.len() != w.len() {
        return Err(Error::dims(format!("precoder has {} entries, BS has {}", w.len(), v.len())));
    }
    Ok(budget.rue_scale() * v.dotc(w).norm_sqr())
}

/// `P E^d |h^H w|² / N0`.
pub fn snr_due(h: &DVector<Complex64>, w: &DVector<Complex64>, budget: &LinkBudget) -> Result<f64> {
    check_unit(w)?;
    if h.len() != w.len() {
        return Err(Error::dims(format!("precoder has {} entries, h has {}", w.len(), h.len())));
    }
    Ok(budget.due_scale() * h.dotc(w).norm_sqr())
}

/// SNR of a lossless continuous-phase surface with every antenna co-phased:
/// `(P/N0) Σ_m (Σ_n |f_n||g_nm|)²`.
pub fn snr_upper_ideal(f: &DVector<Complex64>, g: &DMatrix<Complex64>, budget: &LinkBudget) -> Result<f64> {
    Ok(budget.tx_power / budget.noise * upper_gain(f, g)?)
}

/// The channel gain inside [`snr_upper_ideal`].
pub fn upper_gain(f: &DVector<Complex64>, g: &DMatrix<Complex64>) -> Result<f64> {
    check_cascade(f, g)?;
    Ok(g.column_iter()
        .map(|col| {
            let s: f64 = col.iter().zip(f.iter()).map(|(a, b)| a.norm() * b.norm()).sum();
            s * s
        })
        .sum())
}

/// Per-realization SNR lower bound: every element at the minimum amplitude,
/// co-phased for antenna `m0` (zero-based).
pub fn snr_lower_bound_realization(f: &DVector<Complex64>, g: &DMatrix<Complex64>, m0: usize, budget: &LinkBudget) -> Result<f64> {
    check_cascade(f, g)?;
    if m0 >= g.ncols() {
        return Err(Error::domain(format!("antenna {m0} out of range for {} antennas", g.ncols())));
    }
    let mut total = 0.0;
    for m in 0..g.ncols() {
        let s: Complex64 = (0..f.len())
            .map(|n| {
                let mag = f[n].norm() * g[(n, m)].norm();
                Complex64::from_polar(mag, g[(n, m)].arg() - g[(n, m0)].arg())
            })
            .sum();
        total += s.norm_sqr();
    }
    Ok(budget.rue_scale() * MIN_AMPLITUDE * MIN_AMPLITUDE * total)
}

/// How the NLoS variance of an element enters the per-element mean
/// magnitude in [`lemma1_lower_bound_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationLoading {
    /// The element's marginal variance `R[n, n]`. Gives a true lower bound.
    Marginal,
    /// The absolute row sum `Σ_j |R[n, j]|`. Overstates the NLoS spread of
    /// correlated arrays, so the result is no longer guaranteed to bound.
    AbsRowSum,
}

/// Lower bound on the mean of [`snr_lower_bound_realization`] for Rician
/// links, built from per-element mean magnitudes; uses
/// [`CorrelationLoading::Marginal`].
pub fn lemma1_lower_bound(g_link: &RicianParams, f_link: &RicianParams, budget: &LinkBudget, m0: usize) -> Result<f64> {
    lemma1_lower_bound_with(g_link, f_link, budget, m0, CorrelationLoading::Marginal)
}

pub fn lemma1_lower_bound_with(
    g_link: &RicianParams,
    f_link: &RicianParams,
    budget: &LinkBudget,
    m0: usize,
    loading: CorrelationLoading,
) -> Result<f64> {
    let n = g_link.los.nrows();
    if f_link.los.nrows() != n || f_link.los.ncols() != 1 {
        return Err(Error::dims("f link must be an N x 1 channel matching G"));
    }
    if m0 >= g_link.los.ncols() {
        return Err(Error::domain(format!("antenna {m0} out of range")));
    }
    let element_mean = |p: &RicianParams, i: usize, col: usize| -> Result<f64> {
        let k = p.kappa;
        let spread = match loading {
            CorrelationLoading::Marginal => p.marginal_correlation(i),
            CorrelationLoading::AbsRowSum => p.abs_row_sum(i),
        };
        let los = (p.pathloss_linear * k / (k + 1.0)).sqrt() * p.los[(i, col)].norm();
        let var = p.pathloss_linear * spread / (k + 1.0);
        mean_abs_noncentral(los, var)
    };
    let mut sum = 0.0;
    for i in 0..n {
        sum += element_mean(g_link, i, m0)? * element_mean(f_link, i, 0)?;
    }
    Ok(budget.rue_scale() * MIN_AMPLITUDE * MIN_AMPLITUDE * sum * sum)
}

/// Mean and variance of [`snr_lower_bound_realization`] over i.i.d.
/// unit-variance Rayleigh channels.
pub fn rayleigh_snr_moments(n: usize, m: usize, budget: &LinkBudget) -> Result<(f64, f64)> {
    if n < 1 || m < 1 {
        return Err(Error::domain("N and M must be at least 1"));
    }
    let (n, m) = (n as f64, m as f64);
    let c = budget.rue_scale() * MIN_AMPLITUDE * MIN_AMPLITUDE;
    let pi2 = PI * PI;
    let mean = n * c * (m + pi2 * (n - 1.0) / 16.0);
    let var = n * n * c * c * ((1.0 - pi2 / 16.0) * (2.0 - pi2 / 8.0 + n * pi2 / 4.0) + m - 1.0);
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;
    use crate::numerics::StatAccumulator;
    use crate::rng::Substreams;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_budget() -> LinkBudget {
        LinkBudget::new(1.0, 1.0).unwrap()
    }

    fn rayleigh(n: usize, m: usize, seed: u64, t: u64) -> (DVector<Complex64>, DMatrix<Complex64>) {
        ChannelModel::iid_rayleigh(n, m, 0, 1).sample_rue(t, 0, 0, &Substreams::new(seed))
    }

    #[test]
    fn amplitude_examples() {
        assert!((reflection_amplitude(0.93 * PI).unwrap() - 1.0).abs() < 1e-12);
        assert!((reflection_amplitude(-0.07 * PI).unwrap() - 0.2).abs() < 1e-12);
        let v = reflection_amplitude(-PI).unwrap();
        assert!((v - 0.98465).abs() < 1e-5, "{v}");
        let v = reflection_amplitude(0.0).unwrap();
        assert!((v - 0.2007).abs() < 1e-4, "{v}");
        assert!(reflection_amplitude(3.2).is_err());
        assert!(reflection_amplitude(f64::NAN).is_err());
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_phase(PI), -PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_phase(0.5), 0.5);
    }

    #[test]
    fn phase_set_examples() {
        assert_eq!(make_phase_set(1).unwrap().phases(), &[-PI, 0.0]);
        assert_eq!(make_phase_set(2).unwrap().phases(), &[-PI, -PI / 2.0, 0.0, PI / 2.0]);
        let p3 = make_phase_set(3).unwrap();
        assert_eq!(p3.phases().len(), 8);
        assert_eq!(p3.phases()[0], -PI);
        assert!(p3.phases().contains(&0.0));
        assert!(make_phase_set(0).is_err());
    }

    #[test]
    fn resolution_parses() {
        #[derive(Deserialize)]
        struct W {
            b: Vec<PhaseResolution>,
        }
        let w: W = toml::from_str(r#"b = [1, 3, "inf"]"#).unwrap();
        assert_eq!(w.b, vec![PhaseResolution::Bits(1), PhaseResolution::Bits(3), PhaseResolution::Continuous]);
        assert!(toml::from_str::<W>("b = [0]").is_err());
        assert!(toml::from_str::<W>(r#"b = ["lots"]"#).is_err());
    }

    #[test]
    fn single_element_prefers_minus_pi() {
        let f = DVector::from_vec(vec![c(0.3, -1.0)]);
        let g = DMatrix::from_vec(1, 1, vec![c(2.0, 0.5)]);
        let r = algorithm1(&f, &g, &make_phase_set(1).unwrap()).unwrap();
        assert_eq!(r.reflection.phases(), &[-PI]);
        assert!((r.reflection.amplitudes()[0] - 0.98465).abs() < 1e-5);
        let (o, _) = exhaustive_oracle(&f, &g, &make_phase_set(1).unwrap()).unwrap();
        assert_eq!(o, r.reflection);
    }

    #[test]
    fn zero_channel_gives_zero_snr() {
        let f = DVector::zeros(4);
        let g = DMatrix::zeros(4, 2);
        let r = algorithm1(&f, &g, &make_phase_set(2).unwrap()).unwrap();
        assert_eq!(r.gain, 0.0);
        assert!(r.reflection.phases().iter().all(|&t| t == -PI));
        let r = algorithm1(&f, &g, &PhaseSet::continuous()).unwrap();
        assert!(r.reflection.phases().iter().all(|&t| t == -PI));
    }

    #[test]
    fn greedy_never_beats_oracle_small() {
        let set = make_phase_set(1).unwrap();
        for seed in 0..20 {
            let (f, g) = rayleigh(4, 2, seed, 0);
            let r = algorithm1(&f, &g, &set).unwrap();
            let greedy = cascaded_channel(&f, &r.reflection, &g).unwrap().norm_squared();
            let (_, best) = exhaustive_oracle(&f, &g, &set).unwrap();
            assert!(best >= greedy * (1.0 - 1e-12));
        }
    }

    #[test]
    fn adversarial_greedy_gap() {
        // a_1 = 1, a_2 = -2: greedy commits element 1 to the strong -π
        // state and is then forced to align element 2 with a weak state.
        let f = DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let g = DMatrix::from_vec(2, 1, vec![c(1.0, 0.0), c(-2.0, 0.0)]);
        let set = make_phase_set(1).unwrap();
        let r = algorithm1(&f, &g, &set).unwrap();
        let (o, best) = exhaustive_oracle(&f, &g, &set).unwrap();
        assert_eq!(r.reflection.phases(), &[-PI, 0.0]);
        assert_eq!(o.phases(), &[0.0, -PI]);
        assert!((r.gain.sqrt() - 1.3854).abs() < 1e-3, "{}", r.gain.sqrt());
        assert!((best.sqrt() - 2.1700).abs() < 1e-3, "{}", best.sqrt());
    }

    #[test]
    fn oracle_guard() {
        let (f, g) = rayleigh(21, 1, 0, 0);
        assert!(matches!(
            exhaustive_oracle(&f, &g, &make_phase_set(1).unwrap()),
            Err(Error::SearchSpaceTooLarge { .. })
        ));
        let (f, g) = rayleigh(200, 1, 0, 0);
        assert!(exhaustive_oracle(&f, &g, &make_phase_set(1).unwrap()).is_err());
        assert!(exhaustive_oracle(&f, &g, &PhaseSet::continuous()).is_err());
    }

    #[test]
    fn precoder_examples() {
        let g = DMatrix::from_vec(1, 1, vec![c(1.0, 1.0)]);
        assert_eq!(antenna_selection_precoder(&g), DVector::from_vec(vec![c(1.0, 0.0)]));
        let g = DMatrix::from_vec(1, 2, vec![c(2.0, 0.0), c(0.0, 3.0)]);
        assert_eq!(antenna_selection_precoder(&g)[1], c(1.0, 0.0));
        let g = DMatrix::from_vec(1, 2, vec![c(2.0, 0.0), c(0.0, 2.0)]);
        assert_eq!(antenna_selection_precoder(&g)[0], c(1.0, 0.0));

        let w = mrt_precoder(&DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
        assert_eq!(w, DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        let w = mrt_precoder(&DVector::from_vec(vec![c(3.0, 0.0), c(0.0, 4.0)])).unwrap();
        assert!((w[0] - c(0.6, 0.0)).norm() < 1e-15 && (w[1] - c(0.0, 0.8)).norm() < 1e-15);
        assert!(mrt_precoder(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn snr_examples() {
        let b = LinkBudget::new(2.0, 0.5).unwrap();
        let h = DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let w = mrt_precoder(&h).unwrap();
        assert!((snr_due(&h, &w, &b).unwrap() - 2.0 * 4.0).abs() < 1e-12);
        let orth = DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]).unscale(2f64.sqrt());
        assert!(snr_due(&h, &orth, &b).unwrap() < 1e-25);
        assert!(snr_due(&h, &h, &b).is_err());

        // single-term expansion
        let f = DVector::from_vec(vec![c(0.5, 0.5)]);
        let g = DMatrix::from_vec(1, 1, vec![c(-1.0, 2.0)]);
        let w = DVector::from_vec(vec![c(1.0, 0.0)]);
        for theta in [-PI, -1.0, 0.0, 2.5] {
            let r = ReflectionMatrix::uniform(theta, 1).unwrap();
            let want = 4.0 * f[0].norm_sqr() * g[(0, 0)].norm_sqr() * amplitude(theta).powi(2);
            assert!((snr_rue(&f, &r, &g, &w, &b).unwrap() - want).abs() < 1e-12);
        }
        assert!((snr_upper_ideal(&f, &g, &b).unwrap() - 4.0 * f[0].norm_sqr() * g[(0, 0)].norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn amplitude_floor_scales_snr() {
        let (f, g) = rayleigh(8, 2, 3, 0);
        let w = antenna_selection_precoder(&g);
        let b = unit_budget();
        let low = ReflectionMatrix::uniform(-0.07 * PI, 8).unwrap();
        let full = snr_rue(&f, &low, &g, &w, &b).unwrap() / 0.04;
        // the same phases at unit amplitude, computed by hand
        let m = strongest_column(&g);
        let s: Complex64 = (0..8).map(|n| f[n].conj() * Complex64::from_polar(1.0, -0.07 * PI) * g[(n, m)]).sum();
        assert!((full / s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn upper_bound_all_ones() {
        let f = DVector::from_element(5, c(1.0, 0.0));
        let g = DMatrix::from_element(5, 3, c(1.0, 0.0));
        assert!((snr_upper_ideal(&f, &g, &unit_budget()).unwrap() - 3.0 * 25.0).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_single_antenna() {
        let (f, g) = rayleigh(6, 1, 4, 0);
        let s: f64 = (0..6).map(|n| f[n].norm() * g[(n, 0)].norm()).sum();
        let v = snr_lower_bound_realization(&f, &g, 0, &unit_budget()).unwrap();
        assert!((v - 0.04 * s * s).abs() < 1e-12);
        assert!(snr_lower_bound_realization(&f, &g, 1, &unit_budget()).is_err());
    }

    #[test]
    fn lemma1_rayleigh_closed_form() {
        let n = 10;
        let g = RicianParams::rayleigh(n, 2);
        let f = RicianParams::rayleigh(n, 1);
        let v = lemma1_lower_bound(&g, &f, &unit_budget(), 0).unwrap();
        let want = 0.04 * (n as f64 * PI / 4.0).powi(2);
        assert!((v - want).abs() < 1e-12);
    }

    #[test]
    fn lemma1_single_element() {
        let g = RicianParams {
            kappa: 2.0,
            los: DMatrix::from_element(1, 1, c(0.0, 1.0)),
            correlation_sqrt: None,
            pathloss_linear: 0.5,
        };
        let f = RicianParams { kappa: 0.5, ..g.clone() };
        let mg = mean_abs_noncentral((0.5f64 * 2.0 / 3.0).sqrt(), 0.5 / 3.0).unwrap();
        let mf = mean_abs_noncentral((0.5f64 * 0.5 / 1.5).sqrt(), 0.5 / 1.5).unwrap();
        let v = lemma1_lower_bound(&g, &f, &unit_budget(), 0).unwrap();
        assert!((v - 0.04 * (mg * mf).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn moments_examples() {
        let (mean, _) = rayleigh_snr_moments(1, 1, &unit_budget()).unwrap();
        assert!((mean - 0.04).abs() < 1e-15);
        // M = 1 mean: 0.04 N (1 + π²(N-1)/16)
        let (mean, _) = rayleigh_snr_moments(32, 1, &unit_budget()).unwrap();
        assert!((mean - 0.04 * 32.0 * (1.0 + PI * PI * 31.0 / 16.0)).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_mean_matches_moments() {
        let (n, m) = (16, 2);
        let streams = Substreams::new(77);
        let model = ChannelModel::iid_rayleigh(n, m, 0, 1);
        let acc: StatAccumulator = (0..10_000)
            .map(|t| {
                let (f, g) = model.sample_rue(t, 0, 0, &streams);
                snr_lower_bound_realization(&f, &g, 0, &unit_budget()).unwrap()
            })
            .collect();
        let (mean, _) = rayleigh_snr_moments(n, m, &unit_budget()).unwrap();
        assert!((acc.mean() / mean - 1.0).abs() < 0.03);
    }

    #[test]
    fn continuous_mode_cophases() {
        let (f, g) = rayleigh(12, 2, 5, 0);
        let r = algorithm1(&f, &g, &PhaseSet::continuous()).unwrap();
        assert_eq!(r.evaluations, 12);
        let m = r.selected_antenna;
        let expected: f64 = (0..12)
            .map(|n| f[n].norm() * g[(n, m)].norm() * r.reflection.amplitudes()[n])
            .sum();
        assert!((r.gain.sqrt() - expected).abs() < 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn channel(n: usize, m: usize) -> impl Strategy<Value = (DVector<Complex64>, DMatrix<Complex64>)> {
            let entry = (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| Complex64::new(a, b));
            (
                proptest::collection::vec(entry.clone(), n),
                proptest::collection::vec(entry, n * m),
            )
                .prop_map(move |(f, g)| (DVector::from_vec(f), DMatrix::from_vec(n, m, g)))
        }

        fn instance() -> impl Strategy<Value = (DVector<Complex64>, DMatrix<Complex64>, u32)> {
            (1usize..=8, 1usize..=3, 1u32..=3).prop_flat_map(|(n, m, b)| {
                channel(n, m).prop_map(move |(f, g)| (f, g, b))
            })
        }

        proptest! {
            #[test]
            fn greedy_invariants((f, g, b) in instance()) {
                let set = make_phase_set(b).unwrap();
                let r = algorithm1(&f, &g, &set).unwrap();
                prop_assert_eq!(r.evaluations, f.len() << b);
                for pair in r.trace.windows(2) {
                    prop_assert!(pair[1] >= pair[0] * (1.0 - 1e-12));
                }
                let m = r.selected_antenna;
                let floor: f64 = (0..f.len()).map(|n| (f[n].norm() * g[(n, m)].norm()).powi(2)).sum::<f64>() * 0.04;
                prop_assert!(r.gain >= floor * (1.0 - 1e-9));
                for (t, a) in r.reflection.phases().iter().zip(r.reflection.amplitudes()) {
                    prop_assert_eq!(*a, amplitude(*t));
                    prop_assert!((0.2..=1.0).contains(a));
                }
            }

            #[test]
            fn oracle_dominates((f, g, b) in instance()) {
                prop_assume!(f.len() as u32 * b <= 12);
                let set = make_phase_set(b).unwrap();
                let r = algorithm1(&f, &g, &set).unwrap();
                let greedy = cascaded_channel(&f, &r.reflection, &g).unwrap().norm_squared();
                let (_, best) = exhaustive_oracle(&f, &g, &set).unwrap();
                prop_assert!(best >= greedy * (1.0 - 1e-12));
            }

            #[test]
            fn upper_bound_dominates((f, g, b) in instance(), seed in 0u64..1000) {
                let budget = LinkBudget::new(1.5, 0.7).unwrap();
                let upper = snr_upper_ideal(&f, &g, &budget).unwrap();
                let lower = snr_lower_bound_realization(&f, &g, 0, &budget).unwrap();
                prop_assert!(lower <= upper * (1.0 + 1e-12));
                for set in [make_phase_set(b).unwrap(), PhaseSet::continuous()] {
                    let r = algorithm1(&f, &g, &set).unwrap();
                    let v = cascaded_channel(&f, &r.reflection, &g).unwrap();
                    if v.norm() > 0.0 {
                        let w = mrt_precoder(&v).unwrap();
                        prop_assert!(snr_rue(&f, &r.reflection, &g, &w, &budget).unwrap() <= upper * (1.0 + 1e-12));
                    }
                    let w = antenna_selection_precoder(&g);
                    prop_assert!(snr_rue(&f, &r.reflection, &g, &w, &budget).unwrap() <= upper * (1.0 + 1e-12));
                }
                // an arbitrary configuration
                let phases: Vec<f64> = (0..f.len()).map(|n| wrap_phase((seed as f64 + n as f64) * 1.7)).collect();
                let refl = ReflectionMatrix::from_phases(phases).unwrap();
                let w = antenna_selection_precoder(&g);
                prop_assert!(snr_rue(&f, &refl, &g, &w, &budget).unwrap() <= upper * (1.0 + 1e-12));
            }

            #[test]
            fn snr_matches_elementwise_sum((f, g, _b) in instance(), theta in -3.1f64..3.1) {
                let refl = ReflectionMatrix::uniform(theta, f.len()).unwrap();
                let w = DVector::from_fn(g.ncols(), |i, _| Complex64::from_polar(1.0, i as f64)).unscale((g.ncols() as f64).sqrt());
                let budget = LinkBudget::new(1.0, 1.0).unwrap();
                let direct = snr_rue(&f, &refl, &g, &w, &budget).unwrap();
                let mut s = Complex64::new(0.0, 0.0);
                for n in 0..f.len() {
                    for m in 0..g.ncols() {
                        s += f[n].conj() * refl.coefficient(n) * g[(n, m)] * w[m];
                    }
                }
                prop_assert!((direct - s.norm_sqr()).abs() <= 1e-10 * (1.0 + direct));
            }

            #[test]
            fn mrt_attains_norm((v, _g) in channel(4, 1)) {
                prop_assume!(v.norm() > 1e-6);
                let w = mrt_precoder(&v).unwrap();
                prop_assert!((w.norm() - 1.0).abs() < 1e-12);
                prop_assert!((v.dotc(&w).norm() - v.norm()).abs() < 1e-10 * v.norm());
            }

            #[test]
            fn mrt_dominates_due((h, _g) in channel(3, 1), seed in 0u64..100) {
                prop_assume!(h.norm() > 1e-6);
                let b = unit_budget();
                let mrt = snr_due(&h, &mrt_precoder(&h).unwrap(), &b).unwrap();
                let hm = DMatrix::from_column_slice(1, 3, h.as_slice());
                let sel = snr_due(&h, &antenna_selection_precoder(&hm), &b).unwrap();
                prop_assert!(mrt >= sel * (1.0 - 1e-12));
                let (w, _) = rayleigh(3, 1, seed, 1);
                let w = w.unscale(w.norm());
                prop_assert!(sel >= 0.0 && mrt >= snr_due(&h, &w, &b).unwrap() * (1.0 - 1e-12));
            }
        }
    }
}

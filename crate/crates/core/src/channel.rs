//! Scenario geometry, path loss, spatial correlation and Rician channel
//! realizations.

use crate::rng::{complex_normal, Link, Substreams};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::Deserialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Deployment and propagation parameters.
///
/// Users of each kind are placed evenly on a circle around the BS (angle
/// `2πk/K`); each RIS sits on the RIS circle at its user's angle, and its
/// user is `d_ru` further out. Own links use the nominal distances
/// `d_bu`, `d_br` and `d_ru`; interference links between RIS `j` and user
/// `k` use the 3D distance implied by this geometry.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub num_bs_antennas: usize,
    pub num_elements: usize,
    pub num_due: usize,
    pub num_rue: usize,
    pub num_rbs: usize,
    pub d_bu: f64,
    pub d_br: f64,
    pub d_ru: f64,
    pub height_bs: f64,
    pub height_ris: f64,
    pub height_ue: f64,
    pub pathloss_exp_bs_due: f64,
    pub pathloss_exp_bs_ris: f64,
    pub pathloss_exp_ris_rue: f64,
    pub pathloss_const_db: f64,
    pub wavelength: f64,
    pub element_spacing: f64,
    pub kappa_bs_ris: f64,
    pub kappa_ris_rue: f64,
    pub kappa_bs_due: f64,
    pub tx_psd_dbm_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Bandwidth of one resource block.
    pub rb_bandwidth_hz: f64,
    /// Use the UPA sinc correlation for RIS-side links; identity otherwise.
    pub spatial_correlation: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            num_bs_antennas: 2,
            num_elements: 64,
            num_due: 5,
            num_rue: 5,
            num_rbs: 25,
            d_bu: 50.0,
            d_br: 100.0,
            d_ru: 3.0,
            height_bs: 25.0,
            height_ris: 10.0,
            height_ue: 1.5,
            pathloss_exp_bs_due: 3.7,
            pathloss_exp_bs_ris: 2.2,
            pathloss_exp_ris_rue: 2.2,
            pathloss_const_db: -30.0,
            wavelength: 0.1,
            element_spacing: 0.05,
            kappa_bs_ris: 1.0,
            kappa_ris_rue: 1.0,
            kappa_bs_due: 1.0,
            tx_psd_dbm_hz: -20.0,
            noise_psd_dbm_hz: -174.0,
            // 10 MHz split into 25 RBs
            rb_bandwidth_hz: 400e3,
            spatial_correlation: true,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_bs_antennas", self.num_bs_antennas),
            ("num_elements", self.num_elements),
            ("num_rbs", self.num_rbs),
        ];
        for (field, v) in counts {
            if v < 1 {
                return Err(Error::validation(field, "must be at least 1"));
            }
        }
        let distances = [
            ("d_bu", self.d_bu),
            ("d_br", self.d_br),
            ("d_ru", self.d_ru),
        ];
        for (field, v) in distances {
            if !(v >= 1.0) || !v.is_finite() {
                return Err(Error::validation(
                    field,
                    format!("must be at least the 1 m reference distance, got {v}"),
                ));
            }
        }
        let positive = [
            ("height_bs", self.height_bs),
            ("height_ris", self.height_ris),
            ("height_ue", self.height_ue),
            ("wavelength", self.wavelength),
            ("element_spacing", self.element_spacing),
            ("rb_bandwidth_hz", self.rb_bandwidth_hz),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(field, format!("must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("pathloss_exp_bs_due", self.pathloss_exp_bs_due),
            ("pathloss_exp_bs_ris", self.pathloss_exp_bs_ris),
            ("pathloss_exp_ris_rue", self.pathloss_exp_ris_rue),
            ("kappa_bs_ris", self.kappa_bs_ris),
            ("kappa_ris_rue", self.kappa_ris_rue),
            ("kappa_bs_due", self.kappa_bs_due),
        ];
        for (field, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(field, format!("must be non-negative, got {v}")));
            }
        }
        let finite = [
            ("pathloss_const_db", self.pathloss_const_db),
            ("tx_psd_dbm_hz", self.tx_psd_dbm_hz),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(Error::validation(field, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.num_due + self.num_rue
    }

    /// Transmit power per RB in watts.
    pub fn tx_power_w(&self) -> f64 {
        dbm_to_w(self.tx_psd_dbm_hz) * self.rb_bandwidth_hz
    }

    /// Noise power per RB in watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_w(self.noise_psd_dbm_hz) * self.rb_bandwidth_hz
    }
}

fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Log-distance path loss as a linear power gain.
pub fn pathloss_linear(distance: f64, exponent: f64, const_db: f64) -> Result<f64> {
    if !(distance >= 1.0) {
        return Err(Error::domain(format!(
            "distance {distance} m is below the 1 m reference distance"
        )));
    }
    Ok(10f64.powf((const_db - 10.0 * exponent * distance.log10()) / 10.0))
}

/// Element positions (in metres) of an `N`-element planar array. A square
/// grid when `N` is a perfect square, otherwise the factorization
/// `width × height` with the smallest `width ≥ √N`.
pub fn upa_positions(n: usize, spacing: f64) -> Vec<(f64, f64)> {
    let mut width = (n as f64).sqrt().ceil().max(1.0) as usize;
    while n % width != 0 {
        width += 1;
    }
    (0..n)
        .map(|i| ((i % width) as f64 * spacing, (i / width) as f64 * spacing))
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Spatial correlation of a planar array under isotropic scattering:
/// `R[n, j] = sinc(2 d_nj / λ)`. The matrix is real symmetric.
pub fn upa_correlation(n: usize, spacing: f64, wavelength: f64) -> Result<DMatrix<f64>> {
    if !(spacing > 0.0) || !(wavelength > 0.0) {
        return Err(Error::domain(
            "element spacing and wavelength must be positive",
        ));
    }
    let pos = upa_positions(n, spacing);
    Ok(DMatrix::from_fn(n, n, |r, c| {
        let (dx, dy) = (pos[r].0 - pos[c].0, pos[r].1 - pos[c].1);
        sinc(2.0 * (dx * dx + dy * dy).sqrt() / wavelength)
    }))
}

/// Symmetric PSD square root of a real symmetric matrix; negative eigenvalues
/// from round-off are clamped to zero.
pub fn psd_sqrt(r: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(r.clone());
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| {
        v[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt()
    });
    &scaled * v.transpose()
}

type CorrelationKey = (usize, u64, u64);

/// `R^{1/2}` of the UPA correlation, cached because the eigendecomposition
/// dominates setup time for large arrays.
pub fn upa_correlation_sqrt(n: usize, spacing: f64, wavelength: f64) -> Result<Arc<DMatrix<f64>>> {
    static CACHE: OnceLock<Mutex<HashMap<CorrelationKey, Arc<DMatrix<f64>>>>> = OnceLock::new();
    let key = (n, spacing.to_bits(), wavelength.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let sqrt = Arc::new(psd_sqrt(&upa_correlation(n, spacing, wavelength)?));
    cache.lock().unwrap().insert(key, sqrt.clone());
    Ok(sqrt)
}

/// Statistics of one Rician-faded link.
///
/// The correlation acts on the row dimension (RIS elements). `None` means
/// uncorrelated (`R = I`). The sinc model is real, so the square root is
/// stored as a real matrix.
#[derive(Debug, Clone)]
pub struct RicianParams {
    pub kappa: f64,
    pub los: DMatrix<Complex64>,
    pub correlation_sqrt: Option<Arc<DMatrix<f64>>>,
    pub pathloss_linear: f64,
}

impl RicianParams {
    /// Zero-mean unit-variance uncorrelated fading.
    pub fn rayleigh(rows: usize, cols: usize) -> Self {
        Self {
            kappa: 0.0,
            los: DMatrix::zeros(rows, cols),
            correlation_sqrt: None,
            pathloss_linear: 1.0,
        }
    }

    /// Diagonal entry `R[n, n]` of the correlation matrix.
    pub fn marginal_correlation(&self, n: usize) -> f64 {
        match &self.correlation_sqrt {
            None => 1.0,
            Some(s) => s.row(n).norm_squared(),
        }
    }

    /// Absolute row sum `Σ_j |R[n, j]|` of the correlation matrix.
    pub fn abs_row_sum(&self, n: usize) -> f64 {
        match &self.correlation_sqrt {
            None => 1.0,
            Some(s) => {
                let row = s.row(n);
                (0..s.nrows()).map(|j| row.dot(&s.row(j)).abs()).sum()
            }
        }
    }
}

/// Draws `√PL · (√(κ/(κ+1)) LoS + √(1/(κ+1)) R^{1/2} W)`.
pub fn sample_rician<R: Rng + ?Sized>(
    params: &RicianParams,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if params.los.shape() != (rows, cols) {
        return Err(Error::dims(format!(
            "LoS component is {:?}, requested {rows}x{cols}",
            params.los.shape()
        )));
    }
    if let Some(s) = &params.correlation_sqrt {
        if s.shape() != (rows, rows) {
            return Err(Error::dims(format!(
                "correlation root is {:?}, expected {rows}x{rows}",
                s.shape()
            )));
        }
    }
    let w = DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng));
    let nlos = match &params.correlation_sqrt {
        None => w,
        Some(s) => {
            let re = s.as_ref() * w.map(|z| z.re);
            let im = s.as_ref() * w.map(|z| z.im);
            re.zip_map(&im, Complex64::new)
        }
    };
    let k = params.kappa;
    let (a, b) = if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    };
    let pl = params.pathloss_linear.sqrt();
    Ok(params.los.zip_map(&nlos, |l, n| (l * a + n * b) * pl))
}

/// One slot/RB realization of every channel in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub slot: u64,
    pub rb: u64,
    /// BS to DUE `k`, length `M`.
    pub h: Vec<DVector<Complex64>>,
    /// BS to RIS `k`, `N × M`.
    pub g: Vec<DMatrix<Complex64>>,
    /// RIS `k` to RUE `k`, length `N`.
    pub f: Vec<DVector<Complex64>>,
    f_cross: Vec<DVector<Complex64>>,
}

impl NetworkState {
    /// Interference channel from RIS `j` to RUE `k` (`j != k`).
    pub fn cross(&self, j: usize, k: usize) -> &DVector<Complex64> {
        assert_ne!(j, k, "no interference channel from a RIS to its own user");
        &self.f_cross[j * self.f.len() + k]
    }
}

// Deterministic per-link angle in [-π/2, π/2).
fn link_angle(kind: u64, index: u64, which: u64) -> f64 {
    let mut z = kind.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index.rotate_left(23) ^ which.rotate_left(47);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    ((z >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * PI
}

fn ris_steering(pos: &[(f64, f64)], wavelength: f64, azimuth: f64, elevation: f64) -> DVector<Complex64> {
    let k = 2.0 * PI / wavelength;
    DVector::from_iterator(
        pos.len(),
        pos.iter().map(|&(x, y)| {
            Complex64::from_polar(1.0, k * (x * azimuth.sin() * elevation.cos() + y * elevation.sin()))
        }),
    )
}

trait AsColumn {
    fn as_column(self) -> DMatrix<Complex64>;
}

impl AsColumn for DVector<Complex64> {
    fn as_column(self) -> DMatrix<Complex64> {
        let n = self.len();
        DMatrix::from_column_slice(n, 1, self.as_slice())
    }
}

// Half-wavelength ULA at the BS.
fn bs_steering(m: usize, angle: f64) -> DVector<Complex64> {
    DVector::from_fn(m, |i, _| Complex64::from_polar(1.0, PI * i as f64 * angle.sin()))
}

/// Link statistics for every channel of a scenario, precomputed once.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub num_elements: usize,
    pub num_bs_antennas: usize,
    pub due: Vec<RicianParams>,
    pub bs_ris: Vec<RicianParams>,
    pub ris_rue: Vec<RicianParams>,
    cross: Vec<Option<RicianParams>>,
}

impl ChannelModel {
    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        s.validate()?;
        let (n, m) = (s.num_elements, s.num_bs_antennas);
        let corr = if s.spatial_correlation {
            Some(upa_correlation_sqrt(n, s.element_spacing, s.wavelength)?)
        } else {
            None
        };
        let pos = upa_positions(n, s.element_spacing);

        let pl_due = pathloss_linear(s.d_bu, s.pathloss_exp_bs_due, s.pathloss_const_db)?;
        let due = (0..s.num_due)
            .map(|k| RicianParams {
                kappa: s.kappa_bs_due,
                los: bs_steering(m, link_angle(1, k as u64, 0)).as_column(),
                correlation_sqrt: None,
                pathloss_linear: pl_due,
            })
            .collect();

        let pl_br = pathloss_linear(s.d_br, s.pathloss_exp_bs_ris, s.pathloss_const_db)?;
        let bs_ris = (0..s.num_rue)
            .map(|k| {
                let k = k as u64;
                let arrival = ris_steering(&pos, s.wavelength, link_angle(2, k, 0), link_angle(2, k, 1));
                let departure = bs_steering(m, link_angle(2, k, 2));
                RicianParams {
                    kappa: s.kappa_bs_ris,
                    los: &arrival * departure.transpose(),
                    correlation_sqrt: corr.clone(),
                    pathloss_linear: pl_br,
                }
            })
            .collect();

        let pl_ru = pathloss_linear(s.d_ru, s.pathloss_exp_ris_rue, s.pathloss_const_db)?;
        let ris_rue = (0..s.num_rue)
            .map(|k| {
                let k = k as u64;
                RicianParams {
                    kappa: s.kappa_ris_rue,
                    los: ris_steering(&pos, s.wavelength, link_angle(3, k, 0), link_angle(3, k, 1)).as_column(),
                    correlation_sqrt: corr.clone(),
                    pathloss_linear: pl_ru,
                }
            })
            .collect();

        let kr = s.num_rue;
        let place = |k: usize, radius: f64| {
            let a = 2.0 * PI * k as f64 / kr as f64;
            (radius * a.cos(), radius * a.sin())
        };
        let mut cross = Vec::with_capacity(kr * kr);
        for j in 0..kr {
            for k in 0..kr {
                if j == k {
                    cross.push(None);
                    continue;
                }
                let (xj, yj) = place(j, s.d_br);
                let (xk, yk) = place(k, s.d_br + s.d_ru);
                let dz = s.height_ris - s.height_ue;
                let d = ((xj - xk).powi(2) + (yj - yk).powi(2) + dz * dz).sqrt().max(1.0);
                let idx = (j * kr + k) as u64;
                cross.push(Some(RicianParams {
                    kappa: s.kappa_ris_rue,
                    los: ris_steering(&pos, s.wavelength, link_angle(4, idx, 0), link_angle(4, idx, 1)).as_column(),
                    correlation_sqrt: corr.clone(),
                    pathloss_linear: pathloss_linear(d, s.pathloss_exp_ris_rue, s.pathloss_const_db)?,
                }));
            }
        }
        Ok(Self {
            num_elements: n,
            num_bs_antennas: m,
            due,
            bs_ris,
            ris_rue,
            cross,
        })
    }

    /// Every link i.i.d. Rayleigh with unit variance and no path loss.
    pub fn iid_rayleigh(n: usize, m: usize, num_due: usize, num_rue: usize) -> Self {
        let cross = (0..num_rue * num_rue)
            .map(|i| (i / num_rue != i % num_rue).then(|| RicianParams::rayleigh(n, 1)))
            .collect();
        Self {
            num_elements: n,
            num_bs_antennas: m,
            due: vec![RicianParams::rayleigh(m, 1); num_due],
            bs_ris: vec![RicianParams::rayleigh(n, m); num_rue],
            ris_rue: vec![RicianParams::rayleigh(n, 1); num_rue],
            cross,
        }
    }

    pub fn num_due(&self) -> usize {
        self.due.len()
    }

    pub fn num_rue(&self) -> usize {
        self.ris_rue.len()
    }

    fn column(params: &RicianParams, rows: usize, streams: &Substreams, t: u64, f: u64, link: Link, idx: u64) -> DVector<Complex64> {
        let mut rng = streams.stream(t, f, link, idx);
        let m = sample_rician(params, rows, 1, &mut rng).expect("model dimensions are consistent");
        m.column(0).into_owned()
    }

    /// Samples only RUE `k`'s cascaded link `(f_k, G_k)`; identical to the
    /// corresponding entries of [`ChannelModel::sample`].
    pub fn sample_rue(&self, t: u64, f: u64, k: usize, streams: &Substreams) -> (DVector<Complex64>, DMatrix<Complex64>) {
        let (n, m) = (self.num_elements, self.num_bs_antennas);
        let mut rng = streams.stream(t, f, Link::BsRis, k as u64);
        let g = sample_rician(&self.bs_ris[k], n, m, &mut rng).expect("model dimensions are consistent");
        let fv = Self::column(&self.ris_rue[k], n, streams, t, f, Link::RisRue, k as u64);
        (fv, g)
    }

    /// Samples BS–DUE channel `h_k`.
    pub fn sample_due(&self, t: u64, f: u64, k: usize, streams: &Substreams) -> DVector<Complex64> {
        Self::column(&self.due[k], self.num_bs_antennas, streams, t, f, Link::BsDue, k as u64)
    }

    /// Draws every channel for slot `t` and RB `f`.
    pub fn sample(&self, t: u64, f: u64, streams: &Substreams) -> NetworkState {
        let kr = self.num_rue();
        let h = (0..self.num_due()).map(|k| self.sample_due(t, f, k, streams)).collect();
        let (fs, gs) = (0..kr).map(|k| self.sample_rue(t, f, k, streams)).unzip();
        let f_cross = self
            .cross
            .iter()
            .enumerate()
            .map(|(i, p)| match p {
                None => DVector::zeros(0),
                Some(p) => Self::column(p, self.num_elements, streams, t, f, Link::Cross, i as u64),
            })
            .collect();
        NetworkState {
            slot: t,
            rb: f,
            h,
            g: gs,
            f: fs,
            f_cross,
        }
    }
}

/// Convenience wrapper building the [`ChannelModel`] of `scenario` and
/// sampling one state from it.
pub fn sample_network_state(scenario: &Scenario, t: u64, f: u64, streams: &Substreams) -> Result<NetworkState> {
    Ok(ChannelModel::from_scenario(scenario)?.sample(t, f, streams))
}

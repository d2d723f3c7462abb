//! Browser bindings for three small interactive views: the reflection
//! amplitude curve, the RIS-symbol SER curve and a single greedy
//! phase-selection run. Arrays are returned flat; see each function for the
//! layout. Seeds are `u32` so that JavaScript can pass plain numbers.
//! `www/index.html` draws the results on a canvas.

use ris_lab::beamforming::{algorithm1, make_phase_set, reflection_amplitude, upper_gain, PhaseSet};
use ris_lab::channel::ChannelModel;
use ris_lab::modulation::{build_symbol_set, simulate_ser, theoretical_ser, Detector, Host};
use ris_lab::numerics::db_to_linear;
use ris_lab::rng::Substreams;
use std::f64::consts::PI;
use wasm_bindgen::prelude::*;

fn js_err(e: ris_lab::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `points` samples of the amplitude over `[-π, π)`, as `[θ0, A0, θ1, A1, ...]`.
#[wasm_bindgen]
pub fn amplitude_curve(points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .flat_map(|i| {
            let theta = -PI + 2.0 * PI * i as f64 / points as f64;
            [theta, reflection_amplitude(theta).expect("theta in range")]
        })
        .collect()
}

/// SER against `P/N0` in dB, as `[snr, theory, simulated, ...]`.
///
/// `symbols = 0` skips the simulation (the simulated column is then NaN).
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn ser_curve(
    host: &str,
    order_exponent: u32,
    n: usize,
    repetitions: usize,
    snr_min_db: f64,
    snr_max_db: f64,
    points: usize,
    symbols: u32,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    let host: Host = host.parse().map_err(js_err)?;
    let set = build_symbol_set(host, order_exponent).map_err(js_err)?;
    let streams = Substreams::new(seed.into());
    let points = points.max(2);
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let db = snr_min_db + (snr_max_db - snr_min_db) * i as f64 / (points - 1) as f64;
        let g = db_to_linear(db);
        let theory = theoretical_ser(&set, n, repetitions, g).map_err(js_err)?;
        let sim = if symbols > 0 {
            simulate_ser(&set, n, 2, repetitions, g, symbols as u64, &streams, Detector::Phase)
                .map_err(js_err)?
                .ser
        } else {
            f64::NAN
        };
        out.extend([db, theory, sim]);
    }
    Ok(out)
}

/// One greedy phase-selection run on an i.i.d. Rayleigh instance.
#[wasm_bindgen]
pub struct GreedyRun {
    trace: Vec<f64>,
    phases: Vec<f64>,
    gain: f64,
    upper: f64,
    evaluations: usize,
    antenna: usize,
}

#[wasm_bindgen]
impl GreedyRun {
    /// `|s_i|` after each element.
    #[wasm_bindgen(getter)]
    pub fn trace(&self) -> Vec<f64> {
        self.trace.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn phases(&self) -> Vec<f64> {
        self.phases.clone()
    }

    /// Achieved `|s_N|²`.
    #[wasm_bindgen(getter)]
    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Lossless co-phased gain summed over antennas.
    #[wasm_bindgen(getter)]
    pub fn upper(&self) -> f64 {
        self.upper
    }

    #[wasm_bindgen(getter)]
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    #[wasm_bindgen(getter)]
    pub fn antenna(&self) -> usize {
        self.antenna
    }
}

/// `bits = 0` selects continuous phases.
#[wasm_bindgen]
pub fn greedy_run(n: usize, m: usize, bits: u32, seed: u32) -> Result<GreedyRun, JsError> {
    if n == 0 || m == 0 {
        return Err(JsError::new("N and M must be at least 1"));
    }
    let set = if bits == 0 {
        PhaseSet::continuous()
    } else {
        make_phase_set(bits).map_err(js_err)?
    };
    let (f, g) = ChannelModel::iid_rayleigh(n, m, 0, 1).sample_rue(0, 0, 0, &Substreams::new(seed.into()));
    let res = algorithm1(&f, &g, &set).map_err(js_err)?;
    Ok(GreedyRun {
        trace: res.trace.clone(),
        phases: res.reflection.phases().to_vec(),
        gain: res.gain,
        upper: upper_gain(&f, &g).map_err(js_err)?,
        evaluations: res.evaluations,
        antenna: res.selected_antenna,
    })
}

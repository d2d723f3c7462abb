//! Link-level simulation and optimization for RIS-assisted downlink MISO
//! systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: special functions, quadrature and streaming statistics.
//! - [`rng`]: counter-based substreams so that Monte Carlo trials are
//!   reproducible independent of execution order.
//! - [`channel`]: scenario geometry, path loss, UPA spatial correlation and
//!   correlated Rician channel realizations.
//! - [`beamforming`]: the coupled amplitude/phase reflection model, greedy
//!   discrete phase selection, precoders, SNR evaluation and analytic bounds.
//! - [`modulation`]: reflection-based PSK for unscheduled RIS users and its
//!   symbol error rate.
//! - [`allocation`]: joint user scheduling and power control driven by a
//!   stochastic dual subgradient method.
//! - [`harness`]: configuration, experiment presets and CSV output.

pub mod allocation;
pub mod beamforming;
pub mod channel;
mod error;
pub mod harness;
pub mod modulation;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Evaluates `f(0..n)` and returns the results in index order. Runs on the
/// rayon pool when the `parallel` feature is on; the output never depends
/// on the number of threads.
pub(crate) fn par_map_range<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

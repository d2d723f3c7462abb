//! Configuration, experiment presets and CSV output.
//!
//! A configuration file is TOML with three optional tables: `[experiment]`
//! (sweeps, trial counts, seed), `[scenario]` ([`Scenario`]) and
//! `[allocation]` ([`AllocationConfig`]). Unknown keys are rejected. An empty
//! file selects the default network and sweeps.

mod experiments;
mod table;

pub use experiments::{run_experiment, ratio_estimate, RatioEstimate};
pub use table::{read_csv, write_csv, ResultRow, ResultTable};

use crate::allocation::AllocationConfig;
use crate::beamforming::PhaseResolution;
use crate::channel::Scenario;
use crate::{Error, Result};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// The experiment presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentName {
    /// Greedy-phase ergodic rate over the ideal upper bound, per (N, b).
    Fig4Ratio,
    /// Antenna selection over MRT ergodic rate, per (N, M, b).
    Fig5MrtRatio,
    /// Simulated and closed-form SER of the RIS symbols, per (N, SNR).
    Fig6Ser,
    /// Running averages of one allocation run, per N.
    Fig7Convergence,
    /// Per-user average rates with and without the rate requirement.
    Fig8Individual,
    /// Average sum rate with and without the rate requirement, per (N, K).
    Fig9Sumrate,
    /// Greedy phase selection statistics, per (N, b).
    Custom,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 7] = [
        ExperimentName::Fig4Ratio,
        ExperimentName::Fig5MrtRatio,
        ExperimentName::Fig6Ser,
        ExperimentName::Fig7Convergence,
        ExperimentName::Fig8Individual,
        ExperimentName::Fig9Sumrate,
        ExperimentName::Custom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Fig4Ratio => "fig4-ratio",
            ExperimentName::Fig5MrtRatio => "fig5-mrt-ratio",
            ExperimentName::Fig6Ser => "fig6-ser",
            ExperimentName::Fig7Convergence => "fig7-convergence",
            ExperimentName::Fig8Individual => "fig8-individual",
            ExperimentName::Fig9Sumrate => "fig9-sumrate",
            ExperimentName::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|e| e.as_str()).collect();
            Error::validation("name", format!("unknown experiment \"{s}\"; expected one of {}", names.join(", ")))
        })
    }
}

impl<'de> Deserialize<'de> for ExperimentName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Sweeps and Monte Carlo settings.
///
/// Counts are read as signed integers so that negative values produce a
/// validation error naming the field instead of a type error.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Experiment to run; `None` runs every preset.
    pub name: Option<ExperimentName>,
    /// Channel realizations per point of the rate-ratio experiments.
    pub trials: i64,
    /// Symbols per SER point.
    pub ser_symbols: i64,
    /// Host symbols per RIS symbol in the SER experiment.
    pub ser_repetitions: i64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// RIS sizes of the beamforming and SER experiments.
    pub n: Vec<i64>,
    pub b: Vec<PhaseResolution>,
    /// BS antenna counts of the MRT comparison.
    pub m: Vec<i64>,
    /// `P/N0` points of the SER experiment, dB.
    pub snr_db: Vec<f64>,
    /// Total user counts (split evenly, extra user to the RIS side) of the
    /// sum-rate experiment.
    pub k: Vec<i64>,
    /// RIS sizes of the allocation experiments.
    pub alloc_n: Vec<i64>,
    /// Rows emitted per convergence trace.
    pub trace_points: i64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: None,
            trials: 1000,
            ser_symbols: 100_000,
            ser_repetitions: 1,
            seed: 1,
            output_dir: PathBuf::from("results"),
            n: vec![16, 64, 256, 1024],
            b: vec![PhaseResolution::Bits(1), PhaseResolution::Bits(2), PhaseResolution::Continuous],
            m: vec![1, 2, 4],
            snr_db: vec![-6.0, -3.0, 0.0, 3.0, 6.0, 9.0],
            k: vec![4, 10],
            alloc_n: vec![16, 64],
            trace_points: 200,
        }
    }
}

fn positive_list(field: &str, v: &[i64], max: i64) -> Result<()> {
    if v.is_empty() {
        return Err(Error::validation(field, "sweep list must not be empty"));
    }
    if let Some(bad) = v.iter().find(|x| !(1..=max).contains(*x)) {
        return Err(Error::validation(field, format!("values must lie in 1..={max}, got {bad}")));
    }
    Ok(())
}

fn to_usize(v: &[i64]) -> Vec<usize> {
    v.iter().map(|&x| x as usize).collect()
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("trials", self.trials),
            ("ser_symbols", self.ser_symbols),
            ("ser_repetitions", self.ser_repetitions),
            ("trace_points", self.trace_points),
        ] {
            if v < 1 {
                return Err(Error::validation(field, format!("must be at least 1, got {v}")));
            }
        }
        positive_list("n", &self.n, 1 << 16)?;
        positive_list("m", &self.m, 64)?;
        positive_list("k", &self.k, 256)?;
        positive_list("alloc_n", &self.alloc_n, 1 << 16)?;
        if self.b.is_empty() {
            return Err(Error::validation("b", "sweep list must not be empty"));
        }
        if self.snr_db.is_empty() {
            return Err(Error::validation("snr_db", "sweep list must not be empty"));
        }
        if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
            return Err(Error::validation("snr_db", format!("values must be finite, got {x}")));
        }
        Ok(())
    }

    pub fn n_values(&self) -> Vec<usize> {
        to_usize(&self.n)
    }

    pub fn m_values(&self) -> Vec<usize> {
        to_usize(&self.m)
    }

    pub fn k_values(&self) -> Vec<usize> {
        to_usize(&self.k)
    }

    pub fn alloc_n_values(&self) -> Vec<usize> {
        to_usize(&self.alloc_n)
    }
}

/// A complete, validated configuration.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSpec,
    pub scenario: Scenario,
    pub allocation: AllocationConfig,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        self.scenario.validate()?;
        self.allocation.validate()
    }

    /// The experiments a run should execute.
    pub fn selected(&self) -> Vec<ExperimentName> {
        match self.experiment.name {
            Some(n) => vec![n],
            None => ExperimentName::ALL.to_vec(),
        }
    }
}

/// Parses and validates a configuration from TOML text.
pub fn parse_config(text: &str, origin: &Path) -> Result<Config> {
    let cfg: Config = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_owned(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path)
}

/// Runs `names` and writes `<out>/<name>.csv` for each; returns the paths.
pub fn run_to_dir(cfg: &Config, names: &[ExperimentName], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut written = Vec::with_capacity(names.len());
    for name in names {
        let table = run_experiment(*name, cfg)?;
        let path = out.join(format!("{name}.csv"));
        write_csv(&table, &path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config> {
        parse_config(text, Path::new("test.toml"))
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.scenario.d_bu, 50.0);
        assert_eq!(cfg.scenario.d_br, 100.0);
        assert_eq!(cfg.scenario.d_ru, 3.0);
        assert_eq!(cfg.scenario.num_bs_antennas, 2);
        assert_eq!(cfg.allocation.min_rate_bps, 20e6);
        assert_eq!(cfg.selected().len(), 7);
    }

    #[test]
    fn negative_n_names_field() {
        match parse("[experiment]\nn = [-1]\n") {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "n"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("[experiment]\nfoo = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("foo"), "{err}");
        let err = parse("foo = 1\n").unwrap_err();
        assert!(err.to_string().contains("foo"));
        let err = parse("[scenario]\nfoo = 1\n").unwrap_err();
        assert!(err.to_string().contains("foo"));
    }

    #[test]
    fn parse_error_has_line() {
        let err = parse("[experiment]\ntrials = \n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn full_config() {
        let cfg = parse(
            r#"
[experiment]
name = "fig6-ser"
trials = 10
seed = 42
n = [16, 32]
b = [1, "inf"]
snr_db = [0.0, 3.0]

[scenario]
num_elements = 32
spatial_correlation = false

[allocation]
min_rate_bps = 1e6
phase_bits = 2
host = "qpsk"
snr_mode = "alg1"
"#,
        )
        .unwrap();
        assert_eq!(cfg.selected(), vec![ExperimentName::Fig6Ser]);
        assert_eq!(cfg.experiment.b, vec![PhaseResolution::Bits(1), PhaseResolution::Continuous]);
        assert_eq!(cfg.allocation.phase_bits, PhaseResolution::Bits(2));
        assert!(!cfg.scenario.spatial_correlation);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(parse("[experiment]\nname = \"fig10\"\n").is_err());
        assert!(parse("[experiment]\nb = [0]\n").is_err());
        assert!(parse("[experiment]\ntrials = 0\n").is_err());
        assert!(parse("[experiment]\nsnr_db = []\n").is_err());
        assert!(parse("[scenario]\nd_bu = 0.5\n").is_err());
        assert!(parse("[allocation]\nalpha = 2.0\n").is_err());
    }

    #[test]
    fn names_round_trip() {
        for e in ExperimentName::ALL {
            assert_eq!(e.as_str().parse::<ExperimentName>().unwrap(), e);
        }
    }
}

use super::{Config, ExperimentName, ResultRow, ResultTable};
use crate::allocation::{run_algorithm2, AllocationConfig, Trajectory};
use crate::beamforming::{algorithm1, cascaded_channel, upper_gain, LinkBudget, PhaseSet};
use crate::channel::{ChannelModel, Scenario};
use crate::modulation::{build_symbol_set, simulate_ser, theoretical_ser, Detector};
use crate::numerics::{db_to_linear, linear_to_db, StatAccumulator, Z95};
use crate::rng::Substreams;
use crate::{par_map_range, Result};
use std::f64::consts::LN_2;

/// Ratio of two paired sample means with a delta-method 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// `mean(x) / mean(y)` for paired samples. The interval accounts for the
/// covariance between numerator and denominator.
pub fn ratio_estimate(x: &[f64], y: &[f64]) -> RatioEstimate {
    assert_eq!(x.len(), y.len(), "paired samples");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let r = mx / my;
    if x.len() < 2 {
        return RatioEstimate { ratio: r, ci_low: r, ci_high: r };
    }
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let d = n - 1.0;
    let var = ((sxx - 2.0 * r * sxy + r * r * syy) / d).max(0.0) / (n * my * my);
    let h = Z95 * var.sqrt();
    RatioEstimate { ratio: r, ci_low: r - h, ci_high: r + h }
}

struct Emitter<'a> {
    table: ResultTable,
    name: &'a str,
    seed: u64,
}

impl Emitter<'_> {
    fn row(&mut self, coords: &[String], metric: &str, value: f64, ci: (f64, f64), trials: u64) {
        self.table.rows.push(ResultRow {
            experiment: self.name.to_owned(),
            coords: coords.to_vec(),
            metric: metric.to_owned(),
            value,
            ci_low: ci.0.min(value),
            ci_high: ci.1.max(value),
            trials,
            seed: self.seed,
        });
    }

    fn mean(&mut self, coords: &[String], metric: &str, acc: &StatAccumulator) {
        self.row(coords, metric, acc.mean(), acc.ci95(), acc.count());
    }

    fn ratio(&mut self, coords: &[String], metric: &str, x: &[f64], y: &[f64]) {
        let r = ratio_estimate(x, y);
        self.row(coords, metric, r.ratio, (r.ci_low, r.ci_high), x.len() as u64);
    }

    fn exact(&mut self, coords: &[String], metric: &str, value: f64, trials: u64) {
        self.row(coords, metric, value, (value, value), trials);
    }
}

fn bits(snr: f64) -> f64 {
    snr.ln_1p() / LN_2
}

fn column(values: &[Vec<f64>], i: usize) -> Vec<f64> {
    values.iter().map(|v| v[i]).collect()
}

fn single_link(cfg: &Config, n: usize, m: usize) -> Result<(ChannelModel, LinkBudget)> {
    let s = Scenario {
        num_elements: n,
        num_bs_antennas: m,
        num_due: 0,
        num_rue: 1,
        ..cfg.scenario.clone()
    };
    let model = ChannelModel::from_scenario(&s)?;
    Ok((model, LinkBudget::new(s.tx_power_w(), s.noise_power_w())?))
}

/// Runs one preset. Rows carry 95% intervals; trials within a point share
/// nothing but the seed, so the output is independent of the thread count.
pub fn run_experiment(name: ExperimentName, cfg: &Config) -> Result<ResultTable> {
    cfg.validate()?;
    match name {
        ExperimentName::Fig4Ratio => fig4(cfg),
        ExperimentName::Fig5MrtRatio => fig5(cfg),
        ExperimentName::Fig6Ser => fig6(cfg),
        ExperimentName::Fig7Convergence => fig7(cfg),
        ExperimentName::Fig8Individual => fig8(cfg),
        ExperimentName::Fig9Sumrate => fig9(cfg),
        ExperimentName::Custom => custom(cfg),
    }
}

fn emitter<'a>(cfg: &Config, name: &'a str, keys: &[&str]) -> Emitter<'a> {
    Emitter {
        table: ResultTable::new(keys.iter().copied()),
        name,
        seed: cfg.experiment.seed,
    }
}

fn phase_sets(cfg: &Config) -> Result<Vec<PhaseSet>> {
    cfg.experiment.b.iter().map(|b| PhaseSet::new(*b)).collect()
}

fn fig4(cfg: &Config) -> Result<ResultTable> {
    let spec = &cfg.experiment;
    let mut out = emitter(cfg, "fig4-ratio", &["n", "b"]);
    let streams = Substreams::new(spec.seed);
    let sets = phase_sets(cfg)?;
    for n in spec.n_values() {
        let (model, budget) = single_link(cfg, n, cfg.scenario.num_bs_antennas)?;
        // every phase resolution sees the same channel draws
        let samples = par_map_range(spec.trials as u64, |t| -> Result<Vec<f64>> {
            let (f, g) = model.sample_rue(t, 0, 0, &streams);
            let mut v = vec![bits(budget.rue_scale() * upper_gain(&f, &g)?)];
            for set in &sets {
                v.push(bits(algorithm1(&f, &g, set)?.snr(&budget)));
            }
            Ok(v)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let upper = column(&samples, 0);
        let upper_acc: StatAccumulator = upper.iter().copied().collect();
        for (i, set) in sets.iter().enumerate() {
            let c = [n.to_string(), set.resolution().to_string()];
            let rate = column(&samples, i + 1);
            out.ratio(&c, "ratio", &rate, &upper);
            out.mean(&c, "rate_alg1", &rate.iter().copied().collect());
            out.mean(&c, "rate_upper", &upper_acc);
        }
    }
    Ok(out.table)
}

fn fig5(cfg: &Config) -> Result<ResultTable> {
    let spec = &cfg.experiment;
    let mut out = emitter(cfg, "fig5-mrt-ratio", &["n", "m", "b"]);
    let streams = Substreams::new(spec.seed);
    let sets = phase_sets(cfg)?;
    for n in spec.n_values() {
        for m in spec.m_values() {
            let (model, budget) = single_link(cfg, n, m)?;
            let samples = par_map_range(spec.trials as u64, |t| -> Result<Vec<f64>> {
                let (f, g) = model.sample_rue(t, 0, 0, &streams);
                let mut v = Vec::with_capacity(2 * sets.len());
                for set in &sets {
                    let res = algorithm1(&f, &g, set)?;
                    let row = cascaded_channel(&f, &res.reflection, &g)?;
                    v.push(bits(budget.rue_scale() * row[res.selected_antenna].norm_sqr()));
                    v.push(bits(budget.rue_scale() * row.norm_squared()));
                }
                Ok(v)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            for (i, set) in sets.iter().enumerate() {
                let c = [n.to_string(), m.to_string(), set.resolution().to_string()];
                let (sel, mrt) = (column(&samples, 2 * i), column(&samples, 2 * i + 1));
                out.ratio(&c, "ratio", &sel, &mrt);
                out.mean(&c, "rate_selection", &sel.iter().copied().collect());
                out.mean(&c, "rate_mrt", &mrt.iter().copied().collect());
            }
        }
    }
    Ok(out.table)
}

fn fig6(cfg: &Config) -> Result<ResultTable> {
    let spec = &cfg.experiment;
    let mut out = emitter(cfg, "fig6-ser", &["n", "snr_db"]);
    let streams = Substreams::new(spec.seed);
    let set = build_symbol_set(cfg.allocation.host, cfg.allocation.order_exponent)?;
    let reps = spec.ser_repetitions as usize;
    let symbols = spec.ser_symbols as u64;
    for n in spec.n_values() {
        for &db in &spec.snr_db {
            let c = [n.to_string(), db.to_string()];
            let gamma = db_to_linear(db);
            let sim = simulate_ser(&set, n, cfg.scenario.num_bs_antennas, reps, gamma, symbols, &streams, Detector::Phase)?;
            out.row(&c, "ser_sim", sim.ser, (sim.ci_low, sim.ci_high), sim.trials);
            out.exact(&c, "ser_theory", theoretical_ser(&set, n, reps, gamma)?, symbols);
        }
    }
    Ok(out.table)
}

fn custom(cfg: &Config) -> Result<ResultTable> {
    let spec = &cfg.experiment;
    let mut out = emitter(cfg, "custom", &["n", "b"]);
    let streams = Substreams::new(spec.seed);
    let sets = phase_sets(cfg)?;
    for n in spec.n_values() {
        let (model, budget) = single_link(cfg, n, cfg.scenario.num_bs_antennas)?;
        let samples = par_map_range(spec.trials as u64, |t| -> Result<Vec<f64>> {
            let (f, g) = model.sample_rue(t, 0, 0, &streams);
            let upper = upper_gain(&f, &g)?;
            let mut v = Vec::with_capacity(3 * sets.len());
            for set in &sets {
                let res = algorithm1(&f, &g, set)?;
                v.push(linear_to_db(res.snr(&budget)));
                v.push(res.gain / upper);
                v.push(res.evaluations as f64);
            }
            Ok(v)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        for (i, set) in sets.iter().enumerate() {
            let c = [n.to_string(), set.resolution().to_string()];
            for (j, metric) in ["snr_db", "gain_over_upper", "evaluations"].into_iter().enumerate() {
                out.mean(&c, metric, &column(&samples, 3 * i + j).into_iter().collect());
            }
        }
    }
    Ok(out.table)
}

fn allocation_run(cfg: &Config, n: usize, num_due: usize, num_rue: usize, min_rate_bps: f64) -> Result<Trajectory> {
    let s = Scenario {
        num_elements: n,
        num_due,
        num_rue,
        ..cfg.scenario.clone()
    };
    let model = ChannelModel::from_scenario(&s)?;
    let acfg = AllocationConfig {
        min_rate_bps,
        ..cfg.allocation.clone()
    };
    let noise = s.noise_power_w() / s.tx_power_w();
    run_algorithm2(&model, s.num_rbs, &acfg, noise, s.rb_bandwidth_hz, &Substreams::new(cfg.experiment.seed))
}

/// The configured rate requirement followed by no requirement.
fn requirements(cfg: &Config) -> Vec<f64> {
    let r = cfg.allocation.min_rate_bps;
    if r > 0.0 {
        vec![r, 0.0]
    } else {
        vec![0.0]
    }
}

fn window_len(tr: &Trajectory) -> usize {
    (tr.slots.len() / 2).max(1)
}

fn user_label(tr: &Trajectory, k: usize) -> String {
    if k < tr.num_due {
        format!("due{k}")
    } else {
        format!("rue{}", k - tr.num_due)
    }
}

fn fig7(cfg: &Config) -> Result<ResultTable> {
    let mut out = emitter(cfg, "fig7-convergence", &["n", "slot"]);
    let s = &cfg.scenario;
    for n in cfg.experiment.alloc_n_values() {
        let tr = allocation_run(cfg, n, s.num_due, s.num_rue, cfg.allocation.min_rate_bps)?;
        let total = tr.slots.len();
        let stride = total.div_ceil(cfg.experiment.trace_points as usize).max(1);
        let mut rate = StatAccumulator::new();
        let mut power = StatAccumulator::new();
        let mut users = vec![StatAccumulator::new(); tr.final_dual.lambda.len()];
        for (i, rec) in tr.slots.iter().enumerate() {
            rate.push(rec.rates.sum_rate);
            power.push(rec.mean_power);
            for (u, r) in users.iter_mut().zip(&rec.rates.per_ue) {
                u.push(*r);
            }
            if (i + 1) % stride == 0 || i + 1 == total {
                let c = [n.to_string(), (i + 1).to_string()];
                out.mean(&c, "running_sum_rate", &rate);
                out.mean(&c, "running_power", &power);
                let min_user = users.iter().map(StatAccumulator::mean).fold(f64::INFINITY, f64::min);
                out.exact(&c, "running_min_user_rate", min_user, rate.count());
            }
        }
    }
    Ok(out.table)
}

fn fig8(cfg: &Config) -> Result<ResultTable> {
    let mut out = emitter(cfg, "fig8-individual", &["n", "min_rate_bps", "user"]);
    let s = &cfg.scenario;
    for n in cfg.experiment.alloc_n_values() {
        for r in requirements(cfg) {
            let tr = allocation_run(cfg, n, s.num_due, s.num_rue, r)?;
            let w = tr.trailing(window_len(&tr));
            for (k, acc) in w.per_ue.iter().enumerate() {
                let c = [n.to_string(), r.to_string(), user_label(&tr, k)];
                out.mean(&c, "avg_rate", acc);
            }
        }
    }
    Ok(out.table)
}

fn fig9(cfg: &Config) -> Result<ResultTable> {
    let mut out = emitter(cfg, "fig9-sumrate", &["n", "k", "min_rate_bps"]);
    for n in cfg.experiment.alloc_n_values() {
        for k in cfg.experiment.k_values() {
            let (num_due, num_rue) = (k / 2, k - k / 2);
            for r in requirements(cfg) {
                let tr = allocation_run(cfg, n, num_due, num_rue, r)?;
                let w = tr.trailing(window_len(&tr));
                let c = [n.to_string(), k.to_string(), r.to_string()];
                out.mean(&c, "sum_rate", &w.sum_rate);
                out.mean(&c, "avg_power", &w.power);
                let min_user = w.per_ue.iter().map(StatAccumulator::mean).fold(f64::INFINITY, f64::min);
                out.exact(&c, "min_user_rate", min_user, w.sum_rate.count());
                out.exact(&c, "converged", if tr.converged() { 1.0 } else { 0.0 }, tr.slots.len() as u64);
            }
        }
    }
    Ok(out.table)
}

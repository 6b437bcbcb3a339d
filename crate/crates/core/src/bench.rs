//! Seeded Monte Carlo harness: success probability against SNR, cumulative
//! error distributions and correlation/timing totals.
//!
//! Per-trial randomness is derived from `(master_seed, trial)` for the pulse
//! subset and the target, and from `(master_seed, trial, snr)` for the noise.
//! The algorithm is deliberately not part of the seed: every algorithm sees the
//! same draw, so comparisons between them are paired.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Algorithm, ExperimentConfig, IntensityLaw, StoppingRule, SuccessRule, TargetSpec};
use crate::error::{Error, Result};
use crate::gtd::{add_awgn, build_dictionary, select_pulses, synthesize_echo, Dictionary, Scatterer, Scenario, Snr, Target};
use crate::sd_design::{design_sd, SensingDictionary};
use crate::solvers::{a_omp, dense_estimate, omp, omp_sd, SolverOptions, SparseSolution, StopReason};

const PULSE_STREAM: u64 = 1;
const TARGET_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;
const FIXED_PULSE_STREAM: u64 = 4;

/// Seed derived from the first 8 bytes of SHA-256 over the little-endian words.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn snr_word(snr: Snr) -> u64 {
    if snr.is_noiseless() {
        u64::MAX
    } else {
        snr.as_db().to_bits()
    }
}

/// Seed of the single pulse subset used when subsets are not redrawn:
/// `pulses.seed` when set, otherwise derived from the master seed.
pub fn fixed_pulse_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.pulses
        .seed
        .unwrap_or_else(|| derive_seed(cfg.experiment.master_seed, &[FIXED_PULSE_STREAM]))
}

/// Dictionary on the fixed pulse subset of `cfg`.
pub fn fixed_dictionary(cfg: &ExperimentConfig) -> Result<Dictionary> {
    let scenario = cfg.scenario()?;
    let pulses = select_pulses(cfg.pulses.count, scenario.num_pulses, fixed_pulse_seed(cfg), cfg.pulses.scheme)?;
    build_dictionary(&scenario, Some(&pulses))
}

/// Wall-clock seconds spent in `f`; always zero where no clock is available.
#[cfg(not(target_arch = "wasm32"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = std::time::Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

#[cfg(target_arch = "wasm32")]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    (f(), 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub config_id: String,
    pub trial: usize,
    pub algorithm: Algorithm,
    pub snr: Snr,
    pub success: bool,
    /// `‖x̂ − x‖₂ / ‖x‖₂` over the full `D·N` intensity vector.
    pub relative_l2_error: f64,
    pub correlation_count: u64,
    /// Seconds in the solver call only.
    pub wall_time: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Recovered global support, sorted.
    pub support: Vec<usize>,
}

/// Dictionary and sensing dictionary for one pulse subset.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dict: Dictionary,
    pub sd: Option<SensingDictionary>,
}

/// A validated experiment with its fixed-subset artifacts cached.
#[derive(Debug, Clone)]
pub struct Bench {
    cfg: ExperimentConfig,
    id: String,
    scenario: Scenario,
    fixed_target: Option<Target>,
    shared: Option<Prepared>,
    a_omp_mechanism: usize,
}

impl Bench {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        Self::build(cfg, None)
    }

    /// Uses a precomputed sensing dictionary; requires a fixed pulse subset
    /// matching the one the configuration selects.
    pub fn with_sensing_dictionary(cfg: ExperimentConfig, sd: SensingDictionary) -> Result<Self> {
        if cfg.pulses.redraw_per_trial {
            return Err(Error::Config(
                "a precomputed sensing dictionary needs redraw_per_trial = false".into(),
            ));
        }
        Self::build(cfg, Some(sd))
    }

    fn build(cfg: ExperimentConfig, sd: Option<SensingDictionary>) -> Result<Self> {
        cfg.validate()?;
        let scenario = cfg.scenario()?;
        let fixed_target = cfg.target.fixed_target(&scenario)?;
        let a_omp_mechanism = if cfg.experiment.algorithms.contains(&Algorithm::AOmp) {
            cfg.a_omp_mechanism()?
        } else {
            0
        };
        let mut bench = Self {
            id: cfg.id(),
            cfg,
            scenario,
            fixed_target,
            shared: None,
            a_omp_mechanism,
        };
        if !bench.cfg.pulses.redraw_per_trial {
            let seed = fixed_pulse_seed(&bench.cfg);
            let mut prepared = bench.prepare_with_seed(seed, sd.is_none())?;
            if let Some(sd) = sd {
                let blocks = prepared.dict.blocks();
                if sd.w.shape() != blocks[0].shape() {
                    return Err(Error::ShapeMismatch(format!(
                        "sensing dictionary is {:?}, blocks are {:?}",
                        sd.w.shape(),
                        blocks[0].shape()
                    )));
                }
                if !sd.digest.is_empty() && sd.digest != crate::sd_design::blocks_digest(&blocks) {
                    return Err(Error::Config(
                        "sensing dictionary was designed for a different dictionary".into(),
                    ));
                }
                prepared.sd = Some(sd);
            }
            bench.shared = Some(prepared);
        }
        Ok(bench)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Dictionary and W shared by every trial, when the subset is fixed.
    pub fn shared(&self) -> Option<&Prepared> {
        self.shared.as_ref()
    }

    fn needs_sd(&self) -> bool {
        self.cfg.experiment.algorithms.contains(&Algorithm::OmpSd)
    }

    fn prepare_with_seed(&self, seed: u64, design: bool) -> Result<Prepared> {
        let p = &self.cfg.pulses;
        let pulses = select_pulses(p.count, self.scenario.num_pulses, seed, p.scheme)?;
        let dict = build_dictionary(&self.scenario, Some(&pulses))?;
        let sd = if design && self.needs_sd() {
            Some(design_sd(&dict.blocks(), self.cfg.sd.gamma, &self.cfg.sd.design_options())?)
        } else {
            None
        };
        Ok(Prepared { dict, sd })
    }

    /// Dictionary and W for `trial` (borrowed when the subset is fixed).
    pub fn prepare(&self, trial: usize) -> Result<Cow<'_, Prepared>> {
        match &self.shared {
            Some(p) => Ok(Cow::Borrowed(p)),
            None => {
                let seed = derive_seed(self.cfg.experiment.master_seed, &[PULSE_STREAM, trial as u64]);
                Ok(Cow::Owned(self.prepare_with_seed(seed, true)?))
            }
        }
    }

    pub fn target_for(&self, trial: usize) -> Target {
        if let Some(t) = &self.fixed_target {
            return t.clone();
        }
        let TargetSpec::Random { sparsity, intensity, mechanisms } = &self.cfg.target else {
            unreachable!("non-random targets are fixed at construction");
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            self.cfg.experiment.master_seed,
            &[TARGET_STREAM, trial as u64],
        ));
        let n = self.scenario.num_cells();
        let d = self.scenario.num_mechanisms();
        let mut cells = rand::seq::index::sample(&mut rng, n, *sparsity).into_vec();
        cells.sort_unstable();
        let scatterers = cells
            .into_iter()
            .map(|cell| {
                let mechanism = match mechanisms {
                    Some(ms) => ms[rng.random_range(0..ms.len())],
                    None => rng.random_range(0..d),
                };
                let intensity = match intensity {
                    IntensityLaw::Unit => 1.0,
                    IntensityLaw::Uniform { low, high } => rng.random_range(*low..=*high),
                };
                Scatterer { cell, mechanism, intensity }
            })
            .collect();
        Target::new(scatterers)
    }

    /// One algorithm at one SNR.
    pub fn run_trial(&self, trial: usize, algorithm: Algorithm, snr: Snr) -> Result<TrialResult> {
        let prepared = self.prepare(trial)?;
        let target = self.target_for(trial);
        self.score(&prepared, &target, trial, algorithm, snr)
    }

    /// Every configured SNR and algorithm on the draw of `trial`.
    pub fn run_trial_all(&self, trial: usize) -> Result<Vec<TrialResult>> {
        let prepared = self.prepare(trial)?;
        let target = self.target_for(trial);
        let e = &self.cfg.experiment;
        let mut out = Vec::with_capacity(e.snrs.len() * e.algorithms.len());
        for &snr in &e.snrs {
            for &alg in &e.algorithms {
                out.push(self.score(&prepared, &target, trial, alg, snr)?);
            }
        }
        Ok(out)
    }

    fn score(
        &self,
        prepared: &Prepared,
        target: &Target,
        trial: usize,
        algorithm: Algorithm,
        snr: Snr,
    ) -> Result<TrialResult> {
        let dict = &prepared.dict;
        let clean = synthesize_echo(dict, target)?;
        let seed = derive_seed(self.cfg.experiment.master_seed, &[NOISE_STREAM, trial as u64, snr_word(snr)]);
        let y = add_awgn(&clean, snr, seed)?;
        let k_max = self.cfg.k_max();
        let opts = if snr.is_noiseless() {
            SolverOptions::noiseless(&y, k_max)
        } else {
            let power = clean.iter().map(|z| z.norm_sqr()).sum::<f64>() / clean.len() as f64;
            let var = snr.noise_variance(power);
            match self.cfg.experiment.stopping {
                StoppingRule::NoiseThreshold => SolverOptions::awgn(y.len(), var, k_max),
                StoppingRule::L2Bound => SolverOptions::awgn_l2_bound(y.len(), var, k_max),
                StoppingRule::Sparsity => SolverOptions::noiseless(&y, k_max),
            }
        };
        let (sol, wall_time) = timed(|| -> Result<SparseSolution> {
            match algorithm {
                Algorithm::Omp => omp(&y, dict, &opts),
                Algorithm::AOmp => a_omp(&y, dict, self.a_omp_mechanism, &opts),
                Algorithm::OmpSd => {
                    let sd = prepared
                        .sd
                        .as_ref()
                        .ok_or_else(|| Error::Config("omp-sd needs a sensing dictionary".into()))?;
                    omp_sd(&y, dict, sd, &opts)
                }
            }
        });
        let sol = sol?;
        let n = dict.num_cells();
        let mut support = sol.global_support(n);
        support.sort_unstable();
        let truth = target.support(n);
        let matched = match self.cfg.experiment.success {
            SuccessRule::ExactSupport => support == truth,
            SuccessRule::RangeCellsOnly => cell_set(&support, n) == cell_set(&truth, n),
        };
        let x = target.ground_truth(dict.num_mechanisms(), n);
        let xhat = dense_estimate(dict, &sol);
        let diff: f64 = xhat
            .iter()
            .zip(&x)
            .map(|(a, &b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(TrialResult {
            config_id: self.id.clone(),
            trial,
            algorithm,
            snr,
            success: matched && sol.stop_reason != StopReason::Stagnation,
            relative_l2_error: diff / x_norm,
            correlation_count: sol.correlation_count,
            wall_time,
            iterations: sol.iterations,
            stop_reason: sol.stop_reason,
            support,
        })
    }

    /// All trials, ordered by (trial, snr, algorithm) as configured.
    pub fn run(&self) -> Result<Vec<TrialResult>> {
        let trials = self.cfg.experiment.trials;
        let per_trial = self.run_trials(trials)?;
        Ok(per_trial.into_iter().flatten().collect())
    }

    #[cfg(feature = "parallel")]
    fn run_trials(&self, trials: usize) -> Result<Vec<Vec<TrialResult>>> {
        use rayon::prelude::*;
        let work = || (0..trials).into_par_iter().map(|t| self.run_trial_all(t)).collect();
        match self.cfg.experiment.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?
                .install(work),
            None => work(),
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn run_trials(&self, trials: usize) -> Result<Vec<Vec<TrialResult>>> {
        (0..trials).map(|t| self.run_trial_all(t)).collect()
    }
}

fn cell_set(support: &[usize], cells: usize) -> Vec<usize> {
    let mut c: Vec<usize> = support.iter().map(|g| g % cells).collect();
    c.sort_unstable();
    c.dedup();
    c
}

/// Convenience wrapper that builds the bench for a single trial.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize, algorithm: Algorithm, snr: Snr) -> Result<TrialResult> {
    Bench::new(cfg.clone())?.run_trial(trial, algorithm, snr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub snr: Snr,
    pub trials: usize,
    pub successes: usize,
    pub success_probability: f64,
    pub mean_error: f64,
    pub median_error: f64,
    pub correlation_count: u64,
    pub iterations: u64,
    pub wall_time: f64,
}

/// Empirical CDF of the relative error: `fractions[i]` of trials have error
/// at most `thresholds[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdeCurve {
    pub algorithm: Algorithm,
    pub snr: Snr,
    pub thresholds: Vec<f64>,
    pub fractions: Vec<f64>,
}

impl CdeCurve {
    pub fn at(&self, threshold: f64) -> f64 {
        self.thresholds
            .iter()
            .zip(&self.fractions)
            .take_while(|(t, _)| **t <= threshold)
            .last()
            .map_or(0.0, |(_, f)| *f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmTotals {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub correlation_count: u64,
    pub iterations: u64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_id: String,
    pub cells: Vec<CellSummary>,
    pub cde: Vec<CdeCurve>,
    pub totals: Vec<AlgorithmTotals>,
}

/// `10^(-12 + i/4)` for `i = 0..=52`: four points per decade from 1e-12 to 10.
pub fn cde_grid() -> Vec<f64> {
    (0..=52).map(|i| 10f64.powf(-12.0 + i as f64 / 4.0)).collect()
}

fn snr_order(a: Snr, b: Snr) -> std::cmp::Ordering {
    a.as_db().total_cmp(&b.as_db())
}

pub fn aggregate(results: &[TrialResult]) -> Result<BenchReport> {
    let first = results
        .first()
        .ok_or_else(|| Error::Domain("no trial results to aggregate".into()))?;
    if results.iter().any(|r| r.config_id != first.config_id) {
        return Err(Error::ConfigMismatch);
    }
    let mut keys: Vec<(Algorithm, Snr)> = Vec::new();
    for r in results {
        if !keys.iter().any(|&(a, s)| a == r.algorithm && snr_order(s, r.snr).is_eq()) {
            keys.push((r.algorithm, r.snr));
        }
    }
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(snr_order(a.1, b.1)));
    let grid = cde_grid();
    let mut cells = Vec::with_capacity(keys.len());
    let mut cde = Vec::with_capacity(keys.len());
    for (alg, snr) in keys {
        let rows: Vec<&TrialResult> = results
            .iter()
            .filter(|r| r.algorithm == alg && snr_order(r.snr, snr).is_eq())
            .collect();
        let mut errors: Vec<f64> = rows.iter().map(|r| r.relative_l2_error).collect();
        errors.sort_by(f64::total_cmp);
        let trials = rows.len();
        let successes = rows.iter().filter(|r| r.success).count();
        let median = if trials % 2 == 1 {
            errors[trials / 2]
        } else {
            0.5 * (errors[trials / 2 - 1] + errors[trials / 2])
        };
        cells.push(CellSummary {
            algorithm: alg,
            snr,
            trials,
            successes,
            success_probability: successes as f64 / trials as f64,
            mean_error: errors.iter().sum::<f64>() / trials as f64,
            median_error: median,
            correlation_count: rows.iter().map(|r| r.correlation_count).sum(),
            iterations: rows.iter().map(|r| r.iterations as u64).sum(),
            wall_time: rows.iter().map(|r| r.wall_time).sum(),
        });
        let max = *errors.last().expect("nonempty");
        let mut thresholds = grid.clone();
        if max.is_finite() && !thresholds.contains(&max) {
            let at = thresholds.partition_point(|&t| t < max);
            thresholds.insert(at, max);
        }
        let fractions = thresholds
            .iter()
            .map(|&t| errors.partition_point(|&e| e <= t) as f64 / trials as f64)
            .collect();
        cde.push(CdeCurve { algorithm: alg, snr, thresholds, fractions });
    }
    let mut totals: Vec<AlgorithmTotals> = Vec::new();
    for c in &cells {
        match totals.iter_mut().find(|t| t.algorithm == c.algorithm) {
            Some(t) => {
                t.runs += c.trials;
                t.correlation_count += c.correlation_count;
                t.iterations += c.iterations;
                t.wall_time += c.wall_time;
            }
            None => totals.push(AlgorithmTotals {
                algorithm: c.algorithm,
                runs: c.trials,
                correlation_count: c.correlation_count,
                iterations: c.iterations,
                wall_time: c.wall_time,
            }),
        }
    }
    Ok(BenchReport {
        config_id: first.config_id.clone(),
        cells,
        cde,
        totals,
    })
}

impl BenchReport {
    pub fn cell(&self, algorithm: Algorithm, snr: Snr) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && snr_order(c.snr, snr).is_eq())
    }

    pub fn success_probability(&self, algorithm: Algorithm, snr: Snr) -> Option<f64> {
        self.cell(algorithm, snr).map(|c| c.success_probability)
    }

    pub fn curve(&self, algorithm: Algorithm, snr: Snr) -> Option<&CdeCurve> {
        self.cde
            .iter()
            .find(|c| c.algorithm == algorithm && snr_order(c.snr, snr).is_eq())
    }

    pub fn totals_for(&self, algorithm: Algorithm) -> Option<&AlgorithmTotals> {
        self.totals.iter().find(|t| t.algorithm == algorithm)
    }

    /// Copy with every wall-time field zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.cells.iter_mut().for_each(|c| c.wall_time = 0.0);
        r.totals.iter_mut().for_each(|t| t.wall_time = 0.0);
        r
    }
}

/// Runs `bench` and tabulates solver time and correlation counts per algorithm.
pub fn timing_comparison(bench: &Bench) -> Result<Vec<AlgorithmTotals>> {
    let algs = &bench.config().experiment.algorithms;
    if !Algorithm::ALL.iter().all(|a| algs.contains(a)) {
        return Err(Error::Config("timing comparison needs all three algorithms".into()));
    }
    Ok(aggregate(&bench.run()?)?.totals)
}

//! Browser bindings for the HRRP demo page. Each export takes plain numbers
//! and returns a JSON string; failures come back as `{"error": "..."}`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

use hrrp_core::bench::Bench;
use hrrp_core::coherence::{iai_report, IaiReport};
use hrrp_core::config::{StoppingRule, TargetSpec};
use hrrp_core::gtd::{build_dictionary, select_pulses, synthesize_echo, Measurement, PulseScheme};
use hrrp_core::sd_design::{design_sd, DesignMode, DesignOptions};
use hrrp_core::solvers::{a_omp, omp, omp_sd, reconstruct_srp, SolverOptions};
use hrrp_core::{Algorithm, ExperimentConfig, Scenario, SuccessRule, Target};

/// Pulse subsets for the demo: always the reference 300-pulse burst.
const FULL_BURST: usize = 300;
/// Design budget for interactive use.
const DEMO_ITERATIONS: usize = 300;

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn snr_from(db: f64) -> hrrp_core::Snr {
    if db.is_finite() {
        hrrp_core::Snr::Db(db)
    } else {
        hrrp_core::Snr::Noiseless
    }
}

fn demo_options() -> DesignOptions {
    DesignOptions {
        mode: DesignMode::ShiftInvariant,
        max_iterations: DEMO_ITERATIONS,
        ..DesignOptions::default()
    }
}

fn hist_json(r: &IaiReport) -> Value {
    json!({
        "diag": r.diag_histogram.counts,
        "offdiag": r.offdiag_histogram.counts,
        "diag_min": r.diag_min,
        "offdiag_max": r.offdiag_max,
    })
}

pub fn srp_value(snr_db: f64, pulses: usize, seed: u64, noise_seed: u64, algorithm: &str) -> Result<Value, String> {
    let alg: Algorithm = algorithm.parse().map_err(|e: hrrp_core::Error| e.to_string())?;
    let scenario = Scenario::reference();
    let subset = select_pulses(pulses, FULL_BURST, seed, PulseScheme::UniformRandom).map_err(|e| e.to_string())?;
    let dict = build_dictionary(&scenario, Some(&subset)).map_err(|e| e.to_string())?;
    let target = Target::reference(&scenario).map_err(|e| e.to_string())?;
    let snr = snr_from(snr_db);
    let m = Measurement::simulate(&dict, &target, snr, noise_seed).map_err(|e| e.to_string())?;
    let k = target.sparsity();
    let opts = match snr {
        hrrp_core::Snr::Noiseless => SolverOptions::noiseless(&m.samples, k),
        hrrp_core::Snr::Db(_) => {
            let clean = synthesize_echo(&dict, &target).map_err(|e| e.to_string())?;
            let power = clean.iter().map(|v| v.norm_sqr()).sum::<f64>() / pulses as f64;
            SolverOptions::awgn_l2_bound(pulses, snr.noise_variance(power), k)
        }
    };
    let sol = match alg {
        Algorithm::Omp => omp(&m.samples, &dict, &opts),
        Algorithm::AOmp => a_omp(&m.samples, &dict, scenario.num_mechanisms() / 2, &opts),
        Algorithm::OmpSd => {
            let sd = design_sd(&dict.blocks(), 0.5, &demo_options()).map_err(|e| e.to_string())?;
            omp_sd(&m.samples, &dict, &sd, &opts)
        }
    }
    .map_err(|e| e.to_string())?;
    let srp = reconstruct_srp(&sol, &dict);
    let cells = dict.num_cells();
    let truth: Vec<f64> = (0..cells)
        .map(|c| target.scatterers.iter().filter(|s| s.cell == c).map(|s| s.intensity).sum())
        .collect();
    let support: Vec<Value> = sol
        .global_support(cells)
        .into_iter()
        .map(|g| {
            let a = dict.locate(g);
            json!({ "cell": a.cell, "range": srp.range_axis[a.cell], "alpha": scenario.mechanisms[a.mechanism] })
        })
        .collect();
    let true_support: Vec<Value> = target
        .scatterers
        .iter()
        .map(|s| json!({ "cell": s.cell, "range": srp.range_axis[s.cell], "alpha": scenario.mechanisms[s.mechanism] }))
        .collect();
    Ok(json!({
        "algorithm": alg.to_string(),
        "pulses": subset,
        "range": srp.range_axis,
        "magnitude": srp.magnitude,
        "truth": truth,
        "support": support,
        "true_support": true_support,
        "iterations": sol.iterations,
        "correlations": sol.correlation_count,
        "stop": sol.stop_reason.to_string(),
    }))
}

pub fn iai_value(pulses: usize, seed: u64) -> Result<Value, String> {
    let scenario = Scenario::reference();
    let subset = select_pulses(pulses, FULL_BURST, seed, PulseScheme::UniformRandom).map_err(|e| e.to_string())?;
    let dict = build_dictionary(&scenario, Some(&subset)).map_err(|e| e.to_string())?;
    let blocks = dict.blocks();
    let sd = design_sd(&blocks, 0.5, &demo_options()).map_err(|e| e.to_string())?;
    let original = iai_report(&blocks[0], &blocks).map_err(|e| e.to_string())?;
    let designed = iai_report(&sd.w, &blocks).map_err(|e| e.to_string())?;
    let base = hrrp_core::evaluate_sd(&blocks[0], &blocks).map_err(|e| e.to_string())?;
    Ok(json!({
        "edges": original.diag_histogram.edges,
        "original": hist_json(&original),
        "designed": hist_json(&designed),
        "bounds": {
            "original": { "b1": base.b1, "b2": base.b2 },
            "designed": { "b1": sd.b1, "b2": sd.b2 },
        },
        "iterations": sd.trace.iterations,
    }))
}

pub fn sweep_value(trials: usize, seed: u64) -> Result<Value, String> {
    let mut cfg = ExperimentConfig::reference(trials, seed);
    cfg.target = TargetSpec::Reference;
    cfg.experiment.success = SuccessRule::RangeCellsOnly;
    cfg.experiment.stopping = StoppingRule::L2Bound;
    cfg.validate().map_err(|e| e.to_string())?;
    let bench = Bench::new(cfg.clone()).map_err(|e| e.to_string())?;
    let results = bench.run().map_err(|e| e.to_string())?;
    let report = hrrp_core::aggregate(&results).map_err(|e| e.to_string())?;
    let snrs: Vec<String> = cfg.experiment.snrs.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Value> = cfg
        .experiment
        .algorithms
        .iter()
        .map(|&a| {
            let p: Vec<f64> = cfg
                .experiment
                .snrs
                .iter()
                .map(|&s| report.success_probability(a, s).unwrap_or(f64::NAN))
                .collect();
            json!({ "algorithm": a.to_string(), "success": p })
        })
        .collect();
    Ok(json!({ "trials": trials, "snrs": snrs, "rows": rows }))
}

/// Recovers the reference target from a random pulse subset.
/// `snr_db` may be NaN or infinite for a noiseless echo.
#[wasm_bindgen]
pub fn recover_srp(snr_db: f64, pulses: u32, seed: u32, noise_seed: u32, algorithm: &str) -> String {
    respond(srp_value(snr_db, pulses as usize, seed as u64, noise_seed as u64, algorithm))
}

/// Inter-atom-interference histograms before and after sensing-dictionary design.
#[wasm_bindgen]
pub fn iai_histograms(pulses: u32, seed: u32) -> String {
    respond(iai_value(pulses as usize, seed as u64))
}

/// Small Monte Carlo sweep of success probability over the reference SNRs.
#[wasm_bindgen]
pub fn success_sweep(trials: u32, seed: u32) -> String {
    respond(sweep_value(trials as usize, seed as u64))
}

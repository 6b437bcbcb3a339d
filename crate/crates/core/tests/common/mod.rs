//! Brute-force oracles and property checks shared by the integration tests
//! and the acceptance runner. Nothing here calls the library's linear algebra.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hrrp_core::bench::Bench;
use hrrp_core::coherence::mip;
use hrrp_core::gtd::{build_dictionary, select_pulses, Dictionary, PulseScheme, Scenario};
use hrrp_core::numerics::{normalize_columns, ComplexMatrix, C64};
use hrrp_core::sd_design::{design_sd, evaluate_sd, real_embed, DesignMode, DesignOptions, SensingDictionary};
use hrrp_core::solvers::{a_omp, omp, omp_sd, SolverOptions, SparseSolution};
use hrrp_core::{Algorithm, ExperimentConfig, Snr, TrialResult};

// ---------------------------------------------------------------- oracles

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn random_c(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| random_c(rng))
}

/// Σ conj(a_i) b_i, written out.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    let mut s = zero();
    for i in 0..a.len() {
        s += a[i].conj() * b[i];
    }
    s
}

/// Solves the normal equations `(AᴴA)x = Aᴴy` by Gaussian elimination with partial pivoting.
pub fn normal_equations(cols: &[&[C64]], y: &[C64]) -> Vec<C64> {
    let k = cols.len();
    let mut a = vec![vec![zero(); k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = inner(cols[i], cols[j]);
        }
        a[i][k] = inner(cols[i], y);
    }
    for p in 0..k {
        let piv = (p..k).max_by(|&r, &s| a[r][p].norm().total_cmp(&a[s][p].norm())).unwrap();
        a.swap(p, piv);
        for r in p + 1..k {
            let f = a[r][p] / a[p][p];
            for c in p..=k {
                let v = a[p][c];
                a[r][c] -= f * v;
            }
        }
    }
    let mut x = vec![zero(); k];
    for i in (0..k).rev() {
        let mut s = a[i][k];
        for j in i + 1..k {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    x
}

pub fn residual(cols: &[&[C64]], y: &[C64]) -> Vec<C64> {
    let mut r = y.to_vec();
    if cols.is_empty() {
        return r;
    }
    let x = normal_equations(cols, y);
    for (c, xi) in cols.iter().zip(&x) {
        for i in 0..r.len() {
            r[i] -= c[i] * xi;
        }
    }
    r
}

/// First index of the largest magnitude.
pub fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug)]
pub enum Rule<'a> {
    Full,
    Block(usize),
    Sensing(&'a ComplexMatrix),
}

/// Relative gap below which two candidate scores count as tied.
pub const TIE: f64 = 1e-9;

pub enum Step {
    Unique,
    Tie,
}

/// Checks that `pick` maximizes `scores`; a pick within `TIE` of the maximum is a tie.
fn judge(scores: &[f64], pick: usize) -> Result<Step, String> {
    let best = first_argmax(scores);
    let max = scores[best];
    if pick == best {
        return Ok(Step::Unique);
    }
    if scores[pick] >= max * (1.0 - TIE) {
        Ok(Step::Tie)
    } else {
        Err(format!("picked {pick} (score {:.15}), best is {best} (score {max:.15})", scores[pick]))
    }
}

/// Replays a greedy pursuit along the solver's path: every step recomputes
/// the least-squares residual on the atoms chosen so far and scans every
/// candidate. Returns how many steps were ties.
pub fn replay(dict: &Dictionary, y: &[C64], support: &[usize], rule: Rule) -> Result<usize, String> {
    let (n, d) = (dict.num_cells(), dict.num_mechanisms());
    let atoms = dict.atoms();
    let mut ties = 0;
    let mut count = |s: Step| {
        if let Step::Tie = s {
            ties += 1;
        }
    };
    for (step, &g) in support.iter().enumerate() {
        let chosen: Vec<&[C64]> = support[..step].iter().map(|&g| atoms.column(g)).collect();
        let r = residual(&chosen, y);
        let at = |e: String| format!("step {step}: {e}");
        match rule {
            Rule::Full => {
                let c: Vec<f64> = (0..n * d).map(|g| inner(atoms.column(g), &r).norm()).collect();
                count(judge(&c, g).map_err(at)?);
            }
            Rule::Block(m) => {
                if g / n != m {
                    return Err(at(format!("atom {g} outside block {m}")));
                }
                let c: Vec<f64> = (0..n).map(|t| inner(atoms.column(m * n + t), &r).norm()).collect();
                count(judge(&c, g % n).map_err(at)?);
            }
            Rule::Sensing(w) => {
                let c: Vec<f64> = (0..n).map(|t| inner(w.column(t), &r).norm()).collect();
                count(judge(&c, g % n).map_err(at)?);
                let t = g % n;
                let e: Vec<f64> = (0..d).map(|m| inner(atoms.column(m * n + t), &r).norm()).collect();
                count(judge(&e, g / n).map_err(at)?);
            }
        }
    }
    Ok(ties)
}

/// `max |a_iᴴa_j| / (‖a_i‖‖a_j‖)` over `i ≠ j`.
pub fn brute_mip(m: &ComplexMatrix) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..m.cols() {
        for j in 0..m.cols() {
            if i != j {
                let a = m.column(i);
                let b = m.column(j);
                let v = inner(a, b).norm() / (inner(a, a).re.sqrt() * inner(b, b).re.sqrt());
                best = best.max(v);
            }
        }
    }
    best
}

/// `(max |1 − w_lᴴφ_{d,l}|, max_{k≠l} |w_kᴴφ_{d,l}|)` by explicit loops.
pub fn brute_bounds(w: &ComplexMatrix, blocks: &[ComplexMatrix]) -> (f64, f64) {
    let (mut b1, mut b2): (f64, f64) = (0.0, 0.0);
    for block in blocks {
        for k in 0..w.cols() {
            for l in 0..block.cols() {
                let mut z = zero();
                for i in 0..w.rows() {
                    z += w.get(i, k).conj() * block.get(i, l);
                }
                if k == l {
                    b1 = b1.max((C64::new(1.0, 0.0) - z).norm());
                } else {
                    b2 = b2.max(z.norm());
                }
            }
        }
    }
    (b1, b2)
}

/// Eight of sixteen pulses, ten range cells, two mechanisms.
pub fn small_dictionary(seed: u64) -> Dictionary {
    let s = Scenario::new(1.0e9, 10.0e6, 16, 0.0, 9.375, vec![0.0, 1.0]).unwrap();
    let pulses = select_pulses(8, 16, seed, PulseScheme::UniformRandom).unwrap();
    let d = build_dictionary(&s, Some(&pulses)).unwrap();
    assert_eq!((d.num_rows(), d.num_cells(), d.num_mechanisms()), (8, 10, 2));
    d
}

fn sensing(w: ComplexMatrix) -> SensingDictionary {
    SensingDictionary {
        w,
        b1: 0.0,
        b2: 0.0,
        gamma: 0.5,
        trace: Default::default(),
        digest: String::new(),
    }
}

pub struct OracleSummary {
    pub instances: usize,
    pub steps_compared: usize,
    /// Steps where the pick was one of several equal scores.
    pub ties: usize,
    pub mismatches: Vec<String>,
    pub mip_max_dev: f64,
    pub bounds_max_dev: f64,
}

fn compare(label: &str, dict: &Dictionary, y: &[C64], sol: &SparseSolution, rule: Rule, s: &mut OracleSummary) {
    let support = sol.global_support(dict.num_cells());
    s.steps_compared += support.len();
    match replay(dict, y, &support, rule) {
        Ok(t) => s.ties += t,
        Err(e) => s.mismatches.push(format!("{label}: {e}")),
    }
}

/// Every measurement built from one or two atoms (all supports), plus random
/// measurements, on several pulse subsets; each solver's picks are replayed.
pub fn oracle_suite(subsets: u64) -> OracleSummary {
    let mut s = OracleSummary {
        instances: 0,
        steps_compared: 0,
        ties: 0,
        mismatches: Vec::new(),
        mip_max_dev: 0.0,
        bounds_max_dev: 0.0,
    };
    for seed in 0..subsets {
        let dict = small_dictionary(seed);
        let (n, nd) = (dict.num_cells(), dict.num_atoms());
        let atoms = dict.atoms();
        let blocks = dict.blocks();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);

        let designed = design_sd(
            &blocks,
            0.5,
            &DesignOptions {
                max_iterations: 60,
                ..DesignOptions::default()
            },
        )
        .unwrap();
        let random_w = sensing(normalize_columns(&random_matrix(8, n, &mut rng)).unwrap());

        let mut measurements: Vec<Vec<C64>> = Vec::new();
        for i in 0..nd {
            for j in i..nd {
                let (a, b) = (random_c(&mut rng), random_c(&mut rng));
                let mut y = vec![zero(); 8];
                for r in 0..8 {
                    y[r] = atoms.get(r, i) * a + if j != i { atoms.get(r, j) * b } else { zero() };
                }
                measurements.push(y);
            }
        }
        for _ in 0..20 {
            measurements.push((0..8).map(|_| random_c(&mut rng)).collect());
        }

        for (idx, y) in measurements.iter().enumerate() {
            s.instances += 1;
            // stop at an exact fit: picks made on a roundoff-level residual are arbitrary
            let opts = SolverOptions::new(1e-9 * inner(y, y).re.sqrt(), 4);
            let sol = omp(y, &dict, &opts).unwrap();
            compare(&format!("omp subset {seed} y {idx}"), &dict, y, &sol, Rule::Full, &mut s);
            for m in 0..dict.num_mechanisms() {
                let sol = a_omp(y, &dict, m, &opts).unwrap();
                compare(&format!("a-omp[{m}] subset {seed} y {idx}"), &dict, y, &sol, Rule::Block(m), &mut s);
            }
            for (name, sd) in [("designed", &designed), ("random", &random_w)] {
                let sol = omp_sd(y, &dict, sd, &opts).unwrap();
                let rule = Rule::Sensing(&sd.w);
                compare(&format!("omp-sd/{name} subset {seed} y {idx}"), &dict, y, &sol, rule, &mut s);
            }
        }

        let dev = (mip(atoms).unwrap() - brute_mip(atoms)).abs();
        s.mip_max_dev = s.mip_max_dev.max(dev);
        let random_unit = normalize_columns(&random_matrix(8, 12, &mut rng)).unwrap();
        s.mip_max_dev = s.mip_max_dev.max((mip(&random_unit).unwrap() - brute_mip(&random_unit)).abs());

        for w in [&designed.w, &random_w.w, &blocks[0], &random_matrix(8, n, &mut rng)] {
            let got = evaluate_sd(w, &blocks).unwrap();
            let (b1, b2) = brute_bounds(w, &blocks);
            s.bounds_max_dev = s.bounds_max_dev.max((got.b1 - b1).abs()).max((got.b2 - b2).abs());
        }
    }
    s
}

// ------------------------------------------------------------- properties

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn run(name: &str, cases: u32, strategy: impl Strategy<Value = u64>, f: impl Fn(u64) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&strategy, f).map_err(|e| format!("{name}: {e}"))
}

/// Random small instance: dictionary, a measurement with 1..=3 atoms plus optional noise.
fn instance(seed: u64) -> (Dictionary, Vec<C64>) {
    let dict = small_dictionary(seed % 64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=3);
    let mut y = vec![zero(); dict.num_rows()];
    for _ in 0..k {
        let g = rng.random_range(0..dict.num_atoms());
        let c = random_c(&mut rng);
        for (o, a) in y.iter_mut().zip(dict.atom(g)) {
            *o += a * c;
        }
    }
    if rng.random::<bool>() {
        for o in &mut y {
            *o += random_c(&mut rng) * 0.05;
        }
    }
    (dict, y)
}

fn all_solutions(dict: &Dictionary, y: &[C64], seed: u64) -> Vec<(&'static str, SparseSolution)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let w = sensing(normalize_columns(&random_matrix(dict.num_rows(), dict.num_cells(), &mut rng)).unwrap());
    let opts = SolverOptions {
        record_residuals: true,
        ..SolverOptions::new(1e-10, 6)
    };
    vec![
        ("omp", omp(y, dict, &opts).unwrap()),
        ("a-omp", a_omp(y, dict, 1, &opts).unwrap()),
        ("omp-sd", omp_sd(y, dict, &w, &opts).unwrap()),
    ]
}

pub fn residual_history_is_monotone() -> Result<(), String> {
    run("residual history", 128, any::<u64>(), |seed| {
        let (dict, y) = instance(seed);
        let scale = inner(&y, &y).re.sqrt();
        for (name, sol) in all_solutions(&dict, &y, seed) {
            for w in sol.residual_norm_history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * scale, "{name}: {:?}", sol.residual_norm_history);
            }
        }
        Ok(())
    })
}

pub fn residual_is_orthogonal_to_support() -> Result<(), String> {
    run("residual orthogonality", 128, any::<u64>(), |seed| {
        let (dict, y) = instance(seed);
        let scale = inner(&y, &y).re.sqrt();
        for (name, sol) in all_solutions(&dict, &y, seed) {
            let support = sol.global_support(dict.num_cells());
            for (k, r) in sol.residuals.as_ref().unwrap().iter().enumerate() {
                for &g in &support[..=k] {
                    let c = inner(dict.atom(g), r).norm();
                    prop_assert!(c <= 1e-8 * scale, "{name} step {k}: |aᴴr| = {c:e}");
                }
            }
        }
        Ok(())
    })
}

pub fn normalization_is_idempotent() -> Result<(), String> {
    run("normalization idempotence", 128, any::<u64>(), |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, cols) = (rng.random_range(1..12), rng.random_range(1..12));
        let m = random_matrix(rows, cols, &mut rng);
        let once = normalize_columns(&m).unwrap();
        let twice = normalize_columns(&once).unwrap();
        for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
            prop_assert!((a - b).norm() <= 1e-12, "{a} vs {b}");
        }
        for c in 0..cols {
            prop_assert!((inner(once.column(c), once.column(c)).re - 1.0).abs() <= 1e-12);
        }
        Ok(())
    })
}

/// `|wᴴφ|` and `|1 − wᴴφ|` through the real embedding equal their complex values.
pub fn cone_identity_holds() -> Result<(), String> {
    run("second-order-cone identity", 256, any::<u64>(), |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = rng.random_range(1..40);
        let w: Vec<C64> = (0..len).map(|_| random_c(&mut rng)).collect();
        let phi: Vec<C64> = (0..len).map(|_| random_c(&mut rng)).collect();
        let z = inner(&w, &phi);
        let (re, im) = real_embed(&phi).correlate(&real_embed(&w).tilde);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        prop_assert!(rel(re.hypot(im), z.norm()) <= 1e-10);
        prop_assert!(rel((1.0 - re).hypot(im), (C64::new(1.0, 0.0) - z).norm()) <= 1e-10);
        Ok(())
    })
}

/// The smoothed objective never increases, the reported bounds are exact for
/// the returned W, and the design never ends worse than its starting point.
pub fn design_is_monotone() -> Result<(), String> {
    let modes = prop_oneof![Just(DesignMode::Joint), Just(DesignMode::PerColumn), Just(DesignMode::ShiftInvariant)];
    runner(12)
        .run(&(any::<u64>(), modes), |(seed, mode)| {
            let dict = small_dictionary(seed % 64);
            let blocks = dict.blocks();
            let opts = DesignOptions {
                max_iterations: 150,
                mode,
                ..DesignOptions::default()
            };
            let sd = match design_sd(&blocks, 0.5, &opts) {
                Ok(sd) => sd,
                // random subsets are not lag-structured; only that mode may refuse
                Err(hrrp_core::Error::NotShiftStructured(_)) if mode == DesignMode::ShiftInvariant => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            for w in sd.trace.objective.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{mode:?}: {} -> {}", w[0], w[1]);
            }
            let exact = evaluate_sd(&sd.w, &blocks).unwrap();
            prop_assert!((exact.b1 - sd.b1).abs() < 1e-12 && (exact.b2 - sd.b2).abs() < 1e-12);
            let base = evaluate_sd(&blocks[0], &blocks).unwrap();
            prop_assert!(sd.objective() <= base.objective(0.5) + 1e-12);
            Ok(())
        })
        .map_err(|e| format!("design monotonicity: {e}"))
}

pub fn strip_timing(mut r: Vec<TrialResult>) -> Vec<TrialResult> {
    for t in &mut r {
        t.wall_time = 0.0;
    }
    r
}

/// Small reference-scenario benchmark with per-trial pulse draws.
pub fn small_bench_config(master_seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::reference(4, master_seed);
    cfg.experiment.snrs = vec![Snr::Db(10.0), Snr::Db(20.0), Snr::Noiseless];
    cfg.sd.max_iterations = 80;
    cfg
}

/// Same config and seed give identical results, whatever the worker count
/// or the order trials are run in.
pub fn bench_is_deterministic() -> Result<(), String> {
    let mut one = small_bench_config(99);
    one.experiment.threads = Some(1);
    let mut two = one.clone();
    two.experiment.threads = Some(2);
    let a = Bench::new(one.clone()).map_err(|e| e.to_string())?.run().map_err(|e| e.to_string())?;
    let b = Bench::new(two).map_err(|e| e.to_string())?.run().map_err(|e| e.to_string())?;
    if strip_timing(a.clone()) != strip_timing(b.clone()) {
        return Err("results differ between one and two workers".into());
    }
    let rep_a = hrrp_core::aggregate(&a).map_err(|e| e.to_string())?.without_timing();
    let rep_b = hrrp_core::aggregate(&b).map_err(|e| e.to_string())?.without_timing();
    if rep_a != rep_b {
        return Err("reports differ between one and two workers".into());
    }
    let fresh = Bench::new(one.clone()).map_err(|e| e.to_string())?;
    for t in (0..one.experiment.trials).rev() {
        for &alg in &[Algorithm::OmpSd, Algorithm::AOmp, Algorithm::Omp] {
            for &snr in one.experiment.snrs.iter().rev() {
                let r = fresh.run_trial(t, alg, snr).map_err(|e| e.to_string())?;
                let mut want = a
                    .iter()
                    .find(|x| x.trial == t && x.algorithm == alg && x.snr == snr)
                    .cloned()
                    .ok_or("missing result")?;
                want.wall_time = r.wall_time;
                if r != want {
                    return Err(format!("trial {t} {alg} {snr} changed when run out of order"));
                }
            }
        }
    }
    Ok(())
}

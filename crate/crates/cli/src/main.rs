//! `hrrp`: sensing-dictionary design, single-shot recovery, Monte Carlo
//! benchmarks and figure export for sparse stepped-frequency HRRP synthesis.

mod io;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hrrp_core::bench::{aggregate, fixed_dictionary, Bench, BenchReport, TrialResult};
use hrrp_core::coherence::{block_coherence, iai_report, IaiReport};
use hrrp_core::config::StoppingRule;
use hrrp_core::gtd::{build_dictionary, Measurement};
use hrrp_core::numerics::norm2;
use hrrp_core::sd_design::{design_sd, evaluate_sd, SensingDictionary};
use hrrp_core::solvers::{a_omp, omp, omp_sd, reconstruct_srp, SolverOptions};
use hrrp_core::{Algorithm, ExperimentConfig, Snr};

use plot::{histogram_plot, line_plot, stem_plot, LinePlot, Series};

#[derive(Debug)]
pub enum CliError {
    /// Bad input: unreadable or invalid configuration, malformed files, dimension mismatches.
    Invalid(String),
    /// A computation failed.
    Failed(String),
    /// Some outputs were produced but part of the work failed.
    Partial(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Invalid(_) => 2,
            Self::Failed(_) | Self::Partial(_) => 1,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Invalid(format!("{}: {e}", path.display()))
    }

    pub fn csv(path: &Path, e: csv::Error) -> Self {
        Self::Failed(format!("{}: {e}", path.display()))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Invalid(m) => write!(f, "invalid input: {m}"),
            Self::Failed(m) => write!(f, "failed: {m}"),
            Self::Partial(m) => write!(f, "partial failure: {m}"),
        }
    }
}

impl From<hrrp_core::Error> for CliError {
    fn from(e: hrrp_core::Error) -> Self {
        use hrrp_core::Error as E;
        match e {
            E::Config(_)
            | E::Parse(_)
            | E::InvalidScenario(_)
            | E::InvalidTarget(_)
            | E::InvalidPulses(_)
            | E::ShapeMismatch(_)
            | E::Io(_) => Self::Invalid(e.to_string()),
            _ => Self::Failed(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "hrrp", version, about = "Sparse HRRP synthesis for stepped-frequency radar")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed override: the master seed for `bench`, the pulse-subset seed otherwise.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo trials.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Design a sensing dictionary for the configured pulse subset.
    DesignSd(Common),
    /// Synthesize a measurement file from the configured target.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// SNR in dB, or "noiseless".
        #[arg(long, default_value = "noiseless")]
        snr: Snr,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
    },
    /// Recover a synthetic range profile from a measurement file.
    Recover {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        measurement: PathBuf,
        #[arg(long, default_value = "omp-sd")]
        algorithm: Algorithm,
        /// Precomputed sensing dictionary (omp-sd only).
        #[arg(long)]
        sd: Option<PathBuf>,
        /// Residual threshold override.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Run the Monte Carlo benchmark and write tables and figures.
    Bench(Common),
    /// Coherence and inter-atom-interference report, original vs designed.
    Coherence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sd: Option<PathBuf>,
    },
    /// Re-aggregate a per-trial table into summary tables and figures.
    Export {
        /// `trials.csv` written by `bench`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::DesignSd(c) => cmd_design_sd(&c),
        Command::Simulate { common, snr, noise_seed } => cmd_simulate(&common, snr, noise_seed),
        Command::Recover { common, measurement, algorithm, sd, epsilon, k_max } => {
            cmd_recover(&common, &measurement, algorithm, sd.as_deref(), epsilon, k_max)
        }
        Command::Bench(c) => cmd_bench(&c),
        Command::Coherence { common, sd } => cmd_coherence(&common, sd.as_deref()),
        Command::Export { input, out } => cmd_export(&input, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hrrp: {e}");
            ExitCode::from(e.code())
        }
    }
}

/// Loads the configuration and resolves `sd.path` against its directory.
fn load_config(c: &Common, seed_is_master: bool) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&c.config).map_err(|e| CliError::io(&c.config, e))?;
    let mut cfg = ExperimentConfig::from_toml_str(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", c.config.display())))?;
    if let Some(s) = c.seed {
        if seed_is_master {
            cfg.experiment.master_seed = s;
        } else {
            cfg.pulses.seed = Some(s);
        }
    }
    if let Some(t) = c.threads {
        cfg.experiment.threads = Some(t);
    }
    if let Some(p) = &cfg.sd.path {
        let base = c.config.parent().unwrap_or(Path::new("."));
        cfg.sd.path = Some(base.join(p).to_string_lossy().into_owned());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| CliError::io(p, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn load_sd(path: &Path) -> Result<SensingDictionary> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    SensingDictionary::from_text(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn cmd_design_sd(c: &Common) -> Result<()> {
    let cfg = load_config(c, false)?;
    let dict = fixed_dictionary(&cfg)?;
    let blocks = dict.blocks();
    let sd = design_sd(&blocks, cfg.sd.gamma, &cfg.sd.design_options())?;
    let base = evaluate_sd(&blocks[0], &blocks)?;
    out_dir(&c.out)?;
    write(&c.out.join("sd.txt"), &sd.to_text())?;
    let mut trace = String::from("# hrrp-sd-trace v1\nstep,smoothed_objective,exact_objective\n");
    for (i, (a, b)) in sd.trace.objective.iter().zip(&sd.trace.exact_objective).enumerate() {
        trace.push_str(&format!("{i},{a:?},{b:?}\n"));
    }
    write(&c.out.join("sd_trace.csv"), &trace)?;
    println!("pulses      {:?}", dict.retained_pulses());
    println!("baseline    b1 = {:.4}  b2 = {:.4}  (W = first block)", base.b1, base.b2);
    println!(
        "designed    b1 = {:.4}  b2 = {:.4}  b1 + {}·b2 = {:.4}",
        sd.b1,
        sd.b2,
        cfg.sd.gamma,
        sd.objective()
    );
    println!("iterations  {}  converged {}", sd.trace.iterations, sd.trace.converged);
    if !sd.trace.converged {
        eprintln!("hrrp: warning: design stopped at the iteration cap before converging");
    }
    if c.verbose {
        println!("wrote {}", c.out.join("sd.txt").display());
    }
    Ok(())
}

fn cmd_simulate(c: &Common, snr: Snr, noise_seed: u64) -> Result<()> {
    let mut cfg = load_config(c, false)?;
    cfg.experiment.algorithms = vec![Algorithm::Omp];
    cfg.pulses.redraw_per_trial = false;
    cfg.sd.path = None;
    let bench = Bench::new(cfg)?;
    let dict = &bench.shared().expect("fixed subset").dict;
    let target = bench.target_for(0);
    let m = Measurement::simulate(dict, &target, snr, noise_seed)?;
    out_dir(&c.out)?;
    let path = c.out.join("measurement.txt");
    io::write_measurement(&path, &m)?;
    println!("wrote {} ({} samples, snr {})", path.display(), m.samples.len(), m.snr);
    Ok(())
}

/// Noise variance implied by a measurement's SNR, assuming signal and noise add in power.
fn noise_variance_estimate(m: &Measurement) -> f64 {
    match m.snr {
        Snr::Noiseless => 0.0,
        Snr::Db(db) => {
            let power = norm2(&m.samples).powi(2) / m.samples.len().max(1) as f64;
            power / (1.0 + 10f64.powf(db / 10.0))
        }
    }
}

fn cmd_recover(
    c: &Common,
    measurement: &Path,
    algorithm: Algorithm,
    sd_path: Option<&Path>,
    epsilon: Option<f64>,
    k_max: Option<usize>,
) -> Result<()> {
    let cfg = load_config(c, false)?;
    let m = io::read_measurement(measurement)?;
    if m.samples.len() != cfg.pulses.count {
        return Err(CliError::Invalid(format!(
            "measurement length mismatch: expected {} samples (pulses.count), found {}",
            cfg.pulses.count,
            m.samples.len()
        )));
    }
    let scenario = cfg.scenario()?;
    let dict = build_dictionary(&scenario, Some(&m.retained_pulses))?;
    let y = &m.samples;
    let rows = y.len();
    let k = k_max.unwrap_or_else(|| cfg.k_max()).min(rows);
    let opts = match (epsilon, m.snr) {
        (Some(e), _) => SolverOptions::new(e, k),
        (None, Snr::Noiseless) => SolverOptions::noiseless(y, k),
        (None, _) => {
            let var = noise_variance_estimate(&m);
            match cfg.experiment.stopping {
                StoppingRule::NoiseThreshold => SolverOptions::awgn(rows, var, k),
                StoppingRule::L2Bound => SolverOptions::awgn_l2_bound(rows, var, k),
                StoppingRule::Sparsity => SolverOptions::noiseless(y, k),
            }
        }
    };
    let sol = match algorithm {
        Algorithm::Omp => omp(y, &dict, &opts)?,
        Algorithm::AOmp => a_omp(y, &dict, cfg.a_omp_mechanism()?, &opts)?,
        Algorithm::OmpSd => {
            let sd = match sd_path.map(PathBuf::from).or(cfg.sd.path.as_ref().map(PathBuf::from)) {
                Some(p) => load_sd(&p)?,
                None => {
                    if c.verbose {
                        println!("designing a sensing dictionary for the measurement's pulses");
                    }
                    design_sd(&dict.blocks(), cfg.sd.gamma, &cfg.sd.design_options())?
                }
            };
            if sd.w.shape() != (rows, dict.num_cells()) {
                return Err(CliError::Invalid(format!(
                    "sensing dictionary is {:?}, expected {:?}",
                    sd.w.shape(),
                    (rows, dict.num_cells())
                )));
            }
            omp_sd(y, &dict, &sd, &opts)?
        }
    };
    let srp = reconstruct_srp(&sol, &dict);
    out_dir(&c.out)?;
    io::write_srp(&c.out.join("srp.csv"), &srp)?;
    write(
        &c.out.join("srp.svg"),
        &stem_plot(
            &format!("Synthetic range profile ({algorithm})"),
            "range (m)",
            "|intensity|",
            &srp.range_axis,
            &srp.magnitude,
        ),
    )?;
    println!("algorithm   {algorithm}");
    println!("iterations  {}  correlations {}  stop {}", sol.iterations, sol.correlation_count, sol.stop_reason);
    let support = sol.global_support(dict.num_cells());
    let amps = hrrp_core::solvers::to_intensities(&dict, &support, &sol.coefficients);
    println!("{:>8} {:>10} {:>9} {:>12}", "cell", "range_m", "alpha", "|intensity|");
    for (g, a) in support.iter().zip(&amps) {
        let at = dict.locate(*g);
        println!(
            "{:>8} {:>10.3} {:>9} {:>12.6}",
            at.cell,
            srp.range_axis[at.cell],
            scenario.mechanisms[at.mechanism],
            a.norm()
        );
    }
    Ok(())
}

fn iai_figures(out: &Path, blocks: &[hrrp_core::ComplexMatrix], sd: Option<&SensingDictionary>) -> Result<Vec<(String, IaiReport)>> {
    let mut reports = vec![("original".to_string(), iai_report(&blocks[0], blocks)?)];
    if let Some(sd) = sd {
        reports.push(("designed".to_string(), iai_report(&sd.w, blocks)?));
    }
    for (name, r) in &reports {
        let svg = histogram_plot(
            &format!("Inter-atom interference ({name})"),
            "|correlation|",
            &r.diag_histogram.edges,
            &[("diagonal", &r.diag_histogram.counts), ("off-diagonal", &r.offdiag_histogram.counts)],
        );
        write(&out.join(format!("iai_{name}.svg")), &svg)?;
    }
    let pairs: Vec<(&str, &IaiReport)> = reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
    io::write_histograms(&out.join("iai_histograms.csv"), &pairs)?;
    Ok(reports)
}

fn cmd_coherence(c: &Common, sd_path: Option<&Path>) -> Result<()> {
    let cfg = load_config(c, false)?;
    let dict = fixed_dictionary(&cfg)?;
    let blocks = dict.blocks();
    let bc = block_coherence(&blocks)?;
    let sd = match sd_path.map(PathBuf::from).or(cfg.sd.path.as_ref().map(PathBuf::from)) {
        Some(p) => load_sd(&p)?,
        None => design_sd(&blocks, cfg.sd.gamma, &cfg.sd.design_options())?,
    };
    if sd.w.shape() != blocks[0].shape() {
        return Err(CliError::Invalid(format!(
            "sensing dictionary is {:?}, blocks are {:?}",
            sd.w.shape(),
            blocks[0].shape()
        )));
    }
    out_dir(&c.out)?;
    let reports = iai_figures(&c.out, &blocks, Some(&sd))?;
    let base = evaluate_sd(&blocks[0], &blocks)?;
    let designed = evaluate_sd(&sd.w, &blocks)?;
    io::write_coherence(
        &c.out.join("coherence.csv"),
        &bc,
        &[
            ("original_b1", base.b1),
            ("original_b2", base.b2),
            ("original_diag_min", reports[0].1.diag_min),
            ("designed_b1", designed.b1),
            ("designed_b2", designed.b2),
            ("designed_diag_min", reports[1].1.diag_min),
        ],
    )?;
    let f = |v: f64| if v.is_nan() { "n/a".to_string() } else { format!("{v:.4}") };
    println!("mip                       {}", f(bc.mip));
    println!("mixed-block maximum       {}", f(bc.mixed_block_max));
    println!(
        "same-cell cross-mechanism {} .. {}",
        f(bc.cross_mechanism_diag_min),
        f(bc.cross_mechanism_diag_max)
    );
    println!("original  b1 {:.4}  b2 {:.4}", base.b1, base.b2);
    println!("designed  b1 {:.4}  b2 {:.4}", designed.b1, designed.b2);
    Ok(())
}

fn snr_file_label(s: Snr) -> String {
    match s {
        Snr::Noiseless => "noiseless".into(),
        Snr::Db(x) => format!("{x}dB").replace('-', "m").replace('.', "p"),
    }
}

/// Summary tables and figures shared by `bench` and `export`.
fn write_report(out: &Path, rep: &BenchReport) -> Result<()> {
    io::write_summary(&out.join("summary.csv"), rep)?;
    io::write_cde(&out.join("cde.csv"), rep)?;
    io::write_timing(&out.join("timing.csv"), rep)?;

    let mut algs: Vec<Algorithm> = rep.cells.iter().map(|c| c.algorithm).collect();
    algs.dedup();
    let mut snrs: Vec<Snr> = Vec::new();
    for c in &rep.cells {
        if !snrs.iter().any(|s| s.as_db() == c.snr.as_db()) {
            snrs.push(c.snr);
        }
    }
    snrs.sort_by(|a, b| a.as_db().total_cmp(&b.as_db()));
    let finite_max = snrs.iter().map(|s| s.as_db()).filter(|v| v.is_finite()).fold(f64::NAN, f64::max);
    let x_of = |s: Snr| if s.is_noiseless() { if finite_max.is_nan() { 0.0 } else { finite_max + 5.0 } } else { s.as_db() };
    let ticks = snrs.iter().map(|&s| (x_of(s), if s.is_noiseless() { "noiseless".into() } else { format!("{}", s.as_db()) })).collect();
    let series = algs
        .iter()
        .map(|&a| Series {
            label: a.to_string(),
            points: snrs
                .iter()
                .filter_map(|&s| rep.success_probability(a, s).map(|p| (x_of(s), p)))
                .collect(),
        })
        .collect();
    write(
        &out.join("success_vs_snr.svg"),
        &line_plot(&LinePlot {
            title: "Success probability vs SNR",
            x_label: "SNR (dB)",
            y_label: "success probability",
            log_x: false,
            y_range: Some((0.0, 1.0)),
            x_ticks: Some(ticks),
            steps: false,
            series,
        }),
    )?;
    for &s in &snrs {
        let series = algs
            .iter()
            .filter_map(|&a| {
                rep.curve(a, s).map(|c| Series {
                    label: a.to_string(),
                    points: c.thresholds.iter().copied().zip(c.fractions.iter().copied()).collect(),
                })
            })
            .collect();
        write(
            &out.join(format!("cde_{}.svg", snr_file_label(s))),
            &line_plot(&LinePlot {
                title: &format!(
                    "Cumulative error distribution, {}",
                    if s.is_noiseless() { "noiseless".to_string() } else { format!("SNR {} dB", s.as_db()) }
                ),
                x_label: "relative l2 error",
                y_label: "fraction of trials",
                log_x: true,
                y_range: Some((0.0, 1.0)),
                x_ticks: None,
                steps: true,
                series,
            }),
        )?;
    }
    Ok(())
}

fn print_table(rep: &BenchReport) {
    println!("{:<8} {:>10} {:>8} {:>8} {:>8}", "algo", "snr", "trials", "success", "median");
    for c in &rep.cells {
        println!(
            "{:<8} {:>10} {:>8} {:>8.3} {:>8.1e}",
            c.algorithm.to_string(),
            c.snr.to_string(),
            c.trials,
            c.success_probability,
            c.median_error
        );
    }
    println!();
    println!("{:<8} {:>12} {:>16} {:>10} {:>10}", "algo", "solver_s", "correlations", "iters", "corr/iter");
    for t in &rep.totals {
        let per = if t.iterations > 0 { t.correlation_count / t.iterations } else { 0 };
        println!(
            "{:<8} {:>12.4} {:>16} {:>10} {:>10}",
            t.algorithm.to_string(),
            t.wall_time,
            t.correlation_count,
            t.iterations,
            per
        );
    }
}

fn build_bench(cfg: ExperimentConfig) -> Result<Bench> {
    match cfg.sd.path.clone() {
        Some(p) if cfg.experiment.algorithms.contains(&Algorithm::OmpSd) => {
            Ok(Bench::with_sensing_dictionary(cfg, load_sd(Path::new(&p))?)?)
        }
        _ => Ok(Bench::new(cfg)?),
    }
}

fn cmd_bench(c: &Common) -> Result<()> {
    let cfg = load_config(c, true)?;
    let bench = build_bench(cfg.clone())?;
    out_dir(&c.out)?;
    write(&c.out.join("config.toml"), &cfg.to_toml_string()?)?;
    let (results, failed) = match bench.run() {
        Ok(r) => (r, Vec::new()),
        Err(first) => {
            // isolate the failing algorithm(s) and keep the rest
            let mut ok: Vec<TrialResult> = Vec::new();
            let mut failed = Vec::new();
            for &alg in &cfg.experiment.algorithms {
                let mut one = cfg.clone();
                one.experiment.algorithms = vec![alg];
                match build_bench(one).and_then(|b| b.run().map_err(CliError::from)) {
                    Ok(rs) => ok.extend(rs.into_iter().map(|r| TrialResult { config_id: bench.id().to_string(), ..r })),
                    Err(e) => failed.push(format!("{alg}: {e}")),
                }
            }
            if ok.is_empty() {
                return Err(CliError::Failed(first.to_string()));
            }
            (ok, failed)
        }
    };
    io::write_trials(&c.out.join("trials.csv"), &results)?;
    let rep = aggregate(&results)?;
    write_report(&c.out, &rep)?;
    let prepared = bench.prepare(0)?;
    iai_figures(&c.out, &prepared.dict.blocks(), prepared.sd.as_ref())?;
    print_table(&rep);
    if c.verbose {
        println!("\nwrote results to {}", c.out.display());
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial(format!(
            "{} of {} algorithms failed: {}",
            failed.len(),
            cfg.experiment.algorithms.len(),
            failed.join("; ")
        )))
    }
}

fn cmd_export(input: &Path, out: &Path) -> Result<()> {
    let results = io::read_trials(input)?;
    if results.is_empty() {
        return Err(CliError::Invalid(format!("{}: no trial rows", input.display())));
    }
    let rep = aggregate(&results)?;
    out_dir(out)?;
    write_report(out, &rep)?;
    print_table(&rep);
    Ok(())
}

//! File formats: measurement text files and versioned CSV tables.
//!
//! Every CSV starts with a `# hrrp-<table> v<N>` comment line followed by a
//! header row. Floats use shortest round-trip formatting so that tables can be
//! reloaded without loss.

use std::fs;
use std::path::Path;

use hrrp_core::bench::{BenchReport, TrialResult};
use hrrp_core::coherence::{BlockCoherence, IaiReport};
use hrrp_core::gtd::{Measurement, Snr};
use hrrp_core::solvers::{Srp, StopReason};
use hrrp_core::C64;

use crate::CliError;

const MEASUREMENT_MAGIC: &str = "# hrrp-measurement v1";

fn f(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_measurement(path: &Path, m: &Measurement) -> Result<(), CliError> {
    let mut s = String::new();
    s.push_str(MEASUREMENT_MAGIC);
    s.push('\n');
    s.push_str(&format!("count {}\n", m.samples.len()));
    let pulses: Vec<String> = m.retained_pulses.iter().map(|p| p.to_string()).collect();
    s.push_str(&format!("pulses {}\n", pulses.join(" ")));
    s.push_str(&format!("snr {}\n", m.snr));
    s.push_str(&format!("noise_seed {}\n", m.noise_seed));
    s.push_str("data\n");
    for z in &m.samples {
        s.push_str(&format!("{} {}\n", f(z.re), f(z.im)));
    }
    fs::write(path, s).map_err(|e| CliError::io(path, e))
}

pub fn read_measurement(path: &Path) -> Result<Measurement, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_measurement(&text).map_err(|m| CliError::Invalid(format!("{}: {m}", path.display())))
}

pub fn parse_measurement(text: &str) -> Result<Measurement, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MEASUREMENT_MAGIC) {
        return Err(format!("missing '{MEASUREMENT_MAGIC}' header"));
    }
    let mut count = None;
    let mut pulses = None;
    let mut snr = Snr::Noiseless;
    let mut noise_seed = 0;
    for line in lines.by_ref() {
        let line = line.trim();
        if line == "data" {
            break;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once(' ').unwrap_or((line, ""));
        match k {
            "count" => count = Some(v.trim().parse::<usize>().map_err(|_| "bad count".to_string())?),
            "pulses" => {
                pulses = Some(
                    v.split_whitespace()
                        .map(|t| t.parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| "bad pulse index".to_string())?,
                )
            }
            "snr" => snr = v.parse().map_err(|e: hrrp_core::Error| e.to_string())?,
            "noise_seed" => noise_seed = v.trim().parse().map_err(|_| "bad noise_seed".to_string())?,
            _ => return Err(format!("unknown header field '{k}'")),
        }
    }
    let count = count.ok_or("missing 'count'")?;
    let pulses = pulses.ok_or("missing 'pulses'")?;
    if pulses.len() != count {
        return Err(format!("count is {count} but {} pulse indices are listed", pulses.len()));
    }
    let mut samples = Vec::with_capacity(count);
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(re)), Some(Ok(im)), None) => samples.push(C64::new(re, im)),
            _ => return Err(format!("bad sample line '{line}'")),
        }
    }
    if samples.len() != count {
        return Err(format!("expected {count} samples, found {}", samples.len()));
    }
    Ok(Measurement {
        samples,
        retained_pulses: pulses,
        snr,
        noise_seed,
    })
}

fn writer(path: &Path, table: &str, header: &[&str]) -> Result<csv::Writer<fs::File>, CliError> {
    use std::io::Write;
    let mut file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    writeln!(file, "# hrrp-{table} v1").map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record(header).map_err(|e| CliError::csv(path, e))?;
    Ok(w)
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

const TRIAL_HEADER: [&str; 11] = [
    "config_id",
    "trial",
    "algorithm",
    "snr",
    "success",
    "relative_l2_error",
    "correlation_count",
    "wall_time",
    "iterations",
    "stop_reason",
    "support",
];

pub fn write_trials(path: &Path, rows: &[TrialResult]) -> Result<(), CliError> {
    let mut w = writer(path, "trials", &TRIAL_HEADER)?;
    for r in rows {
        let support: Vec<String> = r.support.iter().map(|g| g.to_string()).collect();
        w.write_record([
            r.config_id.clone(),
            r.trial.to_string(),
            r.algorithm.to_string(),
            r.snr.to_string(),
            r.success.to_string(),
            f(r.relative_l2_error),
            r.correlation_count.to_string(),
            f(r.wall_time),
            r.iterations.to_string(),
            r.stop_reason.to_string(),
            support.join(";"),
        ])
        .map_err(|e| CliError::csv(path, e))?;
    }
    finish(w, path)
}

fn parse_stop(s: &str) -> Option<StopReason> {
    match s {
        "residual-threshold" => Some(StopReason::ResidualThreshold),
        "max-sparsity" => Some(StopReason::MaxSparsity),
        "stagnation" => Some(StopReason::Stagnation),
        _ => None,
    }
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialResult>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |m: String| CliError::Invalid(format!("{}: {m}", path.display()));
    if !text.starts_with("# hrrp-trials v1") {
        return Err(bad("not a trials table (missing '# hrrp-trials v1')".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != TRIAL_HEADER {
        return Err(bad("unexpected columns".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let err = |what: &str| bad(format!("row {}: bad {what}", i + 1));
        let support = if field(10).is_empty() {
            Vec::new()
        } else {
            field(10)
                .split(';')
                .map(|t| t.parse().map_err(|_| err("support")))
                .collect::<Result<_, _>>()?
        };
        out.push(TrialResult {
            config_id: field(0).to_string(),
            trial: field(1).parse().map_err(|_| err("trial"))?,
            algorithm: field(2).parse().map_err(|_| err("algorithm"))?,
            snr: field(3).parse().map_err(|_| err("snr"))?,
            success: field(4).parse().map_err(|_| err("success"))?,
            relative_l2_error: field(5).parse().map_err(|_| err("relative_l2_error"))?,
            correlation_count: field(6).parse().map_err(|_| err("correlation_count"))?,
            wall_time: field(7).parse().map_err(|_| err("wall_time"))?,
            iterations: field(8).parse().map_err(|_| err("iterations"))?,
            stop_reason: parse_stop(field(9)).ok_or_else(|| err("stop_reason"))?,
            support,
        });
    }
    Ok(out)
}

pub fn write_summary(path: &Path, rep: &BenchReport) -> Result<(), CliError> {
    let mut w = writer(
        path,
        "summary",
        &[
            "config_id",
            "algorithm",
            "snr",
            "trials",
            "successes",
            "success_probability",
            "mean_error",
            "median_error",
            "correlation_count",
            "iterations",
            "wall_time",
        ],
    )?;
    for c in &rep.cells {
        w.write_record([
            rep.config_id.clone(),
            c.algorithm.to_string(),
            c.snr.to_string(),
            c.trials.to_string(),
            c.successes.to_string(),
            f(c.success_probability),
            f(c.mean_error),
            f(c.median_error),
            c.correlation_count.to_string(),
            c.iterations.to_string(),
            f(c.wall_time),
        ])
        .map_err(|e| CliError::csv(path, e))?;
    }
    finish(w, path)
}

pub fn write_cde(path: &Path, rep: &BenchReport) -> Result<(), CliError> {
    let mut w = writer(path, "cde", &["algorithm", "snr", "threshold", "fraction"])?;
    for c in &rep.cde {
        for (t, fr) in c.thresholds.iter().zip(&c.fractions) {
            w.write_record([c.algorithm.to_string(), c.snr.to_string(), f(*t), f(*fr)])
                .map_err(|e| CliError::csv(path, e))?;
        }
    }
    finish(w, path)
}

pub fn write_timing(path: &Path, rep: &BenchReport) -> Result<(), CliError> {
    let mut w = writer(
        path,
        "timing",
        &["algorithm", "runs", "wall_time", "correlation_count", "iterations", "correlations_per_iteration"],
    )?;
    for t in &rep.totals {
        let per = if t.iterations > 0 { t.correlation_count / t.iterations } else { 0 };
        w.write_record([
            t.algorithm.to_string(),
            t.runs.to_string(),
            f(t.wall_time),
            t.correlation_count.to_string(),
            t.iterations.to_string(),
            per.to_string(),
        ])
        .map_err(|e| CliError::csv(path, e))?;
    }
    finish(w, path)
}

pub fn write_srp(path: &Path, srp: &Srp) -> Result<(), CliError> {
    let mut w = writer(path, "srp", &["range_m", "magnitude", "mechanism"])?;
    for ((r, m), mech) in srp.range_axis.iter().zip(&srp.magnitude).zip(&srp.mechanisms) {
        let labels: Vec<String> = mech.iter().map(|d| d.to_string()).collect();
        w.write_record([f(*r), f(*m), labels.join(";")]).map_err(|e| CliError::csv(path, e))?;
    }
    finish(w, path)
}

pub fn write_coherence(path: &Path, bc: &BlockCoherence, extra: &[(&str, f64)]) -> Result<(), CliError> {
    let mut w = writer(path, "coherence", &["quantity", "value"])?;
    let rows = [
        ("mip", bc.mip),
        ("mixed_block_max", bc.mixed_block_max),
        ("cross_mechanism_diag_min", bc.cross_mechanism_diag_min),
        ("cross_mechanism_diag_max", bc.cross_mechanism_diag_max),
    ];
    for (k, v) in rows.iter().chain(extra) {
        w.write_record([k.to_string(), f(*v)]).map_err(|e| CliError::csv(path, e))?;
    }
    finish(w, path)
}

pub fn write_histograms(path: &Path, reports: &[(&str, &IaiReport)]) -> Result<(), CliError> {
    let mut w = writer(path, "iai-histograms", &["matrix", "kind", "bin_low", "bin_high", "count"])?;
    for (name, r) in reports {
        for (kind, h) in [("diag", &r.diag_histogram), ("offdiag", &r.offdiag_histogram)] {
            for (i, c) in h.counts.iter().enumerate() {
                w.write_record([
                    name.to_string(),
                    kind.to_string(),
                    f(h.edges[i]),
                    f(h.edges[i + 1]),
                    c.to_string(),
                ])
                .map_err(|e| CliError::csv(path, e))?;
            }
        }
    }
    finish(w, path)
}

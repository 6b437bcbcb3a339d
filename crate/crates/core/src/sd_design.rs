//! Sensing-dictionary design.
//!
//! Finds an `M × N` matrix `W` minimizing `b1 + γ·b2` where, over every
//! mechanism block `Φ_d`,
//!
//! * `b1 = max_{d,l} |1 − w_lᴴ φ_{d,l}|` (diagonal correlation kept near one),
//! * `b2 = max_{d,k≠l} |w_kᴴ φ_{d,l}|` (off-diagonal correlation suppressed).
//!
//! With `w̃ = [Re w; Im w]`, `φ̃ = [Re φ; Im φ]` and `φ̂ = [Im φ; −Re φ]` each
//! correlation magnitude is `|wᴴφ| = ‖(w̃ᵀφ̃, w̃ᵀφ̂)‖₂`, a second-order cone in
//! `w̃`, so the objective is convex but nonsmooth. The solver minimizes a
//! log-sum-exp smoothing of both maxima by gradient descent in the embedding
//! coordinates (Barzilai-Borwein trial steps, Armijo backtracking) and shrinks
//! the smoothing width whenever progress stalls. The smoothed value bounds the
//! exact objective from above and only ever decreases, both along accepted
//! steps and when the width shrinks. The best exact iterate is returned.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{dot_h, ComplexMatrix, C64};

/// Real embedding of a complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RealEmbedding {
    /// `[Re v; Im v]`
    pub tilde: Vec<f64>,
    /// `[Im v; −Re v]`
    pub hat: Vec<f64>,
}

pub fn real_embed(v: &[C64]) -> RealEmbedding {
    let mut tilde = Vec::with_capacity(2 * v.len());
    let mut hat = Vec::with_capacity(2 * v.len());
    tilde.extend(v.iter().map(|z| z.re));
    tilde.extend(v.iter().map(|z| z.im));
    hat.extend(v.iter().map(|z| z.im));
    hat.extend(v.iter().map(|z| -z.re));
    RealEmbedding { tilde, hat }
}

impl RealEmbedding {
    /// `(w̃ᵀṽ, w̃ᵀv̂)`, i.e. the real and imaginary parts of `wᴴv` for `w̃ = tilde(w)`.
    pub fn correlate(&self, w_tilde: &[f64]) -> (f64, f64) {
        assert_eq!(w_tilde.len(), self.tilde.len());
        let re = w_tilde.iter().zip(&self.tilde).map(|(a, b)| a * b).sum();
        let im = w_tilde.iter().zip(&self.hat).map(|(a, b)| a * b).sum();
        (re, im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdBounds {
    pub b1: f64,
    pub b2: f64,
}

impl SdBounds {
    pub fn objective(&self, gamma: f64) -> f64 {
        self.b1 + gamma * self.b2
    }
}

fn check_blocks(blocks: &[ComplexMatrix]) -> Result<(usize, usize)> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no blocks".into()))?;
    let shape = first.shape();
    if let Some(b) = blocks.iter().find(|b| b.shape() != shape) {
        return Err(Error::ShapeMismatch(format!(
            "blocks have shapes {:?} and {:?}",
            shape,
            b.shape()
        )));
    }
    Ok(shape)
}

/// Exact `(b1, b2)` of `w` against `blocks`.
pub fn evaluate_sd(w: &ComplexMatrix, blocks: &[ComplexMatrix]) -> Result<SdBounds> {
    let shape = check_blocks(blocks)?;
    if w.shape() != shape {
        return Err(Error::ShapeMismatch(format!(
            "W is {:?}, blocks are {:?}",
            w.shape(),
            shape
        )));
    }
    let mut b1: f64 = 0.0;
    let mut b2: f64 = 0.0;
    for block in blocks {
        for (l, phi) in block.columns().enumerate() {
            for (k, wk) in w.columns().enumerate() {
                let z = dot_h(wk, phi);
                if k == l {
                    b1 = b1.max((C64::new(1.0, 0.0) - z).norm());
                } else {
                    b2 = b2.max(z.norm());
                }
            }
        }
    }
    Ok(SdBounds { b1, b2 })
}

/// SHA-256 over block shapes and entries (little-endian f64 pairs), hex encoded.
pub fn blocks_digest(blocks: &[ComplexMatrix]) -> String {
    let mut h = Sha256::new();
    h.update((blocks.len() as u64).to_le_bytes());
    for b in blocks {
        h.update((b.rows() as u64).to_le_bytes());
        h.update((b.cols() as u64).to_le_bytes());
        for z in b.as_slice() {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Initialization {
    /// `W = Φ_1`.
    #[default]
    FirstBlock,
    Given(ComplexMatrix),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMode {
    /// All columns optimized together against the global maxima.
    #[default]
    Joint,
    /// Each column minimizes its own `b1_l + γ·b2_l`; the assembled `W` is
    /// feasible for the joint problem, so its objective upper-bounds the joint optimum.
    PerColumn,
    /// `w_k = h ⊙ ρ^k` for blocks whose columns are lag shifts
    /// `φ_{d,l} = φ_{d,0} ⊙ ρ^l` of a unit-modulus carrier `ρ`. Correlations
    /// then depend on `l − k` only, so the design has `M` unknowns and
    /// `O(D·N)` distinct terms. Also an upper bound on the joint optimum.
    ShiftInvariant,
}

impl std::str::FromStr for DesignMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Self::Joint),
            "per-column" => Ok(Self::PerColumn),
            "shift-invariant" => Ok(Self::ShiftInvariant),
            _ => Err(Error::Parse(format!("unknown design mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    pub max_iterations: usize,
    /// Relative decrease of the smoothed objective over `patience` iterations
    /// below which the solver tightens the smoothing or stops.
    pub tolerance: f64,
    pub patience: usize,
    pub initialization: Initialization,
    pub mode: DesignMode,
    /// Initial and final log-sum-exp smoothing widths.
    pub smoothing_start: f64,
    pub smoothing_floor: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-6,
            patience: 50,
            initialization: Initialization::FirstBlock,
            mode: DesignMode::Joint,
            smoothing_start: 0.05,
            smoothing_floor: 2e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverTrace {
    pub iterations: usize,
    /// Smoothed objective after each accepted step (nonincreasing).
    pub objective: Vec<f64>,
    /// Exact `b1 + γ·b2` at each accepted step.
    pub exact_objective: Vec<f64>,
    pub final_step: f64,
    pub final_smoothing: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingDictionary {
    pub w: ComplexMatrix,
    pub b1: f64,
    pub b2: f64,
    pub gamma: f64,
    pub trace: SolverTrace,
    pub digest: String,
}

impl SensingDictionary {
    pub fn objective(&self) -> f64 {
        self.b1 + self.gamma * self.b2
    }

    pub fn bounds(&self) -> SdBounds {
        SdBounds { b1: self.b1, b2: self.b2 }
    }
}

const SD_MAGIC: &str = "# hrrp-sd v1";

impl SensingDictionary {
    /// Text form: a `key value` header, then `data` and one `re im` pair per
    /// entry in column-major order. Floats use shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(48 * self.w.as_slice().len() + 256);
        out.push_str(SD_MAGIC);
        out.push('\n');
        let (rows, cols) = self.w.shape();
        let header = [
            ("rows", rows.to_string()),
            ("cols", cols.to_string()),
            ("gamma", format!("{:?}", self.gamma)),
            ("b1", format!("{:?}", self.b1)),
            ("b2", format!("{:?}", self.b2)),
            ("objective", format!("{:?}", self.objective())),
            ("iterations", self.trace.iterations.to_string()),
            ("converged", self.trace.converged.to_string()),
            ("digest", self.digest.clone()),
        ];
        for (k, v) in header {
            out.push_str(k);
            out.push(' ');
            out.push_str(&v);
            out.push('\n');
        }
        if !self.trace.converged {
            out.push_str("warning not-converged\n");
        }
        out.push_str("data\n");
        for z in self.w.as_slice() {
            out.push_str(&format!("{:?} {:?}\n", z.re, z.im));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse(m);
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(SD_MAGIC) {
            return Err(bad(format!("missing '{SD_MAGIC}' header")));
        }
        let mut header = std::collections::HashMap::new();
        for line in lines.by_ref() {
            let line = line.trim();
            if line == "data" {
                break;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(' ').ok_or_else(|| bad(format!("bad header line '{line}'")))?;
            header.insert(k.to_string(), v.trim().to_string());
        }
        let get = |k: &str| header.get(k).ok_or_else(|| bad(format!("missing header field '{k}'")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(format!("bad value for '{k}'"))) };
        let count = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(format!("bad value for '{k}'"))) };
        let (rows, cols) = (count("rows")?, count("cols")?);
        let mut data = Vec::with_capacity(rows * cols);
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut part = || -> Result<f64> {
                it.next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(format!("bad data line '{line}'")))
            };
            data.push(C64::new(part()?, part()?));
        }
        if data.len() != rows * cols {
            return Err(bad(format!("expected {} entries, found {}", rows * cols, data.len())));
        }
        Ok(Self {
            w: ComplexMatrix::from_col_major(rows, cols, data)?,
            b1: num("b1")?,
            b2: num("b2")?,
            gamma: num("gamma")?,
            trace: SolverTrace {
                iterations: count("iterations").unwrap_or(0),
                converged: get("converged").map(|v| v == "true").unwrap_or(false),
                ..SolverTrace::default()
            },
            digest: header.get("digest").cloned().unwrap_or_default(),
        })
    }
}

/// Designs a sensing dictionary for `blocks` (all `M × N`, unit columns).
///
/// Non-convergence is reported through `trace.converged`, not as an error.
pub fn design_sd(blocks: &[ComplexMatrix], gamma: f64, opts: &DesignOptions) -> Result<SensingDictionary> {
    let (rows, cols) = check_blocks(blocks)?;
    for b in blocks {
        b.check_unit_columns()?;
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    if opts.max_iterations == 0 || opts.patience == 0 {
        return Err(Error::Domain("max_iterations and patience must be positive".into()));
    }
    if !(opts.smoothing_start >= opts.smoothing_floor && opts.smoothing_floor > 0.0) {
        return Err(Error::Domain("need smoothing_start >= smoothing_floor > 0".into()));
    }
    let init = match &opts.initialization {
        Initialization::FirstBlock => blocks[0].clone(),
        Initialization::Given(w) => {
            if w.shape() != (rows, cols) {
                return Err(Error::ShapeMismatch(format!(
                    "initial W is {:?}, blocks are {:?}",
                    w.shape(),
                    (rows, cols)
                )));
            }
            w.clone()
        }
    };
    let engine = EngineOptions::from_design(opts, gamma);
    let (w, trace) = match opts.mode {
        DesignMode::Joint => {
            // Lag-structured blocks: solve the restricted problem first. The
            // joint surrogate at `W(h)` equals the restricted one, so the
            // joint stage resumes at the same smoothing width.
            let warm = match (&opts.initialization, ShiftProblem::new(blocks, gamma)) {
                (Initialization::FirstBlock, Ok(mut sp)) => {
                    let r = minimize(&mut sp, init.column(0).to_vec(), &engine);
                    Some((sp.expand(&r.x), r.best, sp.expand(&r.last), r.trace))
                }
                _ => None,
            };
            let mut p = JointProblem::new(blocks, gamma);
            match warm {
                Some((best0, value0, last0, t0)) => {
                    let stage = EngineOptions {
                        max_iterations: opts.max_iterations.saturating_sub(t0.iterations).max(1),
                        tau_start: t0.final_smoothing,
                        ..engine
                    };
                    let r = minimize(&mut p, last0.as_slice().to_vec(), &stage);
                    let w = if r.best <= value0 {
                        ComplexMatrix::from_col_major(rows, cols, r.x)?
                    } else {
                        best0
                    };
                    (w, chain_traces(t0, r.trace))
                }
                None => {
                    let r = minimize(&mut p, init.as_slice().to_vec(), &engine);
                    (ComplexMatrix::from_col_major(rows, cols, r.x)?, r.trace)
                }
            }
        }
        DesignMode::PerColumn => design_per_column(blocks, gamma, &init, &engine)?,
        DesignMode::ShiftInvariant => {
            let mut p = ShiftProblem::new(blocks, gamma)?;
            let r = minimize(&mut p, init.column(0).to_vec(), &engine);
            (p.expand(&r.x), r.trace)
        }
    };
    let mut bounds = evaluate_sd(&w, blocks)?;
    let (mut w, mut trace) = (w, trace);
    // Per-column solutions are assembled without seeing the other columns and
    // can end above the start; never hand back something worse than it.
    let start = evaluate_sd(&init, blocks)?;
    if start.objective(gamma) < bounds.objective(gamma) {
        w = init;
        bounds = start;
        trace.converged = false;
    }
    Ok(SensingDictionary {
        w,
        b1: bounds.b1,
        b2: bounds.b2,
        gamma,
        trace,
        digest: blocks_digest(blocks),
    })
}

fn design_per_column(
    blocks: &[ComplexMatrix],
    gamma: f64,
    init: &ComplexMatrix,
    engine: &EngineOptions,
) -> Result<(ComplexMatrix, SolverTrace)> {
    let (rows, cols) = init.shape();
    let mut data = Vec::with_capacity(rows * cols);
    let mut traces = Vec::with_capacity(cols);
    for l in 0..cols {
        let mut p = ColumnProblem::new(blocks, l, gamma);
        let r = minimize(&mut p, init.column(l).to_vec(), engine);
        data.extend_from_slice(&r.x);
        traces.push(r.trace);
    }
    let w = ComplexMatrix::from_col_major(rows, cols, data)?;
    Ok((w, merge_column_traces(&traces)))
}

fn chain_traces(first: SolverTrace, second: SolverTrace) -> SolverTrace {
    let mut objective = first.objective;
    objective.extend(second.objective.into_iter().skip(1));
    let mut exact_objective = first.exact_objective;
    exact_objective.extend(second.exact_objective.into_iter().skip(1));
    SolverTrace {
        iterations: first.iterations + second.iterations,
        objective,
        exact_objective,
        ..second
    }
}

/// Sums per-column histories, holding each finished column at its last value.
fn merge_column_traces(traces: &[SolverTrace]) -> SolverTrace {
    let len = traces.iter().map(|t| t.objective.len()).max().unwrap_or(0);
    let at = |v: &Vec<f64>, i: usize| v.get(i).or(v.last()).copied().unwrap_or(0.0);
    let objective = (0..len)
        .map(|i| traces.iter().map(|t| at(&t.objective, i)).sum())
        .collect();
    let exact_objective = (0..len)
        .map(|i| traces.iter().map(|t| at(&t.exact_objective, i)).sum())
        .collect();
    SolverTrace {
        iterations: traces.iter().map(|t| t.iterations).sum(),
        objective,
        exact_objective,
        final_step: traces.iter().map(|t| t.final_step).fold(0.0, f64::max),
        final_smoothing: traces.iter().map(|t| t.final_smoothing).fold(0.0, f64::max),
        converged: traces.iter().all(|t| t.converged),
    }
}

// ---------------------------------------------------------------------------
// Smoothed minimax engine

#[derive(Debug, Clone, Copy)]
struct Evaluation {
    smoothed: f64,
    b1: f64,
    b2: f64,
}

/// A minimax design problem over complex unknowns `x`.
///
/// Gradients are returned as complex vectors whose real/imaginary parts are
/// the partial derivatives along the real embedding of `x`.
trait Surrogate {
    fn evaluate(&mut self, x: &[C64], tau: f64, grad: Option<&mut [C64]>) -> Evaluation;
}

#[derive(Clone, Copy)]
struct EngineOptions {
    max_iterations: usize,
    tolerance: f64,
    patience: usize,
    tau_start: f64,
    tau_floor: f64,
    gamma: f64,
}

impl EngineOptions {
    fn from_design(o: &DesignOptions, gamma: f64) -> Self {
        Self {
            max_iterations: o.max_iterations,
            tolerance: o.tolerance,
            patience: o.patience,
            tau_start: o.smoothing_start,
            tau_floor: o.smoothing_floor,
            gamma,
        }
    }
}

struct EngineResult {
    /// Best exact iterate and its objective.
    x: Vec<C64>,
    best: f64,
    /// Final iterate.
    last: Vec<C64>,
    trace: SolverTrace,
}

const ARMIJO: f64 = 1e-4;
/// Relative progress over the patience window below which the smoothing is tightened.
const TIGHTEN: f64 = 1e-3;
const MAX_BACKTRACKS: usize = 60;

fn inner(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

const ZERO_OBJECTIVE: f64 = 1e-12;

fn minimize<P: Surrogate>(p: &mut P, x0: Vec<C64>, o: &EngineOptions) -> EngineResult {
    let n = x0.len();
    let exact = |e: &Evaluation| e.b1 + o.gamma * e.b2;
    let mut tau = o.tau_start;
    let mut x = x0;
    let mut g = vec![C64::new(0.0, 0.0); n];
    let mut e = p.evaluate(&x, tau, Some(&mut g));
    let mut best_x = x.clone();
    let mut best = exact(&e);
    let mut trace = SolverTrace {
        objective: vec![e.smoothed],
        exact_objective: vec![best],
        ..SolverTrace::default()
    };
    let mut window_start = 0usize;
    let gnorm0 = inner(&g, &g).sqrt();
    let mut step = if gnorm0 > 0.0 { 0.1 / gnorm0 } else { 1.0 };
    let mut x_new = vec![C64::new(0.0, 0.0); n];
    let mut g_new = vec![C64::new(0.0, 0.0); n];

    for _ in 0..o.max_iterations {
        let gg = inner(&g, &g);
        // both bounds are nonnegative, so an exact zero is a global minimum
        if gg == 0.0 || best <= ZERO_OBJECTIVE {
            trace.converged = true;
            break;
        }
        trace.iterations += 1;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for ((xn, xi), gi) in x_new.iter_mut().zip(&x).zip(&g) {
                *xn = xi - gi * step;
            }
            let cand = p.evaluate(&x_new, tau, Some(&mut g_new));
            if cand.smoothed <= e.smoothed - ARMIJO * step * gg {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
        }
        let Some(cand) = accepted else {
            // No descent at this width; tighten or give up.
            if tau > o.tau_floor {
                tau = (tau * 0.5).max(o.tau_floor);
                e = p.evaluate(&x, tau, Some(&mut g));
                step = 1.0 / inner(&g, &g).sqrt().max(1e-300);
                window_start = trace.objective.len();
                trace.objective.push(e.smoothed);
                trace.exact_objective.push(exact(&e));
                continue;
            }
            trace.converged = true;
            break;
        };

        // Barzilai-Borwein trial step for the next iteration.
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = x_new[i] - x[i];
            let y = g_new[i] - g[i];
            ss += s.norm_sqr();
            sy += s.re * y.re + s.im * y.im;
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e6) } else { (step * 2.0).min(1e6) };
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        e = cand;
        let ex = exact(&e);
        if ex < best {
            best = ex;
            best_x.copy_from_slice(&x);
        }
        trace.objective.push(e.smoothed);
        trace.exact_objective.push(ex);

        let len = trace.objective.len();
        if len - window_start > o.patience {
            let old = trace.objective[len - 1 - o.patience];
            let gain = old - e.smoothed;
            let scale = e.smoothed.abs().max(f64::MIN_POSITIVE);
            if tau <= o.tau_floor && gain < o.tolerance * scale {
                trace.converged = true;
                break;
            }
            if tau > o.tau_floor && gain < TIGHTEN * scale {
                tau = (tau * 0.5).max(o.tau_floor);
                e = p.evaluate(&x, tau, Some(&mut g));
                window_start = trace.objective.len();
                trace.objective.push(e.smoothed);
                trace.exact_objective.push(exact(&e));
            }
        }
    }
    trace.final_step = step;
    trace.final_smoothing = tau;
    EngineResult { x: best_x, best, last: x, trace }
}

/// Accumulates log-sum-exp statistics for one family of terms.
struct SoftMax {
    max: f64,
    sum: f64,
}

impl SoftMax {
    fn over(values: &[f64], weights: Option<&[f64]>, tau: f64) -> Self {
        let max = values.iter().copied().fold(0.0, f64::max);
        let sum = match weights {
            Some(w) => values.iter().zip(w).map(|(v, w)| w * ((v - max) / tau).exp()).sum(),
            None => values.iter().map(|v| ((v - max) / tau).exp()).sum(),
        };
        Self { max, sum }
    }

    fn value(&self, tau: f64) -> f64 {
        self.max + tau * self.sum.ln()
    }

    /// Weight of a term with value `v` and multiplicity `mult`.
    fn weight(&self, v: f64, mult: f64, tau: f64) -> f64 {
        mult * ((v - self.max) / tau).exp() / self.sum
    }
}

/// Weights below this are dropped from gradient accumulation.
const NEGLIGIBLE: f64 = 1e-14;

/// `∂|1 − z|` and `∂|z|` coefficients; zero at the kink.
fn diag_coef(u: C64, a: f64) -> C64 {
    if a > 0.0 {
        -u.conj() / a
    } else {
        C64::new(0.0, 0.0)
    }
}

fn off_coef(z: C64, a: f64) -> C64 {
    if a > 0.0 {
        z.conj() / a
    } else {
        C64::new(0.0, 0.0)
    }
}

fn axpy(out: &mut [C64], c: C64, v: &[C64]) {
    for (o, &x) in out.iter_mut().zip(v) {
        *o += c * x;
    }
}

/// Joint problem over all of `W` (column-major, `M·N` unknowns).
struct JointProblem<'a> {
    blocks: &'a [ComplexMatrix],
    gamma: f64,
    rows: usize,
    cols: usize,
    z: Vec<C64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}

impl<'a> JointProblem<'a> {
    fn new(blocks: &'a [ComplexMatrix], gamma: f64) -> Self {
        let (rows, cols) = blocks[0].shape();
        let d = blocks.len();
        Self {
            blocks,
            gamma,
            rows,
            cols,
            z: Vec::with_capacity(d * cols * cols),
            a1: Vec::with_capacity(d * cols),
            a2: Vec::with_capacity(d * cols * (cols - 1)),
        }
    }
}

impl Surrogate for JointProblem<'_> {
    fn evaluate(&mut self, x: &[C64], tau: f64, grad: Option<&mut [C64]>) -> Evaluation {
        let (m, n) = (self.rows, self.cols);
        self.z.clear();
        self.a1.clear();
        self.a2.clear();
        // z index: (d, l, k) -> (d * n + l) * n + k
        for block in self.blocks {
            for (l, phi) in block.columns().enumerate() {
                for k in 0..n {
                    let z = dot_h(&x[k * m..(k + 1) * m], phi);
                    self.z.push(z);
                    if k == l {
                        self.a1.push((C64::new(1.0, 0.0) - z).norm());
                    } else {
                        self.a2.push(z.norm());
                    }
                }
            }
        }
        let s1 = SoftMax::over(&self.a1, None, tau);
        let s2 = SoftMax::over(&self.a2, None, tau);
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            let (mut i1, mut i2) = (0, 0);
            for (d, block) in self.blocks.iter().enumerate() {
                for (l, phi) in block.columns().enumerate() {
                    for k in 0..n {
                        let z = self.z[(d * n + l) * n + k];
                        let c = if k == l {
                            let a = self.a1[i1];
                            i1 += 1;
                            let w = s1.weight(a, 1.0, tau);
                            if w < NEGLIGIBLE {
                                continue;
                            }
                            diag_coef(C64::new(1.0, 0.0) - z, a) * w
                        } else {
                            let a = self.a2[i2];
                            i2 += 1;
                            let w = s2.weight(a, 1.0, tau);
                            if w < NEGLIGIBLE {
                                continue;
                            }
                            off_coef(z, a) * (w * self.gamma)
                        };
                        axpy(&mut g[k * m..(k + 1) * m], c, phi);
                    }
                }
            }
        }
        Evaluation {
            smoothed: s1.value(tau) + self.gamma * s2.value(tau),
            b1: s1.max,
            b2: s2.max,
        }
    }
}

/// One column `w_l` of the per-column decomposition.
struct ColumnProblem<'a> {
    blocks: &'a [ComplexMatrix],
    col: usize,
    gamma: f64,
    z: Vec<C64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}

impl<'a> ColumnProblem<'a> {
    fn new(blocks: &'a [ComplexMatrix], col: usize, gamma: f64) -> Self {
        Self {
            blocks,
            col,
            gamma,
            z: Vec::new(),
            a1: Vec::new(),
            a2: Vec::new(),
        }
    }
}

impl Surrogate for ColumnProblem<'_> {
    fn evaluate(&mut self, x: &[C64], tau: f64, grad: Option<&mut [C64]>) -> Evaluation {
        self.z.clear();
        self.a1.clear();
        self.a2.clear();
        for block in self.blocks {
            for (k, phi) in block.columns().enumerate() {
                let z = dot_h(x, phi);
                self.z.push(z);
                if k == self.col {
                    self.a1.push((C64::new(1.0, 0.0) - z).norm());
                } else {
                    self.a2.push(z.norm());
                }
            }
        }
        let s1 = SoftMax::over(&self.a1, None, tau);
        let s2 = SoftMax::over(&self.a2, None, tau);
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            let (mut i1, mut i2) = (0, 0);
            let n = self.blocks[0].cols();
            for (d, block) in self.blocks.iter().enumerate() {
                for (k, phi) in block.columns().enumerate() {
                    let z = self.z[d * n + k];
                    let c = if k == self.col {
                        let a = self.a1[i1];
                        i1 += 1;
                        diag_coef(C64::new(1.0, 0.0) - z, a) * s1.weight(a, 1.0, tau)
                    } else {
                        let a = self.a2[i2];
                        i2 += 1;
                        off_coef(z, a) * (s2.weight(a, 1.0, tau) * self.gamma)
                    };
                    if c.norm() > NEGLIGIBLE {
                        axpy(g, c, phi);
                    }
                }
            }
        }
        Evaluation {
            smoothed: s1.value(tau) + self.gamma * s2.value(tau),
            b1: s1.max,
            b2: s2.max,
        }
    }
}

/// Relative tolerance for recognising lag-shift structure.
const SHIFT_TOL: f64 = 1e-8;

/// Shift-invariant parametrization `w_k = h ⊙ ρ^k`.
struct ShiftProblem {
    rows: usize,
    cols: usize,
    gamma: f64,
    carrier: Vec<C64>,
    /// Lag vectors `φ_{d,0} ⊙ ρ^δ`, δ = −(N−1)..=N−1, indexed `(d, δ + N − 1)`.
    lags: Vec<Vec<C64>>,
    diag_mult: Vec<f64>,
    off_mult: Vec<f64>,
    z: Vec<C64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}

impl ShiftProblem {
    fn new(blocks: &[ComplexMatrix], gamma: f64) -> Result<Self> {
        let (rows, cols) = blocks[0].shape();
        if cols < 2 {
            return Err(Error::NotShiftStructured("need at least two columns".into()));
        }
        let b0 = &blocks[0];
        let carrier: Vec<C64> = (0..rows)
            .map(|m| {
                let base = b0.get(m, 0);
                if base.norm() == 0.0 {
                    C64::new(f64::NAN, 0.0)
                } else {
                    b0.get(m, 1) / base
                }
            })
            .collect();
        if carrier.iter().any(|r| !r.is_finite() || (r.norm() - 1.0).abs() > SHIFT_TOL) {
            return Err(Error::NotShiftStructured("carrier is not unit modulus".into()));
        }
        // Verify every column is the lag shift of its block's first column.
        let scale = 1.0 / (rows as f64).sqrt();
        for (d, b) in blocks.iter().enumerate() {
            let mut power = vec![C64::new(1.0, 0.0); rows];
            for l in 0..cols {
                for m in 0..rows {
                    let expect = b.get(m, 0) * power[m];
                    if (b.get(m, l) - expect).norm() > SHIFT_TOL * scale.max(b.get(m, 0).norm()) {
                        return Err(Error::NotShiftStructured(format!(
                            "block {d} column {l} is not a lag shift of column 0"
                        )));
                    }
                    power[m] *= carrier[m];
                }
            }
        }
        let n = cols as isize;
        let mut lags = Vec::with_capacity(blocks.len() * (2 * cols - 1));
        for b in blocks {
            for delta in -(n - 1)..n {
                lags.push(
                    (0..rows)
                        .map(|m| b.get(m, 0) * carrier[m].powi(delta as i32))
                        .collect(),
                );
            }
        }
        let off_mult_one: Vec<f64> = (-(n - 1)..n)
            .filter(|&dl| dl != 0)
            .map(|dl| (n - dl.abs()) as f64)
            .collect();
        let off_mult = off_mult_one.repeat(blocks.len());
        Ok(Self {
            rows,
            cols,
            gamma,
            carrier,
            lags,
            diag_mult: vec![cols as f64; blocks.len()],
            off_mult,
            z: Vec::new(),
            a1: Vec::new(),
            a2: Vec::new(),
        })
    }

    fn expand(&self, h: &[C64]) -> ComplexMatrix {
        let mut power = vec![C64::new(1.0, 0.0); self.rows];
        let mut data = Vec::with_capacity(self.rows * self.cols);
        for _ in 0..self.cols {
            for m in 0..self.rows {
                data.push(h[m] * power[m]);
                power[m] *= self.carrier[m];
            }
        }
        ComplexMatrix::from_col_major(self.rows, self.cols, data).expect("finite design")
    }
}

impl Surrogate for ShiftProblem {
    fn evaluate(&mut self, x: &[C64], tau: f64, grad: Option<&mut [C64]>) -> Evaluation {
        let span = 2 * self.cols - 1;
        let zero = self.cols - 1;
        self.z.clear();
        self.a1.clear();
        self.a2.clear();
        for (i, v) in self.lags.iter().enumerate() {
            let z = dot_h(x, v);
            self.z.push(z);
            if i % span == zero {
                self.a1.push((C64::new(1.0, 0.0) - z).norm());
            } else {
                self.a2.push(z.norm());
            }
        }
        let s1 = SoftMax::over(&self.a1, Some(&self.diag_mult), tau);
        let s2 = SoftMax::over(&self.a2, Some(&self.off_mult), tau);
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            let (mut i1, mut i2) = (0, 0);
            for (i, v) in self.lags.iter().enumerate() {
                let z = self.z[i];
                let c = if i % span == zero {
                    let a = self.a1[i1];
                    let w = s1.weight(a, self.diag_mult[i1], tau);
                    i1 += 1;
                    diag_coef(C64::new(1.0, 0.0) - z, a) * w
                } else {
                    let a = self.a2[i2];
                    let w = s2.weight(a, self.off_mult[i2], tau);
                    i2 += 1;
                    off_coef(z, a) * (w * self.gamma)
                };
                if c.norm() > NEGLIGIBLE {
                    axpy(g, c, v);
                }
            }
        }
        Evaluation {
            smoothed: s1.value(tau) + self.gamma * s2.value(tau),
            b1: s1.max,
            b2: s2.max,
        }
    }
}

//! Greedy sparse recovery: OMP over the full dictionary, A-OMP over a single
//! mechanism block, and OMP-SD with two-step sensing-dictionary selection.
//!
//! All indices are 0-based. A global atom index is `d·N + n` for mechanism `d`
//! and range cell `n` (the 1-based `(ξ−1)N + t` convention shifted down by one).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gtd::{AtomIndex, Dictionary};
use crate::numerics::{dot_h, ls_solve, norm2, ComplexMatrix, ComplexVector, IncrementalQr, C64};
use crate::sd_design::SensingDictionary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ResidualThreshold,
    MaxSparsity,
    Stagnation,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ResidualThreshold => "residual-threshold",
            Self::MaxSparsity => "max-sparsity",
            Self::Stagnation => "stagnation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once `‖r‖₂ ≤ epsilon`.
    pub epsilon: f64,
    pub k_max: usize,
    /// Keep a copy of the residual after every iteration.
    pub record_residuals: bool,
}

impl SolverOptions {
    pub fn new(epsilon: f64, k_max: usize) -> Self {
        Self {
            epsilon,
            k_max,
            record_residuals: false,
        }
    }

    /// `epsilon = 1e-8·‖y‖₂`.
    pub fn noiseless(y: &[C64], k_max: usize) -> Self {
        Self::new(1e-8 * norm2(y), k_max)
    }

    /// `epsilon = √M·σ·√(2 ln M)` for complex AWGN of per-sample variance `σ²`.
    pub fn awgn(measurements: usize, noise_variance: f64, k_max: usize) -> Self {
        let m = measurements as f64;
        let eps = m.sqrt() * noise_variance.sqrt() * (2.0 * m.ln()).max(0.0).sqrt();
        Self::new(eps, k_max)
    }

    /// `epsilon = σ·√(M + 2√(M ln M))`, which the noise norm exceeds with small probability.
    pub fn awgn_l2_bound(measurements: usize, noise_variance: f64, k_max: usize) -> Self {
        let m = measurements as f64;
        let eps = noise_variance.sqrt() * (m + 2.0 * (m * m.ln().max(0.0)).sqrt()).sqrt();
        Self::new(eps, k_max)
    }

    /// Half the number of measurements, the fallback when the sparsity is unknown.
    pub fn default_k_max(measurements: usize) -> usize {
        (measurements / 2).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    /// Selected atoms in order of selection. Global indices, except for
    /// A-OMP where they are local to `block`.
    pub support: Vec<usize>,
    /// Least-squares coefficients on the (unit-norm) support atoms.
    pub coefficients: ComplexVector,
    /// `‖r‖₂` before the first iteration and after each accepted atom.
    pub residual_norm_history: Vec<f64>,
    /// Inner products of length-M vectors computed during selection.
    pub correlation_count: u64,
    /// Selection steps performed.
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Mechanism searched by A-OMP.
    pub block: Option<usize>,
    pub residuals: Option<Vec<ComplexVector>>,
}

impl SparseSolution {
    /// Support as global dictionary indices.
    pub fn global_support(&self, cells: usize) -> Vec<usize> {
        match self.block {
            Some(d) => self.support.iter().map(|&n| d * cells + n).collect(),
            None => self.support.clone(),
        }
    }

    pub fn final_residual_norm(&self) -> f64 {
        *self.residual_norm_history.last().expect("history starts with ‖y‖")
    }
}

fn check_inputs(y: &[C64], rows: usize, opts: &SolverOptions) -> Result<()> {
    if y.len() != rows {
        return Err(Error::ShapeMismatch(format!(
            "measurement has {} samples, dictionary has {rows} rows",
            y.len()
        )));
    }
    if !(opts.epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be nonnegative, got {}", opts.epsilon)));
    }
    if opts.k_max > rows {
        return Err(Error::Domain(format!(
            "k_max {} exceeds the {rows} measurements",
            opts.k_max
        )));
    }
    Ok(())
}

/// Index of the largest `|aᴴr|` over `cols`; the lowest index wins ties.
fn argmax_correlation(atoms: &ComplexMatrix, cols: std::ops::Range<usize>, r: &[C64]) -> usize {
    let mut best = cols.start;
    let mut best_val = -1.0;
    for c in cols {
        let v = dot_h(atoms.column(c), r).norm_sqr();
        if v > best_val {
            best_val = v;
            best = c;
        }
    }
    best
}

/// Shared OMP loop: `select` maps the residual to a global atom index.
fn greedy(
    y: &[C64],
    atoms: &ComplexMatrix,
    opts: &SolverOptions,
    per_step: u64,
    mut select: impl FnMut(&[C64]) -> usize,
) -> SparseSolution {
    let mut qr = IncrementalQr::with_capacity(y.len(), opts.k_max);
    let mut r = y.to_vec();
    let mut support = Vec::with_capacity(opts.k_max);
    let mut history = Vec::with_capacity(opts.k_max + 1);
    let mut residuals = opts.record_residuals.then(Vec::new);
    let mut norm = norm2(&r);
    history.push(norm);
    let mut iterations = 0;
    let mut stop = StopReason::MaxSparsity;
    if norm <= opts.epsilon {
        stop = StopReason::ResidualThreshold;
    } else {
        while support.len() < opts.k_max {
            let g = select(&r);
            iterations += 1;
            if support.contains(&g) || qr.push(atoms.column(g)).is_err() {
                stop = StopReason::Stagnation;
                break;
            }
            support.push(g);
            qr.project_out_last(&mut r);
            norm = norm2(&r);
            history.push(norm);
            if let Some(rs) = residuals.as_mut() {
                rs.push(r.clone());
            }
            if norm <= opts.epsilon {
                stop = StopReason::ResidualThreshold;
                break;
            }
        }
    }
    let coefficients = if qr.is_empty() { Vec::new() } else { qr.solve(y) };
    SparseSolution {
        support,
        coefficients,
        residual_norm_history: history,
        correlation_count: per_step * iterations as u64,
        iterations,
        stop_reason: stop,
        block: None,
        residuals,
    }
}

/// Orthogonal matching pursuit over all `D·N` atoms.
pub fn omp(y: &[C64], dict: &Dictionary, opts: &SolverOptions) -> Result<SparseSolution> {
    omp_matrix(y, dict.atoms(), opts)
}

/// OMP over the columns of an arbitrary unit-column matrix.
pub fn omp_matrix(y: &[C64], atoms: &ComplexMatrix, opts: &SolverOptions) -> Result<SparseSolution> {
    check_inputs(y, atoms.rows(), opts)?;
    let n = atoms.cols();
    Ok(greedy(y, atoms, opts, n as u64, |r| argmax_correlation(atoms, 0..n, r)))
}

/// OMP restricted to the atoms of a single mechanism. Support indices are
/// range cells; `block` carries the mechanism.
pub fn a_omp(y: &[C64], dict: &Dictionary, mechanism: usize, opts: &SolverOptions) -> Result<SparseSolution> {
    let atoms = dict.atoms();
    check_inputs(y, atoms.rows(), opts)?;
    if mechanism >= dict.num_mechanisms() {
        return Err(Error::Domain(format!(
            "mechanism {mechanism} outside 0..{}",
            dict.num_mechanisms()
        )));
    }
    let n = dict.num_cells();
    let start = mechanism * n;
    let mut sol = greedy(y, atoms, opts, n as u64, |r| argmax_correlation(atoms, start..start + n, r));
    for s in &mut sol.support {
        *s -= start;
    }
    sol.block = Some(mechanism);
    Ok(sol)
}

/// OMP with sensing-dictionary selection: the range cell `t` maximizes
/// `|w_tᴴr|` over the N sensing atoms, then the mechanism maximizes `|φ_{d,t}ᴴr|`
/// over the D atoms of that cell.
pub fn omp_sd(y: &[C64], dict: &Dictionary, sd: &SensingDictionary, opts: &SolverOptions) -> Result<SparseSolution> {
    let atoms = dict.atoms();
    check_inputs(y, atoms.rows(), opts)?;
    let (n, d) = (dict.num_cells(), dict.num_mechanisms());
    if sd.w.shape() != (atoms.rows(), n) {
        return Err(Error::ShapeMismatch(format!(
            "sensing dictionary is {:?}, blocks are {:?}",
            sd.w.shape(),
            (atoms.rows(), n)
        )));
    }
    let w = &sd.w;
    Ok(greedy(y, atoms, opts, (n + d) as u64, |r| {
        let t = argmax_correlation(w, 0..n, r);
        let mut best = t;
        let mut best_val = -1.0;
        for m in 0..d {
            let g = m * n + t;
            let v = dot_h(atoms.column(g), r).norm_sqr();
            if v > best_val {
                best_val = v;
                best = g;
            }
        }
        best
    }))
}

/// Physical intensities on `support` (global indices): least-squares
/// coefficients divided by the atoms' normalization factors.
pub fn recover_amplitudes(dict: &Dictionary, support: &[usize], y: &[C64]) -> Result<ComplexVector> {
    if support.is_empty() {
        return Err(Error::Domain("empty support".into()));
    }
    if let Some(&g) = support.iter().find(|&&g| g >= dict.num_atoms()) {
        return Err(Error::Domain(format!("atom {g} outside 0..{}", dict.num_atoms())));
    }
    let coef = ls_solve(&dict.atoms().select_columns(support), y)?;
    Ok(to_intensities(dict, support, &coef))
}

/// Divides unit-atom coefficients by the atoms' normalization factors.
pub fn to_intensities(dict: &Dictionary, global_support: &[usize], coef: &[C64]) -> ComplexVector {
    let nf = dict.norm_factors();
    global_support.iter().zip(coef).map(|(&g, &c)| c / nf[g]).collect()
}

/// Dense length-`D·N` intensity estimate from a solution.
pub fn dense_estimate(dict: &Dictionary, sol: &SparseSolution) -> ComplexVector {
    let support = sol.global_support(dict.num_cells());
    let mut x = vec![C64::new(0.0, 0.0); dict.num_atoms()];
    for (g, v) in support.iter().zip(to_intensities(dict, &support, &sol.coefficients)) {
        x[*g] += v;
    }
    x
}

/// Synthetic range profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Srp {
    /// Cell positions `n·Δr` in meters.
    pub range_axis: Vec<f64>,
    /// Summed `|intensity|` of the scatterers placed in each cell.
    pub magnitude: Vec<f64>,
    /// Mechanisms placed in each cell, in selection order.
    pub mechanisms: Vec<Vec<usize>>,
}

impl Srp {
    pub fn peaks(&self) -> Vec<(f64, f64)> {
        self.range_axis
            .iter()
            .zip(&self.magnitude)
            .filter(|(_, &m)| m > 0.0)
            .map(|(&r, &m)| (r, m))
            .collect()
    }
}

pub fn reconstruct_srp(sol: &SparseSolution, dict: &Dictionary) -> Srp {
    let n = dict.num_cells();
    let dr = dict.scenario().delta_r();
    let mut srp = Srp {
        range_axis: (0..n).map(|i| i as f64 * dr).collect(),
        magnitude: vec![0.0; n],
        mechanisms: vec![Vec::new(); n],
    };
    let support = sol.global_support(n);
    for (&g, v) in support.iter().zip(to_intensities(dict, &support, &sol.coefficients)) {
        let AtomIndex { mechanism, cell } = dict.locate(g);
        srp.magnitude[cell] += v.norm();
        srp.mechanisms[cell].push(mechanism);
    }
    srp
}

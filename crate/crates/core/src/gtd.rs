//! Stepped-frequency radar scenario, GTD block dictionary and echo synthesis.
//!
//! Pulse `m` is transmitted at `f_m = f0 + m·Δf`. Mechanism `d` with exponent
//! `α_d` contributes the frequency factor `(j·f_m/f0)^α_d`, and a scatterer in
//! range cell `n` the phase `exp(-j2π f_m (2 r0 / c + n / (M Δf)))`.
//! Every atom of a [`Dictionary`] is normalized; the norms removed are kept so
//! that physical intensities can be recovered.

use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{complex_power, norm2, ComplexMatrix, ComplexVector, C64};

/// Propagation speed used for range conversions, in m/s.
///
/// The rounded value makes the reference setup (M = 300, Δf = 10 MHz) land on
/// a 0.05 m grid, so a 5 m target spans exactly 100 cells.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Start frequency, Hz.
    pub f0: f64,
    /// Frequency step, Hz.
    pub delta_f: f64,
    pub num_pulses: usize,
    /// Radial distance to the reference point of the target, meters.
    pub range_gate_start: f64,
    /// Target extent along the line of sight, meters.
    pub target_length: f64,
    /// Scattering-mechanism exponents α_d.
    pub mechanisms: Vec<f64>,
    /// Complex amplitude G_d for each mechanism.
    pub amplitudes: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeResolution {
    /// Range cell size `c / (2 M Δf)`, meters.
    pub delta_r: f64,
    /// Unambiguous range `c / (2 Δf)`, meters.
    pub ambiguous_range: f64,
    /// Number of range cells spanning the target.
    pub cells: usize,
}

impl Scenario {
    /// Builds and validates a scenario using [`phase_referenced_amplitudes`].
    pub fn new(
        f0: f64,
        delta_f: f64,
        num_pulses: usize,
        range_gate_start: f64,
        target_length: f64,
        mechanisms: Vec<f64>,
    ) -> Result<Self> {
        let amplitudes = phase_referenced_amplitudes(&mechanisms);
        let s = Self {
            f0,
            delta_f,
            num_pulses,
            range_gate_start,
            target_length,
            mechanisms,
            amplitudes,
        };
        s.validate()?;
        Ok(s)
    }

    /// 1 GHz start, 10 MHz step, 300 pulses, a 5 m target and the five
    /// canonical mechanisms {-1, -0.5, 0, 0.5, 1}.
    pub fn reference() -> Self {
        Self::new(1.0e9, 10.0e6, 300, 0.0, 5.0, vec![-1.0, -0.5, 0.0, 0.5, 1.0])
            .expect("reference scenario is valid")
    }

    pub fn with_amplitudes(mut self, amplitudes: Vec<C64>) -> Result<Self> {
        self.amplitudes = amplitudes;
        self.validate()?;
        Ok(self)
    }

    pub fn num_mechanisms(&self) -> usize {
        self.mechanisms.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return bad(format!("f0 must be positive, got {}", self.f0));
        }
        if !(self.delta_f > 0.0 && self.delta_f.is_finite()) {
            return bad(format!("delta_f must be positive, got {}", self.delta_f));
        }
        if self.num_pulses < 2 {
            return bad(format!("need at least 2 pulses, got {}", self.num_pulses));
        }
        if !(self.range_gate_start >= 0.0 && self.range_gate_start.is_finite()) {
            return bad(format!("range_gate_start must be >= 0, got {}", self.range_gate_start));
        }
        if !(self.target_length > 0.0 && self.target_length.is_finite()) {
            return bad(format!("target_length must be positive, got {}", self.target_length));
        }
        if self.mechanisms.is_empty() {
            return bad("at least one scattering mechanism is required".into());
        }
        if self.mechanisms.iter().any(|a| !a.is_finite()) {
            return bad("mechanism exponents must be finite".into());
        }
        for (i, a) in self.mechanisms.iter().enumerate() {
            if self.mechanisms[..i].contains(a) {
                return bad(format!("mechanism {a} listed twice"));
            }
        }
        if self.amplitudes.len() != self.mechanisms.len() {
            return bad(format!(
                "{} amplitudes for {} mechanisms",
                self.amplitudes.len(),
                self.mechanisms.len()
            ));
        }
        if self.amplitudes.iter().any(|g| !g.is_finite() || g.norm() == 0.0) {
            return bad("amplitudes must be finite and nonzero".into());
        }
        let cells = self.target_length / self.delta_r();
        if (cells - cells.round()).abs() > GRID_TOL || cells.round() < 1.0 {
            return bad(format!(
                "target length {} m is not a whole number of {} m range cells",
                self.target_length,
                self.delta_r()
            ));
        }
        Ok(())
    }

    pub fn delta_r(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.num_pulses as f64 * self.delta_f)
    }

    pub fn range_resolution(&self) -> RangeResolution {
        let delta_r = self.delta_r();
        RangeResolution {
            delta_r,
            ambiguous_range: SPEED_OF_LIGHT / (2.0 * self.delta_f),
            cells: (self.target_length / delta_r).round() as usize,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.range_resolution().cells
    }

    pub fn frequency(&self, pulse: usize) -> f64 {
        self.f0 + pulse as f64 * self.delta_f
    }

    /// Unnormalized dictionary entry for pulse `pulse`, cell `cell`, mechanism `mechanism`.
    pub fn raw_entry(&self, pulse: usize, cell: usize, mechanism: usize) -> C64 {
        let scale = 1.0 + pulse as f64 * self.delta_f / self.f0;
        let gtd = complex_power(scale, self.mechanisms[mechanism]).expect("scale is positive");
        let delay = 2.0 * self.range_gate_start / SPEED_OF_LIGHT
            + cell as f64 / (self.num_pulses as f64 * self.delta_f);
        let phase = -2.0 * std::f64::consts::PI * self.frequency(pulse) * delay;
        self.amplitudes[mechanism] * gtd * C64::from_polar(1.0, phase)
    }
}

/// `G_d = j^(-α_d)`: cancels the constant phase `j^α_d` of the GTD factor so
/// that all mechanisms share a common phase reference.
///
/// Recovery is unaffected by this choice; sensing-dictionary design is not,
/// because it asks for `w_lᴴ φ_dl ≈ 1` across mechanisms.
pub fn phase_referenced_amplitudes(mechanisms: &[f64]) -> Vec<C64> {
    mechanisms
        .iter()
        .map(|&a| C64::from_polar(1.0, -a * std::f64::consts::FRAC_PI_2))
        .collect()
}

/// `G_d = 1` for every mechanism.
pub fn unit_amplitudes(mechanisms: &[f64]) -> Vec<C64> {
    vec![C64::new(1.0, 0.0); mechanisms.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    /// 0-based range cell.
    pub cell: usize,
    /// 0-based index into the scenario's mechanism list.
    pub mechanism: usize,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub scatterers: Vec<Scatterer>,
}

impl Target {
    pub fn new(scatterers: Vec<Scatterer>) -> Self {
        Self { scatterers }
    }

    /// Places scatterers by range position (meters from the target front);
    /// positions must fall on the cell grid.
    pub fn from_positions(
        scenario: &Scenario,
        placements: &[(f64, usize, f64)],
    ) -> Result<Self> {
        let dr = scenario.delta_r();
        let mut scatterers = Vec::with_capacity(placements.len());
        for &(pos, mechanism, intensity) in placements {
            let cell = pos / dr;
            if !(cell >= 0.0) || (cell - cell.round()).abs() > 1e-6 {
                return Err(Error::InvalidTarget(format!(
                    "position {pos} m is not on the {dr} m grid"
                )));
            }
            scatterers.push(Scatterer {
                cell: cell.round() as usize,
                mechanism,
                intensity,
            });
        }
        let t = Self { scatterers };
        t.validate(scenario.num_cells(), scenario.num_mechanisms(), scenario.num_pulses)?;
        Ok(t)
    }

    /// Five equal-intensity scatterers at 0.3, 0.85, 2.0, 3.25 and 4.0 m, the
    /// i-th one using mechanism i (cycled when the scenario has fewer).
    pub fn reference(scenario: &Scenario) -> Result<Self> {
        let d = scenario.num_mechanisms();
        let placements: Vec<(f64, usize, f64)> = [0.3, 0.85, 2.0, 3.25, 4.0]
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i % d, 1.0))
            .collect();
        Self::from_positions(scenario, &placements)
    }

    pub fn sparsity(&self) -> usize {
        self.scatterers.len()
    }

    pub fn validate(&self, cells: usize, mechanisms: usize, max_sparsity: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTarget(m));
        if self.scatterers.len() > max_sparsity {
            return bad(format!(
                "{} scatterers exceed the sparsity limit {max_sparsity}",
                self.scatterers.len()
            ));
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            if s.cell >= cells {
                return bad(format!("cell {} outside 0..{cells}", s.cell));
            }
            if s.mechanism >= mechanisms {
                return bad(format!("mechanism {} outside 0..{mechanisms}", s.mechanism));
            }
            if !(s.intensity >= 0.0 && s.intensity.is_finite()) {
                return bad(format!("intensity {} must be nonnegative", s.intensity));
            }
            if self.scatterers[..i]
                .iter()
                .any(|o| o.cell == s.cell && o.mechanism == s.mechanism)
            {
                return bad(format!("duplicate scatterer at cell {} mechanism {}", s.cell, s.mechanism));
            }
        }
        Ok(())
    }

    /// Sorted global indices `d·N + n` of the scatterers.
    pub fn support(&self, cells: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self
            .scatterers
            .iter()
            .map(|s| s.mechanism * cells + s.cell)
            .collect();
        s.sort_unstable();
        s
    }

    /// Dense ground-truth vector of length `mechanisms·cells`.
    pub fn ground_truth(&self, mechanisms: usize, cells: usize) -> Vec<f64> {
        let mut x = vec![0.0; mechanisms * cells];
        for s in &self.scatterers {
            x[s.mechanism * cells + s.cell] = s.intensity;
        }
        x
    }
}

/// Mechanism and range cell of a dictionary atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomIndex {
    pub mechanism: usize,
    pub cell: usize,
}

/// Block dictionary `Φ = [Φ_1 | … | Φ_D]` restricted to the retained pulses.
///
/// Stored as one column-major matrix so that each block, and each atom, is a
/// contiguous slice. Global column `g` is mechanism `g / N`, cell `g % N`.
#[derive(Debug, Clone)]
pub struct Dictionary {
    scenario: Scenario,
    cells: usize,
    atoms: ComplexMatrix,
    retained: Vec<usize>,
    norm_factors: Vec<f64>,
}

impl Dictionary {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn num_cells(&self) -> usize {
        self.cells
    }

    pub fn num_mechanisms(&self) -> usize {
        self.scenario.num_mechanisms()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.cols()
    }

    /// Number of retained pulses (rows).
    pub fn num_rows(&self) -> usize {
        self.atoms.rows()
    }

    pub fn retained_pulses(&self) -> &[usize] {
        &self.retained
    }

    /// Norms removed from each global column during normalization.
    pub fn norm_factors(&self) -> &[f64] {
        &self.norm_factors
    }

    pub fn atoms(&self) -> &ComplexMatrix {
        &self.atoms
    }

    pub fn atom(&self, global: usize) -> &[C64] {
        self.atoms.column(global)
    }

    pub fn block(&self, mechanism: usize) -> ComplexMatrix {
        self.atoms
            .column_range(mechanism * self.cells, (mechanism + 1) * self.cells)
    }

    pub fn blocks(&self) -> Vec<ComplexMatrix> {
        (0..self.num_mechanisms()).map(|d| self.block(d)).collect()
    }

    pub fn locate(&self, global: usize) -> AtomIndex {
        AtomIndex {
            mechanism: global / self.cells,
            cell: global % self.cells,
        }
    }

    pub fn global_index(&self, at: AtomIndex) -> usize {
        at.mechanism * self.cells + at.cell
    }
}

/// Builds the normalized dictionary over `pulse_subset` (all pulses if `None`).
pub fn build_dictionary(scenario: &Scenario, pulse_subset: Option<&[usize]>) -> Result<Dictionary> {
    scenario.validate()?;
    let retained: Vec<usize> = match pulse_subset {
        None => (0..scenario.num_pulses).collect(),
        Some(p) => {
            if p.is_empty() {
                return Err(Error::InvalidPulses("empty pulse subset".into()));
            }
            if let Some(&bad) = p.iter().find(|&&m| m >= scenario.num_pulses) {
                return Err(Error::InvalidPulses(format!(
                    "pulse {bad} outside 0..{}",
                    scenario.num_pulses
                )));
            }
            if p.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidPulses(
                    "pulse indices must be strictly increasing (sorted, no duplicates)".into(),
                ));
            }
            p.to_vec()
        }
    };
    let cells = scenario.num_cells();
    let d = scenario.num_mechanisms();
    let mut data = Vec::with_capacity(retained.len() * cells * d);
    let mut norm_factors = Vec::with_capacity(cells * d);
    for mech in 0..d {
        for cell in 0..cells {
            let start = data.len();
            data.extend(retained.iter().map(|&m| scenario.raw_entry(m, cell, mech)));
            let norm = norm2(&data[start..]);
            for z in &mut data[start..] {
                *z /= norm;
            }
            norm_factors.push(norm);
        }
    }
    let atoms = ComplexMatrix::from_col_major(retained.len(), cells * d, data)?;
    Ok(Dictionary {
        scenario: scenario.clone(),
        cells,
        atoms,
        retained,
        norm_factors,
    })
}

/// Noiseless echo `Σ intensity · (unnormalized atom)`.
pub fn synthesize_echo(dict: &Dictionary, target: &Target) -> Result<ComplexVector> {
    target.validate(dict.num_cells(), dict.num_mechanisms(), usize::MAX)?;
    let mut y = vec![C64::new(0.0, 0.0); dict.num_rows()];
    for s in &target.scatterers {
        let g = s.mechanism * dict.num_cells() + s.cell;
        let w = s.intensity * dict.norm_factors[g];
        for (o, &a) in y.iter_mut().zip(dict.atom(g)) {
            *o += a * w;
        }
    }
    Ok(y)
}

/// Signal-to-noise ratio of a measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Noiseless,
    Db(f64),
}

impl Snr {
    /// Sort key: noiseless ranks above every finite SNR.
    pub fn as_db(self) -> f64 {
        match self {
            Snr::Noiseless => f64::INFINITY,
            Snr::Db(x) => x,
        }
    }

    pub fn is_noiseless(self) -> bool {
        matches!(self, Snr::Noiseless) || self.as_db() == f64::INFINITY
    }

    /// Per-sample noise variance for a signal of mean power `power`.
    pub fn noise_variance(self, power: f64) -> f64 {
        match self {
            Snr::Noiseless => 0.0,
            Snr::Db(db) => power / 10f64.powf(db / 10.0),
        }
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Noiseless => f.write_str("noiseless"),
            Snr::Db(x) => write!(f, "{x}"),
        }
    }
}

impl std::str::FromStr for Snr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("noiseless") || t.eq_ignore_ascii_case("inf") {
            return Ok(Snr::Noiseless);
        }
        t.trim_end_matches("dB")
            .trim()
            .parse::<f64>()
            .map(Snr::Db)
            .map_err(|_| Error::Parse(format!("bad SNR '{s}'")))
    }
}

impl Serialize for Snr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Snr::Noiseless => s.serialize_str("noiseless"),
            Snr::Db(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Snr::Db(x)),
            Raw::Int(x) => Ok(Snr::Db(x as f64)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Adds circularly-symmetric complex Gaussian noise at the requested SNR.
///
/// The per-sample variance is `σ² = (‖signal‖² / len) / 10^(snr/10)`.
pub fn add_awgn(signal: &[C64], snr: Snr, seed: u64) -> Result<ComplexVector> {
    if snr.is_noiseless() {
        return Ok(signal.to_vec());
    }
    let power = signal.iter().map(|z| z.norm_sqr()).sum::<f64>() / signal.len().max(1) as f64;
    if !(power > 0.0) {
        return Err(Error::UndefinedSnr);
    }
    let sigma = (snr.noise_variance(power) / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(signal
        .iter()
        .map(|&z| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            z + Complex64::new(re, im) * sigma
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseScheme {
    UniformRandom,
    Equispaced,
    Prefix,
}

impl std::str::FromStr for PulseScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-random" | "random" => Ok(Self::UniformRandom),
            "equispaced" => Ok(Self::Equispaced),
            "prefix" => Ok(Self::Prefix),
            _ => Err(Error::Parse(format!("unknown pulse scheme '{s}'"))),
        }
    }
}

/// Chooses `count` of `num_pulses` pulses, returned sorted.
pub fn select_pulses(count: usize, num_pulses: usize, seed: u64, scheme: PulseScheme) -> Result<Vec<usize>> {
    if count == 0 || count > num_pulses {
        return Err(Error::InvalidPulses(format!(
            "cannot keep {count} of {num_pulses} pulses"
        )));
    }
    if count == num_pulses {
        return Ok((0..num_pulses).collect());
    }
    Ok(match scheme {
        PulseScheme::Prefix => (0..count).collect(),
        PulseScheme::Equispaced => (0..count).map(|i| i * num_pulses / count).collect(),
        PulseScheme::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = rand::seq::index::sample(&mut rng, num_pulses, count).into_vec();
            v.sort_unstable();
            v
        }
    })
}

/// Echo samples on the retained pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub samples: ComplexVector,
    pub retained_pulses: Vec<usize>,
    pub snr: Snr,
    pub noise_seed: u64,
}

impl Measurement {
    /// Synthesizes the target echo on `dict`'s pulses and adds noise.
    pub fn simulate(dict: &Dictionary, target: &Target, snr: Snr, noise_seed: u64) -> Result<Self> {
        let clean = synthesize_echo(dict, target)?;
        let samples = if target.scatterers.is_empty() {
            clean
        } else {
            add_awgn(&clean, snr, noise_seed)?
        };
        Ok(Self {
            samples,
            retained_pulses: dict.retained_pulses().to_vec(),
            snr,
            noise_seed,
        })
    }

    /// Per-sample noise variance implied by the SNR and the clean signal power.
    pub fn noise_variance_for(&self, clean_power: f64) -> f64 {
        self.snr.noise_variance(clean_power)
    }
}

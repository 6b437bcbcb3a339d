//! Experiment configuration, read from and written to TOML.
//!
//! One file describes the scenario, the target, pulse retention, the
//! sensing-dictionary design and the Monte Carlo run. See
//! `configs/reference.toml` in the repository for an annotated example.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gtd::{phase_referenced_amplitudes, unit_amplitudes, PulseScheme, Scatterer, Scenario, Snr, Target};
use crate::sd_design::{DesignMode, DesignOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Omp,
    OmpSd,
    AOmp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Omp, Algorithm::OmpSd, Algorithm::AOmp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Omp => "omp",
            Self::OmpSd => "omp-sd",
            Self::AOmp => "a-omp",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeConvention {
    /// `G_d = j^(-α_d)`.
    #[default]
    PhaseReferenced,
    /// `G_d = 1`.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub f0: f64,
    pub delta_f: f64,
    pub num_pulses: usize,
    #[serde(default)]
    pub range_gate_start: f64,
    pub target_length: f64,
    pub mechanisms: Vec<f64>,
    #[serde(default)]
    pub amplitudes: AmplitudeConvention,
}

impl ScenarioConfig {
    pub fn reference() -> Self {
        let s = Scenario::reference();
        Self {
            f0: s.f0,
            delta_f: s.delta_f,
            num_pulses: s.num_pulses,
            range_gate_start: s.range_gate_start,
            target_length: s.target_length,
            mechanisms: s.mechanisms,
            amplitudes: AmplitudeConvention::PhaseReferenced,
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let amplitudes = match self.amplitudes {
            AmplitudeConvention::PhaseReferenced => phase_referenced_amplitudes(&self.mechanisms),
            AmplitudeConvention::Unit => unit_amplitudes(&self.mechanisms),
        };
        let s = Scenario {
            f0: self.f0,
            delta_f: self.delta_f,
            num_pulses: self.num_pulses,
            range_gate_start: self.range_gate_start,
            target_length: self.target_length,
            mechanisms: self.mechanisms.clone(),
            amplitudes,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererSpec {
    /// Range cell; give either this or `position`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<usize>,
    /// Meters from the target front; must lie on the cell grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<f64>,
    pub mechanism: usize,
    #[serde(default = "one")]
    pub intensity: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum IntensityLaw {
    #[default]
    Unit,
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    /// Five scatterers at 0.3, 0.85, 2.0, 3.25 and 4.0 m, scatterer i on mechanism i.
    Reference,
    Fixed { scatterers: Vec<ScattererSpec> },
    /// `sparsity` distinct cells drawn uniformly, each with a uniformly drawn
    /// mechanism (from `mechanisms` when given).
    Random {
        sparsity: usize,
        #[serde(default)]
        intensity: IntensityLaw,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mechanisms: Option<Vec<usize>>,
    },
}

impl TargetSpec {
    pub fn sparsity(&self) -> usize {
        match self {
            Self::Reference => 5,
            Self::Fixed { scatterers } => scatterers.len(),
            Self::Random { sparsity, .. } => *sparsity,
        }
    }

    /// The target for fixed specs; `None` for random ones.
    pub fn fixed_target(&self, scenario: &Scenario) -> Result<Option<Target>> {
        match self {
            Self::Reference => Target::reference(scenario).map(Some),
            Self::Fixed { scatterers } => {
                let mut out = Vec::with_capacity(scatterers.len());
                for s in scatterers {
                    let cell = match (s.cell, s.position) {
                        (Some(c), None) => c,
                        (None, Some(p)) => {
                            let t = Target::from_positions(scenario, &[(p, s.mechanism, s.intensity)])?;
                            t.scatterers[0].cell
                        }
                        _ => {
                            return Err(Error::Config(
                                "each scatterer needs exactly one of `cell` or `position`".into(),
                            ))
                        }
                    };
                    out.push(Scatterer { cell, mechanism: s.mechanism, intensity: s.intensity });
                }
                let t = Target::new(out);
                t.validate(scenario.num_cells(), scenario.num_mechanisms(), usize::MAX)?;
                Ok(Some(t))
            }
            Self::Random { .. } => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub count: usize,
    #[serde(default = "default_scheme")]
    pub scheme: PulseScheme,
    /// Draw a new subset for every trial (otherwise one subset for the run).
    #[serde(default = "yes")]
    pub redraw_per_trial: bool,
    /// Seed of the fixed subset; defaults to one derived from the master seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_scheme() -> PulseScheme {
    PulseScheme::UniformRandom
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub mode: DesignMode,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Precomputed sensing dictionary file (fixed pulse subsets only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

fn default_gamma() -> f64 {
    0.5
}
fn default_max_iterations() -> usize {
    DesignOptions::default().max_iterations
}
fn default_tolerance() -> f64 {
    DesignOptions::default().tolerance
}
fn default_patience() -> usize {
    DesignOptions::default().patience
}

impl Default for SdConfig {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            mode: DesignMode::default(),
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            patience: default_patience(),
            path: None,
        }
    }
}

impl SdConfig {
    pub fn design_options(&self) -> DesignOptions {
        DesignOptions {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            patience: self.patience,
            mode: self.mode,
            ..DesignOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuccessRule {
    /// Recovered global support equals the true one (mechanisms included).
    #[default]
    ExactSupport,
    /// Recovered set of range cells equals the true one.
    RangeCellsOnly,
}

/// Residual threshold used under noise; noiseless runs always stop at `1e-8·‖y‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoppingRule {
    /// `‖r‖₂ ≤ √M·σ·√(2 ln M)`.
    #[default]
    NoiseThreshold,
    /// `‖r‖₂ ≤ σ·√(M + 2√(M ln M))`, a high-probability bound on the noise norm.
    L2Bound,
    /// Run until `k_max` atoms are selected.
    Sparsity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub trials: usize,
    pub master_seed: u64,
    pub snrs: Vec<Snr>,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Block searched by A-OMP; defaults to the α = 0 mechanism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_omp_mechanism: Option<usize>,
    #[serde(default)]
    pub success: SuccessRule,
    #[serde(default)]
    pub stopping: StoppingRule,
    /// Iteration cap; defaults to the target sparsity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn all_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub target: TargetSpec,
    pub pulses: PulseConfig,
    #[serde(default)]
    pub sd: SdConfig,
    pub experiment: RunConfig,
}

impl ExperimentConfig {
    /// The reference setup: fixed five-scatterer target, 30 of 300 pulses
    /// redrawn per trial, SNR sweep 5 to 20 dB plus noiseless.
    pub fn reference(trials: usize, master_seed: u64) -> Self {
        Self {
            scenario: ScenarioConfig::reference(),
            target: TargetSpec::Reference,
            pulses: PulseConfig {
                count: 30,
                scheme: PulseScheme::UniformRandom,
                redraw_per_trial: true,
                seed: None,
            },
            sd: SdConfig {
                mode: DesignMode::ShiftInvariant,
                max_iterations: 300,
                ..SdConfig::default()
            },
            experiment: RunConfig {
                trials,
                master_seed,
                snrs: vec![Snr::Db(5.0), Snr::Db(10.0), Snr::Db(15.0), Snr::Db(20.0), Snr::Noiseless],
                algorithms: all_algorithms(),
                a_omp_mechanism: None,
                success: SuccessRule::ExactSupport,
                stopping: StoppingRule::NoiseThreshold,
                k_max: None,
                threads: None,
            },
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Short content hash identifying the configuration in result files.
    /// Hash of every setting that affects results; the thread count does not.
    pub fn id(&self) -> String {
        let mut c = self.clone();
        c.experiment.threads = None;
        let text = c.to_toml_string().unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.scenario.build()
    }

    /// Mechanism searched by A-OMP.
    pub fn a_omp_mechanism(&self) -> Result<usize> {
        match self.experiment.a_omp_mechanism {
            Some(m) if m < self.scenario.mechanisms.len() => Ok(m),
            Some(m) => Err(Error::Config(format!("a_omp_mechanism {m} is out of range"))),
            None => self
                .scenario
                .mechanisms
                .iter()
                .position(|&a| a == 0.0)
                .ok_or_else(|| Error::Config("no α = 0 mechanism; set a_omp_mechanism".into())),
        }
    }

    pub fn k_max(&self) -> usize {
        self.experiment.k_max.unwrap_or_else(|| self.target.sparsity())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let scenario = self.scenario()?;
        let e = &self.experiment;
        if e.trials == 0 {
            return bad("trials must be at least 1");
        }
        if e.snrs.is_empty() {
            return bad("snrs must not be empty");
        }
        if e.algorithms.is_empty() {
            return bad("algorithms must not be empty");
        }
        for (i, a) in e.algorithms.iter().enumerate() {
            if e.algorithms[..i].contains(a) {
                return bad("algorithms must be distinct");
            }
        }
        if e.algorithms.contains(&Algorithm::AOmp) {
            self.a_omp_mechanism()?;
        }
        if e.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        let p = &self.pulses;
        if p.count == 0 || p.count > scenario.num_pulses {
            return bad("pulses.count must be in 1..=num_pulses");
        }
        let k = self.k_max();
        if k == 0 || k > p.count {
            return bad("k_max must be in 1..=pulses.count");
        }
        if !(self.sd.gamma > 0.0) || self.sd.max_iterations == 0 || self.sd.patience == 0 {
            return bad("sd.gamma, sd.max_iterations and sd.patience must be positive");
        }
        if self.sd.path.is_some() && p.redraw_per_trial {
            return bad("a precomputed sensing dictionary needs redraw_per_trial = false");
        }
        let (n, d) = (scenario.num_cells(), scenario.num_mechanisms());
        match &self.target {
            TargetSpec::Random { sparsity, intensity, mechanisms } => {
                if *sparsity == 0 || *sparsity > n {
                    return bad("random target sparsity must be in 1..=cells");
                }
                if let IntensityLaw::Uniform { low, high } = intensity {
                    if !(0.0 < *low && low <= high && high.is_finite()) {
                        return bad("uniform intensity needs 0 < low <= high");
                    }
                }
                if let Some(ms) = mechanisms {
                    if ms.is_empty() || ms.iter().any(|&m| m >= d) {
                        return bad("target mechanisms must be nonempty and in range");
                    }
                }
            }
            spec => {
                let t = spec.fixed_target(&scenario)?.expect("fixed spec");
                if t.scatterers.is_empty() {
                    return bad("fixed target has no scatterers");
                }
                if t.scatterers.iter().all(|s| s.intensity == 0.0) {
                    return bad("fixed target has zero energy");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trips_through_toml() {
        let cfg = ExperimentConfig::reference(500, 7);
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.id(), cfg.id());
    }

    #[test]
    fn parses_handwritten_config() {
        let text = r#"
[scenario]
f0 = 1e9
delta_f = 1e7
num_pulses = 300
target_length = 5.0
mechanisms = [-1.0, -0.5, 0.0, 0.5, 1.0]

[target]
kind = "fixed"
scatterers = [
  { position = 0.3, mechanism = 0 },
  { cell = 40, mechanism = 2, intensity = 0.5 },
]

[pulses]
count = 30

[experiment]
trials = 10
master_seed = 1
snrs = [10, "noiseless", "5 dB"]
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.experiment.snrs, vec![Snr::Db(10.0), Snr::Noiseless, Snr::Db(5.0)]);
        assert_eq!(cfg.experiment.algorithms, Algorithm::ALL.to_vec());
        assert_eq!(cfg.a_omp_mechanism().unwrap(), 2);
        assert_eq!(cfg.k_max(), 2);
        let t = cfg.target.fixed_target(&cfg.scenario().unwrap()).unwrap().unwrap();
        assert_eq!(t.scatterers[0].cell, 6);
        assert_eq!(t.scatterers[1].intensity, 0.5);
    }

    #[test]
    fn rejects_invalid_configs() {
        let base = ExperimentConfig::reference(10, 1);
        let mut c = base.clone();
        c.experiment.trials = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.experiment.snrs.clear();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.pulses.count = 301;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.sd.path = Some("w.sd".into());
        assert!(c.validate().is_err());
        let mut c = base;
        c.experiment.algorithms = vec![Algorithm::Omp, Algorithm::Omp];
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_toml_str("[scenario]\nf0 = 1").is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("lasso".parse::<Algorithm>().is_err());
    }
}

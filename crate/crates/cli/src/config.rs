//! JSON experiment configuration.
//!
//! Every section rejects unknown keys. Deserialization errors carry the path
//! of the offending key, e.g. `estimator.alpha`.

use std::path::{Path, PathBuf};

use nce_core::generators::Generator;
use nce_core::models::{ExpFamilyModel, NoiseModel, NormKind, Statistics, ZMode};
use nce_core::optimizer::FitConfig;
use nce_core::sampling::{ChannelBase, GibbsConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Fit,
    CondnceSweep,
    RateSweep,
    Check,
    Analyze,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Fit => "fit",
            ExperimentKind::CondnceSweep => "condnce-sweep",
            ExperimentKind::RateSweep => "rate-sweep",
            ExperimentKind::Check => "check",
            ExperimentKind::Analyze => "analyze",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub statistics: Statistics,
    /// Ground-truth natural parameter used to generate data.
    pub theta: Vec<f64>,
}

impl ModelSpec {
    pub fn model(&self) -> Result<ExpFamilyModel, CliError> {
        Ok(ExpFamilyModel::new(self.statistics.clone(), self.theta.clone())?)
    }
}

fn one() -> f64 {
    1.0
}

fn analytic() -> ZMode {
    ZMode::Analytic
}

fn gaussian_iso() -> ChannelBase {
    ChannelBase::GaussianIso
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "serde_json::Value")]
pub enum EstimatorSpec {
    Fnce {
        generator: Generator,
        #[serde(default = "one")]
        nu: f64,
    },
    Centnce {
        alpha: f64,
        #[serde(default = "analytic")]
        z_mode: ZMode,
    },
    Condnce {
        generator: Generator,
        epsilon: f64,
        k: usize,
        #[serde(default = "gaussian_iso")]
        channel: ChannelBase,
    },
}

// Internally tagged enums buffer their content, which hides the inner key
// path; the variants are re-read here with path tracking.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FnceFields {
    generator: Generator,
    #[serde(default = "one")]
    nu: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CentnceFields {
    alpha: f64,
    #[serde(default = "analytic")]
    z_mode: ZMode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CondnceFields {
    generator: Generator,
    epsilon: f64,
    k: usize,
    #[serde(default = "gaussian_iso")]
    channel: ChannelBase,
}

fn fields<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T, String> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        match path.as_str() {
            "." => e.into_inner().to_string(),
            _ => format!("at `{path}`: {}", e.into_inner()),
        }
    })
}

impl TryFrom<serde_json::Value> for EstimatorSpec {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, String> {
        let serde_json::Value::Object(mut map) = v else {
            return Err("expected an estimator object".into());
        };
        let kind = match map.remove("kind") {
            Some(serde_json::Value::String(k)) => k,
            Some(_) => return Err("at `kind`: expected a string".into()),
            None => return Err("missing field `kind`".into()),
        };
        let rest = serde_json::Value::Object(map);
        Ok(match kind.as_str() {
            "fnce" => {
                let f: FnceFields = fields(rest)?;
                EstimatorSpec::Fnce { generator: f.generator, nu: f.nu }
            }
            "centnce" => {
                let f: CentnceFields = fields(rest)?;
                EstimatorSpec::Centnce { alpha: f.alpha, z_mode: f.z_mode }
            }
            "condnce" => {
                let f: CondnceFields = fields(rest)?;
                EstimatorSpec::Condnce { generator: f.generator, epsilon: f.epsilon, k: f.k, channel: f.channel }
            }
            other => return Err(format!("at `kind`: unknown estimator `{other}`, expected fnce, centnce or condnce")),
        })
    }
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Fnce { generator, .. } => format!("fnce[{}]", generator_label(*generator)),
            EstimatorSpec::Centnce { alpha, z_mode } => format!("centnce[alpha={alpha},{}]", zmode_label(*z_mode)),
            EstimatorSpec::Condnce { generator, epsilon, k, .. } => {
                format!("condnce[{},eps={epsilon},K={k}]", generator_label(*generator))
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            EstimatorSpec::Fnce { generator, nu } => {
                generator.validate()?;
                if !(*nu > 0.0 && nu.is_finite()) {
                    return Err(CliError::Config(format!("estimator.nu must be positive, got {nu}")));
                }
            }
            EstimatorSpec::Centnce { alpha, z_mode } => {
                if !alpha.is_finite() {
                    return Err(CliError::Config("estimator.alpha must be finite".into()));
                }
                if let ZMode::Quadrature { bins } = z_mode {
                    if *bins < 2 {
                        return Err(CliError::Config("estimator.z_mode.bins must be >= 2".into()));
                    }
                }
            }
            EstimatorSpec::Condnce { generator, epsilon, k, channel } => {
                generator.validate()?;
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(CliError::Config(format!("estimator.epsilon must be positive, got {epsilon}")));
                }
                if *k == 0 {
                    return Err(CliError::Config("estimator.k must be >= 1".into()));
                }
                if matches!(channel, ChannelBase::Custom { .. }) {
                    return Err(CliError::Config("estimator.channel: custom channels need explicit samples".into()));
                }
            }
        }
        Ok(())
    }
}

pub fn generator_label(g: Generator) -> String {
    match g {
        Generator::Log => "log".into(),
        Generator::Power(a) => format!("power({a})"),
    }
}

fn zmode_label(z: ZMode) -> String {
    match z {
        ZMode::Analytic => "analytic".into(),
        ZMode::Quadrature { bins } => format!("quadrature{bins}"),
        ZMode::MonteCarlo => "montecarlo".into(),
    }
}

fn default_bins() -> usize {
    GibbsConfig::default().bins_per_axis
}
fn default_burn_in() -> usize {
    GibbsConfig::default().burn_in
}
fn default_thinning() -> usize {
    GibbsConfig::default().thinning
}

/// How data are drawn from the ground-truth model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    /// `exact` on finite domains and the Gaussian-mean family, default Gibbs on boxes.
    #[default]
    Auto,
    Exact,
    Gibbs {
        #[serde(default = "default_bins")]
        bins_per_axis: usize,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
        #[serde(default = "default_thinning")]
        thinning: usize,
    },
    Grid {
        bins: usize,
    },
}

fn default_n() -> usize {
    1000
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    #[serde(default = "default_n")]
    pub n_data: usize,
    /// Noise sample size; defaults to `ν·n_data` for f-NCE and `n_data` otherwise.
    #[serde(default)]
    pub n_noise: Option<usize>,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self { n_data: default_n(), n_noise: None }
    }
}

fn decades() -> Vec<f64> {
    (0..=10).map(|k| 10f64.powi(k - 10)).collect()
}
fn default_ks() -> Vec<usize> {
    vec![1, 4, 16, 64]
}
fn default_mu_grid() -> GridSpec {
    GridSpec { lo: 0.0, hi: 2.0, points: 81 }
}
fn default_sweep_n() -> usize {
    10_000
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        (0..self.points).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64).collect()
    }
}

/// CondNCE derivative curves on the unit-variance Gaussian-mean model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondSweepSpec {
    #[serde(default = "one")]
    pub mu_true: f64,
    #[serde(default = "default_sweep_n")]
    pub n: usize,
    #[serde(default = "decades")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default = "default_mu_grid")]
    pub mu_grid: GridSpec,
    #[serde(default = "log_generator")]
    pub generator: Generator,
    #[serde(default = "gaussian_iso")]
    pub channel: ChannelBase,
}

impl Default for CondSweepSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn log_generator() -> Generator {
    Generator::Log
}
fn default_px() -> Vec<usize> {
    vec![2]
}
fn default_total() -> usize {
    20_000
}
fn default_fractions() -> Vec<f64> {
    vec![0.04, 0.08, 0.16, 0.32, 0.64]
}
fn default_trials() -> usize {
    5
}
fn default_rate_estimators() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::Fnce { generator: Generator::Log, nu: 1.0 },
        EstimatorSpec::Centnce { alpha: 0.0, z_mode: ZMode::Analytic },
        EstimatorSpec::Centnce { alpha: 1.0, z_mode: ZMode::Analytic },
    ]
}

/// Error-versus-n sweep over random subsamples of one large draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSweepSpec {
    #[serde(default = "default_rate_estimators")]
    pub estimators: Vec<EstimatorSpec>,
    /// Quadratic-model sizes with the banded ground truth; ignored when `model` is set.
    #[serde(default = "default_px")]
    pub p_x: Vec<usize>,
    #[serde(default = "default_total")]
    pub n_total: usize,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl Default for RateSweepSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn default_instances() -> usize {
    5
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Random instances per objective in the derivative suite.
    #[serde(default = "default_instances")]
    pub instances: usize,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self { instances: default_instances() }
    }
}

fn default_delta_err() -> f64 {
    0.1
}
fn default_delta() -> f64 {
    0.05
}
fn default_beta() -> f64 {
    1.0
}
fn l2() -> NormKind {
    NormKind::L2
}
fn default_quad_bins() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSpec {
    /// Target error Δ for the sample-complexity report.
    #[serde(default = "default_delta_err")]
    pub delta_err: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "l2")]
    pub norm: NormKind,
    /// Noise-to-data sample ratio in the f-NCE sandwich.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Midpoint bins per axis when the data law lives on a box.
    #[serde(default = "default_quad_bins")]
    pub bins: usize,
    #[serde(default)]
    pub pinv: bool,
    /// f-NCE: extra generators whose `V` is compared against the configured one.
    #[serde(default)]
    pub compare_generators: Vec<Generator>,
    /// CondNCE: further ε values evaluated on the same slices.
    #[serde(default)]
    pub epsilons: Vec<f64>,
}

impl Default for AnalyzeSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    /// Defaults to the uniform law on the model's domain.
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub estimator: Option<EstimatorSpec>,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub optimizer: FitConfig,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub condnce_sweep: Option<CondSweepSpec>,
    #[serde(default)]
    pub rate_sweep: Option<RateSweepSpec>,
    #[serde(default)]
    pub check: Option<CheckSpec>,
    #[serde(default)]
    pub analyze: Option<AnalyzeSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.into_inner().to_string();
            // Join `at `outer`: at `inner`: ...` into one dotted path.
            match msg.strip_prefix("at `").and_then(|m| m.split_once("`: ")) {
                Some((inner, rest)) => CliError::Config(format!("at `{path}.{inner}`: {rest}")),
                None => CliError::Config(format!("at `{path}`: {msg}")),
            }
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn master_seed(&self) -> u64 {
        self.seeds[0]
    }

    pub fn model(&self) -> Result<ExpFamilyModel, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{} needs a `model` section", self.experiment.as_str())))?
            .model()
    }

    pub fn noise_model(&self, stats: &Statistics) -> Result<NoiseModel, CliError> {
        match &self.noise {
            Some(q) => {
                q.validate()?;
                Ok(q.clone())
            }
            None => Ok(NoiseModel::uniform_for(stats)?),
        }
    }

    pub fn estimator(&self) -> Result<&EstimatorSpec, CliError> {
        self.estimator
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{} needs an `estimator` section", self.experiment.as_str())))
    }

    /// Schema checks that do not depend on data.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds must not be empty".into()));
        }
        self.optimizer.validate()?;
        if let Some(m) = &self.model {
            m.model()?;
        }
        if let Some(e) = &self.estimator {
            e.validate()?;
        }
        if let SamplerSpec::Gibbs { bins_per_axis, thinning, .. } = self.sampler {
            GibbsConfig { bins_per_axis, burn_in: 0, thinning }.validate()?;
        }
        if let SamplerSpec::Grid { bins } = self.sampler {
            if bins < 1 {
                return Err(CliError::Config("sampler.bins must be >= 1".into()));
            }
        }
        if self.data.n_data == 0 {
            return Err(CliError::Config("data.n_data must be >= 1".into()));
        }
        match self.experiment {
            ExperimentKind::Fit | ExperimentKind::Analyze => {
                self.model()?;
                self.estimator()?;
            }
            ExperimentKind::CondnceSweep => {
                let s = self.condnce_sweep.clone().unwrap_or_default();
                if s.n == 0 || s.ks.iter().any(|&k| k == 0) || s.mu_grid.points == 0 {
                    return Err(CliError::Config("condnce_sweep needs n >= 1, every K >= 1 and a non-empty grid".into()));
                }
                if s.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                    return Err(CliError::Config("condnce_sweep.epsilons must be positive".into()));
                }
            }
            ExperimentKind::RateSweep => {
                let s = self.rate_sweep.clone().unwrap_or_default();
                for e in &s.estimators {
                    e.validate()?;
                }
                if s.trials == 0 || s.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
                    return Err(CliError::Config("rate_sweep needs trials >= 1 and fractions in (0, 1]".into()));
                }
                if self.model.is_none() && s.p_x.iter().any(|&p| p == 0) {
                    return Err(CliError::Config("rate_sweep.p_x entries must be >= 1".into()));
                }
            }
            ExperimentKind::Check => {}
        }
        Ok(())
    }

    pub fn resolved(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        ExperimentConfig::from_json(text).unwrap_err().to_string()
    }

    #[test]
    fn estimator_errors_carry_the_inner_key() {
        let e = err(r#"{"experiment": "fit", "estimator": {"kind": "fnce", "generator": "log", "nu": "x"}}"#);
        assert!(e.starts_with("at `estimator.nu`"), "{e}");
        let e = err(r#"{"experiment": "rate-sweep", "rate_sweep": {"estimators": [{"kind": "centnce", "alpha": 0.0, "z": 1}]}}"#);
        assert!(e.contains("rate_sweep.estimators[0]") && e.contains("`z`"), "{e}");
        let e = err(r#"{"experiment": "fit", "estimator": {"kind": "nce"}}"#);
        assert!(e.contains("estimator.kind"), "{e}");
    }

    #[test]
    fn estimator_round_trips() {
        let est = EstimatorSpec::Condnce { generator: Generator::Power(0.5), epsilon: 0.1, k: 4, channel: ChannelBase::GaussianIso };
        let v = serde_json::to_value(&est).unwrap();
        assert_eq!(v["kind"], "condnce");
        assert_eq!(EstimatorSpec::try_from(v).unwrap(), est);
    }
}

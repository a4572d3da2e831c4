use std::path::PathBuf;

use nce_core::analysis::{
    cent_covariance, cond_covariance_pairs, fnce_covariance, lambda_min_cent, lambda_min_cond, lambda_min_nce,
    sample_complexity, BoundInputs, BoundKind, BoundReport, CovarianceReport, LambdaMin,
};
use nce_core::generators::RatioInterval;
use nce_core::linalg::eig_extremes;
use nce_core::models::{
    centering, model_measure, noise_expectation, Design, ExpFamilyModel, NoiseModel, ZMode,
};
use nce_core::objectives::{CondDataset, PairDesign};
use nce_core::sampling::RngSpec;
use serde::Serialize;

use crate::config::{generator_label, AnalyzeSpec, EstimatorSpec, ExperimentConfig};
use crate::data::{draw_data, draw_noise, draw_slices};
use crate::output::write_json;
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub generator: String,
    /// `λ_min(V_other − V_configured)`; non-negative when the configured generator is more efficient.
    pub min_eig_difference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonReport {
    pub epsilon: f64,
    pub covariance: CovarianceReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceOutput {
    pub estimator: String,
    pub covariance: CovarianceReport,
    pub comparisons: Vec<Comparison>,
    pub epsilon_scan: Vec<EpsilonReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundOutput {
    pub lambda_min: LambdaMin,
    pub bound: BoundReport,
}

/// Noise measure on the support (finite) or the midpoint grid (box).
fn noise_design(m: &ExpFamilyModel, q: &NoiseModel, bins: usize) -> Result<Design, CliError> {
    Ok(match q.support() {
        Some((pts, w)) => Design::build(&m.stats, &pts, Some(w), Some(q))?,
        None => nce_core::models::noise_quadrature(&m.stats, q, bins)?,
    })
}

fn interval_of(log_rho: impl Iterator<Item = f64>) -> Result<RatioInterval, CliError> {
    let (lo, hi) = log_rho.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)));
    Ok(RatioInterval::new(lo.exp(), hi.exp())?)
}

fn cond_pairs(cfg: &ExperimentConfig, m: &ExpFamilyModel, channel: nce_core::sampling::ChannelBase, k: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>), CliError> {
    let spec = RngSpec::new(cfg.master_seed());
    let data = draw_data(m, cfg.sampler, cfg.data.n_data, &mut spec.stream("data", 0))?;
    let slices = draw_slices(channel, m.stats.dim_x(), data.len(), k, &mut spec.stream("slices", 0))?;
    Ok((data, slices))
}

pub fn covariance(cfg: &ExperimentConfig, a: &AnalyzeSpec) -> Result<CovarianceOutput, CliError> {
    let m = cfg.model()?;
    let est = cfg.estimator()?;
    let q = || cfg.noise_model(&m.stats);
    let mut comparisons = Vec::new();
    let mut epsilon_scan = Vec::new();
    let cov = match est {
        EstimatorSpec::Fnce { generator, nu } => {
            let q = q()?;
            let base = fnce_covariance(&m, &q, *generator, *nu, a.beta, a.bins, a.pinv)?;
            for g in &a.compare_generators {
                let other = fnce_covariance(&m, &q, *g, *nu, a.beta, a.bins, a.pinv)?;
                let (lo, _) = eig_extremes(&(&other.v - &base.v))?;
                comparisons.push(Comparison { generator: generator_label(*g), min_eig_difference: lo });
            }
            base
        }
        EstimatorSpec::Centnce { alpha, z_mode } => {
            let q = q()?;
            let sample = match z_mode {
                ZMode::MonteCarlo => {
                    let n = cfg.data.n_noise.unwrap_or(cfg.data.n_data);
                    Some(draw_noise(&q, n, &mut RngSpec::new(cfg.master_seed()).stream("noise", 0))?)
                }
                _ => None,
            };
            cent_covariance(&m, &q, *alpha, *z_mode, sample.as_deref(), a.bins, a.pinv)?
        }
        EstimatorSpec::Condnce { generator, epsilon, k, channel } => {
            let (data, slices) = cond_pairs(cfg, &m, *channel, *k)?;
            let at = |eps: f64| -> Result<CovarianceReport, CliError> {
                let cd = CondDataset::from_slices(data.clone(), &slices, eps, *channel);
                let pd = PairDesign::build(&m.stats, &cd)?;
                Ok(cond_covariance_pairs(&pd, &m.theta, *generator, a.pinv)?)
            };
            for &e in &a.epsilons {
                epsilon_scan.push(EpsilonReport { epsilon: e, covariance: at(e)? });
            }
            at(*epsilon)?
        }
    };
    Ok(CovarianceOutput { estimator: est.label(), covariance: cov, comparisons, epsilon_scan })
}

pub fn bounds(cfg: &ExperimentConfig, a: &AnalyzeSpec) -> Result<BoundOutput, CliError> {
    let m = cfg.model()?;
    let q = cfg.noise_model(&m.stats)?;
    let est = cfg.estimator()?;
    let base = |p: usize, psi_max: f64, interval: RatioInterval, lm: &LambdaMin, nu: f64| BoundInputs {
        delta_err: a.delta_err,
        delta: a.delta,
        p,
        psi_max,
        norm: a.norm,
        interval,
        lambda_min_d: lm.d,
        lambda_min_n: lm.n.unwrap_or(0.0),
        nu,
        tilted_mean_max: lm.tilted_mean_max.unwrap_or(0.0),
    };
    let (kind, inputs, lm) = match est {
        EstimatorSpec::Fnce { generator, nu } => {
            let data = model_measure(&m, Some(&q), a.bins)?.augmented();
            let noise = noise_design(&m, &q, a.bins)?.augmented();
            let theta = m.normalized_augmented(a.bins)?;
            let lm = lambda_min_nce(&data, &noise)?;
            let shift = generator.effective_nu(*nu).ln();
            let iv = interval_of((0..data.n).map(|i| data.log_r(&theta, i) - shift))?;
            let psi = m.stats.psi_max().max(1.0);
            (BoundKind::Fnce { generator: *generator }, base(data.p, psi, iv, &lm, *nu), lm)
        }
        EstimatorSpec::Centnce { alpha, z_mode } => {
            let data = model_measure(&m, Some(&q), a.bins)?;
            let mode = if *z_mode == ZMode::MonteCarlo { ZMode::Analytic } else { *z_mode };
            let ne = noise_expectation(&m.stats, &q, *alpha, mode, None)?;
            let lm = lambda_min_cent(&data, &ne, &m.theta, *alpha)?;
            let c = centering(&ne, &m.theta, *alpha, false)?;
            let iv = interval_of((0..data.n).map(|i| data.log_r(&m.theta, i) - c.log_z))?;
            (BoundKind::Cent { alpha: *alpha }, base(data.p, m.stats.psi_max(), iv, &lm, 1.0), lm)
        }
        EstimatorSpec::Condnce { generator, epsilon, k, channel } => {
            let (data, slices) = cond_pairs(cfg, &m, *channel, *k)?;
            let cd = CondDataset::from_slices(data, &slices, *epsilon, *channel);
            let pd = PairDesign::build(&m.stats, &cd)?;
            let lm = lambda_min_cond(&pd)?;
            // Pair ratios φ(y)/φ(x) lie in [ρ_min/ρ_max, ρ_max/ρ_min]; the bound widens the interval itself.
            let d = model_measure(&m, Some(&q), a.bins)?;
            let iv = interval_of((0..d.n).map(|i| d.log_r(&m.theta, i)))?;
            (BoundKind::Cond { generator: *generator }, base(pd.p, m.stats.psi_max(), iv, &lm, 1.0), lm)
        }
    };
    Ok(BoundOutput { lambda_min: lm, bound: sample_complexity(kind, &inputs)? })
}

pub fn cmd_analyze(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let a = cfg.analyze.clone().unwrap_or_default();
    let cov = covariance(cfg, &a)?;
    let mut out = vec![write_json(cfg, &cfg.output_dir.join("covariance.json"), &cov)?];
    let path = cfg.output_dir.join("bounds.json");
    let bounded = cfg.model.as_ref().is_some_and(|m| m.statistics.psi_max().is_finite());
    if bounded {
        out.push(write_json(cfg, &path, &bounds(cfg, &a)?)?);
    } else {
        // The finite-sample theorems need a bounded ψ.
        out.push(write_json(cfg, &path, &serde_json::json!({ "skipped": "statistics are unbounded" }))?);
    }
    Ok(out)
}

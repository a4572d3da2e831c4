use std::path::PathBuf;

use nce_core::models::{ExpFamilyModel, NoiseModel, ZMode};
use nce_core::objectives::{CentProblem, CondDataset, CondProblem, Dataset, FnceProblem, Objective};
use nce_core::optimizer::{fit, FitResult};
use nce_core::sampling::RngSpec;
use serde::Serialize;

use crate::config::{EstimatorSpec, ExperimentConfig, SamplerSpec};
use crate::data::{draw_data, draw_noise, draw_slices};
use crate::output::{num, write_csv, write_json};
use crate::CliError;

/// Everything an estimator consumes besides the model.
#[derive(Clone, Debug, Default)]
pub struct Samples {
    pub data: Vec<Vec<f64>>,
    pub noise: Option<Vec<Vec<f64>>>,
    pub slices: Option<Vec<Vec<Vec<f64>>>>,
}

impl Samples {
    pub fn select(&self, data_idx: &[usize], noise_idx: Option<&[usize]>) -> Samples {
        let pick = |v: &[Vec<f64>], idx: &[usize]| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        Samples {
            data: pick(&self.data, data_idx),
            noise: self.noise.as_ref().zip(noise_idx).map(|(n, idx)| pick(n, idx)),
            slices: self.slices.as_ref().map(|s| data_idx.iter().map(|&i| s[i].clone()).collect()),
        }
    }
}

/// Noise draws needed for `n` data under this estimator, if any.
pub fn noise_size(est: &EstimatorSpec, n: usize, explicit: Option<usize>) -> Option<usize> {
    match est {
        EstimatorSpec::Fnce { generator, nu } => {
            Some(explicit.unwrap_or_else(|| (generator.effective_nu(*nu) * n as f64).round().max(1.0) as usize))
        }
        EstimatorSpec::Centnce { z_mode: ZMode::MonteCarlo, .. } => Some(explicit.unwrap_or(n)),
        _ => None,
    }
}

/// Streams: `data`, `noise` and `slices`, each indexed by `index`.
pub fn draw_samples(
    m: &ExpFamilyModel,
    q: &NoiseModel,
    est: &EstimatorSpec,
    sampler: SamplerSpec,
    n: usize,
    n_noise: Option<usize>,
    spec: &RngSpec,
    index: u64,
) -> Result<Samples, CliError> {
    let data = draw_data(m, sampler, n, &mut spec.stream("data", index))?;
    let noise = match noise_size(est, n, n_noise) {
        Some(k) => Some(draw_noise(q, k, &mut spec.stream("noise", index))?),
        None => None,
    };
    let slices = match est {
        EstimatorSpec::Condnce { k, channel, .. } => {
            Some(draw_slices(*channel, m.stats.dim_x(), n, *k, &mut spec.stream("slices", index))?)
        }
        _ => None,
    };
    Ok(Samples { data, noise, slices })
}

pub fn make_problem<'a>(
    m: &ExpFamilyModel,
    q: &NoiseModel,
    est: &'a EstimatorSpec,
    s: &Samples,
) -> Result<Box<dyn Objective + 'a>, CliError> {
    Ok(match est {
        EstimatorSpec::Fnce { generator, nu } => {
            let ds = Dataset::new(s.data.clone(), s.noise.clone());
            Box::new(FnceProblem::new(m, q, generator, *nu, &ds)?)
        }
        EstimatorSpec::Centnce { alpha, z_mode } => {
            let ds = Dataset::new(s.data.clone(), s.noise.clone());
            Box::new(CentProblem::new(m, q, *alpha, &ds, *z_mode)?)
        }
        EstimatorSpec::Condnce { generator, epsilon, channel, .. } => {
            let slices = s.slices.as_ref().ok_or_else(|| CliError::Config("condnce needs channel slices".into()))?;
            let cd = CondDataset::from_slices(s.data.clone(), slices, *epsilon, *channel);
            Box::new(CondProblem::new(&m.stats, &cd, generator)?)
        }
    })
}

pub fn l2_error(theta_hat: &[f64], truth: &[f64]) -> f64 {
    theta_hat.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[derive(Serialize)]
struct FitReport<'a> {
    estimator: String,
    objective_name: String,
    theta_star: &'a [f64],
    /// ‖θ̂ − θ*‖₂ over the model coordinates.
    l2_error: f64,
    result: &'a FitResult,
}

pub fn cmd_fit(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let m = cfg.model()?;
    let q = cfg.noise_model(&m.stats)?;
    let est = cfg.estimator()?;
    let spec = RngSpec::new(cfg.master_seed());
    let s = draw_samples(&m, &q, est, cfg.sampler, cfg.data.n_data, cfg.data.n_noise, &spec, 0)?;
    let prob = make_problem(&m, &q, est, &s)?;
    let r = fit(prob.as_ref(), &cfg.optimizer)?;
    let p = m.theta.len();
    let report = FitReport {
        estimator: est.label(),
        objective_name: prob.name(),
        theta_star: &m.theta,
        l2_error: l2_error(r.theta(p), &m.theta),
        result: &r,
    };
    let json = write_json(cfg, &cfg.output_dir.join("result.json"), &report)?;
    let rows: Vec<Vec<String>> = r
        .objective_trace
        .iter()
        .zip(&r.grad_norm_trace)
        .enumerate()
        .map(|(k, (o, g))| vec![k.to_string(), num(*o), num(*g)])
        .collect();
    let csv = write_csv(cfg, &cfg.output_dir.join("trace.csv"), &["iter", "objective", "grad_norm"], &rows)?;
    Ok(vec![json, csv])
}

use std::path::PathBuf;
use std::time::Instant;

use nce_core::models::{ExpFamilyModel, NoiseModel, Statistics};
use nce_core::optimizer::fit;
use nce_core::sampling::RngSpec;
use nce_core::NceError;
use rayon::prelude::*;

use crate::config::{EstimatorSpec, ExperimentConfig, RateSweepSpec};
use crate::data::{draw_data, draw_noise, draw_slices, subsample};
use crate::fit::{l2_error, make_problem, noise_size, Samples};
use crate::output::{num, write_csv};
use crate::CliError;

pub const HEADER: [&str; 7] = ["estimator", "p_x", "n", "trial", "l2_error", "wall_ms", "status"];

/// Quadratic-model ground truth: `Θ_ij = 1/√p_x` on the first row, first column and diagonal.
pub fn banded_theta(p_x: usize) -> Vec<f64> {
    let v = 1.0 / (p_x as f64).sqrt();
    let mut t = vec![0.0; p_x * p_x];
    for i in 0..p_x {
        for j in 0..p_x {
            if i == 0 || j == 0 || i == j {
                t[i * p_x + j] = v;
            }
        }
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub estimator: String,
    pub p_x: usize,
    pub n: usize,
    pub trial: usize,
    pub l2_error: f64,
    pub wall_ms: f64,
    pub status: String,
}

struct Pool {
    m: ExpFamilyModel,
    q: NoiseModel,
    est: EstimatorSpec,
    samples: Samples,
}

fn models(cfg: &ExperimentConfig, spec: &RateSweepSpec) -> Result<Vec<ExpFamilyModel>, CliError> {
    match &cfg.model {
        Some(m) => Ok(vec![m.model()?]),
        None => spec
            .p_x
            .iter()
            .map(|&p| Ok(ExpFamilyModel::new(Statistics::quadratic(p), banded_theta(p))?))
            .collect(),
    }
}

/// One large draw per model, then `trials` random subsamples per size.
///
/// Data come from stream `data` (index = model), noise pools and slices from
/// `noise`/`slices` (index = model·1000 + estimator); subsample indices are
/// shared by all estimators of a model.
pub fn rate_sweep(cfg: &ExperimentConfig, spec: &RateSweepSpec) -> Result<Vec<RateRow>, CliError> {
    let rng = RngSpec::new(cfg.master_seed());
    let mut pools = Vec::new();
    for (mi, m) in models(cfg, spec)?.into_iter().enumerate() {
        let q = cfg.noise_model(&m.stats)?;
        let data = draw_data(&m, cfg.sampler, spec.n_total, &mut rng.stream("data", mi as u64))?;
        for (ei, est) in spec.estimators.iter().enumerate() {
            let idx = (mi * 1000 + ei) as u64;
            let noise = match noise_size(est, spec.n_total, None) {
                Some(k) => Some(draw_noise(&q, k, &mut rng.stream("noise", idx))?),
                None => None,
            };
            let slices = match est {
                EstimatorSpec::Condnce { k, channel, .. } => {
                    Some(draw_slices(*channel, m.stats.dim_x(), spec.n_total, *k, &mut rng.stream("slices", idx))?)
                }
                _ => None,
            };
            let samples = Samples { data: data.clone(), noise, slices };
            pools.push((mi, Pool { m: m.clone(), q: q.clone(), est: est.clone(), samples }));
        }
    }
    let sizes: Vec<usize> = spec.fractions.iter().map(|f| ((f * spec.n_total as f64).round() as usize).max(1)).collect();
    let mut jobs = Vec::new();
    for (pi, (mi, _)) in pools.iter().enumerate() {
        for (si, &n) in sizes.iter().enumerate() {
            for t in 0..spec.trials {
                jobs.push((pi, *mi, si, n, t));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(pi, mi, si, n, t)| {
            let pool = &pools[pi].1;
            let stream = ((mi * sizes.len() + si) * spec.trials + t) as u64;
            let di = subsample(spec.n_total, n, &mut rng.stream("subsample", stream));
            let ni = pool.samples.noise.as_ref().map(|pool_noise| {
                let k = noise_size(&pool.est, n, None).unwrap_or(n);
                subsample(pool_noise.len(), k, &mut rng.stream("noise-subsample", stream))
            });
            let s = pool.samples.select(&di, ni.as_deref());
            one_fit(cfg, pool, &s, n, t)
        })
        .collect()
}

fn one_fit(cfg: &ExperimentConfig, pool: &Pool, s: &Samples, n: usize, trial: usize) -> Result<RateRow, CliError> {
    let start = Instant::now();
    let prob = make_problem(&pool.m, &pool.q, &pool.est, s)?;
    let (err, status) = match fit(prob.as_ref(), &cfg.optimizer) {
        Ok(r) => {
            let status = if r.converged { "converged" } else { "max_iters" };
            (l2_error(r.theta(pool.m.theta.len()), &pool.m.theta), status.to_string())
        }
        Err(NceError::Divergence { .. }) | Err(NceError::Numeric { .. }) => (f64::NAN, "diverged".to_string()),
        Err(e) => return Err(e.into()),
    };
    Ok(RateRow {
        estimator: pool.est.label(),
        p_x: pool.m.stats.dim_x(),
        n,
        trial,
        l2_error: err,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        status,
    })
}

pub fn cmd_rate_sweep(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.rate_sweep.clone().unwrap_or_default();
    let rows = rate_sweep(cfg, &spec)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.estimator.clone(),
                r.p_x.to_string(),
                r.n.to_string(),
                r.trial.to_string(),
                num(r.l2_error),
                format!("{:.3}", r.wall_ms),
                r.status.clone(),
            ]
        })
        .collect();
    Ok(vec![write_csv(cfg, &cfg.output_dir.join("rate_sweep.csv"), &HEADER, &table)?])
}

/// Least-squares slope of `log(mean error)` against `log n`, one point per size.
pub fn loglog_slope(rows: &[RateRow], estimator: &str) -> Option<f64> {
    let mut sizes: Vec<usize> = rows.iter().filter(|r| r.estimator == estimator).map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .filter_map(|&n| {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.estimator == estimator && r.n == n && r.l2_error.is_finite())
                .map(|r| r.l2_error)
                .collect();
            (!errs.is_empty()).then(|| ((n as f64).ln(), (errs.iter().sum::<f64>() / errs.len() as f64).ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

use std::path::PathBuf;

use nce_core::models::{ExpFamilyModel, Statistics};
use nce_core::objectives::{condnce_pairs, CondDataset, PairDesign, Want};
use nce_core::sampling::{exact_sample, RngSpec};
use rayon::prelude::*;

use crate::config::{CondSweepSpec, ExperimentConfig};
use crate::data::draw_slices;
use crate::output::{num, write_csv};
use crate::CliError;

pub const HEADER: [&str; 5] = ["epsilon", "K", "mu_grid_point", "empirical_dLdmu", "seed"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub k: usize,
    pub mu: f64,
    pub dl_dmu: f64,
    pub seed: u64,
}

/// `dL/dμ` of the empirical CondNCE objective over the μ grid, for every (seed, K, ε).
///
/// Data `x ~ N(μ_true, 1)` come from stream `data` of each seed; the slices for
/// a given K come from stream `slices` index K and are shared across ε.
pub fn condnce_sweep(spec: &CondSweepSpec, seeds: &[u64]) -> Result<Vec<SweepRow>, CliError> {
    let stats = Statistics::GaussianMean1d;
    let truth = ExpFamilyModel::new(stats.clone(), vec![spec.mu_true])?;
    let grid = spec.mu_grid.values();
    let mut sets = Vec::new();
    for &seed in seeds {
        let rng = RngSpec::new(seed);
        let data = exact_sample(&truth, spec.n, &mut rng.stream("data", 0))?;
        for &k in &spec.ks {
            let slices = draw_slices(spec.channel, 1, spec.n, k, &mut rng.stream("slices", k as u64))?;
            sets.push((seed, k, data.clone(), slices));
        }
    }
    let jobs: Vec<(usize, f64)> =
        (0..sets.len()).flat_map(|i| spec.epsilons.iter().map(move |&e| (i, e))).collect();
    let blocks: Vec<Vec<SweepRow>> = jobs
        .into_par_iter()
        .map(|(i, eps)| {
            let (seed, k, data, slices) = &sets[i];
            let (seed, k) = (*seed, *k);
            let cd = CondDataset::from_slices(data.clone(), slices, eps, spec.channel);
            let pd = PairDesign::build(&stats, &cd)?;
            grid.iter()
                .map(|&mu| {
                    let g = condnce_pairs(&pd, &spec.generator, &[mu], Want::Grad)?;
                    Ok(SweepRow { epsilon: eps, k, mu, dl_dmu: g.grad[0], seed })
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

pub fn cmd_condnce_sweep(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.condnce_sweep.clone().unwrap_or_default();
    let rows = condnce_sweep(&spec, &cfg.seeds)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![num(r.epsilon), r.k.to_string(), num(r.mu), num(r.dl_dmu), r.seed.to_string()])
        .collect();
    Ok(vec![write_csv(cfg, &cfg.output_dir.join("condnce_sweep.csv"), &HEADER, &table)?])
}

/// First sign change of a derivative curve, linearly interpolated.
///
/// The CondNCE objective is convex in μ, so its derivative is nondecreasing
/// and the first sign change is the minimizer.
pub fn zero_crossing(mu: &[f64], d: &[f64]) -> Option<f64> {
    (0..mu.len().saturating_sub(1)).find_map(|i| {
        let (a, b) = (d[i], d[i + 1]);
        if a == 0.0 {
            Some(mu[i])
        } else if a.signum() != b.signum() {
            Some(mu[i] + (mu[i + 1] - mu[i]) * a / (a - b))
        } else {
            None
        }
    })
}

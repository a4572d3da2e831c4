//! Seeded data, noise and channel draws shared by the experiments.

use nce_core::models::{Domain, ExpFamilyModel, NoiseModel};
use nce_core::sampling::{channel_slices, exact_sample, gibbs_sample, grid_sample, noise_sample, ChannelBase, GibbsConfig, StreamRng};

use crate::config::SamplerSpec;
use crate::CliError;

pub fn draw_data(m: &ExpFamilyModel, sampler: SamplerSpec, n: usize, rng: &mut StreamRng) -> Result<Vec<Vec<f64>>, CliError> {
    let s = match sampler {
        SamplerSpec::Auto => match m.stats.domain() {
            Domain::Box(_) => gibbs_sample(m, &GibbsConfig::default(), n, rng)?,
            _ => exact_sample(m, n, rng)?,
        },
        SamplerSpec::Exact => exact_sample(m, n, rng)?,
        SamplerSpec::Gibbs { bins_per_axis, burn_in, thinning } => {
            gibbs_sample(m, &GibbsConfig { bins_per_axis, burn_in, thinning }, n, rng)?
        }
        SamplerSpec::Grid { bins } => grid_sample(m, bins, n, rng)?,
    };
    Ok(s)
}

pub fn draw_noise(q: &NoiseModel, n: usize, rng: &mut StreamRng) -> Result<Vec<Vec<f64>>, CliError> {
    Ok(noise_sample(q, n, rng)?)
}

/// `K` unit-covariance slices per datum.
pub fn draw_slices(base: ChannelBase, dim: usize, n: usize, k: usize, rng: &mut StreamRng) -> Result<Vec<Vec<Vec<f64>>>, CliError> {
    (0..n).map(|_| channel_slices(base, dim, k, rng).map_err(CliError::from)).collect()
}

/// `n` distinct indices drawn uniformly from `0..total`.
pub fn subsample(total: usize, n: usize, rng: &mut StreamRng) -> Vec<usize> {
    rand::seq::index::sample(rng, total, n.min(total)).into_vec()
}

//! Seeded samplers: discretized Gibbs sweeps on boxes, exact draws on finite
//! domains and midpoint grids, noise draws, and symmetric channels
//! `y = x + ε v`.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{NceError, Result};
use crate::linalg::log_sum_exp;
use crate::models::{bin_midpoints, box_grid, Domain, ExpFamilyModel, NoiseModel, Statistics, MAX_ENUMERATION};

pub type StreamRng = ChaCha8Rng;

/// Master seed plus a deterministic `(tag, index) → stream` derivation.
///
/// The tag is hashed with FNV-1a, mixed with the master seed through
/// SplitMix64 to form the ChaCha key, and the index selects the ChaCha
/// stream, so streams never overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngSpec {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn stream(&self, tag: &str, index: u64) -> StreamRng {
        let mut state = self.master_seed ^ fnv1a(tag).rotate_left(17);
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsConfig {
    pub bins_per_axis: usize,
    pub burn_in: usize,
    pub thinning: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { bins_per_axis: 100, burn_in: 1000, thinning: 10 }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins_per_axis < 2 || self.thinning < 1 {
            return Err(NceError::Config("gibbs needs bins_per_axis >= 2 and thinning >= 1".into()));
        }
        Ok(())
    }
}

/// Draw an index with probabilities proportional to `exp(logw)`.
fn draw_log_weights<R: Rng + ?Sized>(logw: &[f64], buf: &mut Vec<f64>, rng: &mut R) -> usize {
    let m = logw.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    buf.clear();
    let mut total = 0.0;
    for &l in logw {
        total += (l - m).exp();
        buf.push(total);
    }
    let u = rng.random::<f64>() * total;
    buf.partition_point(|&c| c <= u).min(logw.len() - 1)
}

/// Coordinate-wise Gibbs sampler on the midpoint grid of a box domain.
///
/// Sweeps update coordinates 1..p_x in order; each update samples the exact
/// discretized conditional over the bin midpoints.
pub fn gibbs_sample<R: Rng + ?Sized>(m: &ExpFamilyModel, cfg: &GibbsConfig, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    m.validate()?;
    cfg.validate()?;
    if n == 0 {
        return Err(NceError::Argument("need n >= 1".into()));
    }
    let Domain::Box(bounds) = m.stats.domain() else {
        return Err(NceError::Config("gibbs sampling needs a box domain; use exact_sample".into()));
    };
    let d = bounds.len();
    let axes: Vec<Vec<f64>> = bounds.iter().map(|iv| bin_midpoints(*iv, cfg.bins_per_axis)).collect();
    let mut x: Vec<f64> = axes.iter().map(|a| a[rng.random_range(0..a.len())]).collect();
    let mut logw = vec![0.0; cfg.bins_per_axis];
    let mut buf = Vec::with_capacity(cfg.bins_per_axis);
    let mut sweep = |x: &mut Vec<f64>, rng: &mut R| {
        for j in 0..d {
            conditional_log_weights(m, x, j, &axes[j], &mut logw);
            x[j] = axes[j][draw_log_weights(&logw, &mut buf, rng)];
        }
    };
    for _ in 0..cfg.burn_in {
        sweep(&mut x, rng);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..cfg.thinning {
            sweep(&mut x, rng);
        }
        out.push(x.clone());
    }
    Ok(out)
}

fn conditional_log_weights(m: &ExpFamilyModel, x: &[f64], j: usize, values: &[f64], out: &mut [f64]) {
    if let Statistics::Quadratic { dim_x, .. } = m.stats {
        // xᵀΘx as a function of x_j: Θ_jj v² + v Σ_{k≠j} (Θ_jk + Θ_kj) x_k.
        let th = &m.theta;
        let a = th[j * dim_x + j];
        let b: f64 = (0..dim_x).filter(|&k| k != j).map(|k| (th[j * dim_x + k] + th[k * dim_x + j]) * x[k]).sum();
        for (o, v) in out.iter_mut().zip(values) {
            *o = a * v * v + b * v;
        }
    } else {
        let mut y = x.to_vec();
        for (o, v) in out.iter_mut().zip(values) {
            y[j] = *v;
            *o = m.log_phi(&y);
        }
    }
}

fn draw_from_points<R: Rng + ?Sized>(pts: &[Vec<f64>], logp: &[f64], n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let lse = log_sum_exp(logp.iter().copied());
    let w: Vec<f64> = logp.iter().map(|l| (l - lse).exp()).collect();
    let dist = WeightedIndex::new(&w).map_err(|e| NceError::Numeric { index: 0, what: e.to_string() })?;
    Ok((0..n).map(|_| pts[dist.sample(rng)].clone()).collect())
}

/// I.i.d. draws from the normalized model on a finite domain, or from
/// `N(θ, 1)` for the Gaussian-mean family.
pub fn exact_sample<R: Rng + ?Sized>(m: &ExpFamilyModel, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    m.validate()?;
    if m.stats == Statistics::GaussianMean1d {
        let mu = m.theta[0];
        return Ok((0..n).map(|_| vec![mu + rng.sample::<f64, _>(StandardNormal)]).collect());
    }
    let pts = m.stats.enumerate()?;
    let lp: Vec<f64> = pts.iter().map(|x| m.log_phi(x)).collect();
    draw_from_points(&pts, &lp, n, rng)
}

/// I.i.d. draws from the midpoint-discretized model on a small box.
pub fn grid_sample<R: Rng + ?Sized>(m: &ExpFamilyModel, bins: usize, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    m.validate()?;
    let Domain::Box(b) = m.stats.domain() else {
        return Err(NceError::Config("grid sampling needs a box domain".into()));
    };
    let pts = box_grid(&b, bins)?;
    let lp: Vec<f64> = pts.iter().map(|x| m.log_phi(x)).collect();
    draw_from_points(&pts, &lp, n, rng)
}

pub fn noise_sample<R: Rng + ?Sized>(q: &NoiseModel, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    q.validate()?;
    Ok(match q {
        NoiseModel::UniformBox { bounds } => (0..n)
            .map(|_| bounds.iter().map(|iv| iv[0] + (iv[1] - iv[0]) * rng.random::<f64>()).collect())
            .collect(),
        NoiseModel::FiniteUniform { points } => (0..n).map(|_| points[rng.random_range(0..points.len())].clone()).collect(),
        NoiseModel::Discrete { points, probs } => {
            if points.len() > MAX_ENUMERATION {
                return Err(NceError::Config("discrete noise exceeds the enumeration limit".into()));
            }
            let dist = WeightedIndex::new(probs).map_err(|e| NceError::Config(e.to_string()))?;
            (0..n).map(|_| points[dist.sample(rng)].clone()).collect()
        }
    })
}

/// Base law of the channel increment `v`, normalized to `E[v] = 0`, `E[vvᵀ] = I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelBase {
    GaussianIso,
    /// Uniform on the unit ℓ_s ball, rescaled to unit covariance.
    UniformBall { s: f64 },
    /// Externally supplied conditional samples.
    Custom { symmetric: bool },
}

impl ChannelBase {
    pub fn is_symmetric(&self) -> bool {
        match self {
            ChannelBase::Custom { symmetric } => *symmetric,
            _ => true,
        }
    }
}

/// `E[x_1²]` for `x` uniform on the unit ℓ_s ball in `d` dimensions.
pub fn ball_second_moment(s: f64, d: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let d = d as f64;
    (ln_gamma(3.0 / s) + ln_gamma(d / s + 1.0) - ln_gamma(1.0 / s) - ln_gamma((d + 2.0) / s + 1.0)).exp()
}

/// `k` unit-covariance increments `v` of dimension `dim`.
pub fn channel_slices<R: Rng + ?Sized>(base: ChannelBase, dim: usize, k: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    match base {
        ChannelBase::GaussianIso => Ok((0..k).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect()),
        ChannelBase::UniformBall { s } => {
            if !(s >= 1.0 && s.is_finite()) {
                return Err(NceError::Config(format!("ball exponent must be finite and >= 1, got {s}")));
            }
            // Barthe–Guédon–Mendelson–Naor: g_i with density ∝ exp(−|t|^s), W ~ Exp(1),
            // then g / (Σ|g_i|^s + W)^{1/s} is uniform on the ball.
            let gamma = Gamma::new(1.0 / s, 1.0).map_err(|e| NceError::Config(e.to_string()))?;
            let scale = 1.0 / ball_second_moment(s, dim).sqrt();
            Ok((0..k)
                .map(|_| {
                    let g: Vec<f64> = (0..dim)
                        .map(|_| {
                            let mag: f64 = gamma.sample(rng);
                            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                            sign * mag.powf(1.0 / s)
                        })
                        .collect();
                    let w: f64 = rng.sample(Exp1);
                    let r = (g.iter().map(|x| x.abs().powf(s)).sum::<f64>() + w).powf(1.0 / s);
                    g.iter().map(|x| scale * x / r).collect()
                })
                .collect())
        }
        ChannelBase::Custom { .. } => Err(NceError::Unsupported("custom channels carry explicit samples".into())),
    }
}

/// `K` draws `x + ε v` from the channel.
pub fn channel_sample<R: Rng + ?Sized>(x: &[f64], eps: f64, base: ChannelBase, k: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(NceError::Argument(format!("epsilon must be finite and non-negative, got {eps}")));
    }
    let vs = channel_slices(base, x.len(), k, rng)?;
    Ok(vs.into_iter().map(|v| x.iter().zip(v).map(|(a, b)| a + eps * b).collect()).collect())
}

/// Samples as CSV: optional `# ` preamble lines, a header `x1,…,x_d`, one row per sample.
pub fn write_samples_csv<W: Write>(mut w: W, samples: &[Vec<f64>], preamble: &[String]) -> std::io::Result<()> {
    for line in preamble {
        writeln!(w, "# {line}")?;
    }
    let d = samples.first().map_or(0, |s| s.len());
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for s in samples {
        let row: Vec<String> = s.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let spec = RngSpec::new(42);
        let a: Vec<u64> = (0..4).map(|_| spec.stream("data", 0).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut s1 = spec.stream("data", 0);
        let mut s2 = spec.stream("noise", 0);
        let mut s3 = spec.stream("data", 1);
        let n = 20_000;
        let (mut c12, mut c13) = (0.0, 0.0);
        for _ in 0..n {
            let (u1, u2, u3): (f64, f64, f64) = (s1.random(), s2.random(), s3.random());
            c12 += (u1 - 0.5) * (u2 - 0.5);
            c13 += (u1 - 0.5) * (u3 - 0.5);
        }
        // Correlation of independent uniforms has sd 1/√n; allow 5 sd.
        let corr = |c: f64| 12.0 * c / n as f64;
        assert!(corr(c12).abs() < 5.0 / (n as f64).sqrt());
        assert!(corr(c13).abs() < 5.0 / (n as f64).sqrt());
    }

    #[test]
    fn two_point_exact_frequency() {
        let m = ExpFamilyModel::new(Statistics::two_point(), vec![0.5 * 3f64.ln()]).unwrap();
        let n = 40_000;
        let s = exact_sample(&m, n, &mut RngSpec::new(7).stream("exact", 0)).unwrap();
        let f = s.iter().filter(|x| x[0] == 1.0).count() as f64 / n as f64;
        assert!((f - 0.75).abs() < 4.0 * (3.0 / 16.0 / n as f64).sqrt(), "{f}");
    }

    #[test]
    fn zero_epsilon_channel_is_identity() {
        let x = [0.3, -1.2];
        let ys = channel_sample(&x, 0.0, ChannelBase::GaussianIso, 5, &mut RngSpec::new(1).stream("c", 0)).unwrap();
        assert_eq!(ys.len(), 5);
        assert!(ys.iter().all(|y| y.as_slice() == x));
    }

    #[test]
    fn ball_moment_closed_form() {
        for d in 1..6 {
            assert!((ball_second_moment(2.0, d) - 1.0 / (d as f64 + 2.0)).abs() < 1e-12);
        }
        assert!((ball_second_moment(1.0, 1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_rejects_finite_domain() {
        let m = ExpFamilyModel::new(Statistics::two_point(), vec![0.0]).unwrap();
        let r = gibbs_sample(&m, &GibbsConfig::default(), 10, &mut RngSpec::new(0).stream("g", 0));
        assert!(matches!(r, Err(NceError::Config(_))));
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &[vec![1.0, -0.5]], &["seed=3".into()]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# seed=3\nx1,x2\n1.0,-0.5\n");
    }
}

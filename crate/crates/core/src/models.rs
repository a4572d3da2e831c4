//! Exponential-family models `φ_θ(x) = exp(⟨θ, ψ(x)⟩ + h(x))`, noise
//! distributions, norms, and the precomputed feature tables ([`Design`])
//! that every objective iterates over.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{NceError, Result};
use crate::linalg::{dot, log_sum_exp};

/// Quadrature beyond this many axes is refused.
pub const MAX_QUADRATURE_DIM: usize = 3;
pub const DEFAULT_BINS: usize = 100;
/// Finite domains larger than this are not enumerated.
pub const MAX_ENUMERATION: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Closed axis-aligned box, one `[lo, hi]` per coordinate.
    Box(Vec<[f64; 2]>),
    /// Explicit list of points.
    Finite(Vec<Vec<f64>>),
    /// Unbounded `ℝ^d`.
    Real(usize),
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box(b) => b.len(),
            Domain::Finite(pts) => pts.first().map_or(0, |p| p.len()),
            Domain::Real(d) => *d,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Domain::Box(b) => b.iter().zip(x).all(|(iv, v)| iv[0] <= *v && *v <= iv[1]),
            Domain::Finite(pts) => pts.iter().any(|p| p.as_slice() == x),
            Domain::Real(_) => true,
        }
    }

    pub fn volume(&self) -> Option<f64> {
        match self {
            Domain::Box(b) => Some(b.iter().map(|iv| iv[1] - iv[0]).product()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Domain::Box(b) => {
                if b.is_empty() || b.iter().any(|iv| !(iv[0] < iv[1]) || !iv[0].is_finite() || !iv[1].is_finite()) {
                    return Err(NceError::Config(format!("invalid box domain {b:?}")));
                }
            }
            Domain::Finite(pts) => {
                let d = self.dim();
                if pts.is_empty() || d == 0 || pts.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
                    return Err(NceError::Config("finite domain needs equal-length finite points".into()));
                }
            }
            Domain::Real(d) => {
                if *d == 0 {
                    return Err(NceError::Config("real domain needs dimension >= 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Built-in sufficient statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statistics {
    /// `ψ(x) = x` on an interval or a finite subset of ℝ.
    Linear1d { domain: Domain },
    /// `ψ(x) = vec(x xᵀ)` row-major, so `⟨θ, ψ(x)⟩ = xᵀΘx` on `[lo, hi]^dim_x`.
    Quadratic {
        dim_x: usize,
        #[serde(default = "unit_interval")]
        bounds: [f64; 2],
    },
    /// Ising statistics `(x_i x_j)_{i<j}` followed by `(x_i)` on `{−1, +1}^dim_x`.
    Spin { dim_x: usize },
    /// `ψ(x) = x` with fixed base `h(x) = −x²/2` on ℝ: the unit-variance Gaussian mean family.
    GaussianMean1d,
}

fn unit_interval() -> [f64; 2] {
    [-1.0, 1.0]
}

impl Statistics {
    pub fn quadratic(dim_x: usize) -> Self {
        Statistics::Quadratic { dim_x, bounds: unit_interval() }
    }

    pub fn two_point() -> Self {
        Statistics::Linear1d { domain: Domain::Finite(vec![vec![-1.0], vec![1.0]]) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Statistics::Linear1d { domain } => {
                domain.validate()?;
                if domain.dim() != 1 || matches!(domain, Domain::Real(_)) {
                    return Err(NceError::Config("linear1d needs a bounded one-dimensional domain".into()));
                }
            }
            Statistics::Quadratic { dim_x, bounds } => {
                if *dim_x == 0 || !(bounds[0] < bounds[1]) {
                    return Err(NceError::Config("quadratic needs dim_x >= 1 and lo < hi".into()));
                }
            }
            Statistics::Spin { dim_x } => {
                if *dim_x == 0 {
                    return Err(NceError::Config("spin needs dim_x >= 1".into()));
                }
            }
            Statistics::GaussianMean1d => {}
        }
        Ok(())
    }

    pub fn dim_x(&self) -> usize {
        match self {
            Statistics::Linear1d { .. } | Statistics::GaussianMean1d => 1,
            Statistics::Quadratic { dim_x, .. } | Statistics::Spin { dim_x } => *dim_x,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Statistics::Linear1d { .. } | Statistics::GaussianMean1d => 1,
            Statistics::Quadratic { dim_x, .. } => dim_x * dim_x,
            Statistics::Spin { dim_x } => dim_x * (dim_x - 1) / 2 + dim_x,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            Statistics::Linear1d { domain } => domain.clone(),
            Statistics::Quadratic { dim_x, bounds } => Domain::Box(vec![*bounds; *dim_x]),
            Statistics::Spin { dim_x } => Domain::Finite(spin_states(*dim_x)),
            Statistics::GaussianMean1d => Domain::Real(1),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.domain(), Domain::Finite(_))
    }

    /// A bound on `sup_x ‖ψ(x)‖_∞` over the domain.
    pub fn psi_max(&self) -> f64 {
        match self {
            Statistics::Linear1d { domain } => match domain {
                Domain::Box(b) => b[0][0].abs().max(b[0][1].abs()),
                Domain::Finite(pts) => pts.iter().fold(0.0, |m, p| m.max(p[0].abs())),
                Domain::Real(_) => f64::INFINITY,
            },
            Statistics::Quadratic { bounds, .. } => {
                let m = bounds[0].abs().max(bounds[1].abs());
                m * m
            }
            Statistics::Spin { .. } => 1.0,
            Statistics::GaussianMean1d => f64::INFINITY,
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Statistics::Linear1d { .. } | Statistics::GaussianMean1d => out[0] = x[0],
            Statistics::Quadratic { dim_x, .. } => {
                let d = *dim_x;
                for a in 0..d {
                    for b in 0..d {
                        out[a * d + b] = x[a] * x[b];
                    }
                }
            }
            Statistics::Spin { dim_x } => {
                let d = *dim_x;
                let mut k = 0;
                for i in 0..d {
                    for j in i + 1..d {
                        out[k] = x[i] * x[j];
                        k += 1;
                    }
                }
                out[k..k + d].copy_from_slice(&x[..d]);
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    /// The θ-independent base term `h(x)` of `log φ`.
    pub fn base(&self, x: &[f64]) -> f64 {
        match self {
            Statistics::GaussianMean1d => -0.5 * x[0] * x[0],
            _ => 0.0,
        }
    }

    pub fn log_phi(&self, theta: &[f64], x: &[f64]) -> f64 {
        dot(theta, &self.eval(x)) + self.base(x)
    }

    /// `∂ψ_k/∂x_j` as a `dim_x × p` matrix.
    pub fn grad_x(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let p = self.dim();
        match self {
            Statistics::Linear1d { .. } | Statistics::GaussianMean1d => Ok(DMatrix::from_element(1, 1, 1.0)),
            Statistics::Quadratic { dim_x, .. } => {
                let d = *dim_x;
                let mut g = DMatrix::zeros(d, p);
                for a in 0..d {
                    for b in 0..d {
                        g[(a, a * d + b)] += x[b];
                        g[(b, a * d + b)] += x[a];
                    }
                }
                Ok(g)
            }
            Statistics::Spin { .. } => Err(NceError::Unsupported("spin statistics have no x-derivatives".into())),
        }
    }

    /// `∇_x log φ_θ(x)`.
    pub fn score(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Statistics::Linear1d { .. } => Ok(vec![theta[0]]),
            Statistics::GaussianMean1d => Ok(vec![theta[0] - x[0]]),
            Statistics::Quadratic { dim_x, .. } => {
                let d = *dim_x;
                Ok((0..d)
                    .map(|j| (0..d).map(|k| (theta[j * d + k] + theta[k * d + j]) * x[k]).sum())
                    .collect())
            }
            Statistics::Spin { .. } => Err(NceError::Unsupported("spin statistics have no x-derivatives".into())),
        }
    }

    /// `∇²_x log φ_θ(x)`.
    pub fn score_jacobian(&self, theta: &[f64], _x: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            Statistics::Linear1d { .. } => Ok(DMatrix::zeros(1, 1)),
            Statistics::GaussianMean1d => Ok(DMatrix::from_element(1, 1, -1.0)),
            Statistics::Quadratic { dim_x, .. } => {
                let d = *dim_x;
                Ok(DMatrix::from_fn(d, d, |j, k| theta[j * d + k] + theta[k * d + j]))
            }
            Statistics::Spin { .. } => Err(NceError::Unsupported("spin statistics have no x-derivatives".into())),
        }
    }

    /// Indices of the statistics that depend on coordinate `i`.
    pub fn node_indices(&self, i: usize) -> Result<Vec<usize>> {
        let d = self.dim_x();
        if i >= d {
            return Err(NceError::Argument(format!("node {i} out of range for dim_x = {d}")));
        }
        Ok(match self {
            Statistics::Linear1d { .. } | Statistics::GaussianMean1d => vec![0],
            Statistics::Quadratic { .. } => {
                let mut v: Vec<usize> = (0..d).map(|b| i * d + b).collect();
                v.extend((0..d).filter(|&a| a != i).map(|a| a * d + i));
                v.sort_unstable();
                v
            }
            Statistics::Spin { .. } => {
                let mut v = Vec::new();
                let mut k = 0;
                for a in 0..d {
                    for b in a + 1..d {
                        if a == i || b == i {
                            v.push(k);
                        }
                        k += 1;
                    }
                }
                v.push(k + i);
                v
            }
        })
    }

    /// Values a single coordinate can take, when that set is finite.
    pub fn coordinate_values(&self, _i: usize) -> Option<Vec<f64>> {
        match self {
            Statistics::Spin { .. } => Some(vec![-1.0, 1.0]),
            Statistics::Linear1d { domain: Domain::Finite(pts) } => Some(pts.iter().map(|p| p[0]).collect()),
            _ => None,
        }
    }

    /// Interval of a single coordinate on box domains.
    pub fn coordinate_interval(&self, i: usize) -> Option<[f64; 2]> {
        match self.domain() {
            Domain::Box(b) => b.get(i).copied(),
            _ => None,
        }
    }

    /// Enumerated points of a finite domain.
    pub fn enumerate(&self) -> Result<Vec<Vec<f64>>> {
        if let Statistics::Spin { dim_x } = self {
            if *dim_x >= 20 {
                return Err(NceError::Config(format!("2^{dim_x} states exceed the enumeration limit")));
            }
        }
        match self.domain() {
            Domain::Finite(pts) => {
                if pts.len() > MAX_ENUMERATION {
                    return Err(NceError::Config("finite domain exceeds the enumeration limit".into()));
                }
                Ok(pts)
            }
            _ => Err(NceError::Config("domain is not finite".into())),
        }
    }
}

fn spin_states(d: usize) -> Vec<Vec<f64>> {
    if d >= 20 {
        return Vec::new();
    }
    (0..1usize << d)
        .map(|s| (0..d).map(|i| if (s >> (d - 1 - i)) & 1 == 1 { 1.0 } else { -1.0 }).collect())
        .collect()
}

/// Midpoints of `bins` equal cells of `[lo, hi]`.
pub fn bin_midpoints(iv: [f64; 2], bins: usize) -> Vec<f64> {
    let h = (iv[1] - iv[0]) / bins as f64;
    (0..bins).map(|k| iv[0] + (k as f64 + 0.5) * h).collect()
}

/// Full midpoint grid of a box, first axis most significant.
pub fn box_grid(b: &[[f64; 2]], bins: usize) -> Result<Vec<Vec<f64>>> {
    if b.len() > MAX_QUADRATURE_DIM {
        return Err(NceError::Config(format!(
            "midpoint grids are limited to {MAX_QUADRATURE_DIM} axes, got {}",
            b.len()
        )));
    }
    if bins < 1 {
        return Err(NceError::Config("need at least one bin per axis".into()));
    }
    let axes: Vec<Vec<f64>> = b.iter().map(|iv| bin_midpoints(*iv, bins)).collect();
    let total = bins.pow(b.len() as u32);
    if total > MAX_ENUMERATION {
        return Err(NceError::Config(format!("{total} grid cells exceed the enumeration limit")));
    }
    let mut pts = Vec::with_capacity(total);
    for mut k in 0..total {
        let mut x = vec![0.0; b.len()];
        for a in (0..b.len()).rev() {
            x[a] = axes[a][k % bins];
            k /= bins;
        }
        pts.push(x);
    }
    Ok(pts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFamilyModel {
    pub stats: Statistics,
    pub theta: Vec<f64>,
    #[serde(default)]
    pub log_scale_c: Option<f64>,
}

impl ExpFamilyModel {
    pub fn new(stats: Statistics, theta: Vec<f64>) -> Result<Self> {
        let m = Self { stats, theta, log_scale_c: None };
        m.validate()?;
        Ok(m)
    }

    pub fn with_log_scale(mut self, c: f64) -> Self {
        self.log_scale_c = Some(c);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.stats.validate()?;
        if self.theta.len() != self.stats.dim() {
            return Err(NceError::Config(format!(
                "theta has length {}, statistics need {}",
                self.theta.len(),
                self.stats.dim()
            )));
        }
        if self.theta.iter().chain(self.log_scale_c.iter()).any(|v| !v.is_finite()) {
            return Err(NceError::Config("model parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn log_phi(&self, x: &[f64]) -> f64 {
        self.stats.log_phi(&self.theta, x) + self.log_scale_c.unwrap_or(0.0)
    }

    /// `log Σ_x φ_θ(x)` by enumeration, or `log ∫ φ_θ` by midpoint quadrature on small boxes.
    pub fn log_partition(&self, bins: usize) -> Result<f64> {
        match self.stats.domain() {
            Domain::Finite(_) => {
                let pts = self.stats.enumerate()?;
                Ok(log_sum_exp(pts.iter().map(|x| self.log_phi(x))))
            }
            Domain::Box(b) => {
                let pts = box_grid(&b, bins)?;
                let cell = b.iter().map(|iv| (iv[1] - iv[0]) / bins as f64).product::<f64>();
                Ok(log_sum_exp(pts.iter().map(|x| self.log_phi(x))) + cell.ln())
            }
            Domain::Real(_) => Err(NceError::Config("partition function on unbounded domain".into())),
        }
    }

    /// Parameters of the discretized model `q_d ∝ φ_θ` as an augmented vector `(θ, −log Z)`.
    pub fn normalized_augmented(&self, bins: usize) -> Result<Vec<f64>> {
        let mut v = self.theta.clone();
        v.push(-self.log_partition(bins)?);
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    UniformBox { bounds: Vec<[f64; 2]> },
    FiniteUniform { points: Vec<Vec<f64>> },
    Discrete { points: Vec<Vec<f64>>, probs: Vec<f64> },
}

impl NoiseModel {
    /// The uniform distribution on the statistics' domain.
    pub fn uniform_for(stats: &Statistics) -> Result<Self> {
        match stats.domain() {
            Domain::Box(b) => Ok(NoiseModel::UniformBox { bounds: b }),
            Domain::Finite(pts) => Ok(NoiseModel::FiniteUniform { points: pts }),
            Domain::Real(_) => Err(NceError::Config("no uniform noise on an unbounded domain".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::UniformBox { bounds } => Domain::Box(bounds.clone()).validate(),
            NoiseModel::FiniteUniform { points } => Domain::Finite(points.clone()).validate(),
            NoiseModel::Discrete { points, probs } => {
                Domain::Finite(points.clone()).validate()?;
                if probs.len() != points.len() || probs.iter().any(|p| !(*p >= 0.0)) {
                    return Err(NceError::Config("discrete noise needs one non-negative prob per point".into()));
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > 1e-6 {
                    return Err(NceError::Config(format!("discrete noise probabilities sum to {s}, not 1")));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseModel::UniformBox { bounds } => bounds.len(),
            NoiseModel::FiniteUniform { points } | NoiseModel::Discrete { points, .. } => {
                points.first().map_or(0, |p| p.len())
            }
        }
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let outside = || NceError::Support(format!("{x:?}"));
        match self {
            NoiseModel::UniformBox { bounds } => {
                let d = Domain::Box(bounds.clone());
                if !d.contains(x) {
                    return Err(outside());
                }
                Ok(-d.volume().unwrap_or(1.0).ln())
            }
            NoiseModel::FiniteUniform { points } => {
                if points.iter().any(|p| p.as_slice() == x) {
                    Ok(-(points.len() as f64).ln())
                } else {
                    Err(outside())
                }
            }
            NoiseModel::Discrete { points, probs } => points
                .iter()
                .position(|p| p.as_slice() == x)
                .map(|k| probs[k])
                .filter(|p| *p > 0.0)
                .map(f64::ln)
                .ok_or_else(outside),
        }
    }

    /// Enumerated support with probabilities, for discrete noise.
    pub fn support(&self) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        match self {
            NoiseModel::UniformBox { .. } => None,
            NoiseModel::FiniteUniform { points } => {
                let w = 1.0 / points.len() as f64;
                Some((points.clone(), vec![w; points.len()]))
            }
            NoiseModel::Discrete { points, probs } => Some((points.clone(), probs.clone())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1,
    L2,
    Frobenius,
    MaxNorm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub kind: NormKind,
    #[serde(default)]
    pub radius: Option<f64>,
}

impl NormSpec {
    pub fn new(kind: NormKind) -> Self {
        Self { kind, radius: None }
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        match self.kind {
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::L2 | NormKind::Frobenius => dot(v, v).sqrt(),
            NormKind::MaxNorm => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        let dual = match self.kind {
            NormKind::L1 => NormKind::MaxNorm,
            NormKind::MaxNorm => NormKind::L1,
            k => k,
        };
        NormSpec::new(dual).norm(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConstants {
    pub kappa1: f64,
    pub kappa_bar: f64,
    pub kappa_star: f64,
}

/// Norm-equivalence constants `κ₁ = sup ‖θ‖₁/‖θ‖₂`, `κ̄ = sup R*(θ)/‖θ‖_max`, `κ* = sup R(θ)/‖θ‖₂`.
pub fn geometry_constants(kind: NormKind, p: usize) -> Result<GeometryConstants> {
    if p == 0 {
        return Err(NceError::Config("parameter dimension must be >= 1".into()));
    }
    let r = (p as f64).sqrt();
    let (kappa_bar, kappa_star) = match kind {
        NormKind::L2 | NormKind::Frobenius => (r, 1.0),
        NormKind::L1 => (1.0, r),
        NormKind::MaxNorm => (p as f64, 1.0),
    };
    Ok(GeometryConstants { kappa1: r, kappa_bar, kappa_star })
}

/// `log φ_θ(x) − log ν − log q_n(x)`.
pub fn log_ratio(m: &ExpFamilyModel, q: &NoiseModel, nu: f64, x: &[f64]) -> Result<f64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(NceError::Argument(format!("nu must be positive, got {nu}")));
    }
    if !m.stats.domain().contains(x) {
        return Err(NceError::Domain(format!("{x:?} outside the model domain")));
    }
    Ok(m.log_phi(x) - nu.ln() - q.log_density(x)?)
}

/// Precomputed statistics of a weighted point set.
///
/// Row `i` stores `ψ(x_i)`, the offset `h(x_i) − log q_n(x_i)` (or just
/// `h(x_i)` without a noise model) and an expectation weight. Weights of an
/// empirical sample are `1/n`; exact and quadrature measures carry
/// probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub n: usize,
    pub p: usize,
    pub psi: Vec<f64>,
    pub offset: Vec<f64>,
    pub weight: Vec<f64>,
}

impl Design {
    pub fn build(
        stats: &Statistics,
        points: &[Vec<f64>],
        weights: Option<Vec<f64>>,
        noise: Option<&NoiseModel>,
    ) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(NceError::Argument("empty sample".into()));
        }
        let p = stats.dim();
        let dom = stats.domain();
        let mut psi = vec![0.0; n * p];
        let mut offset = Vec::with_capacity(n);
        for (i, x) in points.iter().enumerate() {
            if !dom.contains(x) {
                return Err(NceError::Domain(format!("sample {i} = {x:?} outside the model domain")));
            }
            stats.eval_into(x, &mut psi[i * p..(i + 1) * p]);
            let lq = match noise {
                Some(q) => q.log_density(x).map_err(|_| NceError::Support(format!("sample {i} = {x:?}")))?,
                None => 0.0,
            };
            offset.push(stats.base(x) - lq);
        }
        let weight = match weights {
            Some(w) => {
                if w.len() != n || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(NceError::Argument("weights must be finite, non-negative, one per point".into()));
                }
                w
            }
            None => vec![1.0 / n as f64; n],
        };
        Ok(Self { n, p, psi, offset, weight })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.psi[i * self.p..(i + 1) * self.p]
    }

    /// `⟨θ, ψ(x_i)⟩ + offset_i`.
    pub fn log_r(&self, theta: &[f64], i: usize) -> f64 {
        dot(theta, self.row(i)) + self.offset[i]
    }

    /// Copy with a constant-1 statistic appended, so a log-scale `c` rides along as the last parameter.
    pub fn augmented(&self) -> Self {
        let p = self.p + 1;
        let mut psi = Vec::with_capacity(self.n * p);
        for i in 0..self.n {
            psi.extend_from_slice(self.row(i));
            psi.push(1.0);
        }
        Self { n: self.n, p, psi, offset: self.offset.clone(), weight: self.weight.clone() }
    }

    /// Restrict to a subset of statistic columns.
    pub fn select(&self, cols: &[usize]) -> Self {
        let p = cols.len();
        let mut psi = Vec::with_capacity(self.n * p);
        for i in 0..self.n {
            let r = self.row(i);
            psi.extend(cols.iter().map(|&c| r[c]));
        }
        Self { n: self.n, p, psi, offset: self.offset.clone(), weight: self.weight.clone() }
    }

    pub fn total_weight(&self) -> f64 {
        crate::reduce::sum(&self.weight)
    }
}

/// How `Z_α` and other noise expectations are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum ZMode {
    /// Exact: enumeration on finite domains, closed-form `E_q[ψ]` at α = 0,
    /// and midpoint quadrature with the default bin count on boxes of up to three axes.
    Analytic,
    Quadrature { bins: usize },
    /// Empirical mean over a supplied noise sample.
    MonteCarlo,
}

/// Noise-side expectation operator used by the centered objectives.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseExpectation {
    Points(Design),
    /// Closed-form `E_q[ψ]` and `E_q[h − log q_n]`; valid at α = 0 only.
    Moments { mean_psi: Vec<f64>, mean_offset: f64 },
}

/// Closed-form `E_q[ψ]` for uniform noise on a box.
fn uniform_box_moments(stats: &Statistics, bounds: &[[f64; 2]]) -> Option<Vec<f64>> {
    let m1 = |iv: [f64; 2]| 0.5 * (iv[0] + iv[1]);
    let m2 = |iv: [f64; 2]| (iv[0] * iv[0] + iv[0] * iv[1] + iv[1] * iv[1]) / 3.0;
    match stats {
        Statistics::Linear1d { domain: Domain::Box(_) } => Some(vec![m1(bounds[0])]),
        Statistics::Quadratic { dim_x, .. } => {
            let d = *dim_x;
            let mut v = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    v[a * d + b] = if a == b { m2(bounds[a]) } else { m1(bounds[a]) * m1(bounds[b]) };
                }
            }
            Some(v)
        }
        _ => None,
    }
}

/// Midpoint-grid design for the noise distribution on a box.
pub fn noise_quadrature(stats: &Statistics, q: &NoiseModel, bins: usize) -> Result<Design> {
    let NoiseModel::UniformBox { bounds } = q else {
        return Err(NceError::Config("quadrature needs uniform box noise".into()));
    };
    if stats.domain() != Domain::Box(bounds.clone()) {
        return Err(NceError::Config("noise box must coincide with the model domain".into()));
    }
    let pts = box_grid(bounds, bins)?;
    let w = vec![1.0 / pts.len() as f64; pts.len()];
    Design::build(stats, &pts, Some(w), Some(q))
}

pub fn noise_expectation(
    stats: &Statistics,
    q: &NoiseModel,
    alpha: f64,
    mode: ZMode,
    sample: Option<&[Vec<f64>]>,
) -> Result<NoiseExpectation> {
    q.validate()?;
    match mode {
        ZMode::MonteCarlo => {
            let s = sample.ok_or_else(|| NceError::Argument("montecarlo mode needs a noise sample".into()))?;
            if s.is_empty() {
                return Err(NceError::Argument("empty noise sample".into()));
            }
            Ok(NoiseExpectation::Points(Design::build(stats, s, None, Some(q))?))
        }
        ZMode::Quadrature { bins } => Ok(NoiseExpectation::Points(noise_quadrature(stats, q, bins)?)),
        ZMode::Analytic => {
            if let Some((pts, probs)) = q.support() {
                return Ok(NoiseExpectation::Points(Design::build(stats, &pts, Some(probs), Some(q))?));
            }
            let NoiseModel::UniformBox { bounds } = q else { unreachable!() };
            if alpha == 0.0 {
                if let Some(mean_psi) = uniform_box_moments(stats, bounds) {
                    let vol = Domain::Box(bounds.clone()).volume().unwrap_or(1.0);
                    return Ok(NoiseExpectation::Moments { mean_psi, mean_offset: vol.ln() });
                }
            }
            if bounds.len() <= MAX_QUADRATURE_DIM {
                return Ok(NoiseExpectation::Points(noise_quadrature(stats, q, DEFAULT_BINS)?));
            }
            Err(NceError::Config(format!(
                "analytic Z_alpha at alpha = {alpha} on a {}-dimensional box is not computable",
                bounds.len()
            )))
        }
    }
}

/// `log Z_α(θ)` together with the tilted mean `E_q[ψ ρ̃^α]` and, optionally,
/// the tilted covariance `E_q[ψψᵀρ̃^α] − mmᵀ` (upper triangle, row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct Centering {
    pub log_z: f64,
    pub mean: Vec<f64>,
    pub cov: Option<Vec<f64>>,
}

pub fn centering(ne: &NoiseExpectation, theta: &[f64], alpha: f64, with_cov: bool) -> Result<Centering> {
    match ne {
        NoiseExpectation::Moments { mean_psi, mean_offset } => {
            if alpha != 0.0 {
                return Err(NceError::Config("closed-form noise moments only serve alpha = 0".into()));
            }
            let p = mean_psi.len();
            Ok(Centering {
                log_z: dot(theta, mean_psi) + mean_offset,
                mean: mean_psi.clone(),
                cov: with_cov.then(|| vec![0.0; p * (p + 1) / 2]),
            })
        }
        NoiseExpectation::Points(d) => centering_points(d, 0..d.n, theta, alpha, with_cov),
    }
}

/// Centering over rows `range` of `d`.
pub(crate) fn centering_points(
    d: &Design,
    range: std::ops::Range<usize>,
    theta: &[f64],
    alpha: f64,
    with_cov: bool,
) -> Result<Centering> {
    let p = d.p;
    let lr: Vec<f64> = range.clone().map(|i| d.log_r(theta, i)).collect();
    let w = &d.weight[range.clone()];
    let wsum: f64 = w.iter().sum();
    if !(wsum > 0.0) {
        return Err(NceError::Argument("noise weights sum to zero".into()));
    }
    let (log_z, s): (f64, Vec<f64>) = if alpha == 0.0 {
        let lz = lr.iter().zip(w).map(|(l, w)| l * w).sum::<f64>() / wsum;
        (lz, w.iter().map(|x| x / wsum).collect())
    } else {
        let a: Vec<f64> = lr.iter().zip(w).map(|(l, w)| w.ln() + alpha * l).collect();
        let lse = log_sum_exp(a.iter().copied());
        ((lse - wsum.ln()) / alpha, a.iter().map(|x| (x - lse).exp()).collect())
    };
    if !log_z.is_finite() {
        return Err(NceError::Numeric { index: range.start, what: "non-finite log Z_alpha".into() });
    }
    let mut mean = vec![0.0; p];
    for (k, i) in range.clone().enumerate() {
        for (m, x) in mean.iter_mut().zip(d.row(i)) {
            *m += s[k] * x;
        }
    }
    let cov = with_cov.then(|| {
        let mut c = vec![0.0; p * (p + 1) / 2];
        let mut dev = vec![0.0; p];
        for (k, i) in range.clone().enumerate() {
            for (j, x) in d.row(i).iter().enumerate() {
                dev[j] = x - mean[j];
            }
            let mut idx = 0;
            for a in 0..p {
                let u = s[k] * dev[a];
                for b in a..p {
                    c[idx] += u * dev[b];
                    idx += 1;
                }
            }
        }
        c
    });
    Ok(Centering { log_z, mean, cov })
}

/// `log ρ̃_{θ;α}(x) = log ρ_θ(x) − log Z_α(θ)` (ν = 1; the model's log-scale cancels).
pub fn centered_log_ratio(
    m: &ExpFamilyModel,
    q: &NoiseModel,
    alpha: f64,
    x: &[f64],
    mode: ZMode,
    sample: Option<&[Vec<f64>]>,
) -> Result<f64> {
    m.validate()?;
    let ne = noise_expectation(&m.stats, q, alpha, mode, sample)?;
    let c = centering(&ne, &m.theta, alpha, false)?;
    let lr = log_ratio(m, q, 1.0, x)? - m.log_scale_c.unwrap_or(0.0);
    Ok(lr - c.log_z)
}

/// The data distribution `q_d ∝ φ_θ` as a weighted design: exact on finite
/// domains, midpoint-discretized on boxes.
pub fn model_measure(m: &ExpFamilyModel, q: Option<&NoiseModel>, bins: usize) -> Result<Design> {
    let pts = match m.stats.domain() {
        Domain::Finite(_) => m.stats.enumerate()?,
        Domain::Box(b) => box_grid(&b, bins)?,
        Domain::Real(_) => return Err(NceError::Config("model measure on an unbounded domain".into())),
    };
    let lp: Vec<f64> = pts.iter().map(|x| m.log_phi(x)).collect();
    let lse = log_sum_exp(lp.iter().copied());
    let w = lp.iter().map(|l| (l - lse).exp()).collect();
    Design::build(&m.stats, &pts, Some(w), q)
}

use serde::{Deserialize, Serialize};

use crate::error::{NceError, Result};
use crate::generators::RatioKernel;
use crate::models::{ExpFamilyModel, Statistics};
use crate::objectives::{check_theta, Objective, ObjectiveEval, Want};
use crate::reduce::{tree_reduce, Accum};
use crate::sampling::ChannelBase;

/// Data points with `K` conditional samples each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondDataset {
    pub data: Vec<Vec<f64>>,
    /// `cond[i][j]` is the j-th conditional sample drawn from `π(·|data[i])`.
    pub cond: Vec<Vec<Vec<f64>>>,
    /// Optional per-datum weights (population expectations); uniform when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub epsilon: f64,
    pub base_kind: ChannelBase,
}

impl CondDataset {
    /// Conditional samples `y_ij = x_i + ε v_ij` from unit-scale slices `v`.
    pub fn from_slices(data: Vec<Vec<f64>>, slices: &[Vec<Vec<f64>>], epsilon: f64, base_kind: ChannelBase) -> Self {
        let cond = data
            .iter()
            .zip(slices)
            .map(|(x, vs)| vs.iter().map(|v| x.iter().zip(v).map(|(a, b)| a + epsilon * b).collect()).collect())
            .collect();
        Self { data, cond, weights: None, epsilon, base_kind }
    }

    pub fn k(&self) -> usize {
        self.cond.first().map_or(0, |c| c.len())
    }
}

/// Pair table: `d = ψ(x) − ψ(y)` and `t0 = h(x) − h(y)` per (datum, conditional sample).
#[derive(Clone, Debug, PartialEq)]
pub struct PairDesign {
    pub n: usize,
    pub p: usize,
    pub d: Vec<f64>,
    pub t0: Vec<f64>,
    pub weight: Vec<f64>,
}

impl PairDesign {
    pub fn build(stats: &Statistics, cd: &CondDataset) -> Result<Self> {
        if !cd.base_kind.is_symmetric() {
            return Err(NceError::Unsupported("only symmetric channels are supported".into()));
        }
        let nd = cd.data.len();
        if nd == 0 || cd.cond.len() != nd {
            return Err(NceError::Argument("need one conditional-sample list per datum".into()));
        }
        let k = cd.k();
        if k == 0 || cd.cond.iter().any(|c| c.len() != k) {
            return Err(NceError::Argument("every datum needs the same K >= 1 conditional samples".into()));
        }
        if !(cd.epsilon >= 0.0) {
            return Err(NceError::Argument(format!("epsilon must be non-negative, got {}", cd.epsilon)));
        }
        let wx = match &cd.weights {
            Some(w) if w.len() == nd => w.clone(),
            Some(_) => return Err(NceError::Argument("one weight per datum required".into())),
            None => vec![1.0 / nd as f64; nd],
        };
        let p = stats.dim();
        let dx = stats.dim_x();
        let n = nd * k;
        let mut d = vec![0.0; n * p];
        let mut t0 = Vec::with_capacity(n);
        let mut weight = Vec::with_capacity(n);
        let mut px = vec![0.0; p];
        let mut py = vec![0.0; p];
        for (i, x) in cd.data.iter().enumerate() {
            if x.len() != dx {
                return Err(NceError::Argument(format!("datum {i} has wrong dimension")));
            }
            stats.eval_into(x, &mut px);
            for (j, y) in cd.cond[i].iter().enumerate() {
                if y.len() != dx {
                    return Err(NceError::Argument(format!("conditional sample ({i},{j}) has wrong dimension")));
                }
                stats.eval_into(y, &mut py);
                let r = i * k + j;
                for c in 0..p {
                    d[r * p + c] = px[c] - py[c];
                }
                t0.push(stats.base(x) - stats.base(y));
                weight.push(wx[i] / k as f64);
            }
        }
        Ok(Self { n, p, d, t0, weight })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.d[r * self.p..(r + 1) * self.p]
    }
}

/// Empirical f-CondNCE: per pair `−f'(ρ) + ρ⁻¹f'(ρ⁻¹) − f(ρ⁻¹)` with `ρ = φ(x)/φ(y)`.
///
/// In `t = log ρ` the pair loss is `data_side(t) + noise_side(−t)`, so the
/// gradient coefficient is `ζ1_d(ρ) − ζ1_n(1/ρ)` and the Hessian coefficient
/// `ζ2_d(ρ) + ζ2_n(1/ρ)`, both multiplying `d = ψ(x) − ψ(y)`.
pub fn condnce_pairs<K: RatioKernel + ?Sized>(
    pd: &PairDesign,
    kernel: &K,
    theta: &[f64],
    want: Want,
) -> Result<ObjectiveEval> {
    check_theta(theta, pd.p)?;
    let hess = want.hess();
    let acc = tree_reduce(
        pd.n,
        |r| {
            let mut a = Accum::new(pd.p, hess);
            for i in r {
                let row = pd.row(i);
                let t = crate::linalg::dot(theta, row) + pd.t0[i];
                let ds = kernel.data_side(t);
                let ns = kernel.noise_side(-t);
                let (v, g1, g2) = (ds.value + ns.value, ds.z1 - ns.z1, ds.z2 + ns.z2);
                if !(v.is_finite() && g1.is_finite() && g2.is_finite()) {
                    return Err(NceError::Numeric { index: i, what: format!("pair term overflowed at log-ratio {t}") });
                }
                let w = pd.weight[i];
                a.add(w * v, w * g1, w * g2, row);
            }
            Ok(a)
        },
        Accum::merge,
    )?;
    Ok(ObjectiveEval::from_accum(acc.unwrap_or_else(|| Accum::new(pd.p, hess)), want))
}

pub fn condnce<K: RatioKernel + ?Sized>(
    m: &ExpFamilyModel,
    cd: &CondDataset,
    kernel: &K,
    want: Want,
) -> Result<ObjectiveEval> {
    m.validate()?;
    let pd = PairDesign::build(&m.stats, cd)?;
    condnce_pairs(&pd, kernel, &m.theta, want)
}

pub struct CondProblem<'k, K: RatioKernel + ?Sized> {
    pub pairs: PairDesign,
    pub kernel: &'k K,
}

impl<'k, K: RatioKernel + ?Sized> CondProblem<'k, K> {
    pub fn new(stats: &Statistics, cd: &CondDataset, kernel: &'k K) -> Result<Self> {
        Ok(Self { pairs: PairDesign::build(stats, cd)?, kernel })
    }
}

impl<K: RatioKernel + ?Sized> Objective for CondProblem<'_, K> {
    fn dim(&self) -> usize {
        self.pairs.p
    }

    fn eval(&self, theta: &[f64], want: Want) -> Result<ObjectiveEval> {
        condnce_pairs(&self.pairs, self.kernel, theta, want)
    }

    fn name(&self) -> String {
        format!("condnce[{}]", self.kernel.label())
    }
}

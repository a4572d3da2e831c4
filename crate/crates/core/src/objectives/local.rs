use serde::{Deserialize, Serialize};

use crate::error::{NceError, Result};
use crate::generators::Generator;
use crate::models::{bin_midpoints, centering_points, Design, Statistics, ZMode, DEFAULT_BINS};
use crate::objectives::centnce::{add_tilted_cov, cent_data_pass};
use crate::objectives::{check_theta, fnce_design, Objective, ObjectiveEval, Want};
use crate::reduce::{tree_reduce, unpack_upper, Accum};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LocalEstimator {
    Fnce { generator: Generator, nu: f64 },
    Cent { alpha: f64 },
}

/// Node-conditional feature tables for node `i`.
///
/// `obs` holds the observed `ψ_{I_i}(x)` per datum; `alt` holds, for every
/// datum and every value `v_k` of the node's noise distribution, the
/// statistics with `x_i` replaced by `v_k`. Offsets are `−log q_n(x_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalDesign {
    pub node: usize,
    pub indices: Vec<usize>,
    pub obs: Design,
    pub alt: Design,
    /// Alternatives per datum.
    pub m: usize,
}

enum NodeDomain {
    Values(Vec<f64>),
    Interval([f64; 2]),
}

impl LocalDesign {
    pub fn build(
        stats: &Statistics,
        node: usize,
        data: &[Vec<f64>],
        mode: ZMode,
        local_sample: Option<&[f64]>,
    ) -> Result<Self> {
        let indices = stats.node_indices(node)?;
        if data.is_empty() {
            return Err(NceError::Argument("empty sample".into()));
        }
        let dom = if let Some(v) = stats.coordinate_values(node) {
            NodeDomain::Values(v)
        } else if let Some(iv) = stats.coordinate_interval(node) {
            NodeDomain::Interval(iv)
        } else {
            return Err(NceError::Config("node conditional needs a bounded coordinate domain".into()));
        };
        let log_q = match &dom {
            NodeDomain::Values(v) => -(v.len() as f64).ln(),
            NodeDomain::Interval(iv) => -(iv[1] - iv[0]).ln(),
        };
        let in_support = |x: f64| match &dom {
            NodeDomain::Values(v) => v.contains(&x),
            NodeDomain::Interval(iv) => iv[0] <= x && x <= iv[1],
        };
        let values: Vec<f64> = match (mode, &dom) {
            (ZMode::Analytic, NodeDomain::Values(v)) => v.clone(),
            (ZMode::Analytic, NodeDomain::Interval(iv)) => bin_midpoints(*iv, DEFAULT_BINS),
            (ZMode::Quadrature { bins }, NodeDomain::Interval(iv)) if bins >= 1 => bin_midpoints(*iv, bins),
            (ZMode::Quadrature { .. }, _) => {
                return Err(NceError::Config("node quadrature needs an interval coordinate".into()))
            }
            (ZMode::MonteCarlo, _) => {
                let s = local_sample.ok_or_else(|| NceError::Argument("montecarlo mode needs a node noise sample".into()))?;
                if s.is_empty() {
                    return Err(NceError::Argument("empty node noise sample".into()));
                }
                if let Some(v) = s.iter().find(|v| !in_support(**v)) {
                    return Err(NceError::Support(format!("node noise value {v}")));
                }
                s.to_vec()
            }
        };
        let m = values.len();
        let pl = indices.len();
        let n = data.len();
        let mut full = vec![0.0; stats.dim()];
        let mut obs_psi = Vec::with_capacity(n * pl);
        let mut alt_psi = Vec::with_capacity(n * m * pl);
        let dom_full = stats.domain();
        for (r, x) in data.iter().enumerate() {
            if !dom_full.contains(x) {
                return Err(NceError::Domain(format!("sample {r} = {x:?} outside the model domain")));
            }
            if !in_support(x[node]) {
                return Err(NceError::Support(format!("sample {r}: node value {}", x[node])));
            }
            stats.eval_into(x, &mut full);
            obs_psi.extend(indices.iter().map(|&c| full[c]));
            let mut xa = x.clone();
            for &v in &values {
                xa[node] = v;
                stats.eval_into(&xa, &mut full);
                alt_psi.extend(indices.iter().map(|&c| full[c]));
            }
        }
        let w = 1.0 / n as f64;
        let obs = Design { n, p: pl, psi: obs_psi, offset: vec![-log_q; n], weight: vec![w; n] };
        let alt = Design {
            n: n * m,
            p: pl,
            psi: alt_psi,
            offset: vec![-log_q; n * m],
            weight: vec![w / m as f64; n * m],
        };
        Ok(Self { node, indices, obs, alt, m })
    }

    /// Reweight the data rows, e.g. with exact probabilities.
    pub fn with_weights(mut self, w: &[f64]) -> Result<Self> {
        if w.len() != self.obs.n {
            return Err(NceError::Argument("one weight per datum required".into()));
        }
        for (r, wr) in w.iter().enumerate() {
            self.obs.weight[r] = *wr;
            for k in 0..self.m {
                self.alt.weight[r * self.m + k] = wr / self.m as f64;
            }
        }
        Ok(self)
    }

    /// θ restricted to this node's block.
    pub fn block(&self, theta_full: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| theta_full[i]).collect()
    }
}

pub fn local_eval(ld: &LocalDesign, est: LocalEstimator, theta: &[f64], want: Want) -> Result<ObjectiveEval> {
    check_theta(theta, ld.obs.p)?;
    match est {
        LocalEstimator::Fnce { generator, nu } => {
            generator.validate()?;
            fnce_design(&ld.obs, &ld.alt, &generator, nu, theta, want)
        }
        LocalEstimator::Cent { alpha } => {
            let p = ld.obs.p;
            let hess = want.hess();
            let acc = tree_reduce(
                ld.obs.n,
                |r| {
                    let mut a = Accum::new(p, hess);
                    for n in r {
                        let c = centering_points(&ld.alt, n * ld.m..(n + 1) * ld.m, theta, alpha, hess && alpha != 0.0)?;
                        let (mut b, mass) = cent_data_pass(&ld.obs, n..n + 1, &c, theta, alpha, hess)?;
                        add_tilted_cov(&mut b, &c, alpha, mass);
                        a = a.merge(b);
                    }
                    Ok(a)
                },
                Accum::merge,
            )?
            .unwrap_or_else(|| Accum::new(p, hess));
            Ok(ObjectiveEval {
                value: acc.value,
                grad: if want >= Want::Grad { acc.grad } else { Vec::new() },
                hess: acc.hess.map(|h| unpack_upper(p, &h)),
            })
        }
    }
}

/// Local NCE for node `node`, evaluated at the node block of `theta_full`.
#[allow(clippy::too_many_arguments)]
pub fn local_nce(
    stats: &Statistics,
    theta_full: &[f64],
    node: usize,
    est: LocalEstimator,
    data: &[Vec<f64>],
    mode: ZMode,
    local_sample: Option<&[f64]>,
    want: Want,
) -> Result<ObjectiveEval> {
    stats.validate()?;
    check_theta(theta_full, stats.dim())?;
    let ld = LocalDesign::build(stats, node, data, mode, local_sample)?;
    let block = ld.block(theta_full);
    local_eval(&ld, est, &block, want)
}

pub struct LocalProblem {
    pub design: LocalDesign,
    pub estimator: LocalEstimator,
}

impl Objective for LocalProblem {
    fn dim(&self) -> usize {
        self.design.obs.p
    }

    fn eval(&self, theta: &[f64], want: Want) -> Result<ObjectiveEval> {
        local_eval(&self.design, self.estimator, theta, want)
    }

    fn name(&self) -> String {
        match self.estimator {
            LocalEstimator::Fnce { generator, .. } => format!("local_fnce[{generator:?}, node {}]", self.design.node),
            LocalEstimator::Cent { alpha } => format!("local_centnce[alpha={alpha}, node {}]", self.design.node),
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{NceError, Result};
use crate::generators::RatioKernel;
use crate::linalg::dot;
use crate::models::ExpFamilyModel;
use crate::reduce;

fn check_points(m: &ExpFamilyModel, data: &[Vec<f64>]) -> Result<()> {
    m.validate()?;
    if data.is_empty() {
        return Err(NceError::Argument("empty sample".into()));
    }
    let d = m.stats.dim_x();
    if data.iter().any(|x| x.len() != d) {
        return Err(NceError::Argument(format!("samples must have dimension {d}")));
    }
    Ok(())
}

/// `E[tr ∇²_x log φ + ½‖∇_x log φ‖²]`, optionally with per-point weights summing to one.
pub fn sm_objective(m: &ExpFamilyModel, data: &[Vec<f64>], weights: Option<&[f64]>) -> Result<f64> {
    check_points(m, data)?;
    let mut terms = Vec::with_capacity(data.len());
    for (i, x) in data.iter().enumerate() {
        let s = m.stats.score(&m.theta, x)?;
        let h = m.stats.score_jacobian(&m.theta, x)?;
        let w = weights.map_or(1.0 / data.len() as f64, |w| w[i]);
        terms.push(w * (h.trace() + 0.5 * dot(&s, &s)));
    }
    Ok(reduce::sum(&terms))
}

/// `E[vᵀ∇²_x log φ v + ½(vᵀ∇_x log φ)²]` averaged uniformly over all (datum, slice) pairs.
pub fn ssm_objective(m: &ExpFamilyModel, data: &[Vec<f64>], slices: &[Vec<Vec<f64>>]) -> Result<f64> {
    Ok(slice_terms(m, data, slices)?.1)
}

/// (mean of `∇_x log φᵀ v`, SSM value).
fn slice_terms(m: &ExpFamilyModel, data: &[Vec<f64>], slices: &[Vec<Vec<f64>>]) -> Result<(f64, f64)> {
    check_points(m, data)?;
    if slices.len() != data.len() || slices.iter().any(|s| s.is_empty()) {
        return Err(NceError::Argument("need at least one slice per datum".into()));
    }
    let d = m.stats.dim_x();
    let total: usize = slices.iter().map(|s| s.len()).sum();
    let mut lin = Vec::with_capacity(total);
    let mut quad = Vec::with_capacity(total);
    for (x, vs) in data.iter().zip(slices) {
        let s = m.stats.score(&m.theta, x)?;
        let h = m.stats.score_jacobian(&m.theta, x)?;
        for v in vs {
            if v.len() != d {
                return Err(NceError::Argument(format!("slices must have dimension {d}")));
            }
            let sv = dot(&s, v);
            let mut vhv = 0.0;
            for a in 0..d {
                for b in 0..d {
                    vhv += v[a] * h[(a, b)] * v[b];
                }
            }
            lin.push(sv);
            quad.push(vhv + 0.5 * sv * sv);
        }
    }
    Ok((reduce::mean(&lin), reduce::mean(&quad)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorCoeffs {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl TaylorCoeffs {
    pub fn at(&self, eps: f64) -> f64 {
        self.c0 + self.c1 * eps + self.c2 * eps * eps
    }
}

/// Small-ε expansion `c0 + c1 ε + c2 ε²` of the empirical CondNCE objective with `y = x + ε v`.
pub fn condnce_taylor_coeffs<K: RatioKernel + ?Sized>(
    m: &ExpFamilyModel,
    data: &[Vec<f64>],
    slices: &[Vec<Vec<f64>>],
    kernel: &K,
) -> Result<TaylorCoeffs> {
    let (lin, ssm) = slice_terms(m, data, slices)?;
    let (f1, f2) = kernel.at_one();
    Ok(TaylorCoeffs { c0: -f1, c1: 2.0 * f2 * lin, c2: f2 * ssm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Generator;
    use crate::models::Statistics;

    #[test]
    fn gaussian_sm_population() {
        // Dense grid over N(μ, 1) data; L_sm → −1 + ½ E(x−μ)² = −0.5.
        let mu = 0.7;
        let m = ExpFamilyModel::new(Statistics::GaussianMean1d, vec![mu]).unwrap();
        let n = 20_001;
        let pts: Vec<Vec<f64>> = (0..n).map(|k| vec![mu - 10.0 + 20.0 * k as f64 / (n - 1) as f64]).collect();
        let dens: Vec<f64> = pts.iter().map(|x| (-0.5 * (x[0] - mu) * (x[0] - mu)).exp()).collect();
        let z: f64 = dens.iter().sum();
        let w: Vec<f64> = dens.iter().map(|d| d / z).collect();
        let v = sm_objective(&m, &pts, Some(&w)).unwrap();
        assert!((v + 0.5).abs() < 1e-9, "{v}");
    }

    #[test]
    fn unit_slices_reduce_to_sm() {
        let m = ExpFamilyModel::new(Statistics::GaussianMean1d, vec![0.3]).unwrap();
        let data = vec![vec![0.1], vec![-1.2], vec![2.5]];
        let slices = vec![vec![vec![1.0]]; 3];
        let a = ssm_objective(&m, &data, &slices).unwrap();
        let b = sm_objective(&m, &data, None).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn log_coefficients() {
        let m = ExpFamilyModel::new(Statistics::GaussianMean1d, vec![1.0]).unwrap();
        let data = vec![vec![0.2], vec![1.7]];
        let slices = vec![vec![vec![1.0], vec![-1.0]]; 2];
        let c = condnce_taylor_coeffs(&m, &data, &slices, &Generator::Log).unwrap();
        assert!((c.c0 - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(c.c1, 0.0);
    }

    #[test]
    fn spin_has_no_score() {
        let m = ExpFamilyModel::new(Statistics::Spin { dim_x: 2 }, vec![0.0; 3]).unwrap();
        assert!(matches!(sm_objective(&m, &[vec![1.0, 1.0]], None), Err(NceError::Unsupported(_))));
    }
}

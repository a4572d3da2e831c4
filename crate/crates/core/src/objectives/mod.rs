//! Estimator objectives with analytic gradients and Hessians.
//!
//! Each estimator has two entry points: a convenience function taking a model,
//! noise model and raw samples, and a `*Problem` struct that precomputes the
//! feature tables once and implements [`Objective`] for repeated evaluation
//! by the optimizer.

mod centnce;
mod condnce;
mod fnce;
mod local;
mod score;

pub use centnce::{centnce, centnce_design, CentProblem};
pub use condnce::{condnce, condnce_pairs, CondDataset, CondProblem, PairDesign};
pub use fnce::{fnce, fnce_design, FnceProblem};
pub use local::{local_eval, local_nce, LocalDesign, LocalEstimator, LocalProblem};
pub use score::{condnce_taylor_coeffs, sm_objective, ssm_objective, TaylorCoeffs};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{NceError, Result};
use crate::reduce::{tree_reduce, unpack_upper, Accum};
use crate::models::Design;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Want {
    Value,
    Grad,
    Hess,
}

impl Want {
    fn grad(self) -> bool {
        self >= Want::Grad
    }
    fn hess(self) -> bool {
        self >= Want::Hess
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    /// Empty when only the value was requested.
    pub grad: Vec<f64>,
    pub hess: Option<DMatrix<f64>>,
}

impl ObjectiveEval {
    fn from_accum(a: Accum, want: Want) -> Self {
        let p = a.grad.len();
        Self {
            value: a.value,
            grad: if want.grad() { a.grad } else { Vec::new() },
            hess: a.hess.map(|h| unpack_upper(p, &h)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub data: Vec<Vec<f64>>,
    #[serde(default)]
    pub noise: Option<Vec<Vec<f64>>>,
}

impl Dataset {
    pub fn new(data: Vec<Vec<f64>>, noise: Option<Vec<Vec<f64>>>) -> Self {
        Self { data, noise }
    }

    fn noise_or_err(&self) -> Result<&[Vec<f64>]> {
        match &self.noise {
            Some(n) if !n.is_empty() => Ok(n),
            _ => Err(NceError::Argument("this objective needs a noise sample".into())),
        }
    }
}

/// A smooth objective over a flat parameter vector.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    /// Leading coordinates subject to the regularizer; trailing ones (such as
    /// the f-NCE log-scale) are left unpenalized.
    fn penalized_dim(&self) -> usize {
        self.dim()
    }
    fn eval(&self, theta: &[f64], want: Want) -> Result<ObjectiveEval>;
    /// A global Lipschitz constant of the gradient, when one is known.
    fn smoothness_bound(&self) -> Option<f64> {
        None
    }
    fn name(&self) -> String;
}

/// Weighted sum over design rows of a per-row loss of `t = ⟨θ, ψ⟩ + offset + shift`.
///
/// `side(t)` returns `(value, dvalue/dt, d²value/dt²)`; the accumulator adds
/// `scale·w·value`, `scale·w·dvalue/dt·ψ` and `scale·w·d²value/dt²·ψψᵀ`.
pub(crate) fn accumulate_rows<F>(
    d: &Design,
    theta: &[f64],
    shift: f64,
    scale: f64,
    hess: bool,
    label: &str,
    side: F,
) -> Result<Accum>
where
    F: Fn(f64) -> (f64, f64, f64) + Sync,
{
    let acc = tree_reduce(
        d.n,
        |r| {
            let mut a = Accum::new(d.p, hess);
            for i in r {
                let t = d.log_r(theta, i) + shift;
                let (v, g1, g2) = side(t);
                if !(v.is_finite() && g1.is_finite() && g2.is_finite()) {
                    return Err(NceError::Numeric {
                        index: i,
                        what: format!("{label} term overflowed at log-ratio {t}"),
                    });
                }
                let w = scale * d.weight[i];
                a.add(w * v, w * g1, w * g2, d.row(i));
            }
            Ok(a)
        },
        Accum::merge,
    )?;
    Ok(acc.unwrap_or_else(|| Accum::new(d.p, hess)))
}

pub(crate) fn check_theta(theta: &[f64], p: usize) -> Result<()> {
    if theta.len() != p {
        return Err(NceError::Argument(format!("parameter has length {}, expected {p}", theta.len())));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(NceError::Argument("parameter has non-finite entries".into()));
    }
    Ok(())
}

/// Largest absolute statistic in a design.
pub(crate) fn design_psi_max(d: &Design) -> f64 {
    d.psi.iter().fold(0.0, |m, x| m.max(x.abs()))
}

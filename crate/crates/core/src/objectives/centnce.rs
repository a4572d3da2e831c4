use crate::error::{NceError, Result};
use crate::models::{centering, Centering, Design, ExpFamilyModel, NoiseExpectation, NoiseModel, ZMode};
use crate::objectives::{check_theta, design_psi_max, Dataset, Objective, ObjectiveEval, Want};
use crate::reduce::{tree_reduce, Accum};

/// Data-side pass of α-CentNCE given the noise centering.
///
/// Value `E_d[ρ̃^{α−1}]/(1−α)` (α ≠ 1) or `−E_d[log ρ̃]` (α = 1), gradient
/// `−E_d[ρ̃^{α−1}(ψ − m)]`, Hessian
/// `(1−α)E_d[ρ̃^{α−1}(ψ−m)(ψ−m)ᵀ] + α E_d[ρ̃^{α−1}]·S`.
pub(crate) fn cent_data_pass(
    data: &Design,
    rows: std::ops::Range<usize>,
    c: &Centering,
    theta: &[f64],
    alpha: f64,
    hess: bool,
) -> Result<(Accum, f64)> {
    let p = data.p;
    let start = rows.start;
    let out = tree_reduce(
        rows.len(),
        |r| {
            let mut a = Accum::new(p, hess);
            let mut mass = 0.0;
            let mut dev = vec![0.0; p];
            for k in r {
                let i = start + k;
                let lt = data.log_r(theta, i) - c.log_z;
                let e = ((alpha - 1.0) * lt).exp();
                let v = if alpha == 1.0 { -lt } else { e / (1.0 - alpha) };
                if !(v.is_finite() && e.is_finite()) {
                    return Err(NceError::Numeric {
                        index: i,
                        what: format!("centered ratio overflowed at log-ratio {lt}"),
                    });
                }
                for (j, x) in data.row(i).iter().enumerate() {
                    dev[j] = x - c.mean[j];
                }
                let w = data.weight[i];
                a.add(w * v, -w * e, w * (1.0 - alpha) * e, &dev);
                mass += w * e;
            }
            Ok((a, mass))
        },
        |(a, m1), (b, m2)| (a.merge(b), m1 + m2),
    )?;
    Ok(out.unwrap_or_else(|| (Accum::new(p, hess), 0.0)))
}

pub(crate) fn add_tilted_cov(a: &mut Accum, c: &Centering, alpha: f64, mass: f64) {
    if let (Some(h), Some(s)) = (a.hess.as_mut(), c.cov.as_ref()) {
        for (x, y) in h.iter_mut().zip(s) {
            *x += alpha * mass * y;
        }
    }
}

/// α-CentNCE over a data design and a noise expectation (ν = 1, data offsets relative to `q_n`).
pub fn centnce_design(
    data: &Design,
    noise: &NoiseExpectation,
    alpha: f64,
    theta: &[f64],
    want: Want,
) -> Result<ObjectiveEval> {
    check_theta(theta, data.p)?;
    if !alpha.is_finite() {
        return Err(NceError::Config(format!("alpha must be finite, got {alpha}")));
    }
    let hess = want.hess();
    let c = centering(noise, theta, alpha, hess && alpha != 0.0)?;
    if c.mean.len() != data.p {
        return Err(NceError::Argument("data and noise designs differ in width".into()));
    }
    let (mut a, mass) = cent_data_pass(data, 0..data.n, &c, theta, alpha, hess)?;
    add_tilted_cov(&mut a, &c, alpha, mass);
    Ok(ObjectiveEval::from_accum(a, want))
}

/// α-CentNCE on raw samples; montecarlo mode takes the noise sample from `ds.noise`.
pub fn centnce(
    m: &ExpFamilyModel,
    q: &NoiseModel,
    alpha: f64,
    ds: &Dataset,
    mode: ZMode,
    want: Want,
) -> Result<ObjectiveEval> {
    m.validate()?;
    CentProblem::new(m, q, alpha, ds, mode)?.eval(&m.theta, want)
}

pub struct CentProblem {
    pub data: Design,
    pub noise: NoiseExpectation,
    pub alpha: f64,
}

impl CentProblem {
    pub fn new(m: &ExpFamilyModel, q: &NoiseModel, alpha: f64, ds: &Dataset, mode: ZMode) -> Result<Self> {
        q.validate()?;
        let noise = crate::models::noise_expectation(&m.stats, q, alpha, mode, ds.noise.as_deref())?;
        let data = Design::build(&m.stats, &ds.data, None, Some(q))?;
        Ok(Self { data, noise, alpha })
    }
}

impl Objective for CentProblem {
    fn dim(&self) -> usize {
        self.data.p
    }

    fn eval(&self, theta: &[f64], want: Want) -> Result<ObjectiveEval> {
        centnce_design(&self.data, &self.noise, self.alpha, theta, want)
    }

    /// At α = 1 the Hessian is a tilted covariance, bounded by `p ψ_max²`.
    fn smoothness_bound(&self) -> Option<f64> {
        if self.alpha != 1.0 {
            return None;
        }
        let NoiseExpectation::Points(d) = &self.noise else { return None };
        let psi = design_psi_max(d);
        Some(d.p as f64 * psi * psi)
    }

    fn name(&self) -> String {
        format!("centnce[alpha={}]", self.alpha)
    }
}

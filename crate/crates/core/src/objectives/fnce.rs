use crate::error::{NceError, Result};
use crate::generators::RatioKernel;
use crate::models::{Design, ExpFamilyModel, NoiseModel};
use crate::objectives::{accumulate_rows, check_theta, design_psi_max, Dataset, Objective, ObjectiveEval, Want};

/// `−(1/ν) Σ_d w f'(ρ) + Σ_n w [ρ f'(ρ) − f(ρ)]` with `log ρ = ⟨θ, ψ⟩ + offset − log ν`.
///
/// Designs are used as given: pass [`Design::augmented`] tables to fit the log-scale.
pub fn fnce_design<K: RatioKernel + ?Sized>(
    data: &Design,
    noise: &Design,
    kernel: &K,
    nu: f64,
    theta: &[f64],
    want: Want,
) -> Result<ObjectiveEval> {
    check_theta(theta, data.p)?;
    if noise.p != data.p {
        return Err(NceError::Argument("data and noise designs differ in width".into()));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(NceError::Argument(format!("nu must be positive, got {nu}")));
    }
    let nu = kernel.effective_nu(nu);
    let shift = -nu.ln();
    let hess = want.hess();
    let a = accumulate_rows(data, theta, shift, 1.0 / nu, hess, "data", |t| {
        let s = kernel.data_side(t);
        (s.value, s.z1, s.z2)
    })?;
    let b = accumulate_rows(noise, theta, shift, 1.0, hess, "noise", |t| {
        let s = kernel.noise_side(t);
        (s.value, s.z1, s.z2)
    })?;
    Ok(ObjectiveEval::from_accum(a.merge(b), want))
}

/// f-NCE on raw samples. The parameter is `θ̲ = (θ, c)` with `c = m.log_scale_c` (0 when absent),
/// so gradients have length `p + 1`.
pub fn fnce<K: RatioKernel + ?Sized>(
    m: &ExpFamilyModel,
    q: &NoiseModel,
    kernel: &K,
    nu: f64,
    ds: &Dataset,
    want: Want,
) -> Result<ObjectiveEval> {
    m.validate()?;
    let prob = FnceProblem::new(m, q, kernel, nu, ds)?;
    let mut theta = m.theta.clone();
    theta.push(m.log_scale_c.unwrap_or(0.0));
    prob.eval(&theta, want)
}

pub struct FnceProblem<'k, K: RatioKernel + ?Sized> {
    pub data: Design,
    pub noise: Design,
    pub kernel: &'k K,
    pub nu: f64,
    penalized: usize,
}

impl<'k, K: RatioKernel + ?Sized> FnceProblem<'k, K> {
    /// Augmented problem over `(θ, c)`.
    pub fn new(m: &ExpFamilyModel, q: &NoiseModel, kernel: &'k K, nu: f64, ds: &Dataset) -> Result<Self> {
        q.validate()?;
        let data = Design::build(&m.stats, &ds.data, None, Some(q))?.augmented();
        let noise = Design::build(&m.stats, ds.noise_or_err()?, None, Some(q))?.augmented();
        Ok(Self { data, noise, kernel, nu, penalized: m.stats.dim() })
    }

    /// Problem over prebuilt designs; `penalized` leading coordinates are regularized.
    pub fn from_designs(data: Design, noise: Design, kernel: &'k K, nu: f64, penalized: usize) -> Self {
        Self { data, noise, kernel, nu, penalized }
    }
}

impl<K: RatioKernel + ?Sized> Objective for FnceProblem<'_, K> {
    fn dim(&self) -> usize {
        self.data.p
    }

    fn penalized_dim(&self) -> usize {
        self.penalized
    }

    fn eval(&self, theta: &[f64], want: Want) -> Result<ObjectiveEval> {
        fnce_design(&self.data, &self.noise, self.kernel, self.nu, theta, want)
    }

    fn smoothness_bound(&self) -> Option<f64> {
        let (sd, sn) = self.kernel.global_z2_sup()?;
        let psi = design_psi_max(&self.data).max(design_psi_max(&self.noise));
        let nu = self.kernel.effective_nu(self.nu);
        Some(self.data.p as f64 * psi * psi * (sd / nu + sn))
    }

    fn name(&self) -> String {
        format!("fnce[{}]", self.kernel.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Generator;
    use crate::models::Statistics;

    fn two_point() -> (ExpFamilyModel, NoiseModel) {
        let s = Statistics::two_point();
        let q = NoiseModel::uniform_for(&s).unwrap();
        (ExpFamilyModel::new(s, vec![0.0]).unwrap(), q)
    }

    #[test]
    fn unit_ratio_value() {
        let (m, q) = two_point();
        let m = m.with_log_scale(-(2f64.ln()));
        let pts = vec![vec![-1.0], vec![1.0]];
        let ds = Dataset::new(pts.clone(), Some(pts));
        let e = fnce(&m, &q, &Generator::Log, 1.0, &ds, Want::Value).unwrap();
        assert!((e.value - 2.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn missing_noise() {
        let (m, q) = two_point();
        let ds = Dataset::new(vec![vec![1.0]], None);
        assert!(matches!(fnce(&m, &q, &Generator::Log, 1.0, &ds, Want::Value), Err(NceError::Argument(_))));
    }

    #[test]
    fn overflow_reports_index() {
        let (m, q) = two_point();
        let m = ExpFamilyModel { theta: vec![2000.0], ..m };
        let ds = Dataset::new(vec![vec![-1.0], vec![1.0]], Some(vec![vec![1.0]]));
        let err = fnce(&m, &q, &Generator::Power(0.5), 1.0, &ds, Want::Grad).unwrap_err();
        assert!(matches!(err, NceError::Numeric { index: 0, .. }), "{err:?}");
    }

    #[test]
    fn bernoulli_power_one_by_enumeration() {
        // Data Bernoulli(3/4) on {0,1}, uniform noise, θ = log 3, c = 0, ν = 1, f = ρ log ρ.
        let s = Statistics::Linear1d { domain: crate::models::Domain::Finite(vec![vec![0.0], vec![1.0]]) };
        let q = NoiseModel::uniform_for(&s).unwrap();
        let theta = 3f64.ln();
        let pts = vec![vec![0.0], vec![1.0]];
        let data = Design::build(&s, &pts, Some(vec![0.25, 0.75]), Some(&q)).unwrap().augmented();
        let noise = Design::build(&s, &pts, Some(vec![0.5, 0.5]), Some(&q)).unwrap().augmented();
        let g = Generator::Power(1.0);
        let e = fnce_design(&data, &noise, &g, 1.0, &[theta, 0.0], Want::Value).unwrap();
        // ρ(0) = 2, ρ(1) = 6. Data: −(log ρ + 1); noise: ρ.
        let oracle = 0.25 * -(2f64.ln() + 1.0) + 0.75 * -(6f64.ln() + 1.0) + 0.5 * 2.0 + 0.5 * 6.0;
        assert!((e.value - oracle).abs() < 1e-14);
    }
}

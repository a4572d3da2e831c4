//! Proximal and projected gradient descent for `L(θ) + λ R(θ)`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{NceError, Result};
use crate::linalg::{eig_extremes, norm2};
use crate::models::{NormKind, NormSpec};
use crate::objectives::{Objective, Want};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// `1/L` from the objective's smoothness bound.
    Auto,
}

impl Serialize for StepSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StepSize::Fixed(v) => s.serialize_f64(*v),
            StepSize::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for StepSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(StepSize::Fixed(v)),
            Raw::Str(s) if s == "auto" => Ok(StepSize::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("step_size must be a number or \"auto\", got {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub lambda_n: f64,
    pub step_size: StepSize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub projection_radius: Option<f64>,
    pub regularizer: NormKind,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda_n: 0.0,
            step_size: StepSize::Fixed(0.1),
            max_iters: 1000,
            grad_tol: 1e-8,
            projection_radius: None,
            regularizer: NormKind::L2,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_n >= 0.0 && self.lambda_n.is_finite()) {
            return Err(NceError::Config(format!("lambda_n must be >= 0, got {}", self.lambda_n)));
        }
        if let StepSize::Fixed(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(NceError::Config(format!("step_size must be positive, got {s}")));
            }
        }
        if !(self.grad_tol > 0.0) {
            return Err(NceError::Config("grad_tol must be positive".into()));
        }
        if let Some(r) = self.projection_radius {
            if !(r > 0.0) {
                return Err(NceError::Config("projection_radius must be positive".into()));
            }
        }
        if self.lambda_n > 0.0 && self.regularizer == NormKind::MaxNorm {
            return Err(NceError::Config("max-norm has no prox; use projection_radius instead".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub hess_min_eig_at_start: Option<f64>,
    pub hess_max_eig_at_start: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub objective: String,
    /// All fitted coordinates; for f-NCE the last one is the log-scale.
    pub theta_hat: Vec<f64>,
    pub c_hat: Option<f64>,
    /// `L(θ_k) + λ R(θ_k)` for k = 0..=iters.
    pub objective_trace: Vec<f64>,
    /// Norm of the composite gradient map at each recorded iterate.
    pub grad_norm_trace: Vec<f64>,
    pub grad_norm_final: f64,
    pub iters: usize,
    pub converged: bool,
    pub step_size: f64,
    pub diagnostics: FitDiagnostics,
}

impl FitResult {
    /// θ̂ without the unpenalized trailing coordinates.
    pub fn theta(&self, p: usize) -> &[f64] {
        &self.theta_hat[..p]
    }
}

/// Proximal operator of `t·R`.
pub fn prox(kind: NormKind, v: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(NceError::Argument(format!("prox weight must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(v.to_vec());
    }
    match kind {
        NormKind::L1 => Ok(v.iter().map(|x| x.signum() * (x.abs() - t).max(0.0)).collect()),
        NormKind::L2 | NormKind::Frobenius => {
            let n = norm2(v);
            let s = if n > 0.0 { (1.0 - t / n).max(0.0) } else { 0.0 };
            Ok(v.iter().map(|x| s * x).collect())
        }
        NormKind::MaxNorm => Err(NceError::Config("max-norm prox is not supported; use projection".into())),
    }
}

/// Euclidean projection onto `{R(θ) ≤ r}`.
pub fn project(kind: NormKind, v: &[f64], r: f64) -> Result<Vec<f64>> {
    if !(r > 0.0) {
        return Err(NceError::Argument(format!("projection radius must be positive, got {r}")));
    }
    let spec = NormSpec::new(kind);
    if spec.norm(v) <= r {
        return Ok(v.to_vec());
    }
    Ok(match kind {
        NormKind::L2 | NormKind::Frobenius => {
            let s = r / norm2(v);
            v.iter().map(|x| s * x).collect()
        }
        NormKind::MaxNorm => v.iter().map(|x| x.clamp(-r, r)).collect(),
        NormKind::L1 => {
            // Sort |v| descending and find the soft-threshold τ with Σ max(|v_i| − τ, 0) = r.
            let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            u.sort_by(|a, b| b.total_cmp(a));
            let mut cum = 0.0;
            let mut tau = 0.0;
            for (j, uj) in u.iter().enumerate() {
                cum += uj;
                let cand = (cum - r) / (j as f64 + 1.0);
                if *uj > cand {
                    tau = cand;
                }
            }
            v.iter().map(|x| x.signum() * (x.abs() - tau).max(0.0)).collect()
        }
    })
}

/// Extreme eigenvalues of the Hessian at `theta`.
pub fn hessian_diagnostics(problem: &dyn Objective, theta: &[f64]) -> Result<(f64, f64)> {
    let e = problem.eval(theta, Want::Hess)?;
    let h = e.hess.ok_or_else(|| NceError::Unsupported(format!("{} provides no Hessian", problem.name())))?;
    eig_extremes(&h)
}

fn to_divergence(e: NceError, iter: usize) -> NceError {
    match e {
        NceError::Numeric { index, what } => NceError::Divergence { iter, what: format!("{what} (sample {index})") },
        other => other,
    }
}

/// Gradient descent from θ₀ = 0 with prox (λ > 0) and/or projection (radius set) on the penalized block.
pub fn fit(problem: &dyn Objective, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let p = problem.dim();
    let pen = problem.penalized_dim().min(p);
    let step = match cfg.step_size {
        StepSize::Fixed(s) => s,
        StepSize::Auto => {
            let l = problem.smoothness_bound().ok_or_else(|| {
                NceError::Config(format!("step_size \"auto\" needs a smoothness bound, {} has none", problem.name()))
            })?;
            if !(l > 0.0 && l.is_finite()) {
                return Err(NceError::Config(format!("degenerate smoothness bound {l}")));
            }
            1.0 / l
        }
    };
    let spec = NormSpec::new(cfg.regularizer);
    let penalty = |th: &[f64]| if cfg.lambda_n > 0.0 { cfg.lambda_n * spec.norm(&th[..pen]) } else { 0.0 };

    let mut theta = vec![0.0; p];
    let diagnostics = match hessian_diagnostics(problem, &theta) {
        Ok((lo, hi)) => FitDiagnostics { hess_min_eig_at_start: Some(lo), hess_max_eig_at_start: Some(hi) },
        Err(NceError::Unsupported(_)) => FitDiagnostics::default(),
        Err(e) => return Err(to_divergence(e, 0)),
    };

    let mut trace = Vec::with_capacity(cfg.max_iters + 1);
    let mut gtrace = Vec::with_capacity(cfg.max_iters + 1);
    let mut converged = false;
    let mut iters = 0;
    let mut gnorm;
    loop {
        let e = problem.eval(&theta, Want::Grad).map_err(|e| to_divergence(e, iters))?;
        let f = e.value + penalty(&theta);
        if !f.is_finite() || e.grad.iter().any(|g| !g.is_finite()) {
            return Err(NceError::Divergence { iter: iters, what: format!("objective value {f}") });
        }
        let mut next: Vec<f64> = theta.iter().zip(&e.grad).map(|(t, g)| t - step * g).collect();
        if cfg.lambda_n > 0.0 {
            let head = prox(cfg.regularizer, &next[..pen], step * cfg.lambda_n)?;
            next[..pen].copy_from_slice(&head);
        }
        if let Some(r) = cfg.projection_radius {
            let head = project(cfg.regularizer, &next[..pen], r)?;
            next[..pen].copy_from_slice(&head);
        }
        gnorm = theta.iter().zip(&next).map(|(a, b)| ((a - b) / step).powi(2)).sum::<f64>().sqrt();
        trace.push(f);
        gtrace.push(gnorm);
        if gnorm <= cfg.grad_tol {
            converged = true;
            break;
        }
        if iters == cfg.max_iters {
            break;
        }
        theta = next;
        iters += 1;
    }
    let c_hat = (p > pen).then(|| theta[p - 1]);
    Ok(FitResult {
        objective: problem.name(),
        theta_hat: theta,
        c_hat,
        objective_trace: trace,
        grad_norm_trace: gtrace,
        grad_norm_final: gnorm,
        iters,
        converged,
        step_size: step,
        diagnostics,
    })
}

//! wasm-bindgen exports for `www/index.html`.
//!
//! Results cross the boundary as JSON strings so the page stays plain JS.

use nce_core::generators::{zeta, Generator, Zeta};
use nce_core::models::{ExpFamilyModel, NoiseModel, Statistics, ZMode};
use nce_core::objectives::{condnce_pairs, CentProblem, CondDataset, Dataset, FnceProblem, Objective, PairDesign, Want};
use nce_core::optimizer::{fit, FitConfig, StepSize};
use nce_core::sampling::{channel_slices, exact_sample, noise_sample, ChannelBase, RngSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_else(|e| error(&e.to_string()))
}

fn error(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn generator(kind: &str, alpha: f64) -> Result<Generator, String> {
    let g = match kind {
        "log" => Generator::Log,
        "power" => Generator::Power(alpha),
        other => return Err(format!("unknown generator {other:?}")),
    };
    g.validate().map_err(|e| e.to_string())?;
    Ok(g)
}

#[derive(Serialize)]
struct ZetaCurves {
    rho: Vec<f64>,
    b1_d: Vec<f64>,
    b1_n: Vec<f64>,
    b2_d: Vec<f64>,
    b2_n: Vec<f64>,
}

/// The four ζ-functions on a log-spaced ρ grid.
#[wasm_bindgen]
pub fn zeta_curves(kind: &str, alpha: f64, rho_min: f64, rho_max: f64, points: usize) -> String {
    let g = match generator(kind, alpha) {
        Ok(g) => g,
        Err(e) => return error(&e),
    };
    if !(rho_min > 0.0 && rho_max > rho_min) || points < 2 {
        return error("need 0 < rho_min < rho_max and at least two points");
    }
    let (a, b) = (rho_min.ln(), rho_max.ln());
    let rho: Vec<f64> = (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect();
    let curve = |w: Zeta| -> Result<Vec<f64>, String> {
        rho.iter().map(|&r| zeta(g, r, w).map_err(|e| e.to_string())).collect()
    };
    let out = (|| -> Result<ZetaCurves, String> {
        Ok(ZetaCurves {
            b1_d: curve(Zeta::B1D)?,
            b1_n: curve(Zeta::B1N)?,
            b2_d: curve(Zeta::B2D)?,
            b2_n: curve(Zeta::B2N)?,
            rho: rho.clone(),
        })
    })();
    out.map_or_else(|e| error(&e), |c| to_json(&c))
}

#[derive(Serialize)]
struct DerivativeCurve {
    mu: Vec<f64>,
    dl_dmu: Vec<f64>,
}

/// `dL/dμ` of the empirical f_log-CondNCE objective on `N(μ_true, 1)` data.
#[wasm_bindgen]
pub fn condnce_derivative(mu_true: f64, epsilon: f64, k: usize, n: usize, seed: u64, points: usize) -> String {
    if !(epsilon > 0.0) || k == 0 || n == 0 || points < 2 {
        return error("need epsilon > 0, K >= 1, n >= 1 and at least two grid points");
    }
    let run = || -> nce_core::Result<DerivativeCurve> {
        let stats = Statistics::GaussianMean1d;
        let rng = RngSpec::new(seed);
        let data = exact_sample(&ExpFamilyModel::new(stats.clone(), vec![mu_true])?, n, &mut rng.stream("data", 0))?;
        let mut srng = rng.stream("slices", k as u64);
        let slices = (0..n).map(|_| channel_slices(ChannelBase::GaussianIso, 1, k, &mut srng)).collect::<nce_core::Result<Vec<_>>>()?;
        let cd = CondDataset::from_slices(data, &slices, epsilon, ChannelBase::GaussianIso);
        let pd = PairDesign::build(&stats, &cd)?;
        let mu: Vec<f64> = (0..points).map(|i| 2.0 * mu_true * i as f64 / (points - 1) as f64).collect();
        let dl_dmu = mu
            .iter()
            .map(|&m| condnce_pairs(&pd, &Generator::Log, &[m], Want::Grad).map(|e| e.grad[0]))
            .collect::<nce_core::Result<Vec<_>>>()?;
        Ok(DerivativeCurve { mu, dl_dmu })
    };
    run().map_or_else(|e| error(&e.to_string()), |c| to_json(&c))
}

#[derive(Serialize)]
struct FitTrace {
    estimator: String,
    theta_hat: Vec<f64>,
    objective: Vec<f64>,
    grad_norm: Vec<f64>,
    converged: bool,
}

/// Fit the two-point model `p(x) ∝ exp(θx)`, `x ∈ {−1, 1}`, and return the trace.
///
/// `estimator` is `"fnce"` (with the given generator) or `"centnce"` (α-CentNCE, Monte Carlo Z).
#[wasm_bindgen]
pub fn fit_two_point(estimator: &str, kind: &str, alpha: f64, theta_star: f64, n: usize, seed: u64, max_iters: usize) -> String {
    if n == 0 || !theta_star.is_finite() {
        return error("need n >= 1 and a finite theta_star");
    }
    let run = || -> Result<FitTrace, String> {
        let s = Statistics::two_point();
        let q = NoiseModel::uniform_for(&s).map_err(|e| e.to_string())?;
        let m = ExpFamilyModel::new(s, vec![theta_star]).map_err(|e| e.to_string())?;
        let rng = RngSpec::new(seed);
        let data = exact_sample(&m, n, &mut rng.stream("data", 0)).map_err(|e| e.to_string())?;
        let noise = noise_sample(&q, n, &mut rng.stream("noise", 0)).map_err(|e| e.to_string())?;
        let ds = Dataset::new(data, Some(noise));
        let cfg = FitConfig { step_size: StepSize::Fixed(0.5), max_iters, grad_tol: 1e-10, ..FitConfig::default() };
        let g;
        let prob: Box<dyn Objective> = match estimator {
            "fnce" => {
                g = generator(kind, alpha)?;
                Box::new(FnceProblem::new(&m, &q, &g, 1.0, &ds).map_err(|e| e.to_string())?)
            }
            "centnce" => Box::new(CentProblem::new(&m, &q, alpha, &ds, ZMode::MonteCarlo).map_err(|e| e.to_string())?),
            other => return Err(format!("unknown estimator {other:?}")),
        };
        let r = fit(prob.as_ref(), &cfg).map_err(|e| e.to_string())?;
        Ok(FitTrace {
            estimator: prob.name(),
            theta_hat: r.theta_hat,
            objective: r.objective_trace,
            grad_norm: r.grad_norm_trace,
            converged: r.converged,
        })
    };
    run().map_or_else(|e| error(&e), |t| to_json(&t))
}

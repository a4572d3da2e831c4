//! Registered invariant suites behind `nce check`.

use std::path::PathBuf;

use nce_core::analysis::giso_kl_identity;
use nce_core::generators::{assemble_zeta, Generator, RatioKernel, SideTerms, Zeta};
use nce_core::linalg::{eig_extremes, norm_inf};
use nce_core::models::{model_measure, Design, ExpFamilyModel, NoiseModel, Statistics, ZMode};
use nce_core::objectives::{
    centnce_design, condnce_pairs, fnce_design, CentProblem, CondDataset, CondProblem, Dataset, FnceProblem,
    LocalDesign, LocalEstimator, LocalProblem, Objective, PairDesign, Want,
};
use nce_core::sampling::{noise_sample, ChannelBase, RngSpec, StreamRng};
use rand::Rng;
use serde::Serialize;

use crate::config::{generator_label, ExperimentConfig};
use crate::output::write_json;
use crate::CliError;

pub const GRAD_TOL: f64 = 1e-5;
pub const HESS_TOL: f64 = 1e-4;
pub const FISHER_TOL: f64 = 1e-10;
pub const GISO_TOL: f64 = 1e-8;
pub const CONVEX_TOL: f64 = 1e-8;
pub const ZETA_TOL: f64 = 1e-10;

const CONVEX_SET: [Generator; 6] = [
    Generator::Log,
    Generator::Power(0.0),
    Generator::Power(0.25),
    Generator::Power(0.5),
    Generator::Power(0.75),
    Generator::Power(1.0),
];

/// A generator whose data-side ζ has the wrong sign; values are untouched.
pub struct SignFault(pub Generator);

impl RatioKernel for SignFault {
    fn data_side(&self, t: f64) -> SideTerms {
        let s = self.0.data_side(t);
        SideTerms { z1: -s.z1, ..s }
    }
    fn noise_side(&self, t: f64) -> SideTerms {
        self.0.noise_side(t)
    }
    fn effective_nu(&self, nu: f64) -> f64 {
        self.0.effective_nu(nu)
    }
    fn at_one(&self) -> (f64, f64) {
        self.0.at_one()
    }
    fn label(&self) -> String {
        format!("{}+sign-fault", self.0.label())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Invariant {
    pub name: String,
    pub objective: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Suite {
    pub suite: String,
    pub passed: bool,
    pub invariants: Vec<Invariant>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub suites: Vec<Suite>,
}

fn inv(name: &str, objective: &str, residual: f64, tolerance: f64) -> Invariant {
    Invariant {
        name: name.into(),
        objective: objective.into(),
        residual,
        tolerance,
        passed: residual <= tolerance,
    }
}

fn suite(name: &str, invariants: Vec<Invariant>) -> Suite {
    Suite { suite: name.into(), passed: invariants.iter().all(|i| i.passed), invariants }
}

/// `‖a − b‖_∞ / max(‖b‖_∞, 1)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm_inf(&d) / norm_inf(b).max(1.0)
}

/// Central-difference gradient and gradient-Jacobian errors at θ.
pub fn derivative_errors(obj: &dyn Objective, theta: &[f64]) -> Result<(f64, f64), CliError> {
    let h = 1e-5;
    let e = obj.eval(theta, Want::Hess)?;
    let hess = e.hess.clone().ok_or_else(|| CliError::Numeric("objective returned no Hessian".into()))?;
    let p = theta.len();
    let mut fd_g = vec![0.0; p];
    let mut worst_h: f64 = 0.0;
    let mut th = theta.to_vec();
    for j in 0..p {
        th[j] = theta[j] + h;
        let up = obj.eval(&th, Want::Grad)?;
        th[j] = theta[j] - h;
        let dn = obj.eval(&th, Want::Grad)?;
        th[j] = theta[j];
        fd_g[j] = (up.value - dn.value) / (2.0 * h);
        let col: Vec<f64> = up.grad.iter().zip(&dn.grad).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let an: Vec<f64> = (0..p).map(|i| hess[(i, j)]).collect();
        worst_h = worst_h.max(rel_err(&an, &col));
    }
    Ok((rel_err(&e.grad, &fd_g), worst_h))
}

fn uniform_pts(rng: &mut StreamRng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn spin_pts(rng: &mut StreamRng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()).collect()
}

fn theta_in(rng: &mut StreamRng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn record(out: &mut Vec<Invariant>, label: &str, obj: &dyn Objective, theta: &[f64]) -> Result<(), CliError> {
    let (g, h) = derivative_errors(obj, theta)?;
    out.push(inv("gradient_vs_central_difference", label, g, GRAD_TOL));
    out.push(inv("hessian_vs_gradient_difference", label, h, HESS_TOL));
    Ok(())
}

/// One worst-case pair of invariants per objective over `instances` random problems.
fn derivative_suite(instances: usize, seed: u64, fault: bool) -> Result<Suite, CliError> {
    let rng = RngSpec::new(seed);
    let quad = Statistics::quadratic(2);
    let q = NoiseModel::uniform_for(&quad)?;
    let m0 = ExpFamilyModel::new(quad.clone(), vec![0.0; 4])?;
    let mut raw = Vec::new();
    for i in 0..instances as u64 {
        let r = &mut rng.stream("check-derivatives", i);
        let data = uniform_pts(r, 12, 2);
        let noise = uniform_pts(r, 15, 2);
        let ds = Dataset::new(data.clone(), Some(noise));
        for g in CONVEX_SET {
            let th = theta_in(r, 5);
            let label = format!("fnce[{}]", generator_label(g));
            if fault && g == Generator::Log {
                let k = SignFault(g);
                record(&mut raw, &format!("{label}+sign-fault"), &FnceProblem::new(&m0, &q, &k, 1.0, &ds)?, &th)?;
            } else {
                record(&mut raw, &label, &FnceProblem::new(&m0, &q, &g, 1.0, &ds)?, &th)?;
            }
        }
        for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
            for (mode, tag) in [(ZMode::Quadrature { bins: 30 }, "analytic"), (ZMode::MonteCarlo, "montecarlo")] {
                let th = theta_in(r, 4);
                let label = format!("centnce[alpha={alpha},{tag}]");
                record(&mut raw, &label, &CentProblem::new(&m0, &q, alpha, &ds, mode)?, &th)?;
            }
        }
        let slices: Vec<Vec<Vec<f64>>> = (0..data.len()).map(|_| uniform_pts(r, 3, 2)).collect();
        let cd = CondDataset::from_slices(data.clone(), &slices, 0.3, ChannelBase::GaussianIso);
        for g in [Generator::Log, Generator::Power(0.5)] {
            let th = theta_in(r, 4);
            record(&mut raw, &format!("condnce[{}]", generator_label(g)), &CondProblem::new(&quad, &cd, &g)?, &th)?;
        }
        let spin = Statistics::Spin { dim_x: 3 };
        let sdata = spin_pts(r, 20, 3);
        let full = theta_in(r, 6);
        for alpha in [0.0, 1.0] {
            let node = r.random_range(0..3);
            let ld = LocalDesign::build(&spin, node, &sdata, ZMode::Analytic, None)?;
            let block = ld.block(&full);
            let prob = LocalProblem { design: ld, estimator: LocalEstimator::Cent { alpha } };
            record(&mut raw, &format!("local[alpha={alpha}]"), &prob, &block)?;
        }
    }
    // Keep the worst residual per (invariant, objective), in first-seen order.
    let mut worst: Vec<Invariant> = Vec::new();
    for i in raw {
        match worst.iter_mut().find(|w| w.name == i.name && w.objective == i.objective) {
            Some(w) if i.residual > w.residual || i.residual.is_nan() => *w = i,
            Some(_) => {}
            None => worst.push(i),
        }
    }
    for w in &mut worst {
        w.passed = w.residual <= w.tolerance;
    }
    Ok(suite("derivatives", worst))
}

fn zeta_suite() -> Suite {
    let mut out = Vec::new();
    for g in CONVEX_SET.iter().copied().chain([Generator::Power(-0.5), Generator::Power(2.0)]) {
        let mut worst: f64 = 0.0;
        for k in -20..=20 {
            let rho = 1.5f64.powi(k);
            for which in [Zeta::B1D, Zeta::B1N, Zeta::B2D, Zeta::B2N] {
                let closed = g.zeta_closed(rho, which);
                let assembled = assemble_zeta(g.d2(rho), g.d3(rho), rho, which);
                let scale = (rho * g.d2(rho)).abs().max((rho * rho * g.d3(rho)).abs()).max(rho * rho * g.d2(rho).abs()).max(1e-300);
                worst = worst.max((closed - assembled).abs() / scale);
            }
        }
        out.push(inv("closed_form_vs_assembly", &generator_label(g), worst, ZETA_TOL));
    }
    suite("zeta", out)
}

fn flip_pairs(m: &ExpFamilyModel) -> Result<PairDesign, CliError> {
    let w = model_measure(m, None, 0)?.weight;
    let data = m.stats.enumerate()?;
    let cond = data
        .iter()
        .map(|x| {
            (0..x.len())
                .map(|i| {
                    let mut y = x.clone();
                    y[i] = -y[i];
                    y
                })
                .collect()
        })
        .collect();
    let cd = CondDataset { data, cond, weights: Some(w), epsilon: 1.0, base_kind: ChannelBase::Custom { symmetric: true } };
    Ok(PairDesign::build(&m.stats, &cd)?)
}

fn fisher_suite(seed: u64) -> Result<Suite, CliError> {
    let r = &mut RngSpec::new(seed).stream("check-fisher", 0);
    let s = Statistics::Spin { dim_x: 2 };
    let q = NoiseModel::uniform_for(&s)?;
    let m = ExpFamilyModel::new(s.clone(), theta_in(r, 3))?;
    let data = model_measure(&m, Some(&q), 0)?;
    let (pts, w) = q.support().expect("finite noise");
    let noise = Design::build(&s, &pts, Some(w), Some(&q))?;
    let truth = m.normalized_augmented(0)?;
    let mut out = Vec::new();
    for g in CONVEX_SET {
        let e = fnce_design(&data.augmented(), &noise.augmented(), &g, 2.0, &truth, Want::Grad)?;
        out.push(inv("population_gradient_at_truth", &format!("fnce[{}]", generator_label(g)), norm_inf(&e.grad), FISHER_TOL));
    }
    for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let ne = nce_core::models::noise_expectation(&s, &q, alpha, ZMode::Analytic, None)?;
        let e = centnce_design(&data, &ne, alpha, &m.theta, Want::Grad)?;
        out.push(inv("population_gradient_at_truth", &format!("centnce[alpha={alpha}]"), norm_inf(&e.grad), FISHER_TOL));
    }
    let pd = flip_pairs(&m)?;
    for g in [Generator::Log, Generator::Power(0.5)] {
        let e = condnce_pairs(&pd, &g, &m.theta, Want::Grad)?;
        out.push(inv("population_gradient_at_truth", &format!("condnce[{}]", generator_label(g)), norm_inf(&e.grad), FISHER_TOL));
    }
    Ok(suite("fisher_consistency", out))
}

fn giso_suite(seed: u64) -> Result<Suite, CliError> {
    let r = &mut RngSpec::new(seed).stream("check-giso", 0);
    let mut out = Vec::new();
    for (s, p) in [(Statistics::Spin { dim_x: 2 }, 3), (Statistics::Spin { dim_x: 3 }, 6)] {
        let q = NoiseModel::uniform_for(&s)?;
        let id = giso_kl_identity(&s, &q, &theta_in(r, p), &theta_in(r, p))?;
        out.push(inv("giso_kl_identity", &format!("spin[{}]", s.dim_x()), id.residual.abs(), GISO_TOL));
    }
    Ok(suite("giso_identity", out))
}

fn convexity_suite(seed: u64) -> Result<Suite, CliError> {
    let rng = RngSpec::new(seed);
    let s = Statistics::quadratic(2);
    let q = NoiseModel::uniform_for(&s)?;
    let m = ExpFamilyModel::new(s, vec![0.0; 4])?;
    let mut out = Vec::new();
    for (gi, g) in CONVEX_SET.into_iter().enumerate() {
        let r = &mut rng.stream("check-convexity", gi as u64);
        let data = uniform_pts(r, 10, 2);
        let noise = noise_sample(&q, 10, r)?;
        let prob = FnceProblem::new(&m, &q, &g, 1.0, &Dataset::new(data, Some(noise)))?;
        let mut lo = f64::INFINITY;
        for _ in 0..10 {
            let th: Vec<f64> = (0..5).map(|_| r.random_range(-2.0..2.0)).collect();
            let h = prob.eval(&th, Want::Hess)?.hess.expect("hessian requested");
            lo = lo.min(eig_extremes(&h)?.0);
        }
        out.push(inv("hessian_min_eig_nonnegative", &format!("fnce[{}]", generator_label(g)), (-lo).max(0.0), CONVEX_TOL));
    }
    Ok(suite("convexity", out))
}

pub fn run_checks(instances: usize, seed: u64, fault: bool) -> Result<CheckReport, CliError> {
    let suites = vec![
        derivative_suite(instances, seed, fault)?,
        zeta_suite(),
        fisher_suite(seed)?,
        giso_suite(seed)?,
        convexity_suite(seed)?,
    ];
    Ok(CheckReport { passed: suites.iter().all(|s| s.passed), suites })
}

pub fn cmd_check(cfg: &ExperimentConfig, fault: bool) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.check.unwrap_or_default();
    let report = run_checks(spec.instances, cfg.master_seed(), fault)?;
    let path = write_json(cfg, &cfg.output_dir.join("check_report.json"), &report)?;
    if !report.passed {
        let failed: Vec<String> = report
            .suites
            .iter()
            .flat_map(|s| s.invariants.iter().filter(|i| !i.passed).map(move |i| format!("{}/{} ({})", s.suite, i.name, i.objective)))
            .collect();
        return Err(CliError::CheckFailed(format!("{} written; failing: {}", path.display(), failed.join(", "))));
    }
    Ok(vec![path])
}

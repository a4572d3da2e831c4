use nce_core::generators::Generator;
use nce_core::models::{model_measure, Design, ExpFamilyModel, NoiseModel, NormKind, Statistics, ZMode};
use nce_core::objectives::{CentProblem, Dataset, FnceProblem, Objective, Want};
use nce_core::optimizer::{fit, FitConfig, StepSize};
use nce_core::sampling::{exact_sample, RngSpec};
use proptest::collection::vec;
use proptest::prelude::*;

fn pts(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    vec(vec(-1.0..=1.0f64, 2), n)
}

fn spins(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    vec(vec(prop_oneof![Just(-1.0), Just(1.0)], 3), n)
}

fn quad2() -> (ExpFamilyModel, NoiseModel) {
    let s = Statistics::quadratic(2);
    let q = NoiseModel::uniform_for(&s).unwrap();
    (ExpFamilyModel::new(s, vec![0.0; 4]).unwrap(), q)
}

fn tight(lambda: f64, reg: NormKind) -> FitConfig {
    FitConfig {
        lambda_n: lambda,
        regularizer: reg,
        step_size: StepSize::Auto,
        max_iters: 20_000,
        grad_tol: 1e-11,
        ..FitConfig::default()
    }
}

/// Damped Newton on the Monte Carlo MLE loss, written out directly.
fn mc_mle_newton(data: &[Vec<f64>], noise: &[Vec<f64>], stats: &Statistics) -> Vec<f64> {
    let p = stats.dim();
    let pd: Vec<Vec<f64>> = data.iter().map(|x| stats.eval(x)).collect();
    let pn: Vec<Vec<f64>> = noise.iter().map(|x| stats.eval(x)).collect();
    let mean_d: Vec<f64> = (0..p).map(|j| pd.iter().map(|r| r[j]).sum::<f64>() / pd.len() as f64).collect();
    let mut th = vec![0.0; p];
    for _ in 0..100 {
        let t: Vec<f64> = pn.iter().map(|r| r.iter().zip(&th).map(|(a, b)| a * b).sum()).collect();
        let m = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = t.iter().map(|v| (v - m).exp()).collect();
        let sw: f64 = w.iter().sum();
        let mu: Vec<f64> = (0..p).map(|j| pn.iter().zip(&w).map(|(r, wi)| wi * r[j]).sum::<f64>() / sw).collect();
        let g = nalgebra::DVector::from_iterator(p, (0..p).map(|j| mu[j] - mean_d[j]));
        let h = nalgebra::DMatrix::from_fn(p, p, |a, b| {
            pn.iter().zip(&w).map(|(r, wi)| wi * (r[a] - mu[a]) * (r[b] - mu[b])).sum::<f64>() / sw
        });
        let Some(step) = h.lu().solve(&g) else { break };
        for j in 0..p {
            th[j] -= step[j];
        }
        if step.norm() < 1e-14 {
            break;
        }
    }
    th
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn auto_step_descends_monotonically(data in pts(20), noise in pts(30), nu in 0.5..4.0f64) {
        let (m, q) = quad2();
        let prob = FnceProblem::new(&m, &q, &Generator::Log, nu, &Dataset::new(data, Some(noise))).unwrap();
        let cfg = FitConfig { step_size: StepSize::Auto, max_iters: 300, ..FitConfig::default() };
        let r = fit(&prob, &cfg).unwrap();
        for w in r.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn l1_solution_satisfies_subgradient_conditions(data in pts(30), noise in pts(40), lambda in 0.005..0.05f64) {
        let (m, q) = quad2();
        let prob = CentProblem::new(&m, &q, 1.0, &Dataset::new(data, Some(noise)), ZMode::MonteCarlo).unwrap();
        let r = fit(&prob, &tight(lambda, NormKind::L1)).unwrap();
        prop_assume!(r.converged);
        let g = prob.eval(&r.theta_hat, Want::Grad).unwrap().grad;
        for (t, gj) in r.theta_hat.iter().zip(&g) {
            if *t != 0.0 {
                prop_assert!((gj + lambda * t.signum()).abs() < 1e-7, "theta {} grad {}", t, gj);
            } else {
                prop_assert!(gj.abs() <= lambda + 1e-7);
            }
        }
    }

    #[test]
    fn fit_is_deterministic(data in pts(15), noise in pts(15)) {
        let (m, q) = quad2();
        let prob = FnceProblem::new(&m, &q, &Generator::Log, 2.0, &Dataset::new(data, Some(noise))).unwrap();
        let cfg = FitConfig { max_iters: 200, ..FitConfig::default() };
        prop_assert_eq!(fit(&prob, &cfg).unwrap(), fit(&prob, &cfg).unwrap());
    }

    #[test]
    fn cent_one_monte_carlo_is_mc_mle(data in spins(40), noise in spins(60)) {
        let s = Statistics::Spin { dim_x: 3 };
        let q = NoiseModel::uniform_for(&s).unwrap();
        let m = ExpFamilyModel::new(s, vec![0.0; 6]).unwrap();
        let oracle = mc_mle_newton(&data, &noise, &m.stats);
        let prob = CentProblem::new(&m, &q, 1.0, &Dataset::new(data, Some(noise)), ZMode::MonteCarlo).unwrap();
        let r = fit(&prob, &tight(0.0, NormKind::L2)).unwrap();
        prop_assume!(r.converged && oracle.iter().all(|v| v.abs() < 20.0));
        let err = r.theta_hat.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = oracle.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        prop_assert!(err <= 1e-8 * scale, "fit {:?} oracle {:?}", r.theta_hat, oracle);
    }
}

#[test]
fn population_fnce_recovers_truth_on_two_point() {
    let s = Statistics::two_point();
    let q = NoiseModel::uniform_for(&s).unwrap();
    let m = ExpFamilyModel::new(s.clone(), vec![0.5]).unwrap();
    let data = model_measure(&m, Some(&q), 0).unwrap().augmented();
    let (sup, w) = q.support().unwrap();
    let noise = Design::build(&s, &sup, Some(w), Some(&q)).unwrap().augmented();
    let truth = m.normalized_augmented(0).unwrap();
    for g in [Generator::Log, Generator::Power(0.5)] {
        let prob = FnceProblem::from_designs(data.clone(), noise.clone(), &g, 1.0, 1);
        let cfg = FitConfig { step_size: StepSize::Fixed(0.5), ..tight(0.0, NormKind::L2) };
        let r = fit(&prob, &cfg).unwrap();
        assert!(r.converged, "{g:?}");
        for (a, b) in r.theta_hat.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-6, "{g:?}: {:?} vs {:?}", r.theta_hat, truth);
        }
    }
}

#[test]
fn bernoulli_mle_is_within_three_standard_errors() {
    let theta = 0.5 * 3f64.ln();
    let s = Statistics::two_point();
    let q = NoiseModel::uniform_for(&s).unwrap();
    let m = ExpFamilyModel::new(s, vec![theta]).unwrap();
    let n = 4000;
    let data = exact_sample(&m, n, &mut RngSpec::new(11).stream("data", 0)).unwrap();
    let prob = CentProblem::new(&m, &q, 1.0, &Dataset::new(data, None), ZMode::Analytic).unwrap();
    let r = fit(&prob, &tight(0.0, NormKind::L2)).unwrap();
    // Fisher information 1 − tanh²θ = 3/4.
    let se = 1.0 / (0.75 * n as f64).sqrt();
    assert!((r.theta_hat[0] - theta).abs() < 3.0 * se, "{} vs {theta}", r.theta_hat[0]);
}

#[test]
fn large_l1_penalty_zeroes_everything() {
    let (m, q) = quad2();
    let mut rng = RngSpec::new(3).stream("pts", 0);
    let data = nce_core::sampling::noise_sample(&q, 50, &mut rng).unwrap();
    let noise = nce_core::sampling::noise_sample(&q, 50, &mut rng).unwrap();
    let prob = CentProblem::new(&m, &q, 0.5, &Dataset::new(data, Some(noise)), ZMode::MonteCarlo).unwrap();
    let g0 = prob.eval(&[0.0; 4], Want::Grad).unwrap().grad;
    let lam = 2.0 * g0.iter().fold(0.0f64, |a, b| a.max(b.abs())) + 0.1;
    let cfg = FitConfig { step_size: StepSize::Fixed(0.2), ..tight(lam, NormKind::L1) };
    let r = fit(&prob, &cfg).unwrap();
    assert!(r.theta_hat.iter().all(|v| *v == 0.0), "{:?}", r.theta_hat);
}

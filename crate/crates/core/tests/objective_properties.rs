mod common;

use common::derivative_errors;
use nce_core::analysis::giso_kl_identity;
use nce_core::generators::{zeta_bounds, Generator, RatioInterval};
use nce_core::linalg::eig_extremes;
use nce_core::models::{model_measure, Design, ExpFamilyModel, NoiseModel, Statistics, ZMode};
use nce_core::objectives::{
    condnce_pairs, fnce_design, CentProblem, CondDataset, CondProblem, Dataset, FnceProblem, LocalDesign,
    LocalEstimator, LocalProblem, Objective, PairDesign, Want,
};
use nce_core::sampling::ChannelBase;
use proptest::collection::vec;
use proptest::prelude::*;

const CONVEX: [Generator; 6] = [
    Generator::Log,
    Generator::Power(0.0),
    Generator::Power(0.25),
    Generator::Power(0.5),
    Generator::Power(0.75),
    Generator::Power(1.0),
];

fn pts(dim: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    vec(vec(-1.0..=1.0f64, dim), n)
}

fn spins(dim: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    vec(vec(prop_oneof![Just(-1.0), Just(1.0)], dim), n)
}

fn quad2() -> (Statistics, NoiseModel) {
    let s = Statistics::quadratic(2);
    let q = NoiseModel::uniform_for(&s).unwrap();
    (s, q)
}

fn spin_exact(theta: &[f64], dim: usize) -> (ExpFamilyModel, NoiseModel) {
    let s = Statistics::Spin { dim_x: dim };
    let q = NoiseModel::uniform_for(&s).unwrap();
    (ExpFamilyModel::new(s, theta.to_vec()).unwrap(), q)
}

/// Every single-spin flip, one conditional sample per coordinate.
fn flip_pairs(m: &ExpFamilyModel) -> PairDesign {
    let w = model_measure(m, None, 0).unwrap().weight;
    let data = m.stats.enumerate().unwrap();
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
    let cd = CondDataset {
        data,
        cond,
        weights: Some(w),
        epsilon: 1.0,
        base_kind: ChannelBase::Custom { symmetric: true },
    };
    PairDesign::build(&m.stats, &cd).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn fnce_derivatives(theta in vec(-1.0..1.0f64, 5), data in pts(2, 12), noise in pts(2, 15), gi in 0usize..6, nu in 0.5..2.0f64) {
        let (s, q) = quad2();
        let g = CONVEX[gi];
        let m = ExpFamilyModel::new(s, vec![0.0; 4]).unwrap();
        let prob = FnceProblem::new(&m, &q, &g, nu, &Dataset::new(data, Some(noise))).unwrap();
        let (eg, eh) = derivative_errors(&prob, &theta);
        prop_assert!(eg <= 1e-5 && eh <= 1e-4, "{:?}: grad {} hess {}", g, eg, eh);
    }

    #[test]
    fn centnce_derivatives(theta in vec(-1.0..1.0f64, 4), data in pts(2, 12), noise in pts(2, 15), ai in 0usize..5, mc in any::<bool>()) {
        let alpha = [0.0, 0.25, 0.5, 0.75, 1.0][ai];
        let (s, q) = quad2();
        let m = ExpFamilyModel::new(s, vec![0.0; 4]).unwrap();
        let mode = if mc { ZMode::MonteCarlo } else { ZMode::Quadrature { bins: 30 } };
        let prob = CentProblem::new(&m, &q, alpha, &Dataset::new(data, Some(noise)), mode).unwrap();
        let (eg, eh) = derivative_errors(&prob, &theta);
        prop_assert!(eg <= 1e-5 && eh <= 1e-4, "alpha {} mc {}: grad {} hess {}", alpha, mc, eg, eh);
    }

    #[test]
    fn condnce_derivatives(theta in vec(-1.0..1.0f64, 4), data in pts(2, 10), slices in vec(vec(vec(-1.5..1.5f64, 2), 3), 10), eps in 0.05..1.0f64, log in any::<bool>()) {
        let (s, _) = quad2();
        let g = if log { Generator::Log } else { Generator::Power(0.5) };
        let cd = CondDataset::from_slices(data, &slices, eps, ChannelBase::GaussianIso);
        let prob = CondProblem::new(&s, &cd, &g).unwrap();
        let (eg, eh) = derivative_errors(&prob, &theta);
        prop_assert!(eg <= 1e-5 && eh <= 1e-4, "{:?}: grad {} hess {}", g, eg, eh);
    }

    #[test]
    fn local_derivatives(theta in vec(-1.0..1.0f64, 6), data in spins(3, 20), node in 0usize..3, alpha in prop_oneof![Just(0.0), Just(1.0)]) {
        let s = Statistics::Spin { dim_x: 3 };
        let ld = LocalDesign::build(&s, node, &data, ZMode::Analytic, None).unwrap();
        let block = ld.block(&theta);
        let prob = LocalProblem { design: ld, estimator: LocalEstimator::Cent { alpha } };
        let (eg, eh) = derivative_errors(&prob, &block);
        prop_assert!(eg <= 1e-5 && eh <= 1e-4, "alpha {}: grad {} hess {}", alpha, eg, eh);
    }

    #[test]
    fn fisher_consistency_fnce(theta in vec(-1.0..1.0f64, 3), gi in 0usize..6, nu in 0.5..2.0f64) {
        let (m, q) = spin_exact(&theta, 2);
        let g = CONVEX[gi];
        let data = model_measure(&m, Some(&q), 0).unwrap().augmented();
        let (pts, w) = q.support().unwrap();
        let noise = Design::build(&m.stats, &pts, Some(w), Some(&q)).unwrap().augmented();
        let th = m.normalized_augmented(0).unwrap();
        let e = fnce_design(&data, &noise, &g, nu, &th, Want::Grad).unwrap();
        prop_assert!(e.grad.iter().all(|v| v.abs() < 1e-10), "{:?}: {:?}", g, e.grad);
    }

    #[test]
    fn fisher_consistency_cent(theta in vec(-1.0..1.0f64, 3), alpha in -0.5..1.5f64) {
        let (m, q) = spin_exact(&theta, 2);
        let data = model_measure(&m, Some(&q), 0).unwrap();
        let ne = nce_core::models::noise_expectation(&m.stats, &q, alpha, ZMode::Analytic, None).unwrap();
        let e = nce_core::objectives::centnce_design(&data, &ne, alpha, &theta, Want::Grad).unwrap();
        prop_assert!(e.grad.iter().all(|v| v.abs() < 1e-10), "alpha {}: {:?}", alpha, e.grad);
    }

    #[test]
    fn fisher_consistency_cond(theta in vec(-1.0..1.0f64, 3), log in any::<bool>()) {
        let (m, _) = spin_exact(&theta, 2);
        let g = if log { Generator::Log } else { Generator::Power(0.5) };
        let e = condnce_pairs(&flip_pairs(&m), &g, &theta, Want::Grad).unwrap();
        prop_assert!(e.grad.iter().all(|v| v.abs() < 1e-10), "{:?}: {:?}", g, e.grad);
    }

    #[test]
    fn fisher_consistency_local(theta in vec(-1.0..1.0f64, 6), node in 0usize..3, alpha in prop_oneof![Just(0.0), Just(1.0)]) {
        let (m, _) = spin_exact(&theta, 3);
        let w = model_measure(&m, None, 0).unwrap().weight;
        let data = m.stats.enumerate().unwrap();
        let ld = LocalDesign::build(&m.stats, node, &data, ZMode::Analytic, None).unwrap().with_weights(&w).unwrap();
        let block = ld.block(&theta);
        let e = nce_core::objectives::local_eval(&ld, LocalEstimator::Cent { alpha }, &block, Want::Grad).unwrap();
        prop_assert!(e.grad.iter().all(|v| v.abs() < 1e-10), "alpha {}: {:?}", alpha, e.grad);
    }

    #[test]
    fn fnce_convex_for_admissible_generators(theta in vec(-2.0..2.0f64, 5), data in pts(2, 10), noise in pts(2, 10), gi in 0usize..6) {
        let (s, q) = quad2();
        let g = CONVEX[gi];
        let m = ExpFamilyModel::new(s, vec![0.0; 4]).unwrap();
        let prob = FnceProblem::new(&m, &q, &g, 1.0, &Dataset::new(data, Some(noise))).unwrap();
        let h = prob.eval(&theta, Want::Hess).unwrap().hess.unwrap();
        prop_assert!(eig_extremes(&h).unwrap().0 >= -1e-8);
    }

    #[test]
    fn fnce_smoothness_bound(theta in vec(-2.0..2.0f64, 5), data in pts(2, 10), noise in pts(2, 10), gi in 0usize..6, nu in 0.5..2.0f64) {
        let (s, q) = quad2();
        let g = CONVEX[gi];
        let m = ExpFamilyModel::new(s, vec![0.0; 4]).unwrap();
        let prob = FnceProblem::new(&m, &q, &g, nu, &Dataset::new(data, Some(noise))).unwrap();
        let h = prob.eval(&theta, Want::Hess).unwrap().hess.unwrap();
        let nu_eff = g.effective_nu(nu);
        let rhos: Vec<f64> = [&prob.data, &prob.noise]
            .iter()
            .flat_map(|d| (0..d.n).map(|i| (d.log_r(&theta, i) - nu_eff.ln()).exp()).collect::<Vec<_>>())
            .collect();
        let lo = rhos.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = rhos.iter().cloned().fold(0.0, f64::max);
        let z = zeta_bounds(g, RatioInterval::new(lo, hi).unwrap()).unwrap();
        let psi_max = 1.0;
        let bound = 5.0 * psi_max * psi_max * (z.b2_d_sup / nu_eff + z.b2_n_sup);
        prop_assert!(eig_extremes(&h).unwrap().1 <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn giso_identity(ts in vec(-1.0..1.0f64, 6), t in vec(-1.0..1.0f64, 6)) {
        let s = Statistics::Spin { dim_x: 3 };
        let q = NoiseModel::uniform_for(&s).unwrap();
        let r = giso_kl_identity(&s, &q, &ts, &t).unwrap();
        prop_assert!(r.residual.abs() < 1e-8);
    }
}

#[test]
fn power_two_counterexample_is_not_convex() {
    // All data at +1 and all noise at −1: the data side contributes −ρ ψ̲ψ̲ᵀ along (1, 1).
    let s = Statistics::two_point();
    let q = NoiseModel::uniform_for(&s).unwrap();
    let m = ExpFamilyModel::new(s, vec![0.0]).unwrap();
    let ds = Dataset::new(vec![vec![1.0]], Some(vec![vec![-1.0]]));
    let g = Generator::Power(2.0);
    let prob = FnceProblem::new(&m, &q, &g, 1.0, &ds).unwrap();
    let h = prob.eval(&[0.0, 0.0], Want::Hess).unwrap().hess.unwrap();
    let (lo, _) = eig_extremes(&h).unwrap();
    assert!(lo < 0.0, "{lo}");
}

use nce_core::models::{
    centered_log_ratio, centering, log_ratio, Design, NoiseExpectation, noise_quadrature, Domain, ExpFamilyModel, NoiseModel, NormKind, NormSpec,
    Statistics, ZMode,
};
use proptest::collection::vec;
use proptest::prelude::*;

fn box_stats() -> impl Strategy<Value = Statistics> {
    prop_oneof![
        (1usize..5).prop_map(Statistics::quadratic),
        Just(Statistics::Linear1d { domain: Domain::Box(vec![[-2.0, 3.0]]) }),
    ]
}

fn point_in(stats: &Statistics) -> impl Strategy<Value = Vec<f64>> {
    let Domain::Box(b) = stats.domain() else { unreachable!() };
    b.into_iter().map(|iv| iv[0]..=iv[1]).collect::<Vec<_>>()
}

fn finite_model() -> impl Strategy<Value = ExpFamilyModel> {
    prop_oneof![
        (-2.0..2.0f64).prop_map(|t| ExpFamilyModel::new(Statistics::two_point(), vec![t]).unwrap()),
        vec(-1.0..1.0f64, 3).prop_map(|t| ExpFamilyModel::new(Statistics::Spin { dim_x: 2 }, t).unwrap()),
        vec(-0.7..0.7f64, 6).prop_map(|t| ExpFamilyModel::new(Statistics::Spin { dim_x: 3 }, t).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn psi_is_bounded_by_psi_max((s, x) in box_stats().prop_flat_map(|s| { let p = point_in(&s); (Just(s), p) })) {
        let psi = s.eval(&x);
        prop_assert!(psi.iter().all(|v| v.abs() <= s.psi_max() + 1e-12));
    }

    #[test]
    fn spin_psi_bounded(x in vec(prop_oneof![Just(-1.0), Just(1.0)], 4)) {
        let s = Statistics::Spin { dim_x: 4 };
        prop_assert!(s.eval(&x).iter().all(|v| v.abs() <= s.psi_max()));
    }

    #[test]
    fn grad_x_matches_finite_differences((s, x) in box_stats().prop_flat_map(|s| { let p = point_in(&s); (Just(s), p) })) {
        let g = s.grad_x(&x).unwrap();
        let h = 1e-6;
        for a in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[a] += h;
            xm[a] -= h;
            let (fp, fm) = (s.eval(&xp), s.eval(&xm));
            for j in 0..s.dim() {
                let fd = (fp[j] - fm[j]) / (2.0 * h);
                prop_assert!((fd - g[(a, j)]).abs() <= 1e-5 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn centering_cancels_scale(m in finite_model(), log_s in -5.0..5.0f64, alpha in -1.0..2.0f64) {
        let q = NoiseModel::uniform_for(&m.stats).unwrap();
        let (pts, probs) = q.support().unwrap();
        let d = Design::build(&m.stats, &pts, Some(probs), Some(&q)).unwrap();
        let mut scaled = d.clone();
        for o in scaled.offset.iter_mut() {
            *o += log_s;
        }
        let c0 = centering(&NoiseExpectation::Points(d.clone()), &m.theta, alpha, false).unwrap();
        let c1 = centering(&NoiseExpectation::Points(scaled.clone()), &m.theta, alpha, false).unwrap();
        for k in 0..d.n {
            let a = d.log_r(&m.theta, k) - c0.log_z;
            let b = scaled.log_r(&m.theta, k) - c1.log_z;
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn centered_ratio_has_unit_moment(m in finite_model(), alpha in -1.0..2.0f64) {
        let q = NoiseModel::uniform_for(&m.stats).unwrap();
        let (pts, probs) = q.support().unwrap();
        let lt: Vec<f64> = pts.iter().map(|x| centered_log_ratio(&m, &q, alpha, x, ZMode::Analytic, None).unwrap()).collect();
        if alpha.abs() < 1e-9 {
            let e: f64 = lt.iter().zip(&probs).map(|(l, w)| w * l).sum();
            prop_assert!(e.abs() < 1e-8);
        } else {
            let e: f64 = lt.iter().zip(&probs).map(|(l, w)| w * (alpha * l).exp()).sum();
            prop_assert!((e - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn centered_log_mean_vanishes_at_zero(m in finite_model()) {
        let q = NoiseModel::uniform_for(&m.stats).unwrap();
        let (pts, probs) = q.support().unwrap();
        let e: f64 = pts.iter().zip(&probs)
            .map(|(x, w)| w * centered_log_ratio(&m, &q, 0.0, x, ZMode::Analytic, None).unwrap())
            .sum();
        prop_assert!(e.abs() < 1e-8);
    }

    #[test]
    fn norm_axioms(u in vec(-10.0..10.0f64, 5), v in vec(-10.0..10.0f64, 5), a in -5.0..5.0f64) {
        for k in [NormKind::L1, NormKind::L2, NormKind::Frobenius, NormKind::MaxNorm] {
            let n = NormSpec::new(k);
            let sum: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x + y).collect();
            let scaled: Vec<f64> = u.iter().map(|x| a * x).collect();
            prop_assert!(n.norm(&sum) <= n.norm(&u) + n.norm(&v) + 1e-10);
            prop_assert!((n.norm(&scaled) - a.abs() * n.norm(&u)).abs() <= 1e-10 * n.norm(&u).max(1.0));
            prop_assert!(n.norm(&u) >= 0.0);
            prop_assert!(n.norm(&[0.0; 5]) == 0.0);
        }
    }

    #[test]
    fn worst_case_ratio_bracket(theta in -3.0..3.0f64, x in -1.0..=1.0f64, r in 3.0..5.0f64) {
        // Linear1d on [−1, 1] with R = |·|: τ = sup R*(ψ) = 1.
        let s = Statistics::Linear1d { domain: Domain::Box(vec![[-1.0, 1.0]]) };
        let q = NoiseModel::uniform_for(&s).unwrap();
        let m = ExpFamilyModel::new(s, vec![theta]).unwrap();
        let scaled = log_ratio(&m, &q, 1.0, &[x]).unwrap() + q.log_density(&[x]).unwrap();
        prop_assert!(scaled.abs() <= r * 1.0);
    }
}

#[test]
fn box_noise_integrates_to_one() {
    for d in 1..=3 {
        let s = Statistics::quadratic(d);
        let q = NoiseModel::uniform_for(&s).unwrap();
        let quad = noise_quadrature(&s, &q, 40).unwrap();
        let vol = 2f64.powi(d as i32);
        // Midpoint rule: Σ cell · q_n(x).
        let total: f64 = quad.weight.iter().zip(&quad.offset).map(|(w, _)| w).sum::<f64>();
        let cell = vol / quad.n as f64;
        let via_density: f64 = quad.offset.iter().map(|o| cell * (-o).exp()).sum();
        assert!((total - 1.0).abs() < 1e-6);
        assert!((via_density - 1.0).abs() < 1e-6);
    }
}

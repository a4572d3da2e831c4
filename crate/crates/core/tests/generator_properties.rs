use nce_core::generators::{assemble_zeta, bregman, eval, zeta, Generator, Zeta};
use proptest::prelude::*;

const ZETAS: [Zeta; 4] = [Zeta::B1D, Zeta::B1N, Zeta::B2D, Zeta::B2N];

fn generator() -> impl Strategy<Value = Generator> {
    prop_oneof![
        Just(Generator::Log),
        Just(Generator::Power(0.0)),
        Just(Generator::Power(1.0)),
        (-2.0..3.0f64).prop_map(Generator::Power),
    ]
}

/// Magnitude of the terms combined in a ζ-function, for round-off tolerances.
fn zeta_scale(g: Generator, rho: f64) -> f64 {
    let r = rho.max(1.0);
    rho * r * (g.d2(rho).abs() + rho * g.d3(rho).abs())
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn strictly_convex(g in generator(), rho in log_uniform(1e-3, 1e3)) {
        prop_assert!(eval(g, rho, 2).unwrap() > 0.0);
    }

    #[test]
    fn zeta_closed_forms_match_assembly(g in generator(), rho in log_uniform(1e-3, 1e3)) {
        for w in ZETAS {
            let closed = zeta(g, rho, w).unwrap();
            let built = assemble_zeta(g.d2(rho), g.d3(rho), rho, w);
            prop_assert!((closed - built).abs() <= 1e-10 * zeta_scale(g, rho), "{:?} {:?}: {} vs {}", g, w, closed, built);
        }
    }

    #[test]
    fn affine_generator_scales_zeta(g in generator(), rho in log_uniform(1e-2, 1e2), a in 0.1..10.0f64) {
        // f̃ = a f + bρ + c has f̃'' = a f'' and f̃''' = a f''' for every b, c.
        for w in ZETAS {
            let scaled = assemble_zeta(a * g.d2(rho), a * g.d3(rho), rho, w);
            let base = zeta(g, rho, w).unwrap();
            prop_assert!((scaled - a * base).abs() <= 1e-12 * a * zeta_scale(g, rho));
        }
    }

    #[test]
    fn bregman_nonnegative(g in generator(), z in log_uniform(1e-3, 1e3), zp in log_uniform(1e-3, 1e3)) {
        prop_assert!(bregman(g, z, zp).unwrap() >= -1e-12 * g.f(z).abs().max(1.0));
    }

    #[test]
    fn power_limits_at_high_order(rho in 0.5..2.0f64, order in 2u8..4) {
        // d/dα log|f_α^(k)(ρ)| is at most 1 + |log ρ| near both poles.
        let tol = 1.1e-6 * (1.0 + rho.ln().abs());
        for (near, lim) in [(1e-6, 0.0), (-1e-6, 0.0), (1.0 - 1e-6, 1.0), (1.0 + 1e-6, 1.0)] {
            let a = eval(Generator::Power(near), rho, order).unwrap();
            let b = eval(Generator::Power(lim), rho, order).unwrap();
            prop_assert!((a - b).abs() <= tol * b.abs(), "alpha {} order {}: {} vs {}", near, order, a, b);
        }
    }
}

use nce_wasm_demo::{condnce_derivative, fit_two_point, zeta_curves};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn log_zeta_matches_closed_form() {
    let out = parse(zeta_curves("log", 0.0, 0.1, 10.0, 5));
    let rho = floats(&out["rho"]);
    assert_eq!(rho.len(), 5);
    assert!((rho[2] - 1.0).abs() < 1e-12);
    let (d1, n1, d2, n2) = (floats(&out["b1_d"]), floats(&out["b1_n"]), floats(&out["b2_d"]), floats(&out["b2_n"]));
    for (i, &r) in rho.iter().enumerate() {
        assert!((d1[i] + 1.0 / (1.0 + r)).abs() < 1e-12);
        assert!((n1[i] - r / (1.0 + r)).abs() < 1e-12);
        assert!((d2[i] - r / ((1.0 + r) * (1.0 + r))).abs() < 1e-12);
        assert!((n2[i] - d2[i]).abs() < 1e-15);
    }
}

#[test]
fn bad_inputs_come_back_as_errors() {
    assert!(parse(zeta_curves("log", 0.0, 2.0, 1.0, 5))["error"].is_string());
    assert!(parse(zeta_curves("tanh", 0.0, 0.1, 1.0, 5))["error"].is_string());
    assert!(parse(condnce_derivative(1.0, 0.0, 1, 10, 0, 5))["error"].is_string());
    assert!(parse(fit_two_point("mle", "log", 0.0, 0.5, 100, 0, 10))["error"].is_string());
}

#[test]
fn condnce_derivative_crosses_near_the_truth() {
    let out = parse(condnce_derivative(1.0, 1.0, 16, 4000, 0, 41));
    let (mu, d) = (floats(&out["mu"]), floats(&out["dl_dmu"]));
    assert_eq!(mu.len(), 41);
    assert!((mu[40] - 2.0).abs() < 1e-12);
    let i = (1..d.len()).find(|&i| d[i - 1].signum() != d[i].signum()).unwrap();
    assert!((0.8..=1.2).contains(&mu[i]), "{mu:?} {d:?}");
}

#[test]
fn two_point_fits_converge_near_theta_star() {
    for (est, kind, alpha) in [("fnce", "log", 0.0), ("fnce", "power", 0.5), ("centnce", "log", 1.0)] {
        let out = parse(fit_two_point(est, kind, alpha, 0.5, 20_000, 3, 2000));
        assert!(out["error"].is_null(), "{out}");
        assert!(out["converged"].as_bool().unwrap(), "{est} {out}");
        let theta = floats(&out["theta_hat"])[0];
        // Standard error of the MLE is about 0.008 at n = 2·10⁴.
        assert!((theta - 0.5).abs() < 0.05, "{est}: {theta}");
        assert!(!floats(&out["objective"]).is_empty());
    }
}

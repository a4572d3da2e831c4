#![allow(dead_code)]

use nce_core::objectives::{Objective, Want};

/// `‖a − b‖∞ / max(‖b‖∞, 1)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let den = b.iter().fold(1.0f64, |m, y| m.max(y.abs()));
    num / den
}

/// Central-difference gradient of the value and Jacobian of the gradient.
pub fn finite_differences(obj: &dyn Objective, theta: &[f64], h: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = theta.len();
    let mut g = vec![0.0; p];
    let mut jac = vec![vec![0.0; p]; p];
    for j in 0..p {
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[j] += h;
        tm[j] -= h;
        let ep = obj.eval(&tp, Want::Grad).unwrap();
        let em = obj.eval(&tm, Want::Grad).unwrap();
        g[j] = (ep.value - em.value) / (2.0 * h);
        for i in 0..p {
            jac[i][j] = (ep.grad[i] - em.grad[i]) / (2.0 * h);
        }
    }
    (g, jac)
}

/// (gradient error, Hessian error) of analytic derivatives against finite differences.
pub fn derivative_errors(obj: &dyn Objective, theta: &[f64]) -> (f64, f64) {
    let e = obj.eval(theta, Want::Hess).unwrap();
    let (g, jac) = finite_differences(obj, theta, 1e-5);
    let h = e.hess.expect("objective provides a Hessian");
    let p = theta.len();
    let analytic: Vec<f64> = (0..p * p).map(|k| h[(k / p, k % p)]).collect();
    let numeric: Vec<f64> = jac.iter().flatten().copied().collect();
    (rel_err(&e.grad, &g), rel_err(&analytic, &numeric))
}

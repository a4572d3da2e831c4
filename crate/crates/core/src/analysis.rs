//! Theoretical calculators: sandwich covariances, minimum-eigenvalue
//! quantities, explicit sample-complexity bounds and the GlobalGISO KL identity.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{NceError, Result};
use crate::generators::{zeta_bounds, Generator, RatioInterval, RatioKernel, ZetaBounds};
use crate::linalg::{clamp_eig, eig_extremes, log_sum_exp, max_asymmetry, sym_inverse, symmetrize};
use crate::models::{
    centering, geometry_constants, model_measure, noise_expectation, Design, ExpFamilyModel, GeometryConstants,
    NoiseExpectation, NoiseModel, NormKind, Statistics, ZMode,
};
use crate::objectives::PairDesign;

fn ser_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    rows.serialize(s)
}

/// `I`, `C` and `V = I⁻¹ C I⁻¹` with symmetry/PSD diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceReport {
    pub estimator: String,
    #[serde(serialize_with = "ser_matrix")]
    pub i: DMatrix<f64>,
    #[serde(serialize_with = "ser_matrix")]
    pub c: DMatrix<f64>,
    #[serde(serialize_with = "ser_matrix")]
    pub v: DMatrix<f64>,
    /// `I` was rank-deficient and a pseudo-inverse was used.
    pub singular: bool,
    pub i_min_eig: f64,
    pub c_min_eig: f64,
    pub v_min_eig: f64,
    pub v_asymmetry: f64,
}

impl CovarianceReport {
    fn assemble(estimator: String, i: DMatrix<f64>, c: DMatrix<f64>, pinv: bool) -> Result<Self> {
        let i = symmetrize(&i);
        let c = symmetrize(&c);
        if i.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(NceError::Numeric { index: 0, what: format!("{estimator}: non-finite I or C") });
        }
        let (inv, singular) = sym_inverse(&i, pinv)?;
        let v = &inv * &c * &inv;
        let v_asymmetry = max_asymmetry(&v);
        let v = symmetrize(&v);
        Ok(Self {
            i_min_eig: clamp_eig(eig_extremes(&i)?.0),
            c_min_eig: clamp_eig(eig_extremes(&c)?.0),
            v_min_eig: clamp_eig(eig_extremes(&v)?.0),
            estimator,
            i,
            c,
            v,
            singular,
            v_asymmetry,
        })
    }
}

fn add_outer(m: &mut DMatrix<f64>, w: f64, x: &[f64]) {
    let p = x.len();
    for a in 0..p {
        let u = w * x[a];
        for b in 0..p {
            m[(a, b)] += u * x[b];
        }
    }
}

/// f-NCE sandwich over a data measure `q_d` (augmented design, `θ̲*` including `c*`).
///
/// `I = E_d[ρ f''(ρ) ψ̲ψ̲ᵀ]`,
/// `C = E_d[(1 + (ν/β)ρ) ρ² f''(ρ)² ψ̲ψ̲ᵀ] − (1 + 1/β) m mᵀ` with `m = E_d[ρ f''(ρ) ψ̲]`.
pub fn fnce_covariance_design<K: RatioKernel + ?Sized>(
    data: &Design,
    theta_aug: &[f64],
    kernel: &K,
    nu: f64,
    beta: f64,
    pinv: bool,
) -> Result<CovarianceReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(NceError::Argument(format!("beta must be positive, got {beta}")));
    }
    if theta_aug.len() != data.p {
        return Err(NceError::Argument("parameter length does not match design".into()));
    }
    let nu = kernel.effective_nu(nu);
    let p = data.p;
    let mut i_m = DMatrix::zeros(p, p);
    let mut c_m = DMatrix::zeros(p, p);
    let mut m1 = DVector::zeros(p);
    for k in 0..data.n {
        let t = data.log_r(theta_aug, k) - nu.ln();
        // −ζ1_d(ρ) = ρ f''(ρ)
        let a = -kernel.data_side(t).z1;
        let w = data.weight[k];
        let row = data.row(k);
        add_outer(&mut i_m, w * a, row);
        add_outer(&mut c_m, w * (1.0 + nu / beta * t.exp()) * a * a, row);
        for (mj, x) in m1.iter_mut().zip(row) {
            *mj += w * a * x;
        }
    }
    c_m -= (1.0 + 1.0 / beta) * &m1 * m1.transpose();
    CovarianceReport::assemble(format!("fnce[{}]", kernel.label()), i_m, c_m, pinv)
}

/// f-NCE sandwich at the model's θ with exact (finite) or discretized (box) data and noise.
pub fn fnce_covariance(
    m: &ExpFamilyModel,
    q: &NoiseModel,
    g: Generator,
    nu: f64,
    beta: f64,
    bins: usize,
    pinv: bool,
) -> Result<CovarianceReport> {
    m.validate()?;
    g.validate()?;
    let data = model_measure(m, Some(q), bins)?.augmented();
    let theta = m.normalized_augmented(bins)?;
    fnce_covariance_design(&data, &theta, &g, nu, beta, pinv)
}

/// α-CentNCE sandwich over a data measure with the given noise expectation.
///
/// `Ĩ = (1−α)E_d[e (ψ−m)(ψ−m)ᵀ] + α E_d[e] S`, `C̃ = E_d[e² (ψ−m)(ψ−m)ᵀ]`,
/// with `e = ρ̃^{α−1}`, `m = E_n[ρ̃^α ψ]` and `S` the `ρ̃^α`-tilted noise covariance.
pub fn cent_covariance_design(
    data: &Design,
    ne: &NoiseExpectation,
    theta: &[f64],
    alpha: f64,
    pinv: bool,
) -> Result<CovarianceReport> {
    if theta.len() != data.p {
        return Err(NceError::Argument("parameter length does not match design".into()));
    }
    let p = data.p;
    let with_cov = alpha != 0.0;
    let cen = centering(ne, theta, alpha, with_cov)?;
    let mut a_m = DMatrix::zeros(p, p);
    let mut c_m = DMatrix::zeros(p, p);
    let mut mass = 0.0;
    let mut dev = vec![0.0; p];
    for k in 0..data.n {
        let lt = data.log_r(theta, k) - cen.log_z;
        let e = ((alpha - 1.0) * lt).exp();
        let w = data.weight[k];
        for (j, x) in data.row(k).iter().enumerate() {
            dev[j] = x - cen.mean[j];
        }
        add_outer(&mut a_m, w * e, &dev);
        add_outer(&mut c_m, w * e * e, &dev);
        mass += w * e;
    }
    let mut i_m = (1.0 - alpha) * a_m;
    if let Some(s) = &cen.cov {
        i_m += alpha * mass * crate::reduce::unpack_upper(p, s);
    }
    CovarianceReport::assemble(format!("centnce[alpha={alpha}]"), i_m, c_m, pinv)
}

/// α-CentNCE sandwich at the model's θ; the data law is the exact or discretized model.
#[allow(clippy::too_many_arguments)]
pub fn cent_covariance(
    m: &ExpFamilyModel,
    q: &NoiseModel,
    alpha: f64,
    mode: ZMode,
    noise_sample: Option<&[Vec<f64>]>,
    bins: usize,
    pinv: bool,
) -> Result<CovarianceReport> {
    m.validate()?;
    let data = model_measure(m, Some(q), bins)?;
    let ne = noise_expectation(&m.stats, q, alpha, mode, noise_sample)?;
    cent_covariance_design(&data, &ne, &m.theta, alpha, pinv)
}

/// `ζ̌1(ρ) = ρ⁻¹ f''(ρ⁻¹) + ρ² f''(ρ)`.
pub fn cond_zeta1(g: Generator, rho: f64) -> f64 {
    g.d2(1.0 / rho) / rho + rho * rho * g.d2(rho)
}

/// f-CondNCE sandwich over a pair measure, ρ taken as `φ(y)/φ(x)`.
///
/// `Ǐ = E[ρ² f''(ρ) ddᵀ]`, `Č = E[ζ̌1(ρ)² ddᵀ]` with `d = ψ(x) − ψ(y)`.
pub fn cond_covariance_pairs(pd: &PairDesign, theta: &[f64], g: Generator, pinv: bool) -> Result<CovarianceReport> {
    g.validate()?;
    if theta.len() != pd.p {
        return Err(NceError::Argument("parameter length does not match design".into()));
    }
    let p = pd.p;
    let mut i_m = DMatrix::zeros(p, p);
    let mut c_m = DMatrix::zeros(p, p);
    for r in 0..pd.n {
        let d = pd.row(r);
        let t: f64 = d.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + pd.t0[r];
        let rho = (-t).exp();
        let w = pd.weight[r];
        add_outer(&mut i_m, w * rho * rho * g.d2(rho), d);
        let z = cond_zeta1(g, rho);
        add_outer(&mut c_m, w * z * z, d);
    }
    CovarianceReport::assemble(format!("condnce[{}]", g.label()), i_m, c_m, pinv)
}

/// Weighted second moment `E[ψψᵀ]` of a design.
pub fn second_moment(d: &Design) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d.p, d.p);
    for k in 0..d.n {
        add_outer(&mut m, d.weight[k], d.row(k));
    }
    m
}

/// Minimum-eigenvalue inputs of the sample-complexity bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaMin {
    pub d: f64,
    pub n: Option<f64>,
    /// `‖E_n[ψ ρ̃^α]‖_max`, for the centered bound.
    pub tilted_mean_max: Option<f64>,
}

/// `λ_min(E_d[ψψᵀ])` and `λ_min(E_n[ψψᵀ])`.
pub fn lambda_min_nce(data: &Design, noise: &Design) -> Result<LambdaMin> {
    Ok(LambdaMin {
        d: clamp_eig(eig_extremes(&second_moment(data))?.0),
        n: Some(clamp_eig(eig_extremes(&second_moment(noise))?.0)),
        tilted_mean_max: None,
    })
}

/// Centered second-moment eigenvalues at θ*: `λ_min(E_d[(ψ−m)(ψ−m)ᵀ])` and the tilted noise covariance.
pub fn lambda_min_cent(data: &Design, ne: &NoiseExpectation, theta: &[f64], alpha: f64) -> Result<LambdaMin> {
    let can_cov = matches!(ne, NoiseExpectation::Points(_));
    let cen = centering(ne, theta, alpha, can_cov)?;
    let p = data.p;
    let mut a = DMatrix::zeros(p, p);
    let mut dev = vec![0.0; p];
    for k in 0..data.n {
        for (j, x) in data.row(k).iter().enumerate() {
            dev[j] = x - cen.mean[j];
        }
        add_outer(&mut a, data.weight[k], &dev);
    }
    let n = match &cen.cov {
        Some(s) => Some(clamp_eig(eig_extremes(&crate::reduce::unpack_upper(p, s))?.0)),
        None => None,
    };
    Ok(LambdaMin {
        d: clamp_eig(eig_extremes(&a)?.0),
        n,
        tilted_mean_max: Some(cen.mean.iter().fold(0.0, |m: f64, x| m.max(x.abs()))),
    })
}

/// `λ_min(E[(ψ(x)−ψ(y))(ψ(x)−ψ(y))ᵀ])` over a pair measure.
pub fn lambda_min_cond(pd: &PairDesign) -> Result<LambdaMin> {
    let mut m = DMatrix::zeros(pd.p, pd.p);
    for r in 0..pd.n {
        add_outer(&mut m, pd.weight[r], pd.row(r));
    }
    Ok(LambdaMin { d: clamp_eig(eig_extremes(&m)?.0), n: None, tilted_mean_max: None })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum BoundKind {
    Fnce { generator: Generator },
    Cent { alpha: f64 },
    Cond { generator: Generator },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundInputs {
    /// Target error Δ in ‖θ̂ − θ*‖₂.
    pub delta_err: f64,
    /// Failure probability δ.
    pub delta: f64,
    pub p: usize,
    pub psi_max: f64,
    pub norm: NormKind,
    /// Worst-case ratio range; CondNCE uses its pairwise widening internally.
    pub interval: RatioInterval,
    pub lambda_min_d: f64,
    /// Unused by CondNCE.
    pub lambda_min_n: f64,
    /// f-NCE only.
    pub nu: f64,
    /// CentNCE only: `‖E_n[ψ ρ̃^α]‖_max`.
    pub tilted_mean_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundBranch {
    pub sample: String,
    pub deviation_branch: f64,
    pub curvature_branch: f64,
    pub n_required: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub constants: &'static str,
    pub inputs: BoundInputs,
    pub geometry: GeometryConstants,
    pub zeta: Option<ZetaBounds>,
    pub branches: Vec<BoundBranch>,
}

fn branch(sample: &str, dev: f64, curv: f64) -> BoundBranch {
    BoundBranch { sample: sample.into(), deviation_branch: dev, curvature_branch: curv, n_required: dev.max(curv).max(1.0) }
}

fn positive(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(NceError::InfeasibleBound(format!("{what} = {x} must be positive")))
    }
}

/// `(sup, inf)` of `ρ^e` over an interval.
fn power_range(iv: RatioInterval, e: f64) -> (f64, f64) {
    let a = iv.rho_min.powf(e);
    let b = iv.rho_max.powf(e);
    (a.max(b), a.min(b))
}

/// Sample sizes from the finite-sample theorems with the explicit proof constants.
pub fn sample_complexity(kind: BoundKind, inp: &BoundInputs) -> Result<BoundReport> {
    if !(inp.delta_err > 0.0) {
        return Err(NceError::Argument(format!("target error must be positive, got {}", inp.delta_err)));
    }
    if !(inp.delta > 0.0 && inp.delta < 1.0) {
        return Err(NceError::Argument(format!("delta must lie in (0, 1), got {}", inp.delta)));
    }
    if !(inp.psi_max > 0.0 && inp.psi_max.is_finite()) {
        return Err(NceError::Argument("psi_max must be positive".into()));
    }
    let geo = geometry_constants(inp.norm, inp.p)?;
    let p = inp.p as f64;
    let ld = positive(inp.lambda_min_d, "lambda_min_d")?;
    let common = geo.kappa_star.powi(2) * geo.kappa_bar.powi(2) / inp.delta_err.powi(2);
    let (zeta, branches) = match kind {
        BoundKind::Fnce { generator: g } => {
            let ln = positive(inp.lambda_min_n, "lambda_min_n")?;
            let z = zeta_bounds(g, inp.interval)?;
            let nu = g.effective_nu(inp.nu);
            let curv = positive(z.b2_d_inf / nu * ld + z.b2_n_inf * ln, "curvature term")?;
            let psi2 = inp.psi_max.powi(2);
            let dev = |b1: f64| 1152.0 * b1 * b1 * common * psi2 / curv.powi(2) * (4.0 * p / inp.delta).ln();
            let cur = |l: f64| 8.0 * geo.kappa1.powi(4) * psi2 * psi2 / (l * l) * (8.0 * p * p / inp.delta).ln();
            (Some(z), vec![branch("data", dev(z.b1_d_sup), cur(ld)), branch("noise", dev(z.b1_n_sup), cur(ln))])
        }
        BoundKind::Cent { alpha } => {
            let mix = positive((1.0 - alpha) * ld + alpha * inp.lambda_min_n, "(1-alpha) lambda_d + alpha lambda_n")?;
            let (sup, inf) = power_range(inp.interval, alpha - 1.0);
            let psi_a = inp.psi_max + inp.tilted_mean_max;
            let dev = 1152.0 * sup * sup * psi_a * psi_a * common / (inf * inf * mix * mix) * (2.0 * p / inp.delta).ln();
            let cur = 8.0 * geo.kappa1.powi(4) * psi_a.powi(4) / (ld * ld) * (4.0 * p * p / inp.delta).ln();
            (None, vec![branch("data", dev, cur)])
        }
        BoundKind::Cond { generator: g } => {
            let z = zeta_bounds(g, inp.interval.pairwise())?;
            let psi2 = inp.psi_max.powi(2);
            let curv = positive(z.b2_d_inf + z.b2_n_inf, "curvature term")?;
            let dev = 1152.0 * (z.b1_d_sup + z.b1_n_sup).powi(2) * common * psi2 / (curv * curv * ld * ld)
                * (4.0 * p / inp.delta).ln();
            let cur = 128.0 * geo.kappa1.powi(4) * psi2 * psi2 / (ld * ld) * (4.0 * p * p / inp.delta).ln();
            (Some(z), vec![branch("data", dev, cur)])
        }
    };
    Ok(BoundReport { kind, constants: "proof constants, not tight", inputs: *inp, geometry: geo, zeta, branches })
}

/// Both sides of the GlobalGISO KL identity on a finite domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GisoIdentity {
    pub log_l_giso: f64,
    pub kl: f64,
    pub log_z_tilde_star: f64,
    /// `log L_giso − (D(q_n‖q_{θ*,θ}) − log Z̃(θ*))`.
    pub residual: f64,
}

/// `log L_giso(θ)` against `D(q_n ‖ q_{θ*,θ}) − log Z̃(θ*)` by exact sums,
/// where `φ̃_θ = φ_θ / exp(E_{q_n}[log φ_θ])` and `L_giso(θ) = E_d[q_n/φ̃_θ]`.
pub fn giso_kl_identity(stats: &Statistics, q: &NoiseModel, theta_star: &[f64], theta: &[f64]) -> Result<GisoIdentity> {
    if !stats.is_finite() {
        return Err(NceError::Config("the identity is evaluated on finite domains only".into()));
    }
    q.validate()?;
    let pts = stats.enumerate()?;
    let lq: Vec<f64> = pts.iter().map(|x| q.log_density(x).unwrap_or(f64::NEG_INFINITY)).collect();
    let qn: Vec<f64> = lq.iter().map(|l| l.exp()).collect();
    let log_phi = |th: &[f64]| -> Vec<f64> { pts.iter().map(|x| stats.log_phi(th, x)).collect() };
    let centered = |lp: &[f64]| -> Vec<f64> {
        let e: f64 = lp.iter().zip(&qn).filter(|(_, q)| **q > 0.0).map(|(l, q)| l * q).sum();
        lp.iter().map(|l| l - e).collect()
    };
    let ls = log_phi(theta_star);
    let lt_star = centered(&ls);
    let lt = centered(&log_phi(theta));
    let log_z = log_sum_exp(ls.iter().copied());
    let log_z_tilde_star = log_sum_exp(lt_star.iter().copied());

    // Left side: E_d[q_n / φ̃_θ] with q_d = φ_θ*/Z.
    let log_l_giso = log_sum_exp(
        (0..pts.len()).filter(|&k| qn[k] > 0.0).map(|k| ls[k] - log_z + lq[k] - lt[k]).collect::<Vec<_>>().into_iter(),
    );
    // Right side: KL between q_n and the normalized ξ = φ̃_θ*/φ̃_θ · q_n.
    let log_xi: Vec<f64> = (0..pts.len()).map(|k| lt_star[k] - lt[k] + lq[k]).collect();
    let log_zx = log_sum_exp(log_xi.iter().copied().filter(|v| v.is_finite()).collect::<Vec<_>>().into_iter());
    let kl: f64 = (0..pts.len()).filter(|&k| qn[k] > 0.0).map(|k| qn[k] * (lq[k] - (log_xi[k] - log_zx))).sum();
    Ok(GisoIdentity { log_l_giso, kl, log_z_tilde_star, residual: log_l_giso - (kl - log_z_tilde_star) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{CondDataset, Want};
    use crate::sampling::ChannelBase;

    fn two_point(theta: f64) -> (ExpFamilyModel, NoiseModel) {
        let s = Statistics::two_point();
        let q = NoiseModel::uniform_for(&s).unwrap();
        (ExpFamilyModel::new(s, vec![theta]).unwrap(), q)
    }

    #[test]
    fn mle_sandwich_is_inverse_fisher() {
        let (m, q) = two_point(0.5);
        let r = cent_covariance(&m, &q, 1.0, ZMode::Analytic, None, 100, false).unwrap();
        let fisher = 1.0 - 0.5f64.tanh().powi(2);
        assert!((r.i[(0, 0)] - fisher).abs() < 1e-14);
        assert!((r.c[(0, 0)] - fisher).abs() < 1e-14);
        assert!((r.v[(0, 0)] - 1.0 / fisher).abs() < 1e-12);
    }

    #[test]
    fn log_is_most_efficient_on_two_point() {
        let (m, q) = two_point(0.5);
        let vlog = fnce_covariance(&m, &q, Generator::Log, 1.0, 1.0, 100, false).unwrap().v;
        for a in [0.0, 0.5, 1.0] {
            let v = fnce_covariance(&m, &q, Generator::Power(a), 1.0, 1.0, 100, false).unwrap().v;
            let (lo, _) = eig_extremes(&(v - &vlog)).unwrap();
            assert!(lo >= -1e-8, "alpha {a}: {lo}");
        }
    }

    #[test]
    fn fnce_sandwich_matches_hessian_at_truth() {
        // Expected Hessian of the population objective at θ̲* equals I/ν.
        let (m, q) = two_point(0.3);
        let nu = 2.0;
        let r = fnce_covariance(&m, &q, Generator::Log, nu, 1.0, 100, false).unwrap();
        let data = model_measure(&m, Some(&q), 100).unwrap().augmented();
        let noise = model_measure(&ExpFamilyModel::new(Statistics::two_point(), vec![0.0]).unwrap(), Some(&q), 100)
            .unwrap()
            .augmented();
        let th = m.normalized_augmented(100).unwrap();
        let e = crate::objectives::fnce_design(&data, &noise, &Generator::Log, nu, &th, Want::Hess).unwrap();
        let h = e.hess.unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((h[(a, b)] - r.i[(a, b)] / nu).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cond_information_matches_mean_hessian_at_truth() {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let s = Statistics::GaussianMean1d;
        let mu = 1.0;
        let mut rng = crate::sampling::RngSpec::new(7).stream("cond-info", 0);
        let n = 200_000;
        let data: Vec<Vec<f64>> = (0..n).map(|_| vec![mu + rng.sample::<f64, _>(StandardNormal)]).collect();
        let slices: Vec<Vec<Vec<f64>>> = (0..n).map(|_| vec![vec![rng.sample::<f64, _>(StandardNormal)]]).collect();
        let cd = CondDataset::from_slices(data, &slices, 0.5, ChannelBase::GaussianIso);
        let pd = PairDesign::build(&s, &cd).unwrap();
        for g in [Generator::Log, Generator::Power(0.5)] {
            let r = cond_covariance_pairs(&pd, &[mu], g, false).unwrap();
            let h = crate::objectives::condnce_pairs(&pd, &g, &[mu], Want::Hess).unwrap().hess.unwrap();
            let rel = (h[(0, 0)] - r.i[(0, 0)]).abs() / r.i[(0, 0)];
            assert!(rel < 0.02, "{g:?}: {} vs {}", h[(0, 0)], r.i[(0, 0)]);
            // Per-pair gradient coefficient is −ζ̌1 at ρ = φ(y)/φ(x).
            let e = crate::objectives::condnce_pairs(&pd, &g, &[0.4], Want::Grad).unwrap();
            let mut grad = 0.0;
            for k in 0..pd.n {
                let t = pd.row(k)[0] * 0.4 + pd.t0[k];
                grad -= pd.weight[k] * cond_zeta1(g, (-t).exp()) * pd.row(k)[0];
            }
            assert!((e.grad[0] - grad).abs() < 1e-10 * grad.abs().max(1.0), "{g:?}");
        }
    }

    #[test]
    fn lambda_examples() {
        let (m, q) = two_point(0.0);
        let d = model_measure(&m, Some(&q), 100).unwrap();
        assert!((lambda_min_nce(&d, &d).unwrap().d - 1.0).abs() < 1e-15);
        let s = Statistics::GaussianMean1d;
        let cd = CondDataset::from_slices(vec![vec![0.2], vec![0.9]], &[vec![vec![1.0]], vec![vec![-1.0]]], 0.0, ChannelBase::GaussianIso);
        assert_eq!(lambda_min_cond(&PairDesign::build(&s, &cd).unwrap()).unwrap().d, 0.0);
    }

    fn inputs() -> BoundInputs {
        BoundInputs {
            delta_err: 0.1,
            delta: 0.05,
            p: 2,
            psi_max: 1.0,
            norm: NormKind::L2,
            interval: RatioInterval::new(0.5, 2.0).unwrap(),
            lambda_min_d: 0.8,
            lambda_min_n: 1.0,
            nu: 1.0,
            tilted_mean_max: 0.2,
        }
    }

    #[test]
    fn bound_structure() {
        let k = BoundKind::Fnce { generator: Generator::Log };
        let base = sample_complexity(k, &inputs()).unwrap();
        let far = sample_complexity(k, &BoundInputs { delta_err: 1e9, ..inputs() }).unwrap();
        for (a, b) in far.branches.iter().zip(&base.branches) {
            assert_eq!(a.n_required, b.curvature_branch.max(1.0));
        }
        let dbl = sample_complexity(k, &BoundInputs { psi_max: 2.0, ..inputs() }).unwrap();
        let ratio = dbl.branches[0].curvature_branch / base.branches[0].curvature_branch;
        assert!((ratio - 16.0).abs() < 1e-12);
        let bad = sample_complexity(k, &BoundInputs { lambda_min_d: 0.0, ..inputs() });
        assert!(matches!(bad, Err(NceError::InfeasibleBound(_))));
    }

    #[test]
    fn giso_identity_on_spins() {
        let s = Statistics::Spin { dim_x: 2 };
        let q = NoiseModel::uniform_for(&s).unwrap();
        let r = giso_kl_identity(&s, &q, &[0.7, -0.2, 0.4], &[0.1, 0.3, -0.5]).unwrap();
        assert!(r.residual.abs() < 1e-12, "{r:?}");
        assert!(r.kl >= 0.0);
    }
}

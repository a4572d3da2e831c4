//! Convex generators `f` and the derived ζ-functions.
//!
//! For a generator `f` and ratio `ρ > 0`:
//!
//! | name | definition |
//! |---|---|
//! | `b1_d` | `−ρ f''(ρ)` |
//! | `b1_n` | `ρ² f''(ρ)` |
//! | `b2_d` | `ρ g_f(ρ)` |
//! | `b2_n` | `ρ² (f''(ρ) − g_f(ρ))` |
//!
//! with `g_f(ρ) = −(ρ f'''(ρ) + f''(ρ))`. Objectives consume these through
//! [`RatioKernel`], which works on `t = log ρ` so that large energies never
//! overflow before the last exponentiation.

use serde::{Deserialize, Serialize};

use crate::error::{NceError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// `f(ρ) = ρ log ρ − (ρ+1) log(ρ+1)`, the logistic-loss generator.
    Log,
    /// `f(ρ) = (ρ^α − 1)/(α(α−1))`, with `−log ρ` at α = 0 and `ρ log ρ` at α = 1.
    Power(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zeta {
    B1D,
    B1N,
    B2D,
    B2N,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioInterval {
    pub rho_min: f64,
    pub rho_max: f64,
}

impl RatioInterval {
    pub fn new(rho_min: f64, rho_max: f64) -> Result<Self> {
        if !(rho_min > 0.0 && rho_min <= rho_max && rho_max.is_finite()) {
            return Err(NceError::Argument(format!(
                "ratio interval needs 0 < rho_min <= rho_max < inf, got [{rho_min}, {rho_max}]"
            )));
        }
        Ok(Self { rho_min, rho_max })
    }

    /// The interval of pair ratios `φ(x)/φ(y)` when each single ratio lies in `self`.
    pub fn pairwise(&self) -> Self {
        Self {
            rho_min: self.rho_min / self.rho_max,
            rho_max: self.rho_max / self.rho_min,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaBounds {
    pub b1_d_sup: f64,
    pub b1_n_sup: f64,
    pub b2_d_sup: f64,
    pub b2_n_sup: f64,
    pub b2_d_inf: f64,
    pub b2_n_inf: f64,
}

fn is_zero(a: f64) -> bool {
    a == 0.0
}

fn is_one(a: f64) -> bool {
    a == 1.0
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(NceError::Domain(format!("generator argument must be finite and positive, got {rho}")))
    }
}

impl Generator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Generator::Log => Ok(()),
            Generator::Power(a) if a.is_finite() => Ok(()),
            Generator::Power(a) => Err(NceError::Config(format!("power exponent must be finite, got {a}"))),
        }
    }

    /// f(ρ), unchecked.
    pub fn f(&self, rho: f64) -> f64 {
        match *self {
            Generator::Log => -rho * (1.0 / rho).ln_1p() - rho.ln_1p(),
            Generator::Power(a) if is_zero(a) => -rho.ln(),
            Generator::Power(a) if is_one(a) => rho * rho.ln(),
            Generator::Power(a) => (rho.powf(a) - 1.0) / (a * (a - 1.0)),
        }
    }

    pub fn d1(&self, rho: f64) -> f64 {
        match *self {
            Generator::Log => -(1.0 / rho).ln_1p(),
            Generator::Power(a) if is_zero(a) => -1.0 / rho,
            Generator::Power(a) if is_one(a) => rho.ln() + 1.0,
            Generator::Power(a) => rho.powf(a - 1.0) / (a - 1.0),
        }
    }

    pub fn d2(&self, rho: f64) -> f64 {
        match *self {
            Generator::Log => 1.0 / (rho * (rho + 1.0)),
            Generator::Power(a) => rho.powf(a - 2.0),
        }
    }

    pub fn d3(&self, rho: f64) -> f64 {
        match *self {
            Generator::Log => -(2.0 * rho + 1.0) / (rho * rho * (rho + 1.0) * (rho + 1.0)),
            Generator::Power(a) => (a - 2.0) * rho.powf(a - 3.0),
        }
    }

    /// Whether the objective depends on the noise-ratio weight ν.
    /// Power generators are ν-free, so ν is pinned to 1 for them.
    pub fn uses_nu(&self) -> bool {
        matches!(self, Generator::Log)
    }

    pub fn effective_nu(&self, nu: f64) -> f64 {
        if self.uses_nu() {
            nu
        } else {
            1.0
        }
    }

    /// Closed-form ζ value.
    pub fn zeta_closed(&self, rho: f64, which: Zeta) -> f64 {
        match *self {
            Generator::Log => match which {
                Zeta::B1D => -1.0 / (rho + 1.0),
                Zeta::B1N => rho / (rho + 1.0),
                Zeta::B2D | Zeta::B2N => rho / ((rho + 1.0) * (rho + 1.0)),
            },
            Generator::Power(a) => match which {
                Zeta::B1D => -rho.powf(a - 1.0),
                Zeta::B1N => rho.powf(a),
                Zeta::B2D => (1.0 - a) * rho.powf(a - 1.0),
                Zeta::B2N => a * rho.powf(a),
            },
        }
    }
}

/// `f^(order)(ρ)` for order 0..=3.
pub fn eval(g: Generator, rho: f64, order: u8) -> Result<f64> {
    g.validate()?;
    check_rho(rho)?;
    match order {
        0 => Ok(g.f(rho)),
        1 => Ok(g.d1(rho)),
        2 => Ok(g.d2(rho)),
        3 => Ok(g.d3(rho)),
        _ => Err(NceError::Argument(format!("derivative order must be 0..=3, got {order}"))),
    }
}

pub fn zeta(g: Generator, rho: f64, which: Zeta) -> Result<f64> {
    g.validate()?;
    check_rho(rho)?;
    Ok(g.zeta_closed(rho, which))
}

/// ζ assembled from raw second and third derivatives `f2 = f''(ρ)`, `f3 = f'''(ρ)`.
pub fn assemble_zeta(f2: f64, f3: f64, rho: f64, which: Zeta) -> f64 {
    let gf = -(rho * f3 + f2);
    match which {
        Zeta::B1D => -rho * f2,
        Zeta::B1N => rho * rho * f2,
        Zeta::B2D => rho * gf,
        Zeta::B2N => rho * rho * (f2 - gf),
    }
}

pub fn zeta_bounds(g: Generator, iv: RatioInterval) -> Result<ZetaBounds> {
    g.validate()?;
    RatioInterval::new(iv.rho_min, iv.rho_max)?;
    let (lo, hi) = (iv.rho_min, iv.rho_max);
    Ok(match g {
        Generator::Log => {
            let bump = |r: f64| r / ((r + 1.0) * (r + 1.0));
            let kappa = bump(lo).min(bump(hi));
            let sup2 = if lo <= 1.0 && 1.0 <= hi { 0.25 } else { bump(lo).max(bump(hi)) };
            ZetaBounds {
                b1_d_sup: 1.0 / (lo + 1.0),
                b1_n_sup: hi / (hi + 1.0),
                b2_d_sup: sup2,
                b2_n_sup: sup2,
                b2_d_inf: kappa,
                b2_n_inf: kappa,
            }
        }
        Generator::Power(a) => {
            // ρ^s is monotone, so extremes sit on the endpoints.
            let ext = |s: f64| {
                let (u, v) = (lo.powf(s), hi.powf(s));
                (u.min(v), u.max(v))
            };
            let (d_inf, d_sup) = ext(a - 1.0);
            let (n_inf, n_sup) = ext(a);
            ZetaBounds {
                b1_d_sup: d_sup,
                b1_n_sup: n_sup,
                b2_d_sup: (1.0 - a).abs() * d_sup,
                b2_n_sup: a.abs() * n_sup,
                b2_d_inf: (1.0 - a).abs() * d_inf,
                b2_n_inf: a.abs() * n_inf,
            }
        }
    })
}

pub fn bregman(g: Generator, z: f64, zp: f64) -> Result<f64> {
    g.validate()?;
    check_rho(z)?;
    check_rho(zp)?;
    Ok(g.f(z) - g.f(zp) - g.d1(zp) * (z - zp))
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Value, first and second t-derivative of one side of an NCE loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SideTerms {
    pub value: f64,
    pub z1: f64,
    pub z2: f64,
}

/// Log-domain view of a generator as consumed by the objectives.
///
/// With `t = log ρ`, the data side is `−f'(e^t)` and the noise side is
/// `e^t f'(e^t) − f(e^t)`; their t-derivatives are the ζ-functions.
pub trait RatioKernel: Sync {
    fn data_side(&self, t: f64) -> SideTerms;
    fn noise_side(&self, t: f64) -> SideTerms;
    fn effective_nu(&self, nu: f64) -> f64;
    /// `f(1)` and `f''(1)`, needed by the small-ε expansion.
    fn at_one(&self) -> (f64, f64);
    /// `(sup |z2| data side, sup |z2| noise side)` over all ρ > 0, when finite.
    fn global_z2_sup(&self) -> Option<(f64, f64)> {
        None
    }
    fn label(&self) -> String;
}

impl RatioKernel for Generator {
    fn data_side(&self, t: f64) -> SideTerms {
        match *self {
            Generator::Log => {
                let s = sigmoid(t);
                let sm = sigmoid(-t);
                SideTerms { value: softplus(-t), z1: -sm, z2: s * sm }
            }
            Generator::Power(a) => {
                let r = ((a - 1.0) * t).exp();
                let value = if is_one(a) { -(t + 1.0) } else { r / (1.0 - a) };
                SideTerms { value, z1: -r, z2: (1.0 - a) * r }
            }
        }
    }

    fn noise_side(&self, t: f64) -> SideTerms {
        match *self {
            Generator::Log => {
                let s = sigmoid(t);
                SideTerms { value: softplus(t), z1: s, z2: s * sigmoid(-t) }
            }
            Generator::Power(a) => {
                let r = (a * t).exp();
                let value = if is_zero(a) {
                    t - 1.0
                } else if is_one(a) {
                    r
                } else {
                    r / a + 1.0 / (a * (a - 1.0))
                };
                SideTerms { value, z1: r, z2: a * r }
            }
        }
    }

    fn effective_nu(&self, nu: f64) -> f64 {
        Generator::effective_nu(self, nu)
    }

    fn at_one(&self) -> (f64, f64) {
        (self.f(1.0), self.d2(1.0))
    }

    fn global_z2_sup(&self) -> Option<(f64, f64)> {
        match self {
            Generator::Log => Some((0.25, 0.25)),
            Generator::Power(_) => None,
        }
    }

    fn label(&self) -> String {
        match self {
            Generator::Log => "log".into(),
            Generator::Power(a) => format!("power({a})"),
        }
    }
}

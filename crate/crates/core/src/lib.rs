//! Noise-contrastive estimation for exponential-family energy-based models.
//!
//! The crate covers the estimator family built from a convex generator `f`:
//!
//! | estimator | entry point | ratio |
//! |---|---|---|
//! | f-NCE | [`objectives::fnce`] | `φ_θ(x) / (ν q_n(x))` with a learned log-scale |
//! | α-CentNCE | [`objectives::centnce`] | `ρ_θ / Z_α(θ)`, scale-free |
//! | f-CondNCE | [`objectives::condnce`] | `φ_θ(x) / φ_θ(y)`, `y ~ π_ε(·|x)` |
//! | local variants | [`objectives::local_nce`] | node conditionals of an MRF |
//!
//! MLE, MC-MLE and GlobalGISO fall out of α-CentNCE at α = 1 and α = 0.
//! Every objective returns analytic gradients and Hessians; [`optimizer::fit`]
//! runs proximal/projected gradient descent on any of them, and [`analysis`]
//! holds the asymptotic-covariance and sample-complexity calculators.

pub mod analysis;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod models;
pub mod objectives;
pub mod optimizer;
pub mod reduce;
pub mod sampling;

pub use error::{NceError, Result};

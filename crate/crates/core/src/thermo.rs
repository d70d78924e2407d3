//! Entropy production, Wasserstein-2 costs and the speed limit
//! `T_SL = W2 / (β⁻¹R)`.
//!
//! Entropy is always reported as `β⁻¹R`, in units of the loss, so it stays
//! finite for noiseless dynamics.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DVector};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::dynamics::OuEigen;
use crate::linalg::{kahan_sum, psd_sqrt, trace_psd_sqrt, KahanSum};
use crate::quad::graded_simpson;
use crate::{Error, GaussianMeasure, QuadraticPotential, Result, Trajectory};

/// Default number of Simpson panels for time integrals.
pub const DEFAULT_N_QUAD: usize = 4096;

/// Negative loss drops larger than this are rejected as not coming from a
/// descent.
pub const DROP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMethod {
    DynamicGradientFlow,
    DynamicGaussian,
    Equilibrium,
    NtkLossDrop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    /// `β⁻¹R` in loss units.
    pub value: f64,
    pub method: EntropyMethod,
    /// `None` when the estimate refers to relaxation to equilibrium.
    pub horizon: Option<f64>,
}

fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Squared Wasserstein-2 distance between two Gaussians (Bures formula).
pub fn w2_gaussian(p: &GaussianMeasure, q: &GaussianMeasure) -> Result<f64> {
    check_same_dim(p.dim(), q.dim())?;
    let shift = (p.mean() - q.mean()).norm_squared();
    let root_q = psd_sqrt(q.covariance())?;
    let cross = &root_q * p.covariance() * &root_q;
    let bures = p.covariance().trace() + q.covariance().trace() - 2.0 * trace_psd_sqrt(&cross)?;
    Ok(shift + bures.max(0.0))
}

/// Squared Euclidean distance, the Wasserstein-2 cost between point masses.
pub fn w2_dirac(theta0: &DVector<f64>, theta_t: &DVector<f64>) -> Result<f64> {
    check_same_dim(theta0.len(), theta_t.len())?;
    Ok(kahan_sum(
        theta0
            .iter()
            .zip(theta_t.iter())
            .map(|(a, b)| (a - b) * (a - b)),
    ))
}

/// Quantile-coupling estimate of the squared Wasserstein-2 distance between
/// two equally sized one-dimensional samples.
pub fn w2_empirical_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty);
    }
    check_same_dim(a.len(), b.len())?;
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let m = a.len() as f64;
    Ok(kahan_sum(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y))) / m)
}

/// `∫₀ᵀ ‖∇V‖² dt` along a gradient-flow trajectory.
///
/// Uses the integrator's running dissipation when available, otherwise the
/// trapezoidal rule over the stored gradient norms.
pub fn entropy_dynamic_gradient_flow(traj: &Trajectory) -> Result<EntropyEstimate> {
    let times = traj.times();
    let horizon = Some(times[times.len() - 1] - times[0]);
    let value = if let Some(d) = traj.dissipation() {
        d[d.len() - 1] - d[0]
    } else {
        let g = traj.grad_sq().ok_or(Error::MissingGradients)?;
        let mut acc = KahanSum::new();
        for i in 1..times.len() {
            acc.add(0.5 * (times[i] - times[i - 1]) * (g[i] + g[i - 1]));
        }
        acc.value()
    };
    Ok(EntropyEstimate {
        value,
        method: EntropyMethod::DynamicGradientFlow,
        horizon,
    })
}

/// Entropy production of Langevin dynamics on a quadratic potential started
/// from a Gaussian, using the exact Gaussian law at each quadrature node.
///
/// The integrand is the mean squared probability velocity
/// `⟨‖v‖²⟩ = ‖Aμ − b‖² + Tr(M Σ M)` with `M = A − β⁻¹Σ⁻¹`, which expands to
/// `⟨‖∇V‖²⟩ − 2β⁻¹Tr A + β⁻²Tr Σ⁻¹` but does not cancel catastrophically
/// near equilibrium.
pub fn entropy_dynamic_gaussian(
    pot: &QuadraticPotential,
    init: &GaussianMeasure,
    beta_inv: f64,
    horizon: f64,
    n_quad: usize,
) -> Result<EntropyEstimate> {
    if !(beta_inv.is_finite() && beta_inv > 0.0) {
        return Err(Error::invalid("beta_inv", "must be finite and > 0"));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::invalid("horizon", "must be finite and >= 0"));
    }
    if n_quad < 2 {
        return Err(Error::invalid("n_quad", "must be >= 2"));
    }
    if pot.lambda_min() <= 0.0 {
        return Err(Error::SingularPotential {
            eigenvalue: pot.lambda_min(),
        });
    }
    let ou = OuEigen::new(pot, init, beta_inv)?;
    let estimate = |value| EntropyEstimate {
        value,
        method: EntropyMethod::DynamicGaussian,
        horizon: Some(horizon),
    };
    if horizon == 0.0 {
        return Ok(estimate(0.0));
    }

    let mut failure = None;
    let integrand = |t: f64| -> f64 {
        if failure.is_some() {
            return 0.0;
        }
        let mean = ou.mean(t);
        let cov = ou.covariance(t);
        let drift = kahan_sum(
            mean.iter()
                .zip(ou.lambdas.iter().zip(ou.bq.iter()))
                .map(|(m, (l, b))| (l * m - b) * (l * m - b)),
        );
        let Some(chol) = Cholesky::new(cov.clone()) else {
            failure = Some(t);
            return 0.0;
        };
        let mut m = -chol.inverse() * beta_inv;
        for (k, l) in ou.lambdas.iter().enumerate() {
            m[(k, k)] += l;
        }
        let spread = (&m * &cov * &m).trace();
        drift + spread.max(0.0)
    };

    let head = (n_quad / 16).max(2);
    let tail = n_quad.saturating_sub(head).max(2);
    let knee = 0.1 / pot.lambda_max();
    let value = graded_simpson(integrand, horizon, knee, head, tail);
    if let Some(time) = failure {
        return Err(Error::SingularCovariance { time });
    }
    Ok(estimate(value))
}

/// Free-energy form `β⁻¹ ln Z_T − β⁻¹ ln Z_0 + ⟨L(θ(0))⟩` for dynamics that
/// relax to the Gibbs measure `e^{−βV}/Z_T`.
pub fn entropy_equilibrium(
    log_z_final: f64,
    log_z_initial: f64,
    mean_initial_loss: f64,
    beta_inv: f64,
) -> Result<EntropyEstimate> {
    if !(beta_inv.is_finite() && beta_inv > 0.0) {
        return Err(Error::invalid("beta_inv", "must be finite and > 0"));
    }
    Ok(EntropyEstimate {
        value: beta_inv * (log_z_final - log_z_initial) + mean_initial_loss,
        method: EntropyMethod::Equilibrium,
        horizon: None,
    })
}

/// Entropy production of noiseless gradient flow: the loss drop.
pub fn entropy_ntk(loss_initial: f64, loss_final: f64) -> Result<EntropyEstimate> {
    if !(loss_initial.is_finite() && loss_final.is_finite()) {
        return Err(Error::invalid("loss", "must be finite"));
    }
    let drop = loss_initial - loss_final;
    if drop < -DROP_TOL {
        return Err(Error::LossIncrease { increase: -drop });
    }
    Ok(EntropyEstimate {
        value: drop,
        method: EntropyMethod::NtkLossDrop,
        horizon: None,
    })
}

/// `T_SL = W2 / (β⁻¹R)`. No transport needs no time, so `W2 = 0` gives zero.
pub fn speed_limit(w2_sq: f64, entropy: f64) -> Result<f64> {
    if !(w2_sq.is_finite() && w2_sq >= 0.0) {
        return Err(Error::invalid("w2_sq", "must be finite and >= 0"));
    }
    if entropy.is_nan() {
        return Err(Error::invalid("entropy", "must not be NaN"));
    }
    if w2_sq == 0.0 {
        return Ok(0.0);
    }
    if entropy <= 0.0 {
        return Err(Error::UndefinedSpeedLimit { w2_sq, entropy });
    }
    Ok(w2_sq / entropy)
}

/// `T / T_SL`, at least one for any admissible path.
pub fn inefficiency(horizon: f64, t_sl: f64) -> Result<f64> {
    if t_sl.is_nan() || t_sl <= 0.0 {
        return Err(Error::NonPositiveSpeedLimit { t_sl });
    }
    Ok(horizon / t_sl)
}

/// Ingredients of the free-energy entropy formula for an Ornstein–Uhlenbeck
/// process relaxing from a Gaussian to the Gibbs measure of its potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsEndpoints {
    /// `ln ∫ e^{−βV}`.
    pub log_z_final: f64,
    /// `ln ∫ e^{−βV₀}` where `e^{−βV₀}/Z₀` is the initial Gaussian.
    pub log_z_initial: f64,
    /// `⟨V − V₀⟩` under the initial law.
    pub mean_initial_loss: f64,
}

pub fn ou_gibbs_endpoints(
    pot: &QuadraticPotential,
    init: &GaussianMeasure,
    beta_inv: f64,
) -> Result<GibbsEndpoints> {
    check_same_dim(pot.dim(), init.dim())?;
    if !(beta_inv.is_finite() && beta_inv > 0.0) {
        return Err(Error::invalid("beta_inv", "must be finite and > 0"));
    }
    if pot.lambda_min() <= 0.0 {
        return Err(Error::SingularPotential {
            eigenvalue: pot.lambda_min(),
        });
    }
    let two_pi = 2.0 * core::f64::consts::PI;
    let beta = 1.0 / beta_inv;
    let d = pot.dim() as f64;

    let bq = pot.eigenvectors().transpose() * pot.b();
    let quad = kahan_sum(
        bq.iter()
            .zip(pot.eigenvalues().iter())
            .map(|(b, l)| b * b / l),
    );
    let log_det = kahan_sum(
        pot.eigenvalues()
            .iter()
            .map(|l| (two_pi * beta_inv / l).ln()),
    );
    let log_z_final = 0.5 * log_det + beta * (0.5 * quad - pot.c());

    let chol =
        Cholesky::new(init.covariance().clone()).ok_or(Error::SingularCovariance { time: 0.0 })?;
    let log_det0 = 2.0 * kahan_sum(chol.l_dirty().diagonal().iter().map(|v| v.ln()));
    let log_z_initial = 0.5 * (d * two_pi.ln() + log_det0);

    // ⟨V⟩ = V(μ₀) + ½ Tr(A Σ₀)
    let mean_v = pot.value(init.mean()) + 0.5 * (pot.a().component_mul(init.covariance())).sum();
    Ok(GibbsEndpoints {
        log_z_final,
        log_z_initial,
        mean_initial_loss: mean_v - 0.5 * d * beta_inv,
    })
}

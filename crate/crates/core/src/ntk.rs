//! Closed-form gradient-flow dynamics of a linearized model in its kernel
//! eigenbasis.
//!
//! Each mode relaxes independently, `Δ_k(t) = e^{−λ_k t} Δ_k(0)`, so every
//! quantity here is an exact finite sum over modes. Sums are compensated.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::linalg::KahanSum;
use crate::quad::{log_simpson, simpson};
use crate::{Error, Result, SpectralModel};

/// Default panel count for the arc-length quadrature.
pub const DEFAULT_N_QUAD: usize = 4096;
/// Panels on the uniform head `[0, 0.1/λ_max]` of the arc-length quadrature.
pub const HEAD_PANELS: usize = 256;

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", "must be finite and >= 0"));
    }
    Ok(())
}

fn mode_sum<F: Fn(f64, f64) -> f64>(model: &SpectralModel, f: F) -> f64 {
    let mut acc = KahanSum::new();
    for (l, r) in model.modes() {
        acc.add(f(l, r));
    }
    acc.value()
}

/// `Δ_k(t)` with the non-negative root of `Δ_k(0)²` as initial sign.
pub fn residue_at(model: &SpectralModel, t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    Ok(model
        .modes()
        .map(|(l, r)| (-l * t).exp() * r.sqrt())
        .collect())
}

/// `Σ_k Δ_k² (1 − e^{−λ_k t})² / λ_k`, the squared weight displacement.
pub fn displacement_sq(model: &SpectralModel, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(mode_sum(model, |l, r| {
        let g = (-l * t).exp_m1();
        r * g * g / l
    }))
}

/// `½ Σ_k Δ_k² (1 − e^{−2λ_k t})`, the drop of the half squared error.
pub fn loss_drop(model: &SpectralModel, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(0.5 * mode_sum(model, |l, r| -r * (-2.0 * l * t).exp_m1()))
}

/// `T_SL(t) / t = (2/t) Σ λ⁻¹(1 − e^{−λt})²Δ² / Σ Δ²(1 − e^{−2λt})`.
pub fn inefficiency_ratio(model: &SpectralModel, t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid("t", "must be finite and > 0"));
    }
    if model.residues_sq().iter().all(|&r| r == 0.0) {
        return Err(Error::ZeroResidues);
    }
    let num = displacement_sq(model, t)?;
    let den = 2.0 * loss_drop(model, t)?;
    Ok(2.0 / t * num / den)
}

/// Weight-space speed `‖θ̇(s)‖ = (Σ λ_k e^{−2λ_k s} Δ_k²)^{1/2}`.
pub fn speed(model: &SpectralModel, s: f64) -> f64 {
    mode_sum(model, |l, r| l * (-2.0 * l * s).exp() * r).sqrt()
}

/// Arc length `l_γ(t) = ∫₀ᵗ ‖θ̇‖ ds` of the gradient-flow path.
///
/// Simpson on a uniform head `[0, 0.1/λ_max]` with [`HEAD_PANELS`] panels,
/// then `n_quad` log-spaced panels up to `t`.
pub fn path_length_gamma(model: &SpectralModel, t: f64, n_quad: usize) -> Result<f64> {
    Ok(path_length_gamma_series(model, &[t], n_quad)?[0])
}

/// [`path_length_gamma`] at every point of an increasing grid, sharing the
/// quadrature between points. The `n_quad` tail panels are spread over the
/// log-spaced segments in proportion to their logarithmic width.
pub fn path_length_gamma_series(
    model: &SpectralModel,
    ts: &[f64],
    n_quad: usize,
) -> Result<Vec<f64>> {
    for &t in ts {
        check_time(t)?;
    }
    if ts.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("ts", "must be non-decreasing"));
    }
    if n_quad < 2 {
        return Err(Error::invalid("n_quad", "must be >= 2"));
    }
    let Some(&t_max) = ts.last() else {
        return Ok(Vec::new());
    };
    let knee = (0.1 / model.lambda_max()).min(t_max);
    let f = |s: f64| speed(model, s);
    let log_span = if t_max > knee {
        (t_max / knee).ln()
    } else {
        0.0
    };

    let mut out = Vec::with_capacity(ts.len());
    let mut acc = KahanSum::new();
    let mut reached = 0.0;
    for &t in ts {
        if t <= knee {
            // inside the uniform head: integrate directly from the origin
            out.push(simpson(f, 0.0, t, HEAD_PANELS));
            continue;
        }
        if reached < knee {
            acc.add(simpson(f, 0.0, knee, HEAD_PANELS));
            reached = knee;
        }
        if t > reached {
            let share = (t / reached).ln() / log_span;
            let panels = ((n_quad as f64 * share).ceil() as usize).max(16);
            acc.add(log_simpson(f, reached, t, panels));
            reached = t;
        }
        out.push(acc.value());
    }
    Ok(out)
}

/// Length of the straight path, `l_geo = √W2`.
pub fn path_length_geo(model: &SpectralModel, t: f64) -> Result<f64> {
    Ok(displacement_sq(model, t)?.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `0 < κ ≤ 1`: `T_SL ∝ T`.
    Optimal,
    /// `−1 < κ < 0`: entropy saturates and `T_SL` grows sublinearly.
    Suboptimal,
    /// `κ ∈ {0, −1}`: logarithmic corrections, no pure power law.
    Boundary,
    /// `κ > 1` or `κ < −1`.
    OutOfDomain,
}

/// Large-`T` power-law exponents for `λ_k ∝ k^{−α}`, `Δ_k² ∝ k^{−δ}`, with
/// `κ = (1 − δ)/α`. Exponents are `None` outside the two power-law regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPrediction {
    pub kappa: f64,
    pub regime: Regime,
    pub w2_exponent: Option<f64>,
    pub entropy_exponent: Option<f64>,
    pub tsl_exponent: Option<f64>,
    pub length_exponent: Option<f64>,
}

/// Tolerance for classifying `κ` onto a regime boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

pub fn predicted_exponents(alpha: f64, delta: f64) -> Result<ScalingPrediction> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("alpha", "must be finite and > 0"));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::invalid("delta", "must be finite and >= 0"));
    }
    let kappa = (1.0 - delta) / alpha;
    let regime = if kappa.abs() <= BOUNDARY_TOL || (kappa + 1.0).abs() <= BOUNDARY_TOL {
        Regime::Boundary
    } else if kappa > 0.0 && kappa <= 1.0 + BOUNDARY_TOL {
        Regime::Optimal
    } else if kappa < 0.0 && kappa > -1.0 {
        Regime::Suboptimal
    } else {
        Regime::OutOfDomain
    };
    let (entropy, tsl) = match regime {
        Regime::Optimal => (kappa, 1.0),
        Regime::Suboptimal => (0.0, 1.0 + kappa),
        _ => {
            return Ok(ScalingPrediction {
                kappa,
                regime,
                w2_exponent: None,
                entropy_exponent: None,
                tsl_exponent: None,
                length_exponent: None,
            })
        }
    };
    Ok(ScalingPrediction {
        kappa,
        regime,
        w2_exponent: Some(kappa + 1.0),
        entropy_exponent: Some(entropy),
        tsl_exponent: Some(tsl),
        length_exponent: Some(0.5 * (kappa + 1.0)),
    })
}

/// Least-squares slope of `ln y` against `ln t`.
pub fn fit_loglog_slope(ts: &[f64], ys: &[f64]) -> Result<f64> {
    if ts.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: ts.len(),
            found: ys.len(),
        });
    }
    if ts.len() < 3 {
        return Err(Error::invalid("ts", "need at least 3 points"));
    }
    if ts.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid("ys", "all values must be finite and > 0"));
    }
    let n = ts.len() as f64;
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ls.iter().sum::<f64>() / n;
    let mut sxy = KahanSum::new();
    let mut sxx = KahanSum::new();
    for (x, y) in xs.iter().zip(&ls) {
        sxy.add((x - mx) * (y - my));
        sxx.add((x - mx) * (x - mx));
    }
    if sxx.value() == 0.0 {
        return Err(Error::invalid("ts", "need at least two distinct times"));
    }
    Ok(sxy.value() / sxx.value())
}

//! Marchenko–Pastur law of the eigenvalues of `XXᵀ/n` for an i.i.d.
//! standard-normal `d × n` design with `d/n → γ`.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::linalg::KahanSum;
use crate::quad::GaussLegendre;
use crate::{Error, Result};

/// Default Gauss–Legendre node count.
pub const DEFAULT_NODES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpSupport {
    /// `(1 − √γ)²`
    pub gamma_minus: f64,
    /// `(1 + √γ)²`
    pub gamma_plus: f64,
    /// Mass of the atom at zero, `max(0, 1 − 1/γ)`.
    pub atom_weight: f64,
}

impl MpSupport {
    pub fn new(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let r = gamma.sqrt();
        Ok(Self {
            gamma_minus: (1.0 - r) * (1.0 - r),
            gamma_plus: (1.0 + r) * (1.0 + r),
            atom_weight: (1.0 - 1.0 / gamma).max(0.0),
        })
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid("gamma", "must be finite and > 0"));
    }
    Ok(())
}

/// Density of the continuous part, `√((γ₊ − x)(x − γ₋)) / (2πγx)` on the
/// support and zero elsewhere.
pub fn mp_density(x: f64, gamma: f64) -> Result<f64> {
    let s = MpSupport::new(gamma)?;
    if !(x > s.gamma_minus && x < s.gamma_plus) || x <= 0.0 {
        return Ok(0.0);
    }
    Ok(((s.gamma_plus - x) * (x - s.gamma_minus)).sqrt() / (2.0 * PI * gamma * x))
}

/// Quadrature rule for `∫ f dρ`.
///
/// The continuous part is mapped by `x = γ₋ + 2h cos²(θ/2)`, `h = (γ₊ − γ₋)/2`,
/// which absorbs both square-root edges so that `dρ = h² sin²θ / (2πγx) dθ`
/// is smooth on `(0, π)`; Gauss–Legendre then converges spectrally.
#[derive(Debug, Clone)]
pub struct MarchenkoPastur {
    gamma: f64,
    support: MpSupport,
    points: Vec<(f64, f64)>,
}

impl MarchenkoPastur {
    pub fn new(gamma: f64) -> Result<Self> {
        Self::with_nodes(gamma, DEFAULT_NODES)
    }

    pub fn with_nodes(gamma: f64, nodes: usize) -> Result<Self> {
        let support = MpSupport::new(gamma)?;
        if nodes < 1 {
            return Err(Error::invalid("nodes", "must be >= 1"));
        }
        let h = 0.5 * (support.gamma_plus - support.gamma_minus);
        let gl = GaussLegendre::new(nodes);
        let points = gl
            .mapped(0.0, PI)
            .map(|(theta, w)| {
                let (sh, ch) = (0.5 * theta).sin_cos();
                let x = support.gamma_minus + 2.0 * h * ch * ch;
                let sin_sq = 4.0 * sh * sh * ch * ch;
                (x, w * h * h * sin_sq / (2.0 * PI * gamma * x))
            })
            .collect();
        Ok(Self {
            gamma,
            support,
            points,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn support(&self) -> MpSupport {
        self.support
    }

    /// `∫ f dρ`, including `(1 − 1/γ) f(0)` when `γ > 1`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<f64> {
        let mut acc = KahanSum::new();
        for &(x, w) in &self.points {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { at: x });
            }
            acc.add(w * v);
        }
        if self.support.atom_weight > 0.0 {
            let v = f(0.0);
            if !v.is_finite() {
                return Err(Error::NonFinite { at: 0.0 });
            }
            acc.add(self.support.atom_weight * v);
        }
        Ok(acc.value())
    }
}

/// `∫ f dρ` with the default rule.
pub fn mp_integral<F: FnMut(f64) -> f64>(f: F, gamma: f64) -> Result<f64> {
    MarchenkoPastur::new(gamma)?.integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn support_and_density() {
        let s = MpSupport::new(4.0).unwrap();
        assert_eq!(
            (s.gamma_minus, s.gamma_plus, s.atom_weight),
            (1.0, 9.0, 0.75)
        );
        assert_eq!(MpSupport::new(0.25).unwrap().atom_weight, 0.0);
        assert_eq!(mp_density(0.5, 4.0).unwrap(), 0.0);
        assert_eq!(mp_density(10.0, 4.0).unwrap(), 0.0);
        assert_relative_eq!(
            mp_density(2.0, 1.0).unwrap(),
            1.0 / (2.0 * PI),
            epsilon = 1e-15
        );
        assert_relative_eq!(mp_density(2.0, 1.0).unwrap(), 0.1592, epsilon = 1e-4);
        assert!(mp_density(1.0, 0.0).is_err());
    }

    #[test]
    fn moments() {
        for gamma in [1e-3, 0.25, 0.5, 1.0, 2.0, 4.0, 1e3] {
            let mp = MarchenkoPastur::new(gamma).unwrap();
            assert!(
                (mp.integrate(|_| 1.0).unwrap() - 1.0).abs() < 1e-10,
                "{gamma}"
            );
            assert!(
                (mp.integrate(|s| s).unwrap() - 1.0).abs() < 1e-10,
                "{gamma}"
            );
            assert!(
                (mp.integrate(|s| s * s).unwrap() - (1.0 + gamma)).abs() < 1e-9 * (1.0 + gamma)
            );
        }
    }

    #[test]
    fn continuous_mass_matches_density() {
        // independent check: plain Simpson on the density itself, away from
        // the 1/√ edges
        for gamma in [0.25, 4.0] {
            let s = MpSupport::new(gamma).unwrap();
            let mass = crate::quad::simpson(
                |x| mp_density(x, gamma).unwrap(),
                s.gamma_minus,
                s.gamma_plus,
                200_000,
            );
            assert!(
                (mass - (1.0f64).min(1.0 / gamma)).abs() < 1e-6,
                "{gamma}: {mass}"
            );
        }
    }

    #[test]
    fn rejects_non_finite_integrand() {
        assert!(matches!(
            mp_integral(|s| 1.0 / s, 2.0),
            Err(Error::NonFinite { at }) if at == 0.0
        ));
    }
}

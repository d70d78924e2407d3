//! Bayesian ridge regression: exact speed limit between the prior
//! `N(0, (λd)⁻¹I)` and the posterior, and its high-dimensional limit under
//! the Marchenko–Pastur law.
//!
//! With design `X` (`d × n`), `c = λ/β` and `c_n = c·d`, the posterior is
//! `N(Σ_T X y, β⁻¹Σ_T)` with `Σ_T = (XXᵀ + c_n I)⁻¹`. Everything below is
//! evaluated in the eigenbasis of `XXᵀ`, computed once per problem.

pub mod mp;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{kahan_sum, sym_eigen, KahanSum};
use crate::{thermo, Error, GaussianMeasure, Result, SpeedLimitReport};
pub use mp::{mp_density, mp_integral, MarchenkoPastur, MpSupport};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn positive(field: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(field, "must be finite and > 0"));
    }
    Ok(())
}

/// `u − ln(1 + u)` without cancellation for small `u`.
fn u_minus_log1p(u: f64) -> f64 {
    if u.abs() < 1e-2 {
        // alternating series Σ_{k≥2} (−u)^k / k
        let mut term = u * u;
        let mut acc = 0.0;
        for k in 2..12 {
            acc += term / k as f64;
            term *= -u;
        }
        acc
    } else {
        u - u.ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinRegProblem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    lambda: f64,
    beta: f64,
    alpha: f64,
    teacher: Option<DVector<f64>>,
    /// Eigenvalues of `XXᵀ`, clamped at zero.
    gram_eigenvalues: DVector<f64>,
    gram_eigenvectors: DMatrix<f64>,
    /// `Vᵀ X y` in the same basis.
    projected: DVector<f64>,
}

impl LinRegProblem {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        lambda: f64,
        beta: f64,
        alpha: f64,
    ) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Empty);
        }
        if y.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: y.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("x", "design and targets must be finite"));
        }
        positive("lambda", lambda)?;
        positive("beta", beta)?;
        positive("alpha", alpha)?;
        let gram = &x * x.transpose();
        let (values, vectors) = sym_eigen(gram);
        let projected = vectors.transpose() * (&x * &y);
        Ok(Self {
            x,
            y,
            lambda,
            beta,
            alpha,
            teacher: None,
            gram_eigenvalues: values.map(|v| v.max(0.0)),
            gram_eigenvectors: vectors,
            projected,
        })
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Teacher weights when the targets were generated by
    /// [`generate_teacher_problem`].
    pub fn teacher(&self) -> Option<&DVector<f64>> {
        self.teacher.as_ref()
    }

    /// `c_n = λd/β`.
    pub fn ridge(&self) -> f64 {
        self.lambda * self.d() as f64 / self.beta
    }

    pub fn gram_eigenvalues(&self) -> &DVector<f64> {
        &self.gram_eigenvalues
    }

    /// Eigenvalues `1/(w_i + c_n)` of `Σ_T`.
    fn sigma(&self) -> DVector<f64> {
        let cn = self.ridge();
        self.gram_eigenvalues.map(|w| 1.0 / (w + cn))
    }

    /// `Σ_T` itself.
    pub fn sigma_t(&self) -> DMatrix<f64> {
        let v = &self.gram_eigenvectors;
        v * DMatrix::from_diagonal(&self.sigma()) * v.transpose()
    }

    /// The prior `N(0, (λd)⁻¹ I)`.
    pub fn prior(&self) -> GaussianMeasure {
        let d = self.d();
        GaussianMeasure::from_parts(
            DVector::zeros(d),
            DMatrix::identity(d, d) / (self.lambda * d as f64),
        )
    }
}

/// Teacher–student data: `X` i.i.d. standard normal, `θ* ~ N(0, (α/d) I)`,
/// noiseless targets `y = Xᵀθ*`.
pub fn generate_teacher_problem(
    d: usize,
    n: usize,
    lambda: f64,
    beta: f64,
    alpha: f64,
    seed: u64,
) -> Result<LinRegProblem> {
    if d == 0 {
        return Err(Error::invalid("d", "must be >= 1"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    positive("alpha", alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let scale = (alpha / d as f64).sqrt();
    let teacher = DVector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let y = x.transpose() * &teacher;
    let mut p = LinRegProblem::new(x, y, lambda, beta, alpha)?;
    p.teacher = Some(teacher);
    Ok(p)
}

/// Posterior `N(Σ_T X y, β⁻¹ Σ_T)`.
pub fn posterior(p: &LinRegProblem) -> GaussianMeasure {
    let sigma = p.sigma();
    let v = &p.gram_eigenvectors;
    let mean = v * sigma.component_mul(&p.projected);
    let cov = v * DMatrix::from_diagonal(&(sigma / p.beta)) * v.transpose();
    GaussianMeasure::from_parts(mean, cov)
}

/// `ln Z_0 = (d/2) ln(2π/(λd))`.
pub fn log_partition_init(lambda: f64, d: usize) -> Result<f64> {
    positive("lambda", lambda)?;
    if d == 0 {
        return Err(Error::invalid("d", "must be >= 1"));
    }
    let d = d as f64;
    Ok(0.5 * d * (LN_2PI - (lambda * d).ln()))
}

/// `ln Z_T = ½(ln|Σ_T| + d ln(2π/β)) − (β/2)‖y‖² + (β/2) yᵀXᵀΣ_T X y`.
pub fn log_partition_final(p: &LinRegProblem) -> f64 {
    let sigma = p.sigma();
    let log_det = kahan_sum(sigma.iter().map(|s| s.ln()));
    let fit = kahan_sum(sigma.iter().zip(p.projected.iter()).map(|(s, z)| s * z * z));
    let d = p.d() as f64;
    0.5 * (log_det + d * (LN_2PI - p.beta.ln())) - 0.5 * p.beta * p.y.norm_squared()
        + 0.5 * p.beta * fit
}

/// `⟨L(θ₀)⟩ = ½‖y‖² + Tr(XXᵀ)/(2λd)` over the prior.
pub fn mean_initial_loss(p: &LinRegProblem) -> f64 {
    0.5 * p.y.norm_squared() + p.x.norm_squared() / (2.0 * p.lambda * p.d() as f64)
}

/// Entropy production per sample, `(nβ)⁻¹R`.
///
/// Substituting the partition functions, `½‖y‖²` cancels and the remainder is
/// a sum of non-negative terms,
/// `β⁻¹R = (1/2β) Σ_i [u_i − ln(1 + u_i)] + ½ Σ_i z_i²/(w_i + c_n)`,
/// with `u_i = w_i/c_n`, `w_i` the eigenvalues of `XXᵀ` and `z = VᵀXy`.
pub fn entropy_linreg(p: &LinRegProblem) -> f64 {
    let cn = p.ridge();
    let mut log_part = KahanSum::new();
    let mut fit = KahanSum::new();
    for (w, z) in p.gram_eigenvalues.iter().zip(p.projected.iter()) {
        log_part.add(u_minus_log1p(w / cn));
        fit.add(z * z / (w + cn));
    }
    (log_part.value() / (2.0 * p.beta) + 0.5 * fit.value()) / p.n() as f64
}

/// `W2(p_0, p_T) = ‖μ_T‖² + Σ_i ((λd)^{−1/2} − (σ_i/β)^{1/2})²`, the
/// Gaussian cost between commuting covariances.
pub fn w2_linreg(p: &LinRegProblem) -> f64 {
    let sigma = p.sigma();
    let prior_sd = 1.0 / (p.lambda * p.d() as f64).sqrt();
    let mut acc = KahanSum::new();
    for (s, z) in sigma.iter().zip(p.projected.iter()) {
        let shift = s * z;
        let gap = prior_sd - (s / p.beta).sqrt();
        acc.add(shift * shift + gap * gap);
    }
    acc.value()
}

/// Speed limit of the prior-to-posterior transport, with entropy normalized
/// per sample (`entropy_scale = n`).
pub fn tsl_finite(p: &LinRegProblem) -> Result<SpeedLimitReport> {
    let w2 = w2_linreg(p);
    let entropy = entropy_linreg(p);
    thermo::speed_limit(w2, entropy)?;
    Ok(SpeedLimitReport::assemble(None, w2, entropy, None).with_entropy_scale(p.n() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpParams {
    pub gamma: f64,
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl MpParams {
    pub fn validate(&self) -> Result<()> {
        positive("gamma", self.gamma)?;
        positive("lambda", self.lambda)?;
        positive("beta", self.beta)?;
        positive("alpha", self.alpha)
    }
}

/// Separate pieces of the asymptotic speed limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticTerms {
    /// `α ∫ s²/(cγ + s)² dρ`, the squared posterior mean.
    pub mean_shift: f64,
    /// `∫ ((λ + βs/γ)^{−1/2} − λ^{−1/2})² dρ`, the covariance mismatch.
    pub spread: f64,
    /// `(γ/2β) ∫ [u − ln(1 + u)] dρ` with `u = βs/(γλ)`.
    pub log_term: f64,
    /// `(α/2) ∫ s²/(s + cγ) dρ`, the fit term `yᵀXᵀΣ_T X y / 2n`.
    pub linear_term: f64,
}

impl AsymptoticTerms {
    pub fn w2(&self) -> f64 {
        self.mean_shift + self.spread
    }

    pub fn entropy(&self) -> f64 {
        self.log_term + self.linear_term
    }

    pub fn t_sl(&self) -> Result<f64> {
        let entropy = self.entropy();
        if entropy.is_nan() || entropy <= 0.0 {
            return Err(Error::NonPositiveEntropy {
                log_term: self.log_term,
                linear_term: self.linear_term,
            });
        }
        Ok(self.w2() / entropy)
    }
}

/// Deterministic limit of the prior/posterior costs as `d, n → ∞` with
/// `d/n → γ`, for teacher data with `‖θ*‖² → α`.
pub fn asymptotic_terms(mp: &MpParams, rule: &MarchenkoPastur) -> Result<AsymptoticTerms> {
    mp.validate()?;
    if rule.gamma() != mp.gamma {
        return Err(Error::invalid(
            "gamma",
            "quadrature rule built for a different gamma",
        ));
    }
    let MpParams {
        gamma,
        lambda,
        beta,
        alpha,
    } = *mp;
    let c = lambda / beta;
    let root_lambda = lambda.sqrt();

    let mean_shift = alpha
        * rule.integrate(|s| {
            let r = s / (c * gamma + s);
            r * r
        })?;
    let spread = rule.integrate(|s| {
        // (λ + x)^{−1/2} − λ^{−1/2} without cancellation
        let x = beta * s / gamma;
        let root = (lambda + x).sqrt();
        let diff = x / (root_lambda * root * (root_lambda + root));
        diff * diff
    })?;
    let log_term =
        gamma / (2.0 * beta) * rule.integrate(|s| u_minus_log1p(beta * s / (gamma * lambda)))?;
    let linear_term = 0.5 * alpha * rule.integrate(|s| s * s / (s + c * gamma))?;
    Ok(AsymptoticTerms {
        mean_shift,
        spread,
        log_term,
        linear_term,
    })
}

/// Asymptotic speed limit `W2 / ((nβ)⁻¹R)` under the Marchenko–Pastur law.
pub fn tsl_asymptotic(mp: &MpParams) -> Result<f64> {
    let rule = MarchenkoPastur::new(mp.gamma)?;
    asymptotic_terms(mp, &rule)?.t_sl()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    /// `β → ∞` at fixed `γ`.
    BetaInf,
    /// `β → 0`.
    BetaZero,
    /// `γ → 0`, many samples per parameter.
    NInf,
    /// `γ → ∞`, many parameters per sample.
    DInf,
}

/// Closed-form limits of [`tsl_asymptotic`].
///
/// As `β → ∞` only the continuous part of the spectrum moves, carrying mass
/// `min(1, 1/γ)`, which gives `2 min(1, 1/γ) / ∫s dρ`. As `γ → 0` the law
/// concentrates at one and the ratio tends to two. Both remaining limits
/// vanish.
pub fn tsl_limits(mp: &MpParams, which: Limit) -> Result<f64> {
    mp.validate()?;
    Ok(match which {
        Limit::BetaInf => {
            let first_moment = mp_integral(|s| s, mp.gamma)?;
            2.0 * (1.0f64).min(1.0 / mp.gamma) / first_moment
        }
        Limit::BetaZero | Limit::DInf => 0.0,
        Limit::NInf => 2.0,
    })
}

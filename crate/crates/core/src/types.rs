//! Domain types shared by every module. Constructors enforce the invariants
//! listed on each type; every value is immutable once built.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::linalg::{check_psd, kahan_sum, sym_eigen, symmetrize};
use crate::{thermo, Error, Result};

/// NTK eigenvalues `λ_k` (sorted non-increasing, all positive) paired with
/// squared initial residues `Δ_k(0)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
    residues_sq: Vec<f64>,
}

impl SpectralModel {
    pub fn new(eigenvalues: Vec<f64>, residues_sq: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Empty);
        }
        if eigenvalues.len() != residues_sq.len() {
            return Err(Error::DimensionMismatch {
                expected: eigenvalues.len(),
                found: residues_sq.len(),
            });
        }
        if let Some(bad) = eigenvalues.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(
                "eigenvalues",
                alloc::format!("must be finite and positive, found {bad}"),
            ));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid(
                "eigenvalues",
                "must be sorted non-increasing",
            ));
        }
        if let Some(bad) = residues_sq.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(
                "residues_sq",
                alloc::format!("must be finite and non-negative, found {bad}"),
            ));
        }
        Ok(Self {
            eigenvalues,
            residues_sq,
        })
    }

    /// One mode with eigenvalue `lambda` and squared residue `residue_sq`.
    pub fn single(lambda: f64, residue_sq: f64) -> Result<Self> {
        Self::new(alloc::vec![lambda], alloc::vec![residue_sq])
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn residues_sq(&self) -> &[f64] {
        &self.residues_sq
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `(λ_k, Δ_k²)` pairs in storage order.
    pub fn modes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.eigenvalues
            .iter()
            .copied()
            .zip(self.residues_sq.iter().copied())
    }

    /// The linearized least-squares potential whose gradient flow from the
    /// origin realizes this spectrum: `A = diag(λ)`, `b_k = √λ_k · |Δ_k(0)|`,
    /// `c = ½ Σ Δ_k²`. Returns the potential and the initial weights (zero).
    pub fn to_potential(&self) -> Result<(QuadraticPotential, DVector<f64>)> {
        let n = self.len();
        let b = DVector::from_iterator(n, self.modes().map(|(l, r)| l.sqrt() * r.sqrt()));
        let c = 0.5 * kahan_sum(self.residues_sq.iter().copied());
        let pot = QuadraticPotential::diagonal(&self.eigenvalues, b, c)?;
        Ok((pot, DVector::zeros(n)))
    }
}

/// Power-law spectrum `λ_k = Λ k^{-α}`, `Δ_k² = Δ² k^{-δ}` for
/// `k = first_mode ..= last_mode`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawSpec {
    /// Λ
    pub eigen_scale: f64,
    /// α
    pub eigen_decay: f64,
    /// Δ²
    pub residue_scale: f64,
    /// δ
    pub residue_decay: f64,
    pub first_mode: usize,
    pub last_mode: usize,
}

impl PowerLawSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eigen_scale.is_finite() && self.eigen_scale > 0.0) {
            return Err(Error::invalid("eigen_scale", "must be finite and > 0"));
        }
        if !(self.eigen_decay.is_finite() && self.eigen_decay > 0.0) {
            return Err(Error::invalid("eigen_decay", "must be finite and > 0"));
        }
        if !(self.residue_scale.is_finite() && self.residue_scale >= 0.0) {
            return Err(Error::invalid("residue_scale", "must be finite and >= 0"));
        }
        if !(self.residue_decay.is_finite() && self.residue_decay >= 0.0) {
            return Err(Error::invalid("residue_decay", "must be finite and >= 0"));
        }
        if self.first_mode < 1 {
            return Err(Error::invalid("first_mode", "must be >= 1"));
        }
        if self.last_mode < self.first_mode {
            return Err(Error::invalid("last_mode", "must be >= first_mode"));
        }
        Ok(())
    }
}

pub fn build_power_law_spectrum(spec: &PowerLawSpec) -> Result<SpectralModel> {
    spec.validate()?;
    let count = spec.last_mode - spec.first_mode + 1;
    let mut eigenvalues = Vec::with_capacity(count);
    let mut residues_sq = Vec::with_capacity(count);
    for k in spec.first_mode..=spec.last_mode {
        let k = k as f64;
        eigenvalues.push(spec.eigen_scale * k.powf(-spec.eigen_decay));
        residues_sq.push(spec.residue_scale * k.powf(-spec.residue_decay));
    }
    SpectralModel::new(eigenvalues, residues_sq)
}

/// Multivariate normal law. The covariance is symmetric and PSD up to
/// round-off; a zero covariance is a Dirac mass.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        validate_gaussian(mean, covariance)
    }

    pub fn dirac(mean: DVector<f64>) -> Self {
        let d = mean.len();
        Self {
            mean,
            covariance: DMatrix::zeros(d, d),
        }
    }

    pub fn isotropic(mean: DVector<f64>, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::invalid("variance", "must be finite and >= 0"));
        }
        let d = mean.len();
        Ok(Self {
            mean,
            covariance: DMatrix::from_diagonal_element(d, d, variance),
        })
    }

    /// For values that are symmetric PSD by construction.
    pub(crate) fn from_parts(mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        Self { mean, covariance }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

/// Symmetrizes the covariance and verifies it is PSD via eigendecomposition.
pub fn validate_gaussian(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<GaussianMeasure> {
    if covariance.nrows() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            found: covariance.nrows(),
        });
    }
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("mean", "entries must be finite"));
    }
    let covariance = symmetrize(&covariance)?;
    let (values, _) = sym_eigen(covariance.clone());
    check_psd(&values)?;
    Ok(GaussianMeasure { mean, covariance })
}

/// `V(θ) = ½ θᵀAθ − bᵀθ + c` with `A` symmetric PSD. The eigendecomposition
/// of `A` is computed once at construction.
#[derive(Debug, Clone)]
pub struct QuadraticPotential {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl QuadraticPotential {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: b.len(),
                found: a.nrows(),
            });
        }
        if b.iter().any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::invalid("b", "entries must be finite"));
        }
        let a = symmetrize(&a)?;
        let (eigenvalues, eigenvectors) = sym_eigen(a.clone());
        check_psd(&eigenvalues)?;
        Ok(Self {
            a,
            b,
            c,
            eigenvalues,
            eigenvectors,
        })
    }

    /// `A = diag(diag)`; the eigenbasis is the standard basis.
    pub fn diagonal(diag: &[f64], b: DVector<f64>, c: f64) -> Result<Self> {
        if diag.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: b.len(),
                found: diag.len(),
            });
        }
        if let Some(bad) = diag.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(
                "A",
                alloc::format!("diagonal entries must be finite and >= 0, found {bad}"),
            ));
        }
        let values = DVector::from_column_slice(diag);
        let n = diag.len();
        Ok(Self {
            a: DMatrix::from_diagonal(&values),
            b,
            c,
            eigenvalues: values,
            eigenvectors: DMatrix::identity(n, n),
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.max().max(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.min()
    }

    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        self.loss(theta) + self.c
    }

    /// `V(θ) − c`.
    pub fn loss(&self, theta: &DVector<f64>) -> f64 {
        0.5 * theta.dot(&(&self.a * theta)) - self.b.dot(theta)
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.a * theta - &self.b
    }

    /// `A⁻¹b` when `A` is positive definite.
    pub fn minimizer(&self) -> Option<DVector<f64>> {
        let floor = 1e-14 * self.lambda_max();
        if self.lambda_max() == 0.0 || self.eigenvalues.iter().any(|&v| v <= floor) {
            return None;
        }
        let projected = self.eigenvectors.transpose() * &self.b;
        let scaled = projected.component_div(&self.eigenvalues);
        Some(&self.eigenvectors * scaled)
    }
}

/// Time-ordered checkpoints of a training run.
///
/// `grad_sq` holds `‖∇V‖²` at each checkpoint. `dissipation`, when present,
/// holds the running integral `∫_0^t ‖∇V‖² dt` accumulated at the integrator's
/// full step resolution, evaluated at each checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    weights: Vec<DVector<f64>>,
    losses: Vec<f64>,
    grad_sq: Option<Vec<f64>>,
    dissipation: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        weights: Vec<DVector<f64>>,
        losses: Vec<f64>,
        grad_sq: Option<Vec<f64>>,
    ) -> Result<Self> {
        let m = times.len();
        if m == 0 {
            return Err(Error::Empty);
        }
        if weights.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: weights.len(),
            });
        }
        if losses.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: losses.len(),
            });
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "times",
                "must be finite and strictly increasing",
            ));
        }
        let d = weights[0].len();
        if let Some(w) = weights.iter().find(|w| w.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: w.len(),
            });
        }
        if let Some(g) = &grad_sq {
            if g.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: g.len(),
                });
            }
            if g.iter().any(|v| v.is_nan() || *v < 0.0) {
                return Err(Error::invalid("grad_sq", "must be non-negative"));
            }
        }
        Ok(Self {
            times,
            weights,
            losses,
            grad_sq,
            dissipation: None,
        })
    }

    pub fn with_dissipation(mut self, dissipation: Vec<f64>) -> Result<Self> {
        if dissipation.len() != self.times.len() {
            return Err(Error::DimensionMismatch {
                expected: self.times.len(),
                found: dissipation.len(),
            });
        }
        self.dissipation = Some(dissipation);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn weights(&self) -> &[DVector<f64>] {
        &self.weights
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn grad_sq(&self) -> Option<&[f64]> {
        self.grad_sq.as_deref()
    }

    pub fn dissipation(&self) -> Option<&[f64]> {
        self.dissipation.as_deref()
    }

    pub fn first_weights(&self) -> &DVector<f64> {
        &self.weights[0]
    }

    pub fn last_weights(&self) -> &DVector<f64> {
        &self.weights[self.weights.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportFlags {
    /// Inefficiency below one; possible only for paths that are not
    /// gradient flows of a fixed potential.
    pub sub_unity: bool,
    /// Entropy was not positive while weights moved, so no bound exists.
    pub entropy_invalid: bool,
}

/// Speed-limit summary of one transport from an initial to a final law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedLimitReport {
    /// Elapsed time `T`; `None` for equilibrium (`T → ∞`) comparisons.
    pub horizon: Option<f64>,
    /// Squared Wasserstein-2 cost.
    pub w2_sq: f64,
    /// `β⁻¹R`, divided by `entropy_scale`.
    pub entropy: f64,
    /// Normalization applied to the entropy (1 unless stated otherwise).
    pub entropy_scale: f64,
    pub t_sl: Option<f64>,
    /// `T / T_SL`.
    pub inefficiency: Option<f64>,
    /// Arc length `l_γ` travelled, when known.
    pub path_length: Option<f64>,
    /// `l_geo = √W2`.
    pub geo_length: f64,
    pub length_ratio: Option<f64>,
    pub flags: ReportFlags,
}

impl SpeedLimitReport {
    /// Derives `t_sl`, inefficiency, geodesic length and length ratio from the
    /// primary quantities.
    pub fn assemble(
        horizon: Option<f64>,
        w2_sq: f64,
        entropy: f64,
        path_length: Option<f64>,
    ) -> Self {
        let mut flags = ReportFlags::default();
        let t_sl = match thermo::speed_limit(w2_sq, entropy) {
            Ok(t) => Some(t),
            Err(_) => {
                flags.entropy_invalid = true;
                None
            }
        };
        let inefficiency = match (horizon, t_sl) {
            (Some(h), Some(t)) if t > 0.0 => Some(h / t),
            _ => None,
        };
        if let Some(ratio) = inefficiency {
            flags.sub_unity = ratio < 1.0;
        }
        let geo_length = w2_sq.max(0.0).sqrt();
        let length_ratio = match path_length {
            // one rounding fewer than l / √W2
            Some(l) if geo_length > 0.0 => Some((l * (l / w2_sq)).sqrt()),
            _ => None,
        };
        Self {
            horizon,
            w2_sq,
            entropy,
            entropy_scale: 1.0,
            t_sl,
            inefficiency,
            path_length,
            geo_length,
            length_ratio,
            flags,
        }
    }

    pub fn with_entropy_scale(mut self, scale: f64) -> Self {
        self.entropy_scale = scale;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn spec(l: f64, a: f64, r: f64, d: f64, k0: usize, n: usize) -> PowerLawSpec {
        PowerLawSpec {
            eigen_scale: l,
            eigen_decay: a,
            residue_scale: r,
            residue_decay: d,
            first_mode: k0,
            last_mode: n,
        }
    }

    #[test]
    fn power_law_three_modes() {
        let m = build_power_law_spectrum(&spec(1.0, 1.0, 1.0, 0.0, 1, 3)).unwrap();
        assert_eq!(m.eigenvalues(), &[1.0, 0.5, 1.0 / 3.0]);
        assert_eq!(m.residues_sq(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn power_law_single_mode() {
        let m = build_power_law_spectrum(&spec(1.0, 0.5, 1.0, 0.0, 1, 1)).unwrap();
        assert_eq!(m.eigenvalues(), &[1.0]);
        assert_eq!(m.residues_sq(), &[1.0]);
    }

    #[test]
    fn power_law_scaled() {
        let m = build_power_law_spectrum(&spec(2.0, 1.0, 3.0, 2.0, 1, 2)).unwrap();
        assert_eq!(m.eigenvalues(), &[2.0, 1.0]);
        assert_eq!(m.residues_sq(), &[3.0, 0.75]);
    }

    #[test]
    fn power_law_rejects_bad_fields() {
        let err = build_power_law_spectrum(&spec(1.0, 0.0, 1.0, 0.0, 1, 3)).unwrap_err();
        assert!(matches!(
            err,
            Error::Invalid {
                field: "eigen_decay",
                ..
            }
        ));
        let err = build_power_law_spectrum(&spec(-1.0, 1.0, 1.0, 0.0, 1, 3)).unwrap_err();
        assert!(matches!(
            err,
            Error::Invalid {
                field: "eigen_scale",
                ..
            }
        ));
        let err = build_power_law_spectrum(&spec(1.0, 1.0, 1.0, 0.0, 0, 3)).unwrap_err();
        assert!(matches!(
            err,
            Error::Invalid {
                field: "first_mode",
                ..
            }
        ));
        let err = build_power_law_spectrum(&spec(1.0, 1.0, 1.0, -1.0, 1, 3)).unwrap_err();
        assert!(matches!(
            err,
            Error::Invalid {
                field: "residue_decay",
                ..
            }
        ));
    }

    #[test]
    fn spectral_model_rejects_unsorted() {
        assert!(SpectralModel::new(vec![1.0, 2.0], vec![1.0, 1.0]).is_err());
        assert!(SpectralModel::new(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(SpectralModel::new(vec![1.0], vec![-1.0]).is_err());
        assert!(SpectralModel::new(vec![1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn gaussian_identity_accepted() {
        let g = validate_gaussian(DVector::zeros(2), DMatrix::identity(2, 2));
        assert!(g.is_ok());
    }

    #[test]
    fn gaussian_correlated_accepted() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(validate_gaussian(DVector::zeros(2), cov).is_ok());
    }

    #[test]
    fn gaussian_indefinite_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match validate_gaussian(DVector::zeros(2), cov) {
            Err(Error::NotPsd { eigenvalue }) => assert!((eigenvalue + 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gaussian_symmetrizes_round_off() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-15, 1.0]);
        let g = validate_gaussian(DVector::zeros(2), cov).unwrap();
        assert_eq!(g.covariance()[(0, 1)], g.covariance()[(1, 0)]);
    }

    #[test]
    fn trajectory_rejects_non_increasing_times() {
        let w = vec![DVector::zeros(1), DVector::zeros(1)];
        assert!(Trajectory::new(vec![0.0, 0.0], w.clone(), vec![0.0, 0.0], None).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0], w, vec![0.0], None).is_err());
    }

    #[test]
    fn report_derived_fields() {
        let r = SpeedLimitReport::assemble(Some(2.0), 2.0, 1.5, Some(2.0));
        assert!((r.t_sl.unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((r.inefficiency.unwrap() - 1.5).abs() < 1e-15);
        assert!((r.geo_length - 2f64.sqrt()).abs() < 1e-15);
        assert!(!r.flags.sub_unity);
        let r = SpeedLimitReport::assemble(Some(1.0), 1.0, 0.0, None);
        assert!(r.t_sl.is_none() && r.flags.entropy_invalid);
    }

    proptest! {
        #[test]
        fn power_law_constructor_invariants(
            scale in 1e-3f64..1e3,
            alpha in 1e-3f64..4.0,
            rscale in 0.0f64..10.0,
            delta in 0.0f64..4.0,
            k0 in 1usize..20,
            extra in 0usize..200,
        ) {
            let m = build_power_law_spectrum(&spec(scale, alpha, rscale, delta, k0, k0 + extra)).unwrap();
            prop_assert_eq!(m.len(), extra + 1);
            prop_assert!(m.eigenvalues().iter().all(|&v| v > 0.0));
            prop_assert!(m.eigenvalues().windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(m.residues_sq().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn validated_gaussians_are_symmetric_psd(
            entries in proptest::collection::vec(-3.0f64..3.0, 9),
            shift in -2.0f64..4.0,
        ) {
            let m = DMatrix::from_row_slice(3, 3, &entries);
            let cov = &m * m.transpose() + DMatrix::identity(3, 3) * shift;
            match validate_gaussian(DVector::zeros(3), cov) {
                Ok(g) => {
                    let c = g.covariance();
                    prop_assert_eq!(c.clone(), c.transpose());
                    let (values, _) = sym_eigen(c.clone());
                    prop_assert!(values.min() >= -1e-12 * values.max().max(0.0));
                }
                Err(Error::NotPsd { eigenvalue }) => prop_assert!(eigenvalue < 0.0),
                Err(e) => prop_assert!(false, "unexpected {:?}", e),
            }
        }
    }
}

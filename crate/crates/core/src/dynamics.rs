//! Time integration of gradient flow and Langevin dynamics on quadratic
//! potentials, and exact Gaussian moment propagation (Ornstein–Uhlenbeck).
//!
//! The learning rate is fixed to one inside every integrator; a different
//! rate is equivalent to rescaling time.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{sym_eigen, KahanSum, SQRT_CLAMP_TOL};
use crate::{Error, GaussianMeasure, QuadraticPotential, Result, Trajectory};

/// Default cap on stored checkpoints (endpoints are always kept).
pub const MAX_CHECKPOINTS: usize = 10_000;
/// Explicit stepping requires `dt · λ_max` below this.
pub const STABILITY_LIMIT: f64 = 2.0;
/// Above this `dt · λ_max` the discrete path drifts visibly from the flow.
pub const STABILITY_WARNING: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub n_realizations: usize,
    /// Noise level `β⁻¹`; zero selects gradient flow.
    pub beta_inv: f64,
    pub max_checkpoints: usize,
}

impl IntegratorConfig {
    pub fn gradient_flow(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            seed: 0,
            n_realizations: 1,
            beta_inv: 0.0,
            max_checkpoints: MAX_CHECKPOINTS,
        }
    }

    pub fn langevin(
        dt: f64,
        horizon: f64,
        beta_inv: f64,
        seed: u64,
        n_realizations: usize,
    ) -> Self {
        Self {
            dt,
            horizon,
            seed,
            n_realizations,
            beta_inv,
            max_checkpoints: MAX_CHECKPOINTS,
        }
    }

    pub fn with_max_checkpoints(mut self, max_checkpoints: usize) -> Self {
        self.max_checkpoints = max_checkpoints;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be finite and > 0"));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::invalid("horizon", "must be finite and >= 0"));
        }
        if self.n_realizations < 1 {
            return Err(Error::invalid("n_realizations", "must be >= 1"));
        }
        if !(self.beta_inv.is_finite() && self.beta_inv >= 0.0) {
            return Err(Error::invalid("beta_inv", "must be finite and >= 0"));
        }
        if self.max_checkpoints < 1 {
            return Err(Error::invalid("max_checkpoints", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct StepPlan {
    steps: usize,
    h: f64,
    stride: usize,
}

impl StepPlan {
    fn new(cfg: &IntegratorConfig, lambda_max: f64) -> Result<Self> {
        cfg.validate()?;
        let steps = if cfg.horizon == 0.0 {
            0
        } else {
            (cfg.horizon / cfg.dt - 1e-9).ceil().max(1.0) as usize
        };
        let h = if steps == 0 {
            cfg.dt
        } else {
            cfg.horizon / steps as f64
        };
        let product = h * lambda_max;
        if product >= STABILITY_LIMIT {
            return Err(Error::Unstable { product });
        }
        if product > STABILITY_WARNING {
            log::warn!(
                "dt * lambda_max = {product:.3}; discrete path may depart from the continuous flow"
            );
        }
        let stride = steps.div_ceil(cfg.max_checkpoints).max(1);
        Ok(Self { steps, h, stride })
    }

    fn records(&self, step: usize) -> bool {
        step.is_multiple_of(self.stride) || step == self.steps
    }

    fn time(&self, step: usize) -> f64 {
        step as f64 * self.h
    }
}

struct Recorder {
    times: Vec<f64>,
    weights: Vec<DVector<f64>>,
    losses: Vec<f64>,
    grad_sq: Vec<f64>,
    dissipation: Vec<f64>,
}

impl Recorder {
    fn new() -> Self {
        Self {
            times: Vec::new(),
            weights: Vec::new(),
            losses: Vec::new(),
            grad_sq: Vec::new(),
            dissipation: Vec::new(),
        }
    }

    fn record(&mut self, pot: &QuadraticPotential, t: f64, theta: &DVector<f64>, dissipation: f64) {
        let grad = pot.gradient(theta);
        self.times.push(t);
        self.weights.push(theta.clone());
        self.losses.push(pot.loss(theta));
        self.grad_sq.push(grad.norm_squared());
        self.dissipation.push(dissipation);
    }

    fn finish(self, with_dissipation: bool) -> Result<Trajectory> {
        let traj = Trajectory::new(self.times, self.weights, self.losses, Some(self.grad_sq))?;
        if with_dissipation {
            traj.with_dissipation(self.dissipation)
        } else {
            Ok(traj)
        }
    }
}

/// `out = −∇V(x) = b − A x`.
#[inline]
fn force(out: &mut DVector<f64>, pot: &QuadraticPotential, x: &DVector<f64>) {
    out.gemv(-1.0, pot.a(), x, 0.0);
    *out += pot.b();
}

fn check_dim(pot: &QuadraticPotential, found: usize) -> Result<()> {
    if pot.dim() != found {
        return Err(Error::DimensionMismatch {
            expected: pot.dim(),
            found,
        });
    }
    Ok(())
}

/// Deterministic gradient flow `θ̇ = −∇V(θ)` by classical fourth-order
/// Runge–Kutta.
///
/// The running dissipation `∫‖∇V‖² dt` is integrated alongside the weights
/// with the same stage weights, so it carries fourth-order accuracy at every
/// step even when checkpoints are thinned.
pub fn simulate_gradient_flow(
    pot: &QuadraticPotential,
    theta0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if cfg.beta_inv != 0.0 {
        return Err(Error::NoisyGradientFlow {
            beta_inv: cfg.beta_inv,
        });
    }
    check_dim(pot, theta0.len())?;
    let plan = StepPlan::new(cfg, pot.lambda_max())?;
    let d = pot.dim();
    let h = plan.h;

    let mut theta = theta0.clone();
    let mut k1 = DVector::zeros(d);
    let mut k2 = DVector::zeros(d);
    let mut k3 = DVector::zeros(d);
    let mut k4 = DVector::zeros(d);
    let mut stage = DVector::zeros(d);
    let mut dissipation = KahanSum::new();

    let mut rec = Recorder::new();
    rec.record(pot, 0.0, &theta, 0.0);
    for step in 1..=plan.steps {
        force(&mut k1, pot, &theta);
        stage.copy_from(&theta);
        stage.axpy(0.5 * h, &k1, 1.0);
        force(&mut k2, pot, &stage);
        stage.copy_from(&theta);
        stage.axpy(0.5 * h, &k2, 1.0);
        force(&mut k3, pot, &stage);
        stage.copy_from(&theta);
        stage.axpy(h, &k3, 1.0);
        force(&mut k4, pot, &stage);

        dissipation.add(
            h / 6.0
                * (k1.norm_squared()
                    + 2.0 * k2.norm_squared()
                    + 2.0 * k3.norm_squared()
                    + k4.norm_squared()),
        );
        theta.axpy(h / 6.0, &k1, 1.0);
        theta.axpy(h / 3.0, &k2, 1.0);
        theta.axpy(h / 3.0, &k3, 1.0);
        theta.axpy(h / 6.0, &k4, 1.0);

        if plan.records(step) {
            rec.record(pot, plan.time(step), &theta, dissipation.value());
        }
    }
    rec.finish(true)
}

/// Euler–Maruyama sampler for `dθ = −∇V dt + √(2β⁻¹) dB`, drift evaluated at
/// the left end of each step. Realization `i` draws from the ChaCha stream
/// `i` of the configured seed, so realizations are independent of execution
/// order.
#[derive(Debug, Clone)]
pub struct LangevinSampler<'a> {
    pot: &'a QuadraticPotential,
    init_mean: DVector<f64>,
    init_factor: DMatrix<f64>,
    cfg: IntegratorConfig,
    plan: StepPlan,
}

impl<'a> LangevinSampler<'a> {
    pub fn new(
        pot: &'a QuadraticPotential,
        init: &GaussianMeasure,
        cfg: &IntegratorConfig,
    ) -> Result<Self> {
        if cfg.beta_inv == 0.0 {
            return Err(Error::NoiselessLangevin);
        }
        check_dim(pot, init.dim())?;
        let plan = StepPlan::new(cfg, pot.lambda_max())?;
        let (values, vectors) = sym_eigen(init.covariance().clone());
        let top = values.max().max(0.0);
        let roots = values.map(|v| {
            if v >= -SQRT_CLAMP_TOL * top {
                v.max(0.0).sqrt()
            } else {
                0.0
            }
        });
        let init_factor = vectors * DMatrix::from_diagonal(&roots);
        Ok(Self {
            pot,
            init_mean: init.mean().clone(),
            init_factor,
            cfg: *cfg,
            plan,
        })
    }

    fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index as u64);
        rng
    }

    fn run<F: FnMut(usize, &DVector<f64>)>(&self, index: usize, mut observe: F) -> DVector<f64> {
        let d = self.pot.dim();
        let mut rng = self.rng(index);
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut theta = &self.init_mean + &self.init_factor * z;
        let mut drift = DVector::zeros(d);
        let h = self.plan.h;
        let amplitude = (2.0 * self.cfg.beta_inv * h).sqrt();

        observe(0, &theta);
        for step in 1..=self.plan.steps {
            force(&mut drift, self.pot, &theta);
            theta.axpy(h, &drift, 1.0);
            for x in theta.iter_mut() {
                *x += amplitude * rng.sample::<f64, _>(StandardNormal);
            }
            if self.plan.records(step) {
                observe(step, &theta);
            }
        }
        theta
    }

    /// Full checkpointed path of realization `index`.
    pub fn realization(&self, index: usize) -> Result<Trajectory> {
        let mut rec = Recorder::new();
        self.run(index, |step, theta| {
            rec.record(self.pot, self.plan.time(step), theta, 0.0)
        });
        rec.finish(false)
    }

    /// Final state of realization `index`, without storing the path.
    pub fn terminal_state(&self, index: usize) -> DVector<f64> {
        self.run(index, |_, _| {})
    }

    pub fn n_realizations(&self) -> usize {
        self.cfg.n_realizations
    }
}

/// One trajectory per realization.
pub fn simulate_langevin(
    pot: &QuadraticPotential,
    init: &GaussianMeasure,
    cfg: &IntegratorConfig,
) -> Result<Vec<Trajectory>> {
    let sampler = LangevinSampler::new(pot, init, cfg)?;
    (0..cfg.n_realizations)
        .map(|i| sampler.realization(i))
        .collect()
}

/// Final states of every realization; identical to the endpoints of
/// [`simulate_langevin`].
pub fn langevin_terminal_states(
    pot: &QuadraticPotential,
    init: &GaussianMeasure,
    cfg: &IntegratorConfig,
) -> Result<Vec<DVector<f64>>> {
    let sampler = LangevinSampler::new(pot, init, cfg)?;
    Ok((0..cfg.n_realizations)
        .map(|i| sampler.terminal_state(i))
        .collect())
}

/// `(1 − e^{−λt}) / λ`, continuous at `λ = 0`.
fn relax(lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        t
    } else {
        -(-lambda * t).exp_m1() / lambda
    }
}

/// Moments of an Ornstein–Uhlenbeck process expressed in the eigenbasis of
/// `A`, ready to be evaluated at any time.
#[derive(Debug, Clone)]
pub(crate) struct OuEigen<'a> {
    pot: &'a QuadraticPotential,
    pub(crate) lambdas: DVector<f64>,
    m0: DVector<f64>,
    pub(crate) bq: DVector<f64>,
    s0: DMatrix<f64>,
    beta_inv: f64,
}

impl<'a> OuEigen<'a> {
    pub(crate) fn new(
        pot: &'a QuadraticPotential,
        init: &GaussianMeasure,
        beta_inv: f64,
    ) -> Result<Self> {
        check_dim(pot, init.dim())?;
        if !(beta_inv.is_finite() && beta_inv >= 0.0) {
            return Err(Error::invalid("beta_inv", "must be finite and >= 0"));
        }
        let values = pot.eigenvalues();
        let floor = 1e-14 * pot.lambda_max();
        if beta_inv > 0.0 {
            if let Some(&eigenvalue) = values.iter().find(|&&v| v <= floor) {
                return Err(Error::SingularPotential { eigenvalue });
            }
        }
        let q = pot.eigenvectors();
        Ok(Self {
            pot,
            lambdas: values.map(|v| if v <= floor { 0.0 } else { v }),
            m0: q.transpose() * init.mean(),
            bq: q.transpose() * pot.b(),
            s0: q.transpose() * init.covariance() * q,
            beta_inv,
        })
    }

    pub(crate) fn mean(&self, t: f64) -> DVector<f64> {
        DVector::from_fn(self.m0.len(), |k, _| {
            let l = self.lambdas[k];
            (-l * t).exp() * self.m0[k] + self.bq[k] * relax(l, t)
        })
    }

    pub(crate) fn covariance(&self, t: f64) -> DMatrix<f64> {
        let decay = self.lambdas.map(|l| (-l * t).exp());
        let d = decay.len();
        DMatrix::from_fn(d, d, |i, j| {
            let mut v = decay[i] * self.s0[(i, j)] * decay[j];
            if i == j {
                v += self.beta_inv * 2.0 * relax(2.0 * self.lambdas[i], t);
            }
            v
        })
    }

    fn to_measure(&self, t: f64) -> GaussianMeasure {
        let q = self.pot.eigenvectors();
        GaussianMeasure::from_parts(q * self.mean(t), q * self.covariance(t) * q.transpose())
    }
}

/// Exact law at time `t` of the Ornstein–Uhlenbeck process started from
/// `init`:
/// `μ(t) = A⁻¹b + e^{−At}(μ₀ − A⁻¹b)`,
/// `Σ(t) = e^{−At} Σ₀ e^{−At} + β⁻¹ A⁻¹ (I − e^{−2At})`,
/// evaluated in the eigenbasis of `A`.
pub fn propagate_gaussian_ou(
    pot: &QuadraticPotential,
    init: &GaussianMeasure,
    beta_inv: f64,
    t: f64,
) -> Result<GaussianMeasure> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", "must be finite and >= 0"));
    }
    let ou = OuEigen::new(pot, init, beta_inv)?;
    if t == 0.0 {
        return Ok(init.clone());
    }
    Ok(ou.to_measure(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn scalar(a: f64, b: f64) -> QuadraticPotential {
        QuadraticPotential::new(
            DMatrix::from_element(1, 1, a),
            DVector::from_element(1, b),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn gradient_flow_scalar_decay() {
        let pot = scalar(1.0, 0.0);
        let cfg = IntegratorConfig::gradient_flow(1e-3, 1.0);
        let traj = simulate_gradient_flow(&pot, &DVector::from_element(1, 1.0), &cfg).unwrap();
        let end = traj.last_weights()[0];
        assert!((end - (-1.0f64).exp()).abs() < 1e-8, "{end}");
        assert!((traj.times().last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_flow_fixed_point() {
        let pot = scalar(1.0, 0.0);
        let cfg = IntegratorConfig::gradient_flow(1e-2, 3.0);
        let traj = simulate_gradient_flow(&pot, &DVector::zeros(1), &cfg).unwrap();
        assert!(traj.weights().iter().all(|w| w[0] == 0.0));
    }

    #[test]
    fn gradient_flow_diagonal_modes() {
        let pot = QuadraticPotential::diagonal(&[1.0, 2.0], DVector::zeros(2), 0.0).unwrap();
        let cfg = IntegratorConfig::gradient_flow(1e-3, 1.0);
        let traj = simulate_gradient_flow(&pot, &DVector::from_vec(vec![1.0, 1.0]), &cfg).unwrap();
        let end = traj.last_weights();
        assert!((end[0] - (-1.0f64).exp()).abs() < 1e-8);
        assert!((end[1] - (-2.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn gradient_flow_rejects_unstable_step() {
        let pot = scalar(10.0, 0.0);
        let cfg = IntegratorConfig::gradient_flow(0.25, 1.0);
        match simulate_gradient_flow(&pot, &DVector::zeros(1), &cfg) {
            Err(Error::Unstable { product }) => assert!((product - 2.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gradient_flow_rejects_noise() {
        let pot = scalar(1.0, 0.0);
        let cfg = IntegratorConfig::langevin(1e-2, 1.0, 0.5, 0, 1);
        assert!(matches!(
            simulate_gradient_flow(&pot, &DVector::zeros(1), &cfg),
            Err(Error::NoisyGradientFlow { .. })
        ));
    }

    #[test]
    fn checkpoints_are_thinned_with_endpoints() {
        let pot = scalar(1.0, 0.0);
        let cfg = IntegratorConfig::gradient_flow(1e-3, 1.0).with_max_checkpoints(7);
        let traj = simulate_gradient_flow(&pot, &DVector::from_element(1, 1.0), &cfg).unwrap();
        assert!(traj.len() <= 9);
        assert_eq!(traj.times()[0], 0.0);
        assert!((traj.times().last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_flow_loss_is_monotone() {
        let a = DMatrix::from_row_slice(3, 3, &[3.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 0.3]);
        let pot = QuadraticPotential::new(a, DVector::from_vec(vec![1.0, -2.0, 0.5]), 4.0).unwrap();
        let cfg = IntegratorConfig::gradient_flow(0.05, 20.0);
        let traj =
            simulate_gradient_flow(&pot, &DVector::from_vec(vec![3.0, 3.0, -3.0]), &cfg).unwrap();
        for w in traj.losses().windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn langevin_requires_noise() {
        let pot = scalar(1.0, 0.0);
        let init = GaussianMeasure::dirac(DVector::zeros(1));
        let cfg = IntegratorConfig::gradient_flow(1e-2, 1.0);
        assert!(matches!(
            simulate_langevin(&pot, &init, &cfg),
            Err(Error::NoiselessLangevin)
        ));
    }

    #[test]
    fn langevin_is_deterministic() {
        let pot = scalar(1.0, 0.0);
        let init = GaussianMeasure::isotropic(DVector::zeros(1), 1.0).unwrap();
        let cfg = IntegratorConfig::langevin(1e-2, 0.5, 1.0, 42, 3);
        let a = simulate_langevin(&pot, &init, &cfg).unwrap();
        let b = simulate_langevin(&pot, &init, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        let ends = langevin_terminal_states(&pot, &init, &cfg).unwrap();
        for (traj, end) in a.iter().zip(&ends) {
            assert_eq!(traj.last_weights(), end);
        }
    }

    fn ensemble_variance(sampler: &LangevinSampler<'_>) -> (f64, f64) {
        let n = sampler.n_realizations();
        let (mut s1, mut s2) = (KahanSum::new(), KahanSum::new());
        for i in 0..n {
            let x = sampler.terminal_state(i)[0];
            s1.add(x);
            s2.add(x * x);
        }
        let m = n as f64;
        let mean = s1.value() / m;
        (mean, s2.value() / m - mean * mean)
    }

    #[test]
    fn langevin_keeps_stationary_law() {
        let pot = scalar(1.0, 0.0);
        let init = GaussianMeasure::isotropic(DVector::zeros(1), 1.0).unwrap();
        let cfg = IntegratorConfig::langevin(1e-3, 1.0, 1.0, 5, 10_000);
        let sampler = LangevinSampler::new(&pot, &init, &cfg).unwrap();
        let (_, var) = ensemble_variance(&sampler);
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn langevin_variance_from_dirac() {
        let pot = scalar(1.0, 0.0);
        let init = GaussianMeasure::dirac(DVector::zeros(1));
        let horizon = 2f64.ln() / 2.0;
        let cfg = IntegratorConfig::langevin(horizon / 400.0, horizon, 1.0, 9, 10_000);
        let sampler = LangevinSampler::new(&pot, &init, &cfg).unwrap();
        let (_, var) = ensemble_variance(&sampler);
        // standard error of a Gaussian sample variance
        let se = 0.5 * (2.0f64 / 10_000.0).sqrt();
        assert!((var - 0.5).abs() < 3.0 * se, "{var}");
    }

    #[test]
    fn langevin_weak_error_is_first_order() {
        let pot = scalar(1.0, 0.0);
        let init = GaussianMeasure::dirac(DVector::zeros(1));
        let exact = propagate_gaussian_ou(&pot, &init, 1.0, 1.0)
            .unwrap()
            .covariance()[(0, 0)];
        let error = |dt: f64| {
            let cfg = IntegratorConfig::langevin(dt, 1.0, 1.0, 3, 4_000_000);
            let sampler = LangevinSampler::new(&pot, &init, &cfg).unwrap();
            (ensemble_variance(&sampler).1 - exact).abs()
        };
        let (coarse, fine) = (error(0.2), error(0.1));
        assert!(fine <= 0.5 * coarse, "{coarse} {fine}");
    }

    #[test]
    fn vanishing_noise_recovers_gradient_flow() {
        let pot = scalar(1.0, 0.5);
        let init = GaussianMeasure::dirac(DVector::from_element(1, 2.0));
        let dt = 1e-3;
        let noisy = LangevinSampler::new(
            &pot,
            &init,
            &IntegratorConfig::langevin(dt, 1.0, 1e-300, 1, 1),
        )
        .unwrap()
        .terminal_state(0)[0];
        let flow =
            simulate_gradient_flow(&pot, init.mean(), &IntegratorConfig::gradient_flow(dt, 1.0))
                .unwrap()
                .last_weights()[0];
        assert!((noisy - flow).abs() < dt, "{noisy} {flow}");
    }

    #[test]
    fn ou_stationary_variance() {
        let pot = scalar(1.0, 0.0);
        let init = GaussianMeasure::isotropic(DVector::zeros(1), 1.0).unwrap();
        for t in [0.1, 1.0, 7.0] {
            let g = propagate_gaussian_ou(&pot, &init, 1.0, t).unwrap();
            assert!((g.covariance()[(0, 0)] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ou_variance_from_dirac() {
        let pot = scalar(1.0, 0.0);
        let init = GaussianMeasure::dirac(DVector::zeros(1));
        let g = propagate_gaussian_ou(&pot, &init, 1.0, 2f64.ln() / 2.0).unwrap();
        assert!((g.covariance()[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn ou_zero_time_is_identity() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let pot = QuadraticPotential::new(a, DVector::from_vec(vec![1.0, 2.0]), 0.0).unwrap();
        let init = GaussianMeasure::new(
            DVector::from_vec(vec![0.3, -0.1]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
        )
        .unwrap();
        assert_eq!(propagate_gaussian_ou(&pot, &init, 0.7, 0.0).unwrap(), init);
    }

    #[test]
    fn ou_mean_relaxes_to_minimizer() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let pot = QuadraticPotential::new(a, DVector::from_vec(vec![1.0, 2.0]), 0.0).unwrap();
        let init = GaussianMeasure::dirac(DVector::from_vec(vec![5.0, -5.0]));
        let g = propagate_gaussian_ou(&pot, &init, 0.5, 60.0).unwrap();
        let star = pot.minimizer().unwrap();
        assert!((g.mean() - star).amax() < 1e-12);
        let stationary = pot.a().clone().try_inverse().unwrap() * 0.5;
        assert!((g.covariance() - stationary).amax() < 1e-12);
    }

    #[test]
    fn ou_rejects_singular_with_noise() {
        let pot = QuadraticPotential::diagonal(&[1.0, 0.0], DVector::zeros(2), 0.0).unwrap();
        let init = GaussianMeasure::dirac(DVector::zeros(2));
        assert!(matches!(
            propagate_gaussian_ou(&pot, &init, 1.0, 1.0),
            Err(Error::SingularPotential { .. })
        ));
        // noiseless transport along the flat direction is still defined
        let pot = QuadraticPotential::diagonal(&[1.0, 0.0], DVector::from_vec(vec![0.0, 2.0]), 0.0)
            .unwrap();
        let g = propagate_gaussian_ou(&pot, &init, 0.0, 1.5).unwrap();
        assert!((g.mean()[1] - 3.0).abs() < 1e-14);
    }
}

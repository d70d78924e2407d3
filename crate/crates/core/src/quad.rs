//! Quadrature rules: composite Simpson on uniform and log-spaced grids, and
//! Gauss–Legendre nodes.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::linalg::KahanSum;

/// Composite Simpson rule on `[a, b]`. `panels` is rounded up to an even count.
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = even(panels);
    if b == a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut acc = KahanSum::new();
    acc.add(f(a));
    acc.add(f(b));
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc.add(w * f(a + h * i as f64));
    }
    acc.value() * h / 3.0
}

/// Composite Simpson in `u = ln t` on `[a, b]`, `0 < a <= b`.
pub fn log_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    debug_assert!(a > 0.0 && b >= a);
    let (ua, ub) = (a.ln(), b.ln());
    simpson(
        |u| {
            let t = u.exp();
            f(t) * t
        },
        ua,
        ub,
        panels,
    )
}

/// `∫_0^end f` with a uniform head on `[0, knee]` and log-spaced panels on
/// `[knee, end]`. Integrands that vary fastest near zero and relax slowly
/// afterwards are resolved on both scales.
pub fn graded_simpson<F: FnMut(f64) -> f64>(
    mut f: F,
    end: f64,
    knee: f64,
    head_panels: usize,
    tail_panels: usize,
) -> f64 {
    if end <= 0.0 {
        return 0.0;
    }
    if knee <= 0.0 || end <= knee {
        return simpson(f, 0.0, end, head_panels + tail_panels);
    }
    simpson(&mut f, 0.0, knee, head_panels) + log_simpson(&mut f, knee, end, tail_panels)
}

fn even(n: usize) -> usize {
    let n = n.max(2);
    n + n % 2
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, p_prev) = legendre(n, x);
                dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 4.0 * f64::EPSILON {
                    break;
                }
            }
            let (p, p_prev) = legendre(n, x);
            dp = if dp == 0.0 {
                1.0
            } else {
                n as f64 * (x * p - p_prev) / (x * x - 1.0)
            };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = x;
            nodes[n - 1 - i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

/// `(P_n(x), P_{n-1}(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::{Error, Result};

/// Relative asymmetry accepted before symmetrizing an input matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Negative eigenvalues down to `-PSD_TOL * lambda_max` count as round-off.
pub const PSD_TOL: f64 = 1e-12;
/// Negative eigenvalues down to `-SQRT_CLAMP_TOL * lambda_max` are clamped to
/// zero before taking square roots.
pub const SQRT_CLAMP_TOL: f64 = 1e-10;

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = KahanSum::new();
    for x in iter {
        acc.add(x);
    }
    acc.value()
}

/// Checks squareness and symmetry, then returns `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let scale = m.amax();
    if !scale.is_finite() {
        return Err(Error::invalid("matrix", "entries must be finite"));
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    let asymmetry = if scale > 0.0 { worst / scale } else { 0.0 };
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Eigendecomposition of a matrix already known to be symmetric.
pub fn sym_eigen(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    (eig.eigenvalues, eig.eigenvectors)
}

/// Rejects spectra with eigenvalues below `-PSD_TOL * lambda_max`.
pub fn check_psd(eigenvalues: &DVector<f64>) -> Result<()> {
    let top = eigenvalues.max().max(0.0);
    let floor = -PSD_TOL * top;
    match eigenvalues.iter().copied().find(|&v| v < floor) {
        Some(eigenvalue) => Err(Error::NotPsd { eigenvalue }),
        None => Ok(()),
    }
}

fn clamp_for_sqrt(eigenvalues: &DVector<f64>) -> Result<DVector<f64>> {
    let top = eigenvalues.max().max(0.0);
    let floor = -SQRT_CLAMP_TOL * top;
    eigenvalues
        .iter()
        .map(|&v| {
            if v >= 0.0 {
                Ok(v)
            } else if v >= floor {
                Ok(0.0)
            } else {
                Err(Error::NotPsd { eigenvalue: v })
            }
        })
        .collect::<Result<alloc::vec::Vec<_>>>()
        .map(DVector::from_vec)
}

/// Principal square root of a symmetric PSD matrix.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let (values, vectors) = sym_eigen(sym);
    let roots = clamp_for_sqrt(&values)?.map(|v| v.sqrt());
    Ok(&vectors * DMatrix::from_diagonal(&roots) * vectors.transpose())
}

/// `Tr(m^{1/2})` for a symmetric PSD matrix.
pub fn trace_psd_sqrt(m: &DMatrix<f64>) -> Result<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let (values, _) = sym_eigen(sym);
    Ok(kahan_sum(clamp_for_sqrt(&values)?.iter().map(|v| v.sqrt())))
}

/// `exp(-a t)` for symmetric `a` given its eigendecomposition.
pub fn exp_neg_sym(values: &DVector<f64>, vectors: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let decay = values.map(|v| (-v * t).exp());
    vectors * DMatrix::from_diagonal(&decay) * vectors.transpose()
}

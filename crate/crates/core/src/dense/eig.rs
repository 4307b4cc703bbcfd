use std::cmp::Ordering;

use faer::{Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::ComplexDenseMatrix;
use super::scalar::ScalarFunction;
use crate::error::{Error, Result};

/// Eigenvector condition numbers above this are treated as defective.
pub const DEFAULT_COND_CAP: f64 = 1e12;
/// Relative residual allowed in `M P = P diag(eigvals)`.
pub const TOL_SPECTRAL: f64 = 1e-10;
/// Relative size of the one-shot diagonal perturbation applied before giving up.
pub const PERTURBATION_SIZE: f64 = 1e-13;
/// Matrices this close to Hermitian (relative Frobenius defect) use the
/// self-adjoint solver.
const HERMITIAN_DEFECT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct EigConfig {
    pub cond_cap: f64,
    pub tol_spectral: f64,
}

impl Default for EigConfig {
    fn default() -> Self {
        Self {
            cond_cap: DEFAULT_COND_CAP,
            tol_spectral: TOL_SPECTRAL,
        }
    }
}

/// `M = P diag(eigvals) P^{-1}` with unit-norm eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigvecs: ComplexDenseMatrix,
    eigvecs_inv: ComplexDenseMatrix,
    eigvals: Vec<Complex64>,
    cond_estimate: f64,
    perturbed: bool,
}

impl SpectralDecomposition {
    pub fn eigvecs(&self) -> &ComplexDenseMatrix {
        &self.eigvecs
    }

    pub fn eigvecs_inv(&self) -> &ComplexDenseMatrix {
        &self.eigvecs_inv
    }

    pub fn eigvals(&self) -> &[Complex64] {
        &self.eigvals
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    /// True when the decomposition belongs to a slightly perturbed copy of the input.
    pub fn perturbed(&self) -> bool {
        self.perturbed
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    /// Decomposition of `M^T`: `M^T = P^{-T} diag(eigvals) P^T`.
    pub fn transposed(&self) -> SpectralDecomposition {
        SpectralDecomposition {
            eigvecs: self.eigvecs_inv.transpose(),
            eigvecs_inv: self.eigvecs.transpose(),
            eigvals: self.eigvals.clone(),
            cond_estimate: self.cond_estimate,
            perturbed: self.perturbed,
        }
    }

    /// `P diag(values) P^{-1}`.
    pub fn reconstruct_with(&self, values: &[Complex64]) -> ComplexDenseMatrix {
        let scaled = ComplexDenseMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            self.eigvecs.get(i, j) * values[j]
        });
        &scaled * &self.eigvecs_inv
    }
}

fn lexicographic(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

pub fn eig(m: &ComplexDenseMatrix) -> Result<SpectralDecomposition> {
    eig_with(m, &EigConfig::default())
}

pub fn eig_with(m: &ComplexDenseMatrix, config: &EigConfig) -> Result<SpectralDecomposition> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let norm = m.frobenius_norm();
    if m.hermitian_defect() <= HERMITIAN_DEFECT_TOL * norm {
        return hermitian_eig(m);
    }
    match general_eig(m, config, false) {
        Err(Error::NonDiagonalizable { .. }) => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e16e);
            let mut perturbed = m.clone();
            for i in 0..m.rows() {
                let delta: f64 = rng.random_range(-1.0..1.0);
                perturbed.set(i, i, m.get(i, i) + PERTURBATION_SIZE * norm * delta);
            }
            let decomp = general_eig(&perturbed, config, true)?;
            check_residual(m, &decomp, config)?;
            Ok(decomp)
        }
        other => other,
    }
}

fn hermitian_eig(m: &ComplexDenseMatrix) -> Result<SpectralDecomposition> {
    let n = m.rows();
    let h = Mat::from_fn(n, n, |i, j| 0.5 * (m.get(i, j) + m.get(j, i).conj()));
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::EvaluationFailure(format!("self-adjoint eigensolver: {e:?}")))?;
    let s = evd.S();
    let eigvals: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
    let eigvecs = ComplexDenseMatrix::from_faer(evd.U().to_owned())?;
    let eigvecs_inv = eigvecs.adjoint();
    Ok(SpectralDecomposition {
        eigvecs,
        eigvecs_inv,
        eigvals,
        cond_estimate: 1.0,
        perturbed: false,
    })
}

fn general_eig(
    m: &ComplexDenseMatrix,
    config: &EigConfig,
    perturbed: bool,
) -> Result<SpectralDecomposition> {
    let n = m.rows();
    let evd = m
        .as_faer()
        .eigen()
        .map_err(|e| Error::EvaluationFailure(format!("eigensolver: {e:?}")))?;
    let (u, s) = (evd.U(), evd.S());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lexicographic(&s[a], &s[b]));
    let eigvals: Vec<Complex64> = order.iter().map(|&k| s[k]).collect();
    let mut eigvecs = ComplexDenseMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    for j in 0..n {
        let norm: f64 = (0..n).map(|i| eigvecs.get(i, j).norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..n {
                let v = eigvecs.get(i, j) / norm;
                eigvecs.set(i, j, v);
            }
        }
    }
    if eigvecs.max_abs().is_nan() {
        return Err(Error::NonDiagonalizable { cond: f64::INFINITY });
    }
    let sv = eigvecs.singular_values()?;
    let cond = match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    };
    if cond.is_nan() || cond > config.cond_cap {
        return Err(Error::NonDiagonalizable { cond });
    }
    let eigvecs_inv = eigvecs.inverse()?;
    let decomp = SpectralDecomposition {
        eigvecs,
        eigvecs_inv,
        eigvals,
        cond_estimate: cond,
        perturbed,
    };
    check_residual(m, &decomp, config)?;
    Ok(decomp)
}

fn check_residual(
    m: &ComplexDenseMatrix,
    decomp: &SpectralDecomposition,
    config: &EigConfig,
) -> Result<()> {
    let resid = spectral_residual(m, decomp);
    if resid > config.tol_spectral * m.frobenius_norm().max(f64::MIN_POSITIVE) {
        return Err(Error::EvaluationFailure(format!(
            "eigendecomposition residual {resid:.3e} exceeds tolerance"
        )));
    }
    Ok(())
}

/// `||M P - P diag(eigvals)||_F`.
pub fn spectral_residual(m: &ComplexDenseMatrix, decomp: &SpectralDecomposition) -> f64 {
    let p = decomp.eigvecs();
    let mp = m * p;
    let pl = ComplexDenseMatrix::from_fn(p.rows(), p.cols(), |i, j| p.get(i, j) * decomp.eigvals[j]);
    (&mp - &pl).frobenius_norm()
}

/// `f(M) = P diag(f(lambda_i)) P^{-1}`.
pub fn matrix_function(f: &ScalarFunction, m: &ComplexDenseMatrix) -> Result<ComplexDenseMatrix> {
    let decomp = eig(m)?;
    matrix_function_from(f, &decomp)
}

pub fn matrix_function_from(
    f: &ScalarFunction,
    decomp: &SpectralDecomposition,
) -> Result<ComplexDenseMatrix> {
    let values = decomp
        .eigvals()
        .iter()
        .map(|&l| f.eval_checked(l))
        .collect::<Result<Vec<_>>>()?;
    Ok(decomp.reconstruct_with(&values))
}

//! Reduced density matrices and the quantities built on them.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CqdError, Result};
use crate::statevector::StateVector;

const HERMITIAN_TOL: f64 = 1e-8;

/// `Tr_env |ψ⟩⟨ψ|` keeping `keep` (sites are sorted; the reduced index is the
/// big-endian bitstring of the kept sites in ascending order).
pub fn reduced_density_matrix(state: &StateVector, keep: &[usize]) -> Result<DMatrix<Complex64>> {
    let n = state.n_sites();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(CqdError::precondition("kept subsystem is empty"));
    }
    if let Some(&bad) = keep.iter().find(|&&s| s >= n) {
        return Err(CqdError::precondition(format!("site {bad} out of range for {n} sites")));
    }
    let env: Vec<usize> = (0..n).filter(|s| !keep.contains(s)).collect();
    let (dk, de) = (1usize << keep.len(), 1usize << env.len());

    let gather = |idx: usize, sites: &[usize]| -> usize {
        sites
            .iter()
            .fold(0usize, |acc, &s| (acc << 1) | ((idx >> (n - 1 - s)) & 1))
    };
    let mut psi = DMatrix::from_element(dk, de, Complex64::new(0.0, 0.0));
    for (idx, a) in state.amplitudes().iter().enumerate() {
        psi[(gather(idx, &keep), gather(idx, &env))] = *a;
    }
    Ok(&psi * psi.adjoint())
}

fn check_hermitian(rho: &DMatrix<Complex64>) -> Result<()> {
    if !rho.is_square() {
        return Err(CqdError::Dimension {
            expected: rho.nrows(),
            got: rho.ncols(),
        });
    }
    let dev = (rho - rho.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
    if dev > HERMITIAN_TOL {
        return Err(CqdError::precondition(format!(
            "matrix is not hermitian (max deviation {dev:e})"
        )));
    }
    Ok(())
}

fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Von Neumann entropy `-Tr ρ ln ρ` in nats.
pub fn entanglement_entropy(rho: &DMatrix<Complex64>) -> Result<f64> {
    check_hermitian(rho)?;
    let (vals, _) = hermitian_eigen(rho);
    Ok(vals
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum::<f64>()
        .max(0.0))
}

fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (vals, vecs) = hermitian_eigen(m);
    let mut scaled = vecs.clone();
    for (j, l) in vals.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn partial_fidelity(rho: &DMatrix<Complex64>, sigma: &DMatrix<Complex64>) -> Result<f64> {
    check_hermitian(rho)?;
    check_hermitian(sigma)?;
    CqdError::check_len(rho.nrows(), sigma.nrows())?;
    let s = psd_sqrt(rho);
    let m = &s * sigma * &s;
    let (vals, _) = hermitian_eigen(&m);
    let tr: f64 = vals.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

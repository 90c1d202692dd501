#![allow(dead_code)]

use cqd::ansatz::{Ansatz, AnsatzState};
use cqd::estimator::EomTerms;
use cqd::models::PartitionLabels;
use cqd::{Letter, PauliString, PauliSum, StateVector};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_string(r: &mut impl Rng, n: usize) -> PauliString {
    let letters: Vec<Letter> = (0..n)
        .map(|_| [Letter::I, Letter::X, Letter::Y, Letter::Z][r.random_range(0..4)])
        .collect();
    PauliString::from_letters(&letters).unwrap()
}

pub fn random_sum(r: &mut impl Rng, n: usize, terms: usize) -> PauliSum {
    PauliSum::new(
        n,
        (0..terms).map(|_| (r.random_range(-1.0..1.0), random_string(r, n))),
    )
    .unwrap()
}

pub fn random_theta(r: &mut impl Rng, ansatz: Ansatz, scale: f64) -> AnsatzState {
    let theta = (0..ansatz.n_params())
        .map(|_| scale * r.random_range(-1.0..1.0))
        .collect();
    AnsatzState::new(ansatz, theta).unwrap()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Builds the hybrid amplitudes, their parameter derivatives and the explicit
/// time derivative on the full register and forms S, C, T directly.
pub fn dense_eom(
    state: &StateVector,
    h: &PauliSum,
    h_eff: &PauliSum,
    partition: &PartitionLabels,
    theta: &AnsatzState,
) -> EomTerms {
    let n = partition.n_total();
    let dim = 1usize << n;
    let k = theta.len();
    let h_eff_psi = h_eff.apply_to(state.amplitudes()).unwrap();
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    let mut dpsi = vec![vec![Complex64::new(0.0, 0.0); dim]; k];
    let mut dt = vec![Complex64::new(0.0, 0.0); dim];
    for full in 0..dim {
        let (zq, zc) = partition.split(full as u64);
        let (phi, grad) = theta.log_and_grad(zq, zc);
        let c = phi.exp();
        psi[full] = state.amplitudes()[zq as usize] * c;
        for j in 0..k {
            dpsi[j][full] = psi[full] * grad[j];
        }
        dt[full] = c * Complex64::new(0.0, -1.0) * h_eff_psi[zq as usize];
    }
    let hpsi = h.apply_to(&psi).unwrap();
    let norm = dot(&psi, &psi).re;
    let e = dot(&psi, &hpsi);
    let d = dot(&psi, &dt);
    let b: Vec<Complex64> = dpsi.iter().map(|v| dot(v, &psi)).collect();
    let mut s = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            s[(i, j)] = (dot(&dpsi[i], &dpsi[j]) / norm - b[i] * b[j].conj() / (norm * norm)).re;
        }
    }
    let c = DVector::from_iterator(
        k,
        (0..k).map(|i| (dot(&dpsi[i], &hpsi) / norm - b[i] * e / (norm * norm)).im),
    );
    let t = DVector::from_iterator(
        k,
        (0..k).map(|i| (dot(&dpsi[i], &dt) / norm - b[i] * d / (norm * norm)).re),
    );
    EomTerms {
        s,
        c,
        t,
        norm,
        energy: e.re / norm,
    }
}

pub fn max_abs_diff(a: &EomTerms, b: &EomTerms) -> f64 {
    let ds = (&a.s - &b.s).amax();
    let dc = (&a.c - &b.c).amax();
    let dt = (&a.t - &b.t).amax();
    ds.max(dc).max(dt).max((a.norm - b.norm).abs() / b.norm)
}

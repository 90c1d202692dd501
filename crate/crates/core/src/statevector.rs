//! Dense statevector simulation.
//!
//! Amplitude `k` belongs to the configuration whose big-endian bitstring is `k`
//! (see [`crate::pauli`] for the site convention). Every operation returns a
//! new, normalized state.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{CqdError, Result};
use crate::pauli::{site_mask, Letter, PauliString, PauliSum, SpinConfig, DENSE_CAP};
use crate::rng;

/// Largest register a dense statevector is allowed to hold.
pub const STATE_CAP: usize = 24;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    fn check_size(n: usize) -> Result<()> {
        if n == 0 {
            return Err(CqdError::precondition("a state needs at least one site"));
        }
        if n > STATE_CAP {
            return Err(CqdError::CapExceeded { n, cap: STATE_CAP });
        }
        Ok(())
    }

    /// `|+⟩^{⊗n}`.
    pub fn init_plus(n: usize) -> Result<Self> {
        Self::check_size(n)?;
        let dim = 1usize << n;
        let a = (dim as f64).sqrt().recip();
        Ok(Self {
            n,
            amps: vec![Complex64::new(a, 0.0); dim],
        })
    }

    pub fn basis(z: SpinConfig) -> Result<Self> {
        Self::check_size(z.len())?;
        let mut amps = vec![ZERO; 1usize << z.len()];
        amps[z.index() as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { n: z.len(), amps })
    }

    /// Wraps raw amplitudes, normalizing them.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if !dim.is_power_of_two() {
            return Err(CqdError::precondition(format!(
                "amplitude count {dim} is not a power of two"
            )));
        }
        let n = dim.trailing_zeros() as usize;
        Self::check_size(n)?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(CqdError::NonFinite("state normalization"));
        }
        Ok(Self {
            n,
            amps: amps.into_iter().map(|a| a / norm).collect(),
        })
    }

    /// Haar-ish random state (Gaussian amplitudes), mostly for tests.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        Self::check_size(n)?;
        let mut r = rng::stream(seed);
        let amps = (0..1usize << n)
            .map(|_| {
                let (a, b): (f64, f64) = (r.sample(rand_distr::StandardNormal), r.sample(rand_distr::StandardNormal));
                Complex64::new(a, b)
            })
            .collect();
        Self::from_amplitudes(amps)
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    #[inline]
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, z: SpinConfig) -> Complex64 {
        self.amps[z.index() as usize]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        CqdError::check_len(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `exp(-i·group·tau)|self⟩`, applied string by string.
    ///
    /// The factorization is exact only because the strings of `group`
    /// commute; non-commuting groups are rejected.
    pub fn evolve_group(&self, group: &PauliSum, tau: f64) -> Result<StateVector> {
        CqdError::check_len(self.n, group.n_sites())?;
        if !tau.is_finite() {
            return Err(CqdError::NonFinite("evolution time"));
        }
        if let Some((a, b)) = group.first_noncommuting_pair() {
            return Err(CqdError::NonCommuting(a.to_string(), b.to_string()));
        }
        let mut amps = self.amps.clone();
        for (w, p) in group.terms() {
            apply_string_exponential(&mut amps, p, w * tau);
        }
        Ok(Self { n: self.n, amps })
    }

    /// Rotates the state so that computational-basis samples of the result are
    /// outcomes in the measurement basis associated with `basis`.
    ///
    /// Applies the inverse of the basis-preparation circuit: a Pauli on the
    /// remaining sites controlled by the pivot, then `diag(1, μ)` and a
    /// Hadamard on the pivot. Outcome bit 0 on the pivot is the `+` (or `+i`)
    /// class, bit 1 the `-` (or `-i`) class.
    pub fn rotate_to_basis(&self, basis: &MeasurementBasis) -> Result<StateVector> {
        CqdError::check_len(self.n, basis.string.len())?;
        let pm = site_mask(self.n, basis.pivot);
        let x_rest = basis.string.x_mask() & !pm;
        let z_rest = basis.string.z_mask() & !pm;
        let rest = PauliString::from_masks(self.n, x_rest, z_rest);
        let mu = basis.pivot_phase();

        let mut out = vec![ZERO; self.dim()];
        for (idx, &a) in self.amps.iter().enumerate() {
            let idx = idx as u64;
            if idx & pm == 0 {
                out[idx as usize] += a;
            } else {
                let (j, ph) = rest.apply_index(idx);
                out[j as usize] += ph.to_complex() * mu * a;
            }
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for idx in 0..self.dim() as u64 {
            if idx & pm == 0 {
                let (i0, i1) = (idx as usize, (idx | pm) as usize);
                let (a0, a1) = (out[i0], out[i1]);
                out[i0] = (a0 + a1) * h;
                out[i1] = (a0 - a1) * h;
            }
        }
        Ok(Self { n: self.n, amps: out })
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Draws `n_shots` i.i.d. configurations from `|⟨z|ψ⟩|²` by inverse CDF.
    pub fn sample(&self, n_shots: usize, seed: u64) -> Result<Vec<SpinConfig>> {
        Ok(self
            .sample_indices(n_shots, seed)?
            .into_iter()
            .map(|i| SpinConfig::new(i, self.n).expect("index in range"))
            .collect())
    }

    pub fn sample_indices(&self, n_shots: usize, seed: u64) -> Result<Vec<u64>> {
        if n_shots == 0 {
            return Err(CqdError::precondition("at least one shot is required"));
        }
        let mut cdf = Vec::with_capacity(self.dim());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let total = acc;
        let mut r = rng::stream(seed);
        let last = self.dim() - 1;
        Ok((0..n_shots)
            .map(|_| {
                let u = r.random::<f64>() * total;
                cdf.partition_point(|&c| c <= u).min(last) as u64
            })
            .collect())
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn exact_expectation(&self, o: &PauliSum) -> Result<f64> {
        CqdError::check_len(self.n, o.n_sites())?;
        let mut acc = ZERO;
        for (w, p) in o.terms() {
            let mut s = ZERO;
            for (idx, a) in self.amps.iter().enumerate() {
                let (j, ph) = p.apply_index(idx as u64);
                s += self.amps[j as usize].conj() * ph.to_complex() * a;
            }
            acc += *w * s;
        }
        Ok(acc.re)
    }

    /// Little-endian interleaved (re, im) f64 dump of the amplitudes.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.dim() * 16);
        for a in &self.amps {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 16 != 0 {
            return Err(CqdError::precondition("amplitude dump length is not a multiple of 16"));
        }
        let amps = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Self::from_amplitudes(amps)
    }
}

/// In-place `exp(-i·angle·P)` using `P² = I`.
fn apply_string_exponential(amps: &mut [Complex64], p: &PauliString, angle: f64) {
    let (c, s) = (angle.cos(), angle.sin());
    let mis = Complex64::new(0.0, -s);
    if p.is_diagonal() {
        for (idx, a) in amps.iter_mut().enumerate() {
            let (_, ph) = p.apply_index(idx as u64);
            *a *= c + mis * ph.to_complex();
        }
        return;
    }
    let x = p.x_mask();
    for idx in 0..amps.len() as u64 {
        let j = idx ^ x;
        if idx < j {
            let (_, ph_fwd) = p.apply_index(idx);
            let (_, ph_back) = p.apply_index(j);
            let (a, b) = (amps[idx as usize], amps[j as usize]);
            amps[j as usize] = c * b + mis * ph_fwd.to_complex() * a;
            amps[idx as usize] = c * a + mis * ph_back.to_complex() * b;
        }
    }
}

/// Real or imaginary part of a non-diagonal Pauli expectation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Real,
    Imag,
}

/// Measurement basis for a non-diagonal Pauli string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MeasurementBasis {
    pub string: PauliString,
    pub component: Component,
    /// Lowest-index site carrying `X` or `Y`.
    pub pivot: usize,
}

impl MeasurementBasis {
    pub fn new(string: PauliString, component: Component) -> Result<Self> {
        let pivot = (0..string.len())
            .find(|&i| matches!(string.letter(i), Letter::X | Letter::Y))
            .ok_or_else(|| {
                CqdError::precondition(format!("diagonal string {string} has no measurement basis"))
            })?;
        Ok(Self {
            string,
            component,
            pivot,
        })
    }

    /// Phase `μ` of the pivot gate: `⟨0|P_pivot|1⟩` for the real part, times `-i`
    /// for the imaginary part.
    fn pivot_phase(&self) -> Complex64 {
        let a0 = match self.string.letter(self.pivot) {
            Letter::X => Complex64::new(1.0, 0.0),
            Letter::Y => Complex64::new(0.0, -1.0),
            _ => unreachable!("pivot always carries X or Y"),
        };
        match self.component {
            Component::Real => a0,
            Component::Imag => Complex64::new(0.0, -1.0) * a0,
        }
    }
}

enum Eigenbasis {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

/// Exact propagator `e^{-iHt}` from a dense eigendecomposition of `H`.
pub struct ExactPropagator {
    n: usize,
    energies: Vec<f64>,
    vectors: Eigenbasis,
}

impl ExactPropagator {
    pub fn new(h: &PauliSum) -> Result<Self> {
        Self::with_cap(h, DENSE_CAP)
    }

    pub fn with_cap(h: &PauliSum, cap: usize) -> Result<Self> {
        let m = h.to_dense_matrix(cap)?;
        if h.is_real() {
            let eig = m.map(|c| c.re).symmetric_eigen();
            Ok(Self {
                n: h.n_sites(),
                energies: eig.eigenvalues.iter().copied().collect(),
                vectors: Eigenbasis::Real(eig.eigenvectors),
            })
        } else {
            let eig = m.symmetric_eigen();
            Ok(Self {
                n: h.n_sites(),
                energies: eig.eigenvalues.iter().copied().collect(),
                vectors: Eigenbasis::Complex(eig.eigenvectors),
            })
        }
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn evolve(&self, psi0: &StateVector, t: f64) -> Result<StateVector> {
        CqdError::check_len(self.n, psi0.n_sites())?;
        let phases: Vec<Complex64> = self
            .energies
            .iter()
            .map(|e| Complex64::from_polar(1.0, -e * t))
            .collect();
        let amps = match &self.vectors {
            Eigenbasis::Real(v) => {
                let re = DVector::from_iterator(psi0.dim(), psi0.amps.iter().map(|a| a.re));
                let im = DVector::from_iterator(psi0.dim(), psi0.amps.iter().map(|a| a.im));
                let (cr, ci) = (v.tr_mul(&re), v.tr_mul(&im));
                let mut kr = DVector::zeros(psi0.dim());
                let mut ki = DVector::zeros(psi0.dim());
                for k in 0..psi0.dim() {
                    let c = Complex64::new(cr[k], ci[k]) * phases[k];
                    kr[k] = c.re;
                    ki[k] = c.im;
                }
                let (or, oi) = (v * kr, v * ki);
                or.iter().zip(oi.iter()).map(|(&r, &i)| Complex64::new(r, i)).collect()
            }
            Eigenbasis::Complex(v) => {
                let psi = DVector::from_column_slice(&psi0.amps);
                let mut c = v.ad_mul(&psi);
                for (ck, ph) in c.iter_mut().zip(&phases) {
                    *ck *= ph;
                }
                (v * c).iter().copied().collect()
            }
        };
        Ok(StateVector { n: self.n, amps })
    }
}

/// `e^{-iHt}|ψ₀⟩` via dense eigendecomposition.
pub fn exact_evolution(h: &PauliSum, t: f64, psi0: &StateVector) -> Result<StateVector> {
    ExactPropagator::new(h)?.evolve(psi0, t)
}

/// `|⟨reference|state⟩|²` for normalized inputs.
pub fn fidelity(state: &StateVector, reference: &StateVector) -> Result<f64> {
    Ok(reference.inner(state)?.norm_sqr().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sum(n: usize, terms: &[(f64, &str)]) -> PauliSum {
        PauliSum::new(n, terms.iter().map(|(w, s)| (*w, s.parse().unwrap()))).unwrap()
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn init_plus_amplitudes() {
        let s = StateVector::init_plus(1).unwrap();
        assert!(s.amplitudes().iter().all(|a| close(*a, c(FRAC_1_SQRT_2, 0.0))));
        let s = StateVector::init_plus(2).unwrap();
        assert!(s.amplitudes().iter().all(|a| close(*a, c(0.5, 0.0))));
        let s = StateVector::init_plus(10).unwrap();
        for i in 0..10 {
            let x = PauliSum::new(10, [(1.0, PauliString::from_sparse(10, &[(i, Letter::X)]).unwrap())]).unwrap();
            assert!((s.exact_expectation(&x).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(StateVector::init_plus(0).is_err());
        assert!(matches!(StateVector::init_plus(STATE_CAP + 1), Err(CqdError::CapExceeded { .. })));
    }

    #[test]
    fn evolve_single_x() {
        let zero = StateVector::basis(SpinConfig::parse("0").unwrap()).unwrap();
        let out = zero.evolve_group(&sum(1, &[(1.0, "X")]), PI / 2.0).unwrap();
        assert!(out.amplitudes()[0].norm() < 1e-12);
        assert!(close(out.amplitudes()[1], c(0.0, -1.0)));

        let plus = StateVector::init_plus(1).unwrap();
        let tau = 0.731;
        let out = plus.evolve_group(&sum(1, &[(1.0, "X")]), tau).unwrap();
        let ph = Complex64::from_polar(1.0, -tau);
        for (a, b) in out.amplitudes().iter().zip(plus.amplitudes()) {
            assert!(close(*a, ph * b));
        }
    }

    #[test]
    fn evolve_rejects_noncommuting() {
        let s = StateVector::init_plus(1).unwrap();
        let err = s.evolve_group(&sum(1, &[(1.0, "X"), (1.0, "Z")]), 0.1);
        assert!(matches!(err, Err(CqdError::NonCommuting(..))));
    }

    #[test]
    fn rotate_plus_minus() {
        let basis = MeasurementBasis::new("X".parse().unwrap(), Component::Real).unwrap();
        let plus = StateVector::init_plus(1).unwrap();
        let p = plus.rotate_to_basis(&basis).unwrap().probabilities();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
        let minus = StateVector::from_amplitudes(vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let p = minus.rotate_to_basis(&basis).unwrap().probabilities();
        assert!(p[0].abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
        assert!(MeasurementBasis::new("ZZ".parse().unwrap(), Component::Real).is_err());
    }

    #[test]
    fn pivot_is_lowest_nondiagonal_site() {
        let b = MeasurementBasis::new("ZIYX".parse().unwrap(), Component::Imag).unwrap();
        assert_eq!(b.pivot, 2);
    }

    #[test]
    fn sample_basis_state_is_deterministic() {
        let s = StateVector::basis(SpinConfig::parse("01").unwrap()).unwrap();
        let samples = s.sample(50, 3).unwrap();
        assert!(samples.iter().all(|z| z.to_string() == "01"));
        assert!(s.sample(0, 3).is_err());
    }

    #[test]
    fn sample_plus_is_fair() {
        let shots = 100_000;
        let s = StateVector::init_plus(1).unwrap();
        let zeros = s.sample_indices(shots, 11).unwrap().iter().filter(|&&i| i == 0).count();
        let f = zeros as f64 / shots as f64;
        let sigma = 0.5 / (shots as f64).sqrt();
        assert!((f - 0.5).abs() < 3.0 * sigma, "frequency {f}");
    }

    #[test]
    fn expectation_examples() {
        let s = StateVector::init_plus(2).unwrap();
        assert!((s.exact_expectation(&sum(2, &[(1.0, "XI"), (1.0, "IX")])).unwrap() - 2.0).abs() < 1e-12);
        assert!(s.exact_expectation(&sum(2, &[(1.0, "ZZ")])).unwrap().abs() < 1e-12);
    }

    #[test]
    fn exact_evolution_examples() {
        let psi0 = StateVector::random(3, 5).unwrap();
        let h = sum(3, &[(0.7, "XXI"), (-0.3, "IZY"), (1.1, "ZIZ")]);
        let same = exact_evolution(&h, 0.0, &psi0).unwrap();
        assert!(fidelity(&same, &psi0).unwrap() > 1.0 - 1e-12);
        let out = exact_evolution(&h, 2.3, &psi0).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10);

        let plus = StateVector::init_plus(1).unwrap();
        let out = exact_evolution(&sum(1, &[(1.0, "Z")]), PI / 2.0, &plus).unwrap();
        let minus = StateVector::from_amplitudes(vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert!((fidelity(&out, &minus).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dump_round_trip() {
        let s = StateVector::random(3, 9).unwrap();
        let back = StateVector::from_le_bytes(&s.to_le_bytes()).unwrap();
        for (a, b) in s.amplitudes().iter().zip(back.amplitudes()) {
            assert!(close(*a, *b));
        }
        assert_eq!(&s.to_le_bytes()[..8], &s.amplitudes()[0].re.to_le_bytes());
    }
}

//! Expectation values of the hybrid state and the TDVP equation-of-motion terms.
//!
//! Every quantity is a sum `Σ_{z,z'} ψ^q(z)* ψ^q(z') ⟨z|P|z'⟩ f(z, z')` over a
//! Pauli string `P` of the circuit register. A [`Quadrature`] holds the weighted
//! configuration pairs that approximate this sum, either exactly (every
//! connected pair) or from measurement samples. The EOM assembly evaluates all
//! functionals of one string from the same quadrature, so the sample set is
//! shared across parameter indices.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::ansatz::{meanfield_log_raw, sample_bath_raw, Ansatz, AnsatzState};
use crate::error::{CqdError, Result};
use crate::models::PartitionLabels;
use crate::pauli::{PauliString, PauliSum, SpinConfig};
use crate::rng::derive_seed;
use crate::statevector::{Component, MeasurementBasis, StateVector, STATE_CAP};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// One weighted configuration pair. `count` is the number of measurement
/// outcomes that produced it (zero in exact mode).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadEntry {
    pub z: u64,
    pub zp: u64,
    pub weight: Complex64,
    pub count: u32,
}

/// Weighted pairs whose sum `Σ w·f(z, z')` estimates a Pauli functional.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Quadrature {
    pub entries: Vec<QuadEntry>,
}

impl Quadrature {
    pub fn apply(&self, mut f: impl FnMut(u64, u64) -> Complex64) -> Complex64 {
        self.entries.iter().map(|e| e.weight * f(e.z, e.zp)).sum()
    }

    fn from_map(map: BTreeMap<(u64, u64), (Complex64, u32)>) -> Self {
        Self {
            entries: map
                .into_iter()
                .map(|((z, zp), (weight, count))| QuadEntry { z, zp, weight, count })
                .collect(),
        }
    }
}

/// Every connected pair with weight `ψ*(z) ψ(z') ⟨z|P|z'⟩`.
pub fn exact_quadrature(state: &StateVector, p: &PauliString) -> Result<Quadrature> {
    CqdError::check_len(state.n_sites(), p.len())?;
    let amps = state.amplitudes();
    let mut entries = Vec::with_capacity(amps.len());
    for (zp, a) in amps.iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        let (z, ph) = p.apply_index(zp as u64);
        let w = amps[z as usize].conj() * a * ph.to_complex();
        if w != ZERO {
            entries.push(QuadEntry {
                z,
                zp: zp as u64,
                weight: w,
                count: 0,
            });
        }
    }
    if !p.is_diagonal() {
        entries.sort_by_key(|e| (e.z, e.zp));
    }
    Ok(Quadrature { entries })
}

/// Pairs `(z, z)` weighted by `⟨z|P|z⟩` times the empirical frequency of `z`.
pub fn diagonal_quadrature(p: &PauliString, samples: &[u64]) -> Result<Quadrature> {
    if !p.is_diagonal() {
        return Err(CqdError::precondition(format!("{p} is not diagonal")));
    }
    let n = samples.len() as f64;
    let mut map: BTreeMap<(u64, u64), (Complex64, u32)> = BTreeMap::new();
    for &z in samples {
        let (_, ph) = p.apply_index(z);
        let e = map.entry((z, z)).or_insert((ZERO, 0));
        e.0 += ph.to_complex() / n;
        e.1 += 1;
    }
    Ok(Quadrature::from_map(map))
}

/// Pairs from the real- and imaginary-component bases of a non-diagonal string.
///
/// An outcome in either basis fixes the pair class `{z, z̃}` (pivot bit
/// cleared gives `z`) and a sign from the pivot bit. Real-basis outcomes
/// contribute `±½ [f(z,z̃) + f(z̃,z)]`, imaginary-basis outcomes
/// `±(i/2) [f(z,z̃) - f(z̃,z)]`.
pub fn offdiagonal_quadrature(
    basis_real: &MeasurementBasis,
    real_samples: &[u64],
    imag_samples: &[u64],
) -> Result<Quadrature> {
    let p = basis_real.string;
    let n = p.len();
    let pm = 1u64 << (n - 1 - basis_real.pivot);
    let mut map: BTreeMap<(u64, u64), (Complex64, u32)> = BTreeMap::new();
    let mut add = |samples: &[u64], factor: Complex64| {
        let scale = 0.5 / samples.len() as f64;
        for &o in samples {
            let sign = if o & pm == 0 { 1.0 } else { -1.0 };
            let z = o & !pm;
            let w = z ^ p.x_mask();
            let a = map.entry((z, w)).or_insert((ZERO, 0));
            a.0 += factor * (sign * scale);
            a.1 += 1;
            let b = map.entry((w, z)).or_insert((ZERO, 0));
            b.0 += factor.conj() * (sign * scale);
            b.1 += 1;
        }
    };
    add(real_samples, Complex64::new(1.0, 0.0));
    add(imag_samples, I);
    Ok(Quadrature::from_map(map))
}

/// How a single functional is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampling {
    Exact,
    Shots { shots: usize, seed: u64 },
}

/// Sampled quadrature for `P` using `shots` outcomes per basis.
pub fn sampled_quadrature(state: &StateVector, p: &PauliString, shots: usize, seed: u64) -> Result<Quadrature> {
    CqdError::check_len(state.n_sites(), p.len())?;
    if p.is_diagonal() {
        let samples = state.sample_indices(shots, derive_seed(seed, &[0]))?;
        return diagonal_quadrature(p, &samples);
    }
    let re = MeasurementBasis::new(*p, Component::Real)?;
    let im = MeasurementBasis::new(*p, Component::Imag)?;
    let rs = state.rotate_to_basis(&re)?.sample_indices(shots, derive_seed(seed, &[1]))?;
    let is = state.rotate_to_basis(&im)?.sample_indices(shots, derive_seed(seed, &[2]))?;
    offdiagonal_quadrature(&re, &rs, &is)
}

/// `Σ_{z,z'} ψ*(z) ψ(z') ⟨z|P|z'⟩ f(z, z')`.
pub fn estimate_pauli_functional(
    state: &StateVector,
    p: &PauliString,
    f: impl FnMut(SpinConfig, SpinConfig) -> Complex64,
    mode: Sampling,
) -> Result<Complex64> {
    let n = state.n_sites();
    let quad = match mode {
        Sampling::Exact => exact_quadrature(state, p)?,
        Sampling::Shots { shots, seed } => sampled_quadrature(state, p, shots, seed)?,
    };
    let mut f = f;
    Ok(quad.apply(|z, zp| {
        f(
            SpinConfig::new(z, n).expect("index in range"),
            SpinConfig::new(zp, n).expect("index in range"),
        )
    }))
}

/// Shot budget and seeds of the sampled estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotSettings {
    pub shots_per_basis: usize,
    /// Bath configurations drawn per circuit outcome (partitioned ansatz only).
    pub bath_samples: usize,
    pub master_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorMode {
    Exact,
    Shots(ShotSettings),
}

/// A measurement setting of the plan; `None` is the computational basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannedBasis {
    pub basis: Option<MeasurementBasis>,
    pub seed: u64,
}

/// Bases measured at one evaluation of the equations of motion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotPlan {
    pub shots_per_basis: usize,
    pub bases: Vec<PlannedBasis>,
    /// Non-diagonal circuit-register strings in plan order; string `j` owns
    /// bases `2j + 1` (real) and `2j + 2` (imaginary).
    pub strings: Vec<PauliString>,
}

impl ShotPlan {
    pub fn n_bases(&self) -> usize {
        self.bases.len()
    }
}

/// Deduplicated non-diagonal circuit-register strings of `H` and `H̃`, two
/// bases each, plus the computational basis at index 0.
pub fn build_shot_plan(
    h: &PauliSum,
    h_eff: &PauliSum,
    partition: &PartitionLabels,
    shots: usize,
    step_index: u64,
    master_seed: u64,
) -> Result<ShotPlan> {
    if shots == 0 {
        return Err(CqdError::precondition("shots_per_basis must be at least 1"));
    }
    CqdError::check_len(partition.n_total(), h.n_sites())?;
    CqdError::check_len(partition.n_quantum(), h_eff.n_sites())?;
    let mut set = BTreeSet::new();
    for (_, p) in h.terms() {
        let (pq, _) = partition.factor(p);
        if !pq.is_diagonal() {
            set.insert(pq);
        }
    }
    for (_, p) in h_eff.terms() {
        if !p.is_diagonal() {
            set.insert(*p);
        }
    }
    let strings: Vec<PauliString> = set.into_iter().collect();
    let seed = |idx: usize| derive_seed(master_seed, &[step_index, idx as u64]);
    let mut bases = vec![PlannedBasis {
        basis: None,
        seed: seed(0),
    }];
    for p in &strings {
        for component in [Component::Real, Component::Imag] {
            let idx = bases.len();
            bases.push(PlannedBasis {
                basis: Some(MeasurementBasis::new(*p, component)?),
                seed: seed(idx),
            });
        }
    }
    Ok(ShotPlan {
        shots_per_basis: shots,
        bases,
        strings,
    })
}

/// Quantities needed to form `S θ̇ = C - T`.
#[derive(Clone, Debug, PartialEq)]
pub struct EomTerms {
    pub s: DMatrix<f64>,
    pub c: DVector<f64>,
    pub t: DVector<f64>,
    /// `⟨ψ|ψ⟩` of the unnormalized hybrid state.
    pub norm: f64,
    /// `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩`.
    pub energy: f64,
}

/// Single-register EOM terms for a Jastrow correction.
pub fn assemble_eom(
    state: &StateVector,
    h: &PauliSum,
    h_eff: &PauliSum,
    theta: &AnsatzState,
    mode: &EstimatorMode,
    eval_index: u64,
) -> Result<EomTerms> {
    let n = state.n_sites();
    if theta.ansatz != (Ansatz::Jastrow { n }) {
        return Err(CqdError::precondition(format!(
            "expected a jastrow ansatz on {n} sites, got {:?}",
            theta.ansatz
        )));
    }
    assemble(state, h, h_eff, &PartitionLabels::all_quantum(n), theta, mode, eval_index)
}

/// EOM terms for a circuit on the quantum partition times a Jastrow and
/// network mean-field correction, with the bath summed analytically
/// (exact mode) or by sampling from the mean-field marginals.
pub fn assemble_eom_partitioned(
    state: &StateVector,
    h: &PauliSum,
    h_eff: &PauliSum,
    partition: &PartitionLabels,
    theta: &AnsatzState,
    mode: &EstimatorMode,
    eval_index: u64,
) -> Result<EomTerms> {
    if theta.ansatz.n_quantum() != partition.n_quantum() || theta.ansatz.n_bath() != partition.n_bath() {
        return Err(CqdError::precondition(format!(
            "ansatz {:?} does not match a {}+{} partition",
            theta.ansatz,
            partition.n_quantum(),
            partition.n_bath()
        )));
    }
    assemble(state, h, h_eff, partition, theta, mode, eval_index)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Norm,
    Energy,
    TimeDerivative,
}

#[derive(Clone, Copy, Debug)]
struct Term {
    coeff: f64,
    bath: PauliString,
    role: Role,
}

/// Per quantum configuration: Jastrow log-amplitude, bath fields, and the
/// mean-field normalization `Σ_i ½ ln(e^{2Re λ_i} + e^{-2Re λ_i})`.
struct QuantumCache {
    phi1: Complex64,
    lambda: Vec<Complex64>,
}

impl QuantumCache {
    fn phi2(&self, zc: u64) -> Complex64 {
        if self.lambda.is_empty() {
            ZERO
        } else {
            meanfield_log_raw(&self.lambda, zc)
        }
    }
}

fn assemble(
    state: &StateVector,
    h: &PauliSum,
    h_eff: &PauliSum,
    partition: &PartitionLabels,
    theta: &AnsatzState,
    mode: &EstimatorMode,
    eval_index: u64,
) -> Result<EomTerms> {
    let (nq, nc) = (partition.n_quantum(), partition.n_bath());
    CqdError::check_len(nq, state.n_sites())?;
    CqdError::check_len(partition.n_total(), h.n_sites())?;
    CqdError::check_len(nq, h_eff.n_sites())?;
    let bath_identity = PauliString::identity(nc);

    // terms grouped by their circuit-register factor
    let mut groups: BTreeMap<PauliString, Vec<Term>> = BTreeMap::new();
    groups.entry(PauliString::identity(nq)).or_default().push(Term {
        coeff: 1.0,
        bath: bath_identity,
        role: Role::Norm,
    });
    for (c, p) in h.terms() {
        let (pq, pc) = partition.factor(p);
        groups.entry(pq).or_default().push(Term {
            coeff: *c,
            bath: pc,
            role: Role::Energy,
        });
    }
    for (c, p) in h_eff.terms() {
        groups.entry(*p).or_default().push(Term {
            coeff: *c,
            bath: bath_identity,
            role: Role::TimeDerivative,
        });
    }

    // one quadrature per circuit string, plus the seed its bath draws derive from
    let mut quads: Vec<(PauliString, Quadrature, u64)> = Vec::with_capacity(groups.len());
    match mode {
        EstimatorMode::Exact => {
            for pq in groups.keys() {
                quads.push((*pq, exact_quadrature(state, pq)?, 0));
            }
        }
        EstimatorMode::Shots(cfg) => {
            if nc > 0 && cfg.bath_samples == 0 {
                return Err(CqdError::precondition("bath_samples must be at least 1"));
            }
            let plan = build_shot_plan(h, h_eff, partition, cfg.shots_per_basis, eval_index, cfg.master_seed)?;
            let comp = state.sample_indices(plan.shots_per_basis, plan.bases[0].seed)?;
            let mut offdiag = HashMap::new();
            for (j, p) in plan.strings.iter().enumerate() {
                let (re, im) = (&plan.bases[2 * j + 1], &plan.bases[2 * j + 2]);
                let rs = state
                    .rotate_to_basis(&re.basis.expect("planned basis"))?
                    .sample_indices(plan.shots_per_basis, re.seed)?;
                let is = state
                    .rotate_to_basis(&im.basis.expect("planned basis"))?
                    .sample_indices(plan.shots_per_basis, im.seed)?;
                let q = offdiagonal_quadrature(&re.basis.expect("planned basis"), &rs, &is)?;
                offdiag.insert(*p, (q, re.seed));
            }
            for pq in groups.keys() {
                if pq.is_diagonal() {
                    quads.push((*pq, diagonal_quadrature(pq, &comp)?, plan.bases[0].seed));
                } else {
                    let (q, seed) = offdiag.remove(pq).expect("every non-diagonal string is planned");
                    quads.push((*pq, q, seed));
                }
            }
        }
    }

    // per quantum configuration caches and the log-amplitude shift
    let mut cache: HashMap<u64, QuantumCache> = HashMap::new();
    for (_, q, _) in &quads {
        for e in &q.entries {
            for z in [e.z, e.zp] {
                cache.entry(z).or_insert_with(|| QuantumCache {
                    phi1: theta.quantum_log(z),
                    lambda: theta.lambda(z),
                });
            }
        }
    }
    let shift = cache
        .values()
        .map(|c| c.phi1.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { 0.0 };

    // accumulators keyed by (z_q, z_c): [norm, energy, time-derivative]
    let mut acc: BTreeMap<(u64, u64), [Complex64; 3]> = BTreeMap::new();
    let all_bath: Vec<u64> = (0..1u64 << nc).collect();
    let mut bath: Vec<(u64, f64)> = Vec::new();
    for (pq, quad) in quads.iter().map(|(p, q, s)| (p, (q, s))) {
        let (quad, bath_seed) = quad;
        let terms = &groups[pq];
        for (ei, e) in quad.entries.iter().enumerate() {
            let cz = &cache[&e.z];
            let czp = &cache[&e.zp];

            bath.clear();
            match mode {
                _ if nc == 0 => bath.push((0, 1.0)),
                EstimatorMode::Exact => {
                    bath.extend(all_bath.iter().map(|&zc| (zc, (2.0 * cz.phi2(zc).re).exp())));
                }
                EstimatorMode::Shots(cfg) => {
                    let draws = e.count as usize * cfg.bath_samples;
                    let beta = 1.0 / draws as f64;
                    let mut counts: BTreeMap<u64, u32> = BTreeMap::new();
                    for zc in sample_bath_raw(&cz.lambda, draws, derive_seed(*bath_seed, &[ei as u64])) {
                        *counts.entry(zc).or_insert(0) += 1;
                    }
                    bath.extend(counts.into_iter().map(|(zc, k)| (zc, k as f64 * beta)));
                }
            }

            let n1 = (2.0 * (cz.phi1.re - shift)).exp();
            let u = (cz.phi1.conj() + czp.phi1 - 2.0 * shift).exp();
            for &(zc, beta) in &bath {
                let slot = acc.entry((e.z, zc)).or_insert([ZERO; 3]);
                let phi2 = if nc > 0 { cz.phi2(zc) } else { ZERO };
                for term in terms {
                    match term.role {
                        Role::Norm => slot[0] += e.weight * (term.coeff * n1 * beta),
                        Role::TimeDerivative => slot[2] += -I * e.weight * (term.coeff * n1 * beta),
                        Role::Energy => {
                            let ratio = if nc == 0 {
                                Complex64::new(1.0, 0.0)
                            } else {
                                let (zt, s) = term.bath.apply_index(zc);
                                s.conj().to_complex() * (czp.phi2(zt) - phi2).exp()
                            };
                            slot[1] += e.weight * u * ratio * (term.coeff * beta);
                        }
                    }
                }
            }
        }
    }

    reduce(&acc, theta, shift)
}

/// Contracts the accumulated weights with the log-derivatives `O_k(z)`.
fn reduce(acc: &BTreeMap<(u64, u64), [Complex64; 3]>, theta: &AnsatzState, shift: f64) -> Result<EomTerms> {
    let k = theta.len();
    let rows = acc.len();
    let mut r = DMatrix::<f64>::zeros(2 * rows, k);
    let mut norm = 0.0;
    let mut b = vec![ZERO; k];
    let mut e = ZERO;
    let mut f = vec![ZERO; k];
    let mut d = ZERO;
    let mut dk = vec![ZERO; k];
    let mut o = vec![ZERO; k];
    for (row, (&(zq, zc), a)) in acc.iter().enumerate() {
        theta.log_and_grad_into(zq, zc, &mut o);
        let a0 = a[0].re.max(0.0);
        norm += a0;
        e += a[1];
        d += a[2];
        let sq = a0.sqrt();
        for (j, oj) in o.iter().enumerate() {
            let oc = oj.conj();
            b[j] += oc * a0;
            f[j] += oc * a[1];
            dk[j] += oc * a[2];
            r[(2 * row, j)] = sq * oj.re;
            r[(2 * row + 1, j)] = sq * oj.im;
        }
    }
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(CqdError::NonFinite("hybrid norm"));
    }
    let g = r.tr_mul(&r);
    let n2 = norm * norm;
    let mut s = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            s[(i, j)] = g[(i, j)] / norm - (b[i] * b[j].conj()).re / n2;
        }
    }
    let c = DVector::from_iterator(k, (0..k).map(|i| (f[i] / norm - b[i] * e / n2).im));
    let t = DVector::from_iterator(k, (0..k).map(|i| (dk[i] / norm - b[i] * d / n2).re));
    let terms = EomTerms {
        s,
        c,
        t,
        norm: norm * (2.0 * shift).exp(),
        energy: e.re / norm,
    };
    if terms.s.iter().chain(terms.c.iter()).chain(terms.t.iter()).any(|x| !x.is_finite())
        || !terms.energy.is_finite()
    {
        return Err(CqdError::NonFinite("equation-of-motion terms"));
    }
    Ok(terms)
}

/// Materialized hybrid wavefunction on the full register, normalized, together
/// with its norm before normalization.
pub fn hybrid_statevector(
    state: &StateVector,
    theta: &AnsatzState,
    partition: &PartitionLabels,
) -> Result<(StateVector, f64)> {
    let (nq, nc) = (partition.n_quantum(), partition.n_bath());
    CqdError::check_len(nq, state.n_sites())?;
    CqdError::check_len(theta.ansatz.n_quantum(), nq)?;
    CqdError::check_len(theta.ansatz.n_bath(), nc)?;
    let n = partition.n_total();
    if n > STATE_CAP {
        return Err(CqdError::CapExceeded { n, cap: STATE_CAP });
    }
    let mut logs = vec![ZERO; 1 << n];
    let mut shift = f64::NEG_INFINITY;
    for zq in 0..1u64 << nq {
        let c = QuantumCache {
            phi1: theta.quantum_log(zq),
            lambda: theta.lambda(zq),
        };
        for zc in 0..1u64 << nc {
            let phi = c.phi1 + c.phi2(zc);
            shift = shift.max(phi.re);
            logs[partition.join(zq, zc) as usize] = phi;
        }
    }
    let mut amps = vec![ZERO; 1 << n];
    let mut norm = 0.0;
    for full in 0..1u64 << n {
        let (zq, _) = partition.split(full);
        let a = state.amplitudes()[zq as usize] * (logs[full as usize] - shift).exp();
        norm += a.norm_sqr();
        amps[full as usize] = a;
    }
    let raw = norm * (2.0 * shift).exp();
    Ok((StateVector::from_amplitudes(amps)?, raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_tfim_chain;
    use crate::models::build_tfim_j1j2;

    #[test]
    fn identity_and_x_examples() {
        let s = StateVector::random(3, 1).unwrap();
        let one = |_: SpinConfig, _: SpinConfig| Complex64::new(1.0, 0.0);
        let v = estimate_pauli_functional(&s, &PauliString::identity(3), one, Sampling::Exact).unwrap();
        assert!((v - 1.0).norm() < 1e-12);
        let plus = StateVector::init_plus(1).unwrap();
        let x: PauliString = "X".parse().unwrap();
        let v = estimate_pauli_functional(&plus, &x, one, Sampling::Exact).unwrap();
        assert!((v - 1.0).norm() < 1e-12);
        let v = estimate_pauli_functional(&plus, &x, one, Sampling::Shots { shots: 10, seed: 3 }).unwrap();
        assert!((v - 1.0).norm() < 1e-12);
        assert!(estimate_pauli_functional(&plus, &x, one, Sampling::Shots { shots: 0, seed: 3 }).is_err());
    }

    #[test]
    fn shot_plan_counts() {
        let tfim = build_tfim_chain(10, 1.0, 2.0, true).unwrap();
        let lab = PartitionLabels::all_quantum(10);
        for g in &tfim.groups {
            let plan = build_shot_plan(&tfim.full, &g.scaled(2.0), &lab, 100, 0, 1).unwrap();
            assert_eq!(plan.n_bases(), 21);
        }
        let j1j2 = build_tfim_j1j2(3, 3, 1.0, 0.5, 0.1).unwrap();
        let plan = build_shot_plan(&j1j2.full, &j1j2.groups[0], &PartitionLabels::all_quantum(9), 1, 0, 1).unwrap();
        assert_eq!(plan.n_bases(), 19);

        let diag = PauliSum::new(2, [(1.0, "ZZ".parse().unwrap())]).unwrap();
        let plan = build_shot_plan(&diag, &diag, &PartitionLabels::all_quantum(2), 5, 0, 1).unwrap();
        assert_eq!(plan.n_bases(), 1);
        assert!(build_shot_plan(&diag, &diag, &PartitionLabels::all_quantum(2), 0, 0, 1).is_err());

        let a = build_shot_plan(&tfim.full, &tfim.groups[0], &lab, 10, 4, 9).unwrap();
        let b = build_shot_plan(&tfim.full, &tfim.groups[0], &lab, 10, 5, 9).unwrap();
        assert_eq!(a, build_shot_plan(&tfim.full, &tfim.groups[0], &lab, 10, 4, 9).unwrap());
        assert_ne!(a.bases[0].seed, b.bases[0].seed);
    }

    #[test]
    fn zero_jastrow_variance_diagonal() {
        let n = 3;
        let s = StateVector::random(n, 5).unwrap();
        let h = PauliSum::new(3, [(0.4, "XYZ".parse().unwrap()), (-1.0, "ZZI".parse().unwrap())]).unwrap();
        let theta = Ansatz::Jastrow { n }.init(0, 0.1).unwrap();
        let terms = assemble_eom(&s, &h, &h, &theta, &EstimatorMode::Exact, 0).unwrap();
        assert!((terms.norm - 1.0).abs() < 1e-12);
        for i in 0..n {
            let zi = PauliSum::new(n, [(1.0, PauliString::from_sparse(n, &[(i, crate::Letter::Z)]).unwrap())]).unwrap();
            let m = s.exact_expectation(&zi).unwrap();
            assert!((terms.s[(2 * i, 2 * i)] - (1.0 - m * m)).abs() < 1e-12);
        }
        for (c, t) in terms.c.iter().zip(terms.t.iter()) {
            assert!((c - t).abs() < 1e-10);
        }
        let e = s.exact_expectation(&h).unwrap();
        assert!((terms.energy - e).abs() < 1e-12);
    }

    #[test]
    fn hybrid_statevector_identity_at_zero() {
        let s = StateVector::random(3, 2).unwrap();
        let theta = Ansatz::Jastrow { n: 3 }.init(0, 0.1).unwrap();
        let (h, raw) = hybrid_statevector(&s, &theta, &PartitionLabels::all_quantum(3)).unwrap();
        assert!((raw - 1.0).abs() < 1e-12);
        for (a, b) in h.amplitudes().iter().zip(s.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}

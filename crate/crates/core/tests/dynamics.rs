mod common;

use common::*;
use cqd::models::{
    build_partitioned_chain, build_tfim_chain, build_tfim_j1j2, trotter_schedule, HamiltonianSplit, PartitionLabels,
    ScheduleCursor,
};
use cqd::statevector::{exact_evolution, fidelity, Component, MeasurementBasis};
use cqd::{PauliSum, StateVector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn dense_exp(h: &PauliSum, t: f64) -> DMatrix<Complex64> {
    let m = h.to_dense_matrix(8).unwrap();
    let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    // real symmetric embedding keeps this independent of the propagator under test
    let n = herm.nrows();
    let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = herm[(i, j)];
            big[(i, j)] = v.re;
            big[(i + n, j + n)] = v.re;
            big[(i, j + n)] = -v.im;
            big[(i + n, j)] = v.im;
        }
    }
    let eig = big.symmetric_eigen();
    let mut u = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..2 * n {
        let phase = Complex64::from_polar(1.0, -eig.eigenvalues[k] * t);
        let v = eig.eigenvectors.column(k);
        let c: Vec<Complex64> = (0..n).map(|i| Complex64::new(v[i], v[i + n])).collect();
        for i in 0..n {
            for j in 0..n {
                // each complex eigenvector appears twice in the embedding
                u[(i, j)] += phase * c[i] * c[j].conj() * 0.5;
            }
        }
    }
    u
}

fn apply(u: &DMatrix<Complex64>, s: &StateVector) -> Vec<Complex64> {
    let v = nalgebra::DVector::from_column_slice(s.amplitudes());
    (u * v).iter().copied().collect()
}

fn close(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

// ZZ pairs commute with X on every site
fn diagonal_sum(r: &mut impl Rng, n: usize) -> PauliSum {
    let terms: Vec<(f64, cqd::PauliString)> = (0..2 * n)
        .map(|_| {
            let i = r.random_range(0..n);
            let j = (i + r.random_range(1..n)) % n;
            let p = cqd::PauliString::from_sparse(n, &[(i, cqd::Letter::Z), (j, cqd::Letter::Z)]).unwrap();
            (r.random_range(-1.0..1.0), p)
        })
        .collect();
    PauliSum::new(n, terms).unwrap()
}

#[test]
fn one_group_schedule_is_exact() {
    let mut r = rng(11);
    for n in [2, 4, 6] {
        let h = diagonal_sum(&mut r, n).add(&PauliSum::new(n, [(0.3, "X".repeat(n).parse().unwrap())]).unwrap()).unwrap();
        assert!(h.is_commuting());
        let split = HamiltonianSplit::new(h.clone(), vec![h.clone()], PartitionLabels::all_quantum(n)).unwrap();
        let psi0 = StateVector::random(n, n as u64).unwrap();
        let sched = trotter_schedule(&split, 2, 0.2, 1.0).unwrap();
        let mut cursor = ScheduleCursor::new(sched, psi0.clone()).unwrap();
        for t in [0.0, 0.13, 0.5, 1.0] {
            let (s, _) = cursor.state_and_hamiltonian_at(t).unwrap();
            assert!(close(s.amplitudes(), &apply(&dense_exp(&h, t), &psi0)) < 1e-10, "n={n} t={t}");
        }
    }
}

#[test]
fn exact_evolution_matches_dense_and_conserves_energy() {
    let mut r = rng(12);
    for n in 1..=4 {
        let h = random_sum(&mut r, n, 5);
        let psi0 = StateVector::random(n, 3).unwrap();
        let e0 = psi0.exact_expectation(&h).unwrap();
        for k in 0..6 {
            let t = 0.37 * k as f64;
            let s = exact_evolution(&h, t, &psi0).unwrap();
            assert!(close(s.amplitudes(), &apply(&dense_exp(&h, t), &psi0)) < 1e-10);
            assert!((s.exact_expectation(&h).unwrap() - e0).abs() < 1e-10);
        }
    }
}

#[test]
fn one_trotter_step_is_the_product_formula() {
    for n in [2, 3, 4] {
        let split = build_tfim_chain(n, 0.8, 1.1, false).unwrap();
        let (hx, hz) = (&split.groups[0], &split.groups[1]);
        let dt = 0.3;
        let psi0 = StateVector::random(n, 9).unwrap();
        let ev = |h: &PauliSum, tau: f64, s: Vec<Complex64>| {
            apply(&dense_exp(h, tau), &StateVector::from_amplitudes(s).unwrap())
        };
        let a0 = psi0.amplitudes().to_vec();
        let first = ev(hz, dt, ev(hx, dt, a0.clone()));
        let second = ev(hx, dt / 2.0, ev(hz, dt, ev(hx, dt / 2.0, a0)));
        for (order, want) in [(1u8, first), (2, second)] {
            let mut cursor = ScheduleCursor::new(trotter_schedule(&split, order, dt, dt).unwrap(), psi0.clone()).unwrap();
            let (got, _) = cursor.state_and_hamiltonian_at(dt).unwrap();
            assert!(close(got.amplitudes(), &want) < 1e-12, "n={n} order={order}");
        }
    }
}

#[test]
fn builders_split_into_circuit_and_omitted_terms() {
    let splits = [
        build_tfim_chain(5, 1.0, 2.0, true).unwrap(),
        build_tfim_j1j2(2, 3, 1.0, 0.5, 0.1).unwrap(),
        build_partitioned_chain(2, 2, 1.0, 0.25, 0.1, 1.0).unwrap(),
    ];
    for s in &splits {
        let embedded = s
            .quantum_part
            .terms()
            .iter()
            .map(|(w, p)| (*w, s.partition.embed_quantum(p).unwrap()));
        let quantum = PauliSum::new(s.full.n_sites(), embedded).unwrap();
        let rebuilt = quantum.add(&s.omitted_terms().unwrap()).unwrap();
        let d = s.full.to_dense_matrix(8).unwrap() - rebuilt.to_dense_matrix(8).unwrap();
        assert!(d.camax() < 1e-14);
        for g in &s.groups {
            assert!(g.is_commuting());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn cursor_refinement(t in 0.0f64..1.5, s in 0.0f64..0.5, order in 1u8..=2) {
        let split = build_tfim_chain(4, 1.0, 2.0, true).unwrap();
        let sched = trotter_schedule(&split, order, 0.25, 2.0).unwrap();
        let psi0 = StateVector::init_plus(4).unwrap();
        let mut a = ScheduleCursor::new(sched.clone(), psi0.clone()).unwrap();
        let mut b = ScheduleCursor::new(sched, psi0).unwrap();
        a.state_and_hamiltonian_at(t).unwrap();
        let (sa, _) = a.state_and_hamiltonian_at(t + s).unwrap();
        let (sb, _) = b.state_and_hamiltonian_at(t + s).unwrap();
        prop_assert!(close(sa.amplitudes(), sb.amplitudes()) < 1e-12);
    }

    #[test]
    fn basis_rotation_is_unitary(seed in 0u64..1000, n in 1usize..6, imag in any::<bool>()) {
        let mut r = rng(seed);
        let p = loop {
            let p = random_string(&mut r, n);
            if !p.is_diagonal() { break p; }
        };
        let comp = if imag { Component::Imag } else { Component::Real };
        let s = StateVector::random(n, seed).unwrap();
        let rot = s.rotate_to_basis(&MeasurementBasis::new(p, comp).unwrap()).unwrap();
        prop_assert!((rot.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_replays(seed in any::<u64>()) {
        let s = StateVector::random(4, 1).unwrap();
        prop_assert_eq!(s.sample_indices(200, seed).unwrap(), s.sample_indices(200, seed).unwrap());
    }
}

#[test]
fn fidelity_is_phase_blind() {
    let s = StateVector::random(3, 5).unwrap();
    let rotated: Vec<Complex64> = s.amplitudes().iter().map(|a| a * Complex64::from_polar(1.0, 0.7)).collect();
    let f = fidelity(&s, &StateVector::from_amplitudes(rotated).unwrap()).unwrap();
    assert!((f - 1.0).abs() < 1e-12);
}

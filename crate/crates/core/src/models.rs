//! Hamiltonian builders and the Trotter-to-effective-Hamiltonian schedule.

use crate::error::{CqdError, Result};
use crate::pauli::{Letter, PauliString, PauliSum};
use crate::statevector::StateVector;

/// Assignment of register sites to the quantum partition (simulated as a
/// circuit) and the classical bath.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionLabels {
    n_total: usize,
    quantum: Vec<usize>,
    bath: Vec<usize>,
}

impl PartitionLabels {
    /// Every site belongs to the quantum partition.
    pub fn all_quantum(n: usize) -> Self {
        Self {
            n_total: n,
            quantum: (0..n).collect(),
            bath: Vec::new(),
        }
    }

    pub fn new(n_total: usize, quantum: Vec<usize>) -> Result<Self> {
        let mut q = quantum;
        q.sort_unstable();
        q.dedup();
        if q.is_empty() || q.iter().any(|&s| s >= n_total) {
            return Err(CqdError::precondition("quantum partition must be a nonempty subset of the register"));
        }
        let bath = (0..n_total).filter(|s| !q.contains(s)).collect();
        Ok(Self {
            n_total,
            quantum: q,
            bath,
        })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn quantum_sites(&self) -> &[usize] {
        &self.quantum
    }

    pub fn bath_sites(&self) -> &[usize] {
        &self.bath
    }

    pub fn n_quantum(&self) -> usize {
        self.quantum.len()
    }

    pub fn n_bath(&self) -> usize {
        self.bath.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.bath.is_empty()
    }

    #[inline]
    fn gather(&self, full: u64, sites: &[usize]) -> u64 {
        let n = self.n_total;
        sites
            .iter()
            .fold(0u64, |acc, &s| (acc << 1) | ((full >> (n - 1 - s)) & 1))
    }

    /// Splits a full-register index into (quantum, bath) indices.
    #[inline]
    pub fn split(&self, full: u64) -> (u64, u64) {
        (self.gather(full, &self.quantum), self.gather(full, &self.bath))
    }

    /// Inverse of [`split`](Self::split).
    #[inline]
    pub fn join(&self, zq: u64, zc: u64) -> u64 {
        let n = self.n_total;
        let mut full = 0u64;
        let nq = self.quantum.len();
        for (i, &s) in self.quantum.iter().enumerate() {
            full |= ((zq >> (nq - 1 - i)) & 1) << (n - 1 - s);
        }
        let nc = self.bath.len();
        for (i, &s) in self.bath.iter().enumerate() {
            full |= ((zc >> (nc - 1 - i)) & 1) << (n - 1 - s);
        }
        full
    }

    /// `P = P^c ⊗ P^q` factors of a full-register string.
    pub fn factor(&self, p: &PauliString) -> (PauliString, PauliString) {
        (p.restrict(&self.quantum), p.restrict(&self.bath))
    }

    pub fn embed_quantum(&self, p: &PauliString) -> Result<PauliString> {
        p.embed(&self.quantum, self.n_total)
    }
}

/// Target Hamiltonian, its circuit-implemented part, and the commuting groups
/// the circuit is Trotterized over.
#[derive(Clone, Debug)]
pub struct HamiltonianSplit {
    /// `H` on the full register.
    pub full: PauliSum,
    /// Internally commuting groups on the quantum register; they sum to `quantum_part`.
    pub groups: Vec<PauliSum>,
    /// `H̃` base on the quantum register.
    pub quantum_part: PauliSum,
    pub partition: PartitionLabels,
}

impl HamiltonianSplit {
    /// Checks the structural invariants shared by every builder.
    pub fn new(full: PauliSum, groups: Vec<PauliSum>, partition: PartitionLabels) -> Result<Self> {
        CqdError::check_len(partition.n_total(), full.n_sites())?;
        let nq = partition.n_quantum();
        let mut quantum_part = PauliSum::zero(nq);
        for g in &groups {
            CqdError::check_len(nq, g.n_sites())?;
            if let Some((a, b)) = g.first_noncommuting_pair() {
                return Err(CqdError::NonCommuting(a.to_string(), b.to_string()));
            }
            quantum_part = quantum_part.add(g)?;
        }
        for (w, p) in quantum_part.terms() {
            let embedded = partition.embed_quantum(p)?;
            if (full.coefficient(&embedded) - w).abs() > 1e-12 * w.abs().max(1.0) {
                return Err(CqdError::precondition(format!(
                    "quantum term {p} (weight {w}) is not a term of the full hamiltonian"
                )));
            }
        }
        Ok(Self {
            full,
            groups,
            quantum_part,
            partition,
        })
    }

    /// Terms of `H` left out of the circuit, on the full register.
    pub fn omitted_terms(&self) -> Result<PauliSum> {
        let mut embedded = Vec::new();
        for (w, p) in self.quantum_part.terms() {
            embedded.push((-w, self.partition.embed_quantum(p)?));
        }
        self.full
            .add(&PauliSum::new(self.full.n_sites(), embedded)?)
    }
}

fn x_field(n: usize, sites: impl IntoIterator<Item = usize>, h: f64) -> Result<Vec<(f64, PauliString)>> {
    sites
        .into_iter()
        .map(|i| Ok((-h, PauliString::from_sparse(n, &[(i, Letter::X)])?)))
        .collect()
}

fn zz_bond(n: usize, i: usize, j: usize, coupling: f64) -> Result<(f64, PauliString)> {
    Ok((-coupling, PauliString::from_sparse(n, &[(i, Letter::Z), (j, Letter::Z)])?))
}

/// `H = -h Σ X_i - J Σ Z_i Z_{i+1}`.
pub fn build_tfim_chain(l: usize, h: f64, j: f64, periodic: bool) -> Result<HamiltonianSplit> {
    if l < 2 {
        return Err(CqdError::precondition(format!("chain needs at least 2 sites, got {l}")));
    }
    let hx = PauliSum::new(l, x_field(l, 0..l, h)?)?;
    let n_bonds = if periodic { l } else { l - 1 };
    let bonds = (0..n_bonds)
        .map(|i| zz_bond(l, i, (i + 1) % l, j))
        .collect::<Result<Vec<_>>>()?;
    let hz = PauliSum::new(l, bonds)?;
    let full = hx.add(&hz)?;
    HamiltonianSplit::new(full, vec![hx, hz], PartitionLabels::all_quantum(l))
}

/// Nearest-neighbour and diagonal next-nearest-neighbour bonds of a row-major
/// grid with open boundaries.
pub fn grid_bonds(rows: usize, cols: usize) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let site = |r: usize, c: usize| r * cols + c;
    let mut nn = Vec::new();
    let mut nnn = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                nn.push((site(r, c), site(r, c + 1)));
            }
            if r + 1 < rows {
                nn.push((site(r, c), site(r + 1, c)));
            }
            if r + 1 < rows && c + 1 < cols {
                nnn.push((site(r, c), site(r + 1, c + 1)));
                nnn.push((site(r, c + 1), site(r + 1, c)));
            }
        }
    }
    (nn, nnn)
}

/// Two-dimensional TFIM with nearest (`j1`) and diagonal (`j2`) couplings. The
/// circuit part keeps the field and the nearest-neighbour bonds only.
pub fn build_tfim_j1j2(rows: usize, cols: usize, h: f64, j1: f64, j2: f64) -> Result<HamiltonianSplit> {
    if rows < 2 || cols < 2 {
        return Err(CqdError::precondition(format!("invalid grid {rows}x{cols}, need at least 2x2")));
    }
    let n = rows * cols;
    let (nn, nnn) = grid_bonds(rows, cols);
    let hx = PauliSum::new(n, x_field(n, 0..n, h)?)?;
    let hz = PauliSum::new(
        n,
        nn.iter().map(|&(a, b)| zz_bond(n, a, b, j1)).collect::<Result<Vec<_>>>()?,
    )?;
    let h2 = PauliSum::new(
        n,
        nnn.iter().map(|&(a, b)| zz_bond(n, a, b, j2)).collect::<Result<Vec<_>>>()?,
    )?;
    let full = hx.add(&hz)?.add(&h2)?;
    HamiltonianSplit::new(full, vec![hx, hz], PartitionLabels::all_quantum(n))
}

/// Open chain of `n_q` central spins with `n_c / 2` bath spins attached at each
/// end. The circuit part holds only the terms acting inside the central block.
pub fn build_partitioned_chain(
    n_q: usize,
    n_c: usize,
    j_q: f64,
    j_qc: f64,
    j_c: f64,
    h: f64,
) -> Result<HamiltonianSplit> {
    if n_q < 2 {
        return Err(CqdError::precondition(format!("quantum partition needs at least 2 sites, got {n_q}")));
    }
    if n_c % 2 != 0 {
        return Err(CqdError::precondition(format!("bath size must be even, got {n_c}")));
    }
    let n = n_q + n_c;
    let left = n_c / 2;
    let quantum: Vec<usize> = (left..left + n_q).collect();
    let is_q = |s: usize| s >= left && s < left + n_q;

    let mut terms = x_field(n, 0..n, h)?;
    for i in 0..n - 1 {
        let coupling = match (is_q(i), is_q(i + 1)) {
            (true, true) => j_q,
            (false, false) => j_c,
            _ => j_qc,
        };
        terms.push(zz_bond(n, i, i + 1, coupling)?);
    }
    let full = PauliSum::new(n, terms)?;

    let hx = PauliSum::new(n_q, x_field(n_q, 0..n_q, h)?)?;
    let hz = PauliSum::new(
        n_q,
        (0..n_q - 1).map(|i| zz_bond(n_q, i, i + 1, j_q)).collect::<Result<Vec<_>>>()?,
    )?;
    HamiltonianSplit::new(full, vec![hx, hz], PartitionLabels::new(n, quantum)?)
}

/// One piece of the piecewise-constant effective Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub duration: f64,
    /// Index into [`EffectiveSchedule::hamiltonians`].
    pub group: usize,
}

impl Segment {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Piecewise-constant `H̃(t)` whose segment-wise exact evolution reproduces a
/// Trotterized circuit.
#[derive(Clone, Debug)]
pub struct EffectiveSchedule {
    /// Scaled group Hamiltonians `m·H_k`.
    pub hamiltonians: Vec<PauliSum>,
    pub segments: Vec<Segment>,
    pub total_time: f64,
    pub trotter_step: f64,
    pub order: u8,
    n_sites: usize,
}

impl EffectiveSchedule {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn hamiltonian(&self, seg: &Segment) -> &PauliSum {
        &self.hamiltonians[seg.group]
    }

    /// Index of the segment active at `t` (right-continuous; the final
    /// segment at `t = total_time`).
    pub fn segment_index_at(&self, t: f64) -> Option<usize> {
        if self.segments.is_empty() {
            return None;
        }
        let k = self.segments.partition_point(|s| s.start <= t);
        Some(k.saturating_sub(1))
    }

    /// Segment boundaries strictly after `t`.
    pub fn next_boundary(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .map(Segment::end)
            .find(|&e| e > t)
            .unwrap_or(self.total_time)
    }
}

/// Relative tolerance used to decide that a total time is a whole number of Trotter steps.
const STEP_TOL: f64 = 1e-9;

/// Lays out the effective-Hamiltonian segments of an order-1 or order-2
/// (symmetric) product formula over `total_time`.
pub fn trotter_schedule(
    split: &HamiltonianSplit,
    order: u8,
    delta_t: f64,
    total_time: f64,
) -> Result<EffectiveSchedule> {
    if order != 1 && order != 2 {
        return Err(CqdError::precondition(format!("trotter order must be 1 or 2, got {order}")));
    }
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(CqdError::precondition("trotter step must be positive"));
    }
    if !(total_time >= 0.0 && total_time.is_finite()) {
        return Err(CqdError::precondition("total time must be non-negative"));
    }
    let steps_f = (total_time / delta_t).round();
    if (steps_f * delta_t - total_time).abs() > STEP_TOL {
        return Err(CqdError::precondition(format!(
            "total time {total_time} is not a multiple of the trotter step {delta_t}"
        )));
    }
    let steps = steps_f as usize;
    let m = split.groups.len();
    if m == 0 {
        return Err(CqdError::precondition("the quantum part has no groups"));
    }
    for g in &split.groups {
        if let Some((a, b)) = g.first_noncommuting_pair() {
            return Err(CqdError::NonCommuting(a.to_string(), b.to_string()));
        }
    }
    let scale = m as f64;
    let hamiltonians: Vec<PauliSum> = split.groups.iter().map(|g| g.scaled(scale)).collect();

    // (fraction of Δt, group) pattern of one Trotter step
    let pattern: Vec<(f64, usize)> = match (order, m) {
        (_, 1) => vec![(1.0, 0)],
        (1, _) => (0..m).map(|k| (1.0 / scale, k)).collect(),
        _ => {
            let half = 0.5 / scale;
            let mut p: Vec<(f64, usize)> = (0..m - 1).map(|k| (half, k)).collect();
            p.push((1.0 / scale, m - 1));
            p.extend((0..m - 1).rev().map(|k| (half, k)));
            p
        }
    };
    let mut offsets = Vec::with_capacity(pattern.len());
    let mut acc = 0.0;
    for &(f, _) in &pattern {
        offsets.push(acc);
        acc += f;
    }

    let mut segments = Vec::with_capacity(steps * pattern.len());
    for step in 0..steps {
        let base = step as f64 * delta_t;
        let step_end = if step + 1 == steps {
            total_time
        } else {
            (step + 1) as f64 * delta_t
        };
        for (j, &(_, group)) in pattern.iter().enumerate() {
            let start = base + offsets[j] * delta_t;
            let end = if j + 1 == pattern.len() {
                step_end
            } else {
                base + offsets[j + 1] * delta_t
            };
            segments.push(Segment {
                start,
                duration: end - start,
                group,
            });
        }
    }
    Ok(EffectiveSchedule {
        hamiltonians,
        segments,
        total_time,
        trotter_step: delta_t,
        order,
        n_sites: split.quantum_part.n_sites(),
    })
}

/// Walks an [`EffectiveSchedule`] forward, caching the state at the start of
/// the most recently visited segment.
///
/// The state at `t` is always obtained by evolving the cached segment-start
/// state by `t - start`, so results do not depend on the query history.
#[derive(Clone, Debug)]
pub struct ScheduleCursor {
    schedule: EffectiveSchedule,
    psi0: StateVector,
    cached_segment: usize,
    cached_state: StateVector,
    zero: PauliSum,
}

impl ScheduleCursor {
    pub fn new(schedule: EffectiveSchedule, psi0: StateVector) -> Result<Self> {
        CqdError::check_len(schedule.n_sites(), psi0.n_sites())?;
        let zero = PauliSum::zero(psi0.n_sites());
        Ok(Self {
            schedule,
            cached_segment: 0,
            cached_state: psi0.clone(),
            psi0,
            zero,
        })
    }

    pub fn schedule(&self) -> &EffectiveSchedule {
        &self.schedule
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.psi0
    }

    fn state_at_segment_start(&mut self, idx: usize) -> Result<StateVector> {
        if idx < self.cached_segment {
            self.cached_segment = 0;
            self.cached_state = self.psi0.clone();
        }
        while self.cached_segment < idx {
            let seg = self.schedule.segments[self.cached_segment];
            self.cached_state = self
                .cached_state
                .evolve_group(self.schedule.hamiltonian(&seg), seg.duration)?;
            self.cached_segment += 1;
        }
        Ok(self.cached_state.clone())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.schedule.total_time).contains(&t) {
            return Err(CqdError::precondition(format!(
                "time {t} outside [0, {}]",
                self.schedule.total_time
            )));
        }
        Ok(())
    }

    /// `|ψ^q(t)⟩` and the right-continuous `H̃(t)`.
    pub fn state_and_hamiltonian_at(&mut self, t: f64) -> Result<(StateVector, PauliSum)> {
        self.check_time(t)?;
        let Some(idx) = self.schedule.segment_index_at(t) else {
            return Ok((self.psi0.clone(), self.zero.clone()));
        };
        let seg = self.schedule.segments[idx];
        let start_state = self.state_at_segment_start(idx)?;
        let h = self.schedule.hamiltonian(&seg).clone();
        let tau = t - seg.start;
        let state = if tau == 0.0 {
            start_state
        } else {
            start_state.evolve_group(&h, tau)?
        };
        Ok((state, h))
    }

    /// `H̃` on the segment ending at or containing `t` (left limit).
    pub fn hamiltonian_left_of(&self, t: f64) -> PauliSum {
        self.schedule
            .segments
            .iter()
            .find(|s| s.end() >= t && s.start < t)
            .or(self.schedule.segments.first())
            .map(|s| self.schedule.hamiltonian(s).clone())
            .unwrap_or_else(|| self.zero.clone())
    }
}

/// Stateless convenience wrapper around [`ScheduleCursor`].
pub fn state_and_hamiltonian_at(
    schedule: &EffectiveSchedule,
    t: f64,
    psi0: &StateVector,
) -> Result<(StateVector, PauliSum)> {
    ScheduleCursor::new(schedule.clone(), psi0.clone())?.state_and_hamiltonian_at(t)
}

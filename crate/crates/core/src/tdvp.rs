//! Integration of the variational equations of motion `S θ̇ = C - T`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzState, Block};
use crate::error::{CqdError, Result};
use crate::estimator::{assemble_eom_partitioned, EomTerms, EstimatorMode};
use crate::models::{PartitionLabels, ScheduleCursor};
use crate::pauli::PauliSum;
use crate::statevector::StateVector;

/// Times closer than this are treated as equal when aligning sub-steps with
/// schedule and record boundaries.
pub const TIME_SNAP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Regularization {
    /// Solve `(S + εI) θ̇ = C - T`.
    Shift(f64),
    /// Pseudo-inverse discarding eigenvalues below `r · max|λ|`.
    Cutoff(f64),
}

impl Regularization {
    pub fn default_for(mode: &EstimatorMode) -> Self {
        match mode {
            EstimatorMode::Exact => Regularization::Cutoff(1e-10),
            EstimatorMode::Shots(_) => Regularization::Shift(1e-6),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Euler,
    Heun,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub method: Integrator,
    pub regularization: Regularization,
    /// Spacing of recorded trajectory points.
    pub record_interval: f64,
    /// Write a checkpoint every this many sub-steps.
    pub checkpoint_stride: Option<usize>,
    pub checkpoint_path: Option<PathBuf>,
}

impl IntegratorConfig {
    pub fn new(dt: f64, regularization: Regularization) -> Self {
        Self {
            dt,
            method: Integrator::Euler,
            regularization,
            record_interval: dt,
            checkpoint_stride: None,
            checkpoint_path: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CqdError::precondition("tdvp time step must be positive"));
        }
        if !(self.record_interval > 0.0 && self.record_interval.is_finite()) {
            return Err(CqdError::precondition("record interval must be positive"));
        }
        match self.regularization {
            Regularization::Shift(e) | Regularization::Cutoff(e) if !(e >= 0.0 && e.is_finite()) => {
                Err(CqdError::precondition("regularization strength must be non-negative"))
            }
            _ => Ok(()),
        }
    }
}

fn check_finite(terms: &EomTerms) -> Result<()> {
    if terms.s.iter().chain(terms.c.iter()).chain(terms.t.iter()).any(|x| !x.is_finite()) {
        return Err(CqdError::NonFinite("equation-of-motion terms"));
    }
    Ok(())
}

/// Regularized solve of `S x = rhs` for symmetric positive semidefinite `S`.
pub fn solve_regularized(s: &DMatrix<f64>, rhs: &DVector<f64>, reg: Regularization) -> Result<DVector<f64>> {
    if !s.is_square() {
        return Err(CqdError::Dimension {
            expected: s.nrows(),
            got: s.ncols(),
        });
    }
    CqdError::check_len(s.nrows(), rhs.len())?;
    let x = match reg {
        Regularization::Shift(eps) => {
            let shifted = s + DMatrix::identity(s.nrows(), s.ncols()) * eps;
            match shifted.clone().cholesky() {
                Some(ch) => ch.solve(rhs),
                None => pseudo_inverse_solve(&shifted, rhs, 0.0),
            }
        }
        Regularization::Cutoff(r) => pseudo_inverse_solve(s, rhs, r),
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CqdError::NonFinite("parameter velocity"));
    }
    Ok(x)
}

fn pseudo_inverse_solve(s: &DMatrix<f64>, rhs: &DVector<f64>, r: f64) -> DVector<f64> {
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let proj = eig.eigenvectors.tr_mul(rhs);
    let mut coeff = DVector::zeros(rhs.len());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l.abs() > r * top && l != 0.0 {
            coeff[i] = proj[i] / l;
        }
    }
    &eig.eigenvectors * coeff
}

/// `θ̇` from `S θ̇ = C - T`.
pub fn solve_eom(terms: &EomTerms, reg: Regularization) -> Result<DVector<f64>> {
    check_finite(terms)?;
    CqdError::check_len(terms.s.nrows(), terms.c.len())?;
    CqdError::check_len(terms.c.len(), terms.t.len())?;
    solve_regularized(&terms.s, &(&terms.c - &terms.t), reg)
}

/// The circuit half of the hybrid state.
#[derive(Clone, Debug)]
pub enum QuantumPart {
    /// Follows a Trotter schedule.
    Scheduled(ScheduleCursor),
    /// Held fixed with `H̃ = 0`.
    Frozen(StateVector),
}

impl QuantumPart {
    fn n_sites(&self) -> usize {
        match self {
            QuantumPart::Scheduled(c) => c.schedule().n_sites(),
            QuantumPart::Frozen(s) => s.n_sites(),
        }
    }

    /// State and right-continuous effective Hamiltonian at `t`.
    pub fn at(&mut self, t: f64) -> Result<(StateVector, PauliSum)> {
        match self {
            QuantumPart::Scheduled(c) => c.state_and_hamiltonian_at(t),
            QuantumPart::Frozen(s) => Ok((s.clone(), PauliSum::zero(s.n_sites()))),
        }
    }

    /// State at `t` with the Hamiltonian of the segment that ends at or contains `t`.
    fn at_left(&mut self, t: f64) -> Result<(StateVector, PauliSum)> {
        match self {
            QuantumPart::Scheduled(c) => {
                let (s, _) = c.state_and_hamiltonian_at(t)?;
                Ok((s, c.hamiltonian_left_of(t)))
            }
            QuantumPart::Frozen(_) => self.at(t),
        }
    }

    fn boundaries(&self) -> Vec<f64> {
        match self {
            QuantumPart::Scheduled(c) => c.schedule().segments.iter().map(|s| s.end()).collect(),
            QuantumPart::Frozen(_) => Vec::new(),
        }
    }

    fn shortest_segment(&self) -> f64 {
        match self {
            QuantumPart::Scheduled(c) => c
                .schedule()
                .segments
                .iter()
                .map(|s| s.duration)
                .fold(f64::INFINITY, f64::min),
            QuantumPart::Frozen(_) => f64::INFINITY,
        }
    }
}

/// Per-point summary of the equations of motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub norm: f64,
    pub energy: f64,
    pub force_norm: f64,
    pub time_force_norm: f64,
    pub min_qgt_eigenvalue: f64,
}

impl Diagnostics {
    fn from_terms(terms: &EomTerms) -> Self {
        let min = if terms.s.nrows() == 0 {
            0.0
        } else {
            terms.s.clone().symmetric_eigen().eigenvalues.min()
        };
        Self {
            norm: terms.norm,
            energy: terms.energy,
            force_norm: terms.c.norm(),
            time_force_norm: terms.t.norm(),
            min_qgt_eigenvalue: min,
        }
    }
}

/// What the driver hands to observers at every recorded time.
pub struct RecordPoint<'a> {
    pub t: f64,
    pub theta: &'a AnsatzState,
    pub quantum: &'a StateVector,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
    pub diagnostics: Vec<Diagnostics>,
    /// Error that stopped the run early, if any.
    pub failure: Option<CqdError>,
}

/// Resume point written at the checkpoint stride.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub eval_index: u64,
    pub steps: u64,
    pub theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LayoutRecord {
    ansatz: crate::ansatz::Ansatz,
    blocks: Vec<Block>,
}

pub fn layout_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".layout.json");
    PathBuf::from(s)
}

/// Last record of a checkpoint file.
pub fn read_last_checkpoint(path: &Path) -> Result<Option<Checkpoint>> {
    let reader = BufReader::new(File::open(path)?);
    let mut last = None;
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            last = Some(serde_json::from_str(&line)?);
        }
    }
    Ok(last)
}

/// Everything needed to evaluate the equations of motion at any time.
pub struct Tdvp {
    pub h: PauliSum,
    pub partition: PartitionLabels,
    pub quantum: QuantumPart,
    pub mode: EstimatorMode,
    pub config: IntegratorConfig,
    eval_index: u64,
}

impl Tdvp {
    pub fn new(
        h: PauliSum,
        partition: PartitionLabels,
        quantum: QuantumPart,
        mode: EstimatorMode,
        config: IntegratorConfig,
    ) -> Result<Self> {
        config.validate()?;
        CqdError::check_len(partition.n_total(), h.n_sites())?;
        CqdError::check_len(partition.n_quantum(), quantum.n_sites())?;
        if config.dt > quantum.shortest_segment() + TIME_SNAP {
            log::warn!(
                "tdvp step {} exceeds the shortest schedule segment {}; sub-steps are clipped at segment boundaries",
                config.dt,
                quantum.shortest_segment()
            );
        }
        Ok(Self {
            h,
            partition,
            quantum,
            mode,
            config,
            eval_index: 0,
        })
    }

    pub fn eval_index(&self) -> u64 {
        self.eval_index
    }

    fn terms(&mut self, theta: &AnsatzState, state: &StateVector, h_eff: &PauliSum) -> Result<EomTerms> {
        let idx = self.eval_index;
        self.eval_index += 1;
        assemble_eom_partitioned(state, &self.h, h_eff, &self.partition, theta, &self.mode, idx)
    }

    /// Equation-of-motion terms at `t` (right-continuous `H̃`).
    pub fn eom_at(&mut self, theta: &AnsatzState, t: f64) -> Result<(EomTerms, StateVector)> {
        let (state, h_eff) = self.quantum.at(t)?;
        Ok((self.terms(theta, &state, &h_eff)?, state))
    }

    /// Advances `θ` from `t` to `t + dt` given the terms already evaluated at `t`.
    fn advance(&mut self, theta: &AnsatzState, t: f64, dt: f64, terms: &EomTerms) -> Result<AnsatzState> {
        let k1 = solve_eom(terms, self.config.regularization)?;
        match self.config.method {
            Integrator::Euler => theta.advanced(k1.as_slice(), dt),
            Integrator::Heun => {
                let predicted = theta.advanced(k1.as_slice(), dt)?;
                let (state, h_eff) = self.quantum.at_left(t + dt)?;
                let k2 = solve_eom(&self.terms(&predicted, &state, &h_eff)?, self.config.regularization)?;
                let avg = (k1 + k2) * 0.5;
                theta.advanced(avg.as_slice(), dt)
            }
        }
    }

    /// One sub-step of length `dt` from `t`.
    pub fn step(&mut self, theta: &AnsatzState, t: f64, dt: f64) -> Result<(AnsatzState, f64)> {
        let (terms, _) = self.eom_at(theta, t)?;
        Ok((self.advance(theta, t, dt, &terms)?, t + dt))
    }

    fn breakpoints(&self, total_time: f64) -> Vec<f64> {
        let mut b = self.quantum.boundaries();
        let n_rec = (total_time / self.config.record_interval).round() as u64;
        b.extend((1..=n_rec).map(|k| k as f64 * self.config.record_interval));
        b.push(total_time);
        b.retain(|&x| x > 0.0 && x <= total_time + TIME_SNAP);
        b.sort_by(f64::total_cmp);
        b.dedup_by(|a, b| (*a - *b).abs() < TIME_SNAP);
        b
    }

    fn is_record_time(&self, t: f64, total_time: f64) -> bool {
        let k = (t / self.config.record_interval).round();
        (t - k * self.config.record_interval).abs() < TIME_SNAP || (t - total_time).abs() < TIME_SNAP
    }

    /// Integrates from `t = 0` to `total_time`.
    pub fn run(
        &mut self,
        theta0: AnsatzState,
        total_time: f64,
        observer: impl FnMut(&RecordPoint) -> Result<()>,
    ) -> Result<Trajectory> {
        let start = Checkpoint {
            t: 0.0,
            eval_index: 0,
            steps: 0,
            theta: theta0.theta().to_vec(),
        };
        self.run_from(theta0.ansatz, start, total_time, observer, true)
    }

    /// Continues from a checkpoint; the first point is recorded only if
    /// `record_start` is set.
    pub fn run_from(
        &mut self,
        ansatz: crate::ansatz::Ansatz,
        start: Checkpoint,
        total_time: f64,
        mut observer: impl FnMut(&RecordPoint) -> Result<()>,
        record_start: bool,
    ) -> Result<Trajectory> {
        if !(total_time >= 0.0 && total_time.is_finite()) {
            return Err(CqdError::precondition("total time must be non-negative"));
        }
        let mut theta = AnsatzState::new(ansatz, start.theta)?;
        let mut t = start.t;
        let mut steps = start.steps;
        self.eval_index = start.eval_index;

        let mut ckpt = match (&self.config.checkpoint_path, self.config.checkpoint_stride) {
            (Some(p), Some(stride)) if stride > 0 => {
                let sidecar = LayoutRecord {
                    ansatz,
                    blocks: ansatz.layout(),
                };
                std::fs::write(layout_sidecar(p), serde_json::to_vec_pretty(&sidecar)?)?;
                let file = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)?;
                Some((BufWriter::new(file), stride as u64))
            }
            _ => None,
        };

        let breaks = self.breakpoints(total_time);
        let mut traj = Trajectory::default();
        let mut record = |traj: &mut Trajectory, t: f64, theta: &AnsatzState, state: &StateVector, terms: &EomTerms| {
            let diagnostics = Diagnostics::from_terms(terms);
            traj.times.push(t);
            traj.thetas.push(theta.theta().to_vec());
            traj.diagnostics.push(diagnostics);
            observer(&RecordPoint {
                t,
                theta,
                quantum: state,
                diagnostics,
            })
        };

        let mut first = record_start;
        loop {
            let result: Result<bool> = (|| {
                let (terms, state) = self.eom_at(&theta, t)?;
                if first || (t > start.t && self.is_record_time(t, total_time)) {
                    record(&mut traj, t, &theta, &state, &terms)?;
                }
                first = false;
                if t >= total_time - TIME_SNAP {
                    return Ok(false);
                }
                let next_break = breaks
                    .iter()
                    .copied()
                    .find(|&b| b > t + TIME_SNAP)
                    .unwrap_or(total_time);
                let mut dt = self.config.dt.min(next_break - t);
                if next_break - (t + dt) < TIME_SNAP {
                    dt = next_break - t;
                }
                theta = self.advance(&theta, t, dt, &terms)?;
                t = if (t + dt - next_break).abs() < TIME_SNAP {
                    next_break
                } else {
                    t + dt
                };
                steps += 1;
                if let Some((w, stride)) = ckpt.as_mut() {
                    if steps % *stride == 0 {
                        let c = Checkpoint {
                            t,
                            eval_index: self.eval_index,
                            steps,
                            theta: theta.theta().to_vec(),
                        };
                        serde_json::to_writer(&mut *w, &c)?;
                        w.write_all(b"\n")?;
                        w.flush()?;
                    }
                }
                Ok(true)
            })();
            match result {
                Ok(true) => {}
                Ok(false) => break,
                Err(e) => {
                    traj.failure = Some(e);
                    break;
                }
            }
        }
        if let Some((mut w, _)) = ckpt {
            w.flush()?;
        }
        Ok(traj)
    }
}

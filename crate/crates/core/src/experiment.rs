//! End-to-end experiments: the corrected dynamics, its baselines, and the
//! tables comparing them with the exact evolution.

use std::path::{Path, PathBuf};

use crate::ansatz::AnsatzState;
use crate::config::ExperimentConfig;
use crate::density::{entanglement_entropy, partial_fidelity, reduced_density_matrix};
use crate::error::{CqdError, Result};
use crate::estimator::{hybrid_statevector, EstimatorMode};
use crate::models::{trotter_schedule, HamiltonianSplit, ScheduleCursor};
use crate::pauli::PauliSum;
use crate::report::{emit_csv, emit_plot, Table};
use crate::statevector::{fidelity, ExactPropagator, StateVector};
use crate::tdvp::{Diagnostics, IntegratorConfig, QuantumPart, Regularization, Tdvp, TIME_SNAP};

pub const CQD: &str = "cqd";
pub const BARE_TROTTER: &str = "bare_trotter";
pub const CLASSICAL_ONLY: &str = "classical_only";
pub const EXACT: &str = "exact";

/// Output grid: multiples of `interval` up to `total_time`, plus `total_time`.
pub fn record_times(total_time: f64, interval: f64) -> Vec<f64> {
    let n = (total_time / interval).round() as u64;
    let mut times: Vec<f64> = (0..=n)
        .map(|k| k as f64 * interval)
        .filter(|&t| t <= total_time + TIME_SNAP)
        .collect();
    if times.last().is_none_or(|&last| last < total_time - TIME_SNAP) {
        times.push(total_time);
    }
    times
}

/// Full-register states of one variant at the recorded times.
#[derive(Debug)]
pub struct VariantRun {
    pub name: &'static str,
    pub states: Vec<StateVector>,
    pub norm: Vec<Option<f64>>,
    /// Norm summed over the full register, for comparison with `norm`.
    pub full_norm: Vec<Option<f64>>,
    pub energy: Vec<Option<f64>>,
    pub diagnostics: Vec<Option<Diagnostics>>,
    pub failure: Option<CqdError>,
}

impl VariantRun {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            states: Vec::new(),
            norm: Vec::new(),
            full_norm: Vec::new(),
            energy: Vec::new(),
            diagnostics: Vec::new(),
            failure: None,
        }
    }

    fn failed(name: &'static str, e: CqdError) -> Self {
        let mut v = Self::new(name);
        v.failure = Some(e);
        v
    }
}

/// Everything an experiment needs, built once from a configuration.
pub struct Setup {
    pub split: HamiltonianSplit,
    pub times: Vec<f64>,
    pub theta0: AnsatzState,
    pub mode: EstimatorMode,
    pub integrator: IntegratorConfig,
    pub observables: Vec<(String, PauliSum)>,
    configured_regularization: Option<Regularization>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let split = cfg.model.build()?;
        let theta0 = cfg.ansatz().init(cfg.ansatz.seed, cfg.ansatz.init_sigma)?;
        let mut integrator = IntegratorConfig::new(cfg.tdvp.dt, cfg.regularization());
        integrator.method = cfg.tdvp.integrator;
        integrator.record_interval = cfg.record_interval();
        Ok(Self {
            times: record_times(cfg.total_time, integrator.record_interval),
            split,
            theta0,
            mode: cfg.estimator.to_mode(),
            integrator,
            observables: cfg.observables()?,
            configured_regularization: cfg.tdvp.regularization,
        })
    }

    fn total_time(&self) -> f64 {
        *self.times.last().expect("grid is never empty")
    }

    fn initial_quantum(&self) -> Result<StateVector> {
        StateVector::init_plus(self.split.partition.n_quantum())
    }

    fn cursor(&self, trotter_order: u8, trotter_step: f64) -> Result<ScheduleCursor> {
        let schedule = trotter_schedule(&self.split, trotter_order, trotter_step, self.total_time())?;
        ScheduleCursor::new(schedule, self.initial_quantum()?)
    }

    fn run_tdvp(
        &self,
        name: &'static str,
        quantum: QuantumPart,
        mode: EstimatorMode,
        integrator: IntegratorConfig,
    ) -> VariantRun {
        let mut out = VariantRun::new(name);
        let partition = self.split.partition.clone();
        let tdvp = Tdvp::new(self.split.full.clone(), partition.clone(), quantum, mode, integrator);
        let mut tdvp = match tdvp {
            Ok(t) => t,
            Err(e) => return VariantRun::failed(name, e),
        };
        let traj = tdvp.run(self.theta0.clone(), self.total_time(), |p| {
            let (hyb, full_norm) = hybrid_statevector(p.quantum, p.theta, &partition)?;
            out.states.push(hyb);
            out.norm.push(Some(p.diagnostics.norm));
            out.full_norm.push(Some(full_norm));
            out.energy.push(Some(p.diagnostics.energy));
            out.diagnostics.push(Some(p.diagnostics));
            Ok(())
        });
        match traj {
            Ok(t) => out.failure = t.failure,
            Err(e) => out.failure = Some(e),
        }
        out
    }

    /// The corrected dynamics.
    pub fn run_cqd(&self, cfg: &ExperimentConfig, checkpoint: Option<PathBuf>) -> VariantRun {
        let quantum = match self.cursor(cfg.trotter.order, cfg.trotter.step) {
            Ok(c) => QuantumPart::Scheduled(c),
            Err(e) => return VariantRun::failed(CQD, e),
        };
        let mut integrator = self.integrator.clone();
        if let (Some(stride), Some(path)) = (cfg.tdvp.checkpoint_stride, checkpoint) {
            integrator.checkpoint_stride = Some(stride);
            integrator.checkpoint_path = Some(path);
        }
        self.run_tdvp(CQD, quantum, self.mode, integrator)
    }

    /// Standard variational dynamics with the circuit frozen at its initial state.
    pub fn run_classical_only(&self) -> VariantRun {
        let frozen = match self.initial_quantum() {
            Ok(s) => QuantumPart::Frozen(s),
            Err(e) => return VariantRun::failed(CLASSICAL_ONLY, e),
        };
        let mut integrator = self.integrator.clone();
        integrator.regularization = self
            .configured_regularization
            .unwrap_or_else(|| Regularization::default_for(&EstimatorMode::Exact));
        self.run_tdvp(CLASSICAL_ONLY, frozen, EstimatorMode::Exact, integrator)
    }

    /// The Trotter circuit alone with a constant classical factor.
    pub fn run_bare_trotter(&self, cfg: &ExperimentConfig) -> VariantRun {
        let mut out = VariantRun::new(BARE_TROTTER);
        let result = (|| -> Result<()> {
            let mut cursor = self.cursor(cfg.trotter.order, cfg.trotter.step)?;
            let zero = AnsatzState::new(self.theta0.ansatz, vec![0.0; self.theta0.len()])?;
            for &t in &self.times {
                let (state, _) = cursor.state_and_hamiltonian_at(t.min(self.total_time()))?;
                let (hyb, _) = hybrid_statevector(&state, &zero, &self.split.partition)?;
                out.energy.push(Some(hyb.exact_expectation(&self.split.full)?));
                out.norm.push(None);
                out.full_norm.push(None);
                out.diagnostics.push(None);
                out.states.push(hyb);
            }
            Ok(())
        })();
        out.failure = result.err();
        out
    }

    /// Dense exact evolution of the full Hamiltonian.
    pub fn run_exact(&self) -> VariantRun {
        let mut out = VariantRun::new(EXACT);
        let result = (|| -> Result<()> {
            let prop = ExactPropagator::new(&self.split.full)?;
            let psi0 = StateVector::init_plus(self.split.partition.n_total())?;
            for &t in &self.times {
                let s = prop.evolve(&psi0, t)?;
                out.energy.push(Some(s.exact_expectation(&self.split.full)?));
                out.norm.push(None);
                out.full_norm.push(None);
                out.diagnostics.push(None);
                out.states.push(s);
            }
            Ok(())
        })();
        out.failure = result.err();
        out
    }
}

/// Tables and files produced by one experiment.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub comparison: Table,
    pub variants: Vec<(String, Table)>,
    pub files: Vec<PathBuf>,
    /// Variants that stopped early; their tables hold the rows computed before the error.
    pub failures: Vec<(String, CqdError)>,
}

struct Metrics {
    fidelity: Option<f64>,
    observables: Vec<Option<f64>>,
    partial_fidelity: Option<f64>,
    entropy: Option<f64>,
}

fn metrics(
    cfg: &ExperimentConfig,
    setup: &Setup,
    state: &StateVector,
    exact: Option<&StateVector>,
) -> Result<Metrics> {
    let fid = match (cfg.observables.fidelity, exact) {
        (true, Some(e)) => Some(fidelity(state, e)?),
        _ => None,
    };
    let observables = setup
        .observables
        .iter()
        .map(|(_, o)| state.exact_expectation(o).map(Some))
        .collect::<Result<Vec<_>>>()?;
    let partial = match (&cfg.observables.partial_fidelity, exact) {
        (Some(sites), Some(e)) => {
            let rho = reduced_density_matrix(state, sites)?;
            let sigma = reduced_density_matrix(e, sites)?;
            Some(partial_fidelity(&rho, &sigma)?)
        }
        _ => None,
    };
    let entropy = match &cfg.observables.entropy {
        Some(sites) => Some(entanglement_entropy(&reduced_density_matrix(state, sites)?)?),
        None => None,
    };
    Ok(Metrics {
        fidelity: fid,
        observables,
        partial_fidelity: partial,
        entropy,
    })
}

fn variant_columns(cfg: &ExperimentConfig, setup: &Setup, tdvp: bool) -> Vec<String> {
    let mut c = vec!["t".to_string()];
    if cfg.observables.fidelity {
        c.push("fidelity".into());
    }
    c.extend(setup.observables.iter().map(|(n, _)| n.clone()));
    c.push("norm".into());
    c.push("energy".into());
    if cfg.observables.partial_fidelity.is_some() {
        c.push("partial_fidelity".into());
    }
    if cfg.observables.entropy.is_some() {
        c.push("entropy".into());
    }
    if tdvp {
        c.extend(["force_norm", "time_force_norm", "min_qgt_eigenvalue"].map(String::from));
    }
    c
}

fn suffixed(base: &str, variant: &str) -> String {
    match variant {
        CQD => base.to_string(),
        v if base == "fidelity" => format!("{v}_fidelity"),
        v => format!("{base}_{v}"),
    }
}

/// Runs every enabled variant and assembles the output tables (no files written).
pub fn run_variants(cfg: &ExperimentConfig, checkpoint: Option<PathBuf>) -> Result<ExperimentOutput> {
    let setup = Setup::new(cfg)?;
    let b = &cfg.observables.baselines;
    let (cqd, classical, bare, exact) = std::thread::scope(|s| {
        let cqd = s.spawn(|| setup.run_cqd(cfg, checkpoint));
        let classical = b.classical_only.then(|| s.spawn(|| setup.run_classical_only()));
        let bare = b.bare_trotter.then(|| s.spawn(|| setup.run_bare_trotter(cfg)));
        let exact = b.exact.then(|| s.spawn(|| setup.run_exact()));
        let join = |h: std::thread::ScopedJoinHandle<'_, VariantRun>| h.join().expect("variant thread panicked");
        (join(cqd), classical.map(join), bare.map(join), exact.map(join))
    });

    let mut runs: Vec<VariantRun> = vec![cqd];
    runs.extend(bare);
    runs.extend(classical);
    if let Some(e) = &exact {
        if let Some(err) = &e.failure {
            return Err(CqdError::precondition(format!("exact reference failed: {err}")));
        }
    }
    let exact_states: Option<&[StateVector]> = exact.as_ref().map(|e| e.states.as_slice());

    // per-variant tables and their metric rows
    let mut variants = Vec::new();
    let mut all_metrics: Vec<Vec<Metrics>> = Vec::new();
    for run in runs.iter().chain(exact.iter()) {
        let tdvp = run.name == CQD || run.name == CLASSICAL_ONLY;
        let mut table = Table::new(variant_columns(cfg, &setup, tdvp));
        let mut ms = Vec::new();
        for (i, state) in run.states.iter().enumerate() {
            let m = metrics(cfg, &setup, state, exact_states.map(|e| &e[i]))?;
            let mut row = vec![Some(setup.times[i])];
            if cfg.observables.fidelity {
                row.push(m.fidelity);
            }
            row.extend(m.observables.iter().copied());
            row.push(run.norm[i]);
            row.push(run.energy[i]);
            if cfg.observables.partial_fidelity.is_some() {
                row.push(m.partial_fidelity);
            }
            if cfg.observables.entropy.is_some() {
                row.push(m.entropy);
            }
            if tdvp {
                let d = run.diagnostics[i];
                row.push(d.map(|d| d.force_norm));
                row.push(d.map(|d| d.time_force_norm));
                row.push(d.map(|d| d.min_qgt_eigenvalue));
            }
            table.push(row)?;
            ms.push(m);
        }
        variants.push((run.name.to_string(), table));
        all_metrics.push(ms);
    }

    // comparison table
    let named: Vec<(&str, &[Metrics])> = runs
        .iter()
        .chain(exact.iter())
        .map(|r| r.name)
        .zip(all_metrics.iter().map(Vec::as_slice))
        .collect();
    type Column<'a> = (String, Box<dyn Fn(usize) -> Option<f64> + 'a>);
    let mut columns: Vec<Column> = Vec::new();
    if cfg.observables.fidelity {
        for &(name, ms) in &named {
            columns.push((suffixed("fidelity", name), Box::new(move |i| ms.get(i).and_then(|m| m.fidelity))));
        }
    }
    for (k, (obs, _)) in setup.observables.iter().enumerate() {
        for &(name, ms) in &named {
            columns.push((suffixed(obs, name), Box::new(move |i| ms.get(i).and_then(|m| m.observables[k]))));
        }
    }
    let cqd_run = &runs[0];
    columns.push(("norm".into(), Box::new(|i| cqd_run.norm.get(i).copied().flatten())));
    columns.push(("energy".into(), Box::new(|i| cqd_run.energy.get(i).copied().flatten())));
    if cfg.observables.partial_fidelity.is_some() {
        for &(name, ms) in named.iter().filter(|(n, _)| *n != EXACT) {
            columns.push((
                suffixed("partial_fidelity", name),
                Box::new(move |i| ms.get(i).and_then(|m| m.partial_fidelity)),
            ));
        }
    }
    if cfg.observables.entropy.is_some() {
        for &(name, ms) in &named {
            columns.push((suffixed("entropy", name), Box::new(move |i| ms.get(i).and_then(|m| m.entropy))));
        }
    }
    let mut header = vec!["t".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    let mut comparison = Table::new(header);
    for (i, &t) in setup.times.iter().enumerate() {
        let mut row = vec![Some(t)];
        row.extend(columns.iter().map(|(_, f)| f(i)));
        comparison.push(row)?;
    }
    drop(columns);

    let failures = runs
        .into_iter()
        .filter_map(|r| r.failure.map(|e| (r.name.to_string(), e)))
        .collect();
    Ok(ExperimentOutput {
        comparison,
        variants,
        files: Vec::new(),
        failures,
    })
}

/// Runs an experiment and writes one CSV per variant, the comparison CSV and,
/// if enabled, its plot into `out_dir`.
pub fn run_config(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    std::fs::create_dir_all(out_dir)?;
    let prefix = &cfg.output.prefix;
    let checkpoint = cfg.tdvp.checkpoint_stride.map(|_| out_dir.join(format!("{prefix}_checkpoint.jsonl")));
    if let Some(p) = &checkpoint {
        if p.exists() {
            std::fs::remove_file(p)?;
        }
    }
    let mut out = run_variants(cfg, checkpoint.clone())?;
    for (name, table) in &out.variants {
        let path = out_dir.join(format!("{prefix}_{name}.csv"));
        emit_csv(table, &path)?;
        out.files.push(path);
    }
    let cmp = out_dir.join(format!("{prefix}_comparison.csv"));
    emit_csv(&out.comparison, &cmp)?;
    out.files.push(cmp.clone());
    if cfg.output.plot {
        let svg = out_dir.join(format!("{prefix}_comparison.svg"));
        emit_plot(&cmp, &svg)?;
        out.files.push(svg);
    }
    if let Some(p) = checkpoint.filter(|p| p.exists()) {
        out.files.push(p);
    }
    Ok(out)
}

/// Loads, validates and runs a configuration file. `out_dir` overrides the
/// configured output directory.
pub fn run_experiment(config_path: &Path, out_dir: Option<&Path>) -> Result<ExperimentOutput> {
    let cfg = ExperimentConfig::load(config_path)?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.resolve_dir());
    run_config(&cfg, &dir)
}

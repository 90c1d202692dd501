//! Experiment configuration files and the built-in presets.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, DEFAULT_INIT_SIGMA};
use crate::error::{ConfigIssue, CqdError, Result};
use crate::estimator::{EstimatorMode, ShotSettings};
use crate::models::{build_partitioned_chain, build_tfim_chain, build_tfim_j1j2, HamiltonianSplit};
use crate::pauli::{PauliString, PauliSum, PauliTerm, DENSE_CAP};
use crate::tdvp::{Integrator, Regularization};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CQD_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(with = "tagged_model")]
    pub model: ModelConfig,
    pub trotter: TrotterConfig,
    pub total_time: f64,
    pub tdvp: TdvpConfig,
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub observables: ObservablesConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Written in files as an object with a `kind` field naming the variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    TfimChain {
        sites: usize,
        h: f64,
        j: f64,
        #[serde(default)]
        periodic: bool,
    },
    #[serde(rename = "tfim_j1j2")]
    TfimJ1J2 {
        rows: usize,
        cols: usize,
        h: f64,
        j1: f64,
        j2: f64,
    },
    PartitionedChain {
        n_q: usize,
        n_c: usize,
        j_q: f64,
        j_qc: f64,
        j_c: f64,
        h: f64,
    },
}

/// Marker separating the inner field path from the message of a model error.
const PATH_MARK: &str = "\u{1}";

// Internally tagged enums lose field paths in errors, so the model object is
// rewritten to `{kind: {...}}` and deserialized with its own path tracking.
mod tagged_model {
    use super::{ModelConfig, PATH_MARK};
    use serde::de::Error as _;
    use serde::ser::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::{Map, Value};

    pub fn serialize<S: Serializer>(model: &ModelConfig, s: S) -> Result<S::Ok, S::Error> {
        let Value::Object(outer) = serde_json::to_value(model).map_err(S::Error::custom)? else {
            return Err(S::Error::custom("model must serialize to an object"));
        };
        let (kind, fields) = outer.into_iter().next().ok_or_else(|| S::Error::custom("empty model"))?;
        let mut flat = Map::new();
        flat.insert("kind".into(), Value::String(kind));
        if let Value::Object(fields) = fields {
            flat.extend(fields);
        }
        Value::Object(flat).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ModelConfig, D::Error> {
        let mut map = Map::<String, Value>::deserialize(d)?;
        let kind = match map.remove("kind") {
            Some(Value::String(k)) => k,
            Some(_) => return Err(D::Error::custom(format!("kind{PATH_MARK}expected a string"))),
            None => return Err(D::Error::missing_field("kind")),
        };
        let mut outer = Map::new();
        outer.insert(kind, Value::Object(map));
        serde_path_to_error::deserialize(Value::Object(outer)).map_err(|e| {
            let inner = e.path().to_string();
            // first segment is the variant name, which lives in `kind`
            let field = inner.split_once('.').map_or("kind", |(_, rest)| rest).to_string();
            D::Error::custom(format!("{field}{PATH_MARK}{}", e.into_inner()))
        })
    }
}

impl ModelConfig {
    pub fn n_sites(&self) -> usize {
        match *self {
            ModelConfig::TfimChain { sites, .. } => sites,
            ModelConfig::TfimJ1J2 { rows, cols, .. } => rows * cols,
            ModelConfig::PartitionedChain { n_q, n_c, .. } => n_q + n_c,
        }
    }

    pub fn build(&self) -> Result<HamiltonianSplit> {
        match *self {
            ModelConfig::TfimChain { sites, h, j, periodic } => build_tfim_chain(sites, h, j, periodic),
            ModelConfig::TfimJ1J2 { rows, cols, h, j1, j2 } => build_tfim_j1j2(rows, cols, h, j1, j2),
            ModelConfig::PartitionedChain {
                n_q,
                n_c,
                j_q,
                j_qc,
                j_c,
                h,
            } => build_partitioned_chain(n_q, n_c, j_q, j_qc, j_c, h),
        }
    }

    fn couplings(&self) -> Vec<(&'static str, f64)> {
        match *self {
            ModelConfig::TfimChain { h, j, .. } => vec![("h", h), ("j", j)],
            ModelConfig::TfimJ1J2 { h, j1, j2, .. } => vec![("h", h), ("j1", j1), ("j2", j2)],
            ModelConfig::PartitionedChain { j_q, j_qc, j_c, h, .. } => {
                vec![("j_q", j_q), ("j_qc", j_qc), ("j_c", j_c), ("h", h)]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrotterConfig {
    pub order: u8,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdvpConfig {
    pub dt: f64,
    #[serde(default)]
    pub integrator: Integrator,
    /// Defaults to a pseudo-inverse cutoff in exact mode and a diagonal shift with shots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization: Option<Regularization>,
    /// Spacing of output rows; defaults to a fifth of the Trotter step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_stride: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    Exact,
    Shots,
}

fn default_bath_samples() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub mode: EstimatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots_per_basis: Option<usize>,
    #[serde(default = "default_bath_samples")]
    pub bath_samples: usize,
    #[serde(default)]
    pub master_seed: u64,
}

impl EstimatorConfig {
    pub fn exact() -> Self {
        Self {
            mode: EstimatorKind::Exact,
            shots_per_basis: None,
            bath_samples: default_bath_samples(),
            master_seed: 0,
        }
    }

    pub fn shots(shots: usize, bath_samples: usize, master_seed: u64) -> Self {
        Self {
            mode: EstimatorKind::Shots,
            shots_per_basis: Some(shots),
            bath_samples,
            master_seed,
        }
    }

    pub fn to_mode(&self) -> EstimatorMode {
        match self.mode {
            EstimatorKind::Exact => EstimatorMode::Exact,
            EstimatorKind::Shots => EstimatorMode::Shots(ShotSettings {
                shots_per_basis: self.shots_per_basis.unwrap_or(0),
                bath_samples: self.bath_samples,
                master_seed: self.master_seed,
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    Jastrow,
    Partitioned,
}

fn default_sigma() -> f64 {
    DEFAULT_INIT_SIGMA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    /// Inferred from the model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<AnsatzKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sigma")]
    pub init_sigma: f64,
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 0,
            init_sigma: DEFAULT_INIT_SIGMA,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedObservable {
    pub name: String,
    pub terms: Vec<PauliTerm>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baselines {
    #[serde(default = "yes")]
    pub bare_trotter: bool,
    #[serde(default = "yes")]
    pub classical_only: bool,
    #[serde(default = "yes")]
    pub exact: bool,
}

impl Default for Baselines {
    fn default() -> Self {
        Self {
            bare_trotter: true,
            classical_only: true,
            exact: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesConfig {
    #[serde(default)]
    pub paulis: Vec<NamedObservable>,
    #[serde(default = "yes")]
    pub fidelity: bool,
    /// Sites of the subsystem whose reduced-state fidelity is reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_fidelity: Option<Vec<usize>>,
    /// Sites kept when computing the entanglement entropy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<Vec<usize>>,
    #[serde(default)]
    pub baselines: Baselines,
}

impl Default for ObservablesConfig {
    fn default() -> Self {
        Self {
            paulis: Vec::new(),
            fidelity: true,
            partial_fidelity: None,
            entropy: None,
            baselines: Baselines::default(),
        }
    }
}

fn default_prefix() -> String {
    "run".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Falls back to `$CQD_OUTPUT_DIR`, then the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_prefix")]
    pub prefix: String,
    #[serde(default = "yes")]
    pub plot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            prefix: default_prefix(),
            plot: true,
        }
    }
}

impl OutputConfig {
    pub fn resolve_dir(&self) -> PathBuf {
        self.dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.push(path, message);
        }
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let mut message = e.into_inner().to_string();
            if let Some((field, rest)) = message.split_once(PATH_MARK) {
                path = format!("{path}.{field}");
                message = rest.to_string();
            }
            CqdError::InvalidConfig(vec![ConfigIssue { path, message }])
        })
    }

    /// Parses and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg = Self::from_json(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn ansatz_kind(&self) -> AnsatzKind {
        self.ansatz.kind.unwrap_or(match self.model {
            ModelConfig::PartitionedChain { .. } => AnsatzKind::Partitioned,
            _ => AnsatzKind::Jastrow,
        })
    }

    pub fn ansatz(&self) -> Ansatz {
        match (self.ansatz_kind(), &self.model) {
            (AnsatzKind::Partitioned, ModelConfig::PartitionedChain { n_q, n_c, .. }) => Ansatz::Partitioned {
                n_q: *n_q,
                n_c: *n_c,
            },
            _ => Ansatz::Jastrow {
                n: self.model.n_sites(),
            },
        }
    }

    pub fn regularization(&self) -> Regularization {
        self.tdvp
            .regularization
            .unwrap_or_else(|| Regularization::default_for(&self.estimator.to_mode()))
    }

    pub fn record_interval(&self) -> f64 {
        self.tdvp.record_interval.unwrap_or(self.trotter.step / 5.0)
    }

    pub fn observables(&self) -> Result<Vec<(String, PauliSum)>> {
        self.observables
            .paulis
            .iter()
            .map(|o| Ok((o.name.clone(), PauliSum::from_records(&o.terms)?)))
            .collect()
    }

    /// Every problem with the configuration, each located by key path.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut is = Issues(Vec::new());
        let n = self.model.n_sites();
        match self.model {
            ModelConfig::TfimChain { sites, .. } => is.check(sites >= 2, "model.sites", "a chain needs at least 2 sites"),
            ModelConfig::TfimJ1J2 { rows, cols, .. } => {
                is.check(rows >= 2, "model.rows", "the grid needs at least 2 rows");
                is.check(cols >= 2, "model.cols", "the grid needs at least 2 columns");
            }
            ModelConfig::PartitionedChain { n_q, n_c, .. } => {
                is.check(n_q >= 2, "model.n_q", "the quantum partition needs at least 2 sites");
                is.check(n_c % 2 == 0, "model.n_c", "the bath size must be even");
            }
        }
        is.check(
            n <= DENSE_CAP,
            "model",
            format!("{n} sites exceed the exact-reference cap of {DENSE_CAP}"),
        );
        for (key, v) in self.model.couplings() {
            is.check(v.is_finite(), format!("model.{key}"), "coupling must be finite");
        }

        is.check(
            self.trotter.order == 1 || self.trotter.order == 2,
            "trotter.order",
            "order must be 1 or 2",
        );
        is.check(positive(self.trotter.step), "trotter.step", "step must be positive");
        if !(self.total_time >= 0.0 && self.total_time.is_finite()) {
            is.push("total_time", "total time must be non-negative");
        } else if positive(self.trotter.step) {
            let k = (self.total_time / self.trotter.step).round();
            is.check(
                (k * self.trotter.step - self.total_time).abs() <= 1e-9,
                "total_time",
                "total time must be a whole number of trotter steps",
            );
        }

        is.check(positive(self.tdvp.dt), "tdvp.dt", "time step must be positive");
        if let Some(r) = self.tdvp.record_interval {
            is.check(positive(r), "tdvp.record_interval", "record interval must be positive");
        }
        if let Some(Regularization::Shift(v) | Regularization::Cutoff(v)) = self.tdvp.regularization {
            is.check(
                v >= 0.0 && v.is_finite(),
                "tdvp.regularization.value",
                "regularization strength must be non-negative",
            );
        }
        if self.tdvp.checkpoint_stride == Some(0) {
            is.push("tdvp.checkpoint_stride", "stride must be at least 1");
        }

        if self.estimator.mode == EstimatorKind::Shots {
            match self.estimator.shots_per_basis {
                None => is.push("estimator.shots_per_basis", "shots mode requires shots_per_basis"),
                Some(0) => is.push("estimator.shots_per_basis", "shots_per_basis must be at least 1"),
                _ => {}
            }
            if self.ansatz_kind() == AnsatzKind::Partitioned {
                is.check(
                    self.estimator.bath_samples >= 1,
                    "estimator.bath_samples",
                    "bath_samples must be at least 1",
                );
            }
        }

        if self.ansatz.kind == Some(AnsatzKind::Partitioned) && !matches!(self.model, ModelConfig::PartitionedChain { .. }) {
            is.push("ansatz.kind", "the partitioned ansatz needs a partitioned_chain model");
        }
        if self.ansatz.kind == Some(AnsatzKind::Jastrow) && matches!(self.model, ModelConfig::PartitionedChain { .. }) {
            is.push("ansatz.kind", "a partitioned_chain model needs the partitioned ansatz");
        }
        is.check(
            self.ansatz.init_sigma >= 0.0 && self.ansatz.init_sigma.is_finite(),
            "ansatz.init_sigma",
            "init_sigma must be non-negative",
        );

        let mut names = HashSet::new();
        for (i, o) in self.observables.paulis.iter().enumerate() {
            let base = format!("observables.paulis[{i}]");
            let bad_name = o.name.is_empty() || o.name.contains([',', '"', '\n', '\r']);
            is.check(!bad_name, format!("{base}.name"), "name must be non-empty without commas, quotes or newlines");
            is.check(names.insert(o.name.clone()), format!("{base}.name"), "duplicate observable name");
            is.check(!o.terms.is_empty(), format!("{base}.terms"), "an observable needs at least one term");
            for (k, t) in o.terms.iter().enumerate() {
                match t.string.parse::<PauliString>() {
                    Ok(p) if p.len() != n => is.push(
                        format!("{base}.terms[{k}].string"),
                        format!("string acts on {} sites, the model has {n}", p.len()),
                    ),
                    Ok(_) => {}
                    Err(e) => is.push(format!("{base}.terms[{k}].string"), e.to_string()),
                }
                is.check(t.coeff.is_finite(), format!("{base}.terms[{k}].coeff"), "coefficient must be finite");
            }
        }
        for (key, sites) in [
            ("observables.partial_fidelity", &self.observables.partial_fidelity),
            ("observables.entropy", &self.observables.entropy),
        ] {
            if let Some(sites) = sites {
                is.check(!sites.is_empty(), key, "subsystem must not be empty");
                for (k, &s) in sites.iter().enumerate() {
                    is.check(s < n, format!("{key}[{k}]"), format!("site {s} out of range for {n} sites"));
                }
            }
        }
        let needs_exact = self.observables.fidelity || self.observables.partial_fidelity.is_some();
        is.check(
            !needs_exact || self.observables.baselines.exact,
            "observables.baselines.exact",
            "fidelities need the exact reference",
        );
        is.check(!self.output.prefix.is_empty(), "output.prefix", "prefix must not be empty");
        is.0
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(CqdError::InvalidConfig(issues))
        }
    }
}

fn observable(name: &str, n: usize, terms: &[(f64, PauliString)]) -> NamedObservable {
    debug_assert!(terms.iter().all(|(_, p)| p.len() == n));
    NamedObservable {
        name: name.to_string(),
        terms: terms
            .iter()
            .map(|(c, p)| PauliTerm {
                coeff: *c,
                string: p.to_string(),
            })
            .collect(),
    }
}

fn two_site(n: usize, a: usize, b: usize, l: crate::pauli::Letter) -> PauliString {
    PauliString::from_sparse(n, &[(a, l), (b, l)]).expect("sites in range")
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 3] = ["fig2", "fig4", "fig6"];

/// Built-in experiment configurations.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    use crate::pauli::Letter;
    let base = |model, step: f64, dt: f64, estimator| ExperimentConfig {
        model,
        trotter: TrotterConfig { order: 2, step },
        total_time: 2.0,
        tdvp: TdvpConfig {
            dt,
            integrator: Integrator::Euler,
            regularization: None,
            record_interval: Some(0.05),
            checkpoint_stride: None,
        },
        estimator,
        ansatz: AnsatzConfig::default(),
        observables: ObservablesConfig::default(),
        output: OutputConfig {
            dir: None,
            prefix: name.to_string(),
            plot: true,
        },
    };
    match name {
        "fig2" => {
            let l = 10;
            let mut cfg = base(
                ModelConfig::TfimChain {
                    sites: l,
                    h: 1.0,
                    j: 2.0,
                    periodic: true,
                },
                0.25,
                0.005,
                EstimatorConfig::exact(),
            );
            let mx: Vec<(f64, PauliString)> = (0..l)
                .map(|i| (1.0 / l as f64, PauliString::from_sparse(l, &[(i, Letter::X)]).expect("site in range")))
                .collect();
            cfg.observables.paulis.push(observable("mean_x", l, &mx));
            Ok(cfg)
        }
        "fig4" => {
            let n = 9;
            let mut cfg = base(
                ModelConfig::TfimJ1J2 {
                    rows: 3,
                    cols: 3,
                    h: 1.0,
                    j1: 0.5,
                    j2: 0.1,
                },
                0.1,
                0.005,
                EstimatorConfig::exact(),
            );
            cfg.observables.paulis.push(observable("z0z8", n, &[(1.0, two_site(n, 0, 8, Letter::Z))]));
            cfg.observables.paulis.push(observable("x0x8", n, &[(1.0, two_site(n, 0, 8, Letter::X))]));
            Ok(cfg)
        }
        "fig6" => {
            let (n_q, n_c) = (4, 4);
            let mut cfg = base(
                ModelConfig::PartitionedChain {
                    n_q,
                    n_c,
                    j_q: 1.0,
                    j_qc: 0.25,
                    j_c: 0.1,
                    h: 1.0,
                },
                0.1,
                0.001,
                EstimatorConfig::shots(500, 10, 0),
            );
            // the bath network has many redundant directions; a firm shift keeps
            // both exact and sampled runs stable
            cfg.tdvp.regularization = Some(Regularization::Shift(1e-3));
            let quantum: Vec<usize> = (n_c / 2..n_c / 2 + n_q).collect();
            cfg.observables.partial_fidelity = Some(quantum.clone());
            cfg.observables.entropy = Some(quantum);
            Ok(cfg)
        }
        other => Err(CqdError::InvalidConfig(vec![ConfigIssue {
            path: "preset".to_string(),
            message: format!("unknown preset {other:?}, expected one of {PRESETS:?}"),
        }])),
    }
}

//! Scenario files, simulation runs and their on-disk outputs.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "name": "p2",
//!   "n": 2,
//!   "edges": [[1, 2]],
//!   "inputs": [{ "value": 4.0, "targets": [1] }],
//!   "alpha": 1.0, "gamma": 1.0, "dt": 0.01, "t_final": 20.0,
//!   "x0": [0.0, 0.0], "xi0": [0.0, 0.0]
//! }
//! ```
//!
//! `alpha`/`gamma` default to 1, `x0`/`xi0` to zero, `dt` to
//! [`default_step`] and `t_final` to `50 / lambda_min(F)`.
//!
//! A run writes `trajectory.csv`, `certificate.json` and `summary.txt` into
//! the output directory.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::analysis::{certify, f_matrix, CertificateReport, ErrorFrame, DEFAULT_SETTLE_TOL};
use crate::dynamics::{default_step, ConsensusNetwork, ProtocolParams, RhsForm, Trajectory};
use crate::error::{Error, Result};
use crate::graph::{is_connected, laplacian, Graph};
use crate::layout::{build_derived, ExogenousInput, InputLayout};
use crate::linalg::symmetric_eigendecomposition;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Horizon multiple used when a scenario leaves `t_final` out.
pub const DEFAULT_HORIZON_FACTOR: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputEntry {
    pub value: f64,
    pub targets: Vec<i64>,
}

/// Scenario file as written on disk; ids are unchecked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub n: i64,
    pub edges: Vec<[i64; 2]>,
    pub inputs: Vec<InputEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        self.dt = o.dt.or(self.dt);
        self.t_final = o.t_final.or(self.t_final);
        self.alpha = o.alpha.or(self.alpha);
        self.gamma = o.gamma.or(self.gamma);
    }
}

/// A fully validated scenario with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub graph: Graph,
    pub inputs: InputLayout,
    pub params: ProtocolParams,
    pub x0: DVector<f64>,
    pub xi0: DVector<f64>,
    pub seed: Option<u64>,
}

fn node_id(raw: i64, field: &str) -> Result<usize> {
    usize::try_from(raw)
        .ok()
        .filter(|v| *v >= 1)
        .ok_or_else(|| Error::validation(field, format!("node id {raw} must be a positive integer")))
}

fn initial_vector(raw: &Option<Vec<f64>>, n: usize, field: &str) -> Result<DVector<f64>> {
    match raw {
        None => Ok(DVector::zeros(n)),
        Some(v) if v.len() != n => Err(Error::validation(
            field,
            format!("expected {n} entries, found {}", v.len()),
        )),
        Some(v) => {
            if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::validation(format!("{field}[{k}]"), "value must be finite"));
            }
            Ok(DVector::from_column_slice(v))
        }
    }
}

fn as_validation(e: Error) -> Error {
    match e {
        Error::InvalidGraph { field, message }
        | Error::InvalidLayout { field, message }
        | Error::InvalidParams { field, message } => Error::Validation { field, message },
        Error::TooManyInputs { m, n } => {
            Error::validation("inputs", format!("{m} inputs exceed the {n} agents"))
        }
        other => other,
    }
}

impl Scenario {
    pub fn from_file(file: &ScenarioFile) -> Result<Self> {
        Self::build(file).map_err(as_validation)
    }

    fn build(file: &ScenarioFile) -> Result<Self> {
        let n = usize::try_from(file.n)
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| Error::validation("n", format!("agent count {} must be positive", file.n)))?;

        let mut edges = Vec::with_capacity(file.edges.len());
        for (k, [i, j]) in file.edges.iter().enumerate() {
            let field = format!("edges[{k}]");
            edges.push((node_id(*i, &field)?, node_id(*j, &field)?));
        }
        let graph = Graph::new(n, edges)?;
        if !is_connected(&graph) {
            return Err(Error::validation("edges", "communication graph is not connected"));
        }

        let mut inputs = Vec::with_capacity(file.inputs.len());
        for (h, entry) in file.inputs.iter().enumerate() {
            let targets = entry
                .targets
                .iter()
                .enumerate()
                .map(|(k, id)| node_id(*id, &format!("inputs[{h}].targets[{k}]")))
                .collect::<Result<Vec<_>>>()?;
            inputs.push(ExogenousInput {
                value: entry.value,
                targets,
            });
        }
        let layout = InputLayout::new(n, inputs)?;
        let derived = build_derived(&layout)?;

        let alpha = file.alpha.unwrap_or(1.0);
        let gamma = file.gamma.unwrap_or(1.0);
        let t_final = match file.t_final {
            Some(t) => t,
            None => {
                let f = f_matrix(&laplacian(&graph), &derived);
                let lambda_min = symmetric_eigendecomposition(&f)?.eigenvalues[0];
                DEFAULT_HORIZON_FACTOR / lambda_min
            }
        };
        let dt = file.dt.unwrap_or_else(|| default_step(&graph, &derived, alpha, gamma));
        let params = ProtocolParams::new(alpha, gamma, dt, t_final)?;

        Ok(Scenario {
            name: file.name.clone(),
            x0: initial_vector(&file.x0, n, "x0")?,
            xi0: initial_vector(&file.xi0, n, "xi0")?,
            graph,
            inputs: layout,
            params,
            seed: file.seed,
        })
    }

    /// File form with every default written out explicitly.
    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            name: self.name.clone(),
            n: self.graph.node_count() as i64,
            edges: self.graph.edges().map(|(i, j)| [i as i64, j as i64]).collect(),
            inputs: self
                .inputs
                .inputs()
                .iter()
                .map(|inp| InputEntry {
                    value: inp.value,
                    targets: inp.targets.iter().map(|&t| t as i64).collect(),
                })
                .collect(),
            alpha: Some(self.params.alpha),
            gamma: Some(self.params.gamma),
            dt: Some(self.params.dt),
            t_final: Some(self.params.t_final),
            x0: Some(self.x0.iter().copied().collect()),
            xi0: Some(self.xi0.iter().copied().collect()),
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    pub fn network(&self) -> Result<ConsensusNetwork> {
        ConsensusNetwork::new(&self.graph, &self.inputs)
    }

    pub fn simulate(&self) -> Result<Trajectory> {
        self.network()?.integrate(&self.params, &self.x0, &self.xi0, RhsForm::AgentLevel)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    load_scenario_with(path, &Overrides::default())
}

pub fn load_scenario_with(path: &Path, overrides: &Overrides) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    let mut file = ScenarioFile::parse(&text)?;
    file.apply(overrides);
    Scenario::from_file(&file)
}

/// The one-screen outcome of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub epsilon: f64,
    pub settled: bool,
    pub settling_time: Option<f64>,
    pub lambda2: f64,
    pub lambda_min_f: f64,
    pub final_delta_inf: f64,
    pub samples: usize,
    pub out_dir: PathBuf,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario       {}", self.name)?;
        writeln!(f, "epsilon        {}", self.epsilon)?;
        writeln!(f, "settled        {}", self.settled)?;
        match self.settling_time {
            Some(t) => writeln!(f, "settling time  {t}")?,
            None => writeln!(f, "settling time  -")?,
        }
        writeln!(f, "lambda2        {}", self.lambda2)?;
        writeln!(f, "lambda_min(F)  {}", self.lambda_min_f)?;
        writeln!(f, "|delta|_inf    {:e}", self.final_delta_inf)?;
        writeln!(f, "samples        {}", self.samples)?;
        write!(f, "output         {}", self.out_dir.display())
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns: `t, x_1..x_n, xi_1..xi_n, norm_delta_inf, V, sum_xi`.
pub fn trajectory_csv(traj: &Trajectory, frame: &ErrorFrame) -> String {
    let n = traj.samples.first().map_or(0, |s| s.x.len());
    let mut out = String::from("t");
    for i in 1..=n {
        write!(out, ",x_{i}").unwrap();
    }
    for i in 1..=n {
        write!(out, ",xi_{i}").unwrap();
    }
    out.push_str(",norm_delta_inf,V,sum_xi\n");
    for s in &traj.samples {
        let ec = frame.coordinates(s);
        let mut row = vec![fmt_float(s.t)];
        row.extend(s.x.iter().map(|v| fmt_float(*v)));
        row.extend(s.xi.iter().map(|v| fmt_float(*v)));
        row.push(fmt_float(ec.delta.amax()));
        row.push(fmt_float(crate::analysis::lyapunov(&ec)));
        row.push(fmt_float(s.xi.sum()));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Simulates, certifies and writes the run outputs.
pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<(RunSummary, CertificateReport)> {
    let net = scenario.network().map_err(as_validation)?;
    let traj = net.integrate(&scenario.params, &scenario.x0, &scenario.xi0, RhsForm::AgentLevel)?;
    let report = certify(&scenario.graph, &scenario.inputs, &traj, DEFAULT_SETTLE_TOL)?;
    let frame = ErrorFrame::from_parts(net.laplacian(), net.derived())?;

    let summary = RunSummary {
        name: scenario.name.clone(),
        epsilon: report.epsilon,
        settled: report.settled,
        settling_time: report.settling_time,
        lambda2: report.lambda2,
        lambda_min_f: report.lambda_min_f,
        final_delta_inf: report.final_delta_inf,
        samples: traj.samples.len(),
        out_dir: out_dir.to_path_buf(),
    };

    fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join(TRAJECTORY_FILE), trajectory_csv(&traj, &frame).as_bytes())?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&out_dir.join(CERTIFICATE_FILE), json.as_bytes())?;
    write_atomic(&out_dir.join(SUMMARY_FILE), format!("{summary}\n").as_bytes())?;
    Ok((summary, report))
}

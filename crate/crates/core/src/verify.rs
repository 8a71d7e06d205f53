//! Randomized property suite behind the `verify` subcommand.
//!
//! Every check is a plain function returning `Err(message)` on violation so
//! the same checks back the CLI and the test suites.

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;

use crate::analysis::{
    closed_loop_spectrum, dissipation, lyapunov, lyapunov_rate, lyapunov_slack, slowest_decay_rate,
    ErrorFrame, ZERO_EIGENVALUE_TOL,
};
use crate::dynamics::{ConsensusNetwork, ProtocolParams, RhsForm, default_step};
use crate::graph::{
    adjacency, degree, is_connected, is_connected_spectral, laplacian, laplacian_pseudoinverse, Graph,
};
use crate::layout::{average_of_inputs_expanded, DerivedLayout, InputLayout};
use crate::linalg::{symmetric_eigendecomposition, SquareMatrix};
use crate::random::{erdos_renyi, random_case, random_vector, rng_from_seed};

pub type Check = std::result::Result<(), String>;

/// `abs_tol`, widened to 64 ulps of `scale` when the quantities compared are
/// large enough for rounding alone to exceed it.
pub fn rounding_tol(abs_tol: f64, scale: f64) -> f64 {
    abs_tol.max(64.0 * f64::EPSILON * scale)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Quick,
    Full,
}

impl Suite {
    pub fn scenario_count(self) -> usize {
        match self {
            Suite::Quick => 50,
            Suite::Full => 500,
        }
    }

    pub fn max_agents(self) -> usize {
        match self {
            Suite::Quick => 8,
            Suite::Full => 20,
        }
    }
}

pub fn check_graph_matrices(g: &Graph) -> Check {
    let a = adjacency(g);
    let d = degree(g);
    let l = laplacian(g);
    ensure(a.iter().all(|v| *v == 0.0 || *v == 1.0), || "adjacency entry outside {0,1}".into())?;
    ensure(a == a.transpose() && l == l.transpose(), || "asymmetric adjacency or Laplacian".into())?;
    for i in 0..g.node_count() {
        ensure(d[(i, i)] == a.row(i).sum(), || format!("degree of node {} != adjacency row sum", i + 1))?;
    }
    let ones = DVector::from_element(g.node_count(), 1.0);
    ensure((&l * &ones).iter().all(|v| *v == 0.0), || "L 1 != 0".into())?;
    let eig = symmetric_eigendecomposition(&l).map_err(|e| e.to_string())?;
    ensure(eig.eigenvalues[0] >= -1e-10, || format!("negative Laplacian eigenvalue {}", eig.eigenvalues[0]))?;
    check_eigendecomposition(&l)
}

pub fn check_eigendecomposition(m: &SquareMatrix) -> Check {
    let eig = symmetric_eigendecomposition(m).map_err(|e| e.to_string())?;
    let n = m.nrows();
    let reconstruction = (eig.reconstruct() - m).amax();
    ensure(reconstruction <= 1e-9 * (1.0 + m.amax()), || {
        format!("reconstruction error {reconstruction:e}")
    })?;
    let orth = (eig.eigenvectors.transpose() * &eig.eigenvectors - SquareMatrix::identity(n, n)).amax();
    ensure(orth <= 1e-9, || format!("Q^T Q deviates from I by {orth:e}"))
}

pub fn check_connectivity_cross_check(g: &Graph) -> Check {
    let spectral = is_connected_spectral(g).map_err(|e| e.to_string())?;
    let traversal = is_connected(g);
    ensure(spectral == traversal, || {
        format!("traversal says connected={traversal}, spectral says {spectral}")
    })
}

pub fn check_pseudoinverse(g: &Graph) -> Check {
    let n = g.node_count();
    let l = laplacian(g);
    let p = laplacian_pseudoinverse(&l).map_err(|e| e.to_string())?;
    let projector = SquareMatrix::identity(n, n) - SquareMatrix::from_element(n, n, 1.0 / n as f64);
    let left = (&p * &l - &projector).amax();
    let right = (&l * &p - &projector).amax();
    ensure(left <= 1e-8 && right <= 1e-8, || format!("projector identity off by {:e}", left.max(right)))?;
    ensure(p == p.transpose(), || "pseudoinverse not symmetric".into())?;
    let null = (&p * DVector::from_element(n, 1.0)).amax();
    ensure(null <= 1e-9, || format!("L^+ 1 = {null:e}"))
}

pub fn check_layout_invariants(layout: &InputLayout, derived: &DerivedLayout) -> Check {
    let n = layout.agent_count();
    for i in 0..n {
        ensure(derived.k1[(i, i)] == derived.k2.row(i).sum(), || {
            format!("k1 of agent {} != row sum of K2", i + 1)
        })?;
    }
    ensure(derived.k2.iter().all(|v| *v == 0.0 || *v == 1.0), || "K2 not binary".into())?;
    let mass_ratio = derived.k1.trace() / derived.k2.sum();
    ensure((mass_ratio - 1.0).abs() <= 1e-14, || format!("1'K1 1 / 1'K2 1 = {mass_ratio}"))?;
    let ones = DVector::from_element(n, 1.0);
    let annihilated = (derived.lc.transpose() * &ones).amax();
    ensure(annihilated <= 1e-12, || format!("1' L_c has entry {annihilated:e}"))?;
    let expanded = average_of_inputs_expanded(layout);
    ensure((derived.epsilon - expanded).abs() <= 1e-14, || {
        format!("epsilon {} != double-sum average {expanded}", derived.epsilon)
    })
}

pub fn check_form_equivalence(net: &ConsensusNetwork, params: &ProtocolParams, x: &DVector<f64>, xi: &DVector<f64>) -> Check {
    let gap = net.form_gap(params, x, xi);
    let d_max = net.graph().max_degree() as f64;
    let input_mass: f64 = net.layout().inputs().iter().map(|i| i.value.abs() * i.targets.len() as f64).sum();
    let scale = params.alpha * ((2.0 * d_max + net.derived().max_input_degree()) * x.amax() + input_mass)
        + (1.0 + params.gamma) * 2.0 * d_max * x.amax().max(xi.amax());
    let tol = rounding_tol(1e-12, scale);
    ensure(gap <= tol, || format!("agent-level and compact forms differ by {gap:e} (tol {tol:e})"))
}

pub fn check_locality(net: &ConsensusNetwork, rng: &mut impl Rng) -> Check {
    let n = net.n();
    let params = ProtocolParams::base(0.01, 1.0).expect("valid");
    let x = random_vector(rng, n, 10.0);
    let xi = random_vector(rng, n, 10.0);
    let (dx, dxi) = net.rhs_agent_level(&params, &x, &xi);
    for i in 1..=n {
        let outside: Vec<usize> = (1..=n)
            .filter(|&k| k != i && !net.graph().neighbors(i).any(|j| j == k))
            .collect();
        if outside.is_empty() {
            continue;
        }
        let (mut x2, mut xi2) = (x.clone(), xi.clone());
        for &k in &outside {
            x2[k - 1] += 1e3;
            xi2[k - 1] -= 1e3;
        }
        let (dx2, dxi2) = net.rhs_agent_level(&params, &x2, &xi2);
        ensure(dx[i - 1] == dx2[i - 1] && dxi[i - 1] == dxi2[i - 1], || {
            format!("agent {i} reacts to non-neighbors {outside:?}")
        })?;
    }
    Ok(())
}

/// The generalized protocol at `alpha = gamma = 1` must reproduce the base
/// protocol bit for bit.
pub fn check_gain_reduction(net: &ConsensusNetwork, x0: &DVector<f64>, xi0: &DVector<f64>, t_final: f64) -> Check {
    let dt = default_step(net.graph(), net.derived(), 1.0, 1.0);
    let params = ProtocolParams::base(dt, t_final).map_err(|e| e.to_string())?;
    let general = net.integrate(&params, x0, xi0, RhsForm::AgentLevel).map_err(|e| e.to_string())?;
    let base = net.integrate_base(&params, x0, xi0).map_err(|e| e.to_string())?;
    ensure(general == base, || "generalized protocol at unit gains differs from the base protocol".into())
}

/// Spectral side of the certificate: connectivity, `F > 0`, one zero
/// closed-loop eigenvalue, all others strictly stable.
pub fn check_spectrum(net: &ConsensusNetwork) -> Check {
    let l = net.laplacian();
    let f = l + &net.derived().k1;
    let lambda2 = if net.n() > 1 {
        symmetric_eigendecomposition(l).map_err(|e| e.to_string())?.eigenvalues[1]
    } else {
        f64::INFINITY
    };
    ensure(lambda2 > 1e-8, || format!("lambda2 = {lambda2:e}"))?;
    let lambda_min_f = symmetric_eigendecomposition(&f).map_err(|e| e.to_string())?.eigenvalues[0];
    ensure(lambda_min_f > 0.0, || format!("lambda_min(F) = {lambda_min_f:e}"))?;
    let spectrum = closed_loop_spectrum(l, &f).map_err(|e| e.to_string())?;
    let zeros = spectrum.iter().filter(|z| z.norm() < ZERO_EIGENVALUE_TOL).count();
    ensure(zeros == 1, || format!("{zeros} closed-loop eigenvalues near zero"))?;
    ensure(
        spectrum
            .iter()
            .filter(|z| z.norm() >= ZERO_EIGENVALUE_TOL)
            .all(|z| z.re < -1e-10),
        || "closed-loop eigenvalue with Re >= -1e-10".into(),
    )
}

/// Outcome of the per-sample checks along one base-gain trajectory.
#[derive(Debug, Clone, Default)]
pub struct RunChecks {
    pub conservation: Option<String>,
    pub lyapunov_monotone: Option<String>,
    pub dissipation_identity: Option<String>,
    pub derivation: Option<String>,
    pub convergence: Option<String>,
    pub max_state_error: f64,
}

/// Integrates the base protocol (`alpha = gamma = 1`) to `t_final` and checks
/// conservation of `sum xi`, Lyapunov monotonicity, the dissipation identity,
/// the error-coordinate derivation and final convergence to `epsilon`
/// computed by double summation.
///
/// The dissipation and derivation checks use 1e-10 widened by
/// [`rounding_tol`] to the magnitude of the terms involved.
pub fn run_checks(
    net: &ConsensusNetwork,
    x0: &DVector<f64>,
    xi0: &DVector<f64>,
    t_final: f64,
) -> crate::Result<RunChecks> {
    let dt = default_step(net.graph(), net.derived(), 1.0, 1.0).min(t_final);
    let params = ProtocolParams::base(dt, t_final)?;
    let frame = ErrorFrame::from_parts(net.laplacian(), net.derived())?;
    let sum0 = xi0.sum();
    let conservation_tol = 1e-8 * (1.0 + sum0.abs());

    let n = net.n();
    let row_norm = |m: &SquareMatrix| m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let l_norm = row_norm(&frame.laplacian);
    let f_norm = row_norm(&frame.f);
    let forcing_norm = net.derived().forcing().amax();
    let shift_target = (&net.derived().lc * net.derived().forcing()).amax();
    let conditioning = l_norm * row_norm(&frame.ldag);

    let mut out = RunChecks::default();
    let mut v0 = None;
    let mut prev_v: Option<f64> = None;
    let mut worst_dissipation = 0.0f64;
    let mut worst_defect = 0.0f64;

    let last = net.integrate_observed(&params, x0, xi0, RhsForm::AgentLevel, |s| {
        let drift = (s.xi.sum() - sum0).abs();
        if drift > conservation_tol && out.conservation.is_none() {
            out.conservation = Some(format!("sum(xi) drifted by {drift:e} at t = {}", s.t));
        }
        let ec = frame.coordinates(s);
        let v = lyapunov(&ec);
        let slack = lyapunov_slack(*v0.get_or_insert(v));
        if let Some(p) = prev_v {
            if v > p + slack && out.lyapunov_monotone.is_none() {
                out.lyapunov_monotone = Some(format!("V rose from {p:e} to {v:e} at t = {}", s.t));
            }
        }
        prev_v = Some(v);
        let rate = lyapunov_rate(&ec, &frame.laplacian, &frame.f).expect("consistent dimensions");
        let (d, e) = (ec.delta.amax(), ec.e.amax());
        let rate_scale = n as f64 * (d * (f_norm * d + l_norm * e) + e * l_norm * d);
        let gap = (rate - dissipation(&ec, &frame.f)).abs();
        worst_dissipation = worst_dissipation.max(gap / rounding_tol(1e-10, rate_scale));
        let defect_scale = f_norm * d + l_norm * (s.xi.amax() + frame.offset.amax()) + forcing_norm
            + l_norm * s.x.amax()
            + conditioning * shift_target;
        let defect = frame.derivation_defect(net, &params, s);
        worst_defect = worst_defect.max(defect / rounding_tol(1e-10, defect_scale));
    })?;

    if worst_dissipation > 1.0 {
        out.dissipation_identity = Some(format!(
            "dV/dt differs from -delta'F delta by {worst_dissipation:.2} times the tolerance"
        ));
    }
    if worst_defect > 1.0 {
        out.derivation = Some(format!("error-coordinate defect {worst_defect:.2} times the tolerance"));
    }
    let epsilon = average_of_inputs_expanded(net.layout());
    out.max_state_error = last.x.iter().fold(0.0, |acc, x| acc.max((x - epsilon).abs()));
    if !(out.max_state_error < 1e-6) {
        out.convergence = Some(format!(
            "max |x_i - eps| = {:e} at t = {t_final}",
            out.max_state_error
        ));
    }
    Ok(out)
}

/// Horizon used by the suite's convergence check: the larger of
/// `50 / lambda_min(F)` and `40 / sigma`, with `sigma` the slowest nonzero
/// closed-loop decay rate.
pub fn convergence_horizon(net: &ConsensusNetwork) -> crate::Result<f64> {
    let l = net.laplacian();
    let f = l + &net.derived().k1;
    let lambda_min_f = symmetric_eigendecomposition(&f)?.eigenvalues[0];
    let spectrum = closed_loop_spectrum(l, &f)?;
    let sigma = slowest_decay_rate(&spectrum).unwrap_or(lambda_min_f);
    Ok((50.0 / lambda_min_f).max(40.0 / sigma))
}

#[derive(Debug, Clone, Default)]
pub struct PropertyOutcome {
    pub checked: usize,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub suite: Suite,
    pub scenarios: usize,
    pub classes: BTreeMap<&'static str, PropertyOutcome>,
    pub elapsed: Duration,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.classes.values().all(|c| c.failures.is_empty())
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {:?}: {} scenarios in {:.1?}", self.suite, self.scenarios, self.elapsed)?;
        for (name, outcome) in &self.classes {
            let status = if outcome.failures.is_empty() { "PASS" } else { "FAIL" };
            writeln!(
                f,
                "{status} {name:<32} {}/{} ok",
                outcome.checked - outcome.failures.len(),
                outcome.checked
            )?;
            for failure in outcome.failures.iter().take(3) {
                writeln!(f, "     {failure}")?;
            }
        }
        write!(f, "{}", if self.passed() { "all properties hold" } else { "property failures detected" })
    }
}

const SUITE_SEED: u64 = 0x5eed_ac71;

pub fn run_suite(suite: Suite) -> VerifyReport {
    let start = Instant::now();
    let mut classes: BTreeMap<&'static str, PropertyOutcome> = BTreeMap::new();
    let mut record = |name: &'static str, seed: u64, result: Check| {
        let entry = classes.entry(name).or_default();
        entry.checked += 1;
        if let Err(msg) = result {
            entry.failures.push(format!("seed {seed}: {msg}"));
        }
    };

    for k in 0..suite.scenario_count() {
        let seed = SUITE_SEED + k as u64;
        let case = random_case(seed, 2, suite.max_agents());
        let mut rng = rng_from_seed(seed ^ 0xffff);
        let n = case.graph.node_count();

        record("graph.matrices", seed, check_graph_matrices(&case.graph));
        record("graph.pseudoinverse", seed, check_pseudoinverse(&case.graph));
        let p = rng.gen_range(0.05..0.6);
        let maybe_disconnected = erdos_renyi(&mut rng, n, p);
        record("graph.connectivity", seed, check_connectivity_cross_check(&maybe_disconnected));

        let net = match ConsensusNetwork::new(&case.graph, &case.layout) {
            Ok(net) => net,
            Err(e) => {
                record("network.construction", seed, Err(e.to_string()));
                continue;
            }
        };
        record("layout.invariants", seed, check_layout_invariants(&case.layout, net.derived()));
        record("linalg.eigen_f", seed, check_eigendecomposition(&(net.laplacian() + &net.derived().k1)));

        let x = random_vector(&mut rng, n, 100.0);
        let xi = random_vector(&mut rng, n, 100.0);
        let alpha = rng.gen_range(0.1..5.0);
        let gamma = rng.gen_range(0.1..5.0);
        let gained = ProtocolParams::new(alpha, gamma, 0.01, 1.0).expect("valid");
        record("dynamics.form_equivalence", seed, check_form_equivalence(&net, &gained, &x, &xi));
        record("dynamics.locality", seed, check_locality(&net, &mut rng));

        let x0 = random_vector(&mut rng, n, 10.0);
        let xi0 = random_vector(&mut rng, n, 10.0);
        record("dynamics.gain_reduction", seed, check_gain_reduction(&net, &x0, &xi0, 2.0));
        record("analysis.spectrum", seed, check_spectrum(&net));

        let checks = convergence_horizon(&net).and_then(|t| run_checks(&net, &x0, &xi0, t));
        match checks {
            Ok(c) => {
                let to_check = |o: Option<String>| o.map_or(Ok(()), Err);
                record("dynamics.conservation", seed, to_check(c.conservation));
                record("analysis.lyapunov_monotone", seed, to_check(c.lyapunov_monotone));
                record("analysis.dissipation_identity", seed, to_check(c.dissipation_identity));
                record("analysis.derivation", seed, to_check(c.derivation));
                record("analysis.convergence", seed, to_check(c.convergence));
            }
            Err(e) => record("analysis.run", seed, Err(e.to_string())),
        }
    }

    VerifyReport {
        suite,
        scenarios: suite.scenario_count(),
        classes,
        elapsed: start.elapsed(),
    }
}

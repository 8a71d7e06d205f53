//! The integral-action consensus protocol: right-hand sides in agent-level
//! and compact matrix form, and a fixed-step RK4 integrator.
//!
//! Agent `i` evolves as
//!
//! ```text
//! dx_i  = -a * sum_{j~i} (x_i - x_j) + sum_{j~i} (xi_i - xi_j) - a * sum_{h~i} (x_i - c_h)
//! dxi_i = -g * sum_{j~i} (x_i - x_j)
//! ```
//!
//! with gains `a = alpha`, `g = gamma`; `alpha = gamma = 1` is the base
//! protocol. In matrix form, `dx = -a L x + L xi - a K1 x + a K2 c` and
//! `dxi = -g L x`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::{is_connected, laplacian, Graph};
use crate::layout::{build_derived, DerivedLayout, InputLayout};
use crate::linalg::SquareMatrix;

/// States beyond this magnitude abort integration.
pub const BLOWUP_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// State-coupling gain.
    pub alpha: f64,
    /// Integral gain.
    pub gamma: f64,
    /// Integrator step.
    pub dt: f64,
    /// Horizon.
    pub t_final: f64,
}

impl ProtocolParams {
    pub fn new(alpha: f64, gamma: f64, dt: f64, t_final: f64) -> Result<Self> {
        let params = ProtocolParams {
            alpha,
            gamma,
            dt,
            t_final,
        };
        params.validate()?;
        Ok(params)
    }

    /// `alpha = gamma = 1`.
    pub fn base(dt: f64, t_final: f64) -> Result<Self> {
        Self::new(1.0, 1.0, dt, t_final)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParams {
                    field: field.into(),
                    message: format!("must be a positive finite number, got {v}"),
                })
            }
        };
        positive("alpha", self.alpha)?;
        positive("gamma", self.gamma)?;
        positive("dt", self.dt)?;
        positive("t_final", self.t_final)?;
        if self.dt > self.t_final {
            return Err(Error::InvalidParams {
                field: "dt".into(),
                message: format!("step {} exceeds horizon {}", self.dt, self.t_final),
            });
        }
        Ok(())
    }

    pub fn is_base(&self) -> bool {
        self.alpha == 1.0 && self.gamma == 1.0
    }
}

/// Default step `min(0.01, 0.1 / rho)` where
/// `rho = alpha (2 d_max + k1_max) + max(1, gamma) 2 d_max` bounds the
/// spectral radius of the linear dynamics.
pub fn default_step(g: &Graph, derived: &DerivedLayout, alpha: f64, gamma: f64) -> f64 {
    let d_max = g.max_degree() as f64;
    let rho = alpha * (2.0 * d_max + derived.max_input_degree()) + gamma.max(1.0) * 2.0 * d_max;
    (0.1 / rho).min(0.01)
}

/// Stacked agent states `x` and integral actions `xi` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: f64,
    pub x: DVector<f64>,
    pub xi: DVector<f64>,
}

impl NetworkState {
    pub fn new(t: f64, x: DVector<f64>, xi: DVector<f64>) -> Self {
        NetworkState { t, x, xi }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(0.0, DVector::zeros(n), DVector::zeros(n))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.xi.iter()).all(|v| v.is_finite())
    }

    fn max_abs(&self) -> f64 {
        self.x.iter().chain(self.xi.iter()).fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Samples at `t = 0, dt, 2 dt, ...` ending exactly at `t_final`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ProtocolParams,
    pub samples: Vec<NetworkState>,
}

impl Trajectory {
    pub fn last(&self) -> &NetworkState {
        self.samples.last().expect("trajectory has at least the initial sample")
    }
}

/// Number of full steps and the length of the trailing partial step (0 when
/// `t_final` is a whole number of steps).
pub fn step_schedule(params: &ProtocolParams) -> (usize, f64) {
    let full = (params.t_final / params.dt).floor() as usize;
    let residual = params.t_final - full as f64 * params.dt;
    if residual > 1e-12 * params.t_final {
        (full, residual)
    } else {
        (full, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsForm {
    AgentLevel,
    Compact,
}

/// What one agent sees of itself or of one neighbor.
#[derive(Debug, Clone, Copy)]
pub struct LocalState {
    pub x: f64,
    pub xi: f64,
}

struct LocalSums {
    state_disagreement: f64,
    integral_disagreement: f64,
    input_mismatch: f64,
}

fn local_sums(
    own: LocalState,
    neighbors: impl Iterator<Item = LocalState>,
    inputs: &[f64],
) -> LocalSums {
    let mut state_disagreement = 0.0;
    let mut integral_disagreement = 0.0;
    for nb in neighbors {
        state_disagreement += own.x - nb.x;
        integral_disagreement += own.xi - nb.xi;
    }
    let mut input_mismatch = 0.0;
    for &c in inputs {
        input_mismatch += own.x - c;
    }
    LocalSums {
        state_disagreement,
        integral_disagreement,
        input_mismatch,
    }
}

/// One agent's update from its own state, its neighbors' states and its
/// inputs. Nothing else is in scope.
pub fn agent_update(
    own: LocalState,
    neighbors: impl Iterator<Item = LocalState>,
    inputs: &[f64],
    alpha: f64,
    gamma: f64,
) -> (f64, f64) {
    let s = local_sums(own, neighbors, inputs);
    (
        -alpha * s.state_disagreement + s.integral_disagreement - alpha * s.input_mismatch,
        -gamma * s.state_disagreement,
    )
}

/// The ungained protocol, kept as a separate expression for the
/// `alpha = gamma = 1` reduction check.
pub fn agent_update_base(
    own: LocalState,
    neighbors: impl Iterator<Item = LocalState>,
    inputs: &[f64],
) -> (f64, f64) {
    let s = local_sums(own, neighbors, inputs);
    (
        -s.state_disagreement + s.integral_disagreement - s.input_mismatch,
        -s.state_disagreement,
    )
}

/// Validated graph + inputs with their matrix forms precomputed.
#[derive(Debug, Clone)]
pub struct ConsensusNetwork {
    graph: Graph,
    layout: InputLayout,
    laplacian: SquareMatrix,
    derived: DerivedLayout,
    forcing: DVector<f64>,
}

impl ConsensusNetwork {
    pub fn new(graph: &Graph, layout: &InputLayout) -> Result<Self> {
        if layout.agent_count() != graph.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "input layout has {} agents, graph has {} nodes",
                layout.agent_count(),
                graph.node_count()
            )));
        }
        if !is_connected(graph) {
            return Err(Error::GraphNotConnected);
        }
        let derived = build_derived(layout)?;
        Ok(ConsensusNetwork {
            graph: graph.clone(),
            layout: layout.clone(),
            laplacian: laplacian(graph),
            forcing: derived.forcing(),
            derived,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn layout(&self) -> &InputLayout {
        &self.layout
    }

    pub fn laplacian(&self) -> &SquareMatrix {
        &self.laplacian
    }

    pub fn derived(&self) -> &DerivedLayout {
        &self.derived
    }

    pub fn n(&self) -> usize {
        self.graph.node_count()
    }

    fn check_dims(&self, x: &DVector<f64>, xi: &DVector<f64>) -> Result<()> {
        let n = self.n();
        if x.len() != n || xi.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "state lengths x={}, xi={} for {n} agents",
                x.len(),
                xi.len()
            )));
        }
        Ok(())
    }

    fn agent_level_with<F>(&self, x: &DVector<f64>, xi: &DVector<f64>, update: F) -> (DVector<f64>, DVector<f64>)
    where
        F: Fn(LocalState, &mut dyn Iterator<Item = LocalState>, &[f64]) -> (f64, f64),
    {
        let n = self.n();
        let mut dx = DVector::zeros(n);
        let mut dxi = DVector::zeros(n);
        for i in 0..n {
            let own = LocalState { x: x[i], xi: xi[i] };
            let mut neighbors = self
                .graph
                .neighbors0(i)
                .iter()
                .map(|&j| LocalState { x: x[j], xi: xi[j] });
            let (a, b) = update(own, &mut neighbors, self.layout.attached0(i));
            dx[i] = a;
            dxi[i] = b;
        }
        (dx, dxi)
    }

    pub fn rhs_agent_level(&self, params: &ProtocolParams, x: &DVector<f64>, xi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (alpha, gamma) = (params.alpha, params.gamma);
        self.agent_level_with(x, xi, |own, nb, inputs| agent_update(own, nb, inputs, alpha, gamma))
    }

    pub fn rhs_base(&self, x: &DVector<f64>, xi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        self.agent_level_with(x, xi, |own, nb, inputs| agent_update_base(own, nb, inputs))
    }

    pub fn rhs_compact(&self, params: &ProtocolParams, x: &DVector<f64>, xi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        compact_terms(&self.laplacian, &self.derived.k1, &self.forcing, params, x, xi)
    }

    pub fn rhs(&self, form: RhsForm, params: &ProtocolParams, x: &DVector<f64>, xi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match form {
            RhsForm::AgentLevel => self.rhs_agent_level(params, x, xi),
            RhsForm::Compact => self.rhs_compact(params, x, xi),
        }
    }

    /// Integrates with the chosen right-hand side, handing every sample to
    /// `observe` without storing it. Returns the final state.
    pub fn integrate_observed(
        &self,
        params: &ProtocolParams,
        x0: &DVector<f64>,
        xi0: &DVector<f64>,
        form: RhsForm,
        observe: impl FnMut(&NetworkState),
    ) -> Result<NetworkState> {
        let p = *params;
        self.integrate_with(params, x0, xi0, |x, xi| self.rhs(form, &p, x, xi), observe)
    }

    pub fn integrate(&self, params: &ProtocolParams, x0: &DVector<f64>, xi0: &DVector<f64>, form: RhsForm) -> Result<Trajectory> {
        let mut samples = Vec::with_capacity(step_schedule(params).0 + 2);
        self.integrate_observed(params, x0, xi0, form, |s| samples.push(s.clone()))?;
        Ok(Trajectory {
            params: *params,
            samples,
        })
    }

    /// Trajectory of the ungained protocol. `params.alpha`/`gamma` are ignored
    /// apart from being recorded in the result.
    pub fn integrate_base(&self, params: &ProtocolParams, x0: &DVector<f64>, xi0: &DVector<f64>) -> Result<Trajectory> {
        let mut samples = Vec::with_capacity(step_schedule(params).0 + 2);
        self.integrate_with(params, x0, xi0, |x, xi| self.rhs_base(x, xi), |s| samples.push(s.clone()))?;
        Ok(Trajectory {
            params: *params,
            samples,
        })
    }

    fn integrate_with<F>(
        &self,
        params: &ProtocolParams,
        x0: &DVector<f64>,
        xi0: &DVector<f64>,
        rhs: F,
        mut observe: impl FnMut(&NetworkState),
    ) -> Result<NetworkState>
    where
        F: Fn(&DVector<f64>, &DVector<f64>) -> (DVector<f64>, DVector<f64>),
    {
        params.validate()?;
        self.check_dims(x0, xi0)?;
        let mut state = NetworkState::new(0.0, x0.clone(), xi0.clone());
        check_blowup(&state)?;
        observe(&state);

        let (full_steps, residual) = step_schedule(params);
        for k in 1..=full_steps {
            let (x, xi) = rk4_step(&rhs, &state.x, &state.xi, params.dt);
            let t = if residual == 0.0 && k == full_steps {
                params.t_final
            } else {
                k as f64 * params.dt
            };
            state = NetworkState::new(t, x, xi);
            check_blowup(&state)?;
            observe(&state);
        }
        if residual > 0.0 {
            let (x, xi) = rk4_step(&rhs, &state.x, &state.xi, residual);
            state = NetworkState::new(params.t_final, x, xi);
            check_blowup(&state)?;
            observe(&state);
        }
        Ok(state)
    }
}

fn check_blowup(s: &NetworkState) -> Result<()> {
    if !s.is_finite() || s.max_abs() > BLOWUP_LIMIT {
        return Err(Error::NumericalBlowup {
            t: s.t,
            limit: BLOWUP_LIMIT,
        });
    }
    Ok(())
}

fn rk4_step<F>(rhs: &F, x: &DVector<f64>, xi: &DVector<f64>, h: f64) -> (DVector<f64>, DVector<f64>)
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> (DVector<f64>, DVector<f64>),
{
    let (k1x, k1xi) = rhs(x, xi);
    let (k2x, k2xi) = rhs(&(x + &k1x * (0.5 * h)), &(xi + &k1xi * (0.5 * h)));
    let (k3x, k3xi) = rhs(&(x + &k2x * (0.5 * h)), &(xi + &k2xi * (0.5 * h)));
    let (k4x, k4xi) = rhs(&(x + &k3x * h), &(xi + &k3xi * h));
    let w = h / 6.0;
    let x_next = x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * w;
    let xi_next = xi + (k1xi + k2xi * 2.0 + k3xi * 2.0 + k4xi) * w;
    (x_next, xi_next)
}

fn compact_terms(
    l: &SquareMatrix,
    k1: &SquareMatrix,
    forcing: &DVector<f64>,
    params: &ProtocolParams,
    x: &DVector<f64>,
    xi: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let lx = l * x;
    let dx = -(&lx * params.alpha) + l * xi - (k1 * x) * params.alpha + forcing * params.alpha;
    let dxi = -(lx * params.gamma);
    (dx, dxi)
}

/// Agent-level right-hand side. Requires a connected graph.
pub fn rhs_agent_level(
    g: &Graph,
    layout: &InputLayout,
    params: &ProtocolParams,
    s: &NetworkState,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let net = ConsensusNetwork::new(g, layout)?;
    net.check_dims(&s.x, &s.xi)?;
    Ok(net.rhs_agent_level(params, &s.x, &s.xi))
}

/// Compact right-hand side from `L` and the derived layout.
pub fn rhs_compact(
    l: &SquareMatrix,
    derived: &DerivedLayout,
    params: &ProtocolParams,
    s: &NetworkState,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = l.nrows();
    let dims_ok = l.is_square()
        && derived.k1.shape() == (n, n)
        && derived.k2.shape() == (n, n)
        && derived.c_padded.len() == n
        && s.x.len() == n
        && s.xi.len() == n;
    if !dims_ok {
        return Err(Error::DimensionMismatch(format!(
            "L is {}x{}, K1 {:?}, K2 {:?}, c {}, x {}, xi {}",
            l.nrows(),
            l.ncols(),
            derived.k1.shape(),
            derived.k2.shape(),
            derived.c_padded.len(),
            s.x.len(),
            s.xi.len()
        )));
    }
    Ok(compact_terms(l, &derived.k1, &derived.forcing(), params, &s.x, &s.xi))
}

pub fn integrate(
    g: &Graph,
    layout: &InputLayout,
    params: &ProtocolParams,
    x0: &DVector<f64>,
    xi0: &DVector<f64>,
    form: RhsForm,
) -> Result<Trajectory> {
    ConsensusNetwork::new(g, layout)?.integrate(params, x0, xi0, form)
}

/// Largest entrywise gap between the agent-level and compact right-hand sides.
pub fn agent_compact_equivalence(
    g: &Graph,
    layout: &InputLayout,
    params: &ProtocolParams,
    s: &NetworkState,
) -> Result<f64> {
    let net = ConsensusNetwork::new(g, layout)?;
    net.check_dims(&s.x, &s.xi)?;
    Ok(net.form_gap(params, &s.x, &s.xi))
}

impl ConsensusNetwork {
    pub fn form_gap(&self, params: &ProtocolParams, x: &DVector<f64>, xi: &DVector<f64>) -> f64 {
        let (ax, axi) = self.rhs_agent_level(params, x, xi);
        let (cx, cxi) = self.rhs_compact(params, x, xi);
        (ax - cx).amax().max((axi - cxi).amax())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::laplacian_pseudoinverse;
    use crate::layout::ExogenousInput;

    fn single(n: usize, value: f64, targets: &[usize]) -> InputLayout {
        InputLayout::new(
            n,
            vec![ExogenousInput {
                value,
                targets: targets.to_vec(),
            }],
        )
        .unwrap()
    }

    fn base_params() -> ProtocolParams {
        ProtocolParams::base(0.01, 1.0).unwrap()
    }

    #[test]
    fn single_agent_rhs() {
        let g = Graph::new(1, []).unwrap();
        let s = NetworkState::zeros(1);
        let (dx, dxi) = rhs_agent_level(&g, &single(1, 5.0, &[1]), &base_params(), &s).unwrap();
        assert_eq!(dx.as_slice(), &[5.0]);
        assert_eq!(dxi.as_slice(), &[0.0]);
    }

    #[test]
    fn zero_state_zero_inputs_is_stationary() {
        let g = Graph::path(4);
        let layout = InputLayout::new(
            4,
            vec![
                ExogenousInput { value: 0.0, targets: vec![1, 3] },
                ExogenousInput { value: 0.0, targets: vec![4] },
            ],
        )
        .unwrap();
        let s = NetworkState::zeros(4);
        let (dx, dxi) = rhs_agent_level(&g, &layout, &base_params(), &s).unwrap();
        assert!(dx.iter().chain(dxi.iter()).all(|v| *v == 0.0));
        assert_eq!(agent_compact_equivalence(&g, &layout, &base_params(), &s).unwrap(), 0.0);
    }

    #[test]
    fn compact_rhs_on_p2() {
        let layout = single(2, 4.0, &[1]);
        let l = laplacian(&Graph::path(2));
        let d = build_derived(&layout).unwrap();
        let (dx, dxi) = rhs_compact(&l, &d, &base_params(), &NetworkState::zeros(2)).unwrap();
        assert_eq!(dx.as_slice(), &[4.0, 0.0]);
        assert_eq!(dxi.as_slice(), &[0.0, 0.0]);

        let bad = NetworkState::zeros(3);
        assert!(matches!(
            rhs_compact(&l, &d, &base_params(), &bad),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn equilibrium_is_stationary_in_both_forms() {
        let g = Graph::path(3);
        let layout = InputLayout::new(
            3,
            vec![
                ExogenousInput { value: 7.0, targets: vec![1] },
                ExogenousInput { value: -2.0, targets: vec![2, 3] },
            ],
        )
        .unwrap();
        let d = build_derived(&layout).unwrap();
        let l = laplacian(&g);
        let ldag = laplacian_pseudoinverse(&l).unwrap();
        let x = DVector::from_element(3, d.epsilon);
        let xi = &ldag * &d.lc * d.forcing();
        let s = NetworkState::new(0.0, x, xi);
        let (dx, dxi) = rhs_agent_level(&g, &layout, &base_params(), &s).unwrap();
        assert!(dx.amax() < 1e-10 && dxi.amax() < 1e-10, "{dx} {dxi}");
        let (dx, dxi) = rhs_compact(&l, &d, &base_params(), &s).unwrap();
        assert!(dx.amax() < 1e-10 && dxi.amax() < 1e-10);
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let g = Graph::new(2, []).unwrap();
        let s = NetworkState::zeros(2);
        assert!(matches!(
            rhs_agent_level(&g, &single(2, 1.0, &[1]), &base_params(), &s),
            Err(Error::GraphNotConnected)
        ));
        assert!(matches!(
            integrate(&g, &single(2, 1.0, &[1]), &base_params(), &s.x, &s.xi, RhsForm::Compact),
            Err(Error::GraphNotConnected)
        ));
    }

    #[test]
    fn params_validation() {
        assert!(ProtocolParams::new(0.0, 1.0, 0.1, 1.0).is_err());
        assert!(ProtocolParams::new(1.0, -1.0, 0.1, 1.0).is_err());
        assert!(ProtocolParams::new(1.0, 1.0, 2.0, 1.0).is_err());
        assert!(ProtocolParams::new(1.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(ProtocolParams::new(2.0, 0.5, 1.0, 1.0).is_ok());
    }

    #[test]
    fn step_schedule_handles_partial_step() {
        let p = ProtocolParams::base(0.3, 1.0).unwrap();
        let (full, residual) = step_schedule(&p);
        assert_eq!(full, 3);
        assert!((residual - 0.1).abs() < 1e-12);
        assert_eq!(step_schedule(&ProtocolParams::base(0.25, 1.0).unwrap()), (4, 0.0));
    }

    #[test]
    fn trajectory_time_grid() {
        let g = Graph::path(2);
        let layout = single(2, 4.0, &[1]);
        let p = ProtocolParams::base(0.3, 1.0).unwrap();
        let z = DVector::zeros(2);
        let traj = integrate(&g, &layout, &p, &z, &z, RhsForm::AgentLevel).unwrap();
        let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 5);
        assert_eq!(times[0], 0.0);
        assert_eq!(*times.last().unwrap(), 1.0);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        for (k, t) in times.iter().take(4).enumerate() {
            assert_eq!(*t, k as f64 * 0.3);
        }
    }

    #[test]
    fn single_agent_matches_closed_form() {
        let g = Graph::new(1, []).unwrap();
        let layout = single(1, 5.0, &[1]);
        let p = ProtocolParams::base(0.01, 1.0).unwrap();
        let z = DVector::zeros(1);
        let traj = integrate(&g, &layout, &p, &z, &z, RhsForm::AgentLevel).unwrap();
        let x1 = traj.last().x[0];
        assert!((x1 - 3.1606).abs() < 1e-4);
        assert!((x1 - 5.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-6);
    }

    #[test]
    fn huge_step_blows_up() {
        let g = Graph::complete(6);
        let layout = single(6, 1.0, &[1, 2, 3, 4, 5, 6]);
        let p = ProtocolParams::base(10.0, 1000.0).unwrap();
        let z = DVector::zeros(6);
        let err = integrate(&g, &layout, &p, &z, &z, RhsForm::AgentLevel).unwrap_err();
        assert!(matches!(err, Error::NumericalBlowup { .. }));
    }

    #[test]
    fn default_step_rule() {
        let g = Graph::path(3);
        let d = build_derived(&single(3, 1.0, &[2])).unwrap();
        // rho = 1*(4 + 1) + 1*4 = 9
        assert_eq!(default_step(&g, &d, 1.0, 1.0), 0.01);
        // rho = 10*5 + 4 = 54 -> 0.1/54
        assert_eq!(default_step(&g, &d, 10.0, 1.0), 0.1 / 54.0);
    }

    #[test]
    fn locality_non_neighbor_mutation() {
        let g = Graph::path(4);
        let layout = single(4, 3.0, &[4]);
        let net = ConsensusNetwork::new(&g, &layout).unwrap();
        let p = base_params();
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 4.0]);
        let xi = DVector::from_vec(vec![0.3, 0.1, -0.7, 2.0]);
        let (dx, dxi) = net.rhs_agent_level(&p, &x, &xi);
        let mut x2 = x.clone();
        let mut xi2 = xi.clone();
        x2[3] = 1e6;
        xi2[3] = -1e6;
        let (dx2, dxi2) = net.rhs_agent_level(&p, &x2, &xi2);
        // agents 1 and 2 do not neighbor agent 4
        assert_eq!(dx[0], dx2[0]);
        assert_eq!(dx[1], dx2[1]);
        assert_eq!(dxi[0], dxi2[0]);
        assert_eq!(dxi[1], dxi2[1]);
    }
}

//! Error coordinates, the Lyapunov function and the convergence certificate.
//!
//! With `delta = x - eps 1` and `e = xi - L^+ L_c K2 c`, the base protocol
//! becomes `d(delta) = -F delta + L e`, `de = -L delta`, `F = L + K1`, and
//! `V = (|delta|^2 + |e|^2) / 2` satisfies `dV = -delta^T F delta`.

use nalgebra::{Complex, DVector};
use serde::Serialize;

use crate::dynamics::{ConsensusNetwork, NetworkState, ProtocolParams, Trajectory};
use crate::error::{Error, Result};
use crate::graph::{laplacian, laplacian_pseudoinverse, Graph};
use crate::layout::{build_derived, DerivedLayout, InputLayout};
use crate::linalg::{general_eigenvalues, symmetric_eigendecomposition, SquareMatrix};

/// Eigenvalues with modulus below this count as zero in the closed-loop spectrum.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;

/// Default threshold on `|delta|_inf` for declaring convergence.
pub const DEFAULT_SETTLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCoordinates {
    pub delta: DVector<f64>,
    pub e: DVector<f64>,
}

/// `L^+ L_c K2 c`, the offset between `xi` and `e`.
pub fn integral_offset(derived: &DerivedLayout, ldag: &SquareMatrix) -> DVector<f64> {
    ldag * (&derived.lc * derived.forcing())
}

pub fn to_error_coordinates(
    s: &NetworkState,
    derived: &DerivedLayout,
    ldag: &SquareMatrix,
) -> Result<ErrorCoordinates> {
    let n = derived.c_padded.len();
    if s.x.len() != n || s.xi.len() != n || ldag.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "x {}, xi {}, L^+ {:?} for {n} agents",
            s.x.len(),
            s.xi.len(),
            ldag.shape()
        )));
    }
    Ok(ErrorCoordinates {
        delta: s.x.add_scalar(-derived.epsilon),
        e: &s.xi - integral_offset(derived, ldag),
    })
}

pub fn lyapunov(ec: &ErrorCoordinates) -> f64 {
    0.5 * ec.delta.norm_squared() + 0.5 * ec.e.norm_squared()
}

fn check_error_dims(ec: &ErrorCoordinates, l: &SquareMatrix, f: &SquareMatrix) -> Result<usize> {
    let n = ec.delta.len();
    if ec.e.len() != n || l.shape() != (n, n) || f.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "delta {}, e {}, L {:?}, F {:?}",
            n,
            ec.e.len(),
            l.shape(),
            f.shape()
        )));
    }
    Ok(n)
}

/// `(-F delta + L e, -L delta)`.
pub fn error_rhs(
    ec: &ErrorCoordinates,
    l: &SquareMatrix,
    f: &SquareMatrix,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_error_dims(ec, l, f)?;
    Ok((-(f * &ec.delta) + l * &ec.e, -(l * &ec.delta)))
}

/// `dV/dt` evaluated from the error dynamics, cross terms included.
pub fn lyapunov_rate(ec: &ErrorCoordinates, l: &SquareMatrix, f: &SquareMatrix) -> Result<f64> {
    let (dd, de) = error_rhs(ec, l, f)?;
    Ok(ec.delta.dot(&dd) + ec.e.dot(&de))
}

/// `-delta^T F delta`.
pub fn dissipation(ec: &ErrorCoordinates, f: &SquareMatrix) -> f64 {
    -ec.delta.dot(&(f * &ec.delta))
}

/// `L + K1`.
pub fn f_matrix(l: &SquareMatrix, derived: &DerivedLayout) -> SquareMatrix {
    l + &derived.k1
}

/// Everything needed to move base-protocol states into error coordinates,
/// computed once per scenario.
#[derive(Debug, Clone)]
pub struct ErrorFrame {
    pub epsilon: f64,
    pub offset: DVector<f64>,
    pub laplacian: SquareMatrix,
    pub f: SquareMatrix,
    pub ldag: SquareMatrix,
}

impl ErrorFrame {
    pub fn new(g: &Graph, layout: &InputLayout) -> Result<Self> {
        let derived = build_derived(layout)?;
        let l = laplacian(g);
        Self::from_parts(&l, &derived)
    }

    pub fn from_parts(l: &SquareMatrix, derived: &DerivedLayout) -> Result<Self> {
        let ldag = laplacian_pseudoinverse(l)?;
        Ok(ErrorFrame {
            epsilon: derived.epsilon,
            offset: integral_offset(derived, &ldag),
            laplacian: l.clone(),
            f: f_matrix(l, derived),
            ldag,
        })
    }

    pub fn coordinates(&self, s: &NetworkState) -> ErrorCoordinates {
        ErrorCoordinates {
            delta: s.x.add_scalar(-self.epsilon),
            e: &s.xi - &self.offset,
        }
    }

    /// Largest entrywise gap between the compact protocol written in error
    /// coordinates and [`error_rhs`] at one state.
    pub fn derivation_defect(&self, net: &ConsensusNetwork, params: &ProtocolParams, s: &NetworkState) -> f64 {
        let (dx, dxi) = net.rhs_compact(params, &s.x, &s.xi);
        let ec = self.coordinates(s);
        let (dd, de) = error_rhs(&ec, &self.laplacian, &self.f).expect("frame dimensions are consistent");
        (dx - dd).amax().max((dxi - de).amax())
    }
}

/// Maximum defect, over all samples, between the shifted compact dynamics and
/// the error dynamics. Meaningful for `alpha = gamma = 1` trajectories.
pub fn error_consistency_check(traj: &Trajectory, g: &Graph, layout: &InputLayout) -> Result<f64> {
    let net = ConsensusNetwork::new(g, layout)?;
    let frame = ErrorFrame::from_parts(net.laplacian(), net.derived())?;
    Ok(traj
        .samples
        .iter()
        .map(|s| frame.derivation_defect(&net, &traj.params, s))
        .fold(0.0, f64::max))
}

/// `[[-alpha F, L], [-gamma L, 0]]`, the generator of `(delta, e)`.
pub fn closed_loop_matrix(l: &SquareMatrix, f: &SquareMatrix, alpha: f64, gamma: f64) -> SquareMatrix {
    let n = l.nrows();
    let mut m = SquareMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(f * -alpha));
    m.view_mut((0, n), (n, n)).copy_from(l);
    m.view_mut((n, 0), (n, n)).copy_from(&(l * -gamma));
    m
}

/// Eigenvalues of `[[-F, L], [-L, 0]]`, sorted by real part.
pub fn closed_loop_spectrum(l: &SquareMatrix, f: &SquareMatrix) -> Result<Vec<Complex<f64>>> {
    if !l.is_square() || l.shape() != f.shape() {
        return Err(Error::DimensionMismatch(format!("L {:?}, F {:?}", l.shape(), f.shape())));
    }
    general_eigenvalues(&closed_loop_matrix(l, f, 1.0, 1.0))
}

/// Slowest decay rate `min(-Re lambda)` over the eigenvalues that are not zero.
pub fn slowest_decay_rate(spectrum: &[Complex<f64>]) -> Option<f64> {
    spectrum
        .iter()
        .filter(|z| z.norm() >= ZERO_EIGENVALUE_TOL)
        .map(|z| -z.re)
        .reduce(f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub epsilon: f64,
    /// Algebraic connectivity of the graph.
    pub lambda2: f64,
    pub lambda_min_f: f64,
    pub connected: bool,
    pub f_positive_definite: bool,
    pub closed_loop_spectrum: Vec<Eigenvalue>,
    pub zero_eigenvalue_count: usize,
    /// Largest real part among the nonzero closed-loop eigenvalues.
    pub max_nonzero_real_part: Option<f64>,
    pub spectrum_error: Option<String>,
    pub v_samples: Vec<f64>,
    /// Only asserted by the theory for `alpha = gamma = 1`.
    pub v_non_increasing: bool,
    pub settle_tolerance: f64,
    pub settled: bool,
    pub settling_time: Option<f64>,
    pub final_delta_inf: f64,
    pub final_e_norm: f64,
    /// Least-squares slope of `ln |delta|_2` over the tail half of the run.
    pub tail_decay_slope: Option<f64>,
}

impl CertificateReport {
    /// Both hypotheses hold, the spectrum has the expected shape and the
    /// state error settled.
    pub fn certified(&self) -> bool {
        self.connected
            && self.f_positive_definite
            && self.zero_eigenvalue_count == 1
            && self.max_nonzero_real_part.is_some_and(|r| r < -1e-10)
            && self.settled
    }
}

/// Slack on the sample-to-sample Lyapunov increase attributable to RK4 error.
pub fn lyapunov_slack(v0: f64) -> f64 {
    1e-9 * (1.0 + v0)
}

pub fn certify(g: &Graph, layout: &InputLayout, traj: &Trajectory, tol_settle: f64) -> Result<CertificateReport> {
    let n = g.node_count();
    if layout.agent_count() != n {
        return Err(Error::DimensionMismatch(format!(
            "input layout has {} agents, graph has {n} nodes",
            layout.agent_count()
        )));
    }
    let derived = build_derived(layout)?;
    let l = laplacian(g);
    let frame = ErrorFrame::from_parts(&l, &derived)?;

    let l_eig = symmetric_eigendecomposition(&l)?;
    let lambda2 = if n < 2 { 0.0 } else { l_eig.eigenvalues[1] };
    let connected = n == 1 || lambda2 > 1e-8;
    let lambda_min_f = symmetric_eigendecomposition(&frame.f)?.eigenvalues[0];

    let (alpha, gamma) = (traj.params.alpha, traj.params.gamma);
    let (closed_loop_spectrum, spectrum_error) =
        match general_eigenvalues(&closed_loop_matrix(&l, &frame.f, alpha, gamma)) {
            Ok(ev) => (ev, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
    let zero_eigenvalue_count = closed_loop_spectrum
        .iter()
        .filter(|z| z.norm() < ZERO_EIGENVALUE_TOL)
        .count();
    let max_nonzero_real_part = slowest_decay_rate(&closed_loop_spectrum).map(|r| -r);

    let coords: Vec<ErrorCoordinates> = traj.samples.iter().map(|s| frame.coordinates(s)).collect();
    let v_samples: Vec<f64> = coords.iter().map(lyapunov).collect();
    let slack = lyapunov_slack(v_samples.first().copied().unwrap_or(0.0));
    let v_non_increasing = v_samples.windows(2).all(|w| w[1] <= w[0] + slack);

    let delta_inf: Vec<f64> = coords.iter().map(|c| c.delta.amax()).collect();
    let settled = delta_inf.last().is_some_and(|d| *d < tol_settle);
    let settling_time = if settled {
        let first_settled = delta_inf
            .iter()
            .rposition(|d| *d >= tol_settle)
            .map_or(0, |k| k + 1);
        Some(traj.samples[first_settled].t)
    } else {
        None
    };

    let last = coords.last();
    Ok(CertificateReport {
        epsilon: derived.epsilon,
        lambda2,
        lambda_min_f,
        connected,
        f_positive_definite: lambda_min_f > 0.0,
        closed_loop_spectrum: closed_loop_spectrum
            .iter()
            .map(|z| Eigenvalue { re: z.re, im: z.im })
            .collect(),
        zero_eigenvalue_count,
        max_nonzero_real_part,
        spectrum_error,
        v_samples,
        v_non_increasing,
        settle_tolerance: tol_settle,
        settled,
        settling_time,
        final_delta_inf: delta_inf.last().copied().unwrap_or(f64::NAN),
        final_e_norm: last.map_or(f64::NAN, |c| c.e.norm()),
        tail_decay_slope: tail_decay_slope(traj, &coords),
    })
}

fn tail_decay_slope(traj: &Trajectory, coords: &[ErrorCoordinates]) -> Option<f64> {
    let floor = 1e-12 * (1.0 + coords.first()?.delta.norm());
    let start = coords.len() / 2;
    let points: Vec<(f64, f64)> = coords[start..]
        .iter()
        .zip(&traj.samples[start..])
        .map(|(c, s)| (s.t, c.delta.norm()))
        .filter(|(_, d)| *d > floor)
        .map(|(t, d)| (t, d.ln()))
        .collect();
    if points.len() < 10 {
        return None;
    }
    let k = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|(t, y)| (t - mean_t) * (y - mean_y)).sum();
    let sxx: f64 = points.iter().map(|(t, _)| (t - mean_t).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RhsForm;
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

    fn p2_frame(value: f64) -> (DerivedLayout, SquareMatrix) {
        let d = build_derived(&single(2, value, &[1])).unwrap();
        let ldag = laplacian_pseudoinverse(&laplacian(&Graph::path(2))).unwrap();
        (d, ldag)
    }

    #[test]
    fn error_coordinates_at_equilibrium_vanish() {
        let (d, ldag) = p2_frame(5.0);
        let xi = integral_offset(&d, &ldag);
        let s = NetworkState::new(0.0, DVector::from_element(2, 5.0), xi);
        let ec = to_error_coordinates(&s, &d, &ldag).unwrap();
        assert!(ec.delta.amax() == 0.0 && ec.e.amax() == 0.0);
    }

    #[test]
    fn error_coordinates_p2_offset_by_hand() {
        // L_c = [[0, 1], [0, -1]], K2 c = [5, 0] -> L_c K2 c = [0, 0]
        // so the offset vanishes on P2 with the input on agent 1
        let (d, ldag) = p2_frame(5.0);
        let s = NetworkState::new(0.0, DVector::from_element(2, 5.0), DVector::zeros(2));
        let ec = to_error_coordinates(&s, &d, &ldag).unwrap();
        assert_eq!(ec.delta.as_slice(), &[0.0, 0.0]);
        assert_eq!(ec.e.as_slice(), &[0.0, 0.0]);

        // input on both agents with different values: c = [2, 4] on {1}, {2}
        let layout = InputLayout::new(
            2,
            vec![
                ExogenousInput { value: 2.0, targets: vec![1] },
                ExogenousInput { value: 4.0, targets: vec![2] },
            ],
        )
        .unwrap();
        let d = build_derived(&layout).unwrap();
        // L_c = 0.5*[[1,1],[1,1]] - I, K2 c = [2, 4] -> L_c K2 c = [1, -1]
        // L^+ = 0.25 [[1,-1],[-1,1]] -> offset = [0.5, -0.5]
        let s = NetworkState::new(0.0, DVector::from_element(2, 4.0), DVector::zeros(2));
        let ec = to_error_coordinates(&s, &d, &ldag).unwrap();
        assert_eq!(ec.delta.as_slice(), &[1.0, 1.0]);
        assert!((ec.e[0] + 0.5).abs() < 1e-15 && (ec.e[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn error_coordinates_dimension_mismatch() {
        let (d, ldag) = p2_frame(1.0);
        let s = NetworkState::zeros(3);
        assert!(matches!(to_error_coordinates(&s, &d, &ldag), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn lyapunov_examples() {
        let ec = |d: &[f64], e: &[f64]| ErrorCoordinates {
            delta: DVector::from_column_slice(d),
            e: DVector::from_column_slice(e),
        };
        assert_eq!(lyapunov(&ec(&[0.0, 0.0], &[0.0, 0.0])), 0.0);
        assert_eq!(lyapunov(&ec(&[1.0, 0.0], &[0.0, 1.0])), 1.0);
        assert_eq!(lyapunov(&ec(&[3.0], &[4.0])), 12.5);
    }

    #[test]
    fn error_rhs_examples() {
        let l = laplacian(&Graph::path(2));
        let f = &l + SquareMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let zero = ErrorCoordinates {
            delta: DVector::zeros(2),
            e: DVector::zeros(2),
        };
        let (a, b) = error_rhs(&zero, &l, &f).unwrap();
        assert!(a.amax() == 0.0 && b.amax() == 0.0);

        let consensus = ErrorCoordinates {
            delta: DVector::zeros(2),
            e: DVector::from_element(2, 3.5),
        };
        let (a, b) = error_rhs(&consensus, &l, &f).unwrap();
        assert!(a.amax() == 0.0 && b.amax() == 0.0);

        // F = [[2,-1],[-1,1]]; delta = [1, 2], e = [3, -1]
        // -F delta = [0, -1]; L e = [4, -4]; -L delta = [1, -1]
        let ec = ErrorCoordinates {
            delta: DVector::from_vec(vec![1.0, 2.0]),
            e: DVector::from_vec(vec![3.0, -1.0]),
        };
        let (a, b) = error_rhs(&ec, &l, &f).unwrap();
        assert_eq!(a.as_slice(), &[4.0, -5.0]);
        assert_eq!(b.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn closed_loop_single_agent() {
        let l = SquareMatrix::zeros(1, 1);
        let f = SquareMatrix::from_element(1, 1, 2.0);
        let ev = closed_loop_spectrum(&l, &f).unwrap();
        assert_eq!(ev, vec![Complex::new(-2.0, 0.0), Complex::new(0.0, 0.0)]);
    }

    #[test]
    fn closed_loop_p2_and_p3() {
        for (g, layout) in [
            (Graph::path(2), single(2, 1.0, &[1])),
            (Graph::path(3), single(3, 1.0, &[2])),
        ] {
            let l = laplacian(&g);
            let f = f_matrix(&l, &build_derived(&layout).unwrap());
            let ev = closed_loop_spectrum(&l, &f).unwrap();
            assert_eq!(ev.len(), 2 * g.node_count());
            let zeros = ev.iter().filter(|z| z.norm() < ZERO_EIGENVALUE_TOL).count();
            assert_eq!(zeros, 1, "{ev:?}");
            assert!(ev.iter().filter(|z| z.norm() >= ZERO_EIGENVALUE_TOL).all(|z| z.re < 0.0));
        }
    }

    #[test]
    fn certify_p2() {
        let g = Graph::path(2);
        let layout = single(2, 4.0, &[1]);
        let params = ProtocolParams::base(0.01, 40.0).unwrap();
        let net = ConsensusNetwork::new(&g, &layout).unwrap();
        let z = DVector::zeros(2);
        let traj = net.integrate(&params, &z, &z, RhsForm::AgentLevel).unwrap();
        let report = certify(&g, &layout, &traj, 1e-4).unwrap();
        assert!(report.lambda_min_f > 0.0);
        assert!(report.v_non_increasing);
        assert!(report.settled);
        assert!(report.certified());
        assert_eq!(report.epsilon, 4.0);
        assert!(report.v_samples.iter().all(|v| *v >= 0.0));
        let ts = report.settling_time.unwrap();
        assert!(ts > 0.0 && ts < 40.0);
        assert!(error_consistency_check(&traj, &g, &layout).unwrap() <= 1e-10);
    }

    #[test]
    fn certify_flags_disconnected_graph() {
        let g = Graph::new(4, [(1, 2), (3, 4)]).unwrap();
        let layout = single(4, 1.0, &[1, 3]);
        let traj = Trajectory {
            params: ProtocolParams::base(0.1, 1.0).unwrap(),
            samples: vec![NetworkState::zeros(4)],
        };
        let report = certify(&g, &layout, &traj, 1e-6).unwrap();
        assert!(!report.connected);
        assert!(report.lambda2 <= 1e-8);
        assert!(report.zero_eigenvalue_count >= 2);
        assert!(!report.certified());
    }

    #[test]
    fn settling_time_is_last_entry_into_band() {
        let g = Graph::new(1, []).unwrap();
        let layout = single(1, 0.0, &[1]);
        let p = ProtocolParams::base(1.0, 3.0).unwrap();
        let samples = [2.0, 0.0, 0.5, 0.0]
            .iter()
            .enumerate()
            .map(|(k, x)| NetworkState::new(k as f64, DVector::from_element(1, *x), DVector::zeros(1)))
            .collect();
        let traj = Trajectory { params: p, samples };
        let report = certify(&g, &layout, &traj, 0.1).unwrap();
        assert!(report.settled);
        assert_eq!(report.settling_time, Some(3.0));
        assert!(!report.v_non_increasing);
    }
}

use nalgebra::{Complex, DMatrix, DVector};
use proptest::prelude::*;

use apnet::analysis::{lyapunov, lyapunov_slack, ErrorFrame};
use apnet::dynamics::default_step;
use apnet::graph::{
    adjacency, degree, is_connected, is_connected_spectral, laplacian, laplacian_pseudoinverse,
};
use apnet::layout::{average_of_inputs_expanded, build_derived};
use apnet::linalg::{general_eigenvalues, symmetric_eigendecomposition};
use apnet::random::{erdos_renyi, random_case, random_permutation, random_vector, rng_from_seed};
use apnet::{ConsensusNetwork, ExogenousInput, Graph, InputLayout, ProtocolParams, RhsForm};

fn symmetric(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
        let m = DMatrix::from_vec(n, n, v);
        (&m + m.transpose()) * 0.5
    })
}

fn general(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
}

/// Largest distance from an eigenvalue of `a` to the closest unused one in `b`.
fn spectral_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    let mut unused: Vec<Complex<f64>> = b.to_vec();
    let mut worst = 0.0f64;
    for z in a {
        let (k, d) = unused
            .iter()
            .enumerate()
            .map(|(k, w)| (k, (z - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        worst = worst.max(d);
        unused.swap_remove(k);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_invariants(seed in any::<u64>(), n in 1usize..12, p in 0.0f64..1.0) {
        let g = erdos_renyi(&mut rng_from_seed(seed), n, p);
        let l = laplacian(&g);
        prop_assert_eq!(&l, &(degree(&g) - adjacency(&g)));
        prop_assert_eq!(&l, &l.transpose());
        for r in l.row_iter() {
            prop_assert_eq!(r.sum(), 0.0);
        }
        let eig = symmetric_eigendecomposition(&l).unwrap();
        prop_assert!(eig.eigenvalues.iter().all(|&v| v > -1e-10));
        prop_assert_eq!(is_connected(&g), is_connected_spectral(&g).unwrap());
    }

    #[test]
    fn jacobi_matches_reference(m in (1usize..9).prop_flat_map(symmetric)) {
        let ours = symmetric_eigendecomposition(&m).unwrap();
        let mut reference: Vec<f64> = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        let scale = 1.0 + m.norm();
        for (a, b) in ours.eigenvalues.iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-10 * scale, "{} vs {}", a, b);
        }
        prop_assert!((ours.reconstruct() - &m).amax() <= 1e-10 * scale);
        let q = &ours.eigenvectors;
        prop_assert!((q.transpose() * q - DMatrix::identity(m.nrows(), m.nrows())).amax() <= 1e-12);
    }

    #[test]
    fn hessenberg_qr_matches_reference(m in (1usize..9).prop_flat_map(general)) {
        let ours = general_eigenvalues(&m).unwrap();
        let reference: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().copied().collect();
        prop_assert_eq!(ours.len(), reference.len());
        prop_assert!(spectral_distance(&ours, &reference) <= 1e-7 * (1.0 + m.norm()));
    }

    #[test]
    fn pseudoinverse_identities(seed in any::<u64>()) {
        let case = random_case(seed, 1, 10);
        let l = laplacian(&case.graph);
        let d = laplacian_pseudoinverse(&l).unwrap();
        prop_assert!((&l * &d * &l - &l).amax() <= 1e-9);
        prop_assert!((&d * &l * &d - &d).amax() <= 1e-9);
        prop_assert!((&d - d.transpose()).amax() <= 1e-12);
        let ones = DVector::from_element(l.nrows(), 1.0);
        prop_assert!((&d * ones).amax() <= 1e-9);
    }

    #[test]
    fn epsilon_is_relabel_invariant(seed in any::<u64>()) {
        let case = random_case(seed, 1, 10);
        let n = case.graph.node_count();
        let perm = random_permutation(&mut rng_from_seed(seed ^ 0xff), n);
        let relabeled = case.layout.relabel(&perm).unwrap();
        let a = build_derived(&case.layout).unwrap();
        let b = build_derived(&relabeled).unwrap();
        prop_assert!((a.epsilon - b.epsilon).abs() <= 1e-12 * (1.0 + a.epsilon.abs()));
        prop_assert!((a.epsilon - average_of_inputs_expanded(&case.layout)).abs() <= 1e-14 * (1.0 + a.epsilon.abs()));
        let ones = DVector::from_element(n, 1.0);
        prop_assert!((ones.transpose() * &a.lc).amax() <= 1e-12);
    }

    #[test]
    fn trajectories_are_permutation_equivariant(seed in any::<u64>()) {
        let case = random_case(seed, 2, 8);
        let n = case.graph.node_count();
        let mut rng = rng_from_seed(seed ^ 0xabc);
        let perm = random_permutation(&mut rng, n);
        let x0 = random_vector(&mut rng, n, 10.0);
        let xi0 = random_vector(&mut rng, n, 10.0);
        let permute = |v: &DVector<f64>| {
            let mut out = DVector::zeros(n);
            for i in 0..n {
                out[perm[i] - 1] = v[i];
            }
            out
        };
        let net = ConsensusNetwork::new(&case.graph, &case.layout).unwrap();
        let moved = ConsensusNetwork::new(&case.graph.relabel(&perm).unwrap(), &case.layout.relabel(&perm).unwrap()).unwrap();
        let params = ProtocolParams::base(0.01, 2.0).unwrap();
        let a = net.integrate(&params, &x0, &xi0, RhsForm::Compact).unwrap();
        let b = moved.integrate(&params, &permute(&x0), &permute(&xi0), RhsForm::Compact).unwrap();
        let (sa, sb) = (a.last(), b.last());
        prop_assert!((permute(&sa.x) - &sb.x).amax() <= 1e-9);
        prop_assert!((permute(&sa.xi) - &sb.xi).amax() <= 1e-9);
    }

    #[test]
    fn lyapunov_never_rises_under_unit_gains(seed in any::<u64>()) {
        let case = random_case(seed, 1, 8);
        let n = case.graph.node_count();
        let mut rng = rng_from_seed(seed ^ 0x5a);
        let x0 = random_vector(&mut rng, n, 50.0);
        let xi0 = random_vector(&mut rng, n, 50.0);
        let net = ConsensusNetwork::new(&case.graph, &case.layout).unwrap();
        let frame = ErrorFrame::new(&case.graph, &case.layout).unwrap();
        let dt = default_step(&case.graph, net.derived(), 1.0, 1.0);
        let traj = net.integrate(&ProtocolParams::base(dt, 5.0).unwrap(), &x0, &xi0, RhsForm::AgentLevel).unwrap();
        let v: Vec<f64> = traj.samples.iter().map(|s| lyapunov(&frame.coordinates(s))).collect();
        let slack = lyapunov_slack(v[0]);
        prop_assert!(v.windows(2).all(|w| w[1] <= w[0] + slack));
    }
}

#[test]
fn path_of_two_matches_the_matrix_exponential() {
    let g = Graph::path(2);
    let layout = InputLayout::new(
        2,
        vec![
            ExogenousInput { value: 3.0, targets: vec![1] },
            ExogenousInput { value: 5.0, targets: vec![2] },
        ],
    )
    .unwrap();
    let net = ConsensusNetwork::new(&g, &layout).unwrap();
    let zeros = DVector::zeros(2);
    let traj = net.integrate(&ProtocolParams::base(0.01, 20.0).unwrap(), &zeros, &zeros, RhsForm::AgentLevel).unwrap();

    // z = [x; xi; 1], dz/dt = A z
    let l = net.laplacian();
    let d = net.derived();
    let mut a = DMatrix::zeros(5, 5);
    a.view_mut((0, 0), (2, 2)).copy_from(&(-(l + &d.k1)));
    a.view_mut((0, 2), (2, 2)).copy_from(l);
    a.view_mut((2, 0), (2, 2)).copy_from(&(-l));
    a.view_mut((0, 4), (2, 1)).copy_from(&d.forcing());
    let z0 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    let exact = (a * 20.0).exp() * z0;

    let last = traj.last();
    for i in 0..2 {
        assert!((last.x[i] - exact[i]).abs() < 1e-8, "x_{i}: {} vs {}", last.x[i], exact[i]);
        assert!((last.xi[i] - exact[2 + i]).abs() < 1e-8);
        assert!((last.x[i] - 4.0).abs() < 1e-4);
    }
}

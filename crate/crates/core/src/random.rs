//! Seeded random networks and input layouts for property checks.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{is_connected, Graph};
use crate::layout::{ExogenousInput, InputLayout};

pub type CaseRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> CaseRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdos-Renyi graph with edge probability `p`; may be disconnected.
pub fn erdos_renyi(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges).expect("generated edges are valid")
}

/// Erdos-Renyi graph with `p` drawn from `[0.2, 0.8]`, resampled until connected.
pub fn connected_erdos_renyi(rng: &mut impl Rng, n: usize) -> Graph {
    loop {
        let p = rng.gen_range(0.2..=0.8);
        let g = erdos_renyi(rng, n, p);
        if is_connected(&g) {
            return g;
        }
    }
}

/// `m` inputs with values in `[-value_bound, value_bound]`, each applied to a
/// uniformly sized random non-empty subset of agents.
pub fn random_layout(rng: &mut impl Rng, n: usize, m: usize, value_bound: f64) -> InputLayout {
    let agents: Vec<usize> = (1..=n).collect();
    let inputs = (0..m)
        .map(|_| {
            let size = rng.gen_range(1..=n);
            let targets = agents.choose_multiple(rng, size).copied().collect();
            ExogenousInput {
                value: rng.gen_range(-value_bound..=value_bound),
                targets,
            }
        })
        .collect();
    InputLayout::new(n, inputs).expect("generated layout is valid")
}

pub fn random_vector(rng: &mut impl Rng, n: usize, bound: f64) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-bound..=bound))
}

/// Uniform random permutation of `1..=n`.
pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (1..=n).collect();
    perm.shuffle(rng);
    perm
}

/// A connected network with inputs: `n` uniform in `[n_min, n_max]`,
/// `m` uniform in `[1, n]`, input values in `[-100, 100]`.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub seed: u64,
    pub graph: Graph,
    pub layout: InputLayout,
}

pub fn random_case(seed: u64, n_min: usize, n_max: usize) -> RandomCase {
    let mut rng = rng_from_seed(seed);
    let n = rng.gen_range(n_min..=n_max);
    let graph = connected_erdos_renyi(&mut rng, n);
    let m = rng.gen_range(1..=n);
    let layout = random_layout(&mut rng, n, m, 100.0);
    RandomCase { seed, graph, layout }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases_are_reproducible_and_in_range() {
        for seed in 0..50 {
            let a = random_case(seed, 2, 10);
            let b = random_case(seed, 2, 10);
            assert_eq!(a.graph, b.graph);
            assert_eq!(a.layout, b.layout);
            let n = a.graph.node_count();
            assert!((2..=10).contains(&n));
            assert!(is_connected(&a.graph));
            assert!((1..=n).contains(&a.layout.input_count()));
            assert!(a.layout.inputs().iter().all(|i| i.value.abs() <= 100.0));
        }
    }
}

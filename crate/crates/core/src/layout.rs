//! Exogenous inputs, agent/input classification and the derived coupling
//! matrices `K1`, `K2`, the consensus value `epsilon` and `L_c`.

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;

/// One constant exogenous input and the agents it is applied to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousInput {
    pub value: f64,
    /// 1-based agent ids, ascending.
    pub targets: Vec<usize>,
}

/// The `m` inputs of an `n`-agent network.
#[derive(Debug, Clone, PartialEq)]
pub struct InputLayout {
    n: usize,
    inputs: Vec<ExogenousInput>,
    /// Per agent (0-based): values of the inputs attached to it, in input order.
    attached: Vec<Vec<f64>>,
}

impl InputLayout {
    /// Validates and stores the inputs. Target lists are sorted; a repeated
    /// target within one input is rejected since `K2` is binary.
    pub fn new(n: usize, inputs: Vec<ExogenousInput>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidLayout {
                field: "inputs".into(),
                message: "at least one exogenous input is required".into(),
            });
        }
        let mut attached = vec![Vec::new(); n];
        let mut normalized = Vec::with_capacity(inputs.len());
        for (h, input) in inputs.into_iter().enumerate() {
            if !input.value.is_finite() {
                return Err(Error::InvalidLayout {
                    field: format!("inputs[{h}].value"),
                    message: "input value must be finite".into(),
                });
            }
            if input.targets.is_empty() {
                return Err(Error::InvalidLayout {
                    field: format!("inputs[{h}].targets"),
                    message: "an input must target at least one agent".into(),
                });
            }
            let mut seen = BTreeSet::new();
            for (k, &id) in input.targets.iter().enumerate() {
                let field = format!("inputs[{h}].targets[{k}]");
                if id == 0 || id > n {
                    return Err(Error::InvalidLayout {
                        field,
                        message: format!("agent id {id} outside [1, {n}]"),
                    });
                }
                if !seen.insert(id) {
                    return Err(Error::InvalidLayout {
                        field,
                        message: format!("agent {id} listed twice"),
                    });
                }
            }
            for &id in &seen {
                attached[id - 1].push(input.value);
            }
            normalized.push(ExogenousInput {
                value: input.value,
                targets: seen.into_iter().collect(),
            });
        }
        Ok(InputLayout {
            n,
            inputs: normalized,
            attached,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[ExogenousInput] {
        &self.inputs
    }

    /// Values `c_h` of the inputs applied to agent `i` (0-based).
    pub(crate) fn attached0(&self, i: usize) -> &[f64] {
        &self.attached[i]
    }

    /// Relabels agent `i` as `perm[i - 1]`, keeping the input order.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {} agents",
                perm.len(),
                self.n
            )));
        }
        let inputs = self
            .inputs
            .iter()
            .map(|inp| ExogenousInput {
                value: inp.value,
                targets: inp.targets.iter().map(|&i| perm[i - 1]).collect(),
            })
            .collect();
        InputLayout::new(self.n, inputs)
    }
}

/// Active agents (subject to at least one input) and passive agents, 1-based.
pub fn classify_agents(layout: &InputLayout) -> (BTreeSet<usize>, BTreeSet<usize>) {
    (1..=layout.n).partition(|&i| !layout.attached[i - 1].is_empty())
}

/// Isolated inputs (one target) and non-isolated inputs (several), 1-based.
pub fn classify_inputs(layout: &InputLayout) -> (BTreeSet<usize>, BTreeSet<usize>) {
    (1..=layout.inputs.len()).partition(|&h| layout.inputs[h - 1].targets.len() == 1)
}

/// Matrix form of an [`InputLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedLayout {
    /// Diagonal, `k1[i][i]` = number of inputs applied to agent `i`.
    pub k1: SquareMatrix,
    /// `k2[i][h] = 1` iff input `h` is applied to agent `i`; columns past `m` are zero.
    pub k2: SquareMatrix,
    /// `[c_1, ..., c_m, 0, ..., 0]`.
    pub c_padded: DVector<f64>,
    pub epsilon: f64,
    /// `K1 1 1^T / (1^T K2 1) - I`.
    pub lc: SquareMatrix,
}

impl DerivedLayout {
    /// `K2 c`, the input forcing term.
    pub fn forcing(&self) -> DVector<f64> {
        &self.k2 * &self.c_padded
    }

    /// Largest number of inputs on any one agent.
    pub fn max_input_degree(&self) -> f64 {
        self.k1.diagonal().iter().fold(0.0, |acc, v| acc.max(*v))
    }
}

pub fn build_derived(layout: &InputLayout) -> Result<DerivedLayout> {
    let n = layout.n;
    let m = layout.inputs.len();
    if m > n {
        return Err(Error::TooManyInputs { m, n });
    }
    let mut k2 = SquareMatrix::zeros(n, n);
    let mut c_padded = DVector::zeros(n);
    for (h, input) in layout.inputs.iter().enumerate() {
        c_padded[h] = input.value;
        for &i in &input.targets {
            k2[(i - 1, h)] = 1.0;
        }
    }
    let row_sums: Vec<f64> = k2.row_iter().map(|r| r.sum()).collect();
    let k1 = SquareMatrix::from_diagonal(&DVector::from_vec(row_sums));

    let ones = DVector::from_element(n, 1.0);
    // 1^T v reduced in index order, matching the row-by-row double sum
    let total = |v: DVector<f64>| v.iter().sum::<f64>();
    let mass = total(&k2 * &ones);
    let epsilon = total(&k2 * &c_padded) / mass;
    let lc = (&k1 * &ones * ones.transpose()) / mass - SquareMatrix::identity(n, n);

    Ok(DerivedLayout {
        k1,
        k2,
        c_padded,
        epsilon,
        lc,
    })
}

/// Average of the applied inputs, counted once per attachment, by explicit
/// double summation over agents and inputs.
pub fn average_of_inputs_expanded(layout: &InputLayout) -> f64 {
    let mut weighted = 0.0;
    let mut count = 0.0;
    for i in 1..=layout.n {
        let mut row_weighted = 0.0;
        let mut row_count = 0.0;
        for input in &layout.inputs {
            let k2_ih = if input.targets.contains(&i) { 1.0 } else { 0.0 };
            row_weighted += k2_ih * input.value;
            row_count += k2_ih;
        }
        weighted += row_weighted;
        count += row_count;
    }
    weighted / count
}

//! Simulation and convergence certification for networks of active agents
//! (driven by constant exogenous inputs) and passive agents running an
//! integral-action consensus protocol.
//!
//! All agent states converge to `epsilon`, the average of the applied inputs
//! counted once per attachment. The crate builds the graph and input
//! matrices, integrates the protocol, and checks the convergence certificate
//! (Laplacian spectrum, `F = L + K1` positivity, the closed-loop spectrum and
//! a Lyapunov function) numerically.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod layout;
pub mod linalg;
pub mod random;
pub mod scenario;
pub mod verify;

pub use analysis::{certify, CertificateReport, ErrorCoordinates};
pub use dynamics::{ConsensusNetwork, NetworkState, ProtocolParams, RhsForm, Trajectory};
pub use error::{Error, Result};
pub use graph::Graph;
pub use layout::{DerivedLayout, ExogenousInput, InputLayout};
pub use linalg::SquareMatrix;

//! Discrete-time SIS epidemics on weighted directed networks under the
//! linear distancing control `b_i = 1 - 2x_i`.
//!
//! The crate covers network construction and validation, trajectory
//! simulation, spectral regime classification, endemic equilibria and
//! numerical stability certificates.

pub mod certificates;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod rng;
pub mod spectral;

pub use certificates::{
    build_endemic_audit, find_diagonal_lyapunov, verify_dfe_descent, verify_half_bound,
    DescentReport, EndemicAudit, HalfBoundReport, LyapunovCertificate,
};
pub use dynamics::{
    simulate, ControlPolicy, EpidemicParams, SimulationOptions, StateVector, StopReason, Trajectory,
};
pub use equilibrium::{endemic_closed_form, endemic_fixed_point, uniqueness_probe};
pub use error::{Error, Result};
pub use graph::{
    generate_geometric_network, validate_assumptions, AssumptionReport, EpidemicNetwork,
};
pub use linalg::Matrix;
pub use spectral::{classify_regime, spectral_radius, Regime, RegimeReport};

//! Hamilton-Jacobi dynamics for equilibrium thermodynamic models and their
//! correspondence with gradient flows on dually flat manifolds.
//!
//! Equations of state are written as a vielbein relation `e(q)·p = r` with
//! constant charges `r`. The vielbein and a diagonal frame scale `η` define a
//! metric `g^{μν} = η^{ij} e_i^μ e_j^ν`, and the equations of state become the
//! eikonal equation `g^{μν} p_μ p_ν = E²` for the Hamiltonian
//! `H = √(g^{μν} p_μ p_ν)`. The crate provides
//!
//! - [`geometry`]: vielbein metrics, eikonal residuals, Hessian (Ruppeiner)
//!   metrics and arc lengths;
//! - [`models`]: the ideal gas, the van der Waals gas and the log-affine family,
//!   with closed-form trajectories and the Mathieu transformation;
//! - [`hamilton`]: Hamilton's equations in the mock time `τ`, the
//!   characteristic function `W`, the action and the generating function;
//! - [`gradient`]: the gradient flow in the parameter `t` and its
//!   reparametrization `dτ = E dt`;
//! - [`discrete`]: canonical ensembles and the KL gradient flow on a finite
//!   support, including the Gompertz structure of its solution;
//! - [`integrate`]: the shared explicit Runge-Kutta integrators;
//! - [`verify`]: named invariant checks assembled into a report.

pub mod discrete;
pub mod error;
pub mod geometry;
pub mod gradient;
pub mod hamilton;
pub mod integrate;
pub mod models;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{DiagonalScale, MetricAt, VielbeinField};
pub use hamilton::HamiltonSystem;
pub use integrate::{IntegratorConfig, Method};
pub use models::{ModelConfig, PhaseState, ScaleFactor, VielbeinModel};
pub use trajectory::{ParameterKind, Sample, Trajectory};

pub use nalgebra::{DMatrix, DVector};

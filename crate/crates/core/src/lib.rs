//! Radial transonic shock solutions of the steady Euler-Poisson system in a
//! convergent annular nozzle.
//!
//! Everything is generic over the scalar type (`f32` or `f64`, see [`Real`]).
//! The `*64` aliases below fix the scalar to `f64`, which is what the
//! command-line driver uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN on purpose

pub mod error;
pub mod gas;
pub mod jump;
pub mod matcher;
pub mod ode;
pub mod radial;
pub mod scalar;
pub mod sensitivity;

pub use error::{Error, Result};
pub use scalar::Real;

pub use gas::{BackgroundCharge, FlowState, GasLaw, Geometry};
pub use matcher::{MatchOptions, ShockProblem, ShockSolution};
pub use radial::SolverSettings;

pub type GasLaw64 = gas::GasLaw<f64>;
pub type Geometry64 = gas::Geometry<f64>;
pub type FlowState64 = gas::FlowState<f64>;
pub type BackgroundCharge64 = gas::BackgroundCharge<f64>;
pub type JumpRecord64 = jump::JumpRecord<f64>;
pub type SolutionProfile64 = radial::SolutionProfile<f64>;
pub type SolverSettings64 = radial::SolverSettings<f64>;
pub type Certificates64 = radial::Certificates<f64>;
pub type ShockProblem64 = matcher::ShockProblem<f64>;
pub type ShockSolution64 = matcher::ShockSolution<f64>;
pub type ExitPressureMap64 = matcher::ExitPressureMap<f64>;
pub type SensitivityProfile64 = sensitivity::SensitivityProfile<f64>;
pub type ToleranceConfig64 = ode::ToleranceConfig<f64>;

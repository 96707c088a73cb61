//! Stochastic numerics for SDEs with jumps: exact symmetric alpha-stable
//! sampling, a jump-adapted Euler scheme with replayable noise, Lyapunov
//! drift verification, Krylov-Bogolyubov occupation measures and a spectral
//! solver for the stationary nonlocal Fokker-Planck equation.
//!
//! The point of the crate is cross-validation: the same stationary law is
//! constructed three independent ways (time averaging of simulated paths,
//! steady states of the adjoint generator, and a closed-form characteristic
//! function for the linear-drift case) and the constructions are required to
//! agree within stated tolerances.

pub mod coeffs;
pub mod error;
pub mod generator;
pub mod grid;
pub mod levy;
pub mod noise;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod testfn;
pub mod util;

pub use coeffs::{AssumptionConstants, CoefficientSet, FiniteMeasure, JumpSpec, MarkLaw};
pub use error::{Error, Result};
pub use levy::{JumpBatch, SmallJumpMode, StableParams};
pub use noise::{JumpEvent, JumpKind, NoiseRealization};
pub use generator::{
    apply_adjoint, apply_fractional_laplacian, apply_generator, apply_laplacian, AdjointOps,
    DriftScheme, GeneratorValue, QuadratureSpec, SpectralKernel,
};
pub use grid::{Axis, DensityGrid};
pub use sde::{simulate_ensemble, simulate_path, PathSample};
pub use testfn::TestFunction;

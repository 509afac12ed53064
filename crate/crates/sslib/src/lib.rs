//! State-space numerics for robust control design.
//!
//! Continuous-time LTI systems with labelled channel groups, Lyapunov and Riccati
//! solvers, H-infinity norm and output-feedback synthesis, left coprime
//! factorization, lower LFTs, balanced truncation, ZOH discretization and
//! numerical linearization of nonlinear models.

pub mod balred;
pub mod coprime;
pub mod discrete;
pub mod error;
pub mod io;
pub mod lft;
pub mod linalg;
pub mod linearize;
pub mod norm;
pub mod riccati;
pub mod statespace;
pub mod synth;

pub use balred::{balanced_realization, balanced_truncate, hankel_singular_values, Truncation};
pub use coprime::{coprime_controller, factor_residual, left_coprime_factorize, ControllerFactors, CoprimeFactors};
pub use discrete::{Discrete, DiscreteBlock};
pub use error::{Result, SsError};
pub use lft::{lft_close, GeneralizedPlant, Partition};
pub use linearize::{linearize, LinearizeOptions, NonlinearModel};
pub use norm::{grid_peak, hinf_norm, verification_grid};
pub use riccati::{care_general, care_solve};
pub use statespace::{ChannelGroup, Channels, StateSpace};
pub use synth::{hinf_synthesize, HinfOptions, HinfResult};

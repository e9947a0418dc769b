//! Parameterized quantum channels under stochastic control errors.
//!
//! The crate evaluates a channel T(ρ, λ) at its nominal controls and
//! averaged over fluctuations δλ, and compares three observables: the
//! noiseless purity P0 = tr[T²], the channel purity P = tr[T̄²], and the
//! channel fidelity F = tr[T T̄]. In the small-error limit
//! F = (P + P0)/2; [`perturb`] provides the matching predictors and
//! [`harness`] runs sweeps that check how fast the relation's residual
//! vanishes.

pub mod channels;
pub mod error;
pub mod harness;
pub mod matcore;
pub mod metrics;
pub mod noise;
pub mod perturb;
pub mod quadrature;

pub use channels::{check_completeness, ChannelKind, ControlVector, KrausSet, ParamChannel};
pub use error::{Error, Result};
pub use harness::{parse_config, run_sweep, ExperimentConfig, SweepReport};
pub use matcore::{ComplexMatrix, DensityMatrix};
pub use metrics::{evaluate, MetricsReport};
pub use noise::{average_output, AveragingSpec, FluctuationModel, NoiseKind};
pub use perturb::{depolarizing_predict, ion_trap_predict, predict, PredictorOutput};

pub use num_complex::Complex64;

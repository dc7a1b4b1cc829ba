//! Growth rates of random Hill's equations with Dirac-delta forcing,
//!
//! ```text
//! y'' + [af_k + q_k δ([t] - π/2)] y = 0,
//! ```
//!
//! where each period `π` draws its own `(af_k, q_k)`. One period acts on
//! `(y, dy/dt)` as a unimodular 2×2 matrix, and the growth rate `γ` is the
//! top Lyapunov exponent of the random product of these matrices.
//!
//! ```
//! use hill_delta::{asymptotics, lyapunov, ForcingModel};
//!
//! let model = ForcingModel::symmetric_uniform(0.625, 2.0)?;
//! let mc = lyapunov::growth_rate_mc(&model, 20_000, 4, 1)?;
//! let approx = asymptotics::gamma_small_q(2.0, model.moments().mean_q_sq)?;
//! assert!((mc.gamma - approx.gamma).abs() < 0.2 * approx.gamma);
//! # Ok::<(), hill_delta::Error>(())
//! ```

pub mod asymptotics;
pub mod error;
pub mod lyapunov;
pub mod mc;
pub mod model;
pub mod moments;
pub mod oscillator;
pub mod stats;
pub mod sweep;
pub mod table;
pub mod transfer;

pub use error::{Error, Result};
pub use lyapunov::{GrowthEstimate, Estimator};
pub use mc::MonteCarlo;
pub use model::{AfLaw, CycleParams, ForcingModel, QLaw, RandomStream};
pub use table::SweepTable;
pub use transfer::{ProductState, TransferMatrix};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/transfer.md")]
    mod transfer {}
    #[doc = include_str!("../../../book/src/growth.md")]
    mod growth {}
    #[doc = include_str!("../../../book/src/asymptotics.md")]
    mod asymptotics {}
    #[doc = include_str!("../../../book/src/moments.md")]
    mod moments {}
    #[doc = include_str!("../../../book/src/oscillator.md")]
    mod oscillator {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

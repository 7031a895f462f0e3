//! Simulation library for sequential prediction markets of Bayesian experts.
//!
//! Experts who share a joint prior but hold different private data take
//! turns announcing their conditional forecast for a target quantity.
//! Each announcement becomes public information and refines what every
//! other participant knows, so the forecast sequence is a martingale that
//! converges to a consensus. Depending on the model, that consensus is
//!
//! * **vacuous** — equal to the prior, nothing was learned,
//! * **complete** — equal to the forecast given all pooled private data, or
//! * **limited** — strictly in between.
//!
//! Three engines cover the tractable model families:
//!
//! * [`finite`] — finite outcome spaces with exact rational arithmetic and
//!   common-knowledge partition refinement,
//! * [`gaussian`] — jointly Gaussian worlds where each announcement reveals
//!   a linear statistic of the predictors,
//! * [`mixture`] — a product-observation model whose consensus is a
//!   two-component Gaussian mixture rather than the pooled posterior.
//!
//! [`protocol`] holds the engine-agnostic pieces (schedules, consensus
//! classification, martingale checking) and [`harness`] the seeded
//! randomized verification suites. [`scenario`] parses declarative TOML
//! scenario files used by the `predmarket` CLI.

pub mod finite;
pub mod gaussian;
pub mod harness;
pub mod mixture;
pub mod numeric;
pub mod prob;
pub mod protocol;
pub mod scenario;

pub use prob::Rational;

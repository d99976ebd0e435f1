//! Session blocking and statistical multiplexing gain for pools of virtual
//! base stations (VBSs) sharing a common set of compute servers.
//!
//! Every VBS owns a fixed number of radio servers; every admitted session
//! holds one radio server of its VBS and one compute server of the pool.
//! The stationary law is product-form, which gives four routes to the same
//! blocking numbers:
//!
//! * [`exact`] enumerates the admissible state space (small pools only),
//! * [`recursive`] convolves per-VBS weight vectors (quadratic in pool size),
//! * [`approx`] evaluates the large-pool Gaussian closed form,
//! * [`simulator`] runs the underlying Markov chain event by event.
//!
//! [`scenarios`] holds the single-VBS statistics for real-time and
//! delay-tolerant traffic that feed the closed forms.

pub mod approx;
pub mod error;
pub mod exact;
pub mod model;
pub mod numeric;
pub mod recursive;
pub mod report;
pub mod scenarios;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{ClassSpec, Discipline, PoolConfig, SingleVbsWeights, StateVector};
pub use report::{BlockingReport, Method};

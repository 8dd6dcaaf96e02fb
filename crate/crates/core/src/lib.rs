//! Distributed global optimization of univariate objectives over a network.
//!
//! Every agent replaces its local objective with a Chebyshev proxy, the
//! network averages the proxy coefficients by lazy-Metropolis consensus with
//! a max/min based distributed stopping rule, and each agent then minimizes
//! the recovered global proxy, either through a sum-of-squares SDP or by
//! enumerating stationary points with a colleague matrix.
//!
//! ```
//! use cpca_core::chebfit::{adaptive_fit, FitOptions, Interval};
//! use cpca_core::polyalg::minimize_by_stationary_points;
//!
//! let iv = Interval::new(-1.0, 1.0).unwrap();
//! let (proxy, _) = adaptive_fit(|x: f64| (x - 0.25).powi(2), iv, 1e-10, &FitOptions::default()).unwrap();
//! let (fmin, xs) = minimize_by_stationary_points(&proxy);
//! assert!(fmin.abs() < 1e-9);
//! assert!((xs[0] - 0.25).abs() < 1e-6);
//! ```

pub mod chebfit;
pub mod consensus;
mod error;
pub mod harness;
pub mod netgraph;
pub mod pipeline;
pub mod polyalg;
pub mod sdp;

pub use chebfit::{ApproxReport, ChebProxy, Interval};
pub use consensus::{AgentState, ConsensusOutcome};
pub use error::{Error, Result, Stage};
pub use netgraph::Graph;
pub use pipeline::{run_cpca, Backend, CpcaConfig, CpcaResult, ErrorBudget, Objective};
pub use sdp::{SdpProblem, SdpSolution, SdpStatus};

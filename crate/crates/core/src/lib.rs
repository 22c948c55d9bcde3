//! Analytical performance modeling for dataflow workloads.
//!
//! Tasks are processes whose progress is driven by piecewise-polynomial
//! data/resource requirement and input functions. Progress over time and the
//! full bottleneck timeline are derived in closed form, without event
//! simulation. See the crate README for the model walkthrough.

pub mod metrics;
pub mod model;
pub mod oracle;
pub mod piecewise;
pub mod solver;
pub mod tol;
pub mod workflow;

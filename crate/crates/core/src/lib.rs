//! Optimal hierarchical signaling games with quadratic costs.
//!
//! A sender who knows a finite-valued state `z = [x; y]` commits to a
//! signaling kernel; the receiver answers with the conditional mean of `x`.
//! The sender's problem is equivalent to a linear program over the cone of
//! completely positive matrices,
//!
//! ```text
//! min tr(Vbar Xi)  s.t.  Xi 1 = p_o,  Xi in CP^n,
//! ```
//!
//! which this crate brackets with polyhedral inner/outer cones built from
//! simplicial partitions ([`solver`]), relaxes to the doubly nonnegative cone
//! ([`dnn`]), and maps back to an explicit signaling strategy
//! ([`strategy`]). The [`quantize`] module extends the finite machinery to
//! sampled continuous sources with an explicit error budget.

pub mod dnn;
pub mod error;
pub mod io;
pub mod lp;
pub mod model;
pub mod partition;
pub mod planar;
pub mod quantize;
pub mod scenarios;
pub mod solver;
pub mod strategy;

pub use error::{Error, Result};
pub use model::{CostVariant, ConstraintMode, JointPmf, SignalingProblem};

//! PI-Lead auto-tuning of type-one plants from closed-loop step experiments.
//!
//! Also home to the plant simulator, trace analysis, wire protocol and report
//! plumbing behind the `ut` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod docs;
pub mod lti;
pub mod report;
pub mod sim;
pub mod tuner;
pub mod wire;

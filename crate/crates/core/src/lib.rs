//! Hardware inference-cost model for Kolmogorov-Arnold networks.
//!
//! A network description ([`netspec`]) is priced three ways: closed-form
//! counts of real multiplications, bit operations and bit-level adders
//! ([`analytic`]); an instrumented forward pass that tallies the operations
//! it actually performs ([`counted`]); and width sweeps that find the
//! largest network fitting an MLP baseline's budget ([`iso`]).

pub mod analytic;
pub mod counted;
pub mod dataflow;
pub mod error;
pub mod infer;
pub mod iso;
pub mod netspec;

pub use analytic::{cost_report, CostReport, CostTotals, LayerCost, Metric};
pub use counted::{counted_forward, reconcile, CountedPass, OpTally, ReconciliationReport};
pub use error::{Error, Result};
pub use infer::{network_forward, EvalOptions, Network, NetworkWeights};
pub use iso::{iso_table, max_width_within_budget, sweep_widths, Template};
pub use netspec::{parse_spec, BasisMode, EdgeFamily, FamilyKind, LayerSpec, NetworkSpec, QuantConfig, QuantScheme};

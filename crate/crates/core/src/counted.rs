//! Instrumented forward pass and reconciliation against the analytic model.
//!
//! The interpreter runs the same dataflow as [`crate::infer`] with a tally
//! attached, attributing every multiply, add, table read and comparison to
//! the edge or node where it happens and to its [`Stage`].

use std::iter::Sum;
use std::ops::{Add, AddAssign};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, CostTotals};
use crate::dataflow::{Arith, Stage};
use crate::error::{Error, Result};
use crate::infer::bspline::scaled_triangle;
use crate::infer::{EvalOptions, LutConfig, Network, NetworkWeights};
use crate::netspec::{BasisMode, EdgeFamily, FamilyKind, Interval, NetworkSpec, QuantConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpTally {
    pub mults: u64,
    pub adds: u64,
    pub lut_fetches: u64,
    pub comparisons: u64,
}

impl Add for OpTally {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            mults: self.mults + o.mults,
            adds: self.adds + o.adds,
            lut_fetches: self.lut_fetches + o.lut_fetches,
            comparisons: self.comparisons + o.comparisons,
        }
    }
}

impl AddAssign for OpTally {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sum for OpTally {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Operation counts split by dataflow stage. Subtractions count as adds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedTally {
    pub fixed: OpTally,
    pub basis: OpTally,
    pub combine: OpTally,
    pub merge: OpTally,
    pub node: OpTally,
}

impl StagedTally {
    pub fn stage(&self, stage: Stage) -> OpTally {
        match stage {
            Stage::Fixed => self.fixed,
            Stage::Basis => self.basis,
            Stage::Combine => self.combine,
            Stage::Merge => self.merge,
            Stage::Node => self.node,
        }
    }

    fn stage_mut(&mut self, stage: Stage) -> &mut OpTally {
        match stage {
            Stage::Fixed => &mut self.fixed,
            Stage::Basis => &mut self.basis,
            Stage::Combine => &mut self.combine,
            Stage::Merge => &mut self.merge,
            Stage::Node => &mut self.node,
        }
    }

    pub fn total(&self) -> OpTally {
        self.fixed + self.basis + self.combine + self.merge + self.node
    }

    /// Additions the analytic accumulation count covers: input
    /// normalization, the coefficient dot product and node summation.
    /// Basis-generation and residual-merge adds are excluded.
    pub fn accumulation_adds(&self) -> u64 {
        self.fixed.adds + self.combine.adds + self.node.adds
    }
}

impl Add for StagedTally {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            fixed: self.fixed + o.fixed,
            basis: self.basis + o.basis,
            combine: self.combine + o.combine,
            merge: self.merge + o.merge,
            node: self.node + o.node,
        }
    }
}

impl Sum for StagedTally {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTally {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major by output, like the weights.
    pub edges: Vec<StagedTally>,
    pub nodes: Vec<StagedTally>,
}

impl LayerTally {
    fn new(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            edges: vec![StagedTally::default(); n_in * n_out],
            nodes: vec![StagedTally::default(); n_out],
        }
    }

    pub fn edge(&self, out: usize, inp: usize) -> &StagedTally {
        &self.edges[out * self.n_in + inp]
    }

    pub fn total(&self) -> StagedTally {
        self.edges.iter().chain(&self.nodes).copied().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountedPass {
    pub output: Vec<f64>,
    pub layers: Vec<LayerTally>,
}

impl CountedPass {
    pub fn total(&self) -> StagedTally {
        self.layers.iter().map(LayerTally::total).sum()
    }
}

/// An edge whose first multiplication goes unrecorded. Used to check that
/// reconciliation notices a missing count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSite {
    pub layer: usize,
    pub out: usize,
    pub inp: usize,
}

impl std::str::FromStr for FaultSite {
    type Err = Error;

    /// `layer:out:in`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(':')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("fault site `{s}` is not layer:out:in")))?;
        match parts[..] {
            [layer, out, inp] => Ok(Self { layer, out, inp }),
            _ => Err(Error::Parse(format!("fault site `{s}` is not layer:out:in"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Scope {
    Outside,
    Edge { layer: usize, out: usize, inp: usize },
    Node { layer: usize, out: usize },
}

struct Tally {
    layers: Vec<LayerTally>,
    scope: Scope,
    fault: Option<FaultSite>,
    fault_fired: bool,
    outside: StagedTally,
}

impl Tally {
    fn new(spec: &NetworkSpec, fault: Option<FaultSite>) -> Self {
        Self {
            layers: spec.layers().iter().map(|l| LayerTally::new(l.n_in, l.n_out)).collect(),
            scope: Scope::Outside,
            fault,
            fault_fired: false,
            outside: StagedTally::default(),
        }
    }

    fn slot(&mut self, stage: Stage) -> &mut OpTally {
        let staged = match self.scope {
            Scope::Outside => &mut self.outside,
            Scope::Edge { layer, out, inp } => {
                let l = &mut self.layers[layer];
                &mut l.edges[out * l.n_in + inp]
            }
            Scope::Node { layer, out } => &mut self.layers[layer].nodes[out],
        };
        staged.stage_mut(stage)
    }

    fn skip_for_fault(&mut self) -> bool {
        if self.fault_fired {
            return false;
        }
        match (self.fault, self.scope) {
            (Some(f), Scope::Edge { layer, out, inp }) if (f.layer, f.out, f.inp) == (layer, out, inp) => {
                self.fault_fired = true;
                true
            }
            _ => false,
        }
    }
}

impl Arith for Tally {
    fn mul(&mut self, stage: Stage, a: f64, b: f64) -> f64 {
        if !self.skip_for_fault() {
            self.slot(stage).mults += 1;
        }
        a * b
    }

    fn add(&mut self, stage: Stage, a: f64, b: f64) -> f64 {
        self.slot(stage).adds += 1;
        a + b
    }

    fn sub(&mut self, stage: Stage, a: f64, b: f64) -> f64 {
        self.slot(stage).adds += 1;
        a - b
    }

    fn fetch(&mut self, stage: Stage, value: f64) -> f64 {
        self.slot(stage).lut_fetches += 1;
        value
    }

    fn compare(&mut self, stage: Stage) {
        self.slot(stage).comparisons += 1;
    }

    fn enter_edge(&mut self, layer: usize, out: usize, inp: usize) {
        self.scope = Scope::Edge { layer, out, inp };
    }

    fn enter_node(&mut self, layer: usize, out: usize) {
        self.scope = Scope::Node { layer, out };
    }
}

/// A [`Network`] that reports operation counts with every pass.
#[derive(Debug, Clone)]
pub struct CountedNetwork {
    net: Network,
    fault: Option<FaultSite>,
}

impl CountedNetwork {
    pub fn new(spec: &NetworkSpec, weights: &NetworkWeights, options: EvalOptions) -> Result<Self> {
        Ok(Self {
            net: Network::new(spec, weights, options)?,
            fault: None,
        })
    }

    #[doc(hidden)]
    pub fn with_fault(mut self, site: FaultSite) -> Self {
        self.fault = Some(site);
        self
    }

    pub fn forward(&self, x: &[f64]) -> Result<CountedPass> {
        self.net.check_input(x)?;
        let mut tally = Tally::new(self.net.spec(), self.fault);
        let output = self.net.forward_with(x, &mut tally);
        Ok(CountedPass {
            output,
            layers: tally.layers,
        })
    }
}

pub fn counted_forward(
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    x: &[f64],
    mode: BasisMode,
) -> Result<CountedPass> {
    CountedNetwork::new(spec, weights, EvalOptions::new(mode))?.forward(x)
}

/// Multiplications the boundary-optimized Cox-de Boor triangle of order `k`
/// actually performs, measured by running it.
pub fn count_recursion_triangle(k: usize) -> u64 {
    #[derive(Default)]
    struct Mults(u64);
    impl Arith for Mults {
        fn mul(&mut self, _: Stage, a: f64, b: f64) -> f64 {
            self.0 += 1;
            a * b
        }
    }
    let mut counter = Mults::default();
    let mut out = vec![0.0; k + 1];
    scaled_triangle(k, 0.375, &mut out, &mut counter);
    counter.0
}

/// Hidden widths `X` of the `[3, X, X, 2]` networks in the reconciliation grid.
pub const RECONCILIATION_WIDTHS: [usize; 5] = [1, 2, 3, 8, 16];

/// Edge families in the reconciliation grid: B-spline `k ∈ 1..=5` on 1, 5
/// and 20 intervals, GRBF with 1, 3, 5 and 8 centers, Chebyshev degrees 0,
/// 1, 3 and 5, Fourier with 1, 3 and 5 harmonics, and MLP.
pub fn reconciliation_families() -> Vec<EdgeFamily> {
    let mut out = Vec::new();
    for k in 1..=5 {
        for g in [1, 5, 20] {
            out.push(EdgeFamily::bspline(k, g));
        }
    }
    out.extend([1, 3, 5, 8].map(EdgeFamily::grbf));
    out.extend([0, 1, 3, 5].map(EdgeFamily::chebyshev));
    out.extend([1, 3, 5].map(EdgeFamily::fourier));
    out.push(EdgeFamily::mlp());
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconcileOptions {
    pub mode: BasisMode,
    pub trials: usize,
    pub seed: u64,
    pub lut: LutConfig,
    pub fault: Option<FaultSite>,
}

impl ReconcileOptions {
    pub fn new(mode: BasisMode, trials: usize, seed: u64) -> Self {
        Self {
            mode,
            trials,
            seed,
            lut: LutConfig::default(),
            fault: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Mults,
    Adds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Site {
    Edge { out: usize, inp: usize },
    Node { out: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub trial: usize,
    pub layer: usize,
    pub site: Site,
    pub quantity: Quantity,
    pub expected: u64,
    pub counted: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerReconciliation {
    pub layer: usize,
    pub family: FamilyKind,
    pub n_in: usize,
    pub n_out: usize,
    pub expected_rm: u64,
    pub counted_mults: u64,
    pub expected_adds: u64,
    pub counted_adds: u64,
    /// Residual-merge additions, one per KAN edge; outside the accumulation model.
    pub merge_adds: u64,
    /// Additions spent generating basis values (recursion, recurrences).
    pub basis_adds: u64,
    pub lut_fetches: u64,
    pub comparisons: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationReport {
    pub name: String,
    pub mode: BasisMode,
    pub trials: usize,
    pub seed: u64,
    pub passed: bool,
    /// Per-layer counts from the first trial.
    pub layers: Vec<LayerReconciliation>,
    pub analytic: CostTotals,
    pub mismatch_count: usize,
    /// The first [`MAX_LISTED_MISMATCHES`] mismatches in visiting order.
    pub mismatches: Vec<Mismatch>,
}

pub const MAX_LISTED_MISMATCHES: usize = 64;

impl ReconciliationReport {
    pub fn first_divergence(&self) -> Option<&Mismatch> {
        self.mismatches.first()
    }
}

pub fn reconcile(
    spec: &NetworkSpec,
    quant: &QuantConfig,
    mode: BasisMode,
    trials: usize,
    seed: u64,
) -> Result<ReconciliationReport> {
    reconcile_with(spec, quant, ReconcileOptions::new(mode, trials, seed))
}

/// Runs `trials` counted passes on random weights and inputs and checks
/// every edge and node against the analytic per-edge and per-node counts.
pub fn reconcile_with(spec: &NetworkSpec, quant: &QuantConfig, opts: ReconcileOptions) -> Result<ReconciliationReport> {
    if opts.trials == 0 {
        return Err(Error::Argument("reconciliation needs at least one trial".into()));
    }
    let report = analytic::cost_report(spec, quant, opts.mode)?;
    let expected: Vec<_> = spec
        .layers()
        .iter()
        .map(|l| -> Result<_> {
            Ok((
                analytic::rm_edge(&l.family, opts.mode)?,
                analytic::accumulation_adds_edge(&l.family),
                analytic::accumulation_adds_node(l),
            ))
        })
        .collect::<Result<_>>()?;

    let weights = NetworkWeights::random(spec, opts.seed);
    let mut net = CountedNetwork::new(
        spec,
        &weights,
        EvalOptions {
            mode: opts.mode,
            lut: opts.lut,
        },
    )?;
    net.fault = opts.fault;

    let domain = match &spec.layers()[0].family {
        EdgeFamily::BSpline(p) => p.domain,
        _ => Interval::UNIT,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut mismatches = Vec::new();
    let mut mismatch_count = 0;
    let mut layers = Vec::new();
    for trial in 0..opts.trials {
        let x: Vec<f64> = (0..spec.input_width())
            .map(|_| rng.random_range(domain.lo..=domain.hi))
            .collect();
        let pass = net.forward(&x)?;
        let mut record = |layer, site, quantity, expected, counted| {
            if expected != counted {
                mismatch_count += 1;
                if mismatches.len() < MAX_LISTED_MISMATCHES {
                    mismatches.push(Mismatch {
                        trial,
                        layer,
                        site,
                        quantity,
                        expected,
                        counted,
                    });
                }
            }
        };
        for (l, (lt, &(rm, edge_adds, node_adds))) in pass.layers.iter().zip(&expected).enumerate() {
            for out in 0..lt.n_out {
                for inp in 0..lt.n_in {
                    let e = lt.edge(out, inp);
                    let site = Site::Edge { out, inp };
                    record(l, site, Quantity::Mults, rm, e.total().mults);
                    record(l, site, Quantity::Adds, edge_adds, e.fixed.adds + e.combine.adds);
                }
                let n = &lt.nodes[out];
                let site = Site::Node { out };
                record(l, site, Quantity::Mults, 0, n.total().mults);
                record(l, site, Quantity::Adds, node_adds, n.node.adds);
            }
        }
        if trial == 0 {
            layers = pass
                .layers
                .iter()
                .zip(spec.layers())
                .zip(&expected)
                .enumerate()
                .map(|(l, ((lt, ls), &(rm, edge_adds, node_adds)))| {
                    let t = lt.total();
                    LayerReconciliation {
                        layer: l,
                        family: ls.family.kind(),
                        n_in: ls.n_in,
                        n_out: ls.n_out,
                        expected_rm: rm * ls.edge_count() as u64,
                        counted_mults: t.total().mults,
                        expected_adds: edge_adds * ls.edge_count() as u64 + node_adds * ls.n_out as u64,
                        counted_adds: t.accumulation_adds(),
                        merge_adds: t.merge.adds,
                        basis_adds: t.basis.adds,
                        lut_fetches: t.total().lut_fetches,
                        comparisons: t.total().comparisons,
                    }
                })
                .collect();
        }
    }

    Ok(ReconciliationReport {
        name: spec.name().to_string(),
        mode: opts.mode,
        trials: opts.trials,
        seed: opts.seed,
        passed: mismatch_count == 0,
        layers,
        analytic: report.totals,
        mismatch_count,
        mismatches,
    })
}

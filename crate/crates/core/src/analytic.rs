//! Closed-form hardware cost of MLP and KAN layers.
//!
//! Three metrics are modeled:
//!
//! * **RM**: real multiplications per inference.
//! * **BOP**: bit operations. A `b1 x b2` multiply costs `b1 * b2`, an
//!   accumulation costs the accumulator width.
//! * **NABS**: adders and bit shifts, where each multiplication by a
//!   `b`-bit operand becomes `X` adders of the same width as its result.
//!
//! Per-edge BOP and NABS are built from labelled [`Term`]s so the CLI can
//! print the substituted derivation from the same code path that computes
//! the totals. B-spline layers additionally get the learnable parameter
//! count and the dense GPU FLOPs figure commonly reported for KANs; neither
//! enters the hardware metrics.
//!
//! The bias term counted in the B-spline parameter total has no matching
//! addition in the KAN BOP/NABS layer formulas. We follow the formulas and
//! charge no bias addition to KAN layers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netspec::{BSplineParams, BasisMode, EdgeFamily, FamilyKind, LayerSpec, NetworkSpec, QuantConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rm,
    Bop,
    Nabs,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Rm, Metric::Bop, Metric::Nabs];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rm => "rm",
            Self::Bop => "bop",
            Self::Nabs => "nabs",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rm" => Ok(Self::Rm),
            "bop" => Ok(Self::Bop),
            "nabs" => Ok(Self::Nabs),
            other => Err(Error::Parse(format!("unknown metric `{other}`"))),
        }
    }
}

/// `⌈log₂ n⌉`, with `⌈log₂ 1⌉ = 0`.
pub fn ceil_log2(n: u64) -> u64 {
    assert!(n >= 1, "log2 of zero fan-in");
    u64::from(64 - (n - 1).leading_zeros())
}

/// Accumulator width for an `n`-term multiply-accumulate of `b_w`-bit by
/// `b_x`-bit operands: `b_w + b_x + ⌈log₂ n⌉`.
pub fn acc_bitwidth(n: u64, b_w: u32, b_x: u32) -> u64 {
    u64::from(b_w) + u64::from(b_x) + ceil_log2(n)
}

/// One labelled summand of a cost formula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub label: &'static str,
    /// Symbolic form.
    pub formula: &'static str,
    /// The formula with numbers substituted.
    pub substituted: String,
    pub value: u64,
}

impl Term {
    fn new(label: &'static str, formula: &'static str, substituted: String, value: u64) -> Self {
        Self {
            label,
            formula,
            substituted,
            value,
        }
    }
}

pub fn sum_terms(terms: &[Term]) -> u64 {
    terms.iter().map(|t| t.value).sum()
}

pub fn rm_edge_terms(family: &EdgeFamily, mode: BasisMode) -> Result<Vec<Term>> {
    let unsupported = || Error::UnsupportedMode {
        family: family.kind(),
        mode,
    };
    let n = family.active_terms() as u64;
    let terms = match (family, mode) {
        (EdgeFamily::Mlp { .. }, _) => vec![Term::new("weight", "1", "1".into(), 1)],
        (EdgeFamily::BSpline(p), _) => {
            let k = p.order as u64;
            let mut t = vec![
                Term::new("fixed", "2", "2".into(), 2),
                Term::new("linear combination", "k + 1", format!("{k} + 1"), n),
            ];
            if mode == BasisMode::Recursive {
                t.push(Term::new(
                    "basis (Cox-de Boor)",
                    "k^2 + k - 2",
                    format!("{k}^2 + {k} - 2"),
                    k * k + k - 2,
                ));
            }
            t
        }
        (EdgeFamily::Grbf(_), _) => {
            let mut t = vec![
                Term::new("fixed", "1", "1".into(), 1),
                Term::new("linear combination", "N_c", format!("{n}"), n),
            ];
            if mode == BasisMode::Recursive {
                t.push(Term::new("basis (square, scale)", "2 N_c", format!("2*{n}"), 2 * n));
            }
            t
        }
        (EdgeFamily::Chebyshev(p), BasisMode::LutOptimized) => vec![
            Term::new("fixed", "1", "1".into(), 1),
            Term::new("linear combination", "n + 1", format!("{} + 1", p.degree), n),
        ],
        (EdgeFamily::Fourier(p), BasisMode::LutOptimized) => vec![
            Term::new("fixed", "1", "1".into(), 1),
            Term::new("linear combination", "2G", format!("2*{}", p.grid), n),
        ],
        _ => return Err(unsupported()),
    };
    Ok(terms)
}

/// Real multiplications for one edge: `k+3` (B-spline, tables), `(k+1)²`
/// (B-spline, recursion), `N_c+1` / `3N_c+1` (GRBF), `n+2` (Chebyshev),
/// `2G+1` (Fourier), 1 (MLP connection).
pub fn rm_edge(family: &EdgeFamily, mode: BasisMode) -> Result<u64> {
    rm_edge_terms(family, mode).map(|t| sum_terms(&t))
}

pub fn rm_layer(layer: &LayerSpec, mode: BasisMode) -> Result<u64> {
    Ok(layer.edge_count() as u64 * rm_edge(&layer.family, mode)?)
}

fn acc_for(family: &EdgeFamily, quant: &QuantConfig) -> u64 {
    let b_basis = quant.basis_bits(family.kind());
    acc_bitwidth(family.active_terms() as u64, quant.b_w, b_basis)
}

/// Bit operations for one edge. `fan_in` only matters for MLP connections,
/// whose accumulator grows with the neuron's fan-in.
pub fn bop_edge_terms(family: &EdgeFamily, quant: &QuantConfig, fan_in: usize) -> Vec<Term> {
    let (b_i, b_w) = (u64::from(quant.b_i), u64::from(quant.b_w));
    if let EdgeFamily::Mlp { .. } = family {
        let acc = acc_bitwidth(fan_in as u64, quant.b_w, quant.b_i);
        return vec![
            Term::new("multiply", "b_w b_i", format!("{b_w}*{b_i}"), b_w * b_i),
            Term::new("accumulate", "Acc(n_i, b_w, b_i)", format!("{acc}"), acc),
        ];
    }

    let terms = family.active_terms() as u64;
    let b_x = u64::from(quant.basis_bits(family.kind()));
    let acc = acc_for(family, quant);
    let (lin_formula, acc_formula) = match family.kind() {
        FamilyKind::BSpline => ("(k+1) b_w b_basis", "k Acc(k+1, b_w, b_basis)"),
        FamilyKind::Grbf => ("N_c b_w b_rbf", "(N_c-1) Acc(N_c, b_w, b_rbf)"),
        FamilyKind::Chebyshev => ("(n+1) b_w b_cheby", "n Acc(n+1, b_w, b_cheby)"),
        _ => ("2G b_w b_fourier", "(2G-1) Acc(2G, b_w, b_fourier)"),
    };
    let fixed = match family {
        EdgeFamily::BSpline(_) => {
            let b_knot = u64::from(quant.b_knot);
            Term::new(
                "fixed (normalize, base path)",
                "b_i (1 + b_knot + b_w)",
                format!("{b_i}*(1 + {b_knot} + {b_w})"),
                b_i * (1 + b_knot + b_w),
            )
        }
        _ => Term::new("fixed (base path)", "b_i b_w", format!("{b_i}*{b_w}"), b_i * b_w),
    };
    vec![
        fixed,
        Term::new(
            "basis products",
            lin_formula,
            format!("{terms}*{b_w}*{b_x}"),
            terms * b_w * b_x,
        ),
        Term::new(
            "basis accumulation",
            acc_formula,
            format!("{}*{acc}", terms - 1),
            (terms - 1) * acc,
        ),
    ]
}

pub fn bop_edge(family: &EdgeFamily, quant: &QuantConfig, fan_in: usize) -> u64 {
    sum_terms(&bop_edge_terms(family, quant, fan_in))
}

/// Adders and bit shifts for one edge.
pub fn nabs_edge_terms(family: &EdgeFamily, quant: &QuantConfig, fan_in: usize) -> Vec<Term> {
    let (b_i, b_w) = (u64::from(quant.b_i), u64::from(quant.b_w));
    let x_w = quant.weight_adders();
    if let EdgeFamily::Mlp { .. } = family {
        let acc = acc_bitwidth(fan_in as u64, quant.b_w, quant.b_i);
        return vec![Term::new(
            "multiply-accumulate",
            "(X_w + 1) Acc(n_i, b_w, b_i)",
            format!("({x_w} + 1)*{acc}"),
            (x_w + 1) * acc,
        )];
    }

    let terms = family.active_terms() as u64;
    let acc = acc_for(family, quant);
    let mut out = Vec::with_capacity(4);
    if let EdgeFamily::BSpline(_) = family {
        let b_knot = u64::from(quant.b_knot);
        let x_knot = quant.knot_adders();
        out.push(Term::new("normalize subtract", "b_i", format!("{b_i}"), b_i));
        out.push(Term::new(
            "grid multiply",
            "X_knot (b_i + b_knot)",
            format!("{x_knot}*({b_i} + {b_knot})"),
            x_knot * (b_i + b_knot),
        ));
    }
    out.push(Term::new(
        "base multiply",
        "X_w (b_i + b_w)",
        format!("{x_w}*({b_i} + {b_w})"),
        x_w * (b_i + b_w),
    ));
    let formula = match family.kind() {
        FamilyKind::BSpline => "[(k+1) X_w + k] Acc(k+1, b_w, b_basis)",
        FamilyKind::Grbf => "[N_c X_w + (N_c-1)] Acc(N_c, b_w, b_rbf)",
        FamilyKind::Chebyshev => "[(n+1) X_w + n] Acc(n+1, b_w, b_cheby)",
        _ => "[2G X_w + (2G-1)] Acc(2G, b_w, b_fourier)",
    };
    out.push(Term::new(
        "basis dot product",
        formula,
        format!("({terms}*{x_w} + {})*{acc}", terms - 1),
        (terms * x_w + terms - 1) * acc,
    ));
    out
}

pub fn nabs_edge(family: &EdgeFamily, quant: &QuantConfig, fan_in: usize) -> u64 {
    sum_terms(&nabs_edge_terms(family, quant, fan_in))
}

/// Summing `n_i` edge outputs at each of the `n_n` KAN output nodes:
/// `n_n (n_i - 1)(Acc(terms, b_w, b_basis) + ⌈log₂ n_i⌉)`. MLP layers fold
/// their node accumulation into the per-connection terms and return 0.
pub fn output_accumulation(layer: &LayerSpec, quant: &QuantConfig) -> u64 {
    if !layer.family.is_kan() {
        return 0;
    }
    let n_i = layer.n_in as u64;
    layer.n_out as u64 * (n_i - 1) * (acc_for(&layer.family, quant) + ceil_log2(n_i))
}

pub fn bop_layer(layer: &LayerSpec, quant: &QuantConfig) -> u64 {
    layer.edge_count() as u64 * bop_edge(&layer.family, quant, layer.n_in) + output_accumulation(layer, quant)
}

pub fn nabs_layer(layer: &LayerSpec, quant: &QuantConfig) -> u64 {
    layer.edge_count() as u64 * nabs_edge(&layer.family, quant, layer.n_in) + output_accumulation(layer, quant)
}

/// Layer-level terms for the derivation printout.
pub fn layer_terms(layer: &LayerSpec, quant: &QuantConfig, metric: Metric, mode: BasisMode) -> Result<Vec<Term>> {
    let edges = layer.edge_count() as u64;
    let edge = match metric {
        Metric::Rm => rm_edge(&layer.family, mode)?,
        Metric::Bop => bop_edge(&layer.family, quant, layer.n_in),
        Metric::Nabs => nabs_edge(&layer.family, quant, layer.n_in),
    };
    let mut out = vec![Term::new(
        "edges",
        "n_n n_i [edge]",
        format!("{}*{}*{edge}", layer.n_out, layer.n_in),
        edges * edge,
    )];
    if metric != Metric::Rm && layer.family.is_kan() {
        let acc = acc_for(&layer.family, quant);
        let lg = ceil_log2(layer.n_in as u64);
        out.push(Term::new(
            "output accumulation",
            "n_n (n_i - 1)(Acc + ⌈log2 n_i⌉)",
            format!("{}*{}*({acc} + {lg})", layer.n_out, layer.n_in - 1),
            output_accumulation(layer, quant),
        ));
    }
    Ok(out)
}

/// Additions per edge once every multiplication is removed (`X = 0`):
/// the B-spline normalization subtraction plus the `terms - 1` dot-product
/// accumulations. MLP connections have none; their sums happen at the node.
pub fn accumulation_adds_edge(family: &EdgeFamily) -> u64 {
    match family {
        EdgeFamily::Mlp { .. } => 0,
        EdgeFamily::BSpline(p) => 1 + p.order as u64,
        _ => family.active_terms() as u64 - 1,
    }
}

/// Additions per output node: `n_i - 1` edge sums, plus the bias add for
/// MLP neurons.
pub fn accumulation_adds_node(layer: &LayerSpec) -> u64 {
    let sums = layer.n_in as u64 - 1;
    if layer.family.is_kan() {
        sums
    } else {
        sums + 1
    }
}

pub fn accumulation_adds_layer(layer: &LayerSpec) -> u64 {
    layer.edge_count() as u64 * accumulation_adds_edge(&layer.family)
        + layer.n_out as u64 * accumulation_adds_node(layer)
}

fn bspline_params<'a>(layer: &'a LayerSpec, what: &'static str) -> Result<&'a BSplineParams> {
    match &layer.family {
        EdgeFamily::BSpline(p) => Ok(p),
        other => Err(Error::UnsupportedFamily {
            what,
            expected: FamilyKind::BSpline,
            found: other.kind(),
        }),
    }
}

/// Learnable parameters of a B-spline layer: `n_i n_n (G + k + 3) + n_n`.
pub fn n_par_bspline(layer: &LayerSpec) -> Result<u64> {
    let p = bspline_params(layer, "parameter count")?;
    Ok(layer.edge_count() as u64 * (p.grid + p.order + 3) as u64 + layer.n_out as u64)
}

/// Dense FLOPs for one B-spline edge when all `G + k` basis functions are
/// evaluated: `9k(G + 1.5k) + 2G - 2.5k - 1`.
pub fn flops_dense_bspline_edge(p: &BSplineParams) -> f64 {
    let k = p.order as f64;
    let g = p.grid as f64;
    9.0 * k * (g + 1.5 * k) + 2.0 * g - 2.5 * k - 1.0
}

pub fn flops_dense_bspline_layer(layer: &LayerSpec) -> Result<f64> {
    let p = bspline_params(layer, "dense FLOPs")?;
    Ok(layer.edge_count() as f64 * flops_dense_bspline_edge(p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub family: FamilyKind,
    pub n_in: usize,
    pub n_out: usize,
    pub rm: u64,
    pub bop: u64,
    pub nabs: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_par: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops_dense: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostTotals {
    pub rm: u64,
    pub bop: u64,
    pub nabs: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_par: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops_dense: Option<f64>,
}

impl CostTotals {
    pub fn get(&self, metric: Metric) -> u64 {
        match metric {
            Metric::Rm => self.rm,
            Metric::Bop => self.bop,
            Metric::Nabs => self.nabs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub name: String,
    pub mode: BasisMode,
    pub per_layer: Vec<LayerCost>,
    pub totals: CostTotals,
}

fn add_opt<T: std::ops::Add<Output = T>>(acc: Option<T>, v: Option<T>) -> Option<T> {
    match (acc, v) {
        (Some(a), Some(b)) => Some(a + b),
        (a, b) => a.or(b),
    }
}

pub fn layer_cost(layer: &LayerSpec, quant: &QuantConfig, mode: BasisMode) -> Result<LayerCost> {
    let is_bspline = layer.family.kind() == FamilyKind::BSpline;
    Ok(LayerCost {
        family: layer.family.kind(),
        n_in: layer.n_in,
        n_out: layer.n_out,
        rm: rm_layer(layer, mode)?,
        bop: bop_layer(layer, quant),
        nabs: nabs_layer(layer, quant),
        n_par: is_bspline.then(|| n_par_bspline(layer)).transpose()?,
        flops_dense: is_bspline.then(|| flops_dense_bspline_layer(layer)).transpose()?,
    })
}

pub fn cost_report(spec: &NetworkSpec, quant: &QuantConfig, mode: BasisMode) -> Result<CostReport> {
    let per_layer = spec
        .layers()
        .iter()
        .map(|l| layer_cost(l, quant, mode))
        .collect::<Result<Vec<_>>>()?;
    let totals = per_layer.iter().fold(CostTotals::default(), |t, l| CostTotals {
        rm: t.rm + l.rm,
        bop: t.bop + l.bop,
        nabs: t.nabs + l.nabs,
        n_par: add_opt(t.n_par, l.n_par),
        flops_dense: add_opt(t.flops_dense, l.flops_dense),
    });
    Ok(CostReport {
        name: spec.name().to_string(),
        mode,
        per_layer,
        totals,
    })
}

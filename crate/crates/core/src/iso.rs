//! Width sweeps and iso-complexity sizing against an MLP baseline.
//!
//! All costs here use table-based basis evaluation.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{bop_layer, nabs_layer, rm_layer, Metric};
use crate::error::{Error, Result};
use crate::netspec::{BasisMode, EdgeFamily, NetworkSpec, QuantConfig};

/// Widths grow past this only if the cost model stops increasing in `X`.
const SEARCH_LIMIT: usize = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Fixed(usize),
    Free,
}

/// An architecture such as `3,X,X,2` whose `X` entries share one free width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    slots: Vec<Slot>,
}

impl Template {
    pub fn instantiate(&self, x: usize) -> Vec<usize> {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Fixed(w) => *w,
                Slot::Free => x,
            })
            .collect()
    }

    pub fn network(&self, x: usize, family: &EdgeFamily) -> Result<NetworkSpec> {
        NetworkSpec::uniform(family_label(family).to_string(), &self.instantiate(x), family)
    }
}

impl Default for Template {
    /// `3,X,X,2`.
    fn default() -> Self {
        Self {
            slots: vec![Slot::Fixed(3), Slot::Free, Slot::Free, Slot::Fixed(2)],
        }
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Template {
            template: s.to_string(),
            reason: reason.to_string(),
        };
        let body = s.trim().trim_start_matches('[').trim_end_matches(']');
        let slots = body
            .split(',')
            .map(|tok| match tok.trim() {
                "X" | "x" => Ok(Slot::Free),
                t => match t.parse::<usize>() {
                    Ok(0) => Err(bad("widths must be >= 1")),
                    Ok(w) => Ok(Slot::Fixed(w)),
                    Err(_) => Err(bad(&format!("`{t}` is neither a width nor X"))),
                },
            })
            .collect::<Result<Vec<_>>>()?;
        if slots.len() < 2 {
            return Err(bad("need at least an input and an output width"));
        }
        if !slots.contains(&Slot::Free) {
            return Err(bad("no free width X"));
        }
        Ok(Self { slots })
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match s {
                Slot::Fixed(w) => write!(f, "{w}")?,
                Slot::Free => f.write_str("X")?,
            }
        }
        Ok(())
    }
}

/// Short comma-free name for tables and CSV files, e.g. `bspline-k3-g5`.
pub fn family_label(family: &EdgeFamily) -> String {
    match family {
        EdgeFamily::Mlp { .. } => "mlp".into(),
        EdgeFamily::BSpline(p) => format!("bspline-k{}-g{}", p.order, p.grid),
        EdgeFamily::Grbf(p) => format!("grbf-nc{}", p.n_centers()),
        EdgeFamily::Chebyshev(p) => format!("chebyshev-n{}", p.degree),
        EdgeFamily::Fourier(p) => format!("fourier-g{}", p.grid),
    }
}

/// The four families compared throughout: cubic B-spline on 5 intervals,
/// 5 Gaussian centers, degree-5 Chebyshev, 5 Fourier harmonics.
pub fn reference_families() -> Vec<EdgeFamily> {
    vec![
        EdgeFamily::bspline(3, 5),
        EdgeFamily::grbf(5),
        EdgeFamily::chebyshev(5),
        EdgeFamily::fourier(5),
    ]
}

/// The MLP `[3, 64, 64, 2]`.
pub fn reference_baseline() -> NetworkSpec {
    NetworkSpec::uniform("mlp-3-64-64-2", &[3, 64, 64, 2], &EdgeFamily::mlp()).expect("valid baseline")
}

/// Network total for one metric with table-based basis evaluation.
pub fn metric_total(spec: &NetworkSpec, quant: &QuantConfig, metric: Metric) -> Result<u64> {
    spec.layers().iter().try_fold(0u64, |acc, l| {
        Ok(acc
            + match metric {
                Metric::Rm => rm_layer(l, BasisMode::LutOptimized)?,
                Metric::Bop => bop_layer(l, quant),
                Metric::Nabs => nabs_layer(l, quant),
            })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "X")]
    pub x: usize,
    pub family: String,
    pub rm: u64,
    pub bop: u64,
    pub nabs: u64,
    pub rm_ratio: f64,
    pub bop_ratio: f64,
    pub nabs_ratio: f64,
}

/// Every metric for the MLP and each family at every `X` in `range`. Each
/// width yields the MLP row first, then one row per family with ratios to
/// that MLP.
pub fn sweep_widths(
    template: &Template,
    range: (usize, usize),
    quant: &QuantConfig,
    families: &[EdgeFamily],
) -> Result<Vec<SweepRow>> {
    let (lo, hi) = range;
    if lo < 1 || lo > hi {
        return Err(Error::Range { min: lo, max: hi });
    }
    let mlp = EdgeFamily::mlp();
    let rows: Vec<Vec<SweepRow>> = (lo..=hi)
        .into_par_iter()
        .map(|x| {
            let totals = |fam: &EdgeFamily| -> Result<[u64; 3]> {
                let spec = template.network(x, fam)?;
                Ok([
                    metric_total(&spec, quant, Metric::Rm)?,
                    metric_total(&spec, quant, Metric::Bop)?,
                    metric_total(&spec, quant, Metric::Nabs)?,
                ])
            };
            let base = totals(&mlp)?;
            std::iter::once(&mlp)
                .chain(families)
                .map(|fam| {
                    let t = totals(fam)?;
                    Ok(SweepRow {
                        x,
                        family: family_label(fam),
                        rm: t[0],
                        bop: t[1],
                        nabs: t[2],
                        rm_ratio: t[0] as f64 / base[0] as f64,
                        bop_ratio: t[1] as f64 / base[1] as f64,
                        nabs_ratio: t[2] as f64 / base[2] as f64,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IsoOutcome {
    Fits {
        /// Largest `X` whose cost does not exceed the budget.
        x_floor: usize,
        /// `x_floor` or `x_floor + 1`, whichever cost is closer to the budget.
        x_nearest: usize,
        budget: u64,
        cost_at_x: u64,
    },
    /// Even `X = 1` exceeds the budget.
    BudgetTooSmall { budget: u64, cost_at_one: u64 },
}

impl IsoOutcome {
    pub fn x_floor(&self) -> Option<usize> {
        match self {
            Self::Fits { x_floor, .. } => Some(*x_floor),
            Self::BudgetTooSmall { .. } => None,
        }
    }
}

/// Largest `x >= 1` with `cost(x) <= budget`, for `cost` non-decreasing.
/// Doubles to bracket the answer, then bisects.
pub fn solve_budget(budget: u64, cost: impl Fn(usize) -> Result<u64>) -> Result<IsoOutcome> {
    let at_one = cost(1)?;
    if at_one > budget {
        return Ok(IsoOutcome::BudgetTooSmall {
            budget,
            cost_at_one: at_one,
        });
    }
    // Invariant: cost(fit) <= budget < cost(over).
    let (mut fit, mut over) = (1usize, 2usize);
    while cost(over)? <= budget {
        fit = over;
        over *= 2;
        if over > SEARCH_LIMIT {
            return Err(Error::Argument(format!(
                "cost stays within budget {budget} beyond X = {SEARCH_LIMIT}"
            )));
        }
    }
    while over - fit > 1 {
        let mid = fit + (over - fit) / 2;
        if cost(mid)? <= budget {
            fit = mid;
        } else {
            over = mid;
        }
    }
    let (c_fit, c_over) = (cost(fit)?, cost(over)?);
    let x_nearest = if c_over - budget < budget - c_fit { over } else { fit };
    Ok(IsoOutcome::Fits {
        x_floor: fit,
        x_nearest,
        budget,
        cost_at_x: c_fit,
    })
}

/// Widest `template` network of `family` whose `metric` total does not
/// exceed that of `baseline`.
pub fn max_width_within_budget(
    family: &EdgeFamily,
    quant: &QuantConfig,
    metric: Metric,
    baseline: &NetworkSpec,
    template: &Template,
) -> Result<IsoOutcome> {
    let budget = metric_total(baseline, quant, metric)?;
    solve_budget(budget, |x| metric_total(&template.network(x, family)?, quant, metric))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoCell {
    pub family: String,
    pub metric: Metric,
    #[serde(flatten)]
    pub outcome: IsoOutcome,
}

/// Families of one metric ranked by solved width, widest first. Ties keep
/// input order; families without a fit rank last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRanking {
    pub metric: Metric,
    pub ranked: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoTable {
    pub baseline: String,
    pub template: String,
    pub cells: Vec<IsoCell>,
    pub ordering: Vec<FamilyRanking>,
}

impl IsoTable {
    pub fn cell(&self, family: &str, metric: Metric) -> Option<&IsoCell> {
        self.cells.iter().find(|c| c.family == family && c.metric == metric)
    }
}

/// Solves every (family, metric) cell. Cells are independent and solved in
/// parallel; the result order is families outer, metrics inner.
pub fn iso_table(
    quant: &QuantConfig,
    baseline: &NetworkSpec,
    template: &Template,
    families: &[EdgeFamily],
    metrics: &[Metric],
) -> Result<IsoTable> {
    let jobs: Vec<(&EdgeFamily, Metric)> = families
        .iter()
        .flat_map(|f| metrics.iter().map(move |&m| (f, m)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(family, metric)| {
            Ok(IsoCell {
                family: family_label(family),
                metric,
                outcome: max_width_within_budget(family, quant, metric, baseline, template)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ordering = metrics
        .iter()
        .map(|&metric| {
            let mut of_metric: Vec<&IsoCell> = cells.iter().filter(|c| c.metric == metric).collect();
            of_metric.sort_by_key(|c| std::cmp::Reverse(c.outcome.x_floor()));
            FamilyRanking {
                metric,
                ranked: of_metric.into_iter().map(|c| c.family.clone()).collect(),
            }
        })
        .collect();

    Ok(IsoTable {
        baseline: baseline.name().to_string(),
        template: template.to_string(),
        cells,
        ordering,
    })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Argument(e.to_string()))
}

#[derive(Serialize)]
struct IsoCsvRow<'a> {
    family: &'a str,
    metric: Metric,
    x_floor: Option<usize>,
    x_nearest: Option<usize>,
    budget: u64,
    cost_at_x: Option<u64>,
}

/// `iso.csv`. Cells where the budget is too small leave the width and cost
/// columns empty.
pub fn write_iso_csv<W: Write>(table: &IsoTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in &table.cells {
        let row = match c.outcome {
            IsoOutcome::Fits {
                x_floor,
                x_nearest,
                budget,
                cost_at_x,
            } => IsoCsvRow {
                family: &c.family,
                metric: c.metric,
                x_floor: Some(x_floor),
                x_nearest: Some(x_nearest),
                budget,
                cost_at_x: Some(cost_at_x),
            },
            IsoOutcome::BudgetTooSmall { budget, .. } => IsoCsvRow {
                family: &c.family,
                metric: c.metric,
                x_floor: None,
                x_nearest: None,
                budget,
                cost_at_x: None,
            },
        };
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Argument(e.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Argument(format!("csv output: {e}"))
}

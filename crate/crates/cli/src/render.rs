use std::io::Write;

use anyhow::Result;
use kan_hwcost::analytic::{self, Term};
use kan_hwcost::counted::Site;
use kan_hwcost::iso::{IsoOutcome, IsoTable};
use kan_hwcost::netspec::QuantScheme;
use kan_hwcost::{BasisMode, CostReport, EdgeFamily, LayerSpec, Metric, QuantConfig};
use serde::Serialize;

#[derive(Serialize)]
struct CsvRow<'a> {
    layer: &'a str,
    family: String,
    n_in: Option<usize>,
    n_out: Option<usize>,
    rm: u64,
    bop: u64,
    nabs: u64,
    n_par: Option<u64>,
    flops_dense: Option<f64>,
}

pub fn report_csv(report: &CostReport, out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, l) in report.per_layer.iter().enumerate() {
        w.serialize(CsvRow {
            layer: &i.to_string(),
            family: l.family.to_string(),
            n_in: Some(l.n_in),
            n_out: Some(l.n_out),
            rm: l.rm,
            bop: l.bop,
            nabs: l.nabs,
            n_par: l.n_par,
            flops_dense: l.flops_dense,
        })?;
    }
    let t = &report.totals;
    w.serialize(CsvRow {
        layer: "total",
        family: String::new(),
        n_in: None,
        n_out: None,
        rm: t.rm,
        bop: t.bop,
        nabs: t.nabs,
        n_par: t.n_par,
        flops_dense: t.flops_dense,
    })?;
    w.flush()?;
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

pub fn report_table(report: &CostReport, out: &mut dyn Write) -> Result<()> {
    let name = if report.name.is_empty() {
        "(unnamed)"
    } else {
        &report.name
    };
    writeln!(out, "network {name}, basis evaluation: {}", report.mode)?;
    writeln!(
        out,
        "{:<6} {:<10} {:>5} {:>6} {:>10} {:>12} {:>12} {:>10} {:>14}",
        "layer", "family", "n_in", "n_out", "RM", "BOP", "NABS", "N_par", "FLOPs(dense)"
    )?;
    for (i, l) in report.per_layer.iter().enumerate() {
        writeln!(
            out,
            "{:<6} {:<10} {:>5} {:>6} {:>10} {:>12} {:>12} {:>10} {:>14}",
            i,
            l.family.to_string(),
            l.n_in,
            l.n_out,
            l.rm,
            l.bop,
            l.nabs,
            opt(l.n_par),
            opt(l.flops_dense)
        )?;
    }
    let t = &report.totals;
    writeln!(
        out,
        "{:<6} {:<10} {:>5} {:>6} {:>10} {:>12} {:>12} {:>10} {:>14}",
        "total",
        "",
        "",
        "",
        t.rm,
        t.bop,
        t.nabs,
        opt(t.n_par),
        opt(t.flops_dense)
    )?;
    Ok(())
}

pub fn site(s: &Site) -> String {
    match s {
        Site::Edge { out, inp } => format!("edge (out {out}, in {inp})"),
        Site::Node { out } => format!("node {out}"),
    }
}

pub fn iso_summary(table: &IsoTable, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "baseline {}, template [{}]", table.baseline, table.template)?;
    writeln!(
        out,
        "{:<16} {:<6} {:>8} {:>10} {:>12} {:>12}",
        "family", "metric", "x_floor", "x_nearest", "budget", "cost_at_x"
    )?;
    for c in &table.cells {
        match c.outcome {
            IsoOutcome::Fits {
                x_floor,
                x_nearest,
                budget,
                cost_at_x,
            } => writeln!(
                out,
                "{:<16} {:<6} {:>8} {:>10} {:>12} {:>12}",
                c.family,
                c.metric.to_string(),
                x_floor,
                x_nearest,
                budget,
                cost_at_x
            )?,
            IsoOutcome::BudgetTooSmall { budget, cost_at_one } => writeln!(
                out,
                "{:<16} {:<6} budget too small: {budget} < {cost_at_one} at X=1",
                c.family,
                c.metric.to_string()
            )?,
        }
    }
    for r in &table.ordering {
        writeln!(out, "widest first ({}): {}", r.metric, r.ranked.join(" > "))?;
    }
    Ok(())
}

fn scheme_note(quant: &QuantConfig) -> String {
    let scheme = match quant.scheme {
        QuantScheme::Uniform => "uniform".to_string(),
        QuantScheme::PowerOfTwo => "power-of-two".to_string(),
        QuantScheme::AdditivePowerOfTwo(n) => format!("additive power-of-two, {n} terms"),
    };
    format!(
        "{scheme} weights (X_w = {}, X_knot = {})",
        quant.weight_adders(),
        quant.knot_adders()
    )
}

fn terms_block(out: &mut dyn Write, title: &str, total_label: &str, terms: &[Term]) -> Result<u64> {
    writeln!(out, "{title}")?;
    let fw = terms.iter().map(|t| t.formula.chars().count()).max().unwrap_or(0);
    let lw = terms.iter().map(|t| t.label.len()).max().unwrap_or(0);
    for t in terms {
        writeln!(
            out,
            "  {:<lw$}  {:<fw$}  = {} = {}",
            t.label, t.formula, t.substituted, t.value
        )?;
    }
    let total = analytic::sum_terms(terms);
    let parts: Vec<String> = terms.iter().map(|t| t.value.to_string()).collect();
    if parts.len() > 1 {
        writeln!(out, "  {total_label} = {} = {total}", parts.join(" + "))?;
    } else {
        writeln!(out, "  {total_label} = {total}")?;
    }
    Ok(total)
}

/// Derivation printout. Totals come from the same term lists the analytic
/// module sums.
pub fn formulas(
    family: &EdgeFamily,
    n_in: usize,
    n_out: usize,
    quant: &QuantConfig,
    mode: BasisMode,
    out: &mut dyn Write,
) -> Result<()> {
    let unit = if family.is_kan() { "edge" } else { "connection" };
    writeln!(out, "{family}, n_i = {n_in}, n_n = {n_out}, basis evaluation: {mode}")?;
    writeln!(
        out,
        "b_i = {}, b_w = {}, b_knot = {}, b_basis = {}, b_rbf = {}, b_cheby = {}, b_fourier = {}; {}",
        quant.b_i,
        quant.b_w,
        quant.b_knot,
        quant.b_basis,
        quant.b_rbf,
        quant.b_cheby,
        quant.b_fourier,
        scheme_note(quant)
    )?;
    writeln!(out)?;

    let layer = LayerSpec::new(n_in, n_out, family.clone());
    let rm = analytic::rm_edge_terms(family, mode);
    match &rm {
        Ok(terms) => {
            terms_block(out, &format!("RM per {unit}"), &format!("RM/{unit}"), terms)?;
        }
        Err(e) => writeln!(out, "RM per {unit}: {e}")?,
    }
    writeln!(out)?;
    terms_block(
        out,
        &format!("BOP per {unit}"),
        &format!("BOP/{unit}"),
        &analytic::bop_edge_terms(family, quant, n_in),
    )?;
    writeln!(out)?;
    terms_block(
        out,
        &format!("NABS per {unit}"),
        &format!("NABS/{unit}"),
        &analytic::nabs_edge_terms(family, quant, n_in),
    )?;

    for metric in Metric::ALL {
        if metric == Metric::Rm && rm.is_err() {
            continue;
        }
        writeln!(out)?;
        let name = metric.to_string().to_uppercase();
        let terms = analytic::layer_terms(&layer, quant, metric, mode)?;
        terms_block(
            out,
            &format!("{name} per layer [{n_in} -> {n_out}]"),
            &format!("{name}/layer"),
            &terms,
        )?;
    }
    Ok(())
}

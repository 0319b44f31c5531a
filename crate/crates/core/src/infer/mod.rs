//! Reference forward pass for all edge families.
//!
//! Evaluation follows the hardware dataflow that the cost model charges:
//! normalize the input, fetch or compute basis values, take the dot product
//! with the coefficients, add the residual base path, then sum at the nodes.

pub mod bspline;
pub mod lut;
pub mod weights;

use std::sync::Arc;

use crate::dataflow::{dot, Arith, Stage, Uncounted};
use crate::error::{Error, Result};
use crate::netspec::{BaseActivation, BasisMode, EdgeFamily, LayerSpec, NetworkSpec};

pub use bspline::{active_basis, bspline_basis_recursive, cardinal_bspline, find_interval, ActiveBasis, ActiveMode};
pub use lut::{chebyshev_t, BasisLut, Interp, LutConfig};
pub use weights::{EdgeWeights, LayerWeights, NetworkWeights};

use bspline::{factorial, scaled_triangle, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub mode: BasisMode,
    pub lut: LutConfig,
}

impl EvalOptions {
    pub fn new(mode: BasisMode) -> Self {
        Self {
            mode,
            lut: LutConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
enum Plan {
    Mlp {
        activation: BaseActivation,
    },
    BSpline {
        grid: Grid,
        order: usize,
        base: BaseActivation,
        lut: Option<Arc<BasisLut>>,
    },
    Grbf {
        centers: Vec<f64>,
        /// `-1 / (2σ²)`.
        exponent_scale: f64,
        base: BaseActivation,
        lut: Option<Arc<BasisLut>>,
    },
    Chebyshev {
        degree: usize,
        base: BaseActivation,
        lut: Option<Arc<BasisLut>>,
    },
    Fourier {
        grid: usize,
        omega: f64,
        base: BaseActivation,
        lut: Option<Arc<BasisLut>>,
    },
}

impl Plan {
    fn new(family: &EdgeFamily, lut: Option<Arc<BasisLut>>) -> Self {
        match family {
            EdgeFamily::Mlp { activation } => Plan::Mlp {
                activation: *activation,
            },
            EdgeFamily::BSpline(p) => Plan::BSpline {
                grid: Grid::new(p),
                order: p.order,
                base: p.base,
                lut,
            },
            EdgeFamily::Grbf(p) => Plan::Grbf {
                centers: p.centers.clone(),
                exponent_scale: -0.5 / (p.width * p.width),
                base: p.base,
                lut,
            },
            EdgeFamily::Chebyshev(p) => Plan::Chebyshev {
                degree: p.degree,
                base: p.base,
                lut,
            },
            EdgeFamily::Fourier(p) => Plan::Fourier {
                grid: p.grid,
                omega: p.omega,
                base: p.base,
                lut,
            },
        }
    }

    /// Output of one edge. `scratch` holds at least `active_terms` values.
    #[inline]
    fn edge<A: Arith>(&self, w: &EdgeWeights, x: f64, scratch: &mut [f64], a: &mut A) -> f64 {
        match self {
            Plan::Mlp { .. } => a.mul(Stage::Combine, w.w_b, x),
            Plan::BSpline { grid, order, base, lut } => {
                let k = *order;
                let (j, t) = grid.locate(x, a);
                let residual = base_path(*base, w.w_b, x, a);
                let values = &mut scratch[..=k];
                match lut {
                    Some(lut) => {
                        for (r, v) in values.iter_mut().enumerate() {
                            *v = a.fetch(Stage::Basis, lut.cardinal((k - r) as f64 + t));
                        }
                    }
                    // Coefficients were pre-divided by k! when the plan was built.
                    None => scaled_triangle(k, t, values, a),
                }
                let spline = dot(&w.coeffs[j..=j + k], values, a);
                a.add(Stage::Merge, residual, spline)
            }
            Plan::Grbf {
                centers,
                exponent_scale,
                base,
                lut,
            } => {
                let residual = base_path(*base, w.w_b, x, a);
                let values = &mut scratch[..centers.len()];
                match lut {
                    Some(lut) => {
                        for (i, v) in values.iter_mut().enumerate() {
                            *v = a.fetch(Stage::Basis, lut.value(i, x));
                        }
                    }
                    None => {
                        for (v, &c) in values.iter_mut().zip(centers) {
                            let d = a.sub(Stage::Basis, x, c);
                            let sq = a.mul(Stage::Basis, d, d);
                            let e = a.mul(Stage::Basis, sq, *exponent_scale);
                            *v = a.fetch(Stage::Basis, e.exp());
                        }
                    }
                }
                let expansion = dot(&w.coeffs, values, a);
                a.add(Stage::Merge, residual, expansion)
            }
            Plan::Chebyshev { degree, base, lut } => {
                let n = *degree;
                let residual = base_path(*base, w.w_b, x, a);
                let values = &mut scratch[..=n];
                match lut {
                    Some(lut) => {
                        for (i, v) in values.iter_mut().enumerate() {
                            *v = a.fetch(Stage::Basis, lut.value(i, x));
                        }
                    }
                    None => {
                        let u = a.fetch(Stage::Basis, x.tanh());
                        values[0] = 1.0;
                        if n >= 1 {
                            values[1] = u;
                            let two_u = a.add(Stage::Basis, u, u);
                            for i in 2..=n {
                                let p = a.mul(Stage::Basis, two_u, values[i - 1]);
                                values[i] = a.sub(Stage::Basis, p, values[i - 2]);
                            }
                        }
                    }
                }
                let expansion = dot(&w.coeffs, values, a);
                a.add(Stage::Merge, residual, expansion)
            }
            Plan::Fourier { grid, omega, base, lut } => {
                let residual = base_path(*base, w.w_b, x, a);
                let values = &mut scratch[..2 * grid];
                match lut {
                    Some(lut) => {
                        for (i, v) in values.iter_mut().enumerate() {
                            *v = a.fetch(Stage::Basis, lut.value(i, x));
                        }
                    }
                    None => {
                        for i in 1..=*grid {
                            let phase = a.mul(Stage::Basis, i as f64 * omega, x);
                            values[2 * i - 2] = a.fetch(Stage::Basis, phase.cos());
                            values[2 * i - 1] = a.fetch(Stage::Basis, phase.sin());
                        }
                    }
                }
                let expansion = dot(&w.coeffs, values, a);
                a.add(Stage::Merge, residual, expansion)
            }
        }
    }
}

/// `w_b · b(x)` with the activation read from a table.
#[inline]
fn base_path<A: Arith>(base: BaseActivation, w_b: f64, x: f64, a: &mut A) -> f64 {
    let s = a.fetch(Stage::Fixed, base.eval(x));
    a.mul(Stage::Fixed, w_b, s)
}

/// A network bound to its weights, with basis tables built once.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    weights: NetworkWeights,
    plans: Vec<Plan>,
    options: EvalOptions,
    scratch_len: usize,
}

impl Network {
    pub fn new(spec: &NetworkSpec, weights: &NetworkWeights, options: EvalOptions) -> Result<Self> {
        weights.check(spec)?;
        let mut weights = weights.clone();
        let mut tables: Vec<(&EdgeFamily, Arc<BasisLut>)> = Vec::new();
        let mut plans = Vec::with_capacity(spec.layers().len());
        for (layer, lw) in spec.layers().iter().zip(&mut weights.layers) {
            let lut = match options.mode {
                BasisMode::Recursive => None,
                BasisMode::LutOptimized => match tables.iter().find(|(f, _)| **f == layer.family) {
                    Some((_, t)) => Some(Arc::clone(t)),
                    None => BasisLut::for_family(&layer.family, options.lut)?.map(|t| {
                        let t = Arc::new(t);
                        tables.push((&layer.family, Arc::clone(&t)));
                        t
                    }),
                },
            };
            if let (EdgeFamily::BSpline(p), BasisMode::Recursive) = (&layer.family, options.mode) {
                let inv = 1.0 / factorial(p.order);
                for e in &mut lw.edges {
                    e.coeffs.iter_mut().for_each(|c| *c *= inv);
                }
            }
            plans.push(Plan::new(&layer.family, lut));
        }
        let scratch_len = spec
            .layers()
            .iter()
            .map(|l| l.family.active_terms())
            .max()
            .unwrap_or(0)
            .max(1);
        Ok(Self {
            spec: spec.clone(),
            weights,
            plans,
            options,
            scratch_len,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn options(&self) -> EvalOptions {
        self.options
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward_with(x, &mut Uncounted))
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_width() {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.spec.input_width()
            )));
        }
        Ok(())
    }

    pub(crate) fn forward_with<A: Arith>(&self, x: &[f64], a: &mut A) -> Vec<f64> {
        let mut scratch = vec![0.0; self.scratch_len];
        let mut cur = x.to_vec();
        for (l, ((plan, lw), layer)) in self
            .plans
            .iter()
            .zip(&self.weights.layers)
            .zip(self.spec.layers())
            .enumerate()
        {
            cur = layer_forward(l, layer, plan, lw, &cur, &mut scratch, a);
        }
        cur
    }
}

fn layer_forward<A: Arith>(
    l: usize,
    layer: &LayerSpec,
    plan: &Plan,
    lw: &LayerWeights,
    x: &[f64],
    scratch: &mut [f64],
    a: &mut A,
) -> Vec<f64> {
    let n_in = layer.n_in;
    (0..layer.n_out)
        .map(|q| {
            let row = &lw.edges[q * n_in..(q + 1) * n_in];
            a.enter_edge(l, q, 0);
            let mut acc = plan.edge(&row[0], x[0], scratch, a);
            for p in 1..n_in {
                a.enter_edge(l, q, p);
                let e = plan.edge(&row[p], x[p], scratch, a);
                a.enter_node(l, q);
                acc = a.add(Stage::Node, acc, e);
            }
            if let Plan::Mlp { activation } = plan {
                a.enter_node(l, q);
                let bias = lw.bias.as_ref().map_or(0.0, |b| b[q]);
                acc = a.add(Stage::Node, acc, bias);
                acc = a.fetch(Stage::Node, activation.eval(acc));
            }
            acc
        })
        .collect()
}

/// One-shot forward pass. Builds tables on every call; hold a [`Network`]
/// to evaluate many inputs.
pub fn network_forward(
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    x: &[f64],
    options: EvalOptions,
) -> Result<Vec<f64>> {
    Network::new(spec, weights, options)?.forward(x)
}

/// Output of a single edge of `family`. MLP connections return `w · x`.
pub fn edge_eval(family: &EdgeFamily, weights: &EdgeWeights, x: f64, options: EvalOptions) -> Result<f64> {
    let spec = NetworkSpec::new("edge", vec![LayerSpec::new(1, 1, family.clone())])?;
    let bias = (!family.is_kan()).then(|| vec![0.0]);
    let nw = NetworkWeights {
        layers: vec![LayerWeights {
            edges: vec![weights.clone()],
            bias,
        }],
    };
    let net = Network::new(&spec, &nw, options)?;
    let plan = &net.plans[0];
    let mut scratch = vec![0.0; net.scratch_len];
    Ok(plan.edge(&net.weights.layers[0].edges[0], x, &mut scratch, &mut Uncounted))
}

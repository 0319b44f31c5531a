//! Network descriptions: layer widths, edge families, quantization settings,
//! and the JSON document they are loaded from.
//!
//! Everything here is validated once on construction and immutable
//! afterwards. The JSON schema is strict: unknown keys are rejected and
//! every invariant violation in a document is reported together.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BITS: u32 = 8;
pub const MAX_BITS: u32 = 64;

/// Fixed activation on the residual path of a KAN edge, or at the nodes of
/// an MLP layer. Hardware realizes it as a table lookup, so it never adds
/// multiplications or additions to any metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseActivation {
    Silu,
    Relu,
    Tanh,
    Identity,
}

impl BaseActivation {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Silu => x / (1.0 + (-x).exp()),
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
            Self::Identity => x,
        }
    }
}

impl FromStr for BaseActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "silu" => Ok(Self::Silu),
            "relu" => Ok(Self::Relu),
            "tanh" => Ok(Self::Tanh),
            "identity" => Ok(Self::Identity),
            other => Err(Error::Parse(format!("unknown activation `{other}`"))),
        }
    }
}

/// Closed input interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: -1.0, hi: 1.0 };

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BSplineParams {
    /// Spline order `k`; `k + 1` basis functions are active at any input.
    pub order: usize,
    /// Number of grid intervals `G` covering the domain.
    pub grid: usize,
    pub domain: Interval,
    pub base: BaseActivation,
}

impl BSplineParams {
    pub fn new(order: usize, grid: usize) -> Self {
        Self {
            order,
            grid,
            domain: Interval::UNIT,
            base: BaseActivation::Silu,
        }
    }

    /// Number of basis functions (and control coefficients) per edge.
    pub fn basis_count(&self) -> usize {
        self.grid + self.order
    }

    pub fn spacing(&self) -> f64 {
        self.domain.width() / self.grid as f64
    }

    pub fn knot_vector(&self) -> Vec<f64> {
        knot_vector(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrbfParams {
    pub centers: Vec<f64>,
    /// Shared Gaussian width `σ`.
    pub width: f64,
    pub base: BaseActivation,
}

impl GrbfParams {
    /// `n_centers` centers spread uniformly over `[-1, 1]`, with `σ` equal to
    /// the center spacing (or 1 for a single center at the origin).
    pub fn uniform(n_centers: usize) -> Self {
        Self {
            centers: uniform_centers(n_centers),
            width: default_grbf_width(n_centers),
            base: BaseActivation::Silu,
        }
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }
}

fn uniform_centers(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect(),
    }
}

fn default_grbf_width(n: usize) -> f64 {
    if n > 1 {
        2.0 / (n - 1) as f64
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevParams {
    /// Maximum polynomial degree `n`; `n + 1` polynomials per edge.
    pub degree: usize,
    pub base: BaseActivation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierParams {
    /// Number of harmonics `G`; `2G` basis functions per edge.
    pub grid: usize,
    /// Fundamental angular frequency `ω`.
    pub omega: f64,
    pub base: BaseActivation,
}

impl FourierParams {
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdgeFamily {
    Mlp { activation: BaseActivation },
    BSpline(BSplineParams),
    Grbf(GrbfParams),
    Chebyshev(ChebyshevParams),
    Fourier(FourierParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Mlp,
    #[serde(rename = "bspline")]
    BSpline,
    Grbf,
    Chebyshev,
    Fourier,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mlp => "mlp",
            Self::BSpline => "bspline",
            Self::Grbf => "grbf",
            Self::Chebyshev => "chebyshev",
            Self::Fourier => "fourier",
        })
    }
}

impl EdgeFamily {
    pub fn mlp() -> Self {
        Self::Mlp {
            activation: BaseActivation::Relu,
        }
    }

    pub fn bspline(order: usize, grid: usize) -> Self {
        Self::BSpline(BSplineParams::new(order, grid))
    }

    pub fn grbf(n_centers: usize) -> Self {
        Self::Grbf(GrbfParams::uniform(n_centers))
    }

    pub fn chebyshev(degree: usize) -> Self {
        Self::Chebyshev(ChebyshevParams {
            degree,
            base: BaseActivation::Silu,
        })
    }

    pub fn fourier(grid: usize) -> Self {
        Self::Fourier(FourierParams {
            grid,
            omega: 1.0,
            base: BaseActivation::Silu,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            Self::Mlp { .. } => FamilyKind::Mlp,
            Self::BSpline(_) => FamilyKind::BSpline,
            Self::Grbf(_) => FamilyKind::Grbf,
            Self::Chebyshev(_) => FamilyKind::Chebyshev,
            Self::Fourier(_) => FamilyKind::Fourier,
        }
    }

    pub fn is_kan(&self) -> bool {
        !matches!(self, Self::Mlp { .. })
    }

    /// Activation applied on the residual path (KAN) or at the nodes (MLP).
    pub fn activation(&self) -> BaseActivation {
        match self {
            Self::Mlp { activation } => *activation,
            Self::BSpline(p) => p.base,
            Self::Grbf(p) => p.base,
            Self::Chebyshev(p) => p.base,
            Self::Fourier(p) => p.base,
        }
    }

    /// Length of the per-edge coefficient vector, excluding the base weight.
    pub fn coeff_len(&self) -> usize {
        match self {
            Self::Mlp { .. } => 0,
            Self::BSpline(p) => p.basis_count(),
            Self::Grbf(p) => p.n_centers(),
            Self::Chebyshev(p) => p.degree + 1,
            Self::Fourier(p) => 2 * p.grid,
        }
    }

    /// Terms in the per-edge basis dot product: `k+1`, `N_c`, `n+1` or `2G`.
    /// Zero for MLP edges, which have no basis expansion.
    pub fn active_terms(&self) -> usize {
        match self {
            Self::Mlp { .. } => 0,
            Self::BSpline(p) => p.order + 1,
            Self::Grbf(p) => p.n_centers(),
            Self::Chebyshev(p) => p.degree + 1,
            Self::Fourier(p) => 2 * p.grid,
        }
    }

    fn check(&self, path: &str, out: &mut Vec<String>) {
        match self {
            Self::Mlp { .. } => {}
            Self::BSpline(p) => {
                if p.order < 1 {
                    out.push(format!("{path}.k: spline order must be >= 1, got {}", p.order));
                }
                if p.grid < 1 {
                    out.push(format!("{path}.g: grid intervals must be >= 1, got {}", p.grid));
                }
                let Interval { lo, hi } = p.domain;
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    out.push(format!("{path}.domain: need finite a < b, got [{lo}, {hi}]"));
                }
            }
            Self::Grbf(p) => {
                if p.centers.is_empty() {
                    out.push(format!("{path}.n_c: at least one center required"));
                }
                if !(p.width.is_finite() && p.width > 0.0) {
                    out.push(format!("{path}.width: must be positive, got {}", p.width));
                }
                if p.centers.iter().any(|c| !c.is_finite()) {
                    out.push(format!("{path}.centers: must be finite"));
                }
                if p.centers.windows(2).any(|w| w[0] >= w[1]) {
                    out.push(format!("{path}.centers: must be strictly increasing"));
                }
            }
            Self::Chebyshev(_) => {}
            Self::Fourier(p) => {
                if p.grid < 1 {
                    out.push(format!("{path}.g: frequency grid must be >= 1, got {}", p.grid));
                }
                if !(p.omega.is_finite() && p.omega > 0.0) {
                    out.push(format!("{path}.omega: must be positive, got {}", p.omega));
                }
            }
        }
    }
}

/// Parses the compact family notation used on the command line:
/// `mlp`, `bspline:k=3,g=5`, `grbf:nc=5,width=0.5`, `chebyshev:n=5`,
/// `fourier:g=5,omega=1`. Omitted parameters take the JSON defaults.
impl FromStr for EdgeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = Vec::new();
        for item in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{item}`")))?;
            kv.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let num = |key: &str, default: usize| -> Result<usize> {
            get(key).map_or(Ok(default), |v| {
                v.parse()
                    .map_err(|_| Error::Parse(format!("`{key}` must be an integer, got `{v}`")))
            })
        };
        let real = |key: &str, default: f64| -> Result<f64> {
            get(key).map_or(Ok(default), |v| {
                v.parse()
                    .map_err(|_| Error::Parse(format!("`{key}` must be a number, got `{v}`")))
            })
        };
        let base = get("base").map_or(Ok(BaseActivation::Silu), str::parse)?;
        let allowed: &[&str] = match name.to_ascii_lowercase().as_str() {
            "mlp" => &["activation"],
            "bspline" => &["k", "g", "lo", "hi", "base"],
            "grbf" => &["nc", "width", "base"],
            "chebyshev" => &["n", "base"],
            "fourier" => &["g", "omega", "base"],
            other => return Err(Error::Parse(format!("unknown edge family `{other}`"))),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Parse(format!("unknown parameter `{k}` for {name}")));
        }

        let family = match name.to_ascii_lowercase().as_str() {
            "mlp" => Self::Mlp {
                activation: get("activation").map_or(Ok(BaseActivation::Relu), str::parse)?,
            },
            "bspline" => Self::BSpline(BSplineParams {
                order: num("k", 3)?,
                grid: num("g", 5)?,
                domain: Interval {
                    lo: real("lo", -1.0)?,
                    hi: real("hi", 1.0)?,
                },
                base,
            }),
            "grbf" => {
                let n = num("nc", 5)?;
                Self::Grbf(GrbfParams {
                    centers: uniform_centers(n),
                    width: real("width", default_grbf_width(n))?,
                    base,
                })
            }
            "chebyshev" => Self::Chebyshev(ChebyshevParams {
                degree: num("n", 5)?,
                base,
            }),
            "fourier" => Self::Fourier(FourierParams {
                grid: num("g", 5)?,
                omega: real("omega", 1.0)?,
                base,
            }),
            _ => unreachable!(),
        };
        let mut violations = Vec::new();
        family.check(name, &mut violations);
        if violations.is_empty() {
            Ok(family)
        } else {
            Err(Error::Validation(violations))
        }
    }
}

impl fmt::Display for EdgeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mlp { .. } => write!(f, "mlp"),
            Self::BSpline(p) => write!(f, "bspline(k={}, G={})", p.order, p.grid),
            Self::Grbf(p) => write!(f, "grbf(N_c={})", p.n_centers()),
            Self::Chebyshev(p) => write!(f, "chebyshev(n={})", p.degree),
            Self::Fourier(p) => write!(f, "fourier(G={})", p.grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub n_in: usize,
    pub n_out: usize,
    pub family: EdgeFamily,
}

impl LayerSpec {
    pub fn new(n_in: usize, n_out: usize, family: EdgeFamily) -> Self {
        Self { n_in, n_out, family }
    }

    pub fn edge_count(&self) -> usize {
        self.n_in * self.n_out
    }
}

/// A validated, immutable feed-forward architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    name: String,
    layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            layers,
        };
        let violations = spec.violations();
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(Error::Validation(violations))
        }
    }

    /// Builds `[w0, w1, ..., wL]` with the same edge family on every layer.
    pub fn uniform(name: impl Into<String>, widths: &[usize], family: &EdgeFamily) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Validation(vec![format!(
                "architecture needs at least two widths, got {widths:?}"
            )]));
        }
        let layers = widths
            .windows(2)
            .map(|w| LayerSpec::new(w[0], w[1], family.clone()))
            .collect();
        Self::new(name, layers)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    /// `[n_in(0), n_out(0), n_out(1), ...]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.layers.iter().map(|l| l.n_out))
            .collect()
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.layers.is_empty() {
            out.push("layers: at least one layer required".to_string());
        }
        for (j, layer) in self.layers.iter().enumerate() {
            if layer.n_in < 1 {
                out.push(format!("layers[{j}].n_in: must be >= 1"));
            }
            if layer.n_out < 1 {
                out.push(format!("layers[{j}].n_out: must be >= 1"));
            }
            layer.family.check(&format!("layers[{j}].family"), &mut out);
        }
        for (j, pair) in self.layers.windows(2).enumerate() {
            if pair[0].n_out != pair[1].n_in {
                out.push(format!(
                    "layers[{j}].n_out ({}) != layers[{}].n_in ({})",
                    pair[0].n_out,
                    j + 1,
                    pair[1].n_in
                ));
            }
        }
        out
    }
}

/// Uniform grid over `[a, b]` with `G` intervals, extended by `k` knots on
/// each side at the same spacing. Yields `G + 2k + 1` knots.
pub fn knot_vector(params: &BSplineParams) -> Vec<f64> {
    let k = params.order as f64;
    let g = params.grid as f64;
    let Interval { lo, hi } = params.domain;
    (0..params.grid + 2 * params.order + 1)
        .map(|m| lo + (hi - lo) * (m as f64 - k) / g)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuantScheme {
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "pot")]
    PowerOfTwo,
    #[serde(rename = "apot")]
    AdditivePowerOfTwo(u32),
}

impl FromStr for QuantScheme {
    type Err = Error;

    /// `uniform`, `pot`, or `apot:<terms>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "pot" => Ok(Self::PowerOfTwo),
            other => other
                .strip_prefix("apot:")
                .and_then(|n| n.parse().ok())
                .filter(|&n| n >= 1)
                .map(Self::AdditivePowerOfTwo)
                .ok_or_else(|| Error::Parse(format!("unknown quantization scheme `{s}`"))),
        }
    }
}

/// Adders needed to realize one multiplication by a `bits`-wide operand
/// with shifts and additions.
pub fn adders_per_multiplication(scheme: QuantScheme, bits: u32) -> u64 {
    match scheme {
        QuantScheme::Uniform => u64::from(bits.saturating_sub(1)),
        QuantScheme::PowerOfTwo => 0,
        QuantScheme::AdditivePowerOfTwo(terms) => u64::from(terms),
    }
}

/// Operand bitwidths and the quantization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantConfig {
    /// Input activations.
    pub b_i: u32,
    /// Weights and coefficients.
    pub b_w: u32,
    /// Grid reciprocal used to normalize B-spline inputs.
    pub b_knot: u32,
    pub b_basis: u32,
    pub b_rbf: u32,
    pub b_cheby: u32,
    pub b_fourier: u32,
    pub scheme: QuantScheme,
}

impl Default for QuantConfig {
    fn default() -> Self {
        Self::uniform_bits(DEFAULT_BITS)
    }
}

impl QuantConfig {
    pub fn uniform_bits(bits: u32) -> Self {
        Self {
            b_i: bits,
            b_w: bits,
            b_knot: bits,
            b_basis: bits,
            b_rbf: bits,
            b_cheby: bits,
            b_fourier: bits,
            scheme: QuantScheme::Uniform,
        }
    }

    pub fn with_scheme(self, scheme: QuantScheme) -> Self {
        Self { scheme, ..self }
    }

    /// `X_w`.
    pub fn weight_adders(&self) -> u64 {
        adders_per_multiplication(self.scheme, self.b_w)
    }

    /// `X_knot`.
    pub fn knot_adders(&self) -> u64 {
        adders_per_multiplication(self.scheme, self.b_knot)
    }

    /// Bitwidth of the basis values feeding the dot product of `family`.
    pub fn basis_bits(&self, family: FamilyKind) -> u32 {
        match family {
            FamilyKind::Mlp => self.b_i,
            FamilyKind::BSpline => self.b_basis,
            FamilyKind::Grbf => self.b_rbf,
            FamilyKind::Chebyshev => self.b_cheby,
            FamilyKind::Fourier => self.b_fourier,
        }
    }

    fn check(&self, out: &mut Vec<String>) {
        let fields = [
            ("b_i", self.b_i),
            ("b_w", self.b_w),
            ("b_knot", self.b_knot),
            ("b_basis", self.b_basis),
            ("b_rbf", self.b_rbf),
            ("b_cheby", self.b_cheby),
            ("b_fourier", self.b_fourier),
        ];
        for (name, bits) in fields {
            if !(1..=MAX_BITS).contains(&bits) {
                out.push(format!("quant.{name}: bitwidth must be in [1, {MAX_BITS}], got {bits}"));
            }
        }
        if self.scheme == QuantScheme::AdditivePowerOfTwo(0) {
            out.push("quant.scheme: apot needs at least one additive term".to_string());
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut out = Vec::new();
        self.check(&mut out);
        if out.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(out))
        }
    }
}

/// How basis values are produced in hardware.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisMode {
    /// Basis values read from precomputed tables.
    #[default]
    #[serde(rename = "lut")]
    LutOptimized,
    /// Basis values computed arithmetically: the Cox-de Boor triangle for
    /// B-splines, distance/square/scale for GRBF.
    Recursive,
}

impl fmt::Display for BasisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LutOptimized => "lut",
            Self::Recursive => "recursive",
        })
    }
}

impl FromStr for BasisMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lut" | "lut-optimized" => Ok(Self::LutOptimized),
            "recursive" | "compute" => Ok(Self::Recursive),
            other => Err(Error::Parse(format!("unknown basis mode `{other}`"))),
        }
    }
}

// JSON document shape.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    #[serde(default)]
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quant: Option<QuantDoc>,
    layers: Vec<LayerDoc>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuantDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    b_i: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_w: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_knot: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_basis: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_rbf: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_cheby: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_fourier: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<QuantScheme>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    n_in: usize,
    n_out: usize,
    family: FamilyDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum FamilyDoc {
    Mlp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        activation: Option<BaseActivation>,
    },
    Bspline {
        k: usize,
        g: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<BaseActivation>,
    },
    Grbf {
        n_c: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        centers: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<BaseActivation>,
    },
    Chebyshev {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<BaseActivation>,
    },
    Fourier {
        g: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<BaseActivation>,
    },
}

impl FamilyDoc {
    fn into_family(self, path: &str, out: &mut Vec<String>) -> EdgeFamily {
        let base = |b: Option<BaseActivation>| b.unwrap_or(BaseActivation::Silu);
        match self {
            Self::Mlp { activation } => EdgeFamily::Mlp {
                activation: activation.unwrap_or(BaseActivation::Relu),
            },
            Self::Bspline { k, g, domain, base: b } => {
                let [lo, hi] = domain.unwrap_or([-1.0, 1.0]);
                EdgeFamily::BSpline(BSplineParams {
                    order: k,
                    grid: g,
                    domain: Interval { lo, hi },
                    base: base(b),
                })
            }
            Self::Grbf {
                n_c,
                width,
                centers,
                base: b,
            } => {
                let centers = match centers {
                    Some(c) => {
                        if c.len() != n_c {
                            out.push(format!("{path}.centers: expected {n_c} centers, got {}", c.len()));
                        }
                        c
                    }
                    None => uniform_centers(n_c),
                };
                EdgeFamily::Grbf(GrbfParams {
                    centers,
                    width: width.unwrap_or_else(|| default_grbf_width(n_c)),
                    base: base(b),
                })
            }
            Self::Chebyshev { n, base: b } => EdgeFamily::Chebyshev(ChebyshevParams {
                degree: n,
                base: base(b),
            }),
            Self::Fourier { g, omega, base: b } => EdgeFamily::Fourier(FourierParams {
                grid: g,
                omega: omega.unwrap_or(1.0),
                base: base(b),
            }),
        }
    }

    fn from_family(family: &EdgeFamily) -> Self {
        match family {
            EdgeFamily::Mlp { activation } => Self::Mlp {
                activation: Some(*activation),
            },
            EdgeFamily::BSpline(p) => Self::Bspline {
                k: p.order,
                g: p.grid,
                domain: Some([p.domain.lo, p.domain.hi]),
                base: Some(p.base),
            },
            EdgeFamily::Grbf(p) => Self::Grbf {
                n_c: p.n_centers(),
                width: Some(p.width),
                centers: Some(p.centers.clone()),
                base: Some(p.base),
            },
            EdgeFamily::Chebyshev(p) => Self::Chebyshev {
                n: p.degree,
                base: Some(p.base),
            },
            EdgeFamily::Fourier(p) => Self::Fourier {
                g: p.grid,
                omega: Some(p.omega),
                base: Some(p.base),
            },
        }
    }
}

impl QuantDoc {
    /// Unset per-family basis widths follow `b_basis`; everything else
    /// defaults to 8 bits, uniform.
    fn resolve(self) -> QuantConfig {
        let bits = |b: Option<u32>| b.unwrap_or(DEFAULT_BITS);
        let b_basis = bits(self.b_basis);
        QuantConfig {
            b_i: bits(self.b_i),
            b_w: bits(self.b_w),
            b_knot: bits(self.b_knot),
            b_basis,
            b_rbf: self.b_rbf.unwrap_or(b_basis),
            b_cheby: self.b_cheby.unwrap_or(b_basis),
            b_fourier: self.b_fourier.unwrap_or(b_basis),
            scheme: self.scheme.unwrap_or(QuantScheme::Uniform),
        }
    }

    fn from_config(q: &QuantConfig) -> Self {
        Self {
            b_i: Some(q.b_i),
            b_w: Some(q.b_w),
            b_knot: Some(q.b_knot),
            b_basis: Some(q.b_basis),
            b_rbf: Some(q.b_rbf),
            b_cheby: Some(q.b_cheby),
            b_fourier: Some(q.b_fourier),
            scheme: Some(q.scheme),
        }
    }
}

/// Parses and validates a JSON network description.
pub fn parse_spec(text: &str) -> Result<(NetworkSpec, QuantConfig)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: SpecDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;

    let mut violations = Vec::new();
    let quant = doc.quant.unwrap_or_default().resolve();
    quant.check(&mut violations);

    let layers: Vec<LayerSpec> = doc
        .layers
        .into_iter()
        .enumerate()
        .map(|(j, l)| LayerSpec {
            n_in: l.n_in,
            n_out: l.n_out,
            family: l.family.into_family(&format!("layers[{j}].family"), &mut violations),
        })
        .collect();
    let spec = NetworkSpec { name: doc.name, layers };
    violations.extend(spec.violations());

    if violations.is_empty() {
        Ok((spec, quant))
    } else {
        Err(Error::Validation(violations))
    }
}

/// Serializes a spec and its quantization settings with every default made
/// explicit. `parse_spec` inverts this exactly.
pub fn to_json(spec: &NetworkSpec, quant: &QuantConfig) -> String {
    let doc = SpecDoc {
        name: spec.name.clone(),
        quant: Some(QuantDoc::from_config(quant)),
        layers: spec
            .layers
            .iter()
            .map(|l| LayerDoc {
                n_in: l.n_in,
                n_out: l.n_out,
                family: FamilyDoc::from_family(&l.family),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("spec documents always serialize")
}

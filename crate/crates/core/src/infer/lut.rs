//! Precomputed basis tables.
//!
//! On a uniform grid every B-spline basis function is a translate of one
//! cardinal spline, so a single table per order serves a whole layer. GRBF,
//! Chebyshev and Fourier bases get one table per term.

use crate::error::{Error, Result};
use crate::netspec::{ChebyshevParams, EdgeFamily, FamilyKind, FourierParams, GrbfParams};

use super::bspline::cardinal_bspline;

/// Smallest accepted table resolution.
pub const MIN_RESOLUTION: usize = 16;
/// Worst allowed midpoint interpolation error of a freshly built table.
pub const INTERPOLATION_BOUND: f64 = 1.0 / 128.0;

/// GRBF tables extend this many widths beyond the outer centers.
const GRBF_REACH: f64 = 8.0;
/// Chebyshev tables cover `tanh` inputs in `[-CHEBY_REACH, CHEBY_REACH]`.
const CHEBY_REACH: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interp {
    #[default]
    Linear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LutConfig {
    /// Samples per unit of the family's natural scale: per knot interval
    /// (B-spline), per width (GRBF), per input unit scaled by degree
    /// (Chebyshev), per sixteenth of the shortest harmonic period (Fourier).
    pub resolution: usize,
    pub interp: Interp,
}

impl Default for LutConfig {
    fn default() -> Self {
        Self {
            resolution: 1024,
            interp: Interp::Linear,
        }
    }
}

/// Uniformly sampled function. Lookups outside the sampled range return
/// the nearest end sample.
#[derive(Debug, Clone)]
pub struct Table {
    lo: f64,
    step: f64,
    inv_step: f64,
    samples: Vec<f64>,
}

impl Table {
    fn tabulate(lo: f64, step: f64, steps: usize, f: impl Fn(f64) -> f64) -> Self {
        let samples = (0..=steps).map(|m| f(lo + m as f64 * step)).collect();
        Self {
            lo,
            step,
            inv_step: 1.0 / step,
            samples,
        }
    }

    #[inline]
    pub fn lookup(&self, x: f64, interp: Interp) -> f64 {
        let last = self.samples.len() - 1;
        let pos = ((x - self.lo) * self.inv_step).clamp(0.0, last as f64);
        match interp {
            Interp::Nearest => self.samples[(pos.round() as usize).min(last)],
            Interp::Linear => {
                let i = (pos.floor() as usize).min(last - 1);
                let frac = pos - i as f64;
                let (a, b) = (self.samples[i], self.samples[i + 1]);
                a + (b - a) * frac
            }
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Largest deviation from `f` halfway between adjacent samples.
    fn midpoint_error(&self, interp: Interp, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.samples.len() - 1)
            .map(|m| {
                let x = self.lo + (m as f64 + 0.5) * self.step;
                (self.lookup(x, interp) - f(x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct BasisLut {
    family: FamilyKind,
    interp: Interp,
    tables: Vec<Table>,
    /// Inputs are reduced modulo this before lookup (Fourier).
    period: Option<f64>,
}

impl BasisLut {
    /// Tables for `family`, or `None` for MLP layers.
    pub fn for_family(family: &EdgeFamily, cfg: LutConfig) -> Result<Option<Self>> {
        Ok(Some(match family {
            EdgeFamily::Mlp { .. } => return Ok(None),
            EdgeFamily::BSpline(p) => Self::bspline(p.order, cfg)?,
            EdgeFamily::Grbf(p) => Self::grbf(p, cfg)?,
            EdgeFamily::Chebyshev(p) => Self::chebyshev(p, cfg)?,
            EdgeFamily::Fourier(p) => Self::fourier(p, cfg)?,
        }))
    }

    /// Cardinal B-spline of order `k` over its support `[0, k+1]`.
    pub fn bspline(k: usize, cfg: LutConfig) -> Result<Self> {
        let res = check_resolution(cfg)?;
        let f = |s| cardinal_bspline(k, s);
        let table = Table::tabulate(0.0, 1.0 / res as f64, (k + 1) * res, f);
        Self::build(FamilyKind::BSpline, cfg.interp, vec![(table, &f)], None)
    }

    pub fn grbf(params: &GrbfParams, cfg: LutConfig) -> Result<Self> {
        let res = check_resolution(cfg)?;
        let sigma = params.width;
        let (first, last) = (params.centers[0], params.centers[params.centers.len() - 1]);
        let lo = first - GRBF_REACH * sigma;
        let step = sigma / res as f64;
        let steps = ((last - first) / step).ceil() as usize + 2 * GRBF_REACH as usize * res;
        let funcs: Vec<_> = params
            .centers
            .iter()
            .map(|&c| move |x: f64| gaussian(x, c, sigma))
            .collect();
        let tables = funcs.iter().map(|f| (Table::tabulate(lo, step, steps, f), f)).collect();
        Self::build(FamilyKind::Grbf, cfg.interp, tables, None)
    }

    /// `T_i(tanh x)` for `i = 0..=n`.
    pub fn chebyshev(params: &ChebyshevParams, cfg: LutConfig) -> Result<Self> {
        let res = check_resolution(cfg)?;
        // |d²/dx² T_n(tanh x)| <= n(n+1); refine the step accordingly.
        let refine = params.degree.max(1);
        let per_unit = res * refine;
        let step = 1.0 / per_unit as f64;
        let steps = 2 * CHEBY_REACH as usize * per_unit;
        let funcs: Vec<_> = (0..=params.degree)
            .map(|i| move |x: f64| chebyshev_t(i, x.tanh()))
            .collect();
        let tables = funcs
            .iter()
            .map(|f| (Table::tabulate(-CHEBY_REACH, step, steps, f), f))
            .collect();
        Self::build(FamilyKind::Chebyshev, cfg.interp, tables, None)
    }

    /// `cos(iωx), sin(iωx)` for `i = 1..=G`, interleaved, over one period.
    pub fn fourier(params: &FourierParams, cfg: LutConfig) -> Result<Self> {
        let res = check_resolution(cfg)?;
        let period = params.period();
        let steps = 16 * res * params.grid;
        let step = period / steps as f64;
        let funcs: Vec<Box<dyn Fn(f64) -> f64>> = (1..=params.grid)
            .flat_map(|i| {
                let w = i as f64 * params.omega;
                [
                    Box::new(move |x: f64| (w * x).cos()) as Box<dyn Fn(f64) -> f64>,
                    Box::new(move |x: f64| (w * x).sin()),
                ]
            })
            .collect();
        let tables = funcs
            .iter()
            .map(|f| (Table::tabulate(0.0, step, steps, f), f))
            .collect();
        Self::build(FamilyKind::Fourier, cfg.interp, tables, Some(period))
    }

    fn build<F: Fn(f64) -> f64>(
        family: FamilyKind,
        interp: Interp,
        tables: Vec<(Table, F)>,
        period: Option<f64>,
    ) -> Result<Self> {
        let max_error = tables
            .iter()
            .map(|(t, f)| t.midpoint_error(interp, f))
            .fold(0.0, f64::max);
        if max_error > INTERPOLATION_BOUND {
            return Err(Error::LutAccuracy {
                family,
                max_error,
                bound: INTERPOLATION_BOUND,
            });
        }
        Ok(Self {
            family,
            interp,
            tables: tables.into_iter().map(|(t, _)| t).collect(),
            period,
        })
    }

    pub fn family(&self) -> FamilyKind {
        self.family
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    /// Number of tables (basis terms).
    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn table(&self, index: usize) -> &Table {
        &self.tables[index]
    }

    /// Cardinal spline value at `s ∈ [0, k+1]` (B-spline tables only).
    #[inline]
    pub fn cardinal(&self, s: f64) -> f64 {
        self.tables[0].lookup(s, self.interp)
    }

    /// Basis term `index` at raw input `x`.
    #[inline]
    pub fn value(&self, index: usize, x: f64) -> f64 {
        let x = match self.period {
            Some(p) => x.rem_euclid(p),
            None => x,
        };
        self.tables[index].lookup(x, self.interp)
    }
}

fn check_resolution(cfg: LutConfig) -> Result<usize> {
    if cfg.resolution < MIN_RESOLUTION {
        return Err(Error::Argument(format!(
            "lookup table resolution must be >= {MIN_RESOLUTION}, got {}",
            cfg.resolution
        )));
    }
    Ok(cfg.resolution)
}

#[inline]
pub(crate) fn gaussian(x: f64, center: f64, sigma: f64) -> f64 {
    let d = (x - center) / sigma;
    (-0.5 * d * d).exp()
}

/// `T_n(u)` by the three-term recurrence.
pub fn chebyshev_t(n: usize, u: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, u);
    if n == 0 {
        return prev;
    }
    for _ in 1..n {
        (prev, cur) = (cur, 2.0 * u * cur - prev);
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netspec::BaseActivation;

    fn cfg(resolution: usize, interp: Interp) -> LutConfig {
        LutConfig { resolution, interp }
    }

    #[test]
    fn cardinal_exact_at_samples() {
        let lut = BasisLut::bspline(3, LutConfig::default()).unwrap();
        assert_eq!(lut.cardinal(2.0), cardinal_bspline(3, 2.0));
        assert_eq!(lut.cardinal(1.0), 1.0 / 6.0);
        assert_eq!(lut.cardinal(-3.0), 0.0);
        assert_eq!(lut.cardinal(9.0), 0.0);
    }

    #[test]
    fn minimum_resolution_meets_bound() {
        for k in 1..=5 {
            assert!(BasisLut::bspline(k, cfg(16, Interp::Linear)).is_ok(), "k={k}");
            assert!(BasisLut::bspline(k, cfg(1024, Interp::Nearest)).is_ok(), "k={k}");
        }
        // Nearest-sample error is about half a step times the slope.
        assert!(BasisLut::bspline(1, cfg(16, Interp::Nearest)).is_err());
        assert!(BasisLut::grbf(&GrbfParams::uniform(5), cfg(16, Interp::Linear)).is_ok());
        let cheb = ChebyshevParams {
            degree: 10,
            base: BaseActivation::Silu,
        };
        assert!(BasisLut::chebyshev(&cheb, cfg(16, Interp::Linear)).is_ok());
        let four = FourierParams {
            grid: 5,
            omega: 1.0,
            base: BaseActivation::Silu,
        };
        assert!(BasisLut::fourier(&four, cfg(16, Interp::Linear)).is_ok());
    }

    #[test]
    fn too_coarse_rejected() {
        assert!(BasisLut::bspline(3, cfg(8, Interp::Linear)).is_err());
    }

    #[test]
    fn fourier_wraps() {
        let four = FourierParams {
            grid: 2,
            omega: 1.0,
            base: BaseActivation::Silu,
        };
        let lut = BasisLut::fourier(&four, LutConfig::default()).unwrap();
        assert_eq!(lut.len(), 4);
        let x = 0.3;
        let p = four.period();
        assert!((lut.value(3, x) - lut.value(3, x + 3.0 * p)).abs() < 1e-9);
        assert!((lut.value(2, x) - (2.0 * x).cos()).abs() < 1e-6);
    }

    #[test]
    fn chebyshev_recurrence_small_orders() {
        assert_eq!(chebyshev_t(0, 0.3), 1.0);
        assert_eq!(chebyshev_t(1, 0.3), 0.3);
        assert!((chebyshev_t(2, 0.3) - (2.0 * 0.09 - 1.0)).abs() < 1e-15);
    }
}

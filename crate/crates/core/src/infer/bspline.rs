//! B-spline basis evaluation on uniform grids.

use crate::dataflow::{Arith, Stage, Uncounted};
use crate::error::{Error, Result};
use crate::netspec::BSplineParams;

use super::lut::BasisLut;

/// `B_{i,k}(x)` by the Cox-de Boor recursion over an arbitrary
/// non-decreasing knot vector. Zero-width spans contribute 0.
///
/// `B_{i,k}` is supported on `[t_i, t_{i+k+1}]`, so valid indices are
/// `0..knots.len() - k - 1`.
pub fn bspline_basis_recursive(knots: &[f64], i: usize, k: usize, x: f64) -> Result<f64> {
    let count = knots.len().saturating_sub(k + 1);
    if i >= count {
        return Err(Error::BasisIndex { index: i, count });
    }
    Ok(cox_de_boor(knots, i, k, x))
}

fn cox_de_boor(t: &[f64], i: usize, k: usize, x: f64) -> f64 {
    if k == 0 {
        return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
    }
    let left_span = t[i + k] - t[i];
    let right_span = t[i + k + 1] - t[i + 1];
    let left = if left_span == 0.0 {
        0.0
    } else {
        (x - t[i]) / left_span * cox_de_boor(t, i, k - 1, x)
    };
    let right = if right_span == 0.0 {
        0.0
    } else {
        (t[i + k + 1] - x) / right_span * cox_de_boor(t, i + 1, k - 1, x)
    };
    left + right
}

/// The cardinal B-spline of order `k`, supported on `[0, k+1]` with unit
/// knot spacing. Every interior basis function on a uniform grid is a
/// shifted, scaled copy of it.
pub fn cardinal_bspline(k: usize, s: f64) -> f64 {
    let knots: Vec<f64> = (0..=k + 1).map(|m| m as f64).collect();
    cox_de_boor(&knots, 0, k, s)
}

/// Maps inputs onto a uniform grid with one subtraction and one multiply by
/// the precomputed grid reciprocal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    lo: f64,
    inv_spacing: f64,
    intervals: usize,
}

impl Grid {
    pub fn new(params: &BSplineParams) -> Self {
        Self {
            lo: params.domain.lo,
            inv_spacing: params.grid as f64 / params.domain.width(),
            intervals: params.grid,
        }
    }

    /// Active interval index in `[0, G-1]` and the position within it in
    /// `[0, 1]`. Inputs below the domain clamp to interval 0, inputs at or
    /// above it to `G-1`.
    #[inline]
    pub(crate) fn locate<A: Arith>(&self, x: f64, a: &mut A) -> (usize, f64) {
        let shifted = a.sub(Stage::Fixed, x, self.lo);
        let u = a.mul(Stage::Fixed, shifted, self.inv_spacing);
        a.compare(Stage::Fixed);
        a.compare(Stage::Fixed);
        let u = u.clamp(0.0, self.intervals as f64);
        a.compare(Stage::Fixed);
        let j = (u.floor() as usize).min(self.intervals - 1);
        // Integer and fractional parts are bit slices of the fixed-point
        // coordinate; no arithmetic is charged for them.
        (j, u - j as f64)
    }
}

/// Index `j` of the knot interval containing `x` on the uniform grid
/// described by `knots` (`G + 2k + 1` entries).
pub fn find_interval(knots: &[f64], k: usize, g: usize, x: f64) -> usize {
    let lo = knots[k];
    let hi = knots[k + g];
    let grid = Grid {
        lo,
        inv_spacing: g as f64 / (hi - lo),
        intervals: g,
    };
    grid.locate(x, &mut Uncounted).0
}

/// Unnormalized Cox-de Boor triangle on a uniform grid, in local
/// coordinates `t ∈ [0, 1]` of the active interval.
///
/// Fills `out[0..=k]` with `k! · B_{j+r,k}(x)`. Depth 1 needs no
/// multiplication (`1 - t`, `t`); each deeper level `p` costs `2p`: one
/// multiply for each boundary node and two for each of the `p - 1` interior
/// nodes.
pub(crate) fn scaled_triangle<A: Arith>(k: usize, t: f64, out: &mut [f64], a: &mut A) {
    out[0] = 1.0;
    if k == 0 {
        return;
    }
    out[0] = a.sub(Stage::Basis, 1.0, t);
    out[1] = t;
    for p in 2..=k {
        // Right to left so each node still sees its depth p-1 parents.
        out[p] = a.mul(Stage::Basis, t, out[p - 1]);
        for r in (1..p).rev() {
            let rise = a.add(Stage::Basis, t, (p - r) as f64);
            let fall = a.sub(Stage::Basis, (r + 1) as f64, t);
            let lhs = a.mul(Stage::Basis, rise, out[r - 1]);
            let rhs = a.mul(Stage::Basis, fall, out[r]);
            out[r] = a.add(Stage::Basis, lhs, rhs);
        }
        let fall = a.sub(Stage::Basis, 1.0, t);
        out[0] = a.mul(Stage::Basis, fall, out[0]);
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// The `k + 1` non-zero basis values at an input; `values[r]` multiplies
/// coefficient `interval_index + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveBasis {
    pub interval_index: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum ActiveMode<'a> {
    Recursive,
    Lut(&'a BasisLut),
}

pub fn active_basis(params: &BSplineParams, x: f64, mode: ActiveMode<'_>) -> ActiveBasis {
    let k = params.order;
    let (j, t) = Grid::new(params).locate(x, &mut Uncounted);
    let mut values = vec![0.0; k + 1];
    match mode {
        ActiveMode::Recursive => {
            scaled_triangle(k, t, &mut values, &mut Uncounted);
            let scale = factorial(k);
            values.iter_mut().for_each(|v| *v /= scale);
        }
        ActiveMode::Lut(lut) => {
            for (r, v) in values.iter_mut().enumerate() {
                *v = lut.cardinal((k - r) as f64 + t);
            }
        }
    }
    ActiveBasis {
        interval_index: j,
        values,
    }
}

//! The hardware dataflow shared by plain inference and the instrumented
//! interpreter.
//!
//! Every arithmetic step that the cost model charges goes through an
//! [`Arith`] implementation. Plain inference uses [`Uncounted`], which
//! compiles down to bare float operations; the counted interpreter plugs in
//! a tallying implementation. Both therefore execute the same operations in
//! the same order and produce bit-identical outputs.

use serde::{Deserialize, Serialize};

/// Where in the edge/node dataflow an operation happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Input normalization, interval search and the residual base path.
    Fixed,
    /// Producing basis values (table reads or the Cox-de Boor triangle).
    Basis,
    /// Dot product of coefficients with basis values.
    Combine,
    /// Adding the base path to the basis expansion.
    Merge,
    /// Summation at output nodes (and MLP bias/activation).
    Node,
}

pub trait Arith {
    #[inline]
    fn mul(&mut self, _stage: Stage, a: f64, b: f64) -> f64 {
        a * b
    }

    #[inline]
    fn add(&mut self, _stage: Stage, a: f64, b: f64) -> f64 {
        a + b
    }

    #[inline]
    fn sub(&mut self, _stage: Stage, a: f64, b: f64) -> f64 {
        a - b
    }

    /// A table read returning `value`.
    #[inline]
    fn fetch(&mut self, _stage: Stage, value: f64) -> f64 {
        value
    }

    #[inline]
    fn compare(&mut self, _stage: Stage) {}

    /// Subsequent operations belong to edge `(out, inp)` of `layer`.
    #[inline]
    fn enter_edge(&mut self, _layer: usize, _out: usize, _inp: usize) {}

    /// Subsequent operations belong to output node `out` of `layer`.
    #[inline]
    fn enter_node(&mut self, _layer: usize, _out: usize) {}
}

/// Plain evaluation.
#[derive(Debug, Default, Clone, Copy)]
pub struct Uncounted;

impl Arith for Uncounted {}

/// `Σ coeffs[i] * values[i]`, left to right.
pub(crate) fn dot<A: Arith>(coeffs: &[f64], values: &[f64], a: &mut A) -> f64 {
    debug_assert_eq!(coeffs.len(), values.len());
    let mut acc = a.mul(Stage::Combine, coeffs[0], values[0]);
    for (&c, &v) in coeffs.iter().zip(values).skip(1) {
        let p = a.mul(Stage::Combine, c, v);
        acc = a.add(Stage::Combine, acc, p);
    }
    acc
}

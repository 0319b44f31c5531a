//! Cost formulas written out directly from the metric definitions, sharing
//! no code with the library. Used to check the library's totals.
#![allow(dead_code)]

#[derive(Debug, Clone, Copy)]
pub enum Fam {
    Mlp,
    BSpline { k: u64 },
    Grbf { nc: u64 },
    Chebyshev { n: u64 },
    Fourier { g: u64 },
}

impl Fam {
    fn terms(self) -> u64 {
        match self {
            Fam::Mlp => 0,
            Fam::BSpline { k } => k + 1,
            Fam::Grbf { nc } => nc,
            Fam::Chebyshev { n } => n + 1,
            Fam::Fourier { g } => 2 * g,
        }
    }
}

fn clog2(n: u64) -> u64 {
    let mut bits = 0;
    while (1u64 << bits) < n {
        bits += 1;
    }
    bits
}

/// All operand widths equal to `b`, uniform quantization.
fn acc(n: u64, b: u64) -> u64 {
    2 * b + clog2(n)
}

pub fn rm_edge(f: Fam) -> u64 {
    match f {
        Fam::Mlp => 1,
        Fam::BSpline { k } => k + 3,
        Fam::Grbf { nc } => nc + 1,
        Fam::Chebyshev { n } => n + 2,
        Fam::Fourier { g } => 2 * g + 1,
    }
}

fn bop_edge(f: Fam, b: u64, n_in: u64) -> u64 {
    let t = f.terms();
    match f {
        Fam::Mlp => b * b + acc(n_in, b),
        Fam::BSpline { k } => b * (1 + b + b) + (k + 1) * b * b + k * acc(k + 1, b),
        _ => b * b + t * b * b + (t - 1) * acc(t, b),
    }
}

fn nabs_edge(f: Fam, b: u64, n_in: u64) -> u64 {
    let x = b - 1;
    let t = f.terms();
    match f {
        Fam::Mlp => (x + 1) * acc(n_in, b),
        Fam::BSpline { k } => b + x * 2 * b + x * 2 * b + ((k + 1) * x + k) * acc(k + 1, b),
        _ => x * 2 * b + (t * x + t - 1) * acc(t, b),
    }
}

fn node_term(f: Fam, b: u64, n_in: u64) -> u64 {
    match f {
        Fam::Mlp => 0,
        _ => (n_in - 1) * (acc(f.terms(), b) + clog2(n_in)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Totals {
    pub rm: u64,
    pub bop: u64,
    pub nabs: u64,
}

/// Totals for a uniform network of `f` with widths `w` and `b`-bit operands.
pub fn totals(f: Fam, w: &[u64], b: u64) -> Totals {
    let mut t = Totals { rm: 0, bop: 0, nabs: 0 };
    for pair in w.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let edges = n_in * n_out;
        let node = n_out * node_term(f, b, n_in);
        t.rm += edges * rm_edge(f);
        t.bop += edges * bop_edge(f, b, n_in) + node;
        t.nabs += edges * nabs_edge(f, b, n_in) + node;
    }
    t
}

/// Largest `x` in `1..limit` with `cost(x) <= budget`, by linear scan.
pub fn scan_max_width(budget: u64, limit: u64, cost: impl Fn(u64) -> u64) -> Option<u64> {
    (1..limit).take_while(|&x| cost(x) <= budget).last()
}

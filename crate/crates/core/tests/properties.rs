mod common;

use common::Fam;
use kan_hwcost::analytic::{self, Metric};
use kan_hwcost::counted::counted_forward;
use kan_hwcost::infer::{
    active_basis, bspline_basis_recursive, chebyshev_t, edge_eval, ActiveMode, BasisLut, EdgeWeights, EvalOptions,
    LutConfig, Network, NetworkWeights,
};
use kan_hwcost::iso::{solve_budget, IsoOutcome};
use kan_hwcost::netspec::{knot_vector, to_json, BSplineParams, BaseActivation, GrbfParams, Interval, QuantScheme};
use kan_hwcost::{parse_spec, BasisMode, EdgeFamily, LayerSpec, NetworkSpec, QuantConfig};
use proptest::prelude::*;

fn grid() -> impl Strategy<Value = usize> {
    prop_oneof![Just(1usize), Just(3), Just(5), Just(50), 1usize..30]
}

fn kan_family() -> impl Strategy<Value = EdgeFamily> {
    prop_oneof![
        (1usize..=5, 1usize..12).prop_map(|(k, g)| EdgeFamily::bspline(k, g)),
        (1usize..8).prop_map(EdgeFamily::grbf),
        (0usize..8).prop_map(EdgeFamily::chebyshev),
        (1usize..6).prop_map(EdgeFamily::fourier),
    ]
}

fn any_family() -> impl Strategy<Value = EdgeFamily> {
    prop_oneof![4 => kan_family(), 1 => Just(EdgeFamily::mlp())]
}

fn widths() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..7, 2..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn partition_of_unity(k in 1usize..=5, g in grid(), t in 0.0f64..=1.0) {
        let p = BSplineParams::new(k, g);
        let knots = knot_vector(&p);
        let x = -1.0 + 2.0 * t;
        let sum: f64 = (0..p.basis_count())
            .map(|i| bspline_basis_recursive(&knots, i, k, x).unwrap())
            .sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9, "sum {sum}");
        let local: f64 = active_basis(&p, x, ActiveMode::Recursive).values.iter().sum();
        prop_assert!((local - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn local_support(k in 1usize..=5, g in grid(), i_frac in 0.0f64..1.0, t in -1.5f64..1.5) {
        let p = BSplineParams::new(k, g);
        let knots = knot_vector(&p);
        let i = ((p.basis_count() as f64) * i_frac) as usize;
        let v = bspline_basis_recursive(&knots, i, k, t).unwrap();
        if t < knots[i] || t >= knots[i + k + 1] {
            prop_assert_eq!(v, 0.0);
        } else {
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn active_basis_matches_full_expansion(k in 1usize..=5, g in grid(), t in 0.0f64..=1.0) {
        let p = BSplineParams::new(k, g);
        let knots = knot_vector(&p);
        let x = -1.0 + 2.0 * t;
        let ab = active_basis(&p, x, ActiveMode::Recursive);
        for i in 0..p.basis_count() {
            let full = bspline_basis_recursive(&knots, i, k, x).unwrap();
            let local = i
                .checked_sub(ab.interval_index)
                .and_then(|r| ab.values.get(r).copied())
                .unwrap_or(0.0);
            prop_assert!((full - local).abs() <= 1e-12, "i={i} {full} vs {local}");
        }
    }

    #[test]
    fn lut_basis_close_to_recursion(k in 1usize..=5, g in grid(), t in 0.0f64..=1.0) {
        let p = BSplineParams::new(k, g);
        let lut = BasisLut::bspline(k, LutConfig::default()).unwrap();
        let x = -1.0 + 2.0 * t;
        let a = active_basis(&p, x, ActiveMode::Lut(&lut));
        let b = active_basis(&p, x, ActiveMode::Recursive);
        prop_assert_eq!(a.interval_index, b.interval_index);
        for (u, v) in a.values.iter().zip(&b.values) {
            prop_assert!((u - v).abs() <= 1e-6);
        }
    }

    #[test]
    fn chebyshev_trig_identity(n in 0usize..=24, u in -1.0f64..=1.0) {
        let exact = (n as f64 * u.acos()).cos();
        prop_assert!((chebyshev_t(n, u) - exact).abs() <= 1e-9);
    }

    #[test]
    fn grbf_shift_identity(
        centers in prop::collection::btree_set(-64i32..64, 1..6),
        x in -128i32..128,
        delta in -64i32..64,
        coeff_seed in any::<u64>(),
    ) {
        // Multiples of 1/16 keep every subtraction exact.
        let c: Vec<f64> = centers.iter().map(|&c| c as f64 / 16.0).collect();
        let (x, delta) = (x as f64 / 16.0, delta as f64 / 16.0);
        let base = GrbfParams { centers: c.clone(), width: 0.5, base: BaseActivation::Silu };
        let shifted = GrbfParams { centers: c.iter().map(|v| v + delta).collect(), ..base.clone() };
        let coeffs = (0..c.len()).map(|i| ((coeff_seed >> i) & 7) as f64 - 3.5).collect();
        let w = EdgeWeights { w_b: 0.0, coeffs };
        let opts = EvalOptions::new(BasisMode::Recursive);
        let a = edge_eval(&EdgeFamily::Grbf(base), &w, x, opts).unwrap();
        let b = edge_eval(&EdgeFamily::Grbf(shifted), &w, x + delta, opts).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fourier_periodic(g in 1usize..6, x in -4.0f64..4.0, seed in any::<u64>()) {
        let fam = EdgeFamily::fourier(g);
        let EdgeFamily::Fourier(p) = &fam else { unreachable!() };
        let coeffs = (0..2 * g).map(|i| (((seed >> (2 * i)) & 3) as f64 - 1.5) / 2.0).collect();
        let w = EdgeWeights { w_b: 0.0, coeffs };
        for mode in [BasisMode::Recursive, BasisMode::LutOptimized] {
            let opts = EvalOptions::new(mode);
            let a = edge_eval(&fam, &w, x, opts).unwrap();
            let b = edge_eval(&fam, &w, x + p.period(), opts).unwrap();
            prop_assert!((a - b).abs() <= 1e-9, "{mode}: {a} vs {b}");
        }
    }

    #[test]
    fn bspline_translation_invariance(k in 1usize..=4, g in 1usize..8, shift in -3.0f64..3.0, t in 0.0f64..=1.0) {
        let p = BSplineParams::new(k, g);
        let moved = BSplineParams { domain: Interval { lo: -1.0 + shift, hi: 1.0 + shift }, ..p };
        let w = EdgeWeights { w_b: 0.0, coeffs: (0..p.basis_count()).map(|i| (i as f64).sin()).collect() };
        let x = -1.0 + 2.0 * t;
        let opts = EvalOptions::new(BasisMode::Recursive);
        let a = edge_eval(&EdgeFamily::BSpline(p), &w, x, opts).unwrap();
        let b = edge_eval(&EdgeFamily::BSpline(moved), &w, x + shift, opts).unwrap();
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lut_forward_tracks_recursive(family in kan_family(), w in widths(), seed in any::<u64>(), t in 0.0f64..1.0) {
        let spec = NetworkSpec::uniform("p", &w, &family).unwrap();
        let weights = NetworkWeights::random(&spec, seed);
        let x: Vec<f64> = (0..w[0]).map(|i| ((i as f64 + 1.0) * 7.3 * t).sin()).collect();
        let a = Network::new(&spec, &weights, EvalOptions::new(BasisMode::LutOptimized)).unwrap().forward(&x).unwrap();
        let b = Network::new(&spec, &weights, EvalOptions::new(BasisMode::Recursive)).unwrap().forward(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-5, "{family}: {u} vs {v}");
        }
    }

    #[test]
    fn counted_equals_analytic(family in any_family(), w in widths(), seed in any::<u64>()) {
        let spec = NetworkSpec::uniform("p", &w, &family).unwrap();
        let weights = NetworkWeights::random(&spec, seed);
        let x = vec![0.25; w[0]];
        let pass = counted_forward(&spec, &weights, &x, BasisMode::LutOptimized).unwrap();
        for (layer, tally) in spec.layers().iter().zip(&pass.layers) {
            let t = tally.total();
            prop_assert_eq!(t.total().mults, analytic::rm_layer(layer, BasisMode::LutOptimized).unwrap());
            prop_assert_eq!(t.accumulation_adds(), analytic::accumulation_adds_layer(layer));
        }
    }
}

proptest! {
    #[test]
    fn bracketing(a in 1u64..40, b in 0u64..200, budget in 0u64..2_000_000) {
        let cost = |x: usize| a * (x * x) as u64 + b * x as u64;
        match solve_budget(budget, |x| Ok(cost(x))).unwrap() {
            IsoOutcome::Fits { x_floor, cost_at_x, .. } => {
                prop_assert!(cost_at_x == cost(x_floor) && cost(x_floor) <= budget && budget < cost(x_floor + 1));
            }
            IsoOutcome::BudgetTooSmall { .. } => prop_assert!(cost(1) > budget),
        }
    }

    #[test]
    fn library_matches_oracle(k in 1u64..=5, nc in 1u64..9, n in 0u64..9, g in 1u64..7, w in widths()) {
        let wu: Vec<u64> = w.iter().map(|&v| v as u64).collect();
        let cases = [
            (EdgeFamily::bspline(k as usize, 5), Fam::BSpline { k }),
            (EdgeFamily::grbf(nc as usize), Fam::Grbf { nc }),
            (EdgeFamily::chebyshev(n as usize), Fam::Chebyshev { n }),
            (EdgeFamily::fourier(g as usize), Fam::Fourier { g }),
            (EdgeFamily::mlp(), Fam::Mlp),
        ];
        for (family, fam) in cases {
            let spec = NetworkSpec::uniform("p", &w, &family).unwrap();
            let t = analytic::cost_report(&spec, &QuantConfig::default(), BasisMode::LutOptimized).unwrap().totals;
            let o = common::totals(fam, &wu, 8);
            prop_assert_eq!((t.rm, t.bop, t.nabs), (o.rm, o.bop, o.nabs), "{}", family);
        }
    }

    #[test]
    fn rm_ratio_constant_in_width(family in kan_family(), x in 1usize..200) {
        let rm = |f: &EdgeFamily| {
            let s = NetworkSpec::uniform("p", &[3, x, x, 2], f).unwrap();
            kan_hwcost::iso::metric_total(&s, &QuantConfig::default(), Metric::Rm).unwrap()
        };
        let per_edge = analytic::rm_edge(&family, BasisMode::LutOptimized).unwrap();
        prop_assert_eq!(rm(&family), per_edge * rm(&EdgeFamily::mlp()));
    }

    #[test]
    fn costs_grow_with_bits(family in any_family(), bits in 2u32..16) {
        let spec = NetworkSpec::uniform("p", &[3, 4, 2], &family).unwrap();
        let at = |b| analytic::cost_report(&spec, &QuantConfig::uniform_bits(b), BasisMode::LutOptimized).unwrap().totals;
        let (lo, hi) = (at(bits), at(bits + 1));
        prop_assert!(hi.bop > lo.bop && hi.nabs > lo.nabs && hi.rm == lo.rm);
    }

    #[test]
    fn pot_never_costs_more(family in any_family(), bits in 2u32..16) {
        let spec = NetworkSpec::uniform("p", &[3, 4, 2], &family).unwrap();
        let q = QuantConfig::uniform_bits(bits);
        let uni = analytic::cost_report(&spec, &q, BasisMode::LutOptimized).unwrap().totals;
        let pot = analytic::cost_report(&spec, &q.with_scheme(QuantScheme::PowerOfTwo), BasisMode::LutOptimized)
            .unwrap()
            .totals;
        prop_assert!(pot.nabs <= uni.nabs && pot.bop == uni.bop);
    }

    #[test]
    fn spec_json_round_trip(family in any_family(), w in widths(), bits in 1u32..=32) {
        let layers = w.windows(2).map(|p| LayerSpec::new(p[0], p[1], family.clone())).collect();
        let spec = NetworkSpec::new("rt", layers).unwrap();
        let quant = QuantConfig::uniform_bits(bits);
        let (back, q) = parse_spec(&to_json(&spec, &quant)).unwrap();
        prop_assert_eq!(back, spec);
        prop_assert_eq!(q, quant);
    }
}

mod common;

use common::{oracle_half, oracle_single, random_positive_real};
use gadi::bounds::{report, BoundConstants, Roundoffs};
use gadi::gadi::iteration_matrix;
use gadi::gpr::{GprModel, Hyperparameters, TrainingPair, TrainingSet};
use gadi::linalg::{matvec, norm2, residual, spectral_radius, SparseMatrix};
use gadi::precision::{round_to, rounded_binop, BinOp, FloatFormat};
use gadi::problems::{build_convdiff3d, ConvDiff3DSpec};
use gadi::splitting::{hss_split, kappa_hat, SplitSpectrum};
use proptest::prelude::*;

const FORMATS: [FloatFormat; 3] = [FloatFormat::Half, FloatFormat::Single, FloatFormat::Double];

fn any_format() -> impl Strategy<Value = FloatFormat> {
    prop::sample::select(FORMATS.to_vec())
}

/// Finite doubles spread over the whole exponent range.
fn finite_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<u64>().prop_map(f64::from_bits).prop_filter("finite", |x| x.is_finite()),
        -1e6f64..1e6,
        -1e-4f64..1e-4,
        -1e-7f64..1e-7,
    ]
}

/// A random bit pattern of `fmt`, returned as binary64.
fn representable(fmt: FloatFormat) -> BoxedStrategy<f64> {
    match fmt {
        FloatFormat::Half => any::<u16>()
            .prop_map(half::f16::from_bits)
            .prop_filter("finite", |h| h.is_finite())
            .prop_map(f64::from)
            .boxed(),
        FloatFormat::Single => {
            any::<u32>().prop_map(f32::from_bits).prop_filter("finite", |x| x.is_finite()).prop_map(f64::from).boxed()
        }
        FloatFormat::Double => any::<u64>().prop_map(f64::from_bits).prop_filter("finite", |x| x.is_finite()).boxed(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn rounding_is_idempotent(x in finite_f64(), fmt in any_format()) {
        let r = round_to(x, fmt);
        prop_assert_eq!(round_to(r, fmt).to_bits(), r.to_bits());
    }

    #[test]
    fn rounding_is_monotone(a in finite_f64(), b in finite_f64(), fmt in any_format()) {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(round_to(x, fmt) <= round_to(y, fmt));
    }

    #[test]
    fn representable_values_are_fixed((fmt, x) in any_format().prop_flat_map(|f| (Just(f), representable(f)))) {
        prop_assert_eq!(round_to(x, fmt).to_bits(), x.to_bits());
    }

    #[test]
    fn relative_error_within_unit_roundoff(m in 1.0f64..2.0, e in -14i32..16, neg: bool, fmt in any_format()) {
        let x = if neg { -m } else { m } * 2f64.powi(e);
        let r = round_to(x, fmt);
        prop_assume!(r.is_finite());
        prop_assert!((r - x).abs() <= fmt.unit_roundoff() * x.abs());
    }

    #[test]
    fn rounding_matches_bit_oracles(x in finite_f64()) {
        prop_assert_eq!(round_to(x, FloatFormat::Single).to_bits(), oracle_single(x).to_bits());
        prop_assert_eq!(round_to(x, FloatFormat::Half).to_bits(), oracle_half(x).to_bits());
        prop_assert_eq!(round_to(x, FloatFormat::Half), f64::from(half::f16::from_f64(x)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn double_matvec_is_storage_order_sum(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = common::rng(seed);
        let a = random_positive_real(n, 0.3, &mut rng);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 1e3).collect();
        let y = matvec(&a, &x, FloatFormat::Double).unwrap();
        for (i, yi) in y.iter().enumerate() {
            let (cols, vals) = a.row(i);
            let mut acc = 0.0f64;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            prop_assert_eq!(yi.to_bits(), acc.to_bits());
        }
    }

    #[test]
    fn half_matvec_rounds_every_operation(seed in any::<u64>(), n in 1usize..24) {
        let mut rng = common::rng(seed);
        let a = random_positive_real(n, 0.4, &mut rng);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let y = matvec(&a, &x, FloatFormat::Half).unwrap();
        for (i, yi) in y.iter().enumerate() {
            let (cols, vals) = a.row(i);
            let mut acc = 0.0f64;
            for (c, v) in cols.iter().zip(vals) {
                let prod = oracle_half(oracle_half(*v) * oracle_half(x[*c]));
                acc = oracle_half(acc + prod);
            }
            prop_assert_eq!(yi.to_bits(), acc.to_bits());
        }
    }

    #[test]
    fn integer_residual_is_exact(seed in any::<u64>(), n in 1usize..16, fmt in any_format()) {
        let mut rng = common::rng(seed);
        use rand::Rng;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || rng.random_bool(0.3) {
                    t.push((i, j, rng.random_range(-4i32..=4) as f64));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3i32..=3) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-20i32..=20) as f64).collect();
        let exact: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(ax, bi)| bi - ax).collect();
        prop_assert_eq!(residual(&a, &x, &b, fmt, fmt).unwrap(), exact);
    }

    #[test]
    fn norm_does_not_overflow(e in -20i32..15, n in 1usize..300) {
        let v = 2f64.powi(e) * 1.5;
        let x = vec![v; n];
        let r = norm2(&x, FloatFormat::Half);
        if v * (n as f64).sqrt() < 6.0e4 {
            prop_assert!(r.is_finite());
        }
        prop_assert!(r >= round_to(v, FloatFormat::Half) * 0.99);
    }

    #[test]
    fn binop_matches_oracle(a in finite_f64(), b in finite_f64(), op in prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div])) {
        let (x, y) = (oracle_single(a), oracle_single(b));
        prop_assume!(x.is_finite() && y.is_finite() && y != 0.0);
        let exact = match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => x / y,
        };
        prop_assert_eq!(rounded_binop(op, x, y, FloatFormat::Single).to_bits(), oracle_single(exact).to_bits());
    }

    #[test]
    fn splitting_sums_to_matrix(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = common::rng(seed);
        let a = random_positive_real(n, 0.3, &mut rng);
        let s = hss_split(&a).unwrap();
        let sum = s.m.add(&s.n).unwrap().to_dense();
        prop_assert_eq!(sum.max_abs_diff(&a.to_dense()), 0.0);
        prop_assert!(s.m.is_symmetric());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn contraction_for_random_parameters(seed in any::<u64>(), n in 2usize..=20, alpha in 1e-3f64..100.0, omega in 0.0f64..1.999) {
        let mut rng = common::rng(seed);
        let a = random_positive_real(n, 0.35, &mut rng);
        let s = hss_split(&a).unwrap();
        let t = iteration_matrix(&a, &s, alpha, omega).unwrap();
        prop_assert!(spectral_radius(&t).unwrap() < 1.0);
    }

    #[test]
    fn kappa_hat_decreases_with_singular_skew_part(
        m_min in 1e-3f64..10.0,
        spread in 4.0f64..1e3,
        n_max in 0.0f64..10.0,
        lo in -6.0f64..6.0,
        steps in 2usize..20,
    ) {
        let spec = SplitSpectrum { m_max: m_min * spread, m_min, n_max, n_min: 0.0 };
        let mut prev = f64::INFINITY;
        for k in 0..steps {
            let alpha = 10f64.powf(lo + k as f64 * 0.5);
            let kh = spec.kappa_hat(alpha);
            prop_assert!(kh < prev, "alpha {alpha}: {kh} !< {prev}");
            prev = kh;
        }
    }

    #[test]
    fn kappa_hat_rises_from_zero_when_skew_part_is_nonsingular(
        m_min in 1e-2f64..10.0,
        n_min in 1e-2f64..10.0,
    ) {
        let spec = SplitSpectrum { m_max: 2.0 * m_min, m_min, n_max: 2.0 * n_min, n_min };
        prop_assert!(spec.kappa_hat(1e-9) < spec.kappa_hat(1e-8));
        prop_assert!((spec.kappa_hat(1e9) - 4.0).abs() < 1e-6);
    }

    #[test]
    fn bound_factors_grow_with_roundoff_and_conditioning(
        kh in 1.0f64..1e4,
        dk in 0.0f64..1e3,
        ur in 1e-17f64..1e-2,
        uf in 1e-17f64..1e-2,
        u in 1e-17f64..1e-6,
        scale in 1.0f64..100.0,
    ) {
        let c = BoundConstants { lambda: 0.5, theta: 1e-3, eta: 1e-3, gamma: 1.1, phi2_of_n: 100.0 };
        let base = report(kh, Roundoffs { u_r: ur, u, u_f: uf }, 1.0, &c).unwrap();
        let more_ur = report(kh, Roundoffs { u_r: ur * scale, u, u_f: uf }, 1.0, &c).unwrap();
        let more_uf = report(kh, Roundoffs { u_r: ur, u, u_f: uf * scale }, 1.0, &c).unwrap();
        let more_k = report(kh + dk, Roundoffs { u_r: ur, u, u_f: uf }, 1.0, &c).unwrap();
        for r in [more_ur, more_uf, more_k] {
            prop_assert!(r.alpha_f >= base.alpha_f && r.beta_f >= base.beta_f);
            prop_assert!(r.alpha_b >= base.alpha_b && r.beta_b >= base.beta_b);
        }
    }

    #[test]
    fn gpr_interpolates_noise_free_data(a0 in 0.05f64..2.0, slope in -0.3f64..0.3) {
        let mut ts = TrainingSet::new(FloatFormat::Double);
        let orders = [64usize, 216, 512, 1728, 4096];
        for &n in &orders {
            let alpha = a0 * (n as f64 / 64.0).powf(slope);
            ts.push(TrainingPair { size_n: n, alpha_opt: alpha, iters_at_opt: 1 }).unwrap();
        }
        let h = Hyperparameters { signal_var: 1.0, length_scale: 2.0, noise_var: 1e-12 };
        let m = GprModel::fit_with(&ts, h).unwrap();
        for p in &ts.pairs {
            let (mean, std) = m.predict_alpha(p.size_n);
            prop_assert!((mean - p.alpha_opt).abs() <= 1e-5 * p.alpha_opt.max(1.0), "{mean} vs {}", p.alpha_opt);
            prop_assert!(std < 1e-3);
        }
    }
}

#[test]
fn kappa_hat_on_convection_diffusion() {
    let grid = |k: usize| 10f64.powf(-3.0 + 11.0 * k as f64 / 19.0);
    // Odd orders and n = 8 have a singular skew part: decreasing everywhere.
    for n in [3, 5, 8] {
        let s = hss_split(&build_convdiff3d(ConvDiff3DSpec::new(n).unwrap()).a).unwrap();
        let ks: Vec<f64> = (0..20).map(|k| kappa_hat(&s, grid(k)).unwrap()).collect();
        assert!(ks.windows(2).all(|w| w[1] < w[0]), "n={n}: {ks:?}");
        assert!((kappa_hat(&s, 1e8).unwrap() - 4.0).abs() < 1e-5);
    }
    // Otherwise the quantity vanishes as the shift goes to zero, so it rises
    // before it falls.
    for n in [2, 4, 6] {
        let s = hss_split(&build_convdiff3d(ConvDiff3DSpec::new(n).unwrap()).a).unwrap();
        let sp = SplitSpectrum::of(&s).unwrap();
        assert!(sp.n_min > 1e-3);
        assert!(kappa_hat(&s, 1e-3).unwrap() < kappa_hat(&s, 1e-2).unwrap());
        if n > 2 {
            let ks: Vec<f64> = (10..20).map(|k| kappa_hat(&s, grid(k)).unwrap()).collect();
            assert!(ks.windows(2).all(|w| w[1] < w[0]), "n={n}: {ks:?}");
        }
    }
}

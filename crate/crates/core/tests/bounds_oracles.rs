use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use qpuk::bounds::{binary_entropy, fano_lhs, gaussian_bin_probability, PAIR_TIE_TOLERANCE};
use qpuk::{
    fano_error_lower_bound, holevo_bound, max_pair_probability, p_in_honest, p_in_pair,
    p_in_shifted, p_in_upper_bound, quadrature_mean, security_margin, CutoffPolicy,
    DetectionConfig, HolevoMethod, ProbeEnsemble, Quadrature, ResponseModel,
};
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

fn det(eta: f64, delta_bar: f64) -> DetectionConfig {
    DetectionConfig::new(eta, delta_bar).unwrap()
}

/// Composite Simpson rule for the N(mean, σ²) density over [a, b].
fn simpson_gaussian(mean: f64, sigma: f64, a: f64, b: f64) -> f64 {
    let n = 20_000;
    let h = (b - a) / n as f64;
    let pdf =
        |x: f64| (-(x - mean).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
    let mut s = pdf(a) + pdf(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Independent bisection for the smallest p with H(p) + p log2(N-1) >= rhs.
fn fano_oracle(rhs: f64, n: usize) -> f64 {
    let lhs = |p: f64| {
        let h = if p <= 0.0 || p >= 1.0 {
            0.0
        } else {
            -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
        };
        h + p * ((n - 1) as f64).log2()
    };
    let (mut lo, mut hi) = (0.0, 1.0 - 1.0 / n as f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lhs(mid) >= rhs {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn honest_probability_matches_integral() {
    assert_abs_diff_eq!(p_in_honest(&det(0.5, 2.0)), 0.682689, epsilon = 1e-6);
    assert_abs_diff_eq!(p_in_honest(&det(0.5, 4.0)), 0.954500, epsilon = 1e-6);
    for (eta, db) in [(0.5, 2.0), (0.8, 3.0), (1.0, 0.5), (0.3, 4.0)] {
        let d = det(eta, db);
        let half = d.bin_width() / 2.0;
        let want = simpson_gaussian(0.0, d.sigma(), -half, half);
        assert_abs_diff_eq!(p_in_honest(&d), want, epsilon = 1e-12);
    }
    let tiny = det(0.5, 1e-12);
    assert!(p_in_honest(&tiny) < 1e-12);
}

#[test]
fn shifted_probability_matches_integral() {
    for db in [1.0, 2.0, 3.0] {
        let d = det(0.65, db);
        let half = d.bin_width() / 2.0;
        for s in [-7.3, -2.0, -0.4, 0.0, 0.1, 1.0, 2.5, 5.0] {
            let shift = s * d.sigma();
            let want = simpson_gaussian(shift, d.sigma(), -half, half);
            assert_abs_diff_eq!(p_in_shifted(&d, shift), want, epsilon = 1e-12);
        }
    }
    let d = det(0.5, 2.0);
    assert_abs_diff_eq!(
        p_in_shifted(&d, d.sigma()),
        0.5 * libm::erf(SQRT_2),
        epsilon = 1e-15
    );
    assert_abs_diff_eq!(p_in_shifted(&d, d.sigma()), 0.477250, epsilon = 1e-6);
    let far = p_in_shifted(&d, 100.0 * d.sigma());
    assert!(far < 1e-300);
}

#[test]
fn honest_probability_is_independent_of_challenge() {
    // explicit average over k and θ, each bin centred on its own mean
    for (mu_r, arg_f, n) in [(120.0, 0.0, 16), (300.0, 1.234, 37), (0.5, 2.0, 4)] {
        let model = ResponseModel::new(mu_r, arg_f, n).unwrap();
        let d = det(0.5, 2.0);
        let mut total = 0.0;
        for k in 0..n {
            for q in Quadrature::BOTH {
                let mean = quadrature_mean(&model, k, q).unwrap();
                total += gaussian_bin_probability(mean, mean, d.bin_width(), d.sigma());
            }
        }
        let avg = total / (2 * n) as f64;
        assert_abs_diff_eq!(avg, libm::erf(2.0 / (2.0 * SQRT_2)), epsilon = 1e-12);
    }
}

#[test]
fn pair_probability_examples() {
    let d = det(0.5, 2.0);
    let model = ResponseModel::new(120.0, 0.0, 2).unwrap();
    let v = p_in_pair(&model, &d, 0, 1).unwrap();
    let direct = 0.5 * (p_in_shifted(&d, -2.0 * 240f64.sqrt()) + p_in_honest(&d));
    assert_abs_diff_eq!(v, direct, epsilon = 1e-15);
    assert_abs_diff_eq!(v, 0.341345, epsilon = 1e-6);
    let mp = max_pair_probability(&model, &d);
    assert_eq!(mp.pair, (0, 1));
    assert_abs_diff_eq!(mp.probability, 0.341345, epsilon = 1e-6);
    assert!(p_in_pair(&model, &d, 0, 2).is_err());

    let model = ResponseModel::new(77.0, 0.3, 9).unwrap();
    for k in 0..9 {
        assert_eq!(p_in_pair(&model, &d, k, k).unwrap(), p_in_honest(&d));
    }
}

#[test]
fn zero_response_gives_honest_maximum() {
    let d = det(0.5, 2.0);
    let model = ResponseModel::new(0.0, 0.4, 12).unwrap();
    let mp = max_pair_probability(&model, &d);
    assert_eq!(mp.pair, (0, 1));
    assert_eq!(mp.probability, p_in_honest(&d));
    let r = security_margin(&ProbeEnsemble::new(600.0, 12).unwrap(), &model, &d, 1e-3).unwrap();
    assert_eq!(r.margin_d, 0.0);
    assert!(!r.secure);
}

#[test]
fn max_pair_equals_brute_force_over_ordered_pairs() {
    let d = det(0.65, 2.5);
    for (mu_r, arg_f, n) in [
        (120.0, 0.0, 16),
        (50.0, 0.9, 13),
        (300.0, 2.1, 40),
        (120.0, 0.0, 192),
    ] {
        let model = ResponseModel::new(mu_r, arg_f, n).unwrap();
        let pairs: Vec<((usize, usize), f64)> = (0..n)
            .flat_map(|k| (0..n).map(move |kt| (k, kt)))
            .filter(|(k, kt)| k != kt)
            .map(|(k, kt)| ((k, kt), p_in_pair(&model, &d, k, kt).unwrap()))
            .collect();
        let best = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let first = pairs
            .iter()
            .find(|p| p.1 >= best * (1.0 - PAIR_TIE_TOLERANCE))
            .unwrap()
            .0;
        let mp = max_pair_probability(&model, &d);
        assert_eq!(mp.probability, best);
        assert_eq!(mp.pair, first, "N={n}");
    }
    // mirror-image pairs tie; the smallest wins
    let model = ResponseModel::new(420.0, 0.0, 192).unwrap();
    assert_eq!(max_pair_probability(&model, &det(0.9, 2.0)).pair, (0, 1));
}

#[test]
fn max_pair_grows_with_n() {
    let d = det(0.5, 2.0);
    let mut last = 0.0;
    for n in [4, 8, 16, 32, 64] {
        let p = max_pair_probability(&ResponseModel::new(120.0, 0.0, n).unwrap(), &d).probability;
        assert!(p >= last, "N={n}: {p} < {last}");
        last = p;
    }
}

#[test]
fn fano_examples() {
    for n in [2, 3, 16, 1000] {
        assert_eq!(fano_error_lower_bound((n as f64).log2(), n).unwrap(), 0.0);
    }
    assert_abs_diff_eq!(
        fano_error_lower_bound(0.0, 2).unwrap(),
        0.5,
        epsilon = 1e-12
    );
    let p = fano_error_lower_bound(1.0, 4).unwrap();
    assert_abs_diff_eq!(p, 0.1893, epsilon = 1e-4);
    assert_abs_diff_eq!(p, fano_oracle(1.0, 4), epsilon = 1e-12);
    assert!(fano_lhs(0.188, 4) < 1.0 && fano_lhs(0.19, 4) > 1.0);
    assert_eq!(fano_error_lower_bound(5.0, 4).unwrap(), 0.0);
    assert!(fano_error_lower_bound(1.0, 1).is_err());
    assert_abs_diff_eq!(
        fano_error_lower_bound(0.0, 64).unwrap(),
        1.0 - 1.0 / 64.0,
        epsilon = 1e-12
    );
}

#[test]
fn fano_bound_with_holevo_input() {
    for (mu, n) in [(600.0, 128), (600.0, 512), (100.0, 64), (20.0, 8)] {
        let chi = holevo_bound(
            &ProbeEnsemble::new(mu, n).unwrap(),
            HolevoMethod::Fast,
            CutoffPolicy::Default,
        )
        .unwrap();
        let rhs = (n as f64).log2() - chi;
        let p = fano_error_lower_bound(chi, n).unwrap();
        assert_abs_diff_eq!(p, fano_oracle(rhs, n), epsilon = 1e-10);
    }
}

#[test]
fn upper_bound_examples() {
    assert_eq!(p_in_upper_bound(0.0, 0.6827, 0.3413).unwrap(), 0.6827);
    assert_eq!(p_in_upper_bound(1.0, 0.6827, 0.3413).unwrap(), 0.3413);
    assert_abs_diff_eq!(
        p_in_upper_bound(0.25, 0.6827, 0.3413).unwrap(),
        0.59735,
        epsilon = 1e-12
    );
    assert!(p_in_upper_bound(0.25, 0.3, 0.4).is_err());
}

#[test]
fn margin_vanishes_for_few_phases() {
    let r = security_margin(
        &ProbeEnsemble::new(600.0, 4).unwrap(),
        &ResponseModel::new(120.0, 0.0, 4).unwrap(),
        &det(0.5, 2.0),
        1e-3,
    )
    .unwrap();
    assert!(r.margin_d < 1e-12);
    assert!(r.p_err_low < 1e-12);
    assert!(!r.secure);
}

#[test]
fn margin_rises_then_falls_in_n() {
    let d = det(0.5, 2.0);
    let margin = |n: usize| {
        security_margin(
            &ProbeEnsemble::new(600.0, n).unwrap(),
            &ResponseModel::new(120.0, 0.0, n).unwrap(),
            &d,
            1e-3,
        )
        .unwrap()
        .margin_d
    };
    let ds: Vec<f64> = [4, 8, 16, 32, 64, 128, 256, 512, 1024]
        .iter()
        .map(|&n| margin(n))
        .collect();
    let peak = ds.iter().cloned().fold(0.0, f64::max);
    let i = ds.iter().position(|&x| x == peak).unwrap();
    assert!(ds[..=i].windows(2).all(|w| w[1] >= w[0]), "{ds:?}");
    assert!(ds[i..].windows(2).all(|w| w[1] <= w[0]), "{ds:?}");
    assert!(0 < i && i < ds.len() - 1);
}

#[test]
fn quarter_turns_of_global_phase_leave_pairs_unchanged() {
    let d = det(0.5, 2.0);
    let n = 24;
    let base = ResponseModel::new(120.0, 0.37, n).unwrap();
    for turns in 1..4 {
        let rotated = ResponseModel::new(120.0, 0.37 + turns as f64 * FRAC_PI_2, n).unwrap();
        for k in 0..n {
            for kt in 0..n {
                let a = p_in_pair(&base, &d, k, kt).unwrap();
                let b = p_in_pair(&rotated, &d, k, kt).unwrap();
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn global_phase_changes_pairs_but_barely_moves_margin() {
    // per-pair probabilities depend on arg(F) unless it moves by a quarter turn;
    // the margin only through the maximum over pairs, which flattens with N
    let d = det(0.5, 2.0);
    let n = 16;
    let a = ResponseModel::new(120.0, 0.0, n).unwrap();
    let b = ResponseModel::new(120.0, 1.234, n).unwrap();
    let diff = (0..n)
        .flat_map(|k| (0..n).map(move |kt| (k, kt)))
        .map(|(k, kt)| {
            (p_in_pair(&a, &d, k, kt).unwrap() - p_in_pair(&b, &d, k, kt).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    assert!(diff > 1e-3);

    let margin = |arg_f: f64, n: usize| {
        security_margin(
            &ProbeEnsemble::new(600.0, n).unwrap(),
            &ResponseModel::new(120.0, arg_f, n).unwrap(),
            &d,
            1e-3,
        )
        .unwrap()
        .margin_d
    };
    for n in [128, 512] {
        let spread = [0.7, 1.234, PI]
            .iter()
            .map(|&f| (margin(f, n) - margin(0.0, n)).abs())
            .fold(0.0, f64::max);
        assert!(spread < 1e-3 * margin(0.0, n), "N={n}: {spread}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn shifted_probability_is_even(s in -50.0f64..50.0, db in 0.1f64..6.0, eta in 0.05f64..1.0) {
        let d = det(eta, db);
        prop_assert_eq!(p_in_shifted(&d, s), p_in_shifted(&d, -s));
    }

    #[test]
    fn shifted_probability_decreases_with_distance(a in 0.0f64..20.0, b in 0.0f64..20.0, db in 0.1f64..6.0) {
        let d = det(0.5, db);
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(p_in_shifted(&d, near) >= p_in_shifted(&d, far));
        prop_assert!(p_in_shifted(&d, far) > 0.0);
        prop_assert!(p_in_shifted(&d, far) <= p_in_honest(&d));
    }

    #[test]
    fn fano_bound_solves_the_inequality(n in 2usize..5000, frac in 0.0f64..1.0) {
        let log_n = (n as f64).log2();
        let chi = frac * log_n;
        let p = fano_error_lower_bound(chi, n).unwrap();
        let rhs = log_n - chi;
        prop_assert!((0.0..=1.0 - 1.0 / n as f64).contains(&p));
        if rhs <= 0.0 {
            prop_assert_eq!(p, 0.0);
        } else {
            prop_assert!((fano_lhs(p, n) - rhs).abs() < 1e-9, "lhs {} rhs {}", fano_lhs(p, n), rhs);
        }
    }

    #[test]
    fn binary_entropy_is_symmetric(p in 0.0f64..1.0) {
        prop_assert!((binary_entropy(p) - binary_entropy(1.0 - p)).abs() < 1e-14);
    }

    #[test]
    fn security_report_invariants(
        mu_p in 5.0f64..1000.0,
        ratio in 0.0f64..0.7,
        n in 2usize..96,
        eta in 0.3f64..1.0,
        db in 1.0f64..4.0,
        arg_f in 0.0f64..6.3,
        eps in 0.0f64..0.01,
    ) {
        let r = security_margin(
            &ProbeEnsemble::new(mu_p, n).unwrap(),
            &ResponseModel::new(ratio * mu_p, arg_f, n).unwrap(),
            &det(eta, db),
            eps,
        ).unwrap();
        prop_assert!(r.p_err_low >= 0.0 && r.p_err_low <= 1.0 - 1.0 / n as f64);
        prop_assert!(0.0 <= r.max_pair_prob && r.max_pair_prob <= r.p_in0 && r.p_in0 <= 1.0);
        prop_assert!(r.margin_d >= 0.0);
        prop_assert_eq!(r.secure, r.margin_d > 2.0 * eps);
        prop_assert!(r.chi >= 0.0 && r.chi <= (n as f64).log2() + 1e-12);
    }

    #[test]
    fn bound_never_exceeds_honest_probability(p_err in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (max_pair, p0) = if a <= b { (a, b) } else { (b, a) };
        let u = p_in_upper_bound(p_err, p0, max_pair).unwrap();
        prop_assert!(u <= p0 + 1e-15);
        prop_assert!(p0 - u >= p_err * (p0 - max_pair) - 1e-15);
    }
}

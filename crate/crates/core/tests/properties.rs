use proptest::prelude::*;

use privfair::data::{generate_synthetic, split_indices, LabeledDataset, SyntheticSpec};
use privfair::fairness::{
    build_measure, confidence_interval, disagreement_probability, empirical_fairness, expected_accuracy,
    expected_fairness, fairness_variance_bound, norm_bounds, Margins, MeasureKind,
};
use privfair::linmodel::{
    angular_margin, individual_fairness_constant, predict_label, signed_margin, Example, Label, LinearModel,
};
use privfair::montecarlo::sample_models;
use privfair::numerics::{
    chi_square_tail_thresholds, dot, phi, std_normal_cdf, std_normal_quantile, DenseMatrix, SpdMatrix,
};
use privfair::privacy::{
    auditing_posterior, calibrate_sigma, lyapunov_residual, noisy_gd_stationary, perturb, GaussianPrior,
    NoiseSpec, PrivacyBudget,
};
use privfair::rng;

fn spd(p: usize, entries: &[f64]) -> SpdMatrix {
    let b = DenseMatrix::from_rows(&entries.chunks(p).map(<[f64]>::to_vec).collect::<Vec<_>>()).unwrap();
    let m = b.matmul(&b.transpose()).unwrap().add(&DenseMatrix::identity(p).scaled(0.1)).unwrap();
    SpdMatrix::new(m.symmetrized()).unwrap()
}

fn spd_strategy(max_p: usize) -> impl Strategy<Value = SpdMatrix> {
    (1..=max_p).prop_flat_map(|p| prop::collection::vec(-2.0..2.0f64, p * p).prop_map(move |e| spd(p, &e)))
}

fn with_bias(mut x: Vec<f64>) -> Vec<f64> {
    x.push(1.0);
    x
}

fn label(positive: bool) -> Label {
    if positive {
        Label::Positive
    } else {
        Label::Negative
    }
}

fn dataset_strategy() -> impl Strategy<Value = LabeledDataset> {
    prop::collection::vec(
        (prop::collection::vec(-3.0..3.0f64, 2), 0..3usize, any::<bool>()),
        1..60,
    )
    .prop_map(|rows| {
        LabeledDataset::from_raw(
            rows.into_iter()
                .map(|(x, g, y)| (x, ["a", "b", "c"][g].to_string(), label(y)))
                .collect(),
        )
        .unwrap()
    })
}

fn brute_force_variance(alpha: &[f64], sigma: f64) -> f64 {
    let n = alpha.len() as f64;
    alpha
        .iter()
        .flat_map(|a| alpha.iter().map(move |b| phi(a.min(*b) / sigma) * phi(-a.max(*b) / sigma)))
        .sum::<f64>()
        / (n * n)
}

fn margin_view(alpha: &[f64]) -> Margins {
    // theta = (1, 0) and x = (a, 1) with y = +1 give alpha = a / sqrt(a^2 + 1);
    // solve for x so the requested margins are reproduced exactly enough.
    let model = LinearModel::new(vec![1.0, 0.0]).unwrap();
    let examples: Vec<Example> = alpha
        .iter()
        .map(|&a| {
            let a = a.clamp(-0.999, 0.999);
            let x0 = a / (1.0 - a * a).sqrt();
            Example::new(vec![x0, 1.0], "g", Label::Positive).unwrap()
        })
        .collect();
    Margins::compute(&model, &SpdMatrix::identity(2), &examples).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cdf_symmetry(x in -8.0..8.0f64) {
        let s = std_normal_cdf(x).unwrap() + std_normal_cdf(-x).unwrap();
        prop_assert!((s - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn quantile_inverts_cdf(x in -6.0..6.0f64) {
        let p = std_normal_cdf(x).unwrap();
        let back = std_normal_quantile(p).unwrap();
        // Storing Phi(x) as f64 already moves x by up to half an ulp of p over phi(x).
        let representation = 0.5 * f64::EPSILON * p / (-0.5 * x * x).exp() * (2.0 * std::f64::consts::PI).sqrt();
        prop_assert!((back - x).abs() <= 1e-9 + representation, "{} -> {}", x, back);
    }

    #[test]
    fn quadratic_form_within_eigen_range(m in spd_strategy(12), seed in any::<u64>()) {
        let x = rng::standard_normals(&mut rng::stream(seed), m.dim());
        let q = m.quadratic_form(&x).unwrap();
        let r = m.eigen_range();
        let n2 = dot(&x, &x);
        let tol = 1e-10 * r.lambda_max * n2;
        prop_assert!(r.lambda_min * n2 <= q + tol && q <= r.lambda_max * n2 + tol);
    }

    #[test]
    fn chi_square_thresholds_bracket_dimension(p in 1usize..500, t in 0.0..50.0f64) {
        let (lo, hi) = chi_square_tail_thresholds(p, t).unwrap();
        prop_assert!(lo >= 0.0 && lo <= p as f64 && hi >= p as f64);
    }

    #[test]
    fn scores_are_lipschitz(
        w in prop::collection::vec(-5.0..5.0f64, 3),
        x in prop::collection::vec(-5.0..5.0f64, 2),
        z in prop::collection::vec(-5.0..5.0f64, 2),
    ) {
        let model = LinearModel::new(w).unwrap();
        let (x, z) = (with_bias(x), with_bias(z));
        let gap = (model.score(&x).unwrap() - model.score(&z).unwrap()).abs();
        let dist = x.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(gap <= individual_fairness_constant(&model) * dist * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn margin_sign_matches_prediction(
        w in prop::collection::vec(-5.0..5.0f64, 3),
        x in prop::collection::vec(-5.0..5.0f64, 2),
        y in any::<bool>(),
    ) {
        let model = LinearModel::new(w).unwrap();
        let x = with_bias(x);
        let y = label(y);
        let rho = signed_margin(&model, &x, y).unwrap();
        if model.score(&x).unwrap() != 0.0 {
            prop_assert_eq!(rho > 0.0, predict_label(&model, &x).unwrap() == y);
        }
    }

    #[test]
    fn angular_margin_scales_with_isotropic_covariance(
        w in prop::collection::vec(-5.0..5.0f64, 3),
        x in prop::collection::vec(-5.0..5.0f64, 2),
        c in 0.01..100.0f64,
    ) {
        let model = LinearModel::new(w).unwrap();
        let x = with_bias(x);
        let cov = SpdMatrix::identity(3).scaled(c).unwrap();
        let a = angular_margin(&model, &x, Label::Positive, &cov).unwrap();
        let rho = signed_margin(&model, &x, Label::Positive).unwrap();
        let expected = rho / dot(&x, &x).sqrt() / c.sqrt();
        prop_assert!((a - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }

    #[test]
    fn calibration_is_monotone(
        e1 in 0.0..20.0f64, e2 in 0.0..20.0f64,
        d1 in -8.0..-0.5f64, d2 in -8.0..-0.5f64,
        sens in 0.01..10.0f64,
    ) {
        let (d1, d2) = (10f64.powf(d1), 10f64.powf(d2));
        let sigma = |e: f64, d: f64| calibrate_sigma(&PrivacyBudget::new(e, d, sens).unwrap()).unwrap().sigma;
        let (lo_e, hi_e) = (e1.min(e2), e1.max(e2));
        prop_assert!(sigma(lo_e, d1) >= sigma(hi_e, d1) * (1.0 - 1e-11));
        let (lo_d, hi_d) = (d1.min(d2), d1.max(d2));
        prop_assert!(sigma(e1, lo_d) >= sigma(e1, hi_d) * (1.0 - 1e-11));
    }

    #[test]
    fn perturb_is_reproducible(seed in any::<u64>(), m in spd_strategy(5), sigma in 0.0..3.0f64) {
        let model = LinearModel::new(vec![0.5; m.dim()]).unwrap();
        let noise = NoiseSpec::new(sigma, m).unwrap();
        let a = perturb(&model, &noise, &mut rng::stream(seed)).unwrap();
        let b = perturb(&model, &noise, &mut rng::stream(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn isotropic_posterior_is_shrinkage(
        theta in prop::collection::vec(-5.0..5.0f64, 1..6),
        sigma in 0.01..5.0f64,
        eta2 in 0.01..10.0f64,
        shift in -2.0..2.0f64,
    ) {
        let p = theta.len();
        let mu = vec![shift; p];
        let noise = NoiseSpec::isotropic(sigma, p).unwrap();
        let post = auditing_posterior(&theta, &noise, &GaussianPrior::isotropic(mu.clone(), eta2).unwrap()).unwrap();
        let k = 1.0 / (1.0 + sigma * sigma / eta2);
        for i in 0..p {
            prop_assert!((post.mean[i] - (mu[i] + k * (theta[i] - mu[i]))).abs() <= 1e-12 * (1.0 + theta[i].abs()));
        }
    }

    #[test]
    fn stationary_law_solves_lyapunov(h in spd_strategy(10), eta in 0.001..1.0f64, sigma in 0.01..5.0f64) {
        let p = h.dim();
        let law = noisy_gd_stationary(&vec![0.0; p], &h, eta, sigma).unwrap();
        let r = lyapunov_residual(&law.covariance, &h, eta, sigma).unwrap();
        prop_assert!(r <= 1e-10 * eta * sigma * sigma, "residual {}", r);
    }

    #[test]
    fn accuracy_degrades_with_noise(
        alpha in prop::collection::vec(0.0..0.99f64, 1..40),
        s1 in 0.01..10.0f64,
        s2 in 0.01..10.0f64,
    ) {
        let m = margin_view(&alpha);
        let (lo, hi) = (s1.min(s2), s1.max(s2));
        prop_assert!(m.expected_accuracy(lo).unwrap() >= m.expected_accuracy(hi).unwrap() - 1e-15);
    }

    #[test]
    fn mixed_margins_tend_to_half(alpha in prop::collection::vec(-0.99..0.99f64, 1..40)) {
        let m = margin_view(&alpha);
        prop_assert!((m.expected_accuracy(1e8).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn sorted_variance_matches_pairs(alpha in prop::collection::vec(-0.99..0.99f64, 1..200), sigma in 0.01..3.0f64) {
        let m = margin_view(&alpha);
        let fast = m.accuracy_variance_bound(sigma).unwrap();
        prop_assert!((fast - brute_force_variance(m.alpha(), sigma)).abs() <= 1e-12);
        prop_assert!((0.0..=0.25).contains(&fast));
    }

    #[test]
    fn variance_tight_for_one_example(a in -0.99..0.99f64, sigma in 0.01..3.0f64) {
        let m = margin_view(&[a]);
        let p = phi(m.alpha()[0] / sigma);
        prop_assert!((m.accuracy_variance_bound(sigma).unwrap() - p * (1.0 - p)).abs() <= 1e-12);
    }

    #[test]
    fn fairness_bounds_are_consistent(
        d in dataset_strategy(),
        w in prop::collection::vec(-3.0..3.0f64, 3),
        sigma in 0.0..3.0f64,
        zeta in 0.01..0.99f64,
    ) {
        let model = LinearModel::new(w).unwrap();
        let noise = NoiseSpec::isotropic(sigma, 3).unwrap();
        for kind in MeasureKind::ALL {
            let Ok(measure) = build_measure(kind, &d) else { continue };
            for t in &measure.targets {
                let e = expected_fairness(&model, &noise, &d, &measure, &t.group).unwrap();
                let v = fairness_variance_bound(&model, &noise, &d, &measure, &t.group).unwrap();
                let cap: f64 = t.coeffs.iter().map(|c| c.abs()).sum::<f64>().powi(2) / 4.0;
                prop_assert!(v >= 0.0 && v <= cap + 1e-15);
                let i = confidence_interval(e, v, zeta, (-1.0, 1.0)).unwrap();
                prop_assert!(i.lo <= e + 1e-15 && e <= i.hi + 1e-15);
            }
        }
    }

    #[test]
    fn accuracy_parity_telescopes(
        d in dataset_strategy(),
        w in prop::collection::vec(-3.0..3.0f64, 3),
        sigma in 0.0..3.0f64,
    ) {
        let model = LinearModel::new(w).unwrap();
        let noise = NoiseSpec::isotropic(sigma, 3).unwrap();
        let m = build_measure(MeasureKind::AccuracyParity, &d).unwrap();
        let total: f64 = m
            .groups
            .iter()
            .map(|g| g.proportion * expected_fairness(&model, &noise, &d, &m, &g.sensitive).unwrap())
            .sum();
        prop_assert!(total.abs() <= 1e-12);
    }

    #[test]
    fn coefficient_forms_match_direct_rates(d in dataset_strategy(), w in prop::collection::vec(-3.0..3.0f64, 3)) {
        let model = LinearModel::new(w).unwrap();
        let ex = d.examples();
        let pred: Vec<bool> = ex.iter().map(|e| predict_label(&model, e.features()).unwrap() == Label::Positive).collect();
        let rate = |f: &dyn Fn(&Example) -> bool| {
            let idx: Vec<usize> = (0..ex.len()).filter(|&i| f(&ex[i])).collect();
            idx.iter().filter(|&&i| pred[i]).count() as f64 / idx.len() as f64
        };
        let dp = build_measure(MeasureKind::DemographicParity, &d).unwrap();
        for t in &dp.targets {
            let direct = rate(&|e| e.sensitive() == t.group) - rate(&|_| true);
            prop_assert!((empirical_fairness(&model, &d, &dp, &t.group).unwrap() - direct).abs() <= 1e-12);
        }
        if let Ok(eo) = build_measure(MeasureKind::EqualOpportunity, &d) {
            for t in &eo.targets {
                let pos = |e: &Example| e.label() == Label::Positive;
                let direct = rate(&|e| pos(e) && e.sensitive() == t.group) - rate(&pos);
                prop_assert!((empirical_fairness(&model, &d, &eo, &t.group).unwrap() - direct).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn disagreement_is_label_and_scale_free(
        w in prop::collection::vec(-3.0..3.0f64, 3),
        x in prop::collection::vec(-3.0..3.0f64, 3),
        c in 0.01..100.0f64,
        sigma in 0.01..5.0f64,
    ) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let model = LinearModel::new(w).unwrap();
        let noise = NoiseSpec::isotropic(sigma, 3).unwrap();
        let base = disagreement_probability(&model, &noise, &x, Label::Positive).unwrap();
        let flipped = disagreement_probability(&model, &noise, &x, Label::Negative).unwrap();
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let scaled = disagreement_probability(&model, &noise, &cx, Label::Positive).unwrap();
        prop_assert_eq!(base, flipped);
        prop_assert!((base - scaled).abs() <= 1e-12);
        prop_assert!((0.0..=0.5).contains(&base));
    }

    #[test]
    fn norm_bounds_are_ordered(
        w in prop::collection::vec(-3.0..3.0f64, 1..8),
        sigma in 0.0..5.0f64,
        zeta in 0.001..0.999f64,
    ) {
        let model = LinearModel::new(w).unwrap();
        let noise = NoiseSpec::isotropic(sigma, model.dim()).unwrap();
        let b = norm_bounds(&model, &noise, zeta).unwrap();
        prop_assert!(0.0 <= b.lower && b.lower <= b.upper);
    }

    #[test]
    fn split_partitions_indices(n in 2usize..500, frac in 0.01..0.99f64, seed in any::<u64>()) {
        let (a, b) = split_indices(n, frac, seed).unwrap();
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!((a.clone(), b.clone()), split_indices(n, frac, seed).unwrap());
    }

    #[test]
    fn generated_rows_are_valid(n in 1usize..300, p in 1usize..5, sep in 0.0..5.0f64, seed in any::<u64>()) {
        let d = generate_synthetic(&SyntheticSpec::two_groups(n, p, (0.3, 0.7), sep, seed)).unwrap();
        prop_assert_eq!(d.len(), n);
        for e in d.examples() {
            prop_assert_eq!(e.dim(), p + 1);
            prop_assert_eq!(*e.features().last().unwrap(), 1.0);
        }
    }
}

#[test]
fn expected_accuracy_routes_zero_noise_to_empirical() {
    let d = generate_synthetic(&SyntheticSpec::two_groups(200, 2, (0.5, 0.5), 1.0, 4)).unwrap();
    let model = LinearModel::new(vec![1.0, 0.5, 0.0]).unwrap();
    let zero = NoiseSpec::isotropic(0.0, 3).unwrap();
    let e = expected_accuracy(&model, &zero, d.examples()).unwrap();
    assert_eq!(e, privfair::fairness::empirical_accuracy(&model, d.examples()).unwrap());
}

#[test]
fn sample_runs_ignore_thread_count() {
    let d = generate_synthetic(&SyntheticSpec::two_groups(100, 3, (0.5, 0.5), 1.0, 8)).unwrap();
    let model = LinearModel::new(vec![0.7, -0.2, 0.4, 0.1]).unwrap();
    let noise = NoiseSpec::isotropic(0.8, 4).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_models(&model, &noise, &d, &MeasureKind::ALL, 500, 77).unwrap())
    };
    assert_eq!(run(1), run(4));
}

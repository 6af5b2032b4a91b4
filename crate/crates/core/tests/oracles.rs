use memlab::infotools::fano_c_alpha;
use memlab::multicluster::{
    cluster_size_histogram, sample_multicluster_dataset, sample_prior, tau_ell_closed, tau_ell_monte_carlo,
    FrequencyLaw, MixturePrior,
};
use memlab::probcore::{kl, FinitePmf};
use memlab::problems::ProblemSpec;
use memlab::RngStream;

fn beta_moment(a: f64, b: f64, p: i32, q: i32) -> f64 {
    // Composite Simpson on [0, 1] for ∫ x^{a-1+p} (1-x)^{b-1+q} dx.
    let m = 20_000;
    let f = |x: f64| x.powf(a - 1.0 + f64::from(p)) * (1.0 - x).powf(b - 1.0 + f64::from(q));
    let h = 1.0 / m as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..m {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn beta_tau_matches_numeric_integration() {
    for (a, b) in [(1.0, 1.0), (2.0, 3.0), (1.5, 4.0)] {
        let prior = MixturePrior::new(10, FrequencyLaw::Beta { a, b }).unwrap();
        for n in [3usize, 6] {
            for ell in 0..=n {
                let l = ell as i32;
                let r = (n - ell) as i32;
                let want = beta_moment(a, b, l + 1, r) / beta_moment(a, b, l, r);
                let got = tau_ell_closed(&prior, n, ell).unwrap();
                assert!((got - want).abs() < 1e-6, "a={a} b={b} n={n} l={ell}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn exchangeable_prior_has_mean_one_over_k() {
    let prior = MixturePrior::new(100, FrequencyLaw::Beta { a: 1.0, b: 1.0 }).unwrap();
    let mut rng = RngStream::new(5, 0).rng();
    let draws = 10_000;
    let mut first = 0.0;
    for _ in 0..draws {
        let pi = sample_prior(&prior, &mut rng);
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        first += pi[0];
    }
    assert!((first / draws as f64 - 0.01).abs() <= 0.002);
}

#[test]
fn uniform_prior_counts_are_multinomial() {
    let spec = ProblemSpec::boolean(4, 0.5).unwrap();
    let prior = MixturePrior::new(4, FrequencyLaw::PointMass(1.0)).unwrap();
    let n = 100_000;
    let (_, pi, s) = sample_multicluster_dataset(&spec, &prior, n, &mut RngStream::new(6, 0).rng()).unwrap();
    assert!(pi.iter().all(|p| (p - 0.25).abs() < 1e-15));
    let sigma = (n as f64 * 0.25 * 0.75).sqrt();
    let hist = cluster_size_histogram(&s, 4);
    for (count, ids) in &hist {
        for _ in ids {
            assert!((*count as f64 - n as f64 / 4.0).abs() <= 3.0 * sigma);
        }
    }
    let again = sample_multicluster_dataset(&spec, &prior, 50, &mut RngStream::new(6, 0).rng()).unwrap();
    let twice = sample_multicluster_dataset(&spec, &prior, 50, &mut RngStream::new(6, 0).rng()).unwrap();
    assert_eq!(again.2, twice.2);
}

#[test]
fn posterior_frequencies_sum_to_one() {
    let k = 5;
    let n = 4;
    let prior = MixturePrior::new(k, FrequencyLaw::Beta { a: 1.0, b: 1.0 }).unwrap();
    let trials = 20_000;
    let mut total = 0.0;
    let mut var = 0.0;
    for ell in 0..=n {
        let e = tau_ell_monte_carlo(&prior, n, ell, trials, &RngStream::new(7, 0)).unwrap();
        let mean_size = e.qualifying as f64 / trials as f64;
        total += mean_size * e.estimate;
        var += (mean_size * e.std_error).powi(2);
    }
    assert!((total - 1.0).abs() <= 3.0 * var.sqrt() + 1e-9, "total {total}");
}

#[test]
fn fano_constant_is_bernoulli_divergence() {
    let p = FinitePmf::<f64>::bernoulli(2.0 / 3.0).unwrap();
    let q = FinitePmf::bernoulli(1.0 / 3.0).unwrap();
    let c = fano_c_alpha(1.0 / 3.0).unwrap();
    assert!((kl(&p, &q).unwrap() - c).abs() < 1e-12);
    assert!((c - std::f64::consts::LN_2 / 3.0).abs() < 1e-12);
}

#[test]
fn gaussian_dominating_pipeline_reproduces_training_law() {
    use memlab::reductions::{gaussian_dominating_train, gaussian_train_postprocess};
    let (lambda, n, theta) = (0.5, 3, [1.3]);
    let mut rng = RngStream::new(9, 0).rng();
    let runs = 100_000;
    let (mut s1, mut s11, mut s12) = (0.0, 0.0, 0.0);
    for _ in 0..runs {
        let z = gaussian_dominating_train(&theta, lambda, n, &mut rng).unwrap();
        let data = gaussian_train_postprocess(&z, &mut rng).unwrap();
        let rows = data.as_real().unwrap();
        let c: Vec<f64> = rows.iter().map(|r| r[0] - lambda * theta[0]).collect();
        s1 += c[0];
        s11 += c[0] * c[0];
        s12 += c[0] * c[1];
    }
    let r = runs as f64;
    assert!((s1 / r).abs() < 0.01);
    assert!((s11 / r - (1.0 - lambda * lambda)).abs() < 0.02);
    assert!((s12 / r).abs() < 0.02);
}

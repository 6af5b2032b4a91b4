use std::time::Instant;

use memlab::infotools::{fano_c_alpha, gaussian_noisy_mean_mi_closed_form, gaussian_noisy_mean_mi_monte_carlo, Enumeration};
use memlab::learners::{estimate_learner_error, majority_width, DescriptionBits, Hypothesis, Learner, LearnerSpec};
use memlab::multicluster::{tau_ell_closed, tau_ell_monte_carlo, FrequencyLaw, MixturePrior};
use memlab::probcore::{entropy, entropy_continuity_bound, information_robustness_bound, tv, FiniteChannel, FinitePmf};
use memlab::problems::{sample_dataset, sample_theta, theta_support, ClusterParam, Dataset, ProblemSpec};
use memlab::reductions::{gaussian_expand_mean, information_gap, rr_decompose, verify_rr_decomposition, verify_sparse_full_joint, verify_sparse_postprocess};
use memlab::sdpi::{contraction_coeff_binary_input, lower_bound_curve, CurveParams};
use memlab::RngStream;
use rand::{Rng, RngCore};

fn report(name: &str, pass: bool, detail: String) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

#[test]
fn single_sample_accuracy() {
    let d = 4096;
    let trials = 10_000;
    let lambda = 4.0 * (d as f64).powf(-0.25);
    let nu = 4.0 / (d as f64).sqrt();
    let cases = [
        ("gaussian", ProblemSpec::gaussian(d, lambda).unwrap(), LearnerSpec::GaussianSingleSample),
        ("boolean", ProblemSpec::boolean(d, lambda).unwrap(), LearnerSpec::BooleanSingleSample),
        ("sparse", ProblemSpec::sparse(d, nu).unwrap(), LearnerSpec::SparseConstantCoords { c_ell: 16.0 }),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, (name, spec, learner)) in cases.iter().enumerate() {
        let start = Instant::now();
        let e = estimate_learner_error(learner, spec, 1, trials, &RngStream::new(11, i as u64)).unwrap();
        let secs = start.elapsed().as_secs_f64();
        pass &= e.estimate <= 0.02 && secs <= 120.0;
        detail.push(format!("{name} err={:.4} (±{:.4}, {secs:.1}s)", e.estimate, e.ci_halfwidth));
    }
    report("single_sample_accuracy", pass, detail.join(", "));
}

#[test]
fn noisy_mean_memorization() {
    let lambda = 0.5;
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, n) in [1usize, 4, 16].into_iter().enumerate() {
        let closed = gaussian_noisy_mean_mi_closed_form(64, n, lambda).unwrap();
        let (mc, se) = gaussian_noisy_mean_mi_monte_carlo(64, n, lambda, 10_000, &RngStream::new(21, i as u64)).unwrap();
        let rel = (mc - closed).abs() / closed;
        pass &= rel <= 0.05;
        detail.push(format!("n={n} closed={closed:.4} mc={mc:.4}±{se:.4} rel={rel:.4}"));
    }
    let d = 4096;
    let spec = ProblemSpec::gaussian(d, 4.0 * (d as f64).powf(-0.25)).unwrap();
    for (i, n) in [1usize, 4, 16].into_iter().enumerate() {
        let learner = LearnerSpec::GaussianNoisyMean { c: 4.0 };
        let e = estimate_learner_error(&learner, &spec, n, 10_000, &RngStream::new(22, i as u64)).unwrap();
        pass &= e.estimate <= 0.02;
        detail.push(format!("n={n} err={:.4}", e.estimate));
    }
    report("noisy_mean_memorization", pass, detail.join(", "));
}

#[test]
fn bsc_contraction() {
    let start = Instant::now();
    let input = FinitePmf::from_probs(vec![0.5, 0.5]).unwrap();
    let mut worst = 0.0f64;
    for i in 1..=9 {
        let p = 0.05 * i as f64;
        let ch = FiniteChannel::bsc(input.clone(), p).unwrap();
        let eta = contraction_coeff_binary_input(&ch).unwrap();
        worst = worst.max((eta - (1.0 - 2.0 * p).powi(2)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report("bsc_contraction", worst <= 1e-3 && secs <= 10.0, format!("max gap {worst:.2e} in {secs:.2}s"));
}

#[test]
fn gaussian_tradeoff_tightness() {
    let spec = ProblemSpec::gaussian(4096, 0.5).unwrap();
    let grid: Vec<usize> = (0..=6).map(|k| 1 << k).collect();
    let curve = lower_bound_curve(&spec, 1.0 / 3.0, &grid, &CurveParams::default()).unwrap();
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    for p in &curve {
        pass &= p.lower_nats <= p.upper_nats;
        worst_ratio = worst_ratio.max(p.upper_nats / p.lower_nats);
    }
    pass &= worst_ratio <= 10.0;
    let mut shape_ok = true;
    for w in curve.windows(2) {
        if w[0].in_regime && w[1].in_regime {
            for r in [w[0].lower_nats / w[1].lower_nats, w[0].upper_nats / w[1].upper_nats] {
                shape_ok &= (1.8..=2.2).contains(&r);
            }
        }
    }
    pass &= shape_ok;
    report(
        "gaussian_tradeoff_tightness",
        pass,
        format!("max upper/lower = {worst_ratio:.1} (limit 10), halving shape ok = {shape_ok}"),
    );
}

#[test]
fn sparse_dominating_construction() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut pass = true;
    for nu in [0.1, 0.3] {
        for n in 1..=3 {
            let r = verify_sparse_postprocess(nu, n).unwrap();
            worst = worst.max(r.metrics["tv"]);
            pass &= r.pass && r.metrics["tv"] <= 1e-10;
            for d in 1..=3 {
                let r = verify_sparse_full_joint(d, nu, n).unwrap();
                worst = worst.max(r.metrics["tv"]);
                pass &= r.pass && r.metrics["tv"] <= 1e-10;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= 5.0;
    report("sparse_dominating_construction", pass, format!("max tv {worst:.2e} in {secs:.2}s"));
}

#[test]
fn randomized_response_decomposition() {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (lambda, n, delta) in [(0.05, 4, 0.1), (0.03, 8, 0.05), (0.02, 12, 0.05)] {
        let m = rr_decompose(lambda, n, delta).unwrap();
        let r = verify_rr_decomposition(&m, lambda, n, delta).unwrap();
        pass &= r.pass && m.delta_star <= delta;
        detail.push(format!(
            "({lambda},{n},{delta}) tv=({:.2e},{:.2e}) delta*={:.2e}",
            r.metrics["tv_x"], r.metrics["tv_y"], m.delta_star
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= 10.0;
    report("randomized_response_decomposition", pass, format!("{} in {secs:.2}s", detail.join(", ")));
}

#[test]
fn gaussian_sufficient_statistic() {
    let runs = 100_000;
    let n = 4;
    let mean = [0.7];
    let mut rng = RngStream::new(71, 0).rng();
    let mut worst_mean = 0.0f64;
    let (mut s11, mut s12) = (0.0, 0.0);
    for _ in 0..runs {
        let data = gaussian_expand_mean(&mean, 1.0, n, &mut rng).unwrap();
        let rows = data.as_real().unwrap();
        let xbar = rows.iter().map(|r| r[0]).sum::<f64>() / n as f64;
        worst_mean = worst_mean.max((xbar - mean[0]).abs());
        let c: Vec<f64> = rows.iter().map(|r| r[0] - mean[0]).collect();
        s11 += c[0] * c[0];
        s12 += c[0] * c[1];
    }
    let var = s11 / runs as f64;
    let cov = s12 / runs as f64;
    let pass = worst_mean <= 1e-12 && (var - 0.75).abs() <= 0.02 && (cov + 0.25).abs() <= 0.02;
    report(
        "gaussian_sufficient_statistic",
        pass,
        format!("mean gap {worst_mean:.1e}, var {var:.4} (0.75), cov {cov:.4} (-0.25)"),
    );
}

#[test]
fn tau_coefficients() {
    let prior = MixturePrior::new(20, FrequencyLaw::Beta { a: 1.0, b: 1.0 }).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for ell in 0..=2 {
        let closed = tau_ell_closed(&prior, 5, ell).unwrap();
        let mc = tau_ell_monte_carlo(&prior, 5, ell, 100_000, &RngStream::new(81, ell as u64)).unwrap();
        let z = (mc.estimate - closed).abs() / mc.std_error;
        pass &= z <= 3.0;
        detail.push(format!("l={ell} closed={closed:.4} mc={:.4}±{:.4} z={z:.1}", mc.estimate, mc.std_error));
    }
    let point = MixturePrior::new(20, FrequencyLaw::PointMass(0.5)).unwrap();
    for ell in 0..=2 {
        let mc = tau_ell_monte_carlo(&point, 5, ell, 1000, &RngStream::new(82, ell as u64)).unwrap();
        pass &= (mc.estimate - 1.0 / 20.0).abs() <= 1e-12;
    }
    detail.push("point mass gives 1/k".into());
    report("tau_coefficients", pass, detail.join(", "));
}

/// Match-count classifier around the single sample with a fixed threshold.
struct MatchLearner(f64);

impl Learner for MatchLearner {
    fn fit(&self, data: &Dataset, _rng: &mut dyn RngCore) -> memlab::Result<Hypothesis> {
        let signs = data.as_sign().unwrap()[0].clone();
        Ok(Hypothesis::MajorityThreshold { d: signs.len(), signs, threshold: self.0 })
    }
}

#[test]
fn fano_step_by_enumeration() {
    let alpha = 1.0 / 3.0;
    let c_alpha = fano_c_alpha(alpha).unwrap();
    let battery: Vec<Box<dyn Learner>> = vec![
        Box::new(MatchLearner(-3.0)),
        Box::new(MatchLearner(1.0)),
        Box::new(MatchLearner(3.0)),
        Box::new(LearnerSpec::BooleanMajorityFull),
        Box::new(LearnerSpec::Constant { value: true }),
    ];
    let mut accurate = 0;
    let mut pass = true;
    let mut instances = 0;
    for lambda in [0.6, 0.8, 0.95] {
        let spec = ProblemSpec::boolean(3, lambda).unwrap();
        let support = theta_support(&spec).unwrap();
        for learner in &battery {
            let e = Enumeration::new(learner.as_ref(), &spec, 1, &support).unwrap();
            instances += 1;
            let (test, data) = (e.mi_hypothesis_test(), e.mi_hypothesis_data());
            pass &= test <= data + 1e-12;
            if e.error() <= alpha {
                accurate += 1;
                pass &= test >= c_alpha - 1e-9;
            }
        }
    }
    pass &= accurate > 0;
    report(
        "fano_step_by_enumeration",
        pass,
        format!("{instances} instances, {accurate} accurate, C_alpha = {c_alpha:.4}"),
    );
}

fn random_pmf<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() }).collect();
    let s: f64 = w.iter().sum();
    if s == 0.0 {
        return (0..m).map(|i| f64::from(u8::from(i == 0))).collect();
    }
    w.into_iter().map(|x| x / s).collect()
}

fn nearby<R: Rng>(p: &[f64], rng: &mut R) -> Vec<f64> {
    let q = random_pmf(p.len(), rng);
    let t = rng.random::<f64>().powi(3);
    p.iter().zip(&q).map(|(a, b)| (1.0 - t) * a + t * b).collect()
}

#[test]
fn entropy_continuity_properties() {
    let mut rng = RngStream::new(101, 0).rng();
    let mut violations = (0, 0);
    for _ in 0..1000 {
        let m = rng.random_range(2..=12);
        let p = random_pmf(m, &mut rng);
        let q = nearby(&p, &mut rng);
        let (pp, qq) = (FinitePmf::from_probs(p).unwrap(), FinitePmf::from_probs(q).unwrap());
        let delta = tv(&pp, &qq).unwrap();
        if (entropy(&pp) - entropy(&qq)).abs() > entropy_continuity_bound(delta, m) + 1e-12 {
            violations.0 += 1;
        }
    }
    for _ in 0..1000 {
        let b = rng.random_range(2..=8);
        let outputs = rng.random_range(2..=6);
        let b1 = random_pmf(b, &mut rng);
        let b2 = nearby(&b1, &mut rng);
        let kernel: Vec<Vec<f64>> = (0..b).map(|_| random_pmf(outputs, &mut rng)).collect();
        let (p1, p2) = (FinitePmf::from_probs(b1).unwrap(), FinitePmf::from_probs(b2).unwrap());
        let delta = tv(&p1, &p2).unwrap();
        let gap = information_gap(&p1, &p2, &kernel).unwrap();
        if gap > information_robustness_bound(delta, outputs) + 1e-12 {
            violations.1 += 1;
        }
    }
    report(
        "entropy_continuity_properties",
        violations == (0, 0),
        format!("violations: entropy {}, information {} (of 1000 each)", violations.0, violations.1),
    );
}

#[test]
fn boolean_majority_regime_split() {
    let d = 1024;
    let lambda = 4.0 * (d as f64).powf(-0.25);
    let spec = ProblemSpec::boolean(d, lambda).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    let mut rng = RngStream::new(111, 0).rng();
    for (i, n) in [1usize, 2, 4, 8, 16, 32].into_iter().enumerate() {
        let learner = LearnerSpec::BooleanMajorityProjected { c_sub: 16.0 };
        let e = estimate_learner_error(&learner, &spec, n, 10_000, &RngStream::new(112, i as u64)).unwrap();
        let theta = sample_theta(&spec, &mut rng);
        let data = sample_dataset(&spec, &theta, n, &mut rng).unwrap();
        let h = learner.fit(&data, &mut rng).unwrap();
        let t = majority_width(d, n, 16.0) as u64;
        let bits_ok = matches!(h.description_bits(), DescriptionBits::Finite(b) if b <= t);
        pass &= e.estimate <= 0.02 && bits_ok;
        detail.push(format!("n={n} err={:.4} t={t}", e.estimate));
    }
    let n_full = (8.0 * (d as f64).sqrt() * (d as f64).ln()).ceil() as usize;
    let runs = 200;
    let mut exact = 0;
    for r in 0..runs {
        let mut rng = RngStream::new(113, r).rng();
        let theta = sample_theta(&spec, &mut rng);
        let data = sample_dataset(&spec, &theta, n_full, &mut rng).unwrap();
        let h = LearnerSpec::BooleanMajorityFull.fit(&data, &mut rng).unwrap();
        if let (Hypothesis::MajorityThreshold { signs, .. }, ClusterParam::Boolean(t)) = (&h, &theta) {
            exact += u32::from(signs == t);
        }
    }
    let frac = f64::from(exact) / runs as f64;
    pass &= frac >= 0.99;
    detail.push(format!("full majority at n={n_full}: exact in {frac:.3} of runs"));
    report("boolean_majority_regime_split", pass, detail.join(", "));
}

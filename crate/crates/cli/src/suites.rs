//! The six experiment suites.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use memlab::infotools::{
    gaussian_noisy_mean_mi_closed_form, gaussian_noisy_mean_mi_monte_carlo, mem_exact_small, mem_plugin_mc,
};
use memlab::learners::{estimate_learner_error, LearnerSpec};
use memlab::multicluster::{
    cluster_size_histogram, errn_estimate, error_local_to_global, mem_decomposition_bound, opt_surrogate,
    sample_multicluster_dataset, tau_ell_normalized, train_detectors, MixturePrior, SizeProfile,
};
use memlab::probcore::FiniteChannel;
use memlab::problems::{theta_support, Family, ProblemSpec};
use memlab::reductions::{
    gaussian_expand_mean, rr_decompose, sparse_xi, verify_rr_decomposition, verify_sparse_full_joint,
    verify_sparse_postprocess, VerificationReport,
};
use memlab::sdpi::{
    boolean_sdpi_coeffs, contraction_coeff_binary_input, excess_mem_bound, excess_mem_bound_direct,
    gaussian_sdpi_coeffs, lower_bound_curve, sparse_theta_entropy, CurveParams, LogArgument, SdpiBound,
};
use memlab::{Error, Pmf, RngStream};

use crate::config::{ExperimentConfig, LearnerChoice, Suite};
use crate::output::{Cell, Table};
use crate::CliError;

pub struct SuiteOutput {
    pub table: Table,
    pub log: Vec<VerificationReport>,
}

pub fn run_suite(cfg: &ExperimentConfig, bits: bool) -> Result<SuiteOutput, CliError> {
    let root = RngStream::new(cfg.seed, 0).named(cfg.suite.file_stem());
    let unit = if bits { LN_2 } else { 1.0 };
    let out = match cfg.suite {
        Suite::SimulateError => simulate_error(cfg, &root)?,
        Suite::MemUpper => mem_upper(cfg, &root, unit)?,
        Suite::SdpiConst => sdpi_const(cfg, unit)?,
        Suite::Tradeoff => tradeoff(cfg, unit)?,
        Suite::VerifyReductions => verify_reductions(cfg, &root)?,
        Suite::Multicluster => multicluster(cfg, &root, unit)?,
    };
    Ok(if bits { out.in_bits() } else { out })
}

impl SuiteOutput {
    fn in_bits(mut self) -> Self {
        for h in &mut self.table.header {
            if let Some(stem) = h.strip_suffix("_nats") {
                *h = format!("{stem}_bits");
            }
        }
        self.table.units = "bits";
        self
    }

    fn table(table: Table) -> Self {
        Self { table, log: Vec::new() }
    }
}

fn param(spec: &ProblemSpec) -> f64 {
    match spec.family {
        Family::SparseBoolean => spec.nu(),
        _ => spec.lambda(),
    }
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Gaussian => "gaussian",
        Family::Boolean => "boolean",
        Family::SparseBoolean => "sparse_boolean",
    }
}

fn learner_for(cfg: &ExperimentConfig, choice: Option<LearnerChoice>) -> Result<LearnerSpec, CliError> {
    let k = &cfg.constants;
    let family = cfg.problem.family;
    let choice = choice.unwrap_or(match family {
        Family::Gaussian => LearnerChoice::NoisyMean,
        Family::Boolean => LearnerChoice::MajorityProjected,
        Family::SparseBoolean => LearnerChoice::ConstantCoords,
    });
    let spec = match (family, choice) {
        (Family::Gaussian, LearnerChoice::SingleSample) => LearnerSpec::GaussianSingleSample,
        (Family::Gaussian, LearnerChoice::NoisyMean) => LearnerSpec::GaussianNoisyMean { c: k.c },
        (Family::Gaussian, LearnerChoice::ProjectedQuantized) => {
            LearnerSpec::GaussianProjectedQuantized { k_bits: cfg.k_bits, lambda: cfg.spec().lambda() }
        }
        (Family::Boolean, LearnerChoice::SingleSample) => LearnerSpec::BooleanSingleSample,
        (Family::Boolean, LearnerChoice::MajorityProjected) => LearnerSpec::BooleanMajorityProjected { c_sub: k.c_sub },
        (Family::Boolean, LearnerChoice::MajorityFull) => LearnerSpec::BooleanMajorityFull,
        (Family::SparseBoolean, LearnerChoice::SingleSample | LearnerChoice::ConstantCoords) => {
            LearnerSpec::SparseConstantCoords { c_ell: k.c_ell }
        }
        (f, c) => return Err(CliError::Config(format!("learner: {c:?} does not apply to {f:?}"))),
    };
    Ok(spec)
}

fn simulate_error(cfg: &ExperimentConfig, root: &RngStream) -> Result<SuiteOutput, CliError> {
    let spec = cfg.spec();
    let learner = learner_for(cfg, cfg.learner)?;
    let mut t = Table::new(&["family", "d", "n", "param", "learner", "trials", "error", "ci_halfwidth"]);
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let e = estimate_learner_error(&learner, &spec, n, cfg.trials, &root.child(i as u64))?;
        t.push(vec![
            family_name(spec.family).into(),
            spec.d.into(),
            n.into(),
            param(&spec).into(),
            Cell::Text(format!("{learner:?}")),
            cfg.trials.into(),
            e.estimate.into(),
            e.ci_halfwidth.into(),
        ]);
    }
    Ok(SuiteOutput::table(t))
}

fn mem_upper(cfg: &ExperimentConfig, root: &RngStream, unit: f64) -> Result<SuiteOutput, CliError> {
    let spec = cfg.spec();
    let learner = learner_for(cfg, cfg.learner)?;
    let mut t = Table::new(&["family", "d", "n", "learner", "method", "mem_nats", "std_error_nats", "note"]);
    let support = if spec.is_sign_valued() { theta_support(&spec).ok() } else { None };
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let stream = root.child(i as u64);
        let name = Cell::Text(format!("{learner:?}"));
        let row = |method: &str, v: f64, se: f64, note: String| {
            vec![
                family_name(spec.family).into(),
                spec.d.into(),
                n.into(),
                name.clone(),
                Cell::Text(method.into()),
                (v / unit).into(),
                (se / unit).into(),
                Cell::Text(note),
            ]
        };
        if let LearnerSpec::GaussianNoisyMean { .. } = learner {
            let l = spec.lambda();
            let closed = gaussian_noisy_mean_mi_closed_form(spec.d, n, l)?;
            t.push(row("closed_form", closed, 0.0, "I(h; X_1:n | theta) of the noisy mean".into()));
            let (mc, se) = gaussian_noisy_mean_mi_monte_carlo(spec.d, n, l, cfg.trials.max(2), &stream)?;
            t.push(row("monte_carlo_kl", mc, se, "average Gaussian KL over sampled means".into()));
            continue;
        }
        if let (Some(sup), true) = (&support, learner_is_deterministic(&learner)) {
            match mem_exact_small(&learner, &spec, n, sup) {
                Ok(m) => {
                    t.push(row("exact", m.value, 0.0, "full enumeration".into()));
                    continue;
                }
                Err(Error::Budget(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
        match mem_plugin_mc(&learner, &spec, n, cfg.trials.min(32), (cfg.trials / 32).max(1), &stream) {
            Ok(m) => t.push(row("plugin_mc", m.value, m.std_error, m.bias_note)),
            Err(Error::Unsupported(msg)) => t.push(row("unbounded", f64::INFINITY, 0.0, msg)),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(SuiteOutput::table(t))
}

fn learner_is_deterministic(l: &LearnerSpec) -> bool {
    memlab::learners::Learner::is_deterministic(l)
}

fn ln_model_space(cfg: &ExperimentConfig) -> f64 {
    cfg.constants.ln_model_space.unwrap_or(cfg.problem.d as f64 * LN_2)
}

fn sdpi_const(cfg: &ExperimentConfig, unit: f64) -> Result<SuiteOutput, CliError> {
    let spec = cfg.spec();
    let k = &cfg.constants;
    let ln_m = ln_model_space(cfg);
    let mut t = Table::new(&[
        "family", "d", "n", "param", "tau", "rho", "delta", "excess_bound_nats", "in_regime", "notes",
    ]);
    let mut log = Vec::new();
    for &n in &cfg.n_grid {
        let (tau, rho, delta, bound, in_regime, notes) = match spec.family {
            Family::Gaussian => match gaussian_sdpi_coeffs(spec.lambda(), n) {
                Ok((tau, rho)) => {
                    let b = SdpiBound { rho_n: rho, tau_n: tau, delta_n: 0.0, eps_n: 0.0, n, log_model_space: ln_m };
                    (tau, rho, 0.0, excess_mem_bound(&b, k.alpha)?, true, String::new())
                }
                Err(e) => (f64::NAN, f64::NAN, 0.0, f64::NAN, false, e.to_string()),
            },
            Family::Boolean => {
                match boolean_sdpi_coeffs(spec.lambda(), n, k.delta, spec.d, LogArgument::InvDelta) {
                    Ok(c) => {
                        let b = SdpiBound {
                            rho_n: c.rho,
                            tau_n: c.tau,
                            delta_n: c.tv_slack,
                            eps_n: 0.0,
                            n,
                            log_model_space: ln_m,
                        };
                        let bound = excess_mem_bound(&b, k.alpha)?;
                        (c.tau, c.rho, c.tv_slack, bound, true, format!("xi={}", c.xi))
                    }
                    Err(Error::Regime(msg)) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, false, msg),
                    Err(e) => return Err(e.into()),
                }
            }
            Family::SparseBoolean => {
                let xi = sparse_xi(spec.nu(), n)?;
                let rho = 4.0 * xi * xi;
                let h = sparse_theta_entropy(spec.d, spec.nu());
                let bound = excess_mem_bound_direct(rho, 0.0, ln_m, k.alpha, h)?;
                let input = Pmf::from_probs(vec![0.5, 0.5])?;
                let eta = contraction_coeff_binary_input(&FiniteChannel::bsc(input, 0.5 - xi)?)?;
                let gap = (eta - rho).abs();
                log.push(report("bsc_contraction", &[("xi", xi), ("n", n as f64)], &[("gap", gap)], gap <= 1e-3));
                (f64::NAN, rho, 0.0, bound, true, format!("xi={xi};H_theta={h};bound_unclamped"))
            }
        };
        t.push(vec![
            family_name(spec.family).into(),
            spec.d.into(),
            n.into(),
            param(&spec).into(),
            tau.into(),
            rho.into(),
            delta.into(),
            (bound / unit).into(),
            in_regime.into(),
            Cell::Text(notes),
        ]);
    }
    Ok(SuiteOutput { table: t, log })
}

fn curve_params(cfg: &ExperimentConfig) -> CurveParams {
    CurveParams {
        c_sub: cfg.constants.c_sub,
        c_ell: cfg.constants.c_ell,
        ln_model_space: cfg.constants.ln_model_space,
        ..CurveParams::default()
    }
}

fn tradeoff(cfg: &ExperimentConfig, unit: f64) -> Result<SuiteOutput, CliError> {
    let spec = cfg.spec();
    let alpha = cfg.constants.alpha;
    let curve = lower_bound_curve(&spec, alpha, &cfg.n_grid, &curve_params(cfg))?;
    let mut t = Table::new(&["family", "d", "n", "lambda", "lower_nats", "upper_nats", "alpha", "flags"]);
    for p in curve {
        let flags = format!("in_regime={};{}", p.in_regime, p.annotations);
        t.push(vec![
            family_name(spec.family).into(),
            spec.d.into(),
            p.n.into(),
            param(&spec).into(),
            (p.lower_nats / unit).into(),
            (p.upper_nats / unit).into(),
            alpha.into(),
            Cell::Text(flags),
        ]);
    }
    Ok(SuiteOutput::table(t))
}

fn report(check: &str, params: &[(&str, f64)], metrics: &[(&str, f64)], pass: bool) -> VerificationReport {
    let map = |kv: &[(&str, f64)]| kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    VerificationReport { check: check.into(), params: map(params), metrics: map(metrics), pass }
}

fn verify_reductions(cfg: &ExperimentConfig, root: &RngStream) -> Result<SuiteOutput, CliError> {
    let mut log = Vec::new();
    for (lambda, n, delta) in [(0.05, 4, 0.1), (0.03, 8, 0.05), (0.02, 12, 0.05)] {
        log.push(verify_rr_decomposition(&rr_decompose(lambda, n, delta)?, lambda, n, delta)?);
    }
    for nu in [0.1, 0.3] {
        for n in 1..=3 {
            log.push(verify_sparse_postprocess(nu, n)?);
        }
        for d in 1..=3 {
            log.push(verify_sparse_full_joint(d, nu, 2)?);
        }
    }
    let mut rng = root.named("expand").rng();
    let runs = cfg.trials.min(1000);
    let mut gap = 0.0f64;
    let mean = vec![0.5, -1.0, 2.0];
    for _ in 0..runs {
        let data = gaussian_expand_mean(&mean, 1.0, 4, &mut rng)?;
        let rows = data.as_real().expect("real data");
        for (i, m) in mean.iter().enumerate() {
            gap = gap.max((rows.iter().map(|r| r[i]).sum::<f64>() / 4.0 - m).abs());
        }
    }
    log.push(report("gaussian_expand_mean", &[("n", 4.0), ("runs", runs as f64)], &[("max_mean_gap", gap)], gap <= 1e-12));
    let input = Pmf::from_probs(vec![0.5, 0.5])?;
    let mut worst = 0.0f64;
    for i in 1..=9 {
        let p = 0.05 * f64::from(i);
        let eta = contraction_coeff_binary_input(&FiniteChannel::bsc(input.clone(), p)?)?;
        worst = worst.max((eta - (1.0 - 2.0 * p).powi(2)).abs());
    }
    log.push(report("bsc_contraction", &[("grid", 9.0)], &[("max_gap", worst)], worst <= 1e-3));
    let mut t = Table::new(&["check", "params", "metrics", "pass"]);
    for r in &log {
        let kv = |m: &BTreeMap<String, f64>| {
            m.iter().map(|(k, v)| format!("{k}={}", crate::output::format_float(*v))).collect::<Vec<_>>().join(";")
        };
        t.push(vec![Cell::Text(r.check.clone()), Cell::Text(kv(&r.params)), Cell::Text(kv(&r.metrics)), r.pass.into()]);
    }
    Ok(SuiteOutput { table: t, log })
}

fn multicluster(cfg: &ExperimentConfig, root: &RngStream, unit: f64) -> Result<SuiteOutput, CliError> {
    let spec = cfg.spec();
    let m = cfg.multicluster.as_ref().expect("validated");
    let prior = MixturePrior::new(m.k, m.prior.clone())?;
    let k = &cfg.constants;
    let learner = learner_for(cfg, Some(LearnerChoice::SingleSample))?;
    let mut t = Table::new(&["n", "ell", "clusters", "tau", "errn", "mem_nats", "contribution_nats"]);
    let mut log = Vec::new();
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let stream = root.child(i as u64);
        let (thetas, pi, s) = sample_multicluster_dataset(&spec, &prior, n, &mut stream.named("data").rng())?;
        let hist = cluster_size_histogram(&s, m.k);
        let detectors = train_detectors(&learner, &s, &stream.named("opt"))?;
        let curve_grid: Vec<usize> = hist.keys().copied().filter(|&l| l >= 1).collect();
        let mut mem: BTreeMap<usize, f64> = BTreeMap::from([(0, 0.0)]);
        if !curve_grid.is_empty() {
            for p in lower_bound_curve(&spec, k.alpha, &curve_grid, &curve_params(cfg))? {
                mem.insert(p.n, p.lower_nats);
            }
        }
        let mut profile = BTreeMap::new();
        let mut taus = BTreeMap::new();
        let mut errns = BTreeMap::new();
        for (&ell, ids) in &hist {
            let tau = tau_ell_normalized(&prior, n, ell, cfg.trials, &stream.named("tau").child(ell as u64))?;
            let e = errn_estimate(&detectors, &spec, &thetas, &s, ell, cfg.trials, m.null_term, &stream.named("errn").child(ell as u64))?;
            let sp = SizeProfile { clusters: ids.len(), errn: e.value };
            let contribution = k.c_p * ((sp.clusters as f64 - 2.0 * sp.errn) * mem[&ell]).max(0.0);
            t.push(vec![
                n.into(),
                ell.into(),
                ids.len().into(),
                tau.into(),
                e.value.into(),
                (mem[&ell] / unit).into(),
                (contribution / unit).into(),
            ]);
            profile.insert(ell, sp);
            taus.insert(ell, tau);
            errns.insert(ell, e.value);
        }
        let total = mem_decomposition_bound(&mem, &[profile], k.c_p)?;
        let opt = opt_surrogate(&learner, &spec, &thetas, &pi, &s, cfg.trials, &stream.named("opt"))?;
        let err_lb = error_local_to_global(opt, &taus, &errns, m.k, k.c_k)?;
        log.push(report(
            "multicluster_summary",
            &[("n", n as f64), ("k", m.k as f64)],
            &[("mem_lower", total / unit), ("opt_surrogate_upper", opt), ("err_lower", err_lb)],
            true,
        ));
    }
    Ok(SuiteOutput { table: t, log })
}

//! Memorization and mutual-information estimation.
//!
//! Three routes are offered: exact enumeration for small sign-valued
//! instances, closed forms for the noisy-mean learner, and plug-in Monte Carlo
//! over encoded hypotheses. Hypotheses are identified by their canonical
//! encoding bytes.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::learners::{Hypothesis, Learner};
use crate::probcore::{entropy_of, gaussian_kl, joint_mutual_information, GaussianSpec};
use crate::problems::{
    atom_signs, exact_positive_probs, sample_dataset, sample_theta, theta_support, ClusterParam,
    Dataset, ProblemSpec, PointRef,
};
use crate::rng::RngStream;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemMethod {
    ExactEnumeration,
    ClosedForm,
    PluginMC,
    EntropyUpperBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemEstimate {
    pub value: f64,
    pub method: MemMethod,
    pub trials: usize,
    pub bias_note: String,
    /// Standard error across θ draws; zero for exact methods.
    pub std_error: f64,
}

/// `C_α = (1 − 2α)·ln((1 − α)/α)`.
pub fn fano_c_alpha<T: Real>(alpha: T) -> Result<T> {
    let half = T::lit(0.5);
    if !(alpha > T::zero() && alpha <= half) {
        return invalid("alpha must lie in (0, 1/2]");
    }
    let one = T::one();
    Ok((one - T::lit(2.0) * alpha) * ((one - alpha) / alpha).ln())
}

/// `(d/2)·ln(1 + (1 − λ²)/n)`, the conditional information of the noisy mean.
pub fn gaussian_noisy_mean_mi_closed_form<T: Real>(d: usize, n: usize, lambda: T) -> Result<T> {
    if d == 0 || n == 0 {
        return invalid("d and n must be at least 1");
    }
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return invalid("lambda must lie in [0, 1]");
    }
    let s2 = (T::one() - lambda * lambda) / T::lit(n as f64);
    Ok(T::lit(d as f64) / T::lit(2.0) * s2.ln_1p())
}

/// Monte Carlo mean and standard error of `E KL(N(X̄, I) ‖ N(λθ, (1 + σ²)I))`
/// with `X̄ ~ N(λθ, σ²I)`, `σ² = (1 − λ²)/n`.
pub fn gaussian_noisy_mean_mi_monte_carlo(
    d: usize,
    n: usize,
    lambda: f64,
    samples: usize,
    stream: &RngStream,
) -> Result<(f64, f64)> {
    if d == 0 || n == 0 || samples < 2 {
        return invalid("need d, n ≥ 1 and at least two samples");
    }
    if !(0.0..1.0).contains(&lambda) {
        return invalid("lambda must lie in [0, 1)");
    }
    let s2 = (1.0 - lambda * lambda) / n as f64;
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let center: Vec<f64> =
                (0..d).map(|_| lambda * rng.sample::<f64, _>(StandardNormal)).collect();
            let mean: Vec<f64> = center
                .iter()
                .map(|&c| c + s2.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let a = GaussianSpec::new(mean, 1.0).expect("valid");
            let b = GaussianSpec::new(center, 1.0 + s2).expect("valid");
            gaussian_kl(&a, &b).expect("same dimension")
        })
        .collect();
    Ok(mean_and_se(&values))
}

pub(crate) fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Enumeration budget on `(2^d)^n · |support|`.
pub const ENUM_BUDGET: u64 = 1 << 24;

/// Exact joint law of `(θ, X_{1:n}, h, X^test)` for a deterministic learner on
/// a small sign-valued instance.
pub struct Enumeration {
    d: usize,
    weights: Vec<f64>,
    /// Positive-sample pmf over `2^d` atoms, per θ.
    positive: Vec<Vec<f64>>,
    /// Hypothesis law per θ.
    hyp_given_theta: Vec<Vec<f64>>,
    /// Hypothesis index of every dataset.
    hyp_of: Vec<usize>,
    /// Dataset law per θ.
    data_given_theta: Vec<Vec<f64>>,
    hyps: Vec<Hypothesis>,
}

impl Enumeration {
    pub fn new(
        learner: &dyn Learner,
        spec: &ProblemSpec,
        n: usize,
        support: &[(ClusterParam, f64)],
    ) -> Result<Self> {
        if !spec.is_sign_valued() {
            return Err(Error::Unsupported("enumeration needs a sign-valued family".into()));
        }
        if !learner.is_deterministic() {
            return Err(Error::Unsupported("enumeration needs a deterministic learner".into()));
        }
        if n == 0 || support.is_empty() {
            return invalid("need n ≥ 1 and a nonempty θ support");
        }
        let bits = spec.d * n;
        if bits >= 40 || (1u64 << bits).saturating_mul(support.len() as u64) > ENUM_BUDGET {
            return Err(Error::Unsupported("instance exceeds the enumeration budget".into()));
        }
        let d = spec.d;
        let count = 1usize << bits;
        let mask = (1u64 << d) - 1;
        let mut ids: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut hyps = Vec::new();
        let mut hyp_of = Vec::with_capacity(count);
        let mut rng = RngStream::new(0, 0).rng();
        for idx in 0..count as u64 {
            let rows = (0..n).map(|j| atom_signs(idx >> (j * d) & mask, d)).collect();
            let h = learner.fit(&Dataset::sign(rows)?, &mut rng)?;
            let key = h.encode();
            let next = ids.len();
            let id = *ids.entry(key).or_insert(next);
            if id == hyps.len() {
                hyps.push(h);
            }
            hyp_of.push(id);
        }
        let mut weights = Vec::new();
        let mut positive = Vec::new();
        let mut hyp_given_theta = Vec::new();
        let mut data_given_theta = Vec::new();
        for (theta, w) in support {
            let p = exact_positive_probs(spec, theta)?;
            let data: Vec<f64> = (0..count as u64)
                .map(|idx| (0..n).map(|j| p[(idx >> (j * d) & mask) as usize]).product())
                .collect();
            let mut q = vec![0.0; hyps.len()];
            for (&h, &pd) in hyp_of.iter().zip(&data) {
                q[h] += pd;
            }
            weights.push(*w);
            positive.push(p);
            hyp_given_theta.push(q);
            data_given_theta.push(data);
        }
        Ok(Self { d, weights, positive, hyp_given_theta, hyp_of, data_given_theta, hyps })
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hyps
    }

    /// `I(h; X_{1:n} | θ)`, equal to `H(h | θ)` for a deterministic learner.
    pub fn mem(&self) -> f64 {
        self.weights.iter().zip(&self.hyp_given_theta).map(|(w, q)| w * entropy_of(q)).sum()
    }

    /// `I(h; X_{1:n})` from the joint of hypothesis and dataset.
    pub fn mi_hypothesis_data(&self) -> f64 {
        let mut joint = vec![vec![0.0; self.hyp_of.len()]; self.hyps.len()];
        for (w, data) in self.weights.iter().zip(&self.data_given_theta) {
            for (i, (&h, &pd)) in self.hyp_of.iter().zip(data).enumerate() {
                joint[h][i] += w * pd;
            }
        }
        joint_mutual_information(&joint)
    }

    /// `I(h; θ)`.
    pub fn mi_hypothesis_theta(&self) -> f64 {
        let joint: Vec<Vec<f64>> = self
            .weights
            .iter()
            .zip(&self.hyp_given_theta)
            .map(|(w, q)| q.iter().map(|x| w * x).collect())
            .collect();
        joint_mutual_information(&joint)
    }

    /// `I(h; X)` for a fresh positive test point `X ~ P_θ`.
    pub fn mi_hypothesis_test(&self) -> f64 {
        let atoms = 1usize << self.d;
        let mut joint = vec![vec![0.0; atoms]; self.hyps.len()];
        for ((w, q), p) in self.weights.iter().zip(&self.hyp_given_theta).zip(&self.positive) {
            for (h, &qh) in q.iter().enumerate() {
                if qh == 0.0 {
                    continue;
                }
                for (x, &px) in p.iter().enumerate() {
                    joint[h][x] += w * qh * px;
                }
            }
        }
        joint_mutual_information(&joint)
    }

    /// Exact `err(A, P)` on the enumerated prior.
    pub fn error(&self) -> f64 {
        let atoms = 1usize << self.d;
        let mut null = vec![0.0; atoms];
        for (w, p) in self.weights.iter().zip(&self.positive) {
            for (a, &x) in null.iter_mut().zip(p) {
                *a += w * x;
            }
        }
        let preds: Vec<Vec<bool>> = self
            .hyps
            .iter()
            .map(|h| {
                (0..atoms as u64)
                    .map(|a| h.predict(PointRef::Sign(&atom_signs(a, self.d))))
                    .collect()
            })
            .collect();
        let false_pos: Vec<f64> = preds
            .iter()
            .map(|pr| pr.iter().zip(&null).filter(|(&y, _)| y).map(|(_, &p)| p).sum())
            .collect();
        let mut err = 0.0;
        for ((w, q), p) in self.weights.iter().zip(&self.hyp_given_theta).zip(&self.positive) {
            for (h, &qh) in q.iter().enumerate() {
                let miss: f64 =
                    preds[h].iter().zip(p).filter(|(&y, _)| !y).map(|(_, &px)| px).sum();
                err += w * qh * 0.5 * (miss + false_pos[h]);
            }
        }
        err
    }
}

pub fn mem_exact_small(
    learner: &dyn Learner,
    spec: &ProblemSpec,
    n: usize,
    theta_support: &[(ClusterParam, f64)],
) -> Result<MemEstimate> {
    let e = Enumeration::new(learner, spec, n, theta_support)?;
    Ok(MemEstimate {
        value: e.mem().max(0.0),
        method: MemMethod::ExactEnumeration,
        trials: 0,
        bias_note: String::new(),
        std_error: 0.0,
    })
}

/// Exact `I(h; X^test)` under the family's full prior.
pub fn mi_hypothesis_test_exact(learner: &dyn Learner, spec: &ProblemSpec, n: usize) -> Result<f64> {
    Ok(Enumeration::new(learner, spec, n, &theta_support(spec)?)?.mi_hypothesis_test())
}

/// Plug-in estimate of `H(h | θ)` over encoded hypotheses with the
/// Miller–Madow correction `(K − 1)/(2N)`, averaged over θ draws.
pub fn mem_plugin_mc(
    learner: &dyn Learner,
    spec: &ProblemSpec,
    n: usize,
    theta_trials: usize,
    data_trials: usize,
    stream: &RngStream,
) -> Result<MemEstimate> {
    if !learner.finite_description() {
        return Err(Error::Unsupported("learner outputs have no finite description".into()));
    }
    if theta_trials == 0 || data_trials == 0 || n == 0 {
        return invalid("trials and n must be at least 1");
    }
    let per_theta: Vec<Result<(f64, usize)>> = (0..theta_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.child(t as u64).rng();
            let theta = sample_theta(spec, &mut rng);
            let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
            for _ in 0..data_trials {
                let data = sample_dataset(spec, &theta, n, &mut rng)?;
                *counts.entry(learner.fit(&data, &mut rng)?.encode()).or_default() += 1;
            }
            let total = data_trials as f64;
            let probs: Vec<f64> = counts.values().map(|&c| c as f64 / total).collect();
            let k = counts.len();
            Ok((entropy_of(&probs) + (k as f64 - 1.0) / (2.0 * total), k))
        })
        .collect();
    let mut values = Vec::with_capacity(theta_trials);
    let mut max_k = 0;
    for r in per_theta {
        let (v, k) = r?;
        values.push(v);
        max_k = max_k.max(k);
    }
    let (value, std_error) = mean_and_se(&values);
    let mut bias_note = String::from("plug-in H(h|theta) with Miller-Madow correction");
    if !learner.is_deterministic() {
        bias_note.push_str("; randomized learner, value upper-estimates I(h; X | theta)");
    }
    if 2 * max_k > data_trials {
        bias_note.push_str(&format!(
            "; support saturation: {max_k} distinct hypotheses in {data_trials} draws"
        ));
    }
    Ok(MemEstimate {
        value: value.max(0.0),
        method: MemMethod::PluginMC,
        trials: theta_trials * data_trials,
        bias_note,
        std_error,
    })
}

/// Memorization ceiling `description_bits·ln 2` of a single hypothesis.
pub fn mem_entropy_ceiling(h: &Hypothesis) -> MemEstimate {
    MemEstimate {
        value: h.description_bits().nats(),
        method: MemMethod::EntropyUpperBound,
        trials: 0,
        bias_note: "entropy of the description length".into(),
        std_error: 0.0,
    }
}

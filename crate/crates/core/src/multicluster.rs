//! Mixtures of many clusters with random frequencies.
//!
//! Frequencies are drawn as `p_1, …, p_k` i.i.d. from a law on `[0, 1]` and
//! normalized to `π`. Examples carry their cluster id.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::infotools::mean_and_se;
use crate::learners::{Hypothesis, Learner};
use crate::problems::{sample_theta, ClusterLaw, ClusterParam, Dataset, Point, PointRef, ProblemSpec, BLOCK};
use crate::rng::RngStream;

/// Law of each unnormalized frequency `p_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FrequencyLaw {
    PointMass(f64),
    Beta { a: f64, b: f64 },
    DiscreteGrid { values: Vec<f64>, weights: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixturePrior {
    pub k: usize,
    pub law: FrequencyLaw,
}

impl MixturePrior {
    pub fn new(k: usize, law: FrequencyLaw) -> Result<Self> {
        if k == 0 {
            return invalid("k must be positive");
        }
        match &law {
            FrequencyLaw::PointMass(q) if !(*q > 0.0 && *q <= 1.0) => {
                return invalid("point mass must lie in (0, 1]");
            }
            FrequencyLaw::Beta { a, b } if !(*a > 0.0 && *b > 0.0) => {
                return invalid("beta parameters must be positive");
            }
            FrequencyLaw::DiscreteGrid { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return invalid("grid values and weights must be nonempty and aligned");
                }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return invalid("grid values must lie in [0, 1]");
                }
                let s: f64 = weights.iter().sum();
                if weights.iter().any(|w| !(*w >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                    return invalid("grid weights must form a pmf");
                }
                if values.iter().zip(weights).all(|(v, w)| *v == 0.0 || *w == 0.0) {
                    return invalid("grid puts all mass on zero");
                }
            }
            _ => {}
        }
        Ok(Self { k, law })
    }

    /// Draws one unnormalized frequency.
    pub fn sample_p<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            FrequencyLaw::PointMass(q) => *q,
            FrequencyLaw::Beta { a, b } => Beta::new(*a, *b).expect("validated").sample(rng),
            FrequencyLaw::DiscreteGrid { values, weights } => {
                values[WeightedIndex::new(weights).expect("validated").sample(rng)]
            }
        }
    }
}

/// `π_i = p_i / Σ p_j`, resampling the rare all-zero draw.
pub fn sample_prior<R: Rng + ?Sized>(prior: &MixturePrior, rng: &mut R) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..prior.k).map(|_| prior.sample_p(rng)).collect();
        let s: f64 = p.iter().sum();
        if s > 0.0 {
            return p.into_iter().map(|x| x / s).collect();
        }
    }
}

fn check_ell(n: usize, ell: usize) -> Result<()> {
    if ell > n {
        return invalid(format!("ell = {ell} exceeds n = {n}"));
    }
    Ok(())
}

fn moment_ratio(num: f64, den: f64) -> Result<f64> {
    if !(den > 0.0) {
        return Err(Error::UndefinedCoefficient("zero denominator in tau".into()));
    }
    Ok(num / den)
}

/// `E[α^{ℓ+1}(1−α)^{n−ℓ}] / E[α^ℓ(1−α)^{n−ℓ}]` with `α` drawn from the
/// unnormalized frequency law.
pub fn tau_ell_closed(prior: &MixturePrior, n: usize, ell: usize) -> Result<f64> {
    check_ell(n, ell)?;
    let m = |a: f64| a.powi(ell as i32) * (1.0 - a).powi((n - ell) as i32);
    match &prior.law {
        FrequencyLaw::PointMass(q) => moment_ratio(q * m(*q), m(*q)),
        FrequencyLaw::Beta { a, b } => Ok((a + ell as f64) / (a + b + n as f64)),
        FrequencyLaw::DiscreteGrid { values, weights } => {
            let num = values.iter().zip(weights).map(|(v, w)| w * v * m(*v)).sum();
            let den = values.iter().zip(weights).map(|(v, w)| w * m(*v)).sum();
            moment_ratio(num, den)
        }
    }
}

/// The same ratio with `α` distributed as a normalized frequency `π_1`,
/// estimated from `samples` prior draws. A point mass gives exactly `1/k`.
pub fn tau_ell_normalized(
    prior: &MixturePrior,
    n: usize,
    ell: usize,
    samples: usize,
    stream: &RngStream,
) -> Result<f64> {
    check_ell(n, ell)?;
    if let FrequencyLaw::PointMass(_) = prior.law {
        return Ok(1.0 / prior.k as f64);
    }
    if samples == 0 {
        return invalid("samples must be positive");
    }
    let blocks = samples.div_ceil(BLOCK);
    let (num, den) = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.child(b as u64).rng();
            let (mut num, mut den) = (0.0, 0.0);
            for _ in 0..BLOCK.min(samples - b * BLOCK) {
                let a = sample_prior(prior, &mut rng)[0];
                let w = a.powi(ell as i32) * (1.0 - a).powi((n - ell) as i32);
                num += a * w;
                den += w;
            }
            (num, den)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |(x, y), (a, b)| (x + a, y + b));
    moment_ratio(num, den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Number of (trial, cluster) pairs with exactly `ℓ` occurrences.
    pub qualifying: u64,
    pub trials: usize,
}

/// Draws `π` and `n` cluster ids per trial and averages `π_u` over every
/// cluster `u` seen exactly `ℓ` times. The standard error is the delta-method
/// error of the resulting ratio estimator.
pub fn tau_ell_monte_carlo(
    prior: &MixturePrior,
    n: usize,
    ell: usize,
    trials: usize,
    stream: &RngStream,
) -> Result<TauEstimate> {
    check_ell(n, ell)?;
    if trials < 1000 {
        return invalid("at least 1000 trials are required");
    }
    let blocks = trials.div_ceil(BLOCK);
    let per_trial: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = stream.child(b as u64).rng();
            let m = BLOCK.min(trials - b * BLOCK);
            (0..m)
                .map(|_| {
                    let pi = sample_prior(prior, &mut rng);
                    let idx = WeightedIndex::new(&pi).expect("normalized");
                    let mut counts = vec![0usize; prior.k];
                    for _ in 0..n {
                        counts[idx.sample(&mut rng)] += 1;
                    }
                    counts.iter().zip(&pi).filter(|(c, _)| **c == ell).fold(
                        (0.0, 0.0),
                        |(s, c), (_, p)| (s + p, c + 1.0),
                    )
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let total_n: f64 = per_trial.iter().map(|t| t.1).sum();
    if total_n == 0.0 {
        return Err(Error::InsufficientData(format!("no cluster appeared exactly {ell} times")));
    }
    let total_s: f64 = per_trial.iter().map(|t| t.0).sum();
    let r = total_s / total_n;
    let resid: Vec<f64> = per_trial.iter().map(|(s, c)| s - r * c).collect();
    let (_, se_resid) = mean_and_se(&resid);
    let nbar = total_n / trials as f64;
    Ok(TauEstimate { estimate: r, std_error: se_resid / nbar, qualifying: total_n as u64, trials })
}

/// Examples labeled with their cluster id in `0..k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiDataset {
    pub k: usize,
    pub entries: Vec<(Point, usize)>,
}

impl MultiDataset {
    pub fn new(k: usize, entries: Vec<(Point, usize)>) -> Result<Self> {
        if entries.iter().any(|(_, i)| *i >= k) {
            return invalid("cluster id out of range");
        }
        if let Some((first, _)) = entries.first() {
            let d = first.as_ref().dim();
            if entries.iter().any(|(x, _)| x.as_ref().dim() != d) {
                return invalid("points must share one dimension");
            }
        }
        Ok(Self { k, entries })
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn cluster_points(&self, id: usize) -> Vec<Point> {
        self.entries.iter().filter(|(_, i)| *i == id).map(|(x, _)| x.clone()).collect()
    }
}

pub fn sample_multicluster_dataset<R: Rng + ?Sized>(
    spec: &ProblemSpec,
    prior: &MixturePrior,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<ClusterParam>, Vec<f64>, MultiDataset)> {
    let thetas: Vec<ClusterParam> = (0..prior.k).map(|_| sample_theta(spec, rng)).collect();
    let laws = thetas.iter().map(|t| ClusterLaw::new(spec, t)).collect::<Result<Vec<_>>>()?;
    let pi = sample_prior(prior, rng);
    let idx = WeightedIndex::new(&pi).expect("normalized");
    let entries = (0..n)
        .map(|_| {
            let i = idx.sample(rng);
            (laws[i].sample(rng), i)
        })
        .collect();
    Ok((thetas, pi, MultiDataset::new(prior.k, entries)?))
}

/// Partition of `0..k` by occurrence count.
pub fn cluster_size_histogram(s: &MultiDataset, k: usize) -> BTreeMap<usize, Vec<usize>> {
    let mut counts = vec![0usize; k];
    for (_, i) in &s.entries {
        if *i < k {
            counts[*i] += 1;
        }
    }
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, c) in counts.into_iter().enumerate() {
        out.entry(c).or_default().push(i);
    }
    out
}

/// A binary classifier on points.
pub trait Classifier: Sync {
    fn predict(&self, x: PointRef<'_>) -> bool;
}

impl Classifier for Hypothesis {
    fn predict(&self, x: PointRef<'_>) -> bool {
        Hypothesis::predict(self, x)
    }
}

/// Which event the null point contributes to `errn`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum NullTerm {
    /// `Pr_{X'~P_0}[h(X') = 0]`.
    #[default]
    AsDisplayed,
    /// `Pr_{X'~P_0}[h(X') = 1]`, the misclassification event.
    Corrected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrnEstimate {
    pub value: f64,
    pub null_term: f64,
    /// `(cluster id, Pr[h(X) = 0])` in id order.
    pub per_cluster: Vec<(usize, f64)>,
}

/// `½(Σ_{i∈I_ℓ} Pr_{X~P_θi}[h(X)=0] + null)`, each probability from `trials` draws.
#[allow(clippy::too_many_arguments)]
pub fn errn_estimate(
    h: &dyn Classifier,
    spec: &ProblemSpec,
    thetas: &[ClusterParam],
    s: &MultiDataset,
    ell: usize,
    trials: usize,
    null_term: NullTerm,
    stream: &RngStream,
) -> Result<ErrnEstimate> {
    if trials < 1000 {
        return invalid("at least 1000 trials per probability are required");
    }
    if thetas.len() != s.k {
        return invalid("one parameter per cluster is required");
    }
    let members = cluster_size_histogram(s, s.k).remove(&ell).unwrap_or_default();
    let per_cluster = members
        .par_iter()
        .map(|&i| {
            let law = ClusterLaw::new(spec, &thetas[i])?;
            let mut rng = stream.child(i as u64).rng();
            let miss = (0..trials).filter(|_| !h.predict(law.sample(&mut rng).as_ref())).count();
            Ok((i, miss as f64 / trials as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let law = ClusterLaw::new(spec, &thetas[0])?;
    let mut rng = stream.named("null").rng();
    let target = null_term == NullTerm::Corrected;
    let hits = (0..trials).filter(|_| h.predict(law.sample_null(&mut rng).as_ref()) == target).count();
    let null = hits as f64 / trials as f64;
    let value = 0.5 * (per_cluster.iter().map(|p| p.1).sum::<f64>() + null);
    Ok(ErrnEstimate { value, null_term: null, per_cluster })
}

/// Number of clusters of one size and their `errn`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeProfile {
    pub clusters: usize,
    pub errn: f64,
}

/// `c_P · avg_S Σ_ℓ max(0, (|I_ℓ(S)| − 2·errn_ℓ)·mem_ℓ)` over the supplied datasets.
pub fn mem_decomposition_bound(
    mem_per_size: &BTreeMap<usize, f64>,
    profiles: &[BTreeMap<usize, SizeProfile>],
    c_p: f64,
) -> Result<f64> {
    if !(c_p > 0.0) || profiles.is_empty() {
        return invalid("need c_p > 0 and at least one dataset profile");
    }
    let mut total = 0.0;
    for prof in profiles {
        for (ell, sp) in prof {
            let Some(mem) = mem_per_size.get(ell) else {
                return invalid(format!("no memorization value for size {ell}"));
            };
            total += ((sp.clusters as f64 - 2.0 * sp.errn) * mem).max(0.0);
        }
    }
    Ok(c_p * total / profiles.len() as f64)
}

/// `opt + Σ_{ℓ≥1} τ_ℓ·errn_ℓ − c_k/k`.
pub fn error_local_to_global(
    opt: f64,
    tau: &BTreeMap<usize, f64>,
    errn: &BTreeMap<usize, f64>,
    k: usize,
    c_k: f64,
) -> Result<f64> {
    if k == 0 || tau.len() != errn.len() || tau.keys().any(|l| !errn.contains_key(l)) {
        return invalid("tau and errn must share keys and k must be positive");
    }
    let sum: f64 = tau.iter().filter(|(l, _)| **l >= 1).map(|(l, t)| t * errn[l]).sum();
    Ok(opt + sum - c_k / k as f64)
}

/// Predicts 1 when any member detector does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorUnion {
    pub detectors: Vec<Hypothesis>,
}

impl Classifier for DetectorUnion {
    fn predict(&self, x: PointRef<'_>) -> bool {
        self.detectors.iter().any(|h| h.predict(x))
    }
}

/// Fits one detector per cluster that appears in `s`, in id order.
pub fn train_detectors(learner: &dyn Learner, s: &MultiDataset, stream: &RngStream) -> Result<DetectorUnion> {
    let seen: Vec<usize> = (0..s.k).filter(|&i| s.entries.iter().any(|(_, j)| *j == i)).collect();
    let detectors = seen
        .par_iter()
        .map(|&i| {
            let mut rng = stream.child(i as u64).rng();
            learner.fit(&Dataset::from_points(s.cluster_points(i))?, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DetectorUnion { detectors })
}

/// Upper estimate of the optimal mixture error: one detector per seen
/// cluster, trained on that cluster's examples, combined by OR and scored on
/// the mixture test law `½·P̃_{θ,π} + ½·P_0`.
#[allow(clippy::too_many_arguments)]
pub fn opt_surrogate(
    learner: &dyn Learner,
    spec: &ProblemSpec,
    thetas: &[ClusterParam],
    pi: &[f64],
    s: &MultiDataset,
    trials: usize,
    stream: &RngStream,
) -> Result<f64> {
    if trials == 0 || thetas.len() != s.k || pi.len() != s.k {
        return invalid("need trials > 0 and one parameter and weight per cluster");
    }
    let union = train_detectors(learner, s, stream)?;
    let laws = thetas.iter().map(|t| ClusterLaw::new(spec, t)).collect::<Result<Vec<_>>>()?;
    let idx = WeightedIndex::new(pi).map_err(|e| Error::Validation(e.to_string()))?;
    let mut rng = stream.named("opt").rng();
    let errs = (0..trials)
        .filter(|_| {
            if rng.random::<bool>() {
                !union.predict(laws[idx.sample(&mut rng)].sample(&mut rng).as_ref())
            } else {
                union.predict(laws[0].sample_null(&mut rng).as_ref())
            }
        })
        .count();
    Ok(errs as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beta11(k: usize) -> MixturePrior {
        MixturePrior::new(k, FrequencyLaw::Beta { a: 1.0, b: 1.0 }).unwrap()
    }

    #[test]
    fn prior_validation() {
        assert!(MixturePrior::new(3, FrequencyLaw::PointMass(0.0)).is_err());
        assert!(MixturePrior::new(3, FrequencyLaw::Beta { a: 0.0, b: 1.0 }).is_err());
        let bad = FrequencyLaw::DiscreteGrid { values: vec![0.5], weights: vec![0.9] };
        assert!(MixturePrior::new(3, bad).is_err());
        assert!(MixturePrior::new(0, FrequencyLaw::PointMass(1.0)).is_err());
    }

    #[test]
    fn point_mass_prior_is_uniform() {
        let p = MixturePrior::new(4, FrequencyLaw::PointMass(1.0)).unwrap();
        let pi = sample_prior(&p, &mut RngStream::new(0, 0).rng());
        assert!(pi.iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn tau_closed_forms() {
        let p = beta11(20);
        assert!((tau_ell_closed(&p, 10, 0).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!((tau_ell_closed(&p, 10, 1).unwrap() - 2.0 / 12.0).abs() < 1e-15);
        let q = MixturePrior::new(5, FrequencyLaw::PointMass(0.3)).unwrap();
        assert!((tau_ell_closed(&q, 6, 2).unwrap() - 0.3).abs() < 1e-15);
        let one = MixturePrior::new(5, FrequencyLaw::PointMass(1.0)).unwrap();
        assert!(matches!(tau_ell_closed(&one, 6, 2), Err(Error::UndefinedCoefficient(_))));
        assert_eq!(tau_ell_closed(&one, 6, 6).unwrap(), 1.0);
        assert!(tau_ell_closed(&p, 3, 4).is_err());
        let grid = MixturePrior::new(
            5,
            FrequencyLaw::DiscreteGrid { values: vec![0.25, 0.75], weights: vec![0.5, 0.5] },
        )
        .unwrap();
        let want = (0.25f64.powi(2) * 0.75 + 0.75f64.powi(2) * 0.25) / (0.25 * 0.75 * 2.0);
        assert!((tau_ell_closed(&grid, 2, 1).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn point_mass_monte_carlo_is_exact() {
        let p = MixturePrior::new(10, FrequencyLaw::PointMass(0.4)).unwrap();
        let e = tau_ell_monte_carlo(&p, 5, 1, 1000, &RngStream::new(1, 0)).unwrap();
        assert!((e.estimate - 0.1).abs() < 1e-12);
        assert_eq!(tau_ell_normalized(&p, 5, 1, 10, &RngStream::new(1, 0)).unwrap(), 0.1);
        assert!(tau_ell_monte_carlo(&p, 5, 1, 999, &RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn histogram_counts() {
        let pt = || Point::Sign(vec![1]);
        let s = MultiDataset::new(3, vec![(pt(), 0), (pt(), 0), (pt(), 1)]).unwrap();
        let h = cluster_size_histogram(&s, 3);
        assert_eq!(h[&2], vec![0]);
        assert_eq!(h[&1], vec![1]);
        assert_eq!(h[&0], vec![2]);
        let empty = MultiDataset::new(3, vec![]).unwrap();
        assert_eq!(cluster_size_histogram(&empty, 3)[&0], vec![0, 1, 2]);
        assert!(MultiDataset::new(2, vec![(pt(), 2)]).is_err());
    }

    #[test]
    fn combinators() {
        let mem = BTreeMap::from([(1, 2.0), (2, 3.0)]);
        let guess = BTreeMap::from([
            (1, SizeProfile { clusters: 4, errn: 2.0 }),
            (2, SizeProfile { clusters: 2, errn: 1.0 }),
        ]);
        assert_eq!(mem_decomposition_bound(&mem, &[guess], 1.0).unwrap(), 0.0);
        let perfect = BTreeMap::from([(2, SizeProfile { clusters: 5, errn: 0.0 })]);
        assert_eq!(mem_decomposition_bound(&mem, &[perfect], 0.5).unwrap(), 7.5);
        let tau = BTreeMap::from([(0, 0.1), (1, 0.2), (2, 0.3)]);
        let zero = BTreeMap::from([(0, 0.0), (1, 0.0), (2, 0.0)]);
        assert!((error_local_to_global(0.05, &tau, &zero, 10, 1.0).unwrap() + 0.05).abs() < 1e-15);
        let one = BTreeMap::from([(0, 9.0), (1, 0.0), (2, 0.5)]);
        assert!((error_local_to_global(0.0, &tau, &one, 10, 1.0).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn errn_of_constant_one() {
        let spec = ProblemSpec::boolean(8, 0.5).unwrap();
        let p = MixturePrior::new(3, FrequencyLaw::PointMass(1.0)).unwrap();
        let (thetas, _, s) = sample_multicluster_dataset(&spec, &p, 4, &mut RngStream::new(2, 0).rng()).unwrap();
        let h = Hypothesis::Constant { value: true };
        for ell in 0..=4 {
            let e = errn_estimate(&h, &spec, &thetas, &s, ell, 1000, NullTerm::AsDisplayed, &RngStream::new(0, 0)).unwrap();
            assert_eq!(e.value, 0.0);
            let c = errn_estimate(&h, &spec, &thetas, &s, ell, 1000, NullTerm::Corrected, &RngStream::new(0, 0)).unwrap();
            assert_eq!(c.value, 0.5);
        }
    }
}

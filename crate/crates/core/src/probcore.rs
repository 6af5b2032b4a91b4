//! Finite distributions, information measures and isotropic Gaussian divergences.
//!
//! Every quantity is in nats. `kl` returns `+inf` when `p` charges an atom
//! that `q` does not.

use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::scalar::{xlogy, Real};

/// Probability mass function over opaque `u64` atom labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FinitePmf<T> {
    atoms: Vec<u64>,
    probs: Vec<T>,
}

impl<T: Real> FinitePmf<T> {
    pub fn new(atoms: Vec<u64>, probs: Vec<T>) -> Result<Self> {
        if atoms.is_empty() {
            return invalid("pmf needs at least one atom");
        }
        if atoms.len() != probs.len() {
            return invalid(format!("{} atoms but {} probabilities", atoms.len(), probs.len()));
        }
        let mut total = T::zero();
        for &p in &probs {
            if !p.is_finite() || p < T::zero() {
                return invalid("probabilities must be finite and nonnegative");
            }
            total = total + p;
        }
        if (total - T::one()).abs() > T::pmf_tolerance() {
            return invalid(format!("probabilities sum to {total:?}"));
        }
        let mut sorted = atoms.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return invalid("atom labels must be distinct");
        }
        Ok(Self { atoms, probs })
    }

    /// Atoms labelled `0..probs.len()`.
    pub fn from_probs(probs: Vec<T>) -> Result<Self> {
        Self::new((0..probs.len() as u64).collect(), probs)
    }

    /// Renormalizes nonnegative weights.
    pub fn from_weights(atoms: Vec<u64>, weights: Vec<T>) -> Result<Self> {
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        if !(total > T::zero()) || !total.is_finite() {
            return invalid("weights must have positive finite total");
        }
        Self::new(atoms, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return invalid("uniform pmf needs at least one atom");
        }
        let p = T::one() / T::lit(m as f64);
        Self::from_probs(vec![p; m])
    }

    /// Atom 1 carries `p`, atom 0 carries `1 - p`.
    pub fn bernoulli(p: T) -> Result<Self> {
        if !(p >= T::zero() && p <= T::one()) {
            return invalid("bernoulli parameter must lie in [0, 1]");
        }
        Self::from_probs(vec![T::one() - p, p])
    }

    pub fn atoms(&self) -> &[u64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn prob_of(&self, atom: u64) -> T {
        self.atoms
            .iter()
            .position(|&a| a == atom)
            .map_or(T::zero(), |i| self.probs[i])
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > T::zero()).count()
    }

    /// Product law; the pair `(a, b)` is labelled `a * other.len() + index(b)`
    /// when both sides use default labels.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let m = other.len() as u64;
        let mut atoms = Vec::with_capacity(self.len() * other.len());
        let mut probs = Vec::with_capacity(self.len() * other.len());
        for (i, &p) in self.probs.iter().enumerate() {
            for (j, &q) in other.probs.iter().enumerate() {
                atoms.push(i as u64 * m + j as u64);
                probs.push(p * q);
            }
        }
        Self::new(atoms, probs)
    }
}

/// Pairs the probabilities of `p` and `q` atom by atom.
fn aligned<T: Real>(p: &FinitePmf<T>, q: &FinitePmf<T>) -> Result<Vec<(T, T)>> {
    if p.atoms == q.atoms {
        return Ok(p.probs.iter().copied().zip(q.probs.iter().copied()).collect());
    }
    if p.len() != q.len() {
        return invalid("pmfs are defined on different atom sets");
    }
    let index: HashMap<u64, usize> = q.atoms.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    p.atoms
        .iter()
        .zip(&p.probs)
        .map(|(a, &pa)| match index.get(a) {
            Some(&j) => Ok((pa, q.probs[j])),
            None => invalid("pmfs are defined on different atom sets"),
        })
        .collect()
}

pub fn entropy<T: Real>(p: &FinitePmf<T>) -> T {
    entropy_of(p.probs())
}

/// Entropy of a raw probability vector.
pub fn entropy_of<T: Real>(probs: &[T]) -> T {
    probs.iter().fold(T::zero(), |acc, &x| acc - xlogy(x, x))
}

pub fn kl<T: Real>(p: &FinitePmf<T>, q: &FinitePmf<T>) -> Result<T> {
    Ok(kl_of(aligned(p, q)?))
}

fn kl_of<T: Real>(pairs: impl IntoIterator<Item = (T, T)>) -> T {
    let mut acc = T::zero();
    for (a, b) in pairs {
        if a == T::zero() {
            continue;
        }
        if b == T::zero() {
            return T::infinity();
        }
        acc = acc + a * (a / b).ln();
    }
    acc.max(T::zero())
}

/// KL divergence between raw probability vectors of equal length.
pub fn kl_probs<T: Real>(p: &[T], q: &[T]) -> T {
    kl_of(p.iter().copied().zip(q.iter().copied()))
}

pub fn tv<T: Real>(p: &FinitePmf<T>, q: &FinitePmf<T>) -> Result<T> {
    let s = aligned(p, q)?.into_iter().fold(T::zero(), |acc, (a, b)| acc + (a - b).abs());
    Ok((s / T::lit(2.0)).min(T::one()))
}

/// Smallest `δ` with `P(E) ≤ e^ε Q(E) + δ` and `Q(E) ≤ e^ε P(E) + δ` for all events.
pub fn hockey_stick_delta<T: Real>(p: &FinitePmf<T>, q: &FinitePmf<T>, eps: T) -> Result<T> {
    if !(eps >= T::zero()) {
        return invalid("eps must be nonnegative");
    }
    let e = eps.exp();
    let (mut d1, mut d2) = (T::zero(), T::zero());
    for (a, b) in aligned(p, q)? {
        d1 = d1 + (a - e * b).max(T::zero());
        d2 = d2 + (b - e * a).max(T::zero());
    }
    Ok(d1.max(d2).min(T::one()))
}

/// Mutual information of a joint pmf given as a row-major matrix.
pub fn joint_mutual_information<T: Real>(joint: &[Vec<T>]) -> T {
    let cols = joint.first().map_or(0, Vec::len);
    let row: Vec<T> = joint.iter().map(|r| r.iter().fold(T::zero(), |a, &x| a + x)).collect();
    let mut col = vec![T::zero(); cols];
    for r in joint {
        for (c, &x) in col.iter_mut().zip(r) {
            *c = *c + x;
        }
    }
    let mut acc = T::zero();
    for (i, r) in joint.iter().enumerate() {
        for (j, &x) in r.iter().enumerate() {
            if x > T::zero() {
                acc = acc + x * (x / (row[i] * col[j])).ln();
            }
        }
    }
    acc.max(T::zero())
}

/// `2δ·ln(m/δ)`: bound on `|H(P) − H(Q)|` for pmfs on `m` atoms at TV distance `δ`.
pub fn entropy_continuity_bound<T: Real>(delta: T, m: usize) -> T {
    if delta <= T::zero() {
        return T::zero();
    }
    T::lit(2.0) * delta * (T::lit(m as f64) / delta).ln()
}

/// `4δ·ln(m/δ)`: bound on the change of `I(f(B); B)` when `B` moves by TV `δ`
/// and `f` has `m` outputs.
pub fn information_robustness_bound<T: Real>(delta: T, m: usize) -> T {
    T::lit(2.0) * entropy_continuity_bound(delta, m)
}

/// Input law together with a row-stochastic kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteChannel<T> {
    input: FinitePmf<T>,
    outputs: Vec<u64>,
    kernel: Vec<Vec<T>>,
}

impl<T: Real> FiniteChannel<T> {
    pub fn new(input: FinitePmf<T>, outputs: Vec<u64>, kernel: Vec<Vec<T>>) -> Result<Self> {
        if kernel.len() != input.len() {
            return invalid("kernel needs one row per input atom");
        }
        for row in &kernel {
            if row.len() != outputs.len() {
                return invalid("kernel rows must have one entry per output atom");
            }
            FinitePmf::new(outputs.clone(), row.clone())?;
        }
        Ok(Self { input, outputs, kernel })
    }

    /// Output labels default to `0..columns`.
    pub fn from_matrix(input: FinitePmf<T>, kernel: Vec<Vec<T>>) -> Result<Self> {
        let cols = kernel.first().map_or(0, Vec::len) as u64;
        Self::new(input, (0..cols).collect(), kernel)
    }

    /// Binary symmetric channel with flip probability `p`.
    pub fn bsc(input: FinitePmf<T>, p: T) -> Result<Self> {
        let q = T::one() - p;
        Self::from_matrix(input, vec![vec![q, p], vec![p, q]])
    }

    pub fn input(&self) -> &FinitePmf<T> {
        &self.input
    }

    pub fn kernel(&self) -> &[Vec<T>] {
        &self.kernel
    }

    pub fn outputs(&self) -> &[u64] {
        &self.outputs
    }

    /// Pushes an input probability vector (ordered like the input atoms) through the kernel.
    pub fn push_forward(&self, q: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.outputs.len()];
        for (row, &w) in self.kernel.iter().zip(q) {
            for (o, &k) in out.iter_mut().zip(row) {
                *o = *o + w * k;
            }
        }
        out
    }

    pub fn output(&self) -> FinitePmf<T> {
        let probs = self.push_forward(self.input.probs());
        FinitePmf { atoms: self.outputs.clone(), probs }
    }

    /// `I(input; output)`.
    pub fn mutual_information(&self) -> T {
        let joint: Vec<Vec<T>> = self
            .kernel
            .iter()
            .zip(self.input.probs())
            .map(|(row, &w)| row.iter().map(|&k| w * k).collect())
            .collect();
        joint_mutual_information(&joint)
    }
}

/// Isotropic Gaussian `N(mean, variance·I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSpec<T> {
    pub mean: Vec<T>,
    pub variance: T,
}

impl<T: Real> GaussianSpec<T> {
    pub fn new(mean: Vec<T>, variance: T) -> Result<Self> {
        if mean.is_empty() {
            return invalid("gaussian dimension must be at least 1");
        }
        if !(variance > T::zero()) || !variance.is_finite() {
            return invalid("gaussian variance must be positive");
        }
        Ok(Self { mean, variance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub fn gaussian_kl<T: Real>(a: &GaussianSpec<T>, b: &GaussianSpec<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return invalid("gaussian dimensions differ");
    }
    let d = T::lit(a.dim() as f64);
    let shift = a
        .mean
        .iter()
        .zip(&b.mean)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
    let ratio = a.variance / b.variance;
    let half = T::lit(0.5);
    Ok(half * (d * (b.variance / a.variance).ln() - d + d * ratio + shift / b.variance))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(p: &[f64]) -> FinitePmf<f64> {
        FinitePmf::from_probs(p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&pmf(&[0.5, 0.5])) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&pmf(&[0.0, 1.0])), 0.0);
        let h = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert!((entropy(&pmf(&[0.25, 0.75])) - h).abs() < 1e-15);
        assert!((h - 0.562_335_144_618_808_6).abs() < 1e-12);
    }

    #[test]
    fn kl_examples() {
        let p = pmf(&[0.3, 0.7]);
        assert_eq!(kl(&p, &p).unwrap(), 0.0);
        assert!((kl(&pmf(&[0.0, 1.0]), &pmf(&[0.5, 0.5])).unwrap() - 2f64.ln()).abs() < 1e-15);
        let v = kl(&pmf(&[1.0 / 3.0, 2.0 / 3.0]), &pmf(&[2.0 / 3.0, 1.0 / 3.0])).unwrap();
        assert!((v - 2f64.ln() / 3.0).abs() < 1e-12);
        assert!(kl(&pmf(&[0.5, 0.5]), &pmf(&[1.0, 0.0])).unwrap().is_infinite());
    }

    #[test]
    fn mismatched_atoms_rejected() {
        let p = FinitePmf::new(vec![0, 1], vec![0.5f64, 0.5]).unwrap();
        let q = FinitePmf::new(vec![0, 2], vec![0.5, 0.5]).unwrap();
        assert!(kl(&p, &q).is_err());
        assert!(tv(&p, &q).is_err());
        let r = FinitePmf::new(vec![1, 0], vec![0.25, 0.75]).unwrap();
        assert!((tv(&p, &r).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv(&pmf(&[1.0, 0.0]), &pmf(&[0.0, 1.0])).unwrap(), 1.0);
        assert!((tv(&pmf(&[0.5, 0.5]), &pmf(&[0.25, 0.75])).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn hockey_stick_examples() {
        let p = pmf(&[0.25, 0.75]);
        let q = pmf(&[0.75, 0.25]);
        assert!((hockey_stick_delta(&p, &q, 0.0).unwrap() - tv(&p, &q).unwrap()).abs() < 1e-15);
        assert!(hockey_stick_delta(&p, &q, 3f64.ln()).unwrap() < 1e-15);
        assert!(hockey_stick_delta(&p, &q, -1.0).is_err());
    }

    #[test]
    fn gaussian_kl_examples() {
        let a = GaussianSpec::new(vec![0.0], 1.0).unwrap();
        let b = GaussianSpec::new(vec![0.0], 2.0).unwrap();
        let v = gaussian_kl(&a, &b).unwrap();
        assert!((v - (2f64.ln() - 0.5) / 2.0).abs() < 1e-15);
        let c = GaussianSpec::new(vec![1.0f64, 2.0], 1.0).unwrap();
        let z = GaussianSpec::new(vec![0.0, 0.0], 1.0).unwrap();
        assert!((gaussian_kl(&z, &c).unwrap() - 2.5).abs() < 1e-15);
        assert!(gaussian_kl(&a, &c).is_err());
    }

    #[test]
    fn invalid_pmfs() {
        assert!(FinitePmf::from_probs(vec![0.5, 0.6]).is_err());
        assert!(FinitePmf::from_probs(vec![-0.1, 1.1]).is_err());
        assert!(FinitePmf::new(vec![1, 1], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn channel_mi_matches_bsc_capacity_formula() {
        let ch = FiniteChannel::bsc(pmf(&[0.5, 0.5]), 0.11).unwrap();
        let h = -(0.11f64 * 0.11f64.ln() + 0.89 * 0.89f64.ln());
        assert!((ch.mutual_information() - (2f64.ln() - h)).abs() < 1e-12);
    }

    #[test]
    fn single_precision_path() {
        let p = FinitePmf::<f32>::from_probs(vec![0.5, 0.5]).unwrap();
        assert!((entropy(&p) - std::f32::consts::LN_2).abs() < 1e-6);
    }
}

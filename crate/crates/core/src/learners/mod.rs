//! Threshold learners and the hypotheses they return.
//!
//! Every hypothesis has a canonical encoding (see [`encoding`]) so that its
//! entropy can be accounted bit-exactly. `description_bits` counts the payload
//! bits only; the fixed-size header is common to all hypotheses of a learner
//! and carries no information about the data.

pub mod encoding;

use rand::seq::index;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problems::{
    draw_test, hoeffding_halfwidth, sample_theta, ClusterLaw, Dataset, ErrorEstimate, Point,
    PointRef, ProblemSpec, BLOCK,
};
use crate::rng::RngStream;

pub use encoding::{decode, encode};

/// `ln 200`, the confidence constant of the single-sample thresholds.
pub const LN_200: f64 = 5.298_317_366_548_036;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Weights {
    Sign(Vec<i8>),
    Real(Vec<f64>),
}

impl Weights {
    pub fn len(&self) -> usize {
        match self {
            Self::Sign(w) => w.len(),
            Self::Real(w) => w.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HypothesisKind {
    Constant,
    LinearThreshold,
    ProjectedQuantizedThreshold,
    MajorityThreshold,
    SubsetMatchThreshold,
}

/// Binary classifier `x ↦ 1{score(x) ≥ threshold}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Hypothesis {
    Constant { value: bool },
    LinearThreshold { weights: Weights, threshold: f64 },
    /// Weights `codes[i] / 2^frac_bits` on the first `codes.len()` coordinates.
    ProjectedQuantizedThreshold { d: usize, frac_bits: u8, int_bits: u8, codes: Vec<i64>, threshold: f64 },
    /// Sign weights on the first `signs.len()` coordinates.
    MajorityThreshold { d: usize, signs: Vec<i8>, threshold: f64 },
    SubsetMatchThreshold { d: usize, indices: Vec<u32>, signs: Vec<i8>, threshold: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DescriptionBits {
    Finite(u64),
    /// Real-valued weights have no finite description.
    Unbounded,
}

impl DescriptionBits {
    pub fn finite(self) -> Option<u64> {
        match self {
            Self::Finite(b) => Some(b),
            Self::Unbounded => None,
        }
    }

    /// Entropy ceiling `bits·ln 2`.
    pub fn nats(self) -> f64 {
        match self {
            Self::Finite(b) => b as f64 * std::f64::consts::LN_2,
            Self::Unbounded => f64::INFINITY,
        }
    }
}

fn dot_sign(w: &[i8], x: PointRef<'_>) -> f64 {
    match x {
        PointRef::Sign(x) => w.iter().zip(x).map(|(&a, &b)| i64::from(a * b)).sum::<i64>() as f64,
        PointRef::Real(x) => w.iter().zip(x).map(|(&a, &b)| f64::from(a) * b).sum(),
    }
}

fn dot_real(w: &[f64], x: PointRef<'_>) -> f64 {
    match x {
        PointRef::Real(x) => w.iter().zip(x).map(|(a, b)| a * b).sum(),
        PointRef::Sign(x) => w.iter().zip(x).map(|(a, &b)| a * f64::from(b)).sum(),
    }
}

impl Hypothesis {
    pub fn kind(&self) -> HypothesisKind {
        match self {
            Self::Constant { .. } => HypothesisKind::Constant,
            Self::LinearThreshold { .. } => HypothesisKind::LinearThreshold,
            Self::ProjectedQuantizedThreshold { .. } => HypothesisKind::ProjectedQuantizedThreshold,
            Self::MajorityThreshold { .. } => HypothesisKind::MajorityThreshold,
            Self::SubsetMatchThreshold { .. } => HypothesisKind::SubsetMatchThreshold,
        }
    }

    /// Input dimension, `None` for constants.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Constant { .. } => None,
            Self::LinearThreshold { weights, .. } => Some(weights.len()),
            Self::ProjectedQuantizedThreshold { d, .. }
            | Self::MajorityThreshold { d, .. }
            | Self::SubsetMatchThreshold { d, .. } => Some(*d),
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match self {
            Self::Constant { .. } => None,
            Self::LinearThreshold { threshold, .. }
            | Self::ProjectedQuantizedThreshold { threshold, .. }
            | Self::MajorityThreshold { threshold, .. }
            | Self::SubsetMatchThreshold { threshold, .. } => Some(*threshold),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Constant { .. } | Self::LinearThreshold { .. } => true,
            Self::ProjectedQuantizedThreshold { d, codes, .. } => codes.len() <= *d,
            Self::MajorityThreshold { d, signs, .. } => signs.len() <= *d,
            Self::SubsetMatchThreshold { d, indices, signs, .. } => {
                indices.len() == signs.len() && indices.iter().all(|&i| (i as usize) < *d)
            }
        };
        if ok {
            Ok(())
        } else {
            invalid("hypothesis parameters are inconsistent")
        }
    }

    pub fn score(&self, x: PointRef<'_>) -> f64 {
        match self {
            Self::Constant { value } => {
                if *value {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::LinearThreshold { weights: Weights::Sign(w), .. } => dot_sign(w, x),
            Self::LinearThreshold { weights: Weights::Real(w), .. } => dot_real(w, x),
            Self::ProjectedQuantizedThreshold { frac_bits, codes, .. } => {
                let scale = (-f64::from(*frac_bits)).exp2();
                let w: Vec<f64> = codes.iter().map(|&c| c as f64 * scale).collect();
                dot_real(&w, x)
            }
            Self::MajorityThreshold { signs, .. } => dot_sign(signs, x),
            Self::SubsetMatchThreshold { indices, signs, .. } => indices
                .iter()
                .zip(signs)
                .map(|(&i, &s)| match x {
                    PointRef::Sign(x) => f64::from(s * x[i as usize]),
                    PointRef::Real(x) => f64::from(s) * x[i as usize],
                })
                .sum(),
        }
    }

    pub fn predict(&self, x: PointRef<'_>) -> bool {
        match self {
            Self::Constant { value } => *value,
            _ => self.score(x) >= self.threshold().expect("threshold"),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        encode(self)
    }

    pub fn description_bits(&self) -> DescriptionBits {
        use DescriptionBits::Finite;
        match self {
            Self::Constant { .. } => Finite(1),
            Self::LinearThreshold { weights: Weights::Sign(w), .. } => Finite(w.len() as u64),
            Self::LinearThreshold { weights: Weights::Real(_), .. } => DescriptionBits::Unbounded,
            Self::ProjectedQuantizedThreshold { frac_bits, int_bits, codes, .. } => {
                Finite(codes.len() as u64 * (1 + u64::from(*frac_bits) + u64::from(*int_bits)))
            }
            Self::MajorityThreshold { signs, .. } => Finite(signs.len() as u64),
            Self::SubsetMatchThreshold { d, indices, .. } => {
                Finite(indices.len() as u64 * (1 + u64::from(encoding::index_bits(*d))))
            }
        }
    }
}

pub fn description_bits(h: &Hypothesis) -> DescriptionBits {
    h.description_bits()
}

pub fn gaussian_single_sample(x1: &[f64]) -> Hypothesis {
    let d = x1.len() as f64;
    Hypothesis::LinearThreshold {
        weights: Weights::Real(x1.to_vec()),
        threshold: (4.0 * LN_200 * d).sqrt(),
    }
}

fn real_data(data: &Dataset) -> Result<&[Vec<f64>]> {
    data.as_real().ok_or_else(|| Error::Validation("expected real-valued samples".into()))
}

fn sign_data(data: &Dataset) -> Result<&[Vec<i8>]> {
    data.as_sign().ok_or_else(|| Error::Validation("expected sign-valued samples".into()))
}

fn sample_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, &b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|a| *a /= n);
    m
}

pub fn gaussian_noisy_mean<R: Rng + ?Sized>(data: &Dataset, rng: &mut R, c: f64) -> Result<Hypothesis> {
    let d = real_data(data)?[0].len();
    let eta: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    gaussian_noisy_mean_with_noise(data, &eta, c)
}

/// Noisy-mean learner with the perturbation `η` supplied by the caller.
pub fn gaussian_noisy_mean_with_noise(data: &Dataset, eta: &[f64], c: f64) -> Result<Hypothesis> {
    let rows = real_data(data)?;
    if eta.len() != rows[0].len() {
        return invalid("noise dimension does not match the data");
    }
    let mut w = sample_mean(rows);
    w.iter_mut().zip(eta).for_each(|(a, &e)| *a += e);
    let d = w.len() as f64;
    Ok(Hypothesis::LinearThreshold { weights: Weights::Real(w), threshold: c.powf(1.5) * d.sqrt() })
}

/// Integer bits covering magnitudes up to `bound`.
pub fn magnitude_int_bits(bound: f64) -> u8 {
    let m = bound.max(1.0).floor() as u64;
    (u64::BITS - m.leading_zeros()).max(1) as u8
}

/// Clamp applied before quantization: `4·ln(d/n) + 4`.
pub fn quantization_clamp(d: usize, n: usize) -> f64 {
    4.0 * (d as f64 / n as f64).ln() + 4.0
}

/// Fixed-point code of `v` with `frac_bits` fractional and `int_bits` integer bits,
/// truncating toward zero and saturating at the largest magnitude.
pub fn quantize_code(v: f64, frac_bits: u8, int_bits: u8) -> i64 {
    let width = u32::from(frac_bits) + u32::from(int_bits);
    let max = (1i64 << width) - 1;
    let m = ((v.abs() * f64::from(frac_bits).exp2()).floor() as i64).min(max);
    if v < 0.0 {
        -m
    } else {
        m
    }
}

pub fn quantize(v: f64, frac_bits: u8, int_bits: u8) -> f64 {
    quantize_code(v, frac_bits, int_bits) as f64 * (-f64::from(frac_bits)).exp2()
}

pub fn gaussian_projected_quantized(data: &Dataset, k_bits: u8, lambda: f64) -> Result<Hypothesis> {
    let rows = real_data(data)?;
    let (n, d) = (rows.len(), rows[0].len());
    if n > d {
        return Err(Error::Unsupported(format!("n = {n} exceeds d = {d}")));
    }
    let ell = d.div_ceil(n);
    let bound = quantization_clamp(d, n);
    let int_bits = magnitude_int_bits(bound);
    let mean = sample_mean(rows);
    let codes = mean[..ell]
        .iter()
        .map(|&v| quantize_code(v.clamp(-bound, bound), k_bits, int_bits))
        .collect();
    Ok(Hypothesis::ProjectedQuantizedThreshold {
        d,
        frac_bits: k_bits,
        int_bits,
        codes,
        threshold: lambda * lambda * ell as f64 / 2.0,
    })
}

fn check_signs(x: &[i8]) -> Result<()> {
    if x.is_empty() || x.iter().any(|&s| s != 1 && s != -1) {
        return invalid("expected a nonempty vector of signs");
    }
    Ok(())
}

pub fn boolean_single_sample(x1: &[i8]) -> Result<Hypothesis> {
    check_signs(x1)?;
    Ok(Hypothesis::LinearThreshold {
        weights: Weights::Sign(x1.to_vec()),
        threshold: (2.0 * LN_200 * x1.len() as f64).sqrt(),
    })
}

/// Coordinate-wise majority over the first `t` coordinates; ties go to `+1`.
pub fn majority_threshold(data: &Dataset, t: usize) -> Result<Hypothesis> {
    let rows = sign_data(data)?;
    let d = rows[0].len();
    if t == 0 || t > d {
        return invalid("majority width must lie in 1..=d");
    }
    let mut votes = vec![0i64; t];
    for r in rows {
        for (v, &s) in votes.iter_mut().zip(r) {
            *v += i64::from(s);
        }
    }
    let signs = votes.iter().map(|&v| if v >= 0 { 1 } else { -1 }).collect();
    Ok(Hypothesis::MajorityThreshold { d, signs, threshold: (2.0 * LN_200 * t as f64).sqrt() })
}

pub fn majority_width(d: usize, n: usize, c_sub: f64) -> usize {
    ((c_sub * d as f64 / n as f64).ceil() as usize).clamp(1, d)
}

pub fn boolean_majority_projected(data: &Dataset, c_sub: f64) -> Result<Hypothesis> {
    let d = sign_data(data)?[0].len();
    majority_threshold(data, majority_width(d, data.n(), c_sub))
}

pub fn boolean_majority_full(data: &Dataset) -> Result<Hypothesis> {
    majority_threshold(data, data.d())
}

/// Output of the constant-coordinate learner.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFit {
    pub hypothesis: Hypothesis,
    /// `|Ŝ|`, the number of coordinates on which the data is constant.
    pub constant_coords: usize,
    /// Set when `Ŝ` is empty and the constant-0 fallback was returned.
    pub degenerate: bool,
}

pub fn sparse_subset_size(d: usize, n: usize, constant_coords: usize, c_ell: f64) -> usize {
    let cap = (c_ell * d as f64 / 4f64.powi(n as i32)).ceil().max(1.0);
    (cap.min(constant_coords as f64)) as usize
}

pub fn sparse_constant_coords<R: Rng + ?Sized>(
    data: &Dataset,
    rng: &mut R,
    c_ell: f64,
) -> Result<SparseFit> {
    let rows = sign_data(data)?;
    let d = rows[0].len();
    let first = &rows[0];
    let s_hat: Vec<usize> =
        (0..d).filter(|&i| rows.iter().all(|r| r[i] == first[i])).collect();
    if s_hat.is_empty() {
        return Ok(SparseFit {
            hypothesis: Hypothesis::Constant { value: false },
            constant_coords: 0,
            degenerate: true,
        });
    }
    let ell = sparse_subset_size(d, rows.len(), s_hat.len(), c_ell);
    let mut picked: Vec<usize> = if ell == s_hat.len() {
        s_hat.clone()
    } else {
        index::sample(rng, s_hat.len(), ell).into_iter().map(|j| s_hat[j]).collect()
    };
    picked.sort_unstable();
    let hypothesis = Hypothesis::SubsetMatchThreshold {
        d,
        indices: picked.iter().map(|&i| i as u32).collect(),
        signs: picked.iter().map(|&i| first[i]).collect(),
        threshold: (2.0 * LN_200 * ell as f64).sqrt(),
    };
    Ok(SparseFit { hypothesis, constant_coords: s_hat.len(), degenerate: false })
}

/// A learning algorithm `A : dataset ↦ hypothesis`.
pub trait Learner: Sync {
    fn fit(&self, data: &Dataset, rng: &mut dyn RngCore) -> Result<Hypothesis>;

    /// Whether `fit` ignores its random stream.
    fn is_deterministic(&self) -> bool {
        true
    }

    /// Whether every output has a finite description.
    fn finite_description(&self) -> bool {
        true
    }
}

/// The learners of this crate, selectable from configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LearnerSpec {
    GaussianSingleSample,
    GaussianNoisyMean { c: f64 },
    GaussianProjectedQuantized { k_bits: u8, lambda: f64 },
    BooleanSingleSample,
    BooleanMajorityProjected { c_sub: f64 },
    BooleanMajorityFull,
    SparseConstantCoords { c_ell: f64 },
    Constant { value: bool },
}

impl Learner for LearnerSpec {
    fn fit(&self, data: &Dataset, rng: &mut dyn RngCore) -> Result<Hypothesis> {
        match self {
            Self::GaussianSingleSample => {
                Ok(gaussian_single_sample(&real_data(data)?[0]))
            }
            Self::GaussianNoisyMean { c } => gaussian_noisy_mean(data, rng, *c),
            Self::GaussianProjectedQuantized { k_bits, lambda } => {
                gaussian_projected_quantized(data, *k_bits, *lambda)
            }
            Self::BooleanSingleSample => boolean_single_sample(&sign_data(data)?[0]),
            Self::BooleanMajorityProjected { c_sub } => boolean_majority_projected(data, *c_sub),
            Self::BooleanMajorityFull => boolean_majority_full(data),
            Self::SparseConstantCoords { c_ell } => {
                sparse_constant_coords(data, rng, *c_ell).map(|f| f.hypothesis)
            }
            Self::Constant { value } => Ok(Hypothesis::Constant { value: *value }),
        }
    }

    fn is_deterministic(&self) -> bool {
        !matches!(self, Self::GaussianNoisyMean { .. } | Self::SparseConstantCoords { .. })
    }

    fn finite_description(&self) -> bool {
        !matches!(self, Self::GaussianSingleSample | Self::GaussianNoisyMean { .. })
    }
}

/// Average-case error `err(A, P)`: every trial draws a fresh θ, a dataset of
/// size `n`, trains, and scores one test point.
pub fn estimate_learner_error(
    learner: &dyn Learner,
    spec: &ProblemSpec,
    n: usize,
    trials: usize,
    stream: &RngStream,
) -> Result<ErrorEstimate> {
    if trials == 0 || n == 0 {
        return invalid("trials and n must be at least 1");
    }
    let blocks = trials.div_ceil(BLOCK);
    let sums: Vec<Result<u64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.child(b as u64).rng();
            let mut errs = 0u64;
            for _ in 0..BLOCK.min(trials - b * BLOCK) {
                let theta = sample_theta(spec, &mut rng);
                let law = ClusterLaw::new(spec, &theta)?;
                let points: Vec<Point> = (0..n).map(|_| law.sample(&mut rng)).collect();
                let h = learner.fit(&Dataset::from_points(points)?, &mut rng)?;
                let t = draw_test(&law, &mut rng);
                errs += u64::from(h.predict(t.x.as_ref()) != (t.y == 1));
            }
            Ok(errs)
        })
        .collect();
    let mut errs = 0u64;
    for s in sums {
        errs += s?;
    }
    Ok(ErrorEstimate {
        estimate: errs as f64 / trials as f64,
        ci_halfwidth: hoeffding_halfwidth(trials),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        let h = gaussian_single_sample(&[0.0; 100]);
        assert!((h.threshold().unwrap() - 46.04).abs() < 0.01);
        let h = boolean_single_sample(&[1; 100]).unwrap();
        assert!((h.threshold().unwrap() - 32.56).abs() < 0.01);
        assert!(boolean_single_sample(&[1, 0]).is_err());
        assert!((LN_200 - 200f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn noisy_mean_with_zero_noise_returns_sample() {
        let data = Dataset::real(vec![vec![1.0, -2.0, 3.0]]).unwrap();
        let h = gaussian_noisy_mean_with_noise(&data, &[0.0; 3], 4.0).unwrap();
        assert_eq!(
            h,
            Hypothesis::LinearThreshold { weights: Weights::Real(vec![1.0, -2.0, 3.0]), threshold: 8.0 * 3f64.sqrt() }
        );
        let data = Dataset::real(vec![vec![0.0; 4096]]).unwrap();
        let h = gaussian_noisy_mean_with_noise(&data, &vec![0.0; 4096], 4.0).unwrap();
        assert!((h.threshold().unwrap() - 512.0).abs() < 1e-9);
    }

    #[test]
    fn projected_quantized_shape() {
        let data = Dataset::real(vec![vec![0.3; 64]; 8]).unwrap();
        let h = gaussian_projected_quantized(&data, 6, 0.5).unwrap();
        let Hypothesis::ProjectedQuantizedThreshold { codes, int_bits, .. } = &h else { panic!() };
        assert_eq!(codes.len(), 8);
        assert_eq!(h.description_bits(), DescriptionBits::Finite(8 * (7 + u64::from(*int_bits))));
        let hand = Hypothesis::ProjectedQuantizedThreshold { d: 64, frac_bits: 6, int_bits: 5, codes: vec![0; 8], threshold: 1.0 };
        assert_eq!(hand.description_bits(), DescriptionBits::Finite(96));
        let big = Dataset::real(vec![vec![0.0; 2]; 3]).unwrap();
        assert!(matches!(gaussian_projected_quantized(&big, 4, 0.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn quantization_is_idempotent() {
        for &v in &[0.0, 0.1, -3.77, 12.9, 1e6, -1e6] {
            let q = quantize(v, 6, 4);
            assert_eq!(quantize(q, 6, 4), q);
        }
    }

    #[test]
    fn majority_votes_and_ties() {
        let data = Dataset::sign(vec![vec![1, 1], vec![1, -1], vec![-1, 1]]).unwrap();
        let Hypothesis::MajorityThreshold { signs, .. } = boolean_majority_full(&data).unwrap() else { panic!() };
        assert_eq!(signs, vec![1, 1]);
        let tie = Dataset::sign(vec![vec![1], vec![-1]]).unwrap();
        let Hypothesis::MajorityThreshold { signs, .. } = boolean_majority_full(&tie).unwrap() else { panic!() };
        assert_eq!(signs, vec![1]);
        assert_eq!(majority_width(4096, 64, 64.0), 4096);
    }

    #[test]
    fn sparse_learner_rules() {
        let mut rng = RngStream::new(0, 0).rng();
        let one = Dataset::sign(vec![vec![1, -1, 1, 1]]).unwrap();
        let fit = sparse_constant_coords(&one, &mut rng, 16.0).unwrap();
        assert_eq!(fit.constant_coords, 4);
        let two = Dataset::sign(vec![vec![1, -1, 1, 1], vec![1, 1, 1, -1]]).unwrap();
        let fit = sparse_constant_coords(&two, &mut rng, 16.0).unwrap();
        assert_eq!(fit.constant_coords, 2);
        let Hypothesis::SubsetMatchThreshold { indices, .. } = fit.hypothesis else { panic!() };
        assert_eq!(indices, vec![0, 2]);
        assert_eq!(sparse_subset_size(4096, 3, 5000, 16.0), 1024);
        let none = Dataset::sign(vec![vec![1], vec![-1]]).unwrap();
        let fit = sparse_constant_coords(&none, &mut rng, 16.0).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.hypothesis, Hypothesis::Constant { value: false });
    }

    #[test]
    fn encodings_round_trip() {
        let hs = vec![
            Hypothesis::Constant { value: true },
            Hypothesis::LinearThreshold { weights: Weights::Sign(vec![1, -1, -1]), threshold: 0.5 },
            Hypothesis::LinearThreshold { weights: Weights::Real(vec![0.25, -1.5]), threshold: -0.5 },
            Hypothesis::ProjectedQuantizedThreshold { d: 9, frac_bits: 3, int_bits: 2, codes: vec![-7, 0, 31], threshold: 1.0 },
            Hypothesis::MajorityThreshold { d: 10, signs: vec![1, -1, 1], threshold: 2.0 },
            Hypothesis::SubsetMatchThreshold { d: 10, indices: vec![0, 9, 4], signs: vec![-1, 1, 1], threshold: 1.5 },
        ];
        for h in hs {
            assert_eq!(decode(&h.encode()).unwrap(), h);
        }
        assert!(decode(&[]).is_err());
        assert!(decode(&[9]).is_err());
    }
}

//! The three cluster-classification problems and their test mixture.
//!
//! Sign vectors are stored as `i8` entries in `{+1, -1}`. For exact
//! enumeration a sign vector of length `d ≤ 63` is packed into a `u64` atom
//! whose bit `i` is set exactly when coordinate `i` equals `+1`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::learners::Hypothesis;
use crate::probcore::FinitePmf;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Gaussian,
    Boolean,
    SparseBoolean,
}

/// Problem family with its dimension and correlation or inclusion parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub family: Family,
    pub d: usize,
    pub lambda: Option<f64>,
    pub nu: Option<f64>,
}

impl ProblemSpec {
    /// `λ = 1` is accepted as the noiseless limit.
    pub fn gaussian(d: usize, lambda: f64) -> Result<Self> {
        Self { family: Family::Gaussian, d, lambda: Some(lambda), nu: None }.validated()
    }

    pub fn boolean(d: usize, lambda: f64) -> Result<Self> {
        Self { family: Family::Boolean, d, lambda: Some(lambda), nu: None }.validated()
    }

    pub fn sparse(d: usize, nu: f64) -> Result<Self> {
        Self { family: Family::SparseBoolean, d, lambda: None, nu: Some(nu) }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.d == 0 {
            return invalid("d must be at least 1");
        }
        match self.family {
            Family::Gaussian | Family::Boolean => {
                if self.nu.is_some() {
                    return invalid("nu is only meaningful for the sparse family");
                }
                let Some(l) = self.lambda else { return invalid("lambda is required") };
                let ok = match self.family {
                    Family::Gaussian => l > 0.0 && l <= 1.0,
                    _ => l > 0.0 && l < 1.0,
                };
                if !ok {
                    return invalid(format!("lambda = {l} is out of range"));
                }
            }
            Family::SparseBoolean => {
                if self.lambda.is_some() {
                    return invalid("lambda is not used by the sparse family");
                }
                let Some(v) = self.nu else { return invalid("nu is required") };
                if !(v > 0.0 && v < 1.0) {
                    return invalid(format!("nu = {v} is out of range"));
                }
            }
        }
        Ok(self)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(0.0)
    }

    pub fn nu(&self) -> f64 {
        self.nu.unwrap_or(0.0)
    }

    pub fn is_sign_valued(&self) -> bool {
        self.family != Family::Gaussian
    }
}

/// Hidden cluster parameter θ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ClusterParam {
    Gaussian(Vec<f64>),
    Boolean(Vec<i8>),
    /// Sorted support `S` and the signs `y` on it, aligned with `support`.
    Sparse { d: usize, support: Vec<usize>, signs: Vec<i8> },
}

impl ClusterParam {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(v) => v.len(),
            Self::Boolean(v) => v.len(),
            Self::Sparse { d, .. } => *d,
        }
    }

    /// Dense sparse pattern: `y_i` on the support, `0` elsewhere.
    pub fn sparse_pattern(&self) -> Option<Vec<i8>> {
        match self {
            Self::Sparse { d, support, signs } => {
                let mut v = vec![0i8; *d];
                for (&i, &s) in support.iter().zip(signs) {
                    v[i] = s;
                }
                Some(v)
            }
            _ => None,
        }
    }

    fn check(&self, spec: &ProblemSpec) -> Result<()> {
        let ok = match (self, spec.family) {
            (Self::Gaussian(v), Family::Gaussian) => v.len() == spec.d,
            (Self::Boolean(v), Family::Boolean) => {
                v.len() == spec.d && v.iter().all(|&s| s == 1 || s == -1)
            }
            (Self::Sparse { d, support, signs }, Family::SparseBoolean) => {
                *d == spec.d
                    && support.len() == signs.len()
                    && support.windows(2).all(|w| w[0] < w[1])
                    && support.iter().all(|&i| i < *d)
                    && signs.iter().all(|&s| s == 1 || s == -1)
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            invalid("cluster parameter does not match the problem spec")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointRef<'a> {
    Real(&'a [f64]),
    Sign(&'a [i8]),
}

impl PointRef<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Self::Real(x) => x.len(),
            Self::Sign(x) => x.len(),
        }
    }

    pub fn to_owned(&self) -> Point {
        match *self {
            Self::Real(x) => Point::Real(x.to_vec()),
            Self::Sign(x) => Point::Sign(x.to_vec()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Real(Vec<f64>),
    Sign(Vec<i8>),
}

impl Point {
    pub fn as_ref(&self) -> PointRef<'_> {
        match self {
            Self::Real(x) => PointRef::Real(x),
            Self::Sign(x) => PointRef::Sign(x),
        }
    }
}

/// `n` samples of a common dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Dataset {
    Real(Vec<Vec<f64>>),
    Sign(Vec<Vec<i8>>),
}

impl Dataset {
    pub fn from_points(points: Vec<Point>) -> Result<Self> {
        let mut real = Vec::new();
        let mut sign = Vec::new();
        for p in points {
            match p {
                Point::Real(x) => real.push(x),
                Point::Sign(x) => sign.push(x),
            }
        }
        match (real.is_empty(), sign.is_empty()) {
            (false, true) => Self::real(real),
            (true, false) => Self::sign(sign),
            (true, true) => invalid("dataset needs at least one sample"),
            _ => invalid("dataset mixes real and sign samples"),
        }
    }

    pub fn real(samples: Vec<Vec<f64>>) -> Result<Self> {
        check_rows(&samples)?;
        Ok(Self::Real(samples))
    }

    pub fn sign(samples: Vec<Vec<i8>>) -> Result<Self> {
        check_rows(&samples)?;
        if samples.iter().flatten().any(|&s| s != 1 && s != -1) {
            return invalid("sign samples must have entries in {+1, -1}");
        }
        Ok(Self::Sign(samples))
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Real(s) => s.len(),
            Self::Sign(s) => s.len(),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Self::Real(s) => s.first().map_or(0, Vec::len),
            Self::Sign(s) => s.first().map_or(0, Vec::len),
        }
    }

    pub fn point(&self, j: usize) -> PointRef<'_> {
        match self {
            Self::Real(s) => PointRef::Real(&s[j]),
            Self::Sign(s) => PointRef::Sign(&s[j]),
        }
    }

    pub fn as_sign(&self) -> Option<&[Vec<i8>]> {
        match self {
            Self::Sign(s) => Some(s),
            Self::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&[Vec<f64>]> {
        match self {
            Self::Real(s) => Some(s),
            Self::Sign(_) => None,
        }
    }
}

fn check_rows<T>(rows: &[Vec<T>]) -> Result<()> {
    let Some(first) = rows.first() else { return invalid("dataset needs at least one sample") };
    if first.is_empty() || rows.iter().any(|r| r.len() != first.len()) {
        return invalid("samples must share a positive dimension");
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTestPoint {
    pub x: Point,
    pub y: u8,
}

/// Prepared per-θ sampler for `P_θ` and the null `P_0`.
#[derive(Clone, Debug)]
pub struct ClusterLaw {
    kind: LawKind,
    d: usize,
}

#[derive(Clone, Debug)]
enum LawKind {
    Gaussian { mean: Vec<f64>, sd: f64 },
    Boolean { theta: Vec<i8>, flip: f64 },
    Sparse { pattern: Vec<i8> },
}

impl ClusterLaw {
    pub fn new(spec: &ProblemSpec, theta: &ClusterParam) -> Result<Self> {
        theta.check(spec)?;
        let kind = match theta {
            ClusterParam::Gaussian(t) => {
                let l = spec.lambda();
                LawKind::Gaussian {
                    mean: t.iter().map(|&x| l * x).collect(),
                    sd: (1.0 - l * l).max(0.0).sqrt(),
                }
            }
            ClusterParam::Boolean(t) => {
                LawKind::Boolean { theta: t.clone(), flip: (1.0 - spec.lambda()) / 2.0 }
            }
            ClusterParam::Sparse { .. } => {
                LawKind::Sparse { pattern: theta.sparse_pattern().expect("sparse") }
            }
        };
        Ok(Self { kind, d: spec.d })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.kind {
            LawKind::Gaussian { mean, sd } => {
                if *sd == 0.0 {
                    return Point::Real(mean.clone());
                }
                Point::Real(
                    mean.iter()
                        .map(|&m| m + sd * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                )
            }
            LawKind::Boolean { theta, flip } => Point::Sign(
                theta.iter().map(|&t| if rng.random::<f64>() < *flip { -t } else { t }).collect(),
            ),
            LawKind::Sparse { pattern } => {
                let mut x = uniform_signs(self.d, rng);
                for (xi, &p) in x.iter_mut().zip(pattern) {
                    if p != 0 {
                        *xi = p;
                    }
                }
                Point::Sign(x)
            }
        }
    }

    pub fn sample_null<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self.kind {
            LawKind::Gaussian { .. } => {
                Point::Real((0..self.d).map(|_| rng.sample(StandardNormal)).collect())
            }
            _ => Point::Sign(uniform_signs(self.d, rng)),
        }
    }
}

/// `d` independent fair signs.
pub fn uniform_signs<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<i8> {
    let mut out = Vec::with_capacity(d);
    while out.len() < d {
        let mut bits: u64 = rng.random();
        for _ in 0..(d - out.len()).min(64) {
            out.push(if bits & 1 == 1 { 1 } else { -1 });
            bits >>= 1;
        }
    }
    out
}

pub fn sample_theta<R: Rng + ?Sized>(spec: &ProblemSpec, rng: &mut R) -> ClusterParam {
    match spec.family {
        Family::Gaussian => {
            ClusterParam::Gaussian((0..spec.d).map(|_| rng.sample(StandardNormal)).collect())
        }
        Family::Boolean => ClusterParam::Boolean(uniform_signs(spec.d, rng)),
        Family::SparseBoolean => {
            let nu = spec.nu();
            let mut support = Vec::new();
            let mut signs = Vec::new();
            for i in 0..spec.d {
                if rng.random::<f64>() < nu {
                    support.push(i);
                    signs.push(if rng.random::<bool>() { 1 } else { -1 });
                }
            }
            ClusterParam::Sparse { d: spec.d, support, signs }
        }
    }
}

pub fn sample_dataset<R: Rng + ?Sized>(
    spec: &ProblemSpec,
    theta: &ClusterParam,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let law = ClusterLaw::new(spec, theta)?;
    Dataset::from_points((0..n).map(|_| law.sample(rng)).collect())
}

pub fn sample_test<R: Rng + ?Sized>(
    spec: &ProblemSpec,
    theta: &ClusterParam,
    rng: &mut R,
) -> Result<LabeledTestPoint> {
    let law = ClusterLaw::new(spec, theta)?;
    Ok(draw_test(&law, rng))
}

pub(crate) fn draw_test<R: Rng + ?Sized>(law: &ClusterLaw, rng: &mut R) -> LabeledTestPoint {
    if rng.random::<bool>() {
        LabeledTestPoint { x: law.sample(rng), y: 1 }
    } else {
        LabeledTestPoint { x: law.sample_null(rng), y: 0 }
    }
}

pub fn sign_atom(x: &[i8]) -> u64 {
    x.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &s)| if s > 0 { acc | (1 << i) } else { acc })
}

pub fn atom_signs(atom: u64, d: usize) -> Vec<i8> {
    (0..d).map(|i| if atom >> i & 1 == 1 { 1 } else { -1 }).collect()
}

/// Largest dimension accepted by the enumeration oracles.
pub const MAX_ENUM_DIM: usize = 20;

/// Exact law of one positive sample as a probability vector indexed by atom.
pub fn exact_positive_probs(spec: &ProblemSpec, theta: &ClusterParam) -> Result<Vec<f64>> {
    if spec.family == Family::Gaussian {
        return Err(Error::Unsupported("exact pmf requires a sign-valued family".into()));
    }
    if spec.d > MAX_ENUM_DIM {
        return Err(Error::Unsupported(format!("d = {} exceeds {MAX_ENUM_DIM}", spec.d)));
    }
    theta.check(spec)?;
    // Per-coordinate probability of +1.
    let plus: Vec<f64> = match theta {
        ClusterParam::Boolean(t) => {
            let keep = (1.0 + spec.lambda()) / 2.0;
            t.iter().map(|&s| if s > 0 { keep } else { 1.0 - keep }).collect()
        }
        _ => theta
            .sparse_pattern()
            .expect("sparse")
            .iter()
            .map(|&p| match p {
                1 => 1.0,
                -1 => 0.0,
                _ => 0.5,
            })
            .collect(),
    };
    let size = 1usize << spec.d;
    let mut probs = vec![1.0; size];
    for (a, p) in probs.iter_mut().enumerate() {
        for (i, &q) in plus.iter().enumerate() {
            *p *= if a >> i & 1 == 1 { q } else { 1.0 - q };
        }
    }
    Ok(probs)
}

pub fn exact_positive_pmf(spec: &ProblemSpec, theta: &ClusterParam) -> Result<FinitePmf<f64>> {
    FinitePmf::from_probs(exact_positive_probs(spec, theta)?)
}

/// All parameters of a sign-valued family with their prior weights.
pub fn theta_support(spec: &ProblemSpec) -> Result<Vec<(ClusterParam, f64)>> {
    let d = spec.d;
    match spec.family {
        Family::Gaussian => Err(Error::Unsupported("gaussian prior is continuous".into())),
        Family::Boolean => {
            if d > MAX_ENUM_DIM {
                return Err(Error::Unsupported(format!("d = {d} too large to enumerate")));
            }
            let w = 0.5f64.powi(d as i32);
            Ok((0..1u64 << d).map(|a| (ClusterParam::Boolean(atom_signs(a, d)), w)).collect())
        }
        Family::SparseBoolean => {
            if d > 12 {
                return Err(Error::Unsupported(format!("d = {d} too large to enumerate")));
            }
            let nu = spec.nu();
            let mut out = Vec::new();
            // Each coordinate is off, +1 or -1.
            for code in 0..3usize.pow(d as u32) {
                let mut c = code;
                let (mut support, mut signs, mut w) = (Vec::new(), Vec::new(), 1.0);
                for i in 0..d {
                    match c % 3 {
                        0 => w *= 1.0 - nu,
                        r => {
                            support.push(i);
                            signs.push(if r == 1 { 1 } else { -1 });
                            w *= nu / 2.0;
                        }
                    }
                    c /= 3;
                }
                out.push((ClusterParam::Sparse { d, support, signs }, w));
            }
            Ok(out)
        }
    }
}

/// Monte Carlo error with a 95% Hoeffding half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub estimate: f64,
    pub ci_halfwidth: f64,
    pub trials: usize,
}

pub fn hoeffding_halfwidth(trials: usize) -> f64 {
    (40f64.ln() / (2.0 * trials as f64)).sqrt()
}

pub(crate) const BLOCK: usize = 512;

/// Runs `trials` independent 0/1 outcomes in fixed blocks, one stream per block,
/// so the result does not depend on the thread count.
pub(crate) fn mc_mean<F>(trials: usize, stream: &RngStream, f: F) -> f64
where
    F: Fn(&mut crate::rng::StreamRng) -> f64 + Sync,
{
    let blocks = trials.div_ceil(BLOCK);
    let sums: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.child(b as u64).rng();
            let m = BLOCK.min(trials - b * BLOCK);
            (0..m).map(|_| f(&mut rng)).sum::<f64>()
        })
        .collect();
    sums.iter().sum::<f64>() / trials as f64
}

pub fn estimate_error(
    h: &Hypothesis,
    spec: &ProblemSpec,
    theta: &ClusterParam,
    trials: usize,
    stream: &RngStream,
) -> Result<ErrorEstimate> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    if h.dim().is_some_and(|d| d != spec.d) {
        return invalid("hypothesis dimension does not match the problem");
    }
    let law = ClusterLaw::new(spec, theta)?;
    let estimate = mc_mean(trials, stream, |rng| {
        let t = draw_test(&law, rng);
        (h.predict(t.x.as_ref()) != (t.y == 1)) as u8 as f64
    });
    Ok(ErrorEstimate { estimate, ci_halfwidth: hoeffding_halfwidth(trials), trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::gaussian(4, 1.0).is_ok());
        assert!(ProblemSpec::boolean(4, 1.0).is_err());
        assert!(ProblemSpec::sparse(4, 0.0).is_err());
        assert!(ProblemSpec::gaussian(0, 0.5).is_err());
    }

    #[test]
    fn exact_pmf_examples() {
        let spec = ProblemSpec::boolean(1, 0.5).unwrap();
        let p = exact_positive_probs(&spec, &ClusterParam::Boolean(vec![1])).unwrap();
        assert_eq!(p, vec![0.25, 0.75]);
        let spec = ProblemSpec::sparse(2, 0.3).unwrap();
        let th = ClusterParam::Sparse { d: 2, support: vec![0], signs: vec![1] };
        let p = exact_positive_probs(&spec, &th).unwrap();
        // Atom bits: coordinate 0 is bit 0.
        assert_eq!(p, vec![0.0, 0.5, 0.0, 0.5]);
        assert!(exact_positive_probs(&ProblemSpec::gaussian(2, 0.5).unwrap(), &ClusterParam::Gaussian(vec![0.0; 2])).is_err());
    }

    #[test]
    fn atoms_round_trip() {
        for a in 0..32u64 {
            assert_eq!(sign_atom(&atom_signs(a, 5)), a);
        }
    }

    #[test]
    fn theta_support_weights_sum_to_one() {
        for spec in [ProblemSpec::boolean(3, 0.4).unwrap(), ProblemSpec::sparse(3, 0.2).unwrap()] {
            let s: f64 = theta_support(&spec).unwrap().iter().map(|t| t.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_lambda_one_is_noiseless() {
        let spec = ProblemSpec::gaussian(3, 1.0).unwrap();
        let th = ClusterParam::Gaussian(vec![0.5, -1.0, 2.0]);
        let mut rng = RngStream::new(1, 0).rng();
        let data = sample_dataset(&spec, &th, 4, &mut rng).unwrap();
        for row in data.as_real().unwrap() {
            assert_eq!(row, &vec![0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn zero_samples_rejected() {
        let spec = ProblemSpec::boolean(3, 0.5).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        let th = sample_theta(&spec, &mut rng);
        assert!(sample_dataset(&spec, &th, 0, &mut rng).is_err());
    }
}

//! Dominating-variable constructions and their exact verifiers.
//!
//! Each construction post-processes a single "dominating" variable into a
//! full training set. The verifiers compare the constructed law with the true
//! one, exactly by enumeration where the state space allows.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::probcore::{hockey_stick_delta, tv, FiniteChannel, FinitePmf};
use crate::problems::{atom_signs, exact_positive_probs, theta_support, uniform_signs, Dataset, Point, ProblemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DominatingFamily {
    GaussianTrain,
    BooleanTrain,
    SparseTrain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominatingSample {
    pub family: DominatingFamily,
    pub value: Point,
    /// `λ`, `ξ` or `ν`, depending on the family.
    pub param: f64,
    pub n: usize,
}

/// Outcome of one verifier, serialized as one JSON line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub params: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    pub pass: bool,
}

impl VerificationReport {
    fn new(check: &str, params: &[(&str, f64)], metrics: &[(&str, f64)], pass: bool) -> Self {
        let map = |kv: &[(&str, f64)]| kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self { check: check.into(), params: map(params), metrics: map(metrics), pass }
    }
}

/// Draws `G_{1:n} ~ N(0, σ²I)` and returns `X_i = G_i − Ḡ + mean`.
pub fn gaussian_expand_mean<R: Rng + ?Sized>(
    mean: &[f64],
    sigma2: f64,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if n == 0 || !(sigma2 > 0.0) || mean.is_empty() {
        return invalid("need n ≥ 1, sigma2 > 0 and a nonempty mean");
    }
    if n == 1 {
        return Dataset::real(vec![mean.to_vec()]);
    }
    let sd = sigma2.sqrt();
    let g: Vec<Vec<f64>> = (0..n)
        .map(|_| mean.iter().map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let d = mean.len();
    let gbar: Vec<f64> = (0..d).map(|i| g.iter().map(|r| r[i]).sum::<f64>() / n as f64).collect();
    let rows = g
        .into_iter()
        .map(|r| (0..d).map(|i| r[i] - gbar[i] + mean[i]).collect())
        .collect();
    Dataset::real(rows)
}

/// Mean scale and variance of the Gaussian dominating variable.
pub fn gaussian_dominating_params(lambda: f64, n: usize) -> (f64, f64) {
    let l2 = lambda * lambda;
    let den = 1.0 + (n as f64 - 1.0) * l2;
    (lambda * (n as f64).sqrt() / den.sqrt(), (1.0 - l2) / den)
}

/// One draw of `Z ~ N(a·θ, s²·I)` with `a = λ√n/√(1 + (n−1)λ²)`, `s² = (1 − λ²)/(1 + (n−1)λ²)`.
pub fn gaussian_dominating_train<R: Rng + ?Sized>(
    theta: &[f64],
    lambda: f64,
    n: usize,
    rng: &mut R,
) -> Result<DominatingSample> {
    if !(lambda > 0.0 && lambda < 1.0) || n == 0 {
        return invalid("need lambda in (0, 1) and n ≥ 1");
    }
    let (a, s2) = gaussian_dominating_params(lambda, n);
    let sd = s2.sqrt();
    let value = theta.iter().map(|&t| a * t + sd * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(DominatingSample { family: DominatingFamily::GaussianTrain, value: Point::Real(value), param: lambda, n })
}

/// Maps a Gaussian dominating sample to a training set distributed as `P_θ^n`:
/// rescale to the law of the sample mean, then expand.
pub fn gaussian_train_postprocess<R: Rng + ?Sized>(z: &DominatingSample, rng: &mut R) -> Result<Dataset> {
    let Point::Real(v) = &z.value else { return invalid("expected a real dominating sample") };
    let (a, _) = gaussian_dominating_params(z.param, z.n);
    let mean: Vec<f64> = v.iter().map(|x| x * z.param / a).collect();
    gaussian_expand_mean(&mean, 1.0 - z.param * z.param, z.n, rng)
}

/// Product law on `{±1}^n` with `P(X_i = +1) = p_plus`, indexed by sign atom.
fn product_bernoulli(n: usize, p_plus: f64) -> Vec<f64> {
    (0..1u64 << n)
        .map(|a| {
            let ones = a.count_ones() as i32;
            p_plus.powi(ones) * (1.0 - p_plus).powi(n as i32 - ones)
        })
        .collect()
}

/// Two components and a selector bias approximating a pair of mirrored product laws.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureDecomposition {
    pub rho: f64,
    pub comp_a: FinitePmf<f64>,
    pub comp_b: FinitePmf<f64>,
    pub target_delta: f64,
    /// Exact hockey-stick distance of the two product laws at `ε = ρ`.
    pub delta_star: f64,
    /// Largest atomwise gap between the `(1+ρ)/2` mixture and the trimmed law.
    pub reconstruction_error: f64,
}

pub const MAX_RR_N: usize = 20;

/// Decomposes the product laws with biases `(1 ± λ)/2` into components `A`, `B`
/// such that `((1+ρ)/2)A + ((1−ρ)/2)B` and its mirror are within the enumerated
/// hockey-stick distance `δ*` of them, with `ρ = √(8n·ln(1/δ))·λ`.
pub fn rr_decompose(lambda: f64, n: usize, delta: f64) -> Result<MixtureDecomposition> {
    if !(0.0..1.0).contains(&lambda) || !(delta > 0.0 && delta < 1.0) || n == 0 {
        return invalid("need lambda in [0, 1), delta in (0, 1) and n ≥ 1");
    }
    if n > MAX_RR_N {
        return Err(Error::Budget(format!("n = {n} exceeds {MAX_RR_N}")));
    }
    if 10.0 * n as f64 * lambda * lambda >= 1.0 {
        return Err(Error::Regime(format!("n·lambda² = {} is not below 1/10", n as f64 * lambda * lambda)));
    }
    let rho = (8.0 * n as f64 * (1.0 / delta).ln()).sqrt() * lambda;
    if rho >= 1.0 {
        return Err(Error::Regime(format!("rho = {rho} ≥ 1")));
    }
    let p = product_bernoulli(n, (1.0 + lambda) / 2.0);
    let q = product_bernoulli(n, (1.0 - lambda) / 2.0);
    let pp = FinitePmf::from_probs(p.clone())?;
    let qq = FinitePmf::from_probs(q.clone())?;
    let delta_star = hockey_stick_delta(&pp, &qq, rho)?;
    let e = rho.exp();
    let trim = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let m: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x.min(e * y)).collect();
        let s: f64 = m.iter().sum();
        m.into_iter().map(|x| x / s).collect()
    };
    let x1 = trim(&p, &q);
    let y1 = trim(&q, &p);
    let (a, b) = if rho == 0.0 {
        (x1.clone(), x1.clone())
    } else {
        let comb = |u: &[f64], v: &[f64]| -> Vec<f64> {
            u.iter()
                .zip(v)
                .map(|(&s, &t)| (((1.0 + rho) * s - (1.0 - rho) * t) / (2.0 * rho)).max(0.0))
                .collect()
        };
        (comb(&x1, &y1), comb(&y1, &x1))
    };
    let mix = mixture(&a, &b, rho);
    let reconstruction_error =
        mix.iter().zip(&x1).map(|(m, x)| (m - x).abs()).fold(0.0, f64::max);
    Ok(MixtureDecomposition {
        rho,
        comp_a: FinitePmf::from_weights((0..a.len() as u64).collect(), a)?,
        comp_b: FinitePmf::from_weights((0..b.len() as u64).collect(), b)?,
        target_delta: delta,
        delta_star,
        reconstruction_error,
    })
}

fn mixture(a: &[f64], b: &[f64], rho: f64) -> Vec<f64> {
    let w = (1.0 + rho) / 2.0;
    a.iter().zip(b).map(|(x, y)| w * x + (1.0 - w) * y).collect()
}

/// Exact TV between each product law and its claimed mixture; passes iff both are below `δ`.
pub fn verify_rr_decomposition(m: &MixtureDecomposition, lambda: f64, n: usize, delta: f64) -> Result<VerificationReport> {
    if n > MAX_RR_N {
        return Err(Error::Budget(format!("n = {n} exceeds {MAX_RR_N}")));
    }
    if m.comp_a.len() != 1 << n {
        return invalid("decomposition does not match n");
    }
    let p = FinitePmf::from_probs(product_bernoulli(n, (1.0 + lambda) / 2.0))?;
    let q = FinitePmf::from_probs(product_bernoulli(n, (1.0 - lambda) / 2.0))?;
    let (a, b) = (m.comp_a.probs(), m.comp_b.probs());
    let mx = FinitePmf::from_weights(p.atoms().to_vec(), mixture(a, b, m.rho))?;
    let my = FinitePmf::from_weights(p.atoms().to_vec(), mixture(b, a, m.rho))?;
    let tv_x = tv(&p, &mx)?;
    let tv_y = tv(&q, &my)?;
    Ok(VerificationReport::new(
        "rr_decomposition",
        &[("lambda", lambda), ("n", n as f64), ("delta", delta)],
        &[("rho", m.rho), ("tv_x", tv_x), ("tv_y", tv_y), ("delta_star", m.delta_star)],
        tv_x < delta && tv_y < delta,
    ))
}

/// `ξ = ν/(2ν + (1 − ν)·2^{2−n})`.
pub fn sparse_xi(nu: f64, n: usize) -> Result<f64> {
    if !(nu > 0.0 && nu < 1.0) || n == 0 {
        return invalid("need nu in (0, 1) and n ≥ 1");
    }
    Ok(nu / (2.0 * nu + (1.0 - nu) * 2f64.powi(2 - n as i32)))
}

/// Probability that a column is copied from the dominating coordinate.
pub fn sparse_constant_branch(nu: f64, n: usize) -> f64 {
    nu + (1.0 - nu) * 2f64.powi(1 - n as i32)
}

/// Per coordinate, copies `z_i` down the whole column with probability
/// `ν + (1 − ν)·2^{1−n}`, otherwise draws a uniform non-constant column.
pub fn sparse_post_process<R: Rng + ?Sized>(z: &[i8], nu: f64, n: usize, rng: &mut R) -> Result<Dataset> {
    if n == 0 || z.is_empty() {
        return invalid("need n ≥ 1 and a nonempty z");
    }
    let c = sparse_constant_branch(nu, n);
    let mut rows = vec![vec![0i8; z.len()]; n];
    for (i, &zi) in z.iter().enumerate() {
        if n == 1 || rng.random::<f64>() < c {
            rows.iter_mut().for_each(|r| r[i] = zi);
        } else {
            let col = loop {
                let col = uniform_signs(n, rng);
                if col.iter().any(|&s| s != col[0]) {
                    break col;
                }
            };
            rows.iter_mut().zip(col).for_each(|(r, s)| r[i] = s);
        }
    }
    Dataset::sign(rows)
}

/// Law of a post-processed column given the dominating coordinate `z`.
fn column_given_z(col: u64, z: bool, n: usize, c: f64) -> f64 {
    let full = (1u64 << n) - 1;
    let constant = col == 0 || col == full;
    if constant {
        if (col == full) == z {
            c
        } else {
            0.0
        }
    } else {
        (1.0 - c) / ((1u64 << n) - 2) as f64
    }
}

/// Exact per-coordinate joints of `(X_i, column)` for the true dataset and for
/// the post-processed dominating variable. Atom: bit 0 is `X_i`, bits 1..=n the column.
fn sparse_coordinate_joints(nu: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let xi = sparse_xi(nu, n)?;
    let c = sparse_constant_branch(nu, n);
    let size = 1usize << (n + 1);
    let full = (1u64 << n) - 1;
    let mut truth = vec![0.0; size];
    let mut built = vec![0.0; size];
    for atom in 0..size as u64 {
        let x = atom & 1 == 1;
        let col = atom >> 1;
        let copied = if x { col == full } else { col == 0 };
        truth[atom as usize] =
            nu * 0.5 * f64::from(u8::from(copied)) + (1.0 - nu) * 0.5 * 0.5f64.powi(n as i32);
        let keep = 0.5 + xi;
        built[atom as usize] = 0.5
            * (keep * column_given_z(col, x, n, c) + (1.0 - keep) * column_given_z(col, !x, n, c));
    }
    Ok((truth, built))
}

pub fn verify_sparse_postprocess(nu: f64, n: usize) -> Result<VerificationReport> {
    if n > 12 {
        return Err(Error::Budget(format!("n = {n} exceeds 12")));
    }
    let (truth, built) = sparse_coordinate_joints(nu, n)?;
    let tv = 0.5 * truth.iter().zip(&built).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let full = (1u64 << n) - 1;
    let equal_mass = |p: &[f64]| -> f64 {
        p.iter()
            .enumerate()
            .filter(|(a, _)| {
                let col = (*a as u64) >> 1;
                if a & 1 == 1 { col == full } else { col == 0 }
            })
            .map(|(_, &v)| v)
            .sum()
    };
    Ok(VerificationReport::new(
        "sparse_postprocess",
        &[("nu", nu), ("n", n as f64)],
        &[
            ("tv", tv),
            ("equal_mass_true", equal_mass(&truth)),
            ("equal_mass_built", equal_mass(&built)),
            ("equal_mass_formula", nu + (1.0 - nu) * 0.5f64.powi(n as i32)),
        ],
        tv <= 1e-10,
    ))
}

/// Full-joint check of `(X, Φ(Z))` against `(X, X_{1:n})` over
/// `{±1}^d × {±1}^{dn}`, summing over every sparse parameter.
pub fn verify_sparse_full_joint(d: usize, nu: f64, n: usize) -> Result<VerificationReport> {
    if d == 0 || n == 0 || d * (n + 1) > 16 {
        return Err(Error::Budget("full joint needs 1 ≤ d·(n+1) ≤ 16".into()));
    }
    let spec = ProblemSpec::sparse(d, nu)?;
    let xi = sparse_xi(nu, n)?;
    let c = sparse_constant_branch(nu, n);
    let dmask = (1u64 << d) - 1;
    let size = 1usize << (d * (n + 1));
    let mut truth = vec![0.0; size];
    let mut built = vec![0.0; size];
    // Column of coordinate i within a dataset atom, sample j at bits j·d..(j+1)·d.
    let column = |data: u64, i: usize| -> u64 {
        (0..n).fold(0u64, |acc, j| acc | ((data >> (j * d + i) & 1) << j))
    };
    let phi: Vec<Vec<f64>> = (0..1u64 << d)
        .map(|z| {
            (0..1u64 << (d * n))
                .map(|data| (0..d).map(|i| column_given_z(column(data, i), z >> i & 1 == 1, n, c)).product())
                .collect()
        })
        .collect();
    for (theta, w) in theta_support(&spec)? {
        let p = exact_positive_probs(&spec, &theta)?;
        for (x, &px) in p.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            let bsc: Vec<f64> = (0..1u64 << d)
                .map(|z| {
                    let agree = (!(z ^ x as u64) & dmask).count_ones() as i32;
                    (0.5 + xi).powi(agree) * (0.5 - xi).powi(d as i32 - agree)
                })
                .collect();
            for data in 0..1u64 << (d * n) {
                let atom = x | (data as usize) << d;
                let pd: f64 = (0..n).map(|j| p[(data >> (j * d) & dmask) as usize]).product();
                truth[atom] += w * px * pd;
                let pb: f64 = bsc.iter().zip(&phi).map(|(b, f)| b * f[data as usize]).sum();
                built[atom] += w * px * pb;
            }
        }
    }
    let tv = 0.5 * truth.iter().zip(&built).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(VerificationReport::new(
        "sparse_full_joint",
        &[("d", d as f64), ("nu", nu), ("n", n as f64)],
        &[("tv", tv)],
        tv <= 1e-10,
    ))
}

/// `|I(f(B₁); B₁) − I(f(B₂); B₂)|` for one kernel `f` applied to two input laws.
pub fn information_gap(b1: &FinitePmf<f64>, b2: &FinitePmf<f64>, kernel: &[Vec<f64>]) -> Result<f64> {
    let i1 = FiniteChannel::from_matrix(b1.clone(), kernel.to_vec())?.mutual_information();
    let i2 = FiniteChannel::from_matrix(b2.clone(), kernel.to_vec())?.mutual_information();
    Ok((i1 - i2).abs())
}

/// Sign vector of every atom of `{±1}^n`, in atom order.
pub fn sign_atoms(n: usize) -> Vec<Vec<i8>> {
    (0..1u64 << n).map(|a| atom_signs(a, n)).collect()
}

//! Strong data-processing coefficients and the excess-memorization bounds
//! built from them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::infotools::fano_c_alpha;
use crate::learners::{encoding::index_bits, majority_width};
use crate::probcore::{kl_probs, FiniteChannel};
use crate::problems::{Family, ProblemSpec};
use crate::rng::RngStream;
use crate::scalar::{xlogy, Real};

/// Coefficients of an approximate test/train and data-generation SDPI pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpiBound<T> {
    pub rho_n: T,
    pub tau_n: T,
    pub delta_n: T,
    pub eps_n: T,
    pub n: usize,
    /// `ln |M|`.
    pub log_model_space: T,
}

/// Grid resolution of the binary-input contraction search.
pub const CONTRACTION_GRID: usize = 10_000;

fn binary_ratio<T: Real>(ch: &FiniteChannel<T>, q: T) -> Option<T> {
    let p = ch.input().probs();
    let qv = [q, T::one() - q];
    let den = kl_probs(&qv, p);
    if !(den > T::lit(1e-12)) {
        return None;
    }
    let num = kl_probs(&ch.push_forward(&qv), &ch.push_forward(p));
    if num < T::epsilon() * T::lit(64.0) {
        return Some(T::zero());
    }
    Some(num / den)
}

/// `lim_{Q→P} D(QK‖PK)/D(Q‖P)` along the direction `e_a − e_b`.
fn local_ratio<T: Real>(ch: &FiniteChannel<T>, a: usize, b: usize) -> T {
    let p = ch.input().probs();
    let pk = ch.push_forward(p);
    let k = ch.kernel();
    let mut num = T::zero();
    for (y, &m) in pk.iter().enumerate() {
        if m > T::zero() {
            let diff = k[a][y] - k[b][y];
            num = num + diff * diff / m;
        }
    }
    num / (T::one() / p[a] + T::one() / p[b])
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max<T: Real>(lo: T, hi: T, f: impl Fn(T) -> Option<T>) -> T {
    let g = T::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let eval = |x: T| f(x).unwrap_or(T::neg_infinity());
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d);
        }
    }
    fc.max(fd)
}

/// Contraction coefficient `sup_Q D(QK‖PK)/D(Q‖P)` of a channel whose input
/// has exactly two atoms, by dense grid search, golden-section refinement and
/// the local limit at `Q = P`.
pub fn contraction_coeff_binary_input<T: Real>(channel: &FiniteChannel<T>) -> Result<T> {
    let p = channel.input().probs();
    if p.len() != 2 {
        return Err(Error::Unsupported("input must have exactly two atoms".into()));
    }
    if !(p[0] > T::zero() && p[1] > T::zero()) {
        return invalid("input pmf must not be deterministic");
    }
    let n = CONTRACTION_GRID;
    let grid: Vec<T> = (0..=n).map(|i| T::lit(i as f64 / n as f64)).collect();
    let mut best = local_ratio(channel, 0, 1);
    let mut arg = None;
    for (i, &q) in grid.iter().enumerate() {
        if let Some(r) = binary_ratio(channel, q) {
            if r > best {
                best = r;
                arg = Some(i);
            }
        }
    }
    if let Some(i) = arg {
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(n)];
        best = best.max(golden_max(lo, hi, |q| binary_ratio(channel, q)));
    }
    Ok(best.max(T::zero()).min(T::one()))
}

/// Lower estimate of the contraction coefficient for any finite input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    pub value: f64,
    /// Set when the search was restricted and `value` only bounds the supremum from below.
    pub lower_estimate: bool,
}

/// Searches two-point perturbations `P + t(e_a − e_b)` for every atom pair,
/// then `starts` random mixture directions `(1 − s)P + sR`.
pub fn contraction_coeff_estimate(
    channel: &FiniteChannel<f64>,
    starts: usize,
    stream: &RngStream,
) -> Result<ContractionEstimate> {
    let p = channel.input().probs().to_vec();
    let m = p.len();
    if m == 2 {
        let value = contraction_coeff_binary_input(channel)?;
        return Ok(ContractionEstimate { value, lower_estimate: false });
    }
    if p.iter().any(|&x| x <= 0.0) {
        return invalid("input pmf must have full support");
    }
    let pk = channel.push_forward(&p);
    let ratio = |q: &[f64]| -> Option<f64> {
        let den = kl_probs(q, &p);
        (den > 1e-12).then(|| kl_probs(&channel.push_forward(q), &pk) / den)
    };
    let line = |dir: &[f64], t: f64| -> Option<f64> {
        let q: Vec<f64> = p.iter().zip(dir).map(|(a, b)| (a + t * b).max(0.0)).collect();
        ratio(&q)
    };
    let search = |dir: &[f64], lo: f64, hi: f64| -> f64 {
        let steps = 200;
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0usize;
        for i in 0..=steps {
            let t = lo + (hi - lo) * i as f64 / steps as f64;
            if let Some(r) = line(dir, t) {
                if r > best {
                    best = r;
                    arg = i;
                }
            }
        }
        if best.is_finite() {
            let w = (hi - lo) / steps as f64;
            let a = lo + w * arg.saturating_sub(1) as f64;
            best = best.max(golden_max(a, (a + 2.0 * w).min(hi), |t| line(dir, t)));
        }
        best
    };
    let mut best = 0.0f64;
    for a in 0..m {
        for b in (a + 1)..m {
            best = best.max(local_ratio(channel, a, b));
            let mut dir = vec![0.0; m];
            dir[a] = 1.0;
            dir[b] = -1.0;
            best = best.max(search(&dir, -p[a], p[b]));
        }
    }
    let mut rng = stream.rng();
    for _ in 0..starts {
        let mut r: Vec<f64> = (0..m).map(|_| -rng.random::<f64>().ln()).collect();
        let s: f64 = r.iter().sum();
        r.iter_mut().for_each(|x| *x /= s);
        let dir: Vec<f64> = r.iter().zip(&p).map(|(a, b)| a - b).collect();
        best = best.max(search(&dir, 0.0, 1.0));
    }
    Ok(ContractionEstimate { value: best.clamp(0.0, 1.0), lower_estimate: true })
}

/// `(τ_n, ρ_n) = (λ²n, λ⁴n)/(1 + (n − 1)λ²)` for the Gaussian problem.
pub fn gaussian_sdpi_coeffs<T: Real>(lambda: T, n: usize) -> Result<(T, T)> {
    if !(lambda > T::zero() && lambda < T::one()) || n == 0 {
        return invalid("need lambda in (0, 1) and n ≥ 1");
    }
    let l2 = lambda * lambda;
    let nn = T::lit(n as f64);
    let den = T::one() + (nn - T::one()) * l2;
    Ok((l2 * nn / den, l2 * l2 * nn / den))
}

/// Argument of the logarithm in the composition width `ξ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogArgument {
    /// `ln(1/δ)`.
    #[default]
    InvDelta,
    /// `ln(d/δ)`, the per-coordinate union-bound variant.
    DimOverDelta,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BooleanCoeffs<T> {
    pub xi: T,
    pub tau: T,
    pub rho: T,
    pub tv_slack: T,
}

/// `ξ = √(8n·ln(·))·λ`, giving `(ξ², δd)` data-generation and `λ²ξ²` test/train coefficients.
pub fn boolean_sdpi_coeffs<T: Real>(
    lambda: T,
    n: usize,
    delta: T,
    d: usize,
    log_arg: LogArgument,
) -> Result<BooleanCoeffs<T>> {
    if !(lambda > T::zero() && lambda < T::one()) || !(delta > T::zero() && delta < T::one()) {
        return invalid("need lambda and delta in (0, 1)");
    }
    if n == 0 || d == 0 {
        return invalid("need n, d ≥ 1");
    }
    let dd = T::lit(d as f64);
    let log = match log_arg {
        LogArgument::InvDelta => (T::one() / delta).ln(),
        LogArgument::DimOverDelta => (dd / delta).ln(),
    };
    let xi = (T::lit(8.0 * n as f64) * log).sqrt() * lambda;
    if xi >= T::one() {
        return Err(Error::Regime(format!(
            "composition width xi = {xi:?} ≥ 1 (lambda = {lambda:?}, n = {n}, delta = {delta:?})"
        )));
    }
    let tau = xi * xi;
    Ok(BooleanCoeffs { xi, tau, rho: lambda * lambda * tau, tv_slack: delta * dd })
}

/// `δ·ln(M/δ)` with the value 0 at `δ = 0`.
fn slack_term<T: Real>(delta: T, ln_m: T) -> T {
    if delta <= T::zero() {
        T::zero()
    } else {
        delta * (ln_m - delta.ln())
    }
}

/// `max(0, ((1 − τ)/ρ)·C_α − neg_n)`.
pub fn excess_mem_bound<T: Real>(b: &SdpiBound<T>, alpha: T) -> Result<T> {
    if !(b.rho_n > T::zero()) {
        return invalid("rho_n must be positive");
    }
    if b.delta_n < T::zero() || b.eps_n < T::zero() || b.tau_n > T::one() {
        return invalid("slacks must be nonnegative and tau_n at most 1");
    }
    let c = fano_c_alpha(alpha)?;
    let eight = T::lit(8.0);
    let ratio = (T::one() - b.tau_n) / b.rho_n;
    let neg = eight * ratio * slack_term(b.delta_n, b.log_model_space)
        + eight * slack_term(b.eps_n, b.log_model_space);
    Ok((ratio * c - neg).max(T::zero()))
}

/// Variant without a data-generation SDPI:
/// `(C_α − 8δ·ln(M/δ))/ρ − I(A; θ)`, where `mi_theta` bounds `I(A; θ)` from above.
pub fn excess_mem_bound_direct<T: Real>(
    rho: T,
    delta: T,
    log_model_space: T,
    alpha: T,
    mi_theta: T,
) -> Result<T> {
    if !(rho > T::zero()) {
        return invalid("rho must be positive");
    }
    let c = fano_c_alpha(alpha)?;
    Ok((c - T::lit(8.0) * slack_term(delta, log_model_space)) / rho - mi_theta)
}

/// Explicit Boolean bound at a given `δ`:
/// `((1 − 8λ²nL)/(8λ⁴nL))(C_α − 8δd) − 8δd·ln(|M|/(δd))` with `L = ln(d/δ)`.
pub fn boolean_lower_at_delta(lambda: f64, n: usize, d: usize, alpha: f64, ln_m: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid("delta must lie in (0, 1)");
    }
    let c = fano_c_alpha(alpha)?;
    let l = (d as f64 / delta).ln();
    let l2 = lambda * lambda;
    let nn = n as f64;
    let dd = delta * d as f64;
    Ok((1.0 - 8.0 * l2 * nn * l) / (8.0 * l2 * l2 * nn * l) * (c - 8.0 * dd)
        - 8.0 * dd * (ln_m - dd.ln()))
}

/// `δ = min{1/2, C_α/(16d), (C_α(1 − 8λ²n·ln d)/(256·d·λ⁴n·ln d·ln|M|))²}`.
pub fn boolean_default_delta(lambda: f64, n: usize, d: usize, alpha: f64, ln_m: f64) -> Result<f64> {
    let c = fano_c_alpha(alpha)?;
    let ld = (d as f64).ln();
    let l2 = lambda * lambda;
    let nn = n as f64;
    let third = (c * (1.0 - 8.0 * l2 * nn * ld) / (256.0 * d as f64 * l2 * l2 * nn * ld * ln_m)).powi(2);
    Ok(0.5f64.min(c / (16.0 * d as f64)).min(third))
}

/// Binary entropy in nats.
pub fn binary_entropy<T: Real>(p: T) -> T {
    -(xlogy(p, p) + xlogy(T::one() - p, T::one() - p))
}

/// Entropy of the sparse prior: `d·h(ν) + dν·ln 2`.
pub fn sparse_theta_entropy(d: usize, nu: f64) -> f64 {
    d as f64 * (binary_entropy(nu) + nu * std::f64::consts::LN_2)
}

/// Per-family constants entering the curves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub c_sub: f64,
    pub c_ell: f64,
    /// `c` in the sparse regime `n ≤ c·ln d`.
    pub sparse_regime_c: f64,
    /// `ln |M|` for the Boolean δ-penalty; defaults to the majority learner's `t·ln 2`.
    pub ln_model_space: Option<f64>,
}

impl Default for CurveParams {
    fn default() -> Self {
        Self { c_sub: 16.0, c_ell: 16.0, sparse_regime_c: 0.25, ln_model_space: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub n: usize,
    pub lower_nats: f64,
    pub upper_nats: f64,
    pub in_regime: bool,
    pub annotations: String,
}

/// Lower and upper memorization curves over `n_grid`. Out-of-regime points are
/// kept and flagged.
pub fn lower_bound_curve(
    spec: &ProblemSpec,
    alpha: f64,
    n_grid: &[usize],
    extra: &CurveParams,
) -> Result<Vec<TradeoffPoint>> {
    let spec = spec.validated()?;
    let c = fano_c_alpha(alpha)?;
    let d = spec.d;
    let ln2 = std::f64::consts::LN_2;
    let mut out = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        if n == 0 {
            return invalid("n_grid entries must be at least 1");
        }
        let nn = n as f64;
        let point = match spec.family {
            Family::Gaussian => {
                let l = spec.lambda();
                let l2 = l * l;
                let lower = (1.0 - l2) / (l2 * l2 * nn) * c;
                let nm = crate::infotools::gaussian_noisy_mean_mi_closed_form(d, n, l)?;
                TradeoffPoint {
                    n,
                    lower_nats: lower,
                    upper_nats: d as f64 / nn * ln2,
                    in_regime: true,
                    annotations: format!("noisy_mean_closed_form={nm:.6e}"),
                }
            }
            Family::Boolean => {
                let l = spec.lambda();
                let l2 = l * l;
                let t = majority_width(d, n, extra.c_sub);
                let ln_m = extra.ln_model_space.unwrap_or(t as f64 * ln2);
                let (lower, in_regime, note) = if c > 0.0 {
                    let big_l = (d as f64 * nn / c).ln();
                    let lower = ((1.0 - 8.0 * l2 * nn * big_l) / (8.0 * l2 * l2 * nn * big_l) * c).max(0.0);
                    let in_regime = 8.0 * l2 * nn * big_l <= 0.5;
                    let delta = boolean_default_delta(l, n, d, alpha, ln_m)?;
                    let note = if delta > 0.0 && delta < 1.0 {
                        let v = boolean_lower_at_delta(l, n, d, alpha, ln_m, delta)?;
                        format!("delta={delta:.6e};delta_penalized={v:.6e};ln_M={ln_m:.6e}")
                    } else {
                        format!("delta={delta:.6e};delta_penalized=undefined;ln_M={ln_m:.6e}")
                    };
                    (lower, in_regime, note)
                } else {
                    (0.0, true, "C_alpha=0".to_string())
                };
                TradeoffPoint {
                    n,
                    lower_nats: lower,
                    upper_nats: t as f64 * ln2,
                    in_regime,
                    annotations: format!("{note};t={t};majority_constant=unspecified"),
                }
            }
            Family::SparseBoolean => {
                let nu = spec.nu();
                let h = sparse_theta_entropy(d, nu);
                let raw = c / (nu * nu * 4f64.powi(n as i32)) - h;
                let ell = ((extra.c_ell * d as f64 / 4f64.powi(n as i32)).ceil().max(1.0) as usize).min(d);
                let upper = ell as f64 * (1.0 + f64::from(index_bits(d))) * ln2;
                TradeoffPoint {
                    n,
                    lower_nats: raw.max(0.0),
                    upper_nats: upper,
                    in_regime: nn <= extra.sparse_regime_c * (d as f64).ln(),
                    annotations: format!("raw_lower={raw:.6e};H_theta={h:.6e};leading_constant=1"),
                }
            }
        };
        out.push(point);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probcore::FinitePmf;

    fn uniform() -> FinitePmf<f64> {
        FinitePmf::from_probs(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn bsc_contraction() {
        let ch = FiniteChannel::bsc(uniform(), 0.25).unwrap();
        assert!((contraction_coeff_binary_input(&ch).unwrap() - 0.25).abs() < 1e-3);
        let id = FiniteChannel::bsc(uniform(), 0.0).unwrap();
        assert!((contraction_coeff_binary_input(&id).unwrap() - 1.0).abs() < 1e-9);
        let flat = FiniteChannel::from_matrix(uniform(), vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        assert_eq!(contraction_coeff_binary_input(&flat).unwrap(), 0.0);
        let det = FinitePmf::from_probs(vec![1.0, 0.0]).unwrap();
        assert!(contraction_coeff_binary_input(&FiniteChannel::bsc(det, 0.1).unwrap()).is_err());
    }

    #[test]
    fn general_estimate_reduces_to_binary() {
        let ch = FiniteChannel::bsc(uniform(), 0.1).unwrap();
        let e = contraction_coeff_estimate(&ch, 4, &RngStream::new(0, 0)).unwrap();
        assert!(!e.lower_estimate);
        let p3 = FinitePmf::from_probs(vec![0.2, 0.3, 0.5]).unwrap();
        let id3 = FiniteChannel::from_matrix(p3, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let e = contraction_coeff_estimate(&id3, 4, &RngStream::new(0, 0)).unwrap();
        assert!(e.lower_estimate && (e.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gaussian_coeffs() {
        let (t, r) = gaussian_sdpi_coeffs::<f64>(0.5, 1).unwrap();
        assert!((t - 0.25).abs() < 1e-15 && (r - 0.0625).abs() < 1e-15);
        let (t, r) = gaussian_sdpi_coeffs::<f64>(0.5, 2).unwrap();
        assert!((t - 0.4).abs() < 1e-15 && (r - 0.1).abs() < 1e-15);
    }

    #[test]
    fn boolean_coeffs() {
        let b = boolean_sdpi_coeffs::<f64>(0.05, 4, 0.1, 10, LogArgument::InvDelta).unwrap();
        assert!((b.xi - 0.4292).abs() < 1e-4);
        assert!((b.tau - 0.1842).abs() < 1e-4);
        assert!((b.rho - 4.605e-4).abs() < 1e-6);
        assert!((b.tv_slack - 1.0).abs() < 1e-15);
        let b4 = boolean_sdpi_coeffs::<f64>(0.05, 16, 0.1, 10, LogArgument::InvDelta).unwrap();
        assert!((b4.xi - 2.0 * b.xi).abs() < 1e-12);
        assert!(matches!(boolean_sdpi_coeffs(0.5, 4, 0.1, 10, LogArgument::InvDelta), Err(Error::Regime(_))));
        let wide = boolean_sdpi_coeffs::<f64>(0.05, 4, 0.1, 10, LogArgument::DimOverDelta).unwrap();
        assert!(wide.xi > b.xi);
    }

    #[test]
    fn excess_bound_examples() {
        let b = SdpiBound { rho_n: 0.1, tau_n: 0.5, delta_n: 0.0, eps_n: 0.0, n: 1, log_model_space: 10.0 };
        assert!((excess_mem_bound(&b, 1.0 / 3.0).unwrap() - 5.0 * 2f64.ln() / 3.0).abs() < 1e-12);
        let one = SdpiBound { tau_n: 1.0, ..b };
        assert_eq!(excess_mem_bound(&one, 1.0 / 3.0).unwrap(), 0.0);
        let bad = SdpiBound { rho_n: 0.0, ..b };
        assert!(excess_mem_bound(&bad, 1.0 / 3.0).is_err());
    }

    #[test]
    fn curve_examples() {
        let spec = ProblemSpec::gaussian(4096, 0.5).unwrap();
        let pts = lower_bound_curve(&spec, 1.0 / 3.0, &[1], &CurveParams::default()).unwrap();
        assert!((pts[0].lower_nats - 12.0 * 2f64.ln() / 3.0).abs() < 1e-12);
        for spec in [spec, ProblemSpec::boolean(256, 0.1).unwrap(), ProblemSpec::sparse(256, 0.1).unwrap()] {
            let pts = lower_bound_curve(&spec, 0.5, &[1, 2, 3], &CurveParams::default()).unwrap();
            assert!(pts.iter().all(|p| p.lower_nats == 0.0));
        }
    }
}

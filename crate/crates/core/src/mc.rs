//! Monte Carlo checks of the superposition scheme.
//!
//! [`estimate_rates`] recovers the three scheme rates from sampled covariances.
//! [`run_trials`] runs finite blocklength random coding: the primary codebook
//! holds `M1` i.i.d. unit Gaussian sequences `V`, the cognitive one `M2`
//! sequences `U`, and the transmitters send
//!
//! ```text
//! X1 = sqrt(P1) V(m1)
//! X2 = sgn(a) sqrt(alpha P2) V(m1) + sqrt((1 - alpha) P2) U(m2)
//! ```
//!
//! so that `Y1 = g V + c U + Z1` with `g = sqrt(P1) + |a| sqrt(alpha P2)` and
//! `c = a sqrt((1 - alpha) P2)`.
//!
//! Two codebook modes exist. [`CodebookMode::Explicit`] draws every codeword
//! and decodes by exhaustive search, capped at `M1 M2 <= 2^20`.
//! [`CodebookMode::Implicit`] draws only the transmitted `V`, the `U` book and
//! the noise. Whether one of the `M1 - 1` unsent `V` codewords beats the truth
//! is then sampled from its exact probability, which lets the primary rate go
//! far beyond the explicit cap. The two modes have the same error law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::bounds::inner_lemma2;
use crate::error::{CzicError, Result};
use crate::model::{check_unit, ChannelParams};
use crate::{derive_seed, half_log2};

/// Largest `M1 * M2` searched exhaustively per trial.
pub const EXPLICIT_CAP: u64 = 1 << 20;
/// Largest `n * r1` accepted in implicit mode (`M1` must fit a `u64`).
pub const IMPLICIT_MAX_BITS: f64 = 62.0;
pub const MIN_SAMPLES: usize = 1000;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

const BATCHES: usize = 20;
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    JointMl,
    Successive,
}

impl std::str::FromStr for Decoder {
    type Err = CzicError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint_ml" => Ok(Decoder::JointMl),
            "successive" => Ok(Decoder::Successive),
            _ => Err(CzicError::malformed(format!("unknown decoder '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CodebookMode {
    #[default]
    Explicit,
    Implicit,
}

impl std::str::FromStr for CodebookMode {
    type Err = CzicError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(CodebookMode::Explicit),
            "implicit" => Ok(CodebookMode::Implicit),
            _ => Err(CzicError::malformed(format!("unknown codebook mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ChannelParams,
    pub alpha: f64,
    pub n: usize,
    pub r1: f64,
    pub r2: f64,
    pub trials: usize,
    pub seed: u64,
    pub decoder1: Decoder,
    #[serde(default)]
    pub codebook: CodebookMode,
    /// Sample count for the accompanying rate estimate.
    pub samples: usize,
}

impl SimConfig {
    pub fn new(params: ChannelParams, alpha: f64, n: usize, r1: f64, r2: f64) -> Self {
        SimConfig {
            params,
            alpha,
            n,
            r1,
            r2,
            trials: 500,
            seed: 0,
            decoder1: Decoder::JointMl,
            codebook: CodebookMode::Explicit,
            samples: 100_000,
        }
    }

    /// Checks the configuration and returns the codebook sizes `(M1, M2)`.
    pub fn codebook_sizes(&self) -> Result<(u64, u64)> {
        check_unit("alpha", self.alpha)?;
        if self.n == 0 {
            return Err(CzicError::domain("block length n must be positive"));
        }
        if self.trials == 0 {
            return Err(CzicError::domain("trials must be positive"));
        }
        for (name, r) in [("r1", self.r1), ("r2", self.r2)] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(CzicError::domain(format!("{name} = {r} must be a nonnegative rate")));
            }
        }
        let bits1 = self.n as f64 * self.r1;
        let bits2 = self.n as f64 * self.r2;
        if bits2 > 20.0 + 1e-9 {
            return Err(CzicError::CodebookCap(format!("M2 = 2^{bits2:.2} exceeds 2^20")));
        }
        let m2 = codebook_size(bits2);
        match self.codebook {
            CodebookMode::Explicit => {
                if bits1 + bits2 > 40.0 {
                    return Err(CzicError::CodebookCap(format!(
                        "M1 M2 = 2^{:.2} exceeds 2^20",
                        bits1 + bits2
                    )));
                }
                let m1 = codebook_size(bits1);
                if m1.saturating_mul(m2) > EXPLICIT_CAP {
                    return Err(CzicError::CodebookCap(format!("M1 M2 = {m1} * {m2} exceeds 2^20")));
                }
                Ok((m1, m2))
            }
            CodebookMode::Implicit => {
                if bits1 > IMPLICIT_MAX_BITS {
                    return Err(CzicError::CodebookCap(format!(
                        "M1 = 2^{bits1:.2} exceeds 2^{IMPLICIT_MAX_BITS}"
                    )));
                }
                Ok((codebook_size(bits1), m2))
            }
        }
    }
}

/// `ceil(2^bits)`, ignoring floating point spill-over just above a power of two.
pub fn codebook_size(bits: f64) -> u64 {
    (bits.exp2() - 1e-9).ceil().max(1.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u64,
    pub seed: u64,
    pub err1: bool,
    pub err2: bool,
    /// Per-block empirical powers of `X1` and `X2`.
    pub power: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub config: SimConfig,
    pub m1: u64,
    pub m2: u64,
    pub err1_count: u64,
    pub err2_count: u64,
    pub err1_rate: f64,
    pub err2_rate: f64,
    pub ci1: [f64; 2],
    pub ci2: [f64; 2],
    pub empirical_power: [f64; 2],
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> [f64; 2] {
    if n == 0 {
        return [0.0, 1.0];
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    [lo, hi]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimates {
    /// `[I(X1;Y1|U), I(U;Y2), I(X1,X2;Y1)]` in bits.
    pub values: [f64; 3],
    /// Batch-means standard errors of `values`.
    pub std_err: [f64; 3],
    pub samples: usize,
}

// Variable order in the covariance accumulators.
const X1: usize = 0;
const X2: usize = 1;
const U: usize = 2;
const Y1: usize = 3;
const Y2: usize = 4;
const NV: usize = 5;

#[derive(Clone, Copy)]
struct Moments {
    count: f64,
    sum: [f64; NV],
    prod: [[f64; NV]; NV],
}

impl Moments {
    fn zero() -> Self {
        Moments {
            count: 0.0,
            sum: [0.0; NV],
            prod: [[0.0; NV]; NV],
        }
    }

    fn push(&mut self, x: &[f64; NV]) {
        self.count += 1.0;
        for i in 0..NV {
            self.sum[i] += x[i];
            for j in i..NV {
                self.prod[i][j] += x[i] * x[j];
            }
        }
    }

    fn merge(&mut self, o: &Moments) {
        self.count += o.count;
        for i in 0..NV {
            self.sum[i] += o.sum[i];
            for j in i..NV {
                self.prod[i][j] += o.prod[i][j];
            }
        }
    }

    fn covariance(&self) -> [[f64; NV]; NV] {
        let mut c = [[0.0; NV]; NV];
        let n = self.count;
        for i in 0..NV {
            for j in i..NV {
                let v = (self.prod[i][j] - self.sum[i] * self.sum[j] / n) / (n - 1.0);
                c[i][j] = v;
                c[j][i] = v;
            }
        }
        c
    }
}

/// Residual variance of `y` after linear regression on `given`, by pivoted
/// elimination. Conditioning variables whose residual variance is negligible
/// are skipped, so collinear sets (alpha = 1) and silent inputs (P1 = 0) work.
fn conditional_variance(cov: &[[f64; NV]; NV], y: usize, given: &[usize]) -> f64 {
    let mut c = *cov;
    for &k in given {
        let pivot = c[k][k];
        if pivot <= PIVOT_TOL * cov[k][k].max(1.0) {
            continue;
        }
        let row = c[k];
        for i in 0..NV {
            let f = c[i][k] / pivot;
            for j in 0..NV {
                c[i][j] -= f * row[j];
            }
        }
    }
    c[y][y]
}

fn rates_from(cov: &[[f64; NV]; NV]) -> Result<[f64; 3]> {
    let ratio = |y: usize, coarse: &[usize], fine: &[usize]| -> Result<f64> {
        let top = conditional_variance(cov, y, coarse);
        let bottom = conditional_variance(cov, y, fine);
        if !(top > 0.0 && bottom > 0.0) {
            return Err(CzicError::Degenerate(format!(
                "residual variance {bottom:.3e} of {y} is not positive"
            )));
        }
        Ok(half_log2(top / bottom).max(0.0))
    };
    Ok([
        ratio(Y1, &[U], &[U, X1])?,
        ratio(Y2, &[], &[U])?,
        ratio(Y1, &[], &[X1, X2])?,
    ])
}

fn v_sign(a: f64) -> f64 {
    if a < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Estimates the three scheme rates from `samples` draws of the transmitted
/// and received symbols.
pub fn estimate_rates(params: &ChannelParams, alpha: f64, samples: usize, seed: u64) -> Result<RateEstimates> {
    check_unit("alpha", alpha)?;
    if samples < MIN_SAMPLES {
        return Err(CzicError::domain(format!(
            "samples = {samples} must be at least {MIN_SAMPLES}"
        )));
    }
    let (sp1, sv, su) = (
        params.p1().sqrt(),
        v_sign(params.a()) * (alpha * params.p2()).sqrt(),
        ((1.0 - alpha) * params.p2()).sqrt(),
    );
    let a = params.a();
    let batches: Vec<Moments> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b as u64]));
            let len = samples / BATCHES + usize::from(b < samples % BATCHES);
            let mut m = Moments::zero();
            for _ in 0..len {
                let v: f64 = rng.sample(StandardNormal);
                let u: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let x1 = sp1 * v;
                let x2 = sv * v + su * u;
                m.push(&[x1, x2, u, x1 + a * x2 + z1, x2 + z2]);
            }
            m
        })
        .collect();
    let mut total = Moments::zero();
    for m in &batches {
        total.merge(m);
    }
    let values = rates_from(&total.covariance())?;
    let per_batch = batches
        .iter()
        .map(|m| rates_from(&m.covariance()))
        .collect::<Result<Vec<_>>>()?;
    let mut std_err = [0.0; 3];
    for (k, se) in std_err.iter_mut().enumerate() {
        let mean = per_batch.iter().map(|r| r[k]).sum::<f64>() / BATCHES as f64;
        let var = per_batch.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
        *se = (var / BATCHES as f64).sqrt();
    }
    Ok(RateEstimates {
        values,
        std_err,
        samples,
    })
}

/// Closed forms that [`estimate_rates`] converges to.
pub fn closed_form_rates(params: &ChannelParams, alpha: f64) -> Result<[f64; 3]> {
    let set = inner_lemma2(params, alpha)?;
    Ok([set.r1_max, set.r2_max, set.sum_max])
}

/// CDF at `x` of the noncentral chi-square law with `k` degrees of freedom and
/// noncentrality `lambda`, as a Poisson mixture of central laws.
///
/// The central CDFs are taken from the top of the mixture down, adding the
/// positive increments `P(a - 1, h) = P(a, h) + h^(a-1) e^-h / Gamma(a)`, so
/// small values keep full relative precision.
pub fn ncx2_cdf(x: f64, k: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let h = 0.5 * x;
    let half_k = 0.5 * k;
    if lambda <= 0.0 {
        return gamma_lr(half_k, h);
    }
    let mu = 0.5 * lambda;
    let top = (mu + 12.0 * mu.sqrt() + 40.0).ceil() as usize;
    let ln_mu = mu.ln();
    let ln_h = h.ln();
    let mut central = gamma_lr(half_k + top as f64, h);
    let mut total = 0.0;
    for j in (0..=top).rev() {
        let jf = j as f64;
        let weight = (jf * ln_mu - mu - ln_gamma(jf + 1.0)).exp();
        total += weight * central;
        let a = half_k + jf;
        central += ((a - 1.0) * ln_h - h - ln_gamma(a)).exp();
    }
    total.clamp(0.0, 1.0)
}

/// Inverse of [`ncx2_cdf`] restricted to `[0, hi]`, by bisection.
fn ncx2_quantile_below(p: f64, k: f64, lambda: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if ncx2_cdf(mid, k, lambda) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn normal_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum()
}

/// Unit vector from the von Mises-Fisher law with mean direction `mean`
/// (unit) and concentration `kappa`, by Wood's rejection sampler.
fn sample_vmf<R: Rng>(rng: &mut R, mean: &[f64], kappa: f64) -> Vec<f64> {
    let n = mean.len();
    if n == 1 {
        // P(+mean) / P(-mean) = e^(2 kappa)
        let plus = rng.random::<f64>() * (1.0 + (-2.0 * kappa).exp()) < 1.0;
        return vec![if plus { mean[0] } else { -mean[0] }];
    }
    let d = (n - 1) as f64;
    let b = d / (2.0 * kappa + (4.0 * kappa * kappa + d * d).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + d * (1.0 - x0 * x0).ln();
    let beta = Beta::new(0.5 * d, 0.5 * d).expect("positive shape");
    let w = loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + d * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };
    let mut perp = normal_vec(rng, n);
    let along: f64 = perp.iter().zip(mean).map(|(p, m)| p * m).sum();
    for (p, m) in perp.iter_mut().zip(mean) {
        *p -= along * m;
    }
    let len = norm2(&perp).sqrt();
    let s = (1.0 - w * w).max(0.0).sqrt();
    mean.iter()
        .zip(&perp)
        .map(|(m, p)| w * m + if len > 0.0 { s * p / len } else { 0.0 })
        .collect()
}

/// Ball `{phi : |phi - centre|^2 <= radius2}` hit by a standard Gaussian
/// `phi` with probability `mass`.
struct Ball {
    centre: Vec<f64>,
    norm2: f64,
    mass: f64,
}

/// Standard Gaussian vector conditioned to land in `ball`.
fn sample_in_ball<R: Rng>(rng: &mut R, ball: &Ball, radius2: f64) -> Vec<f64> {
    let n = ball.centre.len();
    let k = n as f64;
    // phi - centre ~ N(-centre, I): its squared length is noncentral chi-square
    // and, given the length, its direction is von Mises-Fisher about -centre.
    let target = rng.random::<f64>() * ball.mass;
    let len = ncx2_quantile_below(target, k, ball.norm2, radius2).sqrt();
    let centre_len = ball.norm2.sqrt();
    let dir = if centre_len > 0.0 {
        let mean: Vec<f64> = ball.centre.iter().map(|c| -c / centre_len).collect();
        sample_vmf(rng, &mean, len * centre_len)
    } else {
        let g = normal_vec(rng, n);
        let l = norm2(&g).sqrt();
        g.into_iter().map(|x| x / l).collect()
    };
    ball.centre.iter().zip(dir).map(|(c, d)| c + len * d).collect()
}

/// Whether at least one of `draws` independent standard Gaussian vectors
/// lands in the union of `balls` (common squared radius `radius2`).
///
/// With total mass `S <= 1`, each draw is a candidate with probability `S`;
/// a candidate picks a ball in proportion to its mass, a point inside it, and
/// is kept with probability one over the number of balls covering that point.
/// A kept candidate therefore occurs with exactly the union probability.
fn union_hit<R: Rng>(rng: &mut R, balls: &[Ball], radius2: f64, draws: u64) -> bool {
    let covering = |phi: &[f64]| balls.iter().filter(|b| dist2(phi, &b.centre) <= radius2).count();
    let total: f64 = balls.iter().map(|b| b.mass).sum();
    if draws == 0 || total <= 0.0 {
        return false;
    }
    if total > 1.0 {
        // every draw hits with probability at least max mass >= 1 / balls
        let n = balls[0].centre.len();
        for _ in 0..draws {
            if covering(&normal_vec(rng, n)) > 0 {
                return true;
            }
        }
        return false;
    }
    let candidates = Binomial::new(draws, total).expect("valid binomial").sample(rng);
    for _ in 0..candidates {
        let mut pick = rng.random::<f64>() * total;
        let mut idx = balls.len() - 1;
        for (i, b) in balls.iter().enumerate() {
            if pick < b.mass {
                idx = i;
                break;
            }
            pick -= b.mass;
        }
        let phi = sample_in_ball(rng, &balls[idx], radius2);
        let cover = covering(&phi).max(1);
        if rng.random::<f64>() * (cover as f64) < 1.0 {
            return true;
        }
    }
    false
}

/// Index of the row of `book` (rows of length `y.len()`) minimising
/// `|y - scale * row|^2`; ties go to the lowest index.
fn nearest(y: &[f64], scale: f64, book: &[f64]) -> usize {
    let n = y.len();
    let mut best = (f64::INFINITY, 0);
    for (i, row) in book.chunks_exact(n).enumerate() {
        let d: f64 = y.iter().zip(row).map(|(a, b)| (a - scale * b).powi(2)).sum();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

struct Scheme {
    sp1: f64,
    sv: f64,
    su: f64,
    a: f64,
    g: f64,
    c: f64,
}

impl Scheme {
    fn new(params: &ChannelParams, alpha: f64) -> Self {
        let sp1 = params.p1().sqrt();
        let sv = v_sign(params.a()) * (alpha * params.p2()).sqrt();
        let su = ((1.0 - alpha) * params.p2()).sqrt();
        let a = params.a();
        Scheme {
            sp1,
            sv,
            su,
            a,
            g: sp1 + a * sv,
            c: a * su,
        }
    }
}

/// Runs trial `trial` of `config`. Trials are independent and replayable.
pub fn run_trial(config: &SimConfig, trial: u64) -> Result<TrialResult> {
    let (m1, m2) = config.codebook_sizes()?;
    Ok(trial_with_sizes(config, trial, m1, m2))
}

fn trial_with_sizes(config: &SimConfig, trial: u64, m1: u64, m2: u64) -> TrialResult {
    let seed = derive_seed(config.seed, &[trial]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.n;
    let s = Scheme::new(&config.params, config.alpha);
    let u_book = normal_vec(&mut rng, m2 as usize * n);
    let msg2 = rng.random_range(0..m2) as usize;
    let (v_book, msg1) = match config.codebook {
        CodebookMode::Explicit => (normal_vec(&mut rng, m1 as usize * n), rng.random_range(0..m1) as usize),
        CodebookMode::Implicit => (normal_vec(&mut rng, n), 0),
    };
    let v = &v_book[msg1 * n..(msg1 + 1) * n];
    let u = &u_book[msg2 * n..(msg2 + 1) * n];
    let x1: Vec<f64> = v.iter().map(|v| s.sp1 * v).collect();
    let x2: Vec<f64> = v.iter().zip(u).map(|(v, u)| s.sv * v + s.su * u).collect();
    let y1: Vec<f64> = x1
        .iter()
        .zip(&x2)
        .map(|(x1, x2)| x1 + s.a * x2 + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let y2: Vec<f64> = x2.iter().map(|x2| x2 + rng.sample::<f64, _>(StandardNormal)).collect();

    let err2 = nearest(&y2, s.su, &u_book) != msg2;
    let err1 = match config.codebook {
        CodebookMode::Explicit => explicit_err1(config.decoder1, &s, &y1, &v_book, &u_book, msg1),
        CodebookMode::Implicit => implicit_err1(&mut rng, config.decoder1, &s, &y1, v, &u_book, m1),
    };
    let nf = n as f64;
    TrialResult {
        trial,
        seed,
        err1,
        err2,
        power: [norm2(&x1) / nf, norm2(&x2) / nf],
    }
}

fn explicit_err1(decoder: Decoder, s: &Scheme, y1: &[f64], v_book: &[f64], u_book: &[f64], msg1: usize) -> bool {
    let n = y1.len();
    match decoder {
        Decoder::Successive => {
            let m2_hat = nearest(y1, s.c, u_book);
            let u = &u_book[m2_hat * n..(m2_hat + 1) * n];
            let rest: Vec<f64> = y1.iter().zip(u).map(|(y, u)| y - s.c * u).collect();
            nearest(&rest, s.g, v_book) != msg1
        }
        Decoder::JointMl => {
            let mut best = (f64::INFINITY, 0);
            for u in u_book.chunks_exact(n) {
                let rest: Vec<f64> = y1.iter().zip(u).map(|(y, u)| y - s.c * u).collect();
                for (j, v) in v_book.chunks_exact(n).enumerate() {
                    let d: f64 = rest.iter().zip(v).map(|(r, v)| (r - s.g * v).powi(2)).sum();
                    if d < best.0 {
                        best = (d, j);
                    }
                }
            }
            best.1 != msg1
        }
    }
}

fn implicit_err1<R: Rng>(
    rng: &mut R,
    decoder: Decoder,
    s: &Scheme,
    y1: &[f64],
    v: &[f64],
    u_book: &[f64],
    m1: u64,
) -> bool {
    let n = y1.len();
    let rivals = m1 - 1;
    if rivals == 0 {
        return false;
    }
    if s.g == 0.0 {
        // every codeword explains Y1 equally; ties are broken uniformly
        return rng.random::<f64>() * (m1 as f64) < rivals as f64;
    }
    let k = n as f64;
    let g2 = s.g * s.g;
    match decoder {
        Decoder::Successive => {
            let m2_hat = nearest(y1, s.c, u_book);
            let u = &u_book[m2_hat * n..(m2_hat + 1) * n];
            let rest: Vec<f64> = y1.iter().zip(u).map(|(y, u)| (y - s.c * u) / s.g).collect();
            // a rival V' wins when |rest - V'|^2 < |rest - V|^2
            let f = ncx2_cdf(dist2(&rest, v), k, norm2(&rest));
            let p = -((rivals as f64) * (-f).ln_1p()).exp_m1();
            rng.random::<f64>() < p
        }
        Decoder::JointMl => {
            let gv: Vec<f64> = v.iter().map(|v| s.g * v).collect();
            let best_true = u_book
                .chunks_exact(n)
                .map(|u| {
                    y1.iter()
                        .zip(&gv)
                        .zip(u)
                        .map(|((y, gv), u)| (y - gv - s.c * u).powi(2))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            // a rival V' wins when |(Y1 - c U_i) / g - V'|^2 < best_true / g^2 for some i
            let radius2 = best_true / g2;
            let balls: Vec<Ball> = u_book
                .chunks_exact(n)
                .map(|u| {
                    let centre: Vec<f64> = y1.iter().zip(u).map(|(y, u)| (y - s.c * u) / s.g).collect();
                    let norm2 = norm2(&centre);
                    Ball {
                        mass: ncx2_cdf(radius2, k, norm2),
                        centre,
                        norm2,
                    }
                })
                .collect();
            union_hit(rng, &balls, radius2, rivals)
        }
    }
}

/// Runs all trials of `config` in parallel and aggregates them. The result
/// does not depend on the number of worker threads.
pub fn run_trials(config: &SimConfig) -> Result<TrialSummary> {
    let (m1, m2) = config.codebook_sizes()?;
    let results: Vec<TrialResult> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| trial_with_sizes(config, t, m1, m2))
        .collect();
    Ok(summarize(config, m1, m2, &results))
}

fn summarize(config: &SimConfig, m1: u64, m2: u64, results: &[TrialResult]) -> TrialSummary {
    let total = results.len() as u64;
    let err1_count = results.iter().filter(|r| r.err1).count() as u64;
    let err2_count = results.iter().filter(|r| r.err2).count() as u64;
    let mut power = [0.0; 2];
    for r in results {
        power[0] += r.power[0];
        power[1] += r.power[1];
    }
    TrialSummary {
        config: config.clone(),
        m1,
        m2,
        err1_count,
        err2_count,
        err1_rate: err1_count as f64 / total as f64,
        err2_rate: err2_count as f64 / total as f64,
        ci1: wilson_interval(err1_count, total),
        ci2: wilson_interval(err2_count, total),
        empirical_power: power.map(|p| p / total as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn fig4() -> ChannelParams {
        ChannelParams::figure4()
    }

    #[test]
    fn central_chi_square_two_dof() {
        for x in [0.1, 1.0, 3.0, 10.0] {
            assert!((ncx2_cdf(x, 2.0, 0.0) - (1.0 - (-x / 2.0).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn noncentral_one_dof_matches_folded_normal() {
        let phi = Normal::new(0.0, 1.0).unwrap();
        for (x, lambda) in [(0.5, 1.0), (4.0, 2.5), (30.0, 25.0), (1e-4, 9.0)] {
            let (r, m) = (f64::sqrt(x), f64::sqrt(lambda));
            let want = phi.cdf(r - m) - phi.cdf(-r - m);
            let got = ncx2_cdf(x, 1.0, lambda);
            assert!(
                (got - want).abs() <= 1e-10 * want.max(1e-3),
                "{x} {lambda}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn noncentral_tail_keeps_relative_precision() {
        // For tiny x the first few mixture terms carry everything.
        let (x, k, lambda) = (1e-3, 12.0, 40.0);
        let mu: f64 = lambda / 2.0;
        let head: f64 = (0..4)
            .map(|j| {
                let jf = j as f64;
                (jf * mu.ln() - mu - ln_gamma(jf + 1.0)).exp() * gamma_lr(k / 2.0 + jf, x / 2.0)
            })
            .sum();
        let got = ncx2_cdf(x, k, lambda);
        assert!(head < 1e-30 && (got / head - 1.0).abs() < 1e-9, "{got} vs {head}");
    }

    #[test]
    fn wilson_known_values() {
        let [lo, hi] = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036_993_5).abs() < 1e-6);
        let [lo, hi] = wilson_interval(50, 100);
        assert!((lo - 0.403_831).abs() < 1e-5 && (hi - 0.596_169).abs() < 1e-5);
    }

    #[test]
    fn codebook_sizes_and_cap() {
        assert_eq!(codebook_size(0.0), 1);
        assert_eq!(codebook_size(2.0), 4);
        assert_eq!(codebook_size(0.4 * 5.0), 4);
        assert_eq!(codebook_size(2.01), 5);
        let mut cfg = SimConfig::new(fig4(), 0.5, 10, 1.5, 0.6);
        assert!(matches!(cfg.codebook_sizes(), Err(CzicError::CodebookCap(_))));
        cfg.codebook = CodebookMode::Implicit;
        assert_eq!(cfg.codebook_sizes().unwrap(), (1 << 15, 64));
        cfg.r1 = 7.0;
        assert!(matches!(cfg.codebook_sizes(), Err(CzicError::CodebookCap(_))));
        assert!(matches!(run_trials(&cfg), Err(CzicError::CodebookCap(_))));
    }

    #[test]
    fn zero_rates_never_err() {
        for codebook in [CodebookMode::Explicit, CodebookMode::Implicit] {
            for decoder1 in [Decoder::JointMl, Decoder::Successive] {
                let cfg = SimConfig {
                    trials: 50,
                    decoder1,
                    codebook,
                    ..SimConfig::new(fig4(), 0.3, 6, 0.0, 0.0)
                };
                let s = run_trials(&cfg).unwrap();
                assert_eq!((s.err1_rate, s.err2_rate), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn estimate_rejects_few_samples() {
        assert!(matches!(
            estimate_rates(&fig4(), 0.5, 999, 0),
            Err(CzicError::Domain(_))
        ));
    }

    #[test]
    fn estimate_handles_collinear_inputs() {
        let e = estimate_rates(&fig4(), 1.0, 20_000, 3).unwrap();
        assert!(e.values[1].abs() < 5e-3);
        let want = closed_form_rates(&fig4(), 1.0).unwrap();
        assert!((e.values[2] - want[2]).abs() < 0.05);
        let silent = ChannelParams::new(4.0, 0.0, 6.0).unwrap();
        let e = estimate_rates(&silent, 0.0, 20_000, 3).unwrap();
        assert!(e.values[0].abs() < 5e-3);
    }

    #[test]
    fn estimate_converges() {
        let params = fig4();
        let want = closed_form_rates(&params, 0.5).unwrap();
        let err = |samples| {
            let e = estimate_rates(&params, 0.5, samples, 11).unwrap();
            (0..3).map(|k| (e.values[k] - want[k]).abs()).fold(0.0, f64::max)
        };
        // averaged over seeds the error scales like 1/sqrt(samples)
        let small: f64 = (0..4)
            .map(|s| {
                let e = estimate_rates(&params, 0.5, 4_000, s).unwrap();
                (0..3).map(|k| (e.values[k] - want[k]).abs()).fold(0.0, f64::max)
            })
            .sum::<f64>()
            / 4.0;
        let large = err(400_000);
        assert!(large < small, "{large} vs {small}");
        assert!(large < 0.01);
    }

    #[test]
    fn negative_gain_mirrors_positive() {
        let pos = estimate_rates(&fig4(), 0.5, 50_000, 1).unwrap();
        let neg = estimate_rates(&fig4().negated(), 0.5, 50_000, 1).unwrap();
        let want = closed_form_rates(&fig4(), 0.5).unwrap();
        for k in 0..3 {
            assert!((pos.values[k] - neg.values[k]).abs() < 0.02);
            assert!((neg.values[k] - want[k]).abs() < 0.02);
        }
    }

    #[test]
    fn vmf_mean_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mean = [0.6, 0.8, 0.0];
        for kappa in [0.0, 2.0, 50.0] {
            let reps = 4000;
            let avg: f64 = (0..reps)
                .map(|_| {
                    let w = sample_vmf(&mut rng, &mean, kappa);
                    assert!((norm2(&w) - 1.0).abs() < 1e-9);
                    w.iter().zip(&mean).map(|(a, b)| a * b).sum::<f64>()
                })
                .sum::<f64>()
                / reps as f64;
            // E[w . mean] = coth(kappa) - 1 / kappa in three dimensions
            let want = if kappa == 0.0 {
                0.0
            } else {
                1.0 / kappa.tanh() - 1.0 / kappa
            };
            assert!((avg - want).abs() < 0.03, "{kappa}: {avg} vs {want}");
        }
    }

    #[test]
    fn ball_sampler_matches_rejection() {
        // The conditioned sampler and plain rejection must give the same mean.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [1usize, 3] {
            let centre: Vec<f64> = (0..n).map(|i| 0.7 + 0.3 * i as f64).collect();
            let radius2 = 1.5;
            let norm2 = norm2(&centre);
            let ball = Ball {
                mass: ncx2_cdf(radius2, n as f64, norm2),
                centre: centre.clone(),
                norm2,
            };
            let reps = 20_000;
            let mut direct = vec![0.0; n];
            for _ in 0..reps {
                let phi = sample_in_ball(&mut rng, &ball, radius2);
                assert!(dist2(&phi, &centre) <= radius2 * (1.0 + 1e-9));
                for (d, p) in direct.iter_mut().zip(&phi) {
                    *d += p / reps as f64;
                }
            }
            let mut kept = 0usize;
            let mut reject = vec![0.0; n];
            while kept < reps {
                let phi = normal_vec(&mut rng, n);
                if dist2(&phi, &centre) <= radius2 {
                    kept += 1;
                    for (d, p) in reject.iter_mut().zip(&phi) {
                        *d += p / reps as f64;
                    }
                }
            }
            for (d, r) in direct.iter().zip(&reject) {
                assert!((d - r).abs() < 0.02, "n={n}: {direct:?} vs {reject:?}");
            }
        }
    }

    fn agree(a: &TrialSummary, b: &TrialSummary) {
        // the two error rates are binomial estimates of the same probability
        for (x, y) in [(a.ci1, b.ci1), (a.ci2, b.ci2)] {
            assert!(x[0] <= y[1] && y[0] <= x[1], "{a:?}\n{b:?}");
        }
    }

    #[test]
    fn implicit_mode_matches_explicit() {
        for (decoder1, n, r1, r2) in [
            (Decoder::JointMl, 4, 3.0, 0.5),
            (Decoder::Successive, 4, 3.0, 0.5),
            (Decoder::JointMl, 2, 3.5, 1.5),
            (Decoder::JointMl, 1, 4.0, 2.0),
        ] {
            let base = SimConfig {
                trials: 3000,
                seed: 9,
                decoder1,
                ..SimConfig::new(fig4(), 0.5, n, r1, r2)
            };
            let explicit = run_trials(&base).unwrap();
            let implicit = run_trials(&SimConfig {
                codebook: CodebookMode::Implicit,
                seed: 10,
                ..base.clone()
            })
            .unwrap();
            assert!(explicit.err1_rate > 0.02, "{explicit:?}");
            agree(&explicit, &implicit);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = SimConfig {
            trials: 64,
            codebook: CodebookMode::Implicit,
            ..SimConfig::new(fig4(), 0.5, 8, 2.0, 0.25)
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_trials(&cfg).unwrap());
        let b = four.install(|| run_trials(&cfg).unwrap());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let replay = run_trial(&cfg, 17).unwrap();
        assert_eq!(replay, run_trial(&cfg, 17).unwrap());
    }

    #[test]
    fn power_compliance() {
        let cfg = SimConfig {
            trials: 1000,
            ..SimConfig::new(ChannelParams::new(4.0, 6.0, 3.0).unwrap(), 0.3, 10, 0.5, 0.3)
        };
        let s = run_trials(&cfg).unwrap();
        assert!(
            (s.empirical_power[0] / 6.0 - 1.0).abs() < 0.02,
            "{:?}",
            s.empirical_power
        );
        assert!(
            (s.empirical_power[1] / 3.0 - 1.0).abs() < 0.02,
            "{:?}",
            s.empirical_power
        );
    }

    #[test]
    fn errors_grow_with_rate_scale() {
        let params = fig4();
        let corner = [3.1, 0.4];
        let mut last = [0.0; 2];
        for lambda in [0.6, 0.9, 1.2] {
            let mut rates = [0.0; 2];
            for seed in 0..3 {
                let s = run_trials(&SimConfig {
                    trials: 400,
                    seed,
                    codebook: CodebookMode::Implicit,
                    ..SimConfig::new(params, 0.5, 6, lambda * corner[0], lambda * corner[1])
                })
                .unwrap();
                rates[0] += s.err1_rate / 3.0;
                rates[1] += s.err2_rate / 3.0;
            }
            assert!(
                rates[0] >= last[0] && rates[1] >= last[1],
                "{lambda}: {rates:?} after {last:?}"
            );
            last = rates;
        }
    }

    #[test]
    fn summary_json_shape() {
        let s = run_trials(&SimConfig {
            trials: 10,
            ..SimConfig::new(fig4(), 0.5, 2, 1.0, 0.5)
        })
        .unwrap();
        let v = serde_json::to_value(&s).unwrap();
        for key in ["config", "err1_rate", "err2_rate", "ci1", "ci2", "empirical_power"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["config"]["decoder1"], "joint_ml");
    }
}

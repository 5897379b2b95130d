//! Closed-form Gaussian bound families.
//!
//! Each function maps channel parameters and one point of the family's
//! parameter space to a [`ConstraintSet`]. [`bound_frontier`] sweeps a whole
//! family over a grid and returns its frontier.
//!
//! Power-split conventions: `alpha = 1 - rho2^2` is the share of the cognitive
//! power spent on the primary codeword, `beta = 1 - rho1^2` and
//! `gamma = rho12^2`, where `rho1`, `rho2` and `rho12` are the correlations of
//! the auxiliary `U` with `X1`, of `U` with `X2`, and of `X1` with `X2`. Some
//! statements of the outer bound swap the roles of `alpha` and `beta`; the
//! assignment here is the one that makes the corollaries and the inner bound
//! share a single `alpha`.
//!
//! All formulas use `|a|`. The cognitive encoder can flip the sign of the
//! shared component, so a negative gain is never worse than a positive one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CzicError, Result};
use crate::half_log2;
use crate::model::{check_unit, redundancy_threshold, ChannelParams, Thresholds};
use crate::regions::{frontier_from_family, frontier_from_sets, ConstraintSet, Frontier, Provenance};

/// Slack allowed in the positive-semidefiniteness test of a correlation triple.
pub const PSD_TOL: f64 = 1e-12;

const INF: f64 = f64::INFINITY;

/// Correlations `(rho1, rho2, rho12)` of `(U, X1)`, `(U, X2)` and `(X1, X2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTriple {
    pub rho1: f64,
    pub rho2: f64,
    pub rho12: f64,
}

impl CorrelationTriple {
    /// Checks the range of each entry. PSD validity is checked separately so
    /// that invalid triples can still be represented.
    pub fn new(rho1: f64, rho2: f64, rho12: f64) -> Result<Self> {
        for (name, v) in [("rho1", rho1), ("rho2", rho2), ("rho12", rho12)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(CzicError::domain(format!("{name} must lie in [-1, 1], got {v}")));
            }
        }
        Ok(Self { rho1, rho2, rho12 })
    }

    /// `|rho12 - rho1 rho2| <= sqrt((1 - rho1^2)(1 - rho2^2))`.
    pub fn is_psd(&self) -> bool {
        let slack = ((1.0 - self.rho1 * self.rho1) * (1.0 - self.rho2 * self.rho2)).sqrt();
        (self.rho12 - self.rho1 * self.rho2).abs() <= slack + PSD_TOL
    }
}

/// `alpha`, `beta`, `gamma`, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BoundParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        check_unit("alpha", alpha)?;
        check_unit("beta", beta)?;
        check_unit("gamma", gamma)?;
        Ok(Self { alpha, beta, gamma })
    }

    /// The outer-bound parameters implied by a correlation triple.
    pub fn from_correlations(rho: &CorrelationTriple) -> Self {
        Self {
            alpha: 1.0 - rho.rho2 * rho.rho2,
            beta: 1.0 - rho.rho1 * rho.rho1,
            gamma: rho.rho12 * rho.rho12,
        }
    }
}

fn require_strong(params: &ChannelParams) -> Result<()> {
    if params.abs_a() >= 1.0 {
        Ok(())
    } else {
        Err(CzicError::at_least(1.0))
    }
}

// ½log(1 + ᾱP2/(1 + αP2)), written as a ratio to keep it exact at α = 1.
fn cognitive_rate(alpha: f64, p2: f64) -> f64 {
    half_log2((1.0 + p2) / (1.0 + alpha * p2))
}

// ½log(1 + (√(βP1) + |a|√(αP2))²)
fn coherent_rate(params: &ChannelParams, alpha: f64, beta: f64) -> f64 {
    let amp = (beta * params.p1()).sqrt() + params.abs_a() * (alpha * params.p2()).sqrt();
    half_log2(1.0 + amp * amp)
}

// ½log(1 + P1 + a²P2 + 2|a| c √(P1 P2))
fn full_rate(params: &ChannelParams, c: f64) -> f64 {
    let (a, p1, p2) = (params.abs_a(), params.p1(), params.p2());
    half_log2(1.0 + p1 + a * a * p2 + 2.0 * a * c * (p1 * p2).sqrt())
}

/// Superposition inner bound: `X2` splits into a part aligned with the
/// primary codeword and a fresh part carrying the cognitive message.
pub fn inner_lemma2(params: &ChannelParams, alpha: f64) -> Result<ConstraintSet> {
    check_unit("alpha", alpha)?;
    Ok(ConstraintSet::new(
        coherent_rate(params, alpha, 1.0),
        cognitive_rate(alpha, params.p2()),
        full_rate(params, alpha.sqrt()),
        Provenance::new("inner", [alpha, 0.0, 0.0]),
    ))
}

/// Outer bound over jointly Gaussian `(U, X1, X2)` with correlations `rho`.
/// Established for `|a| >= 1`.
pub fn outer_lemma1(params: &ChannelParams, rho: CorrelationTriple) -> Result<ConstraintSet> {
    require_strong(params)?;
    lemma1_unchecked(params, rho, true)
}

fn lemma1_unchecked(params: &ChannelParams, rho: CorrelationTriple, with_o04: bool) -> Result<ConstraintSet> {
    if !rho.is_psd() {
        return Err(CzicError::InvalidCorrelation {
            rho1: rho.rho1,
            rho2: rho.rho2,
            rho12: rho.rho12,
        });
    }
    let bp = BoundParams::from_correlations(&rho);
    let p2 = params.p2();
    let o01 = cognitive_rate(bp.alpha, p2);
    let o02 = coherent_rate(params, bp.alpha, bp.beta) + o01;
    let o03 = full_rate(params, rho.rho12.abs());
    let o04 = half_log2(1.0 + (1.0 - bp.gamma) * p2);
    let r2 = if with_o04 { o01.min(o04) } else { o01 };
    Ok(ConstraintSet::new(
        INF,
        r2,
        o02.min(o03),
        Provenance::new("lemma1", [rho.rho1, rho.rho2, rho.rho12]),
    ))
}

/// Keeps only the constraints on `R2` and on the sum with the `rho12` term.
pub fn outer_cor1(params: &ChannelParams, gamma: f64) -> Result<ConstraintSet> {
    check_unit("gamma", gamma)?;
    require_strong(params)?;
    Ok(ConstraintSet::new(
        INF,
        half_log2(1.0 + (1.0 - gamma) * params.p2()),
        full_rate(params, gamma.sqrt()),
        Provenance::new("cor1", [gamma, 0.0, 0.0]),
    ))
}

pub fn outer_cor2(params: &ChannelParams, alpha: f64) -> Result<ConstraintSet> {
    check_unit("alpha", alpha)?;
    require_strong(params)?;
    let r2 = cognitive_rate(alpha, params.p2());
    Ok(ConstraintSet::new(
        INF,
        r2,
        coherent_rate(params, alpha, 1.0) + r2,
        Provenance::new("cor2", [alpha, 0.0, 0.0]),
    ))
}

pub fn outer_cor3(params: &ChannelParams, alpha: f64, beta: f64) -> Result<ConstraintSet> {
    check_unit("alpha", alpha)?;
    check_unit("beta", beta)?;
    require_strong(params)?;
    Ok(cor3_unchecked(params, alpha, beta, "cor3"))
}

fn cor3_unchecked(params: &ChannelParams, alpha: f64, beta: f64, source: &'static str) -> ConstraintSet {
    let r2 = cognitive_rate(alpha, params.p2());
    let c = (alpha * beta).sqrt() + ((1.0 - alpha) * (1.0 - beta)).sqrt();
    let sum = (coherent_rate(params, alpha, beta) + r2).min(full_rate(params, c));
    ConstraintSet::new(INF, r2, sum, Provenance::new(source, [alpha, beta, 0.0]))
}

/// Capacity region for `|a| >= sqrt(1 + P1)`.
pub fn capacity_thm3(params: &ChannelParams, alpha: f64) -> Result<ConstraintSet> {
    check_unit("alpha", alpha)?;
    check_regime(BoundKind::Thm3, params)?;
    Ok(cor3_unchecked(params, alpha, 1.0, "thm3"))
}

/// Capacity region once the sum-rate constraint is redundant:
/// `|a| >= sqrt(P1 P2) + sqrt(1 + P1 + P1 P2)`.
pub fn capacity_cor4(params: &ChannelParams, alpha: f64) -> Result<ConstraintSet> {
    check_unit("alpha", alpha)?;
    check_regime(BoundKind::Cor4, params)?;
    Ok(ConstraintSet::new(
        coherent_rate(params, alpha, 1.0),
        cognitive_rate(alpha, params.p2()),
        INF,
        Provenance::new("cor4", [alpha, 0.0, 0.0]),
    ))
}

/// Capacity region for `|a| <= 1` (dirty-paper coding against the primary
/// codeword at the cognitive receiver).
pub fn capacity_weak(params: &ChannelParams, alpha: f64) -> Result<ConstraintSet> {
    check_unit("alpha", alpha)?;
    check_regime(BoundKind::Weak, params)?;
    let (a, p1, p2) = (params.abs_a(), params.p1(), params.p2());
    let amp = p1.sqrt() + a * (alpha * p2).sqrt();
    Ok(ConstraintSet::new(
        half_log2(1.0 + amp * amp / (1.0 + a * a * (1.0 - alpha) * p2)),
        half_log2(1.0 + (1.0 - alpha) * p2),
        INF,
        Provenance::new("weak", [alpha, 0.0, 0.0]),
    ))
}

/// Capacity region for `1 <= |a| <= sqrt(1 + P1/(1 + P2))`.
pub fn capacity_strong(params: &ChannelParams, alpha: f64) -> Result<ConstraintSet> {
    check_unit("alpha", alpha)?;
    check_regime(BoundKind::StrongCap, params)?;
    Ok(ConstraintSet::new(
        INF,
        half_log2(1.0 + (1.0 - alpha) * params.p2()),
        full_rate(params, alpha.sqrt()),
        Provenance::new("strongcap", [alpha, 0.0, 0.0]),
    ))
}

/// Bound family identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Inner,
    Lemma1,
    Cor1,
    Cor2,
    Cor3,
    Thm3,
    Cor4,
    Weak,
    StrongCap,
}

impl BoundKind {
    pub const ALL: [BoundKind; 9] = [
        BoundKind::Inner,
        BoundKind::Lemma1,
        BoundKind::Cor1,
        BoundKind::Cor2,
        BoundKind::Cor3,
        BoundKind::Thm3,
        BoundKind::Cor4,
        BoundKind::Weak,
        BoundKind::StrongCap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Inner => "inner",
            BoundKind::Lemma1 => "lemma1",
            BoundKind::Cor1 => "cor1",
            BoundKind::Cor2 => "cor2",
            BoundKind::Cor3 => "cor3",
            BoundKind::Thm3 => "thm3",
            BoundKind::Cor4 => "cor4",
            BoundKind::Weak => "weak",
            BoundKind::StrongCap => "strongcap",
        }
    }

    /// True for families that are outer bounds or capacity regions, i.e.
    /// everything but the inner bound.
    pub fn is_outer(self) -> bool {
        self != BoundKind::Inner
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundKind {
    type Err = CzicError;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| CzicError::malformed(format!("unknown bound '{s}'")))
    }
}

/// Fails with a regime error when `params` is outside the range where the
/// family is established.
pub fn check_regime(kind: BoundKind, params: &ChannelParams) -> Result<()> {
    let x = params.abs_a();
    let th = Thresholds::for_powers(params.p1(), params.p2());
    match kind {
        BoundKind::Inner => Ok(()),
        BoundKind::Lemma1 | BoundKind::Cor1 | BoundKind::Cor2 | BoundKind::Cor3 => require_strong(params),
        BoundKind::Thm3 if x < th.t3 => Err(CzicError::at_least(th.t3)),
        BoundKind::Cor4 => {
            let t = redundancy_threshold(1.0, params.p1(), params.p2())?;
            if x >= t {
                Ok(())
            } else {
                Err(CzicError::at_least(t))
            }
        }
        BoundKind::Weak if x > 1.0 => Err(CzicError::at_most(1.0)),
        BoundKind::StrongCap if x < 1.0 => Err(CzicError::at_least(1.0)),
        BoundKind::StrongCap if x > th.t2 => Err(CzicError::at_most(th.t2)),
        _ => Ok(()),
    }
}

/// Evaluates one member of a family.
///
/// `point` holds `[alpha]` for inner, cor2, thm3, cor4, weak and strongcap;
/// `[gamma]` for cor1; `[alpha, beta]` for cor3; `[rho1, rho2, rho12]` for
/// lemma1. Unused slots are ignored.
pub fn constraint_set(kind: BoundKind, params: &ChannelParams, point: [f64; 3]) -> Result<ConstraintSet> {
    let [x, y, z] = point;
    match kind {
        BoundKind::Inner => inner_lemma2(params, x),
        BoundKind::Lemma1 => outer_lemma1(params, CorrelationTriple::new(x, y, z)?),
        BoundKind::Cor1 => outer_cor1(params, x),
        BoundKind::Cor2 => outer_cor2(params, x),
        BoundKind::Cor3 => outer_cor3(params, x, y),
        BoundKind::Thm3 => capacity_thm3(params, x),
        BoundKind::Cor4 => capacity_cor4(params, x),
        BoundKind::Weak => capacity_weak(params, x),
        BoundKind::StrongCap => capacity_strong(params, x),
    }
}

/// How the outer bound over correlation triples is swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lemma1Mode {
    /// Every PSD-valid triple of the grid, all four constraints.
    Full,
    /// `rho12` pinned to the PSD boundary with the sign that maximises
    /// `|rho12|`, and the `(1 - rho12^2) P2` constraint on `R2` dropped.
    /// A 2-D sweep, looser than `Full`.
    Boundary,
}

/// Grid resolutions for [`bound_frontier`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points on `[0, 1]` for alpha, beta and gamma.
    pub alpha: usize,
    /// Points on `[-1, 1]` for each correlation.
    pub rho: usize,
    /// `R2` levels of the frontier.
    pub r2: usize,
    pub lemma1_mode: Lemma1Mode,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            alpha: 201,
            rho: 101,
            r2: 401,
            lemma1_mode: Lemma1Mode::Full,
        }
    }
}

/// `m` equally spaced points `k/(m-1)` on `[0, 1]`.
pub fn unit_grid(m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(CzicError::malformed("parameter grid needs at least two points"));
    }
    let d = (m - 1) as f64;
    Ok((0..m).map(|k| k as f64 / d).collect())
}

/// `n` correlation values on `[-1, 1]`, spaced so that their squares are
/// uniform: `±sqrt(k/K)` with `K = floor(n/2)`, plus 0 when `n` is odd.
///
/// With this spacing `1 - rho^2` and `rho^2` land on `unit_grid(K + 1)`, which
/// is a subset of `unit_grid(m)` whenever `K` divides `m - 1`. The outer bound
/// over correlations then meets the corollary grids exactly.
pub fn correlation_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(CzicError::malformed("correlation grid needs at least two points"));
    }
    let kk = n / 2;
    let d = kk as f64;
    let pos: Vec<f64> = (1..=kk).map(|k| (k as f64 / d).sqrt()).collect();
    let mut out: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
    if n % 2 == 1 {
        out.push(0.0);
    }
    out.extend(pos);
    Ok(out)
}

/// Frontier of one family swept over `grid`.
///
/// Regime preconditions are checked once up front.
pub fn bound_frontier(kind: BoundKind, params: &ChannelParams, grid: &GridSpec) -> Result<Frontier> {
    check_regime(kind, params)?;
    let p = *params;
    match kind {
        BoundKind::Lemma1 => lemma1_frontier(&p, grid),
        BoundKind::Cor3 => {
            let g = unit_grid(grid.alpha)?;
            let pairs: Vec<[f64; 2]> = g.iter().flat_map(|&a| g.iter().map(move |&b| [a, b])).collect();
            frontier_from_family(
                |ab: &[f64; 2]| Ok(cor3_unchecked(&p, ab[0], ab[1], "cor3")),
                &pairs,
                grid.r2,
            )
        }
        _ => {
            let g = unit_grid(grid.alpha)?;
            frontier_from_family(|&x: &f64| constraint_set(kind, &p, [x, 0.0, 0.0]), &g, grid.r2)
        }
    }
}

fn lemma1_frontier(params: &ChannelParams, grid: &GridSpec) -> Result<Frontier> {
    use rayon::prelude::*;
    let rho = correlation_grid(grid.rho)?;
    let sets: Vec<ConstraintSet> = match grid.lemma1_mode {
        Lemma1Mode::Full => rho
            .par_iter()
            .flat_map_iter(|&r1| {
                let rho = &rho;
                rho.iter().flat_map(move |&r2| {
                    rho.iter().filter_map(move |&r12| {
                        let t = CorrelationTriple {
                            rho1: r1,
                            rho2: r2,
                            rho12: r12,
                        };
                        t.is_psd()
                            .then(|| lemma1_unchecked(params, t, true).expect("checked PSD"))
                    })
                })
            })
            .collect(),
        Lemma1Mode::Boundary => rho
            .par_iter()
            .flat_map_iter(|&r1| {
                rho.iter().map(move |&r2| {
                    let slack = ((1.0 - r1 * r1) * (1.0 - r2 * r2)).sqrt();
                    let centre = r1 * r2;
                    let r12 = if centre >= 0.0 { centre + slack } else { centre - slack };
                    let t = CorrelationTriple {
                        rho1: r1,
                        rho2: r2,
                        rho12: r12.clamp(-1.0, 1.0),
                    };
                    lemma1_unchecked(params, t, false).expect("boundary triple is PSD")
                })
            })
            .collect(),
    };
    frontier_from_sets(&sets, grid.r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::directed_gap;
    use proptest::prelude::*;

    // Reference values (30-digit evaluation).
    const HL7: f64 = 1.40367746102880205;
    const HL151: f64 = 3.61920236966253945;
    const HL103: f64 = 3.34325026359160919;
    const HL13: f64 = 1.85021985907055;
    const HL25: f64 = 2.32192809488736;

    fn fig4() -> ChannelParams {
        ChannelParams::figure4()
    }

    fn close(x: f64, y: f64) -> bool {
        (x - y).abs() < 1e-12
    }

    #[test]
    fn inner_examples() {
        let s = inner_lemma2(&fig4(), 1.0).unwrap();
        assert!(close(s.r1_max, HL151) && close(s.r2_max, 0.0) && close(s.sum_max, HL151));
        let s = inner_lemma2(&fig4(), 0.0).unwrap();
        assert!(close(s.r1_max, HL7) && close(s.r2_max, HL7) && close(s.sum_max, HL103));
        let p = ChannelParams::new(2.5, 3.0, 0.0).unwrap();
        let s = inner_lemma2(&p, 0.3).unwrap();
        assert!(close(s.r2_max, 0.0) && close(s.r1_max, half_log2(4.0)));
        assert!(inner_lemma2(&fig4(), 1.5).is_err());
    }

    #[test]
    fn lemma1_examples() {
        let s = outer_lemma1(&fig4(), CorrelationTriple::new(0.0, 0.0, 0.0).unwrap()).unwrap();
        assert!(close(s.r2_max, 0.0) && close(s.sum_max, HL103) && s.r1_max.is_infinite());
        let s = outer_lemma1(&fig4(), CorrelationTriple::new(0.0, 1.0, 0.0).unwrap()).unwrap();
        assert!(close(s.r2_max, HL7) && close(s.sum_max, 2.0 * HL7));
        let bad = CorrelationTriple::new(1.0, 0.0, 0.5).unwrap();
        assert!(!bad.is_psd());
        assert!(matches!(
            outer_lemma1(&fig4(), bad),
            Err(CzicError::InvalidCorrelation { .. })
        ));
        let weak = ChannelParams::new(0.5, 6.0, 6.0).unwrap();
        let e = outer_lemma1(&weak, CorrelationTriple::new(0.0, 0.0, 0.0).unwrap()).unwrap_err();
        assert_eq!(e.to_string(), "regime precondition failed: requires |a| >= 1.0000");
        assert!(CorrelationTriple::new(1.2, 0.0, 0.0).is_err());
    }

    #[test]
    fn corollary_examples() {
        let p = fig4();
        let s = outer_cor1(&p, 1.0).unwrap();
        assert!(close(s.sum_max, HL151) && close(s.r2_max, 0.0));
        let s = outer_cor1(&p, 0.0).unwrap();
        assert!(close(s.sum_max, HL103) && close(s.r2_max, HL7));
        let s = outer_cor1(&ChannelParams::new(4.0, 6.0, 0.0).unwrap(), 0.4).unwrap();
        assert!(close(s.r2_max, 0.0) && close(s.sum_max, HL7));

        let s = outer_cor2(&p, 0.0).unwrap();
        assert!(close(s.r2_max, HL7) && close(s.sum_max, 2.0 * HL7));
        let s = outer_cor2(&p, 1.0).unwrap();
        assert!(close(s.r2_max, 0.0) && close(s.sum_max, HL151));
        let q = ChannelParams::new(1.0, 0.0, 6.0).unwrap();
        let s = outer_cor2(&q, 0.0).unwrap();
        assert!(close(s.r2_max, HL7) && close(s.sum_max, HL7));

        let s = outer_cor3(&p, 0.5, 1.0).unwrap();
        assert!(close(s.r2_max, 0.403677461028802));
        let first = coherent_rate(&p, 0.5, 1.0) + s.r2_max;
        assert!((first - 3.64106683909806).abs() < 1e-12);
        assert!((s.sum_max - 3.54870598232163).abs() < 1e-12);
        // at alpha = beta = 0 the coherence coefficient is 1, the full-power sum
        assert!(close(full_rate(&p, 1.0), HL151));
        let s = outer_cor3(&p, 0.0, 0.0).unwrap();
        assert!(close(s.r2_max, HL7) && close(s.sum_max, HL7));
    }

    #[test]
    fn capacity_examples() {
        let p = fig4();
        let s = capacity_thm3(&p, 0.0).unwrap();
        assert!(close(s.r2_max, HL7) && close(s.sum_max, 2.0 * HL7));
        let s = capacity_thm3(&p, 1.0).unwrap();
        assert!(close(s.r2_max, 0.0) && close(s.sum_max, HL151));
        assert!(capacity_thm3(&ChannelParams::new(7f64.sqrt(), 6.0, 6.0).unwrap(), 0.0).is_ok());
        let e = capacity_thm3(&ChannelParams::new(2.64, 6.0, 6.0).unwrap(), 0.0).unwrap_err();
        assert_eq!(e.to_string(), "regime precondition failed: requires |a| >= 2.6458");

        let u = ChannelParams::new(13.0, 6.0, 6.0).unwrap();
        let s = capacity_cor4(&u, 1.0).unwrap();
        assert!((s.r1_max - 5.10044930251922).abs() < 1e-12 && close(s.r2_max, 0.0));
        let s = capacity_cor4(&u, 0.0).unwrap();
        assert!(close(s.r1_max, HL7) && close(s.r2_max, HL7) && s.sum_max.is_infinite());
        let e = capacity_cor4(&ChannelParams::new(12.0, 6.0, 6.0).unwrap(), 0.5).unwrap_err();
        assert_eq!(e.to_string(), "regime precondition failed: requires |a| >= 12.5574");

        let one = ChannelParams::new(1.0, 6.0, 6.0).unwrap();
        let s = capacity_weak(&one, 1.0).unwrap();
        assert!(close(s.r1_max, HL25) && close(s.r2_max, 0.0));
        let s = capacity_weak(&one, 0.0).unwrap();
        assert!((s.r1_max - 0.446542398041744).abs() < 1e-12 && close(s.r2_max, HL7));
        let zero = ChannelParams::new(0.0, 6.0, 3.0).unwrap();
        let s = capacity_weak(&zero, 0.0).unwrap();
        assert!(close(s.r1_max, HL7) && close(s.r2_max, 1.0));
        assert!(capacity_weak(&fig4(), 0.0).is_err());

        let s = capacity_strong(&one, 0.0).unwrap();
        assert!(close(s.sum_max, HL13) && close(s.r2_max, HL7));
        let s = capacity_strong(&one, 1.0).unwrap();
        assert!(close(s.sum_max, HL25) && close(s.r2_max, 0.0));
        let edge = ChannelParams::new((13.0f64 / 7.0).sqrt(), 6.0, 6.0).unwrap();
        assert!(capacity_strong(&edge, 0.5).is_ok());
        let e = capacity_strong(&ChannelParams::new(1.3628, 6.0, 6.0).unwrap(), 0.5).unwrap_err();
        assert_eq!(e.to_string(), "regime precondition failed: requires |a| <= 1.3628");
        assert!(capacity_strong(&ChannelParams::new(0.9, 6.0, 6.0).unwrap(), 0.5).is_err());
    }

    #[test]
    fn cor3_reduces_to_thm3_at_key_alphas() {
        let p = fig4();
        for alpha in [0.0, 0.5, 1.0] {
            let a = outer_cor3(&p, alpha, 1.0).unwrap();
            let b = capacity_thm3(&p, alpha).unwrap();
            assert_eq!((a.r1_max, a.r2_max, a.sum_max), (b.r1_max, b.r2_max, b.sum_max));
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in BoundKind::ALL {
            assert_eq!(k.as_str().parse::<BoundKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.as_str()));
        }
        assert!("lemma3".parse::<BoundKind>().is_err());
    }

    #[test]
    fn grids() {
        let g = correlation_grid(5).unwrap();
        assert_eq!(g, vec![-1.0, -(0.5f64).sqrt(), 0.0, (0.5f64).sqrt(), 1.0]);
        assert_eq!(correlation_grid(4).unwrap().len(), 4);
        assert!(correlation_grid(1).is_err());
        let u = unit_grid(201).unwrap();
        // squares of the 101-point correlation grid land on the 201-point unit grid
        for r in correlation_grid(101).unwrap() {
            let k = (r * r * 200.0).round() as usize;
            assert!((u[k] - r * r).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_mode_is_looser_than_full() {
        let p = fig4();
        let mut grid = GridSpec {
            rho: 41,
            alpha: 41,
            r2: 101,
            lemma1_mode: Lemma1Mode::Full,
        };
        let full = bound_frontier(BoundKind::Lemma1, &p, &grid).unwrap();
        grid.lemma1_mode = Lemma1Mode::Boundary;
        let fast = bound_frontier(BoundKind::Lemma1, &p, &grid).unwrap();
        assert!(directed_gap(&full, &fast).unwrap() <= 1e-9);
    }

    fn arb_strong() -> impl Strategy<Value = ChannelParams> {
        (1.0f64..15.0, any::<bool>(), 0.0f64..20.0, 0.0f64..20.0)
            .prop_map(|(a, neg, p1, p2)| ChannelParams::new(if neg { -a } else { a }, p1, p2).unwrap())
    }

    fn arb_psd() -> impl Strategy<Value = CorrelationTriple> {
        (-1.0f64..=1.0, -1.0f64..=1.0, -1.0f64..=1.0).prop_map(|(r1, r2, t)| {
            let slack = ((1.0 - r1 * r1) * (1.0 - r2 * r2)).sqrt();
            CorrelationTriple::new(r1, r2, (r1 * r2 + t * slack).clamp(-1.0, 1.0)).unwrap()
        })
    }

    fn inside(a: &ConstraintSet, b: &ConstraintSet) -> bool {
        let t = 1e-12;
        a.r1_max <= b.r1_max + t && a.r2_max <= b.r2_max + t && a.sum_max <= b.sum_max + t
    }

    // Corners of the polygon {R1 <= c, R2 <= b, R1 + R2 <= s}.
    fn corners(s: &ConstraintSet) -> Vec<crate::regions::RatePair> {
        let r2 = s.r2_reach();
        vec![
            crate::regions::RatePair::new(s.r1_at(0.0).unwrap(), 0.0),
            crate::regions::RatePair::new(s.r1_at(r2).unwrap(), r2),
        ]
    }

    proptest! {
        #[test]
        fn lemma1_sets_sit_inside_corollary_sets(p in arb_strong(), rho in arb_psd()) {
            let l = outer_lemma1(&p, rho).unwrap();
            let bp = BoundParams::from_correlations(&rho);
            prop_assert!(inside(&l, &outer_cor1(&p, bp.gamma).unwrap()));
            prop_assert!(inside(&l, &outer_cor2(&p, bp.alpha).unwrap()));
            prop_assert!(inside(&l, &outer_cor3(&p, bp.alpha, bp.beta).unwrap()));
        }

        #[test]
        fn inner_set_sits_inside_a_lemma1_set(p in arb_strong(), alpha in 0.0f64..=1.0) {
            let i = inner_lemma2(&p, alpha).unwrap();
            let rho = CorrelationTriple::new(0.0, (1.0 - alpha).sqrt(), alpha.sqrt()).unwrap();
            let l = outer_lemma1(&p, rho).unwrap();
            for c in corners(&i) {
                prop_assert!(c.r2 <= l.r2_max + 1e-12 && c.r1 + c.r2 <= l.sum_max + 1e-12);
            }
        }

        #[test]
        fn beta_one_is_thm3(a in 2.0f64..20.0, p1 in 0.0f64..3.0, p2 in 0.0f64..20.0, alpha in 0.0f64..=1.0) {
            let p = ChannelParams::new(a, p1, p2).unwrap();
            let x = outer_cor3(&p, alpha, 1.0).unwrap();
            let y = capacity_thm3(&p, alpha).unwrap();
            prop_assert!(close(x.r1_max.min(1e300), y.r1_max.min(1e300)));
            prop_assert!(close(x.r2_max, y.r2_max) && close(x.sum_max, y.sum_max));
        }

        #[test]
        fn weak_and_strong_agree_at_unit_gain(p1 in 0.0f64..30.0, p2 in 0.0f64..30.0, alpha in 0.0f64..=1.0) {
            let p = ChannelParams::new(1.0, p1, p2).unwrap();
            let w = capacity_weak(&p, alpha).unwrap();
            let s = capacity_strong(&p, alpha).unwrap();
            prop_assert!(close(w.r2_max, s.r2_max));
            prop_assert!((w.r1_max + w.r2_max - s.sum_max).abs() < 1e-12);
        }

        #[test]
        fn cor4_sum_never_binds(p1 in 0.0f64..20.0, p2 in 0.0f64..20.0, extra in 0.0f64..10.0, alpha in 0.0f64..=1.0) {
            let t = redundancy_threshold(1.0, p1, p2).unwrap();
            let p = ChannelParams::new(t + extra, p1, p2).unwrap();
            let c = capacity_cor4(&p, alpha).unwrap();
            prop_assert!(full_rate(&p, alpha.sqrt()) >= c.r1_max + c.r2_max - 1e-12);
        }

        #[test]
        fn sign_invariance(p in arb_strong(), alpha in 0.0f64..=1.0, rho in arb_psd()) {
            let n = p.negated();
            for k in [BoundKind::Inner, BoundKind::Cor1, BoundKind::Cor2, BoundKind::Cor3] {
                let x = constraint_set(k, &p, [alpha, 0.5, 0.0]).unwrap();
                let y = constraint_set(k, &n, [alpha, 0.5, 0.0]).unwrap();
                prop_assert_eq!((x.r1_max, x.r2_max, x.sum_max), (y.r1_max, y.r2_max, y.sum_max));
            }
            let x = outer_lemma1(&p, rho).unwrap();
            let y = outer_lemma1(&n, rho).unwrap();
            prop_assert_eq!((x.r2_max, x.sum_max), (y.r2_max, y.sum_max));
        }

        #[test]
        fn constraints_grow_with_power(p in arb_strong(), d1 in 0.0f64..5.0, d2 in 0.0f64..5.0,
                                       alpha in 0.0f64..=1.0, rho in arb_psd()) {
            let q = ChannelParams::new(p.a(), p.p1() + d1, p.p2() + d2).unwrap();
            for k in [BoundKind::Inner, BoundKind::Cor1, BoundKind::Cor2, BoundKind::Cor3] {
                let x = constraint_set(k, &p, [alpha, 0.5, 0.0]).unwrap();
                let y = constraint_set(k, &q, [alpha, 0.5, 0.0]).unwrap();
                prop_assert!(inside(&x, &y));
            }
            prop_assert!(inside(&outer_lemma1(&p, rho).unwrap(), &outer_lemma1(&q, rho).unwrap()));
        }
    }

    #[test]
    fn frontiers_grow_with_power() {
        let grid = GridSpec {
            alpha: 101,
            rho: 41,
            r2: 201,
            lemma1_mode: Lemma1Mode::Full,
        };
        let p = fig4();
        let q = ChannelParams::new(4.0, 7.0, 8.0).unwrap();
        for k in [
            BoundKind::Inner,
            BoundKind::Lemma1,
            BoundKind::Cor1,
            BoundKind::Cor2,
            BoundKind::Thm3,
        ] {
            let small = bound_frontier(k, &p, &grid).unwrap();
            let big = bound_frontier(k, &q, &grid).unwrap();
            assert!(directed_gap(&small, &big).unwrap() <= 1e-3, "{k}");
        }
    }
}

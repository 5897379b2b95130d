//! Two-user rate-region geometry.
//!
//! Every bound in this crate is a union, over some parameter set, of polygons
//! of the form `{R1 <= c, R2 <= b, R1 + R2 <= s}`. A [`Frontier`] samples the
//! boundary of such a union as the function `R2 -> max R1` on a uniform grid
//! of `R2` levels running from 0 to the largest reachable `R2`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CzicError, Result};

/// Two `R2` values closer than this are treated as the same level when a
/// frontier is queried past its last sample.
pub const REACH_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    /// Primary user rate, bits per channel use.
    pub r1: f64,
    /// Cognitive user rate, bits per channel use.
    pub r2: f64,
}

impl RatePair {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2 }
    }
}

/// Where a constraint set came from: a bound name and up to three parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Provenance {
    pub source: &'static str,
    pub point: [f64; 3],
}

impl Provenance {
    pub fn new(source: &'static str, point: [f64; 3]) -> Self {
        Self { source, point }
    }
}

/// `{(R1, R2) >= 0 : R1 <= r1_max, R2 <= r2_max, R1 + R2 <= sum_max}`.
///
/// Absent constraints are `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintSet {
    pub r1_max: f64,
    pub r2_max: f64,
    pub sum_max: f64,
    pub provenance: Provenance,
}

impl ConstraintSet {
    pub fn new(r1_max: f64, r2_max: f64, sum_max: f64, provenance: Provenance) -> Self {
        Self {
            r1_max,
            r2_max,
            sum_max,
            provenance,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r1_max", self.r1_max),
            ("r2_max", self.r2_max),
            ("sum_max", self.sum_max),
        ] {
            if v.is_nan() || v < 0.0 {
                return Err(CzicError::malformed(format!(
                    "{} produced {name} = {v} at {:?}",
                    self.provenance.source, self.provenance.point
                )));
            }
        }
        Ok(())
    }

    /// Largest `R2` in the polygon.
    pub fn r2_reach(&self) -> f64 {
        self.r2_max.min(self.sum_max)
    }

    /// Largest `R1` at a given `R2`, or `None` when `R2` is out of reach.
    pub fn r1_at(&self, r2: f64) -> Option<f64> {
        if r2 > self.r2_reach() {
            None
        } else {
            Some(self.r1_max.min(self.sum_max - r2))
        }
    }

    pub fn contains(&self, p: RatePair) -> bool {
        p.r1 >= 0.0 && p.r2 >= 0.0 && p.r1 <= self.r1_max && p.r2 <= self.r2_max && p.r1 + p.r2 <= self.sum_max
    }
}

/// Sampled Pareto boundary `R2 -> max R1` of a rate region.
///
/// Samples sit on `resolution` equally spaced `R2` levels from 0 to the
/// largest reachable `R2`. The curve is nonincreasing; flat stretches (a
/// rectangle's top edge, say) are kept, so consecutive points may weakly
/// dominate each other.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    // ascending
    r2: Vec<f64>,
    r1: Vec<f64>,
    convexified: bool,
    resolution: usize,
}

impl Frontier {
    /// Builds a frontier from `(r2, r1)` samples in ascending `r2` order.
    pub fn from_samples(r2: Vec<f64>, r1: Vec<f64>, convexified: bool) -> Result<Self> {
        if r2.is_empty() || r2.len() != r1.len() {
            return Err(CzicError::malformed(
                "frontier needs equally many r1 and r2 samples, at least one",
            ));
        }
        if r2.iter().chain(r1.iter()).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CzicError::malformed("frontier samples must be finite and non-negative"));
        }
        if r2.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CzicError::malformed("frontier r2 samples must be strictly increasing"));
        }
        let resolution = r2.len();
        Ok(Self {
            r2,
            r1,
            convexified,
            resolution,
        })
    }

    /// Points in descending `R2` order.
    pub fn points(&self) -> Vec<RatePair> {
        self.r2
            .iter()
            .zip(&self.r1)
            .rev()
            .map(|(&r2, &r1)| RatePair { r1, r2 })
            .collect()
    }

    pub fn r2_levels(&self) -> &[f64] {
        &self.r2
    }

    pub fn r1_values(&self) -> &[f64] {
        &self.r1
    }

    pub fn len(&self) -> usize {
        self.r2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r2.is_empty()
    }

    pub fn convexified(&self) -> bool {
        self.convexified
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Largest sampled `R2`.
    pub fn r2_top(&self) -> f64 {
        *self.r2.last().expect("frontier is never empty")
    }

    /// `R1` on the frontier at `R2 = r2`, linearly interpolated; 0 past the
    /// last sample (beyond [`REACH_EPS`]).
    pub fn r1_at(&self, r2: f64) -> f64 {
        let r2 = r2.max(0.0);
        let top = self.r2_top();
        if r2 > top + REACH_EPS {
            return 0.0;
        }
        if r2 >= top {
            return *self.r1.last().unwrap();
        }
        let i = self.r2.partition_point(|&x| x <= r2);
        if i == 0 {
            return self.r1[0];
        }
        let (x0, x1) = (self.r2[i - 1], self.r2[i]);
        let (y0, y1) = (self.r1[i - 1], self.r1[i]);
        if r2 == x0 {
            return y0;
        }
        y0 + (y1 - y0) * (r2 - x0) / (x1 - x0)
    }

    /// True when `R1` never increases with `R2`.
    pub fn is_monotone(&self) -> bool {
        self.r1.windows(2).all(|w| w[1] <= w[0])
    }
}

// A region with no room for R2 collapses to the single level 0.
fn r2_grid(top: f64, size: usize) -> Vec<f64> {
    if top == 0.0 {
        return vec![0.0];
    }
    let last = (size - 1) as f64;
    (0..size)
        .map(|j| if j + 1 == size { top } else { top * (j as f64) / last })
        .collect()
}

fn validate_sets(sets: &[ConstraintSet], r2_grid_size: usize) -> Result<()> {
    if r2_grid_size < 2 {
        return Err(CzicError::malformed("r2 grid needs at least two samples"));
    }
    if sets.is_empty() {
        return Err(CzicError::malformed("empty parameter grid"));
    }
    for s in sets {
        s.validate()?;
        if s.r1_max.is_infinite() && s.sum_max.is_infinite() {
            return Err(CzicError::malformed(format!(
                "{} leaves R1 unbounded at {:?}",
                s.provenance.source, s.provenance.point
            )));
        }
    }
    Ok(())
}

/// Sampled frontier of the union of `sets`.
///
/// At each `R2` level the result is the largest `min(r1_max, sum_max - R2)`
/// over the sets that reach that level.
pub fn frontier_from_sets(sets: &[ConstraintSet], r2_grid_size: usize) -> Result<Frontier> {
    validate_sets(sets, r2_grid_size)?;
    let top = sets.iter().map(ConstraintSet::r2_reach).fold(0.0, f64::max);
    if !top.is_finite() {
        return Err(CzicError::malformed("region is unbounded in R2"));
    }
    sweep(sets, r2_grid_size, top)
}

/// Like [`frontier_from_sets`] but with levels spanning `[0, top]` for a
/// caller-chosen `top`. Levels no set reaches get `R1 = 0`.
pub fn frontier_from_sets_up_to(sets: &[ConstraintSet], r2_grid_size: usize, top: f64) -> Result<Frontier> {
    validate_sets(sets, r2_grid_size)?;
    if !(top.is_finite() && top >= 0.0) {
        return Err(CzicError::malformed(format!(
            "frontier top must be finite and non-negative, got {top}"
        )));
    }
    sweep(sets, r2_grid_size, top)
}

fn sweep(sets: &[ConstraintSet], r2_grid_size: usize, top: f64) -> Result<Frontier> {
    let levels = r2_grid(top, r2_grid_size);

    // Where R1 <= r1_max binds, a set contributes the constant r1_max up to
    // some level; past that it contributes the line sum_max - R2. The flat parts
    // go into a suffix maximum, the sloped parts into a range-max tree keyed by
    // sum_max.
    let n = levels.len();
    let mut flat = vec![f64::NEG_INFINITY; n];
    let mut tree = RangeMax::new(n);
    for s in sets {
        let reach = s.r2_reach();
        let last = levels.partition_point(|&x| x <= reach);
        if last == 0 {
            continue;
        }
        let last = last - 1;
        let flat_end = if s.sum_max.is_infinite() {
            Some(last)
        } else {
            let knee = s.sum_max - s.r1_max;
            levels
                .partition_point(|&x| x <= knee)
                .checked_sub(1)
                .map(|k| k.min(last))
        };
        match flat_end {
            Some(k) => {
                flat[k] = flat[k].max(s.r1_max);
                if k < last {
                    tree.update(k + 1, last, s.sum_max);
                }
            }
            None => tree.update(0, last, s.sum_max),
        }
    }
    for j in (0..n - 1).rev() {
        flat[j] = flat[j].max(flat[j + 1]);
    }
    let r1 = levels
        .iter()
        .enumerate()
        .map(|(j, &r2)| flat[j].max(tree.get(j) - r2).max(0.0))
        .collect();
    let mut f = Frontier::from_samples(levels, r1, false)?;
    f.resolution = r2_grid_size;
    Ok(f)
}

/// Evaluates `family` on every grid point (in parallel) and returns the
/// frontier of the union. The result does not depend on thread count.
pub fn frontier_from_family<P, F>(family: F, parameter_grid: &[P], r2_grid_size: usize) -> Result<Frontier>
where
    P: Sync,
    F: Fn(&P) -> Result<ConstraintSet> + Sync,
{
    if parameter_grid.is_empty() {
        return Err(CzicError::malformed("empty parameter grid"));
    }
    let sets: Vec<ConstraintSet> = parameter_grid.par_iter().map(&family).collect::<Result<_>>()?;
    frontier_from_sets(&sets, r2_grid_size)
}

struct RangeMax {
    size: usize,
    tree: Vec<f64>,
}

impl RangeMax {
    fn new(n: usize) -> Self {
        let size = n.next_power_of_two();
        Self {
            size,
            tree: vec![f64::NEG_INFINITY; 2 * size],
        }
    }

    // inclusive range
    fn update(&mut self, lo: usize, hi: usize, v: f64) {
        let (mut l, mut r) = (lo + self.size, hi + self.size + 1);
        while l < r {
            if l & 1 == 1 {
                self.tree[l] = self.tree[l].max(v);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                self.tree[r] = self.tree[r].max(v);
            }
            l >>= 1;
            r >>= 1;
        }
    }

    fn get(&self, i: usize) -> f64 {
        let mut k = i + self.size;
        let mut best = f64::NEG_INFINITY;
        while k >= 1 {
            best = best.max(self.tree[k]);
            k >>= 1;
        }
        best
    }
}

/// Upper concave envelope of a frontier, re-sampled on the same `R2` levels.
///
/// This is the time-sharing closure of the sampled region: the result
/// dominates the input pointwise and applying it twice changes nothing.
pub fn upper_concave_envelope(frontier: &Frontier) -> Frontier {
    let xs = &frontier.r2;
    let ys = &frontier.r1;
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            // drop the middle point unless it is strictly above the chord
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((x, y));
    }
    let mut seg = 0;
    let r1 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            while seg + 1 < hull.len() && hull[seg + 1].0 < x {
                seg += 1;
            }
            let v = if seg + 1 >= hull.len() || hull[seg].0 == x {
                hull[seg].1
            } else {
                let (x0, y0) = hull[seg];
                let (x1, y1) = hull[seg + 1];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            };
            v.max(y)
        })
        .collect();
    Frontier {
        r2: xs.clone(),
        r1,
        convexified: true,
        resolution: frontier.resolution,
    }
}

/// Location and size of the largest pointwise difference between two frontiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    /// `max over R2 of R1_outer(R2) - R1_inner(R2)`.
    pub gap: f64,
    /// The `R2` level where the maximum occurs.
    pub r2_at_max: f64,
}

fn merged_levels(a: &Frontier, b: &Frontier) -> Vec<f64> {
    if a.r2 == b.r2 {
        return a.r2.clone();
    }
    let mut all: Vec<f64> = a.r2.iter().chain(&b.r2).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all.dedup_by(|x, y| (*x - *y).abs() <= REACH_EPS);
    all
}

/// Largest `R1_outer(R2) - R1_inner(R2)` over the union of both `R2` grids.
///
/// A frontier that does not reach a level contributes 0 there. A value at or
/// below a tolerance means `outer` is inside `inner` at that tolerance; a
/// positive value says where `outer` sticks out.
pub fn gap_report(outer: &Frontier, inner: &Frontier) -> Result<GapReport> {
    if outer.is_empty() || inner.is_empty() {
        return Err(CzicError::malformed("cannot compare empty frontiers"));
    }
    let mut best = GapReport {
        gap: f64::NEG_INFINITY,
        r2_at_max: 0.0,
    };
    for r2 in merged_levels(outer, inner) {
        let g = outer.r1_at(r2) - inner.r1_at(r2);
        if g > best.gap {
            best = GapReport { gap: g, r2_at_max: r2 };
        }
    }
    Ok(best)
}

/// See [`gap_report`].
pub fn directed_gap(outer: &Frontier, inner: &Frontier) -> Result<f64> {
    gap_report(outer, inner).map(|g| g.gap)
}

/// `R1_a(R2) - R1_b(R2)` at one level.
pub fn gap_at(a: &Frontier, b: &Frontier, r2: f64) -> f64 {
    a.r1_at(r2) - b.r1_at(r2)
}

/// Whether `point` lies under the frontier, with slack `tol` on both axes.
pub fn contains(frontier: &Frontier, point: RatePair, tol: f64) -> bool {
    let top = frontier.r2_top();
    if point.r2 > top + tol {
        return false;
    }
    point.r1 <= frontier.r1_at(point.r2.min(top)) + tol
}

/// Whether every sample of `inner` lies under `outer` with slack `tol`.
pub fn frontier_within(inner: &Frontier, outer: &Frontier, tol: f64) -> bool {
    inner.points().into_iter().all(|p| contains(outer, p, tol))
}

/// Writes `r2_bits,r1_bits` rows, descending in `R2`.
pub fn write_csv<W: Write>(frontier: &Frontier, mut out: W) -> Result<()> {
    writeln!(out, "r2_bits,r1_bits")?;
    for p in frontier.points() {
        writeln!(out, "{},{}", p.r2, p.r1)?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Frontier> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "r2_bits,r1_bits" => {}
        _ => return Err(CzicError::malformed("expected header r2_bits,r1_bits")),
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| CzicError::malformed(format!("bad frontier row: {line}")))
        };
        let r2 = parse(it.next())?;
        let r1 = parse(it.next())?;
        rows.push((r2, r1));
    }
    rows.reverse();
    let (r2, r1) = rows.into_iter().unzip();
    Frontier::from_samples(r2, r1, false)
}

/// JSON written next to every frontier CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierSidecar {
    pub bound: String,
    pub params: serde_json::Value,
    pub grids: BTreeMap<String, usize>,
    pub convexified: bool,
    pub points: usize,
}

//! C ABI over the `czic` library.
//!
//! Every function returns a [`CzicStatus`]; on failure the message is kept per
//! thread and read with [`czic_last_error_message`]. Frontiers and discrete
//! channels are opaque handles owned by the caller and released with their
//! `_free` function. Panics never cross the boundary: they become
//! `CZIC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use czic::bounds::{self, BoundKind, GridSpec, Lemma1Mode};
use czic::dm::{self, DMChannel, SearchConfig, Verdict};
use czic::mc::{self, CodebookMode, Decoder, SimConfig};
use czic::model::{self, RegimeTag};
use czic::regions::{self, Frontier, RatePair};
use czic::{ChannelParams, CzicError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CzicStatus {
    Ok = 0,
    Domain = 1,
    Regime = 2,
    InvalidCorrelation = 3,
    Malformed = 4,
    Degenerate = 5,
    CodebookCap = 6,
    Io = 7,
    NullPointer = 8,
    OutOfRange = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CzicBound {
    Inner = 0,
    Lemma1 = 1,
    Cor1 = 2,
    Cor2 = 3,
    Cor3 = 4,
    Thm3 = 5,
    Cor4 = 6,
    Weak = 7,
    StrongCap = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CzicRegime {
    Weak = 0,
    StrongCapacity = 1,
    UnknownGap = 2,
    VeryStrong = 3,
    UltraStrong = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CzicLemma1Mode {
    Full = 0,
    Boundary = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CzicDecoder {
    JointMl = 0,
    Successive = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CzicCodebook {
    Explicit = 0,
    Implicit = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CzicVerdict {
    Holds = 0,
    Violated = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzicChannel {
    pub a: f64,
    pub p1: f64,
    pub p2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzicRatePair {
    pub r1: f64,
    pub r2: f64,
}

/// `R1 <= r1_max`, `R2 <= r2_max`, `R1 + R2 <= sum_max`; absent constraints are +inf.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzicConstraintSet {
    pub r1_max: f64,
    pub r2_max: f64,
    pub sum_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzicGridSpec {
    pub alpha: usize,
    pub rho: usize,
    pub r2: usize,
    pub lemma1_mode: CzicLemma1Mode,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzicSearchConfig {
    pub restarts: usize,
    pub levels: usize,
    pub sweeps: usize,
    pub initial_step: f64,
    pub halvings: u32,
    pub samples: usize,
    pub refine: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzicSimConfig {
    pub channel: CzicChannel,
    pub alpha: f64,
    pub n: usize,
    pub r1: f64,
    pub r2: f64,
    pub trials: usize,
    pub seed: u64,
    pub decoder1: CzicDecoder,
    pub codebook: CzicCodebook,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzicTrialSummary {
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

/// Opaque sampled frontier.
pub struct CzicFrontier {
    inner: Frontier,
    points: Vec<RatePair>,
}

/// Opaque discrete memoryless channel.
pub struct CzicDmChannel {
    inner: DMChannel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CzicStatus, String);

impl From<CzicError> for Failure {
    fn from(e: CzicError) -> Self {
        let status = match e {
            CzicError::Domain(_) => CzicStatus::Domain,
            CzicError::Regime { .. } => CzicStatus::Regime,
            CzicError::InvalidCorrelation { .. } => CzicStatus::InvalidCorrelation,
            CzicError::Malformed(_) => CzicStatus::Malformed,
            CzicError::Degenerate(_) => CzicStatus::Degenerate,
            CzicError::CodebookCap(_) => CzicStatus::CodebookCap,
            CzicError::Io(_) => CzicStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn null(what: &str) -> Failure {
    Failure(CzicStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> FfiResult) -> CzicStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CzicStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            CzicStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn params(c: CzicChannel) -> Result<ChannelParams, Failure> {
    Ok(ChannelParams::new(c.a, c.p1, c.p2)?)
}

fn bound_kind(b: CzicBound) -> BoundKind {
    match b {
        CzicBound::Inner => BoundKind::Inner,
        CzicBound::Lemma1 => BoundKind::Lemma1,
        CzicBound::Cor1 => BoundKind::Cor1,
        CzicBound::Cor2 => BoundKind::Cor2,
        CzicBound::Cor3 => BoundKind::Cor3,
        CzicBound::Thm3 => BoundKind::Thm3,
        CzicBound::Cor4 => BoundKind::Cor4,
        CzicBound::Weak => BoundKind::Weak,
        CzicBound::StrongCap => BoundKind::StrongCap,
    }
}

fn grid_spec(g: &CzicGridSpec) -> GridSpec {
    GridSpec {
        alpha: g.alpha,
        rho: g.rho,
        r2: g.r2,
        lemma1_mode: match g.lemma1_mode {
            CzicLemma1Mode::Full => Lemma1Mode::Full,
            CzicLemma1Mode::Boundary => Lemma1Mode::Boundary,
        },
    }
}

fn search_config(c: &CzicSearchConfig) -> SearchConfig {
    SearchConfig {
        restarts: c.restarts,
        levels: c.levels,
        sweeps: c.sweeps,
        initial_step: c.initial_step,
        halvings: c.halvings,
        samples: c.samples,
        refine: c.refine,
        seed: c.seed,
    }
}

fn boxed(frontier: Frontier) -> *mut CzicFrontier {
    let points = frontier.points();
    Box::into_raw(Box::new(CzicFrontier {
        inner: frontier,
        points,
    }))
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn czic_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn czic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Regime of `channel` and the thresholds `[1, t2, t3, t4]` on `|a|`.
///
/// # Safety
/// `regime` must be valid for a write; `thresholds` must hold 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn czic_classify_regime(
    channel: CzicChannel,
    regime: *mut CzicRegime,
    thresholds: *mut f64,
) -> CzicStatus {
    guard(|| {
        let r = model::classify_regime(&params(channel)?);
        let out = out_ref(regime, "regime")?;
        if thresholds.is_null() {
            return Err(null("thresholds"));
        }
        *out = match r.tag {
            RegimeTag::Weak => CzicRegime::Weak,
            RegimeTag::StrongCapacity => CzicRegime::StrongCapacity,
            RegimeTag::UnknownGap => CzicRegime::UnknownGap,
            RegimeTag::VeryStrong => CzicRegime::VeryStrong,
            RegimeTag::UltraStrong => CzicRegime::UltraStrong,
        };
        std::slice::from_raw_parts_mut(thresholds, 4).copy_from_slice(&r.thresholds.as_array());
        Ok(())
    })
}

/// Constraint set of `bound` at one parameter point: `(rho1, rho2, rho12)`
/// for lemma1, `(gamma)` for cor1, `(alpha, beta)` for cor3 and `(alpha)` for
/// the rest. Unused entries are ignored.
///
/// # Safety
/// `point` must hold 3 doubles and `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_constraint_set(
    bound: CzicBound,
    channel: CzicChannel,
    point: *const f64,
    out: *mut CzicConstraintSet,
) -> CzicStatus {
    guard(|| {
        if point.is_null() {
            return Err(null("point"));
        }
        let p = std::slice::from_raw_parts(point, 3);
        let set = bounds::constraint_set(bound_kind(bound), &params(channel)?, [p[0], p[1], p[2]])?;
        *out_ref(out, "out")? = CzicConstraintSet {
            r1_max: set.r1_max,
            r2_max: set.r2_max,
            sum_max: set.sum_max,
        };
        Ok(())
    })
}

/// Default sweep resolution: 201 power splits, 101 correlations, 401 R2 levels.
#[no_mangle]
pub extern "C" fn czic_grid_default() -> CzicGridSpec {
    let g = GridSpec::default();
    CzicGridSpec {
        alpha: g.alpha,
        rho: g.rho,
        r2: g.r2,
        lemma1_mode: match g.lemma1_mode {
            Lemma1Mode::Full => CzicLemma1Mode::Full,
            Lemma1Mode::Boundary => CzicLemma1Mode::Boundary,
        },
    }
}

/// Sweeps `bound` into a new frontier handle.
///
/// # Safety
/// `grid` must point to a grid spec and `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_region_frontier(
    bound: CzicBound,
    channel: CzicChannel,
    grid: *const CzicGridSpec,
    out: *mut *mut CzicFrontier,
) -> CzicStatus {
    guard(|| {
        let grid = grid_spec(in_ref(grid, "grid")?);
        let slot = out_ref(out, "out")?;
        let f = bounds::bound_frontier(bound_kind(bound), &params(channel)?, &grid)?;
        *slot = boxed(f);
        Ok(())
    })
}

/// Number of samples in `frontier`, 0 for null.
///
/// # Safety
/// `frontier` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn czic_frontier_len(frontier: *const CzicFrontier) -> usize {
    frontier.as_ref().map_or(0, |f| f.points.len())
}

/// Sample `index` in descending R2 order.
///
/// # Safety
/// `frontier` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_frontier_point(
    frontier: *const CzicFrontier,
    index: usize,
    out: *mut CzicRatePair,
) -> CzicStatus {
    guard(|| {
        let f = in_ref(frontier, "frontier")?;
        let p = f.points.get(index).ok_or_else(|| {
            Failure(
                CzicStatus::OutOfRange,
                format!("index {index} >= length {}", f.points.len()),
            )
        })?;
        *out_ref(out, "out")? = CzicRatePair { r1: p.r1, r2: p.r2 };
        Ok(())
    })
}

/// Interpolated R1 at `r2` (0 beyond the top of the frontier).
///
/// # Safety
/// `frontier` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_frontier_r1_at(frontier: *const CzicFrontier, r2: f64, out: *mut f64) -> CzicStatus {
    guard(|| {
        let f = in_ref(frontier, "frontier")?;
        *out_ref(out, "out")? = f.inner.r1_at(r2);
        Ok(())
    })
}

/// Releases a frontier handle. Null is ignored.
///
/// # Safety
/// `frontier` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn czic_frontier_free(frontier: *mut CzicFrontier) {
    if !frontier.is_null() {
        drop(Box::from_raw(frontier));
    }
}

/// Upper concave envelope of `frontier` as a new handle.
///
/// # Safety
/// `frontier` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_frontier_convexify(
    frontier: *const CzicFrontier,
    out: *mut *mut CzicFrontier,
) -> CzicStatus {
    guard(|| {
        let f = in_ref(frontier, "frontier")?;
        *out_ref(out, "out")? = boxed(regions::upper_concave_envelope(&f.inner));
        Ok(())
    })
}

/// Largest `R1_outer(R2) - R1_inner(R2)` and where it occurs. `r2_at_max` may be null.
///
/// # Safety
/// Both handles must be live; `gap` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_directed_gap(
    outer: *const CzicFrontier,
    inner: *const CzicFrontier,
    gap: *mut f64,
    r2_at_max: *mut f64,
) -> CzicStatus {
    guard(|| {
        let report = regions::gap_report(&in_ref(outer, "outer")?.inner, &in_ref(inner, "inner")?.inner)?;
        *out_ref(gap, "gap")? = report.gap;
        if let Some(r) = r2_at_max.as_mut() {
            *r = report.r2_at_max;
        }
        Ok(())
    })
}

/// Whether `point` lies under `frontier` with slack `tol` on both axes.
///
/// # Safety
/// `frontier` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_frontier_contains(
    frontier: *const CzicFrontier,
    point: CzicRatePair,
    tol: f64,
    out: *mut bool,
) -> CzicStatus {
    guard(|| {
        let f = in_ref(frontier, "frontier")?;
        *out_ref(out, "out")? = regions::contains(&f.inner, RatePair::new(point.r1, point.r2), tol);
        Ok(())
    })
}

/// Writes `frontier` as `r2_bits,r1_bits` CSV to `path`.
///
/// # Safety
/// `frontier` must be a live handle and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn czic_frontier_write_csv(frontier: *const CzicFrontier, path: *const c_char) -> CzicStatus {
    guard(|| {
        let f = in_ref(frontier, "frontier")?;
        let path = c_str(path, "path")?;
        let file = std::fs::File::create(path).map_err(CzicError::from)?;
        regions::write_csv(&f.inner, std::io::BufWriter::new(file))?;
        Ok(())
    })
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CzicStatus::Malformed, format!("{what} is not valid UTF-8")))
}

/// Sample estimates of `[I(X1;Y1|U), I(U;Y2), I(X1,X2;Y1)]` and their
/// standard errors. `std_err` may be null.
///
/// # Safety
/// `values` must hold 3 doubles; `std_err` must be null or hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn czic_estimate_rates(
    channel: CzicChannel,
    alpha: f64,
    samples: usize,
    seed: u64,
    values: *mut f64,
    std_err: *mut f64,
) -> CzicStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let est = mc::estimate_rates(&params(channel)?, alpha, samples, seed)?;
        std::slice::from_raw_parts_mut(values, 3).copy_from_slice(&est.values);
        if !std_err.is_null() {
            std::slice::from_raw_parts_mut(std_err, 3).copy_from_slice(&est.std_err);
        }
        Ok(())
    })
}

/// Runs the random-coding trials described by `config`.
///
/// # Safety
/// `config` must point to a config and `out` be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_run_trials(config: *const CzicSimConfig, out: *mut CzicTrialSummary) -> CzicStatus {
    guard(|| {
        let c = in_ref(config, "config")?;
        let slot = out_ref(out, "out")?;
        let cfg = SimConfig {
            trials: c.trials,
            seed: c.seed,
            decoder1: match c.decoder1 {
                CzicDecoder::JointMl => Decoder::JointMl,
                CzicDecoder::Successive => Decoder::Successive,
            },
            codebook: match c.codebook {
                CzicCodebook::Explicit => CodebookMode::Explicit,
                CzicCodebook::Implicit => CodebookMode::Implicit,
            },
            ..SimConfig::new(params(c.channel)?, c.alpha, c.n, c.r1, c.r2)
        };
        let s = mc::run_trials(&cfg)?;
        *slot = CzicTrialSummary {
            m1: s.m1,
            m2: s.m2,
            err1_count: s.err1_count,
            err2_count: s.err2_count,
            err1_rate: s.err1_rate,
            err2_rate: s.err2_rate,
            ci1: s.ci1,
            ci2: s.ci2,
            empirical_power: s.empirical_power,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn czic_search_config_default() -> CzicSearchConfig {
    let s = SearchConfig::default();
    CzicSearchConfig {
        restarts: s.restarts,
        levels: s.levels,
        sweeps: s.sweeps,
        initial_step: s.initial_step,
        halvings: s.halvings,
        samples: s.samples,
        refine: s.refine,
        seed: s.seed,
    }
}

/// Parses a channel from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_dm_channel_from_json(json: *const c_char, out: *mut *mut CzicDmChannel) -> CzicStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        let slot = out_ref(out, "out")?;
        let ch = DMChannel::from_json(text)?;
        *slot = Box::into_raw(Box::new(CzicDmChannel { inner: ch }));
        Ok(())
    })
}

/// Releases a channel handle. Null is ignored.
///
/// # Safety
/// `channel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn czic_dm_channel_free(channel: *mut CzicDmChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// Sampled check of the strong interference condition. `margin` receives the
/// smallest margin seen when the verdict is `Holds`, the violating margin
/// when `Violated`, and NaN otherwise; it may be null.
///
/// # Safety
/// Handles and `config` must be live; `verdict` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_dm_check_strong_interference(
    channel: *const CzicDmChannel,
    config: *const CzicSearchConfig,
    verdict: *mut CzicVerdict,
    margin: *mut f64,
) -> CzicStatus {
    guard(|| {
        let ch = in_ref(channel, "channel")?;
        let cfg = search_config(in_ref(config, "config")?);
        let slot = out_ref(verdict, "verdict")?;
        let (v, m) = match dm::check_strong_interference(&ch.inner, &cfg)? {
            Verdict::Holds { min_margin } => (CzicVerdict::Holds, min_margin),
            Verdict::Violated { margin, .. } => (CzicVerdict::Violated, margin),
            Verdict::Inconclusive => (CzicVerdict::Inconclusive, f64::NAN),
        };
        *slot = v;
        if let Some(out) = margin.as_mut() {
            *out = m;
        }
        Ok(())
    })
}

unsafe fn dm_region(
    channel: *const CzicDmChannel,
    config: *const CzicSearchConfig,
    out: *mut *mut CzicFrontier,
    search: fn(&DMChannel, &SearchConfig) -> czic::Result<Frontier>,
) -> CzicStatus {
    guard(|| {
        let ch = in_ref(channel, "channel")?;
        let cfg = search_config(in_ref(config, "config")?);
        let slot = out_ref(out, "out")?;
        *slot = boxed(search(&ch.inner, &cfg)?);
        Ok(())
    })
}

/// Randomized search of the superposition inner region.
///
/// # Safety
/// Handles and `config` must be live; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_dm_inner_region(
    channel: *const CzicDmChannel,
    config: *const CzicSearchConfig,
    out: *mut *mut CzicFrontier,
) -> CzicStatus {
    dm_region(channel, config, out, dm::inner_region_search)
}

/// Randomized search of the outer region.
///
/// # Safety
/// Handles and `config` must be live; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn czic_dm_outer_region(
    channel: *const CzicDmChannel,
    config: *const CzicSearchConfig,
    out: *mut *mut CzicFrontier,
) -> CzicStatus {
    dm_region(channel, config, out, dm::outer_region_search)
}

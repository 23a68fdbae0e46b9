//! From harmonic-measure estimates along the axis of a comb to slope intervals.
//!
//! The measure `omega(x) = omega(x, upper boundary, Omega)` is sampled at the
//! block midpoints `x_n`, where it approaches the strip value of the block's
//! witness rectangle. Its limsup and liminf `(a1, a2)` give the slope set
//! `[pi (1/2 - a1), pi (1/2 - a2)]`.
//!
//! Two error sources are kept apart in every check: the block tolerance `1/n`
//! of the construction and the Monte Carlo band `3 sigma`.

pub mod render;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comb::{
    build_comb, surgery, AnchorRole, CombDomain, CombError, Direction, Domain, SequencePlan, SurgeryKind,
};
use crate::geometry::{GeometryError, Point, SlopeInterval};
use crate::wos::{estimate_upper_measure, point_seed, MeasureEstimate, WosError, WosParams, RNG_ALGORITHM};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyzerError {
    #[error("limits need 0 <= a2 <= a1 <= 1, got a1 = {a1}, a2 = {a2}")]
    LimitOrder { a1: f64, a2: f64 },
    #[error("profile has {have} anchor entries, need at least {need}")]
    TooFewAnchors { have: usize, need: usize },
    #[error("profile times are not strictly monotone in the profile direction")]
    NotMonotone,
    #[error("estimate at t = {t} is invalid (lost fraction {lost_fraction})")]
    InvalidEstimate { t: f64, lost_fraction: f64 },
    #[error("liminf estimate {liminf} exceeds limsup estimate {limsup} by more than the bands")]
    InconsistentLimits { limsup: f64, liminf: f64 },
    #[error("calibration of block {block} found no passing width up to aspect {max_aspect}")]
    CalibrationFailed { block: usize, max_aspect: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Plan(#[from] CombError),
    #[error(transparent)]
    Wos(#[from] WosError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `[pi (1/2 - a1), pi (1/2 - a2)]`.
pub fn slope_interval_from_limits(a1: f64, a2: f64) -> Result<SlopeInterval, AnalyzerError> {
    if !(0.0..=1.0).contains(&a1) || !(0.0..=1.0).contains(&a2) || a2 > a1 {
        return Err(AnalyzerError::LimitOrder { a1, a2 });
    }
    Ok(SlopeInterval::new(PI * (0.5 - a1), PI * (0.5 - a2))?)
}

/// Standard error with one pseudo-hit added on each side, so that an estimate
/// of exactly 0 or 1 from few walkers still carries a band.
pub fn sigma(e: &MeasureEstimate) -> f64 {
    let n = e.walkers_used as f64;
    let p = (e.upper_hits as f64 + 1.0) / (n + 2.0);
    (p * (1.0 - p) / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub t: f64,
    /// Block whose midpoint this is, for anchor entries.
    pub block: Option<usize>,
    pub role: Option<AnchorRole>,
    pub target: Option<f64>,
    pub estimate: MeasureEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaProfile {
    pub direction: Direction,
    pub entries: Vec<ProfilePoint>,
}

impl OmegaProfile {
    pub fn new(direction: Direction, entries: Vec<ProfilePoint>) -> Result<Self, AnalyzerError> {
        let monotone = entries.windows(2).all(|w| match direction {
            Direction::Forward => w[1].t > w[0].t,
            Direction::Backward => w[1].t < w[0].t,
        });
        if !monotone {
            return Err(AnalyzerError::NotMonotone);
        }
        if let Some(bad) = entries.iter().find(|e| !e.estimate.valid) {
            return Err(AnalyzerError::InvalidEstimate {
                t: bad.t,
                lost_fraction: bad.estimate.lost_fraction(),
            });
        }
        Ok(Self { direction, entries })
    }

    pub fn anchors(&self) -> impl Iterator<Item = &ProfilePoint> {
        self.entries.iter().filter(|e| e.role.is_some())
    }
}

/// Estimates at every anchor midpoint of `plan`, block `n` seeded with
/// `point_seed(seed, n)`.
pub fn anchor_profile(plan: &SequencePlan, params: &WosParams) -> Result<OmegaProfile, AnalyzerError> {
    let domain = build_comb(plan)?;
    let mut entries = Vec::new();
    for n in plan.anchor_blocks() {
        let x = plan.midpoint(n);
        let p = params.with_seed(point_seed(params.seed, n as u64));
        let estimate = estimate_upper_measure(&domain, Point::new(x, 0.0), 0.0, &p)?;
        entries.push(ProfilePoint {
            t: x,
            block: Some(n),
            role: Some(plan.anchor_role(n)),
            target: plan.block_target(n),
            estimate,
        });
    }
    OmegaProfile::new(plan.direction, entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailScheme {
    /// Anchors of each role, counted from the far end, that enter the extrema.
    pub late: usize,
    pub sigma_factor: f64,
    pub min_anchors: usize,
}

impl Default for TailScheme {
    fn default() -> Self {
        Self {
            late: 2,
            sigma_factor: 3.0,
            min_anchors: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitPair {
    pub limsup_hat: f64,
    pub liminf_hat: f64,
    pub limsup_band: f64,
    pub liminf_band: f64,
    /// The liminf estimate exceeded the limsup estimate within the bands and
    /// both were replaced by their mean.
    pub collapsed: bool,
}

impl LimitPair {
    pub fn interval(&self) -> Result<SlopeInterval, AnalyzerError> {
        slope_interval_from_limits(self.limsup_hat, self.liminf_hat)
    }
}

fn late_by_role(profile: &OmegaProfile, role: AnchorRole, late: usize) -> Vec<&ProfilePoint> {
    let all: Vec<&ProfilePoint> = profile.anchors().filter(|e| e.role == Some(role)).collect();
    all[all.len().saturating_sub(late)..].to_vec()
}

/// Limsup as the largest of the last `late` high anchors, liminf as the
/// smallest of the last `late` low anchors.
pub fn tail_extrema(profile: &OmegaProfile, scheme: &TailScheme) -> Result<LimitPair, AnalyzerError> {
    let have = profile.anchors().count();
    if have < scheme.min_anchors.max(2) || scheme.late == 0 {
        return Err(AnalyzerError::TooFewAnchors {
            have,
            need: scheme.min_anchors.max(2),
        });
    }
    let highs = late_by_role(profile, AnchorRole::High, scheme.late);
    let lows = late_by_role(profile, AnchorRole::Low, scheme.late);
    let band = |e: &ProfilePoint| scheme.sigma_factor * sigma(&e.estimate);
    let (Some(top), Some(bottom)) = (
        highs.iter().max_by(|a, b| a.estimate.mean.total_cmp(&b.estimate.mean)),
        lows.iter().min_by(|a, b| a.estimate.mean.total_cmp(&b.estimate.mean)),
    ) else {
        return Err(AnalyzerError::TooFewAnchors { have, need: 2 });
    };
    let mut pair = LimitPair {
        limsup_hat: top.estimate.mean,
        liminf_hat: bottom.estimate.mean,
        limsup_band: band(top),
        liminf_band: band(bottom),
        collapsed: false,
    };
    if pair.liminf_hat > pair.limsup_hat {
        if pair.liminf_hat - pair.limsup_hat > pair.limsup_band + pair.liminf_band {
            return Err(AnalyzerError::InconsistentLimits {
                limsup: pair.limsup_hat,
                liminf: pair.liminf_hat,
            });
        }
        let mid = (pair.limsup_hat + pair.liminf_hat) / 2.0;
        pair.limsup_hat = mid;
        pair.liminf_hat = mid;
        pair.collapsed = true;
    }
    Ok(pair)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Smallest width tried, as a multiple of the block height `above + below`.
    pub min_aspect: f64,
    pub max_aspect: f64,
    pub bisections: u32,
    pub sigma_factor: f64,
    /// Factor by which each width must exceed the previous one.
    pub growth: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            min_aspect: 4.0,
            max_aspect: 256.0,
            bisections: 6,
            sigma_factor: 3.0,
            growth: 1.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectCheck {
    pub above: f64,
    pub below: f64,
    pub target: f64,
    pub estimate: MeasureEstimate,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTrial {
    pub aspect: f64,
    pub width: f64,
    pub checks: Vec<RectCheck>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub block: usize,
    pub tolerance: f64,
    pub proportions: Vec<(f64, f64)>,
    pub trials: Vec<CalibrationTrial>,
    pub raw_width: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub plan: SequencePlan,
    pub steps: Vec<CalibrationStep>,
    pub params: WosParams,
    pub config: CalibrationConfig,
}

fn trial(
    block: usize,
    aspect: f64,
    props: &[(f64, f64)],
    tolerance: f64,
    params: &WosParams,
    cfg: &CalibrationConfig,
) -> Result<CalibrationTrial, AnalyzerError> {
    let scale = props.iter().map(|(a, b)| a + b).fold(0.0, f64::max);
    let width = aspect * scale;
    let mut checks = Vec::with_capacity(props.len());
    for (j, &(above, below)) in props.iter().enumerate() {
        let strip = CombDomain::pseudo_strip(above, below, width / 2.0)?;
        let p = params.with_seed(point_seed(params.seed, (block * 4 + j) as u64));
        let estimate = estimate_upper_measure(&strip, Point::new(0.0, 0.0), 0.0, &p)?;
        let target = below / (above + below);
        let passed = estimate.valid
            && (estimate.mean - target).abs() <= tolerance - cfg.sigma_factor * sigma(&estimate);
        checks.push(RectCheck {
            above,
            below,
            target,
            estimate,
            passed,
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(CalibrationTrial {
        aspect,
        width,
        checks,
        passed,
    })
}

/// Widths `u'_n` such that a rectangle of width `u'_n` with the proportions of
/// block `n`, and one with those of block `n + 1`, each placed in a two-tooth
/// pseudo-strip, measure within `1/n` of their strip value after subtracting
/// `sigma_factor` standard errors.
///
/// Each block starts at `min_aspect` and, when that fails, doubles and then
/// bisects the aspect ratio. Widths are then raised to a strictly increasing
/// sequence. Blocks without any witness reuse the previous width.
pub fn calibrate_widths(
    plan: &SequencePlan,
    params: &WosParams,
    cfg: &CalibrationConfig,
) -> Result<Calibration, AnalyzerError> {
    if !(cfg.min_aspect > 0.0 && cfg.max_aspect >= cfg.min_aspect && cfg.growth > 1.0) {
        return Err(AnalyzerError::Config(
            "calibration needs 0 < min_aspect <= max_aspect and growth > 1".into(),
        ));
    }
    let count = plan.block_count();
    let mut steps: Vec<CalibrationStep> = Vec::with_capacity(count);
    let mut widths = Vec::with_capacity(count);
    for n in 1..=count {
        let tolerance = 1.0 / n as f64;
        let props: Vec<(f64, f64)> = [n, n + 1]
            .into_iter()
            .filter(|&m| m <= count)
            .filter_map(|m| plan.block_proportions(m))
            .collect();
        let prev = widths.last().copied();
        let mut trials = Vec::new();
        let raw = if props.is_empty() {
            match prev {
                Some(w) => w,
                None => cfg.min_aspect * (plan.r[0] + plan.rho[0]),
            }
        } else {
            let first = trial(n, cfg.min_aspect, &props, tolerance, params, cfg)?;
            let ok = first.passed;
            trials.push(first);
            if ok {
                trials[0].width
            } else {
                let (mut lo, mut hi) = (cfg.min_aspect, 2.0 * cfg.min_aspect);
                loop {
                    if hi > cfg.max_aspect {
                        return Err(AnalyzerError::CalibrationFailed {
                            block: n,
                            max_aspect: cfg.max_aspect,
                        });
                    }
                    let t = trial(n, hi, &props, tolerance, params, cfg)?;
                    let ok = t.passed;
                    trials.push(t);
                    if ok {
                        break;
                    }
                    lo = hi;
                    hi *= 2.0;
                }
                let mut best = trials.last().map(|t| t.width).unwrap_or_default();
                for _ in 0..cfg.bisections {
                    let mid = (lo * hi).sqrt();
                    let t = trial(n, mid, &props, tolerance, params, cfg)?;
                    if t.passed {
                        hi = mid;
                        best = t.width;
                    } else {
                        lo = mid;
                    }
                    trials.push(t);
                }
                best
            }
        };
        let width = match prev {
            Some(w) if raw <= w * cfg.growth => w * cfg.growth,
            _ => raw,
        };
        widths.push(width);
        steps.push(CalibrationStep {
            block: n,
            tolerance,
            proportions: props,
            trials,
            raw_width: raw,
            width,
        });
    }
    let plan = crate::comb::assign_widths(plan, &widths)?;
    Ok(Calibration {
        plan,
        steps,
        params: *params,
        config: *cfg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    fn combine(self, other: Status) -> Status {
        match (self, other) {
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            (Status::Inconclusive, _) | (_, Status::Inconclusive) => Status::Inconclusive,
            _ => Status::Pass,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub params: WosParams,
    /// Anchor pass threshold on `|estimate - target|`.
    pub anchor_tol: f64,
    /// Pass threshold on the endpoint distance of the slope interval.
    pub interval_tol: f64,
    pub sigma_factor: f64,
    pub points_per_gap: usize,
    pub surgery: bool,
    pub tail: TailScheme,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            params: WosParams::default(),
            anchor_tol: 0.05,
            interval_tol: 0.05 * PI,
            sigma_factor: 3.0,
            points_per_gap: 3,
            surgery: true,
            tail: TailScheme::default(),
        }
    }
}

/// Version, RNG and configuration stamped on every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub schema_version: u32,
    pub tool_version: String,
    pub rng: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl Meta {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            rng: RNG_ALGORITHM.to_string(),
            seed,
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorCheck {
    pub block: usize,
    pub role: AnchorRole,
    pub x: f64,
    pub target: f64,
    pub seed: u64,
    pub estimate: Option<MeasureEstimate>,
    pub error: Option<String>,
    pub deviation: Option<f64>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantCheck {
    pub kind: SurgeryKind,
    pub estimate: Option<MeasureEstimate>,
    pub error: Option<String>,
    /// The construction's bound on the variant: an upper bound for `Omega1`,
    /// a lower bound for `Omega2`.
    pub bound: f64,
    /// Ordering against the base estimate, within combined bands.
    pub ordered: bool,
    pub within_bound: bool,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    /// Index `n` of the anchor starting the gap `[x_n, x_{n+1}]`.
    pub block: usize,
    pub x: f64,
    pub seed: u64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub estimate: Option<MeasureEstimate>,
    pub error: Option<String>,
    pub omega1: Option<VariantCheck>,
    pub omega2: Option<VariantCheck>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub meta: Meta,
    pub plan: SequencePlan,
    pub config: VerifyConfig,
    pub anchors: Vec<AnchorCheck>,
    pub gaps: Vec<GapCheck>,
    pub limits: Option<LimitPair>,
    pub interval: Option<SlopeInterval>,
    /// Interval of the plan's limits.
    pub target_interval: SlopeInterval,
    /// Interval the tail rule gives on the anchor targets of this truncation.
    pub finite_target_interval: Option<SlopeInterval>,
    pub interval_deviation: Option<f64>,
    pub interval_status: Status,
    pub verdict: Status,
    pub failures: Vec<String>,
}

impl VerifyReport {
    /// Number of in-between samples (and surgery variants) outside their band.
    pub fn sandwich_violations(&self) -> usize {
        self.gaps
            .iter()
            .map(|g| {
                let base = g
                    .estimate
                    .as_ref()
                    .map_or(0, |e| usize::from(e.mean < g.band_lo || e.mean > g.band_hi));
                let variants = [&g.omega1, &g.omega2]
                    .into_iter()
                    .flatten()
                    .filter(|v| !(v.ordered && v.within_bound))
                    .count();
                base + variants
            })
            .sum()
    }
}

fn uncertain(sigma: f64, cfg: &VerifyConfig) -> bool {
    cfg.sigma_factor * sigma > cfg.anchor_tol
}

fn finite_targets(plan: &SequencePlan, scheme: &TailScheme) -> Option<SlopeInterval> {
    let late = |role| {
        let blocks: Vec<usize> = plan
            .anchor_blocks()
            .into_iter()
            .filter(|&n| plan.anchor_role(n) == role)
            .collect();
        blocks[blocks.len().saturating_sub(scheme.late)..]
            .iter()
            .filter_map(|&n| plan.block_target(n))
            .collect::<Vec<f64>>()
    };
    let high = late(AnchorRole::High).into_iter().reduce(f64::max)?;
    let low = late(AnchorRole::Low).into_iter().reduce(f64::min)?;
    if low > high {
        let mid = (low + high) / 2.0;
        return slope_interval_from_limits(mid, mid).ok();
    }
    slope_interval_from_limits(high, low).ok()
}

/// Seed of the `j`-th in-between point after anchor `n`.
pub fn gap_seed(seed: u64, n: usize, j: usize) -> u64 {
    point_seed(seed, 1_000_000 + 16 * n as u64 + j as u64)
}

struct Checker<'a> {
    cfg: &'a VerifyConfig,
    failures: Vec<String>,
}

impl Checker<'_> {
    fn estimate<D: Domain + ?Sized>(
        &mut self,
        domain: &D,
        x: f64,
        seed: u64,
        what: &str,
    ) -> (Option<MeasureEstimate>, Option<String>) {
        let p = self.cfg.params.with_seed(seed);
        match estimate_upper_measure(domain, Point::new(x, 0.0), 0.0, &p) {
            Ok(e) if e.valid => (Some(e), None),
            Ok(e) => {
                let msg = format!("{what}: lost fraction {} above limit", e.lost_fraction());
                self.failures.push(msg.clone());
                (Some(e), Some(msg))
            }
            Err(err) => {
                let msg = format!("{what}: {err}");
                self.failures.push(msg.clone());
                (None, Some(msg))
            }
        }
    }
}

/// Runs the comb of `plan` through anchors, in-between samples with surgery
/// bounds, tail extrema and the slope interval.
pub fn verify_construction(plan: &SequencePlan, cfg: &VerifyConfig) -> Result<VerifyReport, AnalyzerError> {
    plan.validate()?;
    let domain = build_comb(plan)?;
    let target_interval = slope_interval_from_limits(plan.targets.high, plan.targets.low)?;
    let mut checker = Checker {
        cfg,
        failures: Vec::new(),
    };
    let seed = cfg.params.seed;

    let blocks = plan.anchor_blocks();
    let mut anchors = Vec::with_capacity(blocks.len());
    for &n in &blocks {
        let x = plan.midpoint(n);
        let target = plan.block_target(n).unwrap_or(f64::NAN);
        let s = point_seed(seed, n as u64);
        let (estimate, error) = checker.estimate(&domain, x, s, &format!("anchor {n}"));
        let (deviation, status) = match (&estimate, &error) {
            (Some(e), None) => {
                let dev = (e.mean - target).abs();
                let status = if uncertain(sigma(e), cfg) {
                    Status::Inconclusive
                } else if dev <= cfg.anchor_tol {
                    Status::Pass
                } else {
                    checker
                        .failures
                        .push(format!("anchor {n}: |{:.4} - {target:.4}| > {}", e.mean, cfg.anchor_tol));
                    Status::Fail
                };
                (Some(dev), status)
            }
            _ => (None, Status::Fail),
        };
        anchors.push(AnchorCheck {
            block: n,
            role: plan.anchor_role(n),
            x,
            target,
            seed: s,
            estimate,
            error,
            deviation,
            status,
        });
    }

    let mut gaps = Vec::new();
    for pair in blocks.windows(2) {
        let (n, m) = (pair[0], pair[1]);
        if m != n + 1 || cfg.points_per_gap == 0 {
            continue;
        }
        let (tn, tm) = (
            plan.block_target(n).unwrap_or(f64::NAN),
            plan.block_target(m).unwrap_or(f64::NAN),
        );
        let (lo_t, hi_t) = (tn.min(tm), tn.max(tm));
        let slack = 1.0 / n as f64;
        let (xn, xm) = (plan.midpoint(n), plan.midpoint(m));
        // the tooth anchored between x_n and x_{n+1} is tooth n; odd ones are upper
        let variants = if cfg.surgery && n % 2 == 1 {
            let k = n.div_ceil(2);
            Some((
                surgery(&domain, SurgeryKind::Omega1(k)),
                surgery(&domain, SurgeryKind::Omega2(k)),
            ))
        } else {
            None
        };
        for j in 1..=cfg.points_per_gap {
            let x = xn + (xm - xn) * j as f64 / (cfg.points_per_gap + 1) as f64;
            let s = gap_seed(seed, n, j);
            let (estimate, error) = checker.estimate(&domain, x, s, &format!("gap {n} point {j}"));
            let sb = estimate.as_ref().map_or(f64::NAN, sigma);
            let band_lo = lo_t - slack - cfg.sigma_factor * sb;
            let band_hi = hi_t + slack + cfg.sigma_factor * sb;
            let mut status = match (&estimate, &error) {
                (Some(e), None) => {
                    if e.mean < band_lo || e.mean > band_hi {
                        checker.failures.push(format!(
                            "gap {n} point {j}: {:.4} outside [{band_lo:.4}, {band_hi:.4}]",
                            e.mean
                        ));
                        Status::Fail
                    } else if uncertain(sb, cfg) {
                        Status::Inconclusive
                    } else {
                        Status::Pass
                    }
                }
                _ => Status::Fail,
            };
            let mut omega1 = None;
            let mut omega2 = None;
            if let (Some((v1, v2)), Some(base)) = (&variants, &estimate) {
                for (variant, slot, upper) in [(v1, &mut omega1, true), (v2, &mut omega2, false)] {
                    let check = match variant {
                        Ok(v) => {
                            let what = format!("gap {n} point {j} {:?}", v.kind);
                            let (est, err) = checker.estimate(v, x, s, &what);
                            let bound = if upper { hi_t + slack } else { lo_t - slack };
                            let (ordered, within_bound, st) = match (&est, &err) {
                                (Some(e), None) => {
                                    let sv = sigma(e);
                                    let both = cfg.sigma_factor * (sb * sb + sv * sv).sqrt();
                                    let ordered = if upper {
                                        base.mean <= e.mean + both
                                    } else {
                                        e.mean - both <= base.mean
                                    };
                                    let within = if upper {
                                        e.mean <= bound + cfg.sigma_factor * sv
                                    } else {
                                        e.mean >= bound - cfg.sigma_factor * sv
                                    };
                                    let st = if !(ordered && within) {
                                        checker.failures.push(format!(
                                            "{what}: {:.4} breaks the {} (base {:.4}, bound {bound:.4})",
                                            e.mean,
                                            if ordered { "bound" } else { "ordering" },
                                            base.mean
                                        ));
                                        Status::Fail
                                    } else if uncertain(sv, cfg) {
                                        Status::Inconclusive
                                    } else {
                                        Status::Pass
                                    };
                                    (ordered, within, st)
                                }
                                _ => (false, false, Status::Fail),
                            };
                            VariantCheck {
                                kind: v.kind,
                                estimate: est,
                                error: err,
                                bound,
                                ordered,
                                within_bound,
                                status: st,
                            }
                        }
                        // the last upper tooth has no right neighbour for Omega1
                        Err(_) => continue,
                    };
                    status = status.combine(check.status);
                    *slot = Some(check);
                }
            }
            gaps.push(GapCheck {
                block: n,
                x,
                seed: s,
                band_lo,
                band_hi,
                estimate,
                error,
                omega1,
                omega2,
                status,
            });
        }
    }

    let points: Vec<ProfilePoint> = anchors
        .iter()
        .filter_map(|a| {
            a.estimate.as_ref().filter(|e| e.valid).map(|e| ProfilePoint {
                t: a.x,
                block: Some(a.block),
                role: Some(a.role),
                target: Some(a.target),
                estimate: e.clone(),
            })
        })
        .collect();
    let finite_target_interval = finite_targets(plan, &cfg.tail);
    let limits = OmegaProfile::new(plan.direction, points).and_then(|p| tail_extrema(&p, &cfg.tail));
    let (limits, interval, interval_deviation, interval_status) = match limits {
        Ok(l) => {
            let interval = l.interval()?;
            let deviation = finite_target_interval.map(|t| interval.distance(&t));
            let status = if PI * l.limsup_band.max(l.liminf_band) > cfg.interval_tol {
                Status::Inconclusive
            } else {
                match deviation {
                    Some(d) if d <= cfg.interval_tol => Status::Pass,
                    Some(d) => {
                        checker.failures.push(format!(
                            "slope interval endpoints off by {:.4} pi > {:.4} pi",
                            d / PI,
                            cfg.interval_tol / PI
                        ));
                        Status::Fail
                    }
                    None => Status::Fail,
                }
            };
            (Some(l), Some(interval), deviation, status)
        }
        Err(e) => {
            checker.failures.push(format!("limits: {e}"));
            (None, None, None, Status::Fail)
        }
    };

    let verdict = anchors
        .iter()
        .map(|a| a.status)
        .chain(gaps.iter().map(|g| g.status))
        .fold(interval_status, Status::combine);
    Ok(VerifyReport {
        meta: Meta::new(seed, serde_json::to_value(cfg).unwrap_or_default()),
        plan: plan.clone(),
        config: *cfg,
        anchors,
        gaps,
        limits,
        interval,
        target_interval,
        finite_target_interval,
        interval_deviation,
        interval_status,
        verdict,
        failures: checker.failures,
    })
}

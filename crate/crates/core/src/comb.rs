//! Comb domains: the plane minus leftward horizontal teeth whose heights follow
//! a two-term recurrence, so that harmonic measure along the real axis
//! oscillates between two prescribed limits.
//!
//! Forward combs (trajectory heading to `+inf`) have upper teeth
//! `E[u_{2k-1} + i r_k]` and lower teeth `E[u_{2k} - i rho_k]`; heights grow.
//! Backward combs (trajectory heading to `-inf`) have teeth anchored at
//! `-u_{2k-1}` and `-u_{2k}` with shrinking heights.
//!
//! Block `n` is the stretch of the real axis between consecutive anchors
//! (`u_{n-1} < x < u_n`, mirrored for backward combs). Its witness rectangle
//! spans the whole block between the nearest upper and lower teeth that run
//! over it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{finite, GeometryError, HSegment, HalfLine, Point, RectWitness};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CombError {
    #[error("plan: {0}")]
    Plan(String),
    #[error("{what} index {index} outside 1..={len}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("plan has no widths assigned")]
    MissingWidths,
    #[error("block {0} has no witness rectangle in this comb")]
    NoWitness(usize),
    #[error("witness rectangle for block {0} failed the containment check")]
    WitnessFailed(usize),
    #[error("hit {hit} lies exactly at the reference height {ref_im}")]
    AmbiguousHit { hit: Point, ref_im: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn plan_err(msg: impl Into<String>) -> CombError {
    CombError::Plan(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SpecialMode {
    /// `b2 = 0`: `r_n = (n+m) rho_n`, `r_n = ((1-b1)/b1) rho_{n-1}`.
    B2Zero { b1: f64, m: u32 },
    /// `b1 = 1`: `r_n = ((1-b2)/b2) rho_n`, `r_n = rho_{n-1} / (n+m)`.
    B1One { b2: f64, m: u32 },
    /// `r_n = n rho_n`, `r_n = rho_{n-1} / n`.
    FullInterval,
}

/// How to read the `n >= 2` recurrence of the `b2 = 0` / `b1 = 1` cases, which
/// appear in the source without a `rho_{n-1}` factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialReading {
    /// With the `rho_{n-1}` factor, consistent with the generic recurrence.
    #[default]
    Corrected,
    /// Constant right-hand side, exactly as printed.
    Literal,
}

/// Side of the axis carrying the second tooth family of a backward comb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerToothSide {
    /// `E[-u_{2k} - i rho_k]`, mirroring the forward comb.
    #[default]
    Mirrored,
    /// `E[-u_{2k} + i rho_k]` as printed; every tooth then lies above the axis.
    Verbatim,
}

/// Target limits: `high` is the limsup (`a1`/`b1`), `low` the liminf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub high: f64,
    pub low: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePlan {
    pub direction: Direction,
    pub targets: Targets,
    pub special: Option<SpecialMode>,
    #[serde(default)]
    pub reading: SpecialReading,
    #[serde(default)]
    pub lower_side: LowerToothSide,
    /// Upper tooth heights `r_1..r_N`.
    pub r: Vec<f64>,
    /// Second tooth heights `rho_1..rho_N`.
    pub rho: Vec<f64>,
    /// Block widths `u'_n`; empty until assigned.
    #[serde(default)]
    pub u_prime: Vec<f64>,
    /// Partial sums `u_n`.
    #[serde(default)]
    pub u: Vec<f64>,
}

fn check_count(n: usize) -> Result<(), CombError> {
    if n == 0 {
        return Err(plan_err("N must be at least 1"));
    }
    Ok(())
}

fn check_r1(r1: f64) -> Result<(), CombError> {
    if !(r1 > 0.0 && r1.is_finite()) {
        return Err(plan_err(format!("r1 must be positive, got {r1}")));
    }
    Ok(())
}

fn limit_of(theta: f64) -> f64 {
    0.5 - theta / PI
}

fn check_open_angle(name: &str, theta: f64) -> Result<(), CombError> {
    if !(theta > -PI / 2.0 && theta < PI / 2.0) {
        return Err(plan_err(format!("{name} = {theta} must lie in (-pi/2, pi/2)")));
    }
    Ok(())
}

/// Runs `r_n = c_first(n) rho_n` and `r_n = c_second(n) rho_{n-1}` from `r_1`.
fn run_recurrence(
    r1: f64,
    n: usize,
    first: impl Fn(usize) -> f64,
    second: impl Fn(usize, f64) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut r = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    r.push(r1);
    rho.push(r1 / first(1));
    for j in 2..=n {
        let rj = second(j, rho[j - 2]);
        r.push(rj);
        rho.push(rj / first(j));
    }
    (r, rho)
}

fn strictly_monotone(v: &[f64], increasing: bool) -> bool {
    v.windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

/// Forward plan from target limits `0 < a2 < a1 < 1`.
pub fn plan_forward_limits(a1: f64, a2: f64, r1: f64, n: usize) -> Result<SequencePlan, CombError> {
    check_r1(r1)?;
    check_count(n)?;
    if !(a2 > 0.0 && a2 < a1 && a1 < 1.0) {
        return Err(plan_err(format!(
            "forward limits need 0 < a2 < a1 < 1, got a1 = {a1}, a2 = {a2}"
        )));
    }
    let c1 = (1.0 - a1) / a1;
    let c2 = (1.0 - a2) / a2;
    let (r, rho) = run_recurrence(r1, n, |_| c1, |_, prev| c2 * prev);
    let plan = SequencePlan {
        direction: Direction::Forward,
        targets: Targets { high: a1, low: a2 },
        special: None,
        reading: SpecialReading::Corrected,
        lower_side: LowerToothSide::Mirrored,
        r,
        rho,
        u_prime: Vec::new(),
        u: Vec::new(),
    };
    plan.check()?;
    Ok(plan)
}

/// Forward plan for `slope+ = [theta1, theta2]`, `-pi/2 < theta1 < theta2 < pi/2`.
pub fn plan_forward(theta1: f64, theta2: f64, r1: f64, n: usize) -> Result<SequencePlan, CombError> {
    check_open_angle("theta1", theta1)?;
    check_open_angle("theta2", theta2)?;
    if theta1 >= theta2 {
        return Err(plan_err(format!("need theta1 < theta2, got {theta1} >= {theta2}")));
    }
    plan_forward_limits(limit_of(theta1), limit_of(theta2), r1, n)
}

/// Backward plan from limits `0 < b2 <= b1 < 1`. Equal limits give constant
/// heights.
pub fn plan_backward_limits(b1: f64, b2: f64, r1: f64, n: usize) -> Result<SequencePlan, CombError> {
    check_r1(r1)?;
    check_count(n)?;
    if !(b2 > 0.0 && b2 <= b1 && b1 < 1.0) {
        return Err(plan_err(format!(
            "backward limits need 0 < b2 <= b1 < 1, got b1 = {b1}, b2 = {b2}"
        )));
    }
    let c2 = (1.0 - b2) / b2;
    let c1 = (1.0 - b1) / b1;
    let (r, rho) = run_recurrence(r1, n, |_| c2, |_, prev| c1 * prev);
    let plan = SequencePlan {
        direction: Direction::Backward,
        targets: Targets { high: b1, low: b2 },
        special: None,
        reading: SpecialReading::Corrected,
        lower_side: LowerToothSide::Mirrored,
        r,
        rho,
        u_prime: Vec::new(),
        u: Vec::new(),
    };
    plan.check()?;
    Ok(plan)
}

/// Backward plan for `slope- = [theta1, theta2]`, `-pi/2 < theta1 <= theta2 < pi/2`.
pub fn plan_backward(theta1: f64, theta2: f64, r1: f64, n: usize) -> Result<SequencePlan, CombError> {
    check_open_angle("theta1", theta1)?;
    check_open_angle("theta2", theta2)?;
    if theta1 > theta2 {
        return Err(plan_err(format!("need theta1 <= theta2, got {theta1} > {theta2}")));
    }
    plan_backward_limits(limit_of(theta1), limit_of(theta2), r1, n)
}

/// Backward plans with an endpoint at `+-pi/2`.
pub fn plan_backward_special(
    mode: SpecialMode,
    r1: f64,
    n: usize,
    reading: SpecialReading,
) -> Result<SequencePlan, CombError> {
    check_r1(r1)?;
    check_count(n)?;
    let (targets, r, rho) = match mode {
        SpecialMode::B2Zero { b1, m } => {
            if !(b1 > 0.0 && b1 < 1.0) {
                return Err(plan_err(format!("b1 must lie in (0, 1), got {b1}")));
            }
            let c1 = (1.0 - b1) / b1;
            let m = m as f64;
            if m + 1.0 <= c1 {
                return Err(plan_err(format!(
                    "m = {m} too small: need n + m > (1 - b1)/b1 = {c1} for all n >= 1"
                )));
            }
            let (r, rho) = run_recurrence(
                r1,
                n,
                |j| j as f64 + m,
                |_, prev| match reading {
                    SpecialReading::Corrected => c1 * prev,
                    SpecialReading::Literal => c1,
                },
            );
            (Targets { high: b1, low: 0.0 }, r, rho)
        }
        SpecialMode::B1One { b2, m } => {
            if !(b2 > 0.0 && b2 < 1.0) {
                return Err(plan_err(format!("b2 must lie in (0, 1), got {b2}")));
            }
            let c2 = (1.0 - b2) / b2;
            let m = m as f64;
            if 1.0 / (2.0 + m) >= c2 {
                return Err(plan_err(format!(
                    "m = {m} too small: need 1/(n + m) < (1 - b2)/b2 = {c2} for all n >= 2"
                )));
            }
            let (r, rho) = run_recurrence(
                r1,
                n,
                |_| c2,
                |j, prev| match reading {
                    SpecialReading::Corrected => prev / (j as f64 + m),
                    SpecialReading::Literal => 1.0 / (j as f64 + m),
                },
            );
            (Targets { high: 1.0, low: b2 }, r, rho)
        }
        SpecialMode::FullInterval => {
            let (r, rho) = run_recurrence(r1, n, |j| j as f64, |j, prev| prev / j as f64);
            (Targets { high: 1.0, low: 0.0 }, r, rho)
        }
    };
    let plan = SequencePlan {
        direction: Direction::Backward,
        targets,
        special: Some(mode),
        reading,
        lower_side: LowerToothSide::Mirrored,
        r,
        rho,
        u_prime: Vec::new(),
        u: Vec::new(),
    };
    plan.check()?;
    Ok(plan)
}

/// Which limit an anchor block approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorRole {
    High,
    Low,
}

impl SequencePlan {
    /// Number of tooth pairs `N`.
    pub fn pairs(&self) -> usize {
        self.r.len()
    }

    /// Number of blocks that carry a width: `2N` forward, `2N + 1` backward
    /// (the last backward block is the half-strip left of every tooth).
    pub fn block_count(&self) -> usize {
        match self.direction {
            Direction::Forward => 2 * self.pairs(),
            Direction::Backward => 2 * self.pairs() + 1,
        }
    }

    pub fn has_widths(&self) -> bool {
        !self.u_prime.is_empty()
    }

    /// Coefficients of the two recurrences at index `n`:
    /// `r_n = first * rho_n` and, for `n >= 2`, `r_n = second * rho_{n-1}`
    /// (`None` when the literal special reading drops the `rho` factor).
    fn coefficients(&self, n: usize) -> (f64, Option<f64>) {
        let t = self.targets;
        match (self.direction, self.special) {
            (Direction::Forward, _) => (
                (1.0 - t.high) / t.high,
                Some((1.0 - t.low) / t.low),
            ),
            (Direction::Backward, None) => (
                (1.0 - t.low) / t.low,
                Some((1.0 - t.high) / t.high),
            ),
            (Direction::Backward, Some(SpecialMode::B2Zero { b1, m })) => (
                n as f64 + m as f64,
                match self.reading {
                    SpecialReading::Corrected => Some((1.0 - b1) / b1),
                    SpecialReading::Literal => None,
                },
            ),
            (Direction::Backward, Some(SpecialMode::B1One { b2, m })) => (
                (1.0 - b2) / b2,
                match self.reading {
                    SpecialReading::Corrected => Some(1.0 / (n as f64 + m as f64)),
                    SpecialReading::Literal => None,
                },
            ),
            (Direction::Backward, Some(SpecialMode::FullInterval)) => {
                (n as f64, Some(1.0 / n as f64))
            }
        }
    }

    /// Largest relative residual of the governing recurrences.
    pub fn recurrence_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 1..=self.pairs() {
            let (first, second) = self.coefficients(n);
            let rn = self.r[n - 1];
            worst = worst.max((rn - first * self.rho[n - 1]).abs() / rn);
            if n >= 2 {
                if let Some(c) = second {
                    worst = worst.max((rn - c * self.rho[n - 2]).abs() / rn);
                }
            }
        }
        worst
    }

    fn check(&self) -> Result<(), CombError> {
        if self.r.len() != self.rho.len() || self.r.is_empty() {
            return Err(plan_err("r and rho must have equal, nonzero length"));
        }
        if self.r.iter().chain(&self.rho).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(plan_err("tooth heights must be positive and finite"));
        }
        let residual = self.recurrence_residual();
        if residual > 1e-12 {
            return Err(plan_err(format!("recurrence residual {residual:e} exceeds 1e-12")));
        }
        let increasing = self.direction == Direction::Forward;
        let constant = self.special.is_none()
            && self.direction == Direction::Backward
            && self.targets.high == self.targets.low;
        let literal = self.special.is_some() && self.reading == SpecialReading::Literal;
        if !constant && !literal && !(strictly_monotone(&self.r, increasing) && strictly_monotone(&self.rho, increasing)) {
            return Err(plan_err(format!(
                "tooth heights must be strictly {}",
                if increasing { "increasing" } else { "decreasing" }
            )));
        }
        if !self.u_prime.is_empty() {
            check_widths(&self.u_prime, self.block_count())?;
        }
        Ok(())
    }

    /// Validates a plan loaded from outside (e.g. a JSON file).
    pub fn validate(&self) -> Result<(), CombError> {
        self.check()?;
        let sums = prefix_sums(&self.u_prime);
        if sums.len() != self.u.len()
            || sums.iter().zip(&self.u).any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
        {
            return Err(plan_err("partial sums u do not match u_prime"));
        }
        Ok(())
    }

    /// Partial sum `u_n` with `u_0 = 0`.
    pub fn partial_sum(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.u[n - 1]
        }
    }

    fn sign(&self) -> f64 {
        match self.direction {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    /// Heights `(above, below)` of the two teeth that bound block `n` once all
    /// `2N` teeth are placed, whatever widths are assigned.
    pub fn block_proportions(&self, n: usize) -> Option<(f64, f64)> {
        if n == 0 || n > self.block_count() {
            return None;
        }
        if self.direction == Direction::Backward && self.lower_side == LowerToothSide::Verbatim {
            return None;
        }
        let pairs = self.pairs();
        let r = |k: usize| (k >= 1 && k <= pairs).then(|| self.r[k - 1]);
        let rho = |k: usize| (k >= 1 && k <= pairs).then(|| self.rho[k - 1]);
        match self.direction {
            Direction::Forward if n % 2 == 1 => {
                let k = n.div_ceil(2);
                Some((r(k)?, rho(k)?))
            }
            Direction::Forward => {
                let k = n / 2;
                Some((r(k + 1)?, rho(k)?))
            }
            Direction::Backward if n % 2 == 1 => {
                let k = (n - 1) / 2;
                Some((r(k)?, rho(k)?))
            }
            Direction::Backward => {
                let k = n / 2;
                Some((r(k)?, rho(k - 1)?))
            }
        }
    }

    /// Heights `(above, below)` of the teeth bounding block `n`, if both exist
    /// in the comb built from the assigned widths.
    pub fn block_heights(&self, n: usize) -> Option<(f64, f64)> {
        if n == 0 || n > self.u_prime.len() {
            return None;
        }
        let needed = match self.direction {
            Direction::Forward => n + 1,
            Direction::Backward => n - 1,
        };
        if needed > self.tooth_count() {
            return None;
        }
        self.block_proportions(n)
    }

    /// Strip value `below / (above + below)` of block `n`, the value the
    /// measure at its midpoint approaches as the block widens.
    pub fn block_target(&self, n: usize) -> Option<f64> {
        self.block_proportions(n).map(|(a, b)| b / (a + b))
    }

    /// Which limit block `n` approximates.
    pub fn anchor_role(&self, n: usize) -> AnchorRole {
        match (self.direction, n % 2) {
            (Direction::Forward, 1) | (Direction::Backward, 0) => AnchorRole::High,
            _ => AnchorRole::Low,
        }
    }

    /// Blocks with a witness rectangle.
    pub fn anchor_blocks(&self) -> Vec<usize> {
        (1..=self.u_prime.len())
            .filter(|&n| self.block_heights(n).is_some())
            .collect()
    }

    /// Teeth built from the assigned widths: one per width, capped at `2N`.
    pub fn tooth_count(&self) -> usize {
        self.u_prime.len().min(2 * self.pairs())
    }

    /// Block `n` as an open x-interval.
    pub fn block_span(&self, n: usize) -> (f64, f64) {
        let (a, b) = (self.partial_sum(n - 1), self.partial_sum(n));
        match self.direction {
            Direction::Forward => (a, b),
            Direction::Backward => (-b, -a),
        }
    }

    pub fn midpoint(&self, n: usize) -> f64 {
        self.sign() * (self.partial_sum(n) + self.partial_sum(n - 1)) / 2.0
    }

    /// Local length scale of block `n`: the smaller of its two tooth heights.
    pub fn block_scale(&self, n: usize) -> Option<f64> {
        self.block_heights(n).map(|(a, b)| a.min(b))
    }
}

fn prefix_sums(w: &[f64]) -> Vec<f64> {
    w.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn check_widths(widths: &[f64], max: usize) -> Result<(), CombError> {
    if widths.is_empty() {
        return Err(plan_err("width list is empty"));
    }
    if widths.len() > max {
        return Err(plan_err(format!(
            "{} widths given but the plan has only {max} blocks",
            widths.len()
        )));
    }
    if widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(plan_err("widths must be positive and finite"));
    }
    if !strictly_monotone(widths, true) {
        return Err(plan_err("widths must be strictly increasing"));
    }
    Ok(())
}

/// Sets `u'` to `widths` and `u` to their running sums.
pub fn assign_widths(plan: &SequencePlan, widths: &[f64]) -> Result<SequencePlan, CombError> {
    check_widths(widths, plan.block_count())?;
    let mut out = plan.clone();
    out.u_prime = widths.to_vec();
    out.u = prefix_sums(widths);
    Ok(out)
}

/// Midpoints `x_n` of every block with a width.
pub fn midpoints(plan: &SequencePlan) -> Vec<Point> {
    (1..=plan.u_prime.len())
        .map(|n| Point::new(plan.midpoint(n), 0.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tooth {
    pub line: HalfLine,
    pub label: Label,
    /// 1-based position `j` in the anchor sequence `u_j`.
    pub index: usize,
}

/// The plane minus a finite set of teeth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombDomain {
    pub teeth: Vec<Tooth>,
    pub direction: Direction,
    /// Tooth pairs retained (the last pair may be incomplete).
    pub truncation_count: usize,
}

fn label_for(p: Point) -> Label {
    if p.im > 0.0 {
        Label::Upper
    } else {
        Label::Lower
    }
}

/// Teeth at the anchors of `plan`.
pub fn build_comb(plan: &SequencePlan) -> Result<CombDomain, CombError> {
    if !plan.has_widths() {
        return Err(CombError::MissingWidths);
    }
    let count = plan.tooth_count();
    let mut teeth = Vec::with_capacity(count);
    for j in 1..=count {
        let k = j.div_ceil(2);
        let x = plan.sign() * plan.partial_sum(j);
        let y = if j % 2 == 1 {
            plan.r[k - 1]
        } else {
            match (plan.direction, plan.lower_side) {
                (Direction::Backward, LowerToothSide::Verbatim) => plan.rho[k - 1],
                _ => -plan.rho[k - 1],
            }
        };
        let anchor = Point::new(x, y);
        teeth.push(Tooth {
            line: HalfLine::new(anchor),
            label: label_for(anchor),
            index: j,
        });
    }
    Ok(CombDomain {
        teeth,
        direction: plan.direction,
        truncation_count: count.div_ceil(2),
    })
}

impl CombDomain {
    /// Two teeth `E[x_tip + i d1]` and `E[x_tip - i d2]`: a half-strip open to
    /// the right, approximating the strip as `x_tip` grows.
    pub fn pseudo_strip(d1: f64, d2: f64, x_tip: f64) -> Result<Self, CombError> {
        if !(d1 > 0.0 && d2 > 0.0) || !x_tip.is_finite() {
            return Err(plan_err("pseudo-strip needs positive heights and a finite tip"));
        }
        let upper = Point::new(x_tip, d1);
        let lower = Point::new(x_tip, -d2);
        Ok(Self {
            teeth: vec![
                Tooth {
                    line: HalfLine::new(upper),
                    label: Label::Upper,
                    index: 1,
                },
                Tooth {
                    line: HalfLine::new(lower),
                    label: Label::Lower,
                    index: 2,
                },
            ],
            direction: Direction::Forward,
            truncation_count: 1,
        })
    }

    /// Whether `p` lies in the open domain.
    pub fn contains(&self, p: Point) -> bool {
        finite(p) && !self.teeth.iter().any(|t| t.line.contains(p))
    }

    pub fn tooth(&self, index: usize) -> Option<&Tooth> {
        self.teeth.iter().find(|t| t.index == index)
    }

    /// Anchor abscissa of the `j`-th tooth, with `j = 0` meaning the origin.
    fn anchor_x(&self, j: usize) -> Option<f64> {
        if j == 0 {
            Some(0.0)
        } else {
            self.tooth(j).map(|t| t.line.anchor.re)
        }
    }
}

/// Checks `rect ⊂ domain` and that both horizontal sides lie on teeth, up to a
/// relative tolerance of `1e-12`.
pub fn witness_holds(domain: &CombDomain, rect: &RectWitness) -> bool {
    let scale = rect.center.re.abs().max(rect.u).max(rect.d1 + rect.d2);
    let tol = 1e-12 * scale;
    let [top, bottom] = rect.horizontal_border();
    let blocks_interior = domain.teeth.iter().any(|t| {
        let a = t.line.anchor;
        a.im > bottom.y + tol && a.im < top.y - tol && a.re > top.x_min + tol
    });
    let covered = |y: f64| {
        domain
            .teeth
            .iter()
            .any(|t| (t.line.anchor.im - y).abs() <= tol && t.line.anchor.re >= top.x_max - tol)
    };
    !blocks_interior && covered(top.y) && covered(bottom.y)
}

/// The rectangle `A(x_n, above, below, u'_n)` of block `n`, verified against
/// the built comb.
pub fn witness_rect(plan: &SequencePlan, n: usize) -> Result<RectWitness, CombError> {
    if !plan.has_widths() {
        return Err(CombError::MissingWidths);
    }
    if n == 0 || n > plan.u_prime.len() {
        return Err(CombError::OutOfRange {
            what: "block",
            index: n,
            len: plan.u_prime.len(),
        });
    }
    let (above, below) = plan.block_heights(n).ok_or(CombError::NoWitness(n))?;
    let rect = RectWitness::new(Point::new(plan.midpoint(n), 0.0), above, below, plan.u_prime[n - 1])?;
    let domain = build_comb(plan)?;
    if !witness_holds(&domain, &rect) {
        return Err(CombError::WitnessFailed(n));
    }
    Ok(rect)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum SurgeryKind {
    /// Extend the `k`-th upper tooth over the neighbouring block to its right.
    Omega1(usize),
    /// Delete the `k`-th upper tooth.
    Omega2(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeryVariant {
    pub base: CombDomain,
    pub kind: SurgeryKind,
    /// Added boundary segment (Omega1).
    pub segment: Option<HSegment>,
}

/// `Omega1 = Omega \ E` with `E` the segment at height `r_k` from the `k`-th
/// upper anchor to the next anchor on its right; `Omega2 = Omega ∪ E[upper_k]`.
pub fn surgery(domain: &CombDomain, kind: SurgeryKind) -> Result<SurgeryVariant, CombError> {
    let k = match kind {
        SurgeryKind::Omega1(k) | SurgeryKind::Omega2(k) => k,
    };
    let upper_count = domain.teeth.iter().filter(|t| t.index % 2 == 1).count();
    if k == 0 || k > upper_count {
        return Err(CombError::OutOfRange {
            what: "surgery tooth",
            index: k,
            len: upper_count,
        });
    }
    let j = 2 * k - 1;
    let tooth = *domain.tooth(j).ok_or(CombError::OutOfRange {
        what: "surgery tooth",
        index: k,
        len: upper_count,
    })?;
    let segment = match kind {
        SurgeryKind::Omega2(_) => None,
        SurgeryKind::Omega1(_) => {
            let right_neighbour = match domain.direction {
                Direction::Forward => j + 1,
                Direction::Backward => j - 1,
            };
            let right = domain.anchor_x(right_neighbour).ok_or(CombError::OutOfRange {
                what: "surgery tooth (no right neighbour)",
                index: k,
                len: upper_count,
            })?;
            Some(HSegment {
                y: tooth.line.anchor.im,
                left: tooth.line.anchor.re,
                right,
            })
        }
    };
    Ok(SurgeryVariant {
        base: domain.clone(),
        kind,
        segment,
    })
}

impl SurgeryVariant {
    fn removed_index(&self) -> Option<usize> {
        match self.kind {
            SurgeryKind::Omega2(k) => Some(2 * k - 1),
            SurgeryKind::Omega1(_) => None,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        if !finite(p) {
            return false;
        }
        let removed = self.removed_index();
        let on_tooth = self
            .base
            .teeth
            .iter()
            .filter(|t| Some(t.index) != removed)
            .any(|t| t.line.contains(p));
        let on_segment = self.segment.is_some_and(|s| s.contains(p));
        !on_tooth && !on_segment
    }
}

/// Identifies the boundary piece nearest to a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "index")]
pub enum FeatureId {
    Tooth(usize),
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Ray(HalfLine),
    Segment(HSegment),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    shape: Shape,
    pub label: Label,
    pub id: FeatureId,
}

/// Flat boundary description consumed by the walk-on-spheres kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    features: Vec<Feature>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub distance: f64,
    pub point: Point,
    pub id: FeatureId,
}

impl Boundary {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Nearest boundary point; `None` for an empty boundary.
    pub fn nearest(&self, p: Point) -> Option<Nearest> {
        let mut best: Option<Nearest> = None;
        for f in &self.features {
            let q = match f.shape {
                Shape::Ray(h) => h.nearest_point(p),
                Shape::Segment(s) => s.nearest_point(p),
            };
            let d = (p - q).norm();
            if best.is_none_or(|b| d < b.distance) {
                best = Some(Nearest {
                    distance: d,
                    point: q,
                    id: f.id,
                });
            }
        }
        best
    }

    /// Image under `p -> (p - center) / scale`.
    pub fn transformed(&self, center: Point, scale: f64) -> Self {
        let map = |p: Point| (p - center) / scale;
        let features = self
            .features
            .iter()
            .map(|f| Feature {
                shape: match f.shape {
                    Shape::Ray(h) => Shape::Ray(HalfLine::new(map(h.anchor))),
                    Shape::Segment(s) => Shape::Segment(HSegment {
                        y: (s.y - center.im) / scale,
                        left: (s.left - center.re) / scale,
                        right: (s.right - center.re) / scale,
                    }),
                },
                ..*f
            })
            .collect();
        Self { features }
    }
}

/// Anything the walk-on-spheres kernel can run in.
pub trait Domain: Sync {
    fn boundary(&self) -> Boundary;
    fn contains(&self, p: Point) -> bool;
}

fn tooth_features<'a>(teeth: impl Iterator<Item = &'a Tooth>) -> Vec<Feature> {
    teeth
        .map(|t| Feature {
            shape: Shape::Ray(t.line),
            label: t.label,
            id: FeatureId::Tooth(t.index),
        })
        .collect()
}

impl Domain for CombDomain {
    fn boundary(&self) -> Boundary {
        Boundary {
            features: tooth_features(self.teeth.iter()),
        }
    }

    fn contains(&self, p: Point) -> bool {
        CombDomain::contains(self, p)
    }
}

impl Domain for SurgeryVariant {
    fn boundary(&self) -> Boundary {
        let removed = self.removed_index();
        let mut features =
            tooth_features(self.base.teeth.iter().filter(|t| Some(t.index) != removed));
        if let Some(s) = self.segment {
            features.push(Feature {
                shape: Shape::Segment(s),
                label: label_for(Point::new(0.0, s.y)),
                id: FeatureId::Segment,
            });
        }
        Boundary { features }
    }

    fn contains(&self, p: Point) -> bool {
        SurgeryVariant::contains(self, p)
    }
}

/// Distance from `p` to the boundary and the nearest feature. An empty
/// boundary yields `(inf, Segment)`.
pub fn boundary_distance<D: Domain + ?Sized>(domain: &D, p: Point) -> (f64, FeatureId) {
    domain
        .boundary()
        .nearest(p)
        .map_or((f64::INFINITY, FeatureId::Segment), |n| (n.distance, n.id))
}

/// `Upper` iff the hit lies strictly above `ref_im`.
pub fn classify_hit(hit: Point, ref_im: f64) -> Result<Label, CombError> {
    if hit.im > ref_im {
        Ok(Label::Upper)
    } else if hit.im < ref_im {
        Ok(Label::Lower)
    } else {
        Err(CombError::AmbiguousHit { hit, ref_im })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six_plan() -> SequencePlan {
        plan_forward_limits(0.75, 1.0 / 3.0, 6.0, 4).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1.0)
    }

    #[test]
    fn forward_six_power_plan() {
        let plan = plan_forward(-PI / 4.0, PI / 6.0, 6.0, 4).unwrap();
        assert!(close(plan.targets.high, 0.75, 1e-15));
        assert!(close(plan.targets.low, 1.0 / 3.0, 1e-15));
        for n in 1..=4 {
            let six = 6f64.powi(n as i32);
            assert!(close(plan.r[n - 1], six, 1e-13), "r_{n}");
            assert!(close(plan.rho[n - 1], 3.0 * six, 1e-13), "rho_{n}");
        }
        for n in 2..=4 {
            let (r, rho, prev) = (plan.r[n - 1], plan.rho[n - 1], plan.rho[n - 2]);
            assert!(close(rho / (rho + r), 0.75, 1e-13));
            assert!(close(prev / (prev + r), 1.0 / 3.0, 1e-13));
        }
    }

    #[test]
    fn forward_plan_errors() {
        assert!(plan_forward(0.1, 0.1, 6.0, 4).is_err());
        assert!(plan_forward(0.3, 0.1, 6.0, 4).is_err());
        assert!(plan_forward(-PI / 2.0, 0.1, 6.0, 4).is_err());
        assert!(plan_forward(-0.1, 0.1, 0.0, 4).is_err());
        assert!(plan_forward(-0.1, 0.1, 1.0, 0).is_err());
    }

    #[test]
    fn backward_six_power_plan() {
        let plan = plan_backward_limits(0.75, 1.0 / 3.0, 1.0 / 3.0, 5).unwrap();
        for n in 1..=5 {
            let r = (1.0 / 3.0) * 6f64.powi(-(n as i32 - 1));
            let rho = 6f64.powi(-(n as i32));
            assert!(close(plan.r[n - 1], r, 1e-13));
            assert!(close(plan.rho[n - 1], rho, 1e-13));
            let ratio = plan.rho[n - 1] / (plan.rho[n - 1] + plan.r[n - 1]);
            assert!((ratio - 1.0 / 3.0).abs() < 1e-13);
        }
        assert!(plan_backward(-PI / 4.0, PI / 6.0, 0.0, 3).is_err());
        assert!(plan_backward(PI / 6.0, -PI / 4.0, 1.0, 3).is_err());
    }

    #[test]
    fn full_interval_by_hand() {
        let plan = plan_backward_special(SpecialMode::FullInterval, 1.0, 3, SpecialReading::Corrected)
            .unwrap();
        // r1 = 1; rho1 = r1/1; r2 = rho1/2; rho2 = r2/2; r3 = rho2/3; rho3 = r3/3
        let want_r = [1.0, 0.5, 1.0 / 12.0];
        let want_rho = [1.0, 0.25, 1.0 / 36.0];
        for n in 0..3 {
            assert!(close(plan.r[n], want_r[n], 1e-15));
            assert!(close(plan.rho[n], want_rho[n], 1e-15));
        }
    }

    #[test]
    fn b2_zero_ratios() {
        let m = 3;
        let plan = plan_backward_special(
            SpecialMode::B2Zero { b1: 0.75, m },
            1.0,
            8,
            SpecialReading::Corrected,
        )
        .unwrap();
        for n in 1..=8 {
            let (r, rho) = (plan.r[n - 1], plan.rho[n - 1]);
            let want = 1.0 / (n as f64 + m as f64 + 1.0);
            assert!((rho / (rho + r) - want).abs() < 1e-14);
        }
        for n in 2..=8 {
            let ratio = plan.rho[n - 2] / (plan.rho[n - 2] + plan.r[n - 1]);
            assert!((ratio - 0.75).abs() < 1e-13);
        }
        let literal = plan_backward_special(
            SpecialMode::B2Zero { b1: 0.75, m },
            1.0,
            8,
            SpecialReading::Literal,
        )
        .unwrap();
        let ratio = literal.rho[6] / (literal.rho[6] + literal.r[7]);
        assert!((ratio - 0.75).abs() > 0.5, "literal reading does not reach b1");
        let err = plan_backward_special(SpecialMode::B2Zero { b1: 0.1, m: 3 }, 1.0, 4, SpecialReading::Corrected);
        assert!(matches!(err, Err(CombError::Plan(msg)) if msg.contains("m = 3")));
    }

    #[test]
    fn b1_one_ratios() {
        let m = 5;
        let plan = plan_backward_special(
            SpecialMode::B1One { b2: 1.0 / 3.0, m },
            1.0,
            8,
            SpecialReading::Corrected,
        )
        .unwrap();
        for n in 2..=8 {
            let ratio = plan.rho[n - 2] / (plan.rho[n - 2] + plan.r[n - 1]);
            let want = (n as f64 + m as f64) / (n as f64 + m as f64 + 1.0);
            assert!((ratio - want).abs() < 1e-14);
        }
        let err = plan_backward_special(SpecialMode::B1One { b2: 0.9, m: 0 }, 1.0, 4, SpecialReading::Corrected);
        assert!(err.is_err());
    }

    #[test]
    fn widths_and_midpoints() {
        let plan = assign_widths(&six_plan(), &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(plan.u, vec![10.0, 30.0, 60.0]);
        let xs: Vec<f64> = midpoints(&plan).iter().map(|p| p.re).collect();
        assert_eq!(xs, vec![5.0, 20.0, 45.0]);
        assert!(assign_widths(&six_plan(), &[10.0, 10.0, 30.0]).is_err());
        let back = plan_backward_limits(0.75, 1.0 / 3.0, 1.0 / 3.0, 2).unwrap();
        let back = assign_widths(&back, &[10.0, 20.0, 30.0]).unwrap();
        let xs: Vec<f64> = midpoints(&back).iter().map(|p| p.re).collect();
        assert_eq!(xs, vec![-5.0, -20.0, -45.0]);
        assert!(midpoints(&six_plan()).is_empty());
    }

    #[test]
    fn six_power_anchors() {
        let plan = assign_widths(&six_plan(), &[10.0, 20.0, 30.0, 40.0]).unwrap();
        let comb = build_comb(&plan).unwrap();
        let anchors: Vec<Point> = comb.teeth.iter().map(|t| t.line.anchor).collect();
        // u = 10, 30, 60, 100; r = 6, 36; rho = 18, 108
        let want = [
            Point::new(10.0, 6.0),
            Point::new(30.0, -18.0),
            Point::new(60.0, 36.0),
            Point::new(100.0, -108.0),
        ];
        for (a, w) in anchors.iter().zip(want) {
            assert!((a - w).norm() < 1e-12, "{a} vs {w}");
        }
        assert!(comb.contains(Point::new(0.0, 0.0)));
        assert!(!comb.contains(Point::new(10.0, 6.0)));
        assert!(build_comb(&six_plan()).is_err());
    }

    #[test]
    fn witness_rectangles() {
        let widths: Vec<f64> = (1..=8).map(|n| 100.0 * 3f64.powi(n)).collect();
        let plan = assign_widths(&six_plan(), &widths).unwrap();
        let a1 = witness_rect(&plan, 1).unwrap();
        assert_eq!((a1.d1, a1.d2, a1.u), (6.0, 18.0, widths[0]));
        let a2 = witness_rect(&plan, 2).unwrap();
        assert!(close(a2.d1, 36.0, 1e-13) && close(a2.d2, 18.0, 1e-13));
        assert_eq!(a2.u, widths[1]);
        for n in 1..=7 {
            assert!(witness_rect(&plan, n).is_ok(), "block {n}");
        }
        assert_eq!(witness_rect(&plan, 8), Err(CombError::NoWitness(8)));
        assert!(matches!(witness_rect(&plan, 9), Err(CombError::OutOfRange { .. })));
    }

    #[test]
    fn backward_witnesses_follow_geometry() {
        let plan = plan_backward_limits(0.75, 1.0 / 3.0, 1.0 / 3.0, 3).unwrap();
        let widths: Vec<f64> = (1..=7).map(|n| 2.0 + n as f64).collect();
        let plan = assign_widths(&plan, &widths).unwrap();
        assert_eq!(plan.anchor_blocks(), vec![3, 4, 5, 6, 7]);
        for n in plan.anchor_blocks() {
            let rect = witness_rect(&plan, n).unwrap();
            let want = if n % 2 == 0 { 0.75 } else { 1.0 / 3.0 };
            assert!((rect.strip_value() - want).abs() < 1e-13, "block {n}");
            assert_eq!(
                plan.anchor_role(n),
                if n % 2 == 0 { AnchorRole::High } else { AnchorRole::Low }
            );
        }
    }

    #[test]
    fn surgery_membership() {
        let plan = assign_widths(&six_plan(), &[10.0, 20.0, 30.0, 40.0]).unwrap();
        let comb = build_comb(&plan).unwrap();
        let o1 = surgery(&comb, SurgeryKind::Omega1(1)).unwrap();
        let probe = Point::new(15.0, 6.0);
        assert!(comb.contains(probe));
        assert!(!o1.contains(probe));
        let o2 = surgery(&comb, SurgeryKind::Omega2(1)).unwrap();
        assert!(!comb.contains(Point::new(10.0, 6.0)));
        assert!(o2.contains(Point::new(10.0, 6.0)));
        assert!(surgery(&comb, SurgeryKind::Omega1(3)).is_err());
        assert!(surgery(&comb, SurgeryKind::Omega2(0)).is_err());
    }

    #[test]
    fn distances_and_classification() {
        let plan = assign_widths(&six_plan(), &[10.0, 20.0, 30.0, 40.0]).unwrap();
        let comb = build_comb(&plan).unwrap();
        let (d, id) = boundary_distance(&comb, Point::new(0.0, 0.0));
        assert_eq!((d, id), (6.0, FeatureId::Tooth(1)));
        let (d, _) = boundary_distance(&comb, Point::new(5.0, 6.0));
        assert_eq!(d, 0.0);
        let (d, id) = boundary_distance(&comb, Point::new(200.0, 0.0));
        assert_eq!(id, FeatureId::Tooth(3));
        assert!((d - Point::new(140.0, -36.0).norm()).abs() < 1e-12);
        assert_eq!(classify_hit(Point::new(10.0, 6.0), 0.0), Ok(Label::Upper));
        assert_eq!(classify_hit(Point::new(30.0, -18.0), 0.0), Ok(Label::Lower));
        assert!(classify_hit(Point::new(3.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn verbatim_backward_teeth_all_above() {
        let mut plan = plan_backward_limits(0.75, 1.0 / 3.0, 1.0 / 3.0, 2).unwrap();
        plan.lower_side = LowerToothSide::Verbatim;
        let plan = assign_widths(&plan, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let comb = build_comb(&plan).unwrap();
        assert!(comb.teeth.iter().all(|t| t.label == Label::Upper));
        assert!(plan.anchor_blocks().is_empty());
    }

    #[test]
    fn plan_json_round_trip() {
        let plan = assign_widths(&six_plan(), &[10.0, 20.0]).unwrap();
        let text = serde_json::to_string(&plan).unwrap();
        let back: SequencePlan = serde_json::from_str(&text).unwrap();
        assert_eq!(back, plan);
        back.validate().unwrap();
    }
}

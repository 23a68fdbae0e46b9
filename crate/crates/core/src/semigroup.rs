//! Closed-form Koenigs models and their trajectories.
//!
//! A non-elliptic semigroup `(phi_t)` of the disk is conjugate to translation:
//! `h(phi_t(z)) = h(z) + t`. Two models have explicit `h`:
//!
//! * `Strip(d)`: `h(z) = (2d/pi) log((1+z)/(1-z))` onto `|Im w| < d`, with
//!   Denjoy–Wolff point `1` and backward limit `-1`;
//! * `UpperHalfPlane`: `h(z) = i(1-z)/(1+z)` onto `Im w > 0`, with both limits
//!   at `-1`.
//!
//! Comb domains have no closed-form `h`; their slopes are obtained from
//! harmonic-measure limits in [`crate::analyzer`].

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comb::{CombError, SequencePlan};
use crate::geometry::{finite, slope_of, GeometryError, Point, SlopeInterval};

/// Share of samples, at the relevant end, used to read off a limit set.
pub const TAIL_FRACTION: f64 = 0.2;
/// Fewest samples accepted in a tail window.
pub const MIN_TAIL_SAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemigroupError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("point {0} is not in the open unit disk")]
    OutsideDisk(Point),
    #[error("point {0} is not in the model domain")]
    OutsideModelDomain(Point),
    #[error("time {t} is not after the start time {t_inf}")]
    BeforeStart { t: f64, t_inf: f64 },
    #[error("sample times must be finite and strictly increasing")]
    NotIncreasing,
    #[error("tail window has {have} samples, need at least {need}")]
    InsufficientTail { have: usize, need: usize },
    #[error("trajectory reaches |t| = {reached}, need at least {need}")]
    ShortHorizon { reached: f64, need: f64 },
    #[error("unrecognized domain description '{0}'")]
    UnknownDomain(String),
    #[error(transparent)]
    Plan(#[from] CombError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum KoenigsModel {
    Strip { d: f64 },
    UpperHalfPlane,
}

fn one() -> Point {
    Point::new(1.0, 0.0)
}

impl KoenigsModel {
    pub fn strip(d: f64) -> Result<Self, SemigroupError> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(SemigroupError::InvalidModel(format!(
                "strip half-width must be positive, got {d}"
            )));
        }
        Ok(Self::Strip { d })
    }

    /// Whether `w` lies in `h(D)`.
    pub fn contains_image(&self, w: Point) -> bool {
        finite(w)
            && match *self {
                Self::Strip { d } => w.im.abs() < d,
                Self::UpperHalfPlane => w.im > 0.0,
            }
    }

    pub fn forward(&self, z: Point) -> Result<Point, SemigroupError> {
        if !finite(z) || z.norm() >= 1.0 {
            return Err(SemigroupError::OutsideDisk(z));
        }
        Ok(match *self {
            Self::Strip { d } => (2.0 * d / PI) * ((one() + z) / (one() - z)).ln(),
            Self::UpperHalfPlane => Point::i() * (one() - z) / (one() + z),
        })
    }

    pub fn inverse(&self, w: Point) -> Result<Point, SemigroupError> {
        if !self.contains_image(w) {
            return Err(SemigroupError::OutsideModelDomain(w));
        }
        Ok(match *self {
            Self::Strip { d } => tanh(PI * w / (4.0 * d)),
            Self::UpperHalfPlane => (Point::i() - w) / (Point::i() + w),
        })
    }

    /// `phi_t(z) = h^{-1}(h(z) + t)`.
    pub fn flow(&self, z: Point, t: f64) -> Result<Point, SemigroupError> {
        let w = self.forward(z)?;
        self.inverse(w + t)
    }

    /// Infimum of `{t : h(z) + t in h(D)}`. Both image domains are invariant
    /// under every real translation, so this is `-inf` for any `z`.
    pub fn t_inf(&self, z: Point) -> Result<f64, SemigroupError> {
        self.forward(z)?;
        Ok(f64::NEG_INFINITY)
    }

    /// Forward limit `xi` of every trajectory.
    pub fn denjoy_wolff(&self) -> Point {
        match self {
            Self::Strip { .. } => one(),
            Self::UpperHalfPlane => -one(),
        }
    }

    /// Backward limit `chi` of every trajectory.
    pub fn alpha_limit(&self) -> Point {
        -one()
    }

    /// Smallest `|t|` a trajectory must reach before its tail is read.
    pub fn horizon(&self) -> f64 {
        match *self {
            Self::Strip { d } => 50.0 * d,
            Self::UpperHalfPlane => 50.0,
        }
    }

    /// `1 - conj(xi) h^{-1}(w)` and `1 - conj(chi) h^{-1}(w)`, evaluated without
    /// forming `h^{-1}(w)` so that the tiny differences near the limits survive.
    fn defects(&self, w: Point) -> (Point, Point) {
        match *self {
            Self::Strip { d } => {
                let s = PI * w / (4.0 * d);
                // 1 - tanh s and 1 + tanh s
                if s.re >= 0.0 {
                    let q = (-2.0 * s).exp();
                    (2.0 * q / (one() + q), 2.0 / (one() + q))
                } else {
                    let p = (2.0 * s).exp();
                    (2.0 / (one() + p), 2.0 * p / (one() + p))
                }
            }
            Self::UpperHalfPlane => {
                let plus = 2.0 * Point::i() / (Point::i() + w);
                (plus, plus)
            }
        }
    }
}

pub fn koenigs_forward(model: &KoenigsModel, z: Point) -> Result<Point, SemigroupError> {
    model.forward(z)
}

pub fn koenigs_inverse(model: &KoenigsModel, w: Point) -> Result<Point, SemigroupError> {
    model.inverse(w)
}

fn tanh(s: Point) -> Point {
    if s.re >= 0.0 {
        let q = (-2.0 * s).exp();
        (one() - q) / (one() + q)
    } else {
        -tanh(-s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub point: Point,
    /// `1 - conj(xi) gamma(t)` for the Denjoy–Wolff point `xi`.
    pub plus_defect: Point,
    /// `1 - conj(chi) gamma(t)` for the backward limit `chi`.
    pub minus_defect: Point,
}

impl TrajectorySample {
    pub fn slope(&self) -> f64 {
        self.plus_defect.arg()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: KoenigsModel,
    pub z: Point,
    pub t_inf: f64,
    pub samples: Vec<TrajectorySample>,
}

/// `gamma_z(t) = h^{-1}(h(z) + t)` at the given increasing times.
pub fn trajectory(model: &KoenigsModel, z: Point, t_values: &[f64]) -> Result<Trajectory, SemigroupError> {
    let t_inf = model.t_inf(z)?;
    if t_values.iter().any(|t| !t.is_finite()) || t_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SemigroupError::NotIncreasing);
    }
    let hz = model.forward(z)?;
    let mut samples = Vec::with_capacity(t_values.len());
    for &t in t_values {
        if t <= t_inf {
            return Err(SemigroupError::BeforeStart { t, t_inf });
        }
        let w = hz + t;
        // phi_0 is the identity; skip the round trip through h
        let point = if t == 0.0 { z } else { model.inverse(w)? };
        let (plus_defect, minus_defect) = model.defects(w);
        samples.push(TrajectorySample {
            t,
            point,
            plus_defect,
            minus_defect,
        });
    }
    Ok(Trajectory {
        model: *model,
        z,
        t_inf,
        samples,
    })
}

/// `count` evenly spaced times from `t_min` to `t_max`.
pub fn sample_times(t_min: f64, t_max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![t_min],
        _ => (0..count)
            .map(|i| t_min + (t_max - t_min) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

fn tail_len(total: usize) -> usize {
    ((total as f64) * TAIL_FRACTION).ceil() as usize
}

impl Trajectory {
    fn slope_at(&self, s: &TrajectorySample, reference: Point, forward: bool) -> Result<f64, SemigroupError> {
        let (own, defect) = if forward {
            (self.model.denjoy_wolff(), s.plus_defect)
        } else {
            (self.model.alpha_limit(), s.minus_defect)
        };
        if reference == own {
            Ok(defect.arg())
        } else {
            Ok(slope_of(reference, s.point)?)
        }
    }

    fn window(&self, forward: bool) -> Result<&[TrajectorySample], SemigroupError> {
        let n = tail_len(self.samples.len());
        if n < MIN_TAIL_SAMPLES {
            return Err(SemigroupError::InsufficientTail {
                have: n,
                need: MIN_TAIL_SAMPLES,
            });
        }
        let need = self.model.horizon();
        let (window, reached) = if forward {
            let w = &self.samples[self.samples.len() - n..];
            (w, w[n - 1].t)
        } else {
            let w = &self.samples[..n];
            (w, -w[0].t)
        };
        if reached < need {
            return Err(SemigroupError::ShortHorizon { reached, need });
        }
        Ok(window)
    }

    fn extrema(&self, reference: Point, forward: bool) -> Result<SlopeInterval, SemigroupError> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in self.window(forward)? {
            let v = self.slope_at(s, reference, forward)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok(SlopeInterval::new(lo, hi)?)
    }

    /// CSV with columns `t,re,im,slope`, the slope taken at the Denjoy–Wolff point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,re,im,slope\n");
        for s in &self.samples {
            let row = [s.t, s.point.re, s.point.im, s.slope()].map(crate::format_number);
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Range of `arg(1 - conj(xi) gamma(t))` over the last 20% of samples.
pub fn slope_plus(traj: &Trajectory, xi: Point) -> Result<SlopeInterval, SemigroupError> {
    traj.extrema(xi, true)
}

/// Range of `arg(1 - conj(chi) gamma(t))` over the first 20% of samples.
pub fn slope_minus(traj: &Trajectory, chi: Point) -> Result<SlopeInterval, SemigroupError> {
    traj.extrema(chi, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemigroupClass {
    Hyperbolic,
    ParabolicPositiveStep,
    ParabolicZeroStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointClass {
    Attractive,
    Repulsive,
    SuperRepulsive,
}

impl FixedPointClass {
    /// Class of a boundary fixed point with angular derivative `value`
    /// (`f64::INFINITY` for an infinite one).
    pub fn from_angular_derivative(value: f64) -> Option<Self> {
        if value == f64::INFINITY {
            Some(Self::SuperRepulsive)
        } else if value > 1.0 && value.is_finite() {
            Some(Self::Repulsive)
        } else if value > 0.0 && value <= 1.0 {
            Some(Self::Attractive)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainDescription {
    Strip { d: f64 },
    HalfPlane,
    Comb(Box<SequencePlan>),
}

/// Parses `strip:<d>` or `halfplane`.
impl FromStr for DomainDescription {
    type Err = SemigroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "halfplane" {
            return Ok(Self::HalfPlane);
        }
        if let Some(d) = s.strip_prefix("strip:") {
            let d: f64 = d
                .parse()
                .map_err(|_| SemigroupError::UnknownDomain(s.to_string()))?;
            KoenigsModel::strip(d)?;
            return Ok(Self::Strip { d });
        }
        Err(SemigroupError::UnknownDomain(s.to_string()))
    }
}

/// A strip gives a hyperbolic semigroup and a half-plane a parabolic one of
/// positive step. A comb minus finitely or infinitely many leftward teeth is
/// contained in no horizontal half-plane, hence zero step.
pub fn classify_domain(desc: &DomainDescription) -> Result<SemigroupClass, SemigroupError> {
    match desc {
        DomainDescription::Strip { d } => {
            KoenigsModel::strip(*d)?;
            Ok(SemigroupClass::Hyperbolic)
        }
        DomainDescription::HalfPlane => Ok(SemigroupClass::ParabolicPositiveStep),
        DomainDescription::Comb(plan) => {
            plan.validate()?;
            Ok(SemigroupClass::ParabolicZeroStep)
        }
    }
}

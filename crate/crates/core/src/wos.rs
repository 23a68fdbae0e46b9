//! Walk-on-spheres estimator for the harmonic measure of the part of the
//! boundary lying above a reference height.
//!
//! Each walker jumps to a uniform point on the largest boundary-free circle
//! around its position until it comes within `epsilon_shell` of the boundary,
//! and is then tallied by the height of the nearest boundary point. Walker `i`
//! draws from its own ChaCha8 stream (`seed`, stream `i`), so results do not
//! depend on how walkers are scheduled across threads.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comb::{classify_hit, Boundary, Domain, Label};
use crate::geometry::{finite, Point};

/// Name of the per-walker random stream, written into every output header.
pub const RNG_ALGORITHM: &str = "chacha8-stream-per-walker/v1";

const BATCH: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WosError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("start point {point} is not in the domain")]
    NotInDomain { point: Point },
    #[error("start point {point} is within {distance:e} of the boundary (shell {epsilon:e})")]
    TooCloseToBoundary {
        point: Point,
        distance: f64,
        epsilon: f64,
    },
    #[error("domain has no boundary")]
    EmptyBoundary,
    #[error("all {walkers} walkers exceeded {max_steps} steps")]
    AllLost { walkers: u64, max_steps: u64 },
    #[error("{count} walkers absorbed exactly at the reference height")]
    AmbiguousHits { count: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WosParams {
    /// Absorption distance (in local-scale units when `rescale` is on).
    pub epsilon_shell: f64,
    pub max_steps: u64,
    pub walkers: u64,
    pub seed: u64,
    /// Largest jump radius (local-scale units when `rescale` is on); `None` is unbounded.
    pub radius_cap: Option<f64>,
    /// Measure in coordinates centred at the start point and scaled by its
    /// distance to the boundary.
    pub rescale: bool,
    /// Estimates with a larger lost fraction are marked invalid.
    pub max_lost_fraction: f64,
}

impl Default for WosParams {
    fn default() -> Self {
        Self {
            epsilon_shell: 1e-6,
            max_steps: 100_000,
            walkers: 100_000,
            seed: 0,
            radius_cap: Some(1e3),
            rescale: true,
            max_lost_fraction: 1e-3,
        }
    }
}

impl WosParams {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_walkers(self, walkers: u64) -> Self {
        Self { walkers, ..self }
    }

    fn check(&self) -> Result<(), WosError> {
        if !(self.epsilon_shell > 0.0 && self.epsilon_shell.is_finite()) {
            return Err(WosError::InvalidParams("epsilon_shell must be positive".into()));
        }
        if self.walkers == 0 {
            return Err(WosError::InvalidParams("walkers must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(WosError::InvalidParams("max_steps must be at least 1".into()));
        }
        if let Some(cap) = self.radius_cap {
            if !(cap > 0.0) {
                return Err(WosError::InvalidParams("radius_cap must be positive".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.max_lost_fraction) {
            return Err(WosError::InvalidParams("max_lost_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub mean: f64,
    /// Bernoulli standard error `sqrt(mean (1 - mean) / walkers_used)`.
    pub stderr: f64,
    pub walkers: u64,
    pub walkers_used: u64,
    pub upper_hits: u64,
    /// Walks that ran out of steps; excluded from the mean.
    pub lost: u64,
    pub valid: bool,
    pub seed: u64,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Wall-clock time is not part of the result.
impl PartialEq for MeasureEstimate {
    fn eq(&self, other: &Self) -> bool {
        self.mean.to_bits() == other.mean.to_bits()
            && self.stderr.to_bits() == other.stderr.to_bits()
            && self.walkers == other.walkers
            && self.walkers_used == other.walkers_used
            && self.upper_hits == other.upper_hits
            && self.lost == other.lost
            && self.valid == other.valid
            && self.seed == other.seed
    }
}

impl MeasureEstimate {
    pub fn lost_fraction(&self) -> f64 {
        self.lost as f64 / self.walkers as f64
    }

    /// `k` standard errors.
    pub fn band(&self, k: f64) -> f64 {
        k * self.stderr
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    upper: u64,
    lower: u64,
    lost: u64,
    ambiguous: u64,
}

impl Tally {
    fn merge(self, o: Self) -> Self {
        Self {
            upper: self.upper + o.upper,
            lower: self.lower + o.lower,
            lost: self.lost + o.lost,
            ambiguous: self.ambiguous + o.ambiguous,
        }
    }
}

struct Walk<'a> {
    boundary: &'a Boundary,
    start: Point,
    ref_im: f64,
    epsilon: f64,
    cap: f64,
    max_steps: u64,
}

impl Walk<'_> {
    fn run(&self, rng: &mut ChaCha8Rng) -> Tally {
        let mut x = self.start;
        for _ in 0..self.max_steps {
            // the boundary is non-empty, checked by the caller
            let near = self.boundary.nearest(x).unwrap();
            if near.distance <= self.epsilon {
                return match classify_hit(near.point, self.ref_im) {
                    Ok(Label::Upper) => Tally { upper: 1, ..Tally::default() },
                    Ok(Label::Lower) => Tally { lower: 1, ..Tally::default() },
                    Err(_) => Tally { ambiguous: 1, ..Tally::default() },
                };
            }
            let radius = near.distance.min(self.cap);
            let theta = rng.gen::<f64>() * TAU;
            x += Point::from_polar(radius, theta);
        }
        Tally { lost: 1, ..Tally::default() }
    }
}

/// Estimates `omega(point, {Im > ref_im} part of the boundary, domain)`.
pub fn estimate_upper_measure<D: Domain + ?Sized>(
    domain: &D,
    point: Point,
    ref_im: f64,
    params: &WosParams,
) -> Result<MeasureEstimate, WosError> {
    params.check()?;
    let started = Instant::now();
    if !finite(point) || !domain.contains(point) {
        return Err(WosError::NotInDomain { point });
    }
    let boundary = domain.boundary();
    let near = boundary.nearest(point).ok_or(WosError::EmptyBoundary)?;
    let (boundary, start, ref_im, epsilon, cap) = if params.rescale {
        let scale = near.distance;
        if !(scale > 0.0) {
            return Err(WosError::TooCloseToBoundary {
                point,
                distance: near.distance,
                epsilon: params.epsilon_shell,
            });
        }
        (
            boundary.transformed(point, scale),
            Point::new(0.0, 0.0),
            (ref_im - point.im) / scale,
            params.epsilon_shell,
            params.radius_cap.unwrap_or(f64::INFINITY),
        )
    } else {
        (
            boundary,
            point,
            ref_im,
            params.epsilon_shell,
            params.radius_cap.unwrap_or(f64::INFINITY),
        )
    };
    let start_distance = if params.rescale { 1.0 } else { near.distance };
    if start_distance <= epsilon {
        return Err(WosError::TooCloseToBoundary {
            point,
            distance: near.distance,
            epsilon,
        });
    }

    let walk = Walk {
        boundary: &boundary,
        start,
        ref_im,
        epsilon,
        cap,
        max_steps: params.max_steps,
    };
    let batches = params.walkers.div_ceil(BATCH);
    let tally = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let end = ((b + 1) * BATCH).min(params.walkers);
            let mut t = Tally::default();
            for i in b * BATCH..end {
                rng.set_stream(i);
                rng.set_word_pos(0);
                t = t.merge(walk.run(&mut rng));
            }
            t
        })
        .reduce(Tally::default, Tally::merge);

    if tally.ambiguous > 0 {
        return Err(WosError::AmbiguousHits {
            count: tally.ambiguous,
        });
    }
    let used = tally.upper + tally.lower;
    if used == 0 {
        return Err(WosError::AllLost {
            walkers: params.walkers,
            max_steps: params.max_steps,
        });
    }
    let mean = tally.upper as f64 / used as f64;
    let stderr = (mean * (1.0 - mean) / used as f64).sqrt();
    let lost_fraction = tally.lost as f64 / params.walkers as f64;
    Ok(MeasureEstimate {
        mean,
        stderr,
        walkers: params.walkers,
        walkers_used: used,
        upper_hits: tally.upper,
        lost: tally.lost,
        valid: lost_fraction <= params.max_lost_fraction,
        seed: params.seed,
        elapsed: started.elapsed(),
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th point of a profile: `splitmix64(seed ^ splitmix64(index))`.
pub fn point_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileEntry {
    pub t: f64,
    pub estimate: Result<MeasureEstimate, WosError>,
}

/// Estimates at the real points `t` (reference height 0), one derived seed per
/// point. Failures are reported per entry.
pub fn estimate_profile<D: Domain + ?Sized>(
    domain: &D,
    t_values: &[f64],
    params: &WosParams,
) -> Vec<ProfileEntry> {
    t_values
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let p = params.with_seed(point_seed(params.seed, i as u64));
            ProfileEntry {
                t,
                estimate: estimate_upper_measure(domain, Point::new(t, 0.0), 0.0, &p),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::CombDomain;

    fn quick() -> WosParams {
        WosParams {
            walkers: 20_000,
            seed: 7,
            ..WosParams::default()
        }
    }

    #[test]
    fn symmetric_pseudo_strip_is_half() {
        let d = CombDomain::pseudo_strip(1.0, 1.0, 50.0).unwrap();
        let e = estimate_upper_measure(&d, Point::new(0.0, 0.0), 0.0, &quick()).unwrap();
        assert!((e.mean - 0.5).abs() < 4.0 * e.stderr, "{e:?}");
        assert!(e.valid);
    }

    #[test]
    fn repeat_is_bit_identical() {
        let d = CombDomain::pseudo_strip(1.0, 3.0, 20.0).unwrap();
        let a = estimate_upper_measure(&d, Point::new(0.0, 0.0), 0.0, &quick()).unwrap();
        let b = estimate_upper_measure(&d, Point::new(0.0, 0.0), 0.0, &quick()).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| estimate_upper_measure(&d, Point::new(0.0, 0.0), 0.0, &quick()).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn rescaling_keeps_the_measure() {
        let d = CombDomain::pseudo_strip(1.0, 3.0, 20.0).unwrap();
        let on = estimate_upper_measure(&d, Point::new(0.0, 0.0), 0.0, &quick()).unwrap();
        let off = WosParams {
            rescale: false,
            ..quick()
        };
        let off = estimate_upper_measure(&d, Point::new(0.0, 0.0), 0.0, &off).unwrap();
        let sigma = (on.stderr.powi(2) + off.stderr.powi(2)).sqrt();
        assert!((on.mean - off.mean).abs() < 4.0 * sigma);
    }

    #[test]
    fn start_point_errors() {
        let d = CombDomain::pseudo_strip(1.0, 1.0, 5.0).unwrap();
        let on_tooth = estimate_upper_measure(&d, Point::new(0.0, 1.0), 0.0, &quick());
        assert!(matches!(on_tooth, Err(WosError::NotInDomain { .. })));
        let near = WosParams {
            rescale: false,
            epsilon_shell: 0.1,
            ..quick()
        };
        let close = estimate_upper_measure(&d, Point::new(0.0, 0.95), 0.0, &near);
        assert!(matches!(close, Err(WosError::TooCloseToBoundary { .. })));
        let bad = WosParams { walkers: 0, ..quick() };
        assert!(matches!(
            estimate_upper_measure(&d, Point::new(0.0, 0.0), 0.0, &bad),
            Err(WosError::InvalidParams(_))
        ));
    }

    #[test]
    fn lost_walkers_are_reported() {
        let d = CombDomain::pseudo_strip(1.0, 1.0, 1e6).unwrap();
        let starved = WosParams {
            max_steps: 3,
            ..quick()
        };
        match estimate_upper_measure(&d, Point::new(0.0, 0.0), 0.0, &starved) {
            Ok(e) => {
                assert!(e.lost > 0);
                assert!(!e.valid);
                assert_eq!(e.lost + e.walkers_used, e.walkers);
            }
            Err(err) => assert!(matches!(err, WosError::AllLost { .. })),
        }
    }

    #[test]
    fn profile_reports_per_entry() {
        let d = CombDomain::pseudo_strip(1.0, 1.0, 50.0).unwrap();
        let p = WosParams {
            walkers: 2_000,
            ..quick()
        };
        assert!(estimate_profile(&d, &[], &p).is_empty());
        let prof = estimate_profile(&d, &[0.0, 60.0], &p);
        assert_eq!(prof.len(), 2);
        assert!(prof[0].estimate.is_ok());
        // 60 lies right of the tips, on the axis: still interior
        assert!(prof[1].estimate.is_ok());
        let prof = estimate_profile(&d, &[f64::NAN], &p);
        assert!(prof[0].estimate.is_err());
    }
}

//! Comb-shaped planar domains, walk-on-spheres harmonic measure, and the
//! correspondence between harmonic-measure limits along a trajectory axis and
//! the slope set of the trajectory.

pub mod analyzer;
pub mod comb;
pub mod geometry;
pub mod measure_exact;
pub mod semigroup;
pub mod wos;

pub use geometry::{Point, SlopeInterval};

/// Shortest round-trip decimal form of `v`, switching to exponent notation
/// outside `[1e-4, 1e15)`. Negative zero prints as `0`.
pub fn format_number(v: f64) -> String {
    let v = v + 0.0;
    if v != 0.0 && v.is_finite() && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

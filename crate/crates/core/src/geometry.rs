//! Plane and unit-disk geometry: leftward rays, rectangles, disk automorphisms,
//! level-set arcs of boundary-arc harmonic measure, and the slope function.
//!
//! Boundary arcs are always oriented clockwise from `chi` to `xi`:
//!
//! ```text
//!              chi
//!            .-'''-.
//!          /    |    \        the arc runs clockwise from chi to xi,
//!         |     v     |       i.e. counterclockwise from xi back to chi
//!          \         /
//!            '-...-'  xi
//! ```
//!
//! For the upper half circle this means `chi = -1`, `xi = 1`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point of the plane (or of the closed unit disk).
pub type Point = Complex64;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("{what} must lie in {range}, got {value}")]
    OutOfRange {
        what: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("point {0} is not on the unit circle")]
    NotOnUnitCircle(Point),
    #[error("point {0} lies outside the closed unit disk")]
    OutsideDisk(Point),
    #[error("argument of 1 - conj(xi) zeta is undefined at zeta = xi")]
    UndefinedArgument,
    #[error("arc endpoints coincide")]
    DegenerateArc,
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
}

pub(crate) fn finite(p: Point) -> bool {
    p.re.is_finite() && p.im.is_finite()
}

/// The closed leftward horizontal ray `{anchor + t : t <= 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfLine {
    pub anchor: Point,
}

impl HalfLine {
    pub fn new(anchor: Point) -> Self {
        debug_assert!(finite(anchor));
        Self { anchor }
    }

    pub fn nearest_point(&self, p: Point) -> Point {
        Point::new(p.re.min(self.anchor.re), self.anchor.im)
    }

    pub fn distance(&self, p: Point) -> f64 {
        let dx = (p.re - self.anchor.re).max(0.0);
        let dy = p.im - self.anchor.im;
        dx.hypot(dy)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.im == self.anchor.im && p.re <= self.anchor.re
    }
}

pub fn dist_to_halfline(p: Point, h: &HalfLine) -> f64 {
    h.distance(p)
}

pub fn nearest_point_on_halfline(p: Point, h: &HalfLine) -> Point {
    h.nearest_point(p)
}

/// Horizontal segment `{x + i y : left < x <= right}` at height `y`.
///
/// Distances are taken to the closure, which does not change them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HSegment {
    pub y: f64,
    pub left: f64,
    pub right: f64,
}

impl HSegment {
    pub fn nearest_point(&self, p: Point) -> Point {
        Point::new(p.re.clamp(self.left, self.right), self.y)
    }

    pub fn distance(&self, p: Point) -> f64 {
        (p - self.nearest_point(p)).norm()
    }

    /// Membership in the half-open segment.
    pub fn contains(&self, p: Point) -> bool {
        p.im == self.y && p.re > self.left && p.re <= self.right
    }
}

/// Open horizontal segment `{x + i y : |x - center_x| < half_width}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenSegment {
    pub y: f64,
    pub x_min: f64,
    pub x_max: f64,
}

/// The open rectangle `A(w, d1, d2, u)`: width `u` centred on `Re w`, spanning
/// `d1` above and `d2` below `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectWitness {
    pub center: Point,
    pub d1: f64,
    pub d2: f64,
    pub u: f64,
}

impl RectWitness {
    pub fn new(center: Point, d1: f64, d2: f64, u: f64) -> Result<Self, GeometryError> {
        for (what, v) in [("d1", d1), ("d2", d2), ("u", u)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GeometryError::OutOfRange {
                    what,
                    range: "(0, inf)",
                    value: v,
                });
            }
        }
        if !finite(center) {
            return Err(GeometryError::NonFinite("rectangle center"));
        }
        Ok(Self { center, d1, d2, u })
    }

    pub fn contains(&self, p: Point) -> bool {
        (p.re - self.center.re).abs() < self.u / 2.0
            && p.im > self.center.im - self.d2
            && p.im < self.center.im + self.d1
    }

    /// Top and bottom sides, endpoints excluded.
    pub fn horizontal_border(&self) -> [OpenSegment; 2] {
        let x_min = self.center.re - self.u / 2.0;
        let x_max = self.center.re + self.u / 2.0;
        [
            OpenSegment {
                y: self.center.im + self.d1,
                x_min,
                x_max,
            },
            OpenSegment {
                y: self.center.im - self.d2,
                x_min,
                x_max,
            },
        ]
    }

    /// Harmonic measure of the top side in the infinite strip through the
    /// rectangle's horizontal sides, seen from the center.
    pub fn strip_value(&self) -> f64 {
        self.d2 / (self.d1 + self.d2)
    }
}

fn check_unit(p: Point) -> Result<(), GeometryError> {
    if !finite(p) {
        return Err(GeometryError::NonFinite("unit-circle point"));
    }
    if (p.norm() - 1.0).abs() > UNIT_TOL {
        return Err(GeometryError::NotOnUnitCircle(p));
    }
    Ok(())
}

fn check_level(k: f64) -> Result<(), GeometryError> {
    if k > 0.0 && k < 1.0 {
        Ok(())
    } else {
        Err(GeometryError::OutOfRange {
            what: "level k",
            range: "(0, 1)",
            value: k,
        })
    }
}

/// Principal argument of `1 - conj(xi) zeta`, in `[-pi/2, pi/2]` on the closed disk.
pub fn slope_of(xi: Point, zeta: Point) -> Result<f64, GeometryError> {
    check_unit(xi)?;
    if !finite(zeta) {
        return Err(GeometryError::NonFinite("zeta"));
    }
    if zeta.norm() > 1.0 + UNIT_TOL {
        return Err(GeometryError::OutsideDisk(zeta));
    }
    let defect = Point::new(1.0, 0.0) - xi.conj() * zeta;
    if defect == Point::new(0.0, 0.0) {
        return Err(GeometryError::UndefinedArgument);
    }
    Ok(defect.arg())
}

/// Arc of the unit circle running clockwise from `chi` to `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryArc {
    pub chi: Point,
    pub xi: Point,
}

impl BoundaryArc {
    pub fn new(chi: Point, xi: Point) -> Result<Self, GeometryError> {
        check_unit(chi)?;
        check_unit(xi)?;
        if (chi - xi).norm() <= UNIT_TOL {
            return Err(GeometryError::DegenerateArc);
        }
        Ok(Self { chi, xi })
    }

    /// Arc between polar angles; runs clockwise from `from_angle` to `to_angle`.
    pub fn from_angles(from_angle: f64, to_angle: f64) -> Result<Self, GeometryError> {
        Self::new(Point::from_polar(1.0, from_angle), Point::from_polar(1.0, to_angle))
    }

    /// Arc length, in `(0, 2 pi)`.
    pub fn length(&self) -> f64 {
        let len = (self.chi.arg() - self.xi.arg()).rem_euclid(TAU);
        if len == 0.0 {
            TAU
        } else {
            len
        }
    }

    pub fn midpoint(&self) -> Point {
        Point::from_polar(1.0, self.xi.arg() + self.length() / 2.0)
    }

    pub fn complement(&self) -> Self {
        Self {
            chi: self.xi,
            xi: self.chi,
        }
    }

    /// Whether a unit-circle point lies in the open arc.
    pub fn contains_angle(&self, theta: f64) -> bool {
        let off = (self.chi.arg() - theta).rem_euclid(TAU);
        off > 0.0 && off < self.length()
    }
}

/// Disk automorphism `T(z) = (z - a) / (1 - conj(a) z)`, sending `a` to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusToZero {
    a: Point,
}

impl MobiusToZero {
    pub fn new(a: Point) -> Result<Self, GeometryError> {
        if !finite(a) {
            return Err(GeometryError::NonFinite("mobius center"));
        }
        if a.norm() >= 1.0 {
            return Err(GeometryError::OutOfRange {
                what: "|a|",
                range: "[0, 1)",
                value: a.norm(),
            });
        }
        Ok(Self { a })
    }

    pub fn center(&self) -> Point {
        self.a
    }

    pub fn apply(&self, z: Point) -> Point {
        (z - self.a) / (Point::new(1.0, 0.0) - self.a.conj() * z)
    }

    pub fn apply_inverse(&self, w: Point) -> Point {
        (w + self.a) / (Point::new(1.0, 0.0) + self.a.conj() * w)
    }

    /// Image arc. Disk automorphisms preserve orientation, so the image still
    /// runs clockwise from the image of `chi` to the image of `xi`.
    pub fn apply_arc(&self, arc: &BoundaryArc) -> BoundaryArc {
        let chi = self.apply(arc.chi);
        let xi = self.apply(arc.xi);
        BoundaryArc {
            chi: chi / chi.norm(),
            xi: xi / xi.norm(),
        }
    }
}

pub fn mobius_to_zero(a: Point) -> Result<MobiusToZero, GeometryError> {
    MobiusToZero::new(a)
}

/// Conformal map of the disk onto the upper half-plane sending the arc to the
/// negative real axis, `chi` to 0 and `xi` to infinity. The harmonic measure of
/// the arc at `z` is `arg(map(z)) / pi`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ArcHalfPlaneMap {
    chi: Point,
    xi: Point,
    lambda: Point,
}

impl ArcHalfPlaneMap {
    pub(crate) fn new(arc: &BoundaryArc) -> Self {
        let m = arc.midpoint();
        let raw = (m - arc.chi) / (m - arc.xi);
        let lambda = -raw.conj() / raw.norm();
        Self {
            chi: arc.chi,
            xi: arc.xi,
            lambda,
        }
    }

    #[cfg(test)]
    pub(crate) fn forward(&self, z: Point) -> Point {
        self.lambda * (z - self.chi) / (z - self.xi)
    }

    pub(crate) fn inverse(&self, w: Point) -> Point {
        (w * self.xi - self.lambda * self.chi) / (w - self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArcShape {
    Circle { center: Point, radius: f64 },
    /// Infinite-radius case: the chord from `chi` to `xi`.
    Segment,
}

/// The level set `{z in D : omega(z, arc, D) = k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelArc {
    pub k: f64,
    pub chi: Point,
    pub xi: Point,
    pub shape: ArcShape,
    /// A point of the level set strictly inside the disk.
    pub interior: Point,
}

impl LevelArc {
    pub fn is_segment(&self) -> bool {
        matches!(self.shape, ArcShape::Segment)
    }

    /// `count` points strictly between the endpoints, spaced evenly along the arc.
    pub fn sample(&self, count: usize) -> Vec<Point> {
        let params = (1..=count).map(|j| j as f64 / (count + 1) as f64);
        match self.shape {
            ArcShape::Segment => params.map(|s| self.chi + (self.xi - self.chi) * s).collect(),
            ArcShape::Circle { center, radius } => {
                let a0 = (self.chi - center).arg();
                let a1 = (self.xi - center).arg();
                let ap = (self.interior - center).arg();
                let ccw = (a1 - a0).rem_euclid(TAU);
                let sweep = if (ap - a0).rem_euclid(TAU) < ccw {
                    ccw
                } else {
                    ccw - TAU
                };
                params
                    .map(|s| center + Point::from_polar(radius, a0 + s * sweep))
                    .collect()
            }
        }
    }

    /// Unit tangent of the arc at `xi`, pointing into the disk.
    pub fn tangent_at_xi(&self) -> Point {
        let t = match self.shape {
            ArcShape::Segment => self.chi - self.xi,
            ArcShape::Circle { center, .. } => {
                let t = Point::i() * (self.xi - center);
                if (self.xi.conj() * t).re < 0.0 {
                    t
                } else {
                    -t
                }
            }
        };
        t / t.norm()
    }

    /// Angle at `xi` between the arc and the unit circle continuing clockwise
    /// past `xi` (the complementary side).
    pub fn angle_with_circle_at_xi(&self) -> f64 {
        let clockwise = -Point::i() * self.xi;
        (self.tangent_at_xi().conj() * clockwise).arg().abs()
    }
}

pub fn level_set_arc(k: f64, arc: &BoundaryArc) -> Result<LevelArc, GeometryError> {
    check_level(k)?;
    let map = ArcHalfPlaneMap::new(arc);
    let interior = map.inverse(Point::from_polar(1.0, k * PI));
    let (a, b, c) = (arc.chi, arc.xi, interior);
    let ab = b - a;
    let ac = c - a;
    let cross = (ab.conj() * ac).im;
    let shape = if cross.abs() <= 1e-14 * ab.norm() * ac.norm() {
        ArcShape::Segment
    } else {
        // circumcenter of a, b, c
        let center = a
            + Point::i() * (ab * ac.norm_sqr() - ac * ab.norm_sqr()) / (2.0 * cross);
        let radius = (center - a).norm();
        ArcShape::Circle { center, radius }
    };
    Ok(LevelArc {
        k,
        chi: arc.chi,
        xi: arc.xi,
        shape,
        interior,
    })
}

/// Ray from `xi` into the disk tangent at `xi` to the level arc `L_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentRay {
    pub xi: Point,
    pub k: f64,
}

impl TangentRay {
    /// The constant value of `slope_of(xi, .)` along the ray.
    pub fn slope(&self) -> f64 {
        PI * (0.5 - self.k)
    }

    pub fn direction(&self) -> Point {
        -self.xi * Point::from_polar(1.0, self.slope())
    }

    pub fn point_at(&self, s: f64) -> Point {
        self.xi * (Point::new(1.0, 0.0) - Point::from_polar(s, self.slope()))
    }

    /// Parameter at which the ray leaves the disk again.
    pub fn exit_param(&self) -> f64 {
        2.0 * self.slope().cos()
    }
}

pub fn tangent_ray(k: f64, arc: &BoundaryArc) -> Result<TangentRay, GeometryError> {
    check_level(k)?;
    Ok(TangentRay { xi: arc.xi, k })
}

/// Closed interval `[lo, hi]` of slopes inside `[-pi/2, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SlopeInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        let bound = PI / 2.0 + UNIT_TOL;
        for (what, v) in [("slope lo", lo), ("slope hi", hi)] {
            if !(v.abs() <= bound) {
                return Err(GeometryError::OutOfRange {
                    what,
                    range: "[-pi/2, pi/2]",
                    value: v,
                });
            }
        }
        if lo > hi {
            return Err(GeometryError::OutOfRange {
                what: "slope lo (must not exceed hi)",
                range: "[-pi/2, hi]",
                value: lo,
            });
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_singleton(&self, tol: f64) -> bool {
        self.width() <= tol
    }

    /// Largest endpoint distance to `other`.
    pub fn distance(&self, other: &SlopeInterval) -> f64 {
        (self.lo - other.lo).abs().max((self.hi - other.hi).abs())
    }
}

//! Angles written as multiples of pi: `0.25pi`, `-1/4pi`, `pi/6`, `-pi`.

use std::f64::consts::PI;

fn number(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() {
        return Some(1.0);
    }
    if s == "-" {
        return Some(-1.0);
    }
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let (p, q): (f64, f64) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
            if q == 0.0 {
                return None;
            }
            p / q
        }
        None => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

/// The multiple of pi denoted by `s`.
pub fn parse_pi_multiple(s: &str) -> Result<f64, String> {
    let err = || format!("malformed angle {s:?}: expected a multiple of pi such as 0.25pi, -1/4pi or pi/6");
    let t = s.trim();
    let (before, after) = t.split_once("pi").ok_or_else(err)?;
    let coefficient = number(before).ok_or_else(err)?;
    let divisor = match after.trim() {
        "" => 1.0,
        rest => {
            let q: f64 = rest.strip_prefix('/').ok_or_else(err)?.trim().parse().map_err(|_| err())?;
            if q == 0.0 || !q.is_finite() {
                return Err(err());
            }
            q
        }
    };
    Ok(coefficient / divisor)
}

pub fn parse_angle(s: &str) -> Result<f64, String> {
    parse_pi_multiple(s).map(|m| m * PI)
}

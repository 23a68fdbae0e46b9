//! Closed-form harmonic measures (strip, disk arc) and a finite-difference
//! Laplace solver used as an independent brute-force oracle.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::{finite, BoundaryArc, GeometryError, MobiusToZero, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("evaluation point {0} must lie in the open unit disk")]
    OutsideDisk(Point),
    #[error("grid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Strip geometry seen from an evaluation point: `d1` up to the upper edge,
/// `d2` down to the lower edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripConfig {
    pub d1: f64,
    pub d2: f64,
}

impl StripConfig {
    pub fn new(d1: f64, d2: f64) -> Result<Self, MeasureError> {
        for (what, value) in [("d1", d1), ("d2", d2)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(MeasureError::NonPositive { what, value });
            }
        }
        Ok(Self { d1, d2 })
    }
}

/// Harmonic measure of the upper edge: `d2 / (d1 + d2)`.
pub fn strip_upper_measure(c: StripConfig) -> f64 {
    c.d2 / (c.d1 + c.d2)
}

/// Harmonic measure of a boundary arc at an interior point of the unit disk,
/// by pulling `z` back to the center where the measure is normalized arc length.
pub fn disk_arc_measure(z: Point, arc: &BoundaryArc) -> Result<f64, MeasureError> {
    if !finite(z) || z.norm() >= 1.0 {
        return Err(MeasureError::OutsideDisk(z));
    }
    let t = MobiusToZero::new(z)?;
    Ok(t.apply_arc(arc).length() / TAU)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Interior,
    One,
    Zero,
}

impl Cell {
    fn symbol(self) -> char {
        match self {
            Cell::Interior => '.',
            Cell::One => '1',
            Cell::Zero => '0',
        }
    }

    fn from_symbol(c: char) -> Option<Self> {
        match c {
            '.' => Some(Cell::Interior),
            '1' => Some(Cell::One),
            '0' => Some(Cell::Zero),
            _ => None,
        }
    }
}

/// Arc membership with `chi` included and `xi` excluded, so an arc and its
/// complement label every exterior node exactly once.
fn on_half_open_arc(arc: &BoundaryArc, theta: f64) -> bool {
    let off = (arc.chi.arg() - theta).rem_euclid(TAU);
    off < arc.length()
}

/// Node-centred grid: node `(row, col)` sits at
/// `top_left + col * h - i * row * h`; row 0 is the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProblem {
    pub top_left: Point,
    pub spacing: f64,
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Cell>,
    pub eval: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Top,
    Bottom,
    Left,
    Right,
}

impl GridProblem {
    pub fn node(&self, row: usize, col: usize) -> Point {
        self.top_left + Point::new(col as f64 * self.spacing, -(row as f64) * self.spacing)
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.cols + col]
    }

    /// Rectangle `[x0, x1] x [y0, y1]` with `h` dividing both extents; the
    /// boundary nodes are labeled by `label(side, node)`. Corners belong to the
    /// top/bottom sides.
    pub fn rectangle(
        (x0, x1): (f64, f64),
        (y0, y1): (f64, f64),
        h: f64,
        eval: Point,
        label: impl Fn(Side, Point) -> Cell,
    ) -> Result<Self, MeasureError> {
        if !(h > 0.0) {
            return Err(MeasureError::NonPositive {
                what: "spacing",
                value: h,
            });
        }
        let cols = ((x1 - x0) / h).round() as usize + 1;
        let rows = ((y1 - y0) / h).round() as usize + 1;
        if cols < 3 || rows < 3 {
            return Err(MeasureError::Config("rectangle needs at least 3x3 nodes".into()));
        }
        let top_left = Point::new(x0, y1);
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let p = top_left + Point::new(c as f64 * h, -(r as f64) * h);
                let cell = if r == 0 {
                    label(Side::Top, p)
                } else if r == rows - 1 {
                    label(Side::Bottom, p)
                } else if c == 0 {
                    label(Side::Left, p)
                } else if c == cols - 1 {
                    label(Side::Right, p)
                } else {
                    Cell::Interior
                };
                cells.push(cell);
            }
        }
        let g = Self {
            top_left,
            spacing: h,
            rows,
            cols,
            cells,
            eval,
        };
        g.validate()?;
        Ok(g)
    }

    /// Unit disk with `n` cells across the diameter. Nodes outside the open disk
    /// carry the boundary datum at their radial projection.
    pub fn disk(n: usize, arc: &BoundaryArc, eval: Point) -> Result<Self, MeasureError> {
        if n < 4 {
            return Err(MeasureError::Config("disk needs at least 4 cells".into()));
        }
        let h = 2.0 / n as f64;
        let size = n + 3;
        let top_left = Point::new(-((size / 2) as f64) * h, (size / 2) as f64 * h);
        let mut cells = Vec::with_capacity(size * size);
        for r in 0..size {
            for c in 0..size {
                // integer offsets keep the axis row at exactly zero height
                let half = (size / 2) as f64;
                let p = Point::new((c as f64 - half) * h, (half - r as f64) * h);
                let cell = if p.norm() < 1.0 {
                    Cell::Interior
                } else if on_half_open_arc(arc, p.arg()) {
                    Cell::One
                } else {
                    Cell::Zero
                };
                cells.push(cell);
            }
        }
        let g = Self {
            top_left,
            spacing: h,
            rows: size,
            cols: size,
            cells,
            eval,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<(), MeasureError> {
        if self.cells.len() != self.rows * self.cols {
            return Err(MeasureError::Config(format!(
                "expected {} cells, found {}",
                self.rows * self.cols,
                self.cells.len()
            )));
        }
        if !(self.spacing > 0.0) {
            return Err(MeasureError::NonPositive {
                what: "spacing",
                value: self.spacing,
            });
        }
        for r in 0..self.rows {
            for c in 0..self.cols {
                let edge = r == 0 || c == 0 || r == self.rows - 1 || c == self.cols - 1;
                if edge && self.cell(r, c) == Cell::Interior {
                    return Err(MeasureError::Config(format!(
                        "interior node ({r}, {c}) on the grid edge has no boundary label"
                    )));
                }
            }
        }
        let (fr, fc) = self.fractional(self.eval);
        let inside = fr > 0.0
            && fc > 0.0
            && fr < (self.rows - 1) as f64
            && fc < (self.cols - 1) as f64;
        if !inside {
            return Err(MeasureError::Config(format!(
                "evaluation point {} outside the grid",
                self.eval
            )));
        }
        let (nr, nc) = (fr.round() as usize, fc.round() as usize);
        if self.cell(nr, nc) != Cell::Interior {
            return Err(MeasureError::Config(format!(
                "evaluation point {} is not interior",
                self.eval
            )));
        }
        Ok(())
    }

    fn fractional(&self, p: Point) -> (f64, f64) {
        let d = p - self.top_left;
        (-d.im / self.spacing, d.re / self.spacing)
    }
}

impl fmt::Display for GridProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "spacing {}", self.spacing)?;
        writeln!(f, "top_left {} {}", self.top_left.re, self.top_left.im)?;
        writeln!(f, "eval {} {}", self.eval.re, self.eval.im)?;
        writeln!(f, "grid")?;
        for r in 0..self.rows {
            let line: String = (0..self.cols).map(|c| self.cell(r, c).symbol()).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Text format: `#` comments, then `spacing h`, `top_left x y`, `eval x y`,
/// a line `grid`, and the rows (top first) using `.` interior, `1` One, `0` Zero.
impl FromStr for GridProblem {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: String| MeasureError::Config(msg);
        let mut spacing = None;
        let mut top_left = None;
        let mut eval = None;
        let mut lines = s.lines().filter(|l| !l.trim_start().starts_with('#'));
        let pair = |rest: &[&str], key: &str| -> Result<Point, MeasureError> {
            if rest.len() != 2 {
                return Err(bad(format!("`{key}` needs two numbers")));
            }
            let x = rest[0].parse::<f64>().map_err(|e| bad(format!("{key}: {e}")))?;
            let y = rest[1].parse::<f64>().map_err(|e| bad(format!("{key}: {e}")))?;
            Ok(Point::new(x, y))
        };
        for line in lines.by_ref() {
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                [] => continue,
                ["grid"] => break,
                ["spacing", h] => {
                    spacing = Some(h.parse::<f64>().map_err(|e| bad(format!("spacing: {e}")))?)
                }
                ["top_left", rest @ ..] => top_left = Some(pair(rest, "top_left")?),
                ["eval", rest @ ..] => eval = Some(pair(rest, "eval")?),
                _ => return Err(bad(format!("unrecognized header line `{line}`"))),
            }
        }
        let mut cells = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for line in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let row: Vec<Cell> = line
                .chars()
                .map(|c| Cell::from_symbol(c).ok_or_else(|| bad(format!("unknown cell `{c}`"))))
                .collect::<Result<_, _>>()?;
            match cols {
                None => cols = Some(row.len()),
                Some(n) if n != row.len() => {
                    return Err(bad(format!("row {rows} has {} cells, expected {n}", row.len())))
                }
                _ => {}
            }
            cells.extend(row);
            rows += 1;
        }
        let g = GridProblem {
            top_left: top_left.ok_or_else(|| bad("missing `top_left`".into()))?,
            spacing: spacing.ok_or_else(|| bad("missing `spacing`".into()))?,
            rows,
            cols: cols.ok_or_else(|| bad("empty grid".into()))?,
            cells,
            eval: eval.ok_or_else(|| bad("missing `eval`".into()))?,
        };
        g.validate()?;
        Ok(g)
    }
}

/// Solver settings for [`grid_laplace_measure_with`].
#[derive(Debug, Clone, Copy)]
pub struct GridSolve {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for GridSolve {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_sweeps: 200_000,
        }
    }
}

pub fn grid_laplace_measure(p: &GridProblem) -> Result<f64, MeasureError> {
    grid_laplace_measure_with(p, GridSolve::default())
}

/// Discrete harmonic interpolant of the 0/1 boundary data, evaluated at
/// `p.eval` by bilinear interpolation. Five-point stencil, lexicographic SOR.
pub fn grid_laplace_measure_with(p: &GridProblem, solve: GridSolve) -> Result<f64, MeasureError> {
    p.validate()?;
    let cols = p.cols;
    let mut u: Vec<f64> = p
        .cells
        .iter()
        .map(|c| if *c == Cell::One { 1.0 } else { 0.0 })
        .collect();
    let interior: Vec<usize> = (0..p.cells.len())
        .filter(|&i| p.cells[i] == Cell::Interior)
        .collect();

    // extent of the interior bounding box sets the relaxation factor
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (usize::MAX, 0, usize::MAX, 0);
    for &i in &interior {
        let (r, c) = (i / cols, i % cols);
        rmin = rmin.min(r);
        rmax = rmax.max(r);
        cmin = cmin.min(c);
        cmax = cmax.max(c);
    }
    let m = (rmax - rmin + 2) as f64;
    let n = (cmax - cmin + 2) as f64;
    let rho = ((PI / m).cos() + (PI / n).cos()) / 2.0;
    let omega = 2.0 / (1.0 + (1.0 - rho * rho).sqrt());

    let mut converged = false;
    for _ in 0..solve.max_sweeps {
        let mut residual: f64 = 0.0;
        for &i in &interior {
            let avg = 0.25 * (u[i - 1] + u[i + 1] + u[i - cols] + u[i + cols]);
            let delta = avg - u[i];
            residual = residual.max(delta.abs());
            u[i] += omega * delta;
        }
        if residual < solve.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MeasureError::Config(format!(
            "relaxation did not reach {} within {} sweeps",
            solve.tolerance, solve.max_sweeps
        )));
    }

    let (fr, fc) = p.fractional(p.eval);
    let (r0, c0) = (fr.floor() as usize, fc.floor() as usize);
    let (r1, c1) = ((r0 + 1).min(p.rows - 1), (c0 + 1).min(cols - 1));
    let (tr, tc) = (fr - r0 as f64, fc - c0 as f64);
    let at = |r: usize, c: usize| u[r * cols + c];
    let top = at(r0, c0) * (1.0 - tc) + at(r0, c1) * tc;
    let bottom = at(r1, c0) * (1.0 - tc) + at(r1, c1) * tc;
    Ok(top * (1.0 - tr) + bottom * tr)
}

/// Second-order Richardson step from spacings `h` and `h/2`: returns the
/// extrapolated value and the estimated error of the fine solution.
pub fn richardson(coarse: f64, fine: f64) -> (f64, f64) {
    let correction = (fine - coarse) / 3.0;
    (fine + correction, correction.abs())
}

/// Truncated-strip grid: height `d1 + d2` with the evaluation point at the
/// origin, length `aspect` times the height, top labeled One. The short sides
/// are labeled Zero; their influence at the center decays like
/// `exp(-pi * aspect / 2)`.
pub fn strip_grid(d1: f64, d2: f64, cells_across: usize, aspect: f64) -> Result<GridProblem, MeasureError> {
    let cfg = StripConfig::new(d1, d2)?;
    let height = cfg.d1 + cfg.d2;
    let h = height / cells_across as f64;
    let half_cells = (aspect * cells_across as f64 / 2.0).round();
    let half_len = half_cells * h;
    GridProblem::rectangle(
        (-half_len, half_len),
        (-cfg.d2, cfg.d1),
        h,
        Point::new(0.0, 0.0),
        |side, _| if side == Side::Top { Cell::One } else { Cell::Zero },
    )
}

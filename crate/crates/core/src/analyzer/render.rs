//! Text, CSV, JSON and SVG forms of verification reports and profiles.
//!
//! Every output carries the report's [`Meta`] block: JSON as a field, CSV and
//! text as leading `#` lines, SVG inside `<metadata>`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use super::{GapCheck, Meta, Status, VariantCheck, VerifyReport};
use crate::comb::{build_comb, Direction, Label};
use crate::wos::{MeasureEstimate, ProfileEntry};

/// Header lines `# key=value` for line-oriented formats.
pub fn meta_lines(meta: &Meta) -> String {
    let config = serde_json::to_string(&meta.config).unwrap_or_default();
    format!(
        "# schema_version={}\n# tool_version={}\n# rng={}\n# seed={}\n# config={}\n",
        meta.schema_version, meta.tool_version, meta.rng, meta.seed, config
    )
}

pub fn report_json(report: &VerifyReport) -> String {
    let mut s = serde_json::to_string_pretty(report).unwrap_or_default();
    s.push('\n');
    s
}

fn pi_units(v: f64) -> String {
    format!("{:.4}pi", v / PI)
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"))
}

pub fn report_text(report: &VerifyReport) -> String {
    let mut out = String::new();
    let plan = &report.plan;
    out.push_str(&meta_lines(&report.meta));
    let _ = writeln!(
        out,
        "{} comb, N = {}, {} blocks, targets high {:.4} low {:.4}",
        match plan.direction {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        },
        plan.pairs(),
        plan.u_prime.len(),
        plan.targets.high,
        plan.targets.low
    );
    let p = &report.config.params;
    let _ = writeln!(
        out,
        "walkers {} per point, epsilon {:e}, anchor tolerance {}, sigma factor {}",
        p.walkers, p.epsilon_shell, report.config.anchor_tol, report.config.sigma_factor
    );
    out.push_str("\nanchors\n");
    let _ = writeln!(
        out,
        "{:>5} {:>5} {:>14} {:>8} {:>8} {:>8} {:>9} {:>20}  status",
        "block", "role", "x", "target", "mean", "stderr", "deviation", "seed"
    );
    for a in &report.anchors {
        let (mean, se) = a
            .estimate
            .as_ref()
            .map_or((None, None), |e| (Some(e.mean), Some(e.stderr)));
        let _ = writeln!(
            out,
            "{:>5} {:>5} {:>14.4} {:>8.4} {:>8} {:>8} {:>9} {:>20}  {}",
            a.block,
            match a.role {
                crate::comb::AnchorRole::High => "high",
                crate::comb::AnchorRole::Low => "low",
            },
            a.x,
            a.target,
            opt(mean, 4),
            opt(se, 4),
            opt(a.deviation, 4),
            a.seed,
            a.status.as_str()
        );
    }
    if !report.gaps.is_empty() {
        out.push_str("\nin-between samples\n");
        let _ = writeln!(
            out,
            "{:>5} {:>14} {:>8} {:>8} {:>8} {:>8} {:>8}  status",
            "gap", "x", "band_lo", "mean", "band_hi", "omega1", "omega2"
        );
        for g in &report.gaps {
            let mean = g.estimate.as_ref().map(|e| e.mean);
            let v = |c: &Option<VariantCheck>| opt(c.as_ref().and_then(|c| c.estimate.as_ref()).map(|e| e.mean), 4);
            let _ = writeln!(
                out,
                "{:>5} {:>14.4} {:>8.4} {:>8} {:>8.4} {:>8} {:>8}  {}",
                g.block,
                g.x,
                g.band_lo,
                opt(mean, 4),
                g.band_hi,
                v(&g.omega1),
                v(&g.omega2),
                g.status.as_str()
            );
        }
        let _ = writeln!(out, "sandwich violations: {}", report.sandwich_violations());
    }
    out.push('\n');
    match &report.limits {
        Some(l) => {
            let _ = writeln!(
                out,
                "limits: limsup {:.4} +- {:.4}, liminf {:.4} +- {:.4}{}",
                l.limsup_hat,
                l.limsup_band,
                l.liminf_hat,
                l.liminf_band,
                if l.collapsed { " (collapsed)" } else { "" }
            );
        }
        None => out.push_str("limits: unavailable\n"),
    }
    if let Some(i) = &report.interval {
        let _ = writeln!(out, "slope interval: [{}, {}]", pi_units(i.lo), pi_units(i.hi));
    }
    let t = &report.target_interval;
    let _ = writeln!(out, "target interval: [{}, {}]", pi_units(t.lo), pi_units(t.hi));
    if let Some(t) = &report.finite_target_interval {
        let _ = writeln!(
            out,
            "target at this truncation: [{}, {}]",
            pi_units(t.lo),
            pi_units(t.hi)
        );
    }
    let _ = writeln!(
        out,
        "interval deviation: {} ({})",
        report.interval_deviation.map_or("-".to_string(), pi_units),
        report.interval_status.as_str()
    );
    let _ = writeln!(out, "verdict: {}", report.verdict.as_str());
    if !report.failures.is_empty() {
        out.push_str("failures:\n");
        for f in &report.failures {
            let _ = writeln!(out, "  {f}");
        }
    }
    out
}

const CSV_HEADER: &str = "kind,block,x,variant,mean,stderr,walkers_used,lost,seed,target,band_lo,band_hi,status";

fn num(v: f64) -> String {
    if v.is_finite() {
        crate::format_number(v)
    } else {
        String::new()
    }
}

fn estimate_cells(e: Option<&MeasureEstimate>) -> String {
    match e {
        Some(e) => format!("{},{},{},{}", num(e.mean), num(e.stderr), e.walkers_used, e.lost),
        None => ",,,".to_string(),
    }
}

fn gap_rows(out: &mut String, g: &GapCheck) {
    let _ = writeln!(
        out,
        "gap,{},{},omega,{},{},,{},{},{}",
        g.block,
        num(g.x),
        estimate_cells(g.estimate.as_ref()),
        g.seed,
        num(g.band_lo),
        num(g.band_hi),
        g.status.as_str()
    );
    for (name, v) in [("omega1", &g.omega1), ("omega2", &g.omega2)] {
        if let Some(v) = v {
            let (lo, hi) = match name {
                "omega1" => (String::new(), num(v.bound)),
                _ => (num(v.bound), String::new()),
            };
            let _ = writeln!(
                out,
                "gap,{},{},{name},{},{},,{lo},{hi},{}",
                g.block,
                num(g.x),
                estimate_cells(v.estimate.as_ref()),
                g.seed,
                v.status.as_str()
            );
        }
    }
}

/// One row per estimate: anchors, in-between samples and surgery variants.
pub fn report_csv(report: &VerifyReport) -> String {
    let mut out = meta_lines(&report.meta);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for a in &report.anchors {
        let _ = writeln!(
            out,
            "anchor,{},{},omega,{},{},{},,,{}",
            a.block,
            num(a.x),
            estimate_cells(a.estimate.as_ref()),
            a.seed,
            num(a.target),
            a.status.as_str()
        );
    }
    for g in &report.gaps {
        gap_rows(&mut out, g);
    }
    out
}

/// Profile along the axis: columns `t,mean,stderr,walkers_used,lost,seed,valid,error`.
pub fn profile_csv(meta: &Meta, entries: &[ProfileEntry]) -> String {
    let mut out = meta_lines(meta);
    out.push_str("t,mean,stderr,walkers_used,lost,seed,valid,error\n");
    for e in entries {
        match &e.estimate {
            Ok(m) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},",
                    num(e.t),
                    num(m.mean),
                    num(m.stderr),
                    m.walkers_used,
                    m.lost,
                    m.seed,
                    m.valid
                );
            }
            Err(err) => {
                let msg = err.to_string().replace(['"', ','], " ");
                let _ = writeln!(out, "{},,,,,,false,{msg}", num(e.t));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SvgOptions {
    /// Symmetric-log axes; `None` picks them when tooth heights span more
    /// than a factor of 20.
    pub log_scale: Option<bool>,
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn symlog(v: f64, s: f64) -> f64 {
    v.signum() * (v.abs() / s).ln_1p()
}

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
    log: Option<f64>,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, px: (f64, f64), log: Option<f64>, pad: f64) -> Self {
        let f = |v: f64| log.map_or(v, |s| symlog(v, s));
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(f(v)), b.max(f(v)))
        });
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            lo -= 1.0;
            hi += 1.0;
        }
        let margin = (hi - lo) * pad;
        Self {
            lo: lo - margin,
            hi: hi + margin,
            px_lo: px.0,
            px_hi: px.1,
            log,
        }
    }

    fn map(&self, v: f64) -> f64 {
        let v = self.log.map_or(v, |s| symlog(v, s));
        let v = v.clamp(self.lo, self.hi);
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn status_colour(s: Status) -> &'static str {
    match s {
        Status::Pass => "#2ca02c",
        Status::Fail => "#d62728",
        Status::Inconclusive => "#ff7f0e",
    }
}

/// The comb with its anchors (top panel) and the estimates against their
/// targets with `sigma_factor` error bars (bottom panel).
pub fn report_svg(report: &VerifyReport, opts: &SvgOptions) -> String {
    const W: f64 = 960.0;
    const H: f64 = 560.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = W - 20.0;
    let plan = &report.plan;
    let teeth = build_comb(plan).map(|c| c.teeth).unwrap_or_default();
    let heights: Vec<f64> = teeth.iter().map(|t| t.line.anchor.im.abs()).collect();
    let (hmin, hmax) = heights
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &h| (a.min(h), b.max(h)));
    let log = opts.log_scale.unwrap_or(hmax > 20.0 * hmin);
    let xs: Vec<f64> = teeth
        .iter()
        .map(|t| t.line.anchor.re)
        .chain(report.anchors.iter().map(|a| a.x))
        .chain(std::iter::once(0.0))
        .collect();
    let x_scale = plan.u_prime.first().copied().unwrap_or(1.0) / 4.0;
    let xa = Axis::new(xs.iter().copied(), (LEFT, RIGHT), log.then_some(x_scale), 0.05);
    let ya = Axis::new(
        teeth.iter().map(|t| t.line.anchor.im).chain([0.0]),
        (310.0, 40.0),
        log.then_some((hmin / 2.0).max(f64::MIN_POSITIVE)),
        0.08,
    );
    let wa = Axis {
        lo: 0.0,
        hi: 1.0,
        px_lo: 530.0,
        px_hi: 350.0,
        log: None,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let meta = serde_json::to_string(&report.meta).unwrap_or_default();
    let _ = writeln!(s, "<metadata>{}</metadata>", xml_escape(&meta));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="22">{} comb, N = {}, verdict {}{}</text>"#,
        match plan.direction {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        },
        plan.pairs(),
        report.verdict.as_str(),
        if log { " (symmetric-log axes)" } else { "" }
    );
    let y0 = ya.map(0.0);
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{y0:.2}" x2="{RIGHT}" y2="{y0:.2}" stroke="#999" stroke-dasharray="4 3"/>"##
    );
    for t in &teeth {
        let a = t.line.anchor;
        let (px, py) = (xa.map(a.re), ya.map(a.im));
        let colour = match t.label {
            Label::Upper => "#1f77b4",
            Label::Lower => "#9467bd",
        };
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{py:.2}" x2="{px:.2}" y2="{py:.2}" stroke="{colour}" stroke-width="2"/>"#
        );
        let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{colour}"/>"#);
    }
    for a in &report.anchors {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{y0:.2}" r="3" fill="black"><title>x_{} = {}</title></circle>"#,
            xa.map(a.x),
            a.block,
            a.x
        );
    }

    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="350" width="{:.2}" height="180" fill="none" stroke="#ccc"/>"##,
        RIGHT - LEFT
    );
    for v in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let py = wa.map(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{RIGHT}" y2="{py:.2}" stroke="#eee"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v}</text>"##,
            LEFT - 6.0,
            py + 4.0
        );
    }
    let k = report.config.sigma_factor;
    for g in &report.gaps {
        let px = xa.map(g.x);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#ddd" stroke-width="5"/>"##,
            wa.map(g.band_lo),
            wa.map(g.band_hi)
        );
        if let Some(e) = &g.estimate {
            let _ = writeln!(
                s,
                r#"<circle cx="{px:.2}" cy="{:.2}" r="2" fill="{}"/>"#,
                wa.map(e.mean),
                status_colour(g.status)
            );
        }
    }
    for a in &report.anchors {
        let px = xa.map(a.x);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#333"/>"##,
            px - 6.0,
            px + 6.0,
            ty = wa.map(a.target)
        );
        if let Some(e) = &a.estimate {
            let colour = status_colour(a.status);
            let band = k * super::sigma(e);
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{colour}"/><circle cx="{px:.2}" cy="{:.2}" r="3.5" fill="{colour}"><title>block {} estimate {:.4} target {:.4}</title></circle>"#,
                wa.map(e.mean - band),
                wa.map(e.mean + band),
                wa.map(e.mean),
                a.block,
                e.mean,
                a.target
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

//! `combslope`: plan, build, measure and verify comb domains, and trace
//! trajectories of the closed-form Koenigs models.
//!
//! Exit codes: 0 success (including inconclusive verification), 1 a check
//! failed, 2 usage or invalid parameters, 3 file I/O.

mod angle;
mod config;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use combslope::analyzer::render::{self, SvgOptions};
use combslope::analyzer::{
    calibrate_widths, verify_construction, AnalyzerError, CalibrationConfig, CalibrationStep, Meta, Status,
    VerifyConfig, SCHEMA_VERSION,
};
use combslope::comb::{
    assign_widths, build_comb, plan_backward, plan_backward_special, plan_forward, surgery, CombDomain, CombError,
    Direction, LowerToothSide, SequencePlan, SpecialMode, SpecialReading, SurgeryKind,
};
use combslope::measure_exact::{grid_laplace_measure, strip_grid, strip_upper_measure, StripConfig};
use combslope::semigroup::{sample_times, slope_minus, slope_plus, trajectory, KoenigsModel, SemigroupError};
use combslope::wos::{estimate_profile, estimate_upper_measure, WosError, WosParams};
use combslope::Point;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Check(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Check(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CombError> for CliError {
    fn from(e: CombError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SemigroupError> for CliError {
    fn from(e: SemigroupError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<WosError> for CliError {
    fn from(e: WosError) -> Self {
        match e {
            WosError::InvalidParams(_) => CliError::Usage(e.to_string()),
            _ => CliError::Check(e.to_string()),
        }
    }
}

impl From<AnalyzerError> for CliError {
    fn from(e: AnalyzerError) -> Self {
        match e {
            AnalyzerError::Config(_) | AnalyzerError::Plan(_) => CliError::Usage(e.to_string()),
            AnalyzerError::Wos(w) => w.into(),
            _ => CliError::Check(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "combslope", version, about = "Comb domains, harmonic measure and trajectory slopes")]
#[command(after_help = "Use --config FILE to load per-subcommand defaults from a JSON file.")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tooth-height sequences, optionally with widths
    Plan(PlanArgs),
    /// Tooth list of a plan with widths
    Build(BuildArgs),
    /// A single harmonic-measure value
    Measure(MeasureArgs),
    /// Estimates along the real axis of a comb
    Profile(ProfileArgs),
    /// Anchor, sandwich, surgery and slope-interval checks
    Verify(VerifyArgs),
    /// Trajectory of a closed-form Koenigs model
    Model(ModelArgs),
}

#[derive(Args, Serialize, Clone)]
struct WosArgs {
    /// Walkers per estimate
    #[arg(long, default_value_t = 100_000)]
    walkers: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Absorption shell in local-scale units
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 100_000)]
    max_steps: u64,
    /// Largest jump radius in local-scale units
    #[arg(long, default_value_t = 1e3)]
    radius_cap: f64,
}

impl WosArgs {
    fn params(&self) -> WosParams {
        WosParams {
            epsilon_shell: self.epsilon,
            max_steps: self.max_steps,
            walkers: self.walkers,
            seed: self.seed,
            radius_cap: Some(self.radius_cap),
            ..WosParams::default()
        }
    }
}

#[derive(Args, Serialize)]
struct PlanArgs {
    #[arg(long, conflicts_with = "backward")]
    forward: bool,
    #[arg(long)]
    backward: bool,
    /// Lower slope endpoint as a multiple of pi, e.g. -0.25pi
    #[arg(long, allow_hyphen_values = true)]
    theta1: Option<String>,
    /// Upper slope endpoint as a multiple of pi, e.g. pi/6
    #[arg(long, allow_hyphen_values = true)]
    theta2: Option<String>,
    /// Backward plan with slope interval [-pi/2, pi/2]
    #[arg(long)]
    full_interval: bool,
    /// Backward plan with b2 = 0 and the given b1
    #[arg(long, value_name = "B1")]
    b2_zero: Option<f64>,
    /// Backward plan with b1 = 1 and the given b2
    #[arg(long, value_name = "B2")]
    b1_one: Option<f64>,
    /// Offset m of the b2 = 0 and b1 = 1 recurrences
    #[arg(long, default_value_t = 0)]
    m: u32,
    /// Read the b2 = 0 and b1 = 1 recurrences with a constant right-hand side
    #[arg(long)]
    literal: bool,
    #[arg(long, value_enum, default_value_t = SideArg::Mirrored)]
    lower_side: SideArg,
    #[arg(long)]
    r1: f64,
    /// Number of tooth pairs N
    #[arg(long)]
    n: usize,
    /// Explicit block widths u'_1, u'_2, ... (comma separated)
    #[arg(long, conflicts_with = "calibrate")]
    widths: Option<String>,
    /// Find widths by Monte Carlo calibration
    #[arg(long)]
    calibrate: bool,
    #[arg(long, default_value_t = 4.0)]
    min_aspect: f64,
    #[arg(long, default_value_t = 256.0)]
    max_aspect: f64,
    #[command(flatten)]
    wos: WosArgs,
    /// Plan file to write; without it the plan JSON goes to stdout
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum SideArg {
    Mirrored,
    Verbatim,
}

#[derive(Args, Serialize)]
struct BuildArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum MeasureTarget {
    /// Exact strip value, optionally with the grid oracle
    Strip,
    /// Walk-on-spheres in a two-tooth half-strip at the origin
    PseudoStrip,
    /// Walk-on-spheres in a planned comb or one of its surgery variants
    Comb,
}

#[derive(Args, Serialize)]
struct MeasureArgs {
    #[arg(value_enum)]
    target: MeasureTarget,
    #[arg(long)]
    d1: Option<f64>,
    #[arg(long)]
    d2: Option<f64>,
    /// Grid oracle cells across the strip (strip only)
    #[arg(long)]
    grid_cells: Option<usize>,
    /// Grid length over height (strip only)
    #[arg(long, default_value_t = 40.0)]
    aspect: f64,
    /// Pseudo-strip width; the teeth end at u/2
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    y: f64,
    /// Surgery variant, omega1:K or omega2:K
    #[arg(long)]
    surgery: Option<String>,
    #[command(flatten)]
    wos: WosArgs,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ProfileArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, allow_hyphen_values = true)]
    to: f64,
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[command(flatten)]
    wos: WosArgs,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum Format {
    Json,
    Text,
    Csv,
    Svg,
}

#[derive(ValueEnum, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum LogScale {
    Auto,
    On,
    Off,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    plan: PathBuf,
    #[command(flatten)]
    wos: WosArgs,
    #[arg(long, default_value_t = 0.05)]
    anchor_tol: f64,
    /// Slope-interval tolerance as a multiple of pi
    #[arg(long, default_value = "0.05pi")]
    interval_tol: String,
    #[arg(long, default_value_t = 3.0)]
    sigma_factor: f64,
    /// In-between samples per gap
    #[arg(long, default_value_t = 3)]
    points_per_gap: usize,
    #[arg(long)]
    no_surgery: bool,
    /// Directory for report.{json,txt,csv,svg}
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', action = clap::ArgAction::Set, default_value = "json,text,csv,svg")]
    format: Vec<Format>,
    #[arg(long, value_enum, default_value_t = LogScale::Auto)]
    log_scale: LogScale,
}

#[derive(ValueEnum, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum ModelName {
    Strip,
    Halfplane,
}

#[derive(Args, Serialize)]
struct ModelArgs {
    #[arg(value_enum)]
    model: ModelName,
    /// Strip half-width
    #[arg(long, default_value_t = 1.0)]
    d: f64,
    /// Imaginary part of h(z) at the start point (default 0 strip, 1 halfplane)
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<f64>,
    /// Trajectory sampled on [-tmax, tmax]
    #[arg(long, default_value_t = 100.0)]
    tmax: f64,
    #[arg(long, default_value_t = 2001)]
    samples: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Plan file layout: the plan plus the run that produced it.
#[derive(Serialize, Deserialize)]
struct PlanFile {
    meta: Meta,
    plan: SequencePlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    calibration: Option<Vec<CalibrationStep>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PlanInput {
    File(PlanFile),
    Bare(SequencePlan),
}

fn meta<T: Serialize>(command: &str, seed: u64, args: &T) -> Meta {
    Meta::new(seed, json!({ "command": command, "args": args }))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn read_plan(path: &Path) -> Result<SequencePlan, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read plan {}: {e}", path.display())))?;
    let input: PlanInput = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("{} is not a plan file: {e}", path.display())))?;
    let plan = match input {
        PlanInput::File(f) => {
            if f.meta.schema_version != SCHEMA_VERSION {
                return Err(CliError::Usage(format!(
                    "{} has schema version {}, expected {SCHEMA_VERSION}",
                    path.display(),
                    f.meta.schema_version
                )));
            }
            f.plan
        }
        PlanInput::Bare(p) => p,
    };
    plan.validate()?;
    Ok(plan)
}

fn angle_arg(name: &str, v: &Option<String>) -> Result<f64, CliError> {
    let s = v.as_deref().ok_or_else(|| CliError::Usage(format!("--{name} is required")))?;
    angle::parse_angle(s).map_err(CliError::Usage)
}

fn parse_widths(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("malformed width {w:?}")))
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

fn plan_table(plan: &SequencePlan) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>3} {:>14} {:>14} {:>14} {:>14} {:>14}", "n", "r_n", "rho_n", "u'_n", "u_n", "x_n");
    let rows = plan.pairs().max(plan.u_prime.len());
    for n in 1..=rows {
        let pair = |v: &[f64]| v.get(n - 1).copied();
        let width = plan.u_prime.get(n - 1).copied();
        let (u, x) = if width.is_some() {
            (Some(plan.partial_sum(n)), Some(plan.midpoint(n)))
        } else {
            (None, None)
        };
        let _ = writeln!(
            s,
            "{n:>3} {:>14} {:>14} {:>14} {:>14} {:>14}",
            cell(pair(&plan.r)),
            cell(pair(&plan.rho)),
            cell(width),
            cell(u),
            cell(x)
        );
    }
    s
}

fn cmd_plan(args: &PlanArgs) -> Result<(), CliError> {
    let reading = if args.literal {
        SpecialReading::Literal
    } else {
        SpecialReading::Corrected
    };
    let special = [args.full_interval, args.b2_zero.is_some(), args.b1_one.is_some()]
        .iter()
        .filter(|&&b| b)
        .count();
    if special > 1 {
        return Err(CliError::Usage("choose one of --full-interval, --b2-zero, --b1-one".into()));
    }
    let mut plan = if special == 1 {
        if args.forward {
            return Err(CliError::Usage("the special plans are backward plans".into()));
        }
        let mode = if args.full_interval {
            SpecialMode::FullInterval
        } else if let Some(b1) = args.b2_zero {
            SpecialMode::B2Zero { b1, m: args.m }
        } else {
            SpecialMode::B1One {
                b2: args.b1_one.unwrap_or_default(),
                m: args.m,
            }
        };
        plan_backward_special(mode, args.r1, args.n, reading)?
    } else {
        let (t1, t2) = (angle_arg("theta1", &args.theta1)?, angle_arg("theta2", &args.theta2)?);
        match (args.forward, args.backward) {
            (true, false) => plan_forward(t1, t2, args.r1, args.n)?,
            (false, true) => plan_backward(t1, t2, args.r1, args.n)?,
            _ => return Err(CliError::Usage("choose --forward or --backward".into())),
        }
    };
    if plan.direction == Direction::Backward {
        plan.lower_side = match args.lower_side {
            SideArg::Mirrored => LowerToothSide::Mirrored,
            SideArg::Verbatim => LowerToothSide::Verbatim,
        };
    }
    let mut calibration = None;
    if let Some(w) = &args.widths {
        plan = assign_widths(&plan, &parse_widths(w)?)?;
    } else if args.calibrate {
        let cfg = CalibrationConfig {
            min_aspect: args.min_aspect,
            max_aspect: args.max_aspect,
            ..CalibrationConfig::default()
        };
        let cal = calibrate_widths(&plan, &args.wos.params(), &cfg)?;
        plan = cal.plan;
        calibration = Some(cal.steps);
    }
    let file = PlanFile {
        meta: meta("plan", args.wos.seed, args),
        plan,
        calibration,
    };
    let json = to_json(&file);
    match &args.out {
        Some(p) => {
            write_file(p, &json)?;
            print!("{}", plan_table(&file.plan));
        }
        None => print!("{json}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct BuildOutput {
    meta: Meta,
    plan: SequencePlan,
    domain: CombDomain,
}

fn cmd_build(args: &BuildArgs) -> Result<(), CliError> {
    let plan = read_plan(&args.plan)?;
    let domain = build_comb(&plan)?;
    let mut table = String::new();
    let _ = writeln!(table, "{:>4} {:>6} {:>16} {:>16}", "j", "side", "anchor_re", "anchor_im");
    for t in &domain.teeth {
        let _ = writeln!(
            table,
            "{:>4} {:>6} {:>16.6} {:>16.6}",
            t.index,
            if t.line.anchor.im > 0.0 { "upper" } else { "lower" },
            t.line.anchor.re,
            t.line.anchor.im
        );
    }
    let out = BuildOutput {
        meta: meta("build", 0, args),
        plan,
        domain,
    };
    match &args.out {
        Some(p) => {
            write_file(p, &to_json(&out))?;
            print!("{table}");
            Ok(())
        }
        None => emit(None, &to_json(&out)),
    }
}

fn parse_surgery(s: &str) -> Result<SurgeryKind, CliError> {
    let err = || CliError::Usage(format!("malformed surgery {s:?}: expected omega1:K or omega2:K"));
    let (kind, k) = s.split_once(':').ok_or_else(err)?;
    let k: usize = k.trim().parse().map_err(|_| err())?;
    match kind.trim() {
        "omega1" => Ok(SurgeryKind::Omega1(k)),
        "omega2" => Ok(SurgeryKind::Omega2(k)),
        _ => Err(err()),
    }
}

fn required<T: Copy>(name: &str, v: Option<T>) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--{name} is required")))
}

fn cmd_measure(args: &MeasureArgs) -> Result<(), CliError> {
    let seed = if args.target == MeasureTarget::Strip { 0 } else { args.wos.seed };
    let meta = meta("measure", seed, args);
    let params = args.wos.params();
    let result = match args.target {
        MeasureTarget::Strip => {
            let cfg = StripConfig::new(required("d1", args.d1)?, required("d2", args.d2)?)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let exact = strip_upper_measure(cfg);
            let grid = match args.grid_cells {
                Some(cells) => {
                    let problem =
                        strip_grid(cfg.d1, cfg.d2, cells, args.aspect).map_err(|e| CliError::Usage(e.to_string()))?;
                    Some(grid_laplace_measure(&problem).map_err(|e| CliError::Check(e.to_string()))?)
                }
                None => None,
            };
            json!({ "exact": exact, "grid": grid, "grid_error": grid.map(|g| (g - exact).abs()) })
        }
        MeasureTarget::PseudoStrip => {
            let (d1, d2) = (required("d1", args.d1)?, required("d2", args.d2)?);
            let u = required("u", args.u)?;
            let domain = CombDomain::pseudo_strip(d1, d2, u / 2.0)?;
            let estimate = estimate_upper_measure(&domain, Point::new(0.0, 0.0), 0.0, &params)?;
            let exact = strip_upper_measure(StripConfig::new(d1, d2).map_err(|e| CliError::Usage(e.to_string()))?);
            json!({ "estimate": estimate, "strip_value": exact, "deviation": estimate.mean - exact })
        }
        MeasureTarget::Comb => {
            let path = args.plan.as_deref().ok_or_else(|| CliError::Usage("--plan is required".into()))?;
            let plan = read_plan(path)?;
            let domain = build_comb(&plan)?;
            let z = Point::new(required("x", args.x)?, args.y);
            let estimate = match &args.surgery {
                Some(s) => {
                    let variant = surgery(&domain, parse_surgery(s)?)?;
                    estimate_upper_measure(&variant, z, 0.0, &params)?
                }
                None => estimate_upper_measure(&domain, z, 0.0, &params)?,
            };
            json!({ "estimate": estimate })
        }
    };
    let out = json!({ "meta": meta, "result": result });
    emit(args.out.as_deref(), &to_json(&out))
}

fn cmd_profile(args: &ProfileArgs) -> Result<(), CliError> {
    let plan = read_plan(&args.plan)?;
    let domain = build_comb(&plan)?;
    if !(args.from.is_finite() && args.to.is_finite()) || args.count == 0 {
        return Err(CliError::Usage("profile needs finite --from/--to and --count >= 1".into()));
    }
    let ts = sample_times(args.from, args.to, args.count);
    let entries = estimate_profile(&domain, &ts, &args.wos.params());
    let meta = meta("profile", args.wos.seed, args);
    emit(args.out.as_deref(), &render::profile_csv(&meta, &entries))
}

fn cmd_verify(args: &VerifyArgs) -> Result<Status, CliError> {
    let plan = read_plan(&args.plan)?;
    let interval_tol = angle::parse_angle(&args.interval_tol).map_err(CliError::Usage)?;
    let cfg = VerifyConfig {
        params: args.wos.params(),
        anchor_tol: args.anchor_tol,
        interval_tol,
        sigma_factor: args.sigma_factor,
        points_per_gap: args.points_per_gap,
        surgery: !args.no_surgery,
        ..VerifyConfig::default()
    };
    let mut report = verify_construction(&plan, &cfg)?;
    report.meta = Meta::new(
        args.wos.seed,
        json!({ "command": "verify", "args": args, "verify": cfg }),
    );
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let svg = SvgOptions {
            log_scale: match args.log_scale {
                LogScale::Auto => None,
                LogScale::On => Some(true),
                LogScale::Off => Some(false),
            },
        };
        for f in &args.format {
            let (name, body) = match f {
                Format::Json => ("report.json", render::report_json(&report)),
                Format::Text => ("report.txt", render::report_text(&report)),
                Format::Csv => ("report.csv", render::report_csv(&report)),
                Format::Svg => ("report.svg", render::report_svg(&report, &svg)),
            };
            write_file(&dir.join(name), &body)?;
        }
    }
    print!("{}", render::report_text(&report));
    Ok(report.verdict)
}

/// Tolerance of the strip cross-check between the trajectory slope and the
/// harmonic-measure prediction.
const CROSS_CHECK_TOL: f64 = 1e-3;

/// Fixed-point with `digits` decimals; values that round to zero print unsigned.
fn fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn pi_units(v: f64) -> String {
    format!("{}pi", fixed(v / PI, 6))
}

fn cmd_model(args: &ModelArgs) -> Result<bool, CliError> {
    let (model, y0) = match args.model {
        ModelName::Strip => (KoenigsModel::strip(args.d)?, args.y0.unwrap_or(0.0)),
        ModelName::Halfplane => (KoenigsModel::UpperHalfPlane, args.y0.unwrap_or(1.0)),
    };
    if !(args.tmax > 0.0 && args.tmax.is_finite()) {
        return Err(CliError::Usage("--tmax must be positive".into()));
    }
    let w0 = Point::new(0.0, y0);
    let z = model.inverse(w0)?;
    let ts = sample_times(-args.tmax, args.tmax, args.samples);
    let traj = trajectory(&model, z, &ts)?;
    let plus = slope_plus(&traj, model.denjoy_wolff())?;
    let minus = slope_minus(&traj, model.alpha_limit())?;
    let mut summary = String::new();
    let _ = writeln!(summary, "start z = {} + {}i (h(z) = {}i)",
        combslope::format_number(z.re),
        combslope::format_number(z.im),
        combslope::format_number(y0));
    let _ = writeln!(summary, "slope+ = [{}, {}]", pi_units(plus.lo), pi_units(plus.hi));
    let _ = writeln!(summary, "slope- = [{}, {}]", pi_units(minus.lo), pi_units(minus.hi));
    let mut passed = true;
    if let KoenigsModel::Strip { d } = model {
        let a = strip_upper_measure(StripConfig::new(d - y0, d + y0).map_err(|e| CliError::Usage(e.to_string()))?);
        let predicted = PI * (0.5 - a);
        let measured = 0.5 * (plus.lo + plus.hi);
        let diff = (plus.lo - predicted).abs().max((plus.hi - predicted).abs());
        passed = diff <= CROSS_CHECK_TOL;
        let _ = writeln!(
            summary,
            "cross-check: slope {} vs pi(1/2 - omega(d - y0, d + y0)) = {}, |diff| = {diff:.3e}, tolerance {CROSS_CHECK_TOL:e}: {}",
            fixed(measured, 6),
            fixed(predicted, 6),
            if passed { "pass" } else { "fail" }
        );
    }
    let meta = meta("model", 0, args);
    let mut csv = render::meta_lines(&meta);
    csv.push_str(&traj.to_csv());
    match &args.out {
        Some(p) => {
            write_file(p, &csv)?;
            print!("{summary}");
        }
        None => {
            print!("{csv}");
            for line in summary.lines() {
                println!("# {line}");
            }
        }
    }
    Ok(passed)
}

fn run() -> Result<ExitCode, CliError> {
    let argv = config::expand(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return Ok(ExitCode::from(if e.use_stderr() { 2 } else { 0 }));
        }
    };
    let ok = match &cli.command {
        Command::Plan(a) => cmd_plan(a).map(|_| true)?,
        Command::Build(a) => cmd_build(a).map(|_| true)?,
        Command::Measure(a) => cmd_measure(a).map(|_| true)?,
        Command::Profile(a) => cmd_profile(a).map(|_| true)?,
        Command::Verify(a) => cmd_verify(a)? != Status::Fail,
        Command::Model(a) => cmd_model(a)?,
    };
    Ok(ExitCode::from(if ok { 0 } else { 1 }))
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

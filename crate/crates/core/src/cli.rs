//! Command-line front end. Each subcommand reads a JSON run configuration,
//! writes its artifacts under `--out` and reports through its exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (check: bounds hold; solve/tpbvp: unique) |
//! | 1 | a verification, oracle or gradient check failed |
//! | 2 | check: bounds do not hold on the samples or horizon |
//! | 3 | flow: integration failed (partial trajectory written) |
//! | 4 | solve/tpbvp: a family of stationary momenta |
//! | 5 | solve/tpbvp: no stationary momentum found |
//! | 64 | bad configuration |
//! | 66 | verify: no prior solve result |
//! | 70 | internal error |
//! | 74 | I/O error |

use std::f64::consts::PI;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flow::{
    fmt17, integrate_cauchy, integrate_terminal, newton_residual, relative_energy_drift, write_trajectory_csv,
    IntegratorConfig, PhaseTrajectory,
};
use crate::massspring::{CaseKind, MassSpringParams};
use crate::model::{check_assumptions, hamiltonian, ProblemDoc, ProblemSpec};
use crate::stationary::{
    hjb_residual, interior_samples, solve_argstat_p, solve_tpbvp_shooting, stationary_value, verify_stationarity,
    Classification, NewtonConfig, StationaryReport, StationaryResult,
};
use crate::variational::{
    fd_cost_gradient, grad_cost_full, integrate_fvp, propagate_tangent, second_order_check, write_zeta_csv,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_BOUNDS: i32 = 2;
pub const EXIT_INTEGRATION: i32 = 3;
pub const EXIT_FAMILY: i32 = 4;
pub const EXIT_NONE: i32 = 5;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_SOFTWARE: i32 = 70;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(name = "stataction", version, about = "Stationary-action solver")]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Seed for random initial momenta and samples.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for seed-parallel solves (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Estimate m and K and report the convexity horizon.
    Check,
    /// Integrate the characteristic system.
    Flow,
    /// Multi-seed stationary-momentum solve.
    Solve,
    /// Shooting solve of the two-point boundary value problem.
    Tpbvp,
    /// Re-check a prior solve result.
    Verify,
    /// Mass–spring phase sweep against the closed form.
    Oracle,
    /// Adjoint vs tangent vs finite-difference gradients.
    Gradcheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Cauchy data (x, p) at t, integrated to T.
    #[default]
    Forward,
    /// Terminal position x at T, integrated back to t.
    Backward,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    Path(PathBuf),
    Inline(ProblemDoc),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub points: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Half-width of the excluded neighbourhoods of nπ/2.
    pub exclude: f64,
    /// Also evaluate the degenerate phases nπ/2, n = 1..=degenerate.
    pub degenerate: usize,
    pub x: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            points: 50,
            theta_min: 0.05,
            theta_max: 3.0 * PI,
            exclude: 1e-3,
            degenerate: 6,
            x: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<ProblemSource>,
    /// Builds the problem from the closed-form example instead.
    pub mass_spring: Option<MassSpringParams>,
    /// Initial time; defaults to the problem's t0.
    pub t: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub p: Option<Vec<f64>>,
    pub direction: Direction,
    /// Explicit initial momenta; when empty, `n_seeds` are drawn uniformly
    /// from [−seed_scale, seed_scale]ⁿ.
    pub seeds: Vec<Vec<f64>>,
    pub n_seeds: usize,
    pub seed_scale: f64,
    /// Interior samples for verification (and state samples for check).
    pub samples: usize,
    pub tol: f64,
    pub dedup_tol: f64,
    pub hjb_tol: f64,
    pub drift_tol: f64,
    pub second_order_tol: f64,
    pub gradient_agreement_tol: f64,
    pub integrator: IntegratorConfig,
    pub newton: NewtonConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: None,
            mass_spring: None,
            t: None,
            x: None,
            p: None,
            direction: Direction::Forward,
            seeds: Vec::new(),
            n_seeds: 8,
            seed_scale: 5.0,
            samples: 10,
            tol: 1e-6,
            dedup_tol: 1e-6,
            hjb_tol: 1e-4,
            drift_tol: 1e-8,
            second_order_tol: 1e-4,
            gradient_agreement_tol: 1e-8,
            integrator: IntegratorConfig::default(),
            newton: NewtonConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a configuration; relative problem paths resolve against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid run configuration: {e}")))?;
        if let Some(ProblemSource::Path(p)) = &mut cfg.problem {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("tol", self.tol),
            ("dedup_tol", self.dedup_tol),
            ("hjb_tol", self.hjb_tol),
            ("drift_tol", self.drift_tol),
            ("second_order_tol", self.second_order_tol),
            ("gradient_agreement_tol", self.gradient_agreement_tol),
            ("seed_scale", self.seed_scale),
            ("sweep.exclude", self.sweep.exclude),
        ];
        for (name, v) in tols {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(ProblemSource::Path(p)) = &self.problem {
            if !p.exists() {
                return Err(Error::Config(format!("problem file {} does not exist", p.display())));
            }
        }
        if self.problem.is_some() && self.mass_spring.is_some() {
            return Err(Error::Config("give either problem or mass_spring, not both".into()));
        }
        if self.sweep.points == 0 || !(self.sweep.theta_min < self.sweep.theta_max) {
            return Err(Error::Config("sweep needs points > 0 and theta_min < theta_max".into()));
        }
        self.integrator.validate().map_err(as_config)?;
        self.newton.validate().map_err(as_config)
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let spec = match (&self.problem, &self.mass_spring) {
            (Some(ProblemSource::Inline(doc)), _) => ProblemSpec::from_doc(doc),
            (Some(ProblemSource::Path(p)), _) => {
                let text = fs::read_to_string(p)?;
                let doc: ProblemDoc = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("invalid problem {}: {e}", p.display())))?;
                ProblemSpec::from_doc(&doc)
            }
            (None, Some(ms)) => MassSpringParams::new(ms.mass, ms.stiffness, ms.v, ms.t_final)?.problem(0.0),
            (None, None) => return Err(Error::Config("configuration has no problem".into())),
        };
        spec.map_err(as_config)
    }

    fn start_time(&self, spec: &ProblemSpec) -> Result<f64> {
        let t = self.t.unwrap_or(spec.t0);
        if !(t >= spec.t0 && t <= spec.t_final) {
            return Err(Error::Config(format!(
                "t = {t} outside [{}, {}]",
                spec.t0, spec.t_final
            )));
        }
        Ok(t)
    }

    fn vector(&self, name: &str, v: &Option<Vec<f64>>, dim: usize) -> Result<DVector<f64>> {
        match v {
            None => Ok(DVector::zeros(dim)),
            Some(v) if v.len() == dim => Ok(DVector::from_column_slice(v)),
            Some(v) => Err(Error::Config(format!(
                "{name} has length {}, problem dimension is {dim}",
                v.len()
            ))),
        }
    }

    fn seeds(&self, dim: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
        if !self.seeds.is_empty() {
            return self
                .seeds
                .iter()
                .map(|s| self.vector("seed", &Some(s.clone()), dim))
                .collect();
        }
        if self.n_seeds == 0 {
            return Err(Error::Config("n_seeds must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..self.n_seeds)
            .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-self.seed_scale..=self.seed_scale)))
            .collect())
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) | Error::Io(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Json(_)
        | Error::InvalidProblem(_)
        | Error::InvalidInertia(_)
        | Error::DimensionError { .. } => EXIT_CONFIG,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        Error::IntegrationError { .. } => EXIT_INTEGRATION,
        _ => EXIT_SOFTWARE,
    }
}

/// Pretty JSON with every float at 17 significant digits.
struct Json17(PrettyFormatter<'static>);

impl Formatter for Json17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt17(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with [`Json17`] formatting.
pub fn to_json17<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Json17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

enum Cell {
    Num(f64),
    Text(String),
}

/// A header plus rows, written as CSV or as a JSON array of objects.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<PathBuf> {
        match format {
            Format::Csv => {
                let path = dir.join(format!("{stem}.csv"));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(&self.header)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(|c| match c {
                        Cell::Num(v) => fmt17(*v),
                        Cell::Text(s) => s.clone(),
                    }))?;
                }
                w.flush()?;
                Ok(path)
            }
            Format::Json => {
                let rows: Vec<serde_json::Map<String, Value>> = self
                    .rows
                    .iter()
                    .map(|row| {
                        self.header
                            .iter()
                            .zip(row)
                            .map(|(k, c)| {
                                let v = match c {
                                    Cell::Num(v) => json!(v),
                                    Cell::Text(s) => json!(s),
                                };
                                (k.clone(), v)
                            })
                            .collect()
                    })
                    .collect();
                let path = dir.join(format!("{stem}.json"));
                fs::write(&path, to_json17(&rows)?)?;
                Ok(path)
            }
        }
    }
}

fn trajectory_table(spec: &ProblemSpec, traj: &PhaseTrajectory) -> Result<Table> {
    let n = traj.dim();
    let mut header = vec!["s".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..n).map(|i| format!("p{i}")));
    if traj.z.is_some() {
        header.push("z".into());
    }
    header.push("H".into());
    let mut rows = Vec::with_capacity(traj.len());
    for (k, (s, pt)) in traj.times.iter().zip(&traj.points).enumerate() {
        let mut row = vec![Cell::Num(*s)];
        row.extend(pt.x.iter().chain(pt.p.iter()).map(|v| Cell::Num(*v)));
        if let Some(z) = &traj.z {
            row.push(Cell::Num(z[k]));
        }
        row.push(Cell::Num(hamiltonian(spec, &pt.x, &pt.p)?));
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn write_trajectory(spec: &ProblemSpec, traj: &PhaseTrajectory, dir: &Path, format: Format) -> Result<PathBuf> {
    match format {
        Format::Csv => {
            let path = dir.join("trajectory.csv");
            write_trajectory_csv(spec, traj, fs::File::create(&path)?)?;
            Ok(path)
        }
        Format::Json => trajectory_table(spec, traj)?.write(dir, "trajectory", format),
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<String> {
    let text = to_json17(value)?;
    fs::write(dir.join(name), &text)?;
    Ok(text)
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
    format: Format,
    seed: u64,
}

impl Context {
    fn problem(&self) -> Result<ProblemSpec> {
        self.cfg.problem()
    }
}

/// Parses the process arguments, runs the subcommand and returns the exit code.
pub fn run() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("STATACTION_LOG", "warn")).try_init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    run_cli(&cli)
}

/// Runs an already-parsed command line.
pub fn run_cli(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("stataction: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    fs::create_dir_all(&cli.out)?;
    let ctx = Context {
        cfg,
        out: cli.out.clone(),
        format: cli.format,
        seed: cli.seed,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cli.jobs)))?;
    pool.install(|| match cli.command {
        Command::Check => cmd_check(&ctx),
        Command::Flow => cmd_flow(&ctx),
        Command::Solve => cmd_solve(&ctx),
        Command::Tpbvp => cmd_tpbvp(&ctx),
        Command::Verify => cmd_verify(&ctx),
        Command::Oracle => cmd_oracle(&ctx),
        Command::Gradcheck => cmd_gradcheck(&ctx),
    })
}

fn cmd_check(ctx: &Context) -> Result<i32> {
    let spec = ctx.problem()?;
    let t = ctx.cfg.start_time(&spec)?;
    let x = ctx.cfg.vector("x", &ctx.cfg.x, spec.dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let scale = ctx.cfg.seed_scale;
    let mut samples = vec![x];
    samples
        .extend((0..ctx.cfg.samples.max(1)).map(|_| DVector::from_fn(spec.dim, |_, _| rng.gen_range(-scale..=scale))));
    let rep = check_assumptions(&spec, &samples)?;
    let horizon = spec.t_final - t;
    let covers = rep.covers(horizon);
    let pass = rep.holds_on_samples && covers;
    let doc = json!({
        "m_est": rep.m_est,
        "k_est": rep.k_est,
        "horizon_bound": rep.horizon_bound.map_or(json!("unbounded"), |h| json!(h)),
        "holds_on_samples": rep.holds_on_samples,
        "samples": rep.samples,
        "horizon": horizon,
        "covers_horizon": covers,
        "pass": pass,
    });
    print!("{}", write_json(&ctx.out, "check.json", &doc)?);
    Ok(if pass { EXIT_OK } else { EXIT_BOUNDS })
}

fn cmd_flow(ctx: &Context) -> Result<i32> {
    let spec = ctx.problem()?;
    let t = ctx.cfg.start_time(&spec)?;
    let x = ctx.cfg.vector("x", &ctx.cfg.x, spec.dim)?;
    let run = match ctx.cfg.direction {
        Direction::Forward => {
            let p = ctx.cfg.vector("p", &ctx.cfg.p, spec.dim)?;
            integrate_cauchy(&spec, t, spec.t_final, &x, &p, &ctx.cfg.integrator)
        }
        Direction::Backward => integrate_terminal(&spec, t, spec.t_final, &x, &ctx.cfg.integrator),
    };
    let traj = match run {
        Ok(traj) => traj,
        Err(Error::IntegrationError { at, reason, partial }) => {
            write_trajectory(&spec, &partial, &ctx.out, ctx.format)?;
            let doc = json!({"failed_at": at, "reason": reason, "nodes": partial.len()});
            write_json(&ctx.out, "drift.json", &doc)?;
            eprintln!("stataction: integration failed at s = {at}: {reason}");
            return Ok(EXIT_INTEGRATION);
        }
        Err(e) => return Err(e),
    };
    write_trajectory(&spec, &traj, &ctx.out, ctx.format)?;
    let drift = relative_energy_drift(&spec, &traj)?;
    let doc = json!({
        "nodes": traj.len(),
        "energy_drift": drift,
        "newton_residual": if traj.len() >= 3 { json!(newton_residual(&spec, &traj)?) } else { Value::Null },
        "pass": drift <= ctx.cfg.drift_tol,
    });
    print!("{}", write_json(&ctx.out, "drift.json", &doc)?);
    Ok(EXIT_OK)
}

fn solution_code(c: &Classification) -> i32 {
    match c {
        Classification::Unique => EXIT_OK,
        Classification::Family { .. } => EXIT_FAMILY,
        _ => EXIT_NONE,
    }
}

fn cmd_solve(ctx: &Context) -> Result<i32> {
    let spec = ctx.problem()?;
    let t = ctx.cfg.start_time(&spec)?;
    let x = ctx.cfg.vector("x", &ctx.cfg.x, spec.dim)?;
    let seeds = ctx.cfg.seeds(spec.dim, ctx.seed)?;
    let result_path = ctx.out.join("result.json");
    if result_path.exists() {
        fs::remove_file(&result_path)?;
    }
    let set = stationary_value(&spec, t, &x, &seeds, &ctx.cfg.newton, ctx.cfg.dedup_tol)?;
    let reports: Vec<StationaryReport> = set.solutions.iter().map(|r| r.report()).collect();
    let summary = json!({
        "seeds": seeds.len(),
        "solutions": reports,
        "nonexistent_seeds": set.nonexistent_seeds,
        "inconclusive_seeds": set.inconclusive_seeds,
        "failed_seeds": set.failed_seeds,
    });
    write_json(&ctx.out, "solutions.json", &summary)?;
    let Some(first) = set.solutions.first() else {
        eprintln!(
            "stataction: no stationary momentum ({} nonexistent, {} inconclusive, {} failed seeds)",
            set.nonexistent_seeds, set.inconclusive_seeds, set.failed_seeds
        );
        return Ok(EXIT_NONE);
    };
    print!("{}", write_json(&ctx.out, "result.json", &first.report())?);
    write_trajectory(&spec, &first.trajectory, &ctx.out, ctx.format)?;
    Ok(if set.has_family() { EXIT_FAMILY } else { EXIT_OK })
}

fn cmd_tpbvp(ctx: &Context) -> Result<i32> {
    let spec = ctx.problem()?;
    let t = ctx.cfg.start_time(&spec)?;
    let x = ctx.cfg.vector("x", &ctx.cfg.x, spec.dim)?;
    let p0 = ctx.cfg.vector("p", &ctx.cfg.p, spec.dim)?;
    let (result, code) = match solve_tpbvp_shooting(&spec, t, spec.t_final, &x, &p0, &ctx.cfg.newton) {
        Ok(r) => {
            let code = solution_code(&r.classification);
            (r, code)
        }
        Err(Error::NonConvergence { best, .. }) => {
            let mut r = *best;
            if r.classification.is_solved() {
                r.classification = Classification::Inconclusive;
            }
            (r, EXIT_NONE)
        }
        Err(e) => return Err(e),
    };
    let mut doc = serde_json::to_value(result.report())?;
    doc["residual_terminal"] = json!(result.residual_terminal);
    print!("{}", write_json(&ctx.out, "tpbvp.json", &doc)?);
    write_trajectory(&spec, &result.trajectory, &ctx.out, ctx.format)?;
    Ok(code)
}

fn classification_from(report: &StationaryReport) -> Result<Classification> {
    Ok(match report.classification.as_str() {
        "unique" => Classification::Unique,
        "family" => Classification::Family {
            dim: report.family_basis.len(),
            basis: report.family_basis.clone(),
        },
        "nonexistent" => Classification::Nonexistent,
        "inconclusive" => Classification::Inconclusive,
        other => return Err(Error::Config(format!("unknown classification {other:?} in result"))),
    })
}

fn cmd_verify(ctx: &Context) -> Result<i32> {
    let path = ctx.out.join("result.json");
    let text = match fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            eprintln!("stataction: {} not found; run `solve` first", path.display());
            return Ok(EXIT_NO_INPUT);
        }
        Err(e) => return Err(e.into()),
    };
    let report: StationaryReport =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("unreadable {}: {e}", path.display())))?;
    let spec = ctx.problem()?;
    let x = ctx.cfg.vector("result x", &Some(report.x.clone()), spec.dim)?;
    let p = ctx
        .cfg
        .vector("result p_star", &Some(report.p_star.clone()), spec.dim)?;
    let integ = &ctx.cfg.integrator;
    let mut result = StationaryResult::evaluate(&spec, report.t, &x, &p, integ)?;
    result.classification = classification_from(&report)?;

    let samples = interior_samples(report.t, spec.t_final, ctx.cfg.samples.max(1));
    let stationarity = verify_stationarity(&spec, &result, &samples, ctx.cfg.tol, integ)?;
    let hjb = hjb_residual(
        &spec,
        report.t,
        &x,
        &p,
        &interior_samples(report.t, spec.t_final, 5),
        1e-4,
        integ,
    )?;
    let drift = relative_energy_drift(&spec, &result.trajectory)?;
    let adj = integrate_fvp(&spec, &result.trajectory)?;
    let second = second_order_check(&spec, &result.trajectory, &adj)?;

    let hjb_pass = hjb.max() <= ctx.cfg.hjb_tol;
    let drift_pass = drift <= ctx.cfg.drift_tol;
    let second_pass = second.max() <= ctx.cfg.second_order_tol;
    let pass = stationarity.pass && hjb_pass && drift_pass && second_pass;
    let doc = json!({
        "stationarity": stationarity,
        "hjb": {"total_derivative": hjb.total_derivative, "pde": hjb.pde, "pass": hjb_pass},
        "energy_drift": {"value": drift, "pass": drift_pass},
        "second_order": {
            "second_order": second.second_order,
            "grad_p_derivative": second.grad_p_derivative,
            "grad_x_derivative": second.grad_x_derivative,
            "pass": second_pass,
        },
        "pass": pass,
    });
    print!("{}", write_json(&ctx.out, "verify.json", &doc)?);
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn oracle_label(kind: &CaseKind) -> &'static str {
    match kind {
        CaseKind::Generic | CaseKind::Period(_) => "unique",
        CaseKind::QuarterFamily(_) => "family",
        CaseKind::QuarterNonexistent(_) => "nonexistent",
    }
}

/// Sweep phases: `points` uniform values with the excluded neighbourhoods
/// of nπ/2 pushed to their edge, then the degenerate phases themselves.
pub fn sweep_phases(sweep: &SweepConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(sweep.points + sweep.degenerate);
    for k in 0..sweep.points {
        let frac = if sweep.points > 1 {
            k as f64 / (sweep.points - 1) as f64
        } else {
            0.0
        };
        let mut theta = sweep.theta_min + frac * (sweep.theta_max - sweep.theta_min);
        let n = (theta / (0.5 * PI)).round();
        let d = theta - n * 0.5 * PI;
        if n > 0.0 && d.abs() < 2.0 * sweep.exclude {
            theta = n * 0.5 * PI + 2.0 * sweep.exclude * if d < 0.0 { -1.0 } else { 1.0 };
        }
        out.push(theta);
    }
    out.extend((1..=sweep.degenerate).map(|n| n as f64 * 0.5 * PI));
    out
}

fn cmd_oracle(ctx: &Context) -> Result<i32> {
    let base = ctx.cfg.mass_spring.unwrap_or_else(|| MassSpringParams::reference(1.0));
    let base = MassSpringParams::new(base.mass, base.stiffness, base.v, base.t_final).map_err(as_config)?;
    let t = ctx.cfg.t.unwrap_or(0.0);
    let header = [
        "theta",
        "x",
        "p_numeric",
        "p_oracle",
        "abs_diff",
        "value_numeric",
        "value_oracle",
        "class_numeric",
        "class_oracle",
        "agree",
    ];
    let mut rows = Vec::new();
    let (mut max_diff, mut max_value_diff, mut all_agree): (f64, f64, bool) = (0.0, 0.0, true);
    let degenerate_tol = 1e-9;
    let mut xs = ctx.cfg.sweep.x.clone();
    if xs.is_empty() {
        xs.push(1.0);
    }
    for theta in sweep_phases(&ctx.cfg.sweep) {
        let ms = base.with_t_final(base.t_final_for_phase(t, theta));
        let spec = ms.problem(0.0)?;
        // the degenerate rays sit at x = ±v/ω
        let mut row_xs = xs.clone();
        if (theta / (0.5 * PI)).round() * 0.5 * PI == theta && (theta / PI).fract() != 0.0 {
            row_xs.extend([ms.v / ms.omega(), -ms.v / ms.omega()]);
        }
        for x in row_xs {
            let label = ms.classify_pbar(t, x, degenerate_tol);
            let xv = DVector::from_element(1, x);
            let numeric = solve_argstat_p(&spec, t, &xv, &DVector::zeros(1), &ctx.cfg.newton);
            let (p_num, value_num, class_num) = match &numeric {
                Ok(r) => (r.p_star[0], r.value, r.classification.label()),
                Err(Error::NonConvergence { best, .. }) => (best.p_star[0], best.value, "nonconvergent"),
                Err(e) => return Err(Error::Config(e.to_string())),
            };
            let class_oracle = oracle_label(&label.kind);
            let agree = class_num == class_oracle;
            all_agree &= agree;
            let (p_or, diff, value_or) = match label.p_bar {
                Some(pb) if class_num == "unique" => {
                    let d = (p_num - pb).abs();
                    max_diff = max_diff.max(d / (1.0 + pb.abs()));
                    let w = ms.w_tilde(t, x, p_num);
                    max_value_diff = max_value_diff.max((value_num - w).abs() / (1.0 + w.abs()));
                    (pb, d, w)
                }
                Some(pb) => (pb, f64::NAN, f64::NAN),
                None => (f64::NAN, f64::NAN, ms.w_tilde(t, x, p_num)),
            };
            rows.push(vec![
                Cell::Num(theta),
                Cell::Num(x),
                Cell::Num(p_num),
                Cell::Num(p_or),
                Cell::Num(diff),
                Cell::Num(value_num),
                Cell::Num(value_or),
                Cell::Text(class_num.into()),
                Cell::Text(class_oracle.into()),
                Cell::Text(agree.to_string()),
            ]);
        }
    }
    let table = Table {
        header: header.iter().map(|s| s.to_string()).collect(),
        rows,
    };
    table.write(&ctx.out, "oracle", ctx.format)?;
    let pass = all_agree && max_diff <= ctx.cfg.tol && max_value_diff <= ctx.cfg.tol;
    let doc = json!({
        "max_rel_p_diff": max_diff,
        "max_rel_value_diff": max_value_diff,
        "classifications_agree": all_agree,
        "pass": pass,
    });
    print!("{}", write_json(&ctx.out, "oracle_summary.json", &doc)?);
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_gradcheck(ctx: &Context) -> Result<i32> {
    let spec = ctx.problem()?;
    let t = ctx.cfg.start_time(&spec)?;
    let x = ctx.cfg.vector("x", &ctx.cfg.x, spec.dim)?;
    let p = ctx.cfg.vector("p", &ctx.cfg.p, spec.dim)?;
    let integ = &ctx.cfg.integrator;
    let traj = integrate_cauchy(&spec, t, spec.t_final, &x, &p, integ)?;
    let adj = integrate_fvp(&spec, &traj)?;
    let adjoint = adj.initial_gradient(&traj);
    let tangent = grad_cost_full(&spec, &traj, &propagate_tangent(&spec, &traj)?)?;
    let fd = fd_cost_gradient(&spec, t, &x, &p, integ)?;

    let mut rows = Vec::new();
    let (mut max_agree, mut max_fd): (f64, f64) = (0.0, 0.0);
    let blocks = [
        ("x", &adjoint.grad_x, &tangent.grad_x, &fd.grad_x),
        ("p", &adjoint.grad_p, &tangent.grad_p, &fd.grad_p),
    ];
    for (name, a, b, f) in blocks {
        let scale = 1.0 + f.amax();
        for i in 0..spec.dim {
            let agree = (a[i] - b[i]).abs();
            let rel = (a[i] - f[i]).abs() / scale;
            max_agree = max_agree.max(agree);
            max_fd = max_fd.max(rel);
            rows.push(vec![
                Cell::Text(name.into()),
                Cell::Num(i as f64),
                Cell::Num(a[i]),
                Cell::Num(b[i]),
                Cell::Num(f[i]),
                Cell::Num(agree),
                Cell::Num(rel),
            ]);
        }
    }
    let table = Table {
        header: [
            "block",
            "index",
            "adjoint",
            "tangent",
            "fd",
            "adjoint_tangent_diff",
            "adjoint_fd_rel",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        rows,
    };
    table.write(&ctx.out, "gradcheck", ctx.format)?;
    if ctx.format == Format::Csv {
        write_zeta_csv(&adj, fs::File::create(ctx.out.join("zeta.csv"))?)?;
    }
    let pass = max_agree <= ctx.cfg.gradient_agreement_tol && max_fd <= ctx.cfg.tol;
    let doc = json!({
        "max_adjoint_tangent_diff": max_agree,
        "max_adjoint_fd_rel": max_fd,
        "pass": pass,
    });
    print!("{}", write_json(&ctx.out, "gradcheck_summary.json", &doc)?);
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json17_writes_seventeen_digits() {
        let text = to_json17(&json!({"a": 0.1, "b": [1.0, -2.5e-7], "c": "s"})).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("-2.4999999999999999e-7"), "{text}");
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert_eq!(back["b"][1].as_f64(), Some(-2.5e-7));
    }

    #[test]
    fn sweep_avoids_degenerate_neighbourhoods() {
        let sweep = SweepConfig::default();
        let phases = sweep_phases(&sweep);
        assert_eq!(phases.len(), 56);
        for th in &phases[..50] {
            let d = (th / (0.5 * PI)).round() * 0.5 * PI - th;
            assert!(d.abs() > sweep.exclude, "{th}");
        }
    }

    #[test]
    fn config_validation() {
        let base = Path::new(".");
        assert!(RunConfig::from_json("{}", base).is_ok());
        assert!(matches!(
            RunConfig::from_json(r#"{"tol": -1}"#, base),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_json(r#"{"bogus": 1}"#, base),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_json(r#"{"problem": "does/not/exist.json"}"#, base),
            Err(Error::Config(_))
        ));
        let cfg =
            RunConfig::from_json(r#"{"mass_spring": {"mass": 5, "stiffness": 1, "v": -2, "T": 3}}"#, base).unwrap();
        assert_eq!(cfg.problem().unwrap().t_final, 3.0);
        assert!(matches!(RunConfig::default().problem(), Err(Error::Config(_))));
    }

    #[test]
    fn seeds_are_deterministic() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.seeds(3, 7).unwrap(), cfg.seeds(3, 7).unwrap());
        assert_ne!(cfg.seeds(3, 7).unwrap(), cfg.seeds(3, 8).unwrap());
    }
}

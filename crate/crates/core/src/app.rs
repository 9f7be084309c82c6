//! Command-line front end. Every subcommand is a thin wrapper that parses
//! arguments, calls one library operation and writes CSV, JSON or text.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::boundary::{perturb_nondegenerate, synthesize, BoundarySpec, HarmonicPolyOneForm};
use crate::critical::{enumerate_critical, CriticalRotation};
use crate::harmonic::AlphaField;
use crate::landscape::{asymptotic_probe, grid_points, scan, write_csv, ProbeQuantity};
use crate::reduced::{
    check_flow_invariance, find_critical, stilde_set, suggest_window, SearchOptions, SearchWindow, Strategy,
};
use crate::verify::{self, VerifyConfig};
use crate::{Error, Matrix3, Point4, QuadratureSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "asd-landscape", version, about = "Reduced Yang-Mills landscape on the unit 4-ball")]
pub struct Cli {
    /// Gauss-Legendre order of the radial rule.
    #[arg(long, global = true, default_value_t = 12)]
    pub quad_radial: usize,
    /// Angular order n: n nodes in each polar angle, 2n in azimuth.
    #[arg(long, global = true, default_value_t = 16)]
    pub quad_sphere: usize,
    /// Target relative tolerance of the refinement loop.
    #[arg(long, global = true, default_value_t = 1e-7)]
    pub quad_tol: f64,
    /// Monte Carlo samples for cross-checks (0 disables).
    #[arg(long, global = true, default_value_t = 0)]
    pub mc_samples: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print alpha, its gradient, h and (dh)- at one point.
    Field {
        #[arg(long, value_parser = parse_point)]
        p: Point4,
        #[arg(long, value_parser = parse_point)]
        x: Point4,
    },
    /// Scan or probe the interaction landscape of a spec.
    #[command(subcommand)]
    Landscape(LandscapeCmd),
    /// Critical rotations of the trace functional.
    #[command(subcommand)]
    So3(So3Cmd),
    /// Write a boundary spec whose M at p equals the target.
    Synth {
        /// `diag:a,b,c` or nine reals in row order.
        #[arg(long)]
        target: String,
        #[arg(long, value_parser = parse_point, default_value = "0,0,0,0")]
        p: Point4,
        /// Spec file whose base connection is kept.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Shift the synthesis matrix so the spectrum of M^t M separates at p.
    Perturb {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_parser = parse_point, default_value = "0,0,0,0")]
        p: Point4,
        #[arg(long, default_value_t = 1e-3)]
        mu: f64,
    },
    /// Reduced-energy search and its window.
    #[command(subcommand)]
    Reduce(ReduceCmd),
    /// Run the identity suite; exit 1 if any check fails.
    Verify {
        /// Comma-separated check ids (all when absent).
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u8>>,
        #[arg(long, default_value_t = 8)]
        reduce_starts: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum LandscapeCmd {
    /// F, spectrum and Gamma/G values on an n^4 grid inside B_{1-d0}.
    Scan {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[arg(long, default_value_t = 0.2)]
        d0: f64,
    },
    /// Power-law fit of a landscape quantity towards the boundary.
    Probe {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "f")]
        quantity: ProbeQuantity,
        #[arg(long, value_parser = parse_point, default_value = "0,0,0,-1")]
        direction: Point4,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
        d: Vec<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum So3Cmd {
    /// Critical points of R -> Tr(RM).
    Crit {
        /// Nine reals in row order, or a file containing them.
        #[arg(long = "M")]
        m: String,
    },
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Explicit window `d0,D1,D2,C0`; otherwise derived from --c0/--d0.
    #[arg(long, value_delimiter = ',')]
    window: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    c0: f64,
    #[arg(long, default_value_t = 0.5)]
    d0: f64,
    /// Probe grid size per axis for the window recipe.
    #[arg(long, default_value_t = 3)]
    probe: usize,
}

#[derive(Debug, Subcommand)]
pub enum ReduceCmd {
    /// Critical points of the reduced energy inside the window.
    Find {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, value_enum, default_value = "minimize")]
        strategy: Strategy,
        #[arg(long, default_value_t = 32)]
        starts: usize,
        #[arg(long, default_value_t = 5)]
        grid: usize,
    },
    /// Derive a search window from the recipe.
    Window {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        c0: f64,
        #[arg(long, default_value_t = 0.5)]
        d0: f64,
        #[arg(long, default_value_t = 3)]
        probe: usize,
    },
    /// Sample the window faces and report flow margins.
    Invariance {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Sublevel inclusion check around a centre p0.
    Stilde {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_parser = parse_point, default_value = "0,0,0,0")]
        p0: Point4,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

fn parse_reals(s: &str) -> Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c == '[' || c == ']' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

fn parse_point(s: &str) -> Result<Point4, String> {
    let v = parse_reals(s)?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 4 coordinates, got {}", v.len()))
}

fn parse_matrix(s: &str) -> Result<Matrix3, String> {
    let text = if Path::new(s).is_file() { std::fs::read_to_string(s).map_err(|e| e.to_string())? } else { s.to_string() };
    let v = parse_reals(&text)?;
    Matrix3::from_row_slice(&v).map_err(|e| e.to_string())
}

fn parse_target(s: &str) -> Result<Matrix3, String> {
    match s.strip_prefix("diag:") {
        Some(d) => {
            let v = parse_reals(d)?;
            let d: [f64; 3] = v.try_into().map_err(|_| "diag: needs three entries".to_string())?;
            Ok(Matrix3::diag(d))
        }
        None => parse_matrix(s),
    }
}

/// Failure of a command: configuration problems exit 2, failed operations 1.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BadSpec(_) => Failure::Config(e.to_string()),
            e => Failure::Run(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

impl Cli {
    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            radial_order: self.quad_radial,
            psi_order: self.quad_sphere,
            theta_order: self.quad_sphere,
            phi_points: 2 * self.quad_sphere,
            mc_samples: self.mc_samples,
            seed: self.seed,
            target_rel_tol: self.quad_tol,
            ..QuadratureSpec::default()
        }
    }

    fn format(&self, default: Format, allowed: &[Format]) -> Result<Format, Failure> {
        let f = self.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(Failure::Config(format!("--format {f:?} is not available for this command")))
        }
    }
}

fn emit(out: &Option<PathBuf>, body: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, body)?,
        None => std::io::stdout().write_all(body)?,
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut s = serde_json::to_vec_pretty(v).map_err(Error::from)?;
    s.push(b'\n');
    Ok(s)
}

fn load_spec(path: &Path) -> Result<BoundarySpec, Failure> {
    BoundarySpec::load(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn window_of(a: &WindowArgs, spec: &BoundarySpec, quad: &QuadratureSpec) -> Result<SearchWindow, Failure> {
    match &a.window {
        Some(v) => {
            let [d0, d1, d2, c0]: [f64; 4] =
                v.clone().try_into().map_err(|_| Failure::Config("--window needs d0,D1,D2,C0".into()))?;
            let w = SearchWindow { d0, lambda0: 0.99 * d0 / 2.0, d1, d2, c0 };
            w.validate().map_err(|e| Failure::Config(e.to_string()))?;
            Ok(w)
        }
        None => Ok(suggest_window(spec, a.c0, a.d0, a.probe, quad)?.window),
    }
}

#[derive(Serialize)]
struct FieldReport {
    p: Point4,
    x: Point4,
    alpha: [f64; 4],
    grad_alpha: [[f64; 4]; 4],
    h: [[f64; 4]; 3],
    dh_asd: Matrix3,
}

#[derive(Serialize)]
struct CritTable<'a> {
    schema_version: u32,
    m: Matrix3,
    critical: &'a [CriticalRotation],
}

#[derive(Serialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

fn versioned<T>(body: T) -> Versioned<T> {
    Versioned { schema_version: crate::boundary::SCHEMA_VERSION, body }
}

#[derive(Serialize)]
struct Listed<T> {
    items: T,
}

fn crit_text(m: &Matrix3, crit: &[CriticalRotation]) -> String {
    let mut s = format!("M = {:?}\n{:>12} {:>10} {:>6} {:>11}  R0\n", m.0, "value", "signs", "index", "degenerate");
    for c in crit {
        let idx = c.morse_index.map_or("-".to_string(), |i| i.to_string());
        s.push_str(&format!(
            "{:>12.6} {:>10} {:>6} {:>11}  {:?}\n",
            c.value,
            format!("{:?}", c.signs).replace(' ', ""),
            idx,
            c.degenerate,
            c.r0.matrix().0.map(|r| r.map(|v| (v * 1e9).round() / 1e9 + 0.0))
        ));
    }
    s
}

/// Run a parsed command line; the returned value is the process exit code.
pub fn run(cli: &Cli) -> Result<i32, Failure> {
    let quad = cli.quadrature();
    quad.validate()?;
    match &cli.command {
        Command::Field { p, x } => {
            cli.format(Format::Json, &[Format::Json])?;
            let a = AlphaField::new(p)?;
            let r = FieldReport { p: *p, x: *x, alpha: a.values(x), grad_alpha: a.grad(x), h: a.h(x), dh_asd: a.dh(x) };
            emit(&cli.out, &json(&r)?)?;
        }
        Command::Landscape(LandscapeCmd::Scan { spec, grid, d0 }) => {
            let f = cli.format(Format::Csv, &[Format::Csv, Format::Json])?;
            if !(*d0 > 0.0 && *d0 < 1.0) || *grid == 0 {
                return Err(Failure::Config("need --grid >= 1 and --d0 in (0, 1)".into()));
            }
            let spec = load_spec(spec)?;
            let samples = scan(&spec, &grid_points(*grid, *d0), &quad)?;
            let body = match f {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_csv(&mut buf, &samples)?;
                    buf
                }
                _ => json(&versioned(Listed { items: samples }))?,
            };
            emit(&cli.out, &body)?;
        }
        Command::Landscape(LandscapeCmd::Probe { spec, quantity, direction, d }) => {
            cli.format(Format::Json, &[Format::Json])?;
            let spec = match spec {
                Some(p) => load_spec(p)?,
                None => BoundarySpec::flat(Matrix3::identity()),
            };
            let fit = asymptotic_probe(*quantity, direction, d, &spec, &quad)?;
            emit(&cli.out, &json(&versioned(fit))?)?;
        }
        Command::So3(So3Cmd::Crit { m }) => {
            let f = cli.format(Format::Text, &[Format::Text, Format::Json])?;
            let m = parse_matrix(m).map_err(Failure::Config)?;
            let crit = enumerate_critical(&m)?;
            let body = match f {
                Format::Json => json(&CritTable { schema_version: crate::boundary::SCHEMA_VERSION, m, critical: &crit })?,
                _ => crit_text(&m, &crit).into_bytes(),
            };
            emit(&cli.out, &body)?;
        }
        Command::Synth { target, p, base } => {
            cli.format(Format::Json, &[Format::Json])?;
            let t = parse_target(target).map_err(Failure::Config)?;
            let base = match base {
                Some(b) => load_spec(b)?.base().clone(),
                None => std::array::from_fn(|_| HarmonicPolyOneForm::zero()),
            };
            let spec = synthesize(&t, p, base, &quad)?;
            emit(&cli.out, (spec.to_json_string()? + "\n").as_bytes())?;
        }
        Command::Perturb { spec, p, mu } => {
            cli.format(Format::Json, &[Format::Json])?;
            let (s, rep) = perturb_nondegenerate(&load_spec(spec)?, p, *mu, &quad)?;
            eprintln!(
                "mu before {:?}, after {:?}{}",
                rep.mu_before,
                rep.mu_after,
                if rep.regularized { " (M regularized first)" } else { "" }
            );
            emit(&cli.out, (s.to_json_string()? + "\n").as_bytes())?;
        }
        Command::Reduce(cmd) => run_reduce(cli, cmd, &quad)?,
        Command::Verify { only, reduce_starts } => {
            let f = cli.format(Format::Text, &[Format::Text, Format::Json])?;
            if let Some(ids) = only {
                if ids.iter().any(|i| !verify::ALL_CHECKS.contains(i)) {
                    return Err(Failure::Config(format!("--only ids must lie in 1..=15, got {ids:?}")));
                }
            }
            let cfg = VerifyConfig { quad, seed: cli.seed, only: only.clone(), reduce_starts: *reduce_starts };
            let report = verify::run(&cfg, |c| {
                eprintln!("{} {:>2} {} ({:.1}s)", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.seconds)
            });
            let body = match f {
                Format::Json => json(&report)?,
                _ => report.to_text().into_bytes(),
            };
            emit(&cli.out, &body)?;
            return Ok(if report.all_passed() { 0 } else { 1 });
        }
    }
    Ok(0)
}

fn run_reduce(cli: &Cli, cmd: &ReduceCmd, quad: &QuadratureSpec) -> Result<(), Failure> {
    cli.format(Format::Json, &[Format::Json])?;
    let body = match cmd {
        ReduceCmd::Find { spec, eps, window, strategy, starts, grid } => {
            let spec = load_spec(spec)?;
            let w = window_of(window, &spec, quad)?;
            let opts = SearchOptions { strategy: *strategy, n_starts: *starts, grid: *grid, seed: cli.seed, ..Default::default() };
            let found = find_critical(&spec, &w, *eps, &opts, quad)?;
            #[derive(Serialize)]
            struct Out {
                window: SearchWindow,
                epsilon: f64,
                critical: Vec<crate::reduced::ReducedCritical>,
            }
            json(&versioned(Out { window: w, epsilon: *eps, critical: found }))?
        }
        ReduceCmd::Window { spec, c0, d0, probe } => {
            json(&versioned(suggest_window(&load_spec(spec)?, *c0, *d0, *probe, quad)?))?
        }
        ReduceCmd::Invariance { spec, eps, window, samples } => {
            let spec = load_spec(spec)?;
            let w = window_of(window, &spec, quad)?;
            #[derive(Serialize)]
            struct Out {
                window: SearchWindow,
                epsilon: f64,
                #[serde(flatten)]
                report: crate::reduced::InvarianceReport,
            }
            let report = check_flow_invariance(&spec, &w, *eps, *samples, cli.seed, quad)?;
            json(&versioned(Out { window: w, epsilon: *eps, report }))?
        }
        ReduceCmd::Stilde { spec, p0, eta, eps, samples } => {
            json(&versioned(stilde_set(&load_spec(spec)?, p0, *eta, *eps, *samples, cli.seed, quad)?))?
        }
    };
    emit(&cli.out, &body)
}

/// Parse `args`, run, and map failures to exit codes (2 for usage and
/// configuration errors, 1 otherwise).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}


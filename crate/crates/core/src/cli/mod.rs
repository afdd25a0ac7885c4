//! Batch front end behind the `roa` binary: problem files in, certificates,
//! tables, grids and figures out.
//!
//! Exit codes: 0 verified, 1 invalid input, 2 falsified, 3 solver failure.

mod problem;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::dynamics::{reverse_time_orbit, DynamicsError, Oracle};
use crate::pipeline::{
    apply_grid_verification, degree_sweep, estimate_roa, inspect_failure, validate_degrees,
    verify_grid, Certificate, CertificateStatus, PipelineError,
};
use crate::plot::{level_set, svg, Figure, Grid, LevelSet, PlotError, Provenance};
use crate::sos::SosError;

pub use problem::{
    content_hash, Degrees, OracleBlock, ProblemFile, SpecBlock, Term, PROBLEM_SCHEMA,
};

/// Environment variable read for `--out` when the flag is absent.
pub const OUT_ENV: &str = "ROACERT_OUT";

/// Grid nodes above which the n > 3 fallback grid is coarsened.
const MAX_GRID_NODES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Verified = 0,
    Invalid = 1,
    Falsified = 2,
    SolverFailure = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn of(status: CertificateStatus) -> Exit {
        match status {
            CertificateStatus::Verified | CertificateStatus::Empty => Exit::Verified,
            CertificateStatus::Falsified => Exit::Falsified,
            CertificateStatus::Unverified | CertificateStatus::Unchecked => Exit::SolverFailure,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

impl CliError {
    pub fn exit(&self) -> Exit {
        match self {
            CliError::Pipeline(PipelineError::Sdp(_) | PipelineError::Solver { .. }) => {
                Exit::SolverFailure
            }
            CliError::Pipeline(PipelineError::Sos(
                SosError::SolverFailure { .. }
                | SosError::Mismatch(_)
                | SosError::BasisTooSmall { .. },
            )) => Exit::SolverFailure,
            CliError::Pipeline(PipelineError::Dynamics(DynamicsError::StepUnderflow {
                ..
            }))
            | CliError::Dynamics(DynamicsError::StepUnderflow { .. }) => Exit::SolverFailure,
            _ => Exit::Invalid,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "roa",
    version,
    about = "Certified inner approximations of regions of attraction"
)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify one degree, verify by simulation and write the certificate.
    Solve(SolveArgs),
    /// Certify every degree of the problem's list and write a table.
    Sweep(SweepArgs),
    /// Evaluate W, V, F_η and membership at the points of a file.
    Oracle(OracleArgs),
    /// Grid values, level-1 contours and an SVG figure for a certificate.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Problem file (JSON).
    #[arg(long)]
    pub problem: PathBuf,
    /// Overrides the problem's degree.
    #[arg(long)]
    pub degree: Option<u32>,
    /// Overrides the sampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the number of verification samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Overrides the interior-point tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Also verify on a grid with this many points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated degree list replacing the problem's.
    #[arg(long, value_delimiter = ',', conflicts_with = "degree")]
    pub degrees: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// One point per line, comma-separated coordinates, `#` comments.
    #[arg(long)]
    pub points: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Certificate written by `solve` or `sweep`.
    #[arg(long)]
    pub certificate: PathBuf,
    /// Points per axis (default 201, or 41 in three dimensions).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Problem file, hashed into the figure and needed for `--boundary`.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Overlay a reverse-time orbit, which traces the boundary when it is an
    /// unstable limit cycle (2-D only).
    #[arg(long, requires = "problem")]
    pub boundary: bool,
}

/// What a command did.
#[derive(Debug)]
pub struct Outcome {
    pub exit: Exit,
    pub written: Vec<PathBuf>,
    pub summary: String,
}

/// Parses `args` (program name first), runs, prints, and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Exit::Invalid.code()
            } else {
                0
            };
        }
    };
    match run(&cli) {
        Ok(o) => {
            println!("{}", o.summary);
            for p in &o.written {
                println!("wrote {}", p.display());
            }
            o.exit.code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit().code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    fs::create_dir_all(&cli.out).map_err(|e| io(&cli.out, e))?;
    match &cli.command {
        Command::Solve(a) => solve(a, &cli.out),
        Command::Sweep(a) => sweep(a, &cli.out),
        Command::Oracle(a) => oracle(a, &cli.out),
        Command::Plot(a) => plot(a, &cli.out),
    }
}

fn io(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| io(path, e))
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::write(&path, contents).map_err(|e| io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Reads a problem file and applies the overrides.
pub fn load_problem(run: &RunArgs) -> Result<(ProblemFile, String), CliError> {
    let bytes = read(&run.problem)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| CliError::Invalid(format!("problem file: {e}")))?;
    let mut p = ProblemFile::parse(&text)?;
    if let Some(d) = run.degree {
        p.spec.degree = Degrees::One(d);
    }
    if let Some(s) = run.seed {
        p.oracle.seed = s;
    }
    if let Some(n) = run.samples {
        p.oracle.samples = n;
    }
    if let Some(t) = run.tol {
        p.spec.tol = t;
    }
    Ok((p, content_hash(&bytes)))
}

fn certificate_path(out: &Path, name: &str, degree: u32) -> PathBuf {
    out.join(format!("{name}-d{degree}.cert.json"))
}

/// Runs the full pipeline at the problem's degree (the largest, for a list).
pub fn solve(a: &SolveArgs, out: &Path) -> Result<Outcome, CliError> {
    let (p, hash) = load_problem(&a.run)?;
    let degree = *p
        .spec
        .degree
        .list()
        .iter()
        .max()
        .ok_or_else(|| CliError::Usage("the problem's degree list is empty".into()))?;
    let f = p.vector_field()?;
    let spec = p.roa_spec(degree)?;
    let cfg = p.oracle_config()?;
    let mut cert = match estimate_roa(&f, &spec, &cfg) {
        Ok(mut cert) => {
            if let Some(g) = a.grid {
                let report = verify_grid(&cert, &f, &cfg, &vec![g; f.nvars()])?;
                apply_grid_verification(&mut cert, report);
            }
            cert
        }
        Err(PipelineError::Solver { solution, .. }) => inspect_failure(&f, &spec, &solution)?,
        Err(e) => return Err(e.into()),
    };
    cert.problem_file_sha256 = Some(hash);
    let mut written = Vec::new();
    write(
        certificate_path(out, &p.name, degree),
        &cert.to_json(),
        &mut written,
    )?;
    let volume = cert.volume.map_or("n/a".to_string(), |v| {
        format!("{:.4} ± {:.4}", v.value, v.std_error)
    });
    Ok(Outcome {
        exit: Exit::of(cert.status),
        written,
        summary: format!(
            "{} d={degree}: {:?}, solver {:?}, objective {:.6}, volume {volume}",
            p.name, cert.status, cert.solver.status, cert.objective
        ),
    })
}

pub fn sweep(a: &SweepArgs, out: &Path) -> Result<Outcome, CliError> {
    let (p, hash) = load_problem(&a.run)?;
    let degrees = a.degrees.clone().unwrap_or_else(|| p.spec.degree.list());
    validate_degrees(&degrees).map_err(|e| CliError::Usage(e.to_string()))?;
    let f = p.vector_field()?;
    let spec = p.roa_spec(degrees[0])?;
    let cfg = p.oracle_config()?;
    let table = degree_sweep(&f, &spec, &degrees, &cfg)?;
    let mut written = Vec::new();
    let csv = table
        .to_csv()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    write(
        out.join(format!("{}-sweep.csv", p.name)),
        &csv,
        &mut written,
    )?;
    let mut exit = Exit::Verified;
    for (row, cert) in table.rows.iter().zip(&table.certificates) {
        let e = match cert {
            Some(c) => {
                let mut c = c.clone();
                c.problem_file_sha256 = Some(hash.clone());
                write(
                    certificate_path(out, &p.name, row.degree),
                    &c.to_json(),
                    &mut written,
                )?;
                Exit::of(c.status)
            }
            None => Exit::SolverFailure,
        };
        exit = worse(exit, e);
    }
    let failed = table.rows.iter().filter(|r| r.failed()).count();
    Ok(Outcome {
        exit,
        written,
        summary: format!(
            "{}: {} degrees, {failed} failed, oracle volume {:.4} ± {:.4}, D_V non-increasing {}",
            p.name,
            degrees.len(),
            table.oracle_volume.value,
            table.oracle_volume.std_error,
            table.dv_nonincreasing
        ),
    })
}

/// Falsified outranks solver failure, which outranks success.
fn worse(a: Exit, b: Exit) -> Exit {
    let rank = |e: Exit| match e {
        Exit::Verified => 0,
        Exit::Invalid => 1,
        Exit::SolverFailure => 2,
        Exit::Falsified => 3,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

/// A points file row that could not be used.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based data row.
    pub row: usize,
    pub line: u64,
    pub message: String,
}

/// Parses a points file. Good rows come back as points, bad ones as errors
/// carrying their row index.
pub fn parse_points(text: &str, nvars: usize) -> Vec<Result<Vec<f64>, RowError>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let err = |line: u64, message: String| RowError {
                row: i + 1,
                line,
                message,
            };
            let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != nvars {
                return Err(err(
                    line,
                    format!("expected {nvars} coordinates, found {}", rec.len()),
                ));
            }
            rec.iter()
                .map(|s| match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(err(line, format!("{s:?} is not a finite number"))),
                })
                .collect()
        })
        .collect()
}

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        v.to_string()
    }
}

pub fn oracle(a: &OracleArgs, out: &Path) -> Result<Outcome, CliError> {
    let run = RunArgs {
        problem: a.problem.clone(),
        degree: None,
        seed: None,
        samples: None,
        tol: None,
    };
    let (p, _) = load_problem(&run)?;
    let f = p.vector_field()?;
    let cfg = p.oracle_config()?;
    let oracle = Oracle::new(&f, &cfg)?;
    let text = String::from_utf8(read(&a.points)?)
        .map_err(|e| CliError::Invalid(format!("points file: {e}")))?;
    let parsed = parse_points(&text, p.nvars);
    let good: Vec<Vec<f64>> = parsed
        .iter()
        .filter_map(|r| r.as_ref().ok().cloned())
        .collect();
    let mut results = oracle
        .evaluate_batch(&good, p.spec.lambda, p.spec.beta)
        .into_iter();

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=p.nvars).map(|i| format!("x{i}")).collect();
    header.extend(
        [
            "class", "W", "W_lower", "W_upper", "V", "V_lower", "V_upper", "F_eta", "error",
        ]
        .map(String::from),
    );
    let csv_err = |e: csv::Error| CliError::Invalid(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    let mut bad = 0;
    for r in &parsed {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        match r {
            Ok(x) => {
                record.extend(x.iter().map(|v| v.to_string()));
                match results.next().expect("one result per good row") {
                    Ok(row) => {
                        record.push(format!("{:?}", row.membership));
                        for v in [row.w, row.v] {
                            record.extend([fmt(v.value), fmt(v.lower), fmt(v.upper)]);
                        }
                        record.push(row.entry_time.map_or("inf".into(), fmt));
                        record.push(String::new());
                    }
                    Err(e) => {
                        record.push("Error".into());
                        record.extend(std::iter::repeat_n(String::new(), 7));
                        record.push(e.to_string());
                    }
                }
            }
            Err(e) => {
                bad += 1;
                eprintln!("points row {} (line {}): {}", e.row, e.line, e.message);
                record.extend(std::iter::repeat_n(String::new(), p.nvars));
                record.push("Rejected".into());
                record.extend(std::iter::repeat_n(String::new(), 7));
                record.push(format!("row {}: {}", e.row, e.message));
            }
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let mut written = Vec::new();
    write(
        out.join(format!("{}-oracle.csv", p.name)),
        &String::from_utf8_lossy(&bytes),
        &mut written,
    )?;
    Ok(Outcome {
        exit: if bad > 0 {
            Exit::Invalid
        } else {
            Exit::Verified
        },
        written,
        summary: format!(
            "{}: {} points evaluated, {bad} rows rejected",
            p.name,
            good.len()
        ),
    })
}

pub fn plot(a: &PlotArgs, out: &Path) -> Result<Outcome, CliError> {
    let text = String::from_utf8(read(&a.certificate)?)
        .map_err(|e| CliError::Invalid(format!("certificate: {e}")))?;
    let cert = Certificate::from_json(&text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let n = cert.nvars();
    let points = a.grid.unwrap_or(if n >= 3 { 41 } else { 201 });
    let stem = a
        .certificate
        .file_name()
        .and_then(|s| s.to_str())
        .map(|s| {
            s.trim_end_matches(".json")
                .trim_end_matches(".cert")
                .to_string()
        })
        .unwrap_or_else(|| "certificate".into());
    let domain = &cert.spec.domain;
    let mut written = Vec::new();

    // The grid is written first so it exists even for unsupported dimensions.
    let per_axis = if n > 3 {
        points.min(coarsened(n))
    } else {
        points
    };
    let grid =
        Grid::sample(&cert.p_d, domain, per_axis).map_err(|e| CliError::Invalid(e.to_string()))?;
    write(
        out.join(format!("{stem}-grid.csv")),
        &grid.to_csv(),
        &mut written,
    )?;
    let ls = match level_set(&cert.p_d, domain, points, 1.0) {
        Ok(ls) => ls,
        Err(PlotError::Unsupported(k)) => {
            return Ok(Outcome {
                exit: Exit::Invalid,
                written,
                summary: format!(
                    "{stem}: plots support 1 to 3 variables, the certificate has {k}; grid written"
                ),
            })
        }
        Err(e) => return Err(CliError::Invalid(e.to_string())),
    };
    let json = serde_json::to_string_pretty(&ls).expect("level set serializes") + "\n";
    write(
        out.join(format!("{stem}-levelset.json")),
        &json,
        &mut written,
    )?;

    let mut hash = cert.problem_file_sha256.clone();
    let mut boundary = None;
    if let Some(path) = &a.problem {
        let run = RunArgs {
            problem: path.clone(),
            degree: None,
            seed: None,
            samples: None,
            tol: None,
        };
        let (p, h) = load_problem(&run)?;
        hash = Some(h);
        if a.boundary {
            if n != 2 {
                return Err(CliError::Usage("--boundary needs a 2-D problem".into()));
            }
            boundary = Some(limit_cycle(&p, &cert)?);
        }
    }
    let provenance = Provenance {
        seed: cert.spec.seed,
        tol: cert.spec.tol,
        problem_sha256: hash,
        degree: cert.spec.degree,
    };
    let fig = Figure {
        domain,
        radius: cert.spec.radius,
        level_set: &ls,
        profile: Some(&cert.p_d),
        boundary: boundary.as_deref(),
        provenance: &provenance,
    };
    write(out.join(format!("{stem}.svg")), &svg(&fig), &mut written)?;
    let summary = match &ls {
        LevelSet::Crossings(xs) => format!("{stem}: P_d = 1 at {xs:?}"),
        LevelSet::Contours(c) => format!("{stem}: {} level-1 polylines", c.len()),
        LevelSet::Slices { slices, cloud } => {
            format!(
                "{stem}: {} slices, {} isosurface points",
                slices.len(),
                cloud.len()
            )
        }
    };
    Ok(Outcome {
        exit: Exit::Verified,
        written,
        summary,
    })
}

/// Points per axis keeping an n-dimensional grid under `MAX_GRID_NODES`.
fn coarsened(n: usize) -> usize {
    ((MAX_GRID_NODES as f64).powf(1.0 / n as f64).floor() as usize).max(2)
}

/// Reverse-time orbit started just off the origin. The origin repels in
/// reverse time, so the orbit settles on the boundary cycle if there is one.
fn limit_cycle(p: &ProblemFile, cert: &Certificate) -> Result<Vec<Vec<f64>>, CliError> {
    let f = p.vector_field()?;
    let cfg = p.oracle_config()?;
    let start = [0.05 * cert.spec.radius, 0.0];
    let orbit = reverse_time_orbit(&f, &start, 60.0, 20.0, &cfg)?;
    if let Some(x) = orbit.last() {
        if x.iter().map(|v| v * v).sum::<f64>().sqrt() >= cfg.escape_radius {
            return Err(CliError::Invalid(
                "reverse-time orbit escaped; no boundary cycle found".into(),
            ));
        }
    }
    Ok(orbit)
}

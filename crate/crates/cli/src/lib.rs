//! Argument parsing and command dispatch for the `cookiewalk` binary.
//!
//! Every JSON artifact carries the resolved [`RunConfig`] under `"config"`;
//! `cookiewalk replay <artifact>` runs it again and reproduces the artifact
//! byte for byte.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cookiewalk::classify::{phase_boundary, verdict_with, ClassifyError, Family, Outcome, DEFAULT_TOL};
use cookiewalk::simulate::walk::{DEFAULT_ABSORB_HEIGHT, DEFAULT_STUCK_STEP_BUDGET};
use cookiewalk::simulate::{
    extinction_probability, lambda_tail_slope, speed_estimate, stuck_probability, z_moments, LCaps, SimError,
    DEFAULT_SEED,
};
use cookiewalk::spectral::{lambda_max, SpectralError, TruncationOptions, DEFAULT_N_MAX};
use cookiewalk::{CookieEnvironment, CookieMatrix};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

/// Bisection tolerance of `phase-scan`.
pub const DEFAULT_BISECT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Classify(ClassifyError::Inconclusive { .. }) => EXIT_INCONCLUSIVE,
            CliError::Classify(ClassifyError::Spectral(SpectralError::BudgetExceeded { .. }))
            | CliError::Spectral(SpectralError::BudgetExceeded { .. })
            | CliError::Sim(SimError::ArenaLimit { .. } | SimError::UndecidedReplicas { .. }) => EXIT_BUDGET,
            _ => EXIT_FAILURE,
        }
    }
}

/// Parameter grid, written `start:stop:step` or as a comma-separated list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.contains(':') {
            let parts = parse_floats(s, ':')?;
            let [start, stop, step] = parts[..] else {
                return Err(format!("expected start:stop:step, got {s:?}"));
            };
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(format!("grid {s:?} needs step > 0 and stop >= start"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok(Grid((0..=n).map(|k| start + k as f64 * step).collect()))
        } else {
            Ok(Grid(parse_floats(s, ',')?))
        }
    }
}

/// Comma-separated cookie strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Strengths(pub Vec<f64>);

impl FromStr for Strengths {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_floats(s, ',').map(Strengths)
    }
}

fn parse_floats(s: &str, sep: char) -> Result<Vec<f64>, String> {
    s.split(sep)
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("{t:?} is not a number")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// `(p; q)` on a grid of q, boundary in p.
    OnceExcited,
    /// `(p; q)` on a grid of p, boundary in q.
    OnceExcitedQ,
    /// `(p, p, 0, ..., 0; q)` with `--m` zeros on a grid of q, boundary in p.
    PairZeros,
    /// `(0, ..., 0; q)` for `M = 1..=--m`, boundary in q.
    Digging,
}

/// Environment as given on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub b: u32,
    pub p: Vec<f64>,
    pub q: f64,
    pub allow_zero_q: bool,
}

impl EnvConfig {
    pub fn build(&self) -> Result<CookieEnvironment, CliError> {
        if self.q == 0.0 && !self.allow_zero_q {
            return Err(CliError::Usage("--q 0 requires --allow-zero-q".into()));
        }
        let built = if self.q == 0.0 {
            CookieEnvironment::zero_q(self.b, self.p.clone())
        } else {
            CookieEnvironment::new(self.b, self.p.clone(), self.q)
        };
        built.map_err(|e| CliError::Usage(format!("invalid environment (--b/--p/--q): {e}")))
    }

    fn with_first(&self, p1: f64) -> EnvConfig {
        let mut cfg = self.clone();
        cfg.p[0] = p1;
        cfg
    }
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Classify {
        env: EnvConfig,
        tol: f64,
        trunc_max: usize,
    },
    Matrix {
        env: EnvConfig,
        rows: usize,
        cols: usize,
    },
    Spectral {
        env: EnvConfig,
        tol: f64,
        trunc_max: usize,
    },
    Speed {
        env: EnvConfig,
        steps: u64,
        replicas: usize,
        seed: u64,
        p_grid: Option<Grid>,
    },
    PhaseScan {
        family: FamilyKind,
        b: u32,
        grid: Grid,
        m: usize,
        tol: f64,
        bisect_tol: f64,
    },
    Stuck {
        env: EnvConfig,
        replicas: usize,
        seed: u64,
        absorb_height: u64,
        step_budget: u64,
    },
    Branching {
        env: EnvConfig,
        start: u64,
        replicas: usize,
        seed: u64,
        gen_cap: u64,
        pop_cap: u64,
        lambda_cap: Option<u64>,
    },
    Zchain {
        env: EnvConfig,
        start: u64,
        steps: u64,
        replicas: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub command: Command,
    pub format: Format,
    /// Results do not depend on it, so it is left out of artifacts.
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "cookiewalk", version, about = "Multi-excited random walks on regular trees")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Output format [default: json].
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file [default: standard output].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads [default: all cores].
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct EnvArgs {
    /// Children per vertex.
    #[arg(long, default_value_t = 2)]
    b: u32,
    /// Cookie strengths, e.g. 0.5,0.8,0,0 [default: one cookie of strength q].
    #[arg(long)]
    p: Option<Strengths>,
    /// Step law once the cookies are used up.
    #[arg(long)]
    q: f64,
    /// Admit q = 0.
    #[arg(long)]
    allow_zero_q: bool,
}

impl EnvArgs {
    fn resolve(self) -> Result<EnvConfig, CliError> {
        let cfg = EnvConfig {
            b: self.b,
            p: self.p.map_or_else(|| vec![self.q], |s| s.0),
            q: self.q,
            allow_zero_q: self.allow_zero_q,
        };
        cfg.build()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SpectralArgs {
    /// Half-width of the critical band around 1/b.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Largest truncation window for the infinite class.
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    trunc_max: usize,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Recurrence or transience verdict.
    Classify {
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        spectral: SpectralArgs,
    },
    /// Entries p(i, j) and the class decomposition.
    Matrix {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, default_value_t = 12)]
        rows: usize,
        #[arg(long, default_value_t = 12)]
        cols: usize,
    },
    /// Class radii and the largest one.
    Spectral {
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        spectral: SpectralArgs,
    },
    /// Speed and fluctuation of the walk, optionally over a grid of p1.
    Speed {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = 40)]
        replicas: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Values of p1, as start:stop:step or a list.
        #[arg(long)]
        p_grid: Option<Grid>,
    },
    /// Recurrence/transience boundary along a grid.
    PhaseScan {
        #[arg(long, value_enum)]
        family: FamilyKind,
        #[arg(long, default_value_t = 2)]
        b: u32,
        #[arg(long)]
        q_grid: Option<Grid>,
        #[arg(long)]
        p_grid: Option<Grid>,
        /// Number of zero cookies (pair-zeros) or largest M (digging).
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Half-width of the critical band around 1/b.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_BISECT_TOL)]
        bisect_tol: f64,
    },
    /// Probability of getting stuck at the root (q = 0).
    Stuck {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, default_value_t = 100_000)]
        replicas: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ABSORB_HEIGHT)]
        absorb_height: u64,
        /// Step budget per replica.
        #[arg(long, default_value_t = DEFAULT_STUCK_STEP_BUDGET)]
        steps: u64,
    },
    /// Extinction of the edge local-time chain, with an optional tail fit.
    Branching {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, default_value_t = 1)]
        start: u64,
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = LCaps::default().gen_cap)]
        gen_cap: u64,
        #[arg(long, default_value_t = LCaps::default().pop_cap)]
        pop_cap: u64,
        /// Also fit the tail of the total local time, censored at this value.
        #[arg(long)]
        lambda_cap: Option<u64>,
    },
    /// Moments of the single-ray chain.
    Zchain {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, default_value_t = 1)]
        start: u64,
        #[arg(long, default_value_t = 200)]
        steps: u64,
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Rerun the configuration embedded in a JSON artifact.
    Replay { artifact: PathBuf },
}

/// Parses a full argument list (including the program name).
///
/// `--help` and `--version` come back as [`clap::Error`]s of the matching
/// kind; everything else that fails is a usage error.
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, ParseFailure>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ParseFailure::Clap)?;
    resolve(cli).map_err(ParseFailure::Cli)
}

#[derive(Debug)]
pub enum ParseFailure {
    Clap(clap::Error),
    Cli(CliError),
}

fn grid(name: &str, g: Option<Grid>) -> Result<Grid, CliError> {
    g.ok_or_else(|| CliError::Usage(format!("this family needs --{name}")))
}

fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let command = match cli.command {
        Cmd::Classify { env, spectral } => Command::Classify {
            env: env.resolve()?,
            tol: spectral.tol,
            trunc_max: spectral.trunc_max,
        },
        Cmd::Matrix { env, rows, cols } => Command::Matrix {
            env: env.resolve()?,
            rows,
            cols,
        },
        Cmd::Spectral { env, spectral } => Command::Spectral {
            env: env.resolve()?,
            tol: spectral.tol,
            trunc_max: spectral.trunc_max,
        },
        Cmd::Speed {
            env,
            steps,
            replicas,
            seed,
            p_grid,
        } => {
            let env = env.resolve()?;
            if let Some(g) = &p_grid {
                for &p1 in &g.0 {
                    env.with_first(p1).build()?;
                }
            }
            Command::Speed {
                env,
                steps,
                replicas,
                seed,
                p_grid,
            }
        }
        Cmd::PhaseScan {
            family,
            b,
            q_grid,
            p_grid,
            m,
            tol,
            bisect_tol,
        } => {
            let grid = match family {
                FamilyKind::OnceExcited | FamilyKind::PairZeros => grid("q-grid", q_grid)?,
                FamilyKind::OnceExcitedQ => grid("p-grid", p_grid)?,
                FamilyKind::Digging => Grid((1..=m).map(|k| k as f64).collect()),
            };
            Command::PhaseScan {
                family,
                b,
                grid,
                m,
                tol,
                bisect_tol,
            }
        }
        Cmd::Stuck {
            env,
            replicas,
            seed,
            absorb_height,
            steps,
        } => Command::Stuck {
            env: env.resolve()?,
            replicas,
            seed,
            absorb_height,
            step_budget: steps,
        },
        Cmd::Branching {
            env,
            start,
            replicas,
            seed,
            gen_cap,
            pop_cap,
            lambda_cap,
        } => Command::Branching {
            env: env.resolve()?,
            start,
            replicas,
            seed,
            gen_cap,
            pop_cap,
            lambda_cap,
        },
        Cmd::Zchain {
            env,
            start,
            steps,
            replicas,
            seed,
        } => Command::Zchain {
            env: env.resolve()?,
            start,
            steps,
            replicas,
            seed,
        },
        Cmd::Replay { artifact } => {
            let mut config = load_config(&artifact)?;
            if let Some(format) = cli.format {
                config.format = format;
            }
            config.threads = cli.threads;
            config.out = cli.out;
            return Ok(config);
        }
    };
    Ok(RunConfig {
        command,
        format: cli.format.unwrap_or_default(),
        threads: cli.threads,
        out: cli.out,
    })
}

/// Reads the configuration embedded in a JSON artifact.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let artifact: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let config = artifact
        .get("config")
        .ok_or_else(|| CliError::Usage(format!("{} has no embedded config", path.display())))?;
    RunConfig::deserialize(config).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Rendered output plus the exit status it should be reported with.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub text: String,
    pub status: i32,
}

struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

struct Output {
    json: Value,
    table: Table,
    status: i32,
}

/// Runs the command on a pool of `config.threads` workers and renders it.
pub fn run(config: &RunConfig) -> Result<Artifact, CliError> {
    let output = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(|| execute(config))?,
        None => execute(config)?,
    };
    let text = match config.format {
        Format::Json => {
            let mut json = output.json;
            json["config"] = serde_json::to_value(config)?;
            serde_json::to_string_pretty(&json)? + "\n"
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(output.table.header)?;
            for row in &output.table.rows {
                w.write_record(row)?;
            }
            let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
            String::from_utf8(bytes).expect("csv output is utf-8")
        }
    };
    Ok(Artifact {
        text,
        status: output.status,
    })
}

/// Writes the artifact to `config.out` or standard output.
pub fn emit(config: &RunConfig, artifact: &Artifact) -> Result<(), CliError> {
    match &config.out {
        Some(path) => std::fs::write(path, &artifact.text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{}", artifact.text);
            Ok(())
        }
    }
}

fn truncation(tol: f64, trunc_max: usize) -> TruncationOptions {
    TruncationOptions {
        tol: tol.min(TruncationOptions::default().tol),
        n_max: trunc_max,
        ..TruncationOptions::default()
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Transient => "Transient",
        Outcome::Recurrent => "Recurrent",
        Outcome::PositiveRecurrent => "PositiveRecurrent",
    }
}

fn execute(config: &RunConfig) -> Result<Output, CliError> {
    match &config.command {
        Command::Classify { env, tol, trunc_max } => {
            let v = verdict_with(&env.build()?, *tol, truncation(*tol, *trunc_max))?;
            Ok(Output {
                json: json!({
                    "verdict": outcome_name(v.outcome),
                    "lambda": v.lambda,
                    "critical": v.critical,
                    "shortcut": v.shortcut,
                    "threshold": v.threshold,
                    "tol": v.tol,
                }),
                table: Table {
                    header: &["verdict", "lambda", "critical", "shortcut", "threshold"],
                    rows: vec![vec![
                        outcome_name(v.outcome).into(),
                        opt_num(v.lambda),
                        v.critical.to_string(),
                        v.shortcut.to_string(),
                        num(v.threshold),
                    ]],
                },
                status: EXIT_OK,
            })
        }
        Command::Matrix { env, rows, cols } => {
            let matrix = CookieMatrix::new(&env.build()?);
            let p: Vec<Vec<f64>> = (0..=*rows)
                .map(|i| (0..=*cols).map(|j| matrix.entry(i, j)).collect())
                .collect();
            let table = Table {
                header: &["i", "j", "p"],
                rows: p
                    .iter()
                    .enumerate()
                    .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &x)| vec![i.to_string(), j.to_string(), num(x)]))
                    .collect(),
            };
            Ok(Output {
                json: json!({ "classes": matrix.decomposition(), "p": p }),
                table,
                status: EXIT_OK,
            })
        }
        Command::Spectral { env, tol, trunc_max } => {
            let spectrum = lambda_max(&env.build()?, truncation(*tol, *trunc_max))?;
            let rows = spectrum
                .radii
                .iter()
                .map(|r| {
                    vec![
                        r.lo.to_string(),
                        r.hi.map(|h| h.to_string()).unwrap_or_default(),
                        num(r.radius),
                        serde_json::to_value(r.method).map(|m| m.as_str().unwrap_or_default().to_string()).unwrap_or_default(),
                        spectrum.converged.to_string(),
                    ]
                })
                .collect();
            Ok(Output {
                status: if spectrum.converged { EXIT_OK } else { EXIT_BUDGET },
                json: json!({ "spectrum": spectrum }),
                table: Table {
                    header: &["lo", "hi", "radius", "method", "converged"],
                    rows,
                },
            })
        }
        Command::Speed {
            env,
            steps,
            replicas,
            seed,
            p_grid,
        } => {
            let envs: Vec<EnvConfig> = match p_grid {
                Some(g) => g.0.iter().map(|&p1| env.with_first(p1)).collect(),
                None => vec![env.clone()],
            };
            let mut json_rows = Vec::new();
            let mut rows = Vec::new();
            for cfg in &envs {
                let r = speed_estimate(&cfg.build()?, *steps, *replicas, *seed)?;
                rows.push(vec![
                    num(cfg.p[0]),
                    num(r.speed.estimate),
                    num(r.speed.stderr),
                    num(r.sigma.estimate),
                    num(r.sigma.stderr),
                    opt_num(r.normality.map(|a| a.adjusted)),
                ]);
                json_rows.push(json!({ "p1": cfg.p[0], "speed": r }));
            }
            Ok(Output {
                json: json!({ "rows": json_rows }),
                table: Table {
                    header: &["p1", "speed", "speed_stderr", "sigma", "sigma_stderr", "anderson_darling"],
                    rows,
                },
                status: EXIT_OK,
            })
        }
        Command::PhaseScan {
            family,
            b,
            grid,
            m,
            tol,
            bisect_tol,
        } => phase_scan(*family, *b, grid, *m, *tol, *bisect_tol),
        Command::Stuck {
            env,
            replicas,
            seed,
            absorb_height,
            step_budget,
        } => {
            let r = stuck_probability(&env.build()?, *replicas, *seed, *absorb_height, *step_budget)?;
            Ok(Output {
                table: Table {
                    header: &["estimate", "stderr", "absorbed", "drifting", "undecided", "closed_form"],
                    rows: vec![vec![
                        num(r.report.estimate),
                        num(r.report.stderr),
                        r.absorbed.to_string(),
                        r.drifting.to_string(),
                        r.undecided.to_string(),
                        opt_num(r.closed_form),
                    ]],
                },
                json: json!({ "stuck": r }),
                status: EXIT_OK,
            })
        }
        Command::Branching {
            env,
            start,
            replicas,
            seed,
            gen_cap,
            pop_cap,
            lambda_cap,
        } => {
            let e = env.build()?;
            let caps = LCaps {
                gen_cap: *gen_cap,
                pop_cap: *pop_cap,
                lambda_cap: None,
            };
            let ext = extinction_probability(&e, *start, *replicas, caps, *seed);
            let tail = match lambda_cap {
                Some(cap) => Some(lambda_tail_slope(&e, *start, *replicas, *seed, *cap)?),
                None => None,
            };
            Ok(Output {
                table: Table {
                    header: &["extinction", "stderr", "died_out", "censored", "replicas", "tail_slope", "tail_stderr"],
                    rows: vec![vec![
                        num(ext.report.estimate),
                        num(ext.report.stderr),
                        ext.died_out.to_string(),
                        ext.censored.to_string(),
                        ext.report.replicas.to_string(),
                        opt_num(tail.as_ref().map(|t| t.slope)),
                        opt_num(tail.as_ref().map(|t| t.stderr)),
                    ]],
                },
                json: json!({ "extinction": ext, "tail": tail }),
                status: EXIT_OK,
            })
        }
        Command::Zchain {
            env,
            start,
            steps,
            replicas,
            seed,
        } => {
            let z = z_moments(&env.build()?, *start, *steps, *replicas, *seed);
            let rows = (0..z.first.len())
                .map(|n| vec![n.to_string(), num(z.first[n]), num(z.second[n]), num(z.fourth[n])])
                .collect();
            Ok(Output {
                table: Table {
                    header: &["n", "first", "second", "fourth"],
                    rows,
                },
                json: json!({ "moments": z }),
                status: EXIT_OK,
            })
        }
    }
}

fn phase_scan(family: FamilyKind, b: u32, grid: &Grid, m: usize, tol: f64, bisect_tol: f64) -> Result<Output, CliError> {
    let crit = b as f64 / (b as f64 + 1.0);
    let p_range = (0.0, 1.0 - 1e-9);
    let q_range = (1e-6, crit);
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    let mut status = EXIT_OK;
    for &x in &grid.0 {
        let (fam, range) = match family {
            FamilyKind::OnceExcited => (Family::once_excited_p(b, x), p_range),
            FamilyKind::OnceExcitedQ => (Family::once_excited_q(b, x), q_range),
            FamilyKind::PairZeros => (Family::pair_zeros_p(b, m, x), p_range),
            FamilyKind::Digging => (Family::digging_q(b, x as usize), q_range),
        };
        let (boundary, bracket, state) = match phase_boundary(&fam, range, bisect_tol, tol) {
            Ok(bd) => (Some(bd.param), Some(bd.bracket), "ok".to_string()),
            Err(ClassifyError::NoSignChange(side)) => (None, None, format!("no-sign-change-{side:?}").to_lowercase()),
            Err(ClassifyError::Inconclusive { .. }) => {
                status = EXIT_INCONCLUSIVE;
                (None, None, "inconclusive".into())
            }
            Err(ClassifyError::NonMonotone(_)) => (None, None, "non-monotone".into()),
            Err(ClassifyError::Env(_)) => (None, None, "invalid".into()),
            Err(e) => return Err(e.into()),
        };
        rows.push(vec![
            num(x),
            opt_num(boundary),
            opt_num(bracket.map(|b| b.0)),
            opt_num(bracket.map(|b| b.1)),
            state.clone(),
        ]);
        json_rows.push(json!({ "param": x, "boundary": boundary, "bracket": bracket, "status": state }));
    }
    Ok(Output {
        json: json!({ "rows": json_rows }),
        table: Table {
            header: &["param", "boundary", "bracket_lo", "bracket_hi", "status"],
            rows,
        },
        status,
    })
}

//! Command-line orchestration for `holomoment`: argument parsing, run
//! configuration, the eigenform cache and report emission.
//!
//! Exit status is 0 when every check in the report passes, 1 when any check
//! fails or a computation errors, and 2 for configuration errors.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use holomoment::forms::EigenformStore;
use serde::Serialize;

mod commands;
pub mod report;

pub use report::{Check, Report, Table};

/// Environment variable naming the eigenform cache directory.
pub const CACHE_ENV: &str = "HOLOMOMENT_CACHE";

#[derive(Debug, Parser)]
#[command(name = "holomoment", version, about = "Fourth moments of level-one holomorphic cusp forms, checked numerically")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Eigenform cache directory; in-memory only when unset.
    #[arg(long, global = true, env = CACHE_ENV)]
    pub cache: Option<PathBuf>,
    /// Ignore and overwrite existing cache files.
    #[arg(long, global = true)]
    pub rebuild_cache: bool,
    /// Write report.json and CSV tables into this directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Leave the timestamp out of the report.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Relative tolerance of fundamental-domain quadratures.
    #[arg(long, global = true, default_value_t = holomoment::moments::QUAD_TOL)]
    pub quad_tol: f64,
    /// ε of the region definitions and summation ranges.
    #[arg(long, global = true, default_value_t = holomoment::moments::DEFAULT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Hecke eigenforms of the given weights.
    Forms {
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        /// Coefficients to compute and list.
        #[arg(long, default_value_t = 30)]
        n: usize,
    },
    /// One Kloosterman sum and its Weil bound.
    Kloosterman {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        c: u64,
    },
    /// `J_l(x)` with the method used.
    Bessel {
        #[arg(long)]
        l: i64,
        #[arg(long)]
        x: f64,
        #[arg(long, value_enum, default_value_t = BesselChoice::Auto)]
        method: BesselChoice,
    },
    /// L-values of the eigenforms of weight `k` (and of `g` in weight `2k`).
    Lvalue {
        #[arg(long, value_enum)]
        kind: LKind,
        #[arg(long)]
        k: u32,
        /// Restrict to one `f`.
        #[arg(long)]
        f_index: Option<usize>,
        /// Restrict to one `g`.
        #[arg(long)]
        g_index: Option<usize>,
        #[arg(long, value_enum, default_value_t = Sym2Choice::Dirichlet)]
        method: Sym2Choice,
        /// Mollifier parameter.
        #[arg(long, default_value_t = 0.09)]
        delta: f64,
    },
    /// Both sides of the Petersson formula for `n, m ≤ nmax`.
    PeterssonVerify {
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long, default_value_t = 10)]
        nmax: u64,
        #[arg(long, default_value_t = 200)]
        cmax: u64,
    },
    /// Watson's identity for every pair `(f, g)` in weights `(k, 2k)`.
    WatsonVerify {
        #[arg(long, default_value_t = 12)]
        k: u32,
    },
    /// `||F||₄⁴` spectrally, and directly with `--direct`.
    FourthMoment {
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long)]
        direct: bool,
    },
    /// The smoothed average of `||F||₄⁴` over weights near `K`.
    WindowAverage {
        #[arg(long = "K")]
        big_k: f64,
        #[arg(long = "H")]
        big_h: f64,
    },
    /// The first error term and the region sweep of the off-diagonal sum.
    ErrorSweep {
        #[arg(long = "K", value_delimiter = ',', required = true)]
        big_k: Vec<f64>,
        /// `H = K^θ`.
        #[arg(long, default_value_t = 0.8)]
        h_exponent: f64,
        /// `β` values for the first error term.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        beta: Vec<u64>,
        /// Skip the first error term.
        #[arg(long)]
        no_e1: bool,
    },
    /// The standard check suite up to a weight.
    VerifyAll {
        #[arg(long, default_value_t = 30)]
        max_weight: u32,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Forms { .. } => "forms",
            Command::Kloosterman { .. } => "kloosterman",
            Command::Bessel { .. } => "bessel",
            Command::Lvalue { .. } => "lvalue",
            Command::PeterssonVerify { .. } => "petersson-verify",
            Command::WatsonVerify { .. } => "watson-verify",
            Command::FourthMoment { .. } => "fourth-moment",
            Command::WindowAverage { .. } => "window-average",
            Command::ErrorSweep { .. } => "error-sweep",
            Command::VerifyAll { .. } => "verify-all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BesselChoice {
    Auto,
    Series,
    Quadrature,
    Hankel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LKind {
    Sym2At1,
    CentralG,
    CentralSym2fg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sym2Choice {
    Dirichlet,
    Mollified,
    TraceInversion,
}

/// A validated run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub cache: Option<PathBuf>,
    pub rebuild_cache: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub threads: Option<usize>,
    pub timestamp: bool,
    pub quad_tol: f64,
    pub epsilon: f64,
}

/// Desk caps on `K`.
pub const WINDOW_K_CAP: f64 = 40.0;
pub const SWEEP_K_CAP: f64 = 60.0;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration: exit status 2.
    Config(String),
    /// A computation failed: exit status 1.
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<holomoment::Error> for CliError {
    fn from(e: holomoment::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_weights(ks: &[u32]) -> Result<(), CliError> {
    for &k in ks {
        if k % 2 != 0 || k < 4 {
            return Err(config(format!("weights must be even and at least 4, got {k}")));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let g = cli.global;
        let cfg = RunConfig {
            command: cli.command,
            cache: g.cache,
            rebuild_cache: g.rebuild_cache,
            out: g.out,
            format: g.format,
            threads: g.threads,
            timestamp: !g.no_timestamp,
            quad_tol: g.quad_tol,
            epsilon: g.epsilon,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.quad_tol > 0.0) || !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(config("tolerances must be positive and ε must lie in (0, 1/2)"));
        }
        if self.threads == Some(0) {
            return Err(config("--threads must be at least 1"));
        }
        match &self.command {
            Command::Forms { k, n } => {
                check_weights(k)?;
                if *n == 0 {
                    return Err(config("--n must be positive"));
                }
            }
            Command::Kloosterman { c, .. } if *c == 0 => return Err(config("--c must be positive")),
            Command::Bessel { l, x, .. } if *l < 0 || !(*x >= 0.0) => {
                return Err(config("Bessel needs l ≥ 0 and x ≥ 0"))
            }
            Command::Lvalue { k, kind, delta, method, .. } => {
                check_weights(&[*k])?;
                if *kind != LKind::Sym2At1 && k % 2 != 0 {
                    return Err(config("central values need g of weight 2k with k even"));
                }
                if *method == Sym2Choice::Mollified && !(*delta > 0.0 && *delta < 0.1) {
                    return Err(config("--delta must lie in (0, 1/10)"));
                }
            }
            Command::PeterssonVerify { k, nmax, cmax } => {
                check_weights(k)?;
                if *nmax == 0 || *cmax == 0 {
                    return Err(config("--nmax and --cmax must be positive"));
                }
            }
            Command::WatsonVerify { k } => check_weights(&[*k])?,
            Command::FourthMoment { k, .. } => check_weights(k)?,
            Command::WindowAverage { big_k, big_h } => {
                if !(*big_h > 0.0 && big_h <= big_k) || *big_k > WINDOW_K_CAP {
                    return Err(config(format!("need 0 < H ≤ K ≤ {WINDOW_K_CAP}")));
                }
            }
            Command::ErrorSweep { big_k, h_exponent, beta, .. } => {
                if big_k.iter().any(|k| !(4.0..=SWEEP_K_CAP).contains(k)) {
                    return Err(config(format!("sweep K must lie in [4, {SWEEP_K_CAP}]")));
                }
                if !(*h_exponent > 0.0 && *h_exponent <= 1.0) {
                    return Err(config("--h-exponent must lie in (0, 1]"));
                }
                if beta.contains(&0) {
                    return Err(config("β must be positive"));
                }
            }
            Command::VerifyAll { max_weight } if *max_weight < 12 => {
                return Err(config("--max-weight must be at least 12"));
            }
            _ => {}
        }
        if let Some(dir) = &self.cache {
            std::fs::create_dir_all(dir).map_err(|e| config(format!("cache directory {}: {e}", dir.display())))?;
        }
        Ok(())
    }

    pub fn store(&self) -> Result<EigenformStore, CliError> {
        match &self.cache {
            Some(dir) => EigenformStore::with_dir(dir, self.rebuild_cache)
                .map_err(|e| config(format!("cache directory {}: {e}", dir.display()))),
            None => Ok(EigenformStore::in_memory()),
        }
    }
}

/// Runs one command and returns its report.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Run(e.to_string()))?;
    let store = cfg.store()?;
    let out = pool.install(|| commands::dispatch(cfg, &store))?;
    let timestamp = cfg
        .timestamp
        .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
    let meta = report::Meta {
        tool: "holomoment",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.name().to_string(),
        config: serde_json::json!({
            "command": &cfg.command,
            "quad_tol": cfg.quad_tol,
            "epsilon": cfg.epsilon,
        }),
        timestamp,
    };
    Ok(Report { meta, checks: out.checks, data: out.data, tables: out.tables, summary: out.summary })
}

/// Parses arguments, runs, prints and writes reports; returns the exit status.
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
    let cfg = match RunConfig::from_cli(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return match e {
                CliError::Config(_) => 2,
                CliError::Run(_) => 1,
            };
        }
    };
    match cfg.format {
        Format::Json => print!("{}", report.to_json()),
        Format::Csv => print!("{}", report::csv_string(&report.checks_table())),
        Format::Text => print!("{}", report.to_text()),
    }
    if let Some(dir) = &cfg.out {
        if let Err(e) = report.write_dir(dir) {
            eprintln!("writing {}: {e}", dir.display());
            return 1;
        }
    }
    if report.passed() {
        0
    } else {
        1
    }
}

//! Command-line front end. Exit codes: 0 converged (or exact after
//! breakdown), 1 error, 2 iteration budget exhausted.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};

use crate::bounds::{
    bernstein_rate, chebyshev_min_error, exp_bound_reference, phi_bound, phi_optimal_radius, theorem_bound,
    SpectralInterval,
};
use crate::dense::{ComplexDenseMatrix, ScalarFunction};
use crate::driver::{approximate, sylvester_residual, ApproximationResult, DriverOptions, Termination};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment, Distribution, Experiment, ExperimentConfig};
use crate::frechet::frechet_apply;
use crate::io::{read_matrix_market, write_matrix_market, MatrixData};
use crate::kernels::{BivariateFunction, LowRankRhs};
use crate::krylov::{DenseOperator, LinearOperator};

pub const SEED_ENV: &str = "BIVKRYLOV_SEED";

#[derive(Debug, Parser)]
#[command(name = "bivkrylov", version, about = "Krylov approximation of bivariate matrix functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Approximate f{A,B}(C) or Df{A}(C) for low-rank C and write the factors.
    Solve(SolveArgs),
    /// Run a convergence experiment and write CSV.
    Experiment(ExperimentArgs),
    /// Evaluate the a-priori bounds.
    #[command(subcommand)]
    Bounds(BoundsCommand),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Matrix Market file for A.
    #[arg(long = "a", value_name = "FILE")]
    pub a: Option<PathBuf>,
    /// Matrix Market file for B (default A, or A^T with --frechet).
    #[arg(long = "b", value_name = "FILE")]
    pub b: Option<PathBuf>,
    /// Left factor of C as a Matrix Market vector or n x r matrix (default: seeded random unit vector).
    #[arg(long = "c", value_name = "FILE")]
    pub c: Option<PathBuf>,
    /// Right factor of C (default: same as the left factor).
    #[arg(long = "d", value_name = "FILE")]
    pub d: Option<PathBuf>,
    /// Bivariate function, e.g. `sylvester`, `time-limited:0:1`, `freq-limited:1:inf`, `divdiff:exp`.
    #[arg(long, value_name = "SPEC", conflicts_with = "frechet")]
    pub function: Option<String>,
    /// Frechet derivative mode for a scalar function (`exp`, `sqrt-neg`, `phi`, `cos`, `pow:N`, `inv-shift:A`).
    #[arg(long, value_name = "NAME")]
    pub frechet: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long = "k-max", default_value_t = 300)]
    pub k_max: usize,
    #[arg(long = "l-max")]
    pub l_max: Option<usize>,
    /// Look-ahead window for the error estimate.
    #[arg(long, default_value_t = 2)]
    pub h: usize,
    #[arg(long, default_value_t = 2)]
    pub step: usize,
    /// Grow only the side whose look-ahead changes the result more.
    #[arg(long)]
    pub balance: bool,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for U.mtx, X.mtx, V.mtx and trace.csv.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// gramian, frechet or phi-bounds.
    pub name: String,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Spectrum interval `lo,hi`.
    #[arg(long, default_value = "-100,-0.1", allow_hyphen_values = true)]
    pub interval: String,
    /// spaced or random.
    #[arg(long, default_value = "spaced")]
    pub distribution: String,
    /// Time windows `ts:te,...` for gramian (`inf` allowed).
    #[arg(long, default_value = "0:inf,0.1:inf,1:inf,0:1")]
    pub windows: String,
    /// Scalar functions for frechet.
    #[arg(long, default_value = "exp,sqrt-neg")]
    pub functions: String,
    /// Depths: `a:b`, `a:b:step` or a comma list. Default depends on the experiment.
    #[arg(long)]
    pub ks: Option<String>,
    /// rho values for phi-bounds.
    #[arg(long, default_value = "10,1000")]
    pub rhos: String,
    /// Largest k at which phi-bounds measures the interpolation error.
    #[arg(long = "measure-k-max", default_value_t = 300)]
    pub measure_k_max: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
    /// CSV output file (default stdout).
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BoundsCommand {
    /// phi_bound, exp_bound_reference and the optimal radius.
    Phi {
        #[arg(long)]
        rho: f64,
        /// Depths as for `experiment --ks`.
        #[arg(long)]
        ks: String,
    },
    /// Bernstein ellipse rate of an interval and a singularity.
    Bernstein {
        #[arg(long, allow_hyphen_values = true)]
        interval: String,
        /// `re` or `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        singularity: String,
    },
    /// Chebyshev interpolation error of a scalar function on an interval.
    Chebyshev {
        #[arg(long)]
        function: String,
        #[arg(long, allow_hyphen_values = true)]
        interval: String,
        #[arg(long)]
        degree: usize,
    },
    /// Convergence bound for kernels of the form g(x + y).
    Theorem {
        #[arg(long)]
        function: String,
        #[arg(long, allow_hyphen_values = true)]
        ea: String,
        #[arg(long, allow_hyphen_values = true)]
        eb: String,
        #[arg(long)]
        ks: String,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        #[arg(long = "c-norm", default_value_t = 1.0)]
        c_norm: f64,
        #[arg(long = "d-norm", default_value_t = 1.0)]
        d_norm: f64,
    },
}

/// Error tagged with the flag it concerns.
#[derive(Debug)]
pub struct CliError {
    pub flag: Option<&'static str>,
    pub error: Error,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.flag {
            Some(flag) => write!(f, "{flag}: {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

fn at(flag: &'static str) -> impl Fn(Error) -> CliError {
    move |error| CliError { flag: Some(flag), error }
}

fn plain(error: Error) -> CliError {
    CliError { flag: None, error }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => solve(&args),
        Command::Experiment(args) => experiment(&args).map(|_| 0),
        Command::Bounds(cmd) => bounds(&cmd).map(|_| 0),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        t => t
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("invalid number `{t}`"))),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_f64).collect()
}

fn parse_interval(s: &str) -> Result<SpectralInterval> {
    match parse_list(s)?.as_slice() {
        &[lo, hi] => SpectralInterval::new(lo, hi),
        _ => Err(Error::InvalidConfig(format!("expected `lo,hi`, got `{s}`"))),
    }
}

/// `a:b`, `a:b:step` or `k1,k2,...`.
pub fn parse_ks(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidConfig(format!("invalid depth list `{s}`"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    let ks: Vec<usize> = match parts.as_slice() {
        [single] => single.split(',').map(num).collect::<Result<_>>()?,
        [a, b] => (num(a)?..=num(b)?).collect(),
        [a, b, step] => {
            let step = num(step)?;
            if step == 0 {
                return Err(bad());
            }
            (num(a)?..=num(b)?).step_by(step).collect()
        }
        _ => return Err(bad()),
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

fn load_operator(data: MatrixData) -> Result<Box<dyn LinearOperator>> {
    let (r, c) = data.shape();
    if r != c {
        return Err(Error::DimensionMismatch(format!("operator must be square, file holds {r}x{c}")));
    }
    Ok(match data {
        MatrixData::Dense(m) => Box::new(DenseOperator::new(m)?),
        MatrixData::Sparse(s) => Box::new(s),
    })
}

fn transpose_data(data: &MatrixData) -> Result<MatrixData> {
    Ok(match data {
        MatrixData::Dense(m) => MatrixData::Dense(m.transpose()),
        MatrixData::Sparse(s) => MatrixData::Sparse(s.transpose()),
    })
}

fn load_factor(path: &Path, n: usize) -> Result<Vec<Vec<Complex64>>> {
    let m = read_matrix_market(path)?.to_dense();
    let m = if m.rows() == n { m } else if m.cols() == n && m.rows() == 1 { m.transpose() } else {
        return Err(Error::DimensionMismatch(format!(
            "factor is {}x{}, operator dimension is {n}",
            m.rows(),
            m.cols()
        )));
    };
    Ok((0..m.cols()).map(|j| m.column(j)).collect())
}

fn random_unit(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    raw.iter().map(|x| Complex64::new(x / norm, 0.0)).collect()
}

fn solve(args: &SolveArgs) -> CliResult<i32> {
    let a_path = args.a.as_ref().ok_or_else(|| at("--a")(Error::InvalidConfig("missing A-file".into())))?;
    if args.function.is_none() && args.frechet.is_none() {
        return Err(at("--function")(Error::InvalidConfig(
            "one of --function or --frechet is required".into(),
        )));
    }
    let opts = DriverOptions {
        tol: args.tol,
        h: args.h,
        k_max: args.k_max,
        l_max: args.l_max.unwrap_or(args.k_max),
        step: args.step,
        balance: args.balance,
        ..DriverOptions::default()
    };
    opts.validate().map_err(at("--tol/--h/--k-max"))?;

    let a_data = read_matrix_market(a_path).map_err(at("--a"))?;
    let b_data = match (&args.b, &args.frechet) {
        (Some(p), _) => read_matrix_market(p).map_err(at("--b"))?,
        (None, Some(_)) => transpose_data(&a_data).map_err(at("--a"))?,
        (None, None) => a_data.clone(),
    };
    let a = load_operator(a_data).map_err(at("--a"))?;
    let b = load_operator(b_data).map_err(at("--b"))?;

    let left = match &args.c {
        Some(p) => load_factor(p, a.dim()).map_err(at("--c"))?,
        None => vec![random_unit(a.dim(), args.seed)],
    };
    let right = match &args.d {
        Some(p) => load_factor(p, b.dim()).map_err(at("--d"))?,
        None if b.dim() == a.dim() => left.clone(),
        None => return Err(at("--d")(Error::InvalidConfig("needed when B and A differ in size".into()))),
    };
    let rhs = LowRankRhs::new(left, right).map_err(at("--d"))?;

    let (result, shift) = if let Some(name) = &args.frechet {
        let f = ScalarFunction::parse(name).map_err(at("--frechet"))?;
        if rhs.rank() != 1 {
            return Err(at("--c")(Error::InvalidConfig("Frechet mode takes rank-one C".into())));
        }
        let r = frechet_apply(&f, &*a, &*b, &rhs.left()[0], &rhs.right()[0], &opts).map_err(plain)?;
        (r, None)
    } else {
        let spec = args.function.as_deref().unwrap_or_default();
        let f = BivariateFunction::parse(spec).map_err(at("--function"))?;
        let shift = match &f {
            BivariateFunction::Sylvester { shift } => Some(*shift),
            _ => None,
        };
        (approximate(&f, &*a, &*b, &rhs, &opts).map_err(plain)?, shift)
    };

    let residual = match shift {
        Some(s) => Some(sylvester_residual(s, &*a, &*b, &rhs, &result).map_err(plain)?),
        None => None,
    };
    write_outputs(&args.out, &result, residual).map_err(at("--out"))?;
    eprintln!(
        "k = {}, l = {}, termination = {:?}{}",
        result.k(),
        result.l(),
        result.termination,
        residual.map(|r| format!(", relative residual = {r:.3e}")).unwrap_or_default()
    );
    Ok(match result.termination {
        Termination::Converged | Termination::Breakdown => 0,
        Termination::BudgetExhausted => 2,
    })
}

fn write_outputs(dir: &Path, result: &ApproximationResult, residual: Option<f64>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    write_matrix_market(dir.join("U.mtx"), &result.u)?;
    write_matrix_market(dir.join("X.mtx"), &result.x)?;
    write_matrix_market(dir.join("V.mtx"), &result.v)?;
    let mut trace = String::from("term,k,l,estimate\n");
    for e in &result.trace {
        let _ = writeln!(trace, "{},{},{},{:e}", e.term, e.k, e.l, e.estimate);
    }
    let _ = writeln!(trace, "# termination,{:?}", result.termination);
    if let Some(r) = residual {
        let _ = writeln!(trace, "# residual,{r:e}");
    }
    let path = dir.join("trace.csv");
    fs::write(&path, trace).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn experiment(args: &ExperimentArgs) -> CliResult<()> {
    let kind: Experiment = args.name.parse().map_err(plain)?;
    let mut config = ExperimentConfig::new(kind);
    config.n = args.n;
    let iv = parse_interval(&args.interval).map_err(at("--interval"))?;
    config.interval = (iv.lo(), iv.hi());
    config.distribution = args.distribution.parse::<Distribution>().map_err(at("--distribution"))?;
    config.windows = args
        .windows
        .split(',')
        .map(|w| match w.split_once(':') {
            Some((ts, te)) => Ok((parse_f64(ts)?, parse_f64(te)?)),
            None => Err(Error::InvalidConfig(format!("expected `ts:te`, got `{w}`"))),
        })
        .collect::<Result<_>>()
        .map_err(at("--windows"))?;
    config.functions = args.functions.split(',').map(|s| s.trim().to_string()).collect();
    if let Some(ks) = &args.ks {
        config.ks = parse_ks(ks).map_err(at("--ks"))?;
    }
    config.rhos = parse_list(&args.rhos).map_err(at("--rhos"))?;
    config.measure_k_max = args.measure_k_max;
    config.seed = args.seed;
    config.validate().map_err(plain)?;
    let table = run_experiment(&config).map_err(plain)?;
    emit(args.output.as_deref(), &table.to_csv()).map_err(at("--output"))
}

fn bounds(cmd: &BoundsCommand) -> CliResult<()> {
    let mut out = String::new();
    match cmd {
        BoundsCommand::Phi { rho, ks } => {
            out.push_str("rho,k,phi_bound,exp_bound_reference,optimal_radius\n");
            for k in parse_ks(ks).map_err(at("--ks"))? {
                let pb = phi_bound(k, *rho).map_err(at("--ks"))?;
                let eb = exp_bound_reference(k, *rho).map_err(at("--ks"))?;
                let r = phi_optimal_radius(k, *rho).map_err(at("--rho"))?;
                let _ = writeln!(out, "{rho:e},{k},{pb:e},{eb:e},{r:e}");
            }
        }
        BoundsCommand::Bernstein { interval, singularity } => {
            let iv = parse_interval(interval).map_err(at("--interval"))?;
            let z = match *parse_list(singularity).map_err(at("--singularity"))?.as_slice() {
                [re] => Complex64::new(re, 0.0),
                [re, im] => Complex64::new(re, im),
                _ => {
                    return Err(at("--singularity")(Error::InvalidConfig("expected `re` or `re,im`".into())));
                }
            };
            let rate = bernstein_rate(&iv, z).map_err(at("--singularity"))?;
            let _ = writeln!(out, "rate\n{rate:e}");
        }
        BoundsCommand::Chebyshev { function, interval, degree } => {
            let g = ScalarFunction::parse(function).map_err(at("--function"))?;
            let iv = parse_interval(interval).map_err(at("--interval"))?;
            let e = chebyshev_min_error(&g, &iv, *degree).map_err(plain)?;
            let _ = writeln!(out, "degree,error\n{degree},{e:e}");
        }
        BoundsCommand::Theorem { function, ea, eb, ks, m, c_norm, d_norm } => {
            let f = BivariateFunction::parse(function).map_err(at("--function"))?;
            let ea = parse_interval(ea).map_err(at("--ea"))?;
            let eb = parse_interval(eb).map_err(at("--eb"))?;
            out.push_str("k,bound\n");
            for k in parse_ks(ks).map_err(at("--ks"))? {
                let b = theorem_bound(&f, &ea, &eb, k, *m, *c_norm, *d_norm).map_err(plain)?;
                let _ = writeln!(out, "{k},{b:e}");
            }
        }
    }
    emit(None, &out).map_err(plain)
}

/// Dense `U X V^T` from a solve output directory.
pub fn read_solution(dir: &Path) -> Result<ComplexDenseMatrix> {
    let u = read_matrix_market(dir.join("U.mtx"))?.to_dense();
    let x = read_matrix_market(dir.join("X.mtx"))?.to_dense();
    let v = read_matrix_market(dir.join("V.mtx"))?.to_dense();
    Ok(&(&u * &x) * &v.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_lists() {
        assert_eq!(parse_ks("3").unwrap(), vec![3]);
        assert_eq!(parse_ks("2:5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_ks("1:10:4").unwrap(), vec![1, 5, 9]);
        assert_eq!(parse_ks("4,8").unwrap(), vec![4, 8]);
        assert!(parse_ks("0:3").is_err());
        assert!(parse_ks("1:3:0").is_err());
    }

    #[test]
    fn intervals_and_numbers() {
        let iv = parse_interval("-100,-0.1").unwrap();
        assert_eq!((iv.lo(), iv.hi()), (-100.0, -0.1));
        assert_eq!(parse_f64("inf").unwrap(), f64::INFINITY);
        assert!(parse_interval("1").is_err());
    }
}

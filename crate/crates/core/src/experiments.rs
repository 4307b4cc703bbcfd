//! Convergence experiments on the diagonal test problem, emitted as CSV.
//!
//! The test problem is a diagonal `A` with real eigenvalues in an interval and
//! a seeded random unit vector `c`. Diagonal `A` makes the exact result
//! entrywise: `X_ij = f(lambda_i, lambda_j) c_i c_j`.

use std::fmt::Write as _;
use std::str::FromStr;
use std::thread;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal, Uniform};

use crate::bounds::{exp_bound_reference, phi_bound, phi_chebyshev_error};
use crate::dense::{eig, vec_norm, ComplexDenseMatrix, ScalarFunction};
use crate::driver::TensorKrylov;
use crate::error::{Error, Result};
use crate::kernels::{divided_difference, eval_scalar, BivariateFunction};
use crate::krylov::{arnoldi_extend, arnoldi_init, DiagonalOperator, LinearOperator, OperatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Gramian,
    Frechet,
    PhiBounds,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gramian" => Ok(Self::Gramian),
            "frechet" => Ok(Self::Frechet),
            "phi-bounds" => Ok(Self::PhiBounds),
            other => Err(Error::InvalidConfig(format!(
                "unknown experiment `{other}` (expected gramian, frechet or phi-bounds)"
            ))),
        }
    }
}

/// How the eigenvalues fill the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    /// Equispaced, endpoints included.
    Spaced,
    /// Seeded i.i.d. uniform samples.
    Random,
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spaced" => Ok(Self::Spaced),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidConfig(format!(
                "unknown distribution `{other}` (expected spaced or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub interval: (f64, f64),
    pub distribution: Distribution,
    /// `(t_s, t_e)` pairs for the Gramian experiment.
    pub windows: Vec<(f64, f64)>,
    /// Function names for the Frechet experiment, as accepted by [`ScalarFunction::parse`].
    pub functions: Vec<String>,
    /// Depths to record. Empty means the experiment's default sweep.
    pub ks: Vec<usize>,
    pub rhos: Vec<f64>,
    /// The phi-bounds table measures interpolation errors only up to this `k`.
    pub measure_k_max: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            n: 500,
            interval: (-100.0, -0.1),
            distribution: Distribution::Spaced,
            windows: vec![(0.0, f64::INFINITY), (0.1, f64::INFINITY), (1.0, f64::INFINITY), (0.0, 1.0)],
            functions: vec!["exp".into(), "sqrt-neg".into()],
            ks: Vec::new(),
            rhos: vec![10.0, 1000.0],
            measure_k_max: 300,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!("invalid spectrum interval [{lo}, {hi}]")));
        }
        if self.n < 2 {
            return Err(Error::InvalidConfig("n must be at least 2".into()));
        }
        if self.ks.contains(&0) {
            return Err(Error::InvalidConfig("k values must be positive".into()));
        }
        for &(ts, te) in &self.windows {
            if !(ts >= 0.0 && ts.is_finite() && te > ts) {
                return Err(Error::InvalidConfig(format!("invalid time window ({ts}, {te})")));
            }
        }
        if self.rhos.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidConfig("rho values must be positive".into()));
        }
        Ok(())
    }
}

/// The diagonal test problem.
#[derive(Debug, Clone)]
pub struct TestProblem {
    pub eigenvalues: Vec<f64>,
    pub c: Vec<Complex64>,
}

impl TestProblem {
    /// Eigenvalues are drawn before `c` from the same seeded stream.
    pub fn new(n: usize, interval: (f64, f64), distribution: Distribution, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = interval;
        let eigenvalues = match distribution {
            Distribution::Spaced => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
            Distribution::Random => {
                let u = Uniform::new_inclusive(lo, hi).expect("valid interval");
                (0..n).map(|_| u.sample(&mut rng)).collect()
            }
        };
        let raw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let c = raw.iter().map(|x| Complex64::new(x / norm, 0.0)).collect();
        Self { eigenvalues, c }
    }

    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self::new(config.n, config.interval, config.distribution, config.seed)
    }

    pub fn operator(&self) -> DiagonalOperator {
        DiagonalOperator::from_real(&self.eigenvalues)
    }

    /// `X_ij = kernel(lambda_i, lambda_j) c_i d_j`.
    pub fn exact_with(
        &self,
        d: &[Complex64],
        kernel: impl Fn(Complex64, Complex64) -> Result<Complex64>,
    ) -> Result<ComplexDenseMatrix> {
        let n = self.eigenvalues.len();
        if d.len() != n {
            return Err(Error::DimensionMismatch(format!("d has length {}, expected {n}", d.len())));
        }
        let lam: Vec<Complex64> = self.eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(kernel(lam[i], lam[j])? * self.c[i] * d[j]);
            }
        }
        ComplexDenseMatrix::from_row_major(n, n, &values)
    }

    pub fn exact(&self, kernel: impl Fn(Complex64, Complex64) -> Result<Complex64>) -> Result<ComplexDenseMatrix> {
        self.exact_with(&self.c, kernel)
    }
}

/// Errors of one approximation against the exact result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub k: usize,
    pub spectral: f64,
    pub frobenius: f64,
}

/// `x -> M^* M x` without forming the product.
struct Gram<'a>(&'a ComplexDenseMatrix, ComplexDenseMatrix);

impl LinearOperator for Gram<'_> {
    fn dim(&self) -> usize {
        self.0.cols()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.copy_from_slice(&self.1.matvec(&self.0.matvec(x)));
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Dense
    }
}

/// `||M||_2` from the largest Ritz value of a Krylov space of `M^* M`,
/// extended in blocks of 20 until it stabilizes to 1e-10.
pub fn spectral_norm(m: &ComplexDenseMatrix) -> Result<f64> {
    if m.frobenius_norm() == 0.0 {
        return Ok(0.0);
    }
    let gram = Gram(m, m.adjoint());
    let n = gram.dim();
    let start: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(1.0 + 0.5 * ((j * 7919) % 13) as f64 / 13.0, 0.0))
        .collect();
    let mut state = arnoldi_init(&gram, &start)?;
    let mut previous = 0.0;
    loop {
        let steps = 20.min(n - state.depth());
        if steps > 0 && !state.broken_down() {
            state = arnoldi_extend(&gram, &state, steps)?;
        }
        let depth = state.depth();
        let h = state.hessenberg(depth);
        // the compression of a Hermitian operator is Hermitian up to rounding
        let sym = (&h + &h.adjoint()).scale(Complex64::new(0.5, 0.0));
        let top = eig(&sym)?.eigvals().iter().map(|z| z.re).fold(0.0, f64::max);
        let sigma = top.max(0.0).sqrt();
        if state.broken_down() || depth == n || (sigma - previous).abs() <= 1e-10 * sigma {
            return Ok(sigma);
        }
        previous = sigma;
    }
}

fn sample(k: usize, exact: &ComplexDenseMatrix, approx: &ComplexDenseMatrix) -> Result<ErrorSample> {
    let diff = exact - approx;
    Ok(ErrorSample {
        k,
        spectral: spectral_norm(&diff)?,
        frobenius: diff.frobenius_norm(),
    })
}

/// Errors of `U_k X_{k,k} V_k^T` against the exact `f{A,A}(c d^T)`.
pub fn kernel_errors(
    problem: &TestProblem,
    f: &BivariateFunction,
    d: &[Complex64],
    ks: &[usize],
) -> Result<Vec<ErrorSample>> {
    let exact = problem.exact_with(d, |x, y| eval_scalar(f, x, y))?;
    let op = problem.operator();
    let mut pair = TensorKrylov::new(f, &op, &op, &problem.c, d)?;
    ks.iter()
        .map(|&k| {
            let (rk, rl) = pair.reach(k, k);
            let depth = rk.min(rl);
            sample(k, &exact, &pair.assemble(depth, depth)?)
        })
        .collect()
}

/// Errors for the time-limited Gramian with `d = c`.
pub fn gramian_errors(problem: &TestProblem, t_start: f64, t_end: f64, ks: &[usize]) -> Result<Vec<ErrorSample>> {
    kernel_errors(problem, &BivariateFunction::time_limited(t_start, t_end)?, &problem.c, ks)
}

/// Frechet errors `||Df{A}(c c^T) - U_k X_k U_k^T||` and Arnoldi errors
/// `||f'(A) c - U_k f'(G_k) |c| e_1||_2` for each `k`.
pub fn frechet_errors(problem: &TestProblem, f: &ScalarFunction, ks: &[usize]) -> Result<Vec<(ErrorSample, f64)>> {
    let kernel = BivariateFunction::divided_difference(f.clone())?;
    let exact = problem.exact(|x, y| divided_difference(f, x, y))?;
    let fprime = f.derivative_function()?;
    let exact_vec: Vec<Complex64> = problem
        .eigenvalues
        .iter()
        .zip(&problem.c)
        .map(|(&l, &c)| fprime.eval_checked(Complex64::new(l, 0.0)).map(|v| v * c))
        .collect::<Result<_>>()?;
    let op = problem.operator();
    let mut pair = TensorKrylov::new(&kernel, &op, &op, &problem.c, &problem.c)?;
    ks.iter()
        .map(|&k| {
            let (rk, rl) = pair.reach(k, k);
            let depth = rk.min(rl);
            let s = sample(k, &exact, &pair.assemble(depth, depth)?)?;
            let state = pair.left_state();
            let fg = crate::dense::matrix_function(&fprime, &state.hessenberg(depth))?;
            let coeffs: Vec<Complex64> = (0..depth).map(|i| fg.get(i, 0) * state.start_norm()).collect();
            let approx = state.basis(depth).matvec(&coeffs);
            let diff: Vec<Complex64> = exact_vec.iter().zip(&approx).map(|(a, b)| a - b).collect();
            Ok((s, vec_norm(&diff)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiBoundRow {
    pub rho: f64,
    pub k: usize,
    pub phi_bound: f64,
    pub exp_bound_reference: f64,
    pub measured: Option<f64>,
}

/// Bound comparison for `k` from `ceil(sqrt(4 rho))` to `ks` or a default range.
pub fn phi_bound_rows(rho: f64, ks: &[usize], measure_k_max: usize) -> Result<Vec<PhiBoundRow>> {
    let first = (4.0 * rho).sqrt().ceil() as usize;
    let ks: Vec<usize> = if ks.is_empty() {
        default_phi_ks(rho)
    } else {
        ks.iter().copied().filter(|&k| k >= first).collect()
    };
    ks.into_iter()
        .map(|k| {
            let measured = if k <= measure_k_max {
                Some(phi_chebyshev_error(rho, k - 1)?)
            } else {
                None
            };
            Ok(PhiBoundRow {
                rho,
                k,
                phi_bound: phi_bound(k, rho)?,
                exp_bound_reference: exp_bound_reference(k, rho)?,
                measured,
            })
        })
        .collect()
}

fn default_phi_ks(rho: f64) -> Vec<usize> {
    let first = (4.0 * rho).sqrt().ceil() as usize;
    let last = (6.0 * rho).ceil() as usize;
    let step = ((last - first) / 60).max(1);
    (first..=last).step_by(step).collect()
}

fn default_ks(experiment: Experiment) -> Vec<usize> {
    match experiment {
        Experiment::Gramian => (1..=60).collect(),
        _ => (1..=80).collect(),
    }
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Shortest round-trip representation; `inf` for infinity.
fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Runs independent jobs on scoped threads and returns results in input order.
fn fan_out<T: Sync, R: Send>(jobs: &[T], run: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|job| s.spawn(|| run(job))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment worker panicked"))
            .collect()
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    let ks = if config.ks.is_empty() {
        default_ks(config.experiment)
    } else {
        config.ks.clone()
    };
    match config.experiment {
        Experiment::Gramian => {
            let problem = TestProblem::from_config(config);
            let runs = fan_out(&config.windows, |&(ts, te)| gramian_errors(&problem, ts, te, &ks))?;
            let mut table = Table::new(&["t_s", "t_e", "k", "error"]);
            for (&(ts, te), samples) in config.windows.iter().zip(runs) {
                for s in samples {
                    table.rows.push(vec![num(ts), num(te), s.k.to_string(), num(s.spectral)]);
                }
            }
            Ok(table)
        }
        Experiment::Frechet => {
            let problem = TestProblem::from_config(config);
            let functions = config
                .functions
                .iter()
                .map(|name| ScalarFunction::parse(name))
                .collect::<Result<Vec<_>>>()?;
            let runs = fan_out(&functions, |f| frechet_errors(&problem, f, &ks))?;
            let mut table = Table::new(&["f", "k", "frechet_error", "univariate_error"]);
            for (name, samples) in config.functions.iter().zip(runs) {
                for (s, uni) in samples {
                    table.rows.push(vec![name.clone(), s.k.to_string(), num(s.spectral), num(uni)]);
                }
            }
            Ok(table)
        }
        Experiment::PhiBounds => {
            let mut table = Table::new(&["rho", "k", "phi_bound", "exp_bound_reference", "measured_chebyshev_error"]);
            for &rho in &config.rhos {
                for row in phi_bound_rows(rho, &config.ks, config.measure_k_max)? {
                    table.rows.push(vec![
                        num(row.rho),
                        row.k.to_string(),
                        num(row.phi_bound),
                        num(row.exp_bound_reference),
                        row.measured.map(num).unwrap_or_default(),
                    ]);
                }
            }
            Ok(table)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = ComplexDenseMatrix::try_from_fn(60, 60, |_, _| {
            Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        })
        .unwrap();
        let (_, s, _) = m.svd_thin().unwrap();
        let sigma = spectral_norm(&m).unwrap();
        assert!((sigma / s[0] - 1.0).abs() < 1e-9, "{sigma} vs {}", s[0]);
    }

    #[test]
    fn problem_is_seeded() {
        let a = TestProblem::new(50, (-100.0, -0.1), Distribution::Random, 9);
        let b = TestProblem::new(50, (-100.0, -0.1), Distribution::Random, 9);
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.c, b.c);
        assert!((vec_norm(&a.c) - 1.0).abs() < 1e-14);
        let s = TestProblem::new(5, (-1.0, 1.0), Distribution::Spaced, 0);
        assert_eq!(s.eigenvalues, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn phi_table_row() {
        let rows = phi_bound_rows(10.0, &[40], 0).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].phi_bound < 3e-15 && rows[0].phi_bound > 1e-15);
        assert!(rows[0].phi_bound < rows[0].exp_bound_reference);
        assert!(rows[0].measured.is_none());
    }

    #[test]
    fn small_gramian_is_deterministic() {
        let mut config = ExperimentConfig::new(Experiment::Gramian);
        config.n = 60;
        config.ks = vec![2, 5, 10];
        config.windows = vec![(0.0, 1.0), (0.1, f64::INFINITY)];
        let a = run_experiment(&config).unwrap().to_csv();
        let b = run_experiment(&config).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("t_s,t_e,k,error\n"));
        assert_eq!(a.lines().count(), 7);
    }
}

//! Replica-symmetric potential, its critical points and the derived
//! MMSE / measurement-MMSE predictions.
//!
//! The min-max over `(r1, r2)` is resolved by enumerating critical points:
//! damped fixed-point iteration from a small set of starting points, followed
//! by deduplication and selection of the critical point with the smallest
//! potential. Competing branches are reported, never silently merged.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kms::{DiscreteSpectrum, SpectralTable, SpectrumSpec};
use crate::quadrature::{AngularQuadrature, GaussianRule};
use crate::scalar_channel::{Prior, ScalarChannel};
use crate::Real;

/// Sampling ratio, noise level, prior and AR spectrum of one asymptotic model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaProblem<T> {
    pub spectrum: SpectrumSpec<T>,
    pub prior: Prior<T>,
    /// `lim N / p`.
    pub c: T,
    /// Noise variance; the innovation variance is fixed to one.
    pub sigma2: T,
}

impl<T: Real> ReplicaProblem<T> {
    pub fn new(spectrum: SpectrumSpec<T>, prior: Prior<T>, c: T, sigma2: T) -> Result<Self> {
        let p = Self {
            spectrum,
            prior,
            c,
            sigma2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > T::zero() && self.c.is_finite()) {
            return Err(Error::Domain(format!("c must be > 0, got {}", self.c)));
        }
        if !(self.sigma2 > T::zero() && self.sigma2.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma2 must be > 0, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    pub fn with_c(&self, c: T) -> Self {
        Self { c, ..self.clone() }
    }

    pub fn with_sigma2(&self, sigma2: T) -> Self {
        Self {
            sigma2,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Weight of the new `r2` iterate in the damped update.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub angular_nodes: usize,
    pub channel_rule: GaussianRule,
    /// Cells used to discretize a continuous spectrum.
    pub k_bins: usize,
    /// Extra uniformly random starting points in `[0, rho]^k`.
    pub multistart: usize,
    pub multistart_seed: u64,
    /// Starting value of the informative branch.
    pub informative_eps: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
            angular_nodes: AngularQuadrature::<f64>::DEFAULT_NODES,
            channel_rule: GaussianRule::default(),
            k_bins: 32,
            multistart: 0,
            multistart_seed: 0x5eed,
            informative_eps: 1e-8,
        }
    }
}

impl SolverOptions {
    /// Default options with the randomized multistart switched on.
    pub fn robust() -> Self {
        Self {
            multistart: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Domain(format!(
                "damping must be in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 || self.angular_nodes < 2 || self.k_bins == 0 {
            return Err(Error::Domain("invalid solver options".into()));
        }
        Ok(())
    }
}

/// Where a fixed-point iteration started.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initialization {
    /// `r2 = rho`: nothing known about the signal.
    Uninformative,
    /// `r2 = eps`: signal almost perfectly known.
    Informative,
    Random(usize),
    Custom,
}

impl fmt::Display for Initialization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Initialization::Uninformative => f.write_str("uninformative"),
            Initialization::Informative => f.write_str("informative"),
            Initialization::Random(i) => write!(f, "random{i}"),
            Initialization::Custom => f.write_str("custom"),
        }
    }
}

/// A (candidate) critical point of the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSolution<T> {
    /// The atoms the solution refers to (the discretization for continuous spectra).
    pub spectrum: DiscreteSpectrum<T>,
    pub r1: Vec<T>,
    pub r2: Vec<T>,
    pub i_rs: T,
    pub converged_from: Initialization,
    pub iterations: usize,
    /// `max(max_i |r2_i - mmse(r1_i)|, max_i |r1_i - r1_map(r2)_i|)`.
    pub residual: T,
    pub converged: bool,
}

impl<T: Real> ReplicaSolution<T> {
    /// `sum_i l_i r2_i`.
    pub fn mmse_total(&self) -> T {
        self.spectrum
            .weights()
            .iter()
            .zip(&self.r2)
            .fold(T::zero(), |acc, (&l, &r)| acc + l * r)
    }

    fn distance(&self, other: &Self) -> T {
        self.r1
            .iter()
            .zip(&other.r1)
            .chain(self.r2.iter().zip(&other.r2))
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    fn r2_distance(&self, other: &Self) -> T {
        self.r2
            .iter()
            .zip(&other.r2)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone)]
pub enum SolveError<T> {
    Invalid(String),
    /// No starting point converged; the traces carry the final iterates.
    NotConverged(Vec<ReplicaSolution<T>>),
}

impl<T: Real> fmt::Display for SolveError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Invalid(msg) => write!(f, "invalid replica problem: {msg}"),
            SolveError::NotConverged(traces) => {
                write!(
                    f,
                    "fixed-point iteration did not converge from {} start(s)",
                    traces.len()
                )?;
                for t in traces {
                    write!(
                        f,
                        "; {} stopped after {} iterations with residual {:e}",
                        t.converged_from,
                        t.iterations,
                        t.residual.to_f64_lossy()
                    )?;
                }
                Ok(())
            }
        }
    }
}

impl<T: Real> std::error::Error for SolveError<T> {}

impl<T> From<Error> for SolveError<T> {
    fn from(e: Error) -> Self {
        SolveError::Invalid(e.to_string())
    }
}

/// Everything needed to evaluate the potential and the critical-point maps of
/// one discrete problem, with the angular table and the channel rule prebuilt.
#[derive(Debug, Clone)]
pub struct ReplicaSystem<T> {
    spectrum: DiscreteSpectrum<T>,
    table: SpectralTable<T>,
    channel: ScalarChannel<T>,
    c: T,
    sigma2: T,
    rho: T,
}

impl<T: Real> ReplicaSystem<T> {
    pub fn new(problem: &ReplicaProblem<T>, opts: &SolverOptions) -> Result<Self> {
        problem.validate()?;
        opts.validate()?;
        let spectrum = problem.spectrum.to_discrete(opts.k_bins)?;
        let quad = AngularQuadrature::new(opts.angular_nodes);
        Ok(Self {
            table: SpectralTable::new(&spectrum, &quad),
            spectrum,
            channel: ScalarChannel::new(problem.prior.clone(), opts.channel_rule),
            c: problem.c,
            sigma2: problem.sigma2,
            rho: problem.prior.variance(),
        })
    }

    pub fn spectrum(&self) -> &DiscreteSpectrum<T> {
        &self.spectrum
    }

    pub fn atoms(&self) -> usize {
        self.spectrum.len()
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn r1_map(&self, r2: &[T]) -> Result<Vec<T>> {
        self.table.r1_map(r2, self.c, self.sigma2)
    }

    pub fn mmse_map(&self, r1: &[T]) -> Vec<T> {
        r1.iter().map(|&r| self.channel.mmse(r)).collect()
    }

    /// The replica-symmetric potential `i_RS(r1, r2)`.
    pub fn potential(&self, r1: &[T], r2: &[T]) -> Result<T> {
        if r1.len() != self.atoms() {
            return Err(Error::Dimension {
                expected: self.atoms(),
                got: r1.len(),
            });
        }
        if r1.iter().chain(r2).any(|&v| !(v >= T::zero())) {
            return Err(Error::Domain(
                "potential arguments must be nonnegative".into(),
            ));
        }
        let log_term = self.table.log_term(r2, self.sigma2)?;
        let half = T::lit(0.5);
        let mut value = half * self.c * log_term;
        for ((&l, &a), &b) in self.spectrum.weights().iter().zip(r1).zip(r2) {
            value += l * (self.channel.mutual_info(a) - half * a * b);
        }
        Ok(value)
    }

    /// `(sigma^2/pi) int S/(S + sigma^2)` with `S = sum_i l_i delta_i r2_i`.
    pub fn ymmse(&self, r2: &[T]) -> Result<T> {
        self.table.ymmse(r2, self.sigma2)
    }

    /// Residuals of the two critical-point equations.
    pub fn residuals(&self, r1: &[T], r2: &[T]) -> Result<(T, T)> {
        let mmse = self.mmse_map(r1);
        let map = self.r1_map(r2)?;
        let res_mmse = r2
            .iter()
            .zip(&mmse)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        let res_r1 = r1
            .iter()
            .zip(&map)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        Ok((res_mmse, res_r1))
    }

    /// Damped alternation `r1 <- r1_map(r2)`, `r2 <- (1-g) r2 + g mmse(r1)`.
    pub fn iterate(
        &self,
        init_r2: &[T],
        label: Initialization,
        opts: &SolverOptions,
    ) -> Result<ReplicaSolution<T>> {
        if init_r2.len() != self.atoms() {
            return Err(Error::Dimension {
                expected: self.atoms(),
                got: init_r2.len(),
            });
        }
        let tol = T::lit(opts.tol);
        let gamma = T::lit(opts.damping);
        let mut r2: Vec<T> = init_r2
            .iter()
            .map(|&v| v.max(T::zero()).min(self.rho))
            .collect();
        let mut r1 = self.r1_map(&r2)?;
        let mut residual = T::infinity();
        let mut iterations = 0;
        let mut converged = false;
        let mut last: Option<T> = None;
        while iterations < opts.max_iter {
            iterations += 1;
            r1 = self.r1_map(&r2)?;
            let target = self.mmse_map(&r1);
            residual = r2
                .iter()
                .zip(&target)
                .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
            if !residual.is_finite() {
                break;
            }
            if residual <= tol {
                // Keep iterating while the residual still contracts so that
                // iterates from different starts land on the same point.
                let stalled = last.is_some_and(|prev| residual > T::lit(0.9) * prev);
                if converged && (stalled || residual <= tol * T::lit(1e-4)) {
                    break;
                }
                converged = true;
                last = Some(residual);
            }
            for (a, &b) in r2.iter_mut().zip(&target) {
                *a = (T::one() - gamma) * *a + gamma * b;
            }
        }
        if residual.is_finite() {
            r1 = self.r1_map(&r2)?;
            let (res_mmse, res_r1) = self.residuals(&r1, &r2)?;
            residual = res_mmse.max(res_r1);
            converged = residual <= tol;
        } else {
            converged = false;
        }
        let i_rs = self.potential(&r1, &r2)?;
        Ok(ReplicaSolution {
            spectrum: self.spectrum.clone(),
            r1,
            r2,
            i_rs,
            converged_from: label,
            iterations,
            residual,
            converged,
        })
    }

    fn starts(&self, opts: &SolverOptions) -> Vec<(Initialization, Vec<T>)> {
        let k = self.atoms();
        let mut starts = vec![
            (Initialization::Uninformative, vec![self.rho; k]),
            (
                Initialization::Informative,
                vec![T::lit(opts.informative_eps).min(self.rho); k],
            ),
        ];
        let mut rng = ChaCha20Rng::seed_from_u64(opts.multistart_seed);
        for i in 0..opts.multistart {
            let r2 = (0..k)
                .map(|_| T::lit(rng.random::<f64>()) * self.rho)
                .collect();
            starts.push((Initialization::Random(i), r2));
        }
        starts
    }

    /// Critical-point enumeration from the canonical starting points.
    pub fn solve(
        &self,
        opts: &SolverOptions,
    ) -> std::result::Result<ReplicaOutcome<T>, SolveError<T>> {
        let mut converged = Vec::new();
        let mut failures = Vec::new();
        let mut uninformative = None;
        let mut informative = None;
        for (label, init) in self.starts(opts) {
            let sol = self.iterate(&init, label, opts)?;
            if !sol.converged {
                failures.push(sol);
                continue;
            }
            match label {
                Initialization::Uninformative => uninformative = Some(sol.clone()),
                Initialization::Informative => informative = Some(sol.clone()),
                _ => {}
            }
            converged.push(sol);
        }
        if converged.is_empty() {
            return Err(SolveError::NotConverged(failures));
        }
        let dedup = T::lit(10.0 * opts.tol);
        let mut critical: Vec<ReplicaSolution<T>> = Vec::new();
        for sol in converged {
            if !critical.iter().any(|c| c.distance(&sol) < dedup) {
                critical.push(sol);
            }
        }
        critical.sort_by(|a, b| {
            a.i_rs
                .partial_cmp(&b.i_rs)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let global = critical[0].clone();
        let degenerate = critical.iter().skip(1).any(|c| {
            (c.i_rs - global.i_rs).abs() < T::lit(1e-9) && c.r2_distance(&global) >= dedup
        });
        let phase_transition_candidate = match (&uninformative, &informative) {
            (Some(u), Some(i)) => u.r2_distance(i) > dedup,
            _ => false,
        };
        Ok(ReplicaOutcome {
            global,
            critical,
            uninformative,
            informative,
            failures,
            phase_transition_candidate,
            degenerate,
        })
    }

    pub fn prediction(&self, solution: &ReplicaSolution<T>) -> Result<PredictionReport<T>> {
        Ok(PredictionReport {
            mmse_per_block: solution.r2.clone(),
            mmse_total: solution.mmse_total(),
            ymmse: self.ymmse(&solution.r2)?,
            mutual_info: solution.i_rs,
        })
    }
}

/// Result of critical-point enumeration.
#[derive(Debug, Clone)]
pub struct ReplicaOutcome<T> {
    /// Critical point with the smallest potential.
    pub global: ReplicaSolution<T>,
    /// Distinct converged critical points, ascending in `i_rs`.
    pub critical: Vec<ReplicaSolution<T>>,
    pub uninformative: Option<ReplicaSolution<T>>,
    pub informative: Option<ReplicaSolution<T>>,
    /// Starts that hit `max_iter`.
    pub failures: Vec<ReplicaSolution<T>>,
    /// The two canonical branches converged to different points.
    pub phase_transition_candidate: bool,
    /// Another distinct critical point ties the global potential within 1e-9.
    pub degenerate: bool,
}

impl<T: Real> ReplicaOutcome<T> {
    /// Which canonical branch is the global minimizer.
    pub fn branch(&self) -> Branch {
        if !self.phase_transition_candidate {
            return Branch::Unique;
        }
        let dists = self
            .uninformative
            .as_ref()
            .zip(self.informative.as_ref())
            .map(|(u, i)| (u.distance(&self.global), i.distance(&self.global)));
        match dists {
            Some((du, di)) if du <= di => Branch::Uninformative,
            Some(_) => Branch::Informative,
            None => Branch::Unique,
        }
    }

    /// `i_RS(uninformative) - i_RS(informative)` when both branches exist and differ.
    pub fn branch_gap(&self) -> Option<T> {
        if !self.phase_transition_candidate {
            return None;
        }
        match (&self.uninformative, &self.informative) {
            (Some(u), Some(i)) => Some(u.i_rs - i.i_rs),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Unique,
    Uninformative,
    Informative,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Unique => "unique",
            Branch::Uninformative => "uninformative",
            Branch::Informative => "informative",
        })
    }
}

/// Conjectured per-block MMSE, total MMSE, measurement MMSE and mutual information.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport<T> {
    pub mmse_per_block: Vec<T>,
    pub mmse_total: T,
    pub ymmse: T,
    pub mutual_info: T,
}

/// `i_RS(r1, r2)` for a problem with a discrete spectrum.
pub fn rs_potential<T: Real>(
    r1: &[T],
    r2: &[T],
    problem: &ReplicaProblem<T>,
    opts: &SolverOptions,
) -> Result<T> {
    if problem.spectrum.as_discrete().is_none() {
        return Err(Error::Spectrum(
            "rs_potential needs a discrete spectrum; discretize the measure first".into(),
        ));
    }
    ReplicaSystem::new(problem, opts)?.potential(r1, r2)
}

/// One damped fixed-point run. Non-convergence returns the final iterate as the error.
pub fn fixed_point_solve<T: Real>(
    problem: &ReplicaProblem<T>,
    init_r2: &[T],
    opts: &SolverOptions,
) -> std::result::Result<ReplicaSolution<T>, SolveError<T>> {
    let system = ReplicaSystem::new(problem, opts)?;
    let rho = system.rho();
    if init_r2.iter().any(|&v| !(v >= T::zero() && v <= rho)) {
        return Err(SolveError::Invalid(format!(
            "initial r2 must lie in [0, {rho}]"
        )));
    }
    let sol = system.iterate(init_r2, Initialization::Custom, opts)?;
    if sol.converged {
        Ok(sol)
    } else {
        Err(SolveError::NotConverged(vec![sol]))
    }
}

/// Enumerates critical points; continuous spectra are discretized with `opts.k_bins`.
pub fn solve_replica<T: Real>(
    problem: &ReplicaProblem<T>,
    opts: &SolverOptions,
) -> std::result::Result<ReplicaOutcome<T>, SolveError<T>> {
    ReplicaSystem::new(problem, opts)?.solve(opts)
}

/// Solves the `k_bins` left-endpoint discretization of a continuous spectrum.
pub fn solve_replica_continuous<T: Real>(
    problem: &ReplicaProblem<T>,
    k_bins: usize,
    opts: &SolverOptions,
) -> std::result::Result<ReplicaOutcome<T>, SolveError<T>> {
    if k_bins < 1 {
        return Err(SolveError::Invalid("k_bins must be positive".into()));
    }
    let opts = SolverOptions { k_bins, ..*opts };
    solve_replica(problem, &opts)
}

/// `(k, global mmse_total)` for each discretization level.
pub fn discretization_study<T: Real>(
    problem: &ReplicaProblem<T>,
    k_bins: &[usize],
    opts: &SolverOptions,
) -> std::result::Result<Vec<(usize, T)>, SolveError<T>> {
    k_bins
        .iter()
        .map(|&k| solve_replica_continuous(problem, k, opts).map(|o| (k, o.global.mmse_total())))
        .collect()
}

/// Limiting measurement MMSE at a solved critical point.
pub fn predicted_ymmse<T: Real>(
    solution: &ReplicaSolution<T>,
    problem: &ReplicaProblem<T>,
) -> Result<T> {
    let spectrum = SpectrumSpec::Discrete(solution.spectrum.clone());
    ymmse_from_block_mmse(&solution.r2, &spectrum, problem.sigma2)
}

/// Same integral as [`predicted_ymmse`], fed with arbitrary per-block MMSEs.
pub fn ymmse_from_block_mmse<T: Real>(
    mmse_per_block: &[T],
    spectrum: &SpectrumSpec<T>,
    sigma2: T,
) -> Result<T> {
    let discrete = spectrum
        .as_discrete()
        .ok_or_else(|| Error::Spectrum("block MMSEs need a discrete spectrum".into()))?;
    if mmse_per_block.iter().any(|&m| !(m >= T::zero())) {
        return Err(Error::Domain("block MMSEs must be nonnegative".into()));
    }
    if !(sigma2 > T::zero()) {
        return Err(Error::Domain("sigma2 must be positive".into()));
    }
    let quad = AngularQuadrature::default();
    SpectralTable::new(discrete, &quad).ymmse(mmse_per_block, sigma2)
}

/// `lim i_p`: the potential at the global critical point.
pub fn mutual_info_limit<T: Real>(
    problem: &ReplicaProblem<T>,
    opts: &SolverOptions,
) -> std::result::Result<T, SolveError<T>> {
    solve_replica(problem, opts).map(|o| o.global.i_rs)
}

/// Parameter a sweep runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Sampling ratio `c`.
    C,
    /// Signal-to-noise ratio `1 / sigma^2`.
    InverseSigma2,
}

impl SweepAxis {
    pub fn apply<T: Real>(self, base: &ReplicaProblem<T>, value: T) -> ReplicaProblem<T> {
        match self {
            SweepAxis::C => base.with_c(value),
            SweepAxis::InverseSigma2 => base.with_sigma2(T::one() / value),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::C => "c",
            SweepAxis::InverseSigma2 => "inv_sigma2",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint<T> {
    pub value: T,
    pub problem: ReplicaProblem<T>,
    pub outcome: std::result::Result<ReplicaOutcome<T>, String>,
    pub prediction: Option<PredictionReport<T>>,
}

#[derive(Debug, Clone)]
pub struct Sweep<T> {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint<T>>,
    /// Located branch crossings, ascending.
    pub transitions: Vec<T>,
}

/// Checks a sweep grid: non-empty, finite, positive and strictly monotone.
pub fn validate_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("sweep grid is empty".into()));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v > T::zero())) {
        return Err(Error::Domain(
            "sweep grid values must be finite and positive".into(),
        ));
    }
    let increasing = grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = grid.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(Error::Domain("sweep grid must be strictly monotone".into()));
    }
    Ok(())
}

/// Solves every grid point (in parallel) and locates branch crossings by
/// bisection between neighbouring points where the branch gap changes sign.
pub fn sweep<T: Real>(
    base: &ReplicaProblem<T>,
    axis: SweepAxis,
    grid: &[T],
    opts: &SolverOptions,
    transition_tol: f64,
) -> Result<Sweep<T>> {
    validate_grid(grid)?;
    opts.validate()?;
    let points: Vec<SweepPoint<T>> = grid
        .par_iter()
        .map(|&value| {
            let problem = axis.apply(base, value);
            let solved = ReplicaSystem::new(&problem, opts)
                .map_err(|e| e.to_string())
                .and_then(|sys| {
                    let outcome = sys.solve(opts).map_err(|e| e.to_string())?;
                    let prediction = sys.prediction(&outcome.global).map_err(|e| e.to_string())?;
                    Ok((outcome, prediction))
                });
            match solved {
                Ok((outcome, prediction)) => SweepPoint {
                    value,
                    problem,
                    outcome: Ok(outcome),
                    prediction: Some(prediction),
                },
                Err(e) => SweepPoint {
                    value,
                    problem,
                    outcome: Err(e),
                    prediction: None,
                },
            }
        })
        .collect();

    let gaps: Vec<Option<T>> = points
        .iter()
        .map(|p| p.outcome.as_ref().ok().and_then(|o| o.branch_gap()))
        .collect();
    let mut transitions = Vec::new();
    for i in 0..points.len().saturating_sub(1) {
        if let (Some(a), Some(b)) = (gaps[i], gaps[i + 1]) {
            if (a < T::zero()) != (b < T::zero()) {
                let lo = points[i].value;
                let hi = points[i + 1].value;
                if let Some(t) = bisect_transition(base, axis, lo, hi, opts, transition_tol) {
                    transitions.push(t);
                }
            }
        }
    }
    transitions.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(Sweep {
        axis,
        points,
        transitions,
    })
}

fn gap_at<T: Real>(
    base: &ReplicaProblem<T>,
    axis: SweepAxis,
    value: T,
    opts: &SolverOptions,
) -> Option<T> {
    solve_replica(&axis.apply(base, value), opts)
        .ok()
        .and_then(|o| o.branch_gap())
}

/// Bisection on the sign of the branch gap between `lo` and `hi`.
pub fn bisect_transition<T: Real>(
    base: &ReplicaProblem<T>,
    axis: SweepAxis,
    lo: T,
    hi: T,
    opts: &SolverOptions,
    tol: f64,
) -> Option<T> {
    let mut a = lo;
    let mut b = hi;
    let ga = gap_at(base, axis, a, opts)?;
    let gb = gap_at(base, axis, b, opts)?;
    if (ga < T::zero()) == (gb < T::zero()) {
        return None;
    }
    let neg_at_a = ga < T::zero();
    let tol = T::lit(tol);
    while (b - a).abs() > tol {
        let mid = T::lit(0.5) * (a + b);
        let gm = gap_at(base, axis, mid, opts)?;
        if (gm < T::zero()) == neg_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(T::lit(0.5) * (a + b))
}

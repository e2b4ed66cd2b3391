//! Monte Carlo drivers and the figure catalogue.
//!
//! Work is split into independent `(point, trial)` jobs run on the current
//! rayon pool; results are gathered by index so output never depends on
//! scheduling.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kms::SpectrumSpec;
use crate::record::{fmt_num, Table};
use crate::replica::{
    solve_replica, sweep, Branch, PredictionReport, ReplicaProblem, ReplicaSystem, SolverOptions,
    Sweep, SweepAxis,
};
use crate::scalar_channel::Prior;
use crate::synth::{
    empirical_mse, empirical_ymmse, exact_gaussian_posterior_mean, sample_instance, InstanceSpec,
};
use crate::vamp::{
    rotate_gaussian_instance, stability_report, summarize, vamp_run, StabilityReport, Termination,
    VampConfig, VampTrace,
};

/// Seed for one job: each coordinate selects a ChaCha stream under the
/// seed derived so far.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(master, |acc, &c| {
        let mut rng = ChaCha20Rng::seed_from_u64(acc);
        rng.set_stream(c);
        rng.next_u64()
    })
}

/// Problem size and repetition count of a Monte Carlo experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub p: usize,
    pub trials: usize,
}

impl Scale {
    pub const DESK: Scale = Scale { p: 512, trials: 20 };
    pub const PAPER: Scale = Scale {
        p: 2100,
        trials: 50,
    };
}

/// Theory plus Monte Carlo over a grid of one parameter.
#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub spectrum: SpectrumSpec<f64>,
    pub prior: Prior<f64>,
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    /// Held fixed when sweeping `1/sigma2`.
    pub c: f64,
    /// Held fixed when sweeping `c`.
    pub sigma2: f64,
    pub scale: Scale,
    pub seed: u64,
    pub vamp: VampConfig,
    /// Rotate Gaussian-prior designs by a Haar matrix before running VAMP.
    pub rotate: bool,
    /// Also compute the exact posterior mean (Gaussian prior only).
    pub exact_posterior: bool,
    pub solver: SolverOptions,
}

impl SimulationSpec {
    pub fn new(
        spectrum: SpectrumSpec<f64>,
        prior: Prior<f64>,
        axis: SweepAxis,
        grid: Vec<f64>,
    ) -> Self {
        let gaussian = prior.is_gaussian();
        Self {
            spectrum,
            prior,
            axis,
            grid,
            c: 1.0,
            sigma2: 0.1,
            scale: Scale::DESK,
            seed: 0,
            vamp: VampConfig::default(),
            rotate: false,
            exact_posterior: gaussian,
            solver: SolverOptions::default(),
        }
    }

    pub fn base_problem(&self) -> Result<ReplicaProblem<f64>> {
        ReplicaProblem::new(
            self.spectrum.clone(),
            self.prior.clone(),
            self.c,
            self.sigma2,
        )
    }

    pub fn validate(&self) -> Result<()> {
        crate::replica::validate_grid(&self.grid)?;
        if self.scale.p == 0 || self.scale.trials == 0 {
            return Err(Error::Domain("p and trials must be positive".into()));
        }
        if self.exact_posterior && !self.prior.is_gaussian() {
            return Err(Error::Prior(
                "exact posterior needs a gaussian prior".into(),
            ));
        }
        if self.rotate && !self.prior.is_gaussian() {
            return Err(Error::Prior("rotation needs a gaussian prior".into()));
        }
        self.vamp.validate()?;
        self.solver.validate()?;
        self.base_problem().map(|_| ())
    }
}

/// Outcome of one seed at one grid point.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub seed: u64,
    /// Trace with the final estimate dropped.
    pub trace: Option<VampTrace>,
    pub vamp_mse: f64,
    pub vamp_ymmse: f64,
    pub exact_mse: Option<f64>,
    pub error: Option<String>,
}

impl TrialResult {
    pub fn ok(&self) -> bool {
        self.error.is_none()
            && self
                .trace
                .as_ref()
                .is_some_and(|t| t.termination != Termination::Diverged)
    }
}

#[derive(Debug, Clone)]
pub struct SimulationPoint {
    pub value: f64,
    pub problem: ReplicaProblem<f64>,
    pub theory: std::result::Result<(PredictionReport<f64>, Branch), String>,
    pub trials: Vec<TrialResult>,
    pub stability: Option<StabilityReport>,
}

/// Mean, min, max and std of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let (mean, min, max, std) = summarize(xs);
        Some(Self {
            mean,
            min,
            max,
            std,
            n: xs.len(),
        })
    }

    /// Standard error of the mean.
    pub fn sem(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }
}

impl SimulationPoint {
    fn collect(&self, f: impl Fn(&TrialResult) -> Option<f64>) -> Vec<f64> {
        self.trials
            .iter()
            .filter(|t| t.ok())
            .filter_map(f)
            .collect()
    }

    pub fn vamp_mse(&self) -> Option<Summary> {
        Summary::of(&self.collect(|t| Some(t.vamp_mse)))
    }

    pub fn vamp_ymmse(&self) -> Option<Summary> {
        Summary::of(&self.collect(|t| Some(t.vamp_ymmse)))
    }

    pub fn exact_mse(&self) -> Option<Summary> {
        Summary::of(&self.collect(|t| t.exact_mse))
    }

    pub fn failed(&self) -> usize {
        self.trials.iter().filter(|t| !t.ok()).count()
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub spec: SimulationSpec,
    pub points: Vec<SimulationPoint>,
}

impl Simulation {
    pub fn failed_trials(&self) -> usize {
        self.points.iter().map(SimulationPoint::failed).sum()
    }
}

fn run_trial(spec: &SimulationSpec, problem: &ReplicaProblem<f64>, seed: u64) -> TrialResult {
    let go = || -> Result<(VampTrace, f64, f64, Option<f64>)> {
        let ispec = InstanceSpec::from_ratio(
            problem.c,
            spec.scale.p,
            spec.spectrum.clone(),
            spec.prior.clone(),
            problem.sigma2,
            seed,
        )?;
        let mut inst = sample_instance(&ispec)?;
        if spec.rotate {
            inst = rotate_gaussian_instance(&inst, derive_seed(seed, &[u64::MAX]))?;
        }
        let exact = if spec.exact_posterior {
            let mean = exact_gaussian_posterior_mean(&inst, &spec.prior)?;
            Some(empirical_mse(&mean, &inst)?)
        } else {
            None
        };
        let mut trace = vamp_run(&inst, &spec.prior, &spec.vamp)?;
        let mse = empirical_mse(&trace.estimate, &inst)?;
        let ymmse = empirical_ymmse(&trace.estimate, &inst)?;
        trace.estimate = nalgebra::DVector::zeros(0);
        Ok((trace, mse, ymmse, exact))
    };
    match go() {
        Ok((trace, vamp_mse, vamp_ymmse, exact_mse)) => TrialResult {
            seed,
            trace: Some(trace),
            vamp_mse,
            vamp_ymmse,
            exact_mse,
            error: None,
        },
        Err(e) => TrialResult {
            seed,
            trace: None,
            vamp_mse: f64::NAN,
            vamp_ymmse: f64::NAN,
            exact_mse: None,
            error: Some(e.to_string()),
        },
    }
}

fn theory(
    problem: &ReplicaProblem<f64>,
    opts: &SolverOptions,
) -> std::result::Result<(PredictionReport<f64>, Branch), String> {
    let outcome = solve_replica(problem, opts).map_err(|e| e.to_string())?;
    let system = ReplicaSystem::new(problem, opts).map_err(|e| e.to_string())?;
    let pred = system
        .prediction(&outcome.global)
        .map_err(|e| e.to_string())?;
    Ok((pred, outcome.branch()))
}

pub fn simulate(spec: &SimulationSpec) -> Result<Simulation> {
    spec.validate()?;
    let base = spec.base_problem()?;
    let problems: Vec<ReplicaProblem<f64>> = spec
        .grid
        .iter()
        .map(|&v| spec.axis.apply(&base, v))
        .collect();
    for pr in &problems {
        pr.validate()?;
    }
    let theories: Vec<_> = problems
        .par_iter()
        .map(|pr| theory(pr, &spec.solver))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..problems.len())
        .flat_map(|i| (0..spec.scale.trials).map(move |t| (i, t)))
        .collect();
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let seed = derive_seed(spec.seed, &[i as u64, t as u64]);
            run_trial(spec, &problems[i], seed)
        })
        .collect();
    let mut results = results.into_iter();
    let points = problems
        .into_iter()
        .zip(theories)
        .zip(&spec.grid)
        .map(|((problem, theory), &value)| {
            let trials: Vec<TrialResult> = results.by_ref().take(spec.scale.trials).collect();
            let traces: Vec<VampTrace> = trials
                .iter()
                .filter(|t| t.ok())
                .filter_map(|t| t.trace.clone())
                .collect();
            let stability = match &theory {
                Ok((pred, _)) => stability_report(&traces, pred).ok(),
                Err(_) => None,
            };
            SimulationPoint {
                value,
                problem,
                theory,
                trials,
                stability,
            }
        })
        .collect();
    Ok(Simulation {
        spec: spec.clone(),
        points,
    })
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// One row per grid point: theory next to empirical statistics.
pub fn simulation_table(sim: &Simulation) -> Table {
    let mut header = vec![
        "value".to_string(),
        "c".into(),
        "sigma2".into(),
        "spectrum_id".into(),
        "prior_id".into(),
        "theory_mmse".into(),
        "theory_ymmse".into(),
        "branch".into(),
    ];
    for prefix in ["vamp_mse", "vamp_ymmse", "exact_mse"] {
        for stat in ["mean", "min", "max", "std"] {
            header.push(format!("{prefix}_{stat}"));
        }
    }
    header.extend(
        ["within_10pct", "oscillating", "trials_ok", "trials_failed"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut table = Table::new(header);
    table
        .preamble
        .push(format!("axis={}", sim.spec.axis.name()));
    for pt in &sim.points {
        let (tm, ty, br) = match &pt.theory {
            Ok((pred, br)) => (
                fmt_num(pred.mmse_total),
                fmt_num(pred.ymmse),
                br.to_string(),
            ),
            Err(_) => (String::new(), String::new(), "failed".into()),
        };
        let mut row = vec![
            fmt_num(pt.value),
            fmt_num(pt.problem.c),
            fmt_num(pt.problem.sigma2),
            pt.problem.spectrum.to_string(),
            pt.problem.prior.id(),
            tm,
            ty,
            br,
        ];
        for s in [pt.vamp_mse(), pt.vamp_ymmse(), pt.exact_mse()] {
            row.push(opt_num(s.map(|s| s.mean)));
            row.push(opt_num(s.map(|s| s.min)));
            row.push(opt_num(s.map(|s| s.max)));
            row.push(opt_num(s.map(|s| s.std)));
        }
        row.push(opt_num(pt.stability.as_ref().map(|s| s.within_10pct)));
        row.push(opt_num(pt.stability.as_ref().map(|s| s.oscillating)));
        row.push((pt.trials.len() - pt.failed()).to_string());
        row.push(pt.failed().to_string());
        table.rows.push(row);
    }
    table
}

/// Location of the transition along a sweep: the first branch crossing, or
/// failing that the midpoint of the steepest drop of `mmse_total`.
pub fn locate_transition(sw: &Sweep<f64>) -> Option<f64> {
    if let Some(&t) = sw.transitions.first() {
        return Some(t);
    }
    let pts: Vec<(f64, f64)> = sw
        .points
        .iter()
        .filter_map(|p| p.prediction.as_ref().map(|pr| (p.value, pr.mmse_total)))
        .collect();
    pts.windows(2)
        .map(|w| {
            (
                (w[0].0 + w[1].0) / 2.0,
                (w[0].1 - w[1].1) / (w[1].0 - w[0].0),
            )
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(x, _)| x)
}

/// Quantity plotted on the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mse,
    Ymmse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    F1a,
    F1b,
    F2a,
    F2b,
    F3a,
    F3b,
    F4a,
    F4b,
}

impl FigureId {
    pub const ALL: [FigureId; 8] = [
        FigureId::F1a,
        FigureId::F1b,
        FigureId::F2a,
        FigureId::F2b,
        FigureId::F3a,
        FigureId::F3b,
        FigureId::F4a,
        FigureId::F4b,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureId::F1a => "1a",
            FigureId::F1b => "1b",
            FigureId::F2a => "2a",
            FigureId::F2b => "2b",
            FigureId::F3a => "3a",
            FigureId::F3b => "3b",
            FigureId::F4a => "4a",
            FigureId::F4b => "4b",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        FigureId::ALL
            .into_iter()
            .find(|id| id.as_str() == t)
            .ok_or_else(|| {
                let valid: Vec<&str> = FigureId::ALL.iter().map(|i| i.as_str()).collect();
                Error::parse(
                    s,
                    format!("unknown figure; valid ids are {}", valid.join(", ")),
                )
            })
    }
}

/// One curve of a figure.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub spectrum: SpectrumSpec<f64>,
}

#[derive(Debug, Clone)]
pub struct FigureSpec {
    pub id: FigureId,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub metric: Metric,
    pub axis: SweepAxis,
    pub prior: Prior<f64>,
    pub series: Vec<Series>,
    pub c: f64,
    pub sigma2: f64,
    /// Theory is evaluated on every point; Monte Carlo on every
    /// `sim_every`-th point.
    pub theory_grid: Vec<f64>,
    pub sim_every: usize,
    pub rotate: bool,
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| snap(lo + i as f64 * step)).collect()
}

/// Rounds away accumulated binary noise, e.g. `0.15000000000000002`.
pub fn snap(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn series(label: &str, spectrum: &str) -> Series {
    Series {
        label: label.to_string(),
        spectrum: spectrum.parse().expect("built-in spectrum"),
    }
}

impl FigureSpec {
    /// The catalogue. `2a`/`3a` and `2b`/`3b` name the same experiments.
    pub fn get(id: FigureId) -> FigureSpec {
        let rademacher = Prior::Rademacher;
        let block_pair = || {
            vec![
                series("A={0.9,0.1}", "0.9:0.5,0.1:0.5"),
                series("A={0.9,0.8,0.7}", "0.9,0.8,0.7"),
            ]
        };
        let rot_pair = || vec![series("A=0", "0"), series("A=0.9 I", "0.9")];
        let c_sweep = |id, title: &str, metric, prior, series, rotate| FigureSpec {
            id,
            title: title.to_string(),
            x_label: "N/p".into(),
            y_label: match metric {
                Metric::Mse => "MSE".into(),
                Metric::Ymmse => "YMMSE".into(),
            },
            metric,
            axis: SweepAxis::C,
            prior,
            series,
            c: 1.0,
            sigma2: 0.1,
            theory_grid: grid(0.1, 3.0, 0.05),
            sim_every: 2,
            rotate,
        };
        match id {
            FigureId::F1a => c_sweep(
                id,
                "Gaussian prior, sigma2 = 0.1",
                Metric::Mse,
                Prior::Gaussian { rho: 1.0 },
                vec![
                    series("A=0", "0"),
                    series("A=diag(0.9,0.7,0.5,0.3,0.1)", "0.9,0.7,0.5,0.3,0.1"),
                ],
                true,
            ),
            FigureId::F1b => c_sweep(
                id,
                "Rademacher prior, sigma2 = 0.1",
                Metric::Mse,
                rademacher,
                rot_pair(),
                false,
            ),
            FigureId::F2a | FigureId::F3a => c_sweep(
                id,
                "Rademacher prior, block spectra, sigma2 = 0.1",
                Metric::Mse,
                rademacher,
                block_pair(),
                false,
            ),
            FigureId::F2b | FigureId::F3b => FigureSpec {
                id,
                title: "Rademacher prior, A={0.9,0.1}, N/p = 0.3".into(),
                x_label: "1/sigma2".into(),
                y_label: "MSE".into(),
                metric: Metric::Mse,
                axis: SweepAxis::InverseSigma2,
                prior: rademacher,
                series: vec![series("A={0.9,0.1}", "0.9:0.5,0.1:0.5")],
                c: 0.3,
                sigma2: 0.1,
                theory_grid: grid(1.0, 50.0, 1.0),
                sim_every: 3,
                rotate: false,
            },
            FigureId::F4a => c_sweep(
                id,
                "YMMSE, block spectra, sigma2 = 0.1",
                Metric::Ymmse,
                rademacher,
                block_pair(),
                false,
            ),
            FigureId::F4b => c_sweep(
                id,
                "YMMSE, rotationally invariant designs, sigma2 = 0.1",
                Metric::Ymmse,
                rademacher,
                rot_pair(),
                false,
            ),
        }
    }

    pub fn sim_grid(&self) -> Vec<f64> {
        self.theory_grid
            .iter()
            .copied()
            .step_by(self.sim_every.max(1))
            .collect()
    }
}

/// Runs a figure and returns its table: one row per `(series, x)` with the
/// theory value and, on the Monte Carlo subgrid, empirical statistics.
/// The preamble carries the labels so a plot can be drawn from the table alone.
pub fn run_figure(
    fig: &FigureSpec,
    scale: Scale,
    seed: u64,
    vamp: &VampConfig,
    solver: &SolverOptions,
) -> Result<Table> {
    let mut table = Table::new([
        "series",
        "x",
        "theory",
        "emp_mean",
        "emp_min",
        "emp_max",
        "emp_std",
        "exact_mean",
        "trials",
    ]);
    table.preamble.extend([
        format!("figure={}", fig.id),
        format!("title={}", fig.title),
        format!("x_label={}", fig.x_label),
        format!("y_label={}", fig.y_label),
        format!("p={}", scale.p),
        format!("trials={}", scale.trials),
        format!("seed={seed}"),
    ]);
    let sim_grid = fig.sim_grid();
    for (si, s) in fig.series.iter().enumerate() {
        let base = ReplicaProblem::new(s.spectrum.clone(), fig.prior.clone(), fig.c, fig.sigma2)?;
        let theory = sweep(&base, fig.axis, &fig.theory_grid, solver, 1e-4)?;
        let mut sim = SimulationSpec::new(
            s.spectrum.clone(),
            fig.prior.clone(),
            fig.axis,
            sim_grid.clone(),
        );
        sim.c = fig.c;
        sim.sigma2 = fig.sigma2;
        sim.scale = scale;
        sim.seed = derive_seed(seed, &[si as u64]);
        sim.vamp = *vamp;
        sim.rotate = fig.rotate;
        sim.solver = *solver;
        let sim = simulate(&sim)?;
        for pt in &theory.points {
            let th = pt.prediction.as_ref().map(|pr| match fig.metric {
                Metric::Mse => pr.mmse_total,
                Metric::Ymmse => pr.ymmse,
            });
            let mut row = vec![s.label.clone(), fmt_num(pt.value), opt_num(th)];
            let emp = sim.points.iter().find(|sp| sp.value == pt.value);
            let stats = emp.and_then(|sp| match fig.metric {
                Metric::Mse => sp.vamp_mse(),
                Metric::Ymmse => sp.vamp_ymmse(),
            });
            row.extend([
                opt_num(stats.map(|s| s.mean)),
                opt_num(stats.map(|s| s.min)),
                opt_num(stats.map(|s| s.max)),
                opt_num(stats.map(|s| s.std)),
                opt_num(
                    emp.and_then(|sp| sp.exact_mse())
                        .filter(|_| fig.metric == Metric::Mse)
                        .map(|s| s.mean),
                ),
                stats.map_or(String::new(), |s| s.n.to_string()),
            ]);
            table.push_row(row)?;
        }
        for t in &theory.transitions {
            table
                .trailer
                .push(format!("transition[{}]={}", s.label, fmt_num(*t)));
        }
    }
    Ok(table)
}

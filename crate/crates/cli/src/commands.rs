use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use srm::experiments::{
    run_figure, simulate as run_simulation, simulation_table, FigureId, FigureSpec, Scale,
    SimulationSpec,
};
use srm::kms::SpectrumSpec;
use srm::plot::plot_from_csv;
use srm::record::{fmt_num, solution_record, sweep_table, Table};
use srm::replica::{
    solve_replica, sweep as run_sweep, ReplicaProblem, ReplicaSystem, SolveError, SolverOptions,
    SweepAxis,
};
use srm::scalar_channel::Prior;
use srm::vamp::VampConfig;

use crate::config::{
    config_preamble, parse_grid, parse_key, require, ConfigFile, ReproduceArgs, SimulateArgs,
    SolveArgs, SweepArgs,
};
use crate::CliError;

const DEFAULT_SPECTRUM: &str = "0";
const DEFAULT_PRIOR: &str = "rademacher";
const DEFAULT_SIGMA2: f64 = 0.1;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Explicit path, else `out_dir/default_name`, else standard output.
fn emit(
    text: &str,
    explicit: Option<&Path>,
    out_dir: Option<&Path>,
    default_name: &str,
) -> Result<(), CliError> {
    match (explicit, out_dir) {
        (Some(p), _) => write_file(p, text),
        (None, Some(dir)) => write_file(&dir.join(default_name), text),
        (None, None) => {
            print!("{text}");
            Ok(())
        }
    }
}

fn spectrum(text: &str) -> Result<SpectrumSpec<f64>, CliError> {
    parse_key("spectrum", text)
}

fn prior(text: &str) -> Result<Prior<f64>, CliError> {
    parse_key("prior", text)
}

fn axis(text: &str) -> Result<SweepAxis, CliError> {
    match text {
        "c" => Ok(SweepAxis::C),
        "inv_sigma2" | "inv-sigma2" => Ok(SweepAxis::InverseSigma2),
        other => Err(CliError::Config(format!(
            "invalid `axis` = {other:?}: expected `c` or `inv_sigma2`"
        ))),
    }
}

fn solver_options(k_bins: usize, multistart: usize) -> Result<SolverOptions, CliError> {
    let opts = SolverOptions {
        k_bins,
        multistart,
        ..SolverOptions::default()
    };
    opts.validate()?;
    Ok(opts)
}

fn with_preamble(mut table: Table, cfg: &ConfigFile) -> Result<Table, CliError> {
    let mut pre = config_preamble(cfg)?;
    pre.append(&mut table.preamble);
    table.preamble = pre;
    Ok(table)
}

fn non_convergence(e: SolveError<f64>) -> CliError {
    match e {
        SolveError::Invalid(msg) => CliError::Config(msg),
        other => CliError::NonConvergence(other.to_string()),
    }
}

pub fn solve(mut a: SolveArgs) -> Result<(), CliError> {
    a.spectrum.get_or_insert_with(|| DEFAULT_SPECTRUM.into());
    a.prior.get_or_insert_with(|| DEFAULT_PRIOR.into());
    a.sigma2.get_or_insert(DEFAULT_SIGMA2);
    a.k_bins.get_or_insert(32);
    a.multistart.get_or_insert(0);
    let c = require("c", &a.c)?;
    let problem = ReplicaProblem::new(
        spectrum(a.spectrum.as_deref().unwrap_or_default())?,
        prior(a.prior.as_deref().unwrap_or_default())?,
        c,
        a.sigma2.unwrap_or_default(),
    )?;
    let opts = solver_options(
        a.k_bins.unwrap_or_default(),
        a.multistart.unwrap_or_default(),
    )?;
    let outcome = solve_replica(&problem, &opts).map_err(non_convergence)?;
    let system = ReplicaSystem::new(&problem, &opts)?;
    let pred = system.prediction(&outcome.global)?;

    let mut text = String::new();
    let (_, hash) = crate::config::config_digest(&ConfigFile {
        solve: Some(a.clone()),
        ..Default::default()
    })?;
    let _ = writeln!(text, "config_hash = {hash}");
    text.push_str(&solution_record(
        &problem,
        &outcome.global,
        pred.ymmse,
        &outcome.branch().to_string(),
    ));
    for (i, m) in pred.mmse_per_block.iter().enumerate() {
        let _ = writeln!(text, "mmse_block_{} = {}", i + 1, fmt_num(*m));
    }
    let _ = writeln!(text, "mutual_info = {}", fmt_num(pred.mutual_info));
    let _ = writeln!(text, "residual = {:e}", outcome.global.residual);
    let _ = writeln!(
        text,
        "phase_transition_candidate = {}",
        outcome.phase_transition_candidate
    );
    let _ = writeln!(text, "degenerate = {}", outcome.degenerate);
    let _ = writeln!(text, "critical_points = {}", outcome.critical.len());
    for (i, s) in outcome.critical.iter().enumerate() {
        let r2: Vec<String> = s.r2.iter().map(|v| fmt_num(*v)).collect();
        let _ = writeln!(
            text,
            "critical_{} = start={} i_rs={} mmse_total={} r2=[{}]",
            i + 1,
            s.converged_from,
            fmt_num(s.i_rs),
            fmt_num(s.mmse_total()),
            r2.join(" ")
        );
    }
    print!("{text}");
    if let Some(p) = &a.output {
        write_file(p, &text)?;
    }
    if !outcome.global.converged {
        return Err(CliError::NonConvergence(format!(
            "residual {:e} above tolerance",
            outcome.global.residual
        )));
    }
    Ok(())
}

pub fn sweep(mut a: SweepArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    a.spectrum.get_or_insert_with(|| DEFAULT_SPECTRUM.into());
    a.prior.get_or_insert_with(|| DEFAULT_PRIOR.into());
    a.axis.get_or_insert_with(|| "c".into());
    a.c.get_or_insert(1.0);
    a.sigma2.get_or_insert(DEFAULT_SIGMA2);
    a.k_bins.get_or_insert(32);
    a.multistart.get_or_insert(0);
    a.transition_tol.get_or_insert(1e-4);
    let grid = parse_grid("grid", &require("grid", &a.grid)?)?;
    let base = ReplicaProblem::new(
        spectrum(a.spectrum.as_deref().unwrap_or_default())?,
        prior(a.prior.as_deref().unwrap_or_default())?,
        a.c.unwrap_or_default(),
        a.sigma2.unwrap_or_default(),
    )?;
    let ax = axis(a.axis.as_deref().unwrap_or_default())?;
    let tol = a.transition_tol.unwrap_or_default();
    if tol.is_nan() || tol <= 0.0 {
        return Err(CliError::Config("`transition_tol` must be positive".into()));
    }
    let opts = solver_options(
        a.k_bins.unwrap_or_default(),
        a.multistart.unwrap_or_default(),
    )?;
    let k = ReplicaSystem::new(&base, &opts)?.atoms();
    let sw = run_sweep(&base, ax, &grid, &opts, tol)?;
    let cfg = ConfigFile {
        sweep: Some(a.clone()),
        ..Default::default()
    };
    let table = with_preamble(sweep_table(&sw, k), &cfg)?;
    emit(
        &table.to_csv_string(),
        a.output.as_deref(),
        out_dir,
        "sweep.csv",
    )?;
    let failed = sw.points.iter().filter(|p| p.outcome.is_err()).count();
    if failed == sw.points.len() {
        return Err(CliError::NonConvergence("every grid point failed".into()));
    }
    if failed > 0 {
        eprintln!(
            "{failed} of {} grid points failed; see the status column",
            sw.points.len()
        );
    }
    Ok(())
}

pub fn simulate(mut a: SimulateArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    a.spectrum.get_or_insert_with(|| DEFAULT_SPECTRUM.into());
    a.prior.get_or_insert_with(|| DEFAULT_PRIOR.into());
    a.axis.get_or_insert_with(|| "c".into());
    a.c.get_or_insert(1.0);
    a.sigma2.get_or_insert(DEFAULT_SIGMA2);
    let scale = if a.paper_scale.unwrap_or(false) {
        Scale::PAPER
    } else {
        Scale::DESK
    };
    a.paper_scale.get_or_insert(false);
    a.p.get_or_insert(scale.p);
    a.trials.get_or_insert(scale.trials);
    a.seed.get_or_insert(0);
    a.rotate.get_or_insert(false);
    let vamp_default = VampConfig::default();
    a.damping.get_or_insert(vamp_default.damping);
    a.max_iter.get_or_insert(vamp_default.max_iter);

    let grid = parse_grid("grid", &require("grid", &a.grid)?)?;
    let pr = prior(a.prior.as_deref().unwrap_or_default())?;
    let mut spec = SimulationSpec::new(
        spectrum(a.spectrum.as_deref().unwrap_or_default())?,
        pr,
        axis(a.axis.as_deref().unwrap_or_default())?,
        grid,
    );
    spec.c = a.c.unwrap_or_default();
    spec.sigma2 = a.sigma2.unwrap_or_default();
    spec.scale = Scale {
        p: a.p.unwrap_or_default(),
        trials: a.trials.unwrap_or_default(),
    };
    spec.seed = a.seed.unwrap_or_default();
    spec.rotate = a.rotate.unwrap_or_default();
    spec.vamp = VampConfig {
        damping: a.damping.unwrap_or_default(),
        max_iter: a.max_iter.unwrap_or_default(),
        ..vamp_default
    };
    let sim = run_simulation(&spec)?;
    let cfg = ConfigFile {
        simulate: Some(a.clone()),
        ..Default::default()
    };
    let table = with_preamble(simulation_table(&sim), &cfg)?;
    emit(
        &table.to_csv_string(),
        a.output.as_deref(),
        out_dir,
        "simulate.csv",
    )?;
    match sim.failed_trials() {
        0 => Ok(()),
        n => Err(CliError::Simulation(format!(
            "{n} trials failed; see the trials_failed column"
        ))),
    }
}

pub fn reproduce(mut a: ReproduceArgs, out_dir: Option<&Path>) -> Result<(), CliError> {
    let dir: PathBuf = out_dir.map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    if let Some(csv_path) = a.from_csv.clone() {
        let csv = std::fs::read_to_string(&csv_path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", csv_path.display())))?;
        let svg = plot_from_csv(&csv)?;
        let stem = csv_path
            .file_stem()
            .map_or_else(|| "figure".into(), |s| s.to_string_lossy().into_owned());
        return write_file(&dir.join(format!("{stem}.svg")), &svg);
    }
    let id: FigureId = parse_key("figure", &require("figure", &a.figure)?)?;
    a.figure = Some(id.to_string());
    let scale = if a.paper_scale.unwrap_or(false) {
        Scale::PAPER
    } else {
        Scale::DESK
    };
    a.paper_scale.get_or_insert(false);
    a.p.get_or_insert(scale.p);
    a.trials.get_or_insert(scale.trials);
    a.seed.get_or_insert(0);
    let scale = Scale {
        p: a.p.unwrap_or_default(),
        trials: a.trials.unwrap_or_default(),
    };
    let fig = FigureSpec::get(id);
    let table = run_figure(
        &fig,
        scale,
        a.seed.unwrap_or_default(),
        &VampConfig::default(),
        &SolverOptions::default(),
    )?;
    let cfg = ConfigFile {
        reproduce: Some(a.clone()),
        ..Default::default()
    };
    let table = with_preamble(table, &cfg)?;
    let csv = table.to_csv_string();
    let svg = plot_from_csv(&csv)?;
    write_file(&dir.join(format!("fig{id}.csv")), &csv)?;
    write_file(&dir.join(format!("fig{id}.svg")), &svg)
}

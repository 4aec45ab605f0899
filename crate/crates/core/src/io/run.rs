//! Batch orchestration: one config in, CSV/snapshot/summary files out.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{
    energy_breakdown_with, energy_law_residual, twist_constraint_residual, EnergyBreakdown, EnergyCsv,
};
use crate::dynamics::{Engine, Mode, SimState, SpectralState};
use crate::error::{QshError, Result};
use crate::io::config::{InitialData, RunConfig, RunMode};
use crate::io::presets::initial_data_presets;
use crate::io::snapshot::{read_snapshot_on, write_snapshot};
use crate::params::{validate, Regime, ValidationReport};
use crate::spectral::{Field, Grid};
use crate::twistwave::{
    compare_full_vs_radial, radial_cfl_dt, write_profile_csv, CompareReport, RadialGrid, RadialState,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    ValidationFailure,
    NumericalFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::ValidationFailure => 1,
            RunStatus::NumericalFailure => 2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Norms {
    pub v_l2: f64,
    pub q_l2: f64,
    pub w_l2: f64,
    pub v_max: f64,
    pub q_max: f64,
    pub w_max: f64,
}

impl Norms {
    pub fn of(state: &SimState) -> Norms {
        let l2 = |f: &Field| {
            let cell = f.grid.spacing().powi(f.dim() as i32);
            (f.comps.iter().flatten().map(|x| x * x).sum::<f64>() * cell).sqrt()
        };
        Norms {
            v_l2: l2(&state.v),
            q_l2: l2(&state.q),
            w_l2: l2(&state.w),
            v_max: state.v.max_abs(),
            q_max: state.q.max_abs(),
            w_max: state.w.max_abs(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareSummary {
    pub radial_cells: usize,
    pub radius: f64,
    pub final_discrepancy: f64,
    pub max_constraint_residual: f64,
    pub max_origin_ratio: f64,
    pub origin_tolerance: f64,
    pub origin_ok: bool,
}

/// Machine-readable record written to `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub mode: RunMode,
    pub status: RunStatus,
    pub t_final: f64,
    pub steps: usize,
    pub dt: Option<f64>,
    pub final_norms: Option<Norms>,
    pub energy_initial: Option<f64>,
    pub energy_final: Option<f64>,
    /// Total energy non-increasing over the output samples, up to `1e−8·E(0)`.
    pub monotone: Option<bool>,
    pub max_energy_increase: Option<f64>,
    pub max_energy_law_residual: Option<f64>,
    pub max_constraint_residual: Option<f64>,
    pub failure_time: Option<f64>,
    pub failure: Option<String>,
    pub validation: ValidationReport,
    pub compare: Option<CompareSummary>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub summary: RunSummary,
    pub output_dir: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| QshError::io(path, e))
}

fn write_summary(dir: &Path, summary: &RunSummary) -> Result<()> {
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| QshError::InvalidArgument(format!("summary serialization failed: {e}")))?;
    fs::write(&path, text + "\n").map_err(|e| QshError::io(&path, e))
}

fn blank_summary(config: &RunConfig, validation: ValidationReport) -> RunSummary {
    RunSummary {
        mode: config.mode,
        status: RunStatus::Success,
        t_final: 0.0,
        steps: 0,
        dt: None,
        final_norms: None,
        energy_initial: None,
        energy_final: None,
        monotone: None,
        max_energy_increase: None,
        max_energy_law_residual: None,
        max_constraint_residual: None,
        failure_time: None,
        failure: None,
        validation,
        compare: None,
        warnings: config.warnings.clone(),
    }
}

pub fn initial_state(config: &RunConfig, grid: &std::sync::Arc<Grid>) -> Result<SimState> {
    match &config.initial_data {
        InitialData::Preset { name, params } => initial_data_presets(name, params, grid),
        InitialData::Snapshot(path) => read_snapshot_on(path, grid),
    }
}

/// Executes the configured mode inside `config.output_dir`.
///
/// Numerical blow-up is reported through [`RunStatus::NumericalFailure`] with
/// the last finite state saved as `last_good.qsh`; configuration and I/O
/// problems are returned as errors.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| QshError::io(&dir, e))?;
    let validation = validate(&config.coefficients, config.regime);
    let mut summary = blank_summary(config, validation.clone());

    if config.mode == RunMode::Validate {
        summary.status = if validation.ok {
            RunStatus::Success
        } else {
            RunStatus::ValidationFailure
        };
        write_summary(&dir, &summary)?;
        return Ok(RunOutcome {
            status: summary.status,
            summary,
            output_dir: dir,
        });
    }

    // Only the well-posedness conditions block a run; the regime report is
    // recorded so that runs outside it remain possible.
    let basic = validate(&config.coefficients, Regime::Unconstrained);
    if !basic.ok {
        summary.status = RunStatus::ValidationFailure;
        summary.validation = basic;
        write_summary(&dir, &summary)?;
        return Ok(RunOutcome {
            status: RunStatus::ValidationFailure,
            summary,
            output_dir: dir,
        });
    }
    if !validation.ok {
        summary
            .warnings
            .push(format!("coefficients violate the {:?} hypotheses", config.regime));
    }

    let grid = Grid::new(config.dim, config.n, config.domain_length)?;
    match config.mode {
        RunMode::TwistwaveCompare => run_compare(config, &grid, &dir, summary),
        _ => run_evolution(config, &grid, &dir, summary),
    }
}

fn run_evolution(
    config: &RunConfig,
    grid: &std::sync::Arc<Grid>,
    dir: &Path,
    mut summary: RunSummary,
) -> Result<RunOutcome> {
    let mode = if config.mode == RunMode::QOnly {
        Mode::QOnly
    } else {
        Mode::Full
    };
    let engine = Engine::new(grid, &config.coefficients, mode)?
        .with_integrator(config.integrator)
        .with_mollifier(config.mollifier_n);
    let mut initial = initial_state(config, grid)?;
    if mode == Mode::QOnly {
        initial.v = Field::zeros(grid, initial.v.rank);
    }
    let mut spec = SpectralState::from_state(&initial);
    engine.prepare(&mut spec);
    let start = spec.to_state();

    let dt_target = match config.dt {
        Some(dt) => dt,
        None => {
            let dt = engine.stable_dt(&start, config.cfl_safety);
            if !dt.is_finite() {
                return Err(QshError::InvalidArgument(
                    "automatic step is unbounded for these coefficients; set time.dt".into(),
                ));
            }
            dt
        }
    };
    let span = config.t_end - start.t;
    if !(span > 0.0) {
        return Err(QshError::InvalidArgument(format!(
            "t_end = {} is not after the initial time {}",
            config.t_end, start.t
        )));
    }
    let steps = (span / dt_target).ceil().max(1.0) as usize;
    let dt = span / steps as f64;
    summary.dt = Some(dt);
    let stable = engine.stable_dt(&start, 1.0);
    if dt > stable {
        summary.warnings.push(format!(
            "dt = {dt:.3e} exceeds the stability estimate {stable:.3e}"
        ));
    }

    let mut csv = EnergyCsv::new(create(&dir.join("energy.csv"))?).map_err(|e| QshError::io(dir.join("energy.csv"), e))?;
    let mut history: Vec<(f64, EnergyBreakdown)> = Vec::new();
    let mut max_residual = 0.0f64;
    let mut sample = |state: &SimState, csv: &mut EnergyCsv<BufWriter<File>>| -> Result<()> {
        let e = energy_breakdown_with(state, &config.coefficients, config.elastic_convention);
        let r = twist_constraint_residual(&state.q, &state.w, &config.coefficients);
        max_residual = max_residual.max(r);
        csv.row(state.t, &e, r).map_err(|e| QshError::io(dir.join("energy.csv"), e))?;
        history.push((state.t, e));
        Ok(())
    };
    sample(&start, &mut csv)?;

    let mut snapshot_times: Vec<f64> = config.snapshot_times.clone();
    snapshot_times.sort_by(f64::total_cmp);
    let mut next_snapshot = 0;
    let mut failure = None;
    let mut last_good = start.clone();
    let mut done = 0;
    for n in 1..=steps {
        match engine.step(&spec, dt) {
            Ok(next) => spec = next,
            Err(QshError::NonFinite { t }) => {
                failure = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
        done = n;
        let at_output = n % config.output_every == 0 || n == steps;
        let at_snapshot = next_snapshot < snapshot_times.len()
            && spec.t >= snapshot_times[next_snapshot] - 0.5 * dt;
        if at_output || at_snapshot {
            let state = spec.to_state();
            if at_output {
                sample(&state, &mut csv)?;
            }
            while next_snapshot < snapshot_times.len() && state.t >= snapshot_times[next_snapshot] - 0.5 * dt {
                write_snapshot(&state, dir.join(format!("snapshot_{next_snapshot:04}.qsh")))?;
                next_snapshot += 1;
            }
            last_good = state;
        }
    }
    csv.flush().map_err(|e| QshError::io(dir.join("energy.csv"), e))?;
    drop(csv);

    let status = if let Some(t) = failure {
        write_snapshot(&last_good, dir.join("last_good.qsh"))?;
        summary.failure_time = Some(t);
        summary.failure = Some(format!("non-finite values after the step ending at t = {t}"));
        summary.final_norms = Some(Norms::of(&last_good));
        summary.t_final = last_good.t;
        RunStatus::NumericalFailure
    } else {
        let last = spec.to_state();
        write_snapshot(&last, dir.join("final.qsh"))?;
        summary.final_norms = Some(Norms::of(&last));
        summary.t_final = last.t;
        RunStatus::Success
    };
    summary.steps = done;

    let e0 = history[0].1.total;
    let tol = 1e-8 * e0.abs().max(f64::MIN_POSITIVE);
    let increase = history
        .windows(2)
        .map(|w| w[1].1.total - w[0].1.total)
        .fold(0.0f64, f64::max);
    summary.energy_initial = Some(e0);
    summary.energy_final = history.last().map(|h| h.1.total);
    summary.max_energy_increase = Some(increase);
    summary.monotone = Some(increase <= tol);
    summary.max_constraint_residual = Some(max_residual);
    if history.len() >= 3 && history.windows(2).all(|w| ((w[1].0 - w[0].0) - (history[1].0 - history[0].0)).abs() <= 1e-9 * dt) {
        summary.max_energy_law_residual = energy_law_residual(&history)
            .ok()
            .map(|r| r.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
    summary.status = status;
    write_summary(dir, &summary)?;
    Ok(RunOutcome {
        status,
        summary,
        output_dir: dir.to_path_buf(),
    })
}

fn run_compare(
    config: &RunConfig,
    grid: &std::sync::Arc<Grid>,
    dir: &Path,
    mut summary: RunSummary,
) -> Result<RunOutcome> {
    let tw = &config.twistwave;
    let l = grid.domain_length();
    let radius = tw.radius.unwrap_or(0.5 * l - 2.0 * grid.spacing());
    let radial = RadialGrid::new(radius, tw.cells, grid.dim())?;
    let sigma = tw.width.unwrap_or(l / 12.0);
    let amp = tw.amplitude;
    let initial = RadialState::from_fn(
        &radial,
        |r| amp * (r / sigma).powi(2) * (-(r / sigma).powi(2)).exp(),
        |_| 0.0,
    );
    let dt = match config.dt {
        Some(dt) => dt,
        None => {
            let engine = Engine::new(grid, &config.coefficients, Mode::QOnly)?;
            let mut full = SimState::zeros(grid);
            full.q = crate::twistwave::lift_to_tensor(&initial, &radial, grid, &vec![0.5 * l; grid.dim()])?.0;
            engine
                .stable_dt(&full, config.cfl_safety)
                .min(radial_cfl_dt(&initial, &config.coefficients, &radial, config.cfl_safety))
        }
    };
    let report = match compare_full_vs_radial(
        &initial,
        &config.coefficients,
        grid,
        &radial,
        config.t_end,
        dt,
        tw.sample_every,
    ) {
        Ok(r) => r,
        Err(QshError::NonFinite { t }) => {
            summary.status = RunStatus::NumericalFailure;
            summary.failure_time = Some(t);
            summary.failure = Some(format!("non-finite values after the step ending at t = {t}"));
            write_summary(dir, &summary)?;
            return Ok(RunOutcome {
                status: RunStatus::NumericalFailure,
                summary,
                output_dir: dir.to_path_buf(),
            });
        }
        Err(e) => return Err(e),
    };
    write_compare_outputs(dir, &report, &radial)?;
    summary.warnings.extend(report.warnings.iter().cloned());
    summary.t_final = report.rows.last().map(|r| r.t).unwrap_or(0.0);
    summary.steps = report.steps;
    summary.dt = Some(report.dt);
    summary.max_constraint_residual = Some(report.max_constraint_residual);
    summary.compare = Some(CompareSummary {
        radial_cells: radial.cells(),
        radius,
        final_discrepancy: report.final_discrepancy,
        max_constraint_residual: report.max_constraint_residual,
        max_origin_ratio: report.max_origin_ratio,
        origin_tolerance: report.origin_tolerance,
        origin_ok: report.origin_ok,
    });
    summary.status = RunStatus::Success;
    write_summary(dir, &summary)?;
    Ok(RunOutcome {
        status: RunStatus::Success,
        summary,
        output_dir: dir.to_path_buf(),
    })
}

fn write_compare_outputs(dir: &Path, report: &CompareReport, radial: &RadialGrid) -> Result<()> {
    let path = dir.join("compare.csv");
    report
        .write_csv(create(&path)?)
        .map_err(|e| QshError::io(&path, e))?;
    if let Some(state) = &report.final_radial {
        let path = dir.join("radial_profile.csv");
        write_profile_csv(state, radial, create(&path)?).map_err(|e| QshError::io(&path, e))?;
    }
    Ok(())
}

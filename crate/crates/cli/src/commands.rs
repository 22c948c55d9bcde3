//! The three subcommands behind the binary: `analyze`, `sweep`, and
//! `validate`. All artifact output (JSON report, CSV) goes to stdout or the
//! requested files; diagnostics are the caller's job (main prints them to
//! stderr with the mapped exit code).

use crate::doc;
use bottlemod::oracle::{simulate_workflow, OracleConfig};
use bottlemod::piecewise::PiecewiseFn;
use bottlemod::solver::Limiter;
use bottlemod::workflow::{
    analyze, apply_parameter, ProcessAnalysis, Workflow, WorkflowError, WorkflowResult,
};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug)]
pub enum CmdError {
    /// Exit 2: unreadable file, schema error, or model violations.
    Validation(Vec<String>),
    /// Exit 3.
    Cycle(String),
    /// Exit 4: the engine failed on a valid document.
    Solver(String),
    /// Exit 5.
    UnknownParameter(String),
    /// Exit 1: output I/O and other environmental failures.
    Io(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Io(_) => 1,
            CmdError::Validation(_) => 2,
            CmdError::Cycle(_) => 3,
            CmdError::Solver(_) => 4,
            CmdError::UnknownParameter(_) => 5,
        }
    }

    pub fn messages(&self) -> Vec<String> {
        match self {
            CmdError::Validation(v) => v.clone(),
            CmdError::Io(m)
            | CmdError::Cycle(m)
            | CmdError::Solver(m)
            | CmdError::UnknownParameter(m) => vec![m.clone()],
        }
    }
}

fn classify(e: WorkflowError) -> CmdError {
    match e {
        WorkflowError::CyclicDependency(_) => CmdError::Cycle(e.to_string()),
        WorkflowError::UnknownParameter(_) => CmdError::UnknownParameter(e.to_string()),
        other => CmdError::Solver(other.to_string()),
    }
}

pub fn load_workflow(path: &Path) -> Result<Workflow, CmdError> {
    let document = doc::load(path).map_err(CmdError::Validation)?;
    doc::to_workflow(&document).map_err(CmdError::Validation)
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Progress,
    Usage,
    Buffered,
}

pub struct AnalyzeOptions {
    pub out: Option<std::path::PathBuf>,
    pub series: Option<Series>,
    pub csv_dir: Option<std::path::PathBuf>,
    pub samples: usize,
    pub oracle_check: bool,
    pub dt: Option<f64>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            out: None,
            series: None,
            csv_dir: None,
            samples: 512,
            oracle_check: false,
            dt: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SegmentReport {
    pub t_a: f64,
    pub t_b: Option<f64>,
    pub limiter: String,
    pub co_limiters: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ProcessReport {
    pub name: String,
    pub start_time: f64,
    pub completion_time: Option<f64>,
    pub bottlenecks: Vec<SegmentReport>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub makespan: Option<f64>,
    pub processes: Vec<ProcessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_makespan: Option<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_deviation: Option<f64>,
}

fn limiter_name(a: &ProcessAnalysis, l: &Limiter) -> String {
    // indices are valid by construction of the solver result
    match l {
        Limiter::Data(k) => format!("data:{}", a.usage.data[*k].name),
        Limiter::Resource(l) => format!("resource:{}", a.usage.resources[*l].name),
        Limiter::Finished => "finished".to_string(),
    }
}

pub fn build_report(result: &WorkflowResult) -> Report {
    let processes = result
        .processes
        .iter()
        .map(|a| ProcessReport {
            name: a.name.clone(),
            start_time: a.start_time,
            completion_time: a.result.completion_time,
            bottlenecks: a
                .result
                .bottlenecks
                .iter()
                .map(|s| SegmentReport {
                    t_a: s.start,
                    t_b: s.end,
                    limiter: limiter_name(a, &s.limiter),
                    co_limiters: s.co_limiters.iter().map(|l| limiter_name(a, l)).collect(),
                })
                .collect(),
        })
        .collect();
    Report {
        makespan: result.makespan,
        processes,
        oracle_makespan: None,
        max_deviation: None,
    }
}

/// Sample positions for one function: every breakpoint in range, plus
/// `samples` uniform points over [start, end]. Breakpoints come first so
/// plotted corners are exact.
fn sample_grid(f: &PiecewiseFn, start: f64, end: f64, samples: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = f
        .breakpoints()
        .iter()
        .copied()
        .filter(|&b| b >= start && b <= end)
        .collect();
    if samples > 1 {
        let step = (end - start) / (samples - 1) as f64;
        for i in 0..samples {
            xs.push(start + step * i as f64);
        }
    } else {
        xs.push(start);
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    xs
}

fn emit_rows(
    out: &mut String,
    f: &PiecewiseFn,
    label_at: &dyn Fn(f64) -> String,
    start: f64,
    end: f64,
    samples: usize,
) {
    for t in sample_grid(f, start, end, samples) {
        let v = f.eval(t).unwrap_or(f64::NAN);
        writeln!(out, "{t},{v},{}", label_at(t)).unwrap();
    }
}

pub fn series_csv(a: &ProcessAnalysis, series: Series, samples: usize, horizon: f64) -> String {
    let start = a.start_time;
    let end = a.result.completion_time.unwrap_or(horizon).max(start);
    let mut out = String::from("t,value,label\n");
    match series {
        Series::Progress => {
            let segs = &a.result.bottlenecks;
            let label_at = |t: f64| {
                segs.iter()
                    .find(|s| t >= s.start && s.end.map_or(true, |e| t < e))
                    .or(segs.last())
                    .map(|s| limiter_name(a, &s.limiter))
                    .unwrap_or_default()
            };
            emit_rows(&mut out, &a.result.progress, &label_at, start, end, samples);
        }
        Series::Usage => {
            for r in &a.usage.resources {
                let name = r.name.clone();
                emit_rows(&mut out, &r.relative, &move |_| name.clone(), start, end, samples);
            }
        }
        Series::Buffered => {
            for d in &a.usage.data {
                let name = d.name.clone();
                emit_rows(&mut out, &d.buffered, &move |_| name.clone(), start, end, samples);
            }
        }
    }
    out
}

fn oracle_comparison(
    workflow: &Workflow,
    result: &WorkflowResult,
    dt: Option<f64>,
) -> Result<(Option<f64>, f64), CmdError> {
    let horizon = match result.makespan {
        Some(m) if m > 0.0 => 1.25 * m,
        _ => {
            return Err(CmdError::Solver(
                "oracle check requires a completing workflow".to_string(),
            ))
        }
    };
    let mut config = OracleConfig::for_horizon(horizon);
    if let Some(dt) = dt {
        if !(dt > 0.0) {
            return Err(CmdError::Solver(format!("oracle dt must be positive (got {dt})")));
        }
        config.dt = dt;
    }
    let traj = simulate_workflow(workflow, &config)
        .map_err(|e| CmdError::Solver(format!("oracle: {e}")))?;
    let mut max_dev = 0.0f64;
    for a in &result.processes {
        let Some(tr) = traj.processes.get(&a.name) else { continue };
        let p = &a.result.progress;
        let t0 = p.domain_start();
        for (&t, &po) in tr.times.iter().zip(&tr.progress) {
            let pa = p.eval(t.max(t0)).unwrap_or(po);
            max_dev = max_dev.max((pa - po).abs());
        }
    }
    Ok((traj.makespan, max_dev))
}

/// Returns the JSON report; CSV series, if requested, are written to
/// `csv_dir` as `<process>.csv`.
pub fn cmd_analyze(path: &Path, opts: &AnalyzeOptions) -> Result<String, CmdError> {
    let workflow = load_workflow(path)?;
    let result = analyze(&workflow).map_err(classify)?;
    let mut report = build_report(&result);

    if opts.oracle_check {
        let (om, dev) = oracle_comparison(&workflow, &result, opts.dt)?;
        report.oracle_makespan = Some(om);
        report.max_deviation = Some(dev);
    }

    if let Some(series) = opts.series {
        let dir = opts
            .csv_dir
            .as_ref()
            .ok_or_else(|| CmdError::Io("--series requires --csv DIR".to_string()))?;
        std::fs::create_dir_all(dir).map_err(|e| CmdError::Io(e.to_string()))?;
        let horizon = result
            .processes
            .iter()
            .filter_map(|p| p.result.completion_time)
            .fold(0.0f64, f64::max);
        for a in &result.processes {
            let csv = series_csv(a, series, opts.samples, horizon);
            let file = dir.join(format!("{}.csv", a.name));
            std::fs::write(&file, csv)
                .map_err(|e| CmdError::Io(format!("writing {}: {e}", file.display())))?;
        }
    }

    let json = serde_json::to_string_pretty(&report).expect("report serialization");
    Ok(json)
}

// ------------------------------------------------------------------ sweep

pub struct SweepOptions {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub parallel: bool,
}

pub fn sweep_values(from: f64, to: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![from];
    }
    let step = (to - from) / (steps - 1) as f64;
    (0..steps).map(|i| from + step * i as f64).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Returns the sweep CSV, rows in value order regardless of `parallel`.
pub fn cmd_sweep(path: &Path, opts: &SweepOptions) -> Result<String, CmdError> {
    let workflow = load_workflow(path)?;
    // validate the parameter path up front so the error is not deferred to
    // an arbitrary worker
    {
        let mut probe = workflow.clone();
        apply_parameter(&mut probe, &opts.param, opts.from).map_err(classify)?;
    }

    let values = sweep_values(opts.from, opts.to, opts.steps);
    let run_one = |v: &f64| -> Result<(f64, Option<f64>, Vec<(String, Option<f64>)>), CmdError> {
        let mut wf = workflow.clone();
        apply_parameter(&mut wf, &opts.param, *v).map_err(classify)?;
        let r = analyze(&wf).map_err(classify)?;
        let completions = r
            .processes
            .iter()
            .map(|p| (p.name.clone(), p.result.completion_time))
            .collect();
        Ok((*v, r.makespan, completions))
    };
    let rows: Vec<_> = if opts.parallel {
        values.par_iter().map(run_one).collect::<Result<_, _>>()?
    } else {
        values.iter().map(run_one).collect::<Result<_, _>>()?
    };

    let mut out = String::from("value,makespan");
    if let Some((_, _, completions)) = rows.first() {
        for (name, _) in completions {
            write!(out, ",{name}_completion").unwrap();
        }
    }
    out.push('\n');
    for (v, makespan, completions) in &rows {
        write!(out, "{v},{}", fmt_opt(*makespan)).unwrap();
        for (_, c) in completions {
            write!(out, ",{}", fmt_opt(*c)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

// --------------------------------------------------------------- validate

/// Schema + model validation only; returns the "OK" artifact.
pub fn cmd_validate(path: &Path) -> Result<String, CmdError> {
    load_workflow(path)?;
    Ok("OK".to_string())
}

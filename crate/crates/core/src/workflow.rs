//! Workflow composition: wiring process outputs to successor inputs,
//! resolving shared resource pools, gating start times, and solving all
//! processes in dependency order.

use crate::metrics::{usage_report, UsageReport};
use crate::model::{ExecutionContext, Process};
use crate::piecewise::{compose, PiecewiseFn, PiecewiseError};
use crate::solver::{solve, ProgressResult, SolverError};
use crate::tol;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("cyclic dependency among processes: {}", .0.join(", "))]
    CyclicDependency(Vec<String>),
    #[error("unknown parameter path `{0}`")]
    UnknownParameter(String),
    #[error("process `{process}` data slot {slot} has no binding")]
    UnboundSlot { process: String, slot: usize },
    #[error("process `{process}` data slot {slot} bound more than once")]
    DuplicateBinding { process: String, slot: usize },
    #[error("unknown reference `{0}`")]
    UnknownReference(String),
    #[error("pool `{pool}` fractions sum to {sum}, exceeding 1")]
    PoolOversubscribed { pool: String, sum: f64 },
    #[error("process `{process}` is gated on `{blocker}`, which never completes")]
    GatedOnIncomplete { process: String, blocker: String },
    #[error("solving `{process}`: {source}")]
    Solver {
        process: String,
        #[source]
        source: SolverError,
    },
    #[error("wiring `{process}`: {source}")]
    Wiring {
        process: String,
        #[source]
        source: PiecewiseError,
    },
}

pub type Result<T> = std::result::Result<T, WorkflowError>;

#[derive(Debug, Clone)]
pub enum PoolFraction {
    Fixed(f64),
    /// Whatever remains after all fixed fractions; multiple rest-holders
    /// split it equally.
    Rest,
}

#[derive(Debug, Clone)]
pub enum ResourceBinding {
    /// Explicit supply-rate function.
    Direct(PiecewiseFn),
    Pool {
        pool: String,
        fraction: PoolFraction,
        /// On completion, this holder's share is handed to the named process.
        release_to: Option<String>,
    },
}

#[derive(Debug, Clone)]
pub struct Pool {
    pub name: String,
    /// Total supply rate over time.
    pub capacity: PiecewiseFn,
}

#[derive(Debug, Clone)]
pub struct DataEdge {
    pub from: String,
    pub output: String,
    pub to: String,
    pub slot: String,
}

#[derive(Debug, Clone)]
pub struct ProcessSpec {
    pub process: Process,
    /// Per data slot: an explicit input function, or `None` when an edge
    /// feeds the slot.
    pub data_bindings: Vec<Option<PiecewiseFn>>,
    pub resource_bindings: Vec<ResourceBinding>,
}

#[derive(Debug, Clone)]
pub struct Workflow {
    pub processes: Vec<ProcessSpec>,
    pub pools: Vec<Pool>,
    pub edges: Vec<DataEdge>,
    /// (process, must-complete-first predecessors)
    pub gates: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Clone)]
pub struct ProcessAnalysis {
    pub name: String,
    pub start_time: f64,
    pub result: ProgressResult,
    pub usage: UsageReport,
    /// Supply functions the process was solved against (pools resolved).
    pub effective_resource_inputs: Vec<PiecewiseFn>,
    /// Pool-backed slots tightened to actual demand for reporting.
    pub reported_allocation: Vec<PiecewiseFn>,
}

#[derive(Debug, Clone)]
pub struct WorkflowResult {
    /// In topological order.
    pub processes: Vec<ProcessAnalysis>,
    pub makespan: Option<f64>,
}

impl Workflow {
    fn spec(&self, name: &str) -> Result<&ProcessSpec> {
        self.processes
            .iter()
            .find(|s| s.process.name == name)
            .ok_or_else(|| WorkflowError::UnknownReference(name.to_string()))
    }

    fn pool(&self, name: &str) -> Result<&Pool> {
        self.pools
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| WorkflowError::UnknownReference(name.to_string()))
    }
}

/// Deterministic topological order over data edges, gates, and implicit
/// residual-release edges (a release is only meaningful once the holder's
/// completion is known, so the beneficiary is ordered after it).
pub fn topo_order(workflow: &Workflow) -> Result<Vec<String>> {
    let names: BTreeSet<&str> = workflow
        .processes
        .iter()
        .map(|s| s.process.name.as_str())
        .collect();
    let mut succs: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut indeg: BTreeMap<&str, usize> = names.iter().map(|n| (*n, 0)).collect();
    let mut add_edge = |from: &str, to: &str| -> Result<()> {
        let from = *names
            .get(from)
            .ok_or_else(|| WorkflowError::UnknownReference(from.to_string()))?;
        let to = *names
            .get(to)
            .ok_or_else(|| WorkflowError::UnknownReference(to.to_string()))?;
        if succs.entry(from).or_default().insert(to) {
            *indeg.get_mut(to).unwrap() += 1;
        }
        Ok(())
    };
    for e in &workflow.edges {
        add_edge(&e.from, &e.to)?;
    }
    for (proc, after) in &workflow.gates {
        for a in after {
            add_edge(a, proc)?;
        }
    }
    for spec in &workflow.processes {
        for b in &spec.resource_bindings {
            if let ResourceBinding::Pool { release_to: Some(b_to), .. } = b {
                add_edge(&spec.process.name, b_to)?;
            }
        }
    }

    let mut ready: BTreeSet<&str> = indeg
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| *n)
        .collect();
    let mut order = Vec::with_capacity(names.len());
    while let Some(&n) = ready.iter().next() {
        ready.remove(n);
        order.push(n.to_string());
        if let Some(out) = succs.get(n) {
            for &m in out {
                let d = indeg.get_mut(m).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(m);
                }
            }
        }
    }
    if order.len() != names.len() {
        let stuck: Vec<String> = indeg
            .iter()
            .filter(|(_, d)| **d > 0)
            .map(|(n, _)| n.to_string())
            .collect();
        return Err(WorkflowError::CyclicDependency(stuck));
    }
    Ok(order)
}

/// Static pool share for one holder: its own fraction, with `Rest` resolved
/// against the other holders of the same pool.
fn resolve_fraction(workflow: &Workflow, pool: &str, who: &str) -> Result<f64> {
    let mut fixed_sum = 0.0;
    let mut rest_holders = Vec::new();
    let mut own = None;
    for spec in &workflow.processes {
        for b in &spec.resource_bindings {
            if let ResourceBinding::Pool { pool: p, fraction, .. } = b {
                if p != pool {
                    continue;
                }
                match fraction {
                    PoolFraction::Fixed(f) => {
                        fixed_sum += f;
                        if spec.process.name == who {
                            own = Some(*f);
                        }
                    }
                    PoolFraction::Rest => rest_holders.push(spec.process.name.clone()),
                }
            }
        }
    }
    if fixed_sum > 1.0 + tol::eps_abs(1.0) {
        return Err(WorkflowError::PoolOversubscribed { pool: pool.to_string(), sum: fixed_sum });
    }
    if let Some(f) = own {
        return Ok(f);
    }
    if rest_holders.iter().any(|n| n == who) {
        let rest = (1.0 - fixed_sum).max(0.0);
        return Ok(rest / rest_holders.len() as f64);
    }
    Err(WorkflowError::UnknownReference(format!("{who} in pool {pool}")))
}

pub fn analyze(workflow: &Workflow) -> Result<WorkflowResult> {
    let order = topo_order(workflow)?;
    let mut done: BTreeMap<String, ProcessAnalysis> = BTreeMap::new();
    // releases received by each process: (from-completion-time, extra fraction)
    let mut releases: BTreeMap<String, Vec<(f64, f64, String)>> = BTreeMap::new();

    for name in &order {
        let spec = workflow.spec(name)?;
        let wire = |e: PiecewiseError| WorkflowError::Wiring { process: name.clone(), source: e };

        // start gate
        let mut start_time = 0.0f64;
        for (proc, after) in &workflow.gates {
            if proc != name {
                continue;
            }
            for a in after {
                let pred = done
                    .get(a)
                    .ok_or_else(|| WorkflowError::UnknownReference(a.clone()))?;
                match pred.result.completion_time {
                    Some(t) => start_time = start_time.max(t),
                    None => {
                        return Err(WorkflowError::GatedOnIncomplete {
                            process: name.clone(),
                            blocker: a.clone(),
                        })
                    }
                }
            }
        }

        // data inputs: explicit bindings or producer outputs
        let mut data_inputs: Vec<Option<PiecewiseFn>> = spec.data_bindings.clone();
        for e in workflow.edges.iter().filter(|e| &e.to == name) {
            let slot = spec
                .process
                .data_requirements
                .iter()
                .position(|d| d.name == e.slot)
                .ok_or_else(|| WorkflowError::UnknownReference(format!("{name}.{}", e.slot)))?;
            if data_inputs[slot].is_some() {
                return Err(WorkflowError::DuplicateBinding { process: name.clone(), slot });
            }
            let producer = done
                .get(&e.from)
                .ok_or_else(|| WorkflowError::UnknownReference(e.from.clone()))?;
            let out_spec = workflow
                .spec(&e.from)?
                .process
                .outputs
                .iter()
                .find(|o| o.name == e.output)
                .ok_or_else(|| {
                    WorkflowError::UnknownReference(format!("{}.{}", e.from, e.output))
                })?;
            let produced = compose(&out_spec.fn_, &producer.result.progress).map_err(wire)?;
            data_inputs[slot] = Some(produced);
        }
        let data_inputs: Vec<PiecewiseFn> = data_inputs
            .into_iter()
            .enumerate()
            .map(|(slot, d)| {
                d.ok_or(WorkflowError::UnboundSlot { process: name.clone(), slot })
            })
            .collect::<Result<_>>()?;

        // resource inputs: direct or pool share (+ any residuals received)
        let mut resource_inputs = Vec::with_capacity(spec.resource_bindings.len());
        for b in &spec.resource_bindings {
            let fn_ = match b {
                ResourceBinding::Direct(f) => f.clone(),
                ResourceBinding::Pool { pool, .. } => {
                    let cap = &workflow.pool(pool)?.capacity;
                    let share = resolve_fraction(workflow, pool, name)?;
                    let mut alloc = cap.scale_y(share);
                    let mut share = share;
                    let mut recv: Vec<(f64, f64, String)> =
                        releases.get(name).cloned().unwrap_or_default();
                    recv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                    for (t_release, extra, from_pool) in recv {
                        if &from_pool != pool {
                            continue;
                        }
                        share += extra;
                        let boosted = cap.scale_y(share).restrict_start(t_release).map_err(wire)?;
                        alloc = alloc.splice(t_release, &boosted).map_err(wire)?;
                    }
                    alloc
                }
            };
            resource_inputs.push(fn_);
        }

        let ctx = ExecutionContext {
            start_time,
            data_inputs,
            resource_inputs: resource_inputs.clone(),
        };
        let result = solve(&spec.process, &ctx).map_err(|e| WorkflowError::Solver {
            process: name.clone(),
            source: e,
        })?;
        let usage = usage_report(&spec.process, &ctx, &result).map_err(|e| {
            WorkflowError::Solver { process: name.clone(), source: e }
        })?;

        // residual release: hand this holder's share to the beneficiary
        if let Some(t_done) = result.completion_time {
            for b in &spec.resource_bindings {
                if let ResourceBinding::Pool { pool, release_to: Some(to), .. } = b {
                    let share = resolve_fraction(workflow, pool, name)?;
                    releases
                        .entry(to.clone())
                        .or_default()
                        .push((t_done, share, pool.clone()));
                }
            }
        }

        // retrospective tightening: pool holders are reported at their
        // actual demand, which by construction introduces no new bottleneck
        let mut reported = resource_inputs.clone();
        for (l, b) in spec.resource_bindings.iter().enumerate() {
            if matches!(b, ResourceBinding::Pool { .. }) {
                reported[l] = usage.resources[l].demand.clone();
            }
        }
        #[cfg(debug_assertions)]
        {
            let re_ctx = ExecutionContext {
                start_time,
                data_inputs: ctx.data_inputs.clone(),
                resource_inputs: reported.clone(),
            };
            if let Ok(re) = solve(&spec.process, &re_ctx) {
                debug_assert_eq!(
                    re.completion_time.map(|t| (t * 1e6).round()),
                    result.completion_time.map(|t| (t * 1e6).round()),
                    "tightened allocation changed the solution of {name}"
                );
            }
        }

        done.insert(
            name.clone(),
            ProcessAnalysis {
                name: name.clone(),
                start_time,
                result,
                usage,
                effective_resource_inputs: resource_inputs,
                reported_allocation: reported,
            },
        );
    }

    let mut makespan = Some(f64::NEG_INFINITY);
    for a in done.values() {
        makespan = match (makespan, a.result.completion_time) {
            (Some(m), Some(t)) => Some(m.max(t)),
            _ => None,
        };
    }
    let processes = order.into_iter().map(|n| done.remove(&n).unwrap()).collect();
    Ok(WorkflowResult { processes, makespan })
}

/// Set a scalar addressed by a dot path. Supported:
/// `bindings.<process>.fraction` (single pool binding),
/// `bindings.<process>.<resource>.fraction`,
/// `pools.<name>.capacity` (constant capacities only),
/// `processes.<name>.target_progress`.
pub fn apply_parameter(workflow: &mut Workflow, path: &str, value: f64) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    let unknown = || WorkflowError::UnknownParameter(path.to_string());
    match parts.as_slice() {
        ["bindings", proc, "fraction"] | ["bindings", proc, _, "fraction"] => {
            let slot_name = if parts.len() == 4 { Some(parts[2]) } else { None };
            let spec = workflow
                .processes
                .iter_mut()
                .find(|s| s.process.name == *proc)
                .ok_or_else(unknown)?;
            let mut hits = 0;
            for (l, b) in spec.resource_bindings.iter_mut().enumerate() {
                let matches_slot = match slot_name {
                    Some(s) => spec.process.resource_requirements[l].name == s,
                    None => true,
                };
                if let ResourceBinding::Pool { fraction, .. } = b {
                    if matches_slot {
                        *fraction = PoolFraction::Fixed(value);
                        hits += 1;
                    }
                }
            }
            if hits == 0 {
                return Err(unknown());
            }
            Ok(())
        }
        ["pools", pool, "capacity"] => {
            let p = workflow
                .pools
                .iter_mut()
                .find(|p| p.name == *pool)
                .ok_or_else(unknown)?;
            let start = p.capacity.domain_start();
            p.capacity = PiecewiseFn::constant(start, value);
            Ok(())
        }
        ["processes", proc, "target_progress"] => {
            let spec = workflow
                .processes
                .iter_mut()
                .find(|s| s.process.name == *proc)
                .ok_or_else(unknown)?;
            spec.process.target_progress = value;
            Ok(())
        }
        _ => Err(unknown()),
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub makespan: Option<f64>,
    /// (process, completion) in topological order.
    pub completions: Vec<(String, Option<f64>)>,
}

pub fn sweep(workflow: &Workflow, path: &str, values: &[f64]) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&v| {
            let mut wf = workflow.clone();
            apply_parameter(&mut wf, path, v)?;
            let r = analyze(&wf)?;
            Ok(SweepPoint {
                value: v,
                makespan: r.makespan,
                completions: r
                    .processes
                    .iter()
                    .map(|p| (p.name.clone(), p.result.completion_time))
                    .collect(),
            })
        })
        .collect()
}

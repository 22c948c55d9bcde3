//! Discrete-time ground-truth simulator.
//!
//! A forward-stepping scheme that advances a process's progress by inverting
//! cumulative budgets each step: data availability caps progress directly,
//! and each resource caps it at the largest progress whose cumulative
//! requirement is covered by the resource paid in so far plus this step's
//! supply. Surplus rate on a step is lost; at a requirement jump the supply
//! accrues toward the jump mass, which reproduces burst stalls without any
//! difference quotients. Works for arbitrary monotone piecewise-polynomial
//! requirements, so it validates the analytic solver from outside its own
//! restrictions.

use crate::model::{ExecutionContext, Process};
use crate::piecewise::{first_time_at_or_above, first_time_strictly_above, PiecewiseFn};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("step too coarse: progress overshoot {overshoot} at t = {t}")]
    StepTooCoarse { t: f64, overshoot: f64 },
    #[error("starvation: no progress by horizon {horizon} (stuck at p = {progress})")]
    StarvationDetected { horizon: f64, progress: f64 },
    #[error("piecewise evaluation failed: {0}")]
    Piecewise(#[from] crate::piecewise::PiecewiseError),
    #[error("invalid workflow: {0}")]
    InvalidWorkflow(String),
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Per-step iteration cap; the budget inversion converges in one pass,
    /// so this only guards degenerate coupled-workflow stepping.
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl OracleConfig {
    pub fn for_horizon(horizon: f64) -> Self {
        OracleConfig {
            dt: 1e-3 * horizon,
            horizon,
            max_iterations: 100,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub progress: Vec<f64>,
    pub completion: Option<f64>,
    /// Cumulative resource paid in per resource slot, at the final sample.
    pub resource_paid: Vec<f64>,
}

impl Trajectory {
    /// Sampled progress, linearly interpolated between steps.
    pub fn at(&self, t: f64) -> f64 {
        match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => self.progress[i],
            Err(0) => self.progress[0],
            Err(i) if i >= self.times.len() => *self.progress.last().unwrap(),
            Err(i) => {
                let (t0, t1) = (self.times[i - 1], self.times[i]);
                let (p0, p1) = (self.progress[i - 1], self.progress[i]);
                p0 + (p1 - p0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Largest progress `>= p_min` whose cumulative requirement stays within
/// `budget`. A bounded requirement that is fully paid allows any progress.
fn progress_cap(req: &PiecewiseFn, budget: f64, p_min: f64) -> f64 {
    match first_time_strictly_above(req, budget, p_min) {
        Some(p) => p.max(p_min),
        None => f64::INFINITY,
    }
}

/// Data-imposed progress cap at time `t` (end-of-step availability).
fn data_cap(process: &Process, ctx: &ExecutionContext, t: f64) -> Result<f64, OracleError> {
    let mut cap = f64::INFINITY;
    for (k, dr) in process.data_requirements.iter().enumerate() {
        let input = &ctx.data_inputs[k];
        let amount = input.eval(t.max(input.domain_start()))?;
        let amount = amount.max(dr.fn_.domain_start());
        cap = cap.min(dr.fn_.eval(amount)?);
    }
    Ok(cap)
}

fn base_progress(process: &Process) -> f64 {
    process
        .resource_requirements
        .iter()
        .map(|r| r.fn_.domain_start())
        .fold(0.0, f64::max)
}

pub fn simulate(
    process: &Process,
    ctx: &ExecutionContext,
    config: &OracleConfig,
) -> Result<Trajectory, OracleError> {
    let target = process.target_progress;
    let start = ctx.start_time;
    let dt = config.dt;
    assert!(dt > 0.0, "oracle step must be positive");

    // exact per-step resource supplies via antiderivatives
    let supplies: Vec<PiecewiseFn> = ctx
        .resource_inputs
        .iter()
        .map(|i| {
            let aligned = if i.domain_start() < start {
                i.restrict_start(start).unwrap()
            } else {
                i.extend_left_constant(start, 0.0)
            };
            aligned.antiderivative(0.0)
        })
        .collect();

    // input kinks make natural sub-step boundaries: integrating across them
    // with a single step would smear their effect over the whole step
    let mut kinks: Vec<f64> = Vec::new();
    for f in ctx.resource_inputs.iter().chain(&ctx.data_inputs) {
        for &b in f.breakpoints() {
            if b > start {
                kinks.push(b);
            }
        }
    }
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kinks.dedup();

    // requirement breakpoints on the progress axis: a step never crosses
    // one, so each budget inversion happens at a single requirement slope
    let mut p_bounds: Vec<f64> = Vec::new();
    for rr in &process.resource_requirements {
        p_bounds.extend_from_slice(&rr.fn_.breakpoints()[1..]);
    }
    p_bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p_bounds.dedup();

    let p0 = base_progress(process);
    let mut paid: Vec<f64> = vec![0.0; process.resource_requirements.len()];

    // zero-budget step settles the initial progress (instant jumps when
    // nothing constrains it)
    let mut p = data_cap(process, ctx, start)?.min(target);
    for (l, rr) in process.resource_requirements.iter().enumerate() {
        p = p.min(progress_cap(&rr.fn_, paid[l], p0));
    }
    p = p.max(p0);
    let p_start = p;

    let mut times = vec![start];
    let mut progress = vec![p];
    let mut completion = (p >= target - config.tolerance).then_some(start);

    let grid_steps = ((config.horizon - start) / dt).ceil().max(1.0) as usize;
    let max_substeps = 8 * grid_steps + 4 * (kinks.len() + p_bounds.len()) + 64;
    let step_tol = config.tolerance.max(1e-12 * target.abs().max(1.0));
    let ttol = 1e-12 * config.horizon.abs().max(1.0);

    let mut t = start;
    for _ in 0..max_substeps {
        if completion.is_some() || t >= config.horizon - ttol {
            break;
        }
        // next boundary: grid node, input kink, or horizon
        let n = ((t - start) / dt + 1e-9).floor() + 1.0;
        let mut t_next = (start + n * dt).min(config.horizon);
        if t_next <= t + ttol {
            t_next = (t + dt).min(config.horizon);
        }
        if let Some(&k) = kinks.iter().find(|k| **k > t + ttol && **k < t_next - ttol) {
            t_next = k;
        }

        let cap_d = data_cap(process, ctx, t_next)?;
        let mut p_next = cap_d.min(target);
        for (l, rr) in process.resource_requirements.iter().enumerate() {
            let budget = paid[l] + supplies[l].eval(t_next)? - supplies[l].eval(t)?;
            p_next = p_next.min(progress_cap(&rr.fn_, budget, p0));
        }
        p_next = p_next.max(p);

        // If the step starts on the data cap, a mid-step switch to a resource
        // limit means the plain budget wrongly banks supply from the
        // data-limited prefix. Locate the switch and re-invert from there.
        let was_data_capped = p >= data_cap(process, ctx, t)? - step_tol;
        if was_data_capped && p_next > p + step_tol {
            // progress if the path follows the data cap until tau and climbs
            // on resources afterwards
            let p_end = |tau: f64| -> Result<f64, OracleError> {
                let pd_tau = data_cap(process, ctx, tau)?.max(p);
                let mut pe = cap_d.min(target);
                for (l, rr) in process.resource_requirements.iter().enumerate() {
                    let paid_tau = (paid[l] + supplies[l].eval(tau)? - supplies[l].eval(t)?)
                        .min(rr.fn_.eval(pd_tau.min(cap_d).max(p0))?);
                    let budget = paid_tau + supplies[l].eval(t_next)? - supplies[l].eval(tau)?;
                    pe = pe.min(progress_cap(&rr.fn_, budget, p0));
                }
                Ok(pe.max(p))
            };
            // coarse scan, then ternary refinement around the best cell when
            // an interior switch actually improves on the endpoints
            let n = 8;
            let h = (t_next - t) / n as f64;
            let mut best = (t, p_end(t)?);
            let mut endpoints = best.1;
            for i in 1..=n {
                let tau = t + h * i as f64;
                let v = p_end(tau)?;
                if v < best.1 {
                    best = (tau, v);
                }
                if i == n {
                    endpoints = endpoints.min(v);
                }
            }
            if best.1 < endpoints - 1e-15 * target.abs().max(1.0) {
                let (mut lo, mut hi) = ((best.0 - h).max(t), (best.0 + h).min(t_next));
                for _ in 0..60 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    if p_end(m1)? <= p_end(m2)? {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                best.1 = best.1.min(p_end(0.5 * (lo + hi))?);
            }
            p_next = p_next.min(best.1).max(p);
        }

        // Never cross a requirement breakpoint inside a step: stop at it and
        // rewind the step end to the moment the path actually arrives there.
        if let Some(&p_b) = p_bounds
            .iter()
            .find(|b| **b > p + step_tol && **b < p_next - step_tol)
        {
            let mut t_b: f64 = t;
            for (l, rr) in process.resource_requirements.iter().enumerate() {
                // arrival of this resource's cap at p_b (left limit: reaching
                // the point, not paying any jump mass sitting on it)
                let needed = rr.fn_.eval_left(p_b)?;
                if paid[l] >= needed {
                    continue;
                }
                let base = supplies[l].eval(t)?;
                match first_time_at_or_above(&supplies[l], base + (needed - paid[l]), t) {
                    Some(a) => t_b = t_b.max(a),
                    None => t_b = t_next, // cannot arrive within this step
                }
            }
            if data_cap(process, ctx, t)? < p_b {
                // bisect the monotone data cap for its arrival
                let (mut lo, mut hi) = (t, t_next);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if data_cap(process, ctx, mid)? >= p_b {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                t_b = t_b.max(hi);
            }
            t_next = t_b.clamp(t + ttol, t_next);
            p_next = p_b;
        }

        if p_next > data_cap(process, ctx, t_next)? + config.tolerance.max(1e-9 * target) {
            return Err(OracleError::StepTooCoarse {
                t: t_next,
                overshoot: p_next - cap_d,
            });
        }
        // Settle: each resource keeps at most what the reached progress
        // requires (surplus is lost), except that at a jump the requirement's
        // right value lets credit accrue toward the mass.
        for (l, rr) in process.resource_requirements.iter().enumerate() {
            let budget = paid[l] + supplies[l].eval(t_next)? - supplies[l].eval(t)?;
            let needed = rr.fn_.eval(p_next)?;
            paid[l] = budget.min(needed);
        }
        p = p_next;
        t = t_next;
        times.push(t);
        progress.push(p);
        if p >= target - config.tolerance {
            completion = Some(t);
        }
    }

    if completion.is_none() && (p - p_start).abs() <= config.tolerance {
        return Err(OracleError::StarvationDetected {
            horizon: config.horizon,
            progress: p,
        });
    }
    Ok(Trajectory {
        times,
        progress,
        completion,
        resource_paid: paid,
    })
}

/// Per-process trajectories from a shared-clock workflow simulation.
#[derive(Debug, Clone)]
pub struct WorkflowTrajectory {
    /// Keyed by process name.
    pub processes: std::collections::BTreeMap<String, Trajectory>,
    pub makespan: Option<f64>,
}

fn pool_rest_share(workflow: &crate::workflow::Workflow, pool: &str) -> f64 {
    use crate::workflow::{PoolFraction, ResourceBinding};
    let mut fixed = 0.0;
    let mut rest = 0usize;
    for spec in &workflow.processes {
        for b in &spec.resource_bindings {
            if let ResourceBinding::Pool { pool: p, fraction, .. } = b {
                if p == pool {
                    match fraction {
                        PoolFraction::Fixed(f) => fixed += f,
                        PoolFraction::Rest => rest += 1,
                    }
                }
            }
        }
    }
    if rest == 0 {
        0.0
    } else {
        (1.0 - fixed).max(0.0) / rest as f64
    }
}

/// Step the whole workflow on one shared clock: pool shares (with residual
/// release on completion), producer outputs feeding consumer inputs, and
/// start gates are all enforced per step. A process that never advances by
/// the horizon — e.g. one fed from a zero-capacity pool — is reported as
/// starvation.
pub fn simulate_workflow(
    workflow: &crate::workflow::Workflow,
    config: &OracleConfig,
) -> Result<WorkflowTrajectory, OracleError> {
    use crate::workflow::{PoolFraction, ResourceBinding};
    use std::collections::BTreeMap;

    let order = crate::workflow::topo_order(workflow)
        .map_err(|e| OracleError::InvalidWorkflow(e.to_string()))?;
    let dt = config.dt;
    assert!(dt > 0.0, "oracle step must be positive");

    struct State {
        p: f64,
        p0: f64,
        /// Progress right after the zero-budget settle at start; used for
        /// starvation detection.
        p_settled: Option<f64>,
        paid: Vec<f64>,
        started: bool,
        completion: Option<f64>,
        times: Vec<f64>,
        progress: Vec<f64>,
    }
    let mut states: BTreeMap<String, State> = workflow
        .processes
        .iter()
        .map(|s| {
            let p0 = base_progress(&s.process);
            (
                s.process.name.clone(),
                State {
                    p: p0,
                    p0,
                    p_settled: None,
                    paid: vec![0.0; s.process.resource_requirements.len()],
                    started: false,
                    completion: None,
                    times: Vec::new(),
                    progress: Vec::new(),
                },
            )
        })
        .collect();

    // current pool shares, adjusted as holders complete and release
    let mut shares: BTreeMap<(String, String), f64> = BTreeMap::new();
    for spec in &workflow.processes {
        for b in &spec.resource_bindings {
            if let ResourceBinding::Pool { pool, fraction, .. } = b {
                let f = match fraction {
                    PoolFraction::Fixed(f) => *f,
                    PoolFraction::Rest => pool_rest_share(workflow, pool),
                };
                shares.insert((pool.clone(), spec.process.name.clone()), f);
            }
        }
    }
    let pool_cum: BTreeMap<String, PiecewiseFn> = workflow
        .pools
        .iter()
        .map(|p| {
            let c = if p.capacity.domain_start() > 0.0 {
                p.capacity.extend_left_constant(0.0, 0.0)
            } else {
                p.capacity.clone()
            };
            (p.name.clone(), c.antiderivative(0.0))
        })
        .collect();
    let direct_cum: BTreeMap<(String, usize), PiecewiseFn> = workflow
        .processes
        .iter()
        .flat_map(|s| {
            s.resource_bindings.iter().enumerate().filter_map(|(l, b)| {
                if let ResourceBinding::Direct(f) = b {
                    let f = if f.domain_start() > 0.0 {
                        f.extend_left_constant(0.0, 0.0)
                    } else {
                        f.clone()
                    };
                    Some(((s.process.name.clone(), l), f.antiderivative(0.0)))
                } else {
                    None
                }
            })
        })
        .collect();

    let steps = (config.horizon / dt).ceil().max(1.0) as usize;
    for step in 0..=steps {
        let t_prev = (step.saturating_sub(1)) as f64 * dt;
        let t_now = step as f64 * dt;

        for name in &order {
            let spec = workflow
                .processes
                .iter()
                .find(|s| &s.process.name == name)
                .unwrap();

            // snapshot producer progress before mutably borrowing this state
            // (producers are earlier in topo order, so they have already been
            // advanced for t_now)
            let mut edge_amount: BTreeMap<usize, f64> = BTreeMap::new();
            for e in workflow.edges.iter().filter(|e| &e.to == name) {
                let slot = spec
                    .process
                    .data_requirements
                    .iter()
                    .position(|d| d.name == e.slot)
                    .ok_or_else(|| {
                        OracleError::InvalidWorkflow(format!("unknown slot {}.{}", name, e.slot))
                    })?;
                let producer_progress = states[&e.from].p;
                let out = workflow
                    .processes
                    .iter()
                    .find(|s| s.process.name == e.from)
                    .and_then(|s| s.process.outputs.iter().find(|o| o.name == e.output))
                    .ok_or_else(|| {
                        OracleError::InvalidWorkflow(format!(
                            "unknown output {}.{}",
                            e.from, e.output
                        ))
                    })?;
                let pp = producer_progress.max(out.fn_.domain_start());
                edge_amount.insert(slot, out.fn_.eval(pp)?);
            }
            let gates_open = workflow
                .gates
                .iter()
                .filter(|(p, _)| p == name)
                .flat_map(|(_, after)| after.iter())
                .all(|a| {
                    states
                        .get(a)
                        .and_then(|s| s.completion)
                        .is_some_and(|tc| tc <= t_now + 1e-12)
                });

            let st = states.get_mut(name).unwrap();
            if st.completion.is_some() {
                continue;
            }
            if !st.started {
                if !gates_open {
                    st.times.push(t_now);
                    st.progress.push(st.p);
                    continue;
                }
                st.started = true;
            }

            // data-imposed cap at t_now
            let mut cap_d = f64::INFINITY;
            for (k, dr) in spec.process.data_requirements.iter().enumerate() {
                let amount = match edge_amount.get(&k) {
                    Some(a) => *a,
                    None => {
                        let f = spec.data_bindings[k].as_ref().ok_or_else(|| {
                            OracleError::InvalidWorkflow(format!("unbound slot {name}.{k}"))
                        })?;
                        f.eval(t_now.max(f.domain_start()))?
                    }
                };
                let amount = amount.max(dr.fn_.domain_start());
                cap_d = cap_d.min(dr.fn_.eval(amount)?);
            }

            // resource budgets over [t_prev, t_now] (zero on the settle step)
            let target = spec.process.target_progress;
            let mut budgets = Vec::with_capacity(st.paid.len());
            let mut p_next = cap_d.min(target);
            for (l, rr) in spec.process.resource_requirements.iter().enumerate() {
                let supply = if step == 0 || t_now <= t_prev {
                    0.0
                } else {
                    match &spec.resource_bindings[l] {
                        ResourceBinding::Direct(_) => {
                            let cum = &direct_cum[&(name.clone(), l)];
                            cum.eval(t_now)? - cum.eval(t_prev)?
                        }
                        ResourceBinding::Pool { pool, .. } => {
                            let share = shares
                                .get(&(pool.clone(), name.clone()))
                                .copied()
                                .unwrap_or(0.0);
                            let cum = pool_cum.get(pool).ok_or_else(|| {
                                OracleError::InvalidWorkflow(format!("unknown pool {pool}"))
                            })?;
                            share * (cum.eval(t_now)? - cum.eval(t_prev)?)
                        }
                    }
                };
                let budget = st.paid[l] + supply;
                p_next = p_next.min(progress_cap(&rr.fn_, budget, st.p0));
                budgets.push(budget);
            }
            p_next = p_next.max(st.p);
            if p_next > cap_d + config.tolerance.max(1e-9 * target) {
                return Err(OracleError::StepTooCoarse {
                    t: t_now,
                    overshoot: p_next - cap_d,
                });
            }
            for (l, rr) in spec.process.resource_requirements.iter().enumerate() {
                let needed = rr.fn_.eval(p_next)?;
                st.paid[l] = budgets[l].min(needed);
            }
            st.p = p_next;
            if st.p_settled.is_none() {
                st.p_settled = Some(p_next);
            }
            st.times.push(t_now);
            st.progress.push(st.p);
            if st.p >= target - config.tolerance {
                st.completion = Some(t_now);
            }
        }

        // residual release: completed holders hand their share over before
        // the next step
        for spec in &workflow.processes {
            if states[&spec.process.name].completion.is_none() {
                continue;
            }
            for b in &spec.resource_bindings {
                if let ResourceBinding::Pool { pool, release_to: Some(to), .. } = b {
                    let key = (pool.clone(), spec.process.name.clone());
                    let f = shares.get(&key).copied().unwrap_or(0.0);
                    if f > 0.0 {
                        shares.insert(key, 0.0);
                        *shares.entry((pool.clone(), to.clone())).or_insert(0.0) += f;
                    }
                }
            }
        }

        if states.values().all(|s| s.completion.is_some()) {
            break;
        }
    }

    // starvation: a process that started (or could never start) and whose
    // progress never moved past its initial settle
    for (name, st) in &states {
        let stuck = match st.p_settled {
            Some(p_settled) => {
                st.completion.is_none() && (st.p - p_settled).abs() <= config.tolerance
            }
            None => true,
        };
        if stuck {
            log::debug!("workflow oracle: `{name}` starved at p = {}", st.p);
            return Err(OracleError::StarvationDetected {
                horizon: config.horizon,
                progress: st.p,
            });
        }
    }

    let mut makespan = Some(f64::NEG_INFINITY);
    for st in states.values() {
        makespan = match (makespan, st.completion) {
            (Some(m), Some(t)) => Some(m.max(t)),
            _ => None,
        };
    }
    let processes = states
        .into_iter()
        .map(|(name, st)| {
            (
                name,
                Trajectory {
                    times: st.times,
                    progress: st.progress,
                    completion: st.completion,
                    resource_paid: st.paid,
                },
            )
        })
        .collect();
    Ok(WorkflowTrajectory { processes, makespan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonical, DataRequirement, Process, ResourceRequirement};
    use crate::piecewise::PiecewiseFn;

    fn stream_process(target: f64) -> Process {
        Process {
            name: "p".into(),
            data_requirements: vec![DataRequirement {
                name: "d".into(),
                fn_: canonical::data_stream(1.0).unwrap(),
            }],
            resource_requirements: vec![ResourceRequirement {
                name: "r".into(),
                fn_: canonical::resource_stream(1.0).unwrap(),
            }],
            outputs: vec![],
            target_progress: target,
        }
    }

    fn ctx(data: PiecewiseFn, rate: PiecewiseFn) -> ExecutionContext {
        ExecutionContext {
            start_time: 0.0,
            data_inputs: vec![data],
            resource_inputs: vec![rate],
        }
    }

    #[test]
    fn stream_completes_at_twenty() {
        // data 10t, resource rate 5, target 100: resource-limited, P = 5t
        let process = stream_process(100.0);
        let c = ctx(
            PiecewiseFn::linear(0.0, 0.0, 10.0),
            PiecewiseFn::constant(0.0, 5.0),
        );
        let config = OracleConfig::for_horizon(40.0);
        let traj = simulate(&process, &c, &config).unwrap();
        let done = traj.completion.unwrap();
        assert!((done - 20.0).abs() <= 2.0 * config.dt, "completion {done}");
        for (t, p) in traj.times.iter().zip(&traj.progress) {
            if *t <= done {
                assert!((p - 5.0 * t).abs() <= 10.0 * config.dt, "t={t} p={p}");
            }
        }
    }

    #[test]
    fn burst_data_delays_start() {
        // all 100 units of data needed before progress; arrive at t=10
        let mut process = stream_process(100.0);
        process.data_requirements[0].fn_ = canonical::data_burst(100.0, 100.0).unwrap();
        let c = ctx(
            PiecewiseFn::linear(0.0, 0.0, 10.0),
            PiecewiseFn::constant(0.0, 5.0),
        );
        let config = OracleConfig::for_horizon(40.0);
        let traj = simulate(&process, &c, &config).unwrap();
        let done = traj.completion.unwrap();
        assert!((done - 30.0).abs() <= 2.0 * config.dt, "completion {done}");
        assert!(traj.at(9.9) <= 1e-6);
    }

    #[test]
    fn resource_burst_stalls_until_mass_paid() {
        // 40 units of resource needed upfront at rate 5: stall 8s, then
        // data-limited at 10t until 100
        let mut process = stream_process(100.0);
        process.resource_requirements[0].fn_ = canonical::resource_burst(40.0).unwrap();
        let c = ctx(
            PiecewiseFn::linear(0.0, 0.0, 10.0),
            PiecewiseFn::constant(0.0, 5.0),
        );
        let config = OracleConfig::for_horizon(40.0);
        let traj = simulate(&process, &c, &config).unwrap();
        assert!(traj.at(7.9) <= 1e-6);
        // once paid, progress snaps to the data cap
        let done = traj.completion.unwrap();
        assert!((done - 10.0).abs() <= 2.0 * config.dt, "completion {done}");
    }

    #[test]
    fn quadratic_requirement_conserves_resources() {
        // R_R(p) = p^2/100: outside the analytic solver's class
        let mut process = stream_process(100.0);
        process.resource_requirements[0].fn_ = PiecewiseFn::new(
            vec![0.0],
            vec![crate::piecewise::Poly::new(vec![0.0, 0.0, 0.01])],
            crate::piecewise::ExtensionMode::Continue,
        )
        .unwrap();
        let c = ctx(
            PiecewiseFn::linear(0.0, 0.0, 1000.0),
            PiecewiseFn::constant(0.0, 5.0),
        );
        let config = OracleConfig::for_horizon(40.0);
        let traj = simulate(&process, &c, &config).unwrap();
        assert!(traj.completion.is_some());
        // consumed resources = R(target) within 1%
        let want = 100.0;
        assert!(
            (traj.resource_paid[0] - want).abs() <= 0.01 * want,
            "paid {}",
            traj.resource_paid[0]
        );
    }

    #[test]
    fn starvation_is_flagged() {
        let process = stream_process(100.0);
        let c = ctx(
            PiecewiseFn::linear(0.0, 0.0, 10.0),
            PiecewiseFn::constant(0.0, 0.0),
        );
        let config = OracleConfig::for_horizon(40.0);
        assert!(matches!(
            simulate(&process, &c, &config),
            Err(OracleError::StarvationDetected { .. })
        ));
    }

    mod workflows {
        use super::*;
        use crate::model::OutputSpec;
        use crate::workflow::{
            analyze, DataEdge, Pool, PoolFraction, ProcessSpec, ResourceBinding, Workflow,
        };

        fn spec_with(
            name: &str,
            target: f64,
            data: Option<PiecewiseFn>,
            binding: ResourceBinding,
        ) -> ProcessSpec {
            let mut process = stream_process(target);
            process.name = name.into();
            process.outputs = vec![OutputSpec {
                name: "out".into(),
                fn_: PiecewiseFn::linear(0.0, 0.0, 1.0),
            }];
            ProcessSpec {
                process,
                data_bindings: vec![data],
                resource_bindings: vec![binding],
            }
        }

        #[test]
        fn pipelined_pair_matches_analysis() {
            let wf = Workflow {
                processes: vec![
                    spec_with(
                        "a",
                        100.0,
                        Some(PiecewiseFn::linear(0.0, 0.0, 10.0)),
                        ResourceBinding::Direct(PiecewiseFn::constant(0.0, 10.0)),
                    ),
                    spec_with(
                        "b",
                        100.0,
                        None,
                        ResourceBinding::Direct(PiecewiseFn::constant(0.0, 8.0)),
                    ),
                ],
                pools: vec![],
                edges: vec![DataEdge {
                    from: "a".into(),
                    output: "out".into(),
                    to: "b".into(),
                    slot: "d".into(),
                }],
                gates: vec![],
            };
            let config = OracleConfig::for_horizon(30.0);
            let sim = simulate_workflow(&wf, &config).unwrap();
            let exact = analyze(&wf).unwrap();
            let (sm, em) = (sim.makespan.unwrap(), exact.makespan.unwrap());
            assert!((sm - em).abs() <= 2.0 * config.dt, "sim {sm} vs exact {em}");
        }

        #[test]
        fn shared_pool_with_release_matches_analysis() {
            let mk = |name: &str, frac, release: Option<String>| {
                spec_with(
                    name,
                    100.0,
                    Some(PiecewiseFn::linear(0.0, 0.0, 1000.0)),
                    ResourceBinding::Pool {
                        pool: "link".into(),
                        fraction: frac,
                        release_to: release,
                    },
                )
            };
            let wf = Workflow {
                processes: vec![
                    mk("dl1", PoolFraction::Fixed(0.8), Some("dl2".into())),
                    mk("dl2", PoolFraction::Rest, None),
                ],
                pools: vec![Pool {
                    name: "link".into(),
                    capacity: PiecewiseFn::constant(0.0, 1.0),
                }],
                edges: vec![],
                gates: vec![],
            };
            let config = OracleConfig::for_horizon(400.0);
            let sim = simulate_workflow(&wf, &config).unwrap();
            let exact = analyze(&wf).unwrap();
            let (sm, em) = (sim.makespan.unwrap(), exact.makespan.unwrap());
            assert!((sm - em).abs() <= 2.0 * config.dt, "sim {sm} vs exact {em}");
            let dl1 = &sim.processes["dl1"];
            assert!((dl1.completion.unwrap() - 125.0).abs() <= 2.0 * config.dt);
        }

        #[test]
        fn zero_capacity_pool_starves() {
            let wf = Workflow {
                processes: vec![spec_with(
                    "a",
                    100.0,
                    Some(PiecewiseFn::linear(0.0, 0.0, 10.0)),
                    ResourceBinding::Pool {
                        pool: "link".into(),
                        fraction: PoolFraction::Fixed(1.0),
                        release_to: None,
                    },
                )],
                pools: vec![Pool {
                    name: "link".into(),
                    capacity: PiecewiseFn::constant(0.0, 0.0),
                }],
                edges: vec![],
                gates: vec![],
            };
            let config = OracleConfig::for_horizon(40.0);
            assert!(matches!(
                simulate_workflow(&wf, &config),
                Err(OracleError::StarvationDetected { .. })
            ));
        }

        #[test]
        fn gated_start_respected() {
            let wf = Workflow {
                processes: vec![
                    spec_with(
                        "a",
                        100.0,
                        Some(PiecewiseFn::linear(0.0, 0.0, 10.0)),
                        ResourceBinding::Direct(PiecewiseFn::constant(0.0, 10.0)),
                    ),
                    spec_with(
                        "z",
                        50.0,
                        Some(PiecewiseFn::linear(0.0, 0.0, 1000.0)),
                        ResourceBinding::Direct(PiecewiseFn::constant(0.0, 10.0)),
                    ),
                ],
                pools: vec![],
                edges: vec![],
                gates: vec![("z".into(), vec!["a".into()])],
            };
            let config = OracleConfig::for_horizon(40.0);
            let sim = simulate_workflow(&wf, &config).unwrap();
            let z = &sim.processes["z"];
            assert!(z.at(9.5) <= 1e-6);
            // a completes at 10, z runs 5s after that
            assert!((z.completion.unwrap() - 15.0).abs() <= 2.0 * config.dt);
        }
    }
}

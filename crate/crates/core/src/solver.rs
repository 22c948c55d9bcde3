//! Progress derivation for a single process.
//!
//! Two stages: the data-progress envelope (what the inputs alone permit),
//! then an event-driven cursor loop imposing resource limits. The cursor
//! walks forward through closed-form events — the data envelope exceeding
//! the admissible speed, resource-requirement region changes, jump-mass
//! stalls, and completion — so the result is exact for piecewise-linear
//! resource requirements, with no time discretization anywhere.

use crate::model::{ExecutionContext, Process, Violation};
use crate::piecewise::{
    first_time_at_or_above, min_envelope, sign_segments, LabeledEnvelope, PiecewiseFn,
    PiecewiseError, Poly, Sign,
};
use crate::tol;
use std::collections::BTreeSet;
use thiserror::Error;

const MAX_ITERATIONS: usize = 1_000_000;
/// Sentinel slope recorded in the diagnostic speed trace where no resource
/// imposes any limit.
const UNLIMITED_SPEED: f64 = 1e300;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("no progress possible from t = {t}: resource supply is zero while demand remains")]
    NoProgress { t: f64 },
    #[error("cursor loop did not terminate within {iterations} iterations")]
    NonTermination { iterations: usize },
    #[error("model validation failed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Piecewise(#[from] PiecewiseError),
}

pub type Result<T> = std::result::Result<T, SolverError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Limiter {
    Data(usize),
    Resource(usize),
    Finished,
}

impl std::fmt::Display for Limiter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Limiter::Data(k) => write!(f, "data{k}"),
            Limiter::Resource(l) => write!(f, "resource{l}"),
            Limiter::Finished => write!(f, "finished"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BottleneckSegment {
    pub start: f64,
    /// Exclusive end; `None` for the trailing segment.
    pub end: Option<f64>,
    pub limiter: Limiter,
    pub co_limiters: Vec<Limiter>,
}

#[derive(Debug, Clone)]
pub struct ProgressResult {
    pub progress: PiecewiseFn,
    pub data_progress: PiecewiseFn,
    pub per_input_progress: Vec<PiecewiseFn>,
    pub completion_time: Option<f64>,
    pub bottlenecks: Vec<BottleneckSegment>,
    /// Diagnostic: the admissible speed along the solved path.
    pub max_speed_trace: PiecewiseFn,
}

#[derive(Debug, Clone)]
pub struct DataProgress {
    pub envelope: LabeledEnvelope,
    pub per_input: Vec<PiecewiseFn>,
}

/// Align a global-time input function to a process start: values before the
/// start are irrelevant, functions defined only later are held at their
/// initial value.
fn align_to_start(f: &PiecewiseFn, start: f64) -> std::result::Result<PiecewiseFn, PiecewiseError> {
    if f.domain_start() <= start {
        f.restrict_start(start)
    } else {
        let v0 = f.eval(f.domain_start())?;
        Ok(f.extend_left_constant(start, v0))
    }
}

/// Combined data-progress envelope (the upper limit the inputs impose) with
/// per-input curves and attribution labels.
pub fn data_progress(process: &Process, ctx: &ExecutionContext) -> Result<DataProgress> {
    let start = ctx.start_time;
    if process.data_requirements.is_empty() {
        let envelope = LabeledEnvelope {
            envelope: PiecewiseFn::constant(start, process.target_progress),
            labels: vec![BTreeSet::new()],
        };
        return Ok(DataProgress { envelope, per_input: vec![] });
    }
    let mut per_input = Vec::with_capacity(process.data_requirements.len());
    for (k, dr) in process.data_requirements.iter().enumerate() {
        let input = align_to_start(&ctx.data_inputs[k], start)?;
        per_input.push(crate::piecewise::compose(&dr.fn_, &input)?);
    }
    let envelope = min_envelope(&per_input)?;
    Ok(DataProgress { envelope, per_input })
}

/// One resource's jump masses: upfront value at the domain start plus every
/// discontinuity, each a (progress, mass) pair that must be paid by
/// integrated supply before progress passes that point.
fn jump_masses(req: &PiecewiseFn) -> Vec<(f64, f64)> {
    let ctol = tol::eps_abs(req.coeff_scale());
    let mut out = Vec::new();
    let v0 = req.pieces()[0].eval(0.0);
    if v0 > ctol {
        out.push((req.domain_start(), v0));
    }
    for (p, left, right) in req.jumps() {
        if right - left > ctol {
            out.push((p, right - left));
        }
    }
    out
}

struct Builder {
    bps: Vec<f64>,
    polys: Vec<Poly>,
    speed_bps: Vec<f64>,
    speed_polys: Vec<Poly>,
    segs: Vec<BottleneckSegment>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            bps: Vec::new(),
            polys: Vec::new(),
            speed_bps: Vec::new(),
            speed_polys: Vec::new(),
            segs: Vec::new(),
        }
    }

    fn push_piece(bps: &mut Vec<f64>, polys: &mut Vec<Poly>, at: f64, poly: Poly) {
        if let Some(&last) = bps.last() {
            if at <= last {
                // same instant: the later write wins (jump semantics)
                *polys.last_mut().unwrap() = poly;
                return;
            }
        }
        bps.push(at);
        polys.push(poly);
    }

    /// Copy the pieces of `f` on `[from, to)` into the progress track.
    fn append_fn(
        &mut self,
        f: &PiecewiseFn,
        from: f64,
        to: Option<f64>,
    ) -> std::result::Result<(), PiecewiseError> {
        Self::push_piece(&mut self.bps, &mut self.polys, from, f.local_poly_at(from)?);
        for (b, p) in f.breakpoints().iter().zip(f.pieces()) {
            if *b > from && to.map_or(true, |t| *b < t) {
                Self::push_piece(&mut self.bps, &mut self.polys, *b, p.clone());
            }
        }
        Ok(())
    }

    fn append_speed(
        &mut self,
        f: &PiecewiseFn,
        from: f64,
        to: Option<f64>,
    ) -> std::result::Result<(), PiecewiseError> {
        Self::push_piece(
            &mut self.speed_bps,
            &mut self.speed_polys,
            from,
            f.local_poly_at(from)?,
        );
        for (b, p) in f.breakpoints().iter().zip(f.pieces()) {
            if *b > from && to.map_or(true, |t| *b < t) {
                Self::push_piece(&mut self.speed_bps, &mut self.speed_polys, *b, p.clone());
            }
        }
        Ok(())
    }

    fn append_speed_const(&mut self, from: f64, v: f64) {
        Self::push_piece(&mut self.speed_bps, &mut self.speed_polys, from, Poly::constant(v));
    }

    fn push_seg(&mut self, start: f64, end: Option<f64>, limiter: Limiter, co: Vec<Limiter>) {
        self.segs.push(BottleneckSegment { start, end, limiter, co_limiters: co });
    }
}

/// Bottleneck attribution for a stretch governed by a labeled envelope
/// (data envelope while on the curve, speed envelope while climbing).
fn attribute_window(
    builder: &mut Builder,
    env: &LabeledEnvelope,
    map: &dyn Fn(usize) -> Limiter,
    from: f64,
    to: Option<f64>,
) {
    let bps = env.envelope.breakpoints();
    let mut at = from;
    let idx0 = bps.partition_point(|b| *b <= from).saturating_sub(1);
    for i in idx0..bps.len() {
        let seg_start = if i == idx0 { at } else { bps[i] };
        if let Some(t) = to {
            if seg_start >= t {
                break;
            }
        }
        let seg_end = bps.get(i + 1).copied();
        let seg_end = match (seg_end, to) {
            (Some(e), Some(t)) => Some(e.min(t)),
            (Some(e), None) => Some(e),
            (None, t) => t,
        };
        let labels = &env.labels[i];
        if let Some(&first) = labels.iter().next() {
            let co = labels.iter().skip(1).map(|&k| map(k)).collect();
            builder.push_seg(seg_start, seg_end, map(first), co);
        }
        at = match seg_end {
            Some(e) => e,
            None => break,
        };
    }
}

pub fn solve(process: &Process, ctx: &ExecutionContext) -> Result<ProgressResult> {
    let violations = crate::model::validate(process, ctx);
    if !violations.is_empty() {
        return Err(SolverError::Invalid(violations));
    }
    let data = data_progress(process, ctx)?;
    impose_resource_limits(process, ctx, &data)
}

pub fn impose_resource_limits(
    process: &Process,
    ctx: &ExecutionContext,
    data: &DataProgress,
) -> Result<ProgressResult> {
    let start = ctx.start_time;
    let target = process.target_progress;
    let ptol = tol::eps_abs(target);
    let pd = &data.envelope.envelope;
    let pd_jumps: Vec<f64> = pd.jumps().iter().map(|j| j.0).collect();

    let inputs: Vec<PiecewiseFn> = ctx
        .resource_inputs
        .iter()
        .map(|i| align_to_start(i, start))
        .collect::<std::result::Result<_, _>>()?;
    let supplies: Vec<PiecewiseFn> = inputs.iter().map(|i| i.antiderivative(0.0)).collect();
    let req_derivs: Vec<PiecewiseFn> = process
        .resource_requirements
        .iter()
        .map(|r| r.fn_.derivative())
        .collect();

    // jump masses and slope-region boundaries on the progress axis
    let mut masses: Vec<(f64, usize, f64, bool)> = Vec::new(); // (p, l, mass, paid)
    let mut region_bounds: BTreeSet<u64> = BTreeSet::new();
    let mut push_bound = |p: f64| {
        region_bounds.insert(p.to_bits());
    };
    for (l, rr) in process.resource_requirements.iter().enumerate() {
        for (p, m) in jump_masses(&rr.fn_) {
            masses.push((p, l, m, false));
            push_bound(p);
        }
        for &b in &rr.fn_.breakpoints()[1..] {
            push_bound(b);
        }
    }
    let mut region_bounds: Vec<f64> = region_bounds.iter().map(|b| f64::from_bits(*b)).collect();
    region_bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut builder = Builder::new();
    let mut cur = start;
    let mut p_cur = 0.0f64.min(pd.eval(start)?);
    let mut completion = None;
    let mut last_state = (f64::NAN, f64::NAN);

    for iter in 0..MAX_ITERATIONS {
        if p_cur >= target - ptol {
            completion = Some(cur);
            break;
        }
        if (cur, p_cur) == last_state {
            return Err(SolverError::NonTermination { iterations: iter });
        }
        last_state = (cur, p_cur);

        // Root isolation can leave p_cur a hair off a slope-region boundary;
        // snap onto it so the slope lookup and the region stop agree.
        if let Some(&b) = region_bounds.iter().find(|b| (**b - p_cur).abs() <= ptol) {
            p_cur = b;
        }

        // Unpaid jump mass at the current progress: stall while the supply
        // integral covers it.
        let due: Vec<usize> = masses
            .iter()
            .enumerate()
            .filter(|(_, (p, _, _, paid))| !paid && (*p - p_cur).abs() <= ptol)
            .map(|(i, _)| i)
            .collect();
        if !due.is_empty() {
            let mut pay_times: Vec<(usize, f64)> = Vec::new();
            for &i in &due {
                let (_, l, m, _) = masses[i];
                let base = supplies[l].eval(cur)?;
                match first_time_at_or_above(&supplies[l], base + m, cur) {
                    Some(t) => pay_times.push((l, t)),
                    None => return Err(SolverError::NoProgress { t: cur }),
                }
            }
            let (l_max, stall_end) = pay_times
                .iter()
                .copied()
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            for &i in &due {
                masses[i].3 = true;
            }
            if stall_end > cur {
                let ttol = tol::eps_abs(stall_end);
                let co = pay_times
                    .iter()
                    .filter(|(l, t)| *l != l_max && (stall_end - *t).abs() <= ttol)
                    .map(|(l, _)| Limiter::Resource(*l))
                    .collect();
                Builder::push_piece(&mut builder.bps, &mut builder.polys, cur, Poly::constant(p_cur));
                builder.append_speed_const(cur, 0.0);
                builder.push_seg(cur, Some(stall_end), Limiter::Resource(l_max), co);
                cur = stall_end;
            }
            continue;
        }

        // current slope region: R' right values at p_cur
        let slopes: Vec<f64> = req_derivs
            .iter()
            .map(|d| d.eval(p_cur.max(d.domain_start())))
            .collect::<std::result::Result<_, _>>()?;
        let rtol = tol::eps_rel();
        let active: Vec<usize> = slopes
            .iter()
            .enumerate()
            .filter(|(l, s)| {
                **s > rtol
                    * process.resource_requirements[*l].fn_.coeff_scale().max(1.0)
            })
            .map(|(l, _)| l)
            .collect();

        let p_stop = region_bounds
            .iter()
            .copied()
            .find(|b| *b > p_cur + ptol)
            .unwrap_or(f64::INFINITY)
            .min(target);

        let d_right = pd.eval(cur)?;
        let on_curve = p_cur >= d_right - ptol;

        if active.is_empty() {
            if on_curve {
                // follow the data envelope freely until the next region
                // boundary (where a resource may activate) or forever
                match first_time_at_or_above(pd, p_stop, cur) {
                    Some(t_e) if t_e > cur => {
                        builder.append_fn(pd, cur, Some(t_e))?;
                        builder.append_speed_const(cur, UNLIMITED_SPEED);
                        attribute_window(
                            &mut builder,
                            &data.envelope,
                            &|k| Limiter::Data(k),
                            cur,
                            Some(t_e),
                        );
                        cur = t_e;
                        p_cur = pd.eval(t_e)?.min(p_stop);
                    }
                    Some(_) => {
                        // already at the boundary value: jump the progress
                        p_cur = p_stop;
                    }
                    None => {
                        // envelope never reaches the next boundary: tail
                        builder.append_fn(pd, cur, None)?;
                        builder.append_speed_const(cur, UNLIMITED_SPEED);
                        attribute_window(
                            &mut builder,
                            &data.envelope,
                            &|k| Limiter::Data(k),
                            cur,
                            None,
                        );
                        break;
                    }
                }
            } else {
                // no resource constrains this region: instant catch-up
                p_cur = d_right.min(p_stop);
            }
            continue;
        }

        // admissible speed in this region: min over active resources
        let speed_fns: Vec<PiecewiseFn> = active
            .iter()
            .map(|&l| inputs[l].scale_y(1.0 / slopes[l]))
            .collect();
        let speed_env = min_envelope(&speed_fns)?;
        let speed = &speed_env.envelope;

        if on_curve {
            let pd_deriv = pd.derivative();
            let diff = pd_deriv.sub(speed)?;
            let dtol = tol::eps_abs(diff.coeff_scale());
            let segs = sign_segments(&diff, cur, dtol)?;
            let violated = segs.first().map_or(false, |s| s.sign == Sign::Pos);
            if !violated {
                // events: speed violation onset, envelope jump, region bound
                let mut t_e = segs
                    .iter()
                    .find(|s| s.sign == Sign::Pos)
                    .map(|s| s.start)
                    .unwrap_or(f64::INFINITY);
                if let Some(j) = pd_jumps.iter().copied().find(|j| *j > cur) {
                    t_e = t_e.min(j);
                }
                if let Some(t) = first_time_at_or_above(pd, p_stop, cur) {
                    t_e = t_e.min(t);
                }
                if !t_e.is_finite() {
                    builder.append_fn(pd, cur, None)?;
                    builder.append_speed(speed, cur, None)?;
                    attribute_window(
                        &mut builder,
                        &data.envelope,
                        &|k| Limiter::Data(k),
                        cur,
                        None,
                    );
                    break;
                }
                if t_e > cur {
                    builder.append_fn(pd, cur, Some(t_e))?;
                    builder.append_speed(speed, cur, Some(t_e))?;
                    attribute_window(
                        &mut builder,
                        &data.envelope,
                        &|k| Limiter::Data(k),
                        cur,
                        Some(t_e),
                    );
                    cur = t_e;
                    p_cur = pd.eval_left(t_e)?.min(p_stop).max(p_cur);
                    continue;
                }
                // t_e == cur: violation starts right here; fall through to
                // the limited climb below
            }
        }

        // resource-limited climb from (cur, p_cur)
        let p_lim = speed.restrict_start(cur)?.antiderivative(p_cur);
        let meet = {
            let diff = pd.sub(&p_lim)?;
            let dtol = tol::eps_abs(target);
            let segs = sign_segments(&diff, cur, dtol)?;
            let ttol = tol::eps_abs(cur.abs().max(1.0));
            let mut found = None;
            for seg in &segs {
                match seg.sign {
                    Sign::Pos => continue,
                    _ if seg.start > cur + ttol => {
                        found = Some(seg.start);
                        break;
                    }
                    Sign::Neg => {
                        found = Some(seg.start.max(cur));
                        break;
                    }
                    _ => continue,
                }
            }
            found
        };
        let reach = first_time_at_or_above(&p_lim, p_stop, cur).filter(|t| *t > cur);
        let t_e = match (meet, reach) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(SolverError::NoProgress { t: cur }),
        };
        builder.append_fn(&p_lim, cur, Some(t_e))?;
        builder.append_speed(speed, cur, Some(t_e))?;
        attribute_window(
            &mut builder,
            &speed_env,
            &|i| Limiter::Resource(active[i]),
            cur,
            Some(t_e),
        );
        let reached = p_lim.eval(t_e)?;
        p_cur = if reach == Some(t_e) && (meet.map_or(true, |m| m >= t_e)) {
            p_stop.min(reached.max(p_cur))
        } else {
            reached.max(p_cur)
        };
        cur = t_e;
    }

    if completion.is_none() && p_cur >= target - ptol {
        completion = Some(cur);
    }

    // freeze at the target after completion
    if let Some(t_done) = completion {
        Builder::push_piece(&mut builder.bps, &mut builder.polys, t_done, Poly::constant(target));
        builder.append_speed_const(t_done, 0.0);
        // close open-ended segments and add the trailing marker
        for seg in &mut builder.segs {
            if seg.end.is_none() {
                seg.end = Some(t_done);
            }
        }
        builder.push_seg(t_done, None, Limiter::Finished, vec![]);
    }
    if builder.bps.is_empty() {
        builder.bps.push(start);
        builder.polys.push(Poly::constant(p_cur));
        builder.speed_bps.push(start);
        builder.speed_polys.push(Poly::constant(0.0));
    }

    let progress = PiecewiseFn::new(
        builder.bps,
        builder.polys,
        crate::piecewise::ExtensionMode::Continue,
    )
    .map_err(SolverError::Piecewise)?
    .compact();
    let max_speed_trace = PiecewiseFn::new(
        builder.speed_bps,
        builder.speed_polys,
        crate::piecewise::ExtensionMode::Continue,
    )
    .map_err(SolverError::Piecewise)?;

    let horizon = completion.unwrap_or(cur).max(start + 1.0) - start;
    let bottlenecks = coalesce_segments(builder.segs, 1e-9 * horizon);

    Ok(ProgressResult {
        progress,
        data_progress: pd.clone(),
        per_input_progress: data.per_input.clone(),
        completion_time: completion,
        bottlenecks,
        max_speed_trace,
    })
}

fn coalesce_segments(mut segs: Vec<BottleneckSegment>, min_len: f64) -> Vec<BottleneckSegment> {
    segs.retain(|s| match s.end {
        Some(e) => e - s.start > min_len,
        None => true,
    });
    let mut out: Vec<BottleneckSegment> = Vec::new();
    for seg in segs {
        match out.last_mut() {
            Some(last)
                if last.limiter == seg.limiter && last.co_limiters == seg.co_limiters =>
            {
                last.end = seg.end;
            }
            _ => out.push(seg),
        }
    }
    // re-abut after drops so the timeline stays gapless
    for i in 1..out.len() {
        let prev_end = out[i - 1].end;
        if let Some(e) = prev_end {
            if out[i].start > e {
                out[i].start = e;
            }
        }
    }
    out
}

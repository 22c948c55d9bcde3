//! Post-hoc analysis of a solved process: resource demand and relative
//! usage, unused allocation, consumed and buffered data, and the
//! data-only demand bound.

use crate::model::{DataRequirement, ExecutionContext, Process, ResourceRequirement};
use crate::piecewise::{
    compose, compose_with, first_time_at_or_above, first_time_strictly_above,
    generalized_inverse, sign_segments, CutMode, PiecewiseFn, PiecewiseError, Poly, Sign,
};
use crate::solver::{data_progress, ProgressResult, SolverError};
use crate::tol;

pub type Result<T> = std::result::Result<T, SolverError>;

/// Interval on which a resource is a bottleneck: relative usage is 1, or
/// supply is zero while the requirement still grows.
#[derive(Debug, Clone, Copy)]
pub struct BottleneckWitness {
    pub start: f64,
    pub end: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ResourceUsage {
    pub name: String,
    pub demand: PiecewiseFn,
    pub relative: PiecewiseFn,
    pub unused: PiecewiseFn,
    pub witnesses: Vec<BottleneckWitness>,
}

#[derive(Debug, Clone)]
pub struct DataUsage {
    pub name: String,
    pub consumed: PiecewiseFn,
    pub buffered: PiecewiseFn,
}

#[derive(Debug, Clone)]
pub struct UsageReport {
    pub resources: Vec<ResourceUsage>,
    pub data: Vec<DataUsage>,
}

#[derive(Debug, Clone)]
pub struct DataOnlyDemand {
    pub name: String,
    pub demand: PiecewiseFn,
    /// Instants where a data-progress jump makes the instantaneous demand
    /// unbounded (kept out of the function to stay in the polynomial class).
    pub unbounded_instants: Vec<f64>,
}

fn align_to_start(f: &PiecewiseFn, start: f64) -> std::result::Result<PiecewiseFn, PiecewiseError> {
    if f.domain_start() <= start {
        f.restrict_start(start)
    } else {
        let v0 = f.eval(f.domain_start())?;
        Ok(f.extend_left_constant(start, v0))
    }
}

/// Instantaneous resource need along the solved progress: P'(t) * R'(P(t)).
pub fn resource_demand(result: &ProgressResult, req: &ResourceRequirement) -> Result<PiecewiseFn> {
    let marginal = req.fn_.derivative();
    let along_path = compose(&marginal, &result.progress)?;
    Ok(result.progress.derivative().mul(&along_path)?.compact())
}

/// Demand over supply with the 0/0 -> 0 convention, plus the intervals
/// witnessing a bottleneck. The supply must be piecewise-constant for the
/// quotient to stay in the polynomial class.
pub fn relative_usage(
    result: &ProgressResult,
    req: &ResourceRequirement,
    input: &PiecewiseFn,
) -> Result<(PiecewiseFn, Vec<BottleneckWitness>)> {
    let start = result.progress.domain_start();
    let input = align_to_start(input, start)?;
    let demand = resource_demand(result, req)?;
    let relative = demand.div_by_pwconstant(&input)?.compact();

    // witnesses: relative == 1, or zero supply with growing requirement
    let mut witnesses = Vec::new();
    let shifted = relative.add_constant(-1.0);
    let wtol = tol::eps_abs(1.0) * 1e3; // attribution band, looser than eps
    for seg in sign_segments(&shifted, start, wtol)? {
        if seg.sign == Sign::Zero {
            witnesses.push(BottleneckWitness { start: seg.start, end: seg.end });
        }
    }
    let marginal_along = compose(&req.fn_.derivative(), &result.progress)?;
    let itol = tol::eps_abs(input.coeff_scale());
    for seg in sign_segments(&input, start, itol)? {
        if seg.sign == Sign::Zero {
            // supply is zero: bottleneck only while the requirement grows
            let probe = seg.end.map_or(seg.start + 1.0, |e| 0.5 * (seg.start + e));
            if marginal_along.eval(probe).unwrap_or(0.0) > itol {
                witnesses.push(BottleneckWitness { start: seg.start, end: seg.end });
            }
        }
    }
    witnesses.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
    Ok((relative, witnesses))
}

/// Minimum cumulative input needed to support the achieved progress. During
/// a stall at a requirement jump the pre-jump amount applies: the burst is
/// consumed only once progress actually moves past it.
pub fn data_consumed(result: &ProgressResult, req: &DataRequirement) -> Result<PiecewiseFn> {
    let p = &result.progress;
    let start = p.domain_start();
    let inverse = generalized_inverse(&req.fn_)?;
    let composed = compose_with(&inverse, p, CutMode::StrictlyAbove)?;

    // the right-continuous inverse loses the pre-jump value at its own
    // domain start; patch the leading flat stretch explicitly
    let p0 = p.eval(start)?;
    let consumed0 =
        first_time_at_or_above(&req.fn_, p0, req.fn_.domain_start()).unwrap_or(req.fn_.domain_start());
    match first_time_strictly_above(p, p0, start) {
        Some(t_move) if t_move > start => Ok(PiecewiseFn::constant(start, consumed0)
            .splice(t_move, &composed)?
            .compact()),
        Some(_) => Ok(composed.compact()),
        None => Ok(PiecewiseFn::constant(start, consumed0)),
    }
}

/// Input delivered but not yet consumed. Frozen after completion; small
/// negative excursions are clamped to zero, anything worse is logged.
pub fn buffered_data(
    result: &ProgressResult,
    req: &DataRequirement,
    input: &PiecewiseFn,
) -> Result<PiecewiseFn> {
    let start = result.progress.domain_start();
    let input = align_to_start(input, start)?;
    let consumed = data_consumed(result, req)?;
    let mut buffered = input.sub(&consumed)?;
    if let Some(t_done) = result.completion_time {
        let frozen = PiecewiseFn::constant(t_done, buffered.eval(t_done)?);
        buffered = buffered.splice(t_done, &frozen)?;
    }

    // clamp negatives: split at sign changes, zero the negative stretches
    let btol = tol::eps_abs(input.coeff_scale());
    let segs = sign_segments(&buffered, start, btol)?;
    if segs.iter().any(|s| s.sign == Sign::Neg) {
        let mut worst = 0.0f64;
        let mut bps = Vec::new();
        let mut polys = Vec::new();
        for seg in &segs {
            match seg.sign {
                Sign::Neg => {
                    let probe = seg.end.map_or(seg.start + 1.0, |e| 0.5 * (seg.start + e));
                    worst = worst.min(buffered.eval(probe)?);
                    bps.push(seg.start);
                    polys.push(Poly::zero());
                }
                _ => {
                    bps.push(seg.start);
                    polys.push(buffered.local_poly_at(seg.start)?);
                    // keep interior breakpoints of the stretch
                    if let Some(e) = seg.end {
                        for (b, piece) in buffered.breakpoints().iter().zip(buffered.pieces()) {
                            if *b > seg.start && *b < e {
                                bps.push(*b);
                                polys.push(piece.clone());
                            }
                        }
                    } else {
                        for (b, piece) in buffered.breakpoints().iter().zip(buffered.pieces()) {
                            if *b > seg.start {
                                bps.push(*b);
                                polys.push(piece.clone());
                            }
                        }
                    }
                }
            }
        }
        if worst < -1e3 * btol {
            log::warn!(
                "buffered data for {} dips to {worst}: consumed exceeds delivered",
                req.name
            );
        }
        buffered =
            PiecewiseFn::new(bps, polys, crate::piecewise::ExtensionMode::Continue)?.compact();
    }
    Ok(buffered)
}

/// Resource demand if only the data inputs limited progress: the supply
/// level at which a resource stops being a bottleneck.
pub fn data_only_demand(process: &Process, ctx: &ExecutionContext) -> Result<Vec<DataOnlyDemand>> {
    let data = data_progress(process, ctx)?;
    let pd = &data.envelope.envelope;
    let pd_deriv = pd.derivative();
    let jump_instants: Vec<f64> = pd.jumps().iter().map(|j| j.0).collect();
    let mut out = Vec::with_capacity(process.resource_requirements.len());
    for rr in &process.resource_requirements {
        let along = compose(&rr.fn_.derivative(), pd)?;
        let demand = pd_deriv.mul(&along)?.compact();
        let ctol = tol::eps_abs(rr.fn_.coeff_scale());
        let unbounded_instants = jump_instants
            .iter()
            .copied()
            .filter(|t| along.eval(*t).map(|v| v > ctol).unwrap_or(false))
            .collect();
        out.push(DataOnlyDemand {
            name: rr.name.clone(),
            demand,
            unbounded_instants,
        });
    }
    Ok(out)
}

/// Full per-process usage report.
pub fn usage_report(
    process: &Process,
    ctx: &ExecutionContext,
    result: &ProgressResult,
) -> Result<UsageReport> {
    let start = result.progress.domain_start();
    let mut resources = Vec::with_capacity(process.resource_requirements.len());
    for (l, rr) in process.resource_requirements.iter().enumerate() {
        let input = align_to_start(&ctx.resource_inputs[l], start)?;
        let demand = resource_demand(result, rr)?;
        let (relative, witnesses) = relative_usage(result, rr, &input)?;
        let unused = input.sub(&demand)?.compact();
        resources.push(ResourceUsage {
            name: rr.name.clone(),
            demand,
            relative,
            unused,
            witnesses,
        });
    }
    let mut data = Vec::with_capacity(process.data_requirements.len());
    for (k, dr) in process.data_requirements.iter().enumerate() {
        let consumed = data_consumed(result, dr)?;
        let buffered = buffered_data(result, dr, &ctx.data_inputs[k])?;
        data.push(DataUsage {
            name: dr.name.clone(),
            consumed,
            buffered,
        });
    }
    Ok(UsageReport { resources, data })
}

//! Domain types: processes, their requirement/output functions, and the
//! execution context supplying data and resources over time.
//!
//! Conventions (units are free as long as they are consistent):
//! - data requirement: cumulative input amount -> maximum achievable progress
//! - resource requirement: progress -> cumulative resource amount
//! - output: progress -> cumulative output amount
//! - data input: time -> cumulative amount; resource input: time -> rate

use crate::piecewise::{sign_segments, PiecewiseFn, Sign};
use crate::tol;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone)]
pub struct DataRequirement {
    pub name: String,
    /// Cumulative input amount -> maximum achievable progress.
    pub fn_: PiecewiseFn,
}

#[derive(Debug, Clone)]
pub struct ResourceRequirement {
    pub name: String,
    /// Progress -> cumulative resource amount. Piecewise-linear.
    pub fn_: PiecewiseFn,
}

#[derive(Debug, Clone)]
pub struct OutputSpec {
    pub name: String,
    /// Progress -> cumulative output amount.
    pub fn_: PiecewiseFn,
}

#[derive(Debug, Clone)]
pub struct Process {
    pub name: String,
    pub data_requirements: Vec<DataRequirement>,
    pub resource_requirements: Vec<ResourceRequirement>,
    pub outputs: Vec<OutputSpec>,
    pub target_progress: f64,
}

#[derive(Debug, Clone)]
pub struct ExecutionContext {
    pub start_time: f64,
    /// Per data requirement: time -> cumulative amount delivered.
    pub data_inputs: Vec<PiecewiseFn>,
    /// Per resource requirement: time -> rate supplied.
    pub resource_inputs: Vec<PiecewiseFn>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    Monotonicity,
    PiecewiseLinearity,
    NegativeValue,
    CountMismatch,
    TargetUnreachable,
    NonPositiveTarget,
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub function: String,
    pub kind: ViolationKind,
    pub witness: Option<f64>,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {:?}", self.function, self.kind)?;
        if let Some(w) = self.witness {
            write!(f, " (witness at {w})")?;
        }
        Ok(())
    }
}

fn check_monotone(fn_: &PiecewiseFn, name: &str, out: &mut Vec<Violation>) {
    if let Err(e) = fn_.verify_non_decreasing() {
        let witness = match e {
            crate::piecewise::PiecewiseError::NotMonotone { x } => Some(x),
            _ => None,
        };
        out.push(Violation {
            function: name.to_string(),
            kind: ViolationKind::Monotonicity,
            witness,
        });
    }
}

fn first_negative(fn_: &PiecewiseFn) -> Option<f64> {
    let tol_abs = tol::eps_abs(fn_.coeff_scale());
    let segs = sign_segments(fn_, fn_.domain_start(), tol_abs).ok()?;
    segs.iter().find(|s| s.sign == Sign::Neg).map(|s| s.start)
}

/// Structural checks for a process and its context. Violations are data,
/// never panics: arbitrary well-formed functions are accepted as input.
pub fn validate(process: &Process, ctx: &ExecutionContext) -> Vec<Violation> {
    let mut out = Vec::new();
    let pname = &process.name;

    if !(process.target_progress > 0.0) {
        out.push(Violation {
            function: format!("{pname}.target_progress"),
            kind: ViolationKind::NonPositiveTarget,
            witness: Some(process.target_progress),
        });
    }
    if process.data_requirements.len() != ctx.data_inputs.len()
        || process.resource_requirements.len() != ctx.resource_inputs.len()
    {
        out.push(Violation {
            function: pname.clone(),
            kind: ViolationKind::CountMismatch,
            witness: None,
        });
    }

    for dr in &process.data_requirements {
        let label = format!("{pname}.data.{}", dr.name);
        check_monotone(&dr.fn_, &label, &mut out);
        // the target must be in the requirement's range
        let reachable = crate::piecewise::first_time_at_or_above(
            &dr.fn_,
            process.target_progress,
            dr.fn_.domain_start(),
        )
        .is_some();
        if !reachable && dr.fn_.verify_non_decreasing().is_ok() {
            out.push(Violation {
                function: label,
                kind: ViolationKind::TargetUnreachable,
                witness: Some(process.target_progress),
            });
        }
    }
    for rr in &process.resource_requirements {
        let label = format!("{pname}.resource.{}", rr.name);
        check_monotone(&rr.fn_, &label, &mut out);
        let ctol = tol::eps_abs(rr.fn_.coeff_scale());
        if rr.fn_.pieces().iter().any(|p| p.degree(ctol) > 1) {
            out.push(Violation {
                function: label,
                kind: ViolationKind::PiecewiseLinearity,
                witness: None,
            });
        }
    }
    for o in &process.outputs {
        check_monotone(&o.fn_, &format!("{pname}.output.{}", o.name), &mut out);
    }
    for (k, input) in ctx.data_inputs.iter().enumerate() {
        check_monotone(input, &format!("{pname}.data_input[{k}]"), &mut out);
    }
    for (l, input) in ctx.resource_inputs.iter().enumerate() {
        if let Some(w) = first_negative(input) {
            out.push(Violation {
                function: format!("{pname}.resource_input[{l}]"),
                kind: ViolationKind::NegativeValue,
                witness: Some(w),
            });
        }
    }
    out
}

/// Canonical requirement shapes: "stream" (progress proportional to input)
/// and "burst" (all input needed before any progress).
pub mod canonical {
    use super::ModelError;
    use crate::piecewise::{ExtensionMode, PiecewiseFn, Poly};

    /// Data stream: progress = slope * amount.
    pub fn data_stream(slope: f64) -> Result<PiecewiseFn, ModelError> {
        if !(slope > 0.0) {
            return Err(ModelError::InvalidParameter(format!("stream slope {slope}")));
        }
        Ok(PiecewiseFn::linear(0.0, 0.0, slope))
    }

    /// Data burst: no progress below `input_total`, full `target` at it.
    pub fn data_burst(input_total: f64, target: f64) -> Result<PiecewiseFn, ModelError> {
        if !(input_total > 0.0) || !(target > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "burst({input_total}, {target})"
            )));
        }
        Ok(PiecewiseFn::new(
            vec![0.0, input_total],
            vec![Poly::zero(), Poly::constant(target)],
            ExtensionMode::Continue,
        )
        .unwrap())
    }

    /// Resource stream: cumulative amount = per_progress * p.
    pub fn resource_stream(per_progress: f64) -> Result<PiecewiseFn, ModelError> {
        if !(per_progress > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "resource stream rate {per_progress}"
            )));
        }
        Ok(PiecewiseFn::linear(0.0, 0.0, per_progress))
    }

    /// Resource burst: `total` needed before any progress; the positive
    /// value at progress 0 is the upfront mass.
    pub fn resource_burst(total: f64) -> Result<PiecewiseFn, ModelError> {
        if !(total > 0.0) {
            return Err(ModelError::InvalidParameter(format!("resource burst {total}")));
        }
        Ok(PiecewiseFn::constant(0.0, total))
    }
}

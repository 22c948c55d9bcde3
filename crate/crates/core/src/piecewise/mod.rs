//! Closed algebra over piecewise-defined polynomial functions of one real
//! variable.
//!
//! A function is a strictly increasing breakpoint sequence plus one
//! polynomial per piece, written in the local variable `x - x_i`. The piece
//! to the *right* of a breakpoint defines the value at it; left limits are
//! exposed separately, so jump discontinuities are first-class. The last
//! piece extends to infinity.

pub mod poly;
pub mod roots;

mod envelope;

pub use envelope::{min_envelope, LabeledEnvelope};
pub use poly::Poly;

use crate::tol;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PiecewiseError {
    #[error("evaluation at {x} outside domain [{start}, {end:?}]")]
    Domain { x: f64, start: f64, end: Option<f64> },
    #[error("division by zero at x = {x}")]
    DivisionByZero { x: f64 },
    #[error("divisor is not piecewise-constant")]
    NotPiecewiseConstant,
    #[error("function is not monotone non-decreasing (witness near x = {x})")]
    NotMonotone { x: f64 },
    #[error("piece starting at x = {x} is not invertible (degree > 1)")]
    NonInvertiblePiece { x: f64 },
    #[error("invalid construction: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, PiecewiseError>;

/// How a function behaves past its last breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionMode {
    /// Value frozen at the last breakpoint evaluation.
    Hold,
    /// The last polynomial keeps going.
    Continue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFn {
    breakpoints: Vec<f64>,
    pieces: Vec<Poly>,
    extension: ExtensionMode,
    /// Optional exclusive-ish end of domain (evaluation above it errors).
    /// Produced by generalized inverses of range-bounded functions.
    domain_end: Option<f64>,
}

impl PiecewiseFn {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Poly>, extension: ExtensionMode) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != pieces.len() {
            return Err(PiecewiseError::Invalid(format!(
                "{} breakpoints vs {} pieces",
                breakpoints.len(),
                pieces.len()
            )));
        }
        for w in breakpoints.windows(2) {
            if !(w[0] < w[1]) {
                return Err(PiecewiseError::Invalid(format!(
                    "breakpoints not strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || pieces.iter().any(|p| p.coeffs().iter().any(|c| !c.is_finite()))
        {
            return Err(PiecewiseError::Invalid("non-finite value".into()));
        }
        let mut pieces = pieces;
        if extension == ExtensionMode::Hold {
            // hold mode freezes the tail at the last breakpoint's value
            let last = pieces.last().unwrap();
            let held = Poly::constant(last.coeffs()[0]);
            *pieces.last_mut().unwrap() = held;
        }
        Ok(PiecewiseFn { breakpoints, pieces, extension, domain_end: None })
    }

    pub fn constant(x0: f64, v: f64) -> Self {
        PiecewiseFn::new(vec![x0], vec![Poly::constant(v)], ExtensionMode::Continue).unwrap()
    }

    /// `v0 + slope * (x - x0)` on `[x0, inf)`.
    pub fn linear(x0: f64, v0: f64, slope: f64) -> Self {
        PiecewiseFn::new(vec![x0], vec![Poly::linear(v0, slope)], ExtensionMode::Continue).unwrap()
    }

    pub fn identity(x0: f64) -> Self {
        PiecewiseFn::linear(x0, x0, 1.0)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    pub fn extension(&self) -> ExtensionMode {
        self.extension
    }

    pub fn domain_start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn domain_end(&self) -> Option<f64> {
        self.domain_end
    }

    pub fn with_domain_end(mut self, end: Option<f64>) -> Self {
        self.domain_end = end;
        self
    }

    fn x_scale(&self) -> f64 {
        self.breakpoints
            .iter()
            .fold(1.0f64, |m, b| m.max(b.abs()))
    }

    /// Rough magnitude of coefficients, for tolerance scaling.
    pub fn coeff_scale(&self) -> f64 {
        self.pieces
            .iter()
            .flat_map(|p| p.coeffs())
            .fold(1.0f64, |m, c| m.max(c.abs()))
    }

    fn piece_index(&self, x: f64) -> Result<usize> {
        let start = self.domain_start();
        let xtol = tol::eps_abs(self.x_scale().max(x.abs()));
        if x < start - xtol {
            return Err(PiecewiseError::Domain { x, start, end: self.domain_end });
        }
        if let Some(end) = self.domain_end {
            if x > end + xtol {
                return Err(PiecewiseError::Domain { x, start, end: self.domain_end });
            }
        }
        let i = self.breakpoints.partition_point(|b| *b <= x);
        Ok(i.saturating_sub(1))
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let i = self.piece_index(x)?;
        Ok(self.pieces[i].eval(x - self.breakpoints[i]))
    }

    /// Left limit at `x`. At the domain start this equals `eval`.
    pub fn eval_left(&self, x: f64) -> Result<f64> {
        let i = self.piece_index(x)?;
        let xtol = tol::eps_abs(self.x_scale().max(x.abs()));
        if i > 0 && (x - self.breakpoints[i]).abs() <= xtol {
            Ok(self.pieces[i - 1].eval(x - self.breakpoints[i - 1]))
        } else if i == 0 && (x - self.breakpoints[0]).abs() <= xtol {
            Ok(self.pieces[0].eval(0.0))
        } else {
            self.eval(x)
        }
    }

    /// The polynomial describing the function around `x`, re-based so its
    /// local variable is `t - x`. Uses the right-hand piece at breakpoints.
    pub fn local_poly_at(&self, x: f64) -> Result<Poly> {
        let i = self.piece_index(x)?;
        Ok(self.pieces[i].shift_origin(x - self.breakpoints[i]))
    }

    /// True if the left limit and the value at breakpoint `x` differ.
    pub fn has_jump(&self, x: f64) -> bool {
        let xtol = tol::eps_abs(self.x_scale().max(x.abs()));
        let Some(i) = self
            .breakpoints
            .iter()
            .position(|b| (b - x).abs() <= xtol)
        else {
            return false;
        };
        if i == 0 {
            return false;
        }
        let left = self.pieces[i - 1].eval(self.breakpoints[i] - self.breakpoints[i - 1]);
        let right = self.pieces[i].eval(0.0);
        (left - right).abs() > tol::eps_abs(left.abs().max(right.abs()))
    }

    /// All jump discontinuities as `(x, left_limit, value)`.
    pub fn jumps(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for i in 1..self.breakpoints.len() {
            let left = self.pieces[i - 1].eval(self.breakpoints[i] - self.breakpoints[i - 1]);
            let right = self.pieces[i].eval(0.0);
            if (left - right).abs() > tol::eps_abs(left.abs().max(right.abs())) {
                out.push((self.breakpoints[i], left, right));
            }
        }
        out
    }

    pub fn derivative(&self) -> PiecewiseFn {
        PiecewiseFn {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(Poly::derivative).collect(),
            extension: ExtensionMode::Continue,
            domain_end: self.domain_end,
        }
    }

    /// Continuous antiderivative with value `c0` at the domain start.
    pub fn antiderivative(&self, c0: f64) -> PiecewiseFn {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let mut val = c0;
        for (i, p) in self.pieces.iter().enumerate() {
            let anti = p.antiderivative(val);
            if i + 1 < self.breakpoints.len() {
                val = anti.eval(self.breakpoints[i + 1] - self.breakpoints[i]);
            }
            pieces.push(anti);
        }
        PiecewiseFn {
            breakpoints: self.breakpoints.clone(),
            pieces,
            extension: ExtensionMode::Continue,
            domain_end: self.domain_end,
        }
    }

    pub fn scale_y(&self, k: f64) -> PiecewiseFn {
        PiecewiseFn {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.scale(k)).collect(),
            extension: self.extension,
            domain_end: self.domain_end,
        }
    }

    pub fn add_constant(&self, c: f64) -> PiecewiseFn {
        PiecewiseFn {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.add_constant(c)).collect(),
            extension: self.extension,
            domain_end: self.domain_end,
        }
    }

    /// Rescale the argument axis by `k > 0`.
    pub fn scale_x(&self, k: f64) -> PiecewiseFn {
        assert!(k > 0.0);
        PiecewiseFn {
            breakpoints: self.breakpoints.iter().map(|b| b * k).collect(),
            pieces: self.pieces.iter().map(|p| p.scale_arg(1.0 / k)).collect(),
            extension: self.extension,
            domain_end: self.domain_end.map(|e| e * k),
        }
    }

    /// Translate the argument axis by `dt`.
    pub fn shift_x(&self, dt: f64) -> PiecewiseFn {
        PiecewiseFn {
            breakpoints: self.breakpoints.iter().map(|b| b + dt).collect(),
            pieces: self.pieces.clone(),
            extension: self.extension,
            domain_end: self.domain_end.map(|e| e + dt),
        }
    }

    /// Restrict the domain to `[x, inf)`, re-basing the piece that covers `x`.
    pub fn restrict_start(&self, x: f64) -> Result<PiecewiseFn> {
        if x <= self.domain_start() {
            return Ok(self.clone());
        }
        let first = self.local_poly_at(x)?;
        let xtol = tol::eps_abs(self.x_scale().max(x.abs()));
        let mut bps = vec![x];
        let mut pieces = vec![first];
        for (b, p) in self.breakpoints.iter().zip(&self.pieces) {
            if *b > x + xtol {
                bps.push(*b);
                pieces.push(p.clone());
            }
        }
        Ok(PiecewiseFn { breakpoints: bps, pieces, extension: self.extension, domain_end: self.domain_end })
    }

    /// Extend the domain left to `x0` with a constant value.
    pub fn extend_left_constant(&self, x0: f64, v: f64) -> PiecewiseFn {
        if x0 >= self.domain_start() {
            return self.clone();
        }
        let mut bps = vec![x0];
        bps.extend_from_slice(&self.breakpoints);
        let mut pieces = vec![Poly::constant(v)];
        pieces.extend_from_slice(&self.pieces);
        PiecewiseFn { breakpoints: bps, pieces, extension: self.extension, domain_end: self.domain_end }
    }

    fn merged_breakpoints(&self, other: &PiecewiseFn, start: f64) -> Vec<f64> {
        let scale = self.x_scale().max(other.x_scale()).max(start.abs());
        let xtol = tol::eps_abs(scale);
        let mut bps: Vec<f64> = vec![start];
        bps.extend(self.breakpoints.iter().copied().filter(|b| *b > start + xtol));
        bps.extend(other.breakpoints.iter().copied().filter(|b| *b > start + xtol));
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bps.dedup_by(|a, b| (*a - *b).abs() <= xtol);
        bps
    }

    fn combine(&self, other: &PiecewiseFn, op: impl Fn(&Poly, &Poly) -> Poly) -> Result<PiecewiseFn> {
        let start = self.domain_start().max(other.domain_start());
        let end = match (self.domain_end, other.domain_end) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if let Some(e) = end {
            if e < start {
                return Err(PiecewiseError::Invalid("domains do not overlap".into()));
            }
        }
        let bps = self.merged_breakpoints(other, start);
        let mut pieces = Vec::with_capacity(bps.len());
        for &b in &bps {
            pieces.push(op(&self.local_poly_at(b)?, &other.local_poly_at(b)?));
        }
        Ok(PiecewiseFn { breakpoints: bps, pieces, extension: ExtensionMode::Continue, domain_end: end })
    }

    pub fn add(&self, other: &PiecewiseFn) -> Result<PiecewiseFn> {
        self.combine(other, Poly::add)
    }

    pub fn sub(&self, other: &PiecewiseFn) -> Result<PiecewiseFn> {
        self.combine(other, Poly::sub)
    }

    pub fn mul(&self, other: &PiecewiseFn) -> Result<PiecewiseFn> {
        self.combine(other, Poly::mul)
    }

    /// Divide by a piecewise-constant function. Pieces where both numerator
    /// and divisor vanish are defined as zero (no demand, no constraint).
    pub fn div_by_pwconstant(&self, divisor: &PiecewiseFn) -> Result<PiecewiseFn> {
        let ctol = tol::eps_abs(divisor.coeff_scale());
        if divisor.pieces.iter().any(|p| !p.is_constant(ctol)) {
            return Err(PiecewiseError::NotPiecewiseConstant);
        }
        let start = self.domain_start().max(divisor.domain_start());
        let bps = self.merged_breakpoints(divisor, start);
        let ftol = tol::eps_abs(self.coeff_scale());
        let mut pieces = Vec::with_capacity(bps.len());
        for &b in &bps {
            let num = self.local_poly_at(b)?;
            let den = divisor.eval(b)?;
            if den.abs() <= ctol {
                if num.is_zero(ftol) {
                    pieces.push(Poly::zero());
                } else {
                    return Err(PiecewiseError::DivisionByZero { x: b });
                }
            } else {
                pieces.push(num.scale(1.0 / den));
            }
        }
        let end = match (self.domain_end, divisor.domain_end) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        Ok(PiecewiseFn { breakpoints: bps, pieces, extension: ExtensionMode::Continue, domain_end: end })
    }

    /// Verify the function never decreases (within tolerance scaled to its
    /// coefficient magnitude). Checks piece endpoints and interior critical
    /// points, which is exact for polynomials.
    pub fn verify_non_decreasing(&self) -> Result<()> {
        let vtol = tol::eps_abs(self.coeff_scale());
        for (i, p) in self.pieces.iter().enumerate() {
            let d = p.derivative();
            let hi = if i + 1 < self.breakpoints.len() {
                self.breakpoints[i + 1] - self.breakpoints[i]
            } else {
                roots::root_bound(&d) + 1.0
            };
            let mut candidates = vec![0.0, hi];
            candidates.extend(roots::roots_in(&d.derivative(), 0.0, hi));
            for u in candidates {
                if d.eval(u) < -vtol {
                    return Err(PiecewiseError::NotMonotone { x: self.breakpoints[i] + u });
                }
            }
            if i + 1 == self.breakpoints.len() {
                // infinite tail: leading coefficient decides the limit
                let dtol = tol::eps_abs(d.coeffs().iter().fold(1.0f64, |m, c| m.max(c.abs())));
                let deg = d.degree(dtol);
                if deg > 0 && d.coeffs()[deg] < -dtol {
                    return Err(PiecewiseError::NotMonotone { x: self.breakpoints[i] + hi });
                }
            }
        }
        for i in 1..self.breakpoints.len() {
            let left = self.pieces[i - 1].eval(self.breakpoints[i] - self.breakpoints[i - 1]);
            let right = self.pieces[i].eval(0.0);
            if right < left - vtol {
                return Err(PiecewiseError::NotMonotone { x: self.breakpoints[i] });
            }
        }
        Ok(())
    }

    /// Replace everything from `from` on with `patch`. No continuity is
    /// imposed; callers guarantee it where required.
    pub fn splice(&self, from: f64, patch: &PiecewiseFn) -> Result<PiecewiseFn> {
        let xtol = tol::eps_abs(self.x_scale().max(from.abs()));
        if from < self.domain_start() - xtol || from < patch.domain_start() - xtol {
            return Err(PiecewiseError::Domain {
                x: from,
                start: self.domain_start().max(patch.domain_start()),
                end: None,
            });
        }
        let mut bps = Vec::new();
        let mut pieces = Vec::new();
        for (b, p) in self.breakpoints.iter().zip(&self.pieces) {
            if *b < from - xtol {
                bps.push(*b);
                pieces.push(p.clone());
            }
        }
        bps.push(from);
        pieces.push(patch.local_poly_at(from.max(patch.domain_start()))?);
        for (b, p) in patch.breakpoints.iter().zip(&patch.pieces) {
            if *b > from + xtol {
                bps.push(*b);
                pieces.push(p.clone());
            }
        }
        Ok(PiecewiseFn { breakpoints: bps, pieces, extension: patch.extension, domain_end: patch.domain_end })
    }

    /// Drop breakpoints where the neighbouring pieces describe the same
    /// polynomial with no jump.
    pub fn compact(&self) -> PiecewiseFn {
        let ctol = tol::eps_abs(self.coeff_scale());
        let mut bps = vec![self.breakpoints[0]];
        let mut pieces = vec![self.pieces[0].clone()];
        for i in 1..self.breakpoints.len() {
            let cont = pieces
                .last()
                .unwrap()
                .shift_origin(self.breakpoints[i] - *bps.last().unwrap());
            let n = cont.coeffs().len().max(self.pieces[i].coeffs().len());
            let same = (0..n).all(|k| {
                let a = cont.coeffs().get(k).copied().unwrap_or(0.0);
                let b = self.pieces[i].coeffs().get(k).copied().unwrap_or(0.0);
                (a - b).abs() <= ctol
            });
            if !same {
                bps.push(self.breakpoints[i]);
                pieces.push(self.pieces[i].clone());
            }
        }
        PiecewiseFn { breakpoints: bps, pieces, extension: self.extension, domain_end: self.domain_end }
    }
}

/// Where to cut the timeline when the outer function has a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutMode {
    /// Cut at the first time the inner function reaches the level.
    AtOrAbove,
    /// Cut at the first time the inner function strictly exceeds the level.
    /// Used for left generalized inverses, where a stall exactly at a jump
    /// level must keep the pre-jump value.
    StrictlyAbove,
}

/// `outer(inner(x))`. The inner function must be monotone non-decreasing;
/// inner values below the outer domain are clamped to its start.
pub fn compose(outer: &PiecewiseFn, inner: &PiecewiseFn) -> Result<PiecewiseFn> {
    compose_with(outer, inner, CutMode::AtOrAbove)
}

pub fn compose_with(outer: &PiecewiseFn, inner: &PiecewiseFn, mode: CutMode) -> Result<PiecewiseFn> {
    inner.verify_non_decreasing()?;

    let t0 = inner.domain_start();
    let tscale = inner.x_scale();
    let xtol = tol::eps_abs(tscale);
    let mut cuts: Vec<f64> = inner.breakpoints.to_vec();
    let mut levels: Vec<f64> = vec![outer.domain_start()];
    levels.extend_from_slice(&outer.breakpoints[1..]);
    for y in levels {
        let hit = match mode {
            CutMode::AtOrAbove => first_time_at_or_above(inner, y, t0),
            CutMode::StrictlyAbove => first_time_strictly_above(inner, y, t0),
        };
        if let Some(t) = hit {
            cuts.push(t);
        }
    }
    let mut end = inner.domain_end;
    if let Some(oe) = outer.domain_end {
        let t = first_time_strictly_above(inner, oe, t0);
        end = match (end, t) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= xtol);

    let max_deg = outer
        .pieces
        .iter()
        .map(|p| p.degree(0.0))
        .max()
        .unwrap_or(0)
        * inner.pieces.iter().map(|p| p.degree(0.0)).max().unwrap_or(0);
    if max_deg > 9 {
        log::warn!("composition produces degree {max_deg} pieces");
    }

    let below_value = outer.eval(outer.domain_start())?;
    let mut pieces = Vec::with_capacity(cuts.len());
    for (i, &a) in cuts.iter().enumerate() {
        // With strict cuts the outer piece is chosen from a probe inside the
        // interval: a stall sitting exactly at a jump level then keeps the
        // pre-jump piece, while an interval rising away from a level lands
        // on the post-jump piece.
        let probe_t = match cuts.get(i + 1) {
            Some(&b) => 0.5 * (a + b),
            None => match end {
                Some(e) if e.is_finite() => 0.5 * (a + e.max(a)),
                _ => a + 1.0,
            },
        };
        let v = match mode {
            CutMode::AtOrAbove => inner.eval(a)?,
            CutMode::StrictlyAbove => inner.eval(probe_t)?,
        };
        let vtol = tol::eps_abs(outer.x_scale().max(v.abs()));
        if v < outer.domain_start() - vtol {
            pieces.push(Poly::constant(below_value));
            continue;
        }
        let mut oi = outer.piece_index(v.max(outer.domain_start()))?;
        match mode {
            // a level cut computed by root finding may evaluate a hair below
            // the outer breakpoint it targets; snap up within tolerance
            CutMode::AtOrAbove => {
                if oi + 1 < outer.breakpoints.len()
                    && outer.breakpoints[oi + 1] - v <= vtol
                {
                    oi += 1;
                }
            }
            CutMode::StrictlyAbove => {
                if oi > 0 && (v - outer.breakpoints[oi]).abs() <= vtol {
                    oi -= 1;
                }
            }
        }
        let y_base = outer.breakpoints[oi];
        let arg = inner.local_poly_at(a)?.add_constant(-y_base);
        pieces.push(outer.pieces[oi].compose(&arg));
    }
    Ok(PiecewiseFn { breakpoints: cuts, pieces, extension: ExtensionMode::Continue, domain_end: end }.compact())
}

/// Left generalized inverse of a monotone non-decreasing function:
/// `g(y) = min { x : f(x) >= y }`. Strictly increasing pieces must be
/// linear; constant stretches become jumps and jumps become constants.
/// The result's domain ends at the range maximum when the range is bounded.
pub fn generalized_inverse(f: &PiecewiseFn) -> Result<PiecewiseFn> {
    f.verify_non_decreasing()?;
    let ctol = tol::eps_abs(f.coeff_scale());

    let mut bps: Vec<f64> = Vec::new();
    let mut pieces: Vec<Poly> = Vec::new();
    let mut y_cursor = f.pieces[0].eval(0.0);
    let g_start = y_cursor;

    let push = |bps: &mut Vec<f64>, pieces: &mut Vec<Poly>, y: f64, p: Poly| {
        let ytol = tol::eps_abs(y.abs().max(1.0));
        if let Some(last) = bps.last() {
            if y <= *last + ytol {
                return;
            }
        }
        bps.push(y);
        pieces.push(p);
    };

    let mut unbounded = false;
    for (i, p) in f.pieces.iter().enumerate() {
        let x_i = f.breakpoints[i];
        let v_i = p.eval(0.0);
        let ytol = tol::eps_abs(v_i.abs().max(y_cursor.abs()));
        if v_i > y_cursor + ytol {
            // jump in f at x_i: constant stretch in g
            if bps.is_empty() {
                bps.push(y_cursor);
                pieces.push(Poly::constant(x_i));
            } else {
                push(&mut bps, &mut pieces, y_cursor, Poly::constant(x_i));
            }
            y_cursor = v_i;
        }
        if p.is_constant(ctol) {
            continue;
        }
        if p.degree(ctol) > 1 {
            return Err(PiecewiseError::NonInvertiblePiece { x: x_i });
        }
        let slope = p.coeffs()[1];
        if slope < -ctol {
            return Err(PiecewiseError::NotMonotone { x: x_i });
        }
        if slope.abs() <= ctol {
            continue;
        }
        // local inverse: x = x_i + (y - v_i) / slope
        let inv = Poly::linear(x_i, 1.0 / slope);
        if bps.is_empty() {
            bps.push(v_i);
            pieces.push(inv);
        } else {
            push(&mut bps, &mut pieces, v_i.max(y_cursor), inv.shift_origin(v_i.max(y_cursor) - v_i));
        }
        if i + 1 < f.breakpoints.len() {
            y_cursor = p.eval(f.breakpoints[i + 1] - x_i);
        } else {
            unbounded = true;
        }
    }
    if bps.is_empty() {
        // f entirely constant
        bps.push(g_start);
        pieces.push(Poly::constant(f.domain_start()));
    }
    let end = if unbounded { None } else { Some(y_cursor) };
    Ok(PiecewiseFn { breakpoints: bps, pieces, extension: ExtensionMode::Continue, domain_end: end })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

#[derive(Debug, Clone, Copy)]
pub struct SignSeg {
    pub start: f64,
    pub end: Option<f64>,
    pub sign: Sign,
}

/// Partition `[from, inf)` into maximal intervals of constant sign of `f`,
/// with `|value| <= tol_abs` classified as zero.
pub fn sign_segments(f: &PiecewiseFn, from: f64, tol_abs: f64) -> Result<Vec<SignSeg>> {
    let from = from.max(f.domain_start());
    let cap = f.domain_end;
    let mut nodes: Vec<f64> = vec![from];
    for (i, &b) in f.breakpoints.iter().enumerate() {
        let lo = if b < from { from } else { b };
        let mut hi = if i + 1 < f.breakpoints.len() {
            f.breakpoints[i + 1]
        } else {
            let local = f.pieces[i].shift_origin(lo - b);
            lo + roots::root_bound(&local) + 1.0
        };
        if let Some(c) = cap {
            hi = hi.min(c);
        }
        if hi <= from {
            continue;
        }
        if b > from {
            nodes.push(b);
        }
        let local = f.pieces[i].shift_origin(lo - b);
        for r in roots::roots_in(&local, 0.0, hi - lo) {
            nodes.push(lo + r);
        }
    }
    let xtol = tol::eps_abs(f.x_scale().max(from.abs()));
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup_by(|a, b| (*a - *b).abs() <= xtol);
    if let Some(c) = cap {
        nodes.retain(|&n| n <= c + xtol);
    }

    let mut segs: Vec<SignSeg> = Vec::new();
    for i in 0..nodes.len() {
        let a = nodes[i];
        let (end, probe) = match nodes.get(i + 1) {
            Some(&b) => (Some(b), 0.5 * (a + b)),
            None => match cap {
                Some(c) if c > a => (Some(c), 0.5 * (a + c)),
                Some(_) => (Some(a), a),
                None => (None, a + 1.0),
            },
        };
        let v = f.eval(probe)?;
        let sign = if v.abs() <= tol_abs {
            Sign::Zero
        } else if v > 0.0 {
            Sign::Pos
        } else {
            Sign::Neg
        };
        match segs.last_mut() {
            Some(last) if last.sign == sign => last.end = end,
            _ => segs.push(SignSeg { start: a, end, sign }),
        }
    }
    Ok(segs)
}

/// Smallest `x >= after` where the predicate `f > g` (right-continuous)
/// changes truth value. Touching without crossing is not an event.
pub fn first_crossing(f: &PiecewiseFn, g: &PiecewiseFn, after: f64) -> Result<Option<f64>> {
    let d = f.sub(g)?;
    let tol_abs = tol::eps_abs(d.coeff_scale());
    let segs = sign_segments(&d, after.max(d.domain_start()), tol_abs)?;
    let Some(first) = segs.first() else { return Ok(None) };
    let state0 = first.sign == Sign::Pos;
    for seg in &segs[1..] {
        if (seg.sign == Sign::Pos) != state0 {
            return Ok(Some(seg.start));
        }
    }
    Ok(None)
}

/// First `t >= after` with `f(t) >= y` (within tolerance), if any.
pub fn first_time_at_or_above(f: &PiecewiseFn, y: f64, after: f64) -> Option<f64> {
    let after = after.max(f.domain_start());
    let d = f.add_constant(-y);
    let tol_abs = tol::eps_abs(y.abs().max(d.coeff_scale()));
    let segs = sign_segments(&d, after, tol_abs).ok()?;
    segs.iter().find(|s| s.sign != Sign::Neg).map(|s| s.start)
}

/// First `t >= after` with `f(t) > y` (beyond tolerance), if any.
pub fn first_time_strictly_above(f: &PiecewiseFn, y: f64, after: f64) -> Option<f64> {
    let after = after.max(f.domain_start());
    let d = f.add_constant(-y);
    let tol_abs = tol::eps_abs(y.abs().max(d.coeff_scale()));
    let segs = sign_segments(&d, after, tol_abs).ok()?;
    segs.iter().find(|s| s.sign == Sign::Pos).map(|s| s.start)
}

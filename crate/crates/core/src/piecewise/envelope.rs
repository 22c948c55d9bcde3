//! Pointwise minimum of a family of piecewise functions, keeping track of
//! which members attain the minimum on each piece.

use std::collections::BTreeSet;

use super::{sign_segments, PiecewiseError, PiecewiseFn, Result};
use crate::tol;

#[derive(Debug, Clone)]
pub struct LabeledEnvelope {
    pub envelope: PiecewiseFn,
    /// Indices into the input slice attaining the minimum, one set per
    /// envelope piece.
    pub labels: Vec<BTreeSet<usize>>,
}

impl LabeledEnvelope {
    /// The label set in effect at `x`.
    pub fn labels_at(&self, x: f64) -> &BTreeSet<usize> {
        let i = self
            .envelope
            .breakpoints()
            .partition_point(|b| *b <= x)
            .saturating_sub(1);
        &self.labels[i]
    }
}

/// Lower envelope `min_k f_k` over the common domain, labeled with the
/// attaining indices.
pub fn min_envelope(fns: &[PiecewiseFn]) -> Result<LabeledEnvelope> {
    if fns.is_empty() {
        return Err(PiecewiseError::Invalid("empty family".into()));
    }
    let start = fns
        .iter()
        .map(|f| f.domain_start())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut end: Option<f64> = None;
    for f in fns {
        end = match (end, f.domain_end()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }

    let vscale = fns.iter().map(|f| f.coeff_scale()).fold(1.0f64, f64::max);
    let vtol = tol::eps_abs(vscale);
    let xscale = fns
        .iter()
        .flat_map(|f| f.breakpoints())
        .fold(start.abs().max(1.0), |m, b| m.max(b.abs()));
    let xtol = tol::eps_abs(xscale);

    // Candidate switch points: every breakpoint plus every sign change of
    // every pairwise difference. Between consecutive candidates the argmin
    // set is constant.
    let mut nodes: Vec<f64> = vec![start];
    for f in fns {
        nodes.extend(f.breakpoints().iter().copied().filter(|b| *b > start));
    }
    for i in 0..fns.len() {
        for j in i + 1..fns.len() {
            let d = fns[i].sub(&fns[j])?;
            for seg in sign_segments(&d, start, vtol)? {
                nodes.push(seg.start);
                if let Some(e) = seg.end {
                    nodes.push(e);
                }
            }
        }
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup_by(|a, b| (*a - *b).abs() <= xtol);
    if let Some(e) = end {
        nodes.retain(|&n| n <= e + xtol);
    }

    let mut bps = Vec::new();
    let mut pieces = Vec::new();
    let mut labels: Vec<BTreeSet<usize>> = Vec::new();
    for (i, &a) in nodes.iter().enumerate() {
        let probe = match nodes.get(i + 1) {
            Some(&b) => 0.5 * (a + b),
            None => match end {
                Some(e) if e > a => 0.5 * (a + e),
                Some(_) => a,
                None => a + 1.0,
            },
        };
        let vals: Vec<f64> = fns
            .iter()
            .map(|f| f.eval(probe))
            .collect::<Result<_>>()?;
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let set: BTreeSet<usize> = vals
            .iter()
            .enumerate()
            .filter(|(_, v)| (**v - min) <= vtol)
            .map(|(k, _)| k)
            .collect();
        let rep = *set.iter().next().unwrap();
        let piece = fns[rep].local_poly_at(a)?;

        // merge with the previous piece when nothing changed
        if let (Some(last_bp), Some(last_piece), Some(last_set)) =
            (bps.last().copied(), pieces.last(), labels.last())
        {
            let cont: &crate::piecewise::Poly = last_piece;
            let cont = cont.shift_origin(a - last_bp);
            let n = cont.coeffs().len().max(piece.coeffs().len());
            let same_poly = (0..n).all(|k| {
                let x = cont.coeffs().get(k).copied().unwrap_or(0.0);
                let y = piece.coeffs().get(k).copied().unwrap_or(0.0);
                (x - y).abs() <= vtol
            });
            if same_poly && *last_set == set {
                continue;
            }
        }
        bps.push(a);
        pieces.push(piece);
        labels.push(set);
    }

    let envelope = PiecewiseFn::new(bps, pieces, super::ExtensionMode::Continue)?
        .with_domain_end(end);
    Ok(LabeledEnvelope { envelope, labels })
}

//! Polynomial root isolation on an interval.
//!
//! Closed forms for degree <= 2, recursive critical-point splitting with
//! bisection refinement for higher degrees.

use super::poly::Poly;
use crate::tol;

/// Effective degree of `p` over `[lo, hi]`. Raw coefficient magnitudes are
/// incomparable across degrees (their units differ by powers of x), so a
/// coefficient counts when its maximum contribution over the interval is
/// significant relative to the largest contribution.
fn effective_degree(p: &Poly, lo: f64, hi: f64) -> usize {
    let umax = lo.abs().max(hi.abs()).max(1.0);
    let mut pow = 1.0;
    let mut weights = Vec::with_capacity(p.coeffs().len());
    for c in p.coeffs() {
        weights.push(c.abs() * pow);
        pow *= umax;
    }
    let wmax = weights.iter().fold(1.0f64, |m, &w| m.max(w));
    let wtol = tol::eps_rel() * wmax;
    weights.iter().rposition(|&w| w > wtol).unwrap_or(0)
}

/// All real roots of `p` in `[lo, hi]`, sorted and deduplicated.
/// `lo` and `hi` must be finite with `lo <= hi`.
pub fn roots_in(p: &Poly, lo: f64, hi: f64) -> Vec<f64> {
    let width = (hi - lo).abs().max(1.0);
    let deg = effective_degree(p, lo, hi);
    let mut out = match deg {
        0 => Vec::new(), // constant (incl. near-zero): no isolated roots
        1 => {
            let c = p.coeffs();
            vec![-c[0] / c[1]]
        }
        2 => {
            let c = p.coeffs();
            let (a, b, cc) = (c[2], c[1], c[0]);
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                Vec::new()
            } else {
                let sq = disc.sqrt();
                // numerically stable quadratic formula
                let q = -0.5 * (b + b.signum() * sq);
                let (r1, r2) = if b == 0.0 {
                    let r = (disc.sqrt() / (2.0 * a)).abs();
                    (-r, r)
                } else {
                    (q / a, if q != 0.0 { cc / q } else { -b / a })
                };
                vec![r1, r2]
            }
        }
        _ => roots_by_splitting(p, lo, hi, deg),
    };
    let xtol = tol::eps_rel() * width;
    out.retain(|r| r.is_finite() && *r >= lo - xtol && *r <= hi + xtol);
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= xtol);
    out.iter().map(|r| r.clamp(lo, hi)).collect()
}

fn roots_by_splitting(p: &Poly, lo: f64, hi: f64, deg: usize) -> Vec<f64> {
    // Monotone segments between critical points: one root per sign change.
    let crit = if deg <= 1 {
        Vec::new()
    } else {
        roots_in(&p.derivative(), lo, hi)
    };
    let mut nodes = vec![lo];
    nodes.extend(crit);
    nodes.push(hi);
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup();

    let val_scale = nodes
        .iter()
        .fold(0.0f64, |m, &x| m.max(p.eval(x).abs()))
        .max(1.0);
    let vtol = tol::eps_rel() * val_scale;

    let mut out = Vec::new();
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (p.eval(a), p.eval(b));
        if fa.abs() <= vtol {
            out.push(a);
        }
        if fa * fb < 0.0 && fa.abs() > vtol && fb.abs() > vtol {
            out.push(bisect(p, a, b));
        }
    }
    if p.eval(hi).abs() <= vtol {
        out.push(hi);
    }
    out
}

fn bisect(p: &Poly, mut a: f64, mut b: f64) -> f64 {
    let mut fa = p.eval(a);
    let xtol = tol::eps_rel() * (b - a).abs().max(1.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= xtol {
            return m;
        }
        let fm = p.eval(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Upper bound on the magnitude of all real roots (Cauchy bound).
pub fn root_bound(p: &Poly) -> f64 {
    // exact degree: trimming "small" leading coefficients here could shrink
    // the bound below a true root, and magnitudes are not comparable across
    // degrees anyway
    let deg = p.degree(0.0);
    if deg == 0 {
        return 0.0;
    }
    let lead = p.coeffs()[deg].abs();
    let maxr = p.coeffs()[..deg]
        .iter()
        .fold(0.0f64, |m, c| m.max(c.abs() / lead));
    1.0 + maxr
}

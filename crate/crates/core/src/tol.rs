//! Global numeric tolerance.
//!
//! All root isolation, monotonicity checks and intersection deduplication
//! share a single relative tolerance. The CLI may override it through the
//! `BOTTLEMOD_TOLERANCE` environment variable.

use std::sync::atomic::{AtomicU64, Ordering};

const DEFAULT_EPS_REL: f64 = 1e-9;

static EPS_BITS: AtomicU64 = AtomicU64::new(0);

/// Current relative tolerance.
pub fn eps_rel() -> f64 {
    let bits = EPS_BITS.load(Ordering::Relaxed);
    if bits == 0 {
        DEFAULT_EPS_REL
    } else {
        f64::from_bits(bits)
    }
}

/// Override the global relative tolerance. Intended for process startup.
pub fn set_eps_rel(eps: f64) {
    assert!(eps > 0.0 && eps.is_finite(), "tolerance must be positive");
    EPS_BITS.store(eps.to_bits(), Ordering::Relaxed);
}

/// Absolute tolerance for values of magnitude `scale`.
pub fn eps_abs(scale: f64) -> f64 {
    eps_rel() * scale.abs().max(1.0)
}

/// `a <= b` up to tolerance at the given scale.
pub fn approx_le(a: f64, b: f64, scale: f64) -> bool {
    a <= b + eps_abs(scale)
}

/// `a == b` up to tolerance at the given scale.
pub fn approx_eq(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= eps_abs(scale)
}

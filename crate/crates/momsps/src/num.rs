//! Float text encoding shared by every output format.

/// Shortest decimal that parses back to the same `f64`.
///
/// Plain notation for magnitudes in `[1e-5, 1e16)`, scientific otherwise, so
/// tiny step-sizes do not expand into hundreds of zeros.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

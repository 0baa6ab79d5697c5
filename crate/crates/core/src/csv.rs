//! Number formatting shared by every CSV writer.

/// Shortest decimal that round-trips to the same `f64`.
///
/// Integral values drop the trailing `.0`; very large or small magnitudes
/// use exponent notation.
pub fn fmt_f64(x: f64) -> String {
    let s = format!("{x:?}");
    match s.strip_suffix(".0") {
        Some(t) => t.to_string(),
        None => s,
    }
}

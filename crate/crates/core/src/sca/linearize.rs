use crate::error::{Error, Result};

/// Tangent of `1/c` at `c_tilde`, evaluated at `c`:
/// `2/c_tilde - c/c_tilde^2`.
///
/// Since `1/c` is convex this is a global under-estimator for `c > 0`, exact
/// at `c == c_tilde`.
pub fn linearize_inverse(c: f64, c_tilde: f64) -> Result<f64> {
    if !(c_tilde > 0.0) {
        return Err(Error::domain(format!("linearization point must be positive, got {c_tilde}")));
    }
    // Written so that c == c_tilde gives exactly 1 / c_tilde.
    Ok((2.0 - c / c_tilde) / c_tilde)
}

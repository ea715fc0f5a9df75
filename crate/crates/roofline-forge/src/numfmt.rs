//! Significant-digit rounding for serialized output.
//!
//! Machine files and analysis JSON emit real numbers rounded to six
//! significant digits so that repeated load/save cycles are stable.

/// Round `x` to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits as i32 - 1 - magnitude);
    let rounded = (x * scale).round() / scale;
    // Scaling can push values like 9.9999995 across a decade; re-check once.
    let new_mag = rounded.abs().log10().floor() as i32;
    if new_mag != magnitude {
        let scale = 10f64.powi(digits as i32 - 1 - new_mag);
        (x * scale).round() / scale
    } else {
        rounded
    }
}

/// Round to six significant digits (the serialization default).
pub fn sig6(x: f64) -> f64 {
    round_sig(x, 6)
}

//! Half-up rounding to a fixed number of decimals, as used when comparing
//! recomputed values with figures printed to a given precision.

/// Relative slack absorbing binary representation error, so that a ratio
/// like 12.5 that comes out as 12.499999999999998 still rounds up.
const TIE_SLACK: f64 = 1e-9;

/// Rounds half away from zero to `decimals` places.
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    if !value.is_finite() {
        return value;
    }
    let scale = 10f64.powi(decimals as i32);
    let scaled = value.abs() * scale;
    let rounded = (scaled + 0.5 + TIE_SLACK * scaled.max(1.0)).floor() / scale;
    rounded.copysign(value)
}

/// Rounds half-up and renders with exactly `decimals` places.
pub fn format_fixed(value: f64, decimals: u32) -> String {
    let r = round_half_up(value, decimals);
    // Avoid printing "-0.00".
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{:.*}", decimals as usize, r)
}

/// Number of digits after the decimal point in a printed number.
pub fn decimals_of(printed: &str) -> u32 {
    printed
        .trim()
        .split_once('.')
        .map_or(0, |(_, frac)| frac.chars().take_while(char::is_ascii_digit).count() as u32)
}

use crate::types::LengthSpec;

/// Piecewise length reward: 1 inside the band, a linear ramp up to the band
/// below it, and a linear decay to 0 at the cap above it. Lengths at or past
/// the cap score 0.
pub fn length_reward(len: u32, spec: &LengthSpec) -> f64 {
    let (lower, upper, max) = (spec.lower(), spec.upper(), spec.max());
    if len >= max {
        0.0
    } else if len < lower {
        f64::from(len) / f64::from(lower)
    } else if len <= upper {
        1.0
    } else {
        f64::from(max - len) / f64::from(max - upper)
    }
}

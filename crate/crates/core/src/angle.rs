use std::f64::consts::{PI, TAU};

/// Wraps an angle to (−π, π].
pub fn wrap(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let a = angle.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// Signed shortest rotation taking `from` onto `to`, in (−π, π].
pub fn diff(to: f64, from: f64) -> f64 {
    wrap(to - from)
}

/// Significant digits kept for serialized values.
pub const SIGNIFICANT_DIGITS: usize = 12;
/// Largest denominator used in fraction annotations.
pub const FRACTION_DENOMINATOR: u64 = 10_000;
/// Relative distance within which a value is annotated with a fraction.
const FRACTION_TOL: f64 = 1e-9;

pub fn round_significant(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .unwrap_or(v)
}

/// `p/q` for the best rational approximation with `q ≤ 10000`, when it lies
/// within a relative 1e-9 of `v` and is not an integer.
pub fn fraction_annotation(v: f64) -> Option<String> {
    if !v.is_finite() || v == 0.0 {
        return None;
    }
    let x = v.abs();
    // Continued-fraction convergents.
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e15 {
            break;
        }
        let a = a as u64;
        let (p2, q2) = (a.checked_mul(p1)?.checked_add(p0)?, a * q1 + q0);
        if q2 > FRACTION_DENOMINATOR {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let f = r - a as f64;
        if (p1 as f64 / q1 as f64 - x).abs() <= FRACTION_TOL * x || f < 1e-15 {
            break;
        }
        r = 1.0 / f;
    }
    if q1 <= 1 || (p1 as f64 / q1 as f64 - x).abs() > FRACTION_TOL * x {
        return None;
    }
    let sign = if v < 0.0 { "-" } else { "" };
    Some(format!("{sign}{p1}/{q1}"))
}

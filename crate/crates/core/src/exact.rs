//! Closed-form Hele-Shaw solutions: the expanding disk and the real cubic
//! family parametrised by its conserved moments.

use crate::conformal_map::PolynomialMap;
use crate::error::{FlowError, Result};

/// `f(ξ, t) = √(2t + r0²) ξ`.
pub fn exact_disk(r0: f64, t: f64) -> Result<PolynomialMap> {
    if !(r0 > 0.0) || !(t >= 0.0) {
        return Err(FlowError::InvalidInput(format!("exact_disk needs r0 > 0 and t >= 0, got ({r0}, {t})")));
    }
    PolynomialMap::disk((2.0 * t + r0 * r0).sqrt())
}

/// Real cubic coefficients determined by `a_1` and the conserved moments:
/// `a_2 = M_1 a_1²/(3M_2 + a_1⁴)`, `a_3 = M_2/a_1³`.
pub fn cubic_from_a1(m1: f64, m2: f64, a1: f64) -> [f64; 3] {
    let a1_2 = a1 * a1;
    [a1, m1 * a1_2 / (3.0 * m2 + a1_2 * a1_2), m2 / (a1_2 * a1)]
}

/// Zero moment `a_1² + 2a_2² + 3a_3²` of the cubic through `a_1`, and its
/// derivative in `a_1`.
fn cubic_area(m1: f64, m2: f64, a1: f64) -> (f64, f64) {
    let [_, a2, a3] = cubic_from_a1(m1, m2, a1);
    let q = 3.0 * m2 + a1.powi(4);
    let da2 = m1 * (2.0 * a1 * q - a1 * a1 * 4.0 * a1.powi(3)) / (q * q);
    let da3 = -3.0 * m2 / a1.powi(4);
    (a1 * a1 + 2.0 * a2 * a2 + 3.0 * a3 * a3, 2.0 * a1 + 4.0 * a2 * da2 + 6.0 * a3 * da3)
}

/// The real cubic whose moments are `(M0_0 + 2t, M1, M2)`.
///
/// `a_1` is the root of the zero-moment identity closest below
/// `√(M0_0 + 2t)`: a downward scan locates a sign change, bisection
/// narrows it and Newton polishes the result.
pub fn exact_cubic(m0_0: f64, m1: f64, m2: f64, t: f64) -> Result<PolynomialMap> {
    if !(m0_0 > 0.0) || !(t >= 0.0) {
        return Err(FlowError::InvalidInput(format!("exact_cubic needs M0_0 > 0 and t >= 0, got ({m0_0}, {t})")));
    }
    let target = m0_0 + 2.0 * t;
    let residual = |a: f64| cubic_area(m1, m2, a).0 - target;
    let lower_limit = (m0_0 / 6.0).sqrt();
    let mut hi = target.sqrt();
    if residual(hi) == 0.0 {
        return PolynomialMap::from_real(&cubic_from_a1(m1, m2, hi));
    }
    if residual(hi) < 0.0 {
        return Err(FlowError::Bracketing(format!("zero-moment identity below target at a_1 = {hi}")));
    }
    let mut lo = hi;
    loop {
        let next = lo * 0.99;
        if next < lower_limit {
            return Err(FlowError::Bracketing(format!(
                "no root of the zero-moment identity in [{lower_limit}, {hi}] for (M0_0, M1, M2) = ({m0_0}, {m1}, {m2})"
            )));
        }
        if residual(next) < 0.0 {
            hi = lo;
            lo = next;
            break;
        }
        lo = next;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut a1 = 0.5 * (lo + hi);
    for _ in 0..3 {
        let (area, slope) = cubic_area(m1, m2, a1);
        if slope <= 0.0 {
            return Err(FlowError::Bracketing(format!("zero-moment identity not increasing at a_1 = {a1}")));
        }
        let next = a1 - (area - target) / slope;
        if (next - a1).abs() <= 1e-14 * a1 {
            a1 = next;
            break;
        }
        a1 = next;
    }
    PolynomialMap::from_real(&cubic_from_a1(m1, m2, a1))
}

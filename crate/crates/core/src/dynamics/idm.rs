use serde::{Deserialize, Serialize};

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams<T = f64> {
    /// Maximum acceleration a, m/s².
    pub accel: T,
    /// Comfortable deceleration g, m/s².
    pub decel: T,
    /// Time headway T, s.
    pub headway: T,
    /// Minimum gap s₀, m.
    pub min_gap: T,
    /// Exponent on v / v_p.
    pub exponent: T,
}

impl<T: Scalar> Default for IdmParams<T> {
    fn default() -> Self {
        IdmParams {
            accel: T::lit(0.3),
            decel: T::lit(3.0),
            headway: T::lit(1.5),
            min_gap: T::lit(2.0),
            exponent: T::one(),
        }
    }
}

/// a [1 − (v/v_p)^e − (s*/s)²] with s* = s₀ + vT + vΔv / (2√(a g)).
/// `gap = +inf` models a free road.
pub fn idm_acceleration<T: Scalar>(v: T, gap: T, dv: T, preferred: T, p: &IdmParams<T>) -> T {
    let free = (v / preferred).powf(p.exponent);
    let interaction = if gap.is_infinite() {
        T::zero()
    } else {
        let s_star = p.min_gap + v * p.headway + v * dv / (T::lit(2.0) * (p.accel * p.decel).sqrt());
        let s_star = s_star.max(T::zero());
        (s_star / gap).powi(2)
    };
    p.accel * (T::one() - free - interaction)
}

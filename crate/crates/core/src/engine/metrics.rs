//! Trip and network metrics.

use crate::num::Scalar;

/// Travel time in excess of the unhindered time, floored at zero.
pub fn delay<T: Scalar>(travel: T, unhindered: T) -> T {
    (travel - unhindered).max(T::zero())
}

/// Relative travel-time increase (T − m_T) / m_T.
pub fn normalized_delay<T: Scalar>(travel: T, shortest: T) -> T {
    (travel - shortest) / shortest
}

/// Running mean after one more completed trip; `n` trips were folded in before.
pub fn moving_average_update<T: Scalar>(mean: T, value: T, n: usize) -> T {
    mean + (value - mean) / T::from_count(n + 1)
}

/// Running mean of completed travel times with its trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MovingAverage {
    pub mean: f64,
    pub count: usize,
}

impl MovingAverage {
    pub fn push(&mut self, value: f64) -> f64 {
        self.mean = moving_average_update(self.mean, value, self.count);
        self.count += 1;
        self.mean
    }
}

/// First up-crossing and last down-crossing of `level`, linearly
/// interpolated between samples. `None` when the series never exceeds it.
pub fn excursion_window<T: Scalar>(series: &[(T, T)], level: T) -> Option<(T, T)> {
    let above = |i: usize| series[i].1 > level;
    let first = (0..series.len()).find(|&i| above(i))?;
    let last = (0..series.len()).rev().find(|&i| above(i))?;
    let cross = |a: (T, T), b: (T, T)| {
        if b.1 == a.1 {
            a.0
        } else {
            a.0 + (level - a.1) / (b.1 - a.1) * (b.0 - a.0)
        }
    };
    let t1 = if first == 0 { series[0].0 } else { cross(series[first - 1], series[first]) };
    let t2 = if last + 1 == series.len() {
        series[last].0
    } else {
        cross(series[last], series[last + 1])
    };
    Some((t1, t2))
}

/// Trapezoidal integral of max(μ − level, 0) over `[t1, t2]`, treating the
/// series as piecewise linear. Time in seconds; the result is in
/// (series unit)·hours.
pub fn excess_integral<T: Scalar>(series: &[(T, T)], level: T, t1: T, t2: T) -> T {
    let h = T::lit(3600.0);
    let mut total = T::zero();
    for w in series.windows(2) {
        let (ta, tb) = (w[0].0.max(t1), w[1].0.min(t2));
        if tb <= ta {
            continue;
        }
        let at = |t: T| {
            let f = (t - w[0].0) / (w[1].0 - w[0].0);
            w[0].1 + f * (w[1].1 - w[0].1) - level
        };
        let (ya, yb) = (at(ta), at(tb));
        total = total
            + if ya >= T::zero() && yb >= T::zero() {
                (ya + yb) / T::lit(2.0) * (tb - ta)
            } else if ya <= T::zero() && yb <= T::zero() {
                T::zero()
            } else {
                // One sign change: only the positive triangle counts.
                let tc = ta + ya / (ya - yb) * (tb - ta);
                if ya > T::zero() {
                    ya / T::lit(2.0) * (tc - ta)
                } else {
                    yb / T::lit(2.0) * (tb - tc)
                }
            };
    }
    total / h
}

/// ∫ μ dt over the window where μ exceeds μ_opt, computed as the excess over
/// μ_opt plus the μ_opt base; 0 when μ never exceeds μ_opt. Density in
/// vehicles per km, time in seconds, result in veh·h/km.
pub fn density_integral_above_opt<T: Scalar>(series: &[(T, T)], mu_opt: T) -> T {
    match excursion_window(series, mu_opt) {
        Some((t1, t2)) => density_integral_in_window(series, mu_opt, t1, t2),
        None => T::zero(),
    }
}

/// The same integral over a fixed window.
pub fn density_integral_in_window<T: Scalar>(series: &[(T, T)], mu_opt: T, t1: T, t2: T) -> T {
    excess_integral(series, mu_opt, t1, t2) + mu_opt * (t2 - t1) / T::lit(3600.0)
}

/// Integrals of two density curves over the shared window spanning both
/// curves' excursions above μ_opt.
pub fn paired_density_integrals<T: Scalar>(a: &[(T, T)], b: &[(T, T)], mu_opt: T) -> (T, T) {
    let wa = excursion_window(a, mu_opt);
    let wb = excursion_window(b, mu_opt);
    let (t1, t2) = match (wa, wb) {
        (None, None) => return (T::zero(), T::zero()),
        (Some(w), None) | (None, Some(w)) => w,
        (Some(x), Some(y)) => (x.0.min(y.0), x.1.max(y.1)),
    };
    (
        density_integral_in_window(a, mu_opt, t1, t2),
        density_integral_in_window(b, mu_opt, t1, t2),
    )
}

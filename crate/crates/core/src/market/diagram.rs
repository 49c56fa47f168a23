use serde::{Deserialize, Serialize};

use crate::num::Scalar;

/// Greenshields speed-density relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundamentalDiagram<T = f64> {
    /// Jam density, vehicles per km per lane.
    pub mu_jam: T,
    /// Speed on an empty road, m/s.
    pub v_free: T,
}

impl<T: Scalar> FundamentalDiagram<T> {
    pub fn new(mu_jam: T, v_free: T) -> Self {
        FundamentalDiagram { mu_jam, v_free }
    }

    /// Density of maximum flow; μ_jam / 2 for the linear speed law.
    pub fn mu_opt(&self) -> T {
        self.mu_jam / T::lit(2.0)
    }

    /// Vehicles per second per lane at density `mu`.
    pub fn flow(&self, mu: T) -> T {
        mu * speed_density(mu, self) / T::lit(1000.0)
    }
}

/// v(μ) = v_free · max(0, 1 − μ/μ_jam).
pub fn speed_density<T: Scalar>(mu: T, diagram: &FundamentalDiagram<T>) -> T {
    diagram.v_free * (T::one() - mu / diagram.mu_jam).max(T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn speed_examples() {
        let d = FundamentalDiagram::new(120.0, 15.0);
        assert_eq!(speed_density(0.0, &d), 15.0);
        assert_eq!(speed_density(120.0, &d), 0.0);
        assert_eq!(speed_density(60.0, &d), 7.5);
        assert_eq!(speed_density(500.0, &d), 0.0);
        let f = FundamentalDiagram::new(120.0f32, 15.0);
        assert_eq!(speed_density(60.0f32, &f), 7.5);
    }

    proptest! {
        #[test]
        fn optimum_maximises_flow(mu_jam in 10.0f64..300.0, v in 1.0f64..40.0, frac in 0.0f64..1.5) {
            let d = FundamentalDiagram::new(mu_jam, v);
            let opt = d.mu_opt();
            prop_assert!(0.0 < opt && opt < mu_jam);
            prop_assert!(d.flow(opt) >= d.flow(frac * mu_jam) - 1e-12);
        }
    }
}

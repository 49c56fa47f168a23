use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::RunConfig;
use crate::roadnet::NodeId;

/// Endowments of the tracked bidders in the single-intersection experiments.
pub const TRACKED_ENDOWMENTS: [f64; 9] = [10.0, 50.0, 100.0, 150.0, 200.0, 1000.0, 1500.0, 2000.0, 10000.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    pub vp_mean_kmh: f64,
    pub vp_sd_kmh: f64,
    pub vp_min_kmh: f64,
    pub vp_max_kmh: f64,
    pub bid_mean: f64,
    pub bid_sd: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self::from(&RunConfig::default())
    }
}

impl From<&RunConfig> for ProfileParams {
    fn from(c: &RunConfig) -> Self {
        ProfileParams {
            vp_mean_kmh: c.vp_mean_kmh,
            vp_sd_kmh: c.vp_sd_kmh,
            vp_min_kmh: c.vp_min_kmh,
            vp_max_kmh: c.vp_max_kmh,
            bid_mean: c.bid_mean,
            bid_sd: c.bid_sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverProfile {
    pub origin: NodeId,
    pub destination: NodeId,
    /// Preferred speed v_p, m/s.
    pub preferred_speed: f64,
    /// Weight of travel time; the cost weight is `1 - w_time`.
    pub w_time: f64,
    /// Private valuation b, cents.
    pub valuation: f64,
    /// Money spent so far, cents.
    pub spent: f64,
    /// Member of the tracked endowment sub-population.
    pub tracked: bool,
}

impl DriverProfile {
    pub fn w_cost(&self) -> f64 {
        1.0 - self.w_time
    }
}

/// Draws a driver: v_p from a normal truncated to `[vp_min, vp_max]` km/h
/// (by rejection), w_T uniform on `[0, 1]`, valuation normal clamped at 0.
pub fn sample_driver<R: Rng + ?Sized>(rng: &mut R, od: (NodeId, NodeId), params: &ProfileParams) -> DriverProfile {
    let vp = Normal::new(params.vp_mean_kmh, params.vp_sd_kmh.max(0.0)).expect("finite speed distribution");
    let kmh = loop {
        let x: f64 = vp.sample(rng);
        if (params.vp_min_kmh..=params.vp_max_kmh).contains(&x) {
            break x;
        }
    };
    let w_time = rng.random::<f64>();
    let bid = Normal::new(params.bid_mean, params.bid_sd.max(0.0)).expect("finite bid distribution");
    let valuation = bid.sample(rng).max(0.0);
    DriverProfile {
        origin: od.0,
        destination: od.1,
        preferred_speed: kmh / 3.6,
        w_time,
        valuation,
        spent: 0.0,
        tracked: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const OD: (NodeId, NodeId) = (NodeId(0), NodeId(1));

    #[test]
    fn same_seed_same_profile() {
        let p = ProfileParams::default();
        let a = sample_driver(&mut ChaCha8Rng::seed_from_u64(5), OD, &p);
        let b = sample_driver(&mut ChaCha8Rng::seed_from_u64(5), OD, &p);
        assert_eq!(a, b);
    }

    #[test]
    fn population_statistics() {
        let p = ProfileParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let drivers: Vec<_> = (0..10_000).map(|_| sample_driver(&mut rng, OD, &p)).collect();
        let kmh: Vec<f64> = drivers.iter().map(|d| d.preferred_speed * 3.6).collect();
        assert!(kmh.iter().all(|&v| (30.0 - 1e-9..=50.0 + 1e-9).contains(&v)));
        let mean_v = kmh.iter().sum::<f64>() / kmh.len() as f64;
        assert!((mean_v - 40.0).abs() < 0.5, "mean speed {mean_v}");
        let mean_b = drivers.iter().map(|d| d.valuation).sum::<f64>() / drivers.len() as f64;
        assert!((mean_b - 100.0).abs() < 1.0, "mean bid {mean_b}");
        assert!(drivers.iter().all(|d| d.valuation >= 0.0 && (0.0..=1.0).contains(&d.w_time)));
        assert!(drivers.iter().all(|d| (d.w_time + d.w_cost() - 1.0).abs() < 1e-15));
    }
}

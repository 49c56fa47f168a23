use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Fcfs,
    Ca,
    Cta,
    CaCta,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Fcfs, Mode::Ca, Mode::Cta, Mode::CaCta];

    pub fn is_auction(self) -> bool {
        matches!(self, Mode::Ca | Mode::CaCta)
    }

    pub fn is_priced(self) -> bool {
        matches!(self, Mode::Cta | Mode::CaCta)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Fcfs => "fcfs",
            Mode::Ca => "ca",
            Mode::Cta => "cta",
            Mode::CaCta => "ca-cta",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

/// How `lambda_per_min` is spread over the origin-destination pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DemandMode {
    /// λ is the expected number of arrivals per minute over the whole network.
    #[default]
    Aggregate,
    /// Every OD pair receives its own stream of rate λ.
    PerPair,
}

/// The `[run]` table: everything that parameterises one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,

    // demand
    pub lambda_per_min: f64,
    pub demand_mode: DemandMode,
    pub spawn_window_s: f64,
    /// Simulated time allowed after the spawn window before the run is cut.
    pub drain_cap_s: f64,
    pub dt_s: f64,

    // drivers
    pub vp_mean_kmh: f64,
    pub vp_sd_kmh: f64,
    pub vp_min_kmh: f64,
    pub vp_max_kmh: f64,
    pub bid_mean: f64,
    pub bid_sd: f64,
    /// Endowments given to the tracked sub-population.
    pub tracked_endowments: Vec<f64>,
    /// Share of spawned vehicles drawn into the tracked sub-population.
    pub tracked_fraction: f64,
    pub k_routes: usize,

    // car following
    pub idm_accel: f64,
    pub idm_decel: f64,
    pub idm_headway_s: f64,
    pub idm_min_gap_m: f64,
    pub idm_exponent: f64,

    // reservations
    /// Lowest speed a vehicle asks to cross at.
    pub min_cross_speed_mps: f64,
    /// Ticks between successive requests of a vehicle without reservation.
    pub retry_ticks: u32,
    /// Requests are only sent within this distance of the stop line
    /// (mesoscopic network runs).
    pub request_horizon_m: f64,

    // auction
    pub wp: f64,
    pub np: f64,
    /// WDP budget in outer passes.
    pub wdp_passes: u32,
    /// Wall-clock WDP budget in milliseconds; 0 uses `wdp_passes`.
    pub wdp_wall_ms: u64,
    /// Ticks spent collecting bids before a round closes.
    pub collect_ticks: u32,
    /// Ticks the winner determination takes before replies go out.
    pub wdp_ticks: u32,
    /// Auction bidders keep bidding for their booking every round until
    /// they are too close to the line to stop if they lose it.
    pub rebid_booked: bool,

    // market
    pub mu_jam_per_km: f64,
    pub price_floor: f64,
    pub price_epsilon: f64,
    pub price_period_s: f64,
    pub supply_share: f64,

    // meso
    /// Lowest crossing speed on network runs, where a vehicle leaving the
    /// stop line has no acceleration phase.
    pub meso_cross_speed_mps: f64,
    pub creep_speed_mps: f64,
    pub meso_accel: f64,
    pub meso_decel: f64,
    pub density_period_s: f64,

    pub debug_messages: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Fcfs,
            seed: 1,
            lambda_per_min: 15.0,
            demand_mode: DemandMode::Aggregate,
            spawn_window_s: 1800.0,
            drain_cap_s: 4.0 * 3600.0,
            dt_s: 1.0,
            vp_mean_kmh: 40.0,
            vp_sd_kmh: 5.0,
            vp_min_kmh: 30.0,
            vp_max_kmh: 50.0,
            bid_mean: 100.0,
            bid_sd: 25.0,
            tracked_endowments: Vec::new(),
            tracked_fraction: 0.0,
            k_routes: 10,
            idm_accel: 0.3,
            idm_decel: 3.0,
            idm_headway_s: 1.5,
            idm_min_gap_m: 2.0,
            idm_exponent: 1.0,
            min_cross_speed_mps: 1.2,
            retry_ticks: 1,
            request_horizon_m: 150.0,
            wp: 0.15,
            np: 0.5,
            wdp_passes: crate::auction::DEFAULT_PASSES,
            wdp_wall_ms: 0,
            collect_ticks: 1,
            wdp_ticks: 1,
            rebid_booked: true,
            mu_jam_per_km: 120.0,
            price_floor: 0.0,
            price_epsilon: 1.0,
            price_period_s: 10.0,
            supply_share: 0.5,
            meso_cross_speed_mps: 5.0,
            creep_speed_mps: 1.0,
            meso_accel: 1.5,
            meso_decel: 3.0,
            density_period_s: 10.0,
            debug_messages: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_per_min", self.lambda_per_min),
            ("spawn_window_s", self.spawn_window_s),
            ("dt_s", self.dt_s),
            ("vp_mean_kmh", self.vp_mean_kmh),
            ("idm_accel", self.idm_accel),
            ("idm_decel", self.idm_decel),
            ("idm_min_gap_m", self.idm_min_gap_m),
            ("min_cross_speed_mps", self.min_cross_speed_mps),
            ("mu_jam_per_km", self.mu_jam_per_km),
            ("price_period_s", self.price_period_s),
            ("density_period_s", self.density_period_s),
            ("supply_share", self.supply_share),
            ("meso_accel", self.meso_accel),
            ("meso_decel", self.meso_decel),
            ("creep_speed_mps", self.creep_speed_mps),
            ("meso_cross_speed_mps", self.meso_cross_speed_mps),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("`{key}` must be positive, got {v}")));
            }
        }
        for (key, v) in [("wp", self.wp), ("np", self.np), ("tracked_fraction", self.tracked_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("`{key}` must lie in [0, 1], got {v}")));
            }
        }
        if !(self.vp_min_kmh < self.vp_max_kmh) {
            return Err(Error::Config("vp_min_kmh must be below vp_max_kmh".into()));
        }
        if self.price_floor < 0.0 || self.drain_cap_s < 0.0 || self.price_epsilon < 0.0 {
            return Err(Error::Config("price_floor, price_epsilon and drain_cap_s must be non-negative".into()));
        }
        if self.wdp_passes == 0 && self.wdp_wall_ms == 0 {
            return Err(Error::Config("WDP budget must be positive".into()));
        }
        if self.k_routes == 0 || self.retry_ticks == 0 || self.collect_ticks == 0 {
            return Err(Error::Config("k_routes, retry_ticks and collect_ticks must be at least 1".into()));
        }
        if self.tracked_fraction > 0.0 && self.tracked_endowments.is_empty() {
            return Err(Error::Config("tracked_fraction set without tracked_endowments".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = toml::to_string(&c).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn mode_names() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            let v: toml::Value = toml::Value::try_from(m).unwrap();
            assert_eq!(v.as_str(), Some(m.as_str()));
        }
        assert!("vcg".parse::<Mode>().is_err());
    }

    #[test]
    fn invalid_values_are_reported() {
        let c = RunConfig { wp: 1.5, ..RunConfig::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { lambda_per_min: 0.0, ..RunConfig::default() };
        assert!(c.validate().is_err());
    }
}

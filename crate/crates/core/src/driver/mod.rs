//! Driver agents: profiles, route utility, route choice and bidding.

mod choice;
mod profile;

pub use choice::{
    attribute_utility, bidding_behavior, choose_route_ca_cta, choose_route_cta, reevaluate_route, route_utility,
    ChoiceSet, RouteCache,
};
pub use profile::{sample_driver, DriverProfile, ProfileParams, TRACKED_ENDOWMENTS};

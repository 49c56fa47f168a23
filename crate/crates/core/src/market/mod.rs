//! Posted and reserve prices for intersection incoming links.

mod diagram;
mod prices;

pub use diagram::{speed_density, FundamentalDiagram};
pub use prices::{
    excess_demand, supply, supply_count, update_price, LinkMarketState, Market, PriceLogRow, PriceRule, PriceVector,
};

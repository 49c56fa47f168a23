//! Road network graph, route enumeration and route attributes.

pub(crate) mod graph;
mod paths;
mod route;

pub use graph::{load_network, Link, LinkId, NetworkGraph, Node, NodeId};
pub use paths::{k_shortest_routes, k_shortest_routes_avoiding};
pub use route::{free_flow_time, route_price, LinkPrices, Route};

use std::collections::HashMap;
use std::sync::Arc;

use super::profile::DriverProfile;
use crate::error::{Error, Result};
use crate::isect::ReservationRequest;
use crate::num::Scalar;
use crate::roadnet::{k_shortest_routes_avoiding, route_price, LinkPrices, NetworkGraph, NodeId, Route};

/// Normalised attribute utility (M − x)/(M − m); 1 when all routes tie.
pub fn attribute_utility<T: Scalar>(x: T, min: T, max: T) -> T {
    let span = max - min;
    if span <= T::epsilon() * max.abs().max(T::one()) {
        T::one()
    } else {
        (max - x) / span
    }
}

/// Routes with their free-flow time and price attributes.
#[derive(Debug, Clone)]
pub struct ChoiceSet {
    pub routes: Vec<Route>,
    pub prices: Vec<f64>,
    pub min_time: f64,
    pub max_time: f64,
    pub min_price: f64,
    pub max_price: f64,
}

impl ChoiceSet {
    pub fn new<P: LinkPrices + ?Sized>(graph: &NetworkGraph, routes: Vec<Route>, prices: &P) -> Self {
        let costs: Vec<f64> = routes.iter().map(|r| route_price(graph, r, prices)).collect();
        let fold = |it: &mut dyn Iterator<Item = f64>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
        };
        let (min_time, max_time) = fold(&mut routes.iter().map(|r| r.free_flow_s));
        let (min_price, max_price) = fold(&mut costs.iter().copied());
        ChoiceSet {
            routes,
            prices: costs,
            min_time,
            max_time,
            min_price,
            max_price,
        }
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }
}

/// U(ρ) = w_T u_T(ρ) + w_K u_K(ρ).
pub fn route_utility(set: &ChoiceSet, route: usize, profile: &DriverProfile) -> f64 {
    let u_t = attribute_utility(set.routes[route].free_flow_s, set.min_time, set.max_time);
    let u_k = attribute_utility(set.prices[route], set.min_price, set.max_price);
    profile.w_time * u_t + profile.w_cost() * u_k
}

/// Utility maximiser; ties go to the faster route, then to the smaller
/// link-id sequence.
pub fn choose_route_cta(graph: &NetworkGraph, set: &ChoiceSet, profile: &DriverProfile) -> Result<usize> {
    if set.is_empty() {
        return Err(Error::EmptyChoiceSet {
            origin: graph.node(profile.origin).name.clone(),
            destination: graph.node(profile.destination).name.clone(),
        });
    }
    let utilities: Vec<f64> = (0..set.len()).map(|i| route_utility(set, i, profile)).collect();
    let best = (0..set.len())
        .min_by(|&a, &b| {
            utilities[b]
                .total_cmp(&utilities[a])
                .then(set.routes[a].cost_ns.cmp(&set.routes[b].cost_ns))
                .then_with(|| set.routes[a].rank_key(graph).cmp(&set.routes[b].rank_key(graph)))
        })
        .unwrap();
    Ok(best)
}

/// k-shortest choice sets keyed by (from, destination, avoided nodes).
#[derive(Debug, Default)]
pub struct RouteCache {
    k: usize,
    map: HashMap<(NodeId, NodeId, Vec<NodeId>), Arc<Vec<Route>>>,
}

impl RouteCache {
    pub fn new(k: usize) -> Self {
        RouteCache { k, map: HashMap::new() }
    }

    pub fn routes(
        &mut self,
        graph: &NetworkGraph,
        from: NodeId,
        destination: NodeId,
        avoid: &[NodeId],
    ) -> Result<Arc<Vec<Route>>> {
        let mut key_avoid = avoid.to_vec();
        key_avoid.sort_unstable();
        key_avoid.dedup();
        let key = (from, destination, key_avoid);
        if let Some(r) = self.map.get(&key) {
            return Ok(r.clone());
        }
        let routes = Arc::new(k_shortest_routes_avoiding(graph, from, destination, self.k, &key.2)?);
        self.map.insert(key, routes.clone());
        Ok(routes)
    }
}

/// Rebuilds the choice set from `from` under the current prices and returns
/// the utility maximiser. Nodes in `avoid` (already visited) are excluded so
/// the whole trip stays loopless.
#[allow(clippy::too_many_arguments)]
pub fn reevaluate_route<P: LinkPrices + ?Sized>(
    graph: &NetworkGraph,
    from: NodeId,
    destination: NodeId,
    avoid: &[NodeId],
    prices: &P,
    profile: &DriverProfile,
    cache: &mut RouteCache,
) -> Result<Route> {
    let routes = cache.routes(graph, from, destination, avoid)?;
    let set = ChoiceSet::new(graph, routes.to_vec(), prices);
    let i = choose_route_cta(graph, &set, profile)?;
    Ok(set.routes[i].clone())
}

/// Budget-filtered choice: the fastest route whose every priced link has a
/// reserve price within the valuation; if none qualifies, the route with the
/// smallest maximum reserve price.
pub fn choose_route_ca_cta<P: LinkPrices + ?Sized>(
    graph: &NetworkGraph,
    routes: &[Route],
    reserve: &P,
    profile: &DriverProfile,
) -> Result<usize> {
    if routes.is_empty() {
        return Err(Error::EmptyChoiceSet {
            origin: graph.node(profile.origin).name.clone(),
            destination: graph.node(profile.destination).name.clone(),
        });
    }
    let max_reserve = |r: &Route| {
        r.links
            .iter()
            .filter(|&&l| graph.is_incoming(l))
            .map(|&l| reserve.price(l))
            .fold(0.0, f64::max)
    };
    let order = |a: &usize, b: &usize| {
        routes[*a]
            .cost_ns
            .cmp(&routes[*b].cost_ns)
            .then_with(|| routes[*a].rank_key(graph).cmp(&routes[*b].rank_key(graph)))
    };
    let affordable = (0..routes.len())
        .filter(|&i| max_reserve(&routes[i]) <= profile.valuation)
        .min_by(order);
    Ok(affordable.unwrap_or_else(|| {
        (0..routes.len())
            .min_by(|a, b| max_reserve(&routes[*a]).total_cmp(&max_reserve(&routes[*b])).then_with(|| order(a, b)))
            .unwrap()
    }))
}

/// Attaches the driver's bid to a request. The whole valuation is bid; a
/// resubmission never goes below the previous bid, and the bid is lifted to
/// the reserve price when that exceeds the valuation.
pub fn bidding_behavior(
    profile: &DriverProfile,
    prior: Option<f64>,
    reserve: f64,
    mut request: ReservationRequest,
) -> ReservationRequest {
    let value = profile.valuation.max(reserve).max(prior.unwrap_or(0.0));
    request.bid = Some(value);
    request
}

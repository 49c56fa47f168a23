

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isect::GeometrySpec;
use crate::scenario::ScenarioDoc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub name: String,
    pub from: NodeId,
    pub to: NodeId,
    pub length_m: f64,
    pub vmax_mps: f64,
    pub lanes: u32,
    pub section_m: f64,
}

impl Link {
    /// Free-flow traversal time `length / vmax` in seconds.
    pub fn free_flow_time(&self) -> f64 {
        self.length_m / self.vmax_mps
    }
}

/// Immutable road graph. Built once by [`load_network`].
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    nodes: Vec<Node>,
    links: Vec<Link>,
    out_links: Vec<Vec<LinkId>>,
    in_links: Vec<Vec<LinkId>>,
    node_index: HashMap<String, NodeId>,
    link_index: HashMap<String, LinkId>,
    /// Position of each link in the sorted order of link names.
    link_rank: Vec<u32>,
    /// Free-flow time in integer nanoseconds; exact sums for path ordering.
    link_cost_ns: Vec<u64>,
    intersections: Vec<NodeId>,
    geometry: HashMap<NodeId, GeometrySpec>,
    incoming: Vec<bool>,
}

impl NetworkGraph {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.node_index.get(name).copied()
    }

    pub fn link_id(&self, name: &str) -> Option<LinkId> {
        self.link_index.get(name).copied()
    }

    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.out_links[node.0]
    }

    pub fn in_links(&self, node: NodeId) -> &[LinkId] {
        &self.in_links[node.0]
    }

    /// Nodes modelled as reservation-based intersections, in node order.
    pub fn intersections(&self) -> &[NodeId] {
        &self.intersections
    }

    pub fn is_intersection(&self, node: NodeId) -> bool {
        self.geometry.contains_key(&node)
    }

    pub fn geometry(&self, node: NodeId) -> Option<&GeometrySpec> {
        self.geometry.get(&node)
    }

    /// True when the link ends at an intersection.
    pub fn is_incoming(&self, link: LinkId) -> bool {
        self.incoming[link.0]
    }

    pub fn link_between(&self, from: NodeId, to: NodeId) -> Option<LinkId> {
        self.out_links[from.0]
            .iter()
            .copied()
            .find(|&l| self.links[l.0].to == to)
    }

    pub(crate) fn rank(&self, link: LinkId) -> u32 {
        self.link_rank[link.0]
    }

    pub(crate) fn cost_ns(&self, link: LinkId) -> u64 {
        self.link_cost_ns[link.0]
    }

    /// Distinct neighbouring nodes, ignoring direction.
    pub fn degree(&self, node: NodeId) -> usize {
        let mut nb = BTreeSet::new();
        for &l in &self.out_links[node.0] {
            nb.insert(self.links[l.0].to);
        }
        for &l in &self.in_links[node.0] {
            nb.insert(self.links[l.0].from);
        }
        nb.len()
    }
}

/// Validates a scenario document and builds the network graph.
///
/// A node becomes an intersection when it connects three or more roads. Such
/// nodes receive the geometry listed for them in the document, or the
/// document's default geometry, or the built-in default.
pub fn load_network(doc: &ScenarioDoc) -> Result<NetworkGraph> {
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    let mut node_index = HashMap::new();
    for n in &doc.nodes {
        if !n.x.is_finite() || !n.y.is_finite() {
            return Err(Error::Schema(format!("node `{}` has non-finite coordinates", n.id)));
        }
        let id = NodeId(nodes.len());
        if node_index.insert(n.id.clone(), id).is_some() {
            return Err(Error::DuplicateId(n.id.clone()));
        }
        nodes.push(Node {
            name: n.id.clone(),
            x: n.x,
            y: n.y,
        });
    }

    let mut links = Vec::with_capacity(doc.links.len());
    let mut link_index = HashMap::new();
    let mut out_links = vec![Vec::new(); nodes.len()];
    let mut in_links = vec![Vec::new(); nodes.len()];
    for l in &doc.links {
        let endpoint = |name: &str| {
            node_index.get(name).copied().ok_or_else(|| Error::DanglingEndpoint {
                link: l.id.clone(),
                node: name.to_string(),
            })
        };
        let from = endpoint(&l.from)?;
        let to = endpoint(&l.to)?;
        if from == to {
            return Err(Error::Schema(format!("link `{}` is a self-loop", l.id)));
        }
        for (field, value) in [
            ("length_m", l.length_m),
            ("vmax_mps", l.vmax_mps),
            ("section_m", l.section_m),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositive {
                    element: format!("link `{}`", l.id),
                    field,
                    value,
                });
            }
        }
        if l.lanes == 0 {
            return Err(Error::NonPositive {
                element: format!("link `{}`", l.id),
                field: "lanes",
                value: 0.0,
            });
        }
        let id = LinkId(links.len());
        if link_index.insert(l.id.clone(), id).is_some() {
            return Err(Error::DuplicateId(l.id.clone()));
        }
        out_links[from.0].push(id);
        in_links[to.0].push(id);
        links.push(Link {
            id,
            name: l.id.clone(),
            from,
            to,
            length_m: l.length_m,
            vmax_mps: l.vmax_mps,
            lanes: l.lanes,
            section_m: l.section_m,
        });
    }

    let mut order: Vec<usize> = (0..links.len()).collect();
    order.sort_by(|&a, &b| links[a].name.cmp(&links[b].name));
    let mut link_rank = vec![0u32; links.len()];
    for (rank, &i) in order.iter().enumerate() {
        link_rank[i] = rank as u32;
    }
    let link_cost_ns = links
        .iter()
        .map(|l| ((l.free_flow_time() * 1e9).round() as u64).max(1))
        .collect();

    let mut graph = NetworkGraph {
        nodes,
        links,
        out_links,
        in_links,
        node_index,
        link_index,
        link_rank,
        link_cost_ns,
        intersections: Vec::new(),
        geometry: HashMap::new(),
        incoming: Vec::new(),
    };

    let mut declared = HashMap::new();
    for isect in &doc.intersections {
        let id = graph
            .node_id(&isect.node)
            .ok_or_else(|| Error::Schema(format!("intersection at unknown node `{}`", isect.node)))?;
        if declared.insert(id, isect.geometry.clone()).is_some() {
            return Err(Error::DuplicateId(isect.node.clone()));
        }
    }
    let fallback = doc.default_geometry.clone().unwrap_or_default();
    for i in 0..graph.nodes.len() {
        let id = NodeId(i);
        let degree = graph.degree(id);
        match declared.remove(&id) {
            Some(spec) if degree >= 3 => {
                graph.geometry.insert(id, spec);
            }
            Some(_) => {
                return Err(Error::Schema(format!(
                    "node `{}` is declared an intersection but connects only {degree} roads",
                    graph.nodes[i].name
                )));
            }
            None if degree >= 3 => {
                graph.geometry.insert(id, fallback.clone());
            }
            None => {}
        }
    }
    graph.intersections = (0..graph.nodes.len())
        .map(NodeId)
        .filter(|n| graph.geometry.contains_key(n))
        .collect();
    graph.incoming = graph
        .links
        .iter()
        .map(|l| graph.geometry.contains_key(&l.to))
        .collect();
    for spec in graph.geometry.values() {
        spec.validate()?;
    }
    Ok(graph)
}

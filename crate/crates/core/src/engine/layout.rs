//! Placement of the roads around each intersection box.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::isect::{IntersectionGeometry, Side, Turn};
use crate::roadnet::{LinkId, NetworkGraph, NodeId};

/// An intersection with its box and the side of every incident link.
#[derive(Debug, Clone)]
pub struct Junction {
    pub node: NodeId,
    pub name: String,
    pub geometry: Arc<IntersectionGeometry>,
    side_in: BTreeMap<LinkId, Side>,
    side_out: BTreeMap<LinkId, Side>,
    incoming: [Option<LinkId>; 4],
}

impl Junction {
    pub fn side_in(&self, link: LinkId) -> Option<Side> {
        self.side_in.get(&link).copied()
    }

    pub fn side_out(&self, link: LinkId) -> Option<Side> {
        self.side_out.get(&link).copied()
    }

    /// The incoming link on `side`.
    pub fn incoming(&self, side: Side) -> Option<LinkId> {
        self.incoming[side.index()]
    }

    /// Turn made going from `from` into `to`; `None` for a U-turn or links
    /// that do not touch this junction.
    pub fn turn(&self, from: LinkId, to: LinkId) -> Option<Turn> {
        self.side_in(from)?.turn_to(self.side_out(to)?)
    }
}

/// Side of the box facing a neighbour at offset (dx, dy).
fn bearing_side(dx: f64, dy: f64) -> Side {
    if dx.abs() >= dy.abs() {
        if dx >= 0.0 {
            Side::East
        } else {
            Side::West
        }
    } else if dy >= 0.0 {
        Side::North
    } else {
        Side::South
    }
}

fn lanes_u8(graph: &NetworkGraph, link: LinkId) -> Result<u8> {
    let l = graph.link(link);
    u8::try_from(l.lanes).map_err(|_| Error::Schema(format!("link `{}` has too many lanes", l.name)))
}

/// Builds the box of every intersection. Roads listed in the geometry's
/// `approaches` get the given side (as does the opposite direction of the
/// same road); the others are placed by the compass bearing of their far
/// node. Two roads on one side are a schema error.
pub fn build_junctions(graph: &NetworkGraph) -> Result<Vec<Junction>> {
    let mut out = Vec::with_capacity(graph.intersections().len());
    for &node in graph.intersections() {
        let spec = graph.geometry(node).cloned().unwrap_or_default();
        let here = graph.node(node);
        let name = here.name.clone();

        let mut explicit: BTreeMap<NodeId, Side> = BTreeMap::new();
        for a in &spec.approaches {
            let link = graph
                .link_id(&a.link)
                .ok_or_else(|| Error::Schema(format!("intersection `{name}`: unknown approach link `{}`", a.link)))?;
            let l = graph.link(link);
            let far = if l.to == node {
                l.from
            } else if l.from == node {
                l.to
            } else {
                return Err(Error::Schema(format!(
                    "intersection `{name}`: approach link `{}` does not touch it",
                    a.link
                )));
            };
            explicit.insert(far, a.side);
        }
        let side_of = |far: NodeId| {
            explicit.get(&far).copied().unwrap_or_else(|| {
                let n = graph.node(far);
                bearing_side(n.x - here.x, n.y - here.y)
            })
        };

        let mut owner: [Option<NodeId>; 4] = [None; 4];
        let mut claim = |side: Side, far: NodeId| -> Result<()> {
            match owner[side.index()] {
                Some(other) if other != far => Err(Error::Schema(format!(
                    "intersection `{name}`: roads to `{}` and `{}` both face {side:?}; list `approaches` explicitly",
                    graph.node(other).name,
                    graph.node(far).name
                ))),
                _ => {
                    owner[side.index()] = Some(far);
                    Ok(())
                }
            }
        };

        let (mut lanes_in, mut lanes_out) = ([0u8; 4], [0u8; 4]);
        let (mut side_in, mut side_out) = (BTreeMap::new(), BTreeMap::new());
        let mut incoming = [None; 4];
        for &l in graph.in_links(node) {
            let side = side_of(graph.link(l).from);
            claim(side, graph.link(l).from)?;
            lanes_in[side.index()] = lanes_u8(graph, l)?;
            side_in.insert(l, side);
            incoming[side.index()] = Some(l);
        }
        for &l in graph.out_links(node) {
            let side = side_of(graph.link(l).to);
            claim(side, graph.link(l).to)?;
            lanes_out[side.index()] = lanes_u8(graph, l)?;
            side_out.insert(l, side);
        }
        let geometry = IntersectionGeometry::new(&spec, lanes_in, lanes_out)?;
        out.push(Junction {
            node,
            name: name.clone(),
            geometry: Arc::new(geometry),
            side_in,
            side_out,
            incoming,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isect::ApproachSpec;
    use crate::roadnet::graph::tests::{doc, link};
    use crate::roadnet::load_network;

    fn cross(explicit: Vec<ApproachSpec>) -> Result<(NetworkGraph, Vec<Junction>)> {
        let mut d = doc(
            &[("C", 0.0, 0.0), ("N", 0.0, 100.0), ("E", 100.0, 10.0), ("S", 5.0, -100.0), ("W", -100.0, 0.0)],
            ["N", "E", "S", "W"]
                .iter()
                .flat_map(|x| [link(&format!("{x}C"), x, "C", 100.0), link(&format!("C{x}"), "C", x, 100.0)])
                .collect(),
        );
        if !explicit.is_empty() {
            d.intersections.push(crate::scenario::IntersectionDoc {
                node: "C".into(),
                geometry: crate::isect::GeometrySpec {
                    approaches: explicit,
                    ..Default::default()
                },
            });
        }
        let g = load_network(&d).unwrap();
        let js = build_junctions(&g)?;
        Ok((g, js))
    }

    #[test]
    fn sides_follow_bearings() {
        let (g, js) = cross(vec![]).unwrap();
        let j = &js[0];
        let id = |n: &str| g.link_id(n).unwrap();
        assert_eq!(j.side_in(id("NC")), Some(Side::North));
        assert_eq!(j.side_in(id("EC")), Some(Side::East));
        assert_eq!(j.side_in(id("SC")), Some(Side::South));
        assert_eq!(j.side_in(id("WC")), Some(Side::West));
        assert_eq!(j.side_out(id("CS")), Some(Side::South));
        assert_eq!(j.incoming(Side::West), Some(id("WC")));
        assert_eq!(j.geometry.lanes_in(Side::North), 1);
    }

    #[test]
    fn explicit_approach_overrides_bearing() {
        // Swap N and E by hand: the two roads trade sides.
        let (g, js) = cross(vec![
            ApproachSpec { link: "NC".into(), side: Side::East },
            ApproachSpec { link: "CE".into(), side: Side::North },
        ])
        .unwrap();
        let id = |n: &str| g.link_id(n).unwrap();
        assert_eq!(js[0].side_in(id("NC")), Some(Side::East));
        assert_eq!(js[0].side_out(id("CN")), Some(Side::East));
        assert_eq!(js[0].side_in(id("EC")), Some(Side::North));
    }

    #[test]
    fn turns_at_a_cross() {
        let (_, js) = cross(vec![]).unwrap();
        let j = &js[0];
        let by_side = |s: Side| j.incoming(s).unwrap();
        let out_to = |s: Side| *j.side_out.iter().find(|(_, &v)| v == s).unwrap().0;
        assert_eq!(j.turn(by_side(Side::South), out_to(Side::North)), Some(Turn::Straight));
        assert_eq!(j.turn(by_side(Side::South), out_to(Side::East)), Some(Turn::Right));
        assert_eq!(j.turn(by_side(Side::South), out_to(Side::West)), Some(Turn::Left));
        assert_eq!(j.turn(by_side(Side::South), out_to(Side::South)), None);
    }

    #[test]
    fn crowded_side_needs_explicit_approaches() {
        let d = doc(
            &[("C", 0.0, 0.0), ("A", 100.0, 5.0), ("B", 100.0, -5.0), ("W", -100.0, 0.0)],
            vec![link("AC", "A", "C", 100.0), link("BC", "B", "C", 100.0), link("WC", "W", "C", 100.0)],
        );
        assert!(build_junctions(&load_network(&d).unwrap()).is_err());

        let d = doc(
            &[("C", 0.0, 0.0), ("A", 100.0, 5.0), ("B", 100.0, -5.0), ("W", -100.0, 0.0)],
            vec![link("AC", "A", "C", 100.0), link("BC", "B", "C", 100.0), link("WC", "W", "C", 100.0)],
        );
        let mut d = d;
        d.intersections.push(crate::scenario::IntersectionDoc {
            node: "C".into(),
            geometry: crate::isect::GeometrySpec {
                approaches: vec![ApproachSpec { link: "BC".into(), side: Side::South }],
                ..Default::default()
            },
        });
        assert!(build_junctions(&load_network(&d).unwrap()).is_ok());
    }
}
